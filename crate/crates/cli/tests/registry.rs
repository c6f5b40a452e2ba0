use std::fs;
use std::path::Path;

use tslab_cli::properties::{index_entries, registry, run_case};

fn check(name: &str) {
    let case = registry().into_iter().find(|c| c.name == name).expect("registered case");
    let r = run_case(&case);
    assert!(r.outcome.pass, "{name}: {}", r.outcome.detail);
}

#[test]
fn index_pairs_every_case() {
    check("suite_completeness");
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    for (case, id) in index_entries() {
        let (file, func) = id.split_once("::").expect("path::function");
        let src = fs::read_to_string(root.join(file)).unwrap_or_else(|e| panic!("{case}: {file}: {e}"));
        assert!(src.contains(&format!("fn {func}(")), "{case}: no `fn {func}` in {file}");
    }
}

#[test]
fn case_names_are_unique() {
    let mut names: Vec<_> = registry().iter().map(|c| c.name).collect();
    let n = names.len();
    names.sort_unstable();
    names.dedup();
    assert_eq!(names.len(), n);
}

#[test]
fn token_norms_mostly_within_bound() {
    check("x1_norm_bound");
}

#[test]
fn noise_part_stays_stationary() {
    check("noise_law");
}

#[test]
fn small_steps_descend_without_noise() {
    check("zero_noise_descent");
}

#[test]
fn recorded_rates_follow_schedule() {
    check("schedule_column");
}

#[test]
fn elementary_stage_signature_holds() {
    check("elementary_stage_signature");
}

#[test]
fn signal_moves_toward_target() {
    check("target_approach");
}

#[test]
fn fast_cases_pass() {
    for name in [
        "numerics_determinism",
        "svd_orthonormality",
        "x2_support",
        "p_separability",
        "label_row_support",
        "output_decomposition",
        "query_label_masking",
        "relu_value_convention",
        "gradient_agreement",
        "k_chain_rule",
        "edit_complementarity",
        "edit_idempotence",
        "config_round_trip",
    ] {
        check(name);
    }
}
