//! Registry of invariant checks run by `tslab properties`.
//!
//! Every case is paired with the test that covers the same invariant in
//! `properties.index` (one `name<TAB>path::test_fn` line per case).

use std::fmt::Write as _;
use std::fs;
use std::sync::OnceLock;

use tslab_core::datagen::{embed_prompt, sample_task_vectors, sample_token, seeded_dataset, Label, Prompt};
use tslab_core::gradient::{empirical_loss, finite_diff_with, gradient_agreement, gradients, logistic_loss, AGREEMENT_TOL};
use tslab_core::model::{forward_full, forward_g, forward_h, BlockWeights};
use tslab_core::numerics::{gaussian_matrix, norm2, streams, svd_default, Matrix, Rng};
use tslab_core::spectral_edit::{truncate_svd, EditOrder, EditSpec, EditTarget};
use tslab_core::trainer::{default_noise_variance, lr_schedule, train_with, InitMode};
use tslab_core::Component;

use crate::commands::cmd_train;
use crate::config::{parse_config, ExperimentConfig};
use crate::experiments::{
    count_passing, elementary_signature, preset, run_all, specialized_signature, target_approach, SeedRun,
};

pub const INDEX: &str = include_str!("../properties.index");
/// Seeds needed for a stage-level diagnostic to count as holding.
pub const MAJORITY: usize = 4;
const PRESET_SEEDS: &[u64] = &[0, 1, 2, 3, 4];

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

pub struct PropertyCase {
    pub name: &'static str,
    pub module: &'static str,
    pub seeds: &'static [u64],
    pub tolerance: f64,
    pub criterion: &'static str,
    /// The behavioural claim the case stands for.
    pub claim: &'static str,
    pub run: fn() -> Outcome,
}

const SEEDS_20: &[u64] = &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19];

pub fn registry() -> Vec<PropertyCase> {
    vec![
        PropertyCase {
            name: "numerics_determinism",
            module: "numerics",
            seeds: SEEDS_20,
            tolerance: 0.0,
            criterion: "identical (seed, stream) gives bit-identical samples and SVDs",
            claim: "reproducibility",
            run: numerics_determinism,
        },
        PropertyCase {
            name: "svd_orthonormality",
            module: "numerics",
            seeds: SEEDS_20,
            tolerance: 1e-9,
            criterion: "‖UᵀU − I‖_F and ‖VᵀV − I‖_F within tolerance",
            claim: "SVD accuracy",
            run: svd_orthonormality,
        },
        PropertyCase {
            name: "norm_trace_consistency",
            module: "numerics",
            seeds: SEEDS_20,
            tolerance: 1e-10,
            criterion: "‖M‖_F² = tr(MᵀM) relative",
            claim: "norm and trace agree",
            run: norm_trace_consistency,
        },
        PropertyCase {
            name: "x2_support",
            module: "datagen",
            seeds: &[0],
            tolerance: 0.0,
            criterion: "x2 ∈ {z, z−ζ, z+ζ} exactly, x2 = z iff y = +1, over 10⁴ tokens",
            claim: "specialized component has no noise",
            run: x2_support,
        },
        PropertyCase {
            name: "p_separability",
            module: "datagen",
            seeds: &[1],
            tolerance: 1e-12,
            criterion: "y·⟨w*, x1⟩ = γ₀ + |⟨w*, e⟩| > 0 for every token",
            claim: "elementary component is linearly separable",
            run: p_separability,
        },
        PropertyCase {
            name: "x1_norm_bound",
            module: "datagen",
            seeds: &[2],
            tolerance: 0.01,
            criterion: "fraction of tokens with ‖x1‖ > u + γ₀ below 1% (d=10, u=7, r=0.1)",
            claim: "token norm bound",
            run: x1_norm_bound,
        },
        PropertyCase {
            name: "label_row_support",
            module: "datagen",
            seeds: SEEDS_20,
            tolerance: 0.0,
            criterion: "Ỹ has 2(L−1) nonzero slots, query slots zero",
            claim: "query label hidden",
            run: label_row_support,
        },
        PropertyCase {
            name: "output_decomposition",
            module: "model",
            seeds: &[3],
            tolerance: 1e-12,
            criterion: "|f − (h/2 + g/2)| on 1000 random instances",
            claim: "output splits over components",
            run: output_decomposition,
        },
        PropertyCase {
            name: "positive_homogeneity",
            module: "model",
            seeds: &[4],
            tolerance: 1e-12,
            criterion: "h(cW) = c·h(W) for c > 0",
            claim: "ReLU homogeneity",
            run: positive_homogeneity,
        },
        PropertyCase {
            name: "query_label_masking",
            module: "model",
            seeds: &[5],
            tolerance: 0.0,
            criterion: "flipping the query label leaves f, h, g unchanged",
            claim: "query label hidden",
            run: query_label_masking,
        },
        PropertyCase {
            name: "relu_value_convention",
            module: "model",
            seeds: &[],
            tolerance: 0.0,
            criterion: "a zero pre-activation adds exactly 0",
            claim: "activation convention",
            run: relu_value_convention,
        },
        PropertyCase {
            name: "gradient_agreement",
            module: "gradient",
            seeds: SEEDS_20,
            tolerance: AGREEMENT_TOL,
            criterion: "max relative error analytic vs central differences on kink-guarded entries (d=5, L=8, N=4)",
            claim: "closed-form gradients",
            run: gradient_agreement_case,
        },
        PropertyCase {
            name: "k_chain_rule",
            module: "gradient",
            seeds: &[0, 1, 2, 3, 4],
            tolerance: 1e-6,
            criterion: "∇ of K in the signal part equals ∇L̂ at the total weight",
            claim: "signal loss has the same gradient",
            run: k_chain_rule,
        },
        PropertyCase {
            name: "loss_convexity",
            module: "gradient",
            seeds: &[6],
            tolerance: 1e-12,
            criterion: "logistic loss at the midpoint ≤ mean of endpoint losses",
            claim: "convex loss in the output",
            run: loss_convexity,
        },
        PropertyCase {
            name: "decomposition_drift",
            module: "trainer",
            seeds: &[0],
            tolerance: 1e-8,
            criterion: "Ū + Ũ vs directly stepped U: ≤ 1e-10 per step, ≤ 1e-8 cumulative over 400 epochs",
            claim: "exact signal/noise split",
            run: decomposition_drift_case,
        },
        PropertyCase {
            name: "noise_law",
            module: "trainer",
            seeds: &[0],
            tolerance: 2.0,
            criterion: "noise-part entry variance within [0.5, 2]·τ₀² at every epoch of a 400-epoch constant-rate run",
            claim: "stationary injected noise",
            run: noise_law,
        },
        PropertyCase {
            name: "zero_noise_descent",
            module: "trainer",
            seeds: &[0],
            tolerance: 1e-12,
            criterion: "with τ_ξ = 0, λ = 0 and η ≤ 0.1, L̂ never increases on the synthetic config",
            claim: "small-step descent",
            run: zero_noise_descent,
        },
        PropertyCase {
            name: "schedule_column",
            module: "trainer",
            seeds: PRESET_SEEDS,
            tolerance: 0.0,
            criterion: "recorded eta equals the schedule on every row",
            claim: "two-rate schedule",
            run: schedule_column,
        },
        PropertyCase {
            name: "elementary_stage_signature",
            module: "metrics",
            seeds: PRESET_SEEDS,
            tolerance: 0.0,
            criterion: "at the switch ‖W̄‖ ≥ 10‖V̄‖ and k1 < k2, on ≥ 4 of 5 seeds",
            claim: "elementary stage learns P and not Q",
            run: elementary_stage_signature,
        },
        PropertyCase {
            name: "specialized_stage_signature",
            module: "metrics",
            seeds: PRESET_SEEDS,
            tolerance: 0.1,
            criterion: "‖V̄‖ grows ≥ 10× after the switch while |Δk1| ≤ 0.1, on ≥ 4 of 5 seeds",
            claim: "specialized stage learns Q and keeps P",
            run: specialized_stage_signature,
        },
        PropertyCase {
            name: "target_approach",
            module: "metrics",
            seeds: PRESET_SEEDS,
            tolerance: 0.0,
            criterion: "dist_w_star finite and lower at the switch than at epoch 0, on ≥ 4 of 5 seeds",
            claim: "W̄ moves toward the rank-one target",
            run: target_approach_case,
        },
        PropertyCase {
            name: "k_equals_l_hat",
            module: "metrics",
            seeds: PRESET_SEEDS,
            tolerance: 1e-12,
            criterion: "|k_loss − l_hat| on every record",
            claim: "K is the training loss",
            run: k_equals_l_hat,
        },
        PropertyCase {
            name: "edit_complementarity",
            module: "spectral_edit",
            seeds: SEEDS_20,
            tolerance: 1e-9,
            criterion: "top-k plus bottom-(d−k) reconstructions sum to M",
            claim: "SVD components partition",
            run: edit_complementarity,
        },
        PropertyCase {
            name: "edit_idempotence",
            module: "spectral_edit",
            seeds: SEEDS_20,
            tolerance: 1e-9,
            criterion: "largest-first truncation applied twice equals once",
            claim: "edit is a projection",
            run: edit_idempotence,
        },
        PropertyCase {
            name: "edit_monotone_frobenius",
            module: "spectral_edit",
            seeds: SEEDS_20,
            tolerance: 1e-12,
            criterion: "‖truncate(M, ρ)‖_F non-decreasing in ρ (largest first)",
            claim: "kept energy grows with ρ",
            run: edit_monotone_frobenius,
        },
        PropertyCase {
            name: "end_to_end_determinism",
            module: "cli",
            seeds: &[7],
            tolerance: 0.0,
            criterion: "two train runs give byte-identical trajectory.csv",
            claim: "reproducibility",
            run: end_to_end_determinism,
        },
        PropertyCase {
            name: "config_round_trip",
            module: "cli",
            seeds: &[],
            tolerance: 0.0,
            criterion: "summary config text parses back to the same effective config",
            claim: "config echo",
            run: config_round_trip,
        },
        PropertyCase {
            name: "suite_completeness",
            module: "docs_and_properties",
            seeds: &[],
            tolerance: 0.0,
            criterion: "every case has exactly one index line and every index line names a case",
            claim: "coverage bookkeeping",
            run: suite_completeness,
        },
    ]
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub name: &'static str,
    pub module: &'static str,
    pub claim: &'static str,
    pub outcome: Outcome,
}

pub fn run_case(case: &PropertyCase) -> CaseResult {
    CaseResult {
        name: case.name,
        module: case.module,
        claim: case.claim,
        outcome: (case.run)(),
    }
}

/// Runs every case; the report has one line per case and a final tally.
pub fn run_all_properties() -> (bool, String) {
    let mut report = String::new();
    let mut all = true;
    let cases = registry();
    let mut passed = 0;
    for case in &cases {
        let r = run_case(case);
        all &= r.outcome.pass;
        passed += r.outcome.pass as usize;
        writeln!(
            report,
            "{} {:<28} [{}] ({}) {}",
            if r.outcome.pass { "PASS" } else { "FAIL" },
            r.name,
            r.module,
            r.claim,
            r.outcome.detail
        )
        .expect("write to string");
    }
    writeln!(report, "{passed}/{} properties hold", cases.len()).expect("write to string");
    (all, report)
}

/// Index lines as `(case name, test identifier)`.
pub fn index_entries() -> Vec<(&'static str, &'static str)> {
    INDEX
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('\t'))
        .map(|(a, b)| (a.trim(), b.trim()))
        .collect()
}

// ---- shared fixtures ----

fn preset_runs() -> &'static [SeedRun] {
    static RUNS: OnceLock<Vec<SeedRun>> = OnceLock::new();
    RUNS.get_or_init(|| run_all(&preset()).expect("preset runs"))
}

fn random_weights(seed: u64, d: usize, sigma: f64) -> BlockWeights {
    let mut rng = Rng::new(seed, 77);
    BlockWeights::new(gaussian_matrix(&mut rng, d, d, sigma), gaussian_matrix(&mut rng, d, d, sigma))
}

fn majority(verdicts: &[crate::experiments::SeedVerdict]) -> Outcome {
    let n = count_passing(verdicts);
    let detail = verdicts
        .iter()
        .map(|v| format!("seed {}: {}", v.seed, v.detail))
        .collect::<Vec<_>>()
        .join(" | ");
    Outcome::new(n >= MAJORITY, format!("{n}/{} seeds; {detail}", verdicts.len()))
}

// ---- numerics ----

fn numerics_determinism() -> Outcome {
    let ok = SEEDS_20.iter().all(|&s| {
        let a = gaussian_matrix(&mut Rng::new(s, 9), 6, 6, 1.0);
        let b = gaussian_matrix(&mut Rng::new(s, 9), 6, 6, 1.0);
        let sa = svd_default(&a).expect("svd");
        let sb = svd_default(&b).expect("svd");
        a == b && sa.singulars == sb.singulars && sa.left == sb.left && sa.right_t == sb.right_t
    });
    Outcome::new(ok, "20 seeds")
}

fn svd_orthonormality() -> Outcome {
    let mut worst: f64 = 0.0;
    for &s in SEEDS_20 {
        let n = 2 + (s as usize % 9);
        let m = gaussian_matrix(&mut Rng::new(s, 1), n, n, 1.0);
        let r = svd_default(&m).expect("svd");
        let id = Matrix::identity(n);
        worst = worst
            .max(r.left.transpose().matmul(&r.left).sub(&id).frobenius_norm())
            .max(r.right_t.matmul(&r.right_t.transpose()).sub(&id).frobenius_norm());
    }
    Outcome::new(worst <= 1e-9, format!("worst {worst:.2e}"))
}

fn norm_trace_consistency() -> Outcome {
    let mut worst: f64 = 0.0;
    for &s in SEEDS_20 {
        let m = gaussian_matrix(&mut Rng::new(s, 2), 7, 7, 2.0);
        let f2 = m.frobenius_norm().powi(2);
        worst = worst.max((f2 - m.transpose().matmul(&m).trace()).abs() / f2);
    }
    Outcome::new(worst <= 1e-10, format!("worst {worst:.2e}"))
}

// ---- datagen ----

fn x2_support() -> Outcome {
    let tv = sample_task_vectors(&mut Rng::new(0, streams::TASK), 10, 7.0, 1e-7).expect("task");
    let minus: Vec<f64> = tv.z.iter().zip(&tv.zeta).map(|(z, k)| z - k).collect();
    let plus: Vec<f64> = tv.z.iter().zip(&tv.zeta).map(|(z, k)| z + k).collect();
    let mut rng = Rng::new(0, 11);
    let bad = (0..10_000)
        .filter(|_| {
            let t = sample_token(&mut rng, &tv);
            match t.label {
                Label::Pos => t.x2 != tv.z,
                Label::Neg => t.x2 != minus && t.x2 != plus,
            }
        })
        .count();
    Outcome::new(bad == 0, format!("{bad} violations in 10000 tokens"))
}

fn p_separability() -> Outcome {
    let tv = sample_task_vectors(&mut Rng::new(1, streams::TASK), 10, 7.0, 1e-7).expect("task");
    let mut rng = Rng::new(1, 11);
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let t = sample_token(&mut rng, &tv);
        let m = t.label.value() * tslab_core::numerics::dot(&t.x1, &tv.w_star);
        worst = worst.min(m - tv.gamma0);
    }
    Outcome::new(worst >= -1e-12, format!("min margin − γ₀ = {worst:.3e}"))
}

fn x1_norm_bound() -> Outcome {
    let tv = sample_task_vectors(&mut Rng::new(2, streams::TASK), 10, 7.0, 0.1).expect("task");
    let mut rng = Rng::new(2, 11);
    let over = (0..10_000)
        .filter(|_| norm2(&sample_token(&mut rng, &tv).x1) > tv.u + tv.gamma0)
        .count();
    let frac = over as f64 / 10_000.0;
    Outcome::new(frac < 0.01, format!("fraction above bound {frac}"))
}

fn label_row_support() -> Outcome {
    let ok = SEEDS_20.iter().all(|&s| {
        let len = 2 + s as usize;
        let ds = seeded_dataset(s, 3, 3.0, 0.5, 2, len).expect("dataset");
        ds.prompts.iter().all(|ep| {
            ep.y_tilde[len - 1] == 0.0
                && ep.y_tilde[2 * len - 1] == 0.0
                && ep.y_tilde.iter().filter(|y| **y != 0.0).count() == 2 * (len - 1)
        })
    });
    Outcome::new(ok, "L = 2..21")
}

// ---- model ----

fn output_decomposition() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..1000u64 {
        let d = 2 + (k % 5) as usize;
        let len = 2 + (k % 7) as usize;
        let ds = seeded_dataset(3 * 1000 + k, d, 3.0, 0.5, 1, len).expect("dataset");
        let ep = &ds.prompts[0];
        let bw = random_weights(k, d, 0.1 + (k % 13) as f64);
        let f = forward_full(&bw, ep);
        worst = worst.max((f - 0.5 * forward_h(&bw.w, ep) - 0.5 * forward_g(&bw.v, ep)).abs());
    }
    Outcome::new(worst <= 1e-12, format!("worst {worst:.2e}"))
}

fn positive_homogeneity() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..100u64 {
        let ds = seeded_dataset(4000 + k, 4, 3.0, 0.5, 1, 6).expect("dataset");
        let ep = &ds.prompts[0];
        let w = random_weights(k, 4, 1.0).w;
        let c = 0.01 + k as f64;
        let b = c * forward_h(&w, ep);
        worst = worst.max((forward_h(&w.scale(c), ep) - b).abs() / b.abs().max(1.0));
    }
    Outcome::new(worst <= 1e-12, format!("worst {worst:.2e}"))
}

fn query_label_masking() -> Outcome {
    let ok = (0..100u64).all(|k| {
        let ds = seeded_dataset(5000 + k, 4, 3.0, 0.5, 1, 5).expect("dataset");
        let mut ep = ds.prompts[0].clone();
        let bw = random_weights(k, 4, 1.0);
        let before = (forward_full(&bw, &ep), forward_h(&bw.w, &ep), forward_g(&bw.v, &ep));
        ep.query_label = ep.query_label.flip();
        before == (forward_full(&bw, &ep), forward_h(&bw.w, &ep), forward_g(&bw.v, &ep))
    });
    Outcome::new(ok, "100 prompts")
}

fn relu_value_convention() -> Outcome {
    let p = Prompt {
        x1: Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]),
        x2: Matrix::zeros(2, 2),
        labels: vec![Label::Pos, Label::Neg],
    };
    let ep = embed_prompt(&p);
    let pre = tslab_core::model::pre_activations(&Matrix::identity(2), &ep, Component::Elementary)[0];
    let h = forward_h(&Matrix::identity(2), &ep);
    Outcome::new(pre == 0.0 && h == 0.0, format!("pre={pre} h={h}"))
}

// ---- gradient ----

fn gradient_agreement_case() -> Outcome {
    let r = gradient_agreement(SEEDS_20.iter().copied(), gradients);
    Outcome::new(
        r.passed(),
        format!("max rel err {:.2e}, {} checked, {} kink-skipped", r.max_rel_err, r.checked, r.kink_skipped),
    )
}

fn k_chain_rule() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in 0..5u64 {
        let ds = seeded_dataset(s, 3, 2.0, 0.5, 3, 5).expect("dataset");
        let u_bar = random_weights(s, 3, 1.0);
        let u_tilde = random_weights(s ^ 0x5555, 3, 1.0);
        let through_k = finite_diff_with(&u_bar, 1e-6, |ub| empirical_loss(&ub.add(&u_tilde), &ds, 0.0).l_hat);
        let direct = gradients(&u_bar.add(&u_tilde), &ds);
        let e = through_k.sub(&direct);
        worst = worst.max(e.w.max_abs()).max(e.v.max_abs());
    }
    Outcome::new(worst <= 1e-6, format!("worst {worst:.2e}"))
}

fn loss_convexity() -> Outcome {
    let mut rng = Rng::new(6, 0);
    let ok = (0..10_000).all(|_| {
        let a = 100.0 * (rng.uniform() - 0.5);
        let b = 100.0 * (rng.uniform() - 0.5);
        logistic_loss(0.5 * (a + b)) <= 0.5 * (logistic_loss(a) + logistic_loss(b)) + 1e-12
    });
    Outcome::new(ok, "10000 pairs")
}

// ---- trainer ----

fn decomposition_drift_case() -> Outcome {
    let (step, total) = crate::experiments::decomposition_drift(&drift_config(), 0).expect("drift run");
    Outcome::new(
        step <= 1e-10 && total <= 1e-8,
        format!("max step {step:.2e}, cumulative {total:.2e}"),
    )
}

/// Preset sizes and schedule with Gaussian init and the default noise level.
pub fn drift_config() -> ExperimentConfig {
    let mut cfg = preset();
    cfg.init_mode = InitMode::Gaussian;
    cfg.tau_xi = default_noise_variance(cfg.tau0, cfg.eta1, cfg.lambda).sqrt();
    cfg
}

fn noise_law() -> Outcome {
    let mut cfg = preset();
    cfg.init_mode = InitMode::Gaussian;
    cfg.switch_epoch = cfg.epochs;
    cfg.tau_xi = default_noise_variance(cfg.tau0, cfg.eta1, cfg.lambda).sqrt();
    let ds = seeded_dataset(0, cfg.d, cfg.u, cfg.r, 1, 2).expect("dataset");
    let t2 = cfg.tau0 * cfg.tau0;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    train_with(&cfg.train_config(0), &ds, |s, _| {
        let xs: Vec<f64> = s.u_tilde.w.data().iter().chain(s.u_tilde.v.data()).copied().collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        lo = lo.min(var / t2);
        hi = hi.max(var / t2);
    })
    .expect("noise run");
    Outcome::new(lo >= 0.5 && hi <= 2.0, format!("variance/τ₀² in [{lo:.3}, {hi:.3}]"))
}

fn zero_noise_descent() -> Outcome {
    let mut cfg = preset();
    cfg.eta1 = 0.1;
    cfg.eta2 = 0.01;
    cfg.lambda = 0.0;
    cfg.tau_xi = 0.0;
    let ds = crate::experiments::build_dataset(&cfg, 0).expect("dataset");
    let mut prev = f64::INFINITY;
    let mut worst_rise = 0.0f64;
    train_with(&cfg.train_config(0), &ds, |_, rec| {
        worst_rise = worst_rise.max(rec.l_hat - prev);
        prev = rec.l_hat;
    })
    .expect("descent run");
    Outcome::new(worst_rise <= 1e-12, format!("largest increase {worst_rise:.2e}"))
}

fn schedule_column() -> Outcome {
    let runs = preset_runs();
    let ok = runs
        .iter()
        .all(|r| r.log.records.iter().all(|rec| rec.eta == lr_schedule(rec.epoch, &r.log.config)));
    Outcome::new(ok, format!("{} runs", runs.len()))
}

// ---- metrics ----

fn elementary_stage_signature() -> Outcome {
    majority(&elementary_signature(preset_runs()))
}

fn specialized_stage_signature() -> Outcome {
    majority(&specialized_signature(preset_runs()))
}

fn target_approach_case() -> Outcome {
    majority(&target_approach(preset_runs()))
}

fn k_equals_l_hat() -> Outcome {
    let worst = preset_runs()
        .iter()
        .flat_map(|r| r.log.records.iter())
        .map(|rec| (rec.k_loss - rec.l_hat).abs())
        .fold(0.0f64, f64::max);
    Outcome::new(worst <= 1e-12, format!("worst {worst:.2e}"))
}

// ---- spectral_edit ----

fn both(rho: f64, order: EditOrder) -> EditSpec {
    EditSpec::new(rho, order, EditTarget::Both)
}

fn edit_complementarity() -> Outcome {
    let mut worst: f64 = 0.0;
    for &s in SEEDS_20 {
        let m = gaussian_matrix(&mut Rng::new(s, 4), 10, 10, 1.0);
        let k = 1 + (s as usize % 9);
        let rho = k as f64 / 10.0;
        let top = truncate_svd(&m, &both(rho, EditOrder::LargestFirst)).expect("svd");
        let rest = truncate_svd(&m, &both(1.0 - rho, EditOrder::SmallestFirst)).expect("svd");
        worst = worst.max(top.add(&rest).sub(&m).frobenius_norm() / m.frobenius_norm());
    }
    Outcome::new(worst <= 1e-9, format!("worst {worst:.2e}"))
}

fn edit_idempotence() -> Outcome {
    let mut worst: f64 = 0.0;
    for &s in SEEDS_20 {
        let m = gaussian_matrix(&mut Rng::new(s, 5), 10, 10, 1.0);
        let spec = both(0.05 + 0.045 * s as f64, EditOrder::LargestFirst);
        let once = truncate_svd(&m, &spec).expect("svd");
        let twice = truncate_svd(&once, &spec).expect("svd");
        worst = worst.max(twice.sub(&once).frobenius_norm() / m.frobenius_norm());
    }
    Outcome::new(worst <= 1e-9, format!("worst {worst:.2e}"))
}

fn edit_monotone_frobenius() -> Outcome {
    let ok = SEEDS_20.iter().all(|&s| {
        let m = gaussian_matrix(&mut Rng::new(s, 6), 10, 10, 1.0);
        let norms: Vec<f64> = (1..=10)
            .map(|i| truncate_svd(&m, &both(i as f64 / 10.0, EditOrder::LargestFirst)).expect("svd").frobenius_norm())
            .collect();
        norms.windows(2).all(|w| w[0] <= w[1] + 1e-12)
    });
    Outcome::new(ok, "rho grid 0.1..1.0")
}

// ---- cli ----

fn end_to_end_determinism() -> Outcome {
    let base = std::env::temp_dir().join(format!("tslab-determinism-{}", std::process::id()));
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let mut cfg = preset();
        cfg.n = 16;
        cfg.len = 16;
        cfg.epochs = 40;
        cfg.seeds = vec![7];
        cfg.snapshot_epochs = vec![];
        cfg.output_dir = base.join(run);
        let dirs = cmd_train(&cfg, false).expect("train");
        bytes.push(fs::read(dirs[0].join("trajectory.csv")).expect("read trajectory"));
    }
    let _ = fs::remove_dir_all(&base);
    Outcome::new(bytes[0] == bytes[1], format!("{} bytes", bytes[0].len()))
}

fn config_round_trip() -> Outcome {
    let cfg = preset();
    let ok = parse_config(&cfg.to_text()).as_ref() == Ok(&cfg);
    let defaults = parse_config("d=10\nL=8\nN=4\nu=7\nr=0.1\neta1=1\neta2=0.1\nswitch_epoch=2\nepochs=4\n").expect("parse");
    let ok2 = parse_config(&defaults.to_text()).as_ref() == Ok(&defaults);
    Outcome::new(ok && ok2, "preset and all-defaults configs")
}

fn suite_completeness() -> Outcome {
    let names: Vec<&str> = registry().iter().map(|c| c.name).collect();
    let entries = index_entries();
    let unpaired: Vec<&str> = names
        .iter()
        .filter(|n| entries.iter().filter(|(e, _)| e == *n).count() != 1)
        .copied()
        .collect();
    let orphans: Vec<&str> = entries
        .iter()
        .filter(|(e, _)| !names.contains(e))
        .map(|(e, _)| *e)
        .collect();
    Outcome::new(
        unpaired.is_empty() && orphans.is_empty(),
        format!("{} cases, unpaired {unpaired:?}, orphan index lines {orphans:?}", names.len()),
    )
}
