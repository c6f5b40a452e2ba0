use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use tslab_core::gradient::{gradient_agreement, gradients, GradCheckReport, AGREEMENT_TOL};
use tslab_core::io::{self as fmt_io, FormatError};
use tslab_core::spectral_edit::{edited_eval, trace_ordering, EditOrder, EditRow, EditTarget};
use tslab_core::trainer::theory_constants;
use tslab_core::{BlockWeights, SignalNoiseState, TheoryConstants, TrajectoryRecord};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiments::{build_dataset, run_seed, SeedRun};

pub fn seed_dir(cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    cfg.output_dir.join(format!("seed-{seed}"))
}

pub fn snapshot_name(epoch: usize) -> String {
    format!("weights-epoch-{epoch}.txt")
}

fn write_file(path: &Path, f: impl FnOnce(&mut fs::File) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f(&mut file).map_err(|e| CliError::io(path, e))
}

/// Trains every seed and writes one output directory per seed.
pub fn cmd_train(cfg: &ExperimentConfig, save_dataset: bool) -> Result<Vec<PathBuf>, CliError> {
    let mut dirs = Vec::new();
    for &seed in &cfg.seeds {
        let run = run_seed(cfg, seed)?;
        let dir = seed_dir(cfg, seed);
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        write_run(cfg, &run, &dir, save_dataset)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

pub fn write_run(cfg: &ExperimentConfig, run: &SeedRun, dir: &Path, save_dataset: bool) -> Result<(), CliError> {
    let save = |name: &str, f: &dyn Fn(&mut std::io::BufWriter<fs::File>) -> std::io::Result<()>| {
        let path = dir.join(name);
        fmt_io::save(&path, f).map_err(|e| CliError::io(&path, e))
    };
    save("trajectory.csv", &|w| fmt_io::write_trajectory(w, &run.log.records))?;
    for (epoch, bw) in &run.snapshots {
        save(&snapshot_name(*epoch), &|w| fmt_io::write_weights(w, bw))?;
    }
    if save_dataset {
        save("dataset.txt", &|w| fmt_io::write_dataset(w, &run.dataset))?;
    }
    let summary = summary_text(cfg, run);
    let path = dir.join("summary.txt");
    write_file(&path, |f| std::io::Write::write_all(f, summary.as_bytes()))
}

/// The effective config followed by `#`-prefixed results, so the file
/// itself parses as a config.
pub fn summary_text(cfg: &ExperimentConfig, run: &SeedRun) -> String {
    let mut s = cfg.to_text();
    let tc = theory_constants(cfg.d, cfg.len, cfg.u, cfg.r, cfg.gamma0, cfg.tau0, cfg.eta1, cfg.lambda);
    let mut line = |text: String| writeln!(s, "# {text}").expect("write to string");
    line(format!("seed = {}", run.seed));
    line(format!("runtime_seconds = {:.3}", run.elapsed.as_secs_f64()));
    for (k, v) in constants_rows(&tc) {
        line(format!("{k} = {v:e}"));
    }
    for (label, rec) in [("switch", run.log.switch_record()), ("final", run.log.final_record())] {
        let Some(rec) = rec else { continue };
        for col in ["acc_full", "acc_p", "acc_q", "k1_loss", "k2_loss", "fro_w_bar", "fro_v_bar", "trace_w", "trace_v"] {
            line(format!("{label}.{col} = {:e}", rec.column(col).expect("known column")));
        }
    }
    if let Some(t) = trace_ordering(&run.log) {
        line(format!("trace_stage1_holds = {}", t.stage1_holds));
        line(format!("trace_stage2_holds = {}", t.stage2_holds));
    }
    for (epoch, w, v) in &run.log.spectra {
        let fmt = |xs: &[f64]| xs.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(" ");
        line(format!("spectrum_w[{epoch}] = {}", fmt(w)));
        line(format!("spectrum_v[{epoch}] = {}", fmt(v)));
    }
    s
}

pub fn cmd_gradcheck(seeds: u64) -> GradCheckReport {
    gradient_agreement(0..seeds, gradients)
}

pub fn gradcheck_text(r: &GradCheckReport) -> String {
    format!(
        "gradcheck: seeds={} checked={} kink_skipped={} max_rel_err={:.3e} tol={:e} {}\n",
        r.seeds,
        r.checked,
        r.kink_skipped,
        r.max_rel_err,
        AGREEMENT_TOL,
        if r.passed() { "PASS" } else { "FAIL" }
    )
}

pub fn load_weights(path: &Path) -> Result<BlockWeights, CliError> {
    let f = fmt_io::open(path).map_err(|e| CliError::io(path, e))?;
    fmt_io::read_weights(f).map_err(|e| CliError::format(path, e))
}

/// Edits a weight snapshot over the config's rho grid, for both orders and
/// all targets, and evaluates on the dataset regenerated from `seed`.
pub fn cmd_edit(cfg: &ExperimentConfig, snapshot: &Path, seed: u64, out: &Path) -> Result<Vec<EditRow>, CliError> {
    let bw = load_weights(snapshot)?;
    if bw.d() != cfg.d {
        return Err(CliError::DimensionMismatch {
            expected: cfg.d,
            found: bw.d(),
        });
    }
    let ds = build_dataset(cfg, seed)?;
    let state = SignalNoiseState {
        u_bar: bw,
        u_tilde: BlockWeights::zeros(cfg.d),
        epoch: 0,
    };
    let mut rows = Vec::new();
    for order in EditOrder::ALL {
        for target in EditTarget::ALL {
            rows.extend(edited_eval(&state, &ds, &cfg.rho_grid, order, target)?);
        }
    }
    fmt_io::save(out, |w| fmt_io::write_edit_rows(w, &rows)).map_err(|e| CliError::io(out, e))?;
    Ok(rows)
}

/// Whitespace-separated columns from a trajectory CSV, `epoch` first.
/// `all` selects every column.
pub fn cmd_plotdata(csv: &Path, columns: &[String]) -> Result<String, CliError> {
    let f = fmt_io::open(csv).map_err(|e| CliError::io(csv, e))?;
    let records = fmt_io::read_trajectory(f).map_err(|e: FormatError| CliError::format(csv, e))?;
    plotdata(&records, columns)
}

pub fn plotdata(records: &[TrajectoryRecord], columns: &[String]) -> Result<String, CliError> {
    let mut cols: Vec<&str> = vec!["epoch"];
    for c in columns {
        if c == "all" {
            cols.extend(TrajectoryRecord::COLUMNS.iter().skip(1));
        } else if c != "epoch" {
            if !TrajectoryRecord::COLUMNS.contains(&c.as_str()) {
                return Err(CliError::UnknownColumn(c.clone()));
            }
            cols.push(c);
        }
    }
    let mut s = format!("# {}\n", cols.join(" "));
    for rec in records {
        let cells: Vec<String> = cols
            .iter()
            .map(|c| match *c {
                "epoch" => rec.epoch.to_string(),
                c => format!("{:.16e}", rec.column(c).expect("validated column")),
            })
            .collect();
        writeln!(s, "{}", cells.join(" ")).expect("write to string");
    }
    Ok(s)
}

fn constants_rows(tc: &TheoryConstants) -> [(&'static str, f64); 5] {
    [
        ("eps_w1", tc.eps_w1),
        ("eps_v1", tc.eps_v1),
        ("t1", tc.t1),
        ("t2", tc.t2),
        ("eta2_theory", tc.eta2_theory),
    ]
}

pub fn cmd_constants(cfg: &ExperimentConfig) -> String {
    let tc = theory_constants(cfg.d, cfg.len, cfg.u, cfg.r, cfg.gamma0, cfg.tau0, cfg.eta1, cfg.lambda);
    let mut s = String::new();
    for (k, v) in constants_rows(&tc) {
        writeln!(s, "{k:<12} {v:.10e}").expect("write to string");
    }
    writeln!(s, "{:<12} {}", "switch_epoch", cfg.switch_epoch).expect("write to string");
    writeln!(s, "{:<12} {}", "epochs", cfg.epochs).expect("write to string");
    s
}
