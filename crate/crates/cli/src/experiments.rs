//! Seeded end-to-end runs and the per-seed checks applied to them.

use std::time::{Duration, Instant};

use tslab_core::datagen::{generate_dataset, sample_task_vectors, Dataset};
use tslab_core::numerics::{streams, Rng};
use tslab_core::spectral_edit::{trace_ordering, TraceOrdering};
use tslab_core::trainer::{direct_step, draw_noise, init_state, lr_schedule, step_with_noise, train_with};
use tslab_core::{BlockWeights, SignalNoiseState, TrajectoryLog, TrajectoryRecord};

use crate::config::{parse_config, ExperimentConfig};
use crate::error::CliError;

pub const PRESET_TEXT: &str = include_str!("../../../configs/two_stage.conf");
/// Larger `ζ` norm to fall back on when `r = 1e-7` is too small to resolve.
pub const FALLBACK_R: f64 = 1e-2;

pub fn preset() -> ExperimentConfig {
    parse_config(PRESET_TEXT).expect("bundled preset parses")
}

/// Task vectors from substream `TASK` of `seed` with `gamma0` taken from
/// the config, then the prompts.
pub fn build_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<Dataset, CliError> {
    let master = Rng::new(seed, 0);
    let mut tv = sample_task_vectors(&mut master.substream(streams::TASK), cfg.d, cfg.u, cfg.r)?;
    tv.gamma0 = cfg.gamma0;
    Ok(generate_dataset(&master, &tv, cfg.n, cfg.len))
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub dataset: Dataset,
    pub log: TrajectoryLog,
    pub state: SignalNoiseState,
    /// Total weights at the configured snapshot epochs.
    pub snapshots: Vec<(usize, BlockWeights)>,
    pub elapsed: Duration,
}

impl SeedRun {
    pub fn switch(&self) -> &TrajectoryRecord {
        self.log.switch_record().expect("switch epoch is recorded")
    }

    pub fn last(&self) -> &TrajectoryRecord {
        self.log.final_record().expect("log is never empty")
    }
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun, CliError> {
    let start = Instant::now();
    let dataset = build_dataset(cfg, seed)?;
    let mut snapshots = Vec::new();
    let (log, state) = train_with(&cfg.train_config(seed), &dataset, |s, _| {
        if cfg.snapshot_epochs.contains(&s.epoch) {
            snapshots.push((s.epoch, s.total()));
        }
    })?;
    Ok(SeedRun {
        seed,
        dataset,
        log,
        state,
        snapshots,
        elapsed: start.elapsed(),
    })
}

/// One run per configured seed, seeds in parallel. Results keep seed order.
pub fn run_all(cfg: &ExperimentConfig) -> Result<Vec<SeedRun>, CliError> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .seeds
            .iter()
            .map(|&seed| scope.spawn(move || run_seed(cfg, seed)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    })
}

/// Result of one check on one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedVerdict {
    pub seed: u64,
    pub pass: bool,
    pub detail: String,
}

pub fn count_passing(v: &[SeedVerdict]) -> usize {
    v.iter().filter(|x| x.pass).count()
}

fn verdicts(runs: &[SeedRun], check: impl Fn(&SeedRun) -> (bool, String)) -> Vec<SeedVerdict> {
    runs.iter()
        .map(|r| {
            let (pass, detail) = check(r);
            SeedVerdict {
                seed: r.seed,
                pass,
                detail,
            }
        })
        .collect()
}

/// `acc_p ≥ 0.95`, `acc_q ≤ 0.65` at the switch; `acc_q ≥ 0.90`, `acc_p ≥ 0.95` at the end.
pub fn two_stage_accuracy(runs: &[SeedRun]) -> Vec<SeedVerdict> {
    verdicts(runs, |r| {
        let (s, f) = (r.switch(), r.last());
        let pass = s.acc_p >= 0.95 && s.acc_q <= 0.65 && f.acc_q >= 0.90 && f.acc_p >= 0.95;
        let detail = format!(
            "switch acc_p={:.3} acc_q={:.3}; final acc_p={:.3} acc_q={:.3}; {:.2}s",
            s.acc_p,
            s.acc_q,
            f.acc_p,
            f.acc_q,
            r.elapsed.as_secs_f64()
        );
        (pass, detail)
    })
}

/// `k2 > k1`, `k2 ≥ 0.4`, `k1 ≤ 0.2` at the switch.
pub fn loss_ordering(runs: &[SeedRun]) -> Vec<SeedVerdict> {
    verdicts(runs, |r| {
        let s = r.switch();
        let pass = s.k2_loss > s.k1_loss && s.k2_loss >= 0.4 && s.k1_loss <= 0.2;
        (pass, format!("switch k1={:.4} k2={:.4}", s.k1_loss, s.k2_loss))
    })
}

/// Elementary-stage norm signature: `‖W̄‖ ≥ 10‖V̄‖` and `k1 < k2` at the switch.
pub fn elementary_signature(runs: &[SeedRun]) -> Vec<SeedVerdict> {
    verdicts(runs, |r| {
        let s = r.switch();
        let pass = s.fro_w_bar >= 10.0 * s.fro_v_bar && s.k1_loss < s.k2_loss;
        let detail = format!(
            "switch fro_w_bar={:.4e} fro_v_bar={:.4e} k1={:.4} k2={:.4}",
            s.fro_w_bar, s.fro_v_bar, s.k1_loss, s.k2_loss
        );
        (pass, detail)
    })
}

/// Specialized-stage signature: `‖V̄‖` grows tenfold after the switch while
/// `k1` moves by at most 0.1.
pub fn specialized_signature(runs: &[SeedRun]) -> Vec<SeedVerdict> {
    verdicts(runs, |r| {
        let (s, f) = (r.switch(), r.last());
        let pass = f.fro_v_bar >= 10.0 * s.fro_v_bar && (f.k1_loss - s.k1_loss).abs() <= 0.1;
        let detail = format!(
            "fro_v_bar switch={:.4e} final={:.4e}; k1 switch={:.4} final={:.4}",
            s.fro_v_bar, f.fro_v_bar, s.k1_loss, f.k1_loss
        );
        (pass, detail)
    })
}

/// All three norm conditions together.
pub fn norm_trajectory(runs: &[SeedRun]) -> Vec<SeedVerdict> {
    verdicts(runs, |r| {
        let (s, f) = (r.switch(), r.last());
        let a = s.fro_w_bar >= 10.0 * s.fro_v_bar;
        let b = f.fro_v_bar >= 10.0 * s.fro_v_bar;
        let c = (f.k1_loss - s.k1_loss).abs() <= 0.1;
        let detail = format!(
            "w/v at switch {:.2} [{}], v growth {:.3} [{}], |dk1| {:.4} [{}]",
            s.fro_w_bar / s.fro_v_bar,
            ok(a),
            f.fro_v_bar / s.fro_v_bar,
            ok(b),
            (f.k1_loss - s.k1_loss).abs(),
            ok(c)
        );
        (a && b && c, detail)
    })
}

pub fn trace_order(runs: &[SeedRun]) -> Vec<SeedVerdict> {
    verdicts(runs, |r| {
        let t: TraceOrdering = trace_ordering(&r.log).expect("switch epoch is recorded");
        let detail = format!(
            "switch tr_w={:.4} tr_v={:.4} [{}]; final tr_w={:.4} tr_v={:.4} [{}]",
            t.at_switch.0,
            t.at_switch.1,
            ok(t.stage1_holds),
            t.at_final.0,
            t.at_final.1,
            ok(t.stage2_holds)
        );
        (t.stage1_holds && t.stage2_holds, detail)
    })
}

/// `dist_w_star` finite and smaller at the switch than at epoch 0.
pub fn target_approach(runs: &[SeedRun]) -> Vec<SeedVerdict> {
    verdicts(runs, |r| {
        let (a, b) = (r.log.records[0].dist_w_star, r.switch().dist_w_star);
        let pass = a.is_finite() && b.is_finite() && b < a;
        (pass, format!("dist_w_star epoch0={a:.6} switch={b:.6}"))
    })
}

/// Steps the split state and an undecomposed copy with the same noise draws.
/// Returns the largest one-step relative gap and the final cumulative one.
pub fn decomposition_drift(cfg: &ExperimentConfig, seed: u64) -> Result<(f64, f64), CliError> {
    let ds = build_dataset(cfg, seed)?;
    let tc = cfg.train_config(seed);
    let master = Rng::new(seed, 0);
    let mut noise = master.substream(streams::NOISE);
    let mut state = init_state(&tc, &mut master.substream(streams::INIT), cfg.d);
    let mut direct = state.total();
    let mut worst_step: f64 = 0.0;
    for e in 0..cfg.epochs {
        let eta = lr_schedule(e, &tc);
        let xi = draw_noise(&mut noise, cfg.d, cfg.tau_xi);
        let one = direct_step(&state.total(), &ds, eta, cfg.lambda, &xi);
        direct = direct_step(&direct, &ds, eta, cfg.lambda, &xi);
        state = step_with_noise(&state, &ds, eta, cfg.lambda, &xi)?;
        let total = state.total();
        worst_step = worst_step.max(rel_gap(&total, &one));
    }
    Ok((worst_step, rel_gap(&state.total(), &direct)))
}

fn rel_gap(a: &BlockWeights, b: &BlockWeights) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "no"
    }
}
