//! Noisy full-batch gradient descent with a two-rate schedule.
//!
//! The update is `U ← (1 − ηλ)U − η(∇L̂(U) + ξ)` with `ξ` i.i.d.
//! `N(0, τ_ξ²)`. It is carried out on the split `U = Ū + Ũ`:
//!
//! ```text
//! Ū ← (1 − ηλ)Ū − η∇L̂(Ū + Ũ)      Ū₀ = 0
//! Ũ ← (1 − ηλ)Ũ − ηξ               Ũ₀ = U₀
//! ```
//!
//! One step is taken per epoch over the full dataset.

use thiserror::Error;

use crate::datagen::Dataset;
use crate::gradient::gradients;
use crate::metrics::{record_epoch, spectrum_pair, TrajectoryLog, TrajectoryRecord};
use crate::model::BlockWeights;
use crate::numerics::{gaussian_matrix, streams, Rng, SvdError};

/// Signal norm above which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;
/// Scale of the `near_zero` initialization relative to `tau0`.
pub const NEAR_ZERO_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Gaussian,
    NearZero,
}

impl InitMode {
    pub fn name(self) -> &'static str {
        match self {
            InitMode::Gaussian => "gaussian",
            InitMode::NearZero => "near_zero",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" => Some(InitMode::Gaussian),
            "near_zero" => Some(InitMode::NearZero),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub eta1: f64,
    pub eta2: f64,
    pub switch_epoch: usize,
    pub lambda: f64,
    pub tau0: f64,
    pub tau_xi: f64,
    pub epochs: usize,
    pub seed: u64,
    pub init_mode: InitMode,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite weights at epoch {epoch} (signal norm {norm:e})")]
    NonFinite { epoch: usize, norm: f64 },
    #[error("signal weights diverged at epoch {epoch} (norm {norm:e})")]
    Divergence { epoch: usize, norm: f64 },
    #[error("spectrum at epoch {epoch}: {source}")]
    Spectrum { epoch: usize, source: SvdError },
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        let finite = [self.eta1, self.eta2, self.lambda, self.tau0, self.tau_xi];
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("rates, lambda, tau0 and tau_xi must be finite".into());
        }
        if !(self.eta1 > self.eta2 && self.eta2 >= 0.0) {
            return bad(format!("need eta1 > eta2 >= 0, got eta1={} eta2={}", self.eta1, self.eta2));
        }
        if self.lambda < 0.0 {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.lambda > 0.0 && self.eta1 * self.lambda >= 1.0 {
            return bad(format!("eta1*lambda must be < 1, got {}", self.eta1 * self.lambda));
        }
        if self.tau0 < 0.0 || self.tau_xi < 0.0 {
            return bad("tau0 and tau_xi must be >= 0".into());
        }
        if self.switch_epoch < 1 {
            return bad("switch_epoch must be >= 1".into());
        }
        if self.epochs != 0 && self.epochs < self.switch_epoch {
            return bad(format!(
                "switch_epoch {} exceeds epochs {}",
                self.switch_epoch, self.epochs
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalNoiseState {
    pub u_bar: BlockWeights,
    pub u_tilde: BlockWeights,
    pub epoch: usize,
}

impl SignalNoiseState {
    pub fn total(&self) -> BlockWeights {
        self.u_bar.add(&self.u_tilde)
    }

    pub fn d(&self) -> usize {
        self.u_bar.d()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    pub eps_w1: f64,
    pub eps_v1: f64,
    pub t1: f64,
    pub t2: f64,
    pub eta2_theory: f64,
}

/// Scales and stage lengths implied by the hyperparameters. `t1` and `t2`
/// are infinite when `lambda = 0`.
#[allow(clippy::too_many_arguments)]
pub fn theory_constants(
    d: usize,
    len: usize,
    u: f64,
    r: f64,
    gamma0: f64,
    tau0: f64,
    eta1: f64,
    lambda: f64,
) -> TheoryConstants {
    let d_f = d as f64;
    let spread = (d_f * d_f.ln() / len as f64).sqrt();
    let eps_v1 = tau0 * (u + r).powi(2) * spread;
    let eps_w1 = tau0 * (u + gamma0).powi(2) * spread;
    let t1 = 1.0 / (4.0 * eta1 * lambda);
    let eta2_theory = eta1 * lambda * lambda * eps_v1 * eps_v1 * r;
    let t2 = (1.0 / eps_v1).ln().powi(2) / (4.0 * eta2_theory * lambda * eps_v1 * eps_v1);
    TheoryConstants {
        eps_w1,
        eps_v1,
        t1,
        t2,
        eta2_theory,
    }
}

pub fn theory_for(cfg: &TrainConfig, ds: &Dataset) -> TheoryConstants {
    let t = &ds.task;
    theory_constants(ds.d, ds.len, t.u, t.r, t.gamma0, cfg.tau0, cfg.eta1, cfg.lambda)
}

/// `τ_ξ² = (τ₀² − (1 − η₁λ)²τ₀²) / η₁²`, the variance that keeps the noise
/// part stationary at `τ₀²` under rate `η₁`.
pub fn default_noise_variance(tau0: f64, eta1: f64, lambda: f64) -> f64 {
    let shrink = 1.0 - eta1 * lambda;
    (tau0 * tau0 - shrink * shrink * tau0 * tau0) / (eta1 * eta1)
}

pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    if epoch < cfg.switch_epoch {
        cfg.eta1
    } else {
        cfg.eta2
    }
}

pub fn init_state(cfg: &TrainConfig, rng: &mut Rng, d: usize) -> SignalNoiseState {
    let sigma = match cfg.init_mode {
        InitMode::Gaussian => cfg.tau0,
        InitMode::NearZero => cfg.tau0 * NEAR_ZERO_SCALE,
    };
    let w = gaussian_matrix(rng, d, d, sigma);
    let v = gaussian_matrix(rng, d, d, sigma);
    SignalNoiseState {
        u_bar: BlockWeights::zeros(d),
        u_tilde: BlockWeights::new(w, v),
        epoch: 0,
    }
}

pub fn draw_noise(rng: &mut Rng, d: usize, tau_xi: f64) -> BlockWeights {
    let w = gaussian_matrix(rng, d, d, tau_xi);
    let v = gaussian_matrix(rng, d, d, tau_xi);
    BlockWeights::new(w, v)
}

/// One update of both recursions with a given noise draw.
pub fn step_with_noise(
    state: &SignalNoiseState,
    ds: &Dataset,
    eta: f64,
    lambda: f64,
    xi: &BlockWeights,
) -> Result<SignalNoiseState, TrainError> {
    let grad = gradients(&state.total(), ds);
    let shrink = 1.0 - eta * lambda;
    let mut u_bar = state.u_bar.clone();
    u_bar.axpby(shrink, -eta, &grad);
    let mut u_tilde = state.u_tilde.clone();
    u_tilde.axpby(shrink, -eta, xi);
    let epoch = state.epoch + 1;
    let norm = u_bar.frobenius_norm();
    if !u_bar.is_finite() || !u_tilde.is_finite() {
        return Err(TrainError::NonFinite { epoch, norm });
    }
    if norm > DIVERGENCE_LIMIT {
        return Err(TrainError::Divergence { epoch, norm });
    }
    Ok(SignalNoiseState {
        u_bar,
        u_tilde,
        epoch,
    })
}

/// The undecomposed update `U ← (1 − ηλ)U − η(∇L̂(U) + ξ)`.
pub fn direct_step(u: &BlockWeights, ds: &Dataset, eta: f64, lambda: f64, xi: &BlockWeights) -> BlockWeights {
    let forcing = gradients(u, ds).add(xi);
    let mut out = u.clone();
    out.axpby(1.0 - eta * lambda, -eta, &forcing);
    out
}

/// One noisy step; `ξ` is drawn from `rng` unless `tau_xi = 0`.
pub fn sgd_step(
    state: &SignalNoiseState,
    ds: &Dataset,
    eta: f64,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<SignalNoiseState, TrainError> {
    assert!(eta >= 0.0, "negative learning rate");
    let d = state.d();
    let xi = if cfg.tau_xi > 0.0 {
        draw_noise(rng, d, cfg.tau_xi)
    } else {
        BlockWeights::zeros(d)
    };
    step_with_noise(state, ds, eta, cfg.lambda, &xi)
}

pub fn train(cfg: &TrainConfig, ds: &Dataset) -> Result<TrajectoryLog, TrainError> {
    train_with(cfg, ds, |_, _| {}).map(|(log, _)| log)
}

/// Runs `cfg.epochs` steps, calling `observe` after each record (including
/// the initial one). Returns the log and the final state.
pub fn train_with(
    cfg: &TrainConfig,
    ds: &Dataset,
    mut observe: impl FnMut(&SignalNoiseState, &TrajectoryRecord),
) -> Result<(TrajectoryLog, SignalNoiseState), TrainError> {
    cfg.validate()?;
    let master = Rng::new(cfg.seed, 0);
    let mut init_rng = master.substream(streams::INIT);
    let mut noise_rng = master.substream(streams::NOISE);
    let theory = theory_for(cfg, ds);

    let mut state = init_state(cfg, &mut init_rng, ds.d);
    let mut log = TrajectoryLog::new(cfg.clone());
    let snapshot_at = |e: usize| e == 0 || e == cfg.switch_epoch || e == cfg.epochs;

    loop {
        let e = state.epoch;
        let rec = record_epoch(&state, ds, lr_schedule(e, cfg), cfg.lambda, &theory);
        observe(&state, &rec);
        log.records.push(rec);
        if snapshot_at(e) {
            let total = state.total();
            let pair = spectrum_pair(&total).map_err(|source| TrainError::Spectrum { epoch: e, source })?;
            log.spectra.push((e, pair.0, pair.1));
        }
        if e >= cfg.epochs {
            break;
        }
        state = sgd_step(&state, ds, lr_schedule(e, cfg), cfg, &mut noise_rng)?;
    }
    Ok((log, state))
}
