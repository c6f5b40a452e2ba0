//! Per-epoch diagnostics for the signal and noise parts of the weights.

use crate::datagen::{Component, Dataset};
use crate::gradient::{empirical_loss, logistic_loss, mean};
use crate::model::{forward_component, forward_full, predict, BlockWeights};
use crate::numerics::{svd_default, Matrix, SvdError};
use crate::trainer::{SignalNoiseState, TheoryConstants, TrainConfig};

/// Upper clamp applied to `eps_w1` before forming the target, which needs
/// `log(1/eps_w1) > 0`.
pub const EPS_W1_CAP: f64 = 1.0 / std::f64::consts::E;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub epoch: usize,
    pub eta: f64,
    pub l_hat: f64,
    pub l_reg: f64,
    pub k_loss: f64,
    pub k1_loss: f64,
    pub k2_loss: f64,
    pub fro_w_bar: f64,
    pub fro_v_bar: f64,
    pub fro_w_tilde: f64,
    pub fro_v_tilde: f64,
    pub trace_w: f64,
    pub trace_v: f64,
    pub acc_full: f64,
    pub acc_p: f64,
    pub acc_q: f64,
    pub dist_w_star: f64,
}

impl TrajectoryRecord {
    pub const COLUMNS: [&'static str; 17] = [
        "epoch",
        "eta",
        "l_hat",
        "l_reg",
        "k_loss",
        "k1_loss",
        "k2_loss",
        "fro_w_bar",
        "fro_v_bar",
        "fro_w_tilde",
        "fro_v_tilde",
        "trace_w",
        "trace_v",
        "acc_full",
        "acc_p",
        "acc_q",
        "dist_w_star",
    ];

    /// Every field after `epoch`, in column order.
    pub fn values(&self) -> [f64; 16] {
        [
            self.eta,
            self.l_hat,
            self.l_reg,
            self.k_loss,
            self.k1_loss,
            self.k2_loss,
            self.fro_w_bar,
            self.fro_v_bar,
            self.fro_w_tilde,
            self.fro_v_tilde,
            self.trace_w,
            self.trace_v,
            self.acc_full,
            self.acc_p,
            self.acc_q,
            self.dist_w_star,
        ]
    }

    pub fn from_values(epoch: usize, v: [f64; 16]) -> Self {
        Self {
            epoch,
            eta: v[0],
            l_hat: v[1],
            l_reg: v[2],
            k_loss: v[3],
            k1_loss: v[4],
            k2_loss: v[5],
            fro_w_bar: v[6],
            fro_v_bar: v[7],
            fro_w_tilde: v[8],
            fro_v_tilde: v[9],
            trace_w: v[10],
            trace_v: v[11],
            acc_full: v[12],
            acc_p: v[13],
            acc_q: v[14],
            dist_w_star: v[15],
        }
    }

    /// Looks a column up by its CSV name.
    pub fn column(&self, name: &str) -> Option<f64> {
        if name == "epoch" {
            return Some(self.epoch as f64);
        }
        let idx = Self::COLUMNS.iter().position(|c| *c == name)?;
        Some(self.values()[idx - 1])
    }
}

/// `(epoch, singular values of W, singular values of V)`
pub type SpectrumSnapshot = (usize, Vec<f64>, Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub config: TrainConfig,
    pub records: Vec<TrajectoryRecord>,
    pub spectra: Vec<SpectrumSnapshot>,
}

impl TrajectoryLog {
    pub fn new(config: TrainConfig) -> Self {
        Self {
            config,
            records: Vec::new(),
            spectra: Vec::new(),
        }
    }

    pub fn at(&self, epoch: usize) -> Option<&TrajectoryRecord> {
        self.records.iter().find(|r| r.epoch == epoch)
    }

    pub fn switch_record(&self) -> Option<&TrajectoryRecord> {
        self.at(self.config.switch_epoch)
    }

    pub fn final_record(&self) -> Option<&TrajectoryRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KLosses {
    pub k: f64,
    pub k1: f64,
    pub k2: f64,
}

/// Mean logistic losses of `f`, `h` and `g` at the total weight.
pub fn k_losses(state: &SignalNoiseState, ds: &Dataset) -> KLosses {
    k_losses_at(&state.total(), ds)
}

fn k_losses_at(total: &BlockWeights, ds: &Dataset) -> KLosses {
    let margin_loss = |f: &dyn Fn(&crate::EmbeddedPrompt) -> f64| {
        let xs: Vec<f64> = ds
            .prompts
            .iter()
            .map(|ep| logistic_loss(ep.query_label.value() * f(ep)))
            .collect();
        mean(&xs)
    };
    KLosses {
        k: margin_loss(&|ep| forward_full(total, ep)),
        k1: margin_loss(&|ep| forward_component(&total.w, ep, Component::Elementary)),
        k2: margin_loss(&|ep| forward_component(&total.v, ep, Component::Specialized)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub full: f64,
    pub p: f64,
    pub q: f64,
}

pub fn component_accuracy(state: &SignalNoiseState, ds: &Dataset) -> Accuracy {
    accuracy_of(&state.total(), ds)
}

/// Accuracies of `f`, `h` and `g` for explicit weights.
pub fn accuracy_of(bw: &BlockWeights, ds: &Dataset) -> Accuracy {
    let n = ds.prompts.len() as f64;
    let (mut full, mut p, mut q) = (0usize, 0usize, 0usize);
    for ep in &ds.prompts {
        let y = ep.query_label;
        full += (predict(forward_full(bw, ep)) == y) as usize;
        p += (predict(forward_component(&bw.w, ep, Component::Elementary)) == y) as usize;
        q += (predict(forward_component(&bw.v, ep, Component::Specialized)) == y) as usize;
    }
    Accuracy {
        full: full as f64 / n,
        p: p as f64 / n,
        q: q as f64 / n,
    }
}

/// `W* = d·log(1/eps_w1)·w* w*ᵀ`
pub fn w_star_target(d: usize, eps_w1: f64, w_star: &[f64]) -> Matrix {
    assert!(eps_w1 > 0.0 && eps_w1 < 1.0, "eps_w1 must lie in (0, 1)");
    assert_eq!(w_star.len(), d);
    Matrix::outer(w_star, w_star).scale(d as f64 * (1.0 / eps_w1).ln())
}

pub fn record_epoch(
    state: &SignalNoiseState,
    ds: &Dataset,
    eta: f64,
    lambda: f64,
    theory: &TheoryConstants,
) -> TrajectoryRecord {
    let total = state.total();
    let loss = empirical_loss(&total, ds, lambda);
    let k = k_losses_at(&total, ds);
    let acc = accuracy_of(&total, ds);
    let target = w_star_target(ds.d, theory.eps_w1.min(EPS_W1_CAP), &ds.task.w_star);
    TrajectoryRecord {
        epoch: state.epoch,
        eta,
        l_hat: loss.l_hat,
        l_reg: loss.l_reg,
        k_loss: k.k,
        k1_loss: k.k1,
        k2_loss: k.k2,
        fro_w_bar: state.u_bar.w.frobenius_norm(),
        fro_v_bar: state.u_bar.v.frobenius_norm(),
        fro_w_tilde: state.u_tilde.w.frobenius_norm(),
        fro_v_tilde: state.u_tilde.v.frobenius_norm(),
        trace_w: total.w.trace(),
        trace_v: total.v.trace(),
        acc_full: acc.full,
        acc_p: acc.p,
        acc_q: acc.q,
        dist_w_star: state.u_bar.w.sub(&target).frobenius_norm(),
    }
}

/// Singular values, largest first.
pub fn spectrum(m: &Matrix) -> Result<Vec<f64>, SvdError> {
    svd_default(m).map(|s| s.singulars)
}

pub(crate) fn spectrum_pair(bw: &BlockWeights) -> Result<(Vec<f64>, Vec<f64>), SvdError> {
    Ok((spectrum(&bw.w)?, spectrum(&bw.v)?))
}
