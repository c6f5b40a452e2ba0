//! Rank-preserving SVD edits of trained weights and the trace-ordering
//! check on a trajectory.

use crate::datagen::Dataset;
use crate::metrics::{accuracy_of, Accuracy, TrajectoryLog};
use crate::model::BlockWeights;
use crate::numerics::{svd_default, Matrix, SvdError};
use crate::trainer::SignalNoiseState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOrder {
    LargestFirst,
    SmallestFirst,
}

impl EditOrder {
    pub const ALL: [EditOrder; 2] = [EditOrder::LargestFirst, EditOrder::SmallestFirst];

    pub fn name(self) -> &'static str {
        match self {
            EditOrder::LargestFirst => "largest_first",
            EditOrder::SmallestFirst => "smallest_first",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditTarget {
    WOnly,
    VOnly,
    Both,
}

impl EditTarget {
    pub const ALL: [EditTarget; 3] = [EditTarget::WOnly, EditTarget::VOnly, EditTarget::Both];

    pub fn name(self) -> &'static str {
        match self {
            EditTarget::WOnly => "w_only",
            EditTarget::VOnly => "v_only",
            EditTarget::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EditSpec {
    pub rho: f64,
    pub order: EditOrder,
    pub target: EditTarget,
}

impl EditSpec {
    pub fn new(rho: f64, order: EditOrder, target: EditTarget) -> Self {
        assert!(rho > 0.0 && rho <= 1.0, "rho must lie in (0, 1], got {rho}");
        Self { rho, order, target }
    }
}

/// `⌈rho·d⌉`, at least one. A small guard absorbs rounding in grids such as
/// `0.1, 0.2, …` so that `0.3·10` keeps 3 and not 4.
pub fn kept_count(rho: f64, d: usize) -> usize {
    let k = (rho * d as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(d)
}

pub fn truncate_svd(m: &Matrix, spec: &EditSpec) -> Result<Matrix, SvdError> {
    assert!(m.is_square(), "spectral edits need a square matrix");
    let d = m.rows();
    let k = kept_count(spec.rho, d);
    if k == d {
        return Ok(m.clone());
    }
    let s = svd_default(m)?;
    Ok(match spec.order {
        EditOrder::LargestFirst => s.reconstruct_with(|i| i < k),
        EditOrder::SmallestFirst => s.reconstruct_with(|i| i >= d - k),
    })
}

pub fn edit_weights(bw: &BlockWeights, spec: &EditSpec) -> Result<BlockWeights, SvdError> {
    let w = match spec.target {
        EditTarget::WOnly | EditTarget::Both => truncate_svd(&bw.w, spec)?,
        EditTarget::VOnly => bw.w.clone(),
    };
    let v = match spec.target {
        EditTarget::VOnly | EditTarget::Both => truncate_svd(&bw.v, spec)?,
        EditTarget::WOnly => bw.v.clone(),
    };
    Ok(BlockWeights::new(w, v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditRow {
    pub rho: f64,
    pub order: EditOrder,
    pub target: EditTarget,
    pub acc: Accuracy,
}

/// Accuracy of the edited total weight for each `rho`.
pub fn edited_eval(
    state: &SignalNoiseState,
    ds: &Dataset,
    rhos: &[f64],
    order: EditOrder,
    target: EditTarget,
) -> Result<Vec<EditRow>, SvdError> {
    assert!(!rhos.is_empty(), "empty rho grid");
    let total = state.total();
    rhos.iter()
        .map(|&rho| {
            let spec = EditSpec::new(rho, order, target);
            let edited = edit_weights(&total, &spec)?;
            Ok(EditRow {
                rho,
                order,
                target,
                acc: accuracy_of(&edited, ds),
            })
        })
        .collect()
}

/// `0.1, 0.2, …, 1.0`
pub fn default_rho_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOrdering {
    pub stage1_holds: bool,
    pub stage2_holds: bool,
    /// `(trace_w, trace_v)` at the switch epoch.
    pub at_switch: (f64, f64),
    /// `(trace_w, trace_v)` at the last recorded epoch.
    pub at_final: (f64, f64),
}

/// `Tr W > Tr V` at the switch and `Tr W < Tr V` at the end. `None` when the
/// log lacks the switch record.
pub fn trace_ordering(log: &TrajectoryLog) -> Option<TraceOrdering> {
    let s = log.switch_record()?;
    let f = log.final_record()?;
    Some(TraceOrdering {
        stage1_holds: s.trace_w > s.trace_v,
        stage2_holds: f.trace_w < f.trace_v,
        at_switch: (s.trace_w, s.trace_v),
        at_final: (f.trace_w, f.trace_v),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::TrajectoryRecord;
    use crate::numerics::{gaussian_matrix, Rng};
    use crate::trainer::{InitMode, TrainConfig};

    fn spec(rho: f64, order: EditOrder) -> EditSpec {
        EditSpec::new(rho, order, EditTarget::Both)
    }

    #[test]
    fn kept_counts() {
        assert_eq!(kept_count(0.1, 10), 1);
        assert_eq!(kept_count(0.3, 10), 3);
        assert_eq!(kept_count(0.7, 10), 7);
        assert_eq!(kept_count(0.11, 10), 2);
        assert_eq!(kept_count(1e-6, 10), 1);
        assert_eq!(kept_count(1.0, 10), 10);
        for (i, rho) in default_rho_grid().into_iter().enumerate() {
            assert_eq!(kept_count(rho, 10), i + 1);
        }
    }

    #[test]
    fn full_rank_is_identity() {
        let m = gaussian_matrix(&mut Rng::new(3, 0), 6, 6, 1.0);
        assert_eq!(truncate_svd(&m, &spec(1.0, EditOrder::SmallestFirst)).unwrap(), m);
    }

    #[test]
    fn diagonal_truncation() {
        let m = Matrix::from_diag(&[5.0, 1.0]);
        let top = truncate_svd(&m, &spec(0.5, EditOrder::LargestFirst)).unwrap();
        assert!(top.sub(&Matrix::from_diag(&[5.0, 0.0])).max_abs() <= 1e-12);
        let bottom = truncate_svd(&m, &spec(0.5, EditOrder::SmallestFirst)).unwrap();
        assert!(bottom.sub(&Matrix::from_diag(&[0.0, 1.0])).max_abs() <= 1e-12);
    }

    #[test]
    fn rank_one_survives_smallest_rho() {
        let a: Vec<f64> = (0..10).map(|i| i as f64 - 4.5).collect();
        let b: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let m = Matrix::outer(&a, &b);
        let t = truncate_svd(&m, &spec(0.1, EditOrder::LargestFirst)).unwrap();
        assert!(t.sub(&m).frobenius_norm() <= 1e-10 * m.frobenius_norm());
    }

    #[test]
    fn targets_touch_only_their_block() {
        let mut rng = Rng::new(8, 0);
        let bw = BlockWeights::new(gaussian_matrix(&mut rng, 4, 4, 1.0), gaussian_matrix(&mut rng, 4, 4, 1.0));
        let w_only = edit_weights(&bw, &EditSpec::new(0.25, EditOrder::LargestFirst, EditTarget::WOnly)).unwrap();
        assert_eq!(w_only.v, bw.v);
        assert_ne!(w_only.w, bw.w);
        let v_only = edit_weights(&bw, &EditSpec::new(0.25, EditOrder::LargestFirst, EditTarget::VOnly)).unwrap();
        assert_eq!(v_only.w, bw.w);
        assert_ne!(v_only.v, bw.v);
    }

    #[test]
    #[should_panic(expected = "rho must lie")]
    fn rejects_zero_rho() {
        EditSpec::new(0.0, EditOrder::LargestFirst, EditTarget::Both);
    }

    fn log_with(switch: (f64, f64), last: (f64, f64)) -> TrajectoryLog {
        let cfg = TrainConfig {
            eta1: 1.0,
            eta2: 0.1,
            switch_epoch: 1,
            lambda: 0.0,
            tau0: 0.0,
            tau_xi: 0.0,
            epochs: 2,
            seed: 0,
            init_mode: InitMode::Gaussian,
        };
        let mut log = TrajectoryLog::new(cfg);
        for (e, (tw, tv)) in [(0, (0.0, 0.0)), (1, switch), (2, last)] {
            let mut rec = TrajectoryRecord::from_values(e, [0.0; 16]);
            rec.trace_w = tw;
            rec.trace_v = tv;
            log.records.push(rec);
        }
        log
    }

    #[test]
    fn trace_ordering_examples() {
        let t = trace_ordering(&log_with((5.0, 1.0), (1.0, 5.0))).unwrap();
        assert!(t.stage1_holds && t.stage2_holds);
        assert_eq!(t.at_switch, (5.0, 1.0));
        let t = trace_ordering(&log_with((1.0, 5.0), (5.0, 1.0))).unwrap();
        assert!(!t.stage1_holds && !t.stage2_holds);
        let mut short = log_with((1.0, 1.0), (1.0, 1.0));
        short.config.switch_epoch = 9;
        assert!(trace_ordering(&short).is_none());
    }
}
