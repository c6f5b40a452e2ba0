//! Logistic loss and closed-form gradients of the empirical loss.
//!
//! For prompt `n` with margin `y_L f`, the per-prompt loss is
//! `log(1 + e^{-y_L f})` and `l' = dl/df = -y_L σ(-y_L f)`. The block
//! gradients are
//!
//! ```text
//! ∇_W L̂ = mean_n [ l'_n / (2L) · Σ_i y_i 𝟙(x_{i,1}ᵀ W x_{L,1} ≥ 0) x_{i,1} x_{L,1}ᵀ ]
//! ∇_V L̂ = mean_n [ l'_n / (2L) · Σ_i y_i 𝟙(x_{i,2}ᵀ V x_{L,2} ≥ 0) x_{i,2} x_{L,2}ᵀ ]
//! ```
//!
//! with the indicator taking value 1 at zero. Gradients here are of the
//! unregularized loss; the trainer applies L2 shrinkage in the update.
//! Prompts are reduced sequentially in index order.

use crate::datagen::{Component, Dataset, EmbeddedPrompt, Label};
use crate::model::{forward_full, pre_activations, BlockWeights};
use crate::numerics::{Matrix, Rng};

/// Step used by [`finite_diff_grad`] when callers have no reason to pick
/// another.
pub const DEFAULT_FD_STEP: f64 = 1e-6;
/// Entries that can move a pre-activation this close to zero are excluded
/// from finite-difference comparison.
pub const KINK_GUARD: f64 = 1e-3;
/// Pass threshold for [`gradient_agreement`].
pub const AGREEMENT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub l_hat: f64,
    pub l_reg: f64,
    pub per_prompt: Vec<f64>,
}

/// `log(1 + exp(-margin))`, stable for large |margin|.
pub fn logistic_loss(margin: f64) -> f64 {
    if margin >= 0.0 {
        (-margin).exp().ln_1p()
    } else {
        -margin + margin.exp().ln_1p()
    }
}

/// `d/df log(1 + exp(-y f)) = -y / (1 + exp(y f))`
pub fn loss_derivative(y: Label, f: f64) -> f64 {
    let y = y.value();
    let m = y * f;
    if m >= 0.0 {
        let e = (-m).exp();
        -y * e / (1.0 + e)
    } else {
        -y / (1.0 + m.exp())
    }
}

pub fn empirical_loss(bw: &BlockWeights, ds: &Dataset, lambda: f64) -> LossBreakdown {
    assert!(lambda >= 0.0, "negative regularization");
    let per_prompt: Vec<f64> = ds
        .prompts
        .iter()
        .map(|ep| logistic_loss(ep.query_label.value() * forward_full(bw, ep)))
        .collect();
    let l_hat = mean(&per_prompt);
    LossBreakdown {
        l_hat,
        l_reg: l_hat + 0.5 * lambda * bw.frobenius_sq(),
        per_prompt,
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// ReLU derivative with the `𝟙(x ≥ 0)` convention.
pub fn relu_gate(pre: f64) -> f64 {
    if pre >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Both block gradients of `L̂` in one pass over the data.
pub fn gradients(bw: &BlockWeights, ds: &Dataset) -> BlockWeights {
    gradients_with_gate(bw, ds, relu_gate)
}

/// [`gradients`] with a caller-supplied activation gate in place of the
/// ReLU derivative; used to build negative controls for the agreement check.
pub fn gradients_with_gate(bw: &BlockWeights, ds: &Dataset, gate: fn(f64) -> f64) -> BlockWeights {
    let d = bw.d();
    let mut out = BlockWeights::zeros(d);
    for ep in &ds.prompts {
        let f = forward_full(bw, ep);
        let lp = loss_derivative(ep.query_label, f);
        if lp == 0.0 {
            continue;
        }
        let coeff = lp / (2.0 * ep.len() as f64);
        for c in Component::BOTH {
            accumulate_block(out.block_mut(c), bw.block(c), ep, c, coeff, gate);
        }
    }
    out.scale(1.0 / ds.prompts.len() as f64)
}

/// `acc += coeff · X_c diag(y ⊙ gate(pre)) 𝟙 x_{L,c}ᵀ`
fn accumulate_block(
    acc: &mut Matrix,
    m: &Matrix,
    ep: &EmbeddedPrompt,
    c: Component,
    coeff: f64,
    gate: fn(f64) -> f64,
) {
    let d = ep.d();
    let pre = pre_activations(m, ep, c);
    let (r0, c0) = ep.block_offset(c);
    let mut weighted = vec![0.0; d];
    for (i, (&y, &p)) in ep.y().iter().zip(&pre).enumerate() {
        let a = y * gate(p);
        if a == 0.0 {
            continue;
        }
        for (k, wk) in weighted.iter_mut().enumerate() {
            *wk += a * ep.x_block[(r0 + k, c0 + i)];
        }
    }
    let q = ep.query_part(c);
    for (k, &wk) in weighted.iter().enumerate() {
        if wk == 0.0 {
            continue;
        }
        for (j, &qj) in q.iter().enumerate() {
            acc[(k, j)] += coeff * wk * qj;
        }
    }
}

pub fn grad_w(bw: &BlockWeights, ds: &Dataset) -> Matrix {
    gradients(bw, ds).w
}

pub fn grad_v(bw: &BlockWeights, ds: &Dataset) -> Matrix {
    gradients(bw, ds).v
}

/// Central differences of an arbitrary scalar function of the block weights.
pub fn finite_diff_with(bw: &BlockWeights, h: f64, loss: impl Fn(&BlockWeights) -> f64) -> BlockWeights {
    assert!(h > 0.0, "finite-difference step must be positive");
    let d = bw.d();
    let mut out = BlockWeights::zeros(d);
    let mut probe = bw.clone();
    for c in Component::BOTH {
        for i in 0..d {
            for j in 0..d {
                let orig = bw.block(c)[(i, j)];
                probe.block_mut(c)[(i, j)] = orig + h;
                let up = loss(&probe);
                probe.block_mut(c)[(i, j)] = orig - h;
                let down = loss(&probe);
                probe.block_mut(c)[(i, j)] = orig;
                out.block_mut(c)[(i, j)] = (up - down) / (2.0 * h);
            }
        }
    }
    out
}

/// Central-difference gradient of the unregularized empirical loss,
/// returned as `(∂L̂/∂W, ∂L̂/∂V)`.
pub fn finite_diff_grad(bw: &BlockWeights, ds: &Dataset, h: f64) -> (Matrix, Matrix) {
    let g = finite_diff_with(bw, h, |p| empirical_loss(p, ds, 0.0).l_hat);
    (g.w, g.v)
}

/// Marks weight entries whose perturbation could flip an activation: entry
/// `(i, j)` of block `c` is unsafe when some token has
/// `|pre| ≤ guard` and `x_{k,c}[i]·x_{L,c}[j] ≠ 0`.
pub fn kink_mask(bw: &BlockWeights, ds: &Dataset, c: Component, guard: f64) -> Vec<Vec<bool>> {
    let d = bw.d();
    let mut unsafe_entry = vec![vec![false; d]; d];
    for ep in &ds.prompts {
        let pre = pre_activations(bw.block(c), ep, c);
        let q = ep.query_part(c);
        for (k, &p) in pre.iter().enumerate() {
            if p.abs() > guard || ep.y()[k] == 0.0 {
                continue;
            }
            let x = ep.token(c, k);
            for i in 0..d {
                for j in 0..d {
                    if x[i] * q[j] != 0.0 {
                        unsafe_entry[i][j] = true;
                    }
                }
            }
        }
    }
    unsafe_entry
}

/// `|a - b| / max(|a|, |b|, 1e-8)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub seeds: usize,
    pub max_rel_err: f64,
    pub checked: usize,
    pub kink_skipped: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_err <= AGREEMENT_TOL
    }
}

/// Random instance for the agreement check: `d = 5`, `L = 8`, `N = 4`,
/// weights with i.i.d. `N(0, 1)` entries so that activation patterns are
/// mixed.
pub fn gradcheck_instance(seed: u64) -> (BlockWeights, Dataset) {
    use crate::datagen::seeded_dataset;
    use crate::numerics::{gaussian_matrix, streams};
    let ds = seeded_dataset(seed, 5, 1.0, 0.5, 4, 8).expect("valid gradcheck parameters");
    let mut rng = Rng::new(seed, streams::INIT);
    let bw = BlockWeights::new(gaussian_matrix(&mut rng, 5, 5, 1.0), gaussian_matrix(&mut rng, 5, 5, 1.0));
    (bw, ds)
}

/// Compares `grad` against central differences on one
/// [`gradcheck_instance`] per seed, skipping kink-adjacent entries.
pub fn gradient_agreement(
    seeds: impl IntoIterator<Item = u64>,
    grad: impl Fn(&BlockWeights, &Dataset) -> BlockWeights,
) -> GradCheckReport {
    let mut report = GradCheckReport {
        seeds: 0,
        max_rel_err: 0.0,
        checked: 0,
        kink_skipped: 0,
    };
    for seed in seeds {
        report.seeds += 1;
        let (bw, ds) = gradcheck_instance(seed);
        let analytic = grad(&bw, &ds);
        let numeric = finite_diff_with(&bw, DEFAULT_FD_STEP, |p| empirical_loss(p, &ds, 0.0).l_hat);
        for c in Component::BOTH {
            let mask = kink_mask(&bw, &ds, c, KINK_GUARD);
            let (a, f) = (analytic.block(c), numeric.block(c));
            for i in 0..bw.d() {
                for j in 0..bw.d() {
                    if mask[i][j] {
                        report.kink_skipped += 1;
                        continue;
                    }
                    report.checked += 1;
                    report.max_rel_err = report.max_rel_err.max(relative_error(a[(i, j)], f[(i, j)]));
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{embed_prompt, Prompt};

    #[test]
    fn logistic_loss_values() {
        assert!((logistic_loss(0.0) - std::f64::consts::LN_2).abs() < 1e-16);
        assert!(logistic_loss(100.0) <= 4e-44);
        assert!(logistic_loss(100.0) > 0.0);
        assert!((logistic_loss(-100.0) - 100.0).abs() < 1e-12);
        assert!(logistic_loss(-1e5).is_finite());
    }

    #[test]
    fn loss_derivative_values() {
        assert_eq!(loss_derivative(Label::Pos, 0.0), -0.5);
        assert_eq!(loss_derivative(Label::Neg, 0.0), 0.5);
        assert!(loss_derivative(Label::Pos, 50.0).abs() <= 2e-22);
        assert!((loss_derivative(Label::Pos, -800.0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn loss_derivative_matches_difference_quotient() {
        for &(y, f) in &[(Label::Pos, 0.7), (Label::Neg, -1.3), (Label::Neg, 2.2)] {
            let h = 1e-6;
            let fd = (logistic_loss(y.value() * (f + h)) - logistic_loss(y.value() * (f - h))) / (2.0 * h);
            assert!((fd - loss_derivative(y, f)).abs() < 1e-9);
        }
    }

    fn one_token_dataset(pre_zero: bool) -> Dataset {
        use crate::datagen::TaskVectors;
        let tv = TaskVectors::from_parts(vec![1.0, 0.0], vec![0.0, 2.0], vec![0.5, 0.0]).unwrap();
        let x = if pre_zero { 0.0 } else { 1.0 };
        let p = Prompt {
            x1: Matrix::from_rows(&[[x, 1.0], [0.0, 0.0]]),
            x2: Matrix::from_rows(&[[0.0, 0.0], [2.0, 2.0]]),
            labels: vec![Label::Pos, Label::Pos],
        };
        Dataset::from_prompts(tv, vec![embed_prompt(&p)])
    }

    #[test]
    fn zero_weights_use_unit_indicator() {
        let ds = one_token_dataset(false);
        let g = gradients(&BlockWeights::zeros(2), &ds);
        // every pre-activation is 0, so the gate is open: l' = -1/2, 1/(2L) = 1/4
        let expected_w = Matrix::outer(&[1.0, 0.0], &[1.0, 0.0]).scale(-0.125);
        assert_eq!(g.w, expected_w);
        let expected_v = Matrix::outer(&[0.0, 2.0], &[0.0, 2.0]).scale(-0.125);
        assert_eq!(g.v, expected_v);
    }

    #[test]
    fn saturated_margins_kill_gradient() {
        let ds = one_token_dataset(false);
        let bw = BlockWeights::new(Matrix::identity(2).scale(1e3), Matrix::identity(2).scale(1e2));
        assert!(empirical_loss(&bw, &ds, 0.0).per_prompt[0] < 1e-100);
        let g = gradients(&bw, &ds);
        assert!(g.w.frobenius_norm() <= 1e-20);
        assert!(g.v.frobenius_norm() <= 1e-20);
    }

    #[test]
    fn empirical_loss_examples() {
        let ds = one_token_dataset(false);
        let zero = empirical_loss(&BlockWeights::zeros(2), &ds, 0.5);
        assert!((zero.l_hat - std::f64::consts::LN_2).abs() < 1e-16);
        assert_eq!(zero.l_reg, zero.l_hat);
        // ‖W‖² + ‖V‖² = 3
        let bw = BlockWeights::new(Matrix::from_diag(&[1.0, 1.0]), Matrix::from_diag(&[1.0, 0.0]));
        let lb = empirical_loss(&bw, &ds, 2.0);
        assert!((lb.l_reg - lb.l_hat - 3.0).abs() < 1e-14);
        let lb0 = empirical_loss(&bw, &ds, 0.0);
        assert_eq!(lb0.l_reg, lb0.l_hat);
    }

    #[test]
    fn finite_differences_exact_on_quadratic() {
        let a = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]);
        let b = Matrix::from_rows(&[[0.0, 1.0], [-1.0, 2.0]]);
        let quad = |p: &BlockWeights| {
            0.5 * p.frobenius_sq()
                + p.w.data().iter().zip(a.data()).map(|(x, y)| x * y).sum::<f64>()
                + p.v.data().iter().zip(b.data()).map(|(x, y)| x * y).sum::<f64>()
        };
        let at = BlockWeights::new(Matrix::identity(2).scale(0.3), Matrix::from_diag(&[-1.0, 2.0]));
        let g = finite_diff_with(&at, 1e-3, quad);
        let exact_w = at.w.add(&a);
        let exact_v = at.v.add(&b);
        assert!(g.w.sub(&exact_w).max_abs() <= 1e-9);
        assert!(g.v.sub(&exact_v).max_abs() <= 1e-9);
    }

    #[test]
    fn finite_difference_error_shrinks_quadratically() {
        let f = |p: &BlockWeights| p.w[(0, 0)].sin() + p.v[(1, 1)].exp();
        let at = BlockWeights::new(Matrix::identity(2).scale(0.4), Matrix::identity(2).scale(0.2));
        let exact = 0.4f64.cos();
        let e1 = (finite_diff_with(&at, 1e-2, f).w[(0, 0)] - exact).abs();
        let e2 = (finite_diff_with(&at, 5e-3, f).w[(0, 0)] - exact).abs();
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn analytic_matches_finite_differences() {
        let report = gradient_agreement(0..20, gradients);
        assert_eq!(report.seeds, 20);
        assert!(report.checked > 0);
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn sign_bug_is_caught() {
        let report = gradient_agreement(0..3, |bw, ds| gradients(bw, ds).scale(-1.0));
        assert!(!report.passed());
    }

    #[test]
    fn flipped_relu_convention_is_caught() {
        let report = gradient_agreement(0..3, |bw, ds| {
            gradients_with_gate(bw, ds, |p| if p < 0.0 { 1.0 } else { 0.0 })
        });
        assert!(!report.passed());
    }

    #[test]
    fn block_gradients_agree_with_combined_pass() {
        let (bw, ds) = gradcheck_instance(4);
        let g = gradients(&bw, &ds);
        assert_eq!(grad_w(&bw, &ds), g.w);
        assert_eq!(grad_v(&bw, &ds), g.v);
        let (fw, fv) = finite_diff_grad(&bw, &ds, DEFAULT_FD_STEP);
        assert!(fw.sub(&g.w).max_abs() < 1e-7);
        assert!(fv.sub(&g.v).max_abs() < 1e-7);
    }
}
