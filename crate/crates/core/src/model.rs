//! One-layer normalized ReLU self-attention with block-diagonal `U`.
//!
//! `f(U; X, Ỹ) = Ỹ/(2L) · ReLU(Xᵀ U x_L)` with `U = diag(W, V)`. Because `X`
//! is block diagonal too, `f = ½·h + ½·g` where
//! `h = Y/L · ReLU(X₁ᵀ W x_{L,1})` and `g = Y/L · ReLU(X₂ᵀ V x_{L,2})`.

use crate::datagen::{Component, EmbeddedPrompt, Label};
use crate::numerics::Matrix;

/// The two diagonal blocks of `U`. The off-diagonal blocks are zero by
/// construction and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights {
    pub w: Matrix,
    pub v: Matrix,
}

impl BlockWeights {
    pub fn new(w: Matrix, v: Matrix) -> Self {
        assert!(
            w.is_square() && v.is_square() && w.rows() == v.rows(),
            "block weights must be two d×d matrices"
        );
        Self { w, v }
    }

    pub fn zeros(d: usize) -> Self {
        Self::new(Matrix::zeros(d, d), Matrix::zeros(d, d))
    }

    pub fn d(&self) -> usize {
        self.w.rows()
    }

    pub fn block(&self, c: Component) -> &Matrix {
        match c {
            Component::Elementary => &self.w,
            Component::Specialized => &self.v,
        }
    }

    pub fn block_mut(&mut self, c: Component) -> &mut Matrix {
        match c {
            Component::Elementary => &mut self.w,
            Component::Specialized => &mut self.v,
        }
    }

    pub fn add(&self, other: &BlockWeights) -> Self {
        Self {
            w: self.w.add(&other.w),
            v: self.v.add(&other.v),
        }
    }

    pub fn sub(&self, other: &BlockWeights) -> Self {
        Self {
            w: self.w.sub(&other.w),
            v: self.v.sub(&other.v),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            w: self.w.scale(c),
            v: self.v.scale(c),
        }
    }

    /// `self ← a·self + b·other` on both blocks.
    pub fn axpby(&mut self, a: f64, b: f64, other: &BlockWeights) {
        self.w.axpby(a, b, &other.w);
        self.v.axpby(a, b, &other.v);
    }

    /// `‖U‖_F² = ‖W‖_F² + ‖V‖_F²`
    pub fn frobenius_sq(&self) -> f64 {
        self.w.frobenius_norm().powi(2) + self.v.frobenius_norm().powi(2)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.v.is_finite()
    }

    /// Materializes `U = diag(W, V)`.
    pub fn to_full(&self) -> Matrix {
        let d = self.d();
        let mut u = Matrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                u[(i, j)] = self.w[(i, j)];
                u[(d + i, d + j)] = self.v[(i, j)];
            }
        }
        u
    }
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Attention scores `X_cᵀ M x_{L,c}` for one component, one per token.
pub fn pre_activations(m: &Matrix, ep: &EmbeddedPrompt, c: Component) -> Vec<f64> {
    let mq = m.matvec(ep.query_part(c));
    (0..ep.len()).map(|i| ep.token_dot(c, i, &mq)).collect()
}

/// `Y/L · ReLU(X_cᵀ M x_{L,c})`
pub fn forward_component(m: &Matrix, ep: &EmbeddedPrompt, c: Component) -> f64 {
    let pre = pre_activations(m, ep, c);
    let s: f64 = ep.y().iter().zip(&pre).map(|(y, p)| y * relu(*p)).sum();
    s / ep.len() as f64
}

/// Elementary network `h`.
pub fn forward_h(w: &Matrix, ep: &EmbeddedPrompt) -> f64 {
    forward_component(w, ep, Component::Elementary)
}

/// Specialized network `g`.
pub fn forward_g(v: &Matrix, ep: &EmbeddedPrompt) -> f64 {
    forward_component(v, ep, Component::Specialized)
}

/// Full model output evaluated over the whole `2d × 2L` embedding, without
/// going through the component split.
pub fn forward_full(bw: &BlockWeights, ep: &EmbeddedPrompt) -> f64 {
    let d = ep.d();
    let l2 = ep.x_block.cols();
    let mut uq = bw.w.matvec(ep.query_part(Component::Elementary));
    uq.extend(bw.v.matvec(ep.query_part(Component::Specialized)));
    debug_assert_eq!(uq.len(), 2 * d);
    let mut s = 0.0;
    for j in 0..l2 {
        let y = ep.y_tilde[j];
        if y == 0.0 {
            continue;
        }
        let pre: f64 = (0..2 * d).map(|k| ep.x_block[(k, j)] * uq[k]).sum();
        s += y * relu(pre);
    }
    s / l2 as f64
}

/// `+1` when `f ≥ 0`.
pub fn predict(f: f64) -> Label {
    Label::from_sign(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{embed_prompt, Prompt};

    fn hand_prompt() -> EmbeddedPrompt {
        embed_prompt(&Prompt {
            x1: Matrix::from_rows(&[[1.0, 2.0]]),
            x2: Matrix::from_rows(&[[0.5, -1.0]]),
            labels: vec![Label::Pos, Label::Neg],
        })
    }

    #[test]
    fn zero_weights_give_zero() {
        let ep = hand_prompt();
        assert_eq!(forward_full(&BlockWeights::zeros(1), &ep), 0.0);
        assert_eq!(forward_h(&Matrix::zeros(1, 1), &ep), 0.0);
        assert_eq!(forward_g(&Matrix::zeros(1, 1), &ep), 0.0);
    }

    #[test]
    fn hand_arithmetic() {
        let ep = hand_prompt();
        let w = Matrix::from_rows(&[[3.0]]);
        // (1/2)·(1·ReLU(1·3·2)); the query slot carries label 0
        assert_eq!(forward_h(&w, &ep), 3.0);
        let bw = BlockWeights::new(w, Matrix::zeros(1, 1));
        assert_eq!(forward_full(&bw, &ep), 1.5);
    }

    #[test]
    fn all_positive_identity_v() {
        let z = [1.0, -2.0, 0.5];
        let l = 6;
        let mut x2 = Matrix::zeros(3, l);
        for i in 0..l {
            for k in 0..3 {
                x2[(k, i)] = z[k];
            }
        }
        let ep = embed_prompt(&Prompt {
            x1: Matrix::zeros(3, l),
            x2,
            labels: vec![Label::Pos; l],
        });
        let u2 = 1.0 + 4.0 + 0.25;
        let expected = (l as f64 - 1.0) / l as f64 * u2;
        assert!((forward_g(&Matrix::identity(3), &ep) - expected).abs() < 1e-14);
    }

    #[test]
    fn homogeneity() {
        let ep = hand_prompt();
        let w = Matrix::from_rows(&[[0.7]]);
        assert_eq!(forward_h(&w.scale(4.0), &ep), 4.0 * forward_h(&w, &ep));
        let v = Matrix::from_rows(&[[-1.3]]);
        assert!((forward_g(&v.scale(2.5), &ep) - 2.5 * forward_g(&v, &ep)).abs() < 1e-15);
    }

    #[test]
    fn predict_ties_to_positive() {
        assert_eq!(predict(0.3), Label::Pos);
        assert_eq!(predict(-0.3), Label::Neg);
        assert_eq!(predict(0.0), Label::Pos);
    }

    #[test]
    fn to_full_is_block_diagonal() {
        let bw = BlockWeights::new(Matrix::identity(2), Matrix::identity(2).scale(2.0));
        let u = bw.to_full();
        assert_eq!(u[(0, 2)], 0.0);
        assert_eq!(u[(3, 3)], 2.0);
        assert_eq!(u.trace(), 6.0);
    }
}
