//! Two-component token generator and prompt embedding.
//!
//! Every token has an elementary part `x1 = y·γ₀·w* + e` with
//! `e ~ N(0, I/d)` and `y = sign⁺⟨w*, e⟩` (zero maps to +1), and a
//! specialized part `x2` that is exactly `z` for positive tokens and one of
//! `z − ζ`, `z + ζ` (fair coin) for negative tokens. The elementary part is
//! linearly separable by `w*`; the specialized part is not.

use thiserror::Error;

use crate::numerics::{dot, norm2, streams, Matrix, Rng};

/// Redraw budget for the ζ direction before giving up.
pub const MAX_ZETA_ATTEMPTS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("zeta candidate stayed parallel to z after {attempts} draws")]
    DegenerateZeta { attempts: usize },
    #[error("invalid data parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    /// `+1` when `x ≥ 0`, so zero lands on the positive side.
    pub fn from_sign(x: f64) -> Self {
        if x >= 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    pub fn from_value(v: f64) -> Option<Self> {
        if v == 1.0 {
            Some(Label::Pos)
        } else if v == -1.0 {
            Some(Label::Neg)
        } else {
            None
        }
    }
}

/// Fixed generative parameters shared by every prompt of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskVectors {
    pub w_star: Vec<f64>,
    pub z: Vec<f64>,
    pub zeta: Vec<f64>,
    pub gamma0: f64,
    pub u: f64,
    pub r: f64,
    pub alpha: f64,
}

impl TaskVectors {
    /// Assembles and validates task vectors; `u`, `r` come from the norms.
    pub fn from_parts(w_star: Vec<f64>, z: Vec<f64>, zeta: Vec<f64>) -> Result<Self, DataError> {
        let d = w_star.len();
        if d < 2 || z.len() != d || zeta.len() != d {
            return Err(DataError::InvalidParameter(format!(
                "vector lengths {}, {}, {} must agree and be at least 2",
                d,
                z.len(),
                zeta.len()
            )));
        }
        let (u, r) = (norm2(&z), norm2(&zeta));
        let tv = Self {
            gamma0: 1.0 / (d as f64).sqrt(),
            u,
            r,
            alpha: 1.0,
            w_star,
            z,
            zeta,
        };
        tv.validate()?;
        Ok(tv)
    }

    pub fn d(&self) -> usize {
        self.w_star.len()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::InvalidParameter(msg));
        let wn = norm2(&self.w_star);
        if (wn - 1.0).abs() > 1e-12 {
            return bad(format!("‖w*‖ = {wn}, expected 1"));
        }
        if (norm2(&self.z) - self.u).abs() > 1e-12 * self.u {
            return bad("‖z‖ disagrees with u".into());
        }
        if (norm2(&self.zeta) - self.r).abs() > 1e-12 * self.r {
            return bad("‖ζ‖ disagrees with r".into());
        }
        if dot(&self.z, &self.zeta).abs() > 1e-12 * self.u * self.r {
            return bad("z and ζ are not orthogonal".into());
        }
        if !(self.r > 0.0 && self.r < self.u) {
            return bad(format!("need 0 < r < u, got r={}, u={}", self.r, self.u));
        }
        if self.alpha != 1.0 {
            return bad(format!("alpha must be 1, got {}", self.alpha));
        }
        Ok(())
    }
}

fn random_direction(rng: &mut Rng, d: usize) -> Vec<f64> {
    loop {
        let v = rng.gaussian_vec(d, 1.0);
        let n = norm2(&v);
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Draws `ζ` with `‖ζ‖ = r` orthogonal to `z` by Gram-Schmidt against a
/// random direction.
pub fn sample_zeta(rng: &mut Rng, z: &[f64], r: f64) -> Result<Vec<f64>, DataError> {
    let zz = dot(z, z);
    for _ in 0..MAX_ZETA_ATTEMPTS {
        let cand = rng.gaussian_vec(z.len(), 1.0);
        let proj = dot(&cand, z) / zz;
        let mut resid: Vec<f64> = cand.iter().zip(z).map(|(c, zi)| c - proj * zi).collect();
        // second pass keeps the residual orthogonal to working precision
        let proj2 = dot(&resid, z) / zz;
        resid.iter_mut().zip(z).for_each(|(c, zi)| *c -= proj2 * zi);
        let n = norm2(&resid);
        if n >= 1e-12 {
            return Ok(resid.into_iter().map(|x| r * x / n).collect());
        }
    }
    Err(DataError::DegenerateZeta {
        attempts: MAX_ZETA_ATTEMPTS,
    })
}

pub fn sample_task_vectors(rng: &mut Rng, d: usize, u: f64, r: f64) -> Result<TaskVectors, DataError> {
    if d < 2 {
        return Err(DataError::InvalidParameter(format!("d = {d}, need d ≥ 2")));
    }
    if !(u > r && r > 0.0) {
        return Err(DataError::InvalidParameter(format!(
            "need u > r > 0, got u={u}, r={r}"
        )));
    }
    let w_star = random_direction(rng, d);
    let z: Vec<f64> = random_direction(rng, d).into_iter().map(|x| u * x).collect();
    let zeta = sample_zeta(rng, &z, r)?;
    Ok(TaskVectors {
        w_star,
        z,
        zeta,
        gamma0: 1.0 / (d as f64).sqrt(),
        u,
        r,
        alpha: 1.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub label: Label,
}

/// Deterministic part of token generation: given the elementary noise `e`
/// and, for negative tokens, the branch choice (`true` picks `z + ζ`).
pub fn token_from_noise(tv: &TaskVectors, e: &[f64], plus_branch: bool) -> Token {
    let label = Label::from_sign(dot(&tv.w_star, e));
    let y = label.value();
    let x1 = tv
        .w_star
        .iter()
        .zip(e)
        .map(|(w, ei)| y * tv.gamma0 * w + ei)
        .collect();
    let x2 = match label {
        Label::Pos => tv.z.iter().map(|z| tv.alpha * z).collect(),
        Label::Neg => {
            let s = if plus_branch { 1.0 } else { -1.0 };
            tv.z
                .iter()
                .zip(&tv.zeta)
                .map(|(z, k)| tv.alpha * (z + s * k))
                .collect()
        }
    };
    Token { x1, x2, label }
}

pub fn sample_token(rng: &mut Rng, tv: &TaskVectors) -> Token {
    let d = tv.d();
    let e = rng.gaussian_vec(d, 1.0 / (d as f64).sqrt());
    if dot(&tv.w_star, &e) >= 0.0 {
        token_from_noise(tv, &e, false)
    } else {
        let plus = rng.coin();
        token_from_noise(tv, &e, plus)
    }
}

/// Raw prompt: column `i` of `x1`/`x2` is token `i`; the last column is
/// the query.
#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub x1: Matrix,
    pub x2: Matrix,
    pub labels: Vec<Label>,
}

impl Prompt {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn build_prompt(rng: &mut Rng, tv: &TaskVectors, len: usize) -> Prompt {
    assert!(len >= 2, "prompt length must be at least 2");
    let d = tv.d();
    let mut x1 = Matrix::zeros(d, len);
    let mut x2 = Matrix::zeros(d, len);
    let mut labels = Vec::with_capacity(len);
    for i in 0..len {
        let tok = sample_token(rng, tv);
        for k in 0..d {
            x1[(k, i)] = tok.x1[k];
            x2[(k, i)] = tok.x2[k];
        }
        labels.push(tok.label);
    }
    Prompt { x1, x2, labels }
}

/// Block-diagonal embedding `X = diag(X₁, X₂)` with label row
/// `Ỹ = [Y Y]`, where `Y` has the query slot zeroed.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedPrompt {
    pub x_block: Matrix,
    pub y_tilde: Vec<f64>,
    pub query: Vec<f64>,
    pub query_label: Label,
}

impl EmbeddedPrompt {
    pub fn d(&self) -> usize {
        self.x_block.rows() / 2
    }

    pub fn len(&self) -> usize {
        self.x_block.cols() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.x_block.cols() == 0
    }

    /// Top-left corner of the diagonal block holding component `c`.
    pub fn block_offset(&self, c: Component) -> (usize, usize) {
        match c {
            Component::Elementary => (0, 0),
            Component::Specialized => (self.d(), self.len()),
        }
    }

    /// Token `i` of component `c`, read out of its diagonal block.
    pub fn token(&self, c: Component, i: usize) -> Vec<f64> {
        let (r0, c0) = self.block_offset(c);
        (0..self.d()).map(|k| self.x_block[(r0 + k, c0 + i)]).collect()
    }

    /// `⟨x_{i,c}, v⟩` without copying the token out.
    pub fn token_dot(&self, c: Component, i: usize, v: &[f64]) -> f64 {
        let (r0, c0) = self.block_offset(c);
        v.iter()
            .enumerate()
            .map(|(k, x)| self.x_block[(r0 + k, c0 + i)] * x)
            .sum()
    }

    pub fn query_part(&self, c: Component) -> &[f64] {
        let d = self.d();
        match c {
            Component::Elementary => &self.query[..d],
            Component::Specialized => &self.query[d..],
        }
    }

    /// Label row `Y` (length L, query slot zero).
    pub fn y(&self) -> &[f64] {
        &self.y_tilde[..self.len()]
    }

    /// Recovers the raw prompt. The query label is restored from
    /// `query_label`.
    pub fn to_prompt(&self) -> Prompt {
        let (d, l) = (self.d(), self.len());
        let mut x1 = Matrix::zeros(d, l);
        let mut x2 = Matrix::zeros(d, l);
        for k in 0..d {
            for i in 0..l {
                x1[(k, i)] = self.x_block[(k, i)];
                x2[(k, i)] = self.x_block[(d + k, l + i)];
            }
        }
        let mut labels: Vec<Label> = self.y()[..l - 1]
            .iter()
            .map(|&v| Label::from_value(v).expect("context labels are ±1"))
            .collect();
        labels.push(self.query_label);
        Prompt { x1, x2, labels }
    }
}

/// The two token components: `Elementary` is the linearly separable part
/// `x1` seen by `W`; `Specialized` is the part `x2` seen by `V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Elementary,
    Specialized,
}

impl Component {
    pub const BOTH: [Component; 2] = [Component::Elementary, Component::Specialized];
}

pub fn embed_prompt(p: &Prompt) -> EmbeddedPrompt {
    let (d, l) = (p.x1.rows(), p.len());
    let mut x_block = Matrix::zeros(2 * d, 2 * l);
    for k in 0..d {
        for i in 0..l {
            x_block[(k, i)] = p.x1[(k, i)];
            x_block[(d + k, l + i)] = p.x2[(k, i)];
        }
    }
    let mut y_tilde = vec![0.0; 2 * l];
    for i in 0..l - 1 {
        let y = p.labels[i].value();
        y_tilde[i] = y;
        y_tilde[l + i] = y;
    }
    let mut query = p.x1.column(l - 1);
    query.extend(p.x2.column(l - 1));
    EmbeddedPrompt {
        x_block,
        y_tilde,
        query,
        query_label: p.labels[l - 1],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task: TaskVectors,
    pub prompts: Vec<EmbeddedPrompt>,
    pub d: usize,
    pub len: usize,
    pub n: usize,
}

impl Dataset {
    pub fn from_prompts(task: TaskVectors, prompts: Vec<EmbeddedPrompt>) -> Self {
        let d = task.d();
        let len = prompts.first().map_or(0, |p| p.len());
        let n = prompts.len();
        Self {
            task,
            prompts,
            d,
            len,
            n,
        }
    }
}

/// `n` prompts of length `len`; prompt `k` draws from substream
/// `streams::PROMPTS + k` of `rng`'s seed, so the result does not depend on
/// generation order.
pub fn generate_dataset(rng: &Rng, tv: &TaskVectors, n: usize, len: usize) -> Dataset {
    assert!(n >= 1, "dataset needs at least one prompt");
    let prompts = (0..n)
        .map(|k| {
            let mut sub = rng.substream(streams::PROMPTS + k as u64);
            embed_prompt(&build_prompt(&mut sub, tv, len))
        })
        .collect();
    Dataset::from_prompts(tv.clone(), prompts)
}

/// Task vectors from substream `TASK` of `seed`, then [`generate_dataset`]
/// on the same seed.
pub fn seeded_dataset(seed: u64, d: usize, u: f64, r: f64, n: usize, len: usize) -> Result<Dataset, DataError> {
    let master = Rng::new(seed, 0);
    let tv = sample_task_vectors(&mut master.substream(streams::TASK), d, u, r)?;
    Ok(generate_dataset(&master, &tv, n, len))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(d: usize) -> TaskVectors {
        sample_task_vectors(&mut Rng::new(17, streams::TASK), d, 7.0, 0.1).unwrap()
    }

    #[test]
    fn gamma0_is_inverse_sqrt_d() {
        let tv = task(10);
        assert!((tv.gamma0 - 0.316_227_766_016_837_94).abs() < 1e-15);
        tv.validate().unwrap();
    }

    #[test]
    fn zeta_orthogonal_in_two_dims() {
        let z = vec![3.0, 0.0];
        let zeta = sample_zeta(&mut Rng::new(2, 0), &z, 0.25).unwrap();
        assert!(zeta[0].abs() < 1e-15);
        assert!((zeta[1].abs() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zeta_parallel_in_one_dim_is_degenerate() {
        let err = sample_zeta(&mut Rng::new(2, 0), &[1.0], 0.5).unwrap_err();
        assert_eq!(err, DataError::DegenerateZeta { attempts: 100 });
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut rng = Rng::new(0, 0);
        assert!(sample_task_vectors(&mut rng, 1, 2.0, 1.0).is_err());
        assert!(sample_task_vectors(&mut rng, 4, 1.0, 2.0).is_err());
        assert!(sample_task_vectors(&mut rng, 4, 1.0, 0.0).is_err());
    }

    #[test]
    fn boundary_noise_is_positive() {
        let tv = TaskVectors::from_parts(vec![1.0, 0.0], vec![0.0, 2.0], vec![0.5, 0.0]).unwrap();
        let tok = token_from_noise(&tv, &[0.0, 0.3], true);
        assert_eq!(tok.label, Label::Pos);
        assert_eq!(tok.x2, tv.z);
    }

    #[test]
    fn negative_branches() {
        let tv = TaskVectors::from_parts(vec![1.0, 0.0], vec![0.0, 2.0], vec![0.5, 0.0]).unwrap();
        let plus = token_from_noise(&tv, &[-0.1, 0.0], true);
        let minus = token_from_noise(&tv, &[-0.1, 0.0], false);
        assert_eq!(plus.label, Label::Neg);
        assert_eq!(plus.x2, vec![0.5, 2.0]);
        assert_eq!(minus.x2, vec![-0.5, 2.0]);
        // x1 = -γ₀ w* + e
        assert!((plus.x1[0] - (-(0.5f64).sqrt() - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn shortest_prompt() {
        let tv = task(4);
        let p = build_prompt(&mut Rng::new(1, 9), &tv, 2);
        assert_eq!(p.len(), 2);
        assert_eq!(p.x1.cols(), 2);
    }

    #[test]
    fn embedding_places_blocks() {
        let p = Prompt {
            x1: Matrix::from_rows(&[[1.5, 2.5]]),
            x2: Matrix::from_rows(&[[3.5, 4.5]]),
            labels: vec![Label::Pos, Label::Neg],
        };
        let ep = embed_prompt(&p);
        assert_eq!(
            ep.x_block,
            Matrix::from_rows(&[[1.5, 2.5, 0.0, 0.0], [0.0, 0.0, 3.5, 4.5]])
        );
        assert_eq!(ep.y_tilde, vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(ep.query, vec![2.5, 4.5]);
        assert_eq!(ep.query_label, Label::Neg);
        assert_eq!(ep.to_prompt(), p);
    }

    #[test]
    fn dataset_shape_and_sharing() {
        let tv = task(10);
        let ds = generate_dataset(&Rng::new(5, 0), &tv, 128, 128);
        assert_eq!(ds.prompts.len(), 128);
        assert!(ds
            .prompts
            .iter()
            .all(|p| p.x_block.rows() == 20 && p.x_block.cols() == 256));
        assert_eq!(ds.task, tv);
        let again = generate_dataset(&Rng::new(5, 0), &tv, 128, 128);
        assert_eq!(ds, again);
    }
}
