//! Restricted estimation and Bregman divergence tests of `H₀: m(θ) = 0`.
//!
//! Constraints are affine, `m(θ) = Aθ − b` with `A` of full row rank `r < p`,
//! and enter by reparameterization: the restricted fit minimizes the usual
//! objective over `θ = embed(φ)`, `φ ∈ ℝ^{p−r}`. Coordinate-fixing
//! constraints (the common case) are handled exactly, so `m(θ̃) = 0` holds
//! to the last bit; general affine sets go through a null-space basis.
//!
//! The test statistic is `T = 2n·D₂(f_θ̂, f_θ̃)`. Under the null it behaves
//! like `Σ λᵢZᵢ²`, where the `λᵢ` are the `r` nonzero eigenvalues of
//! `A₂ · (B K₁ B)` with
//!
//! ```text
//! A₂  = ∫ B₂''(f) ∇f ∇fᵀ dx
//! B   = J₁⁻¹ M (Mᵀ J₁⁻¹ M)⁻¹ Mᵀ J₁⁻¹,     M = ∇m(θ)ᵀ  (p × r)
//! ```
//!
//! evaluated at the restricted estimate. `A₂ · S` and `S · A₂` share a
//! spectrum, so the ordering of the product does not matter; the symmetric
//! form `S^{1/2} A₂ S^{1/2}` is what actually gets decomposed.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::asymptotics::model_matrices;
use crate::divergence::{divergence, DensityGrid, Generator};
use crate::error::{Error, Result};
use crate::estimation::{estimate_iid, CachedObjective, Estimate, Init, InitSource};
use crate::models::Model;
use crate::numerics::linalg::{inverse, product_eigvals};
use crate::numerics::optimize::{minimize, minimize_scalar, OptimizerOptions, OptimizerReport};
use crate::numerics::rng::substream;
use crate::numerics::special::chi2_1_sf;

/// Default Monte Carlo replication count for null quantiles.
pub const DEFAULT_MC_REPS: usize = 100_000;
/// Smallest accepted Monte Carlo replication count.
pub const MIN_MC_REPS: usize = 10_000;
const MC_CHUNK: usize = 8192;

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    /// `θ[index] = value` for each pair; indices strictly increasing.
    Fixed(Vec<(usize, f64)>),
    /// `θ = particular + basis · φ`.
    Affine { particular: DVector<f64>, basis: DMatrix<f64> },
}

/// Affine null-hypothesis restrictions `Aθ = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    dim: usize,
    matrix: DMatrix<f64>,
    rhs: DVector<f64>,
    kind: Kind,
}

impl ConstraintSet {
    /// No restriction (`r = 0`).
    pub fn none(dim: usize) -> Self {
        Self {
            dim,
            matrix: DMatrix::zeros(0, dim),
            rhs: DVector::zeros(0),
            kind: Kind::Fixed(Vec::new()),
        }
    }

    /// Fixes the listed coordinates of a `dim`-dimensional parameter.
    pub fn fix(dim: usize, fixed: &[(usize, f64)]) -> Result<Self> {
        let mut pairs = fixed.to_vec();
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config("a coordinate is fixed twice".into()));
        }
        if let Some((i, _)) = pairs.iter().find(|(i, _)| *i >= dim) {
            return Err(Error::Dimension(format!("coordinate {i} out of range for dimension {dim}")));
        }
        if let Some((_, v)) = pairs.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Config(format!("fixed value {v} is not finite")));
        }
        if pairs.len() >= dim {
            return Err(Error::Config("at least one coordinate must stay free".into()));
        }
        let r = pairs.len();
        let mut matrix = DMatrix::zeros(r, dim);
        let mut rhs = DVector::zeros(r);
        for (row, (i, v)) in pairs.iter().enumerate() {
            matrix[(row, *i)] = 1.0;
            rhs[row] = *v;
        }
        Ok(Self { dim, matrix, rhs, kind: Kind::Fixed(pairs) })
    }

    /// General restrictions `Aθ = b`; `A` must have full row rank below its
    /// column count.
    pub fn affine(matrix: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        let (r, p) = matrix.shape();
        if rhs.len() != r {
            return Err(Error::Dimension(format!("{r} restrictions but {} right-hand sides", rhs.len())));
        }
        if r == 0 {
            return Ok(Self::none(p));
        }
        if r >= p {
            return Err(Error::Config(format!("{r} restrictions leave no free direction in dimension {p}")));
        }
        let basis = null_space(&matrix)?;
        let aat = &matrix * matrix.transpose();
        let aat_inv = inverse(&aat).map_err(|_| Error::Config("restriction matrix is rank deficient".into()))?;
        let particular = matrix.transpose() * aat_inv * &rhs;
        Ok(Self { dim: p, matrix, rhs, kind: Kind::Affine { particular, basis } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of restrictions `r`.
    pub fn rank(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn free_dim(&self) -> usize {
        self.dim - self.rank()
    }

    /// `m(θ) = Aθ − b`.
    pub fn residual(&self, theta: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(theta) - &self.rhs).iter().copied().collect()
    }

    /// `M = ∇m(θ)ᵀ`, a `p × r` matrix (constant for affine sets).
    pub fn jacobian(&self) -> DMatrix<f64> {
        self.matrix.transpose()
    }

    /// Maps free coordinates into the restricted set.
    pub fn embed(&self, phi: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Fixed(pairs) => {
                let mut theta = vec![0.0; self.dim];
                let mut free = phi.iter();
                let mut fixed = pairs.iter().peekable();
                for (i, t) in theta.iter_mut().enumerate() {
                    match fixed.peek() {
                        Some((j, v)) if *j == i => {
                            *t = *v;
                            fixed.next();
                        }
                        _ => *t = *free.next().expect("free coordinate count"),
                    }
                }
                theta
            }
            Kind::Affine { particular, basis } => {
                (particular + basis * DVector::from_column_slice(phi)).iter().copied().collect()
            }
        }
    }

    /// Free coordinates of the point of the restricted set nearest `theta`
    /// (exact inverse of [`embed`](Self::embed) on the set).
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Fixed(pairs) => theta
                .iter()
                .enumerate()
                .filter(|(i, _)| !pairs.iter().any(|(j, _)| j == i))
                .map(|(_, v)| *v)
                .collect(),
            Kind::Affine { particular, basis } => {
                (basis.transpose() * (DVector::from_column_slice(theta) - particular)).iter().copied().collect()
            }
        }
    }

    fn free_indices(&self) -> Option<Vec<usize>> {
        match &self.kind {
            Kind::Fixed(pairs) => Some((0..self.dim).filter(|i| !pairs.iter().any(|(j, _)| j == i)).collect()),
            Kind::Affine { .. } => None,
        }
    }
}

/// Orthonormal basis of `{x : A x = 0}` as columns.
fn null_space(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (r, p) = a.shape();
    // Eigenvectors of AᵀA with zero eigenvalue span the null space.
    let ata = a.transpose() * a;
    let eig = ata.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let keep = &order[..p - r];
    let max = eig.eigenvalues.amax();
    if keep.iter().any(|&i| eig.eigenvalues[i] > 1e-10 * max) {
        return Err(Error::Config("restriction matrix is rank deficient".into()));
    }
    Ok(DMatrix::from_fn(p, p - r, |row, col| eig.eigenvectors[(row, keep[col])]))
}

fn is_log_coordinate(model: &Model, index: usize) -> bool {
    match model {
        Model::NormalMean { .. } => false,
        Model::NormalLocationScale => index == 1,
        _ => true,
    }
}

fn sample_sd(data: &[f64]) -> f64 {
    let n = data.len() as f64;
    let m = data.iter().sum::<f64>() / n;
    let sd = (data.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        sd
    } else {
        1.0
    }
}

/// Minimum divergence estimate of `θ` subject to `constraints`.
///
/// With no restriction this is exactly [`estimate_iid`].
pub fn estimate_restricted(gen: &Generator, model: &Model, data: &[f64], constraints: &ConstraintSet) -> Result<Estimate> {
    if constraints.dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "constraints are for dimension {}, model has {}",
            constraints.dim(),
            model.dim()
        )));
    }
    if constraints.rank() == 0 {
        return estimate_iid(gen, model, data, &Init::Default);
    }
    model.check_data(data)?;
    let gen_n = gen.normalized();
    let obj = CachedObjective::new(&gen_n, model, data);
    let free = constraints.free_dim();

    // Starting points: robust and ML fits moved onto the restricted set.
    let mut starts = vec![model.robust_init(data)?];
    if let Ok(m) = model.mle(data) {
        starts.push(m);
    }
    let starts: Vec<Vec<f64>> = starts
        .into_iter()
        .map(|t| constraints.embed(&constraints.project(&t)))
        .filter(|t| model.check_theta(t).is_ok())
        .collect();
    if starts.is_empty() {
        return Err(Error::Domain("the restricted set contains no valid starting value".into()));
    }

    let free_idx = constraints.free_indices();
    // Coordinate-fixing sets optimize the free coordinates on the model's
    // internal scale (log for scales); general affine sets use natural ones.
    let to_theta = |e: &[f64], template: &[f64]| -> Vec<f64> {
        match &free_idx {
            Some(idx) => {
                let mut eta = model.to_internal(template);
                for (k, &i) in idx.iter().enumerate() {
                    eta[i] = e[k];
                }
                let natural = model.from_internal(&eta);
                let phi: Vec<f64> = idx.iter().map(|&i| natural[i]).collect();
                constraints.embed(&phi)
            }
            None => constraints.embed(e),
        }
    };
    let from_theta = |theta: &[f64]| -> Vec<f64> {
        match &free_idx {
            Some(idx) => {
                let eta = model.to_internal(theta);
                idx.iter().map(|&i| eta[i]).collect()
            }
            None => constraints.project(theta),
        }
    };

    let opts = OptimizerOptions::default();
    let mut best: Option<OptimizerReport> = None;
    for start in &starts {
        let f = |e: &[f64]| {
            if e.iter().any(|v| !v.is_finite()) {
                return f64::INFINITY;
            }
            obj.natural(&to_theta(e, start))
        };
        let e0 = from_theta(start);
        let report = if free == 1 {
            let step = match &free_idx {
                Some(idx) if is_log_coordinate(model, idx[0]) => 0.1,
                _ => 0.1 * sample_sd(data),
            };
            minimize_scalar(|x| f(&[x]), e0[0], step, 1e-10)
        } else {
            minimize(f, &e0, &opts)
        };
        let Ok(mut report) = report else { continue };
        report.minimizer = to_theta(&report.minimizer, start);
        if best.as_ref().is_none_or(|b| report.value < b.value - 1e-10) {
            best = Some(report);
        }
    }
    let report = best.ok_or_else(|| Error::Optimization("restricted fit failed from every starting value".into()))?;
    Ok(Estimate {
        theta: report.minimizer.clone(),
        generator: gen.clone(),
        model: *model,
        n: data.len(),
        objective: report.value,
        init_source: InitSource::Robust,
        asymptotics: None,
        report,
    })
}

/// `Σ = P K P` with `P = J⁻¹ − Q Mᵀ J⁻¹` and `Q = J⁻¹ M (Mᵀ J⁻¹ M)⁻¹`,
/// the asymptotic covariance of `√n (θ̃ − θ)`.
pub fn restricted_vcov(gen: &Generator, model: &Model, theta: &[f64], constraints: &ConstraintSet) -> Result<DMatrix<f64>> {
    let bundle = model_matrices(gen, model, theta)?;
    let j_inv = inverse(&bundle.j)?;
    let p_mat = if constraints.rank() == 0 {
        j_inv
    } else {
        let m = constraints.jacobian();
        let inner = inverse(&(m.transpose() * &j_inv * &m))?;
        let q = &j_inv * &m * inner;
        &j_inv - q * m.transpose() * &j_inv
    };
    let sigma = &p_mat * &bundle.k * &p_mat;
    Ok((&sigma + sigma.transpose()) * 0.5)
}

/// `T = 2n · D(f_θ̂, f_θ̃)` for the divergence generated by `gen`.
pub fn bdts(gen: &Generator, model: &Model, theta_hat: &[f64], theta_tilde: &[f64], n: usize) -> Result<f64> {
    model.check_theta(theta_hat)?;
    model.check_theta(theta_tilde)?;
    let grid = model.covering_grid(&[theta_hat, theta_tilde]);
    let g: Vec<f64> = grid.nodes.iter().map(|&x| model.density(theta_hat, x)).collect();
    let f: Vec<f64> = grid.nodes.iter().map(|&x| model.density(theta_tilde, x)).collect();
    let pair = DensityGrid::new(grid.nodes, grid.weights, g, f)?;
    let d = divergence(gen, &pair)?;
    Ok(2.0 * n as f64 * d)
}

/// `A = ∫ B''(f) ∇f ∇fᵀ dx`, with `∇f = u f`.
pub fn a_matrix(gen: &Generator, model: &Model, theta: &[f64]) -> Result<DMatrix<f64>> {
    model.check_theta(theta)?;
    let gen = gen.normalized();
    let p = model.dim();
    let grid = model.quadrature_grid(theta);
    let mut a = DMatrix::zeros(p, p);
    let mut u = vec![0.0; p];
    for (&x, &dx) in grid.nodes.iter().zip(&grid.weights) {
        let f = model.density(theta, x);
        if f == 0.0 {
            continue;
        }
        model.score_into(theta, x, &mut u);
        let c = dx * gen.b_second_unchecked(f) * f * f;
        for i in 0..p {
            for j in 0..p {
                a[(i, j)] += c * u[i] * u[j];
            }
        }
    }
    Ok(a)
}

/// The `r` nonzero eigenvalues (descending) of `A₂ · B K₁ B` at `theta`.
pub fn null_eigenvalues(
    gen1: &Generator,
    gen2: &Generator,
    model: &Model,
    theta: &[f64],
    constraints: &ConstraintSet,
) -> Result<Vec<f64>> {
    let r = constraints.rank();
    if r == 0 {
        return Err(Error::Config("a test needs at least one restriction".into()));
    }
    let bundle = model_matrices(gen1, model, theta)?;
    let j_inv = inverse(&bundle.j)?;
    let m = constraints.jacobian();
    let inner = inverse(&(m.transpose() * &j_inv * &m))?;
    let b = &j_inv * &m * inner * m.transpose() * &j_inv;
    let s = &b * &bundle.k * &b;
    let s = (&s + s.transpose()) * 0.5;
    let a = a_matrix(gen2, model, theta)?;
    let eig = product_eigvals(&a, &s)?;
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let nonzero: Vec<f64> = eig.into_iter().filter(|v| v.abs() >= 1e-8 * max).collect();
    if nonzero.len() != r {
        return Err(Error::Consistency(format!(
            "expected {r} nonzero eigenvalues, found {} ({nonzero:?})",
            nonzero.len()
        )));
    }
    Ok(nonzero)
}

/// `P(Σ λᵢ Zᵢ² ≥ statistic)` estimated from `reps` seeded draws.
///
/// Draws are generated in fixed-size chunks, each from its own substream of
/// `seed`, so the result does not depend on the thread count.
pub fn mc_pvalue(eigenvalues: &[f64], statistic: f64, reps: usize, seed: u64) -> Result<f64> {
    if eigenvalues.is_empty() {
        return Err(Error::Config("no eigenvalues supplied".into()));
    }
    if let Some(l) = eigenvalues.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::Domain(format!("null eigenvalues must be positive, found {l}")));
    }
    if reps < MIN_MC_REPS {
        return Err(Error::Config(format!("at least {MIN_MC_REPS} Monte Carlo replications are required, got {reps}")));
    }
    if statistic.is_nan() {
        return Err(Error::Evaluation("test statistic is NaN".into()));
    }
    let chunks = reps.div_ceil(MC_CHUNK);
    let exceed: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c as u64);
            let size = MC_CHUNK.min(reps - c * MC_CHUNK);
            (0..size)
                .filter(|_| {
                    let draw: f64 = eigenvalues
                        .iter()
                        .map(|l| {
                            let z: f64 = rng.sample(StandardNormal);
                            l * z * z
                        })
                        .sum();
                    draw >= statistic
                })
                .count()
        })
        .sum();
    Ok(exceed as f64 / reps as f64)
}

/// Exact tail probability for a single eigenvalue: `1 − F_{χ²₁}(T/λ)`.
pub fn chi2_pvalue(eigenvalue: f64, statistic: f64) -> Result<f64> {
    if !(eigenvalue > 0.0) {
        return Err(Error::Domain(format!("null eigenvalue must be positive, found {eigenvalue}")));
    }
    Ok(chi2_1_sf((statistic / eigenvalue).max(0.0)))
}

/// Everything a test run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub unrestricted: Vec<f64>,
    pub restricted: Vec<f64>,
    pub statistic: f64,
    pub eigenvalues: Vec<f64>,
    pub p_value: f64,
    pub reps: usize,
    pub seed: u64,
    pub beta: f64,
    pub gamma: f64,
}

/// Options for [`ewdts_normal_mean`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwdtsOptions {
    /// Tuning of the divergence in the statistic; `None` uses `β`.
    pub gamma: Option<f64>,
    pub reps: usize,
    pub seed: u64,
}

impl Default for EwdtsOptions {
    fn default() -> Self {
        Self { gamma: None, reps: DEFAULT_MC_REPS, seed: 0 }
    }
}

/// Tests `μ = μ₀` under `N(μ, σ²)` with unknown `σ` using the EWD statistic.
pub fn ewdts_normal_mean(data: &[f64], mu0: f64, beta: f64, options: &EwdtsOptions) -> Result<TestResult> {
    if !mu0.is_finite() {
        return Err(Error::Domain(format!("null mean {mu0} is not finite")));
    }
    let gamma = options.gamma.unwrap_or(beta);
    let gen1 = Generator::ewd(beta)?;
    let gen2 = Generator::ewd(gamma)?;
    let model = Model::NormalLocationScale;
    let constraints = ConstraintSet::fix(2, &[(0, mu0)])?;
    bregman_test(&gen1, &gen2, &model, data, &constraints, options.reps, options.seed).map(|mut r| {
        r.beta = beta;
        r.gamma = gamma;
        r
    })
}

/// The general test: fit with `gen1`, measure with `gen2`.
pub fn bregman_test(
    gen1: &Generator,
    gen2: &Generator,
    model: &Model,
    data: &[f64],
    constraints: &ConstraintSet,
    reps: usize,
    seed: u64,
) -> Result<TestResult> {
    let full = estimate_iid(gen1, model, data, &Init::Default)?;
    let restricted = estimate_restricted(gen1, model, data, constraints)?;
    let statistic = bdts(gen2, model, &full.theta, &restricted.theta, data.len())?;
    let eigenvalues = null_eigenvalues(gen1, gen2, model, &restricted.theta, constraints)?;
    let p_value = mc_pvalue(&eigenvalues, statistic.max(0.0), reps, seed)?;
    Ok(TestResult {
        unrestricted: full.theta,
        restricted: restricted.theta,
        statistic,
        eigenvalues,
        p_value,
        reps,
        seed,
        beta: gen1.tuning().unwrap_or(0.0),
        gamma: gen2.tuning().unwrap_or(0.0),
    })
}

/// `(β, p-value)` over a grid of `β` with `γ = β`, all using `seed`.
pub fn pvalue_curve(data: &[f64], mu0: f64, betas: &[f64], reps: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    betas
        .par_iter()
        .map(|&b| {
            let opts = EwdtsOptions { gamma: None, reps, seed };
            ewdts_normal_mean(data, mu0, b, &opts).map(|r| (b, r.p_value))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::shoshoni;
    use crate::estimation::objective_iid;

    #[test]
    fn fixed_embedding_is_exact() {
        let c = ConstraintSet::fix(3, &[(1, 0.618)]).unwrap();
        let t = c.embed(&[2.0, 3.0]);
        assert_eq!(t, vec![2.0, 0.618, 3.0]);
        assert_eq!(c.residual(&t), vec![0.0]);
        assert_eq!(c.project(&t), vec![2.0, 3.0]);
        assert_eq!(c.rank(), 1);
        assert_eq!(c.jacobian().shape(), (3, 1));
    }

    #[test]
    fn affine_embedding_satisfies_constraint() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, -1.0, 2.0]);
        let b = DVector::from_vec(vec![0.5]);
        let c = ConstraintSet::affine(a, b).unwrap();
        assert_eq!(c.free_dim(), 2);
        for phi in [[0.0, 0.0], [1.0, -2.0], [3.5, 0.25]] {
            let t = c.embed(&phi);
            assert!(c.residual(&t)[0].abs() < 1e-12);
            let back = c.project(&t);
            assert!((back[0] - phi[0]).abs() < 1e-12 && (back[1] - phi[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_constraint_sets() {
        assert!(ConstraintSet::fix(2, &[(0, 1.0), (1, 1.0)]).is_err());
        assert!(ConstraintSet::fix(2, &[(0, 1.0), (0, 2.0)]).is_err());
        assert!(ConstraintSet::fix(2, &[(2, 1.0)]).is_err());
        let rank_deficient = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
        assert!(ConstraintSet::affine(rank_deficient, DVector::zeros(2)).is_err());
    }

    #[test]
    fn unrestricted_fit_is_estimate_iid() {
        let data = shoshoni();
        let gen = Generator::ewd(0.25).unwrap();
        let m = Model::NormalLocationScale;
        let a = estimate_restricted(&gen, &m, &data, &ConstraintSet::none(2)).unwrap();
        let b = estimate_iid(&gen, &m, &data, &Init::Default).unwrap();
        assert_eq!(a.theta, b.theta);
    }

    // Oracle: golden-section search over σ on the raw objective.
    fn golden_sigma(gen: &Generator, data: &[f64], mu: f64, lo: f64, hi: f64) -> f64 {
        let m = Model::NormalLocationScale;
        let f = |s: f64| objective_iid(gen, &m, data, &[mu, s]).unwrap();
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn shoshoni_restricted_scale_lies_between_classical_values() {
        let data = shoshoni();
        let gen = Generator::ewd(0.25).unwrap();
        let m = Model::NormalLocationScale;
        let c = ConstraintSet::fix(2, &[(0, 0.618)]).unwrap();
        let fit = estimate_restricted(&gen, &m, &data, &c).unwrap();
        assert_eq!(fit.theta[0], 0.618);
        let oracle = golden_sigma(&gen, &data, 0.618, 0.03, 0.2);
        assert!((fit.theta[1] - oracle).abs() < 1e-6, "{} vs {oracle}", fit.theta[1]);
        let full_sd = m.mle(&data).unwrap()[1];
        let deleted = crate::estimation::mle_deleted(&m, &data, &crate::estimation::largest_indices(&data, 3)).unwrap();
        assert!(fit.theta[1] > deleted.theta[1] && fit.theta[1] < full_sd, "{:?}", fit.theta);
        let unrestricted = estimate_iid(&gen, &m, &data, &Init::Default).unwrap();
        assert!(fit.objective >= unrestricted.objective - 1e-9);
    }

    #[test]
    fn restricted_vcov_zeroes_the_fixed_direction() {
        let gen = Generator::ewd(0.25).unwrap();
        let m = Model::NormalLocationScale;
        let c = ConstraintSet::fix(2, &[(0, 0.618)]).unwrap();
        let s = restricted_vcov(&gen, &m, &[0.618, 0.06], &c).unwrap();
        assert!(s[(0, 0)].abs() < 1e-9 && s[(0, 1)].abs() < 1e-9 && s[(1, 0)].abs() < 1e-9);
        assert!(s[(1, 1)] > 0.0);
        let eig = crate::numerics::sym_eigvals(&s, true).unwrap();
        assert!(eig[1].abs() < 1e-8 * eig[0].max(1.0));
    }

    #[test]
    fn restricted_vcov_without_restrictions_is_the_sandwich() {
        let gen = Generator::ewd(0.4).unwrap();
        let m = Model::NormalLocationScale;
        let s = restricted_vcov(&gen, &m, &[0.1, 1.3], &ConstraintSet::none(2)).unwrap();
        let sandwich = model_matrices(&gen, &m, &[0.1, 1.3]).unwrap().covariance;
        assert!((s - sandwich).amax() < 1e-10);
    }

    #[test]
    fn bdts_examples() {
        let m = Model::NormalLocationScale;
        let gen = Generator::ewd(0.3).unwrap();
        assert_eq!(bdts(&gen, &m, &[0.5, 0.2], &[0.5, 0.2], 20).unwrap(), 0.0);
        let t1 = bdts(&gen, &m, &[0.5, 0.2], &[0.45, 0.22], 20).unwrap();
        let t2 = bdts(&gen, &m, &[0.5, 0.2], &[0.45, 0.22], 40).unwrap();
        assert!(t1 > 0.0);
        assert_eq!(t2, 2.0 * t1);
        // KL between equal-variance normals: (Δμ)²/(2σ²).
        let kl = bdts(&Generator::Kl, &m, &[0.3, 1.5], &[0.0, 1.5], 50).unwrap();
        let oracle = 2.0 * 50.0 * 0.09 / (2.0 * 2.25);
        assert!((kl - oracle).abs() < 1e-9 * oracle, "{kl} vs {oracle}");
    }

    #[test]
    fn a_matrix_matches_first_j_term() {
        // ∇f = u f, so B''(f)∇f∇fᵀ = u uᵀ w(f) f: the at-model J.
        let m = Model::NormalLocationScale;
        let gen = Generator::ewd(0.2).unwrap();
        let a = a_matrix(&gen, &m, &[0.2, 0.7]).unwrap();
        let j = model_matrices(&gen, &m, &[0.2, 0.7]).unwrap().j;
        assert!((a - j).amax() < 1e-8);
    }

    #[test]
    fn one_restriction_one_eigenvalue_and_lrt_limit() {
        let m = Model::NormalLocationScale;
        let c = ConstraintSet::fix(2, &[(0, 0.0)]).unwrap();
        let g = Generator::ewd(0.3).unwrap();
        let e = null_eigenvalues(&g, &g, &m, &[0.0, 1.0], &c).unwrap();
        assert_eq!(e.len(), 1);
        let tiny = Generator::ewd(1e-5).unwrap();
        let e = null_eigenvalues(&tiny, &tiny, &m, &[0.0, 1.0], &c).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-2, "{e:?}");
        assert!(null_eigenvalues(&g, &g, &m, &[0.0, 1.0], &ConstraintSet::none(2)).is_err());
    }

    #[test]
    fn mc_pvalue_examples() {
        let p = mc_pvalue(&[1.0], 3.841, 100_000, 1).unwrap();
        assert!((p - 0.05).abs() < 0.003, "{p}");
        let p = mc_pvalue(&[2.0], 7.682, 100_000, 2).unwrap();
        assert!((p - 0.05).abs() < 0.003, "{p}");
        assert_eq!(mc_pvalue(&[1.0, 0.5], 0.0, 10_000, 3).unwrap(), 1.0);
        assert_eq!(mc_pvalue(&[1.0], 2.0, 20_000, 9).unwrap(), mc_pvalue(&[1.0], 2.0, 20_000, 9).unwrap());
        assert!(mc_pvalue(&[1.0], 2.0, 100, 9).is_err());
        assert!(mc_pvalue(&[1.0, -0.1], 2.0, 20_000, 9).is_err());
        assert!((chi2_pvalue(1.0, 3.841).unwrap() - 0.05).abs() < 1e-4);
    }
}
