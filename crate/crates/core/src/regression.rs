//! Minimum divergence estimation for independent, non-homogeneous data:
//! the normal linear regression `yᵢ = xᵢᵀγ + εᵢ`, `εᵢ ~ N(0, σ²)`.
//!
//! After standardizing `t = (y − xᵢᵀγ)/σ` the integral part of the
//! objective no longer depends on `i`, so each evaluation needs a single
//! one-dimensional integral (shared with the i.i.d. normal model) plus one
//! generator derivative per observation.
//!
//! The search runs in an orthogonalized coordinate system (`X = QR`) with
//! `log σ`, which keeps badly scaled regressors such as GDP in dollars from
//! stalling the simplex.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;

use crate::asymptotics::model_matrices;
use crate::divergence::Generator;
use crate::error::{Error, Result};
use crate::estimation::integral_term_unchecked;
use crate::models::{mad, median, Model, ScaleConvention};
use crate::numerics::linalg::inverse;
use crate::numerics::optimize::{minimize, OptimizerOptions, OptimizerReport};
use crate::numerics::rng::seeded;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Design matrix and response.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub design: DMatrix<f64>,
    pub response: Vec<f64>,
    pub column_names: Vec<String>,
}

impl RegressionData {
    /// Validates `n > s` and full column rank (pivoted QR, tolerance 1e−10).
    pub fn new(design: DMatrix<f64>, response: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        let (n, s) = design.shape();
        if response.len() != n {
            return Err(Error::Dimension(format!("design has {n} rows but response has {}", response.len())));
        }
        if column_names.len() != s {
            return Err(Error::Dimension(format!("{s} columns but {} column names", column_names.len())));
        }
        if n <= s {
            return Err(Error::Data(format!("need more observations ({n}) than coefficients ({s})")));
        }
        if design.iter().chain(&response).any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value in regression data".into()));
        }
        let qr = design.clone().col_piv_qr();
        let r = qr.r();
        let lead = r[(0, 0)].abs();
        for k in 0..s {
            if !(r[(k, k)].abs() > 1e-10 * lead) {
                return Err(Error::Data(format!("design matrix is rank deficient (rank {k} < {s})")));
            }
        }
        Ok(Self { design, response, column_names })
    }

    /// Builds `[1, x₁, …]` from predictor columns.
    pub fn with_intercept(predictors: &[Vec<f64>], response: Vec<f64>, names: &[&str]) -> Result<Self> {
        let n = response.len();
        let s = predictors.len() + 1;
        let mut design = DMatrix::from_element(n, s, 1.0);
        for (j, col) in predictors.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Dimension(format!("predictor {j} has {} rows, expected {n}", col.len())));
            }
            for i in 0..n {
                design[(i, j + 1)] = col[i];
            }
        }
        let mut column_names = vec!["intercept".to_string()];
        column_names.extend(names.iter().map(|s| s.to_string()));
        Self::new(design, response, column_names)
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn coefficients(&self) -> usize {
        self.design.ncols()
    }

    fn fitted(&self, gamma: &[f64]) -> DVector<f64> {
        &self.design * DVector::from_column_slice(gamma)
    }
}

/// A fitted regression.
#[derive(Debug, Clone)]
pub struct RegressionEstimate {
    pub gamma: Vec<f64>,
    pub sigma: f64,
    pub generator: Generator,
    pub report: OptimizerReport,
    pub objective: f64,
    /// Which starting value produced the reported root.
    pub init_label: &'static str,
    pub psi_n: DMatrix<f64>,
    pub omega_n: DMatrix<f64>,
    /// `Ψₙ⁻¹ Ωₙ Ψₙ⁻¹` for `√n (θ̂ − θ)`, ordered `(γ, σ)`.
    pub covariance: DMatrix<f64>,
}

impl RegressionEstimate {
    pub fn theta(&self) -> Vec<f64> {
        let mut t = self.gamma.clone();
        t.push(self.sigma);
        t
    }
}

/// Starting-value strategy for [`estimate_regression`].
#[derive(Debug, Clone, PartialEq, Default)]
pub enum RegressionInit {
    /// OLS with MAD scale, OLS with ML scale and an elemental-subset
    /// least-median fit; the lowest objective wins, ties resolved in that order.
    #[default]
    Default,
    Given { gamma: Vec<f64>, sigma: f64 },
}

/// Least squares coefficients and the residual scale under `convention`.
pub fn ols(data: &RegressionData, convention: ScaleConvention) -> Result<(Vec<f64>, f64)> {
    let x = &data.design;
    let xtx = x.transpose() * x;
    let xty = x.transpose() * DVector::from_column_slice(&data.response);
    let gamma = inverse(&xtx)? * xty;
    let gamma: Vec<f64> = gamma.iter().copied().collect();
    let rss: f64 = residuals(data, &gamma).iter().map(|r| r * r).sum();
    let denom = match convention {
        ScaleConvention::MaximumLikelihood => data.n() as f64,
        ScaleConvention::DegreesOfFreedom => (data.n() - data.coefficients()) as f64,
    };
    Ok((gamma, (rss / denom).sqrt()))
}

/// `yᵢ − xᵢᵀγ`.
pub fn residuals(data: &RegressionData, gamma: &[f64]) -> Vec<f64> {
    let fitted = data.fitted(gamma);
    data.response.iter().zip(fitted.iter()).map(|(y, f)| y - f).collect()
}

fn data_term(gen: &Generator, data: &RegressionData, fitted: &DVector<f64>, sigma: f64) -> f64 {
    let ls = sigma.ln();
    let mut s = 0.0;
    for (y, m) in data.response.iter().zip(fitted.iter()) {
        let t = (y - m) / sigma;
        s += gen.b_prime_from_log(-0.5 * t * t - ls - LN_SQRT_2PI);
    }
    s / data.n() as f64
}

/// `n⁻¹ Σᵢ [∫ (f B'(f) − B(f))(y) dy − B'(fᵢ(Yᵢ))]` with `fᵢ = N(xᵢᵀγ, σ²)`;
/// `theta = (γ, σ)`.
pub fn objective_inh(gen: &Generator, data: &RegressionData, theta: &[f64]) -> Result<f64> {
    let s = data.coefficients();
    if theta.len() != s + 1 {
        return Err(Error::Dimension(format!("expected {} parameters, got {}", s + 1, theta.len())));
    }
    let sigma = theta[s];
    if !(sigma > 0.0) || theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let gen = gen.normalized();
    let integral = integral_term_unchecked(&gen, &Model::NormalLocationScale, &[0.0, sigma]);
    Ok(integral - data_term(&gen, data, &data.fitted(&theta[..s]), sigma))
}

/// Orthogonalized coordinates `c = R γ / √n`, so that fitted values are
/// `Z c` with `ZᵀZ = n I`.
struct Whitening {
    z: DMatrix<f64>,
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    root_n: f64,
}

impl Whitening {
    fn new(data: &RegressionData) -> Result<Self> {
        let qr = data.design.clone().qr();
        let root_n = (data.n() as f64).sqrt();
        let z = qr.q() * root_n;
        let r = qr.r();
        let r_inv = inverse(&r)?;
        Ok(Self { z, r, r_inv, root_n })
    }

    fn to_internal(&self, gamma: &[f64], sigma: f64) -> Vec<f64> {
        let c = &self.r * DVector::from_column_slice(gamma) / self.root_n;
        let mut v: Vec<f64> = c.iter().copied().collect();
        v.push(sigma.ln());
        v
    }

    fn gamma(&self, internal: &[f64]) -> Vec<f64> {
        let s = internal.len() - 1;
        (&self.r_inv * DVector::from_column_slice(&internal[..s]) * self.root_n).iter().copied().collect()
    }
}

fn elemental_init(data: &RegressionData, seed: u64) -> Option<(Vec<f64>, f64)> {
    let (n, s) = data.design.shape();
    let mut rng = seeded(seed);
    let total_subsets: f64 = (0..s).map(|k| (n - k) as f64 / (k + 1) as f64).product();
    let draws = if total_subsets <= 3000.0 { None } else { Some(3000) };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |rows: &[usize]| {
        let sub = DMatrix::from_fn(s, s, |i, j| data.design[(rows[i], j)]);
        let rhs = DVector::from_iterator(s, rows.iter().map(|&i| data.response[i]));
        let Some(sol) = sub.lu().solve(&rhs) else { return };
        if sol.iter().any(|v| !v.is_finite()) {
            return;
        }
        let gamma: Vec<f64> = sol.iter().copied().collect();
        let sq: Vec<f64> = residuals(data, &gamma).iter().map(|r| r * r).collect();
        let crit = median(&sq);
        if best.as_ref().is_none_or(|(c, _)| crit < *c) {
            best = Some((crit, gamma));
        }
    };
    match draws {
        Some(k) => {
            for _ in 0..k {
                let mut rows = sample(&mut rng, n, s).into_vec();
                rows.sort_unstable();
                consider(&rows);
            }
        }
        None => {
            let mut rows: Vec<usize> = (0..s).collect();
            loop {
                consider(&rows);
                // next combination in lexicographic order
                let mut i = s;
                while i > 0 && rows[i - 1] == n - s + i - 1 {
                    i -= 1;
                }
                if i == 0 {
                    break;
                }
                rows[i - 1] += 1;
                for j in i..s {
                    rows[j] = rows[j - 1] + 1;
                }
            }
        }
    }
    let (crit, gamma) = best?;
    let sigma = 1.4826 * (1.0 + 5.0 / (n - s) as f64) * crit.sqrt();
    (sigma > 0.0).then_some((gamma, sigma))
}

/// Minimum divergence regression fit.
pub fn estimate_regression(gen: &Generator, data: &RegressionData, init: &RegressionInit) -> Result<RegressionEstimate> {
    estimate_regression_with(gen, data, init, &OptimizerOptions::default())
}

pub fn estimate_regression_with(
    gen: &Generator,
    data: &RegressionData,
    init: &RegressionInit,
    opts: &OptimizerOptions,
) -> Result<RegressionEstimate> {
    let gen_n = gen.normalized();
    let s = data.coefficients();
    let white = Whitening::new(data)?;
    let mut starts: Vec<(&'static str, Vec<f64>, f64)> = Vec::new();
    match init {
        RegressionInit::Default => {
            let (g_ls, s_ml) = ols(data, ScaleConvention::MaximumLikelihood)?;
            let r = residuals(data, &g_ls);
            let s_mad = mad(&r, median(&r));
            if s_mad > 0.0 {
                starts.push(("ols-mad", g_ls.clone(), s_mad));
            }
            starts.push(("ols-ml", g_ls, s_ml));
            if !matches!(gen_n, Generator::Kl) {
                if let Some((g, sg)) = elemental_init(data, opts.seed) {
                    starts.push(("elemental", g, sg));
                }
            }
        }
        RegressionInit::Given { gamma, sigma } => {
            if gamma.len() != s || !(*sigma > 0.0) {
                return Err(Error::Domain("invalid starting value for the regression fit".into()));
            }
            starts.push(("given", gamma.clone(), *sigma));
        }
    }
    let integral_cache = std::cell::RefCell::new((f64::NAN, 0.0));
    let objective = |v: &[f64]| -> f64 {
        if v.iter().any(|x| !x.is_finite()) {
            return f64::INFINITY;
        }
        let sigma = v[s].exp();
        if !(sigma > 0.0) || !sigma.is_finite() {
            return f64::INFINITY;
        }
        let integral = {
            let cached = *integral_cache.borrow();
            if cached.0 == sigma {
                cached.1
            } else {
                let val = integral_term_unchecked(&gen_n, &Model::NormalLocationScale, &[0.0, sigma]);
                *integral_cache.borrow_mut() = (sigma, val);
                val
            }
        };
        let fitted = &white.z * DVector::from_column_slice(&v[..s]);
        let out = integral - data_term(&gen_n, data, &fitted, sigma);
        if out.is_nan() {
            f64::INFINITY
        } else {
            out
        }
    };
    if matches!(gen_n, Generator::Kl) {
        let (g, sg) = ols(data, ScaleConvention::MaximumLikelihood)?;
        let v = white.to_internal(&g, sg);
        let value = objective(&v);
        return finish(gen, data, g, sg, OptimizerReport {
            minimizer: v,
            value,
            grad_norm: 0.0,
            iterations: 0,
            converged: true,
            restarts_used: 0,
        }, "closed-form");
    }
    let mut best: Option<(&'static str, OptimizerReport)> = None;
    let mut last_err = None;
    for (label, g, sg) in starts {
        match minimize(objective, &white.to_internal(&g, sg), opts) {
            Ok(r) => {
                if best.as_ref().is_none_or(|(_, b)| r.value < b.value - 1e-10) {
                    best = Some((label, r));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some((label, report)) = best else {
        return Err(last_err.unwrap_or_else(|| Error::Optimization("no starting value available".into())));
    };
    if !report.converged && !(report.grad_norm <= 1e-6 * (1.0 + report.value.abs())) {
        return Err(Error::Optimization(format!(
            "regression fit did not converge: gradient norm {:.3e} after {} iterations",
            report.grad_norm, report.iterations
        )));
    }
    let gamma = white.gamma(&report.minimizer);
    let sigma = report.minimizer[s].exp();
    finish(gen, data, gamma, sigma, report, label)
}

fn finish(
    gen: &Generator,
    data: &RegressionData,
    gamma: Vec<f64>,
    sigma: f64,
    report: OptimizerReport,
    label: &'static str,
) -> Result<RegressionEstimate> {
    let mut theta = gamma.clone();
    theta.push(sigma);
    let (psi_n, omega_n) = psi_omega(gen, data, &theta)?;
    let p_inv = inverse(&psi_n)?;
    let cov = &p_inv * &omega_n * &p_inv;
    Ok(RegressionEstimate {
        objective: report.value,
        gamma,
        sigma,
        generator: gen.clone(),
        report,
        init_label: label,
        psi_n,
        covariance: (&cov + cov.transpose()) * 0.5,
        omega_n,
    })
}

/// At-model `Ψₙ = n⁻¹ Σ J⁽ⁱ⁾` and `Ωₙ = n⁻¹ Σ K⁽ⁱ⁾`, ordered `(γ, σ)`.
///
/// Every per-observation integral factors into `xᵢxᵢᵀ` (or `xᵢ`) times the
/// corresponding entry of the i.i.d. normal location-scale matrices at
/// `(0, σ)`.
pub fn psi_omega(gen: &Generator, data: &RegressionData, theta: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let s = data.coefficients();
    if theta.len() != s + 1 {
        return Err(Error::Dimension(format!("expected {} parameters, got {}", s + 1, theta.len())));
    }
    let sigma = theta[s];
    let base = model_matrices(gen, &Model::NormalLocationScale, &[0.0, sigma])?;
    let n = data.n() as f64;
    let x = &data.design;
    let xtx = x.transpose() * x / n;
    let xbar: DVector<f64> = x.row_sum().transpose() / n;
    let build = |m: &DMatrix<f64>| {
        let mut out = DMatrix::zeros(s + 1, s + 1);
        out.view_mut((0, 0), (s, s)).copy_from(&(&xtx * m[(0, 0)]));
        for j in 0..s {
            out[(j, s)] = xbar[j] * m[(0, 1)];
            out[(s, j)] = xbar[j] * m[(1, 0)];
        }
        out[(s, s)] = m[(1, 1)];
        out
    };
    Ok((build(&base.j), build(&base.k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::objective_iid;
    use crate::numerics::rng::seeded;
    use rand_distr::{Distribution, Normal};

    fn simulated(n: usize, seed: u64) -> RegressionData {
        let mut rng = seeded(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64 * 10.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 0.3 * v + noise.sample(&mut rng)).collect();
        RegressionData::with_intercept(&[x], y, &["x"]).unwrap()
    }

    #[test]
    fn rank_and_shape_checks() {
        let x = vec![1.0, 2.0, 3.0];
        assert!(RegressionData::with_intercept(&[x.clone(), x.iter().map(|v| 2.0 * v).collect()], vec![1.0, 2.0, 4.0, ], &["a", "b"]).is_err());
        assert!(RegressionData::with_intercept(&[x.clone()], vec![1.0, 2.0], &["a"]).is_err());
        assert!(RegressionData::with_intercept(&[vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 4.0, 6.0, 8.0]], vec![1.0, 2.0, 3.0, 5.0], &["a", "b"]).is_err());
    }

    #[test]
    fn intercept_only_reduces_to_iid() {
        let y = vec![0.3, 1.2, -0.4, 0.9, 2.2, 0.1];
        let data = RegressionData::new(DMatrix::from_element(6, 1, 1.0), y.clone(), vec!["intercept".into()]).unwrap();
        let g = Generator::ewd(0.2).unwrap();
        let a = objective_inh(&g, &data, &[0.5, 0.8]).unwrap();
        let b = objective_iid(&g, &Model::NormalLocationScale, &y, &[0.5, 0.8]).unwrap();
        assert!((a - b).abs() < 1e-10);
        let (psi, omega) = psi_omega(&g, &data, &[0.5, 0.8]).unwrap();
        let m = model_matrices(&g, &Model::NormalLocationScale, &[0.5, 0.8]).unwrap();
        assert!((psi - m.j).abs().max() < 1e-8);
        assert!((omega - m.k).abs().max() < 1e-8);
    }

    #[test]
    fn tiny_beta_recovers_least_squares() {
        let data = simulated(80, 1);
        let fit = estimate_regression(&Generator::ewd(1e-7).unwrap(), &data, &RegressionInit::Default).unwrap();
        let (g, s) = ols(&data, ScaleConvention::MaximumLikelihood).unwrap();
        for (a, b) in fit.gamma.iter().zip(&g) {
            assert!((a - b).abs() < 1e-4, "{:?} vs {g:?}", fit.gamma);
        }
        assert!((fit.sigma - s).abs() < 1e-4);
    }

    #[test]
    fn response_shift_moves_only_the_intercept() {
        let data = simulated(30, 2);
        let mut shifted = data.clone();
        shifted.response.iter_mut().for_each(|y| *y += 5.0);
        let g = Generator::ewd(0.1).unwrap();
        let a = objective_inh(&g, &data, &[1.0, 0.3, 0.6]).unwrap();
        let b = objective_inh(&g, &shifted, &[6.0, 0.3, 0.6]).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn tiny_beta_matrices_are_fisher_blocks() {
        let data = simulated(40, 3);
        let sigma = 0.7;
        let (psi, omega) = psi_omega(&Generator::ewd(1e-7).unwrap(), &data, &[0.0, 0.0, sigma]).unwrap();
        let xtx = data.design.transpose() * &data.design / 40.0 / (sigma * sigma);
        for i in 0..2 {
            for j in 0..2 {
                assert!((psi[(i, j)] - xtx[(i, j)]).abs() < 1e-4 * (1.0 + xtx[(i, j)].abs()));
                assert!((omega[(i, j)] - xtx[(i, j)]).abs() < 1e-4 * (1.0 + xtx[(i, j)].abs()));
            }
        }
        assert!((psi[(2, 2)] - 2.0 / (sigma * sigma)).abs() < 1e-4);
    }

    #[test]
    fn robust_fit_ignores_gross_outliers() {
        let mut data = simulated(60, 4);
        for i in 0..6 {
            data.response[i * 10] += 30.0;
        }
        let fit = estimate_regression(&Generator::ewd(0.1).unwrap(), &data, &RegressionInit::Default).unwrap();
        assert!((fit.gamma[1] - 0.3).abs() < 0.1, "{:?}", fit.gamma);
        assert!(fit.sigma < 1.0);
    }
}
