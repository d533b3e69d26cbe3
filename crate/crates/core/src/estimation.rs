//! Minimum Bregman divergence estimation for i.i.d. samples.
//!
//! The empirical objective drops the data-only term `∫B(g)` and reads
//!
//! ```text
//! H_n(θ) = ∫ [f_θ B'(f_θ) − B(f_θ)] dx − n⁻¹ Σᵢ B'(f_θ(Xᵢ))
//! ```
//!
//! For every built-in family the integral depends on `θ` only through the
//! scale (`σ` or `λ`), so it is computed once per scale value.

use nalgebra::DMatrix;

use crate::asymptotics::AsymptoticsBundle;
use crate::divergence::Generator;
use crate::error::{Error, Result};
use crate::models::{Model, ScaleConvention};
use crate::numerics::optimize::{minimize, minimize_scalar, OptimizerOptions, OptimizerReport};

/// Starting-value strategy for [`estimate_iid`].
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    /// Robust moments and the MLE; the lower objective wins, near-ties go
    /// to the robust start.
    #[default]
    Default,
    Robust,
    Mle,
    Given(Vec<f64>),
}

/// Which starting value produced the reported root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitSource {
    Robust,
    Mle,
    Given,
    ClosedForm,
}

/// A fitted parameter with its diagnostics.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub theta: Vec<f64>,
    pub generator: Generator,
    pub model: Model,
    pub report: OptimizerReport,
    pub n: usize,
    /// `H_n(θ̂)`.
    pub objective: f64,
    pub init_source: InitSource,
    pub asymptotics: Option<AsymptoticsBundle>,
}

/// `∫ [f_θ B'(f_θ) − B(f_θ)] dx` over the model support.
pub fn integral_term(gen: &Generator, model: &Model, theta: &[f64]) -> Result<f64> {
    model.check_theta(theta)?;
    Ok(integral_term_unchecked(&gen.normalized(), model, theta))
}

pub(crate) fn integral_term_unchecked(gen: &Generator, model: &Model, theta: &[f64]) -> f64 {
    if matches!(gen, Generator::Kl) {
        return 1.0;
    }
    if let Some((grid, scale)) = model.standardized_grid(theta) {
        if let Generator::Dpd { alpha } = *gen {
            return dpd_integral_closed_form(model, alpha, scale);
        }
        let total: f64 = grid
            .weights
            .iter()
            .zip(&grid.densities)
            .map(|(&w, &d)| w * gen.antiderivative_unchecked(d / scale))
            .sum();
        return scale * total;
    }
    let grid = model.quadrature_grid(theta);
    let mut total = 0.0;
    for (&x, &w) in grid.nodes.iter().zip(&grid.weights) {
        let f = model.density(theta, x);
        if f > 0.0 {
            total += w * gen.antiderivative_unchecked(f);
        }
    }
    total
}

/// `∫ f^{1+α} dx / (1+α)` for the continuous families.
fn dpd_integral_closed_form(model: &Model, alpha: f64, scale: f64) -> f64 {
    match model {
        Model::ExponentialMean => scale.powf(-alpha) / ((1.0 + alpha) * (1.0 + alpha)),
        _ => {
            (2.0 * std::f64::consts::PI).powf(-0.5 * alpha) * scale.powf(-alpha)
                / ((1.0 + alpha).sqrt() * (1.0 + alpha))
        }
    }
}

/// The parameter coordinates the integral term depends on.
fn scale_key(model: &Model, theta: &[f64]) -> Option<f64> {
    match model {
        Model::NormalMean { .. } => None,
        Model::NormalLocationScale => Some(theta[1]),
        _ => Some(theta[0]),
    }
}

fn data_term(gen: &Generator, model: &Model, data: &[f64], theta: &[f64]) -> f64 {
    let mut s = 0.0;
    for &x in data {
        s += gen.b_prime_from_log(model.log_density(theta, x));
    }
    s / data.len() as f64
}

/// The empirical objective `H_n(θ)`.
pub fn objective_iid(gen: &Generator, model: &Model, data: &[f64], theta: &[f64]) -> Result<f64> {
    model.check_theta(theta)?;
    model.check_data(data)?;
    if let Some(x) = data.iter().find(|&&x| model.density(theta, x) == 0.0) {
        return Err(Error::Evaluation(format!("model density vanishes at observation {x}")));
    }
    let gen = gen.normalized();
    Ok(integral_term_unchecked(&gen, model, theta) - data_term(&gen, model, data, theta))
}

/// Objective on the internal (log-scale) parameterization with a one-slot
/// cache for the integral term.
pub(crate) struct CachedObjective<'a> {
    gen: Generator,
    model: &'a Model,
    data: &'a [f64],
    cache: std::cell::RefCell<Option<(Option<f64>, f64)>>,
}

impl<'a> CachedObjective<'a> {
    pub(crate) fn new(gen: &Generator, model: &'a Model, data: &'a [f64]) -> Self {
        Self {
            gen: gen.normalized(),
            model,
            data,
            cache: std::cell::RefCell::new(None),
        }
    }

    pub(crate) fn natural(&self, theta: &[f64]) -> f64 {
        if self.model.check_theta(theta).is_err() {
            return f64::INFINITY;
        }
        let key = scale_key(self.model, theta);
        let cached = *self.cache.borrow();
        let integral = match cached {
            Some((k, v)) if k == key => v,
            _ => {
                let v = integral_term_unchecked(&self.gen, self.model, theta);
                *self.cache.borrow_mut() = Some((key, v));
                v
            }
        };
        let v = integral - data_term(&self.gen, self.model, self.data, theta);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    pub(crate) fn internal(&self, eta: &[f64]) -> f64 {
        if eta.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        self.natural(&self.model.from_internal(eta))
    }
}

fn spread(model: &Model, data: &[f64]) -> f64 {
    match model {
        Model::NormalMean { sigma } => *sigma,
        _ => {
            let n = data.len() as f64;
            let m = data.iter().sum::<f64>() / n;
            let sd = (data.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        }
    }
}

/// Options used by [`estimate_iid`].
pub fn default_options() -> OptimizerOptions {
    OptimizerOptions::default()
}

fn run_from(obj: &CachedObjective<'_>, model: &Model, data: &[f64], start: &[f64], opts: &OptimizerOptions) -> Result<OptimizerReport> {
    let eta0 = model.to_internal(start);
    if model.dim() == 1 {
        let step = match model {
            Model::NormalMean { .. } => 0.1 * spread(model, data),
            _ => 0.1,
        };
        let mut r = minimize_scalar(|e| obj.internal(&[e]), eta0[0], step, 1e-10)?;
        r.minimizer = model.from_internal(&r.minimizer);
        Ok(r)
    } else {
        let f = |eta: &[f64]| obj.internal(eta);
        let mut r = minimize(f, &eta0, opts)?;
        r.minimizer = model.from_internal(&r.minimizer);
        Ok(r)
    }
}

/// Minimum divergence estimate of `θ` from an i.i.d. sample.
pub fn estimate_iid(gen: &Generator, model: &Model, data: &[f64], init: &Init) -> Result<Estimate> {
    estimate_iid_with(gen, model, data, init, &default_options())
}

pub fn estimate_iid_with(
    gen: &Generator,
    model: &Model,
    data: &[f64],
    init: &Init,
    opts: &OptimizerOptions,
) -> Result<Estimate> {
    model.check_data(data)?;
    if data.len() < 2 && matches!(model, Model::NormalLocationScale) {
        return Err(Error::Data("a single observation cannot identify both location and scale".into()));
    }
    let gen_n = gen.normalized();
    if matches!(gen_n, Generator::Kl) {
        let theta = model.mle(data)?;
        let obj = objective_iid(&gen_n, model, data, &theta)?;
        return Ok(Estimate {
            report: OptimizerReport {
                minimizer: theta.clone(),
                value: obj,
                grad_norm: 0.0,
                iterations: 0,
                converged: true,
                restarts_used: 0,
            },
            theta,
            generator: gen.clone(),
            model: *model,
            n: data.len(),
            objective: obj,
            init_source: InitSource::ClosedForm,
            asymptotics: None,
        });
    }
    let obj = CachedObjective::new(&gen_n, model, data);
    let mut candidates: Vec<(InitSource, Vec<f64>)> = Vec::new();
    match init {
        Init::Default => {
            let robust = model.robust_init(data)?;
            let mle = model.mle(data)?;
            let same = robust.iter().zip(&mle).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            candidates.push((InitSource::Robust, robust));
            if !same {
                candidates.push((InitSource::Mle, mle));
            }
        }
        Init::Robust => candidates.push((InitSource::Robust, model.robust_init(data)?)),
        Init::Mle => candidates.push((InitSource::Mle, model.mle(data)?)),
        Init::Given(t) => {
            model.check_theta(t)?;
            candidates.push((InitSource::Given, t.clone()))
        }
    }
    let mut best: Option<(InitSource, OptimizerReport)> = None;
    let mut last_err = None;
    for (src, start) in candidates {
        match run_from(&obj, model, data, &start, opts) {
            Ok(r) => {
                let replace = match &best {
                    None => true,
                    Some((_, b)) => r.value < b.value - 1e-10,
                };
                if replace {
                    best = Some((src, r));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some((src, report)) = best else {
        return Err(last_err.unwrap_or_else(|| Error::Optimization("no starting value available".into())));
    };
    let theta = report.minimizer.clone();
    let value = report.value;
    let grad = natural_gradient_norm(&obj, &theta);
    if !(grad <= 1e-6 * (1.0 + value.abs())) && !report.converged {
        return Err(Error::Optimization(format!(
            "no stationary point found: gradient norm {grad:.3e} at {theta:?} after {} iterations",
            report.iterations
        )));
    }
    Ok(Estimate {
        theta,
        generator: gen.clone(),
        model: *model,
        report,
        n: data.len(),
        objective: value,
        init_source: src,
        asymptotics: None,
    })
}

fn natural_gradient_norm(obj: &CachedObjective<'_>, theta: &[f64]) -> f64 {
    let f = |t: &[f64]| obj.natural(t);
    crate::numerics::optimize::gradient(&f, theta).iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// `ξ(θ) = ∫ u_θ w(f_θ) f_θ dx`.
pub fn xi(gen: &Generator, model: &Model, theta: &[f64]) -> Result<Vec<f64>> {
    model.check_theta(theta)?;
    let gen = gen.normalized();
    let p = model.dim();
    let grid = model.quadrature_grid(theta);
    let mut out = vec![0.0; p];
    let mut u = vec![0.0; p];
    for (&x, &w) in grid.nodes.iter().zip(&grid.weights) {
        let f = model.density(theta, x);
        if f == 0.0 {
            continue;
        }
        model.score_into(theta, x, &mut u);
        let c = w * gen.weight_unchecked(f) * f;
        for j in 0..p {
            out[j] += c * u[j];
        }
    }
    Ok(out)
}

/// M-estimation score `ψ(x, θ) = u_θ(x) w(f_θ(x)) − ξ(θ)`.
pub fn psi(gen: &Generator, model: &Model, theta: &[f64], x: f64) -> Result<Vec<f64>> {
    model.check_observation(x)?;
    let xi = xi(gen, model, theta)?;
    let gen = gen.normalized();
    let mut u = vec![0.0; model.dim()];
    model.score_into(theta, x, &mut u);
    let w = gen.weight_unchecked(model.density(theta, x));
    Ok(u.iter().zip(&xi).map(|(ui, xj)| ui * w - xj).collect())
}

/// Sample average of `ψ` over `data`.
pub fn psi_mean(gen: &Generator, model: &Model, theta: &[f64], data: &[f64]) -> Result<Vec<f64>> {
    model.check_data(data)?;
    let xi = xi(gen, model, theta)?;
    let gen = gen.normalized();
    let p = model.dim();
    let mut u = vec![0.0; p];
    let mut acc = vec![0.0; p];
    for &x in data {
        model.score_into(theta, x, &mut u);
        let w = gen.weight_unchecked(model.density(theta, x));
        for j in 0..p {
            acc[j] += u[j] * w - xi[j];
        }
    }
    Ok(acc.iter().map(|v| v / data.len() as f64).collect())
}

/// Maximum likelihood on the sample with the listed indices removed.
pub fn mle_deleted(model: &Model, data: &[f64], outliers: &[usize]) -> Result<Estimate> {
    if let Some(&i) = outliers.iter().find(|&&i| i >= data.len()) {
        return Err(Error::Data(format!("outlier index {i} out of range for {} observations", data.len())));
    }
    let kept: Vec<f64> = data
        .iter()
        .enumerate()
        .filter(|(i, _)| !outliers.contains(i))
        .map(|(_, &x)| x)
        .collect();
    if kept.is_empty() {
        return Err(Error::Data("every observation was deleted".into()));
    }
    estimate_iid(&Generator::Kl, model, &kept, &Init::Default)
}

/// Classical fit on the retained points with the scale reported under
/// `convention` (the deletion comparator as usually tabulated uses the
/// degrees-of-freedom divisor).
pub fn classical_deleted(model: &Model, data: &[f64], outliers: &[usize], convention: ScaleConvention) -> Result<Vec<f64>> {
    if let Some(&i) = outliers.iter().find(|&&i| i >= data.len()) {
        return Err(Error::Data(format!("outlier index {i} out of range for {} observations", data.len())));
    }
    let kept: Vec<f64> = data
        .iter()
        .enumerate()
        .filter(|(i, _)| !outliers.contains(i))
        .map(|(_, &x)| x)
        .collect();
    if kept.is_empty() {
        return Err(Error::Data("every observation was deleted".into()));
    }
    model.mle_with(&kept, convention)
}

/// Indices of the `k` largest observations (ties resolved by position).
pub fn largest_indices(data: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.sort_by(|&a, &b| data[b].total_cmp(&data[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Empirical Hessian of `H_n` at `θ` (finite differences), useful for
/// diagnostics.
pub fn objective_hessian(gen: &Generator, model: &Model, data: &[f64], theta: &[f64]) -> Result<DMatrix<f64>> {
    objective_iid(gen, model, data, theta)?;
    let obj = CachedObjective::new(gen, model, data);
    let p = theta.len();
    let mut h = DMatrix::zeros(p, p);
    let mut t = theta.to_vec();
    for i in 0..p {
        for j in 0..p {
            let hi = 1e-4 * (1.0 + theta[i].abs());
            let hj = 1e-4 * (1.0 + theta[j].abs());
            let mut eval = |di: f64, dj: f64| {
                t.copy_from_slice(theta);
                t[i] += di;
                t[j] += dj;
                obj.natural(&t)
            };
            h[(i, j)] = (eval(hi, hj) - eval(hi, -hj) - eval(-hi, hj) + eval(-hi, -hj)) / (4.0 * hi * hj);
        }
    }
    Ok(h)
}
