//! Parametric families: densities, scores, information, simulators and
//! closed-form maximum likelihood estimates.
//!
//! Parameters are always reported on their natural scale. Internally the
//! optimizers work on an unconstrained scale where `σ` and `λ` are
//! log-transformed ([`Model::to_internal`] / [`Model::from_internal`]).

use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson as PoissonDist};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numerics::quadrature::{Grid, IntegrationDomain};
use crate::numerics::special::std_normal_pdf;

/// Half-width (in standard deviations) of the normal quadrature grid.
pub const NORMAL_GRID_HALF_WIDTH: f64 = 12.0;
/// Upper end (in means) of the exponential quadrature grid.
pub const EXPONENTIAL_GRID_END: f64 = 60.0;
/// Mass left out of the truncated Poisson support.
pub const DISCRETE_TAIL_MASS: f64 = 1e-12;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Divisor used for a reported classical scale estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleConvention {
    /// Divisor `n`: the maximum likelihood estimate.
    #[default]
    MaximumLikelihood,
    /// Divisor `n − 1` (i.i.d.) or `n − s` (regression): the usual
    /// unbiased-variance standard deviation printed by most software.
    DegreesOfFreedom,
}

/// The parametric families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Model {
    /// `N(μ, σ²)` with known `σ`; parameter `μ`.
    NormalMean { sigma: f64 },
    /// `N(μ, σ²)`; parameters `(μ, σ)`.
    NormalLocationScale,
    /// `N(μ, σ²)` with known `μ`; parameter `σ`.
    NormalScale { mu: f64 },
    /// Exponential with mean `λ`.
    ExponentialMean,
    /// Poisson with mean `λ`.
    Poisson,
}

fn standard_normal_grid() -> &'static Grid {
    static GRID: OnceLock<Grid> = OnceLock::new();
    GRID.get_or_init(|| Grid::composite(-NORMAL_GRID_HALF_WIDTH, NORMAL_GRID_HALF_WIDTH, 96, 8))
}

fn unit_exponential_grid() -> &'static Grid {
    static GRID: OnceLock<Grid> = OnceLock::new();
    GRID.get_or_init(|| {
        // denser near the origin where the integrands vary fastest
        let mut a = Grid::composite(0.0, 8.0, 64, 8);
        let b = Grid::composite(8.0, EXPONENTIAL_GRID_END, 52, 8);
        a.nodes.extend(b.nodes);
        a.weights.extend(b.weights);
        a
    })
}

/// A location-scale family's quadrature grid in standardized units with the
/// standard density precomputed at every node.
pub(crate) struct StandardizedGrid {
    pub weights: Vec<f64>,
    pub densities: Vec<f64>,
}

fn standardized_normal() -> &'static StandardizedGrid {
    static GRID: OnceLock<StandardizedGrid> = OnceLock::new();
    GRID.get_or_init(|| {
        let g = standard_normal_grid();
        StandardizedGrid {
            weights: g.weights.clone(),
            densities: g.nodes.iter().map(|&t| std_normal_pdf(t)).collect(),
        }
    })
}

fn standardized_exponential() -> &'static StandardizedGrid {
    static GRID: OnceLock<StandardizedGrid> = OnceLock::new();
    GRID.get_or_init(|| {
        let g = unit_exponential_grid();
        StandardizedGrid {
            weights: g.weights.clone(),
            densities: g.nodes.iter().map(|&s| (-s).exp()).collect(),
        }
    })
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median absolute deviation about `center`, scaled by 1.4826.
pub(crate) fn mad(values: &[f64], center: f64) -> f64 {
    let dev: Vec<f64> = values.iter().map(|x| (x - center).abs()).collect();
    1.4826 * median(&dev)
}

fn poisson_log_pmf(lambda: f64, k: f64) -> f64 {
    k * lambda.ln() - lambda - ln_gamma(k + 1.0)
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::NormalLocationScale => 2,
            _ => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::NormalMean { .. } => "normal-mean",
            Model::NormalLocationScale => "normal",
            Model::NormalScale { .. } => "normal-scale",
            Model::ExponentialMean => "exponential",
            Model::Poisson => "poisson",
        }
    }

    pub fn parameter_names(&self) -> Vec<&'static str> {
        match self {
            Model::NormalMean { .. } => vec!["mu"],
            Model::NormalLocationScale => vec!["mu", "sigma"],
            Model::NormalScale { .. } => vec!["sigma"],
            Model::ExponentialMean | Model::Poisson => vec!["lambda"],
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Model::Poisson)
    }

    pub fn support(&self) -> IntegrationDomain {
        match self {
            Model::ExponentialMean => IntegrationDomain::HalfLine { lower: 0.0 },
            Model::Poisson => IntegrationDomain::Discrete { tail_mass: DISCRETE_TAIL_MASS },
            _ => IntegrationDomain::RealLine,
        }
    }

    /// Validates the fixed model constants and `θ ∈ Ω`.
    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "{} expects {} parameter(s), got {}",
                self.name(),
                self.dim(),
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite parameter {theta:?}")));
        }
        let bad = match self {
            Model::NormalMean { sigma } => !(*sigma > 0.0),
            Model::NormalLocationScale => !(theta[1] > 0.0),
            Model::NormalScale { mu } => !mu.is_finite() || !(theta[0] > 0.0),
            Model::ExponentialMean | Model::Poisson => !(theta[0] > 0.0),
        };
        if bad {
            return Err(Error::Domain(format!("parameter {theta:?} outside the domain of {}", self.name())));
        }
        Ok(())
    }

    pub fn check_observation(&self, x: f64) -> Result<()> {
        let ok = match self {
            Model::ExponentialMean => x.is_finite() && x >= 0.0,
            Model::Poisson => x.is_finite() && x >= 0.0 && x.fract() == 0.0,
            _ => x.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("observation {x} outside the support of {}", self.name())))
        }
    }

    pub fn check_data(&self, data: &[f64]) -> Result<()> {
        if data.is_empty() {
            return Err(Error::Data("empty sample".into()));
        }
        data.iter().try_for_each(|&x| self.check_observation(x))
    }

    /// `(μ, σ)` of the underlying normal for the normal families.
    fn location_scale(&self, theta: &[f64]) -> (f64, f64) {
        match self {
            Model::NormalMean { sigma } => (theta[0], *sigma),
            Model::NormalLocationScale => (theta[0], theta[1]),
            Model::NormalScale { mu } => (*mu, theta[0]),
            _ => unreachable!("location_scale on a non-normal family"),
        }
    }

    pub fn log_density(&self, theta: &[f64], x: f64) -> f64 {
        match self {
            Model::ExponentialMean => {
                let l = theta[0];
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -x / l - l.ln()
                }
            }
            Model::Poisson => {
                if x < 0.0 || x.fract() != 0.0 {
                    f64::NEG_INFINITY
                } else {
                    poisson_log_pmf(theta[0], x)
                }
            }
            _ => {
                let (m, s) = self.location_scale(theta);
                let t = (x - m) / s;
                -0.5 * t * t - s.ln() - LN_SQRT_2PI
            }
        }
    }

    pub fn density(&self, theta: &[f64], x: f64) -> f64 {
        self.log_density(theta, x).exp()
    }

    /// Writes `u_θ(x) = ∇_θ log f_θ(x)` into `out`.
    pub fn score_into(&self, theta: &[f64], x: f64, out: &mut [f64]) {
        match self {
            Model::NormalMean { sigma } => out[0] = (x - theta[0]) / (sigma * sigma),
            Model::NormalLocationScale => {
                let (m, s) = (theta[0], theta[1]);
                let d = x - m;
                out[0] = d / (s * s);
                out[1] = (d * d - s * s) / (s * s * s);
            }
            Model::NormalScale { mu } => {
                let s = theta[0];
                let d = x - mu;
                out[0] = (d * d - s * s) / (s * s * s);
            }
            Model::ExponentialMean => {
                let l = theta[0];
                out[0] = (x - l) / (l * l);
            }
            Model::Poisson => out[0] = x / theta[0] - 1.0,
        }
    }

    pub fn score(&self, theta: &[f64], x: f64) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        self.check_observation(x)?;
        let mut out = vec![0.0; self.dim()];
        self.score_into(theta, x, &mut out);
        Ok(out)
    }

    /// Observed information `I_θ(x) = −∇_θ u_θ(x)`.
    pub fn observed_information(&self, theta: &[f64], x: f64) -> DMatrix<f64> {
        match self {
            Model::NormalMean { sigma } => DMatrix::from_element(1, 1, 1.0 / (sigma * sigma)),
            Model::NormalLocationScale => {
                let (m, s) = (theta[0], theta[1]);
                let d = x - m;
                let s2 = s * s;
                let off = 2.0 * d / (s2 * s);
                DMatrix::from_row_slice(2, 2, &[1.0 / s2, off, off, 3.0 * d * d / (s2 * s2) - 1.0 / s2])
            }
            Model::NormalScale { mu } => {
                let s2 = theta[0] * theta[0];
                let d = x - mu;
                DMatrix::from_element(1, 1, 3.0 * d * d / (s2 * s2) - 1.0 / s2)
            }
            Model::ExponentialMean => {
                let l = theta[0];
                DMatrix::from_element(1, 1, 2.0 * x / (l * l * l) - 1.0 / (l * l))
            }
            Model::Poisson => DMatrix::from_element(1, 1, x / (theta[0] * theta[0])),
        }
    }

    /// Expected (Fisher) information in closed form.
    pub fn fisher_information(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_theta(theta)?;
        Ok(match self {
            Model::NormalMean { sigma } => DMatrix::from_element(1, 1, 1.0 / (sigma * sigma)),
            Model::NormalLocationScale => {
                let s2 = theta[1] * theta[1];
                DMatrix::from_row_slice(2, 2, &[1.0 / s2, 0.0, 0.0, 2.0 / s2])
            }
            Model::NormalScale { .. } => DMatrix::from_element(1, 1, 2.0 / (theta[0] * theta[0])),
            Model::ExponentialMean => DMatrix::from_element(1, 1, 1.0 / (theta[0] * theta[0])),
            Model::Poisson => DMatrix::from_element(1, 1, 1.0 / theta[0]),
        })
    }

    /// Quadrature nodes and weights (`dx`) adequate for integrals of smooth
    /// functionals of `f_θ` and `u_θ` against Lebesgue or counting measure.
    pub fn quadrature_grid(&self, theta: &[f64]) -> Grid {
        self.covering_grid(&[theta])
    }

    /// A grid covering the bulk of every `f_θ` in `thetas`.
    pub fn covering_grid(&self, thetas: &[&[f64]]) -> Grid {
        match self {
            Model::ExponentialMean => {
                let lam = thetas.iter().map(|t| t[0]).fold(0.0, f64::max);
                let base = unit_exponential_grid();
                Grid {
                    nodes: base.nodes.iter().map(|s| s * lam).collect(),
                    weights: base.weights.iter().map(|w| w * lam).collect(),
                }
            }
            Model::Poisson => {
                let last = thetas.iter().map(|t| poisson_support_end(t[0])).max().unwrap_or(0);
                Grid {
                    nodes: (0..=last).map(|k| k as f64).collect(),
                    weights: vec![1.0; last as usize + 1],
                }
            }
            _ => {
                let base = standard_normal_grid();
                if thetas.len() == 1 {
                    let (m, s) = self.location_scale(thetas[0]);
                    return Grid {
                        nodes: base.nodes.iter().map(|t| m + s * t).collect(),
                        weights: base.weights.iter().map(|w| w * s).collect(),
                    };
                }
                let ls: Vec<(f64, f64)> = thetas.iter().map(|t| self.location_scale(t)).collect();
                let lo = ls.iter().map(|(m, s)| m - NORMAL_GRID_HALF_WIDTH * s).fold(f64::INFINITY, f64::min);
                let hi = ls.iter().map(|(m, s)| m + NORMAL_GRID_HALF_WIDTH * s).fold(f64::NEG_INFINITY, f64::max);
                let smin = ls.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
                let panels = (((hi - lo) / smin) * 4.0).ceil().clamp(96.0, 4000.0) as usize;
                Grid::composite(lo, hi, panels, 8)
            }
        }
    }

    /// For continuous families, `(grid, scale)` such that integrals of a
    /// functional of `f_θ` equal `scale · Σ wₖ F(dₖ / scale)`.
    pub(crate) fn standardized_grid(&self, theta: &[f64]) -> Option<(&'static StandardizedGrid, f64)> {
        match self {
            Model::Poisson => None,
            Model::ExponentialMean => Some((standardized_exponential(), theta[0])),
            _ => Some((standardized_normal(), self.location_scale(theta).1)),
        }
    }

    /// Closed-form maximum likelihood estimate.
    pub fn mle(&self, data: &[f64]) -> Result<Vec<f64>> {
        self.check_data(data)?;
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        match self {
            Model::NormalMean { .. } => Ok(vec![mean]),
            Model::NormalLocationScale => {
                let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                if !(var > 0.0) {
                    return Err(Error::Data("all observations identical: sigma estimate is zero".into()));
                }
                Ok(vec![mean, var.sqrt()])
            }
            Model::NormalScale { mu } => {
                let var = data.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
                if !(var > 0.0) {
                    return Err(Error::Data("all observations equal the known mean".into()));
                }
                Ok(vec![var.sqrt()])
            }
            Model::ExponentialMean | Model::Poisson => {
                if !(mean > 0.0) {
                    return Err(Error::Data("all observations are zero: mean estimate outside the domain".into()));
                }
                Ok(vec![mean])
            }
        }
    }

    /// Closed-form classical estimate with the scale reported under `convention`.
    pub fn mle_with(&self, data: &[f64], convention: ScaleConvention) -> Result<Vec<f64>> {
        let mut theta = self.mle(data)?;
        if convention == ScaleConvention::DegreesOfFreedom {
            let n = data.len() as f64;
            let df = n - self.location_parameters() as f64;
            if !(df > 0.0) {
                return Err(Error::Data("not enough observations for the degrees-of-freedom divisor".into()));
            }
            if let Some(i) = self.scale_index() {
                theta[i] *= (n / df).sqrt();
            }
        }
        Ok(theta)
    }

    /// Index of the scale parameter, when the family has a free one.
    pub fn scale_index(&self) -> Option<usize> {
        match self {
            Model::NormalLocationScale => Some(1),
            Model::NormalScale { .. } => Some(0),
            _ => None,
        }
    }

    fn location_parameters(&self) -> usize {
        match self {
            Model::NormalLocationScale => 1,
            _ => 0,
        }
    }

    /// Robust moment-based starting values.
    pub fn robust_init(&self, data: &[f64]) -> Result<Vec<f64>> {
        self.check_data(data)?;
        let med = median(data);
        let init = match self {
            Model::NormalMean { .. } => vec![med],
            Model::NormalLocationScale => {
                let s = mad(data, med);
                vec![med, if s > 0.0 { s } else { self.mle(data)?[1] }]
            }
            Model::NormalScale { mu } => {
                let s = mad(data, *mu);
                vec![if s > 0.0 { s } else { self.mle(data)?[0] }]
            }
            Model::ExponentialMean => {
                let l = med / LN_2;
                vec![if l > 0.0 { l } else { self.mle(data)?[0] }]
            }
            Model::Poisson => {
                if med > 0.0 {
                    vec![med]
                } else {
                    // median zero: invert the observed zero frequency instead
                    let p0 = data.iter().filter(|&&x| x == 0.0).count() as f64 / data.len() as f64;
                    if p0 < 1.0 {
                        vec![-p0.ln()]
                    } else {
                        return Err(Error::Data("all counts are zero: Poisson mean outside the domain".into()));
                    }
                }
            }
        };
        Ok(init)
    }

    /// Draws `n` observations from `f_θ`.
    pub fn simulate<R: Rng + ?Sized>(&self, theta: &[f64], n: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        Ok(match self {
            Model::ExponentialMean => {
                let d = Exp::new(1.0 / theta[0]).map_err(|e| Error::Domain(e.to_string()))?;
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Model::Poisson => {
                let d = PoissonDist::new(theta[0]).map_err(|e| Error::Domain(e.to_string()))?;
                (0..n).map(|_| d.sample(rng)).collect()
            }
            _ => {
                let (m, s) = self.location_scale(theta);
                let d = Normal::new(m, s).map_err(|e| Error::Domain(e.to_string()))?;
                (0..n).map(|_| d.sample(rng)).collect()
            }
        })
    }

    /// Maps natural parameters to the unconstrained optimization scale.
    pub fn to_internal(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            Model::NormalMean { .. } => vec![theta[0]],
            Model::NormalLocationScale => vec![theta[0], theta[1].ln()],
            _ => vec![theta[0].ln()],
        }
    }

    pub fn from_internal(&self, eta: &[f64]) -> Vec<f64> {
        match self {
            Model::NormalMean { .. } => vec![eta[0]],
            Model::NormalLocationScale => vec![eta[0], eta[1].exp()],
            _ => vec![eta[0].exp()],
        }
    }

    /// Expected cell frequencies `n·f_θ(k)` for `k = 0..=last`.
    pub fn expected_frequencies(&self, theta: &[f64], n: usize, last: u64) -> Result<Vec<f64>> {
        if !self.is_discrete() {
            return Err(Error::Unsupported("expected frequencies need a discrete model".into()));
        }
        self.check_theta(theta)?;
        Ok((0..=last).map(|k| n as f64 * self.density(theta, k as f64)).collect())
    }
}

/// Last Poisson index such that the cumulative mass is at least
/// `1 − DISCRETE_TAIL_MASS` and the pmf there is below `1e-14`.
pub fn poisson_support_end(lambda: f64) -> u64 {
    let mut cdf = 0.0;
    let mut k = 0u64;
    loop {
        let p = poisson_log_pmf(lambda, k as f64).exp();
        cdf += p;
        if (cdf >= 1.0 - DISCRETE_TAIL_MASS && p < 1e-14 && k as f64 >= lambda) || k > 10_000_000 {
            return k;
        }
        k += 1;
    }
}

/// `∫ φ(t)² dt = 1/(2√π)`, used by tests and closed-form oracles.
pub fn normal_density_square_integral(sigma: f64) -> f64 {
    1.0 / (2.0 * PI.sqrt() * sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::seeded;

    #[test]
    fn score_examples() {
        assert_eq!(Model::NormalLocationScale.score(&[0.0, 1.0], 0.0).unwrap(), vec![0.0, -1.0]);
        assert_eq!(Model::ExponentialMean.score(&[1.0], 1.0).unwrap(), vec![0.0]);
        assert_eq!(Model::Poisson.score(&[2.0], 2.0).unwrap(), vec![0.0]);
        assert!(Model::NormalLocationScale.score(&[0.0, -1.0], 0.0).is_err());
    }

    #[test]
    fn mle_examples() {
        assert_eq!(Model::ExponentialMean.mle(&[2.5; 7]).unwrap(), vec![2.5]);
        assert!(Model::NormalLocationScale.mle(&[1.0, 1.0]).is_err());
        assert!(Model::Poisson.mle(&[]).is_err());
        let th = Model::NormalLocationScale.mle(&[1.0, 3.0]).unwrap();
        assert_eq!(th, vec![2.0, 1.0]);
    }

    #[test]
    fn densities_integrate_to_one() {
        let cases: Vec<(Model, Vec<f64>)> = vec![
            (Model::NormalMean { sigma: 2.0 }, vec![0.3]),
            (Model::NormalLocationScale, vec![-1.0, 0.4]),
            (Model::NormalScale { mu: 1.0 }, vec![3.0]),
            (Model::ExponentialMean, vec![0.7]),
            (Model::Poisson, vec![0.4]),
            (Model::Poisson, vec![30.0]),
        ];
        for (m, th) in cases {
            let g = m.quadrature_grid(&th);
            let total = g.integrate(|x| m.density(&th, x));
            assert!((total - 1.0).abs() < 1e-9, "{m:?}: {total}");
        }
    }

    #[test]
    fn simulation_moments() {
        let mut rng = seeded(17);
        let x = Model::NormalLocationScale.simulate(&[0.0, 1.0], 100_000, &mut rng).unwrap();
        assert!((x.iter().sum::<f64>() / 1e5).abs() < 0.02);
        let e = Model::ExponentialMean.simulate(&[1.0], 100_000, &mut rng).unwrap();
        let m = e.iter().sum::<f64>() / 1e5;
        assert!(m > 0.985 && m < 1.015, "{m}");
        let p = Model::Poisson.simulate(&[0.4], 1000, &mut rng).unwrap();
        assert!(p.iter().all(|v| *v >= 0.0 && v.fract() == 0.0));
    }

    #[test]
    fn robust_init_values() {
        let d = [0.0, 0.0, 0.0, 1.0, 2.0];
        assert_eq!(Model::Poisson.robust_init(&d).unwrap(), vec![-(0.6f64).ln()]);
        assert_eq!(Model::Poisson.robust_init(&[1.0, 3.0, 5.0]).unwrap(), vec![3.0]);
        let e = Model::ExponentialMean.robust_init(&[1.0, 2.0, 3.0]).unwrap();
        assert!((e[0] - 2.0 / LN_2).abs() < 1e-15);
    }

    #[test]
    fn internal_scale_round_trips() {
        for (m, th) in [
            (Model::NormalLocationScale, vec![0.3, 2.0]),
            (Model::Poisson, vec![0.4]),
            (Model::NormalMean { sigma: 1.0 }, vec![-2.0]),
        ] {
            let back = m.from_internal(&m.to_internal(&th));
            for (a, b) in th.iter().zip(&back) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn poisson_support_end_rule() {
        let k = poisson_support_end(0.4);
        let p = (k as f64 * 0.4f64.ln() - 0.4 - ln_gamma(k as f64 + 1.0)).exp();
        assert!(p < 1e-14);
        assert!(k < 25);
    }
}
