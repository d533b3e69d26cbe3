//! Data-driven choice of the EWD tuning parameter.
//!
//! For each candidate `β` the estimated mean square error is
//!
//! ```text
//! MSE(β) = ‖θ̂_β − θᴾ‖² + n⁻¹ tr(J⁻¹ K J⁻¹)
//! ```
//!
//! with `θᴾ` a fixed robust pilot (the minimum L2 fit, i.e. DPD(1)) and the
//! sandwich evaluated at the model `F_{θ̂_β}`. For regression the sandwich is
//! `Ψₙ⁻¹ Ωₙ Ψₙ⁻¹`. Candidate fits are independent and run in parallel; the
//! result is ordered by `β` regardless of scheduling.

use rayon::prelude::*;

use crate::asymptotics::model_matrices;
use crate::divergence::Generator;
use crate::error::{Error, Result};
use crate::estimation::{estimate_iid, Init};
use crate::models::Model;
use crate::regression::{estimate_regression, psi_omega, RegressionData, RegressionInit};

/// The estimated MSE split into its two parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseParts {
    pub bias_squared: f64,
    /// `n⁻¹ tr(J⁻¹KJ⁻¹)`.
    pub variance: f64,
}

impl MseParts {
    pub fn total(&self) -> f64 {
        self.bias_squared + self.variance
    }
}

/// One grid point of a tuning run.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningPoint {
    pub beta: f64,
    pub theta: Vec<f64>,
    pub mse: MseParts,
}

/// Where the pilot came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Pilot {
    /// Minimum L2 (DPD with `α = 1`) fit to the same data.
    MinimumL2,
    /// A caller-supplied value, e.g. the true parameter in a simulation.
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    /// Successful grid points in increasing `β`.
    pub points: Vec<TuningPoint>,
    /// Grid values whose fit failed, with the reason.
    pub failures: Vec<(f64, String)>,
    pub beta_opt: f64,
    pub theta_opt: Vec<f64>,
    pub mse_opt: f64,
    pub pilot: Vec<f64>,
    pub pilot_source: Pilot,
}

/// 60 log-spaced values on `[1e-3, 4]`, merged with `extra` (sorted, deduplicated).
pub fn default_grid(extra: &[f64]) -> Vec<f64> {
    let (lo, hi) = (1e-3f64.ln(), 4f64.ln());
    let mut grid: Vec<f64> = (0..60).map(|i| (lo + (hi - lo) * i as f64 / 59.0).exp()).collect();
    grid.extend(extra.iter().copied().filter(|b| b.is_finite() && *b > 0.0));
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    grid
}

/// `{step, 2·step, …}` up to `upper` inclusive (within rounding).
pub fn linear_grid(step: f64, upper: f64) -> Vec<f64> {
    let count = (upper / step + 1e-9).floor() as usize;
    (1..=count).map(|i| i as f64 * step).collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Estimated MSE of `θ̂_β` for an i.i.d. fit of `n` observations.
pub fn mse_hat(gen: &Generator, model: &Model, theta: &[f64], pilot: &[f64], n: usize) -> Result<MseParts> {
    if theta.len() != pilot.len() || theta.len() != model.dim() {
        return Err(Error::Dimension(format!(
            "estimate has {} components, pilot {}, model {}",
            theta.len(),
            pilot.len(),
            model.dim()
        )));
    }
    if n == 0 {
        return Err(Error::Data("sample size must be positive".into()));
    }
    let bundle = model_matrices(gen, model, theta)?;
    Ok(MseParts {
        bias_squared: squared_distance(theta, pilot),
        variance: bundle.covariance.trace() / n as f64,
    })
}

/// Estimated MSE of a regression fit `θ̂ = (γ, σ)`.
pub fn mse_hat_regression(gen: &Generator, data: &RegressionData, theta: &[f64], pilot: &[f64]) -> Result<MseParts> {
    if theta.len() != pilot.len() {
        return Err(Error::Dimension(format!("estimate has {} components, pilot {}", theta.len(), pilot.len())));
    }
    let (psi, omega) = psi_omega(gen, data, theta)?;
    let psi_inv = crate::numerics::inverse(&psi)?;
    let cov = &psi_inv * omega * &psi_inv;
    Ok(MseParts {
        bias_squared: squared_distance(theta, pilot),
        variance: cov.trace() / data.n() as f64,
    })
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("tuning grid is empty".into()));
    }
    if grid.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(Error::Config("tuning grid values must be positive and finite".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("tuning grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Grid argmin with ties going to the smaller `β`.
fn assemble(
    grid: &[f64],
    outcomes: Vec<Result<TuningPoint>>,
    pilot: Vec<f64>,
    pilot_source: Pilot,
) -> Result<TuningResult> {
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (beta, outcome) in grid.iter().zip(outcomes) {
        match outcome {
            Ok(p) if p.mse.total().is_finite() => points.push(p),
            Ok(p) => failures.push((*beta, format!("non-finite criterion {}", p.mse.total()))),
            Err(e) => failures.push((*beta, e.to_string())),
        }
    }
    let best = points
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |acc, (i, p)| match acc {
            Some((_, v)) if p.mse.total() >= v => acc,
            _ => Some((i, p.mse.total())),
        })
        .ok_or_else(|| Error::Optimization(format!("every tuning fit failed ({} grid values)", grid.len())))?;
    let chosen = &points[best.0];
    Ok(TuningResult {
        beta_opt: chosen.beta,
        theta_opt: chosen.theta.clone(),
        mse_opt: best.1,
        points,
        failures,
        pilot,
        pilot_source,
    })
}

/// Selects `β` for an i.i.d. EWD fit by minimizing the estimated MSE.
pub fn select_beta(model: &Model, data: &[f64], grid: &[f64], pilot: &Pilot) -> Result<TuningResult> {
    check_grid(grid)?;
    let pilot_theta = match pilot {
        Pilot::MinimumL2 => estimate_iid(&Generator::dpd(1.0)?, model, data, &Init::Default)?.theta,
        Pilot::Given(t) => {
            model.check_theta(t)?;
            t.clone()
        }
    };
    let n = data.len();
    let outcomes: Vec<Result<TuningPoint>> = grid
        .par_iter()
        .map(|&beta| {
            let gen = Generator::ewd(beta)?;
            let fit = estimate_iid(&gen, model, data, &Init::Default)?;
            let mse = mse_hat(&gen, model, &fit.theta, &pilot_theta, n)?;
            Ok(TuningPoint { beta, theta: fit.theta, mse })
        })
        .collect();
    assemble(grid, outcomes, pilot_theta, pilot.clone())
}

/// Selects `β` for an EWD regression fit; `θ = (γ, σ)`.
pub fn select_beta_regression(data: &RegressionData, grid: &[f64], pilot: &Pilot) -> Result<TuningResult> {
    check_grid(grid)?;
    let pilot_theta = match pilot {
        Pilot::MinimumL2 => estimate_regression(&Generator::dpd(1.0)?, data, &RegressionInit::Default)?.theta(),
        Pilot::Given(t) => {
            if t.len() != data.coefficients() + 1 {
                return Err(Error::Dimension("pilot must hold every coefficient plus the error scale".into()));
            }
            t.clone()
        }
    };
    let outcomes: Vec<Result<TuningPoint>> = grid
        .par_iter()
        .map(|&beta| {
            let gen = Generator::ewd(beta)?;
            let fit = estimate_regression(&gen, data, &RegressionInit::Default)?;
            let theta = fit.theta();
            let mse = mse_hat_regression(&gen, data, &theta, &pilot_theta)?;
            Ok(TuningPoint { beta, theta, mse })
        })
        .collect();
    assemble(grid, outcomes, pilot_theta, pilot.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;

    #[test]
    fn zero_bias_leaves_only_the_trace() {
        let model = Model::NormalLocationScale;
        let gen = Generator::ewd(0.3).unwrap();
        let theta = [0.5, 0.2];
        let parts = mse_hat(&gen, &model, &theta, &theta, 20).unwrap();
        assert_eq!(parts.bias_squared, 0.0);
        let cov = model_matrices(&gen, &model, &theta).unwrap().covariance;
        assert!((parts.total() - cov.trace() / 20.0).abs() < 1e-15);
    }

    #[test]
    fn default_grid_is_log_spaced_and_merges_extras() {
        let g = default_grid(&[0.43, 4.0]);
        assert_eq!(g.len(), 61);
        assert!((g[0] - 1e-3).abs() < 1e-15);
        assert!((g[60] - 4.0).abs() < 1e-12);
        assert!(g.contains(&0.43));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn linear_grid_ends_at_upper() {
        let g = linear_grid(0.01, 2.0);
        assert_eq!(g.len(), 200);
        assert!((g[199] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn grid_validation() {
        let data = datasets::shoshoni();
        let m = Model::NormalLocationScale;
        assert!(matches!(select_beta(&m, &data, &[], &Pilot::MinimumL2), Err(Error::Config(_))));
        assert!(matches!(select_beta(&m, &data, &[0.2, 0.1], &Pilot::MinimumL2), Err(Error::Config(_))));
    }

    #[test]
    fn ties_go_to_the_smaller_beta() {
        let grid = [0.1, 0.2, 0.3];
        let point = |beta, v| {
            Ok(TuningPoint { beta, theta: vec![0.0], mse: MseParts { bias_squared: v, variance: 0.0 } })
        };
        let r = assemble(&grid, vec![point(0.1, 2.0), point(0.2, 1.0), point(0.3, 1.0)], vec![0.0], Pilot::MinimumL2)
            .unwrap();
        assert_eq!(r.beta_opt, 0.2);
    }

    #[test]
    fn failed_points_are_recorded() {
        let grid = [0.1, 0.2];
        let ok = Ok(TuningPoint { beta: 0.2, theta: vec![0.0], mse: MseParts { bias_squared: 1.0, variance: 0.0 } });
        let r = assemble(&grid, vec![Err(Error::Optimization("x".into())), ok], vec![0.0], Pilot::MinimumL2).unwrap();
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.beta_opt, 0.2);
        let all_bad = assemble(&grid, vec![Err(Error::Optimization("x".into())), Err(Error::Optimization("y".into()))], vec![0.0], Pilot::MinimumL2);
        assert!(all_bad.is_err());
    }
}
