//! `J`, `K`, `ξ`, sandwich covariances, influence functions and asymptotic
//! relative efficiency.
//!
//! With `w = B''(f)·f`, `u` the score and `I = −∇u`:
//!
//! ```text
//! ξ = ∫ u w(f) dG
//! K = ∫ u uᵀ w(f)² dG − ξ ξᵀ
//! J = ∫ u uᵀ w(f) f dx + ∫ [I − u uᵀ h] (g − f) w(f) dx,   h = w'(f) f / w(f)
//! ```
//!
//! At the model (`G = F_θ`) the second part of `J` vanishes. In the
//! empirical version `w·h = w'(f)·f` is used directly, which stays finite
//! where `w(f) → 0` in the tails.

use nalgebra::{DMatrix, DVector};

use crate::divergence::Generator;
use crate::error::{Error, Result};
use crate::estimation::Estimate;
use crate::models::Model;
use crate::numerics::linalg::inverse;

/// Where the matrices were evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaluationContext {
    /// `G = F_θ`.
    AtModel,
    /// `G` replaced by the empirical distribution of `n` observations.
    Empirical { n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsBundle {
    pub j: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub xi: DVector<f64>,
    /// `J⁻¹ K J⁻¹`, the asymptotic covariance of `√n (θ̂ − θ)`.
    pub covariance: DMatrix<f64>,
    pub context: EvaluationContext,
}

impl AsymptoticsBundle {
    fn assemble(j: DMatrix<f64>, k: DMatrix<f64>, xi: DVector<f64>, context: EvaluationContext) -> Result<Self> {
        let j_inv = inverse(&j)?;
        let cov = &j_inv * &k * &j_inv;
        let covariance = (&cov + cov.transpose()) * 0.5;
        Ok(Self { j, k, xi, covariance, context })
    }

    /// Standard errors `sqrt(diag(J⁻¹KJ⁻¹)/n)`.
    pub fn standard_errors(&self, n: usize) -> Vec<f64> {
        self.covariance.diagonal().iter().map(|v| (v.max(0.0) / n as f64).sqrt()).collect()
    }
}

fn outer_add(m: &mut DMatrix<f64>, u: &[f64], c: f64) {
    let p = u.len();
    for a in 0..p {
        for b in 0..p {
            m[(a, b)] += c * u[a] * u[b];
        }
    }
}

/// Pieces of the at-model integrals that the empirical version reuses.
struct ModelIntegrals {
    xi: DVector<f64>,
    j_first: DMatrix<f64>,
    k_raw: DMatrix<f64>,
    /// `∫ [I w − u uᵀ w' f] f dx`
    correction: DMatrix<f64>,
}

fn model_integrals(gen: &Generator, model: &Model, theta: &[f64]) -> Result<ModelIntegrals> {
    model.check_theta(theta)?;
    let gen = gen.normalized();
    let p = model.dim();
    let grid = model.quadrature_grid(theta);
    let mut xi = DVector::zeros(p);
    let mut j_first = DMatrix::zeros(p, p);
    let mut k_raw = DMatrix::zeros(p, p);
    let mut correction = DMatrix::zeros(p, p);
    let mut u = vec![0.0; p];
    for (&x, &dx) in grid.nodes.iter().zip(&grid.weights) {
        let f = model.density(theta, x);
        if f == 0.0 {
            continue;
        }
        model.score_into(theta, x, &mut u);
        let w = gen.weight_unchecked(f);
        let wp_f = gen.weight_prime_unchecked(f) * f;
        let c = dx * f;
        for a in 0..p {
            xi[a] += c * w * u[a];
        }
        outer_add(&mut j_first, &u, c * w);
        outer_add(&mut k_raw, &u, c * w * w);
        let info = model.observed_information(theta, x);
        correction += info * (c * w);
        outer_add(&mut correction, &u, -c * wp_f);
    }
    Ok(ModelIntegrals { xi, j_first, k_raw, correction })
}

/// `J`, `K`, `ξ` and `J⁻¹KJ⁻¹` with `G = F_θ`.
pub fn model_matrices(gen: &Generator, model: &Model, theta: &[f64]) -> Result<AsymptoticsBundle> {
    let m = model_integrals(gen, model, theta)?;
    let k = &m.k_raw - &m.xi * m.xi.transpose();
    AsymptoticsBundle::assemble(m.j_first, k, m.xi, EvaluationContext::AtModel)
}

/// Sandwich estimate with the empirical distribution of `data` plugged in.
///
/// `K̂ = (n−1)⁻¹ Σ K̂ᵢK̂ᵢᵀ` with `K̂ᵢ = u(Xᵢ) w(f(Xᵢ)) − ξ̂`; `Ĵ` keeps the
/// model-misspecification term, evaluated as a sample average minus its
/// model expectation.
pub fn empirical_matrices(gen: &Generator, model: &Model, theta: &[f64], data: &[f64]) -> Result<AsymptoticsBundle> {
    model.check_data(data)?;
    if data.len() < 2 {
        return Err(Error::Data("empirical covariance needs at least two observations".into()));
    }
    let m = model_integrals(gen, model, theta)?;
    let gen = gen.normalized();
    let p = model.dim();
    let n = data.len();
    let mut k = DMatrix::zeros(p, p);
    let mut sample_part = DMatrix::zeros(p, p);
    let mut u = vec![0.0; p];
    let mut ki = vec![0.0; p];
    for &x in data {
        let f = model.density(theta, x);
        model.score_into(theta, x, &mut u);
        let w = gen.weight_unchecked(f);
        let wp_f = gen.weight_prime_unchecked(f) * f;
        for a in 0..p {
            ki[a] = u[a] * w - m.xi[a];
        }
        outer_add(&mut k, &ki, 1.0);
        sample_part += model.observed_information(theta, x) * w;
        outer_add(&mut sample_part, &u, -wp_f);
    }
    k /= (n - 1) as f64;
    sample_part /= n as f64;
    let j = &m.j_first + sample_part - &m.correction;
    let j = (&j + j.transpose()) * 0.5;
    AsymptoticsBundle::assemble(j, k, m.xi, EvaluationContext::Empirical { n })
}

/// Fills `estimate.asymptotics` with the empirical sandwich.
pub fn attach_empirical(estimate: &mut Estimate, data: &[f64]) -> Result<()> {
    estimate.asymptotics = Some(empirical_matrices(&estimate.generator, &estimate.model, &estimate.theta, data)?);
    Ok(())
}

/// Influence function `J⁻¹ [u(y) w(f(y)) − ξ]` at the model.
pub fn influence(gen: &Generator, model: &Model, theta: &[f64], y: f64) -> Result<Vec<f64>> {
    let bundle = model_matrices(gen, model, theta)?;
    influence_with(&bundle, gen, model, theta, y)
}

/// Influence function reusing precomputed matrices.
pub fn influence_with(bundle: &AsymptoticsBundle, gen: &Generator, model: &Model, theta: &[f64], y: f64) -> Result<Vec<f64>> {
    model.check_observation(y)?;
    let gen = gen.normalized();
    let mut u = vec![0.0; model.dim()];
    model.score_into(theta, y, &mut u);
    let w = gen.weight_unchecked(model.density(theta, y));
    let v = DVector::from_iterator(u.len(), u.iter().zip(bundle.xi.iter()).map(|(a, b)| a * w - b));
    Ok((inverse(&bundle.j)? * v).iter().copied().collect())
}

/// Asymptotic relative efficiency of component `component` against the MLE:
/// `[I⁻¹]_cc / [J⁻¹KJ⁻¹]_cc`.
pub fn are(gen: &Generator, model: &Model, theta: &[f64], component: usize) -> Result<f64> {
    if component >= model.dim() {
        return Err(Error::Dimension(format!("component {component} out of range for {}", model.name())));
    }
    let bundle = model_matrices(gen, model, theta)?;
    let fisher_inv = inverse(&model.fisher_information(theta)?)?;
    Ok(fisher_inv[(component, component)] / bundle.covariance[(component, component)])
}

/// Closed-form DPD(α) efficiency for the normal mean.
pub fn dpd_normal_mean_are(alpha: f64) -> f64 {
    (1.0 + alpha * alpha / (1.0 + 2.0 * alpha)).powf(-1.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{estimate_iid, objective_hessian, psi, Init};
    use crate::numerics::rng::seeded;
    use std::f64::consts::PI;

    const NM: Model = Model::NormalMean { sigma: 1.0 };

    #[test]
    fn tiny_beta_gives_fisher_information() {
        // Reference values from independent adaptive quadrature. K sits
        // 1.24e-3 below the Fisher information at this β; the gap closes
        // linearly as β shrinks.
        let b = model_matrices(&Generator::ewd(1e-4).unwrap(), &NM, &[0.0]).unwrap();
        assert!((b.j[(0, 0)] - 0.999_159_768_5).abs() < 1e-8);
        assert!((b.k[(0, 0)] - 0.998_755_909_9).abs() < 1e-8);
        assert!((b.j[(0, 0)] - 1.0).abs() < 1e-3);
        let c = model_matrices(&Generator::ewd(1e-5).unwrap(), &NM, &[0.0]).unwrap();
        assert!((c.j[(0, 0)] - 1.0).abs() < 1e-3 && (c.k[(0, 0)] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn symmetric_family_has_zero_xi() {
        for g in [Generator::ewd(0.3).unwrap(), Generator::dpd(0.5).unwrap(), Generator::L2] {
            let b = model_matrices(&g, &NM, &[0.7]).unwrap();
            assert!(b.xi[0].abs() < 1e-9);
        }
    }

    // DPD(α) at N(0,1), normal location-scale: with w = f^α all integrals are
    // Gaussian moments. Let c = (2π)^{-α/2}; ∫ uuᵀ f^{1+γ} dx for γ = α, 2α.
    fn dpd_moments(gamma: f64) -> [f64; 3] {
        let c = (2.0 * PI).powf(-gamma / 2.0) / (1.0 + gamma).sqrt();
        let v = 1.0 / (1.0 + gamma); // variance of the tilted normal
        let m2 = v;
        let m4 = 3.0 * v * v;
        // entries: (μ,μ) = E t², (σ,σ) = E (t²−1)², (μ,σ) = 0
        [c * m2, c * (m4 - 2.0 * m2 + 1.0), c * (m2 - 1.0)]
    }

    #[test]
    fn dpd_location_scale_matches_closed_forms() {
        let alpha = 1.0;
        let b = model_matrices(&Generator::dpd(alpha).unwrap(), &Model::NormalLocationScale, &[0.0, 1.0]).unwrap();
        let [jmm, jss, xs] = dpd_moments(alpha);
        assert!((b.j[(0, 0)] - jmm).abs() < 1e-10);
        assert!((b.j[(1, 1)] - jss).abs() < 1e-10);
        assert!(b.j[(0, 1)].abs() < 1e-12);
        assert!((b.xi[1] - xs).abs() < 1e-10);
        let [kmm, kss, _] = dpd_moments(2.0 * alpha);
        assert!((b.k[(0, 0)] - kmm).abs() < 1e-10);
        assert!((b.k[(1, 1)] - (kss - xs * xs)).abs() < 1e-10);
    }

    #[test]
    fn table_of_efficiencies() {
        let ewd = [(0.001, 0.996), (0.004, 0.987), (0.016, 0.954), (0.062, 0.868), (0.25, 0.741), (1.0, 0.676), (4.0, 0.656)];
        for (beta, published) in ewd {
            let a = are(&Generator::ewd(beta).unwrap(), &NM, &[0.0], 0).unwrap();
            assert!((a - published).abs() <= 0.002, "E({beta}) {a}");
        }
        for alpha in [0.001, 0.004, 0.016, 0.062, 0.25, 1.0, 4.0] {
            let a = are(&Generator::dpd(alpha).unwrap(), &NM, &[0.0], 0).unwrap();
            assert!((a - dpd_normal_mean_are(alpha)).abs() < 1e-3, "D({alpha}) {a}");
        }
    }

    #[test]
    fn influence_shapes() {
        let g = Generator::ewd(0.25).unwrap();
        assert!(influence(&g, &NM, &[0.0], 0.0).unwrap()[0].abs() < 1e-12);
        let kl = influence(&Generator::Kl, &NM, &[0.0], 3.7).unwrap();
        assert!((kl[0] - 3.7).abs() < 1e-9);
        let peak = (1..400).map(|i| influence(&g, &NM, &[0.0], i as f64 * 0.01).unwrap()[0].abs()).fold(0.0, f64::max);
        let far = influence(&g, &NM, &[0.0], 10.0).unwrap()[0].abs();
        assert!(far < peak);
        let psi_v = psi(&g, &NM, &[0.0], 1.3).unwrap();
        let b = model_matrices(&g, &NM, &[0.0]).unwrap();
        let ifv = influence(&g, &NM, &[0.0], 1.3).unwrap();
        assert!((ifv[0] - psi_v[0] / b.j[(0, 0)]).abs() < 1e-10);
    }

    #[test]
    fn empirical_j_is_the_objective_hessian() {
        let mut rng = seeded(4);
        let data = Model::NormalLocationScale.simulate(&[1.0, 2.0], 300, &mut rng).unwrap();
        let g = Generator::ewd(0.05).unwrap();
        let theta = [1.1, 1.8];
        let b = empirical_matrices(&g, &Model::NormalLocationScale, &theta, &data).unwrap();
        let h = objective_hessian(&g, &Model::NormalLocationScale, &data, &theta).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((b.j[(i, j)] - h[(i, j)]).abs() < 1e-5 * (1.0 + h[(i, j)].abs()), "{b:?} vs {h}");
            }
        }
    }

    #[test]
    fn empirical_sandwich_near_mle_variance() {
        let mut rng = seeded(9);
        let data = NM.simulate(&[0.0], 5000, &mut rng).unwrap();
        let g = Generator::ewd(1e-4).unwrap();
        let fit = estimate_iid(&g, &NM, &data, &Init::Default).unwrap();
        let b = empirical_matrices(&g, &NM, &fit.theta, &data).unwrap();
        assert!((b.covariance[(0, 0)] - 1.0).abs() < 0.1);
    }
}
