//! Convex generators of the Bregman family and divergences between densities.
//!
//! A generator `B` is strictly convex on `(0, ∞)`; the induced weight
//! `w(t) = B''(t)·t` is what downweights the likelihood score in the
//! estimating equation. Four families are built in:
//!
//! | family | `B(x)` | `w(t)` |
//! |---|---|---|
//! | EWD(β) | `β[z·Ein(z) − (z − 1 + e^{−z})]`, `z = x/β` | `1 − e^{−t/β}` |
//! | DPD(α) | `x^{1+α} / (α(1+α))` | `t^α` |
//! | KL | `x ln x` | `1` |
//! | L2 | `x²` | `2t` |
//!
//! `Ein(z) = γ + E1(z) + ln z` is the entire exponential integral, so the EWD
//! row is the familiar `−x + γx + β − βe^{−x/β} + x·E1(x/β) + x·ln(x/β)` with
//! the cancelling terms regrouped. Generators are only defined up to affine
//! terms; the DPD row is scaled so that its weight is exactly `t^α`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::special::{ein, ein_fast, exp_integral_e1, exp_linear_remainder, exp_remainder2, DoubleDouble, EULER_GAMMA};

/// Below this value of `x/β` the EWD generator is evaluated by its power series.
pub const EWD_SERIES_SWITCH: f64 = 1e-2;

/// Programmatic extension point: any strictly convex `B` with its first three
/// derivatives. The weight and the antiderivative term have generic defaults.
pub trait ConvexGenerator: Send + Sync {
    fn b_value(&self, x: f64) -> f64;
    fn b_prime(&self, x: f64) -> f64;
    fn b_second(&self, x: f64) -> f64;
    fn b_third(&self, x: f64) -> f64;

    fn weight(&self, t: f64) -> f64 {
        self.b_second(t) * t
    }

    fn weight_prime(&self, t: f64) -> f64 {
        self.b_second(t) + self.b_third(t) * t
    }

    /// `x·B'(x) − B(x) = ∫₀ˣ w(s) ds`.
    fn antiderivative_term(&self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            x * self.b_prime(x) - self.b_value(x)
        }
    }

    fn label(&self) -> String {
        "custom".to_string()
    }
}

/// A member of the Bregman family.
#[derive(Clone)]
pub enum Generator {
    Ewd { beta: f64 },
    Dpd { alpha: f64 },
    Kl,
    L2,
    Custom(Arc<dyn ConvexGenerator>),
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Ewd { beta } => write!(f, "Ewd {{ beta: {beta} }}"),
            Generator::Dpd { alpha } => write!(f, "Dpd {{ alpha: {alpha} }}"),
            Generator::Kl => write!(f, "Kl"),
            Generator::L2 => write!(f, "L2"),
            Generator::Custom(g) => write!(f, "Custom({})", g.label()),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl PartialEq for Generator {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Generator::Ewd { beta: a }, Generator::Ewd { beta: b }) => a == b,
            (Generator::Dpd { alpha: a }, Generator::Dpd { alpha: b }) => a == b,
            (Generator::Kl, Generator::Kl) | (Generator::L2, Generator::L2) => true,
            (Generator::Custom(a), Generator::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

fn check_tuning(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite and nonnegative, got {v}")))
    }
}

fn check_positive(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("generator argument must be positive and finite, got {x}")))
    }
}

impl Generator {
    pub fn ewd(beta: f64) -> Result<Generator> {
        check_tuning("beta", beta)?;
        Ok(Generator::Ewd { beta })
    }

    pub fn dpd(alpha: f64) -> Result<Generator> {
        check_tuning("alpha", alpha)?;
        Ok(Generator::Dpd { alpha })
    }

    /// Replaces the zero-tuning limits EWD(0) and DPD(0) by the KL tag.
    pub fn normalized(&self) -> Generator {
        match self {
            Generator::Ewd { beta } if *beta == 0.0 => Generator::Kl,
            Generator::Dpd { alpha } if *alpha == 0.0 => Generator::Kl,
            g => g.clone(),
        }
    }

    /// Short label in the `E(β)` / `D(α)` / `KL` / `L2` convention.
    pub fn label(&self) -> String {
        match self {
            Generator::Ewd { beta } => format!("E({beta})"),
            Generator::Dpd { alpha } => format!("D({alpha})"),
            Generator::Kl => "KL".into(),
            Generator::L2 => "L2".into(),
            Generator::Custom(g) => g.label(),
        }
    }

    /// The tuning parameter, if the family has one.
    pub fn tuning(&self) -> Option<f64> {
        match self {
            Generator::Ewd { beta } => Some(*beta),
            Generator::Dpd { alpha } => Some(*alpha),
            _ => None,
        }
    }

    /// `w(t) = B''(t)·t`; `t = 0` yields the limiting value.
    pub fn weight(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("weight needs t >= 0, got {t}")));
        }
        Ok(self.weight_unchecked(t))
    }

    pub fn b_value(&self, x: f64) -> Result<f64> {
        check_positive(x)?;
        if let Generator::Ewd { beta } = self {
            if *beta == 0.0 {
                return Err(Error::Unsupported(
                    "EWD with beta = 0 has no generator; use the KL generator for the limit".into(),
                ));
            }
        }
        Ok(self.b_value_unchecked(x))
    }

    pub fn b_prime(&self, x: f64) -> Result<f64> {
        check_positive(x)?;
        if let Generator::Ewd { beta } = self {
            if *beta == 0.0 {
                return Err(Error::Unsupported("EWD with beta = 0 has no generator".into()));
            }
        }
        Ok(self.b_prime_unchecked(x))
    }

    pub fn b_second(&self, x: f64) -> Result<f64> {
        check_positive(x)?;
        Ok(self.b_second_unchecked(x))
    }

    pub fn b_third(&self, x: f64) -> Result<f64> {
        check_positive(x)?;
        Ok(self.b_third_unchecked(x))
    }

    /// `x·B'(x) − B(x) = ∫₀ˣ w(s) ds` for `x ≥ 0`.
    pub fn antiderivative_term(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("antiderivative term needs x >= 0, got {x}")));
        }
        Ok(self.antiderivative_unchecked(x))
    }

    /// Literal closed form `−x + γx + β − βe^{−x/β} + x·E1(x/β) + x·ln(x/β)`,
    /// without any cancellation safeguards. Only meaningful for EWD.
    pub fn ewd_closed_form(x: f64, beta: f64) -> Result<f64> {
        check_positive(x)?;
        if !(beta > 0.0) {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        let z = x / beta;
        Ok(-x + EULER_GAMMA * x + beta - beta * (-z).exp() + x * exp_integral_e1(z)? + x * z.ln())
    }

    /// Power series `(x²/β)·Σₙ (−z)ⁿ / ((n+2)!(n+1))`, `z = x/β`, summed in
    /// double-double arithmetic until the terms stop contributing (or
    /// `max_terms` is reached).
    pub fn ewd_series(x: f64, beta: f64, max_terms: usize) -> f64 {
        let z = x / beta;
        let mut sum = DoubleDouble::new(0.0);
        // power = (−z)^n / (n+2)!
        let mut power = DoubleDouble::new(0.5);
        for n in 0..max_terms {
            let term = power.div_f64((n + 1) as f64);
            sum = sum.add(term);
            if term.hi.abs() < 1e-34 * sum.hi.abs().max(1e-300) {
                break;
            }
            power = power.mul_f64(-z).div_f64((n + 3) as f64);
        }
        sum.mul_f64(x).mul_f64(z).to_f64()
    }

    // ---- unchecked evaluations used inside hot loops ---------------------

    pub fn weight_unchecked(&self, t: f64) -> f64 {
        match self {
            Generator::Ewd { beta } => {
                if *beta == 0.0 {
                    1.0
                } else {
                    -(-t / beta).exp_m1()
                }
            }
            Generator::Dpd { alpha } => {
                if *alpha == 0.0 {
                    1.0
                } else {
                    t.powf(*alpha)
                }
            }
            Generator::Kl => 1.0,
            Generator::L2 => 2.0 * t,
            Generator::Custom(g) => g.weight(t),
        }
    }

    /// `w'(t) = B''(t) + B'''(t)·t`.
    pub fn weight_prime_unchecked(&self, t: f64) -> f64 {
        match self {
            Generator::Ewd { beta } => {
                if *beta == 0.0 {
                    0.0
                } else {
                    (-t / beta).exp() / beta
                }
            }
            Generator::Dpd { alpha } => {
                if *alpha == 0.0 {
                    0.0
                } else {
                    alpha * t.powf(alpha - 1.0)
                }
            }
            Generator::Kl => 0.0,
            Generator::L2 => 2.0,
            Generator::Custom(g) => g.weight_prime(t),
        }
    }

    pub fn b_value_unchecked(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        match self.normalized() {
            Generator::Ewd { beta } => {
                let z = x / beta;
                if z < EWD_SERIES_SWITCH {
                    Generator::ewd_series(x, beta, 40)
                } else {
                    beta * (z * ein(z) - exp_remainder2(z))
                }
            }
            Generator::Dpd { alpha } => x.powf(1.0 + alpha) / (alpha * (1.0 + alpha)),
            Generator::Kl => x * x.ln(),
            Generator::L2 => x * x,
            Generator::Custom(g) => g.b_value(x),
        }
    }

    pub fn b_prime_unchecked(&self, x: f64) -> f64 {
        match self.normalized_ref() {
            NormRef::Ewd(beta) => ein_fast(x / beta),
            NormRef::Dpd(alpha) => x.powf(alpha) / alpha,
            NormRef::Kl => x.ln() + 1.0,
            NormRef::L2 => 2.0 * x,
            NormRef::Custom(g) => g.b_prime(x),
        }
    }

    /// `B'(x)` given `ln x`; avoids underflow and cancellation when the
    /// density argument is far from `β` (EWD) or enters through its
    /// logarithm anyway (KL).
    pub fn b_prime_from_log(&self, log_x: f64) -> f64 {
        match self.normalized_ref() {
            NormRef::Ewd(beta) => {
                let log_z = log_x - beta.ln();
                if log_z > 3.7 {
                    // z > 40: E1(z) < 1e-19 is below the precision of γ + ln z
                    EULER_GAMMA + log_z
                } else {
                    ein_fast(log_z.exp())
                }
            }
            NormRef::Kl => log_x + 1.0,
            _ => self.b_prime_unchecked(log_x.exp()),
        }
    }

    pub fn b_second_unchecked(&self, x: f64) -> f64 {
        match self.normalized_ref() {
            NormRef::Ewd(beta) => -(-x / beta).exp_m1() / x,
            NormRef::Dpd(alpha) => x.powf(alpha - 1.0),
            NormRef::Kl => 1.0 / x,
            NormRef::L2 => 2.0,
            NormRef::Custom(g) => g.b_second(x),
        }
    }

    pub fn b_third_unchecked(&self, x: f64) -> f64 {
        match self.normalized_ref() {
            NormRef::Ewd(beta) => exp_linear_remainder(x / beta) / (x * x),
            NormRef::Dpd(alpha) => (alpha - 1.0) * x.powf(alpha - 2.0),
            NormRef::Kl => -1.0 / (x * x),
            NormRef::L2 => 0.0,
            NormRef::Custom(g) => g.b_third(x),
        }
    }

    pub fn antiderivative_unchecked(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        match self.normalized_ref() {
            NormRef::Ewd(beta) => beta * exp_remainder2(x / beta),
            NormRef::Dpd(alpha) => x.powf(1.0 + alpha) / (1.0 + alpha),
            NormRef::Kl => x,
            NormRef::L2 => x * x,
            NormRef::Custom(g) => g.antiderivative_term(x),
        }
    }

    fn normalized_ref(&self) -> NormRef<'_> {
        match self {
            Generator::Ewd { beta } if *beta > 0.0 => NormRef::Ewd(*beta),
            Generator::Dpd { alpha } if *alpha > 0.0 => NormRef::Dpd(*alpha),
            Generator::Ewd { .. } | Generator::Dpd { .. } | Generator::Kl => NormRef::Kl,
            Generator::L2 => NormRef::L2,
            Generator::Custom(g) => NormRef::Custom(g.as_ref()),
        }
    }
}

enum NormRef<'a> {
    Ewd(f64),
    Dpd(f64),
    Kl,
    L2,
    Custom(&'a dyn ConvexGenerator),
}

/// Two densities evaluated on a common set of weighted abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub g: Vec<f64>,
    pub f: Vec<f64>,
}

impl DensityGrid {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>, g: Vec<f64>, f: Vec<f64>) -> Result<DensityGrid> {
        let n = nodes.len();
        if weights.len() != n || g.len() != n || f.len() != n {
            return Err(Error::Dimension("density grid components differ in length".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
            return Err(Error::Domain(format!("grid weights must be positive, found {w}")));
        }
        if let Some(v) = g.iter().chain(&f).find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("densities must be finite and nonnegative, found {v}")));
        }
        Ok(DensityGrid { nodes, weights, g, f })
    }
}

/// Bregman divergence `Σ wᵢ [B(gᵢ) − B(fᵢ) − (gᵢ − fᵢ)B'(fᵢ)]`.
pub fn divergence(gen: &Generator, pair: &DensityGrid) -> Result<f64> {
    let gen = gen.normalized();
    let mut total = 0.0;
    for i in 0..pair.nodes.len() {
        let (g, f) = (pair.g[i], pair.f[i]);
        if f == 0.0 {
            if g > 0.0 {
                return Err(Error::Evaluation(format!(
                    "model density vanishes at x = {} where the other density is positive",
                    pair.nodes[i]
                )));
            }
            continue;
        }
        let term = gen.b_value_unchecked(g) - gen.b_value_unchecked(f) - (g - f) * gen.b_prime_unchecked(f);
        total += pair.weights[i] * term;
    }
    Ok(total)
}
