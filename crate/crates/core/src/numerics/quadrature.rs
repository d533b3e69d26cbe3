//! Quadrature: fixed composite Gauss–Legendre grids for hot loops and an
//! adaptive Gauss–Kronrod (7/15) rule with infinite-range transforms for
//! everything else.

use crate::error::{Error, Result};

/// Where an integral lives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegrationDomain {
    /// `(-∞, ∞)`, mapped through `x = t / (1 - t²)`.
    RealLine,
    /// `[lower, ∞)`, mapped through `x = lower + t / (1 - t)`.
    HalfLine { lower: f64 },
    /// `[lower, upper]` with `lower < upper`.
    Finite { lower: f64, upper: f64 },
    /// Nonnegative integers; summation stops once the summed terms have
    /// settled below `tail_mass`.
    Discrete { tail_mass: f64 },
}

impl IntegrationDomain {
    pub fn validate(&self) -> Result<()> {
        match *self {
            IntegrationDomain::Finite { lower, upper } if !(lower < upper) => Err(Error::Domain(
                format!("finite interval needs lower < upper, got [{lower}, {upper}]"),
            )),
            IntegrationDomain::Discrete { tail_mass } if !(tail_mass > 0.0 && tail_mass <= 1e-8) => {
                Err(Error::Domain(format!("tail mass bound must lie in (0, 1e-8], got {tail_mass}")))
            }
            _ => Ok(()),
        }
    }
}

/// A set of quadrature nodes with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Grid {
    /// `order`-point Gauss–Legendre rule on `[-1, 1]` (Newton on Legendre roots).
    pub fn gauss_legendre(order: usize) -> Grid {
        let n = order.max(1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                // p1 = P_n(x), p0 = P_{n-1}(x)
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Grid { nodes, weights }
    }

    /// Composite rule: `panels` equal panels on `[a, b]`, each with an
    /// `order`-point Gauss–Legendre rule.
    pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Grid {
        let base = Grid::gauss_legendre(order);
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * base.nodes.len());
        let mut weights = Vec::with_capacity(panels * base.nodes.len());
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in base.nodes.iter().zip(&base.weights) {
                nodes.push(mid + 0.5 * h * x);
                weights.push(0.5 * h * w);
            }
        }
        Grid { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn kronrod15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let kron = kron * h;
    let gauss = gauss * h;
    (kron, (kron - gauss).abs())
}

const MAX_SUBDIVISIONS: usize = 2000;

fn adaptive(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let mut intervals: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = kronrod15(f, a, b);
    intervals.push((a, b, v, e));
    let mut total = v;
    let mut err = e;
    let mut subdivisions = 0;
    loop {
        if !total.is_finite() {
            return Err(Error::Evaluation("integrand produced a non-finite value".into()));
        }
        if err <= tol.max(tol * total.abs()) {
            return Ok(total);
        }
        if subdivisions >= MAX_SUBDIVISIONS {
            return Err(Error::Integration {
                estimate: total,
                error_estimate: err,
                subdivisions,
            });
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty interval list");
        let (lo, hi, v, e) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = kronrod15(f, lo, mid);
        let (v2, e2) = kronrod15(f, mid, hi);
        total += v1 + v2 - v;
        err += e1 + e2 - e;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
        subdivisions += 1;
        if subdivisions % 64 == 0 {
            // refresh the running sums to keep rounding drift out
            total = intervals.iter().map(|t| t.2).sum();
            err = intervals.iter().map(|t| t.3).sum();
        }
    }
}

/// Integrates `f` over `domain` to absolute-or-relative tolerance `tol`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, domain: &IntegrationDomain, tol: f64) -> Result<f64> {
    domain.validate()?;
    match *domain {
        IntegrationDomain::Finite { lower, upper } => adaptive(&mut f, lower, upper, tol),
        IntegrationDomain::RealLine => {
            let mut g = |t: f64| {
                let d = 1.0 - t * t;
                if d <= 0.0 {
                    return 0.0;
                }
                let fx = f(t / d);
                if fx == 0.0 {
                    0.0
                } else {
                    fx * (1.0 + t * t) / (d * d)
                }
            };
            adaptive(&mut g, -1.0, 1.0, tol)
        }
        IntegrationDomain::HalfLine { lower } => {
            let mut g = |t: f64| {
                let d = 1.0 - t;
                if d <= 0.0 {
                    return 0.0;
                }
                let fx = f(lower + t / d);
                if fx == 0.0 {
                    0.0
                } else {
                    fx / (d * d)
                }
            };
            adaptive(&mut g, 0.0, 1.0, tol)
        }
        IntegrationDomain::Discrete { tail_mass } => {
            let mut sum = 0.0;
            let mut abs_sum = 0.0;
            let mut quiet = 0;
            for k in 0..50_000_000u64 {
                let v = f(k as f64);
                if !v.is_finite() {
                    return Err(Error::Evaluation(format!("summand non-finite at k={k}")));
                }
                sum += v;
                abs_sum += v.abs();
                if v.abs() <= tail_mass * 1e-6 * abs_sum.max(1e-300) || v == 0.0 && abs_sum > 0.0 {
                    quiet += 1;
                    if quiet >= 16 {
                        return Ok(sum);
                    }
                } else {
                    quiet = 0;
                }
            }
            Err(Error::Integration {
                estimate: sum,
                error_estimate: f64::NAN,
                subdivisions: 0,
            })
        }
    }
}

/// Sums `term(k)` over `k = 0, 1, …` until the cumulative model mass
/// `Σ pmf(k)` reaches `1 - tail_mass` and the current term is below `1e-14`.
/// Returns the sum together with the last index included.
pub fn sum_discrete(
    mut pmf: impl FnMut(u64) -> f64,
    mut term: impl FnMut(u64) -> f64,
    tail_mass: f64,
) -> Result<(f64, u64)> {
    let mut mass = 0.0;
    let mut sum = 0.0;
    for k in 0..100_000_000u64 {
        mass += pmf(k);
        let t = term(k);
        if !t.is_finite() {
            return Err(Error::Evaluation(format!("summand non-finite at k={k}")));
        }
        sum += t;
        if mass >= 1.0 - tail_mass && t.abs() < 1e-14 {
            return Ok((sum, k));
        }
    }
    Err(Error::Integration {
        estimate: sum,
        error_estimate: 1.0 - mass,
        subdivisions: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::std_normal_pdf;

    #[test]
    fn gauss_legendre_is_exact_for_its_degree() {
        for order in 1..=10 {
            let g = Grid::gauss_legendre(order);
            assert!((g.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for deg in 0..(2 * order) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let v = g.integrate(|x| x.powi(deg as i32));
                assert!((v - exact).abs() < 1e-13, "order {order} degree {deg}");
            }
        }
    }

    #[test]
    fn composite_rule_on_shifted_interval() {
        let g = Grid::composite(1.0, 3.0, 4, 5);
        let v = g.integrate(|x| x.powi(9));
        let exact = (3f64.powi(10) - 1.0) / 10.0;
        assert!((v / exact - 1.0).abs() < 1e-14);
    }

    #[test]
    fn normal_moments_over_the_real_line() {
        let one = integrate(std_normal_pdf, &IntegrationDomain::RealLine, 1e-12).unwrap();
        assert!((one - 1.0).abs() < 1e-10);
        let var = integrate(|x| x * x * std_normal_pdf(x), &IntegrationDomain::RealLine, 1e-12).unwrap();
        assert!((var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn half_line_and_finite_intervals() {
        let v = integrate(|x| (-x).exp(), &IntegrationDomain::HalfLine { lower: 0.0 }, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        let w = integrate(
            |x| x.sin(),
            &IntegrationDomain::Finite { lower: 0.0, upper: std::f64::consts::PI },
            1e-12,
        )
        .unwrap();
        assert!((w - 2.0).abs() < 1e-11);
        assert!(integrate(|x| x, &IntegrationDomain::Finite { lower: 1.0, upper: 1.0 }, 1e-8).is_err());
    }

    #[test]
    fn poisson_mass_sums_to_one() {
        let lambda: f64 = 0.4;
        let pmf = |k: u64| {
            (k as f64 * lambda.ln() - lambda - statrs::function::factorial::ln_factorial(k)).exp()
        };
        let (s, last) = sum_discrete(pmf, pmf, 1e-12).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(last < 30);
        let v = integrate(
            |k| (k * lambda.ln() - lambda - statrs::function::factorial::ln_factorial(k as u64)).exp(),
            &IntegrationDomain::Discrete { tail_mass: 1e-12 },
            1e-12,
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonconvergence_reports_best_estimate() {
        let r = integrate(
            |x| (1.0 / x).sin() / x,
            &IntegrationDomain::Finite { lower: 1e-6, upper: 1.0 },
            1e-15,
        );
        match r {
            Err(Error::Integration { subdivisions, .. }) => assert_eq!(subdivisions, MAX_SUBDIVISIONS),
            other => panic!("expected integration failure, got {other:?}"),
        }
    }
}
