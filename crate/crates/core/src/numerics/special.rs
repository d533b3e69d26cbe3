use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_61;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_677_94;

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(t: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * t * t).exp()
}

/// Exponential integral `E1(z) = Γ(0, z) = ∫_z^∞ e^{-y}/y dy` for `z > 0`.
///
/// Power series below 1, modified Lentz continued fraction above.
pub fn exp_integral_e1(z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("E1 requires z > 0, got {z}")));
    }
    if z < 1.0 {
        Ok(-EULER_GAMMA - z.ln() + ein_series(z))
    } else {
        Ok(e1_continued_fraction(z))
    }
}

fn e1_continued_fraction(z: f64) -> f64 {
    if z > 740.0 {
        return 0.0;
    }
    const TINY: f64 = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}

/// `Σ_{k≥1} (-1)^{k+1} z^k / (k·k!)`.
fn ein_series(z: f64) -> f64 {
    let mut term = 1.0; // z^k / k!
    let mut sum = 0.0;
    for k in 1..200 {
        term *= z / k as f64;
        let contrib = term / k as f64;
        if k % 2 == 1 {
            sum += contrib;
        } else {
            sum -= contrib;
        }
        if contrib < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Entire exponential integral `Ein(z) = ∫_0^z (1 - e^{-t})/t dt = γ + ln z + E1(z)`.
///
/// Finite at zero (`Ein(0) = 0`) and free of the cancellation the
/// `γ + ln z + E1(z)` form suffers for small `z`.
pub fn ein(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z < 1.5 {
        ein_series(z)
    } else {
        EULER_GAMMA + z.ln() + e1_continued_fraction(z)
    }
}

const EIN_TABLE_START: f64 = 0.25;
const EIN_TABLE_END: f64 = 40.25;
const EIN_SEGMENT_WIDTH: f64 = 0.5;
const EIN_SEGMENTS: usize = 80;
const EIN_NODES: usize = 14;

/// Piecewise Chebyshev coefficients of `Ein` on `[0.25, 40.25)`, fitted once
/// from [`ein`] itself.
fn ein_table() -> &'static [[f64; EIN_NODES]] {
    static TABLE: std::sync::OnceLock<Vec<[f64; EIN_NODES]>> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        let nodes: Vec<f64> = (0..EIN_NODES)
            .map(|k| (std::f64::consts::PI * (k as f64 + 0.5) / EIN_NODES as f64).cos())
            .collect();
        (0..EIN_SEGMENTS)
            .map(|s| {
                let lo = EIN_TABLE_START + s as f64 * EIN_SEGMENT_WIDTH;
                let values: Vec<f64> = nodes.iter().map(|t| ein(lo + 0.5 * EIN_SEGMENT_WIDTH * (t + 1.0))).collect();
                let mut coef = [0.0; EIN_NODES];
                for (j, c) in coef.iter_mut().enumerate() {
                    let sum: f64 = (0..EIN_NODES)
                        .map(|k| {
                            values[k] * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / EIN_NODES as f64).cos()
                        })
                        .sum();
                    *c = 2.0 * sum / EIN_NODES as f64;
                }
                coef[0] *= 0.5;
                coef
            })
            .collect()
    })
}

/// [`ein`] through a precomputed piecewise Chebyshev table; agrees with it
/// to a few ulps and is several times faster in the range where the
/// continued fraction would otherwise run.
#[inline]
pub fn ein_fast(z: f64) -> f64 {
    if !(z >= EIN_TABLE_START) {
        return if z > 0.0 { ein_series(z) } else { 0.0 };
    }
    if z >= EIN_TABLE_END {
        return if z > 740.0 { EULER_GAMMA + z.ln() } else { EULER_GAMMA + z.ln() + e1_continued_fraction(z) };
    }
    let pos = (z - EIN_TABLE_START) / EIN_SEGMENT_WIDTH;
    let seg = (pos as usize).min(EIN_SEGMENTS - 1);
    let t = 2.0 * (pos - seg as f64) - 1.0;
    let c = &ein_table()[seg];
    // Clenshaw recurrence
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * t * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    t * b1 - b2 + c[0]
}

/// `e^{-z} - 1 + z`, accurate for small `z`.
pub fn exp_remainder2(z: f64) -> f64 {
    if z.abs() < 0.1 {
        // Σ_{k=2}^{15} (-z)^k / k!, Horner form; the next term is below 1e-17 relative.
        const INV: [f64; 16] = [
            0.0, 1.0, 0.5, 1.0 / 3.0, 0.25, 0.2, 1.0 / 6.0, 1.0 / 7.0, 0.125, 1.0 / 9.0, 0.1,
            1.0 / 11.0, 1.0 / 12.0, 1.0 / 13.0, 1.0 / 14.0, 1.0 / 15.0,
        ];
        let terms = if z.abs() < 1e-5 { 6 } else { 15 };
        let mut poly = 1.0;
        for k in (3..=terms).rev() {
            poly = 1.0 - z * poly * INV[k];
        }
        0.5 * z * z * poly
    } else {
        (-z).exp_m1() + z
    }
}

/// `e^{-z}(1 + z) - 1`, accurate for small `z`.
pub fn exp_linear_remainder(z: f64) -> f64 {
    if z.abs() < 0.1 {
        // Σ_{k≥2} (-1)^k (1 - k) z^k / k!
        let mut power = 1.0; // z^k / k!
        let mut sum = 0.0;
        for k in 1..30 {
            power *= z / k as f64;
            if k >= 2 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let term = sign * (1.0 - k as f64) * power;
                sum += term;
                if term.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
        }
        sum
    } else {
        (-z).exp() * (1.0 + z) - 1.0
    }
}

/// Upper tail of the chi-square distribution with one degree of freedom.
pub fn chi2_1_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::erf::erfc((0.5 * x).sqrt())
}

/// Double-double accumulator used where long alternating series cancel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        (s, err)
    }

    fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        (s, b - (s - a))
    }

    pub fn add(self, other: Self) -> Self {
        let (s, e) = Self::two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = Self::quick_two_sum(s, e);
        Self { hi, lo }
    }

    pub fn mul_f64(self, b: f64) -> Self {
        let p = self.hi * b;
        let e = self.hi.mul_add(b, -p);
        let e = e + self.lo * b;
        let (hi, lo) = Self::quick_two_sum(p, e);
        Self { hi, lo }
    }

    pub fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let r = self.add(Self::new(q1).mul_f64(-b));
        let q2 = r.hi / b;
        let (hi, lo) = Self::quick_two_sum(q1, q2);
        Self { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}
