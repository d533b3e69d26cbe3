//! Unconstrained minimization: a Nelder–Mead simplex search polished by
//! BFGS with central finite-difference gradients, plus a bracketing Brent
//! search for one-dimensional problems.
//!
//! Non-finite objective values are treated as `+∞`, which makes both the
//! simplex and the line search retreat from them.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOptions {
    pub grad_tol: f64,
    pub param_tol: f64,
    pub max_simplex_iter: usize,
    pub max_polish_iter: usize,
    pub restarts: usize,
    /// Initial simplex edge relative to `max(|x_i|, 1)`.
    pub simplex_scale: f64,
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            param_tol: 1e-10,
            max_simplex_iter: 500,
            max_polish_iter: 200,
            restarts: 3,
            simplex_scale: 0.1,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerReport {
    pub minimizer: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restarts_used: usize,
}

fn guarded(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

fn fd_step(x: f64) -> f64 {
    1e-6 * (1.0 + x.abs())
}

/// Central-difference gradient with step `1e-6·(1+|θ_i|)`.
pub fn gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i]);
            probe[i] = x[i] + h;
            let up = guarded(f, &probe);
            probe[i] = x[i] - h;
            let down = guarded(f, &probe);
            probe[i] = x[i];
            let g = (up - down) / (2.0 * h);
            if g.is_finite() {
                g
            } else {
                f64::NAN
            }
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn grad_ok(g: f64, value: f64, tol: f64) -> bool {
    g.is_finite() && g <= tol * (1.0 + value.abs())
}

struct SimplexOutcome {
    best: Vec<f64>,
    value: f64,
    iterations: usize,
    diameter: f64,
}

fn nelder_mead(
    f: &impl Fn(&[f64]) -> f64,
    start: &[Vec<f64>],
    max_iter: usize,
    param_tol: f64,
) -> SimplexOutcome {
    let n = start[0].len();
    let mut pts: Vec<Vec<f64>> = start.to_vec();
    let mut vals: Vec<f64> = pts.iter().map(|p| guarded(f, p)).collect();
    let mut iterations = 0;
    let diameter = |pts: &[Vec<f64>]| {
        let mut d: f64 = 0.0;
        for p in &pts[1..] {
            let dist = p.iter().zip(&pts[0]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            d = d.max(dist);
        }
        d
    };
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let scale = 1.0 + norm(&pts[0]);
        let spread = (vals[n] - vals[0]).abs();
        let diam = diameter(&pts);
        if iterations >= max_iter
            || (diam <= param_tol * scale)
            || (vals[0].is_finite() && spread <= 1e-15 * (1.0 + vals[0].abs()) && diam <= 1e-6 * scale)
        {
            return SimplexOutcome {
                best: pts[0].clone(),
                value: vals[0],
                iterations,
                diameter: diam,
            };
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..n)
            .map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (w - c)).collect()
        };
        let xr = along(-1.0);
        let fr = guarded(f, &xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = guarded(f, &xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(-0.5);
            let fc = guarded(f, &xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = guarded(f, &xc);
            (xc, fc)
        };
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=n {
            let shrunk: Vec<f64> = pts[0].iter().zip(&pts[i]).map(|(b, p)| b + 0.5 * (p - b)).collect();
            vals[i] = guarded(f, &shrunk);
            pts[i] = shrunk;
        }
    }
}

fn initial_simplex(x: &[f64], scale: f64) -> Vec<Vec<f64>> {
    let mut pts = vec![x.to_vec()];
    for i in 0..x.len() {
        let mut p = x.to_vec();
        p[i] += scale * x[i].abs().max(1.0);
        pts.push(p);
    }
    pts
}

fn random_simplex(x: &[f64], scale: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![x.to_vec()];
    for _ in 0..x.len() {
        let p: Vec<f64> = x
            .iter()
            .map(|&xi| xi + scale * xi.abs().max(1.0) * rng.random_range(-1.0..1.0))
            .collect();
        pts.push(p);
    }
    pts
}

struct PolishOutcome {
    x: Vec<f64>,
    value: f64,
    grad_norm: f64,
    iterations: usize,
    small_step: bool,
}

fn bfgs(f: &impl Fn(&[f64]) -> f64, x0: &[f64], f0: f64, opts: &OptimizerOptions) -> PolishOutcome {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f0;
    let mut g = gradient(f, &x);
    let mut h_inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut iterations = 0;
    let mut small_step = false;
    while iterations < opts.max_polish_iter {
        let gn = norm(&g);
        if !gn.is_finite() || grad_ok(gn, fx, opts.grad_tol) {
            break;
        }
        iterations += 1;
        let mut dir: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| h_inv[i][j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if !(slope < 0.0) {
            for i in 0..n {
                for j in 0..n {
                    h_inv[i][j] = if i == j { 1.0 } else { 0.0 };
                }
            }
            dir = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
        }
        // backtracking Armijo search
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect();
            let ft = guarded(f, &trial);
            if ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            small_step = true;
            break;
        };
        let step: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let g_new = gradient(f, &x_new);
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = step.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-300 {
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h_inv[i][j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h_inv[i][j] += (1.0 + rho * yhy) * rho * step[i] * step[j]
                        - rho * (hy[i] * step[j] + step[i] * hy[j]);
                }
            }
        }
        let moved = norm(&step);
        x = x_new;
        fx = f_new;
        g = g_new;
        if moved <= opts.param_tol * (1.0 + norm(&x)) {
            small_step = true;
            break;
        }
    }
    PolishOutcome {
        grad_norm: norm(&g),
        x,
        value: fx,
        iterations,
        small_step,
    }
}

/// Minimizes `f` starting from `init`.
///
/// Converged means the finite-difference gradient norm is at most
/// `grad_tol·(1+|f|)`, or the final simplex/step size fell below
/// `param_tol·(1+‖x‖)`.
pub fn minimize(f: impl Fn(&[f64]) -> f64, init: &[f64], opts: &OptimizerOptions) -> Result<OptimizerReport> {
    if init.is_empty() {
        return Err(Error::Dimension("cannot minimize over an empty parameter vector".into()));
    }
    let f0 = f(init);
    if !f0.is_finite() {
        return Err(Error::Optimization(format!("objective is not finite at the initial point ({f0})")));
    }
    let g0 = norm(&gradient(&f, init));
    if grad_ok(g0, f0, opts.grad_tol) {
        return Ok(OptimizerReport {
            minimizer: init.to_vec(),
            value: f0,
            grad_norm: g0,
            iterations: 0,
            converged: true,
            restarts_used: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut simplex = initial_simplex(init, opts.simplex_scale);
    let mut best: Option<OptimizerReport> = None;
    let mut iterations = 0;
    for attempt in 0..=opts.restarts {
        let nm = nelder_mead(&f, &simplex, opts.max_simplex_iter, opts.param_tol);
        iterations += nm.iterations;
        if !nm.value.is_finite() {
            return Err(Error::Optimization("objective non-finite over the whole search simplex".into()));
        }
        let polish = bfgs(&f, &nm.best, nm.value, opts);
        iterations += polish.iterations;
        let scale = 1.0 + norm(&polish.x);
        let converged = grad_ok(polish.grad_norm, polish.value, opts.grad_tol)
            || (polish.small_step && grad_ok(polish.grad_norm, polish.value, 1e3 * opts.grad_tol))
            || (nm.diameter <= opts.param_tol * scale && polish.iterations == 0);
        let report = OptimizerReport {
            minimizer: polish.x.clone(),
            value: polish.value,
            grad_norm: polish.grad_norm,
            iterations,
            converged,
            restarts_used: attempt,
        };
        let better = match &best {
            None => true,
            Some(b) => report.value < b.value || (report.converged && !b.converged && report.value <= b.value + 1e-12),
        };
        if better {
            best = Some(report);
        }
        if converged {
            break;
        }
        let from = best.as_ref().map(|b| b.minimizer.clone()).unwrap_or_else(|| init.to_vec());
        simplex = random_simplex(&from, opts.simplex_scale, &mut rng);
    }
    let mut out = best.expect("at least one attempt");
    out.iterations = iterations;
    Ok(out)
}

/// One-dimensional local minimization: downhill bracketing from `x0` with
/// initial step `step`, then Brent's parabolic/golden-section search.
pub fn minimize_scalar(f: impl Fn(f64) -> f64, x0: f64, step: f64, tol: f64) -> Result<OptimizerReport> {
    let g = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let f0 = g(x0);
    if !f0.is_finite() {
        return Err(Error::Optimization(format!("objective is not finite at the initial point ({f0})")));
    }
    const GOLD: f64 = 1.618_033_988_749_895;
    let mut evaluations = 1;
    // bracket
    let (mut a, mut fa) = (x0, f0);
    let (mut b, mut fb) = (x0 + step, g(x0 + step));
    evaluations += 1;
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + GOLD * (b - a);
    let mut fc = g(c);
    evaluations += 1;
    let mut guard = 0;
    while fb > fc {
        guard += 1;
        if guard > 200 {
            return Err(Error::Optimization("no finite minimum found while bracketing".into()));
        }
        // retreat from infinities by shrinking
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        c = b + GOLD * (b - a);
        fc = g(c);
        evaluations += 1;
    }
    if fb == fa && fb == fc && fa.is_finite() {
        return Ok(OptimizerReport {
            minimizer: vec![x0],
            value: f0,
            grad_norm: 0.0,
            iterations: evaluations,
            converged: true,
            restarts_used: 0,
        });
    }
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };
    // Brent
    const CGOLD: f64 = 0.381_966_011_250_105;
    let (mut x, mut w, mut v) = (b, b, b);
    let (mut fx, mut fw, mut fv) = (fb, fb, fb);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut converged = false;
    for _ in 0..200 {
        let xm = 0.5 * (lo + hi);
        let tol1 = tol * x.abs() + 1e-14;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (hi - lo) {
            converged = true;
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (lo - x) && p < q * (hi - x) {
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { lo - x } else { hi - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = g(u);
        evaluations += 1;
        if fu <= fx {
            if u >= x {
                lo = x;
            } else {
                hi = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    let h = fd_step(x);
    let grad = (g(x + h) - g(x - h)) / (2.0 * h);
    Ok(OptimizerReport {
        minimizer: vec![x],
        value: fx,
        grad_norm: grad.abs(),
        iterations: evaluations,
        converged,
        restarts_used: 0,
    })
}
