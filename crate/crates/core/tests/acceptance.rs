//! Acceptance run: every criterion at its stated tolerance, one PASS/FAIL
//! line each (plus indented detail lines), written straight to stdout so the
//! report shows up even when the harness captures output.
//!
//! A few criteria are red for reasons analysed in the project decision log
//! (published numbers that are internally inconsistent, or fixtures that are
//! reconstructions). Those are listed in `KNOWN_RED` with a one-line reason.
//! The test fails if any other criterion fails; the red ones still print FAIL.

use std::io::Write;
use std::time::{Duration, Instant};

use ewd::asymptotics::{are, dpd_normal_mean_are, influence, model_matrices};
use ewd::datasets;
use ewd::divergence::{divergence, DensityGrid};
use ewd::estimation::{classical_deleted, estimate_iid, largest_indices, mle_deleted, psi, xi, Init};
use ewd::models::{Model, ScaleConvention};
use ewd::numerics::{integrate, inverse, seeded, substream, IntegrationDomain};
use ewd::regression::{estimate_regression, ols, RegressionData, RegressionInit};
use ewd::simulation::{pair_calibration, presets, run_table, TableResult, TableSpec};
use ewd::testing::{chi2_pvalue, ewdts_normal_mean, mc_pvalue, null_eigenvalues, restricted_vcov, ConstraintSet, EwdtsOptions};
use ewd::tuning::{linear_grid, select_beta, select_beta_regression, Pilot, TuningResult};
use ewd::Generator;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

const KNOWN_RED: &[(u32, &str)] = &[
    (3, "global argmin of the tuning criterion is beta = 0.04; the published 0.43 is a local minimum 0.18% higher"),
    (5, "published alcohol/telephone-E(1) fits are not stationary points of the objective; homicide fixture is a reconstruction"),
    (6, "second matched pair in each table was evidently run at other tuning values than printed (clean-data FSRE contradicts the ARE)"),
];

fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

#[derive(Default)]
struct Criterion {
    checks: Vec<(bool, String)>,
}

impl Criterion {
    fn check(&mut self, pass: bool, detail: impl Into<String>) {
        self.checks.push((pass, detail.into()));
    }

    fn within(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        let pass = (got - want).abs() <= tol;
        self.check(pass, format!("{label}: got {got:.6}, want {want} ± {tol}"));
    }

    fn within_rel(&mut self, label: &str, got: f64, want: f64, rel: f64) {
        let pass = (got - want).abs() <= rel * want.abs();
        self.check(pass, format!("{label}: got {got:.6e}, want {want:e} ± {:.1}% rel", rel * 100.0));
    }

    fn timed(&mut self, label: &str, elapsed: Duration, limit: Duration) {
        self.check(elapsed <= limit, format!("{label} runtime {elapsed:.2?} (limit {limit:?})"));
    }

    fn info(&mut self, detail: impl Into<String>) {
        self.checks.push((true, format!("(info) {}", detail.into())));
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|(p, _)| *p)
    }
}

fn report(id: u32, title: &str, c: &Criterion) -> bool {
    let pass = c.passed();
    let status = if pass { "PASS" } else { "FAIL" };
    emit(&format!("criterion {id}: {status} — {title}"));
    for (p, d) in &c.checks {
        emit(&format!("    [{}] {d}", if *p { "ok" } else { "x " }));
    }
    pass
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
}

// ---------------------------------------------------------------- 1

fn series_identity() -> Criterion {
    let mut c = Criterion::default();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for beta in [0.01, 1.0, 10.0] {
        for z in log_spaced(1e-4, 20.0, 200) {
            let x = z * beta;
            let series = Generator::ewd_series(x, beta, 200);
            let closed = Generator::ewd_closed_form(x, beta).unwrap();
            worst = worst.max((series - closed).abs());
        }
    }
    c.check(worst < 1e-10, format!("max |series − closed form| = {worst:.3e} over 3×200 points (< 1e-10)"));
    c.timed("identity sweep", start.elapsed(), Duration::from_secs(1));
    c
}

// ---------------------------------------------------------------- 2

fn are_table() -> Criterion {
    let mut c = Criterion::default();
    let start = Instant::now();
    let model = Model::NormalMean { sigma: 1.0 };
    let published = [
        (0.001, 1.000, 0.996),
        (0.004, 1.000, 0.987),
        (0.016, 1.000, 0.955),
        (0.062, 0.995, 0.867),
        (0.25, 0.941, 0.741),
        (1.0, 0.650, 0.676),
        (4.0, 0.216, 0.656),
    ];
    for (k, dpd, ewd) in published {
        let d = are(&Generator::dpd(k).unwrap(), &model, &[0.0], 0).unwrap();
        let e = are(&Generator::ewd(k).unwrap(), &model, &[0.0], 0).unwrap();
        c.within(&format!("ARE DPD({k})"), d, dpd, 0.002);
        c.within(&format!("ARE EWD({k})"), e, ewd, 0.002);
        c.within(&format!("ARE DPD({k}) vs closed form"), d, dpd_normal_mean_are(k), 1e-3);
    }
    c.timed("ARE grid", start.elapsed(), Duration::from_secs(10));
    c
}

// ---------------------------------------------------------------- 3

fn shoshoni() -> Criterion {
    let mut c = Criterion::default();
    let start = Instant::now();
    let data = datasets::shoshoni();
    let model = Model::NormalLocationScale;
    let ml = model.mle_with(&data, ScaleConvention::DegreesOfFreedom).unwrap();
    c.within("ML mu (3 dp)", ml[0], 0.660, 0.0005);
    c.within("ML sigma (3 dp)", ml[1], 0.093, 0.0005);
    let deleted = classical_deleted(&model, &data, &largest_indices(&data, 3), ScaleConvention::DegreesOfFreedom).unwrap();
    c.within("ML+D mu (3 dp)", deleted[0], 0.628, 0.0005);
    c.within("ML+D sigma (3 dp)", deleted[1], 0.043, 0.0005);

    let step = 0.01;
    let tuned = select_beta(&model, &data, &linear_grid(step, 2.0), &Pilot::MinimumL2).unwrap();
    let n = data.len() as f64;
    c.within("beta_opt", tuned.beta_opt, 0.43, step);
    c.within("mu at beta_opt", tuned.theta_opt[0], 0.63, 0.005);
    c.within("sigma at beta_opt", tuned.theta_opt[1], 0.05, 0.005);
    c.within_rel("n * MSE-hat at beta_opt", n * tuned.mse_opt, 5.07e-3, 0.05);
    if let Some((b, v, theta)) = interior_local_minimum(&tuned) {
        c.info(format!(
            "interior local minimum of the criterion: beta = {b}, n*MSE = {:.4e}, (mu, sigma) = ({:.4}, {:.4})",
            n * v,
            theta[0],
            theta[1]
        ));
    }
    c.timed("Shoshoni fits and tuning", start.elapsed(), Duration::from_secs(30));
    c
}

/// Lowest local minimum of the criterion curve other than the global one.
fn interior_local_minimum(r: &TuningResult) -> Option<(f64, f64, Vec<f64>)> {
    let p = &r.points;
    (1..p.len().saturating_sub(1))
        .filter(|&i| p[i].mse.total() < p[i - 1].mse.total() && p[i].mse.total() <= p[i + 1].mse.total())
        .filter(|&i| p[i].beta != r.beta_opt)
        .map(|i| (p[i].beta, p[i].mse.total(), p[i].theta.clone()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

// ---------------------------------------------------------------- 4

fn frequency_row(lambda: f64, n: usize) -> Vec<f64> {
    let mut e = Model::Poisson.expected_frequencies(&[lambda], n, 4).unwrap();
    let tail = n as f64 - e.iter().sum::<f64>();
    e.push(tail);
    e
}

fn drosophila() -> Criterion {
    let mut c = Criterion::default();
    let data = datasets::drosophila();
    let n = data.len();
    let model = Model::Poisson;
    let mle = model.mle(&data).unwrap()[0];
    c.within("MLE lambda", mle, 3.059, 0.001);

    let rows: [(&str, Generator, f64, [f64; 6]); 8] = [
        ("MLE", Generator::Kl, 3.059, [1.596, 4.882, 7.467, 7.613, 5.822, 6.620]),
        ("D(0.10)", Generator::dpd(0.10).unwrap(), 0.392, [22.981, 9.002, 1.763, 0.230, 0.023, 0.002]),
        ("D(0.50)", Generator::dpd(0.50).unwrap(), 0.375, [23.375, 8.759, 1.641, 0.205, 0.019, 0.002]),
        ("D(0.75)", Generator::dpd(0.75).unwrap(), 0.367, [23.549, 8.649, 1.588, 0.194, 0.018, 0.001]),
        ("E(0.001)", Generator::ewd(0.001).unwrap(), 0.396, [22.894, 9.055, 1.791, 0.236, 0.023, 0.002]),
        ("E(0.02)", Generator::ewd(0.02).unwrap(), 0.408, [22.614, 9.222, 1.880, 0.256, 0.026, 0.002]),
        ("E(0.25)", Generator::ewd(0.25).unwrap(), 0.360, [23.712, 8.545, 1.540, 0.185, 0.017, 0.001]),
        ("L2", Generator::L2, 0.365, [23.609, 8.611, 1.570, 0.191, 0.017, 0.001]),
    ];
    for (label, gen, lambda, freq) in rows {
        let start = Instant::now();
        let fit = estimate_iid(&gen, &model, &data, &Init::Default).unwrap().theta[0];
        if label != "MLE" {
            c.within(&format!("{label} lambda"), fit, lambda, 0.005);
        }
        let fitted = frequency_row(fit, n);
        let worst = fitted.iter().zip(freq).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        c.check(worst <= 0.05, format!("{label} fitted frequencies: max cell deviation {worst:.4} (≤ 0.05)"));
        c.timed(&format!("{label} fit"), start.elapsed(), Duration::from_secs(5));
    }
    let deleted = mle_deleted(&model, &data, &largest_indices(&data, 1)).unwrap().theta[0];
    let fitted = frequency_row(deleted, n);
    let worst = fitted.iter().zip([22.93, 9.03, 1.78, 0.23, 0.02, 0.0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    c.check(worst <= 0.05, format!("MLE+D fitted frequencies: max cell deviation {worst:.4} (≤ 0.05)"));

    let tuned = select_beta(&model, &data, &linear_grid(0.01, 2.0), &Pilot::MinimumL2).unwrap();
    c.within("beta_opt", tuned.beta_opt, 0.08, 1e-9);
    c.within("lambda at beta_opt", tuned.theta_opt[0], 0.377, 0.005);
    c
}

// ---------------------------------------------------------------- 5

fn fit_regression(gen: &Generator, data: &RegressionData, c: &mut Criterion, label: &str) -> (Vec<f64>, f64) {
    let start = Instant::now();
    let fit = estimate_regression(gen, data, &RegressionInit::Default).unwrap();
    c.timed(label, start.elapsed(), Duration::from_secs(5));
    (fit.gamma, fit.sigma)
}

fn regression() -> Criterion {
    let mut c = Criterion::default();

    let homicide = datasets::homicide();
    let (g, s) = ols(&homicide, ScaleConvention::DegreesOfFreedom).unwrap();
    c.within_rel("homicide ML intercept", g[0], -0.293, 0.005);
    c.within_rel("homicide ML slope", g[1], 14.49e-6, 0.005);
    c.within_rel("homicide ML sigma", s, 0.959, 0.005);
    for (beta, b0, b1) in [(0.002, 0.356, -3.045e-6), (0.02, 0.356, -3.042e-6), (0.25, 0.404, -4.087e-6), (1.0, 0.359, -3.250e-6)] {
        let (g, _) = fit_regression(&Generator::ewd(beta).unwrap(), &homicide, &mut c, &format!("homicide E({beta}) fit"));
        c.within_rel(&format!("homicide E({beta}) intercept"), g[0], b0, 0.01);
        c.within_rel(&format!("homicide E({beta}) slope"), g[1], b1, 0.01);
        c.check(g[1] < 0.0, format!("homicide E({beta}) slope is negative (reversal against ML)"));
    }

    let telephone = datasets::telephone();
    for beta in [0.05, 0.1, 0.25, 0.5, 1.0] {
        let (g, _) = fit_regression(&Generator::ewd(beta).unwrap(), &telephone, &mut c, &format!("telephone E({beta}) fit"));
        c.within(&format!("telephone E({beta}) intercept"), g[0], -5.18, 0.02);
        c.within(&format!("telephone E({beta}) slope"), g[1], 0.11, 0.02);
    }

    let stars = datasets::stars();
    let (g, _) = fit_regression(&Generator::ewd(0.25).unwrap(), &stars, &mut c, "stars E(0.25) fit");
    c.within("stars E(0.25) intercept", g[0], -8.537, 0.05);
    c.within("stars E(0.25) slope", g[1], 3.057, 0.05);

    let alcohol = datasets::alcohol();
    let published = [
        (0.1, [5.883, 0.110, -0.133, 0.172]),
        (0.4, [3.974, 0.163, -0.179, 0.235]),
        (0.7, [5.444, 0.129, -0.152, 0.206]),
    ];
    // fixture columns are (sag, v, mass); published rows are (intercept, SAG, volume, mass)
    for (beta, coef) in published {
        let (g, _) = fit_regression(&Generator::ewd(beta).unwrap(), &alcohol, &mut c, &format!("alcohol E({beta}) fit"));
        for (name, (got, want)) in ["intercept", "sag", "volume", "mass"].iter().zip(g.iter().zip(coef)) {
            c.within_rel(&format!("alcohol E({beta}) {name}"), *got, want, 0.05);
        }
    }
    let tuned = select_beta_regression(&alcohol, &linear_grid(0.02, 2.0), &Pilot::MinimumL2).unwrap();
    c.info(format!("alcohol tuning on 0.02..2: beta_opt = {} (published 0.66)", tuned.beta_opt));
    c
}

// ---------------------------------------------------------------- 6

fn check_table(c: &mut Criterion, result: &TableResult, published: &presets::Published) {
    let spec = &result.spec;
    let fsre = result.fsre_matrix();
    let mut misses = 0;
    let mut total = 0;
    for (e, row) in fsre.iter().enumerate() {
        for (cell, v) in row.iter().enumerate() {
            let want = published.rows[e][cell];
            total += 1;
            let ok = v.is_finite() && (v - want).abs() <= 0.2 * want;
            if !ok {
                misses += 1;
                c.check(
                    false,
                    format!("{}: {} cell {} ({:?}, eps={}): got {v:.3}, published {want}", spec.title, spec.estimators[e].label(), cell, spec.cells[cell].contaminant_theta, spec.cells[cell].epsilon),
                );
            }
        }
    }
    c.check(misses == 0, format!("{}: {}/{} cells within ±20% of published", spec.title, total - misses, total));
    let mle_exact = result.cells.iter().all(|cell| cell.outcomes[0].fsre == 1.0);
    c.check(mle_exact, format!("{}: MLE row exactly 1", spec.title));
    let flagged = result.cells.iter().flat_map(|cell| &cell.outcomes).filter(|o| o.flagged).count();
    c.check(flagged == 0, format!("{}: {flagged} flagged estimator cells (> 1% failed fits)", spec.title));
    let share = result.dominance_share();
    c.check(share >= 0.9, format!("{}: EWD ≥ DPD within matched pairs in {:.1}% of contaminated cells (≥ 90%)", spec.title, share * 100.0));
}

fn simulation_tables() -> Criterion {
    let mut c = Criterion::default();
    let start = Instant::now();
    let reps = 2000;
    let tables: [(TableSpec, presets::Published); 3] = [
        (presets::normal_mean(reps, 20_240_101), presets::normal_mean_published()),
        (presets::normal_scale(reps, 20_240_201), presets::normal_scale_published()),
        (presets::exponential_mean(reps, 20_240_301), presets::exponential_mean_published()),
    ];
    for (spec, published) in &tables {
        let t = Instant::now();
        let result = run_table(spec).unwrap();
        check_table(&mut c, &result, published);
        let again = run_table(&TableSpec { cells: spec.cells[..1].to_vec(), ..spec.clone() }).unwrap();
        c.check(again.cells[0] == result.cells[0], format!("{}: rerun with the same seed is bit-identical", spec.title));
        c.info(format!("{} finished in {:.1?}", spec.title, t.elapsed()));
    }
    c.timed("three tables", start.elapsed(), Duration::from_secs(30 * 60));

    let pairs = pair_calibration(
        &Model::NormalMean { sigma: 1.0 },
        &[0.0],
        &[0.43, 0.74],
        &[0.001, 0.004, 0.016, 0.063, 0.25, 1.0, 4.0],
        200,
        reps,
        7,
    )
    .unwrap();
    for p in &pairs {
        c.info(format!(
            "calibration: D({}) pairs with E({}) (clean MSE {:.4e} vs {:.4e}, {:.1}% apart)",
            p.alpha,
            p.beta,
            p.mse_dpd,
            p.mse_ewd,
            100.0 * (p.mse_ewd / p.mse_dpd - 1.0).abs()
        ));
    }
    c.check(pairs[0].beta == 0.063 && pairs[1].beta == 0.25, "calibration recovers the published pairs D(0.43)/E(0.063) and D(0.74)/E(0.25)");
    c
}

// ---------------------------------------------------------------- 7

fn ewdts() -> Criterion {
    let mut c = Criterion::default();
    let data = datasets::shoshoni();
    let opts = EwdtsOptions { seed: 7, ..Default::default() };
    let p = ewdts_normal_mean(&data, 0.618, 1e-4, &opts).unwrap().p_value;
    c.check((0.035..=0.055).contains(&p), format!("Shoshoni p-value at beta = 1e-4: {p:.4} (in [0.035, 0.055])"));

    let betas = [0.05, 0.1, 0.25, 0.5, 1.0];
    let curve: Vec<f64> = betas.iter().map(|&b| ewdts_normal_mean(&data, 0.618, b, &opts).unwrap().p_value).collect();
    c.check(curve.iter().all(|p| *p > 0.10), format!("p-values over {betas:?}: {curve:.4?} (all > 0.10)"));
    c.check(curve.windows(2).all(|w| w[1] >= w[0]), "p-values increase with beta");

    for beta in [0.1, 0.5] {
        let reps = 2000u64;
        let rejections: usize = (0..reps)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(99, i);
                let x = Model::NormalLocationScale.simulate(&[0.0, 1.0], 200, &mut rng).unwrap();
                let r = ewdts_normal_mean(&x, 0.0, beta, &EwdtsOptions { gamma: None, reps: 10_000, seed: i }).unwrap();
                (r.p_value < 0.05) as usize
            })
            .sum();
        let size = rejections as f64 / reps as f64;
        c.within(&format!("null size at 5%, beta = {beta} (2000 samples of n = 200)"), size, 0.05, 0.01);
    }

    let mut worst: f64 = 0.0;
    for q in [0.455, 1.323, 2.706, 3.841, 6.635] {
        let mc = mc_pvalue(&[1.0], q, 100_000, 11).unwrap();
        let exact = chi2_pvalue(1.0, q).unwrap();
        worst = worst.max((mc - exact).abs());
    }
    c.check(worst <= 0.003, format!("Monte Carlo vs chi-square(1) tail probabilities: max gap {worst:.4} (≤ 0.003)"));
    c
}

// ---------------------------------------------------------------- 8

fn generators() -> Vec<Generator> {
    let mut g: Vec<Generator> = [1e-3, 0.05, 0.25, 1.0, 4.0].iter().map(|&b| Generator::ewd(b).unwrap()).collect();
    g.extend([0.1, 0.5, 1.0].iter().map(|&a| Generator::dpd(a).unwrap()));
    g.push(Generator::Kl);
    g
}

fn models() -> Vec<(Model, Vec<f64>)> {
    vec![
        (Model::NormalLocationScale, vec![0.5, 1.5]),
        (Model::NormalMean { sigma: 1.0 }, vec![-1.0]),
        (Model::NormalScale { mu: 0.0 }, vec![2.0]),
        (Model::ExponentialMean, vec![1.5]),
        (Model::Poisson, vec![3.0]),
    ]
}

fn properties() -> Criterion {
    let mut c = Criterion::default();

    // divergence nonnegativity and identity of indiscernibles
    let mut violations = 0;
    let mut cases = 0;
    for gen in generators() {
        for (model, theta) in models() {
            for factor in [0.5, 0.9, 1.1, 2.0] {
                let mut other = theta.clone();
                let last = other.len() - 1;
                other[last] *= factor;
                let grid = model.covering_grid(&[&theta, &other]);
                let dens = |t: &[f64]| grid.nodes.iter().map(|&x| model.density(t, x)).collect::<Vec<_>>();
                let pair = DensityGrid::new(grid.nodes.clone(), grid.weights.clone(), dens(&theta), dens(&other)).unwrap();
                let same = DensityGrid::new(grid.nodes.clone(), grid.weights.clone(), dens(&theta), dens(&theta)).unwrap();
                cases += 1;
                if !(divergence(&gen, &pair).unwrap() > 0.0) || divergence(&gen, &same).unwrap() != 0.0 {
                    violations += 1;
                }
            }
        }
    }
    c.check(violations == 0, format!("divergence > 0 off the diagonal and = 0 on it: {violations} violations in {cases} cases"));

    // convexity of every generator
    let xs = log_spaced(1e-6, 50.0, 120);
    let mut violations = 0;
    for gen in generators().into_iter().chain([Generator::L2]) {
        for w in xs.windows(3) {
            let (a, m, b) = (w[0], 0.5 * (w[0] + w[2]), w[2]);
            let chord = 0.5 * (gen.b_value(a).unwrap() + gen.b_value(b).unwrap());
            if !(gen.b_second(w[1]).unwrap() > 0.0) || gen.b_value(m).unwrap() > chord + 1e-12 * chord.abs().max(1.0) {
                violations += 1;
            }
        }
    }
    c.check(violations == 0, format!("strict convexity of B on a log grid: {violations} violations"));

    // beta → 0 recovers the MLE in every family
    let mut worst: f64 = 0.0;
    for (model, theta) in models() {
        let data = model.simulate(&theta, 80, &mut seeded(3)).unwrap();
        let mle = model.mle(&data).unwrap();
        let fit = estimate_iid(&Generator::ewd(1e-8).unwrap(), &model, &data, &Init::Robust).unwrap();
        for (a, b) in fit.theta.iter().zip(&mle) {
            worst = worst.max((a - b).abs() / (1.0 + b.abs()));
        }
    }
    c.check(worst <= 1e-5, format!("EWD(1e-8) fit vs MLE across families: max rel. gap {worst:.2e} (≤ 1e-5)"));

    // Fisher consistency and influence = J⁻¹ψ
    let mut worst_fc: f64 = 0.0;
    let mut worst_if: f64 = 0.0;
    for gen in generators() {
        for (model, theta) in models() {
            let xi_grid = xi(&gen, &model, &theta).unwrap();
            let g = gen.normalized();
            let domain = model.support();
            for (j, xj) in xi_grid.iter().enumerate() {
                let integrand = |x: f64| {
                    let f = model.density(&theta, x);
                    if f == 0.0 {
                        0.0
                    } else {
                        model.score(&theta, x).map(|u| u[j] * g.weight_unchecked(f) * f).unwrap_or(0.0)
                    }
                };
                let tol = if matches!(domain, IntegrationDomain::Discrete { .. }) { 1e-13 } else { 1e-12 };
                let adaptive = integrate(integrand, &domain, tol).unwrap();
                worst_fc = worst_fc.max((adaptive - xj).abs());
            }
            let bundle = model_matrices(&gen, &model, &theta).unwrap();
            let j_inv = inverse(&bundle.j).unwrap();
            for y in [0.0, 1.0, 2.0, 5.0] {
                let inf = influence(&gen, &model, &theta, y).unwrap();
                let direct = &j_inv * DVector::from_vec(psi(&gen, &model, &theta, y).unwrap());
                for (a, b) in inf.iter().zip(direct.iter()) {
                    worst_if = worst_if.max((a - b).abs() / (1.0 + b.abs()));
                }
            }
        }
    }
    c.check(worst_fc <= 1e-8, format!("Fisher-consistency residual at the model: {worst_fc:.2e} (≤ 1e-8)"));
    c.check(worst_if <= 1e-10, format!("influence function vs J⁻¹ψ: {worst_if:.2e} (≤ 1e-10)"));

    // restricted covariance with no restriction, and eigenvalue counts
    let mut worst: f64 = 0.0;
    for gen in generators() {
        for (model, theta) in models() {
            let r = restricted_vcov(&gen, &model, &theta, &ConstraintSet::none(model.dim())).unwrap();
            let full = model_matrices(&gen, &model, &theta).unwrap().covariance;
            worst = worst.max((r - full).abs().max());
        }
    }
    c.check(worst <= 1e-12, format!("restricted vcov with r = 0 equals J⁻¹KJ⁻¹: max gap {worst:.2e}"));
    let mut bad = 0;
    for beta in [1e-3, 0.1, 1.0] {
        let g = Generator::ewd(beta).unwrap();
        let fixed = ConstraintSet::fix(2, &[(0, 0.5)]).unwrap();
        let general = ConstraintSet::affine(DMatrix::from_row_slice(1, 2, &[1.0, -0.5]), DVector::from_vec(vec![-0.25])).unwrap();
        for cs in [fixed, general] {
            let eig = null_eigenvalues(&g, &g, &Model::NormalLocationScale, &[0.5, 1.5], &cs).unwrap();
            if eig.len() != cs.rank() {
                bad += 1;
            }
        }
    }
    c.check(bad == 0, format!("number of null eigenvalues equals the restriction rank: {bad} mismatches"));

    // sandwich vs Monte Carlo covariance at n = 2000
    let n = 2000;
    let reps = 1000u64;
    for (gen, model, theta) in [
        (Generator::ewd(0.25).unwrap(), Model::NormalLocationScale, vec![0.0, 1.0]),
        (Generator::dpd(0.5).unwrap(), Model::ExponentialMean, vec![2.0]),
    ] {
        let fits: Vec<Vec<f64>> = (0..reps)
            .into_par_iter()
            .map(|i| {
                let x = model.simulate(&theta, n, &mut substream(5, i)).unwrap();
                estimate_iid(&gen, &model, &x, &Init::Default).unwrap().theta
            })
            .collect();
        let cov = model_matrices(&gen, &model, &theta).unwrap().covariance;
        for j in 0..model.dim() {
            let mean = fits.iter().map(|t| t[j]).sum::<f64>() / reps as f64;
            let var = fits.iter().map(|t| (t[j] - mean).powi(2)).sum::<f64>() / (reps - 1) as f64 * n as f64;
            let rel = (var / cov[(j, j)] - 1.0).abs();
            c.check(
                rel <= 0.15,
                format!("{} {} component {j}: n·Var {var:.4} vs sandwich {:.4} ({:.1}% apart, ≤ 15%)", gen, model.name(), cov[(j, j)], rel * 100.0),
            );
        }
    }
    c
}

#[test]
fn acceptance() {
    type Runner = fn() -> Criterion;
    let criteria: [(u32, &str, Runner); 8] = [
        (1, "series vs closed form of the EWD generator", series_identity),
        (2, "asymptotic relative efficiency table for the normal mean", are_table),
        (3, "Shoshoni rectangles: classical fits and tuned EWD", shoshoni),
        (4, "Drosophila counts: Poisson fits, fitted frequencies, tuning", drosophila),
        (5, "regression reproductions (homicide, telephone, stars, alcohol)", regression),
        (6, "contamination FSRE tables (normal mean, normal scale, exponential)", simulation_tables),
        (7, "EWD test statistic: p-values, null size, Monte Carlo engine", ewdts),
        (8, "property suites", properties),
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    for (id, title, run) in criteria {
        let c = run();
        let ok = report(id, title, &c);
        if ok {
            passed += 1;
        }
        match (ok, KNOWN_RED.iter().find(|(k, _)| *k == id)) {
            (false, Some((_, why))) => emit(&format!("    known red: {why}")),
            (false, None) => unexpected.push(id),
            (true, Some(_)) => emit("    note: listed as known red but now passing"),
            (true, None) => {}
        }
    }
    emit(&format!("acceptance summary: {passed}/8 criteria pass"));
    assert!(unexpected.is_empty(), "criteria failed outside the known-red list: {unexpected:?}");
}
