//! Subcommand implementations. Every command validates its flags before
//! doing any numerical work.

use ewd::asymptotics::{are as are_of, influence_with, model_matrices};
use ewd::datasets::format_lossless;
use ewd::estimation::{estimate_iid, Init};
use ewd::models::Model;
use ewd::regression::{estimate_regression, residuals, RegressionInit};
use ewd::simulation::{self, presets, ContaminationScheme, EstimatorSpec, ExperimentResult, ExperimentSpec, TableSpec};
use ewd::testing::{ewdts_normal_mean, pvalue_curve, EwdtsOptions, MIN_MC_REPS};
use ewd::tuning::{default_grid, linear_grid, select_beta, select_beta_regression, Pilot, TuningResult};
use ewd::{Error, Generator, Result};
use serde::Deserialize;

use crate::data::{self, check_tuning};
use crate::output::{tag, OutputDir};
use crate::{AreArgs, Family, FitArgs, PlotArgs, PlotKind, Preset, RegressArgs, SimulateArgs, TestArgs, TuneArgs};

fn f3(v: f64) -> String {
    format!("{v:.3}")
}

pub fn fit(args: &FitArgs, out: &OutputDir) -> Result<()> {
    let model = data::model(&args.model)?;
    let gen = data::generator(&args.generator)?;
    if args.cells == 0 {
        return Err(Error::Config("--cells must be at least 1".into()));
    }
    let (ds, x) = data::sample(&args.data)?;
    let fit = estimate_iid(&gen, &model, &x, &Init::Default)?;
    let se = model_matrices(&gen.normalized(), &model, &fit.theta)?.standard_errors(x.len());
    println!("dataset {} (n = {}), model {}, estimator {}", ds.name, x.len(), model.name(), gen.normalized());
    println!("{:<10} {:>12} {:>12}", "parameter", "estimate", "std.err");
    let mut rows = Vec::new();
    for ((name, t), s) in model.parameter_names().iter().zip(&fit.theta).zip(&se) {
        println!("{name:<10} {:>12} {:>12}", f3(*t), f3(*s));
        rows.push(vec![name.to_string(), format_lossless(*t), format_lossless(*s)]);
    }
    println!("objective {:.6}  converged {}", fit.objective, fit.report.converged);
    out.write_rows("fit.csv", &["parameter", "estimate", "std_err"], &rows)?;

    if model.is_discrete() {
        let n = x.len();
        let last = args.cells - 1;
        let expected = model.expected_frequencies(&fit.theta, n, last)?;
        let mut observed = vec![0usize; args.cells as usize + 1];
        for v in &x {
            observed[(*v as u64).min(args.cells) as usize] += 1;
        }
        let tail = n as f64 - expected.iter().sum::<f64>();
        let mut header: Vec<String> = (0..args.cells).map(|k| k.to_string()).collect();
        header.push(format!(">={}", args.cells));
        println!("{:<10} {}", "count", header.iter().map(|h| format!("{h:>8}")).collect::<String>());
        println!("{:<10} {}", "observed", observed.iter().map(|o| format!("{o:>8}")).collect::<String>());
        let fitted: Vec<f64> = expected.iter().copied().chain(std::iter::once(tail.max(0.0))).collect();
        println!("{:<10} {}", "fitted", fitted.iter().map(|e| format!("{e:>8.3}")).collect::<String>());
        let rows: Vec<Vec<String>> = header
            .iter()
            .zip(&observed)
            .zip(&fitted)
            .map(|((h, o), e)| vec![h.clone(), o.to_string(), format_lossless(*e)])
            .collect();
        out.write_rows("frequencies.csv", &["cell", "observed", "fitted"], &rows)?;
    }
    Ok(())
}

pub fn regress(args: &RegressArgs, out: &OutputDir) -> Result<()> {
    let gen = data::generator(&args.generator)?;
    let (ds, reg) = data::regression(&args.data)?;
    let fit = estimate_regression(&gen, &reg, &RegressionInit::Default)?;
    let n = reg.n();
    println!("dataset {} (n = {}), estimator {}", ds.name, n, gen.normalized());
    println!("{:<16} {:>14} {:>14}", "parameter", "estimate", "std.err");
    let mut names = reg.column_names.clone();
    names.push("sigma".into());
    let mut rows = Vec::new();
    for (i, (name, t)) in names.iter().zip(fit.theta()).enumerate() {
        let se = (fit.covariance[(i, i)].max(0.0) / n as f64).sqrt();
        println!("{name:<16} {:>14} {:>14}", format!("{t:.6}"), format!("{se:.6}"));
        rows.push(vec![name.clone(), format_lossless(t), format_lossless(se)]);
    }
    out.write_rows("regression.csv", &["parameter", "estimate", "std_err"], &rows)?;

    let res = residuals(&reg, &fit.gamma);
    let fitted: Vec<f64> = reg.response.iter().zip(&res).map(|(y, r)| y - r).collect();
    let pairs: Vec<(f64, f64)> = fitted.iter().copied().zip(res.iter().copied()).collect();
    out.write_xy("residuals.csv", &pairs)?;
    if reg.design.ncols() == 2 {
        let mut pts: Vec<(f64, f64)> = (0..n).map(|i| (reg.design[(i, 1)], reg.response[i])).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let line: Vec<(f64, f64)> = pts.iter().map(|(x, _)| (*x, fit.gamma[0] + fit.gamma[1] * x)).collect();
        out.write_xy("points.csv", &pts)?;
        out.write_xy("line.csv", &line)?;
    }
    Ok(())
}

fn tuning_grid(args: &TuneArgs) -> Result<Vec<f64>> {
    match (&args.grid, args.step, args.upper) {
        (Some(g), _, _) => Ok(g.clone()),
        (None, Some(step), Some(upper)) => {
            if !(step > 0.0 && upper >= step && step.is_finite() && upper.is_finite()) {
                return Err(Error::Config(format!("need 0 < step <= upper, got step {step}, upper {upper}")));
            }
            Ok(linear_grid(step, upper))
        }
        _ => Ok(default_grid(&[])),
    }
}

fn report_tuning(result: &TuningResult, n: usize, names: &[String], out: &OutputDir) -> Result<()> {
    println!("beta_opt {}", result.beta_opt);
    for (name, t) in names.iter().zip(&result.theta_opt) {
        println!("  {name:<12} {}", f3(*t));
    }
    println!("mse_hat {:.4e}  (n * mse_hat {:.4e})", result.mse_opt, result.mse_opt * n as f64);
    println!("pilot {:?}", result.pilot.iter().map(|v| f3(*v)).collect::<Vec<_>>());
    if !result.failures.is_empty() {
        println!("{} grid value(s) failed to fit:", result.failures.len());
        for (b, why) in &result.failures {
            println!("  beta {b}: {why}");
        }
    }
    let curve: Vec<(f64, f64)> = result.points.iter().map(|p| (p.beta, p.mse.total())).collect();
    out.write_xy("tune_curve.csv", &curve)?;
    let mut header = vec!["beta".to_string()];
    header.extend(names.iter().cloned());
    header.extend(["bias_squared".into(), "variance".into(), "mse".into()]);
    let rows: Vec<Vec<String>> = result
        .points
        .iter()
        .map(|p| {
            let mut r = vec![format_lossless(p.beta)];
            r.extend(p.theta.iter().map(|t| format_lossless(*t)));
            r.extend([format_lossless(p.mse.bias_squared), format_lossless(p.mse.variance), format_lossless(p.mse.total())]);
            r
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    out.write_rows("tune_points.csv", &header_refs, &rows)?;
    Ok(())
}

pub fn tune(args: &TuneArgs, out: &OutputDir) -> Result<()> {
    let grid = tuning_grid(args)?;
    let pilot = match &args.pilot {
        Some(p) => Pilot::Given(p.clone()),
        None => Pilot::MinimumL2,
    };
    let ds = data::load(&args.data)?;
    if let Some(reg) = ds.regression() {
        let result = select_beta_regression(reg, &grid, &pilot)?;
        let mut names = reg.column_names.clone();
        names.push("sigma".into());
        println!("dataset {} (n = {}), regression", ds.name, reg.n());
        report_tuning(&result, reg.n(), &names, out)
    } else {
        let model = data::model(&args.model)?;
        let x = ds.sample().expect("non-regression datasets are samples");
        let result = select_beta(&model, &x, &grid, &pilot)?;
        let names: Vec<String> = model.parameter_names().iter().map(|s| s.to_string()).collect();
        println!("dataset {} (n = {}), model {}", ds.name, x.len(), model.name());
        report_tuning(&result, x.len(), &names, out)
    }
}

pub fn test(args: &TestArgs, out: &OutputDir) -> Result<()> {
    check_tuning("--beta", args.beta)?;
    if let Some(g) = args.gamma {
        check_tuning("--gamma", g)?;
    }
    if args.reps < MIN_MC_REPS {
        return Err(Error::Config(format!("--reps must be at least {MIN_MC_REPS}")));
    }
    if !args.mu0.is_finite() {
        return Err(Error::Config("--mu0 must be finite".into()));
    }
    if let Some(c) = &args.curve {
        for b in c {
            check_tuning("--curve value", *b)?;
        }
    }
    let (ds, x) = data::sample(&args.data)?;
    let opts = EwdtsOptions { gamma: args.gamma, reps: args.reps, seed: args.seed };
    let r = ewdts_normal_mean(&x, args.mu0, args.beta, &opts)?;
    println!("dataset {} (n = {}), H0: mu = {}", ds.name, x.len(), args.mu0);
    println!("beta {}  gamma {}", r.beta, r.gamma);
    println!("unrestricted (mu, sigma) = ({}, {})", f3(r.unrestricted[0]), f3(r.unrestricted[1]));
    println!("restricted   (mu, sigma) = ({}, {})", f3(r.restricted[0]), f3(r.restricted[1]));
    println!("statistic {:.6}  null weights {:?}", r.statistic, r.eigenvalues.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>());
    println!("p-value {:.4}  ({} Monte Carlo draws, seed {})", r.p_value, r.reps, r.seed);
    out.write_rows(
        "test.csv",
        &["beta", "gamma", "statistic", "p_value"],
        &[vec![format_lossless(r.beta), format_lossless(r.gamma), format_lossless(r.statistic), format_lossless(r.p_value)]],
    )?;
    if let Some(betas) = &args.curve {
        let curve = pvalue_curve(&x, args.mu0, betas, args.reps, args.seed)?;
        for (b, p) in &curve {
            println!("  beta {b:<8} p {p:.4}");
        }
        out.write_xy("pvalue_curve.csv", &curve)?;
    }
    Ok(())
}

pub fn are(args: &AreArgs, out: &OutputDir) -> Result<()> {
    let model = data::model(&args.model)?;
    for k in &args.grid {
        check_tuning("grid value", *k)?;
    }
    let theta = args.theta.clone().unwrap_or_else(|| data::default_theta(&model));
    model.check_theta(&theta).map_err(|e| Error::Config(e.to_string()))?;
    if args.component >= model.dim() {
        return Err(Error::Config(format!("--component {} out of range for {}", args.component, model.name())));
    }
    println!("{:>10} {:>10} {:>10}", "tuning", "ARE(DPD)", "ARE(EWD)");
    let mut rows = Vec::new();
    for &k in &args.grid {
        let d = are_of(&Generator::dpd(k)?.normalized(), &model, &theta, args.component)?;
        let e = are_of(&Generator::ewd(k)?.normalized(), &model, &theta, args.component)?;
        println!("{k:>10} {:>10} {:>10}", f3(d), f3(e));
        rows.push(vec![format_lossless(k), format_lossless(d), format_lossless(e)]);
    }
    out.write_rows("are.csv", &["tuning", "are_dpd", "are_ewd"], &rows)?;
    Ok(())
}

/// `simulate --config` file layout: exactly one of the two sections.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    experiment: Option<ExperimentSpec>,
    table: Option<TableSpec>,
}

const DEFAULT_PRESET_REPS: usize = 2000;

fn print_experiment(result: &ExperimentResult) {
    println!("{:<12} {:>14} {:>10} {:>9}", "estimator", "mse", "fsre", "failures");
    for o in &result.outcomes {
        let mark = if o.flagged { " *" } else { "" };
        println!("{:<12} {:>14.6e} {:>10} {:>9}{mark}", o.label, o.mse, f3(o.fsre), o.failures);
    }
}

pub fn simulate(args: &SimulateArgs, out: &OutputDir) -> Result<()> {
    let (experiment, table) = match (&args.config, args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
            let cfg: SimulateConfig =
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
            match (cfg.experiment, cfg.table) {
                (Some(e), None) => (Some(e), None),
                (None, Some(t)) => (None, Some(t)),
                _ => return Err(Error::Config("config must contain exactly one of [experiment] or [table]".into())),
            }
        }
        (None, Some(p)) => {
            let reps = DEFAULT_PRESET_REPS;
            let spec = match p {
                Preset::NormalMean => presets::normal_mean(reps, 0),
                Preset::NormalScale => presets::normal_scale(reps, 0),
                Preset::Exponential => presets::exponential_mean(reps, 0),
            };
            (None, Some(spec))
        }
        (None, None) => return Err(Error::Config("give --config or --preset".into())),
    };
    if args.reps == Some(0) {
        return Err(Error::Config("--reps must be positive".into()));
    }
    if let Some(mut spec) = experiment {
        if let Some(r) = args.reps {
            spec.replications = r;
        }
        if let Some(s) = args.seed {
            spec.seed = s;
        }
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        let result = simulation::run_experiment(&spec)?;
        print_experiment(&result);
        let rows: Vec<Vec<String>> = result
            .outcomes
            .iter()
            .map(|o| {
                vec![o.label.clone(), format_lossless(o.mse), format_lossless(o.fsre), o.failures.to_string(), o.flagged.to_string()]
            })
            .collect();
        out.write_rows("simulate.csv", &["estimator", "mse", "fsre", "failures", "flagged"], &rows)?;
    } else if let Some(mut spec) = table {
        if let Some(r) = args.reps {
            spec.replications = r;
        }
        if let Some(s) = args.seed {
            spec.seed = s;
        }
        for c in 0..spec.cells.len() {
            spec.cell_spec(c).validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let result = simulation::run_table(&spec)?;
        let text = result.render_text();
        print!("{text}");
        println!("dominance share {:.3}", result.dominance_share());
        out.write_text("simulate.txt", &text)?;
        let (path, file) = out.create("simulate.csv")?;
        result.write_csv(file)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

pub fn plot(args: &PlotArgs, out: &OutputDir) -> Result<()> {
    match &args.kind {
        PlotKind::Weights { family, values, t_max, points } => {
            if *points < 2 || !(*t_max > 0.0 && t_max.is_finite()) {
                return Err(Error::Config("need --points >= 2 and a positive --t-max".into()));
            }
            for v in values {
                check_tuning("tuning value", *v)?;
            }
            for &v in values {
                let (gen, name) = match family {
                    Family::Ewd => (Generator::ewd(v)?, "ewd"),
                    Family::Dpd => (Generator::dpd(v)?, "dpd"),
                };
                let series = linspace(0.0, *t_max, *points)
                    .into_iter()
                    .map(|t| gen.weight(t).map(|w| (t, w)))
                    .collect::<Result<Vec<_>>>()?;
                out.write_xy(&format!("weights_{name}_{}.csv", tag(v)), &series)?;
            }
            Ok(())
        }
        PlotKind::Influence { betas, x_max, points } => {
            if *points < 2 || !(*x_max > 0.0 && x_max.is_finite()) {
                return Err(Error::Config("need --points >= 2 and a positive --x-max".into()));
            }
            for b in betas {
                check_tuning("beta", *b)?;
            }
            let model = Model::NormalMean { sigma: 1.0 };
            let theta = [0.0];
            for &b in betas {
                let gen = Generator::ewd(b)?.normalized();
                let bundle = model_matrices(&gen, &model, &theta)?;
                let series = linspace(-x_max, *x_max, *points)
                    .into_iter()
                    .map(|y| influence_with(&bundle, &gen, &model, &theta, y).map(|v| (y, v[0])))
                    .collect::<Result<Vec<_>>>()?;
                out.write_xy(&format!("influence_ewd_{}.csv", tag(b)), &series)?;
            }
            Ok(())
        }
        PlotKind::MseCurve { betas, sizes, epsilon, contaminant_mean, reps, seed } => {
            for b in betas {
                check_tuning("beta", *b)?;
            }
            let model = Model::NormalMean { sigma: 1.0 };
            let mut estimators = vec![EstimatorSpec::Mle];
            estimators.extend(betas.iter().map(|&beta| EstimatorSpec::Ewd { beta }));
            let specs: Vec<ExperimentSpec> = sizes
                .iter()
                .map(|&n| ExperimentSpec {
                    scheme: ContaminationScheme {
                        model,
                        theta0: vec![0.0],
                        contaminant: model,
                        contaminant_theta: vec![*contaminant_mean],
                        epsilon: *epsilon,
                    },
                    n,
                    replications: *reps,
                    estimators: estimators.clone(),
                    component: 0,
                    seed: *seed,
                })
                .collect();
            for s in &specs {
                s.validate().map_err(|e| Error::Config(e.to_string()))?;
            }
            let results = specs.iter().map(simulation::run_experiment).collect::<Result<Vec<_>>>()?;
            for (j, e) in estimators.iter().enumerate() {
                let series: Vec<(f64, f64)> = results.iter().map(|r| (r.spec.n as f64, r.outcomes[j].mse)).collect();
                let name = match e {
                    EstimatorSpec::Ewd { beta } => format!("mse_curve_ewd_{}.csv", tag(*beta)),
                    _ => "mse_curve_mle.csv".to_string(),
                };
                out.write_xy(&name, &series)?;
            }
            Ok(())
        }
    }
}
