//! Contamination experiments: finite-sample MSE and relative efficiency of
//! minimum divergence estimators against the MLE.
//!
//! Data are drawn from `(1 − ε) F_{θ₀} + ε V`, one independent coin per
//! observation. Every estimator in an experiment sees the same sample in a
//! given replication (common random numbers), and MSE is always measured
//! against the target `θ₀`, never against the mixture. Replication `i` draws
//! from substream `i` of the master seed, so results are identical whatever
//! the thread count.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::Generator;
use crate::error::{Error, Result};
use crate::estimation::{estimate_iid, Init};
use crate::models::Model;
use crate::numerics::rng::substream;

/// Fraction of failed fits above which a cell is flagged.
pub const FAILURE_FLAG_FRACTION: f64 = 0.01;

/// `(1 − ε) F_{θ₀} + ε V_{θc}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationScheme {
    pub model: Model,
    pub theta0: Vec<f64>,
    pub contaminant: Model,
    pub contaminant_theta: Vec<f64>,
    pub epsilon: f64,
}

impl ContaminationScheme {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("contamination proportion {} is outside [0, 1)", self.epsilon)));
        }
        self.model.check_theta(&self.theta0)?;
        self.contaminant.check_theta(&self.contaminant_theta)?;
        Ok(())
    }
}

/// `n` independent draws from the mixture.
pub fn sample_contaminated<R: Rng + ?Sized>(scheme: &ContaminationScheme, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    scheme.validate()?;
    let coins: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < scheme.epsilon).collect();
    let k = coins.iter().filter(|c| **c).count();
    let mut clean = scheme.model.simulate(&scheme.theta0, n - k, rng)?.into_iter();
    let mut outliers = scheme.contaminant.simulate(&scheme.contaminant_theta, k, rng)?.into_iter();
    Ok(coins
        .into_iter()
        .map(|c| if c { outliers.next() } else { clean.next() }.expect("draw counts match the coins"))
        .collect())
}

/// An estimator in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    Mle,
    Ewd { beta: f64 },
    Dpd { alpha: f64 },
    L2,
}

impl EstimatorSpec {
    pub fn generator(&self) -> Result<Generator> {
        match *self {
            EstimatorSpec::Mle => Ok(Generator::Kl),
            EstimatorSpec::Ewd { beta } => Generator::ewd(beta),
            EstimatorSpec::Dpd { alpha } => Generator::dpd(alpha),
            EstimatorSpec::L2 => Ok(Generator::L2),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            EstimatorSpec::Mle => "MLE".into(),
            EstimatorSpec::Ewd { beta } => format!("E({beta})"),
            EstimatorSpec::Dpd { alpha } => format!("D({alpha})"),
            EstimatorSpec::L2 => "L2".into(),
        }
    }
}

/// One contamination cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scheme: ContaminationScheme,
    pub n: usize,
    pub replications: usize,
    pub estimators: Vec<EstimatorSpec>,
    /// Index of the parameter component whose MSE is reported.
    #[serde(default)]
    pub component: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.replications == 0 {
            return Err(Error::Config("at least one replication is required".into()));
        }
        if self.n < 2 {
            return Err(Error::Config(format!("sample size {} is below 2", self.n)));
        }
        if !self.estimators.contains(&EstimatorSpec::Mle) {
            return Err(Error::Config("the estimator list must include the MLE".into()));
        }
        if self.component >= self.scheme.model.dim() {
            return Err(Error::Config(format!(
                "component {} out of range for a {}-parameter model",
                self.component,
                self.scheme.model.dim()
            )));
        }
        for e in &self.estimators {
            e.generator()?;
        }
        Ok(())
    }
}

/// Per-estimator outcome of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutcome {
    pub estimator: EstimatorSpec,
    pub label: String,
    pub mse: f64,
    /// `MSE(MLE) / MSE(estimator)`.
    pub fsre: f64,
    pub failures: usize,
    /// More than 1% of the replications failed.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub outcomes: Vec<EstimatorOutcome>,
}

impl ExperimentResult {
    pub fn outcome(&self, estimator: &EstimatorSpec) -> Option<&EstimatorOutcome> {
        self.outcomes.iter().find(|o| o.estimator == *estimator)
    }
}

/// Squared errors of every estimator on replication `index`; `None` marks a failed fit.
fn replicate(spec: &ExperimentSpec, generators: &[Generator], index: usize) -> Result<Vec<Option<f64>>> {
    let mut rng = substream(spec.seed, index as u64);
    let data = sample_contaminated(&spec.scheme, spec.n, &mut rng)?;
    let target = spec.scheme.theta0[spec.component];
    let model = &spec.scheme.model;
    Ok(generators
        .iter()
        .map(|g| {
            let theta = match g {
                Generator::Kl => model.mle(&data).ok()?,
                _ => estimate_iid(g, model, &data, &Init::Default).ok()?.theta,
            };
            let d = theta[spec.component] - target;
            d.is_finite().then_some(d * d)
        })
        .collect())
}

/// Runs every replication of one cell.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let generators: Vec<Generator> = spec.estimators.iter().map(|e| e.generator().map(|g| g.normalized())).collect::<Result<_>>()?;
    let per_rep: Vec<Vec<Option<f64>>> =
        (0..spec.replications).into_par_iter().map(|i| replicate(spec, &generators, i)).collect::<Result<_>>()?;
    // Sequential sums in replication order keep the result bit-exact.
    let k = spec.estimators.len();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for rep in &per_rep {
        for (j, v) in rep.iter().enumerate() {
            if let Some(v) = v {
                sums[j] += v;
                counts[j] += 1;
            }
        }
    }
    let mse: Vec<f64> = sums.iter().zip(&counts).map(|(s, c)| if *c > 0 { s / *c as f64 } else { f64::NAN }).collect();
    let mle_index = spec.estimators.iter().position(|e| *e == EstimatorSpec::Mle).expect("validated");
    let mle_mse = mse[mle_index];
    let outcomes = spec
        .estimators
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let failures = spec.replications - counts[j];
            EstimatorOutcome {
                estimator: *e,
                label: e.label(),
                mse: mse[j],
                fsre: if j == mle_index { 1.0 } else { mle_mse / mse[j] },
                failures,
                flagged: failures as f64 > FAILURE_FLAG_FRACTION * spec.replications as f64,
            }
        })
        .collect();
    Ok(ExperimentResult { spec: spec.clone(), outcomes })
}

/// A matched DPD/EWD pair with their clean-data MSEs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedPair {
    pub alpha: f64,
    pub beta: f64,
    pub mse_dpd: f64,
    pub mse_ewd: f64,
}

/// For each `α`, the candidate `β` whose clean-data MSE is nearest that of
/// DPD(`α`); ties go to the earlier candidate. `α = 0` and `β = 0` both
/// mean the MLE.
pub fn pair_calibration(
    model: &Model,
    theta0: &[f64],
    alphas: &[f64],
    betas: &[f64],
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<Vec<CalibratedPair>> {
    if alphas.is_empty() || betas.is_empty() {
        return Err(Error::Config("candidate lists must be nonempty".into()));
    }
    let mut estimators = vec![EstimatorSpec::Mle];
    estimators.extend(alphas.iter().map(|&alpha| EstimatorSpec::Dpd { alpha }));
    estimators.extend(betas.iter().map(|&beta| EstimatorSpec::Ewd { beta }));
    let spec = ExperimentSpec {
        scheme: ContaminationScheme {
            model: *model,
            theta0: theta0.to_vec(),
            contaminant: *model,
            contaminant_theta: theta0.to_vec(),
            epsilon: 0.0,
        },
        n,
        replications,
        estimators,
        component: 0,
        seed,
    };
    let result = run_experiment(&spec)?;
    let mse = |e: EstimatorSpec| result.outcome(&e).map(|o| o.mse).expect("estimator present");
    Ok(alphas
        .iter()
        .map(|&alpha| {
            let mse_dpd = mse(EstimatorSpec::Dpd { alpha });
            let (beta, mse_ewd) = betas
                .iter()
                .map(|&beta| (beta, mse(EstimatorSpec::Ewd { beta })))
                .fold(None::<(f64, f64)>, |best, cand| match best {
                    Some(b) if (b.1 - mse_dpd).abs() <= (cand.1 - mse_dpd).abs() => Some(b),
                    _ => Some(cand),
                })
                .expect("nonempty candidates");
            CalibratedPair { alpha, beta, mse_dpd, mse_ewd }
        })
        .collect())
}

/// One column of a table: contaminant parameter and proportion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub contaminant_theta: Vec<f64>,
    pub epsilon: f64,
}

/// A grid of cells sharing model, estimators and replication settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub title: String,
    pub model: Model,
    pub theta0: Vec<f64>,
    pub contaminant: Model,
    pub n: usize,
    pub replications: usize,
    #[serde(default)]
    pub component: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorSpec>,
    pub cells: Vec<TableCell>,
    /// Estimator pairs (by index into `estimators`) matched on clean-data
    /// efficiency, DPD first.
    #[serde(default)]
    pub pairs: Vec<(usize, usize)>,
}

impl TableSpec {
    /// The experiment for cell `index`; cell `c` uses seed `seed + c`.
    pub fn cell_spec(&self, index: usize) -> ExperimentSpec {
        let cell = &self.cells[index];
        ExperimentSpec {
            scheme: ContaminationScheme {
                model: self.model,
                theta0: self.theta0.clone(),
                contaminant: self.contaminant,
                contaminant_theta: cell.contaminant_theta.clone(),
                epsilon: cell.epsilon,
            },
            n: self.n,
            replications: self.replications,
            estimators: self.estimators.clone(),
            component: self.component,
            seed: self.seed.wrapping_add(index as u64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableResult {
    pub spec: TableSpec,
    pub cells: Vec<ExperimentResult>,
}

impl TableResult {
    /// `fsre[estimator][cell]`.
    pub fn fsre_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.spec.estimators.len())
            .map(|e| self.cells.iter().map(|c| c.outcomes[e].fsre).collect())
            .collect()
    }

    /// Share of (pair, contaminated cell) combinations where the EWD member
    /// has FSRE at least that of its DPD partner.
    pub fn dominance_share(&self) -> f64 {
        let fsre = self.fsre_matrix();
        let mut hits = 0usize;
        let mut total = 0usize;
        for (c, cell) in self.cells.iter().enumerate() {
            if cell.spec.scheme.epsilon == 0.0 {
                continue;
            }
            for &(d, e) in &self.spec.pairs {
                total += 1;
                if fsre[e][c] >= fsre[d][c] {
                    hits += 1;
                }
            }
        }
        if total == 0 {
            f64::NAN
        } else {
            hits as f64 / total as f64
        }
    }

    /// Aligned text table with three decimals.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.spec.title);
        let header: Vec<String> = self
            .spec
            .cells
            .iter()
            .map(|c| {
                let theta: Vec<String> = c.contaminant_theta.iter().map(|v| format!("{v}")).collect();
                format!("{}|eps={}", theta.join(","), c.epsilon)
            })
            .collect();
        let _ = write!(out, "{:<12}", "estimator");
        for h in &header {
            let _ = write!(out, " {h:>12}");
        }
        out.push('\n');
        for (e, row) in self.fsre_matrix().iter().enumerate() {
            let _ = write!(out, "{:<12}", self.spec.estimators[e].label());
            for (c, v) in row.iter().enumerate() {
                let mark = if self.cells[c].outcomes[e].flagged { "*" } else { "" };
                let _ = write!(out, " {:>12}", format!("{v:.3}{mark}"));
            }
            out.push('\n');
        }
        out
    }

    /// Long-format CSV rows: estimator, cell parameters, MSE, FSRE, failures.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let to_err = |e: csv::Error| Error::Io { path: "<table csv>".into(), source: std::io::Error::other(e.to_string()) };
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["estimator", "contaminant", "epsilon", "mse", "fsre", "failures", "flagged"]).map_err(to_err)?;
        for cell in &self.cells {
            let contaminant: Vec<String> =
                cell.spec.scheme.contaminant_theta.iter().map(|v| crate::datasets::format_lossless(*v)).collect();
            for o in &cell.outcomes {
                w.write_record([
                    o.label.clone(),
                    contaminant.join(";"),
                    crate::datasets::format_lossless(cell.spec.scheme.epsilon),
                    crate::datasets::format_lossless(o.mse),
                    crate::datasets::format_lossless(o.fsre),
                    o.failures.to_string(),
                    o.flagged.to_string(),
                ])
                .map_err(to_err)?;
            }
        }
        w.flush().map_err(|e| Error::Io { path: "<table csv>".into(), source: e })
    }
}

/// Runs every cell of a table.
pub fn run_table(spec: &TableSpec) -> Result<TableResult> {
    if spec.cells.is_empty() {
        return Err(Error::Config("a table needs at least one cell".into()));
    }
    if let Some(&(d, e)) = spec.pairs.iter().find(|(d, e)| *d >= spec.estimators.len() || *e >= spec.estimators.len()) {
        return Err(Error::Config(format!("pair ({d}, {e}) refers to a missing estimator")));
    }
    let cells = (0..spec.cells.len()).map(|c| run_experiment(&spec.cell_spec(c))).collect::<Result<_>>()?;
    Ok(TableResult { spec: spec.clone(), cells })
}

/// Built-in table layouts with the published FSRE values for comparison.
pub mod presets {
    use super::*;

    /// Published FSREs: one row per estimator (same order as the preset's
    /// estimator list), one column per cell.
    #[derive(Debug, Clone, PartialEq)]
    pub struct Published {
        pub rows: Vec<Vec<f64>>,
    }

    fn cells(values: [f64; 2]) -> Vec<TableCell> {
        let mut out = vec![TableCell { contaminant_theta: vec![values[0]], epsilon: 0.0 }];
        for v in values {
            for eps in [0.05, 0.10, 0.20] {
                out.push(TableCell { contaminant_theta: vec![v], epsilon: eps });
            }
        }
        out
    }

    fn estimators(pairs: &[(f64, f64)]) -> Vec<EstimatorSpec> {
        let mut e = vec![EstimatorSpec::Mle];
        for &(alpha, beta) in pairs {
            e.push(EstimatorSpec::Dpd { alpha });
            e.push(EstimatorSpec::Ewd { beta });
        }
        e.push(EstimatorSpec::L2);
        e
    }

    fn pair_indices(count: usize) -> Vec<(usize, usize)> {
        (0..count).map(|i| (1 + 2 * i, 2 + 2 * i)).collect()
    }

    fn table(title: &str, model: Model, theta0: f64, contaminant: Model, values: [f64; 2], pairs: &[(f64, f64)], replications: usize, seed: u64) -> TableSpec {
        TableSpec {
            title: title.into(),
            model,
            theta0: vec![theta0],
            contaminant,
            n: 200,
            replications,
            component: 0,
            seed,
            estimators: estimators(pairs),
            cells: cells(values),
            pairs: pair_indices(pairs.len()),
        }
    }

    /// Normal mean, `N(0,1)` contaminated by `N(μc, 1)`, `μc ∈ {3, 5}`.
    pub fn normal_mean(replications: usize, seed: u64) -> TableSpec {
        table(
            "FSRE, normal mean",
            Model::NormalMean { sigma: 1.0 },
            0.0,
            Model::NormalMean { sigma: 1.0 },
            [3.0, 5.0],
            &[(0.05, 0.001), (0.1, 0.004), (0.43, 0.063), (0.74, 0.25), (0.98, 4.0)],
            replications,
            seed,
        )
    }

    /// Normal scale, `N(0,1)` contaminated by `N(0, σc²)`, `σc ∈ {3, 5}`.
    pub fn normal_scale(replications: usize, seed: u64) -> TableSpec {
        table(
            "FSRE, normal scale",
            Model::NormalScale { mu: 0.0 },
            1.0,
            Model::NormalScale { mu: 0.0 },
            [3.0, 5.0],
            &[(0.098, 0.001), (0.177, 0.004), (0.551, 0.063), (0.884, 0.5), (0.983, 4.0)],
            replications,
            seed,
        )
    }

    /// Exponential mean, `E(1)` contaminated by `E(λc)`, `λc ∈ {3, 5}`.
    pub fn exponential_mean(replications: usize, seed: u64) -> TableSpec {
        table(
            "FSRE, exponential mean",
            Model::ExponentialMean,
            1.0,
            Model::ExponentialMean,
            [3.0, 5.0],
            &[(0.153, 0.004), (0.44, 0.063), (0.844, 1.0), (0.989, 16.0)],
            replications,
            seed,
        )
    }

    /// Published values for [`normal_mean`].
    pub fn normal_mean_published() -> Published {
        Published {
            rows: vec![
                vec![1.0; 7],
                vec![0.996, 1.358, 1.358, 1.250, 2.635, 2.568, 2.059],
                vec![0.996, 1.791, 1.806, 1.495, 12.326, 31.141, 52.727],
                vec![0.956, 2.567, 3.027, 2.552, 10.966, 23.342, 29.168],
                vec![0.954, 3.409, 4.863, 4.221, 13.509, 43.633, 140.125],
                vec![0.871, 3.592, 6.075, 6.213, 12.106, 38.450, 115.779],
                vec![0.867, 4.003, 7.947, 9.664, 12.356, 40.769, 137.303],
                vec![0.749, 3.693, 8.567, 13.500, 10.495, 34.680, 117.038],
                vec![0.747, 3.763, 9.075, 15.557, 10.525, 34.861, 118.461],
                vec![0.666, 3.428, 8.837, 17.716, 9.304, 30.871, 105.076],
                vec![0.666, 3.430, 8.861, 17.852, 9.304, 30.871, 105.129],
                vec![0.659, 3.401, 8.821, 17.977, 9.206, 30.553, 104.007],
            ],
        }
    }

    /// Published values for [`normal_scale`].
    pub fn normal_scale_published() -> Published {
        Published {
            rows: vec![
                vec![1.0; 7],
                vec![0.970, 2.980, 2.476, 1.789, 10.270, 5.478, 2.356],
                vec![0.971, 5.670, 5.017, 2.806, 40.979, 34.196, 10.234],
                vec![0.873, 6.269, 6.338, 4.057, 38.358, 33.529, 13.105],
                vec![0.872, 8.555, 10.786, 7.146, 60.167, 79.181, 47.703],
                vec![0.670, 7.950, 12.253, 10.299, 50.158, 72.823, 52.318],
                vec![0.669, 8.658, 14.871, 13.873, 56.044, 95.436, 82.653],
                vec![0.550, 7.103, 12.494, 12.443, 43.073, 67.906, 55.659],
                vec![0.549, 7.161, 12.772, 12.907, 43.559, 69.896, 58.191],
                vec![0.526, 6.839, 12.217, 12.463, 41.136, 64.981, 53.813],
                vec![0.526, 6.844, 12.247, 12.512, 41.167, 65.181, 54.046],
                vec![0.522, 6.801, 12.164, 12.453, 40.825, 64.499, 53.474],
            ],
        }
    }

    /// Published values for [`exponential_mean`].
    pub fn exponential_mean_published() -> Published {
        Published {
            rows: vec![
                vec![1.0; 7],
                vec![0.904, 1.592, 1.858, 1.771, 3.217, 3.438, 2.746],
                vec![0.905, 1.766, 2.230, 2.101, 4.652, 6.002, 4.658],
                vec![0.696, 1.753, 2.774, 3.099, 4.810, 7.896, 7.755],
                vec![0.694, 1.824, 3.112, 3.655, 5.321, 10.115, 11.055],
                vec![0.525, 1.496, 2.752, 3.617, 4.237, 8.236, 9.793],
                vec![0.525, 1.498, 2.766, 3.656, 4.245, 8.282, 9.924],
                vec![0.492, 1.420, 2.669, 3.615, 4.022, 7.958, 9.733],
                vec![0.492, 1.420, 2.669, 3.616, 4.022, 7.958, 9.734],
                vec![0.490, 1.414, 2.662, 3.613, 4.006, 7.935, 9.723],
            ],
        }
    }
}
