//! Resolving data sources, models and generators from flags.

use ewd::datasets::{self, Dataset, DatasetKind};
use ewd::models::Model;
use ewd::regression::RegressionData;
use ewd::{Error, Generator, Result};

use crate::{DataArgs, GeneratorArgs, ModelArgs, ModelName};

pub fn load(args: &DataArgs) -> Result<Dataset> {
    match (&args.data, &args.csv) {
        (Some(name), None) => {
            if args.column.is_some() || args.response.is_some() || args.predictors.is_some() || args.value_column.is_some() {
                return Err(Error::Config("column flags apply only to --csv input".into()));
            }
            datasets::embedded(name)
        }
        (None, Some(path)) => {
            let kind = if let Some(response) = &args.response {
                DatasetKind::Regression { response: response.clone(), predictors: args.predictors.clone(), ignore: vec![] }
            } else if let (Some(value), Some(count)) = (&args.value_column, &args.count_column) {
                DatasetKind::Frequencies { value: value.clone(), count: count.clone() }
            } else {
                if args.predictors.is_some() {
                    return Err(Error::Config("--predictors needs --response".into()));
                }
                DatasetKind::Univariate { column: args.column.clone() }
            };
            datasets::ingest_csv(path, &kind)
        }
        (None, None) => Err(Error::Config("give a dataset with --data NAME or --csv PATH".into())),
        (Some(_), Some(_)) => Err(Error::Config("--data and --csv are mutually exclusive".into())),
    }
}

pub fn sample(args: &DataArgs) -> Result<(Dataset, Vec<f64>)> {
    let ds = load(args)?;
    let x = ds
        .sample()
        .ok_or_else(|| Error::Config(format!("dataset '{}' is a regression table; use `regress`", ds.name)))?;
    Ok((ds, x))
}

pub fn regression(args: &DataArgs) -> Result<(Dataset, RegressionData)> {
    let ds = load(args)?;
    let r = ds
        .regression()
        .cloned()
        .ok_or_else(|| Error::Config(format!("dataset '{}' is not a regression table (use --response)", ds.name)))?;
    Ok((ds, r))
}

pub fn model(args: &ModelArgs) -> Result<Model> {
    let m = match args.model {
        ModelName::Normal => Model::NormalLocationScale,
        ModelName::NormalMean => Model::NormalMean { sigma: args.sigma },
        ModelName::NormalScale => Model::NormalScale { mu: args.mu },
        ModelName::Exponential => Model::ExponentialMean,
        ModelName::Poisson => Model::Poisson,
    };
    if !(args.sigma.is_finite() && args.sigma > 0.0) {
        return Err(Error::Config(format!("--sigma must be positive, got {}", args.sigma)));
    }
    if !args.mu.is_finite() {
        return Err(Error::Config(format!("--mu must be finite, got {}", args.mu)));
    }
    Ok(m)
}

/// The standard member used when no parameter is given.
pub fn default_theta(model: &Model) -> Vec<f64> {
    match model {
        Model::NormalMean { .. } => vec![0.0],
        Model::NormalLocationScale => vec![0.0, 1.0],
        Model::NormalScale { .. } | Model::ExponentialMean | Model::Poisson => vec![1.0],
    }
}

pub fn check_tuning(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite and nonnegative, got {v}")))
    }
}

pub fn generator(args: &GeneratorArgs) -> Result<Generator> {
    if let Some(beta) = args.ewd {
        check_tuning("--ewd", beta)?;
        return Generator::ewd(beta);
    }
    if let Some(alpha) = args.dpd {
        check_tuning("--dpd", alpha)?;
        return Generator::dpd(alpha);
    }
    Ok(if args.l2 { Generator::L2 } else { Generator::Kl })
}
