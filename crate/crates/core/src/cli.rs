//! Command-line front end.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data or model errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{self, EncodedRecord, SoilRecord, SoilType};
use crate::error::{Error, Result};
use crate::evalcv::{cross_validate, mse, CvOptions};
use crate::linmod::{self, boxcox_lambda, DiagnosticsBundle, LambdaGrid};
use crate::models::{finalist_recipes, fit_model, FitOptions, FittedModel, ModelFile, ModelId};
use crate::svg;

pub const DATA_ENV: &str = "SOIL_ER_DATA";

#[derive(Debug, Parser)]
#[command(
    name = "soilres",
    version,
    about = "Soil electrical resistivity models"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Args)]
struct DataArg {
    /// Soil data CSV (columns ST, Mol, Moist, Uw, ER).
    #[arg(long, env = DATA_ENV)]
    data: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Descriptive statistics of the covariates and ER.
    Summary {
        #[command(flatten)]
        data: DataArg,
        /// Also write the statistics as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a named model and save it as JSON.
    Fit {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, value_parser = parse_model)]
        model: ModelId,
        /// Model file; defaults to `<model>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Score a CSV of covariates with a saved model.
    Predict {
        #[command(flatten)]
        data: DataArg,
        /// Model file written by `fit`.
        #[arg(long)]
        model: PathBuf,
        /// Predictions CSV; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write plot data for a fitted model.
    Diagnose {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, value_parser = parse_model)]
        model: ModelId,
        /// Output directory.
        #[arg(long, default_value = "diagnostics")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Histogram bins.
        #[arg(long, default_value_t = 20)]
        bins: usize,
        /// Also render SVG plots.
        #[arg(long)]
        svg: bool,
    },
    /// Repeated 75/25 holdout comparison of the four finalist models.
    Compare {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value_t = 100)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Report CSV.
        #[arg(long, default_value = "cv_report.csv")]
        out: PathBuf,
        /// Search the network architecture on every training split.
        #[arg(long)]
        research_arch_per_repeat: bool,
    },
}

fn parse_model(s: &str) -> std::result::Result<ModelId, String> {
    s.parse::<ModelId>().map_err(|_| {
        format!(
            "unknown model `{s}`; valid models: {}",
            ModelId::valid_names()
        )
    })
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli.verb, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(io_err(path))
}

fn write_string(path: &Path, s: &str) -> Result<()> {
    fs::write(path, s).map_err(io_err(path))
}

fn load(path: &Path) -> Result<(Vec<SoilRecord>, Vec<EncodedRecord>)> {
    let records = dataset::parse_csv_path(path)?;
    let data = dataset::encode(&records);
    if data.is_empty() {
        return Err(Error::EmptyInput("no complete rows in the data file"));
    }
    Ok((records, data))
}

fn execute(verb: Verb, out: &mut dyn Write) -> Result<()> {
    let stdout_err = |e| Error::Io {
        path: "<stdout>".into(),
        source: e,
    };
    match verb {
        Verb::Summary { data, out: csv } => {
            let records = dataset::parse_csv_path(&data.data)?;
            let table = dataset::summarize(&records)?;
            let counts = dataset::soil_type_counts(records.iter().map(|r| &r.soil_type));
            let complete = dataset::encode(&records);
            let ers: Vec<f64> = complete.iter().map(|r| r.er).collect();
            writeln!(out, "{table}").map_err(stdout_err)?;
            writeln!(out, "rows: {}, complete: {}", records.len(), complete.len())
                .map_err(stdout_err)?;
            writeln!(out, "ER skewness: {:.4}", dataset::skewness(&ers)).map_err(stdout_err)?;
            for (st, c) in SoilType::ALL.iter().zip(counts) {
                writeln!(out, "{:<8} {c}", st.label()).map_err(stdout_err)?;
            }
            if let Some(p) = csv {
                table.write_csv(create(&p)?)?;
            }
        }
        Verb::Fit {
            data,
            model,
            out: path,
            seed,
        } => {
            let (_, data) = load(&data.data)?;
            let opts = FitOptions {
                seed,
                ..FitOptions::default()
            };
            let report = fit_model(model, &data, &opts)?;
            write!(out, "{}", report.summary).map_err(stdout_err)?;
            let path = path.unwrap_or_else(|| PathBuf::from(format!("{model}.json")));
            write_string(&path, &report.file.to_json()?)?;
            writeln!(out, "model written to {}", path.display()).map_err(stdout_err)?;
        }
        Verb::Predict {
            data,
            model,
            out: path,
        } => {
            let text = fs::read_to_string(&model).map_err(io_err(&model))?;
            let file = ModelFile::from_json(&text)?;
            let records = dataset::parse_csv_path(&data.data)?;
            let rows = dataset::encode_covariates(&records);
            let mut pred = Vec::with_capacity(rows.len());
            for (_, x, _) in &rows {
                pred.push(file.model.predict(x)?);
            }
            let mut buf = Vec::new();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record(["row", "ST", "Mol", "Moist", "Uw", "predicted"])?;
                for ((i, x, _), p) in rows.iter().zip(&pred) {
                    w.write_record([
                        (i + 1).to_string(),
                        x.soil_type.label().to_string(),
                        x.mol.to_string(),
                        x.moist.to_string(),
                        x.uw.to_string(),
                        p.to_string(),
                    ])?;
                }
                w.flush().map_err(stdout_err)?;
            }
            match &path {
                Some(p) => fs::write(p, &buf).map_err(io_err(p))?,
                None => out.write_all(&buf).map_err(stdout_err)?,
            }
            let (p, a): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .zip(&pred)
                .filter_map(|((_, _, er), p)| er.map(|a| (*p, a)))
                .unzip();
            if !a.is_empty() {
                writeln!(out, "MSE: {} ({} rows with ER)", mse(&p, &a)?, a.len())
                    .map_err(stdout_err)?;
            }
        }
        Verb::Diagnose {
            data,
            model,
            out: dir,
            seed,
            bins,
            svg: draw,
        } => {
            let (_, data) = load(&data.data)?;
            let opts = FitOptions {
                seed,
                ..FitOptions::default()
            };
            let report = fit_model(model, &data, &opts)?;
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            let bundle = bundle_for(&report.file.model, &data)?;
            bundle.write_dir(&dir)?;
            let ers: Vec<f64> = data.iter().map(|r| r.er).collect();
            let hist = dataset::histogram(&ers, bins)?;
            hist.write_csv(create(&dir.join("histogram.csv"))?)?;
            if let (Some(spec), FittedModel::Linear(fit)) =
                (model.linear_spec(), &report.file.model)
            {
                if spec.response_transform == linmod::ResponseTransform::Identity {
                    let bc = boxcox_lambda(&data, &fit.spec, &LambdaGrid::default())?;
                    let mut w = csv::Writer::from_writer(create(&dir.join("boxcox.csv"))?);
                    w.write_record(["lambda", "loglik"])?;
                    for (l, v) in bc.lambda_grid.iter().zip(&bc.profile_loglik) {
                        w.write_record([l.to_string(), v.to_string()])?;
                    }
                    w.flush().map_err(io_err(&dir))?;
                    writeln!(out, "Box-Cox lambda: {}", bc.lambda_hat).map_err(stdout_err)?;
                }
            }
            if draw {
                let name = model.name();
                let plots = [
                    (
                        "residual_vs_fitted.svg",
                        svg::scatter(&bundle.residual_vs_fitted, name, "fitted", "residual"),
                    ),
                    (
                        "qq.svg",
                        svg::scatter(&bundle.qq, name, "normal quantile", "standardized residual"),
                    ),
                    (
                        "predicted_vs_actual.svg",
                        svg::scatter(
                            &bundle.predicted_vs_actual,
                            name,
                            "predicted ER",
                            "actual ER",
                        ),
                    ),
                    ("histogram.svg", svg::histogram(&hist, "ER", "ER")),
                ];
                for (file, body) in plots {
                    write_string(&dir.join(file), &body)?;
                }
            }
            write!(out, "{}", report.summary).map_err(stdout_err)?;
            writeln!(out, "diagnostics written to {}", dir.display()).map_err(stdout_err)?;
        }
        Verb::Compare {
            data,
            repeats,
            seed,
            out: path,
            research_arch_per_repeat,
        } => {
            let (_, data) = load(&data.data)?;
            let recipes = finalist_recipes(&data, seed, research_arch_per_repeat)?;
            let opts = CvOptions {
                repeats,
                master_seed: seed,
                ..CvOptions::default()
            };
            let report = cross_validate(&data, &recipes, &opts)?;
            report.write_csv(create(&path)?)?;
            writeln!(out, "{report}").map_err(stdout_err)?;
            writeln!(out, "report written to {}", path.display()).map_err(stdout_err)?;
        }
    }
    Ok(())
}

/// Residual diagnostics for any model. Linear fits use their own scale;
/// other models use ER-scale residuals.
fn bundle_for(model: &FittedModel, data: &[EncodedRecord]) -> Result<DiagnosticsBundle> {
    if let FittedModel::Linear(fit) = model {
        return Ok(linmod::diagnostics(fit, data));
    }
    let predicted = model.predict_all(data)?;
    let actual: Vec<f64> = data.iter().map(|r| r.er).collect();
    let residuals: Vec<f64> = actual.iter().zip(&predicted).map(|(a, p)| a - p).collect();
    let params = match model {
        FittedModel::Nls(m) => m.beta.len(),
        FittedModel::Mars(m) => m.term_count() + 1,
        FittedModel::Ann(m) => m.shape().param_count(),
        FittedModel::Linear(_) => unreachable!(),
    };
    Ok(DiagnosticsBundle::from_parts(
        &predicted,
        &residuals,
        data.len().saturating_sub(params),
        &predicted,
        &actual,
    ))
}
