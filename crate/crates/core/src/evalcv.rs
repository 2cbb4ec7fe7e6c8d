//! Metrics, seeded splits and the repeated holdout comparison harness.

use std::fmt;
use std::io::Write;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::EncodedRecord;
use crate::error::{Error, Result};

/// Mean squared error.
pub fn mse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput("mse"));
    }
    let ss: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok(ss / predicted.len() as f64)
}

/// Mixes a master seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_fraction: f64,
    /// Sorted ascending.
    pub train: Vec<usize>,
    /// Sorted ascending.
    pub validation: Vec<usize>,
}

pub fn random_split(n: usize, train_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    if n < 4 {
        return Err(Error::InvalidSplit(format!("n = {n} is below 4")));
    }
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidSplit(format!(
            "{n_train} of {n} rows in the training side"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut validation = idx.split_off(n_train);
    idx.sort_unstable();
    validation.sort_unstable();
    Ok(SplitPlan {
        seed,
        train_fraction,
        train: idx,
        validation,
    })
}

/// A self-contained fit-then-predict procedure scored by the harness.
/// Predictions must be on the original ER scale.
pub trait Recipe: Send + Sync {
    fn name(&self) -> String;
    fn fit_predict(
        &self,
        train: &[EncodedRecord],
        validation: &[EncodedRecord],
        seed: u64,
    ) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOptions {
    pub repeats: usize,
    pub train_fraction: f64,
    pub master_seed: u64,
    /// A recipe failing on more than this share of repeats aborts the run.
    pub max_failure_fraction: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            repeats: 100,
            train_fraction: 0.75,
            master_seed: 1,
            max_failure_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub model_names: Vec<String>,
    pub repeats: usize,
    /// `mse[r][m]`; `None` where recipe `m` failed on repeat `r`.
    pub mse: Vec<Vec<Option<f64>>>,
    /// Over the non-missing cells of each column.
    pub means: Vec<f64>,
    pub missing: Vec<usize>,
    /// Model indices by ascending mean; ties keep recipe order.
    pub ranking: Vec<usize>,
}

impl CvReport {
    pub fn from_matrix(model_names: Vec<String>, mse: Vec<Vec<Option<f64>>>) -> CvReport {
        let m = model_names.len();
        let mut means = vec![0.0; m];
        let mut missing = vec![0; m];
        for j in 0..m {
            let col: Vec<f64> = mse.iter().filter_map(|row| row[j]).collect();
            missing[j] = mse.len() - col.len();
            means[j] = if col.is_empty() {
                f64::NAN
            } else {
                col.iter().sum::<f64>() / col.len() as f64
            };
        }
        let mut ranking: Vec<usize> = (0..m).collect();
        ranking.sort_by(|&a, &b| means[a].total_cmp(&means[b]));
        CvReport {
            model_names,
            repeats: mse.len(),
            mse,
            means,
            missing,
            ranking,
        }
    }

    /// 1-based rank of each model.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.model_names.len()];
        for (pos, &m) in self.ranking.iter().enumerate() {
            r[m] = pos + 1;
        }
        r
    }

    /// Rows are repeats, columns models, followed by `mean`, `missing` and
    /// `rank` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["repeat".to_string()];
        header.extend(self.model_names.iter().cloned());
        out.write_record(&header)?;
        for (r, row) in self.mse.iter().enumerate() {
            let mut rec = vec![r.to_string()];
            rec.extend(
                row.iter()
                    .map(|c| c.map(|v| v.to_string()).unwrap_or_default()),
            );
            out.write_record(&rec)?;
        }
        let mut rec = vec!["mean".to_string()];
        rec.extend(self.means.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
        let mut rec = vec!["missing".to_string()];
        rec.extend(self.missing.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
        let mut rec = vec!["rank".to_string()];
        rec.extend(self.ranks().iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
        out.flush().map_err(|e| Error::Io {
            path: "<cv report>".into(),
            source: e,
        })?;
        Ok(())
    }
}

impl fmt::Display for CvReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:>14} {:>8} {:>5}",
            "Model", "Mean MSE", "Missing", "Rank"
        )?;
        let ranks = self.ranks();
        for (j, name) in self.model_names.iter().enumerate() {
            writeln!(
                f,
                "{:<12} {:>14.2} {:>8} {:>5}",
                name, self.means[j], self.missing[j], ranks[j]
            )?;
        }
        write!(f, "({} repeats)", self.repeats)
    }
}

/// Repeated random holdout. Repeat `r` splits with `derive_seed(master_seed, r)`
/// and every recipe sees that split; recipe `m` gets
/// `derive_seed(split_seed, m + 1)` for its own randomness.
pub fn cross_validate(
    data: &[EncodedRecord],
    recipes: &[Box<dyn Recipe>],
    opts: &CvOptions,
) -> Result<CvReport> {
    if recipes.is_empty() {
        return Err(Error::EmptyInput("cross-validation recipes"));
    }
    if opts.repeats == 0 {
        return Err(Error::InvalidSplit("repeats must be at least 1".into()));
    }
    let names: Vec<String> = recipes.iter().map(|r| r.name()).collect();
    let rows: Vec<Vec<Option<f64>>> = (0..opts.repeats)
        .into_par_iter()
        .map(|r| run_repeat(data, recipes, opts, r))
        .collect::<Result<Vec<_>>>()?;

    let report = CvReport::from_matrix(names, rows);
    for (j, &miss) in report.missing.iter().enumerate() {
        if miss as f64 > opts.max_failure_fraction * opts.repeats as f64 {
            return Err(Error::RecipeFailed {
                recipe: report.model_names[j].clone(),
                failures: miss,
                repeats: opts.repeats,
            });
        }
    }
    Ok(report)
}

/// One row of the harness; exposed so single repeats can be rerun in isolation.
pub fn run_repeat(
    data: &[EncodedRecord],
    recipes: &[Box<dyn Recipe>],
    opts: &CvOptions,
    repeat: usize,
) -> Result<Vec<Option<f64>>> {
    let seed = derive_seed(opts.master_seed, repeat as u64);
    let split = random_split(data.len(), opts.train_fraction, seed)?;
    let train: Vec<EncodedRecord> = split.train.iter().map(|&i| data[i]).collect();
    let valid: Vec<EncodedRecord> = split.validation.iter().map(|&i| data[i]).collect();
    let actual: Vec<f64> = valid.iter().map(|r| r.er).collect();
    Ok(recipes
        .iter()
        .enumerate()
        .map(|(m, recipe)| {
            let res = recipe
                .fit_predict(&train, &valid, derive_seed(seed, m as u64 + 1))
                .and_then(|p| mse(&p, &actual))
                .and_then(|v| {
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::Evaluation("non-finite validation MSE".into()))
                    }
                });
            match res {
                Ok(v) => Some(v),
                Err(e) => {
                    warn!("repeat {repeat}, {}: {e}", recipe.name());
                    None
                }
            }
        })
        .collect())
}
