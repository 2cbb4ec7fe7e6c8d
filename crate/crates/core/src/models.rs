//! Catalogue of the fifteen named models, a tagged container for fitted
//! models, and the comparison recipes.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ann::{predict_ann, select_architecture, train_ann, AnnModel, TrainConfig};
use crate::dataset::{Covariate, Covariates, EncodedRecord};
use crate::error::{Error, Result};
use crate::evalcv::{derive_seed, mse, Recipe};
use crate::linmod::{fit_ols, LinearFit, ModelSpec, ResponseTransform, Term};
use crate::mars::{fit_mars, predict_mars, MarsConfig, MarsModel, MarsResponse};
use crate::nlsfit::{aic_gaussian, fit_nls, starting_values, NlsFit, NlsForm, NlsOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelId {
    Lin1,
    Lin2,
    Lin3,
    LogLin1,
    LogLin2,
    LogLin3,
    NlsFull,
    NlsShifted,
    NlsStk,
    Mars1,
    Mars2,
    Mars3,
    Ann1,
    Ann2,
    Ann3,
}

impl ModelId {
    pub const ALL: [ModelId; 15] = [
        ModelId::Lin1,
        ModelId::Lin2,
        ModelId::Lin3,
        ModelId::LogLin1,
        ModelId::LogLin2,
        ModelId::LogLin3,
        ModelId::NlsFull,
        ModelId::NlsShifted,
        ModelId::NlsStk,
        ModelId::Mars1,
        ModelId::Mars2,
        ModelId::Mars3,
        ModelId::Ann1,
        ModelId::Ann2,
        ModelId::Ann3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Lin1 => "lin1",
            ModelId::Lin2 => "lin2",
            ModelId::Lin3 => "lin3",
            ModelId::LogLin1 => "loglin1",
            ModelId::LogLin2 => "loglin2",
            ModelId::LogLin3 => "loglin3",
            ModelId::NlsFull => "nls-full",
            ModelId::NlsShifted => "nls-shifted",
            ModelId::NlsStk => "nls-stk",
            ModelId::Mars1 => "mars1",
            ModelId::Mars2 => "mars2",
            ModelId::Mars3 => "mars3",
            ModelId::Ann1 => "ann1",
            ModelId::Ann2 => "ann2",
            ModelId::Ann3 => "ann3",
        }
    }

    pub fn valid_names() -> String {
        ModelId::ALL.map(ModelId::name).join(", ")
    }

    /// Covariate set shared by the numbered linear, MARS and network models.
    pub fn inputs(self) -> Vec<Term> {
        use Covariate::*;
        let main = |cs: &[Covariate]| cs.iter().map(|&c| Term::Main(c)).collect::<Vec<_>>();
        match self {
            ModelId::Lin1 | ModelId::LogLin1 | ModelId::Mars1 | ModelId::Ann1 => {
                main(&[StKb, StKs, Mol, Moist, Uw])
            }
            ModelId::Lin2 | ModelId::LogLin2 | ModelId::Mars2 | ModelId::Ann2 => {
                main(&[StK, Mol, Moist, Uw])
            }
            ModelId::Lin3 | ModelId::LogLin3 | ModelId::Mars3 | ModelId::Ann3 => {
                let mut t = main(&[StK, Mol, Moist, Uw]);
                t.push(Term::product(StK, Moist));
                t.push(Term::product(StK, Uw));
                t
            }
            ModelId::NlsFull | ModelId::NlsShifted | ModelId::NlsStk => {
                let form = self.nls_form().expect("nls id");
                let mut t: Vec<Term> = form
                    .exponent_terms()
                    .iter()
                    .map(|&(_, c)| Term::Main(c))
                    .collect();
                if form.linear_mol_index().is_some() {
                    t.push(Term::Main(Mol));
                }
                t
            }
        }
    }

    pub fn nls_form(self) -> Option<NlsForm> {
        match self {
            ModelId::NlsFull => Some(NlsForm::Full),
            ModelId::NlsShifted => Some(NlsForm::ShiftedMol),
            ModelId::NlsStk => Some(NlsForm::Stk),
            _ => None,
        }
    }

    pub fn linear_spec(self) -> Option<ModelSpec> {
        let transform = match self {
            ModelId::Lin1 | ModelId::Lin2 | ModelId::Lin3 => ResponseTransform::Identity,
            ModelId::LogLin1 | ModelId::LogLin2 | ModelId::LogLin3 => ResponseTransform::Log,
            _ => return None,
        };
        Some(ModelSpec::new(transform, self.inputs()).expect("catalogue spec is valid"))
    }

    pub fn is_ann(self) -> bool {
        matches!(self, ModelId::Ann1 | ModelId::Ann2 | ModelId::Ann3)
    }

    pub fn is_mars(self) -> bool {
        matches!(self, ModelId::Mars1 | ModelId::Mars2 | ModelId::Mars3)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        ModelId::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| {
                Error::InvalidSpec(format!(
                    "unknown model `{s}`; valid models: {}",
                    ModelId::valid_names()
                ))
            })
    }
}

impl Serialize for ModelId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ModelId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum FittedModel {
    Linear(LinearFit),
    Nls(NlsFit),
    Mars(MarsModel),
    Ann(AnnModel),
}

impl FittedModel {
    /// Prediction on the original ER scale.
    pub fn predict(&self, x: &Covariates) -> Result<f64> {
        match self {
            FittedModel::Linear(m) => Ok(m.predict(x)),
            FittedModel::Nls(m) => m.predict(x),
            FittedModel::Mars(m) => Ok(predict_mars(m, x)),
            FittedModel::Ann(m) => Ok(predict_ann(m, x).value),
        }
    }

    pub fn predict_all(&self, data: &[EncodedRecord]) -> Result<Vec<f64>> {
        data.iter().map(|r| self.predict(&r.x)).collect()
    }

    pub fn mse_on(&self, data: &[EncodedRecord]) -> Result<f64> {
        let pred = self.predict_all(data)?;
        let actual: Vec<f64> = data.iter().map(|r| r.er).collect();
        mse(&pred, &actual)
    }
}

/// On-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub model_id: ModelId,
    pub training_mse: f64,
    pub n: usize,
    #[serde(flatten)]
    pub model: FittedModel,
}

impl ModelFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<ModelFile> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub seed: u64,
    /// Initialisations per hidden size during architecture search.
    pub ann_restarts: usize,
    pub ann_validation_fraction: f64,
    pub ann_train: TrainConfig,
    pub nls: NlsOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            seed: 1,
            ann_restarts: 3,
            ann_validation_fraction: 0.25,
            ann_train: TrainConfig::default(),
            nls: NlsOptions::default(),
        }
    }
}

impl FitOptions {
    pub fn ann_seeds(&self) -> Vec<u64> {
        (0..self.ann_restarts.max(1) as u64)
            .map(|k| {
                if k == 0 {
                    self.seed
                } else {
                    derive_seed(self.seed, 1000 + k)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub file: ModelFile,
    /// Human-readable fit summary.
    pub summary: String,
}

pub fn mars_config(id: ModelId) -> Option<MarsConfig> {
    id.is_mars()
        .then(|| MarsConfig::new(id.inputs(), MarsResponse::Log))
}

/// Fits model `id` on `data`.
pub fn fit_model(id: ModelId, data: &[EncodedRecord], opts: &FitOptions) -> Result<FitReport> {
    let mut summary = String::new();
    let model = if let Some(spec) = id.linear_spec() {
        let fit = fit_ols(data, &spec)?;
        let _ = write!(summary, "{fit}");
        FittedModel::Linear(fit)
    } else if let Some(form) = id.nls_form() {
        let start = starting_values(data, form)?;
        let fit = fit_nls(form, data, &start, &opts.nls)?;
        let aic = aic_gaussian(&fit)?;
        let _ = write!(summary, "{fit}");
        let _ = writeln!(summary, "AIC: {:.2} (df {})", aic.aic, aic.df);
        FittedModel::Nls(fit)
    } else if let Some(cfg) = mars_config(id) {
        let m = fit_mars(data, &cfg)?;
        let _ = write!(summary, "{m}");
        FittedModel::Mars(m)
    } else {
        let sel = select_architecture(
            data,
            &id.inputs(),
            &opts.ann_seeds(),
            opts.ann_validation_fraction,
            &opts.ann_train,
            None,
        )?;
        let _ = writeln!(summary, "hidden units: {}", sel.hidden_size);
        for (h, v) in &sel.validation_mse {
            match v {
                Some(v) => writeln!(summary, "  h = {h:>2}: validation MSE {v:.2}"),
                None => writeln!(summary, "  h = {h:>2}: failed"),
            }
            .ok();
        }
        FittedModel::Ann(sel.model)
    };
    let training_mse = model.mse_on(data)?;
    let _ = writeln!(summary, "Training MSE: {training_mse:.2}");
    Ok(FitReport {
        file: ModelFile {
            model_id: id,
            training_mse,
            n: data.len(),
            model,
        },
        summary,
    })
}

/// How a network recipe chooses its hidden size inside the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiddenPlan {
    Fixed(usize),
    /// Architecture search on every training split.
    SearchPerRepeat,
}

/// Fit-then-predict recipe for one catalogue model.
#[derive(Debug, Clone)]
pub struct ModelRecipe {
    pub label: String,
    pub id: ModelId,
    pub hidden: HiddenPlan,
    pub opts: FitOptions,
}

impl ModelRecipe {
    pub fn new(label: &str, id: ModelId) -> Self {
        ModelRecipe {
            label: label.to_string(),
            id,
            hidden: HiddenPlan::SearchPerRepeat,
            opts: FitOptions::default(),
        }
    }
}

impl Recipe for ModelRecipe {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn fit_predict(
        &self,
        train: &[EncodedRecord],
        validation: &[EncodedRecord],
        seed: u64,
    ) -> Result<Vec<f64>> {
        let model = match (self.id.is_ann(), self.hidden) {
            (true, HiddenPlan::Fixed(h)) => {
                let cfg = TrainConfig {
                    seed,
                    hidden_size: h,
                    ..self.opts.ann_train.clone()
                };
                FittedModel::Ann(train_ann(train, &self.id.inputs(), &cfg)?)
            }
            _ => {
                let opts = FitOptions {
                    seed,
                    ann_restarts: 1,
                    ..self.opts.clone()
                };
                fit_model(self.id, train, &opts)?.file.model
            }
        };
        model.predict_all(validation)
    }
}

/// The four finalists: log-linear with interactions, the st_k exponential
/// form, MARS2 and ANN2. Unless `search_per_repeat`, ANN2's hidden size is
/// chosen once on all of `data` with `seed`.
pub fn finalist_recipes(
    data: &[EncodedRecord],
    seed: u64,
    search_per_repeat: bool,
) -> Result<Vec<Box<dyn Recipe>>> {
    let hidden = if search_per_repeat {
        HiddenPlan::SearchPerRepeat
    } else {
        let opts = FitOptions {
            seed,
            ..FitOptions::default()
        };
        let sel = select_architecture(
            data,
            &ModelId::Ann2.inputs(),
            &opts.ann_seeds(),
            opts.ann_validation_fraction,
            &opts.ann_train,
            None,
        )?;
        HiddenPlan::Fixed(sel.hidden_size)
    };
    let mut ann = ModelRecipe::new("ANN2", ModelId::Ann2);
    ann.hidden = hidden;
    Ok(vec![
        Box::new(ModelRecipe::new("Lin", ModelId::LogLin3)),
        Box::new(ModelRecipe::new("NonLin3", ModelId::NlsStk)),
        Box::new(ModelRecipe::new("MARS2", ModelId::Mars2)),
        Box::new(ann),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for id in ModelId::ALL {
            assert_eq!(id.name().parse::<ModelId>().unwrap(), id);
        }
        let err = "frobnicate".parse::<ModelId>().unwrap_err().to_string();
        for id in ModelId::ALL {
            assert!(err.contains(id.name()));
        }
    }

    #[test]
    fn input_counts() {
        assert_eq!(ModelId::Ann1.inputs().len(), 5);
        assert_eq!(ModelId::Ann2.inputs().len(), 4);
        assert_eq!(ModelId::Ann3.inputs().len(), 6);
        assert_eq!(ModelId::NlsStk.inputs().len(), 4);
        assert_eq!(ModelId::NlsFull.inputs().len(), 5);
    }
}
