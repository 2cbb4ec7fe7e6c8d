//! Ordinary least squares with interaction terms, Box-Cox response
//! transformation and residual diagnostics.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::dataset::{Covariate, Covariates, EncodedRecord};
use crate::error::{Error, Result};

/// A predictor column: an encoded covariate or the product of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Main(Covariate),
    Product(Covariate, Covariate),
}

impl Term {
    /// Builds a product term with its factors in canonical order.
    pub fn product(a: Covariate, b: Covariate) -> Term {
        if a <= b {
            Term::Product(a, b)
        } else {
            Term::Product(b, a)
        }
    }

    pub fn eval(&self, x: &Covariates) -> f64 {
        match *self {
            Term::Main(c) => x.get(c),
            Term::Product(a, b) => x.get(a) * x.get(b),
        }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Main(c) => write!(f, "{c}"),
            Term::Product(a, b) => write!(f, "{a}:{b}"),
        }
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Term> {
        let bad = || Error::InvalidSpec(format!("unknown term `{s}`"));
        match s.split_once([':', '*']) {
            Some((a, b)) => {
                let a = Covariate::from_name(a).ok_or_else(bad)?;
                let b = Covariate::from_name(b).ok_or_else(bad)?;
                Ok(Term::product(a, b))
            }
            None => Covariate::from_name(s).map(Term::Main).ok_or_else(bad),
        }
    }
}

impl Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Transformation applied to ER before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "lambda", rename_all = "snake_case")]
pub enum ResponseTransform {
    Identity,
    Log,
    BoxCox(f64),
}

impl ResponseTransform {
    pub fn apply(&self, y: f64) -> f64 {
        match *self {
            ResponseTransform::Identity => y,
            ResponseTransform::Log => y.ln(),
            ResponseTransform::BoxCox(l) => boxcox(y, l),
        }
    }

    /// Maps a prediction on the transformed scale back to ER.
    pub fn inverse(&self, z: f64) -> f64 {
        match *self {
            ResponseTransform::Identity => z,
            ResponseTransform::Log => z.exp(),
            ResponseTransform::BoxCox(l) if l.abs() < LAMBDA_ZERO => z.exp(),
            ResponseTransform::BoxCox(l) => (l * z + 1.0).max(0.0).powf(1.0 / l),
        }
    }
}

const LAMBDA_ZERO: f64 = 1e-9;

/// `(y^l - 1) / l`, or `ln y` at `l = 0`.
pub fn boxcox(y: f64, lambda: f64) -> f64 {
    if lambda.abs() < LAMBDA_ZERO {
        y.ln()
    } else {
        (y.powf(lambda) - 1.0) / lambda
    }
}

/// Response transform plus the ordered predictor terms; an intercept is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub response_transform: ResponseTransform,
    pub terms: Vec<Term>,
}

impl ModelSpec {
    pub fn new(response_transform: ResponseTransform, terms: Vec<Term>) -> Result<Self> {
        let spec = ModelSpec {
            response_transform,
            terms,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.terms.iter().enumerate() {
            if let Term::Product(a, b) = t {
                if a == b {
                    return Err(Error::InvalidSpec(format!("term `{t}` squares a variable")));
                }
            }
            if self.terms[..i].contains(t) {
                return Err(Error::InvalidSpec(format!("duplicate term `{t}`")));
            }
        }
        Ok(())
    }

    /// Column names of the design matrix, intercept first.
    pub fn column_names(&self) -> Vec<String> {
        std::iter::once("(Intercept)".to_string())
            .chain(self.terms.iter().map(Term::name))
            .collect()
    }

    pub fn design_matrix<'a, I>(&self, rows: I) -> DMatrix<f64>
    where
        I: IntoIterator<Item = &'a Covariates>,
    {
        let rows: Vec<&Covariates> = rows.into_iter().collect();
        let p = self.terms.len() + 1;
        DMatrix::from_fn(rows.len(), p, |i, j| {
            if j == 0 {
                1.0
            } else {
                self.terms[j - 1].eval(rows[i])
            }
        })
    }
}

/// Householder QR of a full-rank design, reusable across responses.
pub struct LeastSquares {
    qr: nalgebra::linalg::QR<f64, nalgebra::Dyn, nalgebra::Dyn>,
    r: DMatrix<f64>,
    n: usize,
    p: usize,
}

impl LeastSquares {
    /// Factorizes `design` (n x p). Fails when n <= p or a column lies in
    /// the span of the columns before it.
    pub fn new(design: &DMatrix<f64>, names: &[String]) -> Result<Self> {
        let (n, p) = design.shape();
        if n <= p {
            return Err(Error::InsufficientData { n, params: p });
        }
        let qr = design.clone().qr();
        let r = qr.r();
        for j in 0..p {
            let norm = design.column(j).norm();
            if norm == 0.0 || r[(j, j)].abs() <= 1e-10 * norm {
                return Err(Error::SingularDesign {
                    column: names.get(j).cloned().unwrap_or_else(|| format!("#{j}")),
                });
            }
        }
        Ok(LeastSquares { qr, r, n, p })
    }

    pub fn solve(&self, y: &[f64]) -> DVector<f64> {
        let mut qty = DVector::from_column_slice(y);
        self.qr.q_tr_mul(&mut qty);
        let head = qty.rows(0, self.p).into_owned();
        self.r
            .solve_upper_triangular(&head)
            .expect("triangular factor checked non-singular")
    }

    /// Residual sum of squares of the projection of `y`.
    pub fn rss(&self, y: &[f64]) -> f64 {
        let mut qty = DVector::from_column_slice(y);
        self.qr.q_tr_mul(&mut qty);
        qty.rows(self.p, self.n - self.p).norm_squared()
    }

    /// `(R^T R)^{-1}`, the unscaled coefficient covariance.
    pub fn unscaled_covariance(&self) -> DMatrix<f64> {
        let rinv = self
            .r
            .solve_upper_triangular(&DMatrix::identity(self.p, self.p))
            .expect("triangular factor checked non-singular");
        &rinv * rinv.transpose()
    }
}

/// Least-squares fit of a response on a prepared design with an intercept
/// in column 0.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsSolution {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub r2: f64,
    pub adj_r2: f64,
}

pub fn ols_design(design: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<OlsSolution> {
    let (n, cols) = design.shape();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: y.len(),
        });
    }
    let ls = LeastSquares::new(design, names)?;
    let beta = ls.solve(y);
    let fitted_v = design * &beta;
    let fitted: Vec<f64> = fitted_v.iter().copied().collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let k = cols - 1;
    let df = (n - k - 1) as f64;
    let adj_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / df;

    let sigma2 = rss / df;
    let cov = ls.unscaled_covariance();
    let std_errors: Vec<f64> = (0..cols).map(|j| (sigma2 * cov[(j, j)]).sqrt()).collect();
    let t_values: Vec<f64> = beta.iter().zip(&std_errors).map(|(b, s)| b / s).collect();
    let tdist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p_values = t_values
        .iter()
        .map(|t| {
            if t.is_finite() {
                2.0 * tdist.sf(t.abs())
            } else if t.is_nan() {
                f64::NAN
            } else {
                0.0
            }
        })
        .collect();

    Ok(OlsSolution {
        names: names.to_vec(),
        coefficients: beta.iter().copied().collect(),
        std_errors,
        t_values,
        p_values,
        fitted,
        residuals,
        rss,
        r2,
        adj_r2,
    })
}

/// A fitted linear model on the (possibly transformed) response scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub spec: ModelSpec,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    #[serde(skip)]
    pub fitted: Vec<f64>,
    pub rss: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub n: usize,
}

impl LinearFit {
    /// Number of non-intercept terms.
    pub fn term_count(&self) -> usize {
        self.spec.terms.len()
    }

    pub fn residual_std_error(&self) -> f64 {
        (self.rss / (self.n - self.term_count() - 1) as f64).sqrt()
    }

    /// Linear predictor on the transformed scale.
    pub fn linear_predictor(&self, x: &Covariates) -> f64 {
        self.coefficients[0]
            + self
                .spec
                .terms
                .iter()
                .zip(&self.coefficients[1..])
                .map(|(t, b)| b * t.eval(x))
                .sum::<f64>()
    }

    /// Prediction on the original ER scale.
    pub fn predict(&self, x: &Covariates) -> f64 {
        self.spec
            .response_transform
            .inverse(self.linear_predictor(x))
    }
}

impl fmt::Display for LinearFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} {:>14} {:>12} {:>9} {:>10}",
            "term", "estimate", "std.error", "t", "p"
        )?;
        for j in 0..self.names.len() {
            writeln!(
                f,
                "{:<16} {:>14.6} {:>12.6} {:>9.3} {:>10.4}",
                self.names[j],
                self.coefficients[j],
                self.std_errors[j],
                self.t_values[j],
                self.p_values[j]
            )?;
        }
        writeln!(
            f,
            "n = {}, residual std. error = {:.4}, R^2 = {:.4}, adjusted R^2 = {:.4}",
            self.n,
            self.residual_std_error(),
            self.r2,
            self.adj_r2
        )
    }
}

pub fn fit_ols(data: &[EncodedRecord], spec: &ModelSpec) -> Result<LinearFit> {
    spec.validate()?;
    let n = data.len();
    let p = spec.terms.len();
    if n <= p + 1 {
        return Err(Error::InsufficientData { n, params: p + 1 });
    }
    let y: Vec<f64> = data
        .iter()
        .map(|r| spec.response_transform.apply(r.er))
        .collect();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "transformed response is not finite; ER must be positive".into(),
        ));
    }
    let design = spec.design_matrix(data.iter().map(|r| &r.x));
    let sol = ols_design(&design, &y, &spec.column_names())?;
    Ok(LinearFit {
        spec: spec.clone(),
        names: sol.names,
        coefficients: sol.coefficients,
        std_errors: sol.std_errors,
        t_values: sol.t_values,
        p_values: sol.p_values,
        residuals: sol.residuals,
        fitted: sol.fitted,
        rss: sol.rss,
        r2: sol.r2,
        adj_r2: sol.adj_r2,
        n,
    })
}

/// Evenly spaced lambda values `lo, lo + step, ..., hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid {
            lo: -2.0,
            hi: 2.0,
            step: 0.01,
        }
    }
}

impl LambdaGrid {
    pub fn values(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.hi < self.lo {
            return Vec::new();
        }
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|k| {
                let v = self.lo + k as f64 * self.step;
                // Snap to the step lattice so lambda = 0 is hit exactly.
                let snapped = (v / self.step).round() * self.step;
                if (snapped - v).abs() < 1e-9 {
                    snapped
                } else {
                    v
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxCoxResult {
    pub lambda_grid: Vec<f64>,
    pub profile_loglik: Vec<f64>,
    pub lambda_hat: f64,
}

/// Profile log-likelihood of the Box-Cox parameter over a grid, using the
/// terms of `spec` (its response transform is ignored).
pub fn boxcox_lambda(
    data: &[EncodedRecord],
    spec: &ModelSpec,
    grid: &LambdaGrid,
) -> Result<BoxCoxResult> {
    spec.validate()?;
    let lambdas = grid.values();
    if lambdas.is_empty() {
        return Err(Error::EmptyInput("lambda grid"));
    }
    if let Some(bad) = data.iter().find(|r| !(r.er > 0.0)) {
        return Err(Error::Domain(format!(
            "Box-Cox needs strictly positive responses, found {}",
            bad.er
        )));
    }
    let n = data.len();
    let design = spec.design_matrix(data.iter().map(|r| &r.x));
    let ls = LeastSquares::new(&design, &spec.column_names())?;
    let sum_log: f64 = data.iter().map(|r| r.er.ln()).sum();
    let nf = n as f64;

    let profile_loglik: Vec<f64> = lambdas
        .iter()
        .map(|&l| {
            let z: Vec<f64> = data.iter().map(|r| boxcox(r.er, l)).collect();
            let rss = ls.rss(&z);
            -0.5 * nf * (rss / nf).ln() + (l - 1.0) * sum_log
        })
        .collect();

    let best =
        profile_loglik.iter().enumerate().fold(
            0,
            |best, (i, v)| if *v > profile_loglik[best] { i } else { best },
        );
    Ok(BoxCoxResult {
        lambda_hat: lambdas[best],
        lambda_grid: lambdas,
        profile_loglik,
    })
}

/// Plot-ready residual diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsBundle {
    /// (fitted, residual) on the modelling scale.
    pub residual_vs_fitted: Vec<(f64, f64)>,
    /// (standard normal quantile, sorted standardized residual).
    pub qq: Vec<(f64, f64)>,
    /// (predicted, actual) on the ER scale.
    pub predicted_vs_actual: Vec<(f64, f64)>,
}

impl DiagnosticsBundle {
    /// Builds the bundle from model-scale fitted values and residuals;
    /// residuals are standardized by `sqrt(rss / residual_df)`.
    pub fn from_parts(
        fitted: &[f64],
        residuals: &[f64],
        residual_df: usize,
        predicted: &[f64],
        actual: &[f64],
    ) -> Self {
        let n = residuals.len();
        let rss: f64 = residuals.iter().map(|r| r * r).sum();
        let sigma = (rss / residual_df.max(1) as f64).sqrt();
        let mut standardized: Vec<f64> = residuals
            .iter()
            .map(|r| if sigma > 0.0 { r / sigma } else { 0.0 })
            .collect();
        standardized.sort_by(f64::total_cmp);
        let normal = Normal::standard();
        let qq = standardized
            .into_iter()
            .enumerate()
            .map(|(i, s)| (normal.inverse_cdf((i as f64 + 0.5) / n as f64), s))
            .collect();
        DiagnosticsBundle {
            residual_vs_fitted: fitted
                .iter()
                .copied()
                .zip(residuals.iter().copied())
                .collect(),
            qq,
            predicted_vs_actual: predicted
                .iter()
                .copied()
                .zip(actual.iter().copied())
                .collect(),
        }
    }

    /// Pearson correlation of the Q-Q pairs.
    pub fn qq_correlation(&self) -> f64 {
        pearson(&self.qq)
    }

    /// Writes `residual_vs_fitted.csv`, `qq.csv` and `predicted_vs_actual.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        write_pairs(
            &dir.join("residual_vs_fitted.csv"),
            ("fitted", "residual"),
            &self.residual_vs_fitted,
        )?;
        write_pairs(&dir.join("qq.csv"), ("theoretical", "sample"), &self.qq)?;
        write_pairs(
            &dir.join("predicted_vs_actual.csv"),
            ("predicted", "actual"),
            &self.predicted_vs_actual,
        )
    }
}

pub(crate) fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

fn write_pairs(path: &Path, header: (&str, &str), pairs: &[(f64, f64)]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record([header.0, header.1])?;
    for (a, b) in pairs {
        w.write_record([a.to_string(), b.to_string()])?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Diagnostics for a linear fit; `data` must be the rows it was fitted on.
pub fn diagnostics(fit: &LinearFit, data: &[EncodedRecord]) -> DiagnosticsBundle {
    let predicted: Vec<f64> = data.iter().map(|r| fit.predict(&r.x)).collect();
    let actual: Vec<f64> = data.iter().map(|r| r.er).collect();
    DiagnosticsBundle::from_parts(
        &fit.fitted,
        &fit.residuals,
        fit.n - fit.term_count() - 1,
        &predicted,
        &actual,
    )
}

/// Fixed-width coefficient table.
pub fn write_coefficient_table<W: Write>(fit: &LinearFit, mut out: W) -> std::io::Result<()> {
    write!(out, "{fit}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SoilType;

    fn rec(mol: f64, moist: f64, uw: f64, er: f64) -> EncodedRecord {
        EncodedRecord {
            x: Covariates::new(SoilType::K100, mol, moist, uw),
            er,
        }
    }

    #[test]
    fn exact_line_recovered() {
        let data: Vec<_> = (0..5)
            .map(|i| rec(i as f64, 0.0, 0.0, 1.0 + 2.0 * i as f64))
            .collect();
        let spec = ModelSpec::new(
            ResponseTransform::Identity,
            vec![Term::Main(Covariate::Mol)],
        )
        .unwrap();
        let fit = fit_ols(&data, &spec).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_names_column() {
        // st_k is constant 1 for pure kaolin and duplicates the intercept.
        let data: Vec<_> = (0..6)
            .map(|i| rec(i as f64, 1.0, 1.0, 3.0 + i as f64))
            .collect();
        let spec = ModelSpec::new(
            ResponseTransform::Identity,
            vec![Term::Main(Covariate::Mol), Term::Main(Covariate::StK)],
        )
        .unwrap();
        match fit_ols(&data, &spec) {
            Err(Error::SingularDesign { column }) => assert_eq!(column, "st_k"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let data: Vec<_> = (0..2).map(|i| rec(i as f64, 0.0, 0.0, 1.0)).collect();
        let spec = ModelSpec::new(
            ResponseTransform::Identity,
            vec![Term::Main(Covariate::Mol)],
        )
        .unwrap();
        assert!(matches!(
            fit_ols(&data, &spec),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn duplicate_terms_rejected() {
        let dup = vec![
            Term::product(Covariate::StK, Covariate::Moist),
            Term::product(Covariate::Moist, Covariate::StK),
        ];
        assert!(ModelSpec::new(ResponseTransform::Identity, dup).is_err());
    }

    #[test]
    fn term_names_round_trip() {
        for s in ["st_k", "st_k:moist", "uw"] {
            assert_eq!(s.parse::<Term>().unwrap().to_string(), s);
        }
        assert_eq!("ST.K*Uw".parse::<Term>().unwrap().to_string(), "st_k:uw");
        assert!("frob".parse::<Term>().is_err());
    }

    #[test]
    fn lambda_grid_hits_zero() {
        let g = LambdaGrid::default().values();
        assert_eq!(g.len(), 401);
        assert!(g.contains(&0.0));
        assert!(g.contains(&-0.05));
        assert_eq!(g[400], 2.0);
    }

    #[test]
    fn boxcox_rejects_non_positive() {
        let mut data: Vec<_> = (0..6)
            .map(|i| rec(i as f64, 0.0, 0.0, 1.0 + i as f64))
            .collect();
        data[2].er = -1.0;
        let spec = ModelSpec::new(
            ResponseTransform::Identity,
            vec![Term::Main(Covariate::Mol)],
        )
        .unwrap();
        assert!(matches!(
            boxcox_lambda(&data, &spec, &LambdaGrid::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn inverse_transforms() {
        for t in [
            ResponseTransform::Identity,
            ResponseTransform::Log,
            ResponseTransform::BoxCox(0.0),
            ResponseTransform::BoxCox(0.5),
            ResponseTransform::BoxCox(-0.3),
        ] {
            let y = 12.5;
            assert!((t.inverse(t.apply(y)) - y).abs() < 1e-10, "{t:?}");
        }
    }

    #[test]
    fn diagnostics_have_length_n() {
        let data: Vec<_> = (0..12)
            .map(|i| {
                rec(
                    i as f64,
                    (i % 3) as f64,
                    1.0,
                    5.0 + i as f64 + (i % 2) as f64,
                )
            })
            .collect();
        let spec = ModelSpec::new(
            ResponseTransform::Log,
            vec![Term::Main(Covariate::Mol), Term::Main(Covariate::Moist)],
        )
        .unwrap();
        let fit = fit_ols(&data, &spec).unwrap();
        let d = diagnostics(&fit, &data);
        assert_eq!(d.residual_vs_fitted.len(), 12);
        assert_eq!(d.qq.len(), 12);
        assert_eq!(d.predicted_vs_actual.len(), 12);
        assert!(d.qq.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
    }
}
