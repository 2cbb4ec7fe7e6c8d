//! Exponential nonlinear regression of ER.
//!
//! Three fixed model forms share the structure
//! `b0 + b1 * exp(sum of b_j * x_j) [+ b_mol * mol]` and are fitted by a
//! Levenberg-Marquardt iteration with analytic Jacobians. Starting values
//! come from the log-linear regression on the same predictors.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::{Covariate, Covariates, EncodedRecord};
use crate::error::{Error, Result};
use crate::linmod::{fit_ols, LinearFit, ModelSpec, ResponseTransform, Term};

/// Largest exponent argument used while searching; `exp(700)` is finite.
const EXP_CLAMP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlsForm {
    /// `b0 + b1 exp(b2 st_kb + b3 st_ks + b4 mol + b5 moist + b6 uw)`
    Full,
    /// `b0 + b1 exp(b2 st_kb + b3 st_ks + b4 moist + b5 uw) + b6 mol`
    ShiftedMol,
    /// `b0 + b1 exp(b2 st_k + b4 moist + b5 uw) + b3 mol`
    Stk,
}

impl NlsForm {
    pub const ALL: [NlsForm; 3] = [NlsForm::Full, NlsForm::ShiftedMol, NlsForm::Stk];

    pub fn id(self) -> &'static str {
        match self {
            NlsForm::Full => "full",
            NlsForm::ShiftedMol => "shifted_mol",
            NlsForm::Stk => "stk",
        }
    }

    pub fn parameter_count(self) -> usize {
        match self {
            NlsForm::Full | NlsForm::ShiftedMol => 7,
            NlsForm::Stk => 6,
        }
    }

    /// (parameter index, covariate) pairs inside the exponential.
    pub fn exponent_terms(self) -> &'static [(usize, Covariate)] {
        match self {
            NlsForm::Full => &[
                (2, Covariate::StKb),
                (3, Covariate::StKs),
                (4, Covariate::Mol),
                (5, Covariate::Moist),
                (6, Covariate::Uw),
            ],
            NlsForm::ShiftedMol => &[
                (2, Covariate::StKb),
                (3, Covariate::StKs),
                (4, Covariate::Moist),
                (5, Covariate::Uw),
            ],
            NlsForm::Stk => &[
                (2, Covariate::StK),
                (4, Covariate::Moist),
                (5, Covariate::Uw),
            ],
        }
    }

    /// Index of the parameter multiplying `mol` outside the exponential.
    pub fn linear_mol_index(self) -> Option<usize> {
        match self {
            NlsForm::Full => None,
            NlsForm::ShiftedMol => Some(6),
            NlsForm::Stk => Some(3),
        }
    }

    pub fn parameter_names(self) -> Vec<String> {
        (0..self.parameter_count())
            .map(|j| format!("beta{j}"))
            .collect()
    }

    fn exponent(self, beta: &[f64], x: &Covariates) -> f64 {
        self.exponent_terms()
            .iter()
            .map(|&(j, c)| beta[j] * x.get(c))
            .sum()
    }

    fn linear_part(self, beta: &[f64], x: &Covariates) -> f64 {
        self.linear_mol_index().map_or(0.0, |j| beta[j] * x.mol)
    }

    fn eval_clamped(self, beta: &[f64], x: &Covariates) -> f64 {
        let eta = self.exponent(beta, x).clamp(-EXP_CLAMP, EXP_CLAMP);
        beta[0] + beta[1] * eta.exp() + self.linear_part(beta, x)
    }

    /// Analytic gradient of the prediction with respect to `beta`.
    pub fn gradient(self, beta: &[f64], x: &Covariates) -> Vec<f64> {
        let mut g = vec![0.0; self.parameter_count()];
        let e = self.exponent(beta, x).clamp(-EXP_CLAMP, EXP_CLAMP).exp();
        g[0] = 1.0;
        g[1] = e;
        for &(j, c) in self.exponent_terms() {
            g[j] = beta[1] * x.get(c) * e;
        }
        if let Some(j) = self.linear_mol_index() {
            g[j] = x.mol;
        }
        g
    }

    fn check_len(self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.parameter_count() {
            return Err(Error::LengthMismatch {
                left: self.parameter_count(),
                right: beta.len(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for NlsForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Evaluates the form at one observation. An overflowing exponential is an error.
pub fn eval_form(form: NlsForm, beta: &[f64], x: &Covariates) -> Result<f64> {
    form.check_len(beta)?;
    let eta = form.exponent(beta, x);
    let value = beta[0] + beta[1] * eta.exp() + form.linear_part(beta, x);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Evaluation(format!(
            "{form} form overflows (exponent {eta:.3})"
        )))
    }
}

/// Log-linear regression on the form's predictors, mapped to starting values:
/// `b1 = exp(intercept)`, exponent parameters take the matching slopes, and
/// `b0` and any linear mol parameter start at zero.
pub fn starting_values(data: &[EncodedRecord], form: NlsForm) -> Result<Vec<f64>> {
    let (_, beta) = starting_fit(data, form)?;
    Ok(beta)
}

/// The log-linear fit behind [`starting_values`] together with the mapped start.
pub fn starting_fit(data: &[EncodedRecord], form: NlsForm) -> Result<(LinearFit, Vec<f64>)> {
    let mut terms: Vec<Term> = form
        .exponent_terms()
        .iter()
        .map(|&(_, c)| Term::Main(c))
        .collect();
    if form.linear_mol_index().is_some() {
        terms.push(Term::Main(Covariate::Mol));
    }
    let spec = ModelSpec::new(ResponseTransform::Log, terms)?;
    let fit = fit_ols(data, &spec)?;
    let mut beta = vec![0.0; form.parameter_count()];
    beta[1] = fit.coefficients[0].exp();
    for (k, &(j, _)) in form.exponent_terms().iter().enumerate() {
        beta[j] = fit.coefficients[k + 1];
    }
    Ok((fit, beta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlsOptions {
    /// Relative RSS reduction below which an accepted step ends the fit.
    pub tol: f64,
    pub max_iter: usize,
    pub initial_damping: f64,
}

impl Default for NlsOptions {
    fn default() -> Self {
        NlsOptions {
            tol: 1e-6,
            max_iter: 50,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NlsFitDoc", try_from = "NlsFitDoc")]
pub struct NlsFit {
    pub form: NlsForm,
    pub beta: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residual_std_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub rss: f64,
    pub n: usize,
    /// RSS after every accepted step, starting with the initial value.
    pub rss_trace: Vec<f64>,
}

impl NlsFit {
    pub fn predict(&self, x: &Covariates) -> Result<f64> {
        eval_form(self.form, &self.beta, x)
    }

    pub fn residual_df(&self) -> usize {
        self.n - self.form.parameter_count()
    }

    pub fn t_values(&self) -> Vec<f64> {
        self.beta
            .iter()
            .zip(&self.std_errors)
            .map(|(b, s)| b / s)
            .collect()
    }

    pub fn p_values(&self) -> Vec<f64> {
        let t = StudentsT::new(0.0, 1.0, self.residual_df() as f64).expect("positive df");
        self.t_values()
            .iter()
            .map(|v| {
                if v.is_nan() {
                    f64::NAN
                } else {
                    2.0 * t.sf(v.abs())
                }
            })
            .collect()
    }
}

impl fmt::Display for NlsFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "form: {}", self.form)?;
        writeln!(
            f,
            "{:<8} {:>14} {:>12} {:>9} {:>10}",
            "param", "estimate", "std.error", "t", "p"
        )?;
        let (t, p) = (self.t_values(), self.p_values());
        for j in 0..self.beta.len() {
            writeln!(
                f,
                "{:<8} {:>14.4e} {:>12.4e} {:>9.3} {:>10.4}",
                format!("beta{j}"),
                self.beta[j],
                self.std_errors[j],
                t[j],
                p[j]
            )?;
        }
        writeln!(
            f,
            "Residual standard error: {:.4} on {} degrees of freedom",
            self.residual_std_error,
            self.residual_df()
        )?;
        writeln!(
            f,
            "Iterations: {}, converged: {}, RSS: {:.6e}",
            self.iterations, self.converged, self.rss
        )
    }
}

/// Serialized layout: parameters keyed by name.
#[derive(Serialize, Deserialize)]
struct NlsFitDoc {
    form_id: NlsForm,
    beta: BTreeMap<String, f64>,
    std_errors: BTreeMap<String, f64>,
    rss: f64,
    n: usize,
    iterations: usize,
    converged: bool,
    residual_std_error: f64,
}

impl From<NlsFit> for NlsFitDoc {
    fn from(fit: NlsFit) -> Self {
        let names = fit.form.parameter_names();
        NlsFitDoc {
            form_id: fit.form,
            beta: names
                .iter()
                .cloned()
                .zip(fit.beta.iter().copied())
                .collect(),
            std_errors: names
                .into_iter()
                .zip(fit.std_errors.iter().copied())
                .collect(),
            rss: fit.rss,
            n: fit.n,
            iterations: fit.iterations,
            converged: fit.converged,
            residual_std_error: fit.residual_std_error,
        }
    }
}

impl TryFrom<NlsFitDoc> for NlsFit {
    type Error = String;

    fn try_from(doc: NlsFitDoc) -> std::result::Result<Self, String> {
        let names = doc.form_id.parameter_names();
        let lookup = |map: &BTreeMap<String, f64>, name: &String| {
            map.get(name)
                .copied()
                .ok_or_else(|| format!("missing parameter `{name}`"))
        };
        let beta = names
            .iter()
            .map(|n| lookup(&doc.beta, n))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let std_errors = names
            .iter()
            .map(|n| lookup(&doc.std_errors, n).or(Ok::<f64, String>(f64::NAN)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(NlsFit {
            form: doc.form_id,
            beta,
            std_errors,
            residual_std_error: doc.residual_std_error,
            iterations: doc.iterations,
            converged: doc.converged,
            rss: doc.rss,
            n: doc.n,
            rss_trace: Vec::new(),
        })
    }
}

fn rss_of(form: NlsForm, beta: &[f64], data: &[EncodedRecord]) -> f64 {
    data.iter()
        .map(|r| (r.er - form.eval_clamped(beta, &r.x)).powi(2))
        .sum()
}

fn jacobian(form: NlsForm, beta: &[f64], data: &[EncodedRecord]) -> DMatrix<f64> {
    let p = form.parameter_count();
    let mut j = DMatrix::zeros(data.len(), p);
    for (i, r) in data.iter().enumerate() {
        for (k, g) in form.gradient(beta, &r.x).into_iter().enumerate() {
            j[(i, k)] = g;
        }
    }
    j
}

fn column_scales(j: &DMatrix<f64>) -> Vec<f64> {
    j.column_iter()
        .map(|c| {
            let n = c.norm();
            if n > 0.0 && n.is_finite() {
                n
            } else {
                1.0
            }
        })
        .collect()
}

/// Solves `min |J_s d - r|^2 + mu |d|^2` for the column-scaled Jacobian via
/// QR of the augmented system.
fn damped_step(js: &DMatrix<f64>, r: &DVector<f64>, mu: f64) -> Option<DVector<f64>> {
    let (n, p) = js.shape();
    let mut a = DMatrix::zeros(n + p, p);
    a.view_mut((0, 0), (n, p)).copy_from(js);
    let s = mu.sqrt();
    for k in 0..p {
        a[(n + k, k)] = s;
    }
    let mut b = DVector::zeros(n + p);
    b.rows_mut(0, n).copy_from(r);
    let qr = a.qr();
    let mut qtb = b;
    qr.q_tr_mul(&mut qtb);
    qr.r().solve_upper_triangular(&qtb.rows(0, p).into_owned())
}

/// Levenberg-Marquardt fit of `form` to `data`.
///
/// Damping is multiplied by 10 after a rejected step and divided by 10 after
/// an accepted one. The fit converges when an accepted step reduces the RSS
/// by a relative amount below `opts.tol`, or when no damping level yields a
/// non-negligible improving step.
pub fn fit_nls(
    form: NlsForm,
    data: &[EncodedRecord],
    start: &[f64],
    opts: &NlsOptions,
) -> Result<NlsFit> {
    form.check_len(start)?;
    let n = data.len();
    let p = form.parameter_count();
    if n <= p {
        return Err(Error::InsufficientData { n, params: p });
    }
    let y_scale: f64 = data.iter().map(|r| r.er * r.er).sum();

    let mut beta = start.to_vec();
    let mut rss = rss_of(form, &beta, data);
    if !rss.is_finite() {
        return Err(Error::Evaluation(
            "starting values give a non-finite RSS".into(),
        ));
    }
    let mut trace = vec![rss];
    let mut mu = opts.initial_damping;
    let mut iterations = 0;
    let mut converged = rss <= 1e-30 * y_scale;

    while !converged {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                best_rss: rss,
                best_beta: beta,
            });
        }
        iterations += 1;

        let jac = jacobian(form, &beta, data);
        let scales = column_scales(&jac);
        let mut js = jac;
        for (k, s) in scales.iter().enumerate() {
            js.column_mut(k).scale_mut(1.0 / s);
        }
        let resid = DVector::from_iterator(
            n,
            data.iter().map(|r| r.er - form.eval_clamped(&beta, &r.x)),
        );

        loop {
            let step = damped_step(&js, &resid, mu).map(|d| {
                d.iter()
                    .zip(&scales)
                    .map(|(v, s)| v / s)
                    .collect::<Vec<f64>>()
            });
            let Some(step) = step.filter(|d| d.iter().all(|v| v.is_finite())) else {
                mu *= 10.0;
                if mu > 1e20 {
                    converged = true;
                    break;
                }
                continue;
            };
            let step_norm = step.iter().map(|v| v * v).sum::<f64>().sqrt();
            let beta_norm = beta.iter().map(|v| v * v).sum::<f64>().sqrt();
            if step_norm <= 1e-15 * (beta_norm + 1e-300) || mu > 1e20 {
                converged = true;
                break;
            }
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, d)| b + d).collect();
            let trial_rss = rss_of(form, &trial, data);
            if trial_rss.is_finite() && trial_rss <= rss {
                let rel = if rss > 0.0 {
                    (rss - trial_rss) / rss
                } else {
                    0.0
                };
                beta = trial;
                rss = trial_rss;
                trace.push(rss);
                mu = (mu / 10.0).max(1e-15);
                if rel < opts.tol || rss <= 1e-30 * y_scale {
                    converged = true;
                }
                break;
            }
            mu *= 10.0;
        }
    }

    if beta
        .iter()
        .any(|_| data.iter().any(|r| eval_form(form, &beta, &r.x).is_err()))
    {
        return Err(Error::Evaluation(
            "fitted parameters overflow on the training data".into(),
        ));
    }

    let df = (n - p) as f64;
    let sigma2 = rss / df;
    let std_errors = standard_errors(&jacobian(form, &beta, data), sigma2);
    Ok(NlsFit {
        form,
        beta,
        std_errors,
        residual_std_error: sigma2.sqrt(),
        iterations,
        converged,
        rss,
        n,
        rss_trace: trace,
    })
}

/// `sqrt(diag(sigma2 (J^T J)^{-1}))` via QR of the column-scaled Jacobian.
fn standard_errors(jac: &DMatrix<f64>, sigma2: f64) -> Vec<f64> {
    let p = jac.ncols();
    let scales = column_scales(jac);
    let mut js = jac.clone();
    for (k, s) in scales.iter().enumerate() {
        js.column_mut(k).scale_mut(1.0 / s);
    }
    let r = js.qr().r();
    match r.solve_upper_triangular(&DMatrix::identity(p, p)) {
        Some(rinv) => {
            let cov = &rinv * rinv.transpose();
            (0..p)
                .map(|k| (sigma2 * cov[(k, k)]).sqrt() / scales[k])
                .collect()
        }
        None => vec![f64::NAN; p],
    }
}

/// Anything with a Gaussian likelihood summarized by its RSS.
pub trait GaussianFit {
    fn rss(&self) -> f64;
    fn n(&self) -> usize;
    /// Number of mean-function parameters, excluding the error variance.
    fn parameter_count(&self) -> usize;
}

impl GaussianFit for NlsFit {
    fn rss(&self) -> f64 {
        self.rss
    }
    fn n(&self) -> usize {
        self.n
    }
    fn parameter_count(&self) -> usize {
        self.form.parameter_count()
    }
}

impl GaussianFit for LinearFit {
    fn rss(&self) -> f64 {
        self.rss
    }
    fn n(&self) -> usize {
        self.n
    }
    fn parameter_count(&self) -> usize {
        self.coefficients.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aic {
    pub aic: f64,
    /// Parameter count plus one for the error variance.
    pub df: usize,
}

/// `n (ln(2 pi rss / n) + 1) + 2 (k + 1)`.
pub fn aic_gaussian(fit: &impl GaussianFit) -> Result<Aic> {
    aic_from_rss(fit.rss(), fit.n(), fit.parameter_count())
}

pub fn aic_from_rss(rss: f64, n: usize, k: usize) -> Result<Aic> {
    if !(rss > 0.0) {
        return Err(Error::DegenerateLikelihood);
    }
    let nf = n as f64;
    Ok(Aic {
        aic: nf * ((2.0 * std::f64::consts::PI * rss / nf).ln() + 1.0) + 2.0 * (k as f64 + 1.0),
        df: k + 1,
    })
}
