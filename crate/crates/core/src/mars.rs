//! Multivariate adaptive regression splines.
//!
//! The forward pass greedily adds reflected hinge pairs
//! `max(0, x - c)`, `max(0, c - x)` with knots at observed values; the
//! backward pass prunes single terms by generalized cross-validation
//! `GCV = (RSS / n) / (1 - C / n)^2`, `C = p + penalty (p - 1) / 2`, where `p`
//! counts the coefficients including the intercept.

use std::cmp::Ordering;
use std::fmt::{self, Write as _};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Covariates, EncodedRecord};
use crate::error::{Error, Result};
use crate::linmod::{ols_design, LeastSquares, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `max(0, x - c)`
    Above,
    /// `max(0, c - x)`
    Below,
}

#[inline]
pub fn hinge(x: f64, knot: f64, dir: Direction) -> f64 {
    match dir {
        Direction::Above => (x - knot).max(0.0),
        Direction::Below => (knot - x).max(0.0),
    }
}

/// One hinge factor over a column of the feature matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hinge {
    pub var: usize,
    pub knot: f64,
    pub direction: Direction,
}

/// A product of hinges over distinct variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub factors: Vec<Hinge>,
}

impl Basis {
    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    pub fn uses(&self, var: usize) -> bool {
        self.factors.iter().any(|h| h.var == var)
    }

    pub fn column(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n)
            .map(|i| {
                self.factors
                    .iter()
                    .map(|h| hinge(x.columns[h.var][i], h.knot, h.direction))
                    .product()
            })
            .collect()
    }
}

/// Column-major predictor values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub n: usize,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if names.len() != columns.len() {
            return Err(Error::LengthMismatch {
                left: names.len(),
                right: columns.len(),
            });
        }
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch {
                left: n,
                right: c.len(),
            });
        }
        Ok(FeatureMatrix { names, columns, n })
    }

    pub fn from_records(data: &[EncodedRecord], predictors: &[Term]) -> Self {
        FeatureMatrix {
            names: predictors.iter().map(Term::name).collect(),
            columns: predictors
                .iter()
                .map(|t| data.iter().map(|r| t.eval(&r.x)).collect())
                .collect(),
            n: data.len(),
        }
    }

    /// Distinct values of column `var`, ascending, without the maximum.
    pub fn knot_candidates(&self, var: usize) -> Vec<f64> {
        let mut v = self.columns[var].clone();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.pop();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardOptions {
    /// Maximum number of basis functions, intercept included.
    pub max_terms: usize,
    pub degree: usize,
    /// Stop when the best pair reduces the RSS by less than this fraction.
    pub threshold: f64,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        ForwardOptions {
            max_terms: 21,
            degree: 1,
            threshold: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResult {
    /// Selected basis functions in order of entry (intercept excluded).
    pub basis: Vec<Basis>,
    /// RSS of the intercept-only model followed by the RSS after each step.
    pub rss_trace: Vec<f64>,
}

/// Orthonormal basis of the current model space plus the residual.
struct Projector {
    q: Vec<Vec<f64>>,
    resid: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const DEGENERATE: f64 = 1e-8;

impl Projector {
    fn new(y: &[f64]) -> Self {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        Projector {
            q: vec![vec![1.0 / n.sqrt(); y.len()]],
            resid: y.iter().map(|v| v - mean).collect(),
        }
    }

    fn rss(&self) -> f64 {
        dot(&self.resid, &self.resid)
    }

    /// Projections of `a` on the current orthonormal basis.
    fn coords(&self, a: &[f64]) -> Vec<f64> {
        self.q.iter().map(|q| dot(q, a)).collect()
    }

    /// RSS reduction from adding `cols` (one or two columns); also reports
    /// which columns are numerically independent of the current space.
    fn reduction(&self, cols: [&[f64]; 2]) -> (f64, [bool; 2]) {
        let ca = self.coords(cols[0]);
        let cb = self.coords(cols[1]);
        let aa = dot(cols[0], cols[0]);
        let bb = dot(cols[1], cols[1]);
        let ga = aa - dot(&ca, &ca);
        let gb = bb - dot(&cb, &cb);
        let mut use_a = aa > 0.0 && ga > DEGENERATE * aa;
        let mut use_b = bb > 0.0 && gb > DEGENERATE * bb;
        let ra = dot(cols[0], &self.resid);
        let rb = dot(cols[1], &self.resid);
        if use_a && use_b {
            let gab = dot(cols[0], cols[1]) - dot(&ca, &cb);
            let det = ga * gb - gab * gab;
            if det > DEGENERATE * ga * gb {
                let red = (gb * ra * ra - 2.0 * gab * ra * rb + ga * rb * rb) / det;
                return (red.max(0.0), [true, true]);
            }
            if ra * ra / ga >= rb * rb / gb {
                use_b = false;
            } else {
                use_a = false;
            }
        }
        match (use_a, use_b) {
            (true, false) => (ra * ra / ga, [true, false]),
            (false, true) => (rb * rb / gb, [false, true]),
            _ => (0.0, [false, false]),
        }
    }

    fn single_reduction(&self, a: &[f64]) -> f64 {
        let ca = self.coords(a);
        let aa = dot(a, a);
        let ga = aa - dot(&ca, &ca);
        if aa > 0.0 && ga > DEGENERATE * aa {
            dot(a, &self.resid).powi(2) / ga
        } else {
            0.0
        }
    }

    /// Adds a column by Gram-Schmidt with one reorthogonalization pass.
    fn push(&mut self, col: &[f64]) {
        let mut v = col.to_vec();
        for _ in 0..2 {
            for q in &self.q {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
            }
        }
        let norm = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|vi| *vi /= norm);
        let c = dot(&v, &self.resid);
        self.resid
            .iter_mut()
            .zip(&v)
            .for_each(|(r, vi)| *r -= c * vi);
        self.q.push(v);
    }
}

struct Candidate {
    parent: usize,
    var: usize,
    knot: f64,
    reduction: f64,
    usable: [bool; 2],
    single: [f64; 2],
}

/// Greedy forward selection of hinge pairs.
pub fn forward_pass(x: &FeatureMatrix, y: &[f64], opts: &ForwardOptions) -> Result<ForwardResult> {
    if y.len() != x.n {
        return Err(Error::LengthMismatch {
            left: x.n,
            right: y.len(),
        });
    }
    if x.n < 2 {
        return Err(Error::InsufficientData { n: x.n, params: 2 });
    }
    if opts.max_terms < 2 || opts.degree < 1 {
        return Err(Error::Domain(
            "max_terms must be >= 2 and degree >= 1".into(),
        ));
    }
    let knots: Vec<Vec<f64>> = (0..x.columns.len()).map(|v| x.knot_candidates(v)).collect();
    let mut proj = Projector::new(y);
    let mut basis: Vec<Basis> = Vec::new();
    let mut parent_cols: Vec<Vec<f64>> = vec![vec![1.0; x.n]];
    let mut parents: Vec<Basis> = vec![Basis { factors: vec![] }];
    let mut rss_trace = vec![proj.rss()];
    let scale = dot(y, y).max(f64::MIN_POSITIVE);

    while basis.len() + 1 < opts.max_terms {
        let rss = proj.rss();
        if rss <= 1e-24 * scale {
            break;
        }
        let mut jobs = Vec::new();
        for (p, parent) in parents.iter().enumerate() {
            if parent.degree() >= opts.degree {
                continue;
            }
            for (var, ks) in knots.iter().enumerate() {
                if parent.uses(var) {
                    continue;
                }
                for &knot in ks {
                    jobs.push((p, var, knot));
                }
            }
        }
        let candidates: Vec<Candidate> = jobs
            .par_iter()
            .map(|&(p, var, knot)| {
                let pc = &parent_cols[p];
                let xv = &x.columns[var];
                let a: Vec<f64> = pc
                    .iter()
                    .zip(xv)
                    .map(|(w, xi)| w * hinge(*xi, knot, Direction::Above))
                    .collect();
                let b: Vec<f64> = pc
                    .iter()
                    .zip(xv)
                    .map(|(w, xi)| w * hinge(*xi, knot, Direction::Below))
                    .collect();
                let (reduction, usable) = proj.reduction([&a, &b]);
                let single = if usable == [true, true] {
                    [proj.single_reduction(&a), proj.single_reduction(&b)]
                } else {
                    [0.0; 2]
                };
                Candidate {
                    parent: p,
                    var,
                    knot,
                    reduction,
                    usable,
                    single,
                }
            })
            .collect();

        let best = candidates.into_iter().reduce(|best, c| {
            match c
                .reduction
                .total_cmp(&best.reduction)
                .then_with(|| best.knot.total_cmp(&c.knot))
                .then_with(|| best.var.cmp(&c.var))
                .then_with(|| best.parent.cmp(&c.parent))
            {
                Ordering::Greater => c,
                _ => best,
            }
        });
        let Some(best) = best else { break };
        if !(best.reduction > 0.0) || best.reduction < opts.threshold * rss {
            break;
        }

        let mut usable = best.usable;
        if usable == [true, true] && basis.len() + 2 >= opts.max_terms {
            // Room for one more function only: keep the stronger side.
            if best.single[0] >= best.single[1] {
                usable[1] = false;
            } else {
                usable[0] = false;
            }
        }
        for (side, dir) in [(0, Direction::Above), (1, Direction::Below)] {
            if !usable[side] {
                continue;
            }
            let mut factors = parents[best.parent].factors.clone();
            factors.push(Hinge {
                var: best.var,
                knot: best.knot,
                direction: dir,
            });
            let b = Basis { factors };
            let col = b.column(x);
            proj.push(&col);
            parent_cols.push(col);
            parents.push(b.clone());
            basis.push(b);
        }
        rss_trace.push(proj.rss());
    }

    Ok(ForwardResult { basis, rss_trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneMethod {
    /// Drop one term at a time, always the one whose removal raises RSS least.
    Backward,
    /// Evaluate every subset.
    Exhaustive,
    /// Exhaustive up to [`EXHAUSTIVE_LIMIT`] terms, backward beyond.
    Auto,
}

pub const EXHAUSTIVE_LIMIT: usize = 10;

/// `(rss / n) / (1 - C / n)^2` with `C = p + penalty (p - 1) / 2`; infinite
/// when `C >= n`.
pub fn gcv(rss: f64, n: usize, coefficients: usize, penalty: f64) -> f64 {
    let nf = n as f64;
    let c = coefficients as f64 + penalty * (coefficients as f64 - 1.0) / 2.0;
    if c >= nf {
        return f64::INFINITY;
    }
    (rss / nf) / (1.0 - c / nf).powi(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetScore {
    /// Indices into the candidate basis.
    pub terms: Vec<usize>,
    pub rss: f64,
    pub gcv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneResult {
    pub selected: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub rss: f64,
    pub gcv: f64,
    /// Every subset scored during the search.
    pub evaluated: Vec<SubsetScore>,
}

fn subset_rss(cols: &[Vec<f64>], subset: &[usize], y: &[f64]) -> f64 {
    let n = y.len();
    let design = DMatrix::from_fn(n, subset.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            cols[subset[j - 1]][i]
        }
    });
    match LeastSquares::new(&design, &[]) {
        Ok(ls) => ls.rss(y),
        Err(_) => f64::INFINITY,
    }
}

fn better(a: &SubsetScore, b: &SubsetScore) -> bool {
    a.gcv < b.gcv || (a.gcv == b.gcv && a.terms.len() < b.terms.len())
}

/// Selects the subset of `basis` (plus intercept) minimizing GCV.
pub fn prune_gcv(
    basis: &[Basis],
    x: &FeatureMatrix,
    y: &[f64],
    penalty: f64,
    method: PruneMethod,
) -> Result<PruneResult> {
    let n = y.len();
    let cols: Vec<Vec<f64>> = basis.iter().map(|b| b.column(x)).collect();
    let score = |terms: Vec<usize>| {
        let rss = subset_rss(&cols, &terms, y);
        let gcv = if rss.is_finite() {
            gcv(rss, n, terms.len() + 1, penalty)
        } else {
            f64::INFINITY
        };
        SubsetScore { terms, rss, gcv }
    };

    let m = basis.len();
    let exhaustive = match method {
        PruneMethod::Exhaustive => true,
        PruneMethod::Backward => false,
        PruneMethod::Auto => m <= EXHAUSTIVE_LIMIT,
    };

    let evaluated: Vec<SubsetScore> = if exhaustive {
        if m >= 25 {
            return Err(Error::Domain(format!(
                "exhaustive pruning over {m} terms is infeasible"
            )));
        }
        (0u32..(1u32 << m))
            .into_par_iter()
            .map(|mask| score((0..m).filter(|k| mask & (1 << k) != 0).collect()))
            .collect()
    } else {
        let mut current: Vec<usize> = (0..m).collect();
        let mut walk = vec![score(current.clone())];
        while !current.is_empty() {
            let drops: Vec<SubsetScore> = (0..current.len())
                .into_par_iter()
                .map(|k| {
                    let mut s = current.clone();
                    s.remove(k);
                    score(s)
                })
                .collect();
            let best = drops
                .into_iter()
                .reduce(|a, b| if b.rss < a.rss { b } else { a })
                .expect("non-empty");
            current = best.terms.clone();
            walk.push(best);
        }
        walk
    };

    let best = evaluated
        .iter()
        .fold(&evaluated[0], |acc, s| if better(s, acc) { s } else { acc })
        .clone();
    if !best.gcv.is_finite() {
        return Err(Error::InsufficientData { n, params: 1 });
    }
    let design = DMatrix::from_fn(n, best.terms.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            cols[best.terms[j - 1]][i]
        }
    });
    let names: Vec<String> = std::iter::once("(Intercept)".to_string())
        .chain(best.terms.iter().map(|k| format!("h{k}")))
        .collect();
    let sol = ols_design(&design, y, &names)?;
    Ok(PruneResult {
        selected: best.terms,
        coefficients: sol.coefficients,
        rss: sol.rss,
        gcv: best.gcv,
        evaluated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarsResponse {
    Identity,
    Log,
}

/// A hinge factor over a named predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HingeTerm {
    pub variable: Term,
    pub knot: f64,
    pub direction: Direction,
}

impl HingeTerm {
    pub fn eval(&self, x: &Covariates) -> f64 {
        hinge(self.variable.eval(x), self.knot, self.direction)
    }
}

impl fmt::Display for HingeTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.direction {
            Direction::Above => write!(f, "max(0, {} - {})", self.variable, self.knot),
            Direction::Below => write!(f, "max(0, {} - {})", self.knot, self.variable),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarsTerm {
    pub factors: Vec<HingeTerm>,
    pub coefficient: f64,
}

impl MarsTerm {
    pub fn eval(&self, x: &Covariates) -> f64 {
        self.factors.iter().map(|h| h.eval(x)).product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarsModel {
    pub predictors: Vec<Term>,
    pub response_transform: MarsResponse,
    pub intercept: f64,
    pub terms: Vec<MarsTerm>,
    pub gcv: f64,
    pub rss: f64,
    pub n: usize,
    pub penalty: f64,
    /// Human-readable form of the fitted function.
    #[serde(default)]
    pub equation: String,
}

impl MarsModel {
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Fitted function on the modelling scale.
    pub fn linear_predictor(&self, x: &Covariates) -> f64 {
        self.intercept
            + self
                .terms
                .iter()
                .map(|t| t.coefficient * t.eval(x))
                .sum::<f64>()
    }

    pub fn knots(&self) -> Vec<(Term, f64)> {
        self.terms
            .iter()
            .flat_map(|t| t.factors.iter().map(|h| (h.variable, h.knot)))
            .collect()
    }

    pub fn render_equation(&self) -> String {
        let mut s = format!("{}", self.intercept);
        for t in &self.terms {
            let sign = if t.coefficient < 0.0 { '-' } else { '+' };
            let _ = write!(s, " {sign} {}", t.coefficient.abs());
            for h in &t.factors {
                let _ = write!(s, " {h}");
            }
        }
        match self.response_transform {
            MarsResponse::Identity => format!("ER = {s}"),
            MarsResponse::Log => format!("ER = exp[{s}]"),
        }
    }
}

/// Prediction on the ER scale.
pub fn predict_mars(model: &MarsModel, x: &Covariates) -> f64 {
    let f = model.linear_predictor(x);
    match model.response_transform {
        MarsResponse::Identity => f,
        MarsResponse::Log => f.exp(),
    }
}

impl fmt::Display for MarsModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.render_equation())?;
        writeln!(
            f,
            "terms: {}, GCV: {:.6}, RSS: {:.6}, n: {}",
            self.term_count(),
            self.gcv,
            self.rss,
            self.n
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarsConfig {
    pub predictors: Vec<Term>,
    pub response: MarsResponse,
    pub forward: ForwardOptions,
    /// Defaults to 2 for additive models and 3 with interactions.
    pub penalty: Option<f64>,
    pub prune: PruneMethod,
}

impl MarsConfig {
    pub fn new(predictors: Vec<Term>, response: MarsResponse) -> Self {
        MarsConfig {
            predictors,
            response,
            forward: ForwardOptions::default(),
            penalty: None,
            prune: PruneMethod::Auto,
        }
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
            .unwrap_or(if self.forward.degree > 1 { 3.0 } else { 2.0 })
    }
}

/// Forward pass, GCV pruning and final least-squares coefficients.
pub fn fit_mars(data: &[EncodedRecord], config: &MarsConfig) -> Result<MarsModel> {
    if data.is_empty() {
        return Err(Error::EmptyInput("MARS training data"));
    }
    let x = FeatureMatrix::from_records(data, &config.predictors);
    let y: Vec<f64> = match config.response {
        MarsResponse::Identity => data.iter().map(|r| r.er).collect(),
        MarsResponse::Log => data.iter().map(|r| r.er.ln()).collect(),
    };
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("log response needs positive ER".into()));
    }
    let forward = forward_pass(&x, &y, &config.forward)?;
    let penalty = config.penalty();
    let pruned = prune_gcv(&forward.basis, &x, &y, penalty, config.prune)?;
    let terms = pruned
        .selected
        .iter()
        .zip(&pruned.coefficients[1..])
        .map(|(&k, &coefficient)| MarsTerm {
            factors: forward.basis[k]
                .factors
                .iter()
                .map(|h| HingeTerm {
                    variable: config.predictors[h.var],
                    knot: h.knot,
                    direction: h.direction,
                })
                .collect(),
            coefficient,
        })
        .collect();
    let mut model = MarsModel {
        predictors: config.predictors.clone(),
        response_transform: config.response,
        intercept: pruned.coefficients[0],
        terms,
        gcv: pruned.gcv,
        rss: pruned.rss,
        n: data.len(),
        penalty,
        equation: String::new(),
    };
    model.equation = model.render_equation();
    Ok(model)
}
