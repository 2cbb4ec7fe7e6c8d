//! Experimental records: CSV ingestion, soil-type encoding, descriptive
//! statistics and the Wenner four-electrode resistivity formula.
//!
//! The input file has one row per measurement with the columns `ST`, `Mol`,
//! `Moist`, `Uw` and `ER` (matched case-insensitively, in any order, extra
//! columns ignored). Empty fields and `NA` are missing values.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The nine kaolin mixtures of the experimental programme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SoilType {
    K100,
    K90B10,
    K80B20,
    K70B30,
    K60B40,
    K90S10,
    K80S20,
    K70S30,
    K60S40,
}

impl SoilType {
    pub const ALL: [SoilType; 9] = [
        SoilType::K100,
        SoilType::K90B10,
        SoilType::K80B20,
        SoilType::K70B30,
        SoilType::K60B40,
        SoilType::K90S10,
        SoilType::K80S20,
        SoilType::K70S30,
        SoilType::K60S40,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SoilType::K100 => "100%K",
            SoilType::K90B10 => "90%K+10%B",
            SoilType::K80B20 => "80%K+20%B",
            SoilType::K70B30 => "70%K+30%B",
            SoilType::K60B40 => "60%K+40%B",
            SoilType::K90S10 => "90%K+10%S",
            SoilType::K80S20 => "80%K+20%S",
            SoilType::K70S30 => "70%K+30%S",
            SoilType::K60S40 => "60%K+40%S",
        }
    }

    /// Parses a label such as `90%K+10%B`; whitespace and case are ignored.
    pub fn from_label(label: &str) -> Option<SoilType> {
        let norm: String = label
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_ascii_uppercase();
        SoilType::ALL.into_iter().find(|st| st.label() == norm)
    }

    /// Bentonite mass fraction in [0, 0.4].
    pub fn bentonite_fraction(self) -> f64 {
        match self {
            SoilType::K90B10 => 0.1,
            SoilType::K80B20 => 0.2,
            SoilType::K70B30 => 0.3,
            SoilType::K60B40 => 0.4,
            _ => 0.0,
        }
    }

    /// Sand mass fraction in [0, 0.4].
    pub fn sand_fraction(self) -> f64 {
        match self {
            SoilType::K90S10 => 0.1,
            SoilType::K80S20 => 0.2,
            SoilType::K70S30 => 0.3,
            SoilType::K60S40 => 0.4,
            _ => 0.0,
        }
    }

    pub fn is_pure_kaolin(self) -> bool {
        self == SoilType::K100
    }
}

impl fmt::Display for SoilType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One row of the experimental file.
#[derive(Debug, Clone, PartialEq)]
pub struct SoilRecord {
    pub soil_type: SoilType,
    pub mol: Option<f64>,
    pub moist: Option<f64>,
    pub uw: Option<f64>,
    pub er: Option<f64>,
}

/// Numeric covariates of an observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariates {
    pub soil_type: SoilType,
    pub st_kb: f64,
    pub st_ks: f64,
    pub st_k: f64,
    pub mol: f64,
    pub moist: f64,
    pub uw: f64,
}

impl Covariates {
    pub fn new(soil_type: SoilType, mol: f64, moist: f64, uw: f64) -> Self {
        Covariates {
            soil_type,
            st_kb: soil_type.bentonite_fraction(),
            st_ks: soil_type.sand_fraction(),
            st_k: if soil_type.is_pure_kaolin() { 1.0 } else { 0.0 },
            mol,
            moist,
            uw,
        }
    }

    pub fn get(&self, c: Covariate) -> f64 {
        match c {
            Covariate::StKb => self.st_kb,
            Covariate::StKs => self.st_ks,
            Covariate::StK => self.st_k,
            Covariate::Mol => self.mol,
            Covariate::Moist => self.moist,
            Covariate::Uw => self.uw,
        }
    }
}

/// A complete-case, model-ready observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodedRecord {
    pub x: Covariates,
    pub er: f64,
}

impl EncodedRecord {
    pub fn to_soil_record(&self) -> SoilRecord {
        SoilRecord {
            soil_type: self.x.soil_type,
            mol: Some(self.x.mol),
            moist: Some(self.x.moist),
            uw: Some(self.x.uw),
            er: Some(self.er),
        }
    }
}

/// Encoded predictor variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Covariate {
    StKb,
    StKs,
    StK,
    Mol,
    Moist,
    Uw,
}

impl Covariate {
    pub const ALL: [Covariate; 6] = [
        Covariate::StKb,
        Covariate::StKs,
        Covariate::StK,
        Covariate::Mol,
        Covariate::Moist,
        Covariate::Uw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Covariate::StKb => "st_kb",
            Covariate::StKs => "st_ks",
            Covariate::StK => "st_k",
            Covariate::Mol => "mol",
            Covariate::Moist => "moist",
            Covariate::Uw => "uw",
        }
    }

    pub fn from_name(name: &str) -> Option<Covariate> {
        let lower = name.trim().to_ascii_lowercase().replace('.', "_");
        Covariate::ALL.into_iter().find(|c| c.name() == lower)
    }
}

impl fmt::Display for Covariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const ST_NAMES: &[&str] = &["st", "soil_type", "soiltype", "soil type", "soil"];
const MOL_NAMES: &[&str] = &["mol", "molarity"];
const MOIST_NAMES: &[&str] = &["moist", "moisture"];
const UW_NAMES: &[&str] = &["uw", "unit_weight", "unitweight", "dry_unit_weight"];
const ER_NAMES: &[&str] = &["er", "resistivity"];

fn find_column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers.iter().position(|h| {
        let h = h.trim().trim_matches('"').to_ascii_lowercase();
        names.contains(&h.as_str())
    })
}

fn is_missing(token: &str) -> bool {
    token.is_empty() || token.eq_ignore_ascii_case("na")
}

fn parse_number(token: &str, row: usize, column: &'static str) -> Result<Option<f64>> {
    let token = token.trim();
    if is_missing(token) {
        return Ok(None);
    }
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Some)
        .ok_or_else(|| Error::BadNumber {
            row,
            column,
            token: token.to_string(),
        })
}

/// Parses the experimental CSV. Rows are reported 1-based, excluding the header.
pub fn parse_csv<R: Read>(source: R) -> Result<Vec<SoilRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let st = find_column(&headers, ST_NAMES).ok_or(Error::MissingColumn("ST"))?;
    let mol = find_column(&headers, MOL_NAMES).ok_or(Error::MissingColumn("Mol"))?;
    let moist = find_column(&headers, MOIST_NAMES).ok_or(Error::MissingColumn("Moist"))?;
    let uw = find_column(&headers, UW_NAMES).ok_or(Error::MissingColumn("Uw"))?;
    let er = find_column(&headers, ER_NAMES).ok_or(Error::MissingColumn("ER"))?;

    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let field = |idx: usize| row.get(idx).unwrap_or("");
        let label = field(st);
        let soil_type = SoilType::from_label(label).ok_or_else(|| Error::UnknownSoilType {
            row: row_no,
            label: label.to_string(),
        })?;
        let rec = SoilRecord {
            soil_type,
            mol: parse_number(field(mol), row_no, "Mol")?,
            moist: parse_number(field(moist), row_no, "Moist")?,
            uw: parse_number(field(uw), row_no, "Uw")?,
            er: parse_number(field(er), row_no, "ER")?,
        };
        if rec.mol.is_some_and(|v| v < 0.0) {
            return Err(Error::InvalidValue {
                row: row_no,
                column: "Mol",
                reason: "molarity must be non-negative",
            });
        }
        if rec.er.is_some_and(|v| v <= 0.0) {
            return Err(Error::InvalidValue {
                row: row_no,
                column: "ER",
                reason: "resistivity must be strictly positive",
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn parse_csv_path(path: impl AsRef<Path>) -> Result<Vec<SoilRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(std::io::BufReader::new(file))
}

/// Complete-case encoding: rows missing any of Mol, Moist, Uw or ER are dropped.
pub fn encode(records: &[SoilRecord]) -> Vec<EncodedRecord> {
    records
        .iter()
        .filter_map(|r| {
            Some(EncodedRecord {
                x: Covariates::new(r.soil_type, r.mol?, r.moist?, r.uw?),
                er: r.er?,
            })
        })
        .collect()
}

/// Covariates of every row with Mol, Moist and Uw present, paired with the
/// 0-based row index and the observed ER when available.
pub fn encode_covariates(records: &[SoilRecord]) -> Vec<(usize, Covariates, Option<f64>)> {
    records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            Some((
                i,
                Covariates::new(r.soil_type, r.mol?, r.moist?, r.uw?),
                r.er,
            ))
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Writes records in the input schema. `f64` values use the shortest
/// representation that parses back to the same bits.
pub fn write_csv<W: Write>(records: &[SoilRecord], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["ST", "Mol", "Moist", "Uw", "ER"])?;
    for r in records {
        w.write_record([
            r.soil_type.label().to_string(),
            fmt_opt(r.mol),
            fmt_opt(r.moist),
            fmt_opt(r.uw),
            fmt_opt(r.er),
        ])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv sink>".into(),
        source,
    })?;
    Ok(())
}

/// Number of records per soil type, in [`SoilType::ALL`] order.
pub fn soil_type_counts<'a, I>(types: I) -> [usize; 9]
where
    I: IntoIterator<Item = &'a SoilType>,
{
    let mut counts = [0; 9];
    for st in types {
        let idx = SoilType::ALL.iter().position(|s| s == st).unwrap();
        counts[idx] += 1;
    }
    counts
}

/// Descriptive statistics for one continuous variable.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableSummary {
    pub name: &'static str,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub variables: Vec<VariableSummary>,
}

/// Sample quantile by linear interpolation between order statistics
/// (`h = (n - 1) p`). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize_values(name: &'static str, values: &[Option<f64>]) -> Result<VariableSummary> {
    let mut present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::AllMissing(name));
    }
    present.sort_by(f64::total_cmp);
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    Ok(VariableSummary {
        name,
        min: present[0],
        q1: quantile_sorted(&present, 0.25),
        median: quantile_sorted(&present, 0.5),
        mean,
        q3: quantile_sorted(&present, 0.75),
        max: present[present.len() - 1],
        missing: values.len() - present.len(),
    })
}

/// Summary of Mol, Moist, Uw and ER.
pub fn summarize(records: &[SoilRecord]) -> Result<SummaryTable> {
    let col = |f: fn(&SoilRecord) -> Option<f64>| records.iter().map(f).collect::<Vec<_>>();
    Ok(SummaryTable {
        variables: vec![
            summarize_values("Mol", &col(|r| r.mol))?,
            summarize_values("Moist", &col(|r| r.moist))?,
            summarize_values("Uw", &col(|r| r.uw))?,
            summarize_values("ER", &col(|r| r.er))?,
        ],
    })
}

impl SummaryTable {
    fn rows(&self) -> [(&'static str, Vec<String>); 7] {
        let stat = |f: fn(&VariableSummary) -> f64| {
            self.variables.iter().map(|v| f(v).to_string()).collect()
        };
        [
            ("min", stat(|v| v.min)),
            ("q1", stat(|v| v.q1)),
            ("median", stat(|v| v.median)),
            ("mean", stat(|v| v.mean)),
            ("q3", stat(|v| v.q3)),
            ("max", stat(|v| v.max)),
            (
                "missing",
                self.variables
                    .iter()
                    .map(|v| v.missing.to_string())
                    .collect(),
            ),
        ]
    }

    /// One row per statistic, one column per variable.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["statistic"];
        header.extend(self.variables.iter().map(|v| v.name));
        w.write_record(&header)?;
        for (label, values) in self.rows() {
            let mut rec = vec![label.to_string()];
            rec.extend(values);
            w.write_record(&rec)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv sink>".into(),
            source,
        })?;
        Ok(())
    }
}

impl fmt::Display for SummaryTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<10}", "")?;
        for v in &self.variables {
            write!(f, "{:>12}", v.name)?;
        }
        writeln!(f)?;
        let labels = ["Min.", "1st Qu.", "Median", "Mean", "3rd Qu.", "Max."];
        let getters: [fn(&VariableSummary) -> f64; 6] = [
            |v| v.min,
            |v| v.q1,
            |v| v.median,
            |v| v.mean,
            |v| v.q3,
            |v| v.max,
        ];
        for (label, get) in labels.iter().zip(getters) {
            write!(f, "{:<10}", label)?;
            for v in &self.variables {
                write!(f, "{:>12.4}", get(v))?;
            }
            writeln!(f)?;
        }
        write!(f, "{:<10}", "NA's")?;
        for v in &self.variables {
            write!(f, "{:>12}", v.missing)?;
        }
        writeln!(f)
    }
}

/// Equal-width histogram over `[min, max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Bins the finite values of `values`; non-finite entries are ignored. The
/// maximum lands in the last bin. Constant data get a unit-width range
/// centred on the value.
pub fn histogram(values: &[f64], bin_count: usize) -> Result<Histogram> {
    if bin_count == 0 {
        return Err(Error::Domain("bin count must be at least 1".into()));
    }
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::EmptyInput(
            "histogram needs at least one finite value",
        ));
    }
    let mut lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bin_count as f64;
    let mut edges: Vec<f64> = (0..=bin_count).map(|k| lo + k as f64 * width).collect();
    edges[bin_count] = hi;
    let mut counts = vec![0usize; bin_count];
    for v in finite {
        let k = (((v - lo) / width).floor() as usize).min(bin_count - 1);
        counts[k] += 1;
    }
    Ok(Histogram { edges, counts })
}

impl Histogram {
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["bin_lo", "bin_hi", "count"])?;
        for (k, c) in self.counts.iter().enumerate() {
            w.write_record([
                self.edges[k].to_string(),
                self.edges[k + 1].to_string(),
                c.to_string(),
            ])?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv sink>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Moment skewness `m3 / m2^(3/2)` of the finite values.
pub fn skewness(values: &[f64]) -> f64 {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = v.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Wenner four-electrode resistivity `2 pi a V / I` in Ohm-m.
pub fn wenner_resistivity(spacing: f64, voltage: f64, current: f64) -> Result<f64> {
    if current == 0.0 {
        return Err(Error::DivisionByZero("current must be non-zero"));
    }
    if !(spacing > 0.0) {
        return Err(Error::Domain(format!(
            "electrode spacing must be positive, got {spacing}"
        )));
    }
    Ok(2.0 * std::f64::consts::PI * spacing * voltage / current)
}
