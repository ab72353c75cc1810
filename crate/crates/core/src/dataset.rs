//! Ingestion and blinded storage of the observational data.
//!
//! Outcomes are parsed at load time but sealed: `BlindedDataset` exposes no
//! outcome accessor, so design- and balance-stage code cannot read them even
//! by accident. They become readable only through `AnalysisDataset`, which is
//! constructed against a verified `DesignLock` (see the design module).

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::canon::sha256_hex;
use crate::error::{Error, Result};

/// A sealed FEV-1 value. The inner field is private to this module and has
/// no public accessor; unsealing goes through the design-lock gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SealedOutcome(f64);

impl SealedOutcome {
    pub(crate) fn reveal(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub fn as_f64(self) -> f64 {
        match self {
            Sex::Female => 0.0,
            Sex::Male => 1.0,
        }
    }
}

/// One child: open covariates and treatment, sealed outcome.
#[derive(Debug, Clone)]
pub struct UnitRecord {
    pub id: u32,
    /// Age in years.
    pub age: f64,
    /// Height in inches.
    pub height: f64,
    pub sex: Sex,
    /// true = exposed (smoking parents).
    pub treated: bool,
    pub outcome: SealedOutcome,
}

impl UnitRecord {
    pub fn covariate(&self, c: Covariate) -> f64 {
        match c {
            Covariate::Age => self.age,
            Covariate::Height => self.height,
            Covariate::Sex => self.sex.as_f64(),
        }
    }

    pub fn term(&self, t: Term) -> f64 {
        match t {
            Term::Age => self.age,
            Term::AgeSq => self.age * self.age,
            Term::Height => self.height,
            Term::HeightSq => self.height * self.height,
            Term::Sex => self.sex.as_f64(),
            Term::SexAge => self.sex.as_f64() * self.age,
            Term::SexHeight => self.sex.as_f64() * self.height,
        }
    }
}

/// The three background covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Covariate {
    Age,
    Height,
    Sex,
}

impl Covariate {
    pub const ALL: [Covariate; 3] = [Covariate::Age, Covariate::Height, Covariate::Sex];

    pub fn is_binary(self) -> bool {
        matches!(self, Covariate::Sex)
    }

    pub fn name(self) -> &'static str {
        match self {
            Covariate::Age => "age",
            Covariate::Height => "height",
            Covariate::Sex => "sex",
        }
    }
}

/// Covariates plus their squares and sex interactions, the balance terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Age,
    AgeSq,
    Height,
    HeightSq,
    Sex,
    SexAge,
    SexHeight,
}

impl Term {
    pub const ALL: [Term; 7] = [
        Term::Age,
        Term::AgeSq,
        Term::Height,
        Term::HeightSq,
        Term::Sex,
        Term::SexAge,
        Term::SexHeight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Term::Age => "age",
            Term::AgeSq => "age_sq",
            Term::Height => "height",
            Term::HeightSq => "height_sq",
            Term::Sex => "sex",
            Term::SexAge => "sex_age",
            Term::SexHeight => "sex_height",
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Column-name map from the protocol config onto the input header.
/// The reference schema is the public FEV file: age, fev, ht, sex, smoke.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaMap {
    pub age: String,
    pub height: String,
    pub sex: String,
    pub treatment: String,
    pub outcome: String,
}

impl Default for SchemaMap {
    fn default() -> Self {
        SchemaMap {
            age: "age".into(),
            height: "ht".into(),
            sex: "sex".into(),
            treatment: "smoke".into(),
            outcome: "fev".into(),
        }
    }
}

/// The units before the design-lock gate; outcomes sealed.
#[derive(Debug, Clone)]
pub struct BlindedDataset {
    units: Vec<UnitRecord>,
    schema_fingerprint: String,
}

impl BlindedDataset {
    pub fn units(&self) -> &[UnitRecord] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn schema_fingerprint(&self) -> &str {
        &self.schema_fingerprint
    }

    pub fn ids(&self) -> Vec<u32> {
        self.units.iter().map(|u| u.id).collect()
    }

    pub fn unit(&self, id: u32) -> Option<&UnitRecord> {
        // ids are assigned 1..n in file order but restriction can thin them
        self.units.iter().find(|u| u.id == id)
    }

    /// Restrict to the given ids, preserving order; outcomes stay sealed.
    pub fn restrict(&self, ids: &[u32]) -> Result<BlindedDataset> {
        let want: BTreeSet<u32> = ids.iter().copied().collect();
        let units: Vec<UnitRecord> = self
            .units
            .iter()
            .filter(|u| want.contains(&u.id))
            .cloned()
            .collect();
        if units.len() != want.len() {
            return Err(Error::Consistency(
                "restriction id not present in dataset".into(),
            ));
        }
        if units.is_empty() {
            return Err(Error::EmptyInput("restriction removed every unit".into()));
        }
        Ok(BlindedDataset {
            units,
            schema_fingerprint: self.schema_fingerprint.clone(),
        })
    }

    /// Construct directly (tests and FFI); ids must be unique.
    pub fn from_units(units: Vec<UnitRecord>) -> Result<BlindedDataset> {
        if units.is_empty() {
            return Err(Error::EmptyInput("dataset needs at least one unit".into()));
        }
        let mut seen = BTreeSet::new();
        for u in &units {
            if !seen.insert(u.id) {
                return Err(Error::Consistency(format!("duplicate unit id {}", u.id)));
            }
            validate_unit(u.id as usize, u.age, u.height)?;
        }
        Ok(BlindedDataset {
            units,
            schema_fingerprint: "in-memory".into(),
        })
    }

    pub(crate) fn sealed_outcome(&self, id: u32) -> Option<f64> {
        self.unit(id).map(|u| u.outcome.reveal())
    }
}

fn validate_unit(row: usize, age: f64, height: f64) -> Result<()> {
    if !(0.0..=120.0).contains(&age) {
        return Err(Error::Parse {
            row,
            message: format!("age {age} outside [0, 120]"),
        });
    }
    if !(height > 0.0 && height < 100.0) {
        return Err(Error::Parse {
            row,
            message: format!("height {height} outside (0, 100)"),
        });
    }
    Ok(())
}

fn validate_outcome(row: usize, outcome: f64) -> Result<()> {
    if !(outcome > 0.0 && outcome.is_finite()) {
        return Err(Error::Parse {
            row,
            message: format!("outcome {outcome} must be positive"),
        });
    }
    Ok(())
}

fn parse_number(field: &str, row: usize, name: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        row,
        message: format!("non-numeric value `{}` in column `{}`", field.trim(), name),
    })
}

fn parse_binary(field: &str, row: usize, name: &str) -> Result<bool> {
    match field.trim().to_ascii_lowercase().as_str() {
        "0" | "f" | "female" | "no" | "false" => Ok(false),
        "1" | "m" | "male" | "yes" | "true" => Ok(true),
        other => Err(Error::Parse {
            row,
            message: format!("unrecognized code `{other}` in column `{name}`"),
        }),
    }
}

/// Read a comma-separated UTF-8 file with a header line, one unit per row.
/// Ids are assigned 1..n in file order; the outcome column is parsed and
/// immediately sealed.
pub fn load_csv(path: &Path, schema: &SchemaMap) -> Result<BlindedDataset> {
    let text = std::fs::read_to_string(path)?;
    load_csv_str(&text, schema)
}

pub fn load_csv_str(text: &str, schema: &SchemaMap) -> Result<BlindedDataset> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::EmptyInput("file has no header line".into()))?;
    let header = header.trim_start_matches('\u{feff}');
    let columns: Vec<&str> = header.split(',').map(|c| c.trim()).collect();
    let col = |name: &str| -> Result<usize> {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (i_age, i_ht, i_sex, i_tr, i_out) = (
        col(&schema.age)?,
        col(&schema.height)?,
        col(&schema.sex)?,
        col(&schema.treatment)?,
        col(&schema.outcome)?,
    );

    let mut units = Vec::new();
    for (row0, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = row0 + 1; // 1-based data row number
        let fields: Vec<&str> = line.split(',').collect();
        let need = [i_age, i_ht, i_sex, i_tr, i_out]
            .iter()
            .copied()
            .max()
            .unwrap();
        if fields.len() <= need {
            return Err(Error::Parse {
                row,
                message: format!("row has {} fields, need {}", fields.len(), need + 1),
            });
        }
        let age = parse_number(fields[i_age], row, &schema.age)?;
        let height = parse_number(fields[i_ht], row, &schema.height)?;
        let sex = if parse_binary(fields[i_sex], row, &schema.sex)? {
            Sex::Male
        } else {
            Sex::Female
        };
        let treated = parse_binary(fields[i_tr], row, &schema.treatment)?;
        let outcome = parse_number(fields[i_out], row, &schema.outcome)?;
        validate_unit(row, age, height)?;
        validate_outcome(row, outcome)?;
        units.push(UnitRecord {
            id: row as u32,
            age,
            height,
            sex,
            treated,
            outcome: SealedOutcome(outcome),
        });
    }
    if units.is_empty() {
        return Err(Error::EmptyInput("file contains no data rows".into()));
    }
    let fingerprint = sha256_hex(&[columns.join(",").as_bytes()]);
    Ok(BlindedDataset {
        units,
        schema_fingerprint: fingerprint,
    })
}

/// Six-number summary for one variable (type-7 linear-interpolation quantiles).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VariableSummary {
    pub min: f64,
    pub q25: f64,
    pub mean: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CovariateSummary {
    pub n: usize,
    pub age: VariableSummary,
    pub height: VariableSummary,
    pub treated_fraction: f64,
    pub male_fraction: f64,
}

/// Linear-interpolation (type-7) quantile of a sorted slice.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&p));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

fn summarize_variable(values: &[f64]) -> VariableSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    VariableSummary {
        min: sorted[0],
        q25: quantile_type7(&sorted, 0.25),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        median: quantile_type7(&sorted, 0.5),
        q75: quantile_type7(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    }
}

/// Per-variable summaries over the blinded dataset; never touches outcomes.
pub fn summarize(ds: &BlindedDataset) -> CovariateSummary {
    let n = ds.len();
    let ages: Vec<f64> = ds.units().iter().map(|u| u.age).collect();
    let heights: Vec<f64> = ds.units().iter().map(|u| u.height).collect();
    let treated = ds.units().iter().filter(|u| u.treated).count();
    let male = ds.units().iter().filter(|u| u.sex == Sex::Male).count();
    CovariateSummary {
        n,
        age: summarize_variable(&ages),
        height: summarize_variable(&heights),
        treated_fraction: treated as f64 / n as f64,
        male_fraction: male as f64 / n as f64,
    }
}

/// Immutable lock over a frozen design plus its pre-registered analysis
/// protocol. `hash` commits to both component digests; the timestamp is
/// informational and deliberately outside the hash.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignLock {
    pub design_id: String,
    pub design_hash: String,
    pub protocol_hash: String,
    pub hash: String,
    pub timestamp: String,
}
