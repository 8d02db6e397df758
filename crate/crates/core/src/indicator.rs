//! Indicator definitions, the declarative spec file, and encoding of
//! raw survey tables onto ascending-good achievement scales.
//!
//! Ordinal indicators are stored as achievement codes `0..X` (as `f64`), in the
//! declared order. Cardinal indicators keep their numeric values; the
//! lower-is-better ones are negated on ingestion (cutoff included) so every
//! column reads "larger is better" downstream.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Tolerance on `sum(w_j) == 1` for specs handed to the measurement code.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Cell tokens treated as missing.
pub const MISSING_TOKENS: &[&str] = &["", "NA", "N/A", "NaN", "nan", "."];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    HigherIsBetter,
    LowerIsBetter,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum IndicatorKind {
    /// `levels[c]` holds the raw labels mapped to achievement code `c`.
    /// More than one label per level expresses a semiorder.
    Ordinal { levels: Vec<Vec<String>> },
    Cardinal { direction: Direction },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    #[default]
    Error,
    DropRow,
    #[serde(alias = "treat_as_most_deprived")]
    TreatAsMostDeprived,
}

impl std::str::FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "error" => Ok(Self::Error),
            "drop-row" => Ok(Self::DropRow),
            "treat-as-most-deprived" => Ok(Self::TreatAsMostDeprived),
            other => Err(Error::InvalidArgument(format!("unknown missing policy `{other}`"))),
        }
    }
}

/// One indicator: scale, deprivation cutoff and weight.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndicatorSpec {
    name: String,
    source_column: String,
    kind: IndicatorKind,
    /// Cutoff on the internal ascending-good scale.
    cutoff: f64,
    /// Cutoff as declared (before any direction flip).
    raw_cutoff: f64,
    weight: f64,
}

impl IndicatorSpec {
    /// Ordinal indicator from ordered levels; `cutoff_code` indexes `levels`.
    pub fn ordinal(name: impl Into<String>, levels: Vec<Vec<String>>, cutoff_code: usize, weight: f64) -> Result<Self> {
        let name = name.into();
        if levels.len() < 2 {
            return Err(Error::InvalidCategories {
                name,
                reason: "needs at least 2 ordered categories".into(),
            });
        }
        let mut seen = HashSet::new();
        for label in levels.iter().flatten() {
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidCategories {
                    name,
                    reason: format!("duplicate category `{label}`"),
                });
            }
        }
        if levels.iter().any(|l| l.is_empty()) {
            return Err(Error::InvalidCategories {
                name,
                reason: "empty category level".into(),
            });
        }
        if cutoff_code == 0 || cutoff_code >= levels.len() {
            return Err(Error::TrivialCutoff {
                name,
                cutoff: cutoff_code.to_string(),
            });
        }
        check_weight(&name, weight)?;
        Ok(Self {
            source_column: name.clone(),
            name,
            kind: IndicatorKind::Ordinal { levels },
            cutoff: cutoff_code as f64,
            raw_cutoff: cutoff_code as f64,
            weight,
        })
    }

    /// Ordinal indicator on codes `0..scale_size` labelled by their code.
    pub fn ordinal_scale(name: impl Into<String>, scale_size: usize, cutoff_code: usize, weight: f64) -> Result<Self> {
        let levels = (0..scale_size).map(|c| vec![c.to_string()]).collect();
        Self::ordinal(name, levels, cutoff_code, weight)
    }

    pub fn cardinal(name: impl Into<String>, direction: Direction, cutoff: f64, weight: f64) -> Result<Self> {
        let name = name.into();
        if !cutoff.is_finite() {
            return Err(Error::TrivialCutoff {
                name,
                cutoff: cutoff.to_string(),
            });
        }
        check_weight(&name, weight)?;
        Ok(Self {
            source_column: name.clone(),
            name,
            kind: IndicatorKind::Cardinal { direction },
            cutoff: orient(direction, cutoff),
            raw_cutoff: cutoff,
            weight,
        })
    }

    pub fn with_source_column(mut self, column: impl Into<String>) -> Self {
        self.source_column = column.into();
        self
    }

    /// Same indicator with a different cutoff (declared orientation for
    /// cardinals, code for ordinals).
    pub fn with_cutoff(&self, cutoff: f64) -> Result<Self> {
        match &self.kind {
            IndicatorKind::Ordinal { levels } => {
                if cutoff.fract() != 0.0 || cutoff < 1.0 || cutoff >= levels.len() as f64 {
                    return Err(Error::TrivialCutoff {
                        name: self.name.clone(),
                        cutoff: cutoff.to_string(),
                    });
                }
                Ok(Self {
                    cutoff,
                    raw_cutoff: cutoff,
                    ..self.clone()
                })
            }
            IndicatorKind::Cardinal { direction } => {
                let mut out = Self::cardinal(self.name.clone(), *direction, cutoff, self.weight)?;
                out.source_column = self.source_column.clone();
                Ok(out)
            }
        }
    }

    pub fn with_weight(&self, weight: f64) -> Result<Self> {
        check_weight(&self.name, weight)?;
        Ok(Self { weight, ..self.clone() })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source_column(&self) -> &str {
        &self.source_column
    }

    pub fn kind(&self) -> &IndicatorKind {
        &self.kind
    }

    /// Deprivation cutoff on the internal ascending-good scale.
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn raw_cutoff(&self) -> f64 {
        self.raw_cutoff
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn is_ordinal(&self) -> bool {
        matches!(self.kind, IndicatorKind::Ordinal { .. })
    }

    /// Number of achievement levels of an ordinal indicator.
    pub fn scale_size(&self) -> Option<usize> {
        match &self.kind {
            IndicatorKind::Ordinal { levels } => Some(levels.len()),
            IndicatorKind::Cardinal { .. } => None,
        }
    }

    pub fn is_binary(&self) -> bool {
        self.scale_size() == Some(2)
    }

    /// Encode one raw cell. `Ok(None)` marks a missing cell.
    fn encode_cell(&self, raw: &str, row: usize) -> Result<Option<f64>> {
        let cell = raw.trim();
        if MISSING_TOKENS.contains(&cell) {
            return Ok(None);
        }
        match &self.kind {
            IndicatorKind::Ordinal { levels } => levels
                .iter()
                .position(|lvl| lvl.iter().any(|l| l == cell))
                .map(|c| Some(c as f64))
                .ok_or_else(|| Error::UnknownCategory {
                    row,
                    column: self.source_column.clone(),
                    value: cell.to_string(),
                }),
            IndicatorKind::Cardinal { direction } => match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(orient(*direction, v))),
                _ => Err(Error::NotNumeric {
                    row,
                    column: self.source_column.clone(),
                    value: cell.to_string(),
                }),
            },
        }
    }

    /// True when `value` is a legal internal value for this indicator.
    pub fn accepts(&self, value: f64) -> bool {
        match &self.kind {
            IndicatorKind::Ordinal { levels } => value.fract() == 0.0 && value >= 0.0 && value < levels.len() as f64,
            IndicatorKind::Cardinal { .. } => value.is_finite(),
        }
    }
}

fn orient(direction: Direction, value: f64) -> f64 {
    match direction {
        Direction::HigherIsBetter => value,
        Direction::LowerIsBetter => 0.0 - value,
    }
}

fn check_weight(name: &str, weight: f64) -> Result<()> {
    if weight > 0.0 && weight.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveWeight {
            name: name.to_string(),
            weight,
        })
    }
}

/// Rescale indicator weights to sum to one. Idempotent up to rounding.
pub fn normalize_weights(specs: &mut [IndicatorSpec]) {
    let total = crate::sum::sum(specs.iter().map(|s| s.weight));
    if total > 0.0 && (total - 1.0).abs() > f64::EPSILON {
        for s in specs.iter_mut() {
            s.weight /= total;
        }
    }
}

pub fn check_normalized(specs: &[IndicatorSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::NoIndicators);
    }
    let total = crate::sum::sum(specs.iter().map(|s| s.weight));
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::InvalidArgument(format!("indicator weights sum to {total}, expected 1")));
    }
    Ok(())
}

/// Smallest indicator weight: the poverty cutoff of the union rule.
pub fn min_weight(specs: &[IndicatorSpec]) -> f64 {
    specs.iter().map(|s| s.weight).fold(f64::INFINITY, f64::min)
}

/// Parsed spec document.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecDocument {
    pub indicators: Vec<IndicatorSpec>,
    pub survey_weight_column: Option<String>,
    pub subgroup_column: Option<String>,
    pub missing_policy: MissingPolicy,
    /// Load-time warnings (binary indicators, fuzzy-style cutoffs).
    pub diagnostics: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    indicators: Vec<RawIndicator>,
    survey_weight_column: Option<String>,
    subgroup_column: Option<String>,
    #[serde(default)]
    missing_policy: MissingPolicy,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawKind {
    Ordinal,
    Cardinal,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawCategory {
    Label(String),
    Tied(Vec<String>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawCutoff {
    Number(f64),
    Label(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIndicator {
    name: String,
    source_column: Option<String>,
    kind: RawKind,
    categories: Option<Vec<RawCategory>>,
    direction: Option<Direction>,
    #[serde(alias = "cutoff")]
    cutoff_z: RawCutoff,
    #[serde(alias = "weight", default = "default_weight")]
    weight_w: f64,
}

fn default_weight() -> f64 {
    1.0
}

/// Parse and validate a spec document (TOML).
///
/// ```toml
/// survey_weight_column = "wt"
/// missing_policy = "error"
///
/// [[indicators]]
/// name = "floor"
/// kind = "ordinal"
/// categories = ["earth", "wood planks", ["ceramic", "tile"]]
/// cutoff_z = "ceramic"
/// weight_w = 1
/// ```
///
/// Weights are normalized to sum to one.
pub fn parse_spec(text: &str) -> Result<SpecDocument> {
    let raw: RawDocument = toml::from_str(text).map_err(|e| Error::SpecSyntax(e.to_string()))?;
    if raw.indicators.is_empty() {
        return Err(Error::NoIndicators);
    }
    let mut names = HashSet::new();
    let mut indicators = Vec::with_capacity(raw.indicators.len());
    let mut diagnostics = Vec::new();
    for ind in raw.indicators {
        if !names.insert(ind.name.clone()) {
            return Err(Error::DuplicateIndicator(ind.name));
        }
        let spec = match ind.kind {
            RawKind::Ordinal => {
                let Some(categories) = ind.categories else {
                    return Err(Error::InvalidCategories {
                        name: ind.name,
                        reason: "ordinal indicator without categories".into(),
                    });
                };
                let levels: Vec<Vec<String>> = categories
                    .into_iter()
                    .map(|c| match c {
                        RawCategory::Label(l) => vec![l],
                        RawCategory::Tied(ls) => ls,
                    })
                    .collect();
                let code = match &ind.cutoff_z {
                    RawCutoff::Label(label) => levels.iter().position(|lvl| lvl.contains(label)).ok_or_else(|| {
                        Error::TrivialCutoff {
                            name: ind.name.clone(),
                            cutoff: label.clone(),
                        }
                    })?,
                    RawCutoff::Number(z) => {
                        if z.fract() != 0.0 || *z < 0.0 {
                            return Err(Error::TrivialCutoff {
                                name: ind.name,
                                cutoff: z.to_string(),
                            });
                        }
                        *z as usize
                    }
                };
                IndicatorSpec::ordinal(ind.name.clone(), levels, code, ind.weight_w)?
            }
            RawKind::Cardinal => {
                if ind.categories.is_some() {
                    return Err(Error::InvalidCategories {
                        name: ind.name,
                        reason: "cardinal indicators take no categories".into(),
                    });
                }
                let RawCutoff::Number(z) = ind.cutoff_z else {
                    return Err(Error::TrivialCutoff {
                        name: ind.name,
                        cutoff: "non-numeric".into(),
                    });
                };
                IndicatorSpec::cardinal(ind.name.clone(), ind.direction.unwrap_or_default(), z, ind.weight_w)?
            }
        };
        let spec = match ind.source_column {
            Some(col) => spec.with_source_column(col),
            None => spec,
        };
        if spec.is_binary() {
            diagnostics.push(format!(
                "indicator `{}` is binary: every deprived person scores depth 1",
                spec.name()
            ));
        }
        indicators.push(spec);
    }
    normalize_weights(&mut indicators);
    Ok(SpecDocument {
        indicators,
        survey_weight_column: raw.survey_weight_column,
        subgroup_column: raw.subgroup_column,
        missing_policy: raw.missing_policy,
        diagnostics,
    })
}

/// Raw tabular records: a header row plus string cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: Vec<String>, rows: Vec<Vec<String>>) -> Self {
        Self { headers, rows }
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }
}

/// Achievement matrix with survey weights and optional subgroup labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    values: Vec<f64>,
    survey_weights: Vec<f64>,
    subgroups: Option<Vec<String>>,
    missing: Vec<bool>,
}

impl Dataset {
    /// Row-major `n x d` values with optional survey weights (default 1).
    pub fn new(n: usize, d: usize, values: Vec<f64>, survey_weights: Option<Vec<f64>>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidDataset(format!("need n >= 1 and d >= 1, got {n}x{d}")));
        }
        if values.len() != n * d {
            return Err(Error::LengthMismatch(format!("{} values for a {n}x{d} matrix", values.len())));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("non-finite value at row {}", bad / d)));
        }
        let survey_weights = survey_weights.unwrap_or_else(|| vec![1.0; n]);
        if survey_weights.len() != n {
            return Err(Error::LengthMismatch(format!("{} survey weights for {n} rows", survey_weights.len())));
        }
        for (row, &w) in survey_weights.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidSurveyWeight { row, weight: w });
            }
        }
        Ok(Self {
            n,
            d,
            values,
            survey_weights,
            subgroups: None,
            missing: vec![false; n * d],
        })
    }

    /// Unit-weight dataset from rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::LengthMismatch("ragged rows".into()));
        }
        Self::new(n, d, rows.concat(), None)
    }

    pub fn with_subgroups(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::LengthMismatch(format!("{} labels for {} rows", labels.len(), self.n)));
        }
        self.subgroups = Some(labels);
        Ok(self)
    }

    pub fn with_survey_weights(self, weights: Vec<f64>) -> Result<Self> {
        let subgroups = self.subgroups.clone();
        let missing = self.missing.clone();
        let mut out = Self::new(self.n, self.d, self.values, Some(weights))?;
        out.subgroups = subgroups;
        out.missing = missing;
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.d + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(j).step_by(self.d).copied()
    }

    pub fn set_value(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.d + j] = v;
    }

    pub fn survey_weight(&self, i: usize) -> f64 {
        self.survey_weights[i]
    }

    pub fn survey_weights(&self) -> &[f64] {
        &self.survey_weights
    }

    pub fn total_weight(&self) -> f64 {
        crate::sum::sum(self.survey_weights.iter().copied())
    }

    pub fn subgroups(&self) -> Option<&[String]> {
        self.subgroups.as_deref()
    }

    /// Per-cell mask of values that were missing in the source and filled by policy.
    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[i * self.d + j]
    }

    /// Dataset restricted to `rows` (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * self.d);
        let mut missing = Vec::with_capacity(rows.len() * self.d);
        let mut weights = Vec::with_capacity(rows.len());
        for &i in rows {
            if i >= self.n {
                return Err(Error::InvalidDataset(format!("row {i} out of range")));
            }
            values.extend_from_slice(self.row(i));
            missing.extend_from_slice(&self.missing[i * self.d..(i + 1) * self.d]);
            weights.push(self.survey_weights[i]);
        }
        let mut out = Self::new(rows.len(), self.d, values, Some(weights))?;
        out.missing = missing;
        out.subgroups = self
            .subgroups
            .as_ref()
            .map(|labels| rows.iter().map(|&i| labels[i].clone()).collect());
        Ok(out)
    }

    /// Stack datasets with the same indicator count.
    pub fn concat(parts: &[&Dataset]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::InvalidDataset("nothing to concatenate".into()));
        };
        let d = first.d;
        if parts.iter().any(|p| p.d != d) {
            return Err(Error::LengthMismatch("datasets differ in indicator count".into()));
        }
        let n = parts.iter().map(|p| p.n).sum();
        let values = parts.iter().flat_map(|p| p.values.iter().copied()).collect();
        let weights = parts.iter().flat_map(|p| p.survey_weights.iter().copied()).collect();
        let mut out = Self::new(n, d, values, Some(weights))?;
        out.missing = parts.iter().flat_map(|p| p.missing.iter().copied()).collect();
        if parts.iter().all(|p| p.subgroups.is_some()) {
            out.subgroups = Some(parts.iter().flat_map(|p| p.subgroups.clone().unwrap()).collect());
        }
        Ok(out)
    }

    /// Check conformity with an indicator list.
    pub fn validate_against(&self, specs: &[IndicatorSpec]) -> Result<()> {
        if specs.len() != self.d {
            return Err(Error::LengthMismatch(format!(
                "dataset has {} indicators, spec declares {}",
                self.d,
                specs.len()
            )));
        }
        for i in 0..self.n {
            for (j, spec) in specs.iter().enumerate() {
                if !spec.accepts(self.value(i, j)) {
                    return Err(Error::InvalidDataset(format!(
                        "row {i}: {} is not a valid achievement for `{}`",
                        self.value(i, j),
                        spec.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 over shape, values and survey weights.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        h.update((self.d as u64).to_le_bytes());
        for v in self.values.iter().chain(&self.survey_weights) {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Encode a raw table according to a spec document.
///
/// The document's `missing_policy` decides what happens to missing cells:
/// `error` stops with the row and column, `drop-row` removes the row, and
/// `treat-as-most-deprived` fills the lowest achievement (code 0 for ordinal,
/// the observed column minimum for cardinal indicators).
pub fn encode_dataset(table: &Table, doc: &SpecDocument) -> Result<Dataset> {
    let specs = &doc.indicators;
    if specs.is_empty() {
        return Err(Error::NoIndicators);
    }
    let cols: Vec<usize> = specs
        .iter()
        .map(|s| table.column_index(s.source_column()))
        .collect::<Result<_>>()?;
    let weight_col = doc
        .survey_weight_column
        .as_deref()
        .map(|c| table.column_index(c))
        .transpose()?;
    let group_col = doc.subgroup_column.as_deref().map(|c| table.column_index(c)).transpose()?;

    let d = specs.len();
    let mut values = Vec::with_capacity(table.rows.len() * d);
    let mut missing = Vec::with_capacity(table.rows.len() * d);
    let mut weights = Vec::with_capacity(table.rows.len());
    let mut groups = Vec::new();
    for (r, row) in table.rows.iter().enumerate() {
        // 1-based data row number, header excluded
        let row_no = r + 1;
        let cell = |c: usize| row.get(c).map(String::as_str).unwrap_or("");
        let mut encoded = Vec::with_capacity(d);
        let mut row_missing = false;
        for (spec, &c) in specs.iter().zip(&cols) {
            let v = spec.encode_cell(cell(c), row_no)?;
            row_missing |= v.is_none();
            encoded.push(v);
        }
        let label = group_col.map(|c| cell(c).trim().to_string());
        let label_missing = label.as_deref().is_some_and(|l| MISSING_TOKENS.contains(&l));
        if row_missing || label_missing {
            match doc.missing_policy {
                MissingPolicy::Error => {
                    let column = if label_missing && !row_missing {
                        doc.subgroup_column.clone().unwrap_or_default()
                    } else {
                        let j = encoded.iter().position(Option::is_none).unwrap();
                        specs[j].source_column().to_string()
                    };
                    return Err(Error::MissingValue { row: row_no, column });
                }
                MissingPolicy::DropRow => continue,
                MissingPolicy::TreatAsMostDeprived => {}
            }
        }
        let weight = match weight_col {
            Some(c) => {
                let raw = cell(c).trim();
                let w = raw.parse::<f64>().map_err(|_| Error::NotNumeric {
                    row: row_no,
                    column: doc.survey_weight_column.clone().unwrap_or_default(),
                    value: raw.to_string(),
                })?;
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::InvalidSurveyWeight { row: row_no, weight: w });
                }
                w
            }
            None => 1.0,
        };
        weights.push(weight);
        if let Some(l) = label {
            groups.push(if label_missing { "(missing)".to_string() } else { l });
        }
        for v in encoded {
            missing.push(v.is_none());
            values.push(v.unwrap_or(f64::NAN));
        }
    }
    let n = weights.len();
    if n == 0 {
        return Err(Error::InvalidDataset("no usable rows".into()));
    }
    // fill missing cells with the lowest achievement
    for (j, spec) in specs.iter().enumerate() {
        let fill = match spec.kind() {
            IndicatorKind::Ordinal { .. } => 0.0,
            IndicatorKind::Cardinal { .. } => {
                let observed = (0..n).map(|i| values[i * d + j]).filter(|v| v.is_finite());
                let min = observed.fold(f64::INFINITY, f64::min);
                if !min.is_finite() {
                    return Err(Error::EmptyColumn(spec.name().to_string()));
                }
                min
            }
        };
        for i in 0..n {
            if missing[i * d + j] {
                values[i * d + j] = fill;
            }
        }
    }
    let mut data = Dataset::new(n, d, values, Some(weights))?;
    data.missing = missing;
    if group_col.is_some() {
        data.subgroups = Some(groups);
    }
    Ok(data)
}

/// Distinct subgroup labels in sorted order with their row indices.
pub fn group_rows(data: &Dataset) -> Result<BTreeMap<String, Vec<usize>>> {
    let labels = data.subgroups().ok_or(Error::MissingSubgroups)?;
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l.clone()).or_default().push(i);
    }
    Ok(groups)
}

/// Achievement code for each raw label of an ordinal indicator.
pub fn code_map(spec: &IndicatorSpec) -> Option<HashMap<&str, usize>> {
    match spec.kind() {
        IndicatorKind::Ordinal { levels } => Some(
            levels
                .iter()
                .enumerate()
                .flat_map(|(c, lvl)| lvl.iter().map(move |l| (l.as_str(), c)))
                .collect(),
        ),
        IndicatorKind::Cardinal { .. } => None,
    }
}
