//! Weighted empirical CDFs per indicator and the positional depth score
//! `s = (1 - F(x)) / (1 - F(m))`, with `m` the lowest observed achievement.
//!
//! A [`ReferenceDistribution`] is fitted once and then only evaluated. Whether
//! it plays the role of an anchored baseline, an in-sample reference or a
//! pooled reference is decided by what data it was fitted on; the mode tag
//! records that choice.

use serde::{Deserialize, Serialize};

use crate::indicator::{Dataset, IndicatorSpec};
use crate::sum::NeumaierSum;
use crate::{Error, Result};

pub const FORMAT_NAME: &str = "posgap-reference";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    Anchored,
    InSample,
    Pooled,
}

impl std::str::FromStr for ReferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "anchored" => Ok(Self::Anchored),
            "in_sample" => Ok(Self::InSample),
            "pooled" => Ok(Self::Pooled),
            other => Err(Error::InvalidArgument(format!("unknown reference mode `{other}`"))),
        }
    }
}

/// How pooled references combine periods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PoolWeighting {
    /// Plain concatenation of rows and survey weights.
    #[default]
    Concatenate,
    /// Rescale each period's weights to the same total before concatenating.
    EqualTotals,
}

/// Step CDF of one indicator.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnCdf {
    support: Vec<f64>,
    cum_share: Vec<f64>,
    denominator: f64,
}

impl ColumnCdf {
    /// Fit from `(value, weight)` pairs given in row order.
    pub fn fit(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDataset("empty column".into()));
        }
        if values.len() != weights.len() {
            return Err(Error::LengthMismatch("values and weights".into()));
        }
        let total: f64 = weights.iter().copied().collect::<NeumaierSum>().value();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::NonPositiveTotalWeight);
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        // stable: ties keep row order, so bucket sums do not depend on values elsewhere
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

        let mut support = Vec::new();
        let mut cum_share = Vec::new();
        let mut running = NeumaierSum::new();
        let mut idx = 0;
        while idx < order.len() {
            let v = values[order[idx]];
            let mut bucket = NeumaierSum::new();
            while idx < order.len() && values[order[idx]] == v {
                bucket.add(weights[order[idx]]);
                idx += 1;
            }
            running.add(bucket.value());
            support.push(v);
            cum_share.push((running.value() / total).min(1.0));
        }
        *cum_share.last_mut().unwrap() = 1.0;
        let denominator = 1.0 - cum_share[0];
        Ok(Self {
            support,
            cum_share,
            denominator,
        })
    }

    fn from_parts(support: Vec<f64>, cum_share: Vec<f64>, denominator: f64) -> Result<Self> {
        if support.is_empty() || support.len() != cum_share.len() {
            return Err(Error::ReferenceDocument("support and cum_share must be non-empty and equally long".into()));
        }
        if support.windows(2).any(|w| !(w[0] < w[1])) || support.iter().any(|v| !v.is_finite()) {
            return Err(Error::ReferenceDocument("support must be strictly increasing".into()));
        }
        if cum_share.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::ReferenceDocument("cum_share is not monotone".into()));
        }
        if !(cum_share[0] > 0.0) || cum_share.iter().any(|c| !(*c <= 1.0)) {
            return Err(Error::ReferenceDocument("cum_share must lie in (0, 1]".into()));
        }
        if (cum_share[cum_share.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::ReferenceDocument("cum_share does not end at 1".into()));
        }
        if denominator != 1.0 - cum_share[0] {
            return Err(Error::ReferenceDocument("denominator disagrees with the share at the minimum".into()));
        }
        Ok(Self {
            support,
            cum_share,
            denominator,
        })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn cum_share(&self) -> &[f64] {
        &self.cum_share
    }

    /// Lowest observed achievement `m`.
    pub fn min_value(&self) -> f64 {
        self.support[0]
    }

    pub fn max_value(&self) -> f64 {
        self.support[self.support.len() - 1]
    }

    /// `D = 1 - F(m)`.
    pub fn denominator(&self) -> f64 {
        self.denominator
    }

    /// All mass on a single value.
    pub fn is_degenerate(&self) -> bool {
        self.denominator == 0.0
    }

    /// Right-continuous `F(x)`: 0 below the support, 1 at or above its maximum.
    #[inline]
    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.support.partition_point(|&v| v <= x);
        if idx == 0 {
            0.0
        } else {
            self.cum_share[idx - 1]
        }
    }

    /// Positional depth score clamped to `[0, 1]`. A degenerate column scores
    /// 1 at (or below) its atom and 0 above it.
    #[inline]
    pub fn score(&self, x: f64) -> f64 {
        if self.is_degenerate() {
            return if x <= self.min_value() { 1.0 } else { 0.0 };
        }
        ((1.0 - self.cdf(x)) / self.denominator).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 fingerprints of the fitted datasets, in order.
    pub fingerprints: Vec<String>,
    pub rows: usize,
    /// Fit time, seconds since the Unix epoch (`SOURCE_DATE_EPOCH` wins when set).
    pub fitted_at_unix: u64,
    #[serde(default)]
    pub pooling: Option<PoolWeighting>,
}

/// Per-indicator reference CDFs.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceDistribution {
    mode: ReferenceMode,
    names: Vec<String>,
    columns: Vec<ColumnCdf>,
    provenance: Provenance,
}

fn now_unix() -> u64 {
    if let Some(epoch) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse().ok()) {
        return epoch;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl ReferenceDistribution {
    /// Fit per-indicator CDFs on `data`.
    pub fn fit(data: &Dataset, specs: &[IndicatorSpec], mode: ReferenceMode) -> Result<Self> {
        let mut out = Self::fit_unstamped(data, specs, mode)?;
        out.provenance.fitted_at_unix = now_unix();
        out.provenance.fingerprints = vec![data.fingerprint()];
        Ok(out)
    }

    /// Fit without computing provenance hashes or timestamps.
    ///
    /// Used in inner loops (axiom checks, subgroup sweeps) where provenance is
    /// never read.
    pub fn fit_unstamped(data: &Dataset, specs: &[IndicatorSpec], mode: ReferenceMode) -> Result<Self> {
        if specs.len() != data.d() {
            return Err(Error::LengthMismatch(format!(
                "dataset has {} indicators, spec declares {}",
                data.d(),
                specs.len()
            )));
        }
        let weights = data.survey_weights();
        let columns = crate::par::map_range(data.d(), |j| {
            let values: Vec<f64> = data.column(j).collect();
            ColumnCdf::fit(&values, weights).map_err(|e| match e {
                Error::InvalidDataset(_) => Error::EmptyColumn(specs[j].name().to_string()),
                other => other,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mode,
            names: specs.iter().map(|s| s.name().to_string()).collect(),
            columns,
            provenance: Provenance {
                fingerprints: Vec::new(),
                rows: data.n(),
                fitted_at_unix: 0,
                pooling: None,
            },
        })
    }

    /// Fit on several periods at once.
    pub fn fit_pooled(parts: &[&Dataset], specs: &[IndicatorSpec], pooling: PoolWeighting) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidDataset("pooled reference needs at least one dataset".into()));
        }
        let pooled = match pooling {
            PoolWeighting::Concatenate => Dataset::concat(parts)?,
            PoolWeighting::EqualTotals => {
                let rescaled: Vec<Dataset> = parts
                    .iter()
                    .map(|p| {
                        let total = p.total_weight();
                        let w = p.survey_weights().iter().map(|w| w / total).collect();
                        (*p).clone().with_survey_weights(w)
                    })
                    .collect::<Result<_>>()?;
                Dataset::concat(&rescaled.iter().collect::<Vec<_>>())?
            }
        };
        let mut out = Self::fit_unstamped(&pooled, specs, ReferenceMode::Pooled)?;
        out.provenance.fitted_at_unix = now_unix();
        out.provenance.fingerprints = parts.iter().map(|p| p.fingerprint()).collect();
        out.provenance.pooling = Some(pooling);
        Ok(out)
    }

    pub fn mode(&self) -> ReferenceMode {
        self.mode
    }

    /// Same distributions under a different mode tag.
    pub fn with_mode(mut self, mode: ReferenceMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, j: usize) -> Result<&ColumnCdf> {
        self.columns.get(j).ok_or(Error::UnknownIndicator(j))
    }

    pub fn columns(&self) -> &[ColumnCdf] {
        &self.columns
    }

    pub fn cdf_value(&self, j: usize, x: f64) -> Result<f64> {
        Ok(self.column(j)?.cdf(x))
    }

    pub fn positional_depth_score(&self, j: usize, x: f64) -> Result<f64> {
        Ok(self.column(j)?.score(x))
    }

    /// Names of indicators whose reference puts all mass on one value.
    pub fn degenerate_columns(&self) -> Vec<&str> {
        self.names
            .iter()
            .zip(&self.columns)
            .filter(|(_, c)| c.is_degenerate())
            .map(|(n, _)| n.as_str())
            .collect()
    }

    /// Check that this reference covers `specs` by name and order.
    pub fn check_covers(&self, specs: &[IndicatorSpec]) -> Result<()> {
        if specs.len() != self.columns.len() {
            return Err(Error::ReferenceMismatch(format!(
                "reference has {} indicators, spec declares {}",
                self.columns.len(),
                specs.len()
            )));
        }
        for (name, spec) in self.names.iter().zip(specs) {
            if name != spec.name() {
                return Err(Error::ReferenceMismatch(format!(
                    "expected indicator `{}`, reference has `{name}`",
                    spec.name()
                )));
            }
        }
        Ok(())
    }

    /// Serialize to the versioned JSON document. Numbers are written as
    /// 17-significant-digit decimal strings so they read back bit-exactly.
    pub fn to_document(&self) -> String {
        let doc = Document {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            mode: self.mode,
            provenance: self.provenance.clone(),
            indicators: self
                .names
                .iter()
                .zip(&self.columns)
                .map(|(name, c)| IndicatorRecord {
                    name: name.clone(),
                    support: c.support.iter().map(|v| exact(*v)).collect(),
                    cum_share: c.cum_share.iter().map(|v| exact(*v)).collect(),
                    min: exact(c.min_value()),
                    denominator: exact(c.denominator),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("reference document serializes")
    }

    pub fn from_document(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text).map_err(|e| Error::ReferenceDocument(e.to_string()))?;
        if doc.format != FORMAT_NAME {
            return Err(Error::ReferenceDocument(format!("unexpected format `{}`", doc.format)));
        }
        if doc.version != FORMAT_VERSION {
            return Err(Error::ReferenceDocument(format!(
                "unsupported version {} (expected {FORMAT_VERSION})",
                doc.version
            )));
        }
        let mut names = Vec::with_capacity(doc.indicators.len());
        let mut columns = Vec::with_capacity(doc.indicators.len());
        for rec in doc.indicators {
            let support = rec.support.iter().map(|s| parse_exact(s)).collect::<Result<Vec<_>>>()?;
            let cum_share = rec.cum_share.iter().map(|s| parse_exact(s)).collect::<Result<Vec<_>>>()?;
            let column = ColumnCdf::from_parts(support, cum_share, parse_exact(&rec.denominator)?)
                .map_err(|e| Error::ReferenceDocument(format!("indicator `{}`: {e}", rec.name)))?;
            if parse_exact(&rec.min)? != column.min_value() {
                return Err(Error::ReferenceDocument(format!(
                    "indicator `{}`: min disagrees with support",
                    rec.name
                )));
            }
            names.push(rec.name);
            columns.push(column);
        }
        if columns.is_empty() {
            return Err(Error::ReferenceDocument("no indicators".into()));
        }
        Ok(Self {
            mode: doc.mode,
            names,
            columns,
            provenance: doc.provenance,
        })
    }
}

fn exact(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_exact(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::ReferenceDocument(format!("bad number `{s}`")))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    version: u32,
    mode: ReferenceMode,
    provenance: Provenance,
    indicators: Vec<IndicatorRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndicatorRecord {
    name: String,
    support: Vec<String>,
    cum_share: Vec<String>,
    min: String,
    denominator: String,
}
