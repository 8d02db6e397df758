//! Small self-contained problems, their generator and the evaluation engines.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::identification::{build_profile, deprivation_score, identify};
use crate::indicator::{Dataset, IndicatorSpec};
use crate::measures::{adjusted_value, individual_degrees};
use crate::reference::{ReferenceDistribution, ReferenceMode};
use crate::sum::NeumaierSum;
use crate::{Error, Result};

/// Identification rule of a grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identification {
    Union,
    /// `k` halfway between the smallest weight and 1.
    Intermediate,
    Intersection,
}

impl Identification {
    pub const ALL: [Identification; 3] = [Self::Union, Self::Intermediate, Self::Intersection];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Union => "union",
            Self::Intermediate => "intermediate",
            Self::Intersection => "intersection",
        }
    }

    /// Poverty cutoff under this rule, `None` when no intermediate cutoff exists.
    pub fn cutoff(self, weights: &[f64]) -> Option<f64> {
        let min = weights.iter().copied().fold(f64::INFINITY, f64::min);
        match self {
            Self::Union => Some(min),
            Self::Intersection => Some(1.0),
            Self::Intermediate if min < 1.0 - 1e-9 => Some((min + 1.0) / 2.0),
            Self::Intermediate => None,
        }
    }
}

impl std::str::FromStr for Identification {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown identification rule `{s}`")))
    }
}

/// A complete small problem on ordinal codes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub n: usize,
    pub d: usize,
    /// Row-major codes, column `j` in `0..scales[j]`.
    pub values: Vec<f64>,
    pub survey_weights: Vec<f64>,
    pub scales: Vec<usize>,
    pub cutoffs: Vec<usize>,
    /// Normalized indicator weights.
    pub weights: Vec<f64>,
    pub identification: Identification,
    pub k: f64,
    pub alpha: f64,
}

fn normalized(raw: &[f64]) -> Vec<f64> {
    let total: NeumaierSum = raw.iter().copied().collect();
    let total = total.value();
    raw.iter().map(|w| w / total).collect()
}

impl Instance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        d: usize,
        values: Vec<f64>,
        survey_weights: Vec<f64>,
        scales: Vec<usize>,
        cutoffs: Vec<usize>,
        raw_weights: &[f64],
        identification: Identification,
        alpha: f64,
    ) -> Result<Self> {
        if n == 0 || d == 0 || values.len() != n * d || survey_weights.len() != n {
            return Err(Error::LengthMismatch(format!("{n}x{d} instance")));
        }
        if scales.len() != d || cutoffs.len() != d || raw_weights.len() != d {
            return Err(Error::LengthMismatch("per-indicator vectors".into()));
        }
        let weights = normalized(raw_weights);
        let k = identification
            .cutoff(&weights)
            .ok_or_else(|| Error::InvalidArgument("no intermediate cutoff with a single indicator".into()))?;
        Ok(Self {
            n,
            d,
            values,
            survey_weights,
            scales,
            cutoffs,
            weights,
            identification,
            k,
            alpha,
        })
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.d + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.d + j] = v;
    }

    #[inline]
    pub fn deprived(&self, i: usize, j: usize) -> bool {
        self.value(i, j) < self.cutoffs[j] as f64
    }

    /// Same scales, cutoffs and weights, so the same specs.
    pub(crate) fn same_indicators(&self, other: &Instance) -> bool {
        self.scales == other.scales && self.cutoffs == other.cutoffs && self.weights == other.weights
    }

    pub fn top(&self, j: usize) -> f64 {
        (self.scales[j] - 1) as f64
    }

    pub fn total_weight(&self) -> f64 {
        crate::sum::sum(self.survey_weights.iter().copied())
    }

    pub fn poor(&self) -> Vec<bool> {
        let g0: Vec<bool> = (0..self.n * self.d).map(|idx| self.deprived(idx / self.d, idx % self.d)).collect();
        identify(&deprivation_score(&g0, &self.weights), self.k).expect("k validated at construction")
    }

    pub fn dataset(&self) -> Result<Dataset> {
        Dataset::new(self.n, self.d, self.values.clone(), Some(self.survey_weights.clone()))
    }

    pub fn specs(&self) -> Result<Vec<IndicatorSpec>> {
        (0..self.d)
            .map(|j| IndicatorSpec::ordinal_scale(format!("i{j}"), self.scales[j], self.cutoffs[j], self.weights[j]))
            .collect()
    }

    /// Rows and weights taken in `rows` order; indicator side unchanged.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = self.clone();
        out.n = rows.len();
        out.values = rows.iter().flat_map(|&i| self.values[i * self.d..(i + 1) * self.d].to_vec()).collect();
        out.survey_weights = rows.iter().map(|&i| self.survey_weights[i]).collect();
        out
    }

    /// Rows in `rows` order and indicators in `cols` order.
    pub fn permuted(&self, rows: &[usize], cols: &[usize]) -> Self {
        let base = self.select_rows(rows);
        let mut out = base.clone();
        out.d = cols.len();
        out.values = (0..base.n).flat_map(|i| cols.iter().map(move |&j| (i, j))).map(|(i, j)| base.value(i, j)).collect();
        out.scales = cols.iter().map(|&j| self.scales[j]).collect();
        out.cutoffs = cols.iter().map(|&j| self.cutoffs[j]).collect();
        out.weights = cols.iter().map(|&j| self.weights[j]).collect();
        out
    }

    /// Every person repeated `times` times.
    pub fn replicated(&self, times: usize) -> Self {
        let rows: Vec<usize> = (0..times).flat_map(|_| 0..self.n).collect();
        self.select_rows(&rows)
    }

    /// Recode column `j` through the strictly increasing `map` (old code to new code).
    pub fn relabeled(&self, j: usize, map: &[usize]) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out.set(i, j, map[self.value(i, j) as usize] as f64);
        }
        out.scales[j] = map[map.len() - 1] + 1;
        out.cutoffs[j] = map[self.cutoffs[j]];
        out
    }

    pub fn without_row(&self, r: usize) -> Option<Self> {
        if self.n < 2 {
            return None;
        }
        let rows: Vec<usize> = (0..self.n).filter(|&i| i != r).collect();
        Some(self.select_rows(&rows))
    }

    /// Drop indicator `c`, renormalize the weights and re-derive `k` under the same rule.
    pub fn without_column(&self, c: usize) -> Option<Self> {
        if self.d < 2 {
            return None;
        }
        let cols: Vec<usize> = (0..self.d).filter(|&j| j != c).collect();
        let mut out = self.permuted(&(0..self.n).collect::<Vec<_>>(), &cols);
        out.d = cols.len();
        out.weights = normalized(&out.weights);
        out.k = self.identification.cutoff(&out.weights)?;
        Some(out)
    }
}

pub fn fit_reference(inst: &Instance) -> Result<ReferenceDistribution> {
    fit_with(inst, &inst.specs()?)
}

/// [`fit_reference`] with prebuilt specs (they only depend on the indicator side).
pub(crate) fn fit_with(inst: &Instance, specs: &[IndicatorSpec]) -> Result<ReferenceDistribution> {
    ReferenceDistribution::fit_unstamped(&inst.dataset()?, specs, ReferenceMode::InSample)
}

/// Index evaluator. The faulty variant exists to check that the lab notices
/// a broken implementation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    #[default]
    Standard,
    /// Depth scores of the poor enter uncensored by deprivation status.
    SkipCensoring,
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "standard" => Ok(Self::Standard),
            "skip-censoring" => Ok(Self::SkipCensoring),
            other => Err(Error::InvalidArgument(format!("unknown fault `{other}`"))),
        }
    }
}

/// What the checks read back from one evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub p: f64,
    /// `P_i` raised per cell to `alpha`.
    pub individual: Vec<f64>,
    pub poor: Vec<bool>,
    pub g0: Vec<bool>,
    /// Uncensored depth scores, row-major.
    pub scores: Vec<f64>,
    /// Everyone poor, deprived everywhere and at depth 1.
    pub saturated: bool,
}

impl Engine {
    pub fn evaluate(self, inst: &Instance, reference: &ReferenceDistribution) -> Result<Evaluation> {
        self.evaluate_with(inst, &inst.specs()?, reference)
    }

    pub(crate) fn evaluate_with(
        self,
        inst: &Instance,
        specs: &[IndicatorSpec],
        reference: &ReferenceDistribution,
    ) -> Result<Evaluation> {
        let data = inst.dataset()?;
        let profile = build_profile(&data, specs, reference, inst.k)?;
        let (individual, p) = match self {
            Engine::Standard => (individual_degrees(&profile, inst.alpha)?, adjusted_value(&profile, inst.alpha)?),
            Engine::SkipCensoring => {
                let individual: Vec<f64> = (0..inst.n)
                    .map(|i| {
                        if !profile.is_poor(i) {
                            return 0.0;
                        }
                        (0..inst.d).map(|j| inst.weights[j] * profile.score(i, j).powf(inst.alpha)).sum()
                    })
                    .collect();
                let acc: NeumaierSum = individual.iter().zip(&inst.survey_weights).map(|(p, w)| p * w).collect();
                let p = acc.value() / profile.total_weight();
                (individual, p)
            }
        };
        let g0: Vec<bool> = (0..inst.n * inst.d).map(|idx| profile.g0(idx / inst.d, idx % inst.d)).collect();
        let poor = profile.poor().to_vec();
        let scores = profile.scores().to_vec();
        let saturated = poor.iter().all(|p| *p) && g0.iter().all(|g| *g) && scores.iter().all(|s| *s == 1.0);
        Ok(Evaluation {
            p,
            individual,
            poor,
            g0,
            scores,
            saturated,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    Equal,
    /// Integers 1..=4 before normalization; ties are common.
    Integer,
    Real,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurveyScheme {
    Unit,
    Integer,
    Real,
}

/// Parameters for [`gen_matrix`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n: usize,
    pub d: usize,
    pub scales: Vec<usize>,
    pub weights: WeightScheme,
    pub survey: SurveyScheme,
    /// Probability that a cell sits at the bottom code; raising it makes ties
    /// at the minimum (and therefore denominator shifts) frequent.
    pub low_mass: f64,
    pub identification: Identification,
    pub alpha: f64,
}

/// Random instance with uniformly drawn non-trivial cutoffs.
pub fn gen_matrix(seed: u64, cfg: &GenConfig) -> Result<Instance> {
    gen_with(&mut ChaCha8Rng::seed_from_u64(seed), cfg)
}

pub(crate) fn gen_with<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Result<Instance> {
    if cfg.n < 2 {
        return Err(Error::InvalidArgument("generated instances need at least 2 persons".into()));
    }
    if cfg.d == 0 || cfg.scales.len() != cfg.d || cfg.scales.iter().any(|&s| s < 2) {
        return Err(Error::InvalidArgument("every indicator needs a scale of at least 2 levels".into()));
    }
    let values = random_values(rng, cfg.n, &cfg.scales, cfg.low_mass);
    let cutoffs = cfg.scales.iter().map(|&s| rng.gen_range(1..s)).collect();
    let raw: Vec<f64> = (0..cfg.d)
        .map(|_| match cfg.weights {
            WeightScheme::Equal => 1.0,
            WeightScheme::Integer => rng.gen_range(1..=4) as f64,
            WeightScheme::Real => rng.gen_range(0.1..1.0),
        })
        .collect();
    let survey = (0..cfg.n)
        .map(|_| match cfg.survey {
            SurveyScheme::Unit => 1.0,
            SurveyScheme::Integer => rng.gen_range(1..=3) as f64,
            SurveyScheme::Real => rng.gen_range(0.2..2.0),
        })
        .collect();
    Instance::new(
        cfg.n,
        cfg.d,
        values,
        survey,
        cfg.scales.clone(),
        cutoffs,
        &raw,
        cfg.identification,
        cfg.alpha,
    )
}

pub(crate) fn random_values<R: Rng>(rng: &mut R, n: usize, scales: &[usize], low_mass: f64) -> Vec<f64> {
    (0..n)
        .flat_map(|_| scales.to_vec())
        .map(|s| if rng.gen_bool(low_mass) { 0.0 } else { rng.gen_range(0..s) as f64 })
        .collect()
}

/// Random configuration in the ranges the lab searches.
pub(crate) fn random_config<R: Rng>(rng: &mut R, identification: Identification, min_d: usize) -> GenConfig {
    let min_d = if identification == Identification::Intermediate { min_d.max(2) } else { min_d };
    let d = rng.gen_range(min_d..=4);
    let weights = *[WeightScheme::Equal, WeightScheme::Equal, WeightScheme::Integer, WeightScheme::Real]
        .choose(rng)
        .unwrap();
    let survey = *[SurveyScheme::Unit, SurveyScheme::Unit, SurveyScheme::Integer, SurveyScheme::Real]
        .choose(rng)
        .unwrap();
    GenConfig {
        n: rng.gen_range(2..=12),
        d,
        scales: (0..d).map(|_| rng.gen_range(2..=6)).collect(),
        weights,
        survey,
        low_mass: *[0.0, 0.3, 0.6].choose(rng).unwrap(),
        identification,
        alpha: *[1.0, 1.5, 2.0].choose(rng).unwrap(),
    }
}
