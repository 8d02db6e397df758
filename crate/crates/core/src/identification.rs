//! Deprivation statuses, deprivation scores, poverty identification and the
//! censored matrices.
//!
//! Depth scores are evaluated on the full achievement matrix and only then
//! masked by deprivation and poverty status, so they never read `z_j` or `k`.

use serde::Serialize;

use crate::indicator::{check_normalized, min_weight, Dataset, IndicatorSpec};
use crate::reference::ReferenceDistribution;
use crate::sum::NeumaierSum;
use crate::{Error, Result};

/// Slack allowed when comparing `c_i >= k`, absorbing rounding in sums of
/// normalized weights (three weights of 1/3 must still reach `k = 1`).
pub const IDENTIFICATION_TOLERANCE: f64 = 1e-9;

/// Poverty cutoff `k`, either explicit or by named rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PovertyCutoff {
    /// `k = min_j w_j`: deprived in at least one indicator.
    Union,
    /// `k = 1`: deprived in every indicator.
    Intersection,
    Value(f64),
}

impl PovertyCutoff {
    pub fn resolve(&self, specs: &[IndicatorSpec]) -> Result<f64> {
        let k = match *self {
            PovertyCutoff::Union => min_weight(specs),
            PovertyCutoff::Intersection => 1.0,
            PovertyCutoff::Value(k) => k,
        };
        validate_k(k)?;
        Ok(k)
    }
}

impl std::str::FromStr for PovertyCutoff {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "union" => Ok(Self::Union),
            "intersection" => Ok(Self::Intersection),
            other => {
                let k: f64 = other
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad poverty cutoff `{other}`")))?;
                validate_k(k)?;
                Ok(Self::Value(k))
            }
        }
    }
}

/// Poverty cutoffs reported when none are requested; explicit values outside
/// `(min_j w_j, 1]` are dropped by [`default_k_grid`].
pub const DEFAULT_K_GRID: [PovertyCutoff; 7] = [
    PovertyCutoff::Union,
    PovertyCutoff::Value(0.25),
    PovertyCutoff::Value(0.33),
    PovertyCutoff::Value(0.5),
    PovertyCutoff::Value(0.67),
    PovertyCutoff::Value(0.75),
    PovertyCutoff::Intersection,
];

/// [`DEFAULT_K_GRID`] resolved against `specs`: ascending, deduplicated, and
/// without explicit values below the union cutoff (they identify the same poor).
pub fn default_k_grid(specs: &[IndicatorSpec]) -> Vec<f64> {
    let union = min_weight(specs);
    let mut ks: Vec<f64> = DEFAULT_K_GRID
        .iter()
        .filter_map(|c| c.resolve(specs).ok())
        .filter(|&k| k >= union)
        .collect();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    ks
}

pub fn validate_k(k: f64) -> Result<()> {
    if k > 0.0 && k <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidPovertyCutoff(k))
    }
}

/// `g0_ij = 1{x_ij < z_j}`, row-major.
pub fn deprivation_matrix(data: &Dataset, specs: &[IndicatorSpec]) -> Vec<bool> {
    let d = data.d();
    data.values()
        .iter()
        .enumerate()
        .map(|(idx, &x)| x < specs[idx % d].cutoff())
        .collect()
}

/// `c_i = sum_j w_j g0_ij`.
pub fn deprivation_score(g0: &[bool], weights: &[f64]) -> Vec<f64> {
    let d = weights.len();
    g0.chunks(d).map(|row| row_score(row, weights)).collect()
}

#[inline]
fn row_score(row: &[bool], weights: &[f64]) -> f64 {
    let c: f64 = row.iter().zip(weights).filter(|(g, _)| **g).map(|(_, w)| *w).sum();
    c.min(1.0)
}

#[inline]
fn is_poor(c: f64, k: f64) -> bool {
    c > 0.0 && c >= k - IDENTIFICATION_TOLERANCE
}

/// `rho_i = 1{c_i >= k}`.
pub fn identify(c: &[f64], k: f64) -> Result<Vec<bool>> {
    validate_k(k)?;
    Ok(c.iter().map(|&ci| is_poor(ci, k)).collect())
}

/// Zero the rows of non-poor persons in a row-major matrix.
pub fn censor(matrix: &[f64], rho: &[bool]) -> Result<Vec<f64>> {
    if rho.is_empty() || !matrix.len().is_multiple_of(rho.len()) {
        return Err(Error::LengthMismatch(format!(
            "{} cells for {} persons",
            matrix.len(),
            rho.len()
        )));
    }
    let d = matrix.len() / rho.len();
    Ok(matrix
        .chunks(d)
        .zip(rho)
        .flat_map(|(row, &poor)| row.iter().map(move |&v| if poor { v } else { 0.0 }))
        .collect())
}

/// Everything the measures need about one dataset at one poverty cutoff.
#[derive(Clone, Debug, PartialEq)]
pub struct DeprivationProfile {
    n: usize,
    d: usize,
    k: f64,
    weights: Vec<f64>,
    survey_weights: Vec<f64>,
    g0: Vec<bool>,
    c: Vec<f64>,
    poor: Vec<bool>,
    scores: Vec<f64>,
}

/// Build the full profile: `g0`, `c`, `rho`, depth scores and censored matrices.
pub fn build_profile(
    data: &Dataset,
    specs: &[IndicatorSpec],
    reference: &ReferenceDistribution,
    k: f64,
) -> Result<DeprivationProfile> {
    validate_k(k)?;
    check_normalized(specs)?;
    reference.check_covers(specs)?;
    data.validate_against(specs)?;
    let d = data.d();
    let weights: Vec<f64> = specs.iter().map(IndicatorSpec::weight).collect();
    let columns = reference.columns();
    let rows = crate::par::map_range(data.n(), |i| {
        let row = data.row(i);
        let g0: Vec<bool> = row.iter().zip(specs).map(|(x, s)| *x < s.cutoff()).collect();
        let scores: Vec<f64> = row.iter().zip(columns).map(|(x, col)| col.score(*x)).collect();
        let c = row_score(&g0, &weights);
        (g0, scores, c)
    });
    let n = data.n();
    let mut g0 = Vec::with_capacity(n * d);
    let mut scores = Vec::with_capacity(n * d);
    let mut c = Vec::with_capacity(n);
    for (g, s, ci) in rows {
        g0.extend(g);
        scores.extend(s);
        c.push(ci);
    }
    let poor = c.iter().map(|&ci| is_poor(ci, k)).collect();
    Ok(DeprivationProfile {
        n,
        d,
        k,
        weights,
        survey_weights: data.survey_weights().to_vec(),
        g0,
        c,
        poor,
        scores,
    })
}

impl DeprivationProfile {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn survey_weights(&self) -> &[f64] {
        &self.survey_weights
    }

    pub fn total_weight(&self) -> f64 {
        crate::sum::sum(self.survey_weights.iter().copied())
    }

    /// Weighted number of poor, `q`.
    pub fn q(&self) -> f64 {
        self.survey_weights
            .iter()
            .zip(&self.poor)
            .filter(|(_, p)| **p)
            .map(|(w, _)| *w)
            .collect::<NeumaierSum>()
            .value()
    }

    pub fn poor_count(&self) -> usize {
        self.poor.iter().filter(|p| **p).count()
    }

    pub fn deprivation_scores(&self) -> &[f64] {
        &self.c
    }

    pub fn poor(&self) -> &[bool] {
        &self.poor
    }

    pub fn is_poor(&self, i: usize) -> bool {
        self.poor[i]
    }

    #[inline]
    pub fn g0(&self, i: usize, j: usize) -> bool {
        self.g0[i * self.d + j]
    }

    #[inline]
    pub fn g0_censored(&self, i: usize, j: usize) -> bool {
        self.poor[i] && self.g0(i, j)
    }

    /// Uncensored depth score `s_ij`.
    #[inline]
    pub fn score(&self, i: usize, j: usize) -> f64 {
        self.scores[i * self.d + j]
    }

    /// `g1_ij = g0_ij * s_ij`.
    #[inline]
    pub fn g1(&self, i: usize, j: usize) -> f64 {
        if self.g0(i, j) {
            self.score(i, j)
        } else {
            0.0
        }
    }

    /// `g1_ij(k) = rho_i * g0_ij * s_ij`.
    #[inline]
    pub fn g1_censored(&self, i: usize, j: usize) -> f64 {
        if self.poor[i] {
            self.g1(i, j)
        } else {
            0.0
        }
    }

    /// Censored intensity `A_i = sum_j w_j g0_ij(k)`.
    pub fn intensity_of(&self, i: usize) -> f64 {
        if self.poor[i] {
            self.c[i]
        } else {
            0.0
        }
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn g0_matrix(&self) -> Vec<f64> {
        self.g0.iter().map(|&g| f64::from(u8::from(g))).collect()
    }

    pub fn g0_censored_matrix(&self) -> Vec<f64> {
        censor(&self.g0_matrix(), &self.poor).expect("conformable")
    }

    pub fn g1_matrix(&self) -> Vec<f64> {
        (0..self.n * self.d).map(|idx| self.g1(idx / self.d, idx % self.d)).collect()
    }

    pub fn g1_censored_matrix(&self) -> Vec<f64> {
        censor(&self.g1_matrix(), &self.poor).expect("conformable")
    }
}
