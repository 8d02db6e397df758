//! Rank concordance between the positional gap `S_i` and the normalized gap
//! `G_i` among the poor.
//!
//! Weighted Pearson and Spearman use survey weights; Spearman is the weighted
//! Pearson of weighted fractional ranks (midpoint of each tie group's
//! cumulative-weight span). Kendall's tau-b is unweighted with the usual tie
//! correction, computed in `O(n log n)`.

use serde::{Deserialize, Serialize};

use crate::identification::DeprivationProfile;
use crate::indicator::{Dataset, IndicatorSpec};
use crate::measures::{af_block, positional_gap};
use crate::sum::NeumaierSum;
use crate::{Error, Result};

pub const DEFAULT_BIN_WIDTH: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    /// Weighted share of the poor falling in the bin.
    pub share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcordanceReport {
    pub n_poor: usize,
    pub pearson: f64,
    pub spearman: f64,
    pub kendall_tau_b: f64,
    /// Within-poor percentile ranks of `S_i`.
    pub percentile_s: Vec<f64>,
    /// Within-poor percentile ranks of `G_i`.
    pub percentile_g: Vec<f64>,
    /// `percentile_s - percentile_g` per poor person.
    pub rank_difference: Vec<f64>,
    pub mean_rank_difference: f64,
    pub histogram: Vec<HistogramBin>,
    /// Design-based standard errors need replicate weights; only point estimates are produced.
    pub standard_errors: Option<f64>,
}

fn weighted_moments(x: &[f64], w: &[f64]) -> (f64, f64) {
    let total: f64 = w.iter().copied().collect::<NeumaierSum>().value();
    let mean = x.iter().zip(w).map(|(x, w)| x * w).collect::<NeumaierSum>().value() / total;
    (total, mean)
}

/// Weighted Pearson correlation.
pub fn weighted_pearson(x: &[f64], y: &[f64], w: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() != w.len() {
        return Err(Error::LengthMismatch("correlation inputs".into()));
    }
    if x.len() < 2 {
        return Err(Error::TooFewPoor { needed: 2, found: x.len() });
    }
    let (_, mx) = weighted_moments(x, w);
    let (_, my) = weighted_moments(y, w);
    let mut sxy = NeumaierSum::new();
    let mut sxx = NeumaierSum::new();
    let mut syy = NeumaierSum::new();
    for ((a, b), wi) in x.iter().zip(y).zip(w) {
        let (da, db) = (a - mx, b - my);
        sxy.add(wi * da * db);
        sxx.add(wi * da * da);
        syy.add(wi * db * db);
    }
    if !(sxx.value() > 0.0) {
        return Err(Error::ZeroVariance("first variable"));
    }
    if !(syy.value() > 0.0) {
        return Err(Error::ZeroVariance("second variable"));
    }
    Ok((sxy.value() / (sxx.value() * syy.value()).sqrt()).clamp(-1.0, 1.0))
}

/// Weighted fractional ranks in `(0, 1)`: each tie group gets the midpoint of
/// its cumulative-weight span divided by the total weight.
pub fn weighted_fractional_ranks(x: &[f64], w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().copied().collect::<NeumaierSum>().value();
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut before = NeumaierSum::new();
    let mut idx = 0;
    while idx < order.len() {
        let v = x[order[idx]];
        let start = idx;
        let mut group = NeumaierSum::new();
        while idx < order.len() && x[order[idx]] == v {
            group.add(w[order[idx]]);
            idx += 1;
        }
        let rank = (before.value() + group.value() / 2.0) / total;
        for &i in &order[start..idx] {
            ranks[i] = rank;
        }
        before.add(group.value());
    }
    ranks
}

/// Count of tied pairs within runs of equal values in an already sorted key sequence.
fn tied_pairs<T: PartialEq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut pairs = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for v in sorted {
        if prev.as_ref() == Some(&v) {
            run += 1;
        } else {
            pairs += run * (run.saturating_sub(1)) / 2;
            run = 1;
        }
        prev = Some(v);
    }
    pairs + run * (run.saturating_sub(1)) / 2
}

/// Merge sort counting inversions (strictly decreasing pairs).
fn sort_count_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_count_swaps(&mut v[..mid], &mut buf[..mid]);
    swaps += sort_count_swaps(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    let k2 = k + mid - i;
    buf[k2..k2 + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b (Knight's algorithm).
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch("tau-b inputs".into()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::TooFewPoor { needed: 2, found: n });
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let ties_x = tied_pairs(pairs.iter().map(|p| p.0));
    let ties_xy = tied_pairs(pairs.iter().copied());
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = sort_count_swaps(&mut ys, &mut buf);
    let ties_y = tied_pairs(ys.iter().copied());
    if ties_x == n0 {
        return Err(Error::ZeroVariance("first variable"));
    }
    if ties_y == n0 {
        return Err(Error::ZeroVariance("second variable"));
    }
    let num = n0 as i128 - ties_x as i128 - ties_y as i128 + ties_xy as i128 - 2 * swaps as i128;
    let den = ((n0 - ties_x) as f64 * (n0 - ties_y) as f64).sqrt();
    Ok((num as f64 / den).clamp(-1.0, 1.0))
}

/// Concordance statistics for paired scores with survey weights.
pub fn concordance(s: &[f64], g: &[f64], w: &[f64], bin_width: f64) -> Result<ConcordanceReport> {
    if s.len() != g.len() || s.len() != w.len() {
        return Err(Error::LengthMismatch("concordance inputs".into()));
    }
    if !(bin_width > 0.0 && bin_width <= 2.0) {
        return Err(Error::InvalidArgument(format!("bin width must lie in (0, 2], got {bin_width}")));
    }
    if s.len() < 2 {
        return Err(Error::TooFewPoor { needed: 2, found: s.len() });
    }
    let pearson = weighted_pearson(s, g, w)?;
    let rs = weighted_fractional_ranks(s, w);
    let rg = weighted_fractional_ranks(g, w);
    let spearman = weighted_pearson(&rs, &rg, w)?;
    let kendall_tau_b = kendall_tau_b(s, g)?;
    let diff: Vec<f64> = rs.iter().zip(&rg).map(|(a, b)| a - b).collect();
    let (total, mean_rank_difference) = weighted_moments(&diff, w);

    let bins = (2.0 / bin_width - 1e-9).ceil() as usize;
    let mut mass = vec![NeumaierSum::new(); bins];
    for (dv, wi) in diff.iter().zip(w) {
        let b = (((dv + 1.0) / bin_width).floor() as usize).min(bins - 1);
        mass[b].add(*wi);
    }
    let histogram = mass
        .iter()
        .enumerate()
        .map(|(b, m)| HistogramBin {
            lower: -1.0 + b as f64 * bin_width,
            upper: (-1.0 + (b + 1) as f64 * bin_width).min(1.0),
            share: m.value() / total,
        })
        .collect();
    Ok(ConcordanceReport {
        n_poor: s.len(),
        pearson,
        spearman,
        kendall_tau_b,
        percentile_s: rs,
        percentile_g: rg,
        rank_difference: diff,
        mean_rank_difference,
        histogram,
        standard_errors: None,
    })
}

/// Concordance of `(S_i, G_i)` over the poor of a profile. Needs all-cardinal
/// indicators and at least two poor persons.
pub fn rank_concordance(
    profile: &DeprivationProfile,
    data: &Dataset,
    specs: &[IndicatorSpec],
    bin_width: f64,
) -> Result<ConcordanceReport> {
    let af = af_block(profile, data, specs)?;
    let (s_i, _) = positional_gap(profile);
    let poor: Vec<usize> = (0..profile.n()).filter(|&i| profile.is_poor(i)).collect();
    if poor.len() < 2 {
        return Err(Error::TooFewPoor {
            needed: 2,
            found: poor.len(),
        });
    }
    let s: Vec<f64> = poor.iter().map(|&i| s_i[i]).collect();
    let g: Vec<f64> = poor.iter().map(|&i| af.individual_gap[i]).collect();
    let w: Vec<f64> = poor.iter().map(|&i| profile.survey_weights()[i]).collect();
    concordance(&s, &g, &w, bin_width).map_err(|e| match e {
        Error::ZeroVariance("first variable") => Error::ZeroVariance("positional gap"),
        Error::ZeroVariance("second variable") => Error::ZeroVariance("normalized gap"),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive pair counting.
    fn tau_b_pairs(x: &[f64], y: &[f64]) -> f64 {
        let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                let dx = x[i] - x[j];
                let dy = y[i] - y[j];
                if dx == 0.0 && dy == 0.0 {
                    continue;
                } else if dx == 0.0 {
                    tx += 1;
                } else if dy == 0.0 {
                    ty += 1;
                } else if dx * dy > 0.0 {
                    c += 1;
                } else {
                    d += 1;
                }
            }
        }
        (c - d) as f64 / (((c + d + tx) * (c + d + ty)) as f64).sqrt()
    }

    #[test]
    fn six_point_set_matches_pair_counting() {
        let x = [0.9, 0.2, 0.2, 0.7, 0.4, 1.0];
        let y = [0.5, 0.1, 0.3, 0.5, 0.6, 0.8];
        let got = kendall_tau_b(&x, &y).unwrap();
        assert!((got - tau_b_pairs(&x, &y)).abs() < 1e-15, "{got}");
    }

    #[test]
    fn perfect_and_reversed_orderings() {
        let s = [0.1, 0.5, 0.3, 0.9, 0.7];
        let g: Vec<f64> = s.iter().map(|v| v * v + 0.1).collect();
        let w = [1.0, 2.0, 1.0, 0.5, 1.5];
        let rep = concordance(&s, &g, &w, DEFAULT_BIN_WIDTH).unwrap();
        assert_eq!(rep.spearman, 1.0);
        assert_eq!(rep.kendall_tau_b, 1.0);
        assert!(rep.rank_difference.iter().all(|d| *d == 0.0));
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let rep = concordance(&s, &neg, &w, DEFAULT_BIN_WIDTH).unwrap();
        assert!((rep.pearson + 1.0).abs() < 1e-12);
        assert!((rep.spearman + 1.0).abs() < 1e-12);
        assert_eq!(rep.kendall_tau_b, -1.0);
    }

    #[test]
    fn identical_scores_correlate_perfectly() {
        let s = [0.2, 0.4, 0.4, 1.0];
        let rep = concordance(&s, &s, &[1.0; 4], DEFAULT_BIN_WIDTH).unwrap();
        assert_eq!((rep.pearson, rep.spearman, rep.kendall_tau_b), (1.0, 1.0, 1.0));
    }

    #[test]
    fn fractional_ranks_use_weight_midpoints() {
        let r = weighted_fractional_ranks(&[3.0, 1.0, 3.0, 2.0], &[1.0, 2.0, 1.0, 4.0]);
        // totals 8: value 1 spans [0,2] -> 1/8, value 2 spans [2,6] -> 4/8, value 3 spans [6,8] -> 7/8
        assert_eq!(r, vec![0.875, 0.125, 0.875, 0.5]);
    }

    #[test]
    fn histogram_shares_sum_to_one() {
        let s = [0.1, 0.5, 0.3, 0.9, 0.7, 0.2];
        let g = [0.3, 0.1, 0.9, 0.4, 0.2, 0.6];
        let rep = concordance(&s, &g, &[1.0; 6], 0.05).unwrap();
        assert_eq!(rep.histogram.len(), 40);
        let total: f64 = rep.histogram.iter().map(|b| b.share).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(rep.rank_difference.iter().all(|d| (-1.0..=1.0).contains(d)));
        assert!(rep.mean_rank_difference.abs() < 1e-12, "equal weights centre the differences");
        assert!(concordance(&s, &g, &[1.0; 6], 0.0).is_err());
    }

    #[test]
    fn zero_variance_and_too_few() {
        assert_eq!(
            concordance(&[0.5, 0.5, 0.5], &[0.1, 0.2, 0.3], &[1.0; 3], 0.05),
            Err(Error::ZeroVariance("first variable"))
        );
        assert!(matches!(
            concordance(&[0.5], &[0.1], &[1.0], 0.05),
            Err(Error::TooFewPoor { .. })
        ));
        assert_eq!(kendall_tau_b(&[1.0, 2.0], &[3.0, 3.0]), Err(Error::ZeroVariance("second variable")));
    }

    mod prop {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tau_b_equals_pair_counting(pairs in proptest::collection::vec((0u8..5, 0u8..5), 2..9)) {
                let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
                let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
                let fast = kendall_tau_b(&x, &y);
                let tx = x.iter().all(|v| *v == x[0]);
                let ty = y.iter().all(|v| *v == y[0]);
                if tx || ty {
                    prop_assert!(fast.is_err());
                } else {
                    prop_assert!((fast.unwrap() - tau_b_pairs(&x, &y)).abs() < 1e-12);
                }
            }

            #[test]
            fn monotone_transforms_keep_rank_statistics(
                values in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.1f64..3.0), 3..30)
            ) {
                let s: Vec<f64> = values.iter().map(|v| v.0).collect();
                let g: Vec<f64> = values.iter().map(|v| v.1).collect();
                let w: Vec<f64> = values.iter().map(|v| v.2).collect();
                let base = concordance(&s, &g, &w, 0.05);
                let s2: Vec<f64> = s.iter().map(|v| v.exp() * 3.0 - 1.0).collect();
                let g2: Vec<f64> = g.iter().map(|v| v.powi(3)).collect();
                let moved = concordance(&s2, &g2, &w, 0.05);
                match (base, moved) {
                    (Ok(a), Ok(b)) => {
                        prop_assert_eq!(a.spearman, b.spearman);
                        prop_assert_eq!(a.kendall_tau_b, b.kendall_tau_b);
                    }
                    (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
                }
            }
        }
    }
}
