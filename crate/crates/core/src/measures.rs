//! Individual and aggregate indices.
//!
//! With survey weights `w_i` and total `W`:
//!
//! * `H = sum_poor w_i / W`
//! * `A_i = c_i` for the poor, `A = sum w_i A_i / q`
//! * `S_i = sum_j w_j g1_ij(k) / A_i`, `S = sum w_i P_i / sum w_i A_i`
//! * `P_i = sum_j w_j g1_ij(k)`, `P = sum w_i P_i / W = H * A * S`
//!
//! `A`, `S` and `P` are zero when nobody is poor.

use serde::Serialize;

use crate::identification::DeprivationProfile;
use crate::indicator::{Dataset, IndicatorKind, IndicatorSpec};
use crate::reference::ReferenceDistribution;
use crate::sum::NeumaierSum;
use crate::{Error, Result};

/// Weighted mean of `values` under `weights`, zero when the weights sum to zero.
fn weighted_mean(values: &[f64], weights: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let num: NeumaierSum = values.iter().zip(weights).map(|(v, w)| v * w).collect();
    num.value() / total
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Headcount ratio `H`.
pub fn headcount(profile: &DeprivationProfile) -> f64 {
    ratio(profile.q(), profile.total_weight())
}

/// Censored intensities `A_i` and the average intensity among the poor `A`.
pub fn intensity(profile: &DeprivationProfile) -> (Vec<f64>, f64) {
    let a: Vec<f64> = (0..profile.n()).map(|i| profile.intensity_of(i)).collect();
    let avg = weighted_mean(&a, profile.survey_weights(), profile.q());
    (a, avg)
}

/// `P_i = sum_j w_j (g1_ij(k))^alpha`.
fn individual_degree(profile: &DeprivationProfile, i: usize, alpha: f64) -> f64 {
    if !profile.is_poor(i) {
        return 0.0;
    }
    profile
        .weights()
        .iter()
        .enumerate()
        .map(|(j, w)| {
            let g = profile.g1_censored(i, j);
            if alpha == 1.0 {
                w * g
            } else {
                w * g.powf(alpha)
            }
        })
        .sum()
}

/// `P_i` (or its `alpha` generalization) for every person.
pub fn individual_degrees(profile: &DeprivationProfile, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok((0..profile.n()).map(|i| individual_degree(profile, i, alpha)).collect())
}

/// Individual positional gaps `S_i` and the aggregate positional gap `S`.
pub fn positional_gap(profile: &DeprivationProfile) -> (Vec<f64>, f64) {
    let (a, _) = intensity(profile);
    let p: Vec<f64> = (0..profile.n()).map(|i| individual_degree(profile, i, 1.0)).collect();
    let s_i = p.iter().zip(&a).map(|(p, a)| ratio(*p, *a)).collect();
    let w = profile.survey_weights();
    let num: NeumaierSum = p.iter().zip(w).map(|(p, w)| p * w).collect();
    let den: NeumaierSum = a.iter().zip(w).map(|(a, w)| a * w).collect();
    (s_i, ratio(num.value(), den.value()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdjustedIndex {
    /// Individual poverty degrees `P_i` (alpha = 1).
    pub individual: Vec<f64>,
    pub p: f64,
    pub alpha: f64,
    pub p_alpha: f64,
}

/// Individual degrees `P_i`, the adjusted positional gap `P` and `P_alpha`.
///
/// `alpha` raises each censored depth score, `P_alpha = (1/W) sum_i w_i sum_j w_j g1_ij(k)^alpha`.
pub fn adjusted_index(profile: &DeprivationProfile, alpha: f64) -> Result<AdjustedIndex> {
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let total = profile.total_weight();
    let individual: Vec<f64> = (0..profile.n()).map(|i| individual_degree(profile, i, 1.0)).collect();
    let p = weighted_mean(&individual, profile.survey_weights(), total);
    let p_alpha = if alpha == 1.0 {
        p
    } else {
        let pa: Vec<f64> = (0..profile.n()).map(|i| individual_degree(profile, i, alpha)).collect();
        weighted_mean(&pa, profile.survey_weights(), total)
    };
    Ok(AdjustedIndex {
        individual,
        p,
        alpha,
        p_alpha,
    })
}

/// Just `P_alpha`; the cheap path for repeated evaluation.
pub fn adjusted_value(profile: &DeprivationProfile, alpha: f64) -> Result<f64> {
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let mut acc = NeumaierSum::new();
    for (i, w) in profile.survey_weights().iter().enumerate() {
        let p = individual_degree(profile, i, alpha);
        if p != 0.0 {
            acc.add(w * p);
        }
    }
    Ok(ratio(acc.value(), profile.total_weight()))
}

/// Classical normalized-gap block for all-cardinal indicator sets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AfBlock {
    /// Per-person average normalized gap over censored deprivations, `G_i`.
    #[serde(skip)]
    pub individual_gap: Vec<f64>,
    /// Deprivation-weighted average normalized gap among the poor.
    pub g: f64,
    /// Adjusted headcount `H * A`.
    pub m0: f64,
    /// Adjusted poverty gap, population mean of censored weighted gaps (= `H * A * G`).
    pub m1: f64,
}

/// Normalized shortfall `(z - x) / z` on the declared scale, clamped to `[0, 1]`,
/// for every cell (zero where not deprived).
pub fn normalized_gaps(data: &Dataset, specs: &[IndicatorSpec]) -> Result<Vec<f64>> {
    for s in specs {
        match s.kind() {
            IndicatorKind::Ordinal { .. } => return Err(Error::OrdinalIndicator(s.name().to_string())),
            IndicatorKind::Cardinal { .. } if !(s.raw_cutoff() > 0.0) => {
                return Err(Error::NonPositiveCutoff(s.name().to_string()))
            }
            _ => {}
        }
    }
    let d = data.d();
    Ok(data
        .values()
        .iter()
        .enumerate()
        .map(|(idx, &x)| {
            let s = &specs[idx % d];
            let z = s.cutoff();
            if x < z {
                // internal scale is ascending-good, so z - x is the shortfall in either direction
                ((z - x) / s.raw_cutoff()).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect())
}

pub fn af_block(profile: &DeprivationProfile, data: &Dataset, specs: &[IndicatorSpec]) -> Result<AfBlock> {
    let gaps = normalized_gaps(data, specs)?;
    let d = profile.d();
    let w = profile.weights();
    let gap_sum: Vec<f64> = (0..profile.n())
        .map(|i| {
            if !profile.is_poor(i) {
                return 0.0;
            }
            (0..d).map(|j| w[j] * gaps[i * d + j]).sum()
        })
        .collect();
    let (a, _) = intensity(profile);
    let sw = profile.survey_weights();
    let individual_gap = gap_sum.iter().zip(&a).map(|(g, a)| ratio(*g, *a)).collect();
    let num: NeumaierSum = gap_sum.iter().zip(sw).map(|(g, w)| g * w).collect();
    let den: NeumaierSum = a.iter().zip(sw).map(|(a, w)| a * w).collect();
    let total = profile.total_weight();
    Ok(AfBlock {
        individual_gap,
        g: ratio(num.value(), den.value()),
        m0: ratio(den.value(), total),
        m1: ratio(num.value(), total),
    })
}

/// Per-person vectors of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Default)]
pub struct IndividualMeasures {
    pub intensity: Vec<f64>,
    pub positional_gap: Vec<f64>,
    pub degree: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureReport {
    pub k: f64,
    pub alpha: f64,
    /// Headcount ratio.
    pub h: f64,
    /// Average intensity among the poor.
    pub a: f64,
    /// Aggregate positional poverty gap.
    pub s: f64,
    /// Adjusted positional poverty gap.
    pub p: f64,
    pub p_alpha: f64,
    /// Adjusted headcount `H * A`.
    pub m0: f64,
    pub poor_weight: f64,
    pub poor_count: usize,
    pub total_weight: f64,
    pub af: Option<AfBlock>,
    #[serde(skip_serializing_if = "IndividualMeasures::is_empty")]
    pub individuals: IndividualMeasures,
    pub diagnostics: Vec<String>,
}

impl IndividualMeasures {
    fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }
}

/// All measures for one profile. The normalized-gap block is filled when every
/// indicator is cardinal with a positive cutoff.
pub fn measure(
    profile: &DeprivationProfile,
    data: &Dataset,
    specs: &[IndicatorSpec],
    reference: &ReferenceDistribution,
    alpha: f64,
) -> Result<MeasureReport> {
    let adjusted = adjusted_index(profile, alpha)?;
    let (a_i, a) = intensity(profile);
    let (s_i, s) = positional_gap(profile);
    let h = headcount(profile);
    let total_weight = profile.total_weight();
    let poor_weight = profile.q();
    let m0 = weighted_mean(&a_i, profile.survey_weights(), total_weight);

    let mut diagnostics = Vec::new();
    for spec in specs.iter().filter(|s| s.is_binary()) {
        diagnostics.push(format!(
            "binary indicator `{}`: depth is 1 for every deprived person",
            spec.name()
        ));
    }
    for name in reference.degenerate_columns() {
        diagnostics.push(format!(
            "degenerate reference for `{name}`: all mass on one value, depth is 1 at the atom"
        ));
    }
    if profile.poor_count() == 0 {
        diagnostics.push("no poor persons: A, S and P set to 0".to_string());
    }
    let fuzzy = specs.iter().all(|s| s.scale_size().is_some_and(|x| s.cutoff() == (x - 1) as f64))
        && profile.k() <= crate::indicator::min_weight(specs) + 1e-12;
    if fuzzy {
        diagnostics.push(
            "cutoffs at the scale maximum with union identification: every non-top achievement counts as deprived, intensity is not meaningful"
                .to_string(),
        );
    }
    let all_cardinal = specs.iter().all(|s| !s.is_ordinal() && s.raw_cutoff() > 0.0);
    let af = if all_cardinal {
        Some(af_block(profile, data, specs)?)
    } else {
        None
    };
    Ok(MeasureReport {
        k: profile.k(),
        alpha,
        h,
        a,
        s,
        p: adjusted.p,
        p_alpha: adjusted.p_alpha,
        m0,
        poor_weight,
        poor_count: profile.poor_count(),
        total_weight,
        af,
        individuals: IndividualMeasures {
            intensity: a_i,
            positional_gap: s_i,
            degree: adjusted.individual,
        },
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identification::build_profile;
    use crate::indicator::Direction;
    use crate::reference::ReferenceMode;

    fn example(k: f64) -> (Dataset, Vec<IndicatorSpec>, ReferenceDistribution, DeprivationProfile) {
        let data = Dataset::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 1.0]]).unwrap();
        let specs = vec![
            IndicatorSpec::ordinal_scale("floor", 4, 2, 0.5).unwrap(),
            IndicatorSpec::ordinal_scale("water", 2, 1, 0.5).unwrap(),
        ];
        let r = ReferenceDistribution::fit(&data, &specs, ReferenceMode::InSample).unwrap();
        let p = build_profile(&data, &specs, &r, k).unwrap();
        (data, specs, r, p)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn example_headcount_and_intensity() {
        let (_, _, _, p) = example(0.5);
        assert_eq!(headcount(&p), 0.75);
        let (a_i, a) = intensity(&p);
        assert_eq!(a_i, vec![1.0, 1.0, 0.5, 0.0]);
        assert!(close(a, 5.0 / 6.0));
    }

    #[test]
    fn example_positional_gap() {
        let (_, _, _, p) = example(0.5);
        let (s_i, s) = positional_gap(&p);
        for (x, y) in s_i.iter().zip([1.0, 5.0 / 6.0, 1.0, 0.0]) {
            assert!(close(*x, y), "{x} vs {y}");
        }
        assert!(close(s, 14.0 / 15.0));
    }

    #[test]
    fn example_adjusted_index_factorizes() {
        let (_, _, _, p) = example(0.5);
        let adj = adjusted_index(&p, 1.0).unwrap();
        for (x, y) in adj.individual.iter().zip([1.0, 5.0 / 6.0, 0.5, 0.0]) {
            assert!(close(*x, y));
        }
        assert!(close(adj.p, 7.0 / 12.0));
        assert_eq!(adj.p_alpha, adj.p);
        let h = headcount(&p);
        let (_, a) = intensity(&p);
        let (_, s) = positional_gap(&p);
        assert!(close(h * a * s, adj.p));
        assert_eq!(adjusted_value(&p, 1.0).unwrap(), adj.p);
    }

    #[test]
    fn alpha_below_one_is_rejected() {
        let (_, _, _, p) = example(0.5);
        assert_eq!(adjusted_index(&p, 0.5), Err(Error::InvalidAlpha(0.5)));
    }

    #[test]
    fn p_alpha_decreases_with_alpha() {
        let (_, _, _, p) = example(0.5);
        let p1 = adjusted_index(&p, 1.0).unwrap().p_alpha;
        let p2 = adjusted_index(&p, 2.0).unwrap().p_alpha;
        let p3 = adjusted_index(&p, 3.5).unwrap().p_alpha;
        assert!(p1 >= p2 && p2 >= p3);
        // only p2's floor score (2/3) is below 1: (1 + (0.5 * 4/9 + 0.5) + 0.5) / 4
        assert!(close(p2, (1.0 + 0.5 * 4.0 / 9.0 + 0.5 + 0.5) / 4.0));
    }

    #[test]
    fn nobody_poor_gives_zeros() {
        let data = Dataset::from_rows(&[vec![2.0], vec![3.0], vec![1.0]]).unwrap();
        let specs = vec![IndicatorSpec::ordinal_scale("a", 4, 1, 1.0).unwrap()];
        let r = ReferenceDistribution::fit(&data, &specs, ReferenceMode::InSample).unwrap();
        let prof = build_profile(&data, &specs, &r, 1.0).unwrap();
        let rep = measure(&prof, &data, &specs, &r, 1.0).unwrap();
        assert_eq!((rep.h, rep.a, rep.s, rep.p), (0.0, 0.0, 0.0, 0.0));
        assert!(rep.diagnostics.iter().any(|d| d.contains("no poor")));
    }

    #[test]
    fn everyone_fully_deprived_at_minimum_gives_one() {
        let data = Dataset::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let specs = vec![
            IndicatorSpec::ordinal_scale("a", 3, 1, 0.5).unwrap(),
            IndicatorSpec::ordinal_scale("b", 3, 2, 0.5).unwrap(),
        ];
        let r = ReferenceDistribution::fit(&data, &specs, ReferenceMode::InSample).unwrap();
        let prof = build_profile(&data, &specs, &r, 1.0).unwrap();
        let rep = measure(&prof, &data, &specs, &r, 1.0).unwrap();
        assert_eq!((rep.h, rep.a, rep.s, rep.p), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(r.degenerate_columns().len(), 2);
        assert_eq!(rep.diagnostics.iter().filter(|d| d.contains("degenerate")).count(), 2);
    }

    #[test]
    fn binary_indicators_recover_adjusted_headcount() {
        let data = Dataset::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![1.0, 1.0, 1.0],
            vec![0.0, 1.0, 1.0],
        ])
        .unwrap()
        .with_survey_weights(vec![1.5, 0.3, 2.0, 1.0, 0.7])
        .unwrap();
        let mut specs: Vec<_> = (0..3)
            .map(|j| IndicatorSpec::ordinal_scale(format!("b{j}"), 2, 1, 1.0 + j as f64).unwrap())
            .collect();
        crate::indicator::normalize_weights(&mut specs);
        let r = ReferenceDistribution::fit(&data, &specs, ReferenceMode::InSample).unwrap();
        for k in [1.0 / 6.0, 0.4, 0.6, 1.0] {
            let prof = build_profile(&data, &specs, &r, k).unwrap();
            let rep = measure(&prof, &data, &specs, &r, 1.0).unwrap();
            assert!((rep.p - rep.m0).abs() <= 1e-12);
        }
    }

    #[test]
    fn normalized_gap_of_schooling() {
        let data = Dataset::from_rows(&[vec![2.0], vec![5.0], vec![-1.0], vec![7.0]]).unwrap();
        let specs = vec![IndicatorSpec::cardinal("school", Direction::HigherIsBetter, 5.0, 1.0).unwrap()];
        let gaps = normalized_gaps(&data, &specs).unwrap();
        assert!(close(gaps[0], 0.6));
        assert_eq!(gaps[1], 0.0);
        assert_eq!(gaps[2], 1.0, "negative achievement clamps at 1");
        assert_eq!(gaps[3], 0.0);
    }

    #[test]
    fn lower_is_better_gap_uses_declared_scale() {
        // raw 6 against a ceiling of 4: shortfall (6 - 4) / 4 = 0.5
        let spec = IndicatorSpec::cardinal("crowding", Direction::LowerIsBetter, 4.0, 1.0).unwrap();
        let data = Dataset::from_rows(&[vec![-6.0], vec![-3.0]]).unwrap();
        let gaps = normalized_gaps(&data, &[spec]).unwrap();
        assert_eq!(gaps, vec![0.5, 0.0]);
    }

    #[test]
    fn af_block_identities() {
        let data = Dataset::from_rows(&[
            vec![1.0, 10.0],
            vec![4.0, 2.0],
            vec![6.0, 3.0],
            vec![0.0, 0.5],
            vec![8.0, 12.0],
        ])
        .unwrap();
        let specs = vec![
            IndicatorSpec::cardinal("school", Direction::HigherIsBetter, 5.0, 0.5).unwrap(),
            IndicatorSpec::cardinal("income", Direction::HigherIsBetter, 4.0, 0.5).unwrap(),
        ];
        let r = ReferenceDistribution::fit(&data, &specs, ReferenceMode::InSample).unwrap();
        let prof = build_profile(&data, &specs, &r, 0.5).unwrap();
        let rep = measure(&prof, &data, &specs, &r, 1.0).unwrap();
        let af = rep.af.unwrap();
        assert!((af.m0 - rep.h * rep.a).abs() <= 1e-12);
        assert!((af.m1 - rep.h * rep.a * af.g).abs() <= 1e-12);
        // persons 0,1,2,3 poor; gaps: p0 (0.8, 0), p1 (0.2, 0.5), p2 (0, 0.25), p3 (1, 0.875)
        let expected_m1 = (0.5 * 0.8 + 0.5 * 0.2 + 0.5 * 0.5 + 0.5 * 0.25 + 0.5 * 1.0 + 0.5 * 0.875) / 5.0;
        assert!((af.m1 - expected_m1).abs() <= 1e-12);
    }

    #[test]
    fn af_block_refuses_ordinal_and_zero_cutoffs() {
        let (data, specs, _, p) = example(0.5);
        assert!(matches!(af_block(&p, &data, &specs), Err(Error::OrdinalIndicator(_))));
        let zero = vec![IndicatorSpec::cardinal("x", Direction::HigherIsBetter, 0.0, 1.0).unwrap()];
        let data = Dataset::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(normalized_gaps(&data, &zero), Err(Error::NonPositiveCutoff(_))));
    }

    #[test]
    fn fuzzy_configuration_is_flagged() {
        let data = Dataset::from_rows(&[vec![0.0, 1.0], vec![2.0, 2.0], vec![1.0, 0.0]]).unwrap();
        let specs = vec![
            IndicatorSpec::ordinal_scale("a", 3, 2, 0.5).unwrap(),
            IndicatorSpec::ordinal_scale("b", 3, 2, 0.5).unwrap(),
        ];
        let r = ReferenceDistribution::fit(&data, &specs, ReferenceMode::InSample).unwrap();
        let prof = build_profile(&data, &specs, &r, 0.5).unwrap();
        let rep = measure(&prof, &data, &specs, &r, 1.0).unwrap();
        assert!(rep.diagnostics.iter().any(|d| d.contains("scale maximum")));
    }
}
