//! Subgroup decomposition, per-indicator contributions and dominance curves.
//!
//! With one reference shared by every subgroup, each cell term is the same in
//! the full population and in its subgroup, so
//! `P = sum_l (W_l / W) P_l` holds up to summation rounding.

use serde::{Deserialize, Serialize};

use crate::identification::{build_profile, validate_k, DeprivationProfile};
use crate::indicator::{group_rows, Dataset, IndicatorSpec};
use crate::measures::{adjusted_index, headcount, intensity, positional_gap};
use crate::reference::{ReferenceDistribution, ReferenceMode};
use crate::sum::NeumaierSum;
use crate::{Error, Result};

/// Which reference each subgroup is scored against.
#[derive(Clone, Copy, Debug)]
pub enum SubgroupReference<'a> {
    /// One reference for the population and every subgroup.
    Shared(&'a ReferenceDistribution),
    /// Each subgroup (and the total) against its own in-sample CDFs. Breaks
    /// the decomposition identity, so it must be requested explicitly.
    PerSubgroupInSample { allow_inconsistent: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgroupRow {
    pub label: String,
    pub rows: usize,
    /// `W_l / W`.
    pub population_share: f64,
    pub h: f64,
    pub a: f64,
    pub s: f64,
    pub p: f64,
    pub p_alpha: f64,
    /// `(W_l / W) P_l / P`.
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub k: f64,
    pub alpha: f64,
    pub shared_reference: bool,
    pub total: SubgroupRow,
    pub rows: Vec<SubgroupRow>,
    /// `sum_l (W_l / W) P_l`.
    pub reconstructed: f64,
    /// `reconstructed - P`.
    pub residual: f64,
}

struct Summary {
    h: f64,
    a: f64,
    s: f64,
    p: f64,
    p_alpha: f64,
}

fn summarize(profile: &DeprivationProfile, alpha: f64) -> Result<Summary> {
    let adj = adjusted_index(profile, alpha)?;
    Ok(Summary {
        h: headcount(profile),
        a: intensity(profile).1,
        s: positional_gap(profile).1,
        p: adj.p,
        p_alpha: adj.p_alpha,
    })
}

/// Full measure stack per subgroup, plus the reconstruction residual.
pub fn decompose_by_subgroup(
    data: &Dataset,
    specs: &[IndicatorSpec],
    reference: SubgroupReference<'_>,
    k: f64,
    alpha: f64,
) -> Result<DecompositionReport> {
    validate_k(k)?;
    let groups = group_rows(data)?;
    let in_sample;
    let (total_ref, shared) = match reference {
        SubgroupReference::Shared(r) => (r, true),
        SubgroupReference::PerSubgroupInSample { allow_inconsistent } => {
            if !allow_inconsistent {
                return Err(Error::InconsistentReferences);
            }
            in_sample = ReferenceDistribution::fit_unstamped(data, specs, ReferenceMode::InSample)?;
            (&in_sample, false)
        }
    };
    let total_profile = build_profile(data, specs, total_ref, k)?;
    let total = summarize(&total_profile, alpha)?;
    let total_weight = data.total_weight();

    let labels: Vec<(&String, &Vec<usize>)> = groups.iter().collect();
    let rows = crate::par::map_tasks(labels.len(), |g| -> Result<SubgroupRow> {
        let (label, idx) = labels[g];
        if idx.is_empty() {
            return Err(Error::EmptySubgroup(label.clone()));
        }
        let sub = data.select_rows(idx)?;
        let own;
        let r = if shared {
            total_ref
        } else {
            own = ReferenceDistribution::fit_unstamped(&sub, specs, ReferenceMode::InSample)?;
            &own
        };
        let prof = build_profile(&sub, specs, r, k)?;
        let m = summarize(&prof, alpha)?;
        let share = sub.total_weight() / total_weight;
        Ok(SubgroupRow {
            label: label.clone(),
            rows: idx.len(),
            population_share: share,
            h: m.h,
            a: m.a,
            s: m.s,
            p: m.p,
            p_alpha: m.p_alpha,
            contribution: if total.p > 0.0 { share * m.p / total.p } else { 0.0 },
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let reconstructed = rows
        .iter()
        .map(|r| r.population_share * r.p)
        .collect::<NeumaierSum>()
        .value();
    Ok(DecompositionReport {
        k,
        alpha,
        shared_reference: shared,
        total: SubgroupRow {
            label: "(total)".into(),
            rows: data.n(),
            population_share: 1.0,
            h: total.h,
            a: total.a,
            s: total.s,
            p: total.p,
            p_alpha: total.p_alpha,
            contribution: if total.p > 0.0 { 1.0 } else { 0.0 },
        },
        rows,
        reconstructed,
        residual: reconstructed - total.p,
    })
}

/// Share of `P` contributed by each indicator:
/// `sum_i w_i w_j g1_ij(k) / sum_i sum_j w_i w_j g1_ij(k)`.
pub fn indicator_contributions(profile: &DeprivationProfile) -> Result<Vec<f64>> {
    let d = profile.d();
    let sw = profile.survey_weights();
    let per_indicator: Vec<f64> = (0..d)
        .map(|j| {
            let w = profile.weights()[j];
            (0..profile.n())
                .map(|i| sw[i] * w * profile.g1_censored(i, j))
                .collect::<NeumaierSum>()
                .value()
        })
        .collect();
    let total: f64 = per_indicator.iter().copied().collect::<NeumaierSum>().value();
    if total <= 0.0 {
        return Err(Error::ZeroIndex);
    }
    Ok(per_indicator.into_iter().map(|v| v / total).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub group: String,
    pub k: f64,
    pub h: f64,
    /// `H * A`.
    pub m0: f64,
    pub p: f64,
}

/// Label used for the whole population in curve tables.
pub const ALL_GROUP: &str = "(all)";

/// `(k, H, H*A, P)` for the whole population and for each subgroup (when
/// labels are present), all against one reference.
pub fn dominance_curve(
    data: &Dataset,
    specs: &[IndicatorSpec],
    reference: &ReferenceDistribution,
    k_grid: &[f64],
) -> Result<Vec<CurveRow>> {
    if k_grid.is_empty() {
        return Err(Error::InvalidArgument("empty k grid".into()));
    }
    for &k in k_grid {
        validate_k(k)?;
    }
    if k_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("k grid must be strictly ascending".into()));
    }
    let mut parts: Vec<(String, Dataset)> = vec![(ALL_GROUP.to_string(), data.clone())];
    if data.subgroups().is_some() {
        for (label, idx) in group_rows(data)? {
            parts.push((label, data.select_rows(&idx)?));
        }
    }
    let mut out = Vec::with_capacity(parts.len() * k_grid.len());
    for (label, part) in &parts {
        for &k in k_grid {
            let prof = build_profile(part, specs, reference, k)?;
            let h = headcount(&prof);
            let (a_i, _) = intensity(&prof);
            let m0 = a_i
                .iter()
                .zip(prof.survey_weights())
                .map(|(a, w)| a * w)
                .collect::<NeumaierSum>()
                .value()
                / prof.total_weight();
            out.push(CurveRow {
                group: label.clone(),
                k,
                h,
                m0,
                p: adjusted_index(&prof, 1.0)?.p,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> (Dataset, Vec<IndicatorSpec>) {
        let data = Dataset::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 1.0]])
            .unwrap()
            .with_subgroups(vec!["g1".into(), "g1".into(), "g2".into(), "g2".into()])
            .unwrap();
        let specs = vec![
            IndicatorSpec::ordinal_scale("floor", 4, 2, 0.5).unwrap(),
            IndicatorSpec::ordinal_scale("water", 2, 1, 0.5).unwrap(),
        ];
        (data, specs)
    }

    #[test]
    fn example_decomposition_with_shared_reference() {
        let (data, specs) = example();
        let r = ReferenceDistribution::fit(&data, &specs, ReferenceMode::Anchored).unwrap();
        let rep = decompose_by_subgroup(&data, &specs, SubgroupReference::Shared(&r), 0.5, 1.0).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert!((rep.rows[0].p - 11.0 / 12.0).abs() < 1e-12);
        assert!((rep.rows[1].p - 0.25).abs() < 1e-12);
        assert!((rep.total.p - 7.0 / 12.0).abs() < 1e-12);
        assert!(rep.residual.abs() < 1e-12);
        let shares: f64 = rep.rows.iter().map(|r| r.contribution).sum();
        assert!((shares - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_subgroup_is_exact() {
        let (data, specs) = example();
        let data = data.with_subgroups(vec!["all".into(); 4]).unwrap();
        let r = ReferenceDistribution::fit(&data, &specs, ReferenceMode::Anchored).unwrap();
        let rep = decompose_by_subgroup(&data, &specs, SubgroupReference::Shared(&r), 0.5, 1.0).unwrap();
        assert_eq!(rep.residual, 0.0);
    }

    #[test]
    fn per_subgroup_in_sample_needs_opt_in_and_leaves_residual() {
        // subgroup minima differ: g1 holds codes {0, 1}, g2 holds {2, 3}
        let (data, specs) = example();
        assert_eq!(
            decompose_by_subgroup(
                &data,
                &specs,
                SubgroupReference::PerSubgroupInSample { allow_inconsistent: false },
                0.5,
                1.0
            )
            .unwrap_err(),
            Error::InconsistentReferences
        );
        let rep = decompose_by_subgroup(
            &data,
            &specs,
            SubgroupReference::PerSubgroupInSample { allow_inconsistent: true },
            0.5,
            1.0,
        )
        .unwrap();
        assert!(rep.residual.abs() > 1e-6, "residual {}", rep.residual);
    }

    #[test]
    fn missing_labels_error() {
        let data = Dataset::from_rows(&[vec![0.0]]).unwrap();
        let specs = vec![IndicatorSpec::ordinal_scale("a", 2, 1, 1.0).unwrap()];
        let r = ReferenceDistribution::fit(&data, &specs, ReferenceMode::Anchored).unwrap();
        assert_eq!(
            decompose_by_subgroup(&data, &specs, SubgroupReference::Shared(&r), 1.0, 1.0).unwrap_err(),
            Error::MissingSubgroups
        );
    }

    #[test]
    fn example_indicator_contributions() {
        let (data, specs) = example();
        let r = ReferenceDistribution::fit(&data, &specs, ReferenceMode::InSample).unwrap();
        let prof = build_profile(&data, &specs, &r, 0.5).unwrap();
        let c = indicator_contributions(&prof).unwrap();
        assert!((c[0] - 5.0 / 14.0).abs() < 1e-12);
        assert!((c[1] - 9.0 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn contributions_single_indicator_and_symmetry() {
        let data = Dataset::from_rows(&[vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let specs = vec![
            IndicatorSpec::ordinal_scale("a", 2, 1, 0.5).unwrap(),
            IndicatorSpec::ordinal_scale("b", 2, 1, 0.5).unwrap(),
        ];
        let r = ReferenceDistribution::fit(&data, &specs, ReferenceMode::InSample).unwrap();
        let prof = build_profile(&data, &specs, &r, 0.5).unwrap();
        assert_eq!(indicator_contributions(&prof).unwrap(), vec![1.0, 0.0]);

        let data = Dataset::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let r = ReferenceDistribution::fit(&data, &specs, ReferenceMode::InSample).unwrap();
        let prof = build_profile(&data, &specs, &r, 0.5).unwrap();
        assert_eq!(indicator_contributions(&prof).unwrap(), vec![0.5, 0.5]);

        let none = Dataset::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let prof = build_profile(&none, &specs, &r, 0.5).unwrap();
        assert_eq!(indicator_contributions(&prof), Err(Error::ZeroIndex));
    }

    #[test]
    fn curves_are_nonincreasing_in_k() {
        let (data, specs) = example();
        let r = ReferenceDistribution::fit(&data, &specs, ReferenceMode::InSample).unwrap();
        let grid = [0.25, 0.5, 0.75, 1.0];
        let rows = dominance_curve(&data, &specs, &r, &grid).unwrap();
        assert_eq!(rows.len(), 3 * grid.len());
        for chunk in rows.chunks(grid.len()) {
            for w in chunk.windows(2) {
                assert!(w[1].h <= w[0].h && w[1].m0 <= w[0].m0 && w[1].p <= w[0].p);
            }
        }
        assert!(dominance_curve(&data, &specs, &r, &[0.5, 0.25]).is_err());
        assert!(dominance_curve(&data, &specs, &r, &[]).is_err());
        assert!(dominance_curve(&data, &specs, &r, &[0.0]).is_err());
    }

    #[test]
    fn identical_subgroups_give_identical_curves() {
        let rows = vec![vec![0.0, 0.0], vec![2.0, 1.0], vec![0.0, 0.0], vec![2.0, 1.0]];
        let data = Dataset::from_rows(&rows)
            .unwrap()
            .with_subgroups(vec!["a".into(), "a".into(), "b".into(), "b".into()])
            .unwrap();
        let specs = vec![
            IndicatorSpec::ordinal_scale("floor", 4, 2, 0.5).unwrap(),
            IndicatorSpec::ordinal_scale("water", 2, 1, 0.5).unwrap(),
        ];
        let r = ReferenceDistribution::fit(&data, &specs, ReferenceMode::InSample).unwrap();
        let curve = dominance_curve(&data, &specs, &r, &[0.5, 1.0]).unwrap();
        let a: Vec<_> = curve.iter().filter(|c| c.group == "a").map(|c| (c.h, c.m0, c.p)).collect();
        let b: Vec<_> = curve.iter().filter(|c| c.group == "b").map(|c| (c.h, c.m0, c.p)).collect();
        assert_eq!(a, b);
    }
}
