//! One check per axiom on a single [`Case`].

use serde::{Deserialize, Serialize};

use super::instance::{fit_with, Engine, Evaluation, Instance};
use crate::indicator::IndicatorSpec;
use super::{Axiom, Case, CdfMode, Channel, TOLERANCE};
use crate::reference::ReferenceDistribution;
use crate::sum::NeumaierSum;
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    /// The case does not meet the axiom's preconditions.
    NotApplicable,
    Satisfied,
    /// Satisfied with equality where a strict change was not required; logged
    /// but never a witness.
    Boundary,
    Violated { delta: f64, channel: Channel, detail: String },
}

struct Pair {
    base_ref: ReferenceDistribution,
    pert_ref: ReferenceDistribution,
    base: Evaluation,
    pert: Evaluation,
}

fn pair(mode: CdfMode, engine: Engine, base: &Instance, pert: &Instance) -> Result<Pair> {
    let specs = base.specs()?;
    let base_ref = fit_with(base, &specs)?;
    let pert_specs = if base.same_indicators(pert) { None } else { Some(pert.specs()?) };
    let pert_specs: &[IndicatorSpec] = pert_specs.as_deref().unwrap_or(&specs);
    let pert_ref = match mode {
        CdfMode::Anchored => base_ref.clone(),
        CdfMode::InSample => fit_with(pert, pert_specs)?,
    };
    Ok(Pair {
        base: engine.evaluate_with(base, &specs, &base_ref)?,
        pert: engine.evaluate_with(pert, pert_specs, &pert_ref)?,
        base_ref,
        pert_ref,
    })
}

fn denominator_moved(a: &ReferenceDistribution, b: &ReferenceDistribution, cols: &[usize]) -> bool {
    cols.iter().any(|&j| {
        let (x, y) = (&a.columns()[j], &b.columns()[j]);
        x.min_value() != y.min_value() || x.denominator() != y.denominator()
    })
}

/// Attribute a change in the index to a denominator shift, to peers' scores or
/// to the movers alone.
fn classify(p: &Pair, d: usize, cols: &[usize], movers: &[usize]) -> Channel {
    if denominator_moved(&p.base_ref, &p.pert_ref, cols) {
        return Channel::DenominatorEffect;
    }
    let n = p.base.poor.len();
    let peer_moved = (0..n).filter(|i| !movers.contains(i)).any(|i| {
        (p.base.poor[i] || p.pert.poor[i])
            && cols.iter().any(|&j| {
                let idx = i * d + j;
                p.base.g0[idx] && p.base.scores[idx] != p.pert.scores[idx]
            })
    });
    if peer_moved {
        Channel::PeerRedistribution
    } else {
        Channel::Direct
    }
}

fn violated(delta: f64, channel: Channel, detail: impl Into<String>) -> Outcome {
    Outcome::Violated {
        delta,
        channel,
        detail: detail.into(),
    }
}

/// Cells where base and perturbation differ, or `None` when the shapes differ.
fn changed_cells(base: &Instance, pert: &Instance) -> Option<Vec<(usize, usize)>> {
    if base.n != pert.n || base.d != pert.d || base.scales != pert.scales || base.cutoffs != pert.cutoffs {
        return None;
    }
    if base.weights != pert.weights || base.survey_weights != pert.survey_weights || base.k != pert.k {
        return None;
    }
    Some(
        (0..base.n * base.d)
            .filter(|&idx| base.values[idx] != pert.values[idx])
            .map(|idx| (idx / base.d, idx % base.d))
            .collect(),
    )
}

/// Single changed cell `(i, j)` matching the case's declared mover.
fn single_change(case: &Case) -> Option<(usize, usize, &Instance)> {
    let pert = case.perturbed.as_ref()?;
    let cells = changed_cells(&case.base, pert)?;
    match (cells.as_slice(), case.persons.as_slice(), case.indicators.as_slice()) {
        ([(i, j)], [p], [q]) if i == p && j == q => Some((*i, *j, pert)),
        _ => None,
    }
}

fn subgroups(partition: &[usize]) -> Vec<Vec<usize>> {
    let groups = partition.iter().copied().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); groups];
    for (i, &g) in partition.iter().enumerate() {
        out[g].push(i);
    }
    out
}

/// Evaluate the axiom on one case.
pub fn check_case(axiom: Axiom, mode: CdfMode, engine: Engine, case: &Case) -> Result<Outcome> {
    match axiom {
        Axiom::Symmetry | Axiom::OrdinalInvariance => invariance(engine, case),
        Axiom::Replication => replication(mode, engine, case),
        Axiom::Bounds => bounds(mode, engine, case),
        Axiom::DeprivationFocus => deprivation_focus(mode, engine, case),
        Axiom::PovertyFocus => poverty_focus(mode, engine, case),
        Axiom::OwnMonotonicity => own_monotonicity(mode, engine, case),
        Axiom::AggregateMonotonicity => aggregate_monotonicity(mode, engine, case, false),
        Axiom::DimensionalMonotonicity => aggregate_monotonicity(mode, engine, case, true),
        Axiom::Decomposability => decomposability(mode, engine, case),
        Axiom::SubgroupConsistency => subgroup_consistency(mode, engine, case),
        Axiom::WeakRearrangement => weak_rearrangement(mode, engine, case),
        Axiom::WeakTransfer => weak_transfer(mode, engine, case),
    }
}

/// Relabelings (of persons, indicators or ordinal codes) carry the reference
/// along with the data, so both sides are scored against their own fit in
/// either mode.
fn invariance(engine: Engine, case: &Case) -> Result<Outcome> {
    let Some(pert) = &case.perturbed else {
        return Ok(Outcome::NotApplicable);
    };
    let p = pair(CdfMode::InSample, engine, &case.base, pert)?;
    let (a, b) = (p.base, p.pert);
    let delta = b.p - a.p;
    Ok(if delta.abs() > TOLERANCE {
        violated(delta, Channel::Direct, format!("P moved from {} to {}", a.p, b.p))
    } else {
        Outcome::Satisfied
    })
}

fn replication(mode: CdfMode, engine: Engine, case: &Case) -> Result<Outcome> {
    let Some(pert) = &case.perturbed else {
        return Ok(Outcome::NotApplicable);
    };
    if pert.n % case.base.n != 0 || pert.n == case.base.n {
        return Ok(Outcome::NotApplicable);
    }
    let p = pair(mode, engine, &case.base, pert)?;
    let delta = p.pert.p - p.base.p;
    Ok(if delta.abs() > TOLERANCE {
        violated(delta, Channel::Direct, format!("replication moved P from {} to {}", p.base.p, p.pert.p))
    } else {
        Outcome::Satisfied
    })
}

/// `0 <= P <= 1`, `P = 0` without poor, `P = 1` exactly when everyone is poor,
/// deprived everywhere and at the bottom. Anchored cases score the perturbed
/// dataset (a later sample) against the base's CDFs.
fn bounds(mode: CdfMode, engine: Engine, case: &Case) -> Result<Outcome> {
    let e = match (mode, &case.perturbed) {
        (CdfMode::Anchored, Some(p)) if case.base.same_indicators(p) => pair(mode, engine, &case.base, p)?.pert,
        _ => {
            let specs = case.base.specs()?;
            engine.evaluate_with(&case.base, &specs, &fit_with(&case.base, &specs)?)?
        }
    };
    let p = e.p;
    let detail = if !(0.0..=1.0 + TOLERANCE).contains(&p) {
        Some(format!("P = {p} outside [0, 1]"))
    } else if !e.poor.iter().any(|x| *x) && p != 0.0 {
        Some(format!("nobody poor but P = {p}"))
    } else if e.saturated && (p - 1.0).abs() > TOLERANCE {
        Some(format!("maximal deprivation but P = {p}"))
    } else if !e.saturated && p >= 1.0 - TOLERANCE {
        Some("P reaches 1 without maximal deprivation".to_string())
    } else {
        None
    };
    Ok(match detail {
        Some(d) => violated(p, Channel::Direct, d),
        None => Outcome::Satisfied,
    })
}

fn deprivation_focus(mode: CdfMode, engine: Engine, case: &Case) -> Result<Outcome> {
    let Some((i, j, pert)) = single_change(case) else {
        return Ok(Outcome::NotApplicable);
    };
    if case.base.deprived(i, j) || pert.value(i, j) <= case.base.value(i, j) {
        return Ok(Outcome::NotApplicable);
    }
    let p = pair(mode, engine, &case.base, pert)?;
    let delta = p.pert.p - p.base.p;
    Ok(if delta != 0.0 {
        let ch = classify(&p, case.base.d, &[j], &[i]);
        violated(delta, ch, format!("raising non-deprived x[{i}][{j}] moved P by {delta}"))
    } else {
        Outcome::Satisfied
    })
}

fn poverty_focus(mode: CdfMode, engine: Engine, case: &Case) -> Result<Outcome> {
    let Some(pert) = &case.perturbed else {
        return Ok(Outcome::NotApplicable);
    };
    let Some(cells) = changed_cells(&case.base, pert) else {
        return Ok(Outcome::NotApplicable);
    };
    let [i] = case.persons[..] else {
        return Ok(Outcome::NotApplicable);
    };
    if cells.is_empty() || cells.iter().any(|(r, _)| *r != i) {
        return Ok(Outcome::NotApplicable);
    }
    let p = pair(mode, engine, &case.base, pert)?;
    if p.base.poor[i] || p.pert.poor[i] {
        return Ok(Outcome::NotApplicable);
    }
    let delta = p.pert.p - p.base.p;
    Ok(if delta != 0.0 {
        let cols: Vec<usize> = cells.iter().map(|(_, j)| *j).collect();
        let ch = classify(&p, case.base.d, &cols, &[i]);
        violated(delta, ch, format!("changing non-poor person {i} moved P by {delta}"))
    } else {
        Outcome::Satisfied
    })
}

/// Worsening `x -> x'` that is a deprivation before (`x < z`) or creates one
/// (`x' < z <= x`).
fn worsening(case: &Case) -> Option<(usize, usize, &Instance, bool)> {
    let (i, j, pert) = single_change(case)?;
    let (x, y) = (case.base.value(i, j), pert.value(i, j));
    let z = case.base.cutoffs[j] as f64;
    if y >= x || y >= z {
        return None;
    }
    Some((i, j, pert, x >= z))
}

fn own_monotonicity(mode: CdfMode, engine: Engine, case: &Case) -> Result<Outcome> {
    let Some((i, j, pert, crossing)) = worsening(case) else {
        return Ok(Outcome::NotApplicable);
    };
    let p = pair(mode, engine, &case.base, pert)?;
    let delta = p.pert.individual[i] - p.base.individual[i];
    if delta < -TOLERANCE {
        let ch = classify(&p, case.base.d, &[j], &[i]);
        return Ok(violated(delta, ch, format!("P_{i} fell by {} after a worsening", -delta)));
    }
    if mode == CdfMode::Anchored && strict_required(case, &p, i, j, pert, crossing) && delta <= 0.0 {
        return Ok(violated(delta, Channel::Direct, format!("P_{i} did not rise after a strict worsening")));
    }
    Ok(Outcome::Satisfied)
}

/// Under fixed CDFs a poor person's worsening must strictly raise the index
/// when it crosses probability mass (or creates a positive-depth deprivation).
fn strict_required(case: &Case, p: &Pair, i: usize, j: usize, pert: &Instance, crossing: bool) -> bool {
    let col = &p.base_ref.columns()[j];
    let (x, y) = (case.base.value(i, j), pert.value(i, j));
    if crossing {
        p.pert.poor[i] && p.pert.scores[i * case.base.d + j] > 0.0
    } else {
        p.base.poor[i] && col.cdf(y) < col.cdf(x) && x > col.min_value()
    }
}

/// Aggregate monotonicity deepens an existing deprivation; the dimensional
/// variant creates a new one.
fn aggregate_monotonicity(mode: CdfMode, engine: Engine, case: &Case, dimensional: bool) -> Result<Outcome> {
    let Some((i, j, pert, crossing)) = worsening(case) else {
        return Ok(Outcome::NotApplicable);
    };
    if crossing != dimensional {
        return Ok(Outcome::NotApplicable);
    }
    let p = pair(mode, engine, &case.base, pert)?;
    let delta = p.pert.p - p.base.p;
    if delta < -TOLERANCE {
        let ch = classify(&p, case.base.d, &[j], &[i]);
        return Ok(violated(delta, ch, format!("P fell by {} after worsening x[{i}][{j}]", -delta)));
    }
    if mode == CdfMode::Anchored && strict_required(case, &p, i, j, pert, crossing) && delta <= 0.0 {
        return Ok(violated(delta, Channel::Direct, "P did not rise after a strict worsening"));
    }
    Ok(Outcome::Satisfied)
}

fn weighted_total(parts: &[(f64, f64)], total: f64) -> f64 {
    let acc: NeumaierSum = parts.iter().map(|(w, p)| w * p).collect();
    acc.value() / total
}

fn decomposability(mode: CdfMode, engine: Engine, case: &Case) -> Result<Outcome> {
    let Some(labels) = &case.partition else {
        return Ok(Outcome::NotApplicable);
    };
    let groups = subgroups(labels);
    if labels.len() != case.base.n || groups.len() < 2 || groups.iter().any(Vec::is_empty) {
        return Ok(Outcome::NotApplicable);
    }
    let specs = case.base.specs()?;
    let full_ref = fit_with(&case.base, &specs)?;
    let total = engine.evaluate_with(&case.base, &specs, &full_ref)?.p;
    let mut parts = Vec::with_capacity(groups.len());
    let mut shifted = false;
    let all_cols: Vec<usize> = (0..case.base.d).collect();
    for rows in &groups {
        let sub = case.base.select_rows(rows);
        let p = match mode {
            CdfMode::Anchored => engine.evaluate_with(&sub, &specs, &full_ref)?.p,
            CdfMode::InSample => {
                let r = fit_with(&sub, &specs)?;
                shifted |= denominator_moved(&full_ref, &r, &all_cols);
                engine.evaluate_with(&sub, &specs, &r)?.p
            }
        };
        parts.push((sub.total_weight(), p));
    }
    let residual = weighted_total(&parts, case.base.total_weight()) - total;
    Ok(if residual.abs() > TOLERANCE {
        let ch = match (mode, shifted) {
            (CdfMode::Anchored, _) => Channel::Direct,
            (_, true) => Channel::DenominatorEffect,
            (_, false) => Channel::PeerRedistribution,
        };
        violated(residual, ch, format!("weighted subgroup indices miss P = {total} by {residual}"))
    } else {
        Outcome::Satisfied
    })
}

fn subgroup_consistency(mode: CdfMode, engine: Engine, case: &Case) -> Result<Outcome> {
    let (Some(labels), Some(g), Some(pert)) = (&case.partition, case.changed_group, &case.perturbed) else {
        return Ok(Outcome::NotApplicable);
    };
    let groups = subgroups(labels);
    if labels.len() != case.base.n || groups.len() < 2 || groups.iter().any(Vec::is_empty) || g >= groups.len() {
        return Ok(Outcome::NotApplicable);
    }
    let Some(cells) = changed_cells(&case.base, pert) else {
        return Ok(Outcome::NotApplicable);
    };
    if cells.is_empty() || cells.iter().any(|(i, _)| labels[*i] != g) {
        return Ok(Outcome::NotApplicable);
    }
    let rows = &groups[g];
    let (sub_b, sub_p) = (case.base.select_rows(rows), pert.select_rows(rows));
    let full = pair(mode, engine, &case.base, pert)?;
    let (pg_b, pg_p) = match mode {
        CdfMode::Anchored => {
            let specs = case.base.specs()?;
            (
                engine.evaluate_with(&sub_b, &specs, &full.base_ref)?.p,
                engine.evaluate_with(&sub_p, &specs, &full.base_ref)?.p,
            )
        }
        CdfMode::InSample => {
            let p = pair(mode, engine, &sub_b, &sub_p)?;
            (p.base.p, p.pert.p)
        }
    };
    let (d_total, d_group) = (full.pert.p - full.base.p, pg_p - pg_b);
    let cols: Vec<usize> = cells.iter().map(|(_, j)| *j).collect();
    let channel = || match denominator_moved(&full.base_ref, &full.pert_ref, &cols) {
        true => Channel::DenominatorEffect,
        false if mode == CdfMode::Anchored => Channel::Direct,
        false => Channel::PeerRedistribution,
    };
    if d_group.abs() > TOLERANCE && d_total * d_group.signum() < -TOLERANCE {
        return Ok(violated(
            d_total,
            channel(),
            format!("subgroup {g} moved by {d_group} while P moved by {d_total}"),
        ));
    }
    if mode == CdfMode::Anchored {
        let share = sub_b.total_weight() / case.base.total_weight();
        if (d_total - share * d_group).abs() > TOLERANCE {
            return Ok(violated(
                d_total,
                Channel::Direct,
                format!("change in P {d_total} is not the population share of the subgroup change {d_group}"),
            ));
        }
    }
    Ok(Outcome::Satisfied)
}

/// Person `i` trades a deprivation in `a` for a shallower one in `b` of equal weight.
fn weak_rearrangement(mode: CdfMode, engine: Engine, case: &Case) -> Result<Outcome> {
    let (Some(pert), [i], [a, b]) = (&case.perturbed, &case.persons[..], &case.indicators[..]) else {
        return Ok(Outcome::NotApplicable);
    };
    let (i, a, b) = (*i, *a, *b);
    let base = &case.base;
    let Some(cells) = changed_cells(base, pert) else {
        return Ok(Outcome::NotApplicable);
    };
    let applicable = a != b
        && base.weights[a] == base.weights[b]
        && cells.iter().all(|&(r, j)| r == i && (j == a || j == b))
        && base.deprived(i, a)
        && !base.deprived(i, b)
        && !pert.deprived(i, a)
        && pert.deprived(i, b);
    if !applicable {
        return Ok(Outcome::NotApplicable);
    }
    let p = pair(mode, engine, base, pert)?;
    let shallower = p.base_ref.columns()[b].score(pert.value(i, b)) <= p.base_ref.columns()[a].score(base.value(i, a));
    if !shallower {
        return Ok(Outcome::NotApplicable);
    }
    let delta = p.pert.p - p.base.p;
    Ok(if delta > TOLERANCE {
        let ch = classify(&p, base.d, &[a, b], &[i]);
        violated(delta, ch, format!("rearranging person {i}'s deprivation raised P by {delta}"))
    } else if delta.abs() <= TOLERANCE {
        Outcome::Boundary
    } else {
        Outcome::Satisfied
    })
}

/// Progressive transfer between two deprived poor persons of equal survey
/// weight in indicator `j`: `x_a < x_a' <= x_b' < x_b < z`, mean unchanged.
fn weak_transfer(mode: CdfMode, engine: Engine, case: &Case) -> Result<Outcome> {
    let (Some(pert), [ga, gb], [j]) = (&case.perturbed, &case.persons[..], &case.indicators[..]) else {
        return Ok(Outcome::NotApplicable);
    };
    let (a, b, j) = (*ga, *gb, *j);
    let base = &case.base;
    let Some(cells) = changed_cells(base, pert) else {
        return Ok(Outcome::NotApplicable);
    };
    let (xa, xb, ya, yb) = (base.value(a, j), base.value(b, j), pert.value(a, j), pert.value(b, j));
    let z = base.cutoffs[j] as f64;
    let applicable = a != b
        && base.survey_weights[a] == base.survey_weights[b]
        && cells.len() == 2
        && cells.contains(&(a, j))
        && cells.contains(&(b, j))
        && xa < ya
        && ya <= yb
        && yb < xb
        && xb < z
        && ya - xa == xb - yb;
    if !applicable {
        return Ok(Outcome::NotApplicable);
    }
    let p = pair(mode, engine, base, pert)?;
    if !(p.base.poor[a] && p.base.poor[b]) {
        return Ok(Outcome::NotApplicable);
    }
    let delta = p.pert.p - p.base.p;
    Ok(if delta > TOLERANCE {
        let ch = classify(&p, base.d, &[j], &[a, b]);
        violated(
            delta,
            ch,
            format!("transfer of {} from person {b} to person {a} in indicator {j} raised P by {delta}", ya - xa),
        )
    } else if delta.abs() <= TOLERANCE {
        Outcome::Boundary
    } else {
        Outcome::Satisfied
    })
}
