use anyhow::{bail, Context, Result};
use posgap::axioms::{self, Axiom, CdfMode, Channel, Engine, Identification, LabConfig, Mark, Verdict};
use posgap::concordance::{rank_concordance, ConcordanceReport};
use posgap::decomposition::{decompose_by_subgroup, dominance_curve, DecompositionReport, SubgroupReference};
use posgap::measures::measure;
use posgap::{build_profile, Error, ReferenceMode};
use serde::{Deserialize, Serialize};

use crate::input::{fit_baseline, k_grid, load_scored, load_spec};
use crate::output::{destination, emit, write_text};
use crate::{
    usage, AnchorArgs, AxiomArgs, AxiomTable, CompareArgs, CompareTable, ComputeArgs, DecomposeArgs, DecomposeTable,
    ScatterArgs, EXIT_GRID_MISMATCH, EXIT_INCONCLUSIVE,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComputeRow {
    pub dataset: String,
    pub k: f64,
    pub alpha: f64,
    pub h: f64,
    /// `H * A`, the adjusted headcount.
    pub h_a: f64,
    pub a: f64,
    pub s: f64,
    pub p: f64,
    pub p_alpha: f64,
    /// Normalized-gap `M1`, all-cardinal specs only.
    pub m1: Option<f64>,
    pub poor_count: usize,
    pub poor_weight: f64,
    pub total_weight: f64,
    pub warnings: String,
}

pub fn compute(args: &ComputeArgs) -> Result<()> {
    let doc = load_spec(&args.spec)?;
    let specs = &doc.indicators;
    let ks = k_grid(&args.grid.k, specs)?;
    let mut rows = Vec::new();
    for scored in load_scored(&args.reference, &doc)? {
        for &k in &ks {
            let profile = build_profile(&scored.data, specs, &scored.reference, k)?;
            for &alpha in &args.grid.alpha {
                let m = measure(&profile, &scored.data, specs, &scored.reference, alpha)?;
                rows.push(ComputeRow {
                    dataset: scored.name.clone(),
                    k,
                    alpha,
                    h: m.h,
                    h_a: m.m0,
                    a: m.a,
                    s: m.s,
                    p: m.p,
                    p_alpha: m.p_alpha,
                    m1: m.af.as_ref().map(|af| af.m1),
                    poor_count: m.poor_count,
                    poor_weight: m.poor_weight,
                    total_weight: m.total_weight,
                    warnings: m.diagnostics.join("; "),
                });
            }
        }
    }
    emit(&args.output, "compute", &rows, &rows)
}

pub fn anchor(args: &AnchorArgs) -> Result<()> {
    let doc = load_spec(&args.spec)?;
    let reference = fit_baseline(&args.data, &doc, args.pool_weighting.into())?;
    let path = destination(args.output.as_deref(), args.output_dir.as_deref(), "reference.json");
    let mut text = reference.to_document();
    text.push('\n');
    write_text(&text, path.as_deref())?;
    let mode = match reference.mode() {
        ReferenceMode::Pooled => "pooled",
        _ => "anchored",
    };
    eprintln!(
        "{mode} reference over {} rows, data fingerprint {}",
        reference.provenance().rows,
        reference.provenance().fingerprints.join(", ")
    );
    if let Some(p) = path {
        eprintln!("wrote {}", p.display());
    }
    for name in reference.degenerate_columns() {
        eprintln!("note: `{name}` has all its mass on one value");
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub dataset: String,
    pub k: f64,
    pub alpha: f64,
    pub group: String,
    pub rows: usize,
    pub population_share: f64,
    pub h: f64,
    pub a: f64,
    pub s: f64,
    pub p: f64,
    pub p_alpha: f64,
    pub contribution: f64,
    /// `sum_g share_g P_g - P`, repeated on every row of the block.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub dataset: String,
    pub group: String,
    pub k: f64,
    pub h: f64,
    pub h_a: f64,
    pub p: f64,
}

#[derive(Serialize)]
struct NamedDecomposition<'a> {
    dataset: &'a str,
    #[serde(flatten)]
    report: &'a DecompositionReport,
}

#[derive(Serialize)]
struct DecomposeJson<'a> {
    decompositions: Vec<NamedDecomposition<'a>>,
    curve: &'a [CurveRow],
}

pub fn decompose(args: &DecomposeArgs) -> Result<()> {
    let doc = load_spec(&args.spec)?;
    if doc.subgroup_column.is_none() {
        return Err(usage("decompose needs a subgroup column (`subgroup_column` in the spec file or --subgroup-column)"));
    }
    if args.per_subgroup_in_sample && args.reference.mode != ReferenceMode::InSample {
        return Err(usage("--per-subgroup-in-sample needs --mode in-sample"));
    }
    let specs = &doc.indicators;
    let ks = k_grid(&args.grid.k, specs)?;
    let mut reports = Vec::new();
    let mut curve = Vec::new();
    for scored in load_scored(&args.reference, &doc)? {
        for &k in &ks {
            for &alpha in &args.grid.alpha {
                let reference = if args.per_subgroup_in_sample {
                    SubgroupReference::PerSubgroupInSample {
                        allow_inconsistent: args.allow_inconsistent,
                    }
                } else {
                    SubgroupReference::Shared(&scored.reference)
                };
                let report = decompose_by_subgroup(&scored.data, specs, reference, k, alpha).map_err(|e| match e {
                    Error::InconsistentReferences => {
                        usage("per-subgroup in-sample references break the decomposition; add --allow-inconsistent")
                    }
                    other => other.into(),
                })?;
                if report.residual.abs() > 1e-9 {
                    eprintln!(
                        "warning: {} k={k}: subgroup results do not add up to the total (residual {:e})",
                        scored.name, report.residual
                    );
                }
                reports.push((scored.name.clone(), report));
            }
        }
        for row in dominance_curve(&scored.data, specs, &scored.reference, &ks)? {
            curve.push(CurveRow {
                dataset: scored.name.clone(),
                group: row.group,
                k: row.k,
                h: row.h,
                h_a: row.m0,
                p: row.p,
            });
        }
    }
    let json = DecomposeJson {
        decompositions: reports
            .iter()
            .map(|(dataset, report)| NamedDecomposition { dataset, report })
            .collect(),
        curve: &curve,
    };
    match args.table {
        DecomposeTable::Groups => {
            let rows: Vec<GroupRow> = reports
                .iter()
                .flat_map(|(dataset, rep)| {
                    std::iter::once(&rep.total).chain(&rep.rows).map(move |g| GroupRow {
                        dataset: dataset.clone(),
                        k: rep.k,
                        alpha: rep.alpha,
                        group: g.label.clone(),
                        rows: g.rows,
                        population_share: g.population_share,
                        h: g.h,
                        a: g.a,
                        s: g.s,
                        p: g.p,
                        p_alpha: g.p_alpha,
                        contribution: g.contribution,
                        residual: rep.residual,
                    })
                })
                .collect();
            emit(&args.output, "decompose", &rows, &json)
        }
        DecomposeTable::Curve => emit(&args.output, "decompose-curve", &curve, &json),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcordanceRow {
    pub dataset: String,
    pub k: f64,
    pub n_poor: usize,
    pub pearson: f64,
    pub spearman: f64,
    pub kendall_tau_b: f64,
    pub mean_rank_difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub dataset: String,
    pub k: f64,
    pub person: usize,
    pub percentile_s: f64,
    pub percentile_g: f64,
    pub rank_difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub dataset: String,
    pub k: f64,
    pub lower: f64,
    pub upper: f64,
    pub share: f64,
}

#[derive(Serialize)]
struct NamedConcordance<'a> {
    dataset: &'a str,
    k: f64,
    persons: &'a [usize],
    #[serde(flatten)]
    report: &'a ConcordanceReport,
}

pub fn compare_af(args: &CompareArgs) -> Result<()> {
    let doc = load_spec(&args.spec)?;
    let specs = &doc.indicators;
    if let Some(s) = specs.iter().find(|s| s.is_ordinal()) {
        bail!("compare-af needs cardinal indicators with a positive cutoff; `{}` is ordinal", s.name());
    }
    let ks = k_grid(&args.k, specs)?;
    let mut results = Vec::new();
    for scored in load_scored(&args.reference, &doc)? {
        for &k in &ks {
            let profile = build_profile(&scored.data, specs, &scored.reference, k)?;
            match rank_concordance(&profile, &scored.data, specs, args.bin_width) {
                Ok(report) => {
                    let persons: Vec<usize> = (0..profile.n()).filter(|&i| profile.is_poor(i)).collect();
                    results.push((scored.name.clone(), k, persons, report));
                }
                Err(e @ (Error::TooFewPoor { .. } | Error::ZeroVariance(_))) => {
                    eprintln!("warning: {} k={k}: skipped, {e}", scored.name);
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    if results.is_empty() {
        bail!("no poverty cutoff left enough poor persons with varying gaps to compare");
    }
    let json: Vec<NamedConcordance> = results
        .iter()
        .map(|(dataset, k, persons, report)| NamedConcordance {
            dataset,
            k: *k,
            persons,
            report,
        })
        .collect();
    match args.table {
        CompareTable::Summary => {
            let rows: Vec<ConcordanceRow> = results
                .iter()
                .map(|(dataset, k, _, r)| ConcordanceRow {
                    dataset: dataset.clone(),
                    k: *k,
                    n_poor: r.n_poor,
                    pearson: r.pearson,
                    spearman: r.spearman,
                    kendall_tau_b: r.kendall_tau_b,
                    mean_rank_difference: r.mean_rank_difference,
                })
                .collect();
            emit(&args.output, "compare-af", &rows, &json)
        }
        CompareTable::Scatter => {
            let rows: Vec<RankRow> = results
                .iter()
                .flat_map(|(dataset, k, persons, r)| {
                    persons.iter().enumerate().map(move |(idx, &person)| RankRow {
                        dataset: dataset.clone(),
                        k: *k,
                        person,
                        percentile_s: r.percentile_s[idx],
                        percentile_g: r.percentile_g[idx],
                        rank_difference: r.rank_difference[idx],
                    })
                })
                .collect();
            emit(&args.output, "compare-af-scatter", &rows, &json)
        }
        CompareTable::Histogram => {
            let rows: Vec<HistogramRow> = results
                .iter()
                .flat_map(|(dataset, k, _, r)| {
                    r.histogram.iter().map(move |b| HistogramRow {
                        dataset: dataset.clone(),
                        k: *k,
                        lower: b.lower,
                        upper: b.upper,
                        share: b.share,
                    })
                })
                .collect();
            emit(&args.output, "compare-af-histogram", &rows, &json)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersonRow {
    pub dataset: String,
    pub k: f64,
    pub alpha: f64,
    pub person: usize,
    pub subgroup: Option<String>,
    pub survey_weight: f64,
    pub poor: bool,
    /// Weighted deprivation count `c_i` before censoring.
    pub deprivation_score: f64,
    /// `A_i`, censored.
    pub intensity: f64,
    /// `S_i`, censored.
    pub positional_gap: f64,
    /// `P_i` at this alpha.
    pub degree: f64,
}

pub fn scatter(args: &ScatterArgs) -> Result<()> {
    let doc = load_spec(&args.spec)?;
    let specs = &doc.indicators;
    let ks = k_grid(&args.grid.k, specs)?;
    let mut rows = Vec::new();
    for scored in load_scored(&args.reference, &doc)? {
        let data = &scored.data;
        for &k in &ks {
            let profile = build_profile(data, specs, &scored.reference, k)?;
            for &alpha in &args.grid.alpha {
                let m = measure(&profile, data, specs, &scored.reference, alpha)?;
                let ind = &m.individuals;
                for i in 0..data.n() {
                    rows.push(PersonRow {
                        dataset: scored.name.clone(),
                        k,
                        alpha,
                        person: i,
                        subgroup: data.subgroups().map(|g| g[i].clone()),
                        survey_weight: data.survey_weight(i),
                        poor: profile.is_poor(i),
                        deprivation_score: profile.deprivation_scores()[i],
                        intensity: ind.intensity[i],
                        positional_gap: ind.positional_gap[i],
                        degree: ind.degree[i],
                    });
                }
            }
        }
    }
    emit(&args.output, "scatter", &rows, &rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub axiom: Axiom,
    pub mode: CdfMode,
    pub identification: Identification,
    pub expected: Verdict,
    pub observed: Option<Verdict>,
    pub matches: bool,
    pub exhaustive_cases: u64,
    pub random_trials: u64,
    pub applicable: u64,
    pub boundary: u64,
    pub violations: u64,
    /// Failure channels seen, `;`-separated.
    pub channels: String,
    pub missing_channels: String,
    pub witnesses: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOut {
    pub property: String,
    pub anchored: Option<Mark>,
    pub in_sample: Option<Mark>,
    pub expected_anchored: Option<Mark>,
    pub expected_in_sample: Option<Mark>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessRow {
    pub axiom: Axiom,
    pub mode: CdfMode,
    pub identification: Identification,
    pub channel: Channel,
    pub delta: f64,
    pub detail: String,
    /// The full case as JSON.
    pub case: String,
}

fn channel_list(channels: &[Channel]) -> String {
    channels.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(";")
}

fn mark(m: Option<Mark>) -> &'static str {
    m.map_or("-", |m| m.symbol())
}

pub fn axioms(args: &AxiomArgs) -> Result<u8> {
    let defaults = LabConfig::default();
    let config = LabConfig {
        seed: args.seed,
        trials: args.trials,
        exhaustive: !args.no_exhaustive,
        engine: args.inject_fault.unwrap_or(Engine::Standard),
        axioms: if args.axiom.is_empty() { defaults.axioms.clone() } else { args.axiom.clone() },
        modes: if args.mode.is_empty() { defaults.modes.clone() } else { args.mode.clone() },
        identifications: if args.identification.is_empty() {
            defaults.identifications.clone()
        } else {
            args.identification.clone()
        },
        ..defaults
    };
    let report = axioms::run_lab(&config).context("axiom lab")?;

    eprintln!("{:42} {:12} {:12}", "property", "anchored", "in-sample");
    for row in &report.grid {
        eprintln!("{:42} {:12} {:12}", row.property, mark(row.anchored), mark(row.in_sample));
    }
    let mismatches = report.mismatches();
    let inconclusive = report.inconclusive();
    for c in &mismatches {
        eprintln!(
            "mismatch: {} {} {}: expected {:?}, observed {:?} ({} violations)",
            c.axiom, c.mode.as_str(), c.identification.as_str(), c.expected, c.observed, c.violations
        );
    }
    for c in &inconclusive {
        eprintln!(
            "inconclusive: {} {} {}: no witness after {} trials{}",
            c.axiom,
            c.mode.as_str(),
            c.identification.as_str(),
            c.random_trials,
            if c.missing_channels.is_empty() {
                String::new()
            } else {
                format!(", missing channels {}", channel_list(&c.missing_channels))
            }
        );
    }
    let code = if !mismatches.is_empty() {
        eprintln!("grid differs from the expected properties");
        EXIT_GRID_MISMATCH
    } else if !inconclusive.is_empty() {
        eprintln!("grid inconclusive");
        EXIT_INCONCLUSIVE
    } else {
        eprintln!("grid matches the expected properties");
        0
    };

    match args.table {
        AxiomTable::Cells => {
            let rows: Vec<CellRow> = report
                .cells
                .iter()
                .map(|c| CellRow {
                    axiom: c.axiom,
                    mode: c.mode,
                    identification: c.identification,
                    expected: c.expected,
                    observed: c.observed,
                    matches: c.matches() && c.conclusive(),
                    exhaustive_cases: c.exhaustive_cases,
                    random_trials: c.random_trials,
                    applicable: c.applicable,
                    boundary: c.boundary,
                    violations: c.violations,
                    channels: channel_list(&c.channels),
                    missing_channels: channel_list(&c.missing_channels),
                    witnesses: c.witnesses.len(),
                })
                .collect();
            emit(&args.output, "axioms", &rows, &report)?;
        }
        AxiomTable::Grid => {
            let rows: Vec<GridOut> = report
                .grid
                .iter()
                .map(|g| GridOut {
                    property: g.property.clone(),
                    anchored: g.anchored,
                    in_sample: g.in_sample,
                    expected_anchored: g.expected_anchored,
                    expected_in_sample: g.expected_in_sample,
                })
                .collect();
            emit(&args.output, "axioms-grid", &rows, &report)?;
        }
        AxiomTable::Witnesses => {
            let rows = report
                .cells
                .iter()
                .flat_map(|c| &c.witnesses)
                .map(|w| {
                    Ok(WitnessRow {
                        axiom: w.axiom,
                        mode: w.mode,
                        identification: w.identification,
                        channel: w.channel,
                        delta: w.delta,
                        detail: w.detail.clone(),
                        case: serde_json::to_string(&w.case)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            emit(&args.output, "axioms-witnesses", &rows, &report)?;
        }
    }
    Ok(code)
}
