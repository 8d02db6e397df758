use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use posgap::{
    default_k_grid, encode_dataset, parse_spec, Dataset, IndicatorSpec, PovertyCutoff, ReferenceDistribution,
    ReferenceMode, SpecDocument, Table,
};

use crate::{usage, ReferenceArgs, SpecArgs};

pub fn load_spec(args: &SpecArgs) -> Result<SpecDocument> {
    let text = std::fs::read_to_string(&args.spec).with_context(|| format!("reading spec {}", args.spec.display()))?;
    let mut doc = parse_spec(&text).with_context(|| format!("spec {}", args.spec.display()))?;
    if let Some(p) = args.missing_policy {
        doc.missing_policy = p;
    }
    if let Some(c) = &args.subgroup_column {
        doc.subgroup_column = Some(c.clone());
    }
    for d in &doc.diagnostics {
        eprintln!("note: {d}");
    }
    Ok(doc)
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = reader
        .headers()
        .with_context(|| format!("reading header of {}", path.display()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.with_context(|| format!("reading {}", path.display()))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(Table::new(headers, rows))
}

pub fn load_dataset(path: &Path, doc: &SpecDocument) -> Result<Dataset> {
    let table = read_table(path)?;
    encode_dataset(&table, doc).with_context(|| format!("data {}", path.display()))
}

/// A named dataset with the reference it is scored against.
pub struct Scored {
    pub name: String,
    pub data: Dataset,
    pub reference: ReferenceDistribution,
}

/// Short names for the data files: file stems, or full paths when stems collide.
pub fn dataset_names(paths: &[PathBuf]) -> Vec<String> {
    let stems: Vec<String> = paths
        .iter()
        .map(|p| p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()))
        .collect();
    let unique = stems.iter().enumerate().all(|(i, s)| !stems[..i].contains(s));
    if unique {
        stems
    } else {
        paths.iter().map(|p| p.display().to_string()).collect()
    }
}

/// Load every data file and pair it with its reference according to the mode.
pub fn load_scored(args: &ReferenceArgs, doc: &SpecDocument) -> Result<Vec<Scored>> {
    let specs = &doc.indicators;
    if args.mode != ReferenceMode::Anchored && (args.reference.is_some() || !args.baseline.is_empty()) {
        return Err(usage("--reference and --baseline need --mode anchored"));
    }
    let datasets = args
        .data
        .iter()
        .map(|p| load_dataset(p, doc))
        .collect::<Result<Vec<_>>>()?;
    let names = dataset_names(&args.data);
    let references: Vec<ReferenceDistribution> = match args.mode {
        ReferenceMode::InSample => datasets
            .iter()
            .map(|d| ReferenceDistribution::fit(d, specs, ReferenceMode::InSample))
            .collect::<posgap::Result<_>>()?,
        ReferenceMode::Pooled => {
            if datasets.len() < 2 {
                return Err(usage("--mode pooled needs at least two --data files"));
            }
            let parts: Vec<&Dataset> = datasets.iter().collect();
            let r = ReferenceDistribution::fit_pooled(&parts, specs, args.pool_weighting.into())?;
            vec![r; datasets.len()]
        }
        ReferenceMode::Anchored => {
            let r = match (&args.reference, args.baseline.is_empty()) {
                (Some(path), _) => {
                    let text =
                        std::fs::read_to_string(path).with_context(|| format!("reading reference {}", path.display()))?;
                    let r = ReferenceDistribution::from_document(&text)
                        .with_context(|| format!("reference {}", path.display()))?;
                    r.check_covers(specs)?;
                    r
                }
                (None, false) => fit_baseline(&args.baseline, doc, args.pool_weighting.into())?,
                (None, true) => return Err(usage("--mode anchored needs --reference or --baseline")),
            };
            vec![r; datasets.len()]
        }
    };
    Ok(names
        .into_iter()
        .zip(datasets)
        .zip(references)
        .map(|((name, data), reference)| Scored { name, data, reference })
        .collect())
}

/// Anchor on one baseline file, or pool several.
pub fn fit_baseline(paths: &[PathBuf], doc: &SpecDocument, pooling: posgap::reference::PoolWeighting) -> Result<ReferenceDistribution> {
    let specs = &doc.indicators;
    let datasets = paths.iter().map(|p| load_dataset(p, doc)).collect::<Result<Vec<_>>>()?;
    Ok(if datasets.len() == 1 {
        ReferenceDistribution::fit(&datasets[0], specs, ReferenceMode::Anchored)?
    } else {
        let parts: Vec<&Dataset> = datasets.iter().collect();
        ReferenceDistribution::fit_pooled(&parts, specs, pooling)?
    })
}

/// Resolve `--k` entries (numbers or named rules) into an ascending grid.
pub fn k_grid(raw: &[String], specs: &[IndicatorSpec]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Ok(default_k_grid(specs));
    }
    let mut ks = Vec::with_capacity(raw.len());
    for entry in raw {
        let cutoff: PovertyCutoff = entry.trim().parse().map_err(|e| usage(format!("--k {entry}: {e}")))?;
        ks.push(cutoff.resolve(specs).map_err(|e| usage(format!("--k {entry}: {e}")))?);
    }
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    Ok(ks)
}
