//! Property lab: checks each axiom under anchored and in-sample references and
//! each identification rule, by exhaustive enumeration of tiny instances and by
//! seeded random search, and returns shrunk, self-verifying counterexamples.
//!
//! A check works on a [`Case`]: a base [`Instance`], usually a perturbed copy,
//! and the persons, indicators or partition the axiom talks about. Under the
//! anchored mode every evaluation of a case uses the CDFs fitted on the base;
//! under the in-sample mode each dataset is scored against its own CDFs.

mod check;
mod instance;
mod search;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use check::{check_case, Outcome};
pub use instance::{
    fit_reference, gen_matrix, Engine, Evaluation, GenConfig, Identification, Instance, SurveyScheme, WeightScheme,
};
pub use search::{exhaustive_weak_transfer, find_witness, run_cell, run_lab, shrink, CellReport, LabConfig, LabReport};

/// Equality slack for quantities that should agree up to rounding.
pub const TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Symmetry,
    Replication,
    Bounds,
    OrdinalInvariance,
    DeprivationFocus,
    PovertyFocus,
    OwnMonotonicity,
    AggregateMonotonicity,
    DimensionalMonotonicity,
    Decomposability,
    SubgroupConsistency,
    WeakRearrangement,
    WeakTransfer,
}

impl Axiom {
    pub const ALL: [Axiom; 13] = [
        Self::Symmetry,
        Self::Replication,
        Self::Bounds,
        Self::OrdinalInvariance,
        Self::DeprivationFocus,
        Self::PovertyFocus,
        Self::OwnMonotonicity,
        Self::AggregateMonotonicity,
        Self::DimensionalMonotonicity,
        Self::Decomposability,
        Self::SubgroupConsistency,
        Self::WeakRearrangement,
        Self::WeakTransfer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Symmetry => "symmetry",
            Self::Replication => "replication",
            Self::Bounds => "bounds",
            Self::OrdinalInvariance => "ordinal_invariance",
            Self::DeprivationFocus => "deprivation_focus",
            Self::PovertyFocus => "poverty_focus",
            Self::OwnMonotonicity => "own_monotonicity",
            Self::AggregateMonotonicity => "aggregate_monotonicity",
            Self::DimensionalMonotonicity => "dimensional_monotonicity",
            Self::Decomposability => "decomposability",
            Self::SubgroupConsistency => "subgroup_consistency",
            Self::WeakRearrangement => "weak_rearrangement",
            Self::WeakTransfer => "weak_transfer",
        }
    }
}

impl std::fmt::Display for Axiom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Axiom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown axiom `{s}`")))
    }
}

/// Where the CDFs come from during a check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CdfMode {
    Anchored,
    InSample,
}

impl CdfMode {
    pub const ALL: [CdfMode; 2] = [Self::Anchored, Self::InSample];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Anchored => "anchored",
            Self::InSample => "in-sample",
        }
    }
}

impl std::str::FromStr for CdfMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "anchored" => Ok(Self::Anchored),
            "in-sample" | "in_sample" => Ok(Self::InSample),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
}

/// How a violation under in-sample CDFs comes about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// The minimum or the mass at it moved, rescaling every score in the column.
    DenominatorEffect,
    /// Same denominator, but other poor persons' scores moved.
    PeerRedistribution,
    /// Only the persons touched by the perturbation changed.
    Direct,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::DenominatorEffect => "denominator_effect",
            Self::PeerRedistribution => "peer_redistribution",
            Self::Direct => "direct",
        }
    }
}

/// The verdict the theory predicts for each cell.
pub fn expected_verdict(axiom: Axiom, mode: CdfMode, rule: Identification) -> Verdict {
    use Axiom::*;
    match (axiom, mode) {
        (WeakTransfer, _) => Verdict::Fails,
        (_, CdfMode::Anchored) => Verdict::Holds,
        (Symmetry | Replication | Bounds | OrdinalInvariance | DeprivationFocus | OwnMonotonicity, _) => Verdict::Holds,
        (PovertyFocus, _) if rule == Identification::Union => Verdict::Holds,
        _ => Verdict::Fails,
    }
}

/// Summary mark of one property row under one mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mark {
    Holds,
    /// Holds under some identification rules only.
    Conditional,
    Fails,
}

impl Mark {
    pub fn symbol(self) -> &'static str {
        match self {
            Self::Holds => "holds",
            Self::Conditional => "conditional",
            Self::Fails => "fails",
        }
    }

    pub(crate) fn combine(verdicts: impl IntoIterator<Item = Verdict>) -> Option<Mark> {
        let (mut holds, mut fails) = (0, 0);
        for v in verdicts {
            match v {
                Verdict::Holds => holds += 1,
                Verdict::Fails => fails += 1,
            }
        }
        match (holds, fails) {
            (0, 0) => None,
            (_, 0) => Some(Mark::Holds),
            (0, _) => Some(Mark::Fails),
            _ => Some(Mark::Conditional),
        }
    }
}

/// Property rows of the summary grid and the axioms each one covers.
pub const GRID_ROWS: [(&str, &[Axiom]); 10] = [
    ("symmetry, replication, bounds", &[Axiom::Symmetry, Axiom::Replication, Axiom::Bounds]),
    ("ordinal invariance", &[Axiom::OrdinalInvariance]),
    ("deprivation focus", &[Axiom::DeprivationFocus]),
    ("poverty focus", &[Axiom::PovertyFocus]),
    ("own monotonicity", &[Axiom::OwnMonotonicity]),
    ("aggregate monotonicity", &[Axiom::AggregateMonotonicity]),
    ("dimensional monotonicity", &[Axiom::DimensionalMonotonicity]),
    ("decomposability and subgroup consistency", &[Axiom::Decomposability, Axiom::SubgroupConsistency]),
    ("weak rearrangement", &[Axiom::WeakRearrangement]),
    ("weak transfer", &[Axiom::WeakTransfer]),
];

/// One concrete check: a base instance plus whatever the axiom needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub base: Instance,
    #[serde(default)]
    pub perturbed: Option<Instance>,
    /// Persons the perturbation is about (the mover, or giver and receiver).
    #[serde(default)]
    pub persons: Vec<usize>,
    #[serde(default)]
    pub indicators: Vec<usize>,
    /// Subgroup label per row.
    #[serde(default)]
    pub partition: Option<Vec<usize>>,
    #[serde(default)]
    pub changed_group: Option<usize>,
}

impl Case {
    pub fn new(base: Instance) -> Self {
        Self {
            base,
            perturbed: None,
            persons: Vec::new(),
            indicators: Vec::new(),
            partition: None,
            changed_group: None,
        }
    }

    pub fn with_perturbed(mut self, perturbed: Instance) -> Self {
        self.perturbed = Some(perturbed);
        self
    }

    pub fn with_persons(mut self, persons: Vec<usize>) -> Self {
        self.persons = persons;
        self
    }

    pub fn with_indicators(mut self, indicators: Vec<usize>) -> Self {
        self.indicators = indicators;
        self
    }

    pub fn with_partition(mut self, partition: Vec<usize>, changed: Option<usize>) -> Self {
        self.partition = Some(partition);
        self.changed_group = changed;
        self
    }

    /// Drop row `r` from base, perturbation and partition; `None` if `r` is involved.
    pub(crate) fn without_row(&self, r: usize) -> Option<Self> {
        if self.persons.contains(&r) {
            return None;
        }
        let mut out = self.clone();
        out.base = self.base.without_row(r)?;
        if let Some(p) = &self.perturbed {
            if p.n != self.base.n {
                return None;
            }
            out.perturbed = Some(p.without_row(r)?);
        }
        if let Some(labels) = &mut out.partition {
            labels.remove(r);
        }
        for p in &mut out.persons {
            if *p > r {
                *p -= 1;
            }
        }
        Some(out)
    }

    pub(crate) fn without_column(&self, c: usize) -> Option<Self> {
        if self.indicators.contains(&c) {
            return None;
        }
        let mut out = self.clone();
        out.base = self.base.without_column(c)?;
        if let Some(p) = &self.perturbed {
            if p.d != self.base.d {
                return None;
            }
            out.perturbed = Some(p.without_column(c)?);
        }
        for j in &mut out.indicators {
            if *j > c {
                *j -= 1;
            }
        }
        Some(out)
    }
}

/// A violation found by the lab, small enough to read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub axiom: Axiom,
    pub mode: CdfMode,
    pub identification: Identification,
    pub case: Case,
    /// Signed change in the index (or the decomposition residual).
    pub delta: f64,
    pub channel: Channel,
    pub detail: String,
}

impl Witness {
    /// Re-run the check and confirm the same violation within tolerance.
    pub fn verify(&self, engine: Engine) -> Result<bool> {
        Ok(match check_case(self.axiom, self.mode, engine, &self.case)? {
            Outcome::Violated { delta, channel, .. } => {
                channel == self.channel && (delta - self.delta).abs() <= TOLERANCE
            }
            _ => false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_round_trips() {
        for a in Axiom::ALL {
            assert_eq!(a.as_str().parse::<Axiom>().unwrap(), a);
        }
        assert_eq!("weak-transfer".parse::<Axiom>().unwrap(), Axiom::WeakTransfer);
        assert!("nonsense".parse::<Axiom>().is_err());
        assert_eq!("in-sample".parse::<CdfMode>().unwrap(), CdfMode::InSample);
    }

    #[test]
    fn expected_grid_shape() {
        let row = |axioms: &[Axiom], mode| {
            Mark::combine(
                axioms
                    .iter()
                    .flat_map(|a| Identification::ALL.map(|r| expected_verdict(*a, mode, r))),
            )
            .unwrap()
        };
        let anchored: Vec<Mark> = GRID_ROWS.iter().map(|(_, a)| row(a, CdfMode::Anchored)).collect();
        let in_sample: Vec<Mark> = GRID_ROWS.iter().map(|(_, a)| row(a, CdfMode::InSample)).collect();
        use Mark::*;
        assert_eq!(anchored, vec![Holds, Holds, Holds, Holds, Holds, Holds, Holds, Holds, Holds, Fails]);
        assert_eq!(
            in_sample,
            vec![Holds, Holds, Holds, Conditional, Holds, Fails, Fails, Fails, Fails, Fails]
        );
    }
}
