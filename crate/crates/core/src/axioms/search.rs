//! Case generation (exhaustive and random), the per-cell runner, shrinking and
//! the full grid.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::check::{check_case, Outcome};
use super::instance::{gen_with, random_config, random_values, Engine, Identification, Instance, SurveyScheme, WeightScheme};
use super::{expected_verdict, Axiom, Case, CdfMode, Channel, Mark, Verdict, Witness, GRID_ROWS};
use crate::Result;

/// Largest instances enumerated exhaustively.
const EXHAUSTIVE_MAX_N: usize = 4;
const EXHAUSTIVE_MAX_D: usize = 2;
const EXHAUSTIVE_SCALES: [usize; 2] = [2, 3];
/// Counterexamples kept per cell when an axiom expected to hold is violated.
const MAX_COUNTEREXAMPLES: usize = 3;

fn exhaustive_max_n(axiom: Axiom) -> usize {
    match axiom {
        // n! permutations or (partitions x cell changes) per base
        Axiom::Symmetry | Axiom::SubgroupConsistency => 4,
        _ => EXHAUSTIVE_MAX_N,
    }
}

/// Nondecreasing sequences of length `n` over `0..kinds`.
fn multisets(kinds: usize, n: usize, f: &mut dyn FnMut(&[usize]) -> Result<()>) -> Result<()> {
    fn rec(kinds: usize, n: usize, start: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> Result<()>) -> Result<()> {
        if cur.len() == n {
            return f(cur);
        }
        for k in start..kinds {
            cur.push(k);
            rec(kinds, n, k, cur, f)?;
            cur.pop();
        }
        Ok(())
    }
    rec(kinds, n, 0, &mut Vec::with_capacity(n), f)
}

/// Every vector in the product `0..dims[0] x 0..dims[1] x ...`.
fn product(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &dim in dims {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..dim).map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Set partitions of `0..n` as restricted growth strings with at least 2 blocks.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            if max >= 1 {
                out.push(cur.clone());
            }
            return;
        }
        let limit = if cur.is_empty() { 0 } else { max + 1 };
        for g in 0..=limit {
            cur.push(g);
            rec(n, cur, max.max(g), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, &mut Vec::new(), 0, &mut out);
    out
}

/// Strictly increasing maps from `0..size` into `0..=top`.
fn increasing_maps(size: usize, top: usize) -> Vec<Vec<usize>> {
    fn rec(size: usize, top: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        let start = cur.last().map_or(0, |v| v + 1);
        for v in start..=top {
            cur.push(v);
            rec(size, top, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(size, top, &mut Vec::new(), &mut out);
    out
}

/// All small instances under `rule`, in increasing size.
fn exhaustive_bases(rule: Identification, max_n: usize, f: &mut dyn FnMut(Instance) -> Result<()>) -> Result<()> {
    let alphas = [1.0, 2.0];
    for n in 1..=max_n {
        for d in 1..=EXHAUSTIVE_MAX_D {
            let weight_schemes: Vec<Vec<f64>> = if d == 1 {
                vec![vec![1.0]]
            } else {
                vec![vec![1.0, 1.0], vec![1.0, 3.0]]
            };
            for scales in product(&vec![EXHAUSTIVE_SCALES.len(); d]) {
                let scales: Vec<usize> = scales.iter().map(|&s| EXHAUSTIVE_SCALES[s]).collect();
                let kinds = product(&scales);
                let cut_dims: Vec<usize> = scales.iter().map(|s| s - 1).collect();
                for cut in product(&cut_dims) {
                    let cutoffs: Vec<usize> = cut.iter().map(|c| c + 1).collect();
                    for raw in &weight_schemes {
                        for &alpha in &alphas {
                            multisets(kinds.len(), n, &mut |rows| {
                                let values = rows.iter().flat_map(|&r| kinds[r].iter().map(|&v| v as f64)).collect();
                                match Instance::new(
                                    n,
                                    d,
                                    values,
                                    vec![1.0; n],
                                    scales.clone(),
                                    cutoffs.clone(),
                                    raw,
                                    rule,
                                    alpha,
                                ) {
                                    Ok(inst) => f(inst),
                                    // no intermediate cutoff with one indicator
                                    Err(_) => Ok(()),
                                }
                            })?;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn single(base: &Instance, i: usize, j: usize, v: f64) -> Case {
    let mut p = base.clone();
    p.set(i, j, v);
    Case::new(base.clone()).with_perturbed(p).with_persons(vec![i]).with_indicators(vec![j])
}

/// Every case of `axiom` built on `base`.
fn exhaustive_cases(axiom: Axiom, base: &Instance, f: &mut dyn FnMut(Case) -> Result<()>) -> Result<()> {
    let (n, d) = (base.n, base.d);
    let cells = || (0..n).flat_map(move |i| (0..d).map(move |j| (i, j)));
    match axiom {
        Axiom::Symmetry => {
            for rows in permutations(n) {
                for cols in permutations(d) {
                    f(Case::new(base.clone()).with_perturbed(base.permuted(&rows, &cols)))?;
                }
            }
        }
        Axiom::Replication => {
            f(Case::new(base.clone()).with_perturbed(base.replicated(2)))?;
        }
        Axiom::Bounds => {
            f(Case::new(base.clone()))?;
            for (i, j) in cells() {
                for v in 0..base.scales[j] {
                    if v as f64 != base.value(i, j) {
                        f(single(base, i, j, v as f64))?;
                    }
                }
            }
        }
        Axiom::OrdinalInvariance => {
            for j in 0..d {
                for map in increasing_maps(base.scales[j], 4) {
                    if map.iter().enumerate().any(|(a, b)| a != *b) {
                        f(Case::new(base.clone()).with_perturbed(base.relabeled(j, &map)))?;
                    }
                }
            }
        }
        Axiom::DeprivationFocus => {
            for (i, j) in cells().filter(|&(i, j)| !base.deprived(i, j)) {
                for v in (base.value(i, j) as usize + 1)..base.scales[j] {
                    f(single(base, i, j, v as f64))?;
                }
            }
        }
        Axiom::PovertyFocus => {
            let kinds = product(&base.scales);
            for i in 0..n {
                for kind in &kinds {
                    let mut p = base.clone();
                    for (j, &v) in kind.iter().enumerate() {
                        p.set(i, j, v as f64);
                    }
                    if p != *base {
                        f(Case::new(base.clone()).with_perturbed(p).with_persons(vec![i]))?;
                    }
                }
            }
        }
        Axiom::OwnMonotonicity | Axiom::AggregateMonotonicity | Axiom::DimensionalMonotonicity => {
            for (i, j) in cells() {
                let x = base.value(i, j) as usize;
                let z = base.cutoffs[j];
                let ok = match axiom {
                    Axiom::AggregateMonotonicity => x < z,
                    Axiom::DimensionalMonotonicity => x >= z,
                    _ => true,
                };
                if ok {
                    for v in 0..x.min(z) {
                        f(single(base, i, j, v as f64))?;
                    }
                }
            }
        }
        Axiom::Decomposability => {
            for labels in partitions(n) {
                f(Case::new(base.clone()).with_partition(labels, None))?;
            }
        }
        Axiom::SubgroupConsistency => {
            for labels in partitions(n) {
                for (i, j) in cells() {
                    for v in 0..base.scales[j] {
                        if v as f64 != base.value(i, j) {
                            let c = single(base, i, j, v as f64).with_partition(labels.clone(), Some(labels[i]));
                            f(c)?;
                        }
                    }
                }
            }
        }
        Axiom::WeakRearrangement => {
            for i in 0..n {
                for a in 0..d {
                    for b in 0..d {
                        if a == b || base.weights[a] != base.weights[b] || !base.deprived(i, a) || base.deprived(i, b) {
                            continue;
                        }
                        for ya in base.cutoffs[a]..base.scales[a] {
                            for yb in 0..base.cutoffs[b] {
                                let mut p = base.clone();
                                p.set(i, a, ya as f64);
                                p.set(i, b, yb as f64);
                                f(Case::new(base.clone())
                                    .with_perturbed(p)
                                    .with_persons(vec![i])
                                    .with_indicators(vec![a, b]))?;
                            }
                        }
                    }
                }
            }
        }
        Axiom::WeakTransfer => {
            for a in 0..n {
                for b in 0..n {
                    for j in 0..d {
                        for c in transfers(base, a, b, j) {
                            f(c)?;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Every progressive transfer from `b` (better off) to `a` in indicator `j`.
fn transfers(base: &Instance, a: usize, b: usize, j: usize) -> Vec<Case> {
    let (xa, xb) = (base.value(a, j), base.value(b, j));
    if a == b || !(xa < xb) || xb >= base.cutoffs[j] as f64 || base.survey_weights[a] != base.survey_weights[b] {
        return Vec::new();
    }
    let max_delta = ((xb - xa) / 2.0).floor() as usize;
    (1..=max_delta)
        .map(|delta| {
            let mut p = base.clone();
            p.set(a, j, xa + delta as f64);
            p.set(b, j, xb - delta as f64);
            Case::new(base.clone()).with_perturbed(p).with_persons(vec![a, b]).with_indicators(vec![j])
        })
        .collect()
}

fn random_partition<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let m = rng.gen_range(2..=n.min(4));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut labels = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        labels[i] = if pos < m { pos } else { rng.gen_range(0..m) };
    }
    labels
}

fn pick_cell<R: Rng>(rng: &mut R, base: &Instance, keep: impl Fn(usize, usize) -> bool) -> Option<(usize, usize)> {
    let cells: Vec<(usize, usize)> = (0..base.n)
        .flat_map(|i| (0..base.d).map(move |j| (i, j)))
        .filter(|&(i, j)| keep(i, j))
        .collect();
    cells.choose(rng).copied()
}

/// One random case of `axiom`, or `None` when the drawn instance offers none.
fn random_case<R: Rng>(axiom: Axiom, rule: Identification, rng: &mut R) -> Result<Option<Case>> {
    let min_d = if axiom == Axiom::WeakRearrangement { 2 } else { 1 };
    let mut cfg = random_config(rng, rule, min_d);
    match axiom {
        Axiom::WeakRearrangement => {
            cfg.weights = if rng.gen_bool(0.75) { WeightScheme::Equal } else { WeightScheme::Integer };
        }
        Axiom::WeakTransfer if rng.gen_bool(0.5) => cfg.survey = SurveyScheme::Unit,
        _ => {}
    }
    let base = gen_with(rng, &cfg)?;
    let (n, d) = (base.n, base.d);
    let case = match axiom {
        Axiom::Symmetry => {
            let mut rows: Vec<usize> = (0..n).collect();
            let mut cols: Vec<usize> = (0..d).collect();
            rows.shuffle(rng);
            cols.shuffle(rng);
            let p = base.permuted(&rows, &cols);
            Some(Case::new(base).with_perturbed(p))
        }
        Axiom::Replication => {
            let p = base.replicated(rng.gen_range(2..=3));
            Some(Case::new(base).with_perturbed(p))
        }
        Axiom::Bounds => {
            let mut p = base.clone();
            let low_mass = *[0.0, 0.5, 0.9].choose(rng).unwrap();
            p.values = random_values(rng, n, &base.scales, low_mass);
            Some(Case::new(base).with_perturbed(p))
        }
        Axiom::OrdinalInvariance => {
            let mut p = base.clone();
            for j in 0..d {
                if j == 0 || rng.gen_bool(0.5) {
                    let s = base.scales[j];
                    let top = s - 1 + rng.gen_range(0..=4);
                    let mut map = index::sample(rng, top + 1, s).into_vec();
                    map.sort_unstable();
                    p = p.relabeled(j, &map);
                }
            }
            Some(Case::new(base).with_perturbed(p))
        }
        Axiom::DeprivationFocus => pick_cell(rng, &base, |i, j| !base.deprived(i, j) && base.value(i, j) < base.top(j))
            .map(|(i, j)| {
                let v = rng.gen_range(base.value(i, j) as usize + 1..base.scales[j]);
                single(&base, i, j, v as f64)
            }),
        Axiom::PovertyFocus => {
            let poor = base.poor();
            let candidates: Vec<usize> = (0..n).filter(|&i| !poor[i]).collect();
            let mut found = None;
            if let Some(&i) = candidates.choose(rng) {
                for _ in 0..20 {
                    let mut p = base.clone();
                    for j in 0..d {
                        if rng.gen_bool(0.5) {
                            p.set(i, j, rng.gen_range(0..base.scales[j]) as f64);
                        }
                    }
                    if p != base && !p.poor()[i] {
                        found = Some(Case::new(base.clone()).with_perturbed(p).with_persons(vec![i]));
                        break;
                    }
                }
            }
            found
        }
        Axiom::OwnMonotonicity | Axiom::AggregateMonotonicity | Axiom::DimensionalMonotonicity => {
            let keep = |i: usize, j: usize| {
                base.value(i, j) > 0.0
                    && match axiom {
                        Axiom::AggregateMonotonicity => base.deprived(i, j),
                        Axiom::DimensionalMonotonicity => !base.deprived(i, j),
                        _ => true,
                    }
            };
            pick_cell(rng, &base, keep).map(|(i, j)| {
                let upper = (base.value(i, j) as usize).min(base.cutoffs[j]);
                let v = rng.gen_range(0..upper);
                single(&base, i, j, v as f64)
            })
        }
        Axiom::Decomposability => {
            let labels = random_partition(rng, n);
            Some(Case::new(base).with_partition(labels, None))
        }
        Axiom::SubgroupConsistency => {
            let labels = random_partition(rng, n);
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..d));
            let x = base.value(i, j) as usize;
            let v = (x + rng.gen_range(1..base.scales[j])) % base.scales[j];
            Some(single(&base, i, j, v as f64).with_partition(labels.clone(), Some(labels[i])))
        }
        Axiom::WeakRearrangement => {
            let mut options = Vec::new();
            for i in 0..n {
                for a in 0..d {
                    for b in 0..d {
                        if a != b && base.weights[a] == base.weights[b] && base.deprived(i, a) && !base.deprived(i, b) {
                            options.push((i, a, b));
                        }
                    }
                }
            }
            options.choose(rng).copied().map(|(i, a, b)| {
                let mut p = base.clone();
                p.set(i, a, rng.gen_range(base.cutoffs[a]..base.scales[a]) as f64);
                p.set(i, b, rng.gen_range(0..base.cutoffs[b]) as f64);
                Case::new(base.clone()).with_perturbed(p).with_persons(vec![i]).with_indicators(vec![a, b])
            })
        }
        Axiom::WeakTransfer => {
            let poor = base.poor();
            let mut options = Vec::new();
            for a in (0..n).filter(|&a| poor[a]) {
                for b in (0..n).filter(|&b| poor[b]) {
                    for j in 0..d {
                        options.extend(transfers(&base, a, b, j));
                    }
                }
            }
            options.choose(rng).cloned()
        }
    };
    Ok(case)
}

/// Greedily drop persons and indicators not named by the case while the same
/// violation (same channel) persists.
pub fn shrink(axiom: Axiom, mode: CdfMode, engine: Engine, case: &Case, channel: Channel) -> Result<Case> {
    let keeps = |c: &Case| -> Result<bool> {
        Ok(matches!(check_case(axiom, mode, engine, c)?, Outcome::Violated { channel: ch, .. } if ch == channel))
    };
    let mut best = case.clone();
    loop {
        let mut improved = false;
        for r in (0..best.base.n).rev() {
            if let Some(c) = best.without_row(r) {
                if keeps(&c)? {
                    best = c;
                    improved = true;
                }
            }
        }
        for j in (0..best.base.d).rev() {
            if let Some(c) = best.without_column(j) {
                if keeps(&c)? {
                    best = c;
                    improved = true;
                }
            }
        }
        if !improved {
            return Ok(best);
        }
    }
}

/// Search settings for [`run_lab`] and [`run_cell`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabConfig {
    pub seed: u64,
    /// Random trials per cell (a cell expected to fail stops at its witnesses).
    pub trials: u64,
    pub exhaustive: bool,
    pub shrink: bool,
    pub engine: Engine,
    pub axioms: Vec<Axiom>,
    pub modes: Vec<CdfMode>,
    pub identifications: Vec<Identification>,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_611,
            trials: 10_000,
            exhaustive: true,
            shrink: true,
            engine: Engine::Standard,
            axioms: Axiom::ALL.to_vec(),
            modes: CdfMode::ALL.to_vec(),
            identifications: Identification::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellReport {
    pub axiom: Axiom,
    pub mode: CdfMode,
    pub identification: Identification,
    pub expected: Verdict,
    /// `None` when a failure was expected but no witness turned up.
    pub observed: Option<Verdict>,
    pub exhaustive_cases: u64,
    pub random_trials: u64,
    /// Cases that met the axiom's preconditions.
    pub applicable: u64,
    /// Equality cases of the inequality axioms.
    pub boundary: u64,
    pub violations: u64,
    pub channels: Vec<Channel>,
    /// Channels the theory says must show up but did not.
    pub missing_channels: Vec<Channel>,
    pub witnesses: Vec<Witness>,
}

impl CellReport {
    pub fn matches(&self) -> bool {
        self.observed == Some(self.expected)
    }

    pub fn conclusive(&self) -> bool {
        self.observed.is_some() && self.missing_channels.is_empty()
    }
}

fn required_channels(axiom: Axiom, mode: CdfMode) -> Vec<Channel> {
    match (axiom, mode) {
        (Axiom::AggregateMonotonicity | Axiom::DimensionalMonotonicity, CdfMode::InSample) => {
            vec![Channel::DenominatorEffect, Channel::PeerRedistribution]
        }
        _ => Vec::new(),
    }
}

fn cell_seed(seed: u64, axiom: Axiom, mode: CdfMode, rule: Identification) -> u64 {
    let tag = (axiom as u64) << 8 | (mode as u64) << 4 | rule as u64;
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Tally<'a> {
    axiom: Axiom,
    mode: CdfMode,
    rule: Identification,
    cfg: &'a LabConfig,
    expected: Verdict,
    required: Vec<Channel>,
    applicable: u64,
    boundary: u64,
    violations: u64,
    channels: Vec<Channel>,
    witnesses: Vec<Witness>,
}

impl Tally<'_> {
    fn record(&mut self, case: &Case, outcome: Outcome) -> Result<()> {
        match outcome {
            Outcome::NotApplicable => {}
            Outcome::Satisfied => self.applicable += 1,
            Outcome::Boundary => {
                self.applicable += 1;
                self.boundary += 1;
            }
            Outcome::Violated { channel, .. } => {
                self.applicable += 1;
                self.violations += 1;
                let new_channel = !self.channels.contains(&channel);
                if new_channel {
                    self.channels.push(channel);
                    self.channels.sort();
                }
                let keep = match self.expected {
                    Verdict::Fails => new_channel,
                    Verdict::Holds => self.witnesses.len() < MAX_COUNTEREXAMPLES,
                };
                if keep {
                    let small = if self.cfg.shrink {
                        shrink(self.axiom, self.mode, self.cfg.engine, case, channel)?
                    } else {
                        case.clone()
                    };
                    if let Outcome::Violated { delta, channel, detail } =
                        check_case(self.axiom, self.mode, self.cfg.engine, &small)?
                    {
                        self.witnesses.push(Witness {
                            axiom: self.axiom,
                            mode: self.mode,
                            identification: self.rule,
                            case: small,
                            delta,
                            channel,
                            detail,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn done(&self) -> bool {
        self.expected == Verdict::Fails && self.violations > 0 && self.required.iter().all(|c| self.channels.contains(c))
    }

    fn run_exhaustive(&mut self) -> Result<u64> {
        let mut count = 0;
        let (axiom, rule) = (self.axiom, self.rule);
        let (mode, engine) = (self.mode, self.cfg.engine);
        exhaustive_bases(rule, exhaustive_max_n(axiom), &mut |base| {
            if self.done() {
                return Ok(());
            }
            exhaustive_cases(axiom, &base, &mut |case| {
                count += 1;
                let outcome = check_case(axiom, mode, engine, &case)?;
                self.record(&case, outcome)
            })
        })?;
        Ok(count)
    }
}

/// Check one (axiom, mode, identification) cell.
pub fn run_cell(axiom: Axiom, mode: CdfMode, rule: Identification, cfg: &LabConfig) -> Result<CellReport> {
    let expected = expected_verdict(axiom, mode, rule);
    let mut tally = Tally {
        axiom,
        mode,
        rule,
        cfg,
        expected,
        required: required_channels(axiom, mode),
        applicable: 0,
        boundary: 0,
        violations: 0,
        channels: Vec::new(),
        witnesses: Vec::new(),
    };
    let mut exhaustive_cases = 0;
    if cfg.exhaustive && expected == Verdict::Holds {
        exhaustive_cases += tally.run_exhaustive()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(cfg.seed, axiom, mode, rule));
    let mut random_trials = 0;
    while random_trials < cfg.trials && !tally.done() {
        random_trials += 1;
        if let Some(case) = random_case(axiom, rule, &mut rng)? {
            let outcome = check_case(axiom, mode, cfg.engine, &case)?;
            tally.record(&case, outcome)?;
        }
    }
    if cfg.exhaustive && expected == Verdict::Fails && !tally.done() {
        exhaustive_cases += tally.run_exhaustive()?;
    }
    let observed = if tally.violations > 0 {
        Some(Verdict::Fails)
    } else if expected == Verdict::Holds {
        Some(Verdict::Holds)
    } else {
        None
    };
    let missing_channels = if observed == Some(Verdict::Fails) {
        tally.required.iter().filter(|c| !tally.channels.contains(c)).copied().collect()
    } else {
        Vec::new()
    };
    Ok(CellReport {
        axiom,
        mode,
        identification: rule,
        expected,
        observed,
        exhaustive_cases,
        random_trials,
        applicable: tally.applicable,
        boundary: tally.boundary,
        violations: tally.violations,
        channels: tally.channels,
        missing_channels,
        witnesses: tally.witnesses,
    })
}

/// First violation found by random search within `budget` trials, shrunk.
pub fn find_witness(
    axiom: Axiom,
    mode: CdfMode,
    rule: Identification,
    engine: Engine,
    seed: u64,
    budget: u64,
) -> Result<Option<Witness>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..budget {
        let Some(case) = random_case(axiom, rule, &mut rng)? else {
            continue;
        };
        if let Outcome::Violated { channel, .. } = check_case(axiom, mode, engine, &case)? {
            let small = shrink(axiom, mode, engine, &case, channel)?;
            if let Outcome::Violated { delta, channel, detail } = check_case(axiom, mode, engine, &small)? {
                return Ok(Some(Witness {
                    axiom,
                    mode,
                    identification: rule,
                    case: small,
                    delta,
                    channel,
                    detail,
                }));
            }
        }
    }
    Ok(None)
}

/// Exhaustive weak-transfer search on one indicator: every multiset of at
/// most `max_n` persons on scales up to `max_scale`, every cutoff and every
/// progressive transfer. Returns the first violation (smallest instances first).
pub fn exhaustive_weak_transfer(mode: CdfMode, engine: Engine, max_n: usize, max_scale: usize) -> Result<Option<Witness>> {
    let mut found: Option<Witness> = None;
    'outer: for n in 2..=max_n {
        for scale in 2..=max_scale {
            for z in 1..scale {
                let mut cases = Vec::new();
                multisets(scale, n, &mut |rows| {
                    let values = rows.iter().map(|&v| v as f64).collect();
                    let base = Instance::new(n, 1, values, vec![1.0; n], vec![scale], vec![z], &[1.0], Identification::Union, 1.0)?;
                    for a in 0..n {
                        for b in 0..n {
                            cases.extend(transfers(&base, a, b, 0));
                        }
                    }
                    Ok(())
                })?;
                for case in cases {
                    if let Outcome::Violated { delta, channel, detail } =
                        check_case(Axiom::WeakTransfer, mode, engine, &case)?
                    {
                        found = Some(Witness {
                            axiom: Axiom::WeakTransfer,
                            mode,
                            identification: Identification::Union,
                            case,
                            delta,
                            channel,
                            detail,
                        });
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(found)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridRow {
    pub property: String,
    pub anchored: Option<Mark>,
    pub in_sample: Option<Mark>,
    pub expected_anchored: Option<Mark>,
    pub expected_in_sample: Option<Mark>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabReport {
    pub config: LabConfig,
    pub cells: Vec<CellReport>,
    pub grid: Vec<GridRow>,
}

impl LabReport {
    /// Cells whose verdict contradicts the theory.
    pub fn mismatches(&self) -> Vec<&CellReport> {
        self.cells.iter().filter(|c| c.observed.is_some_and(|v| v != c.expected)).collect()
    }

    pub fn inconclusive(&self) -> Vec<&CellReport> {
        self.cells.iter().filter(|c| !c.conclusive()).collect()
    }

    pub fn matches_expected(&self) -> bool {
        self.cells.iter().all(|c| c.matches() && c.conclusive())
    }
}

fn grid(cells: &[CellReport]) -> Vec<GridRow> {
    let mark = |axioms: &[Axiom], mode: CdfMode, expected: bool| -> Option<Mark> {
        let selected: Vec<&CellReport> = cells.iter().filter(|c| c.mode == mode && axioms.contains(&c.axiom)).collect();
        if expected {
            return Mark::combine(selected.iter().map(|c| c.expected));
        }
        let observed: Option<Vec<Verdict>> = selected.iter().map(|c| c.observed).collect();
        Mark::combine(observed?)
    };
    GRID_ROWS
        .iter()
        .map(|(name, axioms)| GridRow {
            property: name.to_string(),
            anchored: mark(axioms, CdfMode::Anchored, false),
            in_sample: mark(axioms, CdfMode::InSample, false),
            expected_anchored: mark(axioms, CdfMode::Anchored, true),
            expected_in_sample: mark(axioms, CdfMode::InSample, true),
        })
        .collect()
}

/// Run every selected cell (in parallel when enabled) and summarize the grid.
pub fn run_lab(cfg: &LabConfig) -> Result<LabReport> {
    let mut jobs = Vec::new();
    for &axiom in &cfg.axioms {
        for &mode in &cfg.modes {
            for &rule in &cfg.identifications {
                jobs.push((axiom, mode, rule));
            }
        }
    }
    let cells = crate::par::map_tasks(jobs.len(), |t| {
        let (axiom, mode, rule) = jobs[t];
        run_cell(axiom, mode, rule, cfg)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(LabReport {
        config: cfg.clone(),
        grid: grid(&cells),
        cells,
    })
}
