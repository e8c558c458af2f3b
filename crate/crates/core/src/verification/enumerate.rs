use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::interval::{check_box, interval_forward, violates, BoxVerdict, IntervalBox, OutputProperty};
use super::VerificationError;
use crate::policy::PolicyNetwork;
use crate::rng::box_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnumerationConfig {
    /// Terminal box width as a fraction of the root width per dimension.
    pub min_width: f64,
    pub max_leaves: usize,
    /// Draws per unsafe leaf for the violation-rate estimate.
    pub mc_samples: usize,
    /// Points tried by `check_box` before a box is called `Unknown`.
    pub check_samples: usize,
    pub seed: u64,
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        Self { min_width: 1.0 / 64.0, max_leaves: 200_000, mc_samples: 1000, check_samples: 16, seed: 0 }
    }
}

impl EnumerationConfig {
    pub fn validate(&self) -> Result<(), VerificationError> {
        if !(self.min_width > 0.0 && self.min_width <= 1.0) {
            return Err(VerificationError::InvalidConfig(format!("min_width {} not in (0, 1]", self.min_width)));
        }
        if self.max_leaves == 0 {
            return Err(VerificationError::InvalidConfig("max_leaves must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnsafeLeaf {
    #[serde(rename = "box")]
    pub bx: IntervalBox,
    pub violation_rate: f64,
    pub counterexample: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationStats {
    pub splits: u64,
    /// Boxes certified safe by interval bounds.
    pub certificates: u64,
    /// Boxes certified to violate the property everywhere.
    pub refutations: u64,
    /// Network evaluations spent on sampling.
    pub samples: u64,
}

impl EnumerationStats {
    fn add(&mut self, o: &EnumerationStats) {
        self.splits += o.splits;
        self.certificates += o.certificates;
        self.refutations += o.refutations;
        self.samples += o.samples;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    pub root: IntervalBox,
    pub property: OutputProperty,
    pub safe_leaves: Vec<IntervalBox>,
    pub unsafe_leaves: Vec<UnsafeLeaf>,
    pub stats: EnumerationStats,
    /// False when the leaf budget ran out; unexplored boxes are then
    /// reported as unsafe leaves.
    pub complete: bool,
}

fn lex_cmp(a: &IntervalBox, b: &IntervalBox) -> Ordering {
    for (x, y) in a.lo.iter().zip(&b.lo).chain(a.hi.iter().zip(&b.hi)) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Widest dimension after normalizing by the root width, and that width.
fn widest(bx: &IntervalBox, root: &IntervalBox) -> (usize, f64) {
    let mut best = (0, 0.0);
    for i in 0..bx.dim() {
        let rw = root.width(i);
        if rw > 0.0 {
            let w = bx.width(i) / rw;
            if w > best.1 {
                best = (i, w);
            }
        }
    }
    best
}

enum Step {
    Safe,
    Unsafe(UnsafeLeaf),
    Split(IntervalBox, IntervalBox),
}

struct Ctx<'a> {
    net: &'a PolicyNetwork,
    root: &'a IntervalBox,
    prop: &'a OutputProperty,
    cfg: &'a EnumerationConfig,
}

impl Ctx<'_> {
    fn violation_rate(&self, bx: &IntervalBox, stats: &mut EnumerationStats) -> Result<f64, VerificationError> {
        if self.cfg.mc_samples == 0 {
            return Ok(1.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(box_seed(self.cfg.seed ^ 0x5eed, &bx.lo, &bx.hi));
        let mut bad = 0usize;
        for _ in 0..self.cfg.mc_samples {
            if violates(self.net, self.prop, &bx.sample(&mut rng))? {
                bad += 1;
            }
        }
        stats.samples += self.cfg.mc_samples as u64;
        Ok(bad as f64 / self.cfg.mc_samples as f64)
    }

    fn terminal_unsafe(&self, bx: IntervalBox, stats: &mut EnumerationStats) -> Result<UnsafeLeaf, VerificationError> {
        let mut rng = ChaCha8Rng::seed_from_u64(box_seed(self.cfg.seed, &bx.lo, &bx.hi));
        let verdict = check_box(self.net, &bx, self.prop, self.cfg.check_samples.max(1), &mut rng)?;
        stats.samples += self.cfg.check_samples.max(1) as u64;
        let counterexample = match verdict {
            BoxVerdict::CounterexampleFound(x) => Some(x),
            _ => None,
        };
        let violation_rate = self.violation_rate(&bx, stats)?;
        Ok(UnsafeLeaf { bx, violation_rate, counterexample })
    }

    fn step(&self, bx: IntervalBox, stats: &mut EnumerationStats) -> Result<Step, VerificationError> {
        let out = interval_forward(self.net, &bx)?;
        if self.prop.certified_by(&out) {
            stats.certificates += 1;
            return Ok(Step::Safe);
        }
        if self.prop.refuted_by(&out) {
            stats.refutations += 1;
            let counterexample = Some(bx.midpoint());
            return Ok(Step::Unsafe(UnsafeLeaf { bx, violation_rate: 1.0, counterexample }));
        }
        let (dim, w) = widest(&bx, self.root);
        if w <= self.cfg.min_width * (1.0 + 1e-12) {
            return Ok(Step::Unsafe(self.terminal_unsafe(bx, stats)?));
        }
        stats.splits += 1;
        let (a, b) = bx.split(dim);
        Ok(Step::Split(a, b))
    }
}

struct Partial {
    safe: Vec<IntervalBox>,
    unsafe_: Vec<UnsafeLeaf>,
    stats: EnumerationStats,
    complete: bool,
}

/// Branch-and-bound partition of `root` into certified-safe and unsafe
/// leaves. Boxes that reach `min_width` without a certificate are unsafe.
///
/// The root is first expanded breadth-first into a frontier of at most 64
/// boxes; the subtrees are then explored in parallel. The result does not
/// depend on the thread count: leaves are sorted lexicographically and every
/// random draw is seeded from the box it belongs to.
pub fn enumerate_unsafe(
    net: &PolicyNetwork,
    root: &IntervalBox,
    prop: &OutputProperty,
    cfg: &EnumerationConfig,
) -> Result<EnumerationResult, VerificationError> {
    root.validate()?;
    prop.validate()?;
    cfg.validate()?;
    if root.dim() != net.input_dim {
        return Err(VerificationError::DimensionMismatch { expected: net.input_dim, got: root.dim() });
    }
    let ctx = Ctx { net, root, prop, cfg };
    let mut stats = EnumerationStats::default();
    let mut safe = Vec::new();
    let mut unsafe_ = Vec::new();

    const FRONTIER: usize = 64;
    let mut frontier = vec![root.clone()];
    while !frontier.is_empty() && frontier.len() < FRONTIER {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        let mut split_any = false;
        for bx in frontier {
            let leaf = bx.clone();
            match ctx.step(bx, &mut stats)? {
                Step::Safe => safe.push(leaf),
                Step::Unsafe(u) => unsafe_.push(u),
                Step::Split(a, b) => {
                    split_any = true;
                    next.push(a);
                    next.push(b);
                }
            }
        }
        frontier = next;
        if !split_any {
            break;
        }
    }

    let budget = (cfg.max_leaves / frontier.len().max(1)).max(1);
    let parts: Vec<Result<(Partial, Vec<IntervalBox>), VerificationError>> = frontier
        .into_par_iter()
        .map(|bx| explore(&ctx, bx, budget))
        .collect();
    let mut complete = true;
    for part in parts {
        let (p, s) = part?;
        safe.extend(s);
        unsafe_.extend(p.unsafe_);
        stats.add(&p.stats);
        complete &= p.complete;
    }
    safe.sort_by(lex_cmp);
    unsafe_.sort_by(|a, b| lex_cmp(&a.bx, &b.bx));
    if !complete {
        log::warn!("enumeration hit the leaf budget ({}); result is incomplete", cfg.max_leaves);
    }
    Ok(EnumerationResult { root: root.clone(), property: prop.clone(), safe_leaves: safe, unsafe_leaves: unsafe_, stats, complete })
}

/// Depth-first expansion of one frontier box under a leaf budget. Returns
/// the partial result and its safe leaves.
fn explore(
    ctx: &Ctx<'_>,
    start: IntervalBox,
    budget: usize,
) -> Result<(Partial, Vec<IntervalBox>), VerificationError> {
    let mut p = Partial { safe: vec![], unsafe_: vec![], stats: EnumerationStats::default(), complete: true };
    let mut stack = vec![start];
    while let Some(bx) = stack.pop() {
        if p.safe.len() + p.unsafe_.len() + stack.len() + 1 > budget {
            p.complete = false;
            stack.push(bx);
            for b in std::mem::take(&mut stack) {
                let leaf = ctx.terminal_unsafe(b, &mut p.stats)?;
                p.unsafe_.push(leaf);
            }
            break;
        }
        let leaf = bx.clone();
        match ctx.step(bx, &mut p.stats)? {
            Step::Safe => p.safe.push(leaf),
            Step::Unsafe(u) => p.unsafe_.push(u),
            Step::Split(a, b) => {
                stack.push(b);
                stack.push(a);
            }
        }
    }
    let safe = std::mem::take(&mut p.safe);
    Ok((p, safe))
}

impl EnumerationResult {
    pub fn leaf_count(&self) -> usize {
        self.safe_leaves.len() + self.unsafe_leaves.len()
    }

    /// Fraction of the root measure covered by safe leaves.
    pub fn safe_fraction(&self) -> f64 {
        self.safe_leaves.iter().fold(0.0, |acc, b| acc + b.measure_relative_to(&self.root))
    }

    pub fn safe_leaf_containing(&self, x: &[f64]) -> Option<&IntervalBox> {
        self.safe_leaves.iter().find(|b| b.contains(x))
    }
}
