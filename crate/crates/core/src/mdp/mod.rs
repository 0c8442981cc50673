//! Models: spaces, a transition kernel built from three rule kinds, and
//! declared regularity conditions. Strategies live in [`strategy`].

mod strategy;

use std::collections::BTreeSet;
use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

pub use strategy::{FamilyMember, SegmentPolicy, StageKernel, Strategy, StrategyFamily};

use crate::error::{Error, Result};
use crate::measure::{
    pushforward_parts, ActionMeasure, AffineEmbedding, Density, EmbeddingTarget, PiecewisePolynomial, StatePart,
};
use crate::number::{rational_str, Number};
use crate::spaces::{ActionSpace, StateSpace};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionSelector {
    Any,
    Named(String),
}

impl fmt::Display for ActionSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionSelector::Any => write!(f, "*"),
            ActionSelector::Named(n) => write!(f, "{n}"),
        }
    }
}

/// Source region of a rule. `Interval` is `[lower, upper)` on its segment,
/// closed at the right when `upper` is the segment's upper end.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateRegion {
    Atom {
        name: String,
    },
    Segment {
        label: String,
    },
    Interval {
        segment: String,
        #[serde(with = "rational_str")]
        lower: BigRational,
        #[serde(with = "rational_str")]
        upper: BigRational,
    },
}

impl fmt::Display for StateRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateRegion::Atom { name } => write!(f, "{name}"),
            StateRegion::Segment { label } => write!(f, "segment {label}"),
            StateRegion::Interval { segment, lower, upper } => write!(f, "{segment}@[{lower},{upper})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub to: String,
    pub prob: Number,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelRule {
    /// `p(·|from, a)` as an explicit row over atoms.
    AtomicTable { from: String, action: ActionSelector, row: Vec<Transition> },
    /// Next state is the image of the action under an affine embedding.
    ActionPushforward { from: StateRegion, map: AffineEmbedding },
    /// Next state is drawn from a fixed density, whatever the action.
    FixedDiffuse { from: StateRegion, segment: String, density: Density },
}

impl KernelRule {
    fn covers_atom(&self, atom: &str, action: Option<&str>) -> bool {
        match self {
            KernelRule::AtomicTable { from, action: sel, .. } => {
                from == atom
                    && match (sel, action) {
                        (ActionSelector::Any, _) => true,
                        (ActionSelector::Named(n), Some(a)) => n == a,
                        (ActionSelector::Named(_), None) => false,
                    }
            }
            KernelRule::ActionPushforward { from, .. } | KernelRule::FixedDiffuse { from, .. } => {
                matches!(from, StateRegion::Atom { name } if name == atom)
            }
        }
    }

    fn segment_region(&self) -> Option<&StateRegion> {
        match self {
            KernelRule::ActionPushforward { from, .. } | KernelRule::FixedDiffuse { from, .. } => match from {
                StateRegion::Atom { .. } => None,
                r => Some(r),
            },
            KernelRule::AtomicTable { .. } => None,
        }
    }

    /// Next-state distribution from a point of the rule's region under the
    /// action measure `nu`, as weighted state parts.
    pub fn step(&self, nu: &ActionMeasure, space: &StateSpace) -> Result<Vec<(StatePart, Number)>> {
        match self {
            KernelRule::AtomicTable { row, .. } => {
                let mass = nu.mass();
                row.iter()
                    .filter(|t| !t.prob.is_zero())
                    .map(|t| Ok((StatePart::atom(space, &t.to)?, &t.prob * &mass)))
                    .collect()
            }
            KernelRule::ActionPushforward { map, .. } => pushforward_parts(nu, map, space),
            KernelRule::FixedDiffuse { segment, density, .. } => {
                Ok(vec![(StatePart::Density { segment: segment.clone(), density: density.clone() }, nu.mass())])
            }
        }
    }
}

fn region_contains(region: &StateRegion, segment: &str, x: &BigRational, space: &StateSpace) -> bool {
    match region {
        StateRegion::Atom { .. } => false,
        StateRegion::Segment { label } => label == segment,
        StateRegion::Interval { segment: s, lower, upper } => {
            s == segment
                && lower <= x
                && (x < upper || space.segment(s).is_ok_and(|seg| &seg.upper == upper && x == upper))
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransitionKernel {
    pub rules: Vec<KernelRule>,
}

impl TransitionKernel {
    pub fn new(rules: Vec<KernelRule>) -> Self {
        TransitionKernel { rules }
    }

    /// The rule governing `(atom, action)`; named rows win over `Any` rows.
    pub fn rule_for_atom(&self, atom: &str, action: Option<&str>) -> Option<&KernelRule> {
        let mut matches = self.rules.iter().filter(|r| r.covers_atom(atom, action));
        let first = matches.next()?;
        let named = |r: &&KernelRule| matches!(r, KernelRule::AtomicTable { action: ActionSelector::Named(_), .. });
        if named(&first) {
            return Some(first);
        }
        Some(matches.find(named).unwrap_or(first))
    }

    /// The rule governing the segment point `segment@x`.
    pub fn rule_for_point(&self, segment: &str, x: &BigRational, space: &StateSpace) -> Option<&KernelRule> {
        self.rules.iter().find(|r| r.segment_region().is_some_and(|reg| region_contains(reg, segment, x, space)))
    }

    /// Split a density on a segment into pieces, each governed by one rule.
    pub fn split_density<'a>(&'a self, segment: &str, density: &Density) -> Result<Vec<(Density, &'a KernelRule)>> {
        let mut out = Vec::new();
        let mut covered = Number::zero();
        for r in &self.rules {
            match r.segment_region() {
                Some(StateRegion::Segment { label }) if label == segment => {
                    return Ok(vec![(density.clone(), r)]);
                }
                Some(StateRegion::Interval { segment: s, lower, upper }) if s == segment => {
                    if let Some(piece) = density.restrict(lower, upper) {
                        covered = covered + piece.mass();
                        out.push((piece, r));
                    }
                }
                _ => {}
            }
        }
        if covered != density.mass() {
            return Err(Error::InvalidModel(format!("density on segment {segment:?} is not covered by kernel rules")));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    S,
    W,
}

/// A declared regularity condition and where the declaration comes from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionTag {
    pub condition: Condition,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpModel {
    pub name: String,
    pub states: StateSpace,
    pub actions: ActionSpace,
    pub kernel: TransitionKernel,
    /// Atoms whose dynamics are not materialized; reaching one ends a
    /// truncated computation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frontier: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conditions: Vec<ConditionTag>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl MdpModel {
    pub fn is_frontier(&self, atom: &str) -> bool {
        self.frontier.iter().any(|f| f == atom)
    }

    /// Action names, or `None` for an interval action space.
    pub fn action_names(&self) -> Option<&[String]> {
        match &self.actions {
            ActionSpace::Finite { names } => Some(names),
            ActionSpace::Interval { .. } => None,
        }
    }

    /// True when every reachable dynamic is an atomic table over atoms.
    pub fn is_atomic(&self) -> bool {
        self.states.segments().is_empty()
            && self.actions.is_finite()
            && self.kernel.rules.iter().all(|r| matches!(r, KernelRule::AtomicTable { .. }))
    }

    /// `p(to | from, action)` on an atomic model.
    pub fn prob(&self, from: &str, action: &str, to: &str) -> Result<Number> {
        match self.kernel.rule_for_atom(from, Some(action)) {
            Some(KernelRule::AtomicTable { row, .. }) => {
                Ok(Number::sum(row.iter().filter(|t| t.to == to).map(|t| &t.prob)))
            }
            Some(_) => Err(Error::NotAtomic(format!("rule for ({from}, {action}) is not an atomic table"))),
            None => Err(Error::InvalidModel(format!("no rule for ({from}, {action})"))),
        }
    }

    /// The atomic row `p(·|from, action)`.
    pub fn row(&self, from: &str, action: &str) -> Result<&[Transition]> {
        if self.is_frontier(from) {
            return Err(Error::FrontierReached(from.to_string()));
        }
        match self.kernel.rule_for_atom(from, Some(action)) {
            Some(KernelRule::AtomicTable { row, .. }) => Ok(row),
            Some(_) => Err(Error::NotAtomic(format!("rule for ({from}, {action}) is not an atomic table"))),
            None => Err(Error::InvalidModel(format!("no rule for ({from}, {action})"))),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Check every kernel invariant. The result is sorted, so it does not depend
/// on rule order, and it is empty exactly when the model is well formed.
pub fn validate_model(m: &MdpModel) -> Vec<Diagnostic> {
    let mut out = BTreeSet::new();
    let mut diag = |location: String, message: String| {
        out.insert(Diagnostic { location, message });
    };
    let states = &m.states;
    let cemetery = states.cemetery();

    for f in &m.frontier {
        if !states.has_atom(f) {
            diag(format!("frontier {f}"), "unknown atom".into());
        } else if f == cemetery {
            diag(format!("frontier {f}"), "the cemetery cannot be a frontier atom".into());
        }
    }

    for r in &m.kernel.rules {
        match r {
            KernelRule::AtomicTable { from, action, row } => {
                let loc = format!("rule p(·|{from},{action})");
                if !states.has_atom(from) {
                    diag(loc.clone(), format!("unknown source atom {from:?}"));
                }
                if m.is_frontier(from) {
                    diag(loc.clone(), "frontier atoms carry no rules".into());
                }
                if let ActionSelector::Named(a) = action {
                    if !m.actions.contains_name(a) {
                        diag(loc.clone(), format!("unknown action {a:?}"));
                    }
                }
                let mut sum = Number::zero();
                for t in row {
                    if !states.has_atom(&t.to) {
                        diag(loc.clone(), format!("unknown target atom {:?}", t.to));
                    }
                    if t.prob.is_negative() {
                        diag(loc.clone(), format!("negative probability {} to {}", t.prob, t.to));
                    }
                    if !t.prob.is_exact() {
                        diag(loc.clone(), format!("probability to {} is not an exact rational", t.to));
                    }
                    sum = sum + &t.prob;
                }
                if sum != Number::one() {
                    diag(loc, format!("row sum {sum} ≠ 1"));
                }
            }
            KernelRule::ActionPushforward { from, map } => {
                let loc = format!("rule pushforward from {from}");
                check_region(m, from, &loc, &mut diag);
                match &map.target {
                    EmbeddingTarget::Atom(a) => {
                        if !states.has_atom(a) {
                            diag(loc, format!("unknown target atom {a:?}"));
                        }
                    }
                    EmbeddingTarget::Segment(s) => match (states.segment(s), &m.actions) {
                        (Err(_), _) => diag(loc, format!("unknown target segment {s:?}")),
                        (Ok(seg), ActionSpace::Interval { lower, upper }) => {
                            if !seg.contains(&map.apply(lower)) || !seg.contains(&map.apply(upper)) {
                                diag(loc, format!("image of the action interval leaves segment {s:?}"));
                            }
                        }
                        (Ok(seg), ActionSpace::Finite { .. }) => {
                            if !map.scale.is_zero() {
                                diag(loc, "non-constant embedding needs an interval action space".into());
                            } else if !seg.contains(&map.offset) {
                                diag(loc, format!("constant image leaves segment {s:?}"));
                            }
                        }
                    },
                }
            }
            KernelRule::FixedDiffuse { from, segment, density } => {
                let loc = format!("rule diffuse from {from}");
                check_region(m, from, &loc, &mut diag);
                match states.segment(segment) {
                    Err(_) => diag(loc.clone(), format!("unknown target segment {segment:?}")),
                    Ok(seg) => {
                        if density.lower() < &seg.lower || density.upper() > &seg.upper {
                            diag(loc.clone(), format!("density leaves segment {segment:?}"));
                        }
                    }
                }
                let mass = density.mass();
                if mass != Number::one() {
                    diag(loc, format!("density mass {mass} ≠ 1"));
                }
            }
        }
    }

    // Coverage of atoms.
    let selectors: Vec<Option<&str>> = match &m.actions {
        ActionSpace::Finite { names } => names.iter().map(|n| Some(n.as_str())).collect(),
        ActionSpace::Interval { .. } => vec![None],
    };
    for atom in states.atoms() {
        if m.is_frontier(&atom.name) {
            continue;
        }
        for a in &selectors {
            let n = m.kernel.rules.iter().filter(|r| r.covers_atom(&atom.name, *a)).count();
            let loc = match a {
                Some(a) => format!("state-action ({}, {a})", atom.name),
                None => format!("state {}", atom.name),
            };
            match n {
                0 => diag(loc, "no kernel rule applies".into()),
                1 => {}
                k => diag(loc, format!("{k} kernel rules apply")),
            }
        }
    }

    // Coverage of segments.
    for seg in states.segments() {
        let mut whole = 0;
        let mut pieces: Vec<(&BigRational, &BigRational)> = Vec::new();
        for r in &m.kernel.rules {
            match r.segment_region() {
                Some(StateRegion::Segment { label }) if label == &seg.label => whole += 1,
                Some(StateRegion::Interval { segment, lower, upper }) if segment == &seg.label => {
                    pieces.push((lower, upper))
                }
                _ => {}
            }
        }
        let loc = format!("segment {}", seg.label);
        if whole > 1 || (whole == 1 && !pieces.is_empty()) {
            diag(loc, "overlapping kernel rules".into());
            continue;
        }
        if whole == 1 {
            continue;
        }
        pieces.sort();
        let mut at = &seg.lower;
        for (l, u) in &pieces {
            if *l > at {
                diag(loc.clone(), format!("no kernel rule on [{at},{l})"));
            } else if *l < at {
                diag(loc.clone(), format!("kernel rules overlap at {l}"));
            }
            at = u;
        }
        if at != &seg.upper {
            diag(loc, format!("no kernel rule on [{at},{}]", seg.upper));
        }
    }

    // Cemetery self-loop.
    let loops = selectors.iter().all(|a| match m.kernel.rule_for_atom(cemetery, *a) {
        Some(KernelRule::AtomicTable { row, .. }) => {
            Number::sum(row.iter().filter(|t| t.to == cemetery).map(|t| &t.prob)) == Number::one()
        }
        Some(KernelRule::ActionPushforward { map, .. }) => map.target == EmbeddingTarget::Atom(cemetery.to_string()),
        _ => false,
    });
    if !loops {
        diag(format!("cemetery {cemetery}"), "missing self-loop p({Δ}|Δ,a) = 1".into());
    }

    out.into_iter().collect()
}

fn check_region(m: &MdpModel, region: &StateRegion, loc: &str, diag: &mut impl FnMut(String, String)) {
    match region {
        StateRegion::Atom { name } => {
            if !m.states.has_atom(name) {
                diag(loc.to_string(), format!("unknown source atom {name:?}"));
            }
            if m.is_frontier(name) {
                diag(loc.to_string(), "frontier atoms carry no rules".into());
            }
        }
        StateRegion::Segment { label } => {
            if m.states.segment(label).is_err() {
                diag(loc.to_string(), format!("unknown source segment {label:?}"));
            }
        }
        StateRegion::Interval { segment, lower, upper } => match m.states.segment(segment) {
            Err(_) => diag(loc.to_string(), format!("unknown source segment {segment:?}")),
            Ok(seg) => {
                if lower >= upper || lower < &seg.lower || upper > &seg.upper {
                    diag(loc.to_string(), format!("interval [{lower},{upper}) is not a sub-interval of the segment"));
                }
            }
        },
    }
}

/// Witness that `a ↦ ∫ g(y) p(dy|x,a)` is discontinuous for an indicator `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSWitness {
    /// Index of the offending kernel rule.
    pub rule: usize,
    pub segment: String,
    /// `g(y) = I{y > threshold}` on `segment`, zero elsewhere.
    #[serde(with = "rational_str")]
    pub threshold: BigRational,
    /// The action at which the map jumps.
    #[serde(with = "rational_str")]
    pub jump_at: BigRational,
    /// `∫ g dp` just below and just above `jump_at`.
    pub below: Number,
    pub above: Number,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum ConditionS {
    HoldsTrivially,
    Holds,
    Fails(Box<ConditionSWitness>),
    Unknown,
}

/// Setwise continuity of the kernel in the action.
pub fn check_condition_s(m: &MdpModel) -> Result<ConditionS> {
    let (lo, hi) = match &m.actions {
        ActionSpace::Finite { .. } => return Ok(ConditionS::HoldsTrivially),
        ActionSpace::Interval { lower, upper } => (lower, upper),
    };
    let mut action_free = true;
    for (i, r) in m.kernel.rules.iter().enumerate() {
        match r {
            KernelRule::ActionPushforward { map, .. } if !map.is_constant() => {
                let EmbeddingTarget::Segment(label) = &map.target else { continue };
                let two = BigRational::from_integer(2.into());
                let mid = (lo + hi) / &two;
                let threshold = map.apply(&mid);
                let g = PiecewisePolynomial::indicator_above(
                    threshold.clone(),
                    m.states.segment(label)?.lower.clone(),
                    m.states.segment(label)?.upper.clone(),
                )?;
                let eps = (hi - lo) / BigRational::from_integer(1024.into());
                let side = |a: BigRational| -> Result<Number> {
                    let mut acc = Number::zero();
                    for (part, w) in r.step(&ActionMeasure::at(a), &m.states)? {
                        if let StatePart::Point { at, .. } = part {
                            acc = acc + w * Number::Exact(g.eval(&at).unwrap_or_else(BigRational::zero));
                        }
                    }
                    Ok(acc)
                };
                let (below, above) = if map.scale.is_positive() {
                    (side(&mid - &eps)?, side(&mid + &eps)?)
                } else {
                    (side(&mid + &eps)?, side(&mid - &eps)?)
                };
                if below != above {
                    return Ok(ConditionS::Fails(Box::new(ConditionSWitness {
                        rule: i,
                        segment: label.clone(),
                        threshold,
                        jump_at: mid,
                        below,
                        above,
                    })));
                }
                action_free = false;
            }
            KernelRule::AtomicTable { action: ActionSelector::Named(_), .. } => action_free = false,
            _ => {}
        }
    }
    Ok(if action_free { ConditionS::Holds } else { ConditionS::Unknown })
}
