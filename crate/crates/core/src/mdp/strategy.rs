use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::sync::Arc;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::MdpModel;
use crate::error::{Error, Result};
use crate::measure::{ActionAtom, ActionMeasure};
use crate::number::{rational_str, Number};
use crate::spaces::ActionSpace;

/// Action distribution on a segment, constant on each cell
/// `[breaks[i], breaks[i+1])` (the last cell closed). Empty `breaks` means
/// one distribution on the whole segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentPolicy {
    #[serde(default, skip_serializing_if = "Vec::is_empty", with = "rational_str::vec")]
    breaks: Vec<BigRational>,
    measures: Vec<ActionMeasure>,
}

impl SegmentPolicy {
    pub fn constant(nu: ActionMeasure) -> Self {
        SegmentPolicy { breaks: vec![], measures: vec![nu] }
    }

    pub fn on_cells(breaks: Vec<BigRational>, measures: Vec<ActionMeasure>) -> Result<Self> {
        if measures.is_empty() || breaks.len() != measures.len() + 1 || breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidStrategy("segment policy needs increasing breaks, one more than cells".into()));
        }
        Ok(SegmentPolicy { breaks, measures })
    }

    pub fn measures(&self) -> &[ActionMeasure] {
        &self.measures
    }

    pub fn at(&self, x: &BigRational) -> Option<&ActionMeasure> {
        if self.breaks.is_empty() {
            return self.measures.first();
        }
        if x < &self.breaks[0] || x > self.breaks.last()? {
            return None;
        }
        let i = self.breaks.partition_point(|b| b <= x).saturating_sub(1).min(self.measures.len() - 1);
        Some(&self.measures[i])
    }

    /// Cells clipped to `[lower, upper]`, as `(l, u, measure)`; `None` if
    /// the cells do not cover the range.
    pub fn cells(
        &self,
        lower: &BigRational,
        upper: &BigRational,
    ) -> Option<Vec<(BigRational, BigRational, &ActionMeasure)>> {
        if self.breaks.is_empty() {
            return Some(vec![(lower.clone(), upper.clone(), &self.measures[0])]);
        }
        if lower < &self.breaks[0] || upper > self.breaks.last()? {
            return None;
        }
        let mut out = Vec::new();
        for (w, nu) in self.breaks.windows(2).zip(&self.measures) {
            let lo = lower.max(&w[0]);
            let hi = upper.min(&w[1]);
            if lo < hi {
                out.push((lo.clone(), hi.clone(), nu));
            }
        }
        Some(out)
    }
}

/// One stage of a Markov strategy: an action distribution for every state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageKernel {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub atoms: BTreeMap<String, ActionMeasure>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub segments: BTreeMap<String, SegmentPolicy>,
    /// Used for states not listed above.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<ActionMeasure>,
}

impl StageKernel {
    pub fn uniform(nu: ActionMeasure) -> Self {
        StageKernel { default: Some(nu), ..Default::default() }
    }

    pub fn with_atom(mut self, name: impl Into<String>, nu: ActionMeasure) -> Self {
        self.atoms.insert(name.into(), nu);
        self
    }

    pub fn with_segment(mut self, label: impl Into<String>, policy: SegmentPolicy) -> Self {
        self.segments.insert(label.into(), policy);
        self
    }

    pub fn at_atom(&self, name: &str) -> Option<&ActionMeasure> {
        self.atoms.get(name).or(self.default.as_ref())
    }

    pub fn on_segment(&self, label: &str) -> Option<SegmentPolicy> {
        self.segments.get(label).cloned().or_else(|| self.default.clone().map(SegmentPolicy::constant))
    }

    fn all_measures(&self) -> impl Iterator<Item = (String, &ActionMeasure)> {
        self.atoms
            .iter()
            .map(|(k, v)| (k.clone(), v))
            .chain(self.segments.iter().flat_map(|(k, p)| p.measures.iter().map(move |m| (format!("segment {k}"), m))))
            .chain(self.default.iter().map(|m| ("default".to_string(), m)))
    }
}

/// Markov randomized strategy `κ_1, …, κ_N`, optionally with `κ_n = κ_N` for
/// all `n > N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub name: String,
    pub stages: Vec<StageKernel>,
    pub stationary_tail: bool,
    /// Bound on the expected remaining time in `Y` from any state, used to
    /// certify truncated computations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation_cap: Option<Number>,
}

impl Strategy {
    pub fn markov_sequence(name: impl Into<String>, stages: Vec<StageKernel>, stationary_tail: bool) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidStrategy("a strategy needs at least one stage".into()));
        }
        let s = Strategy { name: name.into(), stages, stationary_tail, occupation_cap: None };
        for k in &s.stages {
            for (loc, nu) in k.all_measures() {
                let m = nu.mass();
                if m != Number::one() {
                    return Err(Error::InvalidStrategy(format!("action distribution at {loc} has mass {m}")));
                }
            }
        }
        Ok(s)
    }

    /// Deterministic stationary strategy on an atomic model with named
    /// actions. `f` must cover every atom of `Y` except frontier atoms; the
    /// cemetery defaults to the first action.
    pub fn deterministic_stationary(
        model: &MdpModel,
        name: impl Into<String>,
        f: impl Fn(&str) -> Option<String>,
    ) -> Result<Self> {
        let names = model
            .action_names()
            .ok_or_else(|| Error::InvalidStrategy("deterministic stationary strategies need named actions".into()))?;
        let mut stage = StageKernel::default();
        for atom in model.states.atoms() {
            if model.is_frontier(&atom.name) {
                continue;
            }
            let a = match f(&atom.name) {
                Some(a) => a,
                None if atom.name == model.states.cemetery() => names[0].clone(),
                None => return Err(Error::MissingState(atom.name.clone())),
            };
            if !model.actions.contains_name(&a) {
                return Err(Error::UnknownAction(a));
            }
            stage.atoms.insert(atom.name.clone(), ActionMeasure::named(a));
        }
        Strategy::markov_sequence(name, vec![stage], true)
    }

    pub fn with_cap(mut self, cap: Number) -> Self {
        self.occupation_cap = Some(cap);
        self
    }

    pub fn is_stationary(&self) -> bool {
        self.stationary_tail && self.stages.len() == 1
    }

    /// `κ_n` for `n ≥ 1`.
    pub fn stage(&self, n: usize) -> Result<&StageKernel> {
        if n == 0 {
            return Err(Error::InvalidStrategy("stages are numbered from 1".into()));
        }
        match self.stages.get(n - 1) {
            Some(k) => Ok(k),
            None if self.stationary_tail => Ok(self.stages.last().expect("nonempty")),
            None => Err(Error::InvalidStrategy(format!("strategy {:?} is undefined at stage {n}", self.name))),
        }
    }

    /// Check action names and coordinates against the model.
    pub fn validate(&self, model: &MdpModel) -> Result<()> {
        for k in &self.stages {
            for (loc, nu) in k.all_measures() {
                for a in &nu.atoms {
                    match (&a.action, &model.actions) {
                        (ActionAtom::Named(n), _) if !model.actions.contains_name(n) => {
                            return Err(Error::UnknownAction(n.clone()))
                        }
                        (ActionAtom::At(x), ActionSpace::Interval { lower, upper }) if x < lower || x > upper => {
                            return Err(Error::InvalidStrategy(format!(
                                "action {x} at {loc} is outside the action interval"
                            )))
                        }
                        (ActionAtom::At(_), ActionSpace::Finite { .. }) => {
                            return Err(Error::InvalidStrategy(format!(
                                "coordinate action at {loc} on a finite action space"
                            )))
                        }
                        _ => {}
                    }
                }
                if let Some(d) = &nu.density {
                    match &model.actions {
                        ActionSpace::Interval { lower, upper } if d.lower() >= lower && d.upper() <= upper => {}
                        _ => {
                            return Err(Error::InvalidStrategy(format!(
                                "action density at {loc} leaves the action space"
                            )))
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

pub type StrategyGenerator = Arc<dyn Fn(u64) -> Result<Strategy> + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyMember {
    pub index: Option<u64>,
    pub strategy: Strategy,
}

/// A finite list of strategies, an indexed generator explored on a finite
/// range, or both.
#[derive(Clone)]
pub struct StrategyFamily {
    pub label: String,
    generator: Option<(StrategyGenerator, RangeInclusive<u64>)>,
    explicit: Vec<Strategy>,
}

impl fmt::Debug for StrategyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StrategyFamily")
            .field("label", &self.label)
            .field("range", &self.generator.as_ref().map(|g| g.1.clone()))
            .field("explicit", &self.explicit.iter().map(|s| &s.name).collect::<Vec<_>>())
            .finish()
    }
}

impl StrategyFamily {
    pub fn explicit(label: impl Into<String>, strategies: Vec<Strategy>) -> Self {
        StrategyFamily { label: label.into(), generator: None, explicit: strategies }
    }

    pub fn indexed(label: impl Into<String>, range: RangeInclusive<u64>, generator: StrategyGenerator) -> Self {
        StrategyFamily { label: label.into(), generator: Some((generator, range)), explicit: vec![] }
    }

    pub fn with(mut self, s: Strategy) -> Self {
        self.explicit.push(s);
        self
    }

    pub fn range(&self) -> Option<RangeInclusive<u64>> {
        self.generator.as_ref().map(|g| g.1.clone())
    }

    /// Generate the member with index `i`, also outside the explored range.
    pub fn generate(&self, i: u64) -> Result<Strategy> {
        match &self.generator {
            Some((g, _)) => g(i),
            None => Err(Error::InvalidStrategy(format!("family {:?} has no generator", self.label))),
        }
    }

    /// Indexed members over the explored range, then the explicit ones.
    pub fn members(&self) -> Result<Vec<FamilyMember>> {
        let mut out = Vec::new();
        if let Some((g, range)) = &self.generator {
            for i in range.clone() {
                out.push(FamilyMember { index: Some(i), strategy: g(i)? });
            }
        }
        out.extend(self.explicit.iter().cloned().map(|strategy| FamilyMember { index: None, strategy }));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Density;
    use crate::number::{rat, rat_int};

    #[test]
    fn mass_must_be_one() {
        let half = ActionMeasure::mixture(vec![(ActionAtom::Named("a".into()), Number::ratio(1, 2))], None);
        assert!(Strategy::markov_sequence("bad", vec![StageKernel::uniform(half)], true).is_err());
        let ok = ActionMeasure::from_density(Density::uniform(rat_int(0), rat(1, 3)).unwrap());
        assert!(Strategy::markov_sequence("ok", vec![StageKernel::uniform(ok)], true).is_ok());
        assert!(Strategy::markov_sequence("none", vec![], true).is_err());
    }

    #[test]
    fn stationary_tail_repeats_last_stage() {
        let a = StageKernel::uniform(ActionMeasure::named("a"));
        let b = StageKernel::uniform(ActionMeasure::named("b"));
        let s = Strategy::markov_sequence("s", vec![a.clone(), b.clone()], true).unwrap();
        assert_eq!(s.stage(1).unwrap(), &a);
        assert_eq!(s.stage(7).unwrap(), &b);
        let t = Strategy::markov_sequence("t", vec![a, b], false).unwrap();
        assert!(t.stage(3).is_err());
    }

    #[test]
    fn segment_cells() {
        let p = SegmentPolicy::on_cells(
            vec![rat_int(0), rat(1, 2), rat_int(1)],
            vec![ActionMeasure::named("1"), ActionMeasure::named("0")],
        )
        .unwrap();
        assert_eq!(p.at(&rat(1, 4)), Some(&ActionMeasure::named("1")));
        assert_eq!(p.at(&rat(1, 2)), Some(&ActionMeasure::named("0")));
        assert_eq!(p.at(&rat_int(1)), Some(&ActionMeasure::named("0")));
        let cells = p.cells(&rat(1, 4), &rat(3, 4)).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].0, rat(1, 4));
        assert_eq!(cells[1].1, rat(3, 4));
    }
}
