//! Bellman analysis of the maximal expected time in `Y` and diagnostics for
//! uniform absorption over a family of strategies.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{MdpModel, StrategyFamily};
use crate::number::Number;
use crate::occupation::{occupation, survival_probs, Solver};
use crate::spaces::StatePoint;

pub type ValueGenerator = Arc<dyn Fn(&str) -> Option<Number> + Send + Sync>;

/// Nonnegative function on `X` with `w(Δ) = 0`. Values come from an explicit
/// map first and a closed-form generator second.
#[derive(Clone, Default)]
pub struct ValueFunction {
    values: BTreeMap<String, Number>,
    generator: Option<ValueGenerator>,
}

impl fmt::Debug for ValueFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ValueFunction")
            .field("values", &self.values)
            .field("generator", &self.generator.is_some())
            .finish()
    }
}

impl ValueFunction {
    pub fn from_map(values: BTreeMap<String, Number>) -> Self {
        ValueFunction { values, generator: None }
    }

    pub fn from_generator(generator: ValueGenerator) -> Self {
        ValueFunction { values: BTreeMap::new(), generator: Some(generator) }
    }

    pub fn zero_on<'a>(states: impl IntoIterator<Item = &'a String>) -> Self {
        Self::from_map(states.into_iter().map(|s| (s.clone(), Number::zero())).collect())
    }

    pub fn set(&mut self, state: impl Into<String>, v: Number) {
        self.values.insert(state.into(), v);
    }

    pub fn get(&self, m: &MdpModel, state: &str) -> Option<Number> {
        if state == m.states.cemetery() {
            return Some(Number::zero());
        }
        self.values.get(state).cloned().or_else(|| self.generator.as_ref().and_then(|g| g(state)))
    }

    pub fn values(&self) -> &BTreeMap<String, Number> {
        &self.values
    }

    /// `c·w`, materialized on `support`; other states scale lazily.
    pub fn scaled(&self, m: &MdpModel, support: &[String], c: &Number) -> Result<ValueFunction> {
        let mut values = BTreeMap::new();
        for s in support {
            let v = self.get(m, s).ok_or_else(|| Error::UndefinedValue(s.clone()))?;
            values.insert(s.clone(), &v * c);
        }
        let base = self.clone();
        let c = c.clone();
        let generator: ValueGenerator = Arc::new(move |s: &str| {
            base.values.get(s).cloned().or_else(|| base.generator.as_ref().and_then(|g| g(s))).map(|v| &v * &c)
        });
        Ok(ValueFunction { values, generator: Some(generator) })
    }
}

/// `Σ_y p(y|x,a) w(y)` for every action at `x`, in action order.
pub fn bellman_terms(m: &MdpModel, w: &ValueFunction, x: &str) -> Result<Vec<(String, Number)>> {
    let names = m.action_names().ok_or_else(|| Error::NotAtomic("interval action space".into()))?;
    let mut out = Vec::with_capacity(names.len());
    for a in names {
        let mut acc = Number::zero();
        for t in m.row(x, a)? {
            if t.prob.is_zero() {
                continue;
            }
            let v = w.get(m, &t.to).ok_or_else(|| Error::UndefinedValue(t.to.clone()))?;
            acc = acc + &t.prob * &v;
        }
        out.push((a.clone(), acc));
    }
    Ok(out)
}

/// `w'(x) = 1 + max_a Σ_y p(y|x,a) w(y)` on `support ∩ Y`, `w'(Δ) = 0`.
pub fn bellman_apply(m: &MdpModel, w: &ValueFunction, support: &[String]) -> Result<ValueFunction> {
    if !m.is_atomic() {
        return Err(Error::NotAtomic(format!("model {:?}", m.name)));
    }
    let mut out = BTreeMap::new();
    for x in support {
        if x == m.states.cemetery() {
            out.insert(x.clone(), Number::zero());
            continue;
        }
        let best = bellman_terms(m, w, x)?.into_iter().map(|(_, v)| v).fold(Number::zero(), Number::max);
        out.insert(x.clone(), Number::one() + best);
    }
    Ok(ValueFunction::from_map(out))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueIteration {
    pub iterations: usize,
    /// Iterate number `iterations`, started from zero; values outside the
    /// support stay at zero.
    pub values: BTreeMap<String, Number>,
    /// `w_k − w_{k−1}` at the last iteration.
    pub gaps: BTreeMap<String, Number>,
    /// Whether every iterate dominated its predecessor pointwise.
    pub monotone: bool,
}

/// Value iteration from `w ≡ 0` on `support`, exact.
pub fn value_iterate(m: &MdpModel, support: &[String], iters: usize) -> Result<ValueIteration> {
    let zero: ValueGenerator = Arc::new(|_: &str| Some(Number::zero()));
    let mut w = ValueFunction {
        values: support.iter().map(|s| (s.clone(), Number::zero())).collect(),
        generator: Some(zero.clone()),
    };
    let mut gaps = BTreeMap::new();
    let mut monotone = true;
    for _ in 0..iters {
        let mut next = bellman_apply(m, &w, support)?;
        next.generator = Some(zero.clone());
        gaps.clear();
        for s in support {
            let gap = &next.values[s] - &w.values[s];
            if gap.is_negative() {
                monotone = false;
            }
            gaps.insert(s.clone(), gap);
        }
        w = next;
    }
    Ok(ValueIteration { iterations: iters, values: w.values, gaps, monotone })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Supersolution {
    FixedPoint,
    StrictSupersolution,
    /// First state in support order with `w(x) < (Tw)(x)`.
    Violated {
        state: String,
        value: Number,
        image: Number,
    },
}

/// Compare `w` with `Tw` exactly on `support`.
pub fn verify_supersolution(m: &MdpModel, w: &ValueFunction, support: &[String]) -> Result<Supersolution> {
    let tw = bellman_apply(m, w, support)?;
    let mut strict = false;
    for x in support {
        let v = w.get(m, x).ok_or_else(|| Error::UndefinedValue(x.clone()))?;
        let image = &tw.values[x];
        match v.cmp_value(image) {
            Ordering::Less => return Ok(Supersolution::Violated { state: x.clone(), value: v, image: image.clone() }),
            Ordering::Greater => strict = true,
            Ordering::Equal => {}
        }
    }
    Ok(if strict { Supersolution::StrictSupersolution } else { Supersolution::FixedPoint })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub strategy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<u64>,
    pub expected_time: Number,
    /// Tail sums for `n = 0..=n_max`; the true values exceed these by at
    /// most `tail_bound`.
    pub tails: Vec<Number>,
    pub tail_bound: Number,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub strategy: String,
    pub n: usize,
    pub value: Number,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UniformityVerdict {
    NonUniformWitnessFound,
    Decays,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionReport {
    pub family: String,
    pub x0: StatePoint,
    pub n_max: usize,
    pub epsilon: Number,
    pub rows: Vec<StrategyRow>,
    /// Column-wise maximum of the tail sums.
    pub supremum: Vec<Number>,
    pub verdict: UniformityVerdict,
    /// Best witness at each `n ≥ ⌊n_max/2⌋` whose tail sum reaches `ε`.
    pub witnesses: Vec<Witness>,
}

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Tail sums `E^π[Σ_{t ≥ n} I{τ > t}]` over the explored members of a family.
pub fn uniformity_report(
    m: &MdpModel,
    family: &StrategyFamily,
    x0: &StatePoint,
    n_max: usize,
    epsilon: &Number,
    solver: &Solver,
) -> Result<AbsorptionReport> {
    let mut rows = Vec::new();
    for member in family.members()? {
        let pi = &member.strategy;
        let occ = occupation(m, pi, x0, solver)?;
        let total = occ.total_mass();
        let surv = survival_probs(m, pi, x0, n_max)?;
        let mut tails = Vec::with_capacity(n_max + 1);
        let mut acc = total.clone();
        for p in &surv {
            tails.push(acc.clone());
            acc = acc - p;
        }
        rows.push(StrategyRow {
            strategy: pi.name.clone(),
            index: member.index,
            expected_time: total,
            tails,
            tail_bound: occ.tail_bound.clone(),
        });
    }
    let supremum: Vec<Number> =
        (0..=n_max).map(|n| rows.iter().map(|r| r.tails[n].clone()).fold(Number::zero(), Number::max)).collect();
    let mut witnesses = Vec::new();
    for n in n_max / 2..=n_max {
        let best = rows.iter().max_by(|a, b| a.tails[n].cmp_value(&b.tails[n]));
        if let Some(r) = best {
            if r.tails[n].cmp_value(epsilon) != Ordering::Less {
                witnesses.push(Witness { strategy: r.strategy.clone(), n, value: r.tails[n].clone() });
            }
        }
    }
    let worst_bound = rows.iter().map(|r| r.tail_bound.clone()).fold(Number::zero(), Number::max);
    let verdict = if !witnesses.is_empty() {
        UniformityVerdict::NonUniformWitnessFound
    } else if (&supremum[n_max] + &worst_bound).cmp_value(epsilon) != Ordering::Greater {
        UniformityVerdict::Decays
    } else {
        UniformityVerdict::Inconclusive
    };
    Ok(AbsorptionReport {
        family: family.label.clone(),
        x0: x0.clone(),
        n_max,
        epsilon: epsilon.clone(),
        rows,
        supremum,
        verdict,
        witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{ActionSelector, KernelRule, Strategy, Transition, TransitionKernel};
    use crate::spaces::{ActionSpace, Atom, StateSpace};

    /// `x` may stop or continue to `x` with probability 1/2.
    fn model() -> MdpModel {
        let states = StateSpace::new(vec![Atom::isolated("x"), Atom::isolated("d")], vec![], vec![], "d").unwrap();
        MdpModel {
            name: "coin".into(),
            states,
            actions: ActionSpace::finite(["stop", "go"]).unwrap(),
            kernel: TransitionKernel::new(vec![
                KernelRule::AtomicTable {
                    from: "x".into(),
                    action: ActionSelector::Named("stop".into()),
                    row: vec![Transition { to: "d".into(), prob: Number::one() }],
                },
                KernelRule::AtomicTable {
                    from: "x".into(),
                    action: ActionSelector::Named("go".into()),
                    row: vec![
                        Transition { to: "x".into(), prob: Number::ratio(1, 2) },
                        Transition { to: "d".into(), prob: Number::ratio(1, 2) },
                    ],
                },
                KernelRule::AtomicTable {
                    from: "d".into(),
                    action: ActionSelector::Any,
                    row: vec![Transition { to: "d".into(), prob: Number::one() }],
                },
            ]),
            frontier: vec![],
            conditions: vec![],
        }
    }

    fn support() -> Vec<String> {
        vec!["x".to_string()]
    }

    #[test]
    fn zero_maps_to_one() {
        let m = model();
        let w = bellman_apply(&m, &ValueFunction::zero_on(&support()), &support()).unwrap();
        assert_eq!(w.values()["x"], Number::one());
    }

    #[test]
    fn fixed_point_and_perturbations() {
        let m = model();
        // w(x) = 1 + w(x)/2 gives w(x) = 2.
        let mut w = ValueFunction::default();
        w.set("x", Number::int(2));
        assert_eq!(verify_supersolution(&m, &w, &support()).unwrap(), Supersolution::FixedPoint);
        let doubled = w.scaled(&m, &support(), &Number::int(2)).unwrap();
        assert_eq!(verify_supersolution(&m, &doubled, &support()).unwrap(), Supersolution::StrictSupersolution);
        let halved = w.scaled(&m, &support(), &Number::ratio(1, 2)).unwrap();
        assert!(matches!(
            verify_supersolution(&m, &halved, &support()).unwrap(),
            Supersolution::Violated { ref state, .. } if state == "x"
        ));
    }

    #[test]
    fn value_iteration_is_monotone_and_below_fixed_point() {
        let m = model();
        let vi = value_iterate(&m, &support(), 30).unwrap();
        assert!(vi.monotone);
        assert_eq!(vi.values["x"], Number::int(2) - Number::pow2(-29));
        assert_eq!(vi.gaps["x"], Number::pow2(-29));
    }

    #[test]
    fn single_strategy_decays() {
        let m = model();
        let go = Strategy::deterministic_stationary(&m, "go", |_| Some("go".into())).unwrap();
        let fam = StrategyFamily::explicit("go only", vec![go]);
        let r = uniformity_report(
            &m,
            &fam,
            &StatePoint::atom("x"),
            48,
            &Number::float(DEFAULT_EPSILON),
            &Solver::Countable(Default::default()),
        )
        .unwrap();
        assert_eq!(r.rows[0].expected_time, Number::int(2));
        assert_eq!(r.rows[0].tails[3], Number::pow2(-2));
        assert_eq!(r.verdict, UniformityVerdict::Decays);
        assert_eq!(r.supremum, r.rows[0].tails);
    }
}
