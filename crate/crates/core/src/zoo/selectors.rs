//! An isolated start state jumps to a uniform point of `[0,1]`, which is
//! absorbed at the next step whatever the action. Deterministic selectors
//! alternating between the two actions on finer and finer dyadic cells.

use std::sync::Arc;

use num_rational::BigRational;

use crate::error::Result;
use crate::mdp::{
    ActionSelector, Condition, ConditionTag, KernelRule, MdpModel, SegmentPolicy, StageKernel, StateRegion, Strategy,
    StrategyFamily, Transition, TransitionKernel,
};
use crate::measure::{
    ActionAtom, ActionFactor, ActionMeasure, AffineEmbedding, Density, FunctionClass, FunctionDomain,
    PiecewisePolynomial, StateFactor, Term, TestFunction,
};
use crate::number::{rat, rat_int, Number};
use crate::occupation::Solver;
use crate::spaces::{Atom, Segment, StatePoint, StateSpace};

use super::{
    finite_actions, function, on_segment_coordinate, one, poly, standard_batteries, state_only, zero, Dataset,
    Expected, Quantity, SequenceSpec, ZooEntry,
};

const CEMETERY: &str = "cemetery";
const START: &str = "x0";
const SEGMENT: &str = "y";
pub const MAX_DEPTH: u64 = 12;

pub(super) fn model() -> Result<MdpModel> {
    let states = StateSpace::new(
        vec![Atom::isolated(START), Atom::isolated(CEMETERY)],
        vec![],
        vec![Segment::new(SEGMENT, rat_int(0), rat_int(1))],
        CEMETERY,
    )?;
    Ok(MdpModel {
        name: "remark1".into(),
        states,
        actions: finite_actions(&["0", "1"]),
        kernel: TransitionKernel::new(vec![
            KernelRule::FixedDiffuse {
                from: StateRegion::Atom { name: START.into() },
                segment: SEGMENT.into(),
                density: Density::uniform(rat_int(0), rat_int(1))?,
            },
            KernelRule::ActionPushforward {
                from: StateRegion::Segment { label: SEGMENT.into() },
                map: AffineEmbedding::onto_atom(CEMETERY),
            },
            KernelRule::AtomicTable {
                from: CEMETERY.into(),
                action: ActionSelector::Any,
                row: vec![Transition { to: CEMETERY.into(), prob: Number::one() }],
            },
        ]),
        frontier: vec![],
        conditions: vec![ConditionTag {
            condition: Condition::S,
            note: "transitions do not depend on the action".into(),
        }],
    })
}

/// `f_k(x) = I{floor(2^k x) even}`; the start state plays action 0.
pub fn selector(k: u64) -> Result<Strategy> {
    let cells = 1u64 << k;
    let breaks: Vec<BigRational> = (0..=cells).map(|j| BigRational::new(j.into(), cells.into())).collect();
    let measures = (0..cells).map(|j| ActionMeasure::named(if j % 2 == 0 { "1" } else { "0" })).collect();
    let stage = StageKernel::uniform(ActionMeasure::named("0"))
        .with_segment(SEGMENT, SegmentPolicy::on_cells(breaks, measures)?);
    Strategy::markov_sequence(format!("f_{k}"), vec![stage], true)
}

/// Both actions with probability 1/2 on the segment.
pub fn randomized() -> Result<Strategy> {
    let half = ActionMeasure::mixture(
        vec![
            (ActionAtom::Named("0".into()), Number::ratio(1, 2)),
            (ActionAtom::Named("1".into()), Number::ratio(1, 2)),
        ],
        None,
    );
    let stage = StageKernel::uniform(ActionMeasure::named("0")).with_segment(SEGMENT, SegmentPolicy::constant(half));
    Strategy::markov_sequence("randomized", vec![stage], true)
}

/// Continuous test functions of `(x, a)` with `a ∈ {0, 1}`, zero at the start
/// state except for the constant.
pub fn continuous_functions() -> Vec<TestFunction> {
    let a = || ActionFactor::named([("1", one())], zero());
    let not_a = || ActionFactor::named([("0", one())], zero());
    let x = |p: &[i64]| on_segment_coordinate(poly(p), zero());
    let cont = FunctionClass::Continuous;
    let sa = FunctionDomain::StateAction;
    vec![
        function("a", cont, sa, 1.0, vec![Term::new(one(), x(&[1]), a())]),
        function("x*a", cont, sa, 1.0, vec![Term::new(one(), x(&[0, 1]), a())]),
        function("x^2*(1-a)", cont, sa, 1.0, vec![Term::new(one(), x(&[0, 0, 1]), not_a())]),
        function("(x-x^2)*a", cont, sa, 1.0, vec![Term::new(one(), x(&[0, 1, -1]), a())]),
        function("1", cont, sa, 1.0, vec![Term::new(one(), StateFactor::one(), ActionFactor::one())]),
    ]
}

pub(super) fn entry() -> Result<ZooEntry> {
    let model = model()?;
    let upper_half = || {
        StateFactor::on_segments([(
            SEGMENT,
            PiecewisePolynomial::indicator_above(rat(1, 2), rat_int(0), rat_int(1)).expect("valid indicator"),
        )])
    };
    let ws_extra = vec![function(
        "I{x>1/2}*a",
        FunctionClass::Caratheodory,
        FunctionDomain::StateAction,
        1.0,
        vec![Term::new(one(), upper_half(), ActionFactor::named([("1", one())], zero()))],
    )];
    let s = vec![state_only("I{x>1/2}", FunctionClass::Measurable, 1.0, upper_half())];
    let batteries = standard_batteries(&model, continuous_functions(), ws_extra, s)?;

    let family = StrategyFamily::indexed("f_k", 1..=MAX_DEPTH, Arc::new(selector));
    let limit = randomized()?;

    let integral = |s: &str, f: &str| Quantity::Integral { strategy: s.into(), function: f.into() };
    let mut expected = Vec::new();
    for k in [1u64, 6, MAX_DEPTH] {
        expected.push(Expected::new(
            format!("determinism defect of f_{k}"),
            Quantity::Defect { strategy: format!("f_{k}") },
            Number::zero(),
            "occupation measure of a deterministic selector",
        ));
        expected.push(Expected::new(
            format!("integral of x*a under f_{k}"),
            integral(&format!("f_{k}"), "x*a"),
            Number::ratio(1, 4) - Number::pow2(-(k as i64) - 2),
            "sum of x over the even dyadic cells of width 2^-k",
        ));
        expected.push(Expected::new(
            format!("integral of a under f_{k}"),
            integral(&format!("f_{k}"), "a"),
            Number::ratio(1, 2),
            "even cells cover half of the segment",
        ));
    }
    expected.push(Expected::new(
        "determinism defect of the randomized limit",
        Quantity::Defect { strategy: "randomized".into() },
        Number::ratio(1, 2),
        "integral over [0,1] of 1 - 1/2",
    ));
    expected.push(Expected::new(
        "integral of x*a under the randomized limit",
        integral("randomized", "x*a"),
        Number::ratio(1, 4),
        "half of the mean of x",
    ));

    Ok(ZooEntry {
        name: "remark1".into(),
        summary: "deterministic selectors whose occupation measures converge weakly to a randomized one".into(),
        model,
        x0: StatePoint::atom(START),
        solver: Solver::Unroll { horizon: 3 },
        strategies: vec![limit],
        families: vec![family],
        batteries,
        datasets: vec![Dataset {
            name: "f_k -> randomized".into(),
            spec: SequenceSpec::Family {
                family: "f_k".into(),
                indices: (1..=MAX_DEPTH).collect(),
                limit: "randomized".into(),
            },
            tol: 1e-3,
        }],
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{check_condition_s, ConditionS};

    #[test]
    fn selector_alternates() {
        let s = selector(2).unwrap();
        let p = s.stage(1).unwrap().on_segment(SEGMENT).unwrap();
        assert_eq!(p.at(&rat(1, 8)).unwrap(), &ActionMeasure::named("1"));
        assert_eq!(p.at(&rat(3, 8)).unwrap(), &ActionMeasure::named("0"));
        assert_eq!(p.at(&rat(5, 8)).unwrap(), &ActionMeasure::named("1"));
    }

    #[test]
    fn condition_s_holds() {
        assert!(!matches!(check_condition_s(&model().unwrap()).unwrap(), ConditionS::Fails(_)));
    }
}
