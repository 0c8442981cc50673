//! Countable ladder `b_n = 1 - 2^{-n}` climbing to the limit point `1`.
//! Action 1 holds at `b_n` with probability `1 - 2^{-(n-2)}`, action 2 climbs
//! with probability 1/2, action 3 climbs or jumps to `1`.

use std::sync::Arc;

use crate::absorption::ValueFunction;
use crate::error::{Error, Result};
use crate::mdp::{
    ActionSelector, Condition, ConditionTag, KernelRule, MdpModel, Strategy, StrategyFamily, Transition,
    TransitionKernel,
};
use crate::measure::{ActionFactor, FunctionClass, FunctionDomain, StateFactor, Term};
use crate::number::{pow2, rat_int, Number};
use crate::occupation::{Solver, Truncation};
use crate::spaces::{Atom, ConvergentSequence, StatePoint, StateSpace, Topology};
use crate::topology::DEFAULT_CONVERGENCE_TOL;

use super::{
    finite_actions, function, one, poly, standard_batteries, state_only, zero, Dataset, Expected, Quantity,
    SequenceSpec, ZooEntry,
};

/// Number of materialized ladder states; `b_{LADDER_DEPTH+1}` is a frontier.
pub const LADDER_DEPTH: usize = 64;

const CEMETERY: &str = "cemetery";
const TOP: &str = "1";

fn b(n: usize) -> String {
    format!("b_{n}")
}

fn rung(name: &str) -> Option<usize> {
    name.strip_prefix("b_")?.parse().ok().filter(|&n| n >= 1)
}

fn to(state: &str, prob: Number) -> Transition {
    Transition { to: state.into(), prob }
}

fn table(from: &str, action: &str, row: Vec<Transition>) -> KernelRule {
    KernelRule::AtomicTable { from: from.into(), action: ActionSelector::Named(action.into()), row }
}

pub(super) fn model() -> Result<MdpModel> {
    let mut atoms = vec![Atom::at(TOP, rat_int(1), Topology::LimitPoint)];
    for n in 1..=LADDER_DEPTH + 1 {
        atoms.push(Atom::at(b(n), rat_int(1) - pow2(-(n as i64)), Topology::Isolated));
    }
    atoms.push(Atom::isolated(CEMETERY));
    let seq = ConvergentSequence { terms: (1..=LADDER_DEPTH + 1).map(b).collect(), limit: TOP.into() };
    let states = StateSpace::new(atoms, vec![seq], vec![], CEMETERY)?;

    let half = Number::ratio(1, 2);
    let quarter = Number::ratio(1, 4);
    let mut rules = Vec::new();
    for s in [CEMETERY, TOP] {
        rules.push(KernelRule::AtomicTable {
            from: s.into(),
            action: ActionSelector::Any,
            row: vec![to(CEMETERY, Number::one())],
        });
    }
    for n in 1..=LADDER_DEPTH {
        let here = b(n);
        let up = b(n + 1);
        let hold = if n == 1 {
            vec![to(CEMETERY, Number::one())]
        } else {
            let leave = Number::pow2(-(n as i64 - 2));
            vec![to(&here, Number::one() - leave.clone()), to(CEMETERY, leave)]
        };
        rules.push(table(&here, "1", hold));
        rules.push(table(&here, "2", vec![to(&up, half.clone()), to(CEMETERY, half.clone())]));
        rules.push(table(
            &here,
            "3",
            vec![to(&up, half.clone()), to(TOP, quarter.clone()), to(CEMETERY, quarter.clone())],
        ));
    }
    Ok(MdpModel {
        name: "example2".into(),
        states,
        actions: finite_actions(&["1", "2", "3"]),
        kernel: TransitionKernel::new(rules),
        frontier: vec![b(LADDER_DEPTH + 1)],
        conditions: vec![ConditionTag { condition: Condition::S, note: "finite action space".into() }],
    })
}

/// Climb with action 2 up to `b_n`, then hold with action 1.
pub fn psi_n(m: &MdpModel, n: u64) -> Result<Strategy> {
    if n < 3 || n as usize >= LADDER_DEPTH {
        return Err(Error::InvalidStrategy(format!("psi^{n} needs 3 <= n < {LADDER_DEPTH}")));
    }
    Strategy::deterministic_stationary(m, format!("psi^{n}"), |s| match (s, rung(s)) {
        (TOP, _) => Some("3".into()),
        (_, Some(k)) if k as u64 <= n => Some("2".into()),
        (_, Some(_)) => Some("1".into()),
        _ => None,
    })
}

/// Action 3 everywhere.
pub fn psi(m: &MdpModel) -> Result<Strategy> {
    Ok(Strategy::deterministic_stationary(m, "psi", |s| (s != CEMETERY).then(|| "3".into()))?
        .with_cap(Number::ratio(5, 2)))
}

/// Occupation mass of `b_m` under `psi^n` from `b_1`.
pub fn psi_n_marginal(n: u64, m: u64) -> Number {
    if m <= n {
        Number::pow2(-(m as i64 - 1))
    } else if m == n + 1 {
        Number::ratio(1, 2)
    } else {
        Number::zero()
    }
}

/// `w(b_n) = 5/2 + 2^{n-2}`, `w(1) = 1`.
pub fn ladder_value(state: &str) -> Option<Number> {
    if state == TOP {
        return Some(Number::one());
    }
    let n = rung(state)?;
    Some(Number::ratio(5, 2) + Number::pow2(n as i64 - 2))
}

pub(super) fn candidate_value_function() -> ValueFunction {
    ValueFunction::from_generator(Arc::new(ladder_value))
}

pub(super) fn entry() -> Result<ZooEntry> {
    let model = model()?;
    let y = |p: &[i64]| StateFactor::coordinate(poly(p));
    let cont = FunctionClass::Continuous;
    let w = vec![
        state_only("y", cont, 1.0, y(&[0, 1])),
        state_only("y^2", cont, 1.0, y(&[0, 0, 1])),
        state_only("1-y", cont, 1.0, y(&[1, -1])),
        state_only("1", cont, 1.0, StateFactor::one()),
        function(
            "y*I{a=3}",
            cont,
            FunctionDomain::StateAction,
            1.0,
            vec![Term::new(one(), y(&[0, 1]), ActionFactor::named([("3", one())], zero()))],
        ),
    ];
    let top = || StateFactor::by_name([(TOP, one())], zero());
    let ws_extra = vec![state_only("I{y=1}", FunctionClass::Caratheodory, 1.0, top())];
    let s = vec![state_only("I{y=1}", FunctionClass::Measurable, 1.0, top())];
    let batteries = standard_batteries(&model, w, ws_extra, s)?;

    let gen_model = model.clone();
    let psi = psi(&model)?;
    let lambda = StrategyFamily::indexed("Lambda", 3..=50, Arc::new(move |n| psi_n(&gen_model, n))).with(psi.clone());

    let mass = |s: &str, a: &str| Quantity::AtomMass { strategy: s.into(), atom: a.into() };
    let mut expected = Vec::new();
    for m in 1..=5u64 {
        expected.push(Expected::new(
            format!("occupation of b_{m} under psi^3"),
            mass("psi^3", &b(m as usize)),
            psi_n_marginal(3, m),
            "climbing with probability 1/2 per step, then holding at the first rung above n",
        ));
    }
    expected.push(Expected::new(
        "occupation of 1 under psi^3",
        mass("psi^3", TOP),
        Number::zero(),
        "action 3 is never used below the limit point",
    ));
    for m in [1u64, 2, 10] {
        expected.push(Expected::new(
            format!("occupation of b_{m} under psi"),
            mass("psi", &b(m as usize)),
            Number::pow2(-(m as i64 - 1)),
            "climbing with probability 1/2 per step",
        ));
    }
    expected.push(Expected::new(
        "occupation of 1 under psi",
        mass("psi", TOP),
        Number::ratio(1, 2),
        "a quarter of the mass at each rung jumps to the limit point",
    ));
    expected.push(Expected::new(
        "expected absorption time under psi",
        Quantity::ExpectedTime { strategy: "psi".into() },
        Number::ratio(5, 2),
        "sum of the occupation masses",
    ));
    for n in [3usize, 10, 20] {
        expected.push(Expected::new(
            format!("tail sum from stage {n} under psi^{n}"),
            Quantity::TailSum { strategy: format!("psi^{n}"), n },
            Number::ratio(1, 2),
            "the holding rung keeps expected remaining time 1/2",
        ));
    }
    for s in ["b_1", "b_5", TOP] {
        expected.push(Expected::new(
            format!("candidate value at {s}"),
            Quantity::CandidateValue { state: s.into() },
            ladder_value(s).expect("ladder state"),
            "closed-form solution of the optimality equation",
        ));
    }

    Ok(ZooEntry {
        name: "example2".into(),
        summary: "countable ladder; marginals converge weakly while tail sums stay at 1/2".into(),
        model,
        x0: StatePoint::atom(b(1)),
        solver: Solver::Countable(Truncation::default()),
        strategies: vec![psi],
        families: vec![lambda],
        batteries,
        datasets: vec![Dataset {
            name: "psi^n -> psi".into(),
            spec: SequenceSpec::Family { family: "Lambda".into(), indices: (3..=50).collect(), limit: "psi".into() },
            tol: DEFAULT_CONVERGENCE_TOL,
        }],
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::absorption::{verify_supersolution, Supersolution};
    use crate::measure::TestFunction;
    use crate::spaces::StateSpace;
    use crate::topology::{check_sequential_continuity, Mode, TestBattery};

    #[test]
    fn kernel_rows() {
        let m = model().unwrap();
        assert_eq!(m.prob("b_1", "1", CEMETERY).unwrap(), Number::one());
        for n in 2..=10 {
            assert_eq!(m.prob(&b(n), "1", &b(n)).unwrap(), Number::one() - Number::pow2(-(n as i64 - 2)));
        }
        assert_eq!(m.prob("b_4", "3", TOP).unwrap(), Number::ratio(1, 4));
    }

    #[test]
    fn candidate_is_a_fixed_point() {
        let m = model().unwrap();
        let support: Vec<String> = (1..=LADDER_DEPTH).map(b).chain([TOP.to_string()]).collect();
        let w = candidate_value_function();
        assert_eq!(verify_supersolution(&m, &w, &support).unwrap(), Supersolution::FixedPoint);
    }

    #[test]
    fn indicator_of_limit_is_not_continuous() {
        let sp: StateSpace = model().unwrap().states;
        let g =
            TestFunction::from_fn("I{y=1}", FunctionClass::Continuous, FunctionDomain::State, 1.0, |s, _| match s {
                crate::measure::StateView::Atom { name, .. } if *name == TOP => 1.0,
                _ => 0.0,
            });
        assert!(check_sequential_continuity(&g, &sp).is_err());
        assert!(TestBattery::new_checked("w", Mode::W, vec![g], &sp).is_err());
    }

    #[test]
    fn closed_form_beyond_explored_range() {
        assert_eq!(psi_n_marginal(100, 101), Number::ratio(1, 2));
        assert_eq!(psi_n_marginal(100, 102), Number::zero());
        assert!(psi_n(&model().unwrap(), 2).is_err());
    }
}
