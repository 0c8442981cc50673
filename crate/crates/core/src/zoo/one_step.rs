//! The points `1/n` and their limit `0`, absorbed after one step under the
//! only action.

use std::collections::BTreeSet;

use num_rational::BigRational;

use crate::error::Result;
use crate::mdp::{
    ActionSelector, Condition, ConditionTag, KernelRule, MdpModel, Strategy, Transition, TransitionKernel,
};
use crate::measure::{FunctionClass, StateFactor};
use crate::number::{rat_int, Number};
use crate::occupation::Solver;
use crate::spaces::{Atom, ConvergentSequence, StatePoint, StateSpace, Topology};
use crate::topology::DEFAULT_CONVERGENCE_TOL;

use super::{
    finite_actions, one, poly, standard_batteries, state_only, zero, Dataset, Expected, Quantity, SequenceSpec,
    ZooEntry,
};

const CEMETERY: &str = "cemetery";
const LIMIT: &str = "0";
pub const ACTION: &str = "a*";
/// Atoms `1/n` for `n ≤ HARMONIC`, plus `1/2^k` for `k ≤ DYADIC`.
const HARMONIC: u64 = 50;
const DYADIC: u32 = 47;

pub fn point(d: u64) -> String {
    format!("1/{d}")
}

pub(super) fn model() -> Result<MdpModel> {
    let denominators: BTreeSet<u64> = (1..=HARMONIC).chain((0..=DYADIC).map(|k| 1u64 << k)).collect();
    let mut atoms = vec![Atom::at(LIMIT, rat_int(0), Topology::LimitPoint)];
    atoms.extend(
        denominators.iter().map(|&d| Atom::at(point(d), BigRational::new(1.into(), d.into()), Topology::Isolated)),
    );
    atoms.push(Atom::isolated(CEMETERY));
    let seq = ConvergentSequence { terms: (0..=DYADIC).map(|k| point(1 << k)).collect(), limit: LIMIT.into() };
    let states = StateSpace::new(atoms, vec![seq], vec![], CEMETERY)?;
    let rules = states
        .atoms()
        .iter()
        .map(|a| KernelRule::AtomicTable {
            from: a.name.clone(),
            action: ActionSelector::Any,
            row: vec![Transition { to: CEMETERY.into(), prob: Number::one() }],
        })
        .collect();
    Ok(MdpModel {
        name: "remark2".into(),
        states,
        actions: finite_actions(&[ACTION]),
        kernel: TransitionKernel::new(rules),
        frontier: vec![],
        conditions: vec![
            ConditionTag { condition: Condition::S, note: "single action".into() },
            ConditionTag { condition: Condition::W, note: "constant kernel".into() },
        ],
    })
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
    ];
    let at_limit = || StateFactor::by_name([(LIMIT, one())], zero());
    let ws_extra = vec![state_only("I{y=0}", FunctionClass::Caratheodory, 1.0, at_limit())];
    let s = vec![state_only("I{y=0}", FunctionClass::Measurable, 1.0, at_limit())];
    let batteries = standard_batteries(&model, w, ws_extra, s)?;
    let only = Strategy::deterministic_stationary(&model, ACTION, |_| Some(ACTION.into()))?;

    let x0 = StatePoint::atom(point(1));
    let expected = vec![
        Expected::new(
            "occupation of the initial state",
            Quantity::AtomMass { strategy: ACTION.into(), atom: point(1) },
            Number::one(),
            "one step before absorption",
        ),
        Expected::new(
            "expected absorption time",
            Quantity::ExpectedTime { strategy: ACTION.into() },
            Number::one(),
            "one step before absorption",
        ),
        Expected::new(
            "integral of I{y=0} from 1/1",
            Quantity::Integral { strategy: ACTION.into(), function: "I{y=0}".into() },
            Number::zero(),
            "the occupation measure sits at the initial state",
        ),
    ];

    Ok(ZooEntry {
        name: "remark2".into(),
        summary: "one-step absorption from 1/n; w-convergence across initial states without ws-convergence".into(),
        model,
        x0,
        solver: Solver::Unroll { horizon: 2 },
        strategies: vec![only],
        families: vec![],
        batteries,
        datasets: vec![Dataset {
            name: "1/2^k -> 0".into(),
            spec: SequenceSpec::InitialStates {
                strategy: ACTION.into(),
                starts: (0..=DYADIC).map(|k| StatePoint::atom(point(1 << k))).collect(),
                limit: StatePoint::atom(LIMIT),
            },
            tol: DEFAULT_CONVERGENCE_TOL,
        }],
        expected,
    })
}
