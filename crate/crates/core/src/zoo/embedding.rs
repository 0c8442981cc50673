//! Two copies of `[0,1]`: from the first, the next state is the action itself
//! placed in the second; from the second, the process is absorbed.

use std::sync::Arc;

use num_rational::BigRational;

use crate::error::Result;
use crate::mdp::{
    ActionSelector, Condition, ConditionTag, KernelRule, MdpModel, SegmentPolicy, StageKernel, StateRegion, Strategy,
    StrategyFamily, Transition, TransitionKernel,
};
use crate::measure::{
    ActionFactor, ActionMeasure, AffineEmbedding, Density, FunctionClass, FunctionDomain, PiecewisePolynomial,
    Polynomial, StateFactor, Term,
};
use crate::number::{rat, rat_int, Number};
use crate::occupation::Solver;
use crate::spaces::{ActionSpace, Atom, Segment, StatePoint, StateSpace};

use super::{
    function, one, poly, standard_batteries, state_only, zero, Dataset, Expected, Quantity, SequenceSpec, ZooEntry,
};

const CEMETERY: &str = "cemetery";

pub(super) fn model() -> Result<MdpModel> {
    let states = StateSpace::new(
        vec![Atom::isolated(CEMETERY)],
        vec![],
        vec![Segment::new("0", rat_int(0), rat_int(1)), Segment::new("1", rat_int(0), rat_int(1))],
        CEMETERY,
    )?;
    Ok(MdpModel {
        name: "example1".into(),
        states,
        actions: ActionSpace::interval(rat_int(0), rat_int(1))?,
        kernel: TransitionKernel::new(vec![
            KernelRule::ActionPushforward {
                from: StateRegion::Segment { label: "0".into() },
                map: AffineEmbedding::identity_into("1"),
            },
            KernelRule::ActionPushforward {
                from: StateRegion::Segment { label: "1".into() },
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
            condition: Condition::W,
            note: "the next state depends continuously on the action".into(),
        }],
    })
}

/// Default action distribution from the second stage on.
pub fn default_mu() -> ActionMeasure {
    ActionMeasure::from_density(Density::uniform(rat_int(0), rat_int(1)).expect("unit interval"))
}

/// First action uniform on `[0, 1/m]` at the initial segment, then `mu`.
pub fn pi_m(m: u64, mu: ActionMeasure) -> Result<Strategy> {
    let first = ActionMeasure::from_density(Density::uniform(rat_int(0), BigRational::new(1.into(), m.into()))?);
    two_stage(format!("pi^{m}"), first, mu)
}

/// First action `0` at the initial segment, then `mu`.
pub fn pi_inf(mu: ActionMeasure) -> Result<Strategy> {
    two_stage("pi^inf".into(), ActionMeasure::at(rat_int(0)), mu)
}

fn two_stage(name: String, first: ActionMeasure, mu: ActionMeasure) -> Result<Strategy> {
    let stage1 = StageKernel::uniform(mu.clone()).with_segment("0", SegmentPolicy::constant(first));
    let stage2 = StageKernel::uniform(mu);
    Strategy::markov_sequence(name, vec![stage1, stage2], true)
}

fn positive_part() -> StateFactor {
    let ind = PiecewisePolynomial::indicator_above(rat_int(0), rat_int(0), rat_int(1)).expect("valid indicator");
    StateFactor::on_segments([("0", ind.clone()), ("1", ind)])
}

pub(super) fn entry() -> Result<ZooEntry> {
    let model = model()?;
    let x = || StateFactor::coordinate(Polynomial::identity());
    let a = || ActionFactor::interval(PiecewisePolynomial::global(Polynomial::identity()));
    let cont = FunctionClass::Continuous;
    let sa = FunctionDomain::StateAction;
    let w = vec![
        function("x", cont, sa, 1.0, vec![Term::new(one(), x(), ActionFactor::one())]),
        function("a", cont, sa, 1.0, vec![Term::new(one(), StateFactor::one(), a())]),
        function(
            "x+a",
            cont,
            sa,
            2.0,
            vec![Term::new(one(), x(), ActionFactor::one()), Term::new(one(), StateFactor::one(), a())],
        ),
        function("x*a", cont, sa, 1.0, vec![Term::new(one(), x(), a())]),
        function(
            "a^2",
            cont,
            sa,
            1.0,
            vec![Term::new(
                one(),
                StateFactor::one(),
                ActionFactor::interval(PiecewisePolynomial::global(poly(&[0, 0, 1]))),
            )],
        ),
        function(
            "n",
            cont,
            sa,
            1.0,
            vec![Term::new(
                one(),
                StateFactor::on_segments([
                    ("0", PiecewisePolynomial::constant(zero())),
                    ("1", PiecewisePolynomial::constant(one())),
                ]),
                ActionFactor::one(),
            )],
        ),
    ];
    let ws_extra = vec![
        state_only("I{x>0}", FunctionClass::Caratheodory, 1.0, positive_part()),
        function("I{x>0}*a", FunctionClass::Caratheodory, sa, 1.0, vec![Term::new(one(), positive_part(), a())]),
    ];
    let s = vec![state_only("I{x>0}", FunctionClass::Measurable, 1.0, positive_part())];
    let batteries = standard_batteries(&model, w, ws_extra, s)?;

    let mu = default_mu();
    let generator_mu = mu.clone();
    let family = StrategyFamily::indexed("pi^m", 1..=20, Arc::new(move |m| pi_m(m, generator_mu.clone())));
    let pi_inf = pi_inf(mu)?;

    let integral = |s: &str, f: &str| Quantity::Integral { strategy: s.into(), function: f.into() };
    let mut expected = Vec::new();
    for m in [1u64, 2, 7, 20] {
        expected.push(Expected::new(
            format!("integral of I{{x>0}} under pi^{m}"),
            integral(&format!("pi^{m}"), "I{x>0}"),
            Number::one(),
            "the second state is the first action, which is positive almost surely",
        ));
        expected.push(Expected::new(
            format!("integral of x+a under pi^{m}"),
            integral(&format!("pi^{m}"), "x+a"),
            Number::Exact(rat(1, m as i64) + rat(1, 2)),
            "mean first action plus mean second state plus mean of mu",
        ));
    }
    expected.push(Expected::new(
        "integral of I{x>0} under pi^inf",
        integral("pi^inf", "I{x>0}"),
        Number::zero(),
        "both visited states have coordinate zero",
    ));
    expected.push(Expected::new(
        "integral of x+a under pi^inf",
        integral("pi^inf", "x+a"),
        Number::ratio(1, 2),
        "only the second action contributes",
    ));
    for s in ["pi^1", "pi^inf"] {
        expected.push(Expected::new(
            format!("expected absorption time under {s}"),
            Quantity::ExpectedTime { strategy: s.into() },
            Number::int(2),
            "the cemetery is reached in exactly two steps",
        ));
    }

    Ok(ZooEntry {
        name: "example1".into(),
        summary: "action embedded as the next state; w-convergent occupation measures that diverge in ws".into(),
        model,
        x0: StatePoint::point("0", rat_int(0)),
        solver: Solver::Unroll { horizon: 3 },
        strategies: vec![pi_inf],
        families: vec![family],
        batteries,
        datasets: vec![Dataset {
            name: "pi^m -> pi^inf".into(),
            spec: SequenceSpec::Family {
                family: "pi^m".into(),
                indices: (0..=47).map(|k| 1u64 << k).collect(),
                limit: "pi^inf".into(),
            },
            tol: crate::topology::DEFAULT_CONVERGENCE_TOL,
        }],
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{check_condition_s, ConditionS};

    #[test]
    fn first_stage_of_limit_is_dirac_at_zero() {
        let s = pi_inf(default_mu()).unwrap();
        let p = s.stage(1).unwrap().on_segment("0").unwrap();
        assert_eq!(p.at(&rat_int(0)).unwrap(), &ActionMeasure::at(rat_int(0)));
    }

    #[test]
    fn kernel_is_not_setwise_continuous() {
        assert!(matches!(check_condition_s(&model().unwrap()).unwrap(), ConditionS::Fails(_)));
    }
}
