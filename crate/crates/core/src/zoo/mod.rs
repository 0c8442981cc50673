//! Built-in models with their strategies, test batteries, convergence
//! datasets and tables of expected values.

mod embedding;
mod ladder;
mod one_step;
mod selectors;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{MdpModel, Strategy, StrategyFamily};
use crate::measure::{
    integrate, ActionFactor, FunctionClass, FunctionDomain, HybridMeasure, PiecewisePolynomial, Polynomial,
    StateFactor, Structured, Term, TestFunction, DEFAULT_TOL,
};
use crate::number::Number;
use crate::occupation::{expected_time_by_survival, occupation, tail_sum_from, Solver};
use crate::spaces::{ActionSpace, StatePoint};
use crate::topology::{determinism_defect, Mode, TestBattery};

pub use ladder::{ladder_value, psi_n_marginal, LADDER_DEPTH};

pub const NAMES: [&str; 4] = ["example1", "example2", "remark1", "remark2"];

/// Measures whose convergence is examined.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SequenceSpec {
    /// Occupation measures from `x0` of the indexed members of a family,
    /// against that of the `limit` strategy.
    Family { family: String, indices: Vec<u64>, limit: String },
    /// Occupation measures of one strategy from several initial states.
    InitialStates { strategy: String, starts: Vec<StatePoint>, limit: StatePoint },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dataset {
    pub name: String,
    pub spec: SequenceSpec,
    pub tol: f64,
}

/// How an expected value is recomputed by the engine, starting from `x0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Quantity {
    Integral { strategy: String, function: String },
    AtomMass { strategy: String, atom: String },
    ExpectedTime { strategy: String },
    TailSum { strategy: String, n: usize },
    CandidateValue { state: String },
    Defect { strategy: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Expected {
    pub label: String,
    pub quantity: Quantity,
    pub value: Number,
    pub anchor: String,
}

impl Expected {
    fn new(label: impl Into<String>, quantity: Quantity, value: Number, anchor: impl Into<String>) -> Self {
        Expected { label: label.into(), quantity, value, anchor: anchor.into() }
    }
}

#[derive(Clone, Debug)]
pub struct ZooEntry {
    pub name: String,
    pub summary: String,
    pub model: MdpModel,
    pub x0: StatePoint,
    pub solver: Solver,
    pub strategies: Vec<Strategy>,
    pub families: Vec<StrategyFamily>,
    pub batteries: Vec<TestBattery>,
    pub datasets: Vec<Dataset>,
    pub expected: Vec<Expected>,
}

pub fn all() -> Result<Vec<ZooEntry>> {
    NAMES.iter().map(|n| by_name(n)).collect()
}

pub fn by_name(name: &str) -> Result<ZooEntry> {
    match name {
        "example1" => embedding::entry(),
        "example2" => ladder::entry(),
        "remark1" => selectors::entry(),
        "remark2" => one_step::entry(),
        other => Err(Error::UnknownName(other.to_string())),
    }
}

impl ZooEntry {
    /// A strategy by name, or a family member by name or index.
    pub fn strategy(&self, key: &str) -> Result<Strategy> {
        if let Some(s) = self.strategies.iter().find(|s| s.name == key) {
            return Ok(s.clone());
        }
        if let Ok(i) = key.parse::<u64>() {
            if let Some(f) = self.families.iter().find(|f| f.range().is_some()) {
                return f.generate(i);
            }
        }
        for f in &self.families {
            if let Some(r) = f.range() {
                for i in r {
                    let s = f.generate(i)?;
                    if s.name == key {
                        return Ok(s);
                    }
                }
            }
        }
        Err(Error::UnknownName(format!("strategy {key:?} in {}", self.name)))
    }

    pub fn family(&self, label: &str) -> Result<&StrategyFamily> {
        self.families
            .iter()
            .find(|f| f.label == label)
            .ok_or_else(|| Error::UnknownName(format!("family {label:?} in {}", self.name)))
    }

    pub fn battery(&self, name: &str) -> Result<&TestBattery> {
        self.batteries
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::UnknownName(format!("battery {name:?} in {}", self.name)))
    }

    pub fn battery_for(&self, mode: Mode) -> Option<&TestBattery> {
        self.batteries.iter().find(|b| b.mode == mode)
    }

    pub fn dataset(&self, name: &str) -> Result<&Dataset> {
        self.datasets
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| Error::UnknownName(format!("dataset {name:?} in {}", self.name)))
    }

    pub fn function(&self, name: &str) -> Result<&TestFunction> {
        self.batteries
            .iter()
            .flat_map(|b| b.functions())
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::UnknownName(format!("function {name:?} in {}", self.name)))
    }

    pub fn occupation_of(&self, pi: &Strategy, x0: &StatePoint) -> Result<HybridMeasure> {
        Ok(occupation(&self.model, pi, x0, &self.solver)?.measure)
    }

    /// The labelled measures of a dataset and its limit.
    pub fn dataset_measures(&self, d: &Dataset) -> Result<(Vec<(String, HybridMeasure)>, HybridMeasure)> {
        match &d.spec {
            SequenceSpec::Family { family, indices, limit } => {
                let fam = self.family(family)?;
                let seq = indices
                    .iter()
                    .map(|&i| {
                        let pi = fam.generate(i)?;
                        Ok((pi.name.clone(), self.occupation_of(&pi, &self.x0)?))
                    })
                    .collect::<Result<_>>()?;
                Ok((seq, self.occupation_of(&self.strategy(limit)?, &self.x0)?))
            }
            SequenceSpec::InitialStates { strategy, starts, limit } => {
                let pi = self.strategy(strategy)?;
                let seq =
                    starts.iter().map(|x| Ok((x.to_string(), self.occupation_of(&pi, x)?))).collect::<Result<_>>()?;
                Ok((seq, self.occupation_of(&pi, limit)?))
            }
        }
    }

    /// Recompute a quantity; returns the value and an absolute error bound.
    pub fn evaluate(&self, q: &Quantity) -> Result<(Number, f64)> {
        let m = &self.model;
        match q {
            Quantity::Integral { strategy, function } => {
                let occ = occupation(m, &self.strategy(strategy)?, &self.x0, &self.solver)?;
                let g = self.function(function)?;
                let r = integrate(&occ.measure, g, DEFAULT_TOL)?;
                let err = r.abs_error.to_f64() + occ.tail_bound.to_f64() * g.bound();
                Ok((r.value, err))
            }
            Quantity::AtomMass { strategy, atom } => {
                let occ = occupation(m, &self.strategy(strategy)?, &self.x0, &self.solver)?;
                Ok((occ.measure.mass_on_atom(atom), occ.tail_bound.to_f64()))
            }
            Quantity::ExpectedTime { strategy } => {
                let pi = self.strategy(strategy)?;
                match &self.solver {
                    Solver::Unroll { horizon } => Ok((expected_time_by_survival(m, &pi, &self.x0, *horizon + 1)?, 0.0)),
                    solver => {
                        let occ = occupation(m, &pi, &self.x0, solver)?;
                        Ok((occ.total_mass(), occ.tail_bound.to_f64()))
                    }
                }
            }
            Quantity::TailSum { strategy, n } => {
                let pi = self.strategy(strategy)?;
                let occ = occupation(m, &pi, &self.x0, &self.solver)?;
                let t = tail_sum_from(m, &pi, &self.x0, *n, &occ)?;
                Ok((t.value, t.tail_bound.to_f64()))
            }
            Quantity::CandidateValue { state } => {
                let w = ladder::candidate_value_function();
                let v = w.get(m, state).ok_or_else(|| Error::UndefinedValue(state.clone()))?;
                Ok((v, 0.0))
            }
            Quantity::Defect { strategy } => {
                let mu = self.occupation_of(&self.strategy(strategy)?, &self.x0)?;
                Ok((determinism_defect(&mu, &m.actions)?, 0.0))
            }
        }
    }
}

/// Whether `computed` reproduces `expected`: exact equality when both are
/// exact and no error is admitted, otherwise `|Δ| ≤ err`.
pub fn reproduces(expected: &Number, computed: &Number, err: f64) -> bool {
    if expected.is_exact() && computed.is_exact() && err == 0.0 {
        return expected == computed;
    }
    (expected - computed).abs().to_f64() <= err + computed.error_bound()
}

fn r(p: i64, q: i64) -> BigRational {
    BigRational::new(p.into(), q.into())
}

fn poly(coeffs: &[i64]) -> Polynomial {
    Polynomial(coeffs.iter().map(|&c| r(c, 1)).collect())
}

/// Polynomial in the segment coordinate; `atoms` gives the value at atoms.
fn on_segment_coordinate(p: Polynomial, atoms: BigRational) -> StateFactor {
    let mut f = StateFactor::by_name(Vec::<(String, BigRational)>::new(), atoms);
    f.other_segments = Some(PiecewisePolynomial::global(p));
    f
}

fn one() -> BigRational {
    BigRational::one()
}

fn zero() -> BigRational {
    BigRational::zero()
}

fn function(name: &str, class: FunctionClass, domain: FunctionDomain, bound: f64, terms: Vec<Term>) -> TestFunction {
    TestFunction::from_structured(name, class, domain, bound, Structured::new(terms))
}

fn state_only(name: &str, class: FunctionClass, bound: f64, f: StateFactor) -> TestFunction {
    function(name, class, FunctionDomain::State, bound, vec![Term::new(one(), f, ActionFactor::one())])
}

/// Batteries built from continuous functions and extra witnesses: the
/// ws-battery contains the w-battery, the s-battery holds state witnesses.
fn standard_batteries(
    model: &MdpModel,
    w: Vec<TestFunction>,
    ws_extra: Vec<TestFunction>,
    s: Vec<TestFunction>,
) -> Result<Vec<TestBattery>> {
    let mut ws = w.clone();
    ws.extend(ws_extra);
    let mut out = vec![
        TestBattery::new_checked("W-POLY", Mode::W, w, &model.states)?,
        TestBattery::new("WS-STEP", Mode::Ws, ws)?,
    ];
    if !s.is_empty() {
        out.push(TestBattery::new("S-STEP", Mode::S, s)?);
    }
    Ok(out)
}

fn finite_actions(names: &[&str]) -> ActionSpace {
    ActionSpace::finite(names.iter().copied()).expect("distinct action names")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::validate_model;

    #[test]
    fn models_validate_cleanly() {
        for e in all().unwrap() {
            let d = validate_model(&e.model);
            assert!(d.is_empty(), "{}: {:?}", e.name, d);
            for s in &e.strategies {
                s.validate(&e.model).unwrap();
            }
            for f in &e.families {
                for mem in f.members().unwrap() {
                    mem.strategy.validate(&e.model).unwrap();
                }
            }
        }
    }

    #[test]
    fn expected_tables_reproduce() {
        for e in all().unwrap() {
            assert!(!e.expected.is_empty());
            for x in &e.expected {
                assert!(!x.anchor.is_empty());
                let (v, err) = e.evaluate(&x.quantity).unwrap();
                assert!(
                    reproduces(&x.value, &v, err),
                    "{} / {}: expected {}, got {v} (±{err})",
                    e.name,
                    x.label,
                    x.value
                );
            }
        }
    }

    #[test]
    fn model_json_round_trip() {
        for e in all().unwrap() {
            let text = e.model.to_json().unwrap();
            let back = MdpModel::from_json(&text).unwrap();
            assert_eq!(back, e.model);
            assert_eq!(back.to_json().unwrap(), text);
        }
    }

    #[test]
    fn unknown_names() {
        assert!(matches!(by_name("nope"), Err(Error::UnknownName(_))));
        let e = by_name("remark2").unwrap();
        assert!(e.strategy("nope").is_err());
    }
}
