//! Convergence of occupation-measure sequences against test-function
//! batteries, and the determinism defect of a state-action measure.
//!
//! A battery only samples its function class, so every verdict here is
//! relative to the battery used.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{MdpModel, Strategy};
use crate::measure::{
    integrate, ActionAtom, FunctionClass, FunctionDomain, HybridMeasure, Integral, MeasureKind, StatePart, StateView,
    TestFunction, DEFAULT_TOL,
};
use crate::number::{rat_to_f64, Number};
use crate::occupation::{occupation, Solver};
use crate::spaces::{atom_coordinate_f64, ActionSpace, StatePoint, StateSpace};

pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-9;

pub const BATTERY_CAVEAT: &str =
    "verdicts are relative to the functions in the battery and are not statements about the full topology";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Bounded continuous functions.
    W,
    /// Bounded Carathéodory functions.
    Ws,
    /// Bounded measurable functions on `Y`, applied to marginals.
    S,
}

impl Mode {
    pub fn admits(self, class: FunctionClass) -> bool {
        match self {
            Mode::W => class.is_within(FunctionClass::Continuous),
            Mode::Ws => class.is_within(FunctionClass::Caratheodory),
            Mode::S => true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TestBattery {
    pub name: String,
    pub mode: Mode,
    functions: Vec<TestFunction>,
}

impl TestBattery {
    pub fn new(name: impl Into<String>, mode: Mode, functions: Vec<TestFunction>) -> Result<Self> {
        let name = name.into();
        if functions.is_empty() {
            return Err(Error::InvalidBattery(format!("battery {name:?} is empty")));
        }
        for f in &functions {
            if !mode.admits(f.class()) {
                return Err(Error::InvalidBattery(format!(
                    "{:?} is declared {:?}, which a {mode:?} battery does not admit",
                    f.name(),
                    f.class()
                )));
            }
            if mode == Mode::S && f.domain() != FunctionDomain::State {
                return Err(Error::InvalidBattery(format!("{:?}: s-batteries take functions on Y", f.name())));
            }
        }
        Ok(TestBattery { name, mode, functions })
    }

    /// Like [`TestBattery::new`], additionally checking every function of a
    /// w-battery along the declared convergent sequences of `space`.
    pub fn new_checked(
        name: impl Into<String>,
        mode: Mode,
        functions: Vec<TestFunction>,
        space: &StateSpace,
    ) -> Result<Self> {
        let b = Self::new(name, mode, functions)?;
        if mode == Mode::W {
            for f in &b.functions {
                check_sequential_continuity(f, space)?;
            }
        }
        Ok(b)
    }

    pub fn functions(&self) -> &[TestFunction] {
        &self.functions
    }
}

/// Reject a function whose values along some declared sequence `y_k → y`
/// stay away from its value at `y`: the largest gap over the final quarter
/// of the sequence must be negligible or well below the overall largest gap.
pub fn check_sequential_continuity(f: &TestFunction, space: &StateSpace) -> Result<()> {
    let view = |name: &str| -> Result<(String, Option<f64>)> {
        let a = space.atom(name)?;
        Ok((a.name.clone(), atom_coordinate_f64(a)))
    };
    for seq in space.convergent_sequences() {
        if seq.terms.len() < 4 {
            continue;
        }
        let (ln, lc) = view(&seq.limit)?;
        let at_limit = f.eval(&StateView::Atom { name: &ln, coordinate: lc }, None)?;
        let mut gaps = Vec::with_capacity(seq.terms.len());
        for t in &seq.terms {
            let (n, c) = view(t)?;
            gaps.push((f.eval(&StateView::Atom { name: &n, coordinate: c }, None)? - at_limit).abs());
        }
        let overall = gaps.iter().cloned().fold(0.0, f64::max);
        let tail = gaps[gaps.len() - gaps.len() / 4..].iter().cloned().fold(0.0, f64::max);
        if tail > 1e-12 && tail >= 0.5 * overall {
            return Err(Error::InvalidBattery(format!(
                "{:?} is declared continuous but does not converge along the sequence to {:?} (gap {tail})",
                f.name(),
                seq.limit
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub label: String,
    pub integral: Number,
    pub gap: f64,
    pub abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionTrace {
    pub function: String,
    pub class: FunctionClass,
    pub limit_integral: Number,
    pub rows: Vec<TraceRow>,
    /// Every gap in the final third is within tolerance plus integration error.
    pub converged: bool,
    /// Every gap in the final third is at least ten times the tolerance.
    pub persistent_gap: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Converges,
    Diverges {
        witness: String,
        min_tail_gap: f64,
    },
    /// Some function neither settled within tolerance nor kept a persistent gap.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub battery: String,
    pub mode: Mode,
    pub tol: f64,
    pub verdict: Verdict,
    pub functions: Vec<FunctionTrace>,
    pub caveat: String,
}

impl ConvergenceReport {
    pub fn converges(&self) -> bool {
        self.verdict == Verdict::Converges
    }

    pub fn diverges(&self) -> bool {
        matches!(self.verdict, Verdict::Diverges { .. })
    }

    pub fn trace(&self, function: &str) -> Option<&FunctionTrace> {
        self.functions.iter().find(|t| t.function == function)
    }

    /// Traces as CSV columns `function,k,label,integral,gap`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record(["function", "k", "label", "integral", "gap"]).map_err(io)?;
        for t in &self.functions {
            for r in &t.rows {
                out.write_record([
                    t.function.clone(),
                    r.k.to_string(),
                    r.label.clone(),
                    r.integral.to_string(),
                    r.gap.to_string(),
                ])
                .map_err(io)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn gap_of(a: &Integral, b: &Integral) -> f64 {
    (&a.value - &b.value).abs().to_f64()
}

/// Integrals of every battery function along `seq` against `limit`.
pub fn check_convergence(
    seq: &[(String, HybridMeasure)],
    limit: &HybridMeasure,
    battery: &TestBattery,
    tol: f64,
) -> Result<ConvergenceReport> {
    if seq.len() < 3 {
        return Err(Error::InvalidSequence(format!("need at least 3 measures, got {}", seq.len())));
    }
    let prepare = |mu: &HybridMeasure| -> Result<HybridMeasure> {
        if mu.domain != limit.domain {
            return Err(Error::DomainMismatch { left: mu.domain.clone(), right: limit.domain.clone() });
        }
        Ok(match (battery.mode, mu.kind) {
            (Mode::S, MeasureKind::StateAction) => mu.marginal_state(),
            _ => mu.clone(),
        })
    };
    let limit_m = prepare(limit)?;
    let seq_m: Vec<(String, HybridMeasure)> =
        seq.iter().map(|(l, mu)| Ok((l.clone(), prepare(mu)?))).collect::<Result<_>>()?;
    let tail_start = seq.len() - seq.len().div_ceil(3);
    let mut functions = Vec::with_capacity(battery.functions.len());
    for g in &battery.functions {
        let lim = integrate(&limit_m, g, DEFAULT_TOL)?;
        let lim_err = lim.abs_error.to_f64();
        let mut rows = Vec::with_capacity(seq.len());
        for (k, (label, mu)) in seq_m.iter().enumerate() {
            let r = integrate(mu, g, DEFAULT_TOL)?;
            rows.push(TraceRow {
                k,
                label: label.clone(),
                gap: gap_of(&r, &lim),
                abs_error: r.abs_error.to_f64(),
                integral: r.value,
            });
        }
        let tail = &rows[tail_start..];
        let converged = tail.iter().all(|r| r.gap <= tol + r.abs_error + lim_err);
        let persistent_gap = tail.iter().all(|r| r.gap >= 10.0 * tol);
        functions.push(FunctionTrace {
            function: g.name().to_string(),
            class: g.class(),
            limit_integral: lim.value,
            rows,
            converged,
            persistent_gap,
        });
    }
    let verdict = if functions.iter().all(|f| f.converged) {
        Verdict::Converges
    } else if let Some(f) = functions.iter().find(|f| f.persistent_gap) {
        let min_tail_gap = f.rows[tail_start..].iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
        Verdict::Diverges { witness: f.function.clone(), min_tail_gap }
    } else {
        Verdict::Inconclusive
    };
    Ok(ConvergenceReport {
        battery: battery.name.clone(),
        mode: battery.mode,
        tol,
        verdict,
        functions,
        caveat: BATTERY_CAVEAT.to_string(),
    })
}

/// Convergence of occupation measures started from different initial states.
pub fn multi_initial_check(
    m: &MdpModel,
    pairs: &[(StatePoint, Strategy)],
    limit: &HybridMeasure,
    battery: &TestBattery,
    tol: f64,
    solver: &Solver,
) -> Result<ConvergenceReport> {
    let seq: Vec<(String, HybridMeasure)> = pairs
        .iter()
        .map(|(x0, pi)| Ok((format!("{}@{x0}", pi.name), occupation(m, pi, x0, solver)?.measure)))
        .collect::<Result<_>>()?;
    check_convergence(&seq, limit, battery, tol)
}

/// Whether a converging ws-verdict is matched by the w-verdict on the same
/// data, as it must be when the w-battery's functions are also Carathéodory.
pub fn modes_consistent(w: &ConvergenceReport, ws: &ConvergenceReport) -> bool {
    !ws.converges() || w.converges()
}

/// `∫ (Σ_a ρ_a − max_a ρ_a) dν` over the cells of a finite-action measure:
/// atoms, segment points, and the common refinement of density breakpoints.
pub fn determinism_defect(mu: &HybridMeasure, actions: &ActionSpace) -> Result<Number> {
    if !actions.is_finite() {
        return Err(Error::IntervalActions);
    }
    if mu.kind != MeasureKind::StateAction {
        return Err(Error::InvalidMeasure("determinism defect needs a state-action measure".into()));
    }
    // cell → action → mass (atoms, points) or height (segment densities)
    let mut point_cells: BTreeMap<String, BTreeMap<String, Number>> = BTreeMap::new();
    let mut segments: BTreeMap<String, Vec<(BigRational, BigRational, String, Number)>> = BTreeMap::new();
    for c in &mu.components {
        let nu = c.action.as_ref().expect("state-action component");
        if nu.density.is_some() {
            return Err(Error::InvalidMeasure("action density on a finite action space".into()));
        }
        for a in &nu.atoms {
            let name = match &a.action {
                ActionAtom::Named(n) => n.clone(),
                ActionAtom::At(x) => x.to_string(),
            };
            let w = &c.weight * &a.weight;
            match &c.state {
                StatePart::Atom { name: s, .. } => add(point_cells.entry(format!("atom {s}")).or_default(), name, &w),
                StatePart::Point { segment, at } => {
                    add(point_cells.entry(format!("{segment}@{at}")).or_default(), name, &w)
                }
                StatePart::Density { segment, density } => {
                    for (l, u, h) in density.pieces() {
                        segments.entry(segment.clone()).or_default().push((l.clone(), u.clone(), name.clone(), h * &w));
                    }
                }
            }
        }
    }
    let mut total = Number::zero();
    for per_action in point_cells.values() {
        total = total + cell_defect(per_action);
    }
    for pieces in segments.values() {
        let mut breaks: Vec<BigRational> = pieces.iter().flat_map(|(l, u, _, _)| [l.clone(), u.clone()]).collect();
        breaks.sort();
        breaks.dedup();
        let mut heights: Vec<BTreeMap<String, Number>> = vec![BTreeMap::new(); breaks.len().saturating_sub(1)];
        for (l, u, a, h) in pieces {
            let lo = breaks.binary_search(l).expect("break present");
            let hi = breaks.binary_search(u).expect("break present");
            for cell in &mut heights[lo..hi] {
                add(cell, a.clone(), h);
            }
        }
        for (w, cell) in breaks.windows(2).zip(&heights) {
            total = total + cell_defect(cell) * Number::Exact(&w[1] - &w[0]);
        }
    }
    Ok(total)
}

fn add(map: &mut BTreeMap<String, Number>, k: String, w: &Number) {
    let e = map.entry(k).or_insert_with(Number::zero);
    *e = &*e + w;
}

fn cell_defect(per_action: &BTreeMap<String, Number>) -> Number {
    let sum = Number::sum(per_action.values());
    let max =
        per_action
            .values()
            .cloned()
            .fold(Number::zero(), |a, b| if b.cmp_value(&a) == Ordering::Greater { b } else { a });
    sum - max
}

/// Midpoint Riemann sum of `f` on `[lower, upper]` with `n` cells.
pub fn riemann_midpoint(f: impl Fn(f64) -> f64, lower: &BigRational, upper: &BigRational, n: usize) -> f64 {
    let (a, b) = (rat_to_f64(lower), rat_to_f64(upper));
    let h = (b - a) / n as f64;
    (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{ActionMeasure, Component, Density, StateView};
    use crate::number::{rat, rat_int};
    use crate::spaces::{Atom, ConvergentSequence, Topology};

    fn leb_with(nu: ActionMeasure) -> HybridMeasure {
        HybridMeasure::zero("r", MeasureKind::StateAction)
            .with(Component {
                state: StatePart::Density {
                    segment: "s".into(),
                    density: Density::uniform(rat_int(0), rat_int(1)).unwrap(),
                },
                action: Some(nu),
                weight: Number::one(),
            })
            .unwrap()
    }

    #[test]
    fn defect_of_randomized_and_deterministic() {
        let acts = ActionSpace::finite(["0", "1"]).unwrap();
        assert_eq!(determinism_defect(&leb_with(ActionMeasure::named("1")), &acts).unwrap(), Number::zero());
        let half = ActionMeasure::mixture(
            vec![
                (ActionAtom::Named("0".into()), Number::ratio(1, 2)),
                (ActionAtom::Named("1".into()), Number::ratio(1, 2)),
            ],
            None,
        );
        assert_eq!(determinism_defect(&leb_with(half), &acts).unwrap(), Number::ratio(1, 2));
        let interval = ActionSpace::interval(rat_int(0), rat_int(1)).unwrap();
        assert!(matches!(
            determinism_defect(&leb_with(ActionMeasure::at(rat_int(0))), &interval),
            Err(Error::IntervalActions)
        ));
    }

    #[test]
    fn overlapping_densities_refine() {
        let acts = ActionSpace::finite(["0", "1"]).unwrap();
        let part = |l, u, a: &str| Component {
            state: StatePart::Density { segment: "s".into(), density: Density::uniform(l, u).unwrap() },
            action: Some(ActionMeasure::named(a)),
            weight: Number::one(),
        };
        // Height 2 for "0" on [0,1/2], height 1 for "1" on [0,1]: overlap on
        // [0,1/2] has defect 1 × 1/2.
        let mu = HybridMeasure::zero("r", MeasureKind::StateAction)
            .with(part(rat_int(0), rat(1, 2), "0"))
            .unwrap()
            .with(part(rat_int(0), rat_int(1), "1"))
            .unwrap();
        assert_eq!(determinism_defect(&mu, &acts).unwrap(), Number::ratio(1, 2));
    }

    fn space() -> StateSpace {
        let mut atoms: Vec<Atom> =
            (1..=40).map(|n| Atom::at(format!("1/{n}"), rat(1, n), Topology::Isolated)).collect();
        atoms.push(Atom::at("0", rat_int(0), Topology::LimitPoint));
        atoms.push(Atom::isolated("d"));
        let seq = ConvergentSequence { terms: (1..=40).map(|n| format!("1/{n}")).collect(), limit: "0".into() };
        StateSpace::new(atoms, vec![seq], vec![], "d").unwrap()
    }

    fn coord() -> TestFunction {
        TestFunction::from_fn("y", FunctionClass::Continuous, FunctionDomain::State, 1.0, |s, _| match s {
            StateView::Atom { coordinate, .. } => coordinate.unwrap_or(0.0),
            StateView::Segment { x, .. } => *x,
        })
    }

    fn at_zero(class: FunctionClass) -> TestFunction {
        TestFunction::from_fn("I{y=0}", class, FunctionDomain::State, 1.0, |s, _| match s {
            StateView::Atom { coordinate: Some(c), .. } if *c == 0.0 => 1.0,
            _ => 0.0,
        })
    }

    #[test]
    fn continuity_validator() {
        let sp = space();
        assert!(TestBattery::new_checked("w", Mode::W, vec![coord()], &sp).is_ok());
        let err = TestBattery::new_checked("w", Mode::W, vec![at_zero(FunctionClass::Continuous)], &sp);
        assert!(matches!(err, Err(Error::InvalidBattery(_))));
    }

    #[test]
    fn admissibility() {
        assert!(TestBattery::new("ws", Mode::Ws, vec![at_zero(FunctionClass::Measurable)]).is_err());
        assert!(TestBattery::new("ws", Mode::Ws, vec![at_zero(FunctionClass::Caratheodory)]).is_ok());
        assert!(TestBattery::new("w", Mode::W, vec![at_zero(FunctionClass::Caratheodory)]).is_err());
        assert!(TestBattery::new("s", Mode::S, vec![at_zero(FunctionClass::Measurable)]).is_ok());
    }

    #[test]
    fn constant_sequence_converges() {
        let mu = leb_with(ActionMeasure::named("1"));
        let seq: Vec<(String, HybridMeasure)> = (0..4).map(|k| (k.to_string(), mu.clone())).collect();
        let g = TestFunction::from_fn("x", FunctionClass::Continuous, FunctionDomain::State, 1.0, |s, _| match s {
            StateView::Segment { x, .. } => *x,
            _ => 0.0,
        });
        let b = TestBattery::new("w", Mode::W, vec![g]).unwrap();
        let r = check_convergence(&seq, &mu, &b, DEFAULT_CONVERGENCE_TOL).unwrap();
        assert!(r.converges());
        assert!(r.caveat.contains("relative to"));
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("function,k,label,integral,gap"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn short_sequences_are_rejected() {
        let mu = leb_with(ActionMeasure::named("1"));
        let b = TestBattery::new("w", Mode::W, vec![coord()]).unwrap();
        assert!(check_convergence(&[("a".into(), mu.clone())], &mu, &b, 1e-9).is_err());
    }

    #[test]
    fn riemann_sum() {
        let v = riemann_midpoint(|x| x * x, &rat_int(0), &rat_int(1), 1 << 10);
        assert!((v - 1.0 / 3.0).abs() < 1e-6);
    }
}
