//! Occupation measures, survival probabilities and tail sums.
//!
//! Two solvers are available and the caller picks one. Unrolling composes
//! stage kernels with the transition kernel until all mass has reached the
//! cemetery. The countable solver works on atomic models under a strategy
//! that is eventually stationary; on chains that only move upward (apart from
//! self-loops) it sums geometric holding times in closed form, and otherwise
//! it iterates the visit distribution up to a stage limit.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{MdpModel, StageKernel, Strategy};
use crate::measure::{ActionAtom, ActionMeasure, Component, HybridMeasure, MeasureKind, StatePart};
use crate::number::Number;
use crate::spaces::StatePoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Unroll,
    CountableForward,
    TruncatedLinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Largest admitted position among the atoms of `Y`.
    pub max_state_index: usize,
    pub max_stages: usize,
    pub target_residual: Number,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { max_state_index: 64, max_stages: 256, target_residual: Number::pow2(-40) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Solver {
    Unroll { horizon: usize },
    Countable(Truncation),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationResult {
    pub measure: HybridMeasure,
    /// Certified bound on the occupation mass left out of `measure`.
    pub tail_bound: Number,
    pub method: Method,
    /// Mass that left the materialized part of the model (zero when exact).
    pub residual: Number,
}

impl OccupationResult {
    pub fn total_mass(&self) -> Number {
        self.measure.total_mass()
    }

    pub fn marginal(&self) -> HybridMeasure {
        self.measure.marginal_state()
    }
}

pub fn occupation(m: &MdpModel, pi: &Strategy, x0: &StatePoint, solver: &Solver) -> Result<OccupationResult> {
    match solver {
        Solver::Unroll { horizon } => occupation_unroll(m, pi, x0, *horizon),
        Solver::Countable(t) => occupation_countable(m, pi, x0, t),
    }
}

/// Image `∫ p(·|y,a) c(dy×da)` of one component, as weighted state parts.
pub fn component_image(m: &MdpModel, c: &Component) -> Result<Vec<(StatePart, Number)>> {
    let nu = c.action.as_ref().ok_or_else(|| Error::InvalidMeasure("component lacks an action part".into()))?;
    let mut out = Vec::new();
    match &c.state {
        StatePart::Atom { name, .. } => {
            if m.is_frontier(name) {
                return Err(Error::FrontierReached(name.clone()));
            }
            let mut rest = ActionMeasure { atoms: vec![], density: nu.density.clone() };
            for a in &nu.atoms {
                match &a.action {
                    ActionAtom::Named(n) => {
                        let rule = m
                            .kernel
                            .rule_for_atom(name, Some(n))
                            .ok_or_else(|| Error::InvalidModel(format!("no rule for ({name}, {n})")))?;
                        let sub = ActionMeasure { atoms: vec![a.clone()], density: None };
                        out.extend(rule.step(&sub, &m.states)?);
                    }
                    ActionAtom::At(_) => rest.atoms.push(a.clone()),
                }
            }
            if !rest.atoms.is_empty() || rest.density.is_some() {
                let rule = m
                    .kernel
                    .rule_for_atom(name, None)
                    .ok_or_else(|| Error::InvalidModel(format!("no action-independent rule at {name}")))?;
                out.extend(rule.step(&rest, &m.states)?);
            }
        }
        StatePart::Point { segment, at } => {
            let rule = m
                .kernel
                .rule_for_point(segment, at, &m.states)
                .ok_or_else(|| Error::InvalidModel(format!("no rule at {segment}@{at}")))?;
            out.extend(rule.step(nu, &m.states)?);
        }
        StatePart::Density { segment, density } => {
            for (piece, rule) in m.kernel.split_density(segment, density)? {
                let mass = piece.mass();
                out.extend(rule.step(nu, &m.states)?.into_iter().map(|(p, w)| (p, w * &mass)));
            }
        }
    }
    Ok(out.into_iter().map(|(p, w)| (p, w * &c.weight)).collect())
}

fn is_cemetery(m: &MdpModel, part: &StatePart) -> bool {
    matches!(part, StatePart::Atom { name, .. } if name == m.states.cemetery())
}

/// One stage: the state-action components occupied now and the next state
/// distribution (cemetery mass dropped).
fn advance(m: &MdpModel, kappa: &StageKernel, nu: &HybridMeasure) -> Result<(Vec<Component>, HybridMeasure)> {
    let mut occupied = Vec::new();
    for c in &nu.components {
        if is_cemetery(m, &c.state) || c.weight.is_zero() {
            continue;
        }
        match &c.state {
            StatePart::Atom { name, .. } => {
                if m.is_frontier(name) {
                    return Err(Error::FrontierReached(name.clone()));
                }
                let a = kappa.at_atom(name).ok_or_else(|| Error::MissingState(name.clone()))?;
                occupied.push(Component { state: c.state.clone(), action: Some(a.clone()), weight: c.weight.clone() });
            }
            StatePart::Point { segment, at } => {
                let policy = kappa.on_segment(segment).ok_or_else(|| Error::MissingState(format!("{segment}@{at}")))?;
                let a = policy.at(at).ok_or_else(|| Error::MissingState(format!("{segment}@{at}")))?;
                occupied.push(Component { state: c.state.clone(), action: Some(a.clone()), weight: c.weight.clone() });
            }
            StatePart::Density { segment, density } => {
                let policy =
                    kappa.on_segment(segment).ok_or_else(|| Error::MissingState(format!("segment {segment}")))?;
                let cells = policy
                    .cells(density.lower(), density.upper())
                    .ok_or_else(|| Error::MissingState(format!("part of segment {segment}")))?;
                for (l, u, a) in cells {
                    if let Some(piece) = density.restrict(&l, &u) {
                        occupied.push(Component {
                            state: StatePart::Density { segment: segment.clone(), density: piece },
                            action: Some(a.clone()),
                            weight: c.weight.clone(),
                        });
                    }
                }
            }
        }
    }
    let mut next = HybridMeasure::zero(m.name.clone(), MeasureKind::State);
    for c in &occupied {
        for (state, weight) in component_image(m, c)? {
            if weight.is_zero() || is_cemetery(m, &state) {
                continue;
            }
            next.push(Component { state, action: None, weight })?;
        }
    }
    Ok((occupied, next.merged()))
}

fn initial(m: &MdpModel, x0: &StatePoint) -> Result<HybridMeasure> {
    HybridMeasure::zero(m.name.clone(), MeasureKind::State).with(Component {
        state: StatePart::from_point(&m.states, x0)?,
        action: None,
        weight: Number::one(),
    })
}

/// Exact occupation measure by unrolling at most `horizon` stages.
pub fn occupation_unroll(m: &MdpModel, pi: &Strategy, x0: &StatePoint, horizon: usize) -> Result<OccupationResult> {
    let mut nu = initial(m, x0)?;
    let mut eta = HybridMeasure::zero(m.name.clone(), MeasureKind::StateAction);
    for t in 1..=horizon {
        if nu.components.iter().all(|c| is_cemetery(m, &c.state)) {
            break;
        }
        let (occupied, next) = advance(m, pi.stage(t)?, &nu)?;
        for c in occupied {
            eta.push(c)?;
        }
        nu = next;
    }
    let residual = nu.total_mass();
    if !residual.is_zero() {
        return Err(Error::UnrollIncomplete { horizon, residual });
    }
    Ok(OccupationResult { measure: eta, tail_bound: Number::zero(), method: Method::Unroll, residual })
}

/// `P(τ > t)` for `t = 0..=n_max`, exactly.
pub fn survival_probs(m: &MdpModel, pi: &Strategy, x0: &StatePoint, n_max: usize) -> Result<Vec<Number>> {
    let mut nu = initial(m, x0)?;
    let mut out = Vec::with_capacity(n_max + 1);
    for t in 0..=n_max {
        let alive: Vec<Number> =
            nu.components.iter().filter(|c| !is_cemetery(m, &c.state)).map(Component::mass).collect();
        out.push(Number::sum(alive.iter()));
        if t < n_max {
            if out[t].is_zero() {
                out.resize(n_max + 1, Number::zero());
                break;
            }
            nu = advance(m, pi.stage(t + 1)?, &nu)?.1;
        }
    }
    Ok(out)
}

/// Ratio `ρ` with `next = ρ·prev` part by part, if one exists.
fn proportional(prev: &HybridMeasure, next: &HybridMeasure) -> Option<Number> {
    if prev.components.len() != next.components.len() || prev.components.is_empty() {
        return None;
    }
    let index: HashMap<String, &Number> = prev.components.iter().map(|c| (c.state.merge_key(), &c.weight)).collect();
    let mut ratio: Option<Number> = None;
    for c in &next.components {
        let w = index.get(&c.state.merge_key())?;
        let r = c.weight.checked_div(w).ok()?;
        match &ratio {
            None => ratio = Some(r),
            Some(q) if *q == r => {}
            Some(_) => return None,
        }
    }
    ratio
}

/// `E[τ] = Σ_t P(τ > t)` by forward iteration, summing in closed form once
/// the state distribution decays geometrically under the stationary tail.
pub fn expected_time_by_survival(m: &MdpModel, pi: &Strategy, x0: &StatePoint, max_stages: usize) -> Result<Number> {
    let mut nu = initial(m, x0)?;
    let mut total = Number::zero();
    for t in 0..max_stages {
        let alive = nu.total_mass();
        if alive.is_zero() && nu.components.iter().all(|c| is_cemetery(m, &c.state)) {
            return Ok(total);
        }
        let next = advance(m, pi.stage(t + 1)?, &nu)?.1;
        if t + 1 >= pi.stages.len() && pi.stationary_tail {
            if let Some(rho) = proportional(&nu, &next) {
                if rho.cmp_value(&Number::one()) == std::cmp::Ordering::Less {
                    return Ok(total + alive.checked_div(&(Number::one() - rho))?);
                }
            }
        }
        total = total + alive;
        nu = next;
    }
    Err(Error::TruncationExhausted { stages: max_stages, residual: nu.total_mass() })
}

/// `E[Σ_{t ≥ n} I{τ > t}]`; the true value lies in `[value, value + tail_bound]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSum {
    pub n: usize,
    pub value: Number,
    pub tail_bound: Number,
}

pub fn tail_sum(m: &MdpModel, pi: &Strategy, x0: &StatePoint, n: usize, solver: &Solver) -> Result<TailSum> {
    let occ = occupation(m, pi, x0, solver)?;
    tail_sum_from(m, pi, x0, n, &occ)
}

/// Tail sum reusing an already computed occupation measure.
pub fn tail_sum_from(
    m: &MdpModel,
    pi: &Strategy,
    x0: &StatePoint,
    n: usize,
    occ: &OccupationResult,
) -> Result<TailSum> {
    let head = if n == 0 { vec![] } else { survival_probs(m, pi, x0, n - 1)? };
    let value = occ.total_mass() - Number::sum(head.iter());
    Ok(TailSum { n, value, tail_bound: occ.tail_bound.clone() })
}

struct Chain {
    /// Reachable non-cemetery states in discovery order.
    states: Vec<String>,
    /// `P_π(x, y)` over reachable states, cemetery omitted.
    rows: HashMap<String, Vec<(String, Number)>>,
    cut: Vec<String>,
}

fn build_chain(m: &MdpModel, kappa: &StageKernel, start: &[String], trunc: &Truncation) -> Result<Chain> {
    let cemetery = m.states.cemetery();
    let mut seen: BTreeMap<String, ()> = BTreeMap::new();
    let mut states = Vec::new();
    let mut cut = Vec::new();
    let mut rows = HashMap::new();
    let mut queue: VecDeque<String> = start.iter().cloned().collect();
    for s in start {
        seen.insert(s.clone(), ());
    }
    while let Some(x) = queue.pop_front() {
        if m.is_frontier(&x) || m.states.state_index(&x)? > trunc.max_state_index {
            cut.push(x);
            continue;
        }
        states.push(x.clone());
        let nu = kappa.at_atom(&x).ok_or_else(|| Error::MissingState(x.clone()))?;
        if !nu.is_atomic() {
            return Err(Error::NotAtomic(format!("action distribution at {x} has a density")));
        }
        let mut row: BTreeMap<String, Number> = BTreeMap::new();
        for a in &nu.atoms {
            let ActionAtom::Named(name) = &a.action else {
                return Err(Error::NotAtomic(format!("coordinate action at {x}")));
            };
            for t in m.row(&x, name)? {
                if t.to == cemetery || t.prob.is_zero() {
                    continue;
                }
                let e = row.entry(t.to.clone()).or_insert_with(Number::zero);
                *e = &*e + &(&a.weight * &t.prob);
            }
        }
        let mut ordered: Vec<(String, Number)> = row.into_iter().collect();
        ordered.sort_by_key(|(y, _)| m.states.state_index(y).unwrap_or(usize::MAX));
        for (y, _) in &ordered {
            if seen.insert(y.clone(), ()).is_none() {
                queue.push_back(y.clone());
            }
        }
        rows.insert(x, ordered);
    }
    Ok(Chain { states, rows, cut })
}

/// Kahn order of the chain ignoring self-loops; `None` if it has a cycle.
fn upward_order(m: &MdpModel, chain: &Chain) -> Option<Vec<String>> {
    let inside: HashMap<&str, usize> = chain.states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut indeg = vec![0usize; chain.states.len()];
    for (x, row) in &chain.rows {
        for (y, _) in row {
            if y != x {
                if let Some(&j) = inside.get(y.as_str()) {
                    indeg[j] += 1;
                }
            }
        }
    }
    let key = |i: usize| m.states.state_index(&chain.states[i]).unwrap_or(usize::MAX);
    let mut ready: std::collections::BTreeSet<(usize, usize)> =
        (0..chain.states.len()).filter(|&i| indeg[i] == 0).map(|i| (key(i), i)).collect();
    let mut order = Vec::with_capacity(chain.states.len());
    while let Some(&(k, i)) = ready.iter().next() {
        ready.remove(&(k, i));
        let x = &chain.states[i];
        order.push(x.clone());
        for (y, _) in &chain.rows[x] {
            if y == x {
                continue;
            }
            if let Some(&j) = inside.get(y.as_str()) {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert((key(j), j));
                }
            }
        }
    }
    (order.len() == chain.states.len()).then_some(order)
}

/// Occupation measure of an atomic model from an atom, truncated to the
/// states with index at most `trunc.max_state_index`.
pub fn occupation_countable(
    m: &MdpModel,
    pi: &Strategy,
    x0: &StatePoint,
    trunc: &Truncation,
) -> Result<OccupationResult> {
    if !m.is_atomic() {
        return Err(Error::NotAtomic(format!("model {:?} has segments or non-tabular rules", m.name)));
    }
    if !pi.stationary_tail {
        return Err(Error::InvalidStrategy(format!("strategy {:?} has no stationary tail", pi.name)));
    }
    // Non-stationary prefix: unroll exactly.
    let mut nu = initial(m, x0)?;
    let mut eta = HybridMeasure::zero(m.name.clone(), MeasureKind::StateAction);
    for t in 1..pi.stages.len() {
        let (occupied, next) = advance(m, pi.stage(t)?, &nu)?;
        for c in occupied {
            eta.push(c)?;
        }
        nu = next;
    }
    let kappa = pi.stages.last().expect("nonempty");
    let mut init: BTreeMap<String, Number> = BTreeMap::new();
    for c in &nu.components {
        match &c.state {
            StatePart::Atom { name, .. } if name != m.states.cemetery() => {
                let e = init.entry(name.clone()).or_insert_with(Number::zero);
                *e = &*e + &c.weight;
            }
            StatePart::Atom { .. } => {}
            _ => return Err(Error::NotAtomic("non-atomic state distribution".into())),
        }
    }
    let start: Vec<String> = init.keys().cloned().collect();
    let chain = build_chain(m, kappa, &start, trunc)?;
    let (visits, residual, method) = match upward_order(m, &chain) {
        Some(order) => {
            let (v, r) = visits_upward(&chain, &order, &init)?;
            (v, r, Method::CountableForward)
        }
        None => {
            let (v, r) = visits_iterated(&chain, &init, trunc)?;
            (v, r, Method::TruncatedLinear)
        }
    };
    let tail_bound = if residual.is_zero() {
        Number::zero()
    } else {
        match &pi.occupation_cap {
            Some(cap) => &residual * cap,
            None => return Err(Error::UncertifiedTail { residual }),
        }
    };
    for (x, v) in visits {
        if v.is_zero() {
            continue;
        }
        let a = kappa.at_atom(&x).ok_or_else(|| Error::MissingState(x.clone()))?;
        eta.push(Component { state: StatePart::atom(&m.states, &x)?, action: Some(a.clone()), weight: v })?;
    }
    Ok(OccupationResult { measure: eta.merged(), tail_bound, method, residual })
}

/// Expected visits along an upward order; returns `(visits, mass sent past
/// the truncation)`.
fn visits_upward(
    chain: &Chain,
    order: &[String],
    init: &BTreeMap<String, Number>,
) -> Result<(Vec<(String, Number)>, Number)> {
    let mut inflow: HashMap<String, Number> = init.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    let mut out = Vec::with_capacity(order.len());
    let mut residual = Number::zero();
    for x in order {
        let row = &chain.rows[x];
        let stay = Number::sum(row.iter().filter(|(y, _)| y == x).map(|(_, p)| p));
        if stay == Number::one() {
            return Err(Error::NotAbsorbing(x.clone()));
        }
        let v = inflow.remove(x).unwrap_or_else(Number::zero).checked_div(&(Number::one() - stay))?;
        for (y, p) in row {
            if y == x {
                continue;
            }
            let flow = &v * p;
            if chain.cut.contains(y) {
                residual = residual + flow;
            } else {
                let e = inflow.entry(y.clone()).or_insert_with(Number::zero);
                *e = &*e + &flow;
            }
        }
        out.push((x.clone(), v));
    }
    for s in &chain.cut {
        if let Some(v) = init.get(s) {
            residual = residual + v;
        }
    }
    Ok((out, residual))
}

/// Truncated forward iteration for chains with cycles.
fn visits_iterated(
    chain: &Chain,
    init: &BTreeMap<String, Number>,
    trunc: &Truncation,
) -> Result<(Vec<(String, Number)>, Number)> {
    let mut acc: BTreeMap<String, Number> = BTreeMap::new();
    let mut nu: BTreeMap<String, Number> = init.clone();
    let mut escaped = Number::zero();
    for s in &chain.cut {
        if let Some(v) = nu.remove(s) {
            escaped = escaped + v;
        }
    }
    for _ in 0..trunc.max_stages {
        let alive = Number::sum(nu.values());
        if alive.cmp_value(&trunc.target_residual) == std::cmp::Ordering::Less {
            let order: Vec<(String, Number)> =
                chain.states.iter().filter_map(|s| acc.get(s).map(|v| (s.clone(), v.clone()))).collect();
            return Ok((order, escaped + alive));
        }
        let mut next: BTreeMap<String, Number> = BTreeMap::new();
        for (x, w) in &nu {
            let e = acc.entry(x.clone()).or_insert_with(Number::zero);
            *e = &*e + w;
            for (y, p) in &chain.rows[x] {
                let flow = w * p;
                if chain.cut.contains(y) {
                    escaped = escaped + flow;
                } else {
                    let e = next.entry(y.clone()).or_insert_with(Number::zero);
                    *e = &*e + &flow;
                }
            }
        }
        nu = next;
    }
    Err(Error::TruncationExhausted { stages: trunc.max_stages, residual: Number::sum(nu.values()) })
}

/// One cell of the flow identity `η|_Y(B) = I{x0 ∈ B} + ∫ p(B|y,a) η(dy×da)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowCell {
    pub cell: String,
    pub occupation: Number,
    pub inflow: Number,
}

impl FlowCell {
    pub fn holds(&self) -> bool {
        self.occupation == self.inflow
    }
}

fn cell_of(part: &StatePart) -> String {
    match part {
        StatePart::Atom { name, .. } => name.clone(),
        StatePart::Point { segment, .. } | StatePart::Density { segment, .. } => format!("segment {segment}"),
    }
}

/// Both sides of the flow identity on every atom and segment cell touched by
/// either side. Cells at or beyond a truncation are omitted.
pub fn flow_equation(m: &MdpModel, occ: &OccupationResult, x0: &StatePoint) -> Result<Vec<FlowCell>> {
    let mut lhs: BTreeMap<String, Number> = BTreeMap::new();
    let mut rhs: BTreeMap<String, Number> = BTreeMap::new();
    let add = |map: &mut BTreeMap<String, Number>, k: String, w: &Number| {
        let e = map.entry(k).or_insert_with(Number::zero);
        *e = &*e + w;
    };
    for c in &occ.measure.marginal_state().components {
        add(&mut lhs, cell_of(&c.state), &c.mass());
    }
    add(&mut rhs, cell_of(&StatePart::from_point(&m.states, x0)?), &Number::one());
    for c in &occ.measure.components {
        for (part, w) in component_image(m, c)? {
            if !is_cemetery(m, &part) {
                let mass = &w * &part.mass();
                add(&mut rhs, cell_of(&part), &mass);
            }
        }
    }
    let present: std::collections::BTreeSet<String> = lhs.keys().cloned().collect();
    let mut out = Vec::new();
    for cell in lhs.keys().chain(rhs.keys()).cloned().collect::<std::collections::BTreeSet<_>>() {
        if !present.contains(&cell) && !occ.residual.is_zero() {
            // Mass that crossed the truncation.
            continue;
        }
        out.push(FlowCell {
            occupation: lhs.get(&cell).cloned().unwrap_or_else(Number::zero),
            inflow: rhs.get(&cell).cloned().unwrap_or_else(Number::zero),
            cell,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{validate_model, ActionSelector, KernelRule, Transition, TransitionKernel};
    use crate::spaces::{ActionSpace, Atom, StateSpace};

    /// `x → x` w.p. 1/2 under "stay", `x → y` under "go", `y → d`.
    fn chain() -> MdpModel {
        let states =
            StateSpace::new(vec![Atom::isolated("x"), Atom::isolated("y"), Atom::isolated("d")], vec![], vec![], "d")
                .unwrap();
        let row = |from: &str, a: &str, row: Vec<(&str, Number)>| KernelRule::AtomicTable {
            from: from.into(),
            action: ActionSelector::Named(a.into()),
            row: row.into_iter().map(|(to, prob)| Transition { to: to.into(), prob }).collect(),
        };
        MdpModel {
            name: "chain".into(),
            states,
            actions: ActionSpace::finite(["stay", "go"]).unwrap(),
            kernel: TransitionKernel::new(vec![
                row("x", "stay", vec![("x", Number::ratio(1, 2)), ("d", Number::ratio(1, 2))]),
                row("x", "go", vec![("y", Number::one())]),
                row("y", "stay", vec![("d", Number::one())]),
                row("y", "go", vec![("x", Number::one())]),
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

    fn policy(m: &MdpModel, x: &str, y: &str) -> Strategy {
        let (x, y) = (x.to_string(), y.to_string());
        Strategy::deterministic_stationary(m, "p", move |s| match s {
            "x" => Some(x.clone()),
            "y" => Some(y.clone()),
            _ => None,
        })
        .unwrap()
    }

    #[test]
    fn geometric_holding_in_closed_form() {
        let m = chain();
        assert!(validate_model(&m).is_empty());
        let pi = policy(&m, "stay", "stay");
        let occ = occupation_countable(&m, &pi, &StatePoint::atom("x"), &Truncation::default()).unwrap();
        assert_eq!(occ.method, Method::CountableForward);
        assert_eq!(occ.total_mass(), Number::int(2));
        assert_eq!(occ.tail_bound, Number::zero());
        assert_eq!(expected_time_by_survival(&m, &pi, &StatePoint::atom("x"), 10).unwrap(), Number::int(2));
    }

    #[test]
    fn cycles_fall_back_to_iteration() {
        let m = chain();
        // x → y → x → … never absorbs.
        let pi = policy(&m, "go", "go");
        let err = occupation_countable(&m, &pi, &StatePoint::atom("x"), &Truncation::default()).unwrap_err();
        assert!(matches!(err, Error::TruncationExhausted { .. }), "{err}");
    }

    #[test]
    fn unroll_agrees_with_countable_on_finite_support() {
        let m = chain();
        let pi = policy(&m, "go", "stay");
        let a = occupation_unroll(&m, &pi, &StatePoint::atom("x"), 5).unwrap();
        let b = occupation_countable(&m, &pi, &StatePoint::atom("x"), &Truncation::default()).unwrap();
        assert_eq!(a.measure.merged(), b.measure);
        assert_eq!(a.total_mass(), Number::int(2));
        let surv = survival_probs(&m, &pi, &StatePoint::atom("x"), 3).unwrap();
        assert_eq!(surv, vec![Number::one(), Number::one(), Number::zero(), Number::zero()]);
    }

    #[test]
    fn unroll_reports_residual() {
        let m = chain();
        let pi = policy(&m, "stay", "stay");
        match occupation_unroll(&m, &pi, &StatePoint::atom("x"), 3).unwrap_err() {
            Error::UnrollIncomplete { horizon, residual } => {
                assert_eq!(horizon, 3);
                assert_eq!(residual, Number::ratio(1, 8));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn flow_identity_on_small_chain() {
        let m = chain();
        let pi = policy(&m, "stay", "stay");
        let occ = occupation_countable(&m, &pi, &StatePoint::atom("x"), &Truncation::default()).unwrap();
        let cells = flow_equation(&m, &occ, &StatePoint::atom("x")).unwrap();
        assert!(!cells.is_empty());
        assert!(cells.iter().all(FlowCell::holds), "{cells:?}");
    }

    #[test]
    fn tail_sums() {
        let m = chain();
        let pi = policy(&m, "stay", "stay");
        let solver = Solver::Countable(Truncation::default());
        let x = StatePoint::atom("x");
        assert_eq!(tail_sum(&m, &pi, &x, 0, &solver).unwrap().value, Number::int(2));
        // Σ_{t ≥ 1} 2^{-t} = 1
        assert_eq!(tail_sum(&m, &pi, &x, 1, &solver).unwrap().value, Number::one());
    }

    #[test]
    fn absorbing_self_loop_is_rejected() {
        let mut m = chain();
        if let KernelRule::AtomicTable { row, .. } = &mut m.kernel.rules[2] {
            row[0] = Transition { to: "y".into(), prob: Number::one() };
        }
        let pi = policy(&m, "go", "stay");
        assert!(matches!(
            occupation_countable(&m, &pi, &StatePoint::atom("x"), &Truncation::default()),
            Err(Error::NotAbsorbing(_))
        ));
    }
}
