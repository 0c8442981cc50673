//! The reproduction suite: each claim recomputes a published value or
//! verdict on a built-in model and compares it with the expected one.

use std::cmp::Ordering;
use std::sync::Arc;

use crate::absorption::{
    uniformity_report, value_iterate, verify_supersolution, Supersolution, UniformityVerdict, ValueFunction,
    DEFAULT_EPSILON,
};
use crate::error::{Error, Result};
use crate::measure::{integrate, ActionView, StateView, TestFunction, DEFAULT_TOL};
use crate::number::{rat_int, Number};
use crate::occupation::{
    expected_time_by_survival, flow_equation, occupation, occupation_countable, tail_sum, Truncation,
};
use crate::report::{Claim, Status};
use crate::spaces::StatePoint;
use crate::topology::{
    check_convergence, determinism_defect, modes_consistent, multi_initial_check, riemann_midpoint, Mode, Verdict,
};
use crate::zoo::{self, ladder_value, psi_n_marginal, Quantity, ZooEntry, LADDER_DEPTH};

pub const TARGETS: [&str; 5] = ["example1", "example2", "remark1", "remark2", "all"];

/// Claim identifiers run for a target.
pub fn claims_for(target: &str) -> Result<Vec<&'static str>> {
    Ok(match target {
        "example1" => vec!["C5", "C6"],
        "example2" => vec!["C1", "C2", "C3", "C4"],
        "remark1" => vec!["C8"],
        "remark2" => vec!["C7"],
        "all" => vec!["C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9"],
        other => return Err(Error::UnknownName(format!("reproduce target {other:?}"))),
    })
}

/// Run the claims of a target, followed by the expected-value tables of the
/// models involved.
pub fn reproduce(target: &str) -> Result<Vec<Claim>> {
    let mut out: Vec<Claim> = claims_for(target)?.into_iter().map(run_claim).collect();
    let entries: Vec<&str> = if target == "all" { zoo::NAMES.to_vec() } else { vec![target] };
    for name in entries {
        out.extend(table_claims(&zoo::by_name(name)?));
    }
    Ok(out)
}

/// One claim by identifier; engine errors become a failing claim.
pub fn run_claim(id: &str) -> Claim {
    let (label, anchor, f): (&str, &str, fn() -> Result<Outcome>) = match id {
        "C1" => (
            "ladder: candidate value function is a fixed point of the optimality operator on b_1..b_64",
            "closed-form solution of the optimality equation",
            c1,
        ),
        "C2" => ("ladder: psi^n occupation marginals for n = 3..20", "climb to b_n, hold at b_{n+1}", c2),
        "C3" => (
            "ladder: psi occupation marginals with 40 rungs",
            "geometric climb; a quarter per rung jumps to the limit",
            c3,
        ),
        "C4" => ("ladder: tail sums of psi^n stay at 1/2", "tail sums do not vanish uniformly over the family", c4),
        "C5" => ("embedding: I{x>0} separates pi^m from pi^inf", "integral 1 for every m, 0 in the limit", c5),
        "C6" => ("embedding: continuous battery converges along m = 2^k", "gap 1/m for x + a", c6),
        "C7" => ("one-step: w-convergence across initial states without ws-convergence", "I{y=0} has gap 1", c7),
        "C8" => {
            ("selectors: deterministic occupation measures with a randomized weak limit", "defect 0 versus 1/2", c8)
        }
        "C9" => (
            "invariants: flow identity, survival sums, monotone value iteration, mode consistency",
            "structural identities",
            c9,
        ),
        _ => ("unknown claim", "", || Err(Error::UnknownName("claim".into()))),
    };
    match f() {
        Ok(o) => Claim {
            id: id.into(),
            status: Status::from_bool(o.ok),
            label: label.into(),
            expected: o.expected,
            computed: o.computed,
            anchor: anchor.into(),
        },
        Err(e) => Claim {
            id: id.into(),
            status: Status::Fail,
            label: label.into(),
            expected: "no engine error".into(),
            computed: format!("error: {e}"),
            anchor: anchor.into(),
        },
    }
}

struct Outcome {
    ok: bool,
    expected: String,
    computed: String,
}

impl Outcome {
    fn new(ok: bool, expected: impl Into<String>, computed: impl Into<String>) -> Self {
        Outcome { ok, expected: expected.into(), computed: computed.into() }
    }
}

/// Collects the first few mismatches of a multi-part check.
#[derive(Default)]
struct Mismatches(Vec<String>);

impl Mismatches {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.0.push(what());
        }
    }

    fn outcome(self, expected: &str, summary: &str) -> Outcome {
        if self.0.is_empty() {
            Outcome::new(true, expected, summary)
        } else {
            let n = self.0.len();
            let shown: Vec<String> = self.0.into_iter().take(3).collect();
            Outcome::new(false, expected, format!("{n} mismatch(es): {}", shown.join("; ")))
        }
    }
}

fn rung(n: usize) -> String {
    format!("b_{n}")
}

fn ladder() -> Result<ZooEntry> {
    zoo::by_name("example2")
}

fn c1() -> Result<Outcome> {
    let e = ladder()?;
    let support: Vec<String> = (1..=LADDER_DEPTH).map(rung).chain(["1".to_string()]).collect();
    let w = ValueFunction::from_generator(Arc::new(ladder_value));
    let r = verify_supersolution(&e.model, &w, &support)?;
    Ok(Outcome::new(r == Supersolution::FixedPoint, "fixed point", format!("{r:?}")))
}

fn c2() -> Result<Outcome> {
    let e = ladder()?;
    let fam = e.family("Lambda")?;
    let mut bad = Mismatches::default();
    for n in 3..=20u64 {
        let pi = fam.generate(n)?;
        let occ = occupation(&e.model, &pi, &e.x0, &e.solver)?;
        bad.check(occ.tail_bound.is_zero(), || format!("psi^{n} tail bound {}", occ.tail_bound));
        let marg = occ.marginal();
        for m in 1..=LADDER_DEPTH as u64 {
            let got = marg.mass_on_atom(&rung(m as usize));
            let want = psi_n_marginal(n, m);
            bad.check(got == want, || format!("psi^{n} at b_{m}: {got} vs {want}"));
        }
        let top = marg.mass_on_atom("1");
        bad.check(top.is_zero(), || format!("psi^{n} at 1: {top}"));
    }
    Ok(bad.outcome("2^-(m-1) for m <= n, 1/2 at b_{n+1}, 0 beyond and at 1", "all 18 tables exact"))
}

fn c3() -> Result<Outcome> {
    let e = ladder()?;
    let pi = e.strategy("psi")?;
    let trunc = Truncation { max_state_index: 40, ..Truncation::default() };
    let occ = occupation_countable(&e.model, &pi, &e.x0, &trunc)?;
    let mut bad = Mismatches::default();
    for m in 1..=40usize {
        let got = occ.measure.mass_on_atom(&rung(m));
        let want = Number::pow2(-(m as i64 - 1));
        bad.check(got == want, || format!("b_{m}: {got} vs {want}"));
    }
    let top = occ.measure.mass_on_atom("1");
    let gap = (&top - &Number::ratio(1, 2)).abs();
    bad.check(gap.cmp_value(&occ.tail_bound) != Ordering::Greater, || {
        format!("|mass at 1 - 1/2| = {gap} exceeds {}", occ.tail_bound)
    });
    bad.check(occ.tail_bound.cmp_value(&Number::pow2(-38)) != Ordering::Greater, || {
        format!("tail bound {} > 2^-38", occ.tail_bound)
    });
    Ok(bad.outcome(
        "b_m: 2^-(m-1) for m <= 40; mass at 1 = 1/2 within a tail bound <= 2^-38",
        &format!("mass at 1 = {top}, tail bound {}", occ.tail_bound),
    ))
}

fn c4() -> Result<Outcome> {
    let e = ladder()?;
    let fam = e.family("Lambda")?;
    let mut bad = Mismatches::default();
    let half = Number::ratio(1, 2);
    for n in 3..=20u64 {
        let t = tail_sum(&e.model, &fam.generate(n)?, &e.x0, n as usize, &e.solver)?;
        bad.check(t.value.cmp_value(&half) != Ordering::Less, || format!("psi^{n}: tail {}", t.value));
    }
    let r = uniformity_report(&e.model, fam, &e.x0, 48, &Number::float(DEFAULT_EPSILON), &e.solver)?;
    bad.check(r.verdict == UniformityVerdict::NonUniformWitnessFound, || format!("verdict {:?}", r.verdict));
    Ok(bad.outcome(
        "tail >= 1/2 for n = 3..20; non-uniform witness found",
        &format!("verdict {:?}, {} witnesses", r.verdict, r.witnesses.len()),
    ))
}

fn embedding() -> Result<ZooEntry> {
    zoo::by_name("example1")
}

fn c5() -> Result<Outcome> {
    let e = embedding()?;
    let mut bad = Mismatches::default();
    for m in 1..=20 {
        let (v, _) = e.evaluate(&Quantity::Integral { strategy: format!("pi^{m}"), function: "I{x>0}".into() })?;
        bad.check(v == Number::one(), || format!("pi^{m}: {v}"));
    }
    let (v, _) = e.evaluate(&Quantity::Integral { strategy: "pi^inf".into(), function: "I{x>0}".into() })?;
    bad.check(v.is_zero(), || format!("pi^inf: {v}"));
    let d = e.dataset("pi^m -> pi^inf")?;
    let (seq, limit) = e.dataset_measures(d)?;
    let r = check_convergence(&seq, &limit, e.battery("WS-STEP")?, d.tol)?;
    bad.check(r.diverges(), || format!("ws verdict {:?}", r.verdict));
    Ok(bad.outcome("1 for m = 1..20, 0 for pi^inf; ws-battery diverges", &format!("ws verdict {:?}", r.verdict)))
}

fn c6() -> Result<Outcome> {
    let e = embedding()?;
    let battery = e.battery("W-POLY")?;
    let limit = e.occupation_of(&e.strategy("pi^inf")?, &e.x0)?;
    let fam = e.family("pi^m")?;
    let limits: Vec<Number> =
        battery.functions().iter().map(|g| Ok(integrate(&limit, g, DEFAULT_TOL)?.value)).collect::<Result<_>>()?;
    let mut bad = Mismatches::default();
    let mut prev_max: Option<f64> = None;
    let mut final_gap = f64::NAN;
    for k in 0..=10u32 {
        let m = 1u64 << k;
        let mu = e.occupation_of(&fam.generate(m)?, &e.x0)?;
        let mut max_gap = 0.0f64;
        for (g, l) in battery.functions().iter().zip(&limits) {
            let v = integrate(&mu, g, DEFAULT_TOL)?.value;
            let gap = (&v - l).abs().to_f64();
            max_gap = max_gap.max(gap);
            if g.name() == "x+a" {
                let closed = 1.0 / m as f64 + 0.5;
                bad.check((v.to_f64() - closed).abs() <= 1e-9, || format!("x+a at m={m}: {v} vs {closed}"));
                final_gap = gap;
            }
        }
        if let Some(p) = prev_max {
            bad.check(max_gap < p, || format!("max gap at m={m} is {max_gap:e}, not below {p:e}"));
        }
        prev_max = Some(max_gap);
    }
    bad.check(final_gap <= 2f64.powi(-9), || format!("final gap {final_gap:e}"));
    let d = e.dataset("pi^m -> pi^inf")?;
    let (seq, lim) = e.dataset_measures(d)?;
    let r = check_convergence(&seq, &lim, battery, d.tol)?;
    bad.check(r.converges(), || format!("w verdict {:?}", r.verdict));
    Ok(bad.outcome(
        "max gap strictly decreasing for k <= 10, x+a gap <= 2^-9 at m = 2^10, w-battery converges",
        &format!("x+a gap {final_gap:e} at m = 1024, w verdict {:?}", r.verdict),
    ))
}

fn c7() -> Result<Outcome> {
    let e = zoo::by_name("remark2")?;
    let d = e.dataset("1/2^k -> 0")?;
    let zoo::SequenceSpec::InitialStates { strategy, starts, limit } = &d.spec else {
        return Err(Error::InvalidSequence("expected initial-state dataset".into()));
    };
    let pi = e.strategy(strategy)?;
    let pairs: Vec<(StatePoint, _)> = starts.iter().map(|x| (x.clone(), pi.clone())).collect();
    let lim = e.occupation_of(&pi, limit)?;
    let w = multi_initial_check(&e.model, &pairs, &lim, e.battery("W-POLY")?, d.tol, &e.solver)?;
    let ws = multi_initial_check(&e.model, &pairs, &lim, e.battery("WS-STEP")?, d.tol, &e.solver)?;
    let mut bad = Mismatches::default();
    bad.check(w.converges(), || format!("w verdict {:?}", w.verdict));
    bad.check(matches!(&ws.verdict, Verdict::Diverges { witness, .. } if witness == "I{y=0}"), || {
        format!("ws verdict {:?}", ws.verdict)
    });
    let trace = ws.trace("I{y=0}").ok_or_else(|| Error::UnknownName("I{y=0}".into()))?;
    bad.check(trace.limit_integral == Number::one(), || format!("limit integral {}", trace.limit_integral));
    for r in &trace.rows {
        bad.check(r.integral == Number::zero() && r.gap == 1.0, || format!("{}: integral {}", r.label, r.integral));
    }
    Ok(bad.outcome("w converges; I{y=0} gap exactly 1", &format!("w {:?}, ws {:?}", w.verdict, ws.verdict)))
}

/// `g(x0, 0) + ∫_0^1 (g(x,0) + g(x,1))/2 dx` by a midpoint sum.
fn randomized_oracle(g: &TestFunction, points: usize) -> Result<f64> {
    let start = g.eval(&StateView::Atom { name: "x0", coordinate: None }, Some(&ActionView::Named("0")))?;
    let avg = |x: f64| {
        let s = StateView::Segment { label: "y", x };
        let a0 = g.eval(&s, Some(&ActionView::Named("0"))).unwrap_or(f64::NAN);
        let a1 = g.eval(&s, Some(&ActionView::Named("1"))).unwrap_or(f64::NAN);
        0.5 * (a0 + a1)
    };
    Ok(start + riemann_midpoint(avg, &rat_int(0), &rat_int(1), points))
}

fn c8() -> Result<Outcome> {
    let e = zoo::by_name("remark1")?;
    let fam = e.family("f_k")?;
    let mut bad = Mismatches::default();
    let mut last = None;
    for k in 1..=12u64 {
        let mu = e.occupation_of(&fam.generate(k)?, &e.x0)?;
        let d = determinism_defect(&mu, &e.model.actions)?;
        bad.check(d.is_zero(), || format!("defect of f_{k}: {d}"));
        last = Some(mu);
    }
    let limit = e.occupation_of(&e.strategy("randomized")?, &e.x0)?;
    let dl = determinism_defect(&limit, &e.model.actions)?;
    bad.check(dl == Number::ratio(1, 2), || format!("defect of limit: {dl}"));
    let finest = last.expect("k range is nonempty");
    let mut worst = 0.0f64;
    for g in e.battery("W-POLY")?.functions() {
        let oracle = randomized_oracle(g, 1 << 16)?;
        let v = integrate(&finest, g, DEFAULT_TOL)?.value.to_f64();
        worst = worst.max((v - oracle).abs());
        bad.check((v - oracle).abs() <= 1e-4, || format!("{} at f_12: {v} vs oracle {oracle}", g.name()));
    }
    Ok(bad.outcome(
        "defect 0 for k <= 12, limit integrals within 1e-4, limit defect 1/2",
        &format!("limit defect {dl}, worst integral gap {worst:e}"),
    ))
}

fn c9() -> Result<Outcome> {
    let mut bad = Mismatches::default();
    let mut configs = 0usize;

    let lad = ladder()?;
    let fam = lad.family("Lambda")?;
    for n in 3..=20u64 {
        let pi = fam.generate(n)?;
        let occ = occupation(&lad.model, &pi, &lad.x0, &lad.solver)?;
        for c in flow_equation(&lad.model, &occ, &lad.x0)? {
            bad.check(c.holds(), || format!("psi^{n} flow at {}: {} vs {}", c.cell, c.occupation, c.inflow));
        }
        let et = expected_time_by_survival(&lad.model, &pi, &lad.x0, 4096)?;
        bad.check(et == occ.total_mass(), || format!("psi^{n}: survival sum {et} vs mass {}", occ.total_mass()));
        configs += 1;
    }
    let one = zoo::by_name("remark2")?;
    let pi = one.strategy("a*")?;
    for a in one.model.states.y_atoms() {
        let x0 = StatePoint::atom(a.name.clone());
        let occ = occupation(&one.model, &pi, &x0, &one.solver)?;
        for c in flow_equation(&one.model, &occ, &x0)? {
            bad.check(c.holds(), || format!("{} flow at {}", a.name, c.cell));
        }
        let et = expected_time_by_survival(&one.model, &pi, &x0, 8)?;
        bad.check(et == occ.total_mass(), || format!("{}: survival sum {et}", a.name));
        configs += 1;
    }

    let support: Vec<String> = (1..=20).map(rung).chain(["1".to_string()]).collect();
    let vi = value_iterate(&lad.model, &support, 200)?;
    bad.check(vi.monotone, || "value iteration on b_1..b_20 not monotone".into());

    let mut datasets = 0usize;
    for e in zoo::all()? {
        let (Some(w), Some(ws)) = (e.battery_for(Mode::W), e.battery_for(Mode::Ws)) else { continue };
        for d in &e.datasets {
            let (seq, lim) = e.dataset_measures(d)?;
            let rw = check_convergence(&seq, &lim, w, d.tol)?;
            let rws = check_convergence(&seq, &lim, ws, d.tol)?;
            bad.check(modes_consistent(&rw, &rws), || format!("{} / {}: ws converges but w does not", e.name, d.name));
            datasets += 1;
        }
    }
    Ok(bad.outcome(
        "flow identity and survival sums exact on atomic configurations; monotone value iteration; consistent modes",
        &format!("{configs} atomic configurations, 200 value iterations, {datasets} datasets"),
    ))
}

/// One claim per expected-table row of a model.
pub fn table_claims(e: &ZooEntry) -> Vec<Claim> {
    e.expected
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let (status, computed) = match e.evaluate(&x.quantity) {
                Ok((v, err)) => {
                    let ok = zoo::reproduces(&x.value, &v, err);
                    let shown = if err > 0.0 { format!("{v} (±{err:e})") } else { v.to_string() };
                    (Status::from_bool(ok), shown)
                }
                Err(err) => (Status::Fail, format!("error: {err}")),
            };
            Claim {
                id: format!("{}.{}", e.name, i + 1),
                status,
                label: x.label.clone(),
                expected: x.value.to_string(),
                computed,
                anchor: x.anchor.clone(),
            }
        })
        .collect()
}
