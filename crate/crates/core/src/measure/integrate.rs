use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{
    ActionAtom, ActionMeasure, Component, FunctionDomain, HybridMeasure, MeasureKind, StatePart, TestFunction,
};
use super::{ActionView, StateView};
use crate::error::{Error, Result};
use crate::number::{rat_to_f64, Number};

pub const DEFAULT_TOL: f64 = 1e-12;
const DEFAULT_BUDGET: usize = 1 << 14;
const INITIAL_PANELS: usize = 8;

/// Value of `∫ g dμ` with an absolute error bound; the bound is zero on exact
/// paths.
#[derive(Clone, Debug, PartialEq)]
pub struct Integral {
    pub value: Number,
    pub abs_error: Number,
}

impl Integral {
    pub fn is_exact(&self) -> bool {
        self.value.is_exact() && self.abs_error.is_zero()
    }

    fn exact(value: Number) -> Self {
        Integral { value, abs_error: Number::zero() }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn panel(f: &mut dyn FnMut(f64) -> Result<f64>, a: f64, b: f64) -> Result<Panel> {
    let h = b - a;
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
    let (fl, fr) = (f(0.5 * (a + m))?, f(0.5 * (m + b))?);
    // One- and two-panel midpoint and trapezoid rules; Simpson is their
    // weighted mean, and the spread between levels bounds the error.
    let mid1 = h * fm;
    let trap1 = 0.5 * h * (fa + fb);
    let mid2 = 0.5 * h * (fl + fr);
    let trap2 = 0.5 * (trap1 + mid1);
    let s1 = (2.0 * mid1 + trap1) / 3.0;
    let s2 = (2.0 * mid2 + trap2) / 3.0;
    let err = (s2 - s1).abs().max((mid2 - trap2).abs() * f64::EPSILON);
    Ok(Panel { a, b, value: s2, err })
}

/// Global adaptive bisection on `[a, b]`. Returns `(value, error estimate)`,
/// or `Err((best value, error estimate))` when the panel budget runs out.
pub fn adaptive_quadrature(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    tol: f64,
    max_panels: usize,
) -> Result<std::result::Result<(f64, f64), (f64, f64)>> {
    if b <= a {
        return Ok(Ok((0.0, 0.0)));
    }
    let mut heap = BinaryHeap::new();
    let w = (b - a) / INITIAL_PANELS as f64;
    for i in 0..INITIAL_PANELS {
        let lo = a + w * i as f64;
        let hi = if i + 1 == INITIAL_PANELS { b } else { lo + w };
        heap.push(panel(f, lo, hi)?);
    }
    loop {
        let err: f64 = heap.iter().map(|p| p.err).sum();
        if err <= tol {
            return Ok(Ok((heap.iter().map(|p| p.value).sum(), err)));
        }
        if heap.len() >= max_panels {
            return Ok(Err((heap.iter().map(|p| p.value).sum(), err)));
        }
        let worst = heap.pop().expect("nonempty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            heap.push(worst);
            return Ok(Err((heap.iter().map(|p| p.value).sum(), err)));
        }
        heap.push(panel(f, worst.a, m)?);
        heap.push(panel(f, m, worst.b)?);
    }
}

/// `∫ g dμ` with the default panel budget.
pub fn integrate(mu: &HybridMeasure, g: &TestFunction, tol: f64) -> Result<Integral> {
    integrate_with_budget(mu, g, tol, DEFAULT_BUDGET)
}

/// `∫ g dμ`. Structured forms integrate exactly; otherwise atoms are
/// evaluated pointwise and densities by adaptive quadrature.
pub fn integrate_with_budget(mu: &HybridMeasure, g: &TestFunction, tol: f64, max_panels: usize) -> Result<Integral> {
    if g.domain() == FunctionDomain::StateAction && mu.kind == MeasureKind::State {
        return Err(Error::DomainMismatch {
            left: format!("{}/state", mu.domain),
            right: format!("{} on Y×A", g.name()),
        });
    }
    let n = mu.components.len().max(1) as f64;
    let mut value = Number::zero();
    let mut err = Number::zero();
    for c in &mu.components {
        let r = integrate_component(c, g, tol / n, max_panels)?;
        value = value + r.value;
        err = err + r.abs_error;
    }
    Ok(Integral { value, abs_error: err })
}

fn integrate_component(c: &Component, g: &TestFunction, tol: f64, max_panels: usize) -> Result<Integral> {
    let action = if g.domain() == FunctionDomain::State { None } else { c.action.as_ref() };
    if let Some(form) = g.structured() {
        if let Some(v) = form.integrate_product(&c.state, action) {
            let action_mass = match (&c.action, action) {
                (Some(a), None) => a.mass(),
                _ => Number::one(),
            };
            let value = &c.weight * &(v * action_mass);
            let abs_error = if value.is_exact() { Number::zero() } else { Number::float(value.error_bound()) };
            return Ok(Integral { value, abs_error });
        }
    }
    let action_mass = match (&c.action, action) {
        (Some(a), None) => a.mass().to_f64(),
        _ => 1.0,
    };
    let weight = c.weight.to_f64() * action_mass;
    if weight == 0.0 {
        return Ok(Integral::exact(Number::zero()));
    }
    let scaled_tol = tol / weight.abs();
    let (v, e) = match &c.state {
        StatePart::Atom { name, coordinate } => {
            let sv = StateView::Atom { name, coordinate: coordinate.as_ref().map(rat_to_f64) };
            over_actions(g, &sv, action, scaled_tol, max_panels)?
        }
        StatePart::Point { segment, at } => {
            let sv = StateView::Segment { label: segment, x: rat_to_f64(at) };
            over_actions(g, &sv, action, scaled_tol, max_panels)?
        }
        StatePart::Density { segment, density } => {
            let pieces: Vec<_> = density.pieces().collect();
            let mut total = 0.0;
            let mut err = 0.0;
            for (l, u, h) in &pieces {
                let h = h.to_f64();
                if h == 0.0 {
                    continue;
                }
                let (lo, hi) = (rat_to_f64(l), rat_to_f64(u));
                let piece_tol = scaled_tol / (pieces.len() as f64 * h.abs());
                let inner_tol = piece_tol / (2.0 * (hi - lo));
                let mut f = |x: f64| -> Result<f64> {
                    let sv = StateView::Segment { label: segment, x };
                    Ok(over_actions(g, &sv, action, inner_tol, max_panels)?.0)
                };
                let (v, e) = match adaptive_quadrature(&mut f, lo, hi, piece_tol / 2.0, max_panels)? {
                    Ok(r) => r,
                    Err((estimate, error_estimate)) => {
                        return Err(Error::QuadratureFailed {
                            function: g.name().to_string(),
                            estimate: estimate * h * weight,
                            error_estimate: error_estimate * h * weight,
                        })
                    }
                };
                let inner_err = if action.is_some_and(|a| a.density.is_some()) { inner_tol * (hi - lo) } else { 0.0 };
                total += h * v;
                err += h.abs() * (e + inner_err);
            }
            (total, err)
        }
    };
    let value = weight * v;
    let abs_error = weight.abs() * e + value.abs() * 4.0 * f64::EPSILON;
    Ok(Integral { value: Number::approx(value, abs_error), abs_error: Number::float(abs_error) })
}

/// `∫ g(s, a) ν(da)`, or `g(s)` when no action part is used.
fn over_actions(
    g: &TestFunction,
    s: &StateView<'_>,
    action: Option<&ActionMeasure>,
    tol: f64,
    max_panels: usize,
) -> Result<(f64, f64)> {
    let Some(nu) = action else {
        return Ok((g.eval(s, None)?, 0.0));
    };
    let mut total = 0.0;
    for a in &nu.atoms {
        let av = match &a.action {
            ActionAtom::Named(n) => ActionView::Named(n),
            ActionAtom::At(x) => ActionView::At(rat_to_f64(x)),
        };
        total += a.weight.to_f64() * g.eval(s, Some(&av))?;
    }
    let mut err = 0.0;
    if let Some(d) = &nu.density {
        let pieces: Vec<_> = d.pieces().collect();
        for (l, u, h) in &pieces {
            let h = h.to_f64();
            if h == 0.0 {
                continue;
            }
            let mut f = |x: f64| g.eval(s, Some(&ActionView::At(x)));
            let piece_tol = tol / (pieces.len() as f64 * h.abs());
            match adaptive_quadrature(&mut f, rat_to_f64(l), rat_to_f64(u), piece_tol, max_panels)? {
                Ok((v, e)) => {
                    total += h * v;
                    err += h.abs() * e;
                }
                Err((estimate, error_estimate)) => {
                    return Err(Error::QuadratureFailed {
                        function: g.name().to_string(),
                        estimate: h * estimate,
                        error_estimate: h.abs() * error_estimate,
                    })
                }
            }
        }
    }
    Ok((total, err))
}
