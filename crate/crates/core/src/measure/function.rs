//! Bounded test functions on `Y × A` or on `Y`.
//!
//! Every function has an evaluator used for quadrature and point checks. A
//! function may also carry a structured form: a finite sum of products of a
//! state factor and an action factor, each piecewise polynomial over an
//! explicit partition. Against piecewise-constant densities and rational atoms
//! the structured form integrates exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::{ActionAtom, ActionMeasure, Density, StatePart};
use crate::error::{Error, Result};
use crate::number::{rat_to_f64, Number};

/// Declared regularity. `Continuous ⊂ Caratheodory ⊂ Measurable`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionClass {
    Continuous,
    Caratheodory,
    Measurable,
}

impl FunctionClass {
    /// Whether every function of class `self` also belongs to `other`.
    pub fn is_within(self, other: FunctionClass) -> bool {
        self <= other
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionDomain {
    StateAction,
    State,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StateView<'a> {
    Atom { name: &'a str, coordinate: Option<f64> },
    Segment { label: &'a str, x: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActionView<'a> {
    Named(&'a str),
    At(f64),
}

/// `c0 + c1 x + c2 x² + …`
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial(pub Vec<BigRational>);

impl Polynomial {
    pub fn constant(c: BigRational) -> Self {
        Polynomial(vec![c])
    }

    pub fn identity() -> Self {
        Polynomial(vec![BigRational::zero(), BigRational::one()])
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        self.0.iter().rev().fold(BigRational::zero(), |acc, c| acc * x + c)
    }

    /// `∫_l^u p(x) dx`
    pub fn integral(&self, l: &BigRational, u: &BigRational) -> BigRational {
        let anti = |x: &BigRational| {
            let mut acc = BigRational::zero();
            let mut pow = x.clone();
            for (k, c) in self.0.iter().enumerate() {
                acc += c * &pow / BigRational::from_integer((k as i64 + 1).into());
                pow = &pow * x;
            }
            acc
        };
        anti(u) - anti(l)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointValue {
    pub at: BigRational,
    pub value: BigRational,
}

/// Piecewise polynomial on `[breaks[i], breaks[i+1])` (last piece closed), or
/// a single global polynomial when `breaks` is empty. Isolated point values
/// override the pieces.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePolynomial {
    breaks: Vec<BigRational>,
    pieces: Vec<Polynomial>,
    points: Vec<PointValue>,
}

impl PiecewisePolynomial {
    pub fn global(p: Polynomial) -> Self {
        PiecewisePolynomial { breaks: vec![], pieces: vec![p], points: vec![] }
    }

    pub fn constant(c: BigRational) -> Self {
        Self::global(Polynomial::constant(c))
    }

    pub fn on_pieces(breaks: Vec<BigRational>, pieces: Vec<Polynomial>) -> Result<Self> {
        if breaks.len() != pieces.len() + 1 || pieces.is_empty() || breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMeasure(
                "piecewise polynomial needs increasing breaks, one more than pieces".into(),
            ));
        }
        Ok(PiecewisePolynomial { breaks, pieces, points: vec![] })
    }

    /// `I{x > threshold}` on `[lower, upper]`.
    pub fn indicator_above(threshold: BigRational, lower: BigRational, upper: BigRational) -> Result<Self> {
        let zero = Polynomial::constant(BigRational::zero());
        let one = Polynomial::constant(BigRational::one());
        let pp = if threshold < lower {
            Self::on_pieces(vec![lower, upper], vec![one])?
        } else if threshold >= upper {
            Self::on_pieces(vec![lower, upper], vec![zero])?
        } else if threshold == lower {
            Self::on_pieces(vec![lower, upper], vec![one])?
        } else {
            Self::on_pieces(vec![lower, threshold.clone(), upper], vec![zero, one])?
        };
        Ok(pp.with_point(threshold, BigRational::zero()))
    }

    pub fn with_point(mut self, at: BigRational, value: BigRational) -> Self {
        self.points.retain(|p| p.at != at);
        self.points.push(PointValue { at, value });
        self
    }

    pub fn eval(&self, x: &BigRational) -> Option<BigRational> {
        if let Some(p) = self.points.iter().find(|p| &p.at == x) {
            return Some(p.value.clone());
        }
        if self.breaks.is_empty() {
            return Some(self.pieces[0].eval(x));
        }
        let last = self.breaks.len() - 1;
        if x < &self.breaks[0] || x > &self.breaks[last] {
            return None;
        }
        let i = self.breaks.partition_point(|b| b <= x).saturating_sub(1).min(self.pieces.len() - 1);
        Some(self.pieces[i].eval(x))
    }

    /// `∫ p · d` for a piecewise-constant density; `None` if the density
    /// leaves the partition.
    pub fn integrate_density(&self, d: &Density) -> Option<Number> {
        let mut total = Number::zero();
        for (l, u, h) in d.pieces() {
            total = total + h * &Number::Exact(self.integral(l, u)?);
        }
        Some(total)
    }

    fn integral(&self, l: &BigRational, u: &BigRational) -> Option<BigRational> {
        if self.breaks.is_empty() {
            return Some(self.pieces[0].integral(l, u));
        }
        if l < &self.breaks[0] || u > self.breaks.last()? {
            return None;
        }
        let mut acc = BigRational::zero();
        for (w, p) in self.breaks.windows(2).zip(&self.pieces) {
            let lo = l.max(&w[0]);
            let hi = u.min(&w[1]);
            if lo < hi {
                acc += p.integral(lo, hi);
            }
        }
        Some(acc)
    }

    fn sample_points(&self) -> Vec<BigRational> {
        let mut out: Vec<BigRational> = self.points.iter().map(|p| p.at.clone()).collect();
        if self.breaks.is_empty() {
            out.extend([BigRational::zero(), BigRational::new(1.into(), 2.into()), BigRational::one()]);
        } else {
            out.extend(self.breaks.iter().cloned());
            out.extend(self.breaks.windows(2).map(|w| (&w[0] + &w[1]) / BigRational::from_integer(2.into())));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AtomValues {
    ByName {
        values: BTreeMap<String, BigRational>,
        default: BigRational,
    },
    /// Polynomial in the atom's coordinate.
    Coordinate(PiecewisePolynomial),
}

/// State factor of a structured term.
#[derive(Clone, Debug, PartialEq)]
pub struct StateFactor {
    pub atoms: AtomValues,
    pub segments: BTreeMap<String, PiecewisePolynomial>,
    /// Used on segments not listed in `segments`.
    pub other_segments: Option<PiecewisePolynomial>,
}

impl StateFactor {
    pub fn constant(c: BigRational) -> Self {
        StateFactor {
            atoms: AtomValues::ByName { values: BTreeMap::new(), default: c.clone() },
            segments: BTreeMap::new(),
            other_segments: Some(PiecewisePolynomial::constant(c)),
        }
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    /// Polynomial in the real coordinate of atoms and segment points alike.
    pub fn coordinate(p: Polynomial) -> Self {
        let pp = PiecewisePolynomial::global(p);
        StateFactor { atoms: AtomValues::Coordinate(pp.clone()), segments: BTreeMap::new(), other_segments: Some(pp) }
    }

    /// Values by atom name; zero on segments unless overridden.
    pub fn by_name<S: Into<String>>(values: impl IntoIterator<Item = (S, BigRational)>, default: BigRational) -> Self {
        StateFactor {
            atoms: AtomValues::ByName { values: values.into_iter().map(|(k, v)| (k.into(), v)).collect(), default },
            segments: BTreeMap::new(),
            other_segments: Some(PiecewisePolynomial::constant(BigRational::zero())),
        }
    }

    /// Per-segment piecewise polynomials; zero on atoms.
    pub fn on_segments<S: Into<String>>(segments: impl IntoIterator<Item = (S, PiecewisePolynomial)>) -> Self {
        StateFactor {
            atoms: AtomValues::ByName { values: BTreeMap::new(), default: BigRational::zero() },
            segments: segments.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            other_segments: None,
        }
    }

    fn segment_poly(&self, label: &str) -> Option<&PiecewisePolynomial> {
        self.segments.get(label).or(self.other_segments.as_ref())
    }

    pub fn eval_atom(&self, name: &str, coordinate: Option<&BigRational>) -> Option<BigRational> {
        match &self.atoms {
            AtomValues::ByName { values, default } => Some(values.get(name).unwrap_or(default).clone()),
            AtomValues::Coordinate(pp) => pp.eval(coordinate?),
        }
    }

    pub fn eval_point(&self, segment: &str, x: &BigRational) -> Option<BigRational> {
        self.segment_poly(segment)?.eval(x)
    }

    /// `∫ factor d(part)`
    pub fn integrate(&self, part: &StatePart) -> Option<Number> {
        match part {
            StatePart::Atom { name, coordinate } => self.eval_atom(name, coordinate.as_ref()).map(Number::Exact),
            StatePart::Point { segment, at } => self.eval_point(segment, at).map(Number::Exact),
            StatePart::Density { segment, density } => self.segment_poly(segment)?.integrate_density(density),
        }
    }
}

/// Action factor of a structured term.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionFactor {
    pub named: BTreeMap<String, BigRational>,
    /// Value on unnamed actions, and on the interval when `interval` is `None`.
    pub default: BigRational,
    pub interval: Option<PiecewisePolynomial>,
}

impl ActionFactor {
    pub fn constant(c: BigRational) -> Self {
        ActionFactor { named: BTreeMap::new(), default: c, interval: None }
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn interval(pp: PiecewisePolynomial) -> Self {
        ActionFactor { named: BTreeMap::new(), default: BigRational::zero(), interval: Some(pp) }
    }

    pub fn named<S: Into<String>>(values: impl IntoIterator<Item = (S, BigRational)>, default: BigRational) -> Self {
        ActionFactor { named: values.into_iter().map(|(k, v)| (k.into(), v)).collect(), default, interval: None }
    }

    pub fn eval(&self, a: &ActionAtom) -> Option<BigRational> {
        match a {
            ActionAtom::Named(n) => Some(self.named.get(n).unwrap_or(&self.default).clone()),
            ActionAtom::At(x) => match &self.interval {
                Some(pp) => pp.eval(x),
                None => Some(self.default.clone()),
            },
        }
    }

    pub fn integrate(&self, nu: &ActionMeasure) -> Option<Number> {
        let mut total = Number::zero();
        for a in &nu.atoms {
            total = total + &a.weight * &Number::Exact(self.eval(&a.action)?);
        }
        if let Some(d) = &nu.density {
            let part = match &self.interval {
                Some(pp) => pp.integrate_density(d)?,
                None => d.mass() * Number::Exact(self.default.clone()),
            };
            total = total + part;
        }
        Some(total)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coeff: BigRational,
    pub state: StateFactor,
    pub action: ActionFactor,
}

impl Term {
    pub fn new(coeff: BigRational, state: StateFactor, action: ActionFactor) -> Self {
        Term { coeff, state, action }
    }
}

/// Finite sum of product terms.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Structured {
    pub terms: Vec<Term>,
}

impl Structured {
    pub fn new(terms: Vec<Term>) -> Self {
        Structured { terms }
    }

    pub fn single(state: StateFactor, action: ActionFactor) -> Self {
        Structured { terms: vec![Term::new(BigRational::one(), state, action)] }
    }

    /// Exact `∫ g d(state ⊗ action)` for a product component (without its
    /// weight). `action = None` integrates the state factor alone.
    pub fn integrate_product(&self, state: &StatePart, action: Option<&ActionMeasure>) -> Option<Number> {
        let mut total = Number::zero();
        for t in &self.terms {
            let s = t.state.integrate(state)?;
            let a = match action {
                Some(nu) => t.action.integrate(nu)?,
                None => Number::one(),
            };
            total = total + Number::Exact(t.coeff.clone()) * s * a;
        }
        Some(total)
    }

    /// Evaluation at float coordinates, routed through exact arithmetic on the
    /// binary value of each coordinate.
    pub fn eval_f64(&self, s: &StateView<'_>, a: Option<&ActionView<'_>>) -> f64 {
        let exact = |x: f64| BigRational::from_float(x);
        let mut total = BigRational::zero();
        for t in &self.terms {
            let sv = match s {
                StateView::Atom { name, coordinate } => {
                    let c = coordinate.and_then(exact);
                    t.state.eval_atom(name, c.as_ref())
                }
                StateView::Segment { label, x } => exact(*x).and_then(|x| t.state.eval_point(label, &x)),
            };
            let av = match a {
                None => Some(BigRational::one()),
                Some(ActionView::Named(n)) => t.action.eval(&ActionAtom::Named((*n).to_string())),
                Some(ActionView::At(x)) => exact(*x).and_then(|x| t.action.eval(&ActionAtom::At(x))),
            };
            match (sv, av) {
                (Some(sv), Some(av)) => total += &t.coeff * sv * av,
                _ => return f64::NAN,
            }
        }
        rat_to_f64(&total)
    }

    fn state_samples(&self) -> Vec<(String, Option<BigRational>, bool)> {
        // (name-or-label, coordinate, is_segment)
        let mut out = Vec::new();
        for t in &self.terms {
            match &t.state.atoms {
                AtomValues::ByName { values, .. } => out.extend(values.keys().map(|k| (k.clone(), None, false))),
                AtomValues::Coordinate(pp) => {
                    out.extend(pp.sample_points().into_iter().map(|x| ("?".to_string(), Some(x), false)))
                }
            }
            for (label, pp) in &t.state.segments {
                out.extend(pp.sample_points().into_iter().map(|x| (label.clone(), Some(x), true)));
            }
        }
        out
    }

    fn action_samples(&self) -> Vec<ActionAtom> {
        let mut out = Vec::new();
        for t in &self.terms {
            out.extend(t.action.named.keys().map(|k| ActionAtom::Named(k.clone())));
            if let Some(pp) = &t.action.interval {
                out.extend(pp.sample_points().into_iter().map(ActionAtom::At));
            }
        }
        out
    }
}

pub type Evaluator = Arc<dyn Fn(&StateView<'_>, Option<&ActionView<'_>>) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct TestFunction {
    name: String,
    class: FunctionClass,
    domain: FunctionDomain,
    bound: f64,
    evaluator: Evaluator,
    structured: Option<Arc<Structured>>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("class", &self.class)
            .field("domain", &self.domain)
            .field("bound", &self.bound)
            .field("structured", &self.structured.is_some())
            .finish()
    }
}

impl TestFunction {
    pub fn from_fn<F>(name: impl Into<String>, class: FunctionClass, domain: FunctionDomain, bound: f64, f: F) -> Self
    where
        F: Fn(&StateView<'_>, Option<&ActionView<'_>>) -> f64 + Send + Sync + 'static,
    {
        TestFunction { name: name.into(), class, domain, bound, evaluator: Arc::new(f), structured: None }
    }

    /// Function given by a structured form; the evaluator is derived from it.
    pub fn from_structured(
        name: impl Into<String>,
        class: FunctionClass,
        domain: FunctionDomain,
        bound: f64,
        form: Structured,
    ) -> Self {
        let form = Arc::new(form);
        let f = form.clone();
        TestFunction {
            name: name.into(),
            class,
            domain,
            bound,
            evaluator: Arc::new(move |s, a| f.eval_f64(s, a)),
            structured: Some(form),
        }
    }

    /// Attach a structured form to an evaluator-defined function, checking
    /// that both agree at the partition sample points of the form.
    pub fn with_structured(mut self, form: Structured) -> Result<Self> {
        let states = form.state_samples();
        let mut actions: Vec<Option<ActionAtom>> = form.action_samples().into_iter().map(Some).collect();
        if actions.is_empty() || self.domain == FunctionDomain::State {
            actions = vec![None];
        }
        for (label, coord, is_segment) in &states {
            let cf = coord.as_ref().map(rat_to_f64);
            let sv = if *is_segment {
                StateView::Segment { label, x: cf.unwrap_or(0.0) }
            } else {
                StateView::Atom { name: label, coordinate: cf }
            };
            for a in &actions {
                let av = a.as_ref().map(|a| match a {
                    ActionAtom::Named(n) => ActionView::Named(n),
                    ActionAtom::At(x) => ActionView::At(rat_to_f64(x)),
                });
                let want = form.eval_f64(&sv, av.as_ref());
                if want.is_nan() {
                    continue;
                }
                let got = (self.evaluator)(&sv, av.as_ref());
                if (got - want).abs() > 1e-9 * (1.0 + want.abs()) {
                    return Err(Error::InvalidBattery(format!(
                        "structured form of {:?} disagrees with its evaluator at {sv:?}, {av:?}: {got} vs {want}",
                        self.name
                    )));
                }
            }
        }
        self.structured = Some(Arc::new(form));
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn class(&self) -> FunctionClass {
        self.class
    }

    pub fn domain(&self) -> FunctionDomain {
        self.domain
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn structured(&self) -> Option<&Structured> {
        self.structured.as_deref()
    }

    /// Evaluate, enforcing the declared bound.
    pub fn eval(&self, s: &StateView<'_>, a: Option<&ActionView<'_>>) -> Result<f64> {
        let a = if self.domain == FunctionDomain::State { None } else { a };
        let v = (self.evaluator)(s, a);
        if !v.is_finite() || v.abs() > self.bound * (1.0 + 1e-12) {
            return Err(Error::BoundViolation { function: self.name.clone(), value: v, bound: self.bound });
        }
        Ok(v)
    }

    /// Exact value at a rational point when a structured form exists.
    pub fn eval_exact(&self, s: &StatePart, a: Option<&ActionAtom>) -> Option<BigRational> {
        let form = self.structured.as_ref()?;
        if matches!(s, StatePart::Density { .. }) {
            return None;
        }
        let mut total = BigRational::zero();
        for t in &form.terms {
            let sv = t.state.integrate(s)?.as_exact()?.clone();
            let av = match (a, self.domain) {
                (Some(a), FunctionDomain::StateAction) => t.action.eval(a)?,
                _ => BigRational::one(),
            };
            total += &t.coeff * sv * av;
        }
        Some(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::{rat, rat_int};

    #[test]
    fn polynomial_integral() {
        // ∫_0^1 (1 + 2x + 3x²) dx = 1 + 1 + 1
        let p = Polynomial(vec![rat_int(1), rat_int(2), rat_int(3)]);
        assert_eq!(p.integral(&rat_int(0), &rat_int(1)), rat_int(3));
        assert_eq!(p.eval(&rat(1, 2)), rat(11, 4));
    }

    #[test]
    fn indicator_above_zero() {
        let pp = PiecewisePolynomial::indicator_above(rat_int(0), rat_int(0), rat_int(1)).unwrap();
        assert_eq!(pp.eval(&rat_int(0)), Some(rat_int(0)));
        assert_eq!(pp.eval(&rat(1, 100)), Some(rat_int(1)));
        assert_eq!(pp.eval(&rat_int(1)), Some(rat_int(1)));
        assert_eq!(pp.eval(&rat_int(2)), None);
        let d = Density::uniform(rat_int(0), rat(1, 9)).unwrap();
        assert_eq!(pp.integrate_density(&d), Some(Number::one()));
    }

    #[test]
    fn indicator_interior_threshold() {
        let pp = PiecewisePolynomial::indicator_above(rat(1, 2), rat_int(0), rat_int(1)).unwrap();
        assert_eq!(pp.eval(&rat(1, 2)), Some(rat_int(0)));
        assert_eq!(pp.eval(&rat(1, 4)), Some(rat_int(0)));
        assert_eq!(pp.eval(&rat(3, 4)), Some(rat_int(1)));
        let d = Density::uniform(rat_int(0), rat_int(1)).unwrap();
        assert_eq!(pp.integrate_density(&d), Some(Number::ratio(1, 2)));
    }

    #[test]
    fn bound_is_enforced() {
        let f = TestFunction::from_fn("big", FunctionClass::Measurable, FunctionDomain::State, 1.0, |_, _| 2.0);
        let s = StateView::Atom { name: "a", coordinate: None };
        assert!(matches!(f.eval(&s, None), Err(Error::BoundViolation { .. })));
    }

    #[test]
    fn structured_agreement_check() {
        let form = Structured::single(StateFactor::coordinate(Polynomial::identity()), ActionFactor::one());
        let good = TestFunction::from_fn("x", FunctionClass::Continuous, FunctionDomain::State, 1.0, |s, _| match s {
            StateView::Atom { coordinate, .. } => coordinate.unwrap_or(0.0),
            StateView::Segment { x, .. } => *x,
        });
        assert!(good.with_structured(form.clone()).is_ok());
        let bad = TestFunction::from_fn("x", FunctionClass::Continuous, FunctionDomain::State, 1.0, |_, _| 0.25);
        assert!(bad.with_structured(form).is_err());
    }

    #[test]
    fn class_inclusions() {
        assert!(FunctionClass::Continuous.is_within(FunctionClass::Caratheodory));
        assert!(FunctionClass::Caratheodory.is_within(FunctionClass::Measurable));
        assert!(!FunctionClass::Measurable.is_within(FunctionClass::Caratheodory));
    }
}
