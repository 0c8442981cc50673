//! Finite nonnegative measures on `Y × A` and on `Y`.
//!
//! A [`HybridMeasure`] is a finite sum of product components. Each component
//! pairs a state part (atom, segment point, or piecewise-constant density on a
//! segment) with an optional action part (weighted action atoms plus an
//! optional piecewise-constant density on the action interval) and a
//! nonnegative weight. The component's mass is
//! `weight × mass(state part) × mass(action part)`.

mod density;
mod function;
mod integrate;

use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

pub use density::Density;
pub use function::{
    ActionFactor, ActionView, AtomValues, FunctionClass, FunctionDomain, PiecewisePolynomial, PointValue, Polynomial,
    StateFactor, StateView, Structured, Term, TestFunction,
};
pub use integrate::{adaptive_quadrature, integrate, integrate_with_budget, Integral, DEFAULT_TOL};

use crate::error::{Error, Result};
use crate::number::{rational_str, Number};
use crate::spaces::{StatePoint, StateSpace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StatePart {
    Atom {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none", with = "rational_str::option")]
        coordinate: Option<BigRational>,
    },
    Point {
        segment: String,
        #[serde(with = "rational_str")]
        at: BigRational,
    },
    Density {
        segment: String,
        density: Density,
    },
}

impl StatePart {
    pub fn atom(space: &StateSpace, name: &str) -> Result<Self> {
        let a = space.atom(name)?;
        Ok(StatePart::Atom { name: a.name.clone(), coordinate: a.coordinate.clone() })
    }

    pub fn from_point(space: &StateSpace, p: &StatePoint) -> Result<Self> {
        p.check(space)?;
        match p {
            StatePoint::Atom { name } => StatePart::atom(space, name),
            StatePoint::Point { segment, at } => Ok(StatePart::Point { segment: segment.clone(), at: at.clone() }),
        }
    }

    pub fn mass(&self) -> Number {
        match self {
            StatePart::Density { density, .. } => density.mass(),
            _ => Number::one(),
        }
    }

    /// Key identifying the part for merging purposes.
    pub(crate) fn merge_key(&self) -> String {
        match self {
            StatePart::Atom { name, .. } => format!("atom:{name}"),
            StatePart::Point { segment, at } => format!("point:{segment}@{at}"),
            StatePart::Density { segment, density } => format!("density:{segment}:{}", density.key()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionAtom {
    Named(String),
    At(#[serde(with = "rational_str")] BigRational),
}

impl std::fmt::Display for ActionAtom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ActionAtom::Named(n) => write!(f, "{n}"),
            ActionAtom::At(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedAction {
    pub action: ActionAtom,
    pub weight: Number,
}

/// Measure on the action space: weighted atoms plus an optional density.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionMeasure {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<WeightedAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Density>,
}

impl ActionMeasure {
    pub fn dirac(action: ActionAtom) -> Self {
        ActionMeasure { atoms: vec![WeightedAction { action, weight: Number::one() }], density: None }
    }

    pub fn named(name: impl Into<String>) -> Self {
        Self::dirac(ActionAtom::Named(name.into()))
    }

    pub fn at(x: BigRational) -> Self {
        Self::dirac(ActionAtom::At(x))
    }

    pub fn from_density(d: Density) -> Self {
        ActionMeasure { atoms: vec![], density: Some(d) }
    }

    pub fn mixture(atoms: Vec<(ActionAtom, Number)>, density: Option<Density>) -> Self {
        ActionMeasure {
            atoms: atoms.into_iter().map(|(action, weight)| WeightedAction { action, weight }).collect(),
            density,
        }
    }

    pub fn mass(&self) -> Number {
        let mut m = Number::sum(self.atoms.iter().map(|a| &a.weight));
        if let Some(d) = &self.density {
            m = m + d.mass();
        }
        m
    }

    pub fn is_atomic(&self) -> bool {
        self.density.is_none()
    }

    /// Total weight on a named action.
    pub fn weight_of(&self, name: &str) -> Number {
        Number::sum(
            self.atoms.iter().filter(|a| matches!(&a.action, ActionAtom::Named(n) if n == name)).map(|a| &a.weight),
        )
    }

    fn validate(&self) -> Result<()> {
        for a in &self.atoms {
            if a.weight.is_negative() {
                return Err(Error::InvalidMeasure(format!("negative action weight on {}", a.action)));
            }
        }
        Ok(())
    }

    fn key(&self) -> String {
        let mut s = String::new();
        for a in &self.atoms {
            s.push_str(&format!("{}={};", a.action, a.weight));
        }
        if let Some(d) = &self.density {
            s.push_str(&d.key());
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub state: StatePart,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionMeasure>,
    pub weight: Number,
}

impl Component {
    pub fn mass(&self) -> Number {
        let mut m = &self.weight * &self.state.mass();
        if let Some(a) = &self.action {
            m = m * a.mass();
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    /// Measure on `Y × A`.
    StateAction,
    /// Measure on `Y`.
    State,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridMeasure {
    /// Name of the model whose spaces this measure lives on.
    pub domain: String,
    pub kind: MeasureKind,
    pub components: Vec<Component>,
}

impl HybridMeasure {
    pub fn zero(domain: impl Into<String>, kind: MeasureKind) -> Self {
        HybridMeasure { domain: domain.into(), kind, components: Vec::new() }
    }

    pub fn push(&mut self, c: Component) -> Result<()> {
        match (self.kind, c.action.is_some()) {
            (MeasureKind::StateAction, false) => {
                return Err(Error::InvalidMeasure("state-action measure component lacks an action part".into()))
            }
            (MeasureKind::State, true) => {
                return Err(Error::InvalidMeasure("state measure component carries an action part".into()))
            }
            _ => {}
        }
        if c.weight.is_negative() {
            return Err(Error::InvalidMeasure("negative component weight".into()));
        }
        if let Some(a) = &c.action {
            a.validate()?;
        }
        self.components.push(c);
        Ok(())
    }

    pub fn with(mut self, c: Component) -> Result<Self> {
        self.push(c)?;
        Ok(self)
    }

    pub fn total_mass(&self) -> Number {
        Number::sum(self.components.iter().map(Component::mass).collect::<Vec<_>>().iter())
    }

    fn check_same_domain(&self, other: &HybridMeasure) -> Result<()> {
        if self.domain != other.domain || self.kind != other.kind {
            return Err(Error::DomainMismatch {
                left: format!("{}/{:?}", self.domain, self.kind),
                right: format!("{}/{:?}", other.domain, other.kind),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &HybridMeasure) -> Result<HybridMeasure> {
        self.check_same_domain(other)?;
        let mut out = self.clone();
        out.components.extend(other.components.iter().cloned());
        Ok(out)
    }

    pub fn scale(&self, c: &Number) -> Result<HybridMeasure> {
        if c.is_negative() {
            return Err(Error::InvalidMeasure("negative scale factor".into()));
        }
        let mut out = HybridMeasure::zero(self.domain.clone(), self.kind);
        if c.is_zero() {
            return Ok(out);
        }
        out.components = self.components.iter().map(|k| Component { weight: &k.weight * c, ..k.clone() }).collect();
        Ok(out)
    }

    /// Marginal on `Y`: action parts collapse to their masses and equal state
    /// parts merge.
    pub fn marginal_state(&self) -> HybridMeasure {
        let mut out = HybridMeasure::zero(self.domain.clone(), MeasureKind::State);
        let mut slots: HashMap<String, usize> = HashMap::new();
        for c in &self.components {
            let w = match &c.action {
                Some(a) => &c.weight * &a.mass(),
                None => c.weight.clone(),
            };
            let key = c.state.merge_key();
            match slots.get(&key) {
                Some(&i) => {
                    let slot: &mut Component = &mut out.components[i];
                    slot.weight = &slot.weight + &w;
                }
                None => {
                    slots.insert(key, out.components.len());
                    out.components.push(Component { state: c.state.clone(), action: None, weight: w });
                }
            }
        }
        out
    }

    /// Merge components with identical state and action parts.
    pub fn merged(&self) -> HybridMeasure {
        let mut out = HybridMeasure::zero(self.domain.clone(), self.kind);
        let mut slots: HashMap<String, usize> = HashMap::new();
        for c in &self.components {
            let key =
                format!("{}|{}", c.state.merge_key(), c.action.as_ref().map(ActionMeasure::key).unwrap_or_default());
            match slots.get(&key) {
                Some(&i) => {
                    let slot: &mut Component = &mut out.components[i];
                    slot.weight = &slot.weight + &c.weight;
                }
                None => {
                    slots.insert(key, out.components.len());
                    out.components.push(c.clone());
                }
            }
        }
        out
    }

    /// Mass of the atom `{name}` in `Y` (including all actions).
    pub fn mass_on_atom(&self, name: &str) -> Number {
        let parts: Vec<Number> = self
            .components
            .iter()
            .filter(|c| matches!(&c.state, StatePart::Atom { name: n, .. } if n == name))
            .map(Component::mass)
            .collect();
        Number::sum(parts.iter())
    }

    /// Mass carried by a whole segment (points and densities).
    pub fn mass_on_segment(&self, label: &str) -> Number {
        let parts: Vec<Number> = self
            .components
            .iter()
            .filter(|c| match &c.state {
                StatePart::Point { segment, .. } | StatePart::Density { segment, .. } => segment == label,
                StatePart::Atom { .. } => false,
            })
            .map(Component::mass)
            .collect();
        Number::sum(parts.iter())
    }

    pub fn is_atomic(&self) -> bool {
        self.components.iter().all(|c| {
            !matches!(c.state, StatePart::Density { .. }) && c.action.as_ref().is_none_or(ActionMeasure::is_atomic)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingTarget {
    Segment(String),
    Atom(String),
}

/// The map `a ↦ scale·a + offset` into a segment, or the constant map onto an
/// atom.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineEmbedding {
    pub target: EmbeddingTarget,
    #[serde(with = "rational_str")]
    pub scale: BigRational,
    #[serde(with = "rational_str")]
    pub offset: BigRational,
}

impl AffineEmbedding {
    pub fn identity_into(segment: impl Into<String>) -> Self {
        AffineEmbedding {
            target: EmbeddingTarget::Segment(segment.into()),
            scale: BigRational::from_integer(1.into()),
            offset: BigRational::zero(),
        }
    }

    pub fn onto_atom(atom: impl Into<String>) -> Self {
        AffineEmbedding {
            target: EmbeddingTarget::Atom(atom.into()),
            scale: BigRational::zero(),
            offset: BigRational::zero(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.target, EmbeddingTarget::Atom(_)) || self.scale.is_zero()
    }

    pub fn apply(&self, a: &BigRational) -> BigRational {
        &self.scale * a + &self.offset
    }
}

/// Image of an action measure under an affine embedding, as a list of state
/// parts with weights. Mass is preserved exactly.
pub fn pushforward_parts(
    nu: &ActionMeasure,
    map: &AffineEmbedding,
    space: &StateSpace,
) -> Result<Vec<(StatePart, Number)>> {
    let mass = nu.mass();
    match &map.target {
        EmbeddingTarget::Atom(name) => Ok(vec![(StatePart::atom(space, name)?, mass)]),
        EmbeddingTarget::Segment(label) => {
            let seg = space.segment(label)?;
            let check = |x: &BigRational| -> Result<()> {
                if seg.contains(x) {
                    Ok(())
                } else {
                    Err(Error::OutsideSegment { segment: label.clone(), value: x.to_string() })
                }
            };
            if map.scale.is_zero() {
                check(&map.offset)?;
                return Ok(vec![(StatePart::Point { segment: label.clone(), at: map.offset.clone() }, mass)]);
            }
            let mut out = Vec::new();
            for a in &nu.atoms {
                let x = match &a.action {
                    ActionAtom::At(c) => map.apply(c),
                    ActionAtom::Named(n) => {
                        return Err(Error::Unsupported(format!("named action {n:?} has no coordinate to embed")))
                    }
                };
                check(&x)?;
                out.push((StatePart::Point { segment: label.clone(), at: x }, a.weight.clone()));
            }
            if let Some(d) = &nu.density {
                let img = d.affine_image(&map.scale, &map.offset)?;
                check(img.lower())?;
                check(img.upper())?;
                out.push((StatePart::Density { segment: label.clone(), density: img }, Number::one()));
            }
            Ok(out)
        }
    }
}

/// Pushforward of an action measure to a state measure on `domain`.
pub fn pushforward_affine(
    domain: &str,
    nu: &ActionMeasure,
    map: &AffineEmbedding,
    space: &StateSpace,
) -> Result<HybridMeasure> {
    let mut out = HybridMeasure::zero(domain, MeasureKind::State);
    for (state, weight) in pushforward_parts(nu, map, space)? {
        out.push(Component { state, action: None, weight })?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::{rat, rat_int};
    use crate::spaces::{Atom, Segment, StateSpace};

    fn space() -> StateSpace {
        StateSpace::new(
            vec![
                Atom::isolated("x0"),
                Atom::at("b_1", rat(1, 2), crate::spaces::Topology::Isolated),
                Atom::isolated("c"),
            ],
            vec![],
            vec![Segment::new("1", rat_int(0), rat_int(1))],
            "c",
        )
        .unwrap()
    }

    fn atom_component(name: &str, action: &str, w: Number) -> Component {
        Component {
            state: StatePart::Atom { name: name.into(), coordinate: None },
            action: Some(ActionMeasure::named(action)),
            weight: w,
        }
    }

    #[test]
    fn empty_measure_has_zero_mass() {
        assert_eq!(HybridMeasure::zero("m", MeasureKind::StateAction).total_mass(), Number::zero());
    }

    #[test]
    fn marginal_of_single_atom_component() {
        let mu = HybridMeasure::zero("m", MeasureKind::StateAction)
            .with(atom_component("b_1", "2", Number::ratio(3, 7)))
            .unwrap();
        let marg = mu.marginal_state();
        assert_eq!(marg.kind, MeasureKind::State);
        assert_eq!(marg.components.len(), 1);
        assert_eq!(marg.components[0].weight, Number::ratio(3, 7));
        assert!(marg.components[0].action.is_none());
    }

    #[test]
    fn marginal_merges_equal_state_parts() {
        let mu = HybridMeasure::zero("m", MeasureKind::StateAction)
            .with(atom_component("b_1", "2", Number::ratio(1, 4)))
            .unwrap()
            .with(atom_component("b_1", "3", Number::ratio(1, 4)))
            .unwrap();
        let marg = mu.marginal_state();
        assert_eq!(marg.components.len(), 1);
        assert_eq!(marg.total_mass(), Number::ratio(1, 2));
        assert_eq!(marg.total_mass(), mu.total_mass());
    }

    #[test]
    fn add_and_scale() {
        let a = HybridMeasure::zero("m", MeasureKind::StateAction)
            .with(atom_component("b_1", "2", Number::ratio(1, 4)))
            .unwrap();
        let zero = HybridMeasure::zero("m", MeasureKind::StateAction);
        assert_eq!(a.add(&zero).unwrap(), a);
        assert_eq!(a.scale(&Number::zero()).unwrap().total_mass(), Number::zero());
        assert!(a.scale(&Number::zero()).unwrap().components.is_empty());
        assert_eq!(a.scale(&Number::int(2)).unwrap().total_mass(), Number::ratio(1, 2));
        let other = HybridMeasure::zero("other", MeasureKind::StateAction);
        assert!(matches!(a.add(&other), Err(Error::DomainMismatch { .. })));
        assert!(a.scale(&Number::int(-1)).is_err());
    }

    #[test]
    fn push_rejects_kind_mismatch() {
        let mut m = HybridMeasure::zero("m", MeasureKind::State);
        assert!(m.push(atom_component("b_1", "1", Number::one())).is_err());
    }

    #[test]
    fn pushforward_identity_keeps_uniform() {
        let sp = space();
        let nu = ActionMeasure::from_density(Density::uniform(rat_int(0), rat(1, 5)).unwrap());
        let img = pushforward_affine("m", &nu, &AffineEmbedding::identity_into("1"), &sp).unwrap();
        assert_eq!(img.total_mass(), Number::one());
        match &img.components[0].state {
            StatePart::Density { segment, density } => {
                assert_eq!(segment, "1");
                assert_eq!(density.heights(), &[Number::int(5)]);
                assert_eq!(density.lower(), &rat_int(0));
                assert_eq!(density.upper(), &rat(1, 5));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pushforward_of_dirac_is_a_point() {
        let sp = space();
        let img =
            pushforward_affine("m", &ActionMeasure::at(rat_int(0)), &AffineEmbedding::identity_into("1"), &sp).unwrap();
        assert_eq!(img.components[0].state, StatePart::Point { segment: "1".into(), at: rat_int(0) });
    }

    #[test]
    fn pushforward_scales_height_by_inverse_slope() {
        let sp = space();
        let nu = ActionMeasure::from_density(Density::uniform(rat_int(0), rat(1, 2)).unwrap());
        let map =
            AffineEmbedding { target: EmbeddingTarget::Segment("1".into()), scale: rat(-1, 2), offset: rat(1, 2) };
        let img = pushforward_affine("m", &nu, &map, &sp).unwrap();
        assert_eq!(img.total_mass(), Number::one());
        match &img.components[0].state {
            StatePart::Density { density, .. } => {
                assert_eq!(density.lower(), &rat(1, 4));
                assert_eq!(density.upper(), &rat(1, 2));
                assert_eq!(density.heights(), &[Number::int(4)]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pushforward_outside_segment_fails() {
        let sp = space();
        let map =
            AffineEmbedding { target: EmbeddingTarget::Segment("1".into()), scale: rat_int(2), offset: rat_int(0) };
        let nu = ActionMeasure::from_density(Density::uniform(rat_int(0), rat_int(1)).unwrap());
        assert!(matches!(pushforward_affine("m", &nu, &map, &sp), Err(Error::OutsideSegment { .. })));
    }

    #[test]
    fn serde_round_trip() {
        let mu = HybridMeasure::zero("m", MeasureKind::StateAction)
            .with(Component {
                state: StatePart::Density {
                    segment: "1".into(),
                    density: Density::uniform(rat_int(0), rat(1, 3)).unwrap(),
                },
                action: Some(ActionMeasure::mixture(
                    vec![(ActionAtom::At(rat(1, 2)), Number::ratio(1, 2))],
                    Some(Density::constant(rat_int(0), rat_int(1), Number::ratio(1, 2)).unwrap()),
                )),
                weight: Number::ratio(2, 3),
            })
            .unwrap();
        let text = serde_json::to_string(&mu).unwrap();
        let back: HybridMeasure = serde_json::from_str(&text).unwrap();
        assert_eq!(back, mu);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}
