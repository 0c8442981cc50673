//! State and action spaces with declared topology.
//!
//! The state space is a finite set of named atoms, a set of labelled real
//! segments, and a distinguished cemetery atom. Topology is declared rather
//! than inferred: an atom is a limit point exactly when some declared
//! convergent sequence of atoms converges to it.

use std::collections::{HashMap, HashSet};
use std::fmt;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::number::{parse_rational, rat_to_f64, rational_str};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Isolated,
    LimitPoint,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub name: String,
    /// Real coordinate when the atom is embedded in the line.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "rational_str::option")]
    pub coordinate: Option<BigRational>,
    pub topology: Topology,
}

impl Atom {
    pub fn isolated(name: impl Into<String>) -> Self {
        Atom { name: name.into(), coordinate: None, topology: Topology::Isolated }
    }

    pub fn at(name: impl Into<String>, coordinate: BigRational, topology: Topology) -> Self {
        Atom { name: name.into(), coordinate: Some(coordinate), topology }
    }
}

/// A finite prefix `terms[0], terms[1], ...` of a sequence of atoms declared
/// to converge to `limit`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergentSequence {
    pub terms: Vec<String>,
    pub limit: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub label: String,
    #[serde(with = "rational_str")]
    pub lower: BigRational,
    #[serde(with = "rational_str")]
    pub upper: BigRational,
}

impl Segment {
    pub fn new(label: impl Into<String>, lower: BigRational, upper: BigRational) -> Self {
        Segment { label: label.into(), lower, upper }
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        &self.lower <= x && x <= &self.upper
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct RawStateSpace {
    atoms: Vec<Atom>,
    #[serde(default)]
    convergent_sequences: Vec<ConvergentSequence>,
    #[serde(default)]
    segments: Vec<Segment>,
    cemetery: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawStateSpace", into = "RawStateSpace")]
pub struct StateSpace {
    raw: RawStateSpace,
    atom_index: HashMap<String, usize>,
}

impl PartialEq for StateSpace {
    fn eq(&self, other: &Self) -> bool {
        self.raw == other.raw
    }
}

impl From<StateSpace> for RawStateSpace {
    fn from(s: StateSpace) -> Self {
        s.raw
    }
}

impl TryFrom<RawStateSpace> for StateSpace {
    type Error = Error;

    fn try_from(raw: RawStateSpace) -> Result<Self> {
        StateSpace::new(raw.atoms, raw.convergent_sequences, raw.segments, raw.cemetery)
    }
}

impl StateSpace {
    /// Build and validate a state space. The cemetery must be one of `atoms`.
    pub fn new(
        atoms: Vec<Atom>,
        convergent_sequences: Vec<ConvergentSequence>,
        segments: Vec<Segment>,
        cemetery: impl Into<String>,
    ) -> Result<Self> {
        let cemetery = cemetery.into();
        let mut atom_index = HashMap::with_capacity(atoms.len());
        for (i, a) in atoms.iter().enumerate() {
            if atom_index.insert(a.name.clone(), i).is_some() {
                return Err(Error::InvalidSpace(format!("duplicate atom name {:?}", a.name)));
            }
        }
        match atom_index.get(&cemetery) {
            None => return Err(Error::InvalidSpace(format!("cemetery {cemetery:?} is not a declared atom"))),
            Some(&i) if atoms[i].topology != Topology::Isolated => {
                return Err(Error::InvalidSpace("cemetery must be isolated".into()))
            }
            _ => {}
        }
        let mut limits = HashSet::new();
        for seq in &convergent_sequences {
            for t in seq.terms.iter().chain(std::iter::once(&seq.limit)) {
                if !atom_index.contains_key(t) {
                    return Err(Error::InvalidSpace(format!("convergent sequence references unknown atom {t:?}")));
                }
            }
            if seq.terms.is_empty() {
                return Err(Error::InvalidSpace(format!("empty sequence declared for limit {:?}", seq.limit)));
            }
            if seq.limit == cemetery || seq.terms.contains(&cemetery) {
                return Err(Error::InvalidSpace("the cemetery cannot take part in a convergent sequence".into()));
            }
            limits.insert(seq.limit.clone());
        }
        for a in &atoms {
            let is_limit = limits.contains(&a.name);
            match (a.topology, is_limit) {
                (Topology::LimitPoint, false) => {
                    return Err(Error::InvalidSpace(format!(
                        "atom {:?} is tagged limit-point but no declared sequence converges to it",
                        a.name
                    )))
                }
                (Topology::Isolated, true) => {
                    return Err(Error::InvalidSpace(format!(
                        "atom {:?} is the limit of a declared sequence but tagged isolated",
                        a.name
                    )))
                }
                _ => {}
            }
        }
        let mut labels = HashSet::new();
        for s in &segments {
            if s.lower >= s.upper {
                return Err(Error::InvalidSpace(format!("segment {:?} has lower >= upper", s.label)));
            }
            if !labels.insert(s.label.clone()) {
                return Err(Error::InvalidSpace(format!("duplicate segment label {:?}", s.label)));
            }
        }
        Ok(StateSpace { raw: RawStateSpace { atoms, convergent_sequences, segments, cemetery }, atom_index })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.raw.atoms
    }

    pub fn segments(&self) -> &[Segment] {
        &self.raw.segments
    }

    pub fn convergent_sequences(&self) -> &[ConvergentSequence] {
        &self.raw.convergent_sequences
    }

    pub fn cemetery(&self) -> &str {
        &self.raw.cemetery
    }

    pub fn atom(&self, name: &str) -> Result<&Atom> {
        self.atom_index.get(name).map(|&i| &self.raw.atoms[i]).ok_or_else(|| Error::UnknownAtom(name.to_string()))
    }

    pub fn has_atom(&self, name: &str) -> bool {
        self.atom_index.contains_key(name)
    }

    pub fn segment(&self, label: &str) -> Result<&Segment> {
        self.raw.segments.iter().find(|s| s.label == label).ok_or_else(|| Error::UnknownSegment(label.to_string()))
    }

    /// Atoms of `Y` (everything but the cemetery), in declaration order.
    pub fn y_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.raw.atoms.iter().filter(move |a| a.name != self.raw.cemetery)
    }

    /// Position of an atom among the `Y` atoms, in declaration order.
    pub fn state_index(&self, name: &str) -> Result<usize> {
        let i = *self.atom_index.get(name).ok_or_else(|| Error::UnknownAtom(name.to_string()))?;
        let cem = self.atom_index[&self.raw.cemetery];
        Ok(if i > cem { i - 1 } else { i })
    }

    pub fn is_isolated(&self, name: &str) -> Result<bool> {
        Ok(self.atom(name)?.topology == Topology::Isolated)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ActionSpace {
    /// Named actions with the discrete topology.
    Finite { names: Vec<String> },
    Interval {
        #[serde(with = "rational_str")]
        lower: BigRational,
        #[serde(with = "rational_str")]
        upper: BigRational,
    },
}

impl ActionSpace {
    pub fn finite<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::InvalidSpace("empty action space".into()));
        }
        let unique: HashSet<_> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(Error::InvalidSpace("duplicate action names".into()));
        }
        Ok(ActionSpace::Finite { names })
    }

    pub fn interval(lower: BigRational, upper: BigRational) -> Result<Self> {
        if lower >= upper {
            return Err(Error::InvalidSpace("action interval must have lower < upper".into()));
        }
        Ok(ActionSpace::Interval { lower, upper })
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ActionSpace::Finite { .. })
    }

    pub fn contains_name(&self, name: &str) -> bool {
        match self {
            ActionSpace::Finite { names } => names.iter().any(|n| n == name),
            ActionSpace::Interval { .. } => false,
        }
    }
}

/// A single point of `X`: an atom or a coordinate on a segment.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StatePoint {
    Atom {
        name: String,
    },
    Point {
        segment: String,
        #[serde(with = "rational_str")]
        at: BigRational,
    },
}

impl StatePoint {
    pub fn atom(name: impl Into<String>) -> Self {
        StatePoint::Atom { name: name.into() }
    }

    pub fn point(segment: impl Into<String>, at: BigRational) -> Self {
        StatePoint::Point { segment: segment.into(), at }
    }

    /// Validate against a state space.
    pub fn check(&self, space: &StateSpace) -> Result<()> {
        match self {
            StatePoint::Atom { name } => space.atom(name).map(|_| ()),
            StatePoint::Point { segment, at } => {
                let s = space.segment(segment)?;
                if s.contains(at) {
                    Ok(())
                } else {
                    Err(Error::OutsideSegment { segment: segment.clone(), value: at.to_string() })
                }
            }
        }
    }
}

impl fmt::Display for StatePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatePoint::Atom { name } => write!(f, "{name}"),
            StatePoint::Point { segment, at } => write!(f, "{segment}@{at}"),
        }
    }
}

impl std::str::FromStr for StatePoint {
    type Err = Error;

    /// `name` for an atom, `segment@coordinate` for a segment point.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('@') {
            Some((seg, x)) => Ok(StatePoint::point(seg, parse_rational(x)?)),
            None => Ok(StatePoint::atom(s)),
        }
    }
}

/// Coordinate of an atom as a float, when it has one.
pub fn atom_coordinate_f64(atom: &Atom) -> Option<f64> {
    atom.coordinate.as_ref().map(rat_to_f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::{rat, rat_int};

    fn small_space() -> StateSpace {
        StateSpace::new(
            vec![
                Atom::at("one", rat_int(1), Topology::LimitPoint),
                Atom::at("b_1", rat(1, 2), Topology::Isolated),
                Atom::at("b_2", rat(3, 4), Topology::Isolated),
                Atom::isolated("cemetery"),
            ],
            vec![ConvergentSequence { terms: vec!["b_1".into(), "b_2".into()], limit: "one".into() }],
            vec![Segment::new("s", rat_int(0), rat_int(1))],
            "cemetery",
        )
        .unwrap()
    }

    #[test]
    fn isolation_tags() {
        let s = small_space();
        assert!(s.is_isolated("cemetery").unwrap());
        assert!(!s.is_isolated("one").unwrap());
        assert!(s.is_isolated("b_2").unwrap());
        assert!(matches!(s.is_isolated("nope"), Err(Error::UnknownAtom(_))));
    }

    #[test]
    fn rejects_limit_tag_without_sequence() {
        let err = StateSpace::new(
            vec![Atom::at("z", rat_int(0), Topology::LimitPoint), Atom::isolated("c")],
            vec![],
            vec![],
            "c",
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_isolated_limit() {
        let err = StateSpace::new(
            vec![Atom::isolated("z"), Atom::isolated("y"), Atom::isolated("c")],
            vec![ConvergentSequence { terms: vec!["y".into()], limit: "z".into() }],
            vec![],
            "c",
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_bad_segments_and_duplicates() {
        assert!(StateSpace::new(
            vec![Atom::isolated("c")],
            vec![],
            vec![Segment::new("s", rat_int(1), rat_int(1))],
            "c"
        )
        .is_err());
        assert!(StateSpace::new(vec![Atom::isolated("c"), Atom::isolated("c")], vec![], vec![], "c").is_err());
        assert!(StateSpace::new(vec![Atom::isolated("a")], vec![], vec![], "c").is_err());
    }

    #[test]
    fn state_index_skips_cemetery() {
        let s = small_space();
        assert_eq!(s.state_index("one").unwrap(), 0);
        assert_eq!(s.state_index("b_2").unwrap(), 2);
    }

    #[test]
    fn serde_round_trip_is_identical() {
        let s = small_space();
        let text = serde_json::to_string(&s).unwrap();
        let back: StateSpace = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn parse_state_points() {
        assert_eq!("b_1".parse::<StatePoint>().unwrap(), StatePoint::atom("b_1"));
        assert_eq!("0@1/2".parse::<StatePoint>().unwrap(), StatePoint::point("0", rat(1, 2)));
    }
}
