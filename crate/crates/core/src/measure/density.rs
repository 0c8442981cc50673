use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::number::{rational_str, Number};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RawDensity {
    #[serde(with = "rational_str::vec")]
    breaks: Vec<BigRational>,
    heights: Vec<Number>,
}

/// Piecewise-constant density: height `heights[i]` on `[breaks[i], breaks[i+1])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDensity", into = "RawDensity")]
pub struct Density {
    breaks: Vec<BigRational>,
    heights: Vec<Number>,
}

impl From<Density> for RawDensity {
    fn from(d: Density) -> Self {
        RawDensity { breaks: d.breaks, heights: d.heights }
    }
}

impl TryFrom<RawDensity> for Density {
    type Error = Error;
    fn try_from(r: RawDensity) -> Result<Self> {
        Density::new(r.breaks, r.heights)
    }
}

impl Density {
    pub fn new(breaks: Vec<BigRational>, heights: Vec<Number>) -> Result<Self> {
        if breaks.len() < 2 || heights.len() + 1 != breaks.len() {
            return Err(Error::InvalidMeasure("density needs n+1 breakpoints for n heights, n >= 1".into()));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMeasure("density breakpoints must be strictly increasing".into()));
        }
        if heights.iter().any(Number::is_negative) {
            return Err(Error::InvalidMeasure("density heights must be nonnegative".into()));
        }
        Ok(Density { breaks, heights })
    }

    /// Uniform probability density on `[lower, upper]`.
    pub fn uniform(lower: BigRational, upper: BigRational) -> Result<Self> {
        if lower >= upper {
            return Err(Error::InvalidMeasure("uniform density needs lower < upper".into()));
        }
        let h = (&upper - &lower).recip();
        Density::new(vec![lower, upper], vec![Number::Exact(h)])
    }

    pub fn constant(lower: BigRational, upper: BigRational, height: Number) -> Result<Self> {
        Density::new(vec![lower, upper], vec![height])
    }

    pub fn breaks(&self) -> &[BigRational] {
        &self.breaks
    }

    pub fn heights(&self) -> &[Number] {
        &self.heights
    }

    pub fn lower(&self) -> &BigRational {
        &self.breaks[0]
    }

    pub fn upper(&self) -> &BigRational {
        self.breaks.last().expect("nonempty breaks")
    }

    /// `(lower, upper, height)` for each piece.
    pub fn pieces(&self) -> impl Iterator<Item = (&BigRational, &BigRational, &Number)> {
        self.breaks.windows(2).zip(&self.heights).map(|(w, h)| (&w[0], &w[1], h))
    }

    pub fn mass(&self) -> Number {
        self.pieces().fold(Number::zero(), |acc, (l, u, h)| acc + h * &Number::Exact(u - l))
    }

    /// Restriction to `[lower, upper]`; `None` when the overlap has zero length.
    pub fn restrict(&self, lower: &BigRational, upper: &BigRational) -> Option<Density> {
        let lo = lower.max(self.lower()).clone();
        let hi = upper.min(self.upper()).clone();
        if lo >= hi {
            return None;
        }
        let mut breaks = vec![lo.clone()];
        let mut heights = Vec::new();
        for (l, u, h) in self.pieces() {
            if u <= &lo || l >= &hi {
                continue;
            }
            let end = u.min(&hi).clone();
            heights.push(h.clone());
            breaks.push(end);
        }
        Some(Density { breaks, heights })
    }

    pub fn scale(&self, c: &Number) -> Density {
        Density { breaks: self.breaks.clone(), heights: self.heights.iter().map(|h| h * c).collect() }
    }

    /// Image under `x ↦ scale·x + offset` with `scale ≠ 0`; heights are divided
    /// by `|scale|` so mass is preserved.
    pub fn affine_image(&self, scale: &BigRational, offset: &BigRational) -> Result<Density> {
        if scale.is_zero() {
            return Err(Error::InvalidMeasure("affine image of a density needs a nonzero slope".into()));
        }
        let inv = Number::Exact(scale.abs().recip());
        let mut breaks: Vec<BigRational> = self.breaks.iter().map(|b| scale * b + offset).collect();
        let mut heights: Vec<Number> = self.heights.iter().map(|h| h * &inv).collect();
        if scale.is_negative() {
            breaks.reverse();
            heights.reverse();
        }
        Density::new(breaks, heights)
    }

    pub(crate) fn key(&self) -> String {
        let mut s = String::new();
        for b in &self.breaks {
            s.push_str(&b.to_string());
            s.push(',');
        }
        s.push('|');
        for h in &self.heights {
            s.push_str(&h.to_string());
            s.push(',');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::{rat, rat_int};

    #[test]
    fn uniform_has_unit_mass() {
        let d = Density::uniform(rat_int(0), rat(1, 7)).unwrap();
        assert_eq!(d.mass(), Number::one());
        assert_eq!(d.heights(), &[Number::int(7)]);
    }

    #[test]
    fn rejects_malformed() {
        assert!(Density::new(vec![rat_int(0)], vec![]).is_err());
        assert!(Density::new(vec![rat_int(1), rat_int(0)], vec![Number::one()]).is_err());
        assert!(Density::new(vec![rat_int(0), rat_int(1)], vec![Number::int(-1)]).is_err());
    }

    #[test]
    fn restriction_splits_mass() {
        let d = Density::new(vec![rat_int(0), rat(1, 2), rat_int(1)], vec![Number::one(), Number::int(3)]).unwrap();
        assert_eq!(d.mass(), Number::int(2));
        let left = d.restrict(&rat_int(0), &rat(3, 4)).unwrap();
        let right = d.restrict(&rat(3, 4), &rat_int(2)).unwrap();
        assert_eq!(&left.mass() + &right.mass(), d.mass());
        assert!(d.restrict(&rat_int(1), &rat_int(2)).is_none());
    }

    #[test]
    fn negative_slope_image_reverses_pieces() {
        let d = Density::new(vec![rat_int(0), rat(1, 2), rat_int(1)], vec![Number::one(), Number::int(3)]).unwrap();
        let img = d.affine_image(&rat_int(-2), &rat_int(2)).unwrap();
        assert_eq!(img.breaks(), &[rat_int(0), rat_int(1), rat_int(2)]);
        assert_eq!(img.heights(), &[Number::ratio(3, 2), Number::ratio(1, 2)]);
        assert_eq!(img.mass(), d.mass());
    }
}
