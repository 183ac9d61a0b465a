//! KPI scale declarations, unit conversion and canonical scale selection.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

use crate::ids::ModelId;
use crate::rational::Rational;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// `canonical = a * raw + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AffineTransform {
    pub a: Rational,
    pub b: Rational,
}

impl AffineTransform {
    pub const IDENTITY: AffineTransform = AffineTransform {
        a: Rational::ONE,
        b: Rational::ZERO,
    };

    /// The unique increasing map sending `[lo, hi]` onto `[to_lo, to_hi]`.
    pub fn between(lo: Rational, hi: Rational, to_lo: Rational, to_hi: Rational) -> Self {
        let a = (to_hi - to_lo) / (hi - lo);
        AffineTransform { a, b: to_lo - a * lo }
    }

    pub fn apply(&self, raw: Rational) -> Rational {
        self.a * raw + self.b
    }

    /// `a` is never zero for transforms built by `between`.
    pub fn invert(&self, canonical: Rational) -> Rational {
        (canonical - self.b) / self.a
    }
}

/// A `scale` capability parameter of the form `unit:lo..hi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleDecl {
    pub unit: String,
    pub lo: Rational,
    pub hi: Rational,
}

impl ScaleDecl {
    pub fn parse(text: &str) -> Option<Self> {
        let (unit, range) = text.split_once(':')?;
        let (lo, hi) = range.split_once("..")?;
        let unit = unit.trim();
        if unit.is_empty() {
            return None;
        }
        let lo: Rational = lo.parse().ok()?;
        let hi: Rational = hi.parse().ok()?;
        if lo >= hi {
            return None;
        }
        Some(ScaleDecl {
            unit: unit.to_string(),
            lo,
            hi,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct UnitEntry {
    base: &'static str,
    factor: Rational,
    offset: Rational,
}

pub const DIMENSIONLESS: &str = "fraction";

/// Unit convertibility data: each unit maps affinely onto a base unit.
#[derive(Debug, Clone)]
pub struct UnitTable {
    units: BTreeMap<String, UnitEntry>,
}

impl Default for UnitTable {
    fn default() -> Self {
        let mut t = UnitTable { units: BTreeMap::new() };
        t.add("fraction", DIMENSIONLESS, Rational::ONE, Rational::ZERO);
        t.add("percent", DIMENSIONLESS, Rational::new(1, 100), Rational::ZERO);
        t.add("permille", DIMENSIONLESS, Rational::new(1, 1000), Rational::ZERO);
        t.add("kelvin", "kelvin", Rational::ONE, Rational::ZERO);
        t.add("celsius", "kelvin", Rational::ONE, Rational::new(27315, 100));
        t.add("mbps", "mbps", Rational::ONE, Rational::ZERO);
        t.add("kbps", "mbps", Rational::new(1, 1000), Rational::ZERO);
        t
    }
}

impl UnitTable {
    pub fn add(&mut self, unit: &str, base: &'static str, factor: Rational, offset: Rational) {
        self.units.insert(unit.to_string(), UnitEntry { base, factor, offset });
    }

    pub fn convertible(&self, a: &str, b: &str) -> bool {
        match (self.units.get(a), self.units.get(b)) {
            (Some(x), Some(y)) => x.base == y.base,
            _ => a == b,
        }
    }

    /// Converts `v` from unit `from` to unit `to`; `None` when not convertible.
    pub fn convert(&self, v: Rational, from: &str, to: &str) -> Option<Rational> {
        if from == to {
            return Some(v);
        }
        let f = self.units.get(from)?;
        let t = self.units.get(to)?;
        if f.base != t.base {
            return None;
        }
        let base = f.factor * v + f.offset;
        Some((base - t.offset) / t.factor)
    }
}

/// Canonical unit: the dimensionless unit if either side declares it, else the smaller name.
pub fn canonical_unit<'a>(a: &'a str, b: &'a str) -> &'a str {
    if a == DIMENSIONLESS || b == DIMENSIONLESS {
        DIMENSIONLESS
    } else if a <= b {
        a
    } else {
        b
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CanonicalScale {
    pub metric_name: String,
    pub unit: String,
    pub lo: Rational,
    pub hi: Rational,
    pub conversions: BTreeMap<ModelId, AffineTransform>,
}

impl CanonicalScale {
    /// Hull of both declared ranges expressed in the canonical unit.
    pub fn align(
        metric: &str,
        units: &UnitTable,
        (id_a, a): (&ModelId, &ScaleDecl),
        (id_b, b): (&ModelId, &ScaleDecl),
    ) -> Option<CanonicalScale> {
        if !units.convertible(&a.unit, &b.unit) {
            return None;
        }
        let unit = canonical_unit(&a.unit, &b.unit);
        let conv = |d: &ScaleDecl| -> Option<(Rational, Rational)> {
            let x = units.convert(d.lo, &d.unit, unit)?;
            let y = units.convert(d.hi, &d.unit, unit)?;
            Some(if x <= y { (x, y) } else { (y, x) })
        };
        let (alo, ahi) = conv(a)?;
        let (blo, bhi) = conv(b)?;
        let lo = alo.min(blo);
        let hi = ahi.max(bhi);
        let mut conversions = BTreeMap::new();
        conversions.insert(id_a.clone(), AffineTransform::between(a.lo, a.hi, lo, hi));
        conversions.insert(id_b.clone(), AffineTransform::between(b.lo, b.hi, lo, hi));
        Some(CanonicalScale {
            metric_name: metric.to_string(),
            unit: unit.to_string(),
            lo,
            hi,
            conversions,
        })
    }

    pub fn to_canonical(&self, peer: &ModelId, raw: Rational) -> Option<Rational> {
        self.conversions.get(peer).map(|t| t.apply(raw))
    }

    pub fn from_canonical(&self, peer: &ModelId, canonical: Rational) -> Option<Rational> {
        self.conversions.get(peer).map(|t| t.invert(canonical))
    }
}
