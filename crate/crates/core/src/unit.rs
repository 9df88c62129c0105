//! ALU functional units and sets of them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An independently failable ALU functional unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Unit {
    Mul,
    Add,
    Shift,
    And,
    Or,
    Xor,
}

impl Unit {
    /// Every unit, in diagnosis order.
    pub const ALL: [Unit; 6] = [Unit::Mul, Unit::Add, Unit::Shift, Unit::And, Unit::Or, Unit::Xor];

    pub fn name(self) -> &'static str {
        match self {
            Unit::Mul => "MUL",
            Unit::Add => "ADD",
            Unit::Shift => "SHIFT",
            Unit::And => "AND",
            Unit::Or => "OR",
            Unit::Xor => "XOR",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown ALU unit `{0}`")]
pub struct UnknownUnit(pub String);

impl FromStr for Unit {
    type Err = UnknownUnit;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Unit::ALL
            .into_iter()
            .find(|u| u.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownUnit(s.to_string()))
    }
}

/// A set of [`Unit`]s. The empty set means "fully healthy".
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnitSet(u8);

impl UnitSet {
    pub const EMPTY: UnitSet = UnitSet(0);
    pub const ALL: UnitSet = UnitSet(0b11_1111);

    pub fn new() -> Self {
        Self::EMPTY
    }

    pub fn insert(&mut self, unit: Unit) {
        self.0 |= unit.bit();
    }

    pub fn remove(&mut self, unit: Unit) {
        self.0 &= !unit.bit();
    }

    pub fn with(mut self, unit: Unit) -> Self {
        self.insert(unit);
        self
    }

    pub fn without(mut self, unit: Unit) -> Self {
        self.remove(unit);
        self
    }

    pub fn contains(self, unit: Unit) -> bool {
        self.0 & unit.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: UnitSet) -> UnitSet {
        UnitSet(self.0 | other.0)
    }

    pub fn intersection(self, other: UnitSet) -> UnitSet {
        UnitSet(self.0 & other.0)
    }

    pub fn is_disjoint(self, other: UnitSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset(self, other: UnitSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Unit> {
        Unit::ALL.into_iter().filter(move |u| self.contains(*u))
    }
}

impl FromIterator<Unit> for UnitSet {
    fn from_iter<I: IntoIterator<Item = Unit>>(iter: I) -> Self {
        let mut set = UnitSet::EMPTY;
        for u in iter {
            set.insert(u);
        }
        set
    }
}

impl<const N: usize> From<[Unit; N]> for UnitSet {
    fn from(units: [Unit; N]) -> Self {
        units.into_iter().collect()
    }
}

impl fmt::Debug for UnitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for UnitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, u) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(u.name())?;
        }
        f.write_str("}")
    }
}

impl Serialize for UnitSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for UnitSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let units = Vec::<Unit>::deserialize(deserializer)?;
        Ok(units.into_iter().collect())
    }
}
