//! Per-unit fault models and the line-oriented fault config format:
//!
//! ```text
//! # comment
//! unit=MUL fault=stuck_at bit=3 value=1
//! unit=ADD fault=disabled scope=instruction
//! unit=XOR fault=wrong_result mask=0x00ff0000
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::unit::{Unit, UnitSet};

use super::alu::AluPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "fault", rename_all = "snake_case")]
pub enum FaultKind {
    Healthy,
    /// Unit output forced to zero.
    Disabled,
    /// Correct result with one bit forced to `value`.
    StuckAt { bit: u8, value: u8 },
    /// Correct result XOR `mask`.
    WrongResult { mask: u32 },
}

/// Which uses of a unit a fault affects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultScope {
    /// The unit hardware itself: explicit instructions and implicit uses
    /// (address generation, branch comparison) alike.
    #[default]
    Unit,
    /// Only explicit ALU instructions.
    Instruction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UnitFault {
    #[serde(flatten)]
    pub kind: FaultKind,
    #[serde(default, skip_serializing_if = "is_default_scope")]
    pub scope: FaultScope,
}

fn is_default_scope(s: &FaultScope) -> bool {
    *s == FaultScope::Unit
}

impl UnitFault {
    pub fn new(kind: FaultKind) -> Self {
        UnitFault { kind, scope: FaultScope::Unit }
    }

    pub fn instruction_only(kind: FaultKind) -> Self {
        UnitFault { kind, scope: FaultScope::Instruction }
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        match self.kind {
            FaultKind::StuckAt { bit, .. } if bit > 31 => Err(format!("bit {bit} out of range 0-31")),
            FaultKind::StuckAt { value, .. } if value > 1 => Err(format!("stuck-at value {value} is not 0 or 1")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FaultConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unit {unit} already has a fault")]
    Duplicate { line: usize, unit: Unit },
}

/// Map from unit to fault. Units not listed are healthy.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaultConfig {
    faults: BTreeMap<Unit, UnitFault>,
}

impl FaultConfig {
    pub fn healthy() -> Self {
        Self::default()
    }

    /// Convenience: every unit in `units` disabled at unit scope.
    pub fn disabled(units: UnitSet) -> Self {
        let mut f = Self::healthy();
        for u in units.iter() {
            f.set(u, UnitFault::new(FaultKind::Disabled));
        }
        f
    }

    /// Replaces any existing fault on `unit`. Setting `Healthy` clears it.
    pub fn set(&mut self, unit: Unit, fault: UnitFault) {
        if fault.kind == FaultKind::Healthy {
            self.faults.remove(&unit);
        } else {
            self.faults.insert(unit, fault);
        }
    }

    pub fn clear(&mut self) {
        self.faults.clear();
    }

    pub fn get(&self, unit: Unit) -> Option<&UnitFault> {
        self.faults.get(&unit)
    }

    /// The fault seen by a use of `unit` along `path`, if any.
    pub fn active(&self, unit: Unit, path: AluPath) -> Option<FaultKind> {
        let f = self.faults.get(&unit)?;
        match (f.scope, path) {
            (FaultScope::Instruction, AluPath::Implicit) => None,
            _ => Some(f.kind),
        }
    }

    pub fn faulty_units(&self) -> UnitSet {
        self.faults.keys().copied().collect()
    }

    pub fn is_healthy(&self) -> bool {
        self.faults.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Unit, &UnitFault)> {
        self.faults.iter().map(|(u, f)| (*u, f))
    }

    /// Parses the line-oriented config format.
    pub fn parse(text: &str) -> Result<Self, FaultConfigError> {
        let mut config = FaultConfig::healthy();
        let mut seen = UnitSet::EMPTY;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or_default().trim();
            if body.is_empty() {
                continue;
            }
            let err = |msg: String| FaultConfigError::Syntax { line, msg };
            let mut fields = BTreeMap::new();
            for tok in body.split_whitespace() {
                let (k, v) = tok.split_once('=').ok_or_else(|| err(format!("expected key=value, found `{tok}`")))?;
                if fields.insert(k, v).is_some() {
                    return Err(err(format!("repeated key `{k}`")));
                }
            }
            fn take<'a>(fields: &mut BTreeMap<&str, &'a str>, key: &str, line: usize) -> Result<&'a str, FaultConfigError> {
                fields.remove(key).ok_or_else(|| FaultConfigError::Syntax { line, msg: format!("missing `{key}`") })
            }
            let unit: Unit = take(&mut fields, "unit", line)?.parse().map_err(|e| err(format!("{e}")))?;
            let number = |s: &str| -> Result<u32, FaultConfigError> {
                let parsed = match s.strip_prefix("0x") {
                    Some(hex) => u32::from_str_radix(hex, 16),
                    None => s.parse(),
                };
                parsed.map_err(|_| err(format!("bad number `{s}`")))
            };
            let kind = match take(&mut fields, "fault", line)? {
                "healthy" => FaultKind::Healthy,
                "disabled" => FaultKind::Disabled,
                "stuck_at" => {
                    let bit = number(take(&mut fields, "bit", line)?)?;
                    let value = number(take(&mut fields, "value", line)?)?;
                    FaultKind::StuckAt { bit: bit.min(255) as u8, value: value.min(255) as u8 }
                }
                "wrong_result" => FaultKind::WrongResult { mask: number(take(&mut fields, "mask", line)?)? },
                other => return Err(err(format!("unknown fault `{other}`"))),
            };
            let scope = match fields.remove("scope") {
                None | Some("unit") => FaultScope::Unit,
                Some("instruction") => FaultScope::Instruction,
                Some(other) => return Err(err(format!("unknown scope `{other}`"))),
            };
            if let Some(k) = fields.keys().next() {
                return Err(err(format!("unexpected key `{k}`")));
            }
            let fault = UnitFault { kind, scope };
            fault.validate().map_err(err)?;
            if seen.contains(unit) {
                return Err(FaultConfigError::Duplicate { line, unit });
            }
            seen.insert(unit);
            config.set(unit, fault);
        }
        Ok(config)
    }
}

impl fmt::Display for FaultConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (unit, fault) in self.iter() {
            write!(f, "unit={unit} ")?;
            match fault.kind {
                FaultKind::Healthy => write!(f, "fault=healthy")?,
                FaultKind::Disabled => write!(f, "fault=disabled")?,
                FaultKind::StuckAt { bit, value } => write!(f, "fault=stuck_at bit={bit} value={value}")?,
                FaultKind::WrongResult { mask } => write!(f, "fault=wrong_result mask={mask:#010x}")?,
            }
            if fault.scope == FaultScope::Instruction {
                write!(f, " scope=instruction")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_fault_kind() {
        let text = "# faults\nunit=MUL fault=stuck_at bit=3 value=1\n\nunit=ADD fault=disabled scope=instruction\nunit=XOR fault=wrong_result mask=0x00ff0000 # trailing\n";
        let cfg = FaultConfig::parse(text).unwrap();
        assert_eq!(cfg.get(Unit::Mul).unwrap().kind, FaultKind::StuckAt { bit: 3, value: 1 });
        assert_eq!(cfg.get(Unit::Add).unwrap().scope, FaultScope::Instruction);
        assert_eq!(cfg.get(Unit::Xor).unwrap().kind, FaultKind::WrongResult { mask: 0x00ff_0000 });
        assert_eq!(FaultConfig::parse(&cfg.to_string()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(
            FaultConfig::parse("unit=MUL fault=disabled\nunit=MUL fault=disabled"),
            Err(FaultConfigError::Duplicate { line: 2, unit: Unit::Mul })
        ));
        for bad in [
            "unit=DIV fault=disabled",
            "unit=MUL fault=stuck_at bit=32 value=1",
            "unit=MUL fault=stuck_at bit=3 value=2",
            "unit=MUL fault=stuck_at bit=3",
            "unit=MUL fault=melted",
            "unit=MUL fault=disabled colour=red",
            "unit=MUL disabled",
        ] {
            assert!(matches!(FaultConfig::parse(bad), Err(FaultConfigError::Syntax { line: 1, .. })), "{bad}");
        }
    }

    #[test]
    fn serde_shape() {
        let mut cfg = FaultConfig::healthy();
        cfg.set(Unit::Mul, UnitFault::new(FaultKind::StuckAt { bit: 3, value: 1 }));
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(json, r#"{"MUL":{"fault":"stuck_at","bit":3,"value":1}}"#);
        assert_eq!(serde_json::from_str::<FaultConfig>(&json).unwrap(), cfg);
    }
}
