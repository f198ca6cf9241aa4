use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datamodel::{ClipRecord, Demographics, Ethnicity, Gender};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupingMode {
    /// No demographic control.
    None,
    /// Candidates share gender.
    G,
    /// Candidates share ethnic group.
    E,
    /// Candidates share gender and ethnic group.
    GE,
    /// Every participant of a trial belongs to one fixed
    /// gender/ethnicity/fluency/age cell.
    GEFA,
}

impl GroupingMode {
    pub const ALL: [GroupingMode; 5] = [
        GroupingMode::None,
        GroupingMode::G,
        GroupingMode::E,
        GroupingMode::GE,
        GroupingMode::GEFA,
    ];
}

impl fmt::Display for GroupingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupingMode::None => "none",
            GroupingMode::G => "G",
            GroupingMode::E => "E",
            GroupingMode::GE => "GE",
            GroupingMode::GEFA => "GEFA",
        })
    }
}

impl FromStr for GroupingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "-" => Ok(GroupingMode::None),
            "G" => Ok(GroupingMode::G),
            "E" => Ok(GroupingMode::E),
            "GE" | "G/E" => Ok(GroupingMode::GE),
            "GEFA" | "G/E/F/A" => Ok(GroupingMode::GEFA),
            other => Err(Error::Config(format!("unknown grouping `{other}`"))),
        }
    }
}

/// Demographic constraint on the two candidates of a matching trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping {
    mode: GroupingMode,
    gefa_target: Option<Demographics>,
}

/// The attributes a grouping holds fixed between candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupKey {
    All,
    Gender(Gender),
    Ethnicity(Ethnicity),
    GenderEthnicity(Gender, Ethnicity),
    Cell(Demographics),
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKey::All => f.write_str("all"),
            GroupKey::Gender(g) => write!(f, "gender={g}"),
            GroupKey::Ethnicity(e) => write!(f, "ethnicity={e}"),
            GroupKey::GenderEthnicity(g, e) => write!(f, "gender={g},ethnicity={e}"),
            GroupKey::Cell(d) => write!(f, "cell={d}"),
        }
    }
}

impl Grouping {
    pub fn new(mode: GroupingMode, gefa_target: Option<Demographics>) -> Result<Self> {
        match (mode, gefa_target) {
            (GroupingMode::GEFA, None) => Err(Error::Config(
                "GEFA grouping requires a gender/ethnicity/fluency/age target".into(),
            )),
            (GroupingMode::GEFA, Some(_)) | (_, None) => Ok(Self { mode, gefa_target }),
            (_, Some(_)) => Err(Error::Config(format!(
                "a GEFA target is only valid with GEFA grouping, not {mode}"
            ))),
        }
    }

    pub fn none() -> Self {
        Self {
            mode: GroupingMode::None,
            gefa_target: None,
        }
    }

    pub fn mode(&self) -> GroupingMode {
        self.mode
    }

    pub fn gefa_target(&self) -> Option<Demographics> {
        self.gefa_target
    }

    /// Whether a record may take part in trials at all (only restrictive
    /// for GEFA).
    pub fn admits(&self, record: &ClipRecord) -> bool {
        match self.gefa_target {
            Some(t) => record.demographics() == t,
            None => true,
        }
    }

    pub fn key(&self, record: &ClipRecord) -> GroupKey {
        match self.mode {
            GroupingMode::None => GroupKey::All,
            GroupingMode::G => GroupKey::Gender(record.gender),
            GroupingMode::E => GroupKey::Ethnicity(record.ethnicity),
            GroupingMode::GE => GroupKey::GenderEthnicity(record.gender, record.ethnicity),
            GroupingMode::GEFA => GroupKey::Cell(record.demographics()),
        }
    }

    /// Whether two candidate records satisfy the constraint relative to
    /// each other.
    pub fn compatible(&self, a: &ClipRecord, b: &ClipRecord) -> bool {
        self.admits(a) && self.admits(b) && self.key(a) == self.key(b)
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.gefa_target {
            Some(t) => write!(f, "{}[{}]", self.mode, t),
            None => write!(f, "{}", self.mode),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gefa_requires_target() {
        assert!(Grouping::new(GroupingMode::GEFA, None).is_err());
        let t: Demographics = "m/5/Y/30s".parse().unwrap();
        assert!(Grouping::new(GroupingMode::GEFA, Some(t)).is_ok());
        assert!(Grouping::new(GroupingMode::G, Some(t)).is_err());
        assert!(Grouping::new(GroupingMode::G, None).is_ok());
    }

    #[test]
    fn parses_table_labels() {
        assert_eq!("G/E".parse::<GroupingMode>().unwrap(), GroupingMode::GE);
        assert_eq!("-".parse::<GroupingMode>().unwrap(), GroupingMode::None);
        assert!("X".parse::<GroupingMode>().is_err());
    }
}
