use std::fmt;
use std::str::FromStr;

use fvlab_core::datamodel::{Demographics, Ethnicity, Gender};
use fvlab_core::model::Direction;
use serde::{Deserialize, Serialize};

use crate::error::StudyError;

pub const N_SCORED: usize = 16;
pub const N_CONSISTENCY: usize = 2;
pub const N_CORRECTNESS: usize = 2;
pub const N_TRIALS: usize = N_SCORED + N_CONSISTENCY + N_CORRECTNESS;
/// Pairings drawn for each person in the pairing pool.
pub const PAIRS_PER_PERSON: usize = 8;
/// Minimum distance between a scored trial and its consistency duplicate.
pub const MIN_DUPLICATE_GAP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExperimentId {
    #[serde(rename = "exp1_G")]
    Exp1G,
    #[serde(rename = "exp2_GE")]
    Exp2GE,
    #[serde(rename = "exp3_GEFA")]
    Exp3GEFA,
    #[serde(rename = "exp4_GEFA_F2V")]
    Exp4GEFAF2V,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 4] = [
        ExperimentId::Exp1G,
        ExperimentId::Exp2GE,
        ExperimentId::Exp3GEFA,
        ExperimentId::Exp4GEFAF2V,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Exp1G => "exp1_G",
            ExperimentId::Exp2GE => "exp2_GE",
            ExperimentId::Exp3GEFA => "exp3_GEFA",
            ExperimentId::Exp4GEFAF2V => "exp4_GEFA_F2V",
        }
    }

    pub fn spec(self) -> ExperimentSpec {
        let (direction, constraint) = match self {
            ExperimentId::Exp1G => (Direction::V2F, PairConstraint::Gender),
            ExperimentId::Exp2GE => (Direction::V2F, PairConstraint::GenderEthnicity),
            ExperimentId::Exp3GEFA => (Direction::V2F, PairConstraint::AllFour),
            ExperimentId::Exp4GEFAF2V => (Direction::F2V, PairConstraint::AllFour),
        };
        ExperimentSpec {
            id: self,
            direction,
            constraint,
            n_tasks: N_SCORED,
            n_controls: N_CONSISTENCY + N_CORRECTNESS,
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = StudyError;

    fn from_str(s: &str) -> Result<Self, StudyError> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| StudyError::BadRequest(format!("unknown experiment `{s}`")))
    }
}

/// Attributes the two persons of a scored pair must share.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairConstraint {
    Gender,
    GenderEthnicity,
    /// Gender, ethnicity, fluency and age group.
    AllFour,
}

/// Grouping key under a constraint: persons pair only within one key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintKey {
    Gender(Gender),
    GenderEthnicity(Gender, Ethnicity),
    Cell(Demographics),
}

impl PairConstraint {
    pub fn key(self, d: &Demographics) -> ConstraintKey {
        match self {
            PairConstraint::Gender => ConstraintKey::Gender(d.gender),
            PairConstraint::GenderEthnicity => {
                ConstraintKey::GenderEthnicity(d.gender, d.ethnicity)
            }
            PairConstraint::AllFour => ConstraintKey::Cell(*d),
        }
    }

    pub fn admits(self, a: &Demographics, b: &Demographics) -> bool {
        self.key(a) == self.key(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub direction: Direction,
    pub constraint: PairConstraint,
    pub n_tasks: usize,
    pub n_controls: usize,
}
