use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "m")]
    Male,
    #[serde(rename = "f")]
    Female,
}

/// Ethnic group code, 1 through 6:
///
/// | code | group |
/// |------|-------|
/// | 1 | American Indian |
/// | 2 | Asian and Pacific Islander |
/// | 3 | black or African American |
/// | 4 | Hispanic or Latino |
/// | 5 | non-Hispanic white |
/// | 6 | others |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Ethnicity(u8);

impl Ethnicity {
    pub const ALL: [Ethnicity; 6] = [
        Ethnicity(1),
        Ethnicity(2),
        Ethnicity(3),
        Ethnicity(4),
        Ethnicity(5),
        Ethnicity(6),
    ];

    pub fn new(code: u8) -> Result<Self, Error> {
        if (1..=6).contains(&code) {
            Ok(Self(code))
        } else {
            Err(Error::Domain(format!(
                "ethnicity code must be 1..=6, got {code}"
            )))
        }
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn description(self) -> &'static str {
        match self.0 {
            1 => "American Indian",
            2 => "Asian and Pacific Islander",
            3 => "black or African American",
            4 => "Hispanic or Latino",
            5 => "non-Hispanic white",
            _ => "others",
        }
    }
}

impl TryFrom<u8> for Ethnicity {
    type Error = Error;

    fn try_from(code: u8) -> Result<Self, Error> {
        Self::new(code)
    }
}

impl From<Ethnicity> for u8 {
    fn from(e: Ethnicity) -> u8 {
        e.0
    }
}

/// Whether English is the speaker's first language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Fluency {
    #[serde(rename = "Y")]
    Native,
    #[serde(rename = "N")]
    NonNative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeGroup {
    #[serde(rename = "<=19")]
    UpTo19,
    #[serde(rename = "20s")]
    Twenties,
    #[serde(rename = "30s")]
    Thirties,
    #[serde(rename = "40s")]
    Forties,
    #[serde(rename = "50s")]
    Fifties,
    #[serde(rename = "60s")]
    Sixties,
    #[serde(rename = "70s")]
    Seventies,
    #[serde(rename = ">=80")]
    From80,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 8] = [
        AgeGroup::UpTo19,
        AgeGroup::Twenties,
        AgeGroup::Thirties,
        AgeGroup::Forties,
        AgeGroup::Fifties,
        AgeGroup::Sixties,
        AgeGroup::Seventies,
        AgeGroup::From80,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AgeGroup::UpTo19 => "<=19",
            AgeGroup::Twenties => "20s",
            AgeGroup::Thirties => "30s",
            AgeGroup::Forties => "40s",
            AgeGroup::Fifties => "50s",
            AgeGroup::Sixties => "60s",
            AgeGroup::Seventies => "70s",
            AgeGroup::From80 => ">=80",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Male => "m",
            Gender::Female => "f",
        })
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "m" | "M" | "male" => Ok(Gender::Male),
            "f" | "F" | "female" => Ok(Gender::Female),
            other => Err(Error::Domain(format!("unknown gender `{other}`"))),
        }
    }
}

impl fmt::Display for Ethnicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Ethnicity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let code: u8 = s
            .parse()
            .map_err(|_| Error::Domain(format!("unknown ethnicity code `{s}`")))?;
        Self::new(code)
    }
}

impl fmt::Display for Fluency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fluency::Native => "Y",
            Fluency::NonNative => "N",
        })
    }
}

impl FromStr for Fluency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "Y" | "y" => Ok(Fluency::Native),
            "N" | "n" => Ok(Fluency::NonNative),
            other => Err(Error::Domain(format!("unknown fluency `{other}`"))),
        }
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AgeGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        AgeGroup::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| Error::Domain(format!("unknown age group `{s}`")))
    }
}

/// The four questionnaire fields shared by stimulus records and study
/// participants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Demographics {
    pub gender: Gender,
    pub ethnicity: Ethnicity,
    pub fluency: Fluency,
    pub age_group: AgeGroup,
}

impl fmt::Display for Demographics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}",
            self.gender, self.ethnicity, self.fluency, self.age_group
        )
    }
}

/// Parses `gender/ethnicity/fluency/age`, e.g. `m/5/Y/30s`.
impl FromStr for Demographics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let parts: Vec<&str> = s.split('/').collect();
        let [g, e, fl, a] = parts.as_slice() else {
            return Err(Error::Domain(format!(
                "expected gender/ethnicity/fluency/age, got `{s}`"
            )));
        };
        Ok(Demographics {
            gender: g.parse()?,
            ethnicity: e.parse()?,
            fluency: fl.parse()?,
            age_group: a.parse()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demographics_round_trip_text() {
        let d: Demographics = "m/5/Y/30s".parse().unwrap();
        assert_eq!(d.gender, Gender::Male);
        assert_eq!(d.ethnicity.code(), 5);
        assert_eq!(d.to_string(), "m/5/Y/30s");
        assert!("m/7/Y/30s".parse::<Demographics>().is_err());
        assert!("m/5/Y".parse::<Demographics>().is_err());
    }

    #[test]
    fn serde_codes() {
        assert_eq!(
            serde_json::to_string(&AgeGroup::From80).unwrap(),
            "\">=80\""
        );
        assert!(serde_json::from_str::<Ethnicity>("0").is_err());
        assert_eq!(
            serde_json::from_str::<Ethnicity>("6")
                .unwrap()
                .description(),
            "others"
        );
    }
}
