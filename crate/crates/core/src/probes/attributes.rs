use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ProbeData;
use crate::datamodel::{
    AgeGroup, ClipRecord, Dataset, Ethnicity, Fluency, Gender, Modality, RANDOM_ATTR,
};
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinarizeStrategy {
    MedianSplit,
    Quartiles,
}

impl FromStr for BinarizeStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median_split" | "median" => Ok(Self::MedianSplit),
            "quartiles" => Ok(Self::Quartiles),
            _ => Err(Error::Config(format!("unknown binarize strategy `{s}`"))),
        }
    }
}

/// Linear-interpolated sample quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Discretizes continuous values. The label of a value is the number of
/// cut points it strictly exceeds, so values equal to a cut point fall low.
pub fn binarize_continuous(values: &[f64], strategy: BinarizeStrategy) -> Result<Vec<u8>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "binarize_continuous: non-finite value".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 2 {
        return Err(Error::Domain(
            "binarize_continuous needs at least 2 distinct values".into(),
        ));
    }
    let mut all = values.to_vec();
    all.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = match strategy {
        BinarizeStrategy::MedianSplit => vec![quantile(&all, 0.5)],
        BinarizeStrategy::Quartiles => vec![
            quantile(&all, 0.25),
            quantile(&all, 0.5),
            quantile(&all, 0.75),
        ],
    };
    Ok(values
        .iter()
        .map(|v| cuts.iter().filter(|&&c| *v > c).count() as u8)
        .collect())
}

/// Coarse age buckets used for probing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgeBucket {
    Under30,
    Thirties,
    Forties,
    Fifties,
    From60,
}

impl AgeBucket {
    pub const ALL: [AgeBucket; 5] = [
        AgeBucket::Under30,
        AgeBucket::Thirties,
        AgeBucket::Forties,
        AgeBucket::Fifties,
        AgeBucket::From60,
    ];

    pub fn of(group: AgeGroup) -> AgeBucket {
        match group {
            AgeGroup::UpTo19 | AgeGroup::Twenties => AgeBucket::Under30,
            AgeGroup::Thirties => AgeBucket::Thirties,
            AgeGroup::Forties => AgeBucket::Forties,
            AgeGroup::Fifties => AgeBucket::Fifties,
            AgeGroup::Sixties | AgeGroup::Seventies | AgeGroup::From80 => AgeBucket::From60,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeBucket::Under30 => "<30",
            AgeBucket::Thirties => "30s",
            AgeBucket::Forties => "40s",
            AgeBucket::Fifties => "50s",
            AgeBucket::From60 => ">=60",
        }
    }
}

/// A one-vs-all probe target resolvable from manifest annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Attribute {
    /// Positive class: male.
    Gender,
    /// Positive class: native speaker.
    Fluency,
    Age(AgeBucket),
    Ethnicity(Ethnicity),
    /// A binary facial attribute; non-zero is positive.
    Facial(String),
    /// Upper half of voice pitch.
    PitchMedian,
    /// Upper half of loudness.
    LoudnessMedian,
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Attribute::Gender => f.write_str("gender"),
            Attribute::Fluency => f.write_str("fluency"),
            Attribute::Age(b) => write!(f, "age:{}", b.label()),
            Attribute::Ethnicity(e) => write!(f, "ethnicity:{}", e.code()),
            Attribute::Facial(name) => write!(f, "facial:{name}"),
            Attribute::PitchMedian => f.write_str("pitch"),
            Attribute::LoudnessMedian => f.write_str("loudness"),
        }
    }
}

impl FromStr for Attribute {
    type Err = Error;

    /// Accepts `gender`, `fluency`, `age:<bucket>`, `ethnicity:<1-6>`,
    /// `facial:<name>`, `pitch`, `loudness`, and `random_attr`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown probe attribute `{s}`"));
        match s.split_once(':') {
            None => match s {
                "gender" => Ok(Attribute::Gender),
                "fluency" => Ok(Attribute::Fluency),
                "pitch" => Ok(Attribute::PitchMedian),
                "loudness" => Ok(Attribute::LoudnessMedian),
                RANDOM_ATTR => Ok(Attribute::Facial(RANDOM_ATTR.into())),
                _ => Err(bad()),
            },
            Some(("age", b)) => AgeBucket::ALL
                .into_iter()
                .find(|x| x.label() == b)
                .map(Attribute::Age)
                .ok_or_else(bad),
            Some(("ethnicity", code)) => {
                let code: u8 = code.parse().map_err(|_| bad())?;
                Ok(Attribute::Ethnicity(Ethnicity::new(code)?))
            }
            Some(("facial", name)) if !name.is_empty() => Ok(Attribute::Facial(name.into())),
            _ => Err(bad()),
        }
    }
}

impl Attribute {
    /// Label of one record; `None` if the record lacks the annotation.
    /// Median splits need the precomputed `median`.
    fn label(&self, r: &ClipRecord, median: Option<f64>) -> Option<bool> {
        match self {
            Attribute::Gender => Some(r.gender == Gender::Male),
            Attribute::Fluency => Some(r.fluency == Fluency::Native),
            Attribute::Age(b) => Some(AgeBucket::of(r.age_group) == *b),
            Attribute::Ethnicity(e) => Some(r.ethnicity == *e),
            Attribute::Facial(name) => r.facial_attrs.get(name).map(|&v| v != 0),
            Attribute::PitchMedian => Some(r.pitch_hz? > median?),
            Attribute::LoudnessMedian => Some(r.loudness? > median?),
        }
    }

    fn continuous(&self, r: &ClipRecord) -> Option<f64> {
        match self {
            Attribute::PitchMedian => r.pitch_hz,
            Attribute::LoudnessMedian => r.loudness,
            _ => None,
        }
    }
}

/// Embeds every clip with a `modality` feature and a resolvable label.
pub fn probe_data(
    params: &ModelParams,
    dataset: &Dataset,
    modality: Modality,
    attribute: &Attribute,
) -> Result<ProbeData> {
    let records = &dataset.manifest.records;
    let median = {
        let values: Vec<f64> = records
            .iter()
            .filter_map(|r| attribute.continuous(r))
            .collect();
        if values.is_empty() {
            None
        } else {
            let mut sorted = values;
            sorted.sort_by(f64::total_cmp);
            Some(quantile(&sorted, 0.5))
        }
    };
    let mut data = ProbeData::default();
    for (i, r) in records.iter().enumerate() {
        let (Some(x), Some(label)) = (dataset.feature(i, modality), attribute.label(r, median))
        else {
            continue;
        };
        data.embeddings.push(params.embed(modality, x)?);
        data.identities.push(r.identity_id.clone());
        data.labels.push(label);
    }
    if data.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no {} clips carry attribute `{attribute}`",
            modality.as_str()
        )));
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_split_example() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        let labels = binarize_continuous(&v, BinarizeStrategy::MedianSplit).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn median_ties_fall_low() {
        let labels =
            binarize_continuous(&[1.0, 2.0, 2.0, 2.0, 3.0], BinarizeStrategy::MedianSplit).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 0, 1]);
    }

    #[test]
    fn quartile_example() {
        let v: Vec<f64> = (1..=8).map(f64::from).collect();
        let labels = binarize_continuous(&v, BinarizeStrategy::Quartiles).unwrap();
        assert_eq!(labels, vec![0, 0, 1, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn constant_input_errors() {
        assert!(binarize_continuous(&[4.0; 6], BinarizeStrategy::MedianSplit).is_err());
        assert!(binarize_continuous(&[], BinarizeStrategy::Quartiles).is_err());
    }

    #[test]
    fn attribute_round_trips() {
        for s in [
            "gender",
            "fluency",
            "age:<30",
            "age:>=60",
            "ethnicity:5",
            "facial:Big_nose",
            "pitch",
            "loudness",
        ] {
            assert_eq!(s.parse::<Attribute>().unwrap().to_string(), s);
        }
        assert_eq!(
            "random_attr".parse::<Attribute>().unwrap(),
            Attribute::Facial(RANDOM_ATTR.into())
        );
        for s in ["age:90s", "ethnicity:7", "facial:", "height"] {
            assert!(s.parse::<Attribute>().is_err(), "{s}");
        }
    }
}
