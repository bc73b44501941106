//! Flat-array JSON form for [`Vector`](super::Vector), for use with `#[serde(with = ...)]`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Vector;

pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
    v.as_slice().serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
    let coords = Vec::<f64>::deserialize(d)?;
    super::vector_from(&coords).map_err(serde::de::Error::custom)
}

pub mod option {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<Vector>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(|v| v.as_slice()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vector>, D::Error> {
        Option::<Vec<f64>>::deserialize(d)?
            .map(|c| super::super::vector_from(&c).map_err(serde::de::Error::custom))
            .transpose()
    }
}

pub mod list {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vector], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.as_slice()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vector>, D::Error> {
        Vec::<Vec<f64>>::deserialize(d)?
            .iter()
            .map(|c| super::super::vector_from(c).map_err(serde::de::Error::custom))
            .collect()
    }
}
