//! Point labels.
//!
//! Labels are self-describing values, not indices into a window: the same
//! label denotes the same point of the ambient space no matter which window
//! it appears in.  The derived `Ord` gives every label set a canonical
//! enumeration order, which keeps window layouts and JSON output
//! deterministic.

use std::fmt;

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

/// A point of some [`super::SpaceSpec`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    /// Point of an integer-labelled space.
    Int(i64),
    /// Point of an integer lattice.
    Tuple(Vec<i64>),
    /// Point of the fibered line: `base` positions the fiber, `level ≥ 0`
    /// the point inside it.
    Fiber { base: i64, level: i64 },
    /// Point of a disjoint power: copy index (1-based) plus a base point.
    Copy { copy: i64, point: Box<Label> },
    /// Base-space point of a sparse augmentation.
    Base(Box<Label>),
    /// Tail point of a sparse augmentation, `0` nearest the anchor.
    Tail(i64),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(n) => write!(f, "{n}"),
            Label::Tuple(v) => {
                write!(f, "(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
            Label::Fiber { base, level } => write!(f, "({base};{level})"),
            Label::Copy { copy, point } => write!(f, "{copy}#{point}"),
            Label::Base(p) => write!(f, "b:{p}"),
            Label::Tail(t) => write!(f, "t:{t}"),
        }
    }
}

impl Label {
    fn to_value(&self) -> Value {
        match self {
            Label::Int(n) => Value::from(*n),
            Label::Tuple(v) => Value::from(v.clone()),
            Label::Fiber { base, level } => serde_json::json!({"base": base, "level": level}),
            Label::Copy { copy, point } => {
                serde_json::json!({"copy": copy, "point": point.to_value()})
            }
            Label::Base(p) => serde_json::json!({"base_point": p.to_value()}),
            Label::Tail(t) => serde_json::json!({"tail": t}),
        }
    }

    fn from_value(v: &Value) -> Result<Label, String> {
        match v {
            Value::Number(n) => n
                .as_i64()
                .map(Label::Int)
                .ok_or_else(|| format!("label number {n} is not an integer")),
            Value::Array(items) => {
                let coords: Result<Vec<i64>, String> = items
                    .iter()
                    .map(|x| {
                        x.as_i64()
                            .ok_or_else(|| format!("tuple entry {x} is not an integer"))
                    })
                    .collect();
                Ok(Label::Tuple(coords?))
            }
            Value::Object(map) => {
                let int_field = |key: &str| {
                    map.get(key)
                        .and_then(Value::as_i64)
                        .ok_or_else(|| format!("label field {key} missing or not an integer"))
                };
                if map.contains_key("level") {
                    Ok(Label::Fiber {
                        base: int_field("base")?,
                        level: int_field("level")?,
                    })
                } else if map.contains_key("copy") {
                    let point = map.get("point").ok_or("copy label missing point")?;
                    Ok(Label::Copy {
                        copy: int_field("copy")?,
                        point: Box::new(Label::from_value(point)?),
                    })
                } else if let Some(p) = map.get("base_point") {
                    Ok(Label::Base(Box::new(Label::from_value(p)?)))
                } else if map.contains_key("tail") {
                    Ok(Label::Tail(int_field("tail")?))
                } else {
                    Err(format!("unrecognised label object {v}"))
                }
            }
            _ => Err(format!("unrecognised label {v}")),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Label, D::Error> {
        let v = Value::deserialize(deserializer)?;
        Label::from_value(&v).map_err(D::Error::custom)
    }
}
