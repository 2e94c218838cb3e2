//! Plain-text file formats.
//!
//! Every document starts with a one-line header `strongmin-<kind> v1`
//! followed by a JSON body. Infinite values are written as the token `"inf"`.
//! Transcripts are JSON lines after the header; data series are two numeric
//! columns after a `#` header.

use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::functions::ExtFn;
use crate::metric::MetricSpace;
use crate::perturbation::{BumpSpec, Perturbation};
use crate::solver::{FnIndex, StrongMinCertificate, Transcript, TranscriptEntry};

pub const VERSION: &str = "v1";

/// Serde adapter for `f64` that writes `+inf` as `"inf"` (and `-inf` as `"-inf"`).
pub mod ext_f64 {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Token(String),
    }

    pub fn to_repr(v: f64) -> std::result::Result<impl Serialize, String> {
        if v.is_nan() {
            return Err("NaN cannot be serialized".into());
        }
        Ok(if v == f64::INFINITY {
            Repr::Token("inf".into())
        } else if v == f64::NEG_INFINITY {
            Repr::Token("-inf".into())
        } else {
            Repr::Num(v)
        })
    }

    fn from_repr(r: Repr) -> std::result::Result<f64, String> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Token(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Token(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Token(t) => Err(format!("unexpected token {t:?}")),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_repr(*v).map_err(serde::ser::Error::custom)?.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?).map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
            let reprs = v
                .iter()
                .map(|&x| to_repr(x))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(serde::ser::Error::custom)?;
            reprs.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?
                .into_iter()
                .map(|r| from_repr(r).map_err(serde::de::Error::custom))
                .collect()
        }
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(
            v: &Option<f64>,
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            match v {
                None => s.serialize_none(),
                Some(x) => s.serialize_some(&to_repr(*x).map_err(serde::ser::Error::custom)?),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Option<f64>, D::Error> {
            Option::<Repr>::deserialize(d)?
                .map(|r| from_repr(r).map_err(serde::de::Error::custom))
                .transpose()
        }
    }
}

fn header(kind: &str) -> String {
    format!("strongmin-{kind} {VERSION}")
}

fn format_err(e: impl std::fmt::Display) -> Error {
    Error::Format(e.to_string())
}

/// Header line plus pretty-printed JSON body.
pub fn write_doc<T: Serialize + ?Sized>(kind: &str, body: &T) -> Result<String> {
    let json = serde_json::to_string_pretty(body).map_err(format_err)?;
    Ok(format!("{}\n{json}\n", header(kind)))
}

/// Checks the header line and parses the body.
pub fn read_doc<T: DeserializeOwned>(kind: &str, text: &str) -> Result<T> {
    let body = strip_header(kind, text)?;
    serde_json::from_str(body).map_err(format_err)
}

fn strip_header<'a>(kind: &str, text: &'a str) -> Result<&'a str> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let want = header(kind);
    if first.trim_end() != want {
        return Err(Error::Format(format!(
            "expected header {want:?}, found {:?}",
            first.trim_end()
        )));
    }
    Ok(rest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDoc {
    pub points: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<f64>>>,
    pub dist: Vec<Vec<f64>>,
}

pub fn space_to_text(space: &MetricSpace) -> Result<String> {
    let doc = SpaceDoc {
        points: space.labels().to_vec(),
        coords: space.coords().map(<[_]>::to_vec),
        dist: (0..space.len()).map(|i| space.row(i).to_vec()).collect(),
    };
    write_doc("space", &doc)
}

/// Parses a space and validates the metric axioms with `tol_metric`.
pub fn space_from_text(text: &str, tol_metric: f64) -> Result<MetricSpace> {
    let doc: SpaceDoc = read_doc("space", text)?;
    MetricSpace::checked(doc.points, doc.coords, doc.dist, tol_metric)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDoc {
    pub space_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(with = "ext_f64::vec")]
    pub values: Vec<f64>,
}

pub fn function_to_text(f: &ExtFn, space_ref: &str) -> Result<String> {
    write_doc(
        "function",
        &FunctionDoc {
            space_ref: space_ref.to_string(),
            name: f.name().map(str::to_string),
            values: f.values().to_vec(),
        },
    )
}

pub fn function_from_doc(doc: FunctionDoc, space: Arc<MetricSpace>) -> Result<ExtFn> {
    let f = ExtFn::new(space, doc.values)?;
    Ok(match doc.name {
        Some(n) => f.with_name(n),
        None => f,
    })
}

pub fn function_from_text(text: &str, space: Arc<MetricSpace>) -> Result<ExtFn> {
    function_from_doc(read_doc("function", text)?, space)
}

/// References are paths relative to the sequence document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDoc {
    pub space_ref: String,
    pub terms: Vec<String>,
    pub limit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTermDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump: Option<BumpSpec>,
    /// Present only for terms that are not bumps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    pub norm_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationDoc {
    pub space_ref: String,
    pub norm_bound: f64,
    pub terms: Vec<PerturbationTermDoc>,
    /// The summed values, as a checksum for re-evaluation.
    pub total: Vec<f64>,
}

pub fn perturbation_to_text(g: &Perturbation, space_ref: &str) -> Result<String> {
    let terms = g
        .terms()
        .iter()
        .map(|t| PerturbationTermDoc {
            bump: t.spec,
            values: t.spec.is_none().then(|| t.values.values().to_vec()),
            norm_bound: t.norm_bound,
        })
        .collect();
    write_doc(
        "perturbation",
        &PerturbationDoc {
            space_ref: space_ref.to_string(),
            norm_bound: g.norm_bound(),
            terms,
            total: g.total().values().to_vec(),
        },
    )
}

/// Re-evaluates every term on `space` and checks the recorded total bit for bit.
pub fn perturbation_from_text(text: &str, space: Arc<MetricSpace>) -> Result<Perturbation> {
    let doc: PerturbationDoc = read_doc("perturbation", text)?;
    let mut g = Perturbation::zero(space.clone());
    for t in doc.terms {
        g = match (t.bump, t.values) {
            (Some(spec), _) => g.accumulate_spec(spec, t.norm_bound)?,
            (None, Some(v)) => g.accumulate(ExtFn::new(space.clone(), v)?, t.norm_bound)?,
            (None, None) => return Err(Error::Format("term has neither bump nor values".into())),
        };
    }
    if g.total().values() != doc.total.as_slice() {
        return Err(Error::Format(
            "re-evaluated total differs from the file".into(),
        ));
    }
    Ok(g)
}

/// Header line, then one JSON object per line.
pub fn transcript_to_text(t: &Transcript) -> Result<String> {
    let mut out = header("transcript");
    out.push('\n');
    for e in &t.entries {
        out.push_str(&serde_json::to_string(e).map_err(format_err)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn transcript_from_text(text: &str) -> Result<Transcript> {
    let body = strip_header("transcript", text)?;
    let entries = body
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str::<TranscriptEntry>(l).map_err(format_err))
        .collect::<Result<Vec<_>>>()?;
    Ok(Transcript { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateDoc {
    pub function: FnIndex,
    pub certificate: Option<StrongMinCertificate>,
}

pub fn certificates_to_text(certs: &[(FnIndex, Option<&StrongMinCertificate>)]) -> Result<String> {
    let docs: Vec<CertificateDoc> = certs
        .iter()
        .map(|(function, c)| CertificateDoc {
            function: *function,
            certificate: c.cloned(),
        })
        .collect();
    write_doc("certificates", &docs)
}

pub fn certificates_from_text(text: &str) -> Result<Vec<CertificateDoc>> {
    read_doc("certificates", text)
}

/// Two-column numeric series with a `#` header naming the columns.
pub fn series_to_text(x_name: &str, y_name: &str, points: &[(f64, f64)]) -> String {
    let mut out = format!("# {} {x_name} {y_name}\n", header("series"));
    for (x, y) in points {
        out.push_str(&format!("{x} {y}\n"));
    }
    out
}

pub fn series_from_text(text: &str) -> Result<Vec<(f64, f64)>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let mut cols = l.split_whitespace().map(str::parse::<f64>);
            match (cols.next(), cols.next(), cols.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => Ok((x, y)),
                _ => Err(Error::Format(format!("bad series line {l:?}"))),
            }
        })
        .collect()
}
