//! Two-part signatures and their JSON encoding.
//!
//! A signature document is one JSON object:
//!
//! ```json
//! {"version": 1, "mode": "classification", "global": [0.7, 0.3],
//!  "local": [{"pair": [0, 1], "scores": [0.2, 0.8]}]}
//! ```
//!
//! Local entries are sorted by pair. A signature file holds one document per
//! line, optionally preceded by a metadata line carrying the label names and
//! the pair set the local component was built for.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{LabelPair, LabelPairSet, LocalScores, MatchMode, Signature};
use crate::error::{LccError, Result};
use crate::matcher::{global_match_identification, Gallery};
use crate::models::ScoringModel;
use crate::pairs::LocalModelBank;

pub const SIGNATURE_VERSION: u64 = 1;

/// Sum tolerance applied to local vectors read back from a document.
pub const DOCUMENT_TOLERANCE: f64 = 1e-6;

fn local_component(x: ArrayView1<'_, f64>, bank: &LocalModelBank) -> Result<BTreeMap<LabelPair, LocalScores>> {
    bank.models()
        .iter()
        .map(|(&pair, model)| {
            let s = model.score(x)?;
            Ok((pair, (s[0], s[1])))
        })
        .collect()
}

/// Global probabilities from `global` plus one local vector per bank pair.
pub fn build_signature<M: ScoringModel + ?Sized>(
    x: ArrayView1<'_, f64>,
    global: &M,
    bank: &LocalModelBank,
) -> Result<Signature> {
    let g = global.score(x)?;
    if let Some(pair) = bank.pair_set().max_label().filter(|&hi| hi >= g.len()) {
        return Err(LccError::LabelOutOfRange {
            label: pair,
            class_count: g.len(),
        });
    }
    let local = local_component(x, bank)?;
    Signature::new(g, local, MatchMode::Classification)
}

/// Signatures for every row of `xs`, computed in parallel, in row order.
pub fn build_signatures<M: ScoringModel + ?Sized>(
    xs: ArrayView2<'_, f64>,
    global: &M,
    bank: &LocalModelBank,
) -> Result<Vec<Signature>> {
    (0..xs.nrows())
        .into_par_iter()
        .map(|i| build_signature(xs.row(i), global, bank))
        .collect()
}

/// Identification-mode signature: the global component is the per-identity
/// cosine matching vector against `gallery`.
pub fn build_identification_signature(
    probe: ArrayView1<'_, f64>,
    gallery: &Gallery,
    bank: &LocalModelBank,
) -> Result<Signature> {
    let (_, matching) = global_match_identification(probe, gallery)?;
    let local = local_component(probe, bank)?;
    Signature::new(matching, local, MatchMode::Identification)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignatureDoc {
    version: u64,
    mode: MatchMode,
    global: Vec<f64>,
    local: Vec<LocalEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LocalEntry {
    pair: LabelPair,
    scores: [f64; 2],
}

impl From<&Signature> for SignatureDoc {
    fn from(s: &Signature) -> Self {
        Self {
            version: SIGNATURE_VERSION,
            mode: s.mode(),
            global: s.global().to_vec(),
            local: s
                .local()
                .iter()
                .map(|(&pair, &(a, b))| LocalEntry { pair, scores: [a, b] })
                .collect(),
        }
    }
}

pub fn serialize_signature(s: &Signature) -> Vec<u8> {
    serde_json::to_vec(&SignatureDoc::from(s)).expect("signature documents always serialize")
}

pub fn deserialize_signature(bytes: &[u8]) -> Result<Signature> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| LccError::MalformedDocument(e.to_string()))?;
    signature_from_value(value)
}

fn signature_from_value(value: serde_json::Value) -> Result<Signature> {
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| LccError::MalformedDocument("missing integer field `version`".into()))?;
    if version != SIGNATURE_VERSION {
        return Err(LccError::VersionMismatch {
            found: version,
            expected: SIGNATURE_VERSION,
        });
    }
    let doc: SignatureDoc =
        serde_json::from_value(value).map_err(|e| LccError::MalformedDocument(e.to_string()))?;
    let n = doc.local.len();
    let local: BTreeMap<_, _> = doc
        .local
        .into_iter()
        .map(|e| (e.pair, (e.scores[0], e.scores[1])))
        .collect();
    if local.len() != n {
        return Err(LccError::MalformedDocument("duplicate pair in local component".into()));
    }
    let s = Signature::from_parts_unchecked(doc.global, local, doc.mode);
    s.check(DOCUMENT_TOLERANCE).map_err(|e| match e {
        LccError::InvariantViolation(_) => e,
        other => LccError::InvariantViolation(other.to_string()),
    })?;
    Ok(s)
}

/// Leading line of a signature file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureMetadata {
    pub label_names: Vec<String>,
    pub pair_set: LabelPairSet,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignatureFile {
    pub metadata: Option<SignatureMetadata>,
    pub signatures: Vec<Signature>,
}

pub fn write_signature_file<W: Write>(
    mut out: W,
    metadata: Option<&SignatureMetadata>,
    signatures: &[Signature],
) -> std::io::Result<()> {
    if let Some(meta) = metadata {
        serde_json::to_writer(&mut out, meta)?;
        out.write_all(b"\n")?;
    }
    for s in signatures {
        out.write_all(&serialize_signature(s))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads newline-delimited signature documents. Blank lines are skipped; a
/// metadata object is accepted only as the first document.
pub fn read_signature_file<R: BufRead>(input: R) -> Result<SignatureFile> {
    let mut file = SignatureFile::default();
    let mut seen_document = false;
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| LccError::MalformedDocument(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let at_line = |e: LccError| match e {
            LccError::MalformedDocument(m) => LccError::MalformedDocument(format!("line {}: {m}", lineno + 1)),
            LccError::InvariantViolation(m) => LccError::InvariantViolation(format!("line {}: {m}", lineno + 1)),
            other => other,
        };
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| at_line(LccError::MalformedDocument(e.to_string())))?;
        if value.get("label_names").is_some() {
            if seen_document {
                return Err(at_line(LccError::MalformedDocument(
                    "metadata must be the first line".into(),
                )));
            }
            let meta = serde_json::from_value(value)
                .map_err(|e| at_line(LccError::MalformedDocument(e.to_string())))?;
            file.metadata = Some(meta);
        } else {
            file.signatures.push(signature_from_value(value).map_err(at_line)?);
        }
        seen_document = true;
    }
    Ok(file)
}
