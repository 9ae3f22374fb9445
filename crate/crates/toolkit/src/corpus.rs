//! Bundled example sentences with their gold annotations (JSON Lines).

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use attrclause_core::evalkit::{Score, Variant};
use attrclause_core::morphology::{AnalysisError, Analyzer};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const TAG_IN_SCOPE: &str = "in-scope";
pub const TAG_PAPER_VARIANT: &str = "paper-variant";

/// Gold restructuring: either split into the two output sentences, or kept
/// as printed when it does not follow the local rewrite rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PreeditGold {
    Split { sentence_a: String, sentence_b: String },
    Verbatim(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gold {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_noun: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preedit_gold: Option<PreeditGold>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub translations: BTreeMap<Variant, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scores: BTreeMap<Variant, Score>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub source_text: String,
    pub source_citation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Gold>,
    #[serde(default)]
    pub tags: Vec<String>,
}

impl CorpusEntry {
    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }

    pub fn head_noun(&self) -> Option<&str> {
        self.gold.as_ref()?.head_noun.as_deref()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: invalid field `{field}`: {reason}")]
    SchemaError { line: usize, field: String, reason: String },
    #[error("line {line}: duplicate id {id:?} (first seen on line {first_line})")]
    DuplicateId { id: String, line: usize, first_line: usize },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

fn schema(line: usize, field: &str, reason: impl Into<String>) -> CorpusError {
    CorpusError::SchemaError { line, field: field.to_string(), reason: reason.into() }
}

fn check_fields(line: usize, v: &Value) -> Result<(), CorpusError> {
    let obj = v.as_object().ok_or_else(|| schema(line, "<root>", "expected an object"))?;
    for f in ["id", "source_text", "source_citation"] {
        match obj.get(f) {
            Some(Value::String(s)) if !s.trim().is_empty() => {}
            Some(_) => return Err(schema(line, f, "expected a non-empty string")),
            None => return Err(schema(line, f, "missing")),
        }
    }
    if let Some(tags) = obj.get("tags") {
        let ok = tags.as_array().is_some_and(|a| a.iter().all(Value::is_string));
        if !ok {
            return Err(schema(line, "tags", "expected a list of strings"));
        }
    }
    let Some(gold) = obj.get("gold").filter(|g| !g.is_null()) else {
        return Ok(());
    };
    let gold = gold.as_object().ok_or_else(|| schema(line, "gold", "expected an object"))?;
    if let Some(h) = gold.get("head_noun") {
        if !h.as_str().is_some_and(|s| !s.is_empty()) {
            return Err(schema(line, "gold.head_noun", "expected a non-empty string"));
        }
    }
    if let Some(p) = gold.get("preedit_gold") {
        let ok = p.is_string()
            || p.as_object().is_some_and(|o| {
                o.len() == 2 && o.get("sentence_a").is_some_and(Value::is_string) && o.get("sentence_b").is_some_and(Value::is_string)
            });
        if !ok {
            return Err(schema(line, "gold.preedit_gold", "expected a string or {sentence_a, sentence_b}"));
        }
    }
    if let Some(t) = gold.get("translations") {
        let ok = t.as_object().is_some_and(|o| o.values().all(Value::is_string));
        if !ok {
            return Err(schema(line, "gold.translations", "expected a map of strings"));
        }
    }
    if let Some(s) = gold.get("scores") {
        let o = s.as_object().ok_or_else(|| schema(line, "gold.scores", "expected a map"))?;
        for (k, v) in o {
            let field = format!("gold.scores.{k}");
            let n = v.as_i64().ok_or_else(|| schema(line, &field, "expected an integer"))?;
            Score::new(n).map_err(|e| schema(line, &field, e.to_string()))?;
        }
    }
    Ok(())
}

/// Parses and validates a corpus. Blank lines are skipped.
pub fn parse(src: &str) -> Result<Vec<CorpusEntry>, CorpusError> {
    let mut out = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(raw).map_err(|e| schema(line, "<json>", e.to_string()))?;
        check_fields(line, &v)?;
        let entry: CorpusEntry = serde_json::from_value(v).map_err(|e| schema(line, "<entry>", e.to_string()))?;
        if entry.has_tag(TAG_IN_SCOPE) && entry.head_noun().is_none() {
            return Err(schema(line, "gold.head_noun", "required for in-scope entries"));
        }
        if let Some(&first_line) = seen.get(&entry.id) {
            return Err(CorpusError::DuplicateId { id: entry.id, line, first_line });
        }
        seen.insert(entry.id.clone(), line);
        out.push(entry);
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<Vec<CorpusEntry>, CorpusError> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn to_jsonl(entries: &[CorpusEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("serializable"));
        out.push('\n');
    }
    out
}

/// Replaces `path` atomically.
pub fn save(path: &Path, entries: &[CorpusEntry]) -> Result<(), CorpusError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(to_jsonl(entries).as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub entry_id: String,
    pub message: String,
}

/// Checks fixture coverage, the reconstruction invariant and that gold head
/// nouns occur as a contiguous token run. Empty on success.
pub fn validate(entries: &[CorpusEntry], analyzer: &dyn Analyzer) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut diag = |id: &str, message: String| out.push(Diagnostic { entry_id: id.to_string(), message });
    for e in entries {
        let sentence = match analyzer.analyze(&e.source_text) {
            Ok(s) => s,
            Err(AnalysisError::FixtureMiss { .. }) => {
                diag(&e.id, "no tokenization fixture for source_text".to_string());
                continue;
            }
            Err(err) => {
                diag(&e.id, format!("analysis failed: {err}"));
                continue;
            }
        };
        if let Err(err) = sentence.check_invariants() {
            diag(&e.id, format!("token invariants violated: {err}"));
        }
        if sentence.reconstruct() != e.source_text {
            diag(&e.id, "tokens do not reconstruct source_text".to_string());
        }
        if let Some(head) = e.head_noun() {
            let surfaces: Vec<&str> = sentence.tokens.iter().map(|t| t.surface.as_str()).collect();
            let found = (0..surfaces.len()).any(|i| {
                let mut acc = String::new();
                surfaces[i..].iter().any(|s| {
                    acc.push_str(s);
                    acc == head
                })
            });
            if !found {
                diag(&e.id, format!("gold head noun {head:?} is not a token sequence"));
            }
        }
    }
    out
}
