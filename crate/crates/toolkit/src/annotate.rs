//! Annotation log IO and the scoring session.

use std::collections::{HashSet, VecDeque};
use std::io::{self, BufRead, Write};
use std::path::Path;

use attrclause_core::evalkit::{Annotation, PatternLabel, Rubric, Score, Variant};
use attrclause_core::prompts::TranslationRecord;

use crate::corpus::CorpusEntry;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("{0}")]
    Io(#[from] io::Error),
}

fn parse_jsonl<T: serde::de::DeserializeOwned>(src: &str) -> Result<Vec<T>, LogError> {
    src.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| LogError::Malformed { line: i + 1, reason: e.to_string() }))
        .collect()
}

/// Annotation log, one JSON object per line. Out-of-range scores are
/// rejected here.
pub fn parse_log(src: &str) -> Result<Vec<Annotation>, LogError> {
    parse_jsonl(src)
}

pub fn parse_labels(src: &str) -> Result<Vec<PatternLabel>, LogError> {
    parse_jsonl(src)
}

/// A missing file is an empty log.
pub fn load_log(path: &Path) -> Result<Vec<Annotation>, LogError> {
    match std::fs::read_to_string(path) {
        Ok(s) => parse_log(&s),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}

/// One translation to be scored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationItem {
    pub entry_id: String,
    pub variant: Variant,
    pub source: String,
    pub translation: String,
}

/// Gold translations from the corpus, optionally restricted to `variants`.
pub fn items_from_corpus(entries: &[CorpusEntry], variants: &[Variant]) -> Vec<AnnotationItem> {
    let mut out = Vec::new();
    for e in entries {
        let Some(gold) = &e.gold else { continue };
        for (v, t) in &gold.translations {
            if variants.is_empty() || variants.contains(v) {
                out.push(AnnotationItem {
                    entry_id: e.id.clone(),
                    variant: v.clone(),
                    source: e.source_text.clone(),
                    translation: t.clone(),
                });
            }
        }
    }
    out
}

/// Pipeline outputs; the variant is the strategy name.
pub fn items_from_records(records: &[TranslationRecord], entries: &[CorpusEntry]) -> Vec<AnnotationItem> {
    records
        .iter()
        .map(|r| AnnotationItem {
            entry_id: r.sentence_id.clone(),
            variant: Variant::from(r.strategy.name()),
            source: entries
                .iter()
                .find(|e| e.id == r.sentence_id)
                .map(|e| e.source_text.clone())
                .unwrap_or_default(),
            translation: r.final_text.clone(),
        })
        .collect()
}

/// Answers separated by commas or whitespace, read lazily.
pub struct AnswerReader<R> {
    input: R,
    pending: VecDeque<String>,
}

impl<R: BufRead> AnswerReader<R> {
    pub fn new(input: R) -> Self {
        Self { input, pending: VecDeque::new() }
    }

    pub fn next_answer(&mut self) -> io::Result<Option<String>> {
        loop {
            if let Some(a) = self.pending.pop_front() {
                return Ok(Some(a));
            }
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Ok(None);
            }
            self.pending.extend(
                line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).map(str::to_string),
            );
        }
    }
}

pub type SessionKey = (String, Variant, String);

pub fn session_key(a: &Annotation) -> SessionKey {
    (a.entry_id.clone(), a.variant.clone(), a.annotator_id.clone())
}

/// Shows each item with the rubric and records one score per item. Each
/// annotation is written to `sink` and flushed before the next prompt.
/// Items already in `done` are skipped; `q` or end of input stops early.
#[allow(clippy::too_many_arguments)]
pub fn annotate_session<R: BufRead>(
    items: &[AnnotationItem],
    rubric: &Rubric,
    annotator_id: &str,
    answers: &mut AnswerReader<R>,
    display: &mut dyn Write,
    sink: &mut dyn Write,
    done: &HashSet<SessionKey>,
    clock: &dyn Fn() -> String,
) -> io::Result<Vec<Annotation>> {
    let mut out = Vec::new();
    let todo: Vec<&AnnotationItem> = items
        .iter()
        .filter(|it| !done.contains(&(it.entry_id.clone(), it.variant.clone(), annotator_id.to_string())))
        .collect();
    for (i, item) in todo.iter().enumerate() {
        writeln!(display, "[{}/{}] {} ({})", i + 1, todo.len(), item.entry_id, item.variant)?;
        writeln!(display, "source:      {}", item.source)?;
        writeln!(display, "translation: {}", item.translation)?;
        for (score, text) in rubric.levels() {
            writeln!(display, "  {}  {}", score.get(), text)?;
        }
        let score = loop {
            write!(display, "score (1-5, q to quit): ")?;
            display.flush()?;
            let Some(answer) = answers.next_answer()? else {
                writeln!(display)?;
                return Ok(out);
            };
            if answer.eq_ignore_ascii_case("q") {
                return Ok(out);
            }
            match answer.parse::<i64>().ok().and_then(|n| Score::new(n).ok()) {
                Some(s) => break s,
                None => writeln!(display, "invalid answer {answer:?}")?,
            }
        };
        let a = Annotation {
            entry_id: item.entry_id.clone(),
            variant: item.variant.clone(),
            score,
            annotator_id: annotator_id.to_string(),
            timestamp: clock(),
            pattern: None,
        };
        writeln!(sink, "{}", serde_json::to_string(&a).expect("serializable"))?;
        sink.flush()?;
        out.push(a);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(n: usize) -> Vec<AnnotationItem> {
        (0..n)
            .map(|i| AnnotationItem {
                entry_id: format!("e{i}"),
                variant: Variant::BeforePrompt,
                source: "s".into(),
                translation: "t".into(),
            })
            .collect()
    }

    fn run(items: &[AnnotationItem], script: &str, done: &HashSet<SessionKey>) -> (Vec<Annotation>, String, String) {
        let mut answers = AnswerReader::new(script.as_bytes());
        let (mut display, mut sink) = (Vec::new(), Vec::new());
        let got = annotate_session(
            items,
            &Rubric::default(),
            "ann",
            &mut answers,
            &mut display,
            &mut sink,
            done,
            &|| "2024-01-01T00:00:00Z".to_string(),
        )
        .unwrap();
        (got, String::from_utf8(display).unwrap(), String::from_utf8(sink).unwrap())
    }

    #[test]
    fn scripted_scores() {
        let (got, _, sink) = run(&items(5), "3,4,3,3,3", &HashSet::new());
        let scores: Vec<u8> = got.iter().map(|a| a.score.get()).collect();
        assert_eq!(scores, [3, 4, 3, 3, 3]);
        assert_eq!(parse_log(&sink).unwrap(), got);
    }

    #[test]
    fn invalid_answer_reprompts() {
        let (got, display, _) = run(&items(1), "9 x 2", &HashSet::new());
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].score.get(), 2);
        assert_eq!(display.matches("invalid answer").count(), 2);
    }

    #[test]
    fn empty_items_and_early_stop() {
        assert!(run(&[], "5", &HashSet::new()).0.is_empty());
        let (got, _, sink) = run(&items(3), "4\n", &HashSet::new());
        assert_eq!(got.len(), 1);
        assert_eq!(sink.lines().count(), 1);
        assert_eq!(run(&items(3), "q 5", &HashSet::new()).0.len(), 0);
    }

    #[test]
    fn already_scored_items_are_skipped() {
        let done: HashSet<SessionKey> = [("e0".to_string(), Variant::BeforePrompt, "ann".to_string())].into();
        let (got, _, _) = run(&items(2), "5 5", &done);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].entry_id, "e1");
    }

    #[test]
    fn log_rejects_out_of_range() {
        let line = r#"{"entry_id":"a","variant":"before_prompt","score":6,"annotator_id":"x","timestamp":"t"}"#;
        assert!(matches!(parse_log(line), Err(LogError::Malformed { line: 1, .. })));
    }
}
