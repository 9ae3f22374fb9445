//! Fixture files (JSON Lines) and the external-analyzer provider.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use attrclause_core::morphology::{
    parse_external_analysis, AnalysisError, Analyzer, ConjugationForm, FixtureAnalyzer, PosCoarse,
    Provenance, Token, TokenizedSentence,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureToken {
    pub surface: String,
    pub lemma: String,
    pub pos: PosCoarse,
    pub pos_fine: String,
    pub cform: Option<ConjugationForm>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub text: String,
    pub tokens: Vec<FixtureToken>,
}

impl FixtureRecord {
    pub fn into_sentence(self) -> Result<TokenizedSentence, AnalysisError> {
        let tokens = self
            .tokens
            .into_iter()
            .map(|t| Token::new(t.surface, t.lemma, t.pos, t.pos_fine).with_form(t.cform))
            .collect();
        TokenizedSentence::assemble(&self.text, tokens, Provenance::Fixture)
    }

    pub fn from_sentence(s: &TokenizedSentence) -> Self {
        Self {
            text: s.text.clone(),
            tokens: s
                .tokens
                .iter()
                .map(|t| FixtureToken {
                    surface: t.surface.clone(),
                    lemma: t.lemma.clone(),
                    pos: t.pos,
                    pos_fine: t.pos_fine.clone(),
                    cform: t.conjugation_form,
                })
                .collect(),
        }
    }
}

/// Parses a fixture file. Blank lines are skipped; line numbers are 1-based.
pub fn parse_fixtures(src: &str) -> Result<Vec<TokenizedSentence>, AnalysisError> {
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: FixtureRecord = serde_json::from_str(line)
            .map_err(|e| AnalysisError::MalformedRecord { line: i + 1, reason: e.to_string() })?;
        out.push(rec.into_sentence()?);
    }
    Ok(out)
}

pub fn fixtures_to_jsonl<'a>(sentences: impl IntoIterator<Item = &'a TokenizedSentence>) -> String {
    let mut out = String::new();
    for s in sentences {
        out.push_str(&serde_json::to_string(&FixtureRecord::from_sentence(s)).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn load_fixture_analyzer(path: &Path) -> anyhow::Result<FixtureAnalyzer> {
    let src = std::fs::read_to_string(path)?;
    Ok(FixtureAnalyzer::new(parse_fixtures(&src)?))
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

enum Source {
    /// A long-running analyzer fed one sentence per line, answering with
    /// records terminated by `EOS`.
    Process(Mutex<Process>),
    /// Pre-computed analysis files keyed by sentence text.
    Files { by_text: std::collections::BTreeMap<String, PathBuf> },
}

/// Analyzer consuming the `surface<TAB>features` / `EOS` exchange format.
pub struct ExternalAnalyzer {
    source: Source,
}

impl ExternalAnalyzer {
    /// Spawns `program args...` (for example `mecab`). Access to the process
    /// is serialized.
    pub fn spawn(program: &str, args: &[String]) -> std::io::Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = BufReader::new(child.stdout.take().expect("piped"));
        Ok(Self { source: Source::Process(Mutex::new(Process { child, stdin, stdout })) })
    }

    /// Uses pre-computed analysis files; `index` maps sentence text to a path.
    pub fn from_files(index: impl IntoIterator<Item = (String, PathBuf)>) -> Self {
        Self { source: Source::Files { by_text: index.into_iter().collect() } }
    }
}

impl Drop for ExternalAnalyzer {
    fn drop(&mut self) {
        if let Source::Process(p) = &self.source {
            if let Ok(mut p) = p.lock() {
                let _ = p.child.kill();
                let _ = p.child.wait();
            }
        }
    }
}

fn backend_err(e: impl std::fmt::Display) -> AnalysisError {
    AnalysisError::Backend(e.to_string())
}

impl Analyzer for ExternalAnalyzer {
    fn analyze(&self, text: &str) -> Result<TokenizedSentence, AnalysisError> {
        if text.trim().is_empty() {
            return Err(AnalysisError::EmptyInput);
        }
        let stream = match &self.source {
            Source::Files { by_text } => {
                let path = by_text
                    .get(text)
                    .ok_or_else(|| AnalysisError::FixtureMiss { text: text.to_string() })?;
                let mut s = String::new();
                std::fs::File::open(path).and_then(|mut f| f.read_to_string(&mut s)).map_err(backend_err)?;
                s
            }
            Source::Process(p) => {
                if text.contains('\n') {
                    return Err(backend_err("sentence contains a line break"));
                }
                let mut p = p.lock().map_err(|_| backend_err("analyzer process lock poisoned"))?;
                writeln!(p.stdin, "{text}").and_then(|_| p.stdin.flush()).map_err(backend_err)?;
                let mut s = String::new();
                loop {
                    let mut line = String::new();
                    if p.stdout.read_line(&mut line).map_err(backend_err)? == 0 {
                        return Err(backend_err("analyzer exited before EOS"));
                    }
                    s.push_str(&line);
                    if line.trim_end() == "EOS" {
                        break;
                    }
                }
                s
            }
        };
        let parsed = parse_external_analysis(&stream)?;
        // Re-anchor against the requested text so whitespace gaps survive.
        TokenizedSentence::assemble(text, parsed.tokens, Provenance::External)
    }
}
