//! Command-line interface. Exit codes: 0 success, 2 usage or data error,
//! 3 sentence out of scope.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context};
use attrclause_core::clause::{classify_main_clause_role, ClauseRules};
use attrclause_core::evalkit::{aggregate_between, tally_patterns, Rubric, Variant};
use attrclause_core::morphology::{Analyzer, TokenizedSentence};
use attrclause_core::preedit::{preedit, structural_check};
use attrclause_core::prompts::{Pipeline, PromptStep, Strategy, StrategyError, Timestamps, TranslationRecord};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analysis::{load_fixture_analyzer, ExternalAnalyzer};
use crate::annotate::{self, AnswerReader};
use crate::corpus::{self, CorpusEntry};
use crate::llm::{AnyBackend, BackendConfig, LlmClient, LlmError, MockBackend, ResponseCache};
use crate::{bundled, report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_OUT_OF_SCOPE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Baseline,
    LlmAssisted,
    LocalPreedit,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Baseline => Strategy::Baseline,
            StrategyArg::LlmAssisted => Strategy::LlmAssisted,
            StrategyArg::LocalPreedit => Strategy::LocalPreEdit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StepArg {
    DirectTranslate,
    IdentifyHeadNoun,
    Restructure,
    TranslateRestructured,
}

impl From<StepArg> for PromptStep {
    fn from(s: StepArg) -> Self {
        match s {
            StepArg::DirectTranslate => PromptStep::DirectTranslate,
            StepArg::IdentifyHeadNoun => PromptStep::IdentifyHeadNoun,
            StepArg::Restructure => PromptStep::Restructure,
            StepArg::TranslateRestructured => PromptStep::TranslateRestructured,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "attrclause", version, about = "Pre-edit Japanese attributive clauses for Japanese-Chinese MT")]
pub struct Cli {
    /// Corpus file (JSON Lines); the bundled corpus by default.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Tokenization fixtures (JSON Lines); the bundled set by default.
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    /// External analyzer command emitting `surface<TAB>features` lines and EOS.
    #[arg(long, global = true)]
    pub analyzer: Option<String>,
    #[arg(long = "analyzer-arg", global = true)]
    pub analyzer_args: Vec<String>,
    /// Mock exchanges (JSON array of {prompt, response}); bundled by default.
    #[arg(long, global = true)]
    pub exchanges: Option<PathBuf>,
    #[arg(long, global = true, default_value = ".attrclause-cache")]
    pub cache_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = BackendKind::Mock)]
    pub backend: BackendKind,
    /// Serve only cached responses (default).
    #[arg(long, global = true, conflicts_with = "online")]
    pub offline: bool,
    /// Allow network requests.
    #[arg(long, global = true)]
    pub online: bool,
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long, global = true)]
    pub timeout_ms: Option<u64>,
    #[arg(long, global = true)]
    pub max_retries: Option<u32>,
    /// Environment variable holding the API key.
    #[arg(long, global = true)]
    pub auth_env: Option<String>,
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokens, chunks, clause candidates and the scope decision.
    Analyze {
        sentence: Option<String>,
        #[arg(long)]
        id: Option<String>,
    },
    /// Split an in-scope sentence into two.
    Preedit {
        sentence: Option<String>,
        #[arg(long)]
        id: Option<String>,
    },
    /// Render prompt templates for a sentence.
    Prompt {
        sentence: Option<String>,
        #[arg(long)]
        id: Option<String>,
        #[arg(long, value_enum)]
        step: Option<StepArg>,
    },
    /// Run a translation strategy.
    Translate {
        sentence: Option<String>,
        #[arg(long)]
        id: Option<String>,
        /// Every corpus entry.
        #[arg(long, conflicts_with_all = ["sentence", "id"])]
        all: bool,
        #[arg(long, value_enum, default_value_t = StrategyArg::Baseline)]
        strategy: StrategyArg,
    },
    /// Score translations against the rubric.
    Annotate {
        #[arg(long)]
        annotator: String,
        /// Annotation log to append to.
        #[arg(long)]
        log: PathBuf,
        /// Restrict to these variants (e.g. before_prompt).
        #[arg(long = "variant")]
        variants: Vec<String>,
        /// Translation records (JSON Lines) to score instead of corpus translations.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Scripted answers, comma or space separated; stdin otherwise.
        #[arg(long)]
        answers: Option<String>,
    },
    /// Aggregate an annotation log.
    Report {
        /// Annotation log; the bundled log by default.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Pattern labels (JSON Lines of {class, choice}) to tally.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value = "before_prompt")]
        before: String,
        #[arg(long, default_value = "after_prompt")]
        after: String,
    },
    /// Check the corpus against the tokenization fixtures.
    CorpusValidate,
}

struct Io<'a> {
    stdin: &'a mut dyn BufRead,
    out: &'a mut dyn Write,
}

struct Workspace {
    corpus: Vec<CorpusEntry>,
    analyzer: Box<dyn Analyzer + Send + Sync>,
    rules: ClauseRules,
}

impl Workspace {
    fn load(cli: &Cli) -> anyhow::Result<Self> {
        let corpus = match &cli.corpus {
            Some(p) => corpus::load(p).with_context(|| format!("corpus {}", p.display()))?,
            None => bundled::corpus(),
        };
        let analyzer: Box<dyn Analyzer + Send + Sync> = match (&cli.analyzer, &cli.fixtures) {
            (Some(cmd), _) => Box::new(
                ExternalAnalyzer::spawn(cmd, &cli.analyzer_args).with_context(|| format!("starting analyzer {cmd}"))?,
            ),
            (None, Some(p)) => Box::new(load_fixture_analyzer(p).with_context(|| format!("fixtures {}", p.display()))?),
            (None, None) => Box::new(bundled::analyzer()),
        };
        Ok(Self { corpus, analyzer, rules: ClauseRules::default() })
    }

    fn entry(&self, id: &str) -> anyhow::Result<&CorpusEntry> {
        self.corpus.iter().find(|e| e.id == id).ok_or_else(|| anyhow!("unknown corpus id {id:?}"))
    }

    /// Label and text for a positional sentence or `--id`.
    fn source(&self, sentence: &Option<String>, id: &Option<String>) -> anyhow::Result<(String, String)> {
        match (sentence, id) {
            (Some(_), Some(_)) => bail!("give either a sentence or --id, not both"),
            (None, None) => bail!("give a sentence or --id"),
            (Some(s), None) if s.trim().is_empty() => bail!("empty sentence"),
            (Some(s), None) => Ok(("-".to_string(), s.clone())),
            (None, Some(id)) => Ok((id.clone(), self.entry(id)?.source_text.clone())),
        }
    }

    fn analyze(&self, text: &str) -> anyhow::Result<TokenizedSentence> {
        Ok(self.analyzer.analyze(text)?)
    }
}

fn backend_config(cli: &Cli) -> BackendConfig {
    let d = BackendConfig::default();
    BackendConfig {
        endpoint_url: cli.endpoint.clone().unwrap_or(d.endpoint_url),
        model_id: cli.model.clone().unwrap_or(d.model_id),
        auth_token_source: cli.auth_env.clone().unwrap_or(d.auth_token_source),
        temperature: cli.temperature.unwrap_or(d.temperature),
        timeout_ms: cli.timeout_ms.unwrap_or(d.timeout_ms),
        max_retries: cli.max_retries.unwrap_or(d.max_retries),
        offline: !cli.online,
        parallelism: cli.parallelism.unwrap_or(d.parallelism),
    }
}

fn build_backend(cli: &Cli) -> anyhow::Result<(AnyBackend, usize)> {
    let config = backend_config(cli);
    config.validate()?;
    let parallelism = config.parallelism;
    let backend = match cli.backend {
        BackendKind::Mock => {
            let m = match &cli.exchanges {
                Some(p) => MockBackend::from_json(&std::fs::read_to_string(p)?)
                    .with_context(|| format!("exchanges {}", p.display()))?,
                None => bundled::mock_backend(),
            };
            AnyBackend::Mock(m)
        }
        BackendKind::Http => {
            let cache = ResponseCache::open(&cli.cache_dir)?;
            AnyBackend::Http(LlmClient::new(config, Some(cache))?)
        }
    };
    Ok((backend, parallelism))
}

fn to_json(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

/// Parses `args` and runs the command; returns the exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{rendered}") } else { write!(out, "{rendered}") };
            return code;
        }
    };
    let mut io = Io { stdin, out };
    match dispatch(&cli, &mut io) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cli: &Cli, io: &mut Io<'_>) -> anyhow::Result<i32> {
    match &cli.command {
        Command::Report { log, labels, before, after } => return cmd_report(cli, io, log, labels, before, after),
        Command::Annotate { annotator, log, variants, records, answers } => {
            let ctx = Workspace::load(cli)?;
            return cmd_annotate(&ctx, io, annotator, log, variants, records, answers);
        }
        _ => {}
    }
    let ctx = Workspace::load(cli)?;
    match &cli.command {
        Command::Analyze { sentence, id } => cmd_analyze(cli, &ctx, io, sentence, id),
        Command::Preedit { sentence, id } => cmd_preedit(cli, &ctx, io, sentence, id),
        Command::Prompt { sentence, id, step } => cmd_prompt(cli, &ctx, io, sentence, id, *step),
        Command::Translate { sentence, id, all, strategy } => cmd_translate(cli, &ctx, io, sentence, id, *all, *strategy),
        Command::CorpusValidate => {
            let diags = corpus::validate(&ctx.corpus, ctx.analyzer.as_ref());
            if cli.json {
                writeln!(io.out, "{}", to_json(&diags))?;
            } else {
                for d in &diags {
                    writeln!(io.out, "{}: {}", d.entry_id, d.message)?;
                }
                writeln!(io.out, "{} entries, {} diagnostics", ctx.corpus.len(), diags.len())?;
            }
            Ok(if diags.is_empty() { EXIT_OK } else { EXIT_ERROR })
        }
        Command::Report { .. } | Command::Annotate { .. } => unreachable!(),
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cmd_analyze(
    cli: &Cli,
    ctx: &Workspace,
    io: &mut Io<'_>,
    sentence: &Option<String>,
    id: &Option<String>,
) -> anyhow::Result<i32> {
    let (label, text) = ctx.source(sentence, id)?;
    let s = ctx.analyze(&text)?;
    let (chunks, candidates) = ctx.rules.analyze(&s);
    let (target, decision) = ctx.rules.scope_check(&s);
    let role = target.as_ref().map(|c| classify_main_clause_role(&s, c));
    let code = if decision.in_scope { EXIT_OK } else { EXIT_OUT_OF_SCOPE };

    if cli.json {
        let v = json!({
            "id": label,
            "text": s.text,
            "tokens": s.tokens,
            "chunks": chunks,
            "candidates": candidates,
            "target": target,
            "head_noun": target.as_ref().map(|c| c.head_noun_surface(&s)),
            "decision": decision,
            "main_clause_role": role.as_ref().map(|r| r.as_ref().ok()),
            "subordination_class": role.as_ref().and_then(|r| r.as_ref().ok()).map(|r| r.subordination_class()),
        });
        writeln!(io.out, "{}", to_json(&v))?;
        return Ok(code);
    }

    let out = &mut io.out;
    writeln!(out, "text:   {}", s.text)?;
    let toks: Vec<String> = s.tokens.iter().map(|t| format!("{}/{:?}", t.surface, t.pos)).collect();
    writeln!(out, "tokens: {}", toks.join(" "))?;
    let chs: Vec<String> = chunks.iter().map(|c| format!("[{}]", s.surfaces(c.tokens.clone()))).collect();
    writeln!(out, "chunks: {}", chs.join(""))?;
    for c in &candidates {
        writeln!(out, "candidate: {} -> {} ({:?})", c.clause_surface(&s), c.head_noun_surface(&s), c.relation)?;
    }
    match &target {
        Some(c) => writeln!(out, "target: {} -> {}", c.clause_surface(&s), c.head_noun_surface(&s))?,
        None => writeln!(out, "target: none")?,
    }
    writeln!(out, "inner relation:          {}", yes(decision.condition_inner_relation))?;
    writeln!(out, "main predicate verbal:   {}", yes(decision.condition_main_predicate_verbal))?;
    writeln!(out, "nominative gap:          {}", yes(decision.condition_nominative_gap))?;
    for r in &decision.reasons {
        writeln!(out, "  {r}")?;
    }
    match &role {
        Some(Ok(r)) => writeln!(out, "main-clause role: {r:?} ({:?})", r.subordination_class())?,
        Some(Err(e)) => writeln!(out, "main-clause role: {e}")?,
        None => {}
    }
    writeln!(out, "{}", if decision.in_scope { "in scope" } else { "out of scope" })?;
    Ok(code)
}

fn cmd_preedit(
    cli: &Cli,
    ctx: &Workspace,
    io: &mut Io<'_>,
    sentence: &Option<String>,
    id: &Option<String>,
) -> anyhow::Result<i32> {
    let (_, text) = ctx.source(sentence, id)?;
    let s = ctx.analyze(&text)?;
    let (target, decision) = ctx.rules.scope_check(&s);
    let Some(candidate) = target.filter(|_| decision.in_scope) else {
        if cli.json {
            writeln!(io.out, "{}", to_json(&json!({ "in_scope": false, "reasons": decision.reasons })))?;
        } else {
            writeln!(io.out, "out of scope: {}", decision.reasons.join("; "))?;
        }
        return Ok(EXIT_OUT_OF_SCOPE);
    };
    let result = preedit(&ctx.rules, &s, &candidate)?;
    let check = structural_check(&result, &s);
    if cli.json {
        writeln!(io.out, "{}", to_json(&result))?;
    } else {
        writeln!(io.out, "{}", result.sentence_a)?;
        writeln!(io.out, "{}", result.sentence_b)?;
        for d in &check.diagnostics {
            writeln!(io.out, "warning: {d}")?;
        }
    }
    Ok(if check.passed { EXIT_OK } else { EXIT_ERROR })
}

fn cmd_prompt(
    cli: &Cli,
    ctx: &Workspace,
    io: &mut Io<'_>,
    sentence: &Option<String>,
    id: &Option<String>,
    step: Option<StepArg>,
) -> anyhow::Result<i32> {
    let (_, text) = ctx.source(sentence, id)?;
    let pipeline = Pipeline::default();
    let explicit = step.is_some();
    let steps: Vec<PromptStep> = match step {
        Some(s) => vec![s.into()],
        None => PromptStep::ALL.to_vec(),
    };
    let mut rendered = Vec::new();
    for step in steps {
        let payload = match step {
            PromptStep::DirectTranslate | PromptStep::IdentifyHeadNoun => text.clone(),
            PromptStep::Restructure => text.trim_end().trim_end_matches('。').to_string(),
            PromptStep::TranslateRestructured => {
                let s = ctx.analyze(&text)?;
                let (target, decision) = ctx.rules.scope_check(&s);
                match target.filter(|_| decision.in_scope) {
                    Some(c) => preedit(&ctx.rules, &s, &c)?.joined(),
                    None if explicit => {
                        writeln!(io.out, "out of scope: {}", decision.reasons.join("; "))?;
                        return Ok(EXIT_OUT_OF_SCOPE);
                    }
                    // Nothing to restructure locally.
                    None => continue,
                }
            }
        };
        rendered.push((step, pipeline.templates.render(step, &payload)?));
    }
    if cli.json {
        let v: Vec<_> = rendered.iter().map(|(s, p)| json!({ "step": s, "prompt": p })).collect();
        writeln!(io.out, "{}", to_json(&v))?;
    } else {
        for (s, p) in &rendered {
            writeln!(io.out, "# {}\n{p}", s.name())?;
        }
    }
    Ok(EXIT_OK)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn cmd_translate(
    cli: &Cli,
    ctx: &Workspace,
    io: &mut Io<'_>,
    sentence: &Option<String>,
    id: &Option<String>,
    all: bool,
    strategy: StrategyArg,
) -> anyhow::Result<i32> {
    let (backend, parallelism) = build_backend(cli)?;
    let pipeline = Pipeline::default();
    let strategy = Strategy::from(strategy);
    let jobs: Vec<(String, String)> = if all {
        ctx.corpus.iter().map(|e| (e.id.clone(), e.source_text.clone())).collect()
    } else {
        vec![ctx.source(sentence, id)?]
    };

    let run_one = |(label, text): &(String, String)| -> Result<TranslationRecord, anyhow::Error> {
        let s = ctx.analyze(text)?;
        let started = now();
        let mut rec = pipeline.run_strategy(strategy, label, &s, &backend).map_err(anyhow::Error::new)?;
        rec.timestamps = Some(Timestamps { started, finished: now() });
        Ok(rec)
    };

    let results: Vec<Mutex<Option<anyhow::Result<TranslationRecord>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..parallelism.min(jobs.len()).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                *results[i].lock().unwrap() = Some(run_one(job));
            });
        }
    });

    let mut code = EXIT_OK;
    for ((label, _), slot) in jobs.iter().zip(results) {
        match slot.into_inner().unwrap().expect("every job ran") {
            Ok(rec) => {
                if cli.json {
                    let line = if all { serde_json::to_string(&rec)? } else { to_json(&rec) };
                    writeln!(io.out, "{line}")?;
                } else {
                    print_record(io.out, &rec)?;
                }
            }
            Err(e) => {
                let scope = matches!(
                    e.downcast_ref::<StrategyError<LlmError>>(),
                    Some(StrategyError::NotInScope(_))
                );
                if !all {
                    if scope {
                        writeln!(io.out, "{label}: {e}")?;
                        return Ok(EXIT_OUT_OF_SCOPE);
                    }
                    return Err(e);
                }
                writeln!(io.out, "{label}: error: {e:#}")?;
                code = EXIT_ERROR;
            }
        }
    }
    Ok(code)
}

fn print_record(out: &mut dyn Write, rec: &TranslationRecord) -> std::io::Result<()> {
    writeln!(out, "[{}] {}", rec.sentence_id, rec.strategy.name())?;
    for st in &rec.steps {
        writeln!(out, "  {}", st.step.name())?;
        writeln!(out, "    > {}", st.prompt)?;
        writeln!(out, "    < {}", st.response)?;
    }
    for d in &rec.diagnostics {
        writeln!(out, "  note: {d}")?;
    }
    writeln!(out, "{}", rec.final_text)
}

fn cmd_annotate(
    ctx: &Workspace,
    io: &mut Io<'_>,
    annotator: &str,
    log: &PathBuf,
    variants: &[String],
    records: &Option<PathBuf>,
    answers: &Option<String>,
) -> anyhow::Result<i32> {
    let variants: Vec<Variant> = variants.iter().map(|v| Variant::from(v.as_str())).collect();
    let mut items = match records {
        Some(p) => {
            let src = std::fs::read_to_string(p).with_context(|| format!("records {}", p.display()))?;
            let recs: Vec<TranslationRecord> = src
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(serde_json::from_str)
                .collect::<Result<_, _>>()
                .with_context(|| format!("records {}", p.display()))?;
            annotate::items_from_records(&recs, &ctx.corpus)
        }
        None => annotate::items_from_corpus(&ctx.corpus, &[]),
    };
    if !variants.is_empty() {
        items.retain(|it| variants.contains(&it.variant));
    }
    let done: HashSet<_> = annotate::load_log(log)?.iter().map(annotate::session_key).collect();
    let mut sink = OpenOptions::new().create(true).append(true).open(log).with_context(|| format!("log {}", log.display()))?;
    let rubric = Rubric::default();
    let got = match answers {
        Some(a) => {
            let mut reader = AnswerReader::new(a.as_bytes());
            annotate::annotate_session(&items, &rubric, annotator, &mut reader, io.out, &mut sink, &done, &now)?
        }
        None => {
            let mut reader = AnswerReader::new(&mut *io.stdin);
            annotate::annotate_session(&items, &rubric, annotator, &mut reader, io.out, &mut sink, &done, &now)?
        }
    };
    writeln!(io.out, "recorded {} annotations in {}", got.len(), log.display())?;
    Ok(EXIT_OK)
}

fn cmd_report(
    cli: &Cli,
    io: &mut Io<'_>,
    log: &Option<PathBuf>,
    labels: &Option<PathBuf>,
    before: &str,
    after: &str,
) -> anyhow::Result<i32> {
    let annotations = match log {
        Some(p) => annotate::load_log(p).with_context(|| format!("log {}", p.display()))?,
        None => bundled::annotations(),
    };
    let mut report = aggregate_between(&annotations, &Variant::from(before), &Variant::from(after))?;
    if let Some(p) = labels {
        let src = std::fs::read_to_string(p).with_context(|| format!("labels {}", p.display()))?;
        report.pattern_tally = Some(tally_patterns(&annotate::parse_labels(&src)?)?);
    }
    if cli.json {
        writeln!(io.out, "{}", to_json(&report))?;
    } else {
        write!(io.out, "{}", report::render(&report))?;
    }
    Ok(EXIT_OK)
}
