use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use attrclause::bundled;
use attrclause::llm::{
    cache_key, BackendConfig, ChatExchange, HttpResponse, LlmClient, LlmError, MockBackend, ResponseCache, Transport,
};
use attrclause_core::morphology::Analyzer;
use attrclause_core::prompts::{
    render, ChatBackend, ChatMessage, Pipeline, PromptStep, Strategy, StrategyError,
};

const BOWING_SENTENCE: &str = "社員の真似をして、勢いよくお辞儀をした私に、女性は笑って「ありがとうね、またきます」と言い、レジから去って行った。";
const BASELINE_ANSWER: &str = "看到店员的样子，我也效仿着热情地鞠了一躬，然后那位女性笑着对我说：“谢谢啦，下次还会再来的。”她说完后离开了收银台。";
const ASSISTED_ANSWER: &str = "我模仿店员的样子，热情地鞠躬。女性笑着对我说：“谢谢你，再见”，然后离开了收银台。";

/// Stands in for a socket that refuses every connection, counting attempts.
#[derive(Clone, Default)]
struct RefusingSocket(Arc<AtomicUsize>);

impl Transport for RefusingSocket {
    fn post_json(&self, _: &str, _: &str, _: &serde_json::Value, _: Duration) -> Result<HttpResponse, String> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Err("connection refused".into())
    }
}

/// Answers every request with a fixed completion.
#[derive(Clone, Default)]
struct Echo(Arc<AtomicUsize>);

impl Transport for Echo {
    fn post_json(&self, _: &str, _: &str, body: &serde_json::Value, _: Duration) -> Result<HttpResponse, String> {
        self.0.fetch_add(1, Ordering::SeqCst);
        let prompt = body["messages"][0]["content"].as_str().unwrap_or_default();
        let reply = serde_json::json!({"choices": [{"message": {"content": format!("reply to {prompt}")}}]});
        Ok(HttpResponse { status: 200, body: reply.to_string() })
    }
}

fn bowing_sentence() -> attrclause_core::TokenizedSentence {
    bundled::analyzer().analyze(BOWING_SENTENCE).unwrap()
}

#[test]
fn mock_answers_the_head_noun_prompt() {
    let m = bundled::mock_backend();
    let prompt = render(PromptStep::IdentifyHeadNoun, BOWING_SENTENCE).unwrap();
    assert_eq!(
        m.complete(&[ChatMessage::user(prompt)]).unwrap(),
        "The noun that is modified by the attributive clause in this sentence is 私 (I) ."
    );
}

#[test]
fn strategies_reproduce_printed_answers() {
    let m = bundled::mock_backend();
    let p = Pipeline::default();
    let s = bowing_sentence();

    let assisted = p.run_strategy(Strategy::LlmAssisted, "app1-5", &s, &m).unwrap();
    assert_eq!(assisted.final_text, ASSISTED_ANSWER);
    assert_eq!(assisted.strategy, Strategy::LlmAssisted);
    assert_eq!(
        assisted.steps.iter().map(|s| s.step).collect::<Vec<_>>(),
        Strategy::LlmAssisted.steps()
    );
    assert!(assisted.diagnostics.is_empty(), "{:?}", assisted.diagnostics);

    let baseline = p.run_strategy(Strategy::Baseline, "app1-5", &s, &m).unwrap();
    assert_eq!(baseline.final_text, BASELINE_ANSWER);
    assert_eq!(baseline.steps.len(), 1);
}

#[test]
fn unparseable_head_noun_falls_back_to_baseline() {
    let s = bowing_sentence();
    let m = MockBackend::new([
        (render(PromptStep::IdentifyHeadNoun, BOWING_SENTENCE).unwrap(), "I cannot tell.".to_string()),
        (render(PromptStep::DirectTranslate, BOWING_SENTENCE).unwrap(), BASELINE_ANSWER.to_string()),
    ]);
    let r = Pipeline::default().run_strategy(Strategy::LlmAssisted, "app1-5", &s, &m).unwrap();
    assert_eq!(r.strategy, Strategy::Baseline);
    assert_eq!(r.final_text, BASELINE_ANSWER);
    assert_eq!(r.steps.len(), 1);
    assert_eq!(r.diagnostics.len(), 1);
}

#[test]
fn mock_miss_surfaces_as_backend_error() {
    let s = bowing_sentence();
    let r = Pipeline::default().run_strategy(Strategy::Baseline, "x", &s, &MockBackend::default());
    assert!(matches!(r, Err(StrategyError::Backend(LlmError::FixtureMiss { .. }))));
}

#[test]
fn offline_run_opens_no_connection() {
    let dir = tempfile::tempdir().unwrap();
    let socket = RefusingSocket::default();
    let client = LlmClient::new(BackendConfig::default(), Some(ResponseCache::open(dir.path()).unwrap()))
        .unwrap()
        .with_transport(socket.clone())
        .with_env(|_| Some("key".into()));
    let s = bowing_sentence();
    for strategy in [Strategy::Baseline, Strategy::LlmAssisted, Strategy::LocalPreEdit] {
        let r = Pipeline::default().run_strategy(strategy, "app1-5", &s, &client);
        assert!(matches!(r, Err(StrategyError::Backend(LlmError::OfflineMiss { .. }))));
    }
    assert_eq!(socket.0.load(Ordering::SeqCst), 0);
    assert_eq!(client.network_calls(), 0);
}

#[test]
fn offline_run_is_served_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path()).unwrap();
    let cfg = BackendConfig::default();
    let prompt = render(PromptStep::DirectTranslate, BOWING_SENTENCE).unwrap();
    let msgs = vec![ChatMessage::user(prompt)];
    cache.store(&ChatExchange::new(&cfg.model_id, cfg.temperature, msgs, BASELINE_ANSWER.into())).unwrap();

    let socket = RefusingSocket::default();
    let client = LlmClient::new(cfg, Some(cache)).unwrap().with_transport(socket.clone());
    let r = Pipeline::default().run_strategy(Strategy::Baseline, "app1-5", &bowing_sentence(), &client).unwrap();
    assert_eq!(r.final_text, BASELINE_ANSWER);
    assert_eq!(socket.0.load(Ordering::SeqCst), 0);
}

#[test]
fn second_identical_call_comes_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let echo = Echo::default();
    let cfg = BackendConfig { offline: false, ..BackendConfig::default() };
    let client = LlmClient::new(cfg.clone(), Some(ResponseCache::open(dir.path()).unwrap()))
        .unwrap()
        .with_transport(echo.clone())
        .with_env(|_| Some("key".into()));
    let msgs = [ChatMessage::user("こんにちは")];
    let first = client.complete(&msgs).unwrap();
    let second = client.complete(&msgs).unwrap();
    assert_eq!(first.as_bytes(), second.as_bytes());
    assert_eq!(echo.0.load(Ordering::SeqCst), 1);

    // a fresh offline client sees the stored exchange
    let offline = LlmClient::new(BackendConfig::default(), Some(ResponseCache::open(dir.path()).unwrap()))
        .unwrap()
        .with_transport(RefusingSocket::default());
    assert_eq!(offline.complete(&msgs).unwrap(), first);
    let file = dir.path().join(cache_key(&cfg.model_id, cfg.temperature, &msgs));
    assert!(file.exists());
}

#[test]
fn concurrent_writers_leave_readable_entries() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(dir.path()).unwrap();
    let msgs = vec![ChatMessage::user("同じ質問")];
    std::thread::scope(|scope| {
        for i in 0..8 {
            let cache = cache.clone();
            let msgs = msgs.clone();
            scope.spawn(move || {
                for _ in 0..20 {
                    cache.store(&ChatExchange::new("m", 0.0, msgs.clone(), format!("answer {i}"))).unwrap();
                }
            });
        }
    });
    let key = cache_key("m", 0.0, &msgs);
    let ex = cache.load(&key).unwrap().unwrap();
    assert!(ex.response_text.starts_with("answer "));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn online_without_key_is_auth_missing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = BackendConfig {
        offline: false,
        auth_token_source: "ATTRCLAUSE_TEST_UNSET_KEY".into(),
        ..BackendConfig::default()
    };
    let socket = RefusingSocket::default();
    let client = LlmClient::new(cfg, Some(ResponseCache::open(dir.path()).unwrap()))
        .unwrap()
        .with_transport(socket.clone());
    assert_eq!(
        client.complete(&[ChatMessage::user("x")]),
        Err(LlmError::AuthMissing { var: "ATTRCLAUSE_TEST_UNSET_KEY".into() })
    );
    assert_eq!(socket.0.load(Ordering::SeqCst), 0);
}
