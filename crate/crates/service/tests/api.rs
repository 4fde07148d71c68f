use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use conseq_core::catalog::DomainId;
use conseq_core::consequence::ExplainConfig;
use conseq_core::preferences::fixture_profile;
use conseq_core::stats::{run_analysis, AnalysisPlan};
use conseq_core::study::{read_log, replay, Outcome, RatingInput, RatingKind, Stage, StepInput, StudyContext};
use conseq_service::{router, Clock, Presentation, ServiceError, StudyService};

fn ticking_clock() -> Clock {
    let t = Arc::new(AtomicU64::new(1_000_000));
    Arc::new(move || t.fetch_add(1000, Ordering::SeqCst))
}

fn open(path: &std::path::Path) -> StudyService {
    StudyService::open(path, StudyContext::builtin(), ExplainConfig::default()).unwrap().with_clock(ticking_clock())
}

fn app(service: Arc<StudyService>, token: Option<&str>) -> Router {
    router(service, token.map(str::to_string), 0.05)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>, token: Option<&str>) -> (StatusCode, String) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req.header(header::CONTENT_TYPE, "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn call_json(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, text) = call(app, method, uri, body, None).await;
    (status, serde_json::from_str(&text).unwrap_or(Value::Null))
}

fn demographics() -> Value {
    json!({"age": 30, "gender": "female", "education": "university"})
}

/// Runs a session to completion through the service API.
async fn complete(service: &StudyService, id: &str, profile: &str, answer: impl Fn(&RatingKind) -> i64) {
    let profile = fixture_profile(profile).unwrap();
    let demo = serde_json::from_value(demographics()).unwrap();
    service.submit_step(id, StepInput::Demographics(demo)).await.unwrap();
    service.submit_step(id, StepInput::Preferences(profile)).await.unwrap();
    let Presentation::Explanation { importance_topics, .. } = service.presentation(id).await.unwrap() else {
        panic!("explanation expected")
    };
    let kinds = RatingKind::EXPLANATION_RATINGS
        .iter()
        .cloned()
        .chain(importance_topics.into_iter().map(|feature| RatingKind::FeatureImportance { feature }));
    for kind in kinds {
        let value = answer(&kind);
        service.submit_step(id, StepInput::Rating(RatingInput::new(kind, value))).await.unwrap();
    }
    assert!(matches!(service.presentation(id).await.unwrap(), Presentation::Content { .. }));
    let kind = RatingKind::LikelihoodFromContent;
    let view = service.submit_step(id, StepInput::Rating(RatingInput::new(kind.clone(), answer(&kind)))).await.unwrap();
    assert_eq!(view.stage, Stage::Complete);
}

#[tokio::test]
async fn full_protocol_over_http_keeps_explanation_blind() {
    let dir = tempfile::tempdir().unwrap();
    let service = Arc::new(open(&dir.path().join("log.jsonl")));
    let app = app(service.clone(), None);

    let (status, view) = call_json(&app, Method::POST, "/sessions", Some(json!({"domain": "apartment"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = view["session_id"].as_str().unwrap().to_string();
    assert!(!id.is_empty());
    assert_eq!(view["stage"], "created");
    assert!(view.get("variant").is_none(), "variant must stay hidden: {view}");

    let (status, view) = call_json(&app, Method::POST, &format!("/sessions/{id}/demographics"), Some(demographics())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["stage"], "demographics_done");

    let prefs = serde_json::to_value(fixture_profile("apartment_family").unwrap()).unwrap();
    let (status, view) = call_json(&app, Method::POST, &format!("/sessions/{id}/preferences"), Some(prefs)).await;
    assert_eq!(status, StatusCode::OK, "{view}");
    assert_eq!(view["stage"], "preferences_done");
    assert_eq!(view["expected"], "show_explanation");

    let (status, shown) = call_json(&app, Method::GET, &format!("/sessions/{id}/presentation"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(shown["kind"], "explanation");
    let keys: Vec<&str> = shown.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["importance_topics", "kind", "stage", "text"]);
    let session = service.session(&id).await.unwrap();
    let item = session.item(service.context()).unwrap();
    let text = shown["text"].as_str().unwrap();
    assert!(!text.contains(&item.title) && !text.contains(&item.description));
    // asking again shows the same explanation without another transition
    let (_, again) = call_json(&app, Method::GET, &format!("/sessions/{id}/presentation"), None).await;
    assert_eq!(again, shown);

    let rate = |kind: Value| {
        let mut body = kind;
        body["value"] = json!(4);
        body
    };
    for kind in ["likelihood_from_explanation", "satisfaction", "understandability"] {
        let (status, view) = call_json(&app, Method::POST, &format!("/sessions/{id}/ratings"), Some(rate(json!({"kind": kind})))).await;
        assert_eq!(status, StatusCode::OK, "{view}");
        assert!(view.get("title").is_none());
    }
    for topic in shown["importance_topics"].as_array().unwrap() {
        let body = rate(json!({"kind": "feature_importance", "feature": topic}));
        let (status, _) = call_json(&app, Method::POST, &format!("/sessions/{id}/ratings"), Some(body)).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (status, content) = call_json(&app, Method::GET, &format!("/sessions/{id}/presentation"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(content["kind"], "content");
    assert_eq!(content["item"]["title"], item.title.as_str());
    assert_eq!(content["item"]["id"], session.explained_item.as_deref().unwrap());

    let body = rate(json!({"kind": "likelihood_from_content"}));
    let (status, view) = call_json(&app, Method::POST, &format!("/sessions/{id}/ratings"), Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["stage"], "complete");
}

#[tokio::test]
async fn request_errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let service = Arc::new(open(&dir.path().join("log.jsonl")));
    let app = app(service.clone(), None);

    let (status, body) = call_json(&app, Method::POST, "/sessions", Some(json!({"domain": "car"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "unknown_domain");
    assert!(matches!(service.create_session("car").await, Err(ServiceError::UnknownDomain(_))));

    let (status, body) = call_json(&app, Method::GET, "/sessions/nope/presentation", None).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));

    let (_, view) = call_json(&app, Method::POST, "/sessions", Some(json!({"domain": "recipe"}))).await;
    let id = view["session_id"].as_str().unwrap();
    let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/demographics"), Some(json!("x")), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");

    let (status, body) = call_json(&app, Method::GET, &format!("/sessions/{id}/presentation"), None).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("out_of_order")));

    let rating = json!({"kind": "likelihood_from_content", "value": 3});
    let (status, body) = call_json(&app, Method::POST, &format!("/sessions/{id}/ratings"), Some(rating)).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("out_of_order")));

    call_json(&app, Method::POST, &format!("/sessions/{id}/demographics"), Some(demographics())).await;
    let mut prefs = serde_json::to_value(fixture_profile("recipe_vegetarian_italian").unwrap()).unwrap();
    prefs["hard"]["cooking_time"] = json!({"at_most": 1});
    let (status, body) = call_json(&app, Method::POST, &format!("/sessions/{id}/preferences"), Some(prefs)).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("no_candidate")));
    assert!(!body["near_misses"].as_array().unwrap().is_empty());

    let prefs = serde_json::to_value(fixture_profile("recipe_moderate_lose").unwrap()).unwrap();
    call_json(&app, Method::POST, &format!("/sessions/{id}/preferences"), Some(prefs)).await;
    call_json(&app, Method::GET, &format!("/sessions/{id}/presentation"), None).await;
    let rating = json!({"kind": "satisfaction", "value": 6});
    let (status, body) = call_json(&app, Method::POST, &format!("/sessions/{id}/ratings"), Some(rating)).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("invalid_payload")));
}

#[tokio::test]
async fn six_creates_are_balanced_and_counts_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let service = open(&path);
    for i in 0..6 {
        service.create_session(DomainId::ALL[i % 2].as_str()).await.unwrap();
    }
    assert_eq!(service.variant_counts().await, [2, 2, 2]);
    drop(service);
    let reopened = open(&path);
    assert_eq!(reopened.variant_counts().await, [2, 2, 2]);
    let view = reopened.create_session("recipe").await.unwrap();
    assert_eq!(reopened.variant_counts().await, [3, 2, 2]);
    assert_eq!(view.session_id, "s00007");
}

#[tokio::test]
async fn crash_replay_restores_identical_states() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let service = open(&path);
    let done = service.create_session("recipe").await.unwrap().session_id;
    complete(&service, &done, "recipe_moderate_lose", |_| 4).await;
    let partial = service.create_session("apartment").await.unwrap().session_id;
    let demo = serde_json::from_value(demographics()).unwrap();
    service.submit_step(&partial, StepInput::Demographics(demo)).await.unwrap();
    service.submit_step(&partial, StepInput::Preferences(fixture_profile("apartment_family").unwrap())).await.unwrap();
    service.presentation(&partial).await.unwrap();
    let before = service.sessions().await;
    drop(service);

    // a crash mid-append leaves a torn line behind
    let mut text = std::fs::read_to_string(&path).unwrap();
    let clean_len = text.len();
    text.push_str(r#"{"seq":99,"session_id":"s0"#);
    std::fs::write(&path, &text).unwrap();

    let reopened = open(&path);
    assert_eq!(reopened.sessions().await, before);
    assert_eq!(std::fs::metadata(&path).unwrap().len() as usize, clean_len);
    // the restored session carries on where it stopped
    let kind = RatingKind::LikelihoodFromExplanation;
    let view = reopened.submit_step(&partial, StepInput::Rating(RatingInput::new(kind, 2))).await.unwrap();
    assert_eq!(view.stage, Stage::ExplanationShown);
    let records = read_log(std::fs::read_to_string(&path).unwrap().as_bytes()).unwrap();
    assert!(records.windows(2).all(|w| w[0].seq < w[1].seq));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_double_submit_applies_once() {
    let dir = tempfile::tempdir().unwrap();
    let service = Arc::new(open(&dir.path().join("log.jsonl")));
    for _ in 0..50 {
        let id = service.create_session("recipe").await.unwrap().session_id;
        let tasks: Vec<_> = (0..2)
            .map(|_| {
                let (service, id) = (service.clone(), id.clone());
                tokio::spawn(async move {
                    let demo = serde_json::from_value(demographics()).unwrap();
                    service.submit_step(&id, StepInput::Demographics(demo)).await
                })
            })
            .collect();
        let mut ok = 0;
        let mut conflicts = 0;
        for t in tasks {
            match t.await.unwrap() {
                Ok(_) => ok += 1,
                Err(ServiceError::Study(conseq_core::study::StudyError::OutOfOrder { .. })) => conflicts += 1,
                Err(e) => panic!("{e}"),
            }
        }
        assert_eq!((ok, conflicts), (1, 1));
        assert_eq!(service.export_events(None, Some(&id)).len(), 2);
    }
}

#[tokio::test]
async fn export_filters_by_session_and_domain() {
    let dir = tempfile::tempdir().unwrap();
    let service = Arc::new(open(&dir.path().join("log.jsonl")));
    let app = app(service.clone(), Some("tok"));
    let (status, body) = call(&app, Method::GET, "/export", None, Some("tok")).await;
    assert_eq!((status, body.as_str()), (StatusCode::OK, ""));

    let demo = || StepInput::Demographics(serde_json::from_value(demographics()).unwrap());
    let mut ids = Vec::new();
    for (domain, fixture) in [("apartment", "apartment_family"), ("recipe", "recipe_moderate_lose")] {
        let id = service.create_session(domain).await.unwrap().session_id;
        service.submit_step(&id, demo()).await.unwrap();
        service.submit_step(&id, StepInput::Preferences(fixture_profile(fixture).unwrap())).await.unwrap();
        service.presentation(&id).await.unwrap();
        ids.push(id);
    }
    let third = service.create_session("recipe").await.unwrap().session_id;
    service.submit_step(&third, demo()).await.unwrap();
    assert_eq!(service.export_events(None, None).len(), 10);

    let (status, body) = call(&app, Method::GET, &format!("/export?session={}", ids[0]), None, Some("tok")).await;
    assert_eq!(status, StatusCode::OK);
    let records = read_log(body.as_bytes()).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r.session_id == ids[0]));
    assert!(records.windows(2).all(|w| w[0].seq < w[1].seq));

    let (_, body) = call(&app, Method::GET, "/export?domain=recipe", None, Some("tok")).await;
    assert_eq!(read_log(body.as_bytes()).unwrap().len(), 6);

    let (status, _) = call(&app, Method::GET, "/export", None, None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = call(&app, Method::GET, "/export", None, Some("wrong")).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn exported_log_analyzes_like_live_state() {
    let dir = tempfile::tempdir().unwrap();
    let service = Arc::new(open(&dir.path().join("log.jsonl")));
    for i in 0..9i64 {
        let (domain, fixture) = if i % 2 == 0 { ("recipe", "recipe_moderate_lose") } else { ("apartment", "apartment_commuter") };
        let id = service.create_session(domain).await.unwrap().session_id;
        complete(&service, &id, fixture, |k| match k {
            RatingKind::Satisfaction => 1 + (i * 7 + 3) % 5,
            _ => 1 + i % 5,
        })
        .await;
    }
    // one unfinished session is excluded from the analysis
    service.create_session("recipe").await.unwrap();

    let app = app(service.clone(), None);
    let (status, body) = call_json(&app, Method::GET, "/analysis?outcome=satisfaction&group_by=variant&alpha=0.05", None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["excluded_sessions"], 1);
    assert_eq!(body["descriptives"].as_array().unwrap().len(), 3);

    let (_, exported) = call(&app, Method::GET, "/export", None, None).await;
    let sessions: Vec<_> = replay(&read_log(exported.as_bytes()).unwrap(), service.context()).unwrap().into_values().collect();
    let offline = run_analysis(&sessions, &AnalysisPlan::new(Outcome::Satisfaction, &["variant"])).unwrap();
    assert_eq!(body, serde_json::to_value(&offline).unwrap());

    let (status, body) = call_json(&app, Method::GET, "/analysis?outcome=satisfaction&group_by=education", None).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("insufficient_groups")));
    let (status, _) = call_json(&app, Method::GET, "/analysis?outcome=happiness", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}
