mod support;

use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use grammage_plcsim::{TagAddress, TagClient, Tick};
use grammage_predictor::api::{router, RollView, StatsView};
use grammage_predictor::{serve, Service, ServiceConfig, Store};
use http_body_util::BodyExt;
use serde_json::Value;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tower::ServiceExt;

use support::{model, paper_roll, sim};

async fn call(svc: &Service, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = router(svc.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn empty_service() {
    let svc = Service::new(model(), Store::in_memory(), "127.0.0.1:1");
    let (st, v) = call(&svc, "GET", "/api/rolls/latest", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert!(v["error"].is_string());

    let (st, v) = call(&svc, "GET", "/api/stats", None).await;
    assert_eq!(st, StatusCode::OK);
    let stats: StatsView = serde_json::from_value(v.clone()).unwrap();
    assert_eq!(stats.stats.rolls_seen, 0);
    assert_eq!(stats.agreement_rate, None);
    assert_eq!(v["confusion"]["classes"], serde_json::json!([48, 50, 58, 60, 68, 70]));

    let (st, v) = call(&svc, "GET", "/api/health", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["model"], "adaboost");
    assert_eq!(v["sim_connected"], false);

    let (st, v) = call(&svc, "GET", "/api/rolls", None).await;
    assert_eq!((st, v), (StatusCode::OK, serde_json::json!([])));
}

#[tokio::test]
async fn live_roll_and_manual_entry() {
    let server = sim(0.0, Tick::Manual).await;
    server.with_state(|s| s.load_roll(&paper_roll(), 1));
    let svc = Service::new(model(), Store::in_memory(), server.local_addr().to_string());
    let r = svc.poll_once().await.unwrap().unwrap();

    let (st, v) = call(&svc, "GET", "/api/rolls/latest", None).await;
    assert_eq!(st, StatusCode::OK);
    let view: RollView = serde_json::from_value(v.clone()).unwrap();
    assert_eq!(view.record, r);
    assert!(!view.mismatch);
    assert_eq!(v["predicted"], 70);
    assert_eq!(v["manual"], Value::Null);
    assert_eq!(v["measurement"], serde_json::json!({"diameter": 1000.0, "width": 820.0, "weight": 564.0}));
    assert_eq!(v["quality"], serde_json::json!(["GOOD", "GOOD", "GOOD"]));

    let uri = format!("/api/rolls/{}/manual", r.roll_id);
    let (st, v) = call(&svc, "POST", &uri, Some(r#"{"grammage": 70}"#)).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["agreement_count"], 1);
    assert_eq!(v["agreement_rate"], 1.0);

    // written back to the tag
    let mut c = TagClient::connect(server.local_addr()).await.unwrap();
    assert_eq!(c.read_tag(TagAddress::MANUAL).await.unwrap().value, 70);

    let (st, _) = call(&svc, "POST", &uri, Some(r#"{"grammage": 68}"#)).await;
    assert_eq!(st, StatusCode::CONFLICT);
    let (st, _) = call(&svc, "POST", "/api/rolls/999/manual", Some(r#"{"grammage": 68}"#)).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _) = call(&svc, "POST", "/api/rolls/abc/manual", Some(r#"{"grammage": 68}"#)).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    c.advance().await.unwrap();
    let r2 = svc.poll_once().await.unwrap().unwrap();
    let uri2 = format!("/api/rolls/{}/manual", r2.roll_id);
    let (st, _) = call(&svc, "POST", &uri2, Some(r#"{"grammage": 54}"#)).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    let (st, _) = call(&svc, "POST", &uri2, Some(r#"{"grams": 54}"#)).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = call(&svc, "POST", &uri2, Some("not json")).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (_, v) = call(&svc, "GET", "/api/stats", None).await;
    assert_eq!(v["rolls_seen"], 2);
    assert_eq!(v["rolls_labeled"], 1);

    let (_, v) = call(&svc, "GET", "/api/rolls?limit=1", None).await;
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(v[0]["roll_id"], r2.roll_id);
    let (_, v) = call(&svc, "GET", "/api/rolls", None).await;
    assert_eq!(v.as_array().unwrap().len(), 2);
    let (st, _) = call(&svc, "GET", "/api/rolls?limit=x", None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn mismatch_is_flagged() {
    let server = sim(0.0, Tick::Manual).await;
    server.with_state(|s| s.load_roll(&paper_roll(), 1));
    let svc = Service::new(model(), Store::in_memory(), server.local_addr().to_string());
    let r = svc.poll_once().await.unwrap().unwrap();
    svc.record_manual(r.roll_id, 68).await.unwrap();
    let (_, v) = call(&svc, "GET", "/api/rolls/latest", None).await;
    assert_eq!(v["mismatch"], true);
}

#[tokio::test]
async fn unreachable_sim_counts_errors() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    drop(listener);
    let svc = Service::new(model(), Store::in_memory(), addr);
    assert!(svc.poll_once().await.is_err());
    assert!(svc.poll_once().await.is_err());
    let h = svc.health();
    assert_eq!((h.polls, h.poll_errors, h.sim_connected), (2, 2, false));
    assert!(h.last_error.is_some());
}

/// Reads from a raw HTTP stream until `needle` shows up.
async fn read_until(sock: &mut tokio::net::TcpStream, buf: &mut String, needle: &str) {
    let mut chunk = [0u8; 4096];
    while !buf.contains(needle) {
        let n = tokio::time::timeout(Duration::from_secs(5), sock.read(&mut chunk))
            .await
            .expect("timed out waiting for event")
            .unwrap();
        assert!(n > 0, "stream closed");
        buf.push_str(&String::from_utf8_lossy(&chunk[..n]));
    }
}

#[tokio::test]
async fn end_to_end_serve_with_events() {
    let server = sim(0.0, Tick::Manual).await;
    let dir = tempfile::tempdir().unwrap();
    let store_path = dir.path().join("rolls.ndjson");
    let cfg = ServiceConfig {
        sim_addr: server.local_addr().to_string(),
        listen: "127.0.0.1:0".into(),
        store_path: Some(store_path.clone()),
        poll_ms: 10,
    };
    let handle = serve(model(), cfg.clone()).await.unwrap();

    let mut sse = tokio::net::TcpStream::connect(handle.local_addr()).await.unwrap();
    sse.write_all(b"GET /api/events HTTP/1.1\r\nHost: x\r\nAccept: text/event-stream\r\n\r\n")
        .await
        .unwrap();
    let mut buf = String::new();
    read_until(&mut sse, &mut buf, "\r\n\r\n").await;
    assert!(buf.starts_with("HTTP/1.1 200"), "{buf}");
    assert!(buf.contains("text/event-stream"));

    let mut c = TagClient::connect(server.local_addr()).await.unwrap();
    for _ in 0..5 {
        c.advance().await.unwrap();
        tokio::time::sleep(Duration::from_millis(40)).await;
    }
    read_until(&mut sse, &mut buf, "\"roll_id\":5").await;
    assert!(buf.contains("event: roll"));

    let svc = handle.service().clone();
    let ids: Vec<u64> = svc.recent(100).iter().rev().map(|r| r.roll_id).collect();
    assert_eq!(ids, [1, 2, 3, 4, 5]);
    let stats = svc.stats();
    handle.shutdown().await;

    // restart on the same log: same records, same stats, no re-read of roll 5
    let handle = serve(model(), cfg).await.unwrap();
    tokio::time::sleep(Duration::from_millis(60)).await;
    assert_eq!(handle.service().stats(), stats);
    c.advance().await.unwrap();
    let deadline = std::time::Instant::now() + Duration::from_secs(5);
    while handle.service().latest().map(|r| r.roll_id) != Some(6) {
        assert!(std::time::Instant::now() < deadline);
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    assert_eq!(handle.service().stats().rolls_seen, 6);
    handle.shutdown().await;
}
