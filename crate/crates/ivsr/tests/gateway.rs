mod common;

use std::time::Duration;

use common::{serve, twin, SAMPLE};
use futures_util::StreamExt;
use ivsr::gateway::{Gateway, StreamEvent, STREAM_BUFFER};
use ivsr::twin::StreamKind;
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use tokio::sync::broadcast::error::TryRecvError;
use tokio_tungstenite::tungstenite::Message;

async fn loaded() -> (Gateway, String, Client) {
    let gw = Gateway::new();
    gw.install(twin()).await;
    let base = serve(&gw).await;
    (gw, base, Client::new())
}

async fn post(c: &Client, url: String, body: impl Into<String>) -> (StatusCode, Value) {
    let r = c.post(url).body(body.into()).send().await.unwrap();
    let code = r.status();
    (code, r.json().await.unwrap_or(Value::Null))
}

async fn get(c: &Client, url: String) -> (StatusCode, Value) {
    let r = c.get(url).send().await.unwrap();
    let code = r.status();
    (code, r.json().await.unwrap_or(Value::Null))
}

fn with_sensor(id: &str) -> String {
    SAMPLE.trim_end().replace(r#""SensorId": """#, &format!(r#""SensorId": "{id}""#))
}

/// Sample detection ingest, then the top recommended plan submitted and approved.
async fn approved_ticket(c: &Client, base: &str) -> u64 {
    assert_eq!(post(c, format!("{base}/ingest/detection"), SAMPLE).await.0, StatusCode::ACCEPTED);
    let (code, t) = post(c, format!("{base}/plans/drone-recon/submit"), "").await;
    assert_eq!(code, StatusCode::CREATED, "{t}");
    let id = t["id"].as_u64().unwrap();
    let (code, _) = post(
        c,
        format!("{base}/tickets/{id}/decision"),
        json!({"verdict": "approve", "approver_id": "chief"}).to_string(),
    )
    .await;
    assert_eq!(code, StatusCode::OK);
    id
}

#[tokio::test]
async fn everything_is_unavailable_before_load() {
    let gw = Gateway::new();
    let base = serve(&gw).await;
    let c = Client::new();
    for path in ["/status", "/recommendations?k=1", "/replay/1", "/projection?horizon_s=1"] {
        assert_eq!(get(&c, format!("{base}{path}")).await.0, StatusCode::SERVICE_UNAVAILABLE, "{path}");
    }
    assert_eq!(post(&c, format!("{base}/ingest/detection"), SAMPLE).await.0, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(post(&c, format!("{base}/tickets/1/dispatch"), "").await.0, StatusCode::SERVICE_UNAVAILABLE);
    gw.install(twin()).await;
    assert_eq!(get(&c, format!("{base}/status")).await.0, StatusCode::OK);
}

#[tokio::test]
async fn detection_ingest() {
    let (gw, base, c) = loaded().await;
    let (code, body) = post(&c, format!("{base}/ingest/detection"), SAMPLE).await;
    assert_eq!(code, StatusCode::ACCEPTED);
    assert_eq!(body["record_id"], 1);
    assert_eq!(body["event_id"], 1);
    let (_, status) = get(&c, format!("{base}/status")).await;
    let fires = status["fire_events"].as_array().unwrap();
    assert_eq!(fires.len(), 1);
    assert_eq!(fires[0]["peak_temp"], 107.0);
    assert_eq!(status["alert_level"], "high");

    // the same pixel again merges into the existing fire
    let (code, body) = post(&c, format!("{base}/ingest/detection"), SAMPLE).await;
    assert_eq!(code, StatusCode::ACCEPTED);
    assert_eq!(body["merged"], true);
    let (_, status) = get(&c, format!("{base}/status")).await;
    assert_eq!(status["fire_events"].as_array().unwrap().len(), 1);

    assert_eq!(post(&c, format!("{base}/ingest/detection"), "{oops").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(
        post(&c, format!("{base}/ingest/detection"), r#"{"FireThreatLevel": 5}"#).await.0,
        StatusCode::BAD_REQUEST
    );

    let (code, body) = post(&c, format!("{base}/ingest/detection"), with_sensor("cam-9")).await;
    assert_eq!(code, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["record_id"], 3);
    let (code, body) = post(&c, format!("{base}/ingest/detection"), with_sensor("sky")).await;
    assert_eq!(code, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["record_id"], 4);
    // both unlocalized records are kept
    assert_eq!(gw.with_twin(|t| t.store().len()).await.unwrap(), 4);
    let (_, status) = get(&c, format!("{base}/status")).await;
    assert_eq!(status["fire_events"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn environment_updates() {
    let (gw, base, c) = loaded().await;
    let hot_dry = json!({"air_temp": 72.0, "humidity": 12.0, "wind_speed": 18.0, "wind_direction": 90.0}).to_string();
    assert_eq!(post(&c, format!("{base}/ingest/environment"), hot_dry.clone()).await.0, StatusCode::ACCEPTED);
    let (_, status) = get(&c, format!("{base}/status")).await;
    assert_eq!(status["env"]["air_temp"], 72.0);
    assert_eq!(status["env"]["humidity"], 12.0);
    assert_eq!(status["env"]["wind_speed"], 18.0);

    let before = gw.with_twin(|t| t.live_hash()).await.unwrap();
    assert_eq!(post(&c, format!("{base}/ingest/environment"), hot_dry).await.0, StatusCode::ACCEPTED);
    assert_eq!(gw.with_twin(|t| t.live_hash()).await.unwrap(), before);

    let wet = json!({"air_temp": 20.0, "humidity": 140.0, "wind_speed": 0.0, "wind_direction": 0.0}).to_string();
    assert_eq!(post(&c, format!("{base}/ingest/environment"), wet).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(post(&c, format!("{base}/ingest/environment"), "{}").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(gw.with_twin(|t| t.live_hash()).await.unwrap(), before);
}

#[tokio::test]
async fn recommendations() {
    let (_gw, base, c) = loaded().await;
    let (code, body) = get(&c, format!("{base}/recommendations?k=2")).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(body["reason"], "no_matches");
    assert!(body["recommendations"].as_array().unwrap().is_empty());
    assert_eq!(get(&c, format!("{base}/recommendations?k=0")).await.0, StatusCode::BAD_REQUEST);

    post(&c, format!("{base}/ingest/detection"), SAMPLE).await;
    let (code, body) = get(&c, format!("{base}/recommendations?k=2")).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(body["matches"].as_array().unwrap().len(), 2);
    assert_eq!(body["matches"][0]["scenario_id"], "indoor-small");
    let recs = body["recommendations"].as_array().unwrap();
    assert_eq!(recs[0]["plan"]["id"], "drone-recon");
    assert_eq!(recs[1]["plan"]["id"], "crew-only");
    // 25 crew requested, 20 available; 3 drones requested, 2 available
    assert_eq!(recs[0]["plan"]["actions"][0]["quantity"], 2);
    assert_eq!(recs[0]["plan"]["actions"][1]["quantity"], 20);
}

#[tokio::test]
async fn ticket_lifecycle() {
    let (_gw, base, c) = loaded().await;
    assert_eq!(post(&c, format!("{base}/plans/no-such-plan/submit"), "").await.0, StatusCode::NOT_FOUND);
    let id = approved_ticket(&c, &base).await;

    let decide = |verdict: &str| json!({"verdict": verdict, "approver_id": "deputy"}).to_string();
    let (code, _) = post(&c, format!("{base}/tickets/{id}/decision"), decide("reject")).await;
    assert_eq!(code, StatusCode::CONFLICT);
    let (code, _) = post(&c, format!("{base}/tickets/999/decision"), decide("approve")).await;
    assert_eq!(code, StatusCode::NOT_FOUND);
    let (code, _) = post(&c, format!("{base}/tickets/{id}/decision"), r#"{"verdict": "maybe"}"#).await;
    assert_eq!(code, StatusCode::BAD_REQUEST);

    let (code, t) = post(&c, format!("{base}/tickets/{id}/dispatch"), "").await;
    assert_eq!(code, StatusCode::OK, "{t}");
    assert_eq!(t["state"], "Dispatched");
    let route = &t["dispatch"]["routes"][0];
    assert!(route["waypoints"].as_array().unwrap().len() >= 2);
    assert!(route["total_length"].as_f64().unwrap() > 0.0);
    assert_eq!(post(&c, format!("{base}/tickets/{id}/dispatch"), "").await.0, StatusCode::CONFLICT);
    assert_eq!(post(&c, format!("{base}/tickets/42/dispatch"), "").await.0, StatusCode::NOT_FOUND);

    let (code, t) = post(&c, format!("{base}/tickets/{id}/outcome"), r#"{"success": true, "note": "out"}"#).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(t["state"], "Executed");
    let (_, status) = get(&c, format!("{base}/status")).await;
    assert_eq!(status["outcomes"][0]["ticket_id"], id);
    assert_eq!(status["tickets"][0]["state"], "Executed");
}

#[tokio::test]
async fn modify_and_reject() {
    let (_gw, base, c) = loaded().await;
    post(&c, format!("{base}/ingest/detection"), SAMPLE).await;
    let (_, a) = post(&c, format!("{base}/plans/crew-only/submit"), "").await;
    let (_, b) = post(&c, format!("{base}/plans/drone-recon/submit"), r#"{"scenario_id": "indoor-small"}"#).await;
    let (a, b) = (a["id"].as_u64().unwrap(), b["id"].as_u64().unwrap());

    let (code, _) =
        post(&c, format!("{base}/tickets/{a}/decision"), r#"{"verdict": "modify", "approver_id": "x"}"#).await;
    assert_eq!(code, StatusCode::BAD_REQUEST);
    let mut plan = common::library()[1].plans[0].clone();
    plan.actions[0].quantity = 2;
    let body = json!({"verdict": "modify", "approver_id": "x", "modified_plan": plan}).to_string();
    let (code, t) = post(&c, format!("{base}/tickets/{a}/decision"), body).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(t["state"], "Approved");
    assert_eq!(t["plan"]["actions"][0]["quantity"], 2);

    let (code, t) =
        post(&c, format!("{base}/tickets/{b}/decision"), r#"{"verdict": "reject", "approver_id": "x"}"#).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(t["state"], "Rejected");
    // the rejection demotes the plan in later rankings
    let (_, recs) = get(&c, format!("{base}/recommendations?k=1")).await;
    let drone = recs["recommendations"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["plan"]["id"] == "drone-recon")
        .unwrap()
        .clone();
    assert_eq!(drone["penalty"], 0.8);
}

#[tokio::test]
async fn replay_endpoint() {
    let (_gw, base, c) = loaded().await;
    post(&c, format!("{base}/ingest/detection"), SAMPLE).await;
    let (_, status) = get(&c, format!("{base}/status")).await;
    let live = status["fire_events"][0]["position"].clone();
    let (code, a) = get(&c, format!("{base}/replay/1")).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(a["lifetime"], 30.0);
    assert_eq!(a["source_record_id"], 1);
    assert_eq!(a["fire_event"]["position"], live);
    let (_, b) = get(&c, format!("{base}/replay/1")).await;
    assert_eq!(a["fire_event"]["position"], b["fire_event"]["position"]);
    assert_ne!(a["fire_event"]["id"], b["fire_event"]["id"]);
    assert_eq!(get(&c, format!("{base}/replay/77")).await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&c, format!("{base}/replay/0")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn projection_is_isolated() {
    let (gw, base, c) = loaded().await;
    post(&c, format!("{base}/ingest/detection"), SAMPLE).await;
    gw.with_twin(|t| t.advance(20.0).unwrap()).await.unwrap();
    assert_eq!(get(&c, format!("{base}/projection?horizon_s=0")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&c, format!("{base}/projection?horizon_s=-3")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&c, format!("{base}/projection")).await.0, StatusCode::BAD_REQUEST);

    let before = gw.with_twin(|t| t.live_hash()).await.unwrap();
    let (code, p) = get(&c, format!("{base}/projection?horizon_s=0.5")).await;
    assert_eq!(code, StatusCode::OK);
    // the same advance on a private clone
    let expected = gw
        .with_twin(|t| {
            let mut s = t.spread().unwrap().clone();
            s.step(0.5).unwrap();
            s.arrival_map()
        })
        .await
        .unwrap();
    let got: Vec<Option<f64>> = p["arrival_map"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["arrival_time"].as_f64())
        .collect();
    assert_eq!(got, expected);
    assert_eq!(p["from"], 20.0);
    assert_eq!(p["until"], 20.5);

    let (_, far) = get(&c, format!("{base}/projection?horizon_s=30")).await;
    assert!(far["burning_area"].as_f64().unwrap() > p["burning_area"].as_f64().unwrap());
    assert_eq!(gw.with_twin(|t| t.live_hash()).await.unwrap(), before);
    let (_, status) = get(&c, format!("{base}/status")).await;
    assert_eq!(status["sim_time"], 20.0);
}

#[tokio::test]
async fn reads_are_idempotent() {
    let (_gw, base, c) = loaded().await;
    post(&c, format!("{base}/ingest/detection"), SAMPLE).await;
    let a = get(&c, format!("{base}/status")).await.1;
    get(&c, format!("{base}/recommendations?k=3")).await;
    get(&c, format!("{base}/projection?horizon_s=5")).await;
    let b = get(&c, format!("{base}/status")).await.1;
    assert_eq!(a, b);
}

async fn next_event<S>(ws: &mut S) -> StreamEvent
where
    S: StreamExt<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin,
{
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next()).await.unwrap().unwrap().unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

#[tokio::test]
async fn stream_delivers_every_transition_in_order() {
    let (gw, base, c) = loaded().await;
    let url = format!("{}/stream", base.replace("http", "ws"));
    let (mut ws, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    let (mut ws2, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    // make sure both subscriptions are live before anything happens
    tokio::time::sleep(Duration::from_millis(100)).await;

    let id = approved_ticket(&c, &base).await;
    gw.with_twin(|t| t.advance(0.5).unwrap()).await.unwrap();
    post(&c, format!("{base}/tickets/{id}/dispatch"), "").await;

    let expected = [
        StreamKind::Detection,
        StreamKind::FireEvent,
        StreamKind::Recommendation,
        StreamKind::TicketTransition,
        StreamKind::TicketTransition,
        StreamKind::TicketTransition,
        StreamKind::SpreadTick,
        StreamKind::TicketTransition,
    ];
    for socket in [&mut ws, &mut ws2] {
        let mut last = 0;
        let mut kinds = Vec::new();
        let mut states = Vec::new();
        for _ in 0..expected.len() {
            let ev = next_event(socket).await;
            assert!(ev.seq > last, "seq went {last} -> {}", ev.seq);
            last = ev.seq;
            if ev.kind == StreamKind::TicketTransition {
                states.push(ev.payload["state"].as_str().unwrap().to_owned());
            }
            kinds.push(ev.kind);
        }
        assert_eq!(kinds, expected);
        assert_eq!(states, ["Proposed", "PendingApproval", "Approved", "Dispatched"]);
    }
}

#[tokio::test]
async fn lagging_subscribers_are_cut_off() {
    let (gw, _base, _c) = loaded().await;
    let mut slow = gw.subscribe();
    for _ in 0..STREAM_BUFFER + 10 {
        gw.with_twin(|t| t.advance(0.0).unwrap()).await.unwrap();
    }
    assert!(matches!(slow.try_recv(), Err(TryRecvError::Lagged(10))));
}
