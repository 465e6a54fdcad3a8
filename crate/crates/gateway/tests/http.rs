use std::sync::Arc;
use std::time::{Duration, Instant};

use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use twinflow_core::bundled;
use twinflow_core::circuit::{normalize, parse_netlist};
use twinflow_core::diagnosis::HistoryDb;
use twinflow_core::link::SharedLink;
use twinflow_core::runtime::{Twin, TwinConfig};
use twinflow_core::synthesize;
use twinflow_gateway::{router, AppState, Engine, EngineHandle};

struct Server {
    base: String,
    client: Client,
    engine: EngineHandle,
}

impl Drop for Server {
    fn drop(&mut self) {
        self.engine.shutdown();
    }
}

async fn start(text: &str, external: bool, heartbeat: Duration, sensors: &[&str]) -> Server {
    let g = normalize(parse_netlist(text).unwrap()).unwrap();
    let eqs = synthesize(&g);
    let config = TwinConfig {
        pause_ms: 5,
        decay_interval: 0,
        sensors: sensors.iter().map(|s| s.to_string()).collect(),
        ..TwinConfig::default()
    };
    let mut twin = Twin::new(g.clone(), eqs.clone(), config).unwrap();
    twin.attach_history(HistoryDb::new(twin.variables())).unwrap();
    let link = external.then(SharedLink::new);
    if let Some(l) = &link {
        twin.attach_link(Box::new(l.clone())).unwrap();
    }
    let engine = Engine::spawn(twin, None);
    let app = router(AppState {
        engine: engine.clone(),
        graph: Arc::new(g),
        equations: Arc::new(eqs),
        external: link,
        heartbeat,
    });
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    Server {
        base: format!("http://{addr}"),
        client: Client::new(),
        engine,
    }
}

async fn circuit1() -> Server {
    start(bundled::CIRCUIT1, false, Duration::from_secs(30), &[]).await
}

impl Server {
    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = r.status();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        let r = self
            .client
            .post(format!("{}{path}", self.base))
            .json(&body)
            .send()
            .await
            .unwrap();
        let status = r.status();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    async fn command(&self, body: Value) {
        let (status, reply) = self.post("/command", body).await;
        assert!(status.is_success(), "{status}: {reply}");
    }

    async fn wait_for(&self, what: &str, pred: impl Fn(&Value) -> bool) -> Value {
        let deadline = Instant::now() + Duration::from_secs(5);
        loop {
            let (_, state) = self.get("/state").await;
            if pred(&state) {
                return state;
            }
            assert!(Instant::now() < deadline, "timed out waiting for {what}: {state}");
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
    }

    async fn events(&self, query: &str) -> Sse {
        let resp = self
            .client
            .get(format!("{}/events{query}", self.base))
            .send()
            .await
            .unwrap();
        assert_eq!(resp.status(), StatusCode::OK);
        Sse {
            resp,
            buf: String::new(),
        }
    }
}

fn on(state: &Value, var: &str) -> bool {
    state["values"][var] == true
}

#[derive(Debug)]
struct Frame {
    event: String,
    id: Option<u64>,
    data: Value,
    comment: bool,
}

struct Sse {
    resp: reqwest::Response,
    buf: String,
}

impl Sse {
    /// Next frame, or None when nothing arrives within `within`.
    async fn next(&mut self, within: Duration) -> Option<Frame> {
        let deadline = tokio::time::Instant::now() + within;
        loop {
            if let Some(end) = self.buf.find("\n\n") {
                let raw: String = self.buf.drain(..end + 2).collect();
                let mut f = Frame {
                    event: String::new(),
                    id: None,
                    data: Value::Null,
                    comment: false,
                };
                for line in raw.lines() {
                    if let Some(v) = line.strip_prefix("event:") {
                        f.event = v.trim().to_string();
                    } else if let Some(v) = line.strip_prefix("id:") {
                        f.id = v.trim().parse().ok();
                    } else if let Some(v) = line.strip_prefix("data:") {
                        f.data = serde_json::from_str(v.trim()).unwrap_or(Value::String(v.trim().into()));
                    } else if line.starts_with(':') {
                        f.comment = true;
                    }
                }
                return Some(f);
            }
            let chunk = tokio::time::timeout_at(deadline, self.resp.chunk()).await.ok()?;
            self.buf.push_str(&String::from_utf8_lossy(&chunk.unwrap()?));
        }
    }

    /// Frames until one satisfies `stop`, included.
    async fn until(&mut self, stop: impl Fn(&Frame) -> bool) -> Vec<Frame> {
        let mut out = Vec::new();
        loop {
            let f = self.next(Duration::from_secs(5)).await.expect("event stream stalled");
            let done = stop(&f);
            out.push(f);
            if done {
                return out;
            }
        }
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn fresh_twin_is_all_off() {
    let s = circuit1().await;
    let (status, state) = s.get("/state").await;
    assert_eq!(status, StatusCode::OK);
    let values = state["values"].as_object().unwrap();
    assert_eq!(values.len(), 7);
    assert!(values.values().all(|v| v == false));
    let (_, w) = s.get("/warnings").await;
    assert_eq!(w["warnings"], json!([]));
    assert_eq!(w["head"], Value::Null);
}

#[tokio::test(flavor = "multi_thread")]
async fn circuit_and_equations_are_served() {
    let s = circuit1().await;
    let (_, c) = s.get("/circuit").await;
    assert_eq!(c["graph"]["name"], "circuit1");
    assert_eq!(c["variables"].as_array().unwrap().len(), 7);
    let layout = c["layout"].as_array().unwrap();
    assert!(layout.iter().any(|p| p["id"] == "E3" && p["declared"] == true));
    let (_, e) = s.get("/equations").await;
    let text = e["text"].as_str().unwrap();
    assert!(text.contains("E3 = E1.E2 + E3p"), "{text}");
    assert!(text.contains("F1r = S2"), "{text}");
    assert!(e["equations"].is_array() || e["equations"].is_object());
}

#[tokio::test(flavor = "multi_thread")]
async fn commands_fill_the_circuit() {
    let s = circuit1().await;
    s.command(json!({"type": "set_input", "id": "E1", "value": true})).await;
    let (status, _) = s
        .post("/command", json!({"type": "set_actuator", "id": "E2", "value": true}))
        .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let state = s.wait_for("E3 to fill", |st| on(st, "E3")).await;
    assert!(on(&state, "S1"));
    assert!(!on(&state, "S2"));
    assert_eq!(state["word"].as_str().unwrap().len(), 7);
}

#[tokio::test(flavor = "multi_thread")]
async fn bad_requests_are_rejected() {
    let s = circuit1().await;
    let (status, body) = s.post("/warnings/99/ack", json!(null)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].as_str().unwrap().contains("99"));
    let (status, _) = s.post("/command", json!({"type": "ack_warning", "id": 4})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, body) = s
        .post("/command", json!({"type": "set_actuator", "id": "S1", "value": true}))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    let (status, _) = s.post("/command", json!({"type": "empty_variable", "id": "E1"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = s.post("/command", json!({"type": "launch"})).await;
    assert!(status.is_client_error());
    let (status, _) = s.get("/ps/actuate").await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test(flavor = "multi_thread")]
async fn backflow_is_streamed_and_acknowledged() {
    let s = circuit1().await;
    let (_, state) = s.get("/state").await;
    let since = state["seq"].as_u64().unwrap();
    let mut sse = s.events(&format!("?since_seq={since}")).await;

    s.command(json!({"type": "set_input", "id": "E1", "value": true})).await;
    s.command(json!({"type": "set_actuator", "id": "E2", "value": true})).await;
    let filled = sse.until(|f| f.event == "state_changed" && f.data["payload"]["variable"] == "S1").await;
    let order: Vec<&str> = filled
        .iter()
        .filter(|f| f.event == "state_changed")
        .map(|f| f.data["payload"]["variable"].as_str().unwrap())
        .collect();
    let e3 = order.iter().position(|v| *v == "E3").unwrap();
    let s1 = order.iter().position(|v| *v == "S1").unwrap();
    assert!(e3 < s1, "{order:?}");
    assert_eq!(filled.last().unwrap().data["payload"]["origin"], "step2");

    s.command(json!({"type": "set_actuator", "id": "E2", "value": false})).await;
    s.wait_for("E2 to close", |st| st["values"]["E2"] == false).await;
    s.command(json!({"type": "empty_variable", "id": "E3"})).await;
    let raised = sse.until(|f| f.event == "warning_raised").await;
    let w = &raised.last().unwrap().data["payload"];
    assert_eq!(w["target"], "E3");
    assert_eq!(w["source_terms"], json!(["S1"]));
    let ids: Vec<u64> = raised.iter().filter_map(|f| f.id).collect();
    assert!(ids.windows(2).all(|p| p[1] == p[0] + 1), "gap in {ids:?}");

    // assignment waits for the operator
    let id = w["id"].as_u64().unwrap();
    tokio::time::sleep(Duration::from_millis(50)).await;
    let (_, st) = s.get("/state").await;
    assert!(!on(&st, "E3"));
    let (_, warnings) = s.get("/warnings").await;
    assert_eq!(warnings["head"], id);

    let (status, body) = s.post(&format!("/warnings/{id}/ack"), json!(null)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["warning"]["state"], "acknowledged");
    let acked = sse
        .until(|f| f.event == "state_changed" && f.data["payload"]["origin"] == "ack")
        .await;
    assert!(acked.iter().any(|f| f.event == "warning_acked"), "{acked:#?}");
    assert_eq!(acked.last().unwrap().data["payload"]["variable"], "E3");
    let st = s.wait_for("E3 after ack", |st| on(st, "E3")).await;
    assert_eq!(st["pending"], json!([]));

    // a second ack is harmless
    let (status, _) = s.post(&format!("/warnings/{id}/ack"), json!(null)).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test(flavor = "multi_thread")]
async fn reconnect_replays_only_missed_events() {
    let s = circuit1().await;
    s.command(json!({"type": "set_input", "id": "F1", "value": true})).await;
    let state = s.wait_for("S2", |st| on(st, "S2")).await;
    // let the loop settle so nothing else is emitted
    tokio::time::sleep(Duration::from_millis(50)).await;
    let (_, settled) = s.get("/state").await;
    assert_eq!(settled["seq"], state["seq"]);
    let last = state["seq"].as_u64().unwrap();
    assert!(last >= 2);

    let mut sse = s.events(&format!("?since_seq={}", last - 2)).await;
    let a = sse.next(Duration::from_secs(2)).await.unwrap();
    let b = sse.next(Duration::from_secs(2)).await.unwrap();
    assert_eq!((a.id, b.id), (Some(last - 1), Some(last)));
    assert!(sse.next(Duration::from_millis(200)).await.is_none());

    // the header form works the same way
    let resp = s
        .client
        .get(format!("{}/events", s.base))
        .header("Last-Event-ID", (last - 1).to_string())
        .send()
        .await
        .unwrap();
    let mut sse = Sse {
        resp,
        buf: String::new(),
    };
    assert_eq!(sse.next(Duration::from_secs(2)).await.unwrap().id, Some(last));
}

#[tokio::test(flavor = "multi_thread")]
async fn idle_stream_carries_heartbeats_only() {
    let s = start(bundled::CIRCUIT1, false, Duration::from_millis(50), &[]).await;
    let mut sse = s.events("").await;
    for _ in 0..3 {
        let f = sse.next(Duration::from_secs(2)).await.unwrap();
        assert!(f.comment && f.event.is_empty(), "{f:?}");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn history_lists_and_labels_words() {
    let s = circuit1().await;
    let (_, h) = s.get("/history").await;
    let records = h["records"].as_array().unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["word"], "0000000");
    assert_eq!(records[0]["label"], "unseen");

    let (status, body) = s
        .post("/history/0000000/label", json!({"label": "normal", "note": "idle"}))
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["record"]["label"], "normal");
    let (_, h) = s.get("/history").await;
    assert_eq!(h["records"][0]["note"], "idle");

    let (status, _) = s.post("/history/1111111/label", json!({"label": "normal"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = s.post("/history/01x/label", json!({"label": "normal"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn external_physical_system_over_http() {
    let s = start(bundled::CIRCUIT1, true, Duration::from_secs(30), &["S1"]).await;
    s.command(json!({"type": "set_input", "id": "E1", "value": true})).await;
    let deadline = Instant::now() + Duration::from_secs(5);
    loop {
        let (status, a) = s.get("/ps/actuate").await;
        assert_eq!(status, StatusCode::OK);
        if a["actuate"]["states"]["E1"] == true {
            break;
        }
        assert!(Instant::now() < deadline, "E1 never pushed: {a}");
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    let r = s
        .client
        .post(format!("{}/ps/frame", s.base))
        .json(&json!({"readings": {"S1": 0.8}}))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::NO_CONTENT);
    let st = s.wait_for("S1 from the sensor", |st| on(st, "S1")).await;
    assert!(!on(&st, "E3"));
}
