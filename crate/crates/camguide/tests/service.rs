use std::time::Duration;

use camguide::formats::{FrameStateJson, SceneFile};
use camguide::service::{router, ServiceState, SessionHandle};
use camguide_core::simulator::{generate_scene, NoiseModel, SceneConfig};
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};

async fn start(scenes: Option<std::path::PathBuf>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(ServiceState::new(scenes))).await.unwrap() });
    format!("http://{addr}")
}

async fn create(c: &Client, base: &str, body: Value) -> reqwest::Response {
    c.post(format!("{base}/sessions")).json(&body).send().await.unwrap()
}

async fn manual(c: &Client, base: &str, seed: u64) -> SessionHandle {
    let r = create(c, base, json!({"scene": {"seed": seed}, "initial": 10, "destination": 12})).await;
    assert_eq!(r.status(), StatusCode::OK);
    r.json().await.unwrap()
}

async fn state(c: &Client, base: &str, id: &str) -> FrameStateJson {
    c.get(format!("{base}/sessions/{id}")).send().await.unwrap().json().await.unwrap()
}

async fn steer(c: &Client, base: &str, id: &str, pan: f64, tilt: f64) -> reqwest::Response {
    c.post(format!("{base}/sessions/{id}/steer")).json(&json!({"pan": pan, "tilt": tilt})).send().await.unwrap()
}

#[tokio::test]
async fn create_and_get_state() {
    let (c, base) = (Client::new(), start(None).await);
    let h = manual(&c, &base, 0).await;
    assert!(!h.id.is_empty());
    let s = state(&c, &base, &h.id).await;
    assert_eq!(s.frame, 0);
    assert_eq!(s.status, "InProgress");
    assert_eq!(s.image_size, [1280, 720]);
    assert!(!s.features.is_empty());
    // Idempotent reads.
    assert_eq!(state(&c, &base, &h.id).await, s);
    let raw: Value = c.get(format!("{base}/sessions/{}", h.id)).send().await.unwrap().json().await.unwrap();
    for key in ["frame", "status", "step", "features", "overlay", "image_size"] {
        assert!(raw.get(key).is_some(), "missing {key}");
    }
    assert!(["point", "arrow", "lines"].contains(&raw["overlay"]["kind"].as_str().unwrap()));
}

#[tokio::test]
async fn request_errors() {
    let (c, base) = (Client::new(), start(None).await);
    let r = create(&c, &base, json!({"scene": {}, "initial": 4, "destination": 4})).await;
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let r = create(&c, &base, json!({"scene": {}, "initial": 4, "destination": 4000})).await;
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let body: Value = r.json().await.unwrap();
    assert!(body["error"].as_str().unwrap().contains("4000"));
    let r = create(&c, &base, json!({"initial": 0, "destination": 1})).await;
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let r = create(&c, &base, json!({"scene": {"layout": "spiral"}, "initial": 0, "destination": 1})).await;
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let r = create(&c, &base, json!({"scene_id": "nope", "initial": 0, "destination": 1})).await;
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    let r = c.get(format!("{base}/sessions/s999")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    assert_eq!(steer(&c, &base, "s999", 0.0, 0.0).await.status(), StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn steers_advance_the_frame() {
    let (c, base) = (Client::new(), start(None).await);
    let h = manual(&c, &base, 0).await;
    for i in 1..=4u64 {
        let r = steer(&c, &base, &h.id, 0.003, -0.002).await;
        assert_eq!(r.status(), StatusCode::OK);
        let s: FrameStateJson = r.json().await.unwrap();
        assert_eq!(s.frame, i);
    }
    assert_eq!(state(&c, &base, &h.id).await.frame, 4);
    let r = c.post(format!("{base}/sessions/{}/steer", h.id)).json(&json!({"pan": 0.1})).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn sessions_are_isolated() {
    let (c, base) = (Client::new(), start(None).await);
    let (a, b) = (manual(&c, &base, 0).await, manual(&c, &base, 0).await);
    assert_ne!(a.id, b.id);
    let before = state(&c, &base, &b.id).await;
    for _ in 0..3 {
        steer(&c, &base, &a.id, 0.01, 0.0).await;
    }
    assert_eq!(state(&c, &base, &a.id).await.frame, 3);
    assert_eq!(state(&c, &base, &b.id).await, before);
}

#[tokio::test]
async fn auto_mode_finishes_by_itself() {
    let (c, base) = (Client::new(), start(None).await);
    let r = create(&c, &base, json!({"scene": {"seed": 3}, "initial": 10, "destination": 14, "mode": "auto"})).await;
    assert_eq!(r.status(), StatusCode::OK);
    let h: SessionHandle = r.json().await.unwrap();
    assert_eq!(h.mode, camguide::service::Mode::Auto);
    assert_eq!(steer(&c, &base, &h.id, 0.0, 0.0).await.status(), StatusCode::CONFLICT);
    let mut last = 0;
    for _ in 0..600 {
        let s = state(&c, &base, &h.id).await;
        assert!(s.frame >= last);
        last = s.frame;
        if s.status != "InProgress" {
            return;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("auto session still running at frame {last}");
}

/// Reads server-sent events until `n` data payloads have arrived or the
/// stream ends.
async fn read_events(mut r: reqwest::Response, n: usize) -> Vec<FrameStateJson> {
    let (mut buf, mut out) = (String::new(), Vec::new());
    while out.len() < n {
        let Some(chunk) = tokio::time::timeout(Duration::from_secs(30), r.chunk()).await.unwrap().unwrap() else { break };
        buf.push_str(&String::from_utf8_lossy(&chunk));
        while let Some(end) = buf.find("\n\n") {
            let event: String = buf.drain(..end + 2).collect();
            for line in event.lines() {
                if let Some(data) = line.strip_prefix("data:") {
                    out.push(serde_json::from_str(data.trim()).unwrap());
                }
            }
        }
    }
    out
}

#[tokio::test]
async fn stream_delivers_frames_in_order() {
    let (c, base) = (Client::new(), start(None).await);
    let h = manual(&c, &base, 0).await;
    let r = c.get(format!("{base}/sessions/{}/stream", h.id)).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert!(r.headers()["content-type"].to_str().unwrap().starts_with("text/event-stream"));
    let reader = tokio::spawn(read_events(r, 4));
    // Gives the subscriber time to attach before the first steer.
    tokio::time::sleep(Duration::from_millis(200)).await;
    for _ in 0..3 {
        steer(&c, &base, &h.id, 0.002, 0.0).await;
    }
    let frames: Vec<u64> = reader.await.unwrap().iter().map(|s| s.frame).collect();
    assert_eq!(frames, [0, 1, 2, 3]);
}

#[tokio::test]
async fn stream_ends_after_terminal_state() {
    let (c, base) = (Client::new(), start(None).await);
    let r = create(&c, &base, json!({"scene": {"seed": 3}, "initial": 10, "destination": 14, "mode": "auto"})).await;
    let h: SessionHandle = r.json().await.unwrap();
    let r = c.get(format!("{base}/sessions/{}/stream", h.id)).send().await.unwrap();
    let events = read_events(r, usize::MAX).await;
    assert!(events.windows(2).all(|w| w[0].frame < w[1].frame));
    assert_ne!(events.last().unwrap().status, "InProgress");
}

#[tokio::test]
async fn scenes_directory() {
    let dir = tempfile::TempDir::new().unwrap();
    let scene = generate_scene(&SceneConfig { seed: 5, ..SceneConfig::default() }).unwrap();
    let file = SceneFile::new(&scene, &NoiseModel::default().with_seed(5));
    std::fs::write(dir.path().join("desk.json"), serde_json::to_string(&file).unwrap()).unwrap();
    let (c, base) = (Client::new(), start(Some(dir.path().to_owned())).await);
    let r = create(&c, &base, json!({"scene_id": "desk", "initial": 20, "destination": 22})).await;
    assert_eq!(r.status(), StatusCode::OK);
    let h: SessionHandle = r.json().await.unwrap();
    assert_eq!(state(&c, &base, &h.id).await.frame, 0);
    let r = create(&c, &base, json!({"scene_id": "../desk", "initial": 20, "destination": 22})).await;
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
}
