mod common;

use std::sync::Arc;

use common::MockDataset;
use serde_json::{json, Value};
use text2seg_core::{DatasetManifest, StrategyId};
use text2seg_harness::config::open_backend;
use text2seg_harness::eval::evaluate;
use text2seg_harness::mockdata::MockDatasetConfig;
use text2seg_harness::service::{handle_segment, service_router, SegmentApiRequest, ServiceState};

fn state(ds: &MockDataset) -> ServiceState {
    let cfg = ds.config(&[StrategyId::S1BoxPrompted]);
    ServiceState {
        manifest: Arc::new(DatasetManifest::load(&ds.manifest).unwrap()),
        backend: open_backend(&cfg.backend).unwrap().backend,
        params: cfg.params.clone(),
    }
}

fn spawn(state: ServiceState) -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    listener.set_nonblocking(true).unwrap();
    std::thread::spawn(move || {
        tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .unwrap()
            .block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).unwrap();
                axum::serve(listener, service_router(state)).await.unwrap();
            })
    });
    format!("http://{addr}")
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

fn get(url: &str) -> (u16, Vec<u8>) {
    let mut resp = agent().get(url).call().unwrap();
    (resp.status().as_u16(), resp.body_mut().read_to_vec().unwrap())
}

fn post(url: &str, body: &Value) -> (u16, Value) {
    let mut resp = agent()
        .post(url)
        .header("content-type", "application/json")
        .send(serde_json::to_vec(body).unwrap())
        .unwrap();
    let status = resp.status().as_u16();
    let body = resp.body_mut().with_config().limit(u64::MAX).read_to_string().unwrap();
    (status, serde_json::from_str(&body).unwrap())
}

fn dataset() -> MockDataset {
    MockDataset::new(&MockDatasetConfig {
        scenes: 2,
        seed: 13,
        ..Default::default()
    })
}

#[test]
fn strategies_and_manifest_endpoints() {
    let ds = dataset();
    let url = spawn(state(&ds));
    let (status, body) = get(&format!("{url}/api/strategies"));
    assert_eq!(status, 200);
    let list: Value = serde_json::from_slice(&body).unwrap();
    let ids: Vec<&str> = list
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["s1", "s2", "s3", "s4", "s5"]);
    assert!(list.as_array().unwrap().iter().all(|d| d["available"] == true));

    let (status, body) = get(&format!("{url}/api/manifest"));
    assert_eq!(status, 200);
    let m: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(m["classes"].as_array().unwrap().len(), 5);
    assert_eq!(m["items"][1]["id"], "scene_001");
    assert_eq!(m["items"][1]["has_gt"], true);
    assert_eq!(m["defaults"]["prompt"]["grid_n"], 32);
}

#[test]
fn item_image_is_served_as_png() {
    let ds = dataset();
    let url = spawn(state(&ds));
    let (status, body) = get(&format!("{url}/api/items/scene_000/image"));
    assert_eq!(status, 200);
    assert_eq!(body, std::fs::read(ds.path("images/scene_000.png")).unwrap());
    let (status, body) = get(&format!("{url}/api/items/nope/image"));
    assert_eq!(status, 400);
    let err: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(err["error"]["code"], "bad_request");
}

#[test]
fn segment_scores_against_ground_truth() {
    let ds = dataset();
    let url = spawn(state(&ds));
    let (status, body) = post(
        &format!("{url}/api/segment"),
        &json!({"item": "scene_000", "label": "building", "strategy": "s1"}),
    );
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["metrics"]["iou"], 1.0);
    assert_eq!(body["metrics"]["oa"], 1.0);
    assert_eq!(body["traces"].as_array().unwrap().len(), 1);
    assert_eq!(body["strategy"], "s1");
}

#[test]
fn uploaded_image_has_no_metrics() {
    let ds = dataset();
    let url = spawn(state(&ds));
    let png = std::fs::read(ds.path("images/scene_001.png")).unwrap();
    use base64::Engine as _;
    let b64 = base64::engine::general_purpose::STANDARD.encode(png);
    let (status, body) = post(
        &format!("{url}/api/segment"),
        &json!({"image_png_b64": b64, "label": "tree", "synonyms": ["plant"], "strategy": "S2"}),
    );
    assert_eq!(status, 200, "{body}");
    assert!(body.get("metrics").is_none());
    assert_eq!(body["class"]["synonyms"], json!(["plant"]));
}

#[test]
fn bad_segment_requests() {
    let ds = dataset();
    let url = spawn(state(&ds));
    let seg = format!("{url}/api/segment");
    for req in [
        json!({"item": "scene_000", "label": "building", "strategy": "s9"}),
        json!({"item": "missing", "label": "building", "strategy": "s1"}),
        json!({"label": "building", "strategy": "s1"}),
        json!({"item": "scene_000", "label": "  ", "strategy": "s1"}),
        json!({"item": "scene_000", "image_png_b64": "", "label": "building", "strategy": "s1"}),
        json!({"item": "scene_000", "strategy": "s1"}),
    ] {
        let (status, body) = post(&seg, &req);
        assert_eq!(status, 400, "{req}: {body}");
        assert_eq!(body["error"]["code"], "bad_request");
    }
}

#[test]
fn service_matches_batch_evaluation() {
    let ds = MockDataset::new(&MockDatasetConfig {
        scenes: 2,
        seed: 21,
        tile_size: 40,
        ..Default::default()
    });
    let st = state(&ds);
    let record = evaluate(&ds.config(&StrategyId::ALL)).unwrap();
    for r in &record.item_reports {
        let resp = handle_segment(
            &st,
            SegmentApiRequest {
                item: Some(r.item.clone()),
                image_png_b64: None,
                label: r.report.label.clone(),
                synonyms: vec![],
                strategy: r.strategy.clone(),
                params: None,
            },
        )
        .unwrap();
        assert_eq!(
            resp.metrics.as_ref(),
            Some(&r.report),
            "{} {} {}",
            r.item,
            r.strategy,
            r.report.label
        );
    }
}
