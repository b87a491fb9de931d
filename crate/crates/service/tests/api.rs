use std::collections::HashSet;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use morpheus_tensor::Tensor;
use serde_json::{json, Value};
use stylemorpheus::codes::SemanticCode;
use stylemorpheus::data_io::image_io::{decode_rgb, encode_png_mask, encode_png_rgb};
use stylemorpheus::{Model, ModelConfig};
use stylemorpheus_service::schema::encode_base64;
use stylemorpheus_service::{app, ServiceConfig, LATENCY_HEADER};
use tower::ServiceExt;

fn model() -> Arc<Model> {
    Arc::new(Model::new(ModelConfig::toy(), 3).unwrap())
}

fn code(m: &Model, phase: f32) -> SemanticCode {
    let mut k = 0.0f32;
    m.config.codes.map(|_, &d| {
        (0..d)
            .map(|_| {
                k += 1.0;
                (k * 0.7 + phase).sin()
            })
            .collect()
    })
}

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

async fn send(router: &Router, req: Request<Body>) -> Reply {
    let res = router.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

async fn post(router: &Router, path: &str, body: Value) -> Reply {
    let req = Request::post(path).header(header::CONTENT_TYPE, "application/json").body(Body::from(body.to_string()));
    send(router, req.unwrap()).await
}

async fn get(router: &Router, path: &str) -> Reply {
    send(router, Request::get(path).body(Body::empty()).unwrap()).await
}

async fn wait_job(router: &Router, id: u64) -> Vec<Value> {
    let mut seen = Vec::new();
    for _ in 0..6000 {
        let job = get(router, &format!("/jobs/{id}")).await.json();
        let state = job["state"].as_str().unwrap().to_string();
        seen.push(job);
        if state == "done" || state == "failed" {
            return seen;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("job {id} did not finish");
}

fn rank(state: &str) -> u8 {
    match state {
        "queued" => 0,
        "running" => 1,
        "done" | "failed" => 2,
        other => panic!("unknown state {other}"),
    }
}

fn assert_monotone(polls: &[Value]) {
    for w in polls.windows(2) {
        assert!(rank(w[0]["state"].as_str().unwrap()) <= rank(w[1]["state"].as_str().unwrap()));
        assert!(w[0]["progress"]["step"].as_u64() <= w[1]["progress"]["step"].as_u64());
    }
}

#[tokio::test]
async fn health_reports_model_summary() {
    let m = model();
    let r = get(&app(Some(m.clone()), ServiceConfig::default()), "/health").await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["model"], m.summary());
}

#[tokio::test]
async fn without_model_everything_is_503() {
    let router = app(None, ServiceConfig::default());
    assert_eq!(get(&router, "/health").await.status, StatusCode::SERVICE_UNAVAILABLE);
    let r = post(&router, "/render", json!({ "code": {}, "pose": {} })).await;
    assert_eq!(r.status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(r.json()["error"], "no_model");
}

#[tokio::test]
async fn render_is_byte_identical_and_reports_latency() {
    let m = model();
    let router = app(Some(m.clone()), ServiceConfig::default());
    let req = json!({ "code": code(&m, 0.0), "pose": { "yaw": 0.2, "pitch": -0.1 } });
    let a = post(&router, "/render", req.clone()).await;
    let b = post(&router, "/render", req).await;
    assert_eq!(a.status, StatusCode::OK);
    assert_eq!(a.headers[header::CONTENT_TYPE], "image/png");
    assert_eq!(a.body, b.body);
    let ms: f64 = a.headers[LATENCY_HEADER].to_str().unwrap().parse().unwrap();
    assert!(ms >= 0.0);
    let res = m.config.final_res();
    assert_eq!(decode_rgb(&a.body).unwrap().shape(), &[res, res, 3]);
}

#[tokio::test]
async fn render_size_resizes_output() {
    let m = model();
    let router = app(Some(m.clone()), ServiceConfig::default());
    let r = post(&router, "/render", json!({ "code": code(&m, 0.0), "pose": {}, "size": 48 })).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(decode_rgb(&r.body).unwrap().shape(), &[48, 48, 3]);
}

#[tokio::test]
async fn yaw_sweep_gives_distinct_images() {
    let m = model();
    let router = app(Some(m.clone()), ServiceConfig::default());
    let z = code(&m, 1.0);
    let mut hashes = HashSet::new();
    for k in 0..11 {
        let yaw = -0.5 + 0.1 * k as f64;
        let r = post(&router, "/render", json!({ "code": z, "pose": { "yaw": yaw } })).await;
        assert_eq!(r.status, StatusCode::OK);
        let pixels = decode_rgb(&r.body).unwrap();
        let bytes: Vec<u32> = pixels.data().iter().map(|v| v.to_bits()).collect();
        hashes.insert(bytes);
    }
    assert_eq!(hashes.len(), 11);
}

#[tokio::test]
async fn malformed_requests_name_the_field() {
    let m = model();
    let router = app(Some(m.clone()), ServiceConfig::default());
    let z = code(&m, 0.0);
    let cases = [
        (json!({ "code": z, "pose": { "yaw": "left" } }), "pose.yaw"),
        (json!({ "code": z, "pose": { "tilt": 0.1 } }), "pose.tilt"),
        (json!({ "code": z, "pose": { "t": [0, 1] } }), "pose.t"),
        (json!({ "code": z }), "pose"),
        (json!({ "pose": {} }), "code"),
        (json!({ "code": z, "fit": 1, "pose": {} }), "code"),
        (json!({ "code": { "id": [1.0] }, "pose": {} }), "code"),
        (json!({ "fit": 99, "pose": {} }), "fit"),
        (json!({ "code": z, "pose": {}, "size": 5000 }), "size"),
    ];
    for (body, field) in cases {
        let r = post(&router, "/render", body.clone()).await;
        assert_eq!(r.status, StatusCode::BAD_REQUEST, "{body}");
        let f = r.json()["field"].as_str().unwrap().to_string();
        assert!(f.starts_with(field), "{body}: field {f}, wanted {field}");
    }
    let mut short = z.clone();
    short.expr.pop();
    let r = post(&router, "/render", json!({ "code": short, "pose": {} })).await;
    assert_eq!(r.json()["field"], "code.expr");
    let raw = Request::post("/render").body(Body::from("{not json")).unwrap();
    assert_eq!(send(&router, raw).await.json()["field"], "body");
}

#[tokio::test]
async fn full_queue_is_409() {
    let m = model();
    let router = app(Some(m.clone()), ServiceConfig { queue_limit: 0, ..Default::default() });
    let r = post(&router, "/render", json!({ "code": code(&m, 0.0), "pose": {} })).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.json()["error"], "busy");
}

fn grey_png(res: usize, v: f32) -> Vec<u8> {
    encode_png_rgb(&Tensor::full(vec![res, res, 3], v))
}

#[tokio::test]
async fn encode_accepts_multipart_and_raw_png() {
    let m = model();
    let router = app(Some(m.clone()), ServiceConfig::default());
    let png = grey_png(m.config.final_res(), 0.25);
    let mut body = b"--XyZ\r\nContent-Disposition: form-data; name=\"image\"; filename=\"a.png\"\r\n\
Content-Type: image/png\r\n\r\n"
        .to_vec();
    body.extend_from_slice(&png);
    body.extend_from_slice(b"\r\n--XyZ--\r\n");
    let req = Request::post("/encode")
        .header(header::CONTENT_TYPE, "multipart/form-data; boundary=XyZ")
        .body(Body::from(body))
        .unwrap();
    let a = send(&router, req).await;
    assert_eq!(a.status, StatusCode::OK);
    let za: SemanticCode = serde_json::from_slice(&a.body).unwrap();
    assert_eq!(za.dims(), m.config.codes);
    let raw = Request::post("/encode").header(header::CONTENT_TYPE, "image/png").body(Body::from(png)).unwrap();
    let zb: SemanticCode = serde_json::from_slice(&send(&router, raw).await.body).unwrap();
    assert_eq!(za, zb);
}

#[tokio::test]
async fn encode_rejects_wrong_size() {
    let m = model();
    let router = app(Some(m.clone()), ServiceConfig::default());
    let png = grey_png(m.config.final_res() / 2, 0.0);
    let r = send(&router, Request::post("/encode").body(Body::from(png)).unwrap()).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["field"], "image");
    let r = send(&router, Request::post("/encode").body(Body::from("not a png")).unwrap()).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn mix_selects_groups() {
    let m = model();
    let router = app(Some(m.clone()), ServiceConfig::default());
    let (s, t) = (code(&m, 0.0), code(&m, 2.0));
    let none: SemanticCode = serde_json::from_slice(&post(&router, "/mix", json!({ "source": s, "target": t, "groups": [] })).await.body).unwrap();
    assert_eq!(none, s);
    let all = json!({ "source": s, "target": t, "groups": ["id", "expr", "tex", "light"] });
    let all: SemanticCode = serde_json::from_slice(&post(&router, "/mix", all).await.body).unwrap();
    assert_eq!(all, t);
    let tex: SemanticCode =
        serde_json::from_slice(&post(&router, "/mix", json!({ "source": s, "target": t, "groups": ["tex"] })).await.body)
            .unwrap();
    assert_eq!(tex.tex, t.tex);
    assert_eq!(tex.id, s.id);
    let bad = post(&router, "/mix", json!({ "source": s, "target": t, "groups": ["hair"] })).await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
    assert_eq!(bad.json()["field"], "groups");
}

fn fit_payload(m: &Model, mask_value: f32) -> Value {
    let res = m.config.final_res();
    let rendered = m.render(&code(m, 0.5), &stylemorpheus::CameraPose::canonical(m.config.camera_radius)).unwrap();
    json!({
        "image": encode_base64(&encode_png_rgb(&rendered.rgb)),
        "mask": encode_base64(&encode_png_mask(&Tensor::full(vec![res, res, 1], mask_value))),
        "pose": {},
        "steps": 3,
    })
}

#[tokio::test]
async fn fit_job_runs_to_done_and_feeds_render() {
    let m = model();
    let router = app(Some(m.clone()), ServiceConfig::default());
    let r = post(&router, "/jobs/fit", fit_payload(&m, 1.0)).await;
    assert_eq!(r.status, StatusCode::ACCEPTED);
    let job = r.json();
    assert_eq!(job["state"], "queued");
    assert_eq!(job["kind"], "fit");
    assert_eq!(job["progress"]["total"], 3);
    let id = job["id"].as_u64().unwrap();
    let polls = wait_job(&router, id).await;
    assert_monotone(&polls);
    let done = polls.last().unwrap();
    assert_eq!(done["state"], "done", "{done}");
    assert_eq!(done["progress"]["step"], 3);
    assert_eq!(done["result"]["image"], format!("/jobs/{id}/image"));
    assert_eq!(done["result"]["trace"].as_array().unwrap().len(), 4);

    let img = get(&router, &format!("/jobs/{id}/image")).await;
    assert_eq!(img.status, StatusCode::OK);
    assert_eq!(img.headers[header::CONTENT_TYPE], "image/png");
    let r = post(&router, "/render", json!({ "fit": id, "pose": { "yaw": 0.3 } })).await;
    assert_eq!(r.status, StatusCode::OK);
}

#[tokio::test]
async fn fit_accepts_face_angles() {
    let m = model();
    let router = app(Some(m.clone()), ServiceConfig::default());
    let mut body = fit_payload(&m, 1.0);
    body.as_object_mut().unwrap().remove("pose");
    body["face_angles"] = json!({ "yaw": 0.2 });
    let r = post(&router, "/jobs/fit", body).await;
    assert_eq!(r.status, StatusCode::ACCEPTED);
    let polls = wait_job(&router, r.json()["id"].as_u64().unwrap()).await;
    assert_eq!(polls.last().unwrap()["state"], "done");
}

#[tokio::test]
async fn empty_mask_fails_the_job_with_a_message() {
    let m = model();
    let router = app(Some(m.clone()), ServiceConfig::default());
    let r = post(&router, "/jobs/fit", fit_payload(&m, 0.0)).await;
    assert_eq!(r.status, StatusCode::ACCEPTED);
    let id = r.json()["id"].as_u64().unwrap();
    let polls = wait_job(&router, id).await;
    assert_monotone(&polls);
    let last = polls.last().unwrap();
    assert_eq!(last["state"], "failed");
    assert!(last["error"].as_str().unwrap().contains("mask"), "{last}");
    assert_eq!(get(&router, &format!("/jobs/{id}/image")).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_job_payloads_are_400() {
    let m = model();
    let router = app(Some(m.clone()), ServiceConfig::default());
    let mut body = fit_payload(&m, 1.0);
    body["mask"] = json!("@@@");
    let r = post(&router, "/jobs/fit", body).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["field"], "mask");
    let r = post(&router, "/jobs/color-edit", json!({ "code": code(&m, 0.0), "pose": {}, "color": [2, 0, 0] })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn color_edit_job_completes() {
    let m = model();
    let router = app(Some(m.clone()), ServiceConfig::default());
    let res = m.config.final_res();
    let mut part = Tensor::zeros(vec![res, res, 1]);
    for y in 0..res / 3 {
        for x in res / 4..3 * res / 4 {
            part.data_mut()[y * res + x] = 1.0;
        }
    }
    let body = json!({
        "code": code(&m, 0.0),
        "pose": {},
        "mask": encode_base64(&encode_png_mask(&part)),
        "color": [0.9, 0.1, 0.1],
        "steps": 2,
    });
    let r = post(&router, "/jobs/color-edit", body).await;
    assert_eq!(r.status, StatusCode::ACCEPTED);
    assert_eq!(r.json()["kind"], "color_edit");
    let id = r.json()["id"].as_u64().unwrap();
    let polls = wait_job(&router, id).await;
    assert_monotone(&polls);
    let done = polls.last().unwrap();
    assert_eq!(done["state"], "done", "{done}");
    let dist = done["result"]["color_distance"].as_array().unwrap();
    assert_eq!(dist.len(), 3);
    assert!(dist.iter().all(|d| d.as_f64().unwrap().is_finite()));
}

#[tokio::test]
async fn unknown_job_is_404() {
    let router = app(Some(model()), ServiceConfig::default());
    assert_eq!(get(&router, "/jobs/12345").await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&router, "/jobs/abc").await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&router, "/jobs/12345/image").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn requests_never_change_parameters() {
    let m = model();
    let before = m.checksum();
    let router = app(Some(m.clone()), ServiceConfig::default());
    post(&router, "/render", json!({ "code": code(&m, 0.0), "pose": {} })).await;
    let r = post(&router, "/jobs/fit", fit_payload(&m, 1.0)).await;
    wait_job(&router, r.json()["id"].as_u64().unwrap()).await;
    let png = grey_png(m.config.final_res(), 0.1);
    send(&router, Request::post("/encode").body(Body::from(png)).unwrap()).await;
    assert_eq!(m.checksum(), before);
}

#[tokio::test]
async fn cors_preflight_allows_local_ui() {
    let router = app(Some(model()), ServiceConfig::default());
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/render")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
        .body(Body::empty())
        .unwrap();
    let r = send(&router, req).await;
    assert!(r.status.is_success());
    assert_eq!(r.headers[header::ACCESS_CONTROL_ALLOW_ORIGIN], "*");

    let restricted = app(None, ServiceConfig { cors_origins: vec!["http://localhost:5173".into()], ..Default::default() });
    let req = Request::get("/health").header(header::ORIGIN, "http://localhost:5173").body(Body::empty()).unwrap();
    let r = send(&restricted, req).await;
    assert_eq!(r.headers[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://localhost:5173");
    let exposed = r.headers[header::ACCESS_CONTROL_EXPOSE_HEADERS].to_str().unwrap().to_string();
    assert!(exposed.contains(LATENCY_HEADER));
}

#[tokio::test]
async fn stream_renders_each_line() {
    let m = model();
    let router = app(Some(m.clone()), ServiceConfig::default());
    let lines = [
        json!({ "code": code(&m, 0.0), "pose": { "yaw": -0.2 } }).to_string(),
        json!({ "pose": { "yaw": 0.2 } }).to_string(),
        json!({ "pose": { "yaw": "x" } }).to_string(),
    ];
    let req = Request::post("/stream").body(Body::from(lines.join("\n"))).unwrap();
    let r = send(&router, req).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.headers[header::CONTENT_TYPE], "application/x-ndjson");
    let frames: Vec<Value> =
        String::from_utf8(r.body).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(frames.len(), 3);
    for (i, f) in frames.iter().enumerate() {
        assert_eq!(f["index"], i);
    }
    assert!(frames[0]["png"].is_string() && frames[1]["png"].is_string());
    assert_ne!(frames[0]["png"], frames[1]["png"]);
    assert_eq!(frames[2]["field"], "pose.yaw");

    let direct = post(&router, "/render", json!({ "code": code(&m, 0.0), "pose": { "yaw": 0.2 } })).await;
    assert_eq!(frames[1]["png"], encode_base64(&direct.body));
}
