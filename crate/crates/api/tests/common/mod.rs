#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::time::Duration;

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use taforge_api::client::request_for;
use taforge_api::{router, App, ServiceConfig, SharedApp};
use taforge_core::llm::MockScript;
use taforge_core::pipeline::Mutation;
use tower::ServiceExt;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_script() -> MockScript {
    MockScript::load(&fixtures().join("mock_script.json")).unwrap()
}

pub fn fixture_dump() -> String {
    std::fs::read_to_string(fixtures().join("corpus.ndjson")).unwrap()
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or(Value::Null)
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.bytes).into_owned()
    }
}

pub struct Harness {
    pub app: SharedApp,
    router: Router,
    pub token: Option<String>,
}

impl Harness {
    pub fn open(config: ServiceConfig) -> Harness {
        let token = config.token.clone();
        let app = App::open(config).unwrap();
        Harness { router: router(app.clone()), app, token }
    }

    pub fn with_script(data: &Path, script: MockScript) -> Harness {
        let mut cfg = ServiceConfig::new(data);
        cfg.mock_script = Some(script);
        Harness::open(cfg)
    }

    pub async fn request(&self, method: Method, path: &str, body: Option<Value>, token: Option<&str>) -> Reply {
        let mut req = Request::builder().method(method).uri(path);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply { status, headers, bytes }
    }

    pub async fn call(&self, method: Method, path: &str, body: Option<Value>) -> Reply {
        let token = self.token.clone();
        self.request(method, path, body, token.as_deref()).await
    }

    pub async fn get(&self, path: &str) -> Reply {
        self.call(Method::GET, path, None).await
    }

    pub async fn post(&self, path: &str, body: Value) -> Reply {
        self.call(Method::POST, path, Some(body)).await
    }

    pub async fn patch(&self, path: &str, body: Value) -> Reply {
        self.call(Method::PATCH, path, Some(body)).await
    }

    pub async fn create_inline(&self, id: &str, dump: &str) -> Reply {
        self.post(
            "/v1/workspaces",
            json!({ "workspace_id": id, "source": { "kind": "inline_ndjson", "text": dump, "subreddit": "HealthAccess" } }),
        )
        .await
    }

    /// Polls a job until it finishes.
    pub async fn wait(&self, job_id: &str) -> Value {
        for _ in 0..20_000 {
            let job = self.get(&format!("/v1/jobs/{job_id}")).await.json();
            if matches!(job["status"].as_str(), Some("succeeded" | "failed")) {
                return job;
            }
            tokio::time::sleep(Duration::from_millis(2)).await;
        }
        panic!("job {job_id} never finished");
    }

    /// Sends a mutation through the matching endpoint. `Ok` carries the
    /// response body (or the finished job), `Err` the error envelope.
    pub async fn drive(&self, ws: &str, m: &Mutation) -> Result<Value, Value> {
        let spec = request_for(ws, m);
        let method = Method::from_bytes(spec.method.as_bytes()).unwrap();
        let reply = self.call(method, &spec.path, Some(spec.body)).await;
        let v = reply.json();
        if !reply.status.is_success() {
            return Err(v);
        }
        if !spec.job {
            return Ok(v);
        }
        let done = self.wait(v["job_id"].as_str().unwrap()).await;
        if done["status"] == "succeeded" {
            Ok(done)
        } else {
            Err(done["error"].clone())
        }
    }
}
