//! A `taforge serve` child process and a small blocking HTTP client.

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread::sleep;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use taforge_api::client::request_for;
use taforge_core::pipeline::Mutation;
use ureq::Agent;

use crate::fixtures;

pub struct Server {
    child: Child,
    base: String,
    agent: Agent,
    pub data_dir: PathBuf,
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").and_then(|l| l.local_addr()).map(|a| a.port()).expect("free port")
}

pub struct Reply {
    pub status: u16,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or(Value::Null)
    }
}

impl Server {
    pub fn start(data_dir: &Path) -> Result<Server, String> {
        let port = free_port();
        let child = Command::new(env!("CARGO_BIN_EXE_taforge"))
            .args(["serve", "--data-dir"])
            .arg(data_dir)
            .args(["--port", &port.to_string()])
            .env("TAFORGE_CLOCK", "logical")
            .env("TAFORGE_MOCK_SCRIPT", fixtures().join("mock_script.json"))
            .env_remove("TAFORGE_PROVIDER")
            .env_remove("TAFORGE_API_TOKEN")
            .env_remove("TAFORGE_BIND")
            .env_remove("TAFORGE_UI_DIR")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| format!("spawning the server: {e}"))?;
        let agent: Agent = Agent::config_builder().http_status_as_error(false).build().into();
        let mut server = Server {
            child,
            base: format!("http://127.0.0.1:{port}"),
            agent,
            data_dir: data_dir.to_path_buf(),
        };
        let deadline = Instant::now() + Duration::from_secs(10);
        while Instant::now() < deadline {
            if server.try_get("/v1/health").is_ok_and(|r| r.status == 200) {
                return Ok(server);
            }
            if let Ok(Some(status)) = server.child.try_wait() {
                return Err(format!("server exited early: {status}"));
            }
            sleep(Duration::from_millis(10));
        }
        server.kill();
        Err("server never became healthy".into())
    }

    /// SIGKILL, no chance to flush anything.
    pub fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn try_get(&self, path: &str) -> Result<Reply, ureq::Error> {
        let mut r = self.agent.get(format!("{}{path}", self.base)).call()?;
        Ok(Reply { status: r.status().as_u16(), bytes: r.body_mut().read_to_vec()? })
    }

    pub fn get(&self, path: &str) -> Result<Reply, String> {
        self.try_get(path).map_err(|e| format!("GET {path}: {e}"))
    }

    pub fn send(&self, method: &str, path: &str, body: &Value) -> Result<Reply, String> {
        let url = format!("{}{path}", self.base);
        let res = match method {
            "POST" => self.agent.post(&url).send_json(body),
            "PATCH" => self.agent.patch(&url).send_json(body),
            "PUT" => self.agent.put(&url).send_json(body),
            other => return Err(format!("unsupported method {other}")),
        };
        let mut r = res.map_err(|e| format!("{method} {path}: {e}"))?;
        let bytes = r.body_mut().read_to_vec().map_err(|e| e.to_string())?;
        Ok(Reply { status: r.status().as_u16(), bytes })
    }

    pub fn create(&self, body: &Value) -> Result<Value, String> {
        let r = self.send("POST", "/v1/workspaces", body)?;
        if r.status != 201 {
            return Err(format!("create answered {}: {}", r.status, String::from_utf8_lossy(&r.bytes)));
        }
        Ok(r.json())
    }

    pub fn create_fixture(&self, id: &str) -> Result<Value, String> {
        self.create(&json!({
            "workspace_id": id,
            "source": { "kind": "inline_ndjson", "text": crate::fixture_dump(), "subreddit": "HealthAccess" },
        }))
    }

    fn wait(&self, job_id: &str) -> Result<Value, String> {
        let deadline = Instant::now() + Duration::from_secs(30);
        while Instant::now() < deadline {
            let job = self.get(&format!("/v1/jobs/{job_id}"))?.json();
            if matches!(job["status"].as_str(), Some("succeeded" | "failed")) {
                return Ok(job);
            }
            sleep(Duration::from_millis(2));
        }
        Err(format!("job {job_id} never finished"))
    }

    /// Sends `m` through its endpoint and waits for any job it starts.
    pub fn drive(&self, ws: &str, m: &Mutation) -> Result<Value, String> {
        let spec = request_for(ws, m);
        let r = self.send(spec.method, &spec.path, &spec.body)?;
        let v = r.json();
        if !(200..300).contains(&r.status) {
            return Err(format!("{} answered {}: {v}", m.operation(), r.status));
        }
        if !spec.job {
            return Ok(v);
        }
        let done = self.wait(v["job_id"].as_str().ok_or("no job id")?)?;
        if done["status"] == "succeeded" {
            Ok(done)
        } else {
            Err(format!("{} failed: {}", m.operation(), done["error"]))
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.kill();
    }
}
