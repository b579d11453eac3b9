//! Newline-delimited JSON environment server.
//!
//! Each request is one JSON object on one line:
//! `{"type": "hello" | "reset" | "step" | "close", "env_id": "...", "payload": {...}}`.
//! Each response echoes `type` and `env_id` and carries either `payload` or
//! `error: {code, message}`. Unknown fields are ignored. Float arrays are sent
//! both as JSON numbers and as base64 of little-endian `f64` bytes; images
//! and grids are base64 of their raw byte layouts. See `docs/protocol.md`.

mod client;

use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::env::{EnvConfig, EnvError, Environment, Observation, StepResult};
use crate::scene::Scene;
use crate::Point;

pub use client::Client;

pub const VERSION: u32 = 1;
pub const BIND_ENV: &str = "NBV_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:7878";

/// Stable error codes carried in `error.code`.
pub mod codes {
    pub const BAD_JSON: &str = "BAD_JSON";
    pub const BAD_REQUEST: &str = "BAD_REQUEST";
    pub const UNKNOWN_TYPE: &str = "UNKNOWN_TYPE";
    pub const UNKNOWN_ENV: &str = "UNKNOWN_ENV";
    pub const UNKNOWN_SCENE: &str = "UNKNOWN_SCENE";
    pub const EPISODE_DONE: &str = "EPISODE_DONE";
    pub const VERSION_MISMATCH: &str = "VERSION_MISMATCH";
    pub const ENV_ERROR: &str = "ENV_ERROR";
}

/// `--bind` if given, else `$NBV_BIND`, else the default.
pub fn bind_address(flag: Option<&str>) -> String {
    flag.map(str::to_string)
        .or_else(|| std::env::var(BIND_ENV).ok())
        .unwrap_or_else(|| DEFAULT_BIND.to_string())
}

pub fn encode_f64s(v: &[f64]) -> String {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_f64s(s: &str) -> Option<Vec<f64>> {
    let bytes = STANDARD.decode(s).ok()?;
    if bytes.len() % 8 != 0 {
        return None;
    }
    Some(
        bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    )
}

pub fn encode_bytes(b: &[u8]) -> String {
    STANDARD.encode(b)
}

pub fn decode_bytes(s: &str) -> Option<Vec<u8>> {
    STANDARD.decode(s).ok()
}

fn point(p: &Point) -> [f64; 3] {
    [p.x, p.y, p.z]
}

fn observation_payload(obs: &Observation, env: &Environment) -> Value {
    let gt = env.gt_lookat().ok().map(|p| point(&p));
    json!({
        "step": env.step_index().unwrap_or(0),
        "gray": encode_bytes(&obs.gray.to_bytes()),
        "gray_width": obs.gray.width(),
        "gray_height": obs.gray.height(),
        "vector": obs.vector,
        "vector_b64": encode_f64s(&obs.vector),
        "grid": encode_bytes(&obs.grid.to_bytes()),
        "pose": {"position": point(&obs.pose.position), "yaw": obs.pose.yaw, "pitch": obs.pose.pitch},
        "lookat": point(&obs.lookat),
        "face_coverage": env.face_coverage().unwrap_or(0.0),
        "labels": {"gt_lookat": gt},
    })
}

fn step_payload(r: &StepResult, env: &Environment) -> Value {
    let mut v = observation_payload(&r.obs, env);
    let extra = json!({
        "reward": r.reward,
        "coverage_reward": r.coverage_reward,
        "constraint_penalty": r.constraint_penalty,
        "rewards_b64": encode_f64s(&[r.reward, r.coverage_reward, r.constraint_penalty, r.face_coverage]),
        "m_col": r.m_col,
        "newly_seen_faces": r.newly_seen_faces,
        "face_coverage": r.face_coverage,
        "terminated": r.terminated,
        "termination_reason": r.termination_reason,
    });
    let obj = v.as_object_mut().expect("object");
    for (k, x) in extra.as_object().expect("object") {
        obj.insert(k.clone(), x.clone());
    }
    obj["labels"]["a_prime"] = json!(point(&r.info.a_prime));
    obj["labels"]["a_prime_b64"] = json!(encode_f64s(&point(&r.info.a_prime)));
    v
}

#[derive(Debug, Deserialize)]
struct Request {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    env_id: Option<String>,
    #[serde(default)]
    payload: Value,
}

#[derive(Debug, Deserialize)]
struct ResetPayload {
    #[serde(default)]
    scene: Option<String>,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
struct StepPayload {
    action: [f64; 3],
    lookat: [f64; 3],
}

#[derive(Debug, Deserialize)]
struct HelloPayload {
    #[serde(default)]
    version: Option<u32>,
}

struct Failure(&'static str, String);

type Shared = Arc<Mutex<Environment>>;

/// Holds the scene set and one environment per `env_id`.
pub struct Server {
    scenes: BTreeMap<String, Arc<Scene>>,
    cfg: EnvConfig,
    envs: Mutex<HashMap<String, Shared>>,
}

impl Server {
    pub fn new(scenes: Vec<Arc<Scene>>, cfg: EnvConfig) -> Result<Server, EnvError> {
        cfg.validate()?;
        if scenes.is_empty() {
            return Err(EnvError::Config("server needs at least one scene".into()));
        }
        let scenes = scenes.into_iter().map(|s| (s.id.clone(), s)).collect();
        Ok(Server {
            scenes,
            cfg,
            envs: Mutex::new(HashMap::new()),
        })
    }

    pub fn scene_ids(&self) -> Vec<String> {
        self.scenes.keys().cloned().collect()
    }

    /// Answers one request line with one response line (no trailing newline).
    pub fn handle_line(&self, line: &str) -> String {
        let req: Request = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                let code = if serde_json::from_str::<Value>(line).is_ok() {
                    codes::BAD_REQUEST
                } else {
                    codes::BAD_JSON
                };
                return error_line("error", None, code, &e.to_string());
            }
        };
        let env_id = req.env_id.clone();
        match self.dispatch(&req) {
            Ok(payload) => json!({"type": req.kind, "env_id": env_id, "payload": payload}).to_string(),
            Err(Failure(code, msg)) => error_line(&req.kind, env_id.as_deref(), code, &msg),
        }
    }

    fn dispatch(&self, req: &Request) -> Result<Value, Failure> {
        match req.kind.as_str() {
            "hello" => {
                let p: HelloPayload = parse(&req.payload)?;
                if let Some(v) = p.version {
                    if v != VERSION {
                        return Err(Failure(
                            codes::VERSION_MISMATCH,
                            format!("server speaks version {VERSION}, client asked for {v}"),
                        ));
                    }
                }
                Ok(json!({
                    "version": VERSION,
                    "g": self.cfg.resolution,
                    "h": self.cfg.height,
                    "w": self.cfg.width,
                    "max_steps": self.cfg.max_steps,
                    "scene_size": self.cfg.scene_size,
                    "face_target": self.cfg.face_target,
                    "coverage_scale": self.cfg.coverage_scale,
                    "penalty": self.cfg.penalty,
                    "gamma": self.cfg.gamma_doc,
                    "vertical_fov": self.cfg.vertical_fov,
                    "scenes": self.scene_ids(),
                }))
            }
            "reset" => {
                let id = env_id(req)?;
                let p: ResetPayload = parse(&req.payload)?;
                let scene = match p.scene {
                    Some(s) => self
                        .scenes
                        .get(&s)
                        .cloned()
                        .ok_or_else(|| Failure(codes::UNKNOWN_SCENE, format!("no scene {s:?}")))?,
                    None if self.scenes.len() == 1 => self.scenes.values().next().unwrap().clone(),
                    None => {
                        return Err(Failure(codes::BAD_REQUEST, "payload.scene is required".into()));
                    }
                };
                let shared = {
                    let mut envs = self.envs.lock().unwrap();
                    let reuse = envs
                        .get(id)
                        .filter(|e| Arc::ptr_eq(e.lock().unwrap().scene(), &scene))
                        .cloned();
                    match reuse {
                        Some(e) => e,
                        None => {
                            let env = Environment::new(scene, self.cfg.clone())
                                .map_err(|e| Failure(codes::ENV_ERROR, e.to_string()))?;
                            let e = Arc::new(Mutex::new(env));
                            envs.insert(id.to_string(), e.clone());
                            e
                        }
                    }
                };
                let mut env = shared.lock().unwrap();
                let obs = env.reset(p.seed).map_err(env_failure)?;
                Ok(observation_payload(&obs, &env))
            }
            "step" => {
                let id = env_id(req)?;
                let p: StepPayload = parse(&req.payload)?;
                let shared = self.envs.lock().unwrap().get(id).cloned();
                let shared = shared.ok_or_else(|| Failure(codes::UNKNOWN_ENV, format!("no env {id:?}; reset first")))?;
                let mut env = shared.lock().unwrap();
                let lookat = Point::new(p.lookat[0], p.lookat[1], p.lookat[2]);
                let r = env.step(p.action, lookat).map_err(env_failure)?;
                Ok(step_payload(&r, &env))
            }
            "close" => {
                let id = env_id(req)?;
                let removed = self.envs.lock().unwrap().remove(id).is_some();
                Ok(json!({"closed": removed}))
            }
            other => Err(Failure(codes::UNKNOWN_TYPE, format!("unknown request type {other:?}"))),
        }
    }

    /// Serves requests from `input` until EOF, answering in order.
    pub fn serve_stream<R: BufRead, W: Write>(&self, input: R, mut output: W) -> io::Result<()> {
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let resp = self.handle_line(&line);
            output.write_all(resp.as_bytes())?;
            output.write_all(b"\n")?;
            output.flush()?;
        }
        Ok(())
    }

    /// Accepts connections forever, one thread per connection. Requests for
    /// the same `env_id` are serialized by that environment's lock.
    pub fn serve_tcp(self: Arc<Self>, listener: TcpListener) -> io::Result<()> {
        for stream in listener.incoming() {
            let stream = stream?;
            let server = self.clone();
            std::thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                let reader = match stream.try_clone() {
                    Ok(s) => BufReader::new(s),
                    Err(e) => {
                        log::warn!("connection {peer:?}: {e}");
                        return;
                    }
                };
                if let Err(e) = server.serve_stream(reader, BufWriter::new(stream)) {
                    log::debug!("connection {peer:?} closed: {e}");
                }
            });
        }
        Ok(())
    }

    pub fn serve_stdio(&self) -> io::Result<()> {
        let stdin = io::stdin();
        let stdout = io::stdout();
        self.serve_stream(stdin.lock(), stdout.lock())
    }
}

fn parse<T: for<'de> Deserialize<'de>>(v: &Value) -> Result<T, Failure> {
    let v = if v.is_null() { json!({}) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| Failure(codes::BAD_REQUEST, e.to_string()))
}

fn env_id(req: &Request) -> Result<&str, Failure> {
    req.env_id
        .as_deref()
        .ok_or_else(|| Failure(codes::BAD_REQUEST, "env_id is required".into()))
}

fn env_failure(e: EnvError) -> Failure {
    match e {
        EnvError::EpisodeDone => Failure(codes::EPISODE_DONE, e.to_string()),
        other => Failure(codes::ENV_ERROR, other.to_string()),
    }
}

fn error_line(kind: &str, env_id: Option<&str>, code: &str, msg: &str) -> String {
    json!({"type": kind, "env_id": env_id, "error": {"code": code, "message": msg}}).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{shapes, SceneConfig};

    fn server() -> Server {
        let cfg = EnvConfig {
            width: 48,
            height: 48,
            max_steps: 2,
            ..EnvConfig::default()
        };
        let frame = cfg.frame().unwrap();
        let scene = Scene::prepare("cube", &shapes::unit_cube(), &SceneConfig::default(), frame, 1000, 1).unwrap();
        Server::new(vec![Arc::new(scene)], cfg).unwrap()
    }

    fn call(s: &Server, req: Value) -> Value {
        serde_json::from_str(&s.handle_line(&req.to_string())).unwrap()
    }

    #[test]
    fn hello_echoes_config() {
        let r = call(&server(), json!({"type": "hello", "extra": 1}));
        assert_eq!(r["payload"]["version"], 1);
        assert_eq!(r["payload"]["g"], 20);
        assert_eq!(r["payload"]["h"], 48);
        assert_eq!(r["payload"]["max_steps"], 2);
    }

    #[test]
    fn malformed_json_keeps_going() {
        let s = server();
        let r: Value = serde_json::from_str(&s.handle_line("{not json")).unwrap();
        assert_eq!(r["error"]["code"], codes::BAD_JSON);
        let r = call(&s, json!({"type": "fly"}));
        assert_eq!(r["error"]["code"], codes::UNKNOWN_TYPE);
        let r = call(&s, json!({"type": "step", "env_id": "a", "payload": {"action": [0, 0, 0], "lookat": [0, 0, 5]}}));
        assert_eq!(r["error"]["code"], codes::UNKNOWN_ENV);
        let r = call(&s, json!({"type": "hello", "payload": {"version": 99}}));
        assert_eq!(r["error"]["code"], codes::VERSION_MISMATCH);
    }

    #[test]
    fn reset_is_byte_identical_and_done_is_reported() {
        let s = server();
        let req = json!({"type": "reset", "env_id": "a", "payload": {"seed": 7}}).to_string();
        assert_eq!(s.handle_line(&req), s.handle_line(&req));
        let step = json!({"type": "step", "env_id": "a", "payload": {"action": [0.5, 0.5, 0.0], "lookat": [0, 0, 5]}});
        call(&s, step.clone());
        let last = call(&s, step.clone());
        assert_eq!(last["payload"]["terminated"], true);
        let r = call(&s, step);
        assert_eq!(r["error"]["code"], codes::EPISODE_DONE);
        assert_eq!(call(&s, json!({"type": "close", "env_id": "a"}))["payload"]["closed"], true);
    }

    #[test]
    fn f64_base64_round_trip_is_exact() {
        let v = [0.1, -0.0, f64::MIN_POSITIVE, 1e300, std::f64::consts::PI];
        let back = decode_f64s(&encode_f64s(&v)).unwrap();
        assert!(v.iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn bind_address_precedence() {
        assert_eq!(bind_address(Some("0.0.0.0:1")), "0.0.0.0:1");
    }
}
