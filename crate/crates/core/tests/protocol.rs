mod common;

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;

use nbv_core::env::{EnvConfig, Environment};
use nbv_core::protocol::{codes, decode_bytes, decode_f64s, Client, Server};
use nbv_core::scene::{shapes, Scene};
use nbv_core::voxel_grid::VoxelGrid;
use nbv_core::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn cfg() -> EnvConfig {
    EnvConfig {
        width: 64,
        height: 64,
        max_steps: 12,
        stop_at_target: false,
        ..EnvConfig::default()
    }
}

fn scenes(cfg: &EnvConfig) -> Vec<Arc<Scene>> {
    vec![
        common::scene("cube", &shapes::unit_cube(), [0.0, 0.0], cfg, 2000),
        common::scene("l_shape", &shapes::l_shape(), [4.0, -4.0], cfg, 2000),
    ]
}

fn spawn(cfg: EnvConfig) -> String {
    let server = Arc::new(Server::new(scenes(&cfg), cfg).unwrap());
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    std::thread::spawn(move || server.serve_tcp(listener));
    addr
}

fn actions(seed: u64, n: usize) -> Vec<([f64; 3], [f64; 3])> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..0.2)];
            let l = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(3.0..6.0)];
            (a, l)
        })
        .collect()
}

#[test]
fn hello_lists_scenes_and_config() {
    let mut c = Client::connect(spawn(cfg())).unwrap();
    let h = c.hello().unwrap();
    let p = &h["payload"];
    assert_eq!((p["g"].as_u64(), p["h"].as_u64(), p["w"].as_u64()), (Some(20), Some(64), Some(64)));
    assert_eq!(p["max_steps"], 12);
    assert_eq!(p["scenes"], json!(["cube@0,0", "l_shape@4,-4"]));
}

#[test]
fn wire_stream_equals_in_process_run() {
    let cfg = cfg();
    let mut c = Client::connect(spawn(cfg.clone())).unwrap();
    let scene = scenes(&cfg)[1].clone();
    let mut env = Environment::new(scene, cfg).unwrap();
    let obs = env.reset(5).unwrap();
    let r = c.reset("e", Some("l_shape@4,-4"), 5).unwrap();
    let p = &r["payload"];
    assert_eq!(decode_bytes(p["gray"].as_str().unwrap()).unwrap(), obs.gray.to_bytes());
    assert_eq!(decode_f64s(p["vector_b64"].as_str().unwrap()).unwrap(), obs.vector.to_vec());
    let grid = VoxelGrid::from_bytes(&decode_bytes(p["grid"].as_str().unwrap()).unwrap()).unwrap();
    assert_eq!(&grid, env.grid().unwrap());

    for (a, l) in actions(1, 12) {
        let want = env.step(a, Point::new(l[0], l[1], l[2])).unwrap();
        let got = c.step("e", a, l).unwrap();
        let p = &got["payload"];
        assert_eq!(p["reward"].as_f64().unwrap().to_bits(), want.reward.to_bits());
        assert_eq!(p["face_coverage"].as_f64().unwrap().to_bits(), want.face_coverage.to_bits());
        let b = decode_f64s(p["rewards_b64"].as_str().unwrap()).unwrap();
        assert_eq!(b[0].to_bits(), want.reward.to_bits());
        assert_eq!(p["m_col"], want.m_col);
        assert_eq!(p["terminated"], want.terminated);
        let ap = decode_f64s(p["labels"]["a_prime_b64"].as_str().unwrap()).unwrap();
        assert_eq!(ap, vec![want.info.a_prime.x, want.info.a_prime.y, want.info.a_prime.z]);
        let vec = decode_f64s(p["vector_b64"].as_str().unwrap()).unwrap();
        assert_eq!(vec, want.obs.vector.to_vec());
        let json_vec: Vec<f64> = p["vector"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert_eq!(json_vec, want.obs.vector.to_vec());
    }
    let done = c.step("e", [0.0; 3], [0.0, 0.0, 5.0]).unwrap();
    assert_eq!(done["error"]["code"], codes::EPISODE_DONE);
}

#[test]
fn concurrent_envs_match_isolated_servers() {
    let cfg = cfg();
    let shared = spawn(cfg.clone());
    let streams: Vec<Vec<String>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4u64)
            .map(|i| {
                let addr = shared.clone();
                s.spawn(move || {
                    let mut c = Client::connect(addr).unwrap();
                    let id = format!("env{i}");
                    let scene = if i % 2 == 0 { "cube@0,0" } else { "l_shape@4,-4" };
                    let mut out = vec![c.reset(&id, Some(scene), i).unwrap().to_string()];
                    for (a, l) in actions(i, 8) {
                        out.push(c.step(&id, a, l).unwrap()["payload"]["reward"].to_string());
                    }
                    out
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (i, stream) in streams.iter().enumerate() {
        let mut c = Client::connect(spawn(cfg.clone())).unwrap();
        let id = format!("env{i}");
        let scene = if i % 2 == 0 { "cube@0,0" } else { "l_shape@4,-4" };
        assert_eq!(c.reset(&id, Some(scene), i as u64).unwrap().to_string(), stream[0]);
        for (k, (a, l)) in actions(i as u64, 8).into_iter().enumerate() {
            assert_eq!(c.step(&id, a, l).unwrap()["payload"]["reward"].to_string(), stream[k + 1]);
        }
    }
}

#[test]
fn pipelined_requests_are_answered_in_order() {
    let addr = spawn(cfg());
    let s = TcpStream::connect(addr).unwrap();
    let mut w = s.try_clone().unwrap();
    let mut r = BufReader::new(s);
    let mut batch = String::new();
    batch.push_str(&json!({"type": "reset", "env_id": "p", "payload": {"scene": "cube@0,0", "seed": 3}}).to_string());
    batch.push('\n');
    batch.push_str("this is not json\n");
    for (a, l) in actions(3, 5) {
        batch.push_str(&json!({"type": "step", "env_id": "p", "payload": {"action": a, "lookat": l}}).to_string());
        batch.push('\n');
    }
    w.write_all(batch.as_bytes()).unwrap();
    let mut lines = Vec::new();
    for _ in 0..7 {
        let mut line = String::new();
        r.read_line(&mut line).unwrap();
        lines.push(serde_json::from_str::<Value>(&line).unwrap());
    }
    assert_eq!(lines[0]["type"], "reset");
    assert_eq!(lines[1]["error"]["code"], codes::BAD_JSON);
    let steps: Vec<u64> = lines[2..].iter().map(|l| l["payload"]["step"].as_u64().unwrap()).collect();
    assert_eq!(steps, vec![1, 2, 3, 4, 5]);
}

#[test]
fn request_errors_have_codes() {
    let mut c = Client::connect(spawn(cfg())).unwrap();
    assert_eq!(c.reset("x", Some("nope"), 0).unwrap()["error"]["code"], codes::UNKNOWN_SCENE);
    assert_eq!(c.reset("x", None, 0).unwrap()["error"]["code"], codes::BAD_REQUEST);
    let r = c.request("step", Some("x"), json!({"action": [0, 0]})).unwrap();
    assert_eq!(r["error"]["code"], codes::BAD_REQUEST);
    assert_eq!(c.request("reset", None, json!({})).unwrap()["error"]["code"], codes::BAD_REQUEST);
    c.reset("x", Some("cube@0,0"), 0).unwrap();
    let r = c.step("x", [f64::MAX, 0.0, 0.0], [0.0, 0.0, 5.0]).unwrap();
    assert!(r["payload"]["reward"].is_number());
    assert_eq!(c.close("x").unwrap()["payload"]["closed"], true);
    assert_eq!(c.close("x").unwrap()["payload"]["closed"], false);
}

#[test]
fn stdio_transport_answers_line_by_line() {
    let cfg = cfg();
    let server = Server::new(scenes(&cfg), cfg).unwrap();
    let input = b"{\"type\":\"hello\"}\n\n{\"type\":\"close\",\"env_id\":\"a\"}\n";
    let mut out = Vec::new();
    server.serve_stream(&input[..], &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].contains("\"version\":1"));
}
