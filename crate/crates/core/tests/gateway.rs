mod common;

use serde_json::{json, Value};
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;
use vahr_core::metrics::LogRecord;
use vahr_core::scenario::*;

fn live_scenario() -> Scenario {
    load_scenario(&common::scenario_path("live_task1.json")).unwrap()
}

struct Client {
    writer: TcpStream,
    reader: BufReader<TcpStream>,
}

impl Client {
    fn connect(addr: std::net::SocketAddr) -> Client {
        let stream = TcpStream::connect(addr).unwrap();
        stream.set_read_timeout(Some(Duration::from_secs(20))).unwrap();
        Client {
            reader: BufReader::new(stream.try_clone().unwrap()),
            writer: stream,
        }
    }

    fn send(&mut self, frame: Value) {
        self.send_raw(&frame.to_string());
    }

    fn send_raw(&mut self, line: &str) {
        writeln!(self.writer, "{line}").unwrap();
    }

    fn next(&mut self) -> Value {
        let mut line = String::new();
        assert!(self.reader.read_line(&mut line).unwrap() > 0, "server closed");
        serde_json::from_str(&line).unwrap()
    }

    /// Reads frames until one with tag `t` satisfies `pred`.
    fn wait_for(&mut self, t: &str, pred: impl Fn(&Value) -> bool) -> (Value, Vec<Value>) {
        let mut seen = Vec::new();
        loop {
            let frame = self.next();
            if frame["t"] == t && pred(&frame) {
                return (frame, seen);
            }
            seen.push(frame);
        }
    }
}

fn spawn_server(
    scenario: Scenario,
    time_scale: f64,
) -> (std::net::SocketAddr, thread::JoinHandle<Result<RunOutput, ScenarioError>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let config = GatewayConfig {
        seed: 7,
        time_scale,
        ..GatewayConfig::default()
    };
    (addr, thread::spawn(move || serve_listener(&scenario, &listener, config)))
}

fn zone_phrase(zone: &str) -> String {
    format!("zone {}", zone.to_lowercase())
}

#[test]
fn scripted_client_session_matches_headless_replay() {
    let scenario = live_scenario();
    let (addr, server) = spawn_server(scenario.clone(), 40.0);
    let mut client = Client::connect(addr);

    let (brief, _) = client.wait_for("brief", |_| true);
    let zones = brief["zone_assignments"].as_object().unwrap().clone();
    client.wait_for("state", |_| true);

    client.send(json!({"t": "start"}));
    client.send_raw("{not json");
    let (error, _) = client.wait_for("error", |_| true);
    assert_eq!(error["code"], "MalformedFrame");

    for (robot, word) in [("1", "one"), ("2", "two")] {
        client.send(json!({"t": "intent", "text": format!("send placebot {word} to the loading zone")}));
        let zone = zone_phrase(zones[robot].as_str().unwrap());
        client.send(json!({"t": "intent", "text": format!("send placebot {word} to {zone}")}));
    }
    for piece in 0..5 {
        client.send(json!({"t": "puzzle", "piece_id": piece}));
    }

    let (_, frames) = client.wait_for("metrics", |m| m["task_outcomes"]["I"] == true);
    let moved = frames
        .iter()
        .filter(|f| f["t"] == "state")
        .any(|f| f["robots"].as_array().unwrap().iter().any(|r| r["phase"].as_str().unwrap().starts_with("Navigating")));
    assert!(moved, "state frames never showed a moving robot");
    assert!(frames.iter().any(|f| f["t"] == "speech"));

    let out = server.join().unwrap().unwrap();
    assert!(out.report.complete);
    assert_eq!(out.report.metrics.solved_puzzle_parts, 5);
    let inputs = out.log.iter().filter(|r| matches!(r, LogRecord::Input { .. })).count();
    assert_eq!(inputs, 1 + 4 + 5);

    let replayed = replay_log(&scenario, &out.log).unwrap();
    assert_eq!(replayed.report.metrics, out.report.metrics);
    assert_eq!(replayed.log, out.log);
}

#[test]
fn client_disconnect_abandons_the_session() {
    let scenario = live_scenario();
    let (addr, server) = spawn_server(scenario.clone(), 20.0);
    let mut client = Client::connect(addr);
    client.wait_for("brief", |_| true);
    client.send(json!({"t": "start"}));
    client.send(json!({"t": "intent", "text": "send placebot one to the loading zone"}));
    client.wait_for("speech", |_| true);
    drop(client);

    match server.join().unwrap() {
        Err(ScenarioError::SessionAbandoned(out)) => {
            assert!(!out.report.complete);
            assert!(out.log.iter().any(|r| matches!(r, LogRecord::Input { frame, .. } if frame["t"] == "disconnect")));
            let replayed = replay_log(&scenario, &out.log);
            match replayed {
                Err(ScenarioError::SessionAbandoned(again)) => assert_eq!(again.log, out.log),
                other => panic!("{other:?}"),
            }
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn client_cannot_forge_a_disconnect() {
    let (addr, server) = spawn_server(live_scenario(), 20.0);
    let mut client = Client::connect(addr);
    client.wait_for("brief", |_| true);
    client.send(json!({"t": "disconnect"}));
    let (error, _) = client.wait_for("error", |_| true);
    assert_eq!(error["code"], "MalformedFrame");
    client.send(json!({"t": "abort"}));
    let out = server.join().unwrap().unwrap();
    assert!(!out.report.complete);
    assert_eq!(out.report.end_reason, "aborted");
}

#[test]
fn bind_failure_is_reported() {
    let held = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = held.local_addr().unwrap().to_string();
    assert!(matches!(
        serve(&live_scenario(), &addr, GatewayConfig::default()),
        Err(ScenarioError::Bind(_))
    ));
}
