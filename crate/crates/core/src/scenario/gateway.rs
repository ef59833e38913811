//! Live session gateway: one client over TCP, newline-delimited JSON frames.
//!
//! A reader thread forwards client lines over a channel. The main loop paces
//! logical time against the wall clock, injects parsed frames and writes
//! outbound frames. Every accepted frame is recorded in the event log, so a
//! session can be re-simulated from its log.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::config::Scenario;
use super::runner::{finish_run, RunOutput};
use super::sim::{InputFrame, OutputFrame, Simulation};
use super::ScenarioError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatewayConfig {
    pub seed: u64,
    /// Logical milliseconds per wall-clock millisecond.
    pub time_scale: f64,
    /// How long to wait for client input between pacing steps.
    pub poll: Duration,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            seed: 0,
            time_scale: 1.0,
            poll: Duration::from_millis(10),
        }
    }
}

enum ClientEvent {
    Line(String),
    Closed,
}

fn spawn_reader(stream: TcpStream) -> Receiver<ClientEvent> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(stream).lines() {
            match line {
                Ok(l) if l.trim().is_empty() => continue,
                Ok(l) => {
                    if tx.send(ClientEvent::Line(l)).is_err() {
                        return;
                    }
                }
                Err(_) => break,
            }
        }
        let _ = tx.send(ClientEvent::Closed);
    });
    rx
}

fn send(stream: &mut TcpStream, frames: &[OutputFrame]) -> bool {
    for frame in frames {
        let mut line = serde_json::to_string(frame).expect("frames serialize");
        line.push('\n');
        if stream.write_all(line.as_bytes()).is_err() {
            return false;
        }
    }
    stream.flush().is_ok()
}

/// Binds `addr` and serves a single session.
pub fn serve(scenario: &Scenario, addr: &str, config: GatewayConfig) -> Result<RunOutput, ScenarioError> {
    let listener = TcpListener::bind(addr).map_err(|e| ScenarioError::Bind(format!("{addr}: {e}")))?;
    serve_listener(scenario, &listener, config)
}

/// Accepts one client on `listener` and runs the session until it ends.
pub fn serve_listener(
    scenario: &Scenario,
    listener: &TcpListener,
    config: GatewayConfig,
) -> Result<RunOutput, ScenarioError> {
    let (mut stream, _) = listener.accept().map_err(|e| ScenarioError::Bind(e.to_string()))?;
    let reader = stream
        .try_clone()
        .map_err(|e| ScenarioError::Bind(e.to_string()))?;
    let inbox = spawn_reader(reader);

    let started = Instant::now();
    let mut sim = Simulation::new(scenario, config.seed);
    sim.enable_frames();
    let mut connected = send(&mut stream, &sim.take_frames());

    while !sim.is_finished() {
        let target = (started.elapsed().as_secs_f64() * 1000.0 * config.time_scale) as u64;
        sim.run_until(target);
        if connected {
            connected = send(&mut stream, &sim.take_frames());
        }
        if !connected {
            sim.inject(InputFrame::Disconnect);
            continue;
        }
        match inbox.recv_timeout(config.poll) {
            Ok(ClientEvent::Line(line)) => match serde_json::from_str::<InputFrame>(&line) {
                Ok(InputFrame::Disconnect) | Err(_) => {
                    let frame = OutputFrame::Error {
                        code: "MalformedFrame".into(),
                        msg: format!("cannot parse frame: {line}"),
                    };
                    connected = send(&mut stream, &[frame]);
                }
                Ok(frame) => {
                    sim.inject(frame);
                }
            },
            Ok(ClientEvent::Closed) | Err(RecvTimeoutError::Disconnected) => {
                connected = false;
            }
            Err(RecvTimeoutError::Timeout) => {}
        }
    }
    // the session is over; drive the last injected frame through
    if connected {
        send(&mut stream, &sim.take_frames());
    }
    finish_run(sim, started)
}
