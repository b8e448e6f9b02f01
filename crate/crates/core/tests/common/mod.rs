#![allow(dead_code)]

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde_json::json;

pub fn write_json(dir: &Path, path: &str, value: &serde_json::Value) {
    let file = dir.join(format!("{path}.json"));
    fs::create_dir_all(file.parent().unwrap()).unwrap();
    fs::write(file, serde_json::to_vec_pretty(value).unwrap()).unwrap();
}

/// Write a match plus mastery and history for each of its players.
/// Player `k` of match `id` plays champion `k + 1` and has a short history.
pub fn write_match(dir: &Path, id: &str, n_players: usize, winner: &str) {
    let participants: Vec<serde_json::Value> = (0..n_players)
        .map(|k| json!({"player_id": format!("{id}-p{k}"), "champion_id": k + 1, "team": if k < 5 { "A" } else { "B" }}))
        .collect();
    write_json(dir, &format!("match/{id}"), &json!({"match_id": id, "participants": participants, "winner": winner}));
    for k in 0..n_players {
        let player = format!("{id}-p{k}");
        write_json(dir, &format!("mastery/{player}/{}", k + 1), &json!({"player_id": player, "champion_id": k + 1, "mastery_points": 1000 * (k + 1)}));
        let entries: Vec<serde_json::Value> =
            (0..(k + 3)).map(|j| json!({"champion_id": if j % 2 == 0 { k + 1 } else { 99 }, "win": j % 3 != 0})).collect();
        write_json(dir, &format!("history/{player}"), &json!({"player_id": player, "entries": entries}));
    }
}

pub fn write_candidates(dir: &Path, ids: &[&str]) {
    write_json(dir, "candidates", &json!(ids));
}

pub type RequestLog = Arc<Mutex<Vec<(String, Option<String>)>>>;

/// Minimal HTTP/1.1 server answering each request with the next scripted
/// `(status, body)`; the last entry repeats. Returns the base URL and the
/// recorded request lines plus `x-api-key` values.
pub fn scripted_server(script: Vec<(u16, String)>) -> (String, RequestLog) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let log = Arc::new(Mutex::new(Vec::new()));
    let seen = Arc::clone(&log);
    std::thread::spawn(move || {
        let mut i = 0usize;
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            if reader.read_line(&mut request_line).is_err() {
                continue;
            }
            let mut key = None;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some((name, value)) = line.split_once(':') {
                    if name.eq_ignore_ascii_case("x-api-key") {
                        key = Some(value.trim().to_string());
                    }
                }
            }
            seen.lock().unwrap().push((request_line.trim().to_string(), key));
            let (status, body) = &script[i.min(script.len() - 1)];
            i += 1;
            let reason = match status {
                200 => "OK",
                404 => "Not Found",
                429 => "Too Many Requests",
                _ => "Error",
            };
            let _ = write!(
                stream,
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    (format!("http://{addr}"), log)
}
