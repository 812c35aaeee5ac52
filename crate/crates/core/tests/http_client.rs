#![cfg(feature = "http-client")]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::time::Duration;

use vecorch::orchestrators::llm::{AuditEntry, HttpClient, HttpClientConfig, API_KEY_ENV};
use vecorch::orchestrators::{ChatMessage, ModelClient};

const KEY: &str = "sk-test-0123456789";

/// Serves one request with `status` and `body`; sends back the raw request.
fn one_shot_server(status: u16, body: String) -> (String, mpsc::Receiver<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut head = String::new();
        let mut len = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                len = v.trim().parse().unwrap();
            }
            head.push_str(&line);
            if line == "\r\n" {
                break;
            }
        }
        let mut payload = vec![0; len];
        reader.read_exact(&mut payload).unwrap();
        head.push_str(&String::from_utf8(payload).unwrap());
        tx.send(head).unwrap();
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
    });
    (url, rx)
}

fn audit_lines(path: &std::path::Path) -> Vec<AuditEntry> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

// One test so the environment variable is never shared between threads.
#[test]
fn key_comes_from_the_environment_and_never_reaches_the_audit_log() {
    std::env::set_var(API_KEY_ENV, KEY);
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("audit.jsonl");
    let messages = [ChatMessage::system("be brief"), ChatMessage::user(format!("echo {KEY}"))];

    let reply = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": format!("{{\"w\": [[0.5]], \"a\": [[0.1]]}} {KEY}")}}]});
    let (url, rx) = one_shot_server(200, reply.to_string());
    let mut client = HttpClient::new(HttpClientConfig {
        base_url: url.clone(),
        model: "m".into(),
        audit_log: Some(log.clone()),
        ..HttpClientConfig::default()
    })
    .unwrap();
    let out = client.call(&messages, Duration::from_secs(10)).unwrap();
    assert!(out.text.starts_with("{\"w\""));
    let request = rx.recv().unwrap();
    assert!(request.starts_with("POST /v1/chat/completions"), "{request}");
    assert!(request.to_ascii_lowercase().contains(&format!("authorization: bearer {}", KEY.to_ascii_lowercase())));
    assert!(request.contains("\"model\":\"m\""));

    let entries = audit_lines(&log);
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].status, Some(200));
    assert_eq!(entries[0].url, format!("{url}/chat/completions"));
    let raw = std::fs::read_to_string(&log).unwrap();
    assert!(!raw.contains(KEY), "key leaked into the audit log");
    assert!(entries[0].request.contains("[REDACTED]") && entries[0].response.contains("[REDACTED]"));
    assert_eq!(client.audit, entries);

    // error statuses are audited and reported, still redacted
    let (url, _rx) = one_shot_server(500, format!("{{\"error\": \"bad key {KEY}\"}}"));
    let mut client = HttpClient::new(HttpClientConfig {
        base_url: url,
        audit_log: Some(log.clone()),
        ..HttpClientConfig::default()
    })
    .unwrap();
    assert!(client.call(&messages, Duration::from_secs(10)).is_err());
    assert_eq!(audit_lines(&log).len(), 2);
    assert!(!std::fs::read_to_string(&log).unwrap().contains(KEY));

    // no key set: no authorization header
    std::env::remove_var(API_KEY_ENV);
    let (url, rx) = one_shot_server(200, reply.to_string());
    let mut client = HttpClient::new(HttpClientConfig {
        base_url: url,
        ..HttpClientConfig::default()
    })
    .unwrap();
    client.call(&messages, Duration::from_secs(10)).unwrap();
    assert!(!rx.recv().unwrap().to_ascii_lowercase().contains("authorization"));
}
