#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;

use zerotopic::synthetic::{three_topic_corpus, SyntheticCorpus, SyntheticOptions};

/// The separable fixture: 100 documents per label, 40 class words each.
pub fn short_fixture() -> SyntheticCorpus {
    three_topic_corpus(SyntheticOptions {
        docs_per_class: 100,
        filler_tokens: 0,
        class_tokens: 40,
        seed: 7,
    })
}

/// Same classes, but every document opens with 16 shared filler words.
pub fn long_fixture() -> SyntheticCorpus {
    three_topic_corpus(SyntheticOptions {
        docs_per_class: 100,
        filler_tokens: 16,
        class_tokens: 40,
        seed: 11,
    })
}

pub type Handler = dyn Fn(&str, &str, &str) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server: one thread per connection, `Connection: close`.
pub struct StubServer {
    pub url: String,
}

impl StubServer {
    pub fn start(handler: Arc<Handler>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let handler = handler.clone();
                std::thread::spawn(move || serve(stream, &*handler));
            }
        });
        Self { url }
    }
}

fn serve(mut stream: TcpStream, handler: &Handler) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
        return;
    }
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let path = parts.next().unwrap_or("").to_string();
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body).unwrap();
    let (status, payload) = handler(&method, &path, &String::from_utf8(body).unwrap());
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        413 => "Payload Too Large",
        503 => "Service Unavailable",
        _ => "Status",
    };
    let response = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let _ = stream.write_all(response.as_bytes());
}

/// Recorded request/response pairs for the sidecar contract.
#[derive(Debug, Clone, serde::Deserialize)]
pub struct ContractCase {
    pub name: String,
    pub method: String,
    pub path: String,
    #[serde(default)]
    pub request: Option<serde_json::Value>,
    pub status: u16,
    pub response: serde_json::Value,
}

pub fn contract_cases() -> Vec<ContractCase> {
    let raw = include_str!("../fixtures/sidecar_contract.json");
    serde_json::from_str(raw).unwrap()
}

/// Serves the recorded fixtures verbatim; unknown requests get a 400.
pub fn contract_server() -> StubServer {
    let cases = contract_cases();
    StubServer::start(Arc::new(move |method, path, body| {
        let body: Option<serde_json::Value> = serde_json::from_str(body).ok();
        cases
            .iter()
            .find(|c| c.method == method && c.path == path && c.request == body)
            .map(|c| (c.status, c.response.to_string()))
            .unwrap_or((400, r#"{"error":"no recorded fixture"}"#.to_string()))
    }))
}
