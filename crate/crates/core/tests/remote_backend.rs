use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread::JoinHandle;

use kc_eval::error::BackendError;
use kc_eval::extraction::{
    Backend, BackendKind, BackendRequest, ExtractionCache, Extractor, ExtractorConfig,
    RemoteBackend, Task,
};
use kc_eval::{Checkpoint, KcDatabase};

/// Serves one request with `status` and `body`; returns the raw request
/// head and body it received.
fn serve_once(status: u16, body: &'static str) -> (String, JoinHandle<(String, String)>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream);
        let mut head = String::new();
        let mut content_length = 0usize;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" || line.is_empty() {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                content_length = v.trim().parse().unwrap();
            }
            head.push_str(&line);
        }
        let mut req_body = vec![0u8; content_length];
        reader.read_exact(&mut req_body).unwrap();
        let mut stream = reader.into_inner();
        write!(
            stream,
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        (head, String::from_utf8(req_body).unwrap())
    });
    (url, handle)
}

fn config(url: String, key_env: &str) -> ExtractorConfig {
    ExtractorConfig {
        backend: BackendKind::Remote,
        endpoint: Some(url),
        model_name: "test-model".into(),
        api_key_env: key_env.into(),
        timeout_seconds: 5,
        ..ExtractorConfig::default()
    }
}

fn request(db: &KcDatabase) -> BackendRequest<'_> {
    BackendRequest {
        task: Task::Code,
        prompt: "PROMPT TEXT",
        subject_text: "",
        db,
        candidate: None,
    }
}

#[test]
fn chat_reply_is_extracted_and_key_sent() {
    std::env::set_var("KC_EVAL_TEST_KEY_A", "sekret");
    let (url, server) = serve_once(
        200,
        r#"{"choices":[{"message":{"content":"looks fine\nFINAL: [loop.update]"}}]}"#,
    );
    let cfg = config(url, "KC_EVAL_TEST_KEY_A");
    let backend = RemoteBackend::from_config(&cfg).unwrap();
    assert_eq!(backend.id(), "remote:test-model:t0");

    let db = KcDatabase::example();
    let cache = ExtractionCache::in_memory();
    let extractor = Extractor::new(&db, &cfg, &backend, &cache);
    let cp = Checkpoint {
        checkpoint_id: "c1".into(),
        student_id: "s".into(),
        assignment_id: "hw01".into(),
        problem_id: "p".into(),
        timestamp: "2024-01-01T00:00:00Z".parse().unwrap(),
        code: "x = 1".into(),
        sequence_hint: None,
    };
    let record = extractor.extract_code_kcs(&cp).unwrap();
    assert_eq!(record.kc_ids, ["loop.update"]);
    assert_eq!(record.extractor_id, "remote:test-model:t0");

    let (head, body) = server.join().unwrap();
    assert!(head.starts_with("POST /v1/chat"));
    assert!(head.to_ascii_lowercase().contains("authorization: bearer sekret"));
    let body: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(body["model"], "test-model");
    assert!(body["messages"][0]["content"].as_str().unwrap().contains("x = 1"));
}

#[test]
fn plain_text_field_is_a_fallback() {
    let (url, server) = serve_once(200, r#"{"text":"FINAL: []"}"#);
    let backend = RemoteBackend::from_config(&config(url, "KC_EVAL_TEST_KEY_UNSET")).unwrap();
    let db = KcDatabase::example();
    assert_eq!(backend.complete(&request(&db)).unwrap(), "FINAL: []");
    let (head, _) = server.join().unwrap();
    assert!(!head.to_ascii_lowercase().contains("authorization"));
}

#[test]
fn http_errors_are_classified() {
    let (url, server) = serve_once(503, r#"{"error":"busy"}"#);
    let backend = RemoteBackend::from_config(&config(url, "KC_EVAL_TEST_KEY_UNSET")).unwrap();
    let db = KcDatabase::example();
    assert_eq!(
        backend.complete(&request(&db)),
        Err(BackendError::Http { status: 503 })
    );
    server.join().unwrap();

    let (url, server) = serve_once(200, r#"{"unexpected":true}"#);
    let backend = RemoteBackend::from_config(&config(url, "KC_EVAL_TEST_KEY_UNSET")).unwrap();
    assert!(matches!(
        backend.complete(&request(&db)),
        Err(BackendError::BadResponse(_))
    ));
    server.join().unwrap();
}

#[test]
fn closed_port_is_unreachable() {
    let port = {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        listener.local_addr().unwrap().port()
    };
    let backend =
        RemoteBackend::from_config(&config(format!("http://127.0.0.1:{port}/"), "X_UNSET"))
            .unwrap();
    let db = KcDatabase::example();
    assert!(matches!(
        backend.complete(&request(&db)),
        Err(BackendError::Unreachable(_))
    ));
}
