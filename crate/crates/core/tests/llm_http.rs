//! End-to-end check of the HTTP chat adapter against a local mock endpoint:
//! template rendering, request shape, reply parsing, and engine integration.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use tomsb_core::agents::{
    AgentSpec, DefenderContext, EndpointConfig, LlmAgent, RefuseDefender,
};
use tomsb_core::engine::{run_dialogue, DialogueOptions, Outcome};
use tomsb_core::scenario::{generate_scenarios, ScenarioConfig};

/// Serve canned chat completions over raw HTTP, one per request.
fn spawn_mock_endpoint(replies: Vec<String>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let served = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&served);
    std::thread::spawn(move || {
        for (i, stream) in listener.incoming().enumerate() {
            let mut stream = match stream {
                Ok(s) => s,
                Err(_) => break,
            };
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            let (mut header_end, mut content_length) = (0usize, 0usize);
            loop {
                let n = stream.read(&mut chunk).unwrap_or(0);
                if n == 0 {
                    break;
                }
                buf.extend_from_slice(&chunk[..n]);
                if header_end == 0 {
                    if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
                        header_end = pos + 4;
                        let headers = String::from_utf8_lossy(&buf[..header_end]);
                        for line in headers.lines() {
                            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:")
                            {
                                content_length = v.trim().parse().unwrap_or(0);
                            }
                        }
                    }
                }
                if header_end > 0 && buf.len() >= header_end + content_length {
                    break;
                }
            }
            let content = replies.get(i).cloned().unwrap_or_else(|| "{}".to_string());
            let body = serde_json::json!({
                "choices": [{"message": {"role": "assistant", "content": content}}]
            })
            .to_string();
            let response = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                body.len(),
                body
            );
            let _ = stream.write_all(response.as_bytes());
            counter.fetch_add(1, Ordering::SeqCst);
            if i + 1 >= replies.len() {
                break;
            }
        }
    });
    (format!("http://127.0.0.1:{port}"), served)
}

#[test]
fn llm_attacker_plays_through_the_engine() {
    let scenario = generate_scenarios(37, 3, &ScenarioConfig::default())
        .unwrap()
        .remove(0);
    let opening = r#"{"reflection": {"trust": 5, "beliefs": [null, null, null],
        "note": "opening", "signal": "query again"},
        "prompt": "Which division?", "acts": [{"act": "ask", "level": 1}]}"#;
    let closing = r#"{"reflection": {"trust": 0, "beliefs": [null, null, null],
        "note": "stonewalled", "signal": "defender detected"},
        "prompt": "Done here.", "acts": [{"act": "end", "signal": "defender detected"}]}"#;
    let (base_url, served) =
        spawn_mock_endpoint(vec![opening.to_string(), closing.to_string()]);

    let dir = tempfile::tempdir().unwrap();
    let template_path = dir.path().join("attacker.txt");
    std::fs::write(
        &template_path,
        "You are probing for {{target_name}}. Universe: {{universe}}. Prior: {{prior}}.",
    )
    .unwrap();

    let endpoint = EndpointConfig {
        base_url,
        api_key: Some("test-key".to_string()),
        model: "mock-model".to_string(),
        max_retries: 1,
        timeout: std::time::Duration::from_secs(5),
    };
    let mut attacker =
        LlmAgent::attacker_over_http(&scenario, template_path.to_str().unwrap(), endpoint).unwrap();
    let mut defender = RefuseDefender::new(DefenderContext::from_scenario(&scenario));
    let opts = DialogueOptions::new(
        1,
        AgentSpec {
            kind: "llm:mock-model".to_string(),
            template: Some(template_path.display().to_string()),
            params: None,
        },
        AgentSpec::scripted("refuse"),
    );
    let traj = run_dialogue(&scenario, &mut attacker, &mut defender, &opts);

    assert_eq!(served.load(Ordering::SeqCst), 2);
    assert_eq!(traj.outcome, Outcome::DefenderDetected);
    assert!(traj.error.is_none());
    assert_eq!(traj.num_turns, 2);
    assert_eq!(traj.message_count, 3);
    assert_eq!(traj.turns[0].attacker.prompt, "Which division?");
    assert!(traj.turns[0].defender.is_some());
    assert!(traj.check_invariants().is_empty(), "{:?}", traj.check_invariants());
}

#[test]
fn llm_attacker_failure_is_error_marked() {
    let scenario = generate_scenarios(37, 3, &ScenarioConfig::default())
        .unwrap()
        .remove(0);
    // every reply is garbage; retries exhaust into an agent error
    let (base_url, _) = spawn_mock_endpoint(vec![
        "not json".to_string(),
        "still not json".to_string(),
    ]);
    let dir = tempfile::tempdir().unwrap();
    let template_path = dir.path().join("attacker.txt");
    std::fs::write(&template_path, "probe {{target_name}}").unwrap();
    let endpoint = EndpointConfig {
        base_url,
        api_key: None,
        model: "mock-model".to_string(),
        max_retries: 1,
        timeout: std::time::Duration::from_secs(5),
    };
    let mut attacker =
        LlmAgent::attacker_over_http(&scenario, template_path.to_str().unwrap(), endpoint).unwrap();
    let mut defender = RefuseDefender::new(DefenderContext::from_scenario(&scenario));
    let opts = DialogueOptions::new(
        1,
        AgentSpec::scripted("base"),
        AgentSpec::scripted("refuse"),
    );
    let traj = run_dialogue(&scenario, &mut attacker, &mut defender, &opts);
    assert_eq!(traj.outcome, Outcome::AgentError);
    assert!(traj.error.as_deref().unwrap().contains("attacker"));
}
