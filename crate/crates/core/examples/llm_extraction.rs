//! LLM extraction over an OpenAI-compatible chat-completions endpoint.
//!
//! A local stub plays the model: its first answer is missing fields, the
//! second is correct, so the retry-with-feedback loop is visible. Set
//! `ERPA_LLM_ENDPOINT` and `ERPA_LLM_MODEL` to use a real server instead.
//!
//! `cargo run --example llm_extraction`

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use erpa::bench::generate_corpus;
use erpa::extractor::{build_prompt, ExtractionStrategy, Extractor, LlmSettings};
use erpa::ocr::blocks_to_text;
use serde_json::{json, Value};

fn start_stub(good_answer: String) -> (String, Arc<AtomicUsize>) {
    let server = tiny_http::Server::http("127.0.0.1:0").expect("bind stub");
    let url = format!(
        "http://{}/v1/chat/completions",
        server.server_addr().to_ip().unwrap()
    );
    let calls = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&calls);
    thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let mut body = String::new();
            let _ = req.as_reader().read_to_string(&mut body);
            let messages = serde_json::from_str::<Value>(&body).unwrap_or_default()["messages"]
                .as_array()
                .map_or(0, Vec::len);
            let n = counter.fetch_add(1, Ordering::SeqCst);
            println!("  stub: request {} with {messages} messages", n + 1);
            let content = if n == 0 {
                r#"{"full_name": "?"}"#.to_string()
            } else {
                good_answer.clone()
            };
            let reply =
                json!({"choices": [{"message": {"role": "assistant", "content": content}}]});
            let _ = req.respond(tiny_http::Response::from_string(reply.to_string()));
        }
    });
    (url, calls)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let doc = generate_corpus(1, 21, 0.0).remove(0);
    let text = doc.extraction();
    let prompt = build_prompt(&blocks_to_text(&text))?;
    println!("system prompt:\n{}\n", prompt.system);

    let settings = match (
        std::env::var("ERPA_LLM_ENDPOINT"),
        std::env::var("ERPA_LLM_MODEL"),
    ) {
        (Ok(endpoint), Ok(model)) => LlmSettings::new(endpoint, model).with_env_api_key(),
        _ => {
            let mut answer = doc.record.clone();
            answer.source_id.clear();
            let (url, _) = start_stub(answer.to_json());
            LlmSettings::new(url, "stub-model")
        }
    };
    let extractor = Extractor::new(ExtractionStrategy::LlmHttp(settings));
    match extractor.extract(&text) {
        Ok(record) => println!("\naccepted:\n{}", serde_json::to_string_pretty(&record)?),
        Err(e) => println!("\nfailed: {e}"),
    }
    Ok(())
}
