//! Completion client for an HTTP text-generation service.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ServiceError, TextGenerator};

pub const ENDPOINT_ENV: &str = "PROOFLOG_SERVICE_URL";
pub const TOKEN_ENV: &str = "PROOFLOG_SERVICE_TOKEN";

/// Request settings. The endpoint and credentials come from the
/// environment unless set here; the token is never read from a file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub endpoint: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retries: u32,
    /// Concurrent requests allowed across instances.
    pub max_in_flight: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            endpoint: None,
            model: "default".into(),
            temperature: 0.0,
            max_tokens: 1024,
            timeout_secs: 120,
            retries: super::DEFAULT_RETRIES,
            max_in_flight: 4,
        }
    }
}

impl ServiceConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("malformed service config: {e}"))
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
    stop: &'a [String],
}

pub struct HttpGenerator {
    agent: ureq::Agent,
    endpoint: String,
    token: Option<String>,
    config: ServiceConfig,
}

impl HttpGenerator {
    /// Resolves the endpoint (config, then `PROOFLOG_SERVICE_URL`) and the
    /// bearer token (`PROOFLOG_SERVICE_TOKEN`, optional).
    pub fn from_env(config: ServiceConfig) -> Result<Self, ServiceError> {
        let endpoint = config
            .endpoint
            .clone()
            .or_else(|| std::env::var(ENDPOINT_ENV).ok())
            .filter(|e| !e.is_empty())
            .ok_or_else(|| ServiceError(format!("no service endpoint: set {ENDPOINT_ENV} or `endpoint`")))?;
        let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        Ok(HttpGenerator::new(endpoint, token, config))
    }

    pub fn new(endpoint: String, token: Option<String>, config: ServiceConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        HttpGenerator { agent, endpoint, token, config }
    }
}

/// Accepts `{"choices": [{"text": ...}]}`, `{"text": ...}` or
/// `{"completion": ...}`.
fn completion_text(body: &serde_json::Value) -> Option<String> {
    body.pointer("/choices/0/text")
        .or_else(|| body.pointer("/choices/0/message/content"))
        .or_else(|| body.get("text"))
        .or_else(|| body.get("completion"))
        .and_then(|v| v.as_str())
        .map(str::to_string)
}

impl TextGenerator for HttpGenerator {
    fn complete(&self, prompt: &str, stop: &[String]) -> Result<String, ServiceError> {
        let request = CompletionRequest {
            model: &self.config.model,
            prompt,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
            stop,
        };
        let mut call = self.agent.post(&self.endpoint);
        if let Some(token) = &self.token {
            call = call.header("Authorization", format!("Bearer {token}"));
        }
        let mut response = call.send_json(&request).map_err(|e| ServiceError(e.to_string()))?;
        let body: serde_json::Value = response.body_mut().read_json().map_err(|e| ServiceError(e.to_string()))?;
        completion_text(&body).ok_or_else(|| ServiceError("response has no completion text".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves one request and hands back the request head and body.
    fn serve_once(status: &'static str, body: &'static str) -> (String, std::thread::JoinHandle<(String, String)>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/completions", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
                head.push_str(&line);
            }
            let mut request_body = vec![0; length];
            reader.read_exact(&mut request_body).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            (head, String::from_utf8(request_body).unwrap())
        });
        (url, handle)
    }

    #[test]
    fn posts_prompt_and_reads_choices() {
        let (url, server) = serve_once("200 OK", r#"{"choices":[{"text":"green(fiona).\n```"}]}"#);
        let g = HttpGenerator::new(url, Some("secret".into()), ServiceConfig::default());
        let text = g.complete("PROMPT", &["### Problem".into()]).unwrap();
        assert_eq!(text, "green(fiona).\n```");
        let (head, body) = server.join().unwrap();
        assert!(head.starts_with("POST /v1/completions"));
        assert!(head.to_ascii_lowercase().contains("authorization: bearer secret"));
        let body: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(body["prompt"], "PROMPT");
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["stop"][0], "### Problem");
    }

    #[test]
    fn server_errors_surface() {
        let (url, server) = serve_once("500 Internal Server Error", r#"{"error":"boom"}"#);
        let g = HttpGenerator::new(url, None, ServiceConfig::default());
        assert!(g.complete("p", &[]).is_err());
        server.join().unwrap();
    }

    #[test]
    fn unreachable_service_is_a_service_error() {
        let addr = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
        let g = HttpGenerator::new(format!("http://{addr}/"), None, ServiceConfig { timeout_secs: 5, ..Default::default() });
        let r = super::super::generate_program(&g, "p", &[], 1, "i");
        assert_eq!(r.status, super::super::GenerationStatus::ServiceError);
        assert_eq!(r.attempts, 2);
    }

    #[test]
    fn response_shapes() {
        let v = serde_json::json!({"completion": "a."});
        assert_eq!(completion_text(&v).as_deref(), Some("a."));
        assert_eq!(completion_text(&serde_json::json!({"other": 1})), None);
    }
}
