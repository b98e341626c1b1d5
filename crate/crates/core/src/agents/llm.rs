//! Adapter for external chat models speaking the message schema.
//!
//! Templates are plain text with named placeholders; the rendered result is
//! the system prompt. The adapter sends the public dialogue history to an
//! OpenAI-style chat-completions endpoint and parses the reply through the
//! strict codec, re-prompting with the parse error up to `max_retries`
//! times.

use std::time::Duration;

use serde::Serialize;

use crate::agents::{AgentError, AttackerAgent, DefenderAgent};
use crate::protocol::{
    encode_message, parse_message, AttackerMessage, DefenderMessage, Message, PublicView, Role,
};
use crate::scenario::Scenario;

/// Where and how to reach the chat endpoint. Base URL and credential come
/// from `TOMSB_API_BASE` / `TOMSB_API_KEY`.
#[derive(Debug, Clone)]
pub struct EndpointConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub max_retries: usize,
    pub timeout: Duration,
}

impl EndpointConfig {
    pub fn from_env(model: &str) -> Result<Self, AgentError> {
        let base_url = std::env::var("TOMSB_API_BASE")
            .map_err(|_| AgentError::Config("TOMSB_API_BASE is not set".into()))?;
        Ok(EndpointConfig {
            base_url,
            api_key: std::env::var("TOMSB_API_KEY").ok(),
            model: model.to_string(),
            max_retries: 3,
            timeout: Duration::from_secs(120),
        })
    }
}

/// One chat exchange: `(role, content)` pairs in, reply text out.
pub trait ChatTransport: Send {
    fn complete(&mut self, messages: &[(String, String)]) -> Result<String, AgentError>;
}

#[derive(Serialize)]
struct ChatRequestMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatRequestMessage<'a>>,
}

/// Blocking HTTP transport against `{base_url}/chat/completions`.
pub struct HttpChatTransport {
    config: EndpointConfig,
    client: reqwest::blocking::Client,
}

impl HttpChatTransport {
    pub fn new(config: EndpointConfig) -> Result<Self, AgentError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| AgentError::Config(e.to_string()))?;
        Ok(HttpChatTransport { config, client })
    }
}

impl ChatTransport for HttpChatTransport {
    fn complete(&mut self, messages: &[(String, String)]) -> Result<String, AgentError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = ChatRequest {
            model: &self.config.model,
            messages: messages
                .iter()
                .map(|(role, content)| ChatRequestMessage {
                    role,
                    content,
                })
                .collect(),
        };
        let mut request = self.client.post(&url).json(&body);
        if let Some(key) = &self.config.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(AgentError::Transport(format!(
                "endpoint returned {status}"
            )));
        }
        let value: serde_json::Value = response
            .json()
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.to_string())
            .ok_or_else(|| AgentError::Transport("reply carries no message content".into()))
    }
}

/// Fill `{{placeholder}}` slots with scenario fields. Each role sees only
/// its own private information.
pub fn render_template(template: &str, scenario: &Scenario, role: Role) -> String {
    let u = &scenario.universe;
    let mut out = template.to_string();
    let levels = u.level_names().join(", ");
    let universe_json = u.to_nested().to_string();
    out = out.replace("{{target_name}}", &scenario.target_name);
    out = out.replace("{{levels}}", &levels);
    out = out.replace("{{depth}}", &u.depth().to_string());
    out = out.replace("{{universe}}", &universe_json);
    match role {
        Role::Attacker => {
            let prior = serde_json::to_string(&u.partial_names(&scenario.attacker_prior))
                .expect("names serialize");
            out = out.replace("{{prior}}", &prior);
        }
        Role::Defender => {
            let gt = serde_json::to_string(&u.path_names(&scenario.ground_truth))
                .expect("names serialize");
            out = out.replace("{{ground_truth}}", &gt);
        }
    }
    out
}

/// Chat-model agent for either role.
pub struct LlmAgent {
    role: Role,
    system_prompt: String,
    transport: Box<dyn ChatTransport>,
    /// `(chat role, content)` history: own turns as `assistant`, the other
    /// side's public views as `user`.
    history: Vec<(String, String)>,
    max_retries: usize,
}

impl LlmAgent {
    pub fn new(
        role: Role,
        scenario: &Scenario,
        template: &str,
        transport: Box<dyn ChatTransport>,
        max_retries: usize,
    ) -> Self {
        LlmAgent {
            role,
            system_prompt: render_template(template, scenario, role),
            transport,
            history: Vec::new(),
            max_retries,
        }
    }

    pub fn attacker_over_http(
        scenario: &Scenario,
        template_path: &str,
        endpoint: EndpointConfig,
    ) -> Result<Self, AgentError> {
        let template = std::fs::read_to_string(template_path)
            .map_err(|e| AgentError::Config(format!("template {template_path}: {e}")))?;
        let retries = endpoint.max_retries;
        let transport = HttpChatTransport::new(endpoint)?;
        Ok(Self::new(
            Role::Attacker,
            scenario,
            &template,
            Box::new(transport),
            retries,
        ))
    }

    pub fn defender_over_http(
        scenario: &Scenario,
        template_path: &str,
        endpoint: EndpointConfig,
    ) -> Result<Self, AgentError> {
        let template = std::fs::read_to_string(template_path)
            .map_err(|e| AgentError::Config(format!("template {template_path}: {e}")))?;
        let retries = endpoint.max_retries;
        let transport = HttpChatTransport::new(endpoint)?;
        Ok(Self::new(
            Role::Defender,
            scenario,
            &template,
            Box::new(transport),
            retries,
        ))
    }

    fn exchange(&mut self) -> Result<Message, AgentError> {
        let mut attempt = 0;
        let mut feedback: Option<String> = None;
        loop {
            attempt += 1;
            let mut messages: Vec<(String, String)> =
                vec![("system".to_string(), self.system_prompt.clone())];
            messages.extend(self.history.iter().cloned());
            if let Some(error) = &feedback {
                messages.push((
                    "user".to_string(),
                    format!(
                        "Your last reply could not be parsed: {error}. \
                         Reply again with one valid JSON message and nothing else."
                    ),
                ));
            }
            let reply = self.transport.complete(&messages)?;
            match parse_message(&reply, self.role) {
                Ok(msg) => {
                    let canonical = encode_message(&msg)
                        .map_err(|e| AgentError::Unparsable {
                            attempts: attempt,
                            last_error: e.to_string(),
                        })?;
                    self.history.push(("assistant".to_string(), canonical));
                    return Ok(msg);
                }
                Err(e) => {
                    if attempt > self.max_retries {
                        return Err(AgentError::Unparsable {
                            attempts: attempt,
                            last_error: e.to_string(),
                        });
                    }
                    feedback = Some(e.to_string());
                }
            }
        }
    }

    fn push_incoming(&mut self, view: &PublicView) {
        let content = serde_json::to_string(view).expect("views serialize");
        self.history.push(("user".to_string(), content));
    }
}

impl AttackerAgent for LlmAgent {
    fn step(&mut self, incoming: Option<&PublicView>) -> Result<AttackerMessage, AgentError> {
        debug_assert_eq!(self.role, Role::Attacker);
        if let Some(view) = incoming {
            self.push_incoming(view);
        } else if self.history.is_empty() {
            self.history
                .push(("user".to_string(), "Begin the conversation.".to_string()));
        }
        match self.exchange()? {
            Message::Attacker(m) => Ok(m),
            Message::Defender(_) => unreachable!("parse enforced the role"),
        }
    }
}

impl DefenderAgent for LlmAgent {
    fn step(&mut self, incoming: &PublicView) -> Result<DefenderMessage, AgentError> {
        debug_assert_eq!(self.role, Role::Defender);
        self.push_incoming(incoming);
        match self.exchange()? {
            Message::Defender(m) => Ok(m),
            Message::Attacker(_) => unreachable!("parse enforced the role"),
        }
    }
}
