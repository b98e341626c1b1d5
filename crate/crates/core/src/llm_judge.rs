//! Optional LLM-backed judge for free-text-only agents.
//!
//! Structured agents are judged exactly from their recorded reflections.
//! Agents that only speak free text need an external model to extract the
//! defender's inferred estimate of the attacker's prior from the transcript
//! and reflections, preferring later reflections when they disagree. The
//! extracted estimate is then matched exactly, like the structural judge.
//!
//! This adapter reuses the agents' template/transport machinery and is not
//! part of the core test surface.

use crate::agents::{AgentError, ChatTransport, EndpointConfig, HttpChatTransport};
use crate::engine::Trajectory;
use crate::scenario::Scenario;

/// Judge over an external chat model.
pub struct LlmJudge {
    transport: Box<dyn ChatTransport>,
    template: String,
    max_retries: usize,
}

impl LlmJudge {
    pub fn new(template: &str, transport: Box<dyn ChatTransport>, max_retries: usize) -> Self {
        LlmJudge {
            transport,
            template: template.to_string(),
            max_retries,
        }
    }

    pub fn over_http(template_path: &str, endpoint: EndpointConfig) -> Result<Self, AgentError> {
        let template = std::fs::read_to_string(template_path)
            .map_err(|e| AgentError::Config(format!("template {template_path}: {e}")))?;
        let retries = endpoint.max_retries;
        let transport = HttpChatTransport::new(endpoint)?;
        Ok(Self::new(&template, Box::new(transport), retries))
    }

    fn render(&self, traj: &Trajectory, scenario: &Scenario) -> String {
        let u = &scenario.universe;
        let mut transcript = String::new();
        for (i, turn) in traj.turns.iter().enumerate() {
            transcript.push_str(&format!(
                "[turn {}] attacker: {}\n",
                i + 1,
                turn.attacker.prompt
            ));
            if let Some(d) = &turn.defender {
                transcript.push_str(&format!(
                    "[turn {}] defender reflection: {}\n",
                    i + 1,
                    serde_json::to_string(&d.reflection).expect("reflections serialize")
                ));
                transcript.push_str(&format!("[turn {}] defender: {}\n", i + 1, d.reply));
            }
        }
        self.template
            .replace("{{target_name}}", &scenario.target_name)
            .replace("{{levels}}", &u.level_names().join(", "))
            .replace("{{depth}}", &u.depth().to_string())
            .replace("{{universe}}", &u.to_nested().to_string())
            .replace("{{transcript}}", &transcript)
    }

    /// Extract the defender's estimate of the attacker's prior knowledge as
    /// one optional name per level.
    pub fn infer_prior_estimate(
        &mut self,
        traj: &Trajectory,
        scenario: &Scenario,
    ) -> Result<Vec<Option<String>>, AgentError> {
        let depth = scenario.universe.depth();
        let prompt = self.render(traj, scenario);
        let mut attempt = 0;
        let mut feedback: Option<String> = None;
        loop {
            attempt += 1;
            let mut messages = vec![("system".to_string(), prompt.clone())];
            if let Some(error) = &feedback {
                messages.push((
                    "user".to_string(),
                    format!(
                        "Your last reply could not be used: {error}. Reply with a JSON \
                         array of {depth} entries, each an entity name or null."
                    ),
                ));
            }
            let reply = self.transport.complete(&messages)?;
            match parse_estimate(&reply, depth) {
                Ok(estimate) => return Ok(estimate),
                Err(e) => {
                    if attempt > self.max_retries {
                        return Err(AgentError::Unparsable {
                            attempts: attempt,
                            last_error: e,
                        });
                    }
                    feedback = Some(e);
                }
            }
        }
    }

    /// Trajectory-wise ToM via the extracted estimate: exact match against
    /// the true prior, null for null and value for value.
    pub fn trajectory_tom(
        &mut self,
        traj: &Trajectory,
        scenario: &Scenario,
    ) -> Result<u8, AgentError> {
        let estimate = self.infer_prior_estimate(traj, scenario)?;
        let truth = scenario.universe.partial_names(&scenario.attacker_prior);
        Ok((estimate == truth) as u8)
    }
}

fn parse_estimate(reply: &str, depth: usize) -> Result<Vec<Option<String>>, String> {
    // accept a bare JSON array anywhere in the reply
    let start = reply.find('[').ok_or("no JSON array in reply")?;
    let end = reply.rfind(']').ok_or("no closing bracket in reply")?;
    if end <= start {
        return Err("malformed brackets".to_string());
    }
    let value: serde_json::Value =
        serde_json::from_str(&reply[start..=end]).map_err(|e| e.to_string())?;
    let arr = value.as_array().ok_or("expected a JSON array")?;
    if arr.len() != depth {
        return Err(format!("expected {depth} entries, got {}", arr.len()));
    }
    arr.iter()
        .map(|item| match item {
            serde_json::Value::Null => Ok(None),
            serde_json::Value::String(s) => Ok(Some(s.clone())),
            other => Err(format!("expected name or null, got {other}")),
        })
        .collect()
}
