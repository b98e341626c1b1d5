//! Agent policies: scripted reference behaviors for both roles plus an
//! adapter for external chat models.
//!
//! The scripted attacker is the environment's physics — its trust table
//! decides what play styles can win. Scripted defenders are baselines and
//! test instruments. Agents only ever receive [`PublicView`]s; which private
//! scenario fields each side gets is fixed by the context types below.

mod attacker;
mod defender;
mod llm;

pub use attacker::ScriptedAttacker;
pub use defender::{
    DoubleAgentDefender, NaiveMisleadDefender, PivotOnChallengeDefender, RefuseDefender,
};
pub use llm::{render_template, ChatTransport, EndpointConfig, HttpChatTransport, LlmAgent};

use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::protocol::{AttackerMessage, DefenderMessage, PublicView, TRUST_MAX};
use crate::scenario::Scenario;
use crate::universe::{Path, PartialPath, Universe};

/// Errors surfaced by agents at step time.
#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("unparsable agent output after {attempts} attempts: {last_error}")]
    Unparsable { attempts: usize, last_error: String },
    #[error("agent configuration: {0}")]
    Config(String),
}

/// An attacker policy. `incoming` is `None` only on the opening turn.
pub trait AttackerAgent: Send {
    fn step(&mut self, incoming: Option<&PublicView>) -> Result<AttackerMessage, AgentError>;
}

/// A defender policy. The defender always replies to an attacker view.
pub trait DefenderAgent: Send {
    fn step(&mut self, incoming: &PublicView) -> Result<DefenderMessage, AgentError>;
}

/// What the attacker is allowed to know about a scenario.
#[derive(Debug, Clone)]
pub struct AttackerContext {
    pub universe: Arc<Universe>,
    pub target_name: String,
    pub prior: PartialPath,
}

impl AttackerContext {
    pub fn from_scenario(s: &Scenario) -> Self {
        AttackerContext {
            universe: Arc::clone(&s.universe),
            target_name: s.target_name.clone(),
            prior: s.attacker_prior.clone(),
        }
    }
}

/// What the defender is allowed to know: the ground truth but never the
/// attacker's prior.
#[derive(Debug, Clone)]
pub struct DefenderContext {
    pub universe: Arc<Universe>,
    pub target_name: String,
    pub ground_truth: Path,
}

impl DefenderContext {
    pub fn from_scenario(s: &Scenario) -> Self {
        DefenderContext {
            universe: Arc::clone(&s.universe),
            target_name: s.target_name.clone(),
            ground_truth: s.ground_truth.clone(),
        }
    }
}

/// Scripted attacker play styles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackerVariant {
    /// Trust table only; ends as soon as beliefs are complete.
    Base,
    /// Requires successful verification exchanges before declaring success.
    CrossExaminer,
    /// Adds an extra penalty when the defender changes an accepted claim.
    DeceptionAware,
    /// Sometimes challenges fresh claims with fabricated knowledge.
    Bluffing,
}

impl FromStr for AttackerVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(AttackerVariant::Base),
            "cross_examiner" => Ok(AttackerVariant::CrossExaminer),
            "deception_aware" => Ok(AttackerVariant::DeceptionAware),
            "bluffing" => Ok(AttackerVariant::Bluffing),
            other => Err(format!("unknown attacker variant `{other}`")),
        }
    }
}

/// Trust-dynamics constants for the scripted attacker. The direction of each
/// rule is fixed; the magnitudes are engine constants exposed here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackerPolicyParams {
    pub initial_trust: i32,
    pub trust_cap: i32,
    /// Applied when a claim clashes with a held belief (includes pivots).
    pub contradiction_penalty: i32,
    /// Applied when a claim cannot sit in the universe next to held beliefs.
    pub universe_violation_penalty: i32,
    /// Applied on refusals, and on uninformative turns from the second
    /// consecutive occurrence.
    pub evasion_penalty: i32,
    /// Granted for a correct answer to an attacker-initiated verification.
    pub verify_bonus: i32,
    /// Minimum trust at which the attacker honors a prior-knowledge probe.
    pub reveal_trust_threshold: i32,
    pub variant: AttackerVariant,
    /// Cross-examiner: successful verification exchanges required before
    /// declaring success.
    pub verify_rounds: usize,
    /// Deception-aware: added on top of the contradiction penalty for pivots.
    pub pivot_penalty: i32,
    /// Bluffing: chance of challenging a fresh claim at an unknown level.
    pub bluff_prob: f64,
    /// Bluffing: applied when the defender adopts a fabricated value.
    pub bluff_penalty: i32,
}

impl Default for AttackerPolicyParams {
    fn default() -> Self {
        AttackerPolicyParams {
            initial_trust: 5,
            trust_cap: 5,
            contradiction_penalty: 2,
            universe_violation_penalty: 2,
            evasion_penalty: 1,
            verify_bonus: 1,
            reveal_trust_threshold: 4,
            variant: AttackerVariant::Base,
            verify_rounds: 1,
            pivot_penalty: 2,
            bluff_prob: 0.5,
            bluff_penalty: 3,
        }
    }
}

impl AttackerPolicyParams {
    /// Defaults with the given variant.
    pub fn for_variant(variant: AttackerVariant) -> Self {
        AttackerPolicyParams {
            variant,
            ..AttackerPolicyParams::default()
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let check = |name: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(AgentError::Config(format!("invalid attacker params: {name}")))
            }
        };
        check("penalties must be >= 0", {
            self.contradiction_penalty >= 0
                && self.universe_violation_penalty >= 0
                && self.evasion_penalty >= 0
                && self.pivot_penalty >= 0
                && self.bluff_penalty >= 0
                && self.verify_bonus >= 0
        })?;
        check(
            "thresholds must sit in 0..=trust_cap",
            self.reveal_trust_threshold >= 0 && self.reveal_trust_threshold <= self.trust_cap,
        )?;
        check(
            "initial trust must sit in 0..=trust_cap",
            self.initial_trust >= 0 && self.initial_trust <= self.trust_cap,
        )?;
        check(
            "trust_cap must fit the message trust scale",
            self.trust_cap <= TRUST_MAX,
        )?;
        check(
            "bluff_prob must sit in 0..=1",
            (0.0..=1.0).contains(&self.bluff_prob),
        )?;
        Ok(())
    }
}

/// Scripted defender play styles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenderKind {
    /// Always declines.
    Refuse,
    /// Tells its own wrong story without modeling the attacker at all.
    NaiveMislead,
    /// Probes for the prior, then commits to a consistent decoy.
    TomDoubleAgent,
    /// White-box instrument: plays the double-agent strategy with exact
    /// knowledge of the attacker's trust table, deterministically.
    Oracle,
    /// Instrument for the bluffing attacker: adopts any challenged value.
    PivotOnChallenge,
}

impl FromStr for DefenderKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "refuse" => Ok(DefenderKind::Refuse),
            "naive_mislead" => Ok(DefenderKind::NaiveMislead),
            "tom_double_agent" => Ok(DefenderKind::TomDoubleAgent),
            "oracle" => Ok(DefenderKind::Oracle),
            "pivot_on_challenge" => Ok(DefenderKind::PivotOnChallenge),
            other => Err(format!("unknown defender kind `{other}`")),
        }
    }
}

/// Declarative agent selection, as written in agents-config files and
/// recorded in trajectory files. `kind` is a scripted name (`base`,
/// `refuse`, ...) or `llm:<model>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
}

impl AgentSpec {
    pub fn scripted(kind: &str) -> Self {
        AgentSpec {
            kind: kind.to_string(),
            template: None,
            params: None,
        }
    }

    pub fn is_llm(&self) -> bool {
        self.kind.starts_with("llm:")
    }

    fn scripted_attacker_params(&self) -> Result<AttackerPolicyParams, AgentError> {
        let variant = AttackerVariant::from_str(&self.kind).map_err(AgentError::Config)?;
        let mut params = match &self.params {
            Some(value) => serde_json::from_value::<AttackerPolicyParams>(value.clone())
                .map_err(|e| AgentError::Config(format!("attacker params: {e}")))?,
            None => AttackerPolicyParams::default(),
        };
        params.variant = variant;
        params.validate()?;
        Ok(params)
    }

    /// Resolve the trust-table parameters this spec implies, for white-box
    /// defenders and for validation. Errors on unknown kinds.
    pub fn attacker_params(&self) -> Result<AttackerPolicyParams, AgentError> {
        if self.is_llm() {
            // white-box opponents of an LLM attacker fall back to defaults
            Ok(AttackerPolicyParams::default())
        } else {
            self.scripted_attacker_params()
        }
    }

    /// Check the spec without building an agent (fail fast in batch setup).
    pub fn validate_attacker(&self) -> Result<(), AgentError> {
        if self.is_llm() {
            if self.template.is_none() {
                return Err(AgentError::Config("llm agent needs a template".into()));
            }
            return Ok(());
        }
        self.scripted_attacker_params().map(|_| ())
    }

    /// Check a defender spec without building an agent.
    pub fn validate_defender(&self) -> Result<(), AgentError> {
        if self.is_llm() {
            if self.template.is_none() {
                return Err(AgentError::Config("llm agent needs a template".into()));
            }
            return Ok(());
        }
        DefenderKind::from_str(&self.kind)
            .map(|_| ())
            .map_err(AgentError::Config)
    }
}

/// Build an attacker for one dialogue. Scripted agents are seeded and own
/// their per-dialogue state; LLM agents read endpoint settings from the
/// environment.
pub fn build_attacker(
    spec: &AgentSpec,
    scenario: &Scenario,
    seed: u64,
) -> Result<Box<dyn AttackerAgent>, AgentError> {
    let ctx = AttackerContext::from_scenario(scenario);
    if let Some(model) = spec.kind.strip_prefix("llm:") {
        let template = spec
            .template
            .as_deref()
            .ok_or_else(|| AgentError::Config("llm agent needs a template".into()))?;
        let endpoint = EndpointConfig::from_env(model)?;
        return Ok(Box::new(LlmAgent::attacker_over_http(
            scenario, template, endpoint,
        )?));
    }
    let params = spec.scripted_attacker_params()?;
    Ok(Box::new(ScriptedAttacker::new(ctx, params, seed)))
}

/// Build a defender for one dialogue. `opponent` carries the attacker's
/// trust table; only white-box kinds may read it.
pub fn build_defender(
    spec: &AgentSpec,
    scenario: &Scenario,
    seed: u64,
    opponent: &AttackerPolicyParams,
) -> Result<Box<dyn DefenderAgent>, AgentError> {
    let ctx = DefenderContext::from_scenario(scenario);
    if let Some(model) = spec.kind.strip_prefix("llm:") {
        let template = spec
            .template
            .as_deref()
            .ok_or_else(|| AgentError::Config("llm agent needs a template".into()))?;
        let endpoint = EndpointConfig::from_env(model)?;
        return Ok(Box::new(LlmAgent::defender_over_http(
            scenario, template, endpoint,
        )?));
    }
    let kind = DefenderKind::from_str(&spec.kind).map_err(AgentError::Config)?;
    Ok(match kind {
        DefenderKind::Refuse => Box::new(RefuseDefender::new(ctx)),
        DefenderKind::NaiveMislead => Box::new(NaiveMisleadDefender::new(ctx, seed, false)),
        DefenderKind::PivotOnChallenge => Box::new(NaiveMisleadDefender::new(ctx, seed, true)),
        DefenderKind::TomDoubleAgent => Box::new(DoubleAgentDefender::heuristic(ctx, seed)),
        DefenderKind::Oracle => Box::new(DoubleAgentDefender::oracle(ctx, opponent.clone())),
    })
}
