//! Core engine for an adversarial belief-steering game: hierarchical-universe
//! scenarios, the attacker/defender turn protocol, scripted and LLM-backed
//! agents, batch rollouts, and reward/metrics judging.
//!
//! The crate is organized around the game loop:
//!
//! - [`universe`] / [`scenario`] build and validate the shared entity tree
//!   and balanced scenario datasets;
//! - [`protocol`] defines the dual-channel messages (free text plus speech
//!   acts) and their public/private partition;
//! - [`agents`] provides the scripted reference policies and an HTTP adapter
//!   for external chat models;
//! - [`engine`] orchestrates dialogues and seeded batch rollouts;
//! - [`judge`] computes fooling/ToM rewards and aggregate reports;
//! - [`export`] emits trainer-facing (history, reward) pairs.

pub mod agents;
pub mod engine;
pub mod export;
pub mod judge;
pub mod lexicon;
pub mod llm_judge;
pub mod protocol;
pub mod scenario;
pub mod universe;

pub use engine::{replay, rollout_batch, run_dialogue, DialogueOptions, RolloutPlan, Trajectory};
pub use judge::{
    aggregate_metrics, fooling_reward, stepwise_tom_score, trajectory_tom_reward, JudgeConfig,
    MetricsReport, RewardRecord,
};
pub use protocol::{
    encode_message, parse_message, public_view, AttackerMessage, DefenderMessage, Message,
    PublicView, Role, Signal, SpeechAct,
};
pub use scenario::{
    generate_scenarios, mask_prior, read_scenarios, write_scenarios, Scenario, ScenarioConfig,
    Split,
};
pub use universe::{
    check_claim_consistency, decoy_paths, generate_universe, validate_universe, EntityId, Path,
    PartialPath, Universe, ValidationReport, Verdict,
};

use sha2::{Digest, Sha256};

/// Derive a child RNG seed from a canonical label. Stable across platforms
/// and releases, so recorded seeds replay anywhere.
pub fn derive_seed(label: &str) -> u64 {
    let digest = Sha256::digest(label.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is long enough"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed("a:b:0"), derive_seed("a:b:0"));
        assert_ne!(derive_seed("a:b:0"), derive_seed("a:b:1"));
    }
}
