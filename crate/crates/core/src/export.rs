//! Trainer-facing export: one (history, reward) pair per judged trajectory.

use serde::{Deserialize, Serialize};

use crate::engine::{Outcome, Trajectory};
use crate::judge::{judge_trajectory, JudgeConfig, JudgeError, RewardRecord};
use crate::protocol::{Role, SpeechAct};
use crate::scenario::Scenario;
use std::collections::HashMap;

/// One message of the exported history, public channel only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryItem {
    pub role: Role,
    pub text: String,
    pub acts: Vec<SpeechAct>,
}

/// One trainer example.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainerPair {
    pub scenario_id: String,
    pub rollout_index: usize,
    pub history: Vec<HistoryItem>,
    pub outcome: Outcome,
    pub num_turns: usize,
    pub reward: RewardRecord,
}

/// Judge and flatten trajectories into trainer pairs. Error trajectories are
/// skipped and counted.
pub fn export_trainer_pairs(
    trajectories: &[Trajectory],
    scenarios: &[Scenario],
    config: &JudgeConfig,
) -> Result<(Vec<TrainerPair>, usize), JudgeError> {
    let by_id: HashMap<&str, &Scenario> = scenarios.iter().map(|s| (s.id.as_str(), s)).collect();
    let missing: Vec<String> = trajectories
        .iter()
        .filter(|t| !by_id.contains_key(t.scenario_id.as_str()))
        .map(|t| t.scenario_id.clone())
        .collect();
    if !missing.is_empty() {
        let mut ids = missing;
        ids.sort();
        ids.dedup();
        return Err(JudgeError::UnknownScenarios(ids));
    }

    let mut pairs = Vec::new();
    let mut skipped = 0;
    for traj in trajectories {
        let scenario = by_id[traj.scenario_id.as_str()];
        let reward = match judge_trajectory(traj, scenario, config) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("export skips {}#{}: {e}", traj.scenario_id, traj.rollout_index);
                skipped += 1;
                continue;
            }
        };
        let mut history = Vec::new();
        for turn in &traj.turns {
            history.push(HistoryItem {
                role: Role::Attacker,
                text: turn.attacker.prompt.clone(),
                acts: turn.attacker.acts.clone(),
            });
            if let Some(d) = &turn.defender {
                history.push(HistoryItem {
                    role: Role::Defender,
                    text: d.reply.clone(),
                    acts: d.acts.clone(),
                });
            }
        }
        pairs.push(TrainerPair {
            scenario_id: traj.scenario_id.clone(),
            rollout_index: traj.rollout_index,
            history,
            outcome: traj.outcome,
            num_turns: traj.num_turns,
            reward,
        });
    }
    Ok((pairs, skipped))
}

/// Write trainer pairs as JSON lines.
pub fn write_trainer_pairs<W: std::io::Write>(
    mut w: W,
    pairs: &[TrainerPair],
) -> std::io::Result<()> {
    for p in pairs {
        let line = serde_json::to_string(p)?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}
