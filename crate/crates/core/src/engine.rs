//! Dialogue orchestration and seeded batch rollouts.
//!
//! The loop: the attacker steps; on a terminal signal the dialogue ends with
//! no defender reply that turn, otherwise the defender steps and the turn
//! counter advances. Only public views are ever routed between the agents;
//! the recorded trajectory keeps full messages because the log is trusted —
//! it is live routing that must be redacted.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{
    build_attacker, build_defender, AgentError, AgentSpec, AttackerAgent, DefenderAgent,
};
use crate::derive_seed;
use crate::judge::RewardRecord;
use crate::protocol::{public_view, AttackerMessage, DefenderMessage, Message, SpeechAct};
use crate::scenario::Scenario;

/// How a dialogue ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    AttackSuccessful,
    DefenderDetected,
    MaxTurns,
    /// The attacker side failed (transport or persistent parse failure);
    /// excluded from metrics and counted separately.
    AgentError,
}

/// One turn: an attacker message and, unless the turn was terminal, the
/// defender's reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub attacker: AttackerMessage,
    pub defender: Option<DefenderMessage>,
}

/// Full record of one dialogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub scenario_id: String,
    pub rollout_index: usize,
    pub seed: u64,
    pub attacker_spec: AgentSpec,
    pub defender_spec: AgentSpec,
    pub max_turns: usize,
    pub outcome: Outcome,
    pub num_turns: usize,
    pub message_count: usize,
    pub turns: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardRecord>,
}

impl Trajectory {
    /// Structural invariant check used by `validate --traj`. Returns one
    /// line per violation.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.num_turns != self.turns.len() {
            out.push(format!(
                "num_turns {} disagrees with {} recorded turns",
                self.num_turns,
                self.turns.len()
            ));
        }
        let messages: usize = self
            .turns
            .iter()
            .map(|t| 1 + t.defender.is_some() as usize)
            .sum();
        if self.message_count != messages {
            out.push(format!(
                "message_count {} disagrees with {} recorded messages",
                self.message_count, messages
            ));
        }
        if self.num_turns > self.max_turns {
            out.push(format!(
                "{} turns exceed the {}-turn cap",
                self.num_turns, self.max_turns
            ));
        }
        let terminal = matches!(
            self.outcome,
            Outcome::AttackSuccessful | Outcome::DefenderDetected
        );
        if terminal && self.error.is_none() {
            if self.message_count != 2 * self.num_turns - 1 {
                out.push(format!(
                    "terminated dialogue should carry 2T-1 = {} messages, has {}",
                    2 * self.num_turns - 1,
                    self.message_count
                ));
            }
            if let Some(last) = self.turns.last() {
                if last.defender.is_some() {
                    out.push("terminal turn carries a defender reply".to_string());
                }
                if !last.reflection_is_terminal() {
                    out.push("terminal turn lacks a terminal signal".to_string());
                }
            } else {
                out.push("terminated dialogue has no turns".to_string());
            }
        }
        if self.outcome == Outcome::MaxTurns && self.message_count != 2 * self.num_turns {
            out.push(format!(
                "truncated dialogue should carry 2T = {} messages, has {}",
                2 * self.num_turns,
                self.message_count
            ));
        }
        let end_count = self
            .turns
            .iter()
            .flat_map(|t| t.attacker.acts.iter())
            .filter(|a| matches!(a, SpeechAct::End { .. }))
            .count();
        match self.outcome {
            Outcome::AttackSuccessful | Outcome::DefenderDetected if self.error.is_none() => {
                if end_count != 1 {
                    out.push(format!("expected exactly one end act, found {end_count}"));
                }
            }
            Outcome::MaxTurns if end_count != 0 => {
                out.push(format!("truncated dialogue carries {end_count} end acts"));
            }
            _ => {}
        }
        for (i, turn) in self.turns.iter().enumerate() {
            let trust = turn.attacker.reflection.trust;
            if !(0..=5).contains(&trust) {
                out.push(format!("turn {}: trust {trust} out of range", i + 1));
            }
        }
        out
    }
}

impl Turn {
    fn reflection_is_terminal(&self) -> bool {
        self.attacker.reflection.signal.is_terminal()
    }
}

/// Per-dialogue settings and labels recorded in the trajectory.
#[derive(Debug, Clone)]
pub struct DialogueOptions {
    pub max_turns: usize,
    pub seed: u64,
    pub rollout_index: usize,
    pub attacker_spec: AgentSpec,
    pub defender_spec: AgentSpec,
}

impl DialogueOptions {
    pub fn new(seed: u64, attacker_spec: AgentSpec, defender_spec: AgentSpec) -> Self {
        DialogueOptions {
            max_turns: 15,
            seed,
            rollout_index: 0,
            attacker_spec,
            defender_spec,
        }
    }
}

/// Every payload the engine routed, by destination. Tests assert that no
/// reflection content ever shows up here.
#[derive(Debug, Clone, Default)]
pub struct RoutingAudit {
    pub to_attacker: Vec<String>,
    pub to_defender: Vec<String>,
}

/// Run one dialogue and record who was shown what.
pub fn run_dialogue_audited(
    scenario: &Scenario,
    attacker: &mut dyn AttackerAgent,
    defender: &mut dyn DefenderAgent,
    opts: &DialogueOptions,
) -> (Trajectory, RoutingAudit) {
    let mut audit = RoutingAudit::default();
    let mut turns: Vec<Turn> = Vec::new();
    let mut outcome = Outcome::MaxTurns;
    let mut error = None;
    let mut incoming: Option<crate::protocol::PublicView> = None;

    for t in 1..=opts.max_turns {
        let atk_msg = match attacker.step(incoming.as_ref()) {
            Ok(msg) => msg,
            Err(e) => {
                outcome = Outcome::AgentError;
                error = Some(format!("attacker: {e}"));
                break;
            }
        };
        let signal = atk_msg.reflection.signal;
        if signal.is_terminal() {
            outcome = match signal {
                crate::protocol::Signal::AttackSuccessful => Outcome::AttackSuccessful,
                _ => Outcome::DefenderDetected,
            };
            turns.push(Turn {
                attacker: atk_msg,
                defender: None,
            });
            break;
        }

        let atk_view = public_view(&Message::Attacker(atk_msg.clone()));
        audit
            .to_defender
            .push(serde_json::to_string(&atk_view).expect("views serialize"));
        match defender.step(&atk_view) {
            Ok(def_msg) => {
                let def_view = public_view(&Message::Defender(def_msg.clone()));
                turns.push(Turn {
                    attacker: atk_msg,
                    defender: Some(def_msg),
                });
                if t == opts.max_turns {
                    outcome = Outcome::MaxTurns;
                    break;
                }
                audit
                    .to_attacker
                    .push(serde_json::to_string(&def_view).expect("views serialize"));
                incoming = Some(def_view);
            }
            Err(e) => {
                // a failing defender loses the dialogue
                outcome = Outcome::DefenderDetected;
                error = Some(format!("defender: {e}"));
                turns.push(Turn {
                    attacker: atk_msg,
                    defender: None,
                });
                break;
            }
        }
    }

    let num_turns = turns.len();
    let message_count = turns
        .iter()
        .map(|t| 1 + t.defender.is_some() as usize)
        .sum();
    (
        Trajectory {
            scenario_id: scenario.id.clone(),
            rollout_index: opts.rollout_index,
            seed: opts.seed,
            attacker_spec: opts.attacker_spec.clone(),
            defender_spec: opts.defender_spec.clone(),
            max_turns: opts.max_turns,
            outcome,
            num_turns,
            message_count,
            turns,
            error,
            reward: None,
        },
        audit,
    )
}

/// Run one dialogue.
pub fn run_dialogue(
    scenario: &Scenario,
    attacker: &mut dyn AttackerAgent,
    defender: &mut dyn DefenderAgent,
    opts: &DialogueOptions,
) -> Trajectory {
    run_dialogue_audited(scenario, attacker, defender, opts).0
}

/// Batch settings for [`rollout_batch`].
#[derive(Debug, Clone)]
pub struct RolloutPlan {
    pub k_per_scenario: usize,
    pub max_turns: usize,
    pub seed: u64,
    /// 0 lets rayon pick.
    pub workers: usize,
}

impl Default for RolloutPlan {
    fn default() -> Self {
        RolloutPlan {
            k_per_scenario: 1,
            max_turns: 15,
            seed: 0,
            workers: 0,
        }
    }
}

/// Deterministic seed for one dialogue within a batch.
pub fn dialogue_seed(batch_seed: u64, scenario_id: &str, rollout_index: usize) -> u64 {
    derive_seed(&format!("{batch_seed}:{scenario_id}:{rollout_index}"))
}

fn build_pair(
    attacker_spec: &AgentSpec,
    defender_spec: &AgentSpec,
    scenario: &Scenario,
    seed: u64,
    opponent: &crate::agents::AttackerPolicyParams,
) -> Result<(Box<dyn AttackerAgent>, Box<dyn DefenderAgent>), AgentError> {
    let attacker = build_attacker(attacker_spec, scenario, derive_seed(&format!("{seed}:attacker")))?;
    let defender = build_defender(
        defender_spec,
        scenario,
        derive_seed(&format!("{seed}:defender")),
        opponent,
    )?;
    Ok((attacker, defender))
}

/// Re-run a recorded dialogue from its specs and seed. With scripted agents
/// the result is byte-identical to the recording.
pub fn replay(scenario: &Scenario, recorded: &Trajectory) -> Result<Trajectory, AgentError> {
    let opponent = recorded.attacker_spec.attacker_params()?;
    let (mut attacker, mut defender) = build_pair(
        &recorded.attacker_spec,
        &recorded.defender_spec,
        scenario,
        recorded.seed,
        &opponent,
    )?;
    let opts = DialogueOptions {
        max_turns: recorded.max_turns,
        seed: recorded.seed,
        rollout_index: recorded.rollout_index,
        attacker_spec: recorded.attacker_spec.clone(),
        defender_spec: recorded.defender_spec.clone(),
    };
    Ok(run_dialogue(scenario, attacker.as_mut(), defender.as_mut(), &opts))
}

/// Roll out `k` dialogues per scenario. Output order is (scenario, index)
/// regardless of worker scheduling; per-dialogue agent failures become
/// error-marked trajectories rather than batch failures.
pub fn rollout_batch(
    scenarios: &[Scenario],
    attacker_spec: &AgentSpec,
    defender_spec: &AgentSpec,
    plan: &RolloutPlan,
) -> Result<Vec<Trajectory>, AgentError> {
    attacker_spec.validate_attacker()?;
    defender_spec.validate_defender()?;
    let opponent_params = attacker_spec.attacker_params()?;

    let jobs: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|s| (0..plan.k_per_scenario).map(move |k| (s, k)))
        .collect();

    let run_job = |&(scenario_index, rollout_index): &(usize, usize)| -> Trajectory {
        let scenario = &scenarios[scenario_index];
        let seed = dialogue_seed(plan.seed, &scenario.id, rollout_index);
        let opts = DialogueOptions {
            max_turns: plan.max_turns,
            seed,
            rollout_index,
            attacker_spec: attacker_spec.clone(),
            defender_spec: defender_spec.clone(),
        };
        let built = build_pair(attacker_spec, defender_spec, scenario, seed, &opponent_params);
        match built {
            Ok((mut attacker, mut defender)) => {
                run_dialogue(scenario, attacker.as_mut(), defender.as_mut(), &opts)
            }
            Err(e) => Trajectory {
                scenario_id: scenario.id.clone(),
                rollout_index,
                seed,
                attacker_spec: attacker_spec.clone(),
                defender_spec: defender_spec.clone(),
                max_turns: plan.max_turns,
                outcome: Outcome::AgentError,
                num_turns: 0,
                message_count: 0,
                turns: Vec::new(),
                error: Some(format!("build: {e}")),
                reward: None,
            },
        }
    };

    let trajectories = if plan.workers == 1 {
        jobs.iter().map(run_job).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(plan.workers)
            .build()
            .map_err(|e| AgentError::Config(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(run_job).collect::<Vec<_>>())
    };
    Ok(trajectories)
}

/// Serialize trajectories as JSON lines.
pub fn write_trajectories<W: std::io::Write>(
    mut w: W,
    trajectories: &[Trajectory],
) -> std::io::Result<()> {
    for t in trajectories {
        let line = serde_json::to_string(t)?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Read a trajectory JSONL stream.
pub fn read_trajectories<R: std::io::BufRead>(r: R) -> Result<Vec<Trajectory>, String> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| format!("line {}: {e}", i + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Trajectory =
            serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?;
        out.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentSpec;
    use crate::scenario::{generate_scenarios, ScenarioConfig, Split};

    fn scenarios(n: usize) -> Vec<Scenario> {
        generate_scenarios(17, n, &ScenarioConfig::default()).unwrap()
    }

    fn plan(seed: u64, k: usize) -> RolloutPlan {
        RolloutPlan {
            k_per_scenario: k,
            max_turns: 15,
            seed,
            workers: 1,
        }
    }

    #[test]
    fn refuse_match_detects_at_turn_six() {
        let s = &scenarios(3)[0];
        let trajs = rollout_batch(
            std::slice::from_ref(s),
            &AgentSpec::scripted("base"),
            &AgentSpec::scripted("refuse"),
            &plan(1, 1),
        )
        .unwrap();
        let t = &trajs[0];
        assert_eq!(t.outcome, Outcome::DefenderDetected);
        assert_eq!(t.num_turns, 6);
        assert_eq!(t.message_count, 11);
        assert!(t.turns.last().unwrap().defender.is_none());
        assert!(t.check_invariants().is_empty(), "{:?}", t.check_invariants());
    }

    #[test]
    fn successful_attack_has_odd_message_count() {
        // base attacker vs naive misleader on a no-prior scenario: three
        // claims go through, success on turn 4, 7 messages
        let all = scenarios(3);
        let s = all
            .iter()
            .find(|s| s.attacker_prior.known_count() == 0)
            .unwrap();
        let trajs = rollout_batch(
            std::slice::from_ref(s),
            &AgentSpec::scripted("base"),
            &AgentSpec::scripted("naive_mislead"),
            &plan(2, 1),
        )
        .unwrap();
        let t = &trajs[0];
        assert_eq!(t.outcome, Outcome::AttackSuccessful);
        assert_eq!(t.num_turns, 4);
        assert_eq!(t.message_count, 7);
        assert!(t.check_invariants().is_empty(), "{:?}", t.check_invariants());
    }

    #[test]
    fn max_turns_one_truncates_after_defender_reply() {
        let s = &scenarios(3)[0];
        let mut p = plan(3, 1);
        p.max_turns = 1;
        let trajs = rollout_batch(
            std::slice::from_ref(s),
            &AgentSpec::scripted("base"),
            &AgentSpec::scripted("tom_double_agent"),
            &p,
        )
        .unwrap();
        let t = &trajs[0];
        assert_eq!(t.outcome, Outcome::MaxTurns);
        assert_eq!(t.num_turns, 1);
        assert_eq!(t.message_count, 2);
        assert!(t.check_invariants().is_empty());
    }

    #[test]
    fn batch_counts_and_order() {
        let all = scenarios(9);
        let eval: Vec<Scenario> = all.into_iter().filter(|s| s.split == Split::Eval).collect();
        let k = 2;
        let trajs = rollout_batch(
            &eval,
            &AgentSpec::scripted("base"),
            &AgentSpec::scripted("refuse"),
            &plan(5, k),
        )
        .unwrap();
        assert_eq!(trajs.len(), eval.len() * k);
        for (i, t) in trajs.iter().enumerate() {
            assert_eq!(t.scenario_id, eval[i / k].id);
            assert_eq!(t.rollout_index, i % k);
        }
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let all = scenarios(6);
        let serial = rollout_batch(
            &all,
            &AgentSpec::scripted("bluffing"),
            &AgentSpec::scripted("tom_double_agent"),
            &plan(7, 2),
        )
        .unwrap();
        let mut parallel_plan = plan(7, 2);
        parallel_plan.workers = 4;
        let parallel = rollout_batch(
            &all,
            &AgentSpec::scripted("bluffing"),
            &AgentSpec::scripted("tom_double_agent"),
            &parallel_plan,
        )
        .unwrap();
        let ser = |ts: &[Trajectory]| {
            ts.iter()
                .map(|t| serde_json::to_string(t).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(ser(&serial), ser(&parallel));
    }

    #[test]
    fn replay_is_byte_identical() {
        let all = scenarios(3);
        for s in &all {
            let a = rollout_batch(
                std::slice::from_ref(s),
                &AgentSpec::scripted("bluffing"),
                &AgentSpec::scripted("naive_mislead"),
                &plan(11, 1),
            )
            .unwrap();
            let b = rollout_batch(
                std::slice::from_ref(s),
                &AgentSpec::scripted("bluffing"),
                &AgentSpec::scripted("naive_mislead"),
                &plan(11, 1),
            )
            .unwrap();
            assert_eq!(
                serde_json::to_string(&a[0]).unwrap(),
                serde_json::to_string(&b[0]).unwrap()
            );
        }
    }

    #[test]
    fn trajectory_jsonl_round_trip() {
        let all = scenarios(3);
        let trajs = rollout_batch(
            &all,
            &AgentSpec::scripted("base"),
            &AgentSpec::scripted("tom_double_agent"),
            &plan(13, 1),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &trajs).unwrap();
        let back = read_trajectories(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(trajs, back);
    }

    #[test]
    fn failing_defender_loses_the_dialogue() {
        struct BrokenDefender;
        impl DefenderAgent for BrokenDefender {
            fn step(
                &mut self,
                _: &crate::protocol::PublicView,
            ) -> Result<crate::protocol::DefenderMessage, AgentError> {
                Err(AgentError::Transport("boom".into()))
            }
        }
        let s = &scenarios(3)[0];
        let mut attacker = crate::agents::ScriptedAttacker::new(
            crate::agents::AttackerContext::from_scenario(s),
            crate::agents::AttackerPolicyParams::default(),
            1,
        );
        let mut defender = BrokenDefender;
        let opts = DialogueOptions::new(
            1,
            AgentSpec::scripted("base"),
            AgentSpec::scripted("refuse"),
        );
        let t = run_dialogue(s, &mut attacker, &mut defender, &opts);
        assert_eq!(t.outcome, Outcome::DefenderDetected);
        assert!(t.error.as_deref().unwrap().contains("defender"));
    }

    #[test]
    fn failing_attacker_is_error_marked() {
        struct BrokenAttacker;
        impl AttackerAgent for BrokenAttacker {
            fn step(
                &mut self,
                _: Option<&crate::protocol::PublicView>,
            ) -> Result<crate::protocol::AttackerMessage, AgentError> {
                Err(AgentError::Unparsable {
                    attempts: 4,
                    last_error: "nonsense".into(),
                })
            }
        }
        let s = &scenarios(3)[0];
        let mut attacker = BrokenAttacker;
        let mut defender = crate::agents::RefuseDefender::new(
            crate::agents::DefenderContext::from_scenario(s),
        );
        let opts = DialogueOptions::new(
            1,
            AgentSpec::scripted("base"),
            AgentSpec::scripted("refuse"),
        );
        let t = run_dialogue(s, &mut attacker, &mut defender, &opts);
        assert_eq!(t.outcome, Outcome::AgentError);
        assert_eq!(t.num_turns, 0);
    }
}
