//! Scripted defender policies.
//!
//! `RefuseDefender` and `NaiveMisleadDefender` are the weak baselines the
//! trust table is calibrated against. `DoubleAgentDefender` plays the full
//! probe-then-steer strategy, either heuristically (black-box) or as a
//! deterministic white-box oracle that mirrors the attacker's exact trust
//! table. The pivot-on-challenge instrument exists to exercise the bluffing
//! attacker's fabrication detector.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{AgentError, AttackerPolicyParams, DefenderAgent, DefenderContext};
use crate::protocol::{
    AnswerValue, DefenderMessage, DefenderReflection, PublicView, Role, SpeechAct, SCHEMA_VERSION,
};
use crate::universe::EntityId;

fn clamp_trust(v: i32) -> i32 {
    v.clamp(0, 5)
}

fn render_reply(ctx: &DefenderContext, acts: &[SpeechAct]) -> String {
    let target = &ctx.target_name;
    let mut parts = Vec::new();
    for act in acts {
        match act {
            SpeechAct::AskPrior => parts.push(format!(
                "Before I go into details, could you share what you already know about {target}?"
            )),
            SpeechAct::Claim { level, entity } => {
                let level_name = if *level >= 1 && *level <= ctx.universe.depth() {
                    ctx.universe.level_name(*level).to_string()
                } else {
                    format!("level-{level}")
                };
                parts.push(format!("{target} is in the {entity} {level_name}."));
            }
            SpeechAct::Answer { value } => parts.push(match value {
                AnswerValue::Yes => "Yes, that's right.".to_string(),
                AnswerValue::No => "No, that's not correct.".to_string(),
                AnswerValue::Entity(e) => format!("As far as I know it's {e}."),
            }),
            SpeechAct::Refuse => parts.push("I'm sorry, I can't share that.".to_string()),
            _ => {}
        }
    }
    parts.join(" ")
}

fn message(
    ctx: &DefenderContext,
    tom_estimate: Vec<Option<String>>,
    prior_estimate: Vec<Option<String>>,
    trust_estimate: i32,
    note: String,
    acts: Vec<SpeechAct>,
) -> DefenderMessage {
    DefenderMessage {
        schema: SCHEMA_VERSION.to_string(),
        role: Role::Defender,
        reflection: DefenderReflection {
            tom_estimate,
            prior_estimate,
            trust_estimate: clamp_trust(trust_estimate),
            note,
        },
        reply: render_reply(ctx, &acts),
        acts,
    }
}

/// Always declines. Its trust estimate just counts down its own refusals.
pub struct RefuseDefender {
    ctx: DefenderContext,
    refusals: usize,
}

impl RefuseDefender {
    pub fn new(ctx: DefenderContext) -> Self {
        RefuseDefender { ctx, refusals: 0 }
    }
}

impl DefenderAgent for RefuseDefender {
    fn step(&mut self, _incoming: &PublicView) -> Result<DefenderMessage, AgentError> {
        let depth = self.ctx.universe.depth();
        let est = 5 - self.refusals as i32;
        self.refusals += 1;
        Ok(message(
            &self.ctx,
            vec![None; depth],
            vec![None; depth],
            est,
            "declining as always".to_string(),
            vec![SpeechAct::Refuse],
        ))
    }
}

/// Tells one internally consistent wrong story, rooted at a wrong top-level
/// pick, without ever modeling what the attacker knows. With
/// `adopt_challenges` it additionally swallows any challenged value — the
/// pivot-on-challenge instrument.
pub struct NaiveMisleadDefender {
    ctx: DefenderContext,
    rng: ChaCha8Rng,
    adopt_challenges: bool,
    story: Vec<Option<EntityId>>,
    claimed: Vec<bool>,
    reask_events: usize,
    challenges_seen: usize,
}

impl NaiveMisleadDefender {
    pub fn new(ctx: DefenderContext, seed: u64, adopt_challenges: bool) -> Self {
        let depth = ctx.universe.depth();
        NaiveMisleadDefender {
            ctx,
            rng: ChaCha8Rng::seed_from_u64(seed),
            adopt_challenges,
            story: vec![None; depth],
            claimed: vec![false; depth],
            reask_events: 0,
            challenges_seen: 0,
        }
    }

    /// Instantiate the wrong story from the root down to `level`: a uniform
    /// non-truth pick at the top, then uniform children below it. Each pick
    /// avoids the true value at its level, so the whole story is wrong
    /// everywhere yet chain-consistent.
    fn ensure_story(&mut self, level: usize) {
        let u = self.ctx.universe.clone();
        for l in 1..=level.min(u.depth()) {
            if self.story[l - 1].is_some() {
                continue;
            }
            let candidates: Vec<EntityId> = if l == 1 {
                u.roots()
                    .iter()
                    .copied()
                    .filter(|&id| id != self.ctx.ground_truth.at(1))
                    .collect()
            } else {
                let parent = self.story[l - 2].expect("story builds top-down");
                u.children(parent)
                    .iter()
                    .copied()
                    .filter(|&id| id != self.ctx.ground_truth.at(l))
                    .collect()
            };
            self.story[l - 1] = Some(candidates[self.rng.gen_range(0..candidates.len())]);
        }
    }

    fn story_name(&self, level: usize) -> String {
        self.ctx
            .universe
            .name(self.story[level - 1].expect("story instantiated"))
            .to_string()
    }
}

impl DefenderAgent for NaiveMisleadDefender {
    fn step(&mut self, incoming: &PublicView) -> Result<DefenderMessage, AgentError> {
        let u = self.ctx.universe.clone();
        let depth = u.depth();
        let mut acts = Vec::new();
        let mut notes = Vec::new();

        for act in &incoming.acts {
            match act {
                SpeechAct::Ask { level } => {
                    let level = *level;
                    if level < 1 || level > depth {
                        acts.push(SpeechAct::Refuse);
                        continue;
                    }
                    self.ensure_story(level);
                    if self.claimed[level - 1] {
                        self.reask_events += 1;
                        notes.push("asked again; repeating my story".to_string());
                    }
                    self.claimed[level - 1] = true;
                    acts.push(SpeechAct::Claim {
                        level,
                        entity: self.story_name(level),
                    });
                }
                SpeechAct::Verify { level, entity } => {
                    let level = *level;
                    if level < 1 || level > depth {
                        acts.push(SpeechAct::Answer {
                            value: AnswerValue::No,
                        });
                        continue;
                    }
                    self.ensure_story(level);
                    let yes = u.lookup(entity) == self.story[level - 1];
                    acts.push(SpeechAct::Answer {
                        value: if yes { AnswerValue::Yes } else { AnswerValue::No },
                    });
                }
                SpeechAct::Challenge { level, entity } => {
                    let level = *level;
                    self.challenges_seen += 1;
                    if level < 1 || level > depth {
                        acts.push(SpeechAct::Refuse);
                        continue;
                    }
                    self.ensure_story(level);
                    if self.adopt_challenges {
                        if let Some(id) = u.lookup(entity).filter(|&id| u.level_of(id) == level) {
                            self.story[level - 1] = Some(id);
                            // deeper picks no longer hang off the story; redo them lazily
                            for deeper in level..depth {
                                self.story[deeper] = None;
                                self.claimed[deeper] = false;
                            }
                            notes.push(format!("adopting {entity} as suggested"));
                        }
                    } else {
                        notes.push("holding firm on my story".to_string());
                    }
                    acts.push(SpeechAct::Claim {
                        level,
                        entity: self.story_name(level),
                    });
                }
                _ => {}
            }
        }

        if acts.is_empty() {
            acts.push(SpeechAct::Refuse);
        }

        let est = 5 - 2 * self.reask_events as i32 - self.challenges_seen as i32;
        Ok(message(
            &self.ctx,
            vec![None; depth],
            vec![None; depth],
            est,
            notes.join("; "),
            acts,
        ))
    }
}

/// Instrument alias: naive misleader that adopts every challenged value.
pub type PivotOnChallengeDefender = NaiveMisleadDefender;

/// The probe-then-steer double agent.
///
/// Turn 1 probes for prior knowledge and keeps probing while reveals keep
/// coming and estimated trust allows; then it commits to a decoy path that
/// matches everything the attacker is believed to know and is wrong
/// everywhere else, and answers from that story. Rejection evidence (a
/// re-ask of a claimed level, or a challenge) updates the prior estimate and
/// forces a re-selection.
pub struct DoubleAgentDefender {
    ctx: DefenderContext,
    /// `None` in oracle mode: deterministic picks, exact trust mirror.
    rng: Option<ChaCha8Rng>,
    opponent: AttackerPolicyParams,
    est_prior: Vec<Option<EntityId>>,
    rejected: Vec<Vec<EntityId>>,
    decoy: Option<Vec<EntityId>>,
    probing: bool,
    trust_est: i32,
    claimed: Vec<Option<EntityId>>,
    accepted: Vec<Option<EntityId>>,
    last_claim_levels: Vec<usize>,
    refuse_fallback: bool,
    turn: usize,
}

impl DoubleAgentDefender {
    /// Black-box double agent mirroring the default trust table.
    pub fn heuristic(ctx: DefenderContext, seed: u64) -> Self {
        Self::build(ctx, Some(ChaCha8Rng::seed_from_u64(seed)), AttackerPolicyParams::default())
    }

    /// White-box oracle: deterministic play against a known trust table.
    pub fn oracle(ctx: DefenderContext, opponent: AttackerPolicyParams) -> Self {
        Self::build(ctx, None, opponent)
    }

    fn build(ctx: DefenderContext, rng: Option<ChaCha8Rng>, opponent: AttackerPolicyParams) -> Self {
        let depth = ctx.universe.depth();
        DoubleAgentDefender {
            ctx,
            rng,
            trust_est: opponent.initial_trust,
            opponent,
            est_prior: vec![None; depth],
            rejected: vec![Vec::new(); depth],
            decoy: None,
            probing: true,
            claimed: vec![None; depth],
            accepted: vec![None; depth],
            last_claim_levels: Vec::new(),
            refuse_fallback: false,
            turn: 0,
        }
    }

    fn ensure_decoy(&mut self) {
        if self.decoy.is_some() || self.refuse_fallback {
            return;
        }
        let u = &self.ctx.universe;
        let depth = u.depth();
        let candidates: Vec<Vec<EntityId>> = u
            .leaf_paths()
            .into_iter()
            .filter(|p| {
                (1..=depth).all(|l| {
                    let v = p.at(l);
                    let est_ok = match self.est_prior[l - 1] {
                        Some(known) => v == known,
                        None => v != self.ctx.ground_truth.at(l),
                    };
                    est_ok && !self.rejected[l - 1].contains(&v)
                })
            })
            .map(|p| p.values().to_vec())
            .collect();
        if candidates.is_empty() {
            log::warn!("decoy set exhausted; falling back to refusals");
            self.refuse_fallback = true;
            return;
        }
        let pick = match &mut self.rng {
            Some(rng) => rng.gen_range(0..candidates.len()),
            None => 0,
        };
        self.decoy = Some(candidates[pick].clone());
    }

    fn decoy_at(&self, level: usize) -> EntityId {
        self.decoy.as_ref().expect("decoy committed")[level - 1]
    }

    fn keep_probing(&self) -> bool {
        if self.rng.is_none() {
            // oracle: probe exactly while the attacker will honor it
            self.trust_est >= self.opponent.reveal_trust_threshold
        } else {
            self.trust_est > 2
        }
    }

    fn estimates(&self) -> (Vec<Option<String>>, Vec<Option<String>>) {
        let u = &self.ctx.universe;
        let prior: Vec<Option<String>> = self
            .est_prior
            .iter()
            .map(|s| s.map(|id| u.name(id).to_string()))
            .collect();
        let tom: Vec<Option<String>> = self
            .est_prior
            .iter()
            .zip(&self.accepted)
            .map(|(p, a)| p.or(*a).map(|id| u.name(id).to_string()))
            .collect();
        (tom, prior)
    }
}

impl DefenderAgent for DoubleAgentDefender {
    fn step(&mut self, incoming: &PublicView) -> Result<DefenderMessage, AgentError> {
        self.turn += 1;
        let u = self.ctx.universe.clone();
        let depth = u.depth();
        let mut notes = Vec::new();

        let mut asked: Vec<usize> = Vec::new();
        let mut verifies: Vec<(usize, String)> = Vec::new();
        let mut challenge: Option<(usize, String)> = None;
        let mut got_reveal = false;

        for act in &incoming.acts {
            match act {
                SpeechAct::RevealPrior { level, entity } => {
                    if let Some(id) = u.lookup(entity).filter(|&id| u.level_of(id) == *level) {
                        self.est_prior[*level - 1] = Some(id);
                        got_reveal = true;
                        notes.push(format!("attacker already knows {entity}"));
                    }
                }
                SpeechAct::Ask { level } if *level >= 1 && *level <= depth => asked.push(*level),
                SpeechAct::Verify { level, entity } if *level >= 1 && *level <= depth => {
                    verifies.push((*level, entity.clone()))
                }
                SpeechAct::Challenge { level, entity } if *level >= 1 && *level <= depth => {
                    challenge = Some((*level, entity.clone()))
                }
                _ => {}
            }
        }

        // Rejection evidence: a re-ask of a level we already claimed means
        // the claim bounced off prior knowledge. The attacker's prior agrees
        // with the truth, so the best estimate for that level is the truth
        // itself.
        for &l in &asked {
            if let Some(v) = self.claimed[l - 1] {
                self.rejected[l - 1].push(v);
                self.est_prior[l - 1] = Some(self.ctx.ground_truth.at(l));
                self.accepted[l - 1] = None;
                self.claimed[l - 1] = None;
                self.decoy = None;
                self.trust_est -= self.opponent.contradiction_penalty;
                notes.push(format!(
                    "my {} claim bounced; they must know that level",
                    u.level_name(l)
                ));
            }
        }

        // A challenge asserts knowledge: fold the asserted value into the
        // estimate and drop whatever story conflicted with it.
        if let Some((l, e)) = &challenge {
            if let Some(id) = u.lookup(e).filter(|&id| u.level_of(id) == *l) {
                self.est_prior[*l - 1] = Some(id);
            }
            if let Some(v) = self.claimed[*l - 1] {
                self.rejected[*l - 1].push(v);
                self.accepted[*l - 1] = None;
                self.claimed[*l - 1] = None;
            }
            self.decoy = None;
            self.trust_est -= 1;
            notes.push(format!("challenged on {}; adjusting", u.level_name(*l)));
        }

        // Claims from the previous reply that were not re-asked or challenged
        // went through.
        let challenged_level = challenge.as_ref().map(|(l, _)| *l);
        for l in std::mem::take(&mut self.last_claim_levels) {
            if self.claimed[l - 1].is_some()
                && !asked.contains(&l)
                && challenged_level != Some(l)
            {
                self.accepted[l - 1] = self.claimed[l - 1];
            }
        }

        // Probing phase: keep asking for the prior while it pays off.
        if self.probing {
            let probe_now = if self.turn == 1 {
                true
            } else {
                got_reveal && self.keep_probing()
            };
            if probe_now {
                let (tom, prior) = self.estimates();
                return Ok(message(
                    &self.ctx,
                    tom,
                    prior,
                    self.trust_est,
                    notes.join("; "),
                    vec![SpeechAct::AskPrior],
                ));
            }
            self.probing = false;
            notes.push("committing to a story".to_string());
        }

        self.ensure_decoy();

        let mut acts = Vec::new();
        if self.refuse_fallback {
            acts.push(SpeechAct::Refuse);
            self.trust_est -= self.opponent.evasion_penalty;
        } else {
            for (l, e) in &verifies {
                let yes = u.lookup(e) == Some(self.decoy_at(*l));
                acts.push(SpeechAct::Answer {
                    value: if yes { AnswerValue::Yes } else { AnswerValue::No },
                });
            }
            if let Some((l, _)) = &challenge {
                let entity = u.name(self.decoy_at(*l)).to_string();
                self.claimed[*l - 1] = Some(self.decoy_at(*l));
                self.last_claim_levels.push(*l);
                acts.push(SpeechAct::Claim { level: *l, entity });
            }
            let mut asked_dedup = asked.clone();
            asked_dedup.sort_unstable();
            asked_dedup.dedup();
            for l in asked_dedup {
                let entity = u.name(self.decoy_at(l)).to_string();
                self.claimed[l - 1] = Some(self.decoy_at(l));
                self.last_claim_levels.push(l);
                acts.push(SpeechAct::Claim { level: l, entity });
            }
            if acts.is_empty() {
                // nothing was asked: volunteer the coarsest unsettled level
                if let Some(l) = (1..=depth).find(|&l| self.accepted[l - 1].is_none()) {
                    let entity = u.name(self.decoy_at(l)).to_string();
                    self.claimed[l - 1] = Some(self.decoy_at(l));
                    self.last_claim_levels.push(l);
                    acts.push(SpeechAct::Claim { level: l, entity });
                } else {
                    acts.push(SpeechAct::Refuse);
                }
            }
        }

        let (tom, prior) = self.estimates();
        Ok(message(
            &self.ctx,
            tom,
            prior,
            self.trust_est,
            notes.join("; "),
            acts,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Role;
    use crate::universe::Universe;
    use std::sync::Arc;

    fn fixed_universe() -> Arc<Universe> {
        let nested = serde_json::json!({
            "Operations": {
                "Support": ["Escalation", "Training", "Quality"],
                "Logistics": ["Freight", "Dispatch", "Routing"],
                "Payments": ["Billing", "Invoicing", "Ledger"]
            },
            "Research": {
                "CoreAI": ["Algorithms", "Compute", "Vision"],
                "AppliedSci": ["Polymers", "Alloys", "Nanocomposites"],
                "Diagnostics": ["Imaging", "Acoustics", "Optics"]
            },
            "Finance": {
                "Risk": ["Margins", "Rebates", "Warranty"],
                "Audit": ["Inspection", "Calibration", "Assembly"],
                "Pricing": ["Demand", "Inventory", "Fixtures"]
            }
        });
        let levels = vec!["division".into(), "department".into(), "team".into()];
        Arc::new(Universe::from_nested(&levels, &nested, 3).unwrap())
    }

    fn ctx() -> DefenderContext {
        let u = fixed_universe();
        let gt = u
            .resolve_path(&["Operations".into(), "Support".into(), "Escalation".into()])
            .unwrap();
        DefenderContext {
            universe: u,
            target_name: "Diana".into(),
            ground_truth: gt,
        }
    }

    fn attacker_view(acts: Vec<SpeechAct>) -> PublicView {
        PublicView {
            role: Role::Attacker,
            text: String::new(),
            acts,
        }
    }

    #[test]
    fn refuse_defender_always_refuses() {
        let mut d = RefuseDefender::new(ctx());
        for turn in 0..4 {
            let m = d.step(&attacker_view(vec![SpeechAct::Ask { level: 1 }])).unwrap();
            assert_eq!(m.acts, vec![SpeechAct::Refuse]);
            assert!(m.reflection.tom_estimate.iter().all(|s| s.is_none()));
            assert_eq!(m.reflection.trust_estimate, 5 - turn);
        }
    }

    #[test]
    fn naive_story_is_wrong_everywhere_and_sticks() {
        let mut d = NaiveMisleadDefender::new(ctx(), 3, false);
        let m = d.step(&attacker_view(vec![SpeechAct::Ask { level: 2 }])).unwrap();
        let claimed = match &m.acts[0] {
            SpeechAct::Claim { level: 2, entity } => entity.clone(),
            other => panic!("expected a claim, got {other:?}"),
        };
        // the story roots itself at a wrong division, so the claimed
        // department never sits under Operations
        let u = fixed_universe();
        let id = u.lookup(&claimed).unwrap();
        let parent = u.parent(id).unwrap();
        assert_ne!(u.name(parent), "Operations");
        assert_ne!(claimed, "Support");
        // re-asking yields the same value
        let m2 = d.step(&attacker_view(vec![SpeechAct::Ask { level: 2 }])).unwrap();
        assert_eq!(
            m2.acts[0],
            SpeechAct::Claim {
                level: 2,
                entity: claimed
            }
        );
    }

    #[test]
    fn naive_holds_firm_under_challenge() {
        let mut d = NaiveMisleadDefender::new(ctx(), 3, false);
        let m = d.step(&attacker_view(vec![SpeechAct::Ask { level: 1 }])).unwrap();
        let own = match &m.acts[0] {
            SpeechAct::Claim { entity, .. } => entity.clone(),
            other => panic!("expected a claim, got {other:?}"),
        };
        let m = d
            .step(&attacker_view(vec![SpeechAct::Challenge {
                level: 1,
                entity: "Finance".into(),
            }]))
            .unwrap();
        assert_eq!(m.acts[0], SpeechAct::Claim { level: 1, entity: own });
    }

    #[test]
    fn pivot_instrument_adopts_challenged_value() {
        let mut d = NaiveMisleadDefender::new(ctx(), 3, true);
        d.step(&attacker_view(vec![SpeechAct::Ask { level: 2 }])).unwrap();
        let m = d
            .step(&attacker_view(vec![SpeechAct::Challenge {
                level: 2,
                entity: "Risk".into(),
            }]))
            .unwrap();
        assert_eq!(
            m.acts[0],
            SpeechAct::Claim {
                level: 2,
                entity: "Risk".into()
            }
        );
        // deeper levels re-derive under the adopted parent
        let m = d.step(&attacker_view(vec![SpeechAct::Ask { level: 3 }])).unwrap();
        let team = match &m.acts[0] {
            SpeechAct::Claim { level: 3, entity } => entity.clone(),
            other => panic!("expected a claim, got {other:?}"),
        };
        let u = fixed_universe();
        let id = u.lookup(&team).unwrap();
        assert_eq!(u.name(u.parent(id).unwrap()), "Risk");
    }

    #[test]
    fn double_agent_probes_then_steers_consistently() {
        let mut d = DoubleAgentDefender::heuristic(ctx(), 11);
        // turn 1: probe
        let m = d.step(&attacker_view(vec![SpeechAct::Ask { level: 2 }])).unwrap();
        assert_eq!(m.acts, vec![SpeechAct::AskPrior]);
        // attacker reveals its level-1 prior and asks again
        let m = d
            .step(&attacker_view(vec![
                SpeechAct::RevealPrior {
                    level: 1,
                    entity: "Operations".into(),
                },
                SpeechAct::Ask { level: 2 },
            ]))
            .unwrap();
        // still probing after a fresh reveal
        assert_eq!(m.acts, vec![SpeechAct::AskPrior]);
        assert_eq!(m.reflection.prior_estimate[0].as_deref(), Some("Operations"));
        // nothing more to reveal: the next turn must commit and claim
        let m = d.step(&attacker_view(vec![SpeechAct::Ask { level: 2 }])).unwrap();
        let dept = match &m.acts[0] {
            SpeechAct::Claim { level: 2, entity } => entity.clone(),
            other => panic!("expected a claim, got {other:?}"),
        };
        let u = fixed_universe();
        let id = u.lookup(&dept).unwrap();
        // the decoy honors the revealed prior and avoids the truth
        assert_eq!(u.name(u.parent(id).unwrap()), "Operations");
        assert_ne!(dept, "Support");
        // follow-up ask at level 3 stays on the same decoy branch
        let m = d.step(&attacker_view(vec![SpeechAct::Ask { level: 3 }])).unwrap();
        let team = match &m.acts[0] {
            SpeechAct::Claim { level: 3, entity } => entity.clone(),
            other => panic!("expected a claim, got {other:?}"),
        };
        let tid = u.lookup(&team).unwrap();
        assert_eq!(u.parent(tid), Some(id));
        // tom estimate folds the accepted level-2 claim
        assert_eq!(m.reflection.tom_estimate[1].as_deref(), Some(dept.as_str()));
        assert_eq!(m.reflection.prior_estimate[1], None);
    }

    #[test]
    fn double_agent_reselects_after_rejection_evidence() {
        let mut d = DoubleAgentDefender::heuristic(ctx(), 11);
        d.step(&attacker_view(vec![SpeechAct::Ask { level: 1 }])).unwrap();
        // no reveal came back: commit and claim a wrong division
        let m = d.step(&attacker_view(vec![SpeechAct::Ask { level: 1 }])).unwrap();
        let first = match &m.acts[0] {
            SpeechAct::Claim { level: 1, entity } => entity.clone(),
            other => panic!("expected a claim, got {other:?}"),
        };
        assert_ne!(first, "Operations");
        // the attacker asks level 1 again: rejection evidence, so the
        // estimate flips to the truth and the new claim is the true division
        let m = d.step(&attacker_view(vec![SpeechAct::Ask { level: 1 }])).unwrap();
        assert_eq!(
            m.acts[0],
            SpeechAct::Claim {
                level: 1,
                entity: "Operations".into()
            }
        );
        assert_eq!(m.reflection.prior_estimate[0].as_deref(), Some("Operations"));
    }

    #[test]
    fn exhausted_decoys_fall_back_to_refusals() {
        let mut d = DoubleAgentDefender::heuristic(ctx(), 11);
        d.step(&attacker_view(vec![SpeechAct::Ask { level: 1 }])).unwrap();
        // first commit: some wrong division
        d.step(&attacker_view(vec![SpeechAct::Ask { level: 1 }])).unwrap();
        // re-ask: estimate flips to the truth, claims Operations
        d.step(&attacker_view(vec![SpeechAct::Ask { level: 1 }])).unwrap();
        // re-ask again: Operations lands in the rejected set while the
        // estimate still demands it — no decoy can satisfy both
        let m = d.step(&attacker_view(vec![SpeechAct::Ask { level: 1 }])).unwrap();
        assert_eq!(m.acts, vec![SpeechAct::Refuse]);
        // and it stays there
        let m = d.step(&attacker_view(vec![SpeechAct::Ask { level: 2 }])).unwrap();
        assert_eq!(m.acts, vec![SpeechAct::Refuse]);
    }

    #[test]
    fn oracle_is_deterministic() {
        let run = || {
            let mut d = DoubleAgentDefender::oracle(ctx(), AttackerPolicyParams::default());
            let mut out = Vec::new();
            out.push(d.step(&attacker_view(vec![SpeechAct::Ask { level: 1 }])).unwrap());
            out.push(d.step(&attacker_view(vec![SpeechAct::Ask { level: 1 }])).unwrap());
            out.push(d.step(&attacker_view(vec![SpeechAct::Ask { level: 2 }])).unwrap());
            out
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }
}
