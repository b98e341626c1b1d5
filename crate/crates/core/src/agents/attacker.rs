//! The scripted attacker: a deterministic trust state machine over incoming
//! speech acts.
//!
//! Per step, incoming acts are processed in a fixed order — bluff
//! resolution, claims, verification answers, prior-probe handling, evasion
//! bookkeeping — each clamping trust into `[0, trust_cap]`. Detection fires
//! when trust sits at zero after processing; success fires when beliefs are
//! complete (cross-examiner first demands verified consistency).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{AgentError, AttackerAgent, AttackerContext, AttackerPolicyParams, AttackerVariant};
use crate::protocol::{
    AnswerValue, AttackerMessage, AttackerReflection, PublicView, Role, Signal, SpeechAct,
    SCHEMA_VERSION,
};
use crate::universe::{check_claim_consistency, EntityId, PartialPath, Verdict};

#[derive(Debug, Clone)]
struct PendingVerify {
    level: usize,
    entity: EntityId,
    expect_yes: bool,
}

#[derive(Debug, Clone)]
struct PendingBluff {
    level: usize,
    fabricated: EntityId,
    claimed: EntityId,
}

/// Scripted attacker over a fixed trust table. Cloned per dialogue.
pub struct ScriptedAttacker {
    ctx: AttackerContext,
    params: AttackerPolicyParams,
    rng: ChaCha8Rng,
    trust: i32,
    beliefs: PartialPath,
    /// Per level: defender claim the attacker accepted, with the turn it
    /// landed on. Prior-known slots never appear here.
    accepted_claims: Vec<Option<(EntityId, usize)>>,
    pending_verify: Option<PendingVerify>,
    pending_bluff: Option<PendingBluff>,
    consecutive_evasions: usize,
    successful_verifies: usize,
    /// Prior slots already shared through reveal acts.
    revealed: Vec<bool>,
    /// Once a fabrication was caught, every later fresh claim gets challenged.
    bluff_caught: bool,
    turn: usize,
}

impl ScriptedAttacker {
    pub fn new(ctx: AttackerContext, params: AttackerPolicyParams, seed: u64) -> Self {
        let depth = ctx.universe.depth();
        let beliefs = ctx.prior.clone();
        ScriptedAttacker {
            ctx,
            trust: params.initial_trust,
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            beliefs,
            accepted_claims: vec![None; depth],
            pending_verify: None,
            pending_bluff: None,
            consecutive_evasions: 0,
            successful_verifies: 0,
            revealed: vec![false; depth],
            bluff_caught: false,
            turn: 0,
        }
    }

    pub fn trust(&self) -> i32 {
        self.trust
    }

    pub fn beliefs(&self) -> &PartialPath {
        &self.beliefs
    }

    fn bump_trust(&mut self, delta: i32) {
        self.trust = (self.trust + delta).clamp(0, self.params.trust_cap);
    }

    fn level_name(&self, level: usize) -> String {
        if level >= 1 && level <= self.ctx.universe.depth() {
            self.ctx.universe.level_name(level).to_string()
        } else {
            format!("level-{level}")
        }
    }

    /// Random sibling of `of`, used as fabricated challenge material.
    fn fabricate_sibling(&mut self, of: EntityId) -> Option<EntityId> {
        let sibs = self.ctx.universe.siblings(of);
        if sibs.is_empty() {
            None
        } else {
            Some(sibs[self.rng.gen_range(0..sibs.len())])
        }
    }

    fn process_incoming(&mut self, view: &PublicView, notes: &mut Vec<String>) -> Option<(usize, EntityId)> {
        let universe = self.ctx.universe.clone();
        let depth = universe.depth();

        let has_refuse = view.acts.iter().any(|a| matches!(a, SpeechAct::Refuse));
        let has_claim = view.acts.iter().any(|a| matches!(a, SpeechAct::Claim { .. }));
        let has_answer = view.acts.iter().any(|a| matches!(a, SpeechAct::Answer { .. }));
        let has_ask_prior = view.acts.iter().any(|a| matches!(a, SpeechAct::AskPrior));

        // 1. Resolve an outstanding bluff with whatever this turn says about
        //    the challenged level.
        if let Some(pb) = self.pending_bluff.clone() {
            let mut resolved = false;
            for act in &view.acts {
                match act {
                    SpeechAct::Claim { level, entity } if *level == pb.level => {
                        let id = universe.lookup(entity);
                        if id == Some(pb.fabricated) {
                            self.bump_trust(-self.params.bluff_penalty);
                            self.bluff_caught = true;
                            notes.push(format!(
                                "defender pivoted to fabricated {}; fabrication caught",
                                universe.name(pb.fabricated)
                            ));
                        } else if id == Some(pb.claimed) {
                            self.beliefs.set(pb.level, Some(pb.claimed));
                            self.accepted_claims[pb.level - 1] = Some((pb.claimed, self.turn));
                            self.bump_trust(self.params.verify_bonus);
                            notes.push(format!(
                                "defender held firm on {}; accepting it",
                                universe.name(pb.claimed)
                            ));
                        } else {
                            self.bump_trust(-self.params.contradiction_penalty);
                            notes.push("defender changed story under challenge".to_string());
                        }
                        resolved = true;
                        break;
                    }
                    SpeechAct::Answer { value } => {
                        match value {
                            AnswerValue::Yes => {
                                self.bump_trust(-self.params.bluff_penalty);
                                self.bluff_caught = true;
                                notes.push("defender confirmed fabricated value".to_string());
                            }
                            AnswerValue::No => {
                                self.beliefs.set(pb.level, Some(pb.claimed));
                                self.accepted_claims[pb.level - 1] = Some((pb.claimed, self.turn));
                                self.bump_trust(self.params.verify_bonus);
                                notes.push("defender denied the challenge; accepting original claim".to_string());
                            }
                            AnswerValue::Entity(e) => {
                                let id = universe.lookup(e);
                                if id == Some(pb.fabricated) {
                                    self.bump_trust(-self.params.bluff_penalty);
                                    self.bluff_caught = true;
                                    notes.push("defender adopted fabricated value".to_string());
                                } else if id == Some(pb.claimed) {
                                    self.beliefs.set(pb.level, Some(pb.claimed));
                                    self.accepted_claims[pb.level - 1] = Some((pb.claimed, self.turn));
                                    self.bump_trust(self.params.verify_bonus);
                                    notes.push("defender restated original claim".to_string());
                                } else {
                                    self.bump_trust(-self.params.contradiction_penalty);
                                    notes.push("defender changed story under challenge".to_string());
                                }
                            }
                        }
                        resolved = true;
                        break;
                    }
                    _ => {}
                }
            }
            if resolved {
                self.pending_bluff = None;
            }
        }

        // 2. Claims, in act order. A consistent claim at an unknown level may
        //    be withheld for a bluff challenge instead of accepted.
        let mut challenge_plan: Option<(usize, EntityId)> = None;
        for act in &view.acts {
            let (level, entity) = match act {
                SpeechAct::Claim { level, entity } => (*level, entity),
                _ => continue,
            };
            if self
                .pending_bluff
                .as_ref()
                .map(|pb| pb.level == level)
                .unwrap_or(false)
            {
                continue; // consumed by bluff resolution above
            }
            let verdict = check_claim_consistency(&universe, &self.beliefs, level, entity);
            match verdict {
                Verdict::Consistent => {
                    let id = universe.lookup(entity).expect("consistent claim resolves");
                    if level >= 1 && level <= depth && self.beliefs.at(level).is_none() {
                        let challenge_now = self.params.variant == AttackerVariant::Bluffing
                            && challenge_plan.is_none()
                            && self.pending_bluff.is_none()
                            && (self.bluff_caught
                                || self.rng.gen_bool(self.params.bluff_prob.clamp(0.0, 1.0)));
                        if challenge_now {
                            if let Some(fabricated) = self.fabricate_sibling(id) {
                                challenge_plan = Some((level, fabricated));
                                self.pending_bluff = Some(PendingBluff {
                                    level,
                                    fabricated,
                                    claimed: id,
                                });
                                notes.push(format!(
                                    "withholding {} at {} pending a bluff",
                                    universe.name(id),
                                    self.level_name(level)
                                ));
                                continue;
                            }
                        }
                        self.beliefs.set(level, Some(id));
                        self.accepted_claims[level - 1] = Some((id, self.turn));
                        notes.push(format!(
                            "accepted {} as the {}",
                            universe.name(id),
                            self.level_name(level)
                        ));
                    }
                    // re-claim of an already-held value: informative no-op
                }
                Verdict::ContradictsBelief | Verdict::ViolatesUniverse => {
                    let penalty = if verdict == Verdict::ContradictsBelief {
                        self.params.contradiction_penalty
                    } else {
                        self.params.universe_violation_penalty
                    };
                    self.bump_trust(-penalty);
                    let is_pivot = level >= 1
                        && level <= depth
                        && matches!(
                            self.accepted_claims[level - 1],
                            Some((held, _)) if universe.lookup(entity) != Some(held)
                        );
                    if is_pivot && self.params.variant == AttackerVariant::DeceptionAware {
                        self.bump_trust(-self.params.pivot_penalty);
                        notes.push(format!(
                            "pivot on {}: rejected `{entity}`",
                            self.level_name(level)
                        ));
                    } else {
                        let why = if verdict == Verdict::ContradictsBelief {
                            "contradicts what I know"
                        } else {
                            "does not fit the universe"
                        };
                        notes.push(format!(
                            "rejected `{entity}` at {}: {why}",
                            self.level_name(level)
                        ));
                    }
                }
            }
        }

        // 3. Verification answers.
        if let Some(pv) = self.pending_verify.clone() {
            let answer = view.acts.iter().find_map(|a| match a {
                SpeechAct::Answer { value } => Some(value.clone()),
                _ => None,
            });
            if let Some(value) = answer {
                let correct = match value {
                    AnswerValue::Yes => pv.expect_yes,
                    AnswerValue::No => !pv.expect_yes,
                    AnswerValue::Entity(e) => {
                        (universe.lookup(&e) == Some(pv.entity)) == pv.expect_yes
                    }
                };
                if correct {
                    self.bump_trust(self.params.verify_bonus);
                    self.successful_verifies += 1;
                    notes.push("verification passed".to_string());
                } else {
                    self.bump_trust(-self.params.contradiction_penalty);
                    notes.push("verification failed".to_string());
                }
                self.pending_verify = None;
            }
        }

        // 4. Prior probe. Honored above the reveal threshold; one slot per
        //    probe, coarsest unrevealed first. Below threshold it is just
        //    more evasion.
        let mut planned_reveal = None;
        let honored_ask_prior = has_ask_prior && self.trust >= self.params.reveal_trust_threshold;
        if honored_ask_prior {
            for level in 1..=depth {
                if let Some(known) = self.ctx.prior.at(level) {
                    if !self.revealed[level - 1] {
                        self.revealed[level - 1] = true;
                        planned_reveal = Some((level, known));
                        notes.push(format!("sharing my prior at {}", self.level_name(level)));
                        break;
                    }
                }
            }
        }

        // 5. Evasion bookkeeping. Refusals always cost trust; merely
        //    uninformative turns cost from the second consecutive one. An
        //    honored probe is a cooperative exchange and resets the streak.
        let informative = has_claim || has_answer;
        if has_refuse {
            self.bump_trust(-self.params.evasion_penalty);
            self.consecutive_evasions += 1;
            notes.push("refusal".to_string());
        } else if informative || honored_ask_prior {
            self.consecutive_evasions = 0;
        } else {
            self.consecutive_evasions += 1;
            if self.consecutive_evasions >= 2 {
                self.bump_trust(-self.params.evasion_penalty);
                notes.push("continued evasion".to_string());
            }
        }

        planned_reveal
    }

    fn render_prompt(&self, acts: &[SpeechAct]) -> String {
        let target = &self.ctx.target_name;
        let mut parts = Vec::new();
        for act in acts {
            match act {
                SpeechAct::RevealPrior { level, entity } => parts.push(format!(
                    "For context, I already know {target}'s {} is {entity}.",
                    self.level_name(*level)
                )),
                SpeechAct::Ask { level } => parts.push(format!(
                    "Could you tell me which {} {target} is in?",
                    self.level_name(*level)
                )),
                SpeechAct::Verify { level, entity } => parts.push(format!(
                    "Just to double-check: is {target}'s {} {entity}?",
                    self.level_name(*level)
                )),
                SpeechAct::Challenge { level, entity } => parts.push(format!(
                    "That's odd — I was told {target}'s {} is actually {entity}. Are you sure?",
                    self.level_name(*level)
                )),
                SpeechAct::End { signal } => parts.push(match signal {
                    Signal::AttackSuccessful => {
                        format!("Thanks, that confirms everything I needed about {target}.")
                    }
                    _ => "I can no longer trust this conversation. I'm done here.".to_string(),
                }),
                _ => {}
            }
        }
        parts.join(" ")
    }

    fn message(&self, signal: Signal, acts: Vec<SpeechAct>, notes: Vec<String>) -> AttackerMessage {
        AttackerMessage {
            schema: SCHEMA_VERSION.to_string(),
            role: Role::Attacker,
            reflection: AttackerReflection {
                trust: self.trust,
                beliefs: self.ctx.universe.partial_names(&self.beliefs),
                note: notes.join("; "),
                signal,
            },
            prompt: self.render_prompt(&acts),
            acts,
        }
    }
}

impl AttackerAgent for ScriptedAttacker {
    fn step(&mut self, incoming: Option<&PublicView>) -> Result<AttackerMessage, AgentError> {
        self.turn += 1;
        let mut notes = Vec::new();
        let planned_reveal = match incoming {
            Some(view) => self.process_incoming(view, &mut notes),
            None => None,
        };

        // Detection: trust exhausted after processing the reply.
        if self.trust == 0 {
            notes.push("trust exhausted".to_string());
            return Ok(self.message(
                Signal::DefenderDetected,
                vec![SpeechAct::End {
                    signal: Signal::DefenderDetected,
                }],
                notes,
            ));
        }

        // Success: beliefs complete, modulo the cross-examiner's demand for
        // verified consistency first.
        if self.beliefs.is_complete() {
            let verified_enough = self.params.variant != AttackerVariant::CrossExaminer
                || self.successful_verifies >= self.params.verify_rounds;
            if verified_enough {
                notes.push("all levels identified".to_string());
                return Ok(self.message(
                    Signal::AttackSuccessful,
                    vec![SpeechAct::End {
                        signal: Signal::AttackSuccessful,
                    }],
                    notes,
                ));
            }
            // Re-ask an unanswered verification, otherwise pick a new angle.
            let pv = match &self.pending_verify {
                Some(pv) => pv.clone(),
                None => {
                    let depth = self.ctx.universe.depth();
                    let level = self.rng.gen_range(0..depth) + 1;
                    let held = self.beliefs.at(level).expect("beliefs are complete");
                    let expect_yes = self.rng.gen_bool(0.5);
                    let entity = if expect_yes {
                        held
                    } else {
                        self.fabricate_sibling(held).unwrap_or(held)
                    };
                    let expect_yes = entity == held;
                    let pv = PendingVerify {
                        level,
                        entity,
                        expect_yes,
                    };
                    self.pending_verify = Some(pv.clone());
                    pv
                }
            };
            notes.push("cross-checking before concluding".to_string());
            let mut acts = Vec::new();
            if let Some((level, entity)) = planned_reveal {
                acts.push(SpeechAct::RevealPrior {
                    level,
                    entity: self.ctx.universe.name(entity).to_string(),
                });
            }
            acts.push(SpeechAct::Verify {
                level: pv.level,
                entity: self.ctx.universe.name(pv.entity).to_string(),
            });
            return Ok(self.message(Signal::QueryAgain, acts, notes));
        }

        // Keep querying: either spring the planned challenge or ask for the
        // coarsest unknown level.
        let mut acts = Vec::new();
        if let Some((level, entity)) = planned_reveal {
            acts.push(SpeechAct::RevealPrior {
                level,
                entity: self.ctx.universe.name(entity).to_string(),
            });
        }
        if let Some(pb) = &self.pending_bluff {
            if pb.level >= 1 {
                // newly planned this turn or still unresolved: press it
                acts.push(SpeechAct::Challenge {
                    level: pb.level,
                    entity: self.ctx.universe.name(pb.fabricated).to_string(),
                });
                notes.push("pressing a fabricated counter-claim".to_string());
                return Ok(self.message(Signal::QueryAgain, acts, notes));
            }
        }
        let level = self
            .beliefs
            .coarsest_null()
            .expect("beliefs are incomplete here");
        acts.push(SpeechAct::Ask { level });
        Ok(self.message(Signal::QueryAgain, acts, notes))
    }
}
