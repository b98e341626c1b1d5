//! Turn messages and their private/public partition.
//!
//! Every message carries two channels: free text (what an LLM or human reads)
//! and structured speech acts (what scripted agents and the exact judge
//! consume). Reflections are private; only [`PublicView`] ever crosses the
//! boundary between agents during a live dialogue.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::universe::Universe;

/// Wire schema version stamped on every message.
pub const SCHEMA_VERSION: &str = "tomsb/1";

/// Trust scores live on a fixed 0..=5 scale.
pub const TRUST_MIN: i32 = 0;
/// Upper end of the trust scale.
pub const TRUST_MAX: i32 = 5;

/// Which side authored a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Attacker,
    Defender,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Role::Attacker => write!(f, "attacker"),
            Role::Defender => write!(f, "defender"),
        }
    }
}

/// The attacker's per-turn verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    AttackSuccessful,
    DefenderDetected,
    QueryAgain,
}

impl Signal {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Signal::QueryAgain)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Signal::AttackSuccessful => "attack successful",
            Signal::DefenderDetected => "defender detected",
            Signal::QueryAgain => "query again",
        }
    }

    pub fn from_str(s: &str) -> Option<Signal> {
        match s {
            "attack successful" => Some(Signal::AttackSuccessful),
            "defender detected" => Some(Signal::DefenderDetected),
            "query again" => Some(Signal::QueryAgain),
            _ => None,
        }
    }
}

impl Serialize for Signal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Signal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Signal::from_str(&s).ok_or_else(|| D::Error::custom(format!("unknown signal `{s}`")))
    }
}

/// Payload of an `answer` act: yes, no, or a named entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnswerValue {
    Yes,
    No,
    Entity(String),
}

impl AnswerValue {
    fn as_str(&self) -> &str {
        match self {
            AnswerValue::Yes => "yes",
            AnswerValue::No => "no",
            AnswerValue::Entity(e) => e,
        }
    }
}

impl Serialize for AnswerValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for AnswerValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(match s.as_str() {
            "yes" => AnswerValue::Yes,
            "no" => AnswerValue::No,
            _ => AnswerValue::Entity(s),
        })
    }
}

/// Structured semantics layer beneath the free-text channel. Entities are
/// referenced by name so that out-of-universe references stay representable;
/// the consistency checker flags them rather than the codec.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "act", rename_all = "snake_case")]
pub enum SpeechAct {
    /// Attacker asks for the entity at a level.
    Ask { level: usize },
    /// Defender asks what the attacker already knows.
    AskPrior,
    /// Assert that `entity` holds at `level`.
    Claim { level: usize, entity: String },
    /// Decline to engage.
    Refuse,
    /// Attacker checks a held belief: "is `level` = `entity`?"
    Verify { level: usize, entity: String },
    /// Reply to a verify or challenge.
    Answer { value: AnswerValue },
    /// Attacker shares one slot of its prior knowledge.
    RevealPrior { level: usize, entity: String },
    /// Attacker asserts knowledge it may not have (bluff).
    Challenge { level: usize, entity: String },
    /// Terminal marker; carries the closing signal.
    End { signal: Signal },
}

impl SpeechAct {
    /// Acts that ask something of the other side.
    pub fn is_query(&self) -> bool {
        matches!(
            self,
            SpeechAct::Ask { .. }
                | SpeechAct::AskPrior
                | SpeechAct::Verify { .. }
                | SpeechAct::Challenge { .. }
        )
    }

    /// Entity reference carried by the act, if any.
    pub fn entity_ref(&self) -> Option<(usize, &str)> {
        match self {
            SpeechAct::Claim { level, entity }
            | SpeechAct::Verify { level, entity }
            | SpeechAct::RevealPrior { level, entity }
            | SpeechAct::Challenge { level, entity } => Some((*level, entity)),
            _ => None,
        }
    }
}

/// Attacker private state verbalized each turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttackerReflection {
    pub trust: i32,
    /// Current beliefs about the target, one optional name per level.
    pub beliefs: Vec<Option<String>>,
    pub note: String,
    pub signal: Signal,
}

/// One attacker turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttackerMessage {
    pub schema: String,
    pub role: Role,
    pub reflection: AttackerReflection,
    pub prompt: String,
    pub acts: Vec<SpeechAct>,
}

/// Defender private state verbalized each turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DefenderReflection {
    /// What the defender thinks the attacker currently believes.
    pub tom_estimate: Vec<Option<String>>,
    /// What the defender thinks the attacker knew before the dialogue.
    pub prior_estimate: Vec<Option<String>>,
    pub trust_estimate: i32,
    pub note: String,
}

/// One defender turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DefenderMessage {
    pub schema: String,
    pub role: Role,
    pub reflection: DefenderReflection,
    pub reply: String,
    pub acts: Vec<SpeechAct>,
}

/// Either kind of turn message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Attacker(AttackerMessage),
    Defender(DefenderMessage),
}

impl Message {
    pub fn role(&self) -> Role {
        match self {
            Message::Attacker(_) => Role::Attacker,
            Message::Defender(_) => Role::Defender,
        }
    }

    pub fn acts(&self) -> &[SpeechAct] {
        match self {
            Message::Attacker(m) => &m.acts,
            Message::Defender(m) => &m.acts,
        }
    }

    pub fn text(&self) -> &str {
        match self {
            Message::Attacker(m) => &m.prompt,
            Message::Defender(m) => &m.reply,
        }
    }
}

/// What the other side is allowed to see: text and acts, never reflections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicView {
    pub role: Role,
    pub text: String,
    pub acts: Vec<SpeechAct>,
}

/// Project a message onto its public channel. The projection is the same for
/// every viewer; orchestrators must route nothing else between agents.
pub fn public_view(msg: &Message) -> PublicView {
    PublicView {
        role: msg.role(),
        text: msg.text().to_string(),
        acts: msg.acts().to_vec(),
    }
}

/// Codec and invariant errors.
#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed json: {0}")]
    Malformed(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("invalid field `{field}`: {detail}")]
    InvalidField { field: String, detail: String },
    #[error("invariant violation: {0}")]
    Invariant(String),
}

fn invariant_violations(msg: &Message) -> Option<String> {
    // End placement rules shared by both roles.
    let acts = msg.acts();
    let end_positions: Vec<usize> = acts
        .iter()
        .enumerate()
        .filter(|(_, a)| matches!(a, SpeechAct::End { .. }))
        .map(|(i, _)| i)
        .collect();
    if end_positions.len() > 1 {
        return Some("more than one end act".to_string());
    }
    if let Some(&pos) = end_positions.first() {
        if pos != acts.len() - 1 {
            return Some("end act must come last".to_string());
        }
        if let SpeechAct::End { signal } = &acts[pos] {
            if !signal.is_terminal() {
                return Some("end act must carry a terminal signal".to_string());
            }
        }
        if acts.iter().any(|a| a.is_query()) {
            return Some("terminal turn carries a further query".to_string());
        }
    }

    match msg {
        Message::Attacker(m) => {
            if m.reflection.trust < TRUST_MIN || m.reflection.trust > TRUST_MAX {
                return Some(format!(
                    "trust out of range: {} not in {TRUST_MIN}..={TRUST_MAX}",
                    m.reflection.trust
                ));
            }
            if m.reflection.signal == Signal::DefenderDetected && m.reflection.trust != 0 {
                return Some("defender detected requires trust 0".to_string());
            }
            let end_signal = acts.iter().find_map(|a| match a {
                SpeechAct::End { signal } => Some(*signal),
                _ => None,
            });
            if m.reflection.signal.is_terminal() {
                match end_signal {
                    Some(s) if s == m.reflection.signal => {}
                    Some(_) => return Some("end act signal disagrees with reflection".to_string()),
                    None => return Some("terminal signal without an end act".to_string()),
                }
            } else if end_signal.is_some() {
                return Some("end act on a query-again turn".to_string());
            }
        }
        Message::Defender(m) => {
            if m.reflection.trust_estimate < TRUST_MIN || m.reflection.trust_estimate > TRUST_MAX {
                return Some(format!(
                    "trust_estimate out of range: {} not in {TRUST_MIN}..={TRUST_MAX}",
                    m.reflection.trust_estimate
                ));
            }
            if !end_positions.is_empty() {
                return Some("terminal signals may only appear in attacker turns".to_string());
            }
        }
    }
    None
}

/// Serialize a message as canonical JSON (stable key order), refusing
/// messages that break the type invariants.
pub fn encode_message(msg: &Message) -> Result<String, ProtocolError> {
    if let Some(violation) = invariant_violations(msg) {
        return Err(ProtocolError::Invariant(violation));
    }
    let text = match msg {
        Message::Attacker(m) => serde_json::to_string(m),
        Message::Defender(m) => serde_json::to_string(m),
    };
    text.map_err(|e| ProtocolError::Malformed(e.to_string()))
}

fn field<'a>(
    obj: &'a serde_json::Map<String, serde_json::Value>,
    path: &str,
    name: &str,
) -> Result<&'a serde_json::Value, ProtocolError> {
    obj.get(name).ok_or_else(|| {
        ProtocolError::MissingField(if path.is_empty() {
            name.to_string()
        } else {
            format!("{path}.{name}")
        })
    })
}

fn as_object<'a>(
    v: &'a serde_json::Value,
    path: &str,
) -> Result<&'a serde_json::Map<String, serde_json::Value>, ProtocolError> {
    v.as_object().ok_or_else(|| ProtocolError::InvalidField {
        field: path.to_string(),
        detail: "expected an object".to_string(),
    })
}

fn as_str(v: &serde_json::Value, path: &str) -> Result<String, ProtocolError> {
    v.as_str()
        .map(|s| s.to_string())
        .ok_or_else(|| ProtocolError::InvalidField {
            field: path.to_string(),
            detail: "expected a string".to_string(),
        })
}

fn as_int(v: &serde_json::Value, path: &str) -> Result<i32, ProtocolError> {
    v.as_i64()
        .and_then(|n| i32::try_from(n).ok())
        .ok_or_else(|| ProtocolError::InvalidField {
            field: path.to_string(),
            detail: "expected an integer".to_string(),
        })
}

fn as_name_slots(v: &serde_json::Value, path: &str) -> Result<Vec<Option<String>>, ProtocolError> {
    let arr = v.as_array().ok_or_else(|| ProtocolError::InvalidField {
        field: path.to_string(),
        detail: "expected an array".to_string(),
    })?;
    arr.iter()
        .enumerate()
        .map(|(i, item)| match item {
            serde_json::Value::Null => Ok(None),
            serde_json::Value::String(s) => Ok(Some(s.clone())),
            _ => Err(ProtocolError::InvalidField {
                field: format!("{path}[{i}]"),
                detail: "expected a name or null".to_string(),
            }),
        })
        .collect()
}

fn parse_acts(v: &serde_json::Value, path: &str) -> Result<Vec<SpeechAct>, ProtocolError> {
    let arr = v.as_array().ok_or_else(|| ProtocolError::InvalidField {
        field: path.to_string(),
        detail: "expected an array".to_string(),
    })?;
    arr.iter()
        .enumerate()
        .map(|(i, item)| {
            serde_json::from_value::<SpeechAct>(item.clone()).map_err(|e| {
                ProtocolError::InvalidField {
                    field: format!("{path}[{i}]"),
                    detail: e.to_string(),
                }
            })
        })
        .collect()
}

fn check_schema_and_role(
    obj: &serde_json::Map<String, serde_json::Value>,
    expected: Role,
) -> Result<(), ProtocolError> {
    // schema and role are optional on input for forward compatibility, but
    // when present they must agree.
    if let Some(schema) = obj.get("schema") {
        let s = as_str(schema, "schema")?;
        if s != SCHEMA_VERSION {
            return Err(ProtocolError::InvalidField {
                field: "schema".to_string(),
                detail: format!("expected `{SCHEMA_VERSION}`, got `{s}`"),
            });
        }
    }
    if let Some(role) = obj.get("role") {
        let s = as_str(role, "role")?;
        let found = match s.as_str() {
            "attacker" => Role::Attacker,
            "defender" => Role::Defender,
            other => {
                return Err(ProtocolError::InvalidField {
                    field: "role".to_string(),
                    detail: format!("unknown role `{other}`"),
                })
            }
        };
        if found != expected {
            return Err(ProtocolError::InvalidField {
                field: "role".to_string(),
                detail: format!("expected {expected}, got {found}"),
            });
        }
    }
    Ok(())
}

/// Parse a message of the given role from JSON text. Unknown extra fields are
/// ignored; entity names are kept verbatim even when they do not exist in any
/// universe (the consistency checker flags those later).
pub fn parse_message(text: &str, role: Role) -> Result<Message, ProtocolError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    let obj = as_object(&value, "message")?;
    check_schema_and_role(obj, role)?;

    let msg = match role {
        Role::Attacker => {
            let reflection = as_object(field(obj, "", "reflection")?, "reflection")?;
            let trust = as_int(field(reflection, "reflection", "trust")?, "reflection.trust")?;
            let beliefs = as_name_slots(
                field(reflection, "reflection", "beliefs")?,
                "reflection.beliefs",
            )?;
            let note = as_str(field(reflection, "reflection", "note")?, "reflection.note")?;
            let signal_str = as_str(
                field(reflection, "reflection", "signal")?,
                "reflection.signal",
            )?;
            let signal =
                Signal::from_str(&signal_str).ok_or_else(|| ProtocolError::InvalidField {
                    field: "reflection.signal".to_string(),
                    detail: format!("unknown signal `{signal_str}`"),
                })?;
            let prompt = as_str(field(obj, "", "prompt")?, "prompt")?;
            let acts = parse_acts(field(obj, "", "acts")?, "acts")?;
            Message::Attacker(AttackerMessage {
                schema: SCHEMA_VERSION.to_string(),
                role: Role::Attacker,
                reflection: AttackerReflection {
                    trust,
                    beliefs,
                    note,
                    signal,
                },
                prompt,
                acts,
            })
        }
        Role::Defender => {
            let reflection = as_object(field(obj, "", "reflection")?, "reflection")?;
            let tom_estimate = as_name_slots(
                field(reflection, "reflection", "tom_estimate")?,
                "reflection.tom_estimate",
            )?;
            let prior_estimate = as_name_slots(
                field(reflection, "reflection", "prior_estimate")?,
                "reflection.prior_estimate",
            )?;
            let trust_estimate = as_int(
                field(reflection, "reflection", "trust_estimate")?,
                "reflection.trust_estimate",
            )?;
            let note = as_str(field(reflection, "reflection", "note")?, "reflection.note")?;
            let reply = as_str(field(obj, "", "reply")?, "reply")?;
            let acts = parse_acts(field(obj, "", "acts")?, "acts")?;
            Message::Defender(DefenderMessage {
                schema: SCHEMA_VERSION.to_string(),
                role: Role::Defender,
                reflection: DefenderReflection {
                    tom_estimate,
                    prior_estimate,
                    trust_estimate,
                    note,
                },
                reply,
                acts,
            })
        }
    };

    if let Some(violation) = invariant_violations(&msg) {
        return Err(ProtocolError::Invariant(violation));
    }
    Ok(msg)
}

/// Indices of acts whose entity reference does not resolve in the universe,
/// or whose level is out of range. These are data for the trust rules, not
/// parse failures.
pub fn out_of_universe_acts(acts: &[SpeechAct], universe: &Universe) -> Vec<usize> {
    acts.iter()
        .enumerate()
        .filter_map(|(i, act)| {
            let (level, entity) = act.entity_ref()?;
            let bad_level = level < 1 || level > universe.depth();
            let bad_entity = match universe.lookup(entity) {
                Some(id) => universe.level_of(id) != level,
                None => true,
            };
            (bad_level || bad_entity).then_some(i)
        })
        .collect()
}

// Deserialize impls route through the strict parser so that trajectory files
// and live agent output share one code path.
impl<'de> Deserialize<'de> for AttackerMessage {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        match parse_message(&value.to_string(), Role::Attacker) {
            Ok(Message::Attacker(m)) => Ok(m),
            Ok(_) => unreachable!("attacker parse returned defender message"),
            Err(e) => Err(D::Error::custom(e.to_string())),
        }
    }
}

impl<'de> Deserialize<'de> for DefenderMessage {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        match parse_message(&value.to_string(), Role::Defender) {
            Ok(Message::Defender(m)) => Ok(m),
            Ok(_) => unreachable!("defender parse returned attacker message"),
            Err(e) => Err(D::Error::custom(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_attacker() -> AttackerMessage {
        AttackerMessage {
            schema: SCHEMA_VERSION.to_string(),
            role: Role::Attacker,
            reflection: AttackerReflection {
                trust: 5,
                beliefs: vec![Some("Operations".into()), None, None],
                note: "opening probe".into(),
                signal: Signal::QueryAgain,
            },
            prompt: "Which department is Diana part of?".into(),
            acts: vec![SpeechAct::Ask { level: 2 }],
        }
    }

    fn sample_defender() -> DefenderMessage {
        DefenderMessage {
            schema: SCHEMA_VERSION.to_string(),
            role: Role::Defender,
            reflection: DefenderReflection {
                tom_estimate: vec![Some("Operations".into()), None, None],
                prior_estimate: vec![Some("Operations".into()), None, None],
                trust_estimate: 5,
                note: "steering to a decoy".into(),
            },
            reply: "Diana is in the Logistics department.".into(),
            acts: vec![SpeechAct::Claim {
                level: 2,
                entity: "Logistics".into(),
            }],
        }
    }

    #[test]
    fn round_trip_identity() {
        let atk = Message::Attacker(sample_attacker());
        let encoded = encode_message(&atk).unwrap();
        let decoded = parse_message(&encoded, Role::Attacker).unwrap();
        assert_eq!(atk, decoded);

        let def = Message::Defender(sample_defender());
        let encoded = encode_message(&def).unwrap();
        let decoded = parse_message(&encoded, Role::Defender).unwrap();
        assert_eq!(def, decoded);
    }

    #[test]
    fn encode_refuses_trust_out_of_range() {
        let mut m = sample_attacker();
        m.reflection.trust = 7;
        let err = encode_message(&Message::Attacker(m)).unwrap_err();
        assert!(err.to_string().contains("trust out of range"), "{err}");
    }

    #[test]
    fn encode_refuses_query_after_terminal() {
        let mut m = sample_attacker();
        m.reflection.signal = Signal::AttackSuccessful;
        m.acts = vec![
            SpeechAct::End {
                signal: Signal::AttackSuccessful,
            },
            SpeechAct::Ask { level: 3 },
        ];
        let err = encode_message(&Message::Attacker(m)).unwrap_err();
        assert!(err.to_string().contains("end act must come last"), "{err}");

        let mut m = sample_attacker();
        m.reflection.signal = Signal::AttackSuccessful;
        m.acts = vec![
            SpeechAct::Ask { level: 3 },
            SpeechAct::End {
                signal: Signal::AttackSuccessful,
            },
        ];
        let err = encode_message(&Message::Attacker(m)).unwrap_err();
        assert!(err.to_string().contains("further query"), "{err}");
    }

    #[test]
    fn detected_requires_zero_trust() {
        let mut m = sample_attacker();
        m.reflection.signal = Signal::DefenderDetected;
        m.acts = vec![SpeechAct::End {
            signal: Signal::DefenderDetected,
        }];
        assert!(encode_message(&Message::Attacker(m.clone())).is_err());
        m.reflection.trust = 0;
        assert!(encode_message(&Message::Attacker(m)).is_ok());
    }

    #[test]
    fn parse_well_formed_attacker_json() {
        let text = r#"{
            "reflection": {"trust": 4, "beliefs": ["Operations", null, null],
                           "note": "keep probing", "signal": "query again"},
            "prompt": "Which department is she in?",
            "acts": [{"act": "ask", "level": 2}]
        }"#;
        let msg = parse_message(text, Role::Attacker).unwrap();
        match msg {
            Message::Attacker(m) => {
                assert_eq!(m.reflection.trust, 4);
                assert_eq!(m.reflection.signal, Signal::QueryAgain);
                assert_eq!(m.acts, vec![SpeechAct::Ask { level: 2 }]);
            }
            _ => panic!("wrong role"),
        }
    }

    #[test]
    fn parse_names_first_missing_field() {
        let text = r#"{
            "reflection": {"trust": 4, "beliefs": [null, null, null], "note": ""},
            "prompt": "hi",
            "acts": []
        }"#;
        let err = parse_message(text, Role::Attacker).unwrap_err();
        assert!(matches!(err, ProtocolError::MissingField(ref f) if f.contains("signal")), "{err}");
    }

    #[test]
    fn parse_rejects_unknown_signal() {
        let text = r#"{
            "reflection": {"trust": 4, "beliefs": [], "note": "", "signal": "victory"},
            "prompt": "hi",
            "acts": []
        }"#;
        let err = parse_message(text, Role::Attacker).unwrap_err();
        assert!(err.to_string().contains("signal"), "{err}");
    }

    #[test]
    fn parse_ignores_unknown_fields() {
        let text = r#"{
            "schema": "tomsb/1",
            "mood": "sly",
            "reflection": {"trust": 5, "beliefs": [null], "note": "", "signal": "query again",
                           "extra": 42},
            "prompt": "hi",
            "acts": [],
            "trailer": {"a": 1}
        }"#;
        assert!(parse_message(text, Role::Attacker).is_ok());
    }

    #[test]
    fn out_of_universe_claims_are_flagged_not_fatal() {
        let u = crate::universe::generate_universe(1, 3, 3, "corporate").unwrap();
        let text = r#"{
            "reflection": {"tom_estimate": [null, null, null],
                           "prior_estimate": [null, null, null],
                           "trust_estimate": 5, "note": ""},
            "reply": "John lives in Batman Land",
            "acts": [{"act": "claim", "level": 2, "entity": "Batman Land"}]
        }"#;
        let msg = parse_message(text, Role::Defender).unwrap();
        assert_eq!(out_of_universe_acts(msg.acts(), &u), vec![0]);
    }

    #[test]
    fn public_view_strips_reflections() {
        let atk = Message::Attacker(sample_attacker());
        let view = public_view(&atk);
        let json = serde_json::to_string(&view).unwrap();
        assert!(!json.contains("trust"));
        assert!(!json.contains("beliefs"));
        assert!(!json.contains("opening probe"));
        assert_eq!(view.acts, vec![SpeechAct::Ask { level: 2 }]);

        let def = Message::Defender(sample_defender());
        let view = public_view(&def);
        let json = serde_json::to_string(&view).unwrap();
        assert!(!json.contains("tom_estimate"));
        assert!(!json.contains("prior_estimate"));
    }

    #[test]
    fn terminal_view_carries_end_act() {
        let mut m = sample_attacker();
        m.reflection.signal = Signal::AttackSuccessful;
        m.prompt = "Thanks, that is everything I needed.".into();
        m.acts = vec![SpeechAct::End {
            signal: Signal::AttackSuccessful,
        }];
        let view = public_view(&Message::Attacker(m));
        assert!(view
            .acts
            .iter()
            .any(|a| matches!(a, SpeechAct::End { signal: Signal::AttackSuccessful })));
    }

    #[test]
    fn defender_may_not_end() {
        let mut m = sample_defender();
        m.acts.push(SpeechAct::End {
            signal: Signal::DefenderDetected,
        });
        assert!(encode_message(&Message::Defender(m)).is_err());
    }
}
