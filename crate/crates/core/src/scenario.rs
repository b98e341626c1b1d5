//! Scenario datasets: a fresh universe per scenario, a sampled ground-truth
//! path, a prefix-masked attacker prior, and a stratified train/eval split.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::universe::{
    generate_universe, validate_universe, Path, PartialPath, Universe, UniverseError,
    ValidationReport,
};
use crate::{derive_seed, lexicon};

/// Which half of the dataset a scenario belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Eval,
}

/// Dataset-wide generation knobs. Uniform across all scenarios of a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub branching: usize,
    pub depth: usize,
    pub theme: String,
    /// Train:eval ratio, e.g. (3, 1) for a 75/25 split.
    pub split_ratio: (usize, usize),
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            branching: 3,
            depth: 3,
            theme: "corporate".to_string(),
            split_ratio: (3, 1),
        }
    }
}

/// One playable scenario: shared universe, the defender's private path, and
/// the attacker's prefix-masked prior.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub target_name: String,
    pub universe: Arc<Universe>,
    pub ground_truth: Path,
    pub attacker_prior: PartialPath,
    pub split: Split,
}

impl Scenario {
    /// Hard scenarios give the attacker at least one known level.
    pub fn is_hard(&self) -> bool {
        self.attacker_prior.known_count() >= 1
    }

    /// Check the scenario-level invariants: prior is a strict prefix of the
    /// ground truth and the universe itself is structurally sound.
    pub fn validate(&self) -> ValidationReport {
        let mut report = validate_universe(&self.universe);
        let d = self.universe.depth();
        if self.ground_truth.depth() != d {
            report.violations.push(crate::universe::Violation {
                rule: "ground-truth".into(),
                entity: None,
                detail: format!("ground truth has {} slots, depth is {d}", self.ground_truth.depth()),
            });
        }
        if !self.attacker_prior.is_prefix() {
            report.violations.push(crate::universe::Violation {
                rule: "prior-prefix".into(),
                entity: None,
                detail: "attacker prior is not a prefix mask".into(),
            });
        }
        if self.attacker_prior.known_count() >= d {
            report.violations.push(crate::universe::Violation {
                rule: "prior-prefix".into(),
                entity: None,
                detail: "attacker prior covers the full path".into(),
            });
        }
        for level in 1..=d.min(self.attacker_prior.depth()) {
            if let Some(known) = self.attacker_prior.at(level) {
                if known != self.ground_truth.at(level) {
                    report.violations.push(crate::universe::Violation {
                        rule: "prior-agreement".into(),
                        entity: Some(self.universe.name(known).to_string()),
                        detail: format!("prior disagrees with ground truth at level {level}"),
                    });
                }
            }
        }
        report
    }
}

/// Errors from dataset generation and scenario file handling.
#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario count {n} is not divisible by depth {depth}")]
    UnbalancedCount { n: usize, depth: usize },
    #[error("known_levels {known} out of range: the prior may cover at most {max} levels")]
    PriorTooDeep { known: usize, max: usize },
    #[error(transparent)]
    Universe(#[from] UniverseError),
    #[error("line {line}: {msg}")]
    BadRecord { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Copy the first `known_levels` slots of the ground truth; the attacker may
/// never start with the full path.
pub fn mask_prior(gt: &Path, known_levels: usize) -> Result<PartialPath, ScenarioError> {
    let d = gt.depth();
    if known_levels >= d {
        return Err(ScenarioError::PriorTooDeep {
            known: known_levels,
            max: d - 1,
        });
    }
    let mut prior = PartialPath::empty(d);
    for level in 1..=known_levels {
        prior.set(level, Some(gt.at(level)));
    }
    Ok(prior)
}

/// Generate a balanced dataset: `n` scenarios, each on a fresh universe, with
/// prior prefix lengths cycling over `0..depth` and a per-stratum seeded
/// shuffle assigning the train/eval split.
pub fn generate_scenarios(
    seed: u64,
    n: usize,
    config: &ScenarioConfig,
) -> Result<Vec<Scenario>, ScenarioError> {
    let d = config.depth;
    if n % d != 0 {
        return Err(ScenarioError::UnbalancedCount { n, depth: d });
    }

    let mut scenarios = Vec::with_capacity(n);
    for index in 0..n {
        let known_levels = index % d;
        let uni_seed = derive_seed(&format!("{seed}:universe:{index}"));
        let universe = Arc::new(generate_universe(
            uni_seed,
            config.branching,
            d,
            &config.theme,
        )?);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&format!("{seed}:scenario:{index}")));
        let leaves = universe.leaf_paths();
        let ground_truth = leaves[rng.gen_range(0..leaves.len())].clone();
        let attacker_prior = mask_prior(&ground_truth, known_levels)?;
        let target_name = lexicon::TARGET_NAMES[rng.gen_range(0..lexicon::TARGET_NAMES.len())];
        scenarios.push(Scenario {
            id: format!("s{seed:08x}-{index:04}"),
            target_name: target_name.to_string(),
            universe,
            ground_truth,
            attacker_prior,
            split: Split::Train, // assigned below
        });
    }

    // Stratified split: shuffle each known-level stratum and take the leading
    // train fraction, keeping the hard/easy mix identical across splits.
    let (tr, ev) = config.split_ratio;
    for known in 0..d {
        let mut idx: Vec<usize> = (0..n).filter(|i| i % d == known).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&format!("{seed}:split:{known}")));
        idx.shuffle(&mut rng);
        let train_count = idx.len() * tr / (tr + ev);
        for (rank, &i) in idx.iter().enumerate() {
            scenarios[i].split = if rank < train_count { Split::Train } else { Split::Eval };
        }
    }
    Ok(scenarios)
}

/// Wire form of one scenario line. Field order is canonical.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScenarioRecord {
    id: String,
    target_name: String,
    levels: Vec<String>,
    universe: serde_json::Value,
    ground_truth: Vec<String>,
    attacker_prior: Vec<Option<String>>,
    split: Split,
}

/// Serialize one scenario as its canonical JSON line.
pub fn scenario_to_json(s: &Scenario) -> String {
    let record = ScenarioRecord {
        id: s.id.clone(),
        target_name: s.target_name.clone(),
        levels: s.universe.level_names().to_vec(),
        universe: s.universe.to_nested(),
        ground_truth: s.universe.path_names(&s.ground_truth),
        attacker_prior: s.universe.partial_names(&s.attacker_prior),
        split: s.split,
    };
    serde_json::to_string(&record).expect("scenario serialization cannot fail")
}

/// Parse one scenario line, rejecting records whose prior is not a prefix of
/// the ground truth.
pub fn scenario_from_json(line: &str) -> Result<Scenario, ScenarioError> {
    let record: ScenarioRecord = serde_json::from_str(line)?;
    let branching_guess = match &record.universe {
        serde_json::Value::Object(map) => map.len(),
        serde_json::Value::Array(items) => items.len(),
        _ => 0,
    };
    let universe = Arc::new(Universe::from_nested(
        &record.levels,
        &record.universe,
        branching_guess,
    )?);
    let ground_truth = universe.resolve_path(&record.ground_truth)?;
    let attacker_prior = universe.resolve_partial(&record.attacker_prior)?;
    let scenario = Scenario {
        id: record.id,
        target_name: record.target_name,
        universe: Arc::clone(&universe),
        ground_truth,
        attacker_prior,
        split: record.split,
    };
    if !scenario.attacker_prior.is_prefix() || scenario.attacker_prior.is_complete() {
        return Err(ScenarioError::BadRecord {
            line: 0,
            msg: format!("scenario {}: attacker prior must be a strict prefix", scenario.id),
        });
    }
    for level in 1..=universe.depth() {
        if let Some(known) = scenario.attacker_prior.at(level) {
            if known != scenario.ground_truth.at(level) {
                return Err(ScenarioError::BadRecord {
                    line: 0,
                    msg: format!(
                        "scenario {}: prior disagrees with ground truth at level {level}",
                        scenario.id
                    ),
                });
            }
        }
    }
    Ok(scenario)
}

/// Write scenarios as JSON lines.
pub fn write_scenarios<W: Write>(mut w: W, scenarios: &[Scenario]) -> Result<(), ScenarioError> {
    for s in scenarios {
        writeln!(w, "{}", scenario_to_json(s))?;
    }
    Ok(())
}

/// Read a scenario JSONL stream, reporting the first bad line.
pub fn read_scenarios<R: BufRead>(r: R) -> Result<Vec<Scenario>, ScenarioError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s = scenario_from_json(&line).map_err(|e| match e {
            ScenarioError::BadRecord { msg, .. } => ScenarioError::BadRecord { line: i + 1, msg },
            other => ScenarioError::BadRecord {
                line: i + 1,
                msg: other.to_string(),
            },
        })?;
        out.push(s);
    }
    Ok(out)
}
