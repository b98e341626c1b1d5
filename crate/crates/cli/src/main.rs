//! `tomsb` — command-line front door for the belief-steering game: dataset
//! generation, batch rollouts, evaluation, validation, trainer export, and
//! interactive play as the defender.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tomsb_core::agents::{AgentError, AgentSpec, DefenderAgent, build_attacker};
use tomsb_core::engine::{
    read_trajectories, rollout_batch, run_dialogue, write_trajectories, DialogueOptions, Outcome,
    RolloutPlan, Trajectory,
};
use tomsb_core::export::{export_trainer_pairs, write_trainer_pairs};
use tomsb_core::judge::{
    aggregate_metrics, judge_batch, judge_trajectory, write_records, JudgeConfig,
};
use tomsb_core::protocol::{
    AnswerValue, DefenderMessage, DefenderReflection, PublicView, Role, SpeechAct, SCHEMA_VERSION,
};
use tomsb_core::scenario::{generate_scenarios, read_scenarios, write_scenarios, Scenario, ScenarioConfig};

#[derive(Parser)]
#[command(name = "tomsb", version, about = "Belief-steering game simulator and evaluation suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a balanced scenario dataset as JSON lines.
    Gen(GenArgs),
    /// Roll out dialogues between two agents over a scenario file.
    Rollout(RolloutArgs),
    /// Judge trajectories into rewards and an aggregate report.
    Eval(EvalArgs),
    /// Check scenario or trajectory files against their invariants.
    Validate(ValidateArgs),
    /// Play one scenario interactively as the defender.
    Play(PlayArgs),
    /// Export judged trajectories as trainer-ready (history, reward) pairs.
    Export(ExportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of scenarios; must be divisible by the depth.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    branching: usize,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// Name theme: corporate, research, or geographic.
    #[arg(long, default_value = "corporate")]
    theme: String,
    /// Train:eval ratio, e.g. 3:1.
    #[arg(long, default_value = "3:1")]
    split_ratio: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RolloutArgs {
    #[arg(long)]
    scenarios: PathBuf,
    /// Attacker: a variant name (base, cross_examiner, deception_aware,
    /// bluffing), llm:<model>, or a path to an agent-spec JSON file.
    #[arg(long)]
    attacker: String,
    /// Defender: a kind name (refuse, naive_mislead, tom_double_agent,
    /// oracle, pivot_on_challenge), llm:<model>, or a spec file path.
    #[arg(long)]
    defender: String,
    /// Template file for an llm: attacker.
    #[arg(long)]
    attacker_template: Option<PathBuf>,
    /// Template file for an llm: defender.
    #[arg(long)]
    defender_template: Option<PathBuf>,
    /// Restrict to one split before rolling out.
    #[arg(long, value_parser = ["train", "eval", "all"], default_value = "all")]
    split: String,
    /// Dialogues per scenario.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 15)]
    max_turns: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 picks automatically.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    traj: PathBuf,
    #[arg(long)]
    scenarios: PathBuf,
    /// Metrics report (single JSON document).
    #[arg(long)]
    out: PathBuf,
    /// Per-trajectory reward records; defaults to `<out>.rewards.jsonl`.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Optionally rewrite trajectories with their reward records embedded.
    #[arg(long)]
    annotated: Option<PathBuf>,
    /// Score a step only on a perfect estimate match.
    #[arg(long, default_value_t = false)]
    stepwise_all_or_nothing: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    scenarios: Option<PathBuf>,
    #[arg(long)]
    traj: Option<PathBuf>,
}

#[derive(Args)]
struct PlayArgs {
    /// Scenario file; plays the first scenario unless --id picks one.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    id: Option<String>,
    #[arg(long, default_value = "base")]
    attacker: String,
    #[arg(long)]
    attacker_template: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    max_turns: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record the played trajectory here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    traj: PathBuf,
    #[arg(long)]
    scenarios: PathBuf,
    #[arg(long, value_parser = ["trainer"], default_value = "trainer")]
    format: String,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Rollout(args) => cmd_rollout(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Play(args) => cmd_play(args),
        Command::Export(args) => cmd_export(args),
    }
}

fn parse_split_ratio(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(':')
        .with_context(|| format!("split ratio `{s}` must look like 3:1"))?;
    let train: usize = a.trim().parse().context("train part of the split ratio")?;
    let eval: usize = b.trim().parse().context("eval part of the split ratio")?;
    if train + eval == 0 {
        bail!("split ratio may not be 0:0");
    }
    Ok((train, eval))
}

/// Accept an inline kind, `llm:<model>`, or a path to a spec JSON file.
fn parse_agent_spec(value: &str, template: Option<&Path>) -> Result<AgentSpec> {
    let path = Path::new(value);
    if value.ends_with(".json") || path.exists() {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading agent spec {value}"))?;
        let spec: AgentSpec =
            serde_json::from_str(&text).with_context(|| format!("parsing agent spec {value}"))?;
        return Ok(spec);
    }
    Ok(AgentSpec {
        kind: value.to_string(),
        template: template.map(|p| p.display().to_string()),
        params: None,
    })
}

fn load_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_scenarios(BufReader::new(file)).with_context(|| format!("loading {}", path.display()))
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let config = ScenarioConfig {
        branching: args.branching,
        depth: args.depth,
        theme: args.theme,
        split_ratio: parse_split_ratio(&args.split_ratio)?,
    };
    let scenarios = generate_scenarios(args.seed, args.n, &config)?;
    let out =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_scenarios(BufWriter::new(out), &scenarios)?;
    let train = scenarios
        .iter()
        .filter(|s| s.split == tomsb_core::scenario::Split::Train)
        .count();
    println!(
        "wrote {} scenarios ({} train / {} eval) to {}",
        scenarios.len(),
        train,
        scenarios.len() - train,
        args.out.display()
    );
    Ok(())
}

fn cmd_rollout(args: RolloutArgs) -> Result<()> {
    let mut scenarios = load_scenarios(&args.scenarios)?;
    if args.split != "all" {
        let want = match args.split.as_str() {
            "train" => tomsb_core::scenario::Split::Train,
            _ => tomsb_core::scenario::Split::Eval,
        };
        scenarios.retain(|s| s.split == want);
    }
    if scenarios.is_empty() {
        bail!("no scenarios left after the split filter");
    }
    let attacker = parse_agent_spec(&args.attacker, args.attacker_template.as_deref())?;
    let defender = parse_agent_spec(&args.defender, args.defender_template.as_deref())?;
    let plan = RolloutPlan {
        k_per_scenario: args.k,
        max_turns: args.max_turns,
        seed: args.seed,
        workers: args.workers,
    };
    let trajectories = rollout_batch(&scenarios, &attacker, &defender, &plan)?;
    let errors = trajectories
        .iter()
        .filter(|t| t.outcome == Outcome::AgentError)
        .count();
    let out =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_trajectories(BufWriter::new(out), &trajectories)?;
    println!(
        "wrote {} trajectories ({errors} agent errors) to {}",
        trajectories.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let scenarios = load_scenarios(&args.scenarios)?;
    let file =
        File::open(&args.traj).with_context(|| format!("opening {}", args.traj.display()))?;
    let trajectories = read_trajectories(BufReader::new(file)).map_err(|e| anyhow::anyhow!(e))?;
    let config = JudgeConfig {
        stepwise_all_or_nothing: args.stepwise_all_or_nothing,
    };
    let pre_errors = trajectories
        .iter()
        .filter(|t| t.outcome == Outcome::AgentError)
        .count();
    let judgeable: Vec<Trajectory> = trajectories
        .iter()
        .filter(|t| t.outcome != Outcome::AgentError)
        .cloned()
        .collect();
    let (records, judge_errors) = judge_batch(&judgeable, &scenarios, &config)?;
    let report = aggregate_metrics(&records, &scenarios, pre_errors + judge_errors)?;

    let out =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(out), &report)?;

    let records_path = args.records.unwrap_or_else(|| {
        let mut p = args.out.clone();
        p.set_extension("rewards.jsonl");
        p
    });
    let rec_out = File::create(&records_path)
        .with_context(|| format!("creating {}", records_path.display()))?;
    write_records(BufWriter::new(rec_out), &records)?;

    if let Some(annotated_path) = args.annotated {
        let mut annotated = trajectories.clone();
        for t in &mut annotated {
            t.reward = records
                .iter()
                .find(|r| r.scenario_id == t.scenario_id && r.rollout_index == t.rollout_index)
                .cloned();
        }
        let ann_out = File::create(&annotated_path)
            .with_context(|| format!("creating {}", annotated_path.display()))?;
        write_trajectories(BufWriter::new(ann_out), &annotated)?;
    }

    println!(
        "n_all={} n_hard={} n_error={} fooling_all={:.1}% fooling_hard={} tom_traj={:.1}% tom_step={:.1}% avg_turns={:.2}",
        report.counts.n_all,
        report.counts.n_hard,
        report.counts.n_error,
        report.fooling_all,
        report
            .fooling_hard
            .map(|v| format!("{v:.1}%"))
            .unwrap_or_else(|| "n/a".to_string()),
        report.tom_traj,
        report.tom_step,
        report.avg_turns,
    );
    println!("report: {}", args.out.display());
    println!("records: {}", records_path.display());
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    if args.scenarios.is_none() && args.traj.is_none() {
        bail!("validate needs --scenarios and/or --traj");
    }
    let mut violations = 0usize;

    if let Some(path) = &args.scenarios {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match tomsb_core::scenario::scenario_from_json(&line) {
                Ok(s) => {
                    let report = s.validate();
                    for v in &report.violations {
                        violations += 1;
                        println!(
                            "{}:{}: {} {}{}",
                            path.display(),
                            i + 1,
                            v.rule,
                            v.entity
                                .as_deref()
                                .map(|e| format!("[{e}] "))
                                .unwrap_or_default(),
                            v.detail
                        );
                    }
                }
                Err(e) => {
                    violations += 1;
                    println!("{}:{}: parse {e}", path.display(), i + 1);
                }
            }
        }
    }

    if let Some(path) = &args.traj {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Trajectory>(&line) {
                Ok(t) => {
                    for v in t.check_invariants() {
                        violations += 1;
                        println!("{}:{}: {v}", path.display(), i + 1);
                    }
                }
                Err(e) => {
                    violations += 1;
                    println!("{}:{}: parse {e}", path.display(), i + 1);
                }
            }
        }
    }

    if violations > 0 {
        eprintln!("{violations} violation(s) found");
        std::process::exit(1);
    }
    println!("ok");
    Ok(())
}

/// Terminal-driven defender: prints what the attacker sent, reads a reply
/// plus guided act entry, and optional estimates.
struct HumanDefender<R: BufRead> {
    input: R,
    universe_depth: usize,
}

impl<R: BufRead> HumanDefender<R> {
    fn read_line(&mut self) -> Option<String> {
        let mut buf = String::new();
        match self.input.read_line(&mut buf) {
            Ok(0) => None,
            Ok(_) => Some(buf.trim_end_matches(['\n', '\r']).to_string()),
            Err(_) => None,
        }
    }

    fn read_estimate(&mut self, label: &str) -> Vec<Option<String>> {
        println!("{label} (comma-separated, `-` for unknown, empty to skip):");
        print!("> ");
        let _ = std::io::stdout().flush();
        let line = self.read_line().unwrap_or_default();
        if line.trim().is_empty() {
            return vec![None; self.universe_depth];
        }
        let mut slots: Vec<Option<String>> = line
            .split(',')
            .map(|s| {
                let s = s.trim();
                if s.is_empty() || s == "-" {
                    None
                } else {
                    Some(s.to_string())
                }
            })
            .collect();
        slots.resize(self.universe_depth, None);
        slots
    }
}

impl<R: BufRead + Send> DefenderAgent for HumanDefender<R> {
    fn step(&mut self, incoming: &PublicView) -> Result<DefenderMessage, AgentError> {
        println!("\n--- attacker ---------------------------------------------");
        println!("{}", incoming.text);
        for act in &incoming.acts {
            println!("  act: {}", serde_json::to_string(act).unwrap());
        }
        println!("------------------------------------------------------------");
        println!("your reply text:");
        print!("> ");
        let _ = std::io::stdout().flush();
        let reply = match self.read_line() {
            Some(line) => line,
            None => {
                // input closed: walk away politely
                return Ok(DefenderMessage {
                    schema: SCHEMA_VERSION.to_string(),
                    role: Role::Defender,
                    reflection: DefenderReflection {
                        tom_estimate: vec![None; self.universe_depth],
                        prior_estimate: vec![None; self.universe_depth],
                        trust_estimate: 0,
                        note: "input closed".to_string(),
                    },
                    reply: "I have to go.".to_string(),
                    acts: vec![SpeechAct::Refuse],
                });
            }
        };

        let mut acts = Vec::new();
        println!("acts — one per line: `claim <level> <entity>`, `answer yes|no|<entity>`,");
        println!("`refuse`, `ask_prior`; finish with `done`:");
        loop {
            print!("> ");
            let _ = std::io::stdout().flush();
            let line = match self.read_line() {
                Some(line) => line,
                None => break,
            };
            let line = line.trim().to_string();
            if line.is_empty() || line == "done" {
                break;
            }
            let mut parts = line.splitn(3, ' ');
            match parts.next() {
                Some("claim") => {
                    let level = parts.next().and_then(|s| usize::from_str(s).ok());
                    let entity = parts.next().map(|s| s.to_string());
                    match (level, entity) {
                        (Some(level), Some(entity)) => {
                            acts.push(SpeechAct::Claim { level, entity })
                        }
                        _ => println!("usage: claim <level> <entity>"),
                    }
                }
                Some("answer") => {
                    let rest = parts.collect::<Vec<_>>().join(" ");
                    let value = match rest.trim() {
                        "yes" => AnswerValue::Yes,
                        "no" => AnswerValue::No,
                        other if !other.is_empty() => AnswerValue::Entity(other.to_string()),
                        _ => {
                            println!("usage: answer yes|no|<entity>");
                            continue;
                        }
                    };
                    acts.push(SpeechAct::Answer { value });
                }
                Some("refuse") => acts.push(SpeechAct::Refuse),
                Some("ask_prior") => acts.push(SpeechAct::AskPrior),
                Some(other) => println!("unknown act `{other}`"),
                None => {}
            }
        }
        if acts.is_empty() {
            acts.push(SpeechAct::Refuse);
        }

        let tom_estimate = self.read_estimate("your estimate of their current beliefs");
        let prior_estimate = self.read_estimate("your estimate of their prior knowledge");
        println!("your estimate of their trust (0-5, empty for 5):");
        print!("> ");
        let _ = std::io::stdout().flush();
        let trust_estimate = self
            .read_line()
            .and_then(|l| l.trim().parse::<i32>().ok())
            .unwrap_or(5)
            .clamp(0, 5);

        Ok(DefenderMessage {
            schema: SCHEMA_VERSION.to_string(),
            role: Role::Defender,
            reflection: DefenderReflection {
                tom_estimate,
                prior_estimate,
                trust_estimate,
                note: "human turn".to_string(),
            },
            reply,
            acts,
        })
    }
}

fn cmd_play(args: PlayArgs) -> Result<()> {
    let scenarios = load_scenarios(&args.scenario)?;
    let scenario = match &args.id {
        Some(id) => scenarios
            .into_iter()
            .find(|s| &s.id == id)
            .with_context(|| format!("no scenario with id {id}"))?,
        None => scenarios
            .into_iter()
            .next()
            .context("scenario file is empty")?,
    };

    println!("scenario {} — you are the defender.", scenario.id);
    println!(
        "target: {}   levels: {}",
        scenario.target_name,
        scenario.universe.level_names().join(" > ")
    );
    println!("universe:\n{}", scenario.universe);
    println!(
        "your private information (protect the fine-grained parts!): {}",
        scenario
            .universe
            .path_names(&scenario.ground_truth)
            .join(" > ")
    );
    println!("you are NOT told what the attacker already knows.");

    let attacker_spec = parse_agent_spec(&args.attacker, args.attacker_template.as_deref())?;
    let mut attacker = build_attacker(&attacker_spec, &scenario, args.seed)?;
    let mut human = HumanDefender {
        input: BufReader::new(std::io::stdin()),
        universe_depth: scenario.universe.depth(),
    };
    let opts = DialogueOptions {
        max_turns: args.max_turns,
        seed: args.seed,
        rollout_index: 0,
        attacker_spec,
        defender_spec: AgentSpec {
            kind: "human".to_string(),
            template: None,
            params: None,
        },
    };
    let trajectory = run_dialogue(&scenario, attacker.as_mut(), &mut human, &opts);

    println!(
        "\n=== outcome: {:?} after {} turn(s) ===",
        trajectory.outcome, trajectory.num_turns
    );
    match judge_trajectory(&trajectory, &scenario, &JudgeConfig::default()) {
        Ok(record) => println!(
            "fooling={} tom={} stepwise={:.2} leaked={}",
            record.r_fool, record.r_tom, record.stepwise_tom, record.leaked
        ),
        Err(e) => println!("not judgeable: {e}"),
    }
    if let Some(out) = args.out {
        let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
        write_trajectories(BufWriter::new(file), std::slice::from_ref(&trajectory))?;
        println!("trajectory written to {}", out.display());
    }
    Ok(())
}

fn cmd_export(args: ExportArgs) -> Result<()> {
    let scenarios = load_scenarios(&args.scenarios)?;
    let file =
        File::open(&args.traj).with_context(|| format!("opening {}", args.traj.display()))?;
    let trajectories = read_trajectories(BufReader::new(file)).map_err(|e| anyhow::anyhow!(e))?;
    let (pairs, skipped) = export_trainer_pairs(&trajectories, &scenarios, &JudgeConfig::default())?;
    let out =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_trainer_pairs(BufWriter::new(out), &pairs)?;
    println!(
        "wrote {} trainer pairs ({skipped} skipped) to {}",
        pairs.len(),
        args.out.display()
    );
    Ok(())
}
