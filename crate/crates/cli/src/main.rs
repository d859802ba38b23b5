mod manifest;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ledgermine::causal::{self, CausalResult, Confounder};
use ledgermine::guidance::{self, Context};
use ledgermine::kgraph::{read_expert_rules, CausalEdge, ExpertRule, KnowledgeGraph};
use ledgermine::ledger::{load_ledger_with, EventType, IngestMode, Ledger, Taxonomy};
use ledgermine::miner::{self, Hypothesis, HypothesisRecord};
use ledgermine::pipeline::{self, Input, PipelineConfig};
use ledgermine::synth::{self, Scenario};
use ledgermine::time::{format_iso, parse_iso, Timestamp};
use ledgermine::Error;

use manifest::{scan_manifest_flag, RunManifest};

const LOG_ENV: &str = "LEDGERMINE_LOG";

#[derive(Parser)]
#[command(name = "ledgermine", version, about = "Mine, test and act on a personal event ledger")]
struct Cli {
    /// Seed for every random draw
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pipeline config JSON (miner, causal, top_k)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Where to write the run manifest
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Reject the whole ledger on the first bad line (default)
    #[arg(long, global = true, conflicts_with = "lenient")]
    strict: bool,
    /// Skip bad ledger lines with a warning
    #[arg(long, global = true)]
    lenient: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct LedgerArgs {
    #[arg(long)]
    ledger: PathBuf,
    #[arg(long)]
    taxonomy: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a ledger and write it back normalized
    Ingest {
        #[command(flatten)]
        input: LedgerArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank temporal association hypotheses
    Mine {
        #[command(flatten)]
        input: LedgerArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test one hypothesis against matched controls
    Test {
        #[command(flatten)]
        input: LedgerArgs,
        /// e.g. "exercise.bike W[2,4] work"
        #[arg(long)]
        hypothesis: String,
        /// Overrides the config's confounders; repeatable
        #[arg(long = "confounder")]
        confounders: Vec<String>,
        #[arg(long)]
        permutations: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build or export the causal knowledge graph
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Recommend actions toward the context's goal
    Recommend {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long)]
        context: PathBuf,
        /// Minimum edge confidence
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        /// Fallback media, first preferred; repeatable
        #[arg(long = "media")]
        media: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a ledger with planted ground truth
    Synth {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// synth or ingest, then mine, test, build the graph and report
    Pipeline {
        #[arg(long, conflicts_with_all = ["ledger", "taxonomy"])]
        scenario: Option<PathBuf>,
        #[arg(long, requires = "taxonomy")]
        ledger: Option<PathBuf>,
        #[arg(long, requires = "ledger")]
        taxonomy: Option<PathBuf>,
        /// Expert rules JSONL
        #[arg(long)]
        expert: Option<PathBuf>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Fold significant test results and expert rules into a graph
    Build {
        #[arg(long)]
        taxonomy: PathBuf,
        /// Output of `test`; repeatable
        #[arg(long = "results")]
        results: Vec<PathBuf>,
        /// Expert rules JSONL
        #[arg(long)]
        expert: Option<PathBuf>,
        /// Existing graph to extend
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Timestamp for expert edges; defaults to the latest result
        #[arg(long)]
        now: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a graph as Graphviz DOT
    ExportDot {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Output of `test`, input of `graph build`.
#[derive(Serialize, Deserialize)]
struct TestRecord {
    hypothesis: HypothesisRecord,
    /// Ledger end; stamped on the edge.
    as_of: String,
    alpha: f64,
    significant: bool,
    result: CausalResult,
}

enum Failure {
    Usage(String),
    Invalid(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Invalid(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

struct Run<'a> {
    cli: &'a Cli,
    manifest: RunManifest,
}

impl Run<'_> {
    fn seed(&self) -> u64 {
        self.cli.seed.unwrap_or(0)
    }

    fn mode(&self) -> IngestMode {
        if self.cli.lenient {
            IngestMode::Lenient
        } else {
            IngestMode::Strict
        }
    }

    fn config(&mut self) -> Result<PipelineConfig, Failure> {
        let Some(path) = &self.cli.config else {
            return Ok(PipelineConfig::default());
        };
        self.manifest.config = Some(path.display().to_string());
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::Invalid(Error::InvalidConfig(format!("{}: {e}", path.display()))))
    }

    fn taxonomy(&mut self, path: &Path) -> Result<Taxonomy, Failure> {
        self.manifest.input("taxonomy", path);
        Ok(Taxonomy::load(path)?)
    }

    fn ledger(&mut self, args: &LedgerArgs) -> Result<(Ledger, Taxonomy, Vec<String>), Failure> {
        let taxonomy = self.taxonomy(&args.taxonomy)?;
        self.manifest.input("ledger", &args.ledger);
        let (ledger, skipped) = load_ledger_with(&args.ledger, &taxonomy, self.mode())?;
        for s in &skipped {
            log::warn!("skipped {s}");
        }
        Ok((ledger, taxonomy, skipped))
    }

    /// Writes `text` to `out`, or stdout.
    fn write(&mut self, out: Option<&PathBuf>, text: &str) -> Outcome {
        match out {
            Some(path) => {
                fs::write(path, text)?;
                self.manifest.output(path);
            }
            None => io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, out: Option<&PathBuf>, value: &T) -> Outcome {
        let text = serde_json::to_string_pretty(value).map_err(Error::from)? + "\n";
        self.write(out, &text)
    }

    fn dispatch(&mut self) -> Outcome {
        let cli = self.cli;
        match &cli.command {
            Command::Ingest { input, out } => {
                let (ledger, _, skipped) = self.ledger(input)?;
                let mut buf = Vec::new();
                ledger.write_jsonl(&mut buf)?;
                self.write(out.as_ref(), &String::from_utf8_lossy(&buf))?;
                self.manifest.summary = Some(serde_json::json!({
                    "events": ledger.len(),
                    "skipped": skipped,
                }));
            }
            Command::Mine { input, out } => {
                let config = self.config()?;
                let (ledger, taxonomy, _) = self.ledger(input)?;
                let found = miner::mine_associations(&ledger, &taxonomy, &config.miner)?;
                self.manifest.summary = Some(serde_json::json!({ "hypotheses": found.len() }));
                let records: Vec<HypothesisRecord> = found.into_iter().map(Into::into).collect();
                self.write_json(out.as_ref(), &records)?;
            }
            Command::Test { input, hypothesis, confounders, permutations, out } => {
                let mut config = self.config()?;
                if !confounders.is_empty() {
                    config.causal.confounders = confounders
                        .iter()
                        .map(|c| c.parse::<Confounder>())
                        .collect::<Result<_, _>>()?;
                }
                if let Some(p) = permutations {
                    config.causal.permutations = *p;
                }
                config.causal.validate()?;
                let (ledger, taxonomy, _) = self.ledger(input)?;
                let mut hyp = Hypothesis::parse_rule(hypothesis)?;
                hyp.validate(&taxonomy)?;
                if let Some(a) = hyp.antecedent.as_atom() {
                    let stats = miner::association_stats(&ledger, a, &hyp.outcome, hyp.window, &taxonomy)?;
                    hyp.support = stats.support;
                    hyp.confidence = stats.confidence;
                    hyp.lift = stats.lift;
                }
                let result = causal::evaluate(&ledger, &hyp, &taxonomy, &config.causal, self.seed())?;
                let as_of = ledger.span().map_or(0, |(_, hi)| hi);
                let record = TestRecord {
                    hypothesis: hyp.into(),
                    as_of: format_iso(as_of),
                    alpha: config.causal.alpha,
                    significant: result.is_significant(config.causal.alpha),
                    result,
                };
                self.write_json(out.as_ref(), &record)?;
            }
            Command::Graph(GraphCommand::Build { taxonomy, results, expert, graph, now, out }) => {
                let taxonomy = self.taxonomy(taxonomy)?;
                let mut g = match graph {
                    Some(path) => {
                        self.manifest.input("graph", path);
                        KnowledgeGraph::load(path, &taxonomy)?
                    }
                    None => KnowledgeGraph::new(&taxonomy),
                };
                let mut latest: Option<Timestamp> = None;
                let mut added = 0usize;
                for (i, path) in results.iter().enumerate() {
                    self.manifest.input(&format!("results[{i}]"), path);
                    let text = fs::read_to_string(path)?;
                    let record: TestRecord = serde_json::from_str(&text)
                        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                    let as_of = parse_iso(&record.as_of)?;
                    latest = latest.max(Some(as_of));
                    if !record.significant {
                        continue;
                    }
                    let hyp = Hypothesis::try_from(record.hypothesis)?;
                    if let Some(edge) = CausalEdge::from_result(&hyp, &record.result, as_of) {
                        g.upsert_edge(edge, &taxonomy)?;
                        added += 1;
                    }
                }
                if let Some(path) = expert {
                    self.manifest.input("expert", path);
                    let stamp = match now {
                        Some(text) => parse_iso(text)?,
                        None => latest.unwrap_or(0),
                    };
                    g.seed_expert_rules(path, &taxonomy, stamp)?;
                }
                self.manifest.summary = Some(serde_json::json!({
                    "mined_edges_added": added,
                    "edges": g.edge_count(),
                }));
                let text = g.to_json()? + "\n";
                self.write(out.as_ref(), &text)?;
            }
            Command::Graph(GraphCommand::ExportDot { graph, taxonomy, out }) => {
                let taxonomy = self.taxonomy(taxonomy)?;
                self.manifest.input("graph", graph);
                let g = KnowledgeGraph::load(graph, &taxonomy)?;
                self.write(out.as_ref(), &g.to_dot())?;
            }
            Command::Recommend { graph, taxonomy, context, theta, media, out } => {
                if !(0.0..=1.0).contains(theta) {
                    return Err(Failure::Usage(format!("--theta {theta} is outside [0,1]")));
                }
                let taxonomy = self.taxonomy(taxonomy)?;
                self.manifest.input("graph", graph);
                self.manifest.input("context", context);
                let g = KnowledgeGraph::load(graph, &taxonomy)?;
                let ctx = Context::from_json(&fs::read_to_string(context)?, &taxonomy)?;
                let media: Vec<EventType> = media
                    .iter()
                    .map(|m| EventType::new(m.as_str()))
                    .collect::<Result<_, _>>()?;
                let recs = guidance::recommend(&g, &ctx, &taxonomy, *theta, &media)?;
                self.write_json(out.as_ref(), &recs)?;
            }
            Command::Synth { scenario, out } => {
                self.manifest.input("scenario", scenario);
                let mut s = Scenario::load(scenario)?;
                if let Some(seed) = cli.seed {
                    s.seed = seed;
                }
                self.manifest.seed = Some(s.seed);
                let (ledger, truth) = synth::generate(&s)?;
                fs::create_dir_all(out)?;
                let path = out.join("ledger.jsonl");
                ledger.save(&path)?;
                self.manifest.output(&path);
                let path = out.join("taxonomy.json");
                s.taxonomy()?.save(&path)?;
                self.manifest.output(&path);
                self.write_json(Some(&out.join("truth.json")), &truth)?;
                self.manifest.summary = Some(serde_json::json!({ "events": ledger.len() }));
            }
            Command::Pipeline { scenario, ledger, taxonomy, expert, out } => {
                let config = self.config()?;
                let input = match (scenario, ledger, taxonomy) {
                    (Some(path), _, _) => {
                        self.manifest.input("scenario", path);
                        let mut s = Scenario::load(path)?;
                        if let Some(seed) = cli.seed {
                            s.seed = seed;
                        }
                        Input::Synth(s)
                    }
                    (None, Some(l), Some(t)) => {
                        let (ledger, taxonomy, _) = self.ledger(&LedgerArgs {
                            ledger: l.clone(),
                            taxonomy: t.clone(),
                        })?;
                        Input::Ledger { ledger, taxonomy }
                    }
                    _ => {
                        return Err(Failure::Usage(
                            "pipeline needs --scenario or --ledger with --taxonomy".into(),
                        ))
                    }
                };
                let rules: Vec<ExpertRule> = match expert {
                    Some(path) => {
                        self.manifest.input("expert", path);
                        read_expert_rules(io::BufReader::new(fs::File::open(path)?))?
                    }
                    None => Vec::new(),
                };
                let result = pipeline::run(input, &config, &rules, self.seed())?;
                fs::create_dir_all(out)?;
                let t = &result.timings;
                for (name, d) in [("prepare", t.prepare), ("mine", t.mine), ("test", t.test), ("graph", t.graph)] {
                    self.manifest.timings_ms.insert(name.into(), d.as_secs_f64() * 1e3);
                }
                let hyps: Vec<HypothesisRecord> = result.hypotheses.iter().cloned().map(Into::into).collect();
                self.write_json(Some(&out.join("hypotheses.json")), &hyps)?;
                self.write(Some(&out.join("graph.json")), &(result.graph.to_json()? + "\n"))?;
                self.write(Some(&out.join("graph.dot")), &result.graph.to_dot())?;
                if let Some(truth) = &result.truth {
                    self.write_json(Some(&out.join("truth.json")), truth)?;
                }
                self.write_json(Some(&out.join("report.json")), &result.report)?;
                self.manifest.summary = Some(serde_json::json!({
                    "events": result.report.events,
                    "hypotheses": result.report.hypotheses_mined,
                    "edges": result.report.edges,
                    "precision": result.report.precision,
                    "recall": result.report.recall,
                }));
            }
        }
        Ok(())
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Ingest { .. } => "ingest",
        Command::Mine { .. } => "mine",
        Command::Test { .. } => "test",
        Command::Graph(GraphCommand::Build { .. }) => "graph build",
        Command::Graph(GraphCommand::ExportDot { .. }) => "graph export-dot",
        Command::Recommend { .. } => "recommend",
        Command::Synth { .. } => "synth",
        Command::Pipeline { .. } => "pipeline",
    }
}

/// Explicit `--manifest`, else next to `--out`, else stderr.
fn manifest_path(cli: &Cli) -> Option<PathBuf> {
    if cli.manifest.is_some() {
        return cli.manifest.clone();
    }
    let out = match &cli.command {
        Command::Synth { out, .. } | Command::Pipeline { out, .. } => return Some(out.join("manifest.json")),
        Command::Ingest { out, .. }
        | Command::Mine { out, .. }
        | Command::Test { out, .. }
        | Command::Recommend { out, .. }
        | Command::Graph(GraphCommand::Build { out, .. })
        | Command::Graph(GraphCommand::ExportDot { out, .. }) => out.as_ref()?,
    };
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    Some(PathBuf::from(name))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let started = Instant::now();
    let mut manifest = RunManifest {
        argv: argv.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at: format_iso(chrono::Utc::now().timestamp()),
        ..Default::default()
    };

    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            manifest.command = "usage".into();
            manifest.exit_code = 2;
            manifest.error = Some(e.to_string().trim().to_string());
            manifest.error_kind = Some("Usage".into());
            manifest.elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
            manifest.emit(scan_manifest_flag(&argv).as_ref());
            return ExitCode::from(2);
        }
    };

    manifest.command = command_name(&cli.command).into();
    manifest.seed = manifest.seed.or(cli.seed);
    let mut run = Run { cli: &cli, manifest };
    let outcome = run.dispatch();
    let mut manifest = run.manifest;
    if manifest.seed.is_none() {
        manifest.seed = Some(cli.seed.unwrap_or(0));
    }
    let code = match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            manifest.error = Some(msg);
            manifest.error_kind = Some("Usage".into());
            2
        }
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {} ({e})", e.kind());
            manifest.error = Some(e.to_string());
            manifest.error_kind = Some(e.kind().into());
            1
        }
    };
    manifest.exit_code = code;
    manifest.elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    manifest.emit(manifest_path(&cli).as_ref());
    ExitCode::from(code as u8)
}
