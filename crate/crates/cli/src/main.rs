use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use baseplace::harness::{self, LoadedTask, Method, OracleSource, Settings, Trial};
use baseplace::optimizer::AlphaMode;
use baseplace::oracle::http::{HttpOracle, HttpOracleConfig, DEFAULT_TOKEN_ENV};
use baseplace::oracle::ScriptedOracleConfig;
use baseplace::trace::{ErrorKind, PlanTrace};
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_PLANNING: u8 = 2;
const EXIT_ORACLE: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(name = "baseplace", version, about = "Base placement for mobile manipulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one placement and write its trace.
    Plan {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        task: PathBuf,
        #[arg(long, default_value = "ours")]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        oracle: OracleArgs,
    },
    /// Run every method over a suite and write traces and a report.
    Eval {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        /// Comma-separated method tags; all standard methods when omitted.
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        oracle: OracleArgs,
    },
    /// α or projection ablation of the full method.
    Ablate {
        #[arg(long, value_enum)]
        mode: AblationMode,
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        oracle: OracleArgs,
    },
    /// Per-iteration candidate heatmaps for a stored trace.
    Render {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AblationMode {
    Alpha,
    Projection,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleKind {
    Scripted,
    Http,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum, default_value = "scripted")]
    oracle: OracleKind,
    /// Corruption rate of the scripted oracle.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long)]
    oracle_url: Option<String>,
    #[arg(long, default_value = "gpt-4o")]
    oracle_model: String,
    /// Environment variable holding the bearer token.
    #[arg(long, default_value = DEFAULT_TOKEN_ENV)]
    token_env: String,
    #[arg(long, default_value_t = 60_000)]
    timeout_ms: u64,
    #[arg(long, default_value_t = 4)]
    max_concurrent: usize,
}

struct Fail(u8, String);

impl OracleArgs {
    fn settings(&self) -> Result<Settings, Fail> {
        let oracle = match self.oracle {
            OracleKind::Scripted => {
                if !(0.0..1.0).contains(&self.epsilon) {
                    return Err(Fail(EXIT_CONFIG, format!("--epsilon must lie in [0, 1), got {}", self.epsilon)));
                }
                OracleSource::Scripted(ScriptedOracleConfig { noise_epsilon: self.epsilon, ..Default::default() })
            }
            OracleKind::Http => {
                let url = self.oracle_url.clone().ok_or_else(|| Fail(EXIT_CONFIG, "--oracle http needs --oracle-url".into()))?;
                OracleSource::Http(HttpOracle::new(HttpOracleConfig {
                    url,
                    model: self.oracle_model.clone(),
                    token_env: self.token_env.clone(),
                    timeout_ms: self.timeout_ms,
                    max_concurrent: self.max_concurrent,
                }))
            }
        };
        Ok(Settings { render_attachments: self.oracle == OracleKind::Http, oracle, ..Default::default() })
    }
}

fn io_fail(path: &Path, e: impl std::fmt::Display) -> Fail {
    Fail(EXIT_CONFIG, format!("{}: {e}", path.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Fail> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_fail(path, e))
}

fn load_suite(path: &Path) -> Result<Vec<LoadedTask>, Fail> {
    harness::load_suite(path).map_err(|e| io_fail(path, e))
}

fn write_run(out: &Path, report: &harness::EvalReport, traces: &[PlanTrace]) -> Result<(), Fail> {
    for t in traces {
        let name = format!("{}-{:03}.json", t.task, t.trial_index);
        write(&out.join("traces").join(t.method.replace(['[', ']', '='], "_")).join(name), t.to_json())?;
    }
    write(&out.join("report.json"), report.to_json())?;
    write(&out.join("report.txt"), report.to_table())?;
    print!("{}", report.to_table());
    println!("report sha256 {}", report.hash());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Fail> {
    match cli.command {
        Command::Plan { scene, task, method, seed, out, oracle } => {
            let method: Method = method.parse().map_err(|e| Fail(EXIT_CONFIG, e))?;
            let settings = oracle.settings()?;
            let lt = LoadedTask::load(&scene, &task).map_err(|e| Fail(EXIT_CONFIG, e.to_string()))?;
            let trial = Trial { scene: &lt.scene, scene_name: &lt.scene_name, task: &lt.task, task_name: &lt.task_name, base_seed: seed, trial_index: 0, seed };
            let trace = harness::run_trial(&method, &trial, &settings);
            write(&out.join("trace.json"), trace.to_json())?;
            if let Some(e) = &trace.error {
                let code = match e.kind {
                    ErrorKind::Config => EXIT_CONFIG,
                    ErrorKind::Planning => EXIT_PLANNING,
                    ErrorKind::Oracle => EXIT_ORACLE,
                };
                return Err(Fail(code, e.message.clone()));
            }
            let p = trace.placement.expect("placement set when no error");
            println!("placement x={:.3} y={:.3} theta={:.3}", p.x, p.y, p.theta);
            match trace.outcome.reason {
                None => println!("success model: success"),
                Some(r) => println!("success model: failure ({})", r.as_str()),
            }
            Ok(())
        }
        Command::Eval { suite, trials, base_seed, methods, out, oracle } => {
            let methods = match methods {
                Some(list) => list.split(',').map(|m| m.trim().parse()).collect::<Result<Vec<Method>, _>>().map_err(|e| Fail(EXIT_CONFIG, e))?,
                None => Method::standard(),
            };
            let settings = oracle.settings()?;
            let tasks = load_suite(&suite)?;
            let (report, traces) = harness::run_suite(&methods, &tasks, trials, base_seed, &settings);
            write_run(&out, &report, &traces)
        }
        Command::Ablate { mode, suite, trials, base_seed, out, oracle } => {
            let settings = oracle.settings()?;
            let tasks = load_suite(&suite)?;
            let (report, traces) = match mode {
                AblationMode::Alpha => {
                    let values = [AlphaMode::Fixed(0.0), AlphaMode::Fixed(0.5), AlphaMode::Fixed(1.0), AlphaMode::Schedule];
                    harness::ablate_alpha(&values, &tasks, trials, base_seed, &settings)
                }
                AblationMode::Projection => harness::ablate_projection(&tasks, trials, base_seed, &settings),
            };
            write_run(&out, &report, &traces)
        }
        Command::Render { trace, out } => {
            let text = fs::read_to_string(&trace).map_err(|e| io_fail(&trace, e))?;
            let t = PlanTrace::from_json(&text).map_err(|e| io_fail(&trace, e))?;
            let images = harness::render_heatmap(&t);
            if images.is_empty() {
                println!("trace has no optimizer iterations; nothing to render");
            }
            for (k, img) in images.iter().enumerate() {
                let path = out.join(format!("heatmap-{}.png", k + 1));
                write(&path, img.to_png())?;
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
