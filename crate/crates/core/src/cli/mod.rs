//! The `hocbf` command line: `run`, `check` and `plotdata`.
//!
//! Exit codes: 0 success, 1 configuration or schema error, 2 the safety
//! filter halted the rollout, 3 a verification threshold was breached.

pub mod check;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{level_set_outline, ScalingPrimitive};
use crate::sim::{run_scenario, scenarios, CsvTable, ScenarioConfig};

pub use check::{replay, run_check, CheckReport, FailureDump, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_HALTED: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

/// Points per sampled level set.
pub const OUTLINE_POINTS: usize = 256;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const REPORT_FILE: &str = "check_report.json";

#[derive(Debug, Parser)]
#[command(name = "hocbf", version, about = "Collision-free control among convex primitives with high-order CBFs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out a scenario and write trajectory.csv, summary.json and
    /// scenario.json.
    Run {
        /// Built-in scenario name, or `random` (seeded by --seed).
        #[arg(long, conflicts_with = "config")]
        scenario: Option<String>,
        /// Scenario JSON document.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Force the circulation row on (default linear form) or off.
        #[arg(long, value_enum)]
        circulation: Option<Toggle>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Finite-difference and cross-solver verification sweeps.
    Check {
        #[arg(value_enum, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Cases per shard (pair kind × dimension).
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Directory for the report and failure dumps.
        #[arg(long, default_value = "check-out")]
        out: PathBuf,
        /// Re-run a failure dump instead of sweeping.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Plot-ready CSV blocks from a trajectory log.
    Plotdata {
        /// trajectory.csv written by `run`.
        log: PathBuf,
        /// Scenario JSON for obstacle outlines; defaults to scenario.json next
        /// to the log.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run { scenario, config, seed, dt, horizon, circulation, out } => {
            let overrides = Overrides { seed, dt, horizon, circulation };
            cmd_run(scenario.as_deref(), config.as_deref(), &overrides, &out)
        }
        Command::Check { suite, seed, count, out, replay } => match replay {
            Some(path) => cmd_replay(&path),
            None => cmd_check(suite, seed, count, &out),
        },
        Command::Plotdata { log, config, out } => cmd_plotdata(&log, config.as_deref(), out.as_deref()),
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub circulation: Option<Toggle>,
}

/// Resolves the scenario and applies command-line overrides.
pub fn load_config(scenario: Option<&str>, config: Option<&Path>, o: &Overrides) -> Result<ScenarioConfig> {
    let mut cfg = match (scenario, config) {
        (Some("random"), None) => scenarios::random_scenario(o.seed.unwrap_or(0)),
        (Some(name), None) => {
            scenarios::builtin(name).ok_or_else(|| Error::Config(format!("unknown scenario '{name}' (built-in: {}, random)", scenarios::BUILTIN.join(", "))))?
        }
        (None, Some(path)) => ScenarioConfig::from_json(&fs::read_to_string(path)?)?,
        (None, None) => return Err(Error::Config("one of --scenario or --config is required".into())),
        (Some(_), Some(_)) => return Err(Error::Config("--scenario and --config are exclusive".into())),
    };
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(dt) = o.dt {
        cfg.dt = dt;
    }
    if let Some(h) = o.horizon {
        cfg.horizon = h;
    }
    match o.circulation {
        Some(Toggle::Off) => cfg.circulation = None,
        Some(Toggle::On) if cfg.circulation.is_none() => cfg.circulation = Some(scenarios::linear_circulation()),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn diagnostic(e: &dyn std::fmt::Display) {
    eprintln!("hocbf: {e}");
}

pub fn cmd_run(scenario: Option<&str>, config: Option<&Path>, o: &Overrides, out: &Path) -> i32 {
    let cfg = match load_config(scenario, config, o) {
        Ok(c) => c,
        Err(e) => {
            diagnostic(&e);
            return EXIT_CONFIG;
        }
    };
    // Configuration problems surface before anything is written.
    let (log, summary) = match run_scenario(&cfg) {
        Ok(x) => x,
        Err(e) => {
            diagnostic(&e);
            return EXIT_CONFIG;
        }
    };
    let written = (|| -> Result<()> {
        fs::create_dir_all(out)?;
        let n_q = cfg.n_q();
        let n_v = cfg.robot.task_map.n_v();
        let file = fs::File::create(out.join(TRAJECTORY_FILE))?;
        log.write_csv(n_q, n_v, cfg.n_u(), cfg.obstacles.len(), io::BufWriter::new(file))?;
        fs::write(out.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
        fs::write(out.join(SCENARIO_FILE), serde_json::to_string_pretty(&cfg)?)?;
        Ok(())
    })();
    if let Err(e) = written {
        diagnostic(&e);
        return EXIT_CONFIG;
    }
    let goal = summary.goal_reached.map_or("n/a".to_string(), |g| g.to_string());
    println!("{}: {} steps, goal reached {goal}, equilibrium {}, min h {:.4e}", summary.scenario, summary.steps, summary.equilibrium.detected, summary.min_h);
    if summary.halted {
        diagnostic(&summary.halt_reason.as_deref().unwrap_or("rollout halted"));
        return EXIT_HALTED;
    }
    EXIT_OK
}

pub fn cmd_check(suite: Suite, seed: u64, count: usize, out: &Path) -> i32 {
    let report = run_check(suite, seed, count);
    let text = match serde_json::to_string_pretty(&report) {
        Ok(t) => t,
        Err(e) => {
            diagnostic(&e);
            return EXIT_CONFIG;
        }
    };
    println!("{text}");
    let written = (|| -> Result<()> {
        fs::create_dir_all(out)?;
        fs::write(out.join(REPORT_FILE), &text)?;
        for f in &report.failures {
            let name = format!("failure_{}_{}_{}.json", serde_json::to_value(f.suite)?.as_str().unwrap_or("suite"), f.shard.replace('/', "_"), f.index);
            fs::write(out.join(name), serde_json::to_string_pretty(f)?)?;
        }
        Ok(())
    })();
    if let Err(e) = written {
        diagnostic(&e);
        return EXIT_CONFIG;
    }
    if report.passed {
        EXIT_OK
    } else {
        diagnostic(&format!("{} case(s) breached their thresholds; dumps in {}", report.failures.len(), out.display()));
        EXIT_CHECK
    }
}

pub fn cmd_replay(path: &Path) -> i32 {
    let dump: FailureDump = match fs::read_to_string(path).map_err(Error::from).and_then(|t| Ok(serde_json::from_str(&t)?)) {
        Ok(d) => d,
        Err(e) => {
            diagnostic(&e);
            return EXIT_CONFIG;
        }
    };
    match replay(&dump) {
        Ok(ms) => {
            println!("{}", serde_json::to_string_pretty(&ms).unwrap_or_default());
            if ms.iter().all(|m| m.passed()) {
                EXIT_OK
            } else {
                diagnostic(&"replayed case still breaches its threshold");
                EXIT_CHECK
            }
        }
        Err(e) => {
            diagnostic(&e);
            EXIT_CHECK
        }
    }
}

/// Plot series of a log: trajectory polyline, level-set outlines of every
/// obstacle and of the robot at both ends, and barrier values over time.
pub fn plot_blocks(table: &CsvTable, cfg: Option<&ScenarioConfig>, out: &mut impl Write) -> Result<()> {
    if table.rows.is_empty() {
        return Ok(());
    }
    let t = table.column("t")?;
    let q = table.indexed("q_");
    if q.is_empty() {
        return Err(Error::Schema("log has no q_1 column".into()));
    }
    let qs: Vec<Vec<f64>> = q.iter().map(|c| table.column(c)).collect::<Result<_>>()?;
    let hs = table.indexed("h_");
    let hv: Vec<Vec<f64>> = hs.iter().map(|c| table.column(c)).collect::<Result<_>>()?;
    let phi = table.column("phi")?;

    writeln!(out, "# trajectory")?;
    writeln!(out, "t,{}", q.join(","))?;
    for k in 0..t.len() {
        let row: Vec<String> = qs.iter().map(|c| c[k].to_string()).collect();
        writeln!(out, "{},{}", t[k], row.join(","))?;
    }

    if let (Some(cfg), 2) = (cfg, cfg.map_or(0, |c| c.robot.shape.dim())) {
        let (xs, ys) = (&qs[0], &qs[1]);
        let span = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let ((x0, x1), (y0, y1)) = (span(xs), span(ys));
        let centre = [0.5 * (x0 + x1), 0.5 * (y0 + y1)];
        let half = 0.5 * ((x1 - x0).hypot(y1 - y0)) + 2.0;
        let outline = |out: &mut dyn Write, title: &str, shape: &ScalingPrimitive, frame: &crate::geometry::FrameParams| -> Result<()> {
            writeln!(out)?;
            writeln!(out, "# outline {title} {}", shape.kind_name())?;
            writeln!(out, "x,y")?;
            for [x, y] in level_set_outline(shape, frame, OUTLINE_POINTS, &centre, half)? {
                writeln!(out, "{x},{y}")?;
            }
            Ok(())
        };
        for (i, o) in cfg.obstacles.iter().enumerate() {
            outline(out, &format!("obstacle_{}", i + 1), &o.shape, &o.frame)?;
        }
        let map = &cfg.robot.task_map;
        for (title, k) in [("robot_start", 0), ("robot_end", t.len() - 1)] {
            let qk = DVector::from_iterator(qs.len(), qs.iter().map(|c| c[k]));
            let frame = map.jet(&qk, &DVector::zeros(map.n_v()))?.frame()?;
            outline(out, title, &cfg.robot.shape, &frame)?;
        }
    }

    writeln!(out)?;
    writeln!(out, "# barriers")?;
    writeln!(out, "t,{}phi", hs.iter().map(|h| format!("{h},")).collect::<String>())?;
    for k in 0..t.len() {
        let row: String = hv.iter().map(|c| format!("{},", c[k])).collect();
        writeln!(out, "{},{row}{}", t[k], phi[k])?;
    }
    Ok(())
}

pub fn cmd_plotdata(log: &Path, config: Option<&Path>, out: Option<&Path>) -> i32 {
    let result = (|| -> Result<Vec<u8>> {
        let text = fs::read_to_string(log)?;
        if text.trim().is_empty() {
            return Ok(Vec::new());
        }
        let table = CsvTable::read(text.as_bytes())?;
        let beside = log.parent().map(|d| d.join(SCENARIO_FILE));
        let cfg_path = config.map(Path::to_path_buf).or(beside.filter(|p| p.exists()));
        let cfg = match cfg_path {
            Some(p) => Some(ScenarioConfig::from_json(&fs::read_to_string(p)?)?),
            None => None,
        };
        let mut buf = Vec::new();
        plot_blocks(&table, cfg.as_ref(), &mut buf)?;
        Ok(buf)
    })();
    let bytes = match result {
        Ok(b) => b,
        Err(e) => {
            diagnostic(&e);
            return EXIT_CONFIG;
        }
    };
    let written = match out {
        Some(p) => fs::write(p, &bytes),
        None => io::stdout().write_all(&bytes),
    };
    if let Err(e) = written {
        diagnostic(&e);
        return EXIT_CONFIG;
    }
    EXIT_OK
}
