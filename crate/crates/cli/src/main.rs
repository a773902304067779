//! `gripscribe` command line. Exit codes: 0 success, 1 configuration or
//! usage error, 2 domain or I/O error.

mod serve;

use std::fmt::Display;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use gripscribe::config::ProjectConfig;
use gripscribe::dynamics::{DamperPlacement, DEFAULT_DT};
use gripscribe::handlemount::{mount_ik, screw_settings_deg};
use gripscribe::kinematics::Variant;
use gripscribe::metrics::{
    frequency_sweep, path_rmse, pen_trace_svg, simulate_scenario, sweep_svg, target_rmse,
    write_sweep_csv, DriveSettings, DEFAULT_SWEEP_FREQS,
};
use gripscribe::optimize::{grid_search, nelder_mead, write_grid_csv, DesignVars, Problem};
use gripscribe::penholder::{linkage_svg, solve_screw, travel_table, travel_table_text};
use gripscribe::session::replay;
use gripscribe::workspace::{place_base, workspace_svg, Orientation, Sheet};
use gripscribe::Pose2;

#[derive(Parser)]
#[command(name = "gripscribe", version, about = "Handwriting-aid linkage twin")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON project configuration; every section is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tremor seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Simulated duration, s.
    #[arg(long, global = true)]
    duration: Option<f64>,
    /// Integration step, s.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Mechanism variant; also selects the matching damper placement.
    #[arg(long, global = true, value_enum)]
    variant: Option<VariantArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    A,
    B,
    C,
}

#[derive(Subcommand)]
enum Command {
    /// Trace CSV and pen-trace SVG for the configured intent and tremor.
    Simulate,
    /// Base placement and coverage of a legal sheet in both orientations.
    Workspace,
    /// Transmissibility sweep.
    Sweep {
        /// Comma-separated frequencies, Hz, ascending.
        #[arg(long, value_delimiter = ',')]
        f_list: Option<Vec<f64>>,
    },
    /// Log-grid and simplex search over the damper coefficients.
    Optimize {
        #[arg(long, default_value_t = 11)]
        grid: usize,
    },
    /// Screw travel table and linkage drawing.
    Penholder {
        /// Solve a single pen diameter, mm.
        #[arg(long)]
        diameter: Option<f64>,
    },
    /// Screw settings of the handle mount for a handle pose.
    Mount {
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        /// Handle orientation, degrees.
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        phi: f64,
    },
    /// Live session service over newline-delimited JSON.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        /// Write a replay file per connection into the output directory.
        #[arg(long)]
        record: bool,
    },
    /// Re-run a recorded session offline and print the outbound stream.
    Replay { file: PathBuf },
}

enum Failure {
    Config(String),
    Domain(String),
}

fn domain(e: impl Display) -> Failure {
    Failure::Domain(e.to_string())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Domain(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn load(common: &Common) -> Result<ProjectConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => ProjectConfig::load(p).map_err(|e| Failure::Config(e.to_string()))?,
        None => ProjectConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.tremor.seed = seed;
    }
    if let Some(v) = common.variant {
        let v = match v {
            VariantArg::A => Variant::A,
            VariantArg::B => Variant::B,
            VariantArg::C => Variant::C,
        };
        cfg.mechanism.variant = v;
        cfg.dynamics.damper_placement = DamperPlacement::for_variant(v);
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(d) = common.duration {
        if !(d.is_finite() && d > 0.0) {
            return Err(Failure::Config(format!("--duration must be positive, got {d}")));
        }
    }
    if let Some(dt) = common.dt {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Failure::Config(format!("--dt must be positive, got {dt}")));
        }
    }
    Ok(cfg)
}

fn out_file(cfg: &ProjectConfig, name: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(&cfg.output).map_err(io_err(&cfg.output))?;
    Ok(cfg.output.join(name))
}

fn write_text(cfg: &ProjectConfig, name: &str, text: &str) -> Result<PathBuf, Failure> {
    let path = out_file(cfg, name)?;
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

fn create(cfg: &ProjectConfig, name: &str) -> Result<(PathBuf, BufWriter<fs::File>), Failure> {
    let path = out_file(cfg, name)?;
    let f = fs::File::create(&path).map_err(io_err(&path))?;
    Ok((path, BufWriter::new(f)))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load(&cli.common)?;
    let dt = cli.common.dt.unwrap_or(DEFAULT_DT);
    match cli.command {
        Command::Simulate => {
            let duration = cli.common.duration.unwrap_or_else(|| cfg.intent.natural_duration());
            let trace = simulate_scenario(
                &cfg.dynamics,
                &cfg.mechanism,
                &cfg.hand,
                &cfg.tremor,
                &cfg.intent,
                duration,
                dt,
            )
            .map_err(domain)?;
            let settle = (0.2 * duration).min(1.0);
            let pen = path_rmse(&trace, &cfg.intent, settle).map_err(domain)?;
            let raw = target_rmse(&trace, &cfg.intent, settle).map_err(domain)?;
            let (path, w) = create(&cfg, "trace.csv")?;
            trace.write_csv(w).map_err(domain)?;
            println!("wrote {}", path.display());
            let path = write_text(&cfg, "pen_trace.svg", &pen_trace_svg(&trace, &cfg.intent))?;
            println!("wrote {}", path.display());
            let summary = json!({
                "duration_s": duration,
                "dt_s": dt,
                "settle_s": settle,
                "pen_rmse_m": pen,
                "raw_rmse_m": raw,
                "energy_residual_j": trace.energy_residual,
                "work_in_j": trace.total_work(),
            });
            write_text(&cfg, "summary.json", &serde_json::to_string_pretty(&summary).unwrap())?;
            println!("pen RMSE {:.4} mm, raw target RMSE {:.4} mm", pen * 1e3, raw * 1e3);
        }
        Command::Workspace => {
            let mut report = serde_json::Map::new();
            for o in [Orientation::Portrait, Orientation::Landscape] {
                let sheet = Sheet::legal(o, cfg.mechanism.base);
                let (offset, cov) = place_base(&cfg.mechanism, &sheet).map_err(domain)?;
                let placed = gripscribe::kinematics::MechanismConfig {
                    base: sheet.center + offset,
                    ..cfg.mechanism
                };
                let name = match o {
                    Orientation::Portrait => "portrait",
                    Orientation::Landscape => "landscape",
                };
                write_text(&cfg, &format!("workspace_{name}.svg"), &workspace_svg(&placed, &sheet, &cov))?;
                println!(
                    "{name}: covered = {}, fraction = {}, margin = {:.4} m, base offset = ({:.3}, {:.3}) m",
                    cov.covered, cov.fraction, cov.margin, offset.x, offset.y
                );
                report.insert(
                    name.into(),
                    json!({ "base_offset": [offset.x, offset.y], "coverage": cov }),
                );
            }
            let path = write_text(&cfg, "workspace.json", &serde_json::to_string_pretty(&report).unwrap())?;
            println!("wrote {}", path.display());
        }
        Command::Sweep { f_list } => {
            let freqs = f_list.unwrap_or_else(|| DEFAULT_SWEEP_FREQS.to_vec());
            let drive = DriveSettings {
                dt,
                ..DriveSettings::default()
            };
            let pts = frequency_sweep(&cfg.dynamics, &cfg.mechanism, &cfg.hand, &freqs, &drive)
                .map_err(|e| match e {
                    gripscribe::metrics::MetricsError::BadFrequencies => Failure::Config(format!("--f-list: {e}")),
                    e => domain(e),
                })?;
            let (path, w) = create(&cfg, "sweep.csv")?;
            write_sweep_csv(&pts, w).map_err(domain)?;
            println!("wrote {}", path.display());
            write_text(&cfg, "sweep.svg", &sweep_svg(&pts))?;
            for p in &pts {
                println!("{:>7.3} Hz  gain {:.4}  phase {:+.4} rad", p.frequency, p.gain, p.phase);
            }
        }
        Command::Optimize { grid } => {
            if grid < 2 {
                return Err(Failure::Config("--grid must be at least 2".into()));
            }
            let mut problem = Problem::new(cfg.dynamics, cfg.mechanism, cfg.hand);
            problem.drive.dt = dt;
            let g = grid_search(&problem, grid).map_err(domain)?;
            let (path, w) = create(&cfg, "grid.csv")?;
            write_grid_csv(&g.table, w).map_err(domain)?;
            println!("wrote {}", path.display());
            let start = DesignVars {
                b1: cfg.dynamics.b1.clamp(gripscribe::optimize::B_MIN, gripscribe::optimize::B_MAX),
                b2: cfg.dynamics.b2.clamp(gripscribe::optimize::B_MIN, gripscribe::optimize::B_MAX),
            };
            let nm = nelder_mead(&problem, start, 1e-4, 200).map_err(domain)?;
            let design = json!({
                "grid_best": g.best,
                "simplex": {
                    "best": nm.best,
                    "iterations": nm.iterations,
                    "converged": nm.converged,
                },
                "chosen": if nm.best.cost <= g.best.cost { nm.best } else { g.best },
            });
            let path = write_text(&cfg, "design.json", &serde_json::to_string_pretty(&design).unwrap())?;
            println!("wrote {}", path.display());
            println!(
                "grid best cost {:.6} at b = ({:.4}, {:.4}); simplex cost {:.6} at b = ({:.4}, {:.4}) after {} iterations{}",
                g.best.cost,
                g.best.vars.b1,
                g.best.vars.b2,
                nm.best.cost,
                nm.best.vars.b1,
                nm.best.vars.b2,
                nm.iterations,
                if nm.converged { "" } else { " (iteration budget exhausted)" }
            );
        }
        Command::Penholder { diameter } => {
            if let Some(d) = diameter {
                let s = solve_screw(&cfg.gripper, d).map_err(domain)?;
                println!(
                    "d = {d} mm: travel {:.4} mm ({:.3} turns), finger angle {:.3} deg",
                    s.travel,
                    s.turns,
                    s.alpha.to_degrees()
                );
            }
            let rows = travel_table(&cfg.gripper).map_err(domain)?;
            let text = travel_table_text(&rows);
            let path = write_text(&cfg, "travel_table.txt", &text)?;
            println!("wrote {}", path.display());
            write_text(&cfg, "penholder.svg", &linkage_svg(&cfg.gripper).map_err(domain)?)?;
            print!("{text}");
        }
        Command::Mount { x, y, phi } => {
            let target = Pose2::new(x, y, phi.to_radians());
            let sols = mount_ik(&cfg.mount, target).map_err(domain)?;
            let deg: Vec<[f64; 3]> = sols.iter().map(screw_settings_deg).collect();
            for (i, d) in deg.iter().enumerate() {
                println!(
                    "solution {}: a1 = {:.3} deg, a2 = {:.3} deg, a3 = {:.3} deg",
                    i + 1,
                    d[0],
                    d[1],
                    d[2]
                );
            }
            let report = json!({ "target": target, "settings_deg": deg });
            write_text(&cfg, "mount.json", &serde_json::to_string_pretty(&report).unwrap())?;
        }
        Command::Serve { port, record } => {
            serve::serve(&cfg, port, record).map_err(domain)?;
        }
        Command::Replay { file } => {
            let f = fs::File::open(&file).map_err(io_err(&file))?;
            let lines = replay(&cfg, BufReader::new(f)).map_err(domain)?;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for l in lines {
                writeln!(out, "{l}").map_err(domain)?;
            }
        }
    }
    Ok(())
}
