use std::fs;
use std::io::Write;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use spast_core::approx::{self, ApproxOptions, SchedulePolicy};
use spast_core::experiment::{self, RunOptions};
use spast_core::gen::{self, GenParams};
use spast_core::hrt;
use spast_core::ip::{self, Sense, SolveOptions};
use spast_core::matching::parse_assignment;
use spast_core::oracle::{self, EnumerationBudget};
use spast_core::{find_blocking_pairs, Instance, Matching};

#[derive(Parser)]
#[command(name = "spast", version, about = "Stable student-project allocation with ties")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random instances, written as inst_<idx>.spa.
    Generate {
        #[command(flatten)]
        source: ParamSource,
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute a stable matching.
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Algo::Approx)]
        algo: Algo,
        #[arg(long, default_value = "fifo")]
        schedule: SchedulePolicy,
        /// Write the approximation's step-by-step trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Stop enumerating after this many matchings.
        #[arg(long)]
        limit: Option<u64>,
        /// Give up on exact solvers after this many seconds.
        #[arg(long)]
        timeout: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List blocking pairs of a matching; exits with status 1 if there are any.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        matching: PathBuf,
    },
    /// Write the integer programme in LP format.
    EmitIp {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = SenseArg::Max)]
        sense: SenseArg,
    },
    /// Write the cloned hospitals/residents instance.
    CloneHrt {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the approximation and exact solvers on a batch and write statistics.
    Experiment {
        #[command(flatten)]
        source: ParamSource,
        #[arg(long, default_value_t = 100)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-solver limit in seconds.
        #[arg(long, default_value_t = 1800)]
        timeout: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Models with more binaries than this are written as LP files instead of solved.
        #[arg(long, default_value_t = 600)]
        max_binaries: usize,
        #[arg(long)]
        lp_dir: Option<PathBuf>,
        /// Per-instance results.
        #[arg(long)]
        instances_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ParamSource {
    /// A named case such as SIZE1 or TIES6.
    #[arg(long)]
    preset: Option<String>,
    /// A TOML file of generator parameters.
    #[arg(long)]
    params: Option<PathBuf>,
}

impl ParamSource {
    /// The parameters and a label for them.
    fn load(&self) -> Result<(GenParams, String)> {
        if let Some(name) = &self.preset {
            return Ok((gen::preset(name)?, name.clone()));
        }
        let path = self.params.as_ref().expect("clap enforces one source");
        let text = read(path)?;
        let params: GenParams = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let label = path
            .file_stem()
            .map_or_else(|| "custom".into(), |s| s.to_string_lossy().into_owned());
        Ok((params, label))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Approx,
    /// Maximum stable matching by enumeration.
    Max,
    /// Minimum stable matching by enumeration.
    Min,
    /// Every stable matching.
    Enumerate,
    IpMax,
    IpMin,
}

#[derive(Clone, Copy, ValueEnum)]
enum SenseArg {
    Max,
    Min,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_instance(path: &Path) -> Result<Instance> {
    Instance::parse(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write(path, text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn solve(
    inst: &Instance,
    algo: Algo,
    schedule: SchedulePolicy,
    trace: Option<&Path>,
    limit: Option<u64>,
    timeout: Option<Duration>,
) -> Result<String> {
    let budget = EnumerationBudget {
        wall: timeout,
        ..EnumerationBudget::unlimited_size()
    };
    let ip_options = SolveOptions {
        max_binaries: usize::MAX,
        time_limit: timeout,
        ..SolveOptions::default()
    };
    let m = match algo {
        Algo::Approx => {
            let run = approx::run(
                inst,
                &ApproxOptions {
                    schedule,
                    record_events: trace.is_some(),
                    audit: false,
                },
            );
            if let Some(path) = trace {
                write(path, &approx::render_trace(inst, &run.events))?;
            }
            run.matching
        }
        Algo::Max => oracle::max_stable(inst, &budget)?,
        Algo::Min => oracle::min_stable(inst, &budget)?,
        Algo::IpMax => ip::solve_instance(inst, Sense::Maximize, &ip_options)?.matching,
        Algo::IpMin => ip::solve_instance(inst, Sense::Minimize, &ip_options)?.matching,
        Algo::Enumerate => {
            let mut out = String::new();
            let mut found = 0;
            oracle::for_each_stable(inst, &budget, |m| {
                found += 1;
                out.push_str(&format!("# stable matching {found}\n{}", m.to_text()));
                if limit.is_some_and(|l| found >= l) {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            })?;
            return Ok(out);
        }
    };
    Ok(m.to_text())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate {
            source,
            count,
            seed,
            out,
        } => {
            let (params, _) = source.load()?;
            params.validate()?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for i in 0..count {
                let p = GenParams {
                    seed: gen::instance_seed(seed, i),
                    ..params.clone()
                };
                write(&out.join(format!("inst_{i}.spa")), &gen::generate(&p)?.to_text())?;
            }
        }
        Command::Solve {
            input,
            algo,
            schedule,
            trace,
            limit,
            timeout,
            out,
        } => {
            let inst = load_instance(&input)?;
            let text = solve(
                &inst,
                algo,
                schedule,
                trace.as_deref(),
                limit,
                timeout.map(Duration::from_secs),
            )?;
            emit(out.as_deref(), &text)?;
        }
        Command::Verify { input, matching } => {
            let inst = load_instance(&input)?;
            let assignment = parse_assignment(&read(&matching)?, inst.n_students())
                .with_context(|| format!("parsing {}", matching.display()))?;
            let m = Matching::from_assignment(&inst, assignment)?;
            let blocking = find_blocking_pairs(&inst, &m)?;
            if blocking.is_empty() {
                println!("stable");
                return Ok(ExitCode::SUCCESS);
            }
            for b in &blocking {
                println!("{b}");
            }
            return Ok(ExitCode::FAILURE);
        }
        Command::EmitIp { input, out, sense } => {
            let inst = load_instance(&input)?;
            let sense = match sense {
                SenseArg::Max => Sense::Maximize,
                SenseArg::Min => Sense::Minimize,
            };
            write(&out, &ip::build_model(&inst, sense).emit_lp())?;
        }
        Command::CloneHrt { input, out } => {
            let inst = load_instance(&input)?;
            write(&out, &hrt::clone_to_hrt(&inst).to_text())?;
        }
        Command::Experiment {
            source,
            count,
            seed,
            timeout,
            threads,
            max_binaries,
            lp_dir,
            instances_out,
            out,
        } => {
            let (params, label) = source.load()?;
            if threads == 0 {
                bail!("--threads must be at least 1");
            }
            if let Some(dir) = &lp_dir {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let options = RunOptions {
                timeout: Some(Duration::from_secs(timeout)),
                threads,
                max_binaries,
                lp_dir,
                ..RunOptions::default()
            };
            let (stats, results) = experiment::run_case(&label, &params, count, seed, &options)?;
            let file = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            experiment::write_case_csv(file, &[stats])?;
            if let Some(path) = instances_out {
                let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                experiment::write_instance_csv(file, &label, &results)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
