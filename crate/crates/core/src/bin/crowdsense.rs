use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use crowdsense::fixture::walkthrough;
use crowdsense::msensing::run_msensing;
use crowdsense::online::{run_online_traced, Decision, OnlineConfig};
use crowdsense::seeding::{self, ARRIVAL_STREAM};
use crowdsense::sim::{self, ExperimentConfig, GeneratorConfig};
use crowdsense::smart::{run_smart_traced, Beta, Gamma, Selection};
use crowdsense::verify::{self, BatteryConfig, MechanismKind};
use crowdsense::{AuctionOutcome, Instance, UserId};

#[derive(Parser)]
#[command(
    name = "crowdsense",
    version,
    about = "Truthful reverse auctions for crowd-sensing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one auction on an instance file and print the outcome as JSON.
    Run {
        instance: PathBuf,
        #[arg(long, default_value = "smart")]
        mechanism: MechanismKind,
        /// Fraction of arrivals observed before selection starts (online only).
        #[arg(long, default_value_t = 0.32)]
        observe_fraction: f64,
        /// Seed of the uniform arrival shuffle (online only).
        #[arg(long, default_value_t = 0, conflicts_with = "order")]
        arrival_seed: u64,
        /// Explicit arrival order as comma-separated user ids (online only).
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<u32>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment sweep from a JSON config and write CSV.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property battery; exits 1 if any property is violated.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 12)]
        max_users: usize,
        #[arg(long, default_value_t = 10)]
        max_tasks: usize,
        /// Write violations as JSON lines here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a step-by-step trace of the built-in five-user example.
    Example,
    /// Write one random instance as JSON.
    Generate {
        #[arg(long)]
        users: usize,
        #[arg(long)]
        tasks: usize,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0, 20])]
        task_value: Vec<i64>,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [5, 50])]
        bid: Vec<i64>,
        #[arg(long, default_value_t = 0.25)]
        task_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run {
            instance,
            mechanism,
            observe_fraction,
            arrival_seed,
            order,
            out,
        } => {
            let instance = read_instance(&instance)?;
            let outcome = match mechanism {
                MechanismKind::Smart => crowdsense::smart::run_smart(&instance),
                MechanismKind::Msensing => run_msensing(&instance),
                MechanismKind::Online => {
                    let config =
                        OnlineConfig::new(observe_fraction).context("--observe-fraction")?;
                    let order = match order {
                        Some(ids) => ids.into_iter().map(UserId).collect(),
                        None => sim::arrival_order(
                            &instance,
                            &mut seeding::stream(arrival_seed, ARRIVAL_STREAM),
                        ),
                    };
                    run_online_traced(&instance, &order, config)?.outcome
                }
            };
            emit(out.as_deref(), outcome_json(&outcome)?.as_bytes())?;
        }
        Command::Simulate { config, out } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let config = ExperimentConfig::from_json(&text)
                .with_context(|| format!("in {}", config.display()))?
                .with_env_seed()?;
            let rows = sim::run_experiment(&config)?;
            let mut buf = Vec::new();
            sim::write_csv(&rows, &mut buf)?;
            emit(out.as_deref(), &buf)?;
        }
        Command::Verify {
            seed,
            count,
            max_users,
            max_tasks,
            out,
        } => {
            if max_users == 0 || max_tasks == 0 {
                bail!("--max-users and --max-tasks must be at least 1");
            }
            let report = verify::run_battery(&BatteryConfig {
                seed,
                count,
                max_users,
                max_tasks,
            })?;
            if let Some(path) = out {
                let mut buf = Vec::new();
                report.write_jsonl(&mut buf)?;
                fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
            }
            print!("{}", report.summary());
            if !report.is_clean() {
                println!("violations: {}", report.violations.len());
                return Ok(ExitCode::from(1));
            }
            println!("violations: 0");
        }
        Command::Example => print!("{}", example_trace()),
        Command::Generate {
            users,
            tasks,
            task_value,
            bid,
            task_fraction,
            seed,
            out,
        } => {
            let instance = sim::generate_instance(&GeneratorConfig {
                users,
                tasks,
                task_value: [task_value[0], task_value[1]],
                bid: [bid[0], bid[1]],
                task_fraction,
                seed,
            })?;
            emit(
                out.as_deref(),
                format!("{}\n", instance.to_json()).as_bytes(),
            )?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn read_instance(path: &Path) -> anyhow::Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Instance::from_json(&text).with_context(|| format!("in {}", path.display()))
}

fn outcome_json(outcome: &AuctionOutcome) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(outcome)? + "\n")
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => Ok(io::stdout().write_all(bytes)?),
    }
}

fn gamma(g: Gamma) -> String {
    g.finite().map_or("inf".into(), |v| v.to_string())
}

fn beta(b: Beta) -> String {
    b.finite().map_or("inf".into(), |v| v.to_string())
}

fn ids<'a>(set: impl IntoIterator<Item = &'a UserId>) -> String {
    let v: Vec<String> = set.into_iter().map(ToString::to_string).collect();
    format!("{{{}}}", v.join(","))
}

fn example_trace() -> String {
    use std::fmt::Write;
    let inst = walkthrough();
    let mut s = String::new();
    let w = &mut s;
    writeln!(
        w,
        "tasks: {:?}",
        inst.catalog()
            .tasks()
            .iter()
            .map(|t| t.value)
            .collect::<Vec<_>>()
    )
    .unwrap();
    for u in inst.users() {
        writeln!(w, "user {}: tasks {:?} bid {}", u.id, u.tasks, u.bid).unwrap();
    }

    let trace = run_smart_traced(&inst);
    writeln!(w, "\nSMART").unwrap();
    let order: Vec<String> = trace
        .screening
        .order()
        .iter()
        .map(ToString::to_string)
        .collect();
    writeln!(w, "screening order: [{}]", order.join(",")).unwrap();
    for step in &trace.selection.steps {
        let candidate = step.candidate.map_or("-".into(), |c| c.to_string());
        write!(
            w,
            "user {}: next best {candidate}, gamma {}, sigma {}, beta {} -> ",
            step.user,
            gamma(step.gamma),
            step.sigma,
            beta(step.beta)
        )
        .unwrap();
        match step.selection {
            Selection::PayThreshold { payment } => writeln!(w, "kept, paid gamma = {payment}"),
            Selection::PayMarginal { payment } => writeln!(w, "kept, paid {payment}"),
            Selection::Replaced {
                by,
                replacement_gamma,
                payment,
            } => writeln!(
                w,
                "replaced by {by} (gamma {}), who is paid {payment}",
                gamma(replacement_gamma)
            ),
            Selection::Dropped => writeln!(w, "dropped"),
        }
        .unwrap();
    }
    writeln!(w, "removed in cleanup: {}", ids(&trace.removed)).unwrap();
    let out = &trace.outcome;
    writeln!(w, "winners: {}", ids(&out.winners)).unwrap();
    for (i, p) in &out.payments {
        writeln!(w, "payment {i}: {p}").unwrap();
    }
    writeln!(w, "utility: {}", out.utility).unwrap();

    let ms = run_msensing(&inst);
    writeln!(w, "\nM-Sensing").unwrap();
    writeln!(w, "winners: {}", ids(&ms.winners)).unwrap();
    for (i, p) in &ms.payments {
        writeln!(w, "payment {i}: {p}").unwrap();
    }
    writeln!(w, "utility: {}", ms.utility).unwrap();

    let order: Vec<UserId> = [4, 5, 1, 3, 2].map(UserId).to_vec();
    let run = run_online_traced(
        &inst,
        &order,
        OnlineConfig::new(0.2).expect("valid fraction"),
    )
    .expect("valid order");
    writeln!(w, "\nONLINE-SMART, arrivals [4,5,1,3,2], observe 0.2").unwrap();
    writeln!(
        w,
        "reference after observation: {}",
        ids(&run.initial_reference)
    )
    .unwrap();
    for r in &run.log {
        let what = match r.decision {
            Decision::Added { payment } => format!("added, paid {payment}"),
            Decision::Replaced { replaced, payment } => {
                format!("replaced {replaced}, paid {payment}")
            }
            Decision::Rejected => "rejected".into(),
        };
        writeln!(
            w,
            "user {}: {what}; R = {}, T = {}",
            r.user,
            ids(&r.reference),
            ids(&r.winners)
        )
        .unwrap();
    }
    writeln!(w, "utility: {}", run.outcome.utility).unwrap();
    s
}
