//! Random instance generation and experiment sweeps.
//!
//! A sweep varies one generator parameter over a list of points and runs a
//! fixed number of trials at each. Trial `t` at point `p` draws everything
//! from `seeding::trial_seed(seed, p, t)`: the instance from
//! [`INSTANCE_STREAM`], the arrival order from [`ARRIVAL_STREAM`]. Trials run
//! in parallel and rows come out in sweep order.
//!
//! Competitive ratios are `u_online / u_smart` and skip trials whose offline
//! utility is 0.

use std::io::Write;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, Units, UserId};
use crate::msensing::run_msensing;
use crate::online::{run_online, OnlineConfig};
use crate::seeding::{self, ARRIVAL_STREAM, INSTANCE_STREAM};
use crate::smart::run_smart;
use crate::verify::MechanismKind;

/// Environment variable that replaces the configured seed.
pub const SEED_ENV: &str = "CROWDSENSE_SEED";

/// Parameters of the random instance generator. Ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub users: usize,
    pub tasks: usize,
    pub task_value: [Units; 2],
    pub bid: [Units; 2],
    pub task_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let [vlo, vhi] = self.task_value;
        if vlo < 0 || vlo > vhi {
            return Err(Error::Config(format!(
                "generator.task_value: [{vlo}, {vhi}] must satisfy 0 <= lo <= hi"
            )));
        }
        let [blo, bhi] = self.bid;
        if blo < 1 || blo > bhi {
            return Err(Error::Config(format!(
                "generator.bid: [{blo}, {bhi}] must satisfy 1 <= lo <= hi"
            )));
        }
        if !(self.task_fraction > 0.0 && self.task_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "generator.task_fraction: {} is outside (0, 1]",
                self.task_fraction
            )));
        }
        if self.tasks == 0 {
            return Err(Error::Config("generator.tasks: must be at least 1".into()));
        }
        Ok(())
    }

    /// Tasks per user: `max(1, round(fraction * m))`.
    pub fn tasks_per_user(&self) -> usize {
        ((self.task_fraction * self.tasks as f64).round() as usize).clamp(1, self.tasks)
    }
}

/// Draws an instance from `config.seed`. Values and bids are uniform
/// integers; each user covers a uniform random subset of
/// [`GeneratorConfig::tasks_per_user`] tasks.
pub fn generate_instance(config: &GeneratorConfig) -> Result<Instance> {
    config.validate()?;
    let mut rng = seeding::stream(config.seed, INSTANCE_STREAM);
    let m = config.tasks;
    let values: Vec<Units> = (0..m)
        .map(|_| rng.gen_range(config.task_value[0]..=config.task_value[1]))
        .collect();
    let size = config.tasks_per_user();
    let users: Vec<(Vec<u32>, Units)> = (0..config.users)
        .map(|_| {
            let mut tasks: Vec<u32> = index::sample(&mut rng, m, size)
                .into_iter()
                .map(|t| t as u32)
                .collect();
            tasks.sort_unstable();
            (tasks, rng.gen_range(config.bid[0]..=config.bid[1]))
        })
        .collect();
    Instance::from_parts(values, users)
}

/// Uniform shuffle of all user ids.
pub fn arrival_order(instance: &Instance, rng: &mut impl Rng) -> Vec<UserId> {
    let mut order: Vec<UserId> = instance.user_ids().collect();
    order.shuffle(rng);
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Users,
    Tasks,
    Fraction,
    ObserveFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub points: Vec<f64>,
}

fn default_observe_fraction() -> f64 {
    0.32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    pub sweep: Sweep,
    pub trials: usize,
    pub mechanisms: Vec<MechanismKind>,
    /// Observe fraction for online runs unless it is the swept parameter.
    #[serde(default = "default_observe_fraction")]
    pub observe_fraction: f64,
    /// When set, each point reports the best of these observe fractions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observe_grid: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Applies `CROWDSENSE_SEED` when it is set.
    pub fn with_env_seed(mut self) -> Result<Self> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            self.generator.seed = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}: `{raw}` is not a u64")))?;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials: must be at least 1".into()));
        }
        if self.mechanisms.is_empty() {
            return Err(Error::Config("mechanisms: list is empty".into()));
        }
        let points = &self.sweep.points;
        if points.is_empty() {
            return Err(Error::Config("sweep.points: list is empty".into()));
        }
        if let Some(w) = points
            .windows(2)
            .find(|w| w[0] >= w[1] || w[0].is_nan() || w[1].is_nan())
        {
            return Err(Error::Config(format!(
                "sweep.points: {} then {} is not strictly increasing",
                w[0], w[1]
            )));
        }
        for &p in points {
            self.point_config(p)?;
        }
        OnlineConfig::new(self.observe_fraction).map_err(|_| {
            Error::Config(format!(
                "observe_fraction: {} is outside (0, 1)",
                self.observe_fraction
            ))
        })?;
        if let Some(grid) = &self.observe_grid {
            if grid.is_empty() {
                return Err(Error::Config("observe_grid: list is empty".into()));
            }
            for &f in grid {
                OnlineConfig::new(f)
                    .map_err(|_| Error::Config(format!("observe_grid: {f} is outside (0, 1)")))?;
            }
        }
        Ok(())
    }

    /// Generator and observe fraction at one sweep point.
    fn point_config(&self, point: f64) -> Result<(GeneratorConfig, f64)> {
        let mut generator = self.generator.clone();
        let mut observe = self.observe_fraction;
        let count = |name: &str| -> Result<usize> {
            if point >= 0.0 && point.fract() == 0.0 {
                Ok(point as usize)
            } else {
                Err(Error::Config(format!(
                    "sweep.points: {point} is not a valid {name} count"
                )))
            }
        };
        match self.sweep.parameter {
            SweepParameter::Users => generator.users = count("user")?,
            SweepParameter::Tasks => generator.tasks = count("task")?,
            SweepParameter::Fraction => generator.task_fraction = point,
            SweepParameter::ObserveFraction => {
                OnlineConfig::new(point).map_err(|_| {
                    Error::Config(format!(
                        "sweep.points: observe fraction {point} is outside (0, 1)"
                    ))
                })?;
                observe = point;
            }
        }
        generator
            .validate()
            .map_err(|e| Error::Config(format!("sweep point {point}: {e}")))?;
        Ok((generator, observe))
    }

    fn is_ratio_sweep(&self) -> bool {
        self.sweep.parameter == SweepParameter::ObserveFraction || self.observe_grid.is_some()
    }
}

/// One CSV row: one mechanism at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub mechanism: MechanismKind,
    pub mean_utility: f64,
    pub std_utility: f64,
    pub trials: usize,
    pub seed: u64,
    pub ratio_mean: Option<f64>,
    pub ratio_valid_trials: Option<usize>,
    pub best_observe_fraction: Option<f64>,
}

/// Mean and population standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

struct Trial {
    instance: Instance,
    order: Vec<UserId>,
}

fn trial(generator: &GeneratorConfig, base: u64, point: usize, index: usize) -> Result<Trial> {
    let seed = seeding::trial_seed(base, point, index);
    let instance = generate_instance(&GeneratorConfig {
        seed,
        ..generator.clone()
    })?;
    let order = arrival_order(&instance, &mut seeding::stream(seed, ARRIVAL_STREAM));
    Ok(Trial { instance, order })
}

fn ratio(online: Units, offline: Units) -> Option<f64> {
    (offline > 0).then(|| online as f64 / offline as f64)
}

fn ratio_stats(ratios: &[Option<f64>]) -> (Option<f64>, usize) {
    let valid: Vec<f64> = ratios.iter().flatten().copied().collect();
    if valid.is_empty() {
        (None, 0)
    } else {
        (Some(mean_std(&valid).0), valid.len())
    }
}

/// Mean utility of each configured mechanism per point. Online rows also
/// carry the competitive ratio against SMART.
pub fn utility_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    for needed in [MechanismKind::Smart, MechanismKind::Msensing] {
        if !config.mechanisms.contains(&needed) {
            return Err(Error::Config(format!(
                "mechanisms: utility sweep needs `{needed}`"
            )));
        }
    }
    let base = config.generator.seed;
    let mut rows = Vec::new();
    for (p, &point) in config.sweep.points.iter().enumerate() {
        let (generator, observe) = config.point_config(point)?;
        let online = OnlineConfig::new(observe)?;
        // per trial: utilities in `config.mechanisms` order, plus smart's
        let results: Vec<(Vec<Units>, Units)> = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let Trial { instance, order } = trial(&generator, base, p, t)?;
                let smart = run_smart(&instance).utility;
                let utilities = config
                    .mechanisms
                    .iter()
                    .map(|m| match m {
                        MechanismKind::Smart => Ok(smart),
                        MechanismKind::Msensing => Ok(run_msensing(&instance).utility),
                        MechanismKind::Online => Ok(run_online(&instance, &order, online)?.utility),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((utilities, smart))
            })
            .collect::<Result<_>>()?;
        for (k, &mechanism) in config.mechanisms.iter().enumerate() {
            let utilities: Vec<f64> = results.iter().map(|(u, _)| u[k] as f64).collect();
            let (mean, std) = mean_std(&utilities);
            let (ratio_mean, ratio_valid_trials) = if mechanism == MechanismKind::Online {
                let ratios: Vec<Option<f64>> =
                    results.iter().map(|(u, s)| ratio(u[k], *s)).collect();
                let (r, n) = ratio_stats(&ratios);
                (r, Some(n))
            } else {
                (None, None)
            };
            rows.push(SweepRow {
                sweep_value: point,
                mechanism,
                mean_utility: mean,
                std_utility: std,
                trials: config.trials,
                seed: base,
                ratio_mean,
                ratio_valid_trials,
                best_observe_fraction: None,
            });
        }
    }
    Ok(rows)
}

/// Online utility and competitive ratio per point. With an observe grid,
/// every grid fraction runs on the same trials and the row reports the one
/// with the highest mean ratio (ties go to the smaller fraction).
pub fn competitive_ratio_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let base = config.generator.seed;
    let mut rows = Vec::new();
    for (p, &point) in config.sweep.points.iter().enumerate() {
        let (generator, observe) = config.point_config(point)?;
        let fractions: Vec<f64> = match (&config.observe_grid, config.sweep.parameter) {
            (Some(grid), p) if p != SweepParameter::ObserveFraction => grid.clone(),
            _ => vec![observe],
        };
        let onlines: Vec<OnlineConfig> = fractions
            .iter()
            .map(|&f| OnlineConfig::new(f))
            .collect::<Result<_>>()?;
        // per trial: (online utility per fraction, smart utility)
        let results: Vec<(Vec<Units>, Units)> = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let Trial { instance, order } = trial(&generator, base, p, t)?;
                let smart = run_smart(&instance).utility;
                let online = onlines
                    .iter()
                    .map(|&c| Ok(run_online(&instance, &order, c)?.utility))
                    .collect::<Result<Vec<_>>>()?;
                Ok((online, smart))
            })
            .collect::<Result<_>>()?;

        let mut best: Option<(usize, Option<f64>, usize)> = None;
        for k in 0..fractions.len() {
            let ratios: Vec<Option<f64>> = results.iter().map(|(u, s)| ratio(u[k], *s)).collect();
            let (r, n) = ratio_stats(&ratios);
            let better = match best {
                None => true,
                Some((_, prev, _)) => {
                    r.unwrap_or(f64::NEG_INFINITY) > prev.unwrap_or(f64::NEG_INFINITY)
                }
            };
            if better {
                best = Some((k, r, n));
            }
        }
        let (k, ratio_mean, valid) = best.expect("at least one observe fraction");
        let utilities: Vec<f64> = results.iter().map(|(u, _)| u[k] as f64).collect();
        let (mean, std) = mean_std(&utilities);
        rows.push(SweepRow {
            sweep_value: point,
            mechanism: MechanismKind::Online,
            mean_utility: mean,
            std_utility: std,
            trials: config.trials,
            seed: base,
            ratio_mean,
            ratio_valid_trials: Some(valid),
            best_observe_fraction: config.observe_grid.as_ref().map(|_| fractions[k]),
        });
    }
    Ok(rows)
}

/// Ratio sweep when the observe fraction is swept or a grid is given,
/// utility sweep otherwise.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    if config.is_ratio_sweep() {
        competitive_ratio_sweep(config)
    } else {
        utility_sweep(config)
    }
}

/// Rows as CSV with a header line.
pub fn write_csv(rows: &[SweepRow], out: impl Write) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    if rows.is_empty() {
        writer
            .write_record([
                "sweep_value",
                "mechanism",
                "mean_utility",
                "std_utility",
                "trials",
                "seed",
                "ratio_mean",
                "ratio_valid_trials",
                "best_observe_fraction",
            ])
            .map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generator() -> GeneratorConfig {
        GeneratorConfig {
            users: 20,
            tasks: 12,
            task_value: [0, 20],
            bid: [5, 50],
            task_fraction: 0.25,
            seed: 9,
        }
    }

    fn experiment(parameter: SweepParameter, points: Vec<f64>) -> ExperimentConfig {
        ExperimentConfig {
            generator: generator(),
            sweep: Sweep { parameter, points },
            trials: 4,
            mechanisms: vec![
                MechanismKind::Smart,
                MechanismKind::Msensing,
                MechanismKind::Online,
            ],
            observe_fraction: 0.3,
            observe_grid: None,
        }
    }

    #[test]
    fn generator_respects_config() {
        let config = generator();
        let inst = generate_instance(&config).unwrap();
        assert_eq!(inst.user_count(), 20);
        assert_eq!(inst.task_count(), 12);
        assert!(inst
            .catalog()
            .tasks()
            .iter()
            .all(|t| (0..=20).contains(&t.value)));
        for u in inst.users() {
            assert_eq!(u.tasks.len(), 3);
            assert!((5..=50).contains(&u.bid));
            assert!(u.tasks.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(inst, generate_instance(&config).unwrap());
        let other = generate_instance(&GeneratorConfig { seed: 10, ..config }).unwrap();
        assert_ne!(inst, other);
    }

    #[test]
    fn generator_task_counts() {
        let full = GeneratorConfig {
            task_fraction: 1.0,
            ..generator()
        };
        assert!(generate_instance(&full)
            .unwrap()
            .users()
            .iter()
            .all(|u| u.tasks.len() == 12));
        let tiny = GeneratorConfig {
            task_fraction: 0.01,
            ..generator()
        };
        assert_eq!(tiny.tasks_per_user(), 1);
        let fig2 = GeneratorConfig {
            users: 5,
            tasks: 1000,
            task_value: [30, 50],
            ..generator()
        };
        assert!(generate_instance(&fig2)
            .unwrap()
            .users()
            .iter()
            .all(|u| u.tasks.len() == 250));
    }

    #[test]
    fn generator_rejects_bad_ranges() {
        let bad = [
            GeneratorConfig {
                task_value: [5, 3],
                ..generator()
            },
            GeneratorConfig {
                task_value: [-1, 3],
                ..generator()
            },
            GeneratorConfig {
                bid: [0, 3],
                ..generator()
            },
            GeneratorConfig {
                task_fraction: 0.0,
                ..generator()
            },
            GeneratorConfig {
                task_fraction: 1.5,
                ..generator()
            },
            GeneratorConfig {
                tasks: 0,
                ..generator()
            },
        ];
        for config in bad {
            assert!(
                matches!(generate_instance(&config), Err(Error::Config(_))),
                "{config:?}"
            );
        }
    }

    #[test]
    fn config_validation() {
        let mut c = experiment(SweepParameter::Users, vec![10.0, 10.0]);
        assert!(c.validate().is_err());
        c.sweep.points = vec![10.0, 12.5];
        assert!(c.validate().is_err());
        c.sweep.points = vec![10.0, 20.0];
        c.validate().unwrap();
        c.trials = 0;
        assert!(c.validate().is_err());

        let mut c = experiment(SweepParameter::ObserveFraction, vec![0.5, 1.0]);
        assert!(c.validate().is_err());
        c.sweep.points = vec![0.1, 0.5];
        c.validate().unwrap();

        let err = ExperimentConfig::from_json(r#"{"generator":{},"sweep":{}}"#).unwrap_err();
        assert!(err.to_string().contains("missing field"), "{err}");
        let mut json = serde_json::to_value(experiment(SweepParameter::Users, vec![5.0])).unwrap();
        json["bogus"] = 1.into();
        let err = ExperimentConfig::from_json(&json.to_string()).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn single_trial_matches_direct_run() {
        let mut c = experiment(SweepParameter::Users, vec![15.0]);
        c.trials = 1;
        let rows = utility_sweep(&c).unwrap();
        assert_eq!(rows.len(), 3);

        let seed = seeding::trial_seed(9, 0, 0);
        let inst = generate_instance(&GeneratorConfig {
            users: 15,
            seed,
            ..generator()
        })
        .unwrap();
        let order = arrival_order(&inst, &mut seeding::stream(seed, ARRIVAL_STREAM));
        let smart = run_smart(&inst).utility;
        let online = run_online(&inst, &order, OnlineConfig::new(0.3).unwrap())
            .unwrap()
            .utility;
        assert_eq!(rows[0].mean_utility, smart as f64);
        assert_eq!(rows[1].mean_utility, run_msensing(&inst).utility as f64);
        assert_eq!(rows[2].mean_utility, online as f64);
        assert_eq!(rows[0].std_utility, 0.0);
        assert_eq!(rows[2].ratio_valid_trials, Some(usize::from(smart > 0)));
    }

    #[test]
    fn utility_sweep_needs_both_offline_mechanisms() {
        let mut c = experiment(SweepParameter::Tasks, vec![10.0]);
        c.mechanisms = vec![MechanismKind::Smart];
        assert!(utility_sweep(&c).is_err());
    }

    #[test]
    fn adding_points_keeps_existing_trials() {
        let short = experiment(SweepParameter::Fraction, vec![0.2, 0.4]);
        let long = experiment(SweepParameter::Fraction, vec![0.2, 0.4, 0.6]);
        let a = utility_sweep(&short).unwrap();
        let b = utility_sweep(&long).unwrap();
        assert_eq!(a[..], b[..a.len()]);
    }

    #[test]
    fn ratio_sweeps() {
        let c = experiment(SweepParameter::ObserveFraction, vec![0.2, 0.5, 0.8]);
        let rows = run_experiment(&c).unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            assert_eq!(row.mechanism, MechanismKind::Online);
            assert!(row.best_observe_fraction.is_none());
            if let Some(r) = row.ratio_mean {
                assert!((0.0..=1.0).contains(&r), "{r}");
            }
        }

        let mut c = experiment(SweepParameter::Fraction, vec![0.2, 0.5]);
        c.observe_grid = Some(vec![0.2, 0.4, 0.6]);
        let rows = run_experiment(&c).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.best_observe_fraction.is_some()));
    }

    #[test]
    fn ratio_absent_when_offline_is_zero() {
        // bids far above any value: nobody is ever selected
        let mut c = experiment(SweepParameter::ObserveFraction, vec![0.5]);
        c.generator.task_value = [0, 1];
        c.generator.bid = [100, 100];
        let rows = competitive_ratio_sweep(&c).unwrap();
        assert_eq!(rows[0].ratio_mean, None);
        assert_eq!(rows[0].ratio_valid_trials, Some(0));
    }

    #[test]
    fn csv_layout() {
        let c = experiment(SweepParameter::Users, vec![5.0, 10.0]);
        let rows = utility_sweep(&c).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "sweep_value,mechanism,mean_utility,std_utility,trials,seed,ratio_mean,ratio_valid_trials,best_observe_fraction"
        );
        assert_eq!(lines.count(), 6);
        assert!(!text.contains('\r'));

        let mut again = Vec::new();
        write_csv(&utility_sweep(&c).unwrap(), &mut again).unwrap();
        assert_eq!(text.as_bytes(), &again[..]);

        let mut empty = Vec::new();
        write_csv(&[], &mut empty).unwrap();
        assert!(String::from_utf8(empty)
            .unwrap()
            .starts_with("sweep_value,"));
    }
}
