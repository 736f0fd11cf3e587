//! Command-line flags, the optional TOML config file, and their merge into
//! an [`ExperimentSpec`]. Flags win over file keys, which win over defaults.

use std::path::{Path, PathBuf};

use batch_auction::workload::{GeneratorConfig, GraphShape, TraceMapping};
use clap::Args;
use serde::Deserialize;

use crate::experiment::{ExperimentError, ExperimentSpec, Source};
use crate::output::Format;

/// Knobs shared by every subcommand. All optional so that a config file can
/// fill the gaps.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct Common {
    /// TOML file with any of these settings (flag names, underscores).
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Read jobs from a CSV trace (job_id,arrival,duration,cpu,ram,disk).
    #[arg(long, value_name = "PATH", conflicts_with = "generate")]
    pub trace: Option<PathBuf>,
    /// Draw a synthetic workload (the default).
    #[arg(long)]
    #[serde(default)]
    pub generate: bool,
    /// Horizon T in slots.
    #[arg(long)]
    pub slots: Option<u32>,
    /// Batch interval in slots; also the arrival window for --density.
    #[arg(long)]
    pub theta: Option<u32>,
    /// Expected arrivals per batch interval.
    #[arg(long)]
    pub density: Option<f64>,
    /// Capacity of every resource.
    #[arg(long)]
    pub capacity: Option<f64>,
    /// Number of resource types.
    #[arg(long)]
    pub resources: Option<usize>,
    /// Occupation parameter of the price curve.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Spread D/F of bid unit values (F = 1).
    #[arg(long)]
    pub df_ratio: Option<f64>,
    /// Containers per job, as MIN-MAX.
    #[arg(long, value_name = "MIN-MAX")]
    pub containers: Option<String>,
    /// Slots per container, as MIN-MAX.
    #[arg(long, value_name = "MIN-MAX")]
    pub task_slots: Option<String>,
    /// Job graph shape: chain or random-dag.
    #[arg(long)]
    pub shape: Option<String>,
    /// Trace time units per slot.
    #[arg(long)]
    pub slot_length: Option<f64>,
    /// Containers each trace job is split into.
    #[arg(long)]
    pub chain_split: Option<u32>,
    #[arg(long)]
    pub reps: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write results here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Largest job graph the exact scheduler accepts.
    #[arg(long)]
    pub max_containers_exact: Option<usize>,
    /// Write the batch auction's event log (JSON lines) here.
    #[arg(long, value_name = "PATH")]
    pub events: Option<PathBuf>,
    /// Add a runtime_ms column.
    #[arg(long)]
    #[serde(default)]
    pub timing: bool,
}

/// Per-subcommand defaults.
#[derive(Clone, Debug)]
pub struct Defaults {
    pub slots: u32,
    pub theta: u32,
    pub density: f64,
    pub reps: u32,
    pub containers: (usize, usize),
    pub task_slots: (u32, u32),
}

impl Defaults {
    /// Full-size workloads.
    pub fn reference() -> Self {
        let g = GeneratorConfig::default();
        Self {
            slots: g.horizon,
            theta: g.window,
            density: g.density,
            reps: 10,
            containers: g.containers_range,
            task_slots: g.slots_range,
        }
    }

    /// Instances small enough for the exact oracle.
    pub fn oracle_sized() -> Self {
        Self {
            slots: 12,
            theta: 2,
            density: 1.5,
            reps: 50,
            containers: (1, 3),
            task_slots: (1, 3),
        }
    }
}

/// A config file: the [`Common`] keys plus sweep value lists.
#[derive(Clone, Debug, Default)]
pub struct FileConfig {
    pub common: Common,
    pub thetas: Option<Vec<u32>>,
    pub df_ratios: Option<Vec<f64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ExperimentError::Spec(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
            .map_err(|e| ExperimentError::Spec(format!("bad config {}: {e}", path.display())))
    }

    /// Parses TOML text, rejecting unknown keys.
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        let mut table: toml::Table = toml::from_str(text)?;
        let thetas = table.remove("thetas").map(|v| v.try_into()).transpose()?;
        let df_ratios = table
            .remove("df_ratios")
            .map(|v| v.try_into())
            .transpose()?;
        Ok(Self {
            common: table.try_into()?,
            thetas,
            df_ratios,
        })
    }
}

fn parse_range<T: std::str::FromStr + PartialOrd + Copy>(
    flag: &str,
    raw: &str,
) -> Result<(T, T), ExperimentError> {
    let bad = || ExperimentError::Spec(format!("--{flag} expects MIN-MAX, got {raw:?}"));
    let (lo, hi) = match raw.split_once('-') {
        Some((a, b)) => (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        ),
        None => {
            let v = raw.trim().parse().map_err(|_| bad())?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

impl Common {
    /// Fills every unset flag from `file`.
    pub fn merged_with(self, file: Common) -> Common {
        macro_rules! take {
            ($($f:ident),*) => { Common { $($f: self.$f.or(file.$f),)* generate: self.generate || file.generate, timing: self.timing || file.timing, config: self.config } };
        }
        take!(
            trace,
            slots,
            theta,
            density,
            capacity,
            resources,
            sigma,
            df_ratio,
            containers,
            task_slots,
            shape,
            slot_length,
            chain_split,
            reps,
            seed,
            out,
            format,
            max_containers_exact,
            events
        )
    }

    /// Resolves into a validated spec.
    pub fn into_spec(&self, defaults: &Defaults) -> Result<ExperimentSpec, ExperimentError> {
        let g = GeneratorConfig::default();
        let theta = self.theta.unwrap_or(defaults.theta);
        let shape = match self.shape.as_deref() {
            None | Some("chain") => GraphShape::Chain,
            Some("random-dag") => GraphShape::RandomDag,
            Some(other) => {
                return Err(ExperimentError::Spec(format!(
                    "--shape must be chain or random-dag, got {other:?}"
                )))
            }
        };
        let containers = match &self.containers {
            Some(raw) => parse_range("containers", raw)?,
            None => defaults.containers,
        };
        let task_slots = match &self.task_slots {
            Some(raw) => parse_range("task-slots", raw)?,
            None => defaults.task_slots,
        };
        let source = match &self.trace {
            Some(path) => Source::Trace {
                path: path.clone(),
                mapping: TraceMapping {
                    slot_length: self.slot_length.unwrap_or(1.0),
                    chain_split: self.chain_split.unwrap_or(1),
                    ..TraceMapping::default()
                },
            },
            None => Source::Generate(GeneratorConfig {
                density: self.density.unwrap_or(defaults.density),
                window: theta,
                containers_range: containers,
                slots_range: task_slots,
                shape,
                ..g.clone()
            }),
        };
        let spec = ExperimentSpec {
            source,
            horizon: self.slots.unwrap_or(defaults.slots),
            resources: self.resources.unwrap_or(g.resources),
            capacity: self.capacity.unwrap_or(g.capacity),
            theta,
            sigma: self.sigma.unwrap_or(0.9),
            df_ratio: self.df_ratio.unwrap_or(g.value_range.1),
            max_containers_exact: self.max_containers_exact.unwrap_or(8),
            reps: self.reps.unwrap_or(defaults.reps),
            seed: self.seed.unwrap_or(1),
            timing: self.timing,
            record_events: self.events.is_some(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range::<u32>("x", "1-6").unwrap(), (1, 6));
        assert_eq!(parse_range::<u32>("x", "3").unwrap(), (3, 3));
        assert!(parse_range::<u32>("x", "6-1").is_err());
        assert!(parse_range::<u32>("x", "a-b").is_err());
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = FileConfig::parse("slots = 50\ntheta = 3\nthetas = [1, 2]\n").unwrap();
        let flags = Common {
            theta: Some(5),
            ..Common::default()
        };
        let spec = flags
            .merged_with(file.common)
            .into_spec(&Defaults::reference())
            .unwrap();
        assert_eq!((spec.horizon, spec.theta, spec.reps), (50, 5, 10));
        assert_eq!(file.thetas, Some(vec![1, 2]));
    }

    #[test]
    fn unknown_file_keys_are_errors() {
        assert!(FileConfig::parse("slotz = 3\n").is_err());
    }

    #[test]
    fn bad_values_are_spec_errors() {
        let flags = Common {
            sigma: Some(1.5),
            ..Common::default()
        };
        let err = flags.into_spec(&Defaults::reference()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("--sigma"));
    }
}
