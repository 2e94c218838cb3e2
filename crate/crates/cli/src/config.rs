use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use strongmin::gallery::{self, GalleryParams, Scenario};
use strongmin::io::{self, SequenceDoc};
use strongmin::{ExtFn, FnSequence, MetricSpace, TieBreak};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreakArg {
    LowestIndex,
    NearestPrevious,
}

/// Parameters shared by every command. The config file uses the same keys.
#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Params {
    /// Seed for randomized verifier trials.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub budget: Option<f64>,
    /// Pointwise tolerance for check-conv; target diameter for the solver.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Number of terms of a gallery sequence.
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub tie_break: Option<TieBreakArg>,
    /// Starting point index for nearest-previous.
    #[arg(long, global = true)]
    pub anchor: Option<usize>,
    /// Gallery scenario used when no input files are given.
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    /// Half-width of the cone scenario's grid.
    #[arg(long = "m", global = true, allow_negative_numbers = true)]
    pub m: Option<f64>,
    #[arg(long, global = true)]
    pub grid_points: Option<usize>,
    /// Uniform family: shift, shift-down, drift or constant.
    #[arg(long, global = true)]
    pub profile: Option<String>,
    #[arg(long, global = true)]
    pub space: Option<PathBuf>,
    #[arg(long, global = true)]
    pub function: Option<PathBuf>,
    #[arg(long, global = true)]
    pub sequence: Option<PathBuf>,
    /// Term used by single-function commands on a scenario (0 is the limit).
    #[arg(long, global = true)]
    pub term: Option<usize>,
    /// Randomized trials for verify-lemmas.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Triangle-inequality tolerance when reading a space.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tol_metric: Option<f64>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr, $($field:ident),*) => {
        Params { $($field: $hi.$field.or($lo.$field)),* }
    };
}

impl Params {
    /// Fields set in `self` win over `base`.
    pub fn over(self, base: Params) -> Params {
        overlay!(
            self,
            base,
            seed,
            out,
            eps,
            budget,
            tol,
            horizon,
            tie_break,
            anchor,
            scenario,
            m,
            grid_points,
            profile,
            space,
            function,
            sequence,
            term,
            trials,
            tol_metric
        )
    }

    pub fn from_file(path: &Path) -> Result<Params> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn tie_break(&self, fallback: TieBreak) -> TieBreak {
        match self.tie_break {
            None => match (fallback, self.anchor) {
                (TieBreak::NearestPrevious { .. }, Some(a)) => {
                    TieBreak::NearestPrevious { anchor: Some(a) }
                }
                (tb, _) => tb,
            },
            Some(TieBreakArg::LowestIndex) => TieBreak::LowestIndex,
            Some(TieBreakArg::NearestPrevious) => TieBreak::NearestPrevious {
                anchor: self.anchor,
            },
        }
    }

    pub fn check_positive(name: &str, v: f64) -> Result<f64> {
        if !(v > 0.0) || !v.is_finite() {
            bail!("--{name} must be a positive finite number, got {v}");
        }
        Ok(v)
    }

    pub fn gallery_params(&self) -> GalleryParams {
        GalleryParams {
            m: self.m,
            grid_points: self.grid_points,
            horizon: self.horizon,
            profile: self.profile.clone(),
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let name = self.scenario.as_deref().unwrap_or("indicator");
        gallery::by_name(name, &self.gallery_params())
            .with_context(|| format!("building scenario {name:?}"))
    }

    /// Makes input paths absolute so a saved config can be replayed from
    /// another working directory.
    pub fn absolutized(mut self) -> Result<Params> {
        for p in [&mut self.space, &mut self.function, &mut self.sequence] {
            if let Some(path) = p.as_mut() {
                *path = std::path::absolute(&*path)?;
            }
        }
        Ok(self)
    }
}

/// The inputs of a command: either a gallery scenario or files on disk.
pub struct Inputs {
    pub seq: FnSequence,
    pub scenario: Option<Scenario>,
}

impl Inputs {
    pub fn space(&self) -> &Arc<MetricSpace> {
        self.seq.limit().space()
    }

    pub fn fallback_tie_break(&self) -> TieBreak {
        self.scenario
            .as_ref()
            .map(|s| s.defaults.tie_break)
            .unwrap_or_default()
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_space(path: &Path, tol_metric: f64) -> Result<Arc<MetricSpace>> {
    Ok(io::space_from_text(&read(path)?, tol_metric)
        .with_context(|| format!("parsing space {}", path.display()))?
        .into_shared())
}

pub fn load_function(path: &Path, space: Arc<MetricSpace>) -> Result<ExtFn> {
    io::function_from_text(&read(path)?, space)
        .with_context(|| format!("parsing function {}", path.display()))
}

pub fn load_sequence(path: &Path, tol_metric: f64) -> Result<FnSequence> {
    let doc: SequenceDoc = io::read_doc("sequence", &read(path)?)
        .with_context(|| format!("parsing sequence {}", path.display()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let space = load_space(&dir.join(&doc.space_ref), tol_metric)?;
    let terms = doc
        .terms
        .iter()
        .map(|t| load_function(&dir.join(t), space.clone()))
        .collect::<Result<Vec<_>>>()?;
    let limit = load_function(&dir.join(&doc.limit), space)?;
    Ok(FnSequence::new(terms, limit)?)
}

pub fn sequence_inputs(p: &Params) -> Result<Inputs> {
    match &p.sequence {
        Some(path) => Ok(Inputs {
            seq: load_sequence(path, p.tol_metric.unwrap_or(0.0))?,
            scenario: None,
        }),
        None => {
            let scenario = p.scenario()?;
            Ok(Inputs {
                seq: scenario.seq.clone(),
                scenario: Some(scenario),
            })
        }
    }
}

/// A single function: `--function` (with `--space`), or term `--term` of the
/// scenario (0, the default, is the limit).
pub fn function_input(p: &Params) -> Result<(ExtFn, Option<Scenario>)> {
    if let Some(path) = &p.function {
        let Some(space) = &p.space else {
            bail!("--function needs --space");
        };
        let space = load_space(space, p.tol_metric.unwrap_or(0.0))?;
        return Ok((load_function(path, space)?, None));
    }
    let inputs = sequence_inputs(p)?;
    let n = p.term.unwrap_or(0);
    if n > inputs.seq.horizon() {
        bail!("--term {n} exceeds the horizon {}", inputs.seq.horizon());
    }
    let f = if n == 0 {
        inputs.seq.limit().clone()
    } else {
        inputs.seq.term(n).clone()
    };
    Ok((f, inputs.scenario))
}
