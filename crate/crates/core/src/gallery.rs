//! Named scenarios with closed-form expected outcomes.
//!
//! Every expected record is computed from the scenario's formulas by direct
//! evaluation, never by calling the checkers, so [`Scenario::golden_check`]
//! is a genuine cross-check.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::convergence::{
    check_lower_bound, check_pointwise, ConvergenceReport, FnSequence, Witness,
};
use crate::error::{Error, Result};
use crate::functions::ExtFn;
use crate::metric::{build_grid_1d, MetricSpace, PointSet};
use crate::solver::TieBreak;

/// Expected outcome of a threshold search up to the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Threshold {
    Exactly(usize),
    /// Holds from this index or earlier.
    AtMost(usize),
    /// Fails at the horizon, with this witness.
    NoneUpTo(Witness),
}

impl Threshold {
    pub fn matches(&self, report: &ConvergenceReport) -> bool {
        match (*self, report.first_valid_n, report.witness) {
            (Threshold::Exactly(n), Some(got), _) => got == n,
            (Threshold::AtMost(n), Some(got), _) => got <= n,
            (Threshold::NoneUpTo(w), None, Some(got)) => got == w,
            _ => false,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Exactly(n) => write!(f, "{n}"),
            Threshold::AtMost(n) => write!(f, "<= {n}"),
            Threshold::NoneUpTo(w) => write!(f, "none <= {} (witness point #{})", w.n, w.point),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub eps: f64,
    pub tol: f64,
    pub pointwise: Threshold,
    pub lower_bound: Threshold,
    /// `inf f_n` for `n = 1..=N`.
    pub inf_trajectory: Vec<f64>,
    pub limit_inf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `f_n = x^2 + 1/n`.
    Shift,
    /// `f_n = x^2 - 1/n`.
    ShiftDown,
    /// `f_n = (x - 1/n)^2`.
    Drift,
    /// `f_n = x^2`.
    Constant,
}

impl Profile {
    pub const ALL: [Profile; 4] = [
        Profile::Shift,
        Profile::ShiftDown,
        Profile::Drift,
        Profile::Constant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Profile::Shift => "shift",
            Profile::ShiftDown => "shift-down",
            Profile::Drift => "drift",
            Profile::Constant => "constant",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Profile::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Unknown {
                kind: "profile",
                name: name.to_string(),
            })
    }

    fn term(self, x: f64, n: usize) -> f64 {
        let s = 1.0 / n as f64;
        match self {
            Profile::Shift => x * x + s,
            Profile::ShiftDown => x * x - s,
            Profile::Drift => (x - s) * (x - s),
            Profile::Constant => x * x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// `f_n(x) = max(-1, x/n)` and `f_inf = 0` on `grid(-M, M, grid_points)`.
    ///
    /// On the real line the lower bound fails for every `n`, so the infima do
    /// not converge. On the bounded grid it holds from `n = ceil(M/eps)` on,
    /// so the failure seen here is a failure up to the horizon only.
    Cone {
        m: f64,
        grid_points: usize,
        horizon: usize,
    },
    /// Indicators of `[0, 1/n]` converging to the indicator of `{0}` on
    /// `grid(-1, 1, grid_points)`.
    Indicator { grid_points: usize, horizon: usize },
    /// A uniformly convergent family on `grid(-1, 1, 129)` with `f_inf = x^2`.
    Uniform { profile: Profile, horizon: usize },
}

/// Suggested parameters for demos and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Defaults {
    pub eps: f64,
    pub tol: f64,
    pub budget: f64,
    pub solver_tol: f64,
    pub tie_break: TieBreak,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub family: Family,
    pub seq: FnSequence,
    pub defaults: Defaults,
}

/// One mismatch between the expected record and a checker run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub field: String,
    pub expected: String,
    pub got: String,
}

impl Scenario {
    pub fn space(&self) -> &Arc<MetricSpace> {
        self.seq.limit().space()
    }

    pub fn horizon(&self) -> usize {
        self.seq.horizon()
    }

    /// Expected outcomes at lower-bound level `eps` and pointwise level `tol`.
    pub fn expected(&self, eps: f64, tol: f64) -> Result<Expected> {
        if !(eps > 0.0) || !(tol > 0.0) {
            return Err(Error::NonPositive {
                name: "eps",
                value: eps.min(tol),
            });
        }
        let horizon = self.horizon();
        let space = self.space();
        let x = |i: usize| space.coord(i).expect("gallery spaces have coordinates");
        let first_from = |holds: &dyn Fn(usize) -> bool, witness_point: usize| {
            // The conditions below are monotone in n, so scanning down from
            // the horizon finds the threshold.
            if !holds(horizon) {
                return Threshold::NoneUpTo(Witness {
                    n: horizon,
                    point: witness_point,
                });
            }
            let mut n = horizon;
            while n > 1 && holds(n - 1) {
                n -= 1;
            }
            Threshold::Exactly(n)
        };
        let (pointwise, lower_bound, inf_trajectory, limit_inf) = match self.family {
            Family::Cone { m, .. } => {
                // The worst point is x = -M (index 0), where f_n = max(-1, -M/n).
                let low = |n: usize| (-1.0f64).max(-m / n as f64);
                let pw = first_from(&|n| low(n).abs() <= tol, 0);
                let lb = first_from(&|n| low(n) >= -eps, 0);
                let infs = (1..=horizon).map(low).collect();
                (pw, lb, infs, 0.0)
            }
            Family::Indicator { .. } => {
                let zero = space.nearest_coord(0.0).expect("grid contains 0");
                let positive: Vec<usize> = (0..space.len()).filter(|&i| x(i) > 0.0).collect();
                // Pointwise: the smallest positive grid point leaves [0, 1/n] last.
                let x_min = positive[0];
                let pw = first_from(&|n| x(x_min) > 1.0 / n as f64, x_min);
                // Lower bound: (f_inf)_eps is finite exactly on the eps-ball
                // around 0; the first positive point outside it must leave [0, 1/n].
                let outside = positive
                    .iter()
                    .copied()
                    .find(|&i| space.dist(i, zero) > eps);
                let lb = match outside {
                    None => Threshold::Exactly(1),
                    Some(p) => first_from(&|n| x(p) > 1.0 / n as f64, p),
                };
                (pw, lb, vec![0.0; horizon], 0.0)
            }
            Family::Uniform { profile, .. } => {
                let gaps = |n: usize| match profile {
                    Profile::Shift | Profile::ShiftDown => 1.0 / n as f64,
                    Profile::Drift => 2.0 / n as f64 + 1.0 / (n * n) as f64,
                    Profile::Constant => 0.0,
                };
                let pw = first_from(&|n| gaps(n) <= tol, 0);
                let lb = match profile {
                    // f_n >= f_inf >= (f_inf)_eps - eps.
                    Profile::Shift | Profile::Constant => Threshold::Exactly(1),
                    // Binding at x = 0, where f_inf equals its enlargement.
                    Profile::ShiftDown => first_from(&|n| -1.0 / (n as f64) >= -eps, 0),
                    // A sup-gap at most eps is sufficient, not necessary.
                    Profile::Drift => match first_from(&|n| gaps(n) <= eps, 0) {
                        Threshold::Exactly(n) => Threshold::AtMost(n),
                        other => other,
                    },
                };
                let infs = (1..=horizon)
                    .map(|n| {
                        (0..space.len())
                            .map(|i| profile.term(x(i), n))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect();
                (pw, lb, infs, 0.0)
            }
        };
        Ok(Expected {
            eps,
            tol,
            pointwise,
            lower_bound,
            inf_trajectory,
            limit_inf,
        })
    }

    /// Runs the checkers and compares with [`Scenario::expected`].
    pub fn golden_check(&self, eps: f64, tol: f64) -> Result<Vec<Mismatch>> {
        let exp = self.expected(eps, tol)?;
        let mut out = Vec::new();
        let pw = check_pointwise(&self.seq, tol)?;
        if !exp.pointwise.matches(&pw) {
            out.push(Mismatch {
                field: "pointwise".into(),
                expected: exp.pointwise.to_string(),
                got: pw.summary(),
            });
        }
        let lb = check_lower_bound(&self.seq, eps)?;
        if !exp.lower_bound.matches(&lb) {
            out.push(Mismatch {
                field: "lower-bound".into(),
                expected: exp.lower_bound.to_string(),
                got: lb.summary(),
            });
        }
        for (k, (&want, f)) in exp.inf_trajectory.iter().zip(self.seq.terms()).enumerate() {
            if f.inf_value() != want {
                out.push(Mismatch {
                    field: format!("inf f_{}", k + 1),
                    expected: want.to_string(),
                    got: f.inf_value().to_string(),
                });
            }
        }
        if self.seq.limit().inf_value() != exp.limit_inf {
            out.push(Mismatch {
                field: "inf f_inf".into(),
                expected: exp.limit_inf.to_string(),
                got: self.seq.limit().inf_value().to_string(),
            });
        }
        Ok(out)
    }

    /// Whether minimizers of `f_n + g` must stay away from those of
    /// `f_inf + g` for every perturbation built with this `budget`.
    ///
    /// For the cone: the bumps raise `g` by at most `budget / 4` in total, so
    /// `(f_n + g)(x_n) <= -min(1, M/n) + budget/4`, while within distance
    /// `eps` of 0 the value is at least `-eps/n`. Returns `None` when this
    /// argument does not settle the question.
    pub fn predicts_divergence(&self, eps: f64, budget: f64) -> Option<bool> {
        match self.family {
            Family::Cone { m, horizon, .. } => {
                let separated = (1..=horizon).all(|n| {
                    let n = n as f64;
                    (1.0f64).min(m / n) - eps / n > budget / 4.0
                });
                separated.then_some(true)
            }
            _ => None,
        }
    }
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::EmptySequence);
    }
    Ok(())
}

pub fn scenario_cone(m: f64, grid_points: usize, horizon: usize) -> Result<Scenario> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::NonPositive {
            name: "M",
            value: m,
        });
    }
    if grid_points < 3 {
        return Err(Error::InvalidGrid {
            a: -m,
            b: m,
            m: grid_points,
        });
    }
    check_horizon(horizon)?;
    let space = build_grid_1d(-m, m, grid_points)?.into_shared();
    let terms = (1..=horizon)
        .map(|n| {
            ExtFn::from_coords(space.clone(), |x| (-1.0f64).max(x / n as f64))
                .map(|f| f.with_name(format!("f_{n}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let limit = ExtFn::constant(space.clone(), 0.0)?.with_name("f_inf");
    let middle = space.nearest_coord(0.0);
    Ok(Scenario {
        name: "cone".into(),
        family: Family::Cone {
            m,
            grid_points,
            horizon,
        },
        seq: FnSequence::new(terms, limit)?,
        defaults: Defaults {
            eps: 0.5,
            tol: 0.05,
            budget: 0.4,
            solver_tol: 0.02,
            tie_break: TieBreak::NearestPrevious { anchor: middle },
        },
    })
}

pub fn scenario_indicator(grid_points: usize, horizon: usize) -> Result<Scenario> {
    if grid_points < 3 {
        return Err(Error::InvalidGrid {
            a: -1.0,
            b: 1.0,
            m: grid_points,
        });
    }
    check_horizon(horizon)?;
    let space = build_grid_1d(-1.0, 1.0, grid_points)?.into_shared();
    let zero = (0..space.len()).find(|&i| space.coord(i) == Some(0.0));
    let Some(zero) = zero else {
        return Err(Error::Format(format!(
            "grid(-1, 1, {grid_points}) does not contain 0; use an odd point count"
        )));
    };
    let terms = (1..=horizon)
        .map(|n| {
            let s = 1.0 / n as f64;
            let set: PointSet = (0..space.len())
                .filter(|&i| {
                    let x = space.coord(i).unwrap();
                    (0.0..=s).contains(&x)
                })
                .collect();
            ExtFn::indicator(space.clone(), &set).map(|f| f.with_name(format!("f_{n}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let limit = ExtFn::indicator(space.clone(), &PointSet::singleton(zero))?.with_name("f_inf");
    Ok(Scenario {
        name: "indicator".into(),
        family: Family::Indicator {
            grid_points,
            horizon,
        },
        seq: FnSequence::new(terms, limit)?,
        defaults: Defaults {
            eps: 0.125,
            tol: 0.125,
            budget: 0.4,
            solver_tol: 0.02,
            tie_break: TieBreak::LowestIndex,
        },
    })
}

pub fn scenario_uniform(profile: Profile, horizon: usize) -> Result<Scenario> {
    check_horizon(horizon)?;
    let space = build_grid_1d(-1.0, 1.0, 129)?.into_shared();
    let terms = (1..=horizon)
        .map(|n| {
            ExtFn::from_coords(space.clone(), |x| profile.term(x, n))
                .map(|f| f.with_name(format!("f_{n}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let limit = ExtFn::from_coords(space.clone(), |x| x * x)?.with_name("f_inf");
    Ok(Scenario {
        name: format!("uniform-{}", profile.name()),
        family: Family::Uniform { profile, horizon },
        seq: FnSequence::new(terms, limit)?,
        defaults: Defaults {
            eps: 0.125,
            tol: 0.125,
            budget: 0.4,
            solver_tol: 0.02,
            tie_break: TieBreak::LowestIndex,
        },
    })
}

/// Parameters accepted by [`by_name`]; unset fields take scenario defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GalleryParams {
    pub m: Option<f64>,
    pub grid_points: Option<usize>,
    pub horizon: Option<usize>,
    pub profile: Option<String>,
}

pub const NAMES: [&str; 3] = ["cone", "indicator", "uniform"];

/// Registry lookup: `cone` (M = 10, 201 points, N = 15), `indicator`
/// (129 points, N = 128) or `uniform` (profile `shift`, N = 64).
pub fn by_name(name: &str, params: &GalleryParams) -> Result<Scenario> {
    match name {
        "cone" => scenario_cone(
            params.m.unwrap_or(10.0),
            params.grid_points.unwrap_or(201),
            params.horizon.unwrap_or(15),
        ),
        "indicator" => scenario_indicator(
            params.grid_points.unwrap_or(129),
            params.horizon.unwrap_or(128),
        ),
        "uniform" => scenario_uniform(
            Profile::parse(params.profile.as_deref().unwrap_or("shift"))?,
            params.horizon.unwrap_or(64),
        ),
        other => Err(Error::Unknown {
            kind: "scenario",
            name: other.to_string(),
        }),
    }
}
