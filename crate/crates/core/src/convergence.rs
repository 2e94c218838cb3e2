//! Convergence conditions for truncated function sequences.
//!
//! A sequence `f_1, ..., f_N` is stored together with its limit `f_inf`.
//! Statements of the form "there is N' such that for all n >= N'" can only be
//! certified up to the stored horizon `N`, and every report says so.
//!
//! Two conditions are checked: pointwise convergence, and the enlarged lower
//! bound `f_n >= (f_inf)_eps - eps` for all large `n`. The verifiers for the
//! consequences (convergence of infima, proximity of near-minimizers, and
//! stability under adding a uniformly continuous function) mirror the
//! corresponding proof steps; their slack constants are documented where used.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{same_space, ExtFn};
use crate::metric::PointSet;

#[derive(Debug, Clone)]
pub struct FnSequence {
    terms: Vec<ExtFn>,
    limit: ExtFn,
}

impl FnSequence {
    pub fn new(terms: Vec<ExtFn>, limit: ExtFn) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::EmptySequence);
        }
        if terms.iter().any(|t| !same_space(t.space(), limit.space())) {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self { terms, limit })
    }

    /// Truncation length `N`.
    pub fn horizon(&self) -> usize {
        self.terms.len()
    }

    /// Term `f_n` for `1 <= n <= N`.
    pub fn term(&self, n: usize) -> &ExtFn {
        &self.terms[n - 1]
    }

    pub fn terms(&self) -> &[ExtFn] {
        &self.terms
    }

    pub fn limit(&self) -> &ExtFn {
        &self.limit
    }

    /// The shifted sequence `(f_n + g, f_inf + g)`.
    pub fn shifted(&self, g: &ExtFn) -> Result<FnSequence> {
        let terms = self
            .terms
            .iter()
            .map(|t| t.add(g))
            .collect::<Result<Vec<_>>>()?;
        FnSequence::new(terms, self.limit.add(g)?)
    }

    /// Only the first `n` terms.
    pub fn truncated(&self, n: usize) -> Result<FnSequence> {
        FnSequence::new(
            self.terms[..n.min(self.terms.len())].to_vec(),
            self.limit.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// `|f_n(x) - f_inf(x)| <= tol` eventually, for every x.
    Pointwise,
    /// `f_n >= (f_inf)_eps - eps` eventually.
    LowerBound,
    /// `inf f_n < inf f_inf + level` eventually.
    InfApproach,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Pointwise => "pointwise",
            Condition::LowerBound => "lower-bound",
            Condition::InfApproach => "inf-approach",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub n: usize,
    pub point: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub condition: Condition,
    /// `eps` for the lower bound, `tol` for pointwise checks.
    pub level: f64,
    pub horizon: usize,
    /// Smallest `N'` such that the tested inequality holds for every
    /// `N' <= n <= horizon`; `None` when it already fails at `n = horizon`.
    pub first_valid_n: Option<usize>,
    /// A violating `(n, x)` pair, present exactly when `first_valid_n` is `None`.
    pub witness: Option<Witness>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.first_valid_n.is_some()
    }

    pub fn summary(&self) -> String {
        match (self.first_valid_n, self.witness) {
            (Some(n), _) => format!(
                "{} at level {}: holds for n >= {} up to horizon {}",
                self.condition, self.level, n, self.horizon
            ),
            (None, Some(w)) => format!(
                "{} at level {}: fails up to horizon {} (witness n={}, point #{})",
                self.condition, self.level, self.horizon, w.n, w.point
            ),
            (None, None) => unreachable!("witness present iff first_valid_n is None"),
        }
    }

    fn from_scan(
        condition: Condition,
        level: f64,
        horizon: usize,
        last_failure: Option<Witness>,
    ) -> Self {
        match last_failure {
            None => Self {
                condition,
                level,
                horizon,
                first_valid_n: Some(1),
                witness: None,
            },
            Some(w) if w.n == horizon => Self {
                condition,
                level,
                horizon,
                first_valid_n: None,
                witness: Some(w),
            },
            Some(w) => Self {
                condition,
                level,
                horizon,
                first_valid_n: Some(w.n + 1),
                witness: None,
            },
        }
    }
}

/// Scans `n = N, N-1, ..., 1` and returns the largest `n` (with its lowest
/// failing point) at which `ok(n, x)` fails for some `x`.
fn last_failure(
    horizon: usize,
    points: usize,
    mut ok: impl FnMut(usize, usize) -> bool,
) -> Option<Witness> {
    (1..=horizon).rev().find_map(|n| {
        (0..points)
            .find(|&x| !ok(n, x))
            .map(|point| Witness { n, point })
    })
}

fn ext_gap(a: f64, b: f64) -> f64 {
    match (a.is_finite(), b.is_finite()) {
        (false, false) => 0.0,
        (true, true) => (a - b).abs(),
        _ => f64::INFINITY,
    }
}

/// Pointwise convergence up to the horizon. Two `+inf` values count as equal;
/// a finite value against `+inf` never converges.
pub fn check_pointwise(seq: &FnSequence, tol: f64) -> Result<ConvergenceReport> {
    if !(tol > 0.0) {
        return Err(Error::NonPositive {
            name: "tol",
            value: tol,
        });
    }
    let limit = seq.limit();
    let fail = last_failure(seq.horizon(), limit.len(), |n, x| {
        ext_gap(seq.term(n).value(x), limit.value(x)) <= tol
    });
    Ok(ConvergenceReport::from_scan(
        Condition::Pointwise,
        tol,
        seq.horizon(),
        fail,
    ))
}

/// The enlarged lower bound `f_n >= (f_inf)_eps - eps` up to the horizon.
pub fn check_lower_bound(seq: &FnSequence, eps: f64) -> Result<ConvergenceReport> {
    if !(eps > 0.0) {
        return Err(Error::NonPositive {
            name: "eps",
            value: eps,
        });
    }
    let floor: Vec<f64> = seq
        .limit()
        .enlarge(eps)?
        .values()
        .iter()
        .map(|v| v - eps)
        .collect();
    let fail = last_failure(seq.horizon(), floor.len(), |n, x| {
        seq.term(n).value(x) >= floor[x]
    });
    Ok(ConvergenceReport::from_scan(
        Condition::LowerBound,
        eps,
        seq.horizon(),
        fail,
    ))
}

/// `inf f_n < inf f_inf + level` up to the horizon (strict, as in the
/// near-minimizer proximity argument). The witness point is `argmin f_n`.
pub fn check_inf_approach(seq: &FnSequence, level: f64) -> Result<ConvergenceReport> {
    if !(level > 0.0) {
        return Err(Error::NonPositive {
            name: "level",
            value: level,
        });
    }
    let target = seq.limit().inf_value() + level;
    let fail = (1..=seq.horizon()).rev().find_map(|n| {
        let t = seq.term(n);
        (t.inf_value() >= target).then(|| Witness {
            n,
            point: t.argmin(),
        })
    });
    Ok(ConvergenceReport::from_scan(
        Condition::InfApproach,
        level,
        seq.horizon(),
        fail,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Applicability {
    Applicable,
    NotApplicable { reason: String },
}

impl Applicability {
    pub fn is_applicable(&self) -> bool {
        matches!(self, Applicability::Applicable)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfConvergenceReport {
    pub eps: f64,
    pub applicability: Applicability,
    /// `inf f_n` for `n = 1..=N`.
    pub inf_trajectory: Vec<f64>,
    pub limit_inf: f64,
    /// `max` of the pointwise and lower-bound thresholds at `eps`.
    pub threshold: Option<usize>,
    /// `inf f_n >= inf f_inf - eps` for every `n >= threshold`.
    pub liminf_ok: bool,
    /// `inf f_n <= inf f_inf + 2 eps` for every `n >= threshold`.
    pub limsup_ok: bool,
}

impl InfConvergenceReport {
    pub fn holds(&self) -> bool {
        !self.applicability.is_applicable() || (self.liminf_ok && self.limsup_ok)
    }
}

/// Convergence of infima. Preconditions: the lower bound and pointwise
/// convergence (at `tol = eps`) both hold up to the horizon; otherwise the
/// report is marked not applicable and the checks are left false.
///
/// The lower estimate comes from the lower bound at `eps`, which gives
/// `inf f_n >= inf f_inf - eps`. The upper estimate picks a point
/// `x` with `f_inf(x) <= inf f_inf + eps` and uses pointwise convergence
/// there, which gives `inf f_n <= inf f_inf + 2 eps`.
pub fn verify_inf_convergence(seq: &FnSequence, eps: f64) -> Result<InfConvergenceReport> {
    let lower = check_lower_bound(seq, eps)?;
    let pointwise = check_pointwise(seq, eps)?;
    let inf_trajectory: Vec<f64> = seq.terms().iter().map(ExtFn::inf_value).collect();
    let limit_inf = seq.limit().inf_value();
    let (applicability, threshold) = match (lower.first_valid_n, pointwise.first_valid_n) {
        (Some(a), Some(b)) => (Applicability::Applicable, Some(a.max(b))),
        _ => {
            let failing: Vec<String> = [&lower, &pointwise]
                .iter()
                .filter(|r| !r.passed())
                .map(|r| r.summary())
                .collect();
            (
                Applicability::NotApplicable {
                    reason: failing.join("; "),
                },
                None,
            )
        }
    };
    let (liminf_ok, limsup_ok) = match threshold {
        Some(n0) => {
            let tail = &inf_trajectory[n0 - 1..];
            (
                tail.iter().all(|&v| v >= limit_inf - eps),
                tail.iter().all(|&v| v <= limit_inf + 2.0 * eps),
            )
        }
        None => (false, false),
    };
    Ok(InfConvergenceReport {
        eps,
        applicability,
        inf_trajectory,
        limit_inf,
        threshold,
        liminf_ok,
        limsup_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityReport {
    pub eps: f64,
    pub applicability: Applicability,
    /// Threshold from the lower bound and the inf-approach condition, both at `eps/4`.
    pub threshold: Option<usize>,
    /// `(n, max { dist(x, Omega_{f_inf}(eps)) : x in Omega_{f_n}(eps/4) })` for `n >= threshold`.
    pub per_n: Vec<(usize, f64)>,
    /// Every entry of `per_n` is at most `eps / 2`.
    pub inclusion_ok: bool,
    /// `diam` of the union of `Omega_{f_k}(eps/4)` over `threshold <= k <= N`.
    pub tail_union_diam: f64,
    /// `diam Omega_{f_inf}(eps)`.
    pub limit_diam: f64,
    /// `tail_union_diam <= limit_diam + eps`.
    pub union_diam_bound_ok: bool,
}

impl ProximityReport {
    pub fn holds(&self) -> bool {
        !self.applicability.is_applicable() || (self.inclusion_ok && self.union_diam_bound_ok)
    }
}

/// Proximity of near-minimizers: beyond the threshold, each point of
/// `Omega_{f_n}(eps/4)` lies within `eps/2` of `Omega_{f_inf}(eps)`.
///
/// With `d = eps/4`, the threshold is the first `n` past which both
/// `f_n >= (f_inf)_d - d` and `inf f_n < inf f_inf + d` hold up to the horizon.
/// These two finite facts give `Omega_{f_n}(d) ⊂ Omega_{(f_inf)_d}(3d)`, and
/// `3d < eps` then places each such point within `d` (hence `eps/2`) of
/// `Omega_{f_inf}(eps)`.
pub fn verify_argmin_proximity(seq: &FnSequence, eps: f64) -> Result<ProximityReport> {
    if !(eps > 0.0) {
        return Err(Error::NonPositive {
            name: "eps",
            value: eps,
        });
    }
    let quarter = eps / 4.0;
    let lower = check_lower_bound(seq, quarter)?;
    let approach = check_inf_approach(seq, quarter)?;
    let space = seq.limit().space().clone();
    let limit_set = seq.limit().eps_argmin(eps)?;
    let limit_diam = space.diam(&limit_set);
    let threshold = match (lower.first_valid_n, approach.first_valid_n) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    };
    let Some(n0) = threshold else {
        let failing: Vec<String> = [&lower, &approach]
            .iter()
            .filter(|r| !r.passed())
            .map(|r| r.summary())
            .collect();
        return Ok(ProximityReport {
            eps,
            applicability: Applicability::NotApplicable {
                reason: failing.join("; "),
            },
            threshold: None,
            per_n: Vec::new(),
            inclusion_ok: false,
            tail_union_diam: 0.0,
            limit_diam,
            union_diam_bound_ok: false,
        });
    };
    let mut per_n = Vec::with_capacity(seq.horizon() + 1 - n0);
    let mut union = PointSet::empty();
    for n in n0..=seq.horizon() {
        let near = seq.term(n).eps_argmin(quarter)?;
        let worst = near
            .iter()
            .map(|x| space.dist_to_set(x, &limit_set))
            .fold(0.0, f64::max);
        per_n.push((n, worst));
        union = union.union(&near);
    }
    let tail_union_diam = space.diam(&union);
    Ok(ProximityReport {
        eps,
        applicability: Applicability::Applicable,
        threshold,
        inclusion_ok: per_n.iter().all(|&(_, d)| d <= eps / 2.0),
        per_n,
        tail_union_diam,
        limit_diam,
        union_diam_bound_ok: tail_union_diam <= limit_diam + eps,
    })
}

/// Validates a uniform-continuity modulus for `g` at one accuracy: every pair
/// with `dist <= delta` must satisfy `|g(x) - g(y)| <= accuracy`. Closed
/// inequalities are used because enlargements range over closed balls.
pub fn validate_modulus(g: &ExtFn, accuracy: f64, delta: f64) -> Result<()> {
    g.require_finite()?;
    if !(delta > 0.0) {
        return Err(Error::NonPositive {
            name: "modulus delta",
            value: delta,
        });
    }
    let space = g.space();
    for x in 0..space.len() {
        let row = space.row(x);
        for y in (x + 1)..space.len() {
            let jump = (g.value(x) - g.value(y)).abs();
            if row[y] <= delta && jump > accuracy {
                return Err(Error::ModulusViolated {
                    x,
                    y,
                    dist: row[y],
                    delta,
                    jump,
                    eps: accuracy,
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub eps: f64,
    /// `min(modulus(eps/2), eps/2)`.
    pub delta: f64,
    /// Lower bound of the original sequence at `delta`.
    pub original: ConvergenceReport,
    /// Lower bound of the shifted sequence `(f_n + g)` at `eps`.
    pub shifted: ConvergenceReport,
}

impl ShiftReport {
    /// `Some(true)` when the shifted threshold does not exceed the original
    /// threshold at `delta`; `None` when the original fails up to the horizon,
    /// which leaves nothing to compare.
    pub fn preserved(&self) -> Option<bool> {
        let orig = self.original.first_valid_n?;
        Some(matches!(self.shifted.first_valid_n, Some(s) if s <= orig))
    }
}

/// Preservation of the lower bound under adding a uniformly continuous `g`.
///
/// The argument fixes `delta <= eps/2` with `|g(y) - g(x)| <= eps/2` on
/// `dist(x, y) <= delta`; from then on `f_n + g >= (f_inf + g)_delta - eps/2 - delta`,
/// and `(f_inf + g)_delta >= (f_inf + g)_eps`. So every `n` past the original
/// threshold at `delta` also satisfies the shifted bound at `eps`.
pub fn verify_shift_preservation(
    seq: &FnSequence,
    g: &ExtFn,
    eps: f64,
    modulus: impl Fn(f64) -> f64,
) -> Result<ShiftReport> {
    if !(eps > 0.0) {
        return Err(Error::NonPositive {
            name: "eps",
            value: eps,
        });
    }
    let half = eps / 2.0;
    let mod_delta = modulus(half);
    validate_modulus(g, half, mod_delta)?;
    let delta = mod_delta.min(half);
    let original = check_lower_bound(seq, delta)?;
    let shifted = check_lower_bound(&seq.shifted(g)?, eps)?;
    Ok(ShiftReport {
        eps,
        delta,
        original,
        shifted,
    })
}
