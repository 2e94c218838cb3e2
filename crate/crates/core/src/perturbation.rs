//! Perturbation spaces: a norm dominating the sup-norm, together with a bump
//! factory that localizes at any center with an explicit `delta(eps)`.
//!
//! [`ConeSpace`] is the bounded-Lipschitz space on a finite metric space with
//! norm `sup|g| + Lip(g)` (so the domination constant is 1). Its bumps are
//! truncated cones `g(y) = min(h, L * dist(y, center))`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{same_space, ExtFn};
use crate::metric::MetricSpace;

/// A space of bounded, uniformly continuous perturbations with a norm that
/// dominates the sup-norm: `sup |g| <= c * norm(g)`.
pub trait PerturbationSpace {
    fn space(&self) -> &Arc<MetricSpace>;

    /// Norm of a finite-valued function.
    fn norm(&self, g: &ExtFn) -> Result<f64>;

    /// The constant `c` in `sup |g| <= c * norm(g)`.
    fn domination_constant(&self) -> f64;

    /// Scheduled `delta` for accuracy `eps`.
    fn delta_schedule(&self, eps: f64) -> f64;

    /// A bump `g` with `norm(g) <= eps`, `center in Omega_g(delta)` and
    /// `diam Omega_g(3 delta) <= eps`, each clause verified on the actual
    /// space before returning. The returned `delta` is the one certified,
    /// which may fall below [`PerturbationSpace::delta_schedule`].
    fn make_bump(&self, center: usize, eps: f64) -> Result<Bump>;
}

/// Parameters that determine a cone bump on a given space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: usize,
    pub eps: f64,
    pub h: f64,
    #[serde(rename = "L")]
    pub slope: f64,
    pub r: f64,
    pub delta: f64,
}

impl BumpSpec {
    pub fn evaluate(&self, space: &Arc<MetricSpace>) -> Result<ExtFn> {
        space.check_index(self.center)?;
        let row = space.row(self.center);
        ExtFn::new(
            space.clone(),
            row.iter().map(|&d| self.h.min(self.slope * d)).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub spec: BumpSpec,
    pub values: ExtFn,
}

/// The three clauses a bump has to satisfy, evaluated on the space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpCheck {
    pub norm: f64,
    pub norm_ok: bool,
    pub center_ok: bool,
    pub diam_3delta: f64,
    pub diam_ok: bool,
}

impl BumpCheck {
    pub fn passed(&self) -> bool {
        self.norm_ok && self.center_ok && self.diam_ok
    }
}

pub fn check_bump(
    p: &dyn PerturbationSpace,
    g: &ExtFn,
    center: usize,
    eps: f64,
    delta: f64,
) -> Result<BumpCheck> {
    let norm = p.norm(g)?;
    let center_ok = g.eps_argmin(delta)?.contains(center);
    let diam_3delta = g.argmin_diam(3.0 * delta)?;
    Ok(BumpCheck {
        norm,
        norm_ok: norm <= eps,
        center_ok,
        diam_3delta,
        diam_ok: diam_3delta <= eps,
    })
}

/// Bounded-Lipschitz functions with norm `sup|g| + Lip(g)`.
#[derive(Debug, Clone)]
pub struct ConeSpace {
    space: Arc<MetricSpace>,
}

/// Localization radius of the cone bumps, in distance units.
pub const CONE_RADIUS: f64 = 0.5;

impl ConeSpace {
    pub fn new(space: Arc<MetricSpace>) -> Result<Self> {
        if space.len() < 2 {
            return Err(Error::SpaceTooSmall);
        }
        Ok(Self { space })
    }

    pub fn sup_norm(g: &ExtFn) -> Result<f64> {
        g.require_finite()?;
        Ok(g.values().iter().fold(0.0, |m, v| m.max(v.abs())))
    }

    /// `max |g(x) - g(y)| / dist(x, y)` over distinct pairs.
    pub fn lipschitz(&self, g: &ExtFn) -> Result<f64> {
        g.require_finite()?;
        let v = g.values();
        let mut lip = 0.0f64;
        for i in 0..v.len() {
            let row = self.space.row(i);
            for j in (i + 1)..v.len() {
                lip = lip.max((v[i] - v[j]).abs() / row[j]);
            }
        }
        Ok(lip)
    }

    /// Largest certified `delta` that works for every center at once.
    pub fn uniform_delta(&self, eps: f64) -> Result<f64> {
        (0..self.space.len()).try_fold(f64::INFINITY, |acc, c| {
            Ok(acc.min(self.make_bump(c, eps)?.spec.delta))
        })
    }
}

impl PerturbationSpace for ConeSpace {
    fn space(&self) -> &Arc<MetricSpace> {
        &self.space
    }

    fn norm(&self, g: &ExtFn) -> Result<f64> {
        if !same_space(g.space(), &self.space) {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self::sup_norm(g)? + self.lipschitz(g)?)
    }

    fn domination_constant(&self) -> f64 {
        1.0
    }

    /// With `h = eps/4` and `L = h / r = eps/2`, the set `Omega_g(3 delta)` is
    /// contained in the ball of radius `3 delta / L` once `3 delta < h`, so its
    /// diameter is at most `12 delta / eps`; `delta = eps^2 / 12` makes that `eps`.
    fn delta_schedule(&self, eps: f64) -> f64 {
        eps * eps / 12.0
    }

    fn make_bump(&self, center: usize, eps: f64) -> Result<Bump> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::NonPositive {
                name: "eps",
                value: eps,
            });
        }
        self.space.check_index(center)?;
        let h = eps / 4.0;
        let mut spec = BumpSpec {
            center,
            eps,
            h,
            slope: h / CONE_RADIUS,
            r: CONE_RADIUS,
            delta: self.delta_schedule(eps),
        };
        let values = spec.evaluate(&self.space)?;
        // The scheduled delta can miss by rounding at the sublevel boundary,
        // and for eps >= 1 the level 3 delta reaches the plateau h. Shrinking
        // delta only shrinks Omega_g(3 delta), so halving terminates once the
        // sublevel set is the center alone.
        while spec.delta > 0.0 {
            let check = check_bump(self, &values, center, eps, spec.delta)?;
            if !check.norm_ok {
                break;
            }
            if check.passed() {
                return Ok(Bump { spec, values });
            }
            spec.delta /= 2.0;
        }
        Err(Error::TooCoarse { center, eps })
    }
}

/// One accumulated term of a [`Perturbation`].
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub spec: Option<BumpSpec>,
    pub values: ExtFn,
    pub norm_bound: f64,
}

/// A sum of bumps with a running upper bound on its norm (the sum of the
/// bounds of the terms, by the triangle inequality).
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    terms: Vec<Term>,
    total: ExtFn,
    norm_bound: f64,
}

impl Perturbation {
    pub fn zero(space: Arc<MetricSpace>) -> Self {
        let total = ExtFn::constant(space, 0.0).expect("zero function is proper");
        Self {
            terms: Vec::new(),
            total,
            norm_bound: 0.0,
        }
    }

    /// Adds a finite-valued bump whose norm is at most `bump_norm`.
    pub fn accumulate(self, bump: ExtFn, bump_norm: f64) -> Result<Self> {
        self.push(None, bump, bump_norm)
    }

    pub fn accumulate_bump(self, bump: Bump) -> Result<Self> {
        let bound = bump.spec.eps;
        self.push(Some(bump.spec), bump.values, bound)
    }

    /// Re-evaluates a recorded bump on this perturbation's space and adds it.
    pub fn accumulate_spec(self, spec: BumpSpec, bump_norm: f64) -> Result<Self> {
        let values = spec.evaluate(self.space())?;
        self.push(Some(spec), values, bump_norm)
    }

    fn push(mut self, spec: Option<BumpSpec>, values: ExtFn, bump_norm: f64) -> Result<Self> {
        if !same_space(values.space(), self.total.space()) {
            return Err(Error::SpaceMismatch);
        }
        values.require_finite()?;
        if !(bump_norm >= 0.0) {
            return Err(Error::NegativeLevel(bump_norm));
        }
        self.total = self.total.add(&values)?;
        self.norm_bound += bump_norm;
        self.terms.push(Term {
            spec,
            values,
            norm_bound: bump_norm,
        });
        Ok(self)
    }

    pub fn total(&self) -> &ExtFn {
        &self.total
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn space(&self) -> &Arc<MetricSpace> {
        self.total.space()
    }
}
