//! Extended-real-valued functions on a finite metric space.
//!
//! Values are finite reals or `+inf`; `-inf` and NaN are rejected at
//! construction. Every function on a finite space is lower semicontinuous, so
//! the constructor only checks properness (some finite value). For functions
//! sampled from a continuum, lower semicontinuity remains an assumption about
//! the original, not something checked here.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::{MetricSpace, PointSet};

#[derive(Debug, Clone)]
pub struct ExtFn {
    space: Arc<MetricSpace>,
    values: Vec<f64>,
    name: Option<String>,
    inf: f64,
}

impl PartialEq for ExtFn {
    fn eq(&self, other: &Self) -> bool {
        same_space(&self.space, &other.space) && self.values == other.values
    }
}

pub(crate) fn same_space(a: &Arc<MetricSpace>, b: &Arc<MetricSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl ExtFn {
    pub fn new(space: Arc<MetricSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::LengthMismatch {
                expected: space.len(),
                got: values.len(),
            });
        }
        let mut inf = f64::INFINITY;
        for (index, &v) in values.iter().enumerate() {
            if v.is_nan() || v == f64::NEG_INFINITY {
                return Err(Error::BadValue { index, value: v });
            }
            inf = inf.min(v);
        }
        if inf == f64::INFINITY {
            return Err(Error::Improper);
        }
        Ok(Self {
            space,
            values,
            name: None,
            inf,
        })
    }

    /// Evaluates `f` at every point index.
    pub fn from_fn(space: Arc<MetricSpace>, f: impl Fn(usize) -> f64) -> Result<Self> {
        let values = (0..space.len()).map(f).collect();
        Self::new(space, values)
    }

    /// Evaluates `f` on the first coordinate of each point.
    pub fn from_coords(space: Arc<MetricSpace>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(space.len());
        for i in 0..space.len() {
            let x = space.coord(i).ok_or_else(|| {
                Error::Format("space has no coordinates to evaluate a formula on".into())
            })?;
            values.push(f(x));
        }
        Self::new(space, values)
    }

    pub fn constant(space: Arc<MetricSpace>, c: f64) -> Result<Self> {
        let n = space.len();
        Self::new(space, vec![c; n])
    }

    /// Indicator of a point set: 0 on `set`, `+inf` elsewhere.
    pub fn indicator(space: Arc<MetricSpace>, set: &PointSet) -> Result<Self> {
        Self::from_fn(space, |i| if set.contains(i) { 0.0 } else { f64::INFINITY })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn space(&self) -> &Arc<MetricSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `inf_X f`, attained on a finite space.
    pub fn inf_value(&self) -> f64 {
        self.inf
    }

    pub fn sup_finite(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest-index point attaining the infimum.
    pub fn argmin(&self) -> usize {
        self.values
            .iter()
            .position(|&v| v == self.inf)
            .expect("proper function attains its infimum")
    }

    /// Points where `f` is finite.
    pub fn domain(&self) -> PointSet {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, _)| i)
            .collect()
    }

    /// Infimal enlargement `f_eps(x) = min { f(y) : dist(y, x) <= eps }`.
    pub fn enlarge(&self, eps: f64) -> Result<ExtFn> {
        if !(eps >= 0.0) {
            return Err(Error::NegativeLevel(eps));
        }
        let space = &self.space;
        let values = (0..space.len())
            .map(|x| {
                space
                    .row(x)
                    .iter()
                    .zip(&self.values)
                    .filter(|(&d, _)| d <= eps)
                    .map(|(_, &v)| v)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let out = ExtFn::new(self.space.clone(), values)?;
        Ok(match &self.name {
            Some(n) => out.with_name(format!("{n}_enlarged({eps})")),
            None => out,
        })
    }

    /// The eps-argmin set `{ x : f(x) <= inf f + eps }`.
    pub fn eps_argmin(&self, eps: f64) -> Result<PointSet> {
        self.eps_argmin_with_slack(eps, 0.0)
    }

    /// As [`ExtFn::eps_argmin`] with an additive comparison slack for inputs
    /// carrying float noise. Slack 0 is the exact closed inequality.
    pub fn eps_argmin_with_slack(&self, eps: f64, slack: f64) -> Result<PointSet> {
        if !(eps >= 0.0) {
            return Err(Error::NegativeLevel(eps));
        }
        if !(slack >= 0.0) {
            return Err(Error::NegativeLevel(slack));
        }
        let threshold = self.inf + eps + slack;
        Ok(self
            .values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v <= threshold)
            .map(|(i, _)| i)
            .collect())
    }

    /// `diam Omega_f(eps)`.
    pub fn argmin_diam(&self, eps: f64) -> Result<f64> {
        Ok(self.space.diam(&self.eps_argmin(eps)?))
    }

    /// Pointwise sum; `+inf` absorbs finite values.
    pub fn add(&self, g: &ExtFn) -> Result<ExtFn> {
        if !same_space(&self.space, &g.space) {
            return Err(Error::SpaceMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&g.values)
            .map(|(a, b)| a + b)
            .collect();
        ExtFn::new(self.space.clone(), values)
    }

    /// `alpha * f` for a finite-valued `f`.
    pub fn scale(&self, alpha: f64) -> Result<ExtFn> {
        self.require_finite()?;
        ExtFn::new(
            self.space.clone(),
            self.values.iter().map(|v| alpha * v).collect(),
        )
    }

    pub fn require_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NotFinite { index }),
            None => Ok(()),
        }
    }
}

/// Outcome of evaluating the sum-argmin inclusion
/// `Omega_f(d) ∩ Omega_g(d) != ∅  ==>  Omega_{f+g}(d) ⊂ Omega_f(3d) ∩ Omega_g(3d)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InclusionReport {
    pub hypothesis_holds: bool,
    pub conclusion_holds: bool,
    /// A point of `Omega_{f+g}(d)` outside `Omega_f(3d) ∩ Omega_g(3d)`, if any.
    pub witness: Option<usize>,
}

impl InclusionReport {
    /// A false conclusion under a true hypothesis contradicts a theorem, so it
    /// points at this library (or at float noise in the inputs), not at the
    /// inputs being unsuitable.
    pub fn is_theorem_violation(&self) -> bool {
        self.hypothesis_holds && !self.conclusion_holds
    }
}

pub fn check_sum_inclusion(f: &ExtFn, g: &ExtFn, delta: f64) -> Result<InclusionReport> {
    if !(delta > 0.0) {
        return Err(Error::NonPositive {
            name: "delta",
            value: delta,
        });
    }
    let sum = f.add(g)?;
    let of = f.eps_argmin(delta)?;
    let og = g.eps_argmin(delta)?;
    let hypothesis_holds = !of.intersection(&og).is_empty();
    let rhs = f
        .eps_argmin(3.0 * delta)?
        .intersection(&g.eps_argmin(3.0 * delta)?);
    let witness = sum.eps_argmin(delta)?.iter().find(|&x| !rhs.contains(x));
    Ok(InclusionReport {
        hypothesis_holds,
        conclusion_holds: witness.is_none(),
        witness,
    })
}
