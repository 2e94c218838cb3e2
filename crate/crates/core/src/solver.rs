//! Constructive strong minima by iterated bump addition.
//!
//! [`localize`] repeats the density argument with a geometrically shrinking
//! accuracy: at step `k` it takes `eps_k = budget / 2^(k+1)` and
//! `delta_k = delta(eps_k)`, picks `x_k` in `Omega_{f+g}(delta_k)`, and adds a
//! bump centred at `x_k`. Because `x_k` lies in both `Omega_{f+g}(delta_k)` and
//! `Omega_bump(delta_k)`, the sum-argmin inclusion gives
//! `diam Omega_{f+g+bump}(delta_k) <= diam Omega_bump(3 delta_k) <= eps_k`.
//!
//! [`simultaneous_localize`] runs the same loop for `f_inf, f_1, ..., f_N`
//! against one shared perturbation. A [`MarginLedger`] keeps every earlier
//! localization alive: once `diam Omega_F(3 beta)` is small, any later
//! perturbation `h` with `norm(h) < beta / (2c)` has oscillation below `beta`,
//! so `Omega_h(beta)` is the whole space and `Omega_{F+h}(beta) ⊂ Omega_F(3 beta)`.

use serde::{Deserialize, Serialize};

use crate::convergence::{
    check_lower_bound, check_pointwise, verify_argmin_proximity, verify_inf_convergence,
    ConvergenceReport, FnSequence,
};
use crate::error::{Error, Result};
use crate::functions::ExtFn;
use crate::metric::{MetricSpace, PointSet};
use crate::perturbation::{Bump, Perturbation, PerturbationSpace};

/// Index of a function in a run: 0 is the limit `f_inf` (or the single
/// function of a [`localize`] run), `n >= 1` is the term `f_n`.
pub type FnIndex = usize;

pub const LIMIT: FnIndex = 0;

/// Rule for choosing the bump center inside `Omega_{f+g}(delta)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
    /// Closest point to the previous center; before any center exists, closest
    /// to `anchor` (or the lowest index when there is no anchor).
    NearestPrevious {
        anchor: Option<usize>,
    },
}


impl TieBreak {
    fn pick(&self, space: &MetricSpace, set: &PointSet, previous: Option<usize>) -> usize {
        let first = set.first().expect("eps-argmin sets are nonempty");
        let reference = match self {
            TieBreak::LowestIndex => return first,
            TieBreak::NearestPrevious { anchor } => previous.or(*anchor),
        };
        match reference {
            None => first,
            Some(p) => {
                let row = space.row(p);
                set.iter()
                    .min_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)))
                    .unwrap_or(first)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub t: f64,
    pub diam: f64,
}

/// A minimizer together with measured `diam Omega_f(t)` at decreasing levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongMinCertificate {
    pub minimizer: usize,
    pub levels: Vec<Level>,
    pub final_t: f64,
    pub final_diam: f64,
}

impl StrongMinCertificate {
    /// Measures `f` at the given levels (sorted decreasing, duplicates
    /// dropped); the final level is the smallest.
    pub fn measure(f: &ExtFn, ts: &[f64]) -> Result<Self> {
        let mut ts: Vec<f64> = ts.to_vec();
        ts.sort_by(|a, b| b.total_cmp(a));
        ts.dedup();
        if ts.is_empty() {
            ts.push(0.0);
        }
        let levels = ts
            .iter()
            .map(|&t| {
                Ok(Level {
                    t,
                    diam: f.argmin_diam(t)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let last = *levels.last().expect("at least one level");
        Ok(Self {
            minimizer: f.argmin(),
            levels,
            final_t: last.t,
            final_diam: last.diam,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RecheckFailure {
    Level {
        index: usize,
        recorded: f64,
        recomputed: f64,
    },
    Final {
        recorded: f64,
        recomputed: f64,
    },
    MinimizerOutside {
        minimizer: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecheckReport {
    pub passed: bool,
    pub failure: Option<RecheckFailure>,
}

/// Recomputes every recorded diameter by enumeration. `slack` is the allowed
/// absolute difference (0 for exact comparison).
pub fn recheck_certificate(
    f_plus_g: &ExtFn,
    cert: &StrongMinCertificate,
    slack: f64,
) -> Result<RecheckReport> {
    let fail = |failure| {
        Ok(RecheckReport {
            passed: false,
            failure: Some(failure),
        })
    };
    if cert.minimizer >= f_plus_g.len() {
        return fail(RecheckFailure::MinimizerOutside {
            minimizer: cert.minimizer,
        });
    }
    for (index, level) in cert.levels.iter().enumerate() {
        let recomputed = f_plus_g.argmin_diam(level.t)?;
        if (recomputed - level.diam).abs() > slack {
            return fail(RecheckFailure::Level {
                index,
                recorded: level.diam,
                recomputed,
            });
        }
    }
    let recomputed = f_plus_g.argmin_diam(cert.final_t)?;
    if (recomputed - cert.final_diam).abs() > slack {
        return fail(RecheckFailure::Final {
            recorded: cert.final_diam,
            recomputed,
        });
    }
    if !f_plus_g.eps_argmin(cert.final_t)?.contains(cert.minimizer) {
        return fail(RecheckFailure::MinimizerOutside {
            minimizer: cert.minimizer,
        });
    }
    Ok(RecheckReport {
        passed: true,
        failure: None,
    })
}

/// A localization that later perturbations must not undo: any perturbation of
/// norm below `margin / (2c)` keeps `diam Omega(level_t) <= target_diam`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginEntry {
    pub function: FnIndex,
    pub target_diam: f64,
    #[serde(with = "crate::io::ext_f64")]
    pub level_t: f64,
    #[serde(with = "crate::io::ext_f64")]
    pub margin: f64,
    /// Norm bound already spent by bumps added after this entry.
    pub consumed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginLedger {
    pub domination: f64,
    pub entries: Vec<MarginEntry>,
}

impl MarginLedger {
    pub fn new(domination: f64) -> Self {
        Self {
            domination,
            entries: Vec::new(),
        }
    }

    /// Largest norm bound a new bump may carry: half of the smallest
    /// remaining allowance `margin / (2c) - consumed`.
    pub fn cap(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| (e.margin / (2.0 * self.domination) - e.consumed) / 2.0)
            .fold(f64::INFINITY, f64::min)
    }

    fn consume(&mut self, amount: f64) {
        for e in &mut self.entries {
            e.consumed += amount;
        }
    }

    /// Every entry's allowance is still strictly positive.
    pub fn is_sound(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.consumed < e.margin / (2.0 * self.domination))
    }
}

/// Largest level `beta` (up to a factor) with `diam Omega_f(3 beta) <= tol`,
/// read off the gaps between consecutive values of `f`. Returns
/// `(beta, diam Omega_f(3 beta))`; `beta` is `+inf` when every finite point
/// fits within `tol`.
pub fn stability_margin(f: &ExtFn, tol: f64) -> Result<(f64, f64)> {
    let space = f.space();
    let mut order: Vec<usize> = f.domain().iter().collect();
    order.sort_by(|&a, &b| f.value(a).total_cmp(&f.value(b)).then(a.cmp(&b)));
    let m = f.inf_value();
    let mut taken: Vec<usize> = Vec::with_capacity(order.len());
    let mut diam = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let v = f.value(order[i]);
        let mut j = i;
        while j < order.len() && f.value(order[j]) == v {
            j += 1;
        }
        let mut grown = diam;
        for &p in &order[i..j] {
            let row = space.row(p);
            for &q in &taken {
                grown = grown.max(row[q]);
            }
            taken.push(p);
            for &q in &order[i..j] {
                grown = grown.max(row[q]);
            }
        }
        if grown > tol {
            let beta = (v - m) / 4.0;
            let target = f.argmin_diam(3.0 * beta)?;
            return Ok((beta, target));
        }
        diam = grown;
        i = j;
    }
    Ok((f64::INFINITY, diam))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizeOptions {
    pub budget: f64,
    pub tol: f64,
    pub tie_break: TieBreak,
    pub max_iterations: usize,
}

impl LocalizeOptions {
    pub fn new(budget: f64, tol: f64) -> Self {
        Self {
            budget,
            tol,
            tie_break: TieBreak::default(),
            max_iterations: 200,
        }
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.budget > 0.0) || !self.budget.is_finite() {
            return Err(Error::NonPositive {
                name: "budget",
                value: self.budget,
            });
        }
        if !(self.tol > 0.0) {
            return Err(Error::NonPositive {
                name: "tol",
                value: self.tol,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRow {
    pub function: FnIndex,
    pub iteration: usize,
    pub eps: f64,
    pub delta: f64,
    pub center: usize,
    pub diam_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TranscriptEntry {
    Start {
        budget: f64,
        tol: f64,
        tie_break: TieBreak,
        domination: f64,
    },
    Bump(TranscriptRow),
    Close {
        function: FnIndex,
        localized: bool,
    },
}

/// Append-only log of a solver run; enough to rebuild the perturbation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn bumps(&self) -> impl Iterator<Item = &TranscriptRow> {
        self.entries.iter().filter_map(|e| match e {
            TranscriptEntry::Bump(r) => Some(r),
            _ => None,
        })
    }
}

/// Outcome of localizing one function inside a run.
#[derive(Debug, Clone, PartialEq)]
struct Localized {
    function: FnIndex,
    levels: Vec<f64>,
    margin: f64,
    target_diam: f64,
}

struct Driver<'a> {
    p: &'a dyn PerturbationSpace,
    opts: LocalizeOptions,
    g: Perturbation,
    ledger: MarginLedger,
    previous: Option<usize>,
    transcript: Transcript,
}

impl<'a> Driver<'a> {
    fn new(p: &'a dyn PerturbationSpace, opts: LocalizeOptions) -> Self {
        let domination = p.domination_constant();
        Self {
            p,
            opts,
            g: Perturbation::zero(p.space().clone()),
            ledger: MarginLedger::new(domination),
            previous: None,
            transcript: Transcript {
                entries: vec![TranscriptEntry::Start {
                    budget: opts.budget,
                    tol: opts.tol,
                    tie_break: opts.tie_break,
                    domination,
                }],
            },
        }
    }

    /// Picks a center and a bump whose certified delta covers the level used
    /// for the pick, so that the center lies in both sublevel sets.
    fn choose(&self, current: &ExtFn, eps: f64, scheduled: f64) -> Result<(usize, Bump, f64)> {
        let space = current.space();
        let mut level = scheduled;
        for _ in 0..64 {
            let omega = current.eps_argmin(level)?;
            let center = self.opts.tie_break.pick(space, &omega, self.previous);
            let bump = self.p.make_bump(center, eps)?;
            if bump.spec.delta >= level {
                return Ok((center, bump, level));
            }
            level = bump.spec.delta;
            if current.eps_argmin(level)?.contains(center) {
                return Ok((center, bump, level));
            }
        }
        Err(Error::TooCoarse {
            center: current.argmin(),
            eps,
        })
    }

    fn add_bump(
        &mut self,
        f: &ExtFn,
        function: FnIndex,
        iteration: usize,
        bump: Bump,
        level: f64,
    ) -> Result<f64> {
        let eps = bump.spec.eps;
        let center = bump.spec.center;
        let g = std::mem::replace(&mut self.g, Perturbation::zero(f.space().clone()));
        self.g = g.accumulate_bump(bump)?;
        self.ledger.consume(eps);
        let diam_after = f.add(self.g.total())?.argmin_diam(level)?;
        self.transcript
            .entries
            .push(TranscriptEntry::Bump(TranscriptRow {
                function,
                iteration,
                eps,
                delta: level,
                center,
                diam_after,
            }));
        self.previous = Some(center);
        Ok(diam_after)
    }

    fn localize_one(&mut self, f: &ExtFn, function: FnIndex, budget: f64) -> Result<Localized> {
        let tol = self.opts.tol;
        let mut levels = Vec::new();
        let mut k = 0usize;
        loop {
            if k >= self.opts.max_iterations {
                return Err(Error::NotLocalized { tol, iterations: k });
            }
            let scheduled = budget * 0.5f64.powi(k as i32 + 1);
            let eps = scheduled.min(self.ledger.cap());
            let delta = self.p.delta_schedule(eps);
            if !(eps > 0.0) || !(delta > 0.0) {
                return Err(Error::BudgetExhausted { iteration: k, eps });
            }
            let current = f.add(self.g.total())?;
            let (_, bump, level) = self.choose(&current, eps, delta)?;
            let diam_after = self.add_bump(f, function, k, bump, level)?;
            levels.push(level);
            k += 1;
            if eps <= tol && diam_after <= tol {
                break;
            }
        }
        self.close(f, function, levels)
    }

    fn close(&mut self, f: &ExtFn, function: FnIndex, levels: Vec<f64>) -> Result<Localized> {
        let fin = f.add(self.g.total())?;
        let (margin, target_diam) = stability_margin(&fin, self.opts.tol)?;
        self.ledger.entries.push(MarginEntry {
            function,
            target_diam,
            level_t: margin,
            margin,
            consumed: 0.0,
        });
        self.transcript.entries.push(TranscriptEntry::Close {
            function,
            localized: true,
        });
        Ok(Localized {
            function,
            levels,
            margin,
            target_diam,
        })
    }

    fn mark_failed(&mut self, function: FnIndex) {
        self.transcript.entries.push(TranscriptEntry::Close {
            function,
            localized: false,
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub perturbation: Perturbation,
    pub certificate: StrongMinCertificate,
    /// Stability margin `beta` of the achieved localization.
    pub margin: f64,
    /// `diam Omega_{f+g}(3 beta)`, which stays an upper bound for
    /// `diam Omega(beta)` under later perturbations of norm below `beta / (2c)`.
    pub target_diam: f64,
    pub transcript: Transcript,
}

/// Perturbs `f` by a sum of bumps of total norm at most `budget` so that
/// `f + g` has `diam Omega_{f+g}(t) <= tol` at the final level `t`.
pub fn localize(
    f: &ExtFn,
    p: &dyn PerturbationSpace,
    opts: &LocalizeOptions,
) -> Result<Localization> {
    opts.validate()?;
    let mut driver = Driver::new(p, *opts);
    let out = driver.localize_one(f, LIMIT, opts.budget)?;
    let fin = f.add(driver.g.total())?;
    Ok(Localization {
        certificate: StrongMinCertificate::measure(&fin, &out.levels)?,
        perturbation: driver.g,
        margin: out.margin,
        target_diam: out.target_diam,
        transcript: driver.transcript,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Both convergence conditions hold at every precondition level.
    Conditional,
    /// Some condition fails up to the horizon: every function is still
    /// localized, but convergence of minimizers is not asserted.
    Unconditional,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulOptions {
    pub budget: f64,
    pub tol: f64,
    pub tie_break: TieBreak,
    /// Levels at which the convergence conditions are checked and the
    /// minimizer convergence is tested. Pointwise convergence uses the smallest.
    pub precondition_eps: Vec<f64>,
    pub max_iterations: usize,
}

impl SimulOptions {
    pub fn new(budget: f64, tol: f64) -> Self {
        Self {
            budget,
            tol,
            tie_break: TieBreak::default(),
            precondition_eps: vec![0.5, 0.25, 0.125],
            max_iterations: 200,
        }
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn with_precondition_eps(mut self, eps: Vec<f64>) -> Self {
        self.precondition_eps = eps;
        self
    }

    fn localize_options(&self) -> LocalizeOptions {
        LocalizeOptions {
            budget: self.budget,
            tol: self.tol,
            tie_break: self.tie_break,
            max_iterations: self.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FnResult {
    pub function: FnIndex,
    /// Lowest-index minimizer of `f + g` for the final `g`.
    pub minimizer: usize,
    pub localized: bool,
    /// Measured against the final perturbation; present when localized.
    pub certificate: Option<StrongMinCertificate>,
    #[serde(with = "crate::io::ext_f64::option")]
    pub margin: Option<f64>,
    pub target_diam: Option<f64>,
    /// Localized, final diameter within `tol`, and the margin contract intact.
    pub certified: bool,
}

/// Minimizer convergence tested at the horizon for one accuracy `eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizerCheck {
    pub eps: f64,
    /// Level with `diam Omega_{F_inf}(delta) + delta < eps`.
    pub delta: Option<f64>,
    /// First `n` past which near-minimizers of `F_n` are provably close to
    /// `Omega_{F_inf}(delta)`; `None` if that cannot be certified up to the horizon.
    pub threshold: Option<usize>,
    /// `dist(x_n, x_inf) < eps` for every `n >= threshold`.
    pub holds: Option<bool>,
    /// Threshold for `|inf F_n - inf F_inf| <= 2 eps`.
    pub value_threshold: Option<usize>,
    pub value_holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulReport {
    pub mode: Mode,
    pub preconditions: Vec<ConvergenceReport>,
    pub unlocalized: Vec<FnIndex>,
    /// `dist(x_n, x_inf)` for `n = 1..=N`.
    pub dist_trajectory: Vec<f64>,
    /// `f_n(x_n)` for `n = 1..=N`.
    pub value_trajectory: Vec<f64>,
    pub limit_value: f64,
    /// `|(f_n + g)(x_n) - (f_inf + g)(x_inf)|` for `n = 1..=N`.
    pub perturbed_gap: Vec<f64>,
    pub checks: Vec<MinimizerCheck>,
    /// `None` in unconditional mode; otherwise whether every check holds.
    pub conclusion: Option<bool>,
    /// Smallest and largest `dist(x_n, x_inf)` over the second half of the horizon.
    pub tail_min_dist: f64,
    pub tail_max_dist: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulResult {
    pub perturbation: Perturbation,
    pub limit: FnResult,
    /// Results for `f_1, ..., f_N`.
    pub terms: Vec<FnResult>,
    pub ledger: MarginLedger,
    pub transcript: Transcript,
    pub report: SimulReport,
}

impl SimulResult {
    /// Certificates in processing order (`f_inf` first), `None` for functions
    /// that were not localized.
    pub fn certificates(&self) -> Vec<(FnIndex, Option<&StrongMinCertificate>)> {
        std::iter::once(&self.limit)
            .chain(&self.terms)
            .map(|r| (r.function, r.certificate.as_ref()))
            .collect()
    }

    pub fn minimizers(&self) -> Vec<usize> {
        self.terms.iter().map(|r| r.minimizer).collect()
    }
}

fn function_of(seq: &FnSequence, i: FnIndex) -> &ExtFn {
    if i == LIMIT {
        seq.limit()
    } else {
        seq.term(i)
    }
}

fn preconditions(seq: &FnSequence, opts: &SimulOptions) -> Result<(Mode, Vec<ConvergenceReport>)> {
    let mut reports = Vec::new();
    let mut levels = opts.precondition_eps.clone();
    levels.retain(|e| *e > 0.0);
    if let Some(tol) = levels.iter().copied().reduce(f64::min) {
        reports.push(check_pointwise(seq, tol)?);
    }
    for &eps in &levels {
        reports.push(check_lower_bound(seq, eps)?);
    }
    let mode = if !reports.is_empty() && reports.iter().all(ConvergenceReport::passed) {
        Mode::Conditional
    } else {
        Mode::Unconditional
    };
    Ok((mode, reports))
}

/// Localizes `f_inf, f_1, ..., f_N` (in that order) with one shared
/// perturbation of total norm at most `budget`.
///
/// Function number `i` in processing order gets budget share
/// `budget / 2^(i+1)`, further capped by the margin ledger. A function whose
/// localization runs out of room is listed in `report.unlocalized`; the
/// others remain certified.
pub fn simultaneous_localize(
    seq: &FnSequence,
    p: &dyn PerturbationSpace,
    opts: &SimulOptions,
) -> Result<SimulResult> {
    let lopts = opts.localize_options();
    lopts.validate()?;
    let mut driver = Driver::new(p, lopts);
    let mut outcomes: Vec<Option<Localized>> = Vec::with_capacity(seq.horizon() + 1);
    for i in 0..=seq.horizon() {
        let share = opts.budget * 0.5f64.powi(i as i32 + 1);
        match driver.localize_one(function_of(seq, i), i, share) {
            Ok(out) => outcomes.push(Some(out)),
            Err(Error::BudgetExhausted { .. }) | Err(Error::NotLocalized { .. }) => {
                driver.mark_failed(i);
                outcomes.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    assemble(seq, opts, driver, outcomes)
}

/// Rebuilds a simultaneous run from its transcript, re-deriving every bump,
/// margin and certificate. Fails if the transcript disagrees with what the
/// rebuilt run measures.
pub fn replay_simultaneous(
    seq: &FnSequence,
    p: &dyn PerturbationSpace,
    opts: &SimulOptions,
    transcript: &Transcript,
) -> Result<SimulResult> {
    let lopts = opts.localize_options();
    lopts.validate()?;
    let mut driver = Driver::new(p, lopts);
    let outcomes = replay_into(&mut driver, transcript, |i| {
        (i <= seq.horizon()).then(|| function_of(seq, i))
    })?;
    let mut by_index: Vec<Option<Localized>> = vec![None; seq.horizon() + 1];
    for out in outcomes.into_iter().flatten() {
        let idx = out.function;
        by_index[idx] = Some(out);
    }
    assemble(seq, opts, driver, by_index)
}

/// Rebuilds a single-function [`localize`] run from its transcript.
pub fn replay_localize(
    f: &ExtFn,
    p: &dyn PerturbationSpace,
    opts: &LocalizeOptions,
    transcript: &Transcript,
) -> Result<Localization> {
    opts.validate()?;
    let mut driver = Driver::new(p, *opts);
    let outcomes = replay_into(&mut driver, transcript, |i| (i == LIMIT).then_some(f))?;
    let out = outcomes
        .into_iter()
        .flatten()
        .next()
        .ok_or_else(|| Error::ReplayMismatch {
            row: 0,
            reason: "transcript never closes the function".into(),
        })?;
    let fin = f.add(driver.g.total())?;
    Ok(Localization {
        certificate: StrongMinCertificate::measure(&fin, &out.levels)?,
        perturbation: driver.g,
        margin: out.margin,
        target_diam: out.target_diam,
        transcript: driver.transcript,
    })
}

fn replay_into<'f>(
    driver: &mut Driver<'_>,
    transcript: &Transcript,
    lookup: impl Fn(FnIndex) -> Option<&'f ExtFn>,
) -> Result<Vec<Option<Localized>>> {
    let mismatch = |row: usize, reason: String| Error::ReplayMismatch { row, reason };
    let mut outcomes = Vec::new();
    let mut levels: Vec<f64> = Vec::new();
    for (row, entry) in transcript.entries.iter().enumerate() {
        match entry {
            TranscriptEntry::Start {
                budget,
                tol,
                tie_break,
                domination,
            } => {
                let o = &driver.opts;
                if row != 0
                    || *budget != o.budget
                    || *tol != o.tol
                    || *tie_break != o.tie_break
                    || *domination != driver.ledger.domination
                {
                    return Err(mismatch(row, "run parameters differ".into()));
                }
            }
            TranscriptEntry::Bump(r) => {
                let f = lookup(r.function)
                    .ok_or_else(|| mismatch(row, format!("unknown function {}", r.function)))?;
                if r.eps > driver.ledger.cap() {
                    return Err(mismatch(row, "bump exceeds the margin ledger".into()));
                }
                let current = f.add(driver.g.total())?;
                if !current.eps_argmin(r.delta)?.contains(r.center) {
                    return Err(mismatch(row, "center outside the eps-argmin set".into()));
                }
                let bump = driver.p.make_bump(r.center, r.eps)?;
                if bump.spec.delta < r.delta {
                    return Err(mismatch(
                        row,
                        "bump does not certify the recorded level".into(),
                    ));
                }
                let diam = driver.add_bump(f, r.function, r.iteration, bump, r.delta)?;
                if diam != r.diam_after {
                    return Err(mismatch(
                        row,
                        format!("diameter {diam} differs from recorded {}", r.diam_after),
                    ));
                }
                levels.push(r.delta);
            }
            TranscriptEntry::Close {
                function,
                localized,
            } => {
                let f = lookup(*function)
                    .ok_or_else(|| mismatch(row, format!("unknown function {function}")))?;
                let taken = std::mem::take(&mut levels);
                if *localized {
                    outcomes.push(Some(driver.close(f, *function, taken)?));
                } else {
                    driver.mark_failed(*function);
                    outcomes.push(None);
                }
            }
        }
    }
    if driver.transcript != *transcript {
        return Err(mismatch(
            transcript.entries.len(),
            "rebuilt transcript differs".into(),
        ));
    }
    Ok(outcomes)
}

fn fn_result(f: &ExtFn, g: &ExtFn, out: Option<&Localized>, tol: f64) -> Result<FnResult> {
    let fin = f.add(g)?;
    let minimizer = fin.argmin();
    let Some(out) = out else {
        return Ok(FnResult {
            function: LIMIT,
            minimizer,
            localized: false,
            certificate: None,
            margin: None,
            target_diam: None,
            certified: false,
        });
    };
    let mut ts = out.levels.clone();
    if out.margin.is_finite() {
        ts.push(out.margin);
    }
    let cert = StrongMinCertificate::measure(&fin, &ts)?;
    let contract = !out.margin.is_finite() || fin.argmin_diam(out.margin)? <= out.target_diam;
    Ok(FnResult {
        function: out.function,
        minimizer,
        localized: true,
        certified: contract && cert.final_diam <= tol,
        certificate: Some(cert),
        margin: Some(out.margin),
        target_diam: Some(out.target_diam),
    })
}

fn assemble(
    seq: &FnSequence,
    opts: &SimulOptions,
    driver: Driver<'_>,
    outcomes: Vec<Option<Localized>>,
) -> Result<SimulResult> {
    let g = driver.g.total().clone();
    let mut results = Vec::with_capacity(outcomes.len());
    for (i, out) in outcomes.iter().enumerate() {
        let mut r = fn_result(function_of(seq, i), &g, out.as_ref(), opts.tol)?;
        r.function = i;
        results.push(r);
    }
    let limit = results.remove(0);
    let terms = results;

    let (mode, pre) = preconditions(seq, opts)?;
    let space = seq.limit().space();
    let x_inf = limit.minimizer;
    let limit_value = seq.limit().value(x_inf);
    let perturbed_limit = limit_value + g.value(x_inf);
    let dist_trajectory: Vec<f64> = terms
        .iter()
        .map(|r| space.dist(r.minimizer, x_inf))
        .collect();
    let value_trajectory: Vec<f64> = terms
        .iter()
        .enumerate()
        .map(|(k, r)| seq.term(k + 1).value(r.minimizer))
        .collect();
    let perturbed_gap: Vec<f64> = terms
        .iter()
        .zip(&value_trajectory)
        .map(|(r, &v)| (v + g.value(r.minimizer) - perturbed_limit).abs())
        .collect();

    let shifted = seq.shifted(&g)?;
    let mut checks = Vec::new();
    for &eps in opts.precondition_eps.iter().filter(|e| **e > 0.0) {
        checks.push(minimizer_check(
            &shifted,
            eps,
            &dist_trajectory,
            &perturbed_gap,
        )?);
    }
    let conclusion = match mode {
        Mode::Unconditional => None,
        Mode::Conditional => Some(
            checks
                .iter()
                .all(|c| c.holds != Some(false) && c.value_holds != Some(false)),
        ),
    };
    let half = dist_trajectory.len() / 2;
    let tail = &dist_trajectory[half..];
    let report = SimulReport {
        mode,
        preconditions: pre,
        unlocalized: std::iter::once(&limit)
            .chain(&terms)
            .filter(|r| !r.localized)
            .map(|r| r.function)
            .collect(),
        dist_trajectory: dist_trajectory.clone(),
        value_trajectory,
        limit_value,
        perturbed_gap,
        checks,
        conclusion,
        tail_min_dist: tail.iter().copied().fold(f64::INFINITY, f64::min),
        tail_max_dist: tail.iter().copied().fold(0.0, f64::max),
    };
    Ok(SimulResult {
        perturbation: driver.g,
        limit,
        terms,
        ledger: driver.ledger,
        transcript: driver.transcript,
        report,
    })
}

/// Minimizer convergence for the perturbed sequence `F_n = f_n + g`.
///
/// Choose `delta` with `diam Omega_{F_inf}(delta) + delta < eps`. Past the
/// proximity threshold at `delta`, every minimizer `x_n` lies within `delta/2`
/// of `Omega_{F_inf}(delta)`, which contains `x_inf`, so `dist(x_n, x_inf) < eps`.
fn minimizer_check(
    shifted: &FnSequence,
    eps: f64,
    dist_trajectory: &[f64],
    perturbed_gap: &[f64],
) -> Result<MinimizerCheck> {
    let limit = shifted.limit();
    let mut delta = None;
    let mut d = eps / 2.0;
    for _ in 0..60 {
        if limit.argmin_diam(d)? + d < eps {
            delta = Some(d);
            break;
        }
        d /= 2.0;
    }
    let (threshold, holds) = match delta {
        Some(d) => {
            let prox = verify_argmin_proximity(shifted, d)?;
            match prox.threshold {
                Some(n0) => (
                    Some(n0),
                    Some(dist_trajectory[n0 - 1..].iter().all(|&x| x < eps)),
                ),
                None => (None, None),
            }
        }
        None => (None, None),
    };
    let inf = verify_inf_convergence(shifted, eps)?;
    let (value_threshold, value_holds) = match inf.threshold {
        Some(n0) => (
            Some(n0),
            Some(perturbed_gap[n0 - 1..].iter().all(|&x| x <= 2.0 * eps)),
        ),
        None => (None, None),
    };
    Ok(MinimizerCheck {
        eps,
        delta,
        threshold,
        holds,
        value_threshold,
        value_holds,
    })
}
