//! Acceptance suite: one PASS/FAIL line per criterion. Runs every criterion
//! even after a failure and exits nonzero if any failed.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;

use rand::Rng;

use common::*;
use strongmin::convergence::{check_lower_bound, check_pointwise, verify_shift_preservation};
use strongmin::functions::check_sum_inclusion;
use strongmin::gallery::{scenario_cone, scenario_indicator, scenario_uniform, Profile};
use strongmin::io;
use strongmin::solver::{
    localize, recheck_certificate, replay_simultaneous, simultaneous_localize, Mode,
};
use strongmin::{
    build_grid_1d, ConeSpace, Error, FnSequence, LocalizeOptions, MetricSpace, PerturbationSpace,
    SimulOptions,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

// ---------------------------------------------------------------------------

fn enlargement_inf_and_inclusion() -> Verdict {
    let mut rng = rng(0x5eed_0001);
    let (mut inf_bad, mut value_bad, mut incl_checks, mut incl_bad) = (0, 0, 0, 0);
    for _ in 0..1000 {
        let space = random_space(&mut rng, 200);
        let n = space.len();
        let v = flat_values(&mut rng, n, 0.2);
        let f = ext(&space, v.clone());
        // Radii at an actual pairwise distance hit the closed-ball boundary.
        let delta = if rng.gen_bool(0.5) {
            dist(&space, rng.gen_range(0..n), rng.gen_range(0..n))
        } else {
            dyadic(&mut rng, 0, 64, 16.0)
        };
        let fd = f.enlarge(delta).unwrap();
        let oracle = enlarge_bf(&space, &v, delta);
        if fd.values() != oracle.as_slice() {
            value_bad += 1;
        }
        if min_of(&oracle) != min_of(&v) || fd.inf_value() != f.inf_value() {
            inf_bad += 1;
        }
        for _ in 0..5 {
            let eps = dyadic(&mut rng, 1, 64, 16.0);
            let mu = eps * rng.gen_range(1..8) as f64 / 8.0;
            let near_f = argmin_bf(&v, eps);
            let set = fd.eps_argmin(mu).unwrap();
            if set.as_slice() != argmin_bf(&oracle, mu).as_slice() {
                incl_bad += 1;
            }
            for x in set.iter() {
                incl_checks += 1;
                if dist_to_set_bf(&space, x, &near_f) > delta {
                    incl_bad += 1;
                }
            }
        }
    }
    verdict(
        inf_bad + value_bad + incl_bad == 0,
        format!(
            "1000 instances; inf mismatches {inf_bad}, enlargement mismatches {value_bad}, \
             inclusion violations {incl_bad} of {incl_checks} points"
        ),
    )
}

fn sum_inclusion_trials() -> Verdict {
    let mut rng = rng(0x5eed_0002);
    let (mut held, mut drawn, mut violations, mut disagreements) = (0usize, 0usize, 0, 0);
    while held < 10_000 {
        drawn += 1;
        let n = rng.gen_range(2..=60);
        let space = build_grid_1d(0.0, 1.0, n).unwrap().into_shared();
        let fv = flat_values(&mut rng, n, 0.1);
        let gv = flat_values(&mut rng, n, 0.1);
        let delta = [1.0 / 32.0, 1.0 / 16.0, 0.125, 0.25, 0.5, 1.0][rng.gen_range(0..6)];
        let of = argmin_bf(&fv, delta);
        let og = argmin_bf(&gv, delta);
        if !of.iter().any(|x| og.contains(x)) {
            continue;
        }
        held += 1;
        let lhs = argmin_bf(&sum_bf(&fv, &gv), delta);
        let f3 = argmin_bf(&fv, 3.0 * delta);
        let g3 = argmin_bf(&gv, 3.0 * delta);
        let ok = lhs.iter().all(|x| f3.contains(x) && g3.contains(x));
        if !ok {
            violations += 1;
        }
        let report = check_sum_inclusion(&ext(&space, fv), &ext(&space, gv), delta).unwrap();
        if !report.hypothesis_holds || report.conclusion_holds != ok {
            disagreements += 1;
        }
    }
    verdict(
        violations == 0 && disagreements == 0,
        format!(
            "{held} triples with the hypothesis ({drawn} drawn); violations {violations}, \
             checker disagreements {disagreements}"
        ),
    )
}

fn bump_factory_clauses() -> Verdict {
    let mut rng = rng(0x5eed_0003);
    let (mut emitted, mut coarse, mut bad, mut other) = (0, 0, 0, 0);
    for _ in 0..1000 {
        let m = rng.gen_range(101..=1001);
        let a = dyadic(&mut rng, -40, 40, 4.0);
        let len = rng.gen_range(0.25..25.0);
        let space = build_grid_1d(a, a + len, m).unwrap().into_shared();
        let cone = ConeSpace::new(space.clone()).unwrap();
        let center = rng.gen_range(0..m);
        let eps = (rng.gen_range((1e-3f64).ln()..(4.0f64).ln())).exp();
        match cone.make_bump(center, eps) {
            Ok(b) => {
                emitted += 1;
                let g = b.values.values();
                let delta = b.spec.delta;
                let norm = cone_norm_bf(&space, g);
                let norm_ok = norm <= eps;
                let center_ok = argmin_bf(g, delta).contains(&center);
                let diam_ok = diam_bf(&space, &argmin_bf(g, 3.0 * delta)) <= eps;
                let dominated = g.iter().all(|v| v.abs() <= norm);
                if !(delta > 0.0 && norm_ok && center_ok && diam_ok && dominated) {
                    bad += 1;
                }
            }
            Err(Error::TooCoarse { .. }) => coarse += 1,
            Err(_) => other += 1,
        }
    }
    verdict(
        bad == 0 && other == 0,
        format!("{emitted} bumps verified, {coarse} coarseness errors, {bad} clause failures, {other} other errors"),
    )
}

/// A random space whose points are at least 1e-3 apart, with a random
/// function carrying flat regions and `+inf` values.
fn localization_instance(rng: &mut impl Rng) -> (Arc<MetricSpace>, Vec<f64>) {
    let space = random_space(rng, 150);
    let v = flat_values(rng, space.len(), 0.2);
    (space, v)
}

fn localize_budget_and_certificates() -> Verdict {
    let mut rng = rng(0x5eed_0004);
    let opts = LocalizeOptions::new(0.3, 1e-3);
    let mut failures: Vec<String> = Vec::new();
    let mut singletons = 0;
    for trial in 0..100 {
        let (space, v) = localization_instance(&mut rng);
        let cone = ConeSpace::new(space.clone()).unwrap();
        let f = ext(&space, v.clone());
        let loc = match localize(&f, &cone, &opts) {
            Ok(l) => l,
            Err(e) => {
                failures.push(format!("trial {trial}: {e}"));
                continue;
            }
        };
        let g = loc.perturbation.total().values().to_vec();
        let total = sum_bf(&v, &g);
        let cert = &loc.certificate;
        let mut problems = Vec::new();
        if loc.perturbation.norm_bound() > 0.3 {
            problems.push("norm bound above budget");
        }
        if cone_norm_bf(&space, &g) > loc.perturbation.norm_bound() {
            problems.push("measured norm above the bound");
        }
        let fg = ext(&space, total.clone());
        if !recheck_certificate(&fg, cert, 0.0).unwrap().passed {
            problems.push("recheck failed");
        }
        if cert
            .levels
            .iter()
            .any(|l| diam_bf(&space, &argmin_bf(&total, l.t)) != l.diam)
        {
            problems.push("oracle diameter differs");
        }
        if cert.final_diam > 1e-3 {
            problems.push("final diameter above tol");
        }
        let last = argmin_bf(&total, cert.final_t);
        if !last.contains(&cert.minimizer) {
            problems.push("minimizer outside the final level set");
        }
        if space.min_separation() > 1e-3 {
            if last == vec![cert.minimizer] {
                singletons += 1;
            } else {
                problems.push("final level set not a singleton");
            }
        }
        if !problems.is_empty() {
            failures.push(format!("trial {trial}: {}", problems.join(", ")));
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "100 functions, {singletons} singleton final sets, failures: {}",
            if failures.is_empty() {
                "none".into()
            } else {
                failures.join("; ")
            }
        ),
    )
}

/// Random finite function with `norm` equal to `target` under the cone norm.
fn scaled(space: &MetricSpace, raw: Vec<f64>, target: f64) -> Vec<f64> {
    let norm = cone_norm_bf(space, &raw);
    if norm == 0.0 {
        return raw;
    }
    raw.iter().map(|v| v * (target / norm)).collect()
}

fn random_perturbation(rng: &mut impl Rng, space: &MetricSpace, target: f64) -> Vec<f64> {
    let n = space.len();
    let raw: Vec<f64> = if rng.gen_bool(0.5) {
        let c = rng.gen_range(0..n);
        let h = rng.gen_range(0.01..1.0);
        let slope = rng.gen_range(0.01..4.0);
        (0..n)
            .map(|y| f64::min(h, slope * dist(space, c, y)))
            .collect()
    } else {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };
    scaled(space, raw, target)
}

fn margin_contract() -> Verdict {
    let mut rng = rng(0x5eed_0005);
    let opts = LocalizeOptions::new(0.3, 1e-3);
    let (mut injections, mut violations, mut trivial, mut errors) = (0, 0, 0, 0);
    for _ in 0..100 {
        let (space, v) = localization_instance(&mut rng);
        let cone = ConeSpace::new(space.clone()).unwrap();
        let Ok(loc) = localize(&ext(&space, v.clone()), &cone, &opts) else {
            errors += 1;
            continue;
        };
        let beta = loc.margin;
        if !beta.is_finite() {
            // A single finite point: nothing can move.
            trivial += 1;
            continue;
        }
        let fg = sum_bf(&v, loc.perturbation.total().values());
        let outer = argmin_bf(&fg, 3.0 * beta);
        if diam_bf(&space, &outer) != loc.target_diam {
            violations += 1;
        }
        let allowance = beta / (2.0 * cone.domination_constant());
        let mut check = |h: &[f64]| {
            injections += 1;
            let inner = argmin_bf(&sum_bf(&fg, h), beta);
            let ok = cone_norm_bf(&space, h) < allowance
                && inner.iter().all(|x| outer.contains(x))
                && diam_bf(&space, &inner) <= loc.target_diam;
            if !ok {
                violations += 1;
            }
        };
        for _ in 0..10 {
            let u = rng.gen_range(0.05..0.95);
            let h = random_perturbation(&mut rng, &space, u * allowance);
            check(&h);
        }
        // Ten bumps together, their total norm below the allowance.
        let mut sum = vec![0.0; space.len()];
        for _ in 0..10 {
            let u = rng.gen_range(0.05..0.95);
            let h = random_perturbation(&mut rng, &space, u * allowance / 10.0);
            sum = sum_bf(&sum, &h);
        }
        check(&sum);
    }
    verdict(
        violations == 0 && errors == 0,
        format!(
            "{injections} sub-margin injections, {violations} violations, \
             {trivial} single-point domains, {errors} localization errors"
        ),
    )
}

fn indicator_scenario() -> Verdict {
    let sc = scenario_indicator(257, 64).unwrap();
    let space = sc.space().clone();
    let eps = 0.125;
    let expected = (1.0f64 / eps).ceil() as usize;
    let lower = check_lower_bound(&sc.seq, eps).unwrap();
    let pointwise = check_pointwise(&sc.seq, eps).unwrap();
    let terms: Vec<Vec<f64>> = sc.seq.terms().iter().map(|t| t.values().to_vec()).collect();
    let limit = sc.seq.limit().values().to_vec();
    let lower_bf = lower_bound_threshold_bf(&space, &terms, &limit, eps);
    let pointwise_bf = pointwise_threshold_bf(&terms, &limit, eps);
    let conditions_ok = lower.first_valid_n == Some(expected)
        && pointwise.first_valid_n == Some(expected)
        && lower.first_valid_n == lower_bf
        && pointwise.first_valid_n == pointwise_bf;

    let cone = ConeSpace::new(space.clone()).unwrap();
    let opts = SimulOptions::new(0.4, 0.02).with_tie_break(sc.defaults.tie_break);
    let res = simultaneous_localize(&sc.seq, &cone, &opts).unwrap();
    let g = res.perturbation.total().values().to_vec();
    let x_inf = res.limit.minimizer;
    let limit_ok = space.coord(x_inf) == Some(0.0);
    let mut dist_ok = true;
    let mut gaps = Vec::new();
    for (k, t) in res.terms.iter().enumerate() {
        let n = k + 1;
        // The reported minimizer must minimize f_n + g by enumeration.
        let fg = sum_bf(&terms[k], &g);
        dist_ok &= fg[t.minimizer] == min_of(&fg);
        dist_ok &= dist(&space, t.minimizer, x_inf) <= 1.0 / n as f64 + 0.02;
        gaps.push((terms[k][t.minimizer] - limit[x_inf]).abs());
    }
    let tail_gap = gaps[gaps.len() * 3 / 4..]
        .iter()
        .fold(0.0f64, |m, v| m.max(*v));
    let values_ok = tail_gap <= 0.02;
    let pass = conditions_ok && limit_ok && dist_ok && values_ok;
    verdict(
        pass,
        format!(
            "lower bound N'={} (oracle {:?}); {} (oracle {:?}), expected {expected} for both; \
             mode {:?}; x_inf at 0: {limit_ok}; dist(x_n, x_inf) <= 1/n + 0.02: {dist_ok}; \
             tail |f_n(x_n) - f_inf(x_inf)| = {tail_gap}",
            lower.first_valid_n.map_or("none".into(), |n| n.to_string()),
            lower_bf,
            pointwise.summary(),
            pointwise_bf,
            res.report.mode,
        ),
    )
}

fn cone_scenario() -> Verdict {
    let sc = scenario_cone(10.0, 401, 50).unwrap();
    let space = sc.space().clone();
    let eps = 0.5;
    let terms: Vec<Vec<f64>> = sc.seq.terms().iter().map(|t| t.values().to_vec()).collect();
    let limit = sc.seq.limit().values().to_vec();
    let lower = check_lower_bound(&sc.seq, eps).unwrap();
    let lower_bf = lower_bound_threshold_bf(&space, &terms, &limit, eps);
    let lower_ok = lower.first_valid_n == Some(20) && lower_bf == Some(20);
    let infs_ok = (1..=10).all(|n| min_of(&terms[n - 1]) == -1.0) && min_of(&limit) == 0.0;

    let cone = ConeSpace::new(space.clone()).unwrap();
    let opts = SimulOptions::new(sc.defaults.budget, sc.defaults.solver_tol)
        .with_tie_break(sc.defaults.tie_break);
    let res = simultaneous_localize(&sc.seq, &cone, &opts).unwrap();
    let g = res.perturbation.total().values().to_vec();
    let x_inf = res.limit.minimizer;
    let dists: Vec<f64> = res
        .terms
        .iter()
        .map(|t| dist(&space, t.minimizer, x_inf))
        .collect();
    let minimizers_ok = res.terms.iter().enumerate().all(|(k, t)| {
        let fg = sum_bf(&terms[k], &g);
        fg[t.minimizer] == min_of(&fg)
    });
    let closest = dists.iter().copied().fold(INF, f64::min);
    let diverges = res.report.mode == Mode::Unconditional && closest > eps && minimizers_ok;
    verdict(
        lower_ok && infs_ok && diverges,
        format!(
            "lower bound N'={:?} (oracle {:?}, expected 20); inf f_n = -1 for n <= 10 and inf f_inf = 0: \
             {infs_ok}; mode {:?}; min over n of dist(x_n, x_inf) = {closest}; last = {}; \
             {} of 50 terms localized before the ledger ran out",
            lower.first_valid_n,
            lower_bf,
            res.report.mode,
            dists.last().unwrap(),
            res.terms.iter().filter(|t| t.localized).count(),
        ),
    )
}

/// `min_j (a_j + L * dist(x, c_j))`: `L`-Lipschitz, so `t -> t / L` is a modulus.
fn lipschitz_shift(rng: &mut impl Rng, space: &Arc<MetricSpace>, slope: f64) -> Vec<f64> {
    let n = space.len();
    let cones: Vec<(usize, f64)> = (0..rng.gen_range(1..=3))
        .map(|_| (rng.gen_range(0..n), dyadic(rng, -16, 16, 16.0)))
        .collect();
    (0..n)
        .map(|x| {
            cones
                .iter()
                .map(|&(c, a)| a + slope * dist(space, x, c))
                .fold(INF, f64::min)
        })
        .collect()
}

/// A random sequence converging to `limit`: either a uniform perturbation
/// shrinking like `1/n`, or `limit` read at a point shifted by at most `1/n`.
fn random_sequence(rng: &mut impl Rng, limit: &[f64], horizon: usize) -> Vec<Vec<f64>> {
    let n_pts = limit.len();
    let shifted = rng.gen_bool(0.5);
    (1..=horizon)
        .map(|n| {
            let scale = 0.5f64.powi((n as f64).log2().ceil() as i32);
            if shifted {
                let steps = ((32.0 / n as f64).floor() as i64).max(0);
                let s = if steps == 0 {
                    0
                } else {
                    rng.gen_range(-steps..=steps)
                };
                (0..n_pts)
                    .map(|x| limit[(x as i64 + s).clamp(0, n_pts as i64 - 1) as usize])
                    .collect()
            } else {
                limit
                    .iter()
                    .map(|&v| {
                        if v.is_finite() {
                            v + scale * dyadic(rng, -4, 4, 4.0)
                        } else {
                            INF
                        }
                    })
                    .collect()
            }
        })
        .collect()
}

fn shift_preservation() -> Verdict {
    let mut rng = rng(0x5eed_0008);
    let space = build_grid_1d(-1.0, 1.0, 65).unwrap().into_shared();
    let horizon = 80;
    let (mut compared, mut skipped, mut violations, mut disagreements, mut errors) =
        (0, 0, 0, 0, 0);
    let mut sequences = 0;
    while sequences < 200 {
        let limit = flat_values(&mut rng, space.len(), 0.1);
        let terms = random_sequence(&mut rng, &limit, horizon);
        let all_pass = [0.5, 0.25, 0.125, 0.0625]
            .iter()
            .all(|&e| lower_bound_threshold_bf(&space, &terms, &limit, e).is_some());
        if !all_pass {
            continue;
        }
        sequences += 1;
        let seq = FnSequence::new(
            terms.iter().map(|t| ext(&space, t.clone())).collect(),
            ext(&space, limit.clone()),
        )
        .unwrap();
        let slope = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
        let gv = lipschitz_shift(&mut rng, &space, slope);
        let g = ext(&space, gv.clone());
        for eps in [0.5, 0.25, 0.125, 0.0625] {
            let report = match verify_shift_preservation(&seq, &g, eps, |t| t / slope) {
                Ok(r) => r,
                Err(_) => {
                    errors += 1;
                    continue;
                }
            };
            let orig_bf = lower_bound_threshold_bf(&space, &terms, &limit, report.delta);
            let shifted_terms: Vec<Vec<f64>> = terms.iter().map(|t| sum_bf(t, &gv)).collect();
            let shifted_bf =
                lower_bound_threshold_bf(&space, &shifted_terms, &sum_bf(&limit, &gv), eps);
            if report.original.first_valid_n != orig_bf
                || report.shifted.first_valid_n != shifted_bf
            {
                disagreements += 1;
            }
            match orig_bf {
                None => skipped += 1,
                Some(o) => {
                    compared += 1;
                    if !matches!(shifted_bf, Some(s) if s <= o) {
                        violations += 1;
                    }
                }
            }
        }
    }
    verdict(
        violations == 0 && disagreements == 0 && errors == 0,
        format!(
            "200 sequences x 4 eps: {compared} compared, {skipped} without an original threshold, \
             {violations} violations, {disagreements} checker disagreements, {errors} modulus errors"
        ),
    )
}

fn replay_case(name: &str, seq: &FnSequence, opts: &SimulOptions) -> Result<(), String> {
    let space = seq.limit().space().clone();
    let cone = ConeSpace::new(space.clone()).map_err(|e| e.to_string())?;
    let run = simultaneous_localize(seq, &cone, opts).map_err(|e| format!("{name}: {e}"))?;
    let texts = |r: &strongmin::solver::SimulResult| -> Result<(String, String), String> {
        Ok((
            io::perturbation_to_text(&r.perturbation, "space.txt").map_err(|e| e.to_string())?,
            io::certificates_to_text(&r.certificates()).map_err(|e| e.to_string())?,
        ))
    };
    let (pert, certs) = texts(&run)?;
    let saved = io::transcript_to_text(&run.transcript).map_err(|e| e.to_string())?;
    let parsed = io::transcript_from_text(&saved).map_err(|e| e.to_string())?;
    let replayed = replay_simultaneous(seq, &cone, opts, &parsed)
        .map_err(|e| format!("{name}: replay: {e}"))?;
    let (pert2, certs2) = texts(&replayed)?;
    if pert != pert2 {
        return Err(format!("{name}: perturbation text differs after replay"));
    }
    if certs != certs2 {
        return Err(format!("{name}: certificate text differs after replay"));
    }
    let reread = io::perturbation_from_text(&pert, space).map_err(|e| e.to_string())?;
    if io::perturbation_to_text(&reread, "space.txt").map_err(|e| e.to_string())? != pert {
        return Err(format!("{name}: perturbation text does not round-trip"));
    }
    let again = simultaneous_localize(seq, &cone, opts).map_err(|e| e.to_string())?;
    if texts(&again)? != (pert, certs) {
        return Err(format!("{name}: a second run differs"));
    }
    Ok(())
}

fn random_replay_sequence(seed: u64) -> FnSequence {
    let mut rng = rng(seed);
    let space = build_grid_1d(-1.0, 1.0, rng.gen_range(9..=65))
        .unwrap()
        .into_shared();
    let limit = flat_values(&mut rng, space.len(), 0.1);
    let horizon = rng.gen_range(3..=12);
    let terms = random_sequence(&mut rng, &limit, horizon);
    FnSequence::new(
        terms.into_iter().map(|t| ext(&space, t)).collect(),
        ext(&space, limit),
    )
    .unwrap()
}

fn replay_determinism() -> Verdict {
    let mut cases: Vec<(String, FnSequence, SimulOptions)> = Vec::new();
    let ind = scenario_indicator(257, 64).unwrap();
    cases.push((
        "indicator".into(),
        ind.seq.clone(),
        SimulOptions::new(0.4, 0.02),
    ));
    let cone = scenario_cone(10.0, 401, 50).unwrap();
    cases.push((
        "cone".into(),
        cone.seq.clone(),
        SimulOptions::new(0.4, 0.02).with_tie_break(cone.defaults.tie_break),
    ));
    let uni = scenario_uniform(Profile::Drift, 32).unwrap();
    cases.push((
        "uniform".into(),
        uni.seq.clone(),
        SimulOptions::new(0.3, 0.01),
    ));
    for seed in 0..5u64 {
        cases.push((
            format!("random seed {seed}"),
            random_replay_sequence(0x5eed_0900 + seed),
            SimulOptions::new(0.3, 0.01),
        ));
    }
    // The same seed must rebuild the same sequence.
    let values = |seq: &FnSequence| -> Vec<Vec<f64>> {
        seq.terms().iter().map(|t| t.values().to_vec()).collect()
    };
    let same_seed = values(&random_replay_sequence(0x5eed_0900))
        == values(&random_replay_sequence(0x5eed_0900));
    let errors: Vec<String> = cases
        .iter()
        .filter_map(|(name, seq, opts)| replay_case(name, seq, opts).err())
        .collect();
    verdict(
        errors.is_empty() && same_seed,
        format!(
            "{} runs replayed from parsed transcripts; {}",
            cases.len(),
            if errors.is_empty() {
                "all byte-identical".into()
            } else {
                errors.join("; ")
            }
        ),
    )
}

// ---------------------------------------------------------------------------

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "enlargement keeps the infimum and localizes near-minimizers",
            enlargement_inf_and_inclusion,
        ),
        ("sum of near-minimizer sets", sum_inclusion_trials),
        ("bump factory clauses", bump_factory_clauses),
        (
            "single-function localization",
            localize_budget_and_certificates,
        ),
        (
            "stability margin under later perturbations",
            margin_contract,
        ),
        ("indicator sequence", indicator_scenario),
        ("cone counterexample", cone_scenario),
        (
            "lower bound under a uniformly continuous shift",
            shift_preservation,
        ),
        ("transcript replay", replay_determinism),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    panic::set_hook(Box::new(|_| {}));
    for (i, (name, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {} ({name})", i + 1);
        if let Some(f) = &filter {
            if !label.contains(f.as_str()) {
                continue;
            }
        }
        let v = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        println!(
            "{label}: {} ({})",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
