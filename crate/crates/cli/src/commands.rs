use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use strongmin::convergence::{
    check_lower_bound, check_pointwise, verify_argmin_proximity, verify_inf_convergence,
    verify_shift_preservation,
};
use strongmin::functions::check_sum_inclusion;
use strongmin::gallery::Scenario;
use strongmin::io::{self, SequenceDoc};
use strongmin::solver::{
    self, recheck_certificate, LocalizeOptions, Mode, SimulOptions, SimulResult,
};
use strongmin::{ConeSpace, ConvergenceReport, ExtFn, FnSequence, MetricSpace};

use crate::config::{function_input, sequence_inputs, Params};

/// How a successful run ended: a clean result, or a reported finding such as
/// a condition failing (exit status 2).
#[derive(Debug, PartialEq)]
pub enum Outcome {
    Success,
    Finding(String),
}

const RUN_FILE: &str = "run.toml";

/// What `recheck` needs to rebuild a solver run.
#[derive(Debug, Serialize, Deserialize)]
struct RunRecord {
    command: String,
    params: Params,
}

struct Out {
    dir: PathBuf,
}

impl Out {
    fn new(p: &Params) -> Result<Self> {
        let dir = p.out_dir();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir })
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn record(&self, command: &str, p: &Params) -> Result<()> {
        let record = RunRecord {
            command: command.to_string(),
            params: p.clone().absolutized()?,
        };
        self.write(RUN_FILE, toml::to_string(&record)?)?;
        Ok(())
    }
}

fn label(space: &MetricSpace, i: usize) -> &str {
    &space.labels()[i]
}

pub fn conditions_csv(reports: &[ConvergenceReport], space: &MetricSpace) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "condition",
        "eps",
        "first_valid_N",
        "witness_n",
        "witness_point",
    ])?;
    for r in reports {
        let first = match r.first_valid_n {
            Some(n) => n.to_string(),
            None => format!("none<={}", r.horizon),
        };
        let (wn, wx) = match r.witness {
            Some(w) => (w.n.to_string(), label(space, w.point).to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([r.condition.to_string(), r.level.to_string(), first, wn, wx])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn level_default(
    p: Option<f64>,
    scenario: Option<&Scenario>,
    pick: fn(&Scenario) -> f64,
    fallback: f64,
) -> f64 {
    p.or(scenario.map(pick)).unwrap_or(fallback)
}

pub fn enlarge(p: &Params) -> Result<Outcome> {
    let (f, scenario) = function_input(p)?;
    let eps = Params::check_positive(
        "eps",
        level_default(p.eps, scenario.as_ref(), |s| s.defaults.eps, 0.125),
    )?;
    let fe = f.enlarge(eps)?;
    let out = Out::new(p)?;
    out.write("space.txt", io::space_to_text(f.space())?)?;
    out.write("function.txt", io::function_to_text(&f, "space.txt")?)?;
    out.write("enlarged.txt", io::function_to_text(&fe, "space.txt")?)?;
    println!(
        "enlarged at eps={eps}: inf f = {}, inf f_eps = {}",
        f.inf_value(),
        fe.inf_value()
    );
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct ArgminDoc {
    eps: f64,
    inf: f64,
    points: Vec<usize>,
    labels: Vec<String>,
    diam: f64,
}

pub fn argmin(p: &Params) -> Result<Outcome> {
    let (f, scenario) = function_input(p)?;
    let eps = level_default(p.eps, scenario.as_ref(), |s| s.defaults.eps, 0.125);
    if !(eps >= 0.0) {
        bail!("--eps must be nonnegative, got {eps}");
    }
    let set = f.eps_argmin(eps)?;
    let space = f.space();
    let doc = ArgminDoc {
        eps,
        inf: f.inf_value(),
        points: set.as_slice().to_vec(),
        labels: set.iter().map(|i| label(space, i).to_string()).collect(),
        diam: space.diam(&set),
    };
    let out = Out::new(p)?;
    out.write("argmin.txt", io::write_doc("argmin", &doc)?)?;
    let curve = diam_curve(&f, eps.max(f64::MIN_POSITIVE))?;
    out.write("diam_curve.dat", io::series_to_text("t", "diam", &curve))?;
    println!(
        "eps-argmin at eps={eps}: {} points, diam {}",
        set.len(),
        doc.diam
    );
    Ok(Outcome::Success)
}

/// `diam Omega_f(t)` at `t = top / 2^k`, `k = 0..=30`.
fn diam_curve(f: &ExtFn, top: f64) -> Result<Vec<(f64, f64)>> {
    (0..=30)
        .map(|k| {
            let t = top / 2f64.powi(k);
            Ok((t, f.argmin_diam(t)?))
        })
        .collect()
}

#[derive(Serialize)]
struct ConditionsDoc<'a> {
    horizon: usize,
    reports: &'a [ConvergenceReport],
    summaries: Vec<String>,
}

pub fn check_conv(p: &Params) -> Result<Outcome> {
    let inputs = sequence_inputs(p)?;
    let sc = inputs.scenario.as_ref();
    let eps = Params::check_positive("eps", level_default(p.eps, sc, |s| s.defaults.eps, 0.125))?;
    let tol = Params::check_positive("tol", level_default(p.tol, sc, |s| s.defaults.tol, eps))?;
    let reports = vec![
        check_pointwise(&inputs.seq, tol)?,
        check_lower_bound(&inputs.seq, eps)?,
    ];
    let out = Out::new(p)?;
    out.write("conditions.csv", conditions_csv(&reports, inputs.space())?)?;
    let summaries: Vec<String> = reports.iter().map(ConvergenceReport::summary).collect();
    out.write(
        "conditions.txt",
        io::write_doc(
            "conditions",
            &ConditionsDoc {
                horizon: inputs.seq.horizon(),
                reports: &reports,
                summaries: summaries.clone(),
            },
        )?,
    )?;
    for s in &summaries {
        println!("{s}");
    }
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed())
        .map(|r| {
            if r.condition == strongmin::Condition::Pointwise {
                "pointwise"
            } else {
                "lower-bound"
            }
        })
        .collect();
    Ok(if failed.is_empty() {
        Outcome::Success
    } else {
        Outcome::Finding(format!(
            "condition fails up to the horizon: {}",
            failed.join(", ")
        ))
    })
}

#[derive(Serialize)]
struct InclusionTrials {
    trials: usize,
    hypothesis_held: usize,
    violations: usize,
    first_violation: Option<(usize, f64)>,
}

#[derive(Serialize)]
struct ShiftTrial {
    center: usize,
    slope: f64,
    report: strongmin::convergence::ShiftReport,
    preserved: Option<bool>,
}

#[derive(Serialize)]
struct LemmasDoc {
    eps: f64,
    seed: u64,
    inf_convergence: strongmin::convergence::InfConvergenceReport,
    proximity: strongmin::convergence::ProximityReport,
    inclusion: InclusionTrials,
    shift: Vec<ShiftTrial>,
}

pub fn verify_lemmas(p: &Params) -> Result<Outcome> {
    let inputs = sequence_inputs(p)?;
    let seq = &inputs.seq;
    let eps = Params::check_positive(
        "eps",
        level_default(p.eps, inputs.scenario.as_ref(), |s| s.defaults.eps, 0.125),
    )?;
    let trials = p.trials.unwrap_or(200);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed());
    let space = inputs.space().clone();

    let inf_convergence = verify_inf_convergence(seq, eps)?;
    let proximity = verify_argmin_proximity(seq, eps)?;

    let mut inclusion = InclusionTrials {
        trials,
        hypothesis_held: 0,
        violations: 0,
        first_violation: None,
    };
    for t in 0..trials {
        let n = rng.gen_range(0..=seq.horizon());
        let f = if n == 0 { seq.limit() } else { seq.term(n) };
        let values = (0..space.len())
            .map(|_| rng.gen_range(0..64) as f64 / 64.0)
            .collect();
        let g = ExtFn::new(space.clone(), values)?;
        let delta = 2f64.powi(-rng.gen_range(2..6));
        let r = check_sum_inclusion(f, &g, delta)?;
        inclusion.hypothesis_held += r.hypothesis_holds as usize;
        if r.is_theorem_violation() {
            inclusion.violations += 1;
            inclusion.first_violation.get_or_insert((t, delta));
        }
    }

    let mut shift = Vec::new();
    for _ in 0..trials.min(20) {
        let center = rng.gen_range(0..space.len());
        let slope = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
        let row = space.row(center).to_vec();
        let g = ExtFn::new(space.clone(), row.iter().map(|d| slope * d).collect())?;
        let report = verify_shift_preservation(seq, &g, eps, |t| t / (2.0 * slope))?;
        shift.push(ShiftTrial {
            center,
            slope,
            preserved: report.preserved(),
            report,
        });
    }

    let doc = LemmasDoc {
        eps,
        seed: p.seed(),
        inf_convergence,
        proximity,
        inclusion,
        shift,
    };
    let out = Out::new(p)?;
    out.write("lemmas.txt", io::write_doc("lemmas", &doc)?)?;

    let mut findings = Vec::new();
    if !doc.inf_convergence.applicability.is_applicable() {
        findings.push("convergence preconditions fail, verifiers not applicable".to_string());
    } else {
        if !doc.inf_convergence.holds() {
            findings.push("infima do not converge within 2 eps".into());
        }
        if !doc.proximity.holds() {
            findings.push("near-minimizer proximity fails".into());
        }
    }
    if doc.inclusion.violations > 0 {
        findings.push(format!(
            "{} sum-inclusion violations",
            doc.inclusion.violations
        ));
    }
    if doc.shift.iter().any(|s| s.preserved == Some(false)) {
        findings.push("lower bound not preserved under a shift".into());
    }
    println!(
        "infima: {}; proximity: {}; inclusion trials: {} ({} violations); shifts: {}",
        if doc.inf_convergence.holds() {
            "ok"
        } else {
            "fails"
        },
        if doc.proximity.holds() { "ok" } else { "fails" },
        trials,
        doc.inclusion.violations,
        doc.shift.len()
    );
    Ok(if findings.is_empty() {
        Outcome::Success
    } else {
        Outcome::Finding(findings.join("; "))
    })
}

fn localize_options(
    p: &Params,
    scenario: Option<&Scenario>,
    fallback: strongmin::TieBreak,
) -> Result<LocalizeOptions> {
    let budget = Params::check_positive(
        "budget",
        level_default(p.budget, scenario, |s| s.defaults.budget, 0.3),
    )?;
    let tol = Params::check_positive(
        "tol",
        level_default(p.tol, scenario, |s| s.defaults.solver_tol, 1e-3),
    )?;
    Ok(LocalizeOptions::new(budget, tol).with_tie_break(p.tie_break(fallback)))
}

pub fn perturb(p: &Params) -> Result<Outcome> {
    let (f, scenario) = function_input(p)?;
    let fallback = scenario
        .as_ref()
        .map(|s| s.defaults.tie_break)
        .unwrap_or_default();
    let opts = localize_options(p, scenario.as_ref(), fallback)?;
    let loc = solver::localize(&f, &ConeSpace::new(f.space().clone())?, &opts)?;
    let out = Out::new(p)?;
    out.write("space.txt", io::space_to_text(f.space())?)?;
    out.write(
        "perturbation.txt",
        io::perturbation_to_text(&loc.perturbation, "space.txt")?,
    )?;
    out.write("transcript.jsonl", io::transcript_to_text(&loc.transcript)?)?;
    out.write(
        "certificates.txt",
        io::certificates_to_text(&[(solver::LIMIT, Some(&loc.certificate))])?,
    )?;
    let curve: Vec<(f64, f64)> = loc
        .certificate
        .levels
        .iter()
        .map(|l| (l.t, l.diam))
        .collect();
    out.write("diam_curve.dat", io::series_to_text("t", "diam", &curve))?;
    out.record("perturb", p)?;
    let c = &loc.certificate;
    println!(
        "localized at {} with {} bumps, norm bound {}; diam Omega({}) = {}",
        label(f.space(), c.minimizer),
        loc.perturbation.len(),
        loc.perturbation.norm_bound(),
        c.final_t,
        c.final_diam
    );
    Ok(Outcome::Success)
}

fn simul_options(p: &Params, inputs: &crate::config::Inputs) -> Result<SimulOptions> {
    let sc = inputs.scenario.as_ref();
    let lopts = localize_options(p, sc, inputs.fallback_tie_break())?;
    let mut opts = SimulOptions::new(lopts.budget, lopts.tol).with_tie_break(lopts.tie_break);
    if let Some(eps) = p.eps {
        Params::check_positive("eps", eps)?;
        opts = opts.with_precondition_eps(vec![eps]);
    }
    Ok(opts)
}

fn simul_files(out: &Out, r: &SimulResult, seq: &FnSequence) -> Result<()> {
    let space = seq.limit().space();
    out.write("space.txt", io::space_to_text(space)?)?;
    out.write(
        "perturbation.txt",
        io::perturbation_to_text(&r.perturbation, "space.txt")?,
    )?;
    out.write("transcript.jsonl", io::transcript_to_text(&r.transcript)?)?;
    out.write(
        "certificates.txt",
        io::certificates_to_text(&r.certificates())?,
    )?;
    out.write("report.txt", io::write_doc("simul-report", &r.report)?)?;
    let series = |ys: &[f64]| -> Vec<(f64, f64)> {
        ys.iter()
            .enumerate()
            .map(|(k, &y)| ((k + 1) as f64, y))
            .collect()
    };
    out.write(
        "dist.dat",
        io::series_to_text("n", "dist(x_n,x_inf)", &series(&r.report.dist_trajectory)),
    )?;
    out.write(
        "values.dat",
        io::series_to_text("n", "f_n(x_n)", &series(&r.report.value_trajectory)),
    )?;
    let minimizers: Vec<f64> = r
        .minimizers()
        .iter()
        .map(|&i| space.coord(i).unwrap_or(i as f64))
        .collect();
    out.write(
        "minimizers.dat",
        io::series_to_text("n", "x_n", &series(&minimizers)),
    )?;
    Ok(())
}

pub fn simul(p: &Params) -> Result<Outcome> {
    let inputs = sequence_inputs(p)?;
    let opts = simul_options(p, &inputs)?;
    let cone = ConeSpace::new(inputs.space().clone())?;
    let r = solver::simultaneous_localize(&inputs.seq, &cone, &opts)?;
    let out = Out::new(p)?;
    simul_files(&out, &r, &inputs.seq)?;
    out.record("simul", p)?;
    let rep = &r.report;
    let space = inputs.space();
    println!(
        "mode {:?}; x_inf = {}; {} bumps, norm bound {}; tail dist in [{}, {}]",
        rep.mode,
        label(space, r.limit.minimizer),
        r.perturbation.len(),
        r.perturbation.norm_bound(),
        rep.tail_min_dist,
        rep.tail_max_dist
    );
    if !rep.unlocalized.is_empty() {
        bail!(
            "margin ledger exhausted: functions {:?} were not localized (partial results written to {})",
            rep.unlocalized,
            out.dir.display()
        );
    }
    Ok(match (rep.mode, rep.conclusion) {
        (Mode::Conditional, Some(true)) => Outcome::Success,
        (Mode::Conditional, _) => Outcome::Finding("minimizers do not converge".into()),
        (Mode::Unconditional, _) => Outcome::Finding(
            "convergence conditions fail up to the horizon; minimizer convergence not asserted"
                .into(),
        ),
    })
}

pub fn gallery(name: &str, p: &Params) -> Result<Outcome> {
    let params = Params {
        scenario: Some(name.to_string()),
        ..p.clone()
    };
    let s = params.scenario()?;
    let eps = Params::check_positive("eps", p.eps.unwrap_or(s.defaults.eps))?;
    let tol = Params::check_positive("tol", p.tol.unwrap_or(s.defaults.tol))?;
    let out = Out::new(p)?;
    write_sequence(&out, &s.seq)?;
    let expected = s.expected(eps, tol)?;
    out.write("expected.txt", io::write_doc("expected", &expected)?)?;
    let mismatches = s.golden_check(eps, tol)?;
    out.write("golden.txt", io::write_doc("golden", &mismatches)?)?;
    println!(
        "{}: horizon {}, pointwise {}, lower bound {}",
        s.name,
        s.horizon(),
        expected.pointwise,
        expected.lower_bound
    );
    if mismatches.is_empty() {
        Ok(Outcome::Success)
    } else {
        for m in &mismatches {
            println!(
                "mismatch in {}: expected {}, got {}",
                m.field, m.expected, m.got
            );
        }
        Ok(Outcome::Finding(format!(
            "{} golden mismatches",
            mismatches.len()
        )))
    }
}

fn write_sequence(out: &Out, seq: &FnSequence) -> Result<()> {
    out.write("space.txt", io::space_to_text(seq.limit().space())?)?;
    let mut terms = Vec::new();
    for (k, f) in seq.terms().iter().enumerate() {
        let name = format!("functions/f_{}.txt", k + 1);
        out.write(&name, io::function_to_text(f, "../space.txt")?)?;
        terms.push(name);
    }
    out.write(
        "functions/f_inf.txt",
        io::function_to_text(seq.limit(), "../space.txt")?,
    )?;
    let doc = SequenceDoc {
        space_ref: "space.txt".into(),
        terms,
        limit: "functions/f_inf.txt".into(),
    };
    out.write("sequence.txt", io::write_doc("sequence", &doc)?)?;
    Ok(())
}

fn read_in(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))
}

/// Replays a saved run and compares the rebuilt artifacts byte for byte.
pub fn recheck(run: &Path) -> Result<Outcome> {
    let record: RunRecord = toml::from_str(&read_in(run, RUN_FILE)?)
        .with_context(|| format!("parsing {}", run.join(RUN_FILE).display()))?;
    let transcript = io::transcript_from_text(&read_in(run, "transcript.jsonl")?)?;
    let p = &record.params;
    let (perturbation, certificates) = match record.command.as_str() {
        "perturb" => {
            let (f, scenario) = function_input(p)?;
            let fallback = scenario
                .as_ref()
                .map(|s| s.defaults.tie_break)
                .unwrap_or_default();
            let opts = localize_options(p, scenario.as_ref(), fallback)?;
            let cone = ConeSpace::new(f.space().clone())?;
            let loc = solver::replay_localize(&f, &cone, &opts, &transcript)?;
            let fin = f.add(loc.perturbation.total())?;
            let check = recheck_certificate(&fin, &loc.certificate, 0.0)?;
            if !check.passed {
                return Ok(Outcome::Finding(format!(
                    "certificate fails: {:?}",
                    check.failure
                )));
            }
            (
                io::perturbation_to_text(&loc.perturbation, "space.txt")?,
                io::certificates_to_text(&[(solver::LIMIT, Some(&loc.certificate))])?,
            )
        }
        "simul" => {
            let inputs = sequence_inputs(p)?;
            let opts = simul_options(p, &inputs)?;
            let cone = ConeSpace::new(inputs.space().clone())?;
            let r = solver::replay_simultaneous(&inputs.seq, &cone, &opts, &transcript)?;
            (
                io::perturbation_to_text(&r.perturbation, "space.txt")?,
                io::certificates_to_text(&r.certificates())?,
            )
        }
        other => bail!("run directory holds a {other:?} run, which has no transcript to replay"),
    };
    let mut diffs = Vec::new();
    if perturbation != read_in(run, "perturbation.txt")? {
        diffs.push("perturbation.txt");
    }
    if certificates != read_in(run, "certificates.txt")? {
        diffs.push("certificates.txt");
    }
    if diffs.is_empty() {
        println!("replay matches: perturbation and certificates are byte-identical");
        Ok(Outcome::Success)
    } else {
        Ok(Outcome::Finding(format!(
            "replay differs in {}",
            diffs.join(", ")
        )))
    }
}
