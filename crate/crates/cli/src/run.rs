//! One function per experiment kind. Each returns its report files in
//! memory; nothing touches the file system here.

use num_bigint::BigUint;
use serde::Serialize;
use serde_json::json;
use sprinkle::acceptance::{run_acceptance, AcceptanceReport, Timings};
use sprinkle::coupling::decoupling_check;
use sprinkle::detection::{
    detection_schedule, estimate_trigger, survival_estimate, survival_indicators, SurvivalQuery,
};
use sprinkle::exp_lpp::decoupling_check_exp;
use sprinkle::experiments::{bounds, lattice};
use sprinkle::hammersley::{evolve_particles, exit_point, sample_box_environment, LppField};
use sprinkle::harness::Runner;
use sprinkle::rng::RandomStream;
use sprinkle::rwre::{rwre_schedule, sample_displacements, speed_bracket, PhDirection, WalkExperiment};
use sprinkle::stats::mc_estimate;

use crate::config::{
    DecoupleConfig, DecoupleExpConfig, DetectConfig, ExitpointConfig, ExperimentConfig, ExplppConfig, PoissonConfig,
    RwreSpeedConfig, ScheduleConfig, ScheduleKind, SimulateConfig,
};
use crate::CliError;

/// Replicates `0..reps` of experiments `first..first + count` were used.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StreamRecord {
    pub label: String,
    pub first_experiment: u32,
    pub experiments: u32,
    pub reps: u32,
}

fn stream(label: &str, first_experiment: u32, experiments: u32, reps: u32) -> StreamRecord {
    StreamRecord { label: label.into(), first_experiment, experiments, reps }
}

#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub pass: bool,
    pub streams: Vec<StreamRecord>,
    pub summary: String,
}

pub fn json_bytes<T: Serialize + ?Sized>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut b = serde_json::to_vec_pretty(v).map_err(|e| CliError::Run(e.to_string()))?;
    b.push(b'\n');
    Ok(b)
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Run(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Run(e.to_string()))
}

pub fn run(cfg: &ExperimentConfig, runner: &Runner, seed: u64) -> Result<RunOutput, CliError> {
    match cfg {
        ExperimentConfig::Simulate(c) => simulate(c, runner, seed),
        ExperimentConfig::Decouple(c) => decouple(c, runner, seed),
        ExperimentConfig::DecoupleExp(c) => decouple_exp(c, runner, seed),
        ExperimentConfig::Exitpoint(c) => exitpoint(c, runner, seed),
        ExperimentConfig::Detect(c) => detect(c, runner, seed),
        ExperimentConfig::RwreSpeed(c) => rwre_speed(c, runner, seed),
        ExperimentConfig::ExplppChecks(c) => explpp(c, runner, seed),
        ExperimentConfig::PoissonBound(c) => poisson(c),
        ExperimentConfig::Schedule(c) => schedule(c),
    }
}

#[derive(Serialize)]
struct SimulateRow {
    replicate: u32,
    sources: usize,
    sinks: usize,
    clocks: usize,
    events: usize,
    particles_at_top: usize,
    lpp_at_corner: u64,
    exit_z: f64,
    flux_at_mid: u64,
}

#[derive(Serialize)]
struct EventRow {
    time: f64,
    kind: String,
    particle: Option<u32>,
    from: Option<f64>,
    to: Option<f64>,
}

fn simulate(c: &SimulateConfig, runner: &Runner, seed: u64) -> Result<RunOutput, CliError> {
    let bx = c.bx;
    let rows = runner.run(seed, 0, c.reps, |s| {
        let replicate = sprinkle::rng::split_stream_id(s.stream_id()).1;
        let env = sample_box_environment(&s, c.lambda, bx)?;
        let hist = evolve_particles(&env);
        let mid = 0.5 * (bx.x0 + bx.x1);
        Ok(SimulateRow {
            replicate,
            sources: env.sources().len(),
            sinks: env.sinks().len(),
            clocks: env.clocks().len(),
            events: hist.events().len(),
            particles_at_top: hist.configuration_at(bx.t1)?.positions.len(),
            lpp_at_corner: LppField::new(&env, true).value(bx.x1, bx.t1)?,
            exit_z: exit_point(&env, bx.x1, bx.t1)?.z,
            flux_at_mid: hist.flux(mid, bx.t0, bx.t1)?,
        })
    })?;
    let mut files = vec![("simulate.csv".to_string(), csv_bytes(&rows)?)];
    if c.reps > 0 {
        // replicate 0 again, in full
        let env = sample_box_environment(&RandomStream::for_replicate(seed, 0, 0), c.lambda, bx)?;
        let events: Vec<EventRow> = evolve_particles(&env)
            .events()
            .iter()
            .map(|e| EventRow {
                time: e.time,
                kind: serde_json::to_value(e.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                particle: e.particle,
                from: e.from,
                to: e.to,
            })
            .collect();
        let mut env_json = env.to_json()?.into_bytes();
        env_json.push(b'\n');
        files.push(("environment.json".into(), env_json));
        files.push(("events.csv".into(), csv_bytes(&events)?));
    }
    Ok(RunOutput {
        files,
        pass: true,
        streams: vec![stream("environments", 0, 1, c.reps)],
        summary: format!("{} environments on [{}, {}] x [{}, {}]", c.reps, bx.x0, bx.x1, bx.t0, bx.t1),
    })
}

fn decouple(c: &DecoupleConfig, runner: &Runner, seed: u64) -> Result<RunOutput, CliError> {
    let r = decoupling_check(runner, seed, 0, &c.f1, &c.f2, c.b1, c.b2, c.lambda, c.lambda_prime, c.reps)?;
    Ok(RunOutput {
        files: vec![("decouple.json".into(), json_bytes(&r)?)],
        pass: r.pass,
        streams: vec![stream("decoupling (fork 0 joint, 1 first box, 2 second box)", 0, 1, c.reps)],
        summary: format!("lhs {:.5} vs rhs {:.5} + 2*{:.5}", r.lhs.mean, r.rhs, r.combined_stderr),
    })
}

fn decouple_exp(c: &DecoupleExpConfig, runner: &Runner, seed: u64) -> Result<RunOutput, CliError> {
    let r = decoupling_check_exp(runner, seed, 0, &c.f1, &c.f2, c.alpha, c.alpha_prime, c.reps)?;
    Ok(RunOutput {
        files: vec![("decouple.json".into(), json_bytes(&r)?)],
        pass: r.pass,
        streams: vec![stream("decoupling (fork 0 joint, 1 first block, 2 second block)", 0, 1, c.reps)],
        summary: format!("lhs {:.5} vs rhs {:.5} + 2*{:.5}", r.lhs.mean, r.rhs, r.combined_stderr),
    })
}

#[derive(Serialize)]
struct ExitRow {
    replicate: u32,
    z: f64,
    value: u64,
}

fn exitpoint(c: &ExitpointConfig, runner: &Runner, seed: u64) -> Result<RunOutput, CliError> {
    let (x, t) = (c.x.unwrap_or(c.bx.x1), c.t.unwrap_or(c.bx.t1));
    let rows = runner.run(seed, 0, c.reps, |s| {
        let replicate = sprinkle::rng::split_stream_id(s.stream_id()).1;
        let r = exit_point(&sample_box_environment(&s, c.lambda, c.bx)?, x, t)?;
        Ok(ExitRow { replicate, z: r.z, value: r.value })
    })?;
    let z: Vec<f64> = rows.iter().map(|r| r.z).collect();
    let est = mc_estimate(&z)?;
    let characteristic = (x - c.bx.x0) - (t - c.bx.t0) / (c.lambda * c.lambda);
    let sink_share = z.iter().filter(|v| **v <= 0.0).count() as f64 / z.len() as f64;
    let summary = json!({
        "lambda": c.lambda,
        "box": c.bx,
        "x": x,
        "t": t,
        "z": est,
        "characteristic_z": characteristic,
        "sink_share": sink_share,
    });
    Ok(RunOutput {
        files: vec![("exitpoint.csv".into(), csv_bytes(&rows)?), ("exitpoint.json".into(), json_bytes(&summary)?)],
        pass: true,
        streams: vec![stream("environments", 0, 1, c.reps)],
        summary: format!("mean z {:.4} (characteristic {:.4})", est.mean, characteristic),
    })
}

#[derive(Serialize)]
struct SurvivalRow {
    n_jump: u64,
    survival: f64,
    stderr: f64,
    censored_share: f64,
}

fn detect(c: &DetectConfig, runner: &Runner, seed: u64) -> Result<RunOutput, CliError> {
    let q = SurvivalQuery { lambda: c.lambda, r: c.r, horizon: c.horizon, half_width: c.half_width };
    let mut ranges = c.ranges.clone();
    ranges.sort_unstable();
    ranges.dedup();
    let ind = survival_indicators(runner, seed, 0, &q, &ranges, c.reps)?;
    let mut rows = Vec::with_capacity(ranges.len());
    let mut estimates = Vec::with_capacity(ranges.len());
    for (nj, row) in ranges.iter().zip(&ind) {
        let e = survival_estimate(row)?;
        rows.push(SurvivalRow { n_jump: *nj, survival: e.mean, stderr: e.stderr, censored_share: e.flags.censored_fraction });
        estimates.push(e);
    }
    let violations: usize =
        ind.windows(2).map(|w| w[0].iter().zip(&w[1]).filter(|(a, b)| a.0 && !b.0).count()).sum();
    let mut streams = vec![stream("environments", 0, 1, c.reps)];
    let trigger = match &c.trigger {
        Some(t) => {
            let rows = detection_schedule(&BigUint::from(t.l0), t.k)?;
            streams.push(stream("trigger environments", 1, 1, t.reps));
            Some(estimate_trigger(runner, seed, 1, &rows[t.k as usize], c.lambda, c.r, t.reps)?)
        }
        None => None,
    };
    let report = json!({
        "query": q,
        "ranges": ranges,
        "survival": estimates,
        "monotonicity_violations": violations,
        "trigger": trigger,
    });
    Ok(RunOutput {
        files: vec![("detect.csv".into(), csv_bytes(&rows)?), ("detect.json".into(), json_bytes(&report)?)],
        pass: violations == 0,
        streams,
        summary: format!("{} jump ranges, {} monotonicity violations", ranges.len(), violations),
    })
}

#[derive(Serialize)]
struct PhRow {
    v: f64,
    upper: f64,
    upper_stderr: f64,
    lower: f64,
    lower_stderr: f64,
}

fn rwre_speed(c: &RwreSpeedConfig, runner: &Runner, seed: u64) -> Result<RunOutput, CliError> {
    let ex = WalkExperiment { rho: c.rho, horizon: c.horizon, walk: c.walk, mode: c.mode, offsets: c.offsets.clone() };
    let samples = sample_displacements(runner, seed, 0, &ex, c.reps)?;
    let bracket = speed_bracket(&samples, c.rho, c.tol)?;
    let n = c.grid.max(2);
    let mut rows = Vec::with_capacity(n as usize);
    for i in 0..n {
        let v = -1.0 + 2.0 * f64::from(i) / f64::from(n - 1);
        let up = samples.estimate(PhDirection::Upper, v)?.estimate;
        let lo = samples.estimate(PhDirection::Lower, v)?.estimate;
        rows.push(PhRow { v, upper: up.mean, upper_stderr: up.stderr, lower: lo.mean, lower_stderr: lo.stderr });
    }
    let report = json!({ "experiment": ex, "reps": c.reps, "bracket": bracket });
    Ok(RunOutput {
        files: vec![("rwre.json".into(), json_bytes(&report)?), ("ph.csv".into(), csv_bytes(&rows)?)],
        pass: true,
        streams: vec![stream("environments (fork 0) and uniforms (fork 1)", 0, 1, c.reps)],
        summary: format!("speed bracket [{:.4}, {:.4}]", bracket.v_minus, bracket.v_plus),
    })
}

fn explpp(c: &ExplppConfig, runner: &Runner, seed: u64) -> Result<RunOutput, CliError> {
    let n = c.alphas.len() as u32;
    let en = if c.enumeration_grids > 0 {
        Some(lattice::enumeration_check(runner, seed, 0, c.enumeration_grids, c.enumeration_side)?)
    } else {
        None
    };
    let mut ks = Vec::new();
    let mut means = Vec::new();
    for (i, a) in c.alphas.iter().enumerate() {
        ks.push(lattice::increment_law(runner, seed, 1 + i as u32, *a, c.increment_side, c.increment_reps)?);
        means.push(lattice::passage_mean(runner, seed, 1000 + i as u32, *a, c.side, c.reps)?);
    }
    let level = sprinkle::acceptance::GOF_LEVEL;
    let pass = en.is_none_or(|e| e.passed())
        && ks.iter().all(|k| k.p_value >= level)
        && means.iter().all(|m| m.within_three_sigma);
    let report = json!({ "alphas": c.alphas, "enumeration": en, "increment_ks": ks, "passage_means": means });
    Ok(RunOutput {
        files: vec![("explpp.json".into(), json_bytes(&report)?)],
        pass,
        streams: vec![
            stream("enumeration grids", 0, 1, c.enumeration_grids),
            stream("increment grids, one experiment per alpha", 1, n, c.increment_reps),
            stream("passage-time grids, one experiment per alpha", 1000, n, c.reps),
        ],
        summary: format!("{} alphas checked", n),
    })
}

fn poisson(c: &PoissonConfig) -> Result<RunOutput, CliError> {
    let grid = bounds::poisson_grid(&c.lambdas)?;
    let ch = bounds::chernoff_checks()?;
    let bad = grid.iter().filter(|p| !p.holds()).count();
    let pass = bad == 0 && ch.shape.passed() && ch.max_quadrature_error <= sprinkle::acceptance::QUADRATURE_TOLERANCE;
    Ok(RunOutput {
        files: vec![("poisson.csv".into(), csv_bytes(&grid)?), ("chernoff.json".into(), json_bytes(&ch)?)],
        pass,
        streams: vec![],
        summary: format!("{bad} of {} grid points exceed the bound", grid.len()),
    })
}

#[derive(Serialize)]
struct DetectionScheduleRow {
    k: u32,
    l: String,
    big_l: String,
    growth_sandwich: Option<bool>,
    height_sandwich: bool,
}

#[derive(Serialize)]
struct WalkScheduleRow {
    k: u32,
    big_l: String,
    l: String,
    epsilon: f64,
    speed_step: f64,
    rho: Option<f64>,
    v_tilde: Option<f64>,
}

fn schedule(c: &ScheduleConfig) -> Result<RunOutput, CliError> {
    let l0: BigUint = c.l0.parse().map_err(|_| CliError::Config(format!("l0 is not a decimal integer: {:?}", c.l0)))?;
    match c.schedule {
        ScheduleKind::Detection => {
            let rows = detection_schedule(&l0, c.k_max)?;
            let table: Vec<DetectionScheduleRow> = rows
                .iter()
                .enumerate()
                .map(|(i, r)| DetectionScheduleRow {
                    k: r.k,
                    l: r.l.to_string(),
                    big_l: r.big_l.to_string(),
                    growth_sandwich: rows.get(i + 1).map(|n| r.growth_sandwich(n)),
                    height_sandwich: r.height_sandwich(),
                })
                .collect();
            Ok(RunOutput {
                files: vec![("schedule.csv".into(), csv_bytes(&table)?), ("schedule.json".into(), json_bytes(&rows)?)],
                pass: true,
                streams: vec![],
                summary: format!("{} crossing scales from l_0 = {}", rows.len(), l0),
            })
        }
        ScheduleKind::Walk => {
            let t = rwre_schedule(&l0, c.rho, c.delta, c.c1, c.rho_c_minus, c.v_target, c.k_max)?;
            let table: Vec<WalkScheduleRow> = t
                .rows
                .iter()
                .map(|r| WalkScheduleRow {
                    k: r.k,
                    big_l: r.big_l.to_string(),
                    l: r.l.to_string(),
                    epsilon: r.epsilon,
                    speed_step: r.speed_step,
                    rho: r.rho,
                    v_tilde: r.v_tilde,
                })
                .collect();
            Ok(RunOutput {
                files: vec![("schedule.csv".into(), csv_bytes(&table)?), ("schedule.json".into(), json_bytes(&t)?)],
                pass: true,
                streams: vec![],
                summary: format!("{} walk scales from L_0 = {}", t.rows.len(), l0),
            })
        }
    }
}

#[derive(Serialize)]
struct CriterionRow<'a> {
    id: u32,
    name: &'a str,
    pass: bool,
    summary: &'a str,
}

/// The acceptance suite. Timings go to their own file so that the report
/// files depend on the seed alone.
pub fn selftest(runner: &Runner, seed: u64) -> Result<(RunOutput, AcceptanceReport, Timings), CliError> {
    let (report, timings) = run_acceptance(runner, seed)?;
    let rows: Vec<CriterionRow> = report
        .criteria
        .iter()
        .map(|c| CriterionRow { id: c.id, name: &c.name, pass: c.pass, summary: &c.summary })
        .collect();
    let files = vec![
        ("acceptance.json".to_string(), json_bytes(&report)?),
        ("acceptance.csv".to_string(), csv_bytes(&rows)?),
    ];
    let streams = (1..=11).map(|id| stream(&format!("criterion {id}"), 1000 * id, 1000, 0)).collect();
    let passed = report.criteria.iter().filter(|c| c.pass).count();
    let out = RunOutput {
        files,
        pass: report.pass(),
        streams,
        summary: format!("{passed} of {} criteria pass", report.criteria.len()),
    };
    Ok((out, report, timings))
}
