//! `boxctrl transfer`: control.csv, trajectory.csv, report.json.

use std::time::Instant;

use boxctrl::control::{
    normalized_fidelity, solve_transfer, Attempt, ConstraintReport, TransferProblem,
};
use boxctrl::propagation::BoxModel;
use boxctrl::{BasisTruncation, BoxGeometry};
use serde::Serialize;

use crate::config::{self, TransferConfig};
use crate::output::{num, OutputDir, Table};
use crate::{stamp, Context, Failure};

#[derive(Serialize)]
struct Report<'a> {
    command: &'static str,
    version: &'static str,
    config_sha256: &'a str,
    seed: u64,
    epsilon: f64,
    achieved_error: f64,
    fidelity: f64,
    auxiliary_fidelity: f64,
    lifting_error: f64,
    n_refine: usize,
    auxiliary_segments: usize,
    auxiliary_horizon: f64,
    ramp_duration: f64,
    coast_duration: f64,
    total_duration: f64,
    lambda: f64,
    delta: f64,
    final_geometry: BoxGeometry,
    constraints: ConstraintReport,
    attempts: &'a [Attempt],
    elapsed_seconds: f64,
    outputs: Vec<String>,
}

pub fn run(ctx: &Context) -> Result<(), Failure> {
    let loaded = config::load::<TransferConfig>(ctx.config_path()?)?;
    let cfg = &loaded.config;
    let seed = ctx.seed.unwrap_or(cfg.seed);
    let n = BasisTruncation::new(cfg.truncation)?;
    let options = cfg.options(seed, ctx.execution)?;
    let initial = cfg.initial.state.build(n, cfg.initial.geometry()?)?;
    let target = cfg.target.state.build(n, cfg.target.geometry()?)?;
    let problem = TransferProblem::new(initial, target, cfg.epsilon, cfg.rate_bound)?;
    let params = problem.params;

    let start = Instant::now();
    let result = solve_transfer(&problem, &options)?;
    let elapsed = start.elapsed().as_secs_f64();

    let stamp = stamp(&loaded.sha256, Some(seed));
    let mut out = OutputDir::create(&ctx.out)?;

    // f jumps back to 0 between lifted pieces: both one-sided values are listed
    let f = &result.f;
    let mut control = Table::new(&stamp, &["t", "v", "f", "length", "center"]);
    for k in 0..f.segment_count() {
        let (t0, t1) = f.segment_bounds(k);
        for t in [t0, t1] {
            let x = f.value_in_segment(k, t);
            let g = params.geometry_at(x)?;
            control.numbers(&[t, f.rate(k), x, g.length, g.center]);
        }
    }
    out.table("control.csv", control)?;

    let model = BoxModel::new(params, n);
    let steps = model.moving_box_trajectory(f, &problem.initial, options.stepping)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n.dim()).map(|j| format!("p{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut trajectory = Table::new(&stamp, &header);
    let last = steps.len() - 1;
    let keep = cfg.trajectory_samples.min(steps.len());
    let mut previous = None;
    for i in 0..keep {
        let idx = (i * last + (keep - 1) / 2) / (keep - 1);
        if previous == Some(idx) {
            continue;
        }
        previous = Some(idx);
        let (t, c) = &steps[idx];
        let mut row = vec![*t];
        row.extend(c.iter().map(|z| z.norm_sqr()));
        trajectory.numbers(&row);
    }
    out.table("trajectory.csv", trajectory)?;

    let fidelity = normalized_fidelity(&problem.target.coeffs, &result.final_state.coeffs);
    let mut outputs = out.written.clone();
    outputs.push(ctx.out.join("report.json").display().to_string());
    let report = Report {
        command: "transfer",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: &loaded.sha256,
        seed,
        epsilon: cfg.epsilon,
        achieved_error: result.achieved_error,
        fidelity,
        auxiliary_fidelity: result.auxiliary_fidelity,
        lifting_error: result.lifting_error,
        n_refine: result.n_refine,
        auxiliary_segments: result.v.segment_count(),
        auxiliary_horizon: result.v.horizon(),
        ramp_duration: result.ramp_duration,
        coast_duration: result.coast_duration,
        total_duration: f.horizon(),
        lambda: params.lambda,
        delta: params.delta,
        final_geometry: result.final_geometry,
        constraints: result.constraints,
        attempts: &result.attempts,
        elapsed_seconds: elapsed,
        outputs,
    };
    out.json("report.json", &report)?;

    println!(
        "transfer: error {} < epsilon {} (fidelity {}), T = {}, n = {}, {} auxiliary segments",
        num(result.achieved_error),
        cfg.epsilon,
        num(fidelity),
        num(f.horizon()),
        result.n_refine,
        result.v.segment_count()
    );
    println!("constraints: {:?}", result.constraints);
    println!("wrote {}", out.written.join(", "));
    Ok(())
}
