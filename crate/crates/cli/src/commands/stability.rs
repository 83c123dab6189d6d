//! `boxctrl stability`: convergence.csv, bounds.csv, constants.json, report.json.

use boxctrl::control::lift_control;
use boxctrl::propagation::{BoxModel, PiecewiseControl};
use boxctrl::stability::{
    compute_uniform_constants, lifting_convergence_study, verify_stability_bound,
    CoefficientFamily, Comparison,
};
use boxctrl::{BasisTruncation, BoxGeometry, MotionParams};
use serde::Serialize;

use crate::config::{self, StabilityConfig};
use crate::output::{num, OutputDir, Table};
use crate::{stamp, Context, Failure};

#[derive(Serialize)]
struct Report<'a> {
    command: &'static str,
    version: &'static str,
    config_sha256: &'a str,
    errors: &'a [(usize, f64)],
    slope: Option<f64>,
    bound_lift: usize,
    bound_holds: bool,
    worst_ratio: f64,
    violations: usize,
    outputs: Vec<String>,
}

pub fn run(ctx: &Context) -> Result<(), Failure> {
    let loaded = config::load::<StabilityConfig>(ctx.config_path()?)?;
    let cfg = &loaded.config;
    if cfg.bound_lift == 0 {
        return Err(Failure::invalid("bound_lift must be positive"));
    }
    let params = MotionParams::new(cfg.lambda, cfg.delta, cfg.ell0, 0.0, cfg.rate_bound)?;
    let n = BasisTruncation::new(cfg.truncation)?;
    let stepping = cfg.integrator.stepping()?;
    let v = PiecewiseControl::uniform_constant(cfg.horizon, cfg.controls.clone())?;
    let model = BoxModel::new(params, n);
    let psi = cfg.initial.build(n, BoxGeometry::new(cfg.ell0, 0.0)?)?;

    let study = lifting_convergence_study(&model, &v, &psi, &cfg.n_list, stepping, ctx.execution)?;
    let families = [
        CoefficientFamily::auxiliary(&params, &v)?,
        CoefficientFamily::moving_box(&params, &lift_control(&v, cfg.bound_lift)?)?,
    ];
    let constants = compute_uniform_constants(&families, cfg.epsilon)?;
    let checks = [
        ("auxiliary".to_string(), Comparison::Auxiliary),
        (
            format!("lifted-{}", 2 * cfg.bound_lift),
            Comparison::Lifted(2 * cfg.bound_lift),
        ),
    ]
    .into_iter()
    .map(|(name, other)| {
        verify_stability_bound(
            &model,
            &v,
            cfg.bound_lift,
            other,
            &psi,
            cfg.epsilon,
            stepping,
        )
        .map(|c| (name, c))
    })
    .collect::<Result<Vec<_>, _>>()?;

    let stamp = stamp(&loaded.sha256, None);
    let mut out = OutputDir::create(&ctx.out)?;
    let mut convergence = Table::new(&stamp, &["n", "error"]);
    for &(k, e) in &study.rows {
        convergence.row([k.to_string(), num(e)]);
    }
    out.table("convergence.csv", convergence)?;

    let mut bounds = Table::new(
        &stamp,
        &[
            "comparison",
            "t0",
            "t1",
            "lhs",
            "rhs",
            "coefficient_l1",
            "L",
        ],
    );
    for (name, check) in &checks {
        for s in &check.segments {
            let mut row = vec![name.clone()];
            row.extend(
                [s.t0, s.t1, s.lhs, s.rhs, s.coefficient_l1, s.l]
                    .iter()
                    .map(|&x| num(x)),
            );
            bounds.row(row);
        }
    }
    out.table("bounds.csv", bounds)?;
    out.json("constants.json", &constants)?;

    let violations = checks
        .iter()
        .flat_map(|(_, c)| &c.segments)
        .filter(|s| !s.holds())
        .count();
    let worst_ratio = checks
        .iter()
        .map(|(_, c)| c.worst_ratio())
        .fold(0.0, f64::max);
    let mut outputs = out.written.clone();
    outputs.push(ctx.out.join("report.json").display().to_string());
    let report = Report {
        command: "stability",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: &loaded.sha256,
        errors: &study.rows,
        slope: study.slope,
        bound_lift: cfg.bound_lift,
        bound_holds: violations == 0,
        worst_ratio,
        violations,
        outputs,
    };
    out.json("report.json", &report)?;

    let errors: Vec<String> = study
        .rows
        .iter()
        .map(|(k, e)| format!("{k}: {}", num(*e)))
        .collect();
    println!("lifting errors: {}", errors.join(", "));
    match study.slope {
        Some(s) => println!("fitted log-log slope: {s:.4}"),
        None => println!("fitted log-log slope: undefined (zero errors)"),
    }
    println!(
        "constants: M = {}, mu = {}, c = {}, K = {}, L = {}",
        num(constants.sup_coefficient),
        num(constants.mu),
        num(constants.c),
        num(constants.k),
        num(constants.l)
    );
    println!(
        "stability bound: {violations} violations, worst lhs/rhs = {}",
        num(worst_ratio)
    );
    println!("wrote {}", out.written.join(", "));
    if violations > 0 {
        return Err(Failure {
            code: 2,
            message: format!("stability bound violated on {violations} segments"),
        });
    }
    Ok(())
}
