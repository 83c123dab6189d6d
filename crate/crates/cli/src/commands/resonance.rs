//! `boxctrl resonance`: spectrum.csv, resonances.txt, report.json.

use boxctrl::resonance::{
    certify_chain, find_resonances_at_zero, scan_for_nonresonant_eta, spectrum_vs_eta,
    ChainCertificate, ScanOutcome,
};
use boxctrl::{BasisTruncation, MotionParams};
use serde::Serialize;

use crate::config::{self, ResonanceConfig};
use crate::output::{num, OutputDir, Table};
use crate::{stamp, Context, Failure};

/// Without dilation every level moves by the same `-delta^2 eta^2 / 4`.
#[derive(Serialize)]
struct UniformShift {
    max_shift_deviation: f64,
    max_gap_variation: f64,
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'static str,
    version: &'static str,
    config_sha256: &'a str,
    lambda: f64,
    delta: f64,
    truncation: usize,
    max_index: usize,
    integer_resonances: usize,
    certificate: &'a ChainCertificate,
    certified: bool,
    scan: Option<&'a ScanOutcome>,
    uniform_shift: Option<UniformShift>,
    outputs: Vec<String>,
}

pub fn run(ctx: &Context) -> Result<(), Failure> {
    let loaded = config::load::<ResonanceConfig>(ctx.config_path()?)?;
    let cfg = &loaded.config;
    let params = MotionParams::new(cfg.lambda, cfg.delta, 1.0, 0.0, 1.0)?;
    let n = BasisTruncation::new(cfg.truncation)?;
    let grid_cfg = &cfg.spectrum;
    if grid_cfg.points < 2
        || grid_cfg.eta_max.is_nan()
        || grid_cfg.eta_max <= 0.0
        || grid_cfg.modes == 0
        || grid_cfg.modes > n.dim()
    {
        return Err(Failure::invalid(format!(
            "spectrum needs points >= 2, eta_max > 0 and 1 <= modes <= {}",
            n.dim()
        )));
    }

    let integer = find_resonances_at_zero(n, cfg.max_index)?;
    let grid: Vec<f64> = (0..grid_cfg.points)
        .map(|k| grid_cfg.eta_max * k as f64 / (grid_cfg.points - 1) as f64)
        .collect();
    let spectrum = spectrum_vs_eta(&params, &grid, n, ctx.execution)?;
    let certificate = certify_chain(
        &params,
        cfg.eta,
        n,
        cfg.max_index,
        cfg.tolerance,
        ctx.execution,
    )?;
    let scan = match &cfg.scan {
        Some(s) => Some(scan_for_nonresonant_eta(
            &params,
            s.eta_max,
            s.grid_size,
            n,
            s.max_index.unwrap_or(cfg.max_index),
            cfg.tolerance,
            ctx.execution,
        )?),
        None => None,
    };
    let uniform_shift = (cfg.lambda == 0.0).then(|| {
        let mut shift: f64 = 0.0;
        let mut gaps: f64 = 0.0;
        for (g, eta) in grid.iter().enumerate() {
            let e = &spectrum.eigenvalues[g];
            let e0 = &spectrum.eigenvalues[0];
            for j in 0..grid_cfg.modes {
                shift = shift.max((e[j] - e0[j] + cfg.delta * cfg.delta * eta * eta / 4.0).abs());
                for k in 0..j {
                    gaps = gaps.max(((e[j] - e[k]) - (e0[j] - e0[k])).abs());
                }
            }
        }
        UniformShift {
            max_shift_deviation: shift,
            max_gap_variation: gaps,
        }
    });

    let stamp = stamp(&loaded.sha256, None);
    let mut out = OutputDir::create(&ctx.out)?;
    let mut header = vec!["eta".to_string()];
    header.extend((1..=grid_cfg.modes).map(|j| format!("E{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&stamp, &header);
    for (g, eta) in grid.iter().enumerate() {
        let mut row = vec![*eta];
        row.extend_from_slice(&spectrum.eigenvalues[g][..grid_cfg.modes]);
        table.numbers(&row);
    }
    out.table("spectrum.csv", table)?;

    let mut text = format!(
        "# {stamp}\n# integer resonances at eta = 0, indices <= {}: s1 s2 t1 t2 gap\n",
        cfg.max_index
    );
    for q in &integer.quadruples {
        text.push_str(&format!(
            "{} {} {} {} {}\n",
            q.s1,
            q.s2,
            q.t1,
            q.t2,
            q.s2 * q.s2 - q.s1 * q.s1
        ));
    }
    let status = certificate_status(&certificate);
    text.push_str(&format!("# certificate: {status}\n"));
    for q in &certificate.report.quadruples {
        text.push_str(&format!(
            "# unresolved at eta = {}: {} {} {} {} mismatch {}\n",
            num(certificate.eta),
            q.s1,
            q.s2,
            q.t1,
            q.t2,
            num(q.mismatch)
        ));
    }
    if let Some(s) = &scan {
        text.push_str(&format!("# scan: {}\n", scan_status(s)));
    }
    if let Some(u) = &uniform_shift {
        text.push_str(&format!(
            "# uniform shift: max |E_j(eta) - E_j(0) + delta^2 eta^2 / 4| = {}, max gap variation = {}\n",
            num(u.max_shift_deviation),
            num(u.max_gap_variation)
        ));
    }
    out.write("resonances.txt", text.as_bytes())?;

    let mut outputs = out.written.clone();
    outputs.push(ctx.out.join("report.json").display().to_string());
    let report = Report {
        command: "resonance",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: &loaded.sha256,
        lambda: cfg.lambda,
        delta: cfg.delta,
        truncation: n.dim(),
        max_index: cfg.max_index,
        integer_resonances: integer.quadruples.len(),
        certificate: &certificate,
        certified: certificate.certified(),
        scan: scan.as_ref(),
        uniform_shift,
        outputs,
    };
    out.json("report.json", &report)?;

    println!(
        "resonance: {} integer quadruples with indices <= {}",
        integer.quadruples.len(),
        cfg.max_index
    );
    println!("certificate: {status}");
    if let Some(s) = &scan {
        println!("scan: {}", scan_status(s));
    }
    if let Some(u) = &report.uniform_shift {
        println!(
            "uniform shift: deviation {}, gap variation {}",
            num(u.max_shift_deviation),
            num(u.max_gap_variation)
        );
    }
    println!("wrote {}", out.written.join(", "));
    Ok(())
}

fn certificate_status(c: &ChainCertificate) -> String {
    format!(
        "eta = {}, connected = {}, resonances = {}, weakest coupling = {}, certified = {}",
        num(c.eta),
        c.connected,
        c.report.quadruples.len(),
        num(c.weakest_coupling),
        c.certified()
    )
}

fn scan_status(s: &ScanOutcome) -> String {
    match s {
        ScanOutcome::NotFound => "NotFound".into(),
        ScanOutcome::Found(c) => format!("Found eta = {} ({})", num(c.eta), certificate_status(c)),
    }
}
