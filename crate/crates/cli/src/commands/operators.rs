//! `boxctrl operators dump`: every matrix entry in operators.csv.

use boxctrl::operators::{dilation_matrix, interaction_matrix, laplacian_matrix, momentum_matrix};
use boxctrl::{BasisTruncation, MotionParams};

use crate::config::{self, OperatorsConfig};
use crate::output::{num, OutputDir, Table};
use crate::{stamp, Context, Failure};

pub fn dump(ctx: &Context) -> Result<(), Failure> {
    let (cfg, sha256) = match &ctx.config {
        Some(path) => {
            let loaded = config::load::<OperatorsConfig>(path)?;
            (loaded.config, loaded.sha256)
        }
        None => (OperatorsConfig::default(), config::sha256_hex(b"")),
    };
    let n = BasisTruncation::new(cfg.truncation)?;
    let params = MotionParams::new(cfg.lambda, cfg.delta, 1.0, 0.0, 1.0)?;
    let lap = laplacian_matrix(n).matrix;
    let p = momentum_matrix(n).matrix;
    let xp = dilation_matrix(n).matrix;
    let v = interaction_matrix(&params, n).matrix;

    let mut table = Table::new(
        &stamp(&sha256, None),
        &[
            "j",
            "l",
            "laplacian",
            "p_re",
            "p_im",
            "xp_re",
            "xp_im",
            "v_re",
            "v_im",
        ],
    );
    for j in 0..n.dim() {
        for l in 0..n.dim() {
            let mut row = vec![
                (j + 1).to_string(),
                (l + 1).to_string(),
                num(lap[(j, l)].re),
            ];
            for z in [p[(j, l)], xp[(j, l)], v[(j, l)]] {
                row.push(num(z.re));
                row.push(num(z.im));
            }
            table.row(row);
        }
    }
    let mut out = OutputDir::create(&ctx.out)?;
    out.table("operators.csv", table)?;
    println!(
        "operators: N = {}, lambda = {}, delta = {}",
        n.dim(),
        cfg.lambda,
        cfg.delta
    );
    println!("wrote {}", out.written.join(", "));
    Ok(())
}
