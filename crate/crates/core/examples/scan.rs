//! A reduced frequency scan: two θ values, six κ² values, four bumps.
//! Writes scan.csv, scan.json and two SVG plots to out/scan-example.

use dtnlab::instability_lab::{emit_outputs, fit_envelope, log_space, run_scan, truncation_gate, ScanConfig};
use dtnlab::forward_solver::SolverConfig;

fn main() -> dtnlab::Result<()> {
    let cfg = ScanConfig {
        thetas: vec![1e-2, 1e-3],
        kappa2: log_space(0.05, 50.0, 6),
        n_bumps: 4,
        solver: SolverConfig::with_truncation(16, 12),
        ..ScanConfig::default()
    };
    cfg.validate()?;
    let records = run_scan(&cfg)?;
    for r in &records {
        println!(
            "θ={:.0e} κ²={:>8.4} {:<4} pair ({:>2},{:>2}) dist {:.4e}",
            r.theta,
            r.kappa2,
            r.regime.name(),
            r.member_a,
            r.member_b,
            r.dist_svd
        );
    }
    let fit = fit_envelope(&records).ok();
    let gates = truncation_gate(&cfg, &records)?;
    let m = emit_outputs(&records, &cfg, fit.as_ref(), &gates, "out/scan-example".as_ref())?;
    for f in m.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
