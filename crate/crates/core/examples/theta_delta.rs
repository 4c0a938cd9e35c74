//! δ as a function of θ in both regimes, against the two-case envelopes.

use dtnlab::dtn_map::phi_factor;
use dtnlab::entropy_nets::{theta_delta_solve, theta_window, Regime};

fn main() -> dtnlab::Result<()> {
    let alpha = 1.0;
    for (regime, k2) in [(Regime::High, 1.0), (Regime::High, 10.0), (Regime::Low, 0.5)] {
        println!("{} regime, κ² = {k2}, θ window (0, {:.4})", regime.name(), theta_window(regime, alpha));
        for theta in [1e-2, 1e-3, 1e-4, 1e-6] {
            let r = theta_delta_solve(theta, alpha, k2, regime, phi_factor(1.0, 1.0, k2))?;
            println!(
                "  θ={theta:.0e}  t={:>7.2}  δ={:.4e}  envelope {:.4e}  residual {:.1e}",
                r.t, r.delta, r.envelope, r.residual
            );
        }
    }
    Ok(())
}
