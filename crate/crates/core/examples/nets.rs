//! Net parameters across δ in both regimes, and the smallest η with
//! log|Y| ≤ η·shape.

use dtnlab::dtn_map::phi_factor;
use dtnlab::entropy_nets::{build_net_spec, fit_eta, NetParams, Regime};

fn main() -> dtnlab::Result<()> {
    let p = NetParams::default();
    println!("regime  κ²     δ          ℓ*   ℓ1+ℓ2   log|Y|");
    for (regime, k2) in [(Regime::Low, 0.1), (Regime::High, 2.0), (Regime::High, 20.0)] {
        let phi = match regime {
            Regime::High => phi_factor(p.sup_bound, 1.0, k2),
            Regime::Low => 1.0,
        };
        for frac in [0.5, 0.05, 0.005] {
            let s = build_net_spec(frac * phi, regime, k2, &p)?;
            println!(
                "{:<6}  {k2:<5}  {:<9.3e}  {:<4} {:<7.1} {:.3e}",
                regime.name(),
                s.delta,
                s.ell_star,
                s.ell1 + s.ell2,
                s.log_card
            );
        }
    }
    let fracs = [0.5, 0.1, 0.01, 1e-3];
    for (regime, ks) in [(Regime::High, vec![0.5, 5.0, 50.0]), (Regime::Low, vec![0.01, 0.1, 1.0])] {
        let f = fit_eta(regime, &p, &fracs, &ks)?;
        println!("{}: η = {:.3} over {} samples", regime.name(), f.eta, f.samples);
    }
    Ok(())
}
