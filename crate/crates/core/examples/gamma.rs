//! Γ(q; i) from boundary data and from the two volume forms, and the
//! weighted-SVD versus X_s norms.

use dtnlab::cli::relative_difference;
use dtnlab::dtn_map::{gamma_boundary, gamma_volume};
use dtnlab::forward_solver::SolverConfig;
use dtnlab::harmonics::{op_norm_s_to_minus_s, x_s_norm};
use dtnlab::potentials::{BumpSpec, Potential};

fn main() -> dtnlab::Result<()> {
    let q = Potential::bump_sum(
        vec![
            BumpSpec { center: [0.2, 0.1], radius: 0.2, height: 1.0 },
            BumpSpec { center: [-0.2, -0.1], radius: 0.2, height: -0.5 },
        ],
        0.5,
    )?;
    let cfg = SolverConfig::with_truncation(16, 16);
    let kappa2 = 4.0;
    let b = gamma_boundary(&q, 1.0, kappa2, &cfg)?;
    let v = gamma_volume(&q, 1.0, kappa2, &cfg)?;
    let l = v.l_form.as_ref().expect("volume Γ carries the L form");
    println!("boundary vs I form: {:.2e}", relative_difference(&b.entries, &v.entries, 1e-3)?);
    println!("I form vs L form:   {:.2e}", relative_difference(&v.entries, l, 1e-3)?);

    let s = 3.0;
    let svd = op_norm_s_to_minus_s(&v.entries, s)?;
    let xs = x_s_norm(&v.entries, s);
    println!("‖Γ‖_(s→-s) = {svd:.4e}, 4√2‖Γ‖_Xs = {:.4e}", 4.0 * 2f64.sqrt() * xs);
    Ok(())
}
