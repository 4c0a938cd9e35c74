//! One forward solve: a bump potential, Dirichlet datum Y_{2,1}, profile of u
//! along the positive x-axis.

use dtnlab::forward_solver::{solve_galerkin, RadialBasis, SolverConfig};
use dtnlab::harmonics::HarmonicIndex;
use dtnlab::potentials::{BumpSpec, Potential};

fn main() -> dtnlab::Result<()> {
    let q = Potential::bump_sum(
        vec![BumpSpec { center: [0.15, 0.1], radius: 0.3, height: 1.0 }],
        0.5,
    )?;
    let cfg = SolverConfig::with_truncation(16, 16);
    let datum = HarmonicIndex::new(2, 1)?;
    let sol = solve_galerkin(&q, 1.0, 1.0, datum, &cfg)?;
    println!("method {:?}, residual {:.2e}, trace error {:.2e}", sol.method, sol.residual, sol.trace_error);

    let basis = RadialBasis::new(&cfg)?;
    for r in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let u = sol.eval(&basis, r, 0.0);
        println!("u({r:.2}, 0) = {:+.6} {:+.6}i   (free: {:+.6})", u.re, u.im, r * r / std::f64::consts::PI.sqrt());
    }
    Ok(())
}
