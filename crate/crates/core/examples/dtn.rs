//! DtN matrix of a constant potential against the Bessel closed form, and of
//! an off-centre bump, which couples different degrees.

use dtnlab::dtn_map::assemble_dtn;
use dtnlab::forward_solver::SolverConfig;
use dtnlab::harmonics::{indices, HarmonicIndex};
use dtnlab::potentials::{BumpSpec, Potential};
use dtnlab::special::constant_dtn;
use num_complex::Complex64;

fn main() -> dtnlab::Result<()> {
    let cfg = SolverConfig::with_truncation(8, 12);
    let d = assemble_dtn(&Potential::constant(2.0), 1.0, &cfg)?;
    println!("constant q = 2, κ² = 1 ({:?})", d.solver_path);
    for m in 0..=8 {
        let i = HarmonicIndex::new(m, 1)?;
        let exact = constant_dtn(m, Complex64::new(3.0, 0.0));
        println!("  m={m}: {:+.10}  bessel {:+.10}", d.entries.get(i, i).re, exact.re);
    }

    let q = Potential::bump_sum(
        vec![BumpSpec { center: [0.25, 0.0], radius: 0.2, height: 4.0 }],
        0.5,
    )?;
    let d = assemble_dtn(&q, 1.0, &cfg)?;
    println!("off-centre bump ({:?}), largest off-diagonal entries:", d.solver_path);
    let mut off: Vec<_> = indices(3)
        .into_iter()
        .flat_map(|a| indices(3).into_iter().map(move |b| (a, b)))
        .filter(|(a, b)| a != b)
        .map(|(a, b)| (d.entries.get(a, b).norm(), a, b))
        .collect();
    off.sort_by(|x, y| y.0.total_cmp(&x.0));
    for (v, a, b) in off.iter().take(5) {
        println!("  ({},{}) <- ({},{}): {v:.3e}", a.m, a.j, b.m, b.j);
    }
    Ok(())
}
