//! Quantizes Γ for every member of a 6-bump family and groups equal cells.
//! Members in one cell are within 8√2δ of each other in DtN distance.

use dtnlab::dtn_map::{gamma_from_forms, GammaEngine};
use dtnlab::entropy_nets::{build_net_spec, pigeonhole_search, NetParams, Regime};
use dtnlab::forward_solver::SolverConfig;
use dtnlab::potentials::build_discrete_family;

fn main() -> dtnlab::Result<()> {
    let kappa2 = 0.2;
    let regime = Regime::Low;
    let fam = build_discrete_family(1e-2, 1.0, 0.5, 6)?;
    let spec = build_net_spec(0.05, regime, kappa2, &NetParams::default())?;
    let engine = GammaEngine::new(&SolverConfig::with_truncation(12, 12), regime.q_ref_shift(), kappa2)?;
    let gammas = fam
        .members
        .iter()
        .map(|q| Ok(gamma_from_forms(engine.volume(&engine.operator(q)?)?, kappa2, 0.0)))
        .collect::<dtnlab::Result<Vec<_>>>()?;
    let r = pigeonhole_search(&fam, &spec, &gammas)?;
    let mut cells = r.hashes.clone();
    cells.sort_unstable();
    cells.dedup();
    println!("{} members in {} cells, ℓ* = {}, step {:.3e}", r.family_size, cells.len(), spec.ell_star, spec.step);
    println!("log|Z| = {:.2}, log|Y| = {:.3e}, collision forced: {}", r.log_family_size, r.log_net_size, r.collision_forced);
    let worst = r.collisions.iter().map(|c| c.distance).fold(0.0, f64::max);
    println!("{} colliding pairs, largest distance {worst:.3e} ≤ {:.3e}", r.collisions.len(), r.collision_bound);
    if let Some(p) = r.min_pair {
        println!("closest pair ({}, {}) at {:.3e}", p.a, p.b, p.svd);
    }
    Ok(())
}
