//! Envelope fit on a scan CSV (the scan example output by default, or the first argument).

use dtnlab::instability_lab::{envelope_shape, fit_envelope, read_csv_file};

fn main() -> dtnlab::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "out/scan-example/scan.csv".into());
    let records = read_csv_file(path.as_ref())?;
    let f = fit_envelope(&records)?;
    println!("C_R = {:.4e}, c0 = {:.4e}, log rms {:.3}", f.c_r, f.c0, f.log_rms);
    println!("{} records, {} above the envelope", f.n_records, f.violations.len());
    for r in records.iter().filter(|r| r.is_ok()).step_by(7) {
        let e = f.c_r * envelope_shape(f.c0, r.kappa2, r.theta, r.alpha);
        println!("θ={:.0e} κ²={:>8.4}  measured {:.3e}  envelope {:.3e}", r.theta, r.kappa2, r.dist_svd, e);
    }
    Ok(())
}
