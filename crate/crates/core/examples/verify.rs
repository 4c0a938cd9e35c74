//! The invariant suite with default settings; results go to out/verify.json.

use dtnlab::cli::{run_verify, VerifyConfig};

fn main() -> dtnlab::Result<()> {
    let out = run_verify(&VerifyConfig::default(), "out".as_ref())?;
    for g in &out.gates {
        println!("[{}] {}: {}", if g.passed { "pass" } else { "FAIL" }, g.name, g.detail);
    }
    Ok(())
}
