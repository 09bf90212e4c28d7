//! Sweeps n = 2..1024 and compares the butterfly stack with the direct DFT.

use butterfly_stft::cli::{verify_size, VerifyReport};

pub fn main() -> butterfly_stft::Result<()> {
    let trials = 100;
    println!("{:>5} {:>12} {:>12} {:>12}", "n", "oracle", "roundtrip", "parseval");
    let mut worst: Option<VerifyReport> = None;
    for k in 1..=10 {
        let r = verify_size(1 << k, trials, 0, None)?;
        println!("{:>5} {:>12.2e} {:>12.2e} {:>12.2e}", r.n, r.oracle_error, r.roundtrip_error, r.parseval_error);
        assert!(r.failures().is_empty(), "{r:?}");
        if worst.as_ref().is_none_or(|w| r.oracle_error > w.oracle_error) {
            worst = Some(r);
        }
    }
    let faulty = verify_size(64, 10, 0, Some(1e-3))?;
    println!("one twiddle off by 1e-3 at n=64: oracle error {:.2e}, failing {:?}", faulty.oracle_error, faulty.failures());
    Ok(())
}
