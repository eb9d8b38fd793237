use ftsos::certify::{certify_cor1, CertifyOptions, WChoice};
use ftsos::system::parse_system;
use std::time::Instant;

fn main() {
    let sys = parse_system("system \"c\"\nvars x1\nx1' = -sgnpow(x1, 1/3)\n").unwrap();
    let t0 = Instant::now();
    match certify_cor1(&sys, &WChoice::State, 2, 3, (0.0, 4.0), 1e-4, 1e-3, &CertifyOptions::default()) {
        Ok((cert, _rs)) => println!(
            "cor1: c_eff {:.6} alpha {:.4} slack {:.2e} in {:?}",
            cert.c, cert.alpha, cert.phase1_slack, t0.elapsed()
        ),
        Err(e) => println!("cor1 err: {e} ({:?})", t0.elapsed()),
    }
}
