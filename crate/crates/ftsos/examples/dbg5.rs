use ftsos::certify::{certify_thm1, CertifyOptions};
use ftsos::system::parse_system;

fn main() {
    let sys = parse_system("system \"c\"\nvars x1\nx1' = -sgnpow(x1, 1/3)\n").unwrap();
    let mut opts = CertifyOptions::default();
    opts.sos.sdp.trace = true;
    match certify_thm1(&sys, 0.5, 2, &opts) {
        Ok((cert, _)) => println!("ok slack {}", cert.phase1_slack),
        Err(e) => println!("err {e}"),
    }
}
