// probe: replicate phase1 construction and inspect presolve internals
use ftsos::poly::{monomial_basis, ParamPoly, Polynomial};
use ftsos::sos::SosProgram;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut p = Polynomial::zero(2);
    for _ in 0..3 {
        let q = Polynomial::from_terms(
            2,
            monomial_basis(2, 3, 0).into_iter().map(|m| (m, rng.gen_range(-1.0..1.0))),
        );
        p = p.add(&q.mul(&q));
    }
    let mut prog = SosProgram::new(2);
    prog.add_constraint("sos", ParamPoly::from_poly(&p));
    let c = prog.compile().unwrap();
    // plain solve (no phase1): should be feasibility only, no objective
    let sol = ftsos::sdp::solve(&c.problem, &ftsos::sdp::SdpOptions::default());
    println!("plain solve: status {:?} dropped {} rp {:.2e}", sol.status, sol.dropped_rows, sol.primal_residual);
}
