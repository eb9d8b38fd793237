use ftsos::poly::{monomial_basis, ParamPoly, Polynomial};
use ftsos::sos::{SosProgram};
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
    match prog.compile() {
        Ok(c) => {
            println!("compiled: blocks {:?}, rows {}", c.problem.blocks, c.problem.rows.len());
            let mut o = ftsos::sdp::SdpOptions::default();
            o.trace = true;
            let (feas, slack, sol) = ftsos::sdp::phase1(&c.problem, &o);
            println!("feas {feas} slack {slack} status {:?} dropped {} rp {:.2e} iters {}",
                sol.status, sol.dropped_rows, sol.primal_residual, sol.iterations);
        }
        Err(e) => println!("compile error: {e}"),
    }
}
