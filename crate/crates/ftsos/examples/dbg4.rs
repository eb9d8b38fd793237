use ftsos::poly::{monomial_basis, ParamPoly, Polynomial};
use ftsos::sos::{check_sos, SosCheck, SosOptions, SosProgram, GramCertificate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for trial in 0..10 {
        let mut p = Polynomial::zero(2);
        for _ in 0..3 {
            let q = Polynomial::from_terms(
                2,
                monomial_basis(2, 3, 0).into_iter().map(|m| (m, rng.gen_range(-1.0..1.0))),
            );
            p = p.add(&q.mul(&q));
        }
        // replicate check_sos with diagnostics
        let mut prog = SosProgram::new(2);
        prog.add_constraint("sos", ParamPoly::from_poly(&p));
        let c = prog.compile().unwrap();
        let (feas, slack, sol) = ftsos::sdp::phase1(&c.problem, &ftsos::sdp::SdpOptions::default());
        let bk = c.constraint_block[0].unwrap();
        let cert = GramCertificate::build("sos", &c.constraint_basis[0], sol.blocks[bk].clone(), &p, slack);
        println!("trial {trial}: feas {feas} slack {slack:+.3e} status {:?} resid {:.3e} mineig {:+.3e} verify {:?}",
            sol.status, cert.residual, cert.min_eig, cert.verify(&p, &SosOptions::default()).err());
        match check_sos(&p, &SosOptions::default()).unwrap() {
            SosCheck::Feasible(_) => {}
            SosCheck::Infeasible { slack } => println!("   -> REJECTED slack {slack}"),
        }
    }
}
