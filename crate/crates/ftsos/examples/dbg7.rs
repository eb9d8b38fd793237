use ftsos::poly::{monomial_basis, Polynomial};
use ftsos::recast::recast;
use ftsos::sos::SosProgram;
use ftsos::system::parse_system;

fn main() {
    let sys = parse_system("system \"c\"\nvars x1\nx1' = -sgnpow(x1, 1/3)\n").unwrap();
    let rs = recast(&sys).unwrap();
    let nx = 2;
    let c = 0.5;
    let cap = 2u32;

    let mut prog = SosProgram::new(nx);
    let v = prog.add_poly_unknown("V", monomial_basis(nx, 2, 2));
    let l1 = {
        // eps (x^2 + x^4) pattern per variable, deg 2 -> j=1 only
        let mut p = Polynomial::zero(nx);
        for i in 0..nx {
            let mut e = vec![0u16; nx]; e[i] = 2;
            p.add_term(ftsos::poly::Monomial(e), 1e-6);
        }
        p
    };
    // positivity
    let g_deg = rs.g1.iter().chain(rs.g2.iter()).map(|g| g.degree()).max().unwrap_or(0);
    let d_pos = (2u32.max(l1.degree()).max(g_deg) + 1) & !1;
    let mut pos = prog.poly_param(v).add_poly(&l1.neg());
    for (k, g) in rs.g1.iter().enumerate() {
        let deg = d_pos.saturating_sub(g.degree()).min(cap);
        let id = prog.add_poly_unknown(&format!("lp{k}"), monomial_basis(nx, deg, 0));
        pos.add_assign(&prog.poly_param(id).mul_poly(g).scale(-1.0));
    }
    for (k, g) in rs.g2.iter().enumerate() {
        let deg = (d_pos.saturating_sub(g.degree()).min(cap)) & !1;
        let id = prog.add_sos_multiplier(&format!("sp{k}"), deg, None);
        pos.add_assign(&prog.mult_param(id).mul_poly(g).scale(-1.0));
    }
    prog.add_constraint("positivity", pos);

    // decrease
    let denom = Polynomial::monomial(rs.common_denominator(), 1.0);
    let lie = prog.poly_linear_image(v, |m| rs.lie_image(m));
    let d_lie = lie.support().map(|m| m.degree()).max().unwrap(). max(denom.degree());
    let d_dec = (d_lie.max(g_deg) + 1) & !1;
    let mut dec = lie.scale(-1.0).add_poly(&denom.scale(-c));
    for (k, g) in rs.g1.iter().enumerate() {
        let deg = d_dec.saturating_sub(g.degree()).min(cap);
        let id = prog.add_poly_unknown(&format!("ld{k}"), monomial_basis(nx, deg, 0));
        dec.add_assign(&prog.poly_param(id).mul_poly(g).scale(-1.0));
    }
    for (k, g) in rs.g2.iter().enumerate() {
        let deg = (d_dec.saturating_sub(g.degree()).min(cap)) & !1;
        let id = prog.add_sos_multiplier(&format!("sd{k}"), deg, None);
        dec.add_assign(&prog.mult_param(id).mul_poly(g).scale(-1.0));
    }
    let ball = {
        let mut p = Polynomial::zero(nx);
        for i in 0..nx { let mut e = vec![0u16; nx]; e[i] = 2; p.add_term(ftsos::poly::Monomial(e), 1.0); }
        p.add(&Polynomial::constant(nx, -1e-6))
    };
    let sr = prog.add_sos_multiplier("sr", (d_dec.saturating_sub(2).min(cap)) & !1, None);
    dec.add_assign(&prog.mult_param(sr).mul_poly(&ball).scale(-1.0));
    prog.add_constraint("decrease", dec);

    let compiled = prog.compile().unwrap();
    println!("blocks {:?} nfree {} rows {}", compiled.problem.blocks, compiled.problem.nfree, compiled.problem.rows.len());
    let mut opts = ftsos::sdp::SdpOptions::default(); opts.trace = true; 
    let (feas, slack, sol) = ftsos::sdp::phase1(&compiled.problem, &opts);
    println!("feas {feas} slack {slack:.4e} status {:?} dropped {} rp {:.2e} iters {}",
        sol.status, sol.dropped_rows, sol.primal_residual, sol.iterations);
}
