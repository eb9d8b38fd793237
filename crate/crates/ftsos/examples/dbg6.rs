use ftsos::poly::Polynomial;
use ftsos::recast::recast;
use ftsos::system::parse_system;
use nalgebra::{DMatrix, DVector};

fn main() {
    let sys = parse_system("system \"c\"\nvars x1\nx1' = -sgnpow(x1, 1/3)\n").unwrap();
    let rs = recast(&sys).unwrap();
    println!("G1: {}", rs.g1.iter().map(|g| format!("{g}")).collect::<Vec<_>>().join("; "));
    println!("G2: {}", rs.g2.iter().map(|g| format!("{g}")).collect::<Vec<_>>().join("; "));
    println!("drift: {} | {}", rs.drift_num[0], rs.drift_num[1]);

    // rebuild the thm1 program pieces via the public API
    use ftsos::sos::SosProgram;
    use ftsos::poly::{monomial_basis, ParamPoly};
    let nx = 2;
    let mut prog = SosProgram::new(nx);
    let v = prog.add_poly_unknown("V", monomial_basis(nx, 2, 2));
    let denom = Polynomial::monomial(rs.common_denominator(), 1.0);
    let lie = prog.poly_linear_image(v, |m| rs.lie_image(m));
    let mut dec = lie.scale(-1.0).add_poly(&denom.scale(-0.5));
    for (k, g) in rs.g1.iter().enumerate() {
        let id = prog.add_poly_unknown(&format!("l{k}"), monomial_basis(nx, 2, 0));
        dec.add_assign(&prog.poly_param(id).mul_poly(g).scale(-1.0));
    }
    for g in rs.g2.iter() {
        let id = prog.add_sos_multiplier("s", 2, None);
        dec.add_assign(&prog.mult_param(id).mul_poly(g).scale(-1.0));
    }
    prog.add_constraint("dec", dec);
    let compiled = prog.compile().unwrap();
    let p = &compiled.problem;
    println!("blocks {:?} nfree {} rows {}", p.blocks, p.nfree, p.rows.len());

    // least-squares consistency over (flattened entries, frees)
    let mut colset = std::collections::BTreeSet::new();
    for r in &p.rows {
        for &(b, i, j, _) in &r.entries { colset.insert((0usize, b, i, j)); }
        for &(f, _) in &r.free { colset.insert((1usize, f, 0, 0)); }
    }
    let cols: std::collections::BTreeMap<_, usize> =
        colset.into_iter().enumerate().map(|(k, c)| (c, k)).collect();
    let ncols = cols.len();
    let m = p.rows.len();
    let mut a = DMatrix::<f64>::zeros(m, ncols);
    let mut b = DVector::<f64>::zeros(m);
    for (r, row) in p.rows.iter().enumerate() {
        for &(bq, i, j, v) in &row.entries {
            let c = cols[&(0usize, bq, i, j)];
            a[(r, c)] += if i == j { v } else { 2.0 * v };
        }
        for &(f, v) in &row.free { a[(r, cols[&(1usize, f, 0, 0)])] += v; }
        b[r] = row.rhs;
    }
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-12).unwrap();
    let resid = (&a * x - &b).norm();
    println!("least-squares residual {resid:.3e} (inconsistent if >> 0)");
}
