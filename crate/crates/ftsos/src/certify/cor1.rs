//! Quadratic-form certification: `V = w(x)^T Q w(x)` with `Q` positive
//! definite, maximizing the constant `c` in the cleared decrease
//! condition `-(Vdot_num + c Mhat^p D)` on the manifold, where the slack
//! `Mhat = (w^T w)^(1/q)` is adjoined through `Mhat^q = w^T w`,
//! `Mhat >= 0`. The certified exponent is `alpha = p/q`, and `c` enters
//! affinely, so the maximization runs as a bisection over feasibility
//! programs.

use super::*;
use crate::recast::{recast, RecastSystem};
use crate::sos::{solve_feasible, SosProgram};
use crate::system::DynSystem;

/// Coordinate map for the quadratic form.
#[derive(Debug, Clone)]
pub enum WChoice {
    /// The original state variables.
    State,
    /// The recast drift numerators of the original states.
    Field,
    /// Caller-supplied polynomials over the recast variables.
    Custom(Vec<Polynomial>),
}

#[allow(clippy::too_many_arguments)]
pub fn certify_cor1(
    sys: &DynSystem,
    w_choice: &WChoice,
    p: u32,
    q: u32,
    c_bracket: (f64, f64),
    c_tol: f64,
    eps_q: f64,
    opts: &CertifyOptions,
) -> Result<(Certificate, RecastSystem), CertifyError> {
    if !(q > p && p >= 1) {
        return Err(CertifyError::Invalid(format!(
            "exponents must satisfy q > p >= 1, got p = {p}, q = {q}"
        )));
    }
    let rs = recast(sys)?;
    let nx = rs.nvars();
    let nv = nx + 1; // Mhat is the last ambient variable
    let mhat = Polynomial::var(nv, nx);

    let w: Vec<Polynomial> = match w_choice {
        WChoice::State => (0..rs.norig()).map(|i| Polynomial::var(nx, i)).collect(),
        WChoice::Field => (0..rs.norig()).map(|i| rs.drift_num[i].clone()).collect(),
        WChoice::Custom(ws) => ws.clone(),
    };
    let nw = w.len();
    if nw == 0 {
        return Err(CertifyError::Invalid("empty coordinate map".into()));
    }

    // cleared Lie numerators of the pairwise products w_i w_j
    let denom = pad_vars(&Polynomial::monomial(rs.common_denominator(), 1.0), nv);
    let mut lie_pairs = vec![vec![Polynomial::zero(nv); nw]; nw];
    for i in 0..nw {
        for j in i..nw {
            let num = rs
                .lie_derivative(&w[i].mul(&w[j]))
                .expect("arity")
                .numerator;
            let num = pad_vars(&num, nv);
            lie_pairs[i][j] = num.clone();
            lie_pairs[j][i] = num;
        }
    }

    let wtw = {
        let mut s = Polynomial::zero(nv);
        for wi in &w {
            let wi = pad_vars(wi, nv);
            s = s.add(&wi.mul(&wi));
        }
        s
    };
    // slack manifold: Mhat^q = w^T w, Mhat >= 0
    let g1_m = mhat.pow(q).sub(&wtw);

    let solve_at = |c: f64, reverify: bool| -> Result<Option<(SosProgram, crate::sos::Extraction, f64, crate::sos::MultId)>, CertifyError> {
        let mut prog = SosProgram::new(nv);
        // Q = P + eps_q I with P a PSD block over the w coordinates
        let p_block = prog.add_sos_multiplier_dim("Q_shift", nw);

        // Vdot numerator: sum_(i<=j) (2 - delta) P_ij Lie(w_i w_j)
        //                 + eps_q sum_i Lie(w_i^2)
        let mut vdot = prog.psd_block_param(p_block, |i, j| {
            lie_pairs[i][j].scale(if i == j { 1.0 } else { 2.0 })
        });
        for i in 0..nw {
            vdot.add_assign(&ParamPoly::from_poly(&lie_pairs[i][i].scale(eps_q)));
        }

        let decrease_term = mhat.pow(p).mul(&denom).scale(c);
        let mut expr = vdot.scale(-1.0).add_poly(&decrease_term.neg());

        let fixed_deg = expr
            .support()
            .map(|m| m.degree())
            .max()
            .unwrap_or(0)
            .max(g1_m.degree())
            .max(
                rs.g1
                    .iter()
                    .chain(rs.g2.iter())
                    .map(|g| g.degree())
                    .max()
                    .unwrap_or(0),
            );
        let d_target = even_up(fixed_deg) + 2;
        let cap = opts.mult_deg_cap.unwrap_or(d_target);

        let mm = attach_manifold(&mut prog, &rs, &mut expr, d_target, cap, "dec");
        // Mhat members
        let lam_m = prog.add_poly_unknown(
            "lambda_m",
            crate::poly::monomial_basis(nv, d_target.saturating_sub(g1_m.degree()).min(cap), 0),
        );
        expr.add_assign(&prog.poly_param(lam_m).mul_poly(&g1_m).scale(-1.0));
        let sig_m = prog.add_sos_multiplier(
            "sigma_m",
            even_down(d_target.saturating_sub(1).min(cap)),
            None,
        );
        expr.add_assign(&prog.mult_param(sig_m).mul_poly(&mhat).scale(-1.0));
        prog.add_constraint("decrease", expr);

        // trace normalization: trace(Q) = nw
        let coeffs: Vec<(usize, f64)> = (0..nw)
            .map(|i| (prog.psd_block_entry_id(p_block, i, i), 1.0))
            .collect();
        prog.add_linear_constraint(coeffs, nw as f64 * (1.0 - eps_q));

        let compiled = prog.compile()?;
        let (slack, ext) = solve_feasible(&prog, &compiled, &opts.sos, reverify)?;
        let _ = mm;
        if std::env::var("FTSOS_COR1_DEBUG").is_ok() {
            eprintln!(
                "cor1 c={c:.5}: slack {slack:.3e} extracted={} blocks {:?} rows {}",
                ext.is_some(),
                compiled.problem.blocks,
                compiled.problem.rows.len()
            );
        }
        Ok(ext.map(|e| (prog, e, slack, p_block)))
    };

    // bisection (probes skip the expensive re-verification): largest
    // feasible c in the bracket
    let (mut lo, mut hi) = c_bracket;
    if solve_at(lo, false)?.is_none() {
        return Err(CertifyError::Infeasible {
            slack: f64::NEG_INFINITY,
        });
    }
    if solve_at(hi, false)?.is_some() {
        lo = hi;
    } else {
        while hi - lo > c_tol * (1.0 + hi) {
            let mid = 0.5 * (lo + hi);
            match solve_at(mid, false)? {
                Some(_) => lo = mid,
                None => hi = mid,
            }
        }
    }
    // final verified solve; back off a step if the boundary is fragile
    let mut chosen = None;
    for _ in 0..4 {
        if let Some(s) = solve_at(lo, opts.reverify)? {
            chosen = Some(s);
            break;
        }
        lo -= c_tol * (1.0 + lo);
    }
    let Some((prog, ext, slack, p_block)) = chosen else {
        return Err(CertifyError::Fragile(
            "no verifiable decrease constant near the bisection boundary".into(),
        ));
    };

    // assemble V = w^T Q w over the recast variables
    let qmat = prog.psd_block_matrix(p_block, &ext.values);
    let mut v = Polynomial::zero(nx);
    let mut lam_max: f64 = 0.0;
    {
        let mut qfull = qmat.clone();
        for i in 0..nw {
            qfull[(i, i)] += eps_q;
        }
        for i in 0..nw {
            for j in 0..nw {
                v = v.add(&w[i].mul(&w[j]).scale(qfull[(i, j)]));
            }
        }
        lam_max = lam_max.max(qfull.symmetric_eigen().eigenvalues.max());
    }

    let alpha = p as f64 / q as f64;
    // Vdot <= -c (w^T w)^(p/q) <= -(c / lam_max^alpha) V^alpha
    let c_eff = lo / lam_max.powf(alpha);

    Ok((
        Certificate {
            method: Method::Cor1,
            system: sys.name.clone(),
            v,
            c: c_eff,
            alpha,
            r_excl: 0.0,
            scope: Scope::Global,
            multipliers: vec![("c_raw".to_string(), Polynomial::constant(nx, lo))],
            gram_certs: ext.gram_certs,
            phase1_slack: slack,
        },
        rs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::parse_system;

    #[test]
    fn exponent_contract_enforced() {
        let sys = parse_system("system \"c\"\nvars x1\nx1' = -sgnpow(x1, 1/3)\n").unwrap();
        let r = certify_cor1(
            &sys,
            &WChoice::State,
            2,
            2,
            (0.0, 4.0),
            1e-3,
            1e-3,
            &CertifyOptions::default(),
        );
        assert!(matches!(r, Err(CertifyError::Invalid(_))));
    }
}
