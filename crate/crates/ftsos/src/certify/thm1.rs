//! Single-shot certification with a fixed decrease constant: find `V`
//! with `V - l1` SOS on the manifold and the cleared decrease condition
//! `-(Vdot_num + c D)` SOS on the manifold outside an exclusion ball.

use super::*;
use crate::recast::{recast, RecastSystem};
use crate::sos::{solve_feasible, SosProgram};
use crate::system::DynSystem;

pub fn certify_thm1(
    sys: &DynSystem,
    c: f64,
    deg_v: u32,
    opts: &CertifyOptions,
) -> Result<(Certificate, RecastSystem), CertifyError> {
    assert!(c > 0.0, "decrease constant must be positive");
    assert!(deg_v >= 2 && deg_v % 2 == 0, "candidate degree must be even and >= 2");
    let rs = recast(sys)?;
    let nx = rs.nvars();
    let cap = opts.mult_deg_cap.unwrap_or(deg_v);

    let mut prog = SosProgram::new(nx);
    let basis = v_basis(&rs, deg_v, opts.v_scope, opts.slack_basis_filter);
    let v_id = prog.add_poly_unknown("V", basis);

    let l1 = l_poly(nx, deg_v, opts.eps_l);

    // positivity: V - l1 - lambda1.G1 - sigma1.G2 in SOS
    let g_deg = rs
        .g1
        .iter()
        .chain(rs.g2.iter())
        .map(|g| g.degree())
        .max()
        .unwrap_or(0);
    let d_pos = even_up(deg_v.max(l1.degree()).max(g_deg));
    let mut pos = prog.poly_param(v_id).add_poly(&l1.neg());
    let mm_pos = attach_manifold(&mut prog, &rs, &mut pos, d_pos, cap, "pos");
    prog.add_constraint("positivity", pos);

    // decrease: -(Vdot_num + c D) - manifold mults - s_r (|xt|^2 - r^2) in SOS
    let denom = Polynomial::monomial(rs.common_denominator(), 1.0);
    let lie = prog.poly_linear_image(v_id, |m| rs.lie_image(m));
    let d_lie = lie
        .support()
        .map(|m| m.degree())
        .max()
        .unwrap_or(0)
        .max(denom.degree());
    let d_dec = even_up(d_lie.max(g_deg));
    let mut dec = lie.scale(-1.0).add_poly(&denom.scale(-c));
    let mm_dec = attach_manifold(&mut prog, &rs, &mut dec, d_dec, cap, "dec");
    let ball = norm_sq(nx).add(&Polynomial::constant(nx, -opts.r_excl * opts.r_excl));
    let excl_deg = even_down(d_dec.saturating_sub(2).min(cap));
    let s_r = prog.add_sos_multiplier("s_excl", excl_deg, None);
    dec.add_assign(&prog.mult_param(s_r).mul_poly(&ball).scale(-1.0));
    prog.add_constraint("decrease", dec);

    let compiled = prog.compile()?;
    let (slack, ext) = solve_feasible(&prog, &compiled, &opts.sos, opts.reverify)?;
    let Some(ext) = ext else {
        return Err(CertifyError::Infeasible { slack });
    };

    let mut multipliers = collect_multipliers(&prog, &ext.values, &[mm_pos, mm_dec]);
    multipliers.push(("s_excl".to_string(), prog.mult_value(s_r, &ext.values)));

    Ok((
        Certificate {
            method: Method::Thm1,
            system: sys.name.clone(),
            v: prog.poly_value(v_id, &ext.values),
            c,
            alpha: 0.0,
            r_excl: opts.r_excl,
            scope: Scope::Global,
            multipliers,
            gram_certs: ext.gram_certs,
            phase1_slack: slack,
        },
        rs,
    ))
}
