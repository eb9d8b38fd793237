//! Sublevel-set certification by alternation. The decrease condition is
//! only required on `{V <= 1}`, encoded with level-set multipliers, which
//! makes the program bilinear; fixing either the candidate or the
//! multipliers leaves an affine half, and the phase-one margin increases
//! monotonically across halves.

use super::*;
use crate::recast::{recast, RecastSystem};
use crate::sdp;
use crate::sos::{solve_feasible, MultId, SosProgram};
use crate::system::DynSystem;

/// Multipliers carried across alternation halves.
#[derive(Debug, Clone)]
struct FixedMults {
    /// Weights on the Lie term inside / outside the sublevel set.
    s_in: Polynomial,
    s_out: Polynomial,
    /// Level-set weights on `(1 - V)` and `(V - 1)`.
    w_in: Polynomial,
    w_out: Polynomial,
}

enum Half {
    /// Solve for the candidate; bilinear multipliers fixed.
    Candidate(FixedMults),
    /// Solve for the multipliers; candidate fixed.
    Multipliers(Polynomial),
}

struct HalfResult {
    slack: f64,
    v: Polynomial,
    mults: FixedMults,
    cert: Option<Certificate>,
}

pub fn certify_thm2(
    sys: &DynSystem,
    c: f64,
    deg_v: u32,
    opts: &CertifyOptions,
) -> Result<(Certificate, RecastSystem), CertifyError> {
    assert!(c > 0.0, "decrease constant must be positive");
    let rs = recast(sys)?;
    let nx = rs.nvars();

    let mut mults = FixedMults {
        s_in: Polynomial::constant(nx, 1.0),
        s_out: Polynomial::constant(nx, 1.0),
        w_in: norm_sq(nx),
        w_out: norm_sq(nx),
    };
    let mut best_slack = f64::NEG_INFINITY;

    for round in 0..opts.max_alternations {
        let a = solve_half(sys, &rs, c, deg_v, opts, Half::Candidate(mults.clone()))?;
        if let Some(cert) = a.cert {
            return Ok((cert, rs));
        }

        let b = solve_half(sys, &rs, c, deg_v, opts, Half::Multipliers(a.v.clone()))?;
        if let Some(cert) = b.cert {
            return Ok((cert, rs));
        }
        mults = b.mults;

        let round_best = a.slack.max(b.slack);
        if round > 0 && round_best - best_slack < opts.alternation_stall_tol {
            return Err(CertifyError::Stalled {
                best_slack: best_slack.max(round_best),
            });
        }
        best_slack = best_slack.max(round_best);
    }
    Err(CertifyError::Stalled { best_slack })
}

fn solve_half(
    sys: &DynSystem,
    rs: &RecastSystem,
    c: f64,
    deg_v: u32,
    opts: &CertifyOptions,
    half: Half,
) -> Result<HalfResult, CertifyError> {
    let nx = rs.nvars();
    let cap = opts.mult_deg_cap.unwrap_or(deg_v);
    let denom = Polynomial::monomial(rs.common_denominator(), 1.0);
    let dd = denom.degree();
    let l1 = l_poly(nx, deg_v, opts.eps_l);
    let l2 = l_poly(nx, deg_v, opts.eps_l);
    let g_deg = rs
        .g1
        .iter()
        .chain(rs.g2.iter())
        .map(|g| g.degree())
        .max()
        .unwrap_or(0);

    let mut prog = SosProgram::new(nx);

    // candidate: unknown in the candidate half, fixed otherwise
    let v_id = match &half {
        Half::Candidate(_) => Some(prog.add_poly_unknown(
            "V",
            v_basis(rs, deg_v, opts.v_scope, opts.slack_basis_filter),
        )),
        Half::Multipliers(_) => None,
    };
    let v_param = |prog: &SosProgram| match (&half, v_id) {
        (_, Some(id)) => prog.poly_param(id),
        (Half::Multipliers(v), _) => ParamPoly::from_poly(v),
        _ => unreachable!(),
    };
    let v_lie = |prog: &SosProgram| match (&half, v_id) {
        (_, Some(id)) => prog.poly_linear_image(id, |m| rs.lie_image(m)),
        (Half::Multipliers(v), _) => {
            ParamPoly::from_poly(&rs.lie_derivative(v).expect("arity").numerator)
        }
        _ => unreachable!(),
    };

    // bilinear multipliers: fixed in the candidate half, unknown otherwise
    let s_ids: Option<[MultId; 4]> = match &half {
        Half::Candidate(_) => None,
        Half::Multipliers(_) => Some([
            prog.add_sos_multiplier("s_lie_in", 2, None),
            prog.add_sos_multiplier("s_lie_out", 2, None),
            prog.add_sos_multiplier("s_level_in", 2, None),
            prog.add_sos_multiplier("s_level_out", 2, None),
        ]),
    };
    // additive slack term, unknown in both halves
    let s_aux = prog.add_sos_multiplier("s_aux", 2, None);

    let d_lie = v_lie(&prog)
        .support()
        .map(|m| m.degree())
        .max()
        .unwrap_or(0);

    // positivity: V - l1 on the manifold
    let d_pos = even_up(deg_v.max(l1.degree()).max(g_deg));
    let mut pos = v_param(&prog).add_poly(&l1.neg());
    let mm_pos = attach_manifold(&mut prog, rs, &mut pos, d_pos, cap, "pos");
    prog.add_constraint("positivity", pos);

    // inside the sublevel set:
    // -((1-V) w_in D + s_in (Vdot_num + c V D) + (s_aux + l2) D)
    let d_in = even_up(
        (deg_v + 2 + dd)
            .max(d_lie + 2)
            .max(l2.degree() + dd)
            .max(g_deg),
    );
    let mut dec_in = ParamPoly::zero(nx);
    match &half {
        Half::Candidate(fm) => {
            let wd = fm.w_in.mul(&denom);
            dec_in.add_assign(&ParamPoly::from_poly(&wd.neg()));
            dec_in.add_assign(&v_param(&prog).mul_poly(&wd));
            dec_in.add_assign(&v_lie(&prog).mul_poly(&fm.s_in).scale(-1.0));
            dec_in.add_assign(
                &v_param(&prog)
                    .mul_poly(&fm.s_in.mul(&denom))
                    .scale(-c),
            );
        }
        Half::Multipliers(v) => {
            let [s_in, _, w_in, _] = s_ids.as_ref().unwrap();
            let level = Polynomial::constant(nx, 1.0).sub(v).mul(&denom);
            dec_in.add_assign(&prog.mult_param(*w_in).mul_poly(&level).scale(-1.0));
            let num = rs.lie_derivative(v).expect("arity").numerator;
            let target = num.add(&v.mul(&denom).scale(c));
            dec_in.add_assign(&prog.mult_param(*s_in).mul_poly(&target).scale(-1.0));
        }
    }
    dec_in.add_assign(&prog.mult_param(s_aux).mul_poly(&denom).scale(-1.0));
    dec_in.add_assign(&ParamPoly::from_poly(&l2.mul(&denom).neg()));
    let mm_in = attach_manifold(&mut prog, rs, &mut dec_in, d_in, cap, "in");
    prog.add_constraint("decrease_inside", dec_in);

    // outside: -((V-1) w_out D + s_out (Vdot_num + c D))
    let d_out = even_up((deg_v + 2 + dd).max(d_lie + 2).max(g_deg));
    let mut dec_out = ParamPoly::zero(nx);
    match &half {
        Half::Candidate(fm) => {
            let wd = fm.w_out.mul(&denom);
            dec_out.add_assign(&ParamPoly::from_poly(&wd));
            dec_out.add_assign(&v_param(&prog).mul_poly(&wd).scale(-1.0));
            dec_out.add_assign(&v_lie(&prog).mul_poly(&fm.s_out).scale(-1.0));
            dec_out.add_assign(&ParamPoly::from_poly(&fm.s_out.mul(&denom).scale(-c)));
        }
        Half::Multipliers(v) => {
            let [_, s_out, _, w_out] = s_ids.as_ref().unwrap();
            let level = v.sub(&Polynomial::constant(nx, 1.0)).mul(&denom);
            dec_out.add_assign(&prog.mult_param(*w_out).mul_poly(&level).scale(-1.0));
            let num = rs.lie_derivative(v).expect("arity").numerator;
            let target = num.add(&denom.scale(c));
            dec_out.add_assign(&prog.mult_param(*s_out).mul_poly(&target).scale(-1.0));
        }
    }
    let mm_out = attach_manifold(&mut prog, rs, &mut dec_out, d_out, cap, "out");
    prog.add_constraint("decrease_outside", dec_out);

    let compiled = prog.compile()?;
    let (slack, verified) = solve_feasible(&prog, &compiled, &opts.sos, opts.reverify)?;
    let sol = match &verified {
        Some(_) => None,
        None => {
            // raw solve so the alternation can keep moving at negative margin
            let (_, _, s) = sdp::phase1(&compiled.problem, &opts.sos.sdp);
            if s.status == sdp::SdpStatus::Infeasible {
                return Err(CertifyError::Infeasible { slack });
            }
            Some(s)
        }
    };
    let values = match (&verified, &sol) {
        (Some(ext), _) => ext.values.clone(),
        (None, Some(s)) => prog.unknown_values(&compiled, s),
        _ => unreachable!(),
    };
    let v_out = match (&half, v_id) {
        (_, Some(id)) => prog.poly_value(id, &values),
        (Half::Multipliers(v), _) => v.clone(),
        _ => unreachable!(),
    };
    let mults_out = match (&half, &s_ids) {
        (Half::Candidate(fm), _) => fm.clone(),
        (_, Some([s_in, s_out, w_in, w_out])) => FixedMults {
            s_in: prog.mult_value(*s_in, &values),
            s_out: prog.mult_value(*s_out, &values),
            w_in: prog.mult_value(*w_in, &values),
            w_out: prog.mult_value(*w_out, &values),
        },
        _ => unreachable!(),
    };

    let cert = if let Some(ext) = verified {
        let mut multipliers = vec![
            ("s_lie_in".to_string(), mults_out.s_in.clone()),
            ("s_lie_out".to_string(), mults_out.s_out.clone()),
            ("s_level_in".to_string(), mults_out.w_in.clone()),
            ("s_level_out".to_string(), mults_out.w_out.clone()),
            ("s_aux".to_string(), prog.mult_value(s_aux, &ext.values)),
        ];
        multipliers.extend(collect_multipliers(
            &prog,
            &ext.values,
            &[mm_pos, mm_in, mm_out],
        ));
        Some(Certificate {
            method: Method::Thm2,
            system: sys.name.clone(),
            v: v_out.clone(),
            c,
            alpha: 1.0,
            r_excl: 0.0,
            scope: Scope::Sublevel,
            multipliers,
            gram_certs: ext.gram_certs,
            phase1_slack: slack,
        })
    } else {
        None
    };

    Ok(HalfResult {
        slack,
        v: v_out,
        mults: mults_out,
        cert,
    })
}
