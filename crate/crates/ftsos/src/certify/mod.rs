//! Finite-time stability certification pipelines, a sampling validator,
//! and settling-time bounds.
//!
//! Three routes produce certificates: a single feasibility program with a
//! fixed decrease constant ([`certify_thm1`]), an alternation over a
//! sublevel-set decrease condition ([`certify_thm2`]), and a quadratic
//! form in a chosen coordinate map whose decrease constant is maximized
//! by bisection ([`certify_cor1`]).

mod cor1;
pub mod file;
mod thm1;
mod thm2;
mod validate;

pub use cor1::{certify_cor1, WChoice};
pub use thm1::certify_thm1;
pub use thm2::certify_thm2;
pub use validate::{validate, validate_recast, ValidationReport};

use thiserror::Error;

use crate::poly::{monomial_basis, Monomial, ParamPoly, Polynomial};
use crate::recast::RecastSystem;
use crate::sos::{ExtractError, GramCertificate, MultId, PolyId, SosOptions, SosProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Thm1,
    Thm2,
    Cor1,
    External,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Thm1 => "thm1",
            Method::Thm2 => "thm2",
            Method::Cor1 => "cor1",
            Method::External => "external",
        }
    }
}

/// Where the decrease condition is certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Everywhere outside the exclusion ball.
    Global,
    /// On the sublevel set `V <= 1`.
    Sublevel,
}

/// A Lyapunov certificate over the recast variables.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub method: Method,
    pub system: String,
    pub v: Polynomial,
    pub c: f64,
    pub alpha: f64,
    pub r_excl: f64,
    pub scope: Scope,
    pub multipliers: Vec<(String, Polynomial)>,
    pub gram_certs: Vec<GramCertificate>,
    pub phase1_slack: f64,
}

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("program infeasible (phase-one margin {slack:.3e})")]
    Infeasible { slack: f64 },
    #[error("alternation stalled (best margin {best_slack:.3e})")]
    Stalled { best_slack: f64 },
    #[error("numerically fragile certificate: {0}")]
    Fragile(String),
    #[error("recast failed: {0}")]
    Recast(#[from] crate::recast::RecastError),
    #[error("compile failed: {0}")]
    Compile(#[from] crate::sos::CompileError),
    #[error("{0}")]
    Invalid(String),
}

impl From<ExtractError> for CertifyError {
    fn from(e: ExtractError) -> Self {
        match e {
            ExtractError::Fragile(s) => CertifyError::Fragile(s),
            ExtractError::NotFeasible(s) => CertifyError::Fragile(format!("solver status {s:?}")),
            ExtractError::Compile(c) => CertifyError::Compile(c),
        }
    }
}

/// Which variables an unknown Lyapunov candidate ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VScope {
    All,
    Orig,
    Slack,
}

/// Shared knobs for the certification pipelines.
#[derive(Debug, Clone)]
pub struct CertifyOptions {
    /// Exclusion-ball radius in the extended variables.
    pub r_excl: f64,
    /// Epsilon for the positive-definite floor `l(x)`.
    pub eps_l: f64,
    pub v_scope: VScope,
    /// Drop candidate monomials whose Lie derivative cannot stay
    /// sign-consistent across a slack's source hyperplane.
    pub slack_basis_filter: bool,
    /// Cap on multiplier degrees; defaults to the candidate degree.
    pub mult_deg_cap: Option<u32>,
    pub max_alternations: usize,
    pub alternation_stall_tol: f64,
    pub sos: SosOptions,
    /// Re-check every substituted constraint with an independent SOS pass.
    pub reverify: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            r_excl: 1e-3,
            eps_l: 1e-6,
            v_scope: VScope::All,
            slack_basis_filter: true,
            mult_deg_cap: None,
            max_alternations: 30,
            alternation_stall_tol: 1e-7,
            sos: SosOptions::default(),
            reverify: true,
        }
    }
}

/// Settling-time bound from a certificate: `V(x)^(1-alpha) / (c (1-alpha))`
/// for `alpha` in (0,1), or `V(x)/c` for `alpha = 0`.
pub fn settling_bound(cert: &Certificate, x0: &[f64], rs: &RecastSystem) -> Result<f64, CertifyError> {
    let xt = rs.extend_point(x0);
    let v0 = cert.v.eval(&xt);
    if cert.scope == Scope::Sublevel && v0 > 1.0 {
        return Err(CertifyError::Invalid(format!(
            "initial point outside the certified region: V = {v0:.6}"
        )));
    }
    if v0 < 0.0 {
        return Err(CertifyError::Invalid(format!("V(x0) = {v0:.3e} negative")));
    }
    let a = cert.alpha;
    Ok(if a == 0.0 {
        v0 / cert.c
    } else {
        v0.powf(1.0 - a) / (cert.c * (1.0 - a))
    })
}

pub(crate) fn even_up(d: u32) -> u32 {
    d + (d & 1)
}

pub(crate) fn even_down(d: u32) -> u32 {
    d - (d & 1)
}

/// Positive-definite floor `l(x) = sum_i sum_j eps x_i^(2j)` with
/// `j = 1..deg/2` over all extended variables.
pub(crate) fn l_poly(nvars: usize, deg: u32, eps: f64) -> Polynomial {
    let d = (deg / 2).max(1);
    let mut p = Polynomial::zero(nvars);
    for i in 0..nvars {
        for j in 1..=d {
            let mut e = vec![0u16; nvars];
            e[i] = (2 * j) as u16;
            p.add_term(Monomial(e), eps);
        }
    }
    p
}

/// `|xt|^2` over the extended variables.
pub(crate) fn norm_sq(nvars: usize) -> Polynomial {
    let mut p = Polynomial::zero(nvars);
    for i in 0..nvars {
        let mut e = vec![0u16; nvars];
        e[i] = 2;
        p.add_term(Monomial(e), 1.0);
    }
    p
}

/// Candidate basis for an unknown Lyapunov polynomial: total degree in
/// `[2, deg_v]` over the scoped variables, optionally filtered for
/// hyperplane sign consistency of the slack cusps.
pub(crate) fn v_basis(
    rs: &RecastSystem,
    deg_v: u32,
    scope: VScope,
    filter: bool,
) -> Vec<Monomial> {
    let n = rs.norig();
    let nx = rs.nvars();
    let vars: Vec<usize> = match scope {
        VScope::All => (0..nx).collect(),
        VScope::Orig => (0..n).collect(),
        VScope::Slack => (n..nx).collect(),
    };
    let raw = monomial_basis(vars.len(), deg_v, 2);
    let mut out: Vec<Monomial> = raw
        .into_iter()
        .map(|m| m.remap(nx, &vars))
        .collect();
    if filter {
        let orders = slack_field_orders(rs);
        out.retain(|m| plane_safe(m, rs, &orders));
    }
    out
}

/// For each slack, the vanishing order (in root-units) of its source
/// state's recast field on the hyperplane `x_src = 0`.
fn slack_field_orders(rs: &RecastSystem) -> Vec<u32> {
    rs.var_map
        .iter()
        .map(|s| {
            let mut fields: Vec<&Polynomial> = vec![&rs.drift_num[s.source]];
            for col in &rs.input_num {
                fields.push(&col[s.source]);
            }
            let mut v = u32::MAX;
            for f in fields {
                for (m, _) in f.terms() {
                    let mut ord = s.root * m.exponent(s.source) as u32;
                    for other in &rs.var_map {
                        if other.source == s.source {
                            ord += m.exponent(other.index) as u32;
                        }
                    }
                    v = v.min(ord);
                }
            }
            if v == u32::MAX {
                0
            } else {
                v
            }
        })
        .collect()
}

/// A candidate monomial is kept unless its slack-cusp contribution to the
/// Lie derivative blows up with a sign that flips across the source
/// hyperplane, which would force its coefficient to zero anyway.
fn plane_safe(m: &Monomial, rs: &RecastSystem, orders: &[u32]) -> bool {
    for (k, s) in rs.var_map.iter().enumerate() {
        let a = m.exponent(s.index) as u32;
        if a == 0 {
            continue;
        }
        let b = m.exponent(s.source) as u32;
        let blow = (a + s.root * b + orders[k]) as i64 - s.root as i64;
        if blow < 0 {
            let flip = if s.signed {
                (a + b + orders[k]) % 2 == 0
            } else {
                b % 2 == 0
            };
            if flip {
                return false;
            }
        }
    }
    true
}

/// Free and SOS multipliers attached to a constraint for the manifold
/// members: subtracts `lambda^T G1 + sigma^T G2` from `expr`.
pub(crate) struct ManifoldMults {
    pub lambda: Vec<(String, PolyId)>,
    pub sigma: Vec<(String, MultId)>,
}

pub(crate) fn attach_manifold(
    prog: &mut SosProgram,
    rs: &RecastSystem,
    expr: &mut ParamPoly,
    d_target: u32,
    cap: u32,
    tag: &str,
) -> ManifoldMults {
    let nx = prog.nvars();
    let mut lambda = Vec::new();
    let mut sigma = Vec::new();
    for (k, g) in rs.g1.iter().enumerate() {
        let g = pad_vars(g, nx);
        let deg = d_target.saturating_sub(g.degree()).min(cap);
        let name = format!("lambda_{tag}_{}", k + 1);
        let id = prog.add_poly_unknown(&name, monomial_basis(nx, deg, 0));
        expr.add_assign(&prog.poly_param(id).mul_poly(&g).scale(-1.0));
        lambda.push((name, id));
    }
    for (k, g) in rs.g2.iter().enumerate() {
        let g = pad_vars(g, nx);
        let deg = even_down(d_target.saturating_sub(g.degree()).min(cap));
        let name = format!("sigma_{tag}_{}", k + 1);
        let id = prog.add_sos_multiplier(&name, deg, None);
        expr.add_assign(&prog.mult_param(id).mul_poly(&g).scale(-1.0));
        sigma.push((name, id));
    }
    ManifoldMults { lambda, sigma }
}

/// Embed a polynomial over the recast variables into a larger ambient
/// space (extra trailing variables).
pub(crate) fn pad_vars(p: &Polynomial, nvars: usize) -> Polynomial {
    if p.nvars() == nvars {
        return p.clone();
    }
    let map: Vec<usize> = (0..p.nvars()).collect();
    p.remap(nvars, &map)
}

/// Record extracted multiplier values under their names.
pub(crate) fn collect_multipliers(
    prog: &SosProgram,
    values: &[f64],
    mults: &[ManifoldMults],
) -> Vec<(String, Polynomial)> {
    let mut out = Vec::new();
    for mm in mults {
        for (name, id) in &mm.lambda {
            out.push((name.clone(), prog.poly_value(*id, values)));
        }
        for (name, id) in &mm.sigma {
            out.push((name.clone(), prog.mult_value(*id, values)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recast::recast;
    use crate::system::parse_system;

    #[test]
    fn l_poly_shape() {
        let l = l_poly(2, 4, 1e-6);
        // x1^2, x1^4, x2^2, x2^4
        assert_eq!(l.num_terms(), 4);
        assert!(l.eval(&[0.5, -0.3]) > 0.0);
        assert_eq!(l.eval(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn plane_filter_drops_forced_monomials() {
        // cube-root damping on x2 with a non-vanishing cross term: z2^2
        // alone is forced out, z2^3 stays
        let sys = parse_system(
            "system \"t\"\nvars x1 x2\nx1' = -x1\nx2' = -sgnpow(x2, 1/3) - x1\n",
        )
        .unwrap();
        let rs = recast(&sys).unwrap();
        let basis = v_basis(&rs, 4, VScope::All, true);
        let nx = rs.nvars();
        let z2sq = Monomial({
            let mut e = vec![0u16; nx];
            e[2] = 2;
            e
        });
        let z2cube = Monomial({
            let mut e = vec![0u16; nx];
            e[2] = 3;
            e
        });
        assert!(!basis.contains(&z2sq), "z^2 should be filtered");
        assert!(basis.contains(&z2cube), "z^3 should remain");
        let unfiltered = v_basis(&rs, 4, VScope::All, false);
        assert!(unfiltered.contains(&z2sq));
    }

    #[test]
    fn settling_bound_formula() {
        let sys = parse_system("system \"l\"\nvars x1\nx1' = -x1\n").unwrap();
        let rs = recast(&sys).unwrap();
        let cert = Certificate {
            method: Method::External,
            system: "l".into(),
            v: Polynomial::var(1, 0).pow(2).scale(2.0),
            c: 1.0,
            alpha: 0.0,
            r_excl: 0.0,
            scope: Scope::Global,
            multipliers: vec![],
            gram_certs: vec![],
            phase1_slack: 0.0,
        };
        // alpha = 0, V(x0) = 2, c = 1 -> bound 2
        let b = settling_bound(&cert, &[1.0], &rs).unwrap();
        assert!((b - 2.0).abs() < 1e-12);

        // alpha = 2/3, V = x^2, c = 2: bound (3/2) x0^(2/3)
        let cert2 = Certificate {
            alpha: 2.0 / 3.0,
            c: 2.0,
            v: Polynomial::var(1, 0).pow(2),
            ..cert
        };
        let x0 = 0.8f64;
        let b = settling_bound(&cert2, &[x0], &rs).unwrap();
        let want = 1.5 * x0.powf(2.0 / 3.0);
        assert!((b - want).abs() < 1e-12);
    }
}
