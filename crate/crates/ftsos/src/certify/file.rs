//! Textual certificate files: versioned header, deterministic field
//! order, 17-significant-digit numbers. Timestamps are the caller's
//! business and, when present, are confined to a single `# generated:`
//! comment line that readers skip.

use crate::poly::Polynomial;
use crate::recast::RecastSystem;
use crate::system::ParseError;

use super::{Certificate, ValidationReport};

pub const HEADER: &str = "ftsos-certificate v1";

/// Render a certificate (plus optional validation summary) to text.
pub fn write_certificate(
    cert: &Certificate,
    rs: &RecastSystem,
    report: Option<&ValidationReport>,
) -> String {
    let names = rs.all_vars();
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    out.push_str(&format!("method: {}\n", cert.method.as_str()));
    out.push_str(&format!("system: {}\n", cert.system));
    out.push_str(&format!("vars: {}\n", rs.orig_vars.join(" ")));
    out.push_str(&format!("recast-vars: {}\n", names.join(" ")));
    out.push_str(&format!("c: {:.16e}\n", cert.c));
    out.push_str(&format!("alpha: {:.16e}\n", cert.alpha));
    out.push_str(&format!("r-excl: {:.16e}\n", cert.r_excl));
    out.push_str(&format!(
        "scope: {}\n",
        match cert.scope {
            super::Scope::Global => "global",
            super::Scope::Sublevel => "sublevel",
        }
    ));
    out.push_str(&format!("V: {}\n", cert.v.render(&names)));
    out.push_str(&format!(
        "settling: T(x) <= V(x)^(1-alpha) / (c (1-alpha)) with the fields above\n"
    ));
    out.push_str(&format!("phase1-slack: {:.16e}\n", cert.phase1_slack));
    for (name, p) in &cert.multipliers {
        out.push_str(&format!("multiplier {}: {}\n", name, p.render(&names)));
    }
    for gc in &cert.gram_certs {
        out.push_str(&format!(
            "gram {}: basis: {}\n",
            gc.name,
            gc.basis
                .iter()
                .map(|m| Polynomial::monomial(m.clone(), 1.0).render(&padded_names(&names, m.nvars())))
                .collect::<Vec<_>>()
                .join(", ")
        ));
        let n = gc.gram.nrows();
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{:.16e}", gc.gram[(i, j)])).collect();
            out.push_str(&format!("gram {} row {}: {}\n", gc.name, i, row.join(" ")));
        }
        out.push_str(&format!(
            "gram {} residual: {:.16e} min-eig: {:.16e}\n",
            gc.name, gc.residual, gc.min_eig
        ));
    }
    out.push_str(&rs.report());
    if let Some(rep) = report {
        out.push_str(&format!("validation: {}\n", rep.summary()));
        for (alpha, c_hat) in &rep.fitted {
            out.push_str(&format!("fitted: alpha {alpha:.1} c_hat {c_hat:.6e}\n"));
        }
    }
    out
}

/// The fields a reader needs to validate an external candidate.
#[derive(Debug, Clone)]
pub struct ExternalCertificate {
    pub method: String,
    pub system: String,
    pub vars: Vec<String>,
    pub recast_vars: Vec<String>,
    pub c: f64,
    pub alpha: f64,
    pub r_excl: f64,
    pub v: Polynomial,
}

/// Parse the machine-readable fields back from a certificate file.
pub fn parse_certificate(text: &str) -> Result<ExternalCertificate, ParseError> {
    let mut lines = text.lines().enumerate();
    let Some((_, first)) = lines.next() else {
        return Err(ParseError {
            line: 1,
            column: 1,
            message: "empty certificate".into(),
        });
    };
    if first.trim() != HEADER {
        return Err(ParseError {
            line: 1,
            column: 1,
            message: format!("expected header `{HEADER}`"),
        });
    }
    let mut method = String::new();
    let mut system = String::new();
    let mut vars = Vec::new();
    let mut recast_vars = Vec::new();
    let mut c = f64::NAN;
    let mut alpha = 0.0;
    let mut r_excl = 0.0;
    let mut v_text: Option<(usize, String)> = None;
    for (ln0, line) in lines {
        let ln = ln0 + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            continue;
        };
        let value = value.trim();
        match key.trim() {
            "method" => method = value.to_string(),
            "system" => system = value.to_string(),
            "vars" => vars = value.split_whitespace().map(String::from).collect(),
            "recast-vars" => {
                recast_vars = value.split_whitespace().map(String::from).collect()
            }
            "c" => {
                c = value.parse().map_err(|_| ParseError {
                    line: ln,
                    column: 1,
                    message: "malformed c".into(),
                })?
            }
            "alpha" => {
                alpha = value.parse().map_err(|_| ParseError {
                    line: ln,
                    column: 1,
                    message: "malformed alpha".into(),
                })?
            }
            "r-excl" => {
                r_excl = value.parse().map_err(|_| ParseError {
                    line: ln,
                    column: 1,
                    message: "malformed r-excl".into(),
                })?
            }
            "V" => v_text = Some((ln, value.to_string())),
            _ => {}
        }
    }
    let (_ln, v_text) = v_text.ok_or(ParseError {
        line: 1,
        column: 1,
        message: "certificate has no V line".into(),
    })?;
    if recast_vars.is_empty() {
        recast_vars = vars.clone();
    }
    let v = crate::system::parse_polynomial(&v_text, &recast_vars)?;
    Ok(ExternalCertificate {
        method,
        system,
        vars,
        recast_vars,
        c,
        alpha,
        r_excl,
        v,
    })
}

fn padded_names(names: &[String], nvars: usize) -> Vec<String> {
    let mut out = names.to_vec();
    let mut k = out.len();
    while out.len() < nvars {
        k += 1;
        out.push(format!("m{k}"));
    }
    out.truncate(nvars);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::bundled;

    #[test]
    fn bundled_quadratic_certificate_parses() {
        let ext = parse_certificate(bundled::EX1_QUAD_CERT).unwrap();
        assert_eq!(ext.method, "external");
        assert_eq!(ext.recast_vars.len(), 4);
        assert_eq!(ext.v.nvars(), 4);
        assert!((ext.c - 1.0).abs() < 1e-12);
        let xt = [1.0, 0.0, 0.0, 0.0];
        assert!((ext.v.eval(&xt) - 4.945).abs() < 1e-12);
    }

    #[test]
    fn roundtrip_through_writer() {
        let sys = crate::system::parse_system(bundled::EX1).unwrap();
        let rs = crate::recast::recast(&sys).unwrap();
        let cert = Certificate {
            method: super::super::Method::External,
            system: "ex1".into(),
            v: crate::poly::Polynomial::var(4, 0).pow(2).scale(2.5),
            c: 0.5,
            alpha: 0.0,
            r_excl: 1e-3,
            scope: super::super::Scope::Global,
            multipliers: vec![],
            gram_certs: vec![],
            phase1_slack: 0.1,
        };
        let text = write_certificate(&cert, &rs, None);
        let back = parse_certificate(&text).unwrap();
        assert_eq!(back.v, cert.v);
        assert_eq!(back.c, cert.c);
        assert_eq!(back.r_excl, cert.r_excl);
    }
}
