//! Independent sampling validator: quasi-random points in a box check the
//! decrease inequality pointwise and fit the best decrease constant over
//! a grid of exponents.

use crate::poly::Polynomial;
use crate::recast::{recast, RecastSystem};
use crate::system::DynSystem;

/// Report of a sampling validation run.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub samples: usize,
    /// Points skipped because a slack denominator degenerates there.
    pub skipped: usize,
    pub domain: String,
    pub min_v_off_origin: f64,
    /// Max over samples of `Vdot + c V^alpha`.
    pub max_violation: f64,
    /// Fitted decrease constant per exponent: `c_hat(alpha) = min -Vdot / V^alpha`.
    pub fitted: Vec<(f64, f64)>,
    pub fitted_alpha: f64,
    pub fitted_c: f64,
    /// Violating samples (capped at 100), with their violation values.
    pub violations: Vec<(Vec<f64>, f64)>,
    pub tol: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Fitted constant at one grid exponent.
    pub fn fitted_at(&self, alpha: f64) -> Option<f64> {
        self.fitted
            .iter()
            .find(|(a, _)| (a - alpha).abs() < 1e-9)
            .map(|&(_, c)| c)
    }

    pub fn summary(&self) -> String {
        format!(
            "samples={} skipped={} min_V={:.3e} max_violation={:.3e} fitted: alpha={:.1} c_hat={:.4}{}",
            self.samples,
            self.skipped,
            self.min_v_off_origin,
            self.max_violation,
            self.fitted_alpha,
            self.fitted_c,
            if self.passed() { " [pass]" } else { " [VIOLATIONS]" },
        )
    }
}

/// Radical-inverse (Halton) sequence value.
pub(crate) fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

const HALTON_BASES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Validate a candidate on a box in the original state space.
pub fn validate(
    sys: &DynSystem,
    v: &Polynomial,
    c: f64,
    alpha: f64,
    domain: &[(f64, f64)],
    n_samples: usize,
    r_excl: f64,
    tol: f64,
) -> ValidationReport {
    let rs = recast(sys).expect("validation needs a recastable system");
    validate_recast(&rs, v, c, alpha, domain, n_samples, r_excl, tol, None)
}

/// Validator core over a prebuilt recast system. `sublevel` restricts
/// sampling to `V <= bound`.
#[allow(clippy::too_many_arguments)]
pub fn validate_recast(
    rs: &RecastSystem,
    v: &Polynomial,
    c: f64,
    alpha: f64,
    domain: &[(f64, f64)],
    n_samples: usize,
    r_excl: f64,
    tol: f64,
    sublevel: Option<f64>,
) -> ValidationReport {
    assert_eq!(domain.len(), rs.norig(), "domain must cover every state");
    let nx = rs.nvars();
    let v = super::pad_vars(v, nx);
    let lie = rs.lie_derivative(&v).expect("variable sets match");

    let alpha_grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let mut fitted_c: Vec<f64> = vec![f64::INFINITY; alpha_grid.len()];

    let mut min_v = f64::INFINITY;
    let mut max_violation = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    let mut skipped = 0usize;
    let mut accepted = 0usize;
    let mut index = 1usize;
    let budget = n_samples.saturating_mul(50);

    while accepted < n_samples && index < budget {
        let x: Vec<f64> = (0..rs.norig())
            .map(|d| {
                let u = halton(index, HALTON_BASES[d % HALTON_BASES.len()]);
                domain[d].0 + u * (domain[d].1 - domain[d].0)
            })
            .collect();
        index += 1;
        let xt = rs.extend_point(&x);
        let norm2: f64 = xt.iter().map(|a| a * a).sum();
        if norm2 <= r_excl * r_excl {
            continue;
        }
        let vval = v.eval(&xt);
        if let Some(bound) = sublevel {
            if vval > bound {
                continue;
            }
        }
        let den = lie.denominator.eval(&xt);
        if den.abs() < 1e-14 {
            skipped += 1;
            continue;
        }
        accepted += 1;
        let vdot = lie.numerator.eval(&xt) / den;
        min_v = min_v.min(vval);
        let viol = vdot + c * if alpha == 0.0 { 1.0 } else { vval.max(0.0).powf(alpha) };
        max_violation = max_violation.max(viol);
        if viol > tol && violations.len() < 100 {
            violations.push((x.clone(), viol));
        }
        if vval > 1e-12 {
            for (k, &a) in alpha_grid.iter().enumerate() {
                let denom_a = if a == 0.0 { 1.0 } else { vval.powf(a) };
                fitted_c[k] = fitted_c[k].min(-vdot / denom_a);
            }
        }
    }

    let fitted: Vec<(f64, f64)> = alpha_grid
        .iter()
        .cloned()
        .zip(fitted_c.iter().cloned())
        .collect();
    let (fitted_alpha, fitted_c_best) = fitted
        .iter()
        .cloned()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or((0.0, f64::NEG_INFINITY));

    ValidationReport {
        samples: accepted,
        skipped,
        domain: format!("{domain:?} minus ball r={r_excl}"),
        min_v_off_origin: min_v,
        max_violation,
        fitted,
        fitted_alpha,
        fitted_c: fitted_c_best,
        violations,
        tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{bundled, parse_system};

    fn quad_candidate() -> Polynomial {
        // over the 4 recast variables of the first bundled system
        let x1 = Polynomial::var(4, 0);
        let x2 = Polynomial::var(4, 1);
        x1.pow(2)
            .scale(4.945)
            .add(&x1.mul(&x2).scale(1.159))
            .add(&x2.pow(2).scale(4.494))
    }

    #[test]
    fn quadratic_candidate_fits_linear_decrease() {
        let sys = parse_system(bundled::EX1).unwrap();
        let rep = validate(
            &sys,
            &quad_candidate(),
            1.0,
            1.0,
            &[(-1.0, 1.0), (-1.0, 1.0)],
            20_000,
            1e-3,
            1e-6,
        );
        let c_hat = rep.fitted_at(1.0).unwrap();
        assert!(c_hat > 0.0, "fitted c at alpha=1 is {c_hat}");
    }

    #[test]
    fn unstable_system_is_flagged() {
        let sys = parse_system("system \"u\"\nvars x1\nx1' = x1\n").unwrap();
        let v = Polynomial::var(1, 0).pow(2);
        let rep = validate(&sys, &v, 0.1, 0.0, &[(-1.0, 1.0)], 5_000, 1e-3, 1e-6);
        assert!(!rep.passed());
        assert!(rep.max_violation > 0.0);
    }

    #[test]
    fn cubic_decay_has_no_uniform_fractional_rate()
    {
        // xdot = -x^3 settles only asymptotically: c_hat(alpha) collapses
        // for every alpha < 1
        let sys = parse_system("system \"a\"\nvars x1\nx1' = -x1^3\n").unwrap();
        let v = Polynomial::var(1, 0).pow(2);
        let rep = validate(&sys, &v, 0.1, 0.0, &[(-1.0, 1.0)], 20_000, 1e-6, 1e-6);
        for (alpha, c_hat) in &rep.fitted {
            if *alpha <= 0.9 {
                assert!(
                    *c_hat < 1e-2,
                    "alpha {alpha}: c_hat {c_hat} should collapse near the origin"
                );
            }
        }
    }
}
