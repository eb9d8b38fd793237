//! Sparse multivariate polynomial arithmetic.
//!
//! Polynomials are stored as a map from exponent vectors to `f64`
//! coefficients, kept in graded-lexicographic order so that every
//! operation (and every rendered certificate) is deterministic.
//! Coefficients whose magnitude falls below [`DROP_TOL`] after an
//! arithmetic operation are pruned.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Coefficients below this magnitude are dropped after arithmetic.
pub const DROP_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("variable count mismatch: {0} vs {1}")]
    VarMismatch(usize, usize),
    #[error("variable index {index} out of range for {nvars} variables")]
    IndexOutOfRange { index: usize, nvars: usize },
    #[error("point length {got} does not match variable count {nvars}")]
    PointLength { got: usize, nvars: usize },
    #[error("unknown u{0} occurs nonlinearly")]
    NonlinearUnknown(usize),
}

/// Exponent vector of a monomial, one entry per ambient variable.
///
/// The `Ord` instance is graded lexicographic: lower total degree first,
/// and within a degree the lexicographically larger exponent vector first
/// (so `x1^2` precedes `x1*x2` precedes `x2^2`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u16>);

impl Monomial {
    pub fn constant(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    /// The monomial `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index out of range");
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    /// Total degree: the sum of all exponents.
    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn exponent(&self, i: usize) -> u16 {
        self.0[i]
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.0.len(), other.0.len());
        Monomial(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| a + b)
                .collect(),
        )
    }

    pub fn pow(&self, k: u16) -> Monomial {
        Monomial(self.0.iter().map(|&e| e * k).collect())
    }

    /// Evaluate at a point.
    pub fn eval(&self, z: &[f64]) -> f64 {
        let mut v = 1.0;
        for (i, &e) in self.0.iter().enumerate() {
            if e > 0 {
                v *= z[i].powi(e as i32);
            }
        }
        v
    }

    /// Re-embed into a larger ambient variable set, mapping variable `i`
    /// of `self` to variable `map[i]` of the target space.
    pub fn remap(&self, new_nvars: usize, map: &[usize]) -> Monomial {
        let mut e = vec![0u16; new_nvars];
        for (i, &exp) in self.0.iter().enumerate() {
            if exp > 0 {
                e[map[i]] += exp;
            }
        }
        Monomial(e)
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

/// Sparse multivariate polynomial with `f64` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        if c.abs() >= DROP_TOL {
            p.terms.insert(Monomial::constant(nvars), c);
        }
        p
    }

    /// The polynomial `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.terms.insert(Monomial::var(nvars, i), 1.0);
        p
    }

    pub fn monomial(m: Monomial, c: f64) -> Self {
        let mut p = Self::zero(m.nvars());
        if c.abs() >= DROP_TOL {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        let mut p = Self::zero(nvars);
        for (m, c) in terms {
            assert_eq!(m.nvars(), nvars, "monomial arity mismatch");
            p.add_term(m, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Total degree; the zero polynomial has degree 0 by convention.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    /// Highest exponent of variable `i` across all terms.
    pub fn degree_in(&self, i: usize) -> u16 {
        self.terms.keys().map(|m| m.exponent(i)).max().unwrap_or(0)
    }

    pub fn coefficient(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.nvars(), self.nvars);
        let entry = self.terms.entry(m.clone()).or_insert(0.0);
        *entry += c;
        if entry.abs() < DROP_TOL {
            self.terms.remove(&m);
        }
    }

    fn prune(mut self) -> Self {
        self.terms.retain(|_, c| c.abs() >= DROP_TOL);
        self
    }

    pub fn checked_add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        if self.nvars != other.nvars {
            return Err(PolyError::VarMismatch(self.nvars, other.nvars));
        }
        let mut out = self.clone();
        for (m, c) in &other.terms {
            *out.terms.entry(m.clone()).or_insert(0.0) += c;
        }
        Ok(out.prune())
    }

    pub fn checked_mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        if self.nvars != other.nvars {
            return Err(PolyError::VarMismatch(self.nvars, other.nvars));
        }
        let mut out = Polynomial::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                *out.terms.entry(ma.mul(mb)).or_insert(0.0) += ca * cb;
            }
        }
        Ok(out.prune())
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        self.checked_add(other).expect("variable count mismatch")
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Polynomial {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= s;
        }
        out.prune()
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        self.checked_mul(other).expect("variable count mismatch")
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.nvars, 1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Formal partial derivative with respect to variable `i`.
    pub fn diff(&self, i: usize) -> Result<Polynomial, PolyError> {
        if i >= self.nvars {
            return Err(PolyError::IndexOutOfRange {
                index: i,
                nvars: self.nvars,
            });
        }
        let mut out = Polynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.exponent(i);
            if e > 0 {
                let mut d = m.clone();
                d.0[i] = e - 1;
                *out.terms.entry(d).or_insert(0.0) += c * e as f64;
            }
        }
        Ok(out.prune())
    }

    /// Evaluate at a point. Terms are summed in graded-lex key order so
    /// repeated evaluations are bit-identical.
    pub fn try_eval(&self, z: &[f64]) -> Result<f64, PolyError> {
        if z.len() != self.nvars {
            return Err(PolyError::PointLength {
                got: z.len(),
                nvars: self.nvars,
            });
        }
        Ok(self.terms.iter().map(|(m, c)| c * m.eval(z)).sum())
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.try_eval(z).expect("point length mismatch")
    }

    /// Re-embed into a larger variable set; `map[i]` is the target index
    /// of variable `i`.
    pub fn remap(&self, new_nvars: usize, map: &[usize]) -> Polynomial {
        let mut out = Polynomial::zero(new_nvars);
        for (m, c) in &self.terms {
            out.add_term(m.remap(new_nvars, map), *c);
        }
        out
    }

    /// Render with the given variable names: graded-lex term order,
    /// explicit `*`, `^` powers, 17 significant digits.
    pub fn render(&self, names: &[String]) -> String {
        assert_eq!(names.len(), self.nvars, "name count mismatch");
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let mag = c.abs();
            if k == 0 {
                if *c < 0.0 {
                    out.push_str("-");
                }
            } else if *c < 0.0 {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            out.push_str(&format!("{mag:.16e}"));
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                out.push('*');
                out.push_str(&names[i]);
                if e > 1 {
                    out.push_str(&format!("^{e}"));
                }
            }
        }
        out
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (1..=self.nvars).map(|i| format!("x{i}")).collect();
        write!(f, "{}", self.render(&names))
    }
}

/// All exponent vectors with total degree in `[min_deg, max_deg]`,
/// in graded-lex order.
pub fn monomial_basis(nvars: usize, max_deg: u32, min_deg: u32) -> Vec<Monomial> {
    assert!(min_deg <= max_deg, "min_deg must not exceed max_deg");
    let mut out = Vec::new();
    let mut current = vec![0u16; nvars];
    for d in min_deg..=max_deg {
        emit_degree(nvars, d, 0, &mut current, &mut out);
    }
    out
}

fn emit_degree(nvars: usize, remaining: u32, pos: usize, current: &mut Vec<u16>, out: &mut Vec<Monomial>) {
    if pos + 1 == nvars || nvars == 0 {
        if nvars == 0 {
            if remaining == 0 {
                out.push(Monomial(vec![]));
            }
            return;
        }
        current[pos] = remaining as u16;
        out.push(Monomial(current.clone()));
        current[pos] = 0;
        return;
    }
    // descending first exponent gives graded-lex order within a degree
    for e in (0..=remaining).rev() {
        current[pos] = e as u16;
        emit_degree(nvars, remaining - e, pos + 1, current, out);
    }
    current[pos] = 0;
}

/// Affine expression `constant + sum coeff_j * u_j` over scalar unknowns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub constant: f64,
    pub coeffs: BTreeMap<usize, f64>,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr {
            constant: c,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn unknown(id: usize) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(id, 1.0);
        LinExpr {
            constant: 0.0,
            coeffs,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add_assign(&mut self, other: &LinExpr) {
        self.constant += other.constant;
        for (&id, &c) in &other.coeffs {
            *self.coeffs.entry(id).or_insert(0.0) += c;
        }
        self.coeffs.retain(|_, c| c.abs() >= DROP_TOL);
    }

    pub fn scale(&self, s: f64) -> LinExpr {
        LinExpr {
            constant: self.constant * s,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(_, &c)| (c * s).abs() >= DROP_TOL)
                .map(|(&id, &c)| (id, c * s))
                .collect(),
        }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant
            + self
                .coeffs
                .iter()
                .map(|(&id, &c)| c * values[id])
                .sum::<f64>()
    }
}

/// Polynomial whose coefficients are affine in a set of scalar unknowns.
#[derive(Debug, Clone)]
pub struct ParamPoly {
    nvars: usize,
    terms: BTreeMap<Monomial, LinExpr>,
}

impl ParamPoly {
    pub fn zero(nvars: usize) -> Self {
        ParamPoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_poly(p: &Polynomial) -> Self {
        let mut out = Self::zero(p.nvars());
        for (m, c) in p.terms() {
            out.terms.insert(m.clone(), LinExpr::constant(c));
        }
        out
    }

    /// `u_id * m`: a single monomial weighted by one unknown.
    pub fn unknown_term(nvars: usize, id: usize, m: Monomial) -> Self {
        let mut out = Self::zero(nvars);
        out.terms.insert(m, LinExpr::unknown(id));
        out
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &LinExpr)> {
        self.terms.iter()
    }

    pub fn add_expr_term(&mut self, m: Monomial, e: &LinExpr) {
        debug_assert_eq!(m.nvars(), self.nvars);
        let slot = self.terms.entry(m).or_default();
        slot.add_assign(e);
    }

    pub fn add_assign(&mut self, other: &ParamPoly) {
        assert_eq!(self.nvars, other.nvars, "variable count mismatch");
        for (m, e) in &other.terms {
            self.add_expr_term(m.clone(), e);
        }
        self.cleanup();
    }

    pub fn add(&self, other: &ParamPoly) -> ParamPoly {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn add_poly(&self, p: &Polynomial) -> ParamPoly {
        self.add(&ParamPoly::from_poly(p))
    }

    pub fn scale(&self, s: f64) -> ParamPoly {
        let mut out = Self::zero(self.nvars);
        for (m, e) in &self.terms {
            out.terms.insert(m.clone(), e.scale(s));
        }
        out.cleanup();
        out
    }

    /// Multiply by a fixed polynomial; unknowns stay affine.
    pub fn mul_poly(&self, p: &Polynomial) -> ParamPoly {
        assert_eq!(self.nvars, p.nvars(), "variable count mismatch");
        let mut out = Self::zero(self.nvars);
        for (pm, pc) in p.terms() {
            for (m, e) in &self.terms {
                out.add_expr_term(pm.mul(m), &e.scale(pc));
            }
        }
        out.cleanup();
        out
    }

    /// Product of two parametric polynomials. Fails with
    /// [`PolyError::NonlinearUnknown`] if both factors carry unknowns,
    /// since that would make an unknown occur nonlinearly.
    pub fn checked_mul(&self, other: &ParamPoly) -> Result<ParamPoly, PolyError> {
        let self_unknown = self.terms.values().find(|e| !e.is_constant());
        let other_unknown = other.terms.values().find(|e| !e.is_constant());
        match (self_unknown, other_unknown) {
            (Some(e), Some(_)) => {
                let id = *e.coeffs.keys().next().expect("nonconstant LinExpr");
                Err(PolyError::NonlinearUnknown(id))
            }
            (None, _) => Ok(other.mul_poly(&self.constant_part())),
            (_, None) => Ok(self.mul_poly(&other.constant_part())),
        }
    }

    /// The fixed (unknown-free) part.
    pub fn constant_part(&self) -> Polynomial {
        Polynomial::from_terms(
            self.nvars,
            self.terms.iter().map(|(m, e)| (m.clone(), e.constant)),
        )
    }

    /// Substitute values for all unknowns.
    pub fn substitute(&self, values: &[f64]) -> Polynomial {
        Polynomial::from_terms(
            self.nvars,
            self.terms.iter().map(|(m, e)| (m.clone(), e.eval(values))),
        )
    }

    /// Monomials that can appear with a nonzero coefficient.
    pub fn support(&self) -> impl Iterator<Item = &Monomial> {
        self.terms.keys()
    }

    fn cleanup(&mut self) {
        self.terms
            .retain(|_, e| !e.is_constant() || e.constant.abs() >= DROP_TOL);
    }
}

/// One linear equation `sum coeff_j * u_j = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// A system of linear equations over declared scalar unknowns.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub nunknowns: usize,
    pub rows: Vec<LinearRow>,
}

impl LinearSystem {
    pub fn new(nunknowns: usize) -> Self {
        LinearSystem {
            nunknowns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        assert!(
            coeffs.iter().all(|&(id, _)| id < self.nunknowns),
            "row references undeclared unknown"
        );
        self.rows.push(LinearRow { coeffs, rhs });
    }

    /// Least-squares solution via normal equations; adequate for the small
    /// coefficient-matching systems produced here.
    pub fn solve_least_squares(&self) -> Vec<f64> {
        use nalgebra::{DMatrix, DVector};
        let n = self.nunknowns;
        let mut ata = DMatrix::<f64>::zeros(n, n);
        let mut atb = DVector::<f64>::zeros(n);
        for row in &self.rows {
            for &(i, ci) in &row.coeffs {
                for &(j, cj) in &row.coeffs {
                    ata[(i, j)] += ci * cj;
                }
                atb[i] += ci * row.rhs;
            }
        }
        for i in 0..n {
            ata[(i, i)] += 1e-12;
        }
        let chol = ata.cholesky().expect("normal equations not PD");
        chol.solve(&atb).data.into()
    }

    /// Maximum absolute residual of a candidate solution.
    pub fn residual(&self, values: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                (r.coeffs
                    .iter()
                    .map(|&(id, c)| c * values[id])
                    .sum::<f64>()
                    - r.rhs)
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Match coefficients of `lhs` (affine in unknowns) against the fixed
/// polynomial `rhs`: one equation per monomial appearing on either side.
pub fn match_coefficients(lhs: &ParamPoly, rhs: &Polynomial) -> Result<LinearSystem, PolyError> {
    if lhs.nvars() != rhs.nvars() {
        return Err(PolyError::VarMismatch(lhs.nvars(), rhs.nvars()));
    }
    let max_id = lhs
        .terms
        .values()
        .flat_map(|e| e.coeffs.keys())
        .max()
        .map(|&m| m + 1)
        .unwrap_or(0);
    let mut sys = LinearSystem::new(max_id);
    let mut monomials: std::collections::BTreeSet<Monomial> = lhs.terms.keys().cloned().collect();
    for (m, _) in rhs.terms() {
        monomials.insert(m.clone());
    }
    for m in monomials {
        let e = lhs.terms.get(&m).cloned().unwrap_or_default();
        let rhs_c = rhs.coefficient(&m) - e.constant;
        let coeffs: Vec<(usize, f64)> = e.coeffs.into_iter().collect();
        if coeffs.is_empty() && rhs_c.abs() < DROP_TOL {
            continue;
        }
        sys.push(coeffs, rhs_c);
    }
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_poly(rng: &mut ChaCha8Rng, nvars: usize, deg: u32) -> Polynomial {
        let basis = monomial_basis(nvars, deg, 0);
        Polynomial::from_terms(
            nvars,
            basis
                .into_iter()
                .map(|m| (m, rng.gen_range(-2.0..2.0)))
                .filter(|(_, c): &(Monomial, f64)| c.abs() > 0.2),
        )
    }

    fn random_point(rng: &mut ChaCha8Rng, nvars: usize) -> Vec<f64> {
        (0..nvars).map(|_| rng.gen_range(-1.5..1.5)).collect()
    }

    #[test]
    fn add_cancels_to_zero() {
        let p = Polynomial::var(2, 0).pow(2);
        let q = p.neg();
        assert!(p.add(&q).is_zero());
        assert_eq!(p.add(&q).degree(), 0);
    }

    #[test]
    fn add_merges_terms() {
        let x1 = Polynomial::var(2, 0);
        let x2 = Polynomial::var(2, 1);
        let s = x1.add(&x2).add(&x1);
        assert_eq!(s.coefficient(&Monomial::var(2, 0)), 2.0);
        assert_eq!(s.coefficient(&Monomial::var(2, 1)), 1.0);
        assert_eq!(s.num_terms(), 2);
    }

    #[test]
    fn add_matches_pointwise_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let p = random_poly(&mut rng, 2, 4);
            let q = random_poly(&mut rng, 2, 4);
            let s = p.add(&q);
            for _ in 0..5 {
                let z = random_point(&mut rng, 2);
                let want = p.eval(&z) + q.eval(&z);
                assert!((s.eval(&z) - want).abs() <= 1e-9 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn mul_difference_of_squares() {
        let x1 = Polynomial::var(2, 0);
        let x2 = Polynomial::var(2, 1);
        let prod = x1.add(&x2).mul(&x1.sub(&x2));
        let want = x1.pow(2).sub(&x2.pow(2));
        assert_eq!(prod, want);
    }

    #[test]
    fn mul_by_zero() {
        let p = Polynomial::var(3, 1).pow(2);
        assert!(p.mul(&Polynomial::zero(3)).is_zero());
    }

    #[test]
    fn mul_matches_pointwise_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let p = random_poly(&mut rng, 2, 3);
            let q = random_poly(&mut rng, 2, 3);
            let prod = p.mul(&q);
            assert_eq!(prod.degree(), if p.is_zero() || q.is_zero() { 0 } else { p.degree() + q.degree() });
            for _ in 0..5 {
                let z = random_point(&mut rng, 2);
                let want = p.eval(&z) * q.eval(&z);
                assert!((prod.eval(&z) - want).abs() <= 1e-8 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn mul_rejects_var_mismatch() {
        let p = Polynomial::var(2, 0);
        let q = Polynomial::var(3, 0);
        assert!(matches!(
            p.checked_mul(&q),
            Err(PolyError::VarMismatch(2, 3))
        ));
    }

    #[test]
    fn diff_basics() {
        let x1 = Polynomial::var(2, 0);
        let x2 = Polynomial::var(2, 1);
        let d = x1.pow(3).diff(0).unwrap();
        assert_eq!(d, x1.pow(2).scale(3.0));
        assert!(x2.pow(2).diff(0).unwrap().is_zero());
        assert!(matches!(
            x1.diff(5),
            Err(PolyError::IndexOutOfRange { index: 5, nvars: 2 })
        ));
    }

    #[test]
    fn diff_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-5;
        for _ in 0..10 {
            let p = random_poly(&mut rng, 3, 4);
            for i in 0..3 {
                let d = p.diff(i).unwrap();
                for _ in 0..5 {
                    let z = random_point(&mut rng, 3);
                    let mut zp = z.clone();
                    let mut zm = z.clone();
                    zp[i] += h;
                    zm[i] -= h;
                    let fd = (p.eval(&zp) - p.eval(&zm)) / (2.0 * h);
                    let want = d.eval(&z);
                    assert!(
                        (fd - want).abs() <= 1e-6 * (1.0 + want.abs()),
                        "fd {fd} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn evaluate_basics() {
        let x1 = Polynomial::var(2, 0);
        let x2 = Polynomial::var(2, 1);
        let p = x1.pow(2).add(&x2.pow(2));
        assert_eq!(p.eval(&[0.0, 0.0]), 0.0);
        assert_eq!(x1.mul(&x2).eval(&[2.0, 3.0]), 6.0);
        assert!(matches!(
            p.try_eval(&[1.0]),
            Err(PolyError::PointLength { got: 1, nvars: 2 })
        ));
    }

    #[test]
    fn evaluate_sum_order_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let p = random_poly(&mut rng, 3, 5);
            let z = random_point(&mut rng, 3);
            let sorted = p.eval(&z);
            // reversed-order summation as an alternative route
            let naive: f64 = p
                .terms()
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .map(|(m, c)| c * m.eval(&z))
                .sum();
            assert!((sorted - naive).abs() <= 1e-12 * (1.0 + naive.abs()));
        }
    }

    #[test]
    fn basis_small_cases() {
        let b = monomial_basis(2, 1, 1);
        assert_eq!(b, vec![Monomial(vec![1, 0]), Monomial(vec![0, 1])]);

        let b = monomial_basis(2, 2, 0);
        assert_eq!(b.len(), 6);
        assert_eq!(
            b,
            vec![
                Monomial(vec![0, 0]),
                Monomial(vec![1, 0]),
                Monomial(vec![0, 1]),
                Monomial(vec![2, 0]),
                Monomial(vec![1, 1]),
                Monomial(vec![0, 2]),
            ]
        );
    }

    #[test]
    fn basis_count_three_vars() {
        // C(3,1) + C(4,2) + C(5,3) = 3 + 6 + 10
        assert_eq!(monomial_basis(3, 3, 1).len(), 19);
    }

    fn binomial(n: u64, k: u64) -> u64 {
        if k > n {
            return 0;
        }
        let k = k.min(n - k);
        let mut num = 1u64;
        let mut den = 1u64;
        for i in 0..k {
            num *= n - i;
            den *= i + 1;
        }
        num / den
    }

    #[test]
    fn basis_counts_match_binomial_sums() {
        for nvars in 1..=5usize {
            for max_deg in 0..=8u32 {
                let count = monomial_basis(nvars, max_deg, 0).len() as u64;
                let want: u64 = (0..=max_deg as u64)
                    .map(|d| binomial(nvars as u64 + d - 1, d))
                    .sum();
                assert_eq!(count, want, "nvars {nvars} deg {max_deg}");
            }
        }
    }

    #[test]
    fn ring_axiom_distributivity_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = random_poly(&mut rng, 2, 3);
            let q = random_poly(&mut rng, 2, 3);
            let r = random_poly(&mut rng, 2, 3);
            let lhs = p.add(&q).mul(&r);
            let rhs = p.mul(&r).add(&q.mul(&r));
            let z = random_point(&mut rng, 2);
            let a = lhs.eval(&z);
            let b = rhs.eval(&z);
            assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn leibniz_rule_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let p = random_poly(&mut rng, 2, 3);
            let q = random_poly(&mut rng, 2, 3);
            let i = rng.gen_range(0..2);
            let lhs = p.mul(&q).diff(i).unwrap();
            let rhs = p.diff(i).unwrap().mul(&q).add(&p.mul(&q.diff(i).unwrap()));
            let z = random_point(&mut rng, 2);
            let a = lhs.eval(&z);
            let b = rhs.eval(&z);
            assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn match_coefficients_simple() {
        // a*x1^2 + b*x1 = 3*x1^2  =>  a = 3, b = 0
        let x1sq = Monomial(vec![2]);
        let x1 = Monomial(vec![1]);
        let mut lhs = ParamPoly::unknown_term(1, 0, x1sq.clone());
        lhs.add_assign(&ParamPoly::unknown_term(1, 1, x1));
        let rhs = Polynomial::monomial(x1sq, 3.0);
        let sys = match_coefficients(&lhs, &rhs).unwrap();
        let sol = sys.solve_least_squares();
        assert!((sol[0] - 3.0).abs() < 1e-9);
        assert!(sol[1].abs() < 1e-9);
        assert!(sys.residual(&sol) < 1e-9);
    }

    #[test]
    fn match_coefficients_shared_unknown() {
        // a*(x1+x2)^2 = x1^2 + 2 x1 x2 + x2^2 => a = 1, three consistent rows
        let x1 = Polynomial::var(2, 0);
        let x2 = Polynomial::var(2, 1);
        let square = x1.add(&x2).pow(2);
        let lhs = ParamPoly::unknown_term(2, 0, Monomial::constant(2)).mul_poly(&square);
        let sys = match_coefficients(&lhs, &square).unwrap();
        assert_eq!(sys.rows.len(), 3);
        let sol = sys.solve_least_squares();
        assert!((sol[0] - 1.0).abs() < 1e-9);
        assert!(sys.residual(&sol) < 1e-9);
    }

    #[test]
    fn match_coefficients_roundtrip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            // rhs = sum_j w_j * g_j with known weights
            let gs: Vec<Polynomial> = (0..3).map(|_| random_poly(&mut rng, 2, 3)).collect();
            let ws: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut rhs = Polynomial::zero(2);
            let mut lhs = ParamPoly::zero(2);
            for (j, g) in gs.iter().enumerate() {
                rhs = rhs.add(&g.scale(ws[j]));
                lhs.add_assign(&ParamPoly::unknown_term(2, j, Monomial::constant(2)).mul_poly(g));
            }
            let sys = match_coefficients(&lhs, &rhs).unwrap();
            let sol = sys.solve_least_squares();
            assert!(sys.residual(&sol) < 1e-7);
            let rebuilt = lhs.substitute(&sol);
            let z = random_point(&mut rng, 2);
            assert!((rebuilt.eval(&z) - rhs.eval(&z)).abs() < 1e-6);
        }
    }

    #[test]
    fn param_poly_nonlinear_unknown_rejected() {
        let a = ParamPoly::unknown_term(1, 0, Monomial::constant(1));
        let b = ParamPoly::unknown_term(1, 1, Monomial::var(1, 0));
        assert!(matches!(
            a.checked_mul(&b),
            Err(PolyError::NonlinearUnknown(_))
        ));
        // one constant side is fine
        let c = ParamPoly::from_poly(&Polynomial::var(1, 0));
        assert!(a.checked_mul(&c).is_ok());
    }

    #[test]
    fn render_is_graded_lex_with_17_digits() {
        let x1 = Polynomial::var(2, 0);
        let x2 = Polynomial::var(2, 1);
        let p = x2.pow(2).scale(4.494).add(&x1.pow(2).scale(4.945)).add(
            &x1.mul(&x2).scale(1.159),
        );
        let names = vec!["x1".to_string(), "x2".to_string()];
        let s = p.render(&names);
        assert_eq!(
            s,
            "4.9450000000000003e0*x1^2 + 1.1590000000000000e0*x1*x2 + 4.4939999999999998e0*x2^2"
        );
    }
}
