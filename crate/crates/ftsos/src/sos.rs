//! Compilation of sum-of-squares programs into block SDPs.
//!
//! A program declares unknown polynomials (explicit monomial bases), SOS
//! multiplier unknowns (degree-bounded, represented directly by their Gram
//! blocks), scalar unknowns, and constraints that must be SOS. Every
//! constraint expression is affine in the unknowns; bilinear formulations
//! must be resolved by the caller (fix-and-alternate) before compilation.
//!
//! Each SOS constraint gets one Gram block whose basis is pruned by a
//! per-variable degree-interval filter (a cheap, sound Newton-polytope
//! relaxation), and coefficient matching ties Gram entries to unknowns,
//! one linear equation per monomial.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::poly::{monomial_basis, LinExpr, Monomial, ParamPoly, Polynomial, DROP_TOL};
use crate::sdp::{self, SdpOptions, SdpProblem, SdpSolution, SdpStatus};

#[derive(Debug, Error, Clone)]
pub enum CompileError {
    #[error("constraint `{constraint}` cannot be a sum of squares: monomial {monomial} is unmatched")]
    UnmatchedMonomial {
        constraint: String,
        monomial: String,
    },
    #[error("polynomial has odd degree {0}, cannot be a sum of squares")]
    OddDegree(u32),
    #[error("unknown id {0} is not declared in this program")]
    UnknownId(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolyId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultId(pub usize);

#[derive(Debug, Clone)]
enum UnknownKind {
    Scalar,
    PolyCoeff,
    MultEntry { mult: usize, i: usize, j: usize },
}

#[derive(Debug, Clone)]
struct PolyUnknown {
    name: String,
    basis: Vec<Monomial>,
    first_id: usize,
}

#[derive(Debug, Clone)]
struct MultUnknown {
    name: String,
    /// Monomial basis for polynomial multipliers; `None` for plain PSD
    /// matrix unknowns.
    basis: Option<Vec<Monomial>>,
    dim: usize,
    entry_ids: Vec<usize>, // row-major upper triangle
}

#[derive(Debug, Clone)]
struct Constraint {
    name: String,
    expr: ParamPoly,
}

/// Declarative SOS feasibility/optimization program.
#[derive(Debug, Clone)]
pub struct SosProgram {
    nvars: usize,
    kinds: Vec<UnknownKind>,
    scalar_names: Vec<(usize, String)>,
    polys: Vec<PolyUnknown>,
    mults: Vec<MultUnknown>,
    constraints: Vec<Constraint>,
    linear_rows: Vec<(Vec<(usize, f64)>, f64)>,
    objective: Option<usize>,
}

impl SosProgram {
    pub fn new(nvars: usize) -> Self {
        SosProgram {
            nvars,
            kinds: Vec::new(),
            scalar_names: Vec::new(),
            polys: Vec::new(),
            mults: Vec::new(),
            constraints: Vec::new(),
            linear_rows: Vec::new(),
            objective: None,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Declare a scalar unknown; returns its unknown id.
    pub fn add_scalar(&mut self, name: &str) -> usize {
        let id = self.kinds.len();
        self.kinds.push(UnknownKind::Scalar);
        self.scalar_names.push((id, name.to_string()));
        id
    }

    /// Declare an unknown polynomial with an explicit monomial basis.
    pub fn add_poly_unknown(&mut self, name: &str, basis: Vec<Monomial>) -> PolyId {
        let first_id = self.kinds.len();
        for _ in 0..basis.len() {
            self.kinds.push(UnknownKind::PolyCoeff);
        }
        self.polys.push(PolyUnknown {
            name: name.to_string(),
            basis,
            first_id,
        });
        PolyId(self.polys.len() - 1)
    }

    /// Declare an SOS multiplier with the given degree bound, optionally
    /// restricted to a subset of the ambient variables.
    pub fn add_sos_multiplier(
        &mut self,
        name: &str,
        degree: u32,
        vars: Option<&[usize]>,
    ) -> MultId {
        let basis = gram_basis_for_vars(self.nvars, degree / 2, vars);
        let dim = basis.len();
        self.push_mult(name, Some(basis), dim)
    }

    /// Declare a plain PSD matrix unknown of the given dimension.
    pub fn add_sos_multiplier_dim(&mut self, name: &str, dim: usize) -> MultId {
        self.push_mult(name, None, dim)
    }

    fn push_mult(&mut self, name: &str, basis: Option<Vec<Monomial>>, dim: usize) -> MultId {
        let k = self.mults.len();
        let mut entry_ids = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                entry_ids.push(self.kinds.len());
                self.kinds.push(UnknownKind::MultEntry { mult: k, i, j });
            }
        }
        self.mults.push(MultUnknown {
            name: name.to_string(),
            basis,
            dim,
            entry_ids,
        });
        MultId(k)
    }

    fn entry_offset(dim: usize, i: usize, j: usize) -> usize {
        i * (2 * dim - i + 1) / 2 + (j - i)
    }

    /// Unknown id of one entry of a PSD matrix unknown.
    pub fn psd_block_entry_id(&self, id: MultId, i: usize, j: usize) -> usize {
        let mu = &self.mults[id.0];
        let (i, j) = (i.min(j), i.max(j));
        mu.entry_ids[Self::entry_offset(mu.dim, i, j)]
    }

    /// Parametric expression `sum_(i<=j) Q_ij f(i, j)` over a PSD matrix
    /// unknown.
    pub fn psd_block_param(
        &self,
        id: MultId,
        f: impl Fn(usize, usize) -> Polynomial,
    ) -> ParamPoly {
        let mu = &self.mults[id.0];
        let mut out = ParamPoly::zero(self.nvars);
        let mut k = 0;
        for i in 0..mu.dim {
            for j in i..mu.dim {
                let image = f(i, j);
                for (m, c) in image.terms() {
                    let mut e = LinExpr::default();
                    e.coeffs.insert(mu.entry_ids[k], c);
                    out.add_expr_term(m.clone(), &e);
                }
                k += 1;
            }
        }
        out
    }

    /// Solved value of a PSD matrix unknown.
    pub fn psd_block_matrix(&self, id: MultId, values: &[f64]) -> DMatrix<f64> {
        let mu = &self.mults[id.0];
        let mut out = DMatrix::zeros(mu.dim, mu.dim);
        let mut k = 0;
        for i in 0..mu.dim {
            for j in i..mu.dim {
                out[(i, j)] = values[mu.entry_ids[k]];
                out[(j, i)] = values[mu.entry_ids[k]];
                k += 1;
            }
        }
        out
    }

    /// Parametric polynomial `sum_j u_j m_j` for an unknown polynomial.
    pub fn poly_param(&self, id: PolyId) -> ParamPoly {
        let p = &self.polys[id.0];
        let mut out = ParamPoly::zero(self.nvars);
        for (k, m) in p.basis.iter().enumerate() {
            out.add_assign(&ParamPoly::unknown_term(self.nvars, p.first_id + k, m.clone()));
        }
        out
    }

    /// Apply a linear operator to an unknown polynomial: the result is
    /// `sum_j u_j f(m_j)`.
    pub fn poly_linear_image(
        &self,
        id: PolyId,
        f: impl Fn(&Monomial) -> Polynomial,
    ) -> ParamPoly {
        let p = &self.polys[id.0];
        let mut out = ParamPoly::zero(self.nvars);
        for (k, m) in p.basis.iter().enumerate() {
            let image = f(m);
            for (im, c) in image.terms() {
                let mut e = LinExpr::default();
                e.coeffs.insert(p.first_id + k, c);
                out.add_expr_term(im.clone(), &e);
            }
        }
        out
    }

    /// Parametric polynomial `z^T Q z` of an SOS multiplier.
    pub fn mult_param(&self, id: MultId) -> ParamPoly {
        let mu = &self.mults[id.0];
        let basis = mu.basis.as_ref().expect("multiplier has a monomial basis");
        let mut out = ParamPoly::zero(self.nvars);
        let n = basis.len();
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                let m = basis[i].mul(&basis[j]);
                let mut e = LinExpr::default();
                e.coeffs.insert(mu.entry_ids[k], if i == j { 1.0 } else { 2.0 });
                out.add_expr_term(m, &e);
                k += 1;
            }
        }
        out
    }

    /// Require `expr` (affine in the unknowns) to be a sum of squares.
    pub fn add_constraint(&mut self, name: &str, expr: ParamPoly) {
        assert_eq!(expr.nvars(), self.nvars, "constraint arity mismatch");
        self.constraints.push(Constraint {
            name: name.to_string(),
            expr,
        });
    }

    /// Extra linear equality over unknowns (for example a trace
    /// normalization).
    pub fn add_linear_constraint(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.linear_rows.push((coeffs, rhs));
    }

    /// Maximize the given scalar unknown.
    pub fn set_objective_max(&mut self, scalar_id: usize) {
        self.objective = Some(scalar_id);
    }

    pub fn constraint_names(&self) -> Vec<String> {
        self.constraints.iter().map(|c| c.name.clone()).collect()
    }

    /// Compile into a block SDP plus the metadata needed for extraction.
    pub fn compile(&self) -> Result<CompiledSos, CompileError> {
        // free-variable indices for scalar-like unknowns
        let mut free_index: BTreeMap<usize, usize> = BTreeMap::new();
        for (id, kind) in self.kinds.iter().enumerate() {
            match kind {
                UnknownKind::Scalar | UnknownKind::PolyCoeff => {
                    let next = free_index.len();
                    free_index.insert(id, next);
                }
                UnknownKind::MultEntry { .. } => {}
            }
        }
        let nfree = free_index.len();

        // blocks: multipliers first, then one per constraint with a basis
        let mut blocks: Vec<usize> = self.mults.iter().map(|m| m.dim).collect();
        let mut constraint_basis: Vec<Vec<Monomial>> = Vec::new();
        let mut constraint_block: Vec<Option<usize>> = Vec::new();
        for c in &self.constraints {
            let basis = newton_filtered_basis(self.nvars, &c.expr);
            if basis.is_empty() {
                constraint_block.push(None);
            } else {
                constraint_block.push(Some(blocks.len()));
                blocks.push(basis.len());
            }
            constraint_basis.push(basis);
        }

        let mut prob = SdpProblem::new(blocks, nfree);

        // mult-entry id -> (block, i, j)
        let mult_entry_pos = |id: usize| -> Option<(usize, usize, usize)> {
            match self.kinds.get(id) {
                Some(&UnknownKind::MultEntry { mult, i, j }) => Some((mult, i, j)),
                _ => None,
            }
        };

        for (ci, c) in self.constraints.iter().enumerate() {
            let basis = &constraint_basis[ci];
            // products of basis pairs, grouped by monomial
            let mut pair_rows: BTreeMap<Monomial, Vec<(usize, usize)>> = BTreeMap::new();
            for i in 0..basis.len() {
                for j in i..basis.len() {
                    pair_rows
                        .entry(basis[i].mul(&basis[j]))
                        .or_default()
                        .push((i, j));
                }
            }
            let mut monomials: BTreeSet<Monomial> = pair_rows.keys().cloned().collect();
            for m in c.expr.support() {
                monomials.insert(m.clone());
            }

            for m in &monomials {
                let mut entries: Vec<(usize, usize, usize, f64)> = Vec::new();
                let mut free: Vec<(usize, f64)> = Vec::new();
                if let Some(bk) = constraint_block[ci] {
                    if let Some(pairs) = pair_rows.get(m) {
                        for &(i, j) in pairs {
                            entries.push((bk, i, j, 1.0));
                        }
                    }
                }
                let mut rhs = 0.0;
                if let Some(e) = c.expr.terms().find(|(mm, _)| *mm == m).map(|(_, e)| e) {
                    rhs = e.constant;
                    for (&id, &coef) in &e.coeffs {
                        if let Some(&fi) = free_index.get(&id) {
                            free.push((fi, -coef));
                        } else if let Some((mult, i, j)) = mult_entry_pos(id) {
                            let v = if i == j { -coef } else { -coef / 2.0 };
                            entries.push((mult, i, j, v));
                        } else {
                            return Err(CompileError::UnknownId(id));
                        }
                    }
                }
                if entries.is_empty() && free.is_empty() {
                    if rhs.abs() > DROP_TOL {
                        return Err(CompileError::UnmatchedMonomial {
                            constraint: c.name.clone(),
                            monomial: format!("{}", Polynomial::monomial(m.clone(), 1.0)),
                        });
                    }
                    continue;
                }
                prob.push_row(entries, free, rhs);
            }
        }

        for (coeffs, rhs) in &self.linear_rows {
            let mut entries = Vec::new();
            let mut free = Vec::new();
            for &(id, coef) in coeffs {
                if let Some(&fi) = free_index.get(&id) {
                    free.push((fi, coef));
                } else if let Some((mult, i, j)) = mult_entry_pos(id) {
                    let v = if i == j { coef } else { coef / 2.0 };
                    entries.push((mult, i, j, v));
                } else {
                    return Err(CompileError::UnknownId(id));
                }
            }
            prob.push_row(entries, free, *rhs);
        }

        if let Some(id) = self.objective {
            let fi = *free_index.get(&id).ok_or(CompileError::UnknownId(id))?;
            prob.objective.free.push((fi, 1.0));
        }

        Ok(CompiledSos {
            problem: prob,
            free_index,
            constraint_basis,
            constraint_block,
        })
    }

    /// Total number of declared unknown ids.
    pub fn n_unknown_ids(&self) -> usize {
        self.kinds.len()
    }

    /// Read back every unknown id's value from a solved SDP.
    pub fn unknown_values(&self, compiled: &CompiledSos, sol: &SdpSolution) -> Vec<f64> {
        let mut vals = vec![0.0; self.kinds.len()];
        for (id, kind) in self.kinds.iter().enumerate() {
            match kind {
                UnknownKind::Scalar | UnknownKind::PolyCoeff => {
                    vals[id] = sol.scalars[compiled.free_index[&id]];
                }
                &UnknownKind::MultEntry { mult, i, j } => {
                    vals[id] = sol.blocks[mult][(i, j)];
                }
            }
        }
        vals
    }

    /// Reconstruct an unknown polynomial from solved values.
    pub fn poly_value(&self, id: PolyId, values: &[f64]) -> Polynomial {
        let p = &self.polys[id.0];
        Polynomial::from_terms(
            self.nvars,
            p.basis
                .iter()
                .enumerate()
                .map(|(k, m)| (m.clone(), values[p.first_id + k])),
        )
    }

    /// Reconstruct a multiplier polynomial from solved values.
    pub fn mult_value(&self, id: MultId, values: &[f64]) -> Polynomial {
        self.mult_param(id).substitute(values)
    }

    pub fn mult_name(&self, id: MultId) -> &str {
        &self.mults[id.0].name
    }

    pub fn poly_name(&self, id: PolyId) -> &str {
        &self.polys[id.0].name
    }
}

/// Compiled program: the SDP plus extraction metadata.
#[derive(Debug)]
pub struct CompiledSos {
    pub problem: SdpProblem,
    free_index: BTreeMap<usize, usize>,
    pub constraint_basis: Vec<Vec<Monomial>>,
    pub constraint_block: Vec<Option<usize>>,
}

fn gram_basis_for_vars(nvars: usize, half_deg: u32, vars: Option<&[usize]>) -> Vec<Monomial> {
    match vars {
        None => monomial_basis(nvars, half_deg, 0),
        Some(sel) => {
            let small = monomial_basis(sel.len(), half_deg, 0);
            small.into_iter().map(|m| m.remap(nvars, sel)).collect()
        }
    }
}

/// Gram basis for one constraint: total-degree interval plus per-variable
/// degree-interval filtering derived from the constraint's possible
/// support.
fn newton_filtered_basis(nvars: usize, expr: &ParamPoly) -> Vec<Monomial> {
    let support: Vec<&Monomial> = expr.support().collect();
    if support.is_empty() {
        return Vec::new();
    }
    let hi_tot = support.iter().map(|m| m.degree()).max().unwrap();
    let lo_tot = support.iter().map(|m| m.degree()).min().unwrap();
    let mut hi_v = vec![0u16; nvars];
    let mut lo_v = vec![u16::MAX; nvars];
    for m in &support {
        for v in 0..nvars {
            hi_v[v] = hi_v[v].max(m.exponent(v));
            lo_v[v] = lo_v[v].min(m.exponent(v));
        }
    }
    let all = monomial_basis(nvars, hi_tot / 2, lo_tot.div_ceil(2));
    all.into_iter()
        .filter(|m| {
            (0..nvars).all(|v| {
                let d = m.exponent(v);
                2 * d <= hi_v[v] + (hi_v[v] & 1) && 2 * d + 1 > lo_v[v]
            })
        })
        .collect()
}

/// Tolerances governing certificate acceptance.
#[derive(Debug, Clone)]
pub struct SosOptions {
    pub sdp: SdpOptions,
    /// Gram matrices may dip this far below PSD.
    pub psd_tol: f64,
    /// Max coefficient mismatch between `z^T Q z` and the target.
    pub residual_tol: f64,
    /// Width of the ambiguous phase-one band in which a minimum-trace
    /// resolve decides feasibility by Gram verification.
    pub marginal_slack: f64,
}

impl Default for SosOptions {
    fn default() -> Self {
        SosOptions {
            sdp: SdpOptions::default(),
            psd_tol: 1e-8,
            residual_tol: 1e-6,
            marginal_slack: 1e-3,
        }
    }
}

/// Gram decomposition of one certified SOS polynomial.
#[derive(Debug, Clone)]
pub struct GramCertificate {
    pub name: String,
    pub basis: Vec<Monomial>,
    pub gram: DMatrix<f64>,
    /// Max absolute coefficient mismatch against the target polynomial.
    pub residual: f64,
    pub min_eig: f64,
    /// Squares from the PSD factorization (eigenvalues clipped at zero).
    pub squares: Vec<Polynomial>,
    /// Margin reported by the feasibility phase.
    pub phase1_slack: f64,
}

impl GramCertificate {
    pub fn build(
        name: &str,
        basis: &[Monomial],
        gram: DMatrix<f64>,
        target: &Polynomial,
        phase1_slack: f64,
    ) -> GramCertificate {
        let nvars = target.nvars();
        // expand z^T Q z
        let mut expansion = Polynomial::zero(nvars);
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                expansion.add_term(basis[i].mul(&basis[j]), gram[(i, j)]);
            }
        }
        let diff = expansion.sub(target);
        let residual = diff.terms().map(|(_, c)| c.abs()).fold(0.0, f64::max);

        let eig = gram.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.min();
        let lam_max = eig.eigenvalues.max().max(0.0);
        let mut squares = Vec::new();
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam > 1e-8 * (1.0 + lam_max) {
                let col = eig.eigenvectors.column(k);
                let mut q = Polynomial::zero(nvars);
                for (i, m) in basis.iter().enumerate() {
                    q.add_term(m.clone(), lam.sqrt() * col[i]);
                }
                if !q.is_zero() {
                    squares.push(q);
                }
            }
        }
        GramCertificate {
            name: name.to_string(),
            basis: basis.to_vec(),
            gram,
            residual,
            min_eig,
            squares,
            phase1_slack,
        }
    }

    /// Re-check the certificate against its target.
    pub fn verify(&self, target: &Polynomial, opts: &SosOptions) -> Result<(), String> {
        if self.min_eig < -opts.psd_tol {
            return Err(format!(
                "{}: Gram matrix min eigenvalue {:.3e} below -{:.1e}",
                self.name, self.min_eig, opts.psd_tol
            ));
        }
        if self.residual > opts.residual_tol {
            return Err(format!(
                "{}: coefficient residual {:.3e} above {:.1e}",
                self.name, self.residual, opts.residual_tol
            ));
        }
        // the squares must rebuild the target
        let mut rebuilt = Polynomial::zero(target.nvars());
        for q in &self.squares {
            rebuilt = rebuilt.add(&q.mul(q));
        }
        let err = rebuilt
            .sub(target)
            .terms()
            .map(|(_, c)| c.abs())
            .fold(0.0, f64::max);
        if err > 10.0 * opts.residual_tol {
            return Err(format!(
                "{}: sum of squares rebuilds target with error {:.3e}",
                self.name, err
            ));
        }
        Ok(())
    }
}

/// Outcome of a plain SOS membership check.
#[derive(Debug)]
pub enum SosCheck {
    Feasible(GramCertificate),
    /// Not SOS; carries the attained phase-one margin.
    Infeasible { slack: f64 },
}

/// Decide whether a fixed polynomial is a sum of squares.
pub fn check_sos(p: &Polynomial, opts: &SosOptions) -> Result<SosCheck, CompileError> {
    if p.is_zero() {
        return Ok(SosCheck::Feasible(GramCertificate::build(
            "sos",
            &[],
            DMatrix::zeros(0, 0),
            p,
            0.0,
        )));
    }
    if p.degree() % 2 == 1 {
        return Err(CompileError::OddDegree(p.degree()));
    }
    let mut prog = SosProgram::new(p.nvars());
    prog.add_constraint("sos", ParamPoly::from_poly(p));
    let compiled = match prog.compile() {
        Ok(c) => c,
        Err(CompileError::UnmatchedMonomial { .. }) => {
            return Ok(SosCheck::Infeasible {
                slack: f64::NEG_INFINITY,
            })
        }
        Err(e) => return Err(e),
    };
    match solve_feasible(&prog, &compiled, opts, false)? {
        (slack, Some(mut ext)) => {
            let mut cert = ext.gram_certs.pop().expect("one constraint");
            cert.phase1_slack = slack;
            Ok(SosCheck::Feasible(cert))
        }
        (slack, None) => Ok(SosCheck::Infeasible { slack }),
    }
}

/// Extracted solution of a full SOS program.
#[derive(Debug)]
pub struct Extraction {
    /// Values for every unknown id.
    pub values: Vec<f64>,
    /// One certificate per SOS constraint, in declaration order.
    pub gram_certs: Vec<GramCertificate>,
    /// Substituted constraint polynomials.
    pub constraint_polys: Vec<Polynomial>,
    pub phase1_slack: f64,
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("solution is not feasible (status {0:?})")]
    NotFeasible(SdpStatus),
    #[error("numerically fragile certificate: {0}")]
    Fragile(String),
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// Decide feasibility of a compiled program and extract a verified
/// solution.
///
/// Small positive-definiteness floors in the constraints pin some Gram
/// entries near zero, so the maximum uniform margin of the phase-one
/// formulation can sit at solver noise level even for comfortably
/// feasible programs. When the margin is ambiguous, a second solve with
/// a minimum-trace objective produces a well-centered point and the Gram
/// verification (plus the optional independent re-check) is the final
/// arbiter.
pub fn solve_feasible(
    prog: &SosProgram,
    compiled: &CompiledSos,
    opts: &SosOptions,
    reverify: bool,
) -> Result<(f64, Option<Extraction>), CompileError> {
    let (feasible, slack, sol) = sdp::phase1(&compiled.problem, &opts.sdp);
    if feasible {
        if let Ok(ext) = extract(prog, compiled, &sol, slack, opts, reverify) {
            return Ok((slack, Some(ext)));
        }
    }
    if slack > -opts.marginal_slack {
        // minimum-trace resolve
        let mut prob = compiled.problem.clone();
        prob.objective = crate::sdp::SdpObjective::default();
        for (b, &n) in prob.blocks.iter().enumerate() {
            for i in 0..n {
                prob.objective.entries.push((b, i, i, -1.0));
            }
        }
        let sol2 = sdp::solve(&prob, &opts.sdp);
        if sol2.status != SdpStatus::Infeasible && sol2.primal_residual <= 1e-6 {
            match extract(prog, compiled, &sol2, slack, opts, reverify) {
                Ok(ext) => return Ok((slack, Some(ext))),
                Err(e) => {
                    if std::env::var("FTSOS_SOS_DEBUG").is_ok() {
                        eprintln!("solve_feasible: min-trace extraction failed: {e}");
                    }
                }
            }
        } else if std::env::var("FTSOS_SOS_DEBUG").is_ok() {
            eprintln!(
                "solve_feasible: min-trace solve status {:?} rp {:.2e}",
                sol2.status, sol2.primal_residual
            );
        }
    }
    Ok((slack, None))
}

/// Read unknowns back from a solved program and re-verify every
/// constraint. With `reverify` set, each substituted constraint is
/// additionally passed through an independent [`check_sos`].
pub fn extract(
    prog: &SosProgram,
    compiled: &CompiledSos,
    sol: &SdpSolution,
    phase1_slack: f64,
    opts: &SosOptions,
    reverify: bool,
) -> Result<Extraction, ExtractError> {
    if sol.status == SdpStatus::Infeasible {
        return Err(ExtractError::NotFeasible(sol.status));
    }
    let values = prog.unknown_values(compiled, sol);
    let mut gram_certs = Vec::new();
    let mut constraint_polys = Vec::new();
    for (ci, c) in prog.constraints.iter().enumerate() {
        let target = c.expr.substitute(&values);
        let cert = match compiled.constraint_block[ci] {
            Some(bk) => GramCertificate::build(
                &c.name,
                &compiled.constraint_basis[ci],
                sol.blocks[bk].clone(),
                &target,
                phase1_slack,
            ),
            None => GramCertificate::build(&c.name, &[], DMatrix::zeros(0, 0), &target, phase1_slack),
        };
        cert.verify(&target, opts).map_err(ExtractError::Fragile)?;
        if reverify {
            // substitution leaves numerical dust on monomials whose true
            // coefficient is zero; the Gram residual check above already
            // bounds it, so the independent re-check runs on a cleaned copy
            // with a PSD cushion at the certified tolerance (adding
            // eps sum(m^2) over the Gram basis shifts Q by eps I)
            let cutoff = 0.1 * opts.residual_tol;
            let mut cleaned = Polynomial::from_terms(
                target.nvars(),
                target
                    .terms()
                    .filter(|(_, c)| c.abs() >= cutoff)
                    .map(|(m, c)| (m.clone(), c)),
            );
            let eps_c = 10.0 * opts.psd_tol;
            for m in &cert.basis {
                cleaned.add_term(m.mul(m), eps_c);
            }
            match check_sos(&cleaned, opts) {
                Ok(SosCheck::Feasible(_)) => {}
                Ok(SosCheck::Infeasible { slack }) => {
                    return Err(ExtractError::Fragile(format!(
                        "{}: independent re-check failed (margin {slack:.3e})",
                        c.name
                    )))
                }
                Err(e) => return Err(ExtractError::Fragile(format!("{}: {e}", c.name))),
            }
        }
        gram_certs.push(cert);
        constraint_polys.push(target);
    }
    Ok(Extraction {
        values,
        gram_certs,
        constraint_polys,
        phase1_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn x(i: usize) -> Polynomial {
        Polynomial::var(2, i)
    }

    #[test]
    fn gram_block_sizes_with_pruning() {
        // x1^2 + x2^2: 3x3 basis {1, x1, x2} before pruning, 2x2 after
        // (constant excluded by the minimum-degree filter)
        let p = x(0).pow(2).add(&x(1).pow(2));
        let mut prog = SosProgram::new(2);
        prog.add_constraint("c", ParamPoly::from_poly(&p));
        let compiled = prog.compile().unwrap();
        assert_eq!(compiled.constraint_basis[0].len(), 2);
        assert_eq!(monomial_basis(2, 1, 0).len(), 3);
    }

    #[test]
    fn simple_square_is_sos() {
        let p = x(0).add(&x(1)).pow(2);
        match check_sos(&p, &SosOptions::default()).unwrap() {
            SosCheck::Feasible(cert) => {
                assert!(cert.residual <= 1e-6);
                assert_eq!(cert.squares.len(), 1);
            }
            SosCheck::Infeasible { slack } => panic!("should be SOS, slack {slack}"),
        }
    }

    #[test]
    fn motzkin_like_rejected() {
        // x1^4 x2^2 + x1^2 x2^4 - 3 x1^2 x2^2 + 1: nonnegative, not SOS
        let p = x(0)
            .pow(4)
            .mul(&x(1).pow(2))
            .add(&x(0).pow(2).mul(&x(1).pow(4)))
            .add(&x(0).pow(2).mul(&x(1).pow(2)).scale(-3.0))
            .add(&Polynomial::constant(2, 1.0));
        match check_sos(&p, &SosOptions::default()).unwrap() {
            SosCheck::Feasible(_) => panic!("Motzkin-type polynomial certified"),
            SosCheck::Infeasible { slack } => assert!(slack < 0.0),
        }
    }

    #[test]
    fn negative_square_infeasible() {
        let p = x(0).pow(2).scale(-1.0);
        match check_sos(&p, &SosOptions::default()).unwrap() {
            SosCheck::Feasible(_) => panic!("-x^2 certified"),
            SosCheck::Infeasible { slack } => assert!(slack <= -1.0 + 1e-6),
        }
    }

    #[test]
    fn odd_degree_rejected() {
        let p = x(0).pow(3);
        assert!(matches!(
            check_sos(&p, &SosOptions::default()),
            Err(CompileError::OddDegree(3))
        ));
    }

    #[test]
    fn random_sums_of_squares_certify() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let mut p = Polynomial::zero(2);
            for _ in 0..3 {
                let q = Polynomial::from_terms(
                    2,
                    monomial_basis(2, 3, 0)
                        .into_iter()
                        .map(|m| (m, rng.gen_range(-1.0..1.0))),
                );
                p = p.add(&q.mul(&q));
            }
            match check_sos(&p, &SosOptions::default()).unwrap() {
                SosCheck::Feasible(cert) => assert!(cert.residual <= 1e-6),
                SosCheck::Infeasible { slack } => {
                    panic!("constructed SOS rejected with slack {slack}")
                }
            }
        }
    }

    #[test]
    fn fit_fixed_polynomial_roundtrip() {
        // find u with u - f and f - u both SOS => u = f
        let f = x(0).pow(2).scale(2.0).add(&x(0).mul(&x(1))).add(&x(1).pow(2).scale(3.0));
        let mut prog = SosProgram::new(2);
        let u = prog.add_poly_unknown("u", monomial_basis(2, 2, 0));
        let up = prog.poly_param(u);
        prog.add_constraint("upper", up.scale(-1.0).add_poly(&f));
        prog.add_constraint("lower", up.add_poly(&f.neg()));
        let compiled = prog.compile().unwrap();
        let (_, slack, sol) = sdp::phase1(&compiled.problem, &SdpOptions::default());
        let ext = extract(&prog, &compiled, &sol, slack, &SosOptions::default(), false).unwrap();
        let got = prog.poly_value(u, &ext.values);
        let diff = got.sub(&f);
        let err = diff.terms().map(|(_, c)| c.abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "recovered polynomial off by {err}");
    }

    #[test]
    fn objective_maximization() {
        // max t with (x1^2 + 1) - t in SOS  =>  t* = 1
        let mut prog = SosProgram::new(1);
        let t = prog.add_scalar("t");
        let base = Polynomial::var(1, 0)
            .pow(2)
            .add(&Polynomial::constant(1, 1.0));
        let mut expr = ParamPoly::from_poly(&base);
        expr.add_assign(
            &ParamPoly::unknown_term(1, t, Monomial::constant(1)).scale(-1.0),
        );
        prog.add_constraint("bound", expr);
        prog.set_objective_max(t);
        let compiled = prog.compile().unwrap();
        let sol = sdp::solve(&compiled.problem, &SdpOptions::default());
        assert_eq!(sol.status, SdpStatus::Optimal);
        let vals = prog.unknown_values(&compiled, &sol);
        assert!((vals[t] - 1.0).abs() < 1e-6, "t* = {}", vals[t]);
    }

    #[test]
    fn perturbed_solution_flags_fragility() {
        let f = x(0).add(&x(1)).pow(2).add(&x(0).pow(2));
        let mut prog = SosProgram::new(2);
        prog.add_constraint("c", ParamPoly::from_poly(&f));
        let compiled = prog.compile().unwrap();
        let (_, slack, mut sol) = sdp::phase1(&compiled.problem, &SdpOptions::default());
        let bk = compiled.constraint_block[0].unwrap();
        sol.blocks[bk][(0, 0)] += 1e-3;
        let err = extract(&prog, &compiled, &sol, slack, &SosOptions::default(), false);
        assert!(matches!(err, Err(ExtractError::Fragile(_))));
    }

    #[test]
    fn s_procedure_soundness_sampling() {
        // construct p0 = s1 p1 + s2 p2 + r with SOS s_i, r; then solve for
        // fresh multipliers and sample the intersection {p_i >= 0}
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..5 {
            let rand_poly = |rng: &mut ChaCha8Rng, deg| {
                Polynomial::from_terms(
                    2,
                    monomial_basis(2, deg, 0)
                        .into_iter()
                        .map(|m| (m, rng.gen_range(-1.0..1.0))),
                )
            };
            let p1 = rand_poly(&mut rng, 2);
            let p2 = rand_poly(&mut rng, 2);
            let s1 = rand_poly(&mut rng, 1);
            let s2 = rand_poly(&mut rng, 1);
            let r = rand_poly(&mut rng, 2);
            let p0 = s1
                .mul(&s1)
                .mul(&p1)
                .add(&s2.mul(&s2).mul(&p2))
                .add(&r.mul(&r));

            let mut prog = SosProgram::new(2);
            let m1 = prog.add_sos_multiplier("s1", 2, None);
            let m2 = prog.add_sos_multiplier("s2", 2, None);
            let mut expr = ParamPoly::from_poly(&p0);
            expr.add_assign(&prog.mult_param(m1).mul_poly(&p1.neg()));
            expr.add_assign(&prog.mult_param(m2).mul_poly(&p2.neg()));
            prog.add_constraint("sproc", expr);
            let compiled = prog.compile().unwrap();
            let (feas, slack, _) = sdp::phase1(&compiled.problem, &SdpOptions::default());
            assert!(
                feas || slack > -1e-7,
                "trial {trial}: constructed instance infeasible (slack {slack})"
            );

            // soundness: no point of the intersection violates p0 >= 0
            let mut count = 0;
            let mut k = 0;
            while count < 2000 && k < 100_000 {
                k += 1;
                let z = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                if p1.eval(&z) >= 0.0 && p2.eval(&z) >= 0.0 {
                    count += 1;
                    assert!(p0.eval(&z) >= -1e-7, "trial {trial}: violation at {z:?}");
                }
            }
        }
    }
}
