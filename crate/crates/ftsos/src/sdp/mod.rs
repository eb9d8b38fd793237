//! Dense primal-dual interior-point solver for small block SDPs.
//!
//! Problems are stated over PSD blocks plus free scalars:
//!
//! ```text
//! maximize  <Cobj, X> + fobj . s + const
//! subject to <A_i, X> + f_i . s = b_i,   X_k >= 0 (PSD), s free
//! ```
//!
//! Presolve eliminates the free scalars by Gaussian pivoting and drops
//! dependent rows (checking consistency), leaving a standard-form SDP that
//! a Nesterov-Todd scaled path-following iteration solves. Feasibility
//! questions go through [`phase1`], which maximizes a uniform eigenvalue
//! margin `t` with every block shifted by `-t I`.

mod ipm;
mod presolve;
pub mod sdpa;

use thiserror::Error;

use nalgebra::DMatrix;

/// Entry of a symmetric constraint matrix: `(block, row, col, value)` with
/// `row <= col`; the value applies to both symmetric positions.
pub type Entry = (usize, usize, usize, f64);

#[derive(Debug, Clone, Default)]
pub struct SdpRow {
    pub entries: Vec<Entry>,
    pub free: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SdpObjective {
    pub entries: Vec<Entry>,
    pub free: Vec<(usize, f64)>,
    pub constant: f64,
}

/// Block SDP with linear equality constraints and free scalars.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    /// PSD block dimensions.
    pub blocks: Vec<usize>,
    /// Number of free scalar variables.
    pub nfree: usize,
    pub rows: Vec<SdpRow>,
    /// Objective, always maximized.
    pub objective: SdpObjective,
}

impl SdpProblem {
    pub fn new(blocks: Vec<usize>, nfree: usize) -> Self {
        SdpProblem {
            blocks,
            nfree,
            rows: Vec::new(),
            objective: SdpObjective::default(),
        }
    }

    pub fn push_row(&mut self, entries: Vec<Entry>, free: Vec<(usize, f64)>, rhs: f64) {
        debug_assert!(entries.iter().all(|&(b, i, j, _)| {
            b < self.blocks.len() && i <= j && j < self.blocks[b]
        }));
        debug_assert!(free.iter().all(|&(f, _)| f < self.nfree));
        self.rows.push(SdpRow { entries, free, rhs });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// The equality constraints are inconsistent.
    Infeasible,
    MaxIter,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct IterLog {
    pub iter: usize,
    pub mu: f64,
    pub pobj: f64,
    pub dobj: f64,
    pub rp: f64,
    pub rd: f64,
}

/// Solver output. Block matrices are symmetric with min eigenvalue
/// `>= -1e-9` when the status is `Optimal`.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub blocks: Vec<DMatrix<f64>>,
    /// Recovered values of the free scalars.
    pub scalars: Vec<f64>,
    /// Objective value in the problem's maximize convention.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub dropped_rows: usize,
    pub log: Vec<IterLog>,
}

#[derive(Debug, Error, Clone)]
pub enum SdpError {
    #[error("free variable u{0} appears in the objective but no constraint")]
    UnboundedFree(usize),
}

#[derive(Debug, Clone)]
pub struct SdpOptions {
    pub max_iter: usize,
    /// Relative primal/dual feasibility target.
    pub tol_feas: f64,
    /// Relative duality-gap target.
    pub tol_gap: f64,
    /// Phase-one margin below which a program counts as infeasible.
    pub feas_tol: f64,
    /// Emit one log line per iteration to stderr.
    pub trace: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            max_iter: 200,
            tol_feas: 1e-9,
            tol_gap: 1e-8,
            feas_tol: 1e-7,
            trace: false,
        }
    }
}

/// Solve a block SDP.
pub fn solve(prob: &SdpProblem, opts: &SdpOptions) -> SdpSolution {
    ipm::solve(prob, opts)
}

/// Feasibility via a maximum uniform eigenvalue margin.
///
/// Every PSD block is shifted by `-t I` and `t` is maximized subject to a
/// cap; the program is feasible iff the attained `t` exceeds
/// `opts.feas_tol`. Returns the margin and the shifted-back solution.
pub fn phase1(prob: &SdpProblem, opts: &SdpOptions) -> (bool, f64, SdpSolution) {
    let cap = 10.0
        * (1.0
            + prob
                .rows
                .iter()
                .map(|r| r.rhs.abs())
                .fold(0.0, f64::max));
    let mut shifted = SdpProblem::new(
        {
            let mut b = prob.blocks.clone();
            b.push(1); // cap slack
            b
        },
        prob.nfree + 1,
    );
    let t_id = prob.nfree;
    for row in &prob.rows {
        let tr: f64 = row
            .entries
            .iter()
            .filter(|&&(_, i, j, _)| i == j)
            .map(|&(_, _, _, v)| v)
            .sum();
        let mut free = row.free.clone();
        if tr != 0.0 {
            free.push((t_id, tr));
        }
        shifted.push_row(row.entries.clone(), free, row.rhs);
    }
    // t + slack = cap
    shifted.push_row(
        vec![(prob.blocks.len(), 0, 0, 1.0)],
        vec![(t_id, 1.0)],
        cap,
    );
    shifted.objective.free.push((t_id, 1.0));

    let mut sol = solve(&shifted, opts);
    let t = if sol.status == SdpStatus::Infeasible {
        f64::NEG_INFINITY
    } else {
        sol.scalars[t_id]
    };
    // shift the blocks back: X = Y + t I
    if t.is_finite() {
        sol.blocks.pop(); // cap slack
        for blk in sol.blocks.iter_mut() {
            for d in 0..blk.nrows() {
                blk[(d, d)] += t;
            }
        }
        sol.scalars.pop();
    }
    // a primally feasible point with margin certifies feasibility even if
    // the dual side stalled short of optimality
    let feasible = sol.status != SdpStatus::Infeasible
        && t > opts.feas_tol
        && sol.primal_residual <= 1e-6;
    (feasible, t, sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SdpOptions {
        SdpOptions::default()
    }

    #[test]
    fn min_trace_with_pinned_entry() {
        // minimize trace(X) = maximize -trace(X), X11 = 1, 1x1 block
        let mut p = SdpProblem::new(vec![1], 0);
        p.push_row(vec![(0, 0, 0, 1.0)], vec![], 1.0);
        p.objective.entries.push((0, 0, 0, -1.0));
        let sol = solve(&p, &opts());
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.objective - (-1.0)).abs() < 1e-7);
        assert!((sol.blocks[0][(0, 0)] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn correlation_matrix_offdiagonal() {
        // maximize t s.t. [[1, t], [t, 1]] PSD -> t* = 1
        let mut p = SdpProblem::new(vec![2], 1);
        p.push_row(vec![(0, 0, 0, 1.0)], vec![], 1.0);
        p.push_row(vec![(0, 1, 1, 1.0)], vec![], 1.0);
        p.push_row(vec![(0, 0, 1, 0.5)], vec![(0, -1.0)], 0.0);
        p.objective.free.push((0, 1.0));
        let sol = solve(&p, &opts());
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-6, "got {}", sol.objective);
    }

    #[test]
    fn minimum_eigenvalue_oracle() {
        // max t s.t. A - t I >= 0 gives lambda_min(A)
        use nalgebra::DMatrix;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..3 {
            let n = 5;
            let mut a = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = rng.gen_range(-1.0..1.0);
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
            let want = a.clone().symmetric_eigen().eigenvalues.min();

            let mut p = SdpProblem::new(vec![n], 1);
            for i in 0..n {
                for j in i..n {
                    // Y_ij + t delta_ij = A_ij
                    let free = if i == j { vec![(0, 1.0)] } else { vec![] };
                    let w = if i == j { 1.0 } else { 0.5 };
                    p.push_row(vec![(0, i, j, w)], free, a[(i, j)]);
                }
            }
            p.objective.free.push((0, 1.0));
            let sol = solve(&p, &opts());
            assert_eq!(sol.status, SdpStatus::Optimal);
            assert!(
                (sol.objective - want).abs() < 1e-7,
                "lambda_min {want} vs {}",
                sol.objective
            );
        }
    }

    #[test]
    fn phase1_signs() {
        // "x1^2 is SOS": 1x1 Gram pinned to 1 -> margin 1
        let mut p = SdpProblem::new(vec![1], 0);
        p.push_row(vec![(0, 0, 0, 1.0)], vec![], 1.0);
        let (feas, t, _) = phase1(&p, &opts());
        assert!(feas);
        assert!((t - 1.0).abs() < 1e-6);

        // "-x1^2 is SOS": pinned to -1 -> margin -1
        let mut p = SdpProblem::new(vec![1], 0);
        p.push_row(vec![(0, 0, 0, 1.0)], vec![], -1.0);
        let (feas, t, _) = phase1(&p, &opts());
        assert!(!feas);
        assert!((t - (-1.0)).abs() < 1e-6);
    }

    #[test]
    fn phase1_parametric_psd_boundary() {
        // Gram of x1^2 - 2 eps x1 x2 + x2^2 pinned entirely; margin = 1 - |eps|
        for eps in [0.9, 0.999, 1.001, 1.1] {
            let mut p = SdpProblem::new(vec![2], 0);
            p.push_row(vec![(0, 0, 0, 1.0)], vec![], 1.0);
            p.push_row(vec![(0, 1, 1, 1.0)], vec![], 1.0);
            p.push_row(vec![(0, 0, 1, 0.5)], vec![], -eps);
            let (feas, t, _) = phase1(&p, &opts());
            assert!(
                (t - (1.0 - eps)).abs() < 1e-6,
                "eps {eps}: margin {t}"
            );
            assert_eq!(feas, eps < 1.0);
        }
    }

    #[test]
    fn dependent_rows_dropped_with_warning() {
        let mut p = SdpProblem::new(vec![1], 0);
        p.push_row(vec![(0, 0, 0, 1.0)], vec![], 2.0);
        p.push_row(vec![(0, 0, 0, 2.0)], vec![], 4.0); // same row scaled
        p.objective.entries.push((0, 0, 0, -1.0));
        let sol = solve(&p, &opts());
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_eq!(sol.dropped_rows, 1);
        assert!((sol.blocks[0][(0, 0)] - 2.0).abs() < 1e-7);
    }

    #[test]
    fn inconsistent_rows_are_infeasible() {
        let mut p = SdpProblem::new(vec![1], 0);
        p.push_row(vec![(0, 0, 0, 1.0)], vec![], 2.0);
        p.push_row(vec![(0, 0, 0, 2.0)], vec![], 5.0); // conflicts
        let sol = solve(&p, &opts());
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn row_permutation_invariance() {
        let build = |perm: &[usize]| {
            let rows: Vec<(Vec<Entry>, Vec<(usize, f64)>, f64)> = vec![
                (vec![(0, 0, 0, 1.0)], vec![], 1.0),
                (vec![(0, 1, 1, 1.0)], vec![], 2.0),
                (vec![(0, 0, 1, 0.5)], vec![(0, -1.0)], 0.0),
            ];
            let mut p = SdpProblem::new(vec![2], 1);
            for &k in perm {
                let (e, f, b) = rows[k].clone();
                p.push_row(e, f, b);
            }
            p.objective.free.push((0, 1.0));
            solve(&p, &opts()).objective
        };
        let a = build(&[0, 1, 2]);
        let b = build(&[2, 0, 1]);
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn weak_duality_near_convergence() {
        // maximize convention: primal <= dual + tol once nearly feasible
        let mut p = SdpProblem::new(vec![2], 1);
        p.push_row(vec![(0, 0, 0, 1.0)], vec![], 1.0);
        p.push_row(vec![(0, 1, 1, 1.0)], vec![], 1.0);
        p.push_row(vec![(0, 0, 1, 0.5)], vec![(0, -1.0)], 0.0);
        p.objective.free.push((0, 1.0));
        let sol = solve(&p, &opts());
        for l in &sol.log {
            if l.rp < 1e-6 && l.rd < 1e-6 {
                assert!(l.pobj <= l.dobj + 1e-6, "iter {}: {} > {}", l.iter, l.pobj, l.dobj);
            }
        }
    }
}
