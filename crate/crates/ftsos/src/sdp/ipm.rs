//! Path-following interior-point iteration with Nesterov-Todd scaling and
//! a Mehrotra predictor-corrector step.

use nalgebra::DMatrix;

use super::presolve::{self, Flat};
use super::{Entry, IterLog, SdpOptions, SdpProblem, SdpSolution, SdpStatus};

struct BlockRows {
    /// Per block: list of (row index, entries of that row in this block).
    per_block: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>>,
}

impl BlockRows {
    fn new(nblocks: usize, rows: &[Vec<Entry>]) -> Self {
        let mut per_block = vec![Vec::new(); nblocks];
        for (r, row) in rows.iter().enumerate() {
            let mut by_block: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); nblocks];
            for &(b, i, j, v) in row {
                by_block[b].push((i, j, v));
            }
            for (b, list) in by_block.into_iter().enumerate() {
                if !list.is_empty() {
                    per_block[b].push((r, list));
                }
            }
        }
        BlockRows { per_block }
    }
}

fn a_dot(entries: &[(usize, usize, f64)], x: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for &(i, j, v) in entries {
        acc += if i == j {
            v * x[(i, i)]
        } else {
            2.0 * v * x[(i, j)]
        };
    }
    acc
}

fn add_scaled_into(entries: &[(usize, usize, f64)], s: f64, m: &mut DMatrix<f64>) {
    for &(i, j, v) in entries {
        m[(i, j)] += s * v;
        if i != j {
            m[(j, i)] += s * v;
        }
    }
}

fn frob(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest step `alpha` keeping `x + alpha*dx` positive semidefinite.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    if n == 0 {
        return f64::INFINITY;
    }
    let chol = match x.clone().cholesky() {
        Some(c) => c,
        None => return 0.0,
    };
    let l = chol.l();
    let a = l
        .solve_lower_triangular(dx)
        .expect("triangular solve");
    let st = l
        .solve_lower_triangular(&a.transpose())
        .expect("triangular solve");
    let mut s = st;
    symmetrize(&mut s);
    let lam_min = s.symmetric_eigen().eigenvalues.min();
    if lam_min >= -1e-13 {
        f64::INFINITY
    } else {
        -1.0 / lam_min
    }
}

/// Nesterov-Todd scaling point: `W Z W = X`.
fn nt_scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let l = x.clone().cholesky()?.l();
    let k = &l.transpose() * z * &l;
    let mut ks = k;
    symmetrize(&mut ks);
    let eig = ks.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let q = &eig.eigenvectors;
    let scale = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    let inner = q * scale * q.transpose();
    Some(&l * inner * l.transpose())
}

pub(crate) fn solve(prob: &SdpProblem, opts: &SdpOptions) -> SdpSolution {
    let clean = presolve::clean(prob);
    let flat = Flat::new(&prob.blocks);
    let nblocks = clean.blocks.len();

    let fail = |status: SdpStatus| SdpSolution {
        status,
        blocks: clean.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
        scalars: vec![0.0; prob.nfree],
        objective: f64::NAN,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        duality_gap: f64::INFINITY,
        iterations: 0,
        dropped_rows: clean.dropped,
        log: Vec::new(),
    };

    if clean.infeasible {
        return fail(SdpStatus::Infeasible);
    }
    if clean.unbounded_free.is_some() {
        return fail(SdpStatus::NumericalFailure);
    }

    let m = clean.rows.len();
    let total_dim: usize = clean.blocks.iter().sum();
    // internal minimize convention
    let c_int: Vec<DMatrix<f64>> = clean.cobj.iter().map(|c| -c).collect();
    let b = nalgebra::DVector::from_vec(clean.b.clone());
    let block_rows = BlockRows::new(nblocks, &clean.rows);

    // initial point: identity scaled by a trace heuristic
    let b_scale = clean.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let c_scale = c_int.iter().map(frob).fold(0.0, f64::max);
    let eta_p = 10.0 * (1.0 + b_scale.sqrt());
    let eta_d = 10.0 * (1.0 + c_scale.sqrt());
    let mut x: Vec<DMatrix<f64>> = clean
        .blocks
        .iter()
        .map(|&n| DMatrix::identity(n, n) * eta_p)
        .collect();
    let mut z: Vec<DMatrix<f64>> = clean
        .blocks
        .iter()
        .map(|&n| DMatrix::identity(n, n) * eta_d)
        .collect();
    let mut y = nalgebra::DVector::<f64>::zeros(m);

    let mut log: Vec<IterLog> = Vec::new();
    let mut status = SdpStatus::MaxIter;
    let mut iterations = 0;
    let mut tiny_steps = 0usize;
    // best iterate so far: (x, y, z, score, rp, rd, gap_rel)
    struct Best {
        x: Vec<DMatrix<f64>>,
        y: nalgebra::DVector<f64>,
        z: Vec<DMatrix<f64>>,
        score: f64,
        rp: f64,
        rd: f64,
        gap_rel: f64,
    }
    let mut best: Option<Best> = None;

    let nf = total_dim.max(1) as f64;
    for iter in 0..opts.max_iter {
        iterations = iter;
        // residuals
        let mut rp = b.clone();
        for blk in 0..nblocks {
            for &(r, ref entries) in &block_rows.per_block[blk] {
                rp[r] -= a_dot(entries, &x[blk]);
            }
        }
        let mut rd: Vec<DMatrix<f64>> = Vec::with_capacity(nblocks);
        for blk in 0..nblocks {
            let mut d = c_int[blk].clone();
            for &(r, ref entries) in &block_rows.per_block[blk] {
                add_scaled_into(entries, -y[r], &mut d);
            }
            d -= &z[blk];
            rd.push(d);
        }
        let gap: f64 = (0..nblocks).map(|k| x[k].dot(&z[k])).sum();
        let mu = gap / nf;
        let pobj_int: f64 = (0..nblocks).map(|k| c_int[k].dot(&x[k])).sum();
        let dobj_int: f64 = b.dot(&y);
        let rp_rel = rp.norm() / (1.0 + b.norm());
        let rd_rel =
            rd.iter().map(frob).fold(0.0f64, f64::max) / (1.0 + c_scale);
        let gap_rel = gap.abs() / (1.0 + pobj_int.abs() + dobj_int.abs());

        let entry = IterLog {
            iter,
            mu,
            pobj: -pobj_int + clean.obj_const,
            dobj: -dobj_int + clean.obj_const,
            rp: rp_rel,
            rd: rd_rel,
        };
        if opts.trace {
            eprintln!(
                "iter {:3}  mu {:9.3e}  gap {:9.3e}  rp {:9.3e}  rd {:9.3e}  pobj {:+.9e}",
                entry.iter, entry.mu, gap_rel, entry.rp, entry.rd, entry.pobj
            );
        }
        log.push(entry);

        let score = rp_rel + rd_rel + gap_rel;
        if best.as_ref().map_or(true, |b| score < b.score) {
            best = Some(Best {
                x: x.clone(),
                y: y.clone(),
                z: z.clone(),
                score,
                rp: rp_rel,
                rd: rd_rel,
                gap_rel,
            });
        }
        if rp_rel <= opts.tol_feas && rd_rel <= opts.tol_feas && gap_rel <= opts.tol_gap {
            status = SdpStatus::Optimal;
            break;
        }
        // conditioning collapse shows up as runaway primal residual
        if iter > 5 {
            if let Some(b) = &best {
                if rp_rel > 1e3 * b.rp + 1e-3 {
                    status = SdpStatus::NumericalFailure;
                    break;
                }
            }
        }

        // scaling
        let mut w: Vec<DMatrix<f64>> = Vec::with_capacity(nblocks);
        let mut zinv: Vec<DMatrix<f64>> = Vec::with_capacity(nblocks);
        let mut scaling_ok = true;
        for blk in 0..nblocks {
            match (nt_scaling(&x[blk], &z[blk]), z[blk].clone().cholesky()) {
                (Some(wk), Some(ch)) => {
                    w.push(wk);
                    zinv.push(ch.inverse());
                }
                _ => {
                    scaling_ok = false;
                    break;
                }
            }
        }
        if !scaling_ok {
            status = SdpStatus::NumericalFailure;
            break;
        }

        // Schur complement M[r][s] = sum_blk <A_r, W A_s W>
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for blk in 0..nblocks {
            let n = clean.blocks[blk];
            if n == 0 {
                continue;
            }
            let rows_here = &block_rows.per_block[blk];
            let wb = &w[blk];
            let mut bmat = DMatrix::<f64>::zeros(n, n);
            for (pos, &(r, ref entries)) in rows_here.iter().enumerate() {
                bmat.fill(0.0);
                for &(i, j, v) in entries {
                    let wi = wb.column(i);
                    let wj = wb.column(j);
                    if i == j {
                        bmat.ger(v, &wi, &wj, 1.0);
                    } else {
                        bmat.ger(v, &wi, &wj, 1.0);
                        bmat.ger(v, &wj, &wi, 1.0);
                    }
                }
                for &(s, ref entries_s) in &rows_here[pos..] {
                    schur[(r, s)] += a_dot(entries_s, &bmat);
                }
            }
        }
        for r in 0..m {
            for s in (r + 1)..m {
                let v = schur[(r, s)] + schur[(s, r)];
                schur[(r, s)] = v;
                schur[(s, r)] = v;
            }
        }

        // factor with adaptive regularization
        let diag_scale = (0..m).map(|i| schur[(i, i)]).fold(1e-300, f64::max);
        let mut chol = None;
        let mut reg = 0.0;
        for attempt in 0..4 {
            let mut trial = schur.clone();
            if attempt > 0 {
                reg = if attempt == 1 {
                    1e-12 * diag_scale
                } else {
                    reg * 100.0
                };
                for i in 0..m {
                    trial[(i, i)] += reg;
                }
            }
            if let Some(c) = trial.cholesky() {
                chol = Some(c);
                break;
            }
        }
        let Some(chol) = chol else {
            status = SdpStatus::NumericalFailure;
            break;
        };

        // helper closures
        let a_of = |mat: &[DMatrix<f64>]| -> nalgebra::DVector<f64> {
            let mut out = nalgebra::DVector::zeros(m);
            for blk in 0..nblocks {
                for &(r, ref entries) in &block_rows.per_block[blk] {
                    out[r] += a_dot(entries, &mat[blk]);
                }
            }
            out
        };
        let wrdw: Vec<DMatrix<f64>> = (0..nblocks)
            .map(|k| &w[k] * &rd[k] * &w[k])
            .collect();
        let a_wrdw = a_of(&wrdw);

        // predictor (affine direction, sigma = 0)
        let rc_aff: Vec<DMatrix<f64>> = (0..nblocks).map(|k| -&x[k]).collect();
        let rhs_aff = &rp - a_of(&rc_aff) + &a_wrdw;
        let mut dy_aff = chol.solve(&rhs_aff);
        let resid = &rhs_aff - &schur * &dy_aff;
        dy_aff += chol.solve(&resid);
        let mut dz_aff = rd.clone();
        for blk in 0..nblocks {
            for &(r, ref entries) in &block_rows.per_block[blk] {
                add_scaled_into(entries, -dy_aff[r], &mut dz_aff[blk]);
            }
        }
        let dx_aff: Vec<DMatrix<f64>> = (0..nblocks)
            .map(|k| &rc_aff[k] - &w[k] * &dz_aff[k] * &w[k])
            .collect();

        let ap_aff = (0..nblocks)
            .map(|k| max_step(&x[k], &dx_aff[k]))
            .fold(f64::INFINITY, f64::min)
            .min(1.0);
        let ad_aff = (0..nblocks)
            .map(|k| max_step(&z[k], &dz_aff[k]))
            .fold(f64::INFINITY, f64::min)
            .min(1.0);
        let mut gap_aff = 0.0;
        for k in 0..nblocks {
            let xa = &x[k] + &dx_aff[k] * ap_aff;
            let za = &z[k] + &dz_aff[k] * ad_aff;
            gap_aff += xa.dot(&za);
        }
        let sigma = ((gap_aff / gap).powi(3)).clamp(1e-10, 1.0);

        // corrector
        let rc: Vec<DMatrix<f64>> = (0..nblocks)
            .map(|k| {
                let p = &dx_aff[k] * &dz_aff[k] * &zinv[k];
                let mut t = 0.5 * (&p + &p.transpose());
                t = &zinv[k] * (sigma * mu) - &x[k] - t;
                t
            })
            .collect();
        let rhs = &rp - a_of(&rc) + &a_wrdw;
        let mut dy = chol.solve(&rhs);
        let resid = &rhs - &schur * &dy;
        dy += chol.solve(&resid);
        let mut dz = rd.clone();
        for blk in 0..nblocks {
            for &(r, ref entries) in &block_rows.per_block[blk] {
                add_scaled_into(entries, -dy[r], &mut dz[blk]);
            }
        }
        let mut dx: Vec<DMatrix<f64>> = (0..nblocks)
            .map(|k| &rc[k] - &w[k] * &dz[k] * &w[k])
            .collect();
        for d in dx.iter_mut() {
            symmetrize(d);
        }
        let tau = 0.98;
        let step_of = |xs: &[DMatrix<f64>], ds: &[DMatrix<f64>]| {
            (0..nblocks)
                .map(|k| max_step(&xs[k], &ds[k]))
                .fold(f64::INFINITY, f64::min)
                .min(1.0 / tau)
                * tau
        };
        let mut ap = step_of(&x, &dx).min(1.0);
        let mut ad = step_of(&z, &dz).min(1.0);

        // pure centering fallback when the corrected step collapses
        if ap.min(ad) < 0.01 {
            let sigma_c = 0.8f64.max(sigma);
            let rc_c: Vec<DMatrix<f64>> = (0..nblocks)
                .map(|k| &zinv[k] * (sigma_c * mu) - &x[k])
                .collect();
            let rhs_c = &rp - a_of(&rc_c) + &a_wrdw;
            let dy_c = chol.solve(&rhs_c);
            let mut dz_c = rd.clone();
            for blk in 0..nblocks {
                for &(r, ref entries) in &block_rows.per_block[blk] {
                    add_scaled_into(entries, -dy_c[r], &mut dz_c[blk]);
                }
            }
            let mut dx_c: Vec<DMatrix<f64>> = (0..nblocks)
                .map(|k| &rc_c[k] - &w[k] * &dz_c[k] * &w[k])
                .collect();
            for d in dx_c.iter_mut() {
                symmetrize(d);
            }
            let ap_c = step_of(&x, &dx_c).min(1.0);
            let ad_c = step_of(&z, &dz_c).min(1.0);
            if ap_c.min(ad_c) > ap.min(ad) {
                dx = dx_c;
                dz = dz_c;
                dy = dy_c;
                ap = ap_c;
                ad = ad_c;
                if opts.trace {
                    eprintln!("iter {iter:3}  centering fallback (sigma {sigma_c:.2})");
                }
            }
        }

        for k in 0..nblocks {
            x[k] += &dx[k] * ap;
            z[k] += &dz[k] * ad;
            symmetrize(&mut x[k]);
            symmetrize(&mut z[k]);
        }
        y += &dy * ad;

        if ap < 1e-8 && ad < 1e-8 {
            tiny_steps += 1;
            if tiny_steps >= 3 {
                status = SdpStatus::NumericalFailure;
                break;
            }
        } else {
            tiny_steps = 0;
        }
    }

    // fall back to the best iterate seen, and accept it at the contract
    // tolerances if the tight targets were not reached
    if let Some(b) = best {
        let last_worse = log
            .last()
            .map_or(true, |l| l.rp + l.rd > b.rp + b.rd + b.gap_rel);
        if status != SdpStatus::Optimal || last_worse {
            x = b.x;
            y = b.y;
            z = b.z;
            if status != SdpStatus::Optimal && b.rp <= 1e-8 && b.rd <= 1e-8 && b.gap_rel <= 1e-7
            {
                status = SdpStatus::Optimal;
            }
        }
    }
    let _ = &y;

    // recover scalars and report in the original problem's terms
    let scalars = presolve::recover_scalars(&clean.elims, prob.nfree, &flat, &x);
    let mut objective = prob.objective.constant;
    for &(bq, i, j, v) in &prob.objective.entries {
        objective += if i == j {
            v * x[bq][(i, i)]
        } else {
            2.0 * v * x[bq][(i, j)]
        };
    }
    for &(f, v) in &prob.objective.free {
        objective += v * scalars[f];
    }
    let mut primal_residual = 0.0f64;
    for row in &prob.rows {
        let mut val = 0.0;
        for &(bq, i, j, v) in &row.entries {
            val += if i == j {
                v * x[bq][(i, i)]
            } else {
                2.0 * v * x[bq][(i, j)]
            };
        }
        for &(f, v) in &row.free {
            val += v * scalars[f];
        }
        primal_residual = primal_residual.max((val - row.rhs).abs() / (1.0 + row.rhs.abs()));
    }
    let (dual_residual, duality_gap) = match log.last() {
        Some(l) => (l.rd, {
            let gap: f64 = (0..nblocks).map(|k| x[k].dot(&z[k])).sum();
            gap.abs() / (1.0 + l.pobj.abs() + l.dobj.abs())
        }),
        None => (f64::INFINITY, f64::INFINITY),
    };

    SdpSolution {
        status,
        blocks: x,
        scalars,
        objective,
        primal_residual,
        dual_residual,
        duality_gap,
        iterations: iterations + 1,
        dropped_rows: clean.dropped,
        log,
    }
}
