//! Presolve: free-variable elimination, row normalization, and
//! dependent-row removal with consistency checking.

use nalgebra::DMatrix;

use super::{Entry, SdpProblem};

/// Record of one eliminated free variable: `coef * s = rhs - entries.X - frees.s`.
#[derive(Debug, Clone)]
pub(crate) struct Elim {
    pub free_id: usize,
    pub coef: f64,
    pub rhs: f64,
    pub entries: Vec<(u32, f64)>,
    pub frees: Vec<(usize, f64)>,
}

/// Standard-form problem after presolve (entries only, maximize).
#[derive(Debug)]
pub(crate) struct Clean {
    pub blocks: Vec<usize>,
    pub rows: Vec<Vec<Entry>>,
    pub b: Vec<f64>,
    /// Objective matrices (full symmetric), maximize convention.
    pub cobj: Vec<DMatrix<f64>>,
    pub obj_const: f64,
    pub elims: Vec<Elim>,
    pub dropped: usize,
    pub infeasible: bool,
    /// A free variable in the objective touched no constraint.
    pub unbounded_free: Option<usize>,
}

/// Maps `(block, i, j)` upper-triangle coordinates to flat columns.
pub(crate) struct Flat {
    blocks: Vec<usize>,
    offsets: Vec<u32>,
    pub nentries: u32,
}

impl Flat {
    pub fn new(blocks: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut acc: u32 = 0;
        for &n in blocks {
            offsets.push(acc);
            acc += (n * (n + 1) / 2) as u32;
        }
        Flat {
            blocks: blocks.to_vec(),
            offsets,
            nentries: acc,
        }
    }

    pub fn idx(&self, b: usize, i: usize, j: usize) -> u32 {
        debug_assert!(i <= j);
        let n = self.blocks[b];
        self.offsets[b] + (i * (2 * n - i + 1) / 2 + (j - i)) as u32
    }

    pub fn unidx(&self, col: u32) -> (usize, usize, usize) {
        let b = self.offsets.partition_point(|&o| o <= col) - 1;
        let n = self.blocks[b];
        let mut rel = (col - self.offsets[b]) as usize;
        let mut i = 0;
        while rel >= n - i {
            rel -= n - i;
            i += 1;
        }
        (b, i, i + rel)
    }
}

type SparseRow = Vec<(u32, f64)>;

fn merge_scaled(dst: &mut SparseRow, src: &SparseRow, s: f64) {
    if s == 0.0 {
        return;
    }
    let mut out = Vec::with_capacity(dst.len() + src.len());
    let (mut a, mut b) = (0, 0);
    while a < dst.len() || b < src.len() {
        match (dst.get(a), src.get(b)) {
            (Some(&(ca, va)), Some(&(cb, vb))) => {
                if ca < cb {
                    out.push((ca, va));
                    a += 1;
                } else if cb < ca {
                    out.push((cb, vb * s));
                    b += 1;
                } else {
                    let v = va + vb * s;
                    if v.abs() > 1e-300 {
                        out.push((ca, v));
                    }
                    a += 1;
                    b += 1;
                }
            }
            (Some(&(ca, va)), None) => {
                out.push((ca, va));
                a += 1;
            }
            (None, Some(&(cb, vb))) => {
                out.push((cb, vb * s));
                b += 1;
            }
            (None, None) => break,
        }
    }
    *dst = out;
}

pub(crate) fn clean(prob: &SdpProblem) -> Clean {
    let flat = Flat::new(&prob.blocks);
    let ne = flat.nentries;

    // flatten rows: entry columns [0, ne), free columns [ne, ne + nfree)
    let mut rows: Vec<SparseRow> = Vec::with_capacity(prob.rows.len());
    let mut rhs: Vec<f64> = Vec::with_capacity(prob.rows.len());
    for r in &prob.rows {
        let mut v: SparseRow = r
            .entries
            .iter()
            .map(|&(b, i, j, c)| (flat.idx(b, i, j), if i == j { c } else { 2.0 * c }))
            .chain(r.free.iter().map(|&(f, c)| (ne + f as u32, c)))
            .collect();
        v.sort_by_key(|&(c, _)| c);
        let mut combined: SparseRow = Vec::with_capacity(v.len());
        for (c, val) in v {
            if let Some(last) = combined.last_mut() {
                if last.0 == c {
                    last.1 += val;
                    continue;
                }
            }
            combined.push((c, val));
        }
        combined.retain(|&(_, v)| v != 0.0);
        rows.push(combined);
        rhs.push(r.rhs);
    }

    let mut obj: SparseRow = prob
        .objective
        .entries
        .iter()
        .map(|&(b, i, j, c)| (flat.idx(b, i, j), if i == j { c } else { 2.0 * c }))
        .chain(
            prob.objective
                .free
                .iter()
                .map(|&(f, c)| (ne + f as u32, c)),
        )
        .collect();
    obj.sort_by_key(|&(c, _)| c);
    let mut obj_const = prob.objective.constant;

    // eliminate free variables
    let mut active: Vec<bool> = vec![true; rows.len()];
    let mut elims: Vec<Elim> = Vec::new();
    let mut unbounded_free = None;
    for f in 0..prob.nfree {
        let col = ne + f as u32;
        let coef_in = |row: &SparseRow| {
            row.binary_search_by_key(&col, |&(c, _)| c)
                .ok()
                .map(|k| row[k].1)
        };
        let mut best: Option<(usize, f64)> = None;
        for (r, row) in rows.iter().enumerate() {
            if !active[r] {
                continue;
            }
            if let Some(c) = coef_in(row) {
                if best.map_or(true, |(_, bc): (usize, f64)| c.abs() > bc.abs()) {
                    best = Some((r, c));
                }
            }
        }
        let Some((r, coef)) = best else {
            // never constrained: value 0; unbounded if the objective uses it
            if obj.iter().any(|&(c, v)| c == col && v != 0.0) {
                unbounded_free = Some(f);
            }
            elims.push(Elim {
                free_id: f,
                coef: 1.0,
                rhs: 0.0,
                entries: vec![],
                frees: vec![],
            });
            continue;
        };
        active[r] = false;
        let mut pivot = std::mem::take(&mut rows[r]);
        let prhs = rhs[r];
        pivot.retain(|&(c, _)| c != col);
        let elim = Elim {
            free_id: f,
            coef,
            rhs: prhs,
            entries: pivot
                .iter()
                .filter(|&&(c, _)| c < ne)
                .map(|&(c, v)| (c, v))
                .collect(),
            frees: pivot
                .iter()
                .filter(|&&(c, _)| c >= ne)
                .map(|&(c, v)| ((c - ne) as usize, v))
                .collect(),
        };
        // substitute into every other active row and the objective
        for (rr, row) in rows.iter_mut().enumerate() {
            if !active[rr] {
                continue;
            }
            if let Some(c) = coef_in(row) {
                let s = -c / coef;
                row.retain(|&(cc, _)| cc != col);
                merge_scaled(row, &pivot, s);
                rhs[rr] += s * prhs;
            }
        }
        if let Some(c) = coef_in(&obj) {
            let s = -c / coef;
            obj.retain(|&(cc, _)| cc != col);
            merge_scaled(&mut obj, &pivot, s);
            obj_const -= s * prhs;
        }
        elims.push(elim);
    }

    // normalize and drop empty rows
    let mut kept_rows: Vec<SparseRow> = Vec::new();
    let mut kept_b: Vec<f64> = Vec::new();
    let mut infeasible = false;
    let mut dropped = 0usize;
    let b_scale = rhs.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    for (r, row) in rows.iter().enumerate() {
        if !active[r] {
            continue;
        }
        let norm: f64 = row.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        if norm < 1e-13 {
            if rhs[r].abs() > 1e-9 * (1.0 + b_scale) {
                infeasible = true;
            } else {
                dropped += 1;
            }
            continue;
        }
        kept_rows.push(row.iter().map(|&(c, v)| (c, v / norm)).collect());
        kept_b.push(rhs[r] / norm);
    }

    // dependent rows: pivoted Cholesky of the row Gram matrix
    let m = kept_rows.len();
    if m > 1 {
        let mut g = DMatrix::<f64>::zeros(m, m);
        let mut buckets: std::collections::HashMap<u32, Vec<(usize, f64)>> =
            std::collections::HashMap::new();
        for (r, row) in kept_rows.iter().enumerate() {
            for &(c, v) in row {
                buckets.entry(c).or_default().push((r, v));
            }
        }
        for tied in buckets.values() {
            for (k, &(ra, va)) in tied.iter().enumerate() {
                for &(rb, vb) in &tied[k..] {
                    let (lo, hi) = (ra.min(rb), ra.max(rb));
                    g[(hi, lo)] += va * vb;
                }
            }
        }
        for i in 0..m {
            for j in (i + 1)..m {
                g[(i, j)] = g[(j, i)];
            }
        }
        if std::env::var("FTSOS_PRESOLVE_DEBUG").is_ok() {
            let eig = g.clone().symmetric_eigen();
            eprintln!("presolve: G min eig {:.3e} max {:.3e}", eig.eigenvalues.min(), eig.eigenvalues.max());
        }
        let (perm, rank, l) = pivoted_cholesky(g, 1e-10);
        if rank < m {
            let mut keep_flags = vec![false; m];
            for &p in &perm[..rank] {
                keep_flags[p] = true;
            }
            // consistency of each dropped row against the kept span
            for pos in rank..m {
                // w = L_KK^{-1} G_Kr sits in l[(pos, 0..rank)]
                let mut mu: Vec<f64> = (0..rank).map(|k| l[(pos, k)]).collect();
                for k in (0..rank).rev() {
                    mu[k] /= l[(k, k)];
                    let muk = mu[k];
                    for kk in 0..k {
                        mu[kk] -= l[(k, kk)] * muk;
                    }
                }
                let pred: f64 = (0..rank).map(|k| mu[k] * kept_b[perm[k]]).sum();
                if (kept_b[perm[pos]] - pred).abs() > 1e-7 * (1.0 + b_scale) {
                    if std::env::var("FTSOS_PRESOLVE_DEBUG").is_ok() {
                        eprintln!("presolve: row {} dependent, b {} pred {} (m {} rank {})",
                            perm[pos], kept_b[perm[pos]], pred, m, rank);
                    }
                    infeasible = true;
                }
            }
            let mut new_rows = Vec::with_capacity(rank);
            let mut new_b = Vec::with_capacity(rank);
            for (r, row) in kept_rows.into_iter().enumerate() {
                if keep_flags[r] {
                    new_rows.push(row);
                    new_b.push(kept_b[r]);
                } else {
                    dropped += 1;
                }
            }
            kept_rows = new_rows;
            kept_b = new_b;
        }
    }

    // unflatten
    let rows_out: Vec<Vec<Entry>> = kept_rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|&(c, v)| {
                    let (b, i, j) = flat.unidx(c);
                    (b, i, j, if i == j { v } else { 0.5 * v })
                })
                .collect()
        })
        .collect();

    let mut cobj: Vec<DMatrix<f64>> = prob
        .blocks
        .iter()
        .map(|&n| DMatrix::zeros(n, n))
        .collect();
    for &(c, v) in &obj {
        debug_assert!(c < ne, "free variable survived elimination");
        if c < ne {
            let (b, i, j) = flat.unidx(c);
            let w = if i == j { v } else { 0.5 * v };
            cobj[b][(i, j)] = w;
            cobj[b][(j, i)] = w;
        }
    }

    Clean {
        blocks: prob.blocks.clone(),
        rows: rows_out,
        b: kept_b,
        cobj,
        obj_const,
        elims,
        dropped,
        infeasible,
        unbounded_free,
    }
}

/// Diagonal-pivoted Cholesky. Returns the permutation, the numerical rank
/// (pivots above `tol` times the largest initial diagonal), and the factor
/// in permuted layout; rows beyond the rank boundary keep their partially
/// reduced values `L_KK^{-1} G_Kr` in their leading columns.
fn pivoted_cholesky(mut g: DMatrix<f64>, tol: f64) -> (Vec<usize>, usize, DMatrix<f64>) {
    let m = g.nrows();
    let mut perm: Vec<usize> = (0..m).collect();
    let scale = (0..m).map(|i| g[(i, i)]).fold(1e-300, f64::max);
    let thresh = tol * scale;
    let mut rank = m;
    for k in 0..m {
        let (mut best, mut best_v) = (k, g[(k, k)]);
        for i in (k + 1)..m {
            if g[(i, i)] > best_v {
                best = i;
                best_v = g[(i, i)];
            }
        }
        if best_v <= thresh {
            rank = k;
            break;
        }
        if best != k {
            g.swap_rows(k, best);
            g.swap_columns(k, best);
            perm.swap(k, best);
        }
        let d = g[(k, k)].sqrt();
        g[(k, k)] = d;
        for i in (k + 1)..m {
            g[(i, k)] /= d;
        }
        for j in (k + 1)..m {
            let ljk = g[(j, k)];
            if ljk != 0.0 {
                for i in j..m {
                    let v = g[(i, j)] - g[(i, k)] * ljk;
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
        }
    }
    (perm, rank, g)
}

/// Back-substitute the recorded eliminations to recover free scalars from
/// a solved block solution.
pub(crate) fn recover_scalars(
    elims: &[Elim],
    nfree: usize,
    flat: &Flat,
    blocks: &[DMatrix<f64>],
) -> Vec<f64> {
    let mut vals = vec![0.0; nfree];
    for e in elims.iter().rev() {
        let mut v = e.rhs;
        for &(c, coef) in &e.entries {
            let (b, i, j) = flat.unidx(c);
            v -= coef * blocks[b][(i, j)];
        }
        for &(f, coef) in &e.frees {
            v -= coef * vals[f];
        }
        vals[e.free_id] = v / e.coef;
    }
    vals
}
