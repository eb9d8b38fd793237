use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};

fn pivoted_cholesky(mut g: DMatrix<f64>, tol: f64) -> (Vec<usize>, usize, DMatrix<f64>) {
    let m = g.nrows();
    let mut perm: Vec<usize> = (0..m).collect();
    let scale = (0..m).map(|i| g[(i, i)]).fold(1e-300, f64::max);
    let thresh = tol * scale;
    let mut rank = m;
    for k in 0..m {
        let (mut best, mut best_v) = (k, g[(k, k)]);
        for i in (k + 1)..m {
            if g[(i, i)] > best_v { best = i; best_v = g[(i, i)]; }
        }
        if best_v <= thresh { rank = k; break; }
        if best != k {
            g.swap_rows(k, best);
            g.swap_columns(k, best);
            perm.swap(k, best);
        }
        let d = g[(k, k)].sqrt();
        g[(k, k)] = d;
        for i in (k + 1)..m { g[(i, k)] /= d; }
        for j in (k + 1)..m {
            let ljk = g[(j, k)];
            if ljk != 0.0 {
                for i in j..m { let v = g[(i, j)] - g[(i, k)] * ljk; g[(i, j)] = v; g[(j, i)] = v; }
            }
        }
    }
    (perm, rank, g)
}

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let m = 8;
    let a = DMatrix::<f64>::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
    let g = &a * a.transpose() + DMatrix::identity(m, m) * 0.5;
    let (perm, rank, l) = pivoted_cholesky(g.clone(), 1e-10);
    println!("rank {rank} of {m}, perm {perm:?}");
    // rebuild P G P^T from L
    let mut ll = DMatrix::zeros(m, m);
    for i in 0..m { for j in 0..=i.min(rank.saturating_sub(1)) { ll[(i,j)] = l[(i,j)]; } }
    let rebuilt = &ll * ll.transpose();
    let mut pg = DMatrix::zeros(m, m);
    for i in 0..m { for j in 0..m { pg[(i,j)] = g[(perm[i], perm[j])]; } }
    println!("factor error {:.3e}", (rebuilt - pg).norm());
}
