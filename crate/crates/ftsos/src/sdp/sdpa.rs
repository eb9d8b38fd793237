//! SDPA sparse format (.dat-s) export for cross-checking against external
//! solvers.
//!
//! The problem `maximize <C, X> s.t. <A_i, X> = b_i, X >= 0` is written
//! with `F_0 = C`, `F_i = A_i` and cost vector `b`. Free scalars are
//! encoded as a trailing diagonal block of signed pairs `s = s+ - s-`.

use std::fmt::Write;

use super::SdpProblem;

pub fn write_sdpa(prob: &SdpProblem) -> String {
    let mut out = String::new();
    let m = prob.rows.len();
    let has_free = prob.nfree > 0;
    let nblocks = prob.blocks.len() + usize::from(has_free);
    writeln!(out, "{m} = mDIM").unwrap();
    writeln!(out, "{nblocks} = nBLOCK").unwrap();
    let mut sizes: Vec<String> = prob.blocks.iter().map(|n| n.to_string()).collect();
    if has_free {
        sizes.push(format!("-{}", 2 * prob.nfree));
    }
    writeln!(out, "{} = bLOCKsTRUCT", sizes.join(" ")).unwrap();
    writeln!(
        out,
        "{}",
        prob.rows
            .iter()
            .map(|r| format!("{:.16e}", r.rhs))
            .collect::<Vec<_>>()
            .join(" ")
    )
    .unwrap();

    let free_block = prob.blocks.len() + 1; // 1-based
    let emit = |mat: usize,
                    entries: &[(usize, usize, usize, f64)],
                    free: &[(usize, f64)],
                    out: &mut String| {
        for &(b, i, j, v) in entries {
            writeln!(out, "{mat} {} {} {} {:.16e}", b + 1, i + 1, j + 1, v).unwrap();
        }
        for &(f, v) in free {
            writeln!(out, "{mat} {free_block} {} {} {:.16e}", 2 * f + 1, 2 * f + 1, v).unwrap();
            writeln!(out, "{mat} {free_block} {} {} {:.16e}", 2 * f + 2, 2 * f + 2, -v).unwrap();
        }
    };
    emit(0, &prob.objective.entries, &prob.objective.free, &mut out);
    for (k, row) in prob.rows.iter().enumerate() {
        emit(k + 1, &row.entries, &row.free, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_small_problem() {
        let mut p = SdpProblem::new(vec![2], 1);
        p.push_row(vec![(0, 0, 0, 1.0)], vec![], 1.0);
        p.push_row(vec![(0, 0, 1, 1.0)], vec![(0, -1.0)], 0.0);
        p.objective.free.push((0, 1.0));
        let text = write_sdpa(&p);
        let want = "\
2 = mDIM
2 = nBLOCK
2 -2 = bLOCKsTRUCT
1.0000000000000000e0 0.0000000000000000e0
0 2 1 1 1.0000000000000000e0
0 2 2 2 -1.0000000000000000e0
1 1 1 1 1.0000000000000000e0
2 1 1 2 1.0000000000000000e0
2 2 1 1 -1.0000000000000000e0
2 2 2 2 1.0000000000000000e0
";
        assert_eq!(text, want);
    }
}
