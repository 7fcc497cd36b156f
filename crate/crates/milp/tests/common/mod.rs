//! Reference solvers used only as test oracles.

/// Textbook primal simplex with Bland's rule for
/// `max c.x  s.t.  A x <= b,  x >= 0` with `b >= 0` (origin feasible).
/// Returns the optimal objective, or `None` if unbounded.
pub fn textbook_simplex(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let m = a.len();
    let n = c.len();
    let w = n + m + 1;
    let mut t = vec![vec![0.0; w]; m + 1];
    for i in 0..m {
        assert!(b[i] >= 0.0);
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][w - 1] = b[i];
    }
    for j in 0..n {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    loop {
        let Some(q) = (0..n + m).find(|&j| t[m][j] < -1e-11) else {
            return Some(t[m][w - 1]);
        };
        let mut best: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][q] > 1e-11 {
                let ratio = t[i][w - 1] / t[i][q];
                let better = match best {
                    None => true,
                    Some((bi, br)) => {
                        ratio < br - 1e-12 || ((ratio - br).abs() <= 1e-12 && basis[i] < basis[bi])
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
        }
        let (r, _) = best?;
        let p = t[r][q];
        for v in t[r].iter_mut() {
            *v /= p;
        }
        let prow = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r && row[q] != 0.0 {
                let f = row[q];
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
        basis[r] = q;
    }
}
