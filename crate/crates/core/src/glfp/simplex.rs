//! Dense phase-1 simplex for feasibility of `A z <= b, z >= 0`.

const PIVOT_TOL: f64 = 1e-11;

/// Returns a feasible `z` or `None`.
///
/// Rows with a negative right-hand side are negated and get an artificial
/// variable; phase 1 minimizes the sum of artificials with Bland's rule, so
/// the method cannot cycle.
pub fn feasible_point(a: &[Vec<f64>], b: &[f64], nvars: usize, tol: f64) -> Option<Vec<f64>> {
    let m = a.len();
    let n_art = b.iter().filter(|v| **v < 0.0).count();
    // Columns: structural, slacks, artificials, rhs.
    let width = nvars + m + n_art + 1;
    let rhs = width - 1;
    let mut t = vec![0.0; (m + 1) * width];
    let mut basis = vec![0usize; m];
    let mut art = nvars + m;
    for (i, (row, &bi)) in a.iter().zip(b).enumerate() {
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        let tr = &mut t[i * width..(i + 1) * width];
        for (o, v) in tr[..nvars].iter_mut().zip(row) {
            *o = sign * v;
        }
        tr[nvars + i] = sign;
        tr[rhs] = sign * bi;
        if bi < 0.0 {
            tr[art] = 1.0;
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = nvars + i;
        }
    }
    if n_art > 0 {
        // Objective row holds reduced costs of min Σ artificials.
        let (rows, obj) = t.split_at_mut(m * width);
        for (i, &bv) in basis.iter().enumerate() {
            if bv >= nvars + m {
                for (o, v) in obj.iter_mut().zip(&rows[i * width..(i + 1) * width]) {
                    *o -= v;
                }
            }
        }
        for c in nvars + m..rhs {
            obj[c] = 0.0;
        }
        let scale = 1.0 + b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let max_pivots = 50 * (m + width);
        for _ in 0..max_pivots {
            let obj = &t[m * width..];
            let Some(enter) = (0..rhs).find(|&c| obj[c] < -PIVOT_TOL * scale) else {
                break;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let col = t[i * width + enter];
                if col > PIVOT_TOL {
                    let ratio = t[i * width + rhs] / col;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-15 * lr.abs().max(1.0)
                                || (ratio <= lr + 1e-15 * lr.abs().max(1.0) && basis[i] < basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            // Phase-1 objective is bounded below, so a column always exists.
            let Some((row, _)) = leave else { break };
            pivot(&mut t, width, m, row, enter);
            basis[row] = enter;
        }
        if -t[m * width + rhs] > tol * scale {
            return None;
        }
    }
    let mut z = vec![0.0; nvars];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < nvars {
            z[bv] = t[i * width + rhs].max(0.0);
        }
    }
    Some(z)
}

fn pivot(t: &mut [f64], width: usize, m: usize, row: usize, col: usize) {
    let p = t[row * width + col];
    for v in &mut t[row * width..(row + 1) * width] {
        *v /= p;
    }
    let pivot_row: Vec<f64> = t[row * width..(row + 1) * width].to_vec();
    for i in 0..=m {
        if i == row {
            continue;
        }
        let f = t[i * width + col];
        if f != 0.0 {
            for (o, v) in t[i * width..(i + 1) * width].iter_mut().zip(&pivot_row) {
                *o -= f * v;
            }
            t[i * width + col] = 0.0;
        }
    }
}
