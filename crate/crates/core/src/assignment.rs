//! Maximum-weight bipartite assignment (Hungarian algorithm).
//!
//! Runs the potentials formulation in O(n³) on a rectangular weight matrix
//! padded to square with zero-weight cells, so rows and columns may be left
//! unassigned whenever that does not reduce the total weight.

/// Solves `max Σ weights[i][assign[i]]` over injective partial assignments.
///
/// `weights` is a rectangular `rows x cols` matrix of finite values.
/// Returns the best achievable total and, for each row, the column it was
/// assigned to. Rows parked on padding columns are reported as `None`.
/// Weights of zero or below never improve the total, so callers treating
/// such pairs as forbidden should drop them from the returned assignment.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> (f64, Vec<Option<usize>>) {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    debug_assert!(weights.iter().all(|r| r.len() == cols), "ragged matrix");
    if rows == 0 || cols == 0 {
        return (0.0, vec![None; rows]);
    }

    // Minimise negated weights on a square matrix; padding cells cost 0.
    let n = rows.max(cols);
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            -weights[i][j]
        } else {
            0.0
        }
    };

    // Potentials formulation, 1-indexed; p[j] is the row assigned to
    // column j, and column 0 is the staging slot for the current row.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // Walk the augmenting path back to the staging slot.
        while j0 != 0 {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        }
    }

    let mut assignment = vec![None; rows];
    let mut total = 0.0;
    for j in 1..=n {
        let i = p[j];
        if (1..=rows).contains(&i) && j <= cols {
            assignment[i - 1] = Some(j - 1);
            total += weights[i - 1][j - 1];
        }
    }
    (total, assignment)
}
