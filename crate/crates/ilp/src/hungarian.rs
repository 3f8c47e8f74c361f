/// A (partial) row-to-column matching.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `assignment[row]` is the matched column, if any.
    pub assignment: Vec<Option<usize>>,
    pub total: f64,
}

/// Maximum-weight bipartite matching.
///
/// `weights[r][c]` is the gain of matching row `r` with column `c`; any
/// non-finite entry (typically `f64::NEG_INFINITY`) marks a forbidden cell.
/// Rows may be left unmatched, so cells with weight `<= 0` are never used.
/// Runs the O(n^3) potential-based assignment algorithm on the square
/// completion of the matrix.
pub fn hungarian(weights: &[Vec<f64>]) -> Matching {
    let rows = weights.len();
    let cols = weights.iter().map(Vec::len).max().unwrap_or(0);
    let n = rows.max(cols);
    let gain = |r: usize, c: usize| -> f64 {
        match weights.get(r).and_then(|row| row.get(c)) {
            Some(&w) if w.is_finite() && w > 0.0 => w,
            _ => 0.0,
        }
    };
    if n == 0 {
        return Matching {
            assignment: Vec::new(),
            total: 0.0,
        };
    }

    // 1-based arrays; column 0 is the virtual root of each augmenting search.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for r in 1..=n {
        owner[0] = r;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = -gain(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![None; rows];
    let mut total = 0.0;
    for j in 1..=n {
        let r = owner[j] - 1;
        let c = j - 1;
        if r < rows && c < cols && gain(r, c) > 0.0 {
            assignment[r] = Some(c);
            total += gain(r, c);
        }
    }
    Matching { assignment, total }
}
