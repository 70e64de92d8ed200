/// Maximum-weight one-to-one assignment over a rectangular weight matrix.
///
/// Returns `(total, pairs)` where each pair is `(row, col)`. The matrix is
/// padded to square with zeros; padded pairs are not reported. Uses the
/// shortest-augmenting-path form of the Hungarian method, O(n³).
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> (f64, Vec<(usize, usize)>) {
    let rows = weights.len();
    let cols = weights.iter().map(Vec::len).max().unwrap_or(0);
    let n = rows.max(cols);
    if n == 0 {
        return (0.0, Vec::new());
    }
    let cost = |i: usize, j: usize| -> f64 { -weights.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0) };

    // 1-based potentials; p[j] is the row matched to column j.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
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
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs = Vec::new();
    let mut total = 0.0;
    for j in 1..=n {
        let i = p[j];
        if i == 0 || i > rows || j > cols {
            continue;
        }
        let w = weights[i - 1].get(j - 1).copied().unwrap_or(0.0);
        total += w;
        pairs.push((i - 1, j - 1));
    }
    pairs.sort_unstable();
    (total, pairs)
}
