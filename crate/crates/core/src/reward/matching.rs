//! Minimum-cost one-to-one assignment.

/// Minimum-cost assignment of `min(rows, cols)` pairs, sorted by row.
///
/// Shortest augmenting paths with row and column potentials, O(r²c) for
/// `r ≤ c`; a taller matrix is solved transposed.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    if rows > cols {
        let t: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect();
        let mut pairs: Vec<(usize, usize)> = hungarian(&t).into_iter().map(|(j, i)| (i, j)).collect();
        pairs.sort_unstable();
        return pairs;
    }

    let (n, m) = (rows, cols);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    // p[j]: row matched to column j (1-based, 0 = free); column 0 is the virtual root
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
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
    let mut pairs: Vec<(usize, usize)> = (1..=m).filter(|&j| p[j] != 0).map(|j| (p[j] - 1, j - 1)).collect();
    pairs.sort_unstable();
    pairs
}

/// Sum of the chosen costs, accumulated in row order.
pub fn assignment_cost(cost: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
    let mut sorted = pairs.to_vec();
    sorted.sort_unstable();
    sorted.iter().fold(0.0, |acc, &(i, j)| acc + cost[i][j])
}

/// Exhaustive search over all injective assignments; first minimum in
/// lexicographic order wins. Exponential, meant for tiny matrices.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    if rows > cols {
        let t: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect();
        let mut pairs: Vec<(usize, usize)> =
            brute_force_assignment(&t).into_iter().map(|(j, i)| (i, j)).collect();
        pairs.sort_unstable();
        return pairs;
    }
    fn go(
        cost: &[Vec<f64>],
        row: usize,
        taken: &mut Vec<bool>,
        current: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if row == cost.len() {
            let total: f64 = current.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                *best = Some((total, current.clone()));
            }
            return;
        }
        for j in 0..taken.len() {
            if !taken[j] {
                taken[j] = true;
                current.push(j);
                go(cost, row + 1, taken, current, best);
                current.pop();
                taken[j] = false;
            }
        }
    }
    let mut best = None;
    go(cost, 0, &mut vec![false; cols], &mut Vec::new(), &mut best);
    best.expect("rows <= cols")
        .1
        .into_iter()
        .enumerate()
        .collect()
}
