/// Minimum-cost assignment of every row to a distinct column (rows ≤
/// columns), by shortest augmenting paths with potentials. O(rows² · cols).
///
/// Returns the column of each row. Ties are resolved deterministically by
/// index order.
pub fn min_cost_assignment(cost: &[Vec<i128>]) -> Vec<usize> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    assert!(rows <= cols, "more rows than columns");
    assert!(cost.iter().all(|r| r.len() == cols), "ragged cost matrix");

    const INF: i128 = i128::MAX / 4;
    // 1-based, column 0 is the virtual root
    let mut u = vec![0i128; rows + 1];
    let mut v = vec![0i128; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=cols {
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
            for j in 0..=cols {
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
    let mut out = vec![0usize; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    out
}

pub fn assignment_cost(cost: &[Vec<i128>], assignment: &[usize]) -> i128 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(cost: &[Vec<i128>]) -> i128 {
        fn go(cost: &[Vec<i128>], row: usize, used: &mut Vec<bool>) -> i128 {
            if row == cost.len() {
                return 0;
            }
            let mut best = i128::MAX;
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row][j] + go(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        let mut used = vec![false; cost.first().map_or(0, |r| r.len())];
        go(cost, 0, &mut used)
    }

    #[test]
    fn small_cases() {
        assert!(min_cost_assignment(&[]).is_empty());
        assert_eq!(min_cost_assignment(&[vec![5]]), vec![0]);
        let c = vec![vec![4, 1, 3], vec![2, 0, 5], vec![3, 2, 2]];
        let a = min_cost_assignment(&c);
        assert_eq!(assignment_cost(&c, &a), 5);
        let rect = vec![vec![9, 1, 9, 9], vec![9, 9, 9, 0]];
        assert_eq!(min_cost_assignment(&rect), vec![1, 3]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            rows in 1usize..=6,
            extra in 0usize..=2,
            seed in prop::collection::vec(0i128..50, 64),
        ) {
            let cols = rows + extra;
            let cost: Vec<Vec<i128>> = (0..rows)
                .map(|i| (0..cols).map(|j| seed[(i * 8 + j) % 64]).collect())
                .collect();
            let a = min_cost_assignment(&cost);
            let mut seen = a.clone();
            seen.sort();
            seen.dedup();
            prop_assert_eq!(seen.len(), rows);
            prop_assert_eq!(assignment_cost(&cost, &a), brute_force(&cost));
        }
    }
}
