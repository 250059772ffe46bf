/// Williams-design counterbalancing table with 0-based condition indices.
///
/// Every row is a permutation and every condition appears once per column.
/// For even `n` the `n` rows contain each ordered adjacent pair exactly once.
/// For odd `n` that is impossible with `n` rows, so the mirrored rows are
/// appended and each ordered pair appears exactly twice across `2n` rows.
pub fn balanced_latin_square(n: usize) -> Vec<Vec<usize>> {
    assert!(n >= 2, "need at least two conditions");
    // 0, 1, n-1, 2, n-2, ...
    let mut first = Vec::with_capacity(n);
    let (mut lo, mut hi) = (1, n - 1);
    first.push(0);
    for j in 1..n {
        if j % 2 == 1 {
            first.push(lo);
            lo += 1;
        } else {
            first.push(hi);
            hi -= 1;
        }
    }
    let mut rows: Vec<Vec<usize>> = (0..n).map(|r| first.iter().map(|&c| (c + r) % n).collect()).collect();
    if n % 2 == 1 {
        let mirrored: Vec<Vec<usize>> = rows.iter().map(|r| r.iter().rev().copied().collect()).collect();
        rows.extend(mirrored);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn pair_counts(rows: &[Vec<usize>]) -> BTreeMap<(usize, usize), usize> {
        let mut m = BTreeMap::new();
        for r in rows {
            for w in r.windows(2) {
                *m.entry((w[0], w[1])).or_insert(0) += 1;
            }
        }
        m
    }

    fn check(n: usize) {
        let rows = balanced_latin_square(n);
        assert_eq!(rows.len(), if n.is_multiple_of(2) { n } else { 2 * n });
        for r in &rows {
            let mut s = r.clone();
            s.sort();
            assert_eq!(s, (0..n).collect::<Vec<_>>());
        }
        for col in 0..n {
            let mut seen = vec![0; n];
            for r in &rows[..n] {
                seen[r[col]] += 1;
            }
            assert!(seen.iter().all(|&c| c == 1), "n={n} column {col}");
        }
        let pairs = pair_counts(&rows);
        let want = if n.is_multiple_of(2) { 1 } else { 2 };
        assert_eq!(pairs.len(), n * (n - 1), "n={n}");
        assert!(pairs.values().all(|&c| c == want), "n={n}");
    }

    #[test]
    fn small_cases() {
        assert_eq!(balanced_latin_square(2), vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(balanced_latin_square(4)[0], vec![0, 1, 3, 2]);
        for n in 2..=9 {
            check(n);
        }
    }
}
