//! Greedy one-to-one assignment over gated cost matrices.

use std::cmp::Ordering;

use crate::affinity::ScoreMatrix;
use crate::geometry::iou_2d;
use crate::types::BBox2D;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    /// `(row, col, cost)` in commit order.
    pub matches: Vec<(usize, usize, f64)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

/// Repeatedly commits the globally smallest remaining entry below `sentinel`
/// and removes its row and column. Ties go to the lower row, then the lower
/// column; callers order columns by descending detection score so that the
/// stronger detection wins a tie within a row.
pub fn greedy_match(c: &ScoreMatrix, sentinel: f64) -> Assignment {
    let mut entries: Vec<(f64, usize, usize)> = c
        .iter()
        .filter(|&(_, _, v)| v < sentinel)
        .map(|(i, j, v)| (v, i, j))
        .collect();
    entries.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut row_used = vec![false; c.rows()];
    let mut col_used = vec![false; c.cols()];
    let mut matches = Vec::new();
    for (v, i, j) in entries {
        if row_used[i] || col_used[j] {
            continue;
        }
        row_used[i] = true;
        col_used[j] = true;
        matches.push((i, j, v));
    }
    Assignment {
        matches,
        unmatched_rows: (0..c.rows()).filter(|&i| !row_used[i]).collect(),
        unmatched_cols: (0..c.cols()).filter(|&j| !col_used[j]).collect(),
    }
}

/// Greedy matching on `1 - IoU`, keeping only pairs with `IoU >= theta_iou`.
pub fn greedy_match_iou(rows: &[BBox2D], cols: &[BBox2D], theta_iou: f64) -> Assignment {
    const GATED: f64 = f64::INFINITY;
    let c = ScoreMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let iou = iou_2d(&rows[i], &cols[j]);
        if iou >= theta_iou {
            1.0 - iou
        } else {
            GATED
        }
    });
    greedy_match(&c, GATED)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Literal min-pick-and-delete: scan the live submatrix for its minimum,
    /// commit, delete the row and column, repeat.
    fn oracle(c: &[Vec<f64>], sentinel: f64) -> Vec<(usize, usize)> {
        let rows = c.len();
        let cols = c.first().map_or(0, |r| r.len());
        let mut live_r: Vec<bool> = vec![true; rows];
        let mut live_c: Vec<bool> = vec![true; cols];
        let mut out = vec![];
        loop {
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..rows {
                for j in 0..cols {
                    if live_r[i]
                        && live_c[j]
                        && c[i][j] < sentinel
                        && best.is_none_or(|(b, _, _)| c[i][j] < b)
                    {
                        best = Some((c[i][j], i, j));
                    }
                }
            }
            match best {
                Some((_, i, j)) => {
                    out.push((i, j));
                    live_r[i] = false;
                    live_c[j] = false;
                }
                None => return out,
            }
        }
    }

    #[test]
    fn diagonal_dominance() {
        let c = ScoreMatrix::from_rows(&[vec![0.1, 0.9], vec![0.9, 0.1]]).unwrap();
        let a = greedy_match(&c, 1000.0);
        let pairs: Vec<_> = a.matches.iter().map(|&(i, j, _)| (i, j)).collect();
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn all_sentinel_matches_nothing() {
        let c = ScoreMatrix::filled(3, 2, 1000.0);
        let a = greedy_match(&c, 1000.0);
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_rows, vec![0, 1, 2]);
        assert_eq!(a.unmatched_cols, vec![0, 1]);
    }

    #[test]
    fn empty_matrix() {
        let a = greedy_match(&ScoreMatrix::filled(0, 4, 0.0), 1000.0);
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_cols.len(), 4);
    }

    #[test]
    fn ties_break_by_row_then_col() {
        let c = ScoreMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let a = greedy_match(&c, 1000.0);
        let pairs: Vec<_> = a.matches.iter().map(|&(i, j, _)| (i, j)).collect();
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn random_6x6_equals_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let rows: Vec<Vec<f64>> = (0..6)
                .map(|_| {
                    (0..6)
                        .map(|_| {
                            if rng.gen_bool(0.4) {
                                1000.0
                            } else {
                                rng.gen_range(0.0..2.0)
                            }
                        })
                        .collect()
                })
                .collect();
            let a = greedy_match(&ScoreMatrix::from_rows(&rows).unwrap(), 1000.0);
            let got: Vec<_> = a.matches.iter().map(|&(i, j, _)| (i, j)).collect();
            assert_eq!(got, oracle(&rows, 1000.0));
        }
    }

    fn b(l: f64, t: f64, r: f64, bt: f64) -> BBox2D {
        BBox2D::new(l, t, r, bt).unwrap()
    }

    #[test]
    fn iou_matching_examples() {
        let boxes = vec![
            b(0.0, 0.0, 10.0, 10.0),
            b(20.0, 0.0, 30.0, 10.0),
            b(50.0, 50.0, 70.0, 80.0),
        ];
        let a = greedy_match_iou(&boxes, &boxes, 0.3);
        let pairs: Vec<_> = a.matches.iter().map(|&(i, j, _)| (i, j)).collect();
        assert_eq!(pairs, vec![(0, 0), (1, 1), (2, 2)]);

        let far = vec![b(100.0, 100.0, 110.0, 110.0)];
        assert!(greedy_match_iou(&boxes, &far, 0.3).matches.is_empty());
    }

    #[test]
    fn iou_matching_reduces_to_gated_greedy() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut rb = || {
            let (l, t) = (rng.gen_range(0.0..60.0), rng.gen_range(0.0..60.0));
            let (w, h) = (rng.gen_range(5.0..40.0), rng.gen_range(5.0..40.0));
            b(l, t, l + w, t + h)
        };
        for _ in 0..200 {
            let rows: Vec<BBox2D> = (0..5).map(|_| rb()).collect();
            let cols: Vec<BBox2D> = (0..4).map(|_| rb()).collect();
            let cost: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    cols.iter()
                        .map(|c| {
                            let iou = iou_2d(r, c);
                            if iou >= 0.3 {
                                1.0 - iou
                            } else {
                                1000.0
                            }
                        })
                        .collect()
                })
                .collect();
            let a = greedy_match_iou(&rows, &cols, 0.3);
            let got: Vec<_> = a.matches.iter().map(|&(i, j, _)| (i, j)).collect();
            assert_eq!(got, oracle(&cost, 1000.0));
        }
    }

    fn gated_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (0usize..8, 0usize..8).prop_flat_map(|(r, c)| {
            proptest::collection::vec(
                proptest::collection::vec(prop_oneof![Just(1000.0), (0.0..2.0f64), Just(0.5)], c),
                r,
            )
        })
    }

    proptest! {
        #[test]
        fn one_to_one_partition_and_step_optimality(rows in gated_matrix()) {
            let c = ScoreMatrix::from_rows(&rows).unwrap();
            let a = greedy_match(&c, 1000.0);
            let mut seen_r = vec![false; c.rows()];
            let mut seen_c = vec![false; c.cols()];
            for &(i, j, v) in &a.matches {
                prop_assert!(!seen_r[i] && !seen_c[j]);
                prop_assert!(v < 1000.0);
                seen_r[i] = true;
                seen_c[j] = true;
            }
            for &i in &a.unmatched_rows { prop_assert!(!seen_r[i]); seen_r[i] = true; }
            for &j in &a.unmatched_cols { prop_assert!(!seen_c[j]); seen_c[j] = true; }
            prop_assert!(seen_r.iter().all(|&x| x) && seen_c.iter().all(|&x| x));

            // k-th commit is the minimum over what remained after k-1 commits
            let mut live_r = vec![true; c.rows()];
            let mut live_c = vec![true; c.cols()];
            for &(i, j, v) in &a.matches {
                for (ii, jj, w) in c.iter() {
                    if live_r[ii] && live_c[jj] {
                        prop_assert!(v <= w);
                    }
                }
                live_r[i] = false;
                live_c[j] = false;
            }
            prop_assert_eq!(a.clone(), greedy_match(&c, 1000.0));
        }
    }
}
