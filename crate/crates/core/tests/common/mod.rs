//! Exhaustive oracles for separated and generating set counts.
//!
//! They only read the full `d_n` distance matrix. Interval DPs are exact once
//! the matrix is checked to be order-monotone; below 16 knots every subset is
//! also enumerated.

#![allow(dead_code)]

use anosov_lab::leaf_entropy::ProfileMatrix;

pub fn matrix(p: &ProfileMatrix) -> Vec<Vec<f64>> {
    let n = p.rows.len();
    (0..n)
        .map(|i| (0..n).map(|j| p.distance(i, j)).collect())
        .collect()
}

pub fn assert_order_monotone(d: &[Vec<f64>]) {
    let n = d.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                assert!(
                    d[i][k] >= d[i][j] && d[i][k] >= d[j][k],
                    "not monotone at {i},{j},{k}"
                );
            }
        }
    }
}

/// Largest set with all pairwise distances `> eps`.
pub fn dp_separated(d: &[Vec<f64>], eps: f64) -> usize {
    let n = d.len();
    let mut best = vec![1usize; n];
    for i in 0..n {
        for j in 0..i {
            if d[j][i] > eps {
                best[i] = best[i].max(best[j] + 1);
            }
        }
    }
    best.into_iter().max().unwrap_or(0)
}

/// Fewest centres (among the knots) whose closed ε-balls cover every knot.
pub fn dp_generator(d: &[Vec<f64>], eps: f64) -> usize {
    let n = d.len();
    // each ball is a contiguous run of knots
    let cover: Vec<(usize, usize)> = (0..n)
        .map(|c| {
            let inside: Vec<usize> = (0..n).filter(|&i| d[c][i] <= eps).collect();
            let (lo, hi) = (inside[0], *inside.last().unwrap());
            assert_eq!(
                inside.len(),
                hi - lo + 1,
                "ball around {c} is not an interval"
            );
            (lo, hi)
        })
        .collect();
    // f[k]: fewest centres covering knots 0..k
    let mut f = vec![usize::MAX; n + 1];
    f[0] = 0;
    for k in 1..=n {
        for &(lo, hi) in &cover {
            if lo <= k - 1 && k - 1 <= hi && f[lo] != usize::MAX {
                f[k] = f[k].min(f[lo] + 1);
            }
        }
    }
    f[n]
}

pub fn brute_separated(d: &[Vec<f64>], eps: f64) -> usize {
    let n = d.len();
    (0u32..1 << n)
        .filter(|m| {
            (0..n).all(|i| {
                (i + 1..n).all(|j| m & (1 << i) == 0 || m & (1 << j) == 0 || d[i][j] > eps)
            })
        })
        .map(|m| m.count_ones() as usize)
        .max()
        .unwrap()
}

pub fn brute_generator(d: &[Vec<f64>], eps: f64) -> usize {
    let n = d.len();
    (1u32..1 << n)
        .filter(|m| (0..n).all(|i| (0..n).any(|c| m & (1 << c) != 0 && d[c][i] <= eps)))
        .map(|m| m.count_ones() as usize)
        .min()
        .unwrap()
}
