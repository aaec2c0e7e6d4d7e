//! Kendall rank correlation in O(n log n) (Knight's merge-sort method).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KendallVariant {
    /// Tie-corrected.
    #[default]
    TauB,
    /// No tie correction: `(C - D) / (n (n - 1) / 2)`.
    TauA,
}

fn cmp(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).expect("finite inputs")
}

/// Sum of t(t-1)/2 over runs of equal adjacent elements under `eq`.
fn tied_pairs<T>(sorted: &[T], eq: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sort `v` by its second component and return the number of inversions.
fn merge_count(v: &mut [(f64, f64)], buf: &mut Vec<(f64, f64)>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if cmp(v[j].1, v[i].1) == Ordering::Less {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    kendall_tau_variant(x, y, KendallVariant::TauB)
}

pub fn kendall_tau_variant(x: &[f64], y: &[f64], variant: KendallVariant) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = x.len() as u64;
    if n < 2 {
        return Err(StatsError::DegenerateInput("kendall tau needs at least two observations".into()));
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| cmp(a.0, b.0).then(cmp(a.1, b.1)));

    let n0 = n * (n - 1) / 2;
    let tx = tied_pairs(&pairs, |a, b| a.0 == b.0);
    let txy = tied_pairs(&pairs, |a, b| a.0 == b.0 && a.1 == b.1);
    let mut buf = Vec::with_capacity(pairs.len());
    let swaps = merge_count(&mut pairs, &mut buf);
    let ty = tied_pairs(&pairs, |a, b| a.1 == b.1);

    if tx == n0 || ty == n0 {
        return Err(StatsError::DegenerateInput("a sequence is entirely tied".into()));
    }
    // C - D = n0 - tx - ty + txy - 2 * swaps
    let numer = n0 as i64 - tx as i64 - ty as i64 + txy as i64 - 2 * swaps as i64;
    Ok(match variant {
        KendallVariant::TauB => numer as f64 / (((n0 - tx) as f64) * ((n0 - ty) as f64)).sqrt(),
        KendallVariant::TauA => numer as f64 / n0 as f64,
    })
}
