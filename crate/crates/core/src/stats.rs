//! Small statistics helpers shared by the metric modules.

use crate::scalar::{sc, Scalar};

pub fn mean<S: Scalar>(values: &[S]) -> S {
    if values.is_empty() {
        return S::zero();
    }
    values.iter().copied().sum::<S>() / S::from_usize_c(values.len())
}

/// Population standard deviation (divides by n).
pub fn population_std<S: Scalar>(values: &[S]) -> S {
    if values.is_empty() {
        return S::zero();
    }
    let m = mean(values);
    let var = values
        .iter()
        .map(|&v| (v - m) * (v - m))
        .sum::<S>()
        / S::from_usize_c(values.len());
    var.sqrt()
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson<S: Scalar>(a: &[S], b: &[S]) -> Option<S> {
    assert_eq!(a.len(), b.len(), "pearson: length mismatch");
    if a.len() < 2 {
        return None;
    }
    let ma = mean(a);
    let mb = mean(b);
    let mut cov = S::zero();
    let mut va = S::zero();
    let mut vb = S::zero();
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        cov = cov + dx * dy;
        va = va + dx * dx;
        vb = vb + dy * dy;
    }
    if va <= S::zero() || vb <= S::zero() {
        return None;
    }
    Some(cov / (va.sqrt() * vb.sqrt()))
}

/// Spearman rank correlation with average ranks for ties; `None` when either
/// rank vector is constant.
pub fn spearman<S: Scalar>(a: &[S], b: &[S]) -> Option<S> {
    assert_eq!(a.len(), b.len(), "spearman: length mismatch");
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    pearson(&ra, &rb)
}

fn average_ranks<S: Scalar>(values: &[S]) -> Vec<S> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![S::zero(); n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // 1-based ranks, ties share the average rank
        let avg = sc::<S>((i + j + 2) as f64 / 2.0);
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Gini index of a nonnegative vector: 0 for uniform mass, -> 1 for a point
/// mass as the length grows. Computed as (2 Σ i·x_(i)) / (n Σ x) − (n+1)/n on
/// ascending-sorted values with 1-based i.
pub fn gini<S: Scalar>(values: &[S]) -> S {
    let n = values.len();
    if n == 0 {
        return S::zero();
    }
    let mut sorted: Vec<S> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let total: S = sorted.iter().copied().sum();
    if total <= S::zero() {
        return S::zero();
    }
    let weighted: S = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| S::from_usize_c(i + 1) * v)
        .sum();
    let nf = S::from_usize_c(n);
    sc::<S>(2.0) * weighted / (nf * total) - (nf + S::one()) / nf
}

/// Shannon entropy (natural log) of the normalized magnitude distribution.
pub fn entropy_nat<S: Scalar>(values: &[S]) -> S {
    let total: S = values.iter().map(|v| v.abs()).sum();
    if total <= S::zero() {
        return S::zero();
    }
    let mut h = S::zero();
    for &v in values {
        let p = v.abs() / total;
        if p > S::zero() {
            h = h - p * p.ln();
        }
    }
    h
}

/// Binary F1 of class 1 (predictions and labels are class indices).
///
/// When class 1 is absent from both vectors the score degenerates; fall back
/// to the F1 of class 0 so an all-negative dataset predicted perfectly
/// scores 1.0.
pub fn binary_f1(y_true: &[usize], y_pred: &[usize]) -> f64 {
    debug_assert_eq!(y_true.len(), y_pred.len());
    let f1_of = |positive: usize| -> Option<f64> {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fne = 0usize;
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t == positive, p == positive) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fne += 1,
                (false, false) => {}
            }
        }
        if tp + fp + fne == 0 {
            None
        } else {
            Some(2.0 * tp as f64 / (2 * tp + fp + fne) as f64)
        }
    };
    f1_of(1).or_else(|| f1_of(0)).unwrap_or(0.0)
}

/// Macro-averaged F1 over the classes present in `y_true` or `y_pred`.
pub fn macro_f1(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> f64 {
    if n_classes == 2 {
        return binary_f1(y_true, y_pred);
    }
    let mut scores = Vec::new();
    for c in 0..n_classes {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fne = 0usize;
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t == c, p == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fne += 1,
                (false, false) => {}
            }
        }
        if tp + fp + fne > 0 {
            scores.push(2.0 * tp as f64 / (2 * tp + fp + fne) as f64);
        }
    }
    if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> f64 {
    if y_true.is_empty() {
        return 0.0;
    }
    let hits = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count();
    hits as f64 / y_true.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_point_mass() {
        // |a| = (1,0,0,0): sorted ascending (0,0,0,1), G = 2*4/(4*1) - 5/4 = 0.75
        let g: f64 = gini(&[1.0, 0.0, 0.0, 0.0]);
        assert!((g - 0.75).abs() < 1e-12);
    }

    #[test]
    fn gini_uniform_is_zero() {
        let g: f64 = gini(&[0.3, 0.3, 0.3, 0.3, 0.3]);
        assert!(g.abs() < 1e-12);
    }

    #[test]
    fn entropy_endpoints() {
        let h0: f64 = entropy_nat(&[2.0, 0.0, 0.0, 0.0]);
        assert!(h0.abs() < 1e-12);
        let hu: f64 = entropy_nat(&[0.5, 0.5, 0.5, 0.5]);
        assert!((hu - (4.0_f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn scale_invariance_of_gini_and_entropy() {
        let v = [0.1_f64, 0.7, 0.05, 0.15];
        let scaled: Vec<f64> = v.iter().map(|x| x * 3.0).collect();
        assert!((gini(&v) - gini(&scaled)).abs() < 1e-12);
        assert!((entropy_nat(&v) - entropy_nat(&scaled)).abs() < 1e-12);
    }

    #[test]
    fn pearson_perfect_and_degenerate() {
        let a = [1.0_f64, 2.0, 3.0];
        let b = [2.0, 4.0, 6.0];
        assert!((pearson(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let c = [5.0, 5.0, 5.0];
        assert!(pearson(&a, &c).is_none());
    }

    #[test]
    fn spearman_handles_ties() {
        let a = [1.0_f64, 2.0, 2.0, 4.0];
        let b = [10.0, 20.0, 20.0, 40.0];
        assert!((spearman(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let inv = [4.0_f64, 3.0, 2.0, 1.0];
        let fwd = [1.0_f64, 2.0, 3.0, 4.0];
        assert!((spearman(&fwd, &inv).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn f1_degenerate_single_class() {
        // all-negative labels predicted perfectly -> majority-class F1 = 1.0
        let y = vec![0usize; 6];
        assert!((binary_f1(&y, &y) - 1.0).abs() < 1e-12);
        let yp = vec![1usize; 6];
        assert!((binary_f1(&yp, &yp) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn f1_hand_case() {
        // tp=2, fp=1, fn=1 -> f1 = 4/(4+1+1) = 0.666..
        let yt = [1, 1, 1, 0, 0];
        let yp = [1, 1, 0, 1, 0];
        assert!((binary_f1(&yt, &yp) - 2.0 / 3.0).abs() < 1e-12);
    }
}
