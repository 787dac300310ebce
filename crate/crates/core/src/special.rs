//! Special functions used by the coefficient series.

use statrs::function::factorial::ln_factorial as statrs_ln_factorial;

/// `ln n!`.
pub fn ln_factorial(n: usize) -> f64 {
    statrs_ln_factorial(n as u64)
}

/// `ln C(n, k)`; `−∞` when `k > n`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `ln((n + s)! / n!)`.
pub fn ln_rising(n: usize, s: usize) -> f64 {
    ln_factorial(n + s) - ln_factorial(n)
}

/// `√(a! / b!)`.
pub fn factorial_ratio_sqrt(a: usize, b: usize) -> f64 {
    (0.5 * (ln_factorial(a) - ln_factorial(b))).exp()
}

/// Associated Laguerre polynomial `L_n^{(α)}(x)` by the ascending three-term
/// recurrence.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Terminating Gauss series `₂F₁(−n, b; c; x)` summed term by term.
pub fn hyp2f1_terminating(n: usize, b: f64, c: f64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 0..n {
        let jf = j as f64;
        term *= (jf - n as f64) * (b + jf) / ((c + jf) * (jf + 1.0)) * x;
        sum += term;
    }
    sum
}

/// Values `λᵏ·₂F₁(−n, β + k; β; z)` for `n = 0..=n_max`, from the
/// three-term recurrence in `n`:
///
/// `(n + β) F_{n+1} = [n + (n + β)(1 − z) − z k] F_n − n (1 − z) F_{n−1}`.
///
/// The direct terminating sums lose all precision once `n` reaches a few
/// tens; the recurrence is stable in the forward direction for `0 < z ≤ 1`.
/// The prefactor `λᵏ` is carried in log space so neither factor over- or
/// underflows on its own.
pub fn meixner_column(beta: f64, k: usize, z: f64, ln_lambda: f64, n_max: usize) -> Vec<f64> {
    const BIG: f64 = 1e150;
    let kf = k as f64;
    let c = 1.0 - z;
    let mut out = Vec::with_capacity(n_max + 1);
    let mut log_scale = kf * ln_lambda;
    let mut prev = 1.0;
    let mut cur = (beta * c - z * kf) / beta;
    let emit = |v: f64, ls: f64| if v == 0.0 { 0.0 } else { v * ls.exp() };
    out.push(emit(prev, log_scale));
    if n_max == 0 {
        return out;
    }
    out.push(emit(cur, log_scale));
    for n in 1..n_max {
        let nf = n as f64;
        let next = ((nf + (nf + beta) * c - z * kf) * cur - nf * c * prev) / (nf + beta);
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            prev /= BIG;
            cur /= BIG;
            log_scale += BIG.ln();
        }
        out.push(emit(cur, log_scale));
    }
    out
}

/// `Σ_{i=0}^{k} C(k + o, i) C(k, i) xⁱ y^{k−i}` for `x, y ≥ 0`.
///
/// Terms are generated by their ratio relative to the `i = 0` term with
/// periodic rescaling, so large `k` neither overflows nor needs a
/// log-gamma call per term.
pub fn binomial_mixture(k: usize, o: usize, x: f64, y: f64) -> f64 {
    debug_assert!(x >= 0.0 && y >= 0.0);
    if x == 0.0 {
        return y.powi(k as i32);
    }
    if y == 0.0 {
        return (ln_binomial(k + o, k) + k as f64 * x.ln()).exp();
    }
    const BIG: f64 = 1e250;
    let ratio = x / y;
    let mut term = 1.0;
    let mut acc = 1.0;
    let mut shift = k as f64 * y.ln();
    for i in 0..k {
        let (kf, of, fi) = (k as f64, o as f64, i as f64);
        term *= (kf + of - fi) * (kf - fi) / ((fi + 1.0) * (fi + 1.0)) * ratio;
        acc += term;
        if acc > BIG {
            acc /= BIG;
            term /= BIG;
            shift += BIG.ln();
        }
    }
    acc * shift.exp()
}

/// Double factorial with `(−1)!! = 0!! = 1`.
pub fn double_factorial(n: i64) -> f64 {
    let mut acc = 1.0;
    let mut j = n;
    while j > 1 {
        acc *= j as f64;
        j -= 2;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn factorials() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_relative_eq!(ln_factorial(5), 120f64.ln(), epsilon = 1e-13);
        assert_relative_eq!(ln_binomial(10, 3), 120f64.ln(), epsilon = 1e-12);
        assert_eq!(ln_binomial(3, 4), f64::NEG_INFINITY);
        assert_eq!(double_factorial(-1), 1.0);
        assert_eq!(double_factorial(7), 105.0);
        assert_eq!(double_factorial(6), 48.0);
    }

    #[test]
    fn laguerre_low_orders() {
        let x = 0.37;
        let a = 2.0;
        assert_eq!(laguerre(0, a, x), 1.0);
        assert_relative_eq!(laguerre(1, a, x), 1.0 + a - x, epsilon = 1e-15);
        let l2 = 0.5 * (x * x - 2.0 * (a + 2.0) * x + (a + 1.0) * (a + 2.0));
        assert_relative_eq!(laguerre(2, a, x), l2, epsilon = 1e-14);
        // L_n(0) = C(n + α, n)
        assert_relative_eq!(laguerre(6, 3.0, 0.0), 84.0, epsilon = 1e-12);
    }

    #[test]
    fn terminating_series() {
        assert_eq!(hyp2f1_terminating(0, 3.0, 1.0, 0.4), 1.0);
        // ₂F₁(−n, 1; 1; 1) = (1 − 1)ⁿ
        assert_eq!(hyp2f1_terminating(4, 1.0, 1.0, 1.0), 0.0);
        // ₂F₁(−2, b; c; x) = 1 − 2bx/c + b(b+1)x²/(c(c+1))
        let v = 1.0 - 2.0 * 3.0 * 0.3 / 2.0 + 3.0 * 4.0 * 0.09 / 6.0;
        assert_relative_eq!(hyp2f1_terminating(2, 3.0, 2.0, 0.3), v, epsilon = 1e-15);
    }

    #[test]
    fn recurrence_matches_direct_sum_at_low_order() {
        for &beta in &[1.0, 2.0] {
            for &z in &[0.05, 0.4, 0.9, 1.0] {
                for k in [0usize, 1, 7, 30] {
                    let col = meixner_column(beta, k, z, 0.0, 18);
                    for (n, v) in col.iter().enumerate() {
                        let d = hyp2f1_terminating(n, beta + k as f64, beta, z);
                        // The direct sum is only as good as its largest term.
                        let size = hyp2f1_terminating(n, beta + k as f64, beta, -z);
                        assert!((v - d).abs() <= 1e-13 * size, "β={beta} z={z} k={k} n={n}: {v} vs {d}");
                    }
                }
            }
        }
    }

    #[test]
    fn recurrence_reference_values() {
        // ₂F₁(−40, 61; 1; 0.3) and ₂F₁(−25, 12; 2; 0.8), 30-digit reference.
        let a = meixner_column(1.0, 60, 0.3, 0.0, 40)[40];
        assert_relative_eq!(a, reference::F_40_61_1, max_relative = 1e-10);
        let b = meixner_column(2.0, 10, 0.8, 0.0, 25)[25];
        assert_relative_eq!(b, reference::F_25_12_2, max_relative = 1e-10);
    }

    #[test]
    fn scaled_column_survives_underflow() {
        let ln_lambda = 0.5f64.ln();
        let col = meixner_column(1.0, 1500, 0.5, ln_lambda, 4);
        assert!(col.iter().all(|v| v.is_finite()));
        let direct = meixner_column(1.0, 1500, 0.5, 0.0, 0)[0];
        assert_eq!(direct, 1.0);
        assert_relative_eq!(col[0], (1500.0 * ln_lambda).exp(), max_relative = 1e-12);
    }

    #[test]
    fn mixtures() {
        assert_relative_eq!(binomial_mixture(3, 0, 0.25, 0.25), 20.0 / 64.0, epsilon = 1e-15);
        // Σ C(k+1,i) C(k,i) for x = y = 1 is C(2k+1, k).
        assert_relative_eq!(binomial_mixture(4, 1, 1.0, 1.0), 126.0, max_relative = 1e-12);
        assert_eq!(binomial_mixture(5, 0, 0.0, 0.5), 0.5f64.powi(5));
        assert_relative_eq!(
            binomial_mixture(5, 1, 0.5, 0.0),
            6.0 * 0.5f64.powi(5),
            max_relative = 1e-12
        );
        assert_eq!(binomial_mixture(0, 1, 0.3, 0.7), 1.0);
        // Large orders against a log-space sum.
        let (k, x, y) = (3000usize, 0.2f64, 0.3f64);
        let logs: Vec<f64> = (0..=k)
            .map(|i| ln_binomial(k + 1, i) + ln_binomial(k, i) + i as f64 * x.ln() + (k - i) as f64 * y.ln())
            .collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ln_ref = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
        assert_relative_eq!(binomial_mixture(k, 1, x, y).ln(), ln_ref, max_relative = 1e-12);
    }

    mod reference {
        pub const F_40_61_1: f64 = 4.189_836_867_072_120_682_947_533;
        pub const F_25_12_2: f64 = 1.071_177_293_021_315_072e-7;
    }
}
