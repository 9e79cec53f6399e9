//! Relative-entropy (Chernoff) confidence interval for a Bernoulli mean,
//! used to annotate zero-one sweep results. Advisory only.

/// KL divergence between Bernoulli(p) and Bernoulli(q), in nats.
pub fn kl_bernoulli(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

/// The set {q : n KL(p_hat || q) <= ln(2/delta)} as an interval. Contains
/// the true mean with probability at least 1 - delta.
pub fn kl_chernoff_interval(p_hat: f64, n: u64, delta: f64) -> (f64, f64) {
    assert!((0.0..=1.0).contains(&p_hat));
    assert!(n > 0);
    let budget = (2.0 / delta).ln() / n as f64;
    let fits = |q: f64| kl_bernoulli(p_hat, q) <= budget;

    let mut lo = 0.0;
    let mut hi = p_hat;
    if !fits(1e-300) {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if fits(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    } else {
        hi = 0.0;
    }
    let lower = hi;

    let mut lo2 = p_hat;
    let mut hi2 = 1.0;
    if !fits(1.0 - 1e-16) {
        for _ in 0..200 {
            let mid = 0.5 * (lo2 + hi2);
            if fits(mid) {
                lo2 = mid;
            } else {
                hi2 = mid;
            }
        }
    } else {
        lo2 = 1.0;
    }
    (lower, lo2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_contains_estimate_and_shrinks_with_n() {
        let (lo, hi) = kl_chernoff_interval(0.3, 100, 0.1);
        assert!(lo <= 0.3 && 0.3 <= hi);
        let (lo2, hi2) = kl_chernoff_interval(0.3, 10_000, 0.1);
        assert!(hi2 - lo2 < hi - lo);
        assert!(hi2 - lo2 < 0.03);
    }

    #[test]
    fn boundary_estimates() {
        let (lo, hi) = kl_chernoff_interval(0.0, 50, 0.1);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.2);
        let (lo, hi) = kl_chernoff_interval(1.0, 50, 0.1);
        assert_eq!(hi, 1.0);
        assert!(lo < 1.0 && lo > 0.8);
    }

    #[test]
    fn kl_basics() {
        assert_eq!(kl_bernoulli(0.5, 0.5), 0.0);
        assert!(kl_bernoulli(0.5, 0.1) > 0.0);
    }
}
