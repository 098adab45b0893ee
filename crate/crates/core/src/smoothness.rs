//! Indices derived from the smoothness parameter `beta`.

/// Largest integer strictly less than `beta` (the number of full derivatives
/// of `ln f` used by the Holder class). `beta = 2` gives 1, `beta = 0.5`
/// gives 0.
pub fn holder_r(beta: f64) -> usize {
    assert!(beta > 0.0, "beta must be positive");
    let f = beta.floor();
    if (beta - f).abs() < 1e-12 {
        (f as usize).saturating_sub(1)
    } else {
        f as usize
    }
}

/// The convolution iterate count `k` with `beta` in `(2k, 2k + 2]`.
pub fn conv_order_k(beta: f64) -> usize {
    assert!(beta > 0.0, "beta must be positive");
    ((beta / 2.0).ceil() as usize).saturating_sub(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r_is_largest_integer_below_beta() {
        assert_eq!(holder_r(0.5), 0);
        assert_eq!(holder_r(1.0), 0);
        assert_eq!(holder_r(1.5), 1);
        assert_eq!(holder_r(2.0), 1);
        assert_eq!(holder_r(2.5), 2);
        assert_eq!(holder_r(4.0), 3);
    }

    #[test]
    fn k_buckets_beta_into_even_intervals() {
        assert_eq!(conv_order_k(0.5), 0);
        assert_eq!(conv_order_k(2.0), 0);
        assert_eq!(conv_order_k(2.1), 1);
        assert_eq!(conv_order_k(3.0), 1);
        assert_eq!(conv_order_k(4.0), 1);
        assert_eq!(conv_order_k(4.5), 2);
        // invariant: beta in (2k, 2k+2]
        for i in 1..=80 {
            let beta = 0.1 * i as f64;
            let k = conv_order_k(beta) as f64;
            assert!(beta > 2.0 * k - 1e-9 && beta <= 2.0 * k + 2.0 + 1e-9, "beta={beta}");
        }
    }
}
