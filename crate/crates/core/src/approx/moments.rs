//! Moments of repeated kernel self-convolutions and the alternating binomial
//! moment identity behind the bias cancellation of the iterates.

/// `nu_{h,t}`: the `t`-th moment of the `h`-fold self-convolution of the
/// kernel. The `h`-fold convolution is a centered Gaussian with variance
/// `h/2`, so even moments are `(t-1)!! (h/2)^{t/2}`; odd moments vanish.
pub fn gaussian_moment_nu(h: usize, t: usize) -> f64 {
    assert!(h >= 1, "need h >= 1");
    if t % 2 == 1 {
        return 0.0;
    }
    let mut double_fact = 1.0;
    let mut i = t as i64 - 1;
    while i >= 2 {
        double_fact *= i as f64;
        i -= 2;
    }
    double_fact * (h as f64 / 2.0).powi((t / 2) as i32)
}

/// `sum_{j=1}^{k+1} (-1)^j C(k+1, j) nu_{j, 2u}`; vanishes whenever `k >= u`.
pub fn lemma9_sum(u: usize, k: usize) -> f64 {
    let mut acc = 0.0;
    let mut binom = 1.0f64;
    for j in 1..=(k + 1) {
        binom *= (k + 2 - j) as f64 / j as f64; // C(k+1, j)
        let sign = if j % 2 == 1 { -1.0 } else { 1.0 };
        acc += sign * binom * gaussian_moment_nu(j, 2 * u);
    }
    acc
}

/// Same sum with quadrature-estimated moments (cross-check path).
pub fn lemma9_sum_quadrature(u: usize, k: usize) -> crate::Result<f64> {
    use crate::kernel::psi_sigma;
    use crate::quad;
    let mut acc = 0.0;
    let mut binom = 1.0f64;
    for j in 1..=(k + 1) {
        binom *= (k + 2 - j) as f64 / j as f64;
        let sign = if j % 2 == 1 { -1.0 } else { 1.0 };
        let scale = (j as f64).sqrt(); // psi^{*j} = psi_{sqrt(j)}
        let t = 2 * u;
        let reach = scale * 30.0;
        let nu = quad::adaptive(
            &|x| x.powi(t as i32) * psi_sigma(scale, x),
            -reach,
            reach,
            1e-10,
        )?;
        acc += sign * binom * nu;
    }
    Ok(acc)
}
