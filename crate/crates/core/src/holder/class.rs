//! Grid verification of the log-Holder class conditions, and the construction
//! of a parameter set certifying every hypercube family member at once.
//!
//! The parameter set follows the two-part route: constants describing the base
//! density are measured numerically (Holder quotients, moment integrals,
//! envelope), while the plateau contribution of the bumps is bounded through
//! the combinatorial expansion of `(ln f)^{(t)}` in terms of the derivatives
//! of `f` (the multi-index sum with coefficients `rho`), which is computed
//! exactly by the recurrence below.

use crate::divergence::NumericDensity;
use crate::error::CoreError;
use crate::holder::bump::fd_derivative;
use crate::holder::{BaseDensity, FamilyBuilder, PerturbationFamily};
use crate::kernel::psi;
use crate::smoothness::holder_r;
use crate::{quad, Result};
use serde::Serialize;
use std::collections::HashMap;
use std::sync::Arc;

/// Parameters of a log-Holder density class: locality radius `gamma`, origin
/// bound `l_plus`, Holder factor polynomial `L(x)` (coefficients lowest
/// first), moment exponent `epsilon` and bound `c_moment`, monotonicity
/// interval radius `alpha` with floor `xi`, and tail envelope `envelope_m`.
#[derive(Debug, Clone, Serialize)]
pub struct ClassParams {
    pub gamma: f64,
    pub l_plus: f64,
    pub l_poly: Vec<f64>,
    pub epsilon: f64,
    pub c_moment: f64,
    pub alpha: f64,
    pub xi: f64,
    pub envelope_m: f64,
}

impl ClassParams {
    pub fn l_at(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.l_poly.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }
}

/// A density paired with an evaluator for `ln f`, from which log-derivatives
/// are taken by Richardson-extrapolated central differences.
#[derive(Clone)]
pub struct SmoothDensity {
    pub density: NumericDensity,
    ln_f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl SmoothDensity {
    pub fn new(density: NumericDensity, ln_f: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Self {
        SmoothDensity { density, ln_f }
    }

    pub fn from_family(fam: &PerturbationFamily) -> Result<Self> {
        let density = fam.numeric_density()?;
        let owned = fam.clone();
        Ok(SmoothDensity {
            density,
            ln_f: Arc::new(move |x| owned.ln_density(x)),
        })
    }

    pub fn from_base(base: &BaseDensity) -> Result<Self> {
        let density = base.numeric_density()?;
        let owned = base.clone();
        Ok(SmoothDensity {
            density,
            ln_f: Arc::new(move |x| owned.ln_omega(x)),
        })
    }

    pub fn ln_f(&self, x: f64) -> f64 {
        (self.ln_f)(x)
    }

    /// `(ln f)^{(j)}(x)`; `j = 0` returns `ln f` itself.
    pub fn log_deriv(&self, j: usize, x: f64) -> f64 {
        let h = match j {
            0 => return (self.ln_f)(x),
            1 => 1e-5,
            2 => 2e-4,
            _ => 1e-3,
        };
        fd_derivative(&|y| (self.ln_f)(y), x, j, h)
    }
}

/// One clause outcome with its worst witness point.
#[derive(Debug, Clone, Serialize)]
pub struct ClauseReport {
    pub pass: bool,
    /// Largest ratio of observed quantity to its bound (<= 1 passes).
    pub worst_ratio: f64,
    pub witness: f64,
    pub detail: String,
}

/// Full class-membership report.
#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub smoothness_holder: ClauseReport,
    pub smoothness_origin: ClauseReport,
    pub moments: ClauseReport,
    pub tail: ClauseReport,
    pub monotonicity: ClauseReport,
    pub pass: bool,
}

fn clause(worst_ratio: f64, witness: f64, detail: impl Into<String>) -> ClauseReport {
    ClauseReport {
        pass: worst_ratio <= 1.0,
        worst_ratio,
        witness,
        detail: detail.into(),
    }
}

/// Grid checks of the class conditions at smoothness `beta`:
/// the local Holder bound on `(ln f)^{(r)}`, the origin bounds, the moment
/// integrals, the tail envelope, and the monotonicity/floor clause.
/// Violations are reported, not raised.
pub fn verify_class_conditions(
    f: &SmoothDensity,
    beta: f64,
    params: &ClassParams,
) -> Result<ClassReport> {
    let r = holder_r(beta);
    let (lo, hi) = f.density.domain(1e-9);
    // evaluation limits: where the density is large enough that log-space
    // finite differences are trustworthy
    let mut x_max = 0.0f64;
    let n_probe = 2000;
    for i in 0..=n_probe {
        let x = lo + (hi - lo) * i as f64 / n_probe as f64;
        if f.density.density(x) > 1e-12 {
            x_max = x_max.max(x.abs());
        }
    }
    let x_max = x_max.min(hi.abs().max(lo.abs()));

    // (holder) |l_r(x) - l_r(y)| <= r! L(x) |y - x|^{beta - r} for |y-x| <= gamma
    let slack = 1e-9;
    let n_grid = 601;
    let offsets: Vec<f64> = (0..7)
        .flat_map(|i| {
            let d = params.gamma * 0.5f64.powi(i);
            [d, -d]
        })
        .collect();
    let r_fact: f64 = (1..=r.max(1)).product::<usize>() as f64;
    let mut worst = 0.0f64;
    let mut witness = 0.0f64;
    for i in 0..n_grid {
        let x = -x_max + 2.0 * x_max * i as f64 / (n_grid - 1) as f64;
        let lx = f.log_deriv(r, x);
        let bound_factor = r_fact * params.l_at(x);
        for &d in &offsets {
            let y = x + d;
            if y.abs() > x_max {
                continue;
            }
            let ly = f.log_deriv(r, y);
            let bound = bound_factor * d.abs().powf(beta - r as f64) + slack;
            let ratio = (lx - ly).abs() / bound;
            if ratio > worst {
                worst = ratio;
                witness = x;
            }
        }
    }
    let smoothness_holder = clause(worst, witness, format!("r = {r}, gamma = {}", params.gamma));

    // (origin) |l_j(0)| <= l_plus for j = 0..=r
    let mut worst_o = 0.0f64;
    let mut wit_o = 0.0;
    for j in 0..=r {
        let v = f.log_deriv(j, 0.0).abs();
        let ratio = v / (params.l_plus + slack);
        if ratio > worst_o {
            worst_o = ratio;
            wit_o = j as f64;
        }
    }
    let smoothness_origin = clause(worst_o, wit_o, "witness is the derivative order j");

    // (moments) int |l_j|^{(2 beta + eps)/j} f <= C for j = 1..=r, and the
    // same bound for |L|^{2 + eps/beta}
    let mut worst_m = 0.0f64;
    let mut wit_m = 0.0;
    let mut detail_m = String::new();
    let bound_c = params.c_moment + slack;
    for j in 1..=r {
        let expo = (2.0 * beta + params.epsilon) / j as f64;
        let integral = quad::composite_legendre(
            &|x| {
                let fx = f.density.density(x);
                if fx < 1e-300 {
                    0.0
                } else {
                    f.log_deriv(j, x).abs().powf(expo) * fx
                }
            },
            -x_max,
            x_max,
            400,
            10,
        );
        let ratio = integral / bound_c;
        if ratio > worst_m {
            worst_m = ratio;
            wit_m = j as f64;
            detail_m = format!("log-derivative moment j = {j} integral {integral}");
        }
    }
    let l_expo = 2.0 + params.epsilon / beta;
    let l_integral = quad::composite_legendre(
        &|x| {
            let fx = f.density.density(x);
            if fx < 1e-300 {
                0.0
            } else {
                params.l_at(x).abs().powf(l_expo) * fx
            }
        },
        -x_max,
        x_max,
        400,
        10,
    );
    if l_integral / bound_c > worst_m {
        worst_m = l_integral / bound_c;
        wit_m = -1.0;
        detail_m = format!("L moment integral {l_integral}");
    }
    let moments = clause(worst_m, wit_m, detail_m);

    // (tail) f <= M psi on the grid
    let mut worst_t = 0.0f64;
    let mut wit_t = 0.0;
    let n_tail = 10_000;
    for i in 0..n_tail {
        let x = -10.0 + 20.0 * i as f64 / (n_tail - 1) as f64;
        let bound = params.envelope_m * psi(x) + 1e-300;
        let ratio = f.density.density(x) / bound / (1.0 + slack);
        if ratio > worst_t {
            worst_t = ratio;
            wit_t = x;
        }
    }
    let tail = clause(worst_t, wit_t, format!("envelope M = {}", params.envelope_m));

    // (monotonicity) f > 0, nondecreasing left of -alpha, nonincreasing right
    // of alpha, f >= xi on [-alpha, alpha]
    let mut worst_mon = 0.0f64;
    let mut wit_mon = 0.0;
    let n_mon = 4000;
    let span = x_max.max(params.alpha + 1.0);
    let mut prev = f.density.density(-span);
    for i in 1..=n_mon {
        let x = -span + (span - params.alpha) * i as f64 / n_mon as f64;
        let cur = f.density.density(x);
        let drop = (prev - cur) / cur.abs().max(1e-300);
        if drop > worst_mon + slack {
            worst_mon = drop.max(worst_mon);
            wit_mon = x;
        }
        prev = cur;
    }
    let mut prev = f.density.density(params.alpha);
    for i in 1..=n_mon {
        let x = params.alpha + (span - params.alpha) * i as f64 / n_mon as f64;
        let cur = f.density.density(x);
        let rise = (cur - prev) / prev.abs().max(1e-300);
        if rise > worst_mon + slack {
            worst_mon = rise.max(worst_mon);
            wit_mon = x;
        }
        prev = cur;
    }
    for i in 0..=n_mon {
        let x = -params.alpha + 2.0 * params.alpha * i as f64 / n_mon as f64;
        let v = f.density.density(x);
        let deficit = (params.xi - v) / params.xi;
        if deficit > worst_mon + slack {
            worst_mon = deficit;
            wit_mon = x;
        }
    }
    let monotonicity = clause(worst_mon, wit_mon, "relative monotonicity/floor violation");

    let pass = smoothness_holder.pass
        && smoothness_origin.pass
        && moments.pass
        && tail.pass
        && monotonicity.pass;
    Ok(ClassReport {
        smoothness_holder,
        smoothness_origin,
        moments,
        tail,
        monotonicity,
        pass,
    })
}

/// Exact expansion of `(ln t)^{(i)} = P_i / t^{2^{i-1}}` where `P_i` is a
/// polynomial in the derivatives `t^{(0)}, ..., t^{(i)}`. Monomials are
/// multi-indices `eta` (power of each derivative order); the recurrence is
/// `P_{i+1} = t^{2^{i-1}} P_i' - 2^{i-1} t' t^{2^{i-1}-1} P_i`.
pub fn log_deriv_expansion(order: usize) -> HashMap<Vec<u32>, i64> {
    assert!(order >= 1);
    let mut p: HashMap<Vec<u32>, i64> = HashMap::new();
    p.insert(vec![0, 1], 1); // P_1 = t'
    for i in 1..order {
        let power = 1u32 << (i - 1); // 2^{i-1}
        let mut next: HashMap<Vec<u32>, i64> = HashMap::new();
        for (eta, &coeff) in &p {
            // t^{2^{i-1}} * P_i': differentiate each factor
            for j in 0..eta.len() {
                if eta[j] == 0 {
                    continue;
                }
                let mut e = eta.clone();
                e.resize(i + 2, 0);
                let mult = e[j] as i64;
                e[j] -= 1;
                e[j + 1] += 1;
                e[0] += power;
                *next.entry(e).or_insert(0) += coeff * mult;
            }
            // -2^{i-1} t' t^{2^{i-1}-1} P_i
            let mut e = eta.clone();
            e.resize(i + 2, 0);
            e[1] += 1;
            e[0] += power - 1;
            *next.entry(e).or_insert(0) -= coeff * power as i64;
        }
        next.retain(|_, c| *c != 0);
        p = next;
    }
    p
}

/// `(card(Xi_t), max |rho|)` for the order-`t` expansion.
pub fn expansion_constants(t: usize) -> (f64, f64) {
    let p = log_deriv_expansion(t);
    let card = p.len() as f64;
    let max_coeff = p.values().map(|c| c.abs() as f64).fold(0.0, f64::max);
    (card, max_coeff)
}

/// Build a parameter set certifying the whole family range
/// `beta in [beta_low, beta_high]` for every even `D` at once: base-density
/// constants are measured from `omega` (with a 25% safety factor), plateau
/// contributions are bounded by the exact expansion constants.
pub fn proposition1_params(
    beta_low: f64,
    beta_high: f64,
    base: &BaseDensity,
    epsilon: f64,
) -> Result<ClassParams> {
    if !(0.0 < beta_low && beta_low < beta_high) {
        return Err(CoreError::InvalidInput(
            "need 0 < beta_low < beta_high".into(),
        ));
    }
    let alpha = base.alpha;
    let xi = base.xi;
    let gamma = alpha / 4.0;
    let l_plus = (2.0 * xi).ln().abs() * (1.0 + 1e-9) + 1e-9;
    let margin = 1.25;
    let smooth = SmoothDensity::from_base(base)?;
    let r_span = base.support_radius();

    // beta grid covering the requested range
    let mut betas = vec![beta_low, beta_high];
    let steps = 6;
    for i in 1..steps {
        betas.push(beta_low + (beta_high - beta_low) * i as f64 / steps as f64);
    }

    // measured Holder quotients of ln omega, split into a bulk constant and a
    // quadratic tail growth coefficient
    let mut l0 = 0.0f64;
    let mut l2 = 0.0f64;
    let bulk = alpha + 1.0;
    let offsets: Vec<f64> = (0..6)
        .flat_map(|i| {
            let d = gamma * 0.5f64.powi(i);
            [d, -d]
        })
        .collect();
    for &beta in &betas {
        let r = holder_r(beta);
        let r_fact: f64 = (1..=r.max(1)).product::<usize>() as f64;
        let n_grid = 801;
        for i in 0..n_grid {
            let x = -r_span + 2.0 * r_span * i as f64 / (n_grid - 1) as f64;
            let lx = smooth.log_deriv(r, x);
            for &d in &offsets {
                let y = x + d;
                if y.abs() > r_span {
                    continue;
                }
                let q = (lx - smooth.log_deriv(r, y)).abs()
                    / (r_fact * d.abs().powf(beta - r as f64));
                if x.abs() <= bulk {
                    l0 = l0.max(q);
                } else {
                    l2 = l2.max(q / (x * x));
                }
            }
        }
    }
    // plateau bound: 2 (card B / ceil(beta)!) (4/alpha)^beta at the top order
    let mut plateau_l = 0.0f64;
    for &beta in &betas {
        let t = beta.ceil().max(1.0) as usize;
        let (card, coeff) = expansion_constants(t);
        let t_fact: f64 = (1..=t).product::<usize>() as f64;
        plateau_l = plateau_l.max(2.0 * card * coeff / t_fact * (4.0 / alpha).powf(beta));
    }
    let l0 = margin * (l0 + plateau_l);
    let l2 = margin * l2;

    // moment bound: measured omega moments plus the plateau additive term
    let mut c_meas = 0.0f64;
    let params_probe = ClassParams {
        gamma,
        l_plus,
        l_poly: vec![l0, 0.0, l2],
        epsilon,
        c_moment: f64::INFINITY,
        alpha,
        xi,
        envelope_m: f64::INFINITY,
    };
    for &beta in &betas {
        let r = holder_r(beta);
        for j in 1..=r {
            let expo = (2.0 * beta + epsilon) / j as f64;
            let v = quad::composite_legendre(
                &|x| {
                    let fx = base.omega(x);
                    if fx < 1e-300 {
                        0.0
                    } else {
                        smooth.log_deriv(j, x).abs().powf(expo) * fx
                    }
                },
                -r_span,
                r_span,
                400,
                10,
            );
            c_meas = c_meas.max(v);
        }
        let v = quad::composite_legendre(
            &|x| {
                let fx = base.omega(x);
                if fx < 1e-300 {
                    0.0
                } else {
                    params_probe.l_at(x).abs().powf(2.0 + epsilon / beta) * fx
                }
            },
            -r_span,
            r_span,
            400,
            10,
        );
        c_meas = c_meas.max(v);
    }
    let mut plateau_c = 0.0f64;
    for &beta in &betas {
        let r = holder_r(beta);
        for j in 1..=r {
            let (card, coeff) = expansion_constants(j);
            let sup = card * coeff * alpha.powi(-(j as i32));
            plateau_c = plateau_c.max(sup.powf((2.0 * beta + epsilon) / j as f64));
        }
    }
    let c_moment = margin * (c_meas + plateau_c) + 1.0;

    let envelope_m = base
        .envelope_m_tilde
        .max(3.0 * std::f64::consts::PI.sqrt() * xi * (alpha * alpha / 4.0).exp());

    Ok(ClassParams {
        gamma,
        l_plus,
        l_poly: vec![l0, 0.0, l2],
        epsilon,
        c_moment,
        alpha,
        xi,
        envelope_m,
    })
}

/// Convenience: certify one family member against the constructed parameters.
pub fn certify_family_member(
    builder: &FamilyBuilder,
    theta: &[bool],
    params: &ClassParams,
) -> Result<ClassReport> {
    let fam = builder.family(theta)?;
    let smooth = SmoothDensity::from_family(&fam)?;
    verify_class_conditions(&smooth, builder.beta, params)
}
