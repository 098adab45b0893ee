//! Greedy binary codes with guaranteed pairwise Hamming separation, and the
//! sample-size-driven choice of the hypercube dimension `D`.

use crate::error::CoreError;
use crate::{seed, Result};
use rand::Rng;

/// A set of codewords over `{0,1}^D` with certified separation.
#[derive(Debug, Clone)]
pub struct VgCode {
    pub d: usize,
    pub alpha_code: f64,
    pub words: Vec<u64>,
    pub min_distance: usize,
    /// `rho = (1+a) ln(1+a) + (1-a) ln(1-a)`; the construction stops once
    /// `ln |code| > rho D / 2`.
    pub rho: f64,
}

pub fn hamming(a: u64, b: u64) -> usize {
    (a ^ b).count_ones() as usize
}

/// Smallest even `D` with `D^{2 beta + 1} >= 7 n`.
pub fn choose_d(n: usize, beta: f64) -> usize {
    assert!(n >= 1 && beta > 0.0);
    let target = 7.0 * n as f64;
    let mut d = 2usize;
    while (d as f64).powf(2.0 * beta + 1.0) < target {
        d += 2;
    }
    d
}

/// Greedy randomized construction: scan a shuffled enumeration of `{0,1}^D`
/// (random candidates for large `D`), keep a word iff its Hamming distance to
/// every kept word exceeds `(1 - alpha_code) D / 2`, and stop once
/// `ln |code| > rho D / 2`. Retries with fresh shuffles before failing.
pub fn vg_subset(d: usize, alpha_code: f64, shuffle_seed: u64) -> Result<VgCode> {
    if !(2..=63).contains(&d) {
        return Err(CoreError::InvalidInput(format!(
            "D must be in [2, 63] (got {d})"
        )));
    }
    if !(alpha_code > 0.0 && alpha_code < 1.0) {
        return Err(CoreError::InvalidInput(format!(
            "alpha_code must lie in (0, 1) (got {alpha_code})"
        )));
    }
    let a = alpha_code;
    let rho = (1.0 + a) * (1.0 + a).ln() + (1.0 - a) * (1.0 - a).ln();
    let target_ln = rho * d as f64 / 2.0;
    let dist_floor = (1.0 - a) * d as f64 / 2.0;
    let mask = if d == 63 { u64::MAX >> 1 } else { (1u64 << d) - 1 };

    for attempt in 0..8u64 {
        let mut rng = seed::rng_for(shuffle_seed, "vg-shuffle", &[attempt]);
        let mut kept: Vec<u64> = Vec::new();
        let consider = |w: u64, kept: &mut Vec<u64>| -> bool {
            if kept
                .iter()
                .all(|&k| hamming(k, w) as f64 > dist_floor)
            {
                kept.push(w);
                (kept.len() as f64).ln() > target_ln
            } else {
                false
            }
        };
        let done = if d <= 20 {
            let mut all: Vec<u64> = (0..(1u64 << d)).collect();
            // Fisher-Yates shuffle
            for i in (1..all.len()).rev() {
                let j = rng.random_range(0..=i);
                all.swap(i, j);
            }
            let mut done = false;
            for w in all {
                if consider(w, &mut kept) {
                    done = true;
                    break;
                }
            }
            done
        } else {
            let mut done = false;
            for _ in 0..4_000_000u64 {
                let w = rng.random::<u64>() & mask;
                if consider(w, &mut kept) {
                    done = true;
                    break;
                }
            }
            done
        };
        if done {
            let min_distance = kept
                .iter()
                .enumerate()
                .flat_map(|(i, &x)| kept[i + 1..].iter().map(move |&y| hamming(x, y)))
                .min()
                .unwrap_or(d);
            return Ok(VgCode {
                d,
                alpha_code: a,
                words: kept,
                min_distance,
                rho,
            });
        }
    }
    Err(CoreError::Construction(format!(
        "could not reach ln|code| > {target_ln:.3} at distance > {dist_floor:.3} for D = {d}"
    )))
}

impl VgCode {
    /// Exhaustive verification of both certified clauses.
    pub fn verify(&self) -> bool {
        let sep_ok = self.words.iter().enumerate().all(|(i, &x)| {
            self.words[i + 1..]
                .iter()
                .all(|&y| hamming(x, y) as f64 > (1.0 - self.alpha_code) * self.d as f64 / 2.0)
        });
        let count_ok = (self.words.len() as f64).ln() > self.rho * self.d as f64 / 2.0;
        sep_ok && count_ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn choose_d_reference_values() {
        // direct enumeration oracle
        let oracle = |n: usize, beta: f64| {
            let mut d = 2;
            loop {
                if (d as f64).powf(2.0 * beta + 1.0) >= 7.0 * n as f64 {
                    return d;
                }
                d += 2;
            }
        };
        assert_eq!(choose_d(1, 1.0), 2); // 2^3 = 8 >= 7
        assert_eq!(choose_d(100, 1.0), 10); // 10^3 = 1000 >= 700 > 8^3
        for &n in &[1usize, 10, 100, 1000, 50_000] {
            for &b in &[0.5, 1.0, 2.0] {
                let d = choose_d(n, b);
                assert_eq!(d, oracle(n, b));
                assert_eq!(d % 2, 0);
            }
        }
    }

    #[test]
    fn tiny_code_exists() {
        let code = vg_subset(2, 0.5, 0).unwrap();
        assert!(code.verify());
        // target ln|code| > rho: |code| = 2 suffices since ln 2 > 0.2616
        assert!(code.words.len() >= 2);
        assert!(code.min_distance >= 1);
    }

    #[test]
    fn certified_clauses_hold_exhaustively() {
        for &d in &[8usize, 16, 32] {
            let code = vg_subset(d, 0.5, 1).unwrap();
            assert!(code.verify(), "D = {d}");
            // the alpha = 1/2 specialization
            for (i, &x) in code.words.iter().enumerate() {
                for &y in &code.words[i + 1..] {
                    assert!(hamming(x, y) > d / 4);
                }
            }
            assert!((code.words.len() as f64).ln() > d as f64 / 8.0);
        }
    }

    #[test]
    fn d8_code_reaches_three_words_at_distance_three() {
        let code = vg_subset(8, 0.5, 3).unwrap();
        assert!(code.words.len() >= 3);
        assert!(code.min_distance >= 3);
    }

    #[test]
    fn construction_is_deterministic_per_seed() {
        let a = vg_subset(16, 0.5, 9).unwrap();
        let b = vg_subset(16, 0.5, 9).unwrap();
        assert_eq!(a.words, b.words);
    }
}
