use alloc::vec::Vec;

use super::RhirlError;

/// Boltzmann distribution `π(a) ∝ exp(β·q(a))`, in the order of `q`.
///
/// Computed with max-subtraction, so any finite `q` is safe. `β = 0` yields
/// an exactly uniform distribution.
pub fn boltzmann_policy(q: &[f64], beta: f64) -> Result<Vec<f64>, RhirlError> {
    if q.is_empty() {
        return Err(RhirlError::EmptyActionSet);
    }
    let mut out = Vec::with_capacity(q.len());
    softmax_into(q, beta, &mut out);
    Ok(out)
}

/// Writes the Boltzmann distribution of `q` into `out` and returns
/// `ln Σ exp(β(q − max))`, the log-normaliser relative to the maximum.
pub(crate) fn softmax_into(q: &[f64], beta: f64, out: &mut Vec<f64>) -> f64 {
    out.clear();
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for &x in q {
        let e = libm::exp(beta * (x - max));
        total += e;
        out.push(e);
    }
    out.iter_mut().for_each(|p| *p /= total);
    libm::log(total)
}

/// `ln π(chosen)` for the Boltzmann distribution of `q`.
pub(crate) fn log_prob(q: &[f64], beta: f64, chosen: usize, scratch: &mut Vec<f64>) -> f64 {
    let log_norm = softmax_into(q, beta, scratch);
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    beta * (q[chosen] - max) - log_norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_beta_is_uniform() {
        let p = boltzmann_policy(&[3.0, -1.0, 0.5, 7.0], 0.0).unwrap();
        assert_eq!(p, alloc::vec![0.25; 4]);
    }

    #[test]
    fn equal_values_are_uniform() {
        let p = boltzmann_policy(&[0.7; 5], 3.0).unwrap();
        assert!(p.iter().all(|x| *x == 0.2));
    }

    #[test]
    fn two_action_hand_computation() {
        let e = core::f64::consts::E;
        let p = boltzmann_policy(&[1.0, 0.0], 1.0).unwrap();
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((p[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
        assert!((p[0] - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(boltzmann_policy(&[], 1.0), Err(RhirlError::EmptyActionSet));
    }

    #[test]
    fn log_prob_matches_log_of_probability() {
        let q = [0.3, -0.2, 1.1];
        let p = boltzmann_policy(&q, 2.5).unwrap();
        let mut scratch = Vec::new();
        for i in 0..3 {
            assert!((log_prob(&q, 2.5, i, &mut scratch) - libm::log(p[i])).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn normalised(q in proptest::collection::vec(-50.0f64..50.0, 1..20), beta in 0.0f64..20.0) {
            let p = boltzmann_policy(&q, beta).unwrap();
            let s: f64 = p.iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn shift_invariant(q in proptest::collection::vec(-64i32..64, 1..10), c in -32i32..32, beta in 0.0f64..4.0) {
            // Dyadic values make q + c exact, so the comparison can be exact.
            let q: Vec<f64> = q.into_iter().map(|x| x as f64 / 8.0).collect();
            let shifted: Vec<f64> = q.iter().map(|x| x + c as f64).collect();
            prop_assert_eq!(boltzmann_policy(&q, beta).unwrap(), boltzmann_policy(&shifted, beta).unwrap());
        }
    }
}
