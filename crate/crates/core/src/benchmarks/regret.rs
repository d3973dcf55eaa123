/// Running best true objective over evaluations whose true constraint was
/// non-negative; `fallback` until the first such evaluation.
pub fn best_safe_values(f_true: &[f64], s_true: &[f64], fallback: f64) -> Vec<f64> {
    let mut best = f64::NEG_INFINITY;
    f_true
        .iter()
        .zip(s_true)
        .map(|(f, s)| {
            if *s >= 0.0 && *f > best {
                best = *f;
            }
            if best.is_finite() {
                best
            } else {
                fallback
            }
        })
        .collect()
}

/// `fstar - best safe true value so far` after each evaluation.
pub fn simple_regret(f_true: &[f64], s_true: &[f64], fstar: f64, fallback: f64) -> Vec<f64> {
    best_safe_values(f_true, s_true, fallback).into_iter().map(|b| fstar - b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn optimum_first_stays_zero() {
        let r = simple_regret(&[5.0, 1.0, 2.0], &[1.0, 1.0, 1.0], 5.0, 0.0);
        assert_eq!(r, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn unsafe_evaluations_do_not_count() {
        let r = simple_regret(&[1.0, 9.0, 2.0], &[1.0, -0.1, 0.5], 10.0, 0.0);
        assert_eq!(r, vec![9.0, 9.0, 8.0]);
        let r = simple_regret(&[3.0], &[-1.0], 10.0, 1.5);
        assert_eq!(r, vec![8.5]);
    }

    proptest! {
        #[test]
        fn regret_is_non_increasing(f in proptest::collection::vec(-10.0f64..10.0, 1..50), s in proptest::collection::vec(-1.0f64..1.0, 50)) {
            let r = simple_regret(&f, &s[..f.len()], 10.0, -10.0);
            for w in r.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }
    }
}
