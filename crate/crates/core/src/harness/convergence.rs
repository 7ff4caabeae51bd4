//! Convergence detection on parameter snapshots taken at episode boundaries.

/// Sup-norm distance between two equally long parameter vectors.
pub fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "snapshots must have equal length");
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// First snapshot index `N` such that the `W` consecutive differences
/// `||s_{N+1} - s_N||, ..., ||s_{N+W} - s_{N+W-1}||` are all at most `epsilon`.
///
/// Snapshot 0 is taken before the first episode, so `N` counts completed episodes.
pub fn detect_convergence<T: AsRef<[f64]>>(
    snapshots: &[T],
    epsilon: f64,
    window: usize,
) -> Option<usize> {
    let diffs: Vec<f64> = snapshots
        .windows(2)
        .map(|w| sup_norm_diff(w[0].as_ref(), w[1].as_ref()))
        .collect();
    first_quiet_run(&diffs, epsilon, window)
}

/// As [`detect_convergence`] but on precomputed differences, `diffs[i] = ||s_{i+1} - s_i||`.
pub fn first_quiet_run(diffs: &[f64], epsilon: f64, window: usize) -> Option<usize> {
    assert!(window >= 1, "window must be at least 1");
    let mut run = 0;
    for (i, d) in diffs.iter().enumerate() {
        if *d <= epsilon {
            run += 1;
            if run == window {
                return Some(i + 1 - window);
            }
        } else {
            run = 0;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_snapshots_converge_at_zero() {
        let snaps = vec![vec![1.0, 2.0]; 12];
        for w in 1..=11 {
            assert_eq!(detect_convergence(&snaps, 0.01, w), Some(0));
        }
        assert_eq!(detect_convergence(&snaps, 0.01, 12), None);
    }

    #[test]
    fn persistent_jumps_never_converge() {
        let snaps: Vec<Vec<f64>> = (0..100).map(|i| vec![0.02 * i as f64]).collect();
        assert_eq!(detect_convergence(&snaps, 0.01, 1), None);
    }

    #[test]
    fn run_must_be_consecutive() {
        let diffs = [0.5, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0];
        assert_eq!(first_quiet_run(&diffs, 0.1, 3), Some(4));
        assert_eq!(first_quiet_run(&diffs, 0.1, 2), Some(1));
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force(
            diffs in proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0)], 0..40),
            window in 1usize..6,
        ) {
            let brute = (0..diffs.len()).find(|&n| n + window <= diffs.len() && diffs[n..n + window].iter().all(|d| *d <= 0.5));
            prop_assert_eq!(first_quiet_run(&diffs, 0.5, window), brute);
        }
    }
}
