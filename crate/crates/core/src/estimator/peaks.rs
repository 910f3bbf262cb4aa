use alloc::vec::Vec;

use super::spectrum::Spectrum;

fn is_local_max(values: &[f64], i: usize) -> bool {
    let v = values[i];
    let left = i == 0 || v > values[i - 1];
    let right = i + 1 == values.len() || v > values[i + 1];
    left && right && values.len() > 1
}

/// Indices of the `k` largest strict local maxima (endpoints compared to
/// their single neighbour). Ties go to the lower index. When there are fewer
/// than `k` maxima the remainder is taken from the largest other grid values.
/// The result is sorted ascending.
pub fn peak_indices(values: &[f64], k: usize) -> Vec<usize> {
    let by_value_desc = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then(a.cmp(b));
    let mut peaks: Vec<usize> = (0..values.len()).filter(|&i| is_local_max(values, i)).collect();
    peaks.sort_by(by_value_desc);
    peaks.truncate(k);
    if peaks.len() < k {
        let mut rest: Vec<usize> = (0..values.len()).filter(|i| !peaks.contains(i)).collect();
        rest.sort_by(by_value_desc);
        peaks.extend(rest.into_iter().take(k - peaks.len()));
    }
    peaks.sort_unstable();
    peaks
}

/// Directions of the `k` highest peaks, sorted ascending. With `refine`, each
/// interior peak is moved to the vertex of the parabola through it and its
/// neighbours (at most half a grid step).
pub fn find_peaks(spectrum: &Spectrum, k: usize, refine: bool) -> Vec<f64> {
    let values = &spectrum.values;
    let grid = &spectrum.grid;
    let mut out: Vec<f64> = peak_indices(values, k)
        .into_iter()
        .map(|i| {
            if refine && i > 0 && i + 1 < values.len() {
                let (l, c, r) = (values[i - 1], values[i], values[i + 1]);
                let denom = l - 2.0 * c + r;
                if denom < 0.0 {
                    let offset = (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
                    let step = 0.5 * (grid[i + 1] - grid[i - 1]);
                    return (grid[i] + offset * step).clamp(-1.0, 1.0);
                }
            }
            grid[i]
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn spectrum(values: Vec<f64>) -> Spectrum {
        let n = values.len();
        Spectrum {
            grid: super::super::spectrum::direction_grid(n),
            values,
            per_subcarrier: None,
        }
    }

    /// Exhaustive oracle: scan every grid point, collect maxima, sort.
    fn oracle(values: &[f64], k: usize) -> Vec<usize> {
        let n = values.len();
        let mut maxima = Vec::new();
        for i in 0..n {
            let mut ok = n > 1;
            if i > 0 && !(values[i] > values[i - 1]) {
                ok = false;
            }
            if i + 1 < n && !(values[i] > values[i + 1]) {
                ok = false;
            }
            if ok {
                maxima.push((values[i], i));
            }
        }
        let mut chosen: Vec<usize> = Vec::new();
        for _ in 0..k.min(maxima.len()) {
            let mut best: Option<(f64, usize)> = None;
            for &(v, i) in &maxima {
                if chosen.contains(&i) {
                    continue;
                }
                if best.map_or(true, |(bv, bi)| v > bv || (v == bv && i < bi)) {
                    best = Some((v, i));
                }
            }
            chosen.push(best.unwrap().1);
        }
        while chosen.len() < k.min(n) {
            let mut best: Option<(f64, usize)> = None;
            for i in 0..n {
                if chosen.contains(&i) {
                    continue;
                }
                if best.map_or(true, |(bv, bi)| values[i] > bv || (values[i] == bv && i < bi)) {
                    best = Some((values[i], i));
                }
            }
            chosen.push(best.unwrap().1);
        }
        chosen.sort();
        chosen
    }

    #[test]
    fn triangular_bump() {
        let v = vec![0.0, 1.0, 2.0, 3.0, 2.0, 1.0, 0.0];
        assert_eq!(peak_indices(&v, 1), vec![3]);
        assert_eq!(find_peaks(&spectrum(v), 1, false), vec![0.0]);
    }

    #[test]
    fn tie_goes_to_lower_index() {
        let v = vec![0.0, 5.0, 0.0, 5.0, 0.0];
        assert_eq!(peak_indices(&v, 1), vec![1]);
    }

    #[test]
    fn endpoints_are_eligible() {
        let v = vec![4.0, 1.0, 2.0, 1.0, 3.0];
        assert_eq!(peak_indices(&v, 2), vec![0, 4]);
    }

    #[test]
    fn fills_from_non_peaks() {
        let v = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(peak_indices(&v, 2), vec![2, 3]);
    }

    #[test]
    fn refinement_moves_towards_true_vertex() {
        // samples of -(x - 0.3)^2 on a unit grid scaled into [-1, 1]
        let grid = super::super::spectrum::direction_grid(21);
        let truth = 0.33;
        let values: Vec<f64> = grid.iter().map(|x| 10.0 - (x - truth) * (x - truth)).collect();
        let s = Spectrum { grid, values, per_subcarrier: None };
        let coarse = find_peaks(&s, 1, false)[0];
        let fine = find_peaks(&s, 1, true)[0];
        assert!((fine - truth).abs() < 1e-12);
        assert!((coarse - truth).abs() > 0.01);
    }

    #[test]
    fn random_spectra_match_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let n = rng.random_range(3..60);
            let k = rng.random_range(1..5);
            // coarse quantisation creates plateaus and ties
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
            assert_eq!(peak_indices(&v, k), oracle(&v, k), "{v:?} k={k}");
        }
    }

    proptest! {
        #[test]
        fn matches_oracle(v in proptest::collection::vec(0.0f64..1.0, 3..100), k in 1usize..4) {
            prop_assert_eq!(peak_indices(&v, k), oracle(&v, k));
        }
    }
}
