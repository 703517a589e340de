use super::{ActivitySeries, SmoothedSeries};

/// Centered moving average over `[i - w/2, i + w - 1 - w/2]`.
///
/// Near the ends the window shrinks by the same amount on both sides so the
/// sample stays centered; a window of 1 returns the input.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let n = values.len();
    if window <= 1 || n == 0 {
        return values.to_vec();
    }
    let left = (window / 2) as isize;
    let right = window as isize - 1 - left;
    let last = n as isize - 1;
    (0..n as isize)
        .map(|i| {
            let k = 0.max(left - i).max(i + right - last);
            let (lo, hi) = (i - left + k, i + right - k);
            let (lo, hi) = if lo > hi { (i, i) } else { (lo, hi) };
            let slice = &values[lo as usize..=hi as usize];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// Minutes from bin start to the center of the averaging window.
///
/// An odd window is centered on its middle bin's midpoint (5 min). An even
/// window of bins `[i - w/2, i + w/2 - 1]` is centered on bin `i`'s start.
pub fn smoothing_offset_min(window: usize) -> f64 {
    if window.is_multiple_of(2) {
        0.0
    } else {
        5.0
    }
}

pub fn smooth_series(series: &ActivitySeries, window: usize) -> SmoothedSeries {
    let raw: Vec<f64> = series.bins.iter().map(|b| f64::from(*b)).collect();
    SmoothedSeries {
        group_id: series.group_id.clone(),
        start: series.start,
        values: smooth(&raw, window),
        offset_min: smoothing_offset_min(window.max(1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_fixed_point() {
        let v = vec![3.5; 50];
        assert_eq!(smooth(&v, 12), v);
    }

    #[test]
    fn interior_window_twelve() {
        let v: Vec<f64> = (0..40).map(f64::from).collect();
        let s = smooth(&v, 12);
        // bins 14..=25 average to 19.5
        assert_eq!(s[20], 19.5);
    }

    #[test]
    fn edges_shrink_symmetrically() {
        let v: Vec<f64> = (0..40).map(f64::from).collect();
        let s = smooth(&v, 12);
        assert_eq!(s[0], 0.0);
        // i = 2: k = 4, window [0, 3]
        assert_eq!(s[2], 1.5);
        // i = 39: k = 5, window [38, 39]
        assert_eq!(s[39], 38.5);
    }

    #[test]
    fn short_input() {
        assert_eq!(smooth(&[1.0, 3.0], 12), vec![1.0, 2.0]);
        assert!(smooth(&[], 12).is_empty());
    }
}
