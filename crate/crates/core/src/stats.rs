//! Small order statistics shared by several stages.

/// Lower median: for an even count the smaller of the two middle values.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(sorted[(sorted.len() - 1) / 2])
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_median_rule() {
        assert_eq!(lower_median(&[450.0, 420.0, 430.0]), Some(430.0));
        assert_eq!(lower_median(&[440.0, 420.0]), Some(420.0));
        assert_eq!(lower_median(&[]), None);
    }
}
