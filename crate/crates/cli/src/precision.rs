use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrecisionError {
    #[error("{predictions} predictions but {labels} labels")]
    Length { predictions: usize, labels: usize },
    #[error("class {value} out of range for {num_classes} classes")]
    Class { value: usize, num_classes: usize },
}

/// Per-class precision with its mean and population standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionReport {
    pub per_class_precision: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl PrecisionReport {
    pub fn from_precisions(per_class_precision: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&per_class_precision);
        Self {
            per_class_precision,
            mean,
            std,
        }
    }
}

/// Mean and population standard deviation; `(0, 0)` for an empty slice.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `TP_c / (TP_c + FP_c)` for every class; a class that is never predicted
/// scores 0.
pub fn precision_report(
    predictions: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<PrecisionReport, PrecisionError> {
    if predictions.len() != labels.len() {
        return Err(PrecisionError::Length {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let mut predicted = vec![0usize; num_classes];
    let mut correct = vec![0usize; num_classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        for value in [p, l] {
            if value >= num_classes {
                return Err(PrecisionError::Class { value, num_classes });
            }
        }
        predicted[p] += 1;
        if p == l {
            correct[p] += 1;
        }
    }
    let per_class = predicted
        .iter()
        .zip(&correct)
        .map(|(&n, &tp)| if n == 0 { 0.0 } else { tp as f64 / n as f64 })
        .collect();
    Ok(PrecisionReport::from_precisions(per_class))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_example() {
        let r = precision_report(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(r.per_class_precision[0], 1.0);
        assert!((r.per_class_precision[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.mean - 0.8333333).abs() < 5e-8);
        assert!((r.std - 0.1666667).abs() < 5e-8);
    }

    #[test]
    fn perfect_predictions() {
        let labels = [0, 1, 2, 2, 1, 0];
        let r = precision_report(&labels, &labels, 3).unwrap();
        assert_eq!(r.per_class_precision, vec![1.0; 3]);
        assert_eq!(r.std, 0.0);
    }

    #[test]
    fn never_predicted_class_scores_zero() {
        let r = precision_report(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(r.per_class_precision, vec![0.5, 0.0]);
        assert_eq!(r.mean, 0.25);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(precision_report(&[0], &[0, 1], 2), Err(PrecisionError::Length { .. })));
        assert!(matches!(precision_report(&[2], &[0], 2), Err(PrecisionError::Class { .. })));
    }
}
