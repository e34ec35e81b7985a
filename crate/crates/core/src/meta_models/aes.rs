use super::MixtureParams;
use crate::error::{Error, Result};

/// Assumed effect size read off a fitted mixture.
///
/// Up to three components this is the mean of the first (largest-mean)
/// component; with more, the weight-averaged mean of all positive
/// components.
pub fn extract_aes(params: &MixtureParams) -> Result<f64> {
    if params.k <= 3 {
        let mu = params.means[0];
        if mu > 0.0 {
            return Ok(mu);
        }
        return Err(Error::estimation(format!(
            "no positive component: leading mean is {mu}"
        )));
    }
    let (num, den) = params
        .means
        .iter()
        .zip(&params.weights)
        .filter(|(&mu, _)| mu > 0.0)
        .fold((0.0, 0.0), |(n, d), (&mu, &w)| (n + w * mu, d + w));
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::estimation("no positive component with positive weight"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn three_components_reads_first_mean() {
        let p = MixtureParams::new(vec![0.2, 0.6, 0.2], vec![2.1, 0.0, -1.9], vec![0.25; 3]).unwrap();
        assert_eq!(extract_aes(&p).unwrap(), 2.1);
    }

    #[test]
    fn four_components_weighted_average() {
        let p = MixtureParams::new(vec![0.1, 0.3, 0.4, 0.2], vec![3.0, 1.0, 0.0, -2.0], vec![1.0; 4])
            .unwrap();
        assert_abs_diff_eq!(extract_aes(&p).unwrap(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn no_positive_component() {
        let p = MixtureParams::new(vec![0.5, 0.5], vec![0.0, -1.0], vec![1.0; 2]).unwrap();
        assert!(matches!(extract_aes(&p), Err(Error::Estimation(_))));
        let p = MixtureParams::new(vec![0.25; 4], vec![-0.1, -1.0, -2.0, -3.0], vec![1.0; 4]).unwrap();
        assert!(extract_aes(&p).is_err());
    }
}
