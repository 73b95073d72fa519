//! Scalar numeric helpers used throughout the fitting routines.

/// ln(10); prior inclusion odds are specified as base-10 log-odds and
/// converted to natural log-odds through this factor.
pub const LN_10: f64 = std::f64::consts::LN_10;

/// Logistic function 1/(1 + exp(-x)), stable for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(sigmoid(x)) without overflow for large |x|.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Probability corresponding to a base-10 log-odds value.
pub fn prob_from_log10_odds(logodds: f64) -> f64 {
    sigmoid(LN_10 * logodds)
}

/// log(sum(exp(xs))) with the usual shift by the maximum, so that uniformly
/// translated inputs lose no precision. Returns -inf for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Kullback-Leibler divergence between a Bernoulli(alpha) inclusion indicator
/// and the Bernoulli prior given by natural log-odds, with the 0*ln(0) = 0
/// convention at alpha = 0 and alpha = 1.
pub fn selection_kl(alpha: f64, nat_logodds: f64) -> f64 {
    let mut kl = 0.0;
    if alpha > 0.0 {
        kl += alpha * (alpha.ln() - log_sigmoid(nat_logodds));
    }
    if alpha < 1.0 {
        kl += (1.0 - alpha) * ((1.0 - alpha).ln() - log_sigmoid(-nat_logodds));
    }
    kl
}

/// Mean squared deviation from the mean (normalized by n, not n-1).
pub fn variance_n(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Interpolated quantile of an ascending-sorted sample (the same convention
/// as most statistics software: index h = (n-1) q, linear between points).
pub fn quantile_sorted(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of an empty sample");
    let h = (xs.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
}

/// Fixed-exponent scientific notation, e.g. 9.355e+05 with three digits.
pub fn format_scientific(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        if x.is_finite() {
            return format!("{:.*}e+00", digits, 0.0);
        }
        return format!("{x}");
    }
    let sign = if x < 0.0 { "-" } else { "" };
    let a = x.abs();
    let mut exp = a.log10().floor() as i32;
    let scale = 10f64.powi(digits as i32);
    let mut mant = (a / 10f64.powi(exp) * scale).round() / scale;
    if mant >= 10.0 {
        mant /= 10.0;
        exp += 1;
    }
    let esign = if exp < 0 { '-' } else { '+' };
    format!("{sign}{mant:.digits$}e{esign}{:02}", exp.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sigmoid_matches_definition_and_saturates() {
        assert_abs_diff_eq!(sigmoid(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sigmoid(2.0), 1.0 / (1.0 + (-2.0f64).exp()), epsilon = 1e-15);
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        for &x in &[-30.0, -2.5, 0.0, 0.1, 7.0] {
            assert_abs_diff_eq!(sigmoid(x) + sigmoid(-x), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(quantile_sorted(&xs, 0.0), 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(quantile_sorted(&xs, 1.0), 4.0, epsilon = 0.0);
        assert_abs_diff_eq!(quantile_sorted(&xs, 0.5), 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(quantile_sorted(&[7.0], 0.3), 7.0, epsilon = 0.0);
    }

    #[test]
    fn log_sigmoid_is_stable() {
        for &x in &[-700.0, -5.0, 0.0, 5.0, 700.0] {
            assert!(log_sigmoid(x).is_finite());
        }
        assert_abs_diff_eq!(log_sigmoid(3.0), sigmoid(3.0).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(log_sigmoid(-700.0), -700.0, epsilon = 1e-9);
    }

    #[test]
    fn log_sum_exp_handles_large_shifts() {
        let v = [1000.0, 1000.0 + 3f64.ln()];
        assert_abs_diff_eq!(log_sum_exp(&v), 1000.0 + 4f64.ln(), epsilon = 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_abs_diff_eq!(log_sum_exp(&[0.0]), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn selection_kl_vanishes_at_prior_and_at_endpoints() {
        assert_abs_diff_eq!(selection_kl(0.5, 0.0), 0.0, epsilon = 1e-15);
        // Degenerate alpha keeps only the matching term.
        assert_abs_diff_eq!(selection_kl(0.0, 0.0), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(selection_kl(1.0, 0.0), 2f64.ln(), epsilon = 1e-15);
        assert!(selection_kl(0.9, -3.0 * LN_10) > 0.0);
    }

    #[test]
    fn variance_n_normalizes_by_n() {
        assert_abs_diff_eq!(variance_n(&[1.0, 2.0, 3.0]), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(variance_n(&[]), 0.0);
    }

    #[test]
    fn format_scientific_two_digit_exponent() {
        assert_eq!(format_scientific(935_500.0, 3), "9.355e+05");
        assert_eq!(format_scientific(0.000389, 3), "3.890e-04");
        assert_eq!(format_scientific(1.0, 3), "1.000e+00");
        assert_eq!(format_scientific(-9.9999, 3), "-1.000e+01");
        assert_eq!(format_scientific(0.0, 3), "0.000e+00");
    }

    #[test]
    fn prob_from_log10_odds_matches_direct_form() {
        assert_abs_diff_eq!(prob_from_log10_odds(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(prob_from_log10_odds(-2.0), 0.01 / 1.01, epsilon = 1e-15);
    }
}
