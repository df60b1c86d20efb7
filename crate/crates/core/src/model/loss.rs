//! Focal loss for the attribute heads and the melanoma output.

use crate::checklist::N_ATTRIBUTES;

/// Predictions are clamped this far from 0 and 1 before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

fn clamp(p: f64) -> (f64, bool) {
    let c = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    (c, c != p)
}

/// `-mu (1 - p)^tau ln p` for a positive label, `-mu p^tau ln(1 - p)` for a
/// negative one.
pub fn focal_loss(p: f64, y: u8, mu: f64, tau: f64) -> f64 {
    let (p, _) = clamp(p);
    if y == 1 {
        -mu * (1.0 - p).powf(tau) * p.ln()
    } else {
        -mu * p.powf(tau) * (1.0 - p).ln()
    }
}

/// Derivative of [`focal_loss`] with respect to `p`; zero where `p` is clamped.
pub fn focal_loss_grad(p: f64, y: u8, mu: f64, tau: f64) -> f64 {
    let (p, clamped) = clamp(p);
    if clamped {
        return 0.0;
    }
    if y == 1 {
        let q = 1.0 - p;
        let focus = if tau == 0.0 { 0.0 } else { tau * q.powf(tau - 1.0) * p.ln() };
        mu * (focus - q.powf(tau) / p)
    } else {
        let q = 1.0 - p;
        let focus = if tau == 0.0 { 0.0 } else { tau * p.powf(tau - 1.0) * q.ln() };
        -mu * (focus - p.powf(tau) / q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub attributes: f64,
    pub melanoma: f64,
    pub total: f64,
}

/// Sum of the seven attribute losses plus `lambda` times the melanoma loss.
#[allow(clippy::too_many_arguments)]
pub fn total_loss(
    y7_hat: &[f64; N_ATTRIBUTES],
    y7: &[u8; N_ATTRIBUTES],
    ym_hat: f64,
    ym: u8,
    mu: &[f64; N_ATTRIBUTES],
    mu_mel: f64,
    tau: f64,
    lambda: f64,
) -> LossBreakdown {
    let attributes: f64 = (0..N_ATTRIBUTES)
        .map(|j| focal_loss(y7_hat[j], y7[j], mu[j], tau))
        .sum();
    let melanoma = focal_loss(ym_hat, ym, mu_mel, tau);
    LossBreakdown {
        attributes,
        melanoma,
        total: attributes + lambda * melanoma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_zero_is_cross_entropy() {
        for p in [0.1, 0.5, 0.93] {
            assert_eq!(focal_loss(p, 1, 1.0, 0.0), -f64::ln(p));
            assert_eq!(focal_loss(p, 0, 1.0, 0.0), -f64::ln(1.0 - p));
        }
    }

    #[test]
    fn pinned_value() {
        let l = focal_loss(0.9, 1, 1.0, 2.0);
        let expect = 0.01 * -f64::ln(0.9);
        assert!((l - expect).abs() < 1e-15);
        assert!((l - 0.001_053_61).abs() < 1e-8);
    }

    #[test]
    fn perfect_prediction_vanishes() {
        assert!(focal_loss(1.0 - 1e-9, 1, 1.0, 2.0) < 1e-20);
        assert!(focal_loss(1.0, 1, 1.0, 2.0) < 1e-20);
        assert!(focal_loss(0.0, 0, 1.0, 0.0) < 1e-11);
    }

    #[test]
    fn gradient_matches_difference_quotient() {
        for &(p, y, mu, tau) in &[
            (0.3, 1, 1.0, 2.0),
            (0.7, 0, 0.6, 2.0),
            (0.55, 1, 1.3, 0.0),
            (0.2, 0, 2.0, 0.5),
            (0.9, 1, 1.0, 1.0),
        ] {
            let h = 1e-6;
            let fd = (focal_loss(p + h, y, mu, tau) - focal_loss(p - h, y, mu, tau)) / (2.0 * h);
            let an = focal_loss_grad(p, y, mu, tau);
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{p} {y}: {fd} vs {an}");
        }
    }

    #[test]
    fn totals() {
        let yh = [0.2, 0.4, 0.6, 0.8, 0.5, 0.3, 0.7];
        let y = [0, 1, 1, 0, 1, 0, 1];
        let mu = [1.0, 0.5, 2.0, 1.0, 1.0, 0.8, 1.2];
        let b = total_loss(&yh, &y, 0.6, 1, &mu, 1.0, 2.0, 0.0);
        assert_eq!(b.total, b.attributes);
        let b1 = total_loss(&yh, &y, 0.6, 1, &mu, 1.0, 2.0, 1.0);
        let mut expect = 0.0;
        for j in 0..7 {
            expect += focal_loss(yh[j], y[j], mu[j], 2.0);
        }
        expect += focal_loss(0.6, 1, 1.0, 2.0);
        assert!((b1.total - expect).abs() < 1e-12);
    }
}
