//! Special functions needed by the Beta evidence loss.
//!
//! `log_gamma` uses a Lanczos approximation (g = 7, nine coefficients);
//! `digamma` and `trigamma` shift the argument upward with the standard
//! recurrences until it is at least 6 and then sum the asymptotic series.

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln(2π) / 2
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Argument above which the asymptotic series is used directly.
const ASYMPTOTIC_FROM: f64 = 6.0;

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} requires a finite positive argument, got {x}")))
    }
}

/// ln Γ(x) for finite `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_positive("log_gamma", x)?;
    Ok(log_gamma_unchecked(x))
}

pub(crate) fn log_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x keeps the Lanczos sum in its accurate range.
        return log_gamma_unchecked(x + 1.0) - x.ln();
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    HALF_LN_2PI + (z + 0.5) * t.ln() - t + acc.ln()
}

/// ψ(x) = d/dx ln Γ(x) for finite `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive("digamma", x)?;
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < ASYMPTOTIC_FROM {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Bernoulli terms B_2k / (2k x^2k), k = 1..7, in Horner form.
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32_760.0 - inv2 / 12.0))))));
    shift + x.ln() - 0.5 / x - series
}

/// ψ'(x), the derivative of the digamma function, for finite `x > 0`.
pub fn trigamma(x: f64) -> Result<f64> {
    check_positive("trigamma", x)?;
    Ok(trigamma_unchecked(x))
}

pub(crate) fn trigamma_unchecked(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < ASYMPTOTIC_FROM {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        + 0.5 * inv2
        + inv * inv2
            * (1.0 / 6.0
                - inv2
                    * (1.0 / 30.0
                        - inv2
                            * (1.0 / 42.0
                                - inv2
                                    * (1.0 / 30.0
                                        - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2_730.0 - inv2 * 7.0 / 6.0))))));
    shift + series
}

/// ln B(a, b) = ln Γ(a) + ln Γ(b) − ln Γ(a + b).
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    check_positive("log_beta", a)?;
    check_positive("log_beta", b)?;
    Ok(log_beta_unchecked(a, b))
}

pub(crate) fn log_beta_unchecked(a: f64, b: f64) -> f64 {
    // Sorting the arguments makes the result bit-identical under swapping.
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    log_gamma_unchecked(lo) + log_gamma_unchecked(hi) - log_gamma_unchecked(lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER: f64 = 0.577_215_664_901_532_9;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn log_gamma_anchors() {
        assert!(close(log_gamma(1.0).unwrap(), 0.0, 1e-14));
        assert!(close(log_gamma(2.0).unwrap(), 0.0, 1e-14));
        assert!(close(log_gamma(5.0).unwrap(), 24f64.ln(), 1e-12));
        assert!(close(log_gamma(0.5).unwrap(), 0.5 * std::f64::consts::PI.ln(), 1e-12));
    }

    #[test]
    fn log_gamma_matches_factorial_sums() {
        // ln (n-1)! as a running sum of logs.
        let mut acc = 0.0f64;
        for n in 2..=400u32 {
            acc += f64::from(n - 1).ln();
            let got = log_gamma(f64::from(n)).unwrap();
            assert!(close(got, acc, 1e-10 * acc.abs().max(1.0)), "n={n}: {got} vs {acc}");
        }
    }

    #[test]
    fn log_gamma_small_and_large_arguments() {
        // Γ(x) ~ 1/x − γ for tiny x.
        let x = 1e-3;
        let approx = (1.0 / x - EULER + (EULER * EULER / 2.0 + std::f64::consts::PI.powi(2) / 12.0) * x).ln();
        assert!(close(log_gamma(x).unwrap(), approx, 1e-8));
        // Stirling with the first three correction terms at 1e6.
        let x = 1e6f64;
        let stirling = (x - 0.5) * x.ln() - x + HALF_LN_2PI + 1.0 / (12.0 * x) - 1.0 / (360.0 * x.powi(3));
        let got = log_gamma(x).unwrap();
        assert!((got - stirling).abs() / stirling <= 1e-14, "{got} vs {stirling}");
    }

    #[test]
    fn domain_errors() {
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(log_gamma(bad).is_err());
            assert!(digamma(bad).is_err());
            assert!(trigamma(bad).is_err());
            assert!(log_beta(bad, 1.0).is_err());
            assert!(log_beta(1.0, bad).is_err());
        }
    }

    #[test]
    fn digamma_anchors() {
        assert!(close(digamma(1.0).unwrap(), -EULER, 1e-12));
        assert!(close(digamma(2.0).unwrap(), 1.0 - EULER, 1e-12));
        assert!(close(
            digamma(0.5).unwrap(),
            -EULER - 2.0 * std::f64::consts::LN_2,
            1e-12
        ));
    }

    #[test]
    fn digamma_harmonic_oracle() {
        // ψ(n) = −γ + H_{n−1}
        let mut harmonic = 0.0;
        for n in 1..=200u32 {
            let expected = -EULER + harmonic;
            assert!(close(digamma(f64::from(n)).unwrap(), expected, 1e-11), "n={n}");
            harmonic += 1.0 / f64::from(n);
        }
    }

    #[test]
    fn digamma_tiny_argument() {
        // ψ(x) = −1/x − γ + (π²/6) x + O(x²)
        let x = 1e-3;
        let approx = -1.0 / x - EULER + std::f64::consts::PI.powi(2) / 6.0 * x - 1.202_056_903_159_594 * x * x;
        assert!(close(digamma(x).unwrap(), approx, 1e-8));
    }

    #[test]
    fn trigamma_anchors() {
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!(close(trigamma(1.0).unwrap(), pi2_6, 1e-12));
        assert!(close(trigamma(2.0).unwrap(), pi2_6 - 1.0, 1e-12));
        assert!(close(trigamma(0.5).unwrap(), std::f64::consts::PI.powi(2) / 2.0, 1e-11));
    }

    #[test]
    fn trigamma_is_derivative_of_digamma() {
        for &x in &[0.01f64, 0.3, 1.0, 2.5, 7.0, 40.0, 1e3] {
            let h = 1e-5 * x.max(1.0);
            let fd = (digamma(x + h).unwrap() - digamma(x - h).unwrap()) / (2.0 * h);
            let exact = trigamma(x).unwrap();
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "x={x}: {fd} vs {exact}");
        }
    }

    #[test]
    fn log_beta_anchors() {
        assert!(close(log_beta(1.0, 1.0).unwrap(), 0.0, 1e-14));
        assert!(close(log_beta(2.0, 3.0).unwrap(), (1.0f64 / 12.0).ln(), 1e-12));
        assert!(close(log_beta(0.5, 0.5).unwrap(), std::f64::consts::PI.ln(), 1e-12));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn log_gamma_recurrence(x in 0.1f64..100.0) {
                let lhs = log_gamma(x + 1.0).unwrap() - log_gamma(x).unwrap();
                prop_assert!((lhs - x.ln()).abs() <= 1e-9);
            }

            #[test]
            fn digamma_recurrence(x in 1e-3f64..1e3) {
                let lhs = digamma(x + 1.0).unwrap() - digamma(x).unwrap();
                prop_assert!((lhs - 1.0 / x).abs() <= 1e-9 * (1.0 / x).max(1.0));
            }

            #[test]
            fn log_beta_symmetric(a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
                prop_assert_eq!(log_beta(a, b).unwrap().to_bits(), log_beta(b, a).unwrap().to_bits());
            }
        }
    }
}
