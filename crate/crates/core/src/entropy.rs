//! Shannon and binary entropies (bits) and closed-form Holevo quantities of
//! Bell-diagonal states.

use crate::error::{Error, Result};
use crate::quantum::BellDiagonalState;

#[inline]
fn plogp(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// `H(x) = −Σ x_i log2 x_i`, with `0 log 0 = 0`.
pub fn shannon(weights: &[f64]) -> Result<f64> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(sum));
    }
    Ok(shannon_unchecked(weights))
}

#[inline]
pub(crate) fn shannon_unchecked(weights: &[f64]) -> f64 {
    -weights.iter().map(|&w| plogp(w)).sum::<f64>()
}

/// Binary entropy `h(p)`.
pub fn binary(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("binary entropy argument {p} not in [0, 1]")));
    }
    Ok(h(p))
}

/// Binary entropy without the range check; arguments are clamped to `[0, 1]`.
#[inline]
pub fn h(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    -plogp(p) - plogp(1.0 - p)
}

/// The `p ∈ [0, 1/2]` with `h(p) = y`, by bisection to `1e-12`.
pub fn binary_inverse(y: f64) -> f64 {
    let y = y.clamp(0.0, 1.0);
    if y == 0.0 {
        return 0.0;
    }
    if y == 1.0 {
        return 0.5;
    }
    let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The three stationary values `χ^(k) = H(Λ) − h(Λ₊^(k))` and their maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolevoExtrema {
    pub chi: [f64; 3],
    pub chi_max: f64,
}

/// `Λ₊^(k) = [1 + |c_k|]/2` for the correlations along ẑ, x̂ and ŷ.
fn lambda_plus(state: &BellDiagonalState) -> [f64; 3] {
    let [l0, l1, l2, l3] = state.lambda();
    [
        0.5 * (1.0 + (l0 + l1 - l2 - l3).abs()),
        0.5 * (1.0 + (l0 - l1 + l2 - l3).abs()),
        0.5 * (1.0 + (l0 - l1 - l2 + l3).abs()),
    ]
}

pub fn holevo_extrema(state: &BellDiagonalState) -> HolevoExtrema {
    let big_h = shannon_unchecked(&state.lambda());
    let chi = lambda_plus(state).map(|lp| (big_h - h(lp)).max(0.0));
    let chi_max = chi.iter().copied().fold(0.0, f64::max);
    HolevoExtrema { chi, chi_max }
}

/// Holevo quantity with Alice's eavesdropped measurement fixed along ẑ.
pub fn holevo_bb84(state: &BellDiagonalState) -> f64 {
    let big_h = shannon_unchecked(&state.lambda());
    (big_h - h(lambda_plus(state)[0])).max(0.0)
}

/// `χ(θ, φ) = H(Λ) − h(Λ₊(θ, φ))` for a general measurement direction.
pub fn holevo_at_angles(state: &BellDiagonalState, theta: f64, phi: f64) -> f64 {
    let [l0, l1, l2, l3] = state.lambda();
    let (mu_p, mu_m) = (l0 + l1, l0 - l1);
    let (nu_p, nu_m) = (l2 + l3, l2 - l3);
    let c2 = theta.cos().powi(2);
    let s2 = theta.sin().powi(2);
    let rad = (mu_p - nu_p).powi(2) * c2
        + (mu_m * mu_m + nu_m * nu_m + 2.0 * mu_m * nu_m * (2.0 * phi).cos()) * s2;
    let lp = 0.5 * (1.0 + rad.max(0.0).sqrt());
    shannon_unchecked(&state.lambda()) - h(lp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(l: [f64; 4]) -> BellDiagonalState {
        BellDiagonalState::new(l).unwrap()
    }

    #[test]
    fn shannon_examples() {
        assert_eq!(shannon(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((shannon(&[0.25; 4]).unwrap() - 2.0).abs() < 1e-15);
        assert!((shannon(&[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(shannon(&[0.5, 0.6]), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn binary_examples() {
        assert_eq!(binary(0.5).unwrap(), 1.0);
        assert_eq!(binary(0.0).unwrap(), 0.0);
        assert_eq!(binary(1.0).unwrap(), 0.0);
        // −0.0715 log2 0.0715 − 0.9285 log2 0.9285
        let expected = -(0.0715f64 * 0.0715f64.log2() + 0.9285f64 * 0.9285f64.log2());
        assert!((binary(0.0715).unwrap() - expected).abs() < 1e-15);
        assert!((binary(0.0715).unwrap() - 0.3712).abs() < 5e-4);
        assert!(binary(1.2).is_err());
    }

    #[test]
    fn binary_inverse_examples() {
        assert_eq!(binary_inverse(1.0), 0.5);
        assert_eq!(binary_inverse(0.0), 0.0);
        assert!((binary_inverse(0.371) - 0.0715).abs() < 2e-4);
        for p in [0.001, 0.05, 0.11, 0.3, 0.49] {
            assert!((binary_inverse(h(p)) - p).abs() < 1e-10);
        }
    }

    #[test]
    fn holevo_examples() {
        let e = holevo_extrema(&BellDiagonalState::phi0());
        assert_eq!(e.chi, [0.0; 3]);
        assert_eq!(e.chi_max, 0.0);

        let e = holevo_extrema(&st([0.9, 0.1, 0.0, 0.0]));
        let h_lambda = h(0.1);
        assert!((e.chi[0] - h_lambda).abs() < 1e-15);
        assert!(e.chi[1].abs() < 1e-15 && e.chi[2].abs() < 1e-15);
        assert!((e.chi_max - 0.469).abs() < 1e-3);

        let e = holevo_extrema(&BellDiagonalState::maximally_mixed());
        for c in e.chi {
            assert!((c - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn bb84_examples() {
        assert_eq!(holevo_bb84(&BellDiagonalState::phi0()), 0.0);
        assert!((holevo_bb84(&BellDiagonalState::maximally_mixed()) - 1.0).abs() < 1e-15);
        assert!((holevo_bb84(&st([0.9, 0.1, 0.0, 0.0])) - 0.469).abs() < 1e-3);
    }

    #[test]
    fn angle_form_hits_extrema_on_axes() {
        let s = st([0.4, 0.3, 0.2, 0.1]);
        let e = holevo_extrema(&s);
        use std::f64::consts::FRAC_PI_2;
        assert!((holevo_at_angles(&s, 0.0, 0.0) - e.chi[0]).abs() < 1e-14);
        assert!((holevo_at_angles(&s, FRAC_PI_2, 0.0) - e.chi[1]).abs() < 1e-14);
        assert!((holevo_at_angles(&s, FRAC_PI_2, FRAC_PI_2) - e.chi[2]).abs() < 1e-14);
    }
}
