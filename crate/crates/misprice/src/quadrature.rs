//! Fixed 15-point Gauss–Kronrod quadrature.
//!
//! The density iteration and the jump convolution both use the plain
//! 15-point Kronrod rule on fixed panels; no adaptive subdivision or
//! error estimation is needed because panel sizes are chosen from the
//! known length scales of the integrands.

/// 15-point Kronrod abscissas on [-1, 1], ascending.
pub const GK15_NODES: [f64; 15] = [
    -0.991455371120812639206854697526329,
    -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926,
    -0.741531185599394439863864773280788,
    -0.586087235467691130294144838258730,
    -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245,
    0.0,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144838258730,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
];

/// Kronrod weights matching [`GK15_NODES`]; they sum to 2.
pub const GK15_WEIGHTS: [f64; 15] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
];

/// Integrate `f` over `[a, b]` with a single GK15 panel.
pub fn gk15<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (node, weight) in GK15_NODES.iter().zip(GK15_WEIGHTS.iter()) {
        acc += weight * f(center + half * node);
    }
    acc * half
}

/// Integrate `f` over `[a, b]` split into `panels` equal GK15 panels.
pub fn gk15_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels >= 1, "need at least one panel");
    let width = (b - a) / panels as f64;
    let mut acc = 0.0;
    for i in 0..panels {
        let lo = a + i as f64 * width;
        acc += gk15(&f, lo, lo + width);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_two() {
        let total: f64 = GK15_WEIGHTS.iter().sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn polynomial_exactness() {
        // GK15 integrates polynomials up to degree 22 exactly.
        let exact = 2.0 / 15.0; // integral of x^14 over [-1, 1]
        assert_relative_eq!(gk15(|x| x.powi(14), -1.0, 1.0), exact, max_relative = 1e-13);
    }

    #[test]
    fn gaussian_mass() {
        let inv = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let int = gk15_panels(|x| inv * (-0.5 * x * x).exp(), -8.0, 8.0, 16);
        assert_relative_eq!(int, 1.0, max_relative = 1e-12);
    }
}
