//! Golden-section search for a bracketed maximum.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximize a unimodal function on [a, b]. Returns (x, f(x)).
pub fn maximize<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, x_tol: f64) -> (f64, f64) {
    debug_assert!(b > a);
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > x_tol * (a.abs() + b.abs()).max(1e-300) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn finds_parabola_vertex() {
        // Location accuracy by value comparison saturates near
        // sqrt(machine epsilon); the value itself is much tighter.
        let (x, fx) = maximize(|x| -(x - 1.7).powi(2) + 3.0, 0.0, 5.0, 1e-12);
        assert_relative_eq!(x, 1.7, epsilon = 1e-6);
        assert_relative_eq!(fx, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn finds_sinc_lobe_peak() {
        let f = |x: f64| (x.sin() / x).powi(2);
        let (x, _) = maximize(f, 1e-6, std::f64::consts::PI, 1e-12);
        assert!(x < 1e-4, "peak of sinc^2 is at 0+, got {x}");
    }
}
