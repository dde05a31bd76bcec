//! Gauss-Hermite quadrature for weight exp(-x^2) on (-inf, inf).
//!
//! Nodes are the eigenvalues of the Jacobi matrix of the physicists'
//! Hermite polynomials (implicit-shift QL iteration), polished by Newton
//! steps on the weighted orthonormal recurrence; weights follow from the
//! function value of psi_{m-1} at each root. The weighted recurrence keeps
//! every intermediate bounded, so large rules stay accurate. Sum of
//! weights is sqrt(pi).
//!
//! ```
//! use bbcav::quadrature::GaussHermiteRule;
//!
//! let rule = GaussHermiteRule::new(16)?;
//! let second_moment = rule.integrate(|x| x * x);
//! assert!((second_moment - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-13);
//! # Ok::<(), bbcav::Error>(())
//! ```

use crate::error::{Error, Result};

/// Minimum node count accepted for a Gauss-Hermite rule.
pub const MIN_NODES: usize = 2;
/// Above this the weighted recurrence seed underflows.
pub const MAX_NODES: usize = 600;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermiteRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit-shift QL;
/// `off[i]` couples `diag[i]` and `diag[i + 1]`, `off[n - 1]` is workspace.
fn tridiagonal_eigenvalues(diag: &mut [f64], off: &mut [f64]) -> Result<()> {
    let n = diag.len();
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 50 {
                return Err(Error::invalid(
                    "tridiagonal eigenvalue iteration failed to converge",
                ));
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0_f64, 1.0_f64);
            let mut p = 0.0;
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                let t = (diag[i] - g) * s + 2.0 * c * b;
                p = s * t;
                diag[i + 1] = g + p;
                g = c * t - b;
            }
            if underflow {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

/// Weighted orthonormal Hermite functions psi_j(x) = h_j(x) exp(-x^2/2) at
/// `x`; returns (psi_{m-1}, psi_m). All values stay O(1).
fn hermite_functions(m: usize, x: f64) -> (f64, f64) {
    let mut current = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
    let mut previous = 0.0_f64;
    for j in 1..=m {
        let jf = j as f64;
        let next = x * (2.0 / jf).sqrt() * current - ((jf - 1.0) / jf).sqrt() * previous;
        previous = current;
        current = next;
    }
    (previous, current)
}

impl GaussHermiteRule {
    pub fn new(m: usize) -> Result<Self> {
        if m < MIN_NODES {
            return Err(Error::invalid(format!(
                "Gauss-Hermite rule needs at least {MIN_NODES} nodes, got {m}"
            )));
        }
        if m > MAX_NODES {
            return Err(Error::invalid(format!(
                "Gauss-Hermite rule supports at most {MAX_NODES} nodes, got {m}"
            )));
        }
        // Jacobi matrix: zero diagonal, off-diagonal sqrt(j/2)
        let mut diag = vec![0.0_f64; m];
        let mut off: Vec<f64> = (1..=m).map(|j| (j as f64 / 2.0).sqrt()).collect();
        off[m - 1] = 0.0;
        tridiagonal_eigenvalues(&mut diag, &mut off)?;
        diag.sort_by(f64::total_cmp);
        // the spectrum is symmetric; enforce it exactly
        let mut nodes = vec![0.0_f64; m];
        for i in 0..m / 2 {
            let z = (diag[m - 1 - i] - diag[i]) / 2.0;
            nodes[i] = -z;
            nodes[m - 1 - i] = z;
        }

        let mf = m as f64;
        let mut weights = vec![0.0_f64; m];
        for i in m.div_ceil(2)..m {
            let mut z = nodes[i];
            for _ in 0..3 {
                let (below, at) = hermite_functions(m, z);
                let derivative = (2.0 * mf).sqrt() * below;
                if derivative == 0.0 {
                    return Err(Error::invalid(
                        "Gauss-Hermite Newton polish hit a zero derivative",
                    ));
                }
                let dz = at / derivative;
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            let (below, _) = hermite_functions(m, z);
            if below == 0.0 {
                return Err(Error::invalid(
                    "Gauss-Hermite recurrence underflowed; use fewer nodes",
                ));
            }
            let w = (-z * z).exp() / (mf * below * below);
            nodes[i] = z;
            nodes[m - 1 - i] = -z;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        if m % 2 == 1 {
            let mid = m / 2;
            nodes[mid] = 0.0;
            let (below, _) = hermite_functions(m, 0.0);
            weights[mid] = 1.0 / (mf * below * below);
        }
        Ok(GaussHermiteRule { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Integral of exp(-x^2) f(x) over the real line.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let mut sum = KahanSum::default();
        for (x, w) in self.iter() {
            sum.add(w * f(x));
        }
        sum.value()
    }
}

/// Compensated accumulator; summation order is fixed by the caller.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const SQRT_PI: f64 = 1.7724538509055159;

    #[test]
    fn rejects_out_of_range_rules() {
        assert!(GaussHermiteRule::new(0).is_err());
        assert!(GaussHermiteRule::new(1).is_err());
        assert!(GaussHermiteRule::new(601).is_err());
    }

    #[test]
    fn degree_three_nodes_and_weights() {
        let rule = GaussHermiteRule::new(3).unwrap();
        let expect_x = [-1.224744871391589, 0.0, 1.224744871391589];
        let expect_w = [0.29540897515091935, 1.1816359006036774, 0.29540897515091935];
        for i in 0..3 {
            assert_abs_diff_eq!(rule.nodes()[i], expect_x[i], epsilon = 1e-14);
            assert_abs_diff_eq!(rule.weights()[i], expect_w[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn moments_are_exact() {
        for m in [2, 3, 5, 16, 64, 128, 256, 512] {
            let rule = GaussHermiteRule::new(m).unwrap();
            let relative = |got: f64, expect: f64| (got - expect).abs() / expect;
            assert!(
                relative(rule.integrate(|_| 1.0), SQRT_PI) < 1e-13,
                "zeroth moment off at m = {m}"
            );
            assert_abs_diff_eq!(rule.integrate(|x| x), 0.0, epsilon = 1e-13);
            assert!(relative(rule.integrate(|x| x * x), SQRT_PI / 2.0) < 1e-13);
            if m >= 3 {
                assert!(relative(rule.integrate(|x| x.powi(4)), 0.75 * SQRT_PI) < 1e-12);
            }
        }
    }

    #[test]
    fn nodes_are_sorted_and_distinct() {
        for m in [64, 256, 512] {
            let rule = GaussHermiteRule::new(m).unwrap();
            for pair in rule.nodes().windows(2) {
                assert!(pair[1] > pair[0] + 1e-3, "m = {m}: nodes too close");
            }
        }
    }

    #[test]
    fn gaussian_characteristic_function() {
        // int exp(-x^2) cos(w x) dx = sqrt(pi) exp(-w^2/4)
        for m in [64, 128, 256] {
            let rule = GaussHermiteRule::new(m).unwrap();
            for w in [0.5, 2.0, 5.0, 8.0] {
                let got = rule.integrate(|x| (w * x).cos());
                let expect = SQRT_PI * (-w * w / 4.0).exp();
                assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
            }
        }
        // wider oscillation budget of the bigger rules
        let rule = GaussHermiteRule::new(256).unwrap();
        for w in [12.0, 20.0] {
            let got = rule.integrate(|x| (w * x).cos());
            let expect = SQRT_PI * (-w * w / 4.0).exp();
            assert_abs_diff_eq!(got, expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn kahan_sum_is_stable() {
        let mut acc = KahanSum::default();
        for _ in 0..1_000_000 {
            acc.add(0.1);
        }
        assert_abs_diff_eq!(acc.value(), 100_000.0, epsilon = 1e-9);
    }
}
