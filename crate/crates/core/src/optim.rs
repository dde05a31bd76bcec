//! Derivative-free minimizers: golden-section line search and a
//! Nelder-Mead simplex. Both are deterministic given their inputs.

/// Golden-section search for the minimum of a unimodal function on [a, b].
/// Returns (x_min, f(x_min)) once the bracket is narrower than `tol`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iters: usize,
) -> (f64, f64) {
    debug_assert!(a <= b);
    let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iters {
        if (b - a).abs() <= tol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_iters: usize,
    /// Convergence when the objective spread over the simplex is below
    /// `abs_tol + rel_tol * |f_best|`.
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iters: 10_000,
            rel_tol: 1e-10,
            abs_tol: 1e-18,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Classic Nelder-Mead over `x0` with per-coordinate initial steps.
/// The best objective value is non-increasing from iteration to iteration.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult {
    let dim = x0.len();
    assert_eq!(dim, step.len());
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += step[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        iterations += 1;
        // sort ascending by objective
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[dim] - values[0];
        if spread.abs() <= opts.abs_tol + opts.rel_tol * values[0].abs() {
            converged = true;
            break;
        }

        // centroid of all but the worst vertex
        let mut centroid = vec![0.0; dim];
        for v in simplex.iter().take(dim) {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim as f64;
            }
        }

        let worst = simplex[dim].clone();
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&worst)
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let f_reflect = f(&reflect);

        if f_reflect < values[0] {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + gamma * alpha * (c - w))
                .collect();
            let f_expand = f(&expand);
            if f_expand < f_reflect {
                simplex[dim] = expand;
                values[dim] = f_expand;
            } else {
                simplex[dim] = reflect;
                values[dim] = f_reflect;
            }
        } else if f_reflect < values[dim - 1] {
            simplex[dim] = reflect;
            values[dim] = f_reflect;
        } else {
            let contract: Vec<f64> = if f_reflect < values[dim] {
                centroid
                    .iter()
                    .zip(&reflect)
                    .map(|(c, r)| c + rho * (r - c))
                    .collect()
            } else {
                centroid
                    .iter()
                    .zip(&worst)
                    .map(|(c, w)| c + rho * (w - c))
                    .collect()
            };
            let f_contract = f(&contract);
            if f_contract < values[dim].min(f_reflect) {
                simplex[dim] = contract;
                values[dim] = f_contract;
            } else {
                // shrink toward the best vertex
                let best = simplex[0].clone();
                for k in 1..=dim {
                    for (x, b) in simplex[k].iter_mut().zip(&best) {
                        *x = b + sigma * (*x - b);
                    }
                    values[k] = f(&simplex[k]);
                }
            }
        }
    }

    let mut best = 0;
    for k in 1..=dim {
        if values[k] < values[best] {
            best = k;
        }
    }
    SimplexResult {
        x: simplex[best].clone(),
        fx: values[best],
        iterations,
        converged,
    }
}
