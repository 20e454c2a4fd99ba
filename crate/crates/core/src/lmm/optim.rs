//! Derivative-free minimizers for the profiled deviance: Brent's
//! golden-section/parabolic search in one dimension and a box-projected
//! Nelder-Mead simplex for two or three.

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Relative change in objective below which a search stops.
pub const DEVIANCE_TOLERANCE: f64 = 1e-9;
/// Iteration cap of every search.
pub const MAX_ITERATIONS: usize = 500;

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Brent's method on `[lower, upper]`, starting from the midpoint.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, lower: f64, upper: f64, max_iter: usize) -> Minimum {
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    const X_TOL: f64 = 1.5e-8;
    let (mut a, mut b) = (lower, upper);
    let mut x = 0.5 * (a + b);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut evaluations = 1;
    let (mut d, mut e) = (0.0f64, 0.0f64);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let mid = 0.5 * (a + b);
        let tol1 = X_TOL * x.abs() + 1e-10;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            converged = true;
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if mid >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= mid { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        evaluations += 1;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Minimum {
        x: vec![x],
        value: fx,
        iterations,
        evaluations,
        converged,
    }
}

/// Nelder-Mead with points projected onto the box `[lower, upper]`.
///
/// Stops when the relative spread of objective values over the simplex drops
/// below `ftol`; after the first stop the simplex is rebuilt once around the
/// best vertex with a tenth of the initial step.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    step: f64,
    lower: &[f64],
    upper: &[f64],
    ftol: f64,
    max_iter: usize,
) -> Minimum {
    let n = start.len();
    let project = |x: &mut [f64]| {
        for j in 0..n {
            x[j] = x[j].clamp(lower[j], upper[j]);
        }
    };
    let mut evaluations = 0;
    let mut iterations = 0;
    let mut best: Vec<f64> = start.to_vec();
    project(&mut best);
    let mut converged = false;

    for (round, scale) in [step, 0.1 * step].into_iter().enumerate() {
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(best.clone());
        for j in 0..n {
            let mut vertex = best.clone();
            // step away from a bound we are sitting on
            vertex[j] = if vertex[j] + scale <= upper[j] {
                vertex[j] + scale
            } else {
                vertex[j] - scale
            };
            project(&mut vertex);
            simplex.push(vertex);
        }
        let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
        evaluations += n + 1;
        let start_value = values[0];
        converged = false;

        while iterations < max_iter {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();
            if relative_gap(values[n], values[0]) <= ftol {
                converged = true;
                break;
            }
            iterations += 1;

            let mut centroid = vec![0.0; n];
            for vertex in &simplex[..n] {
                for j in 0..n {
                    centroid[j] += vertex[j] / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                let mut x: Vec<f64> = (0..n)
                    .map(|j| centroid[j] + t * (simplex[n][j] - centroid[j]))
                    .collect();
                project(&mut x);
                x
            };

            let reflected = along(-1.0);
            let f_reflected = f(&reflected);
            evaluations += 1;
            if f_reflected < values[0] {
                let expanded = along(-2.0);
                let f_expanded = f(&expanded);
                evaluations += 1;
                if f_expanded < f_reflected {
                    simplex[n] = expanded;
                    values[n] = f_expanded;
                } else {
                    simplex[n] = reflected;
                    values[n] = f_reflected;
                }
            } else if f_reflected < values[n - 1] {
                simplex[n] = reflected;
                values[n] = f_reflected;
            } else {
                let outside = f_reflected < values[n];
                let contracted = along(if outside { -0.5 } else { 0.5 });
                let f_contracted = f(&contracted);
                evaluations += 1;
                if f_contracted < values[n].min(f_reflected) {
                    simplex[n] = contracted;
                    values[n] = f_contracted;
                } else {
                    for i in 1..=n {
                        for j in 0..n {
                            simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                        }
                        values[i] = f(&simplex[i]);
                        evaluations += 1;
                    }
                }
            }
        }
        let lowest = (0..=n)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .unwrap();
        let improved = relative_gap(values[lowest], start_value) > ftol;
        best = simplex[lowest].clone();
        if round == 1 && !improved {
            break;
        }
    }
    let value = f(&best);
    evaluations += 1;
    Minimum {
        x: best,
        value,
        iterations,
        evaluations,
        converged: converged && iterations < max_iter,
    }
}
