//! Box-constrained Nelder-Mead minimizer.
//!
//! Trial points are projected onto the box before evaluation, so the
//! objective is only ever called inside the bounds.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Stop once every vertex lies within this distance (max norm) of the best.
    pub xtol: f64,
    pub max_evals: usize,
    /// Edge length of the initial simplex, per coordinate.
    pub initial_step: f64,
    /// Fresh simplices built around the best point after convergence. A
    /// simplex flattened against a bound cannot recover on its own.
    pub restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            xtol: 1e-8,
            max_evals: 20_000,
            initial_step: 0.1,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn project(&self, x: &mut [f64]) {
        for ((xi, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(*lo, *hi);
        }
    }
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` from `start`. Non-finite objective values are treated as
/// `+inf`, which steers the simplex away from them.
pub fn minimize<F>(
    mut f: F,
    start: &[f64],
    bounds: &BoxBounds,
    opts: &SimplexOptions,
) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut result = run(&mut f, start, bounds, opts, 0);
    for _ in 0..opts.restarts {
        if !result.converged {
            break;
        }
        let next = run(&mut f, &result.x, bounds, opts, result.evaluations);
        let improved = next.value < result.value;
        let evaluations = next.evaluations;
        if improved {
            result = next;
        } else {
            result.evaluations = evaluations;
            result.converged = next.converged || result.converged;
            break;
        }
    }
    result
}

fn run<F>(
    f: &mut F,
    start: &[f64],
    bounds: &BoxBounds,
    opts: &SimplexOptions,
    used: usize,
) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let mut evaluations = used;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut first = start.to_vec();
    bounds.project(&mut first);
    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    vertices.push(first.clone());
    for i in 0..n {
        let mut v = first.clone();
        v[i] += opts.initial_step;
        // step inward when the start sits on the upper bound
        if v[i] > bounds.upper[i] {
            v[i] = first[i] - opts.initial_step;
        }
        bounds.project(&mut v);
        vertices.push(v);
    }
    let mut values: Vec<f64> = vertices.iter().map(|v| eval(v, &mut evaluations)).collect();

    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut second = vec![0.0; n];
    loop {
        // order vertices best to worst; ties keep insertion order
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        vertices = order.iter().map(|&i| vertices[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let diameter = vertices[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&vertices[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter <= opts.xtol {
            converged = true;
            break;
        }
        if evaluations >= opts.max_evals {
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for v in &vertices[..n] {
            for (c, vi) in centroid.iter_mut().zip(v) {
                *c += vi / n as f64;
            }
        }
        let worst = vertices[n].clone();
        let along = |coef: f64, out: &mut Vec<f64>| {
            for ((o, c), w) in out.iter_mut().zip(&centroid).zip(&worst) {
                *o = c + coef * (c - w);
            }
            bounds.project(out);
        };

        along(REFLECT, &mut trial);
        let reflected = eval(&trial, &mut evaluations);
        if reflected < values[0] {
            along(EXPAND, &mut second);
            let expanded = eval(&second, &mut evaluations);
            if expanded < reflected {
                vertices[n].copy_from_slice(&second);
                values[n] = expanded;
            } else {
                vertices[n].copy_from_slice(&trial);
                values[n] = reflected;
            }
            continue;
        }
        if reflected < values[n - 1] {
            vertices[n].copy_from_slice(&trial);
            values[n] = reflected;
            continue;
        }
        let (coef, reference) = if reflected < values[n] {
            (CONTRACT, reflected)
        } else {
            (-CONTRACT, values[n])
        };
        along(coef, &mut second);
        let contracted = eval(&second, &mut evaluations);
        if contracted < reference {
            vertices[n].copy_from_slice(&second);
            values[n] = contracted;
            continue;
        }
        let best = vertices[0].clone();
        for i in 1..=n {
            for (v, b) in vertices[i].iter_mut().zip(&best) {
                *v = b + SHRINK * (*v - b);
            }
            values[i] = eval(&vertices[i], &mut evaluations);
        }
    }

    SimplexResult {
        x: vertices.swap_remove(0),
        value: values[0],
        evaluations,
        converged,
    }
}
