//! Scalar root finding and minimization shared by the limit and rate modules.

/// `x ln x` with the continuous extension `0 ln 0 = 0`.
pub fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `(1 - e^{-x}) / x`, continuous at 0 where it equals 1.
pub fn one_minus_exp_over(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x / 2.0 + x * x / 6.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// Bisection for a function that is strictly decreasing on `[lo, hi]` with
/// `f(lo) >= 0 >= f(hi)`. Runs until the bracket collapses in floating
/// point, so the result is as accurate as `f` itself.
pub fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut best = 0.5 * (lo + hi);
    for _ in 0..2200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        best = mid;
        if v == 0.0 {
            break;
        } else if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
/// Returns `(argmin, min)`.
pub fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, x_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > x_tol {
        if fc <= fd {
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
        if c >= d {
            break;
        }
    }
    let (x, fx) = if fc <= fd { (c, fc) } else { (d, fd) };
    // Endpoints can win when the minimum sits on the boundary.
    [(a, f(a)), (b, f(b))]
        .into_iter()
        .fold((x, fx), |best, cand| if cand.1 < best.1 { cand } else { best })
}

/// Grid scan followed by golden-section refinement around the best grid
/// point. The grid mixes a uniform mesh with points clustered
/// geometrically toward `lo`, where the objectives of this crate tend to
/// vary fastest.
pub fn grid_then_golden<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize, x_tol: f64) -> (f64, f64) {
    if hi <= lo {
        return (lo, f(lo));
    }
    let width = hi - lo;
    let mut grid: Vec<f64> = (0..=points)
        .map(|i| lo + width * i as f64 / points as f64)
        .collect();
    let clustered = points / 5;
    for i in 1..=clustered {
        grid.push(lo + width * 10f64.powf(-12.0 * i as f64 / clustered as f64));
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();

    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let best = values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(grid.len() - 1)];
    let (x, fx) = golden_section(&f, a, b, x_tol);
    if values[best] < fx {
        (grid[best], values[best])
    } else {
        (x, fx)
    }
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}
