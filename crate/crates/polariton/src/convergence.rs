//! Convergence protocol over a numerical parameter series (box length,
//! spacing, basis size, ...): consecutive deltas, the first converged value
//! and, for basis-size series, the "optimal region" where all members agree.

use crate::error::{Error, Result};

/// One member of a series: parameter value, energy and a sampled density.
#[derive(Debug, Clone)]
pub struct SeriesPoint {
    pub parameter: f64,
    pub energy: f64,
    /// (coordinate, density) pairs, coordinates ascending.
    pub density: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SeriesDelta {
    pub parameter: f64,
    /// E_i − E_{i−1}
    pub delta_e: f64,
    /// max_x |ρ_i(x) − ρ_{i−1}(x)|
    pub delta_rho: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub deltas: Vec<SeriesDelta>,
    /// Smallest parameter after which every delta stays below both thresholds.
    pub first_converged: Option<f64>,
    /// Inclusive parameter range of the optimal region, if requested and found.
    pub optimal_region: Option<(f64, f64)>,
    /// Parameter with the lowest energy.
    pub lowest: f64,
}

fn interpolate(d: &[(f64, f64)], x: f64) -> f64 {
    if d.is_empty() || x < d[0].0 || x > d[d.len() - 1].0 {
        return 0.0;
    }
    let i = d.partition_point(|p| p.0 < x);
    if i < d.len() && (d[i].0 - x).abs() < 1e-12 {
        return d[i].1;
    }
    if i == 0 {
        return d[0].1;
    }
    let (x0, y0) = d[i - 1];
    let (x1, y1) = d[i.min(d.len() - 1)];
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Largest deviation between two sampled densities, evaluated on the points
/// of both with linear interpolation and zero outside each box.
pub fn density_deviation(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut m: f64 = 0.0;
    for &(x, y) in a {
        m = m.max((y - interpolate(b, x)).abs());
    }
    for &(x, y) in b {
        m = m.max((y - interpolate(a, x)).abs());
    }
    m
}

/// Tabulate consecutive deltas and find the first converged parameter.
pub fn analyze_series(points: &[SeriesPoint], eps_e: f64, eps_rho: f64) -> Result<ConvergenceReport> {
    if points.len() < 3 {
        return Err(Error::invalid(format!("series needs at least 3 points, got {}", points.len())));
    }
    for w in points.windows(2) {
        if !(w[1].parameter > w[0].parameter) && !(w[1].parameter < w[0].parameter) {
            return Err(Error::invalid("series parameters must be strictly monotone"));
        }
    }
    let deltas: Vec<SeriesDelta> = points
        .windows(2)
        .map(|w| SeriesDelta {
            parameter: w[1].parameter,
            delta_e: w[1].energy - w[0].energy,
            delta_rho: density_deviation(&w[1].density, &w[0].density),
        })
        .collect();
    let ok: Vec<bool> = deltas.iter().map(|d| d.delta_e.abs() < eps_e && d.delta_rho < eps_rho).collect();
    // point i is converged when every delta after it is below threshold
    let mut first = None;
    for i in (0..points.len()).rev() {
        if i < ok.len() && !ok[i] {
            break;
        }
        first = Some(points[i].parameter);
    }
    if first == Some(points[points.len() - 1].parameter) {
        // the last point alone proves nothing
        first = None;
    }
    let lowest = points.iter().min_by(|a, b| a.energy.total_cmp(&b.energy)).expect("non-empty").parameter;
    Ok(ConvergenceReport { deltas, first_converged: first, optimal_region: None, lowest })
}

/// Largest contiguous window (at least two points) whose members pairwise
/// agree within `eps_e` in energy and `eps_rho` in density. Among equally
/// long windows the one with the lowest mean energy wins.
pub fn optimal_region(points: &[SeriesPoint], eps_e: f64, eps_rho: f64) -> Option<(f64, f64)> {
    let n = points.len();
    let agree = |i: usize, j: usize| {
        (points[i].energy - points[j].energy).abs() < eps_e
            && density_deviation(&points[i].density, &points[j].density) < eps_rho
    };
    let mut best: Option<(usize, usize, f64)> = None;
    for a in 0..n {
        let mut b = a;
        while b + 1 < n && (a..=b).all(|i| agree(i, b + 1)) {
            b += 1;
        }
        if b > a {
            let mean = points[a..=b].iter().map(|p| p.energy).sum::<f64>() / (b - a + 1) as f64;
            let better = match best {
                None => true,
                Some((ba, bb, bm)) => (b - a) > (bb - ba) || ((b - a) == (bb - ba) && mean < bm),
            };
            if better {
                best = Some((a, b, mean));
            }
        }
    }
    best.map(|(a, b, _)| (points[a].parameter, points[b].parameter))
}
