//! Müller-functional RDMFT: occupation-number optimization at fixed orbitals,
//! two orbital optimizers (the F-matrix diagonalization in a fixed basis and
//! a band-by-band conjugate-gradient scheme on the full grid), and the
//! alternating driver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hamiltonian::{mueller_weights, Integrals, OrbitalHamiltonian};
use crate::linalg::{orthonormalize, sorted_eigen};

/// One- and two-index integrals that the occupation Lagrangian needs.
#[derive(Debug, Clone)]
pub struct IntegralTables {
    pub one: Vec<f64>,
    pub hartree: DMatrix<f64>,
    pub exchange: DMatrix<f64>,
    /// Constant energy offset.
    pub constant: f64,
}

impl IntegralTables {
    pub fn from_integrals(ints: &Integrals, constant: f64) -> Self {
        Self {
            one: (0..ints.k).map(|i| ints.h[(i, i)]).collect(),
            hartree: ints.hartree.clone(),
            exchange: ints.exchange.clone(),
            constant,
        }
    }

    pub fn len(&self) -> usize {
        self.one.len()
    }

    pub fn is_empty(&self) -> bool {
        self.one.is_empty()
    }
}

/// Σ n_i h_ii + ½ Σ n_i n_j J_ij − ½ Σ √(n_i n_j) K_ij + const.
pub fn mueller_energy(n: &[f64], t: &IntegralTables) -> f64 {
    let s: Vec<f64> = n.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let m = t.len();
    let mut e = t.constant;
    for i in 0..m {
        e += n[i] * t.one[i];
        for j in 0..m {
            e += 0.5 * n[i] * n[j] * t.hartree[(i, j)] - 0.5 * s[i] * s[j] * t.exchange[(i, j)];
        }
    }
    e
}

/// ∂E/∂n_i = h_ii + Σ_j n_j J_ij − ½ Σ_j √(n_j/n_i) K_ij.
///
/// Components with n_i below `floor` are evaluated at the floor.
pub fn occupation_gradient(n: &[f64], t: &IntegralTables, floor: f64) -> Vec<f64> {
    let m = t.len();
    let s: Vec<f64> = n.iter().map(|&v| v.max(0.0).sqrt()).collect();
    (0..m)
        .map(|i| {
            let si = n[i].max(floor).sqrt();
            let mut g = t.one[i];
            for j in 0..m {
                g += n[j] * t.hartree[(i, j)] - 0.5 * s[j] / si * t.exchange[(i, j)];
            }
            g
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct OccupationConfig {
    /// Bisection stops once the μ bracket is narrower than this.
    pub eps_mu: f64,
    /// ... or once |Σn − N| is below this.
    pub sum_tolerance: f64,
    /// Projected-gradient tolerance of the inner minimizer (θ units).
    pub inner_tolerance: f64,
    pub inner_max_iterations: usize,
    pub max_expansions: usize,
    pub floor: f64,
}

impl Default for OccupationConfig {
    fn default() -> Self {
        Self {
            eps_mu: 1e-11,
            sum_tolerance: 1e-11,
            inner_tolerance: 1e-12,
            inner_max_iterations: 200_000,
            max_expansions: 60,
            floor: 1e-8,
        }
    }
}

fn theta_of(n: f64) -> f64 {
    (n / 2.0).clamp(0.0, 1.0).sqrt().asin() / (2.0 * std::f64::consts::PI)
}

fn n_of(theta: f64) -> f64 {
    let s = (2.0 * std::f64::consts::PI * theta).sin();
    2.0 * s * s
}

/// L(θ; μ) = E(n(θ)) − μ(Σn − N) and its θ-gradient, written in s = √n so no
/// inverse square roots appear.
fn lagrangian(theta: &[f64], t: &IntegralTables, mu: f64, n_el: f64, grad: &mut [f64]) -> f64 {
    let m = t.len();
    let tp = 2.0 * std::f64::consts::PI;
    let s: Vec<f64> = theta.iter().map(|&th| std::f64::consts::SQRT_2 * (tp * th).sin()).collect();
    let n: Vec<f64> = s.iter().map(|v| v * v).collect();
    let mut l = t.constant - mu * (n.iter().sum::<f64>() - n_el);
    for i in 0..m {
        let mut vh = 0.0;
        let mut vx = 0.0;
        for j in 0..m {
            vh += t.hartree[(i, j)] * n[j];
            vx += t.exchange[(i, j)] * s[j];
        }
        l += n[i] * t.one[i] + 0.5 * n[i] * vh - 0.5 * s[i] * vx;
        let dl_ds = 2.0 * s[i] * (t.one[i] + vh - mu) - vx;
        grad[i] = dl_ds * std::f64::consts::SQRT_2 * tp * (tp * theta[i]).cos();
    }
    l
}

fn metric(theta: f64) -> f64 {
    let c = (2.0 * std::f64::consts::PI * theta).cos();
    1.0 / (c * c).max(1e-6)
}

/// How often one inner minimization may move occupations off a false pin.
const MAX_PIN_RELEASES: usize = 50;

/// dn/dθ vanishes at n = 2, so θ = 1/4 is stationary in θ whatever the sign
/// of ∂L/∂n. A pin is genuine only when ∂L/∂n ≤ 0 there; otherwise move the
/// component back inside. Returns whether anything moved.
fn release_false_pins(theta: &mut [f64], t: &IntegralTables, mu: f64) -> bool {
    let n: Vec<f64> = theta.iter().map(|&v| n_of(v)).collect();
    let mut moved = false;
    for i in 0..theta.len() {
        if 0.25 - theta[i] > 1e-6 {
            continue;
        }
        let si = n[i].sqrt();
        let mut dl_dn = t.one[i] - mu;
        for j in 0..n.len() {
            dl_dn += t.hartree[(i, j)] * n[j] - 0.5 * t.exchange[(i, j)] * n[j].sqrt() / si;
        }
        if dl_dn > 1e-10 {
            theta[i] = 0.24;
            moved = true;
        }
    }
    moved
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub theta: Vec<f64>,
    pub n: Vec<f64>,
    pub lagrangian: f64,
    pub iterations: usize,
}

/// Minimize L(θ; μ) over the box θ ∈ [θ(n_floor), 1/4] with projected
/// gradient steps: Barzilai–Borwein trial lengths and monotone Armijo
/// backtracking.
///
/// Steps use the diagonal metric 1/cos²(2πθ_i), which turns them into
/// gradient steps in √n_i close to n_i = 2 where the plain θ-gradient fades.
pub fn minimize_at_mu(
    t: &IntegralTables,
    mu: f64,
    n_electrons: usize,
    theta0: &[f64],
    cfg: &OccupationConfig,
) -> Result<InnerResult> {
    let m = t.len();
    let lo = theta_of(cfg.floor);
    let hi = 0.25;
    let proj = |v: f64| v.clamp(lo, hi);
    let n_el = n_electrons as f64;
    let mut th: Vec<f64> = theta0.iter().map(|&v| proj(v)).collect();
    let mut g = vec![0.0; m];
    let mut l = lagrangian(&th, t, mu, n_el, &mut g);
    let mut alpha = 1e-3;
    let mut trial = vec![0.0; m];
    let mut gt = vec![0.0; m];
    let mut stalled = 0;
    let mut kicks = 0;
    let mut d = vec![1.0; m];
    for it in 0..cfg.inner_max_iterations {
        for i in 0..m {
            d[i] = metric(th[i]);
        }
        let pg = (0..m).map(|i| (proj(th[i] - g[i]) - th[i]).abs()).fold(0.0, f64::max);
        if pg < cfg.inner_tolerance {
            if kicks < MAX_PIN_RELEASES && release_false_pins(&mut th, t, mu) {
                kicks += 1;
                l = lagrangian(&th, t, mu, n_el, &mut g);
                alpha = 1e-3;
                stalled = 0;
                continue;
            }
            return Ok(InnerResult { n: th.iter().map(|&v| n_of(v)).collect(), theta: th, lagrangian: l, iterations: it });
        }
        let mut a = alpha;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..m {
                trial[i] = proj(th[i] - a * d[i] * g[i]);
            }
            let lt = lagrangian(&trial, t, mu, n_el, &mut gt);
            let dec: f64 = (0..m).map(|i| g[i] * (trial[i] - th[i])).sum();
            if lt <= l + 1e-4 * dec || (lt - l).abs() <= 1e-15 * l.abs().max(1.0) && dec.abs() < 1e-24 {
                let mut ss = 0.0;
                let mut sy = 0.0;
                for i in 0..m {
                    let s = trial[i] - th[i];
                    ss += s * s / d[i];
                    sy += s * (gt[i] - g[i]);
                }
                alpha = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e3) } else { (a * 2.0).min(1e3) };
                std::mem::swap(&mut th, &mut trial);
                std::mem::swap(&mut g, &mut gt);
                stalled = if (l - lt).abs() <= 1e-16 * l.abs().max(1.0) { stalled + 1 } else { 0 };
                l = lt;
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        if !accepted || stalled > 500 {
            if kicks < MAX_PIN_RELEASES && release_false_pins(&mut th, t, mu) {
                kicks += 1;
                l = lagrangian(&th, t, mu, n_el, &mut g);
                alpha = 1e-3;
                stalled = 0;
                continue;
            }
            // No decrease representable in floating point: we are at the minimum.
            return Ok(InnerResult { n: th.iter().map(|&v| n_of(v)).collect(), theta: th, lagrangian: l, iterations: it });
        }
    }
    let pg = (0..m).map(|i| (proj(th[i] - g[i]) - th[i]).abs()).fold(0.0, f64::max);
    Err(Error::NotConverged { what: "occupation inner minimizer", iterations: cfg.inner_max_iterations, residual: pg })
}

#[derive(Debug, Clone)]
pub struct OccupationResult {
    pub n: Vec<f64>,
    pub mu: f64,
    pub energy: f64,
    /// (μ, S(μ)) at every evaluated node, in evaluation order.
    pub trace: Vec<(f64, f64)>,
}

/// S(μ) = Σ n_i(μ) − N with n(μ) the minimizer of L(·; μ).
pub fn s_of_mu(t: &IntegralTables, mu: f64, n_electrons: usize, theta0: &[f64], cfg: &OccupationConfig) -> Result<(f64, InnerResult)> {
    let r = minimize_at_mu(t, mu, n_electrons, theta0, cfg).map_err(|e| match e {
        Error::NotConverged { iterations, residual, .. } => {
            Error::Invariant(format!("inner minimizer failed at mu = {mu:.10} after {iterations} steps (residual {residual:.3e})"))
        }
        other => other,
    })?;
    let s = r.n.iter().sum::<f64>() - n_electrons as f64;
    Ok((s, r))
}

/// Occupations n_i^{-1}: 2 − n_thresh for the N/2 lowest orbitals, n_thresh otherwise.
pub fn initial_occupations(m: usize, n_electrons: usize, n_thresh: f64) -> Vec<f64> {
    (0..m).map(|i| if i < n_electrons / 2 { 2.0 - n_thresh } else { n_thresh }).collect()
}

/// Largest |Σn − N| accepted once the μ bracket has collapsed.
const DISCONTINUITY_TOLERANCE: f64 = 1e-6;

/// Bisection on μ for Σn = N.
pub fn occupation_optimize(t: &IntegralTables, n_electrons: usize, init: &[f64], cfg: &OccupationConfig) -> Result<OccupationResult> {
    let m = t.len();
    if m == 0 || init.len() != m {
        return Err(Error::invalid("occupation vector does not match the tables"));
    }
    if n_electrons as f64 > 2.0 * m as f64 {
        return Err(Error::invalid("more electrons than the orbitals can hold"));
    }
    let theta0: Vec<f64> = init.iter().map(|&v| theta_of(v)).collect();
    // a first μ guess: average gradient over the strongly occupied orbitals
    let g = occupation_gradient(init, t, cfg.floor);
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| init[b].total_cmp(&init[a]));
    let mu0 = g[idx[0]];
    let mut trace = Vec::new();
    let (s0, r0) = s_of_mu(t, mu0, n_electrons, &theta0, cfg)?;
    trace.push((mu0, s0));
    if s0.abs() < cfg.sum_tolerance {
        let energy = mueller_energy(&r0.n, t);
        return Ok(OccupationResult { n: r0.n, mu: mu0, energy, trace });
    }
    // expand until the sign flips
    let mut step = 0.05;
    let (mut lo, mut hi, mut rlo, mut rhi);
    let mut prev_mu = mu0;
    let mut prev_r = r0;
    let mut found = None;
    for _ in 0..cfg.max_expansions {
        let mu = if s0 < 0.0 { prev_mu + step } else { prev_mu - step };
        let (s, r) = s_of_mu(t, mu, n_electrons, &prev_r.theta, cfg)?;
        trace.push((mu, s));
        if (s < 0.0) != (s0 < 0.0) || s == 0.0 {
            found = Some((mu, s, r));
            break;
        }
        prev_mu = mu;
        prev_r = r;
        step *= 2.0;
    }
    let Some((mu_f, s_f, r_f)) = found else {
        return Err(Error::NoBracket(cfg.max_expansions));
    };
    if s_f.abs() < cfg.sum_tolerance {
        let energy = mueller_energy(&r_f.n, t);
        return Ok(OccupationResult { n: r_f.n, mu: mu_f, energy, trace });
    }
    if s0 < 0.0 {
        lo = prev_mu;
        rlo = prev_r;
        hi = mu_f;
        rhi = r_f;
    } else {
        lo = mu_f;
        rlo = r_f;
        hi = prev_mu;
        rhi = prev_r;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        let (s, r) = s_of_mu(t, mid, n_electrons, &rlo.theta, cfg)?;
        trace.push((mid, s));
        if s.abs() < cfg.sum_tolerance || hi - lo < cfg.eps_mu {
            if s.abs() > DISCONTINUITY_TOLERANCE && hi - lo < 1e-3 * DISCONTINUITY_TOLERANCE {
                return Err(Error::Invariant(format!(
                    "S(mu) jumps by {s:.3e} across a bracket of width {:.1e}; the Lagrangian is not convex in n",
                    hi - lo
                )));
            }
            let mut n = r.n;
            if s.abs() >= cfg.sum_tolerance {
                // the collapsed bracket still straddles the root; mix the two sides
                // so the sum rule holds exactly (a convex combination stays in [0, 2])
                let other = if s < 0.0 { &rhi.n } else { &rlo.n };
                let so = other.iter().sum::<f64>() - n_electrons as f64;
                if so * s < 0.0 {
                    let w = s / (s - so);
                    for (a, b) in n.iter_mut().zip(other) {
                        *a = (1.0 - w) * *a + w * b;
                    }
                }
            }
            let energy = mueller_energy(&n, t);
            return Ok(OccupationResult { n, mu: mid, energy, trace });
        }
        if s < 0.0 {
            lo = mid;
            rlo = r;
        } else {
            hi = mid;
            rhi = r;
        }
    }
}

/// Bookkeeping of the F-matrix iteration.
#[derive(Debug, Clone)]
pub struct PirisState {
    /// Diagonal entries F_i, one per orbital.
    pub diagonal: Vec<f64>,
    /// Current cap on the magnitude of the off-diagonal entries.
    pub cap: f64,
}

impl PirisState {
    /// Diagonal from the eigenvalues of the symmetrized multiplier matrix, ascending.
    pub fn from_lagrange(lambda: &DMatrix<f64>) -> Self {
        let (vals, _) = sorted_eigen(&((lambda + lambda.transpose()) * 0.5));
        Self { diagonal: vals.iter().copied().collect(), cap: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct PirisStep {
    pub f_max: f64,
    pub energy_before: f64,
    pub energy: f64,
    pub accepted: bool,
}

/// max_{k>i} |λ_ki − λ_ik|.
pub fn f_max(lambda: &DMatrix<f64>) -> f64 {
    let k = lambda.nrows();
    let mut m: f64 = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            m = m.max((lambda[(j, i)] - lambda[(i, j)]).abs());
        }
    }
    m
}

/// One diagonalization of the F matrix. Off-diagonals are λ_ki − λ_ik oriented
/// so that first-order perturbation theory lowers the energy for any order of
/// the diagonal; their magnitude is capped and the cap halved whenever the
/// energy would rise. Eigenvectors are matched to orbitals by largest overlap.
pub fn piris_orbital_step(
    ham: &OrbitalHamiltonian,
    u: &mut DMatrix<f64>,
    n: &[f64],
    state: &mut PirisState,
) -> Result<PirisStep> {
    let k = u.ncols();
    let ints = ham.integrals(u);
    let h1 = ham.h1(u, &ints, n);
    let lambda = OrbitalHamiltonian::lagrange(u, &h1);
    let e0 = ham.energy(&ints, n);
    let fm = f_max(&lambda);
    if fm == 0.0 {
        return Ok(PirisStep { f_max: 0.0, energy_before: e0, energy: e0, accepted: false });
    }
    for _ in 0..40 {
        let mut f = DMatrix::from_diagonal(&DVector::from_column_slice(&state.diagonal));
        for i in 0..k {
            for j in i + 1..k {
                let d = lambda[(j, i)] - lambda[(i, j)];
                let orient = if state.diagonal[j] >= state.diagonal[i] { 1.0 } else { -1.0 };
                let v = (orient * d).clamp(-state.cap, state.cap);
                f[(i, j)] = v;
                f[(j, i)] = v;
            }
        }
        let (vals, vecs) = sorted_eigen(&f);
        let (rot, diag) = match_columns(&vecs, vals.as_slice());
        let trial = &*u * &rot;
        let ints_t = ham.integrals(&trial);
        let e1 = ham.energy(&ints_t, n);
        if e1 <= e0 + 1e-14 * e0.abs().max(1.0) {
            *u = trial;
            state.diagonal = diag;
            state.cap = (state.cap * 1.5).min(10.0);
            return Ok(PirisStep { f_max: fm, energy_before: e0, energy: e1, accepted: true });
        }
        state.cap *= 0.5;
        if state.cap < 1e-14 {
            break;
        }
    }
    state.cap = state.cap.max(1e-6);
    Ok(PirisStep { f_max: fm, energy_before: e0, energy: e0, accepted: false })
}

/// Reorder eigenvector columns so column i overlaps most with e_i, with a
/// positive diagonal entry.
fn match_columns(vecs: &DMatrix<f64>, vals: &[f64]) -> (DMatrix<f64>, Vec<f64>) {
    let k = vecs.ncols();
    let mut taken = vec![false; k];
    let mut assign = vec![usize::MAX; k];
    // greedy on the globally largest overlaps
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(k * k);
    for r in 0..k {
        for c in 0..k {
            entries.push((vecs[(r, c)].abs(), r, c));
        }
    }
    entries.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut row_done = vec![false; k];
    for (_, r, c) in entries {
        if !row_done[r] && !taken[c] {
            assign[r] = c;
            row_done[r] = true;
            taken[c] = true;
        }
    }
    let mut rot = DMatrix::zeros(k, k);
    let mut diag = vec![0.0; k];
    for i in 0..k {
        let c = assign[i];
        let sign = if vecs[(i, c)] < 0.0 { -1.0 } else { 1.0 };
        rot.set_column(i, &(vecs.column(c) * sign));
        diag[i] = vals[c];
    }
    (rot, diag)
}

#[derive(Debug, Clone, Copy)]
pub struct OrbitalConfig {
    pub eps_f: f64,
    pub max_piris: usize,
    pub max_polish: usize,
    pub lbfgs_memory: usize,
}

impl Default for OrbitalConfig {
    fn default() -> Self {
        Self { eps_f: 1e-8, max_piris: 30, max_polish: 400, lbfgs_memory: 20 }
    }
}

#[derive(Debug, Clone)]
pub struct OrbitalReport {
    pub energy: f64,
    pub f_max: f64,
    pub piris_steps: usize,
    pub polish_steps: usize,
}

/// Cayley transform (I − A/2)⁻¹(I + A/2) of an antisymmetric matrix.
fn cayley(a: &DMatrix<f64>) -> DMatrix<f64> {
    let k = a.nrows();
    let i = DMatrix::<f64>::identity(k, k);
    let lhs = &i - a * 0.5;
    let rhs = &i + a * 0.5;
    lhs.lu().solve(&rhs).expect("I − A/2 is invertible for antisymmetric A")
}

fn rotation_gradient(lambda: &DMatrix<f64>) -> DMatrix<f64> {
    // dE/dA_ki for U → U(I + A) is 2λ_ki; project on antisymmetric matrices
    lambda - lambda.transpose()
}

/// Orbital optimization within the span of `u`: F-matrix steps first, then a
/// limited-memory BFGS polish on the rotation generator when the F-matrix
/// iteration has not reached `eps_f`.
pub fn optimize_orbitals_in_span(
    ham: &OrbitalHamiltonian,
    u: &mut DMatrix<f64>,
    n: &[f64],
    state: &mut PirisState,
    cfg: &OrbitalConfig,
) -> Result<OrbitalReport> {
    let mut piris_steps = 0;
    let mut fm = f64::INFINITY;
    let mut energy = f64::NAN;
    for _ in 0..cfg.max_piris {
        let st = piris_orbital_step(ham, u, n, state)?;
        piris_steps += 1;
        fm = st.f_max;
        energy = st.energy;
        if fm < cfg.eps_f {
            return Ok(OrbitalReport { energy, f_max: fm, piris_steps, polish_steps: 0 });
        }
        if !st.accepted {
            break;
        }
    }
    let (e, f, steps) = lbfgs_rotations(ham, u, n, cfg)?;
    if steps > 0 || energy.is_nan() {
        energy = e;
        fm = f;
    }
    Ok(OrbitalReport { energy, f_max: fm, piris_steps, polish_steps: steps })
}

/// Riemannian L-BFGS over orbital rotations with a Cayley retraction.
fn lbfgs_rotations(
    ham: &OrbitalHamiltonian,
    u: &mut DMatrix<f64>,
    n: &[f64],
    cfg: &OrbitalConfig,
) -> Result<(f64, f64, usize)> {
    let eval = |u: &DMatrix<f64>| {
        let ints = ham.integrals(u);
        let h1 = ham.h1(u, &ints, n);
        let lam = OrbitalHamiltonian::lagrange(u, &h1);
        (ham.energy(&ints, n), rotation_gradient(&lam) * 2.0, f_max(&lam))
    };
    let (mut e, mut g, mut fm) = eval(u);
    let mut s_hist: Vec<DMatrix<f64>> = Vec::new();
    let mut y_hist: Vec<DMatrix<f64>> = Vec::new();
    let dot = |a: &DMatrix<f64>, b: &DMatrix<f64>| a.component_mul(b).sum() * 0.5;
    let mut steps = 0;
    while steps < cfg.max_polish && fm >= cfg.eps_f {
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let rho = 1.0 / dot(y, s);
            let a = rho * dot(s, &q);
            q -= y * a;
            alphas.push((a, rho));
        }
        let gamma = match (s_hist.last(), y_hist.last()) {
            (Some(s), Some(y)) => dot(s, y) / dot(y, y),
            _ => 0.1 / g.abs().max().max(1e-12),
        };
        let mut r = q * gamma;
        for ((s, y), (a, rho)) in s_hist.iter().zip(&y_hist).zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &r);
            r += s * (a - b);
        }
        let mut p = -r;
        if dot(&p, &g) >= 0.0 {
            p = -g.clone();
            s_hist.clear();
            y_hist.clear();
        }
        let slope = dot(&p, &g);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = &*u * cayley(&(&p * t));
            let (et, gt, ft) = eval(&trial);
            if et <= e + 1e-4 * t * slope {
                accepted = Some((trial, et, gt, ft, t));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, et, gt, ft, t)) = accepted else { break };
        let s = &p * t;
        let y = &gt - &g;
        if dot(&s, &y) > 1e-18 {
            s_hist.push(s);
            y_hist.push(y);
            if s_hist.len() > cfg.lbfgs_memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        *u = trial;
        e = et;
        g = gt;
        fm = ft;
        steps += 1;
    }
    orthonormalize(u)?;
    let (e, _, fm) = eval(u);
    Ok((e, fm, steps))
}

#[derive(Debug, Clone, Copy)]
pub struct CgConfig {
    /// Residue threshold ε_φ on ‖ζ_k‖².
    pub eps_phi: f64,
    pub max_sweeps: usize,
    /// Line minimizations per orbital and sweep.
    pub steps_per_band: usize,
    /// Relative energy change between sweeps that also counts as converged.
    pub eps_energy: f64,
    /// Angle used when the Fourier model is degenerate.
    pub fallback_angle: f64,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self { eps_phi: 1e-14, max_sweeps: 2000, steps_per_band: 4, eps_energy: 1e-13, fallback_angle: 0.01 }
    }
}

#[derive(Debug, Clone)]
pub struct CgReport {
    pub energy: f64,
    pub max_residue: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// First and second Θ-derivatives of the line Lagrangian along φ_k → φ_k cosΘ + ξ sinΘ.
#[derive(Debug, Clone, Copy)]
pub struct LineDerivatives {
    pub first: f64,
    pub second: f64,
}

/// dL/dΘ and d²E/dΘ² at Θ = 0. L keeps the multipliers ε_ik = λ_ki fixed.
pub fn line_derivatives(
    ham: &OrbitalHamiltonian,
    u: &DMatrix<f64>,
    ints: &Integrals,
    h1: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    n: &[f64],
    k: usize,
    xi: &DVector<f64>,
) -> LineDerivatives {
    let phi = u.column(k).clone_owned();
    let mut first = 2.0 * xi.dot(&h1.column(k));
    for i in 0..u.ncols() {
        if i != k {
            first -= (lambda[(i, k)] + lambda[(k, i)]) * xi.dot(&u.column(i));
        }
    }
    let hxi = ham.h1_apply(u, ints, n, k, xi);
    let nk = n[k];
    let fgfg = ham.pair_integral(&phi, xi, &phi, xi);
    let ffgg = ham.pair_integral(&phi, &phi, xi, xi);
    let second = 2.0 * xi.dot(&hxi) - 2.0 * phi.dot(&h1.column(k)) + 4.0 * nk * nk * fgfg
        - 2.0 * nk * (fgfg + ffgg);
    LineDerivatives { first, second }
}

/// L(Θ) with fixed multipliers, for checking `line_derivatives`.
pub fn line_lagrangian(
    ham: &OrbitalHamiltonian,
    u: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    n: &[f64],
    k: usize,
    xi: &DVector<f64>,
    theta: f64,
) -> f64 {
    let mut v = u.clone();
    let col = u.column(k) * theta.cos() + xi * theta.sin();
    v.set_column(k, &col);
    let ints = ham.integrals(&v);
    let mut l = ham.energy(&ints, n);
    let g = v.transpose() * &v;
    let kk = u.ncols();
    for j in 0..kk {
        for i in 0..kk {
            if i == k || j == k {
                let target = if i == j { 1.0 } else { 0.0 };
                // ε_ij multiplies the (i, j) overlap constraint; ε_ij = λ_ji
                l -= lambda[(j, i)] * (g[(i, j)] - target);
            }
        }
    }
    l
}

/// Band-by-band conjugate-gradient relaxation of real orbitals at fixed
/// occupations, with the steepest-descent vector
/// ζ_k = −(H¹φ_k − Σ_i ε_ik φ_i), ε_ik = ⟨H¹φ_i|φ_k⟩ taken from the other
/// gradient equation.
pub fn cg_orbital_optimize(ham: &OrbitalHamiltonian, u: &mut DMatrix<f64>, n: &[f64], cfg: &CgConfig) -> Result<CgReport> {
    let kk = u.ncols();
    orthonormalize(u)?;
    let mut e_prev = f64::INFINITY;
    let mut max_res = f64::INFINITY;
    let mut small_streak = vec![0usize; kk];
    for sweep in 0..cfg.max_sweeps {
        max_res = 0.0;
        for k in 0..kk {
            // orthogonalize to previously optimized states
            for i in 0..k {
                let p = u.column(i).dot(&u.column(k));
                let ci = u.column(i).clone_owned();
                u.column_mut(k).axpy(-p, &ci, 1.0);
            }
            let nrm = u.column(k).norm();
            u.column_mut(k).scale_mut(1.0 / nrm);

            let mut xi_prev: Option<DVector<f64>> = None;
            let mut eta_zeta_prev = 0.0;
            for _ in 0..cfg.steps_per_band {
                let ints = ham.integrals(u);
                let h1 = ham.h1(u, &ints, n);
                let lambda = OrbitalHamiltonian::lagrange(u, &h1);
                let mut zeta = -h1.column(k).clone_owned();
                for i in 0..kk {
                    zeta.axpy(lambda[(k, i)], &u.column(i), 1.0);
                }
                let res = zeta.norm_squared();
                max_res = max_res.max(res);
                if res < cfg.eps_phi {
                    small_streak[k] += 1;
                    if small_streak[k] >= 2 {
                        break;
                    }
                } else {
                    small_streak[k] = 0;
                }
                let mut eta = zeta.clone();
                let pk = u.column(k).dot(&eta);
                eta.axpy(-pk, &u.column(k), 1.0);
                for i in 0..k {
                    let p = u.column(i).dot(&eta);
                    eta.axpy(-p, &u.column(i), 1.0);
                }
                let ez = eta.dot(&zeta);
                let mut xi = match &xi_prev {
                    Some(prev) if eta_zeta_prev > 0.0 => &eta + prev * (ez / eta_zeta_prev),
                    _ => eta.clone(),
                };
                eta_zeta_prev = ez;
                let pk = u.column(k).dot(&xi);
                xi.axpy(-pk, &u.column(k), 1.0);
                for i in 0..k {
                    let p = u.column(i).dot(&xi);
                    xi.axpy(-p, &u.column(i), 1.0);
                }
                let xn = xi.norm();
                if xn < 1e-300 {
                    break;
                }
                xi_prev = Some(xi.clone());
                let mut dir = xi / xn;
                let mut d = line_derivatives(ham, u, &ints, &h1, &lambda, n, k, &dir);
                if d.first > 0.0 {
                    dir = -dir;
                    d.first = -d.first;
                }
                let a1 = -d.second / 4.0;
                let b1 = d.first / 2.0;
                let theta = if a1.abs() < 1e-300 && b1.abs() < 1e-300 {
                    cfg.fallback_angle
                } else {
                    0.5 * (-b1).atan2(-a1)
                };
                let col = u.column(k) * theta.cos() + &dir * theta.sin();
                u.set_column(k, &col);
            }
        }
        orthonormalize(u)?;
        let ints = ham.integrals(u);
        let e = ham.energy(&ints, n);
        let de = (e - e_prev).abs();
        e_prev = e;
        if max_res < cfg.eps_phi || (sweep > 0 && de < cfg.eps_energy * e.abs().max(1.0) && max_res < cfg.eps_phi * 1e4) {
            return Ok(CgReport { energy: e, max_residue: max_res, sweeps: sweep + 1, converged: true });
        }
    }
    Ok(CgReport { energy: e_prev, max_residue: max_res, sweeps: cfg.max_sweeps, converged: false })
}

/// Choice of orbital optimizer for the driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitalOptimizer {
    /// F-matrix diagonalization inside the span of the initial orbitals.
    Piris,
    /// Conjugate gradients on the full basis.
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy)]
pub struct RdmftConfig {
    pub eps_e: f64,
    pub eps_f: f64,
    pub max_outer: usize,
    pub n_thresh: f64,
    pub occupations: OccupationConfig,
    pub orbitals: OrbitalConfig,
    pub cg: CgConfig,
}

impl Default for RdmftConfig {
    fn default() -> Self {
        Self {
            eps_e: 1e-11,
            eps_f: 1e-7,
            max_outer: 300,
            n_thresh: 1e-5,
            occupations: OccupationConfig::default(),
            orbitals: OrbitalConfig::default(),
            cg: CgConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RdmftResult {
    pub energy: f64,
    pub orbitals: DMatrix<f64>,
    pub occupations: Vec<f64>,
    pub mu: f64,
    pub f_max: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    /// (E_occ, E, F_max) per outer iteration.
    pub history: Vec<(f64, f64, f64)>,
}

impl RdmftResult {
    pub fn gamma(&self) -> DMatrix<f64> {
        crate::dressed::polariton_1rdm(&self.orbitals, &self.occupations)
    }
}

/// Sort orbitals by occupation, descending; ties keep their previous order.
fn sort_by_occupation(u: &mut DMatrix<f64>, n: &mut Vec<f64>) {
    let mut idx: Vec<usize> = (0..n.len()).collect();
    idx.sort_by(|&a, &b| n[b].total_cmp(&n[a]).then(a.cmp(&b)));
    let cols: Vec<DVector<f64>> = idx.iter().map(|&i| u.column(i).clone_owned()).collect();
    *u = DMatrix::from_columns(&cols);
    *n = idx.iter().map(|&i| n[i]).collect();
}

/// Alternating occupation/orbital optimization starting from `u` (for the
/// F-matrix path these orbitals also span the basis).
pub fn rdmft_driver(ham: &OrbitalHamiltonian, u0: &DMatrix<f64>, optimizer: OrbitalOptimizer, cfg: &RdmftConfig) -> Result<RdmftResult> {
    let m = u0.ncols();
    let nel = ham.n_electrons;
    if nel == 0 || nel % 2 != 0 {
        return Err(Error::invalid("electron count must be even and positive"));
    }
    if 2 * m < nel {
        return Err(Error::invalid("basis too small for the electron count"));
    }
    let mut u = u0.clone();
    orthonormalize(&mut u)?;
    let mut n = initial_occupations(m, nel, cfg.n_thresh);
    let ints = ham.integrals(&u);
    let occ = occupation_optimize(&IntegralTables::from_integrals(&ints, ham.constant), nel, &n, &cfg.occupations)?;
    n = occ.n;
    let mut mu = occ.mu;
    // rotate to the eigenvectors of the symmetrized multipliers
    let h1 = ham.h1(&u, &ints, &n);
    let lam = OrbitalHamiltonian::lagrange(&u, &h1);
    let (_, vecs) = sorted_eigen(&((&lam + lam.transpose()) * 0.5));
    u = &u * vecs;

    let mut history = Vec::new();
    let mut fm_prev = f64::INFINITY;
    let mut energy = f64::NAN;
    let mut orb_cfg = cfg.orbitals;
    orb_cfg.eps_f = cfg.eps_f;
    for outer in 0..cfg.max_outer {
        let ints = ham.integrals(&u);
        let tables = IntegralTables::from_integrals(&ints, ham.constant);
        let occ = occupation_optimize(&tables, nel, &n, &cfg.occupations)?;
        n = occ.n;
        mu = occ.mu;
        let e_occ = occ.energy;
        sort_by_occupation(&mut u, &mut n);
        if outer > 0 && fm_prev < cfg.eps_f && ((energy - e_occ) / energy).abs() < cfg.eps_e {
            history.push((e_occ, e_occ, fm_prev));
            return Ok(RdmftResult {
                energy: e_occ,
                orbitals: u,
                occupations: n,
                mu,
                f_max: fm_prev,
                outer_iterations: outer,
                converged: true,
                history,
            });
        }
        let (e, fm) = match optimizer {
            OrbitalOptimizer::Piris => {
                let ints = ham.integrals(&u);
                let h1 = ham.h1(&u, &ints, &n);
                let lam = OrbitalHamiltonian::lagrange(&u, &h1);
                let mut state = PirisState::from_lagrange(&lam);
                let r = optimize_orbitals_in_span(ham, &mut u, &n, &mut state, &orb_cfg)?;
                (r.energy, r.f_max)
            }
            OrbitalOptimizer::ConjugateGradient => {
                let r = cg_orbital_optimize(ham, &mut u, &n, &cfg.cg)?;
                let ints = ham.integrals(&u);
                let h1 = ham.h1(&u, &ints, &n);
                let lam = OrbitalHamiltonian::lagrange(&u, &h1);
                (r.energy, f_max(&lam))
            }
        };
        energy = e;
        fm_prev = fm;
        history.push((e_occ, e, fm));
    }
    Ok(RdmftResult {
        energy,
        orbitals: u,
        occupations: n,
        mu,
        f_max: fm_prev,
        outer_iterations: cfg.max_outer,
        converged: false,
        history,
    })
}

/// Müller energy of given orbitals and occupations.
pub fn functional_energy(ham: &OrbitalHamiltonian, u: &DMatrix<f64>, n: &[f64]) -> f64 {
    let ints = ham.integrals(u);
    ham.energy_weighted(&ints, n, &mueller_weights(n))
}
