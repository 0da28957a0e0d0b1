//! Polaritonic Hartree–Fock with the electronic Pauli bound n_i^e ≤ 2 imposed
//! as inequality constraints g_i = 2 − n_i^e ≥ 0.
//!
//! An augmented-Lagrangian outer loop updates the penalty parameter μ and the
//! multipliers ν_i. The inner solver nests three loops: conjugate-gradient
//! relaxation of each dressed orbital at fixed H¹ and fixed natural orbitals
//! ψ^e (DO), refreshing ψ^e from γ_e (NO), and rebuilding H¹ (PCG).

use nalgebra::{DMatrix, DVector};

use crate::dressed::{electronic_1rdm_from_orbitals, ip_basis, mode_occupation, photon_expectation, polariton_1rdm, DressedProblem};
use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, sorted_eigen};

#[derive(Debug, Clone, Copy)]
pub struct PhfConfig {
    pub mu0: f64,
    pub alpha_mu: f64,
    pub beta_mu: f64,
    /// Overall tolerance, split evenly between the residue sum and ΔL.
    pub eps_total: f64,
    /// Stall cap on the penalty parameter.
    pub mu_max: f64,
    /// Lower bound on the inner tolerance ε_PCG.
    pub eps_pcg_floor: f64,
    pub n_lm: usize,
    pub alpha_lm: f64,
    pub max_outer: usize,
    pub max_do: usize,
    pub max_no: usize,
    pub max_pcg: usize,
    /// Number of tracked constraints; `None` means min(N, number of sites).
    pub constraints: Option<usize>,
    /// Leave the lowest orbital out of the penalty terms.
    pub skip_lowest_orbital: bool,
}

impl Default for PhfConfig {
    fn default() -> Self {
        Self {
            mu0: 10.0,
            alpha_mu: 1.5,
            beta_mu: 20.0,
            eps_total: 1e-4,
            mu_max: 1e10,
            eps_pcg_floor: 1e-9,
            n_lm: 10,
            alpha_lm: 0.5,
            max_outer: 60,
            max_do: 200,
            max_no: 50,
            max_pcg: 200,
            constraints: None,
            skip_lowest_orbital: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PenaltyState {
    pub mu: f64,
    pub nu: Vec<f64>,
    pub eps_g: f64,
    pub eps_pcg: f64,
    pub iteration: usize,
}

impl PenaltyState {
    pub fn new(m: usize, cfg: &PhfConfig) -> Self {
        Self { mu: cfg.mu0, nu: vec![0.0; m], eps_g: cfg.mu0.powf(-0.1), eps_pcg: 1.0 / cfg.mu0, iteration: 0 }
    }

    /// ν_i + μ[g_i]⁻, the weight of Ĝ_i in the gradient.
    pub fn weights(&self, g: &[f64]) -> Vec<f64> {
        g.iter().zip(&self.nu).map(|(&gi, &nu)| nu + self.mu * (-gi).max(0.0)).collect()
    }

    /// P = −Σ ν_i g_i + (μ/2) Σ ([g_i]⁻)².
    pub fn penalty(&self, g: &[f64]) -> f64 {
        g.iter()
            .zip(&self.nu)
            .map(|(&gi, &nu)| {
                let v = (-gi).max(0.0);
                -nu * gi + 0.5 * self.mu * v * v
            })
            .sum()
    }

    /// One outer update. The multiplier branch is taken when the worst
    /// violation max_i [g_i]⁻ is below ε_g.
    pub fn update(&mut self, g: &[f64], cfg: &PhfConfig) {
        let violation = g.iter().map(|&gi| (-gi).max(0.0)).fold(0.0, f64::max);
        if violation <= self.eps_g {
            for (nu, &gi) in self.nu.iter_mut().zip(g) {
                *nu = (*nu - self.mu * gi).max(0.0);
            }
            self.mu *= cfg.alpha_mu;
            self.eps_g = self.mu.powf(-0.9);
        } else {
            self.mu *= cfg.beta_mu;
            self.eps_g = self.mu.powf(-0.1);
        }
        self.eps_pcg = (self.eps_pcg / self.mu).max(cfg.eps_pcg_floor);
        self.iteration += 1;
    }
}

/// Natural orbitals ψ^e of γ_e for the `m` largest occupations.
#[derive(Debug, Clone)]
pub struct NaturalOrbitals {
    /// n_x × m, columns ψ_i^e.
    pub psi: DMatrix<f64>,
    pub occupations: Vec<f64>,
}

pub fn electronic_gamma(u: &DMatrix<f64>, block: usize) -> DMatrix<f64> {
    electronic_1rdm_from_orbitals(u, &vec![2.0; u.ncols()], block)
}

pub fn natural_orbitals(gamma_e: &DMatrix<f64>, m: usize) -> NaturalOrbitals {
    let (vals, vecs) = sorted_eigen(gamma_e);
    let nx = gamma_e.nrows();
    let m = m.min(nx);
    let cols: Vec<DVector<f64>> = (0..m).map(|i| vecs.column(nx - 1 - i).clone_owned()).collect();
    NaturalOrbitals { psi: DMatrix::from_columns(&cols), occupations: (0..m).map(|i| vals[nx - 1 - i]).collect() }
}

/// c(q) = Σ_x ψ(x) φ(x, q).
fn project(psi: &[f64], phi: &[f64], block: usize) -> Vec<f64> {
    let mut c = vec![0.0; block];
    for (x, &p) in psi.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for q in 0..block {
            c[q] += p * phi[x * block + q];
        }
    }
    c
}

/// ⟨φ|Ĝ_i φ⟩ = 2 Σ_q c(q)², the contribution of a doubly occupied φ to n_i.
fn g_expectation(psi: &[f64], phi: &[f64], block: usize) -> f64 {
    2.0 * project(psi, phi, block).iter().map(|c| c * c).sum::<f64>()
}

/// Ĝ_i φ = 2 ψ_i(x) c(q).
pub fn g_operator_apply(psi_i: &DVector<f64>, phi: &DVector<f64>, block: usize) -> Result<DVector<f64>> {
    if psi_i.len() * block != phi.len() {
        return Err(Error::invalid(format!(
            "natural orbital length {} times block {} does not match orbital length {}",
            psi_i.len(),
            block,
            phi.len()
        )));
    }
    let c = project(psi_i.as_slice(), phi.as_slice(), block);
    Ok(DVector::from_fn(phi.len(), |z, _| 2.0 * psi_i[z / block] * c[z % block]))
}

/// g_i = 2 − ⟨ψ_i^e|γ_e[φ]|ψ_i^e⟩ for doubly occupied orbitals.
pub fn constraint_values(u: &DMatrix<f64>, psi: &DMatrix<f64>, block: usize) -> Vec<f64> {
    (0..psi.ncols())
        .map(|i| {
            let p = psi.column(i);
            let n: f64 = (0..u.ncols()).map(|k| g_expectation(p.as_slice(), u.column(k).as_slice(), block)).sum();
            2.0 - n
        })
        .collect()
}

/// Everything held fixed during one DO sweep.
pub struct DoContext<'a> {
    /// Dense H¹ = 2F of the current PCG iteration.
    pub h1: &'a DMatrix<f64>,
    pub psi: &'a DMatrix<f64>,
    pub block: usize,
    pub state: &'a PenaltyState,
    pub skip_lowest_orbital: bool,
}

impl DoContext<'_> {
    fn penalized(&self, k: usize) -> bool {
        !(self.skip_lowest_orbital && k == 0)
    }

    /// (H¹ + Σ_i w_i Ĝ_i) φ.
    fn apply(&self, k: usize, phi: &DVector<f64>, weights: &[f64]) -> DVector<f64> {
        let mut out = self.h1 * phi;
        if self.penalized(k) {
            for (i, &w) in weights.iter().enumerate() {
                if w != 0.0 {
                    let gphi = g_operator_apply(&self.psi.column(i).clone_owned(), phi, self.block).expect("shapes checked");
                    out.axpy(w, &gphi, 1.0);
                }
            }
        }
        out
    }

    /// Penalized line functional ⟨φ̃|H¹φ̃⟩ + P(n(φ̃)) with n_i evaluated
    /// through the fixed ψ^e projections.
    pub fn line_energy(&self, u: &DMatrix<f64>, k: usize, phi: &DVector<f64>) -> f64 {
        let mut e = phi.dot(&(self.h1 * phi));
        if self.penalized(k) {
            let g: Vec<f64> = (0..self.psi.ncols())
                .map(|i| {
                    let p = self.psi.column(i);
                    let mut n = g_expectation(p.as_slice(), phi.as_slice(), self.block);
                    for j in 0..u.ncols() {
                        if j != k {
                            n += g_expectation(p.as_slice(), u.column(j).as_slice(), self.block);
                        }
                    }
                    2.0 - n
                })
                .collect();
            e += self.state.penalty(&g);
        }
        e
    }
}

/// ζ_k = −(H¹ + Σ_i [ν_i + μ[g_i]⁻] Ĝ_i − ε_k) φ_k with
/// ε_k = ⟨φ_k|(H¹ + Σ_i [ν_i + μ[g_i]⁻] Ĝ_i) φ_k⟩.
pub fn phf_gradient(ctx: &DoContext<'_>, u: &DMatrix<f64>, k: usize) -> DVector<f64> {
    let g = constraint_values(u, ctx.psi, ctx.block);
    let w = ctx.state.weights(&g);
    let phi = u.column(k).clone_owned();
    let a = ctx.apply(k, &phi, &w);
    let eps = phi.dot(&a);
    -(a - phi * eps)
}

/// Divide-and-conquer sampling of Θ ∈ [0, π/2]: `n_lm` intervals per level,
/// the next level centred on the best sample with half-width
/// α_LM·(current width)/2, until the half-width drops below `eps_lm`.
pub fn line_minimize<F: Fn(f64) -> f64>(f: F, n_lm: usize, alpha_lm: f64, eps_lm: f64) -> f64 {
    let top = std::f64::consts::FRAC_PI_2;
    let (mut lo, mut hi) = (0.0f64, top);
    let f0 = f(0.0);
    let mut best = (0.0, f0);
    for _ in 0..200 {
        let step = (hi - lo) / n_lm as f64;
        for j in 0..=n_lm {
            let t = lo + j as f64 * step;
            let v = f(t);
            if v < best.1 {
                best = (t, v);
            }
        }
        let half = alpha_lm * (hi - lo) / 2.0;
        lo = (best.0 - half).max(0.0);
        hi = (best.0 + half).min(top);
        if (hi - lo) / 2.0 < eps_lm {
            break;
        }
    }
    best.0
}

/// Relax orbital `k` at fixed H¹ and ψ^e; returns the number of steps.
fn do_loop(ctx: &DoContext<'_>, u: &mut DMatrix<f64>, k: usize, eps_do: f64, eps_lm: f64, cfg: &PhfConfig) -> usize {
    let kk = u.ncols();
    let mut xi_prev: Option<DVector<f64>> = None;
    let mut ez_prev = 0.0;
    for step in 0..cfg.max_do {
        let zeta = phf_gradient(ctx, u, k);
        let mut eta = zeta.clone();
        for j in 0..kk {
            let p = u.column(j).dot(&eta);
            eta.axpy(-p, &u.column(j), 1.0);
        }
        let ez = eta.dot(&zeta);
        let mut xi = match &xi_prev {
            Some(prev) if ez_prev > 0.0 => &eta + prev * (ez / ez_prev),
            _ => eta.clone(),
        };
        ez_prev = ez;
        for j in 0..kk {
            let p = u.column(j).dot(&xi);
            xi.axpy(-p, &u.column(j), 1.0);
        }
        let norm = xi.norm();
        if norm < 1e-14 {
            return step;
        }
        xi_prev = Some(xi.clone());
        xi /= norm;
        if xi.dot(&zeta) < 0.0 {
            xi = -xi;
        }
        let phi = u.column(k).clone_owned();
        let theta = line_minimize(
            |t| ctx.line_energy(u, k, &(&phi * t.cos() + &xi * t.sin())),
            cfg.n_lm,
            cfg.alpha_lm,
            eps_lm,
        );
        let new = &phi * theta.cos() + &xi * theta.sin();
        let change = (&new - &phi).norm();
        u.set_column(k, &new);
        if change < eps_do {
            return step + 1;
        }
    }
    cfg.max_do
}

#[derive(Debug, Clone)]
pub struct PcgResult {
    pub orbitals: DMatrix<f64>,
    pub natural: NaturalOrbitals,
    pub gamma: DMatrix<f64>,
    pub pcg_iterations: usize,
    pub converged: bool,
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Inner PCG solve at fixed (μ, ν) with tolerance `state.eps_pcg`.
pub fn pcg_inner(
    problem: &DressedProblem,
    u0: &DMatrix<f64>,
    m: usize,
    state: &PenaltyState,
    cfg: &PhfConfig,
) -> Result<PcgResult> {
    let ham = &problem.hamiltonian;
    let block = problem.block();
    let eps_scf = state.eps_pcg;
    let eps_no = 0.1 * eps_scf;
    let eps_do = 0.01 * eps_scf;
    let eps_lm = 0.1 * eps_scf;
    let mut u = u0.clone();
    orthonormalize(&mut u)?;
    let mut gamma = polariton_1rdm(&u, &vec![2.0; u.ncols()]);
    let mut natural = natural_orbitals(&electronic_gamma(&u, block), m);
    for m3 in 0..cfg.max_pcg {
        let h1 = ham.fock_matrix(&u) * 2.0;
        let mut gamma_e = electronic_gamma(&u, block);
        for _m2 in 0..cfg.max_no {
            let ctx = DoContext { h1: &h1, psi: &natural.psi, block, state, skip_lowest_orbital: cfg.skip_lowest_orbital };
            for k in 0..u.ncols() {
                do_loop(&ctx, &mut u, k, eps_do, eps_lm, cfg);
            }
            orthonormalize(&mut u)?;
            let new_gamma_e = electronic_gamma(&u, block);
            natural = natural_orbitals(&new_gamma_e, m);
            let d = max_abs_diff(&new_gamma_e, &gamma_e);
            gamma_e = new_gamma_e;
            if d < eps_no {
                break;
            }
        }
        let new_gamma = polariton_1rdm(&u, &vec![2.0; u.ncols()]);
        let d = max_abs_diff(&new_gamma, &gamma);
        gamma = new_gamma;
        if d < eps_scf {
            return Ok(PcgResult { orbitals: u, natural, gamma, pcg_iterations: m3 + 1, converged: true });
        }
    }
    Ok(PcgResult { orbitals: u, natural, gamma, pcg_iterations: cfg.max_pcg, converged: false })
}

/// Final state of the constrained minimization.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub constraints: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub penalty: f64,
    pub max_violation: f64,
    /// Σ_i |ν_i g_i|
    pub slackness: f64,
    pub residue: f64,
    pub delta_l: f64,
    pub converged: bool,
    /// μ exceeded its cap; the result is the best feasible iterate seen.
    pub stalled: bool,
    pub outer_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct PhfResult {
    pub energy: f64,
    pub lagrangian: f64,
    pub orbitals: DMatrix<f64>,
    pub gamma_e: DMatrix<f64>,
    pub electronic_occupations: Vec<f64>,
    pub photon_number: f64,
    pub report: FeasibilityReport,
    /// (outer iteration, L, R, max violation)
    pub trace: Vec<(usize, f64, f64, f64)>,
}

/// Σ_k ‖(1 − P_occ)(H¹ + Σ w_i Ĝ_i)φ_k‖ with a freshly built H¹.
pub fn residue_sum(problem: &DressedProblem, u: &DMatrix<f64>, psi: &DMatrix<f64>, state: &PenaltyState, cfg: &PhfConfig) -> f64 {
    let h1 = problem.hamiltonian.fock_matrix(u) * 2.0;
    let ctx = DoContext { h1: &h1, psi, block: problem.block(), state, skip_lowest_orbital: cfg.skip_lowest_orbital };
    let g = constraint_values(u, psi, ctx.block);
    let w = state.weights(&g);
    (0..u.ncols())
        .map(|k| {
            let mut a = ctx.apply(k, &u.column(k).clone_owned(), &w);
            for j in 0..u.ncols() {
                let p = u.column(j).dot(&a);
                a.axpy(-p, &u.column(j), 1.0);
            }
            a.norm()
        })
        .sum()
}

fn default_constraint_count(problem: &DressedProblem, cfg: &PhfConfig) -> usize {
    cfg.constraints.unwrap_or_else(|| problem.n_electrons.min(problem.n_x()))
}

/// Augmented-Lagrangian polaritonic HF starting from the independent-particle orbitals.
pub fn augmented_lagrangian_outer(problem: &DressedProblem, cfg: &PhfConfig) -> Result<PhfResult> {
    let nel = problem.n_electrons;
    if nel == 0 || nel % 2 != 0 {
        return Err(Error::invalid("polaritonic HF needs an even, positive electron count"));
    }
    let ip = ip_basis(problem, nel / 2)?;
    augmented_lagrangian_from(problem, &ip.orbitals, cfg)
}

pub fn augmented_lagrangian_from(problem: &DressedProblem, u0: &DMatrix<f64>, cfg: &PhfConfig) -> Result<PhfResult> {
    let ham = &problem.hamiltonian;
    let block = problem.block();
    let m = default_constraint_count(problem, cfg);
    let mut state = PenaltyState::new(m, cfg);
    let mut u = u0.clone();
    orthonormalize(&mut u)?;
    let lagrangian = |u: &DMatrix<f64>, psi: &DMatrix<f64>, st: &PenaltyState| {
        ham.hf_energy(u) + st.penalty(&constraint_values(u, psi, block))
    };
    let mut natural = natural_orbitals(&electronic_gamma(&u, block), m);
    let mut l_prev = lagrangian(&u, &natural.psi, &state);
    let mut trace = Vec::new();
    let half = cfg.eps_total / 2.0;
    let mut best_feasible: Option<(f64, DMatrix<f64>)> = None;
    let mut last = (f64::INFINITY, f64::INFINITY, Vec::new());
    for l in 0..cfg.max_outer {
        let inner = pcg_inner(problem, &u, m, &state, cfg)?;
        u = inner.orbitals;
        natural = inner.natural;
        let g = constraint_values(&u, &natural.psi, block);
        let violation = g.iter().map(|&gi| (-gi).max(0.0)).fold(0.0, f64::max);
        if violation <= state.eps_g.min(cfg.eps_total) {
            let e = ham.hf_energy(&u);
            if best_feasible.as_ref().is_none_or(|(be, _)| e < *be) {
                best_feasible = Some((e, u.clone()));
            }
        }
        state.update(&g, cfg);
        let l_now = lagrangian(&u, &natural.psi, &state);
        let r = residue_sum(problem, &u, &natural.psi, &state, cfg);
        let dl = (l_now - l_prev).abs();
        l_prev = l_now;
        trace.push((l, l_now, r, violation));
        last = (r, dl, g.clone());
        if r < half && dl < half && violation <= cfg.eps_total {
            return finish(problem, u, &natural, &state, l_now, r, dl, true, false, l + 1, trace);
        }
        if state.mu > cfg.mu_max {
            let (uu, nat) = match best_feasible.take() {
                Some((_, bu)) => {
                    let nat = natural_orbitals(&electronic_gamma(&bu, block), m);
                    (bu, nat)
                }
                None => (u.clone(), natural.clone()),
            };
            let lv = lagrangian(&uu, &nat.psi, &state);
            return finish(problem, uu, &nat, &state, lv, r, dl, false, true, l + 1, trace);
        }
    }
    let _ = &last.2;
    finish(problem, u, &natural, &state, l_prev, last.0, last.1, false, false, cfg.max_outer, trace)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &DressedProblem,
    u: DMatrix<f64>,
    natural: &NaturalOrbitals,
    state: &PenaltyState,
    lagrangian: f64,
    residue: f64,
    delta_l: f64,
    converged: bool,
    stalled: bool,
    outer_iterations: usize,
    trace: Vec<(usize, f64, f64, f64)>,
) -> Result<PhfResult> {
    let block = problem.block();
    let g = constraint_values(&u, &natural.psi, block);
    let gamma_e = electronic_gamma(&u, block);
    let (vals, _) = sorted_eigen(&gamma_e);
    let electronic_occupations: Vec<f64> = vals.iter().rev().copied().collect();
    let gamma = polariton_1rdm(&u, &vec![2.0; u.ncols()]);
    let hph = photon_expectation(problem, &gamma);
    let photon_number = match problem.modes.first() {
        Some(mode) => mode_occupation(hph, mode.omega, problem.n_electrons)?,
        None => 0.0,
    };
    let report = FeasibilityReport {
        max_violation: g.iter().map(|&gi| (-gi).max(0.0)).fold(0.0, f64::max),
        slackness: g.iter().zip(&state.nu).map(|(gi, nu)| (gi * nu).abs()).sum(),
        penalty: state.penalty(&g),
        constraints: g,
        multipliers: state.nu.clone(),
        residue,
        delta_l,
        converged,
        stalled,
        outer_iterations,
    };
    Ok(PhfResult {
        energy: problem.hamiltonian.hf_energy(&u),
        lagrangian,
        orbitals: u,
        gamma_e,
        electronic_occupations,
        photon_number,
        report,
        trace,
    })
}
