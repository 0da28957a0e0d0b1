//! Closed-shell Hartree–Fock for electronic and dressed problems.
//!
//! Orbitals are relaxed with the band-by-band conjugate-gradient scheme of
//! [`crate::rdmft`] at occupations fixed to two.

use nalgebra::{DMatrix, DVector};

use crate::dressed::{ip_basis, polariton_1rdm, DressedProblem};
use crate::error::{Error, Result};
use crate::hamiltonian::OrbitalHamiltonian;
use crate::rdmft::{cg_orbital_optimize, CgConfig};

#[derive(Debug, Clone, Copy)]
pub struct ScfConfig {
    /// Relative energy change between sweeps.
    pub eps_e: f64,
    /// Largest change of the basis density between sweeps.
    pub eps_rho: f64,
    pub max_iterations: usize,
    /// Line minimizations per orbital and sweep.
    pub steps_per_band: usize,
}

impl Default for ScfConfig {
    fn default() -> Self {
        Self { eps_e: 1e-9, eps_rho: 1e-8, max_iterations: 2000, steps_per_band: 4 }
    }
}

#[derive(Debug, Clone)]
pub struct HfResult {
    pub energy: f64,
    /// Doubly occupied orbitals, one per column.
    pub orbitals: DMatrix<f64>,
    /// Σ_k 2|φ_k(z)|² in basis-vector units.
    pub density: DVector<f64>,
    pub gamma: DMatrix<f64>,
    /// Orbital energies ⟨φ_k|F|φ_k⟩.
    pub orbital_energies: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// (sweep, energy, max density change) per sweep.
    pub trace: Vec<(usize, f64, f64)>,
}

/// F v = (t + v)v + Σ_j [2Ĵ_j − K̂_j] v for the doubly occupied set `u`.
pub fn fock_apply(ham: &OrbitalHamiltonian, u: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    if v.len() != ham.dim() || u.nrows() != ham.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: operator {}, orbitals {}, vector {}",
            ham.dim(),
            u.nrows(),
            v.len()
        )));
    }
    let ints = ham.integrals(u);
    let n = vec![2.0; u.ncols()];
    if u.ncols() == 0 {
        let vm = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        return Ok((&ham.one_body * &vm).column(0).clone_owned());
    }
    // H¹ for any orbital at n = 2 equals 2F
    Ok(ham.h1_apply(u, &ints, &n, 0, v) * 0.5)
}

/// 2Σ⟨φ|h|φ⟩ + Σ_ij [2(ii|jj) − (ij|ij)] + constant.
pub fn hf_energy(ham: &OrbitalHamiltonian, u: &DMatrix<f64>) -> f64 {
    ham.hf_energy(u)
}

/// Self-consistent HF starting from `guess` (N/2 columns).
pub fn hf_from_guess(ham: &OrbitalHamiltonian, guess: &DMatrix<f64>, cfg: &ScfConfig) -> Result<HfResult> {
    let k = ham.n_electrons / 2;
    if ham.n_electrons == 0 || ham.n_electrons % 2 != 0 {
        return Err(Error::invalid("closed-shell HF needs an even, positive electron count"));
    }
    if guess.ncols() != k || guess.nrows() != ham.dim() {
        return Err(Error::invalid(format!("initial guess must be {}×{}", ham.dim(), k)));
    }
    let n = vec![2.0; k];
    let mut u = guess.clone();
    let mut rho = OrbitalHamiltonian::basis_density(&u, &n);
    let mut e_prev = hf_energy(ham, &u);
    let mut trace = Vec::new();
    let cg = CgConfig { max_sweeps: 1, steps_per_band: cfg.steps_per_band, eps_phi: 0.0, ..CgConfig::default() };
    let mut residual = f64::INFINITY;
    for it in 1..=cfg.max_iterations {
        let r = cg_orbital_optimize(ham, &mut u, &n, &cg)?;
        residual = r.max_residue;
        let rho_new = OrbitalHamiltonian::basis_density(&u, &n);
        let drho = (&rho_new - &rho).amax();
        rho = rho_new;
        let e = r.energy;
        trace.push((it, e, drho));
        let de = ((e - e_prev) / e.abs().max(1e-300)).abs();
        e_prev = e;
        if de < cfg.eps_e && drho < cfg.eps_rho {
            return Ok(finish(ham, u, e, it, residual, true, trace));
        }
    }
    Ok(finish(ham, u, e_prev, cfg.max_iterations, residual, false, trace))
}

fn finish(
    ham: &OrbitalHamiltonian,
    mut u: DMatrix<f64>,
    energy: f64,
    iterations: usize,
    residual: f64,
    converged: bool,
    trace: Vec<(usize, f64, f64)>,
) -> HfResult {
    // canonical orbitals: diagonalize F inside the occupied space
    let k = u.ncols();
    let ints = ham.integrals(&u);
    let n = vec![2.0; k];
    let h1 = ham.h1(&u, &ints, &n);
    let lam = OrbitalHamiltonian::lagrange(&u, &h1) * 0.5;
    let (vals, vecs) = crate::linalg::sorted_eigen(&lam);
    u = &u * vecs;
    let density = OrbitalHamiltonian::basis_density(&u, &n);
    let gamma = polariton_1rdm(&u, &n);
    HfResult {
        energy,
        orbitals: u,
        density,
        gamma,
        orbital_energies: vals.iter().copied().collect(),
        iterations,
        residual,
        converged,
        trace,
    }
}

/// HF from the independent-particle guess of the (dressed) problem.
pub fn hf_scf(problem: &DressedProblem, cfg: &ScfConfig) -> Result<HfResult> {
    let k = problem.n_electrons / 2;
    if problem.n_electrons == 0 || problem.n_electrons % 2 != 0 {
        return Err(Error::invalid("closed-shell HF needs an even, positive electron count"));
    }
    let ip = ip_basis(problem, k)?;
    hf_from_guess(&problem.hamiltonian, &ip.orbitals, cfg)
}
