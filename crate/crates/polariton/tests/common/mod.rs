//! Shared fixtures and checks for the integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polariton::dressed::{
    dress, electronic_1rdm, electronic_1rdm_from_orbitals, ip_basis, polariton_1rdm, DressedProblem,
};
use polariton::hamiltonian::OrbitalHamiltonian;
use polariton::linalg::{lanczos_lowest, orthonormalize, LanczosConfig};
use polariton::model::*;
use polariton::polariton_hf::{
    constraint_values, electronic_gamma, g_operator_apply, natural_orbitals, DoContext, PenaltyState, PhfConfig,
};
use polariton::rdmft::{
    line_derivatives, line_lagrangian, mueller_energy, occupation_gradient, occupation_optimize, IntegralTables,
    OccupationConfig,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_helium(lambda: Option<f64>) -> DressedProblem {
    let spec = GridModel {
        grid: Grid1D::from_length(8.0, 0.4).unwrap(),
        stencil: StencilOrder::Fourth,
        potential: SoftPotential::atom(2.0, 1.0).unwrap(),
        interaction: SoftInteraction::new(1.0).unwrap(),
        modes: lambda.map(|l| CavityMode::new(0.5535, l).unwrap()).into_iter().collect(),
        n_electrons: 2,
        photon_grid: lambda.map(|_| Grid1D::from_length(6.0, 1.0).unwrap()),
    };
    dress(&ModelSpec::Grid(spec)).unwrap()
}

pub fn random_orthonormal(r: &mut impl Rng, d: usize, k: usize) -> DMatrix<f64> {
    let mut u = DMatrix::from_fn(d, k, |_, _| r.random::<f64>() - 0.5);
    orthonormalize(&mut u).unwrap();
    u
}

fn unit_orthogonal_to(r: &mut impl Rng, phi: &DVector<f64>) -> DVector<f64> {
    let mut xi = DVector::from_fn(phi.len(), |_, _| r.random::<f64>() - 0.5);
    xi -= phi * phi.dot(&xi);
    xi.normalize()
}

// ---------------------------------------------------------------------------
// Gradient checks. Each returns the largest absolute error seen.

/// ∂E/∂n_i against central differences of the Müller energy at `points`
/// random occupation vectors inside (0, 2).
pub fn occupation_gradient_error(points: usize, seed: u64) -> f64 {
    let p = small_helium(None);
    let ip = ip_basis(&p, 6).unwrap();
    let t = IntegralTables::from_integrals(&p.hamiltonian.integrals(&ip.orbitals), p.hamiltonian.constant);
    let mut r = rng(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let n: Vec<f64> = (0..t.len()).map(|_| 0.05 + 1.9 * r.random::<f64>()).collect();
        let g = occupation_gradient(&n, &t, 1e-12);
        for i in 0..n.len() {
            let mut np = n.clone();
            let mut nm = n.clone();
            np[i] += h;
            nm[i] -= h;
            let fd = (mueller_energy(&np, &t) - mueller_energy(&nm, &t)) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs());
        }
    }
    worst
}

fn coupled_orbitals(seed: u64) -> (DressedProblem, DMatrix<f64>, DMatrix<f64>) {
    let p = small_helium(Some(0.4));
    let mut r = rng(seed);
    let u = random_orthonormal(&mut r, p.dim(), 2);
    let psi = natural_orbitals(&electronic_gamma(&u, p.block()), 3).psi;
    (p, u, psi)
}

/// δn_i/δφ_k = 2Ĝ_iφ_k against central differences of n_i along random directions.
pub fn g_operator_gradient_error(cases: usize, seed: u64) -> f64 {
    let (p, u, psi) = coupled_orbitals(seed);
    let b = p.block();
    let mut r = rng(seed ^ 0x5eed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let k = r.random_range(0..u.ncols());
        let v = DVector::from_fn(p.dim(), |_, _| r.random::<f64>() - 0.5);
        let mut up = u.clone();
        let mut um = u.clone();
        up.set_column(k, &(u.column(k) + &v * h));
        um.set_column(k, &(u.column(k) - &v * h));
        let gp = constraint_values(&up, &psi, b);
        let gm = constraint_values(&um, &psi, b);
        for i in 0..psi.ncols() {
            // n_i = 2 − g_i
            let fd = -(gp[i] - gm[i]) / (2.0 * h);
            let an = 2.0 * v.dot(&g_operator_apply(&psi.column(i).clone_owned(), &u.column(k).clone_owned(), b).unwrap());
            worst = worst.max((fd - an).abs());
        }
    }
    worst
}

/// Slope of the penalized line functional at Θ = 0 against the steepest
/// descent vector: dL/dΘ = −2⟨ξ|ζ_k⟩ for ξ ⊥ φ_k. Exercises the sign of the
/// multiplier and penalty weights with active violations.
pub fn penalized_line_slope_error(cases: usize, seed: u64) -> f64 {
    let p = small_helium(Some(0.4));
    let b = p.block();
    let nq = b;
    // two orbitals sharing one electronic profile push n_1 above 2
    let prof = DVector::from_fn(p.n_x(), |x, _| (-(x as f64 - 10.0).powi(2) / 8.0).exp()).normalize();
    let mut u = DMatrix::zeros(p.dim(), 2);
    for x in 0..p.n_x() {
        u[(x * nq, 0)] = prof[x];
        u[(x * nq + 1, 1)] = prof[x];
    }
    let mut r = rng(seed);
    u += DMatrix::from_fn(p.dim(), 2, |_, _| 0.05 * (r.random::<f64>() - 0.5));
    orthonormalize(&mut u).unwrap();
    let psi = natural_orbitals(&electronic_gamma(&u, b), 3).psi;
    let g = constraint_values(&u, &psi, b);
    assert!(g.iter().any(|&v| v < 0.0), "fixture must violate a constraint");
    let mut state = PenaltyState::new(psi.ncols(), &PhfConfig::default());
    state.mu = 7.0;
    state.nu = (0..psi.ncols()).map(|_| r.random::<f64>()).collect();
    let h1 = p.hamiltonian.fock_matrix(&u) * 2.0;
    let ctx = DoContext { h1: &h1, psi: &psi, block: b, state: &state, skip_lowest_orbital: false };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let k = r.random_range(0..2);
        let phi = u.column(k).clone_owned();
        let xi = unit_orthogonal_to(&mut r, &phi);
        let line = |t: f64| ctx.line_energy(&u, k, &(&phi * t.cos() + &xi * t.sin()));
        let fd = (line(h) - line(-h)) / (2.0 * h);
        let zeta = polariton::polariton_hf::phf_gradient(&ctx, &u, k);
        worst = worst.max((fd + 2.0 * xi.dot(&zeta)).abs());
    }
    worst
}

/// dL/dΘ of the conjugate-gradient line search against central differences.
pub fn line_derivative_error(cases: usize, seed: u64) -> f64 {
    let p = small_helium(None);
    let ham = &p.hamiltonian;
    let mut r = rng(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let m = r.random_range(2..5);
        let u = random_orthonormal(&mut r, p.dim(), m);
        let n: Vec<f64> = (0..m).map(|_| 0.05 + 1.9 * r.random::<f64>()).collect();
        let ints = ham.integrals(&u);
        let h1 = ham.h1(&u, &ints, &n);
        let lambda = OrbitalHamiltonian::lagrange(&u, &h1);
        let k = r.random_range(0..m);
        let xi = unit_orthogonal_to(&mut r, &u.column(k).clone_owned());
        let d = line_derivatives(ham, &u, &ints, &h1, &lambda, &n, k, &xi);
        let fd = (line_lagrangian(ham, &u, &lambda, &n, k, &xi, h) - line_lagrangian(ham, &u, &lambda, &n, k, &xi, -h))
            / (2.0 * h);
        worst = worst.max((fd - d.first).abs());
    }
    worst
}

// ---------------------------------------------------------------------------
// Invariants. Each check draws its inputs from `seed` and reports the first
// violation.

pub type Check = Result<(), String>;

/// Müller tables from random orthonormal orbitals of the small atom, so
/// the Hartree matrix is a genuine Gram matrix.
fn random_tables(r: &mut impl Rng, m: usize) -> IntegralTables {
    let p = small_helium(None);
    let u = random_orthonormal(r, p.dim(), m);
    IntegralTables::from_integrals(&p.hamiltonian.integrals(&u), 0.0)
}

/// Optimized occupations satisfy 0 ≤ n_i ≤ 2 and Σn = N.
pub fn check_occupation_bounds(seed: u64) -> Check {
    let mut r = rng(seed);
    let m = r.random_range(2..7);
    let nel = 2 * r.random_range(1..=m.min(3));
    let t = random_tables(&mut r, m);
    let init: Vec<f64> = (0..m).map(|i| if i < nel / 2 { 2.0 - 1e-5 } else { 1e-5 }).collect();
    let res = occupation_optimize(&t, nel, &init, &OccupationConfig::default()).map_err(|e| e.to_string())?;
    if let Some(v) = res.n.iter().find(|&&v| !(0.0..=2.0).contains(&v)) {
        return Err(format!("occupation {v} outside [0, 2]"));
    }
    let s: f64 = res.n.iter().sum();
    if (s - nel as f64).abs() > 1e-8 {
        return Err(format!("occupations sum to {s}, expected {nel}"));
    }
    Ok(())
}

/// tr γ = tr γ_e = Σn, and tracing γ over q equals the direct γ_e.
pub fn check_trace_rules(seed: u64) -> Check {
    let mut r = rng(seed);
    let nx = r.random_range(2..9);
    let block = r.random_range(1..5);
    let k = r.random_range(1..=(nx * block).min(4));
    let u = random_orthonormal(&mut r, nx * block, k);
    let n: Vec<f64> = (0..k).map(|_| 2.0 * r.random::<f64>()).collect();
    let total: f64 = n.iter().sum();
    let gamma = polariton_1rdm(&u, &n);
    let ge = electronic_1rdm_from_orbitals(&u, &n, block);
    if (gamma.trace() - total).abs() > 1e-12 || (ge.trace() - total).abs() > 1e-12 {
        return Err(format!("traces {} / {} vs {total}", gamma.trace(), ge.trace()));
    }
    let diff = (electronic_1rdm(&gamma, block) - &ge).amax();
    if diff > 1e-13 {
        return Err(format!("partial trace mismatch {diff:e}"));
    }
    Ok(())
}

/// w(x,x′) = w(x′,x) > 0 and the dressed kernel is symmetric under pair exchange.
pub fn check_kernel_symmetry(seed: u64) -> Check {
    let mut r = rng(seed);
    let mut u = || 20.0 * r.random::<f64>() - 10.0;
    let (x, xp, q, qp) = (u(), u(), u(), u());
    let eps = 0.1 + (u() + 10.0) / 10.0;
    let omega = 0.1 + (u() + 10.0) / 10.0;
    let lam = (u() + 10.0) / 20.0;
    let w = SoftInteraction::new(eps).unwrap();
    let m = [CavityMode::new(omega, lam).unwrap()];
    let a = w.eval(x, xp);
    if a != w.eval(xp, x) || !(a > 0.0 && a <= 1.0 / eps) {
        return Err(format!("soft interaction {a} at ({x}, {xp})"));
    }
    let d1 = dressed_interaction(x, &[q], xp, &[qp], &w, &m, 2);
    let d2 = dressed_interaction(xp, &[qp], x, &[q], &w, &m, 2);
    if (d1 - d2).abs() > 1e-13 * d1.abs().max(1.0) {
        return Err(format!("dressed kernel asymmetric: {d1} vs {d2}"));
    }
    Ok(())
}

/// Kinetic, lattice one-body and Fock matrices are symmetric.
pub fn check_hermiticity(seed: u64) -> Check {
    let mut r = rng(seed);
    let npts = r.random_range(9..40);
    let grid = Grid1D::new(npts, 0.05 + r.random::<f64>(), 0.0).map_err(|e| e.to_string())?;
    let order = [StencilOrder::Fourth, StencilOrder::Eighth][r.random_range(0..2)];
    let t = kinetic_matrix(&grid, order);
    if (&t - t.transpose()).amax() != 0.0 {
        return Err("kinetic matrix not symmetric".into());
    }
    let sites = r.random_range(2..7);
    let onsite: Vec<f64> = (0..sites).map(|_| r.random::<f64>() - 0.5).collect();
    let mode = CavityMode::new(0.1 + r.random::<f64>(), r.random::<f64>()).unwrap();
    let lat = LatticeModel::new(sites, 0.1 + r.random::<f64>(), onsite, mode, r.random_range(1..5), 2).map_err(|e| e.to_string())?;
    let h = lattice_one_body_matrix(&lat).map_err(|e| e.to_string())?;
    if (&h - h.transpose()).amax() > 1e-14 {
        return Err("lattice one-body matrix not symmetric".into());
    }
    let p = dress(&ModelSpec::Lattice(lat)).map_err(|e| e.to_string())?;
    let u = random_orthonormal(&mut r, p.dim(), 1);
    let f = p.hamiltonian.fock_matrix(&u);
    let asym = (&f - f.transpose()).amax();
    if asym > 1e-12 * f.amax().max(1.0) {
        return Err(format!("Fock matrix asymmetry {asym:e}"));
    }
    Ok(())
}

/// At λ = 0 every combined IP eigenvalue splits into electronic + photonic parts.
pub fn check_uncoupled_factorization(seed: u64) -> Check {
    let mut r = rng(seed);
    let sites = r.random_range(2..7);
    let onsite: Vec<f64> = (0..sites).map(|_| r.random::<f64>() - 0.5).collect();
    let mode = CavityMode::new(0.1 + r.random::<f64>(), 0.0).unwrap();
    let bph = r.random_range(1..5);
    let lat = LatticeModel::new(sites, 0.1 + r.random::<f64>(), onsite, mode, bph, 2).map_err(|e| e.to_string())?;
    let p = dress(&ModelSpec::Lattice(lat)).map_err(|e| e.to_string())?;
    let ip = ip_basis(&p, r.random_range(1..=p.dim())).map_err(|e| e.to_string())?;
    for l in &ip.labels {
        let s = ip.electronic_energies[l.electronic] + ip.photonic_energies[l.photonic];
        if (s - l.energy).abs() > 1e-10 {
            return Err(format!("IP level {} is not {s}", l.energy));
        }
    }
    Ok(())
}

/// Same inputs and seed give bit-identical Lanczos and occupation results.
pub fn check_determinism(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = r.random_range(5..40);
    let a = DMatrix::from_fn(d, d, |_, _| r.random::<f64>() - 0.5);
    let a = &a + a.transpose();
    let cfg = LanczosConfig { seed, ..LanczosConfig::default() };
    let run = || lanczos_lowest(d, |v: &DVector<f64>| &a * v, None, &cfg).map_err(|e| e.to_string());
    let (x, y) = (run()?, run()?);
    if x.value.to_bits() != y.value.to_bits() || x.vector != y.vector {
        return Err("Lanczos not reproducible".into());
    }
    let t = random_tables(&mut r, 4);
    let init = [2.0 - 1e-5, 1e-5, 1e-5, 1e-5];
    let o1 = occupation_optimize(&t, 2, &init, &OccupationConfig::default()).map_err(|e| e.to_string())?;
    let o2 = occupation_optimize(&t, 2, &init, &OccupationConfig::default()).map_err(|e| e.to_string())?;
    if o1.n != o2.n || o1.mu.to_bits() != o2.mu.to_bits() {
        return Err("occupation optimizer not reproducible".into());
    }
    Ok(())
}

pub const INVARIANTS: [(&str, fn(u64) -> Check); 6] = [
    ("N-representability bounds", check_occupation_bounds),
    ("trace sum rules", check_trace_rules),
    ("kernel symmetry", check_kernel_symmetry),
    ("hermiticity", check_hermiticity),
    ("uncoupled factorization", check_uncoupled_factorization),
    ("determinism", check_determinism),
];
