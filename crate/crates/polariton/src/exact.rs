//! Exact ground states used as the oracle for every approximate method.
//!
//! The lattice solver works in the physical picture: Slater determinants of
//! 2·B_m spin orbitals times photon number states. The grid solver works in
//! the dressed picture for two polaritons, where the singlet spatial wave
//! function is a symmetric D×D matrix.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::dressed::{electronic_1rdm, DressedProblem};
use crate::error::{Error, Result};
use crate::linalg::{lanczos_lowest, sorted_eigen, LanczosConfig};
use crate::model::{photon_displacement_matrix, LatticeModel, Operator};

/// Determinant basis. Spin orbital s = 2·site + spin (spin 0 = up).
/// Configurations are bitmasks enumerated in increasing lexicographic order
/// of their sorted occupied index lists.
#[derive(Debug, Clone)]
pub struct CIBasis {
    pub n_sites: usize,
    pub n_electrons: usize,
    pub photon_basis: usize,
    pub configurations: Vec<u64>,
}

impl CIBasis {
    pub fn new(n_sites: usize, n_electrons: usize, photon_basis: usize) -> Result<Self> {
        let m = 2 * n_sites;
        if m > 64 {
            return Err(Error::invalid("at most 32 sites fit the bitmask encoding"));
        }
        if n_electrons > m {
            return Err(Error::invalid("more electrons than spin orbitals"));
        }
        let mut configurations = Vec::new();
        let mut idx: Vec<usize> = (0..n_electrons).collect();
        loop {
            configurations.push(idx.iter().fold(0u64, |acc, &s| acc | (1u64 << s)));
            // next combination in lexicographic order
            let mut i = n_electrons;
            loop {
                if i == 0 {
                    return Ok(Self { n_sites, n_electrons, photon_basis, configurations });
                }
                i -= 1;
                if idx[i] < m - n_electrons + i {
                    break;
                }
                if i == 0 {
                    return Ok(Self { n_sites, n_electrons, photon_basis, configurations });
                }
            }
            idx[i] += 1;
            for j in i + 1..n_electrons {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }

    pub fn electron_dim(&self) -> usize {
        self.configurations.len()
    }

    pub fn dim(&self) -> usize {
        self.electron_dim() * self.photon_basis
    }

    /// Twice the spin projection, N↑ − N↓.
    pub fn spin_projection(config: u64) -> i32 {
        let up = (config & 0x5555_5555_5555_5555).count_ones() as i32;
        let down = (config & 0xAAAA_AAAA_AAAA_AAAA).count_ones() as i32;
        up - down
    }

    /// Configurations with N↑ = N↓.
    pub fn sz_zero(&self) -> Vec<u64> {
        self.configurations.iter().copied().filter(|&c| Self::spin_projection(c) == 0).collect()
    }
}

/// c†_a c_b acting on a determinant: returns the new configuration and sign.
fn hop(config: u64, a: usize, b: usize) -> Option<(u64, f64)> {
    if config & (1 << b) == 0 {
        return None;
    }
    let c1 = config & !(1 << b);
    if c1 & (1 << a) != 0 {
        return None;
    }
    let below = |c: u64, s: usize| (c & ((1u64 << s) - 1)).count_ones();
    let parity = below(config, b) + below(c1, a);
    let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
    Some((c1 | (1 << a), sign))
}

#[derive(Debug, Clone)]
pub struct LatticeGroundState {
    pub energy: f64,
    /// Coefficients over the Sz = 0 sector, index = config·B_ph + α.
    pub vector: DVector<f64>,
    pub sector: Vec<u64>,
    pub photon_basis: usize,
    pub gamma_e: DMatrix<f64>,
    pub photon_number: f64,
    /// Set when the gap to the next state in the sector is below 1e−10.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ExactConfig {
    pub dimension_cap: usize,
    pub dense_below: usize,
    pub lanczos: LanczosConfig,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            dimension_cap: 10_000_000,
            dense_below: 1500,
            lanczos: LanczosConfig { krylov_dim: 60, max_restarts: 400, tolerance: 1e-9, seed: 7 },
        }
    }
}

/// Physical lattice Hamiltonian H = Σ h_ij c†c + ω(a†a + ½) − ωλ X p + ½λ² X²
/// restricted to the Sz = 0 sector, where X = Σ_i x_i n̂_i.
pub fn lattice_hamiltonian(model: &LatticeModel, sector: &[u64]) -> CsrMatrix<f64> {
    let bph = model.photon_basis;
    let x = model.positions();
    let h = model.electronic_matrix();
    let p = photon_displacement_matrix(bph, model.mode.omega);
    let (om, lam) = (model.mode.omega, model.mode.lambda);
    let lookup: std::collections::HashMap<u64, usize> = sector.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let dim = sector.len() * bph;
    let mut coo = CooMatrix::new(dim, dim);
    for (ci, &c) in sector.iter().enumerate() {
        let dipole: f64 = (0..2 * model.n_sites).filter(|&s| c & (1 << s) != 0).map(|s| x[s / 2]).sum();
        let mut onsite = 0.0;
        for s in 0..2 * model.n_sites {
            if c & (1 << s) != 0 {
                onsite += h[(s / 2, s / 2)];
            }
        }
        for a in 0..bph {
            let r = ci * bph + a;
            coo.push(r, r, onsite + om * (a as f64 + 0.5) + 0.5 * lam * lam * dipole * dipole);
            for b in 0..bph {
                if p[(a, b)] != 0.0 && dipole != 0.0 {
                    coo.push(r, ci * bph + b, -om * lam * dipole * p[(a, b)]);
                }
            }
        }
        for i in 0..model.n_sites {
            for j in 0..model.n_sites {
                if i == j || h[(i, j)] == 0.0 {
                    continue;
                }
                for spin in 0..2 {
                    if let Some((c2, sign)) = hop(c, 2 * i + spin, 2 * j + spin) {
                        let cj = lookup[&c2];
                        for a in 0..bph {
                            coo.push(cj * bph + a, ci * bph + a, sign * h[(i, j)]);
                        }
                    }
                }
            }
        }
    }
    CsrMatrix::from(&coo)
}

pub fn exact_lattice_ground_state(model: &LatticeModel, cfg: &ExactConfig) -> Result<LatticeGroundState> {
    model.validate()?;
    let basis = CIBasis::new(model.n_sites, model.n_electrons, model.photon_basis)?;
    if basis.dim() > cfg.dimension_cap {
        return Err(Error::DimensionCap { dim: basis.dim(), cap: cfg.dimension_cap });
    }
    let sector = basis.sz_zero();
    let h = lattice_hamiltonian(model, &sector);
    let dim = h.nrows();
    let (energy, vector, gap) = if dim <= cfg.dense_below {
        let mut d = DMatrix::zeros(dim, dim);
        for (r, c, v) in h.triplet_iter() {
            d[(r, c)] += *v;
        }
        let (vals, vecs) = sorted_eigen(&d);
        let gap = if dim > 1 { vals[1] - vals[0] } else { f64::INFINITY };
        (vals[0], vecs.column(0).clone_owned(), gap)
    } else {
        let r = lanczos_lowest(dim, |v| &h * v, None, &cfg.lanczos)?;
        (r.value, r.vector, r.next_value - r.value)
    };
    let bph = model.photon_basis;
    let mut gamma = DMatrix::zeros(model.n_sites, model.n_sites);
    let lookup: std::collections::HashMap<u64, usize> = sector.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut nph = 0.0;
    for (ci, &c) in sector.iter().enumerate() {
        for a in 0..bph {
            let w = vector[ci * bph + a];
            nph += a as f64 * w * w;
        }
        for i in 0..model.n_sites {
            for j in 0..model.n_sites {
                for spin in 0..2 {
                    if let Some((c2, sign)) = hop(c, 2 * i + spin, 2 * j + spin) {
                        let cj = lookup[&c2];
                        for a in 0..bph {
                            gamma[(i, j)] += sign * vector[cj * bph + a] * vector[ci * bph + a];
                        }
                    }
                }
            }
        }
    }
    Ok(LatticeGroundState {
        energy,
        vector,
        sector,
        photon_basis: bph,
        gamma_e: gamma,
        photon_number: nph,
        degenerate: gap.abs() < 1e-10,
    })
}

#[derive(Debug, Clone)]
pub struct GridGroundState {
    /// Physical energy ⟨Ĥ′⟩ − (N−1)ω/2 (plus nuclear repulsion).
    pub energy: f64,
    /// Symmetric singlet spatial amplitude Ψ(z₁, z₂), Σ Ψ² = 1.
    pub psi: DMatrix<f64>,
    pub residual: f64,
}

/// Full two-body kernel W′(z, z′) of a problem with only diagonal product terms.
fn dense_two_body(problem: &DressedProblem) -> Result<DMatrix<f64>> {
    let ham = &problem.hamiltonian;
    let d = ham.dim();
    let mut w = match &ham.local {
        Some(l) => DMatrix::from_fn(d, d, |z, zp| l.w[(z / l.block, zp / l.block)]),
        None => DMatrix::zeros(d, d),
    };
    for t in &ham.products {
        let (Operator::Diagonal(a), Operator::Diagonal(b)) = (&t.a, &t.b) else {
            return Err(Error::invalid("the grid oracle needs position-diagonal couplings"));
        };
        for z in 0..d {
            for zp in 0..d {
                w[(z, zp)] += 0.5 * t.coef * (a[z] * b[zp] + b[z] * a[zp]);
            }
        }
    }
    Ok(w)
}

/// Ground state of the two-polariton dressed Hamiltonian
/// H′Ψ = h′Ψ + Ψh′ + W′∘Ψ with a matrix-free restarted Lanczos.
pub fn exact_grid_ground_state(problem: &DressedProblem, cfg: &LanczosConfig, memory_cap: usize) -> Result<GridGroundState> {
    if problem.n_electrons != 2 {
        return Err(Error::invalid("the grid oracle handles exactly two electrons"));
    }
    let d = problem.dim();
    let bytes = d * d * 8 * (cfg.krylov_dim + 4);
    if bytes > memory_cap {
        return Err(Error::DimensionCap { dim: d * d, cap: memory_cap / (8 * (cfg.krylov_dim + 4)) });
    }
    let w = dense_two_body(problem)?;
    let h = &problem.hamiltonian.one_body;
    let apply = |v: &DVector<f64>| {
        let psi = DMatrix::from_column_slice(d, d, v.as_slice());
        // hΨ + Ψh, valid for any Ψ so the operator stays self-adjoint
        // when round-off breaks the exchange symmetry
        let a: DMatrix<f64> = h * &psi;
        let b: DMatrix<f64> = h * psi.transpose();
        let mut out = &a + b.transpose();
        out += psi.component_mul(&w);
        DVector::from_column_slice(out.as_slice())
    };
    // product of the lowest one-body state with itself
    let start = {
        let small = DMatrix::from_fn(d, d, |i, j| {
            h.get_entry(i, j).map(|e| e.into_value()).unwrap_or(0.0)
        });
        let (_, vecs) = sorted_eigen(&small);
        let phi = vecs.column(0);
        let psi = &phi * phi.transpose();
        DVector::from_column_slice(psi.as_slice())
    };
    let r = lanczos_lowest(d * d, apply, Some(start), cfg)?;
    let mut psi = DMatrix::from_column_slice(d, d, r.vector.as_slice());
    psi = (&psi + psi.transpose()) * 0.5;
    psi /= psi.norm();
    Ok(GridGroundState { energy: r.value + problem.hamiltonian.constant, psi, residual: r.residual })
}

/// Observables of a two-polariton grid state.
#[derive(Debug, Clone)]
pub struct GridObservables {
    pub gamma: DMatrix<f64>,
    pub gamma_e: DMatrix<f64>,
    pub electron_density: Vec<f64>,
    pub photon_density: Vec<f64>,
    pub mode_occupation: f64,
}

pub fn exact_observables(problem: &DressedProblem, state: &GridGroundState) -> Result<GridObservables> {
    let gamma = &state.psi * state.psi.transpose() * 2.0;
    let b = problem.block();
    let gamma_e = electronic_1rdm(&gamma, b);
    let electron_density = crate::dressed::electron_density(problem, &gamma_e);
    let gp = crate::dressed::photonic_1rdm(&gamma, b);
    let dq = match &problem.layout {
        crate::dressed::Layout::Grid { q: Some(q), .. } => q.spacing,
        _ => 1.0,
    };
    let photon_density = (0..b).map(|a| gp[(a, a)] / dq).collect();
    let mode_occupation = match problem.modes.first() {
        Some(m) => {
            let e = crate::dressed::photon_expectation(problem, &gamma);
            crate::dressed::mode_occupation(e, m.omega, problem.n_electrons)?
        }
        None => 0.0,
    };
    Ok(GridObservables { gamma, gamma_e, electron_density, photon_density, mode_occupation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CavityMode;

    #[test]
    fn determinant_count_is_binomial() {
        let b = CIBasis::new(6, 4, 5).unwrap();
        assert_eq!(b.electron_dim(), 495);
        assert_eq!(b.dim(), 2475);
        assert_eq!(b.sz_zero().len(), 225);
    }

    #[test]
    fn configurations_are_sorted_and_unique() {
        let b = CIBasis::new(4, 3, 1).unwrap();
        assert_eq!(b.electron_dim(), 56);
        let mut c = b.configurations.clone();
        c.dedup();
        assert_eq!(c.len(), 56);
    }

    #[test]
    fn non_interacting_lattice_is_separable() {
        let model = LatticeModel::new(6, 0.5, vec![0.0; 6], CavityMode::new(0.4, 0.0).unwrap(), 3, 4).unwrap();
        let gs = exact_lattice_ground_state(&model, &ExactConfig::default()).unwrap();
        let (e, _) = sorted_eigen(&model.electronic_matrix());
        let expected = 2.0 * (e[0] + e[1]) + 0.2;
        assert!((gs.energy - expected).abs() < 1e-12);
        assert!(gs.photon_number.abs() < 1e-14);
        assert!((gs.gamma_e.trace() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn coupled_grid_oracle_matches_dense_diagonalization() {
        use crate::dressed::dress;
        use crate::model::{Grid1D, GridModel, ModelSpec, SoftInteraction, SoftPotential, StencilOrder};
        let spec = GridModel {
            grid: Grid1D::from_length(4.0, 0.5).unwrap(),
            stencil: StencilOrder::Fourth,
            potential: SoftPotential::atom(2.0, 1.0).unwrap(),
            interaction: SoftInteraction::new(1.0).unwrap(),
            modes: vec![CavityMode::from_g_over_omega(0.5535, 0.75).unwrap()],
            n_electrons: 2,
            photon_grid: Some(Grid1D::from_length(4.0, 1.0).unwrap()),
        };
        let p = dress(&ModelSpec::Grid(spec)).unwrap();
        let d = p.dim();
        let w = dense_two_body(&p).unwrap();
        let h = DMatrix::from_fn(d, d, |i, j| p.hamiltonian.one_body.get_entry(i, j).map_or(0.0, |e| e.into_value()));
        // H = h⊗1 + 1⊗h + diag(W) on the symmetric pair space, built densely
        let pairs: Vec<(usize, usize)> = (0..d).flat_map(|a| (a..d).map(move |b| (a, b))).collect();
        let norm = |a: usize, b: usize| if a == b { 0.5 } else { std::f64::consts::FRAC_1_SQRT_2 };
        let mut big = DMatrix::zeros(pairs.len(), pairs.len());
        for (r, &(a, b)) in pairs.iter().enumerate() {
            for (c, &(e, f)) in pairs.iter().enumerate() {
                // ⟨ab|H|ef⟩ for symmetrized, normalized pair states
                let mut v = 0.0;
                for &(x, y) in &[(a, b), (b, a)] {
                    for &(u, t) in &[(e, f), (f, e)] {
                        let mut m = 0.0;
                        if y == t {
                            m += h[(x, u)];
                        }
                        if x == u {
                            m += h[(y, t)];
                        }
                        if x == u && y == t {
                            m += w[(x, y)];
                        }
                        v += m;
                    }
                }
                big[(r, c)] = v * norm(a, b) * norm(e, f);
            }
        }
        let (vals, _) = sorted_eigen(&big);
        let expected = vals[0] + p.hamiltonian.constant;
        let gs = exact_grid_ground_state(&p, &LanczosConfig::default(), 1 << 30).unwrap();
        assert!((gs.energy - expected).abs() < 1e-8, "{} vs {}", gs.energy, expected);
    }
}
