//! The dressed-orbital construction. An N-electron problem coupled to one
//! cavity mode becomes an auxiliary problem of N polaritons living on
//! z = (x, q). All coupling enters through the one- and two-body kernels, so
//! the orthogonal coordinate transform itself is never built.
//!
//! Basis layout is x-major: z = ix·B + iq, with B the photon grid size (or the
//! photon number cutoff on the lattice).

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::hamiltonian::{csr_from_dense, LocalKernel, OrbitalHamiltonian};
use crate::linalg::sorted_eigen;
use crate::model::{
    kinetic_matrix, lattice_coupling_operators, lattice_one_body_matrix, CavityMode, Grid1D, GridModel,
    LatticeModel, ModelSpec, Operator, ProductTerm,
};

/// How the auxiliary basis is laid out.
#[derive(Debug, Clone)]
pub enum Layout {
    Grid { x: Grid1D, q: Option<Grid1D> },
    Lattice { n_sites: usize, photon_basis: usize },
}

#[derive(Debug, Clone)]
pub struct DressedProblem {
    pub layout: Layout,
    /// Auxiliary Hamiltonian. Its constant already holds the nuclear
    /// repulsion and the −(N−1)Σω/2 bookkeeping shift, so functional values
    /// are physical energies.
    pub hamiltonian: OrbitalHamiltonian,
    pub n_electrons: usize,
    pub modes: Vec<CavityMode>,
    /// (N−1)Σ_α ω_α/2
    pub zero_point_shift: f64,
    /// Electronic one-body block h_x (no coupling terms).
    pub electronic: DMatrix<f64>,
    /// Photonic one-body block h_q of a single polariton.
    pub photonic: DMatrix<f64>,
    /// Electronic coordinate for every x index.
    pub x_coords: Vec<f64>,
}

impl DressedProblem {
    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn n_x(&self) -> usize {
        self.x_coords.len()
    }

    pub fn block(&self) -> usize {
        self.photonic.nrows()
    }

    /// Width of one x cell, used to turn basis weights into densities.
    pub fn x_measure(&self) -> f64 {
        match &self.layout {
            Layout::Grid { x, .. } => x.spacing,
            Layout::Lattice { .. } => 1.0,
        }
    }

    pub fn is_coupled(&self) -> bool {
        !self.modes.is_empty()
    }

    /// Photonic one-body operator embedded in the full space (I_x ⊗ h_q).
    pub fn photon_operator(&self) -> CsrMatrix<f64> {
        let b = self.block();
        let mut coo = CooMatrix::new(self.dim(), self.dim());
        for x in 0..self.n_x() {
            for a in 0..b {
                for c in 0..b {
                    let v = self.photonic[(a, c)];
                    if v != 0.0 {
                        coo.push(x * b + a, x * b + c, v);
                    }
                }
            }
        }
        CsrMatrix::from(&coo)
    }
}

/// Build the auxiliary problem. Without modes this is the plain electronic problem.
pub fn dress(spec: &ModelSpec) -> Result<DressedProblem> {
    match spec {
        ModelSpec::Grid(g) => dress_grid(g),
        ModelSpec::Lattice(l) => dress_lattice(l),
    }
}

fn dress_grid(g: &GridModel) -> Result<DressedProblem> {
    g.validate()?;
    let n = g.n_electrons;
    let hx = g.electronic_one_body();
    let x = g.grid.points();
    let nx = x.len();
    let w = g.interaction.matrix(&g.grid);
    let vnn = g.nuclear_repulsion();

    let Some(mode) = g.modes.first().copied() else {
        let hamiltonian = OrbitalHamiltonian {
            one_body: csr_from_dense(&hx),
            local: Some(LocalKernel { w, block: 1 }),
            products: Vec::new(),
            n_electrons: n,
            constant: vnn,
        };
        return Ok(DressedProblem {
            layout: Layout::Grid { x: g.grid.clone(), q: None },
            hamiltonian,
            n_electrons: n,
            modes: Vec::new(),
            zero_point_shift: 0.0,
            electronic: hx,
            photonic: DMatrix::from_element(1, 1, 0.0),
            x_coords: x,
        });
    };

    let qgrid = g.photon_grid.clone().expect("validated");
    let q = qgrid.points();
    let nq = q.len();
    let mut hq = kinetic_matrix(&qgrid, g.stencil);
    for (a, &qa) in q.iter().enumerate() {
        hq[(a, a)] += 0.5 * mode.omega * mode.omega * qa * qa;
    }
    let c = mode.omega / (n as f64).sqrt();
    let lam = mode.lambda;
    let d = nx * nq;

    let mut coo = CooMatrix::new(d, d);
    for i in 0..nx {
        for j in 0..nx {
            let v = hx[(i, j)];
            if v != 0.0 {
                for a in 0..nq {
                    coo.push(i * nq + a, j * nq + a, v);
                }
            }
        }
        for a in 0..nq {
            for b in 0..nq {
                let mut v = hq[(a, b)];
                if a == b {
                    v += -c * lam * q[a] * x[i] + 0.5 * lam * lam * x[i] * x[i];
                }
                if v != 0.0 {
                    coo.push(i * nq + a, i * nq + b, v);
                }
            }
        }
    }

    let wd = DMatrix::from_fn(nx, nx, |i, j| w[(i, j)] + lam * lam * x[i] * x[j]);
    let mut products = Vec::new();
    if lam != 0.0 {
        let qd: Vec<f64> = (0..d).map(|z| q[z % nq]).collect();
        let xd: Vec<f64> = (0..d).map(|z| x[z / nq]).collect();
        let qo = Operator::Diagonal(qd);
        let xo = Operator::Diagonal(xd);
        products.push(ProductTerm { coef: -c * lam, a: qo.clone(), b: xo.clone() });
        products.push(ProductTerm { coef: -c * lam, a: xo, b: qo });
    }
    let shift = (n as f64 - 1.0) * mode.omega / 2.0;
    let hamiltonian = OrbitalHamiltonian {
        one_body: CsrMatrix::from(&coo),
        local: Some(LocalKernel { w: wd, block: nq }),
        products,
        n_electrons: n,
        constant: vnn - shift,
    };
    Ok(DressedProblem {
        layout: Layout::Grid { x: g.grid.clone(), q: Some(qgrid) },
        hamiltonian,
        n_electrons: n,
        modes: vec![mode],
        zero_point_shift: shift,
        electronic: hx,
        photonic: hq,
        x_coords: x,
    })
}

fn dress_lattice(l: &LatticeModel) -> Result<DressedProblem> {
    l.validate()?;
    let h = lattice_one_body_matrix(l)?;
    let bph = l.photon_basis;
    let photonic = DMatrix::from_fn(bph, bph, |a, b| if a == b { l.mode.omega * (a as f64 + 0.5) } else { 0.0 });
    let shift = (l.n_electrons as f64 - 1.0) * l.mode.omega / 2.0;
    let hamiltonian = OrbitalHamiltonian {
        one_body: csr_from_dense(&h),
        local: None,
        products: lattice_coupling_operators(l),
        n_electrons: l.n_electrons,
        constant: -shift,
    };
    Ok(DressedProblem {
        layout: Layout::Lattice { n_sites: l.n_sites, photon_basis: bph },
        hamiltonian,
        n_electrons: l.n_electrons,
        modes: vec![l.mode],
        zero_point_shift: shift,
        electronic: l.electronic_matrix(),
        photonic,
        x_coords: l.positions(),
    })
}

/// One independent-particle orbital of the combined space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpLabel {
    pub energy: f64,
    /// Index of the electronic factor (0-based) in the uncoupled decomposition.
    pub electronic: usize,
    /// Index of the photonic factor.
    pub photonic: usize,
}

/// Independent-particle basis: the `count` lowest eigenvectors of the
/// dressed one-body operator, found in the product space of the lowest
/// `n_e` electronic and `n_p` photonic eigenvectors (coupling added there).
pub struct IpBasis {
    pub orbitals: DMatrix<f64>,
    pub energies: Vec<f64>,
    pub electronic_energies: Vec<f64>,
    pub photonic_energies: Vec<f64>,
    /// Dominant product label of every orbital.
    pub labels: Vec<IpLabel>,
}

pub fn ip_basis(problem: &DressedProblem, count: usize) -> Result<IpBasis> {
    let d = problem.dim();
    if count == 0 || count > d {
        return Err(Error::invalid(format!("basis size {count} outside 1..={d}")));
    }
    let nx = problem.n_x();
    let b = problem.block();
    let (ee, ve) = sorted_eigen(&problem.electronic);
    let (ep, vp) = sorted_eigen(&problem.photonic);
    let ne = nx.min(count + 4);
    let np = b.min(count + 4);

    let mut cols = Vec::with_capacity(ne * np);
    let mut pairs = Vec::with_capacity(ne * np);
    for i in 0..ne {
        for a in 0..np {
            let mut v = DVector::zeros(d);
            for x in 0..nx {
                let e = ve[(x, i)];
                if e == 0.0 {
                    continue;
                }
                for q in 0..b {
                    v[x * b + q] = e * vp[(q, a)];
                }
            }
            cols.push(v);
            pairs.push((i, a));
        }
    }
    let basis = DMatrix::from_columns(&cols);
    let hb = &problem.hamiltonian.one_body * &basis;
    let small = basis.transpose() * hb;
    let (vals, vecs) = sorted_eigen(&small);
    let coeffs = vecs.columns(0, count).clone_owned();
    let mut orbitals = &basis * &coeffs;
    crate::linalg::fix_signs(&mut orbitals);
    let labels = (0..count)
        .map(|k| {
            let mut best = 0;
            for r in 0..coeffs.nrows() {
                if coeffs[(r, k)].abs() > coeffs[(best, k)].abs() {
                    best = r;
                }
            }
            IpLabel { energy: vals[k], electronic: pairs[best].0, photonic: pairs[best].1 }
        })
        .collect();
    Ok(IpBasis {
        orbitals,
        energies: vals.iter().take(count).copied().collect(),
        electronic_energies: ee.iter().copied().collect(),
        photonic_energies: ep.iter().copied().collect(),
        labels,
    })
}

/// Polaritonic 1RDM Σ_i n_i u_i u_iᵀ in basis-vector units (trace N).
pub fn polariton_1rdm(u: &DMatrix<f64>, n: &[f64]) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(u.nrows(), u.nrows());
    for (i, &ni) in n.iter().enumerate() {
        let c = u.column(i);
        g.ger(ni, &c, &c, 1.0);
    }
    g
}

/// Electronic 1RDM γ_e(x, x′) = Σ_q γ(xq, x′q).
pub fn electronic_1rdm(gamma: &DMatrix<f64>, block: usize) -> DMatrix<f64> {
    let nx = gamma.nrows() / block;
    DMatrix::from_fn(nx, nx, |x, y| (0..block).map(|q| gamma[(x * block + q, y * block + q)]).sum())
}

/// γ_e directly from orbitals without forming the full γ.
pub fn electronic_1rdm_from_orbitals(u: &DMatrix<f64>, n: &[f64], block: usize) -> DMatrix<f64> {
    let nx = u.nrows() / block;
    let mut g = DMatrix::zeros(nx, nx);
    for (i, &ni) in n.iter().enumerate() {
        if ni == 0.0 {
            continue;
        }
        let m = DMatrix::from_fn(nx, block, |x, q| u[(x * block + q, i)]);
        g += (&m * m.transpose()) * ni;
    }
    g
}

/// Auxiliary photonic 1RDM γ_p(q, q′) = Σ_x γ(xq, xq′). Diagnostic only.
pub fn photonic_1rdm(gamma: &DMatrix<f64>, block: usize) -> DMatrix<f64> {
    let nx = gamma.nrows() / block;
    DMatrix::from_fn(block, block, |a, b| (0..nx).map(|x| gamma[(x * block + a, x * block + b)]).sum())
}

/// Natural occupations sorted descending.
pub fn natural_occupations(gamma: &DMatrix<f64>) -> Vec<f64> {
    let (vals, _) = sorted_eigen(gamma);
    vals.iter().rev().copied().collect()
}

/// E_ph = ⟨Ĥ′_ph⟩ − (N−1)Σω/2.
pub fn photon_energy(h_ph_expectation: f64, n_electrons: usize, modes: &[CavityMode]) -> f64 {
    h_ph_expectation - (n_electrons as f64 - 1.0) * modes.iter().map(|m| m.omega / 2.0).sum::<f64>()
}

/// N_ph = ⟨ĥ′_ph⟩/ω − N/2, clipped at zero when only round-off negative.
pub fn mode_occupation(h_ph_expectation: f64, omega: f64, n_electrons: usize) -> Result<f64> {
    let v = h_ph_expectation / omega - n_electrons as f64 / 2.0;
    if v < -1e-10 {
        if v < -1e-6 {
            return Err(Error::Invariant(format!("negative mode occupation {v:.3e}")));
        }
        return Ok(0.0);
    }
    Ok(v.max(0.0))
}

/// ⟨Σ_a ĥ′_ph(a)⟩ = Tr(h_ph γ) for a polaritonic 1RDM.
pub fn photon_expectation(problem: &DressedProblem, gamma: &DMatrix<f64>) -> f64 {
    let op = problem.photon_operator();
    let mut s = 0.0;
    for (r, c, v) in op.triplet_iter() {
        s += v * gamma[(c, r)];
    }
    s
}

/// Electron density ρ(x) from the electronic 1RDM (integrates to N with the x measure).
pub fn electron_density(problem: &DressedProblem, gamma_e: &DMatrix<f64>) -> Vec<f64> {
    let dx = problem.x_measure();
    (0..gamma_e.nrows()).map(|x| gamma_e[(x, x)] / dx).collect()
}
