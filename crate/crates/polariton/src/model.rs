//! Physical ingredients: grids, soft-Coulomb kernels, cavity modes and the
//! tight-binding lattice, together with their dressed (polaritonic) counterparts.

use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};

/// Uniform one-dimensional grid with zero boundary values outside the box.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub n_points: usize,
    pub spacing: f64,
    pub center: f64,
}

impl Grid1D {
    pub fn new(n_points: usize, spacing: f64, center: f64) -> Result<Self> {
        if n_points < 3 {
            return Err(Error::invalid("grid needs at least 3 points"));
        }
        if !(spacing > 0.0) {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        Ok(Self { n_points, spacing, center })
    }

    /// Grid covering `[center - length/2, center + length/2]` including both ends.
    pub fn from_length(length: f64, spacing: f64) -> Result<Self> {
        if !(length > 0.0) || !(spacing > 0.0) {
            return Err(Error::invalid("grid length and spacing must be positive"));
        }
        let n = (length / spacing).round() as usize + 1;
        Self::new(n, spacing, 0.0)
    }

    pub fn point(&self, j: usize) -> f64 {
        self.center + (j as f64 - (self.n_points as f64 - 1.0) / 2.0) * self.spacing
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.point(j)).collect()
    }

    pub fn length(&self) -> f64 {
        (self.n_points - 1) as f64 * self.spacing
    }
}

/// Accuracy order of the central finite-difference second derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilOrder {
    Second,
    Fourth,
    Sixth,
    Eighth,
}

impl Default for StencilOrder {
    fn default() -> Self {
        StencilOrder::Fourth
    }
}

impl StencilOrder {
    pub fn from_accuracy(order: usize) -> Result<Self> {
        match order {
            2 => Ok(Self::Second),
            4 => Ok(Self::Fourth),
            6 => Ok(Self::Sixth),
            8 => Ok(Self::Eighth),
            _ => Err(Error::invalid(format!("unsupported stencil order {order}"))),
        }
    }

    pub fn accuracy(self) -> usize {
        match self {
            Self::Second => 2,
            Self::Fourth => 4,
            Self::Sixth => 6,
            Self::Eighth => 8,
        }
    }

    /// Coefficients c_0, c_1, ... of the symmetric stencil for d²/dx² (unit spacing).
    pub fn coefficients(self) -> &'static [f64] {
        match self {
            Self::Second => &[-2.0, 1.0],
            Self::Fourth => &[-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0],
            Self::Sixth => &[-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0],
            Self::Eighth => &[-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0],
        }
    }
}

/// Dense kinetic-energy matrix −½ d²/dx² with Dirichlet walls.
pub fn kinetic_matrix(grid: &Grid1D, order: StencilOrder) -> DMatrix<f64> {
    let n = grid.n_points;
    let c = order.coefficients();
    let scale = -0.5 / (grid.spacing * grid.spacing);
    DMatrix::from_fn(n, n, |i, j| {
        let k = i.abs_diff(j);
        if k < c.len() {
            scale * c[k]
        } else {
            0.0
        }
    })
}

/// Sum of soft-Coulomb wells −Z/√((x−R)²+ε²).
#[derive(Debug, Clone, PartialEq)]
pub struct SoftPotential {
    pub charges: Vec<(f64, f64)>,
    pub softening: f64,
}

impl SoftPotential {
    pub fn new(charges: Vec<(f64, f64)>, softening: f64) -> Result<Self> {
        if !(softening > 0.0) {
            return Err(Error::invalid("potential softening must be positive"));
        }
        Ok(Self { charges, softening })
    }

    /// One nucleus of charge `z` at the origin.
    pub fn atom(z: f64, softening: f64) -> Result<Self> {
        Self::new(vec![(z, 0.0)], softening)
    }

    /// Two unit charges at ±bond/2.
    pub fn diatomic(bond: f64, softening: f64) -> Result<Self> {
        Self::new(vec![(1.0, -bond / 2.0), (1.0, bond / 2.0)], softening)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let e2 = self.softening * self.softening;
        self.charges
            .iter()
            .map(|&(z, r)| -z / ((x - r) * (x - r) + e2).sqrt())
            .sum()
    }

    /// Soft-Coulomb repulsion between the nuclei themselves.
    pub fn nuclear_repulsion(&self, interaction: &SoftInteraction) -> f64 {
        let mut e = 0.0;
        for (a, &(za, ra)) in self.charges.iter().enumerate() {
            for &(zb, rb) in &self.charges[a + 1..] {
                e += za * zb * interaction.eval(ra, rb);
            }
        }
        e
    }
}

/// Soft-Coulomb electron–electron interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftInteraction {
    pub softening: f64,
}

impl SoftInteraction {
    pub fn new(softening: f64) -> Result<Self> {
        if !(softening > 0.0) {
            return Err(Error::invalid("interaction softening must be positive"));
        }
        Ok(Self { softening })
    }

    pub fn eval(&self, x: f64, xp: f64) -> f64 {
        soft_interaction(x, xp, self.softening)
    }

    pub fn matrix(&self, grid: &Grid1D) -> DMatrix<f64> {
        let x = grid.points();
        DMatrix::from_fn(x.len(), x.len(), |i, j| self.eval(x[i], x[j]))
    }
}

pub fn soft_interaction(x: f64, xp: f64, softening: f64) -> f64 {
    let d = x - xp;
    1.0 / (d * d + softening * softening).sqrt()
}

/// A single cavity mode in dipole approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityMode {
    pub omega: f64,
    pub lambda: f64,
}

impl CavityMode {
    pub fn new(omega: f64, lambda: f64) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::invalid("mode frequency must be positive"));
        }
        if !(lambda >= 0.0) {
            return Err(Error::invalid("coupling must be non-negative"));
        }
        Ok(Self { omega, lambda })
    }

    /// Build from the dimensionless ratio g/ω with g = λ√(ω/2).
    pub fn from_g_over_omega(omega: f64, g_over_omega: f64) -> Result<Self> {
        Self::new(omega, g_over_omega * (2.0 * omega).sqrt())
    }

    pub fn g_over_omega(&self) -> f64 {
        self.lambda / (2.0 * self.omega).sqrt()
    }
}

/// v(x) + Σ_α [½ω²q² − (ω/√N) q λ x + ½(λx)²].
pub fn dressed_potential(
    x: f64,
    q: &[f64],
    v: &SoftPotential,
    modes: &[CavityMode],
    n_electrons: usize,
) -> f64 {
    assert_eq!(q.len(), modes.len(), "one displacement per mode");
    let sn = (n_electrons as f64).sqrt();
    let mut e = v.eval(x);
    for (m, &qa) in modes.iter().zip(q) {
        let lx = m.lambda * x;
        e += 0.5 * m.omega * m.omega * qa * qa - m.omega / sn * qa * lx + 0.5 * lx * lx;
    }
    e
}

/// w(x,x′) + Σ_α [−(ω/√N)(q λ x′ + q′ λ x) + λ² x x′].
pub fn dressed_interaction(
    x: f64,
    q: &[f64],
    xp: f64,
    qp: &[f64],
    w: &SoftInteraction,
    modes: &[CavityMode],
    n_electrons: usize,
) -> f64 {
    let sn = (n_electrons as f64).sqrt();
    let mut e = w.eval(x, xp);
    for ((m, &qa), &qb) in modes.iter().zip(q).zip(qp) {
        e += -m.omega / sn * (qa * m.lambda * xp + qb * m.lambda * x) + m.lambda * m.lambda * x * xp;
    }
    e
}

/// Matrix of p = (a† + a)/√(2ω) in the photon-number basis.
pub fn photon_displacement_matrix(b_ph: usize, omega: f64) -> DMatrix<f64> {
    let s = 1.0 / (2.0 * omega).sqrt();
    DMatrix::from_fn(b_ph, b_ph, |a, b| {
        if a == b + 1 {
            (a as f64).sqrt() * s
        } else if b == a + 1 {
            (b as f64).sqrt() * s
        } else {
            0.0
        }
    })
}

/// Tight-binding chain coupled to one photon mode.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeModel {
    pub n_sites: usize,
    pub hopping: f64,
    pub onsite: Vec<f64>,
    pub mode: CavityMode,
    pub photon_basis: usize,
    pub n_electrons: usize,
}

impl LatticeModel {
    pub fn new(
        n_sites: usize,
        hopping: f64,
        onsite: Vec<f64>,
        mode: CavityMode,
        photon_basis: usize,
        n_electrons: usize,
    ) -> Result<Self> {
        let model = Self { n_sites, hopping, onsite, mode, photon_basis, n_electrons };
        model.validate()?;
        Ok(model)
    }

    /// Hopping from a lattice spacing, t = 1/(2Δx²).
    pub fn hopping_from_spacing(spacing: f64) -> f64 {
        0.5 / (spacing * spacing)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::invalid("lattice needs at least 2 sites"));
        }
        if self.onsite.len() != self.n_sites {
            return Err(Error::invalid(format!(
                "onsite has {} entries but the lattice has {} sites",
                self.onsite.len(),
                self.n_sites
            )));
        }
        if !(self.hopping > 0.0) {
            return Err(Error::invalid("hopping must be positive"));
        }
        if self.photon_basis == 0 {
            return Err(Error::invalid("photon basis must hold at least the vacuum"));
        }
        if self.n_electrons == 0 || self.n_electrons % 2 != 0 {
            return Err(Error::invalid("electron count must be even and positive"));
        }
        if self.n_electrons > 2 * self.n_sites {
            return Err(Error::invalid("more electrons than spin orbitals"));
        }
        Ok(())
    }

    /// Site coordinates relative to the lattice middle.
    pub fn positions(&self) -> Vec<f64> {
        let x0 = (self.n_sites as f64 - 1.0) / 2.0;
        (0..self.n_sites).map(|i| i as f64 - x0).collect()
    }

    /// Electronic tight-binding matrix (no photons, no dipole self-energy).
    pub fn electronic_matrix(&self) -> DMatrix<f64> {
        let n = self.n_sites;
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.onsite[i]
            } else if i.abs_diff(j) == 1 {
                -self.hopping
            } else {
                0.0
            }
        })
    }

    pub fn combined_dim(&self) -> usize {
        self.n_sites * self.photon_basis
    }

    pub fn combined_index(&self, site: usize, photon: usize) -> usize {
        site * self.photon_basis + photon
    }

    /// Strength of the bilinear x·p coupling for one dressed particle, ω/√N.
    pub fn dressed_bilinear(&self) -> f64 {
        self.mode.omega / (self.n_electrons as f64).sqrt()
    }
}

/// Dressed one-body matrix over the combined (site, photon) index.
///
/// The bilinear term uses the displacement matrix p of each dressed particle,
/// −(ω/√N) λ x_i p_{αβ}, which is what the dressing of −ωλ p X produces.
pub fn lattice_one_body_matrix(model: &LatticeModel) -> Result<DMatrix<f64>> {
    model.validate()?;
    let bph = model.photon_basis;
    let x = model.positions();
    let p = photon_displacement_matrix(bph, model.mode.omega);
    let lam = model.mode.lambda;
    let c = model.dressed_bilinear();
    let d = model.combined_dim();
    let mut h = DMatrix::zeros(d, d);
    for i in 0..model.n_sites {
        for a in 0..bph {
            let r = model.combined_index(i, a);
            h[(r, r)] = model.onsite[i]
                + model.mode.omega * (a as f64 + 0.5)
                + 0.5 * lam * lam * x[i] * x[i];
            if i + 1 < model.n_sites {
                let s = model.combined_index(i + 1, a);
                h[(r, s)] = -model.hopping;
                h[(s, r)] = -model.hopping;
            }
            for b in 0..bph {
                if p[(a, b)] != 0.0 {
                    h[(r, model.combined_index(i, b))] += -c * lam * x[i] * p[(a, b)];
                }
            }
        }
    }
    Ok(h)
}

/// Full dressed two-body tensor w′[(r1, r2), (s1, s2)] where particle 1 goes
/// r1 → s1 and particle 2 goes r2 → s2; stored as a (D², D²) matrix.
pub fn lattice_two_body_tensor(model: &LatticeModel) -> Result<DMatrix<f64>> {
    model.validate()?;
    let d = model.combined_dim();
    let ops = lattice_coupling_operators(model);
    let mut t = DMatrix::zeros(d * d, d * d);
    for term in &ops {
        let a = term.a.to_dense();
        let b = term.b.to_dense();
        for r1 in 0..d {
            for s1 in 0..d {
                let av = a[(r1, s1)];
                if av == 0.0 {
                    continue;
                }
                for r2 in 0..d {
                    for s2 in 0..d {
                        let bv = b[(r2, s2)];
                        if bv != 0.0 {
                            t[(r1 * d + r2, s1 * d + s2)] += term.coef * av * bv;
                        }
                    }
                }
            }
        }
    }
    Ok(t)
}

/// A separable two-body term coef · A(1) ⊗ B(2).
#[derive(Debug, Clone)]
pub struct ProductTerm {
    pub coef: f64,
    pub a: Operator,
    pub b: Operator,
}

/// One-particle operator used inside separable interactions.
#[derive(Debug, Clone)]
pub enum Operator {
    Diagonal(Vec<f64>),
    Sparse(CsrMatrix<f64>),
}

impl Operator {
    pub fn dim(&self) -> usize {
        match self {
            Operator::Diagonal(v) => v.len(),
            Operator::Sparse(m) => m.nrows(),
        }
    }

    pub fn apply(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Operator::Diagonal(v) => {
                let mut out = u.clone();
                for (i, mut row) in out.row_iter_mut().enumerate() {
                    row *= v[i];
                }
                out
            }
            Operator::Sparse(m) => m * u,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Operator::Diagonal(v) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v)),
            Operator::Sparse(m) => {
                let mut d = DMatrix::zeros(m.nrows(), m.ncols());
                for (i, j, v) in m.triplet_iter() {
                    d[(i, j)] += *v;
                }
                d
            }
        }
    }
}

/// Separable pieces of the dressed lattice interaction: λ² X⊗X and
/// −(ω/√N) λ (X⊗P + P⊗X), with X the site position and P the displacement.
pub fn lattice_coupling_operators(model: &LatticeModel) -> Vec<ProductTerm> {
    let lam = model.mode.lambda;
    if lam == 0.0 {
        return Vec::new();
    }
    let bph = model.photon_basis;
    let x = model.positions();
    let xdiag: Vec<f64> = (0..model.combined_dim()).map(|r| x[r / bph]).collect();
    let p = photon_displacement_matrix(bph, model.mode.omega);
    let mut coo = CooMatrix::new(model.combined_dim(), model.combined_dim());
    for i in 0..model.n_sites {
        for a in 0..bph {
            for b in 0..bph {
                if p[(a, b)] != 0.0 {
                    coo.push(model.combined_index(i, a), model.combined_index(i, b), p[(a, b)]);
                }
            }
        }
    }
    let pop = Operator::Sparse(CsrMatrix::from(&coo));
    let xop = Operator::Diagonal(xdiag);
    let c = model.dressed_bilinear();
    vec![
        ProductTerm { coef: lam * lam, a: xop.clone(), b: xop.clone() },
        ProductTerm { coef: -c * lam, a: xop.clone(), b: pop.clone() },
        ProductTerm { coef: -c * lam, a: pop, b: xop },
    ]
}

/// Physical description of a problem before any dressing.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    Grid(GridModel),
    Lattice(LatticeModel),
}

/// Electrons on a real-space grid, optionally coupled to cavity modes.
#[derive(Debug, Clone)]
pub struct GridModel {
    pub grid: Grid1D,
    pub stencil: StencilOrder,
    pub potential: SoftPotential,
    pub interaction: SoftInteraction,
    pub modes: Vec<CavityMode>,
    pub n_electrons: usize,
    /// Photon-displacement grid used once the problem is dressed.
    pub photon_grid: Option<Grid1D>,
}

impl GridModel {
    pub fn validate(&self) -> Result<()> {
        if self.n_electrons == 0 || self.n_electrons % 2 != 0 {
            return Err(Error::invalid("electron count must be even and positive"));
        }
        if self.modes.len() > 1 {
            return Err(Error::invalid("grid problems support at most one mode"));
        }
        if !self.modes.is_empty() && self.photon_grid.is_none() {
            return Err(Error::invalid("a cavity mode needs a photon grid"));
        }
        Ok(())
    }

    /// Electronic one-body matrix t + v.
    pub fn electronic_one_body(&self) -> DMatrix<f64> {
        let mut h = kinetic_matrix(&self.grid, self.stencil);
        for (j, x) in self.grid.points().into_iter().enumerate() {
            h[(j, j)] += self.potential.eval(x);
        }
        h
    }

    pub fn nuclear_repulsion(&self) -> f64 {
        self.potential.nuclear_repulsion(&self.interaction)
    }
}
