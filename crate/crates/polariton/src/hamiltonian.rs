//! Orbital-space evaluation of one-RDM functionals of the form
//!
//! E = Σ n_i h_ii + ½ Σ n_i n_j J_ij − ½ Σ f_ij K_ij + const,   f_ij = √(n_i n_j),
//!
//! for a two-body kernel that splits into a part local in an "electronic"
//! coordinate (a dense matrix over x, constant over the remaining block index)
//! plus separable product terms. Orbitals are columns of a matrix of
//! unit-norm vectors, so grid measures are folded into the amplitudes.
//!
//! Integer occupations (2 for occupied, 0 otherwise) turn the same machinery
//! into closed-shell Hartree–Fock.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::model::ProductTerm;

/// Two-body kernel w(x, x′) acting on the slow index of z = x·block + q.
#[derive(Debug, Clone)]
pub struct LocalKernel {
    pub w: DMatrix<f64>,
    pub block: usize,
}

impl LocalKernel {
    pub fn n_x(&self) -> usize {
        self.w.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct OrbitalHamiltonian {
    pub one_body: CsrMatrix<f64>,
    pub local: Option<LocalKernel>,
    pub products: Vec<ProductTerm>,
    pub n_electrons: usize,
    /// Energy offset added to every functional value.
    pub constant: f64,
}

/// Everything about a fixed orbital set that the functional needs.
#[derive(Debug, Clone)]
pub struct Integrals {
    pub k: usize,
    /// h U, one column per orbital.
    pub hu: DMatrix<f64>,
    /// Uᵀ h U.
    pub h: DMatrix<f64>,
    /// (ii|jj)
    pub hartree: DMatrix<f64>,
    /// (ij|ji)
    pub exchange: DMatrix<f64>,
    pair_index: Vec<usize>,
    pair_potential: Option<DMatrix<f64>>,
    au: Vec<DMatrix<f64>>,
    bu: Vec<DMatrix<f64>>,
    am: Vec<DMatrix<f64>>,
    bm: Vec<DMatrix<f64>>,
}

impl Integrals {
    fn pair(&self, i: usize, j: usize) -> usize {
        self.pair_index[i * self.k + j]
    }
}

/// Müller weights √(n_i n_j); integer 2/0 occupations give HF.
pub fn mueller_weights(n: &[f64]) -> DMatrix<f64> {
    let s: Vec<f64> = n.iter().map(|&v| v.max(0.0).sqrt()).collect();
    DMatrix::from_fn(n.len(), n.len(), |i, j| s[i] * s[j])
}

fn pair_table(k: usize) -> (Vec<usize>, Vec<(usize, usize)>) {
    let mut index = vec![0; k * k];
    let mut pairs = Vec::with_capacity(k * (k + 1) / 2);
    for i in 0..k {
        for j in i..k {
            index[i * k + j] = pairs.len();
            index[j * k + i] = pairs.len();
            pairs.push((i, j));
        }
    }
    (index, pairs)
}

impl OrbitalHamiltonian {
    pub fn dim(&self) -> usize {
        self.one_body.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.one_body.ncols() != d {
            return Err(Error::invalid("one-body matrix must be square"));
        }
        if let Some(l) = &self.local {
            if l.w.ncols() != l.n_x() || l.n_x() * l.block != d {
                return Err(Error::invalid(format!(
                    "local kernel of size {}×{} with block {} does not tile dimension {d}",
                    l.w.nrows(),
                    l.w.ncols(),
                    l.block
                )));
            }
        }
        for t in &self.products {
            if t.a.dim() != d || t.b.dim() != d {
                return Err(Error::invalid("product operator dimension mismatch"));
            }
        }
        Ok(())
    }

    /// Σ_q a(x,q) b(x,q) for every x.
    fn pair_density(&self, a: &[f64], b: &[f64]) -> DVector<f64> {
        let l = self.local.as_ref().expect("local kernel");
        DVector::from_fn(l.n_x(), |x, _| {
            let s = x * l.block;
            (s..s + l.block).map(|z| a[z] * b[z]).sum()
        })
    }

    pub fn integrals(&self, u: &DMatrix<f64>) -> Integrals {
        let k = u.ncols();
        let hu = &self.one_body * u;
        let h = u.transpose() * &hu;
        let (pair_index, pairs) = pair_table(k);
        let mut hartree = DMatrix::zeros(k, k);
        let mut exchange = DMatrix::zeros(k, k);

        let pair_potential = self.local.as_ref().map(|l| {
            let mut p = DMatrix::zeros(l.n_x(), pairs.len());
            for (c, &(i, j)) in pairs.iter().enumerate() {
                let d = self.pair_density(u.column(i).as_slice(), u.column(j).as_slice());
                p.set_column(c, &d);
            }
            let v = &l.w * &p;
            for i in 0..k {
                for j in 0..k {
                    let pij = pair_index[i * k + j];
                    let pii = pair_index[i * k + i];
                    let pjj = pair_index[j * k + j];
                    hartree[(i, j)] = p.column(pii).dot(&v.column(pjj));
                    exchange[(i, j)] = p.column(pij).dot(&v.column(pij));
                }
            }
            v
        });

        let mut au = Vec::new();
        let mut bu = Vec::new();
        let mut am = Vec::new();
        let mut bm = Vec::new();
        for t in &self.products {
            let a = t.a.apply(u);
            let b = t.b.apply(u);
            let ma = u.transpose() * &a;
            let mb = u.transpose() * &b;
            for i in 0..k {
                for j in 0..k {
                    hartree[(i, j)] +=
                        t.coef * 0.5 * (ma[(i, i)] * mb[(j, j)] + ma[(j, j)] * mb[(i, i)]);
                    exchange[(i, j)] += t.coef * ma[(i, j)] * mb[(i, j)];
                }
            }
            au.push(a);
            bu.push(b);
            am.push(ma);
            bm.push(mb);
        }
        Integrals { k, hu, h, hartree, exchange, pair_index, pair_potential, au, bu, am, bm }
    }

    /// Functional value for occupations `n` and pair weights `f`.
    pub fn energy_weighted(&self, ints: &Integrals, n: &[f64], f: &DMatrix<f64>) -> f64 {
        let k = ints.k;
        let mut e = self.constant;
        for i in 0..k {
            e += n[i] * ints.h[(i, i)];
            for j in 0..k {
                e += 0.5 * n[i] * n[j] * ints.hartree[(i, j)] - 0.5 * f[(i, j)] * ints.exchange[(i, j)];
            }
        }
        e
    }

    pub fn energy(&self, ints: &Integrals, n: &[f64]) -> f64 {
        self.energy_weighted(ints, n, &mueller_weights(n))
    }

    /// Columns H¹φ_i, so that δE/δφ_i = 2 H¹φ_i.
    pub fn h1(&self, u: &DMatrix<f64>, ints: &Integrals, n: &[f64]) -> DMatrix<f64> {
        let k = ints.k;
        let d = self.dim();
        let f = mueller_weights(n);
        let mut out = DMatrix::zeros(d, k);
        let hartree_pot = self.hartree_potential(ints, n);
        for i in 0..k {
            let mut col = ints.hu.column(i).clone_owned();
            if let Some(l) = &self.local {
                for x in 0..l.n_x() {
                    for z in x * l.block..(x + 1) * l.block {
                        col[z] += hartree_pot[x] * u[(z, i)];
                    }
                }
            }
            for (s, t) in self.products.iter().enumerate() {
                let (sa, sb) = self.product_hartree_factors(ints, s, n);
                col.axpy(0.5 * t.coef * sb, &ints.au[s].column(i), 1.0);
                col.axpy(0.5 * t.coef * sa, &ints.bu[s].column(i), 1.0);
            }
            col *= n[i];
            for j in 0..k {
                let fij = f[(i, j)];
                if fij == 0.0 {
                    continue;
                }
                if let Some(l) = &self.local {
                    let v = ints.pair_potential.as_ref().unwrap();
                    let p = ints.pair(i, j);
                    for x in 0..l.n_x() {
                        let vx = v[(x, p)] * fij;
                        for z in x * l.block..(x + 1) * l.block {
                            col[z] -= vx * u[(z, j)];
                        }
                    }
                }
                for (s, t) in self.products.iter().enumerate() {
                    let c = 0.5 * t.coef * fij;
                    col.axpy(-c * ints.bm[s][(i, j)], &ints.au[s].column(j), 1.0);
                    col.axpy(-c * ints.am[s][(i, j)], &ints.bu[s].column(j), 1.0);
                }
            }
            out.set_column(i, &col);
        }
        out
    }

    /// Σ_j n_j V_jj(x).
    fn hartree_potential(&self, ints: &Integrals, n: &[f64]) -> DVector<f64> {
        match (&self.local, &ints.pair_potential) {
            (Some(l), Some(v)) => {
                let mut pot = DVector::zeros(l.n_x());
                for j in 0..ints.k {
                    pot.axpy(n[j], &v.column(ints.pair(j, j)), 1.0);
                }
                pot
            }
            _ => DVector::zeros(0),
        }
    }

    /// (Σ_j n_j A_jj, Σ_j n_j B_jj) for product term `s`.
    fn product_hartree_factors(&self, ints: &Integrals, s: usize, n: &[f64]) -> (f64, f64) {
        let mut sa = 0.0;
        let mut sb = 0.0;
        for j in 0..ints.k {
            sa += n[j] * ints.am[s][(j, j)];
            sb += n[j] * ints.bm[s][(j, j)];
        }
        (sa, sb)
    }

    /// Lagrange matrix λ_ki = ⟨φ_k|H¹φ_i⟩.
    pub fn lagrange(u: &DMatrix<f64>, h1: &DMatrix<f64>) -> DMatrix<f64> {
        u.transpose() * h1
    }

    /// The operator H¹ seen by orbital `k`, applied to an arbitrary vector.
    /// Exchange with orbital k itself is taken at the current φ_k.
    pub fn h1_apply(
        &self,
        u: &DMatrix<f64>,
        ints: &Integrals,
        n: &[f64],
        k: usize,
        v: &DVector<f64>,
    ) -> DVector<f64> {
        let vm = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        let mut out = (&self.one_body * &vm).column(0).clone_owned();
        if let Some(l) = &self.local {
            let pot = self.hartree_potential(ints, n);
            for x in 0..l.n_x() {
                for z in x * l.block..(x + 1) * l.block {
                    out[z] += pot[x] * v[z];
                }
            }
        }
        let mut av_bv = Vec::with_capacity(self.products.len());
        for (s, t) in self.products.iter().enumerate() {
            let av = t.a.apply(&vm).column(0).clone_owned();
            let bv = t.b.apply(&vm).column(0).clone_owned();
            let (sa, sb) = self.product_hartree_factors(ints, s, n);
            out.axpy(0.5 * t.coef * sb, &av, 1.0);
            out.axpy(0.5 * t.coef * sa, &bv, 1.0);
            av_bv.push((av, bv));
        }
        out *= n[k];
        let sk = n[k].max(0.0).sqrt();
        for j in 0..ints.k {
            let fkj = sk * n[j].max(0.0).sqrt();
            if fkj == 0.0 {
                continue;
            }
            let phi = u.column(j);
            if let Some(l) = &self.local {
                let p = self.pair_density(phi.as_slice(), v.as_slice());
                let w = &l.w * p;
                for x in 0..l.n_x() {
                    for z in x * l.block..(x + 1) * l.block {
                        out[z] -= fkj * w[x] * phi[z];
                    }
                }
            }
            for (s, t) in self.products.iter().enumerate() {
                let (av, bv) = &av_bv[s];
                let c = 0.5 * t.coef * fkj;
                let bjv = phi.dot(bv);
                let ajv = phi.dot(av);
                out.axpy(-c * bjv, &ints.au[s].column(j), 1.0);
                out.axpy(-c * ajv, &ints.bu[s].column(j), 1.0);
            }
        }
        out
    }

    /// (ab|cd) with the symmetrized kernel.
    pub fn pair_integral(&self, a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>, d: &DVector<f64>) -> f64 {
        let mut e = 0.0;
        if let Some(l) = &self.local {
            let p = self.pair_density(a.as_slice(), b.as_slice());
            let q = self.pair_density(c.as_slice(), d.as_slice());
            e += p.dot(&(&l.w * q));
        }
        if !self.products.is_empty() {
            let m = DMatrix::from_columns(&[b.clone(), d.clone()]);
            for t in &self.products {
                let am = t.a.apply(&m);
                let bm = t.b.apply(&m);
                let a_ab = a.dot(&am.column(0));
                let b_ab = a.dot(&bm.column(0));
                let a_cd = c.dot(&am.column(1));
                let b_cd = c.dot(&bm.column(1));
                e += 0.5 * t.coef * (a_ab * b_cd + b_ab * a_cd);
            }
        }
        e
    }

    /// Dense matrix of the HF one-body operator F = h + Σ_j (2Ĵ_j − K̂_j)
    /// over the doubly occupied columns of `u`. H¹ for every HF orbital is 2F.
    pub fn fock_matrix(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.dim();
        let k = u.ncols();
        let mut f = DMatrix::zeros(d, d);
        for (r, c, v) in self.one_body.triplet_iter() {
            f[(r, c)] += *v;
        }
        if let Some(l) = &self.local {
            let mut rho = DVector::zeros(l.n_x());
            for j in 0..k {
                rho += self.pair_density(u.column(j).as_slice(), u.column(j).as_slice());
            }
            let pot = &l.w * rho;
            for z in 0..d {
                f[(z, z)] += 2.0 * pot[z / l.block];
            }
            for j in 0..k {
                let phi = u.column(j);
                for z in 0..d {
                    for zp in 0..d {
                        f[(z, zp)] -= l.w[(z / l.block, zp / l.block)] * phi[z] * phi[zp];
                    }
                }
            }
        }
        for t in &self.products {
            let a = t.a.to_dense();
            let b = t.b.to_dense();
            let au = &a * u;
            let bu = &b * u;
            let mut sa = 0.0;
            let mut sb = 0.0;
            for j in 0..k {
                sa += u.column(j).dot(&au.column(j));
                sb += u.column(j).dot(&bu.column(j));
            }
            f += (&a * sb + &b * sa) * t.coef;
            for j in 0..k {
                let x = au.column(j);
                let y = bu.column(j);
                f -= (x * y.transpose() + y * x.transpose()) * (0.5 * t.coef);
            }
        }
        f
    }

    /// HF energy of the doubly occupied columns of `u`.
    pub fn hf_energy(&self, u: &DMatrix<f64>) -> f64 {
        let ints = self.integrals(u);
        self.energy(&ints, &vec![2.0; u.ncols()])
    }

    /// Spin-summed orbital density Σ_i n_i |u_i(z)|² per basis index.
    pub fn basis_density(u: &DMatrix<f64>, n: &[f64]) -> DVector<f64> {
        let mut rho = DVector::zeros(u.nrows());
        for (i, &ni) in n.iter().enumerate() {
            for z in 0..u.nrows() {
                rho[z] += ni * u[(z, i)] * u[(z, i)];
            }
        }
        rho
    }
}

/// Helper for building a CSR matrix from a dense symmetric one.
pub fn csr_from_dense(m: &DMatrix<f64>) -> CsrMatrix<f64> {
    let mut coo = nalgebra_sparse::CooMatrix::new(m.nrows(), m.ncols());
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            if v != 0.0 {
                coo.push(r, c, v);
            }
        }
    }
    CsrMatrix::from(&coo)
}
