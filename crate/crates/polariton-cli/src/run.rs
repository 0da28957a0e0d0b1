//! Dispatch from a validated config to the library solvers.

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;

use polariton::dressed::{
    dress, electron_density, electronic_1rdm_from_orbitals, ip_basis, mode_occupation, natural_occupations,
    photon_expectation, DressedProblem, Layout,
};
use polariton::exact::{exact_grid_ground_state, exact_lattice_ground_state, exact_observables, ExactConfig};
use polariton::hf::{hf_scf, ScfConfig};
use polariton::linalg::LanczosConfig;
use polariton::model::{CavityMode, Grid1D, ModelSpec, SoftInteraction, SoftPotential};
use polariton::polariton_hf::{augmented_lagrangian_outer, PhfConfig};
use polariton::rdmft::{rdmft_driver, IntegralTables, OrbitalOptimizer, RdmftConfig};

use crate::config::{ConvergeAxis, Method, RdmftOptimizer, RunConfig, ScanAxis};

/// Memory ceiling for the two-electron grid oracle.
const EXACT_MEMORY_CAP: usize = 4_000_000_000;

#[derive(Debug, Clone)]
pub struct TraceLine {
    pub iteration: usize,
    pub value: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub energy: f64,
    /// Named energy contributions in hartree; empty when the method has no split.
    pub components: Vec<(&'static str, f64)>,
    /// (position, electron density).
    pub density: Vec<(f64, f64)>,
    /// Natural occupations, descending.
    pub occupations: Vec<f64>,
    pub photon_number: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<TraceLine>,
    pub notes: Vec<String>,
}

fn positions(problem: &DressedProblem) -> Vec<f64> {
    match &problem.layout {
        Layout::Grid { x, .. } => x.points(),
        Layout::Lattice { .. } => problem.x_coords.clone(),
    }
}

fn density_pairs(problem: &DressedProblem, gamma_e: &DMatrix<f64>) -> Vec<(f64, f64)> {
    positions(problem).into_iter().zip(electron_density(problem, gamma_e)).collect()
}

fn photon_number(problem: &DressedProblem, gamma: &DMatrix<f64>) -> Result<Option<f64>> {
    match problem.modes.first() {
        Some(m) => {
            let e = photon_expectation(problem, gamma);
            Ok(Some(mode_occupation(e, m.omega, problem.n_electrons)?))
        }
        None => Ok(None),
    }
}

/// Split of the orbital-functional energy into one-body, Hartree and
/// exchange-correlation parts plus the constant offset.
fn components(problem: &DressedProblem, u: &DMatrix<f64>, n: &[f64]) -> Vec<(&'static str, f64)> {
    let ints = problem.hamiltonian.integrals(u);
    let t = IntegralTables::from_integrals(&ints, problem.hamiltonian.constant);
    let s: Vec<f64> = n.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut one = 0.0;
    let mut hartree = 0.0;
    let mut xc = 0.0;
    for i in 0..t.len() {
        one += n[i] * t.one[i];
        for j in 0..t.len() {
            hartree += 0.5 * n[i] * n[j] * t.hartree[(i, j)];
            xc -= 0.5 * s[i] * s[j] * t.exchange[(i, j)];
        }
    }
    vec![("one_body", one), ("hartree", hartree), ("exchange_correlation", xc), ("constant", t.constant)]
}

/// Run one calculation on `spec` with the settings of `cfg`.
pub fn solve(cfg: &RunConfig, spec: &ModelSpec) -> Result<Outcome> {
    let problem = dress(spec).context("building the problem")?;
    match cfg.method {
        Method::Exact => solve_exact(cfg, spec, &problem),
        Method::Hf | Method::Dhf => {
            let scf = ScfConfig {
                eps_e: cfg.scf.eps_e,
                eps_rho: cfg.scf.eps_rho,
                max_iterations: cfg.scf.max_iterations,
                ..ScfConfig::default()
            };
            let r = hf_scf(&problem, &scf)?;
            let n = vec![2.0; r.orbitals.ncols()];
            let gamma_e = electronic_1rdm_from_orbitals(&r.orbitals, &n, problem.block());
            Ok(Outcome {
                energy: r.energy,
                components: components(&problem, &r.orbitals, &n),
                density: density_pairs(&problem, &gamma_e),
                occupations: natural_occupations(&gamma_e),
                photon_number: photon_number(&problem, &r.gamma)?,
                converged: r.converged,
                iterations: r.iterations,
                trace: r.trace.iter().map(|&(i, e, d)| TraceLine { iteration: i, value: e, residual: d }).collect(),
                notes: vec![],
            })
        }
        Method::Rdmft | Method::Drdmft => {
            let m = problem.n_electrons / 2 + cfg.rdmft.es;
            let ip = ip_basis(&problem, m)?;
            let mut rc = RdmftConfig { eps_e: cfg.rdmft.eps_e, eps_f: cfg.rdmft.eps_f, max_outer: cfg.rdmft.max_outer, ..RdmftConfig::default() };
            rc.occupations.eps_mu = cfg.rdmft.eps_mu;
            let opt = match cfg.rdmft.optimizer {
                RdmftOptimizer::Piris => OrbitalOptimizer::Piris,
                RdmftOptimizer::Cg => OrbitalOptimizer::ConjugateGradient,
            };
            let r = rdmft_driver(&problem.hamiltonian, &ip.orbitals, opt, &rc)?;
            let gamma = r.gamma();
            let gamma_e = electronic_1rdm_from_orbitals(&r.orbitals, &r.occupations, problem.block());
            let mut occ = r.occupations.clone();
            occ.sort_by(|a, b| b.total_cmp(a));
            Ok(Outcome {
                energy: r.energy,
                components: components(&problem, &r.orbitals, &r.occupations),
                density: density_pairs(&problem, &gamma_e),
                occupations: occ,
                photon_number: photon_number(&problem, &gamma)?,
                converged: r.converged,
                iterations: r.outer_iterations,
                trace: r
                    .history
                    .iter()
                    .enumerate()
                    .map(|(i, h)| TraceLine { iteration: i + 1, value: h.1, residual: h.2 })
                    .collect(),
                notes: vec![format!("basis size {m}, chemical potential {:.12e} hartree", r.mu)],
            })
        }
        Method::Phf => {
            let pc = PhfConfig {
                eps_total: cfg.phf.eps_total,
                constraints: cfg.phf.constraints,
                skip_lowest_orbital: cfg.phf.skip_lowest_orbital,
                max_outer: cfg.phf.max_outer,
                ..PhfConfig::default()
            };
            let r = augmented_lagrangian_outer(&problem, &pc)?;
            let n = vec![2.0; r.orbitals.ncols()];
            let mut notes = vec![
                format!("max constraint violation {:.3e}", r.report.max_violation),
                format!("complementary slackness {:.3e}", r.report.slackness),
                format!("orbital residue {:.3e}", r.report.residue),
            ];
            if r.report.stalled {
                notes.push("penalty parameter reached its cap; best feasible iterate reported".into());
            }
            Ok(Outcome {
                energy: r.energy,
                components: components(&problem, &r.orbitals, &n),
                density: density_pairs(&problem, &r.gamma_e),
                occupations: r.electronic_occupations.clone(),
                photon_number: Some(r.photon_number),
                converged: r.report.converged,
                iterations: r.report.outer_iterations,
                trace: r.trace.iter().map(|&(i, l, res, _)| TraceLine { iteration: i, value: l, residual: res }).collect(),
                notes,
            })
        }
    }
}

fn solve_exact(cfg: &RunConfig, spec: &ModelSpec, problem: &DressedProblem) -> Result<Outcome> {
    match spec {
        ModelSpec::Lattice(l) => {
            let mut ec = ExactConfig::default();
            ec.lanczos.seed = cfg.seed;
            let r = exact_lattice_ground_state(l, &ec)?;
            let pos = l.positions();
            let density = pos.into_iter().enumerate().map(|(i, x)| (x, r.gamma_e[(i, i)])).collect();
            let mut notes = vec![format!("sector dimension {}", r.sector.len() * r.photon_basis)];
            if r.degenerate {
                notes.push("ground state is degenerate within the Lanczos tolerance".into());
            }
            Ok(Outcome {
                energy: r.energy,
                components: vec![],
                density,
                occupations: natural_occupations(&r.gamma_e),
                photon_number: Some(r.photon_number),
                converged: true,
                iterations: 0,
                trace: vec![],
                notes,
            })
        }
        ModelSpec::Grid(_) => {
            let lc = LanczosConfig { seed: cfg.seed, ..LanczosConfig::default() };
            let s = exact_grid_ground_state(problem, &lc, EXACT_MEMORY_CAP)?;
            let o = exact_observables(problem, &s)?;
            Ok(Outcome {
                energy: s.energy,
                components: vec![],
                density: positions(problem).into_iter().zip(o.electron_density.iter().copied()).collect(),
                occupations: natural_occupations(&o.gamma_e),
                photon_number: problem.is_coupled().then_some(o.mode_occupation),
                converged: true,
                iterations: 0,
                trace: vec![],
                notes: vec![format!("Lanczos residual {:.3e}", s.residual)],
            })
        }
    }
}

/// Model with one scan parameter replaced.
pub fn with_scan_value(spec: &ModelSpec, axis: ScanAxis, v: f64) -> Result<ModelSpec> {
    let mut s = spec.clone();
    let retune = |m: &CavityMode| -> Result<CavityMode> {
        Ok(match axis {
            ScanAxis::GOverOmega => CavityMode::from_g_over_omega(m.omega, v)?,
            ScanAxis::Lambda => CavityMode::new(m.omega, v)?,
            ScanAxis::Omega => CavityMode::from_g_over_omega(v, m.g_over_omega())?,
            _ => m.clone(),
        })
    };
    match (&mut s, axis) {
        (ModelSpec::Grid(g), ScanAxis::Bond) => {
            if g.potential.charges.len() != 2 {
                bail!("scan axis 'bond' needs a diatomic potential");
            }
            g.potential = SoftPotential::diatomic(v, g.potential.softening)?;
        }
        (ModelSpec::Grid(g), ScanAxis::Softening) => {
            g.potential = SoftPotential::new(g.potential.charges.clone(), v)?;
            g.interaction = SoftInteraction::new(v)?;
        }
        (ModelSpec::Grid(g), _) => {
            if g.modes.is_empty() {
                bail!("scan axis '{}' needs a [mode] block", axis.name());
            }
            g.modes = g.modes.iter().map(retune).collect::<Result<_>>()?;
        }
        (ModelSpec::Lattice(_), ScanAxis::Bond | ScanAxis::Softening) => {
            bail!("scan axis '{}' applies to grid problems only", axis.name());
        }
        (ModelSpec::Lattice(l), _) => {
            l.mode = retune(&l.mode)?;
        }
    }
    Ok(s)
}

/// Config with one numerical parameter replaced, for convergence series.
pub fn with_converge_value(cfg: &RunConfig, axis: ConvergeAxis, v: f64) -> Result<RunConfig> {
    let mut c = cfg.clone();
    let count = |v: f64| -> Result<usize> {
        if v < 0.0 || v.fract() != 0.0 {
            bail!("axis '{}' takes non-negative integers, got {v}", axis.name());
        }
        Ok(v as usize)
    };
    match (&mut c.model, axis) {
        (_, ConvergeAxis::Es) => c.rdmft.es = count(v)?,
        (ModelSpec::Lattice(l), ConvergeAxis::Bph) => {
            l.photon_basis = count(v)?;
            l.validate()?;
        }
        (ModelSpec::Grid(g), ConvergeAxis::Lx) => g.grid = Grid1D::from_length(v, g.grid.spacing)?,
        (ModelSpec::Grid(g), ConvergeAxis::Dx) => g.grid = Grid1D::from_length(g.grid.length(), v)?,
        (ModelSpec::Grid(g), ConvergeAxis::Lq | ConvergeAxis::Dq) => {
            let Some(q) = g.photon_grid.as_ref() else {
                bail!("axis '{}' needs a photon grid", axis.name());
            };
            g.photon_grid = Some(if axis == ConvergeAxis::Lq {
                Grid1D::from_length(v, q.spacing)?
            } else {
                Grid1D::from_length(q.length(), v)?
            });
        }
        _ => bail!("axis '{}' does not apply to this problem", axis.name()),
    }
    Ok(c)
}
