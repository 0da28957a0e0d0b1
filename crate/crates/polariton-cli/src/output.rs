//! Result files. Every file starts with a commented header so that plain
//! two-column readers skip it.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use polariton::convergence::ConvergenceReport;

use crate::run::Outcome;

pub fn config_digest(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance lines shared by every file.
#[derive(Debug, Clone)]
pub struct Header {
    pub method: String,
    pub digest: String,
    pub seed: u64,
}

impl Header {
    fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "# polariton {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(w, "# method {}", self.method)?;
        writeln!(w, "# config sha256 {}", self.digest)?;
        writeln!(w, "# seed {}", self.seed)
    }
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

pub fn write_summary(dir: &Path, h: &Header, o: &Outcome) -> Result<()> {
    let mut f = create(&dir.join("summary.txt"))?;
    h.write(&mut f)?;
    writeln!(f, "energy {:.11e} hartree", o.energy)?;
    for (name, v) in &o.components {
        writeln!(f, "energy.{name} {v:.11e} hartree")?;
    }
    if let Some(n) = o.photon_number {
        writeln!(f, "photon_number {n:.11e}")?;
    }
    writeln!(f, "converged {}", o.converged)?;
    writeln!(f, "iterations {}", o.iterations)?;
    for n in &o.notes {
        writeln!(f, "# {n}")?;
    }
    Ok(())
}

pub fn write_density(dir: &Path, h: &Header, o: &Outcome) -> Result<()> {
    let mut f = create(&dir.join("density.dat"))?;
    h.write(&mut f)?;
    writeln!(f, "# x [bohr]  rho [1/bohr]")?;
    for (x, r) in &o.density {
        writeln!(f, "{x:.11e} {r:.11e}")?;
    }
    Ok(())
}

pub fn write_occupations(dir: &Path, h: &Header, o: &Outcome) -> Result<()> {
    let mut f = create(&dir.join("occupations.dat"))?;
    h.write(&mut f)?;
    writeln!(f, "# index  occupation (descending)")?;
    for (i, n) in o.occupations.iter().enumerate() {
        writeln!(f, "{i} {n:.11e}")?;
    }
    Ok(())
}

pub fn write_trace(dir: &Path, h: &Header, o: &Outcome) -> Result<()> {
    let mut f = create(&dir.join("trace.log"))?;
    h.write(&mut f)?;
    writeln!(f, "# iter value residual")?;
    for t in &o.trace {
        writeln!(f, "{} {:.11e} {:.6e}", t.iteration, t.value, t.residual)?;
    }
    Ok(())
}

pub fn write_all(dir: &Path, h: &Header, o: &Outcome) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_summary(dir, h, o)?;
    write_density(dir, h, o)?;
    write_occupations(dir, h, o)?;
    write_trace(dir, h, o)
}

/// Header of the scan table; rows are appended with [`scan_row`].
pub fn scan_header(w: &mut impl Write, h: &Header, axis: &str, unit: &str) -> Result<()> {
    h.write(w)?;
    writeln!(w, "# {axis} [{unit}]  energy [hartree]  photon_number  converged")?;
    Ok(())
}

pub fn scan_row(w: &mut impl Write, value: f64, o: &Result<Outcome>) -> Result<()> {
    match o {
        Ok(o) => writeln!(
            w,
            "{value:.11e} {:.11e} {} {}",
            o.energy,
            o.photon_number.map_or("nan".to_string(), |n| format!("{n:.11e}")),
            o.converged
        )?,
        Err(e) => writeln!(w, "{value:.11e} nan nan false # {e:#}")?,
    }
    Ok(())
}

pub fn write_convergence(dir: &Path, h: &Header, axis: &str, energies: &[(f64, f64)], r: &ConvergenceReport) -> Result<()> {
    let mut f = create(&dir.join("convergence.dat"))?;
    h.write(&mut f)?;
    writeln!(f, "# {axis}  energy [hartree]  delta_E [hartree]  delta_rho [1/bohr]")?;
    for (i, (p, e)) in energies.iter().enumerate() {
        match i.checked_sub(1).map(|j| &r.deltas[j]) {
            Some(d) => writeln!(f, "{p} {e:.11e} {:.6e} {:.6e}", d.delta_e, d.delta_rho)?,
            None => writeln!(f, "{p} {e:.11e} nan nan")?,
        }
    }
    match r.first_converged {
        Some(p) => writeln!(f, "# first converged {axis} = {p}")?,
        None => writeln!(f, "# not converged within the series")?,
    }
    if let Some((a, b)) = r.optimal_region {
        writeln!(f, "# optimal region {axis} = {a} .. {b}")?;
    }
    writeln!(f, "# lowest energy at {axis} = {}", r.lowest)?;
    Ok(())
}
