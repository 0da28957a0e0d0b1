//! Run configuration: TOML text with explicit unit strings on every physical
//! quantity ("20 bohr", "0.5535 hartree").

use std::fmt;

use serde::Deserialize;

use polariton::model::{
    CavityMode, Grid1D, GridModel, LatticeModel, ModelSpec, SoftInteraction, SoftPotential, StencilOrder,
};

/// One problem found while reading a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.reason),
            None => write!(f, "{}: {}", self.key, self.reason),
        }
    }
}

#[derive(Debug)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Hf,
    Dhf,
    Rdmft,
    Drdmft,
    Phf,
}

impl Method {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "exact" => Self::Exact,
            "hf" => Self::Hf,
            "dhf" => Self::Dhf,
            "rdmft" => Self::Rdmft,
            "drdmft" => Self::Drdmft,
            "phf" => Self::Phf,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Hf => "hf",
            Self::Dhf => "dhf",
            Self::Rdmft => "rdmft",
            Self::Drdmft => "drdmft",
            Self::Phf => "phf",
        }
    }

    pub fn dressed(self) -> bool {
        matches!(self, Self::Dhf | Self::Drdmft | Self::Phf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Bohr,
    Hartree,
}

impl Unit {
    fn name(self) -> &'static str {
        match self {
            Unit::Bohr => "bohr",
            Unit::Hartree => "hartree",
        }
    }
}

/// Parse "<number> <unit>".
pub fn parse_quantity(s: &str, unit: Unit) -> Result<f64, String> {
    let mut parts = s.split_whitespace();
    let (Some(num), u) = (parts.next(), parts.next()) else {
        return Err("empty value".into());
    };
    let value: f64 = num.parse().map_err(|_| format!("'{num}' is not a number"))?;
    match u {
        None => Err(format!("missing unit (expected '{}')", unit.name())),
        Some(u) if u == unit.name() && parts.next().is_none() => {
            if value.is_finite() {
                Ok(value)
            } else {
                Err("value must be finite".into())
            }
        }
        Some(u) => Err(format!("unit '{u}' not accepted here (expected '{}')", unit.name())),
    }
}

// ---------------------------------------------------------------------------
// Raw serde layer. Physical quantities stay strings until validation.

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    method: Option<String>,
    electrons: Option<usize>,
    seed: Option<u64>,
    output: Option<String>,
    grid: Option<RawGrid>,
    potential: Option<RawPotential>,
    interaction: Option<RawInteraction>,
    mode: Option<RawMode>,
    lattice: Option<RawLattice>,
    scf: Option<RawScf>,
    rdmft: Option<RawRdmft>,
    phf: Option<RawPhf>,
    scan: Option<RawScan>,
    converge: Option<RawConverge>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    length: String,
    spacing: String,
    stencil: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    kind: String,
    charge: Option<f64>,
    bond: Option<String>,
    softening: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInteraction {
    softening: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMode {
    omega: String,
    lambda: Option<f64>,
    g_over_omega: Option<f64>,
    photon_length: Option<String>,
    photon_spacing: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLattice {
    sites: usize,
    hopping: Option<String>,
    spacing: Option<String>,
    onsite: Option<Vec<String>>,
    photon_basis: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScf {
    eps_e: Option<f64>,
    eps_rho: Option<f64>,
    max_iterations: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRdmft {
    es: Option<usize>,
    optimizer: Option<String>,
    eps_e: Option<f64>,
    eps_f: Option<f64>,
    eps_mu: Option<f64>,
    max_outer: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhf {
    eps_total: Option<f64>,
    constraints: Option<usize>,
    skip_lowest_orbital: Option<bool>,
    max_outer: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    axis: String,
    values: Vec<toml::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConverge {
    axis: String,
    series: Vec<toml::Value>,
    eps_e: Option<f64>,
    eps_rho: Option<f64>,
    eps_e_opt: Option<f64>,
    eps_rho_opt: Option<f64>,
}

// ---------------------------------------------------------------------------
// Validated layer.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdmftOptimizer {
    Piris,
    Cg,
}

#[derive(Debug, Clone)]
pub struct ScfSettings {
    pub eps_e: f64,
    pub eps_rho: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct RdmftSettings {
    pub es: usize,
    pub optimizer: RdmftOptimizer,
    pub eps_e: f64,
    pub eps_f: f64,
    pub eps_mu: f64,
    pub max_outer: usize,
}

#[derive(Debug, Clone)]
pub struct PhfSettings {
    pub eps_total: f64,
    pub constraints: Option<usize>,
    pub skip_lowest_orbital: bool,
    pub max_outer: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAxis {
    Bond,
    GOverOmega,
    Lambda,
    Omega,
    Softening,
}

impl ScanAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Bond => "bond",
            Self::GOverOmega => "g_over_omega",
            Self::Lambda => "lambda",
            Self::Omega => "omega",
            Self::Softening => "softening",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Self::Bond | Self::Softening => "bohr",
            Self::Omega => "hartree",
            Self::GOverOmega | Self::Lambda => "1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergeAxis {
    Lx,
    Dx,
    Lq,
    Dq,
    Es,
    Bph,
}

impl ConvergeAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lx => "L_x",
            Self::Dx => "dx",
            Self::Lq => "L_q",
            Self::Dq => "dq",
            Self::Es => "ES",
            Self::Bph => "B_ph",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvergeSettings {
    pub axis: ConvergeAxis,
    pub series: Vec<f64>,
    pub eps_e: f64,
    pub eps_rho: f64,
    pub eps_e_opt: f64,
    pub eps_rho_opt: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub method: Method,
    pub model: ModelSpec,
    pub seed: u64,
    pub output: Option<String>,
    pub scf: ScfSettings,
    pub rdmft: RdmftSettings,
    pub phf: PhfSettings,
    pub scan: Option<(ScanAxis, Vec<f64>)>,
    pub converge: Option<ConvergeSettings>,
}

/// Line of the first `key =` assignment or `[key]` header in the text.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let leaf = key.rsplit('.').next().unwrap_or(key);
    let header = format!("[{key}]");
    text.lines().position(|l| {
        let t = l.trim_start();
        t.starts_with(&header) || (t.starts_with(leaf) && t[leaf.len()..].trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

struct Collector<'a> {
    text: &'a str,
    errors: Vec<ConfigError>,
}

impl Collector<'_> {
    fn push(&mut self, key: &str, reason: impl Into<String>) {
        self.errors.push(ConfigError { line: line_of(self.text, key), key: key.to_string(), reason: reason.into() });
    }

    fn quantity(&mut self, key: &str, s: &str, unit: Unit) -> Option<f64> {
        match parse_quantity(s, unit) {
            Ok(v) => Some(v),
            Err(e) => {
                self.push(key, e);
                None
            }
        }
    }

    fn positive(&mut self, key: &str, v: Option<f64>) -> Option<f64> {
        match v {
            Some(x) if x > 0.0 => Some(x),
            Some(_) => {
                self.push(key, "must be positive");
                None
            }
            None => None,
        }
    }
}

fn byte_to_line(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parse and validate a configuration, collecting every problem found.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let raw: RawConfig = match toml::from_str(text) {
        Ok(r) => r,
        Err(e) => {
            let line = e.span().map(|s| byte_to_line(text, s.start));
            let msg = e.message().to_string();
            let key = msg
                .strip_prefix("unknown field `")
                .and_then(|r| r.split('`').next())
                .map(str::to_string)
                .unwrap_or_else(|| "<syntax>".to_string());
            return Err(ConfigErrors(vec![ConfigError { line, key, reason: msg }]));
        }
    };
    let mut c = Collector { text, errors: Vec::new() };

    let method = match raw.method.as_deref() {
        None => {
            c.push("method", "missing method");
            None
        }
        Some(m) => {
            let parsed = Method::parse(m);
            if parsed.is_none() {
                c.push("method", format!("unknown method '{m}' (exact, hf, dhf, rdmft, drdmft, phf)"));
            }
            parsed
        }
    };
    if raw.grid.is_some() && raw.lattice.is_some() {
        c.push("lattice", "a config holds either a [grid] or a [lattice] block, not both");
    }

    let mode = raw.mode.as_ref().and_then(|m| {
        let omega = c.quantity("mode.omega", &m.omega, Unit::Hartree);
        let omega = c.positive("mode.omega", omega)?;
        let mode = match (m.lambda, m.g_over_omega) {
            (Some(_), Some(_)) => {
                c.push("mode.g_over_omega", "give either lambda or g_over_omega");
                return None;
            }
            (Some(l), None) => CavityMode::new(omega, l),
            (None, Some(g)) => CavityMode::from_g_over_omega(omega, g),
            (None, None) => CavityMode::new(omega, 0.0),
        };
        match mode {
            Ok(m) => Some(m),
            Err(e) => {
                c.push("mode", e.to_string());
                None
            }
        }
    });

    let electrons = raw.electrons.unwrap_or(2);
    let model = if let Some(l) = &raw.lattice {
        let hopping = match (&l.hopping, &l.spacing) {
            (Some(h), None) => c.quantity("lattice.hopping", h, Unit::Hartree),
            (None, Some(s)) => c.quantity("lattice.spacing", s, Unit::Bohr).map(LatticeModel::hopping_from_spacing),
            (None, None) => Some(0.5),
            (Some(_), Some(_)) => {
                c.push("lattice.hopping", "give either hopping or spacing");
                None
            }
        };
        let onsite: Option<Vec<f64>> = match &l.onsite {
            None => Some(vec![0.0; l.sites]),
            Some(v) => {
                if v.len() != l.sites {
                    c.push("lattice.onsite", format!("has {} entries but sites = {}", v.len(), l.sites));
                    None
                } else {
                    let vals: Vec<Option<f64>> = v.iter().map(|s| c.quantity("lattice.onsite", s, Unit::Hartree)).collect();
                    vals.into_iter().collect()
                }
            }
        };
        if mode.is_none() && raw.mode.is_none() {
            c.push("mode", "lattice problems need a [mode] block");
        }
        match (hopping, onsite, mode) {
            (Some(h), Some(o), Some(m)) => {
                match LatticeModel::new(l.sites, h, o, m, l.photon_basis.unwrap_or(5), electrons) {
                    Ok(lm) => Some(ModelSpec::Lattice(lm)),
                    Err(e) => {
                        c.push("lattice", e.to_string());
                        None
                    }
                }
            }
            _ => None,
        }
    } else if let Some(g) = &raw.grid {
        let length = c.quantity("grid.length", &g.length, Unit::Bohr);
        let spacing = c.quantity("grid.spacing", &g.spacing, Unit::Bohr);
        let stencil = match StencilOrder::from_accuracy(g.stencil.unwrap_or(4)) {
            Ok(s) => Some(s),
            Err(e) => {
                c.push("grid.stencil", e.to_string());
                None
            }
        };
        let potential = match &raw.potential {
            None => {
                c.push("potential", "grid problems need a [potential] block");
                None
            }
            Some(p) => {
                let eps = c.quantity("potential.softening", &p.softening, Unit::Bohr);
                match p.kind.as_str() {
                    "atom" => {
                        if p.bond.is_some() {
                            c.push("potential.bond", "not used by kind = \"atom\"");
                        }
                        eps.and_then(|e| SoftPotential::atom(p.charge.unwrap_or(1.0), e).ok())
                    }
                    "diatomic" => {
                        if p.charge.is_some() {
                            c.push("potential.charge", "not used by kind = \"diatomic\"");
                        }
                        let bond = match &p.bond {
                            Some(b) => c.quantity("potential.bond", b, Unit::Bohr),
                            None => {
                                c.push("potential.bond", "diatomic potential needs a bond length");
                                None
                            }
                        };
                        match (bond, eps) {
                            (Some(b), Some(e)) => SoftPotential::diatomic(b, e).ok(),
                            _ => None,
                        }
                    }
                    other => {
                        c.push("potential.kind", format!("unknown kind '{other}' (atom, diatomic)"));
                        None
                    }
                }
            }
        };
        let interaction = match &raw.interaction {
            Some(i) => c.quantity("interaction.softening", &i.softening, Unit::Bohr).and_then(|e| SoftInteraction::new(e).ok()),
            None => SoftInteraction::new(1.0).ok(),
        };
        let photon_grid = match (&raw.mode, &mode) {
            (Some(rm), Some(_)) => {
                let pl = rm.photon_length.as_ref().map(|s| c.quantity("mode.photon_length", s, Unit::Bohr));
                let ps = rm.photon_spacing.as_ref().map(|s| c.quantity("mode.photon_spacing", s, Unit::Bohr));
                match (pl, ps) {
                    (Some(Some(l)), Some(Some(s))) => match Grid1D::from_length(l, s) {
                        Ok(g) => Some(g),
                        Err(e) => {
                            c.push("mode.photon_length", e.to_string());
                            None
                        }
                    },
                    (None, _) | (_, None) => {
                        c.push("mode", "grid problems with a mode need photon_length and photon_spacing");
                        None
                    }
                    _ => None,
                }
            }
            _ => None,
        };
        let grid = match (length, spacing) {
            (Some(l), Some(s)) => match Grid1D::from_length(l, s) {
                Ok(g) => Some(g),
                Err(e) => {
                    c.push("grid", e.to_string());
                    None
                }
            },
            _ => None,
        };
        match (grid, stencil, potential, interaction) {
            (Some(grid), Some(stencil), Some(potential), Some(interaction)) => {
                let gm = GridModel {
                    grid,
                    stencil,
                    potential,
                    interaction,
                    modes: mode.into_iter().collect(),
                    n_electrons: electrons,
                    photon_grid,
                };
                match gm.validate() {
                    Ok(()) => Some(ModelSpec::Grid(gm)),
                    Err(e) => {
                        c.push("electrons", e.to_string());
                        None
                    }
                }
            }
            _ => None,
        }
    } else {
        if method.is_some() {
            c.push("grid", "either a [grid] or a [lattice] block is required");
        }
        None
    };

    if let (Some(m), Some(spec)) = (method, &model) {
        let has_mode = match spec {
            ModelSpec::Grid(g) => !g.modes.is_empty(),
            ModelSpec::Lattice(_) => true,
        };
        if m.dressed() && !has_mode {
            c.push("method", format!("method '{}' needs a cavity mode", m.name()));
        }
        if matches!(m, Method::Hf | Method::Rdmft) && has_mode {
            c.push("method", format!("method '{}' is electronic only; use 'd{}' with a mode", m.name(), m.name()));
        }
        if m == Method::Phf && !matches!(spec, ModelSpec::Lattice(_)) {
            c.push("method", "phf runs on lattice problems");
        }
    }

    let scf = {
        let s = raw.scf.as_ref();
        ScfSettings {
            eps_e: s.and_then(|s| s.eps_e).unwrap_or(1e-9),
            eps_rho: s.and_then(|s| s.eps_rho).unwrap_or(1e-8),
            max_iterations: s.and_then(|s| s.max_iterations).unwrap_or(2000),
        }
    };
    let rdmft = {
        let r = raw.rdmft.as_ref();
        let optimizer = match r.and_then(|r| r.optimizer.as_deref()) {
            None | Some("piris") => RdmftOptimizer::Piris,
            Some("cg") => RdmftOptimizer::Cg,
            Some(o) => {
                c.push("rdmft.optimizer", format!("unknown optimizer '{o}' (piris, cg)"));
                RdmftOptimizer::Piris
            }
        };
        let eps_e = r.and_then(|r| r.eps_e).unwrap_or(1e-8);
        RdmftSettings {
            es: r.and_then(|r| r.es).unwrap_or(40),
            optimizer,
            eps_e,
            eps_f: r.and_then(|r| r.eps_f).unwrap_or(1e3 * eps_e),
            eps_mu: r.and_then(|r| r.eps_mu).unwrap_or(1e-8),
            max_outer: r.and_then(|r| r.max_outer).unwrap_or(300),
        }
    };
    let phf = {
        let p = raw.phf.as_ref();
        PhfSettings {
            eps_total: p.and_then(|p| p.eps_total).unwrap_or(1e-4),
            constraints: p.and_then(|p| p.constraints),
            skip_lowest_orbital: p.and_then(|p| p.skip_lowest_orbital).unwrap_or(false),
            max_outer: p.and_then(|p| p.max_outer).unwrap_or(60),
        }
    };
    for (key, v) in [
        ("scf.eps_e", scf.eps_e),
        ("scf.eps_rho", scf.eps_rho),
        ("rdmft.eps_e", rdmft.eps_e),
        ("rdmft.eps_f", rdmft.eps_f),
        ("rdmft.eps_mu", rdmft.eps_mu),
        ("phf.eps_total", phf.eps_total),
    ] {
        if !(v > 0.0) {
            c.push(key, "tolerance must be positive");
        }
    }

    let scan = raw.scan.as_ref().and_then(|s| {
        let axis = match s.axis.as_str() {
            "bond" => ScanAxis::Bond,
            "g_over_omega" => ScanAxis::GOverOmega,
            "lambda" => ScanAxis::Lambda,
            "omega" => ScanAxis::Omega,
            "softening" => ScanAxis::Softening,
            other => {
                c.push("scan.axis", format!("unknown axis '{other}' (bond, g_over_omega, lambda, omega, softening)"));
                return None;
            }
        };
        let unit = match axis {
            ScanAxis::Bond | ScanAxis::Softening => Some(Unit::Bohr),
            ScanAxis::Omega => Some(Unit::Hartree),
            _ => None,
        };
        let vals: Vec<Option<f64>> = s.values.iter().map(|v| value_of(&mut c, "scan.values", v, unit)).collect();
        let vals: Option<Vec<f64>> = vals.into_iter().collect();
        if let Some(v) = &vals {
            if v.is_empty() {
                c.push("scan.values", "no scan values");
            }
        }
        vals.map(|v| (axis, v))
    });

    let converge = raw.converge.as_ref().and_then(|cv| {
        let axis = match cv.axis.as_str() {
            "L_x" => ConvergeAxis::Lx,
            "dx" => ConvergeAxis::Dx,
            "L_q" => ConvergeAxis::Lq,
            "dq" => ConvergeAxis::Dq,
            "ES" => ConvergeAxis::Es,
            "B_ph" => ConvergeAxis::Bph,
            other => {
                c.push("converge.axis", format!("unknown axis '{other}' (L_x, dx, L_q, dq, ES, B_ph)"));
                return None;
            }
        };
        let unit = match axis {
            ConvergeAxis::Lx | ConvergeAxis::Dx | ConvergeAxis::Lq | ConvergeAxis::Dq => Some(Unit::Bohr),
            _ => None,
        };
        let vals: Vec<Option<f64>> = cv.series.iter().map(|v| value_of(&mut c, "converge.series", v, unit)).collect();
        let series: Option<Vec<f64>> = vals.into_iter().collect();
        let series = series?;
        if series.len() < 3 {
            c.push("converge.series", format!("series needs at least 3 points, got {}", series.len()));
        }
        Some(ConvergeSettings {
            axis,
            series,
            eps_e: cv.eps_e.unwrap_or(1e-8),
            eps_rho: cv.eps_rho.unwrap_or(1e-7),
            eps_e_opt: cv.eps_e_opt.unwrap_or(5e-6),
            eps_rho_opt: cv.eps_rho_opt.unwrap_or(1e-4),
        })
    });

    if !c.errors.is_empty() {
        return Err(ConfigErrors(c.errors));
    }
    Ok(RunConfig {
        method: method.expect("checked"),
        model: model.expect("checked"),
        seed: raw.seed.unwrap_or(0),
        output: raw.output,
        scf,
        rdmft,
        phf,
        scan,
        converge,
    })
}

fn value_of(c: &mut Collector<'_>, key: &str, v: &toml::Value, unit: Option<Unit>) -> Option<f64> {
    match (v, unit) {
        (toml::Value::String(s), Some(u)) => c.quantity(key, s, u),
        (toml::Value::Float(f), None) => Some(*f),
        (toml::Value::Integer(i), None) => Some(*i as f64),
        (_, Some(u)) => {
            c.push(key, format!("entries need a unit, e.g. \"1.0 {}\"", u.name()));
            None
        }
        (_, None) => {
            c.push(key, "entries must be plain numbers");
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const HE: &str = r#"
method = "rdmft"
electrons = 2

[grid]
length = "20 bohr"
spacing = "0.1 bohr"

[potential]
kind = "atom"
charge = 2.0
softening = "1 bohr"

[rdmft]
es = 40
"#;

    #[test]
    fn minimal_helium_is_valid() {
        let c = parse_config(HE).unwrap();
        assert_eq!(c.method, Method::Rdmft);
        assert_eq!(c.rdmft.es, 40);
        match c.model {
            ModelSpec::Grid(g) => {
                assert_eq!(g.grid.n_points, 201);
                assert!((g.potential.charges[0].0 - 2.0).abs() < 1e-15);
            }
            _ => panic!("expected a grid model"),
        }
    }

    #[test]
    fn empty_file_reports_missing_method() {
        let e = parse_config("").unwrap_err();
        assert!(e.0.iter().any(|e| e.key == "method" && e.reason == "missing method"), "{e}");
    }

    #[test]
    fn onsite_length_mismatch_names_key() {
        let text = r#"
method = "exact"
electrons = 4
[mode]
omega = "0.4 hartree"
[lattice]
sites = 6
onsite = ["0 hartree", "0 hartree"]
"#;
        let e = parse_config(text).unwrap_err();
        let err = e.0.iter().find(|e| e.key == "lattice.onsite").expect("onsite error");
        assert_eq!(err.line, Some(8));
    }

    #[test]
    fn unknown_key_and_missing_unit() {
        let e = parse_config("method = \"hf\"\nfoo = 1\n").unwrap_err();
        assert_eq!(e.0[0].key, "foo");
        assert_eq!(e.0[0].line, Some(2));
        let e = parse_config(&HE.replace("\"20 bohr\"", "\"20\"")).unwrap_err();
        assert!(e.0[0].reason.contains("missing unit"), "{e}");
        assert_eq!(e.0[0].line, Some(6));
    }

    #[test]
    fn grid_and_lattice_conflict() {
        let text = format!("{HE}\n[lattice]\nsites = 4\n");
        let e = parse_config(&text).unwrap_err();
        assert!(e.0.iter().any(|e| e.key == "lattice" && e.reason.contains("not both")));
    }
}
