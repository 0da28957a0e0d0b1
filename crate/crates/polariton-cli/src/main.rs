mod config;
mod output;
mod run;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use polariton::convergence::{analyze_series, optimal_region, SeriesPoint};

use config::{parse_config, ConvergeAxis, RunConfig};
use output::{config_digest, Header};
use run::{solve, with_converge_value, with_scan_value, Outcome};

#[derive(Parser)]
#[command(name = "polariton", version, about = "Ground states of 1D matter coupled to cavity modes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single calculation.
    Run(Common),
    /// Convergence series over one numerical parameter ([converge] block).
    Converge(Common),
    /// Parameter scan ([scan] block), one calculation per value.
    Scan(Common),
    /// Validate a configuration without running it.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to `output` in the config, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for scans and series.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

struct Loaded {
    cfg: RunConfig,
    header: Header,
    out: PathBuf,
    threads: usize,
}

fn load(c: &Common) -> Result<Loaded> {
    let text = fs::read_to_string(&c.config).with_context(|| format!("reading {}", c.config.display()))?;
    let mut cfg = match parse_config(&text) {
        Ok(cfg) => cfg,
        Err(e) => bail!("{}:\n{e}", c.config.display()),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if c.threads == 0 {
        bail!("--threads must be at least 1");
    }
    let out = c.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    let header = Header { method: cfg.method.name().to_string(), digest: config_digest(&text), seed: cfg.seed };
    Ok(Loaded { cfg, header, out, threads: c.threads })
}

/// Evaluate `jobs` on a bounded pool and hand results to `sink` in input order.
fn ordered_pool<T, J, F, S>(jobs: &[J], threads: usize, work: F, mut sink: S) -> Result<()>
where
    J: Sync,
    T: Send,
    F: Fn(&J) -> T + Sync,
    S: FnMut(usize, T) -> Result<()>,
{
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, T)>();
    std::thread::scope(|s| {
        for _ in 0..threads.min(jobs.len()).max(1) {
            let tx = tx.clone();
            let (next, work) = (&next, &work);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                if tx.send((i, work(&jobs[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut expected = 0;
        for (i, t) in rx {
            pending.insert(i, t);
            while let Some(t) = pending.remove(&expected) {
                sink(expected, t)?;
                expected += 1;
            }
        }
        Ok(())
    })
}

fn report(o: &Outcome) {
    println!("energy {:.11e} hartree (converged: {})", o.energy, o.converged);
    if let Some(n) = o.photon_number {
        println!("photon number {n:.6e}");
    }
}

fn cmd_run(l: &Loaded) -> Result<()> {
    let o = solve(&l.cfg, &l.cfg.model)?;
    output::write_all(&l.out, &l.header, &o)?;
    report(&o);
    Ok(())
}

fn cmd_scan(l: &Loaded) -> Result<()> {
    let Some((axis, values)) = &l.cfg.scan else {
        bail!("scan needs a [scan] block in the config");
    };
    fs::create_dir_all(&l.out)?;
    let path = l.out.join("scan.dat");
    let mut w = BufWriter::new(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    output::scan_header(&mut w, &l.header, axis.name(), axis.unit())?;
    ordered_pool(
        values,
        l.threads,
        |&v| with_scan_value(&l.cfg.model, *axis, v).and_then(|spec| solve(&l.cfg, &spec)),
        |i, o| {
            output::scan_row(&mut w, values[i], &o)?;
            w.flush()?;
            if let Ok(o) = &o {
                output::write_all(&point_dir(&l.out, i), &l.header, o)?;
            }
            match &o {
                Ok(o) => println!("{} = {} : energy {:.11e}", axis.name(), values[i], o.energy),
                Err(e) => eprintln!("{} = {} : failed: {e:#}", axis.name(), values[i]),
            }
            Ok(())
        },
    )
}

fn point_dir(out: &Path, i: usize) -> PathBuf {
    out.join(format!("point_{i:03}"))
}

fn cmd_converge(l: &Loaded) -> Result<()> {
    let Some(cv) = &l.cfg.converge else {
        bail!("converge needs a [converge] block in the config");
    };
    let mut points = Vec::with_capacity(cv.series.len());
    ordered_pool(
        &cv.series,
        l.threads,
        |&v| with_converge_value(&l.cfg, cv.axis, v).and_then(|c| solve(&c, &c.model)),
        |i, o| {
            let o = o.with_context(|| format!("{} = {}", cv.axis.name(), cv.series[i]))?;
            println!("{} = {} : energy {:.11e}", cv.axis.name(), cv.series[i], o.energy);
            output::write_all(&point_dir(&l.out, i), &l.header, &o)?;
            points.push(SeriesPoint { parameter: cv.series[i], energy: o.energy, density: o.density });
            Ok(())
        },
    )?;
    let mut r = analyze_series(&points, cv.eps_e, cv.eps_rho)?;
    if cv.axis == ConvergeAxis::Es {
        r.optimal_region = optimal_region(&points, cv.eps_e_opt, cv.eps_rho_opt);
    }
    let energies: Vec<(f64, f64)> = points.iter().map(|p| (p.parameter, p.energy)).collect();
    output::write_convergence(&l.out, &l.header, cv.axis.name(), &energies, &r)?;
    match r.first_converged {
        Some(p) => println!("first converged {} = {p}", cv.axis.name()),
        None => println!("not converged within the series"),
    }
    if let Some((a, b)) = r.optimal_region {
        println!("optimal region {} = {a} .. {b}", cv.axis.name());
    }
    Ok(())
}

fn cmd_check(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match parse_config(&text) {
        Ok(cfg) => {
            println!("{}: ok (method {}, sha256 {})", path.display(), cfg.method.name(), config_digest(&text));
            Ok(())
        }
        Err(e) => bail!("{}:\n{e}", path.display()),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(c) => cmd_run(&load(c)?),
        Command::Scan(c) => cmd_scan(&load(c)?),
        Command::Converge(c) => cmd_converge(&load(c)?),
        Command::Check { config } => cmd_check(config),
    }
}
