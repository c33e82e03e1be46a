use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kcm::basis::write_basis_csv;
use kcm::pipeline::{
    check_cells_file, run, Analysis, BlockChoice, GoldenReport, ModelEntry, ReportBundle, RunConfig, Sites,
};
use kcm::spectral::WindowPolicy;
use kcm::Error;

const EXIT_MISMATCH: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "kcm", version, about = "Exact diagonalization of kinetically constrained spin chains")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Run description in TOML; flags below override its fields.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Start from a named run description.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Chain lengths: `12`, `10,12,14` or `10..16` (inclusive).
    #[arg(short = 'L', long = "sites", global = true)]
    sites: Option<String>,
    /// Model label (N0..N3, QGL, PERT_PPXPP, HTOT, PPXPP); repeatable.
    #[arg(short, long = "model", global = true)]
    models: Vec<String>,
    /// Sector descriptor such as `k0.Ip` or `k0.Ip.Kp`, or `none`.
    #[arg(long, global = true)]
    sector: Option<String>,
    /// Perturbation strength of PERT_PPXPP.
    #[arg(long, global = true, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// Output directory [default: runs/<name>].
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(short = 'j', long, global = true)]
    threads: Option<usize>,
    /// Golden table checked after the run (built-in name or CSV path); repeatable.
    #[arg(long, global = true)]
    golden: Vec<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BlockArg {
    Largest,
    Sector,
}

impl From<BlockArg> for BlockChoice {
    fn from(b: BlockArg) -> Self {
        match b {
            BlockArg::Largest => BlockChoice::Largest,
            BlockArg::Sector => BlockChoice::Sector,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the effective basis of each model as CSV.
    Basis {
        /// Enumerate all 2^L configurations instead.
        #[arg(long)]
        full: bool,
    },
    /// Count Krylov fragments and classify their growth.
    Fragment {
        /// Also write the member list of every fragment.
        #[arg(long)]
        manifests: bool,
    },
    /// Diagonalize the largest fragment or the whole sector.
    Spectrum {
        #[arg(long, value_enum)]
        block: Option<BlockArg>,
    },
    /// Level-spacing ratio, spacing histogram and spectral form factor.
    Chaos {
        #[arg(long, value_enum)]
        block: Option<BlockArg>,
        /// `lower-middle`, `full` or `central:<fraction>`.
        #[arg(long)]
        window: Option<String>,
    },
    /// Entanglement, stabilizer Rényi entropy and participation ratio per eigenstate.
    Observe {
        #[arg(long, value_enum)]
        block: Option<BlockArg>,
        /// Largest chain length for which the SRE is evaluated.
        #[arg(long)]
        sre_sites: Option<usize>,
    },
    /// Return probability of the scar state on the effective basis.
    Quench {
        /// Unit-cell length of the scar state.
        #[arg(long)]
        cell: Option<usize>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Run every analysis of a configuration or preset.
    Report,
    /// Compare computed cells against a golden table.
    GoldenCheck {
        /// Built-in table name or path to a golden CSV.
        #[arg(long)]
        table: String,
        /// A `cells.csv` from an earlier run; without it the configuration is run.
        #[arg(long)]
        cells: Option<PathBuf>,
    },
}

enum Outcome {
    Pass,
    Mismatch,
}

fn parse_sites(text: &str) -> Result<Sites, Error> {
    let bad = || Error::Config(format!("cannot parse chain lengths {text:?}"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        return Ok(Sites::Range { from: num(a)?, to: num(b)? });
    }
    let list = text.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
    Ok(match list.as_slice() {
        [one] => Sites::One(*one),
        _ => Sites::List(list),
    })
}

fn parse_window(text: &str) -> Result<WindowPolicy, Error> {
    match text {
        "lower-middle" => Ok(WindowPolicy::LowerMiddle),
        "full" => Ok(WindowPolicy::Full),
        _ => text
            .strip_prefix("central:")
            .and_then(|f| f.parse().ok())
            .map(|fraction| WindowPolicy::Central { fraction })
            .ok_or_else(|| Error::Config(format!("unknown window {text:?}"))),
    }
}

/// The configuration named by `--config`/`--preset`, with flag overrides.
fn configure(g: &Global, name: &str, analyses: Option<Vec<Analysis>>) -> Result<RunConfig, Error> {
    let base = match (&g.config, &g.preset) {
        (Some(path), _) => Some(RunConfig::load(path)?),
        (None, Some(p)) => Some(RunConfig::preset(p)?),
        (None, None) => None,
    };
    let mut cfg = match base {
        Some(cfg) => cfg,
        None => {
            let sites = g
                .sites
                .as_deref()
                .ok_or_else(|| Error::Config("give --sites, --config or --preset".into()))?;
            RunConfig::new(name, Vec::new(), parse_sites(sites)?, Vec::new())
        }
    };
    if let Some(a) = analyses {
        cfg.analyses = a;
    }
    if let Some(s) = &g.sites {
        cfg.sites = parse_sites(s)?;
    }
    if !g.models.is_empty() {
        cfg.models = g.models.iter().map(ModelEntry::label).collect();
    }
    if let Some(s) = &g.sector {
        cfg.sector = s.clone();
        for m in &mut cfg.models {
            m.sector = None;
        }
    }
    if let Some(d) = g.delta {
        cfg.delta = d;
        for m in &mut cfg.models {
            m.delta = None;
        }
    }
    if let Some(o) = &g.output {
        cfg.output = Some(o.clone());
    }
    if !g.golden.is_empty() {
        cfg.golden = g.golden.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summarize(bundle: &ReportBundle) -> Result<Outcome, Error> {
    let mut out = std::io::stdout().lock();
    let io = |e| Error::Config(format!("cannot write to stdout: {e}"));
    for r in &bundle.records {
        writeln!(out, "{}", serde_json::to_string(r).map_err(|e| Error::Serde(e.to_string()))?).map_err(io)?;
    }
    for g in &bundle.golden {
        print_golden(g);
    }
    eprintln!(
        "wrote {} artifacts to {}",
        bundle.artifacts.len(),
        bundle.output.display()
    );
    Ok(if bundle.passed() { Outcome::Pass } else { Outcome::Mismatch })
}

fn print_golden(g: &GoldenReport) {
    let failed = g.failures().count();
    println!(
        "golden {}: {} cells compared, {} failed, {} unmatched",
        g.table,
        g.comparisons.len(),
        failed,
        g.unmatched.len()
    );
    for c in g.failures() {
        eprintln!("mismatch: {c}");
    }
}

fn basis(g: &Global, full: bool) -> Result<Outcome, Error> {
    let cfg = configure(g, "basis", Some(vec![Analysis::Dimensions]))?;
    let models = cfg.resolved_models()?;
    for (model, _) in &models {
        for l in cfg.sites.lengths() {
            let b = if full { model.full_basis(l)? } else { model.effective_basis(l)? };
            match &g.output {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
                    let path = dir.join(format!("basis_{}_L{l}.csv", model.label));
                    let file = std::fs::File::create(&path)
                        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                    write_basis_csv(&b, Some(&model.rule), file)?;
                    eprintln!("{}: {} states", path.display(), b.len());
                }
                None => write_basis_csv(&b, Some(&model.rule), std::io::stdout().lock())?,
            }
        }
    }
    Ok(Outcome::Pass)
}

fn execute(cli: Cli) -> Result<Outcome, Error> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let spectral = |cfg: &mut RunConfig, block: Option<BlockArg>| {
        if let Some(b) = block {
            cfg.block = b.into();
        }
    };
    let cfg = match &cli.command {
        Command::Basis { full } => return basis(g, *full),
        Command::Fragment { manifests } => {
            let mut cfg = configure(g, "fragment", Some(vec![Analysis::Fragmentation]))?;
            cfg.manifests |= manifests;
            cfg
        }
        Command::Spectrum { block } => {
            let mut cfg = configure(g, "spectrum", Some(vec![Analysis::Spectrum]))?;
            spectral(&mut cfg, *block);
            cfg
        }
        Command::Chaos { block, window } => {
            let mut cfg = configure(g, "chaos", Some(vec![Analysis::Spectrum, Analysis::Chaos]))?;
            spectral(&mut cfg, *block);
            if let Some(w) = window {
                cfg.window = parse_window(w)?;
            }
            cfg
        }
        Command::Observe { block, sre_sites } => {
            let mut cfg = configure(g, "observe", Some(vec![Analysis::Observables]))?;
            spectral(&mut cfg, *block);
            if let Some(s) = sre_sites {
                cfg.caps.sre_sites = *s;
            }
            cfg
        }
        Command::Quench { cell, t_max, points } => {
            let mut cfg = configure(g, "quench", Some(vec![Analysis::Dynamics]))?;
            if g.sector.is_none() {
                cfg.sector = "none".into();
            }
            if let Some(c) = cell {
                cfg.quench.cell = *c;
            }
            if let Some(t) = t_max {
                cfg.quench.t_max = *t;
            }
            if let Some(p) = points {
                cfg.quench.points = *p;
            }
            cfg
        }
        Command::Report => {
            if g.config.is_none() && g.preset.is_none() {
                return Err(Error::Config("report needs --config or --preset".into()));
            }
            configure(g, "report", None)?
        }
        Command::GoldenCheck { table, cells } => {
            if let Some(path) = cells {
                let report = check_cells_file(path, table)?;
                print_golden(&report);
                return Ok(if report.passed() { Outcome::Pass } else { Outcome::Mismatch });
            }
            if g.config.is_none() && g.preset.is_none() {
                return Err(Error::Config("golden-check needs --cells, --config or --preset".into()));
            }
            let mut cfg = configure(g, "golden-check", None)?;
            cfg.golden = vec![table.clone()];
            cfg
        }
    };
    cfg.validate()?;
    summarize(&run(&cfg)?)
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Resource { .. } => EXIT_RESOURCE,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Mismatch) => ExitCode::from(EXIT_MISMATCH),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
