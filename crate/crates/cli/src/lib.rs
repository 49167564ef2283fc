//! Subcommands behind the `conic-duality` binary.
//!
//! Each `cmd_*` function writes its human-readable report to the given sink
//! and returns the process exit code, so tests can drive them without
//! spawning a process.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use conic_duality_core::duality::DualityError;
use conic_duality_core::{
    duality_report, paper_example, ConfigError, MarketConfig, MarketError, NoArbitrageOutcome,
    SolverConfig,
};

pub mod report;
pub mod svg;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_ARBITRAGE: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;
pub const EXIT_SOLVER: i32 = 5;
pub const EXIT_WEAK_DUALITY: i32 = 6;

/// Command-line tolerance overrides applied on top of the config's own.
#[derive(Debug, Clone, Copy, Default)]
pub struct Tolerances {
    pub lp: Option<f64>,
    pub pg: Option<f64>,
    pub strict: Option<f64>,
    pub cone: Option<f64>,
}

impl Tolerances {
    pub fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(v) = self.lp {
            cfg.lp_tol = v;
        }
        if let Some(v) = self.pg {
            cfg.pg_tol = v;
        }
        if let Some(v) = self.strict {
            cfg.eps_strict = v;
        }
        if let Some(v) = self.cone {
            cfg.cone_tol = v;
        }
    }
}

#[derive(Debug, Clone)]
pub struct DualityOptions {
    /// Overrides `grid.points` from the config.
    pub grid: Option<usize>,
    pub svg: bool,
    pub out_dir: PathBuf,
    pub tolerances: Tolerances,
}

impl Default for DualityOptions {
    fn default() -> Self {
        Self {
            grid: None,
            svg: false,
            out_dir: PathBuf::from("out"),
            tolerances: Tolerances::default(),
        }
    }
}

/// Sizes the global rayon pool from `CONIC_DUALITY_THREADS` when it is set.
pub fn init_threads() {
    if let Some(n) = std::env::var("CONIC_DUALITY_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // Fails only if a pool already exists, which is fine.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn load(path: &Path, out: &mut dyn Write) -> Result<MarketConfig, i32> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(out, "error: cannot read {}: {e}", path.display());
            return Err(EXIT_PARSE);
        }
    };
    MarketConfig::from_json(&text).map_err(|e| {
        let _ = writeln!(out, "error: {e}");
        EXIT_PARSE
    })
}

fn config_exit(e: &ConfigError) -> i32 {
    match e {
        ConfigError::Parse { .. } => EXIT_PARSE,
        ConfigError::Market(m) => market_exit(m),
        ConfigError::Duality(d) => duality_exit(d),
        _ => EXIT_VIOLATION,
    }
}

fn market_exit(e: &MarketError) -> i32 {
    match e {
        MarketError::Inconclusive { .. } => EXIT_INCONCLUSIVE,
        MarketError::SolverFailure(_) => EXIT_SOLVER,
        _ => EXIT_VIOLATION,
    }
}

fn duality_exit(e: &DualityError) -> i32 {
    match e {
        DualityError::WeakDualityViolation { .. } => EXIT_WEAK_DUALITY,
        DualityError::Market(m) => market_exit(m),
        DualityError::InvalidWeight(_)
        | DualityError::EmptyGrid
        | DualityError::DimensionMismatch { .. }
        | DualityError::Utility(_) => EXIT_VIOLATION,
        DualityError::SolverFailure(_) | DualityError::SeparationFailure => EXIT_SOLVER,
    }
}

/// Checks every config invariant and prints one line per violation.
pub fn cmd_validate(path: &Path, out: &mut dyn Write) -> i32 {
    let cfg = match load(path, out) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let violations = cfg.violations();
    if violations.is_empty() {
        let _ = writeln!(out, "ok: d = {}, config is valid", cfg.d);
        return EXIT_OK;
    }
    for v in &violations {
        let _ = writeln!(out, "violation: {v}");
    }
    EXIT_VIOLATION
}

/// Prints either a consistent pricing process or an arbitrage witness.
pub fn cmd_no_arbitrage(path: &Path, tol: &Tolerances, out: &mut dyn Write) -> i32 {
    let cfg = match load(path, out) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let mut inst = match cfg.build() {
        Ok(i) => i,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return config_exit(&e);
        }
    };
    tol.apply(&mut inst.solver);
    let market = &inst.set.market;
    match market.check_no_arbitrage(&inst.solver) {
        Ok(NoArbitrageOutcome::NoArbitrage {
            certificate,
            margin,
        }) => {
            let _ = writeln!(out, "no-arbitrage: margin {margin}");
            let _ = report::write_certificate(out, market.tree(), &certificate);
            EXIT_OK
        }
        Ok(NoArbitrageOutcome::Arbitrage { witness, plan }) => {
            let _ = writeln!(out, "arbitrage");
            let _ = report::write_witness(out, market, &witness, &plan);
            EXIT_ARBITRAGE
        }
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            market_exit(&e)
        }
    }
}

/// Solves both scalarizations over the weight grid and writes the CSV
/// (and optionally SVG) outputs into `opts.out_dir`.
pub fn cmd_duality(path: &Path, opts: &DualityOptions, out: &mut dyn Write) -> i32 {
    let mut cfg = match load(path, out) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(n) = opts.grid {
        cfg.grid.points = n;
    }
    let mut inst = match cfg.build() {
        Ok(i) => i,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return config_exit(&e);
        }
    };
    opts.tolerances.apply(&mut inst.solver);
    let rep = match duality_report(&inst.set, &inst.utility, &inst.grid, &inst.solver) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return duality_exit(&e);
        }
    };
    if let Err(e) = write_outputs(&opts.out_dir, &inst.set, &rep, opts.svg) {
        let _ = writeln!(out, "error: writing {}: {e}", opts.out_dir.display());
        return EXIT_PARSE;
    }
    let _ = writeln!(
        out,
        "{} weights, max relative gap {:.3e}, slater {}, no-arbitrage {}, {:.3} s",
        rep.reports.len(),
        rep.max_relative_gap,
        rep.slater,
        rep.no_arbitrage,
        rep.seconds
    );
    for (w, why) in &rep.upper.skipped {
        let _ = writeln!(out, "skipped weight {:?}: {why}", w.as_slice());
    }
    let _ = writeln!(out, "wrote {}", opts.out_dir.display());
    if rep.no_arbitrage {
        EXIT_OK
    } else {
        let _ = writeln!(
            out,
            "market admits arbitrage; the dual has no interior point"
        );
        EXIT_ARBITRAGE
    }
}

fn write_outputs(
    dir: &Path,
    set: &conic_duality_core::AttainableSet,
    rep: &conic_duality_core::DualityReport,
    svg: bool,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let d = set.dim();
    report::write_scalarizations(
        fs::File::create(dir.join("scalarizations.csv"))?,
        d,
        &rep.reports,
    )?;
    report::write_outer(
        fs::File::create(dir.join("upper_image_outer.csv"))?,
        d,
        &rep.upper,
    )?;
    report::write_inner(
        fs::File::create(dir.join("upper_image_inner.csv"))?,
        d,
        &rep.upper,
    )?;
    report::write_summary(fs::File::create(dir.join("summary.csv"))?, rep)?;
    if svg && d == 2 {
        fs::write(dir.join("upper_image.svg"), svg::upper_image(&rep.upper))?;
        fs::write(dir.join("cones.svg"), svg::cones(&set.market))?;
    }
    Ok(())
}

/// Prints the two-asset ternary example as canonical JSON.
pub fn cmd_paper_example(grid: Option<usize>, out: &mut dyn Write) -> i32 {
    let mut cfg = paper_example();
    if let Some(n) = grid {
        cfg.grid.points = n;
    }
    match out.write_all(cfg.to_json().as_bytes()) {
        Ok(()) => EXIT_OK,
        Err(_) => EXIT_PARSE,
    }
}
