//! Command-line surface: builtin/config system sources, analysis commands,
//! deterministic CSV/JSON/SVG emission, and a content-addressed result cache
//! for the expensive parameter scans.
//!
//! Exit codes: 0 success, 1 hypothesis checks failed (`check` only),
//! 2 configuration error, 3 numeric failure, 4 invariant violation detected
//! during a scan.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::bifurcation::{
    phi_decreasing, region_map, trace_dl, BifurcationError, DlCurvePoint, Family, RegionCell,
    RegionMap,
};
use crate::cycles::{
    cycle_count_weighted, find_cycles, origin_stability, scan_displacement, CycleOptions,
    HalfReturnOutcome,
};
use crate::flow::{integrate_with_stop, trajectory_csv, IntegrationOptions, StopMode, Trajectory};
use crate::hypotheses::check_hypotheses;
use crate::model::{self, OddTerm, SystemSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Parser)]
#[command(
    name = "liencycle",
    about = "Limit-cycle analysis of symmetric Liénard systems with a possible \
             sign-function jump in the restoring force",
    version
)]
pub struct Cli {
    /// Worker threads for parameter scans (default: logical cores)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Cache directory for scan results (env LIENCYCLE_CACHE also honored)
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Integrate one orbit and emit a trajectory CSV (optionally an SVG)
    Simulate(SimulateArgs),
    /// Detect and classify limit cycles; emit a JSON report
    Cycles(CyclesArgs),
    /// Run the hypothesis checkers; emit a JSON report and a table
    Check(CheckArgs),
    /// Classify an (a, b) parameter grid; emit a region CSV
    Regions(RegionsArgs),
    /// Trace the double-limit-cycle curve b = phi(a, c)
    TraceDl(TraceDlArgs),
    /// Phase portrait SVG with several orbits
    Portrait(PortraitArgs),
}

#[derive(Args)]
pub struct SystemSource {
    /// Builtin system, e.g. glo:1,-2.6,1 | filippov:1,-2.6,1 |
    /// rychkov:1,-2.6 | pls:1,1,-1.8 | hamiltonian-test
    #[arg(long, conflicts_with = "config")]
    pub system: Option<String>,
    /// TOML system description (see README for the schema)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct NumericArgs {
    /// Relative integration tolerance
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
    /// Absolute integration tolerance
    #[arg(long, default_value_t = 1e-12)]
    pub abs_tol: f64,
    /// Scan grid size for the displacement profile
    #[arg(long, default_value_t = 200)]
    pub n_grid: usize,
    /// Lower scan ordinate (default: 1e-3 * y_scale)
    #[arg(long)]
    pub y_min: Option<f64>,
    /// Upper scan ordinate (default: energy-based cap)
    #[arg(long)]
    pub y_max: Option<f64>,
    /// Time budget per half-return
    #[arg(long, default_value_t = 1e4)]
    pub t_max: f64,
}

impl NumericArgs {
    fn cycle_options(&self) -> CycleOptions {
        CycleOptions {
            integration: IntegrationOptions {
                rel_tol: self.rel_tol,
                abs_tol: self.abs_tol,
                ..Default::default()
            },
            n_grid: self.n_grid,
            y_min: self.y_min,
            y_max: self.y_max,
            t_max: self.t_max,
            ..Default::default()
        }
    }
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: SystemSource,
    #[arg(long, default_value_t = 0.0)]
    pub x0: f64,
    #[arg(long)]
    pub y0: f64,
    #[arg(long, default_value_t = 50.0)]
    pub t_max: f64,
    #[arg(long, value_enum, default_value_t = StopArg::Time)]
    pub stop: StopArg,
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub abs_tol: f64,
    /// CSV destination ("-" for stdout)
    #[arg(long, default_value = "-")]
    pub out: String,
    /// Optional SVG phase-plane rendering of this orbit
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StopArg {
    Time,
    HalfReturn,
    FullReturn,
}

#[derive(Args)]
pub struct CyclesArgs {
    #[command(flatten)]
    pub source: SystemSource,
    #[command(flatten)]
    pub numeric: NumericArgs,
    /// JSON report destination ("-" for stdout)
    #[arg(long, default_value = "-")]
    pub out: String,
    /// Optional displacement-profile CSV (y0,y1,displacement,max_x,outcome)
    #[arg(long)]
    pub profile_csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub source: SystemSource,
    /// Upper limit of the damping-work integral (default: domain_d)
    #[arg(long)]
    pub integral_upper: Option<f64>,
    /// JSON report destination ("-" for stdout)
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Args)]
pub struct RegionsArgs {
    /// Quintic family: glo | filippov | rychkov
    #[arg(long, default_value = "glo")]
    pub family: String,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// a range as lo:hi
    #[arg(long, default_value = "-1:2", allow_hyphen_values = true)]
    pub a_range: String,
    /// b range as lo:hi
    #[arg(long, default_value = "-4:0", allow_hyphen_values = true)]
    pub b_range: String,
    /// grid as NAxNB
    #[arg(long, default_value = "8x8")]
    pub grid: String,
    #[command(flatten)]
    pub numeric: NumericArgs,
    /// CSV destination ("-" for stdout)
    #[arg(long, default_value = "-")]
    pub out: String,
    /// Optional SVG raster of the region map
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args)]
pub struct TraceDlArgs {
    /// Quintic family: glo | filippov | rychkov
    #[arg(long, default_value = "glo")]
    pub family: String,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// comma-separated a values, all > 0
    #[arg(long, default_value = "0.5,1,2", allow_hyphen_values = true)]
    pub a: String,
    #[command(flatten)]
    pub numeric: NumericArgs,
    /// CSV destination ("-" for stdout)
    #[arg(long, default_value = "-")]
    pub out: String,
    /// Optional SVG of phi(a) between its proven bounds
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args)]
pub struct PortraitArgs {
    #[command(flatten)]
    pub source: SystemSource,
    /// comma-separated initial ordinates on the section x = 0
    #[arg(long, default_value = "0.5,1.5,3")]
    pub y0: String,
    #[arg(long, default_value_t = 30.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub abs_tol: f64,
    /// SVG destination
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
    fn numeric(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_NUMERIC,
            message: message.into(),
        }
    }
    fn invariant(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INVARIANT,
            message: message.into(),
        }
    }
}

/// Parse argv and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version itself with code 0
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.workers {
        // ignore the error if a global pool already exists (tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let cache = cli
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os("LIENCYCLE_CACHE").map(PathBuf::from));

    let result = match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Cycles(args) => cmd_cycles(args),
        Command::Check(args) => cmd_check(args),
        Command::Regions(args) => cmd_regions(args, cache.as_deref()),
        Command::TraceDl(args) => cmd_trace_dl(args, cache.as_deref()),
        Command::Portrait(args) => cmd_portrait(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

// ---------------------------------------------------------------------------
// system sources

/// TOML schema for a user-defined system.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    name: Option<String>,
    domain_d: f64,
    #[serde(default)]
    c: f64,
    f_terms: Vec<OddTerm>,
    g0_terms: Vec<OddTerm>,
}

fn parse_params(name: &str, rest: &str, expected: usize) -> Result<Vec<f64>, CliError> {
    let vals: Result<Vec<f64>, _> = rest.split(',').map(|p| p.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|e| {
        CliError::config(format!("--system {name}: cannot parse parameters '{rest}': {e}"))
    })?;
    if vals.len() != expected {
        return Err(CliError::config(format!(
            "--system {name}: expected {expected} parameters, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn build_system(source: &SystemSource) -> Result<SystemSpec, CliError> {
    if let Some(path) = &source.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("--config {}: {e}", path.display())))?;
        let cfg: ConfigFile = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("--config {}: {e}", path.display())))?;
        let name = cfg.name.unwrap_or_else(|| "config".into());
        return SystemSpec::new(name, cfg.f_terms, cfg.g0_terms, cfg.c, cfg.domain_d)
            .map_err(|e| CliError::config(format!("--config {}: {e}", path.display())));
    }
    let Some(spec_str) = &source.system else {
        return Err(CliError::config("one of --system or --config is required"));
    };
    let (name, rest) = spec_str
        .split_once(':')
        .map(|(n, r)| (n, Some(r)))
        .unwrap_or((spec_str.as_str(), None));
    let built = match (name, rest) {
        ("hamiltonian-test", None) => return Ok(model::hamiltonian_test()),
        ("glo", Some(r)) => {
            let p = parse_params(name, r, 3)?;
            model::glo(p[0], p[1], p[2])
        }
        ("filippov", Some(r)) => {
            let p = parse_params(name, r, 3)?;
            model::filippov(p[0], p[1], p[2])
        }
        ("rychkov", Some(r)) => {
            let p = parse_params(name, r, 2)?;
            model::rychkov(p[0], p[1])
        }
        ("pls", Some(r)) => {
            let p = parse_params(name, r, 3)?;
            model::pls(p[0], p[1], p[2])
        }
        _ => {
            return Err(CliError::config(format!(
                "unknown --system '{spec_str}' (builtins: glo:a,b,c filippov:a,b,c \
                 rychkov:m1,m2 pls:a1,a2,a3 hamiltonian-test)"
            )))
        }
    };
    built.map_err(|e| CliError::config(format!("--system {spec_str}: {e}")))
}

fn parse_family(s: &str) -> Result<Family, CliError> {
    Family::parse(s)
        .ok_or_else(|| CliError::config(format!("unknown --family '{s}' (glo|filippov|rychkov)")))
}

fn parse_range(s: &str, flag: &str) -> Result<(f64, f64), CliError> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| CliError::config(format!("{flag} must be lo:hi, got '{s}'")))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|e| CliError::config(format!("{flag}: {e}")))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|e| CliError::config(format!("{flag}: {e}")))?;
    if !(lo < hi) {
        return Err(CliError::config(format!("{flag}: need lo < hi, got {lo}:{hi}")));
    }
    Ok((lo, hi))
}

fn parse_grid(s: &str) -> Result<(usize, usize), CliError> {
    let (na, nb) = s
        .split_once('x')
        .ok_or_else(|| CliError::config(format!("--grid must be NAxNB, got '{s}'")))?;
    let na: usize = na
        .trim()
        .parse()
        .map_err(|e| CliError::config(format!("--grid: {e}")))?;
    let nb: usize = nb
        .trim()
        .parse()
        .map_err(|e| CliError::config(format!("--grid: {e}")))?;
    if na < 2 || nb < 2 {
        return Err(CliError::config("--grid: both sides must be >= 2"));
    }
    Ok((na, nb))
}

fn parse_list(s: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| CliError::config(format!("{flag}: '{p}': {e}")))
        })
        .collect()
}

fn write_output(dest: &str, bytes: &[u8]) -> Result<(), CliError> {
    if dest == "-" {
        std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::numeric(format!("writing stdout: {e}")))
    } else {
        fs::write(dest, bytes)
            .map_err(|e| CliError::numeric(format!("writing {dest}: {e}")))
    }
}

fn write_path(dest: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(dest, bytes)
        .map_err(|e| CliError::numeric(format!("writing {}: {e}", dest.display())))
}

// ---------------------------------------------------------------------------
// cache

fn cache_key(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p.as_bytes());
        hasher.update([0u8]);
    }
    format!("{:x}", hasher.finalize())
}

fn cache_get(dir: Option<&Path>, key: &str) -> Option<Vec<u8>> {
    fs::read(dir?.join(key)).ok()
}

fn cache_put(dir: Option<&Path>, key: &str, bytes: &[u8]) {
    let Some(dir) = dir else { return };
    if fs::create_dir_all(dir).is_ok() {
        let tmp = dir.join(format!("{key}.tmp{}", std::process::id()));
        if fs::write(&tmp, bytes).is_ok() {
            let _ = fs::rename(&tmp, dir.join(key));
        }
    }
}

// ---------------------------------------------------------------------------
// commands

fn cmd_simulate(args: &SimulateArgs) -> Result<i32, CliError> {
    let spec = build_system(&args.source)?;
    if args.x0.abs() > spec.domain_d() {
        return Err(CliError::config(format!(
            "--x0 {} is outside the domain |x| <= {}",
            args.x0,
            spec.domain_d()
        )));
    }
    let opts = IntegrationOptions {
        rel_tol: args.rel_tol,
        abs_tol: args.abs_tol,
        ..Default::default()
    };
    let stop = match args.stop {
        StopArg::Time => StopMode::Time,
        StopArg::HalfReturn => StopMode::HalfReturn,
        StopArg::FullReturn => StopMode::FullReturn,
    };
    let traj = integrate_with_stop(&spec, args.x0, args.y0, args.t_max, &opts, stop)
        .map_err(|e| CliError::numeric(e.to_string()))?;
    write_output(&args.out, trajectory_csv(&traj).as_bytes())?;
    if let Some(svg_path) = &args.svg {
        let svg = svg_portrait(&spec, std::slice::from_ref(&traj));
        write_path(svg_path, svg.as_bytes())?;
    }
    Ok(EXIT_OK)
}

fn cmd_cycles(args: &CyclesArgs) -> Result<i32, CliError> {
    let spec = build_system(&args.source)?;
    let opts = args.numeric.cycle_options();
    let cycles = find_cycles(&spec, &opts).map_err(|e| CliError::numeric(e.to_string()))?;
    let origin = origin_stability(&spec, &opts);
    let doc = serde_json::json!({
        "system": spec.name(),
        "origin": origin,
        "count": cycles.len(),
        "count_weighted": cycle_count_weighted(&cycles),
        "cycles": cycles,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("report serialization");
    text.push('\n');
    write_output(&args.out, text.as_bytes())?;

    if let Some(csv_path) = &args.profile_csv {
        use crate::flow::LienardField as _;
        let y_scale = spec.section_scale();
        let y_cap = 10.0 * (2.0 * spec.eval_big_g(spec.domain_d())).sqrt().max(1e-12);
        let y_min = opts.y_min.unwrap_or(1e-3 * y_scale);
        let y_max = opts.y_max.unwrap_or(y_cap).min(y_cap).max(2.0 * y_min);
        let profile = scan_displacement(&spec, y_min, y_max, opts.n_grid, &opts);
        let mut csv = String::from("y0,y1,displacement,max_x,outcome\n");
        for r in &profile.records {
            let outcome = match r.outcome {
                HalfReturnOutcome::Returned => "returned",
                HalfReturnOutcome::FellIntoOrigin => "fell_into_origin",
                HalfReturnOutcome::Escaped => "escaped",
            };
            csv.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                r.y0, r.y1, r.displacement, r.max_x, outcome
            ));
        }
        write_path(csv_path, csv.as_bytes())?;
    }
    Ok(EXIT_OK)
}

fn cmd_check(args: &CheckArgs) -> Result<i32, CliError> {
    let spec = build_system(&args.source)?;
    let report = check_hypotheses(&spec, args.integral_upper);
    let mut text = serde_json::to_string_pretty(&report).expect("report serialization");
    text.push('\n');
    write_output(&args.out, text.as_bytes())?;

    // human-readable summary on stderr so the JSON stream stays clean
    let fmt = |name: &str, holds: bool, marginal: bool| {
        format!(
            "  {name:8} {}{}",
            if holds { "holds" } else { "FAILS" },
            if marginal { " (marginal)" } else { "" }
        )
    };
    eprintln!("hypothesis check for {}:", spec.name());
    eprintln!("{}", fmt("H1", report.h1.holds, report.h1.marginal));
    eprintln!("{}", fmt("H2", report.h2.holds, report.h2.marginal));
    eprintln!("{}", fmt("H3", report.h3.holds, report.h3.marginal));
    eprintln!(
        "{} (branch: {:?})",
        fmt("H4", report.h4.holds, report.h4.marginal),
        report.h4_branch
    );
    if let Some(ad) = &report.thm_a_d {
        eprintln!("  comparison condition (d): {}", if ad.holds { "holds" } else { "FAILS" });
    }
    if let Some(t2) = &report.thm2 {
        eprintln!(
            "  exact-count extras: beta2>=2*beta1 {}, shift xi {}, f/g monotone {}, \
             integral gF = {:.6e} over [beta1, {}]",
            t2.beta_ratio_ok, t2.xi_ok, t2.fg_monotone, t2.integral_gf, t2.integral_upper
        );
    }
    Ok(if report.all_hold() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

fn regions_csv(map: &RegionMap) -> String {
    let mut csv = String::from("a,b,c,label,cycle_count,origin\n");
    for cell in &map.cells {
        csv.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{},{},{:?}\n",
            cell.a,
            cell.b,
            cell.c,
            cell.label.as_str(),
            cell.cycle_count,
            cell.origin
        ));
    }
    csv
}

fn cmd_regions(args: &RegionsArgs, cache: Option<&Path>) -> Result<i32, CliError> {
    let family = parse_family(&args.family)?;
    let a_range = parse_range(&args.a_range, "--a-range")?;
    let b_range = parse_range(&args.b_range, "--b-range")?;
    let grid = parse_grid(&args.grid)?;
    let opts = args.numeric.cycle_options();

    let key = cache_key(&[
        "regions-v1",
        &args.family,
        &format!("{:.16e}", args.c),
        &args.a_range,
        &args.b_range,
        &args.grid,
        &format!(
            "{:.3e}/{:.3e}/{}/{:?}/{:?}/{:.3e}",
            opts.integration.rel_tol,
            opts.integration.abs_tol,
            opts.n_grid,
            opts.y_min,
            opts.y_max,
            opts.t_max
        ),
    ]);
    if let Some(bytes) = cache_get(cache, &key) {
        write_output(&args.out, &bytes)?;
        return Ok(EXIT_OK);
    }

    let map = region_map(family, args.c, a_range, b_range, grid, &opts);
    let csv = regions_csv(&map);
    cache_put(cache, &key, csv.as_bytes());
    write_output(&args.out, csv.as_bytes())?;
    if let Some(svg_path) = &args.svg {
        write_path(svg_path, svg_regions(&map, a_range, b_range).as_bytes())?;
    }
    if !map.column_violations.is_empty() {
        return Err(CliError::invariant(format!(
            "region structure violated: {}",
            map.column_violations.join("; ")
        )));
    }
    Ok(EXIT_OK)
}

fn dl_csv(points: &[DlCurvePoint]) -> String {
    let mut csv = String::from("a,c,phi,lower,upper,bounds_ok,bracket_width\n");
    for p in points {
        csv.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}\n",
            p.a, p.c, p.phi, p.lower_bound, p.upper_bound, p.bounds_ok, p.bracket_width
        ));
    }
    csv
}

fn cmd_trace_dl(args: &TraceDlArgs, cache: Option<&Path>) -> Result<i32, CliError> {
    let family = parse_family(&args.family)?;
    let a_values = parse_list(&args.a, "--a")?;
    if a_values.iter().any(|&a| a <= 0.0) {
        return Err(CliError::config("--a: all values must be > 0"));
    }
    let opts = args.numeric.cycle_options();

    let key = cache_key(&[
        "trace-dl-v1",
        &args.family,
        &format!("{:.16e}", args.c),
        &args.a,
        &format!(
            "{:.3e}/{:.3e}/{}/{:?}/{:?}/{:.3e}",
            opts.integration.rel_tol,
            opts.integration.abs_tol,
            opts.n_grid,
            opts.y_min,
            opts.y_max,
            opts.t_max
        ),
    ]);
    let csv = if let Some(bytes) = cache_get(cache, &key) {
        String::from_utf8(bytes).map_err(|e| CliError::numeric(e.to_string()))?
    } else {
        let points = trace_dl(family, args.c, &a_values, &opts).map_err(|e| match e {
            BifurcationError::Model(m) => CliError::config(m.to_string()),
            other => CliError::numeric(other.to_string()),
        })?;
        if !phi_decreasing(&points) {
            eprintln!("warning: located phi values are not strictly decreasing in a");
        }
        if let Some(svg_path) = &args.svg {
            write_path(svg_path, svg_dl_curve(&points).as_bytes())?;
        }
        let csv = dl_csv(&points);
        if points.iter().all(|p| p.bounds_ok) {
            cache_put(cache, &key, csv.as_bytes());
        }
        csv
    };
    write_output(&args.out, csv.as_bytes())?;
    // the bound is the headline invariant: violation is a tripwire
    if csv.lines().skip(1).any(|l| l.split(',').nth(5) == Some("false")) {
        return Err(CliError::invariant(
            "a located phi value violates -5*sqrt(a)/2 < phi < -2*sqrt(a)",
        ));
    }
    Ok(EXIT_OK)
}

fn cmd_portrait(args: &PortraitArgs) -> Result<i32, CliError> {
    let spec = build_system(&args.source)?;
    let y0s = parse_list(&args.y0, "--y0")?;
    let opts = IntegrationOptions {
        rel_tol: args.rel_tol,
        abs_tol: args.abs_tol,
        ..Default::default()
    };
    let mut trajs = Vec::new();
    for &y0 in &y0s {
        let traj = integrate_with_stop(&spec, 0.0, y0, args.t_max, &opts, StopMode::Time)
            .map_err(|e| CliError::numeric(e.to_string()))?;
        trajs.push(traj);
    }
    write_path(&args.out, svg_portrait(&spec, &trajs).as_bytes())?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// SVG emission (dependency-free)

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 600.0;
const MARGIN: f64 = 50.0;

struct Mapper {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Mapper {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_lo) / (self.x_hi - self.x_lo) * (SVG_W - 2.0 * MARGIN)
    }
    fn py(&self, y: f64) -> f64 {
        // SVG y grows downward
        SVG_H - MARGIN - (y - self.y_lo) / (self.y_hi - self.y_lo) * (SVG_H - 2.0 * MARGIN)
    }
}

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" \
         viewBox=\"0 0 {SVG_W} {SVG_H}\">\n\
         <rect width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{title}</text>\n",
        SVG_W / 2.0
    )
}

fn svg_axes(m: &Mapper, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
        MARGIN,
        MARGIN,
        SVG_W - 2.0 * MARGIN,
        SVG_H - 2.0 * MARGIN
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\">{x_label}</text>\n",
        SVG_W / 2.0,
        SVG_H - 12.0
    ));
    s.push_str(&format!(
        "<text x=\"14\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{y_label}</text>\n",
        SVG_H / 2.0,
        SVG_H / 2.0
    ));
    for (v, label_x) in [(m.x_lo, true), (m.x_hi, true)] {
        let _ = label_x;
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"middle\">{v:.3}</text>\n",
            m.px(v),
            SVG_H - MARGIN + 16.0
        ));
    }
    for v in [m.y_lo, m.y_hi] {
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"end\">{v:.3}</text>\n",
            MARGIN - 6.0,
            m.py(v) + 4.0
        ));
    }
    s
}

fn polyline(points: impl Iterator<Item = (f64, f64)>, m: &Mapper, style: &str) -> String {
    let pts: Vec<String> = points
        .map(|(x, y)| format!("{:.2},{:.2}", m.px(x), m.py(y)))
        .collect();
    format!(
        "<polyline fill=\"none\" {style} points=\"{}\"/>\n",
        pts.join(" ")
    )
}

/// Orbits, the nullcline y = F(x), and the section x = 0.
fn svg_portrait(spec: &SystemSpec, trajs: &[Trajectory]) -> String {
    let mut x_max = 1e-6f64;
    let mut y_max = 1e-6f64;
    for traj in trajs {
        for &(_, x, y) in &traj.samples {
            x_max = x_max.max(x.abs());
            y_max = y_max.max(y.abs());
        }
    }
    x_max *= 1.1;
    y_max *= 1.1;
    let m = Mapper {
        x_lo: -x_max,
        x_hi: x_max,
        y_lo: -y_max,
        y_hi: y_max,
    };
    let mut s = svg_header(&format!("phase portrait: {}", spec.name()));
    s.push_str(&svg_axes(&m, "x", "y"));
    // section x = 0
    s.push_str(&format!(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#999\" \
         stroke-dasharray=\"4 3\"/>\n",
        m.px(0.0),
        m.py(m.y_lo),
        m.py(m.y_hi)
    ));
    // nullcline y = F(x), clipped to the viewport
    let n = 512;
    let nullcline = (0..=n).filter_map(|i| {
        let x = -x_max + 2.0 * x_max * i as f64 / n as f64;
        let y = spec.eval_big_f(x);
        (y.abs() <= y_max).then_some((x, y))
    });
    s.push_str(&polyline(
        nullcline,
        &m,
        "stroke=\"#2ca02c\" stroke-width=\"1.5\"",
    ));
    let colors = ["#1f77b4", "#d62728", "#9467bd", "#ff7f0e", "#8c564b"];
    for (i, traj) in trajs.iter().enumerate() {
        let style = format!("stroke=\"{}\" stroke-width=\"1\"", colors[i % colors.len()]);
        s.push_str(&polyline(
            traj.samples.iter().map(|&(_, x, y)| (x, y)),
            &m,
            &style,
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn region_color(cell: &RegionCell) -> &'static str {
    use crate::bifurcation::RegionLabel::*;
    match cell.label {
        I => "#9ecae1",
        II => "#c7e9c0",
        III => "#fcae91",
        H1 => "#6a51a3",
        H2 => "#54278f",
        DlNear => "#ffd92f",
        Unclassified => "#cccccc",
    }
}

/// Region raster with the cycle-count transition polyline overlaid.
fn svg_regions(map: &RegionMap, a_range: (f64, f64), b_range: (f64, f64)) -> String {
    let m = Mapper {
        x_lo: a_range.0,
        x_hi: a_range.1,
        y_lo: b_range.0,
        y_hi: b_range.1,
    };
    let mut a_vals: Vec<f64> = map.cells.iter().map(|c| c.a).collect();
    a_vals.dedup();
    let nb = map.cells.len() / a_vals.len().max(1);
    let mut s = svg_header("parameter regions (fixed c)");
    // cell size from grid spacing
    let da = if a_vals.len() > 1 {
        (a_range.1 - a_range.0) / (a_vals.len() - 1) as f64
    } else {
        a_range.1 - a_range.0
    };
    let db = if nb > 1 {
        (b_range.1 - b_range.0) / (nb - 1) as f64
    } else {
        b_range.1 - b_range.0
    };
    for cell in &map.cells {
        let x = m.px(cell.a - 0.5 * da);
        let y = m.py(cell.b + 0.5 * db);
        let w = m.px(cell.a + 0.5 * da) - x;
        let h = m.py(cell.b - 0.5 * db) - y;
        s.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" \
             fill=\"{}\" stroke=\"none\"><title>a={} b={} {} ({} cycles)</title></rect>\n",
            region_color(cell),
            cell.a,
            cell.b,
            cell.label.as_str(),
            cell.cycle_count
        ));
    }
    // transition polyline: midpoint between the top III and bottom II per column
    let mut fold = Vec::new();
    for (ai, &a) in a_vals.iter().enumerate() {
        if a <= 0.0 {
            continue;
        }
        let col = &map.cells[ai * nb..(ai + 1) * nb];
        let top_iii = col
            .iter()
            .filter(|c| c.label == crate::bifurcation::RegionLabel::III)
            .map(|c| c.b)
            .fold(f64::NEG_INFINITY, f64::max);
        let bottom_ii = col
            .iter()
            .filter(|c| c.label == crate::bifurcation::RegionLabel::II)
            .map(|c| c.b)
            .fold(f64::INFINITY, f64::min);
        if top_iii.is_finite() && bottom_ii.is_finite() && top_iii < bottom_ii {
            fold.push((a, 0.5 * (top_iii + bottom_ii)));
        }
    }
    if fold.len() >= 2 {
        s.push_str(&polyline(
            fold.into_iter(),
            &m,
            "stroke=\"#000\" stroke-width=\"2\" stroke-dasharray=\"6 3\"",
        ));
    }
    s.push_str(&svg_axes(&m, "a", "b"));
    s.push_str("</svg>\n");
    s
}

/// phi(a) with its proven bounding curves.
fn svg_dl_curve(points: &[DlCurvePoint]) -> String {
    let mut pts: Vec<&DlCurvePoint> = points.iter().collect();
    pts.sort_by(|p, q| p.a.partial_cmp(&q.a).unwrap());
    let a_lo = pts.first().map(|p| p.a).unwrap_or(0.1);
    let a_hi = pts.last().map(|p| p.a).unwrap_or(1.0);
    let b_lo = pts
        .iter()
        .map(|p| p.lower_bound)
        .fold(f64::INFINITY, f64::min)
        - 0.1;
    let b_hi = pts
        .iter()
        .map(|p| p.upper_bound)
        .fold(f64::NEG_INFINITY, f64::max)
        + 0.1;
    let m = Mapper {
        x_lo: a_lo,
        x_hi: a_hi,
        y_lo: b_lo,
        y_hi: b_hi,
    };
    let mut s = svg_header("double-limit-cycle curve b = phi(a, c)");
    s.push_str(&svg_axes(&m, "a", "b"));
    let n = 256;
    let sample = |f: fn(f64) -> f64| {
        (0..=n)
            .map(move |i| {
                let a = a_lo + (a_hi - a_lo) * i as f64 / n as f64;
                (a, f(a))
            })
            .collect::<Vec<_>>()
    };
    s.push_str(&polyline(
        sample(|a| -2.5 * a.sqrt()).into_iter(),
        &m,
        "stroke=\"#999\" stroke-dasharray=\"4 3\"",
    ));
    s.push_str(&polyline(
        sample(|a| -2.0 * a.sqrt()).into_iter(),
        &m,
        "stroke=\"#999\" stroke-dasharray=\"4 3\"",
    ));
    s.push_str(&polyline(
        pts.iter().map(|p| (p.a, p.phi)),
        &m,
        "stroke=\"#d62728\" stroke-width=\"2\"",
    ));
    for p in &pts {
        s.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#d62728\"/>\n",
            m.px(p.a),
            m.py(p.phi)
        ));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_parsing() {
        let src = SystemSource {
            system: Some("glo:1,-2.6,1".into()),
            config: None,
        };
        let s = build_system(&src).unwrap();
        assert_eq!(s.name(), "glo(1,-2.6,1)");

        let src = SystemSource {
            system: Some("hamiltonian-test".into()),
            config: None,
        };
        assert_eq!(build_system(&src).unwrap().name(), "hamiltonian-test");

        let src = SystemSource {
            system: Some("glo:1,-2.6".into()),
            config: None,
        };
        assert!(build_system(&src).is_err());

        let src = SystemSource {
            system: Some("nonsense:1".into()),
            config: None,
        };
        assert!(build_system(&src).is_err());
    }

    #[test]
    fn range_grid_list_parsers() {
        assert_eq!(parse_range("-1:2", "--a-range").unwrap(), (-1.0, 2.0));
        assert!(parse_range("2:-1", "--a-range").is_err());
        assert_eq!(parse_grid("8x12").unwrap(), (8, 12));
        assert!(parse_grid("1x5").is_err());
        assert_eq!(parse_list("0.5, 1,2", "--a").unwrap(), vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn cache_roundtrip() {
        let dir = std::env::temp_dir().join(format!("liencycle-cache-test-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        let key = cache_key(&["x", "y"]);
        assert_eq!(cache_get(Some(&dir), &key), None);
        cache_put(Some(&dir), &key, b"payload");
        assert_eq!(cache_get(Some(&dir), &key).unwrap(), b"payload");
        // distinct inputs hash apart even when concatenations collide
        assert_ne!(cache_key(&["xy", ""]), key);
        let _ = fs::remove_dir_all(&dir);
    }
}
