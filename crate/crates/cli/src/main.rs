//! `ite`: interior transmission eigenvalues of a radially stratified ball.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use ite_core::cartwright::{
    default_radii, indicator_estimate, indicator_width, wedge_density, IndicatorEstimate, Wedge,
    WedgeLabel,
};
use ite_core::inverse::{compare_spectra, recover_b, sl_eigenvalues, SlMode, Spectrum, PAIR_TOL};
use ite_core::radial::SolverOptions;
use ite_core::zeros::{find_zeros, BoxRegion, ZeroOptions, ZeroSet};
use ite_core::{IteError, RefractionProfile};

const QUAD_TOL: f64 = 1e-12;

#[derive(Parser, Debug)]
#[command(name = "ite", version, about = "Interior transmission eigenvalues for radial refraction indices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Find all zeros of the determinant in a box
    Eigs(EigsArgs),
    /// Fit the counting-function density of zeros in a wedge
    Density(DensityArgs),
    /// Estimate the growth indicator along rays
    Indicator(IndicatorArgs),
    /// Recover B from an eigenvalue set
    InvertB(InvertArgs),
    /// Compare two spectra
    Compare(CompareArgs),
    /// Real eigenvalues of the Liouville-transformed Sturm-Liouville problem
    SlEigs(SlArgs),
    /// Check a profile
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Output file (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Relative tolerance of the radial integrator
    #[arg(long, default_value_t = SolverOptions::default().rtol)]
    rtol: f64,
    /// Absolute tolerance of the radial integrator
    #[arg(long, default_value_t = SolverOptions::default().atol)]
    atol: f64,
    /// Quadrature tolerance for the Liouville map
    #[arg(long, default_value_t = QUAD_TOL)]
    quad_tol: f64,
    /// Newton stopping tolerance for refined zeros
    #[arg(long, default_value_t = ZeroOptions::default().refine_tol)]
    refine_tol: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct EigsArgs {
    /// Profile JSON, inline or as a file path
    #[arg(long)]
    profile: String,
    /// re_min,re_max,im_min,im_max
    #[arg(long = "box", allow_hyphen_values = true)]
    region: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct DensityArgs {
    #[arg(long, conflicts_with = "zeros")]
    profile: Option<String>,
    #[arg(long = "box", allow_hyphen_values = true, requires = "profile")]
    region: Option<String>,
    /// ZeroSet file produced by `eigs`
    #[arg(long)]
    zeros: Option<PathBuf>,
    /// sigma1, sigma2, off-axis-upper, off-axis-lower, or theta_min,theta_max
    #[arg(long, default_value = "sigma1", allow_hyphen_values = true)]
    wedge: String,
    /// Half-opening of the named wedges
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value = "50,200")]
    window: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct IndicatorArgs {
    #[arg(long)]
    profile: String,
    /// Comma-separated ray angles
    #[arg(long, default_value = "0.5235987755982988,1.0471975511965976,1.5707963267948966", allow_hyphen_values = true)]
    theta: String,
    #[arg(long, default_value_t = 200.0)]
    r_max: f64,
    #[arg(long, default_value_t = 41)]
    samples: usize,
    /// Also report the width h(pi/2) + h(-pi/2)
    #[arg(long)]
    width: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct InvertArgs {
    /// Spectrum or ZeroSet file
    #[arg(long)]
    spectrum: PathBuf,
    #[arg(long, default_value = "50,200")]
    window: String,
    /// Wedge used when the input is a ZeroSet
    #[arg(long, default_value = "sigma1", allow_hyphen_values = true)]
    wedge: String,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Two Spectrum or ZeroSet files
    #[arg(long, num_args = 2, required = true)]
    spectrum: Vec<PathBuf>,
    #[arg(long, default_value_t = PAIR_TOL)]
    pair_tol: f64,
    #[arg(long, default_value = "sigma1", allow_hyphen_values = true)]
    wedge: String,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModeArg {
    Dirichlet,
    DirichletNeumann,
}

#[derive(Args, Debug)]
struct SlArgs {
    #[arg(long)]
    profile: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Dirichlet)]
    mode: ModeArg,
    #[arg(long, default_value_t = 30.0)]
    k_max: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    profile: String,
    #[command(flatten)]
    common: Common,
}

enum Failure {
    Usage(String),
    Numerical(IteError),
}

impl From<IteError> for Failure {
    fn from(e: IteError) -> Self {
        if e.is_input_error() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Numerical(e)
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(msg.into()))
}

impl Common {
    fn check(&self) -> Outcome<()> {
        for (name, v) in [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("quad-tol", self.quad_tol),
            ("refine-tol", self.refine_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return usage(format!("--{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    fn solver(&self) -> SolverOptions {
        SolverOptions {
            rtol: self.rtol,
            atol: self.atol,
            ..SolverOptions::default()
        }
    }

    fn zero_options(&self) -> ZeroOptions {
        ZeroOptions {
            refine_tol: self.refine_tol,
            solver: self.solver(),
            ..ZeroOptions::default()
        }
    }

    fn tolerances(&self) -> Value {
        let z = self.zero_options();
        json!({
            "rtol": z.solver.rtol,
            "atol": z.solver.atol,
            "k_max": z.solver.k_max,
            "max_steps": z.solver.max_steps,
            "quad_tol": self.quad_tol,
            "refine_tol": z.refine_tol,
            "residual_max": z.residual_max,
            "contour_floor": z.contour.floor,
            "min_box": z.min_box,
            "cluster_size": z.cluster_size,
            "degenerate_floor": z.degenerate_floor,
        })
    }
}

fn load_profile(arg: &str) -> Outcome<RefractionProfile> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).or_else(|e| usage(format!("cannot read profile {arg}: {e}")))?
    };
    Ok(RefractionProfile::from_json(&text)?)
}

fn parse_list(s: &str, n: Option<usize>, what: &str) -> Outcome<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let vals = vals.or_else(|e| usage(format!("bad {what} '{s}': {e}")))?;
    if let Some(n) = n {
        if vals.len() != n {
            return usage(format!("{what} needs {n} comma-separated numbers, got '{s}'"));
        }
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return usage(format!("{what} must be finite"));
    }
    Ok(vals)
}

fn parse_box(s: &str) -> Outcome<BoxRegion> {
    let v = parse_list(s, Some(4), "box")?;
    Ok(BoxRegion::new(v[0], v[1], v[2], v[3])?)
}

fn parse_window(s: &str) -> Outcome<(f64, f64)> {
    let v = parse_list(s, Some(2), "window")?;
    if !(v[0] >= 0.0 && v[1] > v[0]) {
        return usage(format!("window must satisfy 0 <= lo < hi, got '{s}'"));
    }
    Ok((v[0], v[1]))
}

fn parse_wedge(s: &str, eps: f64) -> Outcome<Wedge> {
    if !(eps > 0.0 && eps < 0.5 * PI) {
        return usage(format!("--eps must lie in (0, pi/2), got {eps}"));
    }
    Ok(match s {
        "sigma1" => Wedge::sigma1(eps),
        "sigma2" => Wedge::sigma2(eps),
        "off-axis-upper" => Wedge::off_axis_upper(eps),
        "off-axis-lower" => Wedge::off_axis_lower(eps),
        _ => {
            let v = parse_list(s, Some(2), "wedge")?;
            Wedge::new(v[0], v[1], WedgeLabel::Custom)?
        }
    })
}

fn read_file(path: &PathBuf) -> Outcome<String> {
    std::fs::read_to_string(path).or_else(|e| usage(format!("cannot read {}: {e}", path.display())))
}

/// A spectrum file, or a zero set restricted to the wedge up to its covered radius.
fn load_spectrum(path: &PathBuf, wedge: Wedge) -> Outcome<(Spectrum, Option<String>)> {
    let text = read_file(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| {
        IteError::ParseError(format!("{}, line {} column {}: {e}", path.display(), e.line(), e.column()))
    })?;
    if value.get("region").is_some() {
        let zs = ZeroSet::from_json(&text)?;
        let r = Spectrum::covered_radius(&zs, &wedge);
        Ok((Spectrum::from_zero_set(&zs, wedge, r)?, Some(zs.profile_hash)))
    } else {
        Ok((Spectrum::from_json(&text)?, None))
    }
}

struct Artifact {
    json: Value,
    csv: Option<String>,
}

fn provenance(command: &str, common: &Common, profile: Option<&RefractionProfile>, hash: Option<String>) -> Value {
    json!({
        "tool": "ite",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "profile": profile.map(|p| serde_json::to_value(p.kind()).expect("profile serializes")),
        "profile_hash": profile.map(|p| p.content_hash()).or(hash),
        "tolerances": common.tolerances(),
    })
}

fn with_provenance<T: Serialize>(result: &T, prov: Value) -> Value {
    let mut v = serde_json::to_value(result).expect("result serializes");
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("provenance".into(), prov);
            v
        }
        None => json!({ "result": v, "provenance": prov }),
    }
}

fn csv_table(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for row in rows {
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

fn run_eigs(a: &EigsArgs) -> Outcome<Artifact> {
    a.common.check()?;
    let profile = load_profile(&a.profile)?;
    let region = parse_box(&a.region)?;
    let zs = find_zeros(&profile, &region, &a.common.zero_options())?;
    let csv = csv_table(
        "re,im,mult,residual",
        zs.zeros
            .iter()
            .map(|z| vec![z.re.to_string(), z.im.to_string(), z.mult.to_string(), z.residual.to_string()]),
    );
    Ok(Artifact {
        json: with_provenance(&zs, provenance("eigs", &a.common, Some(&profile), None)),
        csv: Some(csv),
    })
}

fn run_density(a: &DensityArgs) -> Outcome<Artifact> {
    a.common.check()?;
    let wedge = parse_wedge(&a.wedge, a.eps)?;
    let window = parse_window(&a.window)?;
    let (zs, profile) = match (&a.zeros, &a.profile, &a.region) {
        (Some(path), _, _) => (ZeroSet::from_json(&read_file(path)?)?, None),
        (None, Some(p), Some(b)) => {
            let profile = load_profile(p)?;
            let zs = find_zeros(&profile, &parse_box(b)?, &a.common.zero_options())?;
            (zs, Some(profile))
        }
        _ => return usage("density needs --zeros, or --profile with --box"),
    };
    let est = wedge_density(&zs, &wedge, window)?;
    let csv = csv_table("r,N(r)", est.counts.iter().map(|(r, n)| vec![r.to_string(), n.to_string()]));
    let prov = provenance("density", &a.common, profile.as_ref(), Some(zs.profile_hash.clone()));
    Ok(Artifact {
        json: with_provenance(&est, prov),
        csv: Some(csv),
    })
}

#[derive(Serialize)]
struct IndicatorReport {
    estimates: Vec<IndicatorEstimate>,
    width: Option<f64>,
}

fn run_indicator(a: &IndicatorArgs) -> Outcome<Artifact> {
    a.common.check()?;
    let profile = load_profile(&a.profile)?;
    let thetas = parse_list(&a.theta, None, "theta")?;
    if !(a.r_max > 0.0) || a.samples < 4 {
        return usage("--r-max must be positive and --samples at least 4");
    }
    let opts = a.common.zero_options();
    let radii = default_radii(a.r_max, a.samples);
    let mut estimates = Vec::new();
    for &t in &thetas {
        estimates.push(indicator_estimate(&profile, t, &radii, &opts.solver, opts.exec)?);
    }
    let width = if a.width {
        Some(indicator_width(&profile, a.r_max, &opts)?)
    } else {
        None
    };
    let report = IndicatorReport { estimates, width };
    let csv = csv_table(
        "theta,r,log_abs_d_over_r",
        report.estimates.iter().flat_map(|e| {
            e.samples
                .iter()
                .map(move |(r, v)| vec![e.theta.to_string(), r.to_string(), v.to_string()])
        }),
    );
    Ok(Artifact {
        json: with_provenance(&report, provenance("indicator", &a.common, Some(&profile), None)),
        csv: Some(csv),
    })
}

fn run_invert(a: &InvertArgs) -> Outcome<Artifact> {
    a.common.check()?;
    let wedge = parse_wedge(&a.wedge, a.eps)?;
    let window = parse_window(&a.window)?;
    let (spectrum, hash) = load_spectrum(&a.spectrum, wedge)?;
    let rec = recover_b(&spectrum, window)?;
    let csv = csv_table(
        "r,N(r)",
        rec.density.counts.iter().map(|(r, n)| vec![r.to_string(), n.to_string()]),
    );
    Ok(Artifact {
        json: with_provenance(&rec, provenance("invert-b", &a.common, None, hash)),
        csv: Some(csv),
    })
}

fn run_compare(a: &CompareArgs) -> Outcome<Artifact> {
    a.common.check()?;
    if !(a.pair_tol > 0.0) {
        return usage("--pair-tol must be positive");
    }
    let wedge = parse_wedge(&a.wedge, a.eps)?;
    let (s1, h1) = load_spectrum(&a.spectrum[0], wedge)?;
    let (s2, h2) = load_spectrum(&a.spectrum[1], wedge)?;
    if s1.wedge.theta_min != s2.wedge.theta_min || s1.wedge.theta_max != s2.wedge.theta_max {
        return usage("spectra must share the same wedge");
    }
    let verdict = compare_spectra(&s1, &s2, a.pair_tol);
    let mut prov = provenance("compare", &a.common, None, None);
    prov["profile_hash"] = json!([h1, h2]);
    prov["tolerances"]["pair_tol"] = json!(a.pair_tol);
    Ok(Artifact {
        json: with_provenance(&verdict, prov),
        csv: None,
    })
}

#[derive(Serialize)]
struct SlReport {
    #[serde(rename = "B")]
    b: f64,
    mode: SlMode,
    k_max: f64,
    eigenvalues: Vec<f64>,
}

fn run_sl(a: &SlArgs) -> Outcome<Artifact> {
    a.common.check()?;
    if !(a.k_max > 0.0) {
        return usage("--k-max must be positive");
    }
    let profile = load_profile(&a.profile)?;
    let lm = profile.liouville(a.common.quad_tol)?;
    let mode = match a.mode {
        ModeArg::Dirichlet => SlMode::Dirichlet,
        ModeArg::DirichletNeumann => SlMode::DirichletNeumann,
    };
    let opts = a.common.zero_options();
    let ev = sl_eigenvalues(|xi| lm.p_of_xi(xi), lm.b(), mode, a.k_max, &opts.solver, opts.exec)?;
    let report = SlReport {
        b: lm.b(),
        mode,
        k_max: a.k_max,
        eigenvalues: ev,
    };
    let csv = csv_table(
        "index,k",
        report
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, k)| vec![(i + 1).to_string(), k.to_string()]),
    );
    Ok(Artifact {
        json: with_provenance(&report, provenance("sl-eigs", &a.common, Some(&profile), None)),
        csv: Some(csv),
    })
}

fn run_validate(a: &ValidateArgs) -> Outcome<Artifact> {
    a.common.check()?;
    let profile = load_profile(&a.profile)?;
    let lm = profile.liouville(a.common.quad_tol)?;
    let (q_sup, q_l1) = lm.q_norms(2000);
    let report = json!({
        "report": profile.report(),
        "B": lm.b(),
        "q_sup": q_sup,
        "q_l1": q_l1,
    });
    Ok(Artifact {
        json: with_provenance(&report, provenance("validate", &a.common, Some(&profile), None)),
        csv: None,
    })
}

fn emit(art: Artifact, common: &Common) -> Outcome<()> {
    let text = match common.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&art.json).expect("artifact serializes");
            s.push('\n');
            s
        }
        Format::Csv => match art.csv {
            Some(s) => s,
            None => return usage("this command has no CSV export; use --format json"),
        },
    };
    match &common.out {
        Some(path) => std::fs::write(path, text)
            .or_else(|e| usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn configure_threads() -> Outcome<()> {
    if let Ok(v) = std::env::var("ITE_THREADS") {
        let n: usize = match v.trim().parse() {
            Ok(n) if n > 0 => n,
            _ => return usage(format!("ITE_THREADS must be a positive integer, got '{v}'")),
        };
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .or_else(|e| usage(format!("cannot configure {n} threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Outcome<()> {
    configure_threads()?;
    let (art, common) = match &cli.command {
        Command::Eigs(a) => (run_eigs(a)?, &a.common),
        Command::Density(a) => (run_density(a)?, &a.common),
        Command::Indicator(a) => (run_indicator(a)?, &a.common),
        Command::InvertB(a) => (run_invert(a)?, &a.common),
        Command::Compare(a) => (run_compare(a)?, &a.common),
        Command::SlEigs(a) => (run_sl(a)?, &a.common),
        Command::Validate(a) => (run_validate(a)?, &a.common),
    };
    emit(art, common)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Eigs(_) => "eigs",
        Command::Density(_) => "density",
        Command::Indicator(_) => "indicator",
        Command::InvertB(_) => "invert-b",
        Command::Compare(_) => "compare",
        Command::SlEigs(_) => "sl-eigs",
        Command::Validate(_) => "validate",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            let diag = json!({
                "error": e.name(),
                "message": e.to_string(),
                "command": command_name(&cli.command),
                "detail": format!("{e:?}"),
            });
            eprintln!("{diag}");
            ExitCode::from(3)
        }
    }
}
