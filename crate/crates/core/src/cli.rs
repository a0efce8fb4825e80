//! Command-line front end of the `polydich` binary.
//!
//! Exit codes: 0 pass, 2 failed verdict, 1 computational error, 64 usage
//! error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::admissibility::{
    admissibility_probe, default_battery, green_solve, AdmissibilityReport, AdmissibilitySummary, BatteryMember,
    DichotomyConstants, GreenOptions, GridFunction, VerifyMode,
};
use crate::dichotomy::{certify, CertifyConfig, DichotomyCertificate, ProjectionFamily, CERTIFICATE_SCHEMA};
use crate::error::Error;
use crate::evolution::scenario::scenario_defaults;
use crate::evolution::{
    load_generator_csv, scenario, scenario_names, EvolutionFamily, IntegratorSettings, ScenarioSpec,
};
use crate::grid::TimeGrid;
use crate::linalg::Vector;
use crate::norms::{constant_norm, lyapunov_norm, strong_lyapunov_norm, LyapunovConfig, NormFamily};
use crate::robustness::{
    robustness_experiment, write_sweep_csv, PerturbationFamily, PerturbationRoute, RobustnessConfig, RobustnessTable,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

const ADMISSIBILITY_SCHEMA: &str = "polydich/admissibility@1";
const GREEN_SCHEMA: &str = "polydich/green@1";
const SWEEP_SCHEMA: &str = "polydich/sweep@1";

#[derive(Debug, Parser)]
#[command(name = "polydich", version, about = "Polynomial dichotomy certification, admissibility and robustness")]
struct Cli {
    /// upper end of the time window [1, T_max]
    #[arg(long, global = true, default_value_t = 1000.0)]
    tmax: f64,
    /// grid points per decade
    #[arg(long, global = true, default_value_t = 64)]
    density: usize,
    /// seed for every random sample
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// output directory for JSON reports and CSV tables
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// residual and bound tolerance
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Built-in scenarios
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Fit a dichotomy certificate
    Certify(CertifyArgs),
    /// Run the Green-operator battery
    Admissibility(AdmissibilityArgs),
    /// Solve the admissibility equation for one forcing term
    GreenSolve(GreenArgs),
    /// Sweep the size of a perturbation and re-certify
    Robustness(RobustnessArgs),
}

#[derive(Debug, Subcommand)]
enum ScenarioAction {
    /// List built-in scenarios and their default parameters
    List,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProjectionChoice {
    /// splitting from orbit growth
    Computed,
    /// the scenario's known projection
    Reference,
    /// P = Id
    Identity,
    /// P = 0
    Zero,
}

#[derive(Debug, Args)]
struct FamilyArgs {
    /// built-in scenario name
    #[arg(long, conflicts_with_all = ["scenario_file", "generator_csv"])]
    scenario: Option<String>,
    /// scenario JSON document {name, params}
    #[arg(long, value_name = "PATH", conflicts_with = "generator_csv")]
    scenario_file: Option<PathBuf>,
    /// generator table: t followed by the row-major entries of A(t)
    #[arg(long, value_name = "PATH")]
    generator_csv: Option<PathBuf>,
    /// scenario parameter, repeatable
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// shorthand for --param lambda=VALUE
    #[arg(long)]
    lambda: Option<f64>,
    /// projection used for the splitting
    #[arg(long, value_enum)]
    projection: Option<ProjectionChoice>,
    /// contraction mode, P = Id
    #[arg(long, conflicts_with_all = ["projection", "expansion"])]
    contraction: bool,
    /// expansion mode, P = 0
    #[arg(long, conflicts_with = "projection")]
    expansion: bool,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// certify under the Lyapunov norm built from the splitting
    #[arg(long)]
    lyapunov: bool,
    /// use the three-term Lyapunov norm with growth exponent B
    #[arg(long, value_name = "B")]
    strong: Option<f64>,
    /// exponent of the Lyapunov norm, defaults to 0.9 times the fitted one
    #[arg(long)]
    lyapunov_lambda: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BatteryChoice {
    /// constants, unit bumps and 1/t tails
    Default,
    /// default battery plus the zero function
    All,
    /// the zero function only
    Zero,
}

#[derive(Debug, Args)]
struct AdmissibilityArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, value_enum, default_value = "default")]
    battery: BatteryChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Forcing {
    /// y = (1, ..., 1)
    Constant,
    /// y = (1, ..., 1) / t
    Tail,
    /// y = sin(ln t) (1, ..., 1)
    Oscillating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeChoice {
    Grid,
    Reference,
}

#[derive(Debug, Args)]
struct GreenArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// forcing term as CSV (t, y_1, ..., y_d); its nodes are used as the grid
    #[arg(long, value_name = "PATH", conflicts_with = "forcing")]
    input: Option<PathBuf>,
    /// built-in forcing term on the default grid
    #[arg(long, value_enum, default_value = "constant")]
    forcing: Forcing,
    /// quadrature used to verify the solution
    #[arg(long, value_enum, default_value = "grid")]
    mode: ModeChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RouteChoice {
    Auto,
    Generator,
    Picard,
}

#[derive(Debug, Args)]
struct RobustnessArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// comma-separated perturbation sizes c, B(t) = (c / t^(1+epsilon)) Id
    #[arg(long, value_name = "C,...")]
    c_grid: String,
    /// entries with c above this may fail without failing the run
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    route: RouteChoice,
    /// decay excess epsilon of the perturbation
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Compute(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

type Outcome = std::result::Result<bool, Failure>;

/// Validated global settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub t_max: f64,
    pub density: usize,
    pub seed: u64,
    pub tol: f64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(t_max: f64, density: usize, seed: u64, tol: f64, out: Option<PathBuf>) -> Result<Self, String> {
        if !(t_max >= 10.0) || !t_max.is_finite() {
            return Err(format!("--tmax must be at least 10, got {t_max}"));
        }
        if density < 8 {
            return Err(format!("--density must be at least 8, got {density}"));
        }
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(format!("--tol must be positive, got {tol}"));
        }
        Ok(RunConfig { t_max, density, seed, tol, out })
    }

    fn grid(&self) -> crate::Result<TimeGrid> {
        TimeGrid::new(self.t_max, self.density)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> crate::Result<()> {
        if let Some(dir) = &self.out {
            let mut text = serde_json::to_string_pretty(value)?;
            text.push('\n');
            fs::write(dir.join(name), text)?;
        }
        Ok(())
    }

    fn create(&self, name: &str) -> crate::Result<Option<BufWriter<File>>> {
        match &self.out {
            Some(dir) => Ok(Some(BufWriter::new(File::create(dir.join(name))?))),
            None => Ok(None),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let config = match RunConfig::new(cli.tmax, cli.density, cli.seed, cli.tol, cli.out.clone()) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    if let Some(dir) = &config.out {
        if let Err(e) = fs::create_dir_all(dir) {
            eprintln!("error: cannot create {}: {e}", dir.display());
            return EXIT_ERROR;
        }
    }
    let outcome = match &cli.command {
        Command::Scenario { action: ScenarioAction::List } => cmd_scenario_list(&config),
        Command::Certify(args) => cmd_certify(&config, args),
        Command::Admissibility(args) => cmd_admissibility(&config, args),
        Command::GreenSolve(args) => cmd_green_solve(&config, args),
        Command::Robustness(args) => cmd_robustness(&config, args),
    };
    match outcome {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

struct Loaded {
    family: EvolutionFamily,
    reference: Option<ProjectionFamily>,
    spec: Option<ScenarioSpec>,
}

fn load_family(args: &FamilyArgs) -> std::result::Result<Loaded, Failure> {
    let usage = |e: Error| match e {
        Error::UnknownScenario(_) | Error::InvalidInput(_) => Failure::Usage(e.to_string()),
        other => Failure::Compute(other),
    };
    if let Some(path) = &args.generator_csv {
        if args.lambda.is_some() || !args.params.is_empty() {
            return Err(Failure::Usage("--param and --lambda do not apply to --generator-csv".into()));
        }
        let family = load_generator_csv(path, IntegratorSettings::default()).map_err(usage)?;
        return Ok(Loaded { family, reference: None, spec: None });
    }
    let mut spec = match (&args.scenario, &args.scenario_file) {
        (Some(name), None) => ScenarioSpec::new(name.clone()),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Compute(e.into()))?;
            ScenarioSpec::from_json(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        _ => return Err(Failure::Usage("one of --scenario, --scenario-file or --generator-csv is required".into())),
    };
    spec = spec.with_assignments(args.params.iter().map(String::as_str)).map_err(usage)?;
    if let Some(l) = args.lambda {
        spec = spec.with("lambda", l);
    }
    let s = scenario(&spec).map_err(usage)?;
    Ok(Loaded { family: s.family, reference: s.projection, spec: Some(s.spec) })
}

/// Projection requested on the command line, `None` for the computed
/// splitting.
fn chosen_projection(args: &FamilyArgs, loaded: &Loaded) -> std::result::Result<Option<ProjectionFamily>, Failure> {
    let d = loaded.family.dim();
    let choice = if args.contraction {
        ProjectionChoice::Identity
    } else if args.expansion {
        ProjectionChoice::Zero
    } else {
        args.projection.unwrap_or(ProjectionChoice::Computed)
    };
    Ok(match choice {
        ProjectionChoice::Computed => None,
        ProjectionChoice::Identity => Some(ProjectionFamily::identity(d)),
        ProjectionChoice::Zero => Some(ProjectionFamily::zero(d)),
        ProjectionChoice::Reference => Some(
            loaded.reference.clone().ok_or_else(|| Failure::Usage("this family has no reference projection".into()))?,
        ),
    })
}

fn certify_config(config: &RunConfig) -> CertifyConfig {
    let mut c = CertifyConfig::new(config.t_max, config.seed);
    c.tol = config.tol;
    c
}

fn cmd_scenario_list(config: &RunConfig) -> Outcome {
    #[derive(Serialize)]
    struct Row {
        name: &'static str,
        description: &'static str,
        params: std::collections::BTreeMap<String, f64>,
    }
    let rows: Vec<Row> = scenario_names()
        .into_iter()
        .map(|(name, description)| Row { name, description, params: scenario_defaults(name).unwrap_or_default() })
        .collect();
    for r in &rows {
        let params: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("{:<24} {:<40} {}", r.name, params.join(" "), r.description);
    }
    config.write_json("scenarios.json", &rows)?;
    Ok(true)
}

fn print_certificate(cert: &DichotomyCertificate) {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
    println!(
        "{}: lambda_stable {} lambda_unstable {} D {:.6} rank {}/{}",
        cert.family,
        opt(cert.lambda_stable),
        opt(cert.lambda_unstable),
        cert.d,
        cert.stable_rank,
        cert.dim
    );
    println!("verdict: {}", if cert.verdict.pass { "pass" } else { "fail" });
    for r in &cert.verdict.reasons {
        println!("  {r}");
    }
}

fn cmd_certify(config: &RunConfig, args: &CertifyArgs) -> Outcome {
    if (args.strong.is_some() || args.lyapunov_lambda.is_some()) && !args.lyapunov {
        return Err(Failure::Usage("--strong and --lyapunov-lambda need --lyapunov".into()));
    }
    let loaded = load_family(&args.family)?;
    let proj = chosen_projection(&args.family, &loaded)?;
    let cc = certify_config(config);
    let constant = constant_norm(loaded.family.dim());
    let (mut cert, proj) = certify(&loaded.family, proj.as_ref(), &constant, &cc)?;
    if args.lyapunov {
        config.write_json("certificate-constant.json", &cert)?;
        let lambda = match args.lyapunov_lambda {
            Some(l) => l,
            None => {
                0.9 * cert
                    .lambda()
                    .filter(|l| *l > 0.0)
                    .ok_or_else(|| Failure::Usage("no positive fitted exponent; pass --lyapunov-lambda".into()))?
            }
        };
        let lc = LyapunovConfig::new(lambda, config.t_max);
        let norms: NormFamily = match args.strong {
            Some(b) => strong_lyapunov_norm(&loaded.family, &proj, &lc, b)?,
            None => lyapunov_norm(&loaded.family, &proj, &lc)?,
        };
        let (lcert, _) = certify(&loaded.family, Some(&proj), &norms, &cc)?;
        cert = lcert;
    }
    debug_assert_eq!(cert.schema, CERTIFICATE_SCHEMA);
    print_certificate(&cert);
    config.write_json("certificate.json", &cert)?;
    if let Some(w) = config.create("points.csv")? {
        cert.write_points_csv(w)?;
    }
    if let Some(spec) = &loaded.spec {
        config.write_json("scenario.json", spec)?;
    }
    Ok(cert.verdict.pass)
}

/// Certificate under the constant norm, used for the splitting and for the
/// constants of the Green bound when it passes.
fn inline_certificate(
    config: &RunConfig,
    loaded: &Loaded,
    proj: Option<ProjectionFamily>,
) -> crate::Result<(DichotomyCertificate, ProjectionFamily)> {
    certify(&loaded.family, proj.as_ref(), &constant_norm(loaded.family.dim()), &certify_config(config))
}

fn constants_of(cert: &DichotomyCertificate) -> Option<DichotomyConstants> {
    if !cert.verdict.pass {
        return None;
    }
    cert.lambda().map(|lambda| DichotomyConstants { d: cert.d, lambda })
}

fn green_options(config: &RunConfig, constants: Option<DichotomyConstants>) -> GreenOptions {
    GreenOptions { constants, tol: config.tol, ..Default::default() }
}

#[derive(Serialize)]
struct AdmissibilityDocument<'a> {
    schema: &'static str,
    family: &'a str,
    t_max: f64,
    density: usize,
    seed: u64,
    constants: Option<DichotomyConstants>,
    certificate_pass: bool,
    summary: &'a AdmissibilitySummary,
}

fn cmd_admissibility(config: &RunConfig, args: &AdmissibilityArgs) -> Outcome {
    let loaded = load_family(&args.family)?;
    let proj = chosen_projection(&args.family, &loaded)?;
    let (cert, proj) = inline_certificate(config, &loaded, proj)?;
    let constants = constants_of(&cert);
    let grid = config.grid()?;
    let battery: Vec<BatteryMember> = match args.battery {
        BatteryChoice::Default => default_battery(&loaded.family, &grid, false)?,
        BatteryChoice::All => default_battery(&loaded.family, &grid, true)?,
        BatteryChoice::Zero => {
            vec![BatteryMember { name: "zero".into(), y: GridFunction::zeros(&grid, loaded.family.dim()) }]
        }
    };
    let norms = constant_norm(loaded.family.dim());
    let summary = admissibility_probe(
        &loaded.family,
        &proj,
        &norms,
        &battery,
        None,
        &green_options(config, constants),
        config.seed,
    )?;
    for m in &summary.members {
        println!(
            "{:<16} ratio {:.4} residual {:.2e} {}",
            m.name,
            m.report.ratio,
            m.report.residual,
            if m.report.pass { "pass" } else { "fail" }
        );
    }
    println!(
        "worst ratio {:.4}, uniqueness {:?}, admissible: {}",
        summary.worst_ratio, summary.uniqueness.verdict, summary.admissible
    );
    let doc = AdmissibilityDocument {
        schema: ADMISSIBILITY_SCHEMA,
        family: loaded.family.label(),
        t_max: config.t_max,
        density: config.density,
        seed: config.seed,
        constants,
        certificate_pass: cert.verdict.pass,
        summary: &summary,
    };
    config.write_json("admissibility.json", &doc)?;
    Ok(summary.admissible)
}

#[derive(Serialize)]
struct GreenDocument<'a> {
    schema: &'static str,
    family: &'a str,
    forcing: String,
    constants: Option<DichotomyConstants>,
    report: &'a AdmissibilityReport,
}

fn cmd_green_solve(config: &RunConfig, args: &GreenArgs) -> Outcome {
    let loaded = load_family(&args.family)?;
    let d = loaded.family.dim();
    let proj = chosen_projection(&args.family, &loaded)?;
    let (cert, proj) = inline_certificate(config, &loaded, proj)?;
    let constants = constants_of(&cert);
    let (y, forcing) = match &args.input {
        Some(path) => {
            let y = GridFunction::read_csv(File::open(path).map_err(|e| Failure::Compute(e.into()))?)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            if y.dim() != d {
                return Err(Failure::Usage(format!(
                    "{} has dimension {}, the family has {d}",
                    path.display(),
                    y.dim()
                )));
            }
            (y, path.display().to_string())
        }
        None => {
            let grid = config.grid()?;
            let ones = Vector::from_element(d, 1.0);
            let y = match args.forcing {
                Forcing::Constant => GridFunction::from_fn(&grid, |_| ones.clone())?,
                Forcing::Tail => GridFunction::from_fn(&grid, |t| &ones / t)?,
                Forcing::Oscillating => GridFunction::from_fn(&grid, |t| &ones * t.ln().sin())?,
            };
            (y, format!("{:?}", args.forcing).to_lowercase())
        }
    };
    let mode = match args.mode {
        ModeChoice::Grid => VerifyMode::Grid,
        ModeChoice::Reference => VerifyMode::Reference,
    };
    let options = GreenOptions { mode, ..green_options(config, constants) };
    let (x, report) = green_solve(&loaded.family, &proj, &y, &constant_norm(d), &options)?;
    println!(
        "||y||_L {:.6} ||x||_inf {:.6} ratio {:.4} residual {:.2e} ||P(1)x(1)|| {:.1e}: {}",
        report.y_norm_l,
        report.x_norm_sup,
        report.ratio,
        report.residual,
        report.initial_residual,
        if report.pass { "pass" } else { "fail" }
    );
    if let Some(w) = config.create("x.csv")? {
        x.write_csv(w)?;
    }
    let doc =
        GreenDocument { schema: GREEN_SCHEMA, family: loaded.family.label(), forcing, constants, report: &report };
    config.write_json("green.json", &doc)?;
    Ok(report.pass)
}

#[derive(Serialize)]
struct SweepDocument<'a> {
    schema: &'static str,
    seed: u64,
    t_max: f64,
    table: &'a RobustnessTable,
}

fn parse_c_grid(text: &str) -> std::result::Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if parts.is_empty() {
        return Err(Failure::Usage("--c-grid is empty".into()));
    }
    parts
        .iter()
        .map(|p| match p.parse::<f64>() {
            Ok(c) if c >= 0.0 && c.is_finite() => Ok(c),
            _ => Err(Failure::Usage(format!("--c-grid entries must be non-negative numbers, got `{p}`"))),
        })
        .collect()
}

fn cmd_robustness(config: &RunConfig, args: &RobustnessArgs) -> Outcome {
    let c_grid = parse_c_grid(&args.c_grid)?;
    if !(args.epsilon >= 0.0) {
        return Err(Failure::Usage(format!("--epsilon must be non-negative, got {}", args.epsilon)));
    }
    let loaded = load_family(&args.family)?;
    let d = loaded.family.dim();
    let proj = match chosen_projection(&args.family, &loaded)? {
        Some(p) => p,
        None => inline_certificate(config, &loaded, None)?.1,
    };
    let b = PerturbationFamily::scaled_identity(d, 1.0, args.epsilon)?;
    let mut rc = RobustnessConfig::new(config.t_max, config.seed);
    rc.threshold = args.threshold;
    rc.projection_tol = config.tol;
    rc.gronwall_tol = config.tol;
    rc.route = match args.route {
        RouteChoice::Auto => PerturbationRoute::Auto,
        RouteChoice::Generator => PerturbationRoute::Generator,
        RouteChoice::Picard => PerturbationRoute::Picard,
    };
    let table = robustness_experiment(&loaded.family, &proj, &constant_norm(d), &b, &c_grid, &rc)?;
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
    for row in &table.rows {
        println!(
            "c {:<8} lambda_stable {} lambda_unstable {} D {:.4} {}",
            row.c,
            opt(row.lambda_stable),
            opt(row.lambda_unstable),
            row.d,
            if row.pass { "pass" } else { "fail" }
        );
    }
    if let Some(c) = table.breakdown {
        println!("breakdown at c = {c}");
    }
    if let Some(w) = config.create("sweep.csv")? {
        write_sweep_csv(&table, w)?;
    }
    config.write_json(
        "sweep.json",
        &SweepDocument { schema: SWEEP_SCHEMA, seed: config.seed, t_max: config.t_max, table: &table },
    )?;
    Ok(table.pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_invariants() {
        assert!(RunConfig::new(1000.0, 64, 0, 1e-6, None).is_ok());
        assert!(RunConfig::new(5.0, 64, 0, 1e-6, None).is_err());
        assert!(RunConfig::new(1000.0, 4, 0, 1e-6, None).is_err());
        assert!(RunConfig::new(1000.0, 64, 0, 0.0, None).is_err());
    }

    #[test]
    fn c_grid_parsing() {
        assert_eq!(parse_c_grid("0, 0.01,0.05").unwrap(), vec![0.0, 0.01, 0.05]);
        assert!(matches!(parse_c_grid(""), Err(Failure::Usage(_))));
        assert!(matches!(parse_c_grid(" , "), Err(Failure::Usage(_))));
        assert!(matches!(parse_c_grid("-1"), Err(Failure::Usage(_))));
    }

    #[test]
    fn usage_errors_exit_64() {
        assert_eq!(run(["polydich", "certify", "--scenario", "nope"]), EXIT_USAGE);
        assert_eq!(run(["polydich", "--tmax", "2", "scenario", "list"]), EXIT_USAGE);
        assert_eq!(run(["polydich", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["polydich", "robustness", "--scenario", "scalar_contraction", "--c-grid", ""]), EXIT_USAGE);
    }

    #[test]
    fn scenario_list_passes() {
        assert_eq!(run(["polydich", "scenario", "list"]), EXIT_PASS);
    }
}
