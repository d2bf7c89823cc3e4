use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use singulab::config::{ConfigError, RunConfig};
use singulab::deform::{analyze_pair, build_case1, build_case2, certify_family, gamma_feasible, search_gamma, search_gamma_case2, DeformError, DeformationFamily};
use singulab::hessian::{determinant, mixed_hessian};
use singulab::link::{hopf_test, trace_link, LinkError, TraceParams};
use singulab::mixedpoly::{polar_radial_degrees, verify_euler_identities, MixedPolyError};
use singulab::parse::{parse_expr, parse_poly, parse_scalar, ParseError};
use singulab::singular::{locus_search, SingularError};
use singulab::verify::{builtin, gamma_search_from, verify_case1, verify_case2, BUILTINS};
use singulab::{MixedPolynomial, WeightSystem};

/// Mixed polynomial singularities: Hessians, singular loci, deformations and links.
///
/// Configuration is read from `--config` (one `key = value` per line), then overridden by
/// `--set key=value` and by the dedicated flags. Defaults: residual_tol 1e-10, rank_tol 1e-8,
/// margin_tol 1e-8, kernel_gap 1e3, eigen_floor 1e-8, t 1/10, s 1/1000, grid 8, phase_seeds 2,
/// r_min 0.01, r_max 1, eps_start 0.1, eps_shrinks 6, max_step 0.05, seed 1, trials 16,
/// halvings 8, workers 0 (all cores).
///
/// Exit codes: 0 success, 1 hypothesis rejected, 2 certification failed,
/// 3 numerical failure, 4 usage or parse error.
#[derive(Parser, Debug)]
#[command(name = "singulab", version, about, long_about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores. Output does not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long = "rank-tol", global = true)]
    rank_tol: Option<f64>,
    #[arg(long = "residual-tol", global = true)]
    residual_tol: Option<f64>,
    #[arg(long = "margin-tol", global = true)]
    margin_tol: Option<f64>,
    /// Write JSON here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Degrees and Euler identities of a polynomial, or the hypotheses on a pair `(f, g)`.
    Analyze {
        poly: String,
        /// Second member of a pair; `poly` is then f.
        #[arg(long)]
        g: Option<String>,
        #[arg(long, default_value_t = 1)]
        p: i64,
        #[arg(long, default_value_t = 1)]
        q: i64,
    },
    /// Mixed Hessian as a JSON matrix; integer entries as numbers, others as polynomial text.
    Hessian {
        poly: String,
        /// Also print the determinant.
        #[arg(long)]
        det: bool,
    },
    /// Orbit representatives of the singular set of a polar weighted homogeneous polynomial.
    Singular {
        poly: String,
        /// Polar weights, comma separated.
        #[arg(long, default_value = "1,1")]
        weights: String,
        /// Also write every seed and its outcome as CSV.
        #[arg(long)]
        seeds_csv: Option<PathBuf>,
    },
    /// Build the deformation F_t of f conj(g).
    Deform(FamilyArgs),
    /// Build and certify F_t, or search for a certified coefficient with `--search`.
    Certify {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        search: bool,
    },
    /// Link of P at a point: components, windings and linking numbers.
    Link {
        #[arg(long)]
        poly: String,
        /// Center as complex numbers, comma separated.
        #[arg(long, default_value = "0,0")]
        center: String,
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        /// Force curve tracing even when an orbit parametrization applies.
        #[arg(long)]
        general: bool,
        /// Shrink the radius until the link stabilizes and report the Hopf verdict.
        #[arg(long)]
        hopf: bool,
        /// Point cloud CSV `component_index,x1,y1,x2,y2`.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Stereographic projection to R^3 as CSV.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Run every check on a built-in or user-supplied pair.
    VerifyPaper {
        /// One of quartic-quadric, cubic-linear, weighted-sextic.
        #[arg(long)]
        builtin: Option<String>,
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        g: Option<String>,
        #[arg(long, default_value_t = 1)]
        p: i64,
        #[arg(long, default_value_t = 1)]
        q: i64,
        /// Treat `g = z1 + beta z2` with the cubic-linear construction.
        #[arg(long)]
        case2: bool,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<String>,
        /// Include the second-stage perturbation.
        #[arg(long)]
        second_stage: bool,
    },
}

#[derive(Args, Debug)]
struct FamilyArgs {
    #[arg(long)]
    f: String,
    /// Required unless `--case2`.
    #[arg(long)]
    g: Option<String>,
    #[arg(long, default_value_t = 1)]
    p: i64,
    #[arg(long, default_value_t = 1)]
    q: i64,
    /// Use h = z1^m conj(z1) + z1^2 + gamma z2^2 with g = z1 + beta z2.
    #[arg(long)]
    case2: bool,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    beta: String,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    gamma1: String,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    gamma2: String,
    /// Overrides the configured t.
    #[arg(long, allow_hyphen_values = true)]
    t: Option<String>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Deform(#[from] DeformError),
    #[error(transparent)]
    Singular(#[from] SingularError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Poly(#[from] MixedPolyError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) | CliError::Config(_) | CliError::Io(_) => 4,
            CliError::Failed(_) => 2,
            CliError::Deform(e) => match e {
                DeformError::Certification { .. } | DeformError::SearchExhausted(_) => 2,
                DeformError::NonFinite | DeformError::Singular(_) => 3,
                _ => 1,
            },
            CliError::Singular(SingularError::Poly(_) | SingularError::NotPolarHomogeneous | SingularError::Dimension(_)) => 1,
            CliError::Singular(_) => 3,
            CliError::Link(LinkError::NotConvenient | LinkError::VariableCount(_)) => 1,
            CliError::Link(_) => 3,
            CliError::Poly(_) => 1,
        }
    }
}

fn build_config(args: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::default();
    if let Some(path) = &args.config {
        config.apply_text(&std::fs::read_to_string(path)?)?;
    }
    for pair in &args.set {
        let (key, value) = pair.split_once('=').ok_or_else(|| CliError::Usage(format!("expected KEY=VALUE, got `{pair}`")))?;
        config.set(key.trim(), value.trim())?;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.workers {
        config.workers = v;
    }
    if let Some(v) = args.grid {
        config.grid = v;
    }
    if let Some(v) = args.rank_tol {
        config.rank_tol = v;
    }
    if let Some(v) = args.residual_tol {
        config.residual_tol = v;
    }
    if let Some(v) = args.margin_tol {
        config.margin_tol = v;
    }
    if let Some(v) = &args.output {
        config.output = Some(v.display().to_string());
    }
    config.validate()?;
    Ok(config)
}

fn scalar(text: &str, what: &str) -> Result<singulab::ComplexScalar, CliError> {
    parse_scalar(text).ok_or_else(|| CliError::Usage(format!("invalid {what} `{text}`")))
}

fn complex_list(text: &str) -> Result<Vec<Complex64>, CliError> {
    text.split(',').map(|part| scalar(part.trim(), "complex number").map(|c| c.to_c64())).collect()
}

fn hessian_entry(p: &MixedPolynomial) -> Value {
    if p.is_zero() {
        return json!(0);
    }
    if p.len() == 1 {
        let t = p.terms().next().expect("one term");
        let constant = t.nu.iter().chain(t.mu).all(|e| *e == 0);
        if constant && t.coeff.is_real() && t.coeff.re.is_integer() {
            if let Ok(v) = t.coeff.re.to_integer().to_string().parse::<i64>() {
                return json!(v);
            }
        }
    }
    json!(p.to_string())
}

fn family_from(args: &FamilyArgs, config: &RunConfig) -> Result<DeformationFamily, CliError> {
    let t = match &args.t {
        Some(text) => singulab::parse::parse_rational(text).ok_or_else(|| CliError::Usage(format!("invalid t `{text}`")))?,
        None => config.t_value(),
    };
    let f = parse_poly(&args.f, Some(2))?;
    if args.case2 {
        Ok(build_case2(&f, &scalar(&args.beta, "beta")?, &scalar(&args.gamma1, "gamma")?, &t)?)
    } else {
        let g = args.g.as_deref().ok_or_else(|| CliError::Usage("--g is required unless --case2".into()))?;
        let pair = analyze_pair(&f, &parse_poly(g, Some(2))?, args.p, args.q)?;
        Ok(build_case1(&pair, &scalar(&args.gamma1, "gamma1")?, &scalar(&args.gamma2, "gamma2")?, &t)?)
    }
}

fn family_json(family: &DeformationFamily) -> Value {
    json!({
        "kind": family.kind,
        "coefficients": family.coefficients(),
        "t": family.t.to_string(),
        "weights": family.weights,
        "polar_degree": family.polar_degree,
        "h": family.h.to_string(),
        "base": family.base().to_string(),
        "map": family.map().to_string(),
    })
}

fn run(cli: Cli) -> Result<(Value, Option<u8>), CliError> {
    let config = build_config(&cli.global)?;
    let _pool = rayon::ThreadPoolBuilder::new().num_threads(config.workers).build_global();
    match cli.command {
        Command::Analyze { poly, g, p, q } => {
            let f = parse_poly(&poly, None)?;
            match g {
                Some(g) => {
                    let g = parse_poly(&g, Some(f.n()))?;
                    let pair = analyze_pair(&f, &g, p, q)?;
                    Ok((json!({"f": f.to_string(), "g": g.to_string(), "p": p, "q": q, "m": pair.m, "n": pair.n, "d_h": pair.d_h(), "hypotheses": "satisfied"}), None))
                }
                None => {
                    let weights = WeightSystem::uniform(vec![1; f.n()])?;
                    let degrees = polar_radial_degrees(&f, &weights)?;
                    let euler = verify_euler_identities(&f, &weights).map(|r| r.holds()).ok();
                    Ok((json!({
                        "poly": f.to_string(),
                        "variables": f.n(),
                        "holomorphic": f.is_holomorphic(),
                        "convenient": f.is_convenient(),
                        "degrees": degrees,
                        "euler_identities": euler,
                    }), None))
                }
            }
        }
        Command::Hessian { poly, det } => {
            let n = parse_expr(&poly)?.variable_count().max(1);
            let p = parse_poly(&poly, Some(n))?;
            let h = mixed_hessian(&p);
            let matrix: Vec<Vec<Value>> = (0..h.rows).map(|r| (0..h.cols).map(|c| hessian_entry(h.get(r, c))).collect()).collect();
            if det {
                let d = determinant(&h).map_err(|e| CliError::Failed(e.to_string()))?;
                Ok((json!({"hessian": matrix, "determinant": hessian_entry(&d)}), None))
            } else {
                Ok((json!(matrix), None))
            }
        }
        Command::Singular { poly, weights, seeds_csv } => {
            let p = parse_poly(&poly, Some(2))?;
            let w: Vec<i64> = weights.split(',').map(|s| s.trim().parse()).collect::<Result<_, _>>().map_err(|_| CliError::Usage(format!("invalid weights `{weights}`")))?;
            let weights = WeightSystem::uniform(w)?;
            let mut params = config.search_params();
            params.keep_seeds = seeds_csv.is_some();
            let report = locus_search(&p, &weights, &params)?;
            if let Some(path) = seeds_csv {
                std::fs::write(path, report.seeds_csv())?;
            }
            Ok((serde_json::to_value(&report).expect("serializable"), None))
        }
        Command::Deform(args) => Ok((family_json(&family_from(&args, &config)?), None)),
        Command::Certify { family: args, search } => {
            let (family, mut cert) = if search {
                let gs = gamma_search_from(&config);
                let f = parse_poly(&args.f, Some(2))?;
                if args.case2 {
                    search_gamma_case2(&f, &scalar(&args.beta, "beta")?, &gs)?
                } else {
                    let g = args.g.as_deref().ok_or_else(|| CliError::Usage("--g is required unless --case2".into()))?;
                    search_gamma(&analyze_pair(&f, &parse_poly(g, Some(2))?, args.p, args.q)?, &gs)?
                }
            } else {
                let family = family_from(&args, &config)?;
                if !args.case2 {
                    let pair = analyze_pair(&family.f, &family.g, args.p, args.q)?;
                    gamma_feasible(&pair, &family.gamma[0], &family.gamma[1])?;
                }
                let cert = certify_family(&family, &config.search_params(), config.margin_tol)?;
                (family, cert)
            };
            cert.config = Some(config.clone());
            let code = if cert.all_indefinite() { None } else { Some(2) };
            Ok((json!({"family": family_json(&family), "certificate": cert}), code))
        }
        Command::Link { poly, center, radius, general, hopf, csv, plot } => {
            let p = parse_poly(&poly, Some(2))?;
            let center = complex_list(&center)?;
            if center.len() != 2 {
                return Err(CliError::Usage("center needs two coordinates".into()));
            }
            let params = TraceParams { force_general: general, ..config.trace_params() };
            let (value, report) = if hopf {
                let h = hopf_test(&p, &center, radius, &params)?;
                let report = h.report.clone();
                (json!({"verdict": h.verdict, "schedule": h.schedule, "link": summary(&report)}), report)
            } else {
                let value = p.evaluate(&center)?;
                let report = trace_link(&p, &center, value, radius, &params)?;
                (serde_json::to_value(summary(&report)).expect("serializable"), report)
            };
            if let Some(path) = csv {
                std::fs::write(path, report.points_csv())?;
            }
            if let Some(path) = plot {
                std::fs::write(path, report.plot_csv())?;
            }
            Ok((value, None))
        }
        Command::VerifyPaper { builtin: name, f, g, p, q, case2, beta, second_stage } => {
            let report = match (name, f) {
                (Some(name), None) => {
                    let b = builtin(&name).ok_or_else(|| {
                        CliError::Usage(format!("unknown builtin `{name}`; known: {}", BUILTINS.iter().map(|b| b.name).collect::<Vec<_>>().join(", ")))
                    })?;
                    let (f, g) = b.polynomials();
                    match b.kind {
                        singulab::verify::BuiltinKind::Case1 => verify_case1(&f, &g, b.p, b.q, &config, second_stage || b.name == "quartic-quadric")?,
                        singulab::verify::BuiltinKind::Case2 => verify_case2(&f, &scalar("1", "beta")?, &config)?,
                    }
                }
                (None, Some(f)) => {
                    let f = parse_poly(&f, Some(2))?;
                    if case2 {
                        verify_case2(&f, &scalar(beta.as_deref().unwrap_or("1"), "beta")?, &config)?
                    } else {
                        let g = g.ok_or_else(|| CliError::Usage("--g is required unless --case2".into()))?;
                        verify_case1(&f, &parse_poly(&g, Some(2))?, p, q, &config, second_stage)?
                    }
                }
                _ => return Err(CliError::Usage("give exactly one of --builtin or --f".into())),
            };
            let code = if report.all_passed { None } else { Some(2) };
            Ok((serde_json::to_value(&report).expect("serializable"), code))
        }
    }
}

#[derive(Serialize)]
struct LinkSummaryOut {
    schema: String,
    center: [f64; 4],
    radius: f64,
    method: singulab::link::TraceMethod,
    components: usize,
    windings: Vec<(i64, i64)>,
    closure_gaps: Vec<f64>,
    points: Vec<usize>,
    linking: Vec<Vec<i64>>,
    linking_raw: Vec<Vec<f64>>,
}

fn summary(r: &singulab::link::LinkReport) -> LinkSummaryOut {
    LinkSummaryOut {
        schema: r.schema.clone(),
        center: r.center,
        radius: r.radius,
        method: r.method,
        components: r.components.len(),
        windings: r.components.iter().map(|c| c.winding).collect(),
        closure_gaps: r.components.iter().map(|c| c.closure_gap).collect(),
        points: r.components.iter().map(|c| c.points.len()).collect(),
        linking: r.linking.clone(),
        linking_raw: r.linking_raw.clone(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 4 } else { 0 });
        }
    };
    let output = cli.global.output.clone();
    match run(cli) {
        Ok((value, code)) => {
            let text = serde_json::to_string_pretty(&value).expect("serializable") + "\n";
            let written = match &output {
                Some(path) => std::fs::write(path, text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(4);
            }
            ExitCode::from(code.unwrap_or(0))
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_entries_print_as_numbers() {
        let entry = |text: &str| hessian_entry(&parse_poly(text, Some(1)).unwrap());
        assert_eq!(entry("0"), json!(0));
        assert_eq!(entry("-3"), json!(-3));
        assert_eq!(entry("1/2"), json!("(1/2+0i)"));
        assert_eq!(entry("2*z1"), json!("(2+0i) * z1"));
    }

    #[test]
    fn exit_codes_follow_the_taxonomy() {
        assert_eq!(CliError::Usage(String::new()).exit_code(), 4);
        assert_eq!(CliError::Deform(DeformError::Infeasible(1)).exit_code(), 1);
        assert_eq!(CliError::Deform(DeformError::SearchExhausted(4)).exit_code(), 2);
        assert_eq!(CliError::Link(LinkError::NonClosure(9)).exit_code(), 3);
    }

    #[test]
    fn flags_override_config() {
        let args = GlobalArgs {
            config: None,
            set: vec!["grid = 5".into(), "t=1/7".into()],
            seed: Some(9),
            workers: None,
            grid: Some(6),
            rank_tol: None,
            residual_tol: None,
            margin_tol: None,
            output: None,
        };
        let config = build_config(&args).unwrap();
        assert_eq!((config.grid, config.seed, config.t.as_str()), (6, 9, "1/7"));
    }
}
