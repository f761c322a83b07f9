//! Command-line front end: parses expression-language data, dispatches to
//! the solvers and studies, and emits JSON/CSV artifacts.
//!
//! Exit codes: 0 success, 2 configuration/schema violation, 3 hypothesis
//! rejection (stderr names the violated hypothesis), 4 numeric singularity.

use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use dbar_core::domains::{DiscDomain, ProductDomain};
use dbar_core::error::Error as CoreError;
use dbar_core::expr::{CExpr, Var};
use dbar_core::form::{CoordBlock, Form};
use dbar_core::hardy;
use dbar_core::hartogs;
use dbar_core::product;
use dbar_core::weights::{
    self, ap_lower_bound, ap_star_lower_bound, default_disc_family, ApConfig, GridSpec,
    NormDomain, WeightSpec,
};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "dbar", version, about = "Solution operators and experiments for the dbar equation on discs, products of discs, and the Hartogs triangle")]
struct Cli {
    /// JSON config file mirroring the global flags; CLI flags override it.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Radial node count per disc factor.
    #[arg(long, global = true)]
    nr: Option<usize>,
    /// Angular node count per disc factor.
    #[arg(long, global = true)]
    ntheta: Option<usize>,
    /// Seed for every randomized battery or sample set.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Debug, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    nr: Option<usize>,
    ntheta: Option<usize>,
    seed: Option<u64>,
    out: Option<String>,
    format: Option<OutputFormat>,
}

#[derive(Clone, Copy)]
struct Settings {
    grid: GridSpec,
    seed: u64,
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Solve du̅ = f on a product of unit discs.
    SolveProduct(SolveProductArgs),
    /// Solve du̅ = f on the Hartogs triangle.
    SolveHartogs(SolveHartogsArgs),
    /// Weighted Sobolev norm of an expression.
    Norm(NormArgs),
    /// One-variable Muckenhoupt constant lower bound.
    Ap(ApArgs),
    /// Slice-uniform Muckenhoupt constant lower bound on a product.
    Apstar(ApArgs),
    /// Weighted Hardy inequality ratio.
    Hardy(HardyArgs),
    /// Truncated-Cauchy and contour-derivative identities.
    Identity(IdentityArgs),
    /// Divergence experiments certifying optimality.
    Counterexample(CounterexampleArgs),
    /// Operator-norm ratio study on the bidisc.
    RatioStudy(RatioStudyArgs),
    /// Weighted-vs-index-preserving comparison on the triangle.
    WeightLossStudy(WeightLossArgs),
}

#[derive(Args)]
struct SolveProductArgs {
    /// Form components, e.g. "conj(w2):dw1, conj(w1):dw2" or "1:dw1^dw2".
    #[arg(long)]
    form: String,
}

#[derive(Args)]
struct SolveHartogsArgs {
    /// Form components in z-coordinates, e.g. "conj(z2):dz1, conj(z1):dz2".
    #[arg(long)]
    form: String,
    #[arg(long, value_enum, default_value = "basic")]
    mode: HartogsMode,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 5.0)]
    p: f64,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum HartogsMode {
    Basic,
    Optimal,
}

#[derive(Args)]
struct NormArgs {
    #[arg(long)]
    expr: String,
    #[arg(long, value_enum, default_value = "disc")]
    domain: NormDomainArg,
    /// Variable for disc norms (z1..z3, w1..w3, zeta).
    #[arg(long, default_value = "w1")]
    var: String,
    #[arg(long, default_value_t = 0)]
    k: usize,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Weight expression (defaults to 1).
    #[arg(long)]
    weight: Option<String>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum NormDomainArg {
    Disc,
    Bidisc,
    Hartogs,
}

#[derive(Args)]
struct ApArgs {
    /// Weight expression, e.g. "abs(w2)^2".
    #[arg(long)]
    weight: String,
    #[arg(long)]
    p: f64,
    /// Singular points "re,im;re,im" used to center the disc family.
    #[arg(long)]
    singular: Option<String>,
    /// Variable (ap) or block w|z (apstar).
    #[arg(long)]
    var: Option<String>,
    /// Random discs appended to the centered family (seeded).
    #[arg(long, default_value_t = 0)]
    extra_discs: usize,
}

#[derive(Args)]
struct HardyArgs {
    #[arg(long)]
    expr: String,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    j: usize,
    #[arg(long, default_value = "w1")]
    var: String,
    /// Exploratory run below the p > 4 hypothesis (ratios only, no
    /// pass/fail meaning).
    #[arg(long)]
    allow_low_p: bool,
}

#[derive(Args)]
struct IdentityArgs {
    /// i: pointwise truncated Cauchy; ii: operator form; 2s: contour
    /// derivative identity.
    #[arg(long)]
    which: String,
    #[arg(long)]
    expr: String,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Target point "re,im".
    #[arg(long, default_value = "0.3,0.2")]
    z: String,
    #[arg(long, default_value = "w1")]
    var: String,
}

#[derive(Args)]
struct CounterexampleArgs {
    /// kerzman | weighted | t1-optimality.
    which: String,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 5.0)]
    p: f64,
    /// Comma-separated decreasing δ schedule.
    #[arg(long, default_value = "1e-1,1e-2,1e-3,1e-4")]
    deltas: String,
    /// Excess exponent ε for the weighted example.
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Weight power s for the weighted example.
    #[arg(long, default_value_t = 1.5)]
    s: f64,
}

#[derive(Args)]
struct RatioStudyArgs {
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 5.0)]
    p: f64,
    #[arg(long)]
    weight: Option<String>,
    /// Battery size.
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Grid doubling factor applied to the study grid (1 or 2).
    #[arg(long, default_value_t = 1)]
    refine: usize,
}

#[derive(Args)]
struct WeightLossArgs {
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 5.0)]
    p: f64,
    #[arg(long, default_value_t = 8)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    refine: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

#[derive(Debug)]
enum CliError {
    Core(CoreError),
    Schema(String),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Schema(m) => write!(f, "schema violation: {m}"),
            CliError::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn exit_code_for(err: &CliError) -> u8 {
    match err {
        CliError::Schema(_) | CliError::Io(_) => 2,
        CliError::Core(e) => match e {
            CoreError::Config(_) | CoreError::Parse { .. } | CoreError::UnknownIdentifier { .. } => 2,
            CoreError::Hypothesis(_) | CoreError::Domain(_) | CoreError::Unsupported(_) => 3,
            CoreError::SingularEval(_) | CoreError::NonFinite { .. } => 4,
        },
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file_cfg: FileConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| CliError::Schema(e.to_string()))?
        }
        None => FileConfig::default(),
    };
    let settings = Settings {
        grid: GridSpec::new(
            cli.nr.or(file_cfg.nr).unwrap_or(64),
            cli.ntheta.or(file_cfg.ntheta).unwrap_or(256),
        ),
        seed: cli.seed.or(file_cfg.seed).unwrap_or(0),
        format: cli.format.or(file_cfg.format).unwrap_or(OutputFormat::Json),
    };
    let out_path = cli.out.or(file_cfg.out);

    let artifact = dispatch(&cli.command, &settings)?;
    let rendered = match settings.format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&artifact.json)
                .map_err(|e| CliError::Schema(e.to_string()))?;
            s.push('\n');
            s
        }
        OutputFormat::Csv => artifact.csv,
    };
    match out_path {
        Some(path) => std::fs::write(path, rendered)?,
        None => {
            std::io::stdout().write_all(rendered.as_bytes())?;
        }
    }
    Ok(())
}

struct Artifact {
    json: Value,
    csv: String,
}

/// Deterministic float formatting: scientific for small magnitudes, plain
/// shortest-round-trip otherwise.
fn fmt_num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn parse_var(name: &str) -> Result<Var, CliError> {
    Var::from_name(name)
        .ok_or_else(|| CliError::Schema(format!("unknown variable `{name}`")))
}

fn parse_complex(text: &str) -> Result<Complex64, CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Schema(format!(
            "expected a complex number as `re,im`, got `{text}`"
        )));
    }
    let re: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| CliError::Schema(format!("bad real part `{}`", parts[0])))?;
    let im: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| CliError::Schema(format!("bad imaginary part `{}`", parts[1])))?;
    Ok(Complex64::new(re, im))
}

fn parse_deltas(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Schema(format!("bad delta `{t}`")))
        })
        .collect()
}

/// Split on top-level commas (commas inside parentheses belong to pow(...)).
fn split_components(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for ch in text.chars() {
        match ch {
            '(' => {
                depth += 1;
                current.push(ch);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                current.push(ch);
            }
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut current));
            }
            _ => current.push(ch),
        }
    }
    if !current.trim().is_empty() {
        out.push(current);
    }
    out
}

/// Parse "expr:dz1, expr:dz2" / "expr:dw1^dw2" into a form.
fn parse_form(text: &str) -> Result<Form, CliError> {
    let mut block: Option<CoordBlock> = None;
    let mut n = 2usize;
    let mut degree: Option<usize> = None;
    let mut parts: Vec<(Vec<usize>, CExpr)> = Vec::new();
    for item in split_components(text) {
        let (expr_text, index_text) = item.rsplit_once(':').ok_or_else(|| {
            CliError::Schema(format!("component `{item}` is missing its `:dz...` index"))
        })?;
        let coeff = dbar_core::parse(expr_text.trim())?;
        let mut indices = Vec::new();
        for token in index_text.trim().split('^') {
            let token = token.trim();
            let (b, idx) = if let Some(rest) = token.strip_prefix("dz") {
                (CoordBlock::Z, rest)
            } else if let Some(rest) = token.strip_prefix("dw") {
                (CoordBlock::W, rest)
            } else {
                return Err(CliError::Schema(format!(
                    "index token `{token}` must look like dz1 or dw2"
                )));
            };
            match block {
                None => block = Some(b),
                Some(prev) if prev != b => {
                    return Err(CliError::Schema(
                        "mixed dz/dw component indices in one form".into(),
                    ))
                }
                _ => {}
            }
            let j: usize = idx
                .parse()
                .map_err(|_| CliError::Schema(format!("bad index `{token}`")))?;
            if j == 0 || j > 3 {
                return Err(CliError::Schema(format!("index {j} out of range 1..=3")));
            }
            n = n.max(j);
            indices.push(j);
        }
        match degree {
            None => degree = Some(indices.len()),
            Some(d) if d != indices.len() => {
                return Err(CliError::Schema("components of mixed degree".into()))
            }
            _ => {}
        }
        parts.push((indices, coeff));
    }
    let block = block.ok_or_else(|| CliError::Schema("empty form".into()))?;
    let degree = degree.unwrap();
    let mut form = Form::new(block, n, degree)?;
    for (idx, coeff) in parts {
        form = form.with_component(&idx, coeff)?;
    }
    Ok(form)
}

fn parse_weight(text: Option<&str>, singular: Option<&str>) -> Result<WeightSpec, CliError> {
    let mut spec = match text {
        None => WeightSpec::unit(),
        Some(t) => WeightSpec::new(dbar_core::parse(t)?, t),
    };
    if let Some(s) = singular {
        let mut points = Vec::new();
        for item in s.split(';') {
            points.push(parse_complex(item)?);
        }
        spec = spec.with_singular_points(points);
    }
    Ok(spec)
}

fn grid_json(grid: &GridSpec) -> Value {
    json!({ "n_r": grid.n_r, "n_theta": grid.n_theta })
}

/// Canonical display form: normalized when possible.
fn canonical_text(e: &CExpr) -> String {
    match dbar_core::normalize(e) {
        Ok(p) => p.to_expr().to_string(),
        Err(_) => e.to_string(),
    }
}

fn dispatch(command: &Command, settings: &Settings) -> Result<Artifact, CliError> {
    match command {
        Command::SolveProduct(args) => solve_product_cmd(args, settings),
        Command::SolveHartogs(args) => solve_hartogs_cmd(args, settings),
        Command::Norm(args) => norm_cmd(args, settings),
        Command::Ap(args) => ap_cmd(args, settings, false),
        Command::Apstar(args) => ap_cmd(args, settings, true),
        Command::Hardy(args) => hardy_cmd(args, settings),
        Command::Identity(args) => identity_cmd(args, settings),
        Command::Counterexample(args) => counterexample_cmd(args, settings),
        Command::RatioStudy(args) => ratio_study_cmd(args, settings),
        Command::WeightLossStudy(args) => weight_loss_cmd(args, settings),
    }
}

fn solve_product_cmd(args: &SolveProductArgs, settings: &Settings) -> Result<Artifact, CliError> {
    let form = parse_form(&args.form)?;
    let product = match form.n {
        2 => ProductDomain::bidisc(),
        _ => ProductDomain::tridisc(),
    };
    let solution = product::solve_product(&form, &product, 1e-9, settings.seed)?;
    let mut components = serde_json::Map::new();
    for (idx, comp) in &solution.components {
        let key = if idx.is_empty() {
            "u".to_string()
        } else {
            format!("u_{}", idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(""))
        };
        match comp.symbolic_poly() {
            Some(p) => components.insert(key, Value::String(p.to_expr().to_string())),
            None => components.insert(key, Value::String("<numeric>".into())),
        };
    }
    let residual = if solution.is_symbolic() {
        Some(product::solution_residual(&solution, &form)?)
    } else {
        None
    };
    let json = json!({
        "schema": SCHEMA_VERSION,
        "command": "solve-product",
        "grid": grid_json(&settings.grid),
        "seed": settings.seed,
        "symbolic": solution.is_symbolic(),
        "solution": Value::Object(components),
        "residual": residual.map(fmt_num),
    });
    let csv = csv_table(
        &["key", "value"],
        &[
            vec!["symbolic".into(), solution.is_symbolic().to_string()],
            vec![
                "residual".into(),
                residual.map(fmt_num).unwrap_or_default(),
            ],
        ],
    );
    Ok(Artifact { json, csv })
}

fn solve_hartogs_cmd(args: &SolveHartogsArgs, settings: &Settings) -> Result<Artifact, CliError> {
    let form = parse_form(&args.form)?;
    let solution = match args.mode {
        HartogsMode::Basic => hartogs::solve_basic(&form, settings.seed)?,
        HartogsMode::Optimal => hartogs::solve_optimal(&form, args.k, args.p, settings.seed)?,
    };
    let u_text = solution
        .as_expr()
        .map(canonical_text)
        .unwrap_or_else(|| "<numeric>".into());
    let residual = match solution.as_expr() {
        Some(u) => Some(hartogs::triangle_residual(u, &form)?),
        None => None,
    };
    let prov = &solution.provenance;
    let stage = |e: &Option<CExpr>| -> Value {
        e.as_ref()
            .map(|x| Value::String(canonical_text(x)))
            .unwrap_or(Value::Null)
    };
    let json = json!({
        "schema": SCHEMA_VERSION,
        "command": "solve-hartogs",
        "mode": match args.mode { HartogsMode::Basic => "basic", HartogsMode::Optimal => "optimal" },
        "k": args.k,
        "p": args.p,
        "grid": grid_json(&settings.grid),
        "seed": settings.seed,
        "solution": u_text,
        "residual": residual.map(fmt_num),
        "warnings": solution.warnings,
        "provenance": {
            "taylor_data": prov.taylor_data.as_ref().map(|f| {
                f.components.iter().map(|(idx, c)| (format!("{idx:?}"), canonical_text(c))).collect::<Vec<_>>()
            }),
            "u_low": stage(&prov.u_low),
            "f_tilde": prov.f_tilde.as_ref().map(|f| {
                f.components.iter().map(|(idx, c)| (format!("{idx:?}"), canonical_text(c))).collect::<Vec<_>>()
            }),
            "u_star": stage(&prov.u_star),
            "u_tilde": stage(&prov.u_tilde),
        },
    });
    let csv = csv_table(
        &["key", "value"],
        &[
            vec!["solution".into(), u_text],
            vec![
                "residual".into(),
                residual.map(fmt_num).unwrap_or_default(),
            ],
        ],
    );
    Ok(Artifact { json, csv })
}

fn norm_cmd(args: &NormArgs, settings: &Settings) -> Result<Artifact, CliError> {
    let expr = dbar_core::parse(&args.expr)?;
    let weight = parse_weight(args.weight.as_deref(), None)?;
    let var = parse_var(&args.var)?;
    let domain = match args.domain {
        NormDomainArg::Disc => NormDomain::Disc {
            disc: DiscDomain::unit(),
            var,
        },
        NormDomainArg::Bidisc => {
            let block = match var {
                Var::Z1 | Var::Z2 | Var::Z3 => CoordBlock::Z,
                _ => CoordBlock::W,
            };
            NormDomain::unit_bidisc(block)
        }
        NormDomainArg::Hartogs => NormDomain::HartogsViaBidisc,
    };
    let grid = match args.domain {
        NormDomainArg::Disc => settings.grid,
        _ => GridSpec::new(settings.grid.n_r.min(32), settings.grid.n_theta.min(64)),
    };
    let report = weights::sobolev_norm(&expr, &domain, args.k, args.p, &weight, &grid)?;
    let json = json!({
        "schema": SCHEMA_VERSION,
        "command": "norm",
        "grid": grid_json(&grid),
        "seed": settings.seed,
        "report": report,
    });
    let rows: Vec<Vec<String>> = report
        .per_order
        .iter()
        .enumerate()
        .map(|(l, v)| vec![l.to_string(), fmt_num(*v)])
        .chain(std::iter::once(vec!["total".into(), fmt_num(report.total)]))
        .collect();
    let csv = csv_table(&["order", "value"], &rows);
    Ok(Artifact { json, csv })
}

fn ap_cmd(args: &ApArgs, settings: &Settings, star: bool) -> Result<Artifact, CliError> {
    let weight = parse_weight(Some(&args.weight), args.singular.as_deref())?;
    let family = default_disc_family(&weight.singular_points, args.extra_discs, settings.seed);
    let cfg = ApConfig::default();
    if star {
        let block = match args.var.as_deref() {
            Some("z") => CoordBlock::Z,
            _ => CoordBlock::W,
        };
        let est = ap_star_lower_bound(&weight, block, args.p, 16, &family, settings.seed, &cfg)?;
        let json = json!({
            "schema": SCHEMA_VERSION,
            "command": "apstar",
            "p": args.p,
            "seed": settings.seed,
            "value": fmt_num(est.value),
            "divergent": est.divergent,
        });
        let rows: Vec<Vec<String>> = est
            .per_slice
            .iter()
            .map(|(axis, re, im, v, div)| {
                vec![
                    axis.to_string(),
                    fmt_num(*re),
                    fmt_num(*im),
                    fmt_num(*v),
                    div.to_string(),
                ]
            })
            .collect();
        let csv = csv_table(&["axis", "frozen_re", "frozen_im", "estimate", "divergent"], &rows);
        return Ok(Artifact { json, csv });
    }
    let var = parse_var(args.var.as_deref().unwrap_or("w1"))?;
    let wp = weight.to_poly()?;
    let est = ap_lower_bound(&wp, var, args.p, &family, &cfg)?;
    let json = json!({
        "schema": SCHEMA_VERSION,
        "command": "ap",
        "p": args.p,
        "seed": settings.seed,
        "value": fmt_num(est.value),
        "divergent": est.divergent,
    });
    let rows: Vec<Vec<String>> = est
        .per_disc
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), fmt_num(*v)])
        .collect();
    let csv = csv_table(&["disc", "estimate"], &rows);
    Ok(Artifact { json, csv })
}

fn hardy_cmd(args: &HardyArgs, settings: &Settings) -> Result<Artifact, CliError> {
    let expr = dbar_core::parse(&args.expr)?;
    let var = parse_var(&args.var)?;
    let ratio = hardy::hardy_ratio(
        &expr,
        var,
        args.k,
        args.p,
        args.j,
        DiscDomain::unit(),
        &settings.grid,
        args.allow_low_p,
    )?;
    let json = json!({
        "schema": SCHEMA_VERSION,
        "command": "hardy",
        "grid": grid_json(&settings.grid),
        "exploratory": args.allow_low_p && args.p <= 4.0,
        "report": ratio,
    });
    let csv = csv_table(
        &["lhs", "rhs", "ratio"],
        &[vec![fmt_num(ratio.lhs), fmt_num(ratio.rhs), fmt_num(ratio.ratio)]],
    );
    Ok(Artifact { json, csv })
}

fn identity_cmd(args: &IdentityArgs, settings: &Settings) -> Result<Artifact, CliError> {
    let expr = dbar_core::parse(&args.expr)?;
    let var = parse_var(&args.var)?;
    let z = parse_complex(&args.z)?;
    let residual = match args.which.as_str() {
        "i" => hardy::truncated_cauchy_pointwise(&expr, var, args.k, z, &settings.grid)?,
        "ii" => hardy::truncated_cauchy_operator(&expr, var, args.k)?,
        "2s" => hardy::boundary_derivative_identity(&expr, var, z, &settings.grid)?,
        other => {
            return Err(CliError::Schema(format!(
                "--which must be i, ii, or 2s, got `{other}`"
            )))
        }
    };
    let json = json!({
        "schema": SCHEMA_VERSION,
        "command": "identity",
        "which": args.which,
        "k": args.k,
        "grid": grid_json(&settings.grid),
        "residual": fmt_num(residual),
    });
    let csv = csv_table(&["which", "residual"], &[vec![args.which.clone(), fmt_num(residual)]]);
    Ok(Artifact { json, csv })
}

fn counterexample_cmd(args: &CounterexampleArgs, settings: &Settings) -> Result<Artifact, CliError> {
    let deltas = parse_deltas(&args.deltas)?;
    match args.which.as_str() {
        "kerzman" => {
            let report =
                hartogs::kerzman_experiment(args.k, args.p, &deltas, &settings.grid, settings.seed)?;
            let rows: Vec<Vec<String>> = report
                .energies
                .iter()
                .map(|(d, e)| {
                    vec![
                        fmt_num(*d),
                        fmt_num(*e),
                        fmt_num(report.fit_vs_log.slope),
                        fmt_num(report.fit_vs_log.r_squared),
                    ]
                })
                .collect();
            let json = json!({
                "schema": SCHEMA_VERSION,
                "command": "counterexample-kerzman",
                "k": args.k,
                "p": args.p,
                "grid": grid_json(&settings.grid),
                "report": report,
            });
            Ok(Artifact {
                json,
                csv: csv_table(&["delta", "integral", "log_fit_slope", "r2"], &rows),
            })
        }
        "weighted" => {
            let report = product::weighted_no_gain_example(
                args.k,
                args.p,
                args.eps,
                args.s,
                &deltas,
                &settings.grid,
                settings.seed,
            )?;
            let rows: Vec<Vec<String>> = report
                .energies
                .iter()
                .map(|(d, e)| {
                    vec![
                        fmt_num(*d),
                        fmt_num(*e),
                        fmt_num(report.fitted_exponent),
                        fmt_num(report.expected_exponent),
                    ]
                })
                .collect();
            let json = json!({
                "schema": SCHEMA_VERSION,
                "command": "counterexample-weighted",
                "k": args.k,
                "p": args.p,
                "eps": args.eps,
                "s": args.s,
                "grid": grid_json(&settings.grid),
                "report": report,
            });
            Ok(Artifact {
                json,
                csv: csv_table(&["delta", "integral", "fitted_exponent", "expected_exponent"], &rows),
            })
        }
        "t1-optimality" => {
            let report = product::t1_optimality_witness(args.k, args.p, &deltas, &settings.grid)?;
            let rows: Vec<Vec<String>> = report
                .energies
                .iter()
                .map(|(d, e)| {
                    vec![
                        fmt_num(*d),
                        fmt_num(*e),
                        fmt_num(report.fit_vs_log.slope),
                        fmt_num(report.fit_vs_log.r_squared),
                    ]
                })
                .collect();
            let json = json!({
                "schema": SCHEMA_VERSION,
                "command": "counterexample-t1-optimality",
                "k": args.k,
                "p": args.p,
                "grid": grid_json(&settings.grid),
                "report": report,
            });
            Ok(Artifact {
                json,
                csv: csv_table(&["delta", "integral", "log_fit_slope", "r2"], &rows),
            })
        }
        other => Err(CliError::Schema(format!(
            "counterexample must be kerzman, weighted, or t1-optimality, got `{other}`"
        ))),
    }
}

fn ratio_study_cmd(args: &RatioStudyArgs, settings: &Settings) -> Result<Artifact, CliError> {
    if !(1..=2).contains(&args.refine) {
        return Err(CliError::Schema("--refine must be 1 or 2".into()));
    }
    let weight = parse_weight(args.weight.as_deref(), None)?;
    let family =
        dbar_core::battery::closed_form_battery(CoordBlock::W, 2, 1, args.count, settings.seed);
    let mut grid = GridSpec::product_default();
    if args.refine == 2 {
        grid = grid.doubled();
    }
    let study = product::norm_ratio_study(&family, args.k, args.p, &weight, &grid, settings.seed)?;
    let json = json!({
        "schema": SCHEMA_VERSION,
        "command": "ratio-study",
        "grid": grid_json(&grid),
        "seed": settings.seed,
        "study": study,
    });
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                fmt_num(r.solution_norm),
                fmt_num(r.data_norm),
                fmt_num(r.ratio),
            ]
        })
        .collect();
    Ok(Artifact {
        json,
        csv: csv_table(&["member", "solution_norm", "data_norm", "ratio"], &rows),
    })
}

fn weight_loss_cmd(args: &WeightLossArgs, settings: &Settings) -> Result<Artifact, CliError> {
    if !(1..=2).contains(&args.refine) {
        return Err(CliError::Schema("--refine must be 1 or 2".into()));
    }
    let family =
        dbar_core::battery::closed_form_battery(CoordBlock::Z, 2, 1, args.count, settings.seed);
    let mut grid = GridSpec::product_default();
    if args.refine == 2 {
        grid = grid.doubled();
    }
    let study = hartogs::weight_loss_study(&family, args.k, args.p, &grid, settings.seed)?;
    let json = json!({
        "schema": SCHEMA_VERSION,
        "command": "weight-loss-study",
        "grid": grid_json(&grid),
        "seed": settings.seed,
        "study": study,
    });
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                fmt_num(r.weighted_ratio),
                fmt_num(r.optimal_ratio),
                fmt_num(r.data_norm),
            ]
        })
        .collect();
    Ok(Artifact {
        json,
        csv: csv_table(&["member", "weighted_ratio", "optimal_ratio", "data_norm"], &rows),
    })
}
