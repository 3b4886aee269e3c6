//! The `qforms` command line: subcommands wrapping the library checks, with
//! JSON or text reports and exit codes suitable for CI.
//!
//! Exit codes: 0 completed, 1 an `--expect`ed property failed (or `equiv`
//! was given parameters with different products), 2 inconclusive, 3 input
//! error.

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use qforms::decompose::{admissibility_margin, cubic_admissible, decompose_cubic};
use qforms::extremal::{diagonal_scaling, probe_def1, transform};
use qforms::fields::{
    cell_average_q, divergence_rows, flux_q, q_value, sharp_bound_check, special_flux, special_gradient, Perturbation,
    PeriodicField, SharpBoundReport, Subdomain,
};
use qforms::forms::{var_name, QuadraticForm, Symmetry};
use qforms::polyconvexity::{feasibility, FeasibilityConfig, PolySummary, PolyVerdict};
use qforms::rankone::{search, SearchConfig, VerdictSummary};
use qforms::input::{parse_domain, parse_form, parse_profiles, Family};
use qforms::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{Read, Write};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_EXPECTATION: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "qforms", version, about = "Convexity certificates for quadratic forms on 3x3 gradients")]
pub struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Certification tolerance on the normalised form.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Property the report must establish; repeatable. Exit 1 if it fails.
    #[arg(long, global = true)]
    pub expect: Vec<String>,
    /// Include per-direction and per-perturbation detail, and print timing
    /// to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    /// Fibonacci lattice size for the rank-one search.
    #[arg(long, global = true, default_value_t = 10_000)]
    pub grid: usize,
    /// Local descents in the rank-one search.
    #[arg(long, global = true, default_value_t = 50)]
    pub multistarts: usize,
    /// Iteration cap for each descent and for the feasibility ascent.
    #[arg(long = "max-iter", global = true, default_value_t = 2_000)]
    pub max_iter: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank-one convexity, polyconvexity and symmetries of a form.
    Analyze {
        /// Form spec path, or "-" for stdin.
        input: String,
    },
    /// Sum-of-squares certificate for a cubic-family form.
    Decompose { input: String },
    /// Tries to subtract rank-one squares from a rank-one convex form.
    Probe {
        input: String,
        #[arg(long, default_value_t = 200)]
        directions: usize,
    },
    /// Cell average, pointwise energy and flux divergence of a special field.
    FieldsVerify {
        /// Profile spec path, or "-" for stdin.
        input: String,
        #[arg(long, default_value_t = 1_000)]
        samples: usize,
    },
    /// Energy of perturbed special fields against the boundary functional.
    FieldsBound {
        profiles: String,
        domain: String,
        #[arg(long, default_value_t = 100)]
        perturbations: usize,
        /// Gauss-Legendre points per direction.
        #[arg(long, default_value_t = 24)]
        resolution: usize,
        #[arg(long, default_value_t = 0.2)]
        amplitude: f64,
    },
    /// Diagonal equivalence between two corollary forms, given as "α,β,γ".
    Equiv { from: String, to: String },
}

impl Command {
    fn reads_stdin(&self) -> bool {
        match self {
            Command::Analyze { input }
            | Command::Decompose { input }
            | Command::Probe { input, .. }
            | Command::FieldsVerify { input, .. } => input == "-",
            Command::FieldsBound { profiles, domain, .. } => profiles == "-" || domain == "-",
            Command::Equiv { .. } => false,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Analyze { .. } => "analyze",
            Command::Decompose { .. } => "decompose",
            Command::Probe { .. } => "probe",
            Command::FieldsVerify { .. } => "fields-verify",
            Command::FieldsBound { .. } => "fields-bound",
            Command::Equiv { .. } => "equiv",
        }
    }
}

#[derive(Debug, Serialize)]
struct ConfigEcho {
    seed: u64,
    tol: f64,
    grid: usize,
    multistarts: usize,
    max_iter: usize,
    threads: Option<usize>,
    verbose: bool,
}

#[derive(Debug, Serialize)]
struct ExpectationResult {
    property: String,
    /// `true`, `false`, or `null` when inconclusive.
    holds: Option<bool>,
}

#[derive(Debug, Serialize)]
struct RunReport {
    command: &'static str,
    version: &'static str,
    input_digest: String,
    config: ConfigEcho,
    warnings: Vec<String>,
    result: Value,
    properties: BTreeMap<String, Option<bool>>,
    expectations: Vec<ExpectationResult>,
    exit_code: i32,
}

/// What a subcommand hands back before expectations are applied.
struct Outcome {
    result: Value,
    properties: BTreeMap<String, Option<bool>>,
    warnings: Vec<String>,
    /// Forces a nonzero exit regardless of expectations.
    failure: Option<(i32, String)>,
    inconclusive: bool,
}

impl Outcome {
    fn new(result: Value) -> Self {
        Self {
            result,
            properties: BTreeMap::new(),
            warnings: vec![],
            failure: None,
            inconclusive: false,
        }
    }

    fn prop(&mut self, name: &str, holds: Option<bool>) {
        self.properties.insert(name.to_string(), holds);
    }

    /// A property and its negation.
    fn pair(&mut self, name: &str, negation: &str, holds: Option<bool>) {
        self.prop(name, holds);
        self.prop(negation, holds.map(|h| !h));
    }
}

struct InputError(String);

impl From<Error> for InputError {
    fn from(e: Error) -> Self {
        InputError(e.to_string())
    }
}

fn read_input(path: &str, stdin: &mut dyn Read) -> Result<Vec<u8>, InputError> {
    let mut buf = Vec::new();
    if path == "-" {
        stdin
            .read_to_end(&mut buf)
            .map_err(|e| InputError(format!("reading stdin: {e}")))?;
    } else {
        buf = std::fs::read(path).map_err(|e| InputError(format!("reading {path}: {e}")))?;
    }
    Ok(buf)
}

fn utf8(bytes: &[u8]) -> Result<&str, InputError> {
    std::str::from_utf8(bytes).map_err(|e| InputError(format!("input is not UTF-8: {e}")))
}

fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            h.update([0u8]);
        }
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialise")
}

fn search_config(cli: &Cli) -> SearchConfig {
    SearchConfig {
        grid_size: cli.grid,
        multistarts: cli.multistarts,
        max_iter: cli.max_iter,
        tol: cli.tol,
        seed: cli.seed,
    }
}

fn analyze(cli: &Cli, text: &str) -> Result<Outcome, InputError> {
    let spec = parse_form(text)?;
    let f = spec.form;
    let report = search(&f, &search_config(cli))?;
    let poly = feasibility(
        &f,
        &FeasibilityConfig {
            max_iter: cli.max_iter.max(1),
            tol: cli.tol,
            seed: cli.seed,
            ..FeasibilityConfig::default()
        },
    )?;
    let bq = f.to_biquadratic();
    let (null_coeffs, null_residual) = f.project_onto_minors();
    let mut result = json!({
        "family": spec.family,
        "max_abs_coefficient": f.max_abs(),
        "rank_one": VerdictSummary::from(&report.verdict),
        "rank_one_diagnostics": report.diagnostics,
        "polyconvexity": PolySummary::from(&poly),
        "symmetries": {
            "swap": bq.has_symmetry(Symmetry::Swap),
            "cyclic": bq.has_symmetry(Symmetry::Cyclic),
            "axis_reflection": bq.has_symmetry(Symmetry::AxisReflection),
        },
        "absent_variables": f.absent_variables().into_iter().map(var_name).collect::<Vec<_>>(),
        "minor_projection": { "coefficients": null_coeffs, "residual": null_residual },
    });
    let mut out = Outcome::new(Value::Null);
    out.warnings = spec.warnings;
    if let Family::Cubic(p) = spec.family {
        let admissible = cubic_admissible(p);
        result["cubic_admissible"] = json!(admissible);
        result["admissibility_margin"] = json!(admissibility_margin(p));
        out.pair("admissible", "inadmissible", Some(admissible));
    }
    let violated = report.verdict.is_violated();
    out.pair("rank-one-convex", "not-rank-one-convex", Some(!violated));
    let poly_holds = match poly {
        PolyVerdict::Polyconvex { .. } => Some(true),
        PolyVerdict::NotPolyconvex { .. } => Some(false),
        PolyVerdict::Inconclusive { .. } => None,
    };
    out.pair("polyconvex", "not-polyconvex", poly_holds);
    out.inconclusive = poly_holds.is_none();
    out.result = result;
    Ok(out)
}

fn decompose(text: &str) -> Result<Outcome, InputError> {
    let spec = parse_form(text)?;
    let Family::Cubic(p) = spec.family else {
        return Err(InputError("decompose needs a cubic-family form spec".into()));
    };
    let mut out = Outcome::new(Value::Null);
    out.warnings = spec.warnings;
    match decompose_cubic(p) {
        Ok(cert) => {
            out.result = json!({
                "params": p,
                "status": "decomposed",
                "admissibility_margin": admissibility_margin(p),
                "certificate": cert,
            });
            out.pair("decomposable", "not-decomposable", Some(true));
        }
        Err(Error::Inadmissible(reason)) => {
            out.result = json!({
                "params": p,
                "status": "inadmissible",
                "admissibility_margin": admissibility_margin(p),
                "reason": reason,
            });
            out.pair("decomposable", "not-decomposable", Some(false));
        }
        Err(e) => return Err(e.into()),
    }
    Ok(out)
}

fn probe(cli: &Cli, text: &str, directions: usize) -> Result<Outcome, InputError> {
    let spec = parse_form(text)?;
    let mut out = Outcome::new(Value::Null);
    out.warnings = spec.warnings;
    match probe_def1(&spec.form, directions, &search_config(cli)) {
        Ok(mut report) => {
            if !cli.verbose {
                report.per_direction.clear();
            }
            out.pair("extremal", "not-extremal", Some(report.extremal_def1));
            out.result = json!({ "status": "probed", "report": report });
        }
        Err(Error::NotRankOneConvex { value }) => {
            out.pair("extremal", "not-extremal", Some(false));
            out.result = json!({
                "status": "not_rank_one_convex",
                "value": value,
                "note": "the probe applies to rank-one convex forms only",
            });
        }
        Err(e) => return Err(e.into()),
    }
    Ok(out)
}

fn random_point(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0))
}

fn fields_verify(cli: &Cli, text: &str, samples: usize) -> Result<Outcome, InputError> {
    let sp = parse_profiles(text)?;
    let u = PeriodicField::from_special(&sp);
    let q = QuadraticForm::extremal_q();
    let avg = cell_average_q(&u, &q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let (mut max_q, mut max_rel_q, mut max_flux) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let x = random_point(&mut rng);
        let e = special_gradient(&sp, &x);
        let v = q_value(&e).abs();
        max_q = max_q.max(v);
        max_rel_q = max_rel_q.max(v / (1.0 + e.norm_squared()));
        max_flux = max_flux.max((special_flux(&sp, &x) - flux_q(&e)).amax());
    }
    let h = 1e-3;
    let mut max_div = 0.0f64;
    for _ in 0..samples.min(200) {
        let x = random_point(&mut rng);
        max_div = max_div.max(divergence_rows(&sp, &x, h)?.amax());
    }
    let null_average = avg.spectral.abs() <= 1e-10 * avg.energy_scale.max(1.0)
        && avg.quadrature.abs() <= 1e-10 * avg.energy_scale.max(1.0);
    let mut out = Outcome::new(json!({
        "profiles": sp,
        "max_mode": u.max_k(),
        "cell_average": avg,
        "special": u.is_special(1e-12),
        "samples": samples,
        "pointwise_max_abs_q": max_q,
        "pointwise_max_relative_q": max_rel_q,
        "flux_max_deviation": max_flux,
        "divergence_step": h,
        "divergence_max_residual": max_div,
        "note": "Q(∇u) vanishes pointwise only when one profile is active at each point; the cell average vanishes for every special field",
    }));
    out.prop("null-average", Some(null_average));
    out.prop("backends-agree", Some(avg.relative_gap <= 1e-10));
    out.prop("divergence-free", Some(max_div <= 1e-5));
    out.prop("special", Some(u.is_special(1e-12)));
    out.prop("pointwise-null", Some(max_rel_q <= 1e-12));
    Ok(out)
}

#[derive(Serialize)]
struct PerturbationSummary {
    gap: f64,
    cross_term: f64,
    perturbation_energy: f64,
}

fn fields_bound(
    cli: &Cli,
    profiles: &str,
    domain: &str,
    perturbations: usize,
    resolution: usize,
    amplitude: f64,
) -> Result<Outcome, InputError> {
    let sp = parse_profiles(profiles)?;
    let d: Subdomain = parse_domain(domain)?;
    if !amplitude.is_finite() {
        return Err(InputError("amplitude must be finite".into()));
    }
    let base = sharp_bound_check(&d, &sp, &Perturbation::zero(d.clone()), resolution)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let mut runs: Vec<SharpBoundReport> = Vec::with_capacity(perturbations);
    for _ in 0..perturbations {
        let w = Perturbation::random(d.clone(), amplitude, &mut rng);
        runs.push(sharp_bound_check(&d, &sp, &w, resolution)?);
    }
    let scale = base.interior_special.abs().max(base.boundary.abs()).max(1.0);
    let min_gap = runs.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
    let positive = runs.iter().filter(|r| r.gap > 1e-6).count();
    let max_cross = runs.iter().map(|r| r.cross_term.abs()).fold(0.0, f64::max);
    let max_resid = runs.iter().map(|r| r.decomposition_residual).fold(0.0, f64::max);
    let mut result = json!({
        "profiles": sp,
        "domain": d,
        "resolution": resolution,
        "amplitude": amplitude,
        "unperturbed": base,
        "perturbations": perturbations,
        "min_gap": if runs.is_empty() { Value::Null } else { json!(min_gap) },
        "strictly_positive": positive,
        "max_abs_cross_term": max_cross,
        "max_decomposition_residual": max_resid,
    });
    if cli.verbose {
        let detail: Vec<PerturbationSummary> = runs
            .iter()
            .map(|r| PerturbationSummary {
                gap: r.gap,
                cross_term: r.cross_term,
                perturbation_energy: r.perturbation_energy,
            })
            .collect();
        result["per_perturbation"] = to_value(&detail);
    }
    let mut out = Outcome::new(result);
    out.prop("sharp", Some(base.gap.abs() <= 1e-8 * scale));
    out.prop("bound-holds", Some(runs.iter().all(|r| r.gap >= -1e-8 * scale)));
    out.prop("cross-term-vanishes", Some(max_cross <= 1e-8 * scale));
    Ok(out)
}

fn parse_triple(s: &str) -> Result<[f64; 3], InputError> {
    let trimmed = s.trim().trim_start_matches(['(', '[']).trim_end_matches([')', ']']);
    let parts: Vec<&str> = trimmed.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(InputError(format!("expected three comma-separated numbers, got {s:?}")));
    }
    let mut out = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        out[i] = p
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| InputError(format!("not a finite number: {p:?}")))?;
    }
    Ok(out)
}

fn equiv(from: &str, to: &str) -> Result<Outcome, InputError> {
    let (p, q) = (parse_triple(from)?, parse_triple(to)?);
    match diagonal_scaling(p, q) {
        Ok(m) => {
            let source = QuadraticForm::corollary_q(p[0], p[1], p[2]).to_biquadratic();
            let target = QuadraticForm::corollary_q(q[0], q[1], q[2]).to_biquadratic();
            let mapped = transform(&source, &m)?;
            let err = mapped.max_diff(&target);
            let ok = err <= 1e-12 * target.max_abs().max(1.0);
            let mut out = Outcome::new(json!({
                "from": p,
                "to": q,
                "status": "equivalent",
                "a_diagonal": [m.a[(0, 0)], m.a[(1, 1)], m.a[(2, 2)]],
                "b_diagonal": [m.b[(0, 0)], m.b[(1, 1)], m.b[(2, 2)]],
                "coefficient_error": err,
                "coefficients_match": ok,
            }));
            out.pair("equivalent", "not-equivalent", Some(ok));
            Ok(out)
        }
        Err(Error::InvalidArgument(msg)) if msg.contains("αβγ") => {
            let mut out = Outcome::new(json!({
                "from": p,
                "to": q,
                "status": "not_equivalent",
                "reason": msg,
            }));
            out.pair("equivalent", "not-equivalent", Some(false));
            out.failure = Some((EXIT_EXPECTATION, msg));
            Ok(out)
        }
        Err(e) => Err(e.into()),
    }
}

fn render_text(v: &Value, path: &str, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                render_text(child, &p, out);
            }
        }
        Value::Array(items) if items.iter().any(|x| x.is_object() || x.is_array() && x.to_string().len() > 80) => {
            for (i, child) in items.iter().enumerate() {
                render_text(child, &format!("{path}[{i}]"), out);
            }
        }
        other => {
            out.push_str(&format!("{path}: {other}\n"));
        }
    }
}

fn execute(cli: &Cli, stdin: &mut dyn Read) -> Result<(Outcome, String), InputError> {
    match &cli.command {
        Command::Analyze { input } => {
            let bytes = read_input(input, stdin)?;
            Ok((analyze(cli, utf8(&bytes)?)?, digest(&[&bytes])))
        }
        Command::Decompose { input } => {
            let bytes = read_input(input, stdin)?;
            Ok((decompose(utf8(&bytes)?)?, digest(&[&bytes])))
        }
        Command::Probe { input, directions } => {
            let bytes = read_input(input, stdin)?;
            Ok((probe(cli, utf8(&bytes)?, *directions)?, digest(&[&bytes])))
        }
        Command::FieldsVerify { input, samples } => {
            let bytes = read_input(input, stdin)?;
            Ok((fields_verify(cli, utf8(&bytes)?, *samples)?, digest(&[&bytes])))
        }
        Command::FieldsBound {
            profiles,
            domain,
            perturbations,
            resolution,
            amplitude,
        } => {
            if profiles == "-" && domain == "-" {
                return Err(InputError("only one input can come from stdin".into()));
            }
            let pb = read_input(profiles, stdin)?;
            let db = read_input(domain, stdin)?;
            let out = fields_bound(cli, utf8(&pb)?, utf8(&db)?, *perturbations, *resolution, *amplitude)?;
            Ok((out, digest(&[&pb, &db])))
        }
        Command::Equiv { from, to } => Ok((equiv(from, to)?, digest(&[from.as_bytes(), to.as_bytes()]))),
    }
}

/// Runs the command line in-process and returns the exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{e}")
            } else {
                write!(stdout, "{e}")
            };
            return code;
        }
    };
    let start = Instant::now();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: thread pool: {e}");
            return EXIT_INPUT;
        }
    };
    let mut piped = Vec::new();
    if cli.command.reads_stdin() {
        if let Err(e) = stdin.read_to_end(&mut piped) {
            let _ = writeln!(stderr, "error: reading stdin: {e}");
            return EXIT_INPUT;
        }
    }
    let executed = pool.install(|| execute(&cli, &mut piped.as_slice()));
    let (outcome, input_digest) = match executed {
        Ok(r) => r,
        Err(InputError(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_INPUT;
        }
    };
    let mut expectations = Vec::new();
    for name in &cli.expect {
        match outcome.properties.get(name) {
            Some(holds) => expectations.push(ExpectationResult {
                property: name.clone(),
                holds: *holds,
            }),
            None => {
                let known: Vec<&str> = outcome.properties.keys().map(String::as_str).collect();
                let _ = writeln!(
                    stderr,
                    "error: unknown expectation {name:?} for {}; known: {}",
                    cli.command.name(),
                    known.join(", ")
                );
                return EXIT_INPUT;
            }
        }
    }
    let exit_code = if let Some((code, _)) = &outcome.failure {
        *code
    } else if expectations.iter().any(|e| e.holds == Some(false)) {
        EXIT_EXPECTATION
    } else if expectations.iter().any(|e| e.holds.is_none()) || outcome.inconclusive {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    };
    for w in &outcome.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    if let Some((_, msg)) = &outcome.failure {
        let _ = writeln!(stderr, "error: {msg}");
    }
    for e in expectations.iter().filter(|e| e.holds != Some(true)) {
        let state = if e.holds.is_none() { "inconclusive" } else { "violated" };
        let _ = writeln!(stderr, "expectation {} {state}", e.property);
    }
    let report = RunReport {
        command: cli.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        input_digest,
        config: ConfigEcho {
            seed: cli.seed,
            tol: cli.tol,
            grid: cli.grid,
            multistarts: cli.multistarts,
            max_iter: cli.max_iter,
            threads: cli.threads,
            verbose: cli.verbose,
        },
        warnings: outcome.warnings,
        result: outcome.result,
        properties: outcome.properties,
        expectations,
        exit_code,
    };
    let written = match cli.format {
        Format::Json => writeln!(stdout, "{}", serde_json::to_string_pretty(&report).expect("report serialises")),
        Format::Text => {
            let mut s = String::new();
            render_text(&to_value(&report), "", &mut s);
            write!(stdout, "{s}")
        }
    };
    if written.is_err() {
        return EXIT_INPUT;
    }
    if cli.verbose {
        let _ = writeln!(stderr, "wall time: {:.3} s", start.elapsed().as_secs_f64());
    }
    exit_code
}
