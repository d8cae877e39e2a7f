//! The `pq-spectra` command line: argument parsing, command dispatch and
//! JSON/CSV report serialization.
//!
//! Exit codes: 0 on success, 2 for usage or validation errors, 3 when a
//! checked identity misses its tolerance.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::caps::Caps;
use crate::decimation::{exceptional_set, verify_decimation_identity, CubicMap};
use crate::eigenfunction::{
    eigen_equation_residual, extend_formal_eigenfunction, norm_divergence_report,
    trace_at_powers_of_three,
};
use crate::error::Error;
use crate::exact::{self, parse_rational, ExactParams};
use crate::julia::{
    backward_orbit_with, fixed_point_data, julia_cover_capped, BackwardOrbit, DEDUP_TOL,
};
use crate::laplacian::{
    build_truncation_capped, invariant_measure, symmetrize, Boundary, InvariantMeasure, PqParams,
};
use crate::spectral::{
    decimation_closure_check, ds_formula, ds_kigami_lapidus, gap_report, lambda1_scaling,
    spectral_dimension, spectrum_approximation, truncation_spectrum,
};

pub const SCHEMA_VERSION: &str = "pq-spectra/1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "pq-spectra",
    version,
    about = "Spectral decimation for the pq Laplacian"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BoundaryArg {
    Reflecting,
    Dirichlet,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Reflecting => Boundary::Reflecting,
            BoundaryArg::Dirichlet => Boundary::Dirichlet,
        }
    }
}

#[derive(Debug, Args)]
struct Common {
    /// Model parameter, as a fraction (`1/3`) or decimal (`0.3`).
    #[arg(long)]
    p: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Add a metadata block with a generation timestamp (JSON only).
    #[arg(long)]
    with_metadata: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rows of a truncation.
    Matrix {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level: u32,
        #[arg(long, value_enum, default_value_t = BoundaryArg::Reflecting)]
        boundary: BoundaryArg,
        /// Emit the π-symmetrized matrix instead.
        #[arg(long)]
        symmetric: bool,
    },
    /// Invariant measure of the walk.
    Measure {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        extent: usize,
        /// Also compute the measure in exact rational arithmetic.
        #[arg(long)]
        exact: bool,
    },
    /// Schur-complement identity residuals.
    DecimationCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level: u32,
        /// Spectral parameters to test; random when omitted.
        #[arg(long, allow_negative_numbers = true)]
        z: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
    },
    /// Interval cover of the Julia set.
    Julia {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level: u32,
    },
    /// Backward orbit of one or more points.
    Orbit {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_values_t = [0.0])]
        from: Vec<f64>,
        #[arg(long)]
        depth: u32,
    },
    /// Eigenvalues of a truncation and their distance to the Julia set.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level: u32,
        #[arg(long, value_enum, default_value_t = BoundaryArg::Reflecting)]
        boundary: BoundaryArg,
    },
    /// Formal eigenfunction along the half-line.
    Eigenfunction {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        z: f64,
        #[arg(long, default_value_t = 729)]
        extent: usize,
    },
    /// Spectral dimension three ways.
    Dimension {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 6)]
        max_level: u32,
    },
    /// Gaps of the Julia cover, longest first.
    Gaps {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level: u32,
    },
    /// Run every identity check for one parameter.
    VerifyAll {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Matrix { .. } => "matrix",
            Command::Measure { .. } => "measure",
            Command::DecimationCheck { .. } => "decimation-check",
            Command::Julia { .. } => "julia",
            Command::Orbit { .. } => "orbit",
            Command::Spectrum { .. } => "spectrum",
            Command::Eigenfunction { .. } => "eigenfunction",
            Command::Dimension { .. } => "dimension",
            Command::Gaps { .. } => "gaps",
            Command::VerifyAll { .. } => "verify-all",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Matrix { common, .. }
            | Command::Measure { common, .. }
            | Command::DecimationCheck { common, .. }
            | Command::Julia { common, .. }
            | Command::Orbit { common, .. }
            | Command::Spectrum { common, .. }
            | Command::Eigenfunction { common, .. }
            | Command::Dimension { common, .. }
            | Command::Gaps { common, .. }
            | Command::VerifyAll { common, .. } => common,
        }
    }
}

/// Rows for CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Value>) {
        self.rows.push(row);
    }
}

/// A command's result, ready for serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    /// The command line that produced the report, without the program name.
    pub invocation: String,
    pub params: Value,
    pub data: Value,
    pub table: Table,
    pub metadata: Option<Value>,
    /// False when a checked identity missed its tolerance.
    pub passed: bool,
}

impl Report {
    pub fn to_json_value(&self) -> Value {
        let mut obj = json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "params": self.params,
            "data": self.data,
        });
        if let Some(meta) = &self.metadata {
            obj["metadata"] = meta.clone();
        }
        obj
    }
}

/// Renders a number with 17 significant digits.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => format_number(f),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

pub fn serialize_report(report: &Report, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut bytes = serde_json::to_vec_pretty(&report.to_json_value())
                .expect("JSON values always serialize");
            bytes.push(b'\n');
            bytes
        }
        Format::Csv => {
            let mut out = Vec::new();
            writeln!(out, "# schema: {SCHEMA_VERSION}").ok();
            writeln!(out, "# command: {}", report.invocation).ok();
            writeln!(out, "# columns: {}", report.table.columns.join(",")).ok();
            let mut writer = csv::Writer::from_writer(out);
            writer
                .write_record(&report.table.columns)
                .expect("writing to memory");
            for row in &report.table.rows {
                writer
                    .write_record(row.iter().map(csv_cell))
                    .expect("writing to memory");
            }
            writer.into_inner().expect("flushing to memory")
        }
    }
}

/// Parsed `--p`: the float parameter and, when the text was an exact
/// fraction or decimal, its rational value.
struct ParamInput {
    text: String,
    params: PqParams,
    exact: Option<ExactParams>,
}

fn parse_p(text: &str) -> Result<ParamInput, Error> {
    let exact = parse_rational(text).ok();
    let value = match &exact {
        Some(r) => r.to_f64().unwrap_or(f64::NAN),
        None => text
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("cannot parse p = {text:?}")))?,
    };
    let params = PqParams::new(value)?;
    let exact = exact.map(ExactParams::new).transpose()?;
    Ok(ParamInput {
        text: text.to_string(),
        params,
        exact,
    })
}

fn params_value(input: &ParamInput) -> Value {
    json!({
        "p_input": input.text,
        "p": input.params.p(),
        "q": input.params.q(),
        "pq": input.params.pq(),
    })
}

fn pairs(v: &[(f64, f64)]) -> Value {
    Value::Array(v.iter().map(|&(a, b)| json!([a, b])).collect())
}

/// Numbers that may be non-finite become strings.
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::String(format_number(v))
    }
}

/// Random spectral parameters in `[0, 2]` at least `gap` away from `1 ± p`.
pub fn sample_non_exceptional(
    params: &PqParams,
    count: usize,
    gap: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let z: f64 = rng.gen_range(0.0..=2.0);
        if !params.is_exceptional(z, gap) {
            out.push(z);
        }
    }
    out
}

/// Parses `args` (program name first) and runs the command, writing the
/// report to stdout or `--output` and diagnostics to `err`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    let invocation = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");

    let report = match execute(&cli.command, invocation, &Caps::from_env()) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return match e {
                Error::NotSymmetric { .. } | Error::DetailedBalance { .. } | Error::Bracket(_) => {
                    EXIT_TOLERANCE
                }
                _ => EXIT_USAGE,
            };
        }
    };

    let common = cli.command.common();
    let bytes = serialize_report(&report, common.format);
    let written = match &common.output {
        Some(path) => fs::write(path, &bytes).map_err(|e| e.to_string()),
        None => out.write_all(&bytes).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: cannot write report: {e}");
        return EXIT_USAGE;
    }
    if report.passed {
        EXIT_OK
    } else {
        let _ = writeln!(err, "error: {} tolerance check failed", report.command);
        EXIT_TOLERANCE
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

fn execute(command: &Command, invocation: String, caps: &Caps) -> Result<Report, Error> {
    let common = command.common();
    let input = parse_p(&common.p)?;
    let params = input.params;
    let mut report = Report {
        command: command.name().to_string(),
        invocation,
        params: params_value(&input),
        data: Value::Null,
        table: Table::new(&[]),
        metadata: None,
        passed: true,
    };
    if common.with_metadata {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        report.metadata = Some(json!({ "generated_at_unix": secs }));
    }

    match command {
        Command::Matrix {
            level,
            boundary,
            symmetric,
            ..
        } => {
            let op = build_truncation_capped(&params, *level, (*boundary).into(), caps)?;
            if *symmetric {
                let sym = symmetrize(&op, &InvariantMeasure::of_operator(&op))?;
                let mut table = Table::new(&["site", "diag", "off"]);
                for (x, d) in sym.diag.iter().enumerate() {
                    table.push(vec![
                        json!(x),
                        json!(d),
                        sym.off.get(x).map_or(Value::Null, |v| json!(v)),
                    ]);
                }
                report.data = json!({
                    "level": level,
                    "boundary": format!("{boundary:?}").to_lowercase(),
                    "size": sym.size(),
                    "diag": sym.diag,
                    "off": sym.off,
                });
                report.table = table;
            } else {
                let mut table = Table::new(&["site", "sub", "diag", "sup"]);
                for x in 0..op.size() {
                    table.push(vec![
                        json!(x),
                        json!(op.sub[x]),
                        json!(op.diag[x]),
                        json!(op.sup[x]),
                    ]);
                }
                report.data = json!({
                    "level": level,
                    "boundary": format!("{boundary:?}").to_lowercase(),
                    "size": op.size(),
                    "active_size": op.active_size(),
                    "diag": op.diag,
                    "sub": op.sub,
                    "sup": op.sup,
                });
                report.table = table;
            }
        }

        Command::Measure { extent, exact, .. } => {
            let pi = invariant_measure(&params, *extent);
            let triple = (1..=extent / 3)
                .map(|x| (pi.values[x] - pi.values[3 * x]).abs() / pi.values[x])
                .fold(0.0, f64::max);
            let exact_values: Option<Vec<BigRational>> = if *exact {
                let ep = input.exact.as_ref().ok_or_else(|| {
                    Error::InvalidArgument("--exact needs p as a fraction or plain decimal".into())
                })?;
                Some(exact::invariant_measure(ep, *extent))
            } else {
                None
            };
            let mut columns = vec!["site", "pi"];
            if exact_values.is_some() {
                columns.push("pi_exact");
            }
            let mut table = Table::new(&columns);
            for (x, v) in pi.values.iter().enumerate() {
                let mut row = vec![json!(x), json!(v)];
                if let Some(ev) = &exact_values {
                    row.push(json!(ev[x].to_string()));
                }
                table.push(row);
            }
            let mut data = json!({
                "extent": extent,
                "values": pi.values,
                "triple_invariance_residual": triple,
            });
            if let Some(ev) = &exact_values {
                let exact_triple = (0..=extent / 3).all(|x| ev[x] == ev[3 * x]);
                data["exact_values"] = json!(ev.iter().map(|v| v.to_string()).collect::<Vec<_>>());
                data["exact_triple_invariant"] = json!(exact_triple);
                report.passed &= exact_triple;
            }
            report.passed &= triple < 1e-12;
            report.data = data;
            report.table = table;
        }

        Command::DecimationCheck {
            level,
            z,
            samples,
            seed,
            tolerance,
            ..
        } => {
            if *level > caps.max_level {
                return Err(Error::LevelCap {
                    level: *level,
                    cap: caps.max_level,
                });
            }
            let zs = if z.is_empty() {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                sample_non_exceptional(&params, *samples, 1e-3, &mut rng)
            } else {
                z.clone()
            };
            let mut table = Table::new(&["z", "interior", "boundary", "scale"]);
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            for &zv in &zs {
                let res = verify_decimation_identity(&params, *level, zv)?;
                worst = worst.max(res.interior);
                table.push(vec![
                    json!(zv),
                    json!(res.interior),
                    json!(res.boundary),
                    json!(res.scale),
                ]);
                rows.push(json!({
                    "z": zv,
                    "interior": res.interior,
                    "boundary": res.boundary,
                    "scale": res.scale,
                }));
            }
            report.passed = worst < *tolerance;
            report.data = json!({
                "level": level,
                "tolerance": tolerance,
                "samples": rows,
                "max_interior": worst,
                "passed": report.passed,
            });
            report.table = table;
        }

        Command::Julia { level, .. } => {
            let map = CubicMap::new(params);
            let cover = julia_cover_capped(&map, *level, caps)?;
            let mut table = Table::new(&["left", "right"]);
            for &(a, b) in &cover.intervals {
                table.push(vec![json!(a), json!(b)]);
            }
            let fixed: Vec<Value> = fixed_point_data(&map)
                .iter()
                .map(|f| {
                    json!({
                        "point": num(f.point),
                        "multiplier": f.multiplier,
                        "kind": format!("{:?}", f.kind).to_lowercase(),
                    })
                })
                .collect();
            report.data = json!({
                "level": level,
                "intervals": pairs(&cover.intervals),
                "total_length": cover.total_length,
                "gaps": pairs(&cover.gaps),
                "fixed_points": fixed,
            });
            report.table = table;
        }

        Command::Orbit { from, depth, .. } => {
            let map = CubicMap::new(params);
            let orbit = backward_orbit_with(&map, from, *depth, DEDUP_TOL, caps)?;
            let tol = BackwardOrbit::forward_tolerance(&map, *depth);
            let mut table = Table::new(&["point", "forward_error"]);
            let mut worst: f64 = 0.0;
            for &z in &orbit.points {
                let image = map.iterate(z, *depth);
                let e = from
                    .iter()
                    .map(|s| (image - s).abs())
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(e);
                table.push(vec![json!(z), json!(e)]);
            }
            report.passed = worst < tol;
            report.data = json!({
                "seeds": from,
                "depth": depth,
                "points": orbit.points,
                "max_forward_error": worst,
                "forward_tolerance": tol,
            });
            report.table = table;
        }

        Command::Spectrum {
            level, boundary, ..
        } => {
            let boundary: Boundary = (*boundary).into();
            let mut table = Table::new(&["index", "eigenvalue"]);
            if boundary == Boundary::Reflecting {
                let approx = spectrum_approximation(&params, *level, caps)?;
                for (i, z) in approx.eigenvalues.iter().enumerate() {
                    table.push(vec![json!(i), json!(z)]);
                }
                let [hi, lo] = exceptional_set(&params);
                let exceptional_distance = approx
                    .eigenvalues
                    .iter()
                    .map(|z| (z - hi).abs().min((z - lo).abs()))
                    .fold(f64::INFINITY, f64::min);
                report.passed = approx.max_cover_distance < 1e-8;
                report.data = json!({
                    "level": level,
                    "boundary": "reflecting",
                    "eigenvalues": approx.eigenvalues,
                    "hausdorff_to_cover": approx.hausdorff_to_cover,
                    "hausdorff_to_orbit": approx.hausdorff_to_orbit,
                    "max_cover_distance": approx.max_cover_distance,
                    "exceptional_distance": exceptional_distance,
                });
            } else {
                let ev = truncation_spectrum(&params, *level, boundary, caps)?;
                for (i, z) in ev.iter().enumerate() {
                    table.push(vec![json!(i), json!(z)]);
                }
                report.data = json!({
                    "level": level,
                    "boundary": "dirichlet",
                    "eigenvalues": ev,
                });
            }
            report.table = table;
        }

        Command::Eigenfunction { z, extent, .. } => {
            let map = CubicMap::new(params);
            let trace = extend_formal_eigenfunction(&params, *z, *extent);
            let check = trace_at_powers_of_three(&trace, &map);
            let pi = invariant_measure(&params, trace.values.len() - 1);
            let divergence = norm_divergence_report(&trace, &pi)?;
            let mut table = Table::new(&["x", "f", "l2_partial", "l2pi_partial"]);
            for x in 0..trace.values.len() {
                table.push(vec![
                    json!(x),
                    num(trace.values[x]),
                    num(trace.l2_partials[x]),
                    num(trace.l2pi_partials[x]),
                ]);
            }
            report.data = json!({
                "z": z,
                "extent": trace.values.len() - 1,
                "power_trace": trace.power_trace.iter().map(|&v| num(v)).collect::<Vec<_>>(),
                "power_trace_residuals": check.residuals.iter().map(|&v| num(v)).collect::<Vec<_>>(),
                "power_trace_relative": check.relative.iter().map(|&v| num(v)).collect::<Vec<_>>(),
                "near_exceptional": check.near_exceptional,
                "eigen_equation_residual": num(eigen_equation_residual(&params, &trace)),
                "divergence": {
                    "pi_at_powers": divergence.pi_at_powers,
                    "pi_spread": divergence.pi_spread,
                    "min_abs_power": num(divergence.min_abs_power),
                    "power_non_cauchy": divergence.power_non_cauchy,
                    "block_non_cauchy": divergence.block_non_cauchy,
                    "divergent": divergence.divergent,
                },
            });
            report.table = table;
        }

        Command::Dimension { max_level, .. } => {
            let dim = spectral_dimension(&params, *max_level, caps)?;
            let levels = (*max_level).max(3);
            let table1 = lambda1_scaling(&params, levels, caps)?;
            let mut table = Table::new(&["level", "lambda1", "ratio"]);
            let rows: Vec<Value> = table1
                .rows
                .iter()
                .map(|r| {
                    table.push(vec![
                        json!(r.level),
                        json!(r.lambda1),
                        r.ratio.map_or(Value::Null, |v| json!(v)),
                    ]);
                    json!({"level": r.level, "lambda1": r.lambda1, "ratio": r.ratio})
                })
                .collect();
            report.passed = (dim.ds_formula - dim.ds_kigami_lapidus).abs() < 1e-12;
            report.data = json!({
                "ds_formula": dim.ds_formula,
                "ds_kigami_lapidus": dim.ds_kigami_lapidus,
                "kigami_lapidus_residual": dim.kigami_lapidus_residual,
                "ds_empirical": dim.ds_empirical,
                "empirical_slope": dim.empirical_slope,
                "fit_levels": dim.fit_levels,
                "lambda1": rows,
                "ratio_target": table1.target,
            });
            report.table = table;
        }

        Command::Gaps { level, .. } => {
            let gaps = gap_report(&params, *level, caps)?;
            let mut table = Table::new(&["left", "right", "length"]);
            let rows: Vec<Value> = gaps
                .iter()
                .map(|g| {
                    table.push(vec![json!(g.left), json!(g.right), json!(g.length)]);
                    json!({"left": g.left, "right": g.right, "length": g.length})
                })
                .collect();
            report.data = json!({ "level": level, "gaps": rows });
            report.table = table;
        }

        Command::VerifyAll { seed, samples, .. } => {
            let checks = verify_all(&params, input.exact.as_ref(), *seed, *samples, caps)?;
            let mut table = Table::new(&["check", "passed", "worst", "tolerance"]);
            let rows: Vec<Value> = checks
                .iter()
                .map(|c| {
                    table.push(vec![
                        json!(c.name),
                        json!(c.passed),
                        json!(c.worst),
                        json!(c.tolerance),
                    ]);
                    json!({
                        "name": c.name,
                        "passed": c.passed,
                        "worst": c.worst,
                        "tolerance": c.tolerance,
                    })
                })
                .collect();
            report.passed = checks.iter().all(|c| c.passed);
            report.data = json!({
                "seed": seed,
                "samples": samples,
                "checks": rows,
                "passed": report.passed,
            });
            report.table = table;
        }
    }
    Ok(report)
}

/// One line of the `verify-all` summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    fn below(name: &'static str, worst: f64, tolerance: f64) -> Self {
        Self {
            name,
            passed: worst < tolerance,
            worst,
            tolerance,
        }
    }
}

/// Decimation identity, spectral containment, closure, dimension
/// consistency and measure identities for one parameter.
pub fn verify_all(
    params: &PqParams,
    exact_params: Option<&ExactParams>,
    seed: u64,
    samples: usize,
    caps: &Caps,
) -> Result<Vec<CheckOutcome>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut worst: f64 = 0.0;
    for level in 1..=3 {
        for z in sample_non_exceptional(params, samples, 1e-3, &mut rng) {
            worst = worst.max(verify_decimation_identity(params, level, z)?.interior);
        }
    }
    out.push(CheckOutcome::below("decimation_identity", worst, 1e-10));

    let top = 5.min(caps.max_level);
    let mut containment: f64 = 0.0;
    let mut closure: f64 = 0.0;
    for level in 1..=top {
        containment =
            containment.max(spectrum_approximation(params, level, caps)?.max_cover_distance);
        closure = closure.max(decimation_closure_check(params, level, 1e-8, caps)?.max_distance);
    }
    out.push(CheckOutcome::below(
        "spectral_containment",
        containment,
        1e-8,
    ));
    out.push(CheckOutcome::below("decimation_closure", closure, 1e-8));

    let (kl, _) = ds_kigami_lapidus(params)?;
    out.push(CheckOutcome::below(
        "dimension_consistency",
        (ds_formula(params) - kl).abs(),
        1e-12,
    ));

    let extent = 3usize.pow(6);
    let pi = invariant_measure(params, extent);
    let triple = (1..=extent / 3)
        .map(|x| (pi.values[x] - pi.values[3 * x]).abs() / pi.values[x])
        .fold(0.0, f64::max);
    let balance = (0..extent)
        .map(|x| {
            let (_, right) = crate::laplacian::transition_probabilities(params, x as u64);
            let (left, _) = crate::laplacian::transition_probabilities(params, x as u64 + 1);
            let (f, b) = (pi.values[x] * right, pi.values[x + 1] * left);
            (f - b).abs() / f.abs().max(b.abs())
        })
        .fold(0.0, f64::max);
    let mut measure_worst = triple.max(balance);
    if let Some(ep) = exact_params {
        let exact_pi = exact::invariant_measure(ep, extent);
        if (0..=extent / 3).any(|x| exact_pi[x] != exact_pi[3 * x]) {
            measure_worst = f64::INFINITY;
        }
    }
    out.push(CheckOutcome::below(
        "measure_identity",
        measure_worst,
        1e-12,
    ));
    Ok(out)
}
