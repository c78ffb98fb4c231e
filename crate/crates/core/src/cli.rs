//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 a gated table or
//! heatmap cell outside its tolerance, 3 quadrature non-convergence.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion;
use crate::harness::{self, GridSpec, Target};
use crate::model::{CgmyModel, CgmyParams};
use crate::pricer::{self, require_converged};
use crate::quadrature::QuadratureConfig;

/// Environment variable naming a config file, used when `--config` is absent.
pub const CONFIG_ENV: &str = "CGMY_ATM_CONFIG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_GATE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

const DEFAULT_T_GRID: [f64; 6] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];

const EXAMPLES: &str = "\
Examples:
  cgmy-atm price --C 1 --G 3 --M 5 --Y 1.5 --t 0.01 --k 0.05
  cgmy-atm coeffs --C 1 --G 3 --M 5 --Y 1.7 --format json
  cgmy-atm expand --Y 1.8 --t 0.001 --include-unproven --format json
  cgmy-atm remainder --Y 1.3 --tmin 1e-6 --tmax 1e-2 --points 5
  cgmy-atm table --kind a21 --out a21.csv
  cgmy-atm heatmap --Y 1.5 --steps 8 --format json
  cgmy-atm lattice --points 99 --out lattice.csv
  cgmy-atm check-laplace --Y 1.8 --t 0.01

A config file (TOML, or JSON by .json extension) may be given with --config
or the CGMY_ATM_CONFIG variable; flags override its values.";

#[derive(Debug, Parser)]
#[command(
    name = "cgmy-atm",
    version,
    about = "Short-maturity ATM call-price asymptotics for the CGMY model",
    after_help = EXAMPLES
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Jump intensity C > 0
    #[arg(long = "C", global = true, allow_negative_numbers = true)]
    c: Option<f64>,
    /// Left tempering rate G >= 0
    #[arg(long = "G", global = true, allow_negative_numbers = true)]
    g: Option<f64>,
    /// Right tempering rate M > 1
    #[arg(long = "M", global = true, allow_negative_numbers = true)]
    m: Option<f64>,
    /// Activity index Y in (1, 2)
    #[arg(long = "Y", global = true, allow_negative_numbers = true)]
    y: Option<f64>,
    /// Maturity in years
    #[arg(long, global = true, allow_negative_numbers = true)]
    t: Option<f64>,
    /// Log-moneyness log(S0/K)
    #[arg(long, global = true, allow_negative_numbers = true)]
    k: Option<f64>,
    /// Smallest maturity of a log-spaced grid
    #[arg(long, global = true, allow_negative_numbers = true)]
    tmin: Option<f64>,
    /// Largest maturity of a log-spaced grid
    #[arg(long, global = true, allow_negative_numbers = true)]
    tmax: Option<f64>,
    /// Number of grid points
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Relative quadrature tolerance
    #[arg(long = "rel-tol", global = true, allow_negative_numbers = true)]
    rel_tol: Option<f64>,
    /// Absolute quadrature tolerance
    #[arg(long = "abs-tol", global = true, allow_negative_numbers = true)]
    abs_tol: Option<f64>,
    /// Output file (default: standard output)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Include unproven higher-order candidate terms
    #[arg(long = "include-unproven", global = true)]
    include_unproven: bool,
    /// Config file (TOML, or JSON by extension)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalized call price c(t, k)
    Price,
    /// Derived constants and closed-form expansion coefficients
    Coeffs,
    /// Expansion terms, optionally evaluated against the ATM price
    Expand,
    /// Remainders R3, R4, R5 after the first two orders
    Remainder,
    /// Reproduce a verification table
    Table {
        /// a21, a12, cubic or convergence
        #[arg(long)]
        kind: String,
    },
    /// d2 quadrature minus closed form over an (M, G) grid
    Heatmap {
        #[arg(long = "m-min", default_value_t = 2.0)]
        m_min: f64,
        #[arg(long = "m-max", default_value_t = 8.0)]
        m_max: f64,
        #[arg(long = "g-min", default_value_t = 1.0)]
        g_min: f64,
        #[arg(long = "g-max", default_value_t = 7.0)]
        g_max: f64,
        #[arg(long, default_value_t = 8)]
        steps: usize,
    },
    /// Candidate exponent curves and bifurcation points
    Lattice {
        #[arg(long = "y-min", default_value_t = 1.01)]
        y_min: f64,
        #[arg(long = "y-max", default_value_t = 1.99)]
        y_max: f64,
        #[arg(long = "n-max", default_value_t = 1)]
        n_max: u32,
        #[arg(long = "j-max", default_value_t = 4)]
        j_max: u32,
    },
    /// Laplace check integrals against their closed-form leading terms
    CheckLaplace,
}

/// Keys accepted in a config file. Unknown keys are ignored, so the JSON
/// written by `coeffs` can be read back.
#[derive(Debug, Default, Deserialize)]
pub struct FileConfig {
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[serde(rename = "G")]
    pub g: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    #[serde(rename = "Y")]
    pub y: Option<f64>,
    pub t: Option<f64>,
    pub k: Option<f64>,
    pub tmin: Option<f64>,
    pub tmax: Option<f64>,
    pub points: Option<usize>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_subdivisions: Option<usize>,
    pub breakpoints: Option<Vec<f64>>,
    pub format: Option<Format>,
    pub include_unproven: Option<bool>,
    pub table: Option<TableOverrides>,
}

#[derive(Debug, Default, Deserialize)]
pub struct TableOverrides {
    pub parameter_sets: Option<Vec<CgmyParams>>,
    pub t_values: Option<Vec<f64>>,
}

pub fn load_config(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Flags merged over the config file.
struct Settings {
    c: f64,
    g: f64,
    m: f64,
    y: f64,
    t: Option<f64>,
    k: f64,
    tmin: Option<f64>,
    tmax: Option<f64>,
    points: usize,
    quad: QuadratureConfig,
    format: Format,
    include_unproven: bool,
    out: Option<PathBuf>,
    table: TableOverrides,
    y_given: bool,
}

impl Settings {
    fn resolve(args: CommonArgs) -> Result<Self> {
        let path = args
            .config
            .clone()
            .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        let file = match path {
            Some(p) => load_config(&p)?,
            None => FileConfig::default(),
        };
        let mut quad = QuadratureConfig::default();
        if let Some(v) = args.rel_tol.or(file.rel_tol) {
            quad.rel_tol = v;
        }
        if let Some(v) = args.abs_tol.or(file.abs_tol) {
            quad.abs_tol = v;
        }
        if let Some(v) = file.max_subdivisions {
            quad.max_subdivisions = v;
        }
        if let Some(v) = file.breakpoints {
            quad.breakpoints = v;
        }
        quad.validate()?;
        let y = args.y.or(file.y);
        Ok(Settings {
            c: args.c.or(file.c).unwrap_or(1.0),
            g: args.g.or(file.g).unwrap_or(3.0),
            m: args.m.or(file.m).unwrap_or(5.0),
            y: y.unwrap_or(1.5),
            y_given: y.is_some(),
            t: args.t.or(file.t),
            k: args.k.or(file.k).unwrap_or(0.0),
            tmin: args.tmin.or(file.tmin),
            tmax: args.tmax.or(file.tmax),
            points: args.points.or(file.points).unwrap_or(6),
            quad,
            format: args.format.or(file.format).unwrap_or(Format::Csv),
            include_unproven: args.include_unproven || file.include_unproven.unwrap_or(false),
            out: args.out,
            table: file.table.unwrap_or_default(),
        })
    }

    fn model(&self) -> Result<CgmyModel> {
        CgmyModel::from_values(self.c, self.g, self.m, self.y)
    }

    /// Maturities requested by `--t` or `--tmin/--tmax/--points`,
    /// descending; the default decade grid otherwise.
    fn t_grid(&self) -> Result<Vec<f64>> {
        if let Some(t) = self.t {
            pricer::check_maturity(t)?;
            return Ok(vec![t]);
        }
        match (self.tmin, self.tmax) {
            (None, None) => Ok(DEFAULT_T_GRID.to_vec()),
            (lo, hi) => {
                let lo = lo.ok_or_else(|| Error::invalid("tmin", "tmin is required with tmax"))?;
                let hi = hi.ok_or_else(|| Error::invalid("tmax", "tmax is required with tmin"))?;
                if !(lo > 0.0 && lo.is_finite()) {
                    return Err(Error::invalid(
                        "tmin",
                        format!("tmin must be positive, got {lo}"),
                    ));
                }
                if !(hi >= lo && hi.is_finite()) {
                    return Err(Error::invalid(
                        "tmax",
                        format!("tmax must be at least tmin, got {hi}"),
                    ));
                }
                if self.points == 0 {
                    return Err(Error::invalid("points", "points must be positive"));
                }
                if self.points == 1 || hi == lo {
                    return Ok(vec![hi]);
                }
                let (a, b) = (hi.log10(), lo.log10());
                Ok(harness::linspace(a, b, self.points)
                    .into_iter()
                    .map(|e| 10f64.powf(e))
                    .collect())
            }
        }
    }
}

/// Parses `std::env::args` and runs the command; returns the exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
                _ => EXIT_INVALID,
            }
        }
    }
}

fn emit(settings: &Settings, text: &str) -> Result<()> {
    match &settings.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::Config(format!("cannot write output: {e}")))
        }
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> String {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

fn execute(cli: Cli) -> Result<i32> {
    let s = Settings::resolve(cli.common)?;
    match cli.command {
        Command::Price => cmd_price(&s),
        Command::Coeffs => cmd_coeffs(&s),
        Command::Expand => cmd_expand(&s),
        Command::Remainder => cmd_remainder(&s),
        Command::Table { kind } => cmd_table(&s, &kind),
        Command::Heatmap {
            m_min,
            m_max,
            g_min,
            g_max,
            steps,
        } => cmd_heatmap(&s, (m_min, m_max, steps), (g_min, g_max, steps)),
        Command::Lattice {
            y_min,
            y_max,
            n_max,
            j_max,
        } => cmd_lattice(&s, y_min, y_max, n_max, j_max),
        Command::CheckLaplace => cmd_check_laplace(&s),
    }
}

#[derive(Serialize)]
struct PriceRecord {
    t: f64,
    k: f64,
    price: f64,
    error_estimate: f64,
    evaluations: usize,
}

fn cmd_price(s: &Settings) -> Result<i32> {
    let model = s.model()?;
    let mut records = Vec::new();
    for t in s.t_grid()? {
        let r = require_converged("price", pricer::price(&model, t, s.k, &s.quad)?)?;
        records.push(PriceRecord {
            t,
            k: s.k,
            price: r.value,
            error_estimate: r.error_estimate,
            evaluations: r.evaluations,
        });
    }
    let text = match s.format {
        Format::Json => harness::to_json(&records) + "\n",
        Format::Csv => {
            let mut out = String::from("t,k,price,error_estimate\n");
            for r in &records {
                out += &format!(
                    "{:e},{},{:.15e},{:.3e}\n",
                    r.t, r.k, r.price, r.error_estimate
                );
            }
            out
        }
    };
    emit(s, &text)?;
    Ok(EXIT_OK)
}

/// Output of `coeffs`; the model keys make it a valid config file.
#[derive(Serialize)]
struct CoeffsReport {
    #[serde(rename = "C")]
    c: f64,
    #[serde(rename = "G")]
    g: f64,
    #[serde(rename = "M")]
    m: f64,
    #[serde(rename = "Y")]
    y: f64,
    tilde_b: f64,
    kappa: f64,
    sigma_y: f64,
    m_shift: f64,
    g_shift: f64,
    beta1: Complex64,
    beta2: Complex64,
    d1: f64,
    d2: f64,
    d2_integral: f64,
    d2_integral_error: f64,
    a21: f64,
    a41: f64,
    a12: f64,
    stable_density_at_zero: f64,
    k_cap: u32,
}

fn cmd_coeffs(s: &Settings) -> Result<i32> {
    let model = s.model()?;
    let d = *model.derived();
    let p = *model.params();
    let d2i = require_converged("d2_integral", expansion::d2_integral(&model, &s.quad)?)?;
    let report = CoeffsReport {
        c: p.c(),
        g: p.g(),
        m: p.m(),
        y: p.y(),
        tilde_b: d.tilde_b,
        kappa: d.kappa,
        sigma_y: d.sigma_y,
        m_shift: d.m_shift,
        g_shift: d.g_shift,
        beta1: d.beta1,
        beta2: d.beta2,
        d1: expansion::d1(&model)?,
        d2: expansion::d2_closed_fl(&model),
        d2_integral: d2i.value,
        d2_integral_error: d2i.error_estimate,
        a21: expansion::a21(&model)?,
        a41: expansion::a41(&model)?,
        a12: expansion::a12(&model)?,
        stable_density_at_zero: expansion::stable_density_at_zero(&model)?,
        k_cap: expansion::k_cap(p.y())?,
    };
    let text = match s.format {
        Format::Json => harness::to_json(&report) + "\n",
        Format::Csv => {
            let value = serde_json::to_value(&report).expect("report serializes");
            let mut out = String::from("name,value\n");
            for (name, v) in value.as_object().expect("object") {
                let v = match v {
                    serde_json::Value::Array(parts) => format!(
                        "\"{}\"",
                        parts
                            .iter()
                            .map(|x| x.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    ),
                    other => other.to_string(),
                };
                out += &format!("{name},{v}\n");
            }
            out
        }
    };
    emit(s, &text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ExpansionEvaluation {
    t: f64,
    expansion: f64,
    price_atm: f64,
    difference: f64,
}

#[derive(Serialize)]
struct ExpandReport {
    expansion: expansion::Expansion,
    notes: Vec<String>,
    evaluations: Vec<ExpansionEvaluation>,
}

fn cmd_expand(s: &Settings) -> Result<i32> {
    let model = s.model()?;
    let (e, notes) = if s.include_unproven {
        expansion::expansion_with_candidates(&model)?
    } else {
        (expansion::expansion_terms(&model)?, Vec::new())
    };
    let mut evaluations = Vec::new();
    if s.t.is_some() || s.tmin.is_some() || s.tmax.is_some() {
        for t in s.t_grid()? {
            let price = require_converged("price_atm", pricer::price_atm(&model, t, &s.quad)?)?;
            let value = e.evaluate_with(t, s.include_unproven);
            evaluations.push(ExpansionEvaluation {
                t,
                expansion: value,
                price_atm: price.value,
                difference: price.value - value,
            });
        }
    }
    let text = match s.format {
        Format::Json => {
            harness::to_json(&ExpandReport {
                expansion: e,
                notes,
                evaluations,
            }) + "\n"
        }
        Format::Csv => {
            let mut out = String::from("exponent,coefficient,mechanism,proven,tie,absorbed\n");
            for term in &e.terms {
                out += &format!(
                    "{:.15},{:.15e},{},{},{},{}\n",
                    term.exponent,
                    term.coefficient,
                    term.mechanism.label(),
                    term.proven,
                    term.tie,
                    term.absorbed
                );
            }
            for note in &notes {
                out += &format!("# {note}\n");
            }
            if !evaluations.is_empty() {
                out += "t,expansion,price_atm,difference\n";
                for v in &evaluations {
                    out += &format!(
                        "{:e},{:.15e},{:.15e},{:.6e}\n",
                        v.t, v.expansion, v.price_atm, v.difference
                    );
                }
            }
            out
        }
    };
    emit(s, &text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct RemainderRecord {
    t: f64,
    r3: f64,
    r4: f64,
    r5: f64,
    error_estimate: f64,
}

fn cmd_remainder(s: &Settings) -> Result<i32> {
    let model = s.model()?;
    let mut records = Vec::new();
    for t in s.t_grid()? {
        let r5 = require_converged("remainder", pricer::remainder_r5(&model, t, &s.quad)?)?;
        let r4 = pricer::remainder_r4(&model, t, &s.quad)?;
        let r3 = pricer::remainder_r3(&model, t, &s.quad)?;
        records.push(RemainderRecord {
            t,
            r3: r3.value,
            r4: r4.value,
            r5: r5.value,
            error_estimate: r3.error_estimate,
        });
    }
    let text = match s.format {
        Format::Json => harness::to_json(&records) + "\n",
        Format::Csv => {
            let mut out = String::from("t,r3,r4,r5,error_estimate\n");
            for r in &records {
                out += &format!(
                    "{:e},{:.15e},{:.15e},{:.15e},{:.3e}\n",
                    r.t, r.r3, r.r4, r.r5, r.error_estimate
                );
            }
            out
        }
    };
    emit(s, &text)?;
    Ok(EXIT_OK)
}

fn cmd_table(s: &Settings, kind: &str) -> Result<i32> {
    let target = Target::from_kind(kind)?;
    let mut spec = GridSpec::published(target)?;
    if let Some(sets) = &s.table.parameter_sets {
        spec.parameter_sets = sets.clone();
    }
    if let Some(ts) = &s.table.t_values {
        spec.t_values = ts.clone();
    }
    spec.validate()?;
    let rows = harness::run_table(&spec, &s.quad)?;
    let text = match s.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Report<'a> {
                target: Target,
                formula: Vec<harness::FormulaCheck>,
                rows: &'a [harness::TableRow],
            }
            harness::to_json(&Report {
                target,
                formula: harness::formula_checks(target)?,
                rows: &rows,
            }) + "\n"
        }
        Format::Csv => csv_bytes(|b| harness::write_table_csv(&rows, b)),
    };
    emit(s, &text)?;
    let failed = rows.iter().filter(|r| !r.within_gate).count();
    if failed > 0 {
        eprintln!("{failed} gated row(s) outside tolerance");
        return Ok(EXIT_GATE);
    }
    Ok(EXIT_OK)
}

fn cmd_heatmap(
    s: &Settings,
    m_range: (f64, f64, usize),
    g_range: (f64, f64, usize),
) -> Result<i32> {
    let c = s.c;
    let cells = harness::run_heatmap(s.y, c, m_range, g_range, &s.quad)?;
    let text = match s.format {
        Format::Json => harness::to_json(&cells) + "\n",
        Format::Csv => csv_bytes(|b| harness::write_heatmap_csv(&cells, b)),
    };
    emit(s, &text)?;
    let failed = cells.iter().filter(|c| !c.within_gate).count();
    if failed > 0 {
        eprintln!("{failed} heatmap cell(s) outside tolerance");
        return Ok(EXIT_GATE);
    }
    Ok(EXIT_OK)
}

fn cmd_lattice(s: &Settings, y_min: f64, y_max: f64, n_max: u32, j_max: u32) -> Result<i32> {
    let grid = if s.y_given {
        vec![s.y]
    } else {
        let n = if s.points > 1 { s.points } else { 99 };
        harness::linspace(y_min, y_max, n)
    };
    let lattice = harness::run_lattice(&grid, n_max, j_max)?;
    let text = match s.format {
        Format::Json => harness::to_json(&lattice) + "\n",
        Format::Csv => csv_bytes(|b| harness::write_lattice_csv(&lattice, b)),
    };
    emit(s, &text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct LaplaceRecord {
    t: f64,
    l21: f64,
    a21_leading: f64,
    l21_ratio: f64,
    l12: f64,
    a12_leading: f64,
    l12_ratio: f64,
}

fn cmd_check_laplace(s: &Settings) -> Result<i32> {
    let model = s.model()?;
    let y = model.y();
    let a21 = expansion::a21(&model)?;
    let a12 = expansion::a12(&model)?;
    let mut records = Vec::new();
    for t in s.t_grid()? {
        let l21 = require_converged("L21", pricer::laplace_check_a21(&model, t, &s.quad)?)?;
        let l12 = require_converged("L12", pricer::laplace_check_a12(&model, t, &s.quad)?)?;
        let lead21 = a21 * t.powf(2.0 - 1.0 / y);
        let lead12 = a12 * t.powf(2.0 / y);
        records.push(LaplaceRecord {
            t,
            l21: l21.value,
            a21_leading: lead21,
            l21_ratio: l21.value / lead21,
            l12: l12.value,
            a12_leading: lead12,
            l12_ratio: l12.value / lead12,
        });
    }
    let text = match s.format {
        Format::Json => harness::to_json(&records) + "\n",
        Format::Csv => {
            let mut out = String::from("t,l21,a21_leading,l21_ratio,l12,a12_leading,l12_ratio\n");
            for r in &records {
                out += &format!(
                    "{:e},{:.10e},{:.10e},{},{:.10e},{:.10e},{}\n",
                    r.t,
                    r.l21,
                    r.a21_leading,
                    harness::six_significant(r.l21_ratio),
                    r.l12,
                    r.a12_leading,
                    harness::six_significant(r.l12_ratio)
                );
            }
            out
        }
    };
    emit(s, &text)?;
    Ok(EXIT_OK)
}
