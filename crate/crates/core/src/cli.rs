//! Command-line front end. Exit codes: 0 all checks pass, 1 a check failed
//! (or a computation broke down), 2 usage or configuration error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::asymptotics::Case;
use crate::error::{Error, Result};
use crate::parametrix::{green_leading, n8_log_coefficient, psi4_closed_form, psi4_n9_form, psi4_solve};
use crate::polyalg::{HomogPoly, LogRadialExpansion};
use crate::rational::{self, int, Rational};
use crate::report::{num, Check, Report, Source, Table};
use crate::spectral::{mu_exact, SpectralSolver};
use crate::sphereforms::{bubble_quotient_moments, sharp_constants};
use crate::tensor::Jet;
use crate::verify::{self, SuiteParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Latex,
}

#[derive(Debug, Parser)]
#[command(name = "qcurv", version, about = "Paneitz-operator parametrices, sharp constants and verification reports")]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Write the report here (atomically) instead of stdout.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Record wall time in the report (makes it non-reproducible).
    #[arg(long, global = true)]
    pub timings: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Table of Q(Sⁿ), ω_n, Y₄(Sⁿ), Θ₄(Sⁿ) with cross-check residuals.
    Constants {
        /// Dimension or range, e.g. `7`, `5..8` (inclusive).
        #[arg(long, default_value = "5..12")]
        n: String,
    },
    /// Leading Green's-function expansion for a jet.
    Parametrix {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, conflicts_with_all = ["jet", "flat"])]
        seed: Option<u64>,
        /// Jet JSON file: {"n", "W", optional "J"}.
        #[arg(long, conflicts_with = "flat")]
        jet: Option<PathBuf>,
        #[arg(long)]
        flat: bool,
    },
    /// Run a verification suite.
    Verify {
        #[arg(value_parser = ["weyl", "parametrix", "sphere", "bubble", "spectral", "asymptotics", "all"])]
        suite: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long = "L", default_value_t = 64)]
        l_max: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Extremal fixed-point iteration on the round sphere.
    Spectral {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long = "L", default_value_t = 64)]
        l_max: usize,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value_t = 0.5)]
        damping: f64,
        #[arg(long, value_enum, default_value = "constant")]
        init: Init,
    },
    /// Fit the λ-expansion of the test-function ratio.
    Asymptotics {
        #[arg(long)]
        case: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Comma-separated λ values; defaults depend on the case.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1.0)]
        a0: f64,
        #[arg(long, default_value_t = 9)]
        cutoff_degree: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Init {
    Constant,
    Perturbed,
}

/// Parses `7`, `5..8` or `5..=8` (both inclusive) into dimensions ≥ 5.
pub fn parse_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Invalid(format!("invalid dimension range {s:?} (expected e.g. 5..8)"));
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let v = parse(s)?;
            (v, v)
        }
    };
    if a < 5 || b < a || b > 64 {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn cell(x: f64) -> String {
    format!("{x:e}")
}

pub fn cmd_constants(ns: &[usize]) -> Result<Report> {
    let mut rep = Report::new("constants", json!({"n": ns}));
    let columns: Vec<String> =
        ["n", "Q_sphere", "omega_n", "Y4", "Theta4", "res_theta_y", "res_spectral", "res_moments"].map(String::from).to_vec();
    let mut rows = Vec::new();
    for &n in ns {
        let c = sharp_constants(n)?;
        let res_ty = (c.theta4 * c.y4 - 1.0).abs();
        let spectral = rational::to_f64(&mu_exact(n, 0)) * c.vol_sphere.powf(4.0 / n as f64);
        let res_sp = (spectral / c.y4 - 1.0).abs();
        let res_mo = (bubble_quotient_moments(n)? / c.y4 - 1.0).abs();
        let inp = json!({"n": n});
        rep.push(Check::abs(format!("constants.n{n}.theta4_times_y4"), inp.clone(), 0.0, res_ty, 1e-12, Source::ClosedForm));
        rep.push(Check::abs(format!("constants.n{n}.y4_vs_spectral_constant"), inp.clone(), 0.0, res_sp, 1e-12, Source::CrossCheck));
        rep.push(Check::abs(format!("constants.n{n}.y4_vs_moment_quotient"), inp, 0.0, res_mo, 1e-12, Source::ClosedForm));
        rows.push(vec![
            n.to_string(),
            rational::format(&c.q_sphere),
            cell(c.omega_n),
            cell(c.y4),
            cell(c.theta4),
            cell(res_ty),
            cell(res_sp),
            cell(res_mo),
        ]);
    }
    rep.data = json!({"columns": columns, "rows": rows});
    rep.table = Some(Table { columns, rows });
    Ok(rep)
}

fn latex_rational(c: &Rational) -> String {
    let a = c.abs();
    if a.denom().is_one() {
        a.numer().to_string()
    } else {
        format!("\\frac{{{}}}{{{}}}", a.numer(), a.denom())
    }
}

/// `poly` in LaTeX with variables `x_1, …, x_n`.
pub fn latex_poly(p: &HomogPoly) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (i, (e, c)) in p.terms().iter().enumerate() {
        let neg = c < &Rational::zero();
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let mono: String = e
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(j, &k)| if k == 1 { format!("x_{{{}}}", j + 1) } else { format!("x_{{{}}}^{{{}}}", j + 1, k) })
            .collect();
        if mono.is_empty() || !c.abs().is_one() {
            out.push_str(&latex_rational(c));
        }
        out.push_str(&mono);
    }
    out
}

/// One row per `(degree, log power)` shell of `r^β Σ ψ_{d,k} log^k r`.
pub fn expansion_table(e: &LogRadialExpansion) -> Table {
    let beta = rational::format(e.radial_exp());
    let rows = e
        .terms()
        .iter()
        .map(|(&(d, k), p)| {
            let log = match k {
                0 => String::new(),
                1 => " \\log r".into(),
                _ => format!(" \\log^{{{k}}} r"),
            };
            vec![d.to_string(), k.to_string(), format!("$r^{{{beta}}}\\left({}\\right){log}$", latex_poly(p))]
        })
        .collect();
    Table { columns: ["degree", "logpow", "term"].map(String::from).to_vec(), rows }
}

pub fn load_jet(path: &std::path::Path) -> Result<Jet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("cannot read jet file {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("jet file {}: {e}", path.display())))?;
    Jet::from_json(&v)
}

pub fn cmd_parametrix(jet: &Jet, provenance: Value) -> Result<Report> {
    let n = jet.n();
    if n < 5 {
        return Err(Error::UnsupportedDimension(n, "parametrix (needs n >= 5)"));
    }
    let g = green_leading(jet)?;
    let mut rep = Report::new("parametrix", json!({"n": n, "jet_source": provenance}));
    let mut data = g.to_json();
    data["jet"] = jet.to_json();
    let inp = json!({"n": n, "jet_source": provenance});
    if jet.is_flat() {
        let bare = g.expansion.terms().len() == 1 && g.expansion.term(0, 0) == HomogPoly::constant(n, rational::one());
        rep.push(Check::flag("parametrix.flat_is_bare_power", inp.clone(), bare, Source::ClosedForm));
    }
    if n >= 8 {
        let psi = psi4_solve(jet)?;
        data["psi4"] = serde_json::to_value(&psi)?;
        if n >= 9 {
            let closed = psi4_closed_form(jet)?;
            let ok = psi.max_logpow() == 0 && psi.term(4, 0) == closed && psi.terms().len() <= 1;
            data["psi4_matches_closed_form"] = json!(ok);
            rep.push(Check::flag("parametrix.psi4_matches_closed_form", inp.clone(), ok, Source::ClosedForm));
            if n == 9 {
                let ok9 = psi.term(4, 0) == psi4_n9_form(jet)?;
                data["psi4_matches_n9_form"] = json!(ok9);
                rep.push(Check::flag("parametrix.psi4_matches_n9_form", inp.clone(), ok9, Source::ClosedForm));
            }
        } else {
            let c = n8_log_coefficient(jet)?;
            let want = -jet.w.norm_sq() / int(1440);
            data["log_coefficient"] = json!(rational::format(&c));
            rep.push(Check::exact("parametrix.n8_log_coefficient", inp.clone(), rational::format(&want), rational::format(&c), Source::ClosedForm));
        }
        let resid = crate::parametrix::verify_recursion_residual(&psi, &crate::parametrix::phi4(jet));
        rep.push(Check::flag("parametrix.recursion_residual_zero", inp, resid.is_zero(), Source::Identity));
    }
    rep.table = Some(expansion_table(&g.expansion));
    rep.data = data;
    Ok(rep)
}

pub fn cmd_verify(suite: &str, p: &SuiteParams) -> Result<Report> {
    let mut rep = Report::new(
        format!("verify {suite}"),
        json!({"suite": suite, "n": p.n, "trials": p.trials, "L": p.l_max, "seed": p.seed}),
    );
    if p.trials == 0 {
        return Err(Error::Invalid("--trials must be positive".into()));
    }
    rep.extend(verify::run_suite(suite, p)?);
    rep.data = json!({"checks": rep.checks.len(), "failed": rep.failures().count()});
    Ok(rep)
}

pub fn cmd_spectral(n: usize, l_max: usize, iters: usize, damping: f64, init: Init) -> Result<Report> {
    if !(5..=64).contains(&n) {
        return Err(Error::Invalid(format!("spectral: n must lie in 5..=64, got {n}")));
    }
    if l_max < 2 {
        return Err(Error::Invalid("spectral: L must be at least 2".into()));
    }
    let s = SpectralSolver::new(n, l_max)?;
    let f0 = match init {
        Init::Constant => s.constant(1.0),
        Init::Perturbed => verify::unit_mode(&s, 2, 0.1, 1.0),
    };
    let tr = s.extremal_iteration(&f0, iters, damping)?;
    let theta = s.theta4_sphere();
    let cfg = json!({"n": n, "L": l_max, "iters": iters, "damping": damping, "init": format!("{init:?}").to_lowercase()});
    let mut rep = Report::new("spectral", cfg.clone());
    let top = tr.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    rep.push(Check::upper("spectral.values_bounded_by_sphere_value", cfg.clone(), theta, top, 1e-6, Source::ClosedForm));
    if init == Init::Constant {
        let drift = tr.values.iter().map(|v| (v - tr.values[0]).abs()).fold(0.0, f64::max);
        rep.push(Check::abs("spectral.fixed_point_drift", cfg.clone(), 0.0, drift, 1e-8, Source::ClosedForm));
    }
    let pd = 2.0 * n as f64 / (n as f64 + 4.0);
    let (t0, n0) = (s.theta4_functional(&tr.field)?, s.lp_norm(&tr.field, pd));
    let mut inv = Vec::new();
    for t in [1.5, 2.0, 4.0] {
        let g = s.mobius_pullback(&tr.field, t);
        let (tt, nn) = (s.theta4_functional(&g)?, s.lp_norm(&g, pd));
        let inp = json!({"t": t});
        rep.push(Check::rel("spectral.mobius_theta4_invariance", inp.clone(), t0, tt, 1e-6, Source::ClosedForm));
        rep.push(Check::rel("spectral.mobius_norm_preserved", inp, n0, nn, 1e-8, Source::Identity));
        inv.push(json!({"t": t, "theta4_residual": num(tt / t0 - 1.0), "norm_residual": num(nn / n0 - 1.0)}));
    }
    rep.data = json!({
        "theta4_sphere": num(theta),
        "values": tr.values.iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "step_sizes": tr.steps.iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "final_coefficients": tr.field.coeffs.iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "invariance": inv,
    });
    Ok(rep)
}

pub fn cmd_asymptotics(case: Case, n: usize, seed: u64, lambdas: &[f64], a0: f64, cutoff: usize) -> Result<Report> {
    if !case.accepts(n) {
        return Err(Error::Invalid(format!("case {case} does not apply to n = {n}")));
    }
    let cfg = json!({"case": case.as_str(), "n": n, "seed": seed, "lambdas": lambdas, "a0": a0, "cutoff_degree": cutoff});
    let mut rep = Report::new("asymptotics", cfg);
    let (fit, checks) = verify::asymptotics_case(case, n, seed, lambdas, a0, cutoff)?;
    rep.extend(checks);
    let ls = |l: &crate::asymptotics::LeastSquares| {
        json!({
            "coefficients": l.coefficients.iter().map(|&v| num(v)).collect::<Vec<_>>(),
            "residual": num(l.residual),
            "condition": num(l.condition),
        })
    };
    rep.data = json!({
        "case": case.as_str(),
        "n": n,
        "convention": fit.convention,
        "basis": fit.basis,
        "lambdas": fit.lambdas,
        "samples": fit.samples.iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "fit": ls(&fit.fit),
        "coefficient": num(fit.coefficient),
        "expected": num(fit.expected),
        "rel_error": num(fit.rel_error),
        "w2": num(fit.w2),
        "a0": num(fit.a0),
        "cutoff_degree": fit.cutoff_degree,
        "geometric_grid": fit.geometric_grid,
        "raw": {
            "basis": fit.raw_basis,
            "samples": fit.raw_samples.iter().map(|&v| num(v)).collect::<Vec<_>>(),
            "fit": fit.raw_fit.as_ref().map(ls),
        },
    });
    Ok(rep)
}

pub fn execute(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::Constants { n } => cmd_constants(&parse_range(n)?),
        Command::Parametrix { n, seed, jet, flat } => {
            let (jet, src) = match (jet, flat) {
                (Some(path), _) => {
                    let j = load_jet(path)?;
                    if let Some(n) = n {
                        if *n != j.n() {
                            return Err(Error::Dimension { expected: *n, got: j.n() });
                        }
                    }
                    (j, json!({"file": path.display().to_string()}))
                }
                (None, true) => {
                    let n = n.ok_or_else(|| Error::Invalid("--flat needs --n".into()))?;
                    (Jet::flat(n), json!("flat"))
                }
                (None, false) => {
                    let n = n.ok_or_else(|| Error::Invalid("parametrix needs --n (or --jet)".into()))?;
                    let seed = seed.unwrap_or(1);
                    if n < 5 {
                        return Err(Error::UnsupportedDimension(n, "parametrix (needs n >= 5)"));
                    }
                    (Jet::random(n, seed), json!({"seed": seed}))
                }
            };
            cmd_parametrix(&jet, src)
        }
        Command::Verify { suite, n, trials, l_max, seed } => {
            cmd_verify(suite, &SuiteParams { n: *n, trials: *trials, l_max: *l_max, seed: *seed })
        }
        Command::Spectral { n, l_max, iters, damping, init } => cmd_spectral(*n, *l_max, *iters, *damping, *init),
        Command::Asymptotics { case, n, seed, lambdas, a0, cutoff_degree } => {
            let case: Case = case.parse().map_err(|e: Error| Error::Invalid(e.to_string()))?;
            let lambdas = lambdas.clone().unwrap_or_else(|| case.default_lambdas());
            cmd_asymptotics(case, *n, *seed, &lambdas, *a0, *cutoff_degree)
        }
    }
}

/// Usage/configuration errors map to exit code 2, everything else to 1.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Dimension { .. } | Error::UnsupportedDimension(..) | Error::Parse(_) | Error::Invalid(_) | Error::Json(_) => 2,
        Error::LogGuard { .. } | Error::Numeric(_) | Error::Io(_) => 1,
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("QCURV_THREADS") {
        let k: usize = v.trim().parse().ok().filter(|&k| k > 0).ok_or_else(|| Error::Invalid(format!("QCURV_THREADS must be a positive integer, got {v:?}")))?;
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    Ok(())
}

pub fn render(rep: &Report, format: Format) -> String {
    match format {
        Format::Json => rep.to_json(),
        Format::Csv => rep.to_csv(),
        Format::Latex => rep.to_latex(),
    }
}

/// Full CLI: parse, run, print or write, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    let start = Instant::now();
    let mut rep = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if cli.timings {
        rep.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    let text = render(&rep, cli.format);
    match &cli.report {
        Some(path) => {
            if let Err(e) = crate::report::write_atomic(path, &text) {
                eprintln!("error: cannot write report {}: {e}", path.display());
                return 2;
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
                return 1;
            }
        }
    }
    let failed: Vec<&Check> = rep.failures().collect();
    eprintln!("{}: {} checks, {} failed", rep.command, rep.checks.len(), failed.len());
    for c in &failed {
        eprintln!("  FAIL {}: expected {}, computed {}", c.id, c.expected, c.computed);
    }
    if rep.pass {
        0
    } else {
        1
    }
}
