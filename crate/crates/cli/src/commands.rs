//! Subcommand implementations and exit codes.
//!
//! Exit codes: 0 success (and help), 1 usage, 2 data or library error,
//! 3 numerical non-convergence, 4 failed suite criteria.

use std::ffi::OsString;
use std::path::Path;

use clap::error::ErrorKind;
use clap::Parser;
use roughpath::integration::{integrate_local_oneform, integrate_with_stats, LocalOneForm};
use roughpath::lipschitz::{self, Ball};
use roughpath::manifold::{aligned_distance, consistency_check_with, lift_path, Atlas, LocalRoughPath};
use roughpath::rough::{dp_metric, extend_rough_path, on_common_grid, RefineStats};
use roughpath::signature::signature_with_cap;
use roughpath::variation::p_variation;
use roughpath::{io, OneForm, RoughPath, SampledPath};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::{Cli, Command};
use crate::config::Config;
use crate::plot::{self, Series};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_SUITE_FAILED: u8 = 4;

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Library(roughpath::Error),
    SuiteFailed,
}

impl From<roughpath::Error> for Failure {
    fn from(e: roughpath::Error) -> Self {
        Failure::Library(e)
    }
}

type Outcome<T> = Result<T, Failure>;

pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            EXIT_DATA
        }
        Err(Failure::Library(roughpath::Error::NonConvergence { depth, delta })) => {
            let diag = json!({
                "error": "non_convergence",
                "depth": depth,
                "delta": delta,
                "hint": "raise --max-depth or loosen --tol",
            });
            eprintln!("{diag}");
            EXIT_NUMERICAL
        }
        Err(Failure::Library(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
        Err(Failure::SuiteFailed) => EXIT_SUITE_FAILED,
    }
}

fn execute(cli: &Cli) -> Outcome<()> {
    let cfg = Config::load(cli.config.as_deref())
        .map_err(Failure::Data)?
        .with_overrides(cli.tol, cli.max_depth, cli.degree_max);
    cfg.validate().map_err(Failure::Usage)?;
    let out = |value: &serde_json::Value| emit(cli.out.as_deref(), value);
    let plot_to = |title: &str, xl: &str, yl: &str, series: Vec<Series>| -> Outcome<()> {
        match &cli.plot {
            Some(path) => std::fs::write(path, plot::render(title, xl, yl, &series))
                .map_err(|e| Failure::Data(format!("{}: {e}", path.display()))),
            None => Ok(()),
        }
    };

    match &cli.command {
        Command::Sig { level, from, to, path } => {
            if *level > cfg.tensor_degree_max {
                return Err(Failure::Usage(format!(
                    "level {level} exceeds the degree cap {}",
                    cfg.tensor_degree_max
                )));
            }
            let x = io::load_path_csv(path)?;
            let (s, t) = window(&x, *from, *to);
            let sig = signature_with_cap(&x, *level, s, t, cfg.tensor_degree_max)?;
            plot_to("path trace", trace_x_label(&x), trace_y_label(&x), vec![trace_series("path", &x)])?;
            out(&serde_json::to_value(&sig).map_err(json_err)?)
        }
        Command::Pvar { p, from, to, path } => {
            check_p(*p)?;
            let x = io::load_path_csv(path)?;
            let (s, t) = window(&x, *from, *to);
            let value = p_variation(&x, *p, s, t)?;
            plot_to("path trace", trace_x_label(&x), trace_y_label(&x), vec![trace_series("path", &x)])?;
            out(&json!({ "p": p, "from": s, "to": t, "p_variation": value }))
        }
        Command::Dist { p, a, b } => {
            let x = load_rough(a, *p)?;
            let y = load_rough(b, *p)?;
            if x.p() != y.p() {
                return Err(Failure::Usage(format!("p differs: {} vs {}", x.p(), y.p())));
            }
            let d = aligned_distance(&x, &y)?;
            let (fx, fy) = on_common_grid(x.functional(), y.functional())?;
            let dt = dp_metric(&fx, &fy, x.p())?;
            out(&json!({ "p": x.p(), "d_p": d, "d_tilde_p": dt }))
        }
        Command::Extend { degree, p, input } => {
            if *degree > cfg.tensor_degree_max {
                return Err(Failure::Usage(format!(
                    "degree {degree} exceeds the degree cap {}",
                    cfg.tensor_degree_max
                )));
            }
            let x = load_rough(input, *p)?;
            let (f, stats) = extend_rough_path(&x, *degree, &cfg.refine())?;
            plot_to(
                "refinement convergence",
                "depth",
                "log10 delta",
                vec![convergence_series(&stats)],
            )?;
            out(&json!({
                "functional": f,
                "max_depth": stats.max_depth(),
                "max_delta": stats.max_delta(),
            }))
        }
        Command::Integrate { oneform, local, p, input } => {
            let x = load_rough(input, *p)?;
            let y = match (oneform, local) {
                (Some(spec), None) => {
                    let alpha = parse_oneform(spec, x.dim())?;
                    let (y, stats) = integrate_with_stats(&alpha, &x, &cfg.sew())?;
                    plot_to(
                        "sewing convergence",
                        "depth",
                        "log10 delta",
                        vec![convergence_series(&stats)],
                    )?;
                    y
                }
                (None, Some(file)) => {
                    let local = load_local_oneform(file, x.dim())?;
                    let y = integrate_local_oneform(&local, &x, &cfg.sew())?;
                    let trace = y.trace();
                    plot_to("integral trace", trace_x_label(&trace), trace_y_label(&trace), vec![trace_series("integral", &trace)])?;
                    y
                }
                _ => return Err(Failure::Usage("give exactly one of --oneform and --local".into())),
            };
            out(&serde_json::to_value(&y).map_err(json_err)?)
        }
        Command::Lift { atlas, p, path } => {
            check_p(*p)?;
            let atlas = load_atlas(atlas)?;
            let x = io::load_path_csv(path)?;
            let l = lift_path(&x, &atlas, *p)?;
            let series = l
                .items
                .iter()
                .map(|item| {
                    let tr = item.path.trace();
                    let pts = tr.times().iter().zip(tr.points()).map(|(t, y)| (*t, y[0])).collect();
                    Series::line(format!("chart {}", atlas.chart(item.chart).name()), pts)
                })
                .collect();
            plot_to("chart coordinates", "t", "first coordinate", series)?;
            out(&serde_json::to_value(&l).map_err(json_err)?)
        }
        Command::Check { atlas, within, local } => {
            if !(within.is_finite() && *within >= 0.0) {
                return Err(Failure::Usage(format!("--within must be non-negative, got {within}")));
            }
            let atlas = load_atlas(atlas)?;
            let l: LocalRoughPath = io::load_json(local)?;
            let report = consistency_check_with(&l, &atlas, *within, &cfg.sew())?;
            out(&serde_json::to_value(&report).map_err(json_err)?)
        }
        Command::Suite { only } => {
            let ids: Vec<u32> = if only.is_empty() {
                (1..=roughpath_suite::NAMES.len() as u32).collect()
            } else {
                only.clone()
            };
            if let Some(bad) = ids.iter().find(|&&i| i == 0 || i as usize > roughpath_suite::NAMES.len()) {
                return Err(Failure::Usage(format!("unknown criterion {bad}")));
            }
            let results: Vec<_> = ids
                .iter()
                .map(|&id| {
                    let r = roughpath_suite::run(id, cli.seed);
                    eprintln!("{}", r.line());
                    r
                })
                .collect();
            let failed = results.iter().filter(|r| !r.passed).count();
            let ratios = results
                .iter()
                .map(|r| (r.id as f64, (r.measured.abs() / r.tolerance.max(f64::MIN_POSITIVE)).max(1e-300).log10()))
                .collect();
            plot_to("criteria", "criterion", "log10 measured/tolerance", vec![Series::scatter("ratio", ratios)])?;
            out(&json!({
                "seed": cli.seed,
                "passed": results.len() - failed,
                "failed": failed,
                "results": results,
            }))?;
            if failed > 0 {
                Err(Failure::SuiteFailed)
            } else {
                Ok(())
            }
        }
    }
}

fn emit(path: Option<&Path>, value: &serde_json::Value) -> Outcome<()> {
    let text = serde_json::to_string_pretty(value).map_err(json_err)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| Failure::Data(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn json_err(e: serde_json::Error) -> Failure {
    Failure::Data(e.to_string())
}

fn check_p(p: f64) -> Outcome<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("p must be a finite number >= 1, got {p}")))
    }
}

fn window(x: &SampledPath, from: Option<f64>, to: Option<f64>) -> (f64, f64) {
    let (lo, hi) = x.span();
    (from.unwrap_or(lo), to.unwrap_or(hi))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// A rough path from JSON, or the canonical lift of a CSV path at `p`.
fn load_rough(path: &Path, p: Option<f64>) -> Outcome<RoughPath> {
    if is_csv(path) {
        let p = p.ok_or_else(|| Failure::Usage(format!("{}: CSV input needs -p", path.display())))?;
        check_p(p)?;
        Ok(RoughPath::from_bv_path(&io::load_path_csv(path)?, p)?)
    } else {
        Ok(io::load_json(path)?)
    }
}

fn load_atlas(name: &str) -> Outcome<Atlas> {
    Atlas::by_name(name).map_err(|_| Failure::Usage(format!("unknown atlas {name}")))
}

/// `area`, `grad:JET` or `const:a11,a12,...`.
fn parse_oneform(spec: &str, dim: usize) -> Outcome<OneForm> {
    let (name, params) = spec.split_once(':').unwrap_or((spec, ""));
    match name {
        "area" if dim == 2 => Ok(OneForm::area()),
        "area" => Err(Failure::Usage(format!("the area form needs a planar path, got dimension {dim}"))),
        "grad" => Ok(OneForm::gradient(&lipschitz::by_name(params, dim)?)?),
        "const" => {
            let entries = params
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| Failure::Usage(format!("bad one-form {spec}")))?;
            Ok(OneForm::constant(dim, entries)?)
        }
        _ => Err(Failure::Usage(format!("unknown one-form {spec}"))),
    }
}

#[derive(Deserialize, Serialize)]
struct BallSpec {
    center: Vec<f64>,
    radius: f64,
    oneform: String,
}

fn load_local_oneform(path: &Path, dim: usize) -> Outcome<LocalOneForm> {
    let specs: Vec<BallSpec> = io::load_json(path)?;
    let pieces = specs
        .into_iter()
        .map(|s| Ok((Ball::new(s.center, s.radius)?, parse_oneform(&s.oneform, dim)?)))
        .collect::<Outcome<Vec<_>>>()?;
    Ok(LocalOneForm::new(pieces)?)
}

fn trace_series(label: &str, x: &SampledPath) -> Series {
    let pts = if x.dim() >= 2 {
        x.points().map(|v| (v[0], v[1])).collect()
    } else {
        x.times().iter().zip(x.points()).map(|(t, v)| (*t, v[0])).collect()
    };
    Series::line(label, pts)
}

fn trace_x_label(x: &SampledPath) -> &'static str {
    if x.dim() >= 2 {
        "x1"
    } else {
        "t"
    }
}

fn trace_y_label(x: &SampledPath) -> &'static str {
    if x.dim() >= 2 {
        "x2"
    } else {
        "x1"
    }
}

fn convergence_series(stats: &RefineStats) -> Series {
    let pts = stats
        .raw_deltas
        .iter()
        .enumerate()
        .map(|(k, d)| ((k + 1) as f64, d.max(1e-300).log10()))
        .collect();
    Series::line("raw delta", pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oneform_specs() {
        assert_eq!(parse_oneform("area", 2).unwrap().out_dim(), 1);
        assert!(matches!(parse_oneform("area", 3), Err(Failure::Usage(_))));
        assert_eq!(parse_oneform("grad:norm2", 3).unwrap().dim(), 3);
        assert_eq!(parse_oneform("const:1,0,0,1", 2).unwrap().out_dim(), 2);
        assert!(parse_oneform("const:1,x", 2).is_err());
        assert!(parse_oneform("curl", 2).is_err());
    }

    #[test]
    fn p_validation() {
        assert!(check_p(1.0).is_ok());
        assert!(check_p(0.5).is_err());
        assert!(check_p(f64::NAN).is_err());
    }
}
