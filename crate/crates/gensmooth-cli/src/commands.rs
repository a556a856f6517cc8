//! The subcommands, callable without going through the argument parser.

use crate::config::{self, CertifyConfig, Expect, Format, RunConfig, Study};
use crate::output::{self, Envelope};
use crate::suites::{run_suite, Suite, SuiteReport, VerifyConfig};
use crate::{presets, CliError, Status};
use gensmooth::experiments::{
    run_adagrad_divergence, run_convergence_study, run_simple_alg_divergence,
    AdaGradDivergenceReport, RateTable, SimpleDivergenceReport,
};
use gensmooth::numerics::fmt_float;
use gensmooth::objectives::{
    certify_generalized_smooth, certify_poly_bounded, certify_shipped, default_box,
    falsify_poly_bounded_grid, CertReport, Objective, PairSampler,
};
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use std::path::{Path, PathBuf};

/// Result of checking one certification claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimOutcome {
    pub label: String,
    pub expect: Expect,
    /// True when every report passed for an expected pass, or every report
    /// produced a witness for an expected failure.
    pub matched: bool,
    pub reports: Vec<CertReport>,
}

/// Check every claim of a certification config.
pub fn certify_claims(cfg: &CertifyConfig, seed: u64) -> Result<Vec<ClaimOutcome>, CliError> {
    cfg.validate()?;
    cfg.claims
        .iter()
        .enumerate()
        .map(|(i, claim)| {
            let obj = Objective::from_spec(&claim.objective).map_err(CliError::config)?;
            let claim_seed = seed.wrapping_add(i as u64);
            let (lo, hi) = default_box(&obj);
            let mut reports = Vec::new();
            if claim.falsify_grid {
                reports.extend(falsify_poly_bounded_grid(&obj).map_err(CliError::config)?);
            }
            if let Some(s) = claim.smoothness {
                let sampler = PairSampler::local(obj.dim(), lo, hi, s.l1, hi - lo);
                reports.push(
                    certify_generalized_smooth(&obj, s.l0, s.l1, &sampler, cfg.n_pairs, claim_seed)
                        .map_err(CliError::config)?,
                );
            }
            if let Some(p) = claim.poly {
                let sampler = PairSampler::Uniform {
                    dim: obj.dim(),
                    lo,
                    hi,
                    max_dist: hi - lo,
                };
                reports.push(
                    certify_poly_bounded(&obj, p, &sampler, cfg.n_pairs, claim_seed)
                        .map_err(CliError::config)?,
                );
            }
            let label = if claim.falsify_grid {
                format!("{} poly-boundedness grid", obj.name())
            } else if claim.smoothness.is_some() || claim.poly.is_some() {
                format!("{} explicit claim", obj.name())
            } else {
                reports.extend(
                    certify_shipped(&obj, cfg.n_pairs, claim_seed).map_err(CliError::config)?,
                );
                format!("{} shipped certificates", obj.name())
            };
            let matched = match claim.expect {
                Expect::Pass => reports.iter().all(|r| r.pass),
                Expect::Fail => reports.iter().all(|r| !r.pass),
            };
            Ok(ClaimOutcome {
                label: format!("claim {i}: {label}"),
                expect: claim.expect,
                matched,
                reports,
            })
        })
        .collect()
}

/// `gensmooth certify`: exit 0 iff every claim matched its expectation.
pub fn cmd_certify(
    cfg: &CertifyConfig,
    seed_flag: Option<u64>,
    out: Option<&Path>,
) -> Result<Status, CliError> {
    cfg.validate()?;
    let seed = config::resolve_seed(seed_flag, cfg.master_seed)?;
    let outcomes = certify_claims(cfg, seed)?;
    for o in &outcomes {
        eprintln!("{} {}", if o.matched { "ok  " } else { "FAIL" }, o.label);
    }
    let json = output::to_json(&Envelope::new("certify", "certify", seed, &outcomes));
    emit_json(out, "certify.json", &json)?;
    Ok(if outcomes.iter().all(|o| o.matched) {
        Status::Success
    } else {
        Status::Failure
    })
}

/// Result of a study run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum StudyResult {
    Convergence(RateTable),
    SimpleDivergence(SimpleDivergenceReport),
    AdagradDivergence(AdaGradDivergenceReport),
}

/// Run the study of a validated config.
pub fn run_study(cfg: &RunConfig, seed: u64) -> Result<StudyResult, CliError> {
    cfg.validate()?;
    let r = match &cfg.study {
        Study::Convergence(c) => StudyResult::Convergence(
            run_convergence_study(c, seed).map_err(CliError::from_experiment)?,
        ),
        Study::SimpleDivergence(c) => StudyResult::SimpleDivergence(
            run_simple_alg_divergence(c, seed).map_err(CliError::from_experiment)?,
        ),
        Study::AdagradDivergence(c) => StudyResult::AdagradDivergence(
            run_adagrad_divergence(c, seed).map_err(CliError::from_experiment)?,
        ),
    };
    Ok(r)
}

/// The files written for a study result, as `(file name, contents)`.
///
/// `config.json` records the resolved seed so the run can be repeated.
pub fn render(
    cfg: &RunConfig,
    seed: u64,
    result: &StudyResult,
    formats: &[Format],
) -> Vec<(String, String)> {
    let has = |f| formats.contains(&f);
    let mut files = Vec::new();
    let mut resolved = cfg.clone();
    resolved.master_seed = Some(seed);
    resolved.output_dir = None;
    files.push(("config.json".to_string(), output::to_json(&resolved)));
    let json = output::to_json(&Envelope::new("run", &cfg.name, seed, result));
    match result {
        StudyResult::Convergence(t) => {
            if has(Format::Csv) {
                files.push(("rate_table.csv".into(), t.to_csv()));
                files.push(("plot.csv".into(), output::plot_csv(t)));
            }
            if has(Format::Json) {
                files.push(("rate_table.json".into(), json));
            }
            if has(Format::Svg) {
                let pts: Vec<(f64, f64)> = t
                    .rows
                    .iter()
                    .map(|r| (r.horizon as f64, r.quantile.value))
                    .collect();
                let title = format!("{}: slope {:.3}", cfg.name, t.slope());
                let y = format!("{} quantile of min grad norm^2", t.q);
                files.push(("plot.svg".into(), output::svg_loglog(&pts, &title, "T", &y)));
            }
        }
        StudyResult::SimpleDivergence(r) => {
            if has(Format::Csv) {
                files.push((
                    "failure_report.csv".into(),
                    output::failure_csv(&r.failures),
                ));
                files.push(("coupling.csv".into(), output::coupling_csv(&r.coupling)));
            }
            if has(Format::Json) {
                files.push(("failure_report.json".into(), json));
            }
        }
        StudyResult::AdagradDivergence(r) => {
            if has(Format::Csv) {
                files.push((
                    "failure_report.csv".into(),
                    output::failure_csv(std::slice::from_ref(&r.failure)),
                ));
            }
            if has(Format::Json) {
                files.push(("failure_report.json".into(), json));
            }
        }
    }
    files
}

/// Options shared by the `run` command.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

/// Resolve `run`'s argument: a bundled preset name or a path to a config file.
pub fn resolve_target(target: &str) -> Result<RunConfig, CliError> {
    match presets::preset(target) {
        Some(cfg) => Ok(cfg),
        None => {
            let path = Path::new(target);
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "{target:?} is neither a preset ({}) nor an existing file",
                    presets::NAMES.join(", ")
                )));
            }
            config::load(path)
        }
    }
}

/// `gensmooth run`: exit 0 on completion regardless of acceptance.
pub fn cmd_run(cfg: &RunConfig, opts: &RunOptions) -> Result<Status, CliError> {
    cfg.validate()?;
    let seed = config::resolve_seed(opts.seed, cfg.master_seed)?;
    let formats = opts
        .formats
        .clone()
        .or_else(|| cfg.formats.clone())
        .unwrap_or_else(|| vec![Format::Csv, Format::Json]);
    let dir = opts
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("gensmooth-out").join(&cfg.name));
    let result = run_study(cfg, seed)?;
    eprintln!("{}", summary_line(&cfg.name, &result));
    for (file, contents) in render(cfg, seed, &result, &formats) {
        output::write_file(&dir, &file, &contents)?;
        eprintln!("wrote {}", dir.join(&file).display());
    }
    Ok(Status::Success)
}

fn summary_line(name: &str, r: &StudyResult) -> String {
    match r {
        StudyResult::Convergence(t) => format!("{name}: fitted slope {}", t.slope()),
        StudyResult::SimpleDivergence(s) => {
            let mut line = format!("{name}:");
            for f in &s.failures {
                let _ = write!(
                    line,
                    " {} {} (bound {});",
                    f.algorithm, f.empirical.value, f.bound
                );
            }
            let _ = write!(line, " coupling violations {}", s.coupling.total());
            line
        }
        StudyResult::AdagradDivergence(a) => format!(
            "{name}: failure frequency {} (target {}, sigma1 {})",
            a.failure.empirical.value,
            1.0 - a.constants.delta,
            a.constants.sigma1
        ),
    }
}

/// `gensmooth verify`: exit 0 iff every check of the suite passed.
pub fn cmd_verify(
    suite: Suite,
    cfg: &VerifyConfig,
    seed_flag: Option<u64>,
    out: Option<&Path>,
) -> Result<Status, CliError> {
    cfg.validate()?;
    let seed = config::resolve_seed(seed_flag, cfg.master_seed)?;
    let reports = run_suite(suite, cfg, seed)?;
    for r in &reports {
        for c in &r.checks {
            eprintln!(
                "{} [{}] {}: observed {}, limit {}",
                if c.pass { "ok  " } else { "FAIL" },
                r.suite,
                c.name,
                c.observed,
                c.limit
            );
        }
    }
    let json = output::to_json(&Envelope::new("verify", suite.name(), seed, &reports));
    emit_json(out, &format!("verify-{}.json", suite.name()), &json)?;
    Ok(if reports.iter().all(|r| r.pass) {
        Status::Success
    } else {
        Status::Failure
    })
}

fn emit_json(out: Option<&Path>, file: &str, json: &str) -> Result<(), CliError> {
    match out {
        Some(dir) => {
            output::write_file(dir, file, json)?;
            eprintln!("wrote {}", dir.join(file).display());
        }
        None => print!("{json}"),
    }
    Ok(())
}

/// `gensmooth report`: summarize every JSON output in a directory as
/// Markdown, print it, and save it as `report.md` in the same directory.
pub fn cmd_report(dir: &Path) -> Result<Status, CliError> {
    let text = build_report(dir)?;
    print!("{text}");
    output::write_file(dir, "report.md", &text)?;
    Ok(Status::Success)
}

/// The Markdown summary written by `report`.
pub fn build_report(dir: &Path) -> Result<String, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Config(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut out = String::from("# gensmooth report\n");
    let mut found = 0;
    for path in files {
        let text = std::fs::read_to_string(&path)?;
        let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) else {
            continue;
        };
        let Some(command) = v.get("command").and_then(|c| c.as_str()) else {
            continue;
        };
        found += 1;
        let name = v.get("name").and_then(|n| n.as_str()).unwrap_or("?");
        let seed = v.get("seed").and_then(|n| n.as_u64()).unwrap_or(0);
        let file = path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        let _ = writeln!(out, "\n## {command} {name} (seed {seed}, {file})\n");
        report_section(&mut out, command, &v["result"]);
    }
    if found == 0 {
        return Err(CliError::Config(format!(
            "no gensmooth JSON outputs in {}",
            dir.display()
        )));
    }
    Ok(out)
}

fn report_section(out: &mut String, command: &str, result: &serde_json::Value) {
    let num = |v: &serde_json::Value| v.as_f64().map(fmt_float).unwrap_or_else(|| "?".into());
    match command {
        "run" if result.get("rows").is_some() => {
            let _ = writeln!(out, "| T | quantile | SE |\n|---|---|---|");
            for r in result["rows"].as_array().into_iter().flatten() {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} |",
                    num(&r["horizon"]),
                    num(&r["quantile"]["value"]),
                    num(&r["quantile"]["se"])
                );
            }
            let _ = writeln!(out, "\nfitted slope: {}", num(&result["fit"]["slope"]));
        }
        "run" => {
            let failures: Vec<&serde_json::Value> = match result.get("failures") {
                Some(f) => f.as_array().into_iter().flatten().collect(),
                None => vec![&result["failure"]],
            };
            let _ = writeln!(
                out,
                "| algorithm | empirical | SE | bound | pass |\n|---|---|---|---|---|"
            );
            for f in failures {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} |",
                    f["algorithm"].as_str().unwrap_or("?"),
                    num(&f["empirical"]["value"]),
                    num(&f["empirical"]["se"]),
                    num(&f["bound"]),
                    f["pass"]
                );
            }
        }
        "verify" => {
            for s in result.as_array().into_iter().flatten() {
                let checks = s["checks"].as_array().map(Vec::as_slice).unwrap_or(&[]);
                let passed = checks.iter().filter(|c| c["pass"] == true).count();
                let _ = writeln!(
                    out,
                    "- {}: {passed}/{} checks passed",
                    s["suite"].as_str().unwrap_or("?"),
                    checks.len()
                );
                for c in checks.iter().filter(|c| c["pass"] != true) {
                    let _ = writeln!(
                        out,
                        "  - failed: {} (observed {}, limit {})",
                        c["name"].as_str().unwrap_or("?"),
                        num(&c["observed"]),
                        num(&c["limit"])
                    );
                }
            }
        }
        "certify" => {
            for c in result.as_array().into_iter().flatten() {
                let _ = writeln!(
                    out,
                    "- {}: {}",
                    c["label"].as_str().unwrap_or("?"),
                    if c["matched"] == true {
                        "as expected"
                    } else {
                        "MISMATCH"
                    }
                );
            }
        }
        _ => {}
    }
}

/// Suite reports of a verify run, for callers that want the structured result.
pub fn verify_reports(
    suite: Suite,
    cfg: &VerifyConfig,
    seed: u64,
) -> Result<Vec<SuiteReport>, CliError> {
    cfg.validate()?;
    run_suite(suite, cfg, seed)
}
