//! Subcommand bodies. Each writes its artifacts under the configured output
//! directory and reports a short summary on stdout; warnings go to stderr.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sesim::pipeline::{simulate_schedule, sweep_gmax, sweep_impact, time_fidelity_tradeoff, GmaxPoint, ImpactSweep, TimeFidelityTradeoff};
use sesim::metrics::ReportSummary;
use sesim::schedule::{amplitude_ratios, compile_controls, ScheduleFile};
use sesim::{ControlSchedule, EnergySign, Error, Result, TargetHamiltonian};

use crate::config::{RunConfig, SweepPlan};

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    Ok(&cfg.out)
}

fn write_json<S: Serialize>(dir: &Path, name: &str, value: &S) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(dir.join(name), e))
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(dir, name)?))
}

fn finish<W: Write>(mut w: csv::Writer<W>, dir: &Path, name: &str) -> Result<()> {
    w.flush().map_err(|e| Error::io(dir.join(name), e))
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Print audit findings as warnings; returns how many there were.
fn warn_audit(schedule: &ControlSchedule<f64>) -> usize {
    let issues = schedule.audit_self();
    if schedule.meta.sign == EnergySign::AsPrinted {
        eprintln!("warning: --sign-as-printed maps energies as ε_max + ΔE/λ, which leaves the ε window");
    }
    if !issues.is_empty() {
        eprintln!("warning: schedule fails its audit with {} issue(s)", issues.len());
        for issue in issues.iter().take(5) {
            eprintln!("warning:   {issue}");
        }
    }
    issues.len()
}

pub fn validate(cfg: &RunConfig) -> Result<()> {
    let ch = cfg.channels()?;
    let tensor = cfg.tensor()?;
    let c = cfg.constraints()?;
    let h = cfg.target(&ch)?;
    h.ensure_valid()?;
    println!("channels: {} ({})", ch.dim(), ch.labels().join(", "));
    println!("R range: [{}, {}] in {}, decoupling residual {:e}", ch.r_min(), ch.r_max(), ch.units().name(), ch.decoupling_residual());
    println!("target: {} nodes on [{}, {}]", h.len(), h.t_start(), h.t_end());
    println!("tensor: {}, alpha = {}, conserves excitations: {}", cfg.tensor, tensor.alpha(), tensor.conserves_excitations(1e-12));
    println!("constraints: g_max {} MHz, eps window [{}, {}] MHz", cfg.constraints.g_max_mhz, cfg.constraints.eps_min_mhz, cfg.constraints.eps_max_mhz);
    c.check()?;
    println!("ok");
    Ok(())
}

fn compile_target(cfg: &RunConfig) -> Result<(TargetHamiltonian<f64>, ControlSchedule<f64>)> {
    let ch = cfg.channels()?;
    let tensor = cfg.tensor()?;
    let h = cfg.target(&ch)?;
    let schedule = compile_controls(&h, &tensor, &cfg.constraints()?, &cfg.compile_options())?;
    Ok((h, schedule))
}

fn write_lambda(dir: &Path, h: &TargetHamiltonian<f64>, s: &ControlSchedule<f64>) -> Result<()> {
    let target = h.to_canonical();
    let c = &s.meta.constraints;
    let mut w = csv_writer(dir, "lambda.csv")?;
    let first = amplitude_ratios(&target.sample(s.times[0])?, c, s.meta.alpha);
    let mut header = vec!["t".to_string(), "lambda".into(), "binding".into()];
    header.extend(first.iter().map(|(b, _)| format!("ratio_{b}")));
    w.write_record(&header)?;
    for k in 0..s.len() {
        let ratios = amplitude_ratios(&target.sample(s.times[k])?, c, s.meta.alpha);
        let mut rec = vec![num(s.times[k]), num(s.lambda[k]), s.binding[k].to_string()];
        rec.extend(ratios.iter().map(|(_, r)| num(*r)));
        w.write_record(&rec)?;
    }
    finish(w, dir, "lambda.csv")
}

fn write_tqc(dir: &Path, s: &ControlSchedule<f64>) -> Result<()> {
    let mut w = csv_writer(dir, "tqc.csv")?;
    w.write_record(["t", "t_qc"])?;
    for (t, tq) in s.times.iter().zip(&s.t_qc) {
        w.write_record([num(*t), num(*tq)])?;
    }
    finish(w, dir, "tqc.csv")
}

fn binding_counts(s: &ControlSchedule<f64>) -> String {
    let mut counts = BTreeMap::new();
    for b in &s.binding {
        *counts.entry(b.to_string()).or_insert(0usize) += 1;
    }
    counts.iter().map(|(k, v)| format!("{k} {v}")).collect::<Vec<_>>().join(", ")
}

pub fn compile(cfg: &RunConfig) -> Result<()> {
    let (h, s) = compile_target(cfg)?;
    let dir = out_dir(cfg)?;
    let mut w = create(dir, "schedule.csv")?;
    s.write_csv(&mut w)?;
    w.flush().map_err(|e| Error::io(dir.join("schedule.csv"), e))?;
    write_json(dir, "schedule.json", &s.to_file())?;
    write_lambda(dir, &h, &s)?;
    write_tqc(dir, &s)?;
    warn_audit(&s);
    println!("compiled {} nodes for n = {}", s.len(), s.dim());
    println!("hardware time: {} ns", s.total_hardware_time());
    println!("binding: {}", binding_counts(&s));
    println!("wrote schedule.csv, schedule.json, lambda.csv, tqc.csv to {}", dir.display());
    Ok(())
}

pub fn load_schedule(path: &Path) -> Result<ControlSchedule<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ScheduleFile = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    ControlSchedule::from_file(&file)
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    n: usize,
    source: usize,
    nodes: usize,
    audit_issues: usize,
    #[serde(flatten)]
    report: &'a ReportSummary,
}

pub fn simulate(cfg: &RunConfig, schedule: Option<&PathBuf>) -> Result<()> {
    let (h, s) = match schedule {
        Some(p) => {
            let h = cfg.target(&cfg.channels()?)?;
            (h, load_schedule(p)?)
        }
        None => compile_target(cfg)?,
    };
    let issues = warn_audit(&s);
    let report = simulate_schedule(&h, &s, &cfg.simulate_options())?;
    let dir = out_dir(cfg)?;
    let mut w = create(dir, "report.csv")?;
    report.write_csv(&mut w, cfg.propagator.report_stride)?;
    w.flush().map_err(|e| Error::io(dir.join("report.csv"), e))?;
    let summary = report.summary();
    write_json(
        dir,
        "report.json",
        &SimulateSummary {
            n: s.dim(),
            source: cfg.source,
            nodes: s.len(),
            audit_issues: issues,
            report: &summary,
        },
    )?;
    println!("final fidelity: {}", summary.final_fidelity);
    println!("final leakage: {:e}", summary.final_leakage);
    println!("hardware time: {} ns", summary.hardware_time_ns);
    println!("wrote report.csv, report.json to {}", dir.display());
    Ok(())
}

#[derive(Serialize)]
struct GmaxOutput<'a> {
    points: &'a [GmaxPoint],
    tradeoff: Option<TimeFidelityTradeoff>,
}

fn run_gmax_sweep(cfg: &RunConfig, plan: &SweepPlan, dir: &Path, workers: usize) -> Result<usize> {
    let ch = cfg.channels()?;
    let h = cfg.target(&ch)?;
    let points = sweep_gmax(&h, &cfg.tensor()?, &cfg.constraints()?, &plan.g_max_mhz, &cfg.simulate_options(), workers)?;
    let mut w = csv_writer(dir, "gmax.csv")?;
    w.write_record(["g_max_mhz", "hardware_time_ns", "final_fidelity", "final_leakage", "status"])?;
    let mut failed = 0;
    for p in &points {
        match &p.outcome {
            Ok(s) => w.write_record([num(p.g_max_mhz), num(s.hardware_time_ns), num(s.final_fidelity), num(s.final_leakage), "ok".into()])?,
            Err(e) => {
                failed += 1;
                eprintln!("warning: g_max = {} MHz failed: {e}", p.g_max_mhz);
                w.write_record([num(p.g_max_mhz), String::new(), String::new(), String::new(), e.clone()])?;
            }
        }
    }
    finish(w, dir, "gmax.csv")?;
    let tf: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.outcome.as_ref().ok().map(|s| (s.hardware_time_ns, s.final_fidelity)))
        .collect();
    let tradeoff = time_fidelity_tradeoff(&tf, 0.999, 0.9999);
    write_json(dir, "gmax.json", &GmaxOutput { points: &points, tradeoff })?;
    for p in &points {
        if let Ok(s) = &p.outcome {
            println!("g_max {} MHz: T = {} ns, F = {}, L = {:e}", p.g_max_mhz, s.hardware_time_ns, s.final_fidelity, s.final_leakage);
        }
    }
    if let Some(t) = tradeoff {
        println!("T(0.9999)/T(0.999) = {:.3} (fit exponent {:.3})", t.fitted_ratio, t.exponent);
    }
    Ok(failed)
}

fn run_impact_sweep(cfg: &RunConfig, plan: &SweepPlan, dir: &Path, workers: usize) -> Result<usize> {
    let ch = cfg.channels()?;
    let n = ch.dim();
    let opts = cfg.impact_options(plan.exact_only);
    let sweep: ImpactSweep = sweep_impact(&ch, &cfg.trajectory()?, &plan.b, &cfg.tensor()?, &cfg.constraints()?, &opts, workers)?;
    let mut w = csv_writer(dir, "impact.csv")?;
    let mut header = vec!["b".to_string()];
    header.extend((1..=n).map(|i| format!("P_exact_{i}")));
    header.extend((1..=n).map(|i| format!("sigma_exact_{i}")));
    if !plan.exact_only {
        header.extend((1..=n).map(|i| format!("P_sim_{i}")));
        header.extend((1..=n).map(|i| format!("sigma_sim_{i}")));
        header.extend(["fidelity".to_string(), "leakage".into()]);
    }
    header.push("status".into());
    w.write_record(&header)?;
    let mut failed = 0;
    let mut k = 0;
    for p in &sweep.points {
        let mut rec = vec![num(p.b)];
        match &p.outcome {
            Ok(f) => {
                rec.extend(f.exact.iter().map(|&x| num(x)));
                rec.extend(sweep.sigma_exact.iter().map(|s| num(s[k])));
                if !plan.exact_only {
                    rec.extend(f.simulated.iter().map(|&x| num(x)));
                    rec.extend(sweep.sigma_simulated.iter().map(|s| num(s[k])));
                    rec.extend([num(f.fidelity), num(f.leakage)]);
                }
                rec.push("ok".into());
                k += 1;
            }
            Err(e) => {
                failed += 1;
                eprintln!("warning: b = {} failed: {e}", p.b);
                rec.resize(header.len() - 1, String::new());
                rec.push(e.clone());
            }
        }
        w.write_record(&rec)?;
    }
    finish(w, dir, "impact.csv")?;
    write_json(dir, "impact.json", &sweep)?;
    if let Some(last) = sweep.b.last() {
        let sigma: Vec<String> = sweep.sigma_exact.iter().map(|s| format!("{:e}", s[s.len() - 1])).collect();
        println!("cross sections up to b = {last}: {}", sigma.join(", "));
    }
    Ok(failed)
}

pub fn sweep(cfg: &RunConfig, plan_path: Option<&PathBuf>, workers: usize) -> Result<()> {
    let plan = match plan_path {
        Some(p) => SweepPlan::load(p)?,
        None => cfg.sweep.clone(),
    };
    if plan.is_empty() {
        return Err(Error::Config("sweep plan lists no g_max values and no impact parameters".into()));
    }
    let dir = out_dir(cfg)?.to_path_buf();
    let mut failed = 0;
    let mut total = 0;
    if !plan.g_max_mhz.is_empty() {
        failed += run_gmax_sweep(cfg, &plan, &dir, workers)?;
        total += plan.g_max_mhz.len();
    }
    if !plan.b.is_empty() {
        failed += run_impact_sweep(cfg, &plan, &dir, workers)?;
        total += plan.b.len();
    }
    println!("{} of {total} sweep points succeeded; outputs in {}", total - failed, dir.display());
    if failed == total {
        return Err(Error::Domain("every sweep point failed".into()));
    }
    Ok(())
}
