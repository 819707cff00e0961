//! Subcommand drivers. Each run writes into a staging directory that is
//! renamed into place only when everything succeeded.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use fecap_core::analysis::{build_tau_map, correlate_tau_polarization, fit_exponential, RetentionFit};
use fecap_core::energy::{landscape_curve, linear_grid, well_summary, LandscapePreset};
use fecap_core::instrument::{run_endurance, run_kinetics, run_pund, run_retention, PulseSpec, RetentionConfig};
use fecap_core::kinetics::TraceRecord;

use crate::config::{serialize_config, OutputFormat, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Landscape,
    Pund,
    Kinetics,
    Retention,
    Endurance,
    Sweep,
    Fit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Landscape => "landscape",
            Command::Pund => "pund",
            Command::Kinetics => "kinetics",
            Command::Retention => "retention",
            Command::Endurance => "endurance",
            Command::Sweep => "sweep",
            Command::Fit => "fit",
        }
    }
}

/// Polarization unit of an external retention CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolUnit {
    CPerM2,
    UcPerCm2,
}

#[derive(Debug, Clone)]
pub struct FitInput {
    pub path: PathBuf,
    /// Needed only when the polarization column is named plainly `P`.
    pub unit: Option<PolUnit>,
}

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub command: Command,
    pub config: RunConfig,
    pub out: PathBuf,
    pub force: bool,
    pub fit_input: Option<FitInput>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunError {
    /// Bad configuration, flags or input files.
    Config(String),
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Numerical(_) => 2,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "error: {m}"),
            RunError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<fecap_core::Error> for RunError {
    fn from(e: fecap_core::Error) -> Self {
        use fecap_core::Error as E;
        match e {
            E::Numerical(_) | E::StepUnderflow { .. } => RunError::Numerical(e.to_string()),
            _ => RunError::Config(e.to_string()),
        }
    }
}

fn io(context: &Path, e: impl fmt::Display) -> RunError {
    RunError::Config(format!("{}: {e}", context.display()))
}

/// Output of a finished run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub directory: PathBuf,
    /// Relative names of the written files, manifest last.
    pub files: Vec<String>,
    /// Non-fatal diagnostics from the protocols.
    pub warnings: Vec<String>,
}

fn fmt_f(v: f64) -> String {
    format!("{v:e}")
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Sink {
    dir: PathBuf,
    csv: bool,
    jsonl: bool,
    files: Vec<String>,
    summary: Vec<Map<String, Value>>,
    base: Map<String, Value>,
    warnings: Vec<String>,
}

impl Sink {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), RunError> {
        if !self.csv {
            return Ok(());
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let path = self.dir.join(name);
        w.write_record(header).map_err(|e| io(&path, e))?;
        for r in rows {
            w.write_record(&r).map_err(|e| io(&path, e))?;
        }
        let bytes = w.into_inner().map_err(|e| io(&path, e))?;
        self.write(name, &bytes)
    }

    fn row(&mut self, fields: Value) {
        let mut m = self.base.clone();
        if let Value::Object(extra) = fields {
            m.extend(extra);
        }
        self.summary.push(m);
    }

    fn finish(mut self, config_text: &str, seed: u64, command: Command) -> Result<RunReport, RunError> {
        if self.jsonl && !self.summary.is_empty() {
            let mut text = String::new();
            for row in &self.summary {
                text.push_str(&serde_json::to_string(row).map_err(|e| RunError::Config(e.to_string()))?);
                text.push('\n');
            }
            self.write("summary.jsonl", text.as_bytes())?;
        }
        self.write("config.txt", config_text.as_bytes())?;
        let mut files = Vec::new();
        for name in &self.files {
            let path = self.dir.join(name);
            let bytes = fs::read(&path).map_err(|e| io(&path, e))?;
            files.push(json!({ "name": name, "sha256": sha256_hex(&bytes), "bytes": bytes.len() }));
        }
        let manifest = json!({
            "tool": "fecap",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": command.name(),
            "seed": seed,
            "config_sha256": sha256_hex(config_text.as_bytes()),
            "files": files,
        });
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Config(e.to_string()))?;
        self.write("manifest.json", format!("{text}\n").as_bytes())?;
        Ok(RunReport { directory: self.dir, files: self.files, warnings: self.warnings })
    }
}

fn trace_csv(sink: &mut Sink, name: &str, rec: &TraceRecord) -> Result<(), RunError> {
    let header: Vec<String> = TraceRecord::COLUMNS.iter().map(|s| s.to_string()).collect();
    let rows = (0..rec.len()).map(|k| rec.row(k).iter().map(|v| fmt_f(*v)).collect());
    sink.csv(name, &header, rows)
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn fit_json(fit: &RetentionFit) -> Value {
    json!({
        "p0_C_per_m2": fit.p0,
        "p_inf_C_per_m2": fit.p_inf,
        "tau_s": fit.tau,
        "rmse_C_per_m2": fit.rmse,
        "n_iter": fit.n_iter,
        "converged": fit.converged,
        "identifiable": fit.identifiable,
    })
}

fn landscape(cfg: &RunConfig, sink: &mut Sink) -> Result<(), RunError> {
    let grid = linear_grid(-cfg.landscape.d_max, cfg.landscape.d_max, cfg.landscape.n_points);
    for preset in LandscapePreset::ALL {
        let stack = preset.stack();
        let curve = landscape_curve(&stack, 0.0, preset.e_bias(), &grid);
        sink.csv(
            &format!("landscape_{}.csv", preset.name()),
            &header(&["D_C_per_m2", "F_J_per_m3"]),
            curve.iter().map(|(d, f)| vec![fmt_f(*d), fmt_f(*f)]),
        )?;
        let mut row = json!({ "preset": preset.name(), "e_bias_V_per_m": preset.e_bias() });
        if let Some(w) = well_summary(&stack, 0.0, preset.e_bias())? {
            row.as_object_mut().unwrap().extend(
                json!({
                    "d_up_C_per_m2": w.d_up,
                    "d_down_C_per_m2": w.d_down,
                    "f_up_J_per_m3": w.f_up,
                    "f_down_J_per_m3": w.f_down,
                    "barrier_up_to_down_J_per_m3": w.barrier_up_to_down,
                    "barrier_down_to_up_J_per_m3": w.barrier_down_to_up,
                })
                .as_object()
                .unwrap()
                .clone(),
            );
        }
        sink.row(row);
    }
    Ok(())
}

fn pund(cfg: &RunConfig, sink: &mut Sink) -> Result<(), RunError> {
    let model = cfg.device_model();
    let r = run_pund(&model, &cfg.pund, &cfg.sim_options())?;
    trace_csv(sink, "trace.csv", &r.trace)?;
    sink.csv(
        "loop.csv",
        &header(&["V_V", "P_C_per_m2"]),
        r.loop_.v.iter().zip(&r.loop_.p).map(|(v, p)| vec![fmt_f(*v), fmt_f(*p)]),
    )?;
    sink.row(json!({
        "two_pr_C_per_m2": r.loop_.two_pr(),
        "pr_pos_C_per_m2": r.loop_.pr_pos,
        "pr_neg_C_per_m2": r.loop_.pr_neg,
        "peak_v_pos_V": r.loop_.peak_v_pos,
        "peak_v_neg_V": r.loop_.peak_v_neg,
        "internal_two_pr_C_per_m2": r.internal_two_pr,
        "loop_area_J_per_m3": r.loop_.area(),
    }));
    Ok(())
}

fn kinetics(cfg: &RunConfig, sink: &mut Sink) -> Result<(), RunError> {
    let k = run_kinetics(&cfg.device_model(), &cfg.kinetics_config(), &cfg.sim_options())?;
    let mut rows = Vec::new();
    for (a, amp) in k.amplitudes.iter().enumerate() {
        for (w, width) in k.widths.iter().enumerate() {
            rows.push(vec![fmt_f(*amp), fmt_f(*width), fmt_f(k.switched[a][w])]);
        }
    }
    sink.csv("kinetics.csv", &header(&["amplitude_V", "width_s", "switched_fraction"]), rows)?;
    for (a, amp) in k.amplitudes.iter().enumerate() {
        sink.row(json!({ "amplitude_V": amp, "w50_s": k.width_at(a, 0.5) }));
    }
    sink.warnings.extend(k.warnings);
    Ok(())
}

fn retention_rows(r: &fecap_core::instrument::RetentionResult, fit: &RetentionFit) -> Vec<Vec<String>> {
    r.points
        .iter()
        .map(|p| vec![fmt_f(p.delay), fmt_f(p.p), fmt_f(p.outcome.before_read), fmt_f(fit.eval(p.delay))])
        .collect()
}

fn retention(cfg: &RunConfig, sink: &mut Sink) -> Result<(), RunError> {
    let r = run_retention(&cfg.device_model(), &cfg.retention_config(), &cfg.sim_options())?;
    let fit = fit_exponential(&r.samples())?;
    sink.csv(
        "retention.csv",
        &header(&["delay_s", "P_C_per_m2", "P_internal_C_per_m2", "P_fit_C_per_m2"]),
        retention_rows(&r, &fit),
    )?;
    let first = &r.points[0].outcome;
    let mut row = fit_json(&fit);
    row.as_object_mut().unwrap().extend(
        json!({
            "program_amplitude_V": cfg.program.amplitude,
            "program_width_s": cfg.program.width,
            "programmed_C_per_m2": first.programmed,
            "stable_C_per_m2": first.stable,
            "warnings": r.warnings.len(),
        })
        .as_object()
        .unwrap()
        .clone(),
    );
    sink.row(row);
    sink.warnings.extend(r.warnings);
    Ok(())
}

fn endurance(cfg: &RunConfig, sink: &mut Sink) -> Result<(), RunError> {
    let pts = run_endurance(&cfg.device_model(), &cfg.endurance_config(), &cfg.sim_options())?;
    sink.csv(
        "endurance.csv",
        &header(&["cycles", "pr_pos_C_per_m2", "pr_neg_C_per_m2", "two_pr_C_per_m2", "peak_v_pos_V", "peak_v_neg_V"]),
        pts.iter().map(|p| {
            vec![
                p.cycles.to_string(),
                fmt_f(p.pr_pos),
                fmt_f(p.pr_neg),
                fmt_f(p.two_pr),
                fmt_f(p.peak_v_pos),
                fmt_f(p.peak_v_neg),
            ]
        }),
    )?;
    for p in &pts {
        sink.row(json!({
            "cycles": p.cycles,
            "two_pr_C_per_m2": p.two_pr,
            "peak_v_pos_V": p.peak_v_pos,
            "peak_v_neg_V": p.peak_v_neg,
        }));
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, sink: &mut Sink) -> Result<(), RunError> {
    let model = cfg.device_model();
    let opts = cfg.sim_options();
    let (widths, amps) = (&cfg.sweep.widths, &cfg.sweep.amplitudes);
    let cells: Vec<(usize, usize)> = (0..widths.len()).flat_map(|w| (0..amps.len()).map(move |a| (w, a))).collect();
    let fits: Vec<(RetentionFit, Vec<String>)> = cells
        .par_iter()
        .map(|&(w, a)| {
            let rc = RetentionConfig {
                program: PulseSpec { amplitude: amps[a], width: widths[w] },
                ..cfg.retention_config()
            };
            let r = run_retention(&model, &rc, &opts)?;
            let fit = fit_exponential(&r.samples())?;
            Ok((fit, r.warnings))
        })
        .collect::<fecap_core::Result<_>>()?;
    let grid: Vec<Vec<RetentionFit>> =
        (0..widths.len()).map(|w| (0..amps.len()).map(|a| fits[w * amps.len() + a].0).collect()).collect();
    let map = build_tau_map(widths, amps, &grid)?;
    let mut cols = vec!["width_s".to_string()];
    cols.extend(amps.iter().map(|a| format!("tau_s_at_{a}V")));
    sink.csv(
        "taumap.csv",
        &cols,
        (0..widths.len()).map(|w| {
            let mut r = vec![fmt_f(widths[w])];
            r.extend(map.tau[w].iter().map(|t| fmt_f(*t)));
            r
        }),
    )?;
    let points = correlate_tau_polarization(&map);
    sink.csv(
        "taumap_points.csv",
        &header(&["width_s", "amplitude_V", "p_init_C_per_m2", "tau_s"]),
        points.iter().map(|p| vec![fmt_f(p.width), fmt_f(p.amplitude), fmt_f(p.p_init), fmt_f(p.tau)]),
    )?;
    for (k, p) in points.iter().enumerate() {
        let f = &fits[k].0;
        sink.row(json!({
            "width_s": p.width,
            "amplitude_V": p.amplitude,
            "p_init_C_per_m2": p.p_init,
            "tau_s": p.tau,
            "rmse_C_per_m2": f.rmse,
        }));
    }
    for (_, w) in fits {
        sink.warnings.extend(w);
    }
    Ok(())
}

/// Reads `t_s` and a polarization column from an external CSV; returns C/m².
pub fn read_retention_csv(path: &Path, unit: Option<PolUnit>) -> Result<Vec<(f64, f64)>, RunError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| io(path, e))?;
    let headers = rdr.headers().map_err(|e| io(path, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let t_col = find("t_s").ok_or_else(|| RunError::Config(format!("{}: missing column t_s", path.display())))?;
    let (p_col, scale) = match (find("P_C_per_m2"), find("P_uC_per_cm2"), find("P"), unit) {
        (Some(c), None, _, None | Some(PolUnit::CPerM2)) => (c, 1.0),
        (None, Some(c), _, None | Some(PolUnit::UcPerCm2)) => (c, 1e-2),
        (None, None, Some(c), Some(u)) => (c, if u == PolUnit::CPerM2 { 1.0 } else { 1e-2 }),
        (None, None, Some(_), None) => {
            return Err(RunError::Config(format!("{}: column P needs --units", path.display())))
        }
        (Some(_), Some(_), _, _) => {
            return Err(RunError::Config(format!("{}: both P_C_per_m2 and P_uC_per_cm2 present", path.display())))
        }
        (Some(_), None, _, Some(_)) | (None, Some(_), _, Some(_)) => {
            return Err(RunError::Config(format!("{}: --units contradicts the column name", path.display())))
        }
        (None, None, None, _) => {
            return Err(RunError::Config(format!(
                "{}: need a P_C_per_m2, P_uC_per_cm2 or P column",
                path.display()
            )))
        }
    };
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| io(path, e))?;
        let num = |c: usize| -> Result<f64, RunError> {
            rec.get(c)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| RunError::Config(format!("{}: row {}: not a number", path.display(), k + 2)))
        };
        out.push((num(t_col)?, num(p_col)? * scale));
    }
    Ok(out)
}

fn fit(input: &FitInput, sink: &mut Sink) -> Result<(), RunError> {
    let samples = read_retention_csv(&input.path, input.unit)?;
    let fit = fit_exponential(&samples)?;
    let mut v = fit_json(&fit);
    v.as_object_mut().unwrap().insert("n_samples".into(), json!(samples.len()));
    let text = serde_json::to_string_pretty(&v).map_err(|e| RunError::Config(e.to_string()))?;
    sink.write("fit.json", format!("{text}\n").as_bytes())?;
    sink.row(v);
    Ok(())
}

fn staging_dir(out: &Path) -> Result<PathBuf, RunError> {
    let name = out
        .file_name()
        .ok_or_else(|| RunError::Config(format!("{}: not a usable output directory", out.display())))?
        .to_string_lossy()
        .into_owned();
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    Ok(parent.join(format!(".{name}.partial-{}", std::process::id())))
}

/// Runs one subcommand into `req.out`.
pub fn execute(req: &RunRequest) -> Result<RunReport, RunError> {
    req.config.validate().map_err(|e| RunError::Config(e.to_string()))?;
    if req.command == Command::Fit && req.fit_input.is_none() {
        return Err(RunError::Config("fit needs an input CSV".into()));
    }
    if req.out.exists() && !req.force {
        return Err(RunError::Config(format!("{} already exists (use --force to replace it)", req.out.display())));
    }
    if let Some(parent) = req.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
    }
    let stage = staging_dir(&req.out)?;
    if stage.exists() {
        fs::remove_dir_all(&stage).map_err(|e| io(&stage, e))?;
    }
    fs::create_dir(&stage).map_err(|e| io(&stage, e))?;

    let config_text = serialize_config(&req.config);
    let mut base = Map::new();
    base.insert("protocol".into(), json!(req.command.name()));
    base.insert("seed".into(), json!(req.config.seed));
    base.insert("config_sha256".into(), json!(sha256_hex(config_text.as_bytes())));
    let mut sink = Sink {
        dir: stage.clone(),
        csv: req.config.wants(OutputFormat::Csv),
        jsonl: req.config.wants(OutputFormat::Jsonl),
        files: Vec::new(),
        summary: Vec::new(),
        base,
        warnings: Vec::new(),
    };
    let result = (|| {
        match req.command {
            Command::Landscape => landscape(&req.config, &mut sink)?,
            Command::Pund => pund(&req.config, &mut sink)?,
            Command::Kinetics => kinetics(&req.config, &mut sink)?,
            Command::Retention => retention(&req.config, &mut sink)?,
            Command::Endurance => endurance(&req.config, &mut sink)?,
            Command::Sweep => sweep(&req.config, &mut sink)?,
            Command::Fit => fit(req.fit_input.as_ref().unwrap(), &mut sink)?,
        }
        let report = sink.finish(&config_text, req.config.seed, req.command)?;
        if req.out.exists() {
            fs::remove_dir_all(&req.out).map_err(|e| io(&req.out, e))?;
        }
        fs::rename(&stage, &req.out).map_err(|e| io(&req.out, e))?;
        Ok(RunReport { directory: req.out.clone(), ..report })
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&stage);
    }
    result
}
