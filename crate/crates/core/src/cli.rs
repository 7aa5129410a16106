//! Experiment runner behind the `localiser-lab` binary: JSON configs in,
//! `report.csv` and `certificates.json` out.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::localiser::{
    build_localiser, half_signature_index, localiser_signature, snap_half_integer, thresholds,
    HalfSignatureOptions, AUTO_MARGIN,
};
use crate::models::{block_model, circle_model, edge_guard, fredholm_index_oracle, FredholmWitness};
use crate::pairing::{
    asymptotic_equivalence_report, c_s_constant, commutator_bound_cs, commutator_bound_resolvent,
    default_functions, defect_law, distance_law, weighted_f_commutator_bound, DEFAULT_R,
};
use crate::semifinite::{random_transfer_samples, semifinite_half_signature, trace_transfer_check};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment fallback for `--threads`.
pub const THREADS_ENV: &str = "LOCALISER_LAB_THREADS";
/// Oracle truncations above this size are replaced by a smaller circle model
/// with the same winding.
const ORACLE_MAX_N: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Index,
    Sweep,
    Bounds,
    Semifinite,
    Asymptotic,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Index => "index",
            Command::Sweep => "sweep",
            Command::Bounds => "bounds",
            Command::Semifinite => "semifinite",
            Command::Asymptotic => "asymptotic",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    #[default]
    Empirical,
    Theorem,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windings: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::ConfigInvalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Canonical form: fixed key order, unset fields omitted.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    fn windings(&self, default: &[i64]) -> Vec<i64> {
        self.model.windings.clone().unwrap_or_else(|| default.to_vec())
    }
}

/// One CSV cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

/// A named inequality the exit code depends on.
#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

fn assertion(name: impl Into<String>, lhs: f64, rhs: f64, pass: bool) -> Assertion {
    Assertion {
        name: name.into(),
        lhs,
        rhs,
        pass,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub command: Command,
    pub regime: Regime,
    pub config: ExperimentConfig,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub assertions: Vec<Assertion>,
    pub certificates: Value,
    /// Console lines, including every automatic λ adjustment.
    pub notes: Vec<String>,
    pub error: Option<String>,
    pub elapsed_seconds: f64,
}

impl RunReport {
    fn new(command: Command, regime: Regime, config: &ExperimentConfig, header: Vec<&'static str>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            command,
            regime,
            config: config.clone(),
            header,
            rows: Vec::new(),
            assertions: Vec::new(),
            certificates: Value::Null,
            notes: Vec::new(),
            error: None,
            elapsed_seconds: 0.0,
        }
    }

    pub fn pass(&self) -> bool {
        self.error.is_none() && self.assertions.iter().all(|a| a.pass)
    }

    pub fn csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.csv"), self.csv()?)?;
        let certs = json!({
            "version": self.version,
            "command": self.command,
            "regime": self.regime,
            "config": self.config,
            "assertions": self.assertions,
            "certificates": self.certificates,
            "notes": self.notes,
            "error": self.error,
            "pass": self.pass(),
            "elapsed_seconds": self.elapsed_seconds,
        });
        fs::write(
            dir.join("certificates.json"),
            serde_json::to_string_pretty(&certs).map_err(|e| Error::Io(e.to_string()))?,
        )?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for n in &self.notes {
            let _ = writeln!(s, "{n}");
        }
        let failed: Vec<&Assertion> = self.assertions.iter().filter(|a| !a.pass).collect();
        for a in &failed {
            let _ = writeln!(s, "FAIL {}: {:e} vs {:e}", a.name, a.lhs, a.rhs);
        }
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error: {e}");
        }
        let _ = write!(
            s,
            "{}: {} rows, {}/{} checks passed",
            self.command.name(),
            self.rows.len(),
            self.assertions.len() - failed.len(),
            self.assertions.len()
        );
        s
    }
}

fn oracle(n_max: usize, k: i64) -> Result<FredholmWitness> {
    let n = if n_max <= ORACLE_MAX_N {
        n_max
    } else {
        64 + 4 * k.unsigned_abs() as usize
    };
    fredholm_index_oracle(&circle_model(n, k)?)
}

/// Runs `command` (or the config's own). Numerical failures are recorded in
/// the report's `error` and leave the rows gathered so far.
pub fn run(config: &ExperimentConfig, command: Option<Command>, regime: Option<Regime>) -> Result<RunReport> {
    let command = match (command, config.command) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::ConfigInvalid(format!(
                "config is for `{}`, not `{}`",
                b.name(),
                a.name()
            )))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(Error::ConfigInvalid("no command given".into())),
    };
    let regime = regime.or(config.regime).unwrap_or_default();
    let start = Instant::now();
    let mut report = match command {
        Command::Index => RunReport::new(command, regime, config, INDEX_HEADER.to_vec()),
        Command::Sweep => RunReport::new(command, regime, config, SWEEP_HEADER.to_vec()),
        Command::Bounds => RunReport::new(command, regime, config, BOUNDS_HEADER.to_vec()),
        Command::Semifinite => RunReport::new(command, regime, config, SEMIFINITE_HEADER.to_vec()),
        Command::Asymptotic => RunReport::new(command, regime, config, ASYMPTOTIC_HEADER.to_vec()),
    };
    let outcome = match command {
        Command::Index => run_index(config, regime, &mut report),
        Command::Sweep => run_sweep(config, &mut report),
        Command::Bounds => run_bounds(config, &mut report),
        Command::Semifinite => run_semifinite(config, regime, &mut report),
        Command::Asymptotic => run_asymptotic(config, &mut report),
    };
    match outcome {
        Err(e @ Error::ConfigInvalid(_)) => return Err(e),
        Err(e) => report.error = Some(e.to_string()),
        Ok(()) => {}
    }
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::ConfigInvalid(format!("{name} = {x} must be positive")))
    }
}

const INDEX_HEADER: [&str; 20] = [
    "winding", "n_max", "t", "kappa", "lambda", "lambda_requested", "dim", "bandwidth", "n_pos",
    "n_neg", "signature", "index", "oracle_index", "match", "gap", "edge_guard", "offdiag_lhs",
    "offdiag_bound", "offdiag_pass", "reduction_pass",
];

fn run_index(cfg: &ExperimentConfig, regime: Regime, report: &mut RunReport) -> Result<()> {
    let p = &cfg.params;
    let theorem = regime == Regime::Theorem;
    let (eps, delta) = if theorem { (0.00124, 0.00124) } else { (0.1, 0.1) };
    let eps = positive("eps", p.eps.unwrap_or(eps))?;
    let delta = positive("delta", p.delta.unwrap_or(delta))?;
    let mut certs = Vec::new();
    for k in cfg.windings(&[1]) {
        let th = thresholds(eps, delta, k.abs() as f64, DEFAULT_R)?;
        let t = match (p.t, theorem) {
            (Some(t), _) => positive("t", t)?,
            (None, true) => AUTO_MARGIN * th.t_min.max(1.0),
            (None, false) => 20.0,
        };
        let lambda = match (p.lambda, theorem) {
            (Some(l), _) => positive("lambda", l)?,
            (None, true) => AUTO_MARGIN * t / delta,
            (None, false) => 200.5,
        };
        let default_n = if theorem {
            snap_half_integer(lambda) as usize + k.unsigned_abs() as usize + 1
        } else {
            256
        };
        let n_max = cfg.model.n_max.unwrap_or(default_n);
        let model = circle_model(n_max, k)?;
        let opts = HalfSignatureOptions {
            t: Some(t),
            lambda: Some(lambda),
            certify: theorem,
            skip_certificates: false,
            zero_tol: p.zero_tol,
        };
        let r = half_signature_index(&model, eps, delta, &opts)?;
        if let Some(req) = r.lambda_requested {
            report.notes.push(format!("k = {k}: lambda {req} snapped to {}", r.lambda));
        }
        let w = oracle(n_max, k)?;
        let guard = edge_guard(n_max, r.lambda, k);
        let bandwidth = match r.layout {
            crate::operators::Layout::Banded { bandwidth } => bandwidth,
            crate::operators::Layout::Dense => r.dim.saturating_sub(1),
        };
        let off = r.certificates.offdiagonal.as_ref();
        let red = r.certificates.diagonal_reduction.as_ref();
        report.rows.push(vec![
            k.into(),
            n_max.into(),
            r.t.into(),
            r.kappa.into(),
            r.lambda.into(),
            r.lambda_requested.into(),
            r.dim.into(),
            bandwidth.into(),
            r.signature.n_pos.into(),
            r.signature.n_neg.into(),
            r.signature.sig.into(),
            r.index.into(),
            w.index.into(),
            (r.index == w.index).into(),
            r.signature.gap.into(),
            guard.into(),
            off.map(|c| c.lhs).into(),
            off.map(|c| c.bound).into(),
            off.map(|c| c.pass).into(),
            red.map(|c| c.pass).into(),
        ]);
        report.notes.push(format!(
            "k = {k}: t = {}, lambda = {}, dim = {}, index = {}, oracle = {}",
            r.t, r.lambda, r.dim, r.index, w.index
        ));
        report.assertions.push(assertion(
            format!("k={k}: half-signature equals oracle index"),
            r.index as f64,
            w.index as f64,
            r.index == w.index,
        ));
        if theorem {
            let tf = r.thresholds.t_min;
            report.assertions.push(assertion(format!("k={k}: t > t_min"), r.t, tf, r.t > tf));
            let lf = r.t / delta;
            report.assertions.push(assertion(format!("k={k}: lambda > t/delta"), r.lambda, lf, r.lambda > lf));
            if let Some(c) = off {
                report.assertions.push(assertion(
                    format!("k={k}: offdiagonal lhs <= 1/2 (1 + lambda^2/t^2)^(-1/2)"),
                    c.lhs,
                    c.bound,
                    c.pass,
                ));
            }
            match red {
                Some(c) => {
                    report.assertions.push(assertion(
                        format!("k={k}: p defect <= 2 eps + eps_q"),
                        c.p_defect,
                        c.p_bound,
                        c.p_defect <= c.p_bound + 1e-10,
                    ));
                    report.assertions.push(assertion(
                        format!("k={k}: |m|^2 <= eps + eps_q"),
                        c.m_norm * c.m_norm,
                        c.m_bound,
                        c.m_norm * c.m_norm <= c.m_bound + 1e-10,
                    ));
                    report.assertions.push(assertion(
                        format!("k={k}: reduction path defect < 1/4"),
                        c.path_worst,
                        0.25,
                        c.path_worst < 0.25,
                    ));
                }
                None => report.assertions.push(assertion(
                    format!("k={k}: reduction window eps_q < 1/400 - eps"),
                    f64::NAN,
                    0.0025,
                    false,
                )),
            }
        }
        certs.push(json!({ "winding": k, "half_signature": r, "oracle": w, "edge_guard": guard }));
        report.certificates = Value::Array(certs.clone());
    }
    Ok(())
}

const SWEEP_HEADER: [&str; 11] = [
    "winding", "kappa", "lambda", "dim", "n_pos", "n_neg", "signature", "index", "oracle_index",
    "match", "status",
];

fn run_sweep(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let p = &cfg.params;
    let n_max = cfg.model.n_max.unwrap_or(256);
    let kappas = p
        .kappa_grid
        .clone()
        .unwrap_or_else(|| vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0]);
    let lambdas = p
        .lambda_grid
        .clone()
        .unwrap_or_else(|| vec![10.5, 20.5, 50.5, 100.5, 200.5]);
    for &x in kappas.iter().chain(&lambdas) {
        positive("grid value", x)?;
    }
    let mut region = Vec::new();
    for k in cfg.windings(&[1]) {
        let model = circle_model(n_max, k)?;
        let expected = oracle(n_max, k)?.index;
        let points: Vec<(f64, f64)> = kappas
            .iter()
            .flat_map(|&a| lambdas.iter().map(move |&l| (a, l)))
            .collect();
        let results: Vec<_> = points
            .par_iter()
            .map(|&(kappa, lambda)| {
                let mut loc = build_localiser(&model, kappa, lambda)?;
                let dim = loc.dim();
                Ok((dim, localiser_signature(&mut loc, p.zero_tol)))
            })
            .collect::<Vec<Result<_>>>();
        let mut matches = Vec::with_capacity(points.len());
        for (&(kappa, lambda), res) in points.iter().zip(results) {
            let (dim, sig) = res?;
            let row = match sig {
                Ok(s) if s.sig % 2 == 0 => {
                    let index = s.sig / 2;
                    matches.push(index == expected);
                    vec![
                        s.n_pos.into(),
                        s.n_neg.into(),
                        s.sig.into(),
                        index.into(),
                        expected.into(),
                        (index == expected).into(),
                        "ok".into(),
                    ]
                }
                Ok(s) => {
                    matches.push(false);
                    vec![
                        s.n_pos.into(),
                        s.n_neg.into(),
                        s.sig.into(),
                        Cell::Empty,
                        expected.into(),
                        false.into(),
                        "odd_signature".into(),
                    ]
                }
                Err(Error::SingularMatrix { .. }) => {
                    matches.push(false);
                    vec![Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, expected.into(), false.into(), "singular".into()]
                }
                Err(e) => return Err(e),
            };
            let mut full = vec![k.into(), kappa.into(), lambda.into(), dim.into()];
            full.extend(row);
            report.rows.push(full);
        }
        for (a, &kappa) in kappas.iter().enumerate() {
            let row = &matches[a * lambdas.len()..(a + 1) * lambdas.len()];
            // smallest grid λ from which every larger grid λ matches
            let mut order: Vec<usize> = (0..lambdas.len()).collect();
            order.sort_by(|&i, &j| lambdas[i].total_cmp(&lambdas[j]));
            let mut lambda_min = None;
            for &i in order.iter().rev() {
                if !row[i] {
                    break;
                }
                lambda_min = Some(lambdas[i]);
            }
            region.push(json!({ "winding": k, "kappa": kappa, "lambda_min": lambda_min }));
        }
    }
    report.certificates = json!({ "working_region": region });
    report.notes.push(format!("{} sweep points", report.rows.len()));
    Ok(())
}

const BOUNDS_HEADER: [&str; 7] = ["check", "winding", "t", "s", "lhs", "rhs", "pass"];

fn run_bounds(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let p = &cfg.params;
    let n_max = cfg.model.n_max.unwrap_or(64);
    let ts = p
        .t_grid
        .clone()
        .unwrap_or_else(|| vec![1.0, 2.0, 5.0, 10.0, 100.0, 1000.0]);
    let ss = p.s_grid.clone().unwrap_or_else(|| vec![0.0, 0.25, 0.5, 0.75]);
    let funcs = default_functions();
    let mut jobs = Vec::new();
    for k in cfg.windings(&[1, 2, 3]) {
        for &t in &ts {
            jobs.push((k, t));
        }
    }
    let blocks: Vec<Result<Vec<(String, i64, f64, Option<f64>, f64, f64, bool)>>> = jobs
        .par_iter()
        .map(|&(k, t)| {
            let model = circle_model(n_max, k)?;
            let mut out = Vec::new();
            let cs = commutator_bound_cs(&model, t)?;
            let cs_slack = cs.bound + 1e-12;
            out.push(("commutator_c".into(), k, t, None, cs.lhs_c, cs.bound, cs.lhs_c <= cs_slack));
            out.push(("commutator_s".into(), k, t, None, cs.lhs_s, cs.bound, cs.lhs_s <= cs_slack));
            for &s in &ss {
                if s > 0.0 && s <= 1.0 {
                    let r = commutator_bound_resolvent(&model, t, s)?;
                    out.push(("resolvent".into(), k, t, Some(s), r.lhs, r.bound, r.pass));
                }
                if (0.0..1.0).contains(&s) {
                    let r = weighted_f_commutator_bound(&model, t, s)?;
                    out.push(("weighted_f".into(), k, t, Some(s), r.lhs, r.bound, r.pass));
                }
            }
            let d = defect_law(k, t, funcs)?;
            out.push(("defect_law".into(), k, t, None, d.value, d.bound, d.pass));
            let g = distance_law(k, t, funcs);
            out.push(("distance_law".into(), k, t, None, g.value, g.bound, g.pass));
            Ok(out)
        })
        .collect();
    for b in blocks {
        for (name, k, t, s, lhs, rhs, pass) in b? {
            let label = match s {
                Some(s) => format!("{name} k={k} t={t} s={s}"),
                None => format!("{name} k={k} t={t}"),
            };
            report.assertions.push(assertion(label, lhs, rhs, pass));
            report.rows.push(vec![name.as_str().into(), k.into(), t.into(), s.into(), lhs.into(), rhs.into(), pass.into()]);
        }
    }
    let c0 = c_s_constant(0.0)?;
    let exact = 1.0 + 2.0 * std::f64::consts::PI;
    let ok = (c0 - exact).abs() <= 1e-12;
    report.assertions.push(assertion("C_0 = 1 + 2 pi", c0, exact, ok));
    report.rows.push(vec!["c0_constant".into(), Cell::Empty, Cell::Empty, 0.0.into(), c0.into(), exact.into(), ok.into()]);
    Ok(())
}

const SEMIFINITE_HEADER: [&str; 7] = ["row", "weight", "winding", "value", "expected", "residual", "pass"];

fn run_semifinite(cfg: &ExperimentConfig, regime: Regime, report: &mut RunReport) -> Result<()> {
    let p = &cfg.params;
    let theorem = regime == Regime::Theorem;
    let weights = cfg.model.weights.clone().unwrap_or_else(|| vec![0.5, 0.25]);
    let windings = cfg.windings(&[1, -2]);
    let (eps, delta) = if theorem { (0.00124, 0.00124) } else { (0.1, 0.1) };
    let eps = positive("eps", p.eps.unwrap_or(eps))?;
    let delta = positive("delta", p.delta.unwrap_or(delta))?;
    let t = p.t.unwrap_or(20.0);
    let lambda = p.lambda.unwrap_or(200.5);
    let n_max = cfg.model.n_max.unwrap_or(256);
    let bm = block_model(&weights, &windings, n_max).map_err(|e| match e {
        Error::InvalidWeights(m) => Error::ConfigInvalid(m),
        e => e,
    })?;
    let opts = HalfSignatureOptions {
        t: Some(t),
        lambda: Some(lambda),
        certify: theorem,
        skip_certificates: !theorem,
        zero_tol: p.zero_tol,
    };
    let r = semifinite_half_signature(&bm, eps, delta, &opts)?;
    let mut expected = 0.0;
    for (j, c) in bm.components.iter().enumerate() {
        let w = oracle(n_max, c.winding)?.index;
        expected += c.weight * w as f64;
        let ok = r.per_block[j] == w;
        report.rows.push(vec![
            format!("block {j}").as_str().into(),
            c.weight.into(),
            c.winding.into(),
            (r.per_block[j] as f64).into(),
            (w as f64).into(),
            ((r.per_block[j] - w).abs() as f64).into(),
            ok.into(),
        ]);
        report.assertions.push(assertion(
            format!("block {j}: half-signature equals oracle index"),
            r.per_block[j] as f64,
            w as f64,
            ok,
        ));
    }
    let residual = (r.tau_index - expected).abs();
    let ok = residual <= 1e-9;
    report.rows.push(vec![
        "tau_index".into(),
        Cell::Empty,
        Cell::Empty,
        r.tau_index.into(),
        expected.into(),
        residual.into(),
        ok.into(),
    ]);
    report.assertions.push(assertion("half tau-signature equals weighted oracle", r.tau_index, expected, ok));

    // the transfer rule does not depend on the truncation, so a small one serves
    let small = block_model(&weights, &windings, n_max.min(64))?;
    let samples = random_transfer_samples(&small, p.samples.unwrap_or(10), p.seed.unwrap_or(0));
    let tr = trace_transfer_check(&small, &samples)?;
    for (i, row) in tr.rows.iter().enumerate() {
        report.rows.push(vec![
            format!("transfer {i} {}", row.kind).as_str().into(),
            Cell::Empty,
            Cell::Empty,
            row.direct.into(),
            row.transferred.into(),
            row.residual.into(),
            row.pass.into(),
        ]);
    }
    report.assertions.push(assertion(
        "trace transfer residual <= 1e-12",
        tr.max_residual,
        crate::semifinite::TRANSFER_TOL,
        tr.pass,
    ));
    report.notes.push(format!("tau index {} (weighted oracle {expected})", r.tau_index));
    report.certificates = json!({ "semifinite": r, "transfer": tr });
    Ok(())
}

const ASYMPTOTIC_HEADER: [&str; 5] = ["winding", "t", "d12", "d13", "d23"];

fn run_asymptotic(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let n_max = cfg.model.n_max.unwrap_or(64);
    let ts = cfg.params.t_grid.clone().unwrap_or_else(|| vec![1.0, 10.0, 100.0]);
    let mut certs = Vec::new();
    for k in cfg.windings(&[1]) {
        let model = circle_model(n_max, k)?;
        let r = asymptotic_equivalence_report(&model, &ts)?;
        for row in &r.rows {
            report.rows.push(vec![k.into(), row.t.into(), row.d12.into(), row.d13.into(), row.d23.into()]);
        }
        report.notes.push(format!(
            "k = {k}: d(t_last) < d(t_first) for pairs 12, 13, 23: {:?}",
            r.decreases
        ));
        certs.push(json!({ "winding": k, "report": r }));
    }
    report.certificates = Value::Array(certs);
    Ok(())
}

#[derive(Debug, Parser)]
#[command(name = "localiser-lab", version, about = "Spectral localiser index experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub regime: Option<Regime>,
}

/// Exit code: 0 when every asserted check passes, 1 on failed checks or
/// numerical errors, 2 on an invalid config.
pub fn main_with(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        if n > 0 {
            // a second call in the same process is harmless
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let config = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };
    let report = match run(&config, Some(cli.command), cli.regime) {
        Ok(r) => r,
        Err(e @ Error::ConfigInvalid(_)) => {
            eprintln!("{e}");
            return 2;
        }
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };
    let out = cli
        .out
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = report.write(&out) {
        eprintln!("{e}");
        return 1;
    }
    println!("{}", report.summary());
    if report.pass() {
        0
    } else {
        1
    }
}
