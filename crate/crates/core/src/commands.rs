//! The five CLI commands and the artifacts they write.
//!
//! Every artifact carries the config hash: CSV and `.dat` files in a leading
//! `# config_hash: ...` line, JSON files as a top-level `config_hash` field.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{ExperimentConfig, Format};
use crate::continuation::{branch_switch, trace, Branch, Problem};
use crate::error::{exit_code, Error, Result};
use crate::experiments::{theorem1_experiment, theorem2_experiment, Theorem1Config, Theorem2Config};
use crate::nonlinearity::{builtin, hypothesis_check, HypothesisSampling};
use crate::operator::{assemble_restricted_with, assemble_spectral, OperatorKind, OperatorPair};
use crate::spectrum::{convergence_study, isolatedness_certificate, nodal_analysis, solve_spectrum, compare_definitions};
use crate::verify::run_verify;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eigs,
    Bifurcate,
    Verify,
    CompareDefs,
    Convergence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eigs => "eigs",
            Command::Bifurcate => "bifurcate",
            Command::Verify => "verify",
            Command::CompareDefs => "compare-defs",
            Command::Convergence => "convergence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub exit_code: i32,
}

/// Writes artifacts into one directory, each through a temporary file and a rename.
pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    formats: Vec<Format>,
    written: Vec<PathBuf>,
}

fn format_of(name: &str) -> Format {
    match Path::new(name).extension().and_then(|e| e.to_str()) {
        Some("csv") => Format::Csv,
        Some("dat") => Format::Dat,
        _ => Format::Json,
    }
}

impl Artifacts {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.output.directory)?;
        Ok(Self {
            dir: cfg.output.directory.clone(),
            hash: cfg.hash(),
            formats: cfg.output.formats.clone(),
            written: Vec::new(),
        })
    }

    fn write_raw(&mut self, name: &str, body: &[u8]) -> Result<()> {
        if !self.formats.contains(&format_of(name)) {
            return Ok(());
        }
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(body)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &target)?;
        self.written.push(target);
        Ok(())
    }

    /// Text file whose first line is the hash comment.
    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let full = format!("# config_hash: {}\n{body}", self.hash);
        self.write_raw(name, full.as_bytes())
    }

    /// JSON object `{config_hash, <key>: payload}`.
    pub fn json<T: Serialize>(&mut self, name: &str, key: &str, payload: &T) -> Result<()> {
        let mut obj = Map::new();
        obj.insert("config_hash".into(), Value::String(self.hash.clone()));
        obj.insert(key.into(), serde_json::to_value(payload)?);
        let mut text = serde_json::to_string_pretty(&Value::Object(obj))?;
        text.push('\n');
        self.write_raw(name, text.as_bytes())
    }

    pub fn finish(self, exit_code: i32) -> Outcome {
        Outcome { files: self.written, exit_code }
    }
}

/// Builds the operator named by the config on its grid.
pub fn build_pair(cfg: &ExperimentConfig) -> Result<OperatorPair> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    match cfg.operator {
        OperatorKind::Restricted => assemble_restricted_with(&grid, &params, cfg.scheme, cfg.execution),
        OperatorKind::Spectral => assemble_spectral(&grid, &params, grid.len()),
    }
}

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cmd {
        Command::Eigs => run_eigs(cfg),
        Command::Bifurcate => run_bifurcate(cfg),
        Command::Verify => run_verify_cmd(cfg),
        Command::CompareDefs => run_compare_defs(cfg),
        Command::Convergence => run_convergence(cfg),
    }
}

pub fn run_eigs(cfg: &ExperimentConfig) -> Result<Outcome> {
    let pair = build_pair(cfg)?;
    let spectrum = solve_spectrum(&pair, cfg.modes)?;
    let mut out = Artifacts::new(cfg)?;

    let mut csv = String::from("k,lambda\n");
    for (k, lam) in spectrum.eigenvalues().iter().enumerate() {
        writeln!(csv, "{},{lam:.17e}", k + 1).expect("string write");
    }
    out.text("spectrum.csv", &csv)?;

    if cfg.output.eigenvectors {
        let mut csv = String::from("x");
        for k in 1..=spectrum.len() {
            write!(csv, ",phi_{k}").expect("string write");
        }
        csv.push('\n');
        for (i, x) in pair.grid().nodes().iter().enumerate() {
            write!(csv, "{x:.17e}").expect("string write");
            for k in 1..=spectrum.len() {
                write!(csv, ",{:.17e}", spectrum.eigenvector(k)[i]).expect("string write");
            }
            csv.push('\n');
        }
        out.text("eigenvectors.csv", &csv)?;
    }

    let nodal = (1..=spectrum.len())
        .map(|k| nodal_analysis(&spectrum, pair.grid(), k, cfg.s))
        .collect::<Result<Vec<_>>>()?;
    out.json("nodal.json", "nodal", &nodal)?;
    let iso = isolatedness_certificate(&pair, &cfg.refinements)?;
    out.json("isolatedness.json", "isolatedness", &iso)?;

    if cfg.output.dump_operator {
        let a = pair.stiffness();
        let mut csv = String::from("row,col,value\n");
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                writeln!(csv, "{i},{j},{:.17e}", a[(i, j)]).expect("string write");
            }
        }
        out.text("operator.csv", &csv)?;
        let header = serde_json::json!({
            "a": cfg.domain.a,
            "b": cfg.domain.b,
            "N": pair.dim(),
            "s": cfg.s,
            "kind": pair.kind(),
            "C_ns": pair.params().c_ns(),
            "mass": pair.mass_diag().as_slice(),
        });
        out.json("operator.json", "operator", &header)?;
    }
    Ok(out.finish(exit_code::OK))
}

fn branch_csv(branch: &Branch) -> String {
    let mut csv = String::from("arclength,lambda,amplitude,w_norm,negative_inertia\n");
    for p in &branch.points {
        writeln!(
            csv,
            "{:.17e},{:.17e},{:.17e},{:.17e},{}",
            p.arclength, p.lambda, p.amplitude, p.w_norm, p.jacobian_inertia
        )
        .expect("string write");
    }
    csv
}

/// The scan range: the configured one, or `(0, λ_m + 0.1)` with `m = min(5, modes)`.
pub fn scan_range(cfg: &ExperimentConfig, eigenvalues: &[f64]) -> (f64, f64) {
    cfg.lambda_range.unwrap_or_else(|| {
        let m = eigenvalues.len().min(5);
        (0.0, eigenvalues[m - 1] + 0.1)
    })
}

pub fn run_bifurcate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let pair = build_pair(cfg)?;
    let spectrum = solve_spectrum(&pair, cfg.modes)?;
    let range = scan_range(cfg, &spectrum.eigenvalues());
    let mut out = Artifacts::new(cfg)?;
    let term = match builtin(&cfg.term, &pair) {
        Ok(term) => term,
        Err(Error::Hypothesis(reason)) => {
            let report = serde_json::json!({ "term": cfg.term.label(), "pass": false, "reason": reason });
            out.json("hypothesis.json", "hypothesis", &report)?;
            return Ok(out.finish(exit_code::HYPOTHESIS));
        }
        Err(e) => return Err(e),
    };

    let hypothesis = hypothesis_check(&term, &pair, range, &HypothesisSampling::default(), cfg.execution);
    if !hypothesis.pass {
        out.json("hypothesis.json", "hypothesis", &hypothesis)?;
        return Ok(out.finish(exit_code::HYPOTHESIS));
    }

    let problem = Problem::new(&pair, &term, &spectrum).with_exec(cfg.execution);
    let t2 = Theorem2Config { samples: cfg.scan_samples, seed: cfg.seeds.rng_seed, ..Default::default() };
    let theorem2 = theorem2_experiment(&problem, range, &t2)?;
    out.json("events.json", "events", &theorem2.events)?;

    let l1 = spectrum.eigenvalue(1);
    let trace_opts = cfg.continuation.trace_options();
    let mut traced: Vec<(usize, [Branch; 2])> = Vec::new();
    for &k in &cfg.continuation.branches {
        let Some(event) = theorem2.events.iter().find(|e| e.matched.is_some_and(|m| m.k == k)) else {
            continue;
        };
        if k == 1 && range.0 < l1 && l1 < range.1 {
            let t1 = Theorem1Config { amplitude0: cfg.continuation.amplitude0, trace: trace_opts, ..Default::default() };
            let outcome = theorem1_experiment(&problem, &t1)?;
            out.json("theorem1_report.json", "theorem1", &outcome.report)?;
            traced.push((k, outcome.branches));
            continue;
        }
        let half = |a0: f64| branch_switch(&problem, event, a0).and_then(|seed| trace(&problem, &seed, &trace_opts));
        let plus = half(cfg.continuation.amplitude0)?;
        let minus = half(-cfg.continuation.amplitude0)?;
        traced.push((k, [plus, minus]));
    }

    let mut dat = String::from("# lambda amplitude\n# trivial branch\n");
    writeln!(dat, "{:.17e} 0\n{:.17e} 0", range.0, range.1).expect("string write");
    for (k, [plus, minus]) in &traced {
        for (tag, branch) in [("pos", plus), ("neg", minus)] {
            out.text(&format!("branch_{k}_{tag}.csv"), &branch_csv(branch))?;
            writeln!(dat, "\n\n# branch {k} {tag}").expect("string write");
            for p in &branch.points {
                writeln!(dat, "{:.17e} {:.17e}", p.lambda, p.amplitude).expect("string write");
            }
        }
    }
    out.text("diagram.dat", &dat)?;
    out.json("theorem2_report.json", "theorem2", &theorem2)?;
    Ok(out.finish(exit_code::OK))
}

pub fn run_verify_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let report = run_verify(cfg)?;
    let mut out = Artifacts::new(cfg)?;
    out.json("verify.json", "verify", &report)?;
    Ok(out.finish(if report.pass { exit_code::OK } else { exit_code::VERIFICATION }))
}

pub fn run_compare_defs(cfg: &ExperimentConfig) -> Result<Outcome> {
    let cmp = compare_definitions(&cfg.grid()?, &cfg.params()?, cfg.modes)?;
    let mut out = Artifacts::new(cfg)?;
    out.json("compare_defs.json", "comparison", &cmp)?;
    Ok(out.finish(exit_code::OK))
}

pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Outcome> {
    let pair = build_pair(cfg)?;
    let report = convergence_study(&pair, &cfg.refinements)?;
    let mut out = Artifacts::new(cfg)?;
    let mut csv = String::from("n,lambda1\n");
    for (n, l) in &report.levels {
        writeln!(csv, "{n},{l:.17e}").expect("string write");
    }
    out.text("convergence.csv", &csv)?;
    out.json("convergence.json", "convergence", &report)?;
    Ok(out.finish(exit_code::OK))
}
