//! Config-driven experiment harness: a fixed registry of named experiments,
//! each producing a deterministic CSV table plus pass/fail assertions.
//!
//! Determinism contract: identical config (including seed) produces
//! byte-identical CSV bodies.  All reductions run in a fixed order and all
//! randomness flows from the seeded generator; the JSON summary is the only
//! artifact allowed to vary (runtimes).

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CordesError, Result};
use crate::grid::{fourier, inverse_fourier, test_function, Grid, TestFunction};
use crate::heisenberg::{conjugate, covariance_residual};
use crate::module_space::{embed_scalar, module_norm, FiberSet, ModuleVec};
use crate::quantize::{
    apply, cv_bound_report, direct_apply_oracle, op_norm, quantize, ModuleOp,
};
use crate::recover::{reconstruct_from_b, roundtrip_report, RecoveryParams};
use crate::rieffel::{
    commensurate_box, commutant_residual, conjecture_demo, default_g_list, make_lf, SkewMatrix,
    COMMUTANT_THRESHOLD,
};
use crate::symbols::{sample_family, smoothing_image, Profile, SymbolFamily};
use ndarray::{Array1, Array2};

pub const DEFAULT_SEED: u64 = 42;

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridConfig {
    pub n: usize,
    pub per_axis: usize,
    pub half_width: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.n, self.per_axis, self.half_width)
    }
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// One experiment run, fully described.  Unknown fields are rejected so a
/// typo cannot silently fall back to a default.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fibers: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<SymbolFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery: Option<RecoveryParams>,
    /// trig frequencies for cv-bound
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    /// per-axis grid sizes for commutant / convergence sequences
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nper_sequence: Option<Vec<usize>>,
    /// quadrature sizes for the convergence study
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_sequence: Option<Vec<usize>>,
    /// recovery points as (z, zeta) pairs
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<(Vec<f64>, Vec<f64>)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn minimal(experiment: &str) -> Self {
        ExperimentConfig {
            experiment: experiment.into(),
            seed: DEFAULT_SEED,
            grid: None,
            fibers: None,
            family: None,
            profile: None,
            recovery: None,
            theta: None,
            nper_sequence: None,
            q_sequence: None,
            points: None,
            out_dir: None,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
            CordesError::Config {
                field: "<document>".into(),
                message: e.to_string(),
            }
        })?;
        Ok(cfg)
    }

    /// Schema-level validation; every violation names the offending field.
    pub fn validate(&self) -> Result<()> {
        if !EXPERIMENTS.iter().any(|e| e.name == self.experiment) {
            return Err(CordesError::Config {
                field: "experiment".into(),
                message: format!(
                    "unknown experiment `{}`; valid names: {}",
                    self.experiment,
                    EXPERIMENTS
                        .iter()
                        .map(|e| e.name)
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            });
        }
        if let Some(g) = &self.grid {
            if g.n != 1 && g.n != 2 {
                return Err(CordesError::Config {
                    field: "grid.n".into(),
                    message: format!("dimension must be 1 or 2, got {}", g.n),
                });
            }
            if g.per_axis % 2 != 0 {
                return Err(CordesError::Config {
                    field: "grid.per_axis".into(),
                    message: format!("per-axis size must be even, got {}", g.per_axis),
                });
            }
            if g.per_axis < 4 {
                return Err(CordesError::Config {
                    field: "grid.per_axis".into(),
                    message: format!("per-axis size must be at least 4, got {}", g.per_axis),
                });
            }
            if !(g.half_width > 0.0) {
                return Err(CordesError::Config {
                    field: "grid.half_width".into(),
                    message: "box half-width must be positive".into(),
                });
            }
        }
        if let Some(theta) = &self.theta {
            if theta.is_empty() || theta.iter().any(|t| !(*t > 0.0)) {
                return Err(CordesError::Config {
                    field: "theta".into(),
                    message: "frequencies must be a nonempty list of positive values".into(),
                });
            }
        }
        for (field, seq) in [
            ("nper_sequence", &self.nper_sequence),
            ("q_sequence", &self.q_sequence),
        ] {
            if let Some(s) = seq {
                if s.len() < 2 || s.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(CordesError::Config {
                        field: field.into(),
                        message: "must be a strictly increasing list of at least 2 sizes".into(),
                    });
                }
                if field == "nper_sequence" && s.iter().any(|v| v % 2 != 0) {
                    return Err(CordesError::Config {
                        field: field.into(),
                        message: "per-axis sizes must be even".into(),
                    });
                }
            }
        }
        if let Some(r) = &self.recovery {
            r.validate()?;
        }
        Ok(())
    }

    /// Hash of the canonical serialized config; identifies a run.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// JSON schema for the config document, served by `cordes schema`.
pub fn config_schema() -> serde_json::Value {
    serde_json::json!({
        "$schema": "http://json-schema.org/draft-07/schema#",
        "title": "ExperimentConfig",
        "type": "object",
        "required": ["experiment"],
        "additionalProperties": false,
        "properties": {
            "experiment": {
                "type": "string",
                "enum": EXPERIMENTS.iter().map(|e| e.name).collect::<Vec<_>>(),
            },
            "seed": {"type": "integer", "minimum": 0, "default": DEFAULT_SEED},
            "grid": {
                "type": "object",
                "required": ["n", "per_axis", "half_width"],
                "properties": {
                    "n": {"type": "integer", "enum": [1, 2]},
                    "per_axis": {"type": "integer", "multipleOf": 2, "minimum": 4},
                    "half_width": {"type": "number", "exclusiveMinimum": 0},
                },
            },
            "fibers": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            "family": {"type": "object", "description": "symbol family spec (tagged by `family`)"},
            "profile": {"type": "object", "description": "scalar profile spec (tagged by `profile`)"},
            "recovery": {
                "type": "object",
                "required": ["t", "w", "qx", "qxi", "qeta", "half_step", "delta"],
                "properties": {
                    "t": {"type": "number"}, "w": {"type": "number"},
                    "qx": {"type": "integer"}, "qxi": {"type": "integer"},
                    "qeta": {"type": "integer"},
                    "half_step": {"type": "boolean", "const": true},
                    "delta": {"type": "number"},
                },
            },
            "theta": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            "nper_sequence": {"type": "array", "items": {"type": "integer"}, "minItems": 2},
            "q_sequence": {"type": "array", "items": {"type": "integer"}, "minItems": 2},
            "points": {"type": "array", "items": {
                "type": "array", "minItems": 2, "maxItems": 2,
                "items": {"type": "array", "items": {"type": "number"}},
            }},
            "out_dir": {"type": "string"},
        },
    })
}

// ---------------------------------------------------------------------------
// registry

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub config_keys: &'static str,
    pub expected_runtime: &'static str,
}

pub const EXPERIMENTS: [ExperimentInfo; 10] = [
    ExperimentInfo {
        name: "ft-selftest",
        description: "Fourier round trip, Parseval, Gaussian self-transform",
        config_keys: "grid?",
        expected_runtime: "< 1 s",
    },
    ExperimentInfo {
        name: "quantize-check",
        description: "closed-form quantization actions and the FFT-vs-quadrature oracle",
        config_keys: "grid?",
        expected_runtime: "< 10 s",
    },
    ExperimentInfo {
        name: "covariance",
        description: "Heisenberg covariance at aligned shifts plus the group property",
        config_keys: "grid?, family?",
        expected_runtime: "< 30 s",
    },
    ExperimentInfo {
        name: "reconstruct-identity",
        description: "direct reconstruction of constant and Gaussian symbols with a step-halving check",
        config_keys: "recovery?, points?",
        expected_runtime: "< 2 min",
    },
    ExperimentInfo {
        name: "roundtrip",
        description: "recover(quantize(a)) against a for Gaussian and trig symbols, 1 and 3 fibers",
        config_keys: "grid?, recovery?, points?",
        expected_runtime: "< 5 min",
    },
    ExperimentInfo {
        name: "cv-bound",
        description: "operator-norm to seminorm ratios for resonant trig symbols",
        config_keys: "theta?, grid?",
        expected_runtime: "< 1 min",
    },
    ExperimentInfo {
        name: "fibers",
        description: "fiberwise norm identity, dense-reference equivalence, zero-fiber preservation",
        config_keys: "seed?",
        expected_runtime: "< 30 s",
    },
    ExperimentInfo {
        name: "commutant",
        description: "left-shear against the right-shear family on a grid sequence plus a negative control",
        config_keys: "nper_sequence?, profile?",
        expected_runtime: "< 2 min",
    },
    ExperimentInfo {
        name: "conjecture-demo",
        description: "smoothness probe, commutant membership, and symbol recovery for one L_F",
        config_keys: "grid?, profile?, recovery?, points?",
        expected_runtime: "< 10 min",
    },
    ExperimentInfo {
        name: "convergence",
        description: "reconstruction error under quadrature refinement",
        config_keys: "q_sequence?",
        expected_runtime: "< 2 min",
    },
];

// ---------------------------------------------------------------------------
// outcomes

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Assertion {
    /// value must be at most tolerance
    fn le(name: &str, value: f64, tolerance: f64) -> Self {
        Assertion {
            name: name.into(),
            value,
            tolerance,
            pass: value.is_finite() && value <= tolerance,
        }
    }

    /// value must be at least tolerance
    fn ge(name: &str, value: f64, tolerance: f64) -> Self {
        Assertion {
            name: name.into(),
            value,
            tolerance,
            pass: value.is_finite() && value >= tolerance,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub experiment: String,
    pub csv_header: String,
    pub csv_rows: Vec<String>,
    pub assertions: Vec<Assertion>,
}

impl Outcome {
    pub fn all_pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    pub fn csv_body(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.csv_header);
        s.push('\n');
        for row in &self.csv_rows {
            s.push_str(row);
            s.push('\n');
        }
        s
    }

    pub fn first_failure(&self) -> Option<&Assertion> {
        self.assertions.iter().find(|a| !a.pass)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub config_hash: String,
    pub assertions: Vec<Assertion>,
    pub runtime_ms: u128,
}

/// Run one experiment; the config must already validate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cfg.experiment.as_str() {
        "ft-selftest" => run_ft_selftest(cfg),
        "quantize-check" => run_quantize_check(cfg),
        "covariance" => run_covariance(cfg),
        "reconstruct-identity" => run_reconstruct_identity(cfg),
        "roundtrip" => run_roundtrip(cfg),
        "cv-bound" => run_cv_bound(cfg),
        "fibers" => run_fibers(cfg),
        "commutant" => run_commutant(cfg),
        "conjecture-demo" => run_conjecture_demo(cfg),
        "convergence" => run_convergence(cfg),
        other => Err(CordesError::Config {
            field: "experiment".into(),
            message: format!("unknown experiment `{other}`"),
        }),
    }
}

/// Write the CSV table and JSON summary for a finished run; returns the
/// summary path.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    outcome: &Outcome,
    out_dir: &Path,
    runtime_ms: u128,
) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{}.csv", outcome.experiment));
    fs::write(&csv_path, outcome.csv_body())?;
    let summary = Summary {
        experiment: outcome.experiment.clone(),
        config_hash: cfg.hash(),
        assertions: outcome.assertions.clone(),
        runtime_ms,
    };
    let summary_path = out_dir.join(format!("{}_summary.json", outcome.experiment));
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    Ok(summary_path)
}

// ---------------------------------------------------------------------------
// shared helpers

fn grid_or(cfg: &ExperimentConfig, n: usize, per_axis: usize, half_width: f64) -> Result<Grid> {
    match &cfg.grid {
        Some(g) => g.build(),
        None => Grid::new(n, per_axis, half_width),
    }
}

fn check_row(experiment: &str, check: &str, detail: &str, value: f64, tolerance: f64) -> String {
    format!(
        "{experiment},{check},{detail},{value:e},{tolerance:e},{}",
        if value <= tolerance { "pass" } else { "fail" }
    )
}

const CHECK_HEADER: &str = "experiment,check,detail,value,tolerance,pass";

fn fmt_vec(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn max_abs_diff_vec(a: &ModuleVec, b: &ModuleVec) -> f64 {
    a.slices()
        .iter()
        .zip(b.slices())
        .flat_map(|(x, y)| x.iter().zip(y.iter()).map(|(p, q)| (p - q).norm()))
        .fold(0.0, f64::max)
}

fn default_points(n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    // 3x3 sub-grid over z and zeta offsets; for n = 2 the offset is applied
    // to the first axis of each variable
    let offsets = [-0.5f64, 0.0, 0.5];
    let mut pts = Vec::new();
    for dz in offsets {
        for dzeta in offsets {
            let mut z = vec![0.0; n];
            let mut zeta = vec![0.0; n];
            z[0] = dz;
            zeta[0] = dzeta;
            pts.push((z, zeta));
        }
    }
    pts
}

// ---------------------------------------------------------------------------
// experiment 1: ft-selftest

fn run_ft_selftest(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = grid_or(cfg, 1, 128, 8.0)?;
    let n = grid.dim();
    let cases: Vec<(String, TestFunction)> = vec![
        (
            "gaussian".into(),
            TestFunction::Gaussian {
                center: vec![0.0; n],
                width: 1.0,
            },
        ),
        (
            "hermite-2".into(),
            TestFunction::Hermite {
                k: 2,
                center: vec![0.0; n],
                width: 1.0,
            },
        ),
        (
            "modulated".into(),
            TestFunction::ModulatedGaussian {
                center: vec![-0.5; n],
                width: 1.0,
                freq: vec![2.0; n],
            },
        ),
    ];
    let mut rows = Vec::new();
    let mut worst_rt = 0.0f64;
    let mut worst_pars = 0.0f64;
    for (tag, spec) in &cases {
        let f = test_function(spec, &grid)?;
        let fhat = fourier(&f)?;
        let back = inverse_fourier(&fhat)?;
        let rt = f
            .values
            .iter()
            .zip(back.values.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let pars = (f.l2_norm() - fhat.l2_norm()).abs();
        worst_rt = worst_rt.max(rt);
        worst_pars = worst_pars.max(pars);
        rows.push(check_row("ft-selftest", "roundtrip", tag, rt, 1e-12));
        rows.push(check_row("ft-selftest", "parseval", tag, pars, 1e-10));
    }
    // the standard Gaussian is its own transform
    let g = test_function(
        &TestFunction::Gaussian {
            center: vec![0.0; n],
            width: 1.0,
        },
        &grid,
    )?;
    let ghat = fourier(&g)?;
    let self_err = grid
        .freq_nodes()
        .iter()
        .enumerate()
        .map(|(s, &xi)| (ghat.values[s] - Complex64::new((-xi * xi / 2.0).exp(), 0.0)).norm())
        .fold(0.0, f64::max);
    rows.push(check_row(
        "ft-selftest",
        "gaussian-self-transform",
        "gaussian",
        self_err,
        1e-10,
    ));
    Ok(Outcome {
        experiment: "ft-selftest".into(),
        csv_header: CHECK_HEADER.into(),
        csv_rows: rows,
        assertions: vec![
            Assertion::le("fourier-roundtrip", worst_rt, 1e-12),
            Assertion::le("parseval", worst_pars, 1e-10),
            Assertion::le("gaussian-self-transform", self_err, 1e-10),
        ],
    })
}

// ---------------------------------------------------------------------------
// experiment 2: quantize-check

fn run_quantize_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = grid_or(cfg, 1, 128, 8.0)?;
    let n = grid.dim();
    let fibers = FiberSet::scalar();
    let f = test_function(
        &TestFunction::ModulatedGaussian {
            center: vec![0.3; n],
            width: 1.0,
            freq: vec![1.5; n],
        },
        &grid,
    )?;
    let fv = embed_scalar(&f, &fibers)?;
    let profile = Profile::Gaussian {
        center: 0.2,
        width: 1.1,
    };
    let mut rows = Vec::new();
    let mut assertions = Vec::new();
    let mut record = |name: &str, err: f64, tol: f64, rows: &mut Vec<String>| {
        rows.push(check_row("quantize-check", name, "max-abs", err, tol));
        assertions.push(Assertion::le(name, err, tol));
    };

    // multiplication symbol acts pointwise
    let mult = sample_family(
        &SymbolFamily::Multiplication {
            profile: profile.clone(),
            amps: None,
        },
        &grid,
        &fibers,
    )?;
    let got = apply(&quantize(&mult)?, &fv)?;
    let mut expect = fv.clone();
    for slice in expect.slices_mut() {
        for (j, val) in slice.iter_mut().enumerate() {
            let x = grid.position_point(j);
            let mut p = Complex64::new(1.0, 0.0);
            for t in 0..n {
                p *= profile.eval_scalar(x[t])?;
            }
            *val *= p;
        }
    }
    record(
        "multiplication",
        max_abs_diff_vec(&got, &expect),
        1e-10,
        &mut rows,
    );

    // multiplier symbol acts diagonally on the frequency side
    let mul = sample_family(
        &SymbolFamily::Multiplier {
            profile: profile.clone(),
            amps: None,
        },
        &grid,
        &fibers,
    )?;
    let got = apply(&quantize(&mul)?, &fv)?;
    let mut fhat = fourier(&f)?;
    for (s, val) in fhat.values.iter_mut().enumerate() {
        let xi = grid.freq_point(s);
        let mut p = Complex64::new(1.0, 0.0);
        for t in 0..n {
            p *= profile.eval_scalar(xi[t])?;
        }
        *val *= p;
    }
    let expect = embed_scalar(&inverse_fourier(&fhat)?, &fibers)?;
    record(
        "multiplier",
        max_abs_diff_vec(&got, &expect),
        1e-10,
        &mut rows,
    );

    // constant symbol scales
    let c = sample_family(
        &SymbolFamily::Constant {
            value: 0.75,
            amps: None,
        },
        &grid,
        &fibers,
    )?;
    let got = apply(&quantize(&c)?, &fv)?;
    let mut expect = fv.clone();
    for slice in expect.slices_mut() {
        slice.mapv_inplace(|v| 0.75 * v);
    }
    record(
        "constant",
        max_abs_diff_vec(&got, &expect),
        1e-10,
        &mut rows,
    );

    // e^{i h xi} per axis translates one grid step (circularly)
    let shift = sample_family(
        &SymbolFamily::Multiplier {
            profile: Profile::PlaneWave {
                freq: grid.spacing(),
            },
            amps: None,
        },
        &grid,
        &fibers,
    )?;
    let got = apply(&quantize(&shift)?, &fv)?;
    let nper = grid.per_axis();
    let nn = grid.total_nodes();
    let mut shifted = Array1::from_elem(nn, Complex64::new(0.0, 0.0));
    for j in 0..nn {
        let idx = grid.unflatten(j);
        let mut src = 0usize;
        for t in 0..n {
            src = src * nper + (idx[t] + 1) % nper;
        }
        shifted[j] = fv.slices()[0][src];
    }
    let expect = ModuleVec::new(fibers.clone(), grid.clone(), vec![shifted])?;
    record(
        "grid-step-shift",
        max_abs_diff_vec(&got, &expect),
        1e-10,
        &mut rows,
    );

    // FFT path against the direct quadrature oracle
    let gsym = sample_family(
        &SymbolFamily::Gaussian {
            width: 1.0,
            amps: None,
        },
        &grid,
        &fibers,
    )?;
    let got = apply(&quantize(&gsym)?, &fv)?;
    let oracle = direct_apply_oracle(&gsym, &fv)?;
    record(
        "fft-vs-oracle",
        max_abs_diff_vec(&got, &oracle),
        1e-10,
        &mut rows,
    );

    Ok(Outcome {
        experiment: "quantize-check".into(),
        csv_header: CHECK_HEADER.into(),
        csv_rows: rows,
        assertions,
    })
}

// ---------------------------------------------------------------------------
// experiment 3: covariance

fn run_covariance(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = grid_or(cfg, 1, 128, 8.0)?;
    let n = grid.dim();
    let fibers = FiberSet::scalar();
    let family = cfg.family.clone().unwrap_or(SymbolFamily::Gaussian {
        width: 1.0,
        amps: None,
    });
    let a = sample_family(&family, &grid, &fibers)?;
    let h = grid.spacing();
    let dxi = grid.freq_spacing();
    let steps: [(f64, f64); 5] = [
        (1.0, 0.0),
        (0.0, 1.0),
        (2.0, 1.0),
        (-3.0, 2.0),
        (4.0, -2.0),
    ];
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (kz, kzeta) in steps {
        let z = vec![kz * h; n];
        let zeta = vec![kzeta * dxi; n];
        let r = covariance_residual(&a, &z, &zeta)?;
        worst = worst.max(r);
        rows.push(check_row(
            "covariance",
            "aligned-shift",
            &format!("z={};zeta={}", fmt_vec(&z), fmt_vec(&zeta)),
            r,
            1e-9,
        ));
    }
    // group property: two conjugations compose to one
    let op = quantize(&a)?;
    let zero = vec![0.0; n];
    let two = conjugate(&conjugate(&op, &vec![0.6; n], &zero)?, &vec![0.9; n], &zero)?;
    let one = conjugate(&op, &vec![1.5; n], &zero)?;
    let group_z = two.max_abs_diff(&one)?;
    let zeta = vec![2.0 * dxi; n];
    let joint = conjugate(&op, &vec![0.7; n], &zeta)?;
    let staged = conjugate(&conjugate(&op, &vec![0.7; n], &zero)?, &zero, &zeta)?;
    let group_mixed = joint.max_abs_diff(&staged)?;
    let group = group_z.max(group_mixed);
    rows.push(check_row("covariance", "group-translation", "z", group_z, 1e-10));
    rows.push(check_row(
        "covariance",
        "group-mixed",
        "z-then-zeta",
        group_mixed,
        1e-10,
    ));
    Ok(Outcome {
        experiment: "covariance".into(),
        csv_header: CHECK_HEADER.into(),
        csv_rows: rows,
        assertions: vec![
            Assertion::le("covariance-aligned", worst, 1e-9),
            Assertion::le("group-property", group, 1e-10),
        ],
    })
}

// ---------------------------------------------------------------------------
// experiment 4: reconstruct-identity

const RECOVER_HEADER: &str =
    "experiment,n,fiber,z,zeta,re_s,im_s,re_a,im_a,abs_err,params_hash,runtime_ms";

fn recover_row(
    experiment: &str,
    n: usize,
    fiber: &str,
    z: &[f64],
    zeta: &[f64],
    s: Complex64,
    a: Complex64,
    hash: &str,
    runtime_ms: u128,
) -> String {
    format!(
        "{experiment},{n},{fiber},{},{},{:e},{:e},{:e},{:e},{:e},{hash},{runtime_ms}",
        fmt_vec(z),
        fmt_vec(zeta),
        s.re,
        s.im,
        a.re,
        a.im,
        (s - a).norm()
    )
}

fn run_reconstruct_identity(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = Grid::new(1, 64, 16.0)?;
    let fibers = FiberSet::scalar();
    let params = cfg
        .recovery
        .clone()
        .unwrap_or_else(|| RecoveryParams::reference(grid.spacing()));
    params.validate()?;
    let points = cfg.points.clone().unwrap_or_else(|| default_points(1));
    let families: [(&str, SymbolFamily); 2] = [
        (
            "constant",
            SymbolFamily::Constant {
                value: 1.0,
                amps: None,
            },
        ),
        ("gaussian", SymbolFamily::Gaussian { width: 1.0, amps: None }),
    ];
    let hash = params.hash();
    let halved = params.halved_steps();
    let halved_hash = halved.hash();
    let mut rows = Vec::new();
    let mut assertions = Vec::new();
    for (tag, family) in &families {
        let a = sample_family(family, &grid, &fibers)?;
        let b = smoothing_image(&a)?;
        let desc = a.descriptor.as_ref().expect("analytic family");
        let mut worst = 0.0f64;
        let mut worst_point = points[0].clone();
        let t0 = std::time::Instant::now();
        for (z, zeta) in &points {
            let vals = reconstruct_from_b(&b, z, zeta, &params)?;
            let w: Vec<f64> = z.iter().chain(zeta.iter()).copied().collect();
            let truth = desc.eval(0, &w);
            let err = (vals[0] - truth).norm();
            if err > worst {
                worst = err;
                worst_point = (z.clone(), zeta.clone());
            }
            rows.push(recover_row(
                "reconstruct-identity",
                1,
                fibers.labels()[0].as_str(),
                z,
                zeta,
                vals[0],
                truth,
                &hash,
                t0.elapsed().as_millis(),
            ));
        }
        assertions.push(Assertion::le(&format!("{tag}-max-err"), worst, 1e-3));
        // step-halving check at the worst point only (the fine pass is 8x
        // the work per point)
        let (z, zeta) = &worst_point;
        let fine = reconstruct_from_b(&b, z, zeta, &halved)?;
        let w: Vec<f64> = z.iter().chain(zeta.iter()).copied().collect();
        let truth = desc.eval(0, &w);
        let fine_err = (fine[0] - truth).norm();
        rows.push(recover_row(
            "reconstruct-identity",
            1,
            fibers.labels()[0].as_str(),
            z,
            zeta,
            fine[0],
            truth,
            &halved_hash,
            t0.elapsed().as_millis(),
        ));
        let ratio = if fine_err > 0.0 { worst / fine_err } else { f64::INFINITY };
        assertions.push(Assertion::ge(&format!("{tag}-halving-ratio"), ratio, 4.0));
    }
    Ok(Outcome {
        experiment: "reconstruct-identity".into(),
        csv_header: RECOVER_HEADER.into(),
        csv_rows: rows,
        assertions,
    })
}

// ---------------------------------------------------------------------------
// experiment 5: roundtrip

fn run_roundtrip(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = grid_or(cfg, 1, 256, 16.0)?;
    let params = cfg
        .recovery
        .clone()
        .unwrap_or_else(|| RecoveryParams::reference(grid.spacing()));
    params.validate()?;
    let points = cfg.points.clone().unwrap_or_else(|| default_points(grid.dim()));
    let scalar = FiberSet::scalar();
    let three = FiberSet::numbered(3)?;
    let amps = Some(vec![1.0, 2.0, 3.0]);
    let trig_freq = std::f64::consts::PI / grid.half_width() * 5.0;
    let suite: Vec<(String, FiberSet, SymbolFamily)> = vec![
        (
            "gaussian-m1".into(),
            scalar.clone(),
            SymbolFamily::Gaussian { width: 1.0, amps: None },
        ),
        (
            "trig-m1".into(),
            scalar.clone(),
            SymbolFamily::Trig { freq: trig_freq, amps: None },
        ),
        (
            "gaussian-m3".into(),
            three.clone(),
            SymbolFamily::Gaussian {
                width: 1.0,
                amps: amps.clone(),
            },
        ),
        (
            "trig-m3".into(),
            three.clone(),
            SymbolFamily::Trig {
                freq: trig_freq,
                amps: amps.clone(),
            },
        ),
    ];
    let mut rows = Vec::new();
    let mut assertions = Vec::new();
    let mut ratio_err = 0.0f64;
    for (tag, fibers, family) in &suite {
        let a = sample_family(family, &grid, fibers)?;
        let report = roundtrip_report(&a, &points, &params)?;
        let mut worst = 0.0f64;
        for row in &report {
            if row.experiment == "roundtrip-operator" {
                worst = worst.max(row.abs_err);
            }
            rows.push(format!(
                "{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{},{}",
                row.experiment,
                row.n,
                row.fiber,
                fmt_vec(&row.z),
                fmt_vec(&row.zeta),
                row.s_value.re,
                row.s_value.im,
                row.a_value.re,
                row.a_value.im,
                row.abs_err,
                row.params_hash,
                row.runtime_ms
            ));
        }
        assertions.push(Assertion::le(&format!("{tag}-max-err"), worst, 1e-2));
        if fibers.len() == 3 {
            // fiber ratios 1:2:3 at points where the scalar part is away
            // from zero
            for row in &report {
                if row.experiment != "roundtrip-operator" || row.a_value.norm() < 0.3 {
                    continue;
                }
                let fi = fibers
                    .labels()
                    .iter()
                    .position(|l| *l == row.fiber)
                    .expect("known fiber");
                let amp = [1.0, 2.0, 3.0][fi];
                let scalar_truth = row.a_value / amp;
                let implied = row.s_value / scalar_truth;
                ratio_err = ratio_err.max((implied.re / amp - 1.0).abs().max(implied.im.abs() / amp));
            }
        }
    }
    assertions.push(Assertion::le("fiber-ratio-deviation", ratio_err, 0.01));

    // refinement: two simultaneous grid + quadrature refinements at one
    // off-center point, Gaussian scalar symbol
    let mut level_errs = Vec::new();
    let point = vec![(vec![0.5; grid.dim()], vec![-0.5; grid.dim()])];
    let mut g = grid.clone();
    let mut p = params.clone();
    for _ in 0..3 {
        let a = sample_family(
            &SymbolFamily::Gaussian { width: 1.0, amps: None },
            &g,
            &scalar,
        )?;
        let report = roundtrip_report(&a, &point, &p)?;
        let err = report
            .iter()
            .filter(|r| r.experiment == "roundtrip-operator")
            .map(|r| r.abs_err)
            .fold(0.0, f64::max);
        rows.push(format!(
            "roundtrip-refine,{},c0,{},{},,,,,{:e},{},0",
            g.dim(),
            fmt_vec(&point[0].0),
            fmt_vec(&point[0].1),
            err,
            p.hash()
        ));
        level_errs.push(err);
        g = Grid::new(g.dim(), g.per_axis() * 2, g.half_width())?;
        p = p.halved_steps();
        p.delta = g.spacing();
    }
    let dec1 = if level_errs[1] > 0.0 { level_errs[0] / level_errs[1] } else { f64::INFINITY };
    let dec2 = if level_errs[2] > 0.0 { level_errs[1] / level_errs[2] } else { f64::INFINITY };
    assertions.push(Assertion::ge("refine-level1-ratio", dec1, 1.0));
    assertions.push(Assertion::ge("refine-level2-ratio", dec2, 1.0));
    Ok(Outcome {
        experiment: "roundtrip".into(),
        csv_header: RECOVER_HEADER.into(),
        csv_rows: rows,
        assertions,
    })
}

// ---------------------------------------------------------------------------
// experiment 6: cv-bound

fn run_cv_bound(cfg: &ExperimentConfig) -> Result<Outcome> {
    // trig frequencies must be multiples of pi / L; with L = 2 pi the
    // integer thetas 1, 2, 4 are all resonant
    let grid = grid_or(cfg, 1, 128, 2.0 * std::f64::consts::PI)?;
    let fibers = FiberSet::scalar();
    let thetas = cfg.theta.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0]);
    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    for theta in &thetas {
        let a = sample_family(
            &SymbolFamily::Trig {
                freq: *theta,
                amps: None,
            },
            &grid,
            &fibers,
        )?;
        let rep = cv_bound_report(&a)?;
        ratios.push(rep.ratio);
        rows.push(format!(
            "cv-bound,{theta},{:e},{:e},{:e}",
            rep.norm, rep.seminorm, rep.ratio
        ));
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = if min_ratio > 0.0 { max_ratio / min_ratio } else { f64::INFINITY };
    Ok(Outcome {
        experiment: "cv-bound".into(),
        csv_header: "experiment,theta,op_norm,seminorm,ratio".into(),
        csv_rows: rows,
        assertions: vec![
            Assertion::le("ratio-bound", max_ratio, 100.0),
            Assertion::le("ratio-spread", spread, 10.0),
        ],
    })
}

// ---------------------------------------------------------------------------
// experiment 7: fibers

fn run_fibers(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = Grid::new(1, 16, 8.0)?;
    let fibers = FiberSet::numbered(3)?;
    let nn = grid.total_nodes();
    let mut rows = Vec::new();

    // fiberwise norm: diagonal slices scaled to norms (1, 2, 0.5) give
    // module norm 2
    let scales = [1.0f64, 2.0, 0.5];
    let mats: Vec<Array2<Complex64>> = scales
        .iter()
        .map(|s| Array2::from_diag(&Array1::from_elem(nn, Complex64::new(*s, 0.0))))
        .collect();
    let op = ModuleOp::from_matrices(fibers.clone(), grid.clone(), mats)?;
    let norm_err = (op_norm(&op) - 2.0).abs();
    rows.push(check_row("fibers", "sup-norm", "scales-1-2-0.5", norm_err, 1e-8));

    // fiberwise sup against a dense Gram power-iteration reference
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rand_mats: Vec<Array2<Complex64>> = (0..3)
        .map(|_| {
            Array2::from_shape_fn((nn, nn), |_| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
        })
        .collect();
    let rop = ModuleOp::from_matrices(fibers.clone(), grid.clone(), rand_mats.clone())?;
    let mut dense_best = 0.0f64;
    for m in &rand_mats {
        let mh = m.t().mapv(|v| v.conj());
        let gram = mh.dot(m);
        let mut v = Array1::from_elem(nn, Complex64::new(1.0, 0.25));
        for _ in 0..4000 {
            let w = gram.dot(&v);
            let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v = w.mapv(|z| z / norm);
        }
        let gv = gram.dot(&v);
        let rq: f64 = v
            .iter()
            .zip(gv.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        dense_best = dense_best.max(rq.sqrt());
    }
    let svd_err = (op_norm(&rop) - dense_best).abs() / dense_best;
    rows.push(check_row("fibers", "dense-equivalence", "seeded", svd_err, 1e-8));

    // zero-fiber preservation on random fiber-diagonal operators: a vector
    // vanishing in one fiber stays exactly zero in that fiber
    let mut worst_leak = 0.0f64;
    for trial in 0..20 {
        let mats: Vec<Array2<Complex64>> = (0..3)
            .map(|_| {
                Array2::from_shape_fn((nn, nn), |_| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            })
            .collect();
        let top = ModuleOp::from_matrices(fibers.clone(), grid.clone(), mats)?;
        let dead = trial % 3;
        let slices: Vec<Array1<Complex64>> = (0..3)
            .map(|fi| {
                if fi == dead {
                    Array1::from_elem(nn, Complex64::new(0.0, 0.0))
                } else {
                    Array1::from_shape_fn(nn, |_| {
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    })
                }
            })
            .collect();
        let f = ModuleVec::new(fibers.clone(), grid.clone(), slices)?;
        let out = apply(&top, &f)?;
        let leak = out.slices()[dead]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        worst_leak = worst_leak.max(leak);
    }
    rows.push(check_row("fibers", "zero-fiber-preserved", "20-trials", worst_leak, 0.0));

    // module norm of a vector with known fiber norms is the fiber sup
    let slices: Vec<Array1<Complex64>> = scales
        .iter()
        .map(|s| {
            let mut v = Array1::from_elem(nn, Complex64::new(0.0, 0.0));
            v[nn / 2] = Complex64::new(*s / grid.spacing().sqrt(), 0.0);
            v
        })
        .collect();
    let f = ModuleVec::new(fibers, grid, slices)?;
    let vec_err = (module_norm(&f)? - 2.0).abs();
    rows.push(check_row("fibers", "vector-sup-norm", "scales-1-2-0.5", vec_err, 1e-8));

    Ok(Outcome {
        experiment: "fibers".into(),
        csv_header: CHECK_HEADER.into(),
        csv_rows: rows,
        assertions: vec![
            Assertion::le("operator-sup-norm", norm_err, 1e-8),
            Assertion::le("dense-equivalence", svd_err, 1e-8),
            Assertion::le("zero-fiber-preserved", worst_leak, 0.0),
            Assertion::le("vector-sup-norm", vec_err, 1e-8),
        ],
    })
}

// ---------------------------------------------------------------------------
// experiment 8: commutant

const RIEFFEL_HEADER: &str = "experiment,n,nper,j_tag,f_tag,g_tag,residual,recovery_err,flags";

fn run_commutant(cfg: &ExperimentConfig) -> Result<Outcome> {
    let j = SkewMatrix::symplectic();
    let fibers = FiberSet::scalar();
    let f_profile = cfg.profile.clone().unwrap_or(Profile::Gaussian {
        center: 0.0,
        width: 1.0,
    });
    let g3: Vec<(String, Profile)> = [0.7f64, 1.0, 1.5]
        .iter()
        .map(|w| {
            (
                format!("gauss-{w}"),
                Profile::Gaussian {
                    center: 0.0,
                    width: *w,
                },
            )
        })
        .collect();
    let npers = cfg.nper_sequence.clone().unwrap_or_else(|| vec![24, 32]);
    let mut rows = Vec::new();
    let mut residuals = Vec::new();
    for nper in &npers {
        let grid = Grid::new(2, *nper, commensurate_box(*nper))?;
        let lf = make_lf(&f_profile, &j, &grid, &fibers)?;
        let rep = commutant_residual(&lf, &g3, &j)?;
        residuals.push(rep.residual);
        for (g_tag, r) in &rep.per_g {
            rows.push(format!(
                "commutant,2,{nper},symplectic,gauss-F,{g_tag},{r:e},,{}",
                if *r <= COMMUTANT_THRESHOLD { "in-commutant" } else { "outside" }
            ));
        }
    }
    // negative control: multiplication by an odd coordinate-like profile
    let ngrid = Grid::new(2, npers[0], commensurate_box(npers[0]))?;
    let neg = quantize(&sample_family(
        &SymbolFamily::Multiplication {
            profile: Profile::Hermite {
                k: 1,
                center: 0.0,
                width: 2.0,
            },
            amps: None,
        },
        &ngrid,
        &fibers,
    )?)?;
    let neg_rep = commutant_residual(&neg, &default_g_list(), &j)?;
    rows.push(format!(
        "commutant,2,{},symplectic,mult-x1,{},{:e},,negative-control",
        npers[0], neg_rep.attaining, neg_rep.residual
    ));
    let mut assertions = vec![Assertion::le("residual-at-base", residuals[0], 1e-3)];
    // the lattice closure is exact at every commensurate size, so the
    // residual sits at roundoff and does not strictly decrease; the
    // assertion reports the measured ratio honestly
    for w in residuals.windows(2) {
        assertions.push(Assertion::le("residual-strictly-decreasing", w[1] / w[0], 1.0 - 1e-12));
    }
    assertions.push(Assertion::ge("negative-control", neg_rep.residual, 1e-1));
    Ok(Outcome {
        experiment: "commutant".into(),
        csv_header: RIEFFEL_HEADER.into(),
        csv_rows: rows,
        assertions,
    })
}

// ---------------------------------------------------------------------------
// experiment 9: conjecture-demo

fn run_conjecture_demo(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = grid_or(cfg, 2, 48, 12.0)?;
    let fibers = FiberSet::scalar();
    let profile = cfg.profile.clone().unwrap_or(Profile::Gaussian {
        center: 0.0,
        width: 1.0,
    });
    let j = SkewMatrix::symplectic();
    let params = cfg.recovery.clone().unwrap_or(RecoveryParams {
        t: 12.0,
        w: 12.0,
        qx: 48,
        qxi: 48,
        qeta: 48,
        half_step: true,
        delta: grid.spacing(),
    });
    params.validate()?;
    let points = cfg
        .points
        .clone()
        .unwrap_or_else(|| vec![(vec![0.0, 0.0], vec![0.0, 0.0]), (vec![0.5, -0.5], vec![0.0, 0.5])]);
    eprintln!(
        "conjecture-demo: probing smoothness and commutant, then recovering at {} points",
        points.len()
    );
    let rep = conjecture_demo(&profile, &j, &grid, &fibers, &points, &params, 5e-2)?;
    let recovery_err = rep.recovery_err.unwrap_or(f64::NAN);
    let rows = vec![format!(
        "conjecture-demo,{},{},symplectic,gauss-F,{},{:e},{:e},{}",
        grid.dim(),
        grid.per_axis(),
        rep.commutant.attaining,
        rep.commutant.residual,
        recovery_err,
        rep.flags()
    )];
    Ok(Outcome {
        experiment: "conjecture-demo".into(),
        csv_header: RIEFFEL_HEADER.into(),
        csv_rows: rows,
        assertions: vec![
            Assertion::le(
                "smoothness-consistent",
                if rep.smoothness.all_consistent { 0.0 } else { 1.0 },
                0.0,
            ),
            Assertion::le("commutant-residual", rep.commutant.residual, COMMUTANT_THRESHOLD),
            Assertion::le("recovery-err", recovery_err, 5e-2),
        ],
    })
}

// ---------------------------------------------------------------------------
// experiment 10: convergence

fn run_convergence(cfg: &ExperimentConfig) -> Result<Outcome> {
    let qs = cfg.q_sequence.clone().unwrap_or_else(|| vec![80, 160, 320]);
    let grid = Grid::new(1, 64, 16.0)?;
    let fibers = FiberSet::scalar();
    let a = sample_family(
        &SymbolFamily::Gaussian { width: 1.0, amps: None },
        &grid,
        &fibers,
    )?;
    let b = smoothing_image(&a)?;
    let desc = a.descriptor.as_ref().expect("analytic family");
    let z = vec![0.5];
    let zeta = vec![-0.5];
    let w: Vec<f64> = z.iter().chain(zeta.iter()).copied().collect();
    let truth = desc.eval(0, &w);
    let mut rows = Vec::new();
    let mut errs = Vec::new();
    for q in &qs {
        let params = RecoveryParams {
            t: 16.0,
            w: 16.0,
            qx: *q,
            qxi: *q,
            qeta: *q,
            half_step: true,
            delta: grid.spacing(),
        };
        let vals = reconstruct_from_b(&b, &z, &zeta, &params)?;
        let err = (vals[0] - truth).norm();
        errs.push(err);
        rows.push(format!("convergence,{q},{err:e}"));
    }
    let mut assertions = Vec::new();
    for (i, w) in errs.windows(2).enumerate() {
        let ratio = if w[1] > 0.0 { w[0] / w[1] } else { f64::INFINITY };
        assertions.push(Assertion::ge(&format!("refine-ratio-{i}"), ratio, 4.0));
    }
    Ok(Outcome {
        experiment: "convergence".into(),
        csv_header: "experiment,q,abs_err".into(),
        csv_rows: rows,
        assertions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_ten_experiments() {
        assert_eq!(EXPERIMENTS.len(), 10);
        let mut names: Vec<&str> = EXPERIMENTS.iter().map(|e| e.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 10);
    }

    #[test]
    fn unknown_experiment_is_a_config_error() {
        let cfg = ExperimentConfig::minimal("no-such-thing");
        match cfg.validate() {
            Err(CordesError::Config { field, message }) => {
                assert_eq!(field, "experiment");
                assert!(message.contains("ft-selftest"));
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn odd_grid_size_names_the_field() {
        let mut cfg = ExperimentConfig::minimal("ft-selftest");
        cfg.grid = Some(GridConfig {
            n: 1,
            per_axis: 63,
            half_width: 8.0,
        });
        match cfg.validate() {
            Err(CordesError::Config { field, .. }) => assert_eq!(field, "grid.per_axis"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn config_hash_is_stable_and_seed_sensitive() {
        let cfg = ExperimentConfig::minimal("ft-selftest");
        assert_eq!(cfg.hash(), cfg.clone().hash());
        let mut other = cfg.clone();
        other.seed = 7;
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn ft_selftest_passes_and_is_deterministic() {
        let cfg = ExperimentConfig::minimal("ft-selftest");
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert!(a.all_pass(), "failed: {:?}", a.first_failure());
        assert_eq!(a.csv_body(), b.csv_body());
    }

    #[test]
    fn quantize_check_passes() {
        let out = run_experiment(&ExperimentConfig::minimal("quantize-check")).unwrap();
        assert!(out.all_pass(), "failed: {:?}", out.first_failure());
    }

    #[test]
    fn covariance_passes() {
        let out = run_experiment(&ExperimentConfig::minimal("covariance")).unwrap();
        assert!(out.all_pass(), "failed: {:?}", out.first_failure());
    }

    #[test]
    fn cv_bound_ratio_within_bound_spread_reported() {
        let out = run_experiment(&ExperimentConfig::minimal("cv-bound")).unwrap();
        let bound = out.assertions.iter().find(|a| a.name == "ratio-bound").unwrap();
        assert!(bound.pass, "ratio bound failed: {bound:?}");
        // the spread assertion measures ~13.6: the seminorm scales as
        // theta^2 while the operator norm stays O(1), so the ratios spread
        // by ~16/(norm growth); recorded as a known red result
        let spread = out.assertions.iter().find(|a| a.name == "ratio-spread").unwrap();
        assert!(spread.value > 10.0 && spread.value < 20.0, "spread {spread:?}");
    }

    #[test]
    fn fibers_passes() {
        let out = run_experiment(&ExperimentConfig::minimal("fibers")).unwrap();
        assert!(out.all_pass(), "failed: {:?}", out.first_failure());
    }

    #[test]
    fn write_outputs_creates_csv_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::minimal("ft-selftest");
        let out = run_experiment(&cfg).unwrap();
        let summary_path = write_outputs(&cfg, &out, dir.path(), 5).unwrap();
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&summary_path).unwrap()).unwrap();
        assert_eq!(summary["experiment"], "ft-selftest");
        assert_eq!(summary["config_hash"], cfg.hash());
        assert!(summary["assertions"].as_array().unwrap().len() >= 3);
        let csv = fs::read_to_string(dir.path().join("ft-selftest.csv")).unwrap();
        assert!(csv.starts_with(CHECK_HEADER));
    }

    #[test]
    fn schema_lists_all_experiments() {
        let schema = config_schema();
        let names = schema["properties"]["experiment"]["enum"].as_array().unwrap();
        assert_eq!(names.len(), 10);
    }
}
