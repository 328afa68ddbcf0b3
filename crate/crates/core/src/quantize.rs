//! Pseudodifferential quantization a(x,D) as fiber-diagonal dense matrices,
//! the *-algebra operations, fiber operators, the module operator norm, the
//! tensor extension to two axes, and Calderon-Vaillancourt reporting.

use crate::error::{CordesError, Result};
use crate::grid::{Grid, SampledFn, Side};
use crate::module_space::{FiberSet, ModuleVec};
use crate::symbols::{cv_seminorm, Symbol};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

/// Fiber-diagonal operator: one dense matrix per fiber acting on
/// position-side sample vectors, quadrature weights folded in so that apply
/// is a plain matrix-vector product.
#[derive(Debug, Clone)]
pub struct ModuleOp {
    pub fibers: FiberSet,
    pub grid: Grid,
    mats: Vec<Array2<Complex64>>,
}

impl ModuleOp {
    pub fn from_matrices(
        fibers: FiberSet,
        grid: Grid,
        mats: Vec<Array2<Complex64>>,
    ) -> Result<Self> {
        let nn = grid.total_nodes();
        if mats.len() != fibers.len() {
            return Err(CordesError::FiberMismatch(format!(
                "{} matrices for {} fibers",
                mats.len(),
                fibers.len()
            )));
        }
        for m in &mats {
            if m.dim() != (nn, nn) {
                return Err(CordesError::GridMismatch(format!(
                    "matrix shape {:?} != ({nn},{nn})",
                    m.dim()
                )));
            }
            if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(CordesError::InvalidParam(
                    "non-finite operator entry".into(),
                ));
            }
        }
        Ok(ModuleOp { fibers, grid, mats })
    }

    pub fn identity(fibers: FiberSet, grid: Grid) -> Self {
        let nn = grid.total_nodes();
        let eye = Array2::from_shape_fn((nn, nn), |(i, j)| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::default()
            }
        });
        ModuleOp {
            fibers: fibers.clone(),
            grid,
            mats: vec![eye; fibers.len()],
        }
    }

    pub fn matrices(&self) -> &[Array2<Complex64>] {
        &self.mats
    }

    pub fn matrices_mut(&mut self) -> &mut [Array2<Complex64>] {
        &mut self.mats
    }

    pub fn check_compatible(&self, other: &ModuleOp) -> Result<()> {
        self.grid.check_same(&other.grid, "operators")?;
        self.fibers.check_same(&other.fibers, "operators")
    }

    /// Entrywise linear combination alpha*self + beta*other.
    pub fn lincomb(&self, alpha: Complex64, other: &ModuleOp, beta: Complex64) -> Result<ModuleOp> {
        self.check_compatible(other)?;
        let mats = self
            .mats
            .iter()
            .zip(&other.mats)
            .map(|(a, b)| a.mapv(|v| v * alpha) + b.mapv(|v| v * beta))
            .collect();
        ModuleOp::from_matrices(self.fibers.clone(), self.grid.clone(), mats)
    }

    /// Max entrywise absolute difference across fibers.
    pub fn max_abs_diff(&self, other: &ModuleOp) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .mats
            .iter()
            .zip(&other.mats)
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max))
    }
}

/// Unnormalized inverse DFT over the n-axis flattened frequency storage:
/// out[d] = sum_s v[s] exp(2 pi i s.d / N) per axis.
pub(crate) fn multi_idft(values: &[Complex64], n: usize, nper: usize) -> Vec<Complex64> {
    let total = nper.pow(n as u32);
    debug_assert_eq!(values.len(), total);
    let mut buf: Vec<Complex64> = values.to_vec();
    let mut planner = FftPlanner::new();
    let inv = planner.plan_fft_inverse(nper);
    let mut line = vec![Complex64::default(); nper];
    for axis in 0..n {
        let stride = nper.pow((n - 1 - axis) as u32);
        let lines = total / nper;
        for l in 0..lines {
            let mut rem = l;
            let mut base = 0usize;
            for t in (0..n).rev() {
                if t == axis {
                    continue;
                }
                let idx = rem % nper;
                rem /= nper;
                base += idx * nper.pow((n - 1 - t) as u32);
            }
            for j in 0..nper {
                line[j] = buf[base + j * stride];
            }
            inv.process(&mut line);
            for j in 0..nper {
                buf[base + j * stride] = line[j];
            }
        }
    }
    buf
}

/// Build a(x,D): per fiber, M[j,m] = (1/N^n) sum_k a(x_j, xi_k)
/// e^{i (x_j - x_m).xi_k}, via one inverse FFT per row over the frequency
/// storage. The phase reduces to exp(2 pi i k.(j-m)/N) on the index lattice,
/// so the row is a circular function of j - m.
pub fn quantize(a: &Symbol) -> Result<ModuleOp> {
    let grid = &a.grid;
    let n = grid.dim();
    let nper = grid.per_axis();
    let nn = grid.total_nodes();
    let scale = 1.0 / nn as f64;
    let mut mats = Vec::with_capacity(a.fibers.len());
    for block in a.samples() {
        let mut m = Array2::zeros((nn, nn));
        for j in 0..nn {
            let row: Vec<Complex64> = block.row(j).to_vec();
            let idft = multi_idft(&row, n, nper);
            let jx = axes_of(j, n, nper);
            for col in 0..nn {
                let mx = axes_of(col, n, nper);
                let mut d = 0usize;
                let mut parity = 0i64;
                for ax in 0..n {
                    let da =
                        ((jx[ax] as i64 - mx[ax] as i64).rem_euclid(nper as i64)) as usize;
                    parity += jx[ax] as i64 - mx[ax] as i64;
                    d = d * nper + da;
                }
                let sign = if parity.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                m[[j, col]] = idft[d] * (scale * sign);
            }
        }
        mats.push(m);
    }
    ModuleOp::from_matrices(a.fibers.clone(), grid.clone(), mats)
}

pub(crate) fn axes_of(flat: usize, n: usize, nper: usize) -> Vec<usize> {
    let mut axes = vec![0usize; n];
    let mut rem = flat;
    for t in (0..n).rev() {
        axes[t] = rem % nper;
        rem /= nper;
    }
    axes
}

/// Per-fiber matrix-vector product.
pub fn apply(op: &ModuleOp, f: &ModuleVec) -> Result<ModuleVec> {
    op.grid.check_same(&f.grid, "operator/vector")?;
    op.fibers.check_same(&f.fibers, "operator/vector")?;
    let slices: Vec<Array1<Complex64>> = op
        .mats
        .iter()
        .zip(f.slices())
        .map(|(m, v)| m.dot(v))
        .collect();
    ModuleVec::new(op.fibers.clone(), op.grid.clone(), slices)
}

const ORACLE_MAX_N1: usize = 256;
const ORACLE_MAX_N2: usize = 32;

/// Brute-force double Riemann sum of the quantization integral, no fast
/// transform anywhere: reference path for cross-checking quantize/apply.
pub fn direct_apply_oracle(a: &Symbol, f: &ModuleVec) -> Result<ModuleVec> {
    let grid = &a.grid;
    grid.check_same(&f.grid, "oracle symbol/vector")?;
    a.fibers.check_same(&f.fibers, "oracle symbol/vector")?;
    let n = grid.dim();
    let nper = grid.per_axis();
    let cap = if n == 1 { ORACLE_MAX_N1 } else { ORACLE_MAX_N2 };
    if nper > cap {
        return Err(CordesError::GridTooLarge {
            op: "direct_apply_oracle".into(),
            detail: format!("N = {nper} exceeds cap {cap} for n = {n}"),
        });
    }
    let nn = grid.total_nodes();
    let h = grid.spacing();
    let dxi = grid.freq_spacing();
    let tp = (2.0 * std::f64::consts::PI).powf(n as f64 / 2.0);
    let fwd_scale = h.powi(n as i32) / tp;
    let inv_scale = dxi.powi(n as i32) / tp;
    let slices = f
        .slices()
        .iter()
        .enumerate()
        .map(|(fi, slice)| {
            // hat u by the slow sum
            let mut hat = vec![Complex64::default(); nn];
            for (s, slot) in hat.iter_mut().enumerate() {
                let xi = grid.freq_point(s);
                let mut acc = Complex64::default();
                for (j, v) in slice.iter().enumerate() {
                    let x = grid.position_point(j);
                    let phase: f64 = (0..n).map(|t| x[t] * xi[t]).sum();
                    acc += v * Complex64::from_polar(1.0, -phase);
                }
                *slot = acc * fwd_scale;
            }
            let block = &a.samples()[fi];
            let mut out = Array1::zeros(nn);
            for j in 0..nn {
                let x = grid.position_point(j);
                let mut acc = Complex64::default();
                for (s, hv) in hat.iter().enumerate() {
                    let xi = grid.freq_point(s);
                    let phase: f64 = (0..n).map(|t| x[t] * xi[t]).sum();
                    acc += block[[j, s]] * hv * Complex64::from_polar(1.0, phase);
                }
                out[j] = acc * inv_scale;
            }
            out
        })
        .collect();
    ModuleVec::new(f.fibers.clone(), grid.clone(), slices)
}

/// Conjugate transpose per fiber (uniform quadrature weights cancel).
pub fn adjoint(op: &ModuleOp) -> Result<ModuleOp> {
    let mats = op
        .mats
        .iter()
        .map(|m| m.t().mapv(|v| v.conj()))
        .collect();
    ModuleOp::from_matrices(op.fibers.clone(), op.grid.clone(), mats)
}

pub fn compose(a: &ModuleOp, b: &ModuleOp) -> Result<ModuleOp> {
    a.check_compatible(b)?;
    let mats = a
        .mats
        .iter()
        .zip(&b.mats)
        .map(|(x, y)| x.dot(y))
        .collect();
    ModuleOp::from_matrices(a.fibers.clone(), a.grid.clone(), mats)
}

pub fn commutator(a: &ModuleOp, b: &ModuleOp) -> Result<ModuleOp> {
    let ab = compose(a, b)?;
    let ba = compose(b, a)?;
    ab.lincomb(Complex64::new(1.0, 0.0), &ba, Complex64::new(-1.0, 0.0))
}

/// The scalar operator at one fiber.
pub fn fiber_op(op: &ModuleOp, label: &str) -> Result<Array2<Complex64>> {
    let i = op.fibers.index_of(label)?;
    Ok(op.mats[i].clone())
}

/// Largest-singular-value estimate with convergence data.
#[derive(Debug, Clone, Copy)]
pub struct OpNormReport {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub const OP_NORM_TOL: f64 = 1e-8;
pub const OP_NORM_CAP: usize = 10_000;

fn fiber_norm(m: &Array2<Complex64>, rng: &mut ChaCha8Rng) -> OpNormReport {
    let nn = m.nrows();
    let mh = m.t().mapv(|v| v.conj());
    let mut v: Array1<Complex64> = Array1::from_shape_fn(nn, |_| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let mut prev = 0.0f64;
    for it in 1..=OP_NORM_CAP {
        let w = mh.dot(&m.dot(&v));
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return OpNormReport {
                value: 0.0,
                converged: true,
                iterations: it,
            };
        }
        v = w.mapv(|z| z / norm);
        let est = norm.sqrt();
        if (est - prev).abs() <= OP_NORM_TOL * est.max(1.0) {
            return OpNormReport {
                value: est,
                converged: true,
                iterations: it,
            };
        }
        prev = est;
    }
    OpNormReport {
        value: prev,
        converged: false,
        iterations: OP_NORM_CAP,
    }
}

/// Module operator norm: max over fibers of the largest singular value,
/// by power iteration on T*T with a fixed seed.
pub fn op_norm_report(op: &ModuleOp) -> OpNormReport {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut out = OpNormReport {
        value: 0.0,
        converged: true,
        iterations: 0,
    };
    for m in &op.mats {
        let r = fiber_norm(m, &mut rng);
        out.value = out.value.max(r.value);
        out.converged &= r.converged;
        out.iterations = out.iterations.max(r.iterations);
    }
    out
}

pub fn op_norm(op: &ModuleOp) -> f64 {
    op_norm_report(op).value
}

/// A (x) I: act with a 1-axis operator along the first variable of the
/// 2-axis grid built from the same axis.
pub fn tensor_extend(op: &ModuleOp, grid2: &Grid) -> Result<ModuleOp> {
    if op.grid.dim() != 1 || grid2.dim() != 2 {
        return Err(CordesError::GridMismatch(
            "tensor_extend maps a 1-axis operator to the 2-axis grid".into(),
        ));
    }
    if grid2.per_axis() != op.grid.per_axis()
        || (grid2.half_width() - op.grid.half_width()).abs() > 0.0
    {
        return Err(CordesError::GridMismatch(
            "2-axis grid must be built from the operator's axis".into(),
        ));
    }
    let nper = op.grid.per_axis();
    let nn = grid2.total_nodes();
    let mats = op
        .mats
        .iter()
        .map(|a| {
            let mut out = Array2::zeros((nn, nn));
            for j0 in 0..nper {
                for m0 in 0..nper {
                    let v = a[[j0, m0]];
                    if v.norm() == 0.0 {
                        continue;
                    }
                    for j1 in 0..nper {
                        out[[j0 * nper + j1, m0 * nper + j1]] = v;
                    }
                }
            }
            out
        })
        .collect();
    ModuleOp::from_matrices(op.fibers.clone(), grid2.clone(), mats)
}

/// Empirical Calderon-Vaillancourt data for one symbol.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CvBoundReport {
    pub norm: f64,
    pub seminorm: f64,
    pub ratio: f64,
}

pub fn cv_bound_report(a: &Symbol) -> Result<CvBoundReport> {
    let seminorm = cv_seminorm(a);
    if seminorm <= 1e-12 {
        return Err(CordesError::InvalidParam(
            "degenerate symbol: vanishing seminorm".into(),
        ));
    }
    let norm = op_norm(&quantize(a)?);
    Ok(CvBoundReport {
        norm,
        seminorm,
        ratio: norm / seminorm,
    })
}

/// Position-side sampled function from a symbol-free closure, embedded on
/// every fiber — shorthand used across tests and experiments.
pub fn embedded_from_fn<F: Fn(&[f64]) -> Complex64>(
    grid: &Grid,
    fibers: &FiberSet,
    f: F,
) -> Result<ModuleVec> {
    let s = SampledFn::from_fn(grid.clone(), Side::Position, f);
    crate::module_space::embed_scalar(&s, fibers)
}
