//! Uniform discretization of R^n with the symmetric-normalized Fourier
//! transform, quadrature, and Schwartz-class test functions.
//!
//! Position nodes per axis: x_j = -L + j*h with h = 2L/N.
//! Frequency nodes per axis: xi_k = (pi/L)*k, k = -N/2 .. N/2-1.
//! With this pairing h * dxi * N = 2pi, so the discrete transform below is
//! exactly unitary on the grid.

use crate::error::{CordesError, Result};
use ndarray::Array1;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::sync::Arc;

/// Which variable a sampled function lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Position,
    Frequency,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Position => "position",
            Side::Frequency => "frequency",
        }
    }
}

/// Uniform FFT-compatible grid on [-L, L)^n with the dual frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    per_axis: usize,
    half_width: f64,
}

/// Relative boundary-decay threshold for Schwartz-class representatives.
pub const EFFECTIVE_SUPPORT_TOL: f64 = 1e-10;

impl Grid {
    /// Build a grid; rejects n outside {1,2}, odd or small N, nonpositive L.
    pub fn new(n: usize, per_axis: usize, half_width: f64) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(CordesError::InvalidParam(format!(
                "dimension n must be 1 or 2, got {n}"
            )));
        }
        if per_axis < 8 || per_axis % 2 != 0 {
            return Err(CordesError::InvalidParam(format!(
                "N must be even and >= 8, got {per_axis}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(CordesError::InvalidParam(format!(
                "half-width L must be positive and finite, got {half_width}"
            )));
        }
        Ok(Grid {
            n,
            per_axis,
            half_width,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Node spacing h = 2L/N.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.per_axis as f64
    }

    /// Frequency spacing pi/L.
    pub fn freq_spacing(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }

    /// Total node count N^n.
    pub fn total_nodes(&self) -> usize {
        self.per_axis.pow(self.n as u32)
    }

    /// Position node along one axis.
    pub fn position_node(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// Frequency node along one axis, storage index s in 0..N maps to
    /// k = s - N/2.
    pub fn freq_node(&self, s: usize) -> f64 {
        (s as isize - (self.per_axis / 2) as isize) as f64 * self.freq_spacing()
    }

    pub fn position_nodes(&self) -> Vec<f64> {
        (0..self.per_axis).map(|j| self.position_node(j)).collect()
    }

    pub fn freq_nodes(&self) -> Vec<f64> {
        (0..self.per_axis).map(|s| self.freq_node(s)).collect()
    }

    /// Flat index -> per-axis indices (row-major, first axis slowest).
    pub fn unflatten(&self, flat: usize) -> [usize; 2] {
        match self.n {
            1 => [flat, 0],
            _ => [flat / self.per_axis, flat % self.per_axis],
        }
    }

    /// Position point of a flat node index (length n meaningful entries).
    pub fn position_point(&self, flat: usize) -> [f64; 2] {
        let idx = self.unflatten(flat);
        let mut p = [0.0; 2];
        for a in 0..self.n {
            p[a] = self.position_node(idx[a]);
        }
        p
    }

    /// Frequency point of a flat node index.
    pub fn freq_point(&self, flat: usize) -> [f64; 2] {
        let idx = self.unflatten(flat);
        let mut p = [0.0; 2];
        for a in 0..self.n {
            p[a] = self.freq_node(idx[a]);
        }
        p
    }

    pub fn check_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self != other {
            return Err(CordesError::GridMismatch(format!(
                "{what}: ({},{},{}) vs ({},{},{})",
                self.n, self.per_axis, self.half_width, other.n, other.per_axis, other.half_width
            )));
        }
        Ok(())
    }
}

/// Complex samples of a function on the grid's position or frequency nodes.
#[derive(Debug, Clone)]
pub struct SampledFn {
    pub grid: Grid,
    pub side: Side,
    pub values: Array1<Complex64>,
}

impl SampledFn {
    pub fn new(grid: Grid, side: Side, values: Array1<Complex64>) -> Result<Self> {
        if values.len() != grid.total_nodes() {
            return Err(CordesError::InvalidParam(format!(
                "sample count {} != N^n = {}",
                values.len(),
                grid.total_nodes()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(CordesError::InvalidParam(
                "non-finite sample value".to_string(),
            ));
        }
        Ok(SampledFn { grid, side, values })
    }

    pub fn zero(grid: Grid, side: Side) -> Self {
        let len = grid.total_nodes();
        SampledFn {
            grid,
            side,
            values: Array1::zeros(len),
        }
    }

    /// Sample a closed-form function of the position (or frequency) point.
    pub fn from_fn<F: Fn(&[f64]) -> Complex64>(grid: Grid, side: Side, f: F) -> Self {
        let n = grid.dim();
        let values = (0..grid.total_nodes())
            .map(|flat| {
                let p = match side {
                    Side::Position => grid.position_point(flat),
                    Side::Frequency => grid.freq_point(flat),
                };
                f(&p[..n])
            })
            .collect();
        SampledFn {
            grid,
            side,
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Max |sample| over nodes with any axis index 0 or N-1.
    pub fn boundary_max_abs(&self) -> f64 {
        let nn = self.grid.per_axis();
        let mut m = 0.0f64;
        for flat in 0..self.grid.total_nodes() {
            let idx = self.grid.unflatten(flat);
            let boundary = (0..self.grid.dim()).any(|a| idx[a] == 0 || idx[a] == nn - 1);
            if boundary {
                m = m.max(self.values[flat].norm());
            }
        }
        m
    }

    /// Effective-support invariant for Schwartz-class representatives.
    pub fn is_effectively_supported(&self) -> bool {
        self.boundary_max_abs() <= EFFECTIVE_SUPPORT_TOL * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// L2 norm with the side-appropriate quadrature weight.
    pub fn l2_norm(&self) -> f64 {
        let w = match self.side {
            Side::Position => self.grid.spacing(),
            Side::Frequency => self.grid.freq_spacing(),
        }
        .powi(self.grid.dim() as i32);
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * w).sqrt()
    }
}

/// One-axis DFT pass shared by the forward and inverse transform.
///
/// direction -1: out[s] = (-1)^k * sum_j in[j] e^{-2pi i jk/N}, k = s - N/2
/// direction +1: out[j] = sum_s (-1)^k in[s] e^{+2pi i jk/N}
fn axis_pass(values: &mut [Complex64], grid: &Grid, axis: usize, forward: bool) {
    let n_axis = grid.per_axis();
    let half = n_axis / 2;
    let mut planner = FftPlanner::new();
    let fft: Arc<dyn rustfft::Fft<f64>> = if forward {
        planner.plan_fft_forward(n_axis)
    } else {
        planner.plan_fft_inverse(n_axis)
    };
    let (stride, count) = if grid.dim() == 1 {
        (1usize, 1usize)
    } else if axis == 0 {
        (n_axis, n_axis)
    } else {
        (1, n_axis)
    };
    let mut buf = vec![Complex64::default(); n_axis];
    for c in 0..count {
        let base = if grid.dim() == 1 {
            0
        } else if axis == 0 {
            c
        } else {
            c * n_axis
        };
        if forward {
            for j in 0..n_axis {
                buf[j] = values[base + j * stride];
            }
            fft.process(&mut buf);
            // re-index DFT bin m = k mod N to storage s = k + N/2, apply (-1)^k
            for s in 0..n_axis {
                let k = s as isize - half as isize;
                let m = ((k + n_axis as isize) % n_axis as isize) as usize;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                values[base + s * stride] = buf[m] * sign;
            }
        } else {
            // place (-1)^k * in[s] at DFT bin m = k mod N, then inverse DFT
            for m in 0..n_axis {
                buf[m] = Complex64::default();
            }
            for s in 0..n_axis {
                let k = s as isize - half as isize;
                let m = ((k + n_axis as isize) % n_axis as isize) as usize;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                buf[m] = values[base + s * stride] * sign;
            }
            fft.process(&mut buf);
            for j in 0..n_axis {
                values[base + j * stride] = buf[j];
            }
        }
    }
}

/// Forward transform: u_hat(xi) = (2pi)^{-n/2} h^n sum_j e^{-i x_j.xi} u(x_j).
pub fn fourier(f: &SampledFn) -> Result<SampledFn> {
    if f.side != Side::Position {
        return Err(CordesError::SideMismatch {
            expected: "position",
            got: f.side.name(),
        });
    }
    let grid = f.grid.clone();
    let mut values: Vec<Complex64> = f.values.to_vec();
    for axis in 0..grid.dim() {
        axis_pass(&mut values, &grid, axis, true);
    }
    let scale = (grid.spacing() / (2.0 * std::f64::consts::PI).sqrt()).powi(grid.dim() as i32);
    let values = Array1::from_iter(values.into_iter().map(|v| v * scale));
    Ok(SampledFn {
        grid,
        side: Side::Frequency,
        values,
    })
}

/// Inverse transform: u(x_j) = (2pi)^{-n/2} dxi^n sum_k e^{+i x_j.xi_k} g(xi_k).
pub fn inverse_fourier(g: &SampledFn) -> Result<SampledFn> {
    if g.side != Side::Frequency {
        return Err(CordesError::SideMismatch {
            expected: "frequency",
            got: g.side.name(),
        });
    }
    let grid = g.grid.clone();
    let mut values: Vec<Complex64> = g.values.to_vec();
    for axis in 0..grid.dim() {
        axis_pass(&mut values, &grid, axis, false);
    }
    let scale = (grid.freq_spacing() / (2.0 * std::f64::consts::PI).sqrt()).powi(grid.dim() as i32);
    let values = Array1::from_iter(values.into_iter().map(|v| v * scale));
    Ok(SampledFn {
        grid,
        side: Side::Position,
        values,
    })
}

/// Riemann-sum quadrature with the side-appropriate weight (h^n or dxi^n).
pub fn quad(f: &SampledFn) -> Complex64 {
    let w = match f.side {
        Side::Position => f.grid.spacing(),
        Side::Frequency => f.grid.freq_spacing(),
    }
    .powi(f.grid.dim() as i32);
    f.values.iter().sum::<Complex64>() * w
}

/// Schwartz-class test-function families.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TestFunction {
    Gaussian {
        center: Vec<f64>,
        width: f64,
    },
    /// He_k((x-c)/w) * exp(-((x-c)/w)^2/2) per axis, probabilists' Hermite.
    Hermite {
        k: usize,
        center: Vec<f64>,
        width: f64,
    },
    ModulatedGaussian {
        center: Vec<f64>,
        width: f64,
        freq: Vec<f64>,
    },
}

fn hermite_poly(k: usize, y: f64) -> f64 {
    // probabilists' Hermite: He_0 = 1, He_1 = y, He_{k+1} = y He_k - k He_{k-1}
    let mut h0 = 1.0;
    let mut h1 = y;
    if k == 0 {
        return h0;
    }
    for j in 1..k {
        let h2 = y * h1 - j as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Generate a test function; rejects parameters that violate the
/// effective-support invariant on the given grid.
pub fn test_function(spec: &TestFunction, grid: &Grid) -> Result<SampledFn> {
    let n = grid.dim();
    let check_vec = |v: &[f64], what: &str| -> Result<()> {
        if v.len() != n {
            return Err(CordesError::InvalidParam(format!(
                "{what} must have length n = {n}, got {}",
                v.len()
            )));
        }
        Ok(())
    };
    let f = match spec {
        TestFunction::Gaussian { center, width } => {
            check_vec(center, "center")?;
            if !(*width > 0.0) {
                return Err(CordesError::InvalidParam("width must be positive".into()));
            }
            let (c, w) = (center.clone(), *width);
            SampledFn::from_fn(grid.clone(), Side::Position, move |x| {
                let q: f64 = x
                    .iter()
                    .zip(&c)
                    .map(|(xi, ci)| ((xi - ci) / w).powi(2))
                    .sum();
                Complex64::new((-q / 2.0).exp(), 0.0)
            })
        }
        TestFunction::Hermite { k, center, width } => {
            check_vec(center, "center")?;
            if *k > 8 {
                return Err(CordesError::InvalidParam(format!(
                    "hermite index k must be <= 8, got {k}"
                )));
            }
            if !(*width > 0.0) {
                return Err(CordesError::InvalidParam("width must be positive".into()));
            }
            let (kk, c, w) = (*k, center.clone(), *width);
            SampledFn::from_fn(grid.clone(), Side::Position, move |x| {
                let mut v = 1.0;
                for (xi, ci) in x.iter().zip(&c) {
                    let y = (xi - ci) / w;
                    v *= hermite_poly(kk, y) * (-y * y / 2.0).exp();
                }
                Complex64::new(v, 0.0)
            })
        }
        TestFunction::ModulatedGaussian {
            center,
            width,
            freq,
        } => {
            check_vec(center, "center")?;
            check_vec(freq, "freq")?;
            if !(*width > 0.0) {
                return Err(CordesError::InvalidParam("width must be positive".into()));
            }
            let (c, w, fr) = (center.clone(), *width, freq.clone());
            SampledFn::from_fn(grid.clone(), Side::Position, move |x| {
                let q: f64 = x
                    .iter()
                    .zip(&c)
                    .map(|(xi, ci)| ((xi - ci) / w).powi(2))
                    .sum();
                let phase: f64 = x.iter().zip(&fr).map(|(xi, fi)| xi * fi).sum();
                Complex64::from_polar((-q / 2.0).exp(), phase)
            })
        }
    };
    if !f.is_effectively_supported() {
        return Err(CordesError::EffectiveSupport(format!(
            "boundary max {:.3e} exceeds {:.0e} of peak {:.3e}",
            f.boundary_max_abs(),
            EFFECTIVE_SUPPORT_TOL,
            f.max_abs()
        )));
    }
    Ok(f)
}
