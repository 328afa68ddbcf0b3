//! Phase-space symbols a(x,xi) with values in C(Omega): closed-form
//! families, shifting, Calderon-Vaillancourt seminorms, and the smoothing
//! image prod_j (1+d_{x_j})^2 (1+d_{xi_j})^2 a.
//!
//! Descriptor-backed symbols are products of univariate factors applied to
//! linear functionals of the phase-space point w = (x, xi). All analytic
//! differentiation reduces to univariate factor derivatives through that
//! linear substitution, so one machinery serves every family including the
//! shear forms F(x + J xi).

use crate::error::{CordesError, Result};
use crate::grid::Grid;
use crate::module_space::FiberSet;
use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::collections::BTreeMap;

// ---------------------------------------------------------------------------
// univariate factors

/// Real polynomial in one variable, ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
struct Poly(Vec<f64>);

impl Poly {
    fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(
            self.0[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| (i + 1) as f64 * c)
                .collect(),
        )
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.0.clone();
        out.resize(out.len().max(other.0.len()), 0.0);
        for (i, b) in other.0.iter().enumerate() {
            out[i] -= b;
        }
        Poly(out)
    }
}

/// Probabilists' Hermite polynomial He_k as coefficients.
fn hermite_coeffs(k: usize) -> Vec<f64> {
    let mut h0 = vec![1.0];
    let mut h1 = vec![0.0, 1.0];
    if k == 0 {
        return h0;
    }
    for j in 1..k {
        // He_{j+1} = y He_j - j He_{j-1}
        let mut next = vec![0.0; h1.len() + 1];
        for (i, c) in h1.iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, c) in h0.iter().enumerate() {
            next[i] -= j as f64 * c;
        }
        h0 = h1;
        h1 = next;
    }
    h1
}

/// Univariate smooth bounded factor with analytic derivatives of all needed
/// orders.
#[derive(Debug, Clone)]
pub enum Factor {
    /// p((y-c)/w) * exp(-((y-c)/w)^2/2)
    PolyGauss {
        coeffs: Vec<f64>,
        center: f64,
        width: f64,
    },
    /// sin(freq * y)
    Sin { freq: f64 },
    /// exp(i freq y)
    CExp { freq: f64 },
    /// logistic 1/(1 + exp(-(y-c)/w))
    Logistic { center: f64, width: f64 },
}

/// Factor with derivative data precomputed up to a fixed order.
#[derive(Debug, Clone)]
enum PreparedFactor {
    PolyGauss {
        derivs: Vec<Poly>,
        center: f64,
        inv_width: f64,
    },
    Sin {
        freq: f64,
    },
    CExp {
        powers: Vec<Complex64>,
        freq: f64,
    },
    Logistic {
        derivs: Vec<Poly>,
        center: f64,
        inv_width: f64,
    },
}

impl Factor {
    fn prepare(&self, max_order: usize) -> PreparedFactor {
        match self {
            Factor::PolyGauss {
                coeffs,
                center,
                width,
            } => {
                // p_{k+1} = p_k' - t p_k, in the scaled variable t
                let mut derivs = vec![Poly(coeffs.clone())];
                for k in 0..max_order {
                    let p = &derivs[k];
                    derivs.push(p.derivative().sub(&p.mul(&Poly(vec![0.0, 1.0]))));
                }
                PreparedFactor::PolyGauss {
                    derivs,
                    center: *center,
                    inv_width: 1.0 / width,
                }
            }
            Factor::Sin { freq } => PreparedFactor::Sin { freq: *freq },
            Factor::CExp { freq } => {
                let base = Complex64::new(0.0, *freq);
                let mut powers = vec![Complex64::new(1.0, 0.0)];
                for k in 0..max_order {
                    powers.push(powers[k] * base);
                }
                PreparedFactor::CExp {
                    powers,
                    freq: *freq,
                }
            }
            Factor::Logistic { center, width } => {
                // q_0(s) = s; q_{k+1}(s) = q_k'(s) (s - s^2)
                let mut derivs = vec![Poly(vec![0.0, 1.0])];
                let kernel = Poly(vec![0.0, 1.0, -1.0]);
                for k in 0..max_order {
                    derivs.push(derivs[k].derivative().mul(&kernel));
                }
                PreparedFactor::Logistic {
                    derivs,
                    center: *center,
                    inv_width: 1.0 / width,
                }
            }
        }
    }
}

impl PreparedFactor {
    /// Write derivatives of order 0..out.len() at y into out.
    fn eval_all(&self, y: f64, out: &mut [Complex64]) {
        match self {
            PreparedFactor::PolyGauss {
                derivs,
                center,
                inv_width,
            } => {
                let t = (y - center) * inv_width;
                let e = (-t * t / 2.0).exp();
                let mut chain = 1.0;
                for (k, slot) in out.iter_mut().enumerate() {
                    *slot = Complex64::new(derivs[k].eval(t) * e * chain, 0.0);
                    chain *= inv_width;
                }
            }
            PreparedFactor::Sin { freq } => {
                let mut chain = 1.0;
                for (k, slot) in out.iter_mut().enumerate() {
                    let phase = freq * y + k as f64 * std::f64::consts::FRAC_PI_2;
                    *slot = Complex64::new(chain * phase.sin(), 0.0);
                    chain *= freq;
                }
            }
            PreparedFactor::CExp { powers, freq } => {
                let base = Complex64::from_polar(1.0, freq * y);
                for (k, slot) in out.iter_mut().enumerate() {
                    *slot = powers[k] * base;
                }
            }
            PreparedFactor::Logistic {
                derivs,
                center,
                inv_width,
            } => {
                let u = (y - center) * inv_width;
                let s = 1.0 / (1.0 + (-u).exp());
                let mut chain = 1.0;
                for (k, slot) in out.iter_mut().enumerate() {
                    *slot = Complex64::new(derivs[k].eval(s) * chain, 0.0);
                    chain *= inv_width;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// constant-coefficient differential operators

/// Polynomial in commuting partial derivatives, one variable per component
/// of w = (x_1..x_n, xi_1..xi_n) (or per factor coordinate after
/// substitution). Terms are exponent-vector -> coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffPoly {
    nvars: usize,
    terms: BTreeMap<Vec<u8>, f64>,
}

impl DiffPoly {
    pub fn one(nvars: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![0u8; nvars], 1.0);
        DiffPoly { nvars, terms }
    }

    pub fn zero(nvars: usize) -> Self {
        DiffPoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .get(&vec![0u8; self.nvars])
                .map(|c| *c == 1.0)
                .unwrap_or(false)
    }

    fn insert(&mut self, expo: Vec<u8>, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let e = self.terms.entry(expo).or_insert(0.0);
        *e += coeff;
        if *e == 0.0 {
            // keep the map canonical
        }
    }

    /// First-order operator sum_i coeffs[i] * d_i.
    pub fn linear(nvars: usize, coeffs: &[f64]) -> Self {
        let mut p = DiffPoly::zero(nvars);
        for (i, c) in coeffs.iter().enumerate() {
            if *c != 0.0 {
                let mut e = vec![0u8; nvars];
                e[i] = 1;
                p.insert(e, *c);
            }
        }
        p
    }

    /// d_var as a polynomial.
    pub fn partial(nvars: usize, var: usize) -> Self {
        let mut e = vec![0u8; nvars];
        e[var] = 1;
        let mut p = DiffPoly::zero(nvars);
        p.insert(e, 1.0);
        p
    }

    pub fn add(&self, other: &DiffPoly) -> DiffPoly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert(e.clone(), *c);
        }
        out.prune();
        out
    }

    pub fn scale(&self, s: f64) -> DiffPoly {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= s;
        }
        out.prune();
        out
    }

    pub fn mul(&self, other: &DiffPoly) -> DiffPoly {
        let mut out = DiffPoly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u8> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.insert(e, ca * cb);
            }
        }
        out.prune();
        out
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| *c != 0.0);
        if self.terms.is_empty() {
            // keep zero representable as empty map
        }
    }

    /// (1 + d_var)^2 = 1 + 2 d_var + d_var^2.
    pub fn one_plus_d_squared(nvars: usize, var: usize) -> Self {
        let d = DiffPoly::partial(nvars, var);
        DiffPoly::one(nvars).add(&d.scale(2.0)).add(&d.mul(&d))
    }

    /// prod_{j=1}^{n} (1 + d_{x_j})^2 (1 + d_{xi_j})^2 on 2n variables.
    pub fn smoothing(n: usize) -> Self {
        let nv = 2 * n;
        let mut p = DiffPoly::one(nv);
        for j in 0..n {
            p = p.mul(&DiffPoly::one_plus_d_squared(nv, j));
            p = p.mul(&DiffPoly::one_plus_d_squared(nv, n + j));
        }
        p
    }

    /// Mixed partial d_x^alpha d_xi^beta with multi-indices concatenated.
    pub fn mixed_partial(nvars: usize, orders: &[u8]) -> Self {
        let mut e = vec![0u8; nvars];
        e[..orders.len()].copy_from_slice(orders);
        let mut p = DiffPoly::zero(nvars);
        p.insert(e, 1.0);
        p
    }

    /// Substitute d_{w_j} = sum_i subs[j][i] * d_{u_i}; result lives on
    /// subs[0].len() new variables (all rows same length).
    pub fn substitute(&self, subs: &[Vec<f64>]) -> DiffPoly {
        let new_vars = subs.first().map(|r| r.len()).unwrap_or(0);
        let lin: Vec<DiffPoly> = subs
            .iter()
            .map(|row| DiffPoly::linear(new_vars, row))
            .collect();
        let mut out = DiffPoly::zero(new_vars);
        for (e, c) in &self.terms {
            let mut term = DiffPoly::one(new_vars).scale(*c);
            for (j, p) in e.iter().enumerate() {
                for _ in 0..*p {
                    term = term.mul(&lin[j]);
                }
            }
            out = out.add(&term);
        }
        out
    }

    fn terms(&self) -> &BTreeMap<Vec<u8>, f64> {
        &self.terms
    }
}

// ---------------------------------------------------------------------------
// descriptors

/// Analytic description of a symbol: amp_lambda * prod_i f_i(<c_i, w> + o_i),
/// optionally with a constant-coefficient differential operator applied.
#[derive(Debug, Clone)]
pub struct Descriptor {
    n: usize,
    factors: Vec<Factor>,
    /// Row i: the linear functional defining factor coordinate y_i on
    /// w = (x_1..x_n, xi_1..xi_n).
    coords: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    amps: Vec<Complex64>,
    /// Operator in d_w already applied to the base product.
    applied: DiffPoly,
    plan: EvalPlan,
}

#[derive(Debug, Clone)]
struct EvalPlan {
    prepared: Vec<PreparedFactor>,
    /// (exponents per factor, coefficient) of the operator in factor
    /// coordinates; empty exponent list means the descriptor has no factors.
    terms: Vec<(Vec<u8>, f64)>,
    max_order: usize,
}

impl EvalPlan {
    fn build(factors: &[Factor], coords: &[Vec<f64>], applied: &DiffPoly) -> EvalPlan {
        let nf = factors.len();
        // transpose: d_{w_j} = sum_i coords[i][j] d_{y_i}
        let nvars_w = applied.nvars;
        let subs: Vec<Vec<f64>> = (0..nvars_w)
            .map(|j| (0..nf).map(|i| coords[i][j]).collect())
            .collect();
        let in_y = applied.substitute(&subs);
        let terms: Vec<(Vec<u8>, f64)> = in_y
            .terms()
            .iter()
            .map(|(e, c)| (e.clone(), *c))
            .collect();
        let max_order = terms
            .iter()
            .flat_map(|(e, _)| e.iter().copied())
            .max()
            .unwrap_or(0) as usize;
        let prepared = factors.iter().map(|f| f.prepare(max_order)).collect();
        EvalPlan {
            prepared,
            terms,
            max_order,
        }
    }
}

/// Scratch buffers for descriptor evaluation in hot loops.
#[derive(Debug, Default, Clone)]
pub struct EvalScratch {
    derivs: Vec<Complex64>,
}

impl Descriptor {
    pub fn new(
        n: usize,
        factors: Vec<Factor>,
        coords: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        amps: Vec<Complex64>,
    ) -> Result<Self> {
        if coords.len() != factors.len() || offsets.len() != factors.len() {
            return Err(CordesError::InvalidParam(
                "descriptor factor/coordinate count mismatch".into(),
            ));
        }
        for row in &coords {
            if row.len() != 2 * n {
                return Err(CordesError::InvalidParam(
                    "descriptor coordinate rows must have length 2n".into(),
                ));
            }
        }
        let applied = DiffPoly::one(2 * n);
        let plan = EvalPlan::build(&factors, &coords, &applied);
        Ok(Descriptor {
            n,
            factors,
            coords,
            offsets,
            amps,
            applied,
            plan,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn fiber_count(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    /// Amp-free value of the (operator-applied) base product at w.
    pub fn eval_base_scratch(&self, w: &[f64], scratch: &mut EvalScratch) -> Complex64 {
        let nf = self.factors.len();
        let ord = self.plan.max_order + 1;
        scratch.derivs.resize(nf * ord, Complex64::default());
        for i in 0..nf {
            let y: f64 = self.coords[i]
                .iter()
                .zip(w)
                .map(|(c, wj)| c * wj)
                .sum::<f64>()
                + self.offsets[i];
            self.plan.prepared[i].eval_all(y, &mut scratch.derivs[i * ord..(i + 1) * ord]);
        }
        let mut acc = Complex64::default();
        for (e, c) in &self.plan.terms {
            let mut prod = Complex64::new(*c, 0.0);
            for (i, k) in e.iter().enumerate() {
                prod *= scratch.derivs[i * ord + *k as usize];
            }
            acc += prod;
        }
        acc
    }

    pub fn eval_base(&self, w: &[f64]) -> Complex64 {
        let mut scratch = EvalScratch::default();
        self.eval_base_scratch(w, &mut scratch)
    }

    /// Value at w for one fiber.
    pub fn eval(&self, fiber: usize, w: &[f64]) -> Complex64 {
        self.amps[fiber] * self.eval_base(w)
    }

    /// Descriptor of (x,xi) -> a(x+z, xi+zeta).
    pub fn shifted(&self, z: &[f64], zeta: &[f64]) -> Descriptor {
        let mut out = self.clone();
        let shift: Vec<f64> = z.iter().chain(zeta.iter()).copied().collect();
        for i in 0..out.factors.len() {
            let delta: f64 = out.coords[i].iter().zip(&shift).map(|(c, s)| c * s).sum();
            out.offsets[i] += delta;
        }
        out
    }

    /// Apply a further constant-coefficient operator analytically.
    pub fn with_applied(&self, op: &DiffPoly) -> Descriptor {
        let mut out = self.clone();
        out.applied = op.mul(&self.applied);
        out.plan = EvalPlan::build(&out.factors, &out.coords, &out.applied);
        out
    }
}

// ---------------------------------------------------------------------------
// families

/// Univariate profile specifications for multiplication/multiplier/shear
/// families.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Gaussian { center: f64, width: f64 },
    Hermite { k: usize, center: f64, width: f64 },
    Sigmoid { center: f64, width: f64 },
    /// exp(i freq y)
    PlaneWave { freq: f64 },
    One,
}

impl Profile {
    /// Pointwise evaluation of the profile at a scalar argument.
    pub fn eval_scalar(&self, y: f64) -> Result<Complex64> {
        match self.factor()? {
            None => Ok(Complex64::new(1.0, 0.0)),
            Some(f) => {
                let prepared = f.prepare(0);
                let mut out = [Complex64::default()];
                prepared.eval_all(y, &mut out);
                Ok(out[0])
            }
        }
    }

    fn factor(&self) -> Result<Option<Factor>> {
        match self {
            Profile::Gaussian { center, width } => {
                if !(*width > 0.0) {
                    return Err(CordesError::InvalidParam(
                        "profile width must be positive".into(),
                    ));
                }
                Ok(Some(Factor::PolyGauss {
                    coeffs: vec![1.0],
                    center: *center,
                    width: *width,
                }))
            }
            Profile::Hermite { k, center, width } => {
                if !(*width > 0.0) {
                    return Err(CordesError::InvalidParam(
                        "profile width must be positive".into(),
                    ));
                }
                if *k > 8 {
                    return Err(CordesError::InvalidParam(
                        "hermite profile index must be <= 8".into(),
                    ));
                }
                Ok(Some(Factor::PolyGauss {
                    coeffs: hermite_coeffs(*k),
                    center: *center,
                    width: *width,
                }))
            }
            Profile::Sigmoid { center, width } => {
                if !(*width > 0.0) {
                    return Err(CordesError::InvalidParam(
                        "sigmoid width must be positive".into(),
                    ));
                }
                Ok(Some(Factor::Logistic {
                    center: *center,
                    width: *width,
                }))
            }
            Profile::PlaneWave { freq } => Ok(Some(Factor::CExp { freq: *freq })),
            Profile::One => Ok(None),
        }
    }
}

/// Closed-form symbol families.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SymbolFamily {
    Constant {
        value: f64,
        #[serde(default)]
        amps: Option<Vec<f64>>,
    },
    /// exp(-(|x|^2 + |xi|^2)/(2 width^2))
    Gaussian {
        width: f64,
        #[serde(default)]
        amps: Option<Vec<f64>>,
    },
    /// prod_j sin(freq x_j) sin(freq xi_j)
    Trig {
        freq: f64,
        #[serde(default)]
        amps: Option<Vec<f64>>,
    },
    /// a(x, xi) = prod_j profile(x_j)
    Multiplication {
        profile: Profile,
        #[serde(default)]
        amps: Option<Vec<f64>>,
    },
    /// a(x, xi) = prod_j profile(xi_j)
    Multiplier {
        profile: Profile,
        #[serde(default)]
        amps: Option<Vec<f64>>,
    },
    /// a(x, xi) = prod_i profile((x + J xi)_i), J skew-symmetric
    ShearPlus {
        profile: Profile,
        j: Vec<Vec<f64>>,
        #[serde(default)]
        amps: Option<Vec<f64>>,
    },
    /// b(x, xi) = prod_i profile((x - J xi)_i)
    ShearMinus {
        profile: Profile,
        j: Vec<Vec<f64>>,
        #[serde(default)]
        amps: Option<Vec<f64>>,
    },
}

pub const SKEW_TOL: f64 = 1e-12;

fn check_skew(j: &[Vec<f64>], n: usize) -> Result<()> {
    if j.len() != n || j.iter().any(|r| r.len() != n) {
        return Err(CordesError::InvalidParam(format!(
            "skew matrix must be {n}x{n}"
        )));
    }
    for a in 0..n {
        for b in 0..n {
            if (j[a][b] + j[b][a]).abs() > SKEW_TOL {
                return Err(CordesError::InvalidParam(
                    "matrix J must be skew-symmetric".into(),
                ));
            }
        }
    }
    Ok(())
}

fn fiber_amps(amps: &Option<Vec<f64>>, base: f64, m: usize) -> Result<Vec<Complex64>> {
    match amps {
        None => Ok(vec![Complex64::new(base, 0.0); m]),
        Some(v) => {
            if v.len() != m {
                return Err(CordesError::FiberMismatch(format!(
                    "{} amplitudes for {} fibers",
                    v.len(),
                    m
                )));
            }
            Ok(v.iter().map(|a| Complex64::new(base * a, 0.0)).collect())
        }
    }
}

impl SymbolFamily {
    /// Build the analytic descriptor for a given dimension and fiber count.
    pub fn descriptor(&self, n: usize, m: usize) -> Result<Descriptor> {
        let unit = |idx: usize| -> Vec<f64> {
            let mut r = vec![0.0; 2 * n];
            r[idx] = 1.0;
            r
        };
        match self {
            SymbolFamily::Constant { value, amps } => Descriptor::new(
                n,
                vec![],
                vec![],
                vec![],
                fiber_amps(amps, *value, m)?,
            ),
            SymbolFamily::Gaussian { width, amps } => {
                if !(*width > 0.0) {
                    return Err(CordesError::InvalidParam(
                        "gaussian width must be positive".into(),
                    ));
                }
                let factors: Vec<Factor> = (0..2 * n)
                    .map(|_| Factor::PolyGauss {
                        coeffs: vec![1.0],
                        center: 0.0,
                        width: *width,
                    })
                    .collect();
                let coords: Vec<Vec<f64>> = (0..2 * n).map(unit).collect();
                Descriptor::new(n, factors, coords, vec![0.0; 2 * n], fiber_amps(amps, 1.0, m)?)
            }
            SymbolFamily::Trig { freq, amps } => {
                if !freq.is_finite() || *freq == 0.0 {
                    return Err(CordesError::InvalidParam(
                        "trig frequency must be nonzero".into(),
                    ));
                }
                let factors: Vec<Factor> =
                    (0..2 * n).map(|_| Factor::Sin { freq: *freq }).collect();
                let coords: Vec<Vec<f64>> = (0..2 * n).map(unit).collect();
                Descriptor::new(n, factors, coords, vec![0.0; 2 * n], fiber_amps(amps, 1.0, m)?)
            }
            SymbolFamily::Multiplication { profile, amps } => {
                let mut factors = Vec::new();
                let mut coords = Vec::new();
                for axis in 0..n {
                    if let Some(f) = profile.factor()? {
                        factors.push(f);
                        coords.push(unit(axis));
                    }
                }
                let k = factors.len();
                Descriptor::new(n, factors, coords, vec![0.0; k], fiber_amps(amps, 1.0, m)?)
            }
            SymbolFamily::Multiplier { profile, amps } => {
                let mut factors = Vec::new();
                let mut coords = Vec::new();
                for axis in 0..n {
                    if let Some(f) = profile.factor()? {
                        factors.push(f);
                        coords.push(unit(n + axis));
                    }
                }
                let k = factors.len();
                Descriptor::new(n, factors, coords, vec![0.0; k], fiber_amps(amps, 1.0, m)?)
            }
            SymbolFamily::ShearPlus { profile, j, amps }
            | SymbolFamily::ShearMinus { profile, j, amps } => {
                check_skew(j, n)?;
                let sign = if matches!(self, SymbolFamily::ShearPlus { .. }) {
                    1.0
                } else {
                    -1.0
                };
                let mut factors = Vec::new();
                let mut coords = Vec::new();
                for i in 0..n {
                    if let Some(f) = profile.factor()? {
                        factors.push(f);
                        // y_i = x_i + sign * sum_k J[i][k] xi_k
                        let mut row = vec![0.0; 2 * n];
                        row[i] = 1.0;
                        for k in 0..n {
                            row[n + k] = sign * j[i][k];
                        }
                        coords.push(row);
                    }
                }
                let k = factors.len();
                Descriptor::new(n, factors, coords, vec![0.0; k], fiber_amps(amps, 1.0, m)?)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// sampled symbols

/// Fiber-indexed complex samples of a(x,xi) on the phase-space product grid,
/// rows indexed by the flattened x node, columns by the flattened xi node.
#[derive(Debug, Clone)]
pub struct Symbol {
    pub fibers: FiberSet,
    pub grid: Grid,
    samples: Vec<Array2<Complex64>>,
    pub descriptor: Option<Descriptor>,
    /// Family spec retained for save/load manifests when untransformed.
    pub family: Option<SymbolFamily>,
}

impl Symbol {
    pub fn from_samples(
        fibers: FiberSet,
        grid: Grid,
        samples: Vec<Array2<Complex64>>,
    ) -> Result<Self> {
        let nn = grid.total_nodes();
        if samples.len() != fibers.len() {
            return Err(CordesError::FiberMismatch(format!(
                "{} sample blocks for {} fibers",
                samples.len(),
                fibers.len()
            )));
        }
        for s in &samples {
            if s.dim() != (nn, nn) {
                return Err(CordesError::GridMismatch(format!(
                    "sample block shape {:?} != ({nn},{nn})",
                    s.dim()
                )));
            }
            if s.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(CordesError::InvalidParam(
                    "non-finite symbol sample".into(),
                ));
            }
        }
        Ok(Symbol {
            fibers,
            grid,
            samples,
            descriptor: None,
            family: None,
        })
    }

    pub fn samples(&self) -> &[Array2<Complex64>] {
        &self.samples
    }

    /// Phase-space point of a (row, col) sample index.
    pub fn point(grid: &Grid, row: usize, col: usize) -> Vec<f64> {
        let n = grid.dim();
        let xp = grid.position_point(row);
        let fp = grid.freq_point(col);
        let mut w = Vec::with_capacity(2 * n);
        w.extend_from_slice(&xp[..n]);
        w.extend_from_slice(&fp[..n]);
        w
    }

    /// Sup of |samples| over nodes and fibers.
    pub fn sup_abs(&self) -> f64 {
        self.samples
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn check_compatible(&self, other: &Symbol) -> Result<()> {
        self.grid.check_same(&other.grid, "symbols")?;
        self.fibers.check_same(&other.fibers, "symbols")
    }

    /// Pointwise sum; the result carries no descriptor.
    pub fn add(&self, other: &Symbol) -> Result<Symbol> {
        self.check_compatible(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a + b)
            .collect();
        Symbol::from_samples(self.fibers.clone(), self.grid.clone(), samples)
    }

    pub fn scale(&self, s: Complex64) -> Symbol {
        let samples = self.samples.iter().map(|a| a.mapv(|v| v * s)).collect();
        Symbol {
            fibers: self.fibers.clone(),
            grid: self.grid.clone(),
            samples,
            descriptor: None,
            family: None,
        }
    }
}

fn sample_descriptor(desc: &Descriptor, grid: &Grid, fibers: &FiberSet) -> Vec<Array2<Complex64>> {
    let nn = grid.total_nodes();
    let mut base = Array2::zeros((nn, nn));
    let mut scratch = EvalScratch::default();
    for row in 0..nn {
        for col in 0..nn {
            let w = Symbol::point(grid, row, col);
            base[[row, col]] = desc.eval_base_scratch(&w, &mut scratch);
        }
    }
    (0..fibers.len())
        .map(|i| base.mapv(|v| v * desc.amps()[i]))
        .collect()
}

/// Instantiate a closed-form family on the grid with the descriptor attached.
pub fn sample_family(family: &SymbolFamily, grid: &Grid, fibers: &FiberSet) -> Result<Symbol> {
    let desc = family.descriptor(grid.dim(), fibers.len())?;
    let samples = sample_descriptor(&desc, grid, fibers);
    let mut sym = Symbol::from_samples(fibers.clone(), grid.clone(), samples)?;
    sym.descriptor = Some(desc);
    sym.family = Some(family.clone());
    Ok(sym)
}

const GRID_ALIGN_TOL: f64 = 1e-9;

fn aligned_steps(value: f64, step: f64, what: &str) -> Result<i64> {
    let r = value / step;
    let rounded = r.round();
    if (r - rounded).abs() > GRID_ALIGN_TOL {
        return Err(CordesError::InvalidParam(format!(
            "{what} shift {value} is not grid-aligned (step {step})"
        )));
    }
    Ok(rounded as i64)
}

/// Samples of (x, xi) -> a(x + z, xi + zeta). Analytic resampling when a
/// descriptor exists, circular index shift otherwise (grid-aligned only).
pub fn shift_symbol(a: &Symbol, z: &[f64], zeta: &[f64]) -> Result<Symbol> {
    let n = a.grid.dim();
    if z.len() != n || zeta.len() != n {
        return Err(CordesError::InvalidParam(
            "shift vectors must have length n".into(),
        ));
    }
    if let Some(desc) = &a.descriptor {
        let shifted = desc.shifted(z, zeta);
        let samples = sample_descriptor(&shifted, &a.grid, &a.fibers);
        let mut sym = Symbol::from_samples(a.fibers.clone(), a.grid.clone(), samples)?;
        sym.descriptor = Some(shifted);
        return Ok(sym);
    }
    let nper = a.grid.per_axis();
    let h = a.grid.spacing();
    let dxi = a.grid.freq_spacing();
    let zsteps: Vec<i64> = z
        .iter()
        .map(|v| aligned_steps(*v, h, "position"))
        .collect::<Result<_>>()?;
    let zsteps_xi: Vec<i64> = zeta
        .iter()
        .map(|v| aligned_steps(*v, dxi, "frequency"))
        .collect::<Result<_>>()?;
    let shift_flat = |flat: usize, steps: &[i64]| -> usize {
        let mut out = 0usize;
        let mut rem = flat;
        let mut axes = vec![0usize; n];
        for an in (0..n).rev() {
            axes[an] = rem % nper;
            rem /= nper;
        }
        for an in 0..n {
            let s =
                ((axes[an] as i64 + steps[an]).rem_euclid(nper as i64)) as usize;
            out = out * nper + s;
        }
        out
    };
    let nn = a.grid.total_nodes();
    let samples = a
        .samples
        .iter()
        .map(|block| {
            let mut out = Array2::zeros((nn, nn));
            for row in 0..nn {
                let srow = shift_flat(row, &zsteps);
                for col in 0..nn {
                    let scol = shift_flat(col, &zsteps_xi);
                    out[[row, col]] = block[[srow, scol]];
                }
            }
            out
        })
        .collect();
    Symbol::from_samples(a.fibers.clone(), a.grid.clone(), samples)
}

// ---------------------------------------------------------------------------
// spectral differentiation

/// Apply a per-bin multiplier along one of the 2n phase-space axes of a
/// sample block (periodic extension). Axis t < n is a position axis, t >= n
/// a frequency axis; the dual wavenumber spacing follows from the grid
/// pairing.
fn spectral_axis_multiplier<F: Fn(f64) -> Complex64>(
    block: &mut Array2<Complex64>,
    grid: &Grid,
    axis: usize,
    mult: F,
) {
    let n = grid.dim();
    let nper = grid.per_axis();
    let total_axes = 2 * n;
    // flatten block into one slice with axes [x_0..x_{n-1}, xi_0..xi_{n-1}]
    let strides: Vec<usize> = (0..total_axes)
        .map(|t| nper.pow((total_axes - 1 - t) as u32))
        .collect();
    let period = if axis < n {
        2.0 * grid.half_width()
    } else {
        nper as f64 * grid.freq_spacing()
    };
    let wavenum_step = 2.0 * std::f64::consts::PI / period;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nper);
    let inv = planner.plan_fft_inverse(nper);
    let stride = strides[axis];
    let total = nper.pow(total_axes as u32);
    let slice = block.as_slice_mut().expect("contiguous block");
    let mut buf = vec![Complex64::default(); nper];
    let lines = total / nper;
    for line in 0..lines {
        // base index: distribute `line` over all axes except `axis`
        let mut rem = line;
        let mut base = 0usize;
        for t in (0..total_axes).rev() {
            if t == axis {
                continue;
            }
            let idx = rem % nper;
            rem /= nper;
            base += idx * strides[t];
        }
        for j in 0..nper {
            buf[j] = slice[base + j * stride];
        }
        fwd.process(&mut buf);
        for (m, v) in buf.iter_mut().enumerate() {
            let signed = if m <= nper / 2 {
                m as isize
            } else {
                m as isize - nper as isize
            };
            // Nyquist bin gets the symmetric (zero-imaginary-derivative)
            // treatment through the multiplier argument
            let k = if m == nper / 2 { 0.0 } else { signed as f64 * wavenum_step };
            *v *= mult(k);
        }
        inv.process(&mut buf);
        let scale = 1.0 / nper as f64;
        for j in 0..nper {
            slice[base + j * stride] = buf[j] * scale;
        }
    }
}

/// Spectral partial derivative along one phase-space axis.
pub fn spectral_derivative(a: &Symbol, axis: usize) -> Result<Symbol> {
    if axis >= 2 * a.grid.dim() {
        return Err(CordesError::InvalidParam(format!(
            "axis {axis} out of range for 2n = {}",
            2 * a.grid.dim()
        )));
    }
    let samples = a
        .samples
        .iter()
        .map(|b| {
            let mut out = b.clone();
            spectral_axis_multiplier(&mut out, &a.grid, axis, |k| Complex64::new(0.0, k));
            out
        })
        .collect();
    Symbol::from_samples(a.fibers.clone(), a.grid.clone(), samples)
}

// ---------------------------------------------------------------------------
// seminorms and smoothing

/// All multi-indices alpha, beta <= (1,..,1): iterate over subsets of the 2n
/// axes, returning the exponent vector on w.
fn cv_multi_indices(n: usize) -> Vec<Vec<u8>> {
    let bits = 2 * n;
    (0..(1usize << bits))
        .map(|mask| (0..bits).map(|b| ((mask >> b) & 1) as u8).collect())
        .collect()
}

/// Calderon-Vaillancourt seminorm: sup over nodes, fibers, and mixed
/// derivative orders <= (1,..,1) in x and xi.
pub fn cv_seminorm(a: &Symbol) -> f64 {
    let n = a.grid.dim();
    let nn = a.grid.total_nodes();
    let mut sup = 0.0f64;
    if let Some(desc) = &a.descriptor {
        let amp_max = desc.amps().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut scratch = EvalScratch::default();
        for orders in cv_multi_indices(n) {
            let op = DiffPoly::mixed_partial(2 * n, &orders);
            let d = desc.with_applied(&op);
            for row in 0..nn {
                for col in 0..nn {
                    let w = Symbol::point(&a.grid, row, col);
                    sup = sup.max(d.eval_base_scratch(&w, &mut scratch).norm() * amp_max);
                }
            }
        }
        return sup;
    }
    for orders in cv_multi_indices(n) {
        let mut blocks: Vec<Array2<Complex64>> = a.samples.to_vec();
        for (axis, ord) in orders.iter().enumerate() {
            for _ in 0..*ord {
                for b in blocks.iter_mut() {
                    spectral_axis_multiplier(b, &a.grid, axis, |k| Complex64::new(0.0, k));
                }
            }
        }
        for b in &blocks {
            for v in b.iter() {
                sup = sup.max(v.norm());
            }
        }
    }
    sup
}

/// b = prod_j (1+d_{x_j})^2 (1+d_{xi_j})^2 a. Analytic for descriptor
/// symbols (the output keeps the derived descriptor); spectral per-axis
/// multiplier (1+ik)^2 otherwise.
pub fn smoothing_image(a: &Symbol) -> Result<Symbol> {
    let n = a.grid.dim();
    if let Some(desc) = &a.descriptor {
        let smoothed = desc.with_applied(&DiffPoly::smoothing(n));
        let samples = sample_descriptor(&smoothed, &a.grid, &a.fibers);
        let mut sym = Symbol::from_samples(a.fibers.clone(), a.grid.clone(), samples)?;
        sym.descriptor = Some(smoothed);
        return Ok(sym);
    }
    let samples = a
        .samples
        .iter()
        .map(|b| {
            let mut out = b.clone();
            for axis in 0..2 * n {
                spectral_axis_multiplier(&mut out, &a.grid, axis, |k| {
                    let z = Complex64::new(1.0, k);
                    z * z
                });
            }
            out
        })
        .collect();
    Symbol::from_samples(a.fibers.clone(), a.grid.clone(), samples)
}
