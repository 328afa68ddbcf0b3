//! Fiber-indexed vectors over a sampled compact base space: the dense
//! Schwartz-class subspace of the Hilbert module, with the C(Omega)-valued
//! inner product, module norm, scalar embedding, fiber evaluation, and
//! tensor products.

use crate::error::{CordesError, Result};
use crate::grid::{quad, Grid, SampledFn, Side};
use ndarray::Array1;
use num_complex::Complex64;

/// Roundoff clamp for <f,f> entries slightly below zero.
const POSITIVITY_SLACK: f64 = 1e-14;

/// Finite sample of the compact space Omega; m = 1 recovers the scalar case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiberSet {
    labels: Vec<String>,
}

impl FiberSet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(CordesError::InvalidParam(
                "fiber set needs at least one label".into(),
            ));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[i + 1..].contains(a) {
                return Err(CordesError::InvalidParam(format!(
                    "duplicate fiber label `{a}`"
                )));
            }
        }
        Ok(FiberSet { labels })
    }

    pub fn scalar() -> Self {
        FiberSet {
            labels: vec!["*".to_string()],
        }
    }

    /// m labels "f0".."f{m-1}".
    pub fn numbered(m: usize) -> Result<Self> {
        FiberSet::new((0..m).map(|i| format!("f{i}")).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| CordesError::UnknownFiber(label.to_string()))
    }

    pub fn check_same(&self, other: &FiberSet, what: &str) -> Result<()> {
        if self != other {
            return Err(CordesError::FiberMismatch(what.to_string()));
        }
        Ok(())
    }
}

/// Position-side sampled function with one slice per fiber.
#[derive(Debug, Clone)]
pub struct ModuleVec {
    pub fibers: FiberSet,
    pub grid: Grid,
    slices: Vec<Array1<Complex64>>,
}

impl ModuleVec {
    pub fn new(fibers: FiberSet, grid: Grid, slices: Vec<Array1<Complex64>>) -> Result<Self> {
        if slices.len() != fibers.len() {
            return Err(CordesError::FiberMismatch(format!(
                "{} slices for {} fibers",
                slices.len(),
                fibers.len()
            )));
        }
        for s in &slices {
            if s.len() != grid.total_nodes() {
                return Err(CordesError::GridMismatch(format!(
                    "slice length {} != N^n = {}",
                    s.len(),
                    grid.total_nodes()
                )));
            }
        }
        Ok(ModuleVec {
            fibers,
            grid,
            slices,
        })
    }

    pub fn zero(fibers: FiberSet, grid: Grid) -> Self {
        let len = grid.total_nodes();
        let m = fibers.len();
        ModuleVec {
            fibers,
            grid,
            slices: vec![Array1::zeros(len); m],
        }
    }

    pub fn slices(&self) -> &[Array1<Complex64>] {
        &self.slices
    }

    pub fn slices_mut(&mut self) -> &mut [Array1<Complex64>] {
        &mut self.slices
    }

    pub fn map_slices<F: FnMut(usize, &Array1<Complex64>) -> Array1<Complex64>>(
        &self,
        mut f: F,
    ) -> ModuleVec {
        ModuleVec {
            fibers: self.fibers.clone(),
            grid: self.grid.clone(),
            slices: self
                .slices
                .iter()
                .enumerate()
                .map(|(i, s)| f(i, s))
                .collect(),
        }
    }

    pub fn check_compatible(&self, other: &ModuleVec) -> Result<()> {
        self.grid.check_same(&other.grid, "module vectors")?;
        self.fibers.check_same(&other.fibers, "module vectors")
    }
}

/// The C(Omega)-valued inner product sampled at each fiber:
/// entry lambda = integral of conj(f_lambda) g_lambda.
pub fn cstar_inner(f: &ModuleVec, g: &ModuleVec) -> Result<Vec<Complex64>> {
    f.check_compatible(g)?;
    let w = f.grid.spacing().powi(f.grid.dim() as i32);
    let out = f
        .slices
        .iter()
        .zip(&g.slices)
        .map(|(a, b)| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.conj() * y)
                .sum::<Complex64>()
                * w
        })
        .collect();
    Ok(out)
}

/// C*-norm of <f,f>: max over fibers of sqrt(Re<f,f>(lambda)).
pub fn module_norm(f: &ModuleVec) -> Result<f64> {
    let diag = cstar_inner(f, f)?;
    let mut m = 0.0f64;
    for v in diag {
        let mut re = v.re;
        if re < 0.0 {
            if re < -POSITIVITY_SLACK {
                return Err(CordesError::Numerical(format!(
                    "negative <f,f> entry {re:e}"
                )));
            }
            re = 0.0;
        }
        m = m.max(re.sqrt());
    }
    Ok(m)
}

/// Embed a scalar function as the constant-in-lambda module vector.
pub fn embed_scalar(u: &SampledFn, fibers: &FiberSet) -> Result<ModuleVec> {
    if u.side != Side::Position {
        return Err(CordesError::SideMismatch {
            expected: "position",
            got: u.side.name(),
        });
    }
    let m = fibers.len();
    ModuleVec::new(
        fibers.clone(),
        u.grid.clone(),
        vec![u.values.clone(); m],
    )
}

/// Evaluation V_lambda: the lambda-slice as a scalar function.
pub fn eval_fiber(f: &ModuleVec, label: &str) -> Result<SampledFn> {
    let i = f.fibers.index_of(label)?;
    SampledFn::new(f.grid.clone(), Side::Position, f.slices[i].clone())
}

/// Tensor product (f (x) g)(x,y) = f(x) g(y), slicewise; two 1-axis inputs
/// produce a vector on the 2-axis grid with the same axis parameters.
pub fn tensor(f: &ModuleVec, g: &ModuleVec) -> Result<ModuleVec> {
    f.check_compatible(g)?;
    if f.grid.dim() != 1 {
        return Err(CordesError::InvalidParam(
            "tensor expects 1-axis inputs".into(),
        ));
    }
    let n_axis = f.grid.per_axis();
    let grid2 = Grid::new(2, n_axis, f.grid.half_width())?;
    let slices = f
        .slices
        .iter()
        .zip(&g.slices)
        .map(|(a, b)| {
            let mut out = Array1::zeros(n_axis * n_axis);
            for j in 0..n_axis {
                for k in 0..n_axis {
                    out[j * n_axis + k] = a[j] * b[k];
                }
            }
            out
        })
        .collect();
    ModuleVec::new(f.fibers.clone(), grid2, slices)
}

/// Per-fiber scalar quadrature, used by tests as the slice-wise oracle.
pub fn fiber_quad(f: &ModuleVec) -> Vec<Complex64> {
    f.slices
        .iter()
        .map(|s| {
            quad(&SampledFn {
                grid: f.grid.clone(),
                side: Side::Position,
                values: s.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{test_function, TestFunction};

    fn gaussian(grid: &Grid) -> SampledFn {
        test_function(
            &TestFunction::Gaussian {
                center: vec![0.0],
                width: 1.0,
            },
            grid,
        )
        .unwrap()
    }

    fn setup() -> (Grid, FiberSet, SampledFn) {
        let grid = Grid::new(1, 128, 8.0).unwrap();
        let fibers = FiberSet::numbered(3).unwrap();
        let u = gaussian(&grid);
        (grid, fibers, u)
    }

    /// Slices (u, 2u, 0).
    fn staircase(grid: &Grid, fibers: &FiberSet, u: &SampledFn) -> ModuleVec {
        ModuleVec::new(
            fibers.clone(),
            grid.clone(),
            vec![
                u.values.clone(),
                u.values.mapv(|v| v * 2.0),
                Array1::zeros(u.values.len()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn inner_of_embedded_gaussian() {
        let (_, fibers, u) = setup();
        let f = embed_scalar(&u, &fibers).unwrap();
        let inner = cstar_inner(&f, &f).unwrap();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert_eq!(inner.len(), 3);
        for v in inner {
            assert!((v.re - sqrt_pi).abs() <= 1e-12);
            assert!(v.im.abs() <= 1e-14);
        }
    }

    #[test]
    fn inner_odd_symmetry() {
        let (grid, fibers, u) = setup();
        let h1 = test_function(
            &TestFunction::Hermite {
                k: 1,
                center: vec![0.0],
                width: 1.0,
            },
            &grid,
        )
        .unwrap();
        let f = embed_scalar(&u, &fibers).unwrap();
        let g = embed_scalar(&h1, &fibers).unwrap();
        for v in cstar_inner(&f, &g).unwrap() {
            assert!(v.norm() <= 1e-14);
        }
    }

    #[test]
    fn inner_staircase() {
        let (grid, fibers, u) = setup();
        let f = staircase(&grid, &fibers, &u);
        let inner = cstar_inner(&f, &f).unwrap();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((inner[0].re - sqrt_pi).abs() <= 1e-12);
        assert!((inner[1].re - 4.0 * sqrt_pi).abs() <= 1e-12);
        assert!(inner[2].norm() <= 1e-15);
    }

    #[test]
    fn module_norm_staircase() {
        let (grid, fibers, u) = setup();
        let f = staircase(&grid, &fibers, &u);
        let expect = 2.0 * std::f64::consts::PI.powf(0.25);
        assert!((module_norm(&f).unwrap() - expect).abs() <= 1e-10);
    }

    #[test]
    fn module_norm_embedded_and_zero() {
        let (grid, fibers, u) = setup();
        let f = embed_scalar(&u, &fibers).unwrap();
        let expect = std::f64::consts::PI.powf(0.25);
        assert!((module_norm(&f).unwrap() - expect).abs() <= 1e-10);
        assert_eq!(
            module_norm(&ModuleVec::zero(fibers, grid)).unwrap(),
            0.0
        );
    }

    #[test]
    fn embed_eval_round_trip() {
        let (_, fibers, u) = setup();
        let f = embed_scalar(&u, &fibers).unwrap();
        let back = eval_fiber(&f, "f1").unwrap();
        assert_eq!(back.values, u.values);
    }

    #[test]
    fn eval_fiber_staircase_and_missing() {
        let (grid, fibers, u) = setup();
        let f = staircase(&grid, &fibers, &u);
        let second = eval_fiber(&f, "f1").unwrap();
        assert_eq!(second.values, u.values.mapv(|v| v * 2.0));
        assert!(matches!(
            eval_fiber(&f, "missing"),
            Err(CordesError::UnknownFiber(_))
        ));
    }

    #[test]
    fn eval_fiber_contractive() {
        let (grid, fibers, u) = setup();
        let f = staircase(&grid, &fibers, &u);
        let norm = module_norm(&f).unwrap();
        for label in fibers.labels() {
            let slice = eval_fiber(&f, label).unwrap();
            assert!(slice.l2_norm() <= norm + 1e-12);
        }
        drop(grid);
    }

    #[test]
    fn tensor_gaussian() {
        let grid = Grid::new(1, 32, 8.0).unwrap();
        let fibers = FiberSet::numbered(2).unwrap();
        let u = gaussian(&grid);
        let f = embed_scalar(&u, &fibers).unwrap();
        let t = tensor(&f, &f).unwrap();
        assert_eq!(t.grid.dim(), 2);
        let n = 32;
        for j in (0..n).step_by(7) {
            for k in (0..n).step_by(5) {
                let x = grid.position_node(j);
                let y = grid.position_node(k);
                let expect = (-(x * x + y * y) / 2.0).exp();
                assert!((t.slices()[0][j * n + k].re - expect).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn tensor_with_zero() {
        let grid = Grid::new(1, 32, 8.0).unwrap();
        let fibers = FiberSet::numbered(2).unwrap();
        let u = gaussian(&grid);
        let f = embed_scalar(&u, &fibers).unwrap();
        let z = ModuleVec::zero(fibers, grid);
        let t = tensor(&f, &z).unwrap();
        assert!(t.slices().iter().all(|s| s.iter().all(|v| v.norm() == 0.0)));
    }

    #[test]
    fn tensor_inner_factorizes() {
        let grid = Grid::new(1, 64, 8.0).unwrap();
        let fibers = FiberSet::numbered(2).unwrap();
        let u = gaussian(&grid);
        let h = test_function(
            &TestFunction::Hermite {
                k: 2,
                center: vec![0.0],
                width: 1.0,
            },
            &grid,
        )
        .unwrap();
        let f = embed_scalar(&u, &fibers).unwrap();
        let g = embed_scalar(&h, &fibers).unwrap();
        let t = tensor(&f, &g).unwrap();
        let lhs = cstar_inner(&t, &t).unwrap();
        let ff = cstar_inner(&f, &f).unwrap();
        let gg = cstar_inner(&g, &g).unwrap();
        for i in 0..2 {
            let expect = ff[i] * gg[i];
            assert!((lhs[i] - expect).norm() <= 1e-10 * expect.norm());
        }
    }

    #[test]
    fn cauchy_schwarz_per_fiber() {
        use rand::prelude::*;
        let grid = Grid::new(1, 64, 8.0).unwrap();
        let fibers = FiberSet::numbered(3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut random_vec = || {
            let slices = (0..3)
                .map(|_| {
                    Array1::from_iter((0..64).map(|j| {
                        // Gaussian envelope keeps things effectively supported.
                        let x = grid.position_node(j);
                        let env = (-x * x / 4.0).exp();
                        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * env
                    }))
                })
                .collect();
            ModuleVec::new(fibers.clone(), grid.clone(), slices).unwrap()
        };
        for _ in 0..20 {
            let f = random_vec();
            let g = random_vec();
            let fg = cstar_inner(&f, &g).unwrap();
            let ff = cstar_inner(&f, &f).unwrap();
            let gg = cstar_inner(&g, &g).unwrap();
            for i in 0..3 {
                assert!(fg[i].norm_sqr() <= ff[i].re * gg[i].re + 1e-12);
            }
        }
    }

    #[test]
    fn inner_sesquilinearity() {
        use rand::prelude::*;
        let grid = Grid::new(1, 32, 8.0).unwrap();
        let fibers = FiberSet::numbered(2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut rv = || {
            let slices = (0..2)
                .map(|_| {
                    Array1::from_iter(
                        (0..32).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)),
                    )
                })
                .collect();
            ModuleVec::new(fibers.clone(), grid.clone(), slices).unwrap()
        };
        let (f, g, h) = (rv(), rv(), rv());
        let alpha = Complex64::new(0.3, -1.1);
        // linear in second argument
        let g_plus = g.map_slices(|i, s| s + &h.slices()[i].mapv(|v| v * alpha));
        let lhs = cstar_inner(&f, &g_plus).unwrap();
        let fg = cstar_inner(&f, &g).unwrap();
        let fh = cstar_inner(&f, &h).unwrap();
        for i in 0..2 {
            assert!((lhs[i] - (fg[i] + alpha * fh[i])).norm() <= 1e-12);
        }
        // conjugate-linear in first argument
        let f_scaled = f.map_slices(|_, s| s.mapv(|v| v * alpha));
        let lhs2 = cstar_inner(&f_scaled, &g).unwrap();
        for i in 0..2 {
            assert!((lhs2[i] - alpha.conj() * fg[i]).norm() <= 1e-12);
        }
    }

    #[test]
    fn fiber_set_validation() {
        assert!(FiberSet::new(vec![]).is_err());
        assert!(FiberSet::new(vec!["a".into(), "a".into()]).is_err());
        assert_eq!(FiberSet::scalar().len(), 1);
    }
}
