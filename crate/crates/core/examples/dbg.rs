use cordes_core::grid::Grid;
use cordes_core::module_space::FiberSet;
use cordes_core::quantize::quantize;
use cordes_core::recover::{recover_symbol, RecoveryParams};
use cordes_core::symbols::{sample_family, SymbolFamily};

fn main() {
    let grid = Grid::new(1, 256, 16.0).unwrap();
    let freq = std::f64::consts::PI / grid.half_width() * 5.0;
    let a = sample_family(
        &SymbolFamily::Trig { freq, amps: None },
        &grid,
        &FiberSet::scalar(),
    )
    .unwrap();
    let desc = a.descriptor.clone().unwrap();
    let op = quantize(&a).unwrap();
    let pt = vec![(vec![0.0], vec![0.5])];
    let truth = desc.eval(0, &[0.0, 0.5]);
    for q in [160usize, 320, 640] {
        let params = RecoveryParams {
            t: 16.0,
            w: 16.0,
            qx: q,
            qxi: q,
            qeta: q,
            half_step: true,
            delta: grid.spacing(),
        };
        let vals = recover_symbol(&op, &pt, &params).unwrap();
        println!("Q={q} err {:.4e}", (vals[0][0] - truth).norm());
    }
}
