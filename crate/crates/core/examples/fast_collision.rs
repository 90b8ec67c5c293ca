//! Direct and FFT evaluation of the collision operator on a random state.

use std::time::Instant;

use grazing_spectral::boltzmann_modes::QuadratureSpec;
use grazing_spectral::error::Result;
use grazing_spectral::grazing_fpl_modes::{build_split_kernel, FplKernel, SplitSource};
use grazing_spectral::grid::GridConfig;
use grazing_spectral::spectral_core::{collision_direct, random_hermitian, FastEvaluator};

fn main() -> Result<()> {
    let fk = FplKernel::new(0.0, 1.0)?;
    for n in [4, 6, 8] {
        let grid = GridConfig::new(n)?;
        let split = build_split_kernel(SplitSource::Fpl(&fk), &grid, &QuadratureSpec::for_grid(&grid))?;
        let state = random_hermitian(&grid, 7);
        let fast = FastEvaluator::new(&split);

        let t = Instant::now();
        let d = collision_direct(&state, &split)?;
        let td = t.elapsed();
        let t = Instant::now();
        let f = fast.apply(&state)?;
        let tf = t.elapsed();

        let scale = d.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let err = d.iter().zip(&f).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale;
        println!("N = {n}: direct {td:>10.3?}  fast {tf:>10.3?} (padding {})  relative difference {err:.2e}", fast.padded_size());
    }
    Ok(())
}
