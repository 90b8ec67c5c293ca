//! Relaxation of two Maxwellians under the FPL operator.

use grazing_spectral::boltzmann_modes::QuadratureSpec;
use grazing_spectral::error::Result;
use grazing_spectral::grazing_fpl_modes::{build_split_kernel, FplKernel, SplitSource};
use grazing_spectral::grid::GridConfig;
use grazing_spectral::spectral_core::{relax, suggest_dt, Evaluator, InitialCondition, Maxwellian, RelaxSettings, DEFAULT_BLOWUP_BOUND};

fn main() -> Result<()> {
    let grid = GridConfig::new(8)?;
    let fk = FplKernel::new(0.0, 1.0)?;
    let split = build_split_kernel(SplitSource::Fpl(&fk), &grid, &QuadratureSpec::for_grid(&grid))?;

    let half = |u: f64| Maxwellian { density: 0.5, velocity: [u, 0.0, 0.0], temperature: 0.06 };
    let n_grid = 2 * grid.side();
    let f0 = InitialCondition::SumOfTwoMaxwellians(half(0.35), half(-0.35)).project(&grid, n_grid)?;

    let eval = Evaluator::fast(&split);
    let dt = suggest_dt(&f0, &eval)?;
    let settings = RelaxSettings { t_end: 1.0, dt, n_grid, record_every: 25, blowup_bound: DEFAULT_BLOWUP_BOUND };
    println!("dt = {dt:.3e}");
    println!("     t        mass      energy    L2 distance");
    for r in relax(&f0, &eval, &settings)? {
        println!("{:6.3}  {:.8}  {:.6e}  {:.6e}", r.time, r.moments.mass, r.moments.energy, r.distance);
    }
    Ok(())
}
