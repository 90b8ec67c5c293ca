//! Fokker-Planck-Landau modes, their split fields and the grazing study.

use grazing_spectral::boltzmann_modes::QuadratureSpec;
use grazing_spectral::config::{KernelKind, RunConfig};
use grazing_spectral::error::Result;
use grazing_spectral::experiments::grazing_study;
use grazing_spectral::grazing_fpl_modes::{build_split_kernel, fpl_mode, fpl_mode_alt, FplKernel, SplitSource};
use grazing_spectral::grid::GridConfig;

fn main() -> Result<()> {
    let grid = GridConfig::new(3)?;
    let quad = QuadratureSpec::for_grid(&grid);
    let fk = FplKernel::new(0.0, 1.0)?;
    let split = build_split_kernel(SplitSource::Fpl(&fk), &grid, &quad)?;
    for (l, m) in [([1, 0, 0], [0, 0, 0]), ([1, -1, 2], [0, 1, -1]), ([3, 0, 0], [-2, 1, 0])] {
        println!(
            "B_L({l:?}, {m:?}) = {:+.12}  alt {:+.12}  split {:+.12}",
            fpl_mode(&fk, &grid, l, m, &quad)?,
            fpl_mode_alt(&fk, &grid, l, m, &quad)?,
            split.mode(l, m)
        );
    }

    let mut cfg = RunConfig::default();
    cfg.kernel.kind = KernelKind::Rescaled;
    cfg.n = 2;
    cfg.samples = 20;
    let study = grazing_study(&cfg)?;
    println!("\neps      max|B_eps-B_L|  max|B_approx-B_eps|  max|B_approx-B_L|");
    for r in &study.rows {
        println!("{:<8} {:.4e}      {:.4e}           {:.4e}", r.epsilon, r.eps_vs_fpl.max, r.approx_vs_eps.max, r.approx_vs_fpl.max);
    }
    println!("log-log slopes: {:.3?}", study.slopes);
    Ok(())
}
