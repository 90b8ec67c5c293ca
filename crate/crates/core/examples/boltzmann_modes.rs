//! Boltzmann kernel modes: table build, symmetries and the VHS reduction.

use grazing_spectral::boltzmann_modes::{build_mode_tensor, compute_mode, compute_mode_cubature, compute_mode_vhs, QuadratureSpec};
use grazing_spectral::cross_sections::CrossSection;
use grazing_spectral::error::Result;
use grazing_spectral::grid::GridConfig;

fn main() -> Result<()> {
    let grid = GridConfig::new(2)?;
    let quad = QuadratureSpec::for_grid(&grid);
    let cs = CrossSection::cutoff(0.0)?;

    let tensor = build_mode_tensor(&cs, &grid, &quad, None)?;
    println!("N = 2: {} symmetry classes for {} pairs", tensor.classes(), grid.len() * grid.len());

    for (l, m) in [([1, 0, 0], [0, 1, 0]), ([2, -1, 0], [0, 1, 1]), ([1, 1, 1], [-1, -1, -1])] {
        let harmonic = compute_mode(&cs, &grid, l, m, &quad)?;
        let cubature = compute_mode_cubature(&cs, &grid, l, m, &quad)?;
        println!("B({l:?}, {m:?}) = {harmonic:+.12}  cubature {:+.12} {:+.1e}i", cubature.re, cubature.im);
    }

    let vhs = CrossSection::vhs(0.0, 1.0)?;
    let (l, m) = ([1, 0, -1], [0, 2, 1]);
    println!(
        "VHS alpha=0: general {:+.12}  reduced {:+.12}",
        compute_mode(&vhs, &grid, l, m, &quad)?,
        compute_mode_vhs(0.0, 1.0, &grid, l, m, &quad)?
    );
    Ok(())
}
