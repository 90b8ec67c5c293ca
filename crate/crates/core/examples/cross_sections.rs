//! Momentum-transfer integrals of non cut-off kernels and a grazing family.

use grazing_spectral::cross_sections::{lambda, momentum_transfer, validate_grazing_family, CrossSection, FamilyKind, GrazingFamily};
use grazing_spectral::error::Result;
use grazing_spectral::quadrature::Grading;

fn main() -> Result<()> {
    let kernels = [
        ("cutoff, gamma=0", CrossSection::cutoff(0.0)?),
        ("power law, nu=1", CrossSection::power_law(0.0, 1.0)?),
        ("inverse power, s=3", CrossSection::inverse_power(3.0)?),
        ("Maxwell molecules, s=5", CrossSection::inverse_power(5.0)?),
    ];
    for (name, cs) in &kernels {
        println!("{name:<24} Lambda = {:.12}  A(|q|=2) = {:.12}", lambda(cs, &Grading::default())?, momentum_transfer(cs, 2.0)?);
    }

    let fam = GrazingFamily::new(CrossSection::inverse_power(3.0)?, FamilyKind::Rescaled, 0.1)?;
    let report = validate_grazing_family(&fam, &[0.1, 0.05, 0.025, 0.0125], 0.1, 1e-10)?;
    println!("\nrescaled family, s=3, Lambda_0 = {:.12}", fam.lambda0);
    for row in &report.rows {
        println!("eps = {:<7} Lambda_eps = {:.12}  sup b_eps(theta >= 0.1) = {:.3e}", row.epsilon, row.lambda, row.sup_b);
    }
    println!("grazing family valid: {}", report.pass);
    Ok(())
}
