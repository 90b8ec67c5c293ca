//! Running a subcommand from a key = value configuration.

use grazing_spectral::config::{Command, RunConfig};
use grazing_spectral::error::Result;
use grazing_spectral::experiments::run;

const CONFIG: &str = "
# cutoff kernel at desk scale
kind = cutoff
gamma = 0
n = 2
seed = 11
";

fn main() -> Result<()> {
    let mut cfg = RunConfig::from_text(CONFIG)?;
    cfg.out = std::env::temp_dir().join("grazing_config_run");
    println!("config hash {}", cfg.hash());
    let outcome = run(Command::Validate, &cfg)?;
    print!("{}", outcome.summary);
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
