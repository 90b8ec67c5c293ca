//! Plain `key = value` run configuration shared by the CLI and the examples.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are comma
//! separated. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::boltzmann_modes::QuadratureSpec;
use crate::cross_sections::{CrossSection, FamilyKind, GrazingFamily};
use crate::error::{Error, Result};
use crate::grazing_fpl_modes::FplKernel;
use crate::grid::GridConfig;
use crate::spectral_core::{InitialCondition, Maxwellian, DEFAULT_BLOWUP_BOUND};

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Config(format!(
                        "unknown {} '{other}', expected one of {}",
                        stringify!($name),
                        [$($text),+].join("|")
                    ))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

named_enum!(
    /// Experiment subcommands.
    Command {
        Modes => "modes",
        FplModes => "fpl-modes",
        GrazingStudy => "grazing-study",
        Relax => "relax",
        Bench => "bench",
        Validate => "validate",
    }
);

named_enum!(
    /// Kernel kinds readable from a config file.
    KernelKind {
        Cutoff => "cutoff",
        Vhs => "vhs",
        PowerLaw => "power_law",
        InversePower => "inverse_power",
        LogCutoff => "log_cutoff",
        Rescaled => "rescaled",
        Fpl => "fpl",
    }
);

named_enum!(
    /// Which modes drive a relaxation run.
    Model {
        Boltzmann => "boltzmann",
        Approx => "approx",
        Fpl => "fpl",
    }
);

named_enum!(
    /// Collision evaluators requested for a run.
    EvaluatorChoice {
        Direct => "direct",
        Fast => "fast",
        Both => "both",
    }
);

named_enum!(
    /// Built-in initial data.
    InitialKind {
        TruncatedMaxwellian => "truncated_maxwellian",
        SumOfTwoMaxwellians => "sum_of_two_maxwellians",
        SmoothBump => "smooth_bump",
    }
);

/// Kernel description: `kind, gamma, nu, s, c, epsilon, lambda0`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub gamma: f64,
    pub nu: Option<f64>,
    pub s: Option<f64>,
    /// VHS constant C_α.
    pub c: f64,
    pub epsilon: Option<f64>,
    pub lambda0: Option<f64>,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self { kind: KernelKind::Cutoff, gamma: 0.0, nu: None, s: None, c: 1.0, epsilon: None, lambda0: None }
    }
}

impl KernelSpec {
    pub fn is_family(&self) -> bool {
        matches!(self.kind, KernelKind::LogCutoff | KernelKind::Rescaled)
    }

    /// Cross section of a plain kernel, or the base of a family.
    pub fn cross_section(&self) -> Result<CrossSection> {
        match self.kind {
            KernelKind::Cutoff => CrossSection::cutoff(self.gamma),
            KernelKind::Vhs => CrossSection::vhs(self.gamma, self.c),
            KernelKind::PowerLaw => CrossSection::power_law(self.gamma, self.need_nu()?),
            KernelKind::InversePower => CrossSection::inverse_power(self.need_s()?),
            KernelKind::LogCutoff | KernelKind::Rescaled => match (self.s, self.nu) {
                (Some(s), _) => CrossSection::inverse_power(s),
                (None, Some(nu)) => CrossSection::power_law(self.gamma, nu),
                (None, None) => CrossSection::cutoff(self.gamma),
            },
            KernelKind::Fpl => Err(Error::Config("kind=fpl has no Boltzmann cross section".into())),
        }
    }

    /// Grazing family at ε (default: the configured `epsilon`).
    pub fn family(&self, epsilon: Option<f64>) -> Result<GrazingFamily> {
        let kind = match self.kind {
            KernelKind::LogCutoff => FamilyKind::LogCutoff,
            KernelKind::Rescaled => FamilyKind::Rescaled,
            other => return Err(Error::Config(format!("kind={other} is not a grazing family"))),
        };
        let eps = epsilon.or(self.epsilon).ok_or_else(|| Error::Config("grazing family needs epsilon".into()))?;
        let fam = GrazingFamily::new(self.cross_section()?, kind, eps)?;
        Ok(match self.lambda0 {
            Some(l0) => fam.with_lambda0(l0),
            None => fam,
        })
    }

    /// FPL kernel: from `gamma, lambda0` for kind=fpl, otherwise the limit of the family.
    pub fn fpl(&self) -> Result<FplKernel> {
        match self.kind {
            KernelKind::Fpl => FplKernel::new(self.gamma, self.lambda0.unwrap_or(1.0)),
            _ if self.is_family() => FplKernel::from_family(&self.family(Some(self.epsilon.unwrap_or(0.1)))?),
            other => Err(Error::Config(format!("kind={other} has no FPL limit"))),
        }
    }

    fn need_nu(&self) -> Result<f64> {
        self.nu.ok_or_else(|| Error::Config(format!("kind={} needs nu", self.kind)))
    }

    fn need_s(&self) -> Result<f64> {
        self.s.ok_or_else(|| Error::Config(format!("kind={} needs s", self.kind)))
    }
}

/// Optional quadrature overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadOverrides {
    pub rho_scale: Option<f64>,
    pub omega_scale: Option<f64>,
    pub tol: Option<f64>,
    pub extra_degrees: Option<usize>,
    pub n_phi_min: Option<usize>,
    pub check_refinement: Option<bool>,
    pub verify_samples: Option<usize>,
}

impl QuadOverrides {
    pub fn apply(&self, grid: &GridConfig) -> QuadratureSpec {
        let mut q = QuadratureSpec::for_grid(grid);
        if let Some(v) = self.rho_scale {
            q.rho_scale = v;
        }
        if let Some(v) = self.omega_scale {
            q.omega_scale = v;
        }
        if let Some(v) = self.tol {
            q.tol = v;
        }
        if let Some(v) = self.extra_degrees {
            q.extra_degrees = v;
        }
        if let Some(v) = self.n_phi_min {
            q.n_phi_min = v;
        }
        if let Some(v) = self.check_refinement {
            q.check_refinement = v;
        }
        if let Some(v) = self.verify_samples {
            q.verify_samples = v;
        }
        q
    }
}

/// Parameters of the built-in initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSpec {
    pub kind: InitialKind,
    pub mass: f64,
    /// Drift ±u along the first axis (two Maxwellians) or of the single Maxwellian.
    pub u: f64,
    pub temperature: f64,
    /// Bump width as a fraction of the support radius.
    pub width: f64,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self { kind: InitialKind::SumOfTwoMaxwellians, mass: 1.0, u: 0.35, temperature: 0.06, width: 1.0 }
    }
}

impl InitialSpec {
    pub fn condition(&self, grid: &GridConfig) -> InitialCondition {
        let maxwellian = |density: f64, u: f64| Maxwellian { density, velocity: [u, 0.0, 0.0], temperature: self.temperature };
        match self.kind {
            InitialKind::TruncatedMaxwellian => InitialCondition::TruncatedMaxwellian(maxwellian(self.mass, self.u)),
            InitialKind::SumOfTwoMaxwellians => {
                InitialCondition::SumOfTwoMaxwellians(maxwellian(0.5 * self.mass, self.u), maxwellian(0.5 * self.mass, -self.u))
            }
            InitialKind::SmoothBump => InitialCondition::SmoothBump { amplitude: self.mass, width: self.width * grid.radius() },
        }
    }
}

/// Full run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub model: Model,
    pub n: usize,
    pub quad: QuadOverrides,
    pub eps: Vec<f64>,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub n_grid: Option<usize>,
    pub record_every: usize,
    pub blowup_bound: f64,
    pub initial: InitialSpec,
    pub evaluator: EvaluatorChoice,
    pub out: PathBuf,
    pub cache: Option<PathBuf>,
    pub seed: u64,
    /// Random pairs added to the low-mode sample set.
    pub samples: usize,
    /// Low-mode box |l|∞, |m|∞ ≤ sample_box in the sample set.
    pub sample_box: i32,
    pub bench_n: Vec<usize>,
    pub theta1: f64,
    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::default(),
            model: Model::Boltzmann,
            n: 4,
            quad: QuadOverrides::default(),
            eps: vec![0.2, 0.1, 0.05, 0.025],
            t_end: 2.0,
            dt: None,
            n_grid: None,
            record_every: 10,
            blowup_bound: DEFAULT_BLOWUP_BOUND,
            initial: InitialSpec::default(),
            evaluator: EvaluatorChoice::Fast,
            out: PathBuf::from("out"),
            cache: None,
            seed: 2024,
            samples: 50,
            sample_box: 2,
            bench_n: vec![4, 8, 16],
            theta1: 0.1,
            strict: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect()
}

fn fmt_list<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn fmt_opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |x| x.to_string())
}

impl RunConfig {
    /// Parses `key = value` lines over the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Sets one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = &mut self.kernel;
        let q = &mut self.quad;
        match key {
            "kind" => k.kind = parse(key, value)?,
            "gamma" | "alpha" => k.gamma = parse(key, value)?,
            "nu" => k.nu = parse_opt(key, value)?,
            "s" => k.s = parse_opt(key, value)?,
            "c" => k.c = parse(key, value)?,
            "epsilon" => k.epsilon = parse_opt(key, value)?,
            "lambda0" => k.lambda0 = parse_opt(key, value)?,
            "model" => self.model = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "rho_scale" => q.rho_scale = parse_opt(key, value)?,
            "omega_scale" => q.omega_scale = parse_opt(key, value)?,
            "tol" => q.tol = parse_opt(key, value)?,
            "extra_degrees" => q.extra_degrees = parse_opt(key, value)?,
            "n_phi_min" => q.n_phi_min = parse_opt(key, value)?,
            "check_refinement" => q.check_refinement = parse_opt(key, value)?,
            "verify_samples" => q.verify_samples = parse_opt(key, value)?,
            "eps" => self.eps = parse_list(key, value)?,
            "t_end" => self.t_end = parse(key, value)?,
            "dt" => self.dt = parse_opt(key, value)?,
            "n_grid" => self.n_grid = parse_opt(key, value)?,
            "record_every" => self.record_every = parse(key, value)?,
            "blowup_bound" => self.blowup_bound = parse(key, value)?,
            "initial" => self.initial.kind = parse(key, value)?,
            "mass" => self.initial.mass = parse(key, value)?,
            "u" => self.initial.u = parse(key, value)?,
            "temperature" => self.initial.temperature = parse(key, value)?,
            "width" => self.initial.width = parse(key, value)?,
            "evaluator" => self.evaluator = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "cache" => self.cache = Some(PathBuf::from(value)),
            "seed" => self.seed = parse(key, value)?,
            "samples" => self.samples = parse(key, value)?,
            "sample_box" => self.sample_box = parse(key, value)?,
            "bench_n" => self.bench_n = parse_list(key, value)?,
            "theta1" => self.theta1 = parse(key, value)?,
            "strict" => self.strict = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Checks cross-field invariants.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if let Some(w) = self.eps.windows(2).find(|w| !(w[1] < w[0])) {
            return Err(Error::Config(format!("eps list must be strictly decreasing, found {} then {}", w[0], w[1])));
        }
        if self.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Config("eps values must be positive".into()));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::Config(format!("t_end = {} must be nonnegative", self.t_end)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::Config(format!("dt = {dt} must be positive")));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridConfig> {
        GridConfig::new(self.n)
    }

    pub fn quadrature(&self) -> Result<QuadratureSpec> {
        let q = self.quad.apply(&self.grid()?);
        q.validate()?;
        Ok(q)
    }

    /// Sorted `key=value` listing of every effective setting.
    pub fn canonical(&self) -> String {
        let k = &self.kernel;
        let q = &self.quad;
        let i = &self.initial;
        let entries: BTreeMap<&str, String> = [
            ("kind", k.kind.to_string()),
            ("gamma", k.gamma.to_string()),
            ("nu", fmt_opt(&k.nu)),
            ("s", fmt_opt(&k.s)),
            ("c", k.c.to_string()),
            ("epsilon", fmt_opt(&k.epsilon)),
            ("lambda0", fmt_opt(&k.lambda0)),
            ("model", self.model.to_string()),
            ("n", self.n.to_string()),
            ("rho_scale", fmt_opt(&q.rho_scale)),
            ("omega_scale", fmt_opt(&q.omega_scale)),
            ("tol", fmt_opt(&q.tol)),
            ("extra_degrees", fmt_opt(&q.extra_degrees)),
            ("n_phi_min", fmt_opt(&q.n_phi_min)),
            ("check_refinement", fmt_opt(&q.check_refinement)),
            ("verify_samples", fmt_opt(&q.verify_samples)),
            ("eps", fmt_list(&self.eps)),
            ("t_end", self.t_end.to_string()),
            ("dt", fmt_opt(&self.dt)),
            ("n_grid", fmt_opt(&self.n_grid)),
            ("record_every", self.record_every.to_string()),
            ("blowup_bound", self.blowup_bound.to_string()),
            ("initial", i.kind.to_string()),
            ("mass", i.mass.to_string()),
            ("u", i.u.to_string()),
            ("temperature", i.temperature.to_string()),
            ("width", i.width.to_string()),
            ("evaluator", self.evaluator.to_string()),
            ("seed", self.seed.to_string()),
            ("samples", self.samples.to_string()),
            ("sample_box", self.sample_box.to_string()),
            ("bench_n", fmt_list(&self.bench_n)),
            ("theta1", self.theta1.to_string()),
            ("strict", self.strict.to_string()),
        ]
        .into_iter()
        .collect();
        entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// First 16 hex digits of the SHA-256 of [`RunConfig::canonical`].
    /// Output and cache locations are excluded.
    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.canonical().as_bytes());
        d[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_hashes() {
        let text = "# study\nkind = rescaled\ns = 5\neps = 0.2, 0.1, 0.05\nn = 3\n\nevaluator = both\n";
        let cfg = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.kernel.kind, KernelKind::Rescaled);
        assert_eq!(cfg.eps, vec![0.2, 0.1, 0.05]);
        assert_eq!(cfg.evaluator, EvaluatorChoice::Both);
        let again = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.hash(), again.hash());
        let mut moved = again.clone();
        moved.out = PathBuf::from("elsewhere");
        assert_eq!(cfg.hash(), moved.hash());
        moved.seed += 1;
        assert_ne!(cfg.hash(), moved.hash());
        let fam = cfg.kernel.family(Some(0.1)).unwrap();
        assert_eq!(fam.base.gamma, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::from_text("eps = 0.1, 0.2"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_text("eps = 0.1, 0.1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_text("colour = red"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_text("n = many"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_text("just words"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_text("evaluator = quick"), Err(Error::Config(_))));
        for c in Command::ALL {
            assert_eq!(c.as_str().parse::<Command>().unwrap(), *c);
        }
    }
}
