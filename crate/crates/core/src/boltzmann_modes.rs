//! Boltzmann kernel modes
//!
//! ```text
//! B(l,m) = ∫_{|q|≤q_max} dq ∫_{S²} dσ B(q,θ) e^{iq·m} [e^{i(l−m)/2·(q−|q|σ)} − 1]
//! ```
//!
//! Two independent evaluation routes are provided.
//!
//! * [`compute_mode`] expands the σ-integral in Legendre polynomials
//!   (Funk–Hecke) and the ω-integral in spherical harmonics, leaving
//!
//!   ```text
//!   B = 8π² ∫_0^{q_max} ρ^{2+γ} Σ_{n≥1} (2n+1) μ_n j_n(ρ|l+m|/2) j_n(ρ|l−m|/2) P_n(cos ψ) dρ,
//!   μ_n = ∫ ζ(θ) (P_n(cos θ) − 1) dθ,  cos ψ = (|l|²−|m|²)/(|l+m||l−m|).
//!   ```
//!
//!   This is the production route. The mode is a function of the integer
//!   triple (min, max of |l+m|², |l−m|²; |l|²−|m|²), which is the
//!   compression key of [`ModeTensor`].
//!
//! * [`compute_mode_cubature`] integrates the bracket form directly: Gauss
//!   in ρ, Gauss in the polar cosine of ω about l−m, trapezoid in both
//!   azimuths (evaluated as J0), graded Gauss in θ. It returns the complex
//!   value so that the imaginary residue can be inspected.
//!
//! [`compute_mode_vhs`] evaluates the one-dimensional reduction available
//! for angle-independent kernels on the full sphere.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cache;
use crate::cross_sections::{AngularKernel, AngularRule};
use crate::error::{Error, Result};
use crate::grid::{add, dot, neg, sub, to_f64, GridConfig, Lattice};
use crate::quadrature::{gauss_on, radial_rule, Grading};
use crate::special::{bessel_j0_trap, bessel_j0m1_trap, legendre_array, one_minus_legendre, sinc, spherical_jn};

/// Quadrature controls for mode integrals.
///
/// Node counts are derived from the oscillation bandwidth of each integral
/// and multiplied by the scale factors. With `check_refinement` every value
/// is recomputed with doubled node counts and the two must agree to `tol`.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub rho_scale: f64,
    pub omega_scale: f64,
    /// Minimum trapezoid nodes per period for azimuthal integrals.
    pub n_phi_min: usize,
    /// Extra Legendre degrees kept beyond the automatic truncation.
    pub extra_degrees: usize,
    pub theta_grading: Grading,
    pub tol: f64,
    pub check_refinement: bool,
    /// Random pairs checked against an independent route after a table build.
    pub verify_samples: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rho_scale: 1.0,
            omega_scale: 1.0,
            n_phi_min: 16,
            extra_degrees: 0,
            theta_grading: Grading::default(),
            tol: 1e-10,
            check_refinement: true,
            verify_samples: 100,
        }
    }
}

impl QuadratureSpec {
    /// Defaults with the θ panel width adapted to the bandwidth of `grid`.
    pub fn for_grid(grid: &GridConfig) -> Self {
        let mut q = Self::default();
        let b_max = grid.q_max() * grid.n.max(1) as f64 * 3f64.sqrt();
        q.theta_grading.max_width = (PI / 32.0).min(3.0 / b_max);
        q
    }

    /// Same spec without the doubling check.
    pub fn unchecked(mut self) -> Self {
        self.check_refinement = false;
        self
    }

    /// Doubled node counts.
    pub fn refined(&self) -> Self {
        let mut q = *self;
        q.rho_scale *= 2.0;
        q.omega_scale *= 2.0;
        q.n_phi_min *= 2;
        q.extra_degrees += 20;
        q
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_scale > 0.0 && self.omega_scale > 0.0 && self.tol > 0.0 && self.n_phi_min >= 2) {
            return Err(Error::Domain(format!("invalid quadrature spec {self:?}")));
        }
        Ok(())
    }
}

/// Exact symmetry-class key of a mode: (min, max) of (|l+m|², |l−m|²) and
/// (l+m)·(l−m) = |l|² − |m|².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeKey {
    pub lo: i64,
    pub hi: i64,
    pub c: i64,
}

impl ModeKey {
    pub fn new(l: Lattice, m: Lattice) -> Self {
        let s = add(l, m);
        let d = sub(l, m);
        let (a, b) = (dot(s, s), dot(d, d));
        ModeKey { lo: a.min(b), hi: a.max(b), c: dot(l, l) - dot(m, m) }
    }
}

pub(crate) fn check_pair(grid: &GridConfig, l: Lattice, m: Lattice) -> Result<()> {
    if !grid.contains(l) || !grid.contains(m) {
        return Err(Error::Domain(format!("l={l:?} or m={m:?} outside the lattice with N={}", grid.n)));
    }
    Ok(())
}

fn check_radial(gamma: f64) -> Result<()> {
    if gamma <= -3.0 {
        return Err(Error::NonIntegrable(format!("radial weight rho^(2+gamma) with gamma={gamma} is not integrable")));
    }
    Ok(())
}

/// Legendre coefficients μ_n = ∫ ζ(θ)(P_n(cos θ) − 1) dθ of a kernel.
#[derive(Debug, Clone)]
pub struct HarmonicTable {
    pub gamma: f64,
    pub mu: Vec<f64>,
}

impl HarmonicTable {
    pub fn new(kernel: &dyn AngularKernel, n_max: usize, grading: &Grading) -> Result<Self> {
        let rule = AngularRule::new(kernel, grading)?;
        let mut mu = vec![0.0; n_max + 1];
        let mut q = vec![0.0; n_max + 1];
        for (&w, &u) in rule.wzeta.iter().zip(&rule.u) {
            one_minus_legendre(n_max, u, &mut q);
            for (m, qn) in mu.iter_mut().zip(&q) {
                *m -= w * qn;
            }
        }
        Ok(Self { gamma: kernel.gamma(), mu })
    }

    pub fn n_max(&self) -> usize {
        self.mu.len() - 1
    }
}

fn degree_cutoff(x_max: f64, extra: usize) -> usize {
    (1.3 * x_max + 40.0).ceil() as usize + extra
}

fn table_degree(grid: &GridConfig, quad: &QuadratureSpec) -> usize {
    let x = grid.q_max() * grid.n as f64 * 3f64.sqrt();
    degree_cutoff(x, quad.refined().extra_degrees)
}

/// Harmonic-series evaluation of the mode with |l+m| = `s`, |l−m| = `d`,
/// (l+m)·(l−m) = `c`.
fn harmonic_value(table: &HarmonicTable, q_max: f64, s: f64, d: f64, c: f64, quad: &QuadratureSpec) -> f64 {
    if s == 0.0 || d == 0.0 {
        return 0.0;
    }
    let (a, b) = (0.5 * s, 0.5 * d);
    let n_max = degree_cutoff(q_max * a.max(b), quad.extra_degrees).min(table.n_max());
    let cos_psi = (c / (s * d)).clamp(-1.0, 1.0);
    let mut p = vec![0.0; n_max + 1];
    legendre_array(n_max, cos_psi, &mut p);
    let coef: Vec<f64> = (0..=n_max).map(|n| (2 * n + 1) as f64 * table.mu[n] * p[n]).collect();
    let mut ja = vec![0.0; n_max + 1];
    let mut jb = vec![0.0; n_max + 1];
    let rule = radial_rule(q_max, 2.0 + table.gamma, a + b, quad.rho_scale);
    let mut total = 0.0;
    for (&rho, &w) in rule.nodes.iter().zip(&rule.weights) {
        spherical_jn(n_max, rho * a, &mut ja);
        spherical_jn(n_max, rho * b, &mut jb);
        let series: f64 = (1..=n_max).map(|n| coef[n] * ja[n] * jb[n]).sum();
        total += w * rho.powf(2.0 + table.gamma) * series;
    }
    8.0 * PI * PI * total
}

fn key_value(table: &HarmonicTable, q_max: f64, key: ModeKey, quad: &QuadratureSpec) -> f64 {
    let s = (key.lo as f64).sqrt();
    let d = (key.hi as f64).sqrt();
    harmonic_value(table, q_max, s, d, key.c as f64, quad)
}

fn checked_key_value(table: &HarmonicTable, q_max: f64, key: ModeKey, quad: &QuadratureSpec) -> Result<f64> {
    let v = key_value(table, q_max, key, quad);
    if quad.check_refinement {
        let v2 = key_value(table, q_max, key, &quad.refined());
        let diff = (v - v2).abs();
        if !(diff <= quad.tol) {
            return Err(Error::QuadratureNotConverged { what: format!("mode class {key:?}"), diff, tol: quad.tol });
        }
    }
    Ok(v)
}

/// Kernel mode B(l,m) by the harmonic-series route.
pub fn compute_mode(kernel: &dyn AngularKernel, grid: &GridConfig, l: Lattice, m: Lattice, quad: &QuadratureSpec) -> Result<f64> {
    quad.validate()?;
    check_pair(grid, l, m)?;
    check_radial(kernel.gamma())?;
    let key = ModeKey::new(l, m);
    if key.lo == 0 {
        return Ok(0.0);
    }
    let x = grid.q_max() * 0.5 * (key.hi as f64).sqrt();
    let table = HarmonicTable::new(kernel, degree_cutoff(x, quad.refined().extra_degrees), &quad.theta_grading)?;
    checked_key_value(&table, grid.q_max(), key, quad).map_err(|e| with_pair(e, l, m))
}

fn with_pair(e: Error, l: Lattice, m: Lattice) -> Error {
    match e {
        Error::QuadratureNotConverged { what, diff, tol } => {
            Error::QuadratureNotConverged { what: format!("{what} at l={l:?}, m={m:?}"), diff, tol }
        }
        other => other,
    }
}

fn cubature_value(rule: &AngularRule, gamma: f64, q_max: f64, l: Lattice, m: Lattice, quad: &QuadratureSpec) -> Complex64 {
    let d = sub(l, m);
    if d == [0, 0, 0] {
        return Complex64::new(0.0, 0.0);
    }
    let df = to_f64(d);
    let mf = to_f64(m);
    let dn = (dot(d, d) as f64).sqrt();
    let mn = (dot(m, m) as f64).sqrt();
    let m_par = (0..3).map(|i| mf[i] * df[i]).sum::<f64>() / dn;
    let m_perp = (mn * mn - m_par * m_par).max(0.0).sqrt();
    let bandwidth = mn + dn;
    let radial = radial_rule(q_max, 2.0 + gamma, bandwidth, quad.rho_scale);
    let n_t = ((0.6 * q_max * bandwidth + 16.0) * quad.omega_scale).ceil() as usize;
    let polar = gauss_on(-1.0, 1.0, n_t);
    let nphi = quad.n_phi_min;
    let mut acc = Complex64::new(0.0, 0.0);
    for (&rho, &wr) in radial.nodes.iter().zip(&radial.weights) {
        let wr = wr * rho.powf(2.0 + gamma);
        for (&t, &wt) in polar.nodes.iter().zip(&polar.weights) {
            let st = (1.0 - t * t).max(0.0).sqrt();
            let a = 0.5 * rho * dn * t;
            let b = 0.5 * rho * dn * st;
            let mut k = Complex64::new(0.0, 0.0);
            for i in 0..rule.len() {
                let au = a * rule.u[i];
                let h = (0.5 * au).sin();
                let e_m1 = Complex64::new(-2.0 * h * h, au.sin());
                let j_m1 = bessel_j0m1_trap(b * rule.sin[i], nphi);
                k += rule.wzeta[i] * (e_m1 * (1.0 + j_m1) + j_m1);
            }
            let outer = bessel_j0_trap(rho * st * m_perp, nphi) * Complex64::from_polar(1.0, rho * t * m_par);
            acc += wr * wt * outer * k;
        }
    }
    4.0 * PI * PI * acc
}

/// Kernel mode B(l,m) by direct cubature of the bracket form, returning the
/// complex quadrature value (its imaginary part is the realness residue).
pub fn compute_mode_cubature(
    kernel: &dyn AngularKernel,
    grid: &GridConfig,
    l: Lattice,
    m: Lattice,
    quad: &QuadratureSpec,
) -> Result<Complex64> {
    quad.validate()?;
    check_pair(grid, l, m)?;
    check_radial(kernel.gamma())?;
    let rule = AngularRule::new(kernel, &quad.theta_grading)?;
    cubature_with_rule(&rule, kernel.gamma(), grid, l, m, quad)
}

/// [`compute_mode_cubature`] with a precomputed angular rule.
pub fn cubature_with_rule(
    rule: &AngularRule,
    gamma: f64,
    grid: &GridConfig,
    l: Lattice,
    m: Lattice,
    quad: &QuadratureSpec,
) -> Result<Complex64> {
    let v = cubature_value(rule, gamma, grid.q_max(), l, m, quad);
    if quad.check_refinement {
        let v2 = cubature_value(rule, gamma, grid.q_max(), l, m, &quad.refined());
        let diff = (v - v2).norm();
        if !(diff <= quad.tol) {
            return Err(Error::QuadratureNotConverged { what: format!("cubature at l={l:?}, m={m:?}"), diff, tol: quad.tol });
        }
    }
    Ok(v)
}

/// Kernel-dependent prefactor of the VHS reduction:
/// (4π)² 2^{3+α} C_α, with the radial variable r = |q|/2 on [0, λπ].
pub fn vhs_constant(alpha: f64, c_alpha: f64) -> f64 {
    16.0 * PI * PI * 2f64.powf(3.0 + alpha) * c_alpha
}

/// ∫_0^R r² sinc(s r) sinc(d r) dr in closed form.
pub fn sinc_product_integral(s: f64, d: f64, r: f64) -> f64 {
    let cos_int = |w: f64| if w == 0.0 { r } else { (w * r).sin() / w };
    match (s == 0.0, d == 0.0) {
        (true, true) => r * r * r / 3.0,
        (true, false) | (false, true) => {
            let c = s.max(d);
            let x = c * r;
            (x.sin() - x * x.cos()) / (c * c * c)
        }
        (false, false) => (cos_int(s - d) - cos_int(s + d)) / (2.0 * s * d),
    }
}

fn vhs_bracket_numeric(alpha: f64, s: f64, d: f64, c: f64, r_max: f64, scale: f64) -> f64 {
    let rule = radial_rule(r_max, 2.0 + alpha, s + d + c, scale);
    rule.integrate(|r| r.powf(2.0 + alpha) * (sinc(s * r) * sinc(d * r) - sinc(c * r)))
}

/// The bracket integral ∫_0^{λπ} r^{2+α}[sinc(|l+m|r) sinc(|l−m|r) − sinc(2|m|r)] dr
/// by quadrature with doubling check.
pub fn vhs_radial_integral_numeric(alpha: f64, grid: &GridConfig, l: Lattice, m: Lattice, quad: &QuadratureSpec) -> Result<f64> {
    let (s, d, c) = vhs_lengths(l, m);
    let r_max = grid.radius();
    let v = vhs_bracket_numeric(alpha, s, d, c, r_max, quad.rho_scale);
    let v2 = vhs_bracket_numeric(alpha, s, d, c, r_max, 2.0 * quad.rho_scale);
    if !((v - v2).abs() <= quad.tol) {
        return Err(Error::QuadratureNotConverged { what: format!("VHS integral at l={l:?}, m={m:?}"), diff: (v - v2).abs(), tol: quad.tol });
    }
    Ok(v)
}

fn vhs_lengths(l: Lattice, m: Lattice) -> (f64, f64, f64) {
    let s = add(l, m);
    let d = sub(l, m);
    ((dot(s, s) as f64).sqrt(), (dot(d, d) as f64).sqrt(), 2.0 * (dot(m, m) as f64).sqrt())
}

/// Kernel mode of the VHS kernel C_α|q|^α (angle independent, full sphere)
/// by its one-dimensional radial reduction. α = 0 uses the closed form.
pub fn compute_mode_vhs(alpha: f64, c_alpha: f64, grid: &GridConfig, l: Lattice, m: Lattice, quad: &QuadratureSpec) -> Result<f64> {
    if alpha <= -3.0 {
        return Err(Error::Domain(format!("VHS exponent alpha = {alpha} must exceed -3")));
    }
    check_pair(grid, l, m)?;
    let (s, d, c) = vhs_lengths(l, m);
    let integral = if alpha == 0.0 {
        let r = grid.radius();
        sinc_product_integral(s, d, r) - sinc_product_integral(c, 0.0, r)
    } else {
        vhs_radial_integral_numeric(alpha, grid, l, m, quad)?
    };
    Ok(vhs_constant(alpha, c_alpha) * integral)
}

/// Compressed table of kernel modes over the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTensor {
    pub n: usize,
    pub kernel_tag: String,
    pub tol: f64,
    values: HashMap<ModeKey, f64>,
}

const TENSOR_VARIANT: u8 = 0;

impl ModeTensor {
    /// Mode B(l,m); pairs outside the lattice return 0.
    pub fn get(&self, l: Lattice, m: Lattice) -> f64 {
        self.values.get(&ModeKey::new(l, m)).copied().unwrap_or(0.0)
    }

    pub fn value(&self, key: &ModeKey) -> Option<f64> {
        self.values.get(key).copied()
    }

    /// Number of distinct symmetry classes.
    pub fn classes(&self) -> usize {
        self.values.len()
    }

    /// Classes sorted by key.
    pub fn sorted(&self) -> Vec<(ModeKey, f64)> {
        let mut v: Vec<_> = self.values.iter().map(|(k, v)| (*k, *v)).collect();
        v.sort_by_key(|a| a.0);
        v
    }

    fn header(&self) -> cache::Header {
        cache::Header {
            variant: TENSOR_VARIANT,
            n: self.n as u32,
            tag_hash: cache::tag_hash(&self.kernel_tag),
            tol: self.tol,
            count: self.values.len() as u64,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut payload = Vec::with_capacity(self.values.len() * 32);
        for (k, v) in self.sorted() {
            for x in [k.lo, k.hi, k.c] {
                payload.extend_from_slice(&x.to_le_bytes());
            }
            payload.extend_from_slice(&v.to_le_bytes());
        }
        cache::write(path, &self.header(), &payload)
    }

    /// Loads a tensor, validating it against the expected N, tag and tol.
    pub fn load(path: &Path, n: usize, kernel_tag: &str, tol: f64) -> Result<Self> {
        let (h, payload) = cache::read(path)?;
        let expected = cache::Header { variant: TENSOR_VARIANT, n: n as u32, tag_hash: cache::tag_hash(kernel_tag), tol, count: h.count };
        cache::check(&h, &expected)?;
        if payload.len() as u64 != h.count * 32 {
            return Err(Error::Cache(format!("{}: payload length does not match entry count", path.display())));
        }
        let mut values = HashMap::with_capacity(h.count as usize);
        for rec in payload.chunks_exact(32) {
            let i = |o: usize| i64::from_le_bytes(rec[o..o + 8].try_into().expect("8 bytes"));
            let v = cache::f64s(&rec[24..32]).next().expect("value");
            values.insert(ModeKey { lo: i(0), hi: i(8), c: i(16) }, v);
        }
        let t = ModeTensor { n, kernel_tag: kernel_tag.to_string(), tol, values };
        let grid = GridConfig { n };
        if t.values.len() != lattice_keys(&grid).len() {
            return Err(Error::Cache(format!("{}: class count does not match the lattice", path.display())));
        }
        Ok(t)
    }
}

/// All distinct keys over pairs in the lattice, sorted.
pub fn lattice_keys(grid: &GridConfig) -> Vec<ModeKey> {
    let mut set = BTreeSet::new();
    let vs: Vec<Lattice> = grid.vectors().collect();
    for &l in &vs {
        for &m in &vs {
            set.insert(ModeKey::new(l, m));
        }
    }
    set.into_iter().collect()
}

/// Seed of the symmetry spot-check performed by [`build_mode_tensor`].
pub const SYMMETRY_SAMPLE_SEED: u64 = 0x5eed_b01c;

/// Random lattice pairs drawn with a seeded generator.
pub fn random_pairs(grid: &GridConfig, count: usize, seed: u64) -> Vec<(Lattice, Lattice)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n as i32;
    let mut draw = || [rng.gen_range(-n..=n), rng.gen_range(-n..=n), rng.gen_range(-n..=n)];
    (0..count).map(|_| (draw(), draw())).collect()
}

/// Tabulates every symmetry class of the lattice, optionally through a cache file.
pub fn build_mode_tensor(
    kernel: &dyn AngularKernel,
    grid: &GridConfig,
    quad: &QuadratureSpec,
    cache_path: Option<&Path>,
) -> Result<ModeTensor> {
    quad.validate()?;
    check_radial(kernel.gamma())?;
    let tag = kernel.tag();
    if let Some(p) = cache_path {
        if p.exists() {
            return ModeTensor::load(p, grid.n, &tag, quad.tol);
        }
    }
    let keys = lattice_keys(grid);
    let table = HarmonicTable::new(kernel, table_degree(grid, quad), &quad.theta_grading)?;
    let q_max = grid.q_max();
    let computed: Vec<Result<(ModeKey, f64)>> =
        keys.par_iter().map(|&k| checked_key_value(&table, q_max, k, quad).map(|v| (k, v))).collect();
    let mut values = HashMap::with_capacity(keys.len());
    for r in computed {
        let (k, v) = r?;
        values.insert(k, v);
    }
    let tensor = ModeTensor { n: grid.n, kernel_tag: tag, tol: quad.tol, values };
    verify_symmetries(&tensor, &table, grid, quad)?;
    if let Some(p) = cache_path {
        tensor.save(p)?;
    }
    Ok(tensor)
}

fn verify_symmetries(t: &ModeTensor, table: &HarmonicTable, grid: &GridConfig, quad: &QuadratureSpec) -> Result<()> {
    let q_max = grid.q_max();
    let raw = |l: Lattice, m: Lattice| {
        let (s, d, _) = vhs_lengths(l, m);
        harmonic_value(table, q_max, s, d, (dot(l, l) - dot(m, m)) as f64, quad)
    };
    for (l, m) in random_pairs(grid, quad.verify_samples, SYMMETRY_SAMPLE_SEED) {
        let b = t.get(l, m);
        let checks = [
            ("B(-l,-m)", raw(neg(l), neg(m))),
            ("B(-l,m)", raw(neg(l), m)),
            ("B(l,-m)", raw(l, neg(m))),
            ("B(l,m)", raw(l, m)),
        ];
        for (name, v) in checks {
            if !((b - v).abs() <= quad.tol) {
                return Err(Error::Symmetry { l, m, detail: format!("{name} = {v:e} differs from stored {b:e}") });
            }
        }
        let diag = t.get(neg(m), m);
        if !(diag.abs() <= quad.tol) {
            return Err(Error::Symmetry { l: neg(m), m, detail: format!("B(-m,m) = {diag:e}") });
        }
    }
    Ok(())
}
