//! Grazing-limit kernel modes.
//!
//! * Approximate Boltzmann modes for small ε,
//!   `∫ dq e^{iq·m} |q|^γ [w1 i q·d − (w2/4) |q|² [d⊥]²]` with d = l−m,
//!   w1 = 2π∫ζ_ε sin²(θ/2) and w2 = 2π∫ζ_ε sin²(θ/2)cos²(θ/2).
//! * Fokker–Planck–Landau modes
//!   `B_L(l,m) = −(Λ₀/2) ∫ dq e^{iq·m} |q|^γ {i q·k + ¼|q|² [k⊥]²}` with k = l+m,
//!   also available in the Ψ-form `−4 ∫ e^{iq·m} Ψ(|q|)/|q|² {…}`,
//!   Ψ(|q|) = Λ₀|q|^{γ+2}/8, and in the form `∫ Ψ {[m⊥]² − [l⊥]²} e^{iq·m}`.
//! * Split fields: each mode is `Σ_j k_j F_j(m) + |k|² G(m) + Σ_{jh} k_j k_h I_{jh}(m) + H(m)`,
//!   which turns the Galerkin sum into convolutions. H vanishes for the FPL modes.
//!
//! The split fields are reduced to radial integrals with the spherical
//! averages of e^{iq·m}, q_j e^{iq·m} and q_j q_h e^{iq·m}:
//!
//! ```text
//! ∫ i q_j |q|^γ e^{iq·m} dq     = −4π m̂_j R1,        R1 = ∫ ρ^{γ+3} j1(ρ|m|) dρ
//! ∫ |q|^{γ+2} e^{iq·m} dq       =  4π R0,            R0 = ∫ ρ^{γ+4} j0(ρ|m|) dρ
//! ∫ |q|^γ q_j q_h e^{iq·m} dq   =  4π (Ra δ_jh − m̂_j m̂_h Rb),
//!                                  Ra = ∫ ρ^{γ+4} j1(x)/x dρ, Rb = ∫ ρ^{γ+4} j2(x) dρ, x = ρ|m|.
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::boltzmann_modes::{check_pair, random_pairs, QuadratureSpec};
use crate::cache;
use crate::cross_sections::{AngularKernel, AngularRule, GrazingFamily};
use crate::error::{Error, Result};
use crate::grid::{add, dot, sub, to_f64, GridConfig, Lattice};
use crate::quadrature::{gauss_on, radial_rule};
use crate::special::{sph_j012, sph_j1_over_x};

/// FPL kernel with Ψ(|q|) = Λ₀ |q|^{γ+2} / 8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FplKernel {
    pub gamma: f64,
    pub lambda0: f64,
    pub psi_coeff: f64,
}

impl FplKernel {
    pub fn new(gamma: f64, lambda0: f64) -> Result<Self> {
        if gamma <= -3.0 {
            return Err(Error::Domain(format!("FPL modes need gamma > -3, got {gamma}")));
        }
        if !(lambda0 > 0.0 && lambda0.is_finite()) {
            return Err(Error::Domain(format!("lambda0 = {lambda0} must be positive")));
        }
        Ok(Self { gamma, lambda0, psi_coeff: lambda0 / 8.0 })
    }

    /// Limit kernel of a grazing family.
    pub fn from_family(fam: &GrazingFamily) -> Result<Self> {
        Self::new(fam.base.gamma, fam.lambda0)
    }

    pub fn psi(&self, q: f64) -> f64 {
        self.psi_coeff * q.powf(self.gamma + 2.0)
    }

    pub fn tag(&self) -> String {
        format!("fpl(gamma={:e};lambda0={:e})", self.gamma, self.lambda0)
    }
}

fn frame(axis: [f64; 3]) -> [[f64; 3]; 3] {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let e3 = if n == 0.0 { [0.0, 0.0, 1.0] } else { [axis[0] / n, axis[1] / n, axis[2] / n] };
    let helper = if e3[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let c = helper[0] * e3[0] + helper[1] * e3[1] + helper[2] * e3[2];
    let mut e1 = [helper[0] - c * e3[0], helper[1] - c * e3[1], helper[2] - c * e3[2]];
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1 = [e1[0] / n1, e1[1] / n1, e1[2] / n1];
    let e2 = [e3[1] * e1[2] - e3[2] * e1[1], e3[2] * e1[0] - e3[0] * e1[2], e3[0] * e1[1] - e3[1] * e1[0]];
    [e1, e2, e3]
}

/// Product cubature over the ball |q| ≤ q_max in spherical coordinates about
/// `axis`: Gauss in ρ (graded when `p` is fractional), Gauss in the polar
/// cosine, trapezoid in the azimuth. `f(ρ, ω)` excludes the ρ² Jacobian.
pub fn ball_cubature<F>(q_max: f64, p: f64, bandwidth: f64, axis: [f64; 3], quad: &QuadratureSpec, f: F) -> Complex64
where
    F: Fn(f64, [f64; 3]) -> Complex64,
{
    let radial = radial_rule(q_max, p, bandwidth, quad.rho_scale);
    let n_t = ((0.6 * q_max * bandwidth + 16.0) * quad.omega_scale).ceil() as usize;
    let polar = gauss_on(-1.0, 1.0, n_t);
    let nphi = quad.n_phi_min;
    let [e1, e2, e3] = frame(axis);
    let dirs: Vec<([f64; 3], f64)> = polar
        .nodes
        .iter()
        .zip(&polar.weights)
        .flat_map(|(&t, &wt)| {
            let st = (1.0 - t * t).max(0.0).sqrt();
            (0..nphi).map(move |k| {
                let (sp, cp) = (2.0 * PI * k as f64 / nphi as f64).sin_cos();
                let w = [0, 1, 2].map(|i| t * e3[i] + st * (cp * e1[i] + sp * e2[i]));
                (w, wt * 2.0 * PI / nphi as f64)
            })
        })
        .collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for (&rho, &wr) in radial.nodes.iter().zip(&radial.weights) {
        let mut inner = Complex64::new(0.0, 0.0);
        for (w, ww) in &dirs {
            inner += ww * f(rho, *w);
        }
        acc += wr * rho * rho * inner;
    }
    acc
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: Lattice) -> f64 {
    (dot(a, a) as f64).sqrt()
}

fn checked<F: Fn(&QuadratureSpec) -> Complex64>(f: F, quad: &QuadratureSpec, what: impl Fn() -> String) -> Result<Complex64> {
    let v = f(quad);
    if quad.check_refinement {
        let v2 = f(&quad.refined());
        let diff = (v - v2).norm();
        if !(diff <= quad.tol) {
            return Err(Error::QuadratureNotConverged { what: what(), diff, tol: quad.tol });
        }
    }
    Ok(v)
}

fn fpl_grazing_raw(fk: &FplKernel, q_max: f64, l: Lattice, m: Lattice, quad: &QuadratureSpec) -> Complex64 {
    let k = to_f64(add(l, m));
    let mf = to_f64(m);
    let k2 = dot3(k, k);
    let g = fk.gamma;
    let c = -0.5 * fk.lambda0;
    ball_cubature(q_max, 2.0 + g, norm(m) + norm(add(l, m)), mf, quad, |rho, w| {
        let kw = dot3(k, w);
        let brace = Complex64::new(0.25 * rho * rho * (k2 - kw * kw), rho * kw);
        c * rho.powf(g) * brace * Complex64::from_polar(1.0, rho * dot3(mf, w))
    })
}

fn fpl_landau_raw(fk: &FplKernel, q_max: f64, l: Lattice, m: Lattice, quad: &QuadratureSpec) -> Complex64 {
    let k = to_f64(add(l, m));
    let mf = to_f64(m);
    ball_cubature(q_max, 2.0 + fk.gamma, norm(m) + norm(add(l, m)), mf, quad, |rho, w| {
        let q = w.map(|x| rho * x);
        let q2 = rho * rho;
        let qk = dot3(q, k);
        let k_perp2 = dot3(k, k) - qk * qk / q2;
        let brace = Complex64::new(0.25 * q2 * k_perp2, qk);
        -4.0 * (fk.psi(rho) / q2) * brace * Complex64::from_polar(1.0, dot3(q, mf))
    })
}

fn fpl_alt_raw(fk: &FplKernel, q_max: f64, l: Lattice, m: Lattice, quad: &QuadratureSpec) -> Complex64 {
    let lf = to_f64(l);
    let mf = to_f64(m);
    let (l2, m2) = (dot3(lf, lf), dot3(mf, mf));
    ball_cubature(q_max, 2.0 + fk.gamma, norm(m) + norm(l), mf, quad, |rho, w| {
        let (lw, mw) = (dot3(lf, w), dot3(mf, w));
        let bracket = (m2 - mw * mw) - (l2 - lw * lw);
        fk.psi(rho) * bracket * Complex64::from_polar(1.0, rho * mw)
    })
}

/// FPL mode in the `|q|^γ {i q·k + ¼|q|²[k⊥]²}` form, complex quadrature value.
pub fn fpl_mode_grazing(fk: &FplKernel, grid: &GridConfig, l: Lattice, m: Lattice, quad: &QuadratureSpec) -> Result<Complex64> {
    check_pair(grid, l, m)?;
    checked(|q| fpl_grazing_raw(fk, grid.q_max(), l, m, q), quad, || format!("FPL mode at l={l:?}, m={m:?}"))
}

/// FPL mode in the Ψ form, complex quadrature value.
pub fn fpl_mode_landau(fk: &FplKernel, grid: &GridConfig, l: Lattice, m: Lattice, quad: &QuadratureSpec) -> Result<Complex64> {
    check_pair(grid, l, m)?;
    checked(|q| fpl_landau_raw(fk, grid.q_max(), l, m, q), quad, || format!("FPL Psi-form at l={l:?}, m={m:?}"))
}

/// FPL mode B_L(l,m). Both displayed forms are evaluated and must agree to
/// 2·tol; the realness residue must be below tol.
pub fn fpl_mode(fk: &FplKernel, grid: &GridConfig, l: Lattice, m: Lattice, quad: &QuadratureSpec) -> Result<f64> {
    if add(l, m) == [0, 0, 0] {
        check_pair(grid, l, m)?;
        return Ok(0.0);
    }
    let a = fpl_mode_grazing(fk, grid, l, m, quad)?;
    let b = fpl_mode_landau(fk, grid, l, m, quad)?;
    let diff = (a - b).norm();
    if !(diff <= 2.0 * quad.tol) {
        return Err(Error::QuadratureNotConverged { what: format!("FPL forms disagree at l={l:?}, m={m:?}"), diff, tol: 2.0 * quad.tol });
    }
    if !(a.im.abs() <= quad.tol) {
        return Err(Error::QuadratureNotConverged { what: format!("FPL imaginary residue at l={l:?}, m={m:?}"), diff: a.im.abs(), tol: quad.tol });
    }
    Ok(a.re)
}

/// FPL mode in the form `∫ Ψ(|q|) {[m⊥]² − [l⊥]²} e^{iq·m} dq`.
pub fn fpl_mode_alt(fk: &FplKernel, grid: &GridConfig, l: Lattice, m: Lattice, quad: &QuadratureSpec) -> Result<f64> {
    check_pair(grid, l, m)?;
    if l == m {
        return Ok(0.0);
    }
    let v = checked(|q| fpl_alt_raw(fk, grid.q_max(), l, m, q), quad, || format!("FPL alternate form at l={l:?}, m={m:?}"))?;
    Ok(v.re)
}

/// Weights (w1, w2) of the approximate modes:
/// w1 = 2π∫ζ_ε sin²(θ/2) dθ, w2 = 2π∫ζ_ε sin²(θ/2) cos²(θ/2) dθ.
pub fn approx_weights(kernel: &dyn AngularKernel, quad: &QuadratureSpec) -> Result<(f64, f64)> {
    let rule = AngularRule::new(kernel, &quad.theta_grading)?;
    let w1 = PI * rule.wzeta.iter().zip(&rule.u).map(|(w, u)| w * u).sum::<f64>();
    let w2 = PI * rule.wzeta.iter().zip(&rule.u).map(|(w, u)| w * u * (1.0 - 0.5 * u)).sum::<f64>();
    Ok((w1, w2))
}

fn approx_raw(gamma: f64, w1: f64, w2: f64, q_max: f64, l: Lattice, m: Lattice, quad: &QuadratureSpec) -> Complex64 {
    let d = to_f64(sub(l, m));
    let mf = to_f64(m);
    let d2 = dot3(d, d);
    ball_cubature(q_max, 2.0 + gamma, norm(m) + norm(sub(l, m)), mf, quad, |rho, w| {
        let dw = dot3(d, w);
        let g = Complex64::new(-0.25 * w2 * rho * rho * (d2 - dw * dw), w1 * rho * dw);
        rho.powf(gamma) * g * Complex64::from_polar(1.0, rho * dot3(mf, w))
    })
}

/// Approximate Boltzmann mode of a grazing family at its ε.
pub fn approx_boltzmann_mode(fam: &GrazingFamily, grid: &GridConfig, l: Lattice, m: Lattice, quad: &QuadratureSpec) -> Result<f64> {
    check_pair(grid, l, m)?;
    if fam.base.gamma <= -3.0 {
        return Err(Error::Domain(format!("approximate modes need gamma > -3, got {}", fam.base.gamma)));
    }
    if l == m {
        return Ok(0.0);
    }
    let (w1, w2) = approx_weights(fam, quad)?;
    approx_mode_with_weights(fam.base.gamma, w1, w2, grid, l, m, quad)
}

/// Approximate mode for given weights.
pub fn approx_mode_with_weights(gamma: f64, w1: f64, w2: f64, grid: &GridConfig, l: Lattice, m: Lattice, quad: &QuadratureSpec) -> Result<f64> {
    let v = checked(|q| approx_raw(gamma, w1, w2, grid.q_max(), l, m, q), quad, || format!("approximate mode at l={l:?}, m={m:?}"))?;
    if !(v.im.abs() <= quad.tol) {
        return Err(Error::QuadratureNotConverged { what: format!("approximate-mode imaginary residue at l={l:?}, m={m:?}"), diff: v.im.abs(), tol: quad.tol });
    }
    Ok(v.re)
}

/// Field slots of a [`SplitKernel`] entry.
pub mod field {
    pub const F1: usize = 0;
    pub const F2: usize = 1;
    pub const F3: usize = 2;
    pub const G: usize = 3;
    pub const I11: usize = 4;
    pub const I12: usize = 5;
    pub const I13: usize = 6;
    pub const I22: usize = 7;
    pub const I23: usize = 8;
    pub const I33: usize = 9;
    pub const H: usize = 10;
    pub const COUNT: usize = 11;
    pub const NAMES: [&str; COUNT] = ["F1", "F2", "F3", "G", "I11", "I12", "I13", "I22", "I23", "I33", "H"];
    /// (j, h) of the stored upper-triangular I entries.
    pub const I_INDEX: [(usize, usize, usize); 6] = [(I11, 0, 0), (I12, 0, 1), (I13, 0, 2), (I22, 1, 1), (I23, 1, 2), (I33, 2, 2)];
}

/// Which modes a split kernel reproduces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitVariant {
    FplLimit { gamma: f64, lambda0: f64 },
    ApproxBoltzmann { gamma: f64, epsilon: f64, w1: f64, w2: f64 },
}

impl SplitVariant {
    fn gamma(&self) -> f64 {
        match *self {
            SplitVariant::FplLimit { gamma, .. } | SplitVariant::ApproxBoltzmann { gamma, .. } => gamma,
        }
    }

    fn code(&self) -> u8 {
        match self {
            SplitVariant::FplLimit { .. } => 1,
            SplitVariant::ApproxBoltzmann { .. } => 2,
        }
    }
}

/// Source of a split kernel.
#[derive(Debug, Clone, Copy)]
pub enum SplitSource<'a> {
    Fpl(&'a FplKernel),
    Approx(&'a GrazingFamily),
}

/// Precomputed m-fields such that a mode equals
/// `Σ_j k_j F_j(m) + |k|² G(m) + Σ_{jh} k_j k_h I_{jh}(m) + H(m)`, k = l+m.
/// I is symmetric and stored once per unordered pair (j ≤ h).
#[derive(Debug, Clone, PartialEq)]
pub struct SplitKernel {
    pub n: usize,
    pub variant: SplitVariant,
    pub kernel_tag: String,
    pub tol: f64,
    fields: Vec<[f64; field::COUNT]>,
}

/// Radial moments (R1, R0, Ra, Rb) at |m|.
fn radial_moments(gamma: f64, q_max: f64, m_norm: f64, scale: f64) -> [f64; 4] {
    let rule = radial_rule(q_max, gamma + 3.0, m_norm, scale);
    let mut r = [0.0; 4];
    for (&rho, &w) in rule.nodes.iter().zip(&rule.weights) {
        let x = rho * m_norm;
        let [j0, j1, j2] = sph_j012(x);
        let p3 = w * rho.powf(gamma + 3.0);
        let p4 = p3 * rho;
        r[0] += p3 * j1;
        r[1] += p4 * j0;
        r[2] += p4 * sph_j1_over_x(x);
        r[3] += p4 * j2;
    }
    r
}

/// Basic transforms (S_j, P, T_jh) at m from the radial moments.
struct Transforms {
    s: [f64; 3],
    p: f64,
    t: [[f64; 3]; 3],
}

fn transforms_from_moments(m: Lattice, r: [f64; 4]) -> Transforms {
    let mn = norm(m);
    let mhat = if mn == 0.0 { [0.0; 3] } else { to_f64(m).map(|x| x / mn) };
    let four_pi = 4.0 * PI;
    let mut t = [[0.0; 3]; 3];
    for (j, row) in t.iter_mut().enumerate() {
        for (h, v) in row.iter_mut().enumerate() {
            let delta = if j == h { 1.0 } else { 0.0 };
            *v = four_pi * (r[2] * delta - mhat[j] * mhat[h] * r[3]);
        }
    }
    Transforms { s: mhat.map(|x| -four_pi * x * r[0]), p: four_pi * r[1], t }
}

fn fields_from_transforms(variant: &SplitVariant, m: Lattice, tr: &Transforms) -> [f64; field::COUNT] {
    use field::*;
    let mut out = [0.0; COUNT];
    match *variant {
        SplitVariant::FplLimit { lambda0, .. } => {
            for j in 0..3 {
                out[F1 + j] = -0.5 * lambda0 * tr.s[j];
            }
            out[G] = -lambda0 / 8.0 * tr.p;
            for (slot, j, h) in I_INDEX {
                out[slot] = lambda0 / 8.0 * tr.t[j][h];
            }
        }
        SplitVariant::ApproxBoltzmann { w1, w2, .. } => {
            let mf = to_f64(m);
            let tm = [0, 1, 2].map(|j| dot3(tr.t[j], mf));
            for j in 0..3 {
                out[F1 + j] = w1 * tr.s[j] + w2 * mf[j] * tr.p - w2 * tm[j];
            }
            out[G] = -0.25 * w2 * tr.p;
            for (slot, j, h) in I_INDEX {
                out[slot] = 0.25 * w2 * tr.t[j][h];
            }
            out[H] = -2.0 * w1 * dot3(mf, tr.s) - w2 * dot3(mf, mf) * tr.p + w2 * dot3(mf, tm);
        }
    }
    out
}

/// Reassembles a mode from the fields at m and the multiplier vector k.
pub fn reassemble(f: &[f64; field::COUNT], k: [f64; 3]) -> f64 {
    use field::*;
    let mut v = k[0] * f[F1] + k[1] * f[F2] + k[2] * f[F3] + dot3(k, k) * f[G] + f[H];
    for (slot, j, h) in I_INDEX {
        let mult = if j == h { 1.0 } else { 2.0 };
        v += mult * k[j] * k[h] * f[slot];
    }
    v
}

fn variant_of(source: SplitSource<'_>, quad: &QuadratureSpec) -> Result<(SplitVariant, String)> {
    Ok(match source {
        SplitSource::Fpl(fk) => (SplitVariant::FplLimit { gamma: fk.gamma, lambda0: fk.lambda0 }, fk.tag()),
        SplitSource::Approx(fam) => {
            if fam.base.gamma <= -3.0 {
                return Err(Error::Domain(format!("approximate modes need gamma > -3, got {}", fam.base.gamma)));
            }
            let (w1, w2) = approx_weights(fam, quad)?;
            (SplitVariant::ApproxBoltzmann { gamma: fam.base.gamma, epsilon: fam.epsilon, w1, w2 }, format!("approx({})", fam.tag()))
        }
    })
}

/// Split fields at one m by direct 3D cubature of each field integral.
pub fn split_fields_cubature(source: SplitSource<'_>, grid: &GridConfig, m: Lattice, quad: &QuadratureSpec) -> Result<[f64; field::COUNT]> {
    check_pair(grid, m, m)?;
    let (variant, _) = variant_of(source, quad)?;
    let g = variant.gamma();
    let mf = to_f64(m);
    let q_max = grid.q_max();
    let bw = norm(m);
    let phase = |rho: f64, w: [f64; 3]| Complex64::from_polar(rho.powf(g), rho * dot3(mf, w));
    let integral = |f: &dyn Fn(f64, [f64; 3]) -> Complex64| -> Result<f64> {
        let v = checked(|q| ball_cubature(q_max, 2.0 + g, bw, mf, q, f), quad, || format!("split field at m={m:?}"))?;
        Ok(v.re)
    };
    let mut s = [0.0; 3];
    for (j, sj) in s.iter_mut().enumerate() {
        *sj = integral(&|rho, w| Complex64::new(0.0, rho * w[j]) * phase(rho, w))?;
    }
    let p = integral(&|rho, w| rho * rho * phase(rho, w))?;
    let mut t = [[0.0; 3]; 3];
    for j in 0..3 {
        for h in j..3 {
            t[j][h] = integral(&|rho, w| rho * rho * w[j] * w[h] * phase(rho, w))?;
            t[h][j] = t[j][h];
        }
    }
    Ok(fields_from_transforms(&variant, m, &Transforms { s, p, t }))
}

const SPLIT_VERIFY_SEED: u64 = 0x5eed_5b11;

/// Computes the split fields over the lattice by radial reduction and
/// checks the reassembly against direct quadrature on random pairs.
pub fn build_split_kernel(source: SplitSource<'_>, grid: &GridConfig, quad: &QuadratureSpec) -> Result<SplitKernel> {
    let (variant, kernel_tag) = variant_of(source, quad)?;
    let g = variant.gamma();
    if g <= -3.0 {
        return Err(Error::Domain(format!("split fields need gamma > -3, got {g}")));
    }
    let q_max = grid.q_max();
    let norms: Vec<i64> = {
        let mut set: BTreeMap<i64, ()> = BTreeMap::new();
        for m in grid.vectors() {
            set.insert(dot(m, m), ());
        }
        set.into_keys().collect()
    };
    let moments: Vec<Result<(i64, [f64; 4])>> = norms
        .par_iter()
        .map(|&n2| {
            let mn = (n2 as f64).sqrt();
            let r = radial_moments(g, q_max, mn, quad.rho_scale);
            if quad.check_refinement {
                let r2 = radial_moments(g, q_max, mn, 2.0 * quad.rho_scale);
                let diff = r.iter().zip(&r2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if !(diff <= quad.tol) {
                    return Err(Error::QuadratureNotConverged { what: format!("radial moments at |m|^2={n2}"), diff, tol: quad.tol });
                }
            }
            Ok((n2, r))
        })
        .collect();
    let mut table = BTreeMap::new();
    for r in moments {
        let (n2, v) = r?;
        table.insert(n2, v);
    }
    let fields: Vec<[f64; field::COUNT]> = grid
        .vectors()
        .map(|m| fields_from_transforms(&variant, m, &transforms_from_moments(m, table[&dot(m, m)])))
        .collect();
    let split = SplitKernel { n: grid.n, variant, kernel_tag, tol: quad.tol, fields };
    split.verify_reassembly(grid, quad)?;
    Ok(split)
}

impl SplitKernel {
    pub fn grid(&self) -> GridConfig {
        GridConfig { n: self.n }
    }

    /// Field vector at lattice point m.
    pub fn fields_at(&self, m: Lattice) -> &[f64; field::COUNT] {
        let idx = self.grid().index(m).expect("m inside the lattice");
        &self.fields[idx]
    }

    /// All field vectors in lexicographic order of m.
    pub fn fields(&self) -> &[[f64; field::COUNT]] {
        &self.fields
    }

    /// Reassembled mode for the pair (l, m).
    pub fn mode(&self, l: Lattice, m: Lattice) -> f64 {
        reassemble(self.fields_at(m), to_f64(add(l, m)))
    }

    fn direct_mode(&self, grid: &GridConfig, l: Lattice, m: Lattice, quad: &QuadratureSpec) -> Result<f64> {
        let q = quad.unchecked();
        match self.variant {
            SplitVariant::FplLimit { gamma, lambda0 } => {
                let fk = FplKernel::new(gamma, lambda0)?;
                Ok(fpl_mode_grazing(&fk, grid, l, m, &q)?.re)
            }
            SplitVariant::ApproxBoltzmann { gamma, w1, w2, .. } => Ok(approx_raw(gamma, w1, w2, grid.q_max(), l, m, &q).re),
        }
    }

    fn verify_reassembly(&self, grid: &GridConfig, quad: &QuadratureSpec) -> Result<()> {
        let pairs = random_pairs(grid, quad.verify_samples, SPLIT_VERIFY_SEED);
        let results: Vec<Result<()>> = pairs
            .par_iter()
            .map(|&(l, m)| {
                let direct = self.direct_mode(grid, l, m, quad)?;
                let split = self.mode(l, m);
                let scale = direct.abs().max(1.0);
                if !((direct - split).abs() <= quad.tol * scale) {
                    return Err(Error::Symmetry { l, m, detail: format!("split reassembly {split:e} differs from direct quadrature {direct:e}") });
                }
                Ok(())
            })
            .collect();
        results.into_iter().collect()
    }

    fn header(&self) -> cache::Header {
        cache::Header {
            variant: self.variant.code(),
            n: self.n as u32,
            tag_hash: cache::tag_hash(&self.kernel_tag),
            tol: self.tol,
            count: self.fields.len() as u64,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut payload = Vec::with_capacity(self.fields.len() * field::COUNT * 8 + 32);
        let params: [f64; 4] = match self.variant {
            SplitVariant::FplLimit { gamma, lambda0 } => [gamma, lambda0, 0.0, 0.0],
            SplitVariant::ApproxBoltzmann { gamma, epsilon, w1, w2 } => [gamma, epsilon, w1, w2],
        };
        for x in params {
            payload.extend_from_slice(&x.to_le_bytes());
        }
        for f in &self.fields {
            for x in f {
                payload.extend_from_slice(&x.to_le_bytes());
            }
        }
        cache::write(path, &self.header(), &payload)
    }

    /// Loads a split kernel, validating N, tag, tolerance and variant.
    pub fn load(path: &Path, n: usize, source: SplitSource<'_>, quad: &QuadratureSpec) -> Result<Self> {
        let (variant, tag) = variant_of(source, quad)?;
        let (h, payload) = cache::read(path)?;
        let expected = cache::Header { variant: variant.code(), n: n as u32, tag_hash: cache::tag_hash(&tag), tol: quad.tol, count: h.count };
        cache::check(&h, &expected)?;
        let grid = GridConfig { n };
        if h.count as usize != grid.len() || payload.len() != 32 + grid.len() * field::COUNT * 8 {
            return Err(Error::Cache(format!("{}: payload length does not match the lattice", path.display())));
        }
        let vals: Vec<f64> = cache::f64s(&payload).collect();
        let stored = match variant {
            SplitVariant::FplLimit { .. } => SplitVariant::FplLimit { gamma: vals[0], lambda0: vals[1] },
            SplitVariant::ApproxBoltzmann { .. } => SplitVariant::ApproxBoltzmann { gamma: vals[0], epsilon: vals[1], w1: vals[2], w2: vals[3] },
        };
        if stored != variant {
            return Err(Error::Cache(format!("{}: stored kernel parameters differ", path.display())));
        }
        let fields = vals[4..]
            .chunks_exact(field::COUNT)
            .map(|c| c.try_into().expect("field chunk"))
            .collect();
        Ok(SplitKernel { n, variant, kernel_tag: tag, tol: quad.tol, fields })
    }

    /// Loads from `path` when present, otherwise builds and saves.
    pub fn cached(source: SplitSource<'_>, grid: &GridConfig, quad: &QuadratureSpec, path: Option<&Path>) -> Result<Self> {
        if let Some(p) = path {
            if p.exists() {
                return Self::load(p, grid.n, source, quad);
            }
        }
        let s = build_split_kernel(source, grid, quad)?;
        if let Some(p) = path {
            s.save(p)?;
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_sections::{CrossSection, FamilyKind};
    use crate::grid::neg;

    fn quad(g: &GridConfig) -> QuadratureSpec {
        QuadratureSpec::for_grid(g)
    }

    #[test]
    fn psi_coefficient() {
        let fk = FplKernel::new(0.0, 3.0).unwrap();
        assert_eq!(fk.psi_coeff, 3.0 / 8.0);
        assert!(matches!(FplKernel::new(-3.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn fpl_mode_vanishes_for_zero_k() {
        let g = GridConfig::new(2).unwrap();
        let fk = FplKernel::new(0.0, 1.0).unwrap();
        assert_eq!(fpl_mode(&fk, &g, [1, -2, 0], [-1, 2, 0], &quad(&g)).unwrap(), 0.0);
        assert_eq!(fpl_mode_alt(&fk, &g, [1, 1, 0], [1, 1, 0], &quad(&g)).unwrap(), 0.0);
    }

    #[test]
    fn fpl_alt_at_zero_m_against_radial_oracle() {
        // ∫Ψ[l⊥]² dq with the angular average (2/3)|l|²: 4π (2/3) c ∫ ρ^{γ+4} dρ
        let g = GridConfig::new(2).unwrap();
        for gamma in [0.0, 1.0, -0.5] {
            let fk = FplKernel::new(gamma, 1.3).unwrap();
            let v = fpl_mode_alt(&fk, &g, [1, 0, 0], [0, 0, 0], &quad(&g)).unwrap();
            let q = g.q_max();
            let oracle = -(4.0 * PI * 2.0 / 3.0 * fk.psi_coeff * q.powf(gamma + 5.0) / (gamma + 5.0));
            assert!((v - oracle).abs() < 1e-10 * oracle.abs(), "gamma={gamma}: {v} {oracle}");
        }
    }

    #[test]
    fn fpl_forms_agree_and_are_symmetric() {
        let g = GridConfig::new(3).unwrap();
        let fk = FplKernel::new(0.0, 1.0).unwrap();
        let q = quad(&g);
        for (l, m) in random_pairs(&g, 8, 3) {
            let a = fpl_mode(&fk, &g, l, m, &q).unwrap();
            let b = fpl_mode_alt(&fk, &g, l, m, &q).unwrap();
            let c = fpl_mode(&fk, &g, neg(l), neg(m), &q).unwrap();
            let d = fpl_mode(&fk, &g, neg(l), m, &q).unwrap();
            assert!((a - b).abs() < 2e-10, "{l:?} {m:?}: {a} {b}");
            assert!((a - c).abs() < 2e-10 && (a - d).abs() < 2e-10);
        }
    }

    #[test]
    fn split_matches_cubature_fields_and_g_at_zero() {
        let g = GridConfig::new(3).unwrap();
        let q = quad(&g);
        let fk = FplKernel::new(0.0, 1.0).unwrap();
        let split = build_split_kernel(SplitSource::Fpl(&fk), &g, &q).unwrap();
        for m in [[0, 0, 0], [1, 0, 0], [2, -1, 3], [-3, 3, 1]] {
            let cub = split_fields_cubature(SplitSource::Fpl(&fk), &g, m, &q).unwrap();
            for (a, b) in split.fields_at(m).iter().zip(&cub) {
                assert!((a - b).abs() < 1e-10, "m={m:?}: {a} {b}");
            }
        }
        let q5 = g.q_max().powi(5);
        let g0 = -fk.lambda0 / 8.0 * 4.0 * PI * q5 / 5.0;
        assert!((split.fields_at([0, 0, 0])[field::G] - g0).abs() < 1e-12 * g0.abs());
        // radial symmetry of G and parity of F
        let a = split.fields_at([3, 0, 0]);
        let b = split.fields_at([0, 0, -3]);
        assert!((a[field::G] - b[field::G]).abs() < 1e-13);
        let m = [1, -2, 3];
        for j in 0..3 {
            assert_eq!(split.fields_at(m)[j], -split.fields_at(neg(m))[j]);
        }
        for m in g.vectors() {
            assert!(split.mode(neg(m), m).abs() < 1e-15);
        }
    }

    #[test]
    fn approx_split_matches_direct() {
        let g = GridConfig::new(3).unwrap();
        let q = quad(&g);
        let base = CrossSection::power_law(0.0, 0.5).unwrap();
        let fam = GrazingFamily::new(base, FamilyKind::Rescaled, 0.1).unwrap();
        let split = build_split_kernel(SplitSource::Approx(&fam), &g, &q).unwrap();
        for (l, m) in random_pairs(&g, 10, 9) {
            let d = approx_boltzmann_mode(&fam, &g, l, m, &q).unwrap();
            assert!((d - split.mode(l, m)).abs() < 1e-10, "{l:?} {m:?}");
        }
        for m in [[0, 0, 0], [2, 1, -1]] {
            let cub = split_fields_cubature(SplitSource::Approx(&fam), &g, m, &q).unwrap();
            for (a, b) in split.fields_at(m).iter().zip(&cub) {
                assert!((a - b).abs() < 1e-10, "m={m:?}: {a} {b}");
            }
        }
    }

    #[test]
    fn split_cache_round_trip() {
        let g = GridConfig::new(2).unwrap();
        let q = quad(&g);
        let fk = FplKernel::new(1.0, 2.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("split.bin");
        let a = SplitKernel::cached(SplitSource::Fpl(&fk), &g, &q, Some(&p)).unwrap();
        let b = SplitKernel::cached(SplitSource::Fpl(&fk), &g, &q, Some(&p)).unwrap();
        assert_eq!(a, b);
        let other = FplKernel::new(1.0, 3.0).unwrap();
        assert!(matches!(SplitKernel::load(&p, 2, SplitSource::Fpl(&other), &q), Err(Error::Cache(_))));
    }
}
