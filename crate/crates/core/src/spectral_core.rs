//! Spectral solution state, projection of initial data, direct and fast
//! collision evaluators, RK4 time stepping and physical-space diagnostics.
//!
//! The state holds f̂_k for k ∈ {-N..N}³ with f_N(v) = Σ f̂_k e^{ik·v} on the
//! period [-π, π)³. The semi-discrete system is ∂_t f̂_k = Σ_{l+m=k} f̂_l f̂_m B(l,m).

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::boltzmann_modes::ModeTensor;
use crate::error::{Error, Result};
use crate::fft3::{Convolver, Fft3};
use crate::grazing_fpl_modes::{field, SplitKernel, SplitVariant};
use crate::grid::{dot, sub, to_f64, GridConfig, Lattice};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Default bound on |f̂_k| before a step is declared unstable.
pub const DEFAULT_BLOWUP_BOUND: f64 = 1e6;

/// Sampled values outside the support ball above this level violate the support condition.
pub const SUPPORT_TOL: f64 = 1e-14;

/// Fourier coefficients of a real distribution at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub grid: GridConfig,
    pub coeffs: Vec<Complex64>,
    pub time: f64,
}

impl SpectralState {
    pub fn zeros(grid: GridConfig) -> Self {
        Self { grid, coeffs: vec![ZERO; grid.len()], time: 0.0 }
    }

    pub fn from_coeffs(grid: GridConfig, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: coeffs.len() });
        }
        Ok(Self { grid, coeffs, time: 0.0 })
    }

    pub fn coeff(&self, k: Lattice) -> Complex64 {
        self.grid.index(k).map_or(ZERO, |i| self.coeffs[i])
    }

    /// max_k |f̂_{-k} − conj(f̂_k)|.
    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.grid, &self.coeffs)
    }

    /// Replaces f̂_k by (f̂_k + conj f̂_{-k})/2.
    pub fn symmetrize(&mut self) {
        symmetrize(&self.grid, &mut self.coeffs);
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// (2π)³ Re f̂_0.
    pub fn mass(&self) -> f64 {
        (2.0 * PI).powi(3) * self.coeff([0, 0, 0]).re
    }
}

fn mirror(grid: &GridConfig, i: usize) -> usize {
    grid.len() - 1 - i
}

/// max_k |c_{-k} − conj(c_k)| for a lattice array.
pub fn hermitian_defect(grid: &GridConfig, c: &[Complex64]) -> f64 {
    (0..c.len()).map(|i| (c[mirror(grid, i)] - c[i].conj()).norm()).fold(0.0, f64::max)
}

fn symmetrize(grid: &GridConfig, c: &mut [Complex64]) {
    let old = c.to_vec();
    for (i, v) in c.iter_mut().enumerate() {
        *v = 0.5 * (old[i] + old[mirror(grid, i)].conj());
    }
}

/// Cell-centred periodic grid v_j = −π + (j + ½)2π/n per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhysicalGrid {
    pub n: usize,
}

impl PhysicalGrid {
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(3)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn point(&self, i: usize) -> [f64; 3] {
        let n = self.n;
        let h = self.spacing();
        [i / (n * n), (i / n) % n, i % n].map(|j| -PI + h * (j as f64 + 0.5))
    }

    fn cube_index(&self, k: Lattice) -> usize {
        let w = |c: i32| c.rem_euclid(self.n as i32) as usize;
        (w(k[0]) * self.n + w(k[1])) * self.n + w(k[2])
    }

    /// e^{ik·v_0} with v_0 the first grid point.
    fn phase(&self, k: Lattice) -> Complex64 {
        let v0 = -PI + 0.5 * self.spacing();
        Complex64::from_polar(1.0, v0 * (k[0] + k[1] + k[2]) as f64)
    }
}

/// Projects `f` onto the lattice by the discrete transform on an n_grid³ grid.
/// Values outside B(0,R) above [`SUPPORT_TOL`] are rejected when `strict`
/// and logged otherwise.
pub fn project_initial<F>(f: F, grid: &GridConfig, n_grid: usize, strict: bool) -> Result<SpectralState>
where
    F: Fn([f64; 3]) -> f64 + Sync,
{
    if n_grid < 2 * grid.side() {
        return Err(Error::Domain(format!("n_grid = {n_grid} must be at least 2(2N+1) = {}", 2 * grid.side())));
    }
    let pg = PhysicalGrid { n: n_grid };
    let r = grid.radius();
    let values: Vec<f64> = (0..pg.len()).into_par_iter().map(|i| f(pg.point(i))).collect();
    let mut worst: Option<([f64; 3], f64)> = None;
    for (i, &x) in values.iter().enumerate() {
        if !x.is_finite() || x < -SUPPORT_TOL {
            return Err(Error::Domain(format!("initial datum {x:e} at {:?} is not a nonnegative finite value", pg.point(i))));
        }
        let v = pg.point(i);
        if v.iter().map(|c| c * c).sum::<f64>().sqrt() > r && x.abs() > SUPPORT_TOL && worst.is_none_or(|w| x.abs() > w.1) {
            worst = Some((v, x.abs()));
        }
    }
    if let Some((v, value)) = worst {
        if strict {
            return Err(Error::SupportViolation { v, value });
        }
        log::warn!("initial datum is {value:e} at {v:?}, outside the support ball of radius {r}");
    }
    let mut cube: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    Fft3::new(n_grid).forward(&mut cube);
    let scale = 1.0 / pg.len() as f64;
    let coeffs = grid.vectors().map(|k| cube[pg.cube_index(k)] * pg.phase(k).conj() * scale).collect();
    let mut s = SpectralState::from_coeffs(*grid, coeffs)?;
    s.symmetrize();
    Ok(s)
}

/// f_N on the physical grid, lexicographic order.
pub fn reconstruct(state: &SpectralState, n_grid: usize) -> Result<Vec<f64>> {
    if n_grid < state.grid.side() {
        return Err(Error::Domain(format!("n_grid = {n_grid} must be at least 2N+1 = {}", state.grid.side())));
    }
    let pg = PhysicalGrid { n: n_grid };
    let mut cube = vec![ZERO; pg.len()];
    for (k, c) in state.grid.vectors().zip(&state.coeffs) {
        cube[pg.cube_index(k)] = c * pg.phase(k);
    }
    Fft3::new(n_grid).inverse(&mut cube);
    Ok(cube.iter().map(|c| c.re).collect())
}

/// Mass, momentum and energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mass: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
}

fn moments_of(state: &SpectralState, pg: PhysicalGrid, values: &[f64]) -> Moments {
    let h3 = pg.spacing().powi(3);
    let mut momentum = [0.0; 3];
    let mut energy = 0.0;
    for (i, &f) in values.iter().enumerate() {
        let v = pg.point(i);
        for j in 0..3 {
            momentum[j] += h3 * f * v[j];
        }
        energy += h3 * f * 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    }
    Moments { mass: state.mass(), momentum, energy }
}

/// Moments of the reconstruction on an n_grid³ grid; mass is (2π)³ Re f̂_0.
pub fn moments(state: &SpectralState, n_grid: usize) -> Result<Moments> {
    let values = reconstruct(state, n_grid)?;
    Ok(moments_of(state, PhysicalGrid { n: n_grid }, &values))
}

/// Maxwellian ρ (2πT)^{-3/2} exp(−|v−u|²/2T).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maxwellian {
    pub density: f64,
    pub velocity: [f64; 3],
    pub temperature: f64,
}

impl Maxwellian {
    /// Maxwellian with the given mass, momentum and energy.
    pub fn matching(m: &Moments) -> Result<Self> {
        if !(m.mass > 0.0) {
            return Err(Error::Domain(format!("matched Maxwellian needs positive mass, got {:e}", m.mass)));
        }
        let u = m.momentum.map(|p| p / m.mass);
        let t = (2.0 * m.energy / m.mass - (u[0] * u[0] + u[1] * u[1] + u[2] * u[2])) / 3.0;
        if !(t > 0.0) {
            return Err(Error::Domain(format!("matched Maxwellian needs positive temperature, got {t:e}")));
        }
        Ok(Self { density: m.mass, velocity: u, temperature: t })
    }

    pub fn eval(&self, v: [f64; 3]) -> f64 {
        let d2: f64 = (0..3).map(|j| (v[j] - self.velocity[j]).powi(2)).sum();
        self.density * (2.0 * PI * self.temperature).powf(-1.5) * (-d2 / (2.0 * self.temperature)).exp()
    }
}

/// Kernel modes consumed by the direct evaluator.
pub trait ModeSource: Sync {
    fn n(&self) -> usize;

    fn mode(&self, l: Lattice, m: Lattice) -> f64;

    /// Σ_{l+m=k} c_l c_m B(l,m).
    fn direct_row(&self, grid: &GridConfig, k: Lattice, c: &[Complex64]) -> Complex64 {
        let mut s = ZERO;
        for_each_pair(grid, k, |l, m, li, mi| s += c[li] * c[mi] * self.mode(l, m));
        s
    }

    /// Σ_{l+m=k} |c_m| (|B(l,m)| + |B(m,l)|).
    fn growth_row(&self, grid: &GridConfig, k: Lattice, c: &[Complex64]) -> f64 {
        let mut s = 0.0;
        for_each_pair(grid, k, |l, m, _, mi| s += c[mi].norm() * (self.mode(l, m).abs() + self.mode(m, l).abs()));
        s
    }
}

impl ModeSource for ModeTensor {
    fn n(&self) -> usize {
        self.n
    }

    fn mode(&self, l: Lattice, m: Lattice) -> f64 {
        self.get(l, m)
    }
}

/// Multipliers of the split fields at output index k.
pub fn split_multipliers(k: Lattice) -> [f64; field::COUNT] {
    let kf = to_f64(k);
    std::array::from_fn(|slot| multiplier(slot, kf))
}

fn dot_fields(w: &[f64; field::COUNT], f: &[f64; field::COUNT]) -> f64 {
    w.iter().zip(f).map(|(a, b)| a * b).sum()
}

impl ModeSource for SplitKernel {
    fn n(&self) -> usize {
        self.n
    }

    fn mode(&self, l: Lattice, m: Lattice) -> f64 {
        SplitKernel::mode(self, l, m)
    }

    fn direct_row(&self, grid: &GridConfig, k: Lattice, c: &[Complex64]) -> Complex64 {
        let w = split_multipliers(k);
        let fields = self.fields();
        let mut s = ZERO;
        for_each_pair(grid, k, |_, _, li, mi| s += c[li] * c[mi] * dot_fields(&w, &fields[mi]));
        s
    }

    fn growth_row(&self, grid: &GridConfig, k: Lattice, c: &[Complex64]) -> f64 {
        let w = split_multipliers(k);
        let fields = self.fields();
        let mut s = 0.0;
        for_each_pair(grid, k, |_, _, li, mi| s += c[mi].norm() * (dot_fields(&w, &fields[mi]).abs() + dot_fields(&w, &fields[li]).abs()));
        s
    }
}

/// Modes given by a closure.
pub struct FnModes<F> {
    pub n: usize,
    pub f: F,
}

impl<F: Fn(Lattice, Lattice) -> f64 + Sync> ModeSource for FnModes<F> {
    fn n(&self) -> usize {
        self.n
    }

    fn mode(&self, l: Lattice, m: Lattice) -> f64 {
        (self.f)(l, m)
    }
}

/// Calls `f(l, m, index(l), index(m))` for every m in the lattice with
/// l = k − m in the lattice.
fn for_each_pair<F: FnMut(Lattice, Lattice, usize, usize)>(grid: &GridConfig, k: Lattice, mut f: F) {
    let n = grid.n as i32;
    let side = grid.side() as i64;
    let range = |c: i32| (c - n).max(-n)..=(c + n).min(n);
    let idx = |x: Lattice| ((x[0] + n) as i64 * side + (x[1] + n) as i64) * side + (x[2] + n) as i64;
    let base = idx(k) + idx([0, 0, 0]);
    for m0 in range(k[0]) {
        for m1 in range(k[1]) {
            for m2 in range(k[2]) {
                let m = [m0, m1, m2];
                let mi = idx(m);
                f(sub(k, m), m, (base - mi) as usize, mi as usize);
            }
        }
    }
}

fn check_n(grid: &GridConfig, n: usize) -> Result<()> {
    if grid.n != n {
        return Err(Error::DimensionMismatch { expected: grid.n, found: n });
    }
    Ok(())
}

/// Σ_{l+m=k} f̂_l f̂_m B(l,m) by direct summation.
pub fn collision_direct(state: &SpectralState, modes: &dyn ModeSource) -> Result<Vec<Complex64>> {
    check_n(&state.grid, modes.n())?;
    let grid = state.grid;
    let ks: Vec<Lattice> = grid.vectors().collect();
    Ok(ks.par_iter().map(|&k| modes.direct_row(&grid, k, &state.coeffs)).collect())
}

/// Fast evaluator: one linear convolution per split field.
#[derive(Debug, Clone)]
pub struct FastEvaluator<'a> {
    split: &'a SplitKernel,
    conv: Convolver,
    active: Vec<usize>,
}

impl<'a> FastEvaluator<'a> {
    pub fn new(split: &'a SplitKernel) -> Self {
        let active = match split.variant {
            SplitVariant::FplLimit { .. } => (0..field::H).collect(),
            SplitVariant::ApproxBoltzmann { .. } => (0..field::COUNT).collect(),
        };
        Self { split, conv: Convolver::new(split.n), active }
    }

    pub fn padded_size(&self) -> usize {
        self.conv.padded_size()
    }

    /// Σ_j k_j (f̂ ∗ f̂F_j)_k + |k|² (f̂ ∗ f̂G)_k + Σ_{jh} k_j k_h (f̂ ∗ f̂I_jh)_k + (f̂ ∗ f̂H)_k.
    ///
    /// F_j is odd in m, so f̂F_j is anti-Hermitian and i f̂F_j Hermitian; all
    /// transformed arrays are then real and are packed two per complex transform.
    pub fn apply(&self, state: &SpectralState) -> Result<Vec<Complex64>> {
        check_n(&state.grid, self.split.n)?;
        let grid = state.grid;
        let fields = self.split.fields();
        let odd = |slot: usize| slot < field::G;
        let hermitian: Vec<Vec<Complex64>> = self
            .active
            .iter()
            .map(|&slot| {
                let rot = if odd(slot) { Complex64::i() } else { Complex64::new(1.0, 0.0) };
                state.coeffs.iter().zip(fields).map(|(c, f)| c * f[slot] * rot).collect()
            })
            .collect();
        let mut real_hats: Vec<Vec<f64>> = Vec::with_capacity(hermitian.len() + 1);
        let mut inputs: Vec<&[Complex64]> = vec![&state.coeffs];
        inputs.extend(hermitian.iter().map(|v| v.as_slice()));
        for pair in inputs.chunks(2) {
            let (x, y) = self.conv.transform_hermitian_pair(pair[0], pair.get(1).copied());
            real_hats.push(x);
            if pair.len() == 2 {
                real_hats.push(y);
            }
        }
        let f_hat = &real_hats[0];
        let products: Vec<Vec<f64>> = real_hats[1..].iter().map(|h| h.iter().zip(f_hat).map(|(a, b)| a * b).collect()).collect();
        let mut out = vec![ZERO; grid.len()];
        let ks: Vec<[f64; 3]> = grid.vectors().map(to_f64).collect();
        for (chunk, slots) in products.chunks(2).zip(self.active.chunks(2)) {
            let (d1, d2) = self.conv.inverse_real_pair(&chunk[0], chunk.get(1).map(|v| v.as_slice()));
            for (d, &slot) in [d1, d2].iter().zip(slots) {
                let rot = if odd(slot) { Complex64::new(0.0, -1.0) } else { Complex64::new(1.0, 0.0) };
                for ((o, c), k) in out.iter_mut().zip(d).zip(&ks) {
                    *o += c * rot * multiplier(slot, *k);
                }
            }
        }
        Ok(out)
    }
}

fn multiplier(slot: usize, k: [f64; 3]) -> f64 {
    use field::*;
    match slot {
        F1 | F2 | F3 => k[slot - F1],
        G => k[0] * k[0] + k[1] * k[1] + k[2] * k[2],
        H => 1.0,
        _ => {
            let (_, j, h) = I_INDEX.iter().copied().find(|e| e.0 == slot).expect("I slot");
            if j == h {
                k[j] * k[j]
            } else {
                2.0 * k[j] * k[h]
            }
        }
    }
}

/// Fast convolution evaluator, building the transform plans per call.
pub fn collision_fast(state: &SpectralState, split: &SplitKernel) -> Result<Vec<Complex64>> {
    FastEvaluator::new(split).apply(state)
}

/// Collision operator evaluator.
pub enum Evaluator<'a> {
    Direct(&'a dyn ModeSource),
    Fast(FastEvaluator<'a>),
}

impl<'a> Evaluator<'a> {
    pub fn direct(modes: &'a dyn ModeSource) -> Self {
        Evaluator::Direct(modes)
    }

    pub fn fast(split: &'a SplitKernel) -> Self {
        Evaluator::Fast(FastEvaluator::new(split))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Evaluator::Direct(_) => "direct",
            Evaluator::Fast(_) => "fast",
        }
    }

    pub fn apply(&self, state: &SpectralState) -> Result<Vec<Complex64>> {
        match self {
            Evaluator::Direct(m) => collision_direct(state, *m),
            Evaluator::Fast(f) => f.apply(state),
        }
    }

    /// Modes the evaluator represents.
    pub fn modes(&self) -> &dyn ModeSource {
        match self {
            Evaluator::Direct(m) => *m,
            Evaluator::Fast(f) => f.split,
        }
    }
}

/// Row-sum bound of the linearized operator at `state`,
/// max_k Σ_m |f̂_m| (|B(k−m,m)| + |B(m,k−m)|).
pub fn growth_estimate(state: &SpectralState, modes: &dyn ModeSource) -> Result<f64> {
    check_n(&state.grid, modes.n())?;
    let grid = state.grid;
    let ks: Vec<Lattice> = grid.vectors().collect();
    Ok(ks.par_iter().map(|&k| modes.growth_row(&grid, k, &state.coeffs)).reduce(|| 0.0, f64::max))
}

/// 0.1 / [`growth_estimate`] at the given state.
pub fn suggest_dt(state: &SpectralState, eval: &Evaluator<'_>) -> Result<f64> {
    let rate = growth_estimate(state, eval.modes())?;
    Ok(if rate > 0.0 { 0.1 / rate } else { f64::INFINITY })
}

/// Time integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Rk4,
}

/// One step of the coefficient ODE followed by Hermitian symmetrization.
pub fn step(state: &SpectralState, eval: &Evaluator<'_>, dt: f64, scheme: Scheme, blowup_bound: f64) -> Result<SpectralState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("time step {dt} must be positive")));
    }
    let Scheme::Rk4 = scheme;
    let stage = |base: &SpectralState, k: &[Complex64], h: f64| SpectralState {
        grid: base.grid,
        coeffs: base.coeffs.iter().zip(k).map(|(c, d)| c + d * h).collect(),
        time: base.time,
    };
    let k1 = eval.apply(state)?;
    let k2 = eval.apply(&stage(state, &k1, 0.5 * dt))?;
    let k3 = eval.apply(&stage(state, &k2, 0.5 * dt))?;
    let k4 = eval.apply(&stage(state, &k3, dt))?;
    let coeffs: Vec<Complex64> =
        (0..state.coeffs.len()).map(|i| state.coeffs[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0)).collect();
    let mut next = SpectralState { grid: state.grid, coeffs, time: state.time + dt };
    next.symmetrize();
    let worst = next.coeffs.iter().map(|c| c.norm()).fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
    if !(worst <= blowup_bound) {
        return Err(Error::Blowup { time: next.time, value: worst });
    }
    Ok(next)
}

/// Diagnostics of one relaxation snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxRecord {
    pub time: f64,
    pub moments: Moments,
    /// L² distance of f_N to the reference Maxwellian on the physical grid.
    pub distance: f64,
    pub min_f: f64,
}

/// Snapshot diagnostics against a fixed Maxwellian.
pub fn diagnostics(state: &SpectralState, maxwellian: &Maxwellian, n_grid: usize) -> Result<RelaxRecord> {
    let pg = PhysicalGrid { n: n_grid };
    let values = reconstruct(state, n_grid)?;
    let moments = moments_of(state, pg, &values);
    let h3 = pg.spacing().powi(3);
    let dist2: f64 = values.iter().enumerate().map(|(i, f)| (f - maxwellian.eval(pg.point(i))).powi(2)).sum();
    let min_f = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RelaxRecord { time: state.time, moments, distance: (h3 * dist2).sqrt(), min_f })
}

/// Relaxation run settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxSettings {
    pub t_end: f64,
    /// Requested step; the step count is ceil(t_end/dt) with the step shortened to land on t_end.
    pub dt: f64,
    pub n_grid: usize,
    /// Record every this many steps (the last step is always recorded).
    pub record_every: usize,
    pub blowup_bound: f64,
}

/// Integrates to `t_end`, recording diagnostics against the Maxwellian matched at t = 0.
pub fn relax(initial: &SpectralState, eval: &Evaluator<'_>, s: &RelaxSettings) -> Result<Vec<RelaxRecord>> {
    let maxwellian = Maxwellian::matching(&moments(initial, s.n_grid)?)?;
    let mut rows = vec![diagnostics(initial, &maxwellian, s.n_grid)?];
    if !(s.t_end > 0.0) {
        return Ok(rows);
    }
    let steps = (s.t_end / s.dt).ceil().max(1.0) as usize;
    let dt = s.t_end / steps as f64;
    let every = s.record_every.max(1);
    let mut state = initial.clone();
    for i in 1..=steps {
        state = step(&state, eval, dt, Scheme::Rk4, s.blowup_bound)?;
        state.time = initial.time + dt * i as f64;
        if i % every == 0 || i == steps {
            rows.push(diagnostics(&state, &maxwellian, s.n_grid)?);
        }
    }
    Ok(rows)
}

/// Smooth step equal to 1 for r ≤ r0, 0 for r ≥ r1.
pub fn smooth_cutoff(r: f64, r0: f64, r1: f64) -> f64 {
    if r <= r0 {
        return 1.0;
    }
    if r >= r1 {
        return 0.0;
    }
    let e = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let x = (r - r0) / (r1 - r0);
    e(1.0 - x) / (e(1.0 - x) + e(x))
}

/// Fraction of the support radius where the smooth cutoff starts.
pub const CUTOFF_START: f64 = 0.6;

/// Built-in initial data, cut off smoothly inside B(0,R).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    TruncatedMaxwellian(Maxwellian),
    SumOfTwoMaxwellians(Maxwellian, Maxwellian),
    /// a·exp(1 − 1/(1 − |v|²/w²)) for |v| < w.
    SmoothBump { amplitude: f64, width: f64 },
}

impl InitialCondition {
    pub fn eval(&self, v: [f64; 3], radius: f64) -> f64 {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let cut = || smooth_cutoff(r, CUTOFF_START * radius, radius);
        match self {
            InitialCondition::TruncatedMaxwellian(m) => m.eval(v) * cut(),
            InitialCondition::SumOfTwoMaxwellians(a, b) => (a.eval(v) + b.eval(v)) * cut(),
            InitialCondition::SmoothBump { amplitude, width } => {
                let w = width.min(radius);
                let x = r * r / (w * w);
                if x < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - x)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Projection onto the grid, rejecting support violations.
    pub fn project(&self, grid: &GridConfig, n_grid: usize) -> Result<SpectralState> {
        let r = grid.radius();
        project_initial(|v| self.eval(v, r), grid, n_grid, true)
    }
}

/// Coefficient CSV: k1,k2,k3,re,im in lexicographic k order.
pub fn write_coefficients_csv<W: Write>(state: &SpectralState, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k1", "k2", "k3", "re", "im"])?;
    for (k, c) in state.grid.vectors().zip(&state.coeffs) {
        out.write_record([k[0].to_string(), k[1].to_string(), k[2].to_string(), c.re.to_string(), c.im.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Physical-grid CSV: v1,v2,v3,f in lexicographic grid order.
pub fn write_physical_csv<W: Write>(state: &SpectralState, n_grid: usize, w: W) -> Result<()> {
    let pg = PhysicalGrid { n: n_grid };
    let values = reconstruct(state, n_grid)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["v1", "v2", "v3", "f"])?;
    for (i, f) in values.iter().enumerate() {
        let v = pg.point(i);
        out.write_record([v[0].to_string(), v[1].to_string(), v[2].to_string(), f.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Seeded random Hermitian coefficients with decaying magnitude.
pub fn random_hermitian(grid: &GridConfig, seed: u64) -> SpectralState {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<Complex64> = grid
        .vectors()
        .map(|k| {
            let decay = (-0.1 * dot(k, k) as f64).exp();
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * decay
        })
        .collect();
    let mut s = SpectralState { grid: *grid, coeffs, time: 0.0 };
    s.symmetrize();
    let i0 = grid.index([0, 0, 0]).expect("origin");
    s.coeffs[i0] = Complex64::new(1.0, 0.0);
    s
}

/// L² norm of the difference of two lattice arrays of possibly different N,
/// each extended by zero; Parseval-scaled by (2π)^{3/2}.
pub fn l2_difference(a: &SpectralState, b: &SpectralState) -> f64 {
    let big = if a.grid.n >= b.grid.n { a.grid } else { b.grid };
    let s: f64 = big.vectors().map(|k| (a.coeff(k) - b.coeff(k)).norm_sqr()).sum();
    (2.0 * PI).powf(1.5) * s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boltzmann_modes::QuadratureSpec;
    use crate::grazing_fpl_modes::{build_split_kernel, FplKernel, SplitSource};

    fn fpl_split(n: usize) -> SplitKernel {
        let g = GridConfig::new(n).unwrap();
        let fk = FplKernel::new(0.0, 1.0).unwrap();
        build_split_kernel(SplitSource::Fpl(&fk), &g, &QuadratureSpec::for_grid(&g)).unwrap()
    }

    #[test]
    fn direct_matches_literal_loops() {
        let g = GridConfig::new(2).unwrap();
        let modes = FnModes { n: 2, f: |l: Lattice, m: Lattice| ((l[0] - 2 * m[1] + 3 * l[2]) as f64 * 0.37).sin() + m[2] as f64 };
        let s = random_hermitian(&g, 11);
        let fast = collision_direct(&s, &modes).unwrap();
        let n = 2i32;
        for (ki, k) in g.vectors().enumerate() {
            let mut acc = ZERO;
            for l0 in -n..=n {
                for l1 in -n..=n {
                    for l2 in -n..=n {
                        for m0 in -n..=n {
                            for m1 in -n..=n {
                                let m2 = k[2] - l2;
                                let (l, m) = ([l0, l1, l2], [m0, m1, m2]);
                                if m2.abs() <= n && l0 + m0 == k[0] && l1 + m1 == k[1] {
                                    acc += s.coeff(l) * s.coeff(m) * (modes.f)(l, m);
                                }
                            }
                        }
                    }
                }
            }
            assert!((acc - fast[ki]).norm() <= 1e-14 * acc.norm().max(1.0), "{k:?}");
        }
    }

    #[test]
    fn zero_state_is_fixed() {
        let split = fpl_split(2);
        let z = SpectralState::zeros(GridConfig::new(2).unwrap());
        assert!(collision_direct(&z, &split).unwrap().iter().all(|c| *c == ZERO));
        let e = Evaluator::fast(&split);
        let next = step(&z, &e, 0.1, Scheme::Rk4, DEFAULT_BLOWUP_BOUND).unwrap();
        assert!(next.coeffs.iter().all(|c| *c == ZERO));
        assert_eq!(next.time, 0.1);
    }

    #[test]
    fn fast_matches_direct_and_conserves_mass() {
        let split = fpl_split(4);
        let g = GridConfig::new(4).unwrap();
        let s = random_hermitian(&g, 5);
        let d = collision_direct(&s, &split).unwrap();
        let f = collision_fast(&s, &split).unwrap();
        let scale = d.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let err = d.iter().zip(&f).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-12 * scale, "{err} {scale}");
        assert!(hermitian_defect(&g, &d) <= 1e-12 * scale);
        assert!(hermitian_defect(&g, &f) <= 1e-12 * scale);
        let i0 = g.index([0, 0, 0]).unwrap();
        assert!(d[i0].norm() <= 1e-14 * scale && f[i0].norm() <= 1e-14 * scale);
    }

    #[test]
    fn single_pair_state() {
        let split = fpl_split(2);
        let g = GridConfig::new(2).unwrap();
        let mut s = SpectralState::zeros(g);
        s.coeffs[g.index([1, 0, 0]).unwrap()] = Complex64::new(0.3, 0.4);
        s.coeffs[g.index([-1, 0, 0]).unwrap()] = Complex64::new(0.3, -0.4);
        let d = collision_direct(&s, &split).unwrap();
        let f = collision_fast(&s, &split).unwrap();
        for (a, b) in d.iter().zip(&f) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let split = fpl_split(2);
        let s = SpectralState::zeros(GridConfig::new(3).unwrap());
        assert!(matches!(collision_direct(&s, &split), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(collision_fast(&s, &split), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn projection_of_narrow_maxwellian() {
        let g = GridConfig::new(4).unwrap();
        let m = Maxwellian { density: 1.0, velocity: [0.0; 3], temperature: 0.012 };
        let s = InitialCondition::TruncatedMaxwellian(m).project(&g, 96).unwrap();
        assert!((s.mass() - 1.0).abs() < 1e-10, "{}", s.mass());
        assert!(s.hermitian_defect() == 0.0);
        let mo = moments(&s, 32).unwrap();
        assert!(mo.momentum.iter().all(|p| p.abs() < 1e-10));
        let h3 = (2.0 * PI / 32.0).powi(3);
        let lattice_mass: f64 = reconstruct(&s, 32).unwrap().iter().sum::<f64>() * h3;
        assert!((lattice_mass - s.mass()).abs() < 1e-12);
    }

    #[test]
    fn projection_is_resolved_and_checks_support() {
        let g = GridConfig::new(3).unwrap();
        let bump = InitialCondition::SmoothBump { amplitude: 1.0, width: g.radius() };
        let a = bump.project(&g, 128).unwrap();
        let b = bump.project(&g, 256).unwrap();
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert!((x - y).norm() < 1e-9);
        }
        let gauss = |v: [f64; 3]| (-(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) / 0.1).exp();
        let a = project_initial(gauss, &g, 64, false).unwrap();
        let b = project_initial(gauss, &g, 128, false).unwrap();
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert!((x - y).norm() < 1e-12);
        }
        let zero = project_initial(|_| 0.0, &g, 16, true).unwrap();
        assert!(zero.coeffs.iter().all(|c| *c == ZERO));
        let wide = |v: [f64; 3]| (-(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])).exp();
        assert!(matches!(project_initial(wide, &g, 16, true), Err(Error::SupportViolation { .. })));
        assert!(project_initial(wide, &g, 16, false).is_ok());
        assert!(matches!(project_initial(wide, &g, 8, false), Err(Error::Domain(_))));
    }

    #[test]
    fn rk4_step_halving_order() {
        let split = fpl_split(3);
        let g = GridConfig::new(3).unwrap();
        let m = Maxwellian { density: 1.0, velocity: [0.2, 0.0, 0.0], temperature: 0.05 };
        let s0 = InitialCondition::TruncatedMaxwellian(m).project(&g, 32).unwrap();
        let e = Evaluator::fast(&split);
        let err = |dt: f64| {
            let one = step(&s0, &e, dt, Scheme::Rk4, DEFAULT_BLOWUP_BOUND).unwrap();
            let half = step(&s0, &e, dt / 2.0, Scheme::Rk4, DEFAULT_BLOWUP_BOUND).unwrap();
            let two = step(&half, &e, dt / 2.0, Scheme::Rk4, DEFAULT_BLOWUP_BOUND).unwrap();
            l2_difference(&one, &two)
        };
        let dt = suggest_dt(&s0, &e).unwrap();
        let ratio = err(dt) / err(dt / 2.0);
        assert!((ratio - 32.0).abs() < 6.0, "ratio {ratio}");
    }

    #[test]
    fn blowup_is_reported() {
        let g = GridConfig::new(1).unwrap();
        let modes = FnModes { n: 1, f: |_: Lattice, _: Lattice| 1e3 };
        let s = random_hermitian(&g, 1);
        let e = Evaluator::direct(&modes);
        assert!(matches!(step(&s, &e, 1.0, Scheme::Rk4, DEFAULT_BLOWUP_BOUND), Err(Error::Blowup { .. })));
    }

    #[test]
    fn growth_estimate_of_zero_state() {
        let split = fpl_split(2);
        let z = SpectralState::zeros(GridConfig::new(2).unwrap());
        assert_eq!(suggest_dt(&z, &Evaluator::fast(&split)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn csv_exports_are_ordered() {
        let g = GridConfig::new(1).unwrap();
        let s = random_hermitian(&g, 2);
        let mut buf = Vec::new();
        write_coefficients_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 28);
        assert!(lines[1].starts_with("-1,-1,-1,"));
        let mut buf = Vec::new();
        write_physical_csv(&s, 3, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 28);
    }
}
