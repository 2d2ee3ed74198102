//! Periodic tensor-product grids `[-L, L)^N` with FFT-based calculus.
//!
//! All spectral operations share one convention: the unnormalized forward
//! DFT, a `1/n^N` factor on the inverse, and wavenumbers `k_a = (π/L) m_a`
//! with `m_a ∈ {-n/2, …, n/2-1}`. Integrals are plain rectangle sums scaled
//! by the cell volume `h^N`, which is spectrally accurate for smooth
//! periodic integrands and makes Parseval an exact bookkeeping identity.
//!
//! Fields are stored flat in row-major order (last axis fastest); the helper
//! [`par_indexed`] hands hot loops a decoded multi-index without giving up
//! deterministic parallel chunking.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::CoreError;
use crate::util::{det_dot, det_sum};
use crate::Result;

/// Spectrum of a field: complex DFT coefficients, flat row-major, same shape
/// as the grid.
pub type Spectrum = Vec<Complex64>;

/// Memory budget for grid allocation checks (covers the padded convolution
/// workspace, its kernel spectrum, and a handful of live fields).
const DEFAULT_MEMORY_BUDGET: usize = 6 << 30;

/// Chunk length for indexed parallel loops (fixed for determinism).
const INDEX_CHUNK: usize = 8192;

/// Periodic box `[-L, L)^dim` with `n` samples per axis.
pub struct TensorGrid {
    dim: usize,
    n: usize,
    half_width: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TensorGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TensorGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("half_width", &self.half_width)
            .finish()
    }
}

impl PartialEq for TensorGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.half_width == other.half_width
    }
}

impl TensorGrid {
    /// Build a grid; `n` must be a power of two in `[16, 128]` and the
    /// padded-convolution workspace must fit the default memory budget.
    pub fn new(dim: usize, n: usize, half_width: f64) -> Result<Arc<Self>> {
        Self::with_budget(dim, n, half_width, DEFAULT_MEMORY_BUDGET)
    }

    /// As [`TensorGrid::new`] with an explicit memory budget in bytes.
    pub fn with_budget(dim: usize, n: usize, half_width: f64, budget: usize) -> Result<Arc<Self>> {
        if !(1..=5).contains(&dim) {
            return Err(CoreError::InvalidParams(format!(
                "tensor grid dimension must be 1..=5, got {dim}"
            )));
        }
        if !n.is_power_of_two() || !(16..=128).contains(&n) {
            return Err(CoreError::InvalidParams(format!(
                "points per axis must be a power of two in [16, 128], got {n}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(CoreError::InvalidParams(format!(
                "box half-width must be positive, got {half_width}"
            )));
        }
        // Padded complex workspace (16 bytes) + real kernel spectrum (8) on
        // the doubled grid, plus ~8 live fields on the base grid.
        let padded = (2usize * n).checked_pow(dim as u32).unwrap_or(usize::MAX);
        let base = n.pow(dim as u32);
        let need = padded.saturating_mul(24).saturating_add(base * 8 * 8);
        if need > budget {
            return Err(CoreError::InvalidParams(format!(
                "grid of {n}^{dim} points needs ~{need} bytes of workspace, over the {budget}-byte budget"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            dim,
            n,
            half_width,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Samples per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Box half-width L; the domain is `[-L, L)^dim`.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Grid spacing h = 2L/n.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Total number of sample points n^dim.
    pub fn points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Volume of one grid cell, h^dim.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of sample index i along any axis: -L + i h.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Position of a multi-index (first `dim` entries used).
    pub fn position(&self, idx: &[usize]) -> [f64; 5] {
        let mut x = [0.0f64; 5];
        for a in 0..self.dim {
            x[a] = self.coord(idx[a]);
        }
        x
    }

    /// Wavenumber of DFT index m along any axis: (π/L) · signed(m).
    pub fn wavenumber(&self, m: usize) -> f64 {
        let signed = if m <= self.n / 2 {
            m as f64
        } else {
            m as f64 - self.n as f64
        };
        PI / self.half_width * signed
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.n; self.dim]
    }

    /// |k|² at a spectral multi-index (first `dim` entries used).
    pub fn k_sq(&self, idx: &[usize]) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.dim {
            let k = self.wavenumber(idx[a]);
            acc += k * k;
        }
        acc
    }

    pub(crate) fn forward_plan(&self) -> &Arc<dyn Fft<f64>> {
        &self.fwd
    }

    pub(crate) fn inverse_plan(&self) -> &Arc<dyn Fft<f64>> {
        &self.inv
    }
}

// ─── Indexed parallel iteration over flat row-major data ────────────────────

fn decode_index(mut flat: usize, n: usize, dim: usize) -> [usize; 5] {
    let mut idx = [0usize; 5];
    for a in (0..dim).rev() {
        idx[a] = flat % n;
        flat /= n;
    }
    idx
}

fn increment_index(idx: &mut [usize; 5], n: usize, dim: usize) {
    for a in (0..dim).rev() {
        idx[a] += 1;
        if idx[a] < n {
            return;
        }
        idx[a] = 0;
    }
}

/// Parallel indexed sweep over a flat row-major cubic array: calls
/// `f(&multi_index, &mut value)` for every element. Chunked deterministically.
pub(crate) fn par_indexed<T, F>(data: &mut [T], n: usize, dim: usize, f: F)
where
    T: Send,
    F: Fn(&[usize; 5], &mut T) + Sync,
{
    data.par_chunks_mut(INDEX_CHUNK)
        .enumerate()
        .for_each(|(ci, chunk)| {
            let mut idx = decode_index(ci * INDEX_CHUNK, n, dim);
            for v in chunk {
                f(&idx, v);
                increment_index(&mut idx, n, dim);
            }
        });
}

// ─── N-dimensional FFT ──────────────────────────────────────────────────────

/// Raw-pointer wrapper that lets disjoint strided lines be processed in
/// parallel. Safety rests on the line decomposition below: for a fixed axis,
/// every flat index belongs to exactly one (outer, inner) line.
struct SyncPtr(*mut Complex64);
unsafe impl Send for SyncPtr {}
unsafe impl Sync for SyncPtr {}

/// Apply a 1-D FFT plan along every axis of a flat row-major cubic array
/// (`len = plan.len()` points per axis, `dim` axes). Unnormalized.
pub(crate) fn fft_all_axes(data: &mut [Complex64], dim: usize, plan: &Arc<dyn Fft<f64>>) {
    let n = plan.len();
    debug_assert_eq!(data.len(), n.pow(dim as u32), "data length vs plan/dim");
    let total = data.len();
    let ptr = SyncPtr(data.as_mut_ptr());
    let ptr_ref = &ptr;
    for axis in 0..dim {
        // Row-major: stride of `axis` = n^(dim-1-axis).
        let stride = n.pow((dim - 1 - axis) as u32);
        let lines = total / n;
        (0..lines).into_par_iter().for_each_init(
            || {
                (
                    vec![Complex64::new(0.0, 0.0); n],
                    vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()],
                )
            },
            |(buf, scratch), line| {
                let outer = line / stride;
                let inner = line % stride;
                let base = outer * n * stride + inner;
                // SAFETY: for fixed axis, the index sets {base + j*stride}
                // are pairwise disjoint across `line`, and all stay in range.
                unsafe {
                    let p = ptr_ref.0;
                    for (j, b) in buf.iter_mut().enumerate() {
                        *b = *p.add(base + j * stride);
                    }
                    plan.process_with_scratch(buf, scratch);
                    for (j, b) in buf.iter().enumerate() {
                        *p.add(base + j * stride) = *b;
                    }
                }
            },
        );
    }
}

/// A real scalar field sampled on a [`TensorGrid`], stored flat row-major.
#[derive(Debug, Clone)]
pub struct TensorField {
    grid: Arc<TensorGrid>,
    data: Vec<f64>,
    label: Option<String>,
}

impl TensorField {
    pub fn zeros(grid: Arc<TensorGrid>) -> Self {
        let data = vec![0.0; grid.points()];
        Self { grid, data, label: None }
    }

    /// Sample `f(x)` at every grid point (`x` has `dim` coordinates).
    pub fn from_fn<F>(grid: Arc<TensorGrid>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let mut data = vec![0.0; grid.points()];
        let g = grid.as_ref();
        par_indexed(&mut data, g.n, g.dim, |idx, v| {
            let x = g.position(&idx[..g.dim]);
            *v = f(&x[..g.dim]);
        });
        let field = Self { grid, data, label: None };
        field.ensure_finite()?;
        Ok(field)
    }

    pub fn from_data(grid: Arc<TensorGrid>, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.points() {
            return Err(CoreError::GridMismatch(format!(
                "field has {} samples for a grid of {} points",
                data.len(),
                grid.points()
            )));
        }
        let field = Self { grid, data, label: None };
        field.ensure_finite()?;
        Ok(field)
    }

    /// Band-limited random field: white noise low-passed at `rel_cutoff`
    /// times the Nyquist wavenumber, normalized to unit L² norm.
    /// Deterministic in `seed`.
    pub fn random_smooth(grid: Arc<TensorGrid>, seed: u64, rel_cutoff: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![0.0; grid.points()];
        for v in data.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let field = Self { grid: Arc::clone(&grid), data, label: None };
        let k_cut = rel_cutoff * PI / grid.spacing();
        let mut spec = field.fourier_forward();
        let g = grid.as_ref();
        par_indexed(&mut spec, g.n, g.dim, |idx, s| {
            let k2 = g.k_sq(&idx[..g.dim]);
            *s *= (-k2 / (k_cut * k_cut)).exp();
        });
        let field = Self::fourier_backward(grid, &spec);
        let norm = field.l2_norm();
        field.scaled(1.0 / norm)
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.data.par_iter().position_any(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(CoreError::NonFinite(format!(
                "tensor field sample at flat index {i} is {}",
                self.data[i]
            ))),
        }
    }

    pub fn grid(&self) -> &Arc<TensorGrid> {
        &self.grid
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    fn check_same_grid(&self, other: &Self, ctx: &str) {
        assert_eq!(
            self.grid.as_ref(),
            other.grid.as_ref(),
            "grid mismatch in {ctx}"
        );
    }

    // ─── Integrals ──────────────────────────────────────────────────────────

    /// ∫ u dx (rectangle rule × cell volume; deterministic reduction).
    pub fn integrate(&self) -> f64 {
        det_sum(&self.data) * self.grid.cell_volume()
    }

    /// ∫ u² dx.
    pub fn mass(&self) -> f64 {
        det_dot(&self.data, &self.data) * self.grid.cell_volume()
    }

    /// ∫ u v dx.
    pub fn dot(&self, other: &Self) -> f64 {
        self.check_same_grid(other, "dot");
        det_dot(&self.data, &other.data) * self.grid.cell_volume()
    }

    /// L² norm.
    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn inf_norm(&self) -> f64 {
        self.data
            .par_iter()
            .fold(|| 0.0f64, |acc, v| acc.max(v.abs()))
            .reduce(|| 0.0f64, f64::max)
    }

    // ─── Pointwise algebra ──────────────────────────────────────────────────

    /// Map every sample through `f`.
    pub fn map<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> Self {
        let mut out = self.clone();
        out.label = None;
        out.data.par_iter_mut().for_each(|v| *v = f(*v));
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(move |v| c * v)
    }

    /// self + c · other.
    pub fn add_scaled(&self, other: &Self, c: f64) -> Self {
        self.check_same_grid(other, "add_scaled");
        let mut out = self.clone();
        out.label = None;
        out.data
            .par_iter_mut()
            .zip(other.data.par_iter())
            .for_each(|(a, b)| *a += c * b);
        out
    }

    /// Pointwise product.
    pub fn mul_pointwise(&self, other: &Self) -> Self {
        self.check_same_grid(other, "mul_pointwise");
        let mut out = self.clone();
        out.label = None;
        out.data
            .par_iter_mut()
            .zip(other.data.par_iter())
            .for_each(|(a, b)| *a *= b);
        out
    }


    // ─── Spectral calculus ──────────────────────────────────────────────────

    /// Unnormalized forward DFT of the field.
    pub fn fourier_forward(&self) -> Spectrum {
        let mut spec: Vec<Complex64> = self
            .data
            .par_iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft_all_axes(&mut spec, self.grid.dim, self.grid.forward_plan());
        spec
    }

    /// Inverse DFT (with the 1/n^dim normalization), real part.
    pub fn fourier_backward(grid: Arc<TensorGrid>, spec: &Spectrum) -> Self {
        assert_eq!(spec.len(), grid.points(), "spectrum length vs grid");
        let mut work = spec.clone();
        fft_all_axes(&mut work, grid.dim, grid.inverse_plan());
        let scale = 1.0 / grid.points() as f64;
        let data: Vec<f64> = work.par_iter().map(|c| c.re * scale).collect();
        Self { grid, data, label: None }
    }

    /// ∫ |∇u|² dx via Parseval: h^dim/n^dim · Σ |k|² |û_k|².
    pub fn grad_sq_integral(&self) -> f64 {
        let spec = self.fourier_forward();
        let g = self.grid.as_ref();
        let mut dens = vec![0.0f64; spec.len()];
        // Fill the density indexed, then reduce deterministically.
        {
            let spec_ref = &spec;
            dens.par_chunks_mut(INDEX_CHUNK)
                .enumerate()
                .for_each(|(ci, chunk)| {
                    let start = ci * INDEX_CHUNK;
                    let mut idx = decode_index(start, g.n, g.dim);
                    for (off, d) in chunk.iter_mut().enumerate() {
                        *d = g.k_sq(&idx[..g.dim]) * spec_ref[start + off].norm_sqr();
                        increment_index(&mut idx, g.n, g.dim);
                    }
                });
        }
        det_sum(&dens) * g.cell_volume() / g.points() as f64
    }

    /// Spectral Laplacian Δu.
    pub fn laplacian(&self) -> Self {
        let mut spec = self.fourier_forward();
        let g = self.grid.as_ref();
        par_indexed(&mut spec, g.n, g.dim, |idx, s| {
            *s *= -g.k_sq(&idx[..g.dim]);
        });
        Self::fourier_backward(Arc::clone(&self.grid), &spec)
    }

    /// Spectral partial derivative along `axis` (Nyquist mode zeroed).
    pub fn derivative(&self, axis: usize) -> Self {
        assert!(axis < self.grid.dim, "axis {axis} out of range");
        let mut spec = self.fourier_forward();
        let g = self.grid.as_ref();
        let nyquist = g.n / 2;
        par_indexed(&mut spec, g.n, g.dim, |idx, s| {
            let m = idx[axis];
            let k = if m == nyquist { 0.0 } else { g.wavenumber(m) };
            *s *= Complex64::new(0.0, k);
        });
        Self::fourier_backward(Arc::clone(&self.grid), &spec)
    }

    /// Circular shift by whole cells: `out(x) = self(x - shift·h)`.
    pub fn shift_cells(&self, shift: &[i64]) -> Self {
        assert_eq!(shift.len(), self.grid.dim, "shift length vs dimension");
        let g = self.grid.as_ref();
        let n = g.n as i64;
        let mut out = Self::zeros(Arc::clone(&self.grid));
        let src = &self.data;
        par_indexed(&mut out.data, g.n, g.dim, |idx, v| {
            let mut flat = 0usize;
            for a in 0..g.dim {
                let m = (idx[a] as i64 - shift[a]).rem_euclid(n) as usize;
                flat = flat * g.n + m;
            }
            *v = src[flat];
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        assert!(TensorGrid::new(0, 32, 4.0).is_err(), "dim 0");
        assert!(TensorGrid::new(6, 32, 4.0).is_err(), "dim 6");
        assert!(TensorGrid::new(4, 24, 4.0).is_err(), "n not a power of two");
        assert!(TensorGrid::new(4, 8, 4.0).is_err(), "n too small");
        assert!(TensorGrid::new(2, 32, -1.0).is_err(), "negative half-width");
        // 128^4 padded workspace blows the default budget.
        assert!(TensorGrid::new(4, 128, 4.0).is_err(), "memory budget");
    }

    #[test]
    fn coordinates_and_cell_volume() {
        let g = TensorGrid::new(3, 16, 2.0).unwrap();
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.coord(0), -2.0);
        assert_eq!(g.coord(8), 0.0);
        assert_eq!(g.points(), 4096);
        assert!((g.cell_volume() - 0.015625).abs() < 1e-18);
    }

    #[test]
    fn gaussian_integral_matches_closed_form_in_4d() {
        // ∫ e^{-|x|²} over [-8, 8)^4 ≈ π²: box truncation ~e^{-64}, and the
        // rectangle rule is spectrally accurate for this integrand.
        let g = TensorGrid::new(4, 32, 8.0).unwrap();
        let f = TensorField::from_fn(Arc::clone(&g), |x| {
            let r2: f64 = x.iter().map(|c| c * c).sum();
            (-r2).exp()
        })
        .unwrap();
        let got = f.integrate();
        let want = PI * PI;
        assert!(
            (got - want).abs() < 1e-10 * want,
            "∫ e^(-|x|²) = {got}, want {want}"
        );
    }

    #[test]
    fn single_mode_dirichlet_energy_is_exact() {
        // u = sin(π x₁ / L): ∫|∇u|² = (π/L)²/2 · (2L)^N.
        let g = TensorGrid::new(3, 32, 4.0).unwrap();
        let u = TensorField::from_fn(Arc::clone(&g), |x| (PI * x[0] / 4.0).sin()).unwrap();
        let got = u.grad_sq_integral();
        let want = (PI / 4.0).powi(2) / 2.0 * 8.0f64.powi(3);
        assert!(
            (got - want).abs() < 1e-12 * want,
            "∫|∇ sin|² = {got}, want {want}"
        );
    }

    #[test]
    fn parseval_identity_holds() {
        let g = TensorGrid::new(3, 32, 3.0).unwrap();
        let u = TensorField::random_smooth(Arc::clone(&g), 7, 0.5);
        let spec = u.fourier_forward();
        let spec_mass: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>()
            / g.points() as f64
            * g.cell_volume();
        let mass = u.mass();
        assert!(
            (spec_mass - mass).abs() < 1e-10 * mass,
            "Parseval: spectral {spec_mass} vs direct {mass}"
        );
    }

    #[test]
    fn fourier_round_trip_is_tight() {
        let g = TensorGrid::new(2, 64, 1.0).unwrap();
        let u = TensorField::random_smooth(Arc::clone(&g), 11, 0.9);
        let back = TensorField::fourier_backward(Arc::clone(&g), &u.fourier_forward());
        let mut worst = 0.0f64;
        for (a, b) in u.as_slice().iter().zip(back.as_slice()) {
            worst = worst.max((a - b).abs());
        }
        let scale = u.inf_norm();
        assert!(
            worst < 1e-12 * scale,
            "round-trip error {worst} vs scale {scale}"
        );
    }

    #[test]
    fn spectral_phase_shift_equals_circular_shift() {
        let g = TensorGrid::new(2, 32, 2.0).unwrap();
        let u = TensorField::random_smooth(Arc::clone(&g), 3, 0.7);
        let shifted = u.shift_cells(&[5, -3]);
        // Phase-shift the spectrum instead: û_k · e^{-i k·(shift·h)}.
        let mut spec = u.fourier_forward();
        let h = g.spacing();
        let shift = [5i64, -3i64];
        let gref = g.as_ref();
        par_indexed(&mut spec, gref.n(), gref.dim(), |idx, s| {
            let mut phase = 0.0;
            for a in 0..2 {
                phase -= gref.wavenumber(idx[a]) * shift[a] as f64 * h;
            }
            *s *= Complex64::from_polar(1.0, phase);
        });
        let via_phase = TensorField::fourier_backward(Arc::clone(&g), &spec);
        let mut worst = 0.0f64;
        for (a, b) in shifted.as_slice().iter().zip(via_phase.as_slice()) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst < 1e-12, "shift theorem violated by {worst}");
    }

    #[test]
    fn laplacian_of_single_mode_scales_by_k_squared() {
        let g = TensorGrid::new(2, 32, 1.0).unwrap();
        let k = g.wavenumber(3);
        let u = TensorField::from_fn(Arc::clone(&g), |x| (k * x[0]).cos()).unwrap();
        let lap = u.laplacian();
        let mut worst = 0.0f64;
        for (l, v) in lap.as_slice().iter().zip(u.as_slice()) {
            worst = worst.max((l + k * k * v).abs());
        }
        assert!(worst < 1e-10, "Δ cos(kx) + k² cos(kx) = {worst}");
    }

    #[test]
    fn derivative_matches_analytic_mode() {
        let g = TensorGrid::new(2, 64, 2.0).unwrap();
        let k = g.wavenumber(5);
        let u = TensorField::from_fn(Arc::clone(&g), |x| (k * x[1]).sin()).unwrap();
        let du = u.derivative(1);
        let want = TensorField::from_fn(Arc::clone(&g), |x| k * (k * x[1]).cos()).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in du.as_slice().iter().zip(want.as_slice()) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst < 1e-10, "∂ sin(kx) error {worst}");
    }

    #[test]
    fn integrate_is_bit_deterministic() {
        let g = TensorGrid::new(3, 32, 4.0).unwrap();
        let u = TensorField::random_smooth(Arc::clone(&g), 123, 0.6);
        assert_eq!(
            u.integrate().to_bits(),
            u.integrate().to_bits(),
            "integrate must be bit-stable"
        );
        assert_eq!(
            u.grad_sq_integral().to_bits(),
            u.grad_sq_integral().to_bits(),
            "grad_sq_integral must be bit-stable"
        );
    }

    #[test]
    fn from_data_rejects_shape_mismatch_and_nan() {
        let g = TensorGrid::new(2, 16, 1.0).unwrap();
        assert!(TensorField::from_data(Arc::clone(&g), vec![0.0; 100]).is_err());
        let mut nan_data = vec![0.0; 256];
        nan_data[37] = f64::NAN;
        assert!(matches!(
            TensorField::from_data(Arc::clone(&g), nan_data),
            Err(CoreError::NonFinite(_))
        ));
    }
}
