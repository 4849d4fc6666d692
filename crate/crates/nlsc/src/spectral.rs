//! Periodic-box discretisation and spectral operators.
//!
//! ℝᴺ (N ≤ 3) is truncated to the periodic box [−L, L)ᴺ sampled on a
//! uniform grid of M points per dimension, M a power of two. Derivatives
//! act in Fourier space, where the plane wave `exp(i k·x)` with
//! `k_m = π m / L` is an exact eigenfunction. Quadrature is the periodic
//! trapezoid rule `dxᴺ · Σ`, exact on the trigonometric basis.
//!
//! Wavenumber layout per dimension follows the DFT index set
//! `[0, 1, …, M/2, −(M/2−1), …, −1] · π/L` with the Nyquist mode stored
//! once with positive sign.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::Error;
use crate::Result;

/// Uniform periodic grid on [−L, L)ᴺ.
#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    points_per_dim: usize,
    half_width: f64,
    dx: f64,
    /// Per-dimension wavenumbers in DFT order, length `points_per_dim`.
    wavenumbers: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.points_per_dim == other.points_per_dim
            && self.half_width == other.half_width
    }
}

impl Grid {
    /// Build a grid. `points_per_dim` must be a power of two ≥ 8 and
    /// `dim` one of 1, 2, 3.
    pub fn new(dim: usize, points_per_dim: usize, half_width: f64) -> Result<Arc<Grid>> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if points_per_dim < 8 || !points_per_dim.is_power_of_two() {
            return Err(Error::invalid(format!(
                "points_per_dim must be a power of two >= 8, got {points_per_dim}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::invalid(format!(
                "half_width must be positive and finite, got {half_width}"
            )));
        }
        let m = points_per_dim;
        let dx = 2.0 * half_width / m as f64;
        let base = std::f64::consts::PI / half_width;
        let wavenumbers = (0..m)
            .map(|j| {
                let idx = if j <= m / 2 { j as i64 } else { j as i64 - m as i64 };
                base * idx as f64
            })
            .collect();
        Ok(Arc::new(Grid { dim, points_per_dim, half_width, dx, wavenumbers }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Quadrature weight dxᴺ of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dim as i32)
    }

    /// Total number of grid cells, Mᴺ.
    pub fn cells(&self) -> usize {
        self.points_per_dim.pow(self.dim as u32)
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Coordinate of the j-th sample along one dimension, x_j = −L + j·dx.
    pub fn coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx
    }

    /// Decompose a row-major flat index into per-dimension indices.
    pub fn unravel(&self, mut flat: usize) -> [usize; 3] {
        let m = self.points_per_dim;
        let mut idx = [0usize; 3];
        for d in (0..self.dim).rev() {
            idx[d] = flat % m;
            flat /= m;
        }
        idx
    }

    /// Position vector of a flat index; unused trailing components are zero.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let mut x = [0.0; 3];
        for d in 0..self.dim {
            x[d] = self.coord(idx[d]);
        }
        x
    }

    /// |x|² of a flat index.
    pub fn radius_sq(&self, flat: usize) -> f64 {
        let x = self.position(flat);
        x[..self.dim].iter().map(|v| v * v).sum()
    }

    /// |k|² of a flat index in DFT layout.
    pub fn wavenumber_sq(&self, flat: usize) -> f64 {
        let idx = self.unravel(flat);
        (0..self.dim).map(|d| self.wavenumbers[idx[d]].powi(2)).sum()
    }

    fn check_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "{what}: ({}d, {} pts, L={}) vs ({}d, {} pts, L={})",
                self.dim,
                self.points_per_dim,
                self.half_width,
                other.dim,
                other.points_per_dim,
                other.half_width
            )));
        }
        Ok(())
    }
}

/// Complex wavefunction samples on a [`Grid`], row-major.
#[derive(Debug, Clone)]
pub struct State {
    pub grid: Arc<Grid>,
    pub values: Vec<Complex64>,
}

impl State {
    pub fn zeros(grid: &Arc<Grid>) -> State {
        State { grid: grid.clone(), values: vec![Complex64::new(0.0, 0.0); grid.cells()] }
    }

    /// Sample a function of position.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> Complex64) -> State {
        let values = (0..grid.cells())
            .map(|j| {
                let x = grid.position(j);
                f(&x[..grid.dim()])
            })
            .collect();
        State { grid: grid.clone(), values }
    }

    /// Gaussian `amp · exp(−|x − c|² / width²)`, optionally L²-normalised.
    pub fn gaussian(grid: &Arc<Grid>, center: &[f64], width: f64, amp: f64) -> State {
        let mut c = [0.0; 3];
        c[..center.len()].copy_from_slice(center);
        State::from_fn(grid, |x| {
            let r2: f64 = x.iter().zip(c.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            Complex64::new(amp * (-r2 / (width * width)).exp(), 0.0)
        })
    }

    pub fn normalized(mut self) -> State {
        let n = l2_norm(&self);
        if n > 0.0 {
            for v in &mut self.values {
                *v /= n;
            }
        }
        self
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Real scalar field on a [`Grid`] (potentials, observable weights).
#[derive(Debug, Clone)]
pub struct RealField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl RealField {
    pub fn constant(grid: &Arc<Grid>, value: f64) -> RealField {
        RealField { grid: grid.clone(), values: vec![value; grid.cells()] }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> RealField {
        let values = (0..grid.cells())
            .map(|j| {
                let x = grid.position(j);
                f(&x[..grid.dim()])
            })
            .collect();
        RealField { grid: grid.clone(), values }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// L² inner product `dxᴺ Σ conj(a_j) b_j`, conjugate-linear in the first slot.
pub fn inner_product(a: &State, b: &State) -> Result<Complex64> {
    a.grid.check_same(&b.grid, "inner_product")?;
    let sum: Complex64 = a.values.iter().zip(&b.values).map(|(x, y)| x.conj() * y).sum();
    Ok(sum * a.grid.cell_volume())
}

/// `‖s‖_{L²}` by pointwise quadrature.
pub fn l2_norm(s: &State) -> f64 {
    let sum: f64 = s.values.iter().map(|v| v.norm_sqr()).sum();
    (sum * s.grid.cell_volume()).sqrt()
}

/// `∫ w |s|² dx` for a real weight w on the same grid.
pub fn weighted_density_integral(w: &RealField, s: &State) -> Result<f64> {
    w.grid.check_same(&s.grid, "weighted_density_integral")?;
    let sum: f64 = w.values.iter().zip(&s.values).map(|(wj, sj)| wj * sj.norm_sqr()).sum();
    Ok(sum * s.grid.cell_volume())
}

/// Discrete L², H¹ and H² norms of a state.
///
/// H¹ and H² use the equivalent-norm convention with spectral derivatives:
/// `h1² = l2² + ‖∇s‖²` and `h2² = l2² + ‖Δs‖²`.
#[derive(Debug, Clone, Copy)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
}

/// Per-grid FFT engine. Forward transforms are unnormalised; the inverse
/// carries the 1/Mᴺ factor, so `inverse(forward(s)) = s`.
pub struct Fourier {
    grid: Arc<Grid>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fourier {
    pub fn new(grid: &Arc<Grid>) -> Fourier {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.points_per_dim());
        let inv = planner.plan_fft_inverse(grid.points_per_dim());
        Fourier { grid: grid.clone(), fwd, inv }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn transform_axes(&self, values: &mut [Complex64], forward: bool) {
        let m = self.grid.points_per_dim();
        let dim = self.grid.dim();
        let fft = if forward { &self.fwd } else { &self.inv };
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        // Row-major: stride of axis d is m^(dim-1-d).
        for d in 0..dim {
            let stride = m.pow((dim - 1 - d) as u32);
            let lines = values.len() / m;
            for l in 0..lines {
                // Flat index of the line's first element: split l into the
                // indices of the other axes around axis d.
                let block = l / stride; // slower-varying axes combined
                let offset = l % stride; // faster-varying axes combined
                let start = block * stride * m + offset;
                for j in 0..m {
                    line[j] = values[start + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for j in 0..m {
                    values[start + j * stride] = line[j];
                }
            }
        }
        if !forward {
            let scale = 1.0 / (values.len() as f64);
            for v in values.iter_mut() {
                *v *= scale;
            }
        }
    }

    /// In-place forward DFT over all axes (unnormalised).
    pub fn forward(&self, values: &mut [Complex64]) {
        self.transform_axes(values, true);
    }

    /// In-place inverse DFT over all axes (normalised by 1/Mᴺ).
    pub fn inverse(&self, values: &mut [Complex64]) {
        self.transform_axes(values, false);
    }

    /// Spectral Laplacian: `IDFT( −|k|² DFT(s) )`.
    pub fn laplacian(&self, s: &State) -> State {
        let mut values = s.values.clone();
        self.forward(&mut values);
        for (j, v) in values.iter_mut().enumerate() {
            *v *= -self.grid.wavenumber_sq(j);
        }
        self.inverse(&mut values);
        State { grid: s.grid.clone(), values }
    }

    /// `∫ |∇s|² dx` via Parseval: `dxᴺ/Mᴺ · Σ |k|² |ŝ_k|²`.
    pub fn grad_norm_sq(&self, s: &State) -> f64 {
        let mut values = s.values.clone();
        self.forward(&mut values);
        let cells = values.len() as f64;
        let sum: f64 = values
            .iter()
            .enumerate()
            .map(|(j, v)| self.grid.wavenumber_sq(j) * v.norm_sqr())
            .sum();
        sum * self.grid.cell_volume() / cells
    }

    /// `∫ |Δs|² dx` via Parseval.
    pub fn lap_norm_sq(&self, s: &State) -> f64 {
        let mut values = s.values.clone();
        self.forward(&mut values);
        let cells = values.len() as f64;
        let sum: f64 = values
            .iter()
            .enumerate()
            .map(|(j, v)| self.grid.wavenumber_sq(j).powi(2) * v.norm_sqr())
            .sum();
        sum * self.grid.cell_volume() / cells
    }

    /// Multiply each Fourier mode by `exp(−i |k|² dt)` (free-flight step).
    pub fn kinetic_phase(&self, s: &mut State, dt: f64) {
        self.forward(&mut s.values);
        for (j, v) in s.values.iter_mut().enumerate() {
            let phase = -self.grid.wavenumber_sq(j) * dt;
            *v *= Complex64::from_polar(1.0, phase);
        }
        self.inverse(&mut s.values);
    }

    /// Discrete L² / H¹ / H² norms (L² pointwise, derivatives spectral).
    pub fn norms(&self, s: &State) -> Norms {
        let l2 = l2_norm(s);
        let h1 = (l2 * l2 + self.grad_norm_sq(s)).sqrt();
        let h2 = (l2 * l2 + self.lap_norm_sq(s)).sqrt();
        Norms { l2, h1, h2 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_1d() -> Arc<Grid> {
        Grid::new(1, 256, 10.0).unwrap()
    }

    /// Deterministic pseudo-random state for tests.
    fn random_state(grid: &Arc<Grid>, seed: u64) -> State {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.cells())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        State { grid: grid.clone(), values }
    }

    #[test]
    fn grid_spacing_and_cells() {
        let g = grid_1d();
        assert_eq!(g.dx(), 0.078125, "dx = 2*10/256");
        assert!((g.dx() * g.points_per_dim() as f64 - 2.0 * g.half_width()).abs() == 0.0);

        let g2 = Grid::new(2, 64, 5.0).unwrap();
        assert_eq!(g2.cells(), 4096);
    }

    #[test]
    fn grid_wavenumber_layout() {
        // (1, 8, 4): k = π/4 · [0, 1, 2, 3, 4, −3, −2, −1], Nyquist = π.
        let g = Grid::new(1, 8, 4.0).unwrap();
        let base = std::f64::consts::PI / 4.0;
        let expect = [0.0, 1.0, 2.0, 3.0, 4.0, -3.0, -2.0, -1.0];
        for (k, e) in g.wavenumbers().iter().zip(expect.iter()) {
            assert!((k - base * e).abs() < 1e-15, "wavenumber {k} vs {e}");
        }
        assert!((g.wavenumbers()[4] - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        assert!(Grid::new(0, 64, 1.0).is_err());
        assert!(Grid::new(4, 64, 1.0).is_err());
        assert!(Grid::new(1, 100, 1.0).is_err());
        assert!(Grid::new(1, 4, 1.0).is_err());
        assert!(Grid::new(1, 64, 0.0).is_err());
        assert!(Grid::new(1, 64, -2.0).is_err());
    }

    #[test]
    fn laplacian_eigenfunction() {
        let g = grid_1d();
        let f = Fourier::new(&g);
        let k = g.wavenumbers()[5];
        let s = State::from_fn(&g, |x| Complex64::from_polar(1.0, k * x[0]));
        let lap = f.laplacian(&s);
        for (l, v) in lap.values.iter().zip(&s.values) {
            let expected = -k * k * v;
            assert!((l - expected).norm() <= 1e-12 * k * k, "plane wave eigenvalue");
        }
    }

    #[test]
    fn laplacian_of_constant_and_cosine() {
        let g = grid_1d();
        let f = Fourier::new(&g);
        let c = State::from_fn(&g, |_| Complex64::new(3.5, -1.0));
        let lap = f.laplacian(&c);
        assert!(lap.max_abs() < 1e-12, "Laplacian of constant is zero");

        let k = g.wavenumbers()[9];
        let s = State::from_fn(&g, |x| Complex64::new((k * x[0]).cos(), 0.0));
        let lap = f.laplacian(&s);
        for (l, v) in lap.values.iter().zip(&s.values) {
            assert!((l + k * k * v).norm() < 1e-10, "cosine eigenfunction");
        }
    }

    #[test]
    fn inner_product_box_volume_and_orthogonality() {
        let g = grid_1d();
        let one = State::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        let ip = inner_product(&one, &one).unwrap();
        assert!((ip.re - 20.0).abs() < 1e-12 && ip.im.abs() < 1e-15);

        let a = State::from_fn(&g, |x| Complex64::from_polar(1.0, g.wavenumbers()[3] * x[0]));
        let b = State::from_fn(&g, |x| Complex64::from_polar(1.0, g.wavenumbers()[7] * x[0]));
        assert!(inner_product(&a, &b).unwrap().norm() < 1e-12, "distinct modes orthogonal");
    }

    #[test]
    fn inner_product_conjugate_symmetry() {
        let g = grid_1d();
        let a = random_state(&g, 1);
        let b = random_state(&g, 2);
        let ab = inner_product(&a, &b).unwrap();
        let ba = inner_product(&b, &a).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-12);
    }

    #[test]
    fn inner_product_grid_mismatch() {
        let a = State::zeros(&grid_1d());
        let b = State::zeros(&Grid::new(1, 128, 10.0).unwrap());
        assert!(matches!(inner_product(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn norms_single_mode() {
        let g = grid_1d();
        let f = Fourier::new(&g);

        let one = State::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        assert!((l2_norm(&one) - 20.0_f64.sqrt()).abs() < 1e-12);

        let k = g.wavenumbers()[11];
        let s = State::from_fn(&g, |x| Complex64::from_polar(1.0, k * x[0]));
        let n = f.norms(&s);
        assert!(
            (n.h1 * n.h1 - (1.0 + k * k) * n.l2 * n.l2).abs() < 1e-12 * (1.0 + k * k),
            "h1² = (1+k²) l2² on a single mode"
        );
        assert!(n.h2 >= n.l2, "norm dominance");
    }

    #[test]
    fn weighted_density_parity_and_mass() {
        let g = grid_1d();
        let s = State::gaussian(&g, &[0.0], 1.0, 1.0).normalized();
        let w = RealField::constant(&g, 1.0);
        assert!((weighted_density_integral(&w, &s).unwrap() - 1.0).abs() < 1e-12);

        let odd = RealField::from_fn(&g, |x| x[0]);
        let even = State::gaussian(&g, &[0.0], 1.5, 0.7);
        assert!(weighted_density_integral(&odd, &even).unwrap().abs() < 1e-12, "odd × even");
    }

    #[test]
    fn dft_round_trip_random() {
        for dim in [1usize, 2] {
            let m = if dim == 1 { 256 } else { 32 };
            let g = Grid::new(dim, m, 10.0).unwrap();
            let f = Fourier::new(&g);
            let s = random_state(&g, 42 + dim as u64);
            let mut v = s.values.clone();
            f.forward(&mut v);
            f.inverse(&mut v);
            let max_err = v
                .iter()
                .zip(&s.values)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(max_err < 1e-13, "round trip dim {dim}: {max_err:e}");
        }
    }

    #[test]
    fn parseval_identity() {
        let g = grid_1d();
        let f = Fourier::new(&g);
        let s = random_state(&g, 7);
        let pointwise = l2_norm(&s);
        let mut v = s.values.clone();
        f.forward(&mut v);
        let spectral = (v.iter().map(|x| x.norm_sqr()).sum::<f64>() * g.cell_volume()
            / g.cells() as f64)
            .sqrt();
        assert!((pointwise - spectral).abs() / pointwise < 1e-12);
    }

    #[test]
    fn laplacian_self_adjoint() {
        let g = grid_1d();
        let f = Fourier::new(&g);
        let a = random_state(&g, 3);
        let b = random_state(&g, 4);
        let lhs = inner_product(&a, &f.laplacian(&b)).unwrap();
        let rhs = inner_product(&f.laplacian(&a), &b).unwrap();
        assert!((lhs - rhs).norm() < 1e-11, "⟨a, Δb⟩ = ⟨Δa, b⟩");
    }

    #[test]
    fn kinetic_phase_plane_wave() {
        let g = grid_1d();
        let f = Fourier::new(&g);
        let k = g.wavenumbers()[4];
        let mut s = State::from_fn(&g, |x| Complex64::from_polar(1.0, k * x[0]));
        let dt = 0.37;
        f.kinetic_phase(&mut s, dt);
        for (j, v) in s.values.iter().enumerate() {
            let x = g.position(j)[0];
            let expected = Complex64::from_polar(1.0, k * x - k * k * dt);
            assert!((v - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn transforms_2d_laplacian() {
        let g = Grid::new(2, 32, 5.0).unwrap();
        let f = Fourier::new(&g);
        let kx = g.wavenumbers()[2];
        let ky = g.wavenumbers()[3];
        let s = State::from_fn(&g, |x| Complex64::from_polar(1.0, kx * x[0] + ky * x[1]));
        let lap = f.laplacian(&s);
        let expected = -(kx * kx + ky * ky);
        for (l, v) in lap.values.iter().zip(&s.values) {
            assert!((l - expected * v).norm() < 1e-11);
        }
    }

    #[test]
    fn transforms_3d_laplacian_and_roundtrip() {
        let g = Grid::new(3, 8, 2.0).unwrap();
        assert_eq!(g.cells(), 512);
        let f = Fourier::new(&g);
        let (kx, ky, kz) = (g.wavenumbers()[1], g.wavenumbers()[2], g.wavenumbers()[7]);
        let s = State::from_fn(&g, |x| {
            Complex64::from_polar(1.0, kx * x[0] + ky * x[1] + kz * x[2])
        });
        let lap = f.laplacian(&s);
        let expected = -(kx * kx + ky * ky + kz * kz);
        for (l, v) in lap.values.iter().zip(&s.values) {
            assert!((l - expected * v).norm() < 1e-11, "3d plane-wave eigenfunction");
        }

        let r = random_state(&g, 9);
        let mut v = r.values.clone();
        f.forward(&mut v);
        f.inverse(&mut v);
        for (a, b) in v.iter().zip(&r.values) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
