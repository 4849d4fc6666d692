//! Physical model: potential V, localizing observable A, nonlinearity (λ, σ).
//!
//! The potential families cover the singular prototype `1/|x|^α` (0 < α < 1)
//! through the grid-resolvable regularisation `V_ε(x) = (|x|² + ε²)^{−α/2}`,
//! plus smooth and uniform references. The observable is a smooth bump
//! multiplication operator supported in the ball B(R): bounded, self-adjoint
//! on L² and exactly localizing on grid samples.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::spectral::{Grid, RealField, State};
use crate::Result;

/// Potential families, materialised onto a grid by [`make_potential`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// Regularised inverse power `(|x|² + ε²)^{−α/2}`; with `epsilon: None`
    /// the grid spacing dx is used, so the samples converge to `1/|x|^α`
    /// under grid refinement.
    InversePower { alpha: f64, epsilon: Option<f64> },
    /// `−depth · exp(−|x|² / width²)`.
    GaussianWell { depth: f64, width: f64 },
    Uniform { value: f64 },
    /// Real field read from an NLSC snapshot on the same grid.
    FromFile { path: String },
}

/// Smooth-bump observable weight: `amplitude · exp(1 − 1/(1 − |x/R|²))`
/// inside B(R), exactly zero outside.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ObservableSpec {
    pub radius: f64,
    pub amplitude: f64,
}

impl Default for ObservableSpec {
    fn default() -> Self {
        ObservableSpec { radius: 3.0, amplitude: 1.0 }
    }
}

/// Theorem-range tag derived from (λ, σ, N).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// λ > 0 and 0 < σ < 2/N.
    FocusingOk,
    /// λ < 0 and 0 < σ < 2/(N−2) (no upper bound for N ≤ 2).
    DefocusingOk,
    /// Outside both ranges; the discrete solver is still defined, but
    /// global existence is not guaranteed and blow-up may occur.
    OutsideTheorems,
}

/// Validated model parameters with derived regime tags.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub sigma: f64,
    pub dim: usize,
    pub regime: Regime,
    /// σ ≥ 1/2, required by the gradient machinery.
    pub gateaux_ok: bool,
}

impl ModelParams {
    /// Validate (λ, σ, N) and derive the regime tags. Runs outside the
    /// theorem ranges are permitted but tagged, never rejected.
    pub fn new(lambda: f64, sigma: f64, dim: usize) -> Result<ModelParams> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if !lambda.is_finite() {
            return Err(Error::invalid("lambda must be finite"));
        }
        let defocusing_cap = if dim <= 2 { f64::INFINITY } else { 2.0 / (dim as f64 - 2.0) };
        let regime = if lambda > 0.0 && sigma < 2.0 / dim as f64 {
            Regime::FocusingOk
        } else if lambda < 0.0 && sigma < defocusing_cap {
            Regime::DefocusingOk
        } else {
            Regime::OutsideTheorems
        };
        Ok(ModelParams { lambda, sigma, dim, regime, gateaux_ok: sigma >= 0.5 })
    }
}

/// Materialise a potential onto the grid.
pub fn make_potential(spec: &PotentialSpec, grid: &Arc<Grid>) -> Result<RealField> {
    let field = match spec {
        PotentialSpec::InversePower { alpha, epsilon } => {
            if !(*alpha > 0.0 && *alpha < 1.0) {
                return Err(Error::invalid(format!(
                    "inverse_power requires 0 < alpha < 1, got {alpha}"
                )));
            }
            let eps = epsilon.unwrap_or(grid.dx());
            if !(eps > 0.0) {
                return Err(Error::invalid(format!(
                    "inverse_power requires epsilon > 0, got {eps}"
                )));
            }
            let a = -alpha / 2.0;
            RealField::from_fn(grid, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                (r2 + eps * eps).powf(a)
            })
        }
        PotentialSpec::GaussianWell { depth, width } => {
            if !(*width > 0.0) {
                return Err(Error::invalid(format!(
                    "gaussian_well requires width > 0, got {width}"
                )));
            }
            let w2 = width * width;
            RealField::from_fn(grid, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                -depth * (-r2 / w2).exp()
            })
        }
        PotentialSpec::Uniform { value } => RealField::constant(grid, *value),
        PotentialSpec::FromFile { path } => {
            let state = crate::io::read_state(std::path::Path::new(path))?;
            state.grid.as_ref().eq(grid.as_ref()).then_some(()).ok_or_else(|| {
                Error::GridMismatch(format!("potential file {path} was sampled on another grid"))
            })?;
            let max_imag = state.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
            if max_imag > 1e-12 {
                return Err(Error::Format(format!(
                    "potential file {path} has imaginary parts up to {max_imag:e}"
                )));
            }
            RealField {
                grid: grid.clone(),
                values: state.values.iter().map(|v| v.re).collect(),
            }
        }
    };
    if !field.is_finite() {
        return Err(Error::invalid("potential samples are not finite"));
    }
    Ok(field)
}

/// Materialise the observable bump onto the grid. Requires R < half_width.
pub fn make_observable(spec: &ObservableSpec, grid: &Arc<Grid>) -> Result<RealField> {
    if !(spec.radius > 0.0) {
        return Err(Error::invalid(format!("observable radius must be > 0, got {}", spec.radius)));
    }
    if spec.radius >= grid.half_width() {
        return Err(Error::invalid(format!(
            "observable radius {} must be < half_width {}",
            spec.radius,
            grid.half_width()
        )));
    }
    let r2 = spec.radius * spec.radius;
    let amp = spec.amplitude;
    Ok(RealField::from_fn(grid, |x| {
        let rho2: f64 = x.iter().map(|v| v * v).sum::<f64>() / r2;
        if rho2 < 1.0 {
            amp * (1.0 - 1.0 / (1.0 - rho2)).exp()
        } else {
            0.0
        }
    }))
}

/// Pointwise nonlinearity `λ |s|^{2σ} s`, defined as 0 where `s = 0`.
pub fn nonlinear_term(s: &State, model: &ModelParams) -> State {
    let values = s
        .values
        .iter()
        .map(|v| {
            let n2 = v.norm_sqr();
            if n2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                model.lambda * n2.powf(model.sigma) * v
            }
        })
        .collect();
    State { grid: s.grid.clone(), values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::inner_product;

    fn grid_1d() -> Arc<Grid> {
        Grid::new(1, 256, 10.0).unwrap()
    }

    #[test]
    fn inverse_power_samples() {
        // Grid with x = 4 as an exact sample: dx = 0.25.
        let g = Grid::new(1, 64, 8.0).unwrap();
        // ε → 0 limit at x = 4: 4^{-1/2} = 0.5.
        let v = make_potential(
            &PotentialSpec::InversePower { alpha: 0.5, epsilon: Some(1e-12) },
            &g,
        )
        .unwrap();
        let j = (0..g.cells()).find(|&j| (g.position(j)[0] - 4.0).abs() < 1e-12).unwrap();
        assert!((v.values[j] - 0.5).abs() < 1e-6);

        // ε = dx at x = 0: dx^{-α}.
        let v = make_potential(&PotentialSpec::InversePower { alpha: 0.5, epsilon: None }, &g)
            .unwrap();
        let j0 = (0..g.cells()).find(|&j| g.position(j)[0].abs() < 1e-12).unwrap();
        assert!((v.values[j0] - g.dx().powf(-0.5)).abs() < 1e-12);
        assert!(v.is_finite());
    }

    #[test]
    fn uniform_potential() {
        let g = grid_1d();
        let v = make_potential(&PotentialSpec::Uniform { value: 2.0 }, &g).unwrap();
        assert!(v.values.iter().all(|&x| x == 2.0));
    }

    #[test]
    fn potential_from_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.nlsc");
        let g = grid_1d();
        let original =
            make_potential(&PotentialSpec::GaussianWell { depth: 1.5, width: 2.0 }, &g).unwrap();
        crate::io::write_real_field(&path, &original).unwrap();
        let loaded = make_potential(
            &PotentialSpec::FromFile { path: path.to_string_lossy().into_owned() },
            &g,
        )
        .unwrap();
        assert_eq!(loaded.values, original.values, "bit-exact field round trip");

        // A mismatched grid is rejected.
        let other = Grid::new(1, 128, 10.0).unwrap();
        assert!(make_potential(
            &PotentialSpec::FromFile { path: path.to_string_lossy().into_owned() },
            &other
        )
        .is_err());
    }

    #[test]
    fn potential_rejects_bad_spec() {
        let g = grid_1d();
        assert!(make_potential(&PotentialSpec::InversePower { alpha: 1.5, epsilon: None }, &g)
            .is_err());
        assert!(make_potential(&PotentialSpec::InversePower { alpha: 0.5, epsilon: Some(0.0) }, &g)
            .is_err());
        assert!(make_potential(
            &PotentialSpec::FromFile { path: "/nonexistent/v.nlsc".into() },
            &g
        )
        .is_err());
    }

    #[test]
    fn regularization_is_local() {
        // Halving ε perturbs V_ε by a relative amount that peaks at the
        // origin and decays like (3α/8)·ε²/x² away from it, so outside
        // |x| ≥ 4ε the change is bounded by α·ε²/x² — locality of the
        // regularisation, asserted at its exact decay rate.
        let g = grid_1d();
        let alpha = 0.5;
        let eps = 8.0 * g.dx();
        let a = make_potential(
            &PotentialSpec::InversePower { alpha, epsilon: Some(eps) },
            &g,
        )
        .unwrap();
        let b = make_potential(
            &PotentialSpec::InversePower { alpha, epsilon: Some(eps / 2.0) },
            &g,
        )
        .unwrap();
        let j0 = (0..g.cells()).find(|&j| g.position(j)[0].abs() < 1e-12).unwrap();
        let rel_at_origin = (a.values[j0] - b.values[j0]).abs() / b.values[j0];
        for j in 0..g.cells() {
            let x = g.position(j)[0];
            if x.abs() >= 4.0 * eps {
                let rel = (a.values[j] - b.values[j]).abs() / b.values[j];
                assert!(
                    rel <= alpha * (eps / x).powi(2),
                    "at x = {x}: rel = {rel:e} exceeds the locality rate"
                );
                assert!(rel < 0.05 * rel_at_origin, "change concentrates at the origin");
            }
        }
    }

    #[test]
    fn observable_bump_shape() {
        let g = grid_1d();
        let spec = ObservableSpec { radius: 3.0, amplitude: 2.5 };
        let w = make_observable(&spec, &g).unwrap();
        let j0 = (0..g.cells()).find(|&j| g.position(j)[0].abs() < 1e-12).unwrap();
        assert!((w.values[j0] - 2.5).abs() < 1e-15, "center value is the amplitude");
        for j in 0..g.cells() {
            let x = g.position(j)[0];
            if x.abs() >= 3.0 {
                assert_eq!(w.values[j], 0.0, "support is exactly B(R)");
            }
        }
        // Even under x → −x: compare mirrored samples (grid holds −L but not +L,
        // so skip the unpaired leftmost sample).
        let m = g.points_per_dim();
        for j in 1..m {
            let mirrored = m - j;
            assert_eq!(w.values[j], w.values[mirrored % m], "bump evenness at {j}");
        }
    }

    #[test]
    fn observable_rejects_radius_beyond_box() {
        let g = grid_1d();
        assert!(make_observable(&ObservableSpec { radius: 10.0, amplitude: 1.0 }, &g).is_err());
        assert!(make_observable(&ObservableSpec { radius: 12.0, amplitude: 1.0 }, &g).is_err());
    }

    #[test]
    fn observable_pairing_is_real() {
        let g = grid_1d();
        let w = make_observable(&ObservableSpec { radius: 3.0, amplitude: 1.0 }, &g).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let psi = State {
            grid: g.clone(),
            values: (0..g.cells())
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        };
        let wpsi = State {
            grid: g.clone(),
            values: psi.values.iter().zip(&w.values).map(|(p, w)| p * w).collect(),
        };
        let ip = inner_product(&psi, &wpsi).unwrap();
        assert!(ip.im.abs() < 1e-13, "⟨ψ, wψ⟩ must be real, got im = {:e}", ip.im);
    }

    #[test]
    fn regime_tags() {
        let m = ModelParams::new(1.0, 0.8, 1).unwrap();
        assert_eq!(m.regime, Regime::FocusingOk);
        assert!(m.gateaux_ok);

        let m = ModelParams::new(1.0, 3.0, 1).unwrap();
        assert_eq!(m.regime, Regime::OutsideTheorems);

        let m = ModelParams::new(-1.0, 1.0, 3).unwrap();
        assert_eq!(m.regime, Regime::DefocusingOk);

        // No upper bound for defocusing in dimensions 1 and 2.
        let m = ModelParams::new(-1.0, 7.0, 2).unwrap();
        assert_eq!(m.regime, Regime::DefocusingOk);

        let m = ModelParams::new(0.0, 1.0, 1).unwrap();
        assert_eq!(m.regime, Regime::OutsideTheorems);

        let m = ModelParams::new(1.0, 0.3, 1).unwrap();
        assert!(!m.gateaux_ok);

        assert!(ModelParams::new(1.0, 0.0, 1).is_err());
        assert!(ModelParams::new(1.0, -1.0, 1).is_err());
    }

    #[test]
    fn nonlinear_term_pointwise() {
        let g = grid_1d();
        let model = ModelParams::new(2.0, 1.0, 1).unwrap();
        let s = State::from_fn(&g, |_| Complex64::new(1.0, 1.0));
        let nl = nonlinear_term(&s, &model);
        for v in &nl.values {
            assert!((v - Complex64::new(4.0, 4.0)).norm() < 1e-14, "2·|1+i|²·(1+i) = 4+4i");
        }

        let model = ModelParams::new(1.0, 0.5, 1).unwrap();
        let s = State::from_fn(&g, |_| Complex64::new(4.0, 0.0));
        let nl = nonlinear_term(&s, &model);
        assert!((nl.values[0].re - 16.0).abs() < 1e-12, "|4|·4 = 16");

        let zero = State::zeros(&g);
        let nl = nonlinear_term(&zero, &model);
        assert!(nl.max_abs() == 0.0);
    }

    #[test]
    fn nonlinear_term_gauge_covariant() {
        let g = grid_1d();
        let model = ModelParams::new(1.3, 0.7, 1).unwrap();
        let s = State::gaussian(&g, &[0.5], 1.0, 0.9);
        let theta = 1.234;
        let rot = Complex64::from_polar(1.0, theta);
        let rotated = State {
            grid: g.clone(),
            values: s.values.iter().map(|v| v * rot).collect(),
        };
        let a = nonlinear_term(&rotated, &model);
        let b = nonlinear_term(&s, &model);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y * rot).norm() < 1e-13, "gauge covariance");
        }
    }
}
