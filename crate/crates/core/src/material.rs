//! Lamé parameters, derived elastic constants and the coated-disk geometry.
//!
//! Everything here is closed-form scalar arithmetic. Parameters are
//! dimensionless; the equations are invariant under a common rescaling of
//! lengths, so no unit system is imposed.

use num_complex::Complex64;

use crate::error::{CalrError, Result};

/// Absolute tolerance used to decide whether `z(c)` sits on `±k0`.
pub const RESONANCE_TOLERANCE: f64 = 1e-12;

/// Isotropic Lamé pair `(lambda, mu)` of the background and core.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LameParams {
    pub lambda: f64,
    pub mu: f64,
}

impl LameParams {
    /// Validates strong ellipticity: `mu > 0` and `lambda + mu > 0`.
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda.is_finite() && mu.is_finite()) {
            return Err(CalrError::invalid("Lamé parameters must be finite"));
        }
        if mu <= 0.0 {
            return Err(CalrError::invalid(format!("mu must be positive, got {mu}")));
        }
        if lambda + mu <= 0.0 {
            return Err(CalrError::invalid(format!(
                "lambda + mu must be positive, got {}",
                lambda + mu
            )));
        }
        Ok(Self { lambda, mu })
    }
}

/// Constants derived from a Lamé pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticConstants {
    /// Coefficient of the logarithmic part of the Kelvin matrix.
    pub alpha1: f64,
    /// Coefficient of the rank-one angular part of the Kelvin matrix.
    pub alpha2: f64,
    /// Accumulation point of the NP spectrum, `mu / (2 (lambda + 2 mu))`.
    pub k0: f64,
    /// Kolosov constant (plane strain), `(lambda + 3 mu) / (lambda + mu)`.
    pub kappa: f64,
}

/// Computes `alpha1`, `alpha2`, `k0` and `kappa` for a validated Lamé pair.
pub fn derive_constants(p: &LameParams) -> Result<ElasticConstants> {
    // Re-check: the struct fields are public.
    let p = LameParams::new(p.lambda, p.mu)?;
    let inv_mu = 1.0 / p.mu;
    let inv_p = 1.0 / (2.0 * p.mu + p.lambda);
    Ok(ElasticConstants {
        alpha1: 0.5 * (inv_mu + inv_p),
        alpha2: 0.5 * (inv_mu - inv_p),
        k0: p.mu / (2.0 * (p.lambda + 2.0 * p.mu)),
        kappa: (p.lambda + 3.0 * p.mu) / (p.lambda + p.mu),
    })
}

/// A Lamé pair bundled with its derived constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub lame: LameParams,
    pub consts: ElasticConstants,
}

impl Material {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        let lame = LameParams::new(lambda, mu)?;
        let consts = derive_constants(&lame)?;
        Ok(Self { lame, consts })
    }

    pub fn lambda(&self) -> f64 {
        self.lame.lambda
    }

    pub fn mu(&self) -> f64 {
        self.lame.mu
    }

    pub fn k0(&self) -> f64 {
        self.consts.k0
    }

    /// `mu * alpha1`
    pub fn mu_alpha1(&self) -> f64 {
        self.lame.mu * self.consts.alpha1
    }

    /// `mu * alpha2`
    pub fn mu_alpha2(&self) -> f64 {
        self.lame.mu * self.consts.alpha2
    }
}

/// Which accumulation point the contrast is tuned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResonanceSign {
    /// `z(c) = +k0`
    Plus,
    /// `z(c) = -k0`
    Minus,
}

impl ResonanceSign {
    pub fn as_f64(self) -> f64 {
        match self {
            ResonanceSign::Plus => 1.0,
            ResonanceSign::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            ResonanceSign::Plus => "+",
            ResonanceSign::Minus => "-",
        }
    }
}

impl std::str::FromStr for ResonanceSign {
    type Err = CalrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+" | "+1" | "plus" | "1" => Ok(ResonanceSign::Plus),
            "-" | "-1" | "minus" => Ok(ResonanceSign::Minus),
            other => Err(CalrError::invalid(format!(
                "unknown resonance sign `{other}`"
            ))),
        }
    }
}

/// Concentric core/shell geometry with the shell contrast `c` and loss `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoatedDiskConfig {
    pub r_i: f64,
    pub r_e: f64,
    pub contrast_c: f64,
    pub delta: f64,
}

impl CoatedDiskConfig {
    pub fn new(r_i: f64, r_e: f64, contrast_c: f64, delta: f64) -> Result<Self> {
        if !(r_i.is_finite() && r_e.is_finite() && r_i > 0.0 && r_i < r_e) {
            return Err(CalrError::invalid(format!(
                "radii must satisfy 0 < r_i < r_e, got r_i={r_i}, r_e={r_e}"
            )));
        }
        if !contrast_c.is_finite() {
            return Err(CalrError::invalid("contrast must be finite"));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(CalrError::invalid(format!(
                "delta must be >= 0, got {delta}"
            )));
        }
        Ok(Self {
            r_i,
            r_e,
            contrast_c,
            delta,
        })
    }

    /// Ratio `r_i / r_e`, strictly inside `(0, 1)`.
    pub fn rho(&self) -> f64 {
        self.r_i / self.r_e
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    /// Complex loss parameter at this configuration's `delta`.
    pub fn z_delta(&self) -> Result<ComplexLossParam> {
        z_delta(self.contrast_c, self.delta).map(|z_delta| ComplexLossParam { z_delta })
    }

    /// Which of `±k0` the contrast hits, if any.
    pub fn resonance(&self, k0: f64) -> Option<ResonanceSign> {
        resonance_of_contrast(self.contrast_c, k0)
    }
}

/// The spectral parameter of the integral equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexLossParam {
    pub z_delta: Complex64,
}

/// `z(c) = (c + 1) / (2 (1 - c))`, the lossless limit of `z_delta`.
pub fn z_of_contrast(c: f64) -> Result<f64> {
    if c == 1.0 {
        return Err(CalrError::invalid("contrast c = 1 makes z(c) singular"));
    }
    Ok((c + 1.0) / (2.0 * (1.0 - c)))
}

/// `z_delta = (1 + c + i delta) / (2 (1 - c) - 2 i delta)`.
pub fn z_delta(c: f64, delta: f64) -> Result<Complex64> {
    if c == 1.0 {
        return Err(CalrError::invalid(
            "contrast c = 1 makes z_delta degenerate",
        ));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(CalrError::invalid(format!(
            "delta must be >= 0, got {delta}"
        )));
    }
    let num = Complex64::new(1.0 + c, delta);
    let den = Complex64::new(2.0 * (1.0 - c), -2.0 * delta);
    Ok(num / den)
}

/// The unique negative contrast with `z(c) = sign * k0`.
///
/// Requires `0 < k0 < 1/2`.
pub fn contrast_for_resonance(sign: ResonanceSign, k0: f64) -> Result<f64> {
    if !(k0 > 0.0 && k0 < 0.5) {
        return Err(CalrError::invalid(format!(
            "k0 must lie in (0, 1/2), got {k0}"
        )));
    }
    let t = 2.0 * sign.as_f64() * k0;
    Ok((t - 1.0) / (1.0 + t))
}

/// Classifies `z(c)` against `±k0` with [`RESONANCE_TOLERANCE`].
pub fn resonance_of_contrast(c: f64, k0: f64) -> Option<ResonanceSign> {
    let z = z_of_contrast(c).ok()?;
    if (z - k0).abs() <= RESONANCE_TOLERANCE {
        Some(ResonanceSign::Plus)
    } else if (z + k0).abs() <= RESONANCE_TOLERANCE {
        Some(ResonanceSign::Minus)
    } else {
        None
    }
}

/// Critical radii `(r_*, r_**) = (r_e^2 / r_i, sqrt(r_e^3 / r_i))`.
pub fn critical_radii(g: &CoatedDiskConfig) -> (f64, f64) {
    let r_star = g.r_e * g.r_e / g.r_i;
    let r_star2 = (g.r_e.powi(3) / g.r_i).sqrt();
    (r_star, r_star2)
}
