//! Expansion of the dipole forcing `(d_nu F on the inner circle,
//! -d_nu F on the outer circle)` into per-block coefficients.
//!
//! On a circle of radius `r` around the origin the conormal derivative of
//! the dipole field has the Fourier form
//!
//! ```text
//! d_nu F = - sum_m D_b G_m e^{i(m+1)w} - sum_{m>=2} D_b H_m e^{i(1-m)w}
//! ```
//!
//! (complex notation, `c e^{ikw} = Re c phi_k + Im c phi~_k`), where
//! `D_b = b d_z + conj(b) d_zbar` differentiates in the source location and
//! `G_m`, `H_m` are the rational complex-potential coefficients below.
//!
//! Block `n` pairs order `n + 1` with slots 0/2 and order `1 - n` with
//! slots 1/3. The outer row carries the minus sign of the forcing.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::blocks::{BlockKey, Parity};
use crate::error::{CalrError, Result};
use crate::material::{CoatedDiskConfig, Material};
use crate::oracle::{quadrature_conormal_table, DEFAULT_NODES};
use crate::potentials::{dipole_conormal, DipoleSource};

/// Outer-circle coefficients `(g_{n,3}, g_{n,4}, g~_{n,3}, g~_{n,4})`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OuterCoefficients {
    pub g3: f64,
    pub g4: f64,
    pub gt3: f64,
    pub gt4: f64,
}

/// Inner-circle coefficients `(g_{n,1}, g_{n,2}, g~_{n,1}, g~_{n,2})`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InnerCoefficients {
    pub g1: f64,
    pub g2: f64,
    pub gt1: f64,
    pub gt2: f64,
}

/// How the inner-circle coefficients are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerMethod {
    /// Fourier projection of the analytically evaluated conormal derivative.
    #[default]
    Quadrature,
    /// The complex-potential formulas evaluated at `r_i`.
    ClosedForm,
}

fn as_complex(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

fn prefactor(mat: &Material) -> f64 {
    1.0 / (2.0 * PI * (mat.consts.kappa + 1.0))
}

/// `D_b G_m` at radius `r`.
fn db_g(m: usize, s: &DipoleSource, r: f64, mat: &Material) -> Complex64 {
    let z = as_complex(s.z);
    let a = as_complex(s.a);
    let b = as_complex(s.b);
    let c = -prefactor(mat);
    let mf = m as f64;
    let w = (Complex64::new(r, 0.0) / z).powi(m as i32);
    let kron = if m == 0 { 1.0 } else { 0.0 };
    let lead = a / z + a.conj() / z.conj() * kron;
    let dz = c * (-a / (z * z) * w + lead * (-mf) * w / z);
    let dzb = c * (-a.conj() / (z.conj() * z.conj()) * kron * w);
    b * dz + b.conj() * dzb
}

/// `D_b H_m` at radius `r`, `m >= 2`.
fn db_h(m: usize, s: &DipoleSource, r: f64, mat: &Material) -> Complex64 {
    let z = as_complex(s.z);
    let a = as_complex(s.a);
    let b = as_complex(s.b);
    let d = prefactor(mat);
    let kappa = mat.consts.kappa;
    let mf = m as f64;
    let zb = z.conj();
    let ab = a.conj();
    let r2 = r * r;
    let v = (Complex64::new(r, 0.0) / zb).powi(m as i32);
    let dz = d * (-(mf - 1.0) * ab / r2) * v;
    let dzb = d
        * (-(mf + 1.0) * (mf - 1.0) * ab / (zb * zb) - (1.0 - mf) * kappa * a / r2
            + mf * (mf - 1.0) * ab * z / zb / r2)
        * v;
    b * dz + b.conj() * dzb
}

/// Coefficients of `d_nu F` on `|x| = r` along orders `n + 1` and `1 - n`,
/// as complex numbers (real part plain, imaginary part tilde).
fn conormal_modes(n: usize, s: &DipoleSource, r: f64, mat: &Material) -> (Complex64, Complex64) {
    let hi = -db_g(n, s, r, mat);
    let lo = if n >= 2 {
        -db_h(n, s, r, mat)
    } else {
        Complex64::new(0.0, 0.0)
    };
    (hi, lo)
}

fn check_source(s: &DipoleSource, g: &CoatedDiskConfig) -> Result<()> {
    s.check_outside(g.r_e)
}

/// Closed-form outer coefficients; `g4` terms vanish for `n < 2`.
pub fn outer_coefficients(
    n: usize,
    s: &DipoleSource,
    g: &CoatedDiskConfig,
    mat: &Material,
) -> Result<OuterCoefficients> {
    check_source(s, g)?;
    let (hi, lo) = conormal_modes(n, s, g.r_e, mat);
    // The forcing on the outer circle is -d_nu F.
    Ok(OuterCoefficients {
        g3: -hi.re,
        g4: -lo.re,
        gt3: -hi.im,
        gt4: -lo.im,
    })
}

/// Inner coefficients by Fourier projection of `d_nu F` on the inner circle.
pub fn inner_coefficients(
    n: usize,
    s: &DipoleSource,
    g: &CoatedDiskConfig,
    mat: &Material,
) -> Result<InnerCoefficients> {
    check_source(s, g)?;
    let table = inner_projection_table(s, g, mat, n)?;
    Ok(table[n])
}

/// Inner coefficients from the complex-potential formulas at `r_i`.
pub fn inner_coefficients_closed_form(
    n: usize,
    s: &DipoleSource,
    g: &CoatedDiskConfig,
    mat: &Material,
) -> Result<InnerCoefficients> {
    check_source(s, g)?;
    let (hi, lo) = conormal_modes(n, s, g.r_i, mat);
    Ok(InnerCoefficients {
        g1: hi.re,
        g2: lo.re,
        gt1: hi.im,
        gt2: lo.im,
    })
}

fn inner_projection_table(
    s: &DipoleSource,
    g: &CoatedDiskConfig,
    mat: &Material,
    n_max: usize,
) -> Result<Vec<InnerCoefficients>> {
    let table = quadrature_conormal_table(
        |x, nx| dipole_conormal(s, x, nx, mat),
        g.r_i,
        n_max,
        DEFAULT_NODES,
    )?;
    Ok(table
        .into_iter()
        .map(|p| {
            let low = p.n >= 2;
            InnerCoefficients {
                g1: p.plain[0],
                g2: if low { p.plain[1] } else { 0.0 },
                gt1: p.tilde[0],
                gt2: if low { p.tilde[1] } else { 0.0 },
            }
        })
        .collect())
}

/// Per-block forcing vectors `[g_1, g_2, g_3, g_4]` for `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceCoefficients {
    pub n_max: usize,
    pub plain: Vec<[f64; 4]>,
    pub tilde: Vec<[f64; 4]>,
}

impl SourceCoefficients {
    pub fn compute(
        s: &DipoleSource,
        g: &CoatedDiskConfig,
        mat: &Material,
        n_max: usize,
        method: InnerMethod,
    ) -> Result<Self> {
        check_source(s, g)?;
        let inner: Vec<InnerCoefficients> = match method {
            InnerMethod::Quadrature => inner_projection_table(s, g, mat, n_max)?,
            InnerMethod::ClosedForm => (0..=n_max)
                .map(|n| inner_coefficients_closed_form(n, s, g, mat))
                .collect::<Result<_>>()?,
        };
        let mut plain = Vec::with_capacity(n_max + 1);
        let mut tilde = Vec::with_capacity(n_max + 1);
        for (n, inn) in inner.iter().enumerate() {
            let out = outer_coefficients(n, s, g, mat)?;
            plain.push([inn.g1, inn.g2, out.g3, out.g4]);
            tilde.push([inn.gt1, inn.gt2, out.gt3, out.gt4]);
        }
        Ok(Self {
            n_max,
            plain,
            tilde,
        })
    }

    /// Forcing vector of a block, in full slot coordinates.
    pub fn block_vector(&self, key: BlockKey) -> Result<[f64; 4]> {
        key.validate()?;
        if key.n > self.n_max {
            return Err(CalrError::invalid(format!(
                "block {key} beyond the expanded order {}",
                self.n_max
            )));
        }
        Ok(match key.parity {
            Parity::V => self.plain[key.n],
            Parity::Vtilde => self.tilde[key.n],
        })
    }

    /// `(I_n, II_n)` for block order `n`.
    pub fn envelope(&self, n: usize) -> (f64, f64) {
        coefficient_envelope(self.plain[n], self.tilde[n])
    }
}

/// `I_n = |g1|^2 + |g4|^2 + |g~1|^2 + |g~4|^2`,
/// `II_n = |g2|^2 + |g3|^2 + |g~2|^2 + |g~3|^2`.
pub fn coefficient_envelope(plain: [f64; 4], tilde: [f64; 4]) -> (f64, f64) {
    let sq = |v: f64| v * v;
    (
        sq(plain[0]) + sq(plain[3]) + sq(tilde[0]) + sq(tilde[3]),
        sq(plain[1]) + sq(plain[2]) + sq(tilde[1]) + sq(tilde[2]),
    )
}

/// Predicted order of magnitude of `g_{n,j}` (slot `j` 1-based):
/// `(r/|z|)^n` for odd slots and `n^2 (r/|z|)^n` for even ones, with `r`
/// the radius of the slot's circle.
pub fn envelope_prediction(n: usize, j: usize, s: &DipoleSource, g: &CoatedDiskConfig) -> f64 {
    let r = if j <= 2 { g.r_i } else { g.r_e };
    let base = (r / s.distance()).powi(n as i32);
    if j % 2 == 0 {
        (n * n) as f64 * base
    } else {
        base
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{quadrature_conormal_projection, rigid_motion_moments};

    fn desk() -> (CoatedDiskConfig, Material) {
        (
            CoatedDiskConfig::new(1.0, 2.0, -0.5, 0.0).unwrap(),
            Material::new(1.0, 1.0).unwrap(),
        )
    }

    fn axial() -> DipoleSource {
        DipoleSource::new([4.0, 0.0], [1.0, 0.0], [1.0, 0.0]).unwrap()
    }

    fn generic() -> DipoleSource {
        DipoleSource::new([2.2, 1.9], [0.3, -1.1], [0.8, 0.45]).unwrap()
    }

    #[test]
    fn first_outer_coefficient_example() {
        let (g, m) = desk();
        let c = outer_coefficients(1, &axial(), &g, &m).unwrap();
        assert!((c.g3 - 1.0 / (96.0 * PI)).abs() < 1e-15);
        assert_eq!(c.g4, 0.0);
        assert!(c.gt3.abs() < 1e-18);
    }

    #[test]
    fn rejects_source_inside_disk() {
        let (g, m) = desk();
        let s = DipoleSource::new([1.5, 0.0], [1.0, 0.0], [1.0, 0.0]).unwrap();
        assert!(outer_coefficients(2, &s, &g, &m)
            .unwrap_err()
            .is_validation());
        assert!(inner_coefficients(2, &s, &g, &m).is_err());
    }

    #[test]
    fn outer_closed_form_matches_projection() {
        let (g, m) = desk();
        for s in [axial(), generic()] {
            for n in 0..=30 {
                let c = outer_coefficients(n, &s, &g, &m).unwrap();
                let p = quadrature_conormal_projection(
                    |x, nx| dipole_conormal(&s, x, nx, &m),
                    g.r_e,
                    n,
                    DEFAULT_NODES,
                )
                .unwrap();
                let tol = 1e-9;
                assert!((c.g3 + p.plain[0]).abs() < tol, "n={n}");
                assert!((c.gt3 + p.tilde[0]).abs() < tol, "n={n}");
                if n >= 2 {
                    assert!((c.g4 + p.plain[1]).abs() < tol, "n={n}");
                    assert!((c.gt4 + p.tilde[1]).abs() < tol, "n={n}");
                }
            }
        }
    }

    #[test]
    fn inner_closed_form_matches_projection() {
        let (g, m) = desk();
        for s in [axial(), generic()] {
            let q = SourceCoefficients::compute(&s, &g, &m, 30, InnerMethod::Quadrature).unwrap();
            let c = SourceCoefficients::compute(&s, &g, &m, 30, InnerMethod::ClosedForm).unwrap();
            for n in 0..=30 {
                for j in 0..2 {
                    assert!((q.plain[n][j] - c.plain[n][j]).abs() < 1e-9);
                    assert!((q.tilde[n][j] - c.tilde[n][j]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn rigid_components_vanish() {
        let (g, m) = desk();
        for s in [axial(), generic()] {
            for r in [g.r_i, g.r_e] {
                let mom =
                    rigid_motion_moments(|x, nx| dipole_conormal(&s, x, nx, &m), r, 512).unwrap();
                assert!(mom.iter().all(|v| v.abs() < 1e-10), "{mom:?}");
                let p = quadrature_conormal_projection(
                    |x, nx| dipole_conormal(&s, x, nx, &m),
                    r,
                    1,
                    512,
                )
                .unwrap();
                assert!(p.plain[1].abs() < 1e-10 && p.tilde[1].abs() < 1e-10);
            }
            // The tilde order-one element is the infinitesimal rotation.
            let c = SourceCoefficients::compute(&s, &g, &m, 2, InnerMethod::Quadrature).unwrap();
            assert!(c.tilde[0][0].abs() < 1e-10 && c.tilde[0][2].abs() < 1e-10);
        }
    }

    #[test]
    fn envelope_sums() {
        assert_eq!(coefficient_envelope([0.0; 4], [0.0; 4]), (0.0, 0.0));
        let (i, ii) = coefficient_envelope([1.0, 2.0, 3.0, 4.0], [-1.0, 0.5, 0.0, 2.0]);
        assert_eq!(i, 1.0 + 16.0 + 1.0 + 4.0);
        assert_eq!(ii, 4.0 + 9.0 + 0.25);
        let (g, m) = desk();
        let c =
            SourceCoefficients::compute(&generic(), &g, &m, 20, InnerMethod::Quadrature).unwrap();
        for n in 0..=20 {
            let (i, ii) = c.envelope(n);
            assert!(i >= 0.0 && ii >= 0.0);
        }
        assert!(c
            .block_vector(BlockKey::new(21, Parity::V).unwrap())
            .is_err());
    }
}
