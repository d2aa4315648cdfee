//! Kelvin matrix, closed-form single-layer potentials on a circle, the
//! single-disk NP spectrum and the Newtonian field of a point dipole.

use std::f64::consts::PI;

use crate::error::{CalrError, Result};
use crate::material::Material;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// `phi_m = [cos m w, sin m w]` or its companion `[-sin m w, cos m w]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisKind {
    Plain,
    Tilde,
}

impl BasisKind {
    /// `+1` for plain, `-1` for tilde.
    pub fn sign(self) -> f64 {
        match self {
            BasisKind::Plain => 1.0,
            BasisKind::Tilde => -1.0,
        }
    }
}

/// Fourier order and kind of a trigonometric basis element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    pub m: i32,
    pub kind: BasisKind,
}

impl BasisIndex {
    pub fn plain(m: i32) -> Self {
        Self {
            m,
            kind: BasisKind::Plain,
        }
    }

    pub fn tilde(m: i32) -> Self {
        Self {
            m,
            kind: BasisKind::Tilde,
        }
    }

    /// Value at angle `omega`.
    pub fn eval(&self, omega: f64) -> Vec2 {
        basis_value(self.m, self.kind, omega)
    }
}

impl std::fmt::Display for BasisIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            BasisKind::Plain => write!(f, "phi_{}", self.m),
            BasisKind::Tilde => write!(f, "phi~_{}", self.m),
        }
    }
}

#[inline]
pub(crate) fn basis_value(m: i32, kind: BasisKind, omega: f64) -> Vec2 {
    let (s, c) = (m as f64 * omega).sin_cos();
    match kind {
        BasisKind::Plain => [c, s],
        BasisKind::Tilde => [-s, c],
    }
}

/// Point in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    pub r: f64,
    pub omega: f64,
}

impl PolarPoint {
    pub fn new(r: f64, omega: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0 && omega.is_finite()) {
            return Err(CalrError::invalid(format!(
                "invalid polar point ({r}, {omega})"
            )));
        }
        Ok(Self { r, omega })
    }

    pub fn from_cartesian(x: Vec2) -> Self {
        Self {
            r: x[0].hypot(x[1]),
            omega: x[1].atan2(x[0]),
        }
    }

    pub fn to_cartesian(&self) -> Vec2 {
        let (s, c) = self.omega.sin_cos();
        [self.r * c, self.r * s]
    }
}

/// Point dipole `b^T grad (delta_z a)` located at `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleSource {
    pub z: Vec2,
    pub a: Vec2,
    pub b: Vec2,
}

impl DipoleSource {
    pub fn new(z: Vec2, a: Vec2, b: Vec2) -> Result<Self> {
        if z.iter()
            .chain(a.iter())
            .chain(b.iter())
            .any(|v| !v.is_finite())
        {
            return Err(CalrError::invalid("dipole data must be finite"));
        }
        if a == [0.0, 0.0] && b == [0.0, 0.0] {
            return Err(CalrError::invalid(
                "dipole moment a and direction b are both zero",
            ));
        }
        Ok(Self { z, a, b })
    }

    pub fn distance(&self) -> f64 {
        self.z[0].hypot(self.z[1])
    }

    /// Checks `|z| > r_e`.
    pub fn check_outside(&self, r_e: f64) -> Result<()> {
        if self.distance() <= r_e {
            return Err(CalrError::invalid(format!(
                "source |z| = {} must lie outside r_e = {r_e}",
                self.distance()
            )));
        }
        Ok(())
    }
}

fn kelvin_coeffs(mat: &Material) -> (f64, f64) {
    (
        mat.consts.alpha1 / (2.0 * PI),
        mat.consts.alpha2 / (2.0 * PI),
    )
}

#[inline]
fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

fn check_nonzero(x: Vec2) -> Result<f64> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if r2 == 0.0 || !r2.is_finite() {
        return Err(CalrError::invalid(
            "Kelvin matrix is singular at the origin",
        ));
    }
    Ok(r2)
}

/// `Gamma_ij(x) = (alpha1/2pi) delta_ij ln|x| - (alpha2/2pi) x_i x_j / |x|^2`.
pub fn kelvin_matrix(x: Vec2, mat: &Material) -> Result<Mat2> {
    let r2 = check_nonzero(x)?;
    let (a, b) = kelvin_coeffs(mat);
    let l = 0.5 * a * r2.ln();
    Ok([
        [l - b * x[0] * x[0] / r2, -b * x[0] * x[1] / r2],
        [-b * x[0] * x[1] / r2, l - b * x[1] * x[1] / r2],
    ])
}

/// `D[i][j][k] = d_k Gamma_ij(x)`. The caller guarantees `x != 0`.
pub fn kelvin_gradient(x: Vec2, mat: &Material) -> [[[f64; 2]; 2]; 2] {
    let (a, b) = kelvin_coeffs(mat);
    let r2 = x[0] * x[0] + x[1] * x[1];
    let r4 = r2 * r2;
    let mut d = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                d[i][j][k] = a * delta(i, j) * x[k] / r2
                    - b * (delta(i, k) * x[j] + delta(j, k) * x[i]) / r2
                    + 2.0 * b * x[i] * x[j] * x[k] / r4;
            }
        }
    }
    d
}

/// `H[i][j][k][l] = d_l d_k Gamma_ij(x)`. The caller guarantees `x != 0`.
pub fn kelvin_hessian(x: Vec2, mat: &Material) -> [[[[f64; 2]; 2]; 2]; 2] {
    let (a, b) = kelvin_coeffs(mat);
    let r2 = x[0] * x[0] + x[1] * x[1];
    let r4 = r2 * r2;
    let r6 = r4 * r2;
    let mut h = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    h[i][j][k][l] = a * delta(i, j) * (delta(k, l) / r2 - 2.0 * x[k] * x[l] / r4)
                        - b * (delta(i, k) * delta(j, l) + delta(j, k) * delta(i, l)) / r2
                        + 2.0 * b * (delta(i, k) * x[j] + delta(j, k) * x[i]) * x[l] / r4
                        + 2.0
                            * b
                            * (delta(i, l) * x[j] * x[k]
                                + delta(j, l) * x[i] * x[k]
                                + delta(k, l) * x[i] * x[j])
                            / r4
                        - 8.0 * b * x[i] * x[j] * x[k] * x[l] / r6;
                }
            }
        }
    }
    h
}

/// Conormal derivative `lambda tr(g) n + mu (g + g^T) n` for the
/// displacement gradient `g[i][l] = d_l u_i`.
pub fn traction(g: &Mat2, normal: Vec2, mat: &Material) -> Vec2 {
    let (lambda, mu) = (mat.lambda(), mat.mu());
    let tr = g[0][0] + g[1][1];
    let mut t = [0.0; 2];
    for i in 0..2 {
        t[i] = lambda * tr * normal[i];
        for l in 0..2 {
            t[i] += mu * (g[i][l] + g[l][i]) * normal[l];
        }
    }
    t
}

/// `T[i][j]`: traction component `i` at `x` with normal `normal` of the
/// displacement `Gamma(x - y) e_j`, where `d = x - y != 0`.
pub fn traction_kernel(d: Vec2, normal: Vec2, mat: &Material) -> Mat2 {
    let dg = kelvin_gradient(d, mat);
    let mut out = [[0.0; 2]; 2];
    for j in 0..2 {
        let g = [[dg[0][j][0], dg[0][j][1]], [dg[1][j][0], dg[1][j][1]]];
        let t = traction(&g, normal, mat);
        out[0][j] = t[0];
        out[1][j] = t[1];
    }
    out
}

/// One term `coef * r^power * basis(order, kind)(omega)`.
#[derive(Debug, Clone, Copy)]
struct PolarTerm {
    coef: f64,
    power: i32,
    order: i32,
    kind: BasisKind,
}

impl PolarTerm {
    fn value(&self, p: &PolarPoint) -> Vec2 {
        let f = self.coef * p.r.powi(self.power);
        let v = basis_value(self.order, self.kind, p.omega);
        [f * v[0], f * v[1]]
    }

    /// Cartesian gradient `g[i][l] = d_l u_i`.
    fn gradient(&self, p: &PolarPoint) -> Mat2 {
        let r = p.r;
        let v = basis_value(self.order, self.kind, p.omega);
        // d/domega of the basis vector
        let q = self.order as f64;
        let dv = match self.kind {
            BasisKind::Plain => {
                let t = basis_value(self.order, BasisKind::Tilde, p.omega);
                [q * t[0], q * t[1]]
            }
            BasisKind::Tilde => {
                let t = basis_value(self.order, BasisKind::Plain, p.omega);
                [-q * t[0], -q * t[1]]
            }
        };
        let dr = self.coef * self.power as f64 * r.powi(self.power - 1);
        let dw_over_r = self.coef * r.powi(self.power - 1);
        let (s, c) = p.omega.sin_cos();
        let mut g = [[0.0; 2]; 2];
        for i in 0..2 {
            let ur = dr * v[i];
            let uw = dw_over_r * dv[i];
            g[i][0] = c * ur - s * uw;
            g[i][1] = s * ur + c * uw;
        }
        g
    }
}

/// Which closed-form branch of a single-layer potential to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Interior,
    Exterior,
}

fn single_layer_terms(
    r0: f64,
    b: BasisIndex,
    side: Side,
    mat: &Material,
) -> Result<Vec<PolarTerm>> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(CalrError::invalid(format!(
            "circle radius must be positive, got {r0}"
        )));
    }
    let a1 = mat.consts.alpha1;
    let a2 = mat.consts.alpha2;
    let s = b.kind.sign();
    let kind = b.kind;
    let m = b.m;
    // The closed forms below are those of -S; the sign is flipped at the end.
    let mut terms = Vec::with_capacity(3);
    match (m, kind, side) {
        (1, BasisKind::Plain, Side::Interior) => terms.push(PolarTerm {
            coef: 0.5 * (a1 - a2),
            power: 1,
            order: 1,
            kind,
        }),
        (1, BasisKind::Plain, Side::Exterior) => terms.push(PolarTerm {
            coef: 0.5 * (a1 - a2) * r0 * r0,
            power: -1,
            order: 1,
            kind,
        }),
        (m, _, Side::Interior) if m >= 2 => {
            let mf = m as f64;
            terms.push(PolarTerm {
                coef: a1 / (2.0 * mf) * r0.powi(1 - m),
                power: m,
                order: m,
                kind,
            });
            terms.push(PolarTerm {
                coef: s * 0.5 * a2 * r0.powi(3 - m),
                power: m - 2,
                order: 2 - m,
                kind,
            });
            terms.push(PolarTerm {
                coef: -s * 0.5 * a2 * r0.powi(1 - m),
                power: m,
                order: 2 - m,
                kind,
            });
        }
        (m, _, Side::Exterior) if m >= 2 => terms.push(PolarTerm {
            coef: a1 / (2.0 * m as f64) * r0.powi(m + 1),
            power: -m,
            order: m,
            kind,
        }),
        (m, _, Side::Interior) if m <= -1 => {
            let k = -m;
            terms.push(PolarTerm {
                coef: a1 / (2.0 * k as f64) * r0.powi(1 - k),
                power: k,
                order: m,
                kind,
            });
        }
        (m, _, Side::Exterior) if m <= -1 => {
            let k = -m;
            terms.push(PolarTerm {
                coef: a1 / (2.0 * k as f64) * r0.powi(k + 1),
                power: -k,
                order: m,
                kind,
            });
            terms.push(PolarTerm {
                coef: s * 0.5 * a2 * r0.powi(k + 1),
                power: -k,
                order: 2 - m,
                kind,
            });
            terms.push(PolarTerm {
                coef: -s * 0.5 * a2 * r0.powi(k + 3),
                power: -k - 2,
                order: 2 - m,
                kind,
            });
        }
        _ => {
            return Err(CalrError::Unsupported(format!(
                "no closed-form single layer for m = {m}, {kind:?}"
            )))
        }
    }
    for t in &mut terms {
        t.coef = -t.coef;
    }
    Ok(terms)
}

fn natural_side(r0: f64, r: f64) -> Side {
    if r <= r0 {
        Side::Interior
    } else {
        Side::Exterior
    }
}

/// `S_Gamma[basis](x)` for the circle of radius `r0` centred at the origin.
///
/// On the circle itself both branches agree and the common trace is returned.
/// Supported: every `m >= 2` and `m <= -1` of either kind, and plain `m = 1`.
pub fn single_layer_basis(r0: f64, b: BasisIndex, x: PolarPoint, mat: &Material) -> Result<Vec2> {
    single_layer_basis_side(r0, b, x, natural_side(r0, x.r), mat)
}

/// Like [`single_layer_basis`] with an explicit branch, so that one-sided
/// limits can be evaluated at or across the circle.
pub fn single_layer_basis_side(
    r0: f64,
    b: BasisIndex,
    x: PolarPoint,
    side: Side,
    mat: &Material,
) -> Result<Vec2> {
    let terms = single_layer_terms(r0, b, side, mat)?;
    let mut out = [0.0; 2];
    for t in &terms {
        let v = t.value(&x);
        out[0] += v[0];
        out[1] += v[1];
    }
    Ok(out)
}

/// Cartesian gradient `g[i][l] = d_l S[basis]_i` on the requested branch.
pub fn single_layer_gradient_side(
    r0: f64,
    b: BasisIndex,
    x: PolarPoint,
    side: Side,
    mat: &Material,
) -> Result<Mat2> {
    if x.r == 0.0 {
        return Err(CalrError::invalid(
            "gradient is not evaluated at the centre",
        ));
    }
    let terms = single_layer_terms(r0, b, side, mat)?;
    let mut g = [[0.0; 2]; 2];
    for t in &terms {
        let d = t.gradient(&x);
        for i in 0..2 {
            for l in 0..2 {
                g[i][l] += d[i][l];
            }
        }
    }
    Ok(g)
}

/// Analytic one-sided conormal derivative of `S[basis]` on the circle
/// `|x| = r0` at angle `omega` (normal pointing outward).
pub fn single_layer_conormal(
    r0: f64,
    b: BasisIndex,
    omega: f64,
    side: Side,
    mat: &Material,
) -> Result<Vec2> {
    let x = PolarPoint { r: r0, omega };
    let g = single_layer_gradient_side(r0, b, x, side, mat)?;
    let (s, c) = omega.sin_cos();
    Ok(traction(&g, [c, s], mat))
}

/// Eigenvalue of the single-disk NP operator `K*` on a basis element.
pub fn np_disk_eigenaction(b: BasisIndex, mat: &Material) -> Result<f64> {
    let k0 = mat.consts.k0;
    match (b.m, b.kind) {
        (0, _) => Err(CalrError::Unsupported(
            "m = 0 elements are not part of the basis".into(),
        )),
        (m, _) if m < 0 => Ok(-k0),
        (1, BasisKind::Plain) => Ok(-mat.lambda() / (2.0 * (2.0 * mat.mu() + mat.lambda()))),
        (1, BasisKind::Tilde) => Ok(0.5),
        _ => Ok(k0),
    }
}

fn dipole_offset(s: &DipoleSource, x: Vec2) -> Result<Vec2> {
    let d = [x[0] - s.z[0], x[1] - s.z[1]];
    if d == [0.0, 0.0] {
        return Err(CalrError::invalid(
            "field point coincides with the dipole location",
        ));
    }
    Ok(d)
}

/// `F(x) = b^T grad_x (Gamma(x - z) a)`.
pub fn dipole_newtonian_field(s: &DipoleSource, x: Vec2, mat: &Material) -> Result<Vec2> {
    let d = dipole_offset(s, x)?;
    let dg = kelvin_gradient(d, mat);
    let mut f = [0.0; 2];
    for (i, fi) in f.iter_mut().enumerate() {
        for j in 0..2 {
            for k in 0..2 {
                *fi += s.b[k] * dg[i][j][k] * s.a[j];
            }
        }
    }
    Ok(f)
}

/// Gradient `g[i][l] = d_l F_i` of the dipole field.
pub fn dipole_gradient(s: &DipoleSource, x: Vec2, mat: &Material) -> Result<Mat2> {
    let d = dipole_offset(s, x)?;
    let h = kelvin_hessian(d, mat);
    let mut g = [[0.0; 2]; 2];
    for (i, gi) in g.iter_mut().enumerate() {
        for (l, gil) in gi.iter_mut().enumerate() {
            for j in 0..2 {
                for k in 0..2 {
                    *gil += s.b[k] * h[i][j][k][l] * s.a[j];
                }
            }
        }
    }
    Ok(g)
}

/// Conormal derivative of the dipole field at `x` with unit normal `normal`.
pub fn dipole_conormal(s: &DipoleSource, x: Vec2, normal: Vec2, mat: &Material) -> Result<Vec2> {
    let g = dipole_gradient(s, x, mat)?;
    Ok(traction(&g, normal, mat))
}
