//! Quadrature ground truth on circles: layer potentials by the periodic
//! trapezoid rule (with Kress log-splitting on the circle itself), Fourier
//! projection of conormal data, quadrature-built blocks and an independent
//! characteristic-polynomial eigenvalue solver.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::blocks::{
    block_slots, slot_element, BasisElement, BlockKey, BlockMatrix, BlockRole, Circle,
};
use crate::error::{CalrError, Result};
use crate::material::{CoatedDiskConfig, Material};
use crate::potentials::{
    basis_value, kelvin_matrix, traction, traction_kernel, BasisIndex, BasisKind, PolarPoint, Side,
    Vec2,
};

/// Node count used for block and coefficient oracles.
pub const DEFAULT_NODES: usize = 1024;
/// Node count for the near-boundary checks.
pub const JUMP_NODES: usize = 4096;
/// One-sided offsets (relative to the radius) for conormal limits.
pub const JUMP_OFFSETS: [f64; 3] = [1e-3, 5e-4, 2.5e-4];

/// Uniform periodic trapezoid rule on a circle centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureRule {
    pub node_count: usize,
    pub radius: f64,
}

impl QuadratureRule {
    pub fn new(node_count: usize, radius: f64) -> Result<Self> {
        if node_count < 8 || !node_count.is_power_of_two() {
            return Err(CalrError::invalid(format!(
                "node count must be a power of two >= 8, got {node_count}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(CalrError::invalid(format!(
                "radius must be positive, got {radius}"
            )));
        }
        Ok(Self { node_count, radius })
    }

    pub fn angle(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.node_count as f64
    }

    /// Arc-length weight `2 pi r / N`.
    pub fn weight(&self) -> f64 {
        2.0 * PI * self.radius / self.node_count as f64
    }

    pub fn point(&self, k: usize) -> Vec2 {
        let (s, c) = self.angle(k).sin_cos();
        [self.radius * c, self.radius * s]
    }
}

/// `S[density](x)` by the trapezoid rule; `x` must stay `1e-3 r0` away from the circle.
pub fn quadrature_single_layer(
    rule: &QuadratureRule,
    density: impl Fn(f64) -> Vec2,
    x: Vec2,
    mat: &Material,
) -> Result<Vec2> {
    let r = x[0].hypot(x[1]);
    if (r - rule.radius).abs() < 1e-3 * rule.radius {
        return Err(CalrError::invalid(format!(
            "point at |x| = {r} is too close to the circle of radius {}",
            rule.radius
        )));
    }
    let w = rule.weight();
    let mut out = [0.0; 2];
    for k in 0..rule.node_count {
        let y = rule.point(k);
        let g = kelvin_matrix([x[0] - y[0], x[1] - y[1]], mat)?;
        let f = density(rule.angle(k));
        out[0] += w * (g[0][0] * f[0] + g[0][1] * f[1]);
        out[1] += w * (g[1][0] * f[0] + g[1][1] * f[1]);
    }
    Ok(out)
}

/// Precomputed nodes and weights for quadrature on the two circles.
#[derive(Debug, Clone)]
pub struct OracleContext {
    mat: Material,
    radii: [f64; 2],
    n_src: usize,
    n_tgt: usize,
    kress: Vec<f64>,
}

impl OracleContext {
    /// `n_src` source nodes per circle; targets are every `n_src / n_tgt`-th node.
    pub fn new(radii: [f64; 2], mat: &Material, n_src: usize, n_tgt: usize) -> Result<Self> {
        QuadratureRule::new(n_src, radii[0])?;
        QuadratureRule::new(n_src, radii[1])?;
        if n_tgt == 0 || !n_tgt.is_power_of_two() || n_tgt > n_src {
            return Err(CalrError::invalid(format!(
                "target count {n_tgt} must be a power of two not exceeding {n_src}"
            )));
        }
        Ok(Self {
            mat: *mat,
            radii,
            n_src,
            n_tgt,
            kress: kress_weights(n_src),
        })
    }

    /// Context for the coated disk with enough targets to resolve block `n`.
    pub fn for_block(g: &CoatedDiskConfig, mat: &Material, n: usize) -> Result<Self> {
        let n_tgt = (4 * (n + 2)).next_power_of_two().max(64);
        let n_src = DEFAULT_NODES.max(4 * n_tgt);
        Self::new([g.r_i, g.r_e], mat, n_src, n_tgt)
    }

    fn h(&self) -> f64 {
        2.0 * PI / self.n_src as f64
    }

    fn src_angle(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n_src as f64
    }

    fn stride(&self) -> usize {
        self.n_src / self.n_tgt
    }

    fn densities(&self, e: BasisElement) -> Vec<Vec2> {
        (0..self.n_src)
            .map(|k| basis_value(e.index.m, e.index.kind, self.src_angle(k)))
            .collect()
    }

    /// `S[Phi_e]` at the targets of circle `target`.
    pub fn s_samples(&self, e: BasisElement, target: Circle) -> Vec<Vec2> {
        let f = self.densities(e);
        let rs = self.radii[e.circle.idx()];
        let rt = self.radii[target.idx()];
        let h = self.h();
        let (a, b) = (
            self.mat.consts.alpha1 / (2.0 * PI),
            self.mat.consts.alpha2 / (2.0 * PI),
        );
        let mut out = Vec::with_capacity(self.n_tgt);
        for t in 0..self.n_tgt {
            let ti = t * self.stride();
            let theta = self.src_angle(ti);
            let x = [rt * theta.cos(), rt * theta.sin()];
            let mut acc = [0.0; 2];
            if target == e.circle {
                let log_r = a * rs.ln();
                for (k, fk) in f.iter().enumerate() {
                    let d = (ti + self.n_src - k) % self.n_src;
                    let tau = self.src_angle(k);
                    let (su, cu) = (0.5 * (theta + tau)).sin_cos();
                    let u = [-su, cu];
                    let ud = u[0] * fk[0] + u[1] * fk[1];
                    let c = 0.5 * a * self.kress[d] + h * log_r;
                    acc[0] += rs * (c * fk[0] - h * b * u[0] * ud);
                    acc[1] += rs * (c * fk[1] - h * b * u[1] * ud);
                }
            } else {
                for (k, fk) in f.iter().enumerate() {
                    let tau = self.src_angle(k);
                    let y = [rs * tau.cos(), rs * tau.sin()];
                    let g = kelvin_matrix([x[0] - y[0], x[1] - y[1]], &self.mat)
                        .expect("circles are disjoint");
                    acc[0] += h * rs * (g[0][0] * fk[0] + g[0][1] * fk[1]);
                    acc[1] += h * rs * (g[1][0] * fk[0] + g[1][1] * fk[1]);
                }
            }
            out.push(acc);
        }
        out
    }

    /// Conormal data of `S[Phi_e]` at the targets of circle `target`: the
    /// principal value `K*[Phi_e]` when `target` carries the density, the
    /// smooth traction otherwise.
    pub fn kstar_samples(&self, e: BasisElement, target: Circle) -> Vec<Vec2> {
        let f = self.densities(e);
        let rs = self.radii[e.circle.idx()];
        let rt = self.radii[target.idx()];
        let h = self.h();
        let mut out = Vec::with_capacity(self.n_tgt);
        for t in 0..self.n_tgt {
            let ti = t * self.stride();
            let theta = self.src_angle(ti);
            let nx = [theta.cos(), theta.sin()];
            let x = [rt * nx[0], rt * nx[1]];
            let mut acc = [0.0; 2];
            let mut add = |k: usize, w: f64| {
                let tau = self.src_angle(k);
                let y = [rs * tau.cos(), rs * tau.sin()];
                let tk = traction_kernel([x[0] - y[0], x[1] - y[1]], nx, &self.mat);
                let fk = f[k];
                acc[0] += w * (tk[0][0] * fk[0] + tk[0][1] * fk[1]);
                acc[1] += w * (tk[1][0] * fk[0] + tk[1][1] * fk[1]);
            };
            if target == e.circle {
                // Alternating-point rule for the Cauchy-type kernel.
                for j in 0..self.n_src / 2 {
                    add((ti + 2 * j + 1) % self.n_src, 2.0 * h * rs);
                }
            } else {
                for k in 0..self.n_src {
                    add(k, h * rs);
                }
            }
            out.push(acc);
        }
        out
    }

    /// `<Phi_e, f>` over the circle of `e`, from samples at its targets.
    pub fn project(&self, e: BasisElement, samples: &[Vec2]) -> f64 {
        let r = self.radii[e.circle.idx()];
        let mut acc = 0.0;
        for (t, s) in samples.iter().enumerate() {
            let theta = self.src_angle(t * self.stride());
            let phi = basis_value(e.index.m, e.index.kind, theta);
            acc += phi[0] * s[0] + phi[1] * s[1];
        }
        acc * 2.0 * PI * r / self.n_tgt as f64
    }
}

/// Kress weights `R_j` for `ln(4 sin^2((t - t_j)/2))`, indexed by `j` offset.
fn kress_weights(n_nodes: usize) -> Vec<f64> {
    let n = n_nodes / 2;
    let h = 2.0 * PI / n_nodes as f64;
    (0..n_nodes)
        .map(|d| {
            let t = d as f64 * h;
            let mut s = 0.0;
            for m in 1..n {
                s += (m as f64 * t).cos() / m as f64;
            }
            let alt = if d % 2 == 0 { 1.0 } else { -1.0 };
            -(2.0 * PI / n as f64) * s - PI / (n * n) as f64 * alt
        })
        .collect()
}

/// Quadrature-built Gram and NP blocks.
#[derive(Debug, Clone)]
pub struct OracleBlock {
    pub gram: BlockMatrix,
    pub np: BlockMatrix,
    /// `max |G K - K^T G|`.
    pub symmetry_residual: f64,
}

/// Builds both blocks of `key` by quadrature and projection.
pub fn oracle_block(key: BlockKey, g: &CoatedDiskConfig, mat: &Material) -> Result<OracleBlock> {
    let ctx = OracleContext::for_block(g, mat, key.n)?;
    oracle_block_with(&ctx, key, g)
}

pub fn oracle_block_with(
    ctx: &OracleContext,
    key: BlockKey,
    g: &CoatedDiskConfig,
) -> Result<OracleBlock> {
    let slots = block_slots(key)?;
    let d = slots.len();
    let mut gram = DMatrix::zeros(d, d);
    let mut np = DMatrix::zeros(d, d);
    for (cj, &sj) in slots.iter().enumerate() {
        let ej = slot_element(key, sj);
        let mut s_on = [Vec::new(), Vec::new()];
        let mut k_on = [Vec::new(), Vec::new()];
        for c in [Circle::Inner, Circle::Outer] {
            s_on[c.idx()] = ctx.s_samples(ej, c);
            let mut k = ctx.kstar_samples(ej, c);
            if c == Circle::Inner {
                for v in &mut k {
                    v[0] = -v[0];
                    v[1] = -v[1];
                }
            }
            k_on[c.idx()] = k;
        }
        for (ci, &si) in slots.iter().enumerate() {
            let ei = slot_element(key, si);
            let c = ei.circle.idx();
            gram[(ci, cj)] = -ctx.project(ei, &s_on[c]);
            np[(ci, cj)] = ctx.project(ei, &k_on[c]) / (2.0 * PI * ei.circle.radius(g));
        }
    }
    let symmetry_residual = crate::blocks::gram_symmetry_defect(&gram, &np);
    if !symmetry_residual.is_finite() {
        return Err(CalrError::NoConvergence(format!(
            "oracle block {key} is not finite"
        )));
    }
    Ok(OracleBlock {
        gram: BlockMatrix {
            key,
            role: BlockRole::Gram,
            slots: slots.to_vec(),
            entries: gram,
        },
        np: BlockMatrix {
            key,
            role: BlockRole::Np,
            slots: slots.to_vec(),
            entries: np,
        },
        symmetry_residual,
    })
}

/// `(Phi_a, Phi_b)_* = -<Phi_a, S[Phi_b]>` by quadrature.
pub fn star_inner_product(
    a: BasisElement,
    b: BasisElement,
    g: &CoatedDiskConfig,
    mat: &Material,
) -> Result<f64> {
    let top = a.index.m.unsigned_abs().max(b.index.m.unsigned_abs()) as usize;
    let ctx = OracleContext::for_block(g, mat, top)?;
    Ok(-ctx.project(a, &ctx.s_samples(b, a.circle)))
}

/// Eigenvalue of the single-disk `K*` on `b`, by quadrature, together with
/// the largest deviation of `K*[phi] - value * phi` over the targets.
pub fn oracle_disk_eigenaction(b: BasisIndex, r0: f64, mat: &Material) -> Result<(f64, f64)> {
    let top = b.m.unsigned_abs() as usize;
    let n_tgt = (4 * (top + 2)).next_power_of_two().max(64);
    let ctx = OracleContext::new([r0, 2.0 * r0], mat, DEFAULT_NODES.max(4 * n_tgt), n_tgt)?;
    let e = BasisElement {
        circle: Circle::Inner,
        index: b,
    };
    let k = ctx.kstar_samples(e, Circle::Inner);
    let value = ctx.project(e, &k) / (2.0 * PI * r0);
    let mut dev: f64 = 0.0;
    for (t, v) in k.iter().enumerate() {
        let phi = b.eval(ctx.src_angle(t * ctx.stride()));
        dev = dev.max(
            (v[0] - value * phi[0])
                .abs()
                .max((v[1] - value * phi[1]).abs()),
        );
    }
    Ok((value, dev))
}

/// Coefficients of conormal data on `|x| = r0` along orders `n + 1` and `1 - n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConormalProjection {
    pub n: usize,
    /// Plain coefficients `[order n+1, order 1-n]`.
    pub plain: [f64; 2],
    /// Tilde coefficients `[order n+1, order 1-n]`.
    pub tilde: [f64; 2],
}

/// Samples `traction(x, normal)` on `node_count` points of `|x| = r0` and
/// projects onto every block `n <= n_max`. Coefficients use the convention
/// `f = sum c_k phi_k`, i.e. `c = <phi, f> / (2 pi r0)`.
pub fn quadrature_conormal_table(
    traction_at: impl Fn(Vec2, Vec2) -> Result<Vec2>,
    r0: f64,
    n_max: usize,
    node_count: usize,
) -> Result<Vec<ConormalProjection>> {
    let m = node_count.max((4 * (n_max + 2)).next_power_of_two());
    let rule = QuadratureRule::new(m, r0)?;
    let mut samples = Vec::with_capacity(m);
    for k in 0..m {
        let (s, c) = rule.angle(k).sin_cos();
        samples.push(traction_at([r0 * c, r0 * s], [c, s])?);
    }
    let coef = |order: i32, kind: BasisKind| -> f64 {
        let mut acc = 0.0;
        for (k, f) in samples.iter().enumerate() {
            let phi = basis_value(order, kind, rule.angle(k));
            acc += phi[0] * f[0] + phi[1] * f[1];
        }
        acc / m as f64
    };
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let hi = n as i32 + 1;
        let lo = 1 - n as i32;
        out.push(ConormalProjection {
            n,
            plain: [coef(hi, BasisKind::Plain), coef(lo, BasisKind::Plain)],
            tilde: [coef(hi, BasisKind::Tilde), coef(lo, BasisKind::Tilde)],
        });
    }
    Ok(out)
}

/// Single-block version of [`quadrature_conormal_table`].
pub fn quadrature_conormal_projection(
    traction_at: impl Fn(Vec2, Vec2) -> Result<Vec2>,
    r0: f64,
    n: usize,
    node_count: usize,
) -> Result<ConormalProjection> {
    let t = quadrature_conormal_table(traction_at, r0, n, node_count)?;
    Ok(t[n])
}

/// `<f, psi>` for the rigid motions `[1,0]`, `[0,1]`, `[y,-x]` on `|x| = r0`.
pub fn rigid_motion_moments(
    traction_at: impl Fn(Vec2, Vec2) -> Result<Vec2>,
    r0: f64,
    node_count: usize,
) -> Result<[f64; 3]> {
    let rule = QuadratureRule::new(node_count, r0)?;
    let w = rule.weight();
    let mut out = [0.0; 3];
    for k in 0..node_count {
        let (s, c) = rule.angle(k).sin_cos();
        let x = [r0 * c, r0 * s];
        let f = traction_at(x, [c, s])?;
        out[0] += w * f[0];
        out[1] += w * f[1];
        out[2] += w * (x[1] * f[0] - x[0] * f[1]);
    }
    Ok(out)
}

/// One-sided conormal derivative of `field` on `|x| = r0` at angle `omega`,
/// from central-difference gradients at `r0 (1 +- h)` extrapolated to `h = 0`.
pub fn fd_one_sided_conormal(
    field: impl Fn(Vec2) -> Result<Vec2>,
    r0: f64,
    omega: f64,
    side: Side,
    mat: &Material,
) -> Result<Vec2> {
    let sign = match side {
        Side::Exterior => 1.0,
        Side::Interior => -1.0,
    };
    let (s, c) = omega.sin_cos();
    let normal = [c, s];
    let mut vals = [[0.0; 2]; 3];
    for (slot, &h) in JUMP_OFFSETS.iter().enumerate() {
        let r = r0 * (1.0 + sign * h);
        let x = [r * c, r * s];
        let eps = 1e-2 * h * r0;
        let mut g = [[0.0; 2]; 2];
        for l in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[l] += eps;
            xm[l] -= eps;
            let fp = field(xp)?;
            let fm = field(xm)?;
            for i in 0..2 {
                g[i][l] = (fp[i] - fm[i]) / (2.0 * eps);
            }
        }
        vals[slot] = traction(&g, normal, mat);
    }
    let mut out = [0.0; 2];
    for i in 0..2 {
        let r1 = 2.0 * vals[1][i] - vals[0][i];
        let r2 = 2.0 * vals[2][i] - vals[1][i];
        out[i] = (4.0 * r2 - r1) / 3.0;
    }
    Ok(out)
}

/// Jump `d_nu S|_+ - d_nu S|_-` of a closed-form single layer, by finite differences.
pub fn fd_conormal_jump(r0: f64, b: BasisIndex, omega: f64, mat: &Material) -> Result<Vec2> {
    let field =
        |x: Vec2| crate::potentials::single_layer_basis(r0, b, PolarPoint::from_cartesian(x), mat);
    let out = fd_one_sided_conormal(field, r0, omega, Side::Exterior, mat)?;
    let inn = fd_one_sided_conormal(field, r0, omega, Side::Interior, mat)?;
    Ok([out[0] - inn[0], out[1] - inn[1]])
}

/// Eigenvalues from the characteristic polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticEigen {
    /// Sorted by real part, then imaginary part.
    pub eigenvalues: Vec<Complex64>,
    /// Monic characteristic polynomial coefficients, constant term first.
    pub char_poly: Vec<f64>,
    /// Smallest pairwise root distance relative to the spectral scale.
    pub min_separation: f64,
    /// Set when two roots are closer than `1e-6` relative; such roots carry
    /// only about half the working precision.
    pub ill_conditioned: bool,
}

/// Faddeev-LeVerrier characteristic polynomial, companion-matrix roots and
/// Newton polishing. Independent of the symmetric eigensolver.
pub fn quartic_eigen_oracle(m: &DMatrix<f64>) -> Result<QuarticEigen> {
    let n = m.nrows();
    if n == 0 || n != m.ncols() || n > 4 {
        return Err(CalrError::invalid(format!(
            "expected a square matrix of size 1..=4, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(CalrError::invalid("matrix entries must be finite"));
    }
    // coeffs[k] multiplies x^k; coeffs[n] = 1.
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut mk = DMatrix::<f64>::zeros(n, n);
    let id = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        mk = m * &mk + &id * coeffs[n - k + 1];
        coeffs[n - k] = -(m * &mk).trace() / k as f64;
    }
    let mut comp = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -coeffs[i];
    }
    // Defective companion matrices (exact multiple roots) can stall the
    // Schur iteration; simultaneous iteration on the polynomial takes over.
    let mut roots: Vec<Complex64> = match nalgebra::Schur::try_new(comp, f64::EPSILON, 2_000) {
        Some(schur) => schur.complex_eigenvalues().iter().copied().collect(),
        None => aberth_roots(&coeffs)?,
    };
    let eval = |x: Complex64| -> (Complex64, Complex64) {
        let mut p = Complex64::new(coeffs[n], 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for k in (0..n).rev() {
            dp = dp * x + p;
            p = p * x + coeffs[k];
        }
        (p, dp)
    };
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let merged = merge_multiple_roots(&mut roots, &coeffs);
    for (r, _) in roots.iter_mut().zip(&merged).filter(|(_, m)| !**m) {
        for _ in 0..8 {
            let (p, dp) = eval(*r);
            if dp.norm() == 0.0 {
                break;
            }
            let next = *r - p / dp;
            if eval(next).0.norm() < p.norm() {
                *r = next;
            } else {
                break;
            }
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let scale = roots.iter().map(|r| r.norm()).fold(1e-300, f64::max);
    let mut min_sep = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            min_sep = min_sep.min((roots[i] - roots[j]).norm() / scale);
        }
    }
    Ok(QuarticEigen {
        eigenvalues: roots,
        char_poly: coeffs,
        min_separation: min_sep,
        ill_conditioned: min_sep < 1e-6,
    })
}

/// Aberth-Ehrlich simultaneous iteration for a monic polynomial.
fn aberth_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let n = coeffs.len() - 1;
    let bound = 1.0 + coeffs[..n].iter().map(|c| c.abs()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(0.5 * bound, 0.4 + 2.0 * PI * k as f64 / n as f64))
        .collect();
    let eval = |x: Complex64| {
        let mut p = Complex64::new(1.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for c in coeffs[..n].iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    };
    for _ in 0..500 {
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let (p, dp) = eval(z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| Complex64::new(1.0, 0.0) / (z[i] - z[j]))
                .sum();
            let w = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if w.is_finite() {
                z[i] -= w;
                moved = moved.max(w.norm());
            }
        }
        if moved <= 4.0 * f64::EPSILON * bound {
            return Ok(z);
        }
    }
    Ok(z)
}

/// Replaces a cluster of computed roots by a refined common value when that
/// value is a genuine multiple root, i.e. every lower derivative vanishes
/// there to rounding accuracy. Computed roots of a `k`-fold root scatter
/// like `eps^(1/k)`; the root of the `(k-1)`-th derivative does not.
/// Returns which roots were replaced.
fn merge_multiple_roots(roots: &mut [Complex64], coeffs: &[f64]) -> Vec<bool> {
    let n = roots.len();
    let scale = roots.iter().map(|r| r.norm()).fold(1.0, f64::max);
    let mut derivs: Vec<Vec<f64>> = vec![coeffs.to_vec()];
    for _ in 0..n {
        let last = derivs.last().expect("non-empty");
        let next: Vec<f64> = last
            .iter()
            .enumerate()
            .skip(1)
            .map(|(d, c)| c * d as f64)
            .collect();
        derivs.push(next);
    }
    let horner = |p: &[f64], x: Complex64| -> (Complex64, f64) {
        let mut v = Complex64::new(0.0, 0.0);
        let mut bound = 0.0;
        for c in p.iter().rev() {
            v = v * x + c;
            bound = bound * x.norm() + c.abs();
        }
        (v, bound)
    };
    let mut merged = vec![false; n];
    for i in 0..n {
        if merged[i] {
            continue;
        }
        let cluster: Vec<usize> = (i..n)
            .filter(|&j| !merged[j] && (roots[j] - roots[i]).norm() < 1e-3 * scale)
            .collect();
        let k = cluster.len();
        if k < 2 {
            continue;
        }
        let mut x = cluster.iter().map(|&j| roots[j]).sum::<Complex64>() / k as f64;
        for _ in 0..20 {
            let (p, _) = horner(&derivs[k - 1], x);
            let (dp, _) = horner(&derivs[k], x);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            x -= step;
            if step.norm() <= f64::EPSILON * x.norm().max(1e-300) {
                break;
            }
        }
        let vanishes = (0..k - 1).all(|d| {
            let (v, bound) = horner(&derivs[d], x);
            v.norm() <= 64.0 * f64::EPSILON * bound
        });
        if vanishes {
            for &j in &cluster {
                roots[j] = x;
                merged[j] = true;
            }
        }
    }
    merged
}
