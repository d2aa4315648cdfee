//! Block-by-block solution of `(z_delta I + K*) Phi = G`, the `*`-norm
//! energy proxy, field evaluation, loss sweeps and source classification.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::blocks::{
    assemble_block, exact_eigen_from, slot_element, BlockKey, BlockMatrix, Parity,
};
use crate::error::{CalrError, Result};
use crate::material::{critical_radii, z_delta, CoatedDiskConfig, Material, ResonanceSign};
use crate::potentials::{
    dipole_newtonian_field, single_layer_basis, DipoleSource, PolarPoint, Vec2,
};
use crate::source::{InnerMethod, SourceCoefficients};

/// Hard cap on the block order.
pub const DEFAULT_CAP: usize = 400;
/// Condition number beyond which a block solve is reported as singular.
pub const CONDITION_LIMIT: f64 = 1e14;
/// Number of consecutive negligible orders that ends the series.
pub const STALL_COUNT: usize = 5;
/// Relative size of a negligible order.
pub const STALL_TOLERANCE: f64 = 1e-14;
/// Smallest order the adaptive rule may stop at.
pub const MIN_ORDER: usize = 16;

/// A coated disk, its material and a dipole, with the low-order blocks and
/// the forcing coefficients precomputed up to the cap.
#[derive(Debug, Clone)]
pub struct Problem {
    pub material: Material,
    pub geometry: CoatedDiskConfig,
    pub source: DipoleSource,
    pub cap: usize,
    coeffs: SourceCoefficients,
    low: Vec<(BlockKey, BlockMatrix, BlockMatrix)>,
}

impl Problem {
    pub fn new(
        material: Material,
        geometry: CoatedDiskConfig,
        source: DipoleSource,
    ) -> Result<Self> {
        Self::with_options(
            material,
            geometry,
            source,
            DEFAULT_CAP,
            InnerMethod::Quadrature,
        )
    }

    pub fn with_options(
        material: Material,
        geometry: CoatedDiskConfig,
        source: DipoleSource,
        cap: usize,
        inner: InnerMethod,
    ) -> Result<Self> {
        if cap < 2 {
            return Err(CalrError::invalid("truncation cap must be at least 2"));
        }
        source.check_outside(geometry.r_e)?;
        let coeffs = SourceCoefficients::compute(&source, &geometry, &material, cap, inner)?;
        let mut low = Vec::new();
        for key in [
            BlockKey {
                n: 0,
                parity: Parity::V,
            },
            BlockKey {
                n: 1,
                parity: Parity::V,
            },
            BlockKey {
                n: 1,
                parity: Parity::Vtilde,
            },
        ] {
            let (g, k) = assemble_block(key, &geometry, &material)?;
            low.push((key, g, k));
        }
        Ok(Self {
            material,
            geometry,
            source,
            cap,
            coeffs,
            low,
        })
    }

    pub fn coefficients(&self) -> &SourceCoefficients {
        &self.coeffs
    }

    /// Gram and NP blocks of `key` (cached for `n <= 1`).
    pub fn blocks(&self, key: BlockKey) -> Result<(BlockMatrix, BlockMatrix)> {
        if let Some((_, g, k)) = self.low.iter().find(|(k, _, _)| *k == key) {
            return Ok((g.clone(), k.clone()));
        }
        assemble_block(key, &self.geometry, &self.material)
    }

    /// Forcing restricted to the active slots of `key`.
    pub fn forcing(&self, key: BlockKey, slots: &[usize]) -> Result<DVector<f64>> {
        let full = self.coeffs.block_vector(key)?;
        Ok(DVector::from_iterator(
            slots.len(),
            slots.iter().map(|&s| full[s]),
        ))
    }

    pub fn resonance(&self) -> Option<ResonanceSign> {
        self.geometry.resonance(self.material.consts.k0)
    }
}

/// Solution of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSolution {
    pub key: BlockKey,
    pub slots: Vec<usize>,
    pub phi: DVector<Complex64>,
    /// `|A phi - g| / |g|` (zero for a vanishing forcing).
    pub residual: f64,
    /// `|A phi - g| / (|A| |phi| + |g|)`.
    pub backward_error: f64,
    pub condition: f64,
    /// `conj(phi)^T G phi`.
    pub norm_sq: f64,
}

/// Minimal double-double accumulation for residuals.
#[derive(Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    err: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let s = self.sum + v;
        let bp = s - self.sum;
        self.err += (self.sum - (s - bp)) + (v - bp);
        self.sum = s;
    }

    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.add(p);
        self.err += a.mul_add(b, -p);
    }

    fn value(&self) -> f64 {
        self.sum + self.err
    }
}

fn residual_vector(
    k: &DMatrix<f64>,
    z: Complex64,
    phi: &DVector<Complex64>,
    g: &DVector<f64>,
) -> DVector<Complex64> {
    let d = g.len();
    DVector::from_fn(d, |i, _| {
        let mut re = Compensated::default();
        let mut im = Compensated::default();
        re.add(g[i]);
        re.add_product(-z.re, phi[i].re);
        re.add_product(z.im, phi[i].im);
        im.add_product(-z.re, phi[i].im);
        im.add_product(-z.im, phi[i].re);
        for j in 0..d {
            re.add_product(-k[(i, j)], phi[j].re);
            im.add_product(-k[(i, j)], phi[j].im);
        }
        Complex64::new(re.value(), im.value())
    })
}

/// Solves `(z_delta I + K_n) phi = g_n` with LU, refinement against a
/// compensated residual, and an SVD condition check.
pub fn solve_block(
    key: BlockKey,
    z_delta: Complex64,
    g_n: &DVector<f64>,
    np: &BlockMatrix,
) -> Result<BlockSolution> {
    let d = np.dim();
    if g_n.len() != d {
        return Err(CalrError::invalid(format!(
            "forcing of length {} for a {d}-dimensional block {key}",
            g_n.len()
        )));
    }
    let a: DMatrix<Complex64> =
        np.entries.map(|v| Complex64::new(v, 0.0)) + DMatrix::<Complex64>::identity(d, d) * z_delta;
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition <= CONDITION_LIMIT) {
        return Err(CalrError::NearSingular {
            condition,
            context: format!("block {key} at z_delta = {z_delta}"),
        });
    }
    let gnorm = g_n.norm();
    let lu = a.clone().lu();
    let gc = g_n.map(|v| Complex64::new(v, 0.0));
    let mut phi = lu.solve(&gc).ok_or_else(|| CalrError::NearSingular {
        condition,
        context: format!("LU breakdown in block {key}"),
    })?;
    let mut r = residual_vector(&np.entries, z_delta, &phi, g_n);
    for _ in 0..3 {
        if r.norm() == 0.0 {
            break;
        }
        let Some(corr) = lu.solve(&r) else { break };
        let trial = &phi + corr;
        let rt = residual_vector(&np.entries, z_delta, &trial, g_n);
        if rt.norm() < r.norm() {
            phi = trial;
            r = rt;
        } else {
            break;
        }
    }
    let rnorm = r.norm();
    let anorm = smax;
    let residual = if gnorm > 0.0 { rnorm / gnorm } else { rnorm };
    let backward_error = if rnorm == 0.0 {
        0.0
    } else {
        rnorm / (anorm * phi.norm() + gnorm)
    };
    Ok(BlockSolution {
        key,
        slots: np.slots.clone(),
        phi,
        residual,
        backward_error,
        condition,
        norm_sq: f64::NAN,
    })
}

fn sesquilinear(gram: &DMatrix<f64>, phi: &DVector<Complex64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..phi.len() {
        for j in 0..phi.len() {
            acc += gram[(i, j)] * (phi[i].conj() * phi[j]).re;
        }
    }
    acc
}

/// Solution of the whole series at one loss value.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    pub delta: f64,
    pub z_delta: Complex64,
    pub n_max: usize,
    pub blocks: Vec<BlockSolution>,
    /// `sum_n conj(Phi_n)^T G_n Phi_n`.
    pub norm_sq: f64,
    /// Geometric extrapolation of the omitted orders.
    pub tail_estimate: f64,
    /// Set when the adaptive rule hit the cap before converging.
    pub truncated_at_cap: bool,
}

impl SolutionState {
    pub fn max_residual(&self) -> f64 {
        self.blocks.iter().map(|b| b.residual).fold(0.0, f64::max)
    }

    pub fn block(&self, key: BlockKey) -> Option<&BlockSolution> {
        self.blocks.iter().find(|b| b.key == key)
    }
}

/// `ceil(4 |ln delta| / |ln rho|)`, the order covering the resonant window.
pub fn truncation_floor(delta: f64, rho: f64) -> usize {
    if delta <= 0.0 || delta >= 1.0 {
        return MIN_ORDER;
    }
    let v = 4.0 * delta.ln().abs() / rho.ln().abs();
    (v.ceil() as usize).max(MIN_ORDER)
}

fn check_delta(problem: &Problem, delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(CalrError::invalid(format!(
            "delta must be >= 0, got {delta}"
        )));
    }
    if delta == 0.0 && problem.resonance().is_some() {
        return Err(CalrError::invalid(
            "delta = 0 at a resonant contrast: the operator is not invertible",
        ));
    }
    Ok(())
}

fn solve_order(problem: &Problem, n: usize, zd: Complex64) -> Result<Vec<BlockSolution>> {
    let parities: &[Parity] = if n == 0 {
        &[Parity::V]
    } else {
        &[Parity::V, Parity::Vtilde]
    };
    let mut out = Vec::with_capacity(2);
    for &parity in parities {
        let key = BlockKey { n, parity };
        let (gram, np) = problem.blocks(key)?;
        let g = problem.forcing(key, &np.slots)?;
        let mut sol = solve_block(key, zd, &g, &np)?;
        sol.norm_sq = sesquilinear(&gram.entries, &sol.phi);
        out.push(sol);
    }
    Ok(out)
}

/// Solves all orders. With `n_max = Some(N)` exactly `0..=N` are used;
/// otherwise the adaptive rule stops once `STALL_COUNT` consecutive orders
/// beyond [`truncation_floor`] each add less than `STALL_TOLERANCE` of the total.
pub fn solve(problem: &Problem, delta: f64, n_max: Option<usize>) -> Result<SolutionState> {
    check_delta(problem, delta)?;
    let zd = z_delta(problem.geometry.contrast_c, delta)?;
    if let Some(n) = n_max {
        if n > problem.cap {
            return Err(CalrError::invalid(format!(
                "requested order {n} exceeds the cap {}",
                problem.cap
            )));
        }
    }
    let floor = truncation_floor(delta, problem.geometry.rho()).min(problem.cap);
    let mut blocks = Vec::new();
    let mut contributions = Vec::new();
    let mut total = 0.0;
    let mut stall = 0;
    let mut n = 0;
    let mut at_cap = false;
    loop {
        let sols = solve_order(problem, n, zd)?;
        let c: f64 = sols.iter().map(|s| s.norm_sq).sum();
        total += c;
        contributions.push(c);
        blocks.extend(sols);
        match n_max {
            Some(limit) if n >= limit => break,
            Some(_) => {}
            None => {
                if c <= STALL_TOLERANCE * total {
                    stall += 1;
                } else {
                    stall = 0;
                }
                if n >= floor && stall >= STALL_COUNT {
                    break;
                }
                if n >= problem.cap {
                    at_cap = true;
                    break;
                }
            }
        }
        n += 1;
    }
    let tail_estimate = match contributions.as_slice() {
        [.., a, b] if *a > 0.0 && b < a => b * (b / a) / (1.0 - b / a),
        [.., b] if *b == 0.0 => 0.0,
        _ => f64::INFINITY,
    };
    Ok(SolutionState {
        delta,
        z_delta: zd,
        n_max: n,
        blocks,
        norm_sq: total,
        tail_estimate,
        truncated_at_cap: at_cap,
    })
}

/// Gram-route `*`-norm: `sum_n conj(Phi_n)^T G_n Phi_n`.
pub fn solution_norm(state: &SolutionState, problem: &Problem) -> Result<f64> {
    let mut acc = 0.0;
    for b in &state.blocks {
        let (gram, _) = problem.blocks(b.key)?;
        acc += sesquilinear(&gram.entries, &b.phi);
    }
    Ok(acc)
}

/// Eigen-route `*`-norm:
/// `sum_{n,j} |(G_n, E_j)_*|^2 / ((E_j, E_j)_* |z_delta + lambda_j|^2)`.
pub fn solution_norm_eigen(state: &SolutionState, problem: &Problem) -> Result<f64> {
    let mut acc = 0.0;
    for b in &state.blocks {
        let (gram, np) = problem.blocks(b.key)?;
        let spec = exact_eigen_from(&gram, &np, &problem.geometry, &problem.material)?;
        let g = problem.forcing(b.key, &np.slots)?;
        let gs = (&gram.entries + gram.entries.transpose()) * 0.5;
        let gg = &gs * &g;
        for (j, e) in spec.eigenvectors.iter().enumerate() {
            let proj = gg.dot(e);
            let den = (state.z_delta + spec.eigenvalues[j]).norm_sqr();
            acc += proj * proj / (spec.star_norms[j] * den);
        }
    }
    Ok(acc)
}

/// `(E, delta E)` with `E = |Phi|_*^2`.
pub fn energy_proxy(state: &SolutionState) -> (f64, f64) {
    (state.norm_sq, state.delta * state.norm_sq)
}

/// Field value with the size of the last order's contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub u: [Complex64; 2],
    pub tail_estimate: f64,
}

impl FieldSample {
    pub fn magnitude(&self) -> f64 {
        (self.u[0].norm_sqr() + self.u[1].norm_sqr()).sqrt()
    }
}

/// `u = F + S_i[phi_i] + S_e[phi_e]` at `x`.
pub fn evaluate_field(state: &SolutionState, problem: &Problem, x: Vec2) -> Result<FieldSample> {
    let g = &problem.geometry;
    let p = PolarPoint::from_cartesian(x);
    let tol = 1e-12 * g.r_e;
    if (p.r - g.r_i).abs() <= tol || (p.r - g.r_e).abs() <= tol {
        return Err(CalrError::invalid(format!(
            "point {x:?} lies on an interface"
        )));
    }
    let s = &problem.source;
    if (x[0] - s.z[0]).hypot(x[1] - s.z[1]) <= tol {
        return Err(CalrError::invalid("point coincides with the source"));
    }
    let f = dipole_newtonian_field(s, x, &problem.material)?;
    let mut u = [Complex64::new(f[0], 0.0), Complex64::new(f[1], 0.0)];
    let mut last = 0.0f64;
    for b in &state.blocks {
        let mut part = [Complex64::new(0.0, 0.0); 2];
        for (c, &slot) in b.slots.iter().enumerate() {
            if b.phi[c] == Complex64::new(0.0, 0.0) {
                continue;
            }
            let e = slot_element(b.key, slot);
            let v = single_layer_basis(e.circle.radius(g), e.index, p, &problem.material)?;
            part[0] += b.phi[c] * v[0];
            part[1] += b.phi[c] * v[1];
        }
        u[0] += part[0];
        u[1] += part[1];
        if b.key.n == state.n_max {
            last += (part[0].norm_sqr() + part[1].norm_sqr()).sqrt();
        }
    }
    Ok(FieldSample {
        u,
        tail_estimate: last,
    })
}

/// Energy proxy over a loss grid with a fitted blow-up exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub delta_grid: Vec<f64>,
    pub energy_values: Vec<f64>,
    pub dissipated: Vec<f64>,
    pub n_max_used: Vec<usize>,
    /// `d ln E / d ln delta` between consecutive grid points (first entry NaN).
    pub local_slopes: Vec<f64>,
    /// `p` in `ln E = p ln delta + q ln|ln delta| + c`.
    pub fitted_exponent: f64,
    pub fitted_log_power: f64,
    pub fitted_constant: f64,
    /// `ln rho_z / ln rho - 2` (+k0) or `2 ln rho_z / ln rho - 2` (-k0); NaN off resonance.
    pub predicted_exponent: f64,
    pub resonance: Option<ResonanceSign>,
    pub warnings: Vec<String>,
}

/// Predicted exponent of `E` in `delta` for the given resonance.
pub fn predicted_exponent(sign: ResonanceSign, g: &CoatedDiskConfig, s: &DipoleSource) -> f64 {
    let rz = g.r_e / s.distance();
    let ratio = rz.ln() / g.rho().ln();
    match sign {
        ResonanceSign::Plus => ratio - 2.0,
        ResonanceSign::Minus => 2.0 * ratio - 2.0,
    }
}

/// Least-squares fit of `ln E = p ln delta + q ln|ln delta| + c`.
pub fn fit_exponent(deltas: &[f64], energies: &[f64]) -> Result<(f64, f64, f64)> {
    let m = deltas.len();
    if m < 3 || energies.len() != m {
        return Err(CalrError::invalid(
            "the exponent fit needs at least three points",
        ));
    }
    if energies.iter().any(|e| !(*e > 0.0)) {
        return Err(CalrError::invalid(
            "energies must be positive for a log fit",
        ));
    }
    let x = DMatrix::from_fn(m, 3, |i, j| match j {
        0 => deltas[i].ln(),
        1 => deltas[i].ln().abs().ln(),
        _ => 1.0,
    });
    let y = DVector::from_iterator(m, energies.iter().map(|e| e.ln()));
    let sol = x
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| CalrError::NoConvergence(format!("exponent fit: {e}")))?;
    Ok((sol[0], sol[1], sol[2]))
}

/// Solves at every grid point (in parallel) and fits the exponent.
pub fn delta_sweep(problem: &Problem, delta_grid: &[f64]) -> Result<SweepResult> {
    if delta_grid.len() < 3 {
        return Err(CalrError::invalid(
            "a sweep needs at least three loss values",
        ));
    }
    if delta_grid.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(CalrError::invalid("sweep loss values must be positive"));
    }
    if delta_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CalrError::invalid(
            "sweep loss values must be strictly decreasing",
        ));
    }
    let mut warnings = Vec::new();
    let resonance = problem.resonance();
    if resonance.is_none() {
        warnings.push(format!(
            "contrast c = {} is off resonance; the fitted exponent has no predicted value",
            problem.geometry.contrast_c
        ));
    }
    if delta_grid.iter().any(|&d| d < 1e-12) {
        warnings.push(
            "grid enters delta < 1e-12 where rho^(2n) cancellation limits accuracy".to_string(),
        );
    }
    let states: Vec<SolutionState> = delta_grid
        .par_iter()
        .map(|&d| solve(problem, d, None))
        .collect::<Result<_>>()?;
    if states.iter().any(|s| s.truncated_at_cap) {
        warnings.push(format!(
            "series reached the order cap {} before converging",
            problem.cap
        ));
    }
    let energy_values: Vec<f64> = states.iter().map(|s| s.norm_sq).collect();
    let dissipated: Vec<f64> = states.iter().map(|s| s.delta * s.norm_sq).collect();
    let mut local_slopes = vec![f64::NAN];
    for i in 1..delta_grid.len() {
        local_slopes.push(
            (energy_values[i].ln() - energy_values[i - 1].ln())
                / (delta_grid[i].ln() - delta_grid[i - 1].ln()),
        );
    }
    let (p, q, c) = fit_exponent(delta_grid, &energy_values)?;
    Ok(SweepResult {
        delta_grid: delta_grid.to_vec(),
        energy_values,
        dissipated,
        n_max_used: states.iter().map(|s| s.n_max).collect(),
        local_slopes,
        fitted_exponent: p,
        fitted_log_power: q,
        fitted_constant: c,
        predicted_exponent: resonance.map_or(f64::NAN, |s| {
            predicted_exponent(s, &problem.geometry, &problem.source)
        }),
        resonance,
        warnings,
    })
}

/// `count` log-spaced values from `start` to `stop` inclusive.
pub fn log_grid(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop > 0.0 && start.is_finite() && stop.is_finite()) || count < 2 {
        return Err(CalrError::invalid(
            "log grid needs positive endpoints and count >= 2",
        ));
    }
    let (a, b) = (start.log10(), stop.log10());
    Ok((0..count)
        .map(|i| {
            if i == count - 1 {
                stop
            } else if i == 0 {
                start
            } else {
                10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64)
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceClass {
    /// `delta E -> infinity`: the source lies within the critical radius.
    ResonantBlowup,
    /// Resonance is active but the source lies beyond the radius past which
    /// the field stays bounded.
    CloakedBoundedRegion,
    NonResonant,
}

impl SourceClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceClass::ResonantBlowup => "resonant_blowup",
            SourceClass::CloakedBoundedRegion => "cloaked_bounded_region",
            SourceClass::NonResonant => "non_resonant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub class: SourceClass,
    pub resonance: Option<ResonanceSign>,
    pub distance: f64,
    pub r_star: f64,
    pub r_star2: f64,
    /// `r_*` for `+k0`, `r_**` for `-k0`.
    pub critical_radius: Option<f64>,
    /// `r_e^3 / r_i^2` for `+k0`, `r_e^2 / r_i` for `-k0`.
    pub boundedness_radius: Option<f64>,
}

/// Places the source relative to the critical radii. The `+k0` radius is
/// inclusive, the `-k0` radius exclusive.
pub fn classify_source(
    g: &CoatedDiskConfig,
    mat: &Material,
    s: &DipoleSource,
) -> Result<Classification> {
    s.check_outside(g.r_e)?;
    let (r_star, r_star2) = critical_radii(g);
    let d = s.distance();
    let resonance = g.resonance(mat.consts.k0);
    let (critical, bounded, inside) = match resonance {
        Some(ResonanceSign::Plus) => {
            let b = g.r_e.powi(3) / (g.r_i * g.r_i);
            (Some(r_star), Some(b), d <= r_star)
        }
        Some(ResonanceSign::Minus) => {
            let b = g.r_e * g.r_e / g.r_i;
            (Some(r_star2), Some(b), d < r_star2)
        }
        None => (None, None, false),
    };
    let class = match (resonance, inside, bounded) {
        (Some(_), true, _) => SourceClass::ResonantBlowup,
        (Some(_), false, Some(b)) if d > b => SourceClass::CloakedBoundedRegion,
        _ => SourceClass::NonResonant,
    };
    Ok(Classification {
        class,
        resonance,
        distance: d,
        r_star,
        r_star2,
        critical_radius: critical,
        boundedness_radius: bounded,
    })
}
