//! Cross-checks of the closed forms against the quadrature oracles, gathered
//! into a report.

use std::fmt::Write as _;

use crate::blocks::{assemble_block, exact_eigen_from, BlockKey, Parity};
use crate::error::Result;
use crate::material::{CoatedDiskConfig, Material};
use crate::oracle::{
    fd_conormal_jump, oracle_block, oracle_disk_eigenaction, quadrature_conormal_projection,
    quadrature_single_layer, quartic_eigen_oracle, star_inner_product, QuadratureRule,
    DEFAULT_NODES,
};
use crate::potentials::{
    dipole_conormal, np_disk_eigenaction, single_layer_basis, BasisIndex, DipoleSource, PolarPoint,
};
use crate::source::{
    inner_coefficients_closed_form, outer_coefficients, InnerMethod, SourceCoefficients,
};

/// Shortest round-trip decimal form of `v`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// One reference/oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationCheck {
    pub name: String,
    pub reference: f64,
    pub oracle: f64,
    pub tolerance: f64,
}

impl ValidationCheck {
    pub fn new(name: impl Into<String>, reference: f64, oracle: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            reference,
            oracle,
            tolerance,
        }
    }

    pub fn abs_error(&self) -> f64 {
        (self.reference - self.oracle).abs()
    }

    pub fn rel_error(&self) -> f64 {
        let s = self.reference.abs();
        if s > 0.0 {
            self.abs_error() / s
        } else {
            self.abs_error()
        }
    }

    pub fn passed(&self) -> bool {
        self.abs_error() <= self.tolerance
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn push(&mut self, c: ValidationCheck) {
        self.checks.push(c);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(ValidationCheck::passed)
    }

    pub fn failures(&self) -> Vec<&ValidationCheck> {
        self.checks.iter().filter(|c| !c.passed()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,reference,oracle,abs_error,rel_error,tolerance,passed\n");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "\"{}\",{},{},{},{},{},{}",
                c.name.replace('"', "\"\""),
                format_f64(c.reference),
                format_f64(c.oracle),
                format_f64(c.abs_error()),
                format_f64(c.rel_error()),
                format_f64(c.tolerance),
                c.passed()
            );
        }
        out
    }
}

/// Inputs of [`run_validation`].
#[derive(Debug, Clone)]
pub struct ValidationConfig {
    pub material: Material,
    pub geometry: CoatedDiskConfig,
    pub source: Option<DipoleSource>,
    /// Highest block order compared against the quadrature oracle.
    pub n_max: usize,
}

fn worst_entry(
    name: String,
    reference: &nalgebra::DMatrix<f64>,
    oracle: &nalgebra::DMatrix<f64>,
    tol: f64,
) -> ValidationCheck {
    let mut best = (0, 0, -1.0);
    for i in 0..reference.nrows() {
        for j in 0..reference.ncols() {
            let d = (reference[(i, j)] - oracle[(i, j)]).abs();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    ValidationCheck::new(
        format!("{name}[{}][{}]", best.0, best.1),
        reference[(best.0, best.1)],
        oracle[(best.0, best.1)],
        tol,
    )
}

/// Runs every oracle comparison.
pub fn run_validation(cfg: &ValidationConfig) -> Result<ValidationReport> {
    let g = &cfg.geometry;
    let m = &cfg.material;
    let mut rep = ValidationReport::default();

    for n in 2..=cfg.n_max.max(2) {
        for parity in [Parity::V, Parity::Vtilde] {
            let key = BlockKey::new(n, parity)?;
            let (gc, kc) = assemble_block(key, g, m)?;
            let ob = oracle_block(key, g, m)?;
            rep.push(worst_entry(
                format!("gram {key}"),
                &gc.entries,
                &ob.gram.entries,
                1e-10,
            ));
            rep.push(worst_entry(
                format!("np {key}"),
                &kc.entries,
                &ob.np.entries,
                1e-10,
            ));
            rep.push(ValidationCheck::new(
                format!("oracle symmetry {key}"),
                0.0,
                ob.symmetry_residual,
                1e-9,
            ));
            if n <= 6 {
                let spec = exact_eigen_from(&gc, &kc, g, m)?;
                let q = quartic_eigen_oracle(&kc.entries)?;
                let mut a = spec.eigenvalues.clone();
                a.sort_by(f64::total_cmp);
                for (j, (x, y)) in a.iter().zip(&q.eigenvalues).enumerate() {
                    rep.push(ValidationCheck::new(
                        format!("quartic eigenvalue {key} #{j}"),
                        *x,
                        y.re,
                        1e-10,
                    ));
                }
            }
        }
    }
    for key in [
        BlockKey::new(0, Parity::V)?,
        BlockKey::new(1, Parity::V)?,
        BlockKey::new(1, Parity::Vtilde)?,
    ] {
        let ob = oracle_block(key, g, m)?;
        rep.push(ValidationCheck::new(
            format!("oracle symmetry {key}"),
            0.0,
            ob.symmetry_residual,
            1e-9,
        ));
    }

    let x_in = PolarPoint::from_cartesian([0.5 * g.r_i, 0.0]);
    let x_out = PolarPoint::from_cartesian([3.0 * g.r_i, 0.0]);
    for (label, b, x) in [
        ("phi_1 interior", BasisIndex::plain(1), x_in),
        ("phi~_3 exterior", BasisIndex::tilde(3), x_out),
        ("phi_-2 exterior", BasisIndex::plain(-2), x_out),
    ] {
        let closed = single_layer_basis(g.r_i, b, x, m)?;
        let rule = QuadratureRule::new(DEFAULT_NODES, g.r_i)?;
        let q = quadrature_single_layer(&rule, |w| b.eval(w), x.to_cartesian(), m)?;
        for i in 0..2 {
            rep.push(ValidationCheck::new(
                format!("single layer {label} u{}", i + 1),
                closed[i],
                q[i],
                1e-10,
            ));
        }
    }

    for mm in -20i32..=20 {
        if mm == 0 {
            continue;
        }
        for b in [BasisIndex::plain(mm), BasisIndex::tilde(mm)] {
            let v = np_disk_eigenaction(b, m)?;
            let (q, _) = oracle_disk_eigenaction(b, g.r_i, m)?;
            rep.push(ValidationCheck::new(
                format!("disk eigenvalue {b}"),
                v,
                q,
                1e-10,
            ));
        }
    }

    for b in [
        BasisIndex::plain(3),
        BasisIndex::tilde(-2),
        BasisIndex::plain(1),
    ] {
        let omega = 0.7;
        let jump = fd_conormal_jump(g.r_i, b, omega, m)?;
        let want = b.eval(omega);
        for i in 0..2 {
            rep.push(ValidationCheck::new(
                format!("jump {b} t{}", i + 1),
                want[i],
                jump[i],
                1e-6,
            ));
        }
    }

    let k2 = BlockKey::new(2, Parity::V)?;
    let k3 = BlockKey::new(3, Parity::V)?;
    for &sa in crate::blocks::block_slots(k2)? {
        for &sb in crate::blocks::block_slots(k3)? {
            let a = crate::blocks::slot_element(k2, sa);
            let b = crate::blocks::slot_element(k3, sb);
            rep.push(ValidationCheck::new(
                format!("orthogonality (2, V)#{sa} (3, V)#{sb}"),
                0.0,
                star_inner_product(a, b, g, m)?,
                1e-10,
            ));
        }
    }

    if let Some(s) = &cfg.source {
        let top = cfg.n_max.max(2);
        let quad = SourceCoefficients::compute(s, g, m, top, InnerMethod::Quadrature)?;
        for n in 0..=top {
            let c = outer_coefficients(n, s, g, m)?;
            let p = quadrature_conormal_projection(
                |x, nx| dipole_conormal(s, x, nx, m),
                g.r_e,
                n,
                DEFAULT_NODES,
            )?;
            rep.push(ValidationCheck::new(
                format!("g3 n={n}"),
                c.g3,
                -p.plain[0],
                1e-9,
            ));
            rep.push(ValidationCheck::new(
                format!("g~3 n={n}"),
                c.gt3,
                -p.tilde[0],
                1e-9,
            ));
            if n >= 2 {
                rep.push(ValidationCheck::new(
                    format!("g4 n={n}"),
                    c.g4,
                    -p.plain[1],
                    1e-9,
                ));
                rep.push(ValidationCheck::new(
                    format!("g~4 n={n}"),
                    c.gt4,
                    -p.tilde[1],
                    1e-9,
                ));
            }
            let ci = inner_coefficients_closed_form(n, s, g, m)?;
            rep.push(ValidationCheck::new(
                format!("g1 n={n}"),
                ci.g1,
                quad.plain[n][0],
                1e-9,
            ));
            rep.push(ValidationCheck::new(
                format!("g~1 n={n}"),
                ci.gt1,
                quad.tilde[n][0],
                1e-9,
            ));
            if n >= 2 {
                rep.push(ValidationCheck::new(
                    format!("g2 n={n}"),
                    ci.g2,
                    quad.plain[n][1],
                    1e-9,
                ));
                rep.push(ValidationCheck::new(
                    format!("g~2 n={n}"),
                    ci.gt2,
                    quad.tilde[n][1],
                    1e-9,
                ));
            }
        }
    }
    Ok(rep)
}
