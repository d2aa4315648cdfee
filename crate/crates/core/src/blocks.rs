//! Per-mode Gram and NP blocks on the coated disk, exact eigenpairs and
//! the perturbative eigenvalue formulas.
//!
//! Block `(n, parity)` is spanned by four densities, indexed by slot:
//!
//! | slot | circle | order  |
//! |------|--------|--------|
//! | 0    | inner  | n + 1  |
//! | 1    | inner  | 1 - n  |
//! | 2    | outer  | n + 1  |
//! | 3    | outer  | 1 - n  |
//!
//! with plain basis vectors for parity `V` and tilde ones for `Vtilde`.
//! For `n = 0` slots 0/1 and 2/3 coincide, for `n = 1` slots 1 and 3 are
//! rigid translations; both cases keep only slots 0 and 2.
//!
//! Matrices act on coefficient vectors: column `j` of the NP block holds the
//! coefficients of `K*[Phi_j]`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CalrError, Result};
use crate::material::{CoatedDiskConfig, Material};
use crate::oracle;
use crate::potentials::{BasisIndex, BasisKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    V,
    Vtilde,
}

impl Parity {
    pub fn kind(self) -> BasisKind {
        match self {
            Parity::V => BasisKind::Plain,
            Parity::Vtilde => BasisKind::Tilde,
        }
    }

    /// `+1` for `V`, `-1` for `Vtilde`.
    pub fn sign(self) -> f64 {
        self.kind().sign()
    }

    pub fn label(self) -> &'static str {
        match self {
            Parity::V => "V",
            Parity::Vtilde => "Vt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockKey {
    pub n: usize,
    pub parity: Parity,
}

impl BlockKey {
    pub fn new(n: usize, parity: Parity) -> Result<Self> {
        let key = Self { n, parity };
        key.validate()?;
        Ok(key)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 && self.parity == Parity::Vtilde {
            return Err(CalrError::invalid(
                "block (0, Vtilde) is not part of the expansion",
            ));
        }
        Ok(())
    }

    /// All valid keys with `n <= n_max`, in `(n, V), (n, Vtilde)` order.
    pub fn all_up_to(n_max: usize) -> Vec<BlockKey> {
        let mut keys = vec![BlockKey {
            n: 0,
            parity: Parity::V,
        }];
        for n in 1..=n_max {
            keys.push(BlockKey {
                n,
                parity: Parity::V,
            });
            keys.push(BlockKey {
                n,
                parity: Parity::Vtilde,
            });
        }
        keys
    }
}

impl fmt::Display for BlockKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.n, self.parity.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Circle {
    Inner,
    Outer,
}

impl Circle {
    pub fn radius(self, g: &CoatedDiskConfig) -> f64 {
        match self {
            Circle::Inner => g.r_i,
            Circle::Outer => g.r_e,
        }
    }

    pub(crate) fn idx(self) -> usize {
        match self {
            Circle::Inner => 0,
            Circle::Outer => 1,
        }
    }
}

/// A trigonometric density living on one of the two circles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisElement {
    pub circle: Circle,
    pub index: BasisIndex,
}

/// Active slots of a block (0-based).
pub fn block_slots(key: BlockKey) -> Result<&'static [usize]> {
    key.validate()?;
    Ok(if key.n <= 1 { &[0, 2] } else { &[0, 1, 2, 3] })
}

/// The density sitting in `slot` of block `key`.
pub fn slot_element(key: BlockKey, slot: usize) -> BasisElement {
    let n = key.n as i32;
    let circle = if slot < 2 {
        Circle::Inner
    } else {
        Circle::Outer
    };
    let m = if slot % 2 == 0 { n + 1 } else { 1 - n };
    BasisElement {
        circle,
        index: BasisIndex {
            m,
            kind: key.parity.kind(),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockRole {
    Gram,
    Np,
}

/// A Gram or NP block restricted to the active slots of its key.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    pub key: BlockKey,
    pub role: BlockRole,
    pub slots: Vec<usize>,
    pub entries: DMatrix<f64>,
}

impl BlockMatrix {
    pub fn dim(&self) -> usize {
        self.slots.len()
    }
}

fn check_closed_form(key: BlockKey) -> Result<()> {
    key.validate()?;
    if key.n < 2 {
        return Err(CalrError::Unsupported(format!(
            "closed-form block requires n >= 2, got {key}"
        )));
    }
    Ok(())
}

/// The printed `-S` block (entries in column convention, before L2 weights).
fn minus_s_matrix(key: BlockKey, g: &CoatedDiskConfig, mat: &Material) -> DMatrix<f64> {
    let (ri, re) = (g.r_i, g.r_e);
    let rho = g.rho();
    let a1 = mat.consts.alpha1;
    let a2 = mat.consts.alpha2;
    let s = key.parity.sign();
    let n = key.n as f64;
    let rn = rho.powi(key.n as i32);
    let p = a1 / (2.0 * (n + 1.0));
    let q = a1 / (2.0 * (n - 1.0));
    DMatrix::from_row_slice(
        4,
        4,
        &[
            p * ri,
            0.0,
            p * ri * rn,
            0.0,
            0.0,
            q * ri,
            s * 0.5 * a2 * (re * re / ri - ri) * rn,
            q * re * re / ri * rn,
            p * ri * ri / re * rn,
            s * 0.5 * a2 * (re - ri * ri / re) * rn,
            p * re,
            0.0,
            0.0,
            q * re * rn,
            0.0,
            q * re,
        ],
    )
}

/// Closed-form Gram block `(Phi_i, Phi_j)_*` for `n >= 2`.
pub fn gram_block_closed_form(
    key: BlockKey,
    g: &CoatedDiskConfig,
    mat: &Material,
) -> Result<BlockMatrix> {
    check_closed_form(key)?;
    let mut e = minus_s_matrix(key, g, mat);
    let w = [g.r_i, g.r_i, g.r_e, g.r_e].map(|r| 2.0 * PI * r);
    for i in 0..4 {
        for j in 0..4 {
            e[(i, j)] *= w[i];
        }
    }
    Ok(BlockMatrix {
        key,
        role: BlockRole::Gram,
        slots: vec![0, 1, 2, 3],
        entries: e,
    })
}

/// Closed-form NP block `J + M_n` (or `J + M~_n`) for `n >= 2`.
pub fn np_block_closed_form(
    key: BlockKey,
    g: &CoatedDiskConfig,
    mat: &Material,
) -> Result<BlockMatrix> {
    check_closed_form(key)?;
    let rho = g.rho();
    let k0 = mat.consts.k0;
    let ma1 = mat.mu_alpha1();
    let ma2 = mat.mu_alpha2();
    let s = key.parity.sign();
    let n = key.n as f64;
    let rn = rho.powi(key.n as i32);
    let r2 = rho * rho;
    #[rustfmt::skip]
    let m = [
        0.0, 0.0, ma2, 0.0,
        0.0, 0.0, -s * (n - 1.0) * ma2 * (1.0 - 1.0 / r2), ma1 / r2,
        ma1 * r2, -s * (n + 1.0) * ma2 * (r2 - 1.0), 0.0, 0.0,
        0.0, ma2, 0.0, 0.0,
    ];
    let mut e = DMatrix::from_row_slice(4, 4, &m) * rn;
    for (i, d) in [-k0, k0, k0, -k0].into_iter().enumerate() {
        e[(i, i)] += d;
    }
    Ok(BlockMatrix {
        key,
        role: BlockRole::Np,
        slots: vec![0, 1, 2, 3],
        entries: e,
    })
}

/// Gram and NP blocks for any valid key: closed forms for `n >= 2`,
/// quadrature for `n <= 1`.
pub fn assemble_block(
    key: BlockKey,
    g: &CoatedDiskConfig,
    mat: &Material,
) -> Result<(BlockMatrix, BlockMatrix)> {
    key.validate()?;
    if key.n >= 2 {
        Ok((
            gram_block_closed_form(key, g, mat)?,
            np_block_closed_form(key, g, mat)?,
        ))
    } else {
        let ob = oracle::oracle_block(key, g, mat)?;
        Ok((ob.gram, ob.np))
    }
}

pub fn gram_block(key: BlockKey, g: &CoatedDiskConfig, mat: &Material) -> Result<BlockMatrix> {
    if key.n >= 2 {
        gram_block_closed_form(key, g, mat)
    } else {
        assemble_block(key, g, mat).map(|b| b.0)
    }
}

pub fn np_block(key: BlockKey, g: &CoatedDiskConfig, mat: &Material) -> Result<BlockMatrix> {
    if key.n >= 2 {
        np_block_closed_form(key, g, mat)
    } else {
        assemble_block(key, g, mat).map(|b| b.1)
    }
}

/// `max |G K - K^T G|`.
pub fn gram_symmetry_defect(gram: &DMatrix<f64>, np: &DMatrix<f64>) -> f64 {
    (gram * np - np.transpose() * gram).amax()
}

/// Exact eigenpairs of one NP block, labelled against the unperturbed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBlock {
    pub key: BlockKey,
    /// Asymptotic label `j` (1-based) of each eigenpair.
    pub labels: Vec<usize>,
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors in slot coordinates, unit Euclidean length.
    pub eigenvectors: Vec<DVector<f64>>,
    /// `(E_j, E_j)_*` for each eigenvector.
    pub star_norms: Vec<f64>,
    /// Leading-order prediction for each label (NaN where undefined).
    pub asymptotic_eigenvalues: Vec<f64>,
    /// `max_j |K v_j - lambda_j v_j| / |K|`.
    pub residual: f64,
}

impl SpectralBlock {
    /// Eigenvalue carrying asymptotic label `j`, if present.
    pub fn by_label(&self, j: usize) -> Option<f64> {
        self.labels
            .iter()
            .position(|&l| l == j)
            .map(|p| self.eigenvalues[p])
    }
}

fn unperturbed_vectors(key: BlockKey, rho: f64) -> Vec<(usize, DVector<f64>)> {
    if key.n <= 1 {
        vec![
            (1, DVector::from_vec(vec![1.0, 0.0])),
            (3, DVector::from_vec(vec![0.0, 1.0])),
        ]
    } else {
        vec![
            (1, DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0])),
            (2, DVector::from_vec(vec![0.0, 1.0, rho, 0.0])),
            (3, DVector::from_vec(vec![0.0, -1.0, rho, 0.0])),
            (4, DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0])),
        ]
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Solves the generalized symmetric problem through `G = L L^T`.
pub fn exact_eigen_from(
    gram: &BlockMatrix,
    np: &BlockMatrix,
    g: &CoatedDiskConfig,
    mat: &Material,
) -> Result<SpectralBlock> {
    let key = np.key;
    let d = np.dim();
    let gs = (&gram.entries + gram.entries.transpose()) * 0.5;
    let chol = gs.clone().cholesky().ok_or_else(|| {
        CalrError::NoConvergence(format!("Gram block {key} is not positive definite"))
    })?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or_else(|| CalrError::NoConvergence(format!("singular Cholesky factor for {key}")))?;
    let a = l.transpose() * &np.entries * l_inv.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(a, 1e-15, 10_000)
        .ok_or_else(|| CalrError::NoConvergence(format!("eigensolver failed on {key}")))?;

    let mut vecs = Vec::with_capacity(d);
    for c in 0..d {
        let v = l_inv.transpose() * eig.eigenvectors.column(c);
        vecs.push(v.normalize());
    }
    let knorm = np.entries.norm();
    let mut residual: f64 = 0.0;
    for (c, v) in vecs.iter().enumerate() {
        let r = (&np.entries * v - v * eig.eigenvalues[c]).norm() / knorm;
        residual = residual.max(r);
    }
    if residual > 1e-9 {
        return Err(CalrError::ToleranceExceeded {
            check: format!("eigen residual of {key}"),
            error: residual,
            tolerance: 1e-9,
        });
    }

    // Label by the assignment maximizing total |cos| with the unperturbed vectors.
    let refs = unperturbed_vectors(key, g.rho());
    let corr = |c: usize, r: usize| -> f64 {
        let e = &refs[r].1;
        (vecs[c].dot(e) / e.norm()).abs()
    };
    let best = permutations(d)
        .into_iter()
        .max_by(|p, q| {
            let sp: f64 = p.iter().enumerate().map(|(c, &r)| corr(c, r)).sum();
            let sq: f64 = q.iter().enumerate().map(|(c, &r)| corr(c, r)).sum();
            sp.total_cmp(&sq)
        })
        .expect("at least one permutation");

    let asym = if key.n >= 1 {
        Some(asymptotic_eigen(key, g, mat)?)
    } else {
        None
    };
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by_key(|&c| refs[best[c]].0);
    let mut out = SpectralBlock {
        key,
        labels: Vec::with_capacity(d),
        eigenvalues: Vec::with_capacity(d),
        eigenvectors: Vec::with_capacity(d),
        star_norms: Vec::with_capacity(d),
        asymptotic_eigenvalues: Vec::with_capacity(d),
        residual,
    };
    for c in order {
        let label = refs[best[c]].0;
        let v = vecs[c].clone();
        out.star_norms.push(v.dot(&(&gs * &v)));
        out.labels.push(label);
        out.eigenvalues.push(eig.eigenvalues[c]);
        out.eigenvectors.push(v);
        out.asymptotic_eigenvalues
            .push(asym.map_or(f64::NAN, |a| a[label - 1]));
    }
    Ok(out)
}

/// Exact eigenpairs of the NP block for `key`.
pub fn exact_eigen(key: BlockKey, g: &CoatedDiskConfig, mat: &Material) -> Result<SpectralBlock> {
    let (gram, np) = assemble_block(key, g, mat)?;
    exact_eigen_from(&gram, &np, g, mat)
}

/// Leading-order eigenvalue formulas `lambda_{n,1..4}`.
pub fn asymptotic_eigen(key: BlockKey, g: &CoatedDiskConfig, mat: &Material) -> Result<[f64; 4]> {
    key.validate()?;
    if key.n == 0 {
        return Err(CalrError::invalid("asymptotic eigenvalues need n >= 1"));
    }
    let rho = g.rho();
    let k0 = mat.consts.k0;
    let n = key.n as f64;
    let rn = rho.powi(key.n as i32);
    let r2n = rn * rn;
    let mm = mat.mu_alpha1() * mat.mu_alpha2();
    let lin = n * rn * mat.mu_alpha2() * (rho - 1.0 / rho);
    let s = key.parity.sign();
    Ok([
        -k0 - r2n * mm * rho.powi(4) / (k0 * (1.0 + rho * rho)),
        k0 - s * lin,
        k0 + s * lin,
        -k0 - r2n * mm / (rho * rho) / (k0 * (1.0 + rho * rho)),
    ])
}

/// As [`asymptotic_eigen`], with the second-order `-k0` constants obtained
/// from Rayleigh-Schrodinger perturbation of `J + rho^n Q`:
/// `lambda_{n,1} = -k0 - rho^{2n} mu^2 alpha1 alpha2 rho^2 / (2 k0)` and
/// `lambda_{n,4} = -k0 - rho^{2n} mu^2 alpha1 alpha2 rho^{-2} / (2 k0)`.
pub fn second_order_eigen(key: BlockKey, g: &CoatedDiskConfig, mat: &Material) -> Result<[f64; 4]> {
    let mut out = asymptotic_eigen(key, g, mat)?;
    let rho = g.rho();
    let k0 = mat.consts.k0;
    let r2n = rho.powi(2 * key.n as i32);
    let mm = mat.mu_alpha1() * mat.mu_alpha2();
    out[0] = -k0 - r2n * mm * rho * rho / (2.0 * k0);
    out[3] = -k0 - r2n * mm / (rho * rho) / (2.0 * k0);
    Ok(out)
}
