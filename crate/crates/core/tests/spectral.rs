use calr_core::blocks::{
    asymptotic_eigen, exact_eigen, gram_block_closed_form, gram_symmetry_defect,
    np_block_closed_form, second_order_eigen, BlockKey, Parity,
};
use calr_core::material::{CoatedDiskConfig, Material};
use calr_core::oracle::quartic_eigen_oracle;
use proptest::prelude::*;

fn desk() -> (CoatedDiskConfig, Material) {
    (
        CoatedDiskConfig::new(1.0, 2.0, -0.5, 0.0).unwrap(),
        Material::new(1.0, 1.0).unwrap(),
    )
}

fn key(n: usize, p: Parity) -> BlockKey {
    BlockKey::new(n, p).unwrap()
}

/// `C = 2 max_{n<=8} rem_n / rho^n`, then `rem_n <= C rho^n` for the rest.
fn within_band(rho: f64, rem: &[(usize, f64)]) -> bool {
    let c = 2.0
        * rem
            .iter()
            .filter(|(n, _)| *n <= 8)
            .map(|&(n, r)| r / rho.powi(n as i32))
            .fold(0.0, f64::max);
    rem.iter()
        .filter(|(n, _)| *n > 8)
        .all(|&(n, r)| r <= c * rho.powi(n as i32))
}

#[test]
fn plus_branch_remainder_is_order_rho_n() {
    let (g, m) = desk();
    for parity in [Parity::V, Parity::Vtilde] {
        for j in [2usize, 3] {
            let rem: Vec<(usize, f64)> = (5..=25)
                .map(|n| {
                    let k = key(n, parity);
                    let lam = exact_eigen(k, &g, &m).unwrap().by_label(j).unwrap();
                    (n, (lam - asymptotic_eigen(k, &g, &m).unwrap()[j - 1]).abs())
                })
                .collect();
            assert!(within_band(g.rho(), &rem), "{parity:?} j={j}");
        }
    }
}

#[test]
fn minus_branch_second_order_constants() {
    let (g, m) = desk();
    let rho = g.rho();
    for parity in [Parity::V, Parity::Vtilde] {
        for j in [1usize, 4] {
            let rem: Vec<(usize, f64)> = (5..=12)
                .map(|n| {
                    let k = key(n, parity);
                    let lam = exact_eigen(k, &g, &m).unwrap().by_label(j).unwrap();
                    let r2n = rho.powi(2 * n as i32);
                    (
                        n,
                        (lam - second_order_eigen(k, &g, &m).unwrap()[j - 1]).abs() / r2n,
                    )
                })
                .collect();
            assert!(within_band(rho, &rem), "{parity:?} j={j}");
        }
    }
}

#[test]
fn parities_share_spectrum_with_swapped_labels() {
    let (g, m) = desk();
    for n in 2..=20 {
        let v = exact_eigen(key(n, Parity::V), &g, &m).unwrap();
        let t = exact_eigen(key(n, Parity::Vtilde), &g, &m).unwrap();
        for (a, b) in [(1, 1), (2, 3), (3, 2), (4, 4)] {
            let x = v.by_label(a).unwrap();
            let y = t.by_label(b).unwrap();
            assert!((x - y).abs() <= 1e-13, "n={n}: {x} vs {y}");
        }
    }
}

#[test]
fn quartic_oracle_agrees_with_primary_solver() {
    let (g, m) = desk();
    for n in 2..=6 {
        for parity in [Parity::V, Parity::Vtilde] {
            let s = exact_eigen(key(n, parity), &g, &m).unwrap();
            let q = quartic_eigen_oracle(
                &np_block_closed_form(key(n, parity), &g, &m)
                    .unwrap()
                    .entries,
            )
            .unwrap();
            let mut a = s.eigenvalues.clone();
            a.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&q.eigenvalues) {
                assert!((x - y.re).abs() <= 1e-10 && y.im.abs() <= 1e-10);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closed_blocks_are_self_adjoint(
        lambda in 0.1f64..5.0,
        mu in 0.1f64..5.0,
        r_i in 0.2f64..1.6,
        n in 2usize..=40,
        tilde in any::<bool>(),
    ) {
        let g = CoatedDiskConfig::new(r_i, 2.0, -0.5, 0.0).unwrap();
        let m = Material::new(lambda, mu).unwrap();
        let k = key(n, if tilde { Parity::Vtilde } else { Parity::V });
        let gram = gram_block_closed_form(k, &g, &m).unwrap();
        let np = np_block_closed_form(k, &g, &m).unwrap();
        let scale = gram.entries.amax() * np.entries.amax();
        prop_assert!(gram_symmetry_defect(&gram.entries, &np.entries) <= 1e-12 * scale.max(1.0));
        let sym = (&gram.entries + gram.entries.transpose()) * 0.5;
        prop_assert!(sym.cholesky().is_some());
    }

    #[test]
    fn eigenvalues_bracket_accumulation_points(
        lambda in 0.1f64..5.0,
        mu in 0.1f64..5.0,
        r_i in 0.3f64..1.4,
        n in 6usize..=30,
    ) {
        let g = CoatedDiskConfig::new(r_i, 2.0, -0.5, 0.0).unwrap();
        let m = Material::new(lambda, mu).unwrap();
        let s = exact_eigen(key(n, Parity::V), &g, &m).unwrap();
        let k0 = m.k0();
        let lin = n as f64 * g.rho().powi(n as i32) * (m.mu_alpha2() * (1.0 / g.rho() - g.rho()));
        for j in [1usize, 4] {
            prop_assert!(s.by_label(j).unwrap() <= -k0 + 1e-15);
        }
        let spread = (s.by_label(2).unwrap() - s.by_label(3).unwrap()).abs();
        prop_assert!((spread - 2.0 * lin).abs() <= 0.5 * lin + 1e-14);
    }
}
