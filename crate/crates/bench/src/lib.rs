//! Fixtures shared by the benchmarks.

use calr_core::engine::Problem;
use calr_core::material::{contrast_for_resonance, CoatedDiskConfig, Material, ResonanceSign};
use calr_core::potentials::DipoleSource;

/// Unit Lamé parameters, `r_i = 1`, `r_e = 2`, source at `(z, 0)`.
pub fn desk_problem(sign: ResonanceSign, z: f64) -> Problem {
    let m = Material::new(1.0, 1.0).expect("valid material");
    let c = contrast_for_resonance(sign, m.k0()).expect("resonant contrast");
    let g = CoatedDiskConfig::new(1.0, 2.0, c, 1e-3).expect("valid geometry");
    let s = DipoleSource::new([z, 0.0], [1.0, 0.0], [1.0, 0.0]).expect("valid source");
    Problem::new(m, g, s).expect("valid problem")
}
