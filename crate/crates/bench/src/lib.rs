//! Fixed models shared by the benchmarks.

use cbm_core::{BiasKernel, CbmSpec, Measure, QuadratureRule};

pub const ALPHA: [f64; 4] = [0.4, 0.3, 0.2, 0.1];

pub fn rule() -> QuadratureRule {
    QuadratureRule::new(64).expect("valid order")
}

/// Uniform `mu` on `[-0.2, 0.2]`, additive kernel with uniform `rho` on `[-0.4, 0.4]`.
pub fn additive_uniform() -> CbmSpec {
    let mu = Measure::uniform(-0.2, 0.2).expect("valid measure");
    let kernel = BiasKernel::additive(Measure::uniform(-0.4, 0.4).expect("valid measure"))
        .expect("valid kernel");
    CbmSpec::new(mu, vec![kernel], ALPHA.to_vec()).expect("valid model")
}

/// Same bias model with explicit group sizes.
pub fn additive_uniform_sized(sizes: &[u64]) -> CbmSpec {
    let mu = Measure::uniform(-0.2, 0.2).expect("valid measure");
    let kernel = BiasKernel::additive(Measure::uniform(-0.4, 0.4).expect("valid measure"))
        .expect("valid kernel");
    CbmSpec::with_sizes(mu, vec![kernel], sizes).expect("valid model")
}

/// Four groups with their own kernels.
pub fn heterogeneous() -> CbmSpec {
    let mu = Measure::uniform(-0.3, 0.3).expect("valid measure");
    let kernels = [0.2, 0.3, 0.4, 0.5]
        .iter()
        .map(|&l| {
            BiasKernel::additive(Measure::uniform(-l, l).expect("valid measure"))
                .expect("valid kernel")
        })
        .collect();
    CbmSpec::new(mu, kernels, ALPHA.to_vec()).expect("valid model")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        assert_eq!(additive_uniform().groups(), 4);
        assert_eq!(additive_uniform_sized(&[5, 7, 9, 11]).groups(), 4);
        assert!(!heterogeneous().is_shared());
        let _ = rule();
    }
}
