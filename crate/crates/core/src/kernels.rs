//! Stochastic kernels `z -> rho^z`: the law of a group's bias given the
//! global bias `z`.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{CbmError, Result};
use crate::measures::{LocalMoments, Measure};

/// Moments of `rho^z` at a fixed `z`.
pub type KernelMoments = LocalMoments;

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum BiasKernel {
    /// `rho^z = rho` for every `z`: groups vote independently.
    Constant(Measure),
    /// `T = Z + Y`, `Y ~ rho` symmetric.
    Additive(Measure),
    /// `T = Z * Y`, `Y ~ rho`.
    Multiplicative(Measure),
    /// `rho^z = Beta(s, s)` on `[-1, 1]` with shape `s = scale * |z| + floor`.
    BetaPolarization { scale: f64, floor: f64 },
    /// Explicit measures on a `z` grid, looked up by nearest node.
    Tabulated {
        z_grid: Vec<f64>,
        measures: Vec<Measure>,
    },
    /// `z -> inner^{-z}`, the antagonistic counterpart of `inner`.
    Reflected(Box<BiasKernel>),
}

impl BiasKernel {
    pub fn constant(rho: Measure) -> Result<Self> {
        rho.require_probability("rho")?;
        Ok(BiasKernel::Constant(rho))
    }

    pub fn additive(rho: Measure) -> Result<Self> {
        rho.require_probability("rho")?;
        if !rho.is_symmetric(SYMMETRY_TOL) {
            return Err(CbmError::kernel("additive kernels need a symmetric rho"));
        }
        Ok(BiasKernel::Additive(rho))
    }

    pub fn multiplicative(rho: Measure) -> Result<Self> {
        rho.require_probability("rho")?;
        Ok(BiasKernel::Multiplicative(rho))
    }

    pub fn beta_polarization(scale: f64, floor: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite() && floor > 0.0 && floor.is_finite()) {
            return Err(CbmError::kernel(format!(
                "beta kernel needs scale >= 0 and floor > 0, got scale = {scale}, floor = {floor}"
            )));
        }
        Ok(BiasKernel::BetaPolarization { scale, floor })
    }

    pub fn tabulated(z_grid: Vec<f64>, measures: Vec<Measure>) -> Result<Self> {
        if z_grid.is_empty() || z_grid.len() != measures.len() {
            return Err(CbmError::kernel(format!(
                "tabulated kernel needs one measure per grid node ({} nodes, {} measures)",
                z_grid.len(),
                measures.len()
            )));
        }
        if z_grid.windows(2).any(|w| !(w[0] < w[1])) || z_grid.iter().any(|z| !z.is_finite()) {
            return Err(CbmError::kernel(
                "tabulated grid must be finite and strictly increasing",
            ));
        }
        for (i, m) in measures.iter().enumerate() {
            m.require_probability(&format!("tabulated measure {i}"))?;
        }
        let k = BiasKernel::Tabulated { z_grid, measures };
        k.check_antisymmetry()?;
        Ok(k)
    }

    pub fn reflected(inner: BiasKernel) -> Self {
        BiasKernel::Reflected(Box::new(inner))
    }

    /// `rho^z A = rho^{-z}(-A)` on the grid nodes.
    fn check_antisymmetry(&self) -> Result<()> {
        if let BiasKernel::Tabulated { z_grid, measures } = self {
            for (z, m) in z_grid.iter().zip(measures) {
                let mirror = self.local_measure(-z).map_err(|_| {
                    CbmError::kernel(format!("tabulated grid must contain -z for node z = {z}"))
                })?;
                if !m.is_mirror_of(&mirror, SYMMETRY_TOL) {
                    return Err(CbmError::kernel(format!(
                        "tabulated kernel violates rho^z(A) = rho^-z(-A) at z = {z}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The measure `rho^z`.
    pub fn local_measure(&self, z: f64) -> Result<Measure> {
        match self {
            BiasKernel::Constant(rho) => Ok(rho.clone()),
            BiasKernel::Additive(rho) => rho.shifted(z).map_err(|e| {
                CbmError::kernel(format!("additive shift by z = {z} leaves [-1, 1]: {e}"))
            }),
            BiasKernel::Multiplicative(rho) => rho.scaled_by(z),
            BiasKernel::BetaPolarization { scale, floor } => {
                Measure::symmetric_beta(scale * z.abs() + floor)
            }
            BiasKernel::Tabulated { z_grid, measures } => {
                let (lo, hi) = (z_grid[0], *z_grid.last().expect("non-empty grid"));
                if z < lo || z > hi {
                    return Err(CbmError::OutsideGrid { z, lo, hi });
                }
                let idx = z_grid.partition_point(|&g| g < z);
                let best = if idx == 0 {
                    0
                } else if idx == z_grid.len() || z - z_grid[idx - 1] <= z_grid[idx] - z {
                    idx - 1
                } else {
                    idx
                };
                Ok(measures[best].clone())
            }
            BiasKernel::Reflected(inner) => inner.local_measure(-z),
        }
    }

    pub fn moments_at(&self, z: f64) -> Result<KernelMoments> {
        Ok(self.local_measure(z)?.local_moments())
    }

    /// One draw from `rho^z` without materialising the measure.
    pub fn sample_at<R: Rng + ?Sized>(&self, z: f64, rng: &mut R) -> Result<f64> {
        match self {
            BiasKernel::Constant(rho) => rho.sample(rng),
            BiasKernel::Additive(rho) => Ok(z + rho.sample(rng)?),
            BiasKernel::Multiplicative(rho) => Ok(z * rho.sample(rng)?),
            BiasKernel::BetaPolarization { scale, floor } => {
                let k = scale * z.abs() + floor;
                let beta =
                    Beta::new(k, k).map_err(|e| CbmError::kernel(format!("beta sampler: {e}")))?;
                Ok(2.0 * beta.sample(rng) - 1.0)
            }
            BiasKernel::Tabulated { .. } => self.local_measure(z)?.sample(rng),
            BiasKernel::Reflected(inner) => inner.sample_at(-z, rng),
        }
    }

    /// Values of `z` where `z -> rho^z` changes shape non-smoothly; outer
    /// quadrature splits there.
    pub fn z_breakpoints(&self) -> Vec<f64> {
        match self {
            BiasKernel::Constant(_) => Vec::new(),
            BiasKernel::Additive(rho) => rho.breakpoints().into_iter().map(|x| -x).collect(),
            BiasKernel::Multiplicative(_) | BiasKernel::BetaPolarization { .. } => vec![0.0],
            BiasKernel::Tabulated { z_grid, .. } => {
                z_grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
            }
            BiasKernel::Reflected(inner) => inner.z_breakpoints().into_iter().map(|x| -x).collect(),
        }
    }

    /// Checks the kernel against a global bias measure: additive supports
    /// must fit in `[-1, 1]` and tabulated grids must cover `supp mu`.
    pub fn check_against(&self, mu: &Measure) -> Result<()> {
        let (lo, hi) = mu.support_hull();
        match self {
            BiasKernel::Additive(rho) => {
                let (rlo, rhi) = rho.support_hull();
                if lo + rlo < -1.0 - 1e-12 || hi + rhi > 1.0 + 1e-12 {
                    return Err(CbmError::kernel(format!(
                        "supp mu + supp rho = [{}, {}] is not inside [-1, 1]",
                        lo + rlo,
                        hi + rhi
                    )));
                }
                Ok(())
            }
            BiasKernel::Tabulated { z_grid, .. } => {
                if lo < z_grid[0] || hi > *z_grid.last().expect("non-empty") {
                    return Err(CbmError::OutsideGrid {
                        z: if lo < z_grid[0] { lo } else { hi },
                        lo: z_grid[0],
                        hi: *z_grid.last().unwrap(),
                    });
                }
                Ok(())
            }
            BiasKernel::Reflected(inner) => inner.check_against(&mu.reflected()?),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{IntervalQuery, Part};
    use proptest::prelude::*;

    fn uni(lo: f64, hi: f64) -> Measure {
        Measure::uniform(lo, hi).unwrap()
    }

    #[test]
    fn additive_shift() {
        let l = 0.3;
        let k = BiasKernel::additive(uni(-l, l)).unwrap();
        assert_eq!(
            k.local_measure(0.1).unwrap(),
            Measure::uniform(0.1 - l, 0.1 + l).unwrap()
        );
    }

    #[test]
    fn multiplicative_at_zero_is_delta0() {
        let k = BiasKernel::multiplicative(uni(0.1, 0.3)).unwrap();
        let m = k.local_measure(0.0).unwrap();
        assert_eq!(m.atom_mass(0.0), 1.0);
    }

    #[test]
    fn multiplicative_negative_scaling() {
        let (l1, l2) = (0.1, 0.3);
        let k = BiasKernel::multiplicative(uni(l1, l2)).unwrap();
        let m = k.local_measure(-0.5).unwrap();
        assert_eq!(
            m.parts(),
            &[Part::Uniform {
                lo: -l2 / 2.0,
                hi: -l1 / 2.0,
                mass: 1.0
            }]
        );
    }

    #[test]
    fn additive_uniform_moments() {
        let l = 0.4;
        let k = BiasKernel::additive(uni(-l, l)).unwrap();
        for z in [-0.4, -0.25, 0.0, 0.1, 0.4] {
            let m = k.moments_at(z).unwrap();
            assert!((m.m1 - z).abs() < 1e-15);
            assert!((m.d - z / l).abs() < 1e-14);
            assert!((m.om1 - (l * l + z * z) / (2.0 * l)).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_delta0_has_zero_moments() {
        let k = BiasKernel::constant(Measure::point(0.0).unwrap()).unwrap();
        assert_eq!(k.moments_at(0.37).unwrap(), KernelMoments::default());
    }

    #[test]
    fn atoms_at_zero_do_not_count_toward_d() {
        let g = 0.2;
        let k = BiasKernel::additive(Measure::uniform_atoms(&[-g, g]).unwrap()).unwrap();
        assert_eq!(k.moments_at(0.0).unwrap().d, 0.0);
        // shifted so that an atom sits on 0
        let m = k.moments_at(g).unwrap();
        assert_eq!(m.d, 0.5);
    }

    #[test]
    fn tabulated_lookup_and_validation() {
        let k = BiasKernel::tabulated(
            vec![-1.0, 1.0],
            vec![Measure::point(-1.0).unwrap(), Measure::point(1.0).unwrap()],
        )
        .unwrap();
        assert_eq!(k.local_measure(0.3).unwrap().atom_mass(1.0), 1.0);
        assert_eq!(k.local_measure(-0.3).unwrap().atom_mass(-1.0), 1.0);
        assert!(matches!(
            k.local_measure(1.5),
            Err(CbmError::OutsideGrid { .. })
        ));
        // delta_1 everywhere breaks rho^z A = rho^-z (-A)
        assert!(BiasKernel::tabulated(
            vec![-1.0, 1.0],
            vec![Measure::point(1.0).unwrap(), Measure::point(1.0).unwrap()],
        )
        .is_err());
    }

    #[test]
    fn asymmetric_additive_rejected() {
        assert!(BiasKernel::additive(uni(0.0, 0.2)).is_err());
        let k = BiasKernel::additive(uni(-0.6, 0.6)).unwrap();
        assert!(k.check_against(&uni(-0.5, 0.5)).is_err());
        assert!(k.check_against(&uni(-0.4, 0.4)).is_ok());
    }

    #[test]
    fn multiplicative_one_sided_equal_weight_identity() {
        let k = BiasKernel::multiplicative(uni(0.1, 0.6)).unwrap();
        for z in [-0.9, -0.2, 0.05, 0.7] {
            let m = k.moments_at(z).unwrap();
            assert!((m.m1 * m.d - m.om1).abs() < 1e-15);
        }
    }

    fn arb_symmetric() -> impl Strategy<Value = Measure> {
        prop_oneof![
            prop::collection::vec((0.0f64..0.5, 0.01f64..1.0), 1..6).prop_map(|pts| {
                let total: f64 = pts.iter().map(|p| p.1).sum();
                let atoms: Vec<(f64, f64)> = pts
                    .iter()
                    .flat_map(|&(x, w)| [(x, 0.5 * w / total), (-x, 0.5 * w / total)])
                    .collect();
                Measure::discrete(&atoms).unwrap()
            }),
            prop::collection::vec((0.0f64..0.5, 0.01f64..1.0), 1..4).prop_map(|pts| {
                let total: f64 = pts.iter().map(|p| p.1).sum();
                let iv: Vec<(f64, f64, f64)> = pts
                    .iter()
                    .map(|&(h, w)| (-h - 1e-3, h + 1e-3, w / total))
                    .collect();
                Measure::uniform_mixture(&iv).unwrap()
            }),
            (0.2f64..3.0, 0.05f64..0.5).prop_map(|(t, h)| Measure::power_tail(t, h).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn antisymmetry_of_moments(rho in arb_symmetric(), z in 0.0f64..0.5, asym in 0.05f64..0.45) {
            let lop = Measure::uniform(-asym, 0.5).unwrap();
            for k in [
                BiasKernel::additive(rho.clone()).unwrap(),
                BiasKernel::multiplicative(rho.clone()).unwrap(),
                BiasKernel::multiplicative(lop).unwrap(),
                BiasKernel::constant(rho.clone()).unwrap(),
            ] {
                let (p, n) = (k.moments_at(z).unwrap(), k.moments_at(-z).unwrap());
                prop_assert!((p.m1 + n.m1).abs() < 1e-12);
                prop_assert!((p.d + n.d).abs() < 1e-12);
                prop_assert!((p.om1 - n.om1).abs() < 1e-12);
                prop_assert!((p.m2 - n.m2).abs() < 1e-12);
            }
        }

        #[test]
        fn additive_d_is_window_mass(rho in arb_symmetric(), z in 1e-6f64..0.5) {
            let k = BiasKernel::additive(rho.clone()).unwrap();
            let d = k.moments_at(z).unwrap().d;
            prop_assert!((d - rho.mass(&IntervalQuery::open_closed(-z, z))).abs() < 1e-12);
        }

        #[test]
        fn moment_inequalities(rho in arb_symmetric(), z in -0.5f64..0.5) {
            let m = BiasKernel::additive(rho).unwrap().moments_at(z).unwrap();
            prop_assert!(m.m2 >= m.m1 * m.m1 - 1e-15);
            prop_assert!(m.om1 >= m.m1.abs() - 1e-15);
            prop_assert!(m.d.abs() <= 1.0 + 1e-15);
            prop_assert!(m.om1 >= (m.m1 * m.d).abs() - 1e-15);
        }
    }
}
