//! Symmetric (sub-)probability measures on `[-1, 1]`.
//!
//! A [`Measure`] is a finite mixture of closed-form parts: point masses,
//! uniform pieces, symmetric power-law tails, and (only as a local bias
//! produced by the polarisation kernel) symmetric beta laws. All interval
//! masses are exact, which matters because the bias statistics hinge on
//! half-open intervals such as `(0, 1]` and `(-z, z]`.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{CbmError, Result};

/// Slack allowed when checking that a support lies inside a bound.
pub const SUPPORT_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-12;

/// An interval with explicit endpoint closure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalQuery {
    pub lo: f64,
    pub hi: f64,
    pub lower_closed: bool,
    pub upper_closed: bool,
}

impl IntervalQuery {
    pub fn new(lo: f64, hi: f64, lower_closed: bool, upper_closed: bool) -> Self {
        debug_assert!(lo <= hi, "interval query with lo > hi");
        IntervalQuery {
            lo,
            hi,
            lower_closed,
            upper_closed,
        }
    }

    /// `(lo, hi]`, the canonical form.
    pub fn open_closed(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, false, true)
    }

    /// `[lo, hi)`
    pub fn closed_open(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, true, false)
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, true, true)
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, false, false)
    }

    pub fn point(x: f64) -> Self {
        Self::closed(x, x)
    }

    pub fn everything() -> Self {
        Self::closed(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lower_closed {
            x >= self.lo
        } else {
            x > self.lo
        };
        let below = if self.upper_closed {
            x <= self.hi
        } else {
            x < self.hi
        };
        above && below
    }

    /// The mirror image `-A`, closures swapped.
    pub fn reflect(&self) -> Self {
        IntervalQuery::new(-self.hi, -self.lo, self.upper_closed, self.lower_closed)
    }
}

/// One closed-form component of a [`Measure`]. `mass` is the total mass
/// the component carries.
#[derive(Debug, Clone, PartialEq)]
pub enum Part {
    Atom {
        loc: f64,
        mass: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
        mass: f64,
    },
    /// Symmetric about `center` on `[center - half_width, center + half_width]`
    /// with `P(|X - center| <= y) = (y / half_width)^t`.
    PowerTail {
        center: f64,
        t: f64,
        half_width: f64,
        mass: f64,
    },
    /// Beta(shape, shape) rescaled to `[-1, 1]`.
    SymmetricBeta {
        shape: f64,
        mass: f64,
    },
}

impl Part {
    pub fn mass(&self) -> f64 {
        match *self {
            Part::Atom { mass, .. }
            | Part::Uniform { mass, .. }
            | Part::PowerTail { mass, .. }
            | Part::SymmetricBeta { mass, .. } => mass,
        }
    }

    fn support(&self) -> (f64, f64) {
        match *self {
            Part::Atom { loc, .. } => (loc, loc),
            Part::Uniform { lo, hi, .. } => (lo, hi),
            Part::PowerTail {
                center, half_width, ..
            } => (center - half_width, center + half_width),
            Part::SymmetricBeta { .. } => (-1.0, 1.0),
        }
    }

    fn with_mass(&self, factor: f64) -> Part {
        let mut p = self.clone();
        match &mut p {
            Part::Atom { mass, .. }
            | Part::Uniform { mass, .. }
            | Part::PowerTail { mass, .. }
            | Part::SymmetricBeta { mass, .. } => *mass *= factor,
        }
        p
    }

    /// Mass of the continuous part below `x` (inclusive and exclusive coincide).
    fn cdf_continuous(&self, x: f64) -> f64 {
        match *self {
            Part::Atom { .. } => unreachable!("atoms have no continuous cdf"),
            Part::Uniform { lo, hi, mass } => mass * ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Part::PowerTail {
                center,
                t,
                half_width,
                mass,
            } => {
                let v = ((x - center) / half_width).clamp(-1.0, 1.0);
                0.5 * mass * (1.0 + v.signum() * v.abs().powf(t))
            }
            Part::SymmetricBeta { shape, mass } => {
                if x <= -1.0 {
                    0.0
                } else if x >= 1.0 {
                    mass
                } else {
                    mass * beta_reg(shape, shape, 0.5 * (x + 1.0))
                }
            }
        }
    }

    fn mass_in(&self, q: &IntervalQuery) -> f64 {
        match *self {
            Part::Atom { loc, mass } => {
                if q.contains(loc) {
                    mass
                } else {
                    0.0
                }
            }
            _ => (self.cdf_continuous(q.hi) - self.cdf_continuous(q.lo)).max(0.0),
        }
    }

    /// Points where the part's cdf is not smooth.
    fn breakpoints(&self, out: &mut Vec<f64>) {
        match *self {
            Part::Atom { loc, .. } => out.push(loc),
            Part::Uniform { lo, hi, .. } => out.extend([lo, hi]),
            Part::PowerTail {
                center, half_width, ..
            } => out.extend([center - half_width, center, center + half_width]),
            Part::SymmetricBeta { .. } => out.extend([-1.0, 0.0, 1.0]),
        }
    }

    fn validate(&self) -> Result<()> {
        let m = self.mass();
        if !(m.is_finite() && m > 0.0) {
            return Err(CbmError::measure(format!(
                "component mass must be positive, got {m}"
            )));
        }
        match *self {
            Part::Atom { loc, .. } if !loc.is_finite() => {
                Err(CbmError::measure(format!("atom location {loc} is not finite")))
            }
            Part::Uniform { lo, hi, .. } if !(lo.is_finite() && hi.is_finite() && lo < hi) => Err(
                CbmError::measure(format!("uniform interval [{lo}, {hi}] must have lo < hi")),
            ),
            Part::PowerTail { t, half_width, center, .. }
                if !(t > 0.0 && t.is_finite() && half_width > 0.0 && center.is_finite()) =>
            {
                Err(CbmError::measure(format!(
                    "power tail needs t > 0 and half_width > 0, got t = {t}, half_width = {half_width}"
                )))
            }
            Part::SymmetricBeta { shape, .. } if !(shape > 0.0 && shape.is_finite()) => {
                Err(CbmError::measure(format!("beta shape must be positive, got {shape}")))
            }
            _ => {
                let (lo, hi) = self.support();
                if lo < -1.0 - SUPPORT_TOL || hi > 1.0 + SUPPORT_TOL {
                    Err(CbmError::measure(format!("support [{lo}, {hi}] leaves [-1, 1]")))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Exact per-measure characteristics: first and second moments, first
/// absolute moment, and the sign balance `d = m(0, 1] - m[-1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalMoments {
    pub m1: f64,
    pub m2: f64,
    pub om1: f64,
    pub d: f64,
}

/// A finite mixture of [`Part`]s with total mass in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    parts: Vec<Part>,
}

impl Measure {
    pub fn from_parts(parts: Vec<Part>) -> Result<Self> {
        if parts.is_empty() {
            return Err(CbmError::measure("a measure needs at least one component"));
        }
        for p in &parts {
            p.validate()?;
        }
        let m = Measure { parts };
        let total = m.total_mass();
        if total > 1.0 + MASS_TOL {
            return Err(CbmError::measure(format!("total mass {total} exceeds 1")));
        }
        Ok(m)
    }

    /// Point mass `delta_x`.
    pub fn point(x: f64) -> Result<Self> {
        Self::from_parts(vec![Part::Atom { loc: x, mass: 1.0 }])
    }

    /// Discrete measure from `(location, mass)` pairs.
    pub fn discrete(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::from_parts(
            atoms
                .iter()
                .map(|&(loc, mass)| Part::Atom { loc, mass })
                .collect(),
        )
    }

    /// `(1/n) sum delta_{x_i}`.
    pub fn uniform_atoms(locs: &[f64]) -> Result<Self> {
        let w = 1.0 / locs.len() as f64;
        Self::from_parts(
            locs.iter()
                .map(|&loc| Part::Atom { loc, mass: w })
                .collect(),
        )
    }

    /// Uniform probability on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::from_parts(vec![Part::Uniform { lo, hi, mass: 1.0 }])
    }

    /// Mixture of uniform pieces `(lo, hi, mass)`.
    pub fn uniform_mixture(intervals: &[(f64, f64, f64)]) -> Result<Self> {
        Self::from_parts(
            intervals
                .iter()
                .map(|&(lo, hi, mass)| Part::Uniform { lo, hi, mass })
                .collect(),
        )
    }

    /// Symmetric power law on `[-h, h]` with `m(0, y] = (y / h)^t / 2`.
    /// For `h = 1/2` this is the family `F(y) = 2^{t-1} y^t`.
    pub fn power_tail(t: f64, half_width: f64) -> Result<Self> {
        Self::from_parts(vec![Part::PowerTail {
            center: 0.0,
            t,
            half_width,
            mass: 1.0,
        }])
    }

    /// Beta(shape, shape) on `[-1, 1]`.
    pub fn symmetric_beta(shape: f64) -> Result<Self> {
        Self::from_parts(vec![Part::SymmetricBeta { shape, mass: 1.0 }])
    }

    /// Weighted mixture `sum w_i m_i`.
    pub fn mixture(components: &[(f64, Measure)]) -> Result<Self> {
        let parts = components
            .iter()
            .flat_map(|(w, m)| m.parts.iter().map(move |p| p.with_mass(*w)))
            .collect();
        Self::from_parts(parts)
    }

    /// The same measure with every mass multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_parts(self.parts.iter().map(|p| p.with_mass(factor)).collect())
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn total_mass(&self) -> f64 {
        self.parts.iter().map(Part::mass).sum()
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= MASS_TOL
    }

    pub fn require_probability(&self, what: &str) -> Result<()> {
        if self.is_probability() {
            Ok(())
        } else {
            Err(CbmError::measure(format!(
                "{what} must be a probability measure, total mass is {}",
                self.total_mass()
            )))
        }
    }

    /// Smallest closed interval holding the support.
    pub fn support_hull(&self) -> (f64, f64) {
        self.parts
            .iter()
            .map(Part::support)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, s| {
                (acc.0.min(s.0), acc.1.max(s.1))
            })
    }

    pub fn support_within(&self, bound: f64) -> bool {
        let (lo, hi) = self.support_hull();
        lo >= -bound - SUPPORT_TOL && hi <= bound + SUPPORT_TOL
    }

    pub fn is_discrete(&self) -> bool {
        self.parts.iter().all(|p| matches!(p, Part::Atom { .. }))
    }

    pub fn has_atoms(&self) -> bool {
        self.parts.iter().any(|p| matches!(p, Part::Atom { .. }))
    }

    /// Exact mass of an interval, endpoint atoms counted per the closure flags.
    pub fn mass(&self, q: &IntervalQuery) -> f64 {
        if q.lo > q.hi {
            return 0.0;
        }
        self.parts.iter().map(|p| p.mass_in(q)).sum()
    }

    pub fn atom_mass(&self, x: f64) -> f64 {
        self.mass(&IntervalQuery::point(x))
    }

    /// `m(-z, z]`, the symmetric window used throughout the sign analysis.
    pub fn window(&self, z: f64) -> f64 {
        self.mass(&IntervalQuery::open_closed(-z, z))
    }

    /// Sorted, deduplicated points where the cdf is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for p in &self.parts {
            p.breakpoints(&mut out);
        }
        sort_dedup(&mut out);
        out
    }

    /// Image under `x -> x + shift`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        let parts = self
            .parts
            .iter()
            .map(|p| match *p {
                Part::Atom { loc, mass } => Ok(Part::Atom {
                    loc: loc + shift,
                    mass,
                }),
                Part::Uniform { lo, hi, mass } => Ok(Part::Uniform {
                    lo: lo + shift,
                    hi: hi + shift,
                    mass,
                }),
                Part::PowerTail {
                    center,
                    t,
                    half_width,
                    mass,
                } => Ok(Part::PowerTail {
                    center: center + shift,
                    t,
                    half_width,
                    mass,
                }),
                Part::SymmetricBeta { .. } => {
                    Err(CbmError::measure("beta components cannot be shifted"))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(parts)
    }

    /// Image under `x -> factor * x`; a zero factor collapses to an atom at 0.
    pub fn scaled_by(&self, factor: f64) -> Result<Self> {
        if factor == 0.0 {
            return Self::from_parts(vec![Part::Atom {
                loc: 0.0,
                mass: self.total_mass(),
            }]);
        }
        let parts = self
            .parts
            .iter()
            .map(|p| match *p {
                Part::Atom { loc, mass } => Ok(Part::Atom {
                    loc: loc * factor,
                    mass,
                }),
                Part::Uniform { lo, hi, mass } => {
                    let (a, b) = (lo * factor, hi * factor);
                    Ok(Part::Uniform {
                        lo: a.min(b),
                        hi: a.max(b),
                        mass,
                    })
                }
                Part::PowerTail {
                    center,
                    t,
                    half_width,
                    mass,
                } => Ok(Part::PowerTail {
                    center: center * factor,
                    t,
                    half_width: half_width * factor.abs(),
                    mass,
                }),
                Part::SymmetricBeta { shape, mass } if factor.abs() == 1.0 => {
                    Ok(Part::SymmetricBeta { shape, mass })
                }
                Part::SymmetricBeta { .. } => {
                    Err(CbmError::measure("beta components can only be reflected"))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(parts)
    }

    /// Mirror image `A -> -A`.
    pub fn reflected(&self) -> Result<Self> {
        self.scaled_by(-1.0)
    }

    /// True iff `self(A) = other(-A)` on every interval, up to `tol`.
    ///
    /// Both cdfs are piecewise smooth between the merged breakpoints and
    /// the continuous families are each symmetric about their own centre,
    /// so it suffices to compare atoms and the masses between consecutive
    /// breakpoints, plus a midpoint inside each gap for curved pieces.
    pub fn is_mirror_of(&self, other: &Measure, tol: f64) -> bool {
        let mut pts = self.breakpoints();
        pts.extend(other.breakpoints().into_iter().map(|x| -x));
        sort_dedup(&mut pts);
        for &x in &pts {
            if (self.atom_mass(x) - other.atom_mass(-x)).abs() > tol {
                return false;
            }
        }
        let mut grid = pts.clone();
        grid.extend(pts.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        sort_dedup(&mut grid);
        grid.windows(2).all(|w| {
            let q = IntervalQuery::open(w[0], w[1]);
            (self.mass(&q) - other.mass(&q.reflect())).abs() <= tol
        })
    }

    /// Symmetry `m(A) = m(-A)` up to `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_mirror_of(self, tol)
    }

    /// Exact `m1`, `m2`, `om1`, `d` of this (sub-)probability measure.
    pub fn local_moments(&self) -> LocalMoments {
        let mut out = LocalMoments::default();
        for p in &self.parts {
            let (m1, m2, om1) = match *p {
                Part::Atom { loc, mass } => (mass * loc, mass * loc * loc, mass * loc.abs()),
                Part::Uniform { lo, hi, mass } => (
                    mass * 0.5 * (lo + hi),
                    mass * (lo * lo + lo * hi + hi * hi) / 3.0,
                    mass * (hi * hi.abs() - lo * lo.abs()) / (2.0 * (hi - lo)),
                ),
                Part::PowerTail {
                    center,
                    t,
                    half_width: h,
                    mass,
                } => {
                    let c = center.abs();
                    let abs_mean = if c >= h {
                        c
                    } else {
                        let q = c / h;
                        c + t * h * (1.0 - q.powf(t + 1.0)) / (t + 1.0) - c * (1.0 - q.powf(t))
                    };
                    (
                        mass * center,
                        mass * (center * center + h * h * t / (t + 2.0)),
                        mass * abs_mean,
                    )
                }
                Part::SymmetricBeta { shape: k, mass } => {
                    let log_c = ln_gamma(2.0 * k)
                        - 2.0 * ln_gamma(k)
                        - (2.0 * k - 1.0) * std::f64::consts::LN_2;
                    (0.0, mass / (2.0 * k + 1.0), mass * log_c.exp() / k)
                }
            };
            out.m1 += m1;
            out.m2 += m2;
            out.om1 += om1;
            if !matches!(p, Part::SymmetricBeta { .. }) {
                out.d += p.mass_in(&IntervalQuery::open(0.0, f64::INFINITY))
                    - p.mass_in(&IntervalQuery::open(f64::NEG_INFINITY, 0.0));
            }
        }
        out
    }

    /// One draw by inverse-cdf inside a component picked by its mass.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.require_probability("a sampled measure")?;
        let total = self.total_mass();
        let pick: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = self.parts.last().expect("non-empty");
        for p in &self.parts {
            acc += p.mass();
            if pick < acc {
                chosen = p;
                break;
            }
        }
        Ok(match *chosen {
            Part::Atom { loc, .. } => loc,
            Part::Uniform { lo, hi, .. } => lo + rng.random::<f64>() * (hi - lo),
            Part::PowerTail {
                center,
                t,
                half_width,
                ..
            } => {
                let v = 2.0 * rng.random::<f64>() - 1.0;
                center + half_width * v.signum() * v.abs().powf(1.0 / t)
            }
            Part::SymmetricBeta { shape, .. } => {
                let beta = Beta::new(shape, shape)
                    .map_err(|e| CbmError::measure(format!("beta sampler: {e}")))?;
                2.0 * beta.sample(rng) - 1.0
            }
        })
    }
}

pub(crate) fn sort_dedup(v: &mut Vec<f64>) {
    v.retain(|x| x.is_finite());
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
}
