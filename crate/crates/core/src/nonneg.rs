//! Sign of the constant weight term for additive models `T = Z + Y` with
//! `Z ~ mu`, `Y ~ rho`, both symmetric on `[-1/2, 1/2]`.
//!
//! The constant `C2` has the sign of `r - a m`, where
//!
//! * `a = 2 int_{(0,1/2]} rho(-z,z]^2 mu(dz)`,
//! * `r = 2 int_{(0,1/2]} z rho(-z,z] mu(dz)`,
//! * `s = 2 int_{(0,1/2]} y mu(-y,y] rho(dy)`,
//! * `m = E|Z + Y| = r + s`.

use serde::Serialize;

use crate::error::{CbmError, Result};
use crate::measures::{sort_dedup, IntervalQuery, Measure, Part};
use crate::quadrature::{integrate_over, QuadratureRule};

const HALF: f64 = 0.5;
const SYMMETRY_TOL: f64 = 1e-12;
const GRADED_CUTS: i32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RamReport {
    pub a: f64,
    pub r: f64,
    pub s: f64,
    /// `E|Z + Y|`, computed directly rather than as `r + s`.
    pub m: f64,
    pub r_minus_am: f64,
    pub negative_for_small_groups: bool,
}

fn has_power_tail(m: &Measure) -> bool {
    m.parts()
        .iter()
        .any(|p| matches!(p, Part::PowerTail { .. }))
}

fn check_half(m: &Measure, what: &str) -> Result<()> {
    if !m.support_within(HALF) {
        return Err(CbmError::measure(format!(
            "{what} must be supported in [-1/2, 1/2]"
        )));
    }
    if !m.is_symmetric(SYMMETRY_TOL) {
        return Err(CbmError::measure(format!("{what} must be symmetric")));
    }
    Ok(())
}

/// `m` and its reflection's breakpoints, the kinks of `z -> m(-z, z]`.
fn folded_breaks(m: &Measure) -> Vec<f64> {
    let mut out: Vec<f64> = m.breakpoints().into_iter().flat_map(|x| [x, -x]).collect();
    sort_dedup(&mut out);
    out
}

fn positive_half() -> IntervalQuery {
    IntervalQuery::open_closed(0.0, HALF + 1e-12)
}

pub fn ram_quantities(mu: &Measure, rho: &Measure, rule: &QuadratureRule) -> Result<RamReport> {
    check_half(mu, "mu")?;
    check_half(rho, "rho")?;
    let mut rho_breaks = folded_breaks(rho);
    let mut mu_breaks = folded_breaks(mu);
    if has_power_tail(mu) || has_power_tail(rho) {
        // windows of power tails behave like |z|^t at 0; grade the cuts toward it
        let graded: Vec<f64> = (1..=GRADED_CUTS)
            .map(|k| HALF * 0.5f64.powi(k))
            .flat_map(|x| [x, -x])
            .collect();
        for breaks in [&mut rho_breaks, &mut mu_breaks] {
            breaks.extend_from_slice(&graded);
            sort_dedup(breaks);
        }
    }
    let a = 2.0
        * integrate_over(
            mu,
            |z| rho.window(z).powi(2),
            rule,
            &rho_breaks,
            &positive_half(),
        )?;
    let r = 2.0
        * integrate_over(
            mu,
            |z| z * rho.window(z),
            rule,
            &rho_breaks,
            &positive_half(),
        )?;
    let s = 2.0
        * integrate_over(
            rho,
            |y| y * mu.window(y),
            rule,
            &mu_breaks,
            &positive_half(),
        )?;
    let m = integrate_over(
        mu,
        |z| {
            rho.shifted(z)
                .map(|x| x.local_moments().om1)
                .unwrap_or(f64::NAN)
        },
        rule,
        &rho_breaks,
        &IntervalQuery::everything(),
    )?;
    let r_minus_am = r - a * m;
    Ok(RamReport {
        a,
        r,
        s,
        m,
        r_minus_am,
        negative_for_small_groups: r_minus_am < 0.0,
    })
}

/// `P(|X| <= x)` and its left limit `P(|X| < x)`.
fn folded_cdf(m: &Measure, x: f64) -> (f64, f64) {
    (
        m.mass(&IntervalQuery::closed(-x, x)),
        m.mass(&IntervalQuery::open(-x, x)),
    )
}

/// True iff `|X1|` first-order stochastically dominates `|X2|`, i.e.
/// `P(|X1| <= x) <= P(|X2| <= x)` for every `x`.
pub fn fosd_abs(x1: &Measure, x2: &Measure) -> bool {
    let mut grid: Vec<f64> = x1
        .breakpoints()
        .into_iter()
        .chain(x2.breakpoints())
        .map(f64::abs)
        .collect();
    grid.extend((0..=1000).map(|i| i as f64 * 1e-3));
    sort_dedup(&mut grid);
    let mids: Vec<f64> = grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    grid.extend(mids);
    grid.iter().all(|&x| {
        let (c1, l1) = folded_cdf(x1, x);
        let (c2, l2) = folded_cdf(x2, x);
        c1 <= c2 + 1e-12 && l1 <= l2 + 1e-12
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FosdBranch {
    ZDominates,
    YDominates,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FosdReport {
    /// Some dominance relation between `|Z|` and `|Y|` holds.
    pub applies: bool,
    /// One of the sufficient conditions fired; `false` is inconclusive.
    pub guarantees_nonneg: bool,
    pub branch: FosdBranch,
    pub z_dominates: bool,
    pub y_dominates: bool,
    pub ram: RamReport,
}

/// `|Z| >= |Y|` with `a <= 1/2`, or `|Y| >= |Z|` with `s <= 2r`, each
/// imply `r >= a m`.
pub fn check_fosd_sufficient(
    mu: &Measure,
    rho: &Measure,
    rule: &QuadratureRule,
) -> Result<FosdReport> {
    let ram = ram_quantities(mu, rho, rule)?;
    let z_dominates = fosd_abs(mu, rho);
    let y_dominates = fosd_abs(rho, mu);
    let branch = if z_dominates && ram.a <= 0.5 {
        FosdBranch::ZDominates
    } else if y_dominates && ram.s <= 2.0 * ram.r {
        FosdBranch::YDominates
    } else {
        FosdBranch::None
    };
    Ok(FosdReport {
        applies: z_dominates || y_dominates,
        guarantees_nonneg: branch != FosdBranch::None,
        branch,
        z_dominates,
        y_dominates,
        ram,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RibbonReport {
    pub cond1: bool,
    pub cond2: bool,
    pub cond_recip: bool,
    pub guarantees_nonneg: bool,
}

/// Conditions on constants `c <= C` with `c rho <= mu <= C rho`, each of
/// which implies `r >= a m`. The reciprocal condition is only checked when
/// `c = 1/C`, and uses the value of `a`.
pub fn check_ribbon(c_low: f64, c_high: f64, a: f64) -> Result<RibbonReport> {
    if !(c_low > 0.0 && c_low <= c_high && c_high.is_finite()) {
        return Err(CbmError::Config {
            field: "ribbon".into(),
            message: format!("need 0 < c <= C, got c = {c_low}, C = {c_high}"),
        });
    }
    let cond1 = c_high < 3.0 && c_low >= c_high * c_high / (3.0 - c_high);
    let cond2 = c_high <= c_low * (3.0 * c_low * c_low - 1.0);
    let reciprocal = (c_low * c_high - 1.0).abs() <= 1e-12;
    let cond_recip = reciprocal && a <= 1.0 / (1.0 + c_high * c_high);
    Ok(RibbonReport {
        cond1,
        cond2,
        cond_recip,
        guarantees_nonneg: cond1 || cond2 || cond_recip,
    })
}

/// `T(mu) = int_0^{1/2} y mu(-y, y] dy + E Z^2`. With `rho` uniform on
/// `[-1/2, 1/2]`, `r >= a m` iff `T(mu) <= 1/4`.
pub fn t_functional(mu: &Measure, rule: &QuadratureRule) -> Result<f64> {
    mu.require_probability("mu")?;
    check_half(mu, "mu")?;
    let mut cuts = vec![0.0, HALF];
    cuts.extend(
        mu.breakpoints()
            .into_iter()
            .map(f64::abs)
            .filter(|&x| x < HALF),
    );
    sort_dedup(&mut cuts);
    let tail: f64 = cuts
        .windows(2)
        .map(|w| rule.integrate(w[0], w[1], |y| y * mu.window(y)))
        .sum();
    Ok(tail + mu.local_moments().m2)
}

/// Supremum of `a` over `mu = rho` discrete with at most `n` atoms,
/// attained by the uniform measure on `n` points.
///
/// Even `n` follows the same `(n^2 - 1) / (3 n^2)` as odd `n`: the uniform
/// two-point measure already has `a = 1/4`.
pub fn discrete_a_bound(n: u32) -> f64 {
    let n = n as f64;
    (n - 1.0) * (n + 1.0) / (3.0 * n * n)
}

/// `rho` with `F(y) = 2^{t-1} y^t` on `[0, 1/2]` and `mu(c A) = rho(A)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionFamily {
    pub t: f64,
    pub c: f64,
}

impl ContractionFamily {
    pub fn new(t: f64, c: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CbmError::Config {
                field: "t".into(),
                message: format!("t must be positive, got {t}"),
            });
        }
        if !(c > 0.0 && c < 1.0) {
            return Err(CbmError::Config {
                field: "c".into(),
                message: format!("c must lie in (0, 1), got {c}"),
            });
        }
        Ok(ContractionFamily { t, c })
    }

    /// `(mu, rho)`.
    pub fn measures(&self) -> Result<(Measure, Measure)> {
        Ok((
            Measure::power_tail(self.t, 0.5 * self.c)?,
            Measure::power_tail(self.t, 0.5)?,
        ))
    }
}

/// `h(c) = c^{1+t} - 3(1+t) c^{1-t} + 1 + 2t`; `r >= a m` iff `h(c) <= 0`.
pub fn contraction_h(t: f64, c: f64) -> f64 {
    c.powf(1.0 + t) - 3.0 * (1.0 + t) * c.powf(1.0 - t) + 1.0 + 2.0 * t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Negative,
    Zero,
    Nonneg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionReport {
    pub t: f64,
    pub c: f64,
    pub h: f64,
    /// Sign of `r - a m` read off `h`.
    pub sign: Sign,
    /// For `t >= 1`, `r > a m` holds for every `c`.
    pub t_at_least_one: bool,
}

pub fn contraction_sign(fam: &ContractionFamily) -> ContractionReport {
    let h = contraction_h(fam.t, fam.c);
    let sign = if h.abs() <= 1e-12 {
        Sign::Zero
    } else if h > 0.0 {
        Sign::Negative
    } else {
        Sign::Nonneg
    };
    ContractionReport {
        t: fam.t,
        c: fam.c,
        h,
        sign,
        t_at_least_one: fam.t >= 1.0,
    }
}

/// `x0 = (3(1-t))^{1/(2t)}`, the critical point of `h`.
pub fn contraction_x0(t: f64) -> f64 {
    (3.0 * (1.0 - t)).powf(1.0 / (2.0 * t))
}

/// The unique root `c0` of `h` in `(0, min(x0, 1))`: weights turn negative
/// for contractions `c < c0`. Bisection runs on `ln c` since `c0` tends to
/// 0 as `t -> 1`.
pub fn critical_c0(t: f64, tol: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(CbmError::Config {
            field: "t".into(),
            message: format!("t must lie in (0, 1), got {t}"),
        });
    }
    let h = |l: f64| contraction_h(t, l.exp());
    let mut hi = contraction_x0(t).min(1.0).ln();
    let mut lo = f64::MIN_POSITIVE.ln();
    if !(h(lo) > 0.0 && h(hi) < 0.0) {
        return Err(CbmError::Unsupported(format!(
            "h has no sign change on (0, min(x0, 1)) for t = {t}"
        )));
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..2000 {
        mid = 0.5 * (lo + hi);
        let v = h(mid);
        if v.abs() <= tol || mid == lo || mid == hi {
            break;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule() -> QuadratureRule {
        QuadratureRule::default()
    }

    #[test]
    fn negative_weight_example() {
        let (g, l1) = (0.1, 0.05);
        for l2 in [0.2, 0.3, 0.4] {
            let mu = Measure::uniform_atoms(&[-g, g]).unwrap();
            let rho = Measure::uniform_atoms(&[-l2, -l1, l1, l2]).unwrap();
            let rep = ram_quantities(&mu, &rho, &rule()).unwrap();
            assert!((rep.a - 0.25).abs() < 1e-15);
            assert!((rep.r - g / 2.0).abs() < 1e-15);
            assert!((rep.m - (g + l2) / 2.0).abs() < 1e-15);
            assert_eq!(rep.negative_for_small_groups, l2 > 3.0 * g + 1e-12);
        }
    }

    #[test]
    fn point_mass_and_three_atoms() {
        let d0 = Measure::point(0.0).unwrap();
        let rep = ram_quantities(&d0, &d0, &rule()).unwrap();
        assert_eq!((rep.a, rep.r), (0.0, 0.0));
        let x = 0.3;
        let three = Measure::uniform_atoms(&[-x, 0.0, x]).unwrap();
        let rep = ram_quantities(&three, &three, &rule()).unwrap();
        assert!((rep.a - 8.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn support_and_symmetry_checked() {
        let wide = Measure::uniform(-0.6, 0.6).unwrap();
        let skew = Measure::uniform(0.0, 0.2).unwrap();
        let u = Measure::uniform(-0.5, 0.5).unwrap();
        assert!(ram_quantities(&wide, &u, &rule()).is_err());
        assert!(ram_quantities(&u, &skew, &rule()).is_err());
    }

    #[test]
    fn fosd_examples() {
        let u2 = Measure::uniform(-0.5, 0.5).unwrap();
        let u4 = Measure::uniform(-0.25, 0.25).unwrap();
        assert!(fosd_abs(&u2, &u4));
        assert!(!fosd_abs(&u4, &u2));
        assert!(fosd_abs(&u4, &u4));
        let (g, l) = (0.3, 0.2);
        let pair = Measure::uniform_atoms(&[-g, g]).unwrap();
        assert!(fosd_abs(&pair, &Measure::uniform(-l, l).unwrap()));
        assert!(fosd_abs(&pair, &Measure::uniform(-g, g).unwrap()));
    }

    #[test]
    fn ribbon_examples() {
        let r = check_ribbon(1.0, 1.0, 0.0).unwrap();
        assert!(r.cond1);
        let r = check_ribbon(1.0, 2.0, 0.0).unwrap();
        assert!(!r.cond1 && r.cond2);
        let r = check_ribbon(0.5, 2.0, 0.2).unwrap();
        assert!(r.cond_recip);
        assert!(!check_ribbon(0.5, 2.0, 0.2 + 1e-9).unwrap().cond_recip);
        assert!(check_ribbon(2.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn t_functional_examples() {
        let pair = Measure::uniform_atoms(&[-0.5, 0.5]).unwrap();
        assert!((t_functional(&pair, &rule()).unwrap() - 0.25).abs() < 1e-15);
        let d0 = Measure::point(0.0).unwrap();
        assert!((t_functional(&d0, &rule()).unwrap() - 0.125).abs() < 1e-15);
        let u = Measure::uniform(-0.5, 0.5).unwrap();
        assert!((t_functional(&u, &rule()).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn a_bound_values() {
        assert!((discrete_a_bound(3) - 8.0 / 27.0).abs() < 1e-16);
        assert_eq!(discrete_a_bound(2), 0.25);
        assert_eq!(discrete_a_bound(1), 0.0);
    }

    #[test]
    fn h_sign_pattern() {
        let t = 0.5;
        assert!((contraction_h(t, 0.0) - 2.0).abs() < 1e-15);
        assert!((contraction_h(t, 1.0) + 1.0 + t).abs() < 1e-15);
        for c in [0.1, 0.5, 0.9] {
            assert!((contraction_h(1.0, c) - (c * c - 3.0)).abs() < 1e-15);
        }
        assert!((contraction_x0(2.0 / 3.0) - 1.0).abs() < 1e-15);
        let c0 = critical_c0(t, 1e-12).unwrap();
        assert!((c0 - 0.21817342238316).abs() < 1e-12);
        assert!(critical_c0(1.0, 1e-12).is_err());
    }
}
