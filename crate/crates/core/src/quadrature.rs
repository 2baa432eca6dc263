//! Averages `<phi> = int phi(z) mu(dz)` over [`Measure`]s.
//!
//! Atoms are summed exactly. Each continuous component is cut at 0, at its
//! own kinks and at caller-supplied breakpoints, and every piece gets a
//! Gauss-Legendre rule in the component's natural coordinate: `x` for
//! uniform pieces, the quantile variable for power tails with `t < 1`
//! (which turns the singular `|x|^{t-1}` density into a constant), and
//! `(1 +- x)^k` for beta laws with shape below 1.

use statrs::function::gamma::ln_gamma;

use crate::error::{CbmError, Result};
use crate::measures::{sort_dedup, IntervalQuery, Measure, Part};

pub const DEFAULT_ORDER: usize = 64;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::new(DEFAULT_ORDER).expect("default order is valid")
    }
}

impl QuadratureRule {
    pub fn new(order: usize) -> Result<Self> {
        if !(2..=1024).contains(&order) {
            return Err(CbmError::Config {
                field: "quad_order".into(),
                message: format!("quadrature order must be in 2..=1024, got {order}"),
            });
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi's initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(QuadratureRule {
            order,
            nodes,
            weights,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    /// `int_a^b f(x) dx`
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A weighted point set standing in for a measure restricted to a domain.
/// Atoms appear with their exact mass.
pub fn discretize(
    m: &Measure,
    rule: &QuadratureRule,
    breaks: &[f64],
    domain: &IntervalQuery,
) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for part in m.parts() {
        match *part {
            Part::Atom { loc, mass } => {
                if domain.contains(loc) {
                    out.push((loc, mass));
                }
            }
            Part::Uniform { lo, hi, mass } => {
                let density = mass / (hi - lo);
                for (a, b) in pieces(lo, hi, &[], breaks, domain) {
                    out.extend(rule.mapped(a, b).map(|(x, w)| (x, w * density)));
                }
            }
            Part::PowerTail {
                center: c,
                t,
                half_width: h,
                mass,
            } => {
                for (a, b) in pieces(c - h, c + h, &[c], breaks, domain) {
                    let right = a >= c;
                    let sign = if right { 1.0 } else { -1.0 };
                    let (y1, y2) = if right {
                        (a - c, b - c)
                    } else {
                        (c - b, c - a)
                    };
                    let (y1, y2) = (y1.clamp(0.0, h), y2.clamp(0.0, h));
                    if t < 1.0 {
                        // quantile variable u = (y / h)^t flattens the density
                        let (u1, u2) = ((y1 / h).powf(t), (y2 / h).powf(t));
                        out.extend(
                            rule.mapped(u1, u2)
                                .map(|(u, w)| (c + sign * h * u.powf(1.0 / t), 0.5 * mass * w)),
                        );
                    } else {
                        let norm = 0.5 * mass * t / h.powf(t);
                        out.extend(
                            rule.mapped(y1, y2)
                                .map(|(y, w)| (c + sign * y, norm * w * y.powf(t - 1.0))),
                        );
                    }
                }
            }
            Part::SymmetricBeta { shape: k, mass } => {
                let log_c = ln_gamma(2.0 * k)
                    - 2.0 * ln_gamma(k)
                    - (2.0 * k - 1.0) * std::f64::consts::LN_2;
                let scale = mass * log_c.exp() / k;
                for (a, b) in pieces(-1.0, 1.0, &[0.0], breaks, domain) {
                    if k >= 1.0 {
                        let norm = scale * k;
                        out.extend(
                            rule.mapped(a, b).map(|(x, w)| {
                                (x, norm * w * ((1.0 - x) * (1.0 + x)).powf(k - 1.0))
                            }),
                        );
                    } else if b <= 0.0 {
                        // y = (1 + x)^k
                        let (y1, y2) = ((1.0 + a).max(0.0).powf(k), (1.0 + b).powf(k));
                        out.extend(rule.mapped(y1, y2).map(|(y, w)| {
                            let x = y.powf(1.0 / k) - 1.0;
                            (x, scale * w * (1.0 - x).powf(k - 1.0))
                        }));
                    } else {
                        // y = (1 - x)^k
                        let (y1, y2) = ((1.0 - b).max(0.0).powf(k), (1.0 - a).powf(k));
                        out.extend(rule.mapped(y1, y2).map(|(y, w)| {
                            let x = 1.0 - y.powf(1.0 / k);
                            (x, scale * w * (1.0 + x).powf(k - 1.0))
                        }));
                    }
                }
            }
        }
    }
    out
}

/// Sub-intervals of `[lo, hi] ∩ domain`, cut at 0, `own` and `breaks`.
fn pieces(
    lo: f64,
    hi: f64,
    own: &[f64],
    breaks: &[f64],
    domain: &IntervalQuery,
) -> Vec<(f64, f64)> {
    let a = lo.max(domain.lo);
    let b = hi.min(domain.hi);
    if !(a < b) {
        return Vec::new();
    }
    let mut cuts = vec![a, b, 0.0];
    cuts.extend_from_slice(own);
    cuts.extend_from_slice(breaks);
    cuts.retain(|&x| x >= a && x <= b);
    sort_dedup(&mut cuts);
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1]))
        .collect()
}

/// `int_domain phi dm`, splitting at `breaks`.
pub fn integrate_over(
    m: &Measure,
    phi: impl Fn(f64) -> f64,
    rule: &QuadratureRule,
    breaks: &[f64],
    domain: &IntervalQuery,
) -> Result<f64> {
    let mut total = 0.0;
    for (x, w) in discretize(m, rule, breaks, domain) {
        let v = phi(x);
        if !v.is_finite() {
            return Err(CbmError::NonFinite { at: x });
        }
        total += w * v;
    }
    Ok(total)
}

/// `<phi> = int phi(z) mu(dz)` for a probability measure `mu`.
pub fn average(mu: &Measure, phi: impl Fn(f64) -> f64, rule: &QuadratureRule) -> Result<f64> {
    average_with_breaks(mu, phi, rule, &[])
}

/// As [`average`], with extra points where `phi` is not smooth.
pub fn average_with_breaks(
    mu: &Measure,
    phi: impl Fn(f64) -> f64,
    rule: &QuadratureRule,
    breaks: &[f64],
) -> Result<f64> {
    mu.require_probability("mu")?;
    integrate_over(mu, phi, rule, breaks, &IntervalQuery::everything())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [2, 3, 7, 64, 65, 128] {
            let r = QuadratureRule::new(n).unwrap();
            let s: f64 = r.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "order {n}: {s}");
            assert!(r.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn rejects_bad_order() {
        assert!(QuadratureRule::new(1).is_err());
        assert!(QuadratureRule::new(5000).is_err());
    }

    #[test]
    fn averages_of_simple_measures() {
        let rule = QuadratureRule::default();
        let g = 0.35;
        let u = Measure::uniform(-g, g).unwrap();
        assert!((average(&u, |z| z * z, &rule).unwrap() - g * g / 3.0).abs() < 1e-15);
        assert!((average(&u, |_| 1.0, &rule).unwrap() - 1.0).abs() < 1e-15);
        let pair = Measure::uniform_atoms(&[-g, g]).unwrap();
        assert_eq!(average(&pair, f64::abs, &rule).unwrap(), g);
    }

    #[test]
    fn power_tail_moments_by_quantile_rule() {
        // E|X|^k = h^k t / (t + k)
        let rule = QuadratureRule::default();
        for t in [0.3, 0.5, 1.0, 2.5] {
            let h = 0.5;
            let m = Measure::power_tail(t, h).unwrap();
            for k in [1.0, 2.0, 3.0] {
                let got = average(&m, |x: f64| x.abs().powf(k), &rule).unwrap();
                let want = h.powf(k) * t / (t + k);
                assert!((got - want).abs() < 1e-9, "t={t} k={k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn beta_weights_integrate_to_mass() {
        let rule = QuadratureRule::default();
        for k in [0.3, 1.0, 4.0] {
            let m = Measure::symmetric_beta(k).unwrap();
            let total = average(&m, |_| 1.0, &rule).unwrap();
            assert!((total - 1.0).abs() < 1e-10, "shape {k}: {total}");
            let m2 = average(&m, |x| x * x, &rule).unwrap();
            assert!((m2 - 1.0 / (2.0 * k + 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn non_finite_is_an_error() {
        let u = Measure::uniform(-0.5, 0.5).unwrap();
        let err = average(&u, |z| 1.0 / (z - z), &QuadratureRule::new(4).unwrap());
        assert!(matches!(err, Err(CbmError::NonFinite { .. })));
    }

    #[test]
    fn sub_probability_average_rejected() {
        let half = Measure::uniform(-0.5, 0.5).unwrap().scaled(0.5).unwrap();
        assert!(average(&half, |_| 1.0, &QuadratureRule::default()).is_err());
    }
}
