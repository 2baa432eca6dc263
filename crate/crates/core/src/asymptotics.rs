//! Large-population limits: the averaged bias statistics, the limit matrix
//! and its closed-form inverse, the asymptotic optimal weights and the
//! limit democracy deficit.
//!
//! Conventions: weights are scaled so that `sigma = N`, `b_l` is the limit
//! of `E[(S/N) chi_l]`, and `A` has unit diagonal with `a = <d^2>` off it.

use serde::Serialize;

use crate::error::{CbmError, Result};
use crate::kernels::{BiasKernel, KernelMoments};
use crate::linalg::{dot, spd_solve, SymMatrix};
use crate::measures::{IntervalQuery, Measure};
use crate::quadrature::{discretize, integrate_over, QuadratureRule};

/// Models with `1 - a` below this are treated as tightly correlated.
pub const TIGHT_TOL: f64 = 1e-9;
const ALPHA_TOL: f64 = 1e-12;

/// A collective bias model: global bias `mu`, one kernel shared by every
/// group or one per group, and the population shares `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct CbmSpec {
    mu: Measure,
    kernels: Vec<BiasKernel>,
    alpha: Vec<f64>,
}

impl CbmSpec {
    pub fn new(mu: Measure, kernels: Vec<BiasKernel>, alpha: Vec<f64>) -> Result<Self> {
        mu.require_probability("mu")?;
        if !mu.is_symmetric(1e-12) {
            return Err(CbmError::model("mu must be symmetric"));
        }
        if alpha.is_empty() {
            return Err(CbmError::model("at least one group is required"));
        }
        if alpha.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(CbmError::model("population shares must be positive"));
        }
        let total: f64 = alpha.iter().sum();
        if (total - 1.0).abs() > ALPHA_TOL {
            return Err(CbmError::model(format!(
                "population shares sum to {total}, not 1"
            )));
        }
        if kernels.len() != 1 && kernels.len() != alpha.len() {
            return Err(CbmError::model(format!(
                "expected 1 shared kernel or {} per-group kernels, got {}",
                alpha.len(),
                kernels.len()
            )));
        }
        for k in &kernels {
            k.check_against(&mu)?;
        }
        Ok(CbmSpec { mu, kernels, alpha })
    }

    /// Shares proportional to the given group sizes.
    pub fn with_sizes(mu: Measure, kernels: Vec<BiasKernel>, sizes: &[u64]) -> Result<Self> {
        let total: u64 = sizes.iter().sum();
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(CbmError::model("group sizes must be positive"));
        }
        let alpha = sizes.iter().map(|&n| n as f64 / total as f64).collect();
        Self::new(mu, kernels, alpha)
    }

    pub fn mu(&self) -> &Measure {
        &self.mu
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Number of groups `M`.
    pub fn groups(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_shared(&self) -> bool {
        self.kernels.len() == 1
    }

    pub fn kernels(&self) -> &[BiasKernel] {
        &self.kernels
    }

    /// Kernel of group `l`.
    pub fn kernel(&self, l: usize) -> &BiasKernel {
        if self.is_shared() {
            &self.kernels[0]
        } else {
            &self.kernels[l]
        }
    }

    /// Outer quadrature nodes `(z, weight)` for `mu`, split where any
    /// kernel changes shape.
    pub fn z_nodes(&self, rule: &QuadratureRule) -> Vec<(f64, f64)> {
        let mut breaks: Vec<f64> = self
            .kernels
            .iter()
            .flat_map(|k| k.z_breakpoints())
            .collect();
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup();
        discretize(&self.mu, rule, &breaks, &IntervalQuery::everything())
    }

    /// Kernel moments of every distinct kernel at every outer node.
    fn node_moments(&self, rule: &QuadratureRule) -> Result<Vec<(f64, Vec<KernelMoments>)>> {
        self.z_nodes(rule)
            .into_iter()
            .map(|(z, w)| {
                let ms = self
                    .kernels
                    .iter()
                    .map(|k| k.moments_at(z))
                    .collect::<Result<Vec<_>>>()?;
                Ok((w, ms))
            })
            .collect()
    }
}

/// The averaged statistics that determine the limit of a shared-kernel model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticSummary {
    /// `<d^2>`
    pub a: f64,
    /// `<m1 d>`
    pub mean_m1d: f64,
    /// `<om1>`
    pub mean_om1: f64,
    /// `<m2>`
    pub mean_m2: f64,
    /// `<m1^2>`
    pub mean_m1sq: f64,
    /// Limit of `E[(S/N)^2]`.
    pub s: f64,
}

impl AsymptoticSummary {
    /// `b_l = <om1 - m1 d> alpha_l + <m1 d>`.
    pub fn b(&self, alpha: &[f64]) -> Vec<f64> {
        alpha
            .iter()
            .map(|&x| (self.mean_om1 - self.mean_m1d) * x + self.mean_m1d)
            .collect()
    }
}

fn average_moments(nodes: &[(f64, Vec<KernelMoments>)], idx: usize) -> [f64; 5] {
    let mut acc = [0.0; 5];
    for (w, ms) in nodes {
        let m = ms[idx];
        acc[0] += w * m.d * m.d;
        acc[1] += w * m.m1 * m.d;
        acc[2] += w * m.om1;
        acc[3] += w * m.m2;
        acc[4] += w * m.m1 * m.m1;
    }
    acc
}

/// Averages of the kernel statistics for a shared-kernel model.
pub fn summary(spec: &CbmSpec, rule: &QuadratureRule) -> Result<AsymptoticSummary> {
    if !spec.is_shared() {
        return Err(CbmError::Unsupported(
            "per-group kernels have no single summary; use hetero_solve".into(),
        ));
    }
    let nodes = spec.node_moments(rule)?;
    let [a, mean_m1d, mean_om1, mean_m2, mean_m1sq] = average_moments(&nodes, 0);
    if mean_m2 <= 0.0 {
        return Err(CbmError::TrivialBias);
    }
    let sum_a2: f64 = spec.alpha.iter().map(|x| x * x).sum();
    Ok(AsymptoticSummary {
        a: a.clamp(0.0, 1.0),
        mean_m1d,
        mean_om1,
        mean_m2,
        mean_m1sq,
        s: sum_a2 * (mean_m2 - mean_m1sq) + mean_m1sq,
    })
}

/// `M x M` matrix with unit diagonal and `a` elsewhere.
pub fn limit_matrix(a: f64, m: usize) -> Result<SymMatrix> {
    if !(0.0..=1.0).contains(&a) {
        return Err(CbmError::model(format!("a = {a} outside [0, 1]")));
    }
    SymMatrix::from_fn(m, |i, j| if i == j { 1.0 } else { a })
}

/// Closed-form inverse of [`limit_matrix`]: `(1 + (M-2)a)/D` on the
/// diagonal and `-a/D` off it, `D = (1-a)(1+(M-1)a)`.
pub fn invert_limit_matrix(a: f64, m: usize) -> Result<SymMatrix> {
    if !(0.0..=1.0).contains(&a) {
        return Err(CbmError::model(format!("a = {a} outside [0, 1]")));
    }
    if 1.0 - a < TIGHT_TOL {
        return Err(CbmError::TightlyCorrelated {
            one_minus_a: 1.0 - a,
        });
    }
    let mf = m as f64;
    let det = (1.0 - a) * (1.0 + (mf - 1.0) * a);
    let diag = (1.0 + (mf - 2.0) * a) / det;
    let off = -a / det;
    SymMatrix::from_fn(m, |i, j| if i == j { diag } else { off })
}

/// Asymptotically optimal weights `w_l = C1 alpha_l + C2` and the minimal
/// limit deficit `D1 sum alpha^2 + D2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightSolution {
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub a: f64,
    pub weights: Vec<f64>,
    pub normalised: Vec<f64>,
    pub sum_w: f64,
    /// `(<om1> + (M-1)<m1 d>) / (1 + (M-1)a)`
    pub sum_w_closed_form: f64,
    pub delta_inf: f64,
    #[serde(rename = "D1")]
    pub d1: f64,
    #[serde(rename = "D2")]
    pub d2: f64,
    pub tight: bool,
}

pub fn asymptotic_weights(summary: &AsymptoticSummary, alpha: &[f64]) -> Result<WeightSolution> {
    let a = summary.a;
    if 1.0 - a < TIGHT_TOL {
        return Err(CbmError::TightlyCorrelated {
            one_minus_a: 1.0 - a,
        });
    }
    let mf = alpha.len() as f64;
    let (m, r) = (summary.mean_om1, summary.mean_m1d);
    let spread = 1.0 + (mf - 1.0) * a;
    // m >= r holds exactly; only rounding can make the difference negative
    let c1 = (m - r).max(0.0) / (1.0 - a);
    let c2 = (r - a * m) / ((1.0 - a) * spread);
    let weights: Vec<f64> = alpha.iter().map(|&x| c1 * x + c2).collect();
    let sum_w: f64 = weights.iter().sum();
    let normalised = normalise(&weights, sum_w);
    let k = m - r;
    let d1 = (summary.mean_m2 - summary.mean_m1sq) - c1 * k;
    let d2 = summary.mean_m1sq - c1 * r - c2 * (k + mf * r);
    Ok(WeightSolution {
        c1,
        c2,
        a,
        delta_inf: limit_deficit(summary, alpha, &weights),
        normalised,
        sum_w,
        sum_w_closed_form: (m + (mf - 1.0) * r) / spread,
        weights,
        d1,
        d2,
        tight: false,
    })
}

fn normalise(w: &[f64], sum: f64) -> Vec<f64> {
    if sum > 0.0 {
        w.iter().map(|x| x / sum).collect()
    } else {
        vec![f64::NAN; w.len()]
    }
}

/// `Delta_inf(w) = s - 2(w, b) + (w, A w)` with the limit `A` and `b`.
pub fn limit_deficit(summary: &AsymptoticSummary, alpha: &[f64], w: &[f64]) -> f64 {
    let b = summary.b(alpha);
    let sum_w: f64 = w.iter().sum();
    let sq: f64 = w.iter().map(|x| x * x).sum();
    let quad = (1.0 - summary.a) * sq + summary.a * sum_w * sum_w;
    summary.s - 2.0 * dot(w, &b) + quad
}

/// Weights for a tightly correlated model, where only their sum `<om1>` is
/// determined; the equal split is returned.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightSolution {
    pub a: f64,
    pub weights: Vec<f64>,
    pub normalised: Vec<f64>,
    pub sum_w: f64,
    pub delta_inf: f64,
    pub tight: bool,
    pub note: String,
}

pub fn tight_weights(summary: &AsymptoticSummary, alpha: &[f64]) -> TightSolution {
    let mf = alpha.len() as f64;
    let weights = vec![summary.mean_om1 / mf; alpha.len()];
    TightSolution {
        a: summary.a,
        normalised: vec![1.0 / mf; alpha.len()],
        sum_w: summary.mean_om1,
        delta_inf: limit_deficit(summary, alpha, &weights),
        weights,
        tight: true,
        note: "any weights summing to sum_w are asymptotically optimal".into(),
    }
}

/// Outcome of [`solve_weights`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum WeightReport {
    Regular(WeightSolution),
    Tight(TightSolution),
}

/// Checks the model and returns the optimal weights, switching to the
/// tight branch when `1 - a` is below [`TIGHT_TOL`].
pub fn solve_weights(spec: &CbmSpec, rule: &QuadratureRule) -> Result<WeightReport> {
    let s = summary(spec, rule)?;
    if !is_sufficiently_random(spec, rule) {
        return Err(CbmError::NotSufficientlyRandom);
    }
    if 1.0 - s.a < TIGHT_TOL {
        return Ok(WeightReport::Tight(tight_weights(&s, spec.alpha())));
    }
    Ok(WeightReport::Regular(asymptotic_weights(&s, spec.alpha())?))
}

/// `rho^z` is a point mass at `+1` or `-1`.
fn is_unanimous(m: &Measure) -> bool {
    m.atom_mass(1.0) >= 1.0 - 1e-12 || m.atom_mass(-1.0) >= 1.0 - 1e-12
}

/// False iff every group's `rho^z` is a point mass at `+-1` for
/// `mu`-almost every `z`, so that the popular vote is always unanimous.
pub fn is_sufficiently_random(spec: &CbmSpec, rule: &QuadratureRule) -> bool {
    let mut degenerate = 0.0;
    for (z, w) in spec.z_nodes(rule) {
        let all = spec.kernels.iter().all(|k| {
            k.local_measure(z)
                .map(|m| is_unanimous(&m))
                .unwrap_or(false)
        });
        if all {
            degenerate += w;
        }
    }
    degenerate < 1.0 - 1e-12
}

/// `rho^z` is one-sided at every outer node and `1 - a < tol`.
pub fn is_tightly_correlated(spec: &CbmSpec, rule: &QuadratureRule, tol: f64) -> Result<bool> {
    let nodes = spec.node_moments(rule)?;
    let mut a = 0.0;
    for (w, ms) in &nodes {
        let d = ms[0].d;
        if spec.is_shared() && 1.0 - d.abs() >= tol {
            return Ok(false);
        }
        a += w * d * d;
    }
    if !spec.is_shared() {
        return Ok(nodes
            .iter()
            .all(|(_, ms)| ms.iter().all(|m| 1.0 - m.d.abs() < tol)));
    }
    Ok(1.0 - a < tol)
}

/// A function of a voting margin together with its one-sided limits at 0.
pub struct JumpFn<'a> {
    f: Box<dyn Fn(f64) -> f64 + Sync + 'a>,
    left: f64,
    right: f64,
}

impl<'a> JumpFn<'a> {
    pub fn new(f: impl Fn(f64) -> f64 + Sync + 'a, left: f64, right: f64) -> Self {
        JumpFn {
            f: Box::new(f),
            left,
            right,
        }
    }

    /// A function continuous at 0.
    pub fn continuous(f: impl Fn(f64) -> f64 + Sync + 'a) -> Self {
        let v = f(0.0);
        JumpFn::new(f, v, v)
    }

    pub fn sign() -> Self {
        JumpFn::new(|x: f64| if x > 0.0 { 1.0 } else { -1.0 }, -1.0, 1.0)
    }

    pub fn identity() -> Self {
        JumpFn::continuous(|x| x)
    }

    pub fn one() -> Self {
        JumpFn::continuous(|_| 1.0)
    }
}

/// `int prod_l I_z(f_l) mu(dz)` with
/// `I_z(f) = int_{t != 0} f(alpha_l t) rho^z(dt) + (f(0+) + f(0-))/2 rho^z{0}`,
/// the limit of `E[prod_l f_l(S_l / N)]`.
pub fn limit_functional(spec: &CbmSpec, fs: &[JumpFn], rule: &QuadratureRule) -> Result<f64> {
    if fs.len() != spec.groups() {
        return Err(CbmError::model(format!(
            "expected {} functions, got {}",
            spec.groups(),
            fs.len()
        )));
    }
    let neg = IntervalQuery::open(f64::NEG_INFINITY, 0.0);
    let pos = IntervalQuery::open(0.0, f64::INFINITY);
    let mut total = 0.0;
    for (z, w) in spec.z_nodes(rule) {
        let mut prod = 1.0;
        for (l, f) in fs.iter().enumerate() {
            let rho = spec.kernel(l).local_measure(z)?;
            let al = spec.alpha[l];
            let g = |t: f64| (f.f)(al * t);
            let inner = integrate_over(&rho, g, rule, &[], &neg)?
                + integrate_over(&rho, g, rule, &[], &pos)?
                + 0.5 * (f.left + f.right) * rho.atom_mass(0.0);
            prod *= inner;
        }
        total += w * prod;
    }
    Ok(total)
}

/// Limit system for per-group kernels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeteroSolution {
    pub matrix: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub s: f64,
    pub weights: Vec<f64>,
    pub normalised: Vec<f64>,
    pub sum_w: f64,
    pub delta_inf: f64,
}

/// Solves `A w = b` with `A_{ln} = <d_l d_n>` and
/// `b_n = <om1_n - m1_n d_n> alpha_n + sum_l <m1_l d_n> alpha_l`.
pub fn hetero_solve(spec: &CbmSpec, rule: &QuadratureRule) -> Result<HeteroSolution> {
    let m = spec.groups();
    let nodes = spec.node_moments(rule)?;
    let at = |ms: &Vec<KernelMoments>, l: usize| ms[if spec.is_shared() { 0 } else { l }];

    let mut a = vec![0.0; m * m];
    let mut cross = vec![0.0; m * m]; // <m1_l d_n>
    let mut own = vec![0.0; m]; // <om1_n - m1_n d_n>
    let mut var = vec![0.0; m]; // <m2_l - m1_l^2>
    let mut d2 = vec![0.0; m];
    let mut mean_sq = 0.0; // <(sum alpha_l m1_l)^2>
    let mut energy = 0.0;
    for (w, ms) in &nodes {
        let mut mix = 0.0;
        for l in 0..m {
            let ml = at(ms, l);
            for n in 0..m {
                let mn = at(ms, n);
                a[l * m + n] += w * ml.d * mn.d;
                cross[l * m + n] += w * ml.m1 * mn.d;
            }
            own[l] += w * (ml.om1 - ml.m1 * ml.d);
            var[l] += w * (ml.m2 - ml.m1 * ml.m1);
            d2[l] += w * ml.d * ml.d;
            energy += w * ml.m2;
            mix += spec.alpha[l] * ml.m1;
        }
        mean_sq += w * mix * mix;
    }
    if energy <= 0.0 {
        return Err(CbmError::TrivialBias);
    }
    let tight: Vec<usize> = (0..m).filter(|&l| 1.0 - d2[l] < TIGHT_TOL).collect();
    if tight.len() >= 2 {
        return Err(CbmError::DegenerateHetero(format!("groups {tight:?}")));
    }
    for l in 0..m {
        a[l * m + l] = 1.0;
    }
    let matrix = SymMatrix::new(m, a)?;
    let alpha = &spec.alpha;
    let b: Vec<f64> = (0..m)
        .map(|n| own[n] * alpha[n] + (0..m).map(|l| cross[l * m + n] * alpha[l]).sum::<f64>())
        .collect();
    let s = (0..m).map(|l| alpha[l] * alpha[l] * var[l]).sum::<f64>() + mean_sq;
    let weights = spd_solve(&matrix, &b)?;
    let sum_w: f64 = weights.iter().sum();
    let delta_inf = s - 2.0 * dot(&weights, &b) + matrix.quadratic_form(&weights);
    Ok(HeteroSolution {
        matrix: matrix.rows(),
        b,
        s,
        normalised: normalise(&weights, sum_w),
        sum_w,
        delta_inf,
        weights,
    })
}

/// Coefficients of `w_l = D1 alpha_l + D2` for two antagonistic clusters,
/// one using `rho^z` and the other `rho^{-z}`; `eta_own` and `eta_other`
/// are the population shares of the group's cluster and of the other one.
pub fn cluster_coefficients(
    summary: &AsymptoticSummary,
    groups: usize,
    eta_own: f64,
    eta_other: f64,
) -> (f64, f64) {
    let (a, m, r) = (summary.a, summary.mean_om1, summary.mean_m1d);
    let mf = groups as f64;
    let d1 = (m - r).max(0.0) / (1.0 - a);
    let d2 = (r - a * m) * (eta_own - eta_other) / ((1.0 - a) * (1.0 + (mf - 1.0) * a));
    (d1, d2)
}
