//! Moments of the vote statistics for finite group sizes, exact and by
//! Monte Carlo, and the optimal weights they determine.
//!
//! Given the global bias `z` the groups are independent, and given a group
//! bias `t` the number of ayes in a group of `N` is `Binomial(N, (1+t)/2)`.
//! The exact path mixes that binomial law over `rho^z` and then integrates
//! over `mu`; the Monte Carlo path samples the same hierarchy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::asymptotics::CbmSpec;
use crate::error::{CbmError, Result};
use crate::linalg::{dot, SymMatrix};
use crate::measures::{IntervalQuery, Measure, Part};
use crate::quadrature::{discretize, QuadratureRule};

/// Largest group handled by the exact path.
pub const SIZE_LIMIT: u64 = 10_000;
/// Fewest samples accepted by the Monte Carlo path.
pub const MIN_SAMPLES: u64 = 1_000;
/// Independent random streams; fixed so results do not depend on the
/// thread count.
pub const MC_PARTITIONS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

/// `A_N = E[chi chi^T]`, `b_N = E[(S/N) chi]`, `s_N = E[(S/N)^2]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteMoments {
    pub method: Method,
    pub sizes: Vec<u64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr_a: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr_b: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// One realisation of the voting hierarchy.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VoteSample {
    pub z: f64,
    pub t: Vec<f64>,
    /// Voting margins `ayes - nays`.
    pub margins: Vec<i64>,
    /// Council votes; a tie counts as `-1`.
    pub chi: Vec<i8>,
}

impl VoteSample {
    pub fn is_unanimous(&self) -> bool {
        self.chi.windows(2).all(|w| w[0] == w[1])
    }
}

fn check_sizes(spec: &CbmSpec, sizes: &[u64]) -> Result<()> {
    if sizes.len() != spec.groups() {
        return Err(CbmError::Config {
            field: "sizes".into(),
            message: format!(
                "expected {} group sizes, got {}",
                spec.groups(),
                sizes.len()
            ),
        });
    }
    if sizes.contains(&0) {
        return Err(CbmError::Config {
            field: "sizes".into(),
            message: "group sizes must be positive".into(),
        });
    }
    Ok(())
}

/// `P(K = k)` for `K ~ Binomial(n, p)`, `k = 0..=n`.
///
/// Anchored at the mode in log space, extended outwards by the ratio
/// recurrence, and renormalised.
pub fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let len = n as usize + 1;
    let mut pmf = vec![0.0; len];
    if p <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if p >= 1.0 {
        pmf[len - 1] = 1.0;
        return pmf;
    }
    let nf = n as f64;
    let mode = (((nf + 1.0) * p).floor() as usize).min(n as usize);
    let kf = mode as f64;
    let log_anchor = ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0)
        + kf * p.ln()
        + (nf - kf) * (-p).ln_1p();
    pmf[mode] = log_anchor.exp();
    let odds = p / (1.0 - p);
    for k in mode..len - 1 {
        pmf[k + 1] = pmf[k] * (nf - k as f64) / (k as f64 + 1.0) * odds;
    }
    for k in (1..=mode).rev() {
        pmf[k - 1] = pmf[k] * k as f64 / (nf - k as f64 + 1.0) / odds;
    }
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|x| *x /= total);
    pmf
}

/// Conditional expectations for one group given `rho^z`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct GroupStats {
    chi: f64,
    /// `E[S chi] = E|S|`
    abs: f64,
    s: f64,
    s2: f64,
}

/// Law of the number of ayes, `int Binomial(n, (1+t)/2) rho(dt)`.
fn mixed_pmf(rho: &Measure, n: u64, rule: &QuadratureRule) -> Vec<f64> {
    let mut pmf = vec![0.0; n as usize + 1];
    let add = |pmf: &mut Vec<f64>, t: f64, w: f64| {
        for (acc, q) in pmf.iter_mut().zip(binomial_pmf(n, 0.5 * (1.0 + t))) {
            *acc += w * q;
        }
    };
    for part in rho.parts() {
        match *part {
            Part::Atom { loc, mass } => add(&mut pmf, loc, mass),
            Part::Uniform { lo, hi, mass } => {
                let (p1, p2) = (0.5 * (1.0 + lo), 0.5 * (1.0 + hi));
                if (n as usize) < 2 * rule.order() || p2 - p1 < 1e-3 {
                    // the binomial pmf is a polynomial of degree n in t
                    let density = mass / (hi - lo);
                    for (t, w) in rule.mapped(lo, hi) {
                        add(&mut pmf, t, w * density);
                    }
                } else {
                    // int_{p1}^{p2} Bin(k; n, p) dp
                    //   = (P(Bin(n+1, p2) > k) - P(Bin(n+1, p1) > k)) / (n + 1)
                    let upper = |p: f64| {
                        let q = binomial_pmf(n + 1, p);
                        let mut tail = vec![0.0; q.len() + 1];
                        for k in (0..q.len()).rev() {
                            tail[k] = tail[k + 1] + q[k];
                        }
                        tail
                    };
                    let (t2, t1) = (upper(p2), upper(p1));
                    let scale = mass / ((p2 - p1) * (n as f64 + 1.0));
                    for k in 0..pmf.len() {
                        pmf[k] += scale * (t2[k + 1] - t1[k + 1]);
                    }
                }
            }
            _ => {
                let single = Measure::from_parts(vec![part.clone()]).expect("valid part");
                for (t, w) in discretize(&single, rule, &[], &IntervalQuery::everything()) {
                    add(&mut pmf, t, w);
                }
            }
        }
    }
    pmf
}

fn group_stats(rho: &Measure, n: u64, rule: &QuadratureRule) -> GroupStats {
    let pmf = mixed_pmf(rho, n, rule);
    let mut chi = 0.0;
    let mut abs = 0.0;
    for (k, q) in pmf.iter().enumerate() {
        let margin = 2 * k as i64 - n as i64;
        chi += if margin > 0 { *q } else { -*q };
        abs += q * margin.unsigned_abs() as f64;
    }
    let lm = rho.local_moments();
    let nf = n as f64;
    GroupStats {
        chi,
        abs,
        s: nf * lm.m1,
        s2: nf * (1.0 - lm.m2) + nf * nf * lm.m2,
    }
}

/// Exact moments: binomial sums inside each group, products across groups
/// given `z`, Gauss-Legendre over `mu`.
pub fn exact_moments(
    spec: &CbmSpec,
    sizes: &[u64],
    rule: &QuadratureRule,
) -> Result<FiniteMoments> {
    check_sizes(spec, sizes)?;
    if let Some((group, &size)) = sizes.iter().enumerate().find(|(_, &n)| n > SIZE_LIMIT) {
        return Err(CbmError::SizeGuard {
            group,
            size,
            limit: SIZE_LIMIT,
        });
    }
    let m = spec.groups();
    let nodes = spec.z_nodes(rule);
    // groups sharing a kernel and a size share their statistics
    let mut keys: Vec<(usize, u64)> = (0..m)
        .map(|l| (if spec.is_shared() { 0 } else { l }, sizes[l]))
        .collect();
    let group_key: Vec<usize> = {
        let mut uniq = keys.clone();
        uniq.sort_unstable();
        uniq.dedup();
        let idx = keys
            .iter()
            .map(|k| uniq.binary_search(k).expect("present"))
            .collect();
        keys = uniq;
        idx
    };
    let per_node: Vec<Vec<GroupStats>> = nodes
        .par_iter()
        .map(|&(z, _)| {
            keys.iter()
                .map(|&(k, n)| Ok(group_stats(&spec.kernels()[k].local_measure(z)?, n, rule)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let total_n: f64 = sizes.iter().sum::<u64>() as f64;
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    let mut s = 0.0;
    for ((_, w), stats) in nodes.iter().zip(&per_node) {
        let g: Vec<GroupStats> = group_key.iter().map(|&i| stats[i]).collect();
        let sum_s: f64 = g.iter().map(|x| x.s).sum();
        for l in 0..m {
            for n in (l + 1)..m {
                a[l][n] += w * g[l].chi * g[n].chi;
            }
            b[l] += w * (g[l].abs + (sum_s - g[l].s) * g[l].chi);
        }
        let diag: f64 = g.iter().map(|x| x.s2 - x.s * x.s).sum();
        s += w * (diag + sum_s * sum_s);
    }
    for l in 0..m {
        a[l][l] = 1.0;
        for n in 0..l {
            a[l][n] = a[n][l];
        }
        b[l] /= total_n;
    }
    Ok(FiniteMoments {
        method: Method::Exact,
        sizes: sizes.to_vec(),
        a,
        b,
        s: s / (total_n * total_n),
        stderr_a: None,
        stderr_b: None,
        stderr_s: None,
        samples: None,
        seed: None,
    })
}

/// Draws `z`, the group biases, and the group margins into `out`.
pub fn draw_votes<R: rand::Rng + ?Sized>(
    spec: &CbmSpec,
    sizes: &[u64],
    rng: &mut R,
    out: &mut VoteSample,
) -> Result<()> {
    let m = spec.groups();
    out.t.resize(m, 0.0);
    out.margins.resize(m, 0);
    out.chi.resize(m, 0);
    out.z = spec.mu().sample(rng)?;
    for l in 0..m {
        let t = spec.kernel(l).sample_at(out.z, rng)?.clamp(-1.0, 1.0);
        let n = sizes[l];
        let ayes = Binomial::new(n, 0.5 * (1.0 + t))
            .map_err(|e| CbmError::model(format!("binomial sampler: {e}")))?
            .sample(rng) as i64;
        let margin = 2 * ayes - n as i64;
        out.t[l] = t;
        out.margins[l] = margin;
        out.chi[l] = if margin > 0 { 1 } else { -1 };
    }
    Ok(())
}

/// Running sums of each statistic and of its square.
#[derive(Debug, Clone, Default)]
struct Tally {
    n: u64,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Tally {
    fn new(len: usize) -> Self {
        Tally {
            n: 0,
            sum: vec![0.0; len],
            sq: vec![0.0; len],
        }
    }

    fn push(&mut self, xs: &[f64]) {
        self.n += 1;
        for ((s, q), x) in self.sum.iter_mut().zip(&mut self.sq).zip(xs) {
            *s += x;
            *q += x * x;
        }
    }

    fn merge(&mut self, other: &Tally) {
        self.n += other.n;
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sq[i] += other.sq[i];
        }
    }

    fn mean(&self, i: usize) -> f64 {
        self.sum[i] / self.n as f64
    }

    fn stderr(&self, i: usize) -> f64 {
        let n = self.n as f64;
        let mean = self.mean(i);
        let var = ((self.sq[i] - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Runs `samples` draws split over [`MC_PARTITIONS`] seeded streams,
/// feeding each draw to `record`, and merges the tallies in stream order.
fn simulate(
    spec: &CbmSpec,
    sizes: &[u64],
    samples: u64,
    seed: u64,
    width: usize,
    record: impl Fn(&VoteSample, &mut Vec<f64>) + Sync,
) -> Result<Tally> {
    check_sizes(spec, sizes)?;
    if samples < MIN_SAMPLES {
        return Err(CbmError::Config {
            field: "samples".into(),
            message: format!("at least {MIN_SAMPLES} samples are required, got {samples}"),
        });
    }
    let parts: Vec<Tally> = (0..MC_PARTITIONS)
        .into_par_iter()
        .map(|i| {
            let count = samples / MC_PARTITIONS + u64::from(i < samples % MC_PARTITIONS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let mut tally = Tally::new(width);
            let mut draw = VoteSample::default();
            let mut row = vec![0.0; width];
            for _ in 0..count {
                draw_votes(spec, sizes, &mut rng, &mut draw)?;
                record(&draw, &mut row);
                tally.push(&row);
            }
            Ok(tally)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Tally::new(width);
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

/// Monte Carlo estimates of the finite moments with standard errors.
pub fn mc_moments(spec: &CbmSpec, sizes: &[u64], samples: u64, seed: u64) -> Result<FiniteMoments> {
    let m = spec.groups();
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|l| ((l + 1)..m).map(move |n| (l, n)))
        .collect();
    let total_n = sizes.iter().sum::<u64>() as f64;
    let width = pairs.len() + m + 1;
    let tally = simulate(spec, sizes, samples, seed, width, |v, row| {
        for (i, &(l, n)) in pairs.iter().enumerate() {
            row[i] = f64::from(v.chi[l] * v.chi[n]);
        }
        let share = v.margins.iter().sum::<i64>() as f64 / total_n;
        for l in 0..m {
            row[pairs.len() + l] = share * f64::from(v.chi[l]);
        }
        row[width - 1] = share * share;
    })?;
    let mut a = vec![vec![0.0; m]; m];
    let mut se_a = vec![vec![0.0; m]; m];
    for l in 0..m {
        a[l][l] = 1.0;
    }
    for (i, &(l, n)) in pairs.iter().enumerate() {
        a[l][n] = tally.mean(i);
        a[n][l] = a[l][n];
        se_a[l][n] = tally.stderr(i);
        se_a[n][l] = se_a[l][n];
    }
    let off = pairs.len();
    Ok(FiniteMoments {
        method: Method::MonteCarlo,
        sizes: sizes.to_vec(),
        a,
        b: (0..m).map(|l| tally.mean(off + l)).collect(),
        s: tally.mean(width - 1),
        stderr_a: Some(se_a),
        stderr_b: Some((0..m).map(|l| tally.stderr(off + l)).collect()),
        stderr_s: Some(tally.stderr(width - 1)),
        samples: Some(samples),
        seed: Some(seed),
    })
}

/// A Monte Carlo probability with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

/// Probability that every council vote agrees.
pub fn unanimity_probability(
    spec: &CbmSpec,
    sizes: &[u64],
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    if spec.groups() == 1 {
        check_sizes(spec, sizes)?;
        return Ok(Estimate {
            value: 1.0,
            stderr: 0.0,
            samples,
            seed,
        });
    }
    let tally = simulate(spec, sizes, samples, seed, 1, |v, row| {
        row[0] = if v.is_unanimous() { 1.0 } else { 0.0 };
    })?;
    Ok(Estimate {
        value: tally.mean(0),
        stderr: tally.stderr(0),
        samples,
        seed,
    })
}

/// Optimal weights for finite sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteWeights {
    pub weights: Vec<f64>,
    pub normalised: Vec<f64>,
    pub sum_w: f64,
    pub delta_n: f64,
}

fn matrix_of(moments: &FiniteMoments) -> Result<SymMatrix> {
    let m = moments.a.len();
    SymMatrix::new(m, moments.a.iter().flatten().copied().collect())
}

/// `Delta_N(v) = s_N - 2(v, b_N) + (v, A_N v)`.
pub fn finite_deficit(moments: &FiniteMoments, v: &[f64]) -> Result<f64> {
    let a = matrix_of(moments)?;
    Ok(moments.s - 2.0 * dot(v, &moments.b) + a.quadratic_form(v))
}

/// Solves `A_N w = b_N`.
pub fn finite_weights(moments: &FiniteMoments) -> Result<FiniteWeights> {
    let a = matrix_of(moments)?;
    let chol = a.cholesky().map_err(|_| CbmError::NearTight {
        min_eigenvalue: a.eigenvalues()[0],
    })?;
    let weights = chol.solve(&moments.b);
    let sum_w: f64 = weights.iter().sum();
    let normalised = if sum_w > 0.0 {
        weights.iter().map(|x| x / sum_w).collect()
    } else {
        vec![f64::NAN; weights.len()]
    };
    let delta_n = moments.s - 2.0 * dot(&weights, &moments.b) + a.quadratic_form(&weights);
    Ok(FiniteWeights {
        weights,
        normalised,
        sum_w,
        delta_n,
    })
}
