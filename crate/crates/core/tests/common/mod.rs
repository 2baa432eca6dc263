//! Test-only oracles and generators.
#![allow(dead_code)]

use cbm_core::{BiasKernel, CbmSpec, Measure, Part};
use rand::Rng;

/// Polynomial in `z`, lowest degree first.
#[derive(Debug, Clone)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    fn add_scaled(&mut self, other: &Poly, k: f64) {
        if self.0.len() < other.0.len() {
            self.0.resize(other.0.len(), 0.0);
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += k * b;
        }
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    fn reflect(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .map(|(i, c)| if i % 2 == 1 { -c } else { *c })
                .collect(),
        )
    }

    fn eval(&self, z: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }

    /// `int p dmu`, exact for atoms, uniform pieces and centred power tails.
    pub fn integrate(&self, mu: &Measure) -> f64 {
        let mut total = 0.0;
        for part in mu.parts() {
            total += match *part {
                Part::Atom { loc, mass } => mass * self.eval(loc),
                _ => mass_moments(part, self.0.len())
                    .iter()
                    .zip(&self.0)
                    .map(|(m, c)| m * c)
                    .sum(),
            };
        }
        total
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `int x^j dpart` for `j < count`.
fn mass_moments(part: &Part, count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| match *part {
            Part::Atom { loc, mass } => mass * loc.powi(j as i32),
            Part::Uniform { lo, hi, mass } => {
                mass * (hi.powi(j as i32 + 1) - lo.powi(j as i32 + 1))
                    / ((j as f64 + 1.0) * (hi - lo))
            }
            Part::PowerTail {
                center,
                t,
                half_width,
                mass,
            } => {
                assert_eq!(center, 0.0);
                if j % 2 == 1 {
                    0.0
                } else {
                    mass * half_width.powi(j as i32) * t / (t + j as f64)
                }
            }
            Part::SymmetricBeta { .. } => panic!("no polynomial oracle for beta parts"),
        })
        .collect()
}

fn raw_moments(m: &Measure, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    for p in m.parts() {
        for (o, v) in out.iter_mut().zip(mass_moments(p, count)) {
            *o += v;
        }
    }
    out
}

/// `E_{rho^z}[t^j]` for `j <= deg`, as polynomials in `z`.
fn kernel_moment_polys(k: &BiasKernel, deg: usize) -> Vec<Poly> {
    match k {
        BiasKernel::Constant(rho) => raw_moments(rho, deg + 1)
            .into_iter()
            .map(Poly::constant)
            .collect(),
        BiasKernel::Additive(rho) => {
            let ey = raw_moments(rho, deg + 1);
            (0..=deg)
                .map(|j| Poly((0..=j).map(|i| binom(j, i) * ey[j - i]).collect()))
                .collect()
        }
        BiasKernel::Multiplicative(rho) => {
            let ey = raw_moments(rho, deg + 1);
            (0..=deg)
                .map(|j| {
                    let mut c = vec![0.0; j + 1];
                    c[j] = ey[j];
                    Poly(c)
                })
                .collect()
        }
        BiasKernel::Reflected(inner) => kernel_moment_polys(inner, deg)
            .iter()
            .map(Poly::reflect)
            .collect(),
        other => panic!("no polynomial oracle for {other:?}"),
    }
}

/// Coefficients of `((1+t)/2)^k ((1-t)/2)^(n-k)` in `t`.
fn vote_poly(n: usize, k: usize) -> Vec<f64> {
    let mut p = vec![1.0];
    for i in 0..n {
        let sign = if i < k { 1.0 } else { -1.0 };
        let mut next = vec![0.0; p.len() + 1];
        for (d, c) in p.iter().enumerate() {
            next[d] += 0.5 * c;
            next[d + 1] += 0.5 * sign * c;
        }
        p = next;
    }
    p
}

/// `A_N`, `b_N`, `s_N` by summing over all `2^N` vote configurations with
/// configuration probabilities computed by exact polynomial integration.
pub fn enumerate_moments(spec: &CbmSpec, sizes: &[u64]) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let m = spec.groups();
    let total: usize = sizes.iter().map(|&n| n as usize).sum();
    assert!(total <= 16, "enumeration is exponential");
    // group_poly[l][k]: P(a specific configuration with k ayes in group l | z)
    let group_poly: Vec<Vec<Poly>> = (0..m)
        .map(|l| {
            let n = sizes[l] as usize;
            let moments = kernel_moment_polys(spec.kernel(l), n);
            (0..=n)
                .map(|k| {
                    let mut p = Poly(vec![0.0]);
                    for (j, c) in vote_poly(n, k).iter().enumerate() {
                        p.add_scaled(&moments[j], *c);
                    }
                    p
                })
                .collect()
        })
        .collect();

    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    let mut s = 0.0;
    let nf = total as f64;
    for config in 0u64..(1 << total) {
        let mut offset = 0;
        let mut margins = vec![0i64; m];
        let mut joint = Poly::constant(1.0);
        for l in 0..m {
            let n = sizes[l] as usize;
            let ayes = (0..n).filter(|i| config >> (offset + i) & 1 == 1).count();
            offset += n;
            margins[l] = 2 * ayes as i64 - n as i64;
            joint = joint.mul(&group_poly[l][ayes]);
        }
        let p = joint.integrate(spec.mu());
        let chi: Vec<f64> = margins
            .iter()
            .map(|&x| if x > 0 { 1.0 } else { -1.0 })
            .collect();
        let share = margins.iter().sum::<i64>() as f64 / nf;
        for l in 0..m {
            for n in 0..m {
                a[l][n] += p * chi[l] * chi[n];
            }
            b[l] += p * share * chi[l];
        }
        s += p * share * share;
    }
    (a, b, s)
}

pub fn symmetric_atoms<R: Rng>(rng: &mut R, pairs: usize, bound: f64, with_zero: bool) -> Measure {
    let mut atoms = Vec::new();
    let mut total = 0.0;
    for _ in 0..pairs {
        let x = rng.random_range(0.01..bound);
        let w = rng.random_range(0.1..1.0);
        atoms.push((x, w));
        atoms.push((-x, w));
        total += 2.0 * w;
    }
    if with_zero {
        let w = rng.random_range(0.1..1.0);
        atoms.push((0.0, w));
        total += w;
    }
    let atoms: Vec<(f64, f64)> = atoms.into_iter().map(|(x, w)| (x, w / total)).collect();
    Measure::discrete(&atoms).unwrap()
}

/// A random symmetric measure on `[-bound, bound]`.
pub fn symmetric_measure<R: Rng>(rng: &mut R, bound: f64) -> Measure {
    match rng.random_range(0..4) {
        0 => {
            let pairs = rng.random_range(1..4);
            let zero = rng.random_bool(0.5);
            symmetric_atoms(rng, pairs, bound, zero)
        }
        1 => {
            let g = rng.random_range(0.05..bound);
            Measure::uniform(-g, g).unwrap()
        }
        2 => {
            let w = rng.random_range(0.1..0.9);
            let g = rng.random_range(0.05..bound);
            Measure::mixture(&[
                (w, Measure::point(0.0).unwrap()),
                (1.0 - w, Measure::uniform(-g, g).unwrap()),
            ])
            .unwrap()
        }
        _ => {
            let h = rng.random_range(0.05..bound);
            Measure::power_tail(0.5, h).unwrap()
        }
    }
}

/// A random (not necessarily symmetric) measure on `[-1, 1]`.
pub fn any_measure<R: Rng>(rng: &mut R) -> Measure {
    if rng.random_bool(0.5) {
        let lo = rng.random_range(-1.0..0.9);
        let hi = rng.random_range(lo + 0.05..1.0);
        Measure::uniform(lo, hi).unwrap()
    } else {
        let n = rng.random_range(1..4);
        let atoms: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Measure::uniform_atoms(&atoms).unwrap()
    }
}

pub fn random_kernel<R: Rng>(rng: &mut R) -> BiasKernel {
    let k = match rng.random_range(0..3) {
        0 => BiasKernel::constant(symmetric_measure(rng, 0.9)).unwrap(),
        1 => BiasKernel::additive(symmetric_measure(rng, 0.5)).unwrap(),
        _ => BiasKernel::multiplicative(any_measure(rng)).unwrap(),
    };
    if rng.random_bool(0.2) {
        BiasKernel::reflected(k)
    } else {
        k
    }
}

/// A random model with `total` voters or fewer, and matching sizes.
pub fn random_spec<R: Rng>(rng: &mut R, max_total: u64) -> (CbmSpec, Vec<u64>) {
    let m = rng.random_range(1..=4usize);
    let mut sizes = vec![1u64; m];
    let extra = rng.random_range(0..=(max_total - m as u64));
    for _ in 0..extra {
        let l = rng.random_range(0..m);
        sizes[l] += 1;
    }
    let mu = symmetric_measure(rng, 0.4);
    let kernels = if rng.random_bool(0.5) {
        vec![random_kernel(rng)]
    } else {
        (0..m).map(|_| random_kernel(rng)).collect()
    };
    let spec = CbmSpec::with_sizes(mu, kernels, &sizes).unwrap();
    (spec, sizes)
}

pub fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
