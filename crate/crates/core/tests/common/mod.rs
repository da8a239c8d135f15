//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use cfisac_core::solver::{LinearConstraint, PowerGroup, SubproblemSpec};
use cfisac_core::{CVector, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cn<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 2.0
}

pub fn random_cvec<R: Rng>(rng: &mut R, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| cn(rng))
}

/// Subproblem in whitened real coordinates `y = √q x` (one real vector per
/// group), so every power group becomes a plain Euclidean ball.
struct RealForm {
    /// Per group: objective gradient, linear coefficients, radius.
    groups: Vec<(Vec<f64>, Vec<f64>, f64)>,
    /// `Σ ⟨ã, y⟩ ≥ rhs`, or `None`.
    rhs: Option<f64>,
    /// Per group: `(block, offset, len, √q)`.
    layout: Vec<Vec<(usize, usize, usize, f64)>>,
}

fn push_complex(out: &mut Vec<f64>, v: &CVector, scale: f64) {
    for z in v.iter() {
        out.push(z.re * scale);
        out.push(z.im * scale);
    }
}

fn real_form(spec: &SubproblemSpec) -> RealForm {
    let mut groups = Vec::new();
    let mut layout = Vec::new();
    for g in &spec.groups {
        let (mut c, mut a, mut lay) = (Vec::new(), Vec::new(), Vec::new());
        for &(b, q) in &g.members {
            assert!(q > 0.0, "oracle needs positive weights");
            let s = q.sqrt();
            lay.push((b, c.len(), spec.objective[b].len(), s));
            // Re(cᴴx) = ⟨real(c), real(x)⟩ and x = y / √q
            push_complex(&mut c, &spec.objective[b], 1.0 / s);
            match &spec.linear {
                Some(l) => push_complex(&mut a, &l.a[b], 1.0 / s),
                None => a.extend(std::iter::repeat_n(0.0, 2 * spec.objective[b].len())),
            }
        }
        groups.push((c, a, g.bound.sqrt()));
        layout.push(lay);
    }
    RealForm { groups, rhs: spec.linear.as_ref().map(|l| l.bound - l.constant), layout }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn ball(v: &[f64], r: f64) -> Vec<f64> {
    let n = dot(v, v).sqrt();
    if n <= r {
        v.to_vec()
    } else {
        v.iter().map(|x| x * r / n).collect()
    }
}

impl RealForm {
    fn project_balls(&self, v: &[Vec<f64>], lambda: f64) -> Vec<Vec<f64>> {
        v.iter()
            .zip(&self.groups)
            .map(|(vg, (_, a, r))| {
                let shifted: Vec<f64> = vg.iter().zip(a).map(|(x, a)| x + lambda * a).collect();
                ball(&shifted, *r)
            })
            .collect()
    }

    fn lin(&self, y: &[Vec<f64>]) -> f64 {
        y.iter().zip(&self.groups).map(|(yg, (_, a, _))| dot(yg, a)).sum()
    }

    /// Euclidean projection onto balls ∩ half-space: `y(λ) = Π_balls(v + λ a)`
    /// with the smallest `λ ≥ 0` meeting the half-space (bisection).
    fn project(&self, v: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
        let y0 = self.project_balls(v, 0.0);
        let Some(rhs) = self.rhs else { return Some(y0) };
        if self.lin(&y0) >= rhs {
            return Some(y0);
        }
        let mut hi = 1.0;
        while self.lin(&self.project_balls(v, hi)) < rhs {
            hi *= 2.0;
            if hi > 1e12 {
                return None;
            }
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.lin(&self.project_balls(v, mid)) >= rhs {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(self.project_balls(v, hi))
    }

    fn objective(&self, y: &[Vec<f64>]) -> f64 {
        2.0 * y.iter().zip(&self.groups).map(|(yg, (c, _, _))| dot(yg, c)).sum::<f64>()
    }

    fn reach(&self) -> f64 {
        self.groups.iter().map(|(_, a, r)| r * dot(a, a).sqrt()).sum()
    }
}

pub struct OracleSolution {
    pub objective: f64,
    pub x: Vec<CVector>,
}

/// Projected gradient ascent on the whitened problem. `None` when the
/// half-space misses the balls.
pub fn projected_gradient_oracle(spec: &SubproblemSpec, iterations: usize) -> Option<OracleSolution> {
    let rf = real_form(spec);
    if let Some(rhs) = rf.rhs {
        if rf.reach() < rhs {
            return None;
        }
    }
    let grad: Vec<Vec<f64>> = rf.groups.iter().map(|(c, _, _)| c.iter().map(|x| 2.0 * x).collect()).collect();
    let gnorm = grad.iter().map(|g| dot(g, g)).sum::<f64>().sqrt().max(1e-300);
    let radius = rf.groups.iter().map(|(_, _, r)| r * r).sum::<f64>().sqrt();
    let mut y: Vec<Vec<f64>> = rf.groups.iter().map(|(c, _, _)| vec![0.0; c.len()]).collect();
    y = rf.project(&y)?;
    let mut best = (f64::NEG_INFINITY, y.clone());
    for t in 0..iterations {
        let step = 0.05 * radius / gnorm * (1.0 + t as f64 / 50.0);
        let v: Vec<Vec<f64>> =
            y.iter().zip(&grad).map(|(yg, g)| yg.iter().zip(g).map(|(a, b)| a + step * b).collect()).collect();
        y = rf.project(&v)?;
        let f = rf.objective(&y);
        if f > best.0 {
            best = (f, y.clone());
        }
    }
    let mut x: Vec<CVector> = spec.objective.iter().map(|c| CVector::zeros(c.len())).collect();
    for (yg, lay) in best.1.iter().zip(&rf.layout) {
        for &(b, off, len, s) in lay {
            x[b] = CVector::from_fn(len, |i, _| C64::new(yg[off + 2 * i], yg[off + 2 * i + 1]) / s);
        }
    }
    Some(OracleSolution { objective: best.0, x })
}

/// Random subproblem with total real dimension at most `max_real_dim`.
/// `threshold_fraction` places the linear bound relative to the largest
/// reachable value (values above 1 are infeasible).
pub fn random_spec<R: Rng>(rng: &mut R, max_real_dim: usize, threshold_fraction: Option<f64>) -> SubproblemSpec {
    let max_complex = max_real_dim / 2;
    let total = rng.random_range(1..=max_complex);
    let mut dims = Vec::new();
    let mut left = total;
    while left > 0 {
        let d = rng.random_range(1..=left.min(3));
        dims.push(d);
        left -= d;
    }
    let n_groups = rng.random_range(1..=dims.len());
    let mut members: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_groups];
    for b in 0..dims.len() {
        let g = if b < n_groups { b } else { rng.random_range(0..n_groups) };
        members[g].push((b, rng.random_range(0.2..3.0)));
    }
    let groups: Vec<PowerGroup> =
        members.into_iter().map(|m| PowerGroup { members: m, bound: rng.random_range(0.5..4.0) }).collect();
    let objective: Vec<CVector> = dims.iter().map(|&d| random_cvec(rng, d)).collect();
    let linear = threshold_fraction.map(|frac| {
        let a: Vec<CVector> = dims.iter().map(|&d| random_cvec(rng, d)).collect();
        let constant = rng.random_range(-1.0..1.0);
        let reach: f64 = groups
            .iter()
            .map(|g| (g.bound * g.members.iter().map(|&(b, q)| a[b].norm_squared() / q).sum::<f64>()).sqrt())
            .sum();
        LinearConstraint { a, constant, bound: constant + frac * reach }
    });
    SubproblemSpec { objective, groups, linear }
}

/// Wirtinger gradient `∂f/∂x*` by central differences on real and
/// imaginary parts: `(∂f/∂Re + j ∂f/∂Im) / 2`.
pub fn fd_gradient(f: impl Fn(&CVector) -> f64, x: &CVector, h: f64) -> CVector {
    CVector::from_fn(x.len(), |i, _| {
        let mut p = x.clone();
        let mut m = x.clone();
        p[i] += C64::new(h, 0.0);
        m[i] -= C64::new(h, 0.0);
        let d_re = (f(&p) - f(&m)) / (2.0 * h);
        let mut p = x.clone();
        let mut m = x.clone();
        p[i] += C64::new(0.0, h);
        m[i] -= C64::new(0.0, h);
        let d_im = (f(&p) - f(&m)) / (2.0 * h);
        C64::new(d_re, d_im) / 2.0
    })
}

pub fn relative_error(a: &CVector, b: &CVector) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
