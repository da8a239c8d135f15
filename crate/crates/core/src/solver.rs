//! Direct solver for the convex surrogate subproblems.
//!
//! Every subproblem has the form
//!
//! ```text
//!     maximize    2 Re( Σ_b c_bᴴ x_b )
//!     subject to  Σ_{b ∈ g} q_b ‖x_b‖² ≤ P_g        for every power group g
//!                 Re( Σ_b a_bᴴ x_b ) + const ≥ t    (optional)
//! ```
//!
//! with every block in exactly one power group. Stationarity gives
//! `x_b = (c_b + ν a_b) / (μ_g q_b)`, so for a fixed `ν` each group is a
//! matched filter on `d_b = c_b + ν a_b` scaled to its power boundary. The
//! linear constraint value is nondecreasing in `ν`; the solver bisects on
//! the bounded reparametrization `τ = ν / (1 + ν)`, i.e. on the direction
//! `d = (1 - τ) c + τ a`, which reaches the pure sensing direction at
//! `τ = 1` without growing an unbounded bracket.

use crate::error::{Error, Result};
use crate::{CVector, C64};

/// One weighted power constraint `Σ q_b ‖x_b‖² ≤ bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerGroup {
    /// `(block index, weight q_b)` pairs.
    pub members: Vec<(usize, f64)>,
    pub bound: f64,
}

/// `Re(Σ_b a_bᴴ x_b) + constant ≥ bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub a: Vec<CVector>,
    pub constant: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSpec {
    /// Objective vectors `c_b`; their lengths define the blocks.
    pub objective: Vec<CVector>,
    pub groups: Vec<PowerGroup>,
    pub linear: Option<LinearConstraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// The linear constraint cannot be met inside the power constraints.
    Infeasible,
    /// The objective vanishes identically; any feasible point is optimal.
    Degenerate,
}

/// Lagrange multipliers in Fritz-John form: the Lagrangian gradient of block
/// `b` is `objective · c_b + nu · a_b - mu_g · q_b · x_b`. The solver reports
/// them normalized so that `objective + nu = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub objective: f64,
    pub nu: f64,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub x: Vec<CVector>,
    pub objective: f64,
    pub status: SolveStatus,
    pub kkt_residual: f64,
    pub multipliers: Multipliers,
    /// Power groups whose constraint holds with equality.
    pub active_groups: Vec<usize>,
    pub linear_active: bool,
}

impl SubproblemSpec {
    pub fn num_blocks(&self) -> usize {
        self.objective.len()
    }

    /// Group index owning each block.
    fn owners(&self) -> Result<Vec<(usize, f64)>> {
        let mut owner: Vec<Option<(usize, f64)>> = vec![None; self.num_blocks()];
        for (g, group) in self.groups.iter().enumerate() {
            if !(group.bound.is_finite() && group.bound > 0.0) {
                return Err(invalid(format!("group {g} has non-positive bound {}", group.bound)));
            }
            for &(b, q) in &group.members {
                if b >= owner.len() {
                    return Err(invalid(format!("group {g} references missing block {b}")));
                }
                if !(q.is_finite() && q >= 0.0) {
                    return Err(invalid(format!("block {b} has invalid weight {q}")));
                }
                if owner[b].replace((g, q)).is_some() {
                    return Err(invalid(format!("block {b} belongs to more than one group")));
                }
            }
        }
        owner
            .into_iter()
            .enumerate()
            .map(|(b, o)| o.ok_or_else(|| invalid(format!("block {b} belongs to no power group"))))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let owners = self.owners()?;
        if let Some(lin) = &self.linear {
            if lin.a.len() != self.num_blocks() {
                return Err(invalid("linear constraint block count mismatch".into()));
            }
            if !(lin.constant.is_finite() && lin.bound.is_finite()) {
                return Err(invalid("linear constraint must be finite".into()));
            }
            for (b, (a, c)) in lin.a.iter().zip(&self.objective).enumerate() {
                if a.len() != c.len() {
                    return Err(invalid(format!("block {b}: linear vector has wrong length")));
                }
            }
        }
        for (b, &(_, q)) in owners.iter().enumerate() {
            let a_zero = self.linear.as_ref().is_none_or(|l| is_zero(&l.a[b]));
            if q == 0.0 && !(is_zero(&self.objective[b]) && a_zero) {
                return Err(invalid(format!("block {b} has zero power weight but enters the problem")));
            }
        }
        Ok(())
    }

    /// `Re(Σ aᴴ x) + constant`, or `None` without a linear constraint.
    pub fn linear_value(&self, x: &[CVector]) -> Option<f64> {
        self.linear.as_ref().map(|l| l.constant + re_inner(&l.a, x))
    }

    pub fn objective_value(&self, x: &[CVector]) -> f64 {
        2.0 * re_inner(&self.objective, x)
    }

    /// Largest relative constraint violation of `x` (0 when feasible).
    pub fn feasibility_violation(&self, x: &[CVector]) -> f64 {
        let mut worst: f64 = 0.0;
        for g in &self.groups {
            let used = group_power(g, x);
            worst = worst.max((used - g.bound) / g.bound);
        }
        if let Some(l) = &self.linear {
            let v = l.constant + re_inner(&l.a, x);
            worst = worst.max((l.bound - v) / l.bound.abs().max(1.0));
        }
        worst.max(0.0)
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidSubproblem(msg)
}

fn is_zero(v: &CVector) -> bool {
    v.iter().all(|z| *z == C64::new(0.0, 0.0))
}

fn re_inner(a: &[CVector], x: &[CVector]) -> f64 {
    a.iter().zip(x).map(|(a, x)| a.dotc(x).re).sum()
}

fn group_power(g: &PowerGroup, x: &[CVector]) -> f64 {
    g.members.iter().map(|&(b, q)| q * x[b].norm_squared()).sum()
}

/// Maximizes `Re(Σ dᴴ x)` over one power group, writing into `x`.
/// Returns the multiplier `μ` for the unnormalized direction.
fn matched_filter(group: &PowerGroup, d: &[CVector], x: &mut [CVector]) -> f64 {
    let spread: f64 = group
        .members
        .iter()
        .filter(|&&(_, q)| q > 0.0)
        .map(|&(b, q)| d[b].norm_squared() / q)
        .sum();
    if spread == 0.0 {
        for &(b, _) in &group.members {
            x[b].fill(C64::new(0.0, 0.0));
        }
        return 0.0;
    }
    let mu = (spread / group.bound).sqrt();
    for &(b, q) in &group.members {
        if q > 0.0 {
            x[b] = &d[b] / C64::from(mu * q);
        } else {
            x[b].fill(C64::new(0.0, 0.0));
        }
    }
    mu
}

/// Largest `Re(Σ aᴴ x)` achievable inside one power group.
fn group_reach(group: &PowerGroup, a: &[CVector]) -> f64 {
    let spread: f64 = group
        .members
        .iter()
        .filter(|&&(_, q)| q > 0.0)
        .map(|&(b, q)| a[b].norm_squared() / q)
        .sum();
    (group.bound * spread).sqrt()
}

/// Largest value of the linear constraint's left-hand side over the power
/// constraints: `const + Σ_g √(P_g Σ_b ‖a_b‖²/q_b)`.
pub fn max_linear_value(spec: &SubproblemSpec) -> Option<f64> {
    spec.linear
        .as_ref()
        .map(|l| l.constant + spec.groups.iter().map(|g| group_reach(g, &l.a)).sum::<f64>())
}

/// Solves the subproblem to global optimality.
pub fn solve(spec: &SubproblemSpec) -> Result<SolverReport> {
    spec.validate()?;
    let blocks = spec.num_blocks();
    let mut x: Vec<CVector> = spec.objective.iter().map(|c| CVector::zeros(c.len())).collect();
    let mut mu = vec![0.0; spec.groups.len()];
    let c = &spec.objective;
    let zero_groups: Vec<bool> = spec
        .groups
        .iter()
        .map(|g| g.members.iter().all(|&(b, _)| is_zero(&c[b])))
        .collect();
    let all_zero = zero_groups.iter().all(|&z| z);

    let Some(lin) = &spec.linear else {
        for (g, group) in spec.groups.iter().enumerate() {
            mu[g] = matched_filter(group, c, &mut x);
        }
        let status = if all_zero { SolveStatus::Degenerate } else { SolveStatus::Optimal };
        return Ok(finish(spec, x, Multipliers { objective: 1.0, nu: 0.0, mu }, status));
    };

    let reach: Vec<f64> = spec.groups.iter().map(|g| group_reach(g, &lin.a)).collect();
    let h_max = lin.constant + reach.iter().sum::<f64>();
    let scale = lin.bound.abs().max(lin.constant.abs()).max(1.0);
    if h_max < lin.bound - 1e-12 * scale {
        // Report the point closest to feasibility: the pure sensing direction.
        for (g, group) in spec.groups.iter().enumerate() {
            mu[g] = matched_filter(group, &lin.a, &mut x);
        }
        return Ok(finish(spec, x, Multipliers { objective: 0.0, nu: 1.0, mu }, SolveStatus::Infeasible));
    }

    // Unconstrained optimum of the groups with a nonzero objective.
    for (g, group) in spec.groups.iter().enumerate() {
        if !zero_groups[g] {
            mu[g] = matched_filter(group, c, &mut x);
        }
    }
    let h_free = lin.constant + re_inner(&lin.a, &x);
    let status = if all_zero { SolveStatus::Degenerate } else { SolveStatus::Optimal };
    if h_free >= lin.bound {
        return Ok(finish(spec, x, Multipliers { objective: 1.0, nu: 0.0, mu }, status));
    }

    // Groups without objective are free to help the linear constraint; use
    // the smallest share of their reach that closes the gap.
    let zero_reach: f64 = (0..spec.groups.len()).filter(|&g| zero_groups[g]).map(|g| reach[g]).sum();
    let mut sensing = x.clone();
    for (g, group) in spec.groups.iter().enumerate() {
        if zero_groups[g] {
            matched_filter(group, &lin.a, &mut sensing);
        }
    }
    if zero_reach > 0.0 && h_free + zero_reach >= lin.bound {
        let share = ((lin.bound - h_free) / zero_reach).clamp(0.0, 1.0);
        for (g, group) in spec.groups.iter().enumerate() {
            if zero_groups[g] {
                for &(b, _) in &group.members {
                    x[b] = &sensing[b] * C64::from(share);
                }
            }
        }
        return Ok(finish(spec, x, Multipliers { objective: 1.0, nu: 0.0, mu }, status));
    }

    // Linear constraint active: bisect on τ for the groups with objective.
    let direction = |tau: f64| -> Vec<CVector> {
        (0..blocks).map(|b| &c[b] * C64::from(1.0 - tau) + &lin.a[b] * C64::from(tau)).collect()
    };
    let evaluate = |tau: f64, x: &mut Vec<CVector>, mu: &mut Vec<f64>| -> f64 {
        let d = direction(tau);
        for (g, group) in spec.groups.iter().enumerate() {
            mu[g] = matched_filter(group, &d, x);
        }
        lin.constant + re_inner(&lin.a, x)
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if evaluate(mid, &mut x, &mut mu) >= lin.bound {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let value = evaluate(hi, &mut x, &mut mu);
    let tau = if value >= lin.bound { hi } else { 1.0 };
    if tau == 1.0 {
        evaluate(1.0, &mut x, &mut mu);
    }
    let multipliers = Multipliers { objective: 1.0 - tau, nu: tau, mu };
    Ok(finish(spec, x, multipliers, status))
}

fn finish(spec: &SubproblemSpec, x: Vec<CVector>, multipliers: Multipliers, status: SolveStatus) -> SolverReport {
    let kkt = kkt_residual(spec, &x, &multipliers);
    let active_groups = spec
        .groups
        .iter()
        .enumerate()
        .filter(|(_, g)| (group_power(g, &x) - g.bound).abs() <= 1e-9 * g.bound)
        .map(|(i, _)| i)
        .collect();
    let linear_active = spec.linear.as_ref().is_some_and(|l| {
        let v = l.constant + re_inner(&l.a, &x);
        (v - l.bound).abs() <= 1e-9 * l.bound.abs().max(1.0)
    });
    SolverReport {
        objective: spec.objective_value(&x),
        x,
        status,
        kkt_residual: kkt,
        multipliers,
        active_groups,
        linear_active,
    }
}

/// KKT residual of a candidate point: the largest Lagrangian gradient norm
/// over blocks plus primal, dual and complementary-slackness violations.
pub fn kkt_residual(spec: &SubproblemSpec, x: &[CVector], multipliers: &Multipliers) -> f64 {
    let Ok(owners) = spec.owners() else {
        return f64::INFINITY;
    };
    let nu = if spec.linear.is_some() { multipliers.nu } else { 0.0 };
    let mut grad: f64 = 0.0;
    for (b, &(g, q)) in owners.iter().enumerate() {
        let mut r = &spec.objective[b] * C64::from(multipliers.objective)
            - &x[b] * C64::from(multipliers.mu[g] * q);
        if let Some(l) = &spec.linear {
            r += &l.a[b] * C64::from(nu);
        }
        grad = grad.max(r.norm());
    }
    let mut slack_terms = 0.0;
    for (g, group) in spec.groups.iter().enumerate() {
        let slack = group.bound - group_power(group, x);
        slack_terms += (-slack).max(0.0) + (multipliers.mu[g] * slack).abs() + (-multipliers.mu[g]).max(0.0);
    }
    if let Some(l) = &spec.linear {
        let slack = l.constant + re_inner(&l.a, x) - l.bound;
        slack_terms += (-slack).max(0.0) + (nu * slack).abs() + (-nu).max(0.0);
    }
    grad + slack_terms
}
