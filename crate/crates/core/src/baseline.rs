//! Centralized baseline: the CU holds every channel and runs MM directly on
//! the joint null-space precoders `f̂_{m,k}` (central weights absorbed).
//!
//! Each iteration maximizes the tangent lower bound of `Σ_k P̂_DS,k` in all
//! variables at once, subject to the per-AP budgets and the same linearized
//! sensing constraint as the distributed design. The surrogate's feasible
//! set does not depend on the iterate, so after the first solve the
//! previous point is always feasible and the objective is monotone.

use crate::error::{Error, Result};
use crate::metrics::{self, Method};
use crate::model::{Scenario, SystemConfig};
use crate::solver::{self, LinearConstraint, PowerGroup, SolveStatus, SubproblemSpec};
use crate::twostage::{initial_precoders, IterationRecord, RunRecord, SafeguardEvent, SensingConstraint};
use crate::{CMatrix, CVector, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedState {
    /// Joint null-space precoders `f̂[m][k]`.
    pub f_hat: Vec<Vec<CVector>>,
}

impl CentralizedState {
    pub fn precoders(&self, scenario: &Scenario) -> Vec<CMatrix> {
        self.f_hat
            .iter()
            .enumerate()
            .map(|(m, row)| {
                let cols: Vec<CVector> =
                    row.iter().enumerate().map(|(k, f)| scenario.projection.lift(m, k, f)).collect();
                CMatrix::from_columns(&cols)
            })
            .collect()
    }

    pub fn ap_power(&self, m: usize) -> f64 {
        self.f_hat[m].iter().map(|f| f.norm_squared()).sum()
    }
}

fn signal_power(scenario: &Scenario, f_hat: &[Vec<CVector>]) -> f64 {
    let k_count = scenario.config.k;
    (0..k_count)
        .map(|k| {
            f_hat
                .iter()
                .enumerate()
                .map(|(m, row)| scenario.projection.h_hat[m][k].dotc(&row[k]))
                .sum::<C64>()
                .norm_sqr()
        })
        .sum()
}

/// Joint surrogate around `f_hat`; block index `m * K + k`.
pub fn centralized_spec(scenario: &Scenario, sensing: &SensingConstraint, f_hat: &[Vec<CVector>]) -> SubproblemSpec {
    let cfg = &scenario.config;
    let proj = &scenario.projection;
    let totals: Vec<C64> = (0..cfg.k)
        .map(|k| (0..cfg.m).map(|m| proj.h_hat[m][k].dotc(&f_hat[m][k])).sum())
        .collect();
    let mut objective = Vec::with_capacity(cfg.m * cfg.k);
    let mut a = Vec::with_capacity(cfg.m * cfg.k);
    for m in 0..cfg.m {
        for k in 0..cfg.k {
            objective.push(&proj.h_hat[m][k] * totals[k]);
            a.push(&proj.a_hat[m][k] * sensing.coef[m].conj());
        }
    }
    let groups = (0..cfg.m)
        .map(|m| PowerGroup { members: (0..cfg.k).map(|k| (m * cfg.k + k, 1.0)).collect(), bound: cfg.power[m] })
        .collect();
    SubproblemSpec {
        objective,
        groups,
        linear: Some(LinearConstraint { a, constant: 0.0, bound: sensing.threshold }),
    }
}

/// Runs `n_mm_iter` joint MM iterations from the same random start as the
/// two-stage design. Fronthaul is charged once: full CSI up, precoders down.
pub fn run_centralized_with(scenario: &Scenario, n_mm_iter: usize) -> Result<(CentralizedState, RunRecord)> {
    let cfg = &scenario.config;
    let sensing = SensingConstraint::from_scenario(scenario);
    let mut f_hat = initial_precoders(scenario);
    let fronthaul = metrics::fronthaul_load(Method::Centralized, cfg.m, cfg.k, cfg.ntx, n_mm_iter);

    let evaluate = |f_hat: &[Vec<CVector>]| {
        let state = CentralizedState { f_hat: f_hat.to_vec() };
        let f = state.precoders(scenario);
        let s = metrics::sinr_per_ue(&scenario.channels, &f, &cfg.sigma_k2);
        (s.sum_sinr, metrics::ssnr(&f, &scenario.geometry), state)
    };
    let (initial_sum_sinr, _, _) = evaluate(&f_hat);
    let initial_objective = signal_power(scenario, &f_hat);

    let mut iterations = Vec::with_capacity(n_mm_iter);
    for it in 1..=n_mm_iter {
        let spec = centralized_spec(scenario, &sensing, &f_hat);
        let flat: Vec<CVector> = f_hat.iter().flatten().cloned().collect();
        let stale = spec.feasibility_violation(&flat) > 1e-9;
        let solution = solver::solve(&spec)?;
        if solution.status == SolveStatus::Infeasible {
            return Err(Error::GlobalInfeasible);
        }
        for (b, x) in solution.x.into_iter().enumerate() {
            f_hat[b / cfg.k][b % cfg.k] = x;
        }
        let (sum_sinr, ssnr, state) = evaluate(&f_hat);
        let objective = signal_power(scenario, &f_hat);
        let beta: Vec<Vec<C64>> = (0..cfg.m)
            .map(|m| (0..cfg.k).map(|k| scenario.projection.a_hat[m][k].dotc(&f_hat[m][k])).collect())
            .collect();
        iterations.push(IterationRecord {
            iteration: it,
            sum_sinr,
            ssnr,
            objective_after_local: objective,
            objective,
            local_surrogate: Vec::new(),
            central_surrogate: solution.objective,
            power_slack: (0..cfg.m).map(|m| cfg.power[m] - state.ap_power(m)).collect(),
            sensing_slack: sensing.value(&beta) - sensing.threshold,
            local_status: Vec::new(),
            central_status: solution.status,
            events: if stale { vec![SafeguardEvent::CentralStaleStart] } else { Vec::new() },
            fronthaul,
        });
    }
    let record = RunRecord {
        method: Method::Centralized,
        initial_objective,
        initial_sum_sinr,
        iterations,
        fronthaul: if n_mm_iter > 0 { fronthaul } else { 0 },
    };
    Ok((CentralizedState { f_hat }, record))
}

/// Centralized design on the channel draw of `trial`.
pub fn run_centralized(config: &SystemConfig, trial: u64, n_mm_iter: usize) -> Result<(CentralizedState, RunRecord)> {
    run_centralized_with(&Scenario::build(config, trial)?, n_mm_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_config;
    use crate::twostage::{run_two_stage_with, TwoStageOptions};

    #[test]
    fn fronthaul_is_full_csi_and_precoders() {
        let cfg = default_config();
        let (_, rec) = run_centralized(&cfg, 0, 3).unwrap();
        assert_eq!(rec.fronthaul, 512);
    }

    #[test]
    fn power_and_sensing_hold() {
        let mut cfg = default_config();
        cfg.delta_db = 40.0;
        let sc = Scenario::build(&cfg, 2).unwrap();
        let (state, rec) = run_centralized_with(&sc, 5).unwrap();
        for m in 0..cfg.m {
            assert!(state.ap_power(m) <= cfg.power[m] * (1.0 + 1e-8));
        }
        let ssnr = rec.iterations.last().unwrap().ssnr;
        assert!(ssnr >= cfg.delta_linear(), "{ssnr}");
        // monotone after the first solve
        for w in rec.iterations.windows(2) {
            assert!(w[1].objective >= w[0].objective * (1.0 - 1e-9));
        }
    }

    #[test]
    fn matches_two_stage_in_trivial_case() {
        let mut cfg = default_config();
        cfg.m = 1;
        cfg.k = 1;
        cfg.n = 1;
        cfg.power = vec![1.0];
        cfg.sigma_k2 = vec![1.0];
        cfg.sigma_mn2 = vec![vec![0.1]];
        cfg.theta_deg = vec![10.0];
        cfg.phi_deg = vec![0.0];
        cfg.delta_db = -300.0;
        let sc = Scenario::build(&cfg, 4).unwrap();
        let (_, a) = run_centralized_with(&sc, 3).unwrap();
        let (_, b) = run_two_stage_with(&sc, 3, TwoStageOptions::default()).unwrap();
        assert!((a.final_sum_sinr() - b.final_sum_sinr()).abs() < 1e-9 * a.final_sum_sinr());
    }

    #[test]
    fn unreachable_threshold_is_global_infeasible() {
        let mut cfg = default_config();
        cfg.delta_db = 48.0;
        assert!(matches!(run_centralized(&cfg, 0, 3), Err(Error::GlobalInfeasible)));
    }
}
