//! Two-stage distributed beamforming design.
//!
//! Each transmit AP owns its null-space precoders `ŵ_{m,k}` and the central
//! unit (CU) owns the complex weights `δ_{m,k}`, so that
//! `f_{m,k} = δ_{m,k} P_{m,k} ŵ_{m,k}`. Per iteration:
//!
//! 1. every AP maximizes the tangent lower bound of `Σ_k P̂_DS,k` in its own
//!    `ŵ_{m,·}` under its power budget and the linearized sensing
//!    constraint, then reports `z = ĥᴴŵ`, `g = âᴴŵ` and `‖ŵ‖²` per UE;
//! 2. the CU maximizes the tangent lower bound in all `δ` under the per-AP
//!    budgets and the same sensing constraint, then returns `δ`,
//!    `α = δ z` and `β = δ g`.
//!
//! Each stage may repeat its surrogate step several times against the same
//! message ([`TwoStageOptions::inner_steps`]); this costs no fronthaul.
//!
//! [`AccessPoint`] only sees its own channels and the [`CUReport`];
//! [`CentralUnit`] only sees the [`APReport`]s. The driver [`TwoStage`] is
//! the only place where both sides meet, and only to record metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, Method};
use crate::model::{Scenario, SystemConfig};
use crate::nullspace::NullspaceData;
use crate::rng::{self, Domain};
use crate::solver::{self, LinearConstraint, PowerGroup, SolveStatus, SubproblemSpec};
use crate::{CMatrix, CVector, C64};

/// Relative tolerance used when deciding whether the previous iterate is
/// still feasible for the next surrogate.
const STALE_TOL: f64 = 1e-9;

pub const DEFAULT_INNER_STEPS: usize = 30;

/// How the initial sensing cache `g_{m,k}` is chosen before the first
/// exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingInit {
    /// `g = (1/M) √(Δ̃/K)` for every `(m, k)`.
    Uniform,
    /// `g` chosen so every AP is initially charged exactly `1/M` of the
    /// linearized sensing threshold.
    EqualShare,
}

/// What an AP does when its surrogate problem is infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalFallback {
    /// Keep the previous local precoders.
    KeepPrevious,
    /// Steer all local power toward the target (largest sensing
    /// contribution the AP can make on its own).
    MaxSensing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoStageOptions {
    pub sensing_init: SensingInit,
    pub local_fallback: LocalFallback,
    /// Surrogate (MM) steps each AP and the CU take on their own stage
    /// problem per exchange. Extra steps cost computation, not fronthaul.
    pub inner_steps: usize,
}

impl Default for TwoStageOptions {
    fn default() -> Self {
        TwoStageOptions {
            sensing_init: SensingInit::EqualShare,
            local_fallback: LocalFallback::MaxSensing,
            inner_steps: DEFAULT_INNER_STEPS,
        }
    }
}

/// Local precoders (null-space coordinates) and central weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderState {
    pub w_hat: Vec<Vec<CVector>>,
    pub delta: Vec<Vec<C64>>,
}

impl PrecoderState {
    /// Full-dimension precoders `F_m`, column `k` = `δ_{m,k} P_{m,k} ŵ_{m,k}`.
    pub fn precoders(&self, projection: &NullspaceData) -> Vec<CMatrix> {
        self.w_hat
            .iter()
            .enumerate()
            .map(|(m, row)| {
                let cols: Vec<CVector> = row
                    .iter()
                    .enumerate()
                    .map(|(k, w)| projection.lift(m, k, w) * self.delta[m][k])
                    .collect();
                CMatrix::from_columns(&cols)
            })
            .collect()
    }

    /// `Σ_k |δ_{m,k}|² ‖ŵ_{m,k}‖²`.
    pub fn ap_power(&self, m: usize) -> f64 {
        self.w_hat[m].iter().zip(&self.delta[m]).map(|(w, d)| d.norm_sqr() * w.norm_squared()).sum()
    }
}

/// AP → CU message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct APReport {
    pub m: usize,
    /// `z_{m,k} = ĥᴴ_{m,k} ŵ_{m,k}`.
    pub z: Vec<C64>,
    /// `g_{m,k} = âᴴ_{m,k} ŵ_{m,k}`.
    pub g: Vec<C64>,
    /// `‖ŵ_{m,k}‖²`.
    pub wpow: Vec<f64>,
}

impl APReport {
    /// Complex scalars carried by the message.
    pub fn scalars(&self) -> usize {
        self.z.len() + self.g.len() + self.wpow.len()
    }
}

/// CU → AP message for AP `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CUReport {
    pub m: usize,
    pub delta: Vec<C64>,
    /// `α_{i,k} = δ_{i,k} z_{i,k}` for every AP `i`.
    pub alpha_all: Vec<Vec<C64>>,
    /// `β_{i,k} = δ_{i,k} g_{i,k}` for every AP `i`.
    pub beta_all: Vec<Vec<C64>>,
}

/// Constants of the linearized sensing constraint shared by every entity:
/// `Re(Σ_m c_m Σ_k δ_{m,k} g_{m,k}) ≥ Δ̃^{1/2}` with
/// `c_m = (1/√(MNK)) Σ_n σ_{m,n} γ_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingConstraint {
    pub coef: Vec<C64>,
    pub threshold: f64,
}

impl SensingConstraint {
    pub fn from_scenario(scenario: &Scenario) -> SensingConstraint {
        let k = scenario.config.k;
        SensingConstraint {
            coef: (0..scenario.config.m).map(|m| scenario.geometry.linear_coefficient(m, k)).collect(),
            threshold: scenario.geometry.linear_threshold(),
        }
    }

    /// Left-hand side for the given `β = δ g` values.
    pub fn value(&self, beta: &[Vec<C64>]) -> f64 {
        beta.iter().zip(&self.coef).map(|(row, c)| (c * row.iter().sum::<C64>()).re).sum()
    }
}

/// `Σ_k |Σ_m δ_{m,k} z_{m,k}|²`, the interference-free signal power.
pub fn signal_power_from_exchange(delta: &[Vec<C64>], z: &[Vec<C64>]) -> f64 {
    let k_count = delta.first().map_or(0, Vec::len);
    (0..k_count)
        .map(|k| delta.iter().zip(z).map(|(d, z)| d[k] * z[k]).sum::<C64>().norm_sqr())
        .sum()
}

/// `P̂_DS,k = |Σ_m δ_{m,k} ĥᴴ_{m,k} ŵ_{m,k}|²` for every UE.
pub fn projected_signal_power(delta: &[Vec<C64>], h_hat: &[Vec<CVector>], w_hat: &[Vec<CVector>]) -> Vec<f64> {
    let k_count = delta.first().map_or(0, Vec::len);
    (0..k_count)
        .map(|k| {
            (0..delta.len())
                .map(|m| delta[m][k] * h_hat[m][k].dotc(&w_hat[m][k]))
                .sum::<C64>()
                .norm_sqr()
        })
        .collect()
}

/// Gradient of `P̂_DS,k` with respect to `ŵ*_{m,k}`:
/// `|δ|² ĥ ĥᴴ ŵ + (Σ_{i≠m} α_{i,k}) δ* ĥ`.
pub fn local_gradient(h_hat: &CVector, w_hat: &CVector, delta: C64, alpha_others: C64) -> CVector {
    h_hat * (delta.conj() * (delta * h_hat.dotc(w_hat) + alpha_others))
}

/// Gradient of `Σ_k P̂_DS,k` with respect to every `δ*_{m,k}`:
/// `δ |z|² + z* Σ_{i≠m} δ_{i,k} z_{i,k}`.
pub fn central_gradient(delta: &[Vec<C64>], z: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let k_count = delta.first().map_or(0, Vec::len);
    let totals: Vec<C64> =
        (0..k_count).map(|k| delta.iter().zip(z).map(|(d, z)| d[k] * z[k]).sum()).collect();
    z.iter()
        .map(|zm| zm.iter().enumerate().map(|(k, zk)| zk.conj() * totals[k]).collect())
        .collect()
}

/// Outcome of one local update.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOutcome {
    pub report: APReport,
    pub status: SolveStatus,
    pub surrogate_objective: f64,
    /// The previous precoders violated this iteration's surrogate
    /// constraints, so ascent of the true objective is not guaranteed.
    pub stale_start: bool,
}

/// Transmit AP: owns its projected channels and local precoders.
#[derive(Debug, Clone)]
pub struct AccessPoint {
    index: usize,
    power: f64,
    h_hat: Vec<CVector>,
    a_hat: Vec<CVector>,
    sensing: SensingConstraint,
    fallback: LocalFallback,
    inner_steps: usize,
    w_hat: Vec<CVector>,
}

impl AccessPoint {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        index: usize,
        power: f64,
        h_hat: Vec<CVector>,
        a_hat: Vec<CVector>,
        sensing: SensingConstraint,
        fallback: LocalFallback,
        inner_steps: usize,
        w_hat: Vec<CVector>,
    ) -> AccessPoint {
        AccessPoint { index, power, h_hat, a_hat, sensing, fallback, inner_steps: inner_steps.max(1), w_hat }
    }

    pub fn w_hat(&self) -> &[CVector] {
        &self.w_hat
    }

    pub fn report(&self) -> APReport {
        APReport {
            m: self.index,
            z: self.h_hat.iter().zip(&self.w_hat).map(|(h, w)| h.dotc(w)).collect(),
            g: self.a_hat.iter().zip(&self.w_hat).map(|(a, w)| a.dotc(w)).collect(),
            wpow: self.w_hat.iter().map(|w| w.norm_squared()).collect(),
        }
    }

    /// Surrogate problem of this AP around its current precoders.
    pub fn local_spec(&self, cu: &CUReport) -> SubproblemSpec {
        let m = self.index;
        let objective = (0..self.h_hat.len())
            .map(|k| {
                let alpha_others: C64 =
                    cu.alpha_all.iter().enumerate().filter(|&(i, _)| i != m).map(|(_, row)| row[k]).sum();
                local_gradient(&self.h_hat[k], &self.w_hat[k], cu.delta[k], alpha_others)
            })
            .collect();
        let group = PowerGroup {
            members: cu.delta.iter().enumerate().map(|(k, d)| (k, d.norm_sqr())).collect(),
            bound: self.power,
        };
        let coef = self.sensing.coef[m];
        let a = self.a_hat.iter().zip(&cu.delta).map(|(a, d)| a * (coef * d).conj()).collect();
        let constant: f64 = cu
            .beta_all
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != m)
            .map(|(i, row)| (self.sensing.coef[i] * row.iter().sum::<C64>()).re)
            .sum();
        SubproblemSpec {
            objective,
            groups: vec![group],
            linear: Some(LinearConstraint { a, constant, bound: self.sensing.threshold }),
        }
    }

    /// Refines the local precoders against the latest CU message. The
    /// constraint set does not move between inner steps, so only the first
    /// step can be infeasible.
    pub fn local_update(&mut self, cu: &CUReport) -> Result<LocalOutcome> {
        let spec = self.local_spec(cu);
        let stale_start = spec.feasibility_violation(&self.w_hat) > STALE_TOL;
        let mut solution = solver::solve(&spec)?;
        let status = solution.status;
        if status == SolveStatus::Infeasible {
            if self.fallback == LocalFallback::MaxSensing {
                self.w_hat = solution.x;
            }
        } else {
            self.w_hat = solution.x;
            for _ in 1..self.inner_steps {
                solution = solver::solve(&self.local_spec(cu))?;
                self.w_hat = solution.x;
            }
        }
        Ok(LocalOutcome { report: self.report(), status, surrogate_objective: solution.objective, stale_start })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralOutcome {
    pub broadcast: Vec<CUReport>,
    pub status: SolveStatus,
    pub surrogate_objective: f64,
    pub stale_start: bool,
}

/// Central unit: owns the weights `δ_{m,k}`.
#[derive(Debug, Clone)]
pub struct CentralUnit {
    delta: Vec<Vec<C64>>,
    power: Vec<f64>,
    sensing: SensingConstraint,
    inner_steps: usize,
}

impl CentralUnit {
    pub fn new(
        num_ap: usize,
        num_ue: usize,
        power: Vec<f64>,
        sensing: SensingConstraint,
        inner_steps: usize,
    ) -> CentralUnit {
        CentralUnit {
            delta: vec![vec![C64::new(1.0, 0.0); num_ue]; num_ap],
            power,
            sensing,
            inner_steps: inner_steps.max(1),
        }
    }

    pub fn delta(&self) -> &[Vec<C64>] {
        &self.delta
    }

    /// Surrogate problem in `δ`, one length-1 block per `(m, k)`.
    pub fn central_spec(&self, reports: &[APReport]) -> SubproblemSpec {
        let z: Vec<Vec<C64>> = reports.iter().map(|r| r.z.clone()).collect();
        let grad = central_gradient(&self.delta, &z);
        let k_count = self.delta.first().map_or(0, Vec::len);
        let objective = grad.iter().flatten().map(|&v| CVector::from_element(1, v)).collect();
        let groups = reports
            .iter()
            .enumerate()
            .map(|(m, r)| PowerGroup {
                members: r.wpow.iter().enumerate().map(|(k, &w)| (m * k_count + k, w)).collect(),
                bound: self.power[m],
            })
            .collect();
        let a = reports
            .iter()
            .enumerate()
            .flat_map(|(m, r)| {
                let coef = self.sensing.coef[m];
                r.g.iter().map(move |g| CVector::from_element(1, (coef * g).conj()))
            })
            .collect();
        SubproblemSpec {
            objective,
            groups,
            linear: Some(LinearConstraint { a, constant: 0.0, bound: self.sensing.threshold }),
        }
    }

    fn flat_delta(&self) -> Vec<CVector> {
        self.delta.iter().flatten().map(|&d| CVector::from_element(1, d)).collect()
    }

    pub fn update(&mut self, reports: &[APReport]) -> Result<CentralOutcome> {
        let spec = self.central_spec(reports);
        let stale_start = spec.feasibility_violation(&self.flat_delta()) > STALE_TOL;
        let mut solution = solver::solve(&spec)?;
        let status = solution.status;
        if status != SolveStatus::Infeasible {
            self.set_delta(&solution.x);
            for _ in 1..self.inner_steps {
                solution = solver::solve(&self.central_spec(reports))?;
                self.set_delta(&solution.x);
            }
        }
        Ok(CentralOutcome {
            broadcast: self.broadcast(reports),
            status,
            surrogate_objective: solution.objective,
            stale_start,
        })
    }

    fn set_delta(&mut self, x: &[CVector]) {
        let k_count = self.delta.first().map_or(0, Vec::len);
        for (b, v) in x.iter().enumerate() {
            self.delta[b / k_count][b % k_count] = v[0];
        }
    }

    /// Messages for every AP from the current `δ` and the given reports.
    pub fn broadcast(&self, reports: &[APReport]) -> Vec<CUReport> {
        let alpha: Vec<Vec<C64>> = reports
            .iter()
            .map(|r| r.z.iter().zip(&self.delta[r.m]).map(|(z, d)| d * z).collect())
            .collect();
        let beta: Vec<Vec<C64>> = reports
            .iter()
            .map(|r| r.g.iter().zip(&self.delta[r.m]).map(|(g, d)| d * g).collect())
            .collect();
        (0..self.delta.len())
            .map(|m| CUReport { m, delta: self.delta[m].clone(), alpha_all: alpha.clone(), beta_all: beta.clone() })
            .collect()
    }
}

/// Situations in which monotone ascent of the true objective is not
/// guaranteed for an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SafeguardEvent {
    /// AP surrogate infeasible; the fallback policy was applied.
    LocalInfeasible { ap: usize },
    /// CU surrogate infeasible; the previous weights were kept.
    CentralInfeasible,
    /// The AP's previous precoders violated its new surrogate constraints.
    LocalStaleStart { ap: usize },
    /// The previous weights violated the CU's new surrogate constraints.
    CentralStaleStart,
}

impl SafeguardEvent {
    /// Infeasibility events, as opposed to stale-start warnings.
    pub fn is_infeasibility(&self) -> bool {
        matches!(self, SafeguardEvent::LocalInfeasible { .. } | SafeguardEvent::CentralInfeasible)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub sum_sinr: f64,
    pub ssnr: f64,
    /// `Σ_k P̂_DS,k` after the AP stage (for the centralized method, equal
    /// to `objective`).
    pub objective_after_local: f64,
    /// `Σ_k P̂_DS,k` at the end of the iteration.
    pub objective: f64,
    pub local_surrogate: Vec<f64>,
    pub central_surrogate: f64,
    /// `P_m - Σ_k |δ|²‖ŵ‖²` per AP.
    pub power_slack: Vec<f64>,
    /// Linearized sensing left-hand side minus `Δ̃^{1/2}`.
    pub sensing_slack: f64,
    pub local_status: Vec<SolveStatus>,
    pub central_status: SolveStatus,
    pub events: Vec<SafeguardEvent>,
    /// Complex scalars exchanged so far.
    pub fronthaul: u64,
}

impl IterationRecord {
    pub fn flagged(&self) -> bool {
        !self.events.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub method: Method,
    pub initial_objective: f64,
    pub initial_sum_sinr: f64,
    pub iterations: Vec<IterationRecord>,
    pub fronthaul: u64,
}

impl RunRecord {
    /// Any infeasible surrogate during the run.
    pub fn surrogate_infeasible(&self) -> bool {
        self.iterations.iter().any(|it| it.events.iter().any(SafeguardEvent::is_infeasibility))
    }

    pub fn final_sum_sinr(&self) -> f64 {
        self.iterations.last().map_or(self.initial_sum_sinr, |it| it.sum_sinr)
    }
}

/// Random starting precoders: i.i.d. CN(0, 1) entries scaled so every AP
/// spends its full budget with unit weights.
pub fn initial_precoders(scenario: &Scenario) -> Vec<Vec<CVector>> {
    let cfg = &scenario.config;
    (0..cfg.m)
        .map(|m| {
            let mut row: Vec<CVector> = (0..cfg.k)
                .map(|k| {
                    let mut r = rng::substream(cfg.seed, Domain::PrecoderInit, scenario.trial, m, k);
                    CVector::from_fn(scenario.projection.dim(m, k), |_, _| rng::complex_normal(&mut r))
                })
                .collect();
            let total: f64 = row.iter().map(|w| w.norm_squared()).sum();
            let scale = C64::from((cfg.power[m] / total).sqrt());
            for w in &mut row {
                *w *= scale;
            }
            row
        })
        .collect()
}

/// Initial sensing cache `g_{m,k}` used before any AP has reported.
pub fn initial_sensing_cache(scenario: &Scenario, init: SensingInit) -> Vec<Vec<C64>> {
    let cfg = &scenario.config;
    let (m_count, k_count) = (cfg.m as f64, cfg.k as f64);
    let delta_tilde = scenario.geometry.delta_tilde;
    match init {
        SensingInit::Uniform => {
            let g = (delta_tilde / k_count).sqrt() / m_count;
            vec![vec![C64::new(g, 0.0); cfg.k]; cfg.m]
        }
        SensingInit::EqualShare => {
            let sensing = SensingConstraint::from_scenario(scenario);
            (0..cfg.m)
                .map(|m| {
                    let c = sensing.coef[m];
                    // Re(c K g) = Δ̃^{1/2} / M with g aligned to c*.
                    let g = if c.norm() > 0.0 {
                        c.conj() / c.norm() * (sensing.threshold / (m_count * k_count * c.norm()))
                    } else {
                        C64::new(0.0, 0.0)
                    };
                    vec![g; cfg.k]
                })
                .collect()
        }
    }
}

/// Driver running the message exchange between the APs and the CU.
#[derive(Debug, Clone)]
pub struct TwoStage<'a> {
    scenario: &'a Scenario,
    aps: Vec<AccessPoint>,
    cu: CentralUnit,
    inbox: Vec<CUReport>,
    sensing: SensingConstraint,
    fronthaul: u64,
}

impl<'a> TwoStage<'a> {
    /// Sets up the APs with random precoders, `δ = 1`, `z = 0` and the
    /// initial sensing cache.
    pub fn new(scenario: &'a Scenario, options: TwoStageOptions) -> TwoStage<'a> {
        let cfg = &scenario.config;
        let sensing = SensingConstraint::from_scenario(scenario);
        let w0 = initial_precoders(scenario);
        let aps = w0
            .into_iter()
            .enumerate()
            .map(|(m, w)| {
                AccessPoint::new(
                    m,
                    cfg.power[m],
                    scenario.projection.h_hat[m].clone(),
                    scenario.projection.a_hat[m].clone(),
                    sensing.clone(),
                    options.local_fallback,
                    options.inner_steps,
                    w,
                )
            })
            .collect();
        let cu = CentralUnit::new(cfg.m, cfg.k, cfg.power.clone(), sensing.clone(), options.inner_steps);
        let g0 = initial_sensing_cache(scenario, options.sensing_init);
        let zero = vec![vec![C64::new(0.0, 0.0); cfg.k]; cfg.m];
        let inbox = (0..cfg.m)
            .map(|m| CUReport { m, delta: cu.delta()[m].clone(), alpha_all: zero.clone(), beta_all: g0.clone() })
            .collect();
        TwoStage { scenario, aps, cu, inbox, sensing, fronthaul: 0 }
    }

    pub fn state(&self) -> PrecoderState {
        PrecoderState {
            w_hat: self.aps.iter().map(|ap| ap.w_hat().to_vec()).collect(),
            delta: self.cu.delta().to_vec(),
        }
    }

    fn true_objective(&self) -> f64 {
        let z: Vec<Vec<C64>> = self.aps.iter().map(|ap| ap.report().z).collect();
        signal_power_from_exchange(self.cu.delta(), &z)
    }

    fn sum_sinr(&self, state: &PrecoderState) -> (f64, f64) {
        let f = state.precoders(&self.scenario.projection);
        let s = metrics::sinr_per_ue(&self.scenario.channels, &f, &self.scenario.config.sigma_k2);
        (s.sum_sinr, metrics::ssnr(&f, &self.scenario.geometry))
    }

    /// One AP stage followed by one CU stage.
    pub fn step(&mut self, iteration: usize) -> Result<IterationRecord> {
        let mut events = Vec::new();
        let mut reports = Vec::with_capacity(self.aps.len());
        let mut local_status = Vec::with_capacity(self.aps.len());
        let mut local_surrogate = Vec::with_capacity(self.aps.len());
        for (ap, msg) in self.aps.iter_mut().zip(&self.inbox) {
            let out = ap.local_update(msg)?;
            if out.status == SolveStatus::Infeasible {
                events.push(SafeguardEvent::LocalInfeasible { ap: msg.m });
            } else if out.stale_start {
                events.push(SafeguardEvent::LocalStaleStart { ap: msg.m });
            }
            self.fronthaul += out.report.scalars() as u64;
            local_status.push(out.status);
            local_surrogate.push(out.surrogate_objective);
            reports.push(out.report);
        }
        let z: Vec<Vec<C64>> = reports.iter().map(|r| r.z.clone()).collect();
        let objective_after_local = signal_power_from_exchange(self.cu.delta(), &z);

        let central = self.cu.update(&reports)?;
        if central.status == SolveStatus::Infeasible {
            events.push(SafeguardEvent::CentralInfeasible);
        } else if central.stale_start {
            events.push(SafeguardEvent::CentralStaleStart);
        }
        // δ, α and β for every (m, k) are sent once per iteration.
        let down = central.broadcast.first().map_or(0, |r| 3 * r.alpha_all.iter().map(Vec::len).sum::<usize>());
        self.fronthaul += down as u64;
        self.inbox = central.broadcast;

        let state = self.state();
        let (sum_sinr, ssnr) = self.sum_sinr(&state);
        let beta: Vec<Vec<C64>> = self.inbox.first().map(|r| r.beta_all.clone()).unwrap_or_default();
        Ok(IterationRecord {
            iteration,
            sum_sinr,
            ssnr,
            objective_after_local,
            objective: self.true_objective(),
            local_surrogate,
            central_surrogate: central.surrogate_objective,
            power_slack: (0..self.aps.len()).map(|m| self.scenario.config.power[m] - state.ap_power(m)).collect(),
            sensing_slack: self.sensing.value(&beta) - self.sensing.threshold,
            local_status,
            central_status: central.status,
            events,
            fronthaul: self.fronthaul,
        })
    }

    /// Runs `n_iter` exchanges. Fails with [`Error::GlobalInfeasible`] when
    /// the CU surrogate was infeasible at every iteration.
    pub fn run(mut self, n_iter: usize) -> Result<(PrecoderState, RunRecord)> {
        let initial = self.state();
        let (initial_sum_sinr, _) = self.sum_sinr(&initial);
        let initial_objective = self.true_objective();
        let mut iterations = Vec::with_capacity(n_iter);
        for it in 1..=n_iter {
            iterations.push(self.step(it)?);
        }
        if n_iter > 0 && iterations.iter().all(|it| it.central_status == SolveStatus::Infeasible) {
            return Err(Error::GlobalInfeasible);
        }
        let record = RunRecord {
            method: Method::Tsdba,
            initial_objective,
            initial_sum_sinr,
            iterations,
            fronthaul: self.fronthaul,
        };
        Ok((self.state(), record))
    }
}

/// Runs the two-stage design on the channel draw of `trial`.
pub fn run_two_stage(config: &SystemConfig, trial: u64) -> Result<(PrecoderState, RunRecord)> {
    run_two_stage_with(&Scenario::build(config, trial)?, config.n_iter, TwoStageOptions::default())
}

pub fn run_two_stage_with(
    scenario: &Scenario,
    n_iter: usize,
    options: TwoStageOptions,
) -> Result<(PrecoderState, RunRecord)> {
    TwoStage::new(scenario, options).run(n_iter)
}
