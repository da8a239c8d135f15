//! Scenario configuration, array geometry and channel generation.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nullspace::{self, NullspaceData};
use crate::rng::{self, Domain};
use crate::{CVector, C64};

/// All scenario parameters. Field names in JSON mirror the usual symbols
/// (`M`, `N`, `K`, `Ntx`, ...). Powers and variances are linear, angles in
/// degrees, the sensing threshold in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Transmit APs.
    #[serde(rename = "M")]
    pub m: usize,
    /// Receive (sensing) APs.
    #[serde(rename = "N")]
    pub n: usize,
    /// Single-antenna UEs.
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "Ntx")]
    pub ntx: usize,
    #[serde(rename = "Nrx")]
    pub nrx: usize,
    pub spacing_over_lambda: f64,
    /// Multipath components per communication channel.
    #[serde(rename = "L")]
    pub paths: usize,
    /// Per-AP power budget, length `M`.
    #[serde(rename = "Pm")]
    pub power: Vec<f64>,
    /// Per-UE noise variance, length `K`.
    pub sigma_k2: Vec<f64>,
    /// Noise variance at every receive AP.
    pub sigma_n2: f64,
    /// Sensing path-gain variance, `M` rows of `N` entries.
    pub sigma_mn2: Vec<Vec<f64>>,
    /// Sensing SNR threshold.
    #[serde(rename = "delta_dB")]
    pub delta_db: f64,
    /// Target angle of departure seen from each transmit AP.
    pub theta_deg: Vec<f64>,
    /// Target angle of arrival at each receive AP.
    pub phi_deg: Vec<f64>,
    pub n_iter: usize,
    pub seed: u64,
}

/// The reference scenario: four transmit APs, two receive APs, two UEs and
/// 32-element half-wavelength ULAs.
pub fn default_config() -> SystemConfig {
    let m = 4;
    let n = 2;
    let k = 2;
    SystemConfig {
        m,
        n,
        k,
        ntx: 32,
        nrx: 32,
        spacing_over_lambda: 0.5,
        paths: 10,
        power: vec![1.0; m],
        sigma_k2: vec![1.0; k],
        sigma_n2: db_to_linear(-20.0),
        sigma_mn2: vec![vec![db_to_linear(-10.0); n]; m],
        delta_db: 30.0,
        theta_deg: vec![-15.0, 35.0, 5.0, 40.0],
        phi_deg: vec![10.0, -20.0],
        n_iter: 3,
        seed: 0,
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        default_config()
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m == 0 || self.n == 0 || self.k == 0 || self.nrx == 0 || self.paths == 0 {
            return bad("M, N, K, Nrx and L must all be at least 1".into());
        }
        if self.ntx < self.k {
            return bad(format!("Ntx ({}) must be at least K ({})", self.ntx, self.k));
        }
        if !(self.spacing_over_lambda.is_finite() && self.spacing_over_lambda > 0.0) {
            return bad("spacing_over_lambda must be positive".into());
        }
        if self.power.len() != self.m {
            return bad(format!("Pm has {} entries, expected M = {}", self.power.len(), self.m));
        }
        if self.sigma_k2.len() != self.k {
            return bad(format!("sigma_k2 has {} entries, expected K = {}", self.sigma_k2.len(), self.k));
        }
        if self.theta_deg.len() != self.m {
            return bad(format!("theta_deg has {} entries, expected M = {}", self.theta_deg.len(), self.m));
        }
        if self.phi_deg.len() != self.n {
            return bad(format!("phi_deg has {} entries, expected N = {}", self.phi_deg.len(), self.n));
        }
        if self.sigma_mn2.len() != self.m || self.sigma_mn2.iter().any(|row| row.len() != self.n) {
            return bad(format!("sigma_mn2 must be {} x {}", self.m, self.n));
        }
        let positive = |x: &f64| x.is_finite() && *x > 0.0;
        if !self.power.iter().all(positive)
            || !self.sigma_k2.iter().all(positive)
            || !positive(&self.sigma_n2)
            || !self.sigma_mn2.iter().flatten().all(positive)
        {
            return bad("powers and variances must be strictly positive".into());
        }
        let in_range = |a: &f64| a.is_finite() && a.abs() < 90.0;
        if !self.theta_deg.iter().chain(&self.phi_deg).all(in_range) {
            return bad("angles must lie in (-90, 90) degrees".into());
        }
        if self.delta_db.is_nan() {
            return bad("delta_dB must be a number".into());
        }
        Ok(())
    }

    /// Applies a `key=value` override. The value is parsed as JSON when
    /// possible (`4`, `[1,1]`, `true`) and as a bare string otherwise.
    pub fn with_override(&self, assignment: &str) -> Result<SystemConfig> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("expected key=value, got `{assignment}`")))?;
        let key = key.trim();
        let mut value = serde_json::to_value(self)?;
        let obj = value.as_object_mut().expect("config serializes to an object");
        if !obj.contains_key(key) {
            return Err(Error::InvalidConfig(format!("unknown config field `{key}`")));
        }
        let parsed = serde_json::from_str(raw.trim())
            .unwrap_or_else(|_| serde_json::Value::String(raw.trim().to_string()));
        obj.insert(key.to_string(), parsed);
        serde_json::from_value(value).map_err(|e| Error::InvalidConfig(format!("{key}: {e}")))
    }

    /// Linear sensing threshold `Δ`.
    pub fn delta_linear(&self) -> f64 {
        db_to_linear(self.delta_db)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// ULA response toward `angle_deg`: entry `q` is `exp(j 2π d/λ q sin θ)`.
pub fn steering(angle_deg: f64, n_elem: usize, spacing_over_lambda: f64) -> CVector {
    let phase = 2.0 * PI * spacing_over_lambda * angle_deg.to_radians().sin();
    CVector::from_fn(n_elem, |q, _| C64::from_polar(1.0, phase * q as f64))
}

/// Builds `(1/√L) Σ_l α_l a(ψ_l)` from explicit `(α_l, ψ_l in degrees)` pairs.
pub fn channel_from_paths(paths: &[(C64, f64)], n_elem: usize, spacing_over_lambda: f64) -> CVector {
    let mut h = CVector::zeros(n_elem);
    for &(gain, angle) in paths {
        h.axpy(gain, &steering(angle, n_elem, spacing_over_lambda), C64::new(1.0, 0.0));
    }
    h / C64::from((paths.len().max(1) as f64).sqrt())
}

/// Narrowband multipath channel with `L` paths, unit-variance complex
/// Gaussian gains and angles uniform over (-90°, 90°).
pub fn gen_comm_channel<R: Rng + ?Sized>(
    rng: &mut R,
    paths: usize,
    n_elem: usize,
    spacing_over_lambda: f64,
) -> CVector {
    let draws: Vec<(C64, f64)> = (0..paths)
        .map(|_| {
            let gain = rng::complex_normal(rng);
            let angle = rng.random_range(-90.0..90.0);
            (gain, angle)
        })
        .collect();
    channel_from_paths(&draws, n_elem, spacing_over_lambda)
}

/// Maximum ratio combiner `a(φ)/√Nrx`.
pub fn mrc_combiner(phi_deg: f64, n_rx: usize, spacing_over_lambda: f64) -> CVector {
    steering(phi_deg, n_rx, spacing_over_lambda) / C64::from((n_rx as f64).sqrt())
}

/// `Δ̃ = Σ_n ‖g_n‖² σ_n² Δ` with `Δ` given in dB.
pub fn delta_tilde(delta_db: f64, combiners: &[CVector], sigma_n2: f64) -> f64 {
    let lin = db_to_linear(delta_db);
    combiners.iter().map(|g| g.norm_squared() * sigma_n2 * lin).sum()
}

/// Communication channels `h[m][k]`, each of length `Ntx`.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub h: Vec<Vec<CVector>>,
}

impl ChannelSet {
    /// Draws every `h_{m,k}` from its own `(trial, m, k)` substream.
    pub fn generate(config: &SystemConfig, trial: u64) -> ChannelSet {
        let h = (0..config.m)
            .map(|m| {
                (0..config.k)
                    .map(|k| {
                        let mut rng = rng::substream(config.seed, Domain::CommChannel, trial, m, k);
                        gen_comm_channel(&mut rng, config.paths, config.ntx, config.spacing_over_lambda)
                    })
                    .collect()
            })
            .collect();
        ChannelSet { h }
    }

    pub fn num_tx(&self) -> usize {
        self.h.len()
    }

    pub fn num_ue(&self) -> usize {
        self.h.first().map_or(0, Vec::len)
    }
}

/// Sensing-side constants: transmit steering toward the target, receive
/// combiners, combiner gains `γ_n = g_nᴴ a(φ_n)` and the linear threshold.
#[derive(Debug, Clone)]
pub struct SensingGeometry {
    pub a_tx: Vec<CVector>,
    pub combiners: Vec<CVector>,
    pub gamma: Vec<C64>,
    /// Path-gain standard deviations `σ_{m,n}`.
    pub sigma_mn: Vec<Vec<f64>>,
    /// Path-gain variances `σ²_{m,n}`.
    pub sigma_mn2: Vec<Vec<f64>>,
    pub sigma_n2: f64,
    pub delta_linear: f64,
    pub delta_tilde: f64,
}

impl SensingGeometry {
    pub fn from_config(config: &SystemConfig) -> SensingGeometry {
        let d = config.spacing_over_lambda;
        let a_tx = config.theta_deg.iter().map(|&t| steering(t, config.ntx, d)).collect();
        let combiners: Vec<CVector> =
            config.phi_deg.iter().map(|&p| mrc_combiner(p, config.nrx, d)).collect();
        let gamma = combiners
            .iter()
            .zip(&config.phi_deg)
            .map(|(g, &p)| g.dotc(&steering(p, config.nrx, d)))
            .collect();
        let sigma_mn = config
            .sigma_mn2
            .iter()
            .map(|row| row.iter().map(|v| v.sqrt()).collect())
            .collect();
        SensingGeometry {
            a_tx,
            delta_tilde: delta_tilde(config.delta_db, &combiners, config.sigma_n2),
            combiners,
            gamma,
            sigma_mn,
            sigma_mn2: config.sigma_mn2.clone(),
            sigma_n2: config.sigma_n2,
            delta_linear: config.delta_linear(),
        }
    }

    /// Noise power after combining, `Σ_n ‖g_n‖² σ_n²`.
    pub fn noise_power(&self) -> f64 {
        self.combiners.iter().map(|g| g.norm_squared() * self.sigma_n2).sum()
    }

    /// Coefficient of AP `m` in the linearized sensing constraint:
    /// `(1/√(MNK)) Σ_n σ_{m,n} γ_n`.
    pub fn linear_coefficient(&self, m: usize, num_ue: usize) -> C64 {
        let q = (self.a_tx.len() * self.combiners.len() * num_ue) as f64;
        let s: C64 = self.sigma_mn[m].iter().zip(&self.gamma).map(|(&s, &g)| g * s).sum();
        s / q.sqrt()
    }

    /// Right-hand side of the linearized sensing constraint, `Δ̃^{1/2}`.
    pub fn linear_threshold(&self) -> f64 {
        self.delta_tilde.sqrt()
    }
}

/// One channel realization with everything the design algorithms consume.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SystemConfig,
    pub trial: u64,
    pub channels: ChannelSet,
    pub geometry: SensingGeometry,
    pub projection: NullspaceData,
}

impl Scenario {
    pub fn build(config: &SystemConfig, trial: u64) -> Result<Scenario> {
        config.validate()?;
        let channels = ChannelSet::generate(config, trial);
        Self::from_channels(config, trial, channels)
    }

    pub fn from_channels(config: &SystemConfig, trial: u64, channels: ChannelSet) -> Result<Scenario> {
        config.validate()?;
        let geometry = SensingGeometry::from_config(config);
        let projection = nullspace::project(&channels, &geometry)?;
        Ok(Scenario { config: config.clone(), trial, channels, geometry, projection })
    }

    /// Same channel draw, different sensing threshold.
    pub fn with_delta_db(&self, delta_db: f64) -> Scenario {
        let mut config = self.config.clone();
        config.delta_db = delta_db;
        let geometry = SensingGeometry::from_config(&config);
        Scenario { config, geometry, ..self.clone() }
    }
}
