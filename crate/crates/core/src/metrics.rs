//! Communication and sensing performance measures, and fronthaul load.

use serde::{Deserialize, Serialize};

use crate::model::{steering, ChannelSet, SensingGeometry};
use crate::{CMatrix, C64};

/// Gain reported for a direction that receives no power.
pub const BEAMPATTERN_FLOOR_DB: f64 = -120.0;

/// Design method, used for fronthaul accounting and result tagging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tsdba,
    Centralized,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Tsdba => "tsdba",
            Method::Centralized => "centralized",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinrReport {
    pub sinr: Vec<f64>,
    pub p_ds: Vec<f64>,
    pub p_mui: Vec<f64>,
    pub sum_sinr: f64,
}

/// Full set of metrics for one precoder design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub sinr: Vec<f64>,
    pub sum_sinr: f64,
    pub p_ds: Vec<f64>,
    pub p_mui: Vec<f64>,
    pub ssnr: f64,
    /// Per-AP gain (dB) over the angle grid used to build the report.
    pub beampattern: Vec<Vec<f64>>,
    pub fronthaul: u64,
}

/// Per-UE SINR with `precoders[m]` holding `f_{m,k}` in column `k`.
pub fn sinr_per_ue(channels: &ChannelSet, precoders: &[CMatrix], sigma_k2: &[f64]) -> SinrReport {
    let k_count = channels.num_ue();
    let mut p_ds = vec![0.0; k_count];
    let mut p_mui = vec![0.0; k_count];
    for k in 0..k_count {
        for i in 0..k_count {
            let rx: C64 = channels
                .h
                .iter()
                .zip(precoders)
                .map(|(h_m, f_m)| h_m[k].dotc(&f_m.column(i)))
                .sum();
            if i == k {
                p_ds[k] = rx.norm_sqr();
            } else {
                p_mui[k] += rx.norm_sqr();
            }
        }
    }
    let sinr: Vec<f64> = (0..k_count).map(|k| p_ds[k] / (p_mui[k] + sigma_k2[k])).collect();
    SinrReport { sum_sinr: sinr.iter().sum(), sinr, p_ds, p_mui }
}

/// Sensing SNR at the central unit after MRC and coherent combining.
pub fn ssnr(precoders: &[CMatrix], geometry: &SensingGeometry) -> f64 {
    let mut signal = 0.0;
    for (m, f_m) in precoders.iter().enumerate() {
        let toward_target = f_m.ad_mul(&geometry.a_tx[m]).norm_squared();
        for (n, gamma) in geometry.gamma.iter().enumerate() {
            signal += geometry.sigma_mn2[m][n] * gamma.norm_sqr() * toward_target;
        }
    }
    signal / geometry.noise_power()
}

/// Transmit gain `10 log10 ‖a(θ)ᴴ F‖²` over `grid_deg`.
pub fn beampattern(f_m: &CMatrix, grid_deg: &[f64], spacing_over_lambda: f64) -> Vec<f64> {
    grid_deg
        .iter()
        .map(|&theta| {
            let a = steering(theta, f_m.nrows(), spacing_over_lambda);
            let gain = f_m.ad_mul(&a).norm_squared();
            if gain > 0.0 {
                (10.0 * gain.log10()).max(BEAMPATTERN_FLOOR_DB)
            } else {
                BEAMPATTERN_FLOOR_DB
            }
        })
        .collect()
}

/// -90° to 90° in 0.25° steps.
pub fn default_grid() -> Vec<f64> {
    (0..=720).map(|i| -90.0 + 0.25 * i as f64).collect()
}

/// Complex scalars exchanged over the fronthaul to design the precoders.
///
/// The two-stage design moves `3MK` scalars each way per iteration,
/// independent of the array size; the centralized design ships the full CSI
/// up and the precoders down once.
pub fn fronthaul_load(method: Method, m: usize, k: usize, ntx: usize, n_iter: usize) -> u64 {
    let (m, k, ntx, n_iter) = (m as u64, k as u64, ntx as u64, n_iter as u64);
    match method {
        Method::Tsdba => 6 * n_iter * m * k,
        Method::Centralized => 2 * ntx * m * k,
    }
}

/// Bytes on the wire for `scalars` complex values at 32-bit float precision.
pub fn fronthaul_bytes(scalars: u64) -> u64 {
    8 * scalars
}

/// Per-AP transmit power `‖F_m‖²_F`.
pub fn ap_powers(precoders: &[CMatrix]) -> Vec<f64> {
    precoders.iter().map(|f| f.norm_squared()).collect()
}

pub fn evaluate(
    channels: &ChannelSet,
    geometry: &SensingGeometry,
    precoders: &[CMatrix],
    sigma_k2: &[f64],
    grid_deg: &[f64],
    spacing_over_lambda: f64,
    fronthaul: u64,
) -> MetricsReport {
    let s = sinr_per_ue(channels, precoders, sigma_k2);
    MetricsReport {
        sinr: s.sinr,
        sum_sinr: s.sum_sinr,
        p_ds: s.p_ds,
        p_mui: s.p_mui,
        ssnr: ssnr(precoders, geometry),
        beampattern: precoders.iter().map(|f| beampattern(f, grid_deg, spacing_over_lambda)).collect(),
        fronthaul,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_config, SystemConfig};
    use crate::nullspace;
    use crate::CVector;

    fn single_link() -> (SystemConfig, ChannelSet, SensingGeometry) {
        let mut cfg = default_config();
        cfg.m = 1;
        cfg.n = 1;
        cfg.k = 1;
        cfg.power = vec![2.0];
        cfg.sigma_k2 = vec![0.5];
        cfg.sigma_mn2 = vec![vec![0.1]];
        cfg.theta_deg = vec![20.0];
        cfg.phi_deg = vec![-5.0];
        let ch = ChannelSet::generate(&cfg, 0);
        let geo = SensingGeometry::from_config(&cfg);
        (cfg, ch, geo)
    }

    #[test]
    fn matched_filter_sinr() {
        let (cfg, ch, _) = single_link();
        let h = &ch.h[0][0];
        let f = h * C64::from(cfg.power[0].sqrt() / h.norm());
        let r = sinr_per_ue(&ch, &[CMatrix::from_columns(&[f])], &cfg.sigma_k2);
        let expect = cfg.power[0] * h.norm_squared() / cfg.sigma_k2[0];
        assert!((r.sinr[0] - expect).abs() < 1e-10 * expect);
        assert_eq!(r.p_mui[0], 0.0);
    }

    #[test]
    fn zero_precoders() {
        let cfg = default_config();
        let ch = ChannelSet::generate(&cfg, 0);
        let geo = SensingGeometry::from_config(&cfg);
        let f = vec![CMatrix::zeros(cfg.ntx, cfg.k); cfg.m];
        let r = sinr_per_ue(&ch, &f, &cfg.sigma_k2);
        assert_eq!(r.sum_sinr, 0.0);
        assert_eq!(ssnr(&f, &geo), 0.0);
        let bp = beampattern(&f[0], &[0.0, 10.0], 0.5);
        assert_eq!(bp, vec![BEAMPATTERN_FLOOR_DB; 2]);
    }

    #[test]
    fn nullspace_precoders_have_no_interference() {
        let cfg = default_config();
        let ch = ChannelSet::generate(&cfg, 1);
        let geo = SensingGeometry::from_config(&cfg);
        let data = nullspace::project(&ch, &geo).unwrap();
        let f: Vec<CMatrix> = (0..cfg.m)
            .map(|m| {
                let cols: Vec<CVector> = (0..cfg.k)
                    .map(|k| {
                        let x = &data.h_hat[m][k] / C64::from(data.h_hat[m][k].norm() * 2f64.sqrt());
                        data.lift(m, k, &x)
                    })
                    .collect();
                CMatrix::from_columns(&cols)
            })
            .collect();
        let r = sinr_per_ue(&ch, &f, &cfg.sigma_k2);
        for k in 0..cfg.k {
            assert!(r.p_mui[k] <= 1e-18 * r.p_ds[k].max(1.0), "{:?}", r);
        }
    }

    #[test]
    fn ssnr_closed_form_single_pair() {
        let (cfg, _, geo) = single_link();
        let a = steering(cfg.theta_deg[0], cfg.ntx, 0.5);
        let f = &a * C64::from((cfg.power[0] / cfg.ntx as f64).sqrt());
        let value = ssnr(&[CMatrix::from_columns(&[f])], &geo);
        let expect = 0.1 * cfg.nrx as f64 * cfg.ntx as f64 * cfg.power[0] / cfg.sigma_n2;
        assert!((value - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn ssnr_is_quadratic_and_sinr_phase_invariant() {
        let cfg = default_config();
        let ch = ChannelSet::generate(&cfg, 3);
        let geo = SensingGeometry::from_config(&cfg);
        let data = nullspace::project(&ch, &geo).unwrap();
        let f: Vec<CMatrix> = (0..cfg.m)
            .map(|m| {
                let cols: Vec<CVector> = (0..cfg.k).map(|k| data.lift(m, k, &data.a_hat[m][k])).collect();
                CMatrix::from_columns(&cols) * C64::from(0.05)
            })
            .collect();
        let doubled: Vec<CMatrix> = f.iter().map(|x| x * C64::from(2.0)).collect();
        assert!((ssnr(&doubled, &geo) - 4.0 * ssnr(&f, &geo)).abs() < 1e-9 * ssnr(&f, &geo));

        let rotated: Vec<CMatrix> = f
            .iter()
            .map(|x| {
                let mut y = x.clone();
                y.column_mut(1).scale_mut(1.0);
                let phase = C64::from_polar(1.0, 0.7);
                for v in y.column_mut(1).iter_mut() {
                    *v *= phase;
                }
                y
            })
            .collect();
        let a = sinr_per_ue(&ch, &f, &cfg.sigma_k2);
        let b = sinr_per_ue(&ch, &rotated, &cfg.sigma_k2);
        for k in 0..cfg.k {
            assert!((a.sinr[k] - b.sinr[k]).abs() < 1e-9 * a.sinr[k].max(1e-12));
        }
    }

    #[test]
    fn beampattern_peaks_at_matched_angle() {
        let f = CMatrix::from_columns(&[steering(23.4, 32, 0.5)]);
        let grid: Vec<f64> = (0..=1800).map(|i| -90.0 + 0.1 * i as f64).collect();
        let bp = beampattern(&f, &grid, 0.5);
        let (idx, _) = bp.iter().enumerate().fold((0, f64::MIN), |acc, (i, &g)| if g > acc.1 { (i, g) } else { acc });
        assert!((grid[idx] - 23.4).abs() < 1e-9);
        assert_eq!(default_grid().len(), 721);
    }

    #[test]
    fn fronthaul_formulas() {
        assert_eq!(fronthaul_load(Method::Tsdba, 4, 2, 32, 3), 144);
        assert_eq!(fronthaul_load(Method::Centralized, 4, 2, 32, 3), 512);
        assert_eq!(fronthaul_load(Method::Tsdba, 4, 2, 8, 3), fronthaul_load(Method::Tsdba, 4, 2, 1024, 3));
        assert_eq!(fronthaul_bytes(144), 1152);
    }
}
