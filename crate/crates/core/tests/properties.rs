mod common;

use cfisac_core::metrics::{self, fronthaul_load, sinr_per_ue, Method};
use cfisac_core::model::{ChannelSet, SensingGeometry};
use cfisac_core::nullspace::nullspace_basis;
use cfisac_core::solver::{self, LinearConstraint, PowerGroup, SolveStatus, SubproblemSpec};
use cfisac_core::{default_config, CMatrix, CVector, C64};
use common::{random_cvec, random_spec, rng};
use proptest::prelude::*;

fn random_matrix<R: rand::Rng>(r: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_columns(&(0..cols).map(|_| random_cvec(r, rows)).collect::<Vec<_>>())
}

fn random_unitary<R: rand::Rng>(r: &mut R, n: usize) -> CMatrix {
    random_matrix(r, n, n).qr().q()
}

fn max_diff(a: &[CVector], b: &[CVector]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn argmax_is_invariant_to_objective_scaling(seed in any::<u64>(), scale in 1e-3f64..1e3, frac in -0.5f64..0.95) {
        let mut r = rng(seed);
        let spec = random_spec(&mut r, 12, Some(frac));
        let mut scaled = spec.clone();
        for c in &mut scaled.objective {
            *c *= C64::from(scale);
        }
        let a = solver::solve(&spec).unwrap();
        let b = solver::solve(&scaled).unwrap();
        prop_assert_eq!(a.status, b.status);
        let size = a.x.iter().map(|x| x.norm()).fold(1e-12, f64::max);
        prop_assert!(max_diff(&a.x, &b.x) <= 1e-7 * size);
        prop_assert!((b.objective - scale * a.objective).abs() <= 1e-9 * (scale * a.objective).abs().max(1e-12));
    }

    #[test]
    fn unconstrained_solution_sits_on_every_power_boundary(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = random_spec(&mut r, 12, None);
        let sol = solver::solve(&spec).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        for g in &spec.groups {
            let used: f64 = g.members.iter().map(|&(b, q)| q * sol.x[b].norm_squared()).sum();
            prop_assert!((used - g.bound).abs() <= 1e-10 * g.bound);
        }
    }

    #[test]
    fn nullspace_projector_matches_pseudo_inverse(seed in any::<u64>(), rows in 1usize..5, extra in 1usize..5) {
        let mut r = rng(seed);
        let cols = rows + extra;
        let h = random_matrix(&mut r, rows, cols);
        let p = nullspace_basis(&h).unwrap();
        prop_assert_eq!(p.ncols(), extra);
        let gram = &h * h.adjoint();
        let expected = CMatrix::identity(cols, cols) - h.adjoint() * gram.try_inverse().unwrap() * &h;
        prop_assert!((&p * p.adjoint() - expected).norm() <= 1e-10);
        prop_assert!((p.adjoint() * &p - CMatrix::identity(extra, extra)).norm() <= 1e-10);
    }

    #[test]
    fn lifted_solution_does_not_depend_on_basis_choice(seed in any::<u64>(), frac in -0.5f64..0.95) {
        let mut r = rng(seed);
        let (rows, cols) = (2, 6);
        let hint = random_matrix(&mut r, rows, cols);
        let p = nullspace_basis(&hint).unwrap();
        let u = random_unitary(&mut r, p.ncols());
        let h = random_cvec(&mut r, cols);
        let a = random_cvec(&mut r, cols);
        let lifted = |basis: &CMatrix| {
            let ah = basis.ad_mul(&a);
            let reach = 2.0f64.sqrt() * ah.norm();
            let spec = SubproblemSpec {
                objective: vec![basis.ad_mul(&h)],
                groups: vec![PowerGroup { members: vec![(0, 1.0)], bound: 2.0 }],
                linear: Some(LinearConstraint { a: vec![ah], constant: 0.0, bound: frac * reach }),
            };
            basis * &solver::solve(&spec).unwrap().x[0]
        };
        let x1 = lifted(&p);
        let x2 = lifted(&(&p * u));
        prop_assert!((&x1 - &x2).norm() <= 1e-9 * x1.norm().max(1e-12));
    }

    #[test]
    fn sinr_ignores_common_stream_phase(seed in any::<u64>(), phase in 0.0f64..std::f64::consts::TAU, k in 0usize..2) {
        let cfg = default_config();
        let ch = ChannelSet::generate(&cfg, seed % 1000);
        let mut r = rng(seed);
        let f: Vec<CMatrix> = (0..cfg.m).map(|_| random_matrix(&mut r, cfg.ntx, cfg.k)).collect();
        let mut rotated = f.clone();
        for fm in &mut rotated {
            let col = fm.column(k) * C64::from_polar(1.0, phase);
            fm.set_column(k, &col);
        }
        let a = sinr_per_ue(&ch, &f, &cfg.sigma_k2);
        let b = sinr_per_ue(&ch, &rotated, &cfg.sigma_k2);
        for (x, y) in a.sinr.iter().zip(&b.sinr) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-12));
        }
    }

    #[test]
    fn ssnr_is_quadratic_in_the_precoders(seed in any::<u64>(), c in 0.01f64..100.0) {
        let cfg = default_config();
        let geometry = SensingGeometry::from_config(&cfg);
        let mut r = rng(seed);
        let f: Vec<CMatrix> = (0..cfg.m).map(|_| random_matrix(&mut r, cfg.ntx, cfg.k)).collect();
        let scaled: Vec<CMatrix> = f.iter().map(|m| m * C64::from(c)).collect();
        let base = metrics::ssnr(&f, &geometry);
        prop_assert!((metrics::ssnr(&scaled, &geometry) - c * c * base).abs() <= 1e-10 * c * c * base);
    }

    #[test]
    fn fronthaul_scaling(m in 1usize..32, k in 1usize..16, ntx in 1usize..2048, n_iter in 0usize..20) {
        prop_assert_eq!(fronthaul_load(Method::Tsdba, m, k, ntx, n_iter), fronthaul_load(Method::Tsdba, m, k, 2 * ntx, n_iter));
        prop_assert_eq!(
            fronthaul_load(Method::Centralized, m, k, 2 * ntx, n_iter),
            2 * fronthaul_load(Method::Centralized, m, k, ntx, n_iter)
        );
    }
}
