//! Built-in oracle suites behind the CLI `selftest` subcommand.
//!
//! Each suite re-derives expected values through an independent route
//! (direct per-entry evaluation, grid scans, finite differences) and checks
//! the production path against it on freshly seeded random instances. These
//! are quick smoke versions of the full test suite.

use crate::admm;
use crate::beamforming;
use crate::channel::{self, assemble_channels, sample_environment, EnvironmentParams};
use crate::fp;
use crate::geometry::{Region, SystemGeometry};
use crate::placement;
use crate::ris::{self, RisArchitecture};
use crate::scalar::{CMat, CVec, RMat, Vec2, C};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn suite(name: &'static str, body: impl FnOnce() -> Result<String, String>) -> SuiteResult {
    match body() {
        Ok(detail) => SuiteResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => SuiteResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn random_admittance(
    arch: RisArchitecture,
    rng: &mut ChaCha8Rng,
    scale: f64,
) -> ris::AdmittanceMatrix<f64> {
    let n = arch.group_size();
    let blocks = (0..arch.num_groups())
        .map(|_| {
            let mut b = RMat::<f64>::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = scale * (rng.random::<f64>() * 2.0 - 1.0);
                    b[(i, j)] = v;
                    b[(j, i)] = v;
                }
            }
            b
        })
        .collect();
    ris::AdmittanceMatrix::from_blocks(arch, blocks).unwrap()
}

struct Instance {
    env: channel::PathEnvironment<f64>,
    geometry: SystemGeometry<f64>,
    channels: channel::ChannelSet<f64>,
    theta: ris::ScatteringMatrix<f64>,
    w: CMat<f64>,
    rho: Vec<f64>,
    psi: Vec<C<f64>>,
}

fn make_instance(seed: u64, m: usize, group: usize, n_t: usize, k: usize, l: usize) -> Instance {
    let arch = RisArchitecture::grouped(m, group).unwrap();
    let wl = 0.01;
    let region = Region::centered(3.0 * m as f64 * wl, 8.0 * wl);
    let mut geometry = SystemGeometry::linear(&arch, n_t, k, wl, region, 50.0, 2.0).unwrap();
    let params = EnvironmentParams {
        num_tx_paths: l,
        num_rx_paths: l,
        num_users: k,
        rician_kappa: 1.0,
        pathloss_gamma0: 1.0,
        pathloss_alpha: 0.0,
        bs_ris_distance: 50.0,
        ris_ue_radius: 2.0,
        min_ue_distance: 0.5,
    };
    let (env, ue_pos) = sample_environment(&params, seed).unwrap();
    geometry.ue_positions = ue_pos;
    let channels = assemble_channels(&geometry, &env, 0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151);
    let theta = ris::admittance_to_scattering(&random_admittance(arch, &mut rng, 0.01));
    let w = CMat::from_fn(n_t, k, |_, _| {
        C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 0.4
    });
    let (rho, psi) = fp::update_auxiliaries(&channels, &theta, &w);
    Instance {
        env,
        geometry,
        channels,
        theta,
        w,
        rho,
        psi,
    }
}

fn scattering_suite() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for arch in [
        RisArchitecture::single(8).unwrap(),
        RisArchitecture::grouped(8, 2).unwrap(),
        RisArchitecture::grouped(8, 4).unwrap(),
        RisArchitecture::fully(8).unwrap(),
    ] {
        for _ in 0..10 {
            let b = random_admittance(arch, &mut rng, 0.05);
            let theta = ris::admittance_to_scattering(&b);
            let report = ris::validate_scattering(&theta.to_dense(), &arch);
            worst = worst.max(report.max_violation());
            if !report.pass {
                return Err(format!("constraint violation {:.3e}", report.max_violation()));
            }
        }
    }
    Ok(format!("max violation {worst:.3e}"))
}

fn fp_identity_suite() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let inst = make_instance(seed, 8, 2, 4, 2, 4);
        let fp_val = fp::fp_objective(&inst.channels, &inst.theta, &inst.w, &inst.rho, &inst.psi);
        let sr = fp::sum_rate(&inst.channels, &inst.theta, &inst.w);
        let rel = (fp_val - sr).abs() / sr.abs().max(1e-30);
        worst = worst.max(rel);
        if rel > 1e-9 {
            return Err(format!("seed {seed}: relative gap {rel:.3e}"));
        }
    }
    Ok(format!("max relative gap {worst:.3e}"))
}

fn beamformer_suite() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for trial in 0..10 {
        let n = 4;
        let mut gram = CMat::<f64>::zeros(n, n);
        for _ in 0..n {
            let v = CVec::from_fn(n, |_, _| {
                C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            gram += &v * v.adjoint();
        }
        let linear: Vec<CVec<f64>> = (0..2)
            .map(|_| {
                CVec::from_fn(n, |_, _| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            })
            .collect();
        let quad = beamforming::Quadratics { gram, linear };
        let p = 0.02;
        let sol = beamforming::solve_beamformer(&quad, p);
        if sol.power > p * (1.0 + 1e-6) {
            return Err(format!("trial {trial}: power {} exceeds budget {p}", sol.power));
        }
        if sol.multiplier > 0.0 && (sol.power - p).abs() / p > 1e-6 {
            return Err(format!(
                "trial {trial}: complementary slackness broken (λ {} power {})",
                sol.multiplier, sol.power
            ));
        }
    }
    Ok("KKT conditions hold on 10 random instances".to_string())
}

fn vectorization_suite() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    for arch in [
        RisArchitecture::single(6).unwrap(),
        RisArchitecture::grouped(6, 2).unwrap(),
        RisArchitecture::grouped(6, 3).unwrap(),
        RisArchitecture::fully(6).unwrap(),
    ] {
        for _ in 0..10 {
            let m = arch.total_elements();
            let m_mat = RMat::<f64>::from_fn(m, 4, |_, _| rng.random::<f64>() - 0.5);
            let gamma = RMat::<f64>::from_fn(m, 4, |_, _| rng.random::<f64>() - 0.5);
            let b = random_admittance(arch, &mut rng, 1.0);
            let (a, b_vec) = admm::assemble_linear_map(&m_mat, &gamma, &arch);
            let lhs = (&a * ris::upper_triangular_pack(&b) - &b_vec).norm_squared();
            let rhs = (b.to_dense() * &m_mat - &gamma).norm_squared();
            let gap = (lhs - rhs).abs();
            worst = worst.max(gap);
            if gap > 1e-10 {
                return Err(format!("identity gap {gap:.3e}"));
            }
        }
    }
    Ok(format!("max identity gap {worst:.3e}"))
}

fn placement_gradient_suite() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let inst = make_instance(seed + 700, 6, 3, 3, 2, 3);
        let coeffs = placement::build_coefficients(
            &inst.env,
            &inst.geometry,
            &inst.channels,
            &channel::ChannelScaling::unity(),
            &inst.theta,
            &inst.w,
            &inst.rho,
            &inst.psi,
            0,
        );
        let h = 1e-6 * inst.geometry.wavelength;
        for _ in 0..4 {
            let c = Vec2::new(
                0.1 * (rng.random::<f64>() - 0.5),
                0.1 * (rng.random::<f64>() - 0.5),
            );
            let g = placement::gradient_mu(&coeffs, &c);
            let fd = Vec2::new(
                (placement::mu(&coeffs, &Vec2::new(c.x + h, c.y))
                    - placement::mu(&coeffs, &Vec2::new(c.x - h, c.y)))
                    / (2.0 * h),
                (placement::mu(&coeffs, &Vec2::new(c.x, c.y + h))
                    - placement::mu(&coeffs, &Vec2::new(c.x, c.y - h)))
                    / (2.0 * h),
            );
            let rel = (g - fd).norm() / fd.norm().max(1e-12);
            worst = worst.max(rel);
            if rel > 1e-4 {
                return Err(format!("seed {seed}: gradient relative error {rel:.3e}"));
            }
        }
    }
    Ok(format!("max gradient relative error {worst:.3e}"))
}

fn placement_equivalence_suite() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for seed in 0..3u64 {
        let inst = make_instance(seed + 800, 6, 2, 3, 2, 3);
        let group = 1;
        let coeffs = placement::build_coefficients(
            &inst.env,
            &inst.geometry,
            &inst.channels,
            &channel::ChannelScaling::unity(),
            &inst.theta,
            &inst.w,
            &inst.rho,
            &inst.psi,
            group,
        );
        let mut offsets = Vec::new();
        for _ in 0..10 {
            let c = Vec2::new(
                0.2 * (rng.random::<f64>() - 0.5),
                0.2 * (rng.random::<f64>() - 0.5),
            );
            let mut geom = inst.geometry.clone();
            let mut channels = inst.channels.clone();
            geom.group_refs[group] = c;
            channel::refresh_group_scaled(
                &mut channels,
                &geom,
                &inst.env,
                group,
                &channel::ChannelScaling::unity(),
            );
            let direct =
                fp::fp_linear_objective(&channels, &inst.theta, &inst.w, &inst.rho, &inst.psi);
            offsets.push(placement::mu(&coeffs, &c) - direct);
        }
        let mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
        let spread = offsets.iter().map(|o| (o - mean).abs()).fold(0.0, f64::max);
        if spread > 1e-8 {
            return Err(format!("seed {seed}: offset spread {spread:.3e}"));
        }
    }
    Ok("coefficient objective matches direct objective up to a constant".to_string())
}

fn determinism_suite() -> Result<String, String> {
    let params = EnvironmentParams {
        num_tx_paths: 4,
        num_rx_paths: 4,
        num_users: 2,
        rician_kappa: 1.0,
        pathloss_gamma0: 1e-3,
        pathloss_alpha: 2.2,
        bs_ris_distance: 50.0,
        ris_ue_radius: 2.0,
        min_ue_distance: 0.5,
    };
    let (a, ua) = sample_environment::<f64>(&params, 31).map_err(|e| e.to_string())?;
    let (b, ub) = sample_environment::<f64>(&params, 31).map_err(|e| e.to_string())?;
    if a != b || ua != ub {
        return Err("environment regeneration differs".to_string());
    }
    Ok("environment regeneration is bit-identical".to_string())
}

/// Run all suites; each entry reports pass/fail and a one-line detail.
pub fn run_selftest() -> Vec<SuiteResult> {
    vec![
        suite("scattering-constraints", scattering_suite),
        suite("fp-identity", fp_identity_suite),
        suite("beamformer-kkt", beamformer_suite),
        suite("admm-vectorization", vectorization_suite),
        suite("placement-gradient", placement_gradient_suite),
        suite("placement-equivalence", placement_equivalence_suite),
        suite("environment-determinism", determinism_suite),
    ]
}
