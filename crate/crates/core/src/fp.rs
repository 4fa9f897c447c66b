//! Fractional-programming reformulation and the outer alternating loop.
//!
//! The sum-of-log-ratios objective is handled with two auxiliary sets: the
//! SINR surrogates `ρ_k` and the quadratic-transform scalars `ψ_k`. Both have
//! closed-form optima, and substituting them back makes the reformulated
//! objective coincide with the true sum-rate, which is the identity the
//! tests pin down. The reformulation is kept in natural log internally (the
//! base for which the closed-form `ρ` update is the exact maximizer); rates
//! are reported in bits/s/Hz.
//!
//! The outer loop cycles auxiliaries → beamformer → scattering (ADMM) →
//! placement (SCA), guarding every inexact block with a sum-rate acceptance
//! check so the objective trace is monotone.

use crate::admm::{run_admm, AdmmConfig, AdmmState};
use crate::beamforming::{build_quadratics, solve_beamformer};
use crate::channel::{assemble_channels, ChannelScaling, ChannelSet, PathEnvironment};
use crate::error::Result;
use crate::geometry::SystemGeometry;
use crate::placement::{optimize_positions, PlacementConfig};
use crate::ris::{admittance_to_scattering, AdmittanceMatrix, RisArchitecture, ScatteringMatrix};
use crate::scalar::{real, CMat, CVec, Real, Vec2, C};
use serde::{Deserialize, Serialize};

/// Whether sub-panels may move or stay in the fixed-antenna layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mobility {
    /// Movable sub-panels: the placement block runs.
    Ma,
    /// Fixed baseline: the placement block is skipped.
    Fa,
}

impl std::fmt::Display for Mobility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mobility::Ma => write!(f, "MA"),
            Mobility::Fa => write!(f, "FA"),
        }
    }
}

/// Effective channels `v_k = Hᴴ Θᴴ h_k`; UE `k` receives `v_kᴴ w_i` from
/// stream `i`.
pub fn effective_channels<T: Real>(
    channels: &ChannelSet<T>,
    theta: &ScatteringMatrix<T>,
) -> Vec<CVec<T>> {
    channels
        .ris_ue
        .iter()
        .map(|h| channels.bs_ris.adjoint() * theta.apply_adjoint(h))
        .collect()
}

/// SINR of UE `k` under beamformer `w`.
pub fn sinr<T: Real>(
    channels: &ChannelSet<T>,
    theta: &ScatteringMatrix<T>,
    w: &CMat<T>,
    k: usize,
) -> T {
    let v_k = channels.bs_ris.adjoint() * theta.apply_adjoint(&channels.ris_ue[k]);
    let mut signal = T::zero();
    let mut interference = T::zero();
    for i in 0..w.ncols() {
        let s = (v_k.adjoint() * w.column(i))[(0, 0)];
        if i == k {
            signal = s.norm_sqr();
        } else {
            interference += s.norm_sqr();
        }
    }
    signal / (interference + channels.noise_power)
}

/// Sum rate `Σ_k log₂(1 + SINR_k)` in bits/s/Hz.
pub fn sum_rate<T: Real>(channels: &ChannelSet<T>, theta: &ScatteringMatrix<T>, w: &CMat<T>) -> T {
    let mut total = T::zero();
    for k in 0..channels.num_users() {
        total += (T::one() + sinr(channels, theta, w, k)).ln();
    }
    total / T::ln_2()
}

/// Closed-form auxiliary update: `ρ_k = SINR_k` and
/// `ψ_k = √(1+ρ_k) s_k / (Σ_i |s_{k,i}|² + σ²)` with `s_{k,i} = h_kᴴΘH w_i`.
pub fn update_auxiliaries<T: Real>(
    channels: &ChannelSet<T>,
    theta: &ScatteringMatrix<T>,
    w: &CMat<T>,
) -> (Vec<T>, Vec<C<T>>) {
    let v = effective_channels(channels, theta);
    let k_users = channels.num_users();
    let mut rho = Vec::with_capacity(k_users);
    let mut psi = Vec::with_capacity(k_users);
    for (k, vk) in v.iter().enumerate().take(k_users) {
        let mut signal = C::from(T::zero());
        let mut total = channels.noise_power;
        for i in 0..w.ncols() {
            let s = (vk.adjoint() * w.column(i))[(0, 0)];
            if i == k {
                signal = s;
            }
            total += s.norm_sqr();
        }
        let interf_plus_noise = total - signal.norm_sqr();
        let r = signal.norm_sqr() / interf_plus_noise;
        rho.push(r);
        psi.push(signal * C::from((T::one() + r).sqrt() / total));
    }
    (rho, psi)
}

/// Reformulated objective in bits/s/Hz:
/// `Σ_k [ln(1+ρ_k) − ρ_k + 2√(1+ρ_k) Re{s_k ψ_k*} − |ψ_k|²(Σ_i |s_{k,i}|² + σ²)] / ln 2`.
///
/// Equal to [`sum_rate`] whenever `(ρ, ψ)` come from
/// [`update_auxiliaries`] at the same `(Θ, W)`.
pub fn fp_objective<T: Real>(
    channels: &ChannelSet<T>,
    theta: &ScatteringMatrix<T>,
    w: &CMat<T>,
    rho: &[T],
    psi: &[C<T>],
) -> T {
    let mut nats = T::zero();
    for (rk, pk) in rho.iter().zip(psi) {
        nats += (T::one() + *rk).ln() - *rk - pk.norm_sqr() * channels.noise_power;
    }
    (nats + fp_linear_objective(channels, theta, w, rho, psi)) / T::ln_2()
}

/// The `(Θ, c)`-dependent part of the reformulated objective (nats):
/// `Σ_k 2√(1+ρ_k) Re{ψ_k* s_k} − |ψ_k|² Σ_i |s_{k,i}|²`.
///
/// This is the quantity the ADMM scattering block and the placement block
/// both maximize; the remaining terms are constant in their variables.
pub fn fp_linear_objective<T: Real>(
    channels: &ChannelSet<T>,
    theta: &ScatteringMatrix<T>,
    w: &CMat<T>,
    rho: &[T],
    psi: &[C<T>],
) -> T {
    let v = effective_channels(channels, theta);
    let two = real::<T>(2.0);
    let mut total = T::zero();
    for (k, (rk, pk)) in rho.iter().zip(psi).enumerate() {
        let mut power = T::zero();
        let mut signal = C::from(T::zero());
        for i in 0..w.ncols() {
            let s = (v[k].adjoint() * w.column(i))[(0, 0)];
            if i == k {
                signal = s;
            }
            power += s.norm_sqr();
        }
        total += two * (T::one() + *rk).sqrt() * (signal * pk.conj()).re - pk.norm_sqr() * power;
    }
    total
}

/// Outer-loop configuration.
#[derive(Debug, Clone)]
pub struct OptimizerConfig<T: Real> {
    /// Total transmit power budget `P` in watts.
    pub power: T,
    /// Relative objective change below which the outer loop stops.
    pub tol_outer: T,
    pub max_outer: usize,
    /// A block update is kept only if it does not decrease the sum rate by
    /// more than this.
    pub safeguard_tol: T,
    pub mobility: Mobility,
    pub admm: AdmmConfig<T>,
    pub placement: PlacementConfig<T>,
    /// Rescale channels to unit RMS entries (and the noise power
    /// accordingly) before optimizing. The problem is invariant under this
    /// scaling; it keeps the fixed ADMM penalty/tolerance meaningful across
    /// path-loss regimes.
    pub normalize: bool,
}

impl<T: Real> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            power: real(0.01), // 10 dBm
            tol_outer: real(1e-4),
            max_outer: 100,
            safeguard_tol: real(1e-8),
            mobility: Mobility::Ma,
            admm: AdmmConfig::default(),
            placement: PlacementConfig::default(),
            normalize: true,
        }
    }
}

/// Diagnostic flags accumulated over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunFlags {
    /// Some ADMM call returned without reaching its residual tolerance.
    pub admm_warning: bool,
    /// Some placement step hit an infeasible linearization.
    pub placement_infeasible: bool,
    /// The outer loop stopped at the iteration cap instead of converging.
    pub max_outer_reached: bool,
    /// Number of block updates rejected by the sum-rate safeguard.
    pub rejected_blocks: u32,
}

impl RunFlags {
    /// Compact token list for result tables ("ok" when clean).
    pub fn tokens(&self) -> String {
        let mut t = Vec::new();
        if self.admm_warning {
            t.push("admm_warn".to_string());
        }
        if self.placement_infeasible {
            t.push("sca_infeasible".to_string());
        }
        if self.max_outer_reached {
            t.push("max_outer".to_string());
        }
        if self.rejected_blocks > 0 {
            t.push(format!("rejected={}", self.rejected_blocks));
        }
        if t.is_empty() {
            "ok".to_string()
        } else {
            t.join(";")
        }
    }
}

/// Result of one joint optimization run.
#[derive(Debug, Clone)]
pub struct OptimizeResult<T: Real> {
    pub w: CMat<T>,
    pub theta: ScatteringMatrix<T>,
    pub admittance: AdmittanceMatrix<T>,
    /// Final sub-panel reference points.
    pub group_refs: Vec<Vec2<T>>,
    /// Sum rate after each accepted outer iteration (entry 0 is the
    /// initialization), bits/s/Hz.
    pub trace: Vec<T>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub final_admm_residual: T,
    pub flags: RunFlags,
}

impl<T: Real> OptimizeResult<T> {
    pub fn sum_rate(&self) -> T {
        *self.trace.last().expect("trace is never empty")
    }
}

/// Run the full alternating optimization on one scenario instance.
///
/// Starts from the fixed-antenna layout in `geometry`, identity scattering,
/// and a power-`P` MRT beamformer; cycles the four blocks until the
/// objective settles. Returns the best accepted iterate.
pub fn optimize<T: Real>(
    env: &PathEnvironment<T>,
    geometry: &SystemGeometry<T>,
    arch: &RisArchitecture,
    noise_power: T,
    config: &OptimizerConfig<T>,
) -> Result<OptimizeResult<T>> {
    let mut geometry = geometry.clone();
    geometry.validate()?;
    if arch.total_elements() != geometry.total_elements() {
        return Err(crate::error::Error::dimension(format!(
            "architecture has {} elements, geometry has {}",
            arch.total_elements(),
            geometry.total_elements()
        )));
    }

    let mut channels = assemble_channels(&geometry, env, noise_power)?;
    let scaling = if config.normalize {
        ChannelScaling::rms_of(&channels)
    } else {
        ChannelScaling::unity()
    };
    scaling.apply(&mut channels);

    let mut b = AdmittanceMatrix::zeros(*arch)
        .with_reference_impedance(config.admm.reference_impedance);
    let mut theta = admittance_to_scattering(&b);

    // MRT initialization scaled to the power budget.
    let n_t = channels.num_tx_antennas();
    let k_users = channels.num_users();
    let mut w = CMat::zeros(n_t, k_users);
    let v = effective_channels(&channels, &theta);
    let total_gain = v.iter().fold(T::zero(), |a, vk| a + vk.norm_squared());
    if total_gain > T::zero() && config.power > T::zero() {
        let scale = C::from((config.power / total_gain).sqrt());
        for (k, vk) in v.iter().enumerate() {
            w.set_column(k, &(vk * scale));
        }
    }

    let mut rate = sum_rate(&channels, &theta, &w);
    let mut trace = vec![rate];
    let mut flags = RunFlags::default();
    let mut admm_state: Option<AdmmState<T>> = None;
    let mut final_admm_residual = T::zero();
    let mut converged = false;
    let mut outer_iterations = 0;

    let mut best_rate = rate;
    let mut best = (
        w.clone(),
        theta.clone(),
        b.clone(),
        geometry.group_refs.clone(),
    );

    for _ in 0..config.max_outer {
        outer_iterations += 1;
        let prev_rate = rate;

        // Auxiliaries: exact closed form, makes the FP objective tight.
        let (rho, psi) = update_auxiliaries(&channels, &theta, &w);

        // Beamformer block.
        let quad = build_quadratics(&channels, &theta, &rho, &psi);
        let sol = solve_beamformer(&quad, config.power);
        let cand = sum_rate(&channels, &theta, &sol.w);
        if cand >= rate - config.safeguard_tol {
            w = sol.w;
            rate = cand;
        } else {
            flags.rejected_blocks += 1;
        }

        // Scattering block via partially proximal ADMM.
        let outcome = run_admm(
            &channels,
            &w,
            &rho,
            &psi,
            arch,
            &config.admm,
            admm_state.take(),
        )?;
        final_admm_residual = outcome.final_residual;
        if !outcome.converged {
            flags.admm_warning = true;
        }
        let cand = sum_rate(&channels, &outcome.scattering, &w);
        let mut state = outcome.state;
        if cand >= rate - config.safeguard_tol {
            b = outcome.admittance;
            theta = outcome.scattering;
            rate = cand;
        } else {
            flags.rejected_blocks += 1;
        }
        // Warm-start the next call from the accepted admittance and the last
        // splitting/dual variables.
        state.b = b.clone();
        admm_state = Some(state);

        // Placement block.
        if config.mobility == Mobility::Ma {
            let snap_refs = geometry.group_refs.clone();
            let snap_channels = channels.clone();
            // Re-tighten the auxiliaries at the post-beamforming iterate so
            // the placement objective bounds the rate at the current point.
            let (rho_c, psi_c) = update_auxiliaries(&channels, &theta, &w);
            let outcome = optimize_positions(
                env,
                &mut geometry,
                &mut channels,
                &scaling,
                &theta,
                &w,
                &rho_c,
                &psi_c,
                &config.placement,
            );
            if outcome.any_infeasible {
                flags.placement_infeasible = true;
            }
            let cand = sum_rate(&channels, &theta, &w);
            if cand >= rate - config.safeguard_tol {
                rate = cand;
                // The splitting variable targets Θᴴh_k; re-aim it at the
                // refreshed channels so the next ADMM call starts feasible
                // instead of chasing stale positions.
                if outcome.max_move > T::zero() {
                    if let Some(state) = admm_state.as_mut() {
                        for (k, h) in channels.ris_ue.iter().enumerate() {
                            state.u.set_column(k, &theta.apply_adjoint(h));
                        }
                        state.lambda.fill(crate::scalar::C::from(T::zero()));
                    }
                }
            } else {
                geometry.group_refs = snap_refs;
                channels = snap_channels;
                flags.rejected_blocks += 1;
            }
        }

        trace.push(rate);
        if rate > best_rate {
            best_rate = rate;
            best = (
                w.clone(),
                theta.clone(),
                b.clone(),
                geometry.group_refs.clone(),
            );
        }

        let rel = (rate - prev_rate).abs() / prev_rate.abs().max(real(1e-12));
        if rel <= config.tol_outer {
            converged = true;
            break;
        }
    }
    if !converged {
        flags.max_outer_reached = true;
    }

    let (w, theta, admittance, group_refs) = best;
    Ok(OptimizeResult {
        w,
        theta,
        admittance,
        group_refs,
        trace,
        outer_iterations,
        converged,
        final_admm_residual,
        flags,
    })
}
