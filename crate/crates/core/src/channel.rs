//! Field-response channel model.
//!
//! Channels are geometric: each link is a finite set of planar paths, and an
//! antenna at position `p` contributes the unit-modulus phase
//! `exp(j 2π/λ (x sinφ cosθ + y sinθ))` per path. The per-link path-response
//! matrix carries the complex path gains (diagonal, Rician power profile) and
//! absorbs the link path loss `sqrt(γ₀ d^{-α})`, which keeps all
//! field-response vectors unit modulus.

use crate::error::{Error, Result};
use crate::geometry::SystemGeometry;
use crate::scalar::{cis, real, CMat, CVec, Real, Vec2, C};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Azimuth/elevation pair of one propagation path, both in `[-π/2, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnglePair<T: Real> {
    pub azimuth: T,
    pub elevation: T,
}

impl<T: Real> AnglePair<T> {
    /// Projection coefficients of the phase ramp: `ρ(p) = p · projection`.
    /// The 2-vector `(sinφ cosθ, sinθ)` always has norm at most one.
    pub fn projection(&self) -> Vec2<T> {
        Vec2::new(
            self.azimuth.sin() * self.elevation.cos(),
            self.elevation.sin(),
        )
    }
}

/// Field-response vector of one antenna across `angles.len()` paths.
///
/// Entry `p` is `exp(j 2π/λ ρ_p(position))` with
/// `ρ_p = x sinφ_p cosθ_p + y sinθ_p`; every entry has unit modulus.
pub fn frv<T: Real>(position: &Vec2<T>, angles: &[AnglePair<T>], wavelength: T) -> CVec<T> {
    let two_pi_over_wl = T::two_pi() / wavelength;
    CVec::from_iterator(
        angles.len(),
        angles.iter().map(|a| {
            let rho = position.dot(&a.projection());
            cis(two_pi_over_wl * rho)
        }),
    )
}

/// Field-response matrix of a rigid sub-panel: column `m` is the FRV at
/// `ref_point + offsets[m]`. Because the phase ramp is linear in position,
/// this factorizes as the per-path phase of `ref_point` applied to the
/// offset-only FRM, which the placement machinery exploits.
pub fn frm<T: Real>(
    ref_point: &Vec2<T>,
    offsets: &[Vec2<T>],
    angles: &[AnglePair<T>],
    wavelength: T,
) -> CMat<T> {
    let mut out = CMat::zeros(angles.len(), offsets.len());
    for (m, d) in offsets.iter().enumerate() {
        let p = ref_point + d;
        out.set_column(m, &frv(&p, angles, wavelength));
    }
    out
}

/// Sampled propagation environment of one scenario instance.
///
/// Holds the path angles and path-response matrices (PRMs) of the BS→RIS
/// link and of every RIS→UE link. PRMs are diagonal with a Rician power
/// split and already include the link path loss.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnvironment<T: Real> {
    /// Departure angles at the BS (length `L_t`).
    pub bs_aod: Vec<AnglePair<T>>,
    /// Arrival angles at the surface for the BS link (length `L_r`).
    pub ris_aoa: Vec<AnglePair<T>>,
    /// Departure angles at the surface toward each UE (each length `L_t`).
    pub ue_aod: Vec<Vec<AnglePair<T>>>,
    /// PRM of the BS→RIS link, `L_r × L_t`.
    pub prm_bs_ris: CMat<T>,
    /// PRM of each RIS→UE link, `L_r × L_t`.
    pub prm_ris_ue: Vec<CMat<T>>,
    pub rician_kappa: T,
    pub pathloss_gamma0: T,
    pub pathloss_alpha: T,
}

impl<T: Real> PathEnvironment<T> {
    pub fn num_tx_paths(&self) -> usize {
        self.bs_aod.len()
    }

    pub fn num_rx_paths(&self) -> usize {
        self.ris_aoa.len()
    }

    pub fn num_users(&self) -> usize {
        self.ue_aod.len()
    }
}

/// Parameters for [`sample_environment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentParams<T: Real> {
    pub num_tx_paths: usize,
    pub num_rx_paths: usize,
    pub num_users: usize,
    /// LoS/NLoS power ratio κ.
    pub rician_kappa: T,
    /// Linear channel gain at 1 m.
    pub pathloss_gamma0: T,
    /// Path-loss exponent α.
    pub pathloss_alpha: T,
    /// BS→RIS distance in meters.
    pub bs_ris_distance: T,
    /// Users are dropped uniformly in a disc of this radius around the
    /// surface origin.
    pub ris_ue_radius: T,
    /// UE distances are floored at this value for the path-loss evaluation.
    pub min_ue_distance: T,
}

fn uniform_angle<T: Real, R: Rng>(rng: &mut R) -> T {
    // Uniform on [-π/2, π/2]; drawn in f64 so every scalar type sees the
    // same sequence.
    let u: f64 = rng.random();
    real::<T>((u - 0.5) * std::f64::consts::PI)
}

fn angle_pair<T: Real, R: Rng>(rng: &mut R) -> AnglePair<T> {
    AnglePair {
        azimuth: uniform_angle(rng),
        elevation: uniform_angle(rng),
    }
}

fn complex_gaussian<T: Real, R: Rng>(rng: &mut R, variance: f64) -> C<T> {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C::new(real(s * re), real(s * im))
}

/// Diagonal Rician PRM: entry (1,1) carries the LoS power `κ/(κ+1)`, each of
/// the remaining `L−1` diagonal entries carries `1/((κ+1)(L−1))`, so the
/// average total power is one before the path-loss scale. With a single
/// path all power goes to the LoS entry.
fn rician_diagonal_prm<T: Real, R: Rng>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    kappa: f64,
    amplitude_scale: f64,
) -> CMat<T> {
    let l = rows.min(cols);
    let mut prm = CMat::zeros(rows, cols);
    for i in 0..l {
        let variance = if l == 1 {
            1.0
        } else if i == 0 {
            kappa / (kappa + 1.0)
        } else {
            1.0 / ((kappa + 1.0) * (l - 1) as f64)
        };
        prm[(i, i)] = complex_gaussian::<T, _>(rng, variance) * C::from(real::<T>(amplitude_scale));
    }
    prm
}

/// Path loss `η(d) = γ₀ d^{-α}` (linear power gain).
pub fn path_loss<T: Real>(gamma0: T, alpha: T, distance: T) -> T {
    gamma0 * distance.powf(-alpha)
}

/// Draw a fresh propagation environment and UE drop from the seed.
///
/// Returns the environment together with the sampled user positions (the
/// caller stores those in its [`SystemGeometry`]). The draw order is fixed,
/// so a given `(params, seed)` pair regenerates bit-identical output.
pub fn sample_environment<T: Real>(
    params: &EnvironmentParams<T>,
    seed: u64,
) -> Result<(PathEnvironment<T>, Vec<Vec2<T>>)> {
    if params.num_tx_paths == 0 || params.num_rx_paths == 0 {
        return Err(Error::config("path counts must be at least one"));
    }
    if params.rician_kappa < T::zero() {
        return Err(Error::config("rician kappa must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kappa = params.rician_kappa.to_f64().unwrap();
    let gamma0 = params.pathloss_gamma0.to_f64().unwrap();
    let alpha = params.pathloss_alpha.to_f64().unwrap();

    let bs_aod: Vec<AnglePair<T>> = (0..params.num_tx_paths).map(|_| angle_pair(&mut rng)).collect();
    let ris_aoa: Vec<AnglePair<T>> = (0..params.num_rx_paths).map(|_| angle_pair(&mut rng)).collect();

    let d_bi = params.bs_ris_distance.to_f64().unwrap();
    let bs_scale = (gamma0 * d_bi.powf(-alpha)).sqrt();
    let prm_bs_ris = rician_diagonal_prm(
        &mut rng,
        params.num_rx_paths,
        params.num_tx_paths,
        kappa,
        bs_scale,
    );

    let mut ue_positions = Vec::with_capacity(params.num_users);
    let mut ue_aod = Vec::with_capacity(params.num_users);
    let mut prm_ris_ue = Vec::with_capacity(params.num_users);
    let radius = params.ris_ue_radius.to_f64().unwrap();
    let floor = params.min_ue_distance.to_f64().unwrap();
    for _ in 0..params.num_users {
        // Uniform drop in the disc.
        let u: f64 = rng.random();
        let phi: f64 = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
        let r = radius * u.sqrt();
        ue_positions.push(Vec2::new(real::<T>(r * phi.cos()), real::<T>(r * phi.sin())));
        ue_aod.push(
            (0..params.num_tx_paths)
                .map(|_| angle_pair::<T, _>(&mut rng))
                .collect::<Vec<_>>(),
        );
        let d = r.max(floor);
        let ue_scale = (gamma0 * d.powf(-alpha)).sqrt();
        prm_ris_ue.push(rician_diagonal_prm(
            &mut rng,
            params.num_rx_paths,
            params.num_tx_paths,
            kappa,
            ue_scale,
        ));
    }

    Ok((
        PathEnvironment {
            bs_aod,
            ris_aoa,
            ue_aod,
            prm_bs_ris,
            prm_ris_ue,
            rician_kappa: params.rician_kappa,
            pathloss_gamma0: params.pathloss_gamma0,
            pathloss_alpha: params.pathloss_alpha,
        },
        ue_positions,
    ))
}

/// All channels of one scenario instance.
#[derive(Debug, Clone)]
pub struct ChannelSet<T: Real> {
    /// BS→RIS channel, `M × N_t`, stacked per group.
    pub bs_ris: CMat<T>,
    /// RIS→UE channels `h_k`, each of length `M`.
    pub ris_ue: Vec<CVec<T>>,
    /// Noise power σ² in watts.
    pub noise_power: T,
}

impl<T: Real> ChannelSet<T> {
    pub fn num_users(&self) -> usize {
        self.ris_ue.len()
    }

    pub fn num_elements(&self) -> usize {
        self.bs_ris.nrows()
    }

    pub fn num_tx_antennas(&self) -> usize {
        self.bs_ris.ncols()
    }
}

/// Divisors applied to the two channel ensembles (and, quadratically, to the
/// noise power). SINRs and rates are exactly invariant under this scaling;
/// the optimizer uses it to bring channel entries to unit RMS so that fixed
/// penalty parameters and absolute tolerances behave the same regardless of
/// the path-loss regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelScaling<T: Real> {
    pub bs_ris_divisor: T,
    pub ris_ue_divisor: T,
}

impl<T: Real> ChannelScaling<T> {
    pub fn unity() -> Self {
        Self {
            bs_ris_divisor: T::one(),
            ris_ue_divisor: T::one(),
        }
    }

    /// Divisors equal to the RMS entry magnitude of each ensemble.
    pub fn rms_of(channels: &ChannelSet<T>) -> Self {
        let h_entries = real::<T>((channels.bs_ris.len()) as f64);
        let bs = (channels.bs_ris.norm_squared() / h_entries).sqrt();
        let mut mass = T::zero();
        let mut count = 0usize;
        for h in &channels.ris_ue {
            mass += h.norm_squared();
            count += h.len();
        }
        let ue = (mass / real::<T>(count.max(1) as f64)).sqrt();
        Self {
            bs_ris_divisor: if bs > T::zero() { bs } else { T::one() },
            ris_ue_divisor: if ue > T::zero() { ue } else { T::one() },
        }
    }

    /// Scale a freshly assembled channel set (including its noise power).
    pub fn apply(&self, channels: &mut ChannelSet<T>) {
        let inv_h = C::from(T::one() / self.bs_ris_divisor);
        let inv_u = C::from(T::one() / self.ris_ue_divisor);
        channels.bs_ris *= inv_h;
        for h in channels.ris_ue.iter_mut() {
            *h *= inv_u;
        }
        channels.noise_power = channels.noise_power
            / (self.bs_ris_divisor * self.bs_ris_divisor)
            / (self.ris_ue_divisor * self.ris_ue_divisor);
    }

    /// Rescale only group `g`'s rows, after [`refresh_group`] rewrote them
    /// with physical values.
    pub fn rescale_group(&self, channels: &mut ChannelSet<T>, group_rows: std::ops::Range<usize>) {
        let inv_h = C::from(T::one() / self.bs_ris_divisor);
        let inv_u = C::from(T::one() / self.ris_ue_divisor);
        let n = group_rows.len();
        let mut block = channels.bs_ris.rows_mut(group_rows.start, n);
        block *= inv_h;
        for h in channels.ris_ue.iter_mut() {
            let mut seg = h.rows_mut(group_rows.start, n);
            seg *= inv_u;
        }
    }
}

/// Refresh group `g` from the environment and re-apply the scaling to the
/// rewritten block.
pub fn refresh_group_scaled<T: Real>(
    channels: &mut ChannelSet<T>,
    geometry: &SystemGeometry<T>,
    env: &PathEnvironment<T>,
    g: usize,
    scaling: &ChannelScaling<T>,
) {
    refresh_group(channels, geometry, env, g);
    let n_e = geometry.group_size();
    scaling.rescale_group(channels, g * n_e..(g + 1) * n_e);
}

fn check_dims<T: Real>(geometry: &SystemGeometry<T>, env: &PathEnvironment<T>) -> Result<()> {
    if env.prm_bs_ris.nrows() != env.num_rx_paths() || env.prm_bs_ris.ncols() != env.num_tx_paths()
    {
        return Err(Error::dimension(format!(
            "BS-RIS PRM is {}x{}, expected {}x{}",
            env.prm_bs_ris.nrows(),
            env.prm_bs_ris.ncols(),
            env.num_rx_paths(),
            env.num_tx_paths()
        )));
    }
    for (k, prm) in env.prm_ris_ue.iter().enumerate() {
        if prm.nrows() != env.num_rx_paths() || prm.ncols() != env.num_tx_paths() {
            return Err(Error::dimension(format!("UE {k} PRM has wrong shape")));
        }
        if env.ue_aod[k].len() != env.num_tx_paths() {
            return Err(Error::dimension(format!("UE {k} angle list has wrong length")));
        }
    }
    if env.num_users() != geometry.num_users() {
        return Err(Error::dimension(
            "environment and geometry disagree on the number of users",
        ));
    }
    Ok(())
}

/// One group's rows of the BS→RIS channel: `H_g = Fᴴ(c_g) Σ_br G(b)`.
fn bs_ris_group_block<T: Real>(
    geometry: &SystemGeometry<T>,
    env: &PathEnvironment<T>,
    bs_frm: &CMat<T>,
    g: usize,
) -> CMat<T> {
    let f = frm(
        &geometry.group_refs[g],
        &geometry.intra_group_offsets,
        &env.ris_aoa,
        geometry.wavelength,
    );
    f.adjoint() * &env.prm_bs_ris * bs_frm
}

/// One group's entries of the RIS→UE channel: `h_{k,g} = G_kᴴ(c_g) Σ_kᴴ 1`.
fn ris_ue_group_block<T: Real>(
    geometry: &SystemGeometry<T>,
    env: &PathEnvironment<T>,
    k: usize,
    g: usize,
) -> CVec<T> {
    let gk = frm(
        &geometry.group_refs[g],
        &geometry.intra_group_offsets,
        &env.ue_aod[k],
        geometry.wavelength,
    );
    let ones = CVec::from_element(env.num_rx_paths(), C::from(T::one()));
    gk.adjoint() * (env.prm_ris_ue[k].adjoint() * ones)
}

/// Assemble the full `M × N_t` BS→RIS channel (group blocks stacked).
pub fn assemble_bs_ris_channel<T: Real>(
    geometry: &SystemGeometry<T>,
    env: &PathEnvironment<T>,
) -> Result<CMat<T>> {
    check_dims(geometry, env)?;
    let bs_frm = frm(
        &Vec2::zeros(),
        &geometry.bs_positions,
        &env.bs_aod,
        geometry.wavelength,
    );
    let (m, n_e) = (geometry.total_elements(), geometry.group_size());
    let mut h = CMat::zeros(m, geometry.bs_positions.len());
    for g in 0..geometry.num_groups() {
        let block = bs_ris_group_block(geometry, env, &bs_frm, g);
        h.view_mut((g * n_e, 0), (n_e, h.ncols())).copy_from(&block);
    }
    Ok(h)
}

/// Assemble the `M`-element RIS→UE channel of user `ue_index`.
pub fn assemble_ris_ue_channel<T: Real>(
    geometry: &SystemGeometry<T>,
    env: &PathEnvironment<T>,
    ue_index: usize,
) -> Result<CVec<T>> {
    check_dims(geometry, env)?;
    let n_e = geometry.group_size();
    let mut h = CVec::zeros(geometry.total_elements());
    for g in 0..geometry.num_groups() {
        let block = ris_ue_group_block(geometry, env, ue_index, g);
        h.rows_mut(g * n_e, n_e).copy_from(&block);
    }
    Ok(h)
}

/// Build every channel of the instance.
pub fn assemble_channels<T: Real>(
    geometry: &SystemGeometry<T>,
    env: &PathEnvironment<T>,
    noise_power: T,
) -> Result<ChannelSet<T>> {
    let bs_ris = assemble_bs_ris_channel(geometry, env)?;
    let ris_ue = (0..env.num_users())
        .map(|k| assemble_ris_ue_channel(geometry, env, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelSet {
        bs_ris,
        ris_ue,
        noise_power,
    })
}

/// Recompute only group `g`'s rows/entries after that group moved. Other
/// blocks are untouched.
pub fn refresh_group<T: Real>(
    channels: &mut ChannelSet<T>,
    geometry: &SystemGeometry<T>,
    env: &PathEnvironment<T>,
    g: usize,
) {
    let n_e = geometry.group_size();
    let bs_frm = frm(
        &Vec2::zeros(),
        &geometry.bs_positions,
        &env.bs_aod,
        geometry.wavelength,
    );
    let block = bs_ris_group_block(geometry, env, &bs_frm, g);
    channels
        .bs_ris
        .view_mut((g * n_e, 0), (n_e, channels.bs_ris.ncols()))
        .copy_from(&block);
    for k in 0..env.num_users() {
        let hb = ris_ue_group_block(geometry, env, k, g);
        channels.ris_ue[k].rows_mut(g * n_e, n_e).copy_from(&hb);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;
    use crate::ris::RisArchitecture;

    fn test_geometry(arch: &RisArchitecture, n_t: usize, k: usize) -> SystemGeometry<f64> {
        let wl = 0.01;
        let m = arch.total_elements();
        let region = Region::centered(2.0 * (m as f64) * wl, 8.0 * wl);
        SystemGeometry::linear(arch, n_t, k, wl, region, 50.0, 2.0).unwrap()
    }

    fn unit_params(l: usize, k: usize) -> EnvironmentParams<f64> {
        EnvironmentParams {
            num_tx_paths: l,
            num_rx_paths: l,
            num_users: k,
            rician_kappa: 1.0,
            pathloss_gamma0: 1.0,
            pathloss_alpha: 0.0,
            bs_ris_distance: 50.0,
            ris_ue_radius: 2.0,
            min_ue_distance: 0.5,
        }
    }

    #[test]
    fn frv_at_origin_is_all_ones() {
        let angles: Vec<AnglePair<f64>> = vec![
            AnglePair { azimuth: 0.3, elevation: -0.2 },
            AnglePair { azimuth: -1.1, elevation: 0.7 },
        ];
        let v = frv(&Vec2::zeros(), &angles, 0.01);
        for e in v.iter() {
            assert!((e - C::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn frv_half_wavelength_projection() {
        // Position (λ/2, 0), single path φ = π/2, θ = 0 → exp(jπ) = −1.
        let angles = vec![AnglePair {
            azimuth: std::f64::consts::FRAC_PI_2,
            elevation: 0.0,
        }];
        let v = frv(&Vec2::new(0.005, 0.0), &angles, 0.01);
        assert!((v[0] - C::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn frv_matches_scalar_oracle() {
        // Independent per-entry evaluation.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let wl = 0.01;
        for _ in 0..50 {
            let pos = Vec2::new(rng.random::<f64>() * 0.1, rng.random::<f64>() * 0.1);
            let angles: Vec<AnglePair<f64>> = (0..4).map(|_| angle_pair(&mut rng)).collect();
            let v = frv(&pos, &angles, wl);
            for (p, a) in angles.iter().enumerate() {
                let rho = pos.x * a.azimuth.sin() * a.elevation.cos() + pos.y * a.elevation.sin();
                let phase = 2.0 * std::f64::consts::PI / wl * rho;
                let expect = C::new(phase.cos(), phase.sin());
                assert!((v[p] - expect).norm() < 1e-12);
                assert!((v[p].norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frm_columns_are_frvs_and_factor_by_reference_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let wl = 0.01;
        let offsets: Vec<Vec2<f64>> = (0..3).map(|m| Vec2::new(m as f64 * wl / 2.0, 0.0)).collect();
        let angles: Vec<AnglePair<f64>> = (0..4).map(|_| angle_pair(&mut rng)).collect();
        let refp = Vec2::new(0.037, -0.012);

        let mat = frm(&refp, &offsets, &angles, wl);
        for (m, d) in offsets.iter().enumerate() {
            let col = frv(&(refp + d), &angles, wl);
            assert!((mat.column(m) - col).norm() < 1e-12);
        }
        // Shifting the reference multiplies row p by the per-path phase of
        // the shift.
        let at_origin = frm(&Vec2::zeros(), &offsets, &angles, wl);
        let ref_phase = frv(&refp, &angles, wl);
        for p in 0..angles.len() {
            for m in 0..offsets.len() {
                let predicted = ref_phase[p] * at_origin[(p, m)];
                assert!((mat[(p, m)] - predicted).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn trivial_channel_is_all_ones() {
        // L_t = L_r = 1, unit PRM, all positions at the origin.
        let arch = RisArchitecture::grouped(4, 2).unwrap();
        let mut geom = test_geometry(&arch, 3, 1);
        for b in geom.bs_positions.iter_mut() {
            *b = Vec2::zeros();
        }
        for c in geom.group_refs.iter_mut() {
            *c = Vec2::zeros();
        }
        geom.intra_group_offsets = vec![Vec2::zeros(); 2];
        let env = PathEnvironment {
            bs_aod: vec![AnglePair { azimuth: 0.4, elevation: 0.1 }],
            ris_aoa: vec![AnglePair { azimuth: -0.2, elevation: 0.6 }],
            ue_aod: vec![vec![AnglePair { azimuth: 0.9, elevation: -0.4 }]],
            prm_bs_ris: CMat::identity(1, 1),
            prm_ris_ue: vec![CMat::identity(1, 1)],
            rician_kappa: 1.0,
            pathloss_gamma0: 1.0,
            pathloss_alpha: 0.0,
        };
        let h = assemble_bs_ris_channel(&geom, &env).unwrap();
        for e in h.iter() {
            assert!((e - C::new(1.0, 0.0)).norm() < 1e-12);
        }
        let hk = assemble_ris_ue_channel(&geom, &env, 0).unwrap();
        for e in hk.iter() {
            assert!((e - C::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn channel_matches_path_sum_oracle() {
        // Brute-force sum over path pairs: H[(g,m), i] = Σ_{p,q} f_p* Σ_{pq} g_q.
        let arch = RisArchitecture::grouped(6, 3).unwrap();
        let geom = test_geometry(&arch, 4, 2);
        let (env, _) = sample_environment(&unit_params(3, 2), 99).unwrap();
        let h = assemble_bs_ris_channel(&geom, &env).unwrap();

        for g in 0..arch.num_groups() {
            for m in 0..arch.group_size() {
                let t = geom.element_position(g, m);
                let f = frv(&t, &env.ris_aoa, geom.wavelength);
                for i in 0..geom.bs_positions.len() {
                    let gv = frv(&geom.bs_positions[i], &env.bs_aod, geom.wavelength);
                    let mut acc = C::new(0.0, 0.0);
                    for p in 0..env.num_rx_paths() {
                        for q in 0..env.num_tx_paths() {
                            acc += f[p].conj() * env.prm_bs_ris[(p, q)] * gv[q];
                        }
                    }
                    assert!((h[(g * 3 + m, i)] - acc).norm() < 1e-12);
                }
            }
        }

        for k in 0..2 {
            let hk = assemble_ris_ue_channel(&geom, &env, k).unwrap();
            for g in 0..arch.num_groups() {
                for m in 0..arch.group_size() {
                    let t = geom.element_position(g, m);
                    let gv = frv(&t, &env.ue_aod[k], geom.wavelength);
                    let mut acc = C::new(0.0, 0.0);
                    for p in 0..env.num_rx_paths() {
                        for q in 0..env.num_tx_paths() {
                            // h = Gᴴ Σᴴ 1 → entry = Σ_{p,q} g_q* conj(Σ_{pq})
                            acc += gv[q].conj() * env.prm_ris_ue[k][(p, q)].conj();
                        }
                    }
                    assert!((hk[g * 3 + m] - acc).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn channel_linear_in_prm() {
        let arch = RisArchitecture::grouped(4, 2).unwrap();
        let geom = test_geometry(&arch, 3, 1);
        let (mut env, _) = sample_environment(&unit_params(4, 1), 1).unwrap();
        let h1 = assemble_bs_ris_channel(&geom, &env).unwrap();
        // Power-of-two scale: exact in floating point.
        env.prm_bs_ris *= C::new(2.0, 0.0);
        let h2 = assemble_bs_ris_channel(&geom, &env).unwrap();
        assert!((&h2 - &h1 * C::new(2.0, 0.0)).norm() == 0.0);
        // General scales hold to rounding error.
        env.prm_bs_ris *= C::new(1.25, 0.0);
        let h3 = assemble_bs_ris_channel(&geom, &env).unwrap();
        assert!((h3 - h2 * C::new(1.25, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn moving_one_group_touches_only_its_block() {
        let arch = RisArchitecture::grouped(6, 2).unwrap();
        let mut geom = test_geometry(&arch, 4, 2);
        let (env, _) = sample_environment(&unit_params(4, 2), 17).unwrap();
        let mut channels = assemble_channels(&geom, &env, 1e-11).unwrap();
        let before = channels.clone();

        let shift = Vec2::new(3.0 * geom.wavelength, -0.5 * geom.wavelength);
        geom.group_refs[1] += shift;
        refresh_group(&mut channels, &geom, &env, 1);

        // Other groups' blocks unchanged bit for bit.
        for g in [0usize, 2] {
            for r in arch.group_rows(g) {
                for c in 0..channels.bs_ris.ncols() {
                    assert_eq!(channels.bs_ris[(r, c)], before.bs_ris[(r, c)]);
                }
                for k in 0..2 {
                    assert_eq!(channels.ris_ue[k][r], before.ris_ue[k][r]);
                }
            }
        }
        // Moved block changed by per-path phase factors: row of H scales as
        // f(t+Δ) = phase(Δ) f(t), verified against a fresh assembly.
        let fresh = assemble_channels(&geom, &env, 1e-11).unwrap();
        assert!((fresh.bs_ris - &channels.bs_ris).norm() < 1e-13);
        for k in 0..2 {
            assert!((&fresh.ris_ue[k] - &channels.ris_ue[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn mismatched_environment_is_rejected() {
        let arch = RisArchitecture::grouped(4, 2).unwrap();
        let geom = test_geometry(&arch, 3, 2);
        let (mut env, _) = sample_environment(&unit_params(3, 2), 4).unwrap();
        env.prm_bs_ris = CMat::zeros(2, 3); // wrong L_r
        assert!(assemble_bs_ris_channel(&geom, &env).is_err());

        let (env2, _) = sample_environment(&unit_params(3, 1), 4).unwrap();
        // one user in env, two in geometry
        assert!(assemble_channels(&geom, &env2, 1e-3).is_err());
    }

    #[test]
    fn environment_regeneration_is_bit_identical() {
        let params = EnvironmentParams {
            num_tx_paths: 5,
            num_rx_paths: 5,
            num_users: 2,
            rician_kappa: 1.0,
            pathloss_gamma0: 1e-3,
            pathloss_alpha: 2.2,
            bs_ris_distance: 50.0,
            ris_ue_radius: 2.0,
            min_ue_distance: 0.5,
        };
        let (a, ua) = sample_environment::<f64>(&params, 42).unwrap();
        let (b, ub) = sample_environment::<f64>(&params, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(ua, ub);
        let (c, _) = sample_environment::<f64>(&params, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_path_puts_all_power_in_los() {
        let mut params = unit_params(1, 1);
        params.rician_kappa = 1.0;
        let (env, _) = sample_environment::<f64>(&params, 3).unwrap();
        assert_eq!(env.prm_bs_ris.nrows(), 1);
        assert!(env.prm_bs_ris[(0, 0)].norm() > 0.0);
    }

    #[test]
    fn pathloss_scale_at_unit_distance() {
        // γ0 = −30 dB at d = 1 m → power scale 1e−3.
        let g0 = 10f64.powf(-30.0 / 10.0);
        assert!((path_loss(g0, 2.2, 1.0) - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn rician_power_ratio_matches_kappa() {
        // Empirical LoS/NLoS ratio over many draws ≈ κ(L−1) within 5%.
        let l = 4;
        let kappa = 1.0;
        let mut los = 0.0;
        let mut nlos = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..10_000 {
            let prm = rician_diagonal_prm::<f64, _>(&mut rng, l, l, kappa, 1.0);
            los += prm[(0, 0)].norm_sqr();
            for i in 1..l {
                nlos += prm[(i, i)].norm_sqr();
            }
        }
        let ratio = los / (nlos / (l - 1) as f64);
        let expect = kappa * (l - 1) as f64;
        assert!(
            (ratio / expect - 1.0).abs() < 0.05,
            "ratio {ratio}, expected {expect}"
        );
    }

    #[test]
    fn equal_split_at_kappa_one_two_paths() {
        // κ=1, L=2: LoS and NLoS variances coincide.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut p0 = 0.0;
        let mut p1 = 0.0;
        for _ in 0..20_000 {
            let prm = rician_diagonal_prm::<f64, _>(&mut rng, 2, 2, 1.0, 1.0);
            p0 += prm[(0, 0)].norm_sqr();
            p1 += prm[(1, 1)].norm_sqr();
        }
        assert!((p0 / p1 - 1.0).abs() < 0.05);
    }
}
