//! Sub-panel placement via successive convex approximation.
//!
//! For one group `g` with everything else frozen, the reformulated objective
//! restricted to the reference point `c_g` collapses (up to a constant) to
//!
//! `μ(c_g) = Σ_k [ −Σ_{k'} |fᴴ(c_g) C_{k,k'} g_k(c_g)|² + 2Re{fᴴ(c_g) E_k g_k(c_g)} ]`
//!
//! where the coefficient matrices come from a trace/Kronecker rewrite of the
//! objective: `C̃ = Θ_gᵀ ⊗ (Σ_br G(b) w_{k'} ψ_k* 1ᴴΣ_k)`, compressed by the
//! fixed intra-group offsets (block-diagonal phase matrices applied on both
//! sides, then the `N_E × N_E` grid of `L_r × L_t` sub-blocks summed). The
//! cross-group scalars `a_{k,k'}` accumulate the frozen groups' contributions.
//!
//! `μ` is a finite cosine series in `c_g`, so its gradient is analytic and
//! its Hessian norm is bounded by `δ_g`; the concave second-order surrogate
//! is maximized exactly over the box and the linearized spacing half-planes
//! by candidate enumeration (the variable is 2-D).

use crate::channel::{
    frm, refresh_group_scaled, ChannelScaling, ChannelSet, PathEnvironment,
};
use crate::geometry::{Region, SystemGeometry};
use crate::ris::ScatteringMatrix;
use crate::scalar::{cis, real, CMat, CVec, Real, Vec2, C};
use nalgebra::ComplexField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementConfig<T: Real> {
    /// Sweep convergence threshold on the largest reference-point move, as a
    /// fraction of the wavelength.
    pub tol_factor: T,
    pub max_sweeps: usize,
}

impl<T: Real> Default for PlacementConfig<T> {
    fn default() -> Self {
        Self {
            tol_factor: real(1e-4),
            // A 20-sweep cap starves the block: the curvature bound keeps
            // individual steps at a small fraction of a wavelength, so a
            // sweep budget this side of a few hundred returns long before
            // the per-call position update has settled.
            max_sweeps: 200,
        }
    }
}

/// Coefficients of `μ(c_g)` for one group, all other variables frozen.
#[derive(Debug, Clone)]
pub struct PlacementCoefficients<T: Real> {
    pub group: usize,
    pub wavelength: T,
    pub num_users: usize,
    /// `C_{k,k'}` at index `k * K + k'`, each `L_r × L_t`.
    pub c: Vec<CMat<T>>,
    /// `D_k = √(1+ρ_k) C_{k,k}`.
    pub d: Vec<CMat<T>>,
    /// `E_k = −Σ_{k'} a_{k,k'} C_{k,k'} + D_k`.
    pub e: Vec<CMat<T>>,
    /// Cross-group scalars `a_{k,k'}` at index `k * K + k'`.
    pub a: Vec<C<T>>,
    /// Receive-path phase projections (BS→RIS link), length `L_r`.
    pub rx_proj: Vec<Vec2<T>>,
    /// Transmit-path phase projections toward each UE, `K × L_t`.
    pub tx_proj: Vec<Vec<Vec2<T>>>,
}

impl<T: Real> PlacementCoefficients<T> {
    fn num_rx(&self) -> usize {
        self.rx_proj.len()
    }

    fn num_tx(&self) -> usize {
        self.tx_proj.first().map_or(0, |v| v.len())
    }

    /// FRV of the reference point over the receive paths, from the stored
    /// projections.
    fn f_vec(&self, c: &Vec2<T>) -> CVec<T> {
        let k0 = T::two_pi() / self.wavelength;
        CVec::from_iterator(
            self.rx_proj.len(),
            self.rx_proj.iter().map(|p| cis(k0 * c.dot(p))),
        )
    }

    fn g_vec(&self, c: &Vec2<T>, k: usize) -> CVec<T> {
        let k0 = T::two_pi() / self.wavelength;
        CVec::from_iterator(
            self.tx_proj[k].len(),
            self.tx_proj[k].iter().map(|p| cis(k0 * c.dot(p))),
        )
    }
}

/// Build the `μ` coefficients for `group`, freezing every other group at its
/// current position (their contributions enter through the cross-group
/// scalars, evaluated directly from the current channel blocks).
#[allow(clippy::too_many_arguments)]
pub fn build_coefficients<T: Real>(
    env: &PathEnvironment<T>,
    geometry: &SystemGeometry<T>,
    channels: &ChannelSet<T>,
    scaling: &ChannelScaling<T>,
    theta: &ScatteringMatrix<T>,
    w: &CMat<T>,
    rho: &[T],
    psi: &[C<T>],
    group: usize,
) -> PlacementCoefficients<T> {
    let k_users = channels.num_users();
    let l_r = env.num_rx_paths();
    let l_t = env.num_tx_paths();
    let wavelength = geometry.wavelength;
    let arch = theta.architecture();
    let n_e = arch.group_size();

    // Path-response data of the two links, on the same scale as the channels.
    let prm_scale = C::from(T::one() / (scaling.bs_ris_divisor * scaling.ris_ue_divisor));
    let g_bs = frm(
        &Vec2::zeros(),
        &geometry.bs_positions,
        &env.bs_aod,
        wavelength,
    );
    // Left factors Σ_br G(b) w_{k'} and right factors ψ_k* 1ᴴΣ_k.
    let left: Vec<CVec<T>> = (0..k_users)
        .map(|kp| &env.prm_bs_ris * (&g_bs * w.column(kp)))
        .collect();
    let right: Vec<nalgebra::RowDVector<C<T>>> = (0..k_users)
        .map(|k| {
            let mut row = nalgebra::RowDVector::zeros(l_t);
            for j in 0..l_t {
                let mut acc = C::from(T::zero());
                for p in 0..l_r {
                    acc += env.prm_ris_ue[k][(p, j)];
                }
                row[j] = acc * psi[k].conj();
            }
            row
        })
        .collect();

    // Offset compression: W_k = conj(F_δ) Θ_gᵀ G_{δ,k}ᵀ, the sub-block sum of
    // the phase-shifted Kronecker form.
    let f_delta = frm(
        &Vec2::zeros(),
        &geometry.intra_group_offsets,
        &env.ris_aoa,
        wavelength,
    );
    let theta_g_t = theta.block(group).transpose();
    let w_mats: Vec<CMat<T>> = (0..k_users)
        .map(|k| {
            let g_delta = frm(
                &Vec2::zeros(),
                &geometry.intra_group_offsets,
                &env.ue_aod[k],
                wavelength,
            );
            f_delta.map(|e| e.conj()) * &theta_g_t * g_delta.transpose()
        })
        .collect();

    let mut c_mats = Vec::with_capacity(k_users * k_users);
    for k in 0..k_users {
        for lvec in left.iter().take(k_users) {
            let z = (lvec * &right[k]).map(|e| e * prm_scale);
            c_mats.push(w_mats[k].component_mul(&z));
        }
    }

    // Cross-group scalars from the current (frozen) channel blocks:
    // a_{k,k'} = conj( Σ_{i≠g} ψ_k* h_{k,i}ᴴ Θ_i H_i w_{k'} ).
    let mut a = vec![C::from(T::zero()); k_users * k_users];
    for k in 0..k_users {
        for kp in 0..k_users {
            let mut acc = C::from(T::zero());
            for i in 0..arch.num_groups() {
                if i == group {
                    continue;
                }
                let r0 = arch.group_rows(i).start;
                let h_block = channels.ris_ue[k].rows(r0, n_e);
                let h_rows = channels.bs_ris.rows(r0, n_e);
                let s = (h_block.adjoint() * theta.block(i) * h_rows * w.column(kp))[(0, 0)];
                acc += psi[k].conj() * s;
            }
            a[k * k_users + kp] = acc.conj();
        }
    }

    let mut d_mats = Vec::with_capacity(k_users);
    let mut e_mats = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let sqrt_term = C::from((T::one() + rho[k]).sqrt());
        let d_k = c_mats[k * k_users + k].map(|e| e * sqrt_term);
        let mut e_k = d_k.clone();
        for kp in 0..k_users {
            e_k -= c_mats[k * k_users + kp].map(|e| e * a[k * k_users + kp]);
        }
        d_mats.push(d_k);
        e_mats.push(e_k);
    }

    PlacementCoefficients {
        group,
        wavelength,
        num_users: k_users,
        c: c_mats,
        d: d_mats,
        e: e_mats,
        a,
        rx_proj: env.ris_aoa.iter().map(|a| a.projection()).collect(),
        tx_proj: env
            .ue_aod
            .iter()
            .map(|angles| angles.iter().map(|a| a.projection()).collect())
            .collect(),
    }
}

/// `μ(c)` through the matrix form (numerically identical to the cosine
/// series but quadratic instead of quartic in the path count).
pub fn mu<T: Real>(coeffs: &PlacementCoefficients<T>, c: &Vec2<T>) -> T {
    let k_users = coeffs.num_users;
    let f = coeffs.f_vec(c);
    let two = real::<T>(2.0);
    let mut total = T::zero();
    for k in 0..k_users {
        let g = coeffs.g_vec(c, k);
        for kp in 0..k_users {
            let s = (f.adjoint() * &coeffs.c[k * k_users + kp] * &g)[(0, 0)];
            total -= s.norm_sqr();
        }
        let e = (f.adjoint() * &coeffs.e[k] * &g)[(0, 0)];
        total += two * e.re;
    }
    total
}

/// `μ(c)` through the explicit cosine expansion; cross-check for [`mu`] and
/// the ground the analytic gradient is derived on.
pub fn mu_cosine<T: Real>(coeffs: &PlacementCoefficients<T>, c: &Vec2<T>) -> T {
    let k0 = T::two_pi() / coeffs.wavelength;
    let k_users = coeffs.num_users;
    let (l_r, l_t) = (coeffs.num_rx(), coeffs.num_tx());
    let two = real::<T>(2.0);
    let mut total = T::zero();
    for k in 0..k_users {
        let pt = &coeffs.tx_proj[k];
        for kp in 0..k_users {
            let cm = &coeffs.c[k * k_users + kp];
            for i in 0..l_r {
                for j in 0..l_t {
                    let cij = cm[(i, j)];
                    if cij.norm_sqr() == T::zero() {
                        continue;
                    }
                    for q in 0..l_r {
                        for p in 0..l_t {
                            let cqp = cm[(q, p)];
                            let kappa = k0
                                * c.dot(&(pt[j] - coeffs.rx_proj[i] - pt[p] + coeffs.rx_proj[q]))
                                + cij.argument()
                                - cqp.argument();
                            total -= cij.modulus() * cqp.modulus() * kappa.cos();
                        }
                    }
                }
            }
        }
        let em = &coeffs.e[k];
        for i in 0..l_r {
            for j in 0..l_t {
                let eij = em[(i, j)];
                let kappa = k0 * c.dot(&(pt[j] - coeffs.rx_proj[i])) + eij.argument();
                total += two * eij.modulus() * kappa.cos();
            }
        }
    }
    total
}

/// Gradient of `μ`. The phase-ramp coefficients of every cosine are the
/// exact partial derivatives of its argument, so the series gradient
/// factorizes back into bilinear forms: with `∂f_i/∂x = jk₀ prx_i f_i` and
/// `∂g_j/∂x = jk₀ ptx_j g_j`,
/// `∂(fᴴXg)/∂x = jk₀ (fᴴX(g∘ptx) − (f∘prx)ᴴXg)`. This evaluates that
/// closed form; [`gradient_mu_cosine`] is the literal series, kept as the
/// cross-check the finite-difference oracle arbitrates.
pub fn gradient_mu<T: Real>(coeffs: &PlacementCoefficients<T>, c: &Vec2<T>) -> Vec2<T> {
    let k0 = T::two_pi() / coeffs.wavelength;
    let k_users = coeffs.num_users;
    let f = coeffs.f_vec(c);
    let weight = |v: &CVec<T>, proj: &[Vec2<T>], axis: usize| -> CVec<T> {
        CVec::from_iterator(
            v.len(),
            v.iter().enumerate().map(|(i, e)| {
                let p = if axis == 0 { proj[i].x } else { proj[i].y };
                e * C::from(p)
            }),
        )
    };
    let fx = weight(&f, &coeffs.rx_proj, 0);
    let fy = weight(&f, &coeffs.rx_proj, 1);
    let two = real::<T>(2.0);
    let mut grad = Vec2::new(T::zero(), T::zero());
    for k in 0..k_users {
        let g = coeffs.g_vec(c, k);
        let gx = weight(&g, &coeffs.tx_proj[k], 0);
        let gy = weight(&g, &coeffs.tx_proj[k], 1);
        let mut handle = |x_mat: &CMat<T>, sign_scale: T, quadratic: bool| {
            let xg = x_mat * &g;
            let xgx = x_mat * &gx;
            let xgy = x_mat * &gy;
            let s = (f.adjoint() * &xg)[(0, 0)];
            // dS = jk0 (fᴴX(g∘ptx) − (f∘prx)ᴴXg) per axis.
            let dsx = ((f.adjoint() * &xgx)[(0, 0)] - (fx.adjoint() * &xg)[(0, 0)])
                * C::new(T::zero(), k0);
            let dsy = ((f.adjoint() * &xgy)[(0, 0)] - (fy.adjoint() * &xg)[(0, 0)])
                * C::new(T::zero(), k0);
            if quadratic {
                // ∂(−|S|²)/∂c = −2Re{S* dS}.
                grad.x += sign_scale * (s.conj() * dsx).re;
                grad.y += sign_scale * (s.conj() * dsy).re;
            } else {
                // ∂(2Re{S})/∂c = 2Re{dS}.
                grad.x += sign_scale * dsx.re;
                grad.y += sign_scale * dsy.re;
            }
        };
        for kp in 0..k_users {
            handle(&coeffs.c[k * k_users + kp], -two, true);
        }
        handle(&coeffs.e[k], two, false);
    }
    grad
}

/// Literal term-by-term gradient of the cosine expansion (test reference).
pub fn gradient_mu_cosine<T: Real>(coeffs: &PlacementCoefficients<T>, c: &Vec2<T>) -> Vec2<T> {
    let k0 = T::two_pi() / coeffs.wavelength;
    let k_users = coeffs.num_users;
    let (l_r, l_t) = (coeffs.num_rx(), coeffs.num_tx());
    let two = real::<T>(2.0);
    let mut grad = Vec2::new(T::zero(), T::zero());
    for k in 0..k_users {
        let pt = &coeffs.tx_proj[k];
        for kp in 0..k_users {
            let cm = &coeffs.c[k * k_users + kp];
            for i in 0..l_r {
                for j in 0..l_t {
                    let cij = cm[(i, j)];
                    if cij.norm_sqr() == T::zero() {
                        continue;
                    }
                    for q in 0..l_r {
                        for p in 0..l_t {
                            let cqp = cm[(q, p)];
                            let ramp =
                                (pt[j] - coeffs.rx_proj[i] - pt[p] + coeffs.rx_proj[q]) * k0;
                            let kappa = c.dot(&ramp) + cij.argument() - cqp.argument();
                            grad += ramp * (cij.modulus() * cqp.modulus() * kappa.sin());
                        }
                    }
                }
            }
        }
        let em = &coeffs.e[k];
        for i in 0..l_r {
            for j in 0..l_t {
                let eij = em[(i, j)];
                let ramp = (pt[j] - coeffs.rx_proj[i]) * k0;
                let kappa = c.dot(&ramp) + eij.argument();
                grad -= ramp * (two * eij.modulus() * kappa.sin());
            }
        }
    }
    grad
}

/// Curvature bound `δ_g = (8π²/λ²)(Σ_{k,k'}(Σ_{i,j}|c_{ij}|)² + 2Σ_kΣ_{i,j}|e_{ij}|)`,
/// dominating `‖∇²μ‖₂` through the Frobenius bound on the cosine series.
pub fn curvature_bound<T: Real>(coeffs: &PlacementCoefficients<T>) -> T {
    let mut quad = T::zero();
    for km in &coeffs.c {
        let mass = km.iter().fold(T::zero(), |acc, e| acc + e.modulus());
        quad += mass * mass;
    }
    let mut lin = T::zero();
    for em in &coeffs.e {
        lin += em.iter().fold(T::zero(), |acc, e| acc + e.modulus());
    }
    let pi = T::pi();
    let eight = real::<T>(8.0);
    let two = real::<T>(2.0);
    eight * pi * pi / (coeffs.wavelength * coeffs.wavelength) * (quad + two * lin)
}

/// Closed half-plane `normal · c ≥ offset` with a unit normal.
#[derive(Debug, Clone, Copy)]
struct HalfPlane<T: Real> {
    normal: Vec2<T>,
    offset: T,
}

impl<T: Real> HalfPlane<T> {
    fn satisfied(&self, p: &Vec2<T>, slack: T) -> bool {
        self.normal.dot(p) >= self.offset - slack
    }

    /// Orthogonal projection of `p` onto the boundary line.
    fn project(&self, p: &Vec2<T>) -> Vec2<T> {
        p + self.normal * (self.offset - self.normal.dot(p))
    }
}

fn box_planes<T: Real>(region: &Region<T>) -> [HalfPlane<T>; 4] {
    let max = region.max();
    [
        HalfPlane { normal: Vec2::new(T::one(), T::zero()), offset: region.min.x },
        HalfPlane { normal: Vec2::new(-T::one(), T::zero()), offset: -max.x },
        HalfPlane { normal: Vec2::new(T::zero(), T::one()), offset: region.min.y },
        HalfPlane { normal: Vec2::new(T::zero(), -T::one()), offset: -max.y },
    ]
}

/// Exact maximizer of `−(δ/2)‖c − target‖²` over an intersection of
/// half-planes: the Euclidean projection of `target`, found by enumerating
/// the target itself, single-constraint projections, and pairwise boundary
/// intersections.
fn project_onto_planes<T: Real>(target: &Vec2<T>, planes: &[HalfPlane<T>], slack: T) -> Option<Vec2<T>> {
    let feasible = |p: &Vec2<T>| planes.iter().all(|h| h.satisfied(p, slack));
    if feasible(target) {
        return Some(*target);
    }
    let mut best: Option<(T, Vec2<T>)> = None;
    let mut consider = |p: Vec2<T>| {
        if feasible(&p) {
            let d = (p - target).norm_squared();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, p));
            }
        }
    };
    for h in planes {
        consider(h.project(target));
    }
    for (i, hi) in planes.iter().enumerate() {
        for hj in planes.iter().skip(i + 1) {
            let det = hi.normal.x * hj.normal.y - hi.normal.y * hj.normal.x;
            if det.abs() <= real(1e-14) {
                continue;
            }
            let x = (hi.offset * hj.normal.y - hj.offset * hi.normal.y) / det;
            let y = (hi.normal.x * hj.offset - hj.normal.x * hi.offset) / det;
            consider(Vec2::new(x, y));
        }
    }
    best.map(|(_, p)| p)
}

/// Result of one per-group SCA step.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome<T: Real> {
    pub next: Vec2<T>,
    /// The linearized constraint set had no usable candidate; the current
    /// point was kept.
    pub infeasible: bool,
}

/// One SCA step for `coeffs.group`: maximize the curvature-bounded
/// second-order surrogate of `μ` over the shrunken region and the
/// linearized spacing half-planes. The surrogate never moves to a point
/// whose true `μ` is worse than the current one.
pub fn sca_group_step<T: Real>(
    coeffs: &PlacementCoefficients<T>,
    geometry: &SystemGeometry<T>,
    group: usize,
) -> StepOutcome<T> {
    let current = geometry.group_refs[group];
    let grad = gradient_mu(coeffs, &current);
    let delta = curvature_bound(coeffs);
    if delta <= T::zero() {
        // μ is constant; stay put.
        return StepOutcome { next: current, infeasible: false };
    }
    let target = current + grad / delta;

    let feasible_box = geometry.feasible_box();
    let mut planes: Vec<HalfPlane<T>> = box_planes(&feasible_box).to_vec();
    // The projection of `target` stays within 2‖target − current‖ of the
    // current (feasible) point, so half-planes with a larger margin there
    // can never become active and are dropped.
    let reach = (target - current).norm() * real::<T>(2.0) + geometry.wavelength * real::<T>(1e-9);
    for (other, c_other) in geometry.group_refs.iter().enumerate() {
        if other == group {
            continue;
        }
        let diff = current - c_other;
        let dist = diff.norm();
        if dist <= T::zero() {
            return StepOutcome { next: current, infeasible: true };
        }
        let normal = diff / dist;
        let offset = geometry.min_spacing + normal.dot(c_other);
        if normal.dot(&current) - offset > reach {
            continue;
        }
        planes.push(HalfPlane { normal, offset });
    }

    let slack = geometry.wavelength * real::<T>(1e-9);
    let next = match project_onto_planes(&target, &planes, slack) {
        Some(p) => p,
        None => return StepOutcome { next: current, infeasible: true },
    };

    // Minorization guard: the surrogate construction guarantees
    // μ(next) ≥ μ(current); keep the current point if numerics disagree.
    let scale = T::one() + mu(coeffs, &current).abs();
    if mu(coeffs, &next) < mu(coeffs, &current) - real::<T>(1e-12) * scale {
        return StepOutcome { next: current, infeasible: false };
    }
    StepOutcome { next, infeasible: false }
}

/// Summary of one placement block invocation.
#[derive(Debug, Clone, Copy)]
pub struct PlacementOutcome<T: Real> {
    pub sweeps: usize,
    pub max_move: T,
    pub any_infeasible: bool,
}

impl<T: Real> Default for PlacementOutcome<T> {
    fn default() -> Self {
        Self {
            sweeps: 0,
            max_move: T::zero(),
            any_infeasible: false,
        }
    }
}

/// Round-robin SCA over the groups (ascending index), rebuilding the
/// coefficients before each step because every accepted move changes the
/// other groups' cross-terms. Stops when the largest move in a sweep falls
/// below `tol_factor · λ` or after `max_sweeps`.
#[allow(clippy::too_many_arguments)]
pub fn optimize_positions<T: Real>(
    env: &PathEnvironment<T>,
    geometry: &mut SystemGeometry<T>,
    channels: &mut ChannelSet<T>,
    scaling: &ChannelScaling<T>,
    theta: &ScatteringMatrix<T>,
    w: &CMat<T>,
    rho: &[T],
    psi: &[C<T>],
    config: &PlacementConfig<T>,
) -> PlacementOutcome<T> {
    let tol = config.tol_factor * geometry.wavelength;
    let mut outcome = PlacementOutcome::default();
    for _ in 0..config.max_sweeps {
        outcome.sweeps += 1;
        let mut max_move = T::zero();
        for g in 0..geometry.num_groups() {
            let coeffs =
                build_coefficients(env, geometry, channels, scaling, theta, w, rho, psi, g);
            let step = sca_group_step(&coeffs, geometry, g);
            if step.infeasible {
                outcome.any_infeasible = true;
                continue;
            }
            let moved = (step.next - geometry.group_refs[g]).norm();
            if moved > T::zero() {
                geometry.group_refs[g] = step.next;
                refresh_group_scaled(channels, geometry, env, g, scaling);
                max_move = max_move.max(moved);
            }
        }
        debug_assert!(geometry.spacing_satisfied(geometry.wavelength * real::<T>(1e-9)));
        outcome.max_move = max_move;
        if max_move < tol {
            break;
        }
    }
    outcome
}
