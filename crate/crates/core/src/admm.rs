//! Partially proximal ADMM for the admittance/scattering block.
//!
//! With auxiliaries and beamformer fixed, the scattering block maximizes
//! `Σ_k 2√(1+ρ_k)Re{u_kᴴHw_kψ_k*} − |ψ_k|²Σ_i|u_kᴴHw_i|²` over the splitting
//! variable `U = [u_1..u_K]` and the real symmetric block-diagonal admittance
//! `B`, coupled by the bilinear constraint
//! `(I − jZ₀B) U = (I + jZ₀B) H_U`. Each ADMM sweep solves a proximal
//! least-squares problem in the packed upper-triangular entries of `B`, a
//! per-column Hermitian system for `U`, and a dual ascent step.
//!
//! The `B` subproblem is stated on the packed vector `x` as
//! `x⁺ = (AᵀA + (ξ/ρ)I)⁻¹(Aᵀb + (ξ/ρ)xᵗ)`. [`assemble_linear_map`] and
//! [`b_step`] implement that form literally; the solver routes through
//! group-local solves (normal equations for small blocks, a Woodbury
//! identity for wide ones) that produce the same vector without ever
//! materializing `A`.

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::ris::{
    admittance_to_scattering, packed_index, upper_triangular_pack, upper_triangular_unpack,
    AdmittanceMatrix, RisArchitecture, ScatteringMatrix, DEFAULT_REFERENCE_IMPEDANCE,
};
use crate::scalar::{junit, real, CMat, CVec, Real, RMat, RVec, C};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig<T: Real> {
    /// Penalty parameter ρ of the augmented Lagrangian.
    pub penalty: T,
    /// Proximal weight ξ on the `B` step.
    pub proximal: T,
    /// Absolute Frobenius tolerance on the primal residual.
    pub tolerance: T,
    pub max_iterations: usize,
    /// Reference impedance Z₀ in ohms.
    pub reference_impedance: T,
}

impl<T: Real> Default for AdmmConfig<T> {
    fn default() -> Self {
        Self {
            penalty: real(0.5),
            proximal: real(0.1),
            tolerance: real(1e-5),
            max_iterations: 300,
            reference_impedance: real(DEFAULT_REFERENCE_IMPEDANCE),
        }
    }
}

/// ADMM iterate carried across outer iterations for warm starting.
#[derive(Debug, Clone)]
pub struct AdmmState<T: Real> {
    pub b: AdmittanceMatrix<T>,
    /// Splitting variable `U = [u_1..u_K]`, target `Θᴴ h_k` per column.
    pub u: CMat<T>,
    /// Scaled dual `Λ`, one column per user.
    pub lambda: CMat<T>,
    /// Primal residual norm after each iteration of the latest run.
    pub residual_trace: Vec<T>,
}

/// Result of one ADMM invocation.
#[derive(Debug, Clone)]
pub struct AdmmOutcome<T: Real> {
    pub admittance: AdmittanceMatrix<T>,
    pub scattering: ScatteringMatrix<T>,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: T,
    /// Last iterate, for warm-starting the next call.
    pub state: AdmmState<T>,
}

/// Real data of the `B` subproblem `min (ρ/2)‖BM − Γ‖_F² + (ξ/2)‖B − Bᵗ‖²`:
/// `M = [Re(jZ₀(U+H_U)), Im(jZ₀(U+H_U))]` and
/// `Γ = [Re(U−H_U+Λ/ρ), Im(U−H_U+Λ/ρ)]`, both `M × 2K`.
pub fn build_b_subproblem<T: Real>(
    u: &CMat<T>,
    h_u: &CMat<T>,
    lambda: &CMat<T>,
    z0: T,
    rho_pen: T,
) -> (RMat<T>, RMat<T>) {
    let (m, k) = (u.nrows(), u.ncols());
    let jz0 = junit::<T>() * C::from(z0);
    let p = (u + h_u).map(|e| jz0 * e);
    let g = u - h_u + lambda.map(|e| e / C::from(rho_pen));
    let mut m_mat = RMat::zeros(m, 2 * k);
    let mut gamma = RMat::zeros(m, 2 * k);
    for r in 0..m {
        for c in 0..k {
            m_mat[(r, c)] = p[(r, c)].re;
            m_mat[(r, k + c)] = p[(r, c)].im;
            gamma[(r, c)] = g[(r, c)].re;
            gamma[(r, k + c)] = g[(r, c)].im;
        }
    }
    (m_mat, gamma)
}

/// Materialize the linear map from packed admittance entries to the
/// row-major flattened product `B·M_mat`, together with the flattened
/// right-hand side, so that `‖A·pack(B) − b_vec‖₂² = ‖B·M_mat − Γ‖_F²`
/// for every symmetric block-diagonal `B`.
///
/// Off-diagonal packed entries pick up coefficients from both symmetric
/// positions of their block. This dense form exists for verification and
/// small problems; the solver uses the group-local equivalents.
pub fn assemble_linear_map<T: Real>(
    m_mat: &RMat<T>,
    gamma: &RMat<T>,
    arch: &RisArchitecture,
) -> (RMat<T>, RVec<T>) {
    let m = arch.total_elements();
    let cols = m_mat.ncols();
    assert_eq!(m_mat.nrows(), m);
    let n_e = arch.group_size();
    let mut a = RMat::zeros(m * cols, arch.packed_len());
    let mut b_vec = RVec::zeros(m * cols);
    for r in 0..m {
        let g = r / n_e;
        let i = r % n_e;
        for c in 0..cols {
            let row = r * cols + c;
            b_vec[row] = gamma[(r, c)];
            for j in 0..n_e {
                let col = packed_index(arch, g, i.min(j), i.max(j));
                a[(row, col)] += m_mat[(g * n_e + j, c)];
            }
        }
    }
    (a, b_vec)
}

/// Reference proximal least-squares step on the packed coordinates:
/// `x = (AᵀA + (ξ/ρ)I)⁻¹ (Aᵀ b_vec + (ξ/ρ) x_prev)`, solved as an SPD
/// system. A vanishing proximal weight on a rank-deficient `A` falls back
/// to a tiny ridge.
pub fn b_step<T: Real>(
    a: &RMat<T>,
    b_vec: &RVec<T>,
    x_prev: &RVec<T>,
    rho_pen: T,
    xi: T,
) -> RVec<T> {
    let n = a.ncols();
    let sigma = xi / rho_pen;
    let normal = a.transpose() * a;
    let rhs = a.transpose() * b_vec + x_prev * sigma;
    let mut lhs = normal.clone();
    for i in 0..n {
        lhs[(i, i)] += sigma;
    }
    match lhs.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => {
            let ridge = real::<T>(1e-12);
            for i in 0..n {
                lhs[(i, i)] += ridge;
            }
            lhs.cholesky()
                .expect("ridge-regularized normal matrix is SPD")
                .solve(&rhs)
        }
    }
}

/// Packed vector with entry `(i≤j)` equal to `Y[i,j] + Y[j,i]` off the
/// diagonal and `Y[i,i]` on it — the adjoint of the symmetric embedding.
fn pack_symmetrized<T: Real>(y: &RMat<T>) -> Vec<T> {
    let n = y.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            if i == j {
                out.push(y[(i, i)]);
            } else {
                out.push(y[(i, j)] + y[(j, i)]);
            }
        }
    }
    out
}

/// The two `(row, partner)` incidences of packed entry `(i, j)`.
fn entry_incidences(i: usize, j: usize) -> Vec<(usize, usize)> {
    if i == j {
        vec![(i, i)]
    } else {
        vec![(i, j), (j, i)]
    }
}

/// Group-local `B` step producing exactly the solution of [`b_step`] without
/// building `A`. `m_mat`/`gamma` are the full `M × 2K` matrices.
fn b_step_grouped<T: Real>(
    m_mat: &RMat<T>,
    gamma: &RMat<T>,
    b_prev: &AdmittanceMatrix<T>,
    rho_pen: T,
    xi: T,
) -> Result<AdmittanceMatrix<T>> {
    let arch = *b_prev.architecture();
    let n_e = arch.group_size();
    let cols = m_mat.ncols();
    let sigma = xi / rho_pen;
    let n_packed = n_e * (n_e + 1) / 2;

    let mut blocks = Vec::with_capacity(arch.num_groups());
    for g in 0..arch.num_groups() {
        let rows = arch.group_rows(g);
        let mg = m_mat.rows(rows.start, n_e).into_owned();
        let gg = gamma.rows(rows.start, n_e).into_owned();

        // rhs in packed coordinates: sym-pack(Γ_g M_gᵀ) + σ pack(B_g).
        let gm = &gg * mg.transpose();
        let mut rhs = RVec::from_vec(pack_symmetrized(&gm));
        let prev = b_prev.block(g);
        {
            let mut idx = 0;
            for i in 0..n_e {
                for j in i..n_e {
                    rhs[idx] += sigma * prev[(i, j)];
                    idx += 1;
                }
            }
        }

        let x = if sigma <= T::zero() || n_packed <= n_e * cols {
            // Normal equations on the packed coordinates; entries follow
            // from the incidence structure of the symmetric embedding.
            let s = &mg * mg.transpose();
            let mut normal = RMat::zeros(n_packed, n_packed);
            let mut row_idx = 0;
            for i in 0..n_e {
                for j in i..n_e {
                    let inc1 = entry_incidences(i, j);
                    let mut col_idx = 0;
                    for p in 0..n_e {
                        for q in p..n_e {
                            let inc2 = entry_incidences(p, q);
                            let mut acc = T::zero();
                            for &(r1, p1) in &inc1 {
                                for &(r2, p2) in &inc2 {
                                    if r1 == r2 {
                                        acc += s[(p1, p2)];
                                    }
                                }
                            }
                            normal[(row_idx, col_idx)] = acc;
                            col_idx += 1;
                        }
                    }
                    row_idx += 1;
                }
            }
            for i in 0..n_packed {
                normal[(i, i)] += sigma;
            }
            match normal.clone().cholesky() {
                Some(chol) => chol.solve(&rhs),
                None => {
                    for i in 0..n_packed {
                        normal[(i, i)] += real::<T>(1e-12);
                    }
                    normal
                        .cholesky()
                        .ok_or_else(|| Error::subproblem("admm_b_step", "normal matrix not SPD"))?
                        .solve(&rhs)
                }
            }
        } else {
            // Wide blocks: Woodbury identity
            // (σI + AᵀA)⁻¹ = σ⁻¹(I − Aᵀ(σI + AAᵀ)⁻¹A).
            let n_rows = n_e * cols;
            let gram_cols = mg.transpose() * &mg; // 2K × 2K
            let mut w_mat = RMat::zeros(n_rows, n_rows);
            for r in 0..n_e {
                for rp in 0..n_e {
                    for c in 0..cols {
                        for cp in 0..cols {
                            let val = if r == rp {
                                gram_cols[(c, cp)]
                            } else {
                                mg[(rp, c)] * mg[(r, cp)]
                            };
                            w_mat[(r * cols + c, rp * cols + cp)] = val;
                        }
                    }
                }
            }
            for i in 0..n_rows {
                w_mat[(i, i)] += sigma;
            }

            let apply_a = |x: &RVec<T>| -> RVec<T> {
                let mut bloc = RMat::zeros(n_e, n_e);
                let mut idx = 0;
                for i in 0..n_e {
                    for j in i..n_e {
                        bloc[(i, j)] = x[idx];
                        bloc[(j, i)] = x[idx];
                        idx += 1;
                    }
                }
                let prod = bloc * &mg;
                RVec::from_fn(n_rows, |r, _| prod[(r / cols, r % cols)])
            };
            let apply_at = |y: &RVec<T>| -> RVec<T> {
                let ymat = RMat::from_fn(n_e, cols, |r, c| y[r * cols + c]);
                RVec::from_vec(pack_symmetrized(&(ymat * mg.transpose())))
            };

            let t = apply_a(&rhs);
            let z = w_mat
                .cholesky()
                .ok_or_else(|| Error::subproblem("admm_b_step", "Woodbury matrix not SPD"))?
                .solve(&t);
            (&rhs - apply_at(&z)) / sigma
        };

        let mut blk = RMat::zeros(n_e, n_e);
        let mut idx = 0;
        for i in 0..n_e {
            for j in i..n_e {
                blk[(i, j)] = x[idx];
                blk[(j, i)] = x[idx];
                idx += 1;
            }
        }
        blocks.push(blk);
    }
    Ok(AdmittanceMatrix::from_blocks(arch, blocks)?
        .with_reference_impedance(b_prev.reference_impedance()))
}

/// Closed-form update of the splitting columns: each `u_k` solves the
/// Hermitian positive-definite system
/// `(|ψ_k|² HWWᴴHᴴ + (ρ/2)(I + Z₀²B²)) u_k
///   = √(1+ρ_k)ψ_k* Hw_k + [ρ(I+jZ₀B)² h_k − (I+jZ₀B)λ_k] / 2`.
pub fn u_step<T: Real>(
    b_next: &AdmittanceMatrix<T>,
    channels: &ChannelSet<T>,
    w: &CMat<T>,
    rho: &[T],
    psi: &[C<T>],
    lambda: &CMat<T>,
    rho_pen: T,
) -> Result<CMat<T>> {
    let m = channels.num_elements();
    let k_users = channels.num_users();
    let z0 = b_next.reference_impedance();
    let jz0 = junit::<T>() * C::from(z0);
    let half = real::<T>(0.5);

    let hw = &channels.bs_ris * w;
    let outer = &hw * hw.adjoint();

    // Block-diagonal  I + Z₀²B²  and  (I + jZ₀B), (I + jZ₀B)².
    let arch = b_next.architecture();
    let n_e = arch.group_size();
    let mut pen = CMat::zeros(m, m);
    let mut plus = CMat::zeros(m, m);
    let mut plus_sq = CMat::zeros(m, m);
    for (g, bg) in b_next.blocks().iter().enumerate() {
        let r0 = arch.group_rows(g).start;
        let bc = bg.map(|x| C::from(x));
        let eye = CMat::<T>::identity(n_e, n_e);
        let p = &eye + &bc * jz0;
        let p2 = &p * &p;
        let b2 = &bc * &bc * C::from(z0 * z0);
        let pen_g = &eye + b2;
        pen.view_mut((r0, r0), (n_e, n_e)).copy_from(&pen_g);
        plus.view_mut((r0, r0), (n_e, n_e)).copy_from(&p);
        plus_sq.view_mut((r0, r0), (n_e, n_e)).copy_from(&p2);
    }

    let mut u = CMat::zeros(m, k_users);
    for k in 0..k_users {
        let lhs = &outer * C::from(psi[k].norm_sqr()) + &pen * C::from(rho_pen * half);
        let h_k = &channels.ris_ue[k];
        let lam_k: CVec<T> = lambda.column(k).into_owned();
        let rhs = hw.column(k) * (psi[k].conj() * C::from((T::one() + rho[k]).sqrt()))
            + (&plus_sq * h_k * C::from(rho_pen) - &plus * lam_k) * C::from(half);
        let col = lhs
            .cholesky()
            .ok_or_else(|| Error::subproblem("admm_u_step", "system matrix not Hermitian PD"))?
            .solve(&rhs);
        u.set_column(k, &col);
    }
    Ok(u)
}

/// Constraint residual `(I − jZ₀B)U − (I + jZ₀B)H_U`, computed blockwise.
pub fn constraint_residual<T: Real>(
    b: &AdmittanceMatrix<T>,
    u: &CMat<T>,
    h_u: &CMat<T>,
) -> CMat<T> {
    let arch = b.architecture();
    let n_e = arch.group_size();
    let jz0 = junit::<T>() * C::from(b.reference_impedance());
    let mut out = u - h_u;
    for (g, bg) in b.blocks().iter().enumerate() {
        let r0 = arch.group_rows(g).start;
        let sum = u.rows(r0, n_e) + h_u.rows(r0, n_e);
        let bc = bg.map(|x| C::from(x) * jz0);
        let correction = bc * sum;
        let mut view = out.view_mut((r0, 0), (n_e, u.ncols()));
        view -= correction;
    }
    out
}

/// Frobenius norm of the constraint residual.
pub fn primal_residual<T: Real>(b: &AdmittanceMatrix<T>, u: &CMat<T>, h_u: &CMat<T>) -> T {
    constraint_residual(b, u, h_u).norm()
}

/// Dual ascent: `Λ ← Λ + ρ[(I − jZ₀B)U − (I + jZ₀B)H_U]`.
pub fn dual_step<T: Real>(
    b_next: &AdmittanceMatrix<T>,
    u_next: &CMat<T>,
    h_u: &CMat<T>,
    lambda: &CMat<T>,
    rho_pen: T,
) -> CMat<T> {
    lambda + constraint_residual(b_next, u_next, h_u).map(|e| e * C::from(rho_pen))
}

/// Run the pp-ADMM until the primal residual drops below the tolerance.
///
/// Converged runs return the final iterate; otherwise the iterate whose
/// recovered scattering matrix scored the best block objective is returned
/// with `converged = false`. Either way the returned `Θ` is exactly
/// unitary-symmetric by construction.
pub fn run_admm<T: Real>(
    channels: &ChannelSet<T>,
    w: &CMat<T>,
    rho: &[T],
    psi: &[C<T>],
    arch: &RisArchitecture,
    config: &AdmmConfig<T>,
    warm: Option<AdmmState<T>>,
) -> Result<AdmmOutcome<T>> {
    let m = channels.num_elements();
    let k_users = channels.num_users();
    if arch.total_elements() != m {
        return Err(Error::dimension(format!(
            "architecture has {} elements, channels have {m}",
            arch.total_elements()
        )));
    }
    let mut h_u = CMat::zeros(m, k_users);
    for (k, h) in channels.ris_ue.iter().enumerate() {
        h_u.set_column(k, h);
    }

    let mut state = match warm {
        Some(s) => s,
        None => {
            let b = AdmittanceMatrix::zeros(*arch)
                .with_reference_impedance(config.reference_impedance);
            let theta = admittance_to_scattering(&b);
            let mut u = CMat::zeros(m, k_users);
            for (k, h) in channels.ris_ue.iter().enumerate() {
                u.set_column(k, &theta.apply_adjoint(h));
            }
            AdmmState {
                b,
                u,
                lambda: CMat::zeros(m, k_users),
                residual_trace: Vec::new(),
            }
        }
    };
    state.residual_trace.clear();

    let z0 = state.b.reference_impedance();
    let mut best_theta = admittance_to_scattering(&state.b);
    let mut best_b = state.b.clone();
    // "Best" is judged by the quantity the outer safeguard accepts on: the
    // true sum rate of the recovered scattering matrix. Sampled on a stride
    // to keep the recovery cost off the per-iteration path.
    let mut best_rate = crate::fp::sum_rate(channels, &best_theta, w);
    const TRACK_STRIDE: usize = 5;

    let mut converged = false;
    let mut iterations = 0;
    let mut final_residual = primal_residual(&state.b, &state.u, &h_u);
    for iter in 0..config.max_iterations {
        iterations += 1;
        let (m_mat, gamma) =
            build_b_subproblem(&state.u, &h_u, &state.lambda, z0, config.penalty);
        let b_next = b_step_grouped(&m_mat, &gamma, &state.b, config.penalty, config.proximal)?;
        let b_prev = std::mem::replace(&mut state.b, b_next);
        let u_next = u_step(
            &state.b,
            channels,
            w,
            rho,
            psi,
            &state.lambda,
            config.penalty,
        )?;
        let u_prev = std::mem::replace(&mut state.u, u_next);
        state.lambda = dual_step(&state.b, &state.u, &h_u, &state.lambda, config.penalty);

        let r = primal_residual(&state.b, &state.u, &h_u);
        state.residual_trace.push(r);
        final_residual = r;

        // Primal feasibility alone is not a fixed point: a warm-started
        // iterate can sit on the constraint manifold while still drifting
        // toward the block optimum. Require the iterate movement (the dual
        // residual proxy) to settle as well.
        let db = z0
            * b_prev
                .blocks()
                .iter()
                .zip(state.b.blocks())
                .fold(T::zero(), |acc, (old, new)| acc + (new - old).norm_squared())
                .sqrt();
        let du = (&state.u - &u_prev).norm();
        let move_tol = config.tolerance * real::<T>(10.0);
        let done = r < config.tolerance && db < move_tol && du < move_tol;
        if done || iter % TRACK_STRIDE == TRACK_STRIDE - 1 || iter + 1 == config.max_iterations {
            let theta = admittance_to_scattering(&state.b);
            let rate = crate::fp::sum_rate(channels, &theta, w);
            if done || rate > best_rate {
                best_rate = rate;
                best_b = state.b.clone();
                best_theta = theta;
            }
        }
        if done {
            converged = true;
            break;
        }
    }

    Ok(AdmmOutcome {
        admittance: best_b,
        scattering: best_theta,
        converged,
        iterations,
        final_residual,
        state,
    })
}

/// Convenience wrapper used by tests: dense reference step on the full map.
pub fn b_step_reference<T: Real>(
    m_mat: &RMat<T>,
    gamma: &RMat<T>,
    b_prev: &AdmittanceMatrix<T>,
    rho_pen: T,
    xi: T,
) -> Result<AdmittanceMatrix<T>> {
    let arch = *b_prev.architecture();
    let (a, b_vec) = assemble_linear_map(m_mat, gamma, &arch);
    let x_prev = upper_triangular_pack(b_prev);
    let x = b_step(&a, &b_vec, &x_prev, rho_pen, xi);
    Ok(upper_triangular_unpack(&x, arch)?
        .with_reference_impedance(b_prev.reference_impedance()))
}
