//! Closed-form transmit beamformer under a total power constraint.
//!
//! For fixed auxiliaries and scattering matrix, the beamformer block is the
//! quadratic program `min Σ_k w_kᴴ Q w_k − 2Re{w_kᴴ q_k}` subject to
//! `Tr(WᴴW) ≤ P`, solved by `w_k = (Q + λI)⁻¹ q_k` with the multiplier λ
//! found by bisection on the (monotone) transmit power.

use crate::channel::ChannelSet;
use crate::fp::effective_channels;
use crate::ris::ScatteringMatrix;
use crate::scalar::{real, CMat, CVec, Real, C};

/// Quadratic data of the beamformer block: the Hermitian PSD Gram matrix
/// `Q = Σ_i |ψ_i|² v_i v_iᴴ` and the linear terms `q_k = √(1+ρ_k) ψ_k v_k`,
/// where `v_k = Hᴴ Θᴴ h_k` is UE `k`'s effective channel.
#[derive(Debug, Clone)]
pub struct Quadratics<T: Real> {
    pub gram: CMat<T>,
    pub linear: Vec<CVec<T>>,
}

pub fn build_quadratics<T: Real>(
    channels: &ChannelSet<T>,
    theta: &ScatteringMatrix<T>,
    rho: &[T],
    psi: &[C<T>],
) -> Quadratics<T> {
    let v = effective_channels(channels, theta);
    let n_t = channels.num_tx_antennas();
    let mut gram = CMat::zeros(n_t, n_t);
    for (vi, psi_i) in v.iter().zip(psi) {
        let scale = C::from(psi_i.norm_sqr());
        gram += vi * vi.adjoint() * scale;
    }
    let linear = v
        .iter()
        .zip(rho.iter().zip(psi))
        .map(|(vk, (rk, pk))| vk * (*pk * C::from((T::one() + *rk).sqrt())))
        .collect();
    Quadratics { gram, linear }
}

#[derive(Debug, Clone)]
pub struct BeamformerSolution<T: Real> {
    /// `N_t × K` beamforming matrix.
    pub w: CMat<T>,
    /// Power-constraint multiplier λ ≥ 0.
    pub multiplier: T,
    /// Transmit power `Tr(WᴴW)` of the returned beamformer.
    pub power: T,
}

struct EigenSolve<T: Real> {
    values: Vec<T>,
    vectors: CMat<T>,
    coeffs: Vec<CVec<T>>,
    null_cut: T,
}

impl<T: Real> EigenSolve<T> {
    fn new(quad: &Quadratics<T>) -> Self {
        let n = quad.gram.nrows();
        let eig = quad.gram.clone().symmetric_eigen();
        // Numerical PSD floor.
        let values: Vec<T> = eig.eigenvalues.iter().map(|d| d.max(T::zero())).collect();
        let trace = values.iter().fold(T::zero(), |a, d| a + *d);
        let null_cut = real::<T>(1e-12) * (T::one() + trace / real::<T>(n as f64));
        let coeffs = quad
            .linear
            .iter()
            .map(|q| eig.eigenvectors.adjoint() * q)
            .collect();
        Self {
            values,
            vectors: eig.eigenvectors,
            coeffs,
            null_cut,
        }
    }

    /// `Tr(W(λ)ᴴW(λ))`; infinite when λ = 0 and some linear term has mass on
    /// the null space of Q.
    fn power(&self, lambda: T) -> T {
        let mut total = T::zero();
        for c in &self.coeffs {
            for (j, d) in self.values.iter().enumerate() {
                let denom = *d + lambda;
                let mass = c[j].norm_sqr();
                if denom <= self.null_cut {
                    if mass > self.null_cut * self.null_cut {
                        return T::max_value().unwrap();
                    }
                } else {
                    total += mass / (denom * denom);
                }
            }
        }
        total
    }

    fn beamformer(&self, lambda: T) -> CMat<T> {
        let n = self.vectors.nrows();
        let mut w = CMat::zeros(n, self.coeffs.len());
        for (k, c) in self.coeffs.iter().enumerate() {
            let scaled = CVec::from_iterator(
                c.len(),
                c.iter().enumerate().map(|(j, cj)| {
                    let denom = self.values[j] + lambda;
                    if denom <= self.null_cut {
                        C::from(T::zero())
                    } else {
                        cj / C::from(denom)
                    }
                }),
            );
            w.set_column(k, &(&self.vectors * scaled));
        }
        w
    }
}

/// Solve the beamformer block: `w_k = (Q + λI)⁻¹ q_k` with `λ ≥ 0` bisected
/// until the power constraint is met within `1e-6` relative (or `λ = 0` when
/// it is inactive). `P = 0` or all-zero linear terms return the zero matrix.
pub fn solve_beamformer<T: Real>(quad: &Quadratics<T>, power_budget: T) -> BeamformerSolution<T> {
    let n_t = quad.gram.nrows();
    let k = quad.linear.len();
    let zero = BeamformerSolution {
        w: CMat::zeros(n_t, k),
        multiplier: T::zero(),
        power: T::zero(),
    };
    if power_budget <= T::zero() {
        return zero;
    }
    let q_mass = quad.linear.iter().fold(T::zero(), |a, q| a + q.norm_squared());
    if q_mass == T::zero() {
        return zero;
    }

    let eig = EigenSolve::new(quad);
    let tol = real::<T>(1e-6);

    // Unconstrained solution first; regularize λ when Q is singular but the
    // constraint stays inactive.
    let p0 = eig.power(T::zero());
    if p0 <= power_budget {
        let min_eig = eig.values.iter().fold(T::max_value().unwrap(), |a, d| a.min(*d));
        let lambda = if min_eig <= eig.null_cut {
            eig.null_cut
        } else {
            T::zero()
        };
        let w = eig.beamformer(lambda);
        let power = w.norm_squared();
        return BeamformerSolution {
            w,
            multiplier: lambda,
            power,
        };
    }

    // Bracket: double λ until the power drops below the budget.
    let mut hi = T::one();
    let mut guard = 0;
    while eig.power(hi) > power_budget {
        hi *= real::<T>(2.0);
        guard += 1;
        if guard > 200 {
            break;
        }
    }
    let mut lo = T::zero();
    let mut lambda = hi;
    for _ in 0..200 {
        let mid = (lo + hi) * real::<T>(0.5);
        let p = eig.power(mid);
        if p > power_budget {
            lo = mid;
        } else {
            hi = mid;
        }
        lambda = hi;
        if ((p - power_budget) / power_budget).abs() <= tol {
            lambda = mid;
            break;
        }
    }

    let w = eig.beamformer(lambda);
    let power = w.norm_squared();
    BeamformerSolution {
        w,
        multiplier: lambda,
        power,
    }
}
