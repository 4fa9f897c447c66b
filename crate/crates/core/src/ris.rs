//! Group-connected BD-RIS representation.
//!
//! The surface is split into `N_G` groups of `N_E` elements. Element
//! interconnections exist only within a group, so both the admittance matrix
//! `B` (real symmetric) and the scattering matrix `Θ` (unitary symmetric) are
//! block-diagonal with one block per group. `Θ` is recovered from `B` through
//! the lossless Cayley-type map `Θ_g = (I + jZ₀B_g)⁻¹(I − jZ₀B_g)`.

use crate::error::{Error, Result};
use crate::scalar::{junit, real, CMat, Real, RMat, RVec, C};

/// Default reference impedance in ohms.
pub const DEFAULT_REFERENCE_IMPEDANCE: f64 = 50.0;

/// Connectivity class of a group-connected architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    /// `N_E = 1`: conventional diagonal RIS.
    Single,
    /// `1 < N_E < M`.
    Group,
    /// `N_E = M`: one fully interconnected block.
    Fully,
}

/// Group structure of the surface: `M = N_G · N_E` elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RisArchitecture {
    num_groups: usize,
    group_size: usize,
}

impl RisArchitecture {
    pub fn new(num_groups: usize, group_size: usize) -> Result<Self> {
        if num_groups == 0 || group_size == 0 {
            return Err(Error::config("architecture needs at least one element"));
        }
        Ok(Self {
            num_groups,
            group_size,
        })
    }

    /// Single-connected surface with `m` independent elements.
    pub fn single(m: usize) -> Result<Self> {
        Self::new(m, 1)
    }

    /// Fully-connected surface: one block of size `m`.
    pub fn fully(m: usize) -> Result<Self> {
        Self::new(1, m)
    }

    /// Group-connected surface with blocks of `group_size` elements.
    pub fn grouped(m: usize, group_size: usize) -> Result<Self> {
        if group_size == 0 || !m.is_multiple_of(group_size) {
            return Err(Error::config(format!(
                "group size {group_size} does not divide element count {m}"
            )));
        }
        Self::new(m / group_size, group_size)
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    /// Total element count `M`.
    pub fn total_elements(&self) -> usize {
        self.num_groups * self.group_size
    }

    pub fn connectivity(&self) -> Connectivity {
        if self.group_size == 1 {
            Connectivity::Single
        } else if self.num_groups == 1 {
            Connectivity::Fully
        } else {
            Connectivity::Group
        }
    }

    /// Global row range covered by group `g`.
    pub fn group_rows(&self, g: usize) -> std::ops::Range<usize> {
        let start = g * self.group_size;
        start..start + self.group_size
    }

    /// Number of free admittance parameters: `N_G · N_E (N_E + 1) / 2`.
    pub fn packed_len(&self) -> usize {
        self.num_groups * self.group_size * (self.group_size + 1) / 2
    }
}

/// Block-diagonal real symmetric admittance parameterization `Y = jB`.
#[derive(Debug, Clone)]
pub struct AdmittanceMatrix<T: Real> {
    arch: RisArchitecture,
    blocks: Vec<RMat<T>>,
    reference_impedance: T,
}

impl<T: Real> AdmittanceMatrix<T> {
    /// All-zero admittance (scattering matrix is the identity).
    pub fn zeros(arch: RisArchitecture) -> Self {
        let n = arch.group_size();
        Self {
            arch,
            blocks: vec![RMat::zeros(n, n); arch.num_groups()],
            reference_impedance: real(DEFAULT_REFERENCE_IMPEDANCE),
        }
    }

    /// Build from per-group blocks; each block must be square of the group
    /// size and exactly symmetric.
    pub fn from_blocks(arch: RisArchitecture, blocks: Vec<RMat<T>>) -> Result<Self> {
        if blocks.len() != arch.num_groups() {
            return Err(Error::dimension(format!(
                "expected {} admittance blocks, got {}",
                arch.num_groups(),
                blocks.len()
            )));
        }
        let n = arch.group_size();
        for (g, b) in blocks.iter().enumerate() {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::dimension(format!(
                    "admittance block {g} is {}x{}, expected {n}x{n}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    if b[(i, j)] != b[(j, i)] {
                        return Err(Error::config(format!(
                            "admittance block {g} is not symmetric at ({i},{j})"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            arch,
            blocks,
            reference_impedance: real(DEFAULT_REFERENCE_IMPEDANCE),
        })
    }

    pub fn with_reference_impedance(mut self, z0: T) -> Self {
        self.reference_impedance = z0;
        self
    }

    pub fn architecture(&self) -> &RisArchitecture {
        &self.arch
    }

    pub fn blocks(&self) -> &[RMat<T>] {
        &self.blocks
    }

    pub fn block(&self, g: usize) -> &RMat<T> {
        &self.blocks[g]
    }

    pub fn reference_impedance(&self) -> T {
        self.reference_impedance
    }

    /// Dense `M × M` matrix with zero entries between groups.
    pub fn to_dense(&self) -> RMat<T> {
        let m = self.arch.total_elements();
        let mut out = RMat::zeros(m, m);
        for (g, b) in self.blocks.iter().enumerate() {
            let r = self.arch.group_rows(g);
            out.view_mut((r.start, r.start), (b.nrows(), b.ncols()))
                .copy_from(b);
        }
        out
    }
}

/// Block-diagonal scattering matrix of the surface.
#[derive(Debug, Clone)]
pub struct ScatteringMatrix<T: Real> {
    arch: RisArchitecture,
    blocks: Vec<CMat<T>>,
}

impl<T: Real> ScatteringMatrix<T> {
    /// Identity scattering (all elements reflect unchanged).
    pub fn identity(arch: RisArchitecture) -> Self {
        let n = arch.group_size();
        Self {
            arch,
            blocks: vec![CMat::identity(n, n); arch.num_groups()],
        }
    }

    pub fn from_blocks(arch: RisArchitecture, blocks: Vec<CMat<T>>) -> Result<Self> {
        if blocks.len() != arch.num_groups() {
            return Err(Error::dimension(format!(
                "expected {} scattering blocks, got {}",
                arch.num_groups(),
                blocks.len()
            )));
        }
        let n = arch.group_size();
        for (g, b) in blocks.iter().enumerate() {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::dimension(format!(
                    "scattering block {g} is {}x{}, expected {n}x{n}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(Self { arch, blocks })
    }

    pub fn architecture(&self) -> &RisArchitecture {
        &self.arch
    }

    pub fn blocks(&self) -> &[CMat<T>] {
        &self.blocks
    }

    pub fn block(&self, g: usize) -> &CMat<T> {
        &self.blocks[g]
    }

    pub fn to_dense(&self) -> CMat<T> {
        let m = self.arch.total_elements();
        let mut out = CMat::zeros(m, m);
        for (g, b) in self.blocks.iter().enumerate() {
            let r = self.arch.group_rows(g);
            out.view_mut((r.start, r.start), (b.nrows(), b.ncols()))
                .copy_from(b);
        }
        out
    }

    /// `Θ v` exploiting the block structure.
    pub fn apply(&self, v: &crate::scalar::CVec<T>) -> crate::scalar::CVec<T> {
        let mut out = crate::scalar::CVec::zeros(v.len());
        for (g, b) in self.blocks.iter().enumerate() {
            let r = self.arch.group_rows(g);
            let seg = v.rows(r.start, b.ncols());
            out.rows_mut(r.start, b.nrows()).copy_from(&(b * seg));
        }
        out
    }

    /// `Θᴴ v` exploiting the block structure.
    pub fn apply_adjoint(&self, v: &crate::scalar::CVec<T>) -> crate::scalar::CVec<T> {
        let mut out = crate::scalar::CVec::zeros(v.len());
        for (g, b) in self.blocks.iter().enumerate() {
            let r = self.arch.group_rows(g);
            let seg = v.rows(r.start, b.nrows());
            out.rows_mut(r.start, b.ncols())
                .copy_from(&(b.adjoint() * seg));
        }
        out
    }
}

/// Recover the scattering matrix from the admittance parameterization,
/// block by block: `Θ_g = (I + jZ₀B_g)⁻¹(I − jZ₀B_g)`.
///
/// For real symmetric `B_g` the system matrix has eigenvalues `1 + jZ₀β` with
/// real `β`, hence is always invertible; a failed solve indicates corrupted
/// input and panics.
pub fn admittance_to_scattering<T: Real>(b: &AdmittanceMatrix<T>) -> ScatteringMatrix<T> {
    let z0 = b.reference_impedance();
    let jz0: C<T> = junit::<T>() * C::from(z0);
    let n = b.architecture().group_size();
    let eye = CMat::<T>::identity(n, n);
    let blocks = b
        .blocks()
        .iter()
        .map(|bg| {
            let jb = bg.map(|x| jz0 * C::from(x));
            let plus = &eye + &jb;
            let minus = &eye - &jb;
            plus.lu()
                .solve(&minus)
                .expect("I + jZ0*B is nonsingular for real symmetric B")
        })
        .collect();
    ScatteringMatrix {
        arch: *b.architecture(),
        blocks,
    }
}

/// Outcome of checking a dense matrix against the scattering constraints.
#[derive(Debug, Clone, Copy)]
pub struct ScatteringValidation<T> {
    /// `‖ΘᴴΘ − I‖_F`
    pub unitarity: T,
    /// `‖Θ − Θᵀ‖_F`
    pub symmetry: T,
    /// Frobenius mass outside the block-diagonal support.
    pub block_structure: T,
    pub pass: bool,
}

impl<T: Real> ScatteringValidation<T> {
    pub fn max_violation(&self) -> T {
        self.unitarity.max(self.symmetry).max(self.block_structure)
    }
}

/// Check unitarity, symmetry, and block structure of a dense `M × M` matrix.
///
/// Tolerances: unitarity `1e-8`, symmetry `1e-10`, off-block mass `1e-10`
/// (all Frobenius).
pub fn validate_scattering<T: Real>(
    theta: &CMat<T>,
    arch: &RisArchitecture,
) -> ScatteringValidation<T> {
    let m = arch.total_elements();
    assert_eq!(theta.nrows(), m);
    assert_eq!(theta.ncols(), m);

    let gram = theta.adjoint() * theta;
    let unitarity = (&gram - CMat::<T>::identity(m, m)).norm();
    let symmetry = (theta - theta.transpose()).norm();

    let mut off = T::zero();
    for g in 0..arch.num_groups() {
        for h in 0..arch.num_groups() {
            if g == h {
                continue;
            }
            let (rg, rh) = (arch.group_rows(g), arch.group_rows(h));
            let blk = theta.view((rg.start, rh.start), (arch.group_size(), arch.group_size()));
            off += blk.norm_squared();
        }
    }
    let block_structure = off.sqrt();

    let pass = unitarity <= real(1e-8) && symmetry <= real(1e-10) && block_structure <= real(1e-10);
    ScatteringValidation {
        unitarity,
        symmetry,
        block_structure,
        pass,
    }
}

/// Position of block entry `(i, j)` (`i ≤ j`, local to group `g`) inside the
/// packed vector produced by [`upper_triangular_pack`].
pub fn packed_index(arch: &RisArchitecture, g: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < arch.group_size());
    let n = arch.group_size();
    g * n * (n + 1) / 2 + i * (2 * n - i + 1) / 2 + (j - i)
}

/// Collect the upper-triangular entries of every block into one real vector.
///
/// Ordering is fixed: groups in ascending order, row-major upper triangle
/// within each block. This ordering is what the ADMM linear map is built
/// against and must never change.
pub fn upper_triangular_pack<T: Real>(b: &AdmittanceMatrix<T>) -> RVec<T> {
    let arch = b.architecture();
    let n = arch.group_size();
    let mut out = RVec::zeros(arch.packed_len());
    let mut idx = 0;
    for blk in b.blocks() {
        for i in 0..n {
            for j in i..n {
                out[idx] = blk[(i, j)];
                idx += 1;
            }
        }
    }
    out
}

/// Inverse of [`upper_triangular_pack`]: rebuild the symmetric blocks.
pub fn upper_triangular_unpack<T: Real>(
    x: &RVec<T>,
    arch: RisArchitecture,
) -> Result<AdmittanceMatrix<T>> {
    if x.len() != arch.packed_len() {
        return Err(Error::dimension(format!(
            "packed admittance has length {}, expected {}",
            x.len(),
            arch.packed_len()
        )));
    }
    let n = arch.group_size();
    let mut blocks = Vec::with_capacity(arch.num_groups());
    let mut idx = 0;
    for _ in 0..arch.num_groups() {
        let mut blk = RMat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                blk[(i, j)] = x[idx];
                blk[(j, i)] = x[idx];
                idx += 1;
            }
        }
        blocks.push(blk);
    }
    AdmittanceMatrix::from_blocks(arch, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_admittance(arch: RisArchitecture, rng: &mut ChaCha8Rng, scale: f64) -> AdmittanceMatrix<f64> {
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
        AdmittanceMatrix::from_blocks(arch, blocks).unwrap()
    }

    #[test]
    fn zero_admittance_gives_identity() {
        let arch = RisArchitecture::grouped(8, 2).unwrap();
        let theta = admittance_to_scattering(&AdmittanceMatrix::<f64>::zeros(arch));
        let dense = theta.to_dense();
        assert!((dense - CMat::<f64>::identity(8, 8)).norm() < 1e-14);
    }

    #[test]
    fn scalar_block_is_moebius_map() {
        // N_E = 1: Θ = (1 - jZ0 b) / (1 + jZ0 b), unit modulus.
        let arch = RisArchitecture::single(1).unwrap();
        let b = AdmittanceMatrix::from_blocks(arch, vec![RMat::from_element(1, 1, 0.013)]).unwrap();
        let z0 = b.reference_impedance();
        let theta = admittance_to_scattering(&b);
        let got = theta.block(0)[(0, 0)];
        let expect = cplx::<f64>(1.0, -z0 * 0.013) / cplx::<f64>(1.0, z0 * 0.013);
        assert!((got - expect).norm() < 1e-14);
        assert!((got.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_admittance_yields_valid_scattering() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for arch in [
            RisArchitecture::single(6).unwrap(),
            RisArchitecture::grouped(8, 2).unwrap(),
            RisArchitecture::grouped(8, 4).unwrap(),
            RisArchitecture::fully(8).unwrap(),
        ] {
            for _ in 0..20 {
                let b = random_admittance(arch, &mut rng, 0.05);
                let theta = admittance_to_scattering(&b);
                let report = validate_scattering(&theta.to_dense(), &arch);
                assert!(
                    report.pass,
                    "violations: unitarity {:.2e}, symmetry {:.2e}, blocks {:.2e}",
                    report.unitarity, report.symmetry, report.block_structure
                );
            }
        }
    }

    #[test]
    fn single_connected_scattering_is_diagonal_unit_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let arch = RisArchitecture::single(5).unwrap();
        let b = random_admittance(arch, &mut rng, 0.05);
        let dense = admittance_to_scattering(&b).to_dense();
        for i in 0..5 {
            assert!((dense[(i, i)].norm() - 1.0).abs() < 1e-12);
            for j in 0..5 {
                if i != j {
                    assert_eq!(dense[(i, j)], cplx::<f64>(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn validation_flags_off_block_entry() {
        let arch = RisArchitecture::grouped(4, 2).unwrap();
        let mut theta = CMat::<f64>::identity(4, 4);
        theta[(0, 3)] = cplx(1e-3, 0.0);
        let report = validate_scattering(&theta, &arch);
        assert!(!report.pass);
        assert!((report.block_structure - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn validation_passes_identity() {
        let arch = RisArchitecture::grouped(4, 2).unwrap();
        let report = validate_scattering(&CMat::<f64>::identity(4, 4), &arch);
        assert!(report.pass);
        assert_eq!(report.max_violation(), 0.0);
    }

    #[test]
    fn pack_lengths() {
        // N_E = 1: x is the diagonal, length M.
        let single = RisArchitecture::single(5).unwrap();
        assert_eq!(single.packed_len(), 5);
        // N_G = 1, N_E = 2: length 3.
        let fully = RisArchitecture::fully(2).unwrap();
        assert_eq!(fully.packed_len(), 3);
    }

    #[test]
    fn pack_unpack_roundtrip_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for arch in [
            RisArchitecture::single(4).unwrap(),
            RisArchitecture::grouped(12, 3).unwrap(),
            RisArchitecture::fully(5).unwrap(),
        ] {
            let b = random_admittance(arch, &mut rng, 1.0);
            let x = upper_triangular_pack(&b);
            assert_eq!(x.len(), arch.packed_len());
            let back = upper_triangular_unpack(&x, arch).unwrap();
            for (orig, got) in b.blocks().iter().zip(back.blocks()) {
                assert_eq!(orig, got);
            }
        }
    }

    #[test]
    fn unpack_rejects_wrong_length() {
        let arch = RisArchitecture::grouped(4, 2).unwrap();
        let x = RVec::<f64>::zeros(arch.packed_len() + 1);
        assert!(upper_triangular_unpack(&x, arch).is_err());
    }
}
