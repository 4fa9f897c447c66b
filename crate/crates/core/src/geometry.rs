//! Spatial layout of the system: BS array, movable sub-panels, users.
//!
//! Sub-panel `g` is rigid: its elements sit at `t_{g,m} = c_g + δ_m` where the
//! reference point `c_g` (the first element by convention) is the only
//! degree of freedom. Reference points live inside an axis-aligned rectangle
//! and must keep a minimum mutual distance so panels never overlap.

use crate::error::{Error, Result};
use crate::ris::RisArchitecture;
use crate::scalar::{real, Real, Vec2};

/// Axis-aligned rectangle `[min.x, min.x + size.x] × [min.y, min.y + size.y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region<T: Real> {
    pub min: Vec2<T>,
    pub size: Vec2<T>,
}

impl<T: Real> Region<T> {
    pub fn new(min: Vec2<T>, size: Vec2<T>) -> Self {
        Self { min, size }
    }

    /// Rectangle of the given side lengths centered on the origin.
    pub fn centered(len_x: T, len_y: T) -> Self {
        let half = real::<T>(0.5);
        Self {
            min: Vec2::new(-len_x * half, -len_y * half),
            size: Vec2::new(len_x, len_y),
        }
    }

    pub fn max(&self) -> Vec2<T> {
        self.min + self.size
    }

    pub fn center(&self) -> Vec2<T> {
        self.min + self.size * real::<T>(0.5)
    }

    pub fn contains(&self, p: &Vec2<T>, tol: T) -> bool {
        let max = self.max();
        p.x >= self.min.x - tol && p.x <= max.x + tol && p.y >= self.min.y - tol && p.y <= max.y + tol
    }

    /// Clamp a point into the rectangle.
    pub fn clamp(&self, p: &Vec2<T>) -> Vec2<T> {
        let max = self.max();
        Vec2::new(p.x.clamp(self.min.x, max.x), p.y.clamp(self.min.y, max.y))
    }
}

/// Full spatial description of one scenario instance.
#[derive(Debug, Clone)]
pub struct SystemGeometry<T: Real> {
    /// BS antenna positions in the transmit-region local frame.
    pub bs_positions: Vec<Vec2<T>>,
    /// Sub-panel reference points `c_g` in the surface local frame.
    pub group_refs: Vec<Vec2<T>>,
    /// Fixed intra-group element displacements, shared by all groups.
    pub intra_group_offsets: Vec<Vec2<T>>,
    /// User positions in the surface local frame (surface at the origin).
    pub ue_positions: Vec<Vec2<T>>,
    /// Region the reference points may move in.
    pub region: Region<T>,
    /// Minimum distance between any two reference points.
    pub min_spacing: T,
    pub wavelength: T,
    /// BS-to-surface distance, used for path loss only.
    pub bs_ris_distance: T,
    /// Radius of the disc users are dropped in.
    pub ris_ue_radius: T,
}

impl<T: Real> SystemGeometry<T> {
    /// Conventional layout: BS is a half-wavelength ULA along x, each
    /// sub-panel is a half-wavelength linear sub-array along x, and the
    /// reference points start in the fixed-antenna arrangement (groups
    /// abutting at spacing `D` from the region's left edge, vertically
    /// centered). The default spacing `D = N_E λ/2` makes the initial
    /// layout one contiguous `M`-element ULA.
    pub fn linear(
        arch: &RisArchitecture,
        num_tx_antennas: usize,
        num_users: usize,
        wavelength: T,
        region: Region<T>,
        bs_ris_distance: T,
        ris_ue_radius: T,
    ) -> Result<Self> {
        let half_wl = wavelength * real::<T>(0.5);
        let bs_positions = (0..num_tx_antennas)
            .map(|i| Vec2::new(half_wl * real::<T>(i as f64), T::zero()))
            .collect();
        let offsets: Vec<Vec2<T>> = (0..arch.group_size())
            .map(|m| Vec2::new(half_wl * real::<T>(m as f64), T::zero()))
            .collect();
        let spacing = half_wl * real::<T>(arch.group_size() as f64);

        let y_mid = region.center().y;
        let group_refs: Vec<Vec2<T>> = (0..arch.num_groups())
            .map(|g| Vec2::new(region.min.x + spacing * real::<T>(g as f64), y_mid))
            .collect();

        let geom = Self {
            bs_positions,
            group_refs,
            intra_group_offsets: offsets,
            ue_positions: vec![Vec2::zeros(); num_users],
            region,
            min_spacing: spacing,
            wavelength,
            bs_ris_distance,
            ris_ue_radius,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn num_groups(&self) -> usize {
        self.group_refs.len()
    }

    pub fn group_size(&self) -> usize {
        self.intra_group_offsets.len()
    }

    pub fn total_elements(&self) -> usize {
        self.num_groups() * self.group_size()
    }

    pub fn num_users(&self) -> usize {
        self.ue_positions.len()
    }

    /// Position of element `m` of group `g`.
    pub fn element_position(&self, g: usize, m: usize) -> Vec2<T> {
        self.group_refs[g] + self.intra_group_offsets[m]
    }

    /// Box the reference points may occupy so that every element of the
    /// rigid panel stays inside `region`.
    pub fn feasible_box(&self) -> Region<T> {
        let mut lo = Vec2::new(T::zero(), T::zero());
        let mut hi = Vec2::new(T::zero(), T::zero());
        for d in &self.intra_group_offsets {
            lo.x = lo.x.min(d.x);
            lo.y = lo.y.min(d.y);
            hi.x = hi.x.max(d.x);
            hi.y = hi.y.max(d.y);
        }
        Region {
            min: self.region.min - lo,
            size: self.region.size - (hi - lo),
        }
    }

    /// Check every structural invariant; used at construction and after
    /// every placement update in debug builds.
    pub fn validate(&self) -> Result<()> {
        if self.wavelength <= T::zero() {
            return Err(Error::config("wavelength must be positive"));
        }
        if self.region.size.x < T::zero() || self.region.size.y < T::zero() {
            return Err(Error::config("region has negative extent"));
        }
        let feasible = self.feasible_box();
        if feasible.size.x < T::zero() || feasible.size.y < T::zero() {
            return Err(Error::config(
                "panel extent exceeds the movable region; increase the region size",
            ));
        }
        let tol = self.wavelength * real::<T>(1e-9);
        for (g, c) in self.group_refs.iter().enumerate() {
            for (m, d) in self.intra_group_offsets.iter().enumerate() {
                let p = c + d;
                if !self.region.contains(&p, tol) {
                    return Err(Error::config(format!(
                        "element ({g},{m}) at ({}, {}) lies outside the region",
                        p.x, p.y
                    )));
                }
            }
        }
        for g in 0..self.num_groups() {
            for h in (g + 1)..self.num_groups() {
                let dist = (self.group_refs[g] - self.group_refs[h]).norm();
                if dist < self.min_spacing - tol {
                    return Err(Error::config(format!(
                        "groups {g} and {h} are {dist} apart, below the minimum spacing {}",
                        self.min_spacing
                    )));
                }
            }
        }
        // Offsets must form a half-wavelength-spaced arrangement.
        let half_wl = self.wavelength * real::<T>(0.5);
        for w in self.intra_group_offsets.windows(2) {
            let step = (w[1] - w[0]).norm();
            if (step - half_wl).abs() > tol {
                return Err(Error::config(
                    "intra-group offsets are not spaced at half a wavelength",
                ));
            }
        }
        Ok(())
    }

    /// True when the reference points satisfy the pairwise spacing
    /// constraint (up to `tol`).
    pub fn spacing_satisfied(&self, tol: T) -> bool {
        for g in 0..self.num_groups() {
            for h in (g + 1)..self.num_groups() {
                if (self.group_refs[g] - self.group_refs[h]).norm() < self.min_spacing - tol {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch() -> RisArchitecture {
        RisArchitecture::grouped(8, 2).unwrap()
    }

    fn region() -> Region<f64> {
        // l1 = 1.2 * (M-1) λ/2 with λ = 0.01, M = 8; l2 = 4λ.
        Region::centered(1.2 * 7.0 * 0.005, 0.04)
    }

    #[test]
    fn fa_layout_is_contiguous_ula() {
        let g = SystemGeometry::<f64>::linear(&arch(), 4, 2, 0.01, region(), 50.0, 2.0).unwrap();
        // Groups abut at D = N_E λ/2, so all 8 elements form a λ/2 ULA.
        let mut xs = Vec::new();
        for gi in 0..4 {
            for m in 0..2 {
                xs.push(g.element_position(gi, m).x);
            }
        }
        for w in xs.windows(2) {
            assert!((w[1] - w[0] - 0.005).abs() < 1e-12);
        }
        assert!(g.validate().is_ok());
        assert_eq!(g.min_spacing, 0.01);
    }

    #[test]
    fn feasible_box_shrinks_by_panel_extent() {
        let g = SystemGeometry::<f64>::linear(&arch(), 4, 2, 0.01, region(), 50.0, 2.0).unwrap();
        let b = g.feasible_box();
        assert!((b.size.x - (region().size.x - 0.005)).abs() < 1e-12);
        assert!((b.size.y - region().size.y).abs() < 1e-12);
    }

    #[test]
    fn validate_rejects_out_of_region_element() {
        let mut g = SystemGeometry::<f64>::linear(&arch(), 4, 2, 0.01, region(), 50.0, 2.0).unwrap();
        g.group_refs[0].x = region().max().x; // panel sticks out on the right
        assert!(g.validate().is_err());
    }

    #[test]
    fn validate_rejects_spacing_violation() {
        let mut g = SystemGeometry::<f64>::linear(&arch(), 4, 2, 0.01, region(), 50.0, 2.0).unwrap();
        g.group_refs[1] = g.group_refs[0];
        assert!(g.validate().is_err());
        assert!(!g.spacing_satisfied(1e-12));
    }

    #[test]
    fn region_too_small_for_fa_layout_errors() {
        let tiny = Region::centered(0.01, 0.04);
        assert!(SystemGeometry::<f64>::linear(&arch(), 4, 2, 0.01, tiny, 50.0, 2.0).is_err());
    }
}
