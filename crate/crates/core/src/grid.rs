//! Uniform square mesh over a rectangle, optionally masked.
//!
//! Cells are addressed `(i, j)` with `i` along x and `j` along y and stored
//! row-major (`j * nx + i`). Everything outside the rectangle, and every
//! masked-out cell, acts as a zero ghost cell: that is how the Dirichlet
//! condition enters every operator.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D<T> {
    nx: usize,
    ny: usize,
    h: T,
    mask: Option<Arc<[bool]>>,
}

/// Outward normal of a boundary face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Normal {
    East,
    West,
    North,
    South,
}

impl Normal {
    pub fn as_str(self) -> &'static str {
        match self {
            Normal::East => "E",
            Normal::West => "W",
            Normal::North => "N",
            Normal::South => "S",
        }
    }
}

/// A face between an inside cell and a ghost cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFace {
    pub i: usize,
    pub j: usize,
    pub normal: Normal,
}

impl<T: Real> Grid2D<T> {
    pub fn new(nx: usize, ny: usize, h: T) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid(format!(
                "need nx, ny >= 2, got {nx}x{ny}"
            )));
        }
        if !(h > T::zero() && h.is_finite()) {
            return Err(Error::InvalidGrid(format!("need h > 0, got {h}")));
        }
        Ok(Self {
            nx,
            ny,
            h,
            mask: None,
        })
    }

    /// `n × n` cells covering the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, T::one() / T::from_usize_lossy(n.max(1)))
    }

    /// Restricts the domain to the cells where `mask` is true. The inside
    /// region must be nonempty and 4-connected.
    pub fn with_mask(self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.nx * self.ny {
            return Err(Error::InvalidGrid(format!(
                "mask has {} entries, grid has {}",
                mask.len(),
                self.nx * self.ny
            )));
        }
        let Some(start) = mask.iter().position(|&m| m) else {
            return Err(Error::InvalidGrid("mask selects no cells".into()));
        };
        let total = mask.iter().filter(|&&m| m).count();
        let mut seen = vec![false; mask.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut reached = 0;
        while let Some(c) = queue.pop_front() {
            reached += 1;
            let (i, j) = (c % self.nx, c / self.nx);
            let mut visit = |ni: usize, nj: usize| {
                let n = nj * self.nx + ni;
                if mask[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            };
            if i > 0 {
                visit(i - 1, j);
            }
            if i + 1 < self.nx {
                visit(i + 1, j);
            }
            if j > 0 {
                visit(i, j - 1);
            }
            if j + 1 < self.ny {
                visit(i, j + 1);
            }
        }
        if reached != total {
            return Err(Error::InvalidGrid(
                "masked region is not 4-connected".into(),
            ));
        }
        Ok(Self {
            mask: Some(mask.into()),
            ..self
        })
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn h(&self) -> T {
        self.h
    }

    #[inline]
    pub fn cell_area(&self) -> T {
        self.h * self.h
    }

    /// Number of stored cells (the full rectangle).
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn is_masked(&self) -> bool {
        self.mask.is_some()
    }

    /// True when `(i, j)` lies in the rectangle and inside the mask.
    #[inline]
    pub fn is_inside(&self, i: isize, j: isize) -> bool {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return false;
        }
        match &self.mask {
            Some(m) => m[j as usize * self.nx + i as usize],
            None => true,
        }
    }

    pub fn inside_count(&self) -> usize {
        self.mask
            .as_ref()
            .map_or(self.len(), |m| m.iter().filter(|&&b| b).count())
    }

    /// Lebesgue measure of the inside region.
    pub fn area(&self) -> T {
        T::from_usize_lossy(self.inside_count()) * self.cell_area()
    }

    pub fn width(&self) -> T {
        T::from_usize_lossy(self.nx) * self.h
    }

    pub fn height(&self) -> T {
        T::from_usize_lossy(self.ny) * self.h
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> (T, T) {
        let half = T::lit(0.5);
        (
            (T::from_usize_lossy(i) + half) * self.h,
            (T::from_usize_lossy(j) + half) * self.h,
        )
    }

    /// Faces separating an inside cell from a ghost cell, in a fixed order
    /// (row-major over cells, then E, W, N, S).
    pub fn boundary_faces(&self) -> Vec<BoundaryFace> {
        let mut out = Vec::new();
        for j in 0..self.ny {
            for i in 0..self.nx {
                let (ii, jj) = (i as isize, j as isize);
                if !self.is_inside(ii, jj) {
                    continue;
                }
                for (di, dj, normal) in [
                    (1, 0, Normal::East),
                    (-1, 0, Normal::West),
                    (0, 1, Normal::North),
                    (0, -1, Normal::South),
                ] {
                    if !self.is_inside(ii + di, jj + dj) {
                        out.push(BoundaryFace { i, j, normal });
                    }
                }
            }
        }
        out
    }

    /// Same cell layout, spacing and mask.
    pub fn same_as(&self, other: &Self) -> bool {
        self == other
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid2D::new(1, 4, 0.1).is_err());
        assert!(Grid2D::new(4, 4, 0.0).is_err());
        assert!(Grid2D::new(4, 4, -1.0).is_err());
        assert!(Grid2D::<f64>::new(2, 2, 0.5).is_ok());
    }

    #[test]
    fn rectangle_boundary_faces() {
        let g = Grid2D::new(5, 3, 0.1).unwrap();
        assert_eq!(g.boundary_faces().len(), 2 * 5 + 2 * 3);
        assert_eq!(g.inside_count(), 15);
    }

    #[test]
    fn mask_must_be_connected_and_nonempty() {
        let g = Grid2D::new(3, 3, 1.0).unwrap();
        assert!(g.clone().with_mask(vec![false; 9]).is_err());
        #[rustfmt::skip]
        let split = vec![
            true, false, true,
            false, false, false,
            false, false, false,
        ];
        assert!(g.clone().with_mask(split).is_err());
        #[rustfmt::skip]
        let ell = vec![
            true, false, false,
            true, false, false,
            true, true, true,
        ];
        let m = g.with_mask(ell).unwrap();
        assert_eq!(m.inside_count(), 5);
        // perimeter of the L-shaped region in unit faces
        assert_eq!(m.boundary_faces().len(), 12);
    }
}
