use crate::error::{Error, Result};

/// Uniform periodic pixel grid.
///
/// Scalar fields are stored row-major (`s = row * width + col`). Velocity
/// fields interleave the two components per pixel: `x[2s]` is the
/// horizontal (column-direction) component, `x[2s + 1]` the vertical one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub width: usize,
    pub height: usize,
    pub spacing: f64,
}

impl Grid2D {
    pub fn new(width: usize, height: usize, spacing: f64) -> Result<Self> {
        if width < 4 || height < 4 {
            return Err(Error::InvalidArgument(format!(
                "grid must be at least 4x4, got {width}x{height}"
            )));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "grid spacing must be positive, got {spacing}"
            )));
        }
        Ok(Self {
            width,
            height,
            spacing,
        })
    }

    /// Unit-spacing grid.
    pub fn square(side: usize) -> Result<Self> {
        Self::new(side, side, 1.0)
    }

    /// Number of pixels `m`.
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    /// Velocity dimension `n = 2m`.
    pub fn state_dim(&self) -> usize {
        2 * self.pixels()
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub(crate) fn east(&self, s: usize) -> usize {
        let col = s % self.width;
        if col + 1 == self.width {
            s + 1 - self.width
        } else {
            s + 1
        }
    }

    #[inline]
    pub(crate) fn west(&self, s: usize) -> usize {
        let col = s % self.width;
        if col == 0 {
            s + self.width - 1
        } else {
            s - 1
        }
    }

    #[inline]
    pub(crate) fn north(&self, s: usize) -> usize {
        let m = self.pixels();
        if s + self.width >= m {
            s + self.width - m
        } else {
            s + self.width
        }
    }

    #[inline]
    pub(crate) fn south(&self, s: usize) -> usize {
        if s < self.width {
            s + self.pixels() - self.width
        } else {
            s - self.width
        }
    }
}
