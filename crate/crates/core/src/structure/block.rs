//! Block profiles: the dA×dA nonzero-block grid of a bipartite operator.

use crate::core_linalg::{BipartiteOp, CMatrix};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct BlockProfile {
    pub d_a: usize,
    pub d_b: usize,
    /// `grid[y][x]` is true when block `(y, x)` has Frobenius norm above tol.
    pub nonzero_block_grid: Vec<Vec<bool>>,
    pub is_permutation: bool,
    pub is_complex_permutation: bool,
}

impl BlockProfile {
    pub fn blocks_in_big_row(&self, y: usize) -> usize {
        self.nonzero_block_grid[y].iter().filter(|&&v| v).count()
    }

    pub fn blocks_in_big_column(&self, x: usize) -> usize {
        (0..self.d_a).filter(|&y| self.nonzero_block_grid[y][x]).count()
    }

    pub fn max_blocks_per_big_row(&self) -> usize {
        (0..self.d_a).map(|y| self.blocks_in_big_row(y)).max().unwrap_or(0)
    }

    pub fn max_blocks_per_big_column(&self) -> usize {
        (0..self.d_a).map(|x| self.blocks_in_big_column(x)).max().unwrap_or(0)
    }
}

/// Scans the dB×dB blocks of a unitary `u` and reports the nonzero pattern
/// together with permutation flags.
pub fn block_profile(u: &BipartiteOp) -> Result<BlockProfile> {
    u.check_unitary(crate::DEFAULT_TOL)?;
    let tol = crate::DEFAULT_TOL * u.matrix.norm().max(1.0);
    let grid: Vec<Vec<bool>> = (0..u.d_a)
        .map(|y| (0..u.d_a).map(|x| u.block_norm(y, x) > tol).collect())
        .collect();
    Ok(BlockProfile {
        d_a: u.d_a,
        d_b: u.d_b,
        nonzero_block_grid: grid,
        is_permutation: u.is_permutation(crate::DEFAULT_TOL),
        is_complex_permutation: u.is_complex_permutation(crate::DEFAULT_TOL),
    })
}

/// Accessor matching the spec's per-block view.
pub fn block_of(u: &BipartiteOp, y: usize, x: usize) -> CMatrix {
    u.block(y, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::fixtures;

    #[test]
    fn example4_grid_matches_display() {
        let p = block_profile(&fixtures::example4()).unwrap();
        let want = [
            [true, true, false, false, false],
            [true, false, true, false, false],
            [false, true, false, true, false],
            [false, false, true, false, true],
            [false, false, false, true, true],
        ];
        for y in 0..5 {
            for x in 0..5 {
                assert_eq!(p.nonzero_block_grid[y][x], want[y][x], "({y},{x})");
            }
        }
        for x in 0..5 {
            assert_eq!(p.blocks_in_big_column(x), 2);
        }
        assert!(p.is_permutation);
    }

    #[test]
    fn identity_grid_is_diagonal() {
        let p = block_profile(&fixtures::identity(3, 3)).unwrap();
        for y in 0..3 {
            assert_eq!(p.blocks_in_big_row(y), 1);
            assert!(p.nonzero_block_grid[y][y]);
        }
    }

    #[test]
    fn swap_grid_full() {
        let p = block_profile(&fixtures::swap2()).unwrap();
        for y in 0..2 {
            for x in 0..2 {
                assert!(p.nonzero_block_grid[y][x]);
            }
        }
    }
}
