use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::thermal::StackedSystem;

/// Length of the blocks over which a reserve product keeps its capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Daily,
    Hourly,
    PerStep,
    /// Blocks of the given number of steps.
    Custom(usize),
}

/// Product-structure constraints `M r = 0`.
///
/// With `per_actuator` (block-diagonal `M`) every reserve actuator keeps a
/// constant capacity within each block. Otherwise only the total electric
/// capacity of the aggregation is held constant and buildings may trade
/// capacity between steps of a block; that relaxation is much slower to
/// solve for polytope signal sets.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatrix {
    pub horizon: usize,
    pub blocks: Vec<Range<usize>>,
    pub per_actuator: bool,
}

pub fn build_structure_matrix(
    n1: usize,
    granularity: Granularity,
    steps_per_day: usize,
    block_diagonal: bool,
) -> Result<StructureMatrix> {
    let len = match granularity {
        Granularity::Daily => steps_per_day,
        Granularity::Hourly => {
            if steps_per_day % 24 != 0 {
                return Err(CoreError::InvalidParameter(format!("{steps_per_day} steps per day is not whole steps per hour")));
            }
            steps_per_day / 24
        }
        Granularity::PerStep => 1,
        Granularity::Custom(l) => l,
    };
    if len == 0 || n1 == 0 || n1 % len != 0 {
        return Err(CoreError::InvalidParameter(format!("product blocks of {len} steps do not divide horizon {n1}")));
    }
    let blocks = (0..n1 / len).map(|i| i * len..(i + 1) * len).collect();
    Ok(StructureMatrix { horizon: n1, blocks, per_actuator: block_diagonal })
}

impl StructureMatrix {
    /// Consecutive step pairs `(t, t+1)` that must carry equal capacity.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.blocks.iter().flat_map(|b| (b.start..b.end - 1).map(|t| (t, t + 1))).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.iter().all(|b| b.len() <= 1)
    }

    /// Dense `M` over the reserve vector of `system` (buildings, then steps,
    /// then reserve slots). Aggregate rows weight each slot by its electric
    /// kW per unit.
    pub fn matrix(&self, system: &StackedSystem) -> DMatrix<f64> {
        let pairs = self.pairs();
        let offsets = system.offsets();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
        if self.per_actuator {
            for (b, (_, _, d)) in system.blocks.iter().zip(&offsets) {
                for s in 0..b.n_r {
                    for &(t, t1) in &pairs {
                        rows.push(vec![(d + t * b.n_r + s, 1.0), (d + t1 * b.n_r + s, -1.0)]);
                    }
                }
            }
        } else {
            for &(t, t1) in &pairs {
                let mut row = Vec::new();
                for (b, (_, _, d)) in system.blocks.iter().zip(&offsets) {
                    for s in 0..b.n_r {
                        let w = b.electric_kw_per_unit(s);
                        row.push((d + t * b.n_r + s, w));
                        row.push((d + t1 * b.n_r + s, -w));
                    }
                }
                rows.push(row);
            }
        }
        let mut m = DMatrix::zeros(rows.len(), system.dim_du());
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] += v;
            }
        }
        m
    }
}
