//! Loop selection and tiling of the three mapped loops onto a PE array.

use serde::{Deserialize, Serialize};

use crate::algebra::TensorAlgebra;
use crate::error::{Error, Result};
use crate::linalg::Mat3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayDims {
    pub rows: usize,
    pub cols: usize,
}

impl ArrayDims {
    pub fn new(rows: usize, cols: usize) -> Self {
        ArrayDims { rows, cols }
    }

    pub fn pes(&self) -> usize {
        self.rows * self.cols
    }

    /// Parses `RxC`.
    pub fn parse(text: &str) -> Result<Self> {
        let (r, c) = text
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::Config(format!("array must be RxC, got `{text}`")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|v| *v > 0)
                .ok_or_else(|| Error::Config(format!("bad array dimension `{s}`")))
        };
        Ok(ArrayDims::new(parse(r)?, parse(c)?))
    }
}

impl std::fmt::Display for ArrayDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// Copies of the mapped tile placed side by side when the tile footprint
/// leaves whole blocks of the array idle. Each copy runs a different value
/// of one sequential, non-reduction loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaPlan {
    /// Iterator index of the replicated sequential loop.
    pub loop_index: Option<usize>,
    /// Top-left PE of each copy.
    pub origins: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilePlan {
    pub selection: [usize; 3],
    pub tile: [usize; 3],
    pub tile_counts: [usize; 3],
    /// Unselected loops, outermost first.
    pub sequential: Vec<usize>,
    /// Rows and columns spanned by one tile.
    pub footprint: [usize; 2],
    /// Minimum of `T x` over the full tile; subtracting it normalizes PE
    /// coordinates and cycles to start at zero.
    pub space_time_min: [i64; 3],
    pub time_extent: usize,
    pub replicas: ReplicaPlan,
    pub warnings: Vec<String>,
}

fn extent_of(row: &[i64; 3], tile: &[usize; 3]) -> usize {
    row.iter()
        .zip(tile)
        .map(|(c, t)| (c.unsigned_abs() as usize) * (t - 1))
        .sum::<usize>()
        + 1
}

fn min_of(row: &[i64; 3], tile: &[usize; 3]) -> i64 {
    row.iter()
        .zip(tile)
        .map(|(c, t)| (c * (*t as i64 - 1)).min(0))
        .sum()
}

impl TilePlan {
    /// Trip count of the replicated loop per replica round, or the loop bound.
    pub fn sequential_trips(&self, algebra: &TensorAlgebra) -> Vec<usize> {
        self.sequential
            .iter()
            .map(|&it| {
                let bound = algebra.iterators[it].bound;
                if Some(it) == self.replicas.loop_index {
                    bound.div_ceil(self.replicas.origins.len())
                } else {
                    bound
                }
            })
            .collect()
    }

    pub fn stage_count(&self, algebra: &TensorAlgebra) -> usize {
        self.sequential_trips(algebra).iter().product::<usize>()
            * self.tile_counts.iter().product::<usize>()
    }

    pub fn occupied_pes(&self) -> usize {
        self.footprint[0] * self.footprint[1] * self.replicas.origins.len()
    }

    /// Tile box sizes (per selected loop) for every distinct tile shape that
    /// occurs: full tiles and the partial tile at each loop boundary.
    pub fn tile_shapes(&self, algebra: &TensorAlgebra) -> Vec<[usize; 3]> {
        let options: Vec<Vec<usize>> = (0..3)
            .map(|i| {
                let bound = algebra.iterators[self.selection[i]].bound;
                let mut v = vec![self.tile[i]];
                let rem = bound % self.tile[i];
                if rem != 0 && bound > self.tile[i] {
                    v.push(rem);
                }
                v
            })
            .collect();
        let mut out = Vec::new();
        for &a in &options[0] {
            for &b in &options[1] {
                for &c in &options[2] {
                    out.push([a, b, c]);
                }
            }
        }
        out
    }
}

/// Choose tile sizes so that the mapped tile fits the array and the time
/// budget, then place as many side-by-side copies as fit.
pub fn select_loops_and_tile(
    algebra: &TensorAlgebra,
    selection: [usize; 3],
    stt: &Mat3,
    dims: ArrayDims,
    time_budget: usize,
) -> Result<TilePlan> {
    if dims.rows == 0 || dims.cols == 0 {
        return Err(Error::Config("array dimensions must be positive".into()));
    }
    let mut warnings = Vec::new();
    let mut tile: [usize; 3] = std::array::from_fn(|i| algebra.iterators[selection[i]].bound);
    let limits = [dims.rows, dims.cols, time_budget.max(1)];
    for (r, &limit) in limits.iter().enumerate() {
        while extent_of(&stt[r], &tile) > limit {
            // shrink the loop contributing most to this row
            let c = (0..3)
                .filter(|&c| tile[c] > 1 && stt[r][c] != 0)
                .max_by_key(|&c| (stt[r][c].unsigned_abs() as usize * (tile[c] - 1), usize::MAX - c))
                .expect("a row over its limit has a shrinkable loop");
            tile[c] -= 1;
        }
    }
    for i in 0..3 {
        let it = &algebra.iterators[selection[i]];
        if it.bound == 1 && stt[2][i] == 0 {
            warnings.push(format!(
                "loop `{}` has bound 1 in a spatial slot; the array is under-utilized",
                it.name
            ));
        }
    }
    let tile_counts: [usize; 3] =
        std::array::from_fn(|i| algebra.iterators[selection[i]].bound.div_ceil(tile[i]));
    let footprint = [extent_of(&stt[0], &tile), extent_of(&stt[1], &tile)];
    let space_time_min = [
        min_of(&stt[0], &tile),
        min_of(&stt[1], &tile),
        min_of(&stt[2], &tile),
    ];
    let time_extent = extent_of(&stt[2], &tile);
    let sequential: Vec<usize> = (0..algebra.iterators.len())
        .filter(|i| !selection.contains(i))
        .collect();

    let grid = [dims.rows / footprint[0], dims.cols / footprint[1]];
    let slots = grid[0] * grid[1];
    let candidate = sequential
        .iter()
        .copied()
        .find(|&it| !algebra.is_reduction(it) && algebra.iterators[it].bound > 1);
    let replicas = match candidate {
        Some(it) if slots > 1 => {
            let used = slots.min(algebra.iterators[it].bound);
            let origins = (0..used)
                .map(|k| [(k / grid[1]) * footprint[0], (k % grid[1]) * footprint[1]])
                .collect();
            ReplicaPlan {
                loop_index: Some(it),
                origins,
            }
        }
        _ => ReplicaPlan {
            loop_index: None,
            origins: vec![[0, 0]],
        },
    };

    Ok(TilePlan {
        selection,
        tile,
        tile_counts,
        sequential,
        footprint,
        space_time_min,
        time_extent,
        replicas,
        warnings,
    })
}
