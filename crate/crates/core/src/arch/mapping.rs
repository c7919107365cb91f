use crate::linalg::{self, Mat3, Vec3};

use super::StageSchedule;

/// Tile-local view of the space-time map: iterations of one tile box map to
/// replica-local PE coordinates and stage cycles starting at zero.
#[derive(Debug, Clone)]
pub struct Mapping {
    pub stt: Mat3,
    pub adj: Mat3,
    pub det: i64,
    pub min: Vec3,
    pub footprint: [usize; 2],
    pub time_extent: usize,
}

impl Mapping {
    pub fn new(stt: Mat3, min: Vec3, footprint: [usize; 2], time_extent: usize) -> Self {
        Mapping {
            stt,
            adj: linalg::adjugate3(&stt),
            det: linalg::det3(&stt),
            min,
            footprint,
            time_extent,
        }
    }

    pub fn from_schedule(s: &StageSchedule) -> Self {
        Mapping::new(s.stt, s.space_time_min, s.footprint, s.time_extent)
    }

    /// Local PE and cycle of a tile-local iteration.
    pub fn place(&self, x: Vec3) -> ([usize; 2], usize) {
        let v = linalg::mat_vec(&self.stt, &x);
        (
            [(v[0] - self.min[0]) as usize, (v[1] - self.min[1]) as usize],
            (v[2] - self.min[2]) as usize,
        )
    }

    /// Space-time coordinates (before normalization) of a local PE and cycle.
    pub fn space_time(&self, p: [usize; 2], t: usize) -> Vec3 {
        [
            p[0] as i64 + self.min[0],
            p[1] as i64 + self.min[1],
            t as i64 + self.min[2],
        ]
    }

    /// The iteration executed at a local PE and cycle, if any.
    pub fn iteration(&self, p: [usize; 2], t: usize, shape: [usize; 3]) -> Option<Vec3> {
        let num = linalg::mat_vec(&self.adj, &self.space_time(p, t));
        let mut x = [0i64; 3];
        for i in 0..3 {
            if num[i] % self.det != 0 {
                return None;
            }
            x[i] = num[i] / self.det;
        }
        in_box(x, shape).then_some(x)
    }

    /// Every iteration of a tile box with its PE and cycle.
    pub fn points(&self, shape: [usize; 3]) -> impl Iterator<Item = (Vec3, [usize; 2], usize)> + '_ {
        let [a, b, c] = shape;
        (0..a as i64).flat_map(move |i| {
            (0..b as i64).flat_map(move |j| {
                (0..c as i64).map(move |k| {
                    let x = [i, j, k];
                    let (p, t) = self.place(x);
                    (x, p, t)
                })
            })
        })
    }
}

pub fn in_box(x: Vec3, shape: [usize; 3]) -> bool {
    (0..3).all(|i| x[i] >= 0 && (x[i] as usize) < shape[i])
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
