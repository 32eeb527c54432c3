//! CLOSED set as a spatial hash with cell size `d_sim`.

use std::collections::HashMap;

use crate::kinematics::{pose_distance, Pose};

use super::Mode;

#[derive(Debug, Clone)]
struct Entry {
    pose: Pose,
    cost: f64,
}

#[derive(Debug, Clone)]
pub struct ClosedSet {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<Entry>>,
    len: usize,
}

impl ClosedSet {
    pub fn new(d_sim: f64) -> Self {
        Self {
            cell: d_sim,
            cells: HashMap::new(),
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn key(&self, pose: &Pose) -> [i64; 3] {
        let c = pose.p / self.cell;
        [c.x.floor() as i64, c.y.floor() as i64, c.z.floor() as i64]
    }

    pub fn insert(&mut self, pose: Pose, cost: f64) {
        let k = self.key(&pose);
        self.cells.entry(k).or_default().push(Entry { pose, cost });
        self.len += 1;
    }

    /// Condition (i') `ρ < d_sim`, plus (ii') `C(u) ≤ C(v)` in the
    /// cost-aware mode. `d_sim` must not exceed the cell size.
    pub fn is_duplicate(&self, pose: &Pose, cost: f64, d_sim: f64, alpha: f64, mode: Mode) -> bool {
        debug_assert!(d_sim <= self.cell * (1.0 + 1e-12));
        let k = self.key(pose);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(entries) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                        continue;
                    };
                    for u in entries {
                        if mode == Mode::Ros && u.cost > cost {
                            continue;
                        }
                        if pose_distance(&u.pose, pose, alpha) < d_sim {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

pub fn is_duplicate(closed: &ClosedSet, v: &super::Node, d_sim: f64, alpha: f64, mode: Mode) -> bool {
    closed.is_duplicate(&v.pose, v.cost_to_come, d_sim, alpha, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Vec3;

    #[test]
    fn duplicate_rules() {
        let d = 0.5;
        let mut c = ClosedSet::new(d);
        let v = Pose::at(Vec3::new(1.0, 2.0, 3.0));
        assert!(!c.is_duplicate(&v, 1.0, d, 1.0, Mode::Ros));
        c.insert(Pose::at(Vec3::new(1.0, 2.0, 3.0 + d / 2.0)), 2.0);
        assert!(!c.is_duplicate(&v, 1.0, d, 1.0, Mode::Ros));
        assert!(c.is_duplicate(&v, 1.0, d, 1.0, Mode::Rcs));
        assert!(c.is_duplicate(&v, 2.0, d, 1.0, Mode::Ros));
        // orientation counts toward ρ
        let turned = Pose::new(v.p, crate::kinematics::Quat::from_axis_angle(&Vec3::x_axis(), 0.4));
        assert!(!c.is_duplicate(&turned, 5.0, d, 1.0, Mode::Rcs));
    }

    #[test]
    fn neighbour_cells_are_searched() {
        let d = 1.0;
        let mut c = ClosedSet::new(d);
        c.insert(Pose::at(Vec3::new(0.99, 0.99, 0.99)), 0.0);
        assert!(c.is_duplicate(&Pose::at(Vec3::new(1.01, 1.01, 1.01)), 1.0, d, 1.0, Mode::Ros));
        assert!(c.is_duplicate(&Pose::at(Vec3::new(0.5, 1.3, 0.7)), 1.0, d, 1.0, Mode::Ros));
        assert!(!c.is_duplicate(&Pose::at(Vec3::new(2.5, 0.99, 0.99)), 1.0, d, 1.0, Mode::Ros));
    }
}
