//! Uniform lattices on the circle, the interval and the flat 2-torus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of cells per axis.
pub const MIN_NODES_PER_AXIS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Circle,
    Interval,
    Torus2,
}

impl Topology {
    pub fn dimension(self) -> usize {
        match self {
            Topology::Circle | Topology::Interval => 1,
            Topology::Torus2 => 2,
        }
    }

    pub fn is_closed(self) -> bool {
        !matches!(self, Topology::Interval)
    }
}

/// A uniform lattice.
///
/// Circle: `n` nodes at `x_i = i L / n`. Interval: `n + 1` nodes on `[0, L]`
/// with the two ends flagged as boundary. Torus2: `nx * ny` nodes stored
/// row-major (`idx = j * nx + i`).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    topology: Topology,
    extent: [f64; 2],
    cells: [usize; 2],
    spacing: [f64; 2],
}

impl Mesh {
    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn dimension(&self) -> usize {
        self.topology.dimension()
    }

    pub fn extent(&self) -> [f64; 2] {
        self.extent
    }

    /// Cells per axis (the `nodeCount` argument of [`build_mesh`]).
    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    /// Largest spacing over the active axes.
    pub fn max_spacing(&self) -> f64 {
        match self.topology {
            Topology::Torus2 => self.spacing[0].max(self.spacing[1]),
            _ => self.spacing[0],
        }
    }

    /// Nodes along the x axis.
    pub fn nx(&self) -> usize {
        match self.topology {
            Topology::Interval => self.cells[0] + 1,
            _ => self.cells[0],
        }
    }

    /// Nodes along the y axis (1 for one-dimensional meshes).
    pub fn ny(&self) -> usize {
        match self.topology {
            Topology::Torus2 => self.cells[1],
            _ => 1,
        }
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx() + i
    }

    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx(), idx / self.nx())
    }

    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.ij(idx);
        [i as f64 * self.spacing[0], j as f64 * self.spacing[1]]
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        match self.topology {
            Topology::Interval => vec![0, self.cells[0]],
            _ => Vec::new(),
        }
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.topology == Topology::Interval && (idx == 0 || idx == self.cells[0])
    }

    /// Node nearest to the given coordinates (periodic axes wrap).
    pub fn nearest_node(&self, point: [f64; 2]) -> usize {
        let axis = |v: f64, h: f64, n: usize, periodic: bool| -> usize {
            let k = (v / h).round() as i64;
            if periodic {
                k.rem_euclid(n as i64) as usize
            } else {
                k.clamp(0, n as i64 - 1) as usize
            }
        };
        let periodic = self.topology.is_closed();
        let i = axis(point[0], self.spacing[0], self.nx(), periodic);
        let j = match self.topology {
            Topology::Torus2 => axis(point[1], self.spacing[1], self.ny(), true),
            _ => 0,
        };
        self.index(i, j)
    }

    /// Coordinate volume of the cell dual to a node (half cells at interval ends).
    pub fn cell_volume(&self, idx: usize) -> f64 {
        match self.topology {
            Topology::Circle => self.spacing[0],
            Topology::Interval => {
                if self.is_boundary(idx) {
                    0.5 * self.spacing[0]
                } else {
                    self.spacing[0]
                }
            }
            Topology::Torus2 => self.spacing[0] * self.spacing[1],
        }
    }

    /// Signed coordinate displacement from `from` to `to`, minimal image on periodic axes.
    pub fn displacement(&self, from: [f64; 2], to: [f64; 2]) -> [f64; 2] {
        let wrap = |d: f64, period: f64| d - period * (d / period).round();
        match self.topology {
            Topology::Circle => [wrap(to[0] - from[0], self.extent[0]), 0.0],
            Topology::Interval => [to[0] - from[0], 0.0],
            Topology::Torus2 => [
                wrap(to[0] - from[0], self.extent[0]),
                wrap(to[1] - from[1], self.extent[1]),
            ],
        }
    }
}

/// Builds a uniform mesh. `extent` and `cells` use only their first entry
/// for one-dimensional topologies.
pub fn build_mesh(topology: Topology, extent: [f64; 2], cells: [usize; 2]) -> Result<Mesh> {
    let axes = topology.dimension();
    for a in 0..axes {
        if !(extent[a] > 0.0) || !extent[a].is_finite() {
            return Err(Error::InvalidMesh(format!("extent must be positive, got {}", extent[a])));
        }
        if cells[a] < MIN_NODES_PER_AXIS {
            return Err(Error::InvalidMesh(format!(
                "node count {} below minimum {MIN_NODES_PER_AXIS} (under-resolved)",
                cells[a]
            )));
        }
    }
    let (extent, cells) = if axes == 1 {
        ([extent[0], 0.0], [cells[0], 1])
    } else {
        (extent, cells)
    };
    let spacing = [
        extent[0] / cells[0] as f64,
        if axes == 2 { extent[1] / cells[1] as f64 } else { 1.0 },
    ];
    Ok(Mesh {
        topology,
        extent,
        cells,
        spacing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_nodes_are_uniform_without_boundary() {
        let m = build_mesh(Topology::Circle, [1.0, 0.0], [256, 0]).unwrap();
        assert_eq!(m.len(), 256);
        assert!(m.boundary_nodes().is_empty());
        assert_eq!(m.coords(3)[0], 3.0 / 256.0);
        assert_eq!(m.coords(255)[0], 255.0 / 256.0);
    }

    #[test]
    fn interval_flags_both_ends() {
        let m = build_mesh(Topology::Interval, [2.0, 0.0], [128, 0]).unwrap();
        assert_eq!(m.len(), 129);
        assert_eq!(m.boundary_nodes(), vec![0, 128]);
        assert_eq!(m.coords(128)[0], 2.0);
        assert_eq!(m.cell_volume(0), m.spacing()[0] / 2.0);
    }

    #[test]
    fn torus_is_periodic_grid() {
        let m = build_mesh(Topology::Torus2, [1.0, 1.0], [64, 64]).unwrap();
        assert_eq!(m.len(), 4096);
        assert!(m.boundary_nodes().is_empty());
        let idx = m.index(5, 7);
        assert_eq!(m.ij(idx), (5, 7));
        assert_eq!(m.nearest_node([1.0 - 1e-9, 0.0]), m.index(0, 0));
    }

    #[test]
    fn rejects_under_resolved_or_degenerate() {
        assert!(build_mesh(Topology::Circle, [1.0, 0.0], [15, 0]).is_err());
        assert!(build_mesh(Topology::Interval, [0.0, 0.0], [64, 0]).is_err());
        assert!(build_mesh(Topology::Torus2, [1.0, -1.0], [32, 32]).is_err());
        assert!(build_mesh(Topology::Torus2, [1.0, 1.0], [32, 8]).is_err());
    }

    #[test]
    fn coordinates_are_reproducible() {
        let a = build_mesh(Topology::Torus2, [1.0, 2.0], [32, 48]).unwrap();
        let b = build_mesh(Topology::Torus2, [1.0, 2.0], [32, 48]).unwrap();
        for idx in 0..a.len() {
            assert_eq!(a.coords(idx), b.coords(idx));
        }
    }

    #[test]
    fn minimal_image_displacement() {
        let m = build_mesh(Topology::Circle, [1.0, 0.0], [16, 0]).unwrap();
        assert!((m.displacement([0.0, 0.0], [0.7, 0.0])[0] + 0.3).abs() < 1e-15);
    }
}
