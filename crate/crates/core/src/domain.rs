//! Computational domains and uniform tensor-product meshes.
//!
//! Supported domains are 1D intervals and axis-aligned rectangles. On an
//! interval, the boundary measure is the two-point counting measure, so
//! `|boundary| = 2` regardless of the interval length.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static MESH_ID: AtomicU64 = AtomicU64::new(1);

/// Geometry of the computational domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainSpec {
    /// Interval `(a, b)`.
    Interval { a: f64, b: f64 },
    /// Axis-aligned rectangle `(ax, bx) x (ay, by)`.
    Rectangle { ax: f64, bx: f64, ay: f64, by: f64 },
}

impl DomainSpec {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::DegenerateDomain(format!("interval ({a}, {b})")));
        }
        Ok(DomainSpec::Interval { a, b })
    }

    pub fn rectangle(ax: f64, bx: f64, ay: f64, by: f64) -> Result<Self> {
        if !(ax.is_finite() && bx.is_finite() && ay.is_finite() && by.is_finite())
            || ax >= bx
            || ay >= by
        {
            return Err(Error::DegenerateDomain(format!(
                "rectangle ({ax}, {bx}) x ({ay}, {by})"
            )));
        }
        Ok(DomainSpec::Rectangle { ax, bx, ay, by })
    }

    /// Parses `"interval:a,b"` or `"rect:ax,bx,ay,by"`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::DegenerateDomain(format!("unparsable domain `{s}`")))?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::DegenerateDomain(format!("unparsable domain `{s}`")))?;
        match (kind.trim(), nums.as_slice()) {
            ("interval", [a, b]) => DomainSpec::interval(*a, *b),
            ("rect" | "rectangle", [ax, bx, ay, by]) => DomainSpec::rectangle(*ax, *bx, *ay, *by),
            _ => Err(Error::DegenerateDomain(format!("unparsable domain `{s}`"))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            DomainSpec::Rectangle { .. } => 2,
        }
    }

    /// Lebesgue measure of the domain.
    pub fn volume(&self) -> f64 {
        match *self {
            DomainSpec::Interval { a, b } => b - a,
            DomainSpec::Rectangle { ax, bx, ay, by } => (bx - ax) * (by - ay),
        }
    }

    /// Surface measure of the boundary. The interval convention is the
    /// counting measure on the two endpoints.
    pub fn surface(&self) -> f64 {
        match *self {
            DomainSpec::Interval { .. } => 2.0,
            DomainSpec::Rectangle { ax, bx, ay, by } => 2.0 * ((bx - ax) + (by - ay)),
        }
    }
}

/// Uniform conforming nodal mesh of a [`DomainSpec`].
///
/// Nodes are ordered lexicographically (x fastest), so all assembled
/// operators are banded with bandwidth `nx + 1` in 2D and 1 in 1D.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub spec: DomainSpec,
    /// Node coordinates; y is 0 for 1D meshes.
    pub nodes: Vec<(f64, f64)>,
    /// Element connectivity: 2 nodes per segment, 4 per quad (counterclockwise).
    pub elements: Vec<Vec<usize>>,
    /// Boundary edges as node pairs (2D only; empty in 1D).
    pub boundary_edges: Vec<(usize, usize)>,
    /// Indices of boundary nodes.
    pub boundary_nodes: Vec<usize>,
    /// Max element diameter.
    pub h: f64,
    /// Cells per axis.
    pub resolution: usize,
    id: u64,
}

impl Mesh {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary_flags()[node]
    }

    /// Boolean mask over nodes, true at boundary nodes.
    pub fn boundary_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.nodes.len()];
        for &i in &self.boundary_nodes {
            flags[i] = true;
        }
        flags
    }

    /// Interior node indices, in ascending order.
    pub fn interior_nodes(&self) -> Vec<usize> {
        let flags = self.boundary_flags();
        (0..self.nodes.len()).filter(|&i| !flags[i]).collect()
    }

    pub fn volume(&self) -> f64 {
        self.spec.volume()
    }

    pub fn surface(&self) -> f64 {
        self.spec.surface()
    }
}

/// Builds a uniform tensor-product mesh with `resolution` cells per axis.
pub fn build_mesh(spec: DomainSpec, resolution: usize) -> Result<Mesh> {
    if resolution < 2 {
        return Err(Error::InvalidParams(format!(
            "resolution must be >= 2, got {resolution}"
        )));
    }
    let id = MESH_ID.fetch_add(1, Ordering::Relaxed);
    match spec {
        DomainSpec::Interval { a, b } => {
            let n = resolution;
            let h = (b - a) / n as f64;
            let nodes: Vec<(f64, f64)> = (0..=n).map(|i| (a + i as f64 * h, 0.0)).collect();
            let elements: Vec<Vec<usize>> = (0..n).map(|i| vec![i, i + 1]).collect();
            Ok(Mesh {
                spec,
                nodes,
                elements,
                boundary_edges: Vec::new(),
                boundary_nodes: vec![0, n],
                h,
                resolution,
                id,
            })
        }
        DomainSpec::Rectangle { ax, bx, ay, by } => {
            let n = resolution;
            let hx = (bx - ax) / n as f64;
            let hy = (by - ay) / n as f64;
            let nxn = n + 1;
            let mut nodes = Vec::with_capacity(nxn * nxn);
            for iy in 0..=n {
                for ix in 0..=n {
                    nodes.push((ax + ix as f64 * hx, ay + iy as f64 * hy));
                }
            }
            let idx = |ix: usize, iy: usize| iy * nxn + ix;
            let mut elements = Vec::with_capacity(n * n);
            for iy in 0..n {
                for ix in 0..n {
                    elements.push(vec![
                        idx(ix, iy),
                        idx(ix + 1, iy),
                        idx(ix + 1, iy + 1),
                        idx(ix, iy + 1),
                    ]);
                }
            }
            let mut boundary_nodes = Vec::new();
            for iy in 0..=n {
                for ix in 0..=n {
                    if ix == 0 || ix == n || iy == 0 || iy == n {
                        boundary_nodes.push(idx(ix, iy));
                    }
                }
            }
            let mut boundary_edges = Vec::new();
            for ix in 0..n {
                boundary_edges.push((idx(ix, 0), idx(ix + 1, 0)));
                boundary_edges.push((idx(ix, n), idx(ix + 1, n)));
            }
            for iy in 0..n {
                boundary_edges.push((idx(0, iy), idx(0, iy + 1)));
                boundary_edges.push((idx(n, iy), idx(n, iy + 1)));
            }
            Ok(Mesh {
                spec,
                nodes,
                elements,
                boundary_edges,
                boundary_nodes,
                h: (hx * hx + hy * hy).sqrt(),
                resolution,
                id,
            })
        }
    }
}

/// Returns `(|domain|, |boundary|)` with the interval counting-measure convention.
pub fn measures(mesh: &Mesh) -> (f64, f64) {
    (mesh.spec.volume(), mesh.spec.surface())
}
