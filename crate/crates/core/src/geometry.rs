//! Discretized domains, distance to the boundary and exterior integrals.
//!
//! Domains are cell-centered uniform grids. A node carries the volume
//! `h^N` of its cell, so sums over nodes are midpoint quadratures over Ω.
//! Functions on a domain are implicitly zero outside of it; the exterior
//! half of the nonlocal energy is folded into one weight per node,
//! [`TailWeight`], computed once per `(t, p)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Coordinates of a node. One-dimensional domains use `[x, 0.0]`.
pub type Point = [f64; 2];

/// Points per side used by the polar integral beyond the collar box.
const TAIL_GAUSS_POINTS: usize = 48;

pub(crate) fn distance(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Surface measure of the unit sphere in ℝᴺ (σ₁ = 2, σ₂ = 2π).
pub fn sphere_measure(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => unreachable!("only dimensions 1 and 2 are supported"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Interval { a: f64, b: f64 },
    Disk { center: Point, radius: f64 },
    Box { lo: Point, hi: Point },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Interval { .. } => 1,
            Shape::Disk { .. } | Shape::Box { .. } => 2,
        }
    }

    /// `dist(x, ∂Ω)` for a point of Ω̄.
    pub fn boundary_distance(&self, x: &Point) -> f64 {
        match *self {
            Shape::Interval { a, b } => (x[0] - a).min(b - x[0]).max(0.0),
            Shape::Disk { center, radius } => (radius - distance(x, &center)).max(0.0),
            Shape::Box { lo, hi } => (x[0] - lo[0])
                .min(hi[0] - x[0])
                .min(x[1] - lo[1])
                .min(hi[1] - x[1])
                .max(0.0),
        }
    }

    pub fn contains_strictly(&self, x: &Point) -> bool {
        match *self {
            Shape::Interval { a, b } => x[0] > a && x[0] < b,
            Shape::Disk { center, radius } => distance(x, &center) < radius,
            Shape::Box { lo, hi } => x[0] > lo[0] && x[0] < hi[0] && x[1] > lo[1] && x[1] < hi[1],
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Shape::Interval { a, b } => b - a,
            Shape::Disk { radius, .. } => 2.0 * radius,
            Shape::Box { lo, hi } => (hi[0] - lo[0]).hypot(hi[1] - lo[1]),
        }
    }
}

/// Exterior kernel mass seen from one node:
/// `∫_{Ωᶜ} |x_i − y|^{−(N+tp)} dy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailWeight {
    pub node: usize,
    pub value: f64,
}

/// Axis-aligned box enclosing Ω and the collar; the polar tail is taken
/// beyond its edges.
#[derive(Debug, Clone, Copy, PartialEq)]
struct CollarBox {
    lo: Point,
    hi: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    shape: Shape,
    nodes: Vec<Point>,
    interior_mask: Vec<bool>,
    spacing: f64,
    collar_nodes: Vec<Point>,
    collar_width: f64,
    collar_box: Option<CollarBox>,
    boundary_distance: Vec<f64>,
    diameter: f64,
    inradius: f64,
    argmax_node: usize,
}

impl GridDomain {
    /// `n` cell centers of a uniform partition of `(a, b)`.
    pub fn build_interval(a: f64, b: f64, n: usize) -> Result<GridDomain> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidDomain("interval bounds must be finite".into()));
        }
        if a >= b {
            return Err(Error::InvalidDomain(format!("empty interval ({a}, {b})")));
        }
        if n < 3 {
            return Err(Error::InvalidDomain(format!("need at least 3 nodes, got {n}")));
        }
        let h = (b - a) / n as f64;
        let nodes = (0..n).map(|i| [a + (i as f64 + 0.5) * h, 0.0]).collect();
        Ok(Self::assemble(Shape::Interval { a, b }, nodes, h, Vec::new(), 0.0, None))
    }

    /// One-dimensional domain from an explicit node list in `[a, b]`.
    ///
    /// Each node is given cell width `h`. Nodes placed on `a` or `b` are
    /// boundary nodes (`interior_mask` false, distance 0); functions must
    /// vanish there.
    pub fn from_nodes_1d(a: f64, b: f64, xs: &[f64], h: f64) -> Result<GridDomain> {
        if !a.is_finite() || !b.is_finite() || a >= b {
            return Err(Error::InvalidDomain(format!("bad interval ({a}, {b})")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidDomain(format!("bad spacing {h}")));
        }
        if xs.is_empty() {
            return Err(Error::InvalidDomain("empty node list".into()));
        }
        if xs.iter().any(|&x| !(x >= a && x <= b)) {
            return Err(Error::InvalidDomain("node outside [a, b]".into()));
        }
        let nodes = xs.iter().map(|&x| [x, 0.0]).collect();
        Ok(Self::assemble(Shape::Interval { a, b }, nodes, h, Vec::new(), 0.0, None))
    }

    /// Grid of spacing `h` aligned with the center of the disk, clipped to
    /// the open disk, plus a collar of exterior cells reaching at most
    /// `collar_width` away from Ω.
    pub fn build_disk(center: Point, radius: f64, h: f64, collar_width: f64) -> Result<GridDomain> {
        if !(radius > 0.0 && radius.is_finite()) || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidDomain(format!("bad disk radius {radius}")));
        }
        if !(h > 0.0 && h < radius / 4.0) {
            return Err(Error::InvalidDomain(format!(
                "spacing {h} must lie in (0, radius/4)"
            )));
        }
        let shape = Shape::Disk { center, radius };
        if !(collar_width >= shape.diameter() && collar_width.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "collar width {collar_width} must be at least the diameter {}",
                shape.diameter()
            )));
        }
        // Farthest collar node is a box corner: sqrt(2)·k·h − radius ≤ W.
        let k = ((radius + collar_width) / (std::f64::consts::SQRT_2 * h)).floor() as i64;
        let mut nodes = Vec::new();
        let mut collar = Vec::new();
        for j in -k..=k {
            for i in -k..=k {
                let x = [center[0] + i as f64 * h, center[1] + j as f64 * h];
                if shape.contains_strictly(&x) {
                    nodes.push(x);
                } else {
                    collar.push(x);
                }
            }
        }
        let half = (k as f64 + 0.5) * h;
        let collar_box = CollarBox {
            lo: [center[0] - half, center[1] - half],
            hi: [center[0] + half, center[1] + half],
        };
        Ok(Self::assemble(shape, nodes, h, collar, collar_width, Some(collar_box)))
    }

    /// Cell-centered grid on the rectangle `[lo, hi]`; both side lengths
    /// must be integer multiples of `h`.
    pub fn build_box(lo: Point, hi: Point, h: f64, collar_width: f64) -> Result<GridDomain> {
        if !(lo.iter().chain(hi.iter()).all(|c| c.is_finite()) && hi[0] > lo[0] && hi[1] > lo[1]) {
            return Err(Error::InvalidDomain("box corners must satisfy lo < hi".into()));
        }
        let shape = Shape::Box { lo, hi };
        let side = [hi[0] - lo[0], hi[1] - lo[1]];
        if !(h > 0.0 && h < side[0].min(side[1]) / 4.0) {
            return Err(Error::InvalidDomain(format!(
                "spacing {h} must lie in (0, shortest side/4)"
            )));
        }
        let counts = side.map(|l| (l / h).round());
        if (0..2).any(|d| (counts[d] * h - side[d]).abs() > 1e-9 * side[d]) {
            return Err(Error::InvalidDomain(format!(
                "box sides {side:?} are not multiples of h = {h}"
            )));
        }
        if !(collar_width >= shape.diameter() && collar_width.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "collar width {collar_width} must be at least the diameter {}",
                shape.diameter()
            )));
        }
        let (nx, ny) = (counts[0] as i64, counts[1] as i64);
        // Farthest collar node sits diagonally off a corner: sqrt(2)(k − 1/2)h ≤ W.
        let k = (collar_width / (std::f64::consts::SQRT_2 * h) + 0.5).floor() as i64;
        let mut nodes = Vec::new();
        let mut collar = Vec::new();
        for j in -k..ny + k {
            for i in -k..nx + k {
                let x = [lo[0] + (i as f64 + 0.5) * h, lo[1] + (j as f64 + 0.5) * h];
                if (0..nx).contains(&i) && (0..ny).contains(&j) {
                    nodes.push(x);
                } else {
                    collar.push(x);
                }
            }
        }
        let pad = k as f64 * h;
        let collar_box = CollarBox {
            lo: [lo[0] - pad, lo[1] - pad],
            hi: [hi[0] + pad, hi[1] + pad],
        };
        Ok(Self::assemble(shape, nodes, h, collar, collar_width, Some(collar_box)))
    }

    fn assemble(
        shape: Shape,
        nodes: Vec<Point>,
        spacing: f64,
        collar_nodes: Vec<Point>,
        collar_width: f64,
        collar_box: Option<CollarBox>,
    ) -> GridDomain {
        let interior_mask = nodes.iter().map(|x| shape.contains_strictly(x)).collect();
        let boundary_distance: Vec<f64> = nodes.iter().map(|x| shape.boundary_distance(x)).collect();
        let (inradius, argmax_node) = argmax_lexicographic(&nodes, &boundary_distance);
        GridDomain {
            diameter: shape.diameter(),
            shape,
            nodes,
            interior_mask,
            spacing,
            collar_nodes,
            collar_width,
            collar_box,
            boundary_distance,
            inradius,
            argmax_node,
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }
    pub fn dim(&self) -> usize {
        self.shape.dim()
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }
    pub fn interior_mask(&self) -> &[bool] {
        &self.interior_mask
    }
    pub fn is_interior(&self, i: usize) -> bool {
        self.interior_mask[i]
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    /// `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }
    pub fn collar_nodes(&self) -> &[Point] {
        &self.collar_nodes
    }
    pub fn collar_width(&self) -> f64 {
        self.collar_width
    }
    pub fn boundary_distance(&self) -> &[f64] {
        &self.boundary_distance
    }
    pub fn diameter(&self) -> f64 {
        self.diameter
    }
    pub fn inradius(&self) -> f64 {
        self.inradius
    }
    pub fn argmax_node(&self) -> usize {
        self.argmax_node
    }
    /// Discrete measure of Ω: number of nodes times `h^N`.
    pub fn measure(&self) -> f64 {
        self.len() as f64 * self.cell_volume()
    }

    /// Cheap structural identity used to reject mixing functions of
    /// different domains.
    pub fn same_grid(&self, other: &GridDomain) -> bool {
        std::ptr::eq(self, other)
            || (self.shape == other.shape
                && self.spacing == other.spacing
                && self.nodes == other.nodes)
    }

    /// `(R(Ω), argmax)` over the node set; ties go to the lexicographically
    /// smallest coordinate.
    pub fn inradius_and_argmax(&self) -> (f64, usize) {
        (self.inradius, self.argmax_node)
    }

    /// `∫_{Ωᶜ} |x_i − y|^{−(N+tp)} dy` for every node.
    ///
    /// 1D is evaluated in closed form. In 2D the collar cells are summed
    /// with the midpoint rule and the region beyond the collar box is
    /// integrated in polar coordinates around `x_i`: for each box side at
    /// distance `d`, `d^{−tp}/(tp) ∫ cos^{tp} φ dφ`. Boundary nodes get
    /// `+∞`.
    pub fn exterior_tail(&self, t: f64, p: f64) -> Result<Vec<TailWeight>> {
        let tp = t * p;
        if !(tp > 0.0 && tp.is_finite()) {
            return Err(Error::InvalidParameter(format!("t·p = {tp} must be positive")));
        }
        let values: Vec<f64> = match self.shape {
            Shape::Interval { a, b } => self
                .nodes
                .iter()
                .map(|x| {
                    let (l, r) = (x[0] - a, b - x[0]);
                    if l <= 0.0 || r <= 0.0 {
                        f64::INFINITY
                    } else {
                        (l.powf(-tp) + r.powf(-tp)) / tp
                    }
                })
                .collect(),
            Shape::Disk { .. } | Shape::Box { .. } => {
                let cb = self.collar_box.expect("2D domains carry a collar box");
                let gl = GaussLegendre::new(TAIL_GAUSS_POINTS);
                let hn = self.cell_volume();
                let expo = -(2.0 + tp) / 2.0;
                self.nodes
                    .par_iter()
                    .map(|x| {
                        let near: Vec<f64> = self
                            .collar_nodes
                            .iter()
                            .map(|y| {
                                let dx = x[0] - y[0];
                                let dy = x[1] - y[1];
                                (dx * dx + dy * dy).powf(expo) * hn
                            })
                            .collect();
                        crate::reduce::pairwise_sum(&near) + box_tail(x, &cb, tp, &gl)
                    })
                    .collect()
            }
        };
        Ok(values
            .into_iter()
            .enumerate()
            .map(|(node, value)| TailWeight { node, value })
            .collect())
    }
}

fn argmax_lexicographic(nodes: &[Point], dist: &[f64]) -> (f64, usize) {
    let mut best = 0;
    for i in 1..nodes.len() {
        let better = dist[i] > dist[best]
            || (dist[i] == dist[best]
                && (nodes[i][0], nodes[i][1]) < (nodes[best][0], nodes[best][1]));
        if better {
            best = i;
        }
    }
    (dist[best], best)
}

/// `∫_{ℝ² \ box} |x − y|^{−(2+tp)} dy` for `x` inside the box.
fn box_tail(x: &Point, cb: &CollarBox, tp: f64, gl: &GaussLegendre) -> f64 {
    // Each side seen from x: perpendicular distance and the two tangential
    // offsets of its endpoints.
    let sides = [
        (cb.hi[0] - x[0], cb.lo[1] - x[1], cb.hi[1] - x[1]),
        (x[0] - cb.lo[0], cb.lo[1] - x[1], cb.hi[1] - x[1]),
        (cb.hi[1] - x[1], cb.lo[0] - x[0], cb.hi[0] - x[0]),
        (x[1] - cb.lo[1], cb.lo[0] - x[0], cb.hi[0] - x[0]),
    ];
    let total: f64 = sides
        .iter()
        .map(|&(d, s0, s1)| {
            let (phi0, phi1) = ((s0 / d).atan(), (s1 / d).atan());
            d.powf(-tp) * gl.integrate(phi0, phi1, |phi| phi.cos().powf(tp))
        })
        .sum();
    total / tp
}
