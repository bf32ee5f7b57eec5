//! Embedded undirected graphs for the discrete model.
//!
//! All builders produce lattices in which every cell carries exactly one
//! diagonal, alternating with the parity of the cell index. Vertex ids are
//! row-major from 0 and every edge is stored once with `i < j`.
//!
//! Coordinates follow the convention of the leaf figures: the `x` axis runs
//! from the tip of the leaf (small `x`) to its base, so renderers draw it
//! downwards and the "vertical" mirror line of a diamond is `y = const`.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x_min, x_max] x [y_min, y_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let b = Self {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn unit() -> Self {
        Self {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        }
    }

    /// The domain used for the leaf experiments, `(-0.5, 2) x (-1.5, 0.5)`.
    pub fn leaf() -> Self {
        Self {
            x_min: -0.5,
            x_max: 2.0,
            y_min: -1.5,
            y_max: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::InvalidGeometry(format!(
                "degenerate bounding box {:?}",
                self
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub length: f64,
}

/// JSON export layout: `{"vertices": [{id, x, y}], "edges": [{i, j, length}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    // (neighbor, edge index), sorted by neighbor id
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    /// Builds a graph from vertex positions and an edge list. Edges are
    /// canonicalized to `i < j` and sorted; lengths are Euclidean distances.
    pub fn new(positions: &[(f64, f64)], pairs: &[(usize, usize)]) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::InvalidGeometry("graph has no vertices".into()));
        }
        if positions.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite vertex position".into()));
        }
        let mut canonical = BTreeMap::new();
        for &(a, b) in pairs {
            if a >= n || b >= n {
                return Err(Error::InvalidGeometry(format!(
                    "edge ({a}, {b}) references a missing vertex"
                )));
            }
            if a == b {
                return Err(Error::InvalidGeometry(format!("self-loop at vertex {a}")));
            }
            let key = (a.min(b), a.max(b));
            if canonical.insert(key, ()).is_some() {
                return Err(Error::InvalidGeometry(format!(
                    "duplicate edge ({}, {})",
                    key.0, key.1
                )));
            }
        }
        let vertices: Vec<Vertex> = positions
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| Vertex { id, x, y })
            .collect();
        let mut edges = Vec::with_capacity(canonical.len());
        for &(i, j) in canonical.keys() {
            let length = (vertices[i].x - vertices[j].x).hypot(vertices[i].y - vertices[j].y);
            if length <= 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "edge ({i}, {j}) has zero length"
                )));
            }
            edges.push(Edge { i, j, length });
        }
        let mut adjacency = vec![Vec::new(); n];
        for (k, e) in edges.iter().enumerate() {
            adjacency[e.i].push((e.j, k));
            adjacency[e.j].push((e.i, k));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let g = Self {
            vertices,
            edges,
            adjacency,
        };
        if !g.is_connected() {
            return Err(Error::InvalidGeometry("graph is not connected".into()));
        }
        Ok(g)
    }

    pub fn from_document(doc: &GraphDocument) -> Result<Self> {
        let mut verts = doc.vertices.clone();
        verts.sort_by_key(|v| v.id);
        if verts.iter().enumerate().any(|(k, v)| v.id != k) {
            return Err(Error::InvalidGeometry(
                "vertex ids must be 0..n without gaps".into(),
            ));
        }
        let positions: Vec<(f64, f64)> = verts.iter().map(|v| (v.x, v.y)).collect();
        let pairs: Vec<(usize, usize)> = doc.edges.iter().map(|e| (e.i, e.j)).collect();
        Self::new(&positions, &pairs)
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            vertices: self.vertices.clone(),
            edges: self.edges.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn position(&self, v: usize) -> (f64, f64) {
        (self.vertices[v].x, self.vertices[v].y)
    }

    /// `(neighbor, edge index)` pairs of vertex `v`, sorted by neighbor.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency
            .get(a)?
            .binary_search_by_key(&b, |&(nb, _)| nb)
            .ok()
            .map(|k| self.adjacency[a][k].1)
    }

    pub fn is_connected(&self) -> bool {
        self.components_where(|_| true).len() == 1
    }

    /// Connected components using only edges accepted by `keep`. Each
    /// component is listed in increasing vertex order; components are ordered
    /// by their smallest vertex.
    pub fn components_where(&self, keep: impl Fn(usize) -> bool) -> Vec<Vec<usize>> {
        let n = self.num_vertices();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &(nb, e) in &self.adjacency[v] {
                    if !seen[nb] && keep(e) {
                        seen[nb] = true;
                        comp.push(nb);
                        queue.push_back(nb);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn bounding_box(&self) -> BBox {
        let mut b = BBox {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for v in &self.vertices {
            b.x_min = b.x_min.min(v.x);
            b.x_max = b.x_max.max(v.x);
            b.y_min = b.y_min.min(v.y);
            b.y_max = b.y_max.max(v.y);
        }
        b
    }

    /// The mirror line through the middle of the graph's `y` extent, which is
    /// the long axis of a diamond (drawn vertically).
    pub fn midline(&self) -> MirrorLine {
        MirrorLine::ConstY(self.bounding_box().center().1)
    }

    /// Vertex and edge permutations induced by reflecting the embedding about
    /// `line`. Fails when the reflected graph does not coincide with the
    /// original.
    pub fn mirror_permutation(&self, line: MirrorLine) -> Result<(Vec<usize>, Vec<usize>)> {
        let b = self.bounding_box();
        let tol = 1e-9 * (1.0 + b.width().max(b.height()));
        let n = self.num_vertices();
        let mut vperm = vec![usize::MAX; n];
        for v in &self.vertices {
            let (rx, ry) = line.reflect(v.x, v.y);
            let hit = self
                .vertices
                .iter()
                .find(|w| (w.x - rx).abs() <= tol && (w.y - ry).abs() <= tol)
                .ok_or_else(|| {
                    Error::NotApplicable(format!(
                        "graph is not mirror symmetric: vertex {} has no image",
                        v.id
                    ))
                })?;
            vperm[v.id] = hit.id;
        }
        let mut eperm = Vec::with_capacity(self.num_edges());
        for e in &self.edges {
            let k = self.edge_index(vperm[e.i], vperm[e.j]).ok_or_else(|| {
                Error::NotApplicable(format!(
                    "graph is not mirror symmetric: edge ({}, {}) has no image",
                    e.i, e.j
                ))
            })?;
            eperm.push(k);
        }
        Ok((vperm, eperm))
    }

    /// Vertices on the rim of the lattice: those whose angular fan of
    /// neighbors does not close into a ring of triangles.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices())
            .filter(|&v| !self.fan_is_closed(v))
            .collect()
    }

    fn fan_is_closed(&self, v: usize) -> bool {
        let (vx, vy) = self.position(v);
        let mut around: Vec<(f64, usize)> = self.adjacency[v]
            .iter()
            .map(|&(nb, _)| {
                let (x, y) = self.position(nb);
                ((y - vy).atan2(x - vx), nb)
            })
            .collect();
        if around.len() < 3 {
            return false;
        }
        around.sort_by(|a, b| a.0.total_cmp(&b.0));
        let m = around.len();
        for k in 0..m {
            let (a0, p) = around[k];
            let (a1, q) = around[(k + 1) % m];
            let mut gap = a1 - a0;
            if k + 1 == m {
                gap += std::f64::consts::TAU;
            }
            if gap >= std::f64::consts::PI - 1e-12 || self.edge_index(p, q).is_none() {
                return false;
            }
        }
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MirrorLine {
    /// Reflection `y -> 2c - y`.
    ConstY(f64),
    /// Reflection `x -> 2c - x`.
    ConstX(f64),
}

impl MirrorLine {
    pub fn reflect(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            MirrorLine::ConstY(c) => (x, 2.0 * c - y),
            MirrorLine::ConstX(c) => (2.0 * c - x, y),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Diamond,
    Rectangle,
    Round,
    Oval,
}

fn lattice_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let id = |r: usize, c: usize| r * cols + c;
    let mut pairs = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1) + (rows - 1) * (cols - 1));
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                pairs.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                pairs.push((id(r, c), id(r + 1, c)));
            }
            if r + 1 < rows && c + 1 < cols {
                // one diagonal per cell, orientation alternates like a checkerboard
                if (r + c) % 2 == 0 {
                    pairs.push((id(r, c), id(r + 1, c + 1)));
                } else {
                    pairs.push((id(r + 1, c), id(r, c + 1)));
                }
            }
        }
    }
    pairs
}

/// Rotated square lattice of `rows x cols` vertices forming the rhombus
/// inscribed in `bbox`: vertex `(0, 0)` sits at the tip `(x_min, y_mid)` and
/// `(rows-1, cols-1)` at the base `(x_max, y_mid)`.
pub fn build_diamond(rows: usize, cols: usize, bbox: BBox) -> Result<Graph> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidGeometry(format!(
            "diamond lattice needs at least 2x2 vertices, got {rows}x{cols}"
        )));
    }
    bbox.validate()?;
    let (_, yc) = bbox.center();
    let hx = 0.5 * bbox.width();
    let hy = 0.5 * bbox.height();
    let mut positions = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let u = r as f64 / (rows - 1) as f64;
            let v = c as f64 / (cols - 1) as f64;
            positions.push((bbox.x_min + (u + v) * hx, yc + (v - u) * hy));
        }
    }
    Graph::new(&positions, &lattice_edges(rows, cols))
}

/// Axis-aligned `resolution x resolution` lattice over `bbox`, clipped to the
/// region of `shape` (the inscribed circle for `Round`, the inscribed
/// ellipse for `Oval`). Only the largest connected piece is kept.
///
/// Odd resolutions keep the lattice mirror symmetric about both midlines.
pub fn build_shape(shape: Shape, resolution: usize, bbox: BBox) -> Result<Graph> {
    if resolution < 2 {
        return Err(Error::InvalidGeometry(format!(
            "resolution must be at least 2, got {resolution}"
        )));
    }
    bbox.validate()?;
    if shape == Shape::Diamond {
        return build_diamond(resolution, resolution, bbox);
    }
    let n = resolution;
    let (xc, yc) = bbox.center();
    let (ax, ay) = (0.5 * bbox.width(), 0.5 * bbox.height());
    let radius = ax.min(ay);
    let inside = |x: f64, y: f64| -> bool {
        let slack = 1e-12;
        match shape {
            Shape::Rectangle | Shape::Diamond => true,
            Shape::Round => ((x - xc) / radius).powi(2) + ((y - yc) / radius).powi(2) <= 1.0 + slack,
            Shape::Oval => ((x - xc) / ax).powi(2) + ((y - yc) / ay).powi(2) <= 1.0 + slack,
        }
    };
    let mut positions = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let x = bbox.x_min + bbox.width() * r as f64 / (n - 1) as f64;
            let y = bbox.y_min + bbox.height() * c as f64 / (n - 1) as f64;
            positions.push((x, y));
        }
    }
    let keep: Vec<bool> = positions.iter().map(|&(x, y)| inside(x, y)).collect();
    let pairs: Vec<(usize, usize)> = lattice_edges(n, n)
        .into_iter()
        .filter(|&(a, b)| keep[a] && keep[b])
        .collect();

    // largest connected piece of the clipped lattice; ties go to the piece
    // containing the smallest id
    let mut adj = vec![Vec::new(); n * n];
    for &(a, b) in &pairs {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut label = vec![usize::MAX; n * n];
    let mut best: Vec<usize> = Vec::new();
    for s in 0..n * n {
        if !keep[s] || label[s] != usize::MAX {
            continue;
        }
        label[s] = s;
        let mut comp = vec![s];
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if label[w] == usize::MAX {
                    label[w] = s;
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    if best.len() < 2 {
        return Err(Error::InvalidGeometry(format!(
            "clipping {shape:?} lattice at resolution {n} leaves fewer than 2 vertices"
        )));
    }
    best.sort_unstable();
    let mut new_id = vec![usize::MAX; n * n];
    for (k, &old) in best.iter().enumerate() {
        new_id[old] = k;
    }
    let kept_positions: Vec<(f64, f64)> = best.iter().map(|&old| positions[old]).collect();
    let kept_pairs: Vec<(usize, usize)> = pairs
        .iter()
        .filter(|&&(a, b)| new_id[a] != usize::MAX && new_id[b] != usize::MAX)
        .map(|&(a, b)| (new_id[a], new_id[b]))
        .collect();
    Graph::new(&kept_positions, &kept_pairs)
}

/// Builds the grid named by `shape`; `rows x cols` for diamonds, `rows` as
/// resolution otherwise.
pub fn build(shape: Shape, rows: usize, cols: usize, bbox: BBox) -> Result<Graph> {
    match shape {
        Shape::Diamond => build_diamond(rows, cols, bbox),
        other => build_shape(other, rows, bbox),
    }
}
