//! Closed triangulated surfaces: construction, OFF input/output, the
//! refined-octahedron sphere and topology checks.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::vec3::{self, Point3};

/// Largest refinement level accepted by [`generate_sphere`].
pub const MAX_SPHERE_LEVEL: usize = 8;

/// Flat triangle surface mesh with per-triangle area and unit normal.
///
/// Normals follow the vertex winding order (right-hand rule).
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[usize; 3]>,
    areas: Vec<f64>,
    normals: Vec<Point3>,
}

impl TriangleMesh {
    /// Builds a mesh and checks that it is a closed, consistently oriented
    /// surface without degenerate triangles.
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = Self::from_parts(vertices, triangles)?;
        mesh.check_topology()?;
        Ok(mesh)
    }

    /// Builds a mesh checking only vertex indices and triangle areas.
    ///
    /// The result may be open or inconsistently oriented; use [`validate`]
    /// to inspect it.
    pub fn from_parts(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut areas = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(Error::InvalidVertexIndex { triangle: t, vertex: v, count: vertices.len() });
                }
            }
            let e1 = vec3::sub(&vertices[tri[1]], &vertices[tri[0]]);
            let e2 = vec3::sub(&vertices[tri[2]], &vertices[tri[0]]);
            let c = vec3::cross(&e1, &e2);
            let len = vec3::norm(&c);
            let scale = vec3::norm(&e1).max(vec3::norm(&e2));
            if !(len > 1e-14 * scale * scale) || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::DegenerateTriangle(t));
            }
            areas.push(0.5 * len);
            normals.push(vec3::scale(&c, 1.0 / len));
        }
        Ok(Self { vertices, triangles, areas, normals })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn normals(&self) -> &[Point3] {
        &self.normals
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn normal(&self, t: usize) -> Point3 {
        self.normals[t]
    }

    /// The three corner points of triangle `t`.
    pub fn corners(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn centroid(&self, t: usize) -> Point3 {
        let [a, b, c] = self.corners(t);
        vec3::scale(&vec3::add(&vec3::add(&a, &b), &c), 1.0 / 3.0)
    }

    /// Axis-aligned bounding box of triangle `t` as `(min, max)`.
    pub fn triangle_bounds(&self, t: usize) -> (Point3, Point3) {
        let corners = self.corners(t);
        let mut lo = corners[0];
        let mut hi = corners[0];
        for p in &corners[1..] {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Enclosed volume via the divergence theorem (positive for outward
    /// orientation).
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                let pa = &self.vertices[a];
                vec3::dot(pa, &vec3::cross(&self.vertices[b], &self.vertices[c])) / 6.0
            })
            .sum()
    }

    /// Area-weighted barycenter of the surface.
    pub fn barycenter(&self) -> Point3 {
        let mut acc = [0.0; 3];
        for t in 0..self.triangle_count() {
            acc = vec3::add(&acc, &vec3::scale(&self.centroid(t), self.areas[t]));
        }
        vec3::scale(&acc, 1.0 / self.total_area())
    }

    /// Same surface with every triangle's orientation reversed.
    pub fn flipped(&self) -> Self {
        let triangles = self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect();
        Self {
            vertices: self.vertices.clone(),
            triangles,
            areas: self.areas.clone(),
            normals: self.normals.iter().map(|n| vec3::scale(n, -1.0)).collect(),
        }
    }

    /// For every vertex, the list of `(triangle, local corner index)` pairs
    /// that touch it.
    pub fn vertex_triangles(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for (k, &v) in tri.iter().enumerate() {
                adj[v].push((t, k));
            }
        }
        adj
    }

    /// Directed-edge census: maps undirected edge `(min, max)` to the number
    /// of uses in each direction `(min -> max, max -> min)`.
    fn edge_census(&self) -> HashMap<(usize, usize), (usize, usize)> {
        let mut edges: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let entry = edges.entry((a.min(b), a.max(b))).or_default();
                if a < b {
                    entry.0 += 1;
                } else {
                    entry.1 += 1;
                }
            }
        }
        edges
    }

    fn check_topology(&self) -> Result<()> {
        let mut edges: Vec<_> = self.edge_census().into_iter().collect();
        edges.sort_unstable();
        for &((a, b), (fwd, bwd)) in &edges {
            if fwd + bwd != 2 {
                return Err(Error::OpenSurface(a, b));
            }
        }
        for &((a, b), (fwd, bwd)) in &edges {
            if fwd != 1 || bwd != 1 {
                return Err(Error::InconsistentOrientation(a, b));
            }
        }
        Ok(())
    }
}

/// Parses an ASCII OFF document with triangular faces.
///
/// Blank lines and `#` comments are skipped. The counts may follow the
/// `OFF` keyword on the same line.
pub fn load_off(text: &str) -> Result<TriangleMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty document".into() })?;
    let mut header_tokens = header.split_whitespace();
    if header_tokens.next() != Some("OFF") {
        return Err(Error::Parse { line, message: format!("expected header \"OFF\", found {header:?}") });
    }
    let rest: Vec<&str> = header_tokens.collect();
    let (count_line, counts) = if rest.is_empty() {
        let (l, c) = lines.next().ok_or(Error::Parse { line, message: "missing counts line".into() })?;
        (l, c.split_whitespace().collect::<Vec<_>>())
    } else {
        (line, rest)
    };
    if counts.len() < 2 {
        return Err(Error::Parse { line: count_line, message: "counts line needs vertex and face counts".into() });
    }
    let parse_usize = |tok: &str, line: usize| {
        tok.parse::<usize>()
            .map_err(|_| Error::Parse { line, message: format!("expected a nonnegative integer, found {tok:?}") })
    };
    let n_vertices = parse_usize(counts[0], count_line)?;
    let n_faces = parse_usize(counts[1], count_line)?;

    let mut vertices = Vec::with_capacity(n_vertices);
    for _ in 0..n_vertices {
        let (line, l) = lines.next().ok_or(Error::Parse {
            line: count_line,
            message: format!("expected {n_vertices} vertices, document ended early"),
        })?;
        let coords: Vec<f64> = l
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("invalid coordinate {tok:?}") })
            })
            .collect::<Result<_>>()?;
        if coords.len() < 3 || coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Parse { line, message: "vertex needs three finite coordinates".into() });
        }
        vertices.push([coords[0], coords[1], coords[2]]);
    }

    let mut triangles = Vec::with_capacity(n_faces);
    for _ in 0..n_faces {
        let (line, l) = lines.next().ok_or(Error::Parse {
            line: count_line,
            message: format!("expected {n_faces} faces, document ended early"),
        })?;
        let tokens: Vec<&str> = l.split_whitespace().collect();
        let count = parse_usize(tokens[0], line)?;
        if count != 3 {
            return Err(Error::NonTriangularFace { line, count });
        }
        if tokens.len() < 4 {
            return Err(Error::Parse { line, message: "face lists fewer than 3 vertex indices".into() });
        }
        let mut tri = [0usize; 3];
        for k in 0..3 {
            tri[k] = parse_usize(tokens[k + 1], line)?;
            if tri[k] >= n_vertices {
                return Err(Error::Parse { line, message: format!("vertex index {} out of range", tri[k]) });
            }
        }
        triangles.push(tri);
    }
    TriangleMesh::new(vertices, triangles)
}

/// Serializes a mesh as ASCII OFF. Output is deterministic.
pub fn write_off(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    out.push_str("OFF\n");
    let _ = writeln!(out, "{} {} 0", mesh.vertex_count(), mesh.triangle_count());
    for p in mesh.vertices() {
        let _ = writeln!(out, "{:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    out
}

/// Unit sphere from `level` rounds of 4-way refinement of the regular
/// octahedron; `8 * 4^level` triangles, all vertices on the sphere.
pub fn generate_sphere(level: usize) -> Result<TriangleMesh> {
    if level > MAX_SPHERE_LEVEL {
        return Err(Error::InvalidArgument(format!("sphere level {level} exceeds the limit of {MAX_SPHERE_LEVEL}")));
    }
    let mut vertices: Vec<Point3> =
        vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];
    let mut triangles = Vec::with_capacity(8);
    for sx in 0..2 {
        for sy in 0..2 {
            for sz in 0..2 {
                let (x, y, z) = (sx, 2 + sy, 4 + sz);
                // one negative axis flips the winding
                if (sx + sy + sz) % 2 == 0 {
                    triangles.push([x, y, z]);
                } else {
                    triangles.push([x, z, y]);
                }
            }
        }
    }

    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut refined = Vec::with_capacity(4 * triangles.len());
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point3>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = vec3::scale(&vec3::add(&vertices[a], &vertices[b]), 0.5);
                vertices.push(vec3::scale(&m, 1.0 / vec3::norm(&m)));
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            refined.push([a, ab, ca]);
            refined.push([ab, b, bc]);
            refined.push([ca, bc, c]);
            refined.push([ab, bc, ca]);
        }
        triangles = refined;
    }
    TriangleMesh::new(vertices, triangles)
}

/// Findings of [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub triangle_count: usize,
    pub vertex_count: usize,
    /// Undirected edges not shared by exactly two triangles.
    pub open_edges: usize,
    /// Shared edges traversed twice in the same direction.
    pub inconsistent_edges: usize,
    pub min_area: f64,
    pub max_area: f64,
    /// Faces with `n . (centroid - barycenter) > 0`.
    pub outward_faces: usize,
    pub inward_faces: usize,
    /// Largest `| |n| - 1 |` over all faces.
    pub max_normal_defect: f64,
}

impl ValidationReport {
    pub fn closed(&self) -> bool {
        self.open_edges == 0
    }

    pub fn consistently_oriented(&self) -> bool {
        self.inconsistent_edges == 0
    }

    /// Outwardness only makes sense for star-shaped surfaces, so it is not
    /// part of this check.
    pub fn is_valid(&self) -> bool {
        self.closed() && self.consistently_oriented() && self.min_area > 0.0 && self.max_normal_defect <= 1e-12
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "triangles:            {}", self.triangle_count)?;
        writeln!(f, "vertices:             {}", self.vertex_count)?;
        writeln!(f, "closed:               {} ({} open edges)", self.closed(), self.open_edges)?;
        writeln!(
            f,
            "consistent winding:   {} ({} inconsistent edges)",
            self.consistently_oriented(),
            self.inconsistent_edges
        )?;
        writeln!(f, "area range:           [{:e}, {:e}]", self.min_area, self.max_area)?;
        writeln!(f, "outward/inward faces: {}/{}", self.outward_faces, self.inward_faces)?;
        write!(f, "max normal defect:    {:e}", self.max_normal_defect)
    }
}

pub fn validate(mesh: &TriangleMesh) -> ValidationReport {
    let mut open_edges = 0;
    let mut inconsistent_edges = 0;
    for &(fwd, bwd) in mesh.edge_census().values() {
        if fwd + bwd != 2 {
            open_edges += 1;
        } else if fwd != 1 {
            inconsistent_edges += 1;
        }
    }
    let barycenter = mesh.barycenter();
    let mut outward_faces = 0;
    let mut inward_faces = 0;
    let mut max_normal_defect: f64 = 0.0;
    for t in 0..mesh.triangle_count() {
        let n = mesh.normal(t);
        max_normal_defect = max_normal_defect.max((vec3::norm(&n) - 1.0).abs());
        let s = vec3::dot(&n, &vec3::sub(&mesh.centroid(t), &barycenter));
        if s > 0.0 {
            outward_faces += 1;
        } else {
            inward_faces += 1;
        }
    }
    ValidationReport {
        triangle_count: mesh.triangle_count(),
        vertex_count: mesh.vertex_count(),
        open_edges,
        inconsistent_edges,
        min_area: mesh.areas().iter().copied().fold(f64::INFINITY, f64::min),
        max_area: mesh.areas().iter().copied().fold(0.0, f64::max),
        outward_faces,
        inward_faces,
        max_normal_defect,
    }
}
