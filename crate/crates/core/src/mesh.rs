//! Interface-fitted triangulations of a disk, node deformation and the
//! quality guards used during optimization.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::geometry::{orient2d, ParametricCurve, Polyline, Vec2};

/// Which side of the interface a triangle belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// The inclusion ω.
    Inside,
    /// Ω minus the closure of ω.
    Outside,
}

impl Region {
    pub fn tag(self) -> u8 {
        match self {
            Region::Inside => 1,
            Region::Outside => 0,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Region> {
        match tag {
            1 => Some(Region::Inside),
            0 => Some(Region::Outside),
            _ => None,
        }
    }
}

/// Interface-fitted triangular mesh.
///
/// Boundary edges are stored counterclockwise around Ω. Interface edges are
/// oriented so that ω lies on their left, which makes `(dy, -dx)` the normal
/// pointing out of ω. For every interface edge the adjacent inside and
/// outside triangles are cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    regions: Vec<Region>,
    boundary_edges: Vec<[usize; 2]>,
    interface_edges: Vec<[usize; 2]>,
    interface_sides: Vec<[usize; 2]>,
    on_boundary: Vec<bool>,
}

impl Mesh {
    /// Builds a mesh and checks every structural invariant. Edge orientations
    /// are normalized; all other data is taken as given.
    pub fn new(
        nodes: Vec<Vec2>,
        triangles: Vec<[usize; 3]>,
        regions: Vec<Region>,
        boundary_edges: Vec<[usize; 2]>,
        interface_edges: Vec<[usize; 2]>,
    ) -> Result<Mesh> {
        let n = nodes.len();
        if triangles.len() != regions.len() {
            return Err(Error::Topology("one region tag per triangle is required".into()));
        }
        if triangles.is_empty() {
            return Err(Error::Topology("mesh has no triangles".into()));
        }
        if nodes.iter().any(|p| !p.is_finite()) {
            return Err(Error::Topology("non-finite node coordinates".into()));
        }
        for t in &triangles {
            if t.iter().any(|&i| i >= n) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Topology(format!("bad triangle {t:?}")));
            }
        }
        let min_area = triangles
            .iter()
            .map(|t| 0.5 * orient2d(nodes[t[0]], nodes[t[1]], nodes[t[2]]))
            .fold(f64::INFINITY, f64::min);
        if !(min_area > 0.0) {
            return Err(Error::InvertedMesh { min_area });
        }

        let mut edge_tris: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (k, t) in triangles.iter().enumerate() {
            for j in 0..3 {
                let (a, b) = (t[j], t[(j + 1) % 3]);
                edge_tris.entry((a.min(b), a.max(b))).or_default().push(k);
            }
        }
        if edge_tris.values().any(|v| v.len() > 2) {
            return Err(Error::Topology("an edge is shared by more than two triangles".into()));
        }
        let hull_edges = edge_tris.values().filter(|v| v.len() == 1).count();

        // Orient an edge so that triangle `k` lies on its left.
        let left_oriented = |e: [usize; 2], k: usize| -> [usize; 2] {
            let t = triangles[k];
            let third = t.iter().copied().find(|&v| v != e[0] && v != e[1]).unwrap();
            if orient2d(nodes[e[0]], nodes[e[1]], nodes[third]) > 0.0 {
                e
            } else {
                [e[1], e[0]]
            }
        };

        let mut on_boundary = vec![false; n];
        let mut oriented_boundary = Vec::with_capacity(boundary_edges.len());
        for &e in &boundary_edges {
            let key = (e[0].min(e[1]), e[0].max(e[1]));
            match edge_tris.get(&key).map(|v| v.as_slice()) {
                Some([k]) => {
                    oriented_boundary.push(left_oriented(e, *k));
                    on_boundary[e[0]] = true;
                    on_boundary[e[1]] = true;
                }
                _ => return Err(Error::Topology(format!("boundary edge {e:?} is not on the mesh hull"))),
            }
        }
        if oriented_boundary.len() != hull_edges {
            return Err(Error::Topology(format!(
                "boundary lists {} edges but the mesh hull has {hull_edges}",
                oriented_boundary.len()
            )));
        }
        check_closed_loops(&oriented_boundary, "boundary")?;
        if loops_count(&oriented_boundary) != 1 {
            return Err(Error::Topology("boundary must be a single closed polyline".into()));
        }

        let mut oriented_interface = Vec::with_capacity(interface_edges.len());
        let mut sides = Vec::with_capacity(interface_edges.len());
        for &e in &interface_edges {
            let key = (e[0].min(e[1]), e[0].max(e[1]));
            let adj = edge_tris.get(&key).map(|v| v.as_slice());
            let (inside, outside) = match adj {
                Some([a, b]) => match (regions[*a], regions[*b]) {
                    (Region::Inside, Region::Outside) => (*a, *b),
                    (Region::Outside, Region::Inside) => (*b, *a),
                    _ => {
                        return Err(Error::Topology(format!(
                            "interface edge {e:?} does not separate the two regions"
                        )))
                    }
                },
                _ => return Err(Error::Topology(format!("interface edge {e:?} is not interior"))),
            };
            if on_boundary[e[0]] || on_boundary[e[1]] {
                return Err(Error::Topology(format!("interface edge {e:?} touches the outer boundary")));
            }
            oriented_interface.push(left_oriented(e, inside));
            sides.push([inside, outside]);
        }
        check_closed_loops(&oriented_interface, "interface")?;
        // Every edge separating the regions must be listed as interface.
        let separating = edge_tris
            .values()
            .filter(|v| v.len() == 2 && regions[v[0]] != regions[v[1]])
            .count();
        if separating != oriented_interface.len() {
            return Err(Error::Topology(format!(
                "{separating} edges separate the regions but {} interface edges were given",
                oriented_interface.len()
            )));
        }

        Ok(Mesh {
            nodes,
            triangles,
            regions,
            boundary_edges: oriented_boundary,
            interface_edges: oriented_interface,
            interface_sides: sides,
            on_boundary,
        })
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn interface_edges(&self) -> &[[usize; 2]] {
        &self.interface_edges
    }

    /// `[inside, outside]` triangle indices adjacent to each interface edge.
    pub fn interface_sides(&self) -> &[[usize; 2]] {
        &self.interface_sides
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        self.on_boundary[i]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_vertices(&self, k: usize) -> [Vec2; 3] {
        let t = self.triangles[k];
        [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]]
    }

    pub fn signed_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(k);
        0.5 * orient2d(a, b, c)
    }

    /// Smallest signed triangle area; positive iff no triangle is inverted.
    pub fn min_signed_area(&self) -> f64 {
        min_signed_area(self)
    }

    /// Smallest interior angle over all triangles, in degrees, with the
    /// triangle where it occurs.
    pub fn min_angle(&self) -> (f64, usize) {
        let mut best = (180.0, 0);
        for k in 0..self.triangles.len() {
            let v = self.triangle_vertices(k);
            for j in 0..3 {
                let (a, b) = (v[(j + 1) % 3] - v[j], v[(j + 2) % 3] - v[j]);
                let deg = a.cross(b).atan2(a.dot(b)).abs().to_degrees();
                if deg < best.0 {
                    best = (deg, k);
                }
            }
        }
        best
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.triangles.len())
            .filter(|&k| self.regions[k] == region)
            .map(|k| self.signed_area(k))
            .sum()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|k| self.signed_area(k)).sum()
    }

    /// Longest edge over all triangles.
    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |j| (t[j], t[(j + 1) % 3])))
            .map(|(a, b)| self.nodes[a].dist(self.nodes[b]))
            .fold(0.0, f64::max)
    }

    /// Boundary node indices in counterclockwise order, starting at the node
    /// with the smallest nonnegative polar angle.
    pub fn boundary_loop(&self) -> Vec<usize> {
        let loops = edge_loops(&self.boundary_edges);
        let mut lp = loops.into_iter().next().unwrap_or_default();
        let angle = |i: usize| {
            let p = self.nodes[i];
            p.y.atan2(p.x).rem_euclid(2.0 * PI)
        };
        if let Some(start) = (0..lp.len()).min_by(|&a, &b| angle(lp[a]).total_cmp(&angle(lp[b]))) {
            lp.rotate_left(start);
        }
        lp
    }

    /// Interface node loops, each ordered with ω on the left.
    pub fn interface_loops(&self) -> Vec<Vec<usize>> {
        edge_loops(&self.interface_edges)
    }

    /// The interface as polylines, one per loop.
    pub fn interface_polylines(&self) -> Result<Vec<Polyline>> {
        self.interface_loops()
            .into_iter()
            .map(|lp| Polyline::new(lp.into_iter().map(|i| self.nodes[i]).collect()))
            .collect()
    }

    /// The single interface polyline; errors when there is not exactly one loop.
    pub fn interface_polyline(&self) -> Result<Polyline> {
        let mut loops = self.interface_polylines()?;
        if loops.len() != 1 {
            return Err(Error::Topology(format!("expected one interface loop, found {}", loops.len())));
        }
        Ok(loops.remove(0))
    }

    /// Moves every node by `t * v[i]`. Connectivity and tags are unchanged.
    pub fn deform(&self, v: &[Vec2], t: f64) -> Result<Mesh> {
        deform(self, v, t)
    }

    /// Index of a triangle containing `p` (closed triangles, small tolerance).
    pub fn locate(&self, p: Vec2) -> Option<usize> {
        let tol = 1e-12;
        (0..self.triangles.len()).find(|&k| {
            let [a, b, c] = self.triangle_vertices(k);
            let area = orient2d(a, b, c);
            let scale = tol * area.abs();
            orient2d(a, b, p) >= -scale && orient2d(b, c, p) >= -scale && orient2d(c, a, p) >= -scale
        })
    }

    /// Serializes in the plain-text node/element format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "nodes {} triangles {}", self.nodes.len(), self.triangles.len()).unwrap();
        for p in &self.nodes {
            writeln!(s, "{:.17e} {:.17e}", p.x, p.y).unwrap();
        }
        for (t, r) in self.triangles.iter().zip(&self.regions) {
            writeln!(s, "{} {} {} {}", t[0], t[1], t[2], r.tag()).unwrap();
        }
        writeln!(s, "boundary {}", self.boundary_edges.len()).unwrap();
        for e in &self.boundary_edges {
            writeln!(s, "{} {}", e[0], e[1]).unwrap();
        }
        writeln!(s, "interface {}", self.interface_edges.len()).unwrap();
        for e in &self.interface_edges {
            writeln!(s, "{} {}", e[0], e[1]).unwrap();
        }
        s
    }

    /// Parses the plain-text node/element format written by [`Mesh::to_text`].
    /// The counts after `boundary` and `interface` are optional.
    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .peekable();
        let perr = |line: usize, message: &str| Error::Parse { line, message: message.to_string() };

        let (ln, header) = lines.next().ok_or_else(|| perr(0, "empty mesh file"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "nodes" || h[2] != "triangles" {
            return Err(perr(ln, "expected header \"nodes N triangles M\""));
        }
        let nn: usize = h[1].parse().map_err(|_| perr(ln, "bad node count"))?;
        let nt: usize = h[3].parse().map_err(|_| perr(ln, "bad triangle count"))?;

        let mut nodes = Vec::with_capacity(nn);
        for _ in 0..nn {
            let (ln, l) = lines.next().ok_or_else(|| perr(ln, "unexpected end of node section"))?;
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| perr(ln, "bad node coordinates"))?;
            if v.len() != 2 {
                return Err(perr(ln, "node line needs two coordinates"));
            }
            nodes.push(Vec2::new(v[0], v[1]));
        }
        let mut triangles = Vec::with_capacity(nt);
        let mut regions = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = lines.next().ok_or_else(|| perr(ln, "unexpected end of triangle section"))?;
            let v: Vec<usize> = l
                .split_whitespace()
                .map(|x| x.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| perr(ln, "bad triangle line"))?;
            if v.len() != 4 {
                return Err(perr(ln, "triangle line needs \"i j k region\""));
            }
            let region = u8::try_from(v[3]).ok().and_then(Region::from_tag).ok_or_else(|| perr(ln, "region must be 0 or 1"))?;
            triangles.push([v[0], v[1], v[2]]);
            regions.push(region);
        }
        let mut boundary = Vec::new();
        let mut interface = Vec::new();
        let mut current: Option<&mut Vec<[usize; 2]>> = None;
        for (ln, l) in lines {
            let word = l.split_whitespace().next().unwrap_or("");
            match word {
                "boundary" => current = Some(&mut boundary),
                "interface" => current = Some(&mut interface),
                _ => {
                    let v: Vec<usize> = l
                        .split_whitespace()
                        .map(|x| x.parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| perr(ln, "bad edge line"))?;
                    if v.len() != 2 {
                        return Err(perr(ln, "edge line needs two indices"));
                    }
                    match current.as_deref_mut() {
                        Some(list) => list.push([v[0], v[1]]),
                        None => return Err(perr(ln, "edge listed before a section header")),
                    }
                }
            }
        }
        Mesh::new(nodes, triangles, regions, boundary, interface)
    }
}

fn check_closed_loops(edges: &[[usize; 2]], what: &str) -> Result<()> {
    let mut out_deg: HashMap<usize, usize> = HashMap::new();
    let mut in_deg: HashMap<usize, usize> = HashMap::new();
    for e in edges {
        *out_deg.entry(e[0]).or_default() += 1;
        *in_deg.entry(e[1]).or_default() += 1;
    }
    for (node, d) in &out_deg {
        if *d != 1 || in_deg.get(node) != Some(&1) {
            return Err(Error::Topology(format!("{what} edges do not form closed simple loops at node {node}")));
        }
    }
    if in_deg.len() != out_deg.len() {
        return Err(Error::Topology(format!("{what} polyline is open")));
    }
    Ok(())
}

fn loops_count(edges: &[[usize; 2]]) -> usize {
    edge_loops(edges).len()
}

/// Splits consistently oriented edges into node loops.
fn edge_loops(edges: &[[usize; 2]]) -> Vec<Vec<usize>> {
    let next: HashMap<usize, usize> = edges.iter().map(|e| (e[0], e[1])).collect();
    let mut starts: Vec<usize> = edges.iter().map(|e| e[0]).collect();
    starts.sort_unstable();
    let mut seen = std::collections::HashSet::new();
    let mut loops = Vec::new();
    for s in starts {
        if seen.contains(&s) {
            continue;
        }
        let mut lp = vec![s];
        seen.insert(s);
        let mut cur = s;
        while let Some(&nx) = next.get(&cur) {
            if nx == s || !seen.insert(nx) {
                break;
            }
            lp.push(nx);
            cur = nx;
        }
        loops.push(lp);
    }
    loops
}

/// Smallest signed triangle area of `mesh`.
pub fn min_signed_area(mesh: &Mesh) -> f64 {
    (0..mesh.triangles.len()).map(|k| mesh.signed_area(k)).fold(f64::INFINITY, f64::min)
}

/// `x ↦ x + t·v(x)` on every node. `v` must vanish on the outer boundary.
pub fn deform(mesh: &Mesh, v: &[Vec2], t: f64) -> Result<Mesh> {
    if v.len() != mesh.nodes.len() {
        return Err(Error::Invalid(format!(
            "deformation has {} vectors for {} nodes",
            v.len(),
            mesh.nodes.len()
        )));
    }
    if let Some(i) = (0..v.len()).find(|&i| mesh.on_boundary[i] && v[i] != Vec2::ZERO) {
        return Err(Error::Invalid(format!("deformation is nonzero at boundary node {i}")));
    }
    let nodes: Vec<Vec2> = mesh.nodes.iter().zip(v).map(|(&p, &w)| p + w * t).collect();
    let out = Mesh { nodes, ..mesh.clone() };
    let min_area = out.min_signed_area();
    if !(min_area > 0.0) {
        return Err(Error::InvertedMesh { min_area });
    }
    Ok(out)
}

/// Per-interface-node outward unit normals and lumped edge lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceNormals {
    /// Interface node indices (loop order, ω on the left).
    pub nodes: Vec<usize>,
    /// Unit normal pointing from ω into Ω∖ω̄.
    pub normals: Vec<Vec2>,
    /// Half the summed length of the two adjacent interface edges.
    pub lumped_length: Vec<f64>,
    /// Position in `nodes` of each mesh node, if it is an interface node.
    index_of: HashMap<usize, usize>,
}

impl InterfaceNormals {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Position of mesh node `node` in the interface ordering.
    pub fn position(&self, node: usize) -> Option<usize> {
        self.index_of.get(&node).copied()
    }
}

/// Averages the two adjacent edge normals at each interface node.
pub fn interface_normals(mesh: &Mesh) -> Result<InterfaceNormals> {
    if mesh.interface_edges.is_empty() {
        return Err(Error::Topology("mesh has no interface".into()));
    }
    check_closed_loops(&mesh.interface_edges, "interface")?;
    let mut nodes = Vec::new();
    let mut normals = Vec::new();
    let mut lumped = Vec::new();
    for lp in mesh.interface_loops() {
        let m = lp.len();
        if m < 3 {
            return Err(Error::Topology("interface loop has fewer than three nodes".into()));
        }
        for k in 0..m {
            let prev = mesh.nodes[lp[(k + m - 1) % m]];
            let cur = mesh.nodes[lp[k]];
            let next = mesh.nodes[lp[(k + 1) % m]];
            let e1 = cur - prev;
            let e2 = next - cur;
            let n1 = Vec2::new(e1.y, -e1.x).normalized();
            let n2 = Vec2::new(e2.y, -e2.x).normalized();
            nodes.push(lp[k]);
            normals.push((n1 + n2).normalized());
            lumped.push(0.5 * (e1.norm() + e2.norm()));
        }
    }
    let index_of = nodes.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    Ok(InterfaceNormals { nodes, normals, lumped_length: lumped, index_of })
}

/// Fraction of `h` within which lattice points are dropped near constrained edges.
const CLEARANCE_FACTOR: f64 = 0.6;
const SMOOTHING_SWEEPS: usize = 4;

/// Interface-fitted mesh of the disk of radius `radius` centered at the origin.
pub fn build_disk_mesh(radius: f64, h_target: f64, interface: &ParametricCurve) -> Result<Mesh> {
    build_disk_mesh_seeded(radius, h_target, interface, 0)
}

/// As [`build_disk_mesh`]; `seed` rotates and shifts the interior node lattice
/// so that meshes of the same size can still differ.
pub fn build_disk_mesh_seeded(radius: f64, h_target: f64, interface: &ParametricCurve, seed: u64) -> Result<Mesh> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Geometry(format!("domain radius must be positive, got {radius}")));
    }
    if !(h_target > 0.0 && h_target < radius) {
        return Err(Error::Geometry(format!("mesh size must lie in (0, {radius}), got {h_target}")));
    }
    interface.validate()?;

    // Clearance against the exact curve, not just its samples.
    let dense = 4096;
    let max_r = (0..dense)
        .map(|i| interface.point(2.0 * PI * i as f64 / dense as f64).norm())
        .fold(0.0, f64::max);
    let poly = interface.sample_by_spacing(h_target)?;
    let max_r = poly.points().iter().map(|p| p.norm()).fold(max_r, f64::max);
    if max_r >= radius {
        return Err(Error::Geometry(format!("interface leaves the disk (max radius {max_r:.4})")));
    }
    if radius - max_r < 2.0 * h_target * (1.0 - 1e-9) {
        return Err(Error::Geometry(format!(
            "interface clearance {:.4} from the outer boundary is below 2h = {:.4}",
            radius - max_r,
            2.0 * h_target
        )));
    }
    if !poly.is_simple() {
        return Err(Error::Geometry("interface polyline self-intersects at this resolution".into()));
    }

    let nb = ((2.0 * PI * radius / h_target).ceil() as usize).max(8);
    let boundary: Vec<Vec2> = (0..nb).map(|k| Vec2::from_polar(radius, 2.0 * PI * k as f64 / nb as f64)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rot, ox, oy) = if seed == 0 {
        (0.0, 0.0, 0.0)
    } else {
        (rng.random::<f64>() * PI / 3.0, rng.random::<f64>() * h_target, rng.random::<f64>() * h_target)
    };
    let keep = CLEARANCE_FACTOR * h_target;
    let dy = h_target * 3f64.sqrt() / 2.0;
    let rows = (radius / dy).ceil() as i64 + 2;
    let cols = (radius / h_target).ceil() as i64 + 2;
    let mut interior = Vec::new();
    for j in -rows..=rows {
        let shift = if j.rem_euclid(2) == 1 { 0.5 * h_target } else { 0.0 };
        for i in -cols..=cols {
            let p = Vec2::new(i as f64 * h_target + shift + ox, j as f64 * dy + oy).rotated(rot);
            // The boundary polygon sits inside the circle; measure to the chord.
            let chord_r = radius * (PI / nb as f64).cos();
            if p.norm() > chord_r - keep {
                continue;
            }
            if poly.distance_to(p) < keep {
                continue;
            }
            interior.push(p);
        }
    }

    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    let insert = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>, p: Vec2| {
        cdt.insert(Point2::new(p.x, p.y))
            .map_err(|e| Error::Geometry(format!("triangulation insert failed: {e:?}")))
    };
    let bh: Vec<_> = boundary.iter().map(|&p| insert(&mut cdt, p)).collect::<Result<_>>()?;
    let ih: Vec<_> = poly.points().iter().map(|&p| insert(&mut cdt, p)).collect::<Result<_>>()?;
    for &p in &interior {
        insert(&mut cdt, p)?;
    }
    if cdt.num_vertices() != boundary.len() + poly.len() + interior.len() {
        return Err(Error::Geometry("duplicate mesh points".into()));
    }
    for k in 0..bh.len() {
        cdt.add_constraint(bh[k], bh[(k + 1) % bh.len()]);
    }
    for k in 0..ih.len() {
        cdt.add_constraint(ih[k], ih[(k + 1) % ih.len()]);
    }

    let mut nodes = vec![Vec2::ZERO; cdt.num_vertices()];
    for v in cdt.vertices() {
        let p = v.position();
        nodes[v.fix().index()] = Vec2::new(p.x, p.y);
    }
    let mut triangles = Vec::with_capacity(cdt.num_inner_faces());
    let mut regions = Vec::with_capacity(cdt.num_inner_faces());
    for f in cdt.inner_faces() {
        let [a, b, c] = f.vertices().map(|v| v.fix().index());
        let mut t = [a, b, c];
        if orient2d(nodes[a], nodes[b], nodes[c]) < 0.0 {
            t.swap(1, 2);
        }
        let centroid = (nodes[t[0]] + nodes[t[1]] + nodes[t[2]]) * (1.0 / 3.0);
        triangles.push(t);
        regions.push(if poly.contains(centroid) { Region::Inside } else { Region::Outside });
    }
    let boundary_edges: Vec<[usize; 2]> =
        (0..bh.len()).map(|k| [bh[k].index(), bh[(k + 1) % bh.len()].index()]).collect();
    let interface_edges: Vec<[usize; 2]> =
        (0..ih.len()).map(|k| [ih[k].index(), ih[(k + 1) % ih.len()].index()]).collect();

    let mut fixed = vec![false; nodes.len()];
    for h in bh.iter().chain(&ih) {
        fixed[h.index()] = true;
    }
    smooth(&mut nodes, &triangles, &fixed, SMOOTHING_SWEEPS);

    Mesh::new(nodes, triangles, regions, boundary_edges, interface_edges)
}

/// Laplacian smoothing of free nodes; a move is kept only if every incident
/// triangle keeps at least half of its smallest current area.
fn smooth(nodes: &mut [Vec2], triangles: &[[usize; 3]], fixed: &[bool], sweeps: usize) {
    let n = nodes.len();
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, t) in triangles.iter().enumerate() {
        for j in 0..3 {
            let a = t[j];
            incident[a].push(k);
            for &b in t {
                if b != a && !nbrs[a].contains(&b) {
                    nbrs[a].push(b);
                }
            }
        }
    }
    let area = |nodes: &[Vec2], t: &[usize; 3]| orient2d(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
    for _ in 0..sweeps {
        for i in 0..n {
            if fixed[i] || nbrs[i].is_empty() {
                continue;
            }
            let old = nodes[i];
            let floor = incident[i].iter().map(|&k| area(nodes, &triangles[k])).fold(f64::INFINITY, f64::min);
            let avg = nbrs[i].iter().fold(Vec2::ZERO, |s, &j| s + nodes[j]) * (1.0 / nbrs[i].len() as f64);
            nodes[i] = avg;
            let new_min = incident[i].iter().map(|&k| area(nodes, &triangles[k])).fold(f64::INFINITY, f64::min);
            if new_min < 0.5 * floor {
                nodes[i] = old;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn equilateral() -> Mesh {
        let nodes = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.5, 3f64.sqrt() / 2.0)];
        Mesh::new(nodes, vec![[0, 1, 2]], vec![Region::Outside], vec![[0, 1], [1, 2], [2, 0]], vec![]).unwrap()
    }

    #[test]
    fn min_angle_of_equilateral_and_stretched() {
        let m = equilateral();
        assert!((m.min_angle().0 - 60.0).abs() < 1e-12);
        let nodes = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.5, 3f64.sqrt() / 2.0 - 0.5)];
        let flat =
            Mesh::new(nodes, vec![[0, 1, 2]], vec![Region::Outside], vec![[0, 1], [1, 2], [2, 0]], vec![]).unwrap();
        // Height sqrt(3)/2 - 1/2 over a unit base.
        let expected = (3f64.sqrt() - 1.0).atan().to_degrees();
        assert!((flat.min_angle().0 - expected).abs() < 1e-12);
    }

    #[test]
    fn equilateral_area() {
        assert!((equilateral().min_signed_area() - 3f64.sqrt() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn circle_interface_nodes_on_circle() {
        let m = build_disk_mesh(3.0, 0.2, &ParametricCurve::circle(1.5)).unwrap();
        for lp in m.interface_loops() {
            for i in lp {
                assert!((m.nodes()[i].norm() - 1.5).abs() < 1e-9);
            }
        }
        assert!(m.min_signed_area() > 0.0);
    }

    #[test]
    fn small_disk_positive_areas() {
        let m = build_disk_mesh(1.0, 0.5, &ParametricCurve::circle(0.5));
        // 2h clearance is violated here (1 - 0.5 < 1.0); the generator must refuse.
        assert!(m.is_err());
        let m = build_disk_mesh(1.0, 0.2, &ParametricCurve::circle(0.5)).unwrap();
        assert!(m.min_signed_area() > 0.0);
    }

    #[test]
    fn flower_mesh_area() {
        let m = build_disk_mesh(3.0, 0.1, &ParametricCurve::cosine_star(5.0, 0.4, 0.06, 3)).unwrap();
        // Area of the boundary polygon by the shoelace formula.
        let bl = m.boundary_loop();
        let poly = Polyline::new(bl.iter().map(|&i| m.nodes()[i]).collect()).unwrap();
        assert!((m.total_area() - poly.signed_area()).abs() < 1e-9);
        assert!((m.total_area() - 9.0 * PI).abs() / (9.0 * PI) < 0.01);
    }

    #[test]
    fn clearance_and_exit_rejected() {
        assert!(build_disk_mesh(3.0, 0.2, &ParametricCurve::circle(2.9)).is_err());
        assert!(build_disk_mesh(3.0, 0.2, &ParametricCurve::circle(3.5)).is_err());
    }

    #[test]
    fn deform_identity_and_translation() {
        let m = build_disk_mesh(3.0, 0.3, &ParametricCurve::circle(1.5)).unwrap();
        let zero = vec![Vec2::ZERO; m.num_nodes()];
        assert_eq!(m.deform(&zero, 1.0).unwrap().nodes(), m.nodes());
        let v: Vec<Vec2> = (0..m.num_nodes())
            .map(|i| if m.is_boundary_node(i) { Vec2::ZERO } else { Vec2::new(1.0, 0.0) })
            .collect();
        let d = m.deform(&v, 0.01).unwrap();
        for i in 0..m.num_nodes() {
            let shift = d.nodes()[i] - m.nodes()[i];
            let expect = if m.is_boundary_node(i) { 0.0 } else { 0.01 };
            assert!((shift.x - expect).abs() < 1e-15 && shift.y == 0.0);
        }
    }

    #[test]
    fn radial_deform_moves_interface() {
        let m = build_disk_mesh(3.0, 0.2, &ParametricCurve::circle(1.5)).unwrap();
        let normals = interface_normals(&m).unwrap();
        let mut v = vec![Vec2::ZERO; m.num_nodes()];
        for &i in &normals.nodes {
            v[i] = m.nodes()[i].normalized();
        }
        let d = m.deform(&v, 0.1).unwrap();
        for &i in &normals.nodes {
            assert!((d.nodes()[i].norm() - 1.6).abs() < 1e-9);
        }
    }

    #[test]
    fn flipping_deformation_detected() {
        let m = equilateral();
        let inner = Mesh::new(
            vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 2.0), Vec2::new(0.5, 0.5)],
            vec![[0, 1, 3], [1, 2, 3], [2, 0, 3]],
            vec![Region::Outside; 3],
            vec![[0, 1], [1, 2], [2, 0]],
            vec![],
        )
        .unwrap();
        assert!(m.min_signed_area() > 0.0);
        let mut v = vec![Vec2::ZERO; 4];
        v[3] = Vec2::new(1.0, 1.0);
        // Node 3 crosses the hypotenuse x + y = 2 once t > 0.5.
        let moved = Mesh { nodes: inner.nodes().iter().zip(&v).map(|(&p, &w)| p + w).collect(), ..inner.clone() };
        assert!(moved.min_signed_area() < 0.0);
        assert!(matches!(inner.deform(&v, 1.0), Err(Error::InvertedMesh { .. })));
    }

    #[test]
    fn circle_normals_are_radial() {
        let m = build_disk_mesh(3.0, 0.1, &ParametricCurve::circle(1.5)).unwrap();
        let n = interface_normals(&m).unwrap();
        let h = 0.1f64;
        for (k, &i) in n.nodes.iter().enumerate() {
            let radial = m.nodes()[i].normalized();
            assert!((n.normals[k] - radial).norm() < h * h);
            assert!((n.normals[k].norm() - 1.0).abs() < 1e-14);
        }
        let perimeter = m.interface_polyline().unwrap().perimeter();
        let lumped: f64 = n.lumped_length.iter().sum();
        assert!((perimeter - lumped).abs() < 1e-12);
    }

    #[test]
    fn square_corner_normal_is_bisector() {
        let sq = ParametricCurve::polygon(vec![
            Vec2::new(1.0, 1.0),
            Vec2::new(-1.0, 1.0),
            Vec2::new(-1.0, -1.0),
            Vec2::new(1.0, -1.0),
        ]);
        let m = build_disk_mesh(3.0, 0.2, &sq).unwrap();
        let n = interface_normals(&m).unwrap();
        let k = n.nodes.iter().position(|&i| m.nodes()[i].dist(Vec2::new(1.0, 1.0)) < 1e-12).unwrap();
        let expect = Vec2::new(1.0, 1.0).normalized();
        assert!((n.normals[k] - expect).norm() < 1e-12);
    }

    #[test]
    fn normals_point_outside() {
        let m = build_disk_mesh(3.0, 0.2, &ParametricCurve::cosine_star(5.0, 0.4, 0.06, 3)).unwrap();
        let n = interface_normals(&m).unwrap();
        for (k, &i) in n.nodes.iter().enumerate() {
            let q = m.nodes()[i] + n.normals[k] * (0.1 * n.lumped_length[k]);
            let t = m.locate(q).unwrap();
            assert_eq!(m.regions()[t], Region::Outside);
        }
    }

    #[test]
    fn text_round_trip() {
        let m = build_disk_mesh(3.0, 0.4, &ParametricCurve::circle(1.5)).unwrap();
        let back = Mesh::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn text_parse_errors_carry_lines() {
        let err = Mesh::from_text("nodes 1 triangles 0\n1.0 abc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn seeded_meshes_differ() {
        let c = ParametricCurve::circle(1.5);
        let a = build_disk_mesh_seeded(3.0, 0.2, &c, 1).unwrap();
        let b = build_disk_mesh_seeded(3.0, 0.2, &c, 2).unwrap();
        assert_ne!(a.nodes(), b.nodes());
        assert!(a.min_signed_area() > 0.0 && b.min_signed_area() > 0.0);
    }
}
