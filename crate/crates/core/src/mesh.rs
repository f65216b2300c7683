//! Conforming triangle meshes: structured builders, size-driven refinement, point location.

use crate::error::{CoreError, Result};
use crate::geometry::{polygon_signed_area, Domain, Vec2};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Target edge-length field driving construction and refinement.
///
/// The field is the pointwise minimum of a background size and any number of
/// radial wells. A well holds `h_core` inside `core_radius` and relaxes
/// linearly back toward the background outside it, so element size grades
/// smoothly away from concentration points instead of jumping.
#[derive(Debug, Clone)]
pub struct SizeField {
    h_background: f64,
    wells: Vec<Well>,
}

#[derive(Debug, Clone, Copy)]
struct Well {
    center: Vec2,
    h_core: f64,
    core_radius: f64,
    slope: f64,
}

/// Edge length grows by one unit per `DEFAULT_WELL_SLOPE` units of distance
/// outside a well core; 4 keeps neighboring elements within ~25% of each
/// other while the count stays manageable.
pub const DEFAULT_WELL_SLOPE: f64 = 4.0;

impl SizeField {
    pub fn uniform(h_background: f64) -> Self {
        SizeField { h_background, wells: Vec::new() }
    }

    pub fn add_well(&mut self, center: Vec2, h_core: f64, core_radius: f64) {
        self.add_well_with_slope(center, h_core, core_radius, DEFAULT_WELL_SLOPE);
    }

    pub fn add_well_with_slope(&mut self, center: Vec2, h_core: f64, core_radius: f64, slope: f64) {
        self.wells.push(Well { center, h_core, core_radius, slope });
    }

    pub fn background(&self) -> f64 {
        self.h_background
    }

    pub fn eval(&self, p: Vec2) -> f64 {
        let mut h = self.h_background;
        for w in &self.wells {
            let r = p.dist(w.center);
            let hw = if r <= w.core_radius {
                w.h_core
            } else {
                w.h_core + (r - w.core_radius) / w.slope
            };
            h = h.min(hw);
        }
        h
    }
}

/// Where a point landed: triangle index plus barycentric coordinates.
#[derive(Debug, Clone, Copy)]
pub struct PointLocation {
    pub tri: usize,
    pub bary: [f64; 3],
}

/// A conforming piecewise-linear triangulation of a [`Domain`].
#[derive(Debug, Clone)]
pub struct Mesh {
    pub domain: Domain,
    pub nodes: Vec<Vec2>,
    /// True for nodes on the domain boundary (where fields are pinned to zero).
    pub boundary: Vec<bool>,
    /// Counter-clockwise vertex triples.
    pub tris: Vec<[usize; 3]>,
    node_tris: Vec<Vec<u32>>,
    /// Neighbor across the edge (v[s], v[s+1]); -1 on the boundary.
    neighbors: Vec<[i32; 3]>,
    grid: NodeGrid,
    h_max: f64,
}

const BARY_TOL: f64 = 1e-9;
const MAX_REFINE_PASSES: usize = 64;
const MAX_NODES: usize = 4_000_000;

impl Mesh {
    /// Build a mesh of `domain` honoring `size` everywhere.
    pub fn build(domain: &Domain, size: &SizeField) -> Result<Mesh> {
        domain.validate()?;
        if !(size.background() > 0.0) {
            return Err(CoreError::MeshConstruction(
                "background mesh size must be positive".into(),
            ));
        }
        let (nodes, boundary, tris) = match domain {
            Domain::UnitDisk => spiderweb(size.background()),
            Domain::Rectangle { width, height } => {
                criss_cross(*width, *height, size.background())
            }
            Domain::Polygon { vertices } => base_polygon(vertices, size.background())?,
        };
        let mut mesh = Mesh {
            domain: domain.clone(),
            nodes,
            boundary,
            tris,
            node_tris: Vec::new(),
            neighbors: Vec::new(),
            grid: NodeGrid::empty(),
            h_max: 0.0,
        };
        mesh.refine_to_size(size)?;
        mesh.finalize()?;
        Ok(mesh)
    }

    pub fn unit_disk(h: f64) -> Result<Mesh> {
        Mesh::build(&Domain::UnitDisk, &SizeField::uniform(h))
    }

    pub fn rectangle(width: f64, height: f64, h: f64) -> Result<Mesh> {
        Mesh::build(&Domain::Rectangle { width, height }, &SizeField::uniform(h))
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_tris(&self) -> usize {
        self.tris.len()
    }

    /// Longest edge in the mesh.
    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn tri_nodes(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.tris[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn tri_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.tri_nodes(t);
        0.5 * (b - a).cross(c - a)
    }

    /// Barycentric basis gradients and the triangle area.
    pub fn tri_grads(&self, t: usize) -> ([Vec2; 3], f64) {
        let [a, b, c] = self.tri_nodes(t);
        let area = 0.5 * (b - a).cross(c - a);
        let rot = |v: Vec2| Vec2::new(-v.y, v.x);
        let s = 1.0 / (2.0 * area);
        ([rot(c - b) * s, rot(a - c) * s, rot(b - a) * s], area)
    }

    pub fn area(&self) -> f64 {
        (0..self.tris.len()).map(|t| self.tri_area(t)).sum()
    }

    /// Exact integral of the piecewise-linear interpolant of nodal `values`.
    pub fn integrate_p1(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for t in 0..self.tris.len() {
            let [a, b, c] = self.tris[t];
            acc += self.tri_area(t) * (values[a] + values[b] + values[c]) / 3.0;
        }
        acc
    }

    pub fn interp(&self, loc: PointLocation, values: &[f64]) -> f64 {
        let [a, b, c] = self.tris[loc.tri];
        loc.bary[0] * values[a] + loc.bary[1] * values[b] + loc.bary[2] * values[c]
    }

    /// Visit every quadrature point of `rule` over the mesh with its
    /// triangle index, position, barycentric coordinates, and weight.
    pub fn for_each_quad(
        &self,
        rule: crate::quad::TriRule,
        mut visit: impl FnMut(usize, Vec2, [f64; 3], f64),
    ) {
        for t in 0..self.tris.len() {
            let [a, b, c] = self.tri_nodes(t);
            rule.for_each(a, b, c, |p, bary, w| visit(t, p, bary, w));
        }
    }

    /// Integrate an arbitrary integrand with `rule`.
    pub fn integrate_fn(&self, rule: crate::quad::TriRule, mut f: impl FnMut(Vec2) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each_quad(rule, |_, p, _, w| acc += w * f(p));
        acc
    }

    pub fn node_triangles(&self, node: usize) -> &[u32] {
        &self.node_tris[node]
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.boundary[i])
    }

    pub fn smallest_angle_deg(&self) -> f64 {
        let mut worst = f64::INFINITY;
        for t in 0..self.tris.len() {
            let p = self.tri_nodes(t);
            for i in 0..3 {
                let u = p[(i + 1) % 3] - p[i];
                let v = p[(i + 2) % 3] - p[i];
                let ang = (u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos();
                worst = worst.min(ang);
            }
        }
        worst.to_degrees()
    }

    fn bary_in(&self, t: usize, p: Vec2) -> [f64; 3] {
        let [a, b, c] = self.tri_nodes(t);
        let (v0, v1, v2) = (b - a, c - a, p - a);
        let denom = v0.cross(v1);
        let lb = v2.cross(v1) / denom;
        let lc = v0.cross(v2) / denom;
        [1.0 - lb - lc, lb, lc]
    }

    /// Locate `p`, walking the mesh from the nearest node.
    pub fn locate(&self, p: Vec2) -> Result<PointLocation> {
        match self.locate_walk(p) {
            Some((t, bary, ok)) if ok => Ok(PointLocation { tri: t, bary: clamp_bary(bary) }),
            _ => Err(CoreError::OutsideDomain { x: p.x, y: p.y }),
        }
    }

    /// Locate `p`, falling back to the best nearby triangle with clamped
    /// coordinates when `p` sits in the sliver between a curved boundary and
    /// its chord (or marginally outside the mesh).
    pub fn locate_clamped(&self, p: Vec2) -> PointLocation {
        if let Some((t, bary, ok)) = self.locate_walk(p) {
            if ok {
                return PointLocation { tri: t, bary: clamp_bary(bary) };
            }
            // Pick the least-negative candidate among triangles at the
            // nearest node to keep the choice local and deterministic.
            let n = self.grid.nearest(&self.nodes, p);
            let mut best = (f64::NEG_INFINITY, t, bary);
            for &cand in &self.node_tris[n] {
                let b = self.bary_in(cand as usize, p);
                let m = b[0].min(b[1]).min(b[2]);
                if m > best.0 {
                    best = (m, cand as usize, b);
                }
            }
            return PointLocation { tri: best.1, bary: clamp_bary(best.2) };
        }
        PointLocation { tri: 0, bary: clamp_bary(self.bary_in(0, p)) }
    }

    fn locate_walk(&self, p: Vec2) -> Option<(usize, [f64; 3], bool)> {
        if self.tris.is_empty() {
            return None;
        }
        let start_node = self.grid.nearest(&self.nodes, p);
        let mut t = *self.node_tris[start_node].first()? as usize;
        let mut steps = 0usize;
        loop {
            let bary = self.bary_in(t, p);
            let (mut worst_s, mut worst) = (0usize, bary[0]);
            for s in 1..3 {
                if bary[s] < worst {
                    worst = bary[s];
                    worst_s = s;
                }
            }
            if worst >= -BARY_TOL {
                return Some((t, bary, true));
            }
            // bary[s] is the coordinate of vertex s; leaving through the edge
            // opposite vertex s means crossing edge slot (s+1).
            let exit = (worst_s + 1) % 3;
            let nb = self.neighbors[t][exit];
            if nb < 0 {
                return Some((t, bary, false));
            }
            t = nb as usize;
            steps += 1;
            if steps > self.tris.len() {
                // Degenerate walk cycle; settle it by exhaustive scan.
                for cand in 0..self.tris.len() {
                    let b = self.bary_in(cand, p);
                    if b[0].min(b[1]).min(b[2]) >= -BARY_TOL {
                        return Some((cand, b, true));
                    }
                }
                return Some((t, bary, false));
            }
        }
    }

    /// Serialize to the plain text format used by the command-line tools.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "{:.16e} {:.16e} {}", p.x, p.y, u8::from(self.boundary[i]));
        }
        let _ = writeln!(s, "triangles {}", self.tris.len());
        for t in &self.tris {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    pub fn from_text(domain: Domain, text: &str) -> Result<Mesh> {
        let bad = |m: &str| CoreError::MeshFormat(m.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty input"))?;
        let n: usize = header
            .strip_prefix("nodes ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("expected `nodes N` header"))?;
        let mut nodes = Vec::with_capacity(n);
        let mut boundary = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| bad("truncated node list"))?;
            let mut it = line.split_whitespace();
            let x: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad node line"))?;
            let y: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad node line"))?;
            let flag: u8 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad node flag"))?;
            nodes.push(Vec2::new(x, y));
            boundary.push(flag != 0);
        }
        let header = lines.next().ok_or_else(|| bad("missing triangle header"))?;
        let m: usize = header
            .strip_prefix("triangles ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("expected `triangles M` header"))?;
        let mut tris = Vec::with_capacity(m);
        for _ in 0..m {
            let line = lines.next().ok_or_else(|| bad("truncated triangle list"))?;
            let mut it = line.split_whitespace();
            let mut tri = [0usize; 3];
            for v in &mut tri {
                *v = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("bad triangle line"))?;
                if *v >= n {
                    return Err(bad("triangle references missing node"));
                }
            }
            tris.push(tri);
        }
        let mut mesh = Mesh {
            domain,
            nodes,
            boundary,
            tris,
            node_tris: Vec::new(),
            neighbors: Vec::new(),
            grid: NodeGrid::empty(),
            h_max: 0.0,
        };
        mesh.finalize()?;
        Ok(mesh)
    }

    /// Structural soundness: positive areas, consistent orientation, every
    /// interior edge shared by exactly two triangles, boundary flags matching
    /// boundary edges.
    pub fn check_conformity(&self) -> Result<()> {
        let fail = |m: String| Err(CoreError::MeshConstruction(m));
        let mut directed: HashMap<(usize, usize), u32> = HashMap::new();
        for (t, tri) in self.tris.iter().enumerate() {
            if self.tri_area(t) <= 0.0 {
                return fail(format!("triangle {t} has non-positive area"));
            }
            for s in 0..3 {
                let e = (tri[s], tri[(s + 1) % 3]);
                if directed.insert(e, t as u32).is_some() {
                    return fail(format!("directed edge {e:?} appears twice"));
                }
            }
        }
        for (&(a, b), _) in directed.iter() {
            if !directed.contains_key(&(b, a)) {
                // Boundary edge: both endpoints must carry the flag.
                if !(self.boundary[a] && self.boundary[b]) {
                    return fail(format!(
                        "boundary edge ({a}, {b}) has an unflagged endpoint"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Refine until every triangle's longest edge fits under `size`.
    ///
    /// Longest-edge bisection with closure: any triangle forced to split a
    /// shorter edge also splits its longest, which keeps angles bounded.
    pub fn refine_to_size(&mut self, size: &SizeField) -> Result<()> {
        for _pass in 0..MAX_REFINE_PASSES {
            let mut want: BTreeSet<(usize, usize)> = BTreeSet::new();
            for tri in &self.tris {
                let (e, len) = self.longest_edge(tri);
                let mid = (self.nodes[e.0] + self.nodes[e.1]) * 0.5;
                if len > size.eval(mid) {
                    want.insert(e);
                }
            }
            if want.is_empty() {
                return Ok(());
            }
            // Closure: propagate until every affected triangle splits its
            // longest edge.
            loop {
                let mut added = false;
                for tri in &self.tris {
                    let (le, _) = self.longest_edge(tri);
                    if want.contains(&le) {
                        continue;
                    }
                    let touched = (0..3).any(|s| {
                        want.contains(&edge_key(tri[s], tri[(s + 1) % 3]))
                    });
                    if touched {
                        want.insert(le);
                        added = true;
                    }
                }
                if !added {
                    break;
                }
            }
            // Which edges lie on the boundary (single incident triangle)?
            let mut edge_count: HashMap<(usize, usize), u8> = HashMap::new();
            for tri in &self.tris {
                for s in 0..3 {
                    *edge_count.entry(edge_key(tri[s], tri[(s + 1) % 3])).or_insert(0) += 1;
                }
            }
            // Create midpoints in sorted edge order so node numbering is
            // reproducible run to run.
            let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            for &(a, b) in &want {
                let p = (self.nodes[a] + self.nodes[b]) * 0.5;
                let on_boundary = edge_count.get(&(a, b)).copied() == Some(1);
                let p = if on_boundary { self.domain.snap_to_boundary(p) } else { p };
                mid.insert((a, b), self.nodes.len());
                self.nodes.push(p);
                self.boundary.push(on_boundary);
            }
            if self.nodes.len() > MAX_NODES {
                return Err(CoreError::MeshConstruction(format!(
                    "refinement exceeded {MAX_NODES} nodes; size field is too demanding"
                )));
            }
            let old = std::mem::take(&mut self.tris);
            for tri in old {
                self.emit_refined(tri, &mid);
            }
        }
        Err(CoreError::MeshConstruction(format!(
            "refinement did not settle within {MAX_REFINE_PASSES} passes"
        )))
    }

    fn emit_refined(&mut self, tri: [usize; 3], mid: &BTreeMap<(usize, usize), usize>) {
        let mut best: Option<(f64, usize)> = None;
        for s in 0..3 {
            let (a, b) = (tri[s], tri[(s + 1) % 3]);
            if mid.contains_key(&edge_key(a, b)) {
                let len = self.nodes[a].dist(self.nodes[b]);
                if best.map_or(true, |(bl, _)| len > bl) {
                    best = Some((len, s));
                }
            }
        }
        match best {
            None => self.tris.push(tri),
            Some((_, s)) => {
                let (a, b, c) = (tri[s], tri[(s + 1) % 3], tri[(s + 2) % 3]);
                let m = mid[&edge_key(a, b)];
                self.emit_refined([a, m, c], mid);
                self.emit_refined([m, b, c], mid);
            }
        }
    }

    fn longest_edge(&self, tri: &[usize; 3]) -> ((usize, usize), f64) {
        let mut best = (edge_key(tri[0], tri[1]), 0.0);
        for s in 0..3 {
            let (a, b) = (tri[s], tri[(s + 1) % 3]);
            let len = self.nodes[a].dist(self.nodes[b]);
            if len > best.1 {
                best = (edge_key(a, b), len);
            }
        }
        best
    }

    fn finalize(&mut self) -> Result<()> {
        self.check_conformity()?;
        self.node_tris = vec![Vec::new(); self.nodes.len()];
        let mut directed: HashMap<(usize, usize), u32> =
            HashMap::with_capacity(3 * self.tris.len());
        for (t, tri) in self.tris.iter().enumerate() {
            for s in 0..3 {
                self.node_tris[tri[s]].push(t as u32);
                directed.insert((tri[s], tri[(s + 1) % 3]), t as u32);
            }
        }
        self.neighbors = self
            .tris
            .iter()
            .map(|tri| {
                let mut nb = [-1i32; 3];
                for s in 0..3 {
                    if let Some(&t) = directed.get(&(tri[(s + 1) % 3], tri[s])) {
                        nb[s] = t as i32;
                    }
                }
                nb
            })
            .collect();
        self.h_max = self
            .tris
            .iter()
            .map(|tri| {
                (0..3)
                    .map(|s| self.nodes[tri[s]].dist(self.nodes[tri[(s + 1) % 3]]))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        self.grid = NodeGrid::build(&self.nodes);
        Ok(())
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn clamp_bary(b: [f64; 3]) -> [f64; 3] {
    let c = [b[0].max(0.0), b[1].max(0.0), b[2].max(0.0)];
    let s = c[0] + c[1] + c[2];
    [c[0] / s, c[1] / s, c[2] / s]
}

/// Radial "spiderweb" disk mesh: ring k of m carries 8k nodes at radius k/m,
/// so the boundary ring lies exactly on the unit circle and the mesh is
/// symmetric under eighth-turn rotations.
fn spiderweb(h: f64) -> (Vec<Vec2>, Vec<bool>, Vec<[usize; 3]>) {
    // Zipper diagonals run up to ~1.27/m, so 1.3 keeps every edge under h.
    let m = ((1.3 / h).ceil() as usize).max(1);
    let mut nodes = vec![Vec2::ZERO];
    for k in 1..=m {
        let r = k as f64 / m as f64;
        let n = 8 * k;
        for j in 0..n {
            let th = 2.0 * PI * j as f64 / n as f64;
            nodes.push(Vec2::new(r * th.cos(), r * th.sin()));
        }
    }
    let ring_start = |k: usize| if k == 0 { 0 } else { 1 + 4 * k * (k - 1) };
    let mut tris = Vec::with_capacity(8 * m * m);
    for j in 0..8 {
        tris.push([0, ring_start(1) + j, ring_start(1) + (j + 1) % 8]);
    }
    for k in 1..m {
        let (inner, ni) = (ring_start(k), 8 * k);
        let (outer, no) = (ring_start(k + 1), 8 * (k + 1));
        for o in 0..8 {
            let gi = |i: usize| inner + (o * k + i) % ni;
            let go = |i: usize| outer + (o * (k + 1) + i) % no;
            let (mut ii, mut oi) = (0usize, 0usize);
            while ii < k || oi < k + 1 {
                let advance_outer = if oi >= k + 1 {
                    false
                } else if ii >= k {
                    true
                } else {
                    (oi + 1) * k <= (ii + 1) * (k + 1)
                };
                if advance_outer {
                    tris.push([gi(ii), go(oi), go(oi + 1)]);
                    oi += 1;
                } else {
                    tris.push([gi(ii), go(oi), gi(ii + 1)]);
                    ii += 1;
                }
            }
        }
    }
    let mut boundary = vec![false; nodes.len()];
    for j in 0..8 * m {
        boundary[ring_start(m) + j] = true;
    }
    (nodes, boundary, tris)
}

/// Criss-cross rectangle mesh: each grid cell is split into four triangles
/// around its center, which keeps the mesh mirror-symmetric.
fn criss_cross(width: f64, height: f64, h: f64) -> (Vec<Vec2>, Vec<bool>, Vec<[usize; 3]>) {
    let nx = ((width / h).ceil() as usize).max(1);
    let ny = ((height / h).ceil() as usize).max(1);
    let (dx, dy) = (width / nx as f64, height / ny as f64);
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) + nx * ny);
    let mut boundary = Vec::with_capacity(nodes.capacity());
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push(Vec2::new(i as f64 * dx, j as f64 * dy));
            boundary.push(i == 0 || i == nx || j == 0 || j == ny);
        }
    }
    let centers_base = nodes.len();
    for j in 0..ny {
        for i in 0..nx {
            nodes.push(Vec2::new((i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy));
            boundary.push(false);
        }
    }
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut tris = Vec::with_capacity(4 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10) = (grid(i, j), grid(i + 1, j));
            let (v11, v01) = (grid(i + 1, j + 1), grid(i, j + 1));
            let c = centers_base + j * nx + i;
            tris.push([v00, v10, c]);
            tris.push([v10, v11, c]);
            tris.push([v11, v01, c]);
            tris.push([v01, v00, c]);
        }
    }
    (nodes, boundary, tris)
}

/// Coarse polygon triangulation by ear clipping; refinement brings it to size.
fn base_polygon(vertices: &[Vec2], _h: f64) -> Result<(Vec<Vec2>, Vec<bool>, Vec<[usize; 3]>)> {
    let scale_sq = {
        let area = polygon_signed_area(vertices);
        area.max(1e-300)
    };
    let mut idx: Vec<usize> = (0..vertices.len()).collect();
    let mut tris = Vec::with_capacity(vertices.len().saturating_sub(2));
    while idx.len() > 3 {
        let n = idx.len();
        let mut clipped = false;
        for i in 0..n {
            let (a, b, c) = (idx[(i + n - 1) % n], idx[i], idx[(i + 1) % n]);
            let (pa, pb, pc) = (vertices[a], vertices[b], vertices[c]);
            if (pb - pa).cross(pc - pb) <= 1e-14 * scale_sq {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                j != a && j != b && j != c && point_in_tri_strict(vertices[j], pa, pb, pc)
            });
            if !blocked {
                tris.push([a, b, c]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return Err(CoreError::InvalidDomain(
                "polygon could not be triangulated; vertices may self-intersect".into(),
            ));
        }
    }
    tris.push([idx[0], idx[1], idx[2]]);
    let boundary = vec![true; vertices.len()];
    Ok((vertices.to_vec(), boundary, tris))
}

fn point_in_tri_strict(p: Vec2, a: Vec2, b: Vec2, c: Vec2) -> bool {
    let s1 = (b - a).cross(p - a);
    let s2 = (c - b).cross(p - b);
    let s3 = (a - c).cross(p - c);
    s1 > 0.0 && s2 > 0.0 && s3 > 0.0
}

/// Uniform spatial hash over nodes, used to seed mesh walks.
#[derive(Debug, Clone)]
struct NodeGrid {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl NodeGrid {
    fn empty() -> NodeGrid {
        NodeGrid { x0: 0.0, y0: 0.0, cell: 1.0, nx: 0, ny: 0, cells: Vec::new() }
    }

    fn build(nodes: &[Vec2]) -> NodeGrid {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in nodes {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let span = ((x1 - x0).max(y1 - y0)).max(1e-12);
        // Aim for a few nodes per cell on average.
        let target = ((nodes.len() as f64 / 4.0).sqrt().ceil() as usize).clamp(1, 2048);
        let cell = span / target as f64;
        let nx = (((x1 - x0) / cell).floor() as usize + 1).max(1);
        let ny = (((y1 - y0) / cell).floor() as usize + 1).max(1);
        let mut cells = vec![Vec::new(); nx * ny];
        for (i, p) in nodes.iter().enumerate() {
            let cx = (((p.x - x0) / cell) as usize).min(nx - 1);
            let cy = (((p.y - y0) / cell) as usize).min(ny - 1);
            cells[cy * nx + cx].push(i as u32);
        }
        NodeGrid { x0, y0, cell, nx, ny, cells }
    }

    /// Nearest node by expanding ring search.
    fn nearest(&self, nodes: &[Vec2], p: Vec2) -> usize {
        let cx = (((p.x - self.x0) / self.cell).floor() as i64).clamp(0, self.nx as i64 - 1);
        let cy = (((p.y - self.y0) / self.cell).floor() as i64).clamp(0, self.ny as i64 - 1);
        let mut best = (f64::INFINITY, 0usize);
        let max_ring = self.nx.max(self.ny) as i64;
        for ring in 0..=max_ring {
            for gy in (cy - ring).max(0)..=(cy + ring).min(self.ny as i64 - 1) {
                for gx in (cx - ring).max(0)..=(cx + ring).min(self.nx as i64 - 1) {
                    let on_rim = gx == cx - ring
                        || gx == cx + ring
                        || gy == cy - ring
                        || gy == cy + ring;
                    if !on_rim {
                        continue;
                    }
                    for &n in &self.cells[gy as usize * self.nx + gx as usize] {
                        let d = nodes[n as usize].dist(p);
                        if d < best.0 {
                            best = (d, n as usize);
                        }
                    }
                }
            }
            // One extra ring after the first hit guards against a closer
            // node hiding in a diagonal cell.
            if best.0 < (ring as f64) * self.cell {
                break;
            }
        }
        best.1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spiderweb_counts_and_symmetry() {
        let mesh = Mesh::unit_disk(0.3).unwrap();
        let m = (1.3f64 / 0.3).ceil() as usize;
        assert_eq!(mesh.num_nodes(), 1 + 4 * m * (m + 1));
        assert_eq!(mesh.num_tris(), 8 * m * m);
        assert!(mesh.h_max() <= 0.3 + 1e-12);
        // Eighth-turn rotation maps the node set onto itself.
        let rot = |p: Vec2| {
            let c = (PI / 4.0).cos();
            let s = (PI / 4.0).sin();
            Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y)
        };
        for p in mesh.nodes.iter().take(40) {
            let q = rot(*p);
            let found = mesh.nodes.iter().any(|r| r.dist(q) < 1e-12);
            assert!(found, "rotated node {q:?} missing");
        }
    }

    #[test]
    fn disk_area_converges_quadratically() {
        let a1 = Mesh::unit_disk(0.2).unwrap().area();
        let a2 = Mesh::unit_disk(0.1).unwrap().area();
        let (e1, e2) = (PI - a1, PI - a2);
        assert!(e1 > 0.0 && e2 > 0.0, "polygonal area must undershoot");
        let rate = (e1 / e2).log2();
        assert!(rate > 1.6, "area error should shrink ~4x per halving, rate {rate}");
    }

    #[test]
    fn rectangle_area_is_exact() {
        let mesh = Mesh::rectangle(2.0, 0.7, 0.11).unwrap();
        assert!((mesh.area() - 1.4).abs() < 1e-12);
        assert!(mesh.h_max() <= 0.11 * 2.0f64.sqrt() + 1e-12);
        mesh.check_conformity().unwrap();
    }

    #[test]
    fn polygon_mesh_reaches_target_size() {
        let hexagon: Vec<Vec2> = (0..6)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / 6.0;
                Vec2::new(th.cos(), th.sin())
            })
            .collect();
        let domain = Domain::Polygon { vertices: hexagon };
        let mesh = Mesh::build(&domain, &SizeField::uniform(0.2)).unwrap();
        mesh.check_conformity().unwrap();
        assert!(mesh.h_max() <= 0.2 + 1e-12);
        assert!((mesh.area() - domain.area()).abs() < 1e-12);
        assert!(mesh.smallest_angle_deg() > 10.0);
    }

    #[test]
    fn well_refinement_grades_and_conforms() {
        let mut size = SizeField::uniform(0.15);
        size.add_well(Vec2::new(0.3, 0.0), 0.01, 0.05);
        let mesh = Mesh::build(&Domain::UnitDisk, &size).unwrap();
        mesh.check_conformity().unwrap();
        // Every triangle near the well center must be small.
        for t in 0..mesh.num_tris() {
            let [a, b, c] = mesh.tri_nodes(t);
            let centroid = (a + b + c) / 3.0;
            if centroid.dist(Vec2::new(0.3, 0.0)) < 0.04 {
                let longest = [(a, b), (b, c), (c, a)]
                    .iter()
                    .map(|&(p, q)| p.dist(q))
                    .fold(0.0, f64::max);
                assert!(longest <= 0.011, "core triangle too big: {longest}");
            }
        }
        assert!(mesh.smallest_angle_deg() > 10.0);
        // Boundary nodes stay on the circle even after refinement.
        for i in mesh.boundary_nodes() {
            assert!((mesh.nodes[i].norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn locate_agrees_with_interpolation() {
        let mesh = Mesh::unit_disk(0.25).unwrap();
        let f: Vec<f64> = mesh.nodes.iter().map(|p| 1.0 + 2.0 * p.x - 0.5 * p.y).collect();
        for p in [Vec2::new(0.1, 0.2), Vec2::new(-0.6, 0.3), Vec2::new(0.0, -0.9)] {
            let loc = mesh.locate(p).unwrap();
            let v = mesh.interp(loc, &f);
            assert!((v - (1.0 + 2.0 * p.x - 0.5 * p.y)).abs() < 1e-12);
        }
        assert!(mesh.locate(Vec2::new(1.5, 0.0)).is_err());
        // Clamped location handles the chord/arc sliver gracefully.
        let near = Vec2::new(0.9999, 0.0);
        let loc = mesh.locate_clamped(near);
        assert!(loc.bary.iter().all(|&b| (0.0..=1.0).contains(&b)));
    }

    #[test]
    fn integrate_p1_is_exact_for_linears() {
        let mesh = Mesh::rectangle(1.0, 1.0, 0.2).unwrap();
        let f: Vec<f64> = mesh.nodes.iter().map(|p| 3.0 + p.x - 2.0 * p.y).collect();
        // integral of 3 + x - 2y over the unit square = 3 + 1/2 - 1 = 2.5
        assert!((mesh.integrate_p1(&f) - 2.5).abs() < 1e-13);
    }

    #[test]
    fn text_round_trip_is_byte_stable() {
        let mesh = Mesh::unit_disk(0.4).unwrap();
        let text = mesh.to_text();
        let back = Mesh::from_text(Domain::UnitDisk, &text).unwrap();
        assert_eq!(text, back.to_text());
        assert_eq!(mesh.num_nodes(), back.num_nodes());
    }
}
