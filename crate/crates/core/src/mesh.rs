//! Structured nested triangulations of the unit square and patch neighborhoods.
//!
//! Level `k` has `n = 2^k` cells per side. Vertex `(i, j)` has id
//! `j (n + 1) + i`. Cell `(i, j)` is split along its rising diagonal into a
//! lower triangle (id `2 (j n + i)`) and an upper triangle (id `2 (j n + i) + 1`).

use std::collections::VecDeque;

use crate::error::{Error, Result};

pub const MAX_LEVEL: u32 = 12;

#[derive(Clone, Debug)]
pub struct TriMesh {
    pub level: u32,
    /// Cells per side.
    pub n: usize,
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    vertex_elem_ptr: Vec<usize>,
    vertex_elem: Vec<usize>,
}

impl TriMesh {
    pub fn structured(level: u32) -> Self {
        let n = 1usize << level;
        let vid = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                triangles.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
                triangles.push([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
            }
        }
        let nv = vertices.len();
        let mut ptr = vec![0usize; nv + 1];
        for t in &triangles {
            for &v in t {
                ptr[v + 1] += 1;
            }
        }
        for v in 0..nv {
            ptr[v + 1] += ptr[v];
        }
        let mut next = ptr.clone();
        let mut elem = vec![0usize; ptr[nv]];
        for (e, t) in triangles.iter().enumerate() {
            for &v in t {
                elem[next[v]] = e;
                next[v] += 1;
            }
        }
        Self {
            level,
            n,
            vertices,
            triangles,
            vertex_elem_ptr: ptr,
            vertex_elem: elem,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Axis-aligned edge length `2^{-k}`.
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Elements containing vertex `v`, ascending.
    pub fn vertex_elements(&self, v: usize) -> &[usize] {
        &self.vertex_elem[self.vertex_elem_ptr[v]..self.vertex_elem_ptr[v + 1]]
    }

    /// Elements sharing at least one vertex with `e` (including `e`), ascending.
    pub fn element_neighbors(&self, e: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.triangles[e]
            .iter()
            .flat_map(|&v| self.vertex_elements(v).iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Vertices sharing an element with `v` (including `v`), ascending.
    pub fn vertex_neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .vertex_elements(v)
            .iter()
            .flat_map(|&e| self.triangles[e].iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn area(&self, e: usize) -> f64 {
        let [a, b, c] = self.triangles[e].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[e].map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Maps barycentric coordinates on element `e` to a point.
    pub fn point(&self, e: usize, bary: &[f64; 3]) -> [f64; 2] {
        let t = self.triangles[e];
        let mut p = [0.0; 2];
        for k in 0..3 {
            let v = self.vertices[t[k]];
            p[0] += bary[k] * v[0];
            p[1] += bary[k] * v[1];
        }
        p
    }

    /// Gradients of the three barycentric (hat) functions on element `e`.
    pub fn hat_gradients(&self, e: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[e].map(|v| self.vertices[v]);
        let two_area = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let g = |p: [f64; 2], q: [f64; 2]| [(p[1] - q[1]) / two_area, (q[0] - p[0]) / two_area];
        [g(b, c), g(c, a), g(a, b)]
    }

    /// Element containing `(x, y)` and the barycentric coordinates of the
    /// point there. Points on shared edges resolve to a deterministic owner.
    pub fn locate(&self, x: f64, y: f64) -> (usize, [f64; 3]) {
        let n = self.n as f64;
        let (sx, sy) = (x.clamp(0.0, 1.0) * n, y.clamp(0.0, 1.0) * n);
        let i = (sx.floor() as usize).min(self.n - 1);
        let j = (sy.floor() as usize).min(self.n - 1);
        let (lx, ly) = (sx - i as f64, sy - j as f64);
        let cell = 2 * (j * self.n + i);
        if ly <= lx {
            (cell, [1.0 - lx, lx - ly, ly])
        } else {
            (cell + 1, [1.0 - ly, lx, ly - lx])
        }
    }

    /// Smallest `ℓ ≥ 0` with `s ⊆ N^ℓ(t)`.
    pub fn layer_distance(&self, t: usize, s: usize) -> usize {
        if t == s {
            return 0;
        }
        let mut dist = vec![usize::MAX; self.num_triangles()];
        dist[t] = 0;
        let mut queue = VecDeque::from([t]);
        while let Some(e) = queue.pop_front() {
            for nb in self.element_neighbors(e) {
                if dist[nb] == usize::MAX {
                    dist[nb] = dist[e] + 1;
                    if nb == s {
                        return dist[nb];
                    }
                    queue.push_back(nb);
                }
            }
        }
        unreachable!("the mesh is connected")
    }

    /// Layer distances from `t` to every element.
    pub fn layer_distances(&self, t: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.num_triangles()];
        dist[t] = 0;
        let mut queue = VecDeque::from([t]);
        while let Some(e) = queue.pop_front() {
            for nb in self.element_neighbors(e) {
                if dist[nb] == usize::MAX {
                    dist[nb] = dist[e] + 1;
                    queue.push_back(nb);
                }
            }
        }
        dist
    }
}

/// Nested meshes from `coarse_k` to `fine_k`.
#[derive(Clone, Debug)]
pub struct MeshHierarchy {
    pub coarse_k: u32,
    pub fine_k: u32,
    /// Levels `coarse_k..=fine_k`, coarse first.
    pub levels: Vec<TriMesh>,
    fine_to_coarse: Vec<usize>,
    coarse_children_ptr: Vec<usize>,
    coarse_children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Patch {
    pub center_element: usize,
    pub ell: usize,
    /// Ascending.
    pub coarse_elements: Vec<usize>,
    /// Ascending.
    pub fine_elements: Vec<usize>,
    /// Fine vertices all of whose adjacent fine elements lie in the patch,
    /// ascending. Vertices on the domain boundary qualify; vertices on the
    /// patch boundary inside the domain do not.
    pub fine_interior_vertices: Vec<usize>,
    /// Coarse vertices of patch elements, ascending.
    pub coarse_vertices_active: Vec<usize>,
}

impl MeshHierarchy {
    pub fn coarse(&self) -> &TriMesh {
        &self.levels[0]
    }

    pub fn fine(&self) -> &TriMesh {
        self.levels.last().expect("at least two levels")
    }

    pub fn level(&self, k: u32) -> Option<&TriMesh> {
        k.checked_sub(self.coarse_k)
            .and_then(|i| self.levels.get(i as usize))
    }

    /// Refinement factor between the coarse and the fine level per side.
    pub fn ratio(&self) -> usize {
        1 << (self.fine_k - self.coarse_k)
    }

    /// Coarse ancestor of fine element `e`.
    pub fn coarse_parent(&self, e: usize) -> usize {
        self.fine_to_coarse[e]
    }

    /// Fine descendants of coarse element `t`, ascending.
    pub fn coarse_children(&self, t: usize) -> &[usize] {
        &self.coarse_children[self.coarse_children_ptr[t]..self.coarse_children_ptr[t + 1]]
    }

    /// Ancestor of element `e` of level `from` on level `to ≤ from`.
    pub fn ancestor(from: u32, e: usize, to: u32) -> usize {
        assert!(to <= from);
        let n = 1usize << from;
        let m = 1usize << (from - to);
        let (cell, lower) = (e / 2, e.is_multiple_of(2));
        let (i, j) = (cell % n, cell / n);
        // centroid scaled by 3 in fine cell units
        let cx = 3 * i + if lower { 2 } else { 1 };
        let cy = 3 * j + if lower { 1 } else { 2 };
        let (ci, cj) = (cx / (3 * m), cy / (3 * m));
        let (lx, ly) = (cx - 3 * m * ci, cy - 3 * m * cj);
        let nc = n / m;
        2 * (cj * nc + ci) + usize::from(ly > lx)
    }

    /// `N^ℓ(t)` on the coarse mesh with its fine-level index sets.
    pub fn patch(&self, t: usize, ell: usize) -> Patch {
        let coarse = self.coarse();
        let dist = coarse.layer_distances(t);
        let coarse_elements: Vec<usize> = (0..coarse.num_triangles())
            .filter(|&e| dist[e] <= ell)
            .collect();
        self.patch_from_elements(t, ell, coarse_elements)
    }

    fn patch_from_elements(&self, t: usize, ell: usize, coarse_elements: Vec<usize>) -> Patch {
        let coarse = self.coarse();
        let fine = self.fine();
        let mut in_patch = vec![false; coarse.num_triangles()];
        for &e in &coarse_elements {
            in_patch[e] = true;
        }
        let mut fine_elements: Vec<usize> = coarse_elements
            .iter()
            .flat_map(|&e| self.coarse_children(e).iter().copied())
            .collect();
        fine_elements.sort_unstable();
        let mut candidates: Vec<usize> = fine_elements
            .iter()
            .flat_map(|&e| fine.triangles[e].iter().copied())
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        let fine_interior_vertices = candidates
            .into_iter()
            .filter(|&v| {
                fine.vertex_elements(v)
                    .iter()
                    .all(|&e| in_patch[self.fine_to_coarse[e]])
            })
            .collect();
        let mut coarse_vertices_active: Vec<usize> = coarse_elements
            .iter()
            .flat_map(|&e| coarse.triangles[e].iter().copied())
            .collect();
        coarse_vertices_active.sort_unstable();
        coarse_vertices_active.dedup();
        Patch {
            center_element: t,
            ell,
            coarse_elements,
            fine_elements,
            fine_interior_vertices,
            coarse_vertices_active,
        }
    }

    /// The whole domain as a patch around `t`.
    pub fn full_patch(&self, t: usize) -> Patch {
        let all = (0..self.coarse().num_triangles()).collect();
        self.patch_from_elements(t, usize::MAX, all)
    }
}

pub fn build_hierarchy(coarse_k: u32, fine_k: u32) -> Result<MeshHierarchy> {
    if coarse_k >= fine_k {
        return Err(Error::InvalidInput(format!(
            "coarse level {coarse_k} must be strictly below fine level {fine_k}"
        )));
    }
    if fine_k > MAX_LEVEL {
        return Err(Error::InvalidInput(format!(
            "fine level {fine_k} exceeds the maximum {MAX_LEVEL}"
        )));
    }
    let levels: Vec<TriMesh> = (coarse_k..=fine_k).map(TriMesh::structured).collect();
    let nf = levels.last().unwrap().num_triangles();
    let nc = levels[0].num_triangles();
    let fine_to_coarse: Vec<usize> = (0..nf)
        .map(|e| MeshHierarchy::ancestor(fine_k, e, coarse_k))
        .collect();
    let mut ptr = vec![0usize; nc + 1];
    for &c in &fine_to_coarse {
        ptr[c + 1] += 1;
    }
    for c in 0..nc {
        ptr[c + 1] += ptr[c];
    }
    let mut next = ptr.clone();
    let mut children = vec![0usize; nf];
    for (e, &c) in fine_to_coarse.iter().enumerate() {
        children[next[c]] = e;
        next[c] += 1;
    }
    Ok(MeshHierarchy {
        coarse_k,
        fine_k,
        levels,
        fine_to_coarse,
        coarse_children_ptr: ptr,
        coarse_children: children,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_follow_the_refinement_formula() {
        let mh = build_hierarchy(2, 3).unwrap();
        assert_eq!(mh.coarse().num_vertices(), 25);
        assert_eq!(mh.coarse().num_triangles(), 32);
        assert_eq!(mh.fine().num_vertices(), 81);
        assert_eq!(mh.fine().num_triangles(), 128);
        assert!(build_hierarchy(3, 3).is_err());
        assert!(build_hierarchy(4, 13).is_err());
    }

    #[test]
    fn triangles_are_counterclockwise_with_equal_area() {
        let m = TriMesh::structured(3);
        for e in 0..m.num_triangles() {
            assert!((m.area(e) - m.h() * m.h() / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn each_coarse_element_has_four_children_per_level() {
        let mh = build_hierarchy(1, 3).unwrap();
        for t in 0..mh.coarse().num_triangles() {
            assert_eq!(mh.coarse_children(t).len(), 16);
            for &e in mh.coarse_children(t) {
                // centroid of the child lies inside the parent
                let c = mh.fine().centroid(e);
                assert_eq!(mh.coarse().locate(c[0], c[1]).0, t);
            }
        }
    }

    #[test]
    fn locate_returns_valid_barycentrics() {
        let m = TriMesh::structured(2);
        for &(x, y) in &[(0.1, 0.2), (0.9, 0.05), (1.0, 1.0), (0.0, 0.0), (0.5, 0.75)] {
            let (e, b) = m.locate(x, y);
            assert!(b.iter().all(|&l| l >= -1e-15));
            let p = m.point(e, &b);
            assert!((p[0] - x).abs() < 1e-15 && (p[1] - y).abs() < 1e-15);
        }
    }

    #[test]
    fn hat_gradients_sum_to_zero() {
        let m = TriMesh::structured(2);
        for e in 0..m.num_triangles() {
            let g = m.hat_gradients(e);
            for d in 0..2 {
                assert!((g[0][d] + g[1][d] + g[2][d]).abs() < 1e-12);
            }
        }
    }
}
