//! The graph of allowable merges: primitives as nodes, putative merges as
//! edges, and a union-find index of its connected components.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::model::{bbox_overlaps, Aabb3, Primitive};

/// Disjoint sets over dense indices. Each set also tracks the smallest
/// external key among its elements.
#[derive(Debug, Clone, Default)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    min_key: Vec<u64>,
}

impl UnionFind {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a singleton set and returns its index.
    pub fn push(&mut self, key: u64) -> usize {
        let i = self.parent.len();
        self.parent.push(i);
        self.size.push(1);
        self.min_key.push(key);
        i
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = i;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Read-only root lookup without path compression.
    pub fn root(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    /// Unites two sets by size; returns the new root, or `None` if they
    /// were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.min_key[ra] = self.min_key[ra].min(self.min_key[rb]);
        Some(ra)
    }

    pub fn set_size(&self, i: usize) -> usize {
        self.size[self.root(i)]
    }

    pub fn set_min_key(&self, i: usize) -> u64 {
        self.min_key[self.root(i)]
    }
}

/// Boxes spanning more cells than this are kept in a side list and tested
/// against every query.
const MAX_CELLS_PER_BOX: i64 = 512;

/// Uniform grid broad phase for positive-volume box overlap.
#[derive(Debug, Clone)]
pub struct SpatialHash {
    cell_size: f64,
    cells: HashMap<[i64; 3], Vec<u64>>,
    boxes: HashMap<u64, Aabb3>,
    oversized: Vec<u64>,
}

impl SpatialHash {
    pub fn new(cell_size: f64) -> Self {
        let cell_size = if cell_size.is_finite() && cell_size > 0.0 {
            cell_size
        } else {
            1.0
        };
        Self {
            cell_size,
            cells: HashMap::new(),
            boxes: HashMap::new(),
            oversized: Vec::new(),
        }
    }

    /// Grid sized to the median box diagonal.
    pub fn for_boxes<'a>(boxes: impl IntoIterator<Item = &'a Aabb3>) -> Self {
        let mut diags: Vec<f64> = boxes.into_iter().map(Aabb3::diagonal).collect();
        if diags.is_empty() {
            return Self::new(1.0);
        }
        diags.sort_by(f64::total_cmp);
        Self::new(diags[diags.len() / 2])
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    fn cell_range(&self, b: &Aabb3) -> Option<([i64; 3], [i64; 3])> {
        let (lo, hi) = (b.min(), b.max());
        let mut a = [0; 3];
        let mut z = [0; 3];
        let mut count: i64 = 1;
        for i in 0..3 {
            a[i] = (lo[i] / self.cell_size).floor() as i64;
            z[i] = (hi[i] / self.cell_size).floor() as i64;
            count = count.saturating_mul(z[i] - a[i] + 1);
        }
        (count <= MAX_CELLS_PER_BOX).then_some((a, z))
    }

    fn for_each_cell(lo: [i64; 3], hi: [i64; 3], mut f: impl FnMut([i64; 3])) {
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    f([x, y, z]);
                }
            }
        }
    }

    pub fn insert(&mut self, id: u64, b: Aabb3) {
        self.boxes.insert(id, b);
        match self.cell_range(&b) {
            Some((lo, hi)) => {
                Self::for_each_cell(lo, hi, |c| self.cells.entry(c).or_default().push(id))
            }
            None => self.oversized.push(id),
        }
    }

    /// Ids of stored boxes overlapping `b` with positive volume, sorted.
    pub fn overlapping(&self, b: &Aabb3) -> Vec<u64> {
        let mut out: Vec<u64> = match self.cell_range(b) {
            Some((lo, hi)) => {
                let mut v = Vec::new();
                Self::for_each_cell(lo, hi, |c| {
                    if let Some(ids) = self.cells.get(&c) {
                        v.extend_from_slice(ids);
                    }
                });
                v.extend_from_slice(&self.oversized);
                v
            }
            None => self.boxes.keys().copied().collect(),
        };
        out.sort_unstable();
        out.dedup();
        out.retain(|id| bbox_overlaps(&self.boxes[id], b));
        out
    }
}

/// Primitives plus undirected putative-merge edges and their connected
/// components.
#[derive(Debug, Clone, Default)]
pub struct PrimitiveGraph {
    nodes: BTreeMap<u64, Primitive>,
    adjacency: BTreeMap<u64, BTreeSet<u64>>,
    index: HashMap<u64, usize>,
    components: UnionFind,
}

impl PrimitiveGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Nodes for every primitive, with an edge between each pair of boxes
    /// that overlap with positive volume.
    pub fn from_overlaps(primitives: impl IntoIterator<Item = Primitive>) -> Result<Self> {
        let primitives: Vec<Primitive> = primitives.into_iter().collect();
        let mut grid = SpatialHash::for_boxes(primitives.iter().map(|p| &p.bbox));
        let mut g = Self::new();
        for p in primitives {
            let (id, bbox) = (p.id, p.bbox);
            g.add_node(p)?;
            for other in grid.overlapping(&bbox) {
                g.add_edge(id, other)?;
            }
            grid.insert(id, bbox);
        }
        Ok(g)
    }

    /// Nodes plus an explicit edge list.
    pub fn with_edges(
        primitives: impl IntoIterator<Item = Primitive>,
        edges: impl IntoIterator<Item = (u64, u64)>,
    ) -> Result<Self> {
        let mut g = Self::new();
        for p in primitives {
            g.add_node(p)?;
        }
        for (a, b) in edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }

    pub fn add_node(&mut self, p: Primitive) -> Result<()> {
        if self.nodes.contains_key(&p.id) {
            return Err(Error::DuplicateId(p.id));
        }
        let i = self.components.push(p.id);
        self.index.insert(p.id, i);
        self.adjacency.insert(p.id, BTreeSet::new());
        self.nodes.insert(p.id, p);
        Ok(())
    }

    /// Adds an undirected edge. Self loops and repeated edges are ignored;
    /// returns whether a new edge was stored.
    pub fn add_edge(&mut self, a: u64, b: u64) -> Result<bool> {
        let ia = *self.index.get(&a).ok_or(Error::UnknownNode(a))?;
        let ib = *self.index.get(&b).ok_or(Error::UnknownNode(b))?;
        if a == b {
            return Ok(false);
        }
        let fresh = self.adjacency.get_mut(&a).unwrap().insert(b);
        self.adjacency.get_mut(&b).unwrap().insert(a);
        self.components.union(ia, ib);
        Ok(fresh)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn node(&self, id: u64) -> Option<&Primitive> {
        self.nodes.get(&id)
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &Primitive> {
        self.nodes.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.nodes.keys().copied()
    }

    pub fn neighbors(&self, id: u64) -> impl Iterator<Item = u64> + '_ {
        self.adjacency.get(&id).into_iter().flatten().copied()
    }

    /// Edges as `(a, b)` with `a < b`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.adjacency
            .iter()
            .flat_map(|(&a, ns)| ns.range(a + 1..).map(move |&b| (a, b)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Smallest node id in `id`'s component; this serves as the component id.
    pub fn component_id(&self, id: u64) -> Option<u64> {
        let i = *self.index.get(&id)?;
        Some(self.components.set_min_key(i))
    }

    pub fn component_size(&self, id: u64) -> Option<usize> {
        let i = *self.index.get(&id)?;
        Some(self.components.set_size(i))
    }

    /// Connected components keyed by component id, members ascending.
    pub fn components(&self) -> BTreeMap<u64, Vec<u64>> {
        let mut out: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for &id in self.nodes.keys() {
            let c = self.components.set_min_key(self.index[&id]);
            out.entry(c).or_default().push(id);
        }
        out
    }
}
