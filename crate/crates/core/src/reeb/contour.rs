//! Join, split and contour trees of a sampled field restricted to
//! `{f <= z_max}`. Everything above `z_max` is collapsed into one virtual
//! top node so that the open edge of the Reeb graph ends there.

use super::lattice::Lattice;

pub(crate) const NONE: u32 = u32::MAX;

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[x as usize] != root {
            let next = self.parent[x as usize];
            self.parent[x as usize] = root;
            x = next;
        }
        root
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (hi, lo) = if self.rank[ra as usize] >= self.rank[rb as usize] { (ra, rb) } else { (rb, ra) };
        self.parent[lo as usize] = hi;
        if self.rank[hi as usize] == self.rank[lo as usize] {
            self.rank[hi as usize] += 1;
        }
        hi
    }
}

/// Merge tree stored as parent pointers with a child count and the XOR of
/// child ids, which is enough to splice out nodes with a single child.
struct MergeTree {
    parent: Vec<u32>,
    nchild: Vec<u32>,
    xor: Vec<u32>,
}

impl MergeTree {
    fn new(n: usize) -> Self {
        Self {
            parent: vec![NONE; n],
            nchild: vec![0; n],
            xor: vec![0; n],
        }
    }

    fn link(&mut self, child: u32, parent: u32) {
        self.parent[child as usize] = parent;
        self.nchild[parent as usize] += 1;
        self.xor[parent as usize] ^= child;
    }

    fn remove_leaf(&mut self, x: u32) -> u32 {
        let p = self.parent[x as usize];
        if p != NONE {
            self.nchild[p as usize] -= 1;
            self.xor[p as usize] ^= x;
        }
        p
    }

    fn splice(&mut self, x: u32) {
        let c = self.xor[x as usize];
        let p = self.parent[x as usize];
        self.parent[c as usize] = p;
        if p != NONE {
            self.xor[p as usize] ^= x ^ c;
        }
    }
}

/// Retained lattice vertices plus the virtual top node.
pub(crate) struct SampledComplex<'a> {
    pub lattice: &'a Lattice,
    pub values: &'a [f64],
    pub node_of: Vec<u32>,
    pub vertex_of: Vec<u32>,
    pub touches_top: Vec<bool>,
    /// Nodes sorted by increasing value; the top node is last.
    pub order: Vec<u32>,
    pub rank: Vec<u32>,
}

impl<'a> SampledComplex<'a> {
    pub fn new(lattice: &'a Lattice, values: &'a [f64], z_max: f64) -> Self {
        let mut node_of = vec![NONE; values.len()];
        let mut vertex_of = Vec::new();
        for (i, v) in values.iter().enumerate() {
            if *v <= z_max {
                node_of[i] = vertex_of.len() as u32;
                vertex_of.push(i as u32);
            }
        }
        let n = vertex_of.len();
        let mut touches_top = vec![false; n + 1];
        let mut coords = vec![0; lattice.dim()];
        for (node, &vx) in vertex_of.iter().enumerate() {
            let mut t = false;
            lattice.for_each_neighbor(vx as usize, &mut coords, |j| t |= node_of[j] == NONE);
            // vertices on the lattice boundary also see the outside
            if !t {
                let mut c = vec![0; lattice.dim()];
                lattice.coords(vx as usize, &mut c);
                t = c.iter().zip(&lattice.shape).any(|(ci, s)| *ci == 0 || *ci + 1 == *s);
            }
            touches_top[node] = t;
        }
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_unstable_by(|&a, &b| {
            let (va, vb) = (values[vertex_of[a as usize] as usize], values[vertex_of[b as usize] as usize]);
            va.total_cmp(&vb).then(a.cmp(&b))
        });
        order.push(n as u32);
        let mut rank = vec![0u32; n + 1];
        for (r, &node) in order.iter().enumerate() {
            rank[node as usize] = r as u32;
        }
        Self {
            lattice,
            values,
            node_of,
            vertex_of,
            touches_top,
            order,
            rank,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.vertex_of.len() + 1
    }

    pub fn top(&self) -> u32 {
        self.vertex_of.len() as u32
    }

    pub fn value(&self, node: u32) -> f64 {
        if node == self.top() {
            f64::INFINITY
        } else {
            self.values[self.vertex_of[node as usize] as usize]
        }
    }

    fn for_each_neighbor(&self, node: u32, coords: &mut [usize], mut f: impl FnMut(u32)) {
        if node == self.top() {
            for (m, t) in self.touches_top[..self.vertex_of.len()].iter().enumerate() {
                if *t {
                    f(m as u32);
                }
            }
            return;
        }
        let vx = self.vertex_of[node as usize] as usize;
        self.lattice.for_each_neighbor(vx, coords, |j| {
            let m = self.node_of[j];
            if m != NONE {
                f(m);
            }
        });
        if self.touches_top[node as usize] {
            f(self.top());
        }
    }

    fn sweep(&self, ascending: bool) -> MergeTree {
        let n = self.n_nodes();
        let mut tree = MergeTree::new(n);
        let mut uf = UnionFind::new(n);
        let mut head: Vec<u32> = (0..n as u32).collect();
        let mut coords = vec![0; self.lattice.dim()];
        let mut nbrs = Vec::new();
        let seq: Box<dyn Iterator<Item = &u32>> = if ascending {
            Box::new(self.order.iter())
        } else {
            Box::new(self.order.iter().rev())
        };
        for &v in seq {
            let rv = self.rank[v as usize];
            nbrs.clear();
            self.for_each_neighbor(v, &mut coords, |u| nbrs.push(u));
            for &u in &nbrs {
                let ru = self.rank[u as usize];
                let seen = if ascending { ru < rv } else { ru > rv };
                if !seen {
                    continue;
                }
                let (cu, cv) = (uf.find(u), uf.find(v));
                if cu != cv {
                    tree.link(head[cu as usize], v);
                    let r = uf.union(cu, cv);
                    head[r as usize] = v;
                }
            }
            let r = uf.find(v);
            head[r as usize] = v;
        }
        tree
    }

    /// Join tree only (sublevel components). Returned as parent pointers.
    pub fn join_tree(&self) -> Vec<u32> {
        self.sweep(true).parent
    }

    /// Contour tree edges as `(lower, upper)` node pairs.
    pub fn contour_tree(&self) -> Vec<(u32, u32)> {
        let mut jt = self.sweep(true);
        let mut st = self.sweep(false);
        let n = self.n_nodes();
        let mut removed = vec![false; n];
        let mut queue: Vec<u32> = Vec::new();
        let is_leaf = |jt: &MergeTree, st: &MergeTree, x: u32| {
            let (j, s) = (jt.nchild[x as usize], st.nchild[x as usize]);
            (s == 0 && j == 1) || (j == 0 && s == 1)
        };
        for x in 0..n as u32 {
            if is_leaf(&jt, &st, x) {
                queue.push(x);
            }
        }
        let mut remaining = n;
        let mut edges = Vec::with_capacity(n.saturating_sub(1));
        while let Some(x) = queue.pop() {
            if remaining <= 1 {
                break;
            }
            if removed[x as usize] || !is_leaf(&jt, &st, x) {
                continue;
            }
            let (j, s) = (jt.nchild[x as usize], st.nchild[x as usize]);
            let y = if s == 0 && j == 1 {
                let y = st.remove_leaf(x);
                jt.splice(x);
                edges.push((y, x));
                y
            } else {
                let y = jt.remove_leaf(x);
                st.splice(x);
                edges.push((x, y));
                y
            };
            removed[x as usize] = true;
            remaining -= 1;
            if y != NONE && !removed[y as usize] && is_leaf(&jt, &st, y) {
                queue.push(y);
            }
        }
        edges
    }
}
