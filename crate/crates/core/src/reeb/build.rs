use super::contour::{SampledComplex, NONE};
use super::lattice::Lattice;
use super::project::{ArcInfo, Labels, NodeInfo};
use super::{ReebEdge, ReebError, ReebGraph, ReebVertex, VertexType, DEFAULT_VERTEX_TOL};
use crate::morse::{CriticalPoint, Kinetic, ScalarFieldModel};

/// Critical nodes and monotone arcs of a compressed merge/contour tree.
struct BaseTree {
    nodes: Vec<NodeInfo>,
    /// lattice vertex of every node
    node_vertex: Vec<usize>,
    arcs: Vec<ArcInfo>,
    arc_of: Vec<u32>,
}

/// Compresses tree edges `(lower, upper)` over complex nodes into critical
/// nodes and arcs, and labels every retained lattice vertex with its arc.
fn compress(cx: &SampledComplex<'_>, edges: &[(u32, u32)]) -> Result<BaseTree, ReebError> {
    let n = cx.n_nodes();
    if edges.len() + 1 != n {
        return Err(ReebError::NotATree(format!("{} edges over {} nodes", edges.len(), n)));
    }
    let top = cx.top();
    let mut up_deg = vec![0u32; n];
    let mut down_deg = vec![0u32; n];
    for &(lo, hi) in edges {
        up_deg[lo as usize] += 1;
        down_deg[hi as usize] += 1;
    }
    // CSR of upward neighbours
    let mut start = vec![0usize; n + 1];
    for i in 0..n {
        start[i + 1] = start[i] + up_deg[i] as usize;
    }
    let mut fill = start.clone();
    let mut up = vec![0u32; edges.len()];
    for &(lo, hi) in edges {
        up[fill[lo as usize]] = hi;
        fill[lo as usize] += 1;
    }
    if down_deg[top as usize] != 1 || up_deg[top as usize] != 0 {
        return Err(ReebError::NotATree(format!(
            "the region above z_max meets {} components",
            down_deg[top as usize]
        )));
    }

    let critical: Vec<bool> = (0..n).map(|i| i as u32 != top && (up_deg[i] != 1 || down_deg[i] != 1)).collect();
    let mut node_index = vec![NONE; n];
    let mut nodes = Vec::new();
    let mut node_vertex = Vec::new();
    for (i, _) in critical.iter().enumerate().filter(|(_, c)| **c) {
        node_index[i] = nodes.len() as u32;
        node_vertex.push(cx.vertex_of[i] as usize);
        nodes.push(NodeInfo {
            z: cx.value(i as u32),
            up: Vec::new(),
            down: Vec::new(),
        });
    }

    let mut arc_of = vec![NONE; cx.lattice.len()];
    let mut arcs = Vec::new();
    for (i, _) in critical.iter().enumerate().filter(|(_, c)| **c) {
        for k in start[i]..start[i + 1] {
            let a = arcs.len() as u32;
            let mut cur = up[k];
            let mut steps = 0usize;
            while cur != top && !critical[cur as usize] {
                arc_of[cx.vertex_of[cur as usize] as usize] = a;
                cur = up[start[cur as usize]];
                steps += 1;
                if steps > n {
                    return Err(ReebError::NotATree("cycle while walking an arc".into()));
                }
            }
            let lo = node_index[i] as usize;
            let hi = (cur != top).then(|| node_index[cur as usize] as usize);
            nodes[lo].up.push(a as usize);
            if let Some(h) = hi {
                nodes[h].down.push(a as usize);
            }
            arcs.push(ArcInfo { lo, hi });
        }
    }
    for (ni, node) in nodes.iter().enumerate() {
        let a = if node.up.len() == 1 || node.down.is_empty() {
            node.up.first()
        } else {
            node.down.first()
        };
        if let Some(&a) = a {
            arc_of[node_vertex[ni]] = a as u32;
        }
    }
    Ok(BaseTree {
        nodes,
        node_vertex,
        arcs,
        arc_of,
    })
}

fn check_ceiling(field: &ScalarFieldModel, criticals: &[CriticalPoint], z_max: f64) -> Result<(), ReebError> {
    let max_critical = criticals.iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
    let per_axis = match field.dim() {
        1 | 2 => 400,
        3 => 60,
        _ => 16,
    };
    let boundary_min = field.boundary_min(per_axis);
    if !(z_max > max_critical && z_max < boundary_min) {
        return Err(ReebError::BadCeiling {
            z_max,
            max_critical,
            boundary_min,
        });
    }
    Ok(())
}

/// Half-width of the lattice tolerance in `z` around a critical point.
fn level_tolerance(field: &ScalarFieldModel, lattice: &Lattice, x: &[f64]) -> f64 {
    let f0 = field.value(x);
    let mut y = x.to_vec();
    let mut var: f64 = 0.0;
    for a in 0..x.len() {
        for s in [-1.0, 1.0] {
            y[a] = x[a] + s * lattice.step[a];
            var = var.max((field.value(&y) - f0).abs());
        }
        y[a] = x[a];
    }
    2.0 * var + 1e-12
}

struct Matched {
    /// base node -> index into label-space criticals
    node_critical: Vec<usize>,
    /// label-space criticals that no node claimed
    unmatched: Vec<usize>,
}

fn match_nodes(
    base: &BaseTree,
    lattice: &Lattice,
    label_field: &ScalarFieldModel,
    criticals: &[CriticalPoint],
) -> Result<Matched, ReebError> {
    let d = lattice.dim();
    let mut pos = vec![0.0; d];
    let mut claimed: Vec<Option<usize>> = vec![None; criticals.len()];
    let mut node_critical = Vec::with_capacity(base.nodes.len());
    for (ni, node) in base.nodes.iter().enumerate() {
        lattice.position(base.node_vertex[ni], &mut pos);
        let mut best: Option<(f64, usize)> = None;
        for (ci, cp) in criticals.iter().enumerate() {
            let cells = (0..d)
                .map(|a| ((pos[a] - cp.location[a]) / lattice.step[a]).abs())
                .fold(0.0, f64::max);
            let tol = level_tolerance(label_field, lattice, &cp.location);
            if cells <= 3.0 && (node.z - cp.value).abs() <= tol && best.is_none_or(|(c, _)| cells < c) {
                best = Some((cells, ci));
            }
        }
        let Some((_, ci)) = best else {
            return Err(ReebError::VertexCountMismatch {
                level: node.z,
                detail: format!("lattice critical node at {pos:?} has no matching critical point"),
            });
        };
        if let Some(other) = claimed[ci] {
            return Err(ReebError::VertexCountMismatch {
                level: node.z,
                detail: format!("critical point {:?} claimed by nodes {other} and {ni}", criticals[ci].location),
            });
        }
        claimed[ci] = Some(ni);
        node_critical.push(ci);
    }
    let unmatched = (0..criticals.len()).filter(|&c| claimed[c].is_none()).collect();
    Ok(Matched { node_critical, unmatched })
}

/// Turns a matched base tree into the final graph. `lift` maps label-space
/// critical points to critical points of the full field.
#[allow(clippy::too_many_arguments)]
fn assemble(
    field: &ScalarFieldModel,
    label_field: &ScalarFieldModel,
    lattice: Lattice,
    values: Vec<f64>,
    base: BaseTree,
    criticals: &[CriticalPoint],
    lift: impl Fn(&CriticalPoint) -> CriticalPoint,
    z_max: f64,
    p_dim: usize,
) -> Result<ReebGraph, ReebError> {
    let d = field.dim();
    let matched = match_nodes(&base, &lattice, label_field, criticals)?;
    let BaseTree {
        mut nodes, arcs, arc_of, ..
    } = base;
    for (ni, &ci) in matched.node_critical.iter().enumerate() {
        nodes[ni].z = criticals[ci].value;
    }
    let mut labels = Labels::new(lattice, values, arc_of, nodes, arcs, p_dim);

    struct Pending {
        z: f64,
        vtype: VertexType,
        critical: CriticalPoint,
        node: Option<usize>,
        arc: Option<usize>,
    }
    let mut pending = Vec::new();
    for (ni, &ci) in matched.node_critical.iter().enumerate() {
        let node = &labels.nodes[ni];
        let vtype = VertexType::from_degrees(node.up.len(), node.down.len()).ok_or_else(|| ReebError::VertexCountMismatch {
            level: node.z,
            detail: format!("vertex of degree {}/{}", node.up.len(), node.down.len()),
        })?;
        let critical = lift(&criticals[ci]);
        let k = critical.index;
        let consistent = match vtype {
            VertexType::Bottom => k == 0,
            VertexType::Top => k == d,
            VertexType::Merge | VertexType::Split => k == 1 || k + 1 == d,
            VertexType::Pass => k != 0 && k != d,
        };
        if !consistent {
            return Err(ReebError::VertexCountMismatch {
                level: node.z,
                detail: format!("vertex typed {vtype} at a critical point of index {k}"),
            });
        }
        pending.push(Pending {
            z: node.z,
            vtype,
            critical,
            node: Some(ni),
            arc: None,
        });
    }
    for &ci in &matched.unmatched {
        let cp = &criticals[ci];
        let critical = lift(cp);
        if critical.index == 0 || critical.index == d {
            return Err(ReebError::VertexCountMismatch {
                level: cp.value,
                detail: format!("extremum at {:?} missing from the sweep", cp.location),
            });
        }
        let arc = labels.locate_arc(&cp.location, cp.value);
        pending.push(Pending {
            z: cp.value,
            vtype: VertexType::Pass,
            critical,
            node: None,
            arc: Some(arc),
        });
    }
    pending.sort_by(|a, b| a.z.total_cmp(&b.z).then_with(|| a.critical.location.partial_cmp(&b.critical.location).unwrap()));

    let mut vertices = Vec::with_capacity(pending.len());
    let mut node_vertex = vec![usize::MAX; labels.nodes.len()];
    let mut on_arc: Vec<Vec<(f64, usize)>> = vec![Vec::new(); labels.arcs.len()];
    for (vid, p) in pending.into_iter().enumerate() {
        if let Some(n) = p.node {
            node_vertex[n] = vid;
        }
        if let Some(a) = p.arc {
            on_arc[a].push((p.z, vid));
        }
        vertices.push(ReebVertex {
            id: vid,
            z: p.z,
            vtype: p.vtype,
            critical: Some(p.critical),
            label: None,
        });
    }

    // Edges: each arc cut at its inserted order-2 vertices.
    let mut raw: Vec<(f64, f64, Option<usize>, Option<usize>, usize)> = Vec::new();
    for (a, arc) in labels.arcs.iter().enumerate() {
        let mut chain: Vec<(f64, Option<usize>)> = vec![(labels.nodes[arc.lo].z, Some(node_vertex[arc.lo]))];
        let mut inner = on_arc[a].clone();
        inner.sort_by(|x, y| x.0.total_cmp(&y.0));
        chain.extend(inner.into_iter().map(|(z, v)| (z, Some(v))));
        chain.push(match arc.hi {
            Some(h) => (labels.nodes[h].z, Some(node_vertex[h])),
            None => (z_max, None),
        });
        for w in chain.windows(2) {
            raw.push((w[0].0, w[1].0, w[0].1, w[1].1, a));
        }
    }
    raw.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut edges = Vec::with_capacity(raw.len());
    let mut arc_edges: Vec<Vec<(f64, usize)>> = vec![Vec::new(); labels.arcs.len()];
    for (eid, (z_lo, z_hi, lower, upper, a)) in raw.into_iter().enumerate() {
        if z_hi <= z_lo {
            return Err(ReebError::VertexCountMismatch {
                level: z_lo,
                detail: "edge with empty z-range".into(),
            });
        }
        arc_edges[a].push((z_lo, eid));
        edges.push(ReebEdge {
            id: eid,
            lower,
            upper,
            z_lo,
            z_hi,
            label: None,
        });
    }
    for list in &mut arc_edges {
        list.sort_by(|x, y| x.0.total_cmp(&y.0));
    }
    labels.arc_edges = arc_edges;

    Ok(ReebGraph {
        vertices,
        edges,
        z_max,
        vertex_tol: DEFAULT_VERTEX_TOL,
        field: Some(field.clone()),
        labels: Some(labels),
    })
}

fn sample(field: &ScalarFieldModel, lattice: &Lattice) -> Vec<f64> {
    use rayon::prelude::*;
    let d = lattice.dim();
    (0..lattice.len())
        .into_par_iter()
        .map_init(
            || vec![0.0; d],
            |x, i| {
                lattice.position(i, x);
                field.value(x)
            },
        )
        .collect()
}

fn min_resolution(d: usize) -> usize {
    if d <= 3 {
        64
    } else {
        32
    }
}

/// Reeb graph of `{H <= z_max}` from a contour-tree sweep over a lattice with
/// `cells[a]` cells per axis.
pub fn build_reeb_grid(
    field: &ScalarFieldModel,
    criticals: &[CriticalPoint],
    cells: &[usize],
    z_max: f64,
) -> Result<ReebGraph, ReebError> {
    let d = field.dim();
    if let Some(&c) = cells.iter().find(|c| **c < min_resolution(d)) {
        return Err(ReebError::ResolutionTooLow {
            got: c,
            min: min_resolution(d),
        });
    }
    check_ceiling(field, criticals, z_max)?;
    let lattice = Lattice::new(&field.bounds, cells);
    let values = sample(field, &lattice);
    let base = {
        let cx = SampledComplex::new(&lattice, &values, z_max);
        let edges = cx.contour_tree();
        compress(&cx, &edges)?
    };
    assemble(field, field, lattice, values, base, criticals, |c| c.clone(), z_max, 0)
}

/// Join tree of a potential `F` on a lattice, the input of the separable lift.
pub struct SublevelTree {
    pub potential: ScalarFieldModel,
    pub criticals: Vec<CriticalPoint>,
    pub z_max: f64,
    lattice: Lattice,
    values: Vec<f64>,
    base: BaseTree,
}

impl SublevelTree {
    pub fn build(
        potential: &ScalarFieldModel,
        criticals: &[CriticalPoint],
        cells: &[usize],
        z_max: f64,
    ) -> Result<Self, ReebError> {
        let d = potential.dim();
        if let Some(&c) = cells.iter().find(|c| **c < min_resolution(d)) {
            return Err(ReebError::ResolutionTooLow {
                got: c,
                min: min_resolution(d),
            });
        }
        let lattice = Lattice::new(&potential.bounds, cells);
        let values = sample(potential, &lattice);
        let base = {
            let cx = SampledComplex::new(&lattice, &values, z_max);
            let parent = cx.join_tree();
            let edges: Vec<(u32, u32)> = parent
                .iter()
                .enumerate()
                .filter(|(_, p)| **p != NONE)
                .map(|(c, p)| (c as u32, *p))
                .collect();
            compress(&cx, &edges)?
        };
        Ok(Self {
            potential: potential.clone(),
            criticals: criticals.to_vec(),
            z_max,
            lattice,
            values,
            base,
        })
    }

    /// Number of sublevel components created (minima) and merges seen.
    pub fn counts(&self) -> (usize, usize) {
        let minima = self.base.nodes.iter().filter(|n| n.down.is_empty()).count();
        let merges = self.base.nodes.iter().filter(|n| n.down.len() >= 2).count();
        (minima, merges)
    }
}

/// Reeb graph of `H = |p|^2/2 + F(q)` from the join tree of `F`: level
/// components of `H` correspond to sublevel components of `F` when there are
/// at least two momenta.
pub fn build_reeb_separable(field: &ScalarFieldModel, tree: &SublevelTree) -> Result<ReebGraph, ReebError> {
    let sep = field.separable_parts().ok_or(ReebError::NotSeparable)?;
    if sep.kinetic != Kinetic::Standard {
        return Err(ReebError::UnsupportedKinetic);
    }
    if sep.p_dim < 2 {
        return Err(ReebError::PDimTooSmall(sep.p_dim));
    }
    let p_dim = sep.p_dim;
    let lifted: Vec<CriticalPoint> = tree.criticals.iter().map(|c| lift_critical(field, p_dim, c)).collect();
    check_ceiling(field, &lifted, tree.z_max)?;
    let base = BaseTree {
        nodes: tree.base.nodes.clone(),
        node_vertex: tree.base.node_vertex.clone(),
        arcs: tree.base.arcs.clone(),
        arc_of: tree.base.arc_of.clone(),
    };
    assemble(
        field,
        &tree.potential,
        tree.lattice.clone(),
        tree.values.clone(),
        base,
        &tree.criticals,
        |c| lift_critical(field, p_dim, c),
        tree.z_max,
        p_dim,
    )
}

fn lift_critical(field: &ScalarFieldModel, p_dim: usize, c: &CriticalPoint) -> CriticalPoint {
    let mut location = vec![0.0; p_dim];
    location.extend_from_slice(&c.location);
    let mut eigenvalues = vec![1.0; p_dim];
    eigenvalues.extend_from_slice(&c.eigenvalues);
    eigenvalues.sort_by(f64::total_cmp);
    CriticalPoint {
        value: field.value(&location),
        index: c.index,
        eigenvalues,
        location,
    }
}
