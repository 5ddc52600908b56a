use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::interp::Pchip;
use super::{CoeffError, PerturbationModels};
use crate::reeb::{DomainSide, EdgeId, ReebGraph, VertexId};
use crate::rng::{substream2, StreamTag};

/// One tabulated level. `b_bar` and `beta_bar` are `dz/dt` velocities, so
/// they carry the domain-side sign; `h` is always positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub z: f64,
    pub volume: f64,
    pub v: f64,
    pub h: f64,
    pub b_hat: f64,
    pub beta_hat: f64,
    pub a_bar: f64,
    pub b_bar: f64,
    pub beta_bar: f64,
    pub volume_se: f64,
    pub v_se: f64,
    pub h_se: f64,
    pub b_hat_se: f64,
    pub beta_hat_se: f64,
}

/// Raw Monte Carlo integrals for one level.
#[derive(Debug, Clone, Copy, Default)]
pub struct RawRow {
    pub z: f64,
    pub volume: f64,
    pub h: f64,
    pub b_hat: f64,
    pub beta_hat: f64,
    pub volume_se: f64,
    pub h_se: f64,
    pub b_hat_se: f64,
    pub beta_hat_se: f64,
}

#[derive(Debug, Clone)]
pub struct EdgeCoefficientTable {
    pub edge: EdgeId,
    pub side: DomainSide,
    pub z_lo: f64,
    pub z_hi: f64,
    /// Vertex on the `G` side and whether it is an extremum.
    pub domain_vertex: Option<VertexId>,
    pub domain_exterior: bool,
    pub outer_vertex: Option<VertexId>,
    pub rows: Vec<CoefficientRow>,
    volume: Pchip,
    h: Pchip,
    b_hat: Pchip,
    beta_hat: Pchip,
}

impl EdgeCoefficientTable {
    /// Builds the derived columns from raw integrals. `anchor` is the level
    /// of an extremal domain vertex, where every integral vanishes.
    pub fn from_raw(
        graph: &ReebGraph,
        edge: EdgeId,
        mut raw: Vec<RawRow>,
        anchor: Option<f64>,
    ) -> Result<Self, CoeffError> {
        let side = graph.domain_side(edge);
        let e = graph.edge(edge);
        raw.sort_by(|a, b| a.z.total_cmp(&b.z));
        let sign = side.sign();
        let mut zs: Vec<f64> = raw.iter().map(|r| r.z).collect();
        let col = |f: fn(&RawRow) -> f64| -> Vec<f64> { raw.iter().map(f).collect() };
        let (mut vol, mut hh, mut bb, mut be) = (col(|r| r.volume), col(|r| r.h), col(|r| r.b_hat), col(|r| r.beta_hat));
        if let Some(z0) = anchor {
            let at = if z0 < zs[0] { 0 } else { zs.len() };
            zs.insert(at, z0);
            for c in [&mut vol, &mut hh, &mut bb, &mut be] {
                c.insert(at, 0.0);
            }
        }
        let volume = Pchip::new(zs.clone(), vol);
        let h = Pchip::new(zs.clone(), hh.iter().map(|x| sign * x).collect());
        let b_hat = Pchip::new(zs.clone(), bb);
        let beta_hat = Pchip::new(zs, be);

        let n = raw.len();
        let mut rows = Vec::with_capacity(n);
        for (k, r) in raw.iter().enumerate() {
            let v = volume.deriv(r.z).abs();
            let v_se = {
                let lo = k.saturating_sub(1);
                let hi = (k + 1).min(n - 1);
                if hi > lo {
                    (raw[lo].volume_se.powi(2) + raw[hi].volume_se.powi(2)).sqrt() / (raw[hi].z - raw[lo].z)
                } else {
                    f64::NAN
                }
            };
            let hv = sign * r.h;
            if hv <= 0.0 && hv.abs() > 3.0 * r.h_se {
                return Err(CoeffError::DegenerateDiffusion { edge, z: r.z, h: hv });
            }
            rows.push(CoefficientRow {
                z: r.z,
                volume: r.volume,
                v,
                h: hv,
                b_hat: r.b_hat,
                beta_hat: r.beta_hat,
                a_bar: hv / v,
                b_bar: sign * r.b_hat / v,
                beta_bar: sign * r.beta_hat / v,
                volume_se: r.volume_se,
                v_se,
                h_se: r.h_se,
                b_hat_se: r.b_hat_se,
                beta_hat_se: r.beta_hat_se,
            });
        }
        let domain_vertex = graph.domain_vertex(edge);
        Ok(Self {
            edge,
            side,
            z_lo: e.z_lo,
            z_hi: e.z_hi,
            domain_exterior: domain_vertex.is_some_and(|v| !graph.is_interior(v)),
            domain_vertex,
            outer_vertex: graph.outer_vertex(edge),
            rows,
            volume,
            h,
            b_hat,
            beta_hat,
        })
    }

    pub fn sign(&self) -> f64 {
        self.side.sign()
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.rows[0].z, self.rows[self.rows.len() - 1].z)
    }

    pub fn volume(&self, z: f64) -> f64 {
        self.volume.eval(z)
    }

    /// `v = |dV/dz|`
    pub fn v(&self, z: f64) -> f64 {
        self.volume.deriv(z).abs()
    }

    pub fn h(&self, z: f64) -> f64 {
        self.h.eval(z)
    }

    pub fn h_prime(&self, z: f64) -> f64 {
        self.h.deriv(z)
    }

    pub fn b_hat(&self, z: f64) -> f64 {
        self.b_hat.eval(z)
    }

    pub fn beta_hat(&self, z: f64) -> f64 {
        self.beta_hat.eval(z)
    }

    /// Signed `z`-flux `sign * (b_hat + delta beta_hat)`.
    pub fn flux(&self, z: f64, delta: f64) -> f64 {
        self.sign() * (self.b_hat(z) + delta * self.beta_hat(z))
    }

    pub fn a_bar(&self, z: f64) -> f64 {
        self.h(z) / self.v(z)
    }

    pub fn b_bar(&self, z: f64) -> f64 {
        self.sign() * self.b_hat(z) / self.v(z)
    }

    pub fn beta_bar(&self, z: f64) -> f64 {
        self.sign() * self.beta_hat(z) / self.v(z)
    }

    /// Rows within `window` of vertex `v` (an endpoint of this edge), nearest first.
    pub fn rows_near(&self, vz: f64, count: usize) -> Vec<&CoefficientRow> {
        let mut rows: Vec<&CoefficientRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| (a.z - vz).abs().total_cmp(&(b.z - vz).abs()));
        rows.truncate(count);
        rows
    }
}

#[derive(Debug, Clone)]
pub struct TabulationSettings {
    /// Uniform levels in the middle half of each edge.
    pub z_points_per_edge: usize,
    /// Samples per sampling group.
    pub mc_samples: usize,
    /// Multiplier for groups next to interior vertices.
    pub vertex_window_factor: usize,
    pub refine_ratio: f64,
    /// Smallest offset from a vertex.
    pub min_offset: f64,
    /// A new sampling box is started once the box volume grows by this factor.
    pub group_growth: f64,
    pub seed: u64,
}

impl Default for TabulationSettings {
    fn default() -> Self {
        Self {
            z_points_per_edge: 24,
            mc_samples: 1_000_000,
            vertex_window_factor: 8,
            refine_ratio: 0.7,
            min_offset: 1e-5,
            group_growth: 4.0,
            seed: 1,
        }
    }
}

/// Levels for one edge: geometric toward each finite vertex, uniform inside.
pub fn z_grid(graph: &ReebGraph, edge: EdgeId, s: &TabulationSettings) -> Vec<f64> {
    let e = graph.edge(edge);
    let (lo, hi) = (e.z_lo, e.z_hi);
    let len = hi - lo;
    let quarter = 0.25 * len;
    let mut zs = Vec::new();
    let mut off = quarter;
    while off >= s.min_offset {
        zs.push(lo + off);
        if !e.is_open() {
            zs.push(hi - off);
        }
        off *= s.refine_ratio;
    }
    let top = if e.is_open() { hi - 0.05 * len } else { hi - quarter };
    let n = s.z_points_per_edge.max(2);
    for k in 1..n {
        zs.push(lo + quarter + (top - lo - quarter) * k as f64 / n as f64);
    }
    if e.is_open() {
        zs.push(top);
    }
    zs.sort_by(f64::total_cmp);
    zs.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * len.max(1.0));
    zs
}

struct Group {
    rows: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    samples: usize,
}

/// Sampling box for `G_edge(z)` in full coordinates.
fn row_box(graph: &ReebGraph, edge: EdgeId, domain: &[EdgeId], z: f64) -> Result<(Vec<f64>, Vec<f64>), CoeffError> {
    let field = graph.field().ok_or(CoeffError::NoProjection)?;
    let d = field.dim();
    let side = graph.domain_side(edge);
    let p_dim = graph.label_p_dim();
    let step = graph.label_step().ok_or(CoeffError::NoProjection)?;

    let quad = graph.domain_vertex(edge).filter(|&v| !graph.is_interior(v)).and_then(|v| {
        let cp = graph.vertex(v).critical.as_ref()?;
        let s = (z - cp.value).abs();
        let mut hm = DMatrix::from_row_slice(d, d, &field.hessian_vec(&cp.location));
        if side == DomainSide::Above {
            hm = -hm;
        }
        let inv = hm.try_inverse()?;
        let w: Vec<f64> = (0..d).map(|i| 1.6 * (2.0 * s * inv[(i, i)].max(0.0)).sqrt()).collect();
        let small = (0..step.len()).all(|k| w[p_dim + k] <= 3.0 * step[k]);
        small.then(|| {
            let lo: Vec<f64> = (0..d).map(|i| cp.location[i] - w[i]).collect();
            let hi: Vec<f64> = (0..d).map(|i| cp.location[i] + w[i]).collect();
            (lo, hi)
        })
    });
    let (mut lo, mut hi) = match quad {
        Some(b) => b,
        None => {
            let (qlo, qhi) = graph
                .label_bbox(domain, edge, z, side == DomainSide::Above, 2.0)
                .ok_or(CoeffError::EmptyDomain { edge, z })?;
            if p_dim == 0 {
                (qlo, qhi)
            } else {
                let zmin = domain
                    .iter()
                    .chain(std::iter::once(&edge))
                    .map(|&e| graph.edge(e).z_lo)
                    .fold(f64::INFINITY, f64::min);
                let r = (2.0 * (z - zmin).max(0.0)).sqrt();
                let mut lo = vec![-r; p_dim];
                let mut hi = vec![r; p_dim];
                lo.extend(qlo);
                hi.extend(qhi);
                (lo, hi)
            }
        }
    };
    for i in 0..d {
        lo[i] = lo[i].max(field.bounds.lo[i]);
        hi[i] = hi[i].min(field.bounds.hi[i]);
    }
    Ok((lo, hi))
}

fn box_volume(lo: &[f64], hi: &[f64]) -> f64 {
    lo.iter().zip(hi).map(|(a, b)| (b - a).max(0.0)).product()
}

/// Accumulated integrands per bin: count, h, b, beta and their squares.
#[derive(Clone, Default)]
struct Bins {
    s: Vec<[f64; 4]>,
    s2: Vec<[f64; 4]>,
}

impl Bins {
    fn new(n: usize) -> Self {
        Self {
            s: vec![[0.0; 4]; n],
            s2: vec![[0.0; 4]; n],
        }
    }

    fn add(&mut self, other: &Bins) {
        for (a, b) in self.s.iter_mut().zip(&other.s) {
            for k in 0..4 {
                a[k] += b[k];
            }
        }
        for (a, b) in self.s2.iter_mut().zip(&other.s2) {
            for k in 0..4 {
                a[k] += b[k];
            }
        }
    }
}

const CHUNK: usize = 1 << 17;

/// Monte Carlo tables of `V, h, b_hat, beta_hat` on every edge.
pub fn tabulate_edges(
    graph: &ReebGraph,
    models: &PerturbationModels,
    settings: &TabulationSettings,
) -> Result<Vec<EdgeCoefficientTable>, CoeffError> {
    let field = graph.field().ok_or(CoeffError::NoProjection)?;
    let d = field.dim();
    let mut plans = Vec::new();
    for edge in 0..graph.edges.len() {
        let e = graph.edge(edge);
        if e.z_hi - e.z_lo < 4.0 * settings.min_offset {
            return Err(CoeffError::EmptyDomain { edge, z: e.z_lo });
        }
        let side = graph.domain_side(edge);
        let domain = graph.domain_edges(edge);
        let mut zs = z_grid(graph, edge, settings);
        if side == DomainSide::Above {
            zs.reverse();
        }
        let boxes: Vec<(Vec<f64>, Vec<f64>)> = zs
            .iter()
            .map(|&z| row_box(graph, edge, &domain, z))
            .collect::<Result<_, _>>()?;
        let near_interior = |z: f64| {
            let quarter = 0.25 * (e.z_hi - e.z_lo);
            [e.lower, e.upper]
                .into_iter()
                .flatten()
                .any(|v| graph.is_interior(v) && (graph.vertex(v).z - z).abs() <= quarter * 1.0001)
        };
        let mut groups: Vec<Group> = Vec::new();
        let mut first_vol = 0.0;
        for (k, (lo, hi)) in boxes.iter().enumerate() {
            let vol = box_volume(lo, hi);
            let start_new = match groups.last() {
                None => true,
                Some(_) => vol > settings.group_growth * first_vol,
            };
            if start_new {
                first_vol = vol;
                groups.push(Group {
                    rows: Vec::new(),
                    lo: lo.clone(),
                    hi: hi.clone(),
                    samples: settings.mc_samples,
                });
            }
            let g = groups.last_mut().unwrap();
            g.rows.push(k);
            for i in 0..d {
                g.lo[i] = g.lo[i].min(lo[i]);
                g.hi[i] = g.hi[i].max(hi[i]);
            }
            if near_interior(zs[k]) {
                g.samples = settings.mc_samples * settings.vertex_window_factor.max(1);
            }
        }
        plans.push((edge, side, domain, zs, groups));
    }

    // (edge plan, group, chunk) tasks, reduced in index order.
    let mut tasks = Vec::new();
    for (pi, (_, _, _, _, groups)) in plans.iter().enumerate() {
        for (gi, g) in groups.iter().enumerate() {
            let chunks = g.samples.div_ceil(CHUNK);
            for c in 0..chunks {
                let n = CHUNK.min(g.samples - c * CHUNK);
                tasks.push((pi, gi, c, n));
            }
        }
    }
    let results: Vec<Bins> = tasks
        .par_iter()
        .map(|&(pi, gi, c, n)| {
            let (edge, side, ref domain, ref zs, ref groups) = plans[pi];
            let g = &groups[gi];
            let thresholds: Vec<f64> = g.rows.iter().map(|&r| zs[r]).collect();
            sample_group(graph, models, edge, side, domain, &thresholds, &g.lo, &g.hi, n, {
                let key = ((edge as u64) << 32) | gi as u64;
                substream2(settings.seed, StreamTag::Coefficients, key, c as u64)
            })
        })
        .collect();

    let mut tables = Vec::with_capacity(plans.len());
    let mut cursor = 0;
    for (edge, side, _, zs, groups) in &plans {
        let mut raw = Vec::with_capacity(zs.len());
        for g in groups {
            let chunks = g.samples.div_ceil(CHUNK);
            let mut acc = Bins::new(g.rows.len() + 1);
            for r in &results[cursor..cursor + chunks] {
                acc.add(r);
            }
            cursor += chunks;
            let vol = box_volume(&g.lo, &g.hi);
            let n = g.samples as f64;
            // bin k holds points counted by rows k.. (ordered outward from the domain vertex)
            let mut s = [0.0; 4];
            let mut s2 = [0.0; 4];
            for (k, &r) in g.rows.iter().enumerate() {
                for j in 0..4 {
                    s[j] += acc.s[k][j];
                    s2[j] += acc.s2[k][j];
                }
                let est = |j: usize| {
                    let m = s[j] / n;
                    let var = (s2[j] / n - m * m).max(0.0);
                    (vol * m, vol * (var / n).sqrt())
                };
                let (volume, volume_se) = est(0);
                let (h, h_se) = est(1);
                let (b_hat, b_hat_se) = est(2);
                let (beta_hat, beta_hat_se) = est(3);
                raw.push(RawRow {
                    z: zs[r],
                    volume,
                    h,
                    b_hat,
                    beta_hat,
                    volume_se,
                    h_se,
                    b_hat_se,
                    beta_hat_se,
                });
            }
        }
        let anchor = graph
            .domain_vertex(*edge)
            .filter(|&v| !graph.is_interior(v))
            .map(|v| graph.vertex(v).z);
        let _ = side;
        tables.push(EdgeCoefficientTable::from_raw(graph, *edge, raw, anchor)?);
    }
    Ok(tables)
}

#[allow(clippy::too_many_arguments)]
fn sample_group(
    graph: &ReebGraph,
    models: &PerturbationModels,
    edge: EdgeId,
    side: DomainSide,
    domain: &[EdgeId],
    thresholds: &[f64],
    lo: &[f64],
    hi: &[f64],
    n: usize,
    mut rng: impl Rng,
) -> Bins {
    let field = graph.field().unwrap();
    let d = field.dim();
    let mut bins = Bins::new(thresholds.len() + 1);
    let mut x = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    let above = side == DomainSide::Above;
    let outermost = *thresholds.last().unwrap();
    for _ in 0..n {
        for i in 0..d {
            x[i] = lo[i] + (hi[i] - lo[i]) * rng.random::<f64>();
        }
        let z = field.value(&x);
        if (!above && z >= outermost) || (above && z <= outermost) {
            continue;
        }
        let e = graph.edge_at(&x, z);
        if e != edge && !domain.contains(&e) {
            continue;
        }
        // first row that counts this point
        let k = thresholds.partition_point(|&t| if above { t >= z } else { t <= z });
        field.hessian(&x, &mut hess);
        let vals = [
            1.0,
            models.a2.div_a_grad(&hess),
            models.b.divergence(&x),
            models.beta.divergence(&x),
        ];
        for j in 0..4 {
            bins.s[k][j] += vals[j];
            bins.s2[k][j] += vals[j] * vals[j];
        }
    }
    bins
}
