use std::cell::Cell;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::quad::integrate;
use super::LimitError;
use crate::coeffs::{CoeffError, EdgeCoefficientTable, VertexClassification};
use crate::reeb::{EdgeId, GraphPoint, Location, ReebGraph, VertexId};
use crate::rng::{substream, StreamTag};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitSettings {
    /// Relative tolerance of the travel-time quadrature.
    pub rtol: f64,
    /// Distance at which an asymptotic target counts as reached.
    pub converge_tol: f64,
    /// Table rows used for the logarithmic fit next to an interior vertex.
    pub fit_rows: usize,
}

impl Default for LimitSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            converge_tol: 1e-10,
            fit_rows: 8,
        }
    }
}

/// Dense samples of the motion along one edge; `z` is strictly monotone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSegment {
    pub edge: EdgeId,
    pub times: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchEvent {
    pub t: f64,
    pub vertex: VertexId,
    pub edge: EdgeId,
    /// Uniform variate compared against the branching probabilities.
    pub draw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LimitStatus {
    /// Within the convergence tolerance of a stable point at time `t`.
    Converged { target: GraphPoint, t: f64 },
    /// Still moving at the final time.
    Active,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPath {
    pub start: GraphPoint,
    pub t_end: f64,
    pub segments: Vec<LimitSegment>,
    pub branchings: Vec<BranchEvent>,
    pub status: LimitStatus,
}

impl LimitPath {
    pub fn final_point(&self) -> GraphPoint {
        if let LimitStatus::Converged { target, .. } = self.status {
            return target;
        }
        match self.segments.last() {
            Some(s) => GraphPoint::on_edge(s.edge, *s.z.last().unwrap()),
            None => self.start,
        }
    }

    /// Position at time `t`, interpolated linearly between samples.
    pub fn at(&self, t: f64) -> GraphPoint {
        for s in &self.segments {
            let (t0, t1) = (s.times[0], *s.times.last().unwrap());
            if t < t0 || t > t1 {
                continue;
            }
            let k = s.times.partition_point(|&u| u <= t).clamp(1, s.times.len() - 1);
            let (ta, tb) = (s.times[k - 1], s.times[k]);
            let w = if tb > ta { (t - ta) / (tb - ta) } else { 1.0 };
            return GraphPoint::on_edge(s.edge, s.z[k - 1] + w * (s.z[k] - s.z[k - 1]));
        }
        if self.segments.first().is_some_and(|s| t < s.times[0]) {
            return self.start;
        }
        self.final_point()
    }

    /// Edges chosen at essential vertices, in order.
    pub fn branch_sequence(&self) -> Vec<(VertexId, EdgeId)> {
        self.branchings.iter().map(|b| (b.vertex, b.edge)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,edge,z\n");
        for s in &self.segments {
            for (t, z) in s.times.iter().zip(&s.z) {
                let _ = writeln!(out, "{t:e},{},{z:e}", s.edge);
            }
        }
        out
    }
}

/// `1/|b_bar| = alpha + beta |ln s|` for `s = |z - z_O| < s_w`.
#[derive(Debug, Clone, Copy)]
struct LogFit {
    alpha: f64,
    beta: f64,
    s_w: f64,
}

impl LogFit {
    /// Travel time over `[0, s]`.
    fn time(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        self.alpha * s + self.beta * s * (1.0 - s.ln())
    }

    fn inverse(&self, tau: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, self.s_w);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if self.time(m) < tau {
                lo = m;
            } else {
                hi = m;
            }
            if hi - lo <= 1e-16 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    fn fit(table: &EdgeCoefficientTable, graph: &ReebGraph, vz: f64, away: f64, rows: usize) -> Self {
        let e = graph.edge(table.edge);
        let quarter = 0.25 * (e.z_hi - e.z_lo);
        let mut pts: Vec<(f64, f64)> = table
            .rows
            .iter()
            .map(|r| ((r.z - vz) * away, r.b_bar.abs()))
            .filter(|&(s, b)| s > 0.0 && s <= quarter && b > 0.0 && b.is_finite())
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.truncate(rows);
        let none = Self {
            alpha: 0.0,
            beta: 0.0,
            s_w: 0.0,
        };
        if pts.len() < 3 {
            return none;
        }
        let s_w = pts[pts.len() - 1].0;
        let xy: Vec<(f64, f64)> = pts.iter().map(|&(s, b)| (-s.ln(), 1.0 / b)).collect();
        let n = xy.len() as f64;
        let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
        let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let mut beta = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let mut alpha = my - beta * mx;
        if beta < 0.0 || alpha + beta * (-s_w.ln()) <= 0.0 {
            beta = 0.0;
            alpha = my;
        }
        Self { alpha, beta, s_w }
    }
}

enum End {
    Vertex(VertexId),
    Target(GraphPoint),
}

struct Flow<'a> {
    tables: &'a [EdgeCoefficientTable],
    settings: LimitSettings,
    t_end: f64,
}

enum Outcome {
    Arrived(f64),
    Converged(f64),
    Stopped,
}

impl Flow<'_> {
    fn table(&self, e: EdgeId) -> Result<&EdgeCoefficientTable, LimitError> {
        self.tables
            .iter()
            .find(|t| t.edge == e)
            .ok_or(LimitError::Coeff(CoeffError::MissingTable(e)))
    }

    /// Travel time from `a` to `b` (same side of any zero).
    fn travel(&self, table: &EdgeCoefficientTable, dir: f64, a: f64, b: f64) -> Result<f64, LimitError> {
        let bad = Cell::new(None);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let t = integrate(
            |z| {
                let v = table.b_bar(z) * dir;
                if !(v > 0.0 && v.is_finite()) {
                    bad.set(Some(z));
                    return 0.0;
                }
                1.0 / v
            },
            lo,
            hi,
            self.settings.rtol,
        );
        match bad.get() {
            Some(z) => Err(LimitError::StuckAtZero { edge: table.edge, z }),
            None => Ok(t),
        }
    }

    /// Moves along `edge` from `z0` towards `z_end`, appending samples.
    #[allow(clippy::too_many_arguments)]
    fn run_segment(
        &self,
        seg: &mut LimitSegment,
        table: &EdgeCoefficientTable,
        dir: f64,
        z0: f64,
        start_fit: Option<LogFit>,
        z_end: f64,
        end_fit: Option<LogFit>,
        mut t: f64,
    ) -> Result<Outcome, LimitError> {
        let length = (z_end - z0).abs();
        let push = |seg: &mut LimitSegment, t: f64, z: f64| {
            if seg.z.last() != Some(&z) {
                seg.times.push(t);
                seg.z.push(z);
            }
        };
        push(seg, t, z0);
        let mut z = z0;
        // departure window at an interior vertex
        if let Some(f) = start_fit.filter(|f| f.s_w > 0.0 && f.s_w < 0.5 * length) {
            let mut ss: Vec<f64> = (1..=40).map(|k| f.s_w * 0.5f64.powi(40 - k)).collect();
            ss.dedup();
            for s in ss {
                let tn = t + f.time(s) - f.time((z - z0).abs());
                if tn >= self.t_end {
                    let s_stop = f.inverse(self.t_end - t + f.time((z - z0).abs()));
                    push(seg, self.t_end, z0 + dir * s_stop);
                    return Ok(Outcome::Stopped);
                }
                t = tn;
                z = z0 + dir * s;
                push(seg, t, z);
            }
        }
        // quadrature part, ending at the arrival window or the convergence radius
        let stop_s = match end_fit {
            Some(f) => f.s_w,
            None => self.settings.converge_tol,
        };
        let z_q = z_end - dir * stop_s;
        if (z_q - z) * dir > 0.0 {
            let mut nodes: Vec<f64> = table.rows.iter().map(|r| r.z).filter(|&r| (r - z) * dir > 0.0 && (z_q - r) * dir > 0.0).collect();
            let mut s = length;
            while s > stop_s {
                let n1 = z_end - dir * s;
                if (n1 - z) * dir > 0.0 && (z_q - n1) * dir > 0.0 {
                    nodes.push(n1);
                }
                let n2 = z0 + dir * s;
                if start_fit.is_some() && (n2 - z) * dir > 0.0 && (z_q - n2) * dir > 0.0 {
                    nodes.push(n2);
                }
                s *= 0.5;
            }
            nodes.push(z_q);
            nodes.sort_by(|a, b| (a * dir).total_cmp(&(b * dir)));
            nodes.dedup();
            for zn in nodes {
                let dt = self.travel(table, dir, z, zn)?;
                if t + dt >= self.t_end {
                    let (mut a, mut b) = (z, zn);
                    for _ in 0..200 {
                        let m = 0.5 * (a + b);
                        if t + self.travel(table, dir, z, m)? < self.t_end {
                            a = m;
                        } else {
                            b = m;
                        }
                        if (b - a).abs() <= 1e-15 * b.abs().max(1.0) {
                            break;
                        }
                    }
                    push(seg, self.t_end, 0.5 * (a + b));
                    return Ok(Outcome::Stopped);
                }
                t += dt;
                z = zn;
                push(seg, t, z);
            }
        }
        match end_fit {
            None => Ok(Outcome::Converged(t)),
            Some(f) => {
                let s_now = (z_end - z).abs().min(f.s_w);
                let base = f.time(s_now);
                let mut ss: Vec<f64> = (1..=40).map(|k| s_now * 0.5f64.powi(k)).collect();
                ss.push(0.0);
                for s in ss {
                    let tn = t + base - f.time(s);
                    if tn >= self.t_end {
                        let s_stop = f.inverse(base - (self.t_end - t));
                        push(seg, self.t_end, z_end - dir * s_stop);
                        return Ok(Outcome::Stopped);
                    }
                    push(seg, tn, z_end - dir * s);
                }
                Ok(Outcome::Arrived(t + base))
            }
        }
    }
}

/// Runs the limit process from `y0` up to time `t_end`.
pub fn simulate_limit(
    graph: &ReebGraph,
    tables: &[EdgeCoefficientTable],
    classes: &[VertexClassification],
    y0: GraphPoint,
    t_end: f64,
    seed: u64,
) -> Result<LimitPath, LimitError> {
    let mut rng = substream(seed, StreamTag::Limit, 0);
    simulate_limit_with(graph, tables, classes, y0, t_end, &LimitSettings::default(), &mut |class| {
        let u: f64 = rng.random();
        let exits: Vec<_> = class.exits().collect();
        let mut acc = 0.0;
        for r in &exits {
            acc += r.probability;
            if u < acc {
                return Ok((r.edge, u));
            }
        }
        Ok((exits[exits.len() - 1].edge, u))
    })
}

/// [`simulate_limit`] with explicit settings and branch selection; `choose`
/// returns the edge taken at an essential vertex and the variate used.
pub fn simulate_limit_with(
    graph: &ReebGraph,
    tables: &[EdgeCoefficientTable],
    classes: &[VertexClassification],
    y0: GraphPoint,
    t_end: f64,
    settings: &LimitSettings,
    choose: &mut dyn FnMut(&VertexClassification) -> Result<(EdgeId, f64), LimitError>,
) -> Result<LimitPath, LimitError> {
    if !(t_end >= 0.0) {
        return Err(LimitError::InvalidInput(format!("t_end = {t_end}")));
    }
    let flow = Flow {
        tables,
        settings: *settings,
        t_end,
    };
    let mut path = LimitPath {
        start: y0,
        t_end,
        segments: Vec::new(),
        branchings: Vec::new(),
        status: LimitStatus::Active,
    };
    let mut t = 0.0;
    let (mut edge, mut z, mut from) = match y0.location {
        Location::Edge(e) => (e, y0.z, None),
        Location::Vertex(v) => {
            if !graph.is_interior(v) {
                path.status = LimitStatus::Converged { target: y0, t: 0.0 };
                return Ok(path);
            }
            (leave(graph, classes, v, None, t, &mut path, choose)?, y0.z, Some(v))
        }
    };
    let max_legs = 4 * (graph.edges.len() + 1);
    for _ in 0..max_legs {
        let table = flow.table(edge)?;
        let e = graph.edge(edge);
        let dir = match from {
            Some(v) => e.direction_from(v),
            None => {
                let b = table.b_bar(z);
                if !(b != 0.0 && b.is_finite()) {
                    return Err(LimitError::StuckAtZero { edge, z });
                }
                b.signum()
            }
        };
        let zero = table
            .zeros()
            .into_iter()
            .filter(|&r| (r - z) * dir > 0.0)
            .min_by(|a, b| (a - z).abs().total_cmp(&(b - z).abs()));
        let (z_end, end) = match zero {
            Some(r) => (r, End::Target(GraphPoint::on_edge(edge, r))),
            None => {
                let next = if dir > 0.0 { e.upper } else { e.lower };
                let Some(v) = next else {
                    return Err(CoeffError::AssumptionA8Violated { z }.into());
                };
                let vz = graph.vertex(v).z;
                if graph.is_interior(v) {
                    (vz, End::Vertex(v))
                } else {
                    let target = GraphPoint {
                        location: Location::Vertex(v),
                        z: vz,
                    };
                    (vz, End::Target(target))
                }
            }
        };
        if (z_end - z).abs() <= settings.converge_tol {
            if let End::Target(target) = end {
                path.status = LimitStatus::Converged { target, t };
                return Ok(path);
            }
        }
        let start_fit = from.map(|v| LogFit::fit(table, graph, graph.vertex(v).z, dir, settings.fit_rows));
        let end_fit = match end {
            End::Vertex(_) => Some(LogFit::fit(table, graph, z_end, -dir, settings.fit_rows)),
            End::Target(_) => None,
        };
        let mut seg = LimitSegment {
            edge,
            times: Vec::new(),
            z: Vec::new(),
        };
        let outcome = flow.run_segment(&mut seg, table, dir, z, start_fit, z_end, end_fit, t)?;
        path.segments.push(seg);
        match (outcome, end) {
            (Outcome::Stopped, _) => return Ok(path),
            (Outcome::Converged(tc), End::Target(target)) | (Outcome::Arrived(tc), End::Target(target)) => {
                path.status = LimitStatus::Converged { target, t: tc };
                return Ok(path);
            }
            (Outcome::Arrived(ta), End::Vertex(v)) | (Outcome::Converged(ta), End::Vertex(v)) => {
                t = ta;
                edge = leave(graph, classes, v, Some(edge), t, &mut path, choose)?;
                z = z_end;
                from = Some(v);
            }
        }
    }
    Err(CoeffError::CycleDetected.into())
}

fn leave(
    graph: &ReebGraph,
    classes: &[VertexClassification],
    v: VertexId,
    came: Option<EdgeId>,
    t: f64,
    path: &mut LimitPath,
    choose: &mut dyn FnMut(&VertexClassification) -> Result<(EdgeId, f64), LimitError>,
) -> Result<EdgeId, LimitError> {
    let class = classes
        .iter()
        .find(|c| c.vertex == v)
        .ok_or(LimitError::NoExit { vertex: v })?;
    let exits: Vec<EdgeId> = class.exits().map(|r| r.edge).collect();
    if exits.is_empty() || exits.iter().any(|&e| Some(e) == came) || !graph.is_interior(v) {
        return Err(LimitError::NoExit { vertex: v });
    }
    match exits.len() {
        1 => Ok(exits[0]),
        2 if class.essential => {
            let (edge, draw) = choose(class)?;
            if !exits.contains(&edge) {
                return Err(LimitError::NoExit { vertex: v });
            }
            path.branchings.push(BranchEvent { t, vertex: v, edge, draw });
            Ok(edge)
        }
        _ => Err(LimitError::AmbiguousBranch { vertex: v }),
    }
}
