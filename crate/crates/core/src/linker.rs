//! Line segment linking: turns per-cell detections into whole-line equations.
//!
//! Per line kind:
//! 1. keep cells at or above the confidence threshold, sorted by confidence;
//! 2. keep the `top_k` best and group 8-connected cells;
//! 3. drop groups made of a single cell;
//! 4. fit y = k x + b to each group by least squares;
//! 5. merge groups whose lines intersect inside the image range or whose left
//!    (or right) endpoints are close, then refit each merged group once.

use std::collections::{HashMap, VecDeque};

use log::warn;

use crate::error::{Error, Result};
use crate::geometry::{GridGeometry, LineEquation, LineKind};
use crate::label_codec::{cell_to_pixels, decode_cells, sort_detections, CellDetection, LabelPair};

#[derive(Clone, Debug, PartialEq)]
pub struct LinkerConfig {
    pub confidence_threshold: f64,
    pub top_k: usize,
    /// x interval in which an intersection of two fitted lines triggers a merge.
    pub intersect_range: (f64, f64),
    /// Euclidean distance under which two left (or right) endpoints are "close".
    pub endpoint_close_px: f64,
    /// Lines whose vertical gap somewhere in `intersect_range` is at most this
    /// are treated as intersecting. Collinear fits of one stair line rarely
    /// cross exactly, so this catches them.
    pub coincide_px: f64,
}

impl LinkerConfig {
    pub fn for_geometry(geom: &GridGeometry) -> Self {
        LinkerConfig {
            confidence_threshold: 0.75,
            top_k: 50,
            intersect_range: (0.0, geom.input_w() as f64),
            endpoint_close_px: 2.0 * geom.stride_h(),
            coincide_px: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.confidence_threshold;
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Config(format!("threshold must lie in (0, 1), got {t}")));
        }
        if self.top_k < 2 {
            return Err(Error::Config(format!("top_k must be >= 2, got {}", self.top_k)));
        }
        if !(self.intersect_range.0 <= self.intersect_range.1) {
            return Err(Error::Config("intersect range is empty".into()));
        }
        if !(self.endpoint_close_px >= 0.0 && self.coincide_px >= 0.0) {
            return Err(Error::Config("distance thresholds must be non-negative".into()));
        }
        Ok(())
    }
}

impl Default for LinkerConfig {
    fn default() -> Self {
        Self::for_geometry(&GridGeometry::default())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellGroup {
    /// Sorted by (row, col).
    pub members: Vec<CellDetection>,
    pub fitted: Option<LineEquation>,
}

impl CellGroup {
    pub fn kind(&self) -> LineKind {
        self.members[0].kind
    }

    fn min_key(&self) -> (usize, usize) {
        let r = self.members.iter().map(|m| m.row).min().unwrap_or(0);
        let c = self.members.iter().map(|m| m.col).min().unwrap_or(0);
        (r, c)
    }
}

/// Thresholds then keeps the `top_k` most confident cells.
pub fn select_cells(dets: &[CellDetection], cfg: &LinkerConfig) -> Vec<CellDetection> {
    let mut kept: Vec<CellDetection> = dets
        .iter()
        .filter(|d| d.confidence >= cfg.confidence_threshold)
        .copied()
        .collect();
    sort_detections(&mut kept);
    kept.truncate(cfg.top_k);
    kept
}

/// 8-connected components over (row, col).
pub fn group_adjacent(cells: &[CellDetection]) -> Vec<CellGroup> {
    let index: HashMap<(usize, usize), usize> = cells.iter().enumerate().map(|(i, c)| ((c.row, c.col), i)).collect();
    let mut seen = vec![false; cells.len()];
    let mut groups = Vec::new();
    for start in 0..cells.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(cells[i]);
            let (r, c) = (cells[i].row as i64, cells[i].col as i64);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if (dr, dc) == (0, 0) || nr < 0 || nc < 0 {
                        continue;
                    }
                    if let Some(&j) = index.get(&(nr as usize, nc as usize)) {
                        if !seen[j] {
                            seen[j] = true;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        members.sort_by_key(|m| (m.row, m.col));
        groups.push(CellGroup { members, fitted: None });
    }
    groups.sort_by_key(CellGroup::min_key);
    groups
}

pub fn drop_singletons(groups: Vec<CellGroup>) -> Vec<CellGroup> {
    groups.into_iter().filter(|g| g.members.len() > 1).collect()
}

/// Ordinary least squares y = k x + b. Needs an x spread of at least 1 px.
pub fn fit_points(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!("{} points", points.len())));
    }
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.0), hi.max(p.0))
    });
    if hi - lo < 1.0 {
        return Err(Error::DegenerateFit(format!(
            "x spread {} px is below 1 px (near-vertical)",
            hi - lo
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let k = sxy / sxx;
    Ok((k, my - k * mx))
}

fn fit_members(members: &[CellDetection], geom: &GridGeometry) -> Result<LineEquation> {
    let mut points = Vec::with_capacity(members.len() * 2);
    for m in members {
        let s = cell_to_pixels(m, geom);
        points.push((s.x1, s.y1));
        points.push((s.x2, s.y2));
    }
    let (k, b) = fit_points(&points)?;
    let x_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_max = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(LineEquation {
        kind: members[0].kind,
        k,
        b,
        x_min,
        x_max,
        source_cells: members.len(),
    })
}

/// Fits both pixel endpoints of every member cell.
pub fn fit_group(group: &CellGroup, geom: &GridGeometry) -> Result<LineEquation> {
    if group.members.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "group has {} member(s)",
            group.members.len()
        )));
    }
    fit_members(&group.members, geom)
}

fn lines_meet(a: &LineEquation, b: &LineEquation, cfg: &LinkerConfig) -> bool {
    let (lo, hi) = cfg.intersect_range;
    let gap = |x: f64| a.y_at(x) - b.y_at(x);
    let (g_lo, g_hi) = (gap(lo), gap(hi));
    let crosses = g_lo == 0.0 || g_hi == 0.0 || (g_lo < 0.0) != (g_hi < 0.0);
    crosses || g_lo.abs().min(g_hi.abs()) <= cfg.coincide_px
}

fn endpoints_close(a: &LineEquation, b: &LineEquation, cfg: &LinkerConfig) -> bool {
    let dist = |p: (f64, f64), q: (f64, f64)| (p.0 - q.0).hypot(p.1 - q.1);
    dist(a.left_point(), b.left_point()) <= cfg.endpoint_close_px
        || dist(a.right_point(), b.right_point()) <= cfg.endpoint_close_px
}

/// Whether two fitted groups belong to the same stair line.
pub fn should_merge(a: &LineEquation, b: &LineEquation, cfg: &LinkerConfig) -> bool {
    lines_meet(a, b, cfg) || endpoints_close(a, b, cfg)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Merges fitted groups to a fixed point and refits each merged group once.
///
/// Merge decisions use the initial fits only, so the result is the set of
/// connected components of the pairwise merge relation and does not depend
/// on scan order. Groups without a fit are skipped.
pub fn merge_groups(groups: &[CellGroup], cfg: &LinkerConfig, geom: &GridGeometry) -> Vec<LineEquation> {
    let fitted: Vec<(&CellGroup, LineEquation)> = groups.iter().filter_map(|g| g.fitted.map(|eq| (g, eq))).collect();
    let n = fitted.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if should_merge(&fitted[i].1, &fitted[j].1, cfg) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        let s = *slot.entry(root).or_insert_with(|| {
            components.push(Vec::new());
            components.len() - 1
        });
        components[s].push(i);
    }
    components
        .into_iter()
        .filter_map(|comp| {
            if comp.len() == 1 {
                return Some(fitted[comp[0]].1);
            }
            let mut members: Vec<CellDetection> =
                comp.iter().flat_map(|&i| fitted[i].0.members.iter().copied()).collect();
            members.sort_by_key(|m| (m.row, m.col));
            match fit_members(&members, geom) {
                Ok(eq) => Some(eq),
                Err(e) => {
                    warn!("dropping merged group of {} cells: {e}", members.len());
                    None
                }
            }
        })
        .collect()
}

/// Cell counts after each linking stage, for one line kind.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinkStages {
    pub decoded: usize,
    pub thresholded: usize,
    pub top_k: usize,
    pub after_singletons: usize,
    pub groups: usize,
    pub fitted_groups: usize,
    pub lines: usize,
}

/// Runs the linking pipeline for one kind, reporting per-stage counts.
pub fn link_kind(
    labels: &LabelPair,
    cfg: &LinkerConfig,
    geom: &GridGeometry,
) -> Result<(Vec<LineEquation>, LinkStages)> {
    cfg.validate()?;
    labels.validate(Some(geom))?;
    let decoded = decode_cells(labels, 0.0);
    let thresholded = decoded
        .iter()
        .filter(|d| d.confidence >= cfg.confidence_threshold)
        .count();
    let selected = select_cells(&decoded, cfg);
    let groups = drop_singletons(group_adjacent(&selected));
    let after_singletons = groups.iter().map(|g| g.members.len()).sum();
    let n_groups = groups.len();
    let fitted: Vec<CellGroup> = groups
        .into_iter()
        .filter_map(|mut g| match fit_group(&g, geom) {
            Ok(eq) => {
                g.fitted = Some(eq);
                Some(g)
            }
            Err(e) => {
                warn!("skipping {} group of {} cells: {e}", g.kind(), g.members.len());
                None
            }
        })
        .collect();
    let lines = merge_groups(&fitted, cfg, geom);
    let stages = LinkStages {
        decoded: decoded.len(),
        thresholded,
        top_k: selected.len(),
        after_singletons,
        groups: n_groups,
        fitted_groups: fitted.len(),
        lines: lines.len(),
    };
    Ok((lines, stages))
}

/// Links both kinds and returns all equations sorted by mean y (image top first).
pub fn link_lines(
    convex: &LabelPair,
    concave: &LabelPair,
    cfg: &LinkerConfig,
    geom: &GridGeometry,
) -> Result<Vec<LineEquation>> {
    let mut out = link_kind(convex, cfg, geom)?.0;
    out.extend(link_kind(concave, cfg, geom)?.0);
    out.sort_by(|a, b| a.mean_y().total_cmp(&b.mean_y()).then(a.kind.cmp(&b.kind)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LineSegment;
    use crate::label_codec::encode_lines;

    fn det(row: usize, col: usize, conf: f64) -> CellDetection {
        CellDetection {
            row,
            col,
            confidence: conf,
            endpoints: [0.0, 0.5, 1.0, 0.5],
            kind: LineKind::Convex,
        }
    }

    fn cells_of(groups: &[CellGroup]) -> Vec<Vec<(usize, usize)>> {
        groups
            .iter()
            .map(|g| g.members.iter().map(|m| (m.row, m.col)).collect())
            .collect()
    }

    /// Brute-force connected components by repeated relabeling.
    fn brute_components(cells: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
        let mut label: Vec<usize> = (0..cells.len()).collect();
        loop {
            let mut changed = false;
            for i in 0..cells.len() {
                for j in 0..cells.len() {
                    let adj = cells[i].0.abs_diff(cells[j].0) <= 1 && cells[i].1.abs_diff(cells[j].1) <= 1;
                    if adj && label[j] < label[i] {
                        label[i] = label[j];
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut comps: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut roots: Vec<usize> = label.clone();
        roots.sort();
        roots.dedup();
        for r in roots {
            let mut c: Vec<_> = (0..cells.len()).filter(|&i| label[i] == r).map(|i| cells[i]).collect();
            c.sort();
            comps.push(c);
        }
        comps.sort_by_key(|c| (c.iter().map(|p| p.0).min(), c.iter().map(|p| p.1).min()));
        comps
    }

    #[test]
    fn selection_rules() {
        let cfg = LinkerConfig::default();
        let many: Vec<_> = (0..60).map(|i| det(i, 0, 0.9)).collect();
        assert_eq!(select_cells(&many, &cfg).len(), 50);
        assert!(select_cells(&[det(0, 0, 0.7), det(1, 1, 0.74)], &cfg).is_empty());
        let kept = select_cells(&[det(0, 0, 0.8), det(1, 1, 0.7)], &cfg);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].confidence, 0.8);
    }

    #[test]
    fn grouping_matches_brute_force() {
        let g = group_adjacent(&[det(5, 5, 1.0), det(5, 6, 1.0), det(9, 9, 1.0)]);
        assert_eq!(cells_of(&g), vec![vec![(5, 5), (5, 6)], vec![(9, 9)]]);
        assert_eq!(group_adjacent(&[det(5, 5, 1.0), det(6, 6, 1.0)]).len(), 1);
        assert!(group_adjacent(&[]).is_empty());

        let mut state = 12345u64;
        for _ in 0..50 {
            let mut cells = Vec::new();
            for _ in 0..30 {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                let cell = (((state >> 33) % 12) as usize, ((state >> 45) % 12) as usize);
                if !cells.contains(&cell) {
                    cells.push(cell);
                }
            }
            let dets: Vec<_> = cells.iter().map(|&(r, c)| det(r, c, 1.0)).collect();
            assert_eq!(cells_of(&group_adjacent(&dets)), brute_components(&cells));
        }
    }

    #[test]
    fn singleton_groups_removed() {
        let mk = |n: usize, row: usize| CellGroup {
            members: (0..n).map(|c| det(row, c, 1.0)).collect(),
            fitted: None,
        };
        let out = drop_singletons(vec![mk(3, 0), mk(1, 4), mk(2, 8)]);
        assert_eq!(out.iter().map(|g| g.members.len()).collect::<Vec<_>>(), vec![3, 2]);
        assert!(drop_singletons(vec![mk(1, 0), mk(1, 3)]).is_empty());
        let keep = vec![mk(2, 0), mk(4, 3)];
        assert_eq!(drop_singletons(keep.clone()), keep);
    }

    #[test]
    fn least_squares_examples() {
        let (k, b) = fit_points(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert!((k - 1.0).abs() < 1e-12 && b.abs() < 1e-12);
        let (k, b) = fit_points(&[(0.0, 1.0), (1.0, 2.0), (2.0, 2.0)]).unwrap();
        // Normal equations: k = (3*6 - 3*5) / (3*5 - 9), b = (5 - 0.5*3) / 3.
        assert!((k - 0.5).abs() < 1e-12);
        assert!((b - 3.5 / 3.0).abs() < 1e-12);
        assert!(matches!(
            fit_points(&[(5.0, 0.0), (5.0, 1.0), (5.0, 2.0)]),
            Err(Error::DegenerateFit(_))
        ));
    }

    fn eq(k: f64, b: f64, x_min: f64, x_max: f64) -> LineEquation {
        LineEquation {
            kind: LineKind::Convex,
            k,
            b,
            x_min,
            x_max,
            source_cells: 2,
        }
    }

    #[test]
    fn merge_predicates() {
        let cfg = LinkerConfig::default();
        // Collinear halves of one line.
        assert!(should_merge(
            &eq(0.1, 10.0, 0.0, 250.0),
            &eq(0.1, 10.0, 262.0, 511.0),
            &cfg
        ));
        // Parallel and far apart.
        assert!(!should_merge(
            &eq(0.0, 10.0, 0.0, 200.0),
            &eq(0.0, 100.0, 300.0, 500.0),
            &cfg
        ));
        // Intersect at x = 600, outside [0, 512].
        let a = eq(0.1, 0.0, 0.0, 100.0);
        let b = eq(0.0, 60.0, 300.0, 500.0);
        assert!(!should_merge(&a, &b, &cfg));
        // Intersect at x = 300, inside.
        assert!(should_merge(&a, &eq(0.0, 30.0, 400.0, 500.0), &cfg));
        // Left endpoints 10 px apart.
        assert!(should_merge(
            &eq(0.0, 10.0, 0.0, 100.0),
            &eq(0.001, 20.0, 0.0, 300.0),
            &cfg
        ));
    }

    fn split_groups(k: f64, b: f64, geom: &GridGeometry) -> Vec<CellGroup> {
        let line = LineSegment::new(LineKind::Convex, (0.0, b), (511.0, k * 511.0 + b));
        let (cv, _) = encode_lines(&[line], geom).unwrap();
        let dets = decode_cells(&cv, 0.0);
        let left: Vec<_> = dets.iter().filter(|d| d.col < 16).copied().collect();
        let right: Vec<_> = dets.iter().filter(|d| d.col >= 16).copied().collect();
        [left, right]
            .into_iter()
            .map(|mut members| {
                members.sort_by_key(|m| (m.row, m.col));
                let mut g = CellGroup { members, fitted: None };
                g.fitted = Some(fit_group(&g, geom).unwrap());
                g
            })
            .collect()
    }

    #[test]
    fn split_line_merges_back() {
        let geom = GridGeometry::default();
        let cfg = LinkerConfig::default();
        let groups = split_groups(0.1, 10.0, &geom);
        let merged = merge_groups(&groups, &cfg, &geom);
        assert_eq!(merged.len(), 1);
        assert!((merged[0].k - 0.1).abs() < 1e-6, "{:?}", merged[0]);
        assert!((merged[0].b - 10.0).abs() < 1e-4);
        assert_eq!(
            merged[0].source_cells,
            groups[0].members.len() + groups[1].members.len()
        );
    }

    #[test]
    fn parallel_lines_stay_apart() {
        let geom = GridGeometry::default();
        let cfg = LinkerConfig::default();
        let mut groups = split_groups(0.0, 10.0, &geom);
        groups.truncate(1);
        let mut far = split_groups(0.0, 100.0, &geom);
        groups.push(far.pop().unwrap());
        let merged = merge_groups(&groups, &cfg, &geom);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0], groups[0].fitted.unwrap());
        assert_eq!(merged[1], groups[1].fitted.unwrap());
    }

    #[test]
    fn blank_grids_give_nothing() {
        let geom = GridGeometry::default();
        let z = LabelPair::zeros(&geom, LineKind::Convex);
        let zc = LabelPair::zeros(&geom, LineKind::Concave);
        assert!(link_lines(&z, &zc, &LinkerConfig::default(), &geom).unwrap().is_empty());
    }

    #[test]
    fn stage_counts_are_monotone() {
        let geom = GridGeometry::default();
        let lines = [
            LineSegment::new(LineKind::Convex, (20.0, 100.0), (480.0, 110.0)),
            LineSegment::new(LineKind::Convex, (30.0, 200.0), (470.0, 205.0)),
            LineSegment::new(LineKind::Convex, (40.0, 300.0), (460.0, 298.0)),
        ];
        let (cv, _) = encode_lines(&lines, &geom).unwrap();
        let (eqs, st) = link_kind(&cv, &LinkerConfig::default(), &geom).unwrap();
        assert!(st.decoded >= st.thresholded);
        assert!(st.thresholded >= st.top_k);
        assert!(st.top_k >= st.after_singletons);
        assert_eq!(eqs.len(), 3);
    }
}
