use std::collections::HashMap;

use super::{PerceptionParams, PointCloud};
use crate::error::{DockError, Result};

/// Centroid distances closer than this are treated as ties.
const TIE_EPS: f64 = 1e-9;

/// Connected components of the graph linking points closer than
/// `cluster_tolerance`, keeping components whose size lies in
/// `[cluster_min_points, cluster_max_points]`, nearest centroid first.
pub fn euclidean_clusters(cloud: &PointCloud, params: &PerceptionParams) -> Result<Vec<PointCloud>> {
    let tol = params.cluster_tolerance;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(DockError::invalid("cluster_tolerance", "must be > 0"));
    }
    let n = cloud.len();
    let cell_of = |i: usize| {
        let p = &cloud.points[i];
        [
            (p.x / tol).floor() as i64,
            (p.y / tol).floor() as i64,
            (p.z / tol).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for i in 0..n {
        grid.entry(cell_of(i)).or_default().push(i);
    }

    let tol2 = tol * tol;
    let mut visited = vec![false; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut queue = Vec::new();
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        queue.clear();
        queue.push(seed);
        let mut members = Vec::new();
        while let Some(i) = queue.pop() {
            members.push(i);
            let c = cell_of(i);
            let p = cloud.points[i];
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let Some(bucket) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                            continue;
                        };
                        for &j in bucket {
                            if !visited[j] && (cloud.points[j] - p).norm_squared() <= tol2 {
                                visited[j] = true;
                                queue.push(j);
                            }
                        }
                    }
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }

    let mut clusters: Vec<(f64, PointCloud)> = components
        .into_iter()
        .filter(|m| m.len() >= params.cluster_min_points && m.len() <= params.cluster_max_points)
        .map(|m| {
            let pc: PointCloud = m.iter().map(|&i| cloud.points[i]).collect();
            let d = pc.centroid().map_or(f64::INFINITY, |c| c.coords.norm());
            (d, pc)
        })
        .collect();
    clusters.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(clusters.into_iter().map(|(_, pc)| pc).collect())
}

/// The cluster whose centroid is nearest the camera; ties go to the lower index.
pub fn select_object(clusters: &[PointCloud]) -> Result<&PointCloud> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in clusters.iter().enumerate() {
        let Some(centroid) = c.centroid() else {
            continue;
        };
        let d = centroid.coords.norm();
        match best {
            Some((_, bd)) if d >= bd - TIE_EPS => {}
            _ => best = Some((i, d)),
        }
    }
    best.map(|(i, _)| &clusters[i]).ok_or(DockError::NoObject)
}
