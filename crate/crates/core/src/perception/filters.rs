use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};

use super::{PerceptionParams, PointCloud};
use crate::error::{DockError, Result};

/// Keeps the points inside the closed pass-through box, preserving order.
pub fn passthrough_filter(cloud: &PointCloud, params: &PerceptionParams) -> PointCloud {
    cloud
        .points
        .iter()
        .filter(|p| params.passthrough_box.contains(p))
        .copied()
        .collect()
}

/// Replaces the points of every occupied voxel with their centroid.
///
/// Voxels are `floor(coord / voxel_size)` cells anchored at the camera
/// origin; the output is ordered by voxel index.
pub fn voxel_downsample(cloud: &PointCloud, voxel_size: f64) -> Result<PointCloud> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(DockError::invalid("voxel_size", "must be > 0"));
    }
    let mut buckets: BTreeMap<[i64; 3], (Vector3<f64>, usize)> = BTreeMap::new();
    for p in &cloud.points {
        let key = [
            (p.x / voxel_size).floor() as i64,
            (p.y / voxel_size).floor() as i64,
            (p.z / voxel_size).floor() as i64,
        ];
        let entry = buckets.entry(key).or_insert((Vector3::zeros(), 0));
        entry.0 += p.coords;
        entry.1 += 1;
    }
    Ok(buckets
        .into_values()
        .map(|(sum, n)| Point3::from(sum / n as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::Aabb;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn unit_box() -> PerceptionParams {
        PerceptionParams {
            passthrough_box: Aabb {
                min: [-1.0; 3],
                max: [1.0; 3],
            },
            ..PerceptionParams::default()
        }
    }

    #[test]
    fn passthrough_examples() {
        assert!(passthrough_filter(&PointCloud::default(), &unit_box()).is_empty());
        let cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)]);
        let out = passthrough_filter(&cloud, &unit_box());
        assert_eq!(out.points, vec![Point3::new(0.0, 0.0, 0.0)]);
        // closed box
        let edge = PointCloud::new(vec![Point3::new(1.0, -1.0, 1.0)]);
        assert_eq!(passthrough_filter(&edge, &unit_box()).len(), 1);
    }

    #[test]
    fn passthrough_matches_per_point_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cloud: PointCloud = (0..10_000)
            .map(|_| {
                Point3::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect();
        let expected: Vec<_> = cloud
            .points
            .iter()
            .filter(|p| p.x.abs() <= 1.0 && p.y.abs() <= 1.0 && p.z.abs() <= 1.0)
            .copied()
            .collect();
        let out = passthrough_filter(&cloud, &unit_box());
        assert_eq!(out.points, expected);
    }

    #[test]
    fn voxel_examples() {
        let single = PointCloud::new(vec![Point3::new(0.013, -0.4, 1.7)]);
        assert_eq!(voxel_downsample(&single, 0.02).unwrap(), single);

        let pair = PointCloud::new(vec![Point3::new(0.001, 0.001, 0.001), Point3::new(0.009, 0.005, 0.003)]);
        let out = voxel_downsample(&pair, 0.01).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out.points[0] - Point3::new(0.005, 0.003, 0.002)).norm() < 1e-15);

        assert!(voxel_downsample(&pair, 0.0).is_err());
    }

    #[test]
    fn voxel_matches_bucket_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let size = 0.1;
        let cloud: PointCloud = (0..5_000)
            .map(|_| {
                Point3::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(0.0..1.0),
                )
            })
            .collect();
        let mut buckets: HashMap<(i64, i64, i64), Vec<Point3<f64>>> = HashMap::new();
        for p in &cloud.points {
            let k = (
                (p.x / size).floor() as i64,
                (p.y / size).floor() as i64,
                (p.z / size).floor() as i64,
            );
            buckets.entry(k).or_default().push(*p);
        }
        let out = voxel_downsample(&cloud, size).unwrap();
        assert_eq!(out.len(), buckets.len());
        assert!(out.len() <= cloud.len());
        for q in &out.points {
            let k = (
                (q.x / size).floor() as i64,
                (q.y / size).floor() as i64,
                (q.z / size).floor() as i64,
            );
            let members = &buckets[&k];
            let mean = members.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / members.len() as f64;
            assert!((q.coords - mean).norm() < 1e-12);
        }
    }
}
