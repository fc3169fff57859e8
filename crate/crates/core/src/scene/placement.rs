use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SceneError;
use crate::rng;

/// Total resamples allowed for one scene before giving up.
pub const PLACEMENT_ATTEMPT_BUDGET: usize = 10_000;

/// Upper bound on total object area (using the largest size) as a fraction of the canvas.
const MAX_AREA_FRACTION: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub center: (i32, i32),
    pub size: u32,
}

/// Rejection-samples `count` non-overlapping circumcircles.
///
/// Sizes are uniform in `size_bounds` (inclusive), centers uniform in
/// `[size + margin, extent - size - margin]` on each axis, and every accepted pair
/// satisfies `dist(c_i, c_j) >= s_i + s_j + margin`. The output depends only on the
/// arguments.
pub fn place_objects(
    count: usize,
    size_bounds: (u32, u32),
    canvas: (u32, u32),
    margin: u32,
    seed: u64,
) -> Result<Vec<Placement>, SceneError> {
    let (min_size, max_size) = size_bounds;
    let (width, height) = canvas;
    let infeasible = |reason: String| SceneError::PlacementInfeasible {
        count,
        min_size,
        max_size,
        width,
        height,
        margin,
        reason,
    };
    if count == 0 {
        return Ok(Vec::new());
    }
    if margin < 1 {
        return Err(infeasible("margin must be at least 1 px".into()));
    }
    if min_size == 0 || min_size > max_size {
        return Err(infeasible("size bounds must satisfy 0 < min <= max".into()));
    }
    let area = count as f64 * std::f64::consts::PI * (max_size as f64).powi(2);
    if area > MAX_AREA_FRACTION * width as f64 * height as f64 {
        return Err(infeasible(format!("object area {area:.0} exceeds {MAX_AREA_FRACTION} of the canvas")));
    }
    let reach = max_size as i64 + margin as i64;
    if 2 * reach > width.min(height) as i64 {
        return Err(infeasible("objects do not fit inside the canvas".into()));
    }

    let mut rng = rng::stream(seed);
    let mut placed: Vec<Placement> = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while placed.len() < count {
        if attempts >= PLACEMENT_ATTEMPT_BUDGET {
            return Err(infeasible(format!(
                "placed {} of {count} after {PLACEMENT_ATTEMPT_BUDGET} attempts",
                placed.len()
            )));
        }
        attempts += 1;
        let size = rng.random_range(min_size..=max_size);
        let lo = (size + margin) as i32;
        let cx = rng.random_range(lo..=width as i32 - lo);
        let cy = rng.random_range(lo..=height as i32 - lo);
        let clear = placed.iter().all(|p| {
            let dx = (p.center.0 - cx) as i64;
            let dy = (p.center.1 - cy) as i64;
            let gap = (p.size + size + margin) as i64;
            dx * dx + dy * dy >= gap * gap
        });
        if clear {
            placed.push(Placement { center: (cx, cy), size });
        }
    }
    Ok(placed)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent brute-force gap check over all pairs.
    fn min_gap(ps: &[Placement]) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in ps.iter().enumerate() {
            for b in &ps[i + 1..] {
                let d = (((a.center.0 - b.center.0) as f64).powi(2) + ((a.center.1 - b.center.1) as f64).powi(2)).sqrt();
                best = best.min(d - a.size as f64 - b.size as f64);
            }
        }
        best
    }

    #[test]
    fn zero_count_is_empty() {
        assert!(place_objects(0, (8, 24), (512, 512), 4, 1).unwrap().is_empty());
    }

    #[test]
    fn single_object_golden() {
        let p = place_objects(1, (10, 10), (512, 512), 2, 7).unwrap();
        assert_eq!(p.len(), 1);
        let (x, y) = p[0].center;
        assert!((12..=500).contains(&x) && (12..=500).contains(&y));
        // Pinned from the PCG64 stream for seed 7.
        assert_eq!(p[0], Placement { center: GOLDEN_SEED7_CENTER, size: 10 });
    }

    const GOLDEN_SEED7_CENTER: (i32, i32) = (174, 132);

    #[test]
    fn fifty_objects_respect_margin() {
        let p = place_objects(50, (8, 14), (512, 512), 4, 3).unwrap();
        assert_eq!(p.len(), 50);
        assert!(min_gap(&p) >= 4.0);
        for q in &p {
            let s = q.size as i32;
            assert!(q.center.0 - s - 4 >= 0 && q.center.0 + s + 4 <= 512);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = place_objects(20, (8, 24), (512, 512), 4, 99).unwrap();
        let b = place_objects(20, (8, 24), (512, 512), 4, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_dense_is_infeasible() {
        let err = place_objects(500, (20, 24), (512, 512), 4, 1).unwrap_err();
        assert!(matches!(err, SceneError::PlacementInfeasible { .. }));
    }

    #[test]
    fn budget_exhaustion_is_infeasible() {
        // Area heuristic passes but the disks cannot all fit.
        let err = place_objects(2, (30, 30), (130, 130), 20, 5).unwrap_err();
        match err {
            SceneError::PlacementInfeasible { reason, .. } => assert!(reason.contains("attempts"), "{reason}"),
            other => panic!("{other}"),
        }
    }
}
