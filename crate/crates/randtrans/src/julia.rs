//! Backward-orbit approximation of random Julia sets.
//!
//! The fiberwise Julia set is realized as the closure of shrinking inverse
//! branches of seed points pulled back along the orbit. The cloud for fiber
//! `x` is produced by one sweep: seeds are injected at every fiber of the
//! forward orbit, preimages are taken level by level through
//! `f_{θ^{n-1}(x)}, …, f_x`, branches whose accumulated derivative fails the
//! shrinking threshold are discarded, and points are deduplicated on a fixed
//! lattice. Points carry the depth at which they were produced and the
//! accumulated `log|(f^n)'|` along their branch word.

use num_complex::Complex64;

use crate::fit;
use crate::grid::{FiberGrid, SpatialIndex};
use crate::maps::{Family, FiberMap};
use crate::{Error, Result};

/// One point of a Julia cloud.
#[derive(Debug, Clone)]
pub struct CloudPoint {
    pub z: Complex64,
    /// Pullback depth at which the point was produced (0 for injected seeds).
    pub depth: u32,
    /// `log |(f^depth)'(z)|` accumulated along the branch word.
    pub log_deriv: f64,
    /// Branch indices from this point back up to its seed (kept only when
    /// requested; pipelines drop them to save memory).
    pub word: Option<Vec<i32>>,
}

/// Approximation of `𝒥_x ∩ 𝔻̄_{r_max}` for one fiber.
#[derive(Debug, Clone)]
pub struct JuliaCloud {
    pub fiber: usize,
    pub r_max: f64,
    pub points: Vec<CloudPoint>,
}

/// Tuning knobs for the pullback.
#[derive(Debug, Clone, Copy)]
pub struct CloudOptions {
    /// Shrinking threshold `1 < η < γ`: branches with
    /// `|(f^{-n})'| > η^{-n}` are discarded.
    pub eta_shrink: f64,
    /// Deduplication lattice spacing.
    pub h_dedup: f64,
    /// Cap on points kept per level (deepest points win).
    pub max_points_per_level: usize,
    /// Keep branch words on cloud points (for invariance checks).
    pub keep_words: bool,
}

impl Default for CloudOptions {
    fn default() -> Self {
        CloudOptions {
            eta_shrink: 1.05,
            h_dedup: 0.015,
            max_points_per_level: 5000,
            keep_words: false,
        }
    }
}

/// Smallest branch-index span whose preimages can reach `𝔻̄_{r_max}`.
fn branch_span(map: &FiberMap, r_max: f64) -> i64 {
    match map.family {
        Family::RandomExp { .. } => (r_max / std::f64::consts::TAU).ceil() as i64 + 1,
        Family::RandomTangent { .. } => (r_max / std::f64::consts::PI).ceil() as i64 + 1,
        Family::Square => 1,
        Family::Identity => 0,
    }
}

/// Default seed points believed to lie on (or very near) the Julia set:
/// a repelling fixed point when the family has an accessible one.
pub fn default_seeds(map: &FiberMap) -> Vec<Complex64> {
    match map.family {
        Family::RandomExp { eta } => {
            // η·e^p = p has a repelling root above 1 when η < 1/e
            let f = |p: f64| eta * p.exp() - p;
            if f(1.0) < 0.0 {
                let (mut lo, mut hi) = (1.0f64, 60.0f64);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                vec![Complex64::new(0.5 * (lo + hi), 0.0)]
            } else {
                vec![Complex64::new(1.0, 1.0)]
            }
        }
        Family::RandomTangent { lambda } => {
            if lambda.abs() > 1.0 {
                vec![Complex64::new(0.0, 0.0)]
            } else {
                // λ·tan z = z has a repelling root in (π, 3π/2)
                let f = |p: f64| lambda * p.tan() - p;
                let (mut lo, mut hi) =
                    (std::f64::consts::PI + 1e-3, 1.5 * std::f64::consts::PI - 1e-3);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                vec![Complex64::new(0.5 * (lo + hi), 0.0)]
            }
        }
        Family::Square => vec![Complex64::new(1.0, 0.0)],
        Family::Identity => vec![Complex64::new(1.0, 0.0)],
    }
}

fn lattice_key(z: Complex64, h: f64) -> (i64, i64) {
    ((z.re / h).round() as i64, (z.im / h).round() as i64)
}

/// Pull seed points back through `maps = [f_x, …, f_{θ^{n-1}(x)}]` and return
/// the cloud at fiber `x` (index `fiber`). `seeds(j)` supplies the injected
/// points for the fiber at orbit offset `j` (0-based from `x`).
pub fn approximate_julia(
    fiber: usize,
    maps: &[FiberMap],
    r_max: f64,
    seeds: impl Fn(usize) -> Vec<Complex64>,
    opts: &CloudOptions,
) -> Result<JuliaCloud> {
    let depth = maps.len();
    let log_shrink = opts.eta_shrink.ln();
    let make_seeds = |level: usize, keep_words: bool| -> Vec<CloudPoint> {
        seeds(level)
            .into_iter()
            .filter(|z| z.norm() <= r_max)
            .map(|z| CloudPoint {
                z,
                depth: 0,
                log_deriv: 0.0,
                word: if keep_words { Some(Vec::new()) } else { None },
            })
            .collect()
    };
    let mut current: Vec<CloudPoint> = make_seeds(depth, opts.keep_words);
    for j in (0..depth).rev() {
        let map = &maps[j];
        let span = branch_span(map, r_max);
        let mut next: Vec<CloudPoint> = Vec::new();
        for p in &current {
            let pre = match map.preimages(p.z, -span..=span) {
                Ok(pre) => pre,
                Err(_) => continue, // omitted value; this parent has no branches
            };
            for (k, z) in pre {
                if z.norm() > r_max {
                    continue;
                }
                let dz = match map.deriv(z) {
                    Ok(d) => d.norm(),
                    Err(_) => continue,
                };
                if dz <= 0.0 {
                    continue;
                }
                let log_deriv = p.log_deriv + dz.ln();
                let d = p.depth + 1;
                // shrinking branch: |(f^{-d})'| ≤ η^{-d}  ⇔  log|(f^d)'| ≥ d·log η
                if log_deriv < d as f64 * log_shrink {
                    continue;
                }
                let word = p.word.as_ref().map(|w| {
                    let mut w2 = Vec::with_capacity(w.len() + 1);
                    w2.push(k as i32);
                    w2.extend_from_slice(w);
                    w2
                });
                next.push(CloudPoint {
                    z,
                    depth: d,
                    log_deriv,
                    word,
                });
            }
        }
        // deeper points first so deduplication keeps the better representative
        next.sort_by(|a, b| {
            b.depth
                .cmp(&a.depth)
                .then(a.z.re.partial_cmp(&b.z.re).unwrap())
                .then(a.z.im.partial_cmp(&b.z.im).unwrap())
        });
        next.extend(make_seeds(j, opts.keep_words));
        let mut seen = std::collections::HashSet::new();
        let mut deduped: Vec<CloudPoint> = Vec::new();
        for p in next {
            if seen.insert(lattice_key(p.z, opts.h_dedup)) {
                deduped.push(p);
            }
        }
        // stratified cap: an even per-depth quota (leftovers to the deepest
        // strata) keeps every pullback depth represented, which the
        // expansion fit needs
        if deduped.len() > opts.max_points_per_level {
            let mut strata: std::collections::BTreeMap<u32, Vec<CloudPoint>> =
                std::collections::BTreeMap::new();
            for p in deduped {
                strata.entry(p.depth).or_default().push(p);
            }
            let quota = (opts.max_points_per_level / strata.len()).max(1);
            let mut kept: Vec<CloudPoint> = Vec::with_capacity(opts.max_points_per_level);
            let mut leftover = Vec::new();
            for (_, mut stratum) in std::mem::take(&mut strata) {
                if stratum.len() > quota {
                    leftover.extend(stratum.split_off(quota));
                }
                kept.extend(stratum);
            }
            // deepest leftovers first
            leftover.sort_by(|a, b| b.depth.cmp(&a.depth));
            let room = opts.max_points_per_level.saturating_sub(kept.len());
            kept.extend(leftover.into_iter().take(room));
            deduped = kept;
        }
        current = deduped;
    }
    if current.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(JuliaCloud {
        fiber,
        r_max,
        points: current,
    })
}

impl JuliaCloud {
    pub fn positions(&self) -> Vec<Complex64> {
        self.points.iter().map(|p| p.z).collect()
    }

    /// Extract a registered grid keeping points of depth at least
    /// `min_depth`, capped at `max_points` (deepest first).
    pub fn to_grid(&self, min_depth: u32, max_points: usize, cell_hint: f64) -> Result<FiberGrid> {
        let mut pts: Vec<&CloudPoint> =
            self.points.iter().filter(|p| p.depth >= min_depth).collect();
        pts.sort_by(|a, b| {
            b.depth
                .cmp(&a.depth)
                .then(a.z.re.partial_cmp(&b.z.re).unwrap())
                .then(a.z.im.partial_cmp(&b.z.im).unwrap())
        });
        pts.truncate(max_points);
        if pts.is_empty() {
            return Err(Error::EmptyCloud);
        }
        // fixed spatial order makes downstream summation order reproducible
        let mut positions: Vec<Complex64> = pts.iter().map(|p| p.z).collect();
        positions.sort_by(|a, b| {
            a.re.partial_cmp(&b.re)
                .unwrap()
                .then(a.im.partial_cmp(&b.im).unwrap())
        });
        Ok(FiberGrid::new(self.fiber, positions, cell_hint.max(1e-9)))
    }
}

/// Fit of the uniform expansion bound `|(f^n)'| ≥ c·γⁿ` over cloud points.
#[derive(Debug, Clone, Copy)]
pub struct ExpansionFit {
    pub c: f64,
    pub gamma: f64,
    /// Lower edge of the ~95% confidence interval for γ.
    pub gamma_ci_low: f64,
    pub r_squared: f64,
    pub pass: bool,
}

/// Fits `log(min over depth-n points of |(f^n)'|) ≈ log c + n·log γ`.
pub fn expansion_constants(cloud: &JuliaCloud) -> Result<ExpansionFit> {
    let mut min_by_depth: std::collections::BTreeMap<u32, f64> = std::collections::BTreeMap::new();
    for p in &cloud.points {
        if p.depth == 0 {
            continue;
        }
        let e = min_by_depth.entry(p.depth).or_insert(f64::INFINITY);
        *e = e.min(p.log_deriv);
    }
    let pts: Vec<(f64, f64)> = min_by_depth
        .iter()
        .map(|(&n, &v)| (n as f64, v))
        .collect();
    if pts.len() < 3 {
        return Err(Error::FitFailure(format!(
            "need at least 3 depth levels with points, got {}",
            pts.len()
        )));
    }
    let fit = fit::line_fit(&pts).ok_or_else(|| Error::FitFailure("degenerate depths".into()))?;
    let gamma = fit.slope.exp();
    let gamma_ci_low = (fit.slope - fit.slope_ci95()).exp();
    Ok(ExpansionFit {
        c: fit.intercept.exp(),
        gamma,
        gamma_ci_low,
        r_squared: fit.r_squared,
        pass: gamma_ci_low > 1.0,
    })
}

/// Outcome of the mixing-time search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingOutcome {
    Found(usize),
    CapExceeded,
}

/// Caps for [`mixing_time`].
#[derive(Debug, Clone, Copy)]
pub struct MixingOptions {
    /// Covering resolution: every target point must be within this distance
    /// of a forward image.
    pub h_cover: f64,
    /// Max base points of the start cloud tested.
    pub max_centers: usize,
    /// Max sample points per disk.
    pub max_disk_sample: usize,
    /// Forward images of a depth-`d` point are trusted for `n ≤ d − margin`:
    /// expansion amplifies the pullback error again on the way forward.
    pub depth_margin: u32,
    /// Target points shallower than this carry too much pullback error to be
    /// meaningful covering goals.
    pub min_target_depth: u32,
}

impl Default for MixingOptions {
    fn default() -> Self {
        MixingOptions {
            h_cover: 0.06,
            max_centers: 24,
            max_disk_sample: 400,
            depth_margin: 6,
            min_target_depth: 6,
        }
    }
}

/// Smallest `n` such that for every tested `z` in `cloud_0 ∩ 𝔻̄_R` the
/// forward image of the cloud sample of `𝔻(z, r)` covers
/// `clouds[n] ∩ 𝔻̄_R` within `h_cover`. `clouds[n]` must approximate the
/// fiber at orbit offset `n` and `maps[j]` the map leaving offset `j`.
pub fn mixing_time(
    maps: &[FiberMap],
    clouds: &[JuliaCloud],
    r: f64,
    big_r: f64,
    opts: &MixingOptions,
) -> Result<MixingOutcome> {
    assert!(clouds.len() >= 2 && maps.len() >= clouds.len() - 1);
    let start = &clouds[0];
    'depth: for n in 1..clouds.len() {
        // only points deep enough to survive n forward steps participate
        let need = n as u32 + opts.depth_margin;
        let usable: Vec<Complex64> = start
            .points
            .iter()
            .filter(|p| p.depth >= need)
            .map(|p| p.z)
            .collect();
        if usable.is_empty() {
            continue 'depth;
        }
        let centers: Vec<Complex64> = {
            let mut cs: Vec<Complex64> =
                usable.iter().copied().filter(|z| z.norm() <= big_r).collect();
            if cs.is_empty() {
                continue 'depth;
            }
            let stride = (cs.len() / opts.max_centers).max(1);
            cs = cs.into_iter().step_by(stride).collect();
            cs
        };
        let index = SpatialIndex::build(&usable, r.max(1e-12));
        for &z in &centers {
            let mut sample: Vec<Complex64> = index
                .within(&usable, z, r)
                .into_iter()
                .map(|i| usable[i])
                .collect();
            let stride = (sample.len() / opts.max_disk_sample).max(1);
            sample = sample.into_iter().step_by(stride).collect();
            sample.push(z);
            // forward images through n fibers
            let mut images = sample;
            for map in maps.iter().take(n) {
                images = images
                    .iter()
                    .filter_map(|&p| map.eval(p).ok())
                    .filter(|w| w.is_finite() && w.norm() < 1e12)
                    .collect();
            }
            if images.is_empty() {
                continue 'depth;
            }
            let image_index = SpatialIndex::build(&images, opts.h_cover.max(1e-12));
            for tp in clouds[n]
                .points
                .iter()
                .filter(|p| p.z.norm() <= big_r && p.depth >= opts.min_target_depth)
            {
                match image_index.nearest(&images, tp.z) {
                    Some((_, d)) if d <= opts.h_cover => {}
                    _ => continue 'depth,
                }
            }
        }
        return Ok(MixingOutcome::Found(n));
    }
    Ok(MixingOutcome::CapExceeded)
}

/// Hausdorff distance between two finite point sets.
pub fn hausdorff_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let one_sided = |from: &[Complex64], to: &[Complex64]| -> f64 {
        let index = SpatialIndex::build(to, 0.05);
        from.iter()
            .map(|&z| index.nearest(to, z).map(|(_, d)| d).unwrap_or(f64::INFINITY))
            .fold(0.0f64, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

/// Estimated topological-hyperbolicity margin: half the minimum distance
/// from cloud points to the truncated forward orbits of the family's
/// singular values. Reported, never assumed.
pub fn hyperbolicity_margin(maps: &[FiberMap], cloud: &JuliaCloud, orbit_len: usize) -> f64 {
    let mut postsingular: Vec<Complex64> = Vec::new();
    for (j, map) in maps.iter().enumerate() {
        for s in map.singular_values() {
            let mut z = s;
            postsingular.push(z);
            for fwd in maps.iter().skip(j) {
                match fwd.eval(z) {
                    Ok(w) if w.norm() < 1e6 => {
                        z = w;
                        postsingular.push(z);
                    }
                    _ => break,
                }
            }
            if postsingular.len() > orbit_len * 64 {
                break;
            }
        }
    }
    if postsingular.is_empty() {
        return f64::INFINITY;
    }
    let index = SpatialIndex::build(&postsingular, 0.1);
    cloud
        .points
        .iter()
        .map(|p| {
            index
                .nearest(&postsingular, p.z)
                .map(|(_, d)| d)
                .unwrap_or(f64::INFINITY)
        })
        .fold(f64::INFINITY, f64::min)
        / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square_cloud(depth: usize, keep_words: bool) -> JuliaCloud {
        let maps = vec![FiberMap::square(); depth];
        let opts = CloudOptions {
            eta_shrink: 1.1,
            h_dedup: 0.001,
            max_points_per_level: 20_000,
            keep_words,
        };
        approximate_julia(
            0,
            &maps,
            2.0,
            |_| vec![Complex64::new(2.0, 0.0)],
            &opts,
        )
        .unwrap()
    }

    #[test]
    fn depth_zero_gives_back_the_seeds() {
        let cloud = approximate_julia(
            0,
            &[],
            2.0,
            |_| vec![Complex64::new(2.0, 0.0), Complex64::new(0.5, 0.5)],
            &CloudOptions::default(),
        )
        .unwrap();
        assert_eq!(cloud.points.len(), 2);
        assert!(cloud.points.iter().all(|p| p.depth == 0));
    }

    #[test]
    fn square_cloud_approaches_the_unit_circle() {
        // points of depth d sit at radius 2^(1/2^d); depth ≥ 7 puts the
        // radial error under 0.006 and the union of depths 7..12 is dense
        let cloud = square_cloud(12, false);
        let deep: Vec<Complex64> = cloud
            .points
            .iter()
            .filter(|p| p.depth >= 7)
            .map(|p| p.z)
            .collect();
        assert!(deep.len() > 500);
        let circle: Vec<Complex64> = (0..4096)
            .map(|i| Complex64::from_polar(1.0, std::f64::consts::TAU * i as f64 / 4096.0))
            .collect();
        let d = hausdorff_distance(&deep, &circle);
        assert!(d < 0.01, "hausdorff distance {d}");
    }

    #[test]
    fn cloud_points_return_along_their_branch_word() {
        let cloud = square_cloud(8, true);
        let seed = Complex64::new(2.0, 0.0);
        let map = FiberMap::square();
        for p in cloud.points.iter().filter(|p| p.depth > 0).take(200) {
            let word = p.word.as_ref().unwrap();
            assert_eq!(word.len(), p.depth as usize);
            let mut z = p.z;
            for _ in word {
                z = map.eval(z).unwrap();
            }
            assert!((z - seed).norm() < 1e-8, "returned to {z}");
        }
    }

    #[test]
    fn doubling_depth_is_hausdorff_stable() {
        let h_dedup = 0.001;
        let a = square_cloud(10, false);
        let b = square_cloud(20, false);
        let pa: Vec<Complex64> = a.points.iter().filter(|p| p.depth >= 4).map(|p| p.z).collect();
        let pb: Vec<Complex64> = b.points.iter().filter(|p| p.depth >= 4).map(|p| p.z).collect();
        assert!(hausdorff_distance(&pa, &pb) < 2.0 * h_dedup + 0.01);
    }

    #[test]
    fn exp_cloud_is_nonempty_in_the_right_half_plane() {
        let etas = [0.1, 0.15, 0.2, 0.25, 0.3];
        let maps: Vec<FiberMap> = (0..10).map(|i| FiberMap::random_exp(etas[i % 5])).collect();
        let opts = CloudOptions {
            h_dedup: 0.015,
            ..CloudOptions::default()
        };
        let cloud = approximate_julia(0, &maps, 30.0, |j| {
            default_seeds(&maps[j.min(maps.len() - 1)])
        }, &opts)
        .unwrap();
        let deep: Vec<&CloudPoint> = cloud.points.iter().filter(|p| p.depth >= 3).collect();
        assert!(deep.len() > 100, "only {} deep points", deep.len());
        for p in &deep {
            assert!(p.z.norm() <= 30.0);
            assert!(p.z.re > 0.0, "cloud point {} left of the imaginary axis", p.z);
        }
    }

    #[test]
    fn backward_invariance_at_desk_scale() {
        // one more pullback level maps forward to within 1e-8 of a parent
        let maps = vec![FiberMap::square(); 9];
        let opts = CloudOptions {
            eta_shrink: 1.1,
            h_dedup: 0.001,
            max_points_per_level: 20_000,
            keep_words: false,
        };
        let shallow = approximate_julia(0, &maps[..8], 2.0, |_| vec![Complex64::new(2.0, 0.0)], &opts).unwrap();
        let deeper = approximate_julia(0, &maps, 2.0, |_| vec![Complex64::new(2.0, 0.0)], &opts).unwrap();
        let parents = shallow.positions();
        let index = SpatialIndex::build(&parents, 0.01);
        let map = FiberMap::square();
        for p in deeper.points.iter().filter(|p| p.depth >= 6).take(300) {
            let fz = map.eval(p.z).unwrap();
            let (_, d) = index.nearest(&parents, fz).unwrap();
            assert!(d < 2.0 * 0.001 + 1e-8, "forward image strayed {d}");
        }
    }

    #[test]
    fn expansion_fit_on_synthetic_geometric_data() {
        // f(z) = 2z fixture: |(f^n)'| = 2ⁿ exactly
        let points = (1..=10)
            .flat_map(|n| {
                (0..5).map(move |i| CloudPoint {
                    z: Complex64::new(i as f64, n as f64),
                    depth: n,
                    log_deriv: n as f64 * 2.0f64.ln(),
                    word: None,
                })
            })
            .collect();
        let cloud = JuliaCloud {
            fiber: 0,
            r_max: 100.0,
            points,
        };
        let fit = expansion_constants(&cloud).unwrap();
        assert_abs_diff_eq!(fit.gamma, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.c, 1.0, epsilon = 1e-9);
        assert!(fit.pass);

        // contracting fixture f(z) = z/2 must fail
        let points = (1..=10)
            .flat_map(|n| {
                (0..5).map(move |i| CloudPoint {
                    z: Complex64::new(i as f64, n as f64),
                    depth: n,
                    log_deriv: -(n as f64) * 2.0f64.ln(),
                    word: None,
                })
            })
            .collect();
        let cloud = JuliaCloud {
            fiber: 0,
            r_max: 100.0,
            points,
        };
        let fit = expansion_constants(&cloud).unwrap();
        assert!(fit.gamma < 1.0);
        assert!(!fit.pass);
    }

    #[test]
    fn expansion_fit_on_square_cloud() {
        let fit = expansion_constants(&square_cloud(12, false)).unwrap();
        // |f'| = 2|z| ≈ 2 on the unit circle
        assert_abs_diff_eq!(fit.gamma, 2.0, epsilon = 0.1);
        assert!(fit.pass);
    }

    #[test]
    fn mixing_time_on_the_circle() {
        // every fiber of the square fixture has the same cloud
        let cloud = square_cloud(14, false);
        let maps = vec![FiberMap::square(); 6];
        let clouds: Vec<JuliaCloud> = (0..=6).map(|_| cloud.clone()).collect();
        let outcome = mixing_time(
            &maps,
            &clouds,
            0.5,
            1.05,
            &MixingOptions {
                h_cover: 0.05,
                ..MixingOptions::default()
            },
        )
        .unwrap();
        match outcome {
            MixingOutcome::Found(n) => assert!(n <= 5, "mixing time {n}"),
            MixingOutcome::CapExceeded => panic!("no mixing time found"),
        }
    }

    #[test]
    fn empty_cloud_is_an_error() {
        // seeds outside the truncation radius leave nothing
        let maps = [FiberMap::square()];
        let r = approximate_julia(
            0,
            &maps,
            0.5,
            |_| vec![Complex64::new(10.0, 0.0)],
            &CloudOptions::default(),
        );
        assert!(matches!(r, Err(Error::EmptyCloud)));
    }
}
