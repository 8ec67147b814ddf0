//! Concrete fiber maps.
//!
//! Only families with closed-form, branch-indexed inverses ship: the
//! exponential family `z ↦ η·eᶻ` (entire), the tangent family `z ↦ λ·tan z`
//! (meromorphic), and two polynomial sanity fixtures (`z²` with its known
//! circle Julia set, and the identity map used as a single-branch isometry
//! control). Closed-form inverses keep branch truncation analyzable and spare
//! us transcendental root finding.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Detection tolerance for poles and omitted values.
pub const POLE_TOL: f64 = 1e-14;
/// Residual tolerance for preimage/branch round trips, scaled by `1 + |w|`.
pub const RESIDUAL_TOL: f64 = 1e-10;

const TWO_PI: f64 = std::f64::consts::TAU;

/// A point of the Riemann sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl SpherePoint {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            SpherePoint::Finite(z) => Some(z),
            SpherePoint::Infinity => None,
        }
    }
}

impl From<Complex64> for SpherePoint {
    fn from(z: Complex64) -> Self {
        SpherePoint::Finite(z)
    }
}

impl From<f64> for SpherePoint {
    fn from(x: f64) -> Self {
        SpherePoint::Finite(Complex64::new(x, 0.0))
    }
}

/// The map family of a single fiber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// `z ↦ η·eᶻ`; entire, omitted value 0.
    RandomExp { eta: f64 },
    /// `z ↦ λ·tan z`; meromorphic, asymptotic values `±iλ`.
    RandomTangent { lambda: f64 },
    /// `z ↦ z²`; non-transcendental fixture with Julia set the unit circle.
    /// Excluded from transcendental-only condition checks.
    Square,
    /// `z ↦ z`; single-branch isometry fixture (negative control for
    /// contraction diagnostics).
    Identity,
}

/// Balanced-growth metadata `(α₁, α₂, κ)` declared per family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthExponents {
    pub alpha1: f64,
    pub alpha2: f64,
    pub kappa: f64,
}

impl GrowthExponents {
    pub fn alpha(&self) -> f64 {
        self.alpha1 + self.alpha2
    }
}

/// Declared growth profile for the characteristic function:
/// `ω(r) ≤ T̊(r) ≤ C_ρ·r^ρ` on the working range, with `ω(r) = c₀·r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthProfile {
    pub rho: f64,
    pub c_rho: f64,
    /// Slope of the increasing lower bound `ω(r) = omega_coeff · r`.
    pub omega_coeff: f64,
}

impl GrowthProfile {
    pub fn omega(&self, r: f64) -> f64 {
        self.omega_coeff * r
    }

    pub fn omega_inv(&self, y: f64) -> f64 {
        y / self.omega_coeff
    }
}

/// One transcendental fiber map with exact closed-form value, derivative and
/// inverse branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberMap {
    pub family: Family,
}

impl FiberMap {
    pub fn random_exp(eta: f64) -> Self {
        FiberMap {
            family: Family::RandomExp { eta },
        }
    }

    pub fn random_tangent(lambda: f64) -> Self {
        FiberMap {
            family: Family::RandomTangent { lambda },
        }
    }

    pub fn square() -> Self {
        FiberMap {
            family: Family::Square,
        }
    }

    pub fn identity() -> Self {
        FiberMap {
            family: Family::Identity,
        }
    }

    /// Declared `(α₁, α₂, κ)`; `None` for the identity fixture, which has no
    /// balanced-growth structure (`|f'| ≡ 1` forces `α₁ + α₂ = 0`).
    pub fn growth_exponents(&self) -> Option<GrowthExponents> {
        match self.family {
            Family::RandomExp { .. } => Some(GrowthExponents {
                alpha1: 0.0,
                alpha2: 1.0,
                kappa: 2.0,
            }),
            Family::RandomTangent { lambda } => Some(GrowthExponents {
                alpha1: 0.0,
                alpha2: 2.0,
                kappa: 2.0 * lambda.abs().max(1.0 / lambda.abs()),
            }),
            Family::Square => Some(GrowthExponents {
                alpha1: 0.5,
                alpha2: 0.5,
                kappa: 2.0,
            }),
            Family::Identity => None,
        }
    }

    /// Default growth profile of the family; the exponential and tangent
    /// families have order 1, the polynomial fixtures are `O(log r)` and get
    /// a nominal order-0 profile.
    pub fn default_growth_profile(&self) -> GrowthProfile {
        match self.family {
            Family::RandomExp { .. } | Family::RandomTangent { .. } => GrowthProfile {
                rho: 1.0,
                c_rho: 1.0,
                omega_coeff: 0.02,
            },
            Family::Square | Family::Identity => GrowthProfile {
                rho: 0.5,
                c_rho: 2.0,
                omega_coeff: 0.0,
            },
        }
    }

    /// Whether the family is genuinely transcendental (infinitely many
    /// inverse branches). The fixtures are excluded from transcendental-only
    /// checks.
    pub fn is_transcendental(&self) -> bool {
        matches!(
            self.family,
            Family::RandomExp { .. } | Family::RandomTangent { .. }
        )
    }

    /// Finite singular values (critical and asymptotic values) relevant for
    /// inverse-branch domains.
    pub fn singular_values(&self) -> Vec<Complex64> {
        match self.family {
            Family::RandomExp { .. } => vec![Complex64::new(0.0, 0.0)],
            Family::RandomTangent { lambda } => vec![
                Complex64::new(0.0, lambda),
                Complex64::new(0.0, -lambda),
            ],
            Family::Square => vec![Complex64::new(0.0, 0.0)],
            Family::Identity => vec![],
        }
    }

    fn nearest_pole_distance(&self, z: Complex64) -> Option<f64> {
        match self.family {
            Family::RandomTangent { .. } => {
                // poles at π/2 + kπ
                let k = ((z.re - std::f64::consts::FRAC_PI_2) / std::f64::consts::PI).round();
                let pole_re = std::f64::consts::FRAC_PI_2 + k * std::f64::consts::PI;
                Some((z - Complex64::new(pole_re, 0.0)).norm())
            }
            _ => None,
        }
    }

    /// `f(z)`. Errors when `z` is within [`POLE_TOL`] of a pole.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        match self.family {
            Family::RandomExp { eta } => Ok(eta * z.exp()),
            Family::RandomTangent { lambda } => {
                if self.nearest_pole_distance(z).unwrap() < POLE_TOL {
                    return Err(Error::PoleProximity { tol: POLE_TOL });
                }
                Ok(lambda * z.tan())
            }
            Family::Square => Ok(z * z),
            Family::Identity => Ok(z),
        }
    }

    /// `f(z)` on the sphere; pole proximity maps to the point at infinity.
    pub fn eval_sphere(&self, z: Complex64) -> SpherePoint {
        match self.eval(z) {
            Ok(w) => SpherePoint::Finite(w),
            Err(_) => SpherePoint::Infinity,
        }
    }

    /// Exact closed-form `f'(z)`.
    pub fn deriv(&self, z: Complex64) -> Result<Complex64> {
        match self.family {
            Family::RandomExp { eta } => Ok(eta * z.exp()),
            Family::RandomTangent { lambda } => {
                if self.nearest_pole_distance(z).unwrap() < POLE_TOL {
                    return Err(Error::PoleProximity { tol: POLE_TOL });
                }
                let c = z.cos();
                Ok(lambda / (c * c))
            }
            Family::Square => Ok(2.0 * z),
            Family::Identity => Ok(Complex64::new(1.0, 0.0)),
        }
    }

    /// Spherical derivative `f#(z) = |f'(z)| / (1 + |f(z)|²)`.
    ///
    /// Evaluated through per-family cancellation-free forms, so it is smooth
    /// through the poles of the tangent family:
    /// `f#(z) = |λ| / (|cos z|² + λ²·|sin z|²)`.
    pub fn spherical_deriv(&self, z: Complex64) -> f64 {
        match self.family {
            Family::RandomExp { eta } => {
                let u = (eta * z.exp()).norm();
                u / (1.0 + u * u)
            }
            Family::RandomTangent { lambda } => {
                let c2 = z.cos().norm_sqr();
                let s2 = z.sin().norm_sqr();
                lambda.abs() / (c2 + lambda * lambda * s2)
            }
            Family::Square => {
                let r = z.norm();
                2.0 * r / (1.0 + r.powi(4))
            }
            Family::Identity => 1.0 / (1.0 + z.norm_sqr()),
        }
    }

    /// Values `w` with no preimages at all (so the branch solver must refuse
    /// them).
    pub fn is_omitted(&self, w: Complex64) -> bool {
        match self.family {
            Family::RandomExp { .. } => w.norm() < POLE_TOL,
            Family::RandomTangent { lambda } => {
                (w - Complex64::new(0.0, lambda)).norm() < POLE_TOL
                    || (w + Complex64::new(0.0, lambda)).norm() < POLE_TOL
            }
            Family::Square | Family::Identity => false,
        }
    }

    /// Enumerated preimages `f(z_k) = w` for branch indices `k` in
    /// `branch_range`, sorted by `|Im z|` (exponential) or `|k|` (tangent).
    ///
    /// The fixtures only have branches `0` (identity) and `0, 1` (square);
    /// indices outside that range are silently clamped out.
    pub fn preimages(
        &self,
        w: Complex64,
        branch_range: std::ops::RangeInclusive<i64>,
    ) -> Result<Vec<(i64, Complex64)>> {
        if branch_range.is_empty() {
            return Err(Error::EmptyBranchRange);
        }
        if self.is_omitted(w) {
            return Err(Error::OmittedValue(format!("{w}")));
        }
        let (lo, hi) = (*branch_range.start(), *branch_range.end());
        let mut out: Vec<(i64, Complex64)> = Vec::new();
        match self.family {
            Family::RandomExp { eta } => {
                let base = (w / eta).ln(); // principal log
                for k in lo..=hi {
                    out.push((k, base + Complex64::new(0.0, TWO_PI * k as f64)));
                }
                out.sort_by(|a, b| {
                    a.1.im
                        .abs()
                        .partial_cmp(&b.1.im.abs())
                        .unwrap()
                        .then(a.0.cmp(&b.0))
                });
            }
            Family::RandomTangent { lambda } => {
                let base = (w / lambda).atan(); // principal arctan
                for k in lo..=hi {
                    out.push((k, base + Complex64::new(std::f64::consts::PI * k as f64, 0.0)));
                }
                out.sort_by(|a, b| a.0.abs().cmp(&b.0.abs()).then(a.0.cmp(&b.0)));
            }
            Family::Square => {
                let r = w.sqrt(); // principal branch
                for k in lo.max(0)..=hi.min(1) {
                    out.push((k, if k == 0 { r } else { -r }));
                }
            }
            Family::Identity => {
                if lo <= 0 && hi >= 0 {
                    out.push((0, w));
                }
            }
        }
        Ok(out)
    }

    /// A holomorphic inverse branch through `(w, z0)`, valid on `𝔻(w, r)`.
    ///
    /// Preconditions: `f(z0) = w` within the residual tolerance, `f'(z0) ≠ 0`
    /// and the disk avoids the family's singular values. The branch is
    /// realized by a continuity-tracked closed form anchored at `z0`.
    pub fn inverse_branch(&self, w: Complex64, z0: Complex64, r: f64) -> Result<InverseBranch> {
        let fz0 = self.eval(z0)?;
        if (fz0 - w).norm() > RESIDUAL_TOL * (1.0 + w.norm()) {
            return Err(Error::BranchMismatch(format!(
                "anchor residual |f(z0) - w| = {:e}",
                (fz0 - w).norm()
            )));
        }
        let dz0 = self.deriv(z0)?;
        if dz0.norm() < POLE_TOL {
            return Err(Error::SingularValueInDisk(
                "anchor is a critical point".into(),
            ));
        }
        for s in self.singular_values() {
            if (s - w).norm() <= r {
                return Err(Error::SingularValueInDisk(format!(
                    "singular value {s} within radius {r} of {w}"
                )));
            }
        }
        Ok(InverseBranch {
            map: *self,
            w,
            z0,
            radius: r,
        })
    }

    /// Empirical check of the two-sided derivative growth bound on sampled
    /// Julia points. `kappa_fit` is the largest two-sided ratio
    /// `max(q, 1/q)` with `q = |f'(z)| / ((1+|z|)^{α₁}(1+|f(z)|)^{α₂})`.
    pub fn check_balanced_growth(&self, samples: &[Complex64]) -> Result<GrowthReport> {
        let exps = self.growth_exponents().ok_or_else(|| {
            Error::HypothesisViolation("identity fixture has no balanced-growth exponents".into())
        })?;
        if samples.len() < 100 {
            return Err(Error::InsufficientSamples {
                need: 100,
                got: samples.len(),
            });
        }
        let mut kappa_fit: f64 = 1.0;
        let mut used = 0usize;
        for &z in samples {
            let (f, df) = match (self.eval(z), self.deriv(z)) {
                (Ok(f), Ok(df)) => (f, df),
                _ => continue, // pole-adjacent sample; not in the domain of the bound
            };
            let envelope = (1.0 + z.norm()).powf(exps.alpha1) * (1.0 + f.norm()).powf(exps.alpha2);
            let q = df.norm() / envelope;
            if q <= 0.0 || !q.is_finite() {
                continue;
            }
            kappa_fit = kappa_fit.max(q.max(1.0 / q));
            used += 1;
        }
        if used < 100 {
            return Err(Error::InsufficientSamples {
                need: 100,
                got: used,
            });
        }
        Ok(GrowthReport {
            kappa_fit,
            kappa_declared: exps.kappa,
            pass: kappa_fit <= exps.kappa,
            samples_used: used,
        })
    }
}

/// Outcome of [`FiberMap::check_balanced_growth`].
#[derive(Debug, Clone, Copy)]
pub struct GrowthReport {
    pub kappa_fit: f64,
    pub kappa_declared: f64,
    pub pass: bool,
    pub samples_used: usize,
}

/// A continuity-tracked holomorphic inverse branch `g` with `f(g(u)) = u` on
/// `𝔻(w, r)` and `g(w) = z0`.
#[derive(Debug, Clone, Copy)]
pub struct InverseBranch {
    map: FiberMap,
    w: Complex64,
    z0: Complex64,
    radius: f64,
}

impl InverseBranch {
    pub fn anchor(&self) -> (Complex64, Complex64) {
        (self.w, self.z0)
    }

    /// Evaluate the branch at `u ∈ 𝔻(w, r)`.
    pub fn eval(&self, u: Complex64) -> Result<Complex64> {
        if (u - self.w).norm() > self.radius * (1.0 + 1e-12) {
            return Err(Error::BranchMismatch(format!(
                "evaluation point outside the branch disk (|u - w| = {} > r = {})",
                (u - self.w).norm(),
                self.radius
            )));
        }
        let z = match self.map.family {
            // g(u) = z0 + Log(u/w); the disk avoids 0, so u/w stays in the
            // right half plane and the principal log is continuous.
            Family::RandomExp { .. } => self.z0 + (u / self.w).ln(),
            // tan(g(u) - z0) = λ(u - w)/(λ² + u·w), an exact addition-formula
            // rearrangement of λ·tan g(u) = u.
            Family::RandomTangent { lambda } => {
                let t = lambda * (u - self.w) / (Complex64::new(lambda * lambda, 0.0) + u * self.w);
                self.z0 + t.atan()
            }
            Family::Square => self.z0 * (u / self.w).sqrt(),
            Family::Identity => u,
        };
        let residual = (self.map.eval(z)? - u).norm();
        if residual > RESIDUAL_TOL * (1.0 + u.norm()) {
            return Err(Error::BranchMismatch(format!(
                "branch residual {residual:e} at u = {u}"
            )));
        }
        Ok(z)
    }
}

/// Translation data realizing the base-point normalization: a point
/// `z_x ∈ 𝒥_x ∩ 𝔻̄_T` whose image stays in `𝒥_{θ(x)} ∩ 𝔻̄_T`.
#[derive(Debug, Clone, Copy)]
pub struct NormalizationData {
    pub t_radius: f64,
    pub base_point: Complex64,
    /// Translation offset used for the conjugation `z ↦ z + z_x`.
    pub offset: Complex64,
    /// Distance from `f(z_x)` to the target constraint set.
    pub image_gap: f64,
}

/// Searches each fiber's Julia approximation for a base point `z_x` with
/// `|z_x| ≤ T` and `f_x(z_x)` within `tol` of the next fiber's approximation
/// intersected with `𝔻̄_T`.
///
/// `julia_points[i]` must approximate `𝒥` of the fiber of `maps[i]`, and
/// `julia_points[i + 1]` of its image fiber; `tol` is typically ten grid
/// spacings.
pub fn normalize(
    maps: &[FiberMap],
    julia_points: &[Vec<Complex64>],
    t_radius: f64,
    tol: f64,
) -> Result<Vec<NormalizationData>> {
    assert_eq!(julia_points.len(), maps.len() + 1);
    let mut out = Vec::with_capacity(maps.len());
    for (i, map) in maps.iter().enumerate() {
        let targets: Vec<Complex64> = julia_points[i + 1]
            .iter()
            .copied()
            .filter(|z| z.norm() <= t_radius + tol)
            .collect();
        let mut best: Option<(f64, Complex64)> = None;
        for &z in julia_points[i].iter().filter(|z| z.norm() <= t_radius) {
            let fz = match map.eval(z) {
                Ok(fz) => fz,
                Err(_) => continue,
            };
            if fz.norm() > t_radius + tol {
                continue;
            }
            let gap = targets
                .iter()
                .map(|&t| (t - fz).norm())
                .fold(f64::INFINITY, f64::min);
            if best.map_or(true, |(g, _)| gap < g) {
                best = Some((gap, z));
            }
        }
        match best {
            Some((gap, z)) if gap <= tol => out.push(NormalizationData {
                t_radius,
                base_point: z,
                offset: z,
                image_gap: gap,
            }),
            _ => return Err(Error::NoBasePoint { radius: t_radius }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_closed_forms() {
        let exp = FiberMap::random_exp(0.2);
        assert_abs_diff_eq!(exp.eval(c(0.0, 0.0)).unwrap().re, 0.2, epsilon = 1e-15);
        let at_i_pi = exp.eval(c(0.0, std::f64::consts::PI)).unwrap();
        assert_abs_diff_eq!(at_i_pi.re, -0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(at_i_pi.im, 0.0, epsilon = 1e-15);

        let tan = FiberMap::random_tangent(0.5);
        assert_abs_diff_eq!(
            tan.eval(c(std::f64::consts::FRAC_PI_4, 0.0)).unwrap().re,
            0.5,
            epsilon = 1e-14
        );
        assert!(matches!(
            tan.eval(c(std::f64::consts::FRAC_PI_2, 0.0)),
            Err(Error::PoleProximity { .. })
        ));
    }

    #[test]
    fn deriv_closed_forms() {
        let exp = FiberMap::random_exp(0.2);
        assert_abs_diff_eq!(exp.deriv(c(0.0, 0.0)).unwrap().re, 0.2, epsilon = 1e-15);

        let sq = FiberMap::square();
        let d = sq.deriv(c(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(d.re, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.im, 2.0, epsilon = 1e-15);

        let tan = FiberMap::random_tangent(0.5);
        assert_abs_diff_eq!(tan.deriv(c(0.0, 0.0)).unwrap().re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn derivative_identities_hold_pointwise() {
        // RandomExp: f' = f; RandomTangent: f' = λ + f²/λ
        let exp = FiberMap::random_exp(0.2);
        let tan = FiberMap::random_tangent(0.5);
        for &z in &[c(0.3, -0.2), c(1.0, 1.0), c(-2.0, 0.7), c(0.0, 2.0)] {
            let (f, df) = (exp.eval(z).unwrap(), exp.deriv(z).unwrap());
            assert!((df - f).norm() < 1e-12);
            let (g, dg) = (tan.eval(z).unwrap(), tan.deriv(z).unwrap());
            assert!((dg - (0.5 + g * g / 0.5)).norm() < 1e-12);
        }
    }

    #[test]
    fn spherical_deriv_values() {
        let exp = FiberMap::random_exp(0.2);
        assert_abs_diff_eq!(
            exp.spherical_deriv(c(0.0, 0.0)),
            0.2 / 1.04,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(FiberMap::square().spherical_deriv(c(0.0, 0.0)), 0.0);
        assert_abs_diff_eq!(
            FiberMap::random_tangent(1.0).spherical_deriv(c(0.0, 0.0)),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn spherical_deriv_smooth_through_poles() {
        let tan = FiberMap::random_tangent(0.5);
        let pole = c(std::f64::consts::FRAC_PI_2, 0.0);
        let at_pole = tan.spherical_deriv(pole);
        // f# = 1/λ at a pole of λ·tan
        assert_abs_diff_eq!(at_pole, 2.0, epsilon = 1e-12);
        let near = tan.spherical_deriv(pole + c(1e-9, 1e-9));
        assert_abs_diff_eq!(near, at_pole, epsilon = 1e-6);
    }

    #[test]
    fn exp_preimages_ladder() {
        let exp = FiberMap::random_exp(0.2);
        let pre = exp.preimages(c(0.2, 0.0), -2..=2).unwrap();
        assert_eq!(pre.len(), 5);
        // sorted by |Im|: 0 first, then ±2πi, then ±4πi
        assert_abs_diff_eq!(pre[0].1.norm(), 0.0, epsilon = 1e-14);
        for (k, z) in &pre {
            assert_abs_diff_eq!(z.im, TWO_PI * *k as f64, epsilon = 1e-12);
            assert!((exp.eval(*z).unwrap() - c(0.2, 0.0)).norm() < RESIDUAL_TOL * 1.2);
        }
        let one = exp
            .preimages(c(0.2 * std::f64::consts::E, 0.0), 0..=0)
            .unwrap();
        assert_abs_diff_eq!(one[0].1.re, 1.0, epsilon = 1e-14);
        assert!(matches!(
            exp.preimages(c(0.0, 0.0), -1..=1),
            Err(Error::OmittedValue(_))
        ));
    }

    #[test]
    fn tangent_preimages_ladder() {
        let tan = FiberMap::random_tangent(0.5);
        let pre = tan.preimages(c(0.5, 0.0), 0..=1).unwrap();
        assert_abs_diff_eq!(pre[0].1.re, std::f64::consts::FRAC_PI_4, epsilon = 1e-14);
        assert_abs_diff_eq!(
            pre[1].1.re,
            std::f64::consts::FRAC_PI_4 + std::f64::consts::PI,
            epsilon = 1e-14
        );
    }

    #[test]
    fn branch_separation_is_exact() {
        let exp = FiberMap::random_exp(0.2);
        let pre = exp.preimages(c(0.7, 0.3), -3..=3).unwrap();
        for (ka, za) in &pre {
            for (kb, zb) in &pre {
                assert_abs_diff_eq!(
                    (za.im - zb.im).abs(),
                    TWO_PI * (ka - kb).abs() as f64,
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn empty_branch_range_is_an_error() {
        let exp = FiberMap::random_exp(0.2);
        #[allow(clippy::reversed_empty_ranges)]
        let r = exp.preimages(c(0.2, 0.0), 2..=-2);
        assert!(matches!(r, Err(Error::EmptyBranchRange)));
    }

    #[test]
    fn inverse_branch_tracks_the_anchor() {
        let exp = FiberMap::random_exp(0.2);
        let z0 = c(0.0, TWO_PI);
        let g = exp.inverse_branch(c(0.2, 0.0), z0, 0.15).unwrap();
        let back = g.eval(c(0.2, 0.0)).unwrap();
        assert!((back - z0).norm() < 1e-12);

        // same branch continued along two charts (one disk would swallow the
        // omitted value 0): 0.2e pulls back to 1 + 2πi. Newton refinement
        // from the anchor is the cross-check.
        let mid = c(0.32, 0.0);
        let g1 = exp.inverse_branch(c(0.2, 0.0), z0, 0.15).unwrap();
        let z_mid = g1.eval(mid).unwrap();
        let g2 = exp.inverse_branch(mid, z_mid, 0.3).unwrap();
        let u = c(0.2 * std::f64::consts::E, 0.0);
        let z = g2.eval(u).unwrap();
        let mut newton = z0;
        for _ in 0..60 {
            let f = exp.eval(newton).unwrap();
            newton -= (f - u) / exp.deriv(newton).unwrap();
        }
        assert!((z - c(1.0, TWO_PI)).norm() < 1e-10, "z = {z}");
        assert!((z - newton).norm() < 1e-9);
    }

    #[test]
    fn inverse_branch_tangent_anchor() {
        let tan = FiberMap::random_tangent(0.5);
        let z0 = c(std::f64::consts::PI, 0.0);
        let g = tan.inverse_branch(c(0.0, 0.0), z0, 0.3).unwrap();
        let back = g.eval(c(0.0, 0.0)).unwrap();
        assert!((back - z0).norm() < 1e-12);
        // nearby targets stay on the same branch
        let z = g.eval(c(0.1, 0.05)).unwrap();
        assert!((tan.eval(z).unwrap() - c(0.1, 0.05)).norm() < 1e-12);
        assert!((z - z0).norm() < 0.5);
    }

    #[test]
    fn inverse_branch_rejects_singular_disks() {
        let exp = FiberMap::random_exp(0.2);
        // disk around w = 0.1 with radius 0.2 contains the omitted value 0
        assert!(matches!(
            exp.inverse_branch(c(0.1, 0.0), exp.preimages(c(0.1, 0.0), 0..=0).unwrap()[0].1, 0.2),
            Err(Error::SingularValueInDisk(_))
        ));
    }

    #[test]
    fn inverse_branch_derivative_matches_reciprocal() {
        let exp = FiberMap::random_exp(0.2);
        let z0 = exp.preimages(c(0.5, 0.2), 1..=1).unwrap()[0].1;
        let g = exp.inverse_branch(c(0.5, 0.2), z0, 0.2).unwrap();
        let h = 1e-6;
        let u = c(0.5, 0.2);
        let dg = (g.eval(u + c(h, 0.0)).unwrap() - g.eval(u - c(h, 0.0)).unwrap()) / (2.0 * h);
        let expected = 1.0 / exp.deriv(z0).unwrap();
        assert!((dg - expected).norm() / expected.norm() < 1e-6);
    }

    #[test]
    fn balanced_growth_exp_passes_with_kappa_two() {
        let exp = FiberMap::random_exp(0.2);
        // samples with |f(z)| ≥ 1: the two-sided ratio is in [1/2, 1], κ = 2 passes
        let samples: Vec<Complex64> = (0..200)
            .map(|i| c(2.0 + 0.01 * i as f64, 0.1 * i as f64))
            .filter(|&z| exp.eval(z).unwrap().norm() >= 1.0)
            .collect();
        assert!(samples.len() >= 100);
        let report = exp.check_balanced_growth(&samples).unwrap();
        assert!(report.pass, "kappa_fit = {}", report.kappa_fit);
        assert!(report.kappa_fit <= 2.0);
    }

    #[test]
    fn balanced_growth_requires_samples() {
        let exp = FiberMap::random_exp(0.2);
        assert!(matches!(
            exp.check_balanced_growth(&[c(1.0, 0.0)]),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn normalize_square_fixture() {
        // unit circle points; T = 2; the fixed point 1 qualifies
        let circle: Vec<Complex64> = (0..256)
            .map(|i| Complex64::from_polar(1.0, TWO_PI * i as f64 / 256.0))
            .collect();
        let maps = [FiberMap::square()];
        let clouds = vec![circle.clone(), circle];
        let data = normalize(&maps, &clouds, 2.0, 0.05).unwrap();
        assert!(data[0].base_point.norm() <= 2.0);
        assert!(data[0].image_gap <= 0.05);

        // degenerate: T smaller than dist(0, 𝒥) → no candidate
        let clouds2 = vec![
            vec![c(1.0, 0.0), c(0.0, 1.0)],
            vec![c(1.0, 0.0), c(0.0, 1.0)],
        ];
        assert!(matches!(
            normalize(&maps, &clouds2, 0.5, 0.01),
            Err(Error::NoBasePoint { .. })
        ));
    }
}
