//! Decay of correlations and central-limit statistics for the invariant
//! family `μ_x = ρ_x·ν_x`.
//!
//! Correlations are computed through the transfer-operator identity
//! `∫ (g_{θⁿ(x)}∘f_x^n)·h_x dμ_x = ∫ g_{θⁿ(x)}·ℒ̂_x^n(h_x·ρ_x) dν_{θⁿ(x)}`,
//! which is exact at grid level; trajectory Monte Carlo is kept as the
//! independent route, estimating the same quantities by sampling instead of
//! summation. Birkhoff sums are simulated along the forward Markov chain
//! induced by the operator discretization ([`ForwardKernel`]): the invariant
//! family is exactly stationary for that chain, and — unlike raw double-
//! precision orbits, which expansion ejects from the Julia set within a few
//! steps — the walk stays on the grids for arbitrarily many steps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fit;
use crate::gibbs::GibbsFamily;
use crate::grid::GridDensity;
use crate::transfer::{ForwardKernel, OrbitData, PotentialConfig};
use crate::{Error, Result};

/// A per-fiber observable evaluated at grid points.
pub trait Observable {
    fn eval(&self, fiber: usize, z: num_complex::Complex64) -> f64;
}

impl<F: Fn(usize, num_complex::Complex64) -> f64> Observable for F {
    fn eval(&self, fiber: usize, z: num_complex::Complex64) -> f64 {
        self(fiber, z)
    }
}

/// Sample an observable on a fiber grid.
fn sample_observable(
    orbit: &OrbitData,
    fiber: usize,
    obs: &impl Observable,
) -> GridDensity {
    GridDensity {
        fiber: orbit.grids[fiber].fiber,
        values: orbit.grids[fiber]
            .points
            .iter()
            .map(|&z| obs.eval(fiber, z))
            .collect(),
    }
}

/// Center a sampled observable against `μ` on its fiber.
fn centered(
    family: &GibbsFamily,
    fiber: usize,
    raw: &GridDensity,
) -> Result<(GridDensity, f64)> {
    let mu = family.mu(fiber);
    let mean = mu.integrate(raw)? / mu.mass();
    Ok((
        GridDensity {
            fiber: raw.fiber,
            values: raw.values.iter().map(|v| v - mean).collect(),
        },
        mean,
    ))
}

/// Correlation sequence with its geometric fit.
#[derive(Debug, Clone)]
pub struct CorrelationReport {
    pub ns: Vec<usize>,
    /// Fiber-averaged absolute correlations per `n`.
    pub values: Vec<f64>,
    /// Signed fiber-averaged correlations (Green–Kubo input).
    pub signed: Vec<f64>,
    pub theta_corr: f64,
    pub b_fit: f64,
    pub r_squared: f64,
    /// `h` was not centered and has been re-centered here.
    pub recentered: bool,
}

/// Correlations `∫ (g∘fⁿ)·h dμ` via the operator identity, averaged over
/// `start_fibers`; `h` is centered fiberwise (re-centering is flagged, not
/// fatal).
pub fn correlation(
    orbit: &OrbitData,
    family: &GibbsFamily,
    cfg: &PotentialConfig,
    g_obs: &impl Observable,
    h_obs: &impl Observable,
    ns: &[usize],
    start_fibers: &[usize],
) -> Result<CorrelationReport> {
    let n_max = *ns.iter().max().unwrap_or(&0);
    let mut per_fiber: Vec<Vec<f64>> = Vec::new();
    let mut recentered = false;
    for &j in start_fibers {
        assert!(j + n_max < family.window);
        let h_raw = sample_observable(orbit, j, h_obs);
        let (h_c, mean) = centered(family, j, &h_raw)?;
        if mean.abs() > 1e-10 {
            recentered = true;
        }
        // u_k = ℒ̂ᵏ(h_c·ρ_j), advanced incrementally
        let mut u = GridDensity {
            fiber: h_c.fiber,
            values: h_c
                .values
                .iter()
                .zip(&family.rhos[j].values)
                .map(|(h, r)| h * r)
                .collect(),
        };
        let mut row = vec![0.0f64; ns.len()];
        let mut k = 0usize;
        for (slot, &n) in ns.iter().enumerate() {
            while k < n {
                let (raw, _) = orbit.apply(j + k, &u, cfg)?;
                u = raw.scale(1.0 / family.lambdas[j + k]);
                k += 1;
            }
            let g_sample = sample_observable(orbit, j + n, g_obs);
            let weighted: f64 = g_sample
                .values
                .iter()
                .zip(&u.values)
                .zip(&family.nus[j + n].weights)
                .map(|((g, u), w)| g * u * w)
                .sum();
            row[slot] = weighted;
        }
        per_fiber.push(row);
    }
    let m = per_fiber.len() as f64;
    let values: Vec<f64> = (0..ns.len())
        .map(|i| per_fiber.iter().map(|r| r[i].abs()).sum::<f64>() / m)
        .collect();
    let signed: Vec<f64> = (0..ns.len())
        .map(|i| per_fiber.iter().map(|r| r[i]).sum::<f64>() / m)
        .collect();
    let gfit = fit::geometric_fit(
        &ns.iter().map(|&n| n as f64).collect::<Vec<_>>(),
        &values,
    );
    let (theta_corr, b_fit, r_squared) = match gfit {
        Some(f) => (f.theta, f.amplitude, f.r_squared),
        None => (0.0, 0.0, 1.0), // exactly zero correlations (centered constant)
    };
    Ok(CorrelationReport {
        ns: ns.to_vec(),
        values,
        signed,
        theta_corr,
        b_fit,
        r_squared,
        recentered,
    })
}

/// Build the forward kernel for the step leaving fiber `j`.
fn kernel_at(
    orbit: &OrbitData,
    family: &GibbsFamily,
    cfg: &PotentialConfig,
    j: usize,
) -> crate::Result<ForwardKernel> {
    ForwardKernel::build(
        &orbit.maps[j],
        &orbit.grids[j],
        &orbit.grids[j + 1],
        &family.nus[j + 1],
        cfg,
    )
}

/// Draw a start index from the atoms of `μ` at fiber `j`.
fn sample_mu_start(family: &GibbsFamily, j: usize, rng: &mut ChaCha8Rng) -> usize {
    let mu = family.mu(j);
    let total = mu.mass();
    let mut draw = rng.gen::<f64>() * total;
    for (i, w) in mu.weights.iter().enumerate() {
        draw -= w;
        if draw <= 0.0 {
            return i;
        }
    }
    mu.weights.len() - 1
}

/// Trajectory Monte-Carlo estimate of `∫ (g∘fⁿ)·h dμ` at one start fiber,
/// with its standard error — the independent estimation route checking
/// [`correlation`]. Trajectories follow the discretization's own forward
/// kernel, so the estimator is unbiased for the operator-route value and
/// the discrepancy is purely Monte-Carlo noise.
pub fn correlation_monte_carlo(
    orbit: &OrbitData,
    family: &GibbsFamily,
    cfg: &PotentialConfig,
    g_obs: &impl Observable,
    h_obs: &impl Observable,
    n: usize,
    start_fiber: usize,
    trajectories: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let j = start_fiber;
    let h_raw = sample_observable(orbit, j, h_obs);
    let (h_c, _) = centered(family, j, &h_raw)?;
    let kernels: Vec<ForwardKernel> = (0..n)
        .map(|step| kernel_at(orbit, family, cfg, j + step))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(trajectories);
    let mut dead_ends = 0usize;
    for _ in 0..trajectories {
        let start = sample_mu_start(family, j, &mut rng);
        let mut idx = start;
        let mut ok = true;
        for kernel in &kernels {
            match kernel.step(idx, rng.gen::<f64>()) {
                Some(next) => idx = next,
                None => {
                    ok = false;
                    dead_ends += 1;
                    break;
                }
            }
        }
        if ok {
            samples.push(g_obs.eval(j + n, orbit.grids[j + n].points[idx]) * h_c.values[start]);
        }
    }
    if samples.len() < trajectories / 2 {
        return Err(Error::HypothesisViolation(format!(
            "kernel dead ends starved the sampler ({dead_ends} of {trajectories})"
        )));
    }
    let (mean, var) = fit::mean_var(&samples);
    Ok((mean, (var / samples.len() as f64).sqrt()))
}

/// Central-limit diagnostics for a Birkhoff sum.
#[derive(Debug, Clone)]
pub struct CltReport {
    pub n: usize,
    pub samples: usize,
    pub sigma2: f64,
    /// σ² recomputed with the correlation-sum truncation doubled.
    pub sigma2_doubled: f64,
    pub ks_statistic: f64,
    pub p_value: f64,
    pub escapes: usize,
    /// σ² ≈ 0: the observable is (numerically) a coboundary and the
    /// normalized sums degenerate.
    pub coboundary: bool,
    /// Normalized sums `S_n/√n` for external histogramming.
    pub normalized_sums: Vec<f64>,
}

/// Green–Kubo variance: `σ² = Var_μ(ψ) + 2·Σ_k corr_k`, truncated at
/// `k_cap` or when terms drop below `1e-4·Var_μ(ψ)`.
pub fn green_kubo_sigma2(
    orbit: &OrbitData,
    family: &GibbsFamily,
    cfg: &PotentialConfig,
    psi: &impl Observable,
    start_fibers: &[usize],
    k_cap: usize,
) -> Result<f64> {
    let mut var0 = 0.0;
    for &j in start_fibers {
        let raw = sample_observable(orbit, j, psi);
        let (c, _) = centered(family, j, &raw)?;
        let mu = family.mu(j);
        let second: f64 = c
            .values
            .iter()
            .zip(&mu.weights)
            .map(|(v, w)| v * v * w)
            .sum();
        var0 += second / mu.mass();
    }
    var0 /= start_fibers.len() as f64;
    let ks: Vec<usize> = (1..=k_cap).collect();
    let report = correlation(orbit, family, cfg, psi, psi, &ks, start_fibers)?;
    let mut sigma2 = var0;
    for (i, &_k) in ks.iter().enumerate() {
        let term = report.signed[i];
        if term.abs() < 1e-4 * var0 && i > 2 {
            break;
        }
        sigma2 += 2.0 * term;
    }
    Ok(sigma2)
}

/// Simulates `S_n ψ / √n` along the discretization's forward chain and
/// tests it against `Normal(0, σ²)` with σ² from the Green–Kubo sum.
///
/// The limit law is the global (annealed) one, over the product of the base
/// measure and the fiber measures, so walkers sample both: each starts from
/// the `μ` atoms of a fiber drawn uniformly from
/// `[start_fiber, start_fiber + start_spread)` — the orbit window stands in
/// for base sampling by ergodicity. A single common start fiber (spread 1)
/// would sample the quenched law instead, whose finite-`n` fiber shift
/// distorts the Kolmogorov–Smirnov comparison.
///
/// `start_fiber` should sit past the invariant-density burn-in: the early
/// fibers of a [`GibbsFamily`] carry unconverged `ρ`, and centering against
/// them would bias the whole sum.
#[allow(clippy::too_many_arguments)]
pub fn birkhoff_clt(
    orbit: &OrbitData,
    family: &GibbsFamily,
    cfg: &PotentialConfig,
    psi: &impl Observable,
    start_fiber: usize,
    start_spread: usize,
    n: usize,
    samples: usize,
    seed: u64,
    k_cap: usize,
    sigma_fibers: &[usize],
) -> Result<CltReport> {
    let spread = start_spread.max(1);
    assert!(start_fiber + spread - 1 + n < family.window);
    if samples < 500 {
        return Err(Error::InsufficientSamples {
            need: 500,
            got: samples,
        });
    }
    // per-fiber centering values across the staggered window
    let last_fiber = start_fiber + spread - 1 + n;
    let mut centered_psi: Vec<GridDensity> = Vec::with_capacity(last_fiber - start_fiber);
    for j in start_fiber..last_fiber {
        let raw = sample_observable(orbit, j, psi);
        centered_psi.push(centered(family, j, &raw)?.0);
    }
    let sigma2 = green_kubo_sigma2(orbit, family, cfg, psi, sigma_fibers, k_cap)?;
    let sigma2_doubled = green_kubo_sigma2(orbit, family, cfg, psi, sigma_fibers, 2 * k_cap)?;
    if sigma2 <= 1e-10 {
        return Ok(CltReport {
            n,
            samples,
            sigma2,
            sigma2_doubled,
            ks_statistic: f64::NAN,
            p_value: 0.0,
            escapes: 0,
            coboundary: true,
            normalized_sums: Vec::new(),
        });
    }
    // staggered walkers advance fiber by fiber so only one kernel is alive
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<usize> = (0..samples)
        .map(|_| (rng.gen::<u64>() % spread as u64) as usize)
        .collect();
    let mut walkers: Vec<usize> = offsets
        .iter()
        .map(|&off| sample_mu_start(family, start_fiber + off, &mut rng))
        .collect();
    let mut accs = vec![0.0f64; samples];
    let mut escapes = 0usize;
    for f in start_fiber..last_fiber {
        let slot = f - start_fiber;
        let mut any_stepping = false;
        for ((walker, acc), &off) in walkers.iter().zip(accs.iter_mut()).zip(&offsets) {
            let begin = off;
            let end = off + n;
            if slot >= begin && slot < end {
                *acc += centered_psi[slot].values[*walker];
                if slot + 1 < end {
                    any_stepping = true;
                }
            }
        }
        if any_stepping && f + 1 < last_fiber {
            let kernel = kernel_at(orbit, family, cfg, f)?;
            for ((walker, &off), acc) in walkers.iter_mut().zip(&offsets).zip(accs.iter()) {
                let _ = acc;
                if slot >= off && slot + 1 < off + n {
                    match kernel.step(*walker, rng.gen::<f64>()) {
                        Some(next) => *walker = next,
                        None => {
                            // μ-null atom (cannot happen from μ starts, but a
                            // restart keeps the walk total-mass correct)
                            escapes += 1;
                            *walker = sample_mu_start(family, f + 1, &mut rng);
                        }
                    }
                }
            }
        }
    }
    let sums: Vec<f64> = accs.iter().map(|a| a / (n as f64).sqrt()).collect();
    let (ks_statistic, p_value) = ks_test_normal(&sums, sigma2.sqrt());
    Ok(CltReport {
        n,
        samples,
        sigma2,
        sigma2_doubled,
        ks_statistic,
        p_value,
        escapes,
        coboundary: false,
        normalized_sums: sums,
    })
}

/// Kolmogorov–Smirnov statistic and asymptotic p-value of `values` against
/// `Normal(0, σ)`.
pub fn ks_test_normal(values: &[f64], sigma: f64) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &v) in sorted.iter().enumerate() {
        let cdf = normal_cdf(v / sigma);
        let hi = (i as f64 + 1.0) / n - cdf;
        let lo = cdf - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    (d, ks_p_value(n.sqrt() * d))
}

/// `Φ(x)` via the complementary error function (Abramowitz–Stegun 7.1.26,
/// |error| < 1.5e-7, ample for the KS distances involved).
fn normal_cdf(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.3275911 * x.abs() / std::f64::consts::SQRT_2);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf = 1.0 - poly * (-(x / std::f64::consts::SQRT_2).powi(2)).exp();
    let erf = if x >= 0.0 { erf } else { -erf };
    0.5 * (1.0 + erf)
}

/// Asymptotic Kolmogorov distribution tail `Q(λ) = 2Σ (−1)^{k−1} e^{−2k²λ²}`.
fn ks_p_value(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1.0f64).powi(k as i32 - 1) * (-2.0 * (k as f64 * lambda).powi(2)).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// `U*ψ = ℒ̂(ρ·ψ)/ρ∘θ`, the dual of the Koopman operator on the invariant
/// family.
pub fn koopman_dual_apply(
    orbit: &OrbitData,
    family: &GibbsFamily,
    cfg: &PotentialConfig,
    fiber: usize,
    psi: &GridDensity,
) -> Result<GridDensity> {
    let rho = &family.rhos[fiber];
    let rho_next = &family.rhos[fiber + 1];
    if rho_next.min_value() < 1e-12 || rho.min_value() < 1e-12 {
        return Err(Error::DegenerateDensity { min: 1e-12 });
    }
    let product = GridDensity {
        fiber: psi.fiber,
        values: psi
            .values
            .iter()
            .zip(&rho.values)
            .map(|(p, r)| p * r)
            .collect(),
    };
    let (raw, _) = orbit.apply(fiber, &product, cfg)?;
    let scaled = raw.scale(1.0 / family.lambdas[fiber]);
    Ok(GridDensity {
        fiber: scaled.fiber,
        values: scaled
            .values
            .iter()
            .zip(&rho_next.values)
            .map(|(v, r)| v / r)
            .collect(),
    })
}

/// Gordin-condition diagnostic: the `L²(μ)` norms of the iterated dual
/// images decay geometrically and their partial sums converge.
#[derive(Debug, Clone)]
pub struct GordinReport {
    /// `(k, ‖U*ᵏψ‖_{L²(μ_{j+k})})`.
    pub terms: Vec<(usize, f64)>,
    pub theta_fit: f64,
    pub r_squared: f64,
    pub partial_sum: f64,
}

pub fn gordin_diagnostic(
    orbit: &OrbitData,
    family: &GibbsFamily,
    cfg: &PotentialConfig,
    psi: &impl Observable,
    start_fiber: usize,
    k_max: usize,
) -> Result<GordinReport> {
    let j = start_fiber;
    let raw = sample_observable(orbit, j, psi);
    let (mut u, _) = centered(family, j, &raw)?;
    let mut terms = Vec::new();
    let mut partial = 0.0;
    for k in 1..=k_max {
        u = koopman_dual_apply(orbit, family, cfg, j + k - 1, &u)?;
        let mu = family.mu(j + k);
        let l2: f64 = u
            .values
            .iter()
            .zip(&mu.weights)
            .map(|(v, w)| v * v * w)
            .sum::<f64>()
            .sqrt();
        partial += l2;
        terms.push((k, l2));
    }
    let gfit = fit::geometric_fit(
        &terms.iter().map(|(k, _)| *k as f64).collect::<Vec<_>>(),
        &terms.iter().map(|(_, v)| *v).collect::<Vec<_>>(),
    )
    .ok_or_else(|| Error::FitFailure("gordin terms degenerate".into()))?;
    Ok(GordinReport {
        terms,
        theta_fit: gfit.theta,
        r_squared: gfit.r_squared,
        partial_sum: partial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::{gibbs_family, ReferenceKind};
    use crate::grid::FiberGrid;
    use crate::maps::FiberMap;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn identity_setup(fibers: usize) -> (OrbitData, GibbsFamily, PotentialConfig) {
        let pts: Vec<Complex64> = (0..80)
            .map(|i| Complex64::from_polar(0.2 + 0.1 * (i % 20) as f64, 0.31 * i as f64))
            .collect();
        let maps = vec![FiberMap::identity(); fibers - 1];
        let grids = (0..fibers)
            .map(|j| FiberGrid::new(j, pts.clone(), 0.05))
            .collect();
        let orbit = OrbitData::new(maps, grids);
        let cfg = PotentialConfig::default_fixture();
        let family =
            gibbs_family(&orbit, &cfg, fibers - 2, 1, ReferenceKind::UniformAll).unwrap();
        (orbit, family, cfg)
    }

    #[test]
    fn centered_constant_has_zero_correlation() {
        let (orbit, family, cfg) = identity_setup(12);
        let g = |_: usize, z: Complex64| z.re;
        let h = |_: usize, _: Complex64| 3.0; // constant: centered to 0
        let report =
            correlation(&orbit, &family, &cfg, &g, &h, &[0, 1, 2, 4], &[0, 1]).unwrap();
        for v in &report.values {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_step_correlation_is_plain_covariance() {
        let (orbit, family, cfg) = identity_setup(8);
        let g = |_: usize, z: Complex64| z.re;
        let h = |_: usize, z: Complex64| z.re + z.im;
        let report = correlation(&orbit, &family, &cfg, &g, &h, &[0], &[0]).unwrap();
        // direct covariance against μ
        let mu = family.mu(0);
        let g_s = GridDensity::from_fn(&orbit.grids[0], |z| z.re);
        let h_s = GridDensity::from_fn(&orbit.grids[0], |z| z.re + z.im);
        let mh = mu.integrate(&h_s).unwrap() / mu.mass();
        let cov: f64 = orbit.grids[0]
            .points
            .iter()
            .enumerate()
            .map(|(i, _)| g_s.values[i] * (h_s.values[i] - mh) * mu.weights[i])
            .sum();
        assert_abs_diff_eq!(report.signed[0], cov, epsilon = 1e-12);
    }

    #[test]
    fn correlation_is_bilinear() {
        let (orbit, family, cfg) = identity_setup(10);
        let g1 = |_: usize, z: Complex64| z.re;
        let g2 = |_: usize, z: Complex64| z.im * z.im;
        let h = |_: usize, z: Complex64| (z.re * 3.0).sin();
        let ns = [2usize];
        let a = correlation(&orbit, &family, &cfg, &g1, &h, &ns, &[0]).unwrap();
        let b = correlation(&orbit, &family, &cfg, &g2, &h, &ns, &[0]).unwrap();
        let combo = |f: usize, z: Complex64| 2.0 * g1(f, z) - 0.5 * g2(f, z);
        let c = correlation(&orbit, &family, &cfg, &combo, &h, &ns, &[0]).unwrap();
        assert_abs_diff_eq!(
            c.signed[0],
            2.0 * a.signed[0] - 0.5 * b.signed[0],
            epsilon = 1e-10
        );
    }

    #[test]
    fn koopman_dual_fixes_the_constant() {
        let (orbit, family, cfg) = identity_setup(8);
        let one = GridDensity::constant(&orbit.grids[0], 1.0);
        let out = koopman_dual_apply(&orbit, &family, &cfg, 0, &one).unwrap();
        // U*1 = ℒ̂ρ/ρ∘θ = 1 when ρ is exactly invariant (identity fixture)
        for v in &out.values {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-9);
        }
        let zero = GridDensity::constant(&orbit.grids[0], 0.0);
        let out = koopman_dual_apply(&orbit, &family, &cfg, 0, &zero).unwrap();
        assert_eq!(out.sup_norm(), 0.0);
    }

    #[test]
    fn ks_machinery_on_iid_gaussian_fixture() {
        // classical-CLT oracle: i.i.d. uniform increments
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 2000;
        let m = 5000;
        let var_one: f64 = 1.0 / 12.0; // Var of U(-1/2, 1/2)
        let sums: Vec<f64> = (0..m)
            .map(|_| {
                let s: f64 = (0..n).map(|_| rng.gen::<f64>() - 0.5).sum();
                s / (n as f64).sqrt()
            })
            .collect();
        let (d, p) = ks_test_normal(&sums, var_one.sqrt());
        assert!(p > 0.01, "iid fixture failed KS: D = {d}, p = {p}");
        // wrong σ must be rejected
        let (_, p_bad) = ks_test_normal(&sums, 3.0 * var_one.sqrt());
        assert!(p_bad < 1e-6);
    }

    #[test]
    fn ks_p_value_endpoints() {
        assert_abs_diff_eq!(ks_p_value(1e-9), 1.0);
        assert!(ks_p_value(0.5) > 0.9);
        assert!(ks_p_value(2.0) < 1e-3);
        // normal cdf sanity
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-7);
        assert_abs_diff_eq!(normal_cdf(1.959964) - normal_cdf(-1.959964), 0.95, epsilon = 1e-4);
    }

    #[test]
    fn zero_observable_is_flagged_as_coboundary() {
        let (orbit, family, cfg) = identity_setup(12);
        let psi = |_: usize, _: Complex64| 0.0;
        let report =
            birkhoff_clt(&orbit, &family, &cfg, &psi, 0, 1, 4, 600, 3, 4, &[0, 1]).unwrap();
        assert!(report.coboundary);
        assert_eq!(report.p_value, 0.0);
    }

    #[test]
    fn clt_rejects_small_sample_counts() {
        let (orbit, family, cfg) = identity_setup(8);
        let psi = |_: usize, z: Complex64| z.re;
        assert!(matches!(
            birkhoff_clt(&orbit, &family, &cfg, &psi, 0, 1, 2, 100, 3, 4, &[0]),
            Err(Error::InsufficientSamples { .. })
        ));
    }
}
