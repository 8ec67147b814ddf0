//! Invariant positive cones and the Bowen-style contraction diagnostics.
//!
//! The cones constrain positive densities by a sup-norm bound, a variation
//! bound, and (for the refined cone) an operator-image upper envelope:
//!
//! * `C`:  `g ≥ 0`, `‖g‖_∞ ≤ 𝒜·∫g dν`, `v_β(g) ≤ H·∫g dν`;
//! * `C₀`: additionally `g ≤ 2M𝒜·(∫g dν)·ℒ̂1` pointwise, where `ℒ̂1` is
//!   carried by the previous fiber.
//!
//! All "there exists a constant" statements are realized as measured
//! empirical constants assembled by the displayed formulas; nothing is
//! assumed. The Hilbert projective metric is deliberately not used: on
//! unbounded phase spaces these cones have members at infinite projective
//! distance, and the contraction is measured Bowen-style instead (the
//! convex split along truncated bump functions).

use serde::{Deserialize, Serialize};

use crate::fit;
use crate::gibbs::{random_holder_density, GibbsFamily};
use crate::grid::GridDensity;
use crate::transfer::{holder_norm, OrbitData, PotentialConfig};
use crate::{Error, Result};

/// The assembled constant ledger.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConeConstants {
    pub beta: f64,
    /// Variation scale: the largest δ with `1/2 + (2MK+4)·δ^β ≤ 1`,
    /// capped by the topological margin δ₀.
    pub delta: f64,
    /// Uniform bound M for `‖ℒ̂ⁿ‖` (measured).
    pub m_bound: f64,
    /// Distortion constant K (measured).
    pub k_dist: f64,
    /// Ball-mass constant A(δ, R₀, t) (measured).
    pub a_ball: f64,
    /// `𝒜 = 2·max{1, A, M}`.
    pub script_a: f64,
    /// `H = 2MK𝒜 + 4`.
    pub h_var: f64,
    /// Expansion constants from the cloud fit.
    pub c_exp: f64,
    pub gamma: f64,
    /// Smallest `n ≥ 1` with `MK(cγⁿ)^{−β}·H ≤ 1`.
    pub n0: usize,
    pub r0: f64,
    /// Smallest sampled radius with `2𝒜M·ℒ̂1 ≤ 1` outside.
    pub r1: f64,
    /// Mixing lower bound `a` (measured).
    pub a_mix: f64,
    /// `η = min{1/3, 1/H, a/(2M)}`.
    pub eta: f64,
    /// Effort cap N_R for the Bowen step (mixing-derived).
    pub n_r: usize,
}

/// Measured inputs for the constant assembly.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalInputs {
    pub m_bound: f64,
    pub k_dist: f64,
    pub a_ball: f64,
    pub c_exp: f64,
    pub gamma: f64,
    pub a_mix: f64,
    pub r0: f64,
    /// Topological-hyperbolicity margin δ₀ (cap for δ).
    pub delta0: f64,
    /// Mixing-derived iteration count; the Bowen step uses
    /// `N_R = max(n0, this)`.
    pub mixing_n: usize,
}

/// Deterministic assembly of the ledger from measured inputs.
/// `l1_hat_samples` are `(|z|, ℒ̂1(z))` pairs used to locate `R₁`.
pub fn compute_constants(
    inputs: &EmpiricalInputs,
    beta: f64,
    l1_hat_samples: &[(f64, f64)],
) -> Result<ConeConstants> {
    if inputs.gamma <= 1.0 {
        return Err(Error::NoExpansion {
            gamma: inputs.gamma,
        });
    }
    let (m, k) = (inputs.m_bound, inputs.k_dist);
    assert!(m > 0.0 && k > 0.0 && inputs.a_ball > 0.0 && inputs.a_mix > 0.0);
    let delta = inputs
        .delta0
        .min((0.5 / (2.0 * m * k + 4.0)).powf(1.0 / beta));
    let script_a = 2.0 * 1.0f64.max(inputs.a_ball).max(m);
    let h_var = 2.0 * m * k * script_a + 4.0;
    // MK·c^{−β}·γ^{−nβ}·H ≤ 1  ⇔  n ≥ ln(MKH/c^β)/(β·ln γ)
    let needed = (m * k * h_var / inputs.c_exp.powf(beta)).ln() / (beta * inputs.gamma.ln());
    let n0 = needed.ceil().max(1.0) as usize;
    // R₁: smallest sampled radius beyond which 2𝒜M·ℒ̂1 ≤ 1 everywhere
    let mut r1 = inputs.r0;
    let mut sorted: Vec<(f64, f64)> = l1_hat_samples.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for i in (0..sorted.len()).rev() {
        if 2.0 * script_a * m * sorted[i].1 > 1.0 {
            r1 = r1.max(sorted[i].0);
            break;
        }
    }
    let eta = (1.0f64 / 3.0)
        .min(1.0 / h_var)
        .min(inputs.a_mix / (2.0 * m));
    Ok(ConeConstants {
        beta,
        delta,
        m_bound: m,
        k_dist: k,
        a_ball: inputs.a_ball,
        script_a,
        h_var,
        c_exp: inputs.c_exp,
        gamma: inputs.gamma,
        n0,
        r0: inputs.r0,
        r1,
        a_mix: inputs.a_mix,
        eta,
        n_r: inputs.mixing_n.max(n0),
    })
}

/// Outcome of a cone-membership evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Membership {
    pub in_c: bool,
    pub in_c0: bool,
    /// The zero density sits in the cone degenerately.
    pub zero_element: bool,
    /// Worst slack across the inequalities (negative = violated).
    pub slack: f64,
    pub nonnegative: bool,
    pub sup_ok: bool,
    pub var_ok: bool,
    pub envelope_ok: bool,
}

/// Evaluates the cone inequalities for `g` against `ν` (same fiber) and the
/// operator envelope `ℒ̂1` carried from the previous fiber (`None` skips the
/// `C₀` test).
pub fn cone_membership(
    orbit: &OrbitData,
    family: &GibbsFamily,
    consts: &ConeConstants,
    cfg: &PotentialConfig,
    fiber: usize,
    g: &GridDensity,
    l1_prev: Option<&GridDensity>,
) -> Result<Membership> {
    let grid = &orbit.grids[fiber];
    g.check_grid(grid)?;
    let nu = &family.nus[fiber];
    let nonnegative = g.values.iter().all(|&v| v >= 0.0);
    let mass = nu.integrate(g)?;
    let hd = holder_norm(
        grid,
        g,
        &PotentialConfig {
            delta: consts.delta,
            beta: consts.beta,
            ..*cfg
        },
    )?;
    if hd.sup == 0.0 {
        // all inequalities read 0 ≤ 0
        return Ok(Membership {
            in_c: true,
            in_c0: true,
            zero_element: true,
            slack: 0.0,
            nonnegative,
            sup_ok: true,
            var_ok: true,
            envelope_ok: true,
        });
    }
    let sup_slack = consts.script_a * mass - hd.sup;
    let var_slack = consts.h_var * mass - hd.v_beta;
    let (envelope_ok, env_slack) = match l1_prev {
        Some(l1) => {
            let bound = 2.0 * consts.m_bound * consts.script_a * mass;
            let mut worst = f64::INFINITY;
            for (gv, lv) in g.values.iter().zip(&l1.values) {
                worst = worst.min(bound * lv - gv);
            }
            (worst >= 0.0, worst)
        }
        None => (true, f64::INFINITY),
    };
    let in_c = nonnegative && sup_slack >= 0.0 && var_slack >= 0.0;
    Ok(Membership {
        in_c,
        in_c0: in_c && envelope_ok,
        zero_element: false,
        slack: sup_slack.min(var_slack).min(env_slack),
        nonnegative,
        sup_ok: sup_slack >= 0.0,
        var_ok: var_slack >= 0.0,
        envelope_ok,
    })
}

/// Draws a cone member at `fiber`: a rough positive field recentred to
/// `∫g dν = 1` and flattened toward the constant 1 until the sup and
/// variation constraints hold with 10% slack.
pub fn sample_cone_member(
    orbit: &OrbitData,
    family: &GibbsFamily,
    consts: &ConeConstants,
    fiber: usize,
    seed: u64,
) -> Result<GridDensity> {
    let grid = &orbit.grids[fiber];
    let nu = &family.nus[fiber];
    let raw = random_holder_density(grid, seed, 8, 1.2);
    let mass = nu.integrate(&raw)?;
    if !(mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    let unit = raw.scale(1.0 / mass);
    // blend toward 1: g_s = 1 + s·(unit − 1); all cone functionals are
    // linear in s, so the admissible s is explicit
    let one = GridDensity::constant(grid, 1.0);
    let dev = unit.axpy(1.0, &one, -1.0)?;
    let cfg = PotentialConfig {
        delta: consts.delta,
        beta: consts.beta,
        ..PotentialConfig::default_fixture()
    };
    let hd = holder_norm(grid, &dev, &cfg)?;
    let sup_dev = hd.sup;
    let v_dev = hd.v_beta;
    // constraints at ∫g dν = 1: 1 + s·sup_dev ≤ 0.9𝒜, s·v_dev ≤ 0.9H,
    // 1 − s·sup_dev ≥ 0.05 (strict positivity)
    let mut s = f64::INFINITY;
    if sup_dev > 0.0 {
        s = s
            .min((0.9 * consts.script_a - 1.0) / sup_dev)
            .min(0.95 / sup_dev);
    }
    if v_dev > 0.0 {
        s = s.min(0.9 * consts.h_var / v_dev);
    }
    let s = if s.is_finite() { s.min(1.0) } else { 1.0 };
    one.axpy(1.0, &dev, s)
}

/// Pass fraction of the cone-invariance test `ℒ̂ⁿ(C_x) ⊂ C₀` at the given
/// iteration counts.
#[derive(Debug, Clone)]
pub struct InvarianceReport {
    /// `(n, passes, total)` per iteration count.
    pub rows: Vec<(usize, usize, usize)>,
    pub pass_fraction: f64,
}

pub fn cone_invariance_test(
    orbit: &OrbitData,
    family: &GibbsFamily,
    consts: &ConeConstants,
    cfg: &PotentialConfig,
    start_fiber: usize,
    ns: &[usize],
    samples: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    let mut rows = Vec::new();
    let mut passes_total = 0usize;
    let mut total = 0usize;
    for &n in ns {
        assert!(start_fiber + n < family.window);
        // envelope ℒ̂1 carried into the target fiber
        let one_prev = GridDensity::constant(&orbit.grids[start_fiber + n - 1], 1.0);
        let (raw_l1, _) = orbit.apply(start_fiber + n - 1, &one_prev, cfg)?;
        let l1 = raw_l1.scale(1.0 / family.lambdas[start_fiber + n - 1]);
        let mut passes = 0usize;
        for s in 0..samples {
            let g = sample_cone_member(orbit, family, consts, start_fiber, seed ^ (s as u64))?;
            let member_src =
                cone_membership(orbit, family, consts, cfg, start_fiber, &g, None)?;
            if !member_src.in_c {
                continue; // sampler failed; excluded rather than counted
            }
            let img = orbit.normalized_apply_n(start_fiber, n, &g, cfg, &family.lambdas)?;
            let m = cone_membership(
                orbit,
                family,
                consts,
                cfg,
                start_fiber + n,
                &img,
                Some(&l1),
            )?;
            total += 1;
            if m.in_c0 {
                passes += 1;
                passes_total += 1;
            }
        }
        rows.push((n, passes, samples));
    }
    Ok(InvarianceReport {
        rows,
        pass_fraction: if total > 0 {
            passes_total as f64 / total as f64
        } else {
            0.0
        },
    })
}

/// `φ_{x,R} = φ_R·ℒ̂1`, the truncated envelope used by the Bowen split:
/// equals `ℒ̂1` on `𝔻_R`, vanishes outside `𝔻_{2R}`, radial-linear between.
pub fn truncation_function(
    orbit: &OrbitData,
    family: &GibbsFamily,
    cfg: &PotentialConfig,
    fiber: usize,
    big_r: f64,
) -> Result<GridDensity> {
    assert!(fiber >= 1, "the envelope is carried from the previous fiber");
    let one_prev = GridDensity::constant(&orbit.grids[fiber - 1], 1.0);
    let (raw, _) = orbit.apply(fiber - 1, &one_prev, cfg)?;
    let l1 = raw.scale(1.0 / family.lambdas[fiber - 1]);
    let grid = &orbit.grids[fiber];
    let values = grid
        .points
        .iter()
        .zip(&l1.values)
        .map(|(z, l)| {
            let bump = (2.0 - z.norm() / big_r).clamp(0.0, 1.0);
            bump * l
        })
        .collect();
    Ok(GridDensity {
        fiber: grid.fiber,
        values,
    })
}

/// One Bowen step: positivity of `ℒ̂ᴺg` on `𝔻_{2R}` and cone membership of
/// the recentred remainder `(ℒ̂ᴺg − η·φ)/(1 − η_R)`.
#[derive(Debug, Clone)]
pub struct BowenReport {
    /// Measured `min ℒ̂ᴺg` over `𝔻_{2R}`, per sample.
    pub a_emp: Vec<f64>,
    /// `η_{x,R} = η·∫φ dν` at the target fiber.
    pub eta_xr: f64,
    /// Recomputed positivity floor `η·(min ℒ̂1 on 𝔻_{R₀})·ν(𝔻_{R₀})`.
    pub eta_tilde_bound: f64,
    pub remainder_in_c0: Vec<bool>,
    pub pass: bool,
}

pub fn bowen_step_check(
    orbit: &OrbitData,
    family: &GibbsFamily,
    consts: &ConeConstants,
    cfg: &PotentialConfig,
    start_fiber: usize,
    big_r: f64,
    samples: usize,
    seed: u64,
) -> Result<BowenReport> {
    let n = consts.n_r;
    let target = start_fiber + n;
    assert!(target < family.window);
    let phi = truncation_function(orbit, family, cfg, target, big_r)?;
    let nu_target = &family.nus[target];
    let eta_xr = consts.eta * nu_target.integrate(&phi)?;
    // envelope for membership checks at the target
    let one_prev = GridDensity::constant(&orbit.grids[target - 1], 1.0);
    let (raw_l1, _) = orbit.apply(target - 1, &one_prev, cfg)?;
    let l1 = raw_l1.scale(1.0 / family.lambdas[target - 1]);
    // η̃ positivity floor: ℒ̂1 ≥ c on 𝔻_{R₀} and ν(𝔻_{R₀}) ≥ 1/2
    let grid_t = &orbit.grids[target];
    let c_lb = grid_t
        .points
        .iter()
        .zip(&l1.values)
        .filter(|(z, _)| z.norm() <= consts.r0)
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    let eta_tilde_bound =
        consts.eta * c_lb * nu_target.mass_within(grid_t, consts.r0)?;
    let mut a_emp = Vec::new();
    let mut remainder_in_c0 = Vec::new();
    for s in 0..samples {
        let g = sample_cone_member(orbit, family, consts, start_fiber, seed ^ (s as u64))?;
        let img = orbit.normalized_apply_n(start_fiber, n, &g, cfg, &family.lambdas)?;
        let min_on_2r = grid_t
            .points
            .iter()
            .zip(&img.values)
            .filter(|(z, _)| z.norm() <= 2.0 * big_r)
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min);
        a_emp.push(min_on_2r);
        let remainder = img.axpy(1.0, &phi, -consts.eta)?;
        let remainder = remainder.scale(1.0 / (1.0 - eta_xr));
        let m = cone_membership(orbit, family, consts, cfg, target, &remainder, Some(&l1))?;
        remainder_in_c0.push(m.in_c0);
    }
    let pass = a_emp.iter().all(|&a| a > 0.0)
        && remainder_in_c0.iter().all(|&b| b)
        && eta_xr > 0.0
        && eta_xr < 1.0;
    Ok(BowenReport {
        a_emp,
        eta_xr,
        eta_tilde_bound,
        remainder_in_c0,
        pass,
    })
}

/// Measured contraction of cone-member pairs under `ℒ̂ⁿ`.
#[derive(Debug, Clone)]
pub struct ContractionReport {
    /// `(n, max over pairs of ‖ℒ̂ⁿg − ℒ̂ⁿh‖_β)`.
    pub diameters: Vec<(usize, f64)>,
    pub theta_fit: f64,
    pub b_fit: f64,
    pub r_squared: f64,
}

/// Runs pairs of normalized cone members through `ℒ̂ⁿ` on the n-grid and
/// fits `D_n ≈ B·ϑⁿ`.
pub fn contraction_rate(
    orbit: &OrbitData,
    family: &GibbsFamily,
    consts: &ConeConstants,
    cfg: &PotentialConfig,
    start_fiber: usize,
    ns: &[usize],
    pairs: usize,
    seed: u64,
) -> Result<ContractionReport> {
    let hn_cfg = PotentialConfig {
        delta: consts.delta,
        beta: consts.beta,
        ..*cfg
    };
    let mut diameters = Vec::new();
    for &n in ns {
        assert!(start_fiber + n < family.window);
        let mut d_n = 0.0f64;
        for p in 0..pairs {
            let g =
                sample_cone_member(orbit, family, consts, start_fiber, seed ^ (2 * p as u64))?;
            let h = sample_cone_member(
                orbit,
                family,
                consts,
                start_fiber,
                seed ^ (2 * p as u64 + 1),
            )?;
            let ig = orbit.normalized_apply_n(start_fiber, n, &g, cfg, &family.lambdas)?;
            let ih = orbit.normalized_apply_n(start_fiber, n, &h, cfg, &family.lambdas)?;
            let diff = ig.axpy(1.0, &ih, -1.0)?;
            d_n = d_n.max(holder_norm(&orbit.grids[start_fiber + n], &diff, &hn_cfg)?.norm_beta);
        }
        diameters.push((n, d_n));
    }
    let gfit = fit::geometric_fit(
        &diameters.iter().map(|(n, _)| *n as f64).collect::<Vec<_>>(),
        &diameters.iter().map(|(_, d)| *d).collect::<Vec<_>>(),
    )
    .ok_or_else(|| Error::FitFailure("contraction diameters degenerate".into()))?;
    Ok(ContractionReport {
        diameters,
        theta_fit: gfit.theta,
        b_fit: gfit.amplitude,
        r_squared: gfit.r_squared,
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

    fn demo_inputs() -> EmpiricalInputs {
        EmpiricalInputs {
            m_bound: 1.0,
            k_dist: 1.0,
            a_ball: 1.0,
            c_exp: 1.0,
            gamma: 2.0,
            a_mix: 0.5,
            r0: 5.0,
            delta0: 0.25,
            mixing_n: 1,
        }
    }

    #[test]
    fn constant_assembly_formulas() {
        let consts = compute_constants(&demo_inputs(), 1.0, &[]).unwrap();
        // M = K = 1, β = 1: δ = min(δ₀, 1/12); 𝒜 = 2; H = 2·1·1·2 + 4 = 8
        assert_abs_diff_eq!(consts.delta, (0.5f64 / 6.0).min(0.25), epsilon = 1e-15);
        assert_abs_diff_eq!(consts.script_a, 2.0);
        assert_abs_diff_eq!(consts.h_var, 8.0);
        // c = 1, γ = 2, H = 8: smallest n with 8·2^{−n} ≤ 1 is 3
        assert_eq!(consts.n0, 3);
        assert_abs_diff_eq!(consts.eta, (1.0f64 / 8.0).min(1.0 / 3.0).min(0.25));
    }

    #[test]
    fn assembly_is_bit_reproducible() {
        let a = compute_constants(&demo_inputs(), 0.5, &[(1.0, 0.3), (9.0, 0.01)]).unwrap();
        let b = compute_constants(&demo_inputs(), 0.5, &[(1.0, 0.3), (9.0, 0.01)]).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        // δ satisfies the defining inequality with headroom for rounding
        assert!(0.5 + (2.0 * a.m_bound * a.k_dist + 4.0) * a.delta.powf(a.beta) <= 1.0 + 1e-12);
    }

    #[test]
    fn no_expansion_is_an_error() {
        let mut inputs = demo_inputs();
        inputs.gamma = 1.0;
        assert!(matches!(
            compute_constants(&inputs, 1.0, &[]),
            Err(Error::NoExpansion { .. })
        ));
    }

    #[test]
    fn r1_is_located_from_samples() {
        // 2𝒜M·ℒ̂1 ≤ 1 ⇔ ℒ̂1 ≤ 1/4 here (𝒜 = 2, M = 1)
        let samples = [(2.0, 0.9), (4.0, 0.5), (6.0, 0.3), (8.0, 0.2), (10.0, 0.1)];
        let consts = compute_constants(&demo_inputs(), 1.0, &samples).unwrap();
        assert_abs_diff_eq!(consts.r1, 6.0);
    }

    fn identity_setup(fibers: usize) -> (OrbitData, GibbsFamily, ConeConstants, PotentialConfig) {
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
        let consts = compute_constants(
            &EmpiricalInputs {
                m_bound: 1.0,
                k_dist: 0.5,
                a_ball: 80.0, // uniform measure on 80 atoms: min ball mass 1/80
                c_exp: 1.0,
                gamma: 2.0, // synthetic: the isometry has no real expansion
                a_mix: 0.5,
                r0: 2.5,
                delta0: 0.25,
                mixing_n: 1,
            },
            1.0,
            &[],
        )
        .unwrap();
        (orbit, family, consts, cfg)
    }

    #[test]
    fn constant_one_is_a_cone_member() {
        let (orbit, family, consts, cfg) = identity_setup(8);
        let one = GridDensity::constant(&orbit.grids[0], 1.0);
        let m = cone_membership(&orbit, &family, &consts, &cfg, 0, &one, None).unwrap();
        assert!(m.in_c, "{m:?}");
        assert!(!m.zero_element);
        // the zero density is degenerately inside
        let zero = GridDensity::constant(&orbit.grids[0], 0.0);
        let mz = cone_membership(&orbit, &family, &consts, &cfg, 0, &zero, None).unwrap();
        assert!(mz.in_c && mz.zero_element);
    }

    #[test]
    fn spiky_density_is_rejected() {
        let (orbit, family, consts, cfg) = identity_setup(8);
        let mut v = vec![0.0; orbit.grids[0].len()];
        v[3] = 1000.0;
        let spike = GridDensity {
            fiber: 0,
            values: v,
        };
        let m = cone_membership(&orbit, &family, &consts, &cfg, 0, &spike, None).unwrap();
        assert!(!m.in_c);
        assert!(!m.sup_ok || !m.var_ok);
    }

    #[test]
    fn sampled_members_actually_belong() {
        let (orbit, family, consts, cfg) = identity_setup(8);
        for s in 0..10 {
            let g = sample_cone_member(&orbit, &family, &consts, 0, s).unwrap();
            let m = cone_membership(&orbit, &family, &consts, &cfg, 0, &g, None).unwrap();
            assert!(m.in_c, "sample {s}: {m:?}");
            assert_abs_diff_eq!(family.nus[0].integrate(&g).unwrap(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn truncation_function_sandwich() {
        let (orbit, family, _, cfg) = identity_setup(8);
        let big_r = 1.0;
        let phi = truncation_function(&orbit, &family, &cfg, 1, big_r).unwrap();
        let one_prev = GridDensity::constant(&orbit.grids[0], 1.0);
        let (raw, _) = orbit.apply(0, &one_prev, &cfg).unwrap();
        let l1 = raw.scale(1.0 / family.lambdas[0]); // the normalized envelope
        for ((z, p), l) in orbit.grids[1]
            .points
            .iter()
            .zip(&phi.values)
            .zip(&l1.values)
        {
            assert!(*p >= 0.0 && *p <= *l + 1e-15);
            if z.norm() <= big_r {
                assert_abs_diff_eq!(*p, *l, epsilon = 1e-15);
            }
            if z.norm() >= 2.0 * big_r {
                assert_eq!(*p, 0.0);
            }
            if (z.norm() - 1.5 * big_r).abs() < 1e-9 {
                assert_abs_diff_eq!(*p, 0.5 * l, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn isometry_pairs_do_not_contract() {
        // negative control: the single-branch isometry rearranges values, so
        // pair diameters stay constant and the fitted rate is ≈ 1
        let (orbit, family, consts, cfg) = identity_setup(10);
        let report =
            contraction_rate(&orbit, &family, &consts, &cfg, 0, &[1, 2, 4, 6], 4, 99).unwrap();
        assert!(
            report.theta_fit > 0.95,
            "isometry contracted: ϑ = {}",
            report.theta_fit
        );
        // coincident pairs have zero diameter at every n
        let g = sample_cone_member(&orbit, &family, &consts, 0, 7).unwrap();
        let ig = orbit
            .normalized_apply_n(0, 3, &g, &cfg, &family.lambdas)
            .unwrap();
        let diff = ig.axpy(1.0, &ig, -1.0).unwrap();
        assert_eq!(diff.sup_norm(), 0.0);
    }
}
