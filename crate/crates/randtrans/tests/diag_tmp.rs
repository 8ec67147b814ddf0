// temporary desk-scale diagnostic (deleted before finalizing)
use num_complex::Complex64;
use randtrans::config::ExperimentConfig;
use randtrans::fit::mean_var;
use randtrans::gibbs::{self, ReferenceKind};
use randtrans::pipeline::Lab;
use randtrans::stats;

#[test]
#[ignore]
fn diag_clt_annealed() {
    let mut cfg = ExperimentConfig::default_random_exp();
    cfg.geometry.window = 140;
    cfg.geometry.grid_max_points = 700;
    let window = cfg.geometry.window;
    let lab = Lab::assemble(&cfg, window + cfg.geometry.pullback_depth + 7).unwrap();
    let family = gibbs::gibbs_family(&lab.orbit, &lab.potential, window, cfg.geometry.pullback_depth,
        ReferenceKind::UniformWithin(cfg.geometry.r0)).unwrap();
    let r0 = cfg.geometry.r0;
    let psi = move |_: usize, z: Complex64| (z.norm() / r0).tanh();
    for (n, spread) in [(30usize, 40usize), (60, 40)] {
        let rep = stats::birkhoff_clt(&lab.orbit, &family, &lab.potential, &psi, 30, spread, n, 2000, 11, 10, &[30,31,32,33]).unwrap();
        let (m, v) = mean_var(&rep.normalized_sums);
        println!("n={n} spread={spread}: sigma2={:.5} emp_mean={:.5} emp_var={:.5} D={:.4} p={:.4}",
            rep.sigma2, m, v, rep.ks_statistic, rep.p_value);
    }
}
