//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with the measured quantities. Run with
//! `cargo test --release -p pathgibbs --test acceptance -- --nocapture`.
//!
//! The strict-bound configuration (mollifier-product kernel, d = 3, beta = 1,
//! T = 64, dt = 1/16, N = 2000 Nystrom nodes) is computed once and shared.

use pathgibbs::gibbs::{estimate_endpoint, GibbsConfig, McmcParams, StartMode};
use pathgibbs::interactions::{InteractionKernel, KernelConfig, MollifierPair, SpatialPotential};
use pathgibbs::linfit::linear_fit;
use pathgibbs::paths::{DiscretePath, PathGrid};
use pathgibbs::she::{
    annealed_ratio, effective_kernel, gaussian_identity_check, homogenized_reference,
    noise_mc_oracle, partition_growth, InitialCondition, RatioMode,
};
use pathgibbs::transfer::{
    block_entropy_gap, free_energy_curve, pipeline_from_ensemble_routes, run_spectral_pipeline,
    sample_block_measure, tv_contraction, BlockSampling, SpectralPipeline,
};
use pathgibbs::verify;
use pathgibbs::{gibbs::EndpointStats, replica_seed};
use std::sync::LazyLock;
use std::time::Instant;

const ACC_SEED: u64 = 42;

fn acceptance_kernel(beta: f64) -> InteractionKernel {
    KernelConfig::preset("mollifier_product", beta).build().unwrap()
}

struct Fixture {
    kernel: InteractionKernel,
    pipe: SpectralPipeline,
    mcmc: EndpointStats,
    mcmc_config: GibbsConfig,
}

/// Criterion-2 configuration: built once, reused by criteria 2, 3, 4, 6, 7, 10.
static FIXTURE: LazyLock<Fixture> = LazyLock::new(|| {
    let kernel = acceptance_kernel(1.0);
    let pipe = run_spectral_pipeline(
        &kernel,
        1.0,
        1.0 / 16.0,
        2000,
        ACC_SEED,
        BlockSampling::PriorImportance,
    )
    .expect("spectral pipeline");
    let mcmc_config = GibbsConfig {
        kernel: kernel.clone(),
        grid: PathGrid::new(1024, 1.0 / 16.0, 3), // T = 64
        mcmc: McmcParams {
            block_len: 8,
            proposals_per_sweep: 128,
            sweeps: 20_500,
            burn_in: 500,
            thinning: 2,
        },
        seed: replica_seed(ACC_SEED, 2),
    };
    let mcmc = estimate_endpoint(&mcmc_config, StartMode::Prior).expect("endpoint mcmc");
    Fixture { kernel, pipe, mcmc, mcmc_config }
});

fn report(criterion: &str, pass: bool, detail: &str) {
    println!("[criterion {criterion}] {} | {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion}: {detail}");
}

#[test]
fn criterion_01_beta_zero_exactness() {
    let t0 = Instant::now();
    let kernel = acceptance_kernel(0.0);
    // Transfer side: rank-one averaging operator.
    let pipe = run_spectral_pipeline(&kernel, 1.0, 0.125, 400, ACC_SEED, BlockSampling::PriorImportance)
        .unwrap();
    let lam_err = (pipe.spectral.lambda0 - 1.0).abs();
    let psi_err = pipe
        .spectral
        .psi0
        .iter()
        .map(|p| (p - 1.0).abs())
        .fold(0.0_f64, f64::max);
    let delta_err = (pipe.spectral.delta - 1.0).abs();
    let v = &pipe.variance;
    let sigma_tol = 3.0 * v.jitter_se + 0.02;
    let sigma_ok = (v.sigma2_dirichlet - 1.0).abs() < sigma_tol
        && (v.sigma2_classical - 1.0).abs() < sigma_tol
        && (v.sigma2_autocov - 1.0).abs() < sigma_tol;
    // MCMC side: unperturbed Wiener endpoint with 1e4 thinned samples.
    let cfg = GibbsConfig {
        kernel: kernel.clone(),
        grid: PathGrid::new(128, 0.125, 3), // T = 16
        mcmc: McmcParams {
            block_len: 16,
            proposals_per_sweep: 16,
            sweeps: 10_100,
            burn_in: 100,
            thinning: 1,
        },
        seed: replica_seed(ACC_SEED, 11),
    };
    let stats = estimate_endpoint(&cfg, StartMode::Zero).unwrap();
    assert_eq!(stats.samples[0].len(), 10_000);
    let (mv, mse) = stats.pooled_variance();
    let mcmc_ok = (mv - 1.0).abs() <= 3.0 * mse;
    // Annealed SHE ratio at beta = 0 against the heat semigroup.
    let pair = MollifierPair::new(0.2, 0.3, 3).unwrap();
    let keff = effective_kernel(&pair, 0.0).unwrap();
    let grid = PathGrid::new(64, 1.0 / 16.0, 3); // T = 4 = t / eps^2
    let u0 = InitialCondition::Cosine { k: vec![1.0, 0.0, 0.0] };
    let x = [0.3, 0.0, 0.0];
    let est = annealed_ratio(
        &keff,
        grid,
        &x,
        0.5,
        &u0,
        RatioMode::Importance { n_paths: 40_000 },
        replica_seed(ACC_SEED, 12),
    )
    .unwrap();
    let heat = (-0.5_f64).exp() * 0.3_f64.cos();
    let ratio_ok = (est.value - heat).abs() <= 3.0 * est.se;
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = lam_err <= 1e-10
        && psi_err <= 1e-10
        && delta_err <= 1e-10
        && sigma_ok
        && mcmc_ok
        && ratio_ok
        && elapsed < 60.0;
    report(
        "01 beta-zero exactness",
        pass,
        &format!(
            "lambda0-1={lam_err:.2e} sup|psi0-1|={psi_err:.2e} delta-1={delta_err:.2e} \
             sigma2=({:.4},{:.4},{:.4})+-{:.4} mcmc_var={mv:.4}+-{mse:.4} \
             she_ratio={:.4}+-{:.4} vs heat={heat:.4} [{elapsed:.1}s]",
            v.sigma2_dirichlet, v.sigma2_classical, v.sigma2_autocov, sigma_tol, est.value, est.se
        ),
    );
}

#[test]
fn criterion_02_strict_clt_bound() {
    let t0 = Instant::now();
    let fx = &*FIXTURE;
    let (mv, mse) = fx.mcmc.pooled_variance();
    assert_eq!(fx.mcmc.samples[0].len(), 10_000);
    let transfer_v = fx.pipe.variance.sigma2_classical;
    let transfer_se = fx.pipe.variance.jitter_se;
    let mcmc_inside = mv + 3.0 * mse < 1.0 && mv - 3.0 * mse > 0.0;
    let transfer_inside = transfer_v + 3.0 * transfer_se < 1.0 && transfer_v - 3.0 * transfer_se > 0.0;
    let rel = (transfer_v - mv).abs() / mv;
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = mcmc_inside && transfer_inside && rel <= 0.10 && elapsed < 900.0;
    report(
        "02 strict CLT bound",
        pass,
        &format!(
            "mcmc_var={mv:.4}+-{mse:.4} transfer_var={transfer_v:.4}+-{transfer_se:.4} \
             rel_gap={rel:.4} (cap 0.10) [{elapsed:.1}s incl. shared fixture]"
        ),
    );
}

#[test]
fn criterion_03_free_energy_vs_perron() {
    let fx = &*FIXTURE;
    let curve = free_energy_curve(&fx.pipe.operator, &[4, 8, 16]);
    let lam = fx.pipe.spectral.log_lambda0;
    let gaps: Vec<f64> = curve.iter().map(|(_, f)| (f - lam).abs()).collect();
    let monotone = gaps[0] >= gaps[1] - 1e-12 && gaps[1] >= gaps[2] - 1e-12;
    let pass = gaps[2] <= 0.05 && monotone;
    report(
        "03 free energy vs Perron eigenvalue",
        pass,
        &format!(
            "gaps at n=4,8,16: {:.5}, {:.5}, {:.5} (cap 0.05 at n=16, monotone={monotone}, \
             log_lambda0={lam:.5})",
            gaps[0], gaps[1], gaps[2]
        ),
    );
}

#[test]
fn criterion_04_doeblin_tv_contraction() {
    let fx = &*FIXTURE;
    // Algebraic checks at the converged eigenpair (N = 2000).
    let defect = fx.pipe.chain.row_defect;
    let floor = fx.pipe.spectral.delta / fx.pipe.spectral.lambda0;
    let floor_ok = fx.pipe.chain.min_p_over_w >= floor - 1e-12;
    // Contraction curve on a separate N = 1000 chain (dense powers).
    let kernel = acceptance_kernel(1.0);
    let pipe = run_spectral_pipeline(
        &kernel,
        1.0,
        1.0 / 16.0,
        1000,
        replica_seed(ACC_SEED, 4),
        BlockSampling::PriorImportance,
    )
    .unwrap();
    let curve = tv_contraction(&pipe.chain, 8);
    let fit = curve.fit.as_ref().expect("nonzero spread");
    // 95% one-sided confidence on a negative slope: t(0.95, df = 2) = 2.92.
    let rate_ok = fit.slope + 2.92 * fit.slope_se < 0.0;
    let monotone = curve.spread.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let pass = defect <= 1e-6 && floor_ok && rate_ok && monotone;
    report(
        "04 Doeblin / TV contraction",
        pass,
        &format!(
            "row_defect={defect:.2e} (cap 1e-6), min P/w={:.4e} >= delta/lambda0={:.4e}, \
             spread={:?} rate={:.3}+-{:.3}",
            fx.pipe.chain.min_p_over_w,
            floor,
            curve.spread.iter().map(|s| (s * 1e4).round() / 1e4).collect::<Vec<_>>(),
            -fit.slope,
            fit.slope_se
        ),
    );
}

#[test]
fn criterion_05_gaussian_identity() {
    let pair = MollifierPair::new(0.2, 0.3, 3).unwrap();
    let grid = PathGrid::new(64, 1.0 / 16.0, 3);
    let mut worst = 0.0_f64;
    for eps in [1.0, 0.5, 0.25] {
        for trial in 0..10 {
            let path = DiscretePath::sample(grid, replica_seed(ACC_SEED, 500 + trial));
            let rep = gaussian_identity_check(&path, &pair, 1.0, eps).unwrap();
            worst = worst.max(rep.max_rel_discrepancy);
        }
    }
    // Direct-noise oracle at 1e5 draws.
    let micro = DiscretePath::sample(PathGrid::new(16, 1.0 / 16.0, 3), replica_seed(ACC_SEED, 55));
    let oracle = noise_mc_oracle(&micro, &pair, 0.4, 0.5, 100_000, 6, replica_seed(ACC_SEED, 56))
        .unwrap();
    let var_rel =
        (oracle.lattice_variance - oracle.quadrature_variance).abs() / oracle.quadrature_variance;
    let systematic = (oracle.lattice_prediction - oracle.quadrature_prediction).abs();
    let mc_gap = (oracle.mc_mean - oracle.quadrature_prediction).abs();
    let mc_ok = mc_gap <= 3.0 * oracle.mc_se + systematic && var_rel <= 0.02;
    let pass = worst <= 1e-8 && mc_ok;
    report(
        "05 Gaussian identity",
        pass,
        &format!(
            "det. discrepancy={worst:.2e} (cap 1e-8); noise oracle mc={:.5}+-{:.5} vs \
             rhs={:.5} (lattice-vs-quadrature variance gap {var_rel:.4})",
            oracle.mc_mean, oracle.mc_se, oracle.quadrature_prediction
        ),
    );
}

#[test]
fn criterion_06_homogenization_trend() {
    let t0 = Instant::now();
    let fx = &*FIXTURE;
    let sigma2 = fx.pipe.variance.sigma2_classical;
    let kernel = &fx.kernel;
    let u0 = InitialCondition::Cosine { k: vec![1.0, 0.0, 0.0] };
    let x = [0.2, 0.0, 0.0];
    let t = 1.0;
    let reference = homogenized_reference(t, &x, &u0, sigma2);
    let plans: [(f64, usize, usize); 3] = [
        (0.5, 16, 31_000),  // T = 4
        (0.25, 32, 21_000), // T = 16
        (0.125, 128, 20_500), // T = 64
    ];
    let mut errs = Vec::new();
    let mut ses = Vec::new();
    let mut ratios = Vec::new();
    for (i, (eps, props, sweeps)) in plans.iter().enumerate() {
        let horizon = t / (eps * eps);
        let grid = PathGrid::from_horizon(horizon, 1.0 / 16.0, 3).unwrap();
        let mcmc = McmcParams {
            block_len: 8,
            proposals_per_sweep: *props,
            sweeps: *sweeps,
            burn_in: 500,
            thinning: 2,
        };
        let est = annealed_ratio(
            kernel,
            grid,
            &x,
            *eps,
            &u0,
            RatioMode::Mcmc(mcmc),
            replica_seed(ACC_SEED, 600 + i as u64),
        )
        .unwrap();
        assert!(est.value.abs() <= 1.0, "cosine average outside [-1, 1]");
        errs.push((est.value - reference).abs());
        ses.push(est.se);
        ratios.push(est.value);
    }
    let nonincreasing = errs[0] >= errs[1] && errs[1] >= errs[2];
    let final_rel = errs[2] / reference.abs();
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = nonincreasing && final_rel <= 0.10 && elapsed < 1800.0;
    report(
        "06 homogenization trend",
        pass,
        &format!(
            "|ratio - ref| at eps=1/2,1/4,1/8: {:.4}, {:.4}, {:.4} (se {:.4}, {:.4}, {:.4}); \
             ref={reference:.4} final rel err={final_rel:.4} (cap 0.10) [{elapsed:.0}s]",
            errs[0], errs[1], errs[2], ses[0], ses[1], ses[2]
        ),
    );
}

#[test]
fn criterion_07_partition_growth() {
    let fx = &*FIXTURE;
    let kernel = &fx.kernel;
    let mcmc = McmcParams {
        block_len: 8,
        proposals_per_sweep: 64,
        sweeps: 800,
        burn_in: 200,
        thinning: 2,
    };
    let fit = partition_growth(
        kernel,
        1.0 / 16.0,
        1.0,
        &[0.5, 0.25, 0.125],
        mcmc,
        8,
        replica_seed(ACC_SEED, 7),
    )
    .unwrap();
    // Spectral oracle: the per-block free energy of the full partition
    // function is log Z_block + log lambda0 (the single-block normalizer is
    // part of Z_T; the Perron value only carries the coupling part).
    let spectral_slope =
        (fx.pipe.ensemble.z_hat.ln() + fx.pipe.spectral.log_lambda0) / fx.pipe.operator.block_time;
    let literal_slope = fx.pipe.spectral.log_lambda0 / fx.pipe.operator.block_time;
    let rel = (fit.theta0 - spectral_slope).abs() / spectral_slope;
    let pass = fit.r2 >= 0.99 && rel <= 0.05;
    report(
        "07 partition growth",
        pass,
        &format!(
            "theta0={:.4} vs spectral (log Zhat + log lambda0)/L={spectral_slope:.4} \
             (rel {rel:.4}, cap 0.05), r2={:.6}; bare log(lambda0)/L={literal_slope:.4} \
             differs by the block normalizer log Zhat={:.4}",
            fit.theta0,
            fit.r2,
            fx.pipe.ensemble.z_hat.ln()
        ),
    );
}

#[test]
fn criterion_08_lemma_verifiers() {
    // GRR domination: Coulomb d=3 p=1, 20 paths, delta = 0.25.
    let grid = PathGrid::new(256, 1.0 / 256.0, 3);
    let paths: Vec<DiscretePath> =
        (0..20).map(|i| DiscretePath::sample(grid, replica_seed(ACC_SEED, 800 + i))).collect();
    let coulomb = SpatialPotential::CoulombPower { p: 1.0, eta: 0.0, d: 3 };
    let grr =
        verify::grr_bound_check(&paths, &coulomb, 0.5, 0.25, 0.4, 0.5, 100, replica_seed(ACC_SEED, 81))
            .unwrap();
    let grr_ok = grr.pass && grr.lhs == 0.0;
    // Delta moment: n = 1 MC vs quadrature oracle, then the h-scaling slope.
    let dm = verify::delta_moment_check(0.4, 0.8, 0.03, 1, 10_000, 1.0 / 8192.0, replica_seed(ACC_SEED, 82))
        .unwrap();
    let scaling = verify::delta_scaling_fit(0.3, 0.6, &[0.05, 0.1, 0.2, 0.35, 0.5]);
    // Simplex identity at n = 2.
    let simplex = verify::simplex_identity_check(0.25, 2).unwrap();
    let simplex2 = verify::simplex_identity_check(0.4, 2).unwrap();
    // Khas'minskii at a scaling with gamma <= 0.5.
    let khas = verify::khasminskii_check(0.12, 20_000, replica_seed(ACC_SEED, 83)).unwrap();
    let khas_ok = khas.pass && khas.params["gamma"] <= 0.5;
    // Sup/inf maximizer at zero over 1e3 blocks, Coulomb and delta classes.
    let mut coulomb_cfg = KernelConfig::preset("compact_coulomb", 1.0);
    coulomb_cfg.eta = Some(0.05);
    let ck = coulomb_cfg.build().unwrap();
    let ens = sample_block_measure(&ck, 1.0, 1.0 / 16.0, 1000, replica_seed(ACC_SEED, 84), BlockSampling::PriorImportance)
        .unwrap();
    let supinf_coulomb = verify::supinf_maximizer_check(&ck, &ens).unwrap();
    let dk = KernelConfig::preset("delta_1d", 1.0).build().unwrap();
    let ens = sample_block_measure(&dk, 1.0, 1.0 / 16.0, 1000, replica_seed(ACC_SEED, 85), BlockSampling::PriorImportance)
        .unwrap();
    let supinf_delta = verify::supinf_maximizer_check(&dk, &ens).unwrap();
    // Pinsker on binned pairs: Gaussian calibration plus MCMC datasets.
    let fx = &*FIXTURE;
    let c0: Vec<f64> = fx.mcmc.samples[0].clone();
    let c1: Vec<f64> = fx.mcmc.samples[1].clone();
    let p1 = verify::pinsker_tv(&c0, &c1, -4.0, 4.0, 40);
    let gauss: Vec<f64> = {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(replica_seed(ACC_SEED, 86));
        (0..10_000).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
    };
    let p2 = verify::pinsker_tv(&c0, &gauss, -4.0, 4.0, 40);
    let pinsker_ok = p1.pass && p2.pass;
    let pass = grr_ok
        && dm.pass
        && scaling.pass
        && simplex.pass
        && simplex2.pass
        && khas_ok
        && supinf_coulomb.pass
        && supinf_delta.pass
        && pinsker_ok;
    report(
        "08 lemma verifiers",
        pass,
        &format!(
            "grr violations={} /{}; delta_moment |mc-oracle|={:.4} (tol {:.4}); \
             h-slope={:.3} (>= {:.2}); simplex rel err={:.2e},{:.2e}; khas gamma={:.4} \
             exp-moment<= {:.4}; supinf ratios coulomb={:.2} delta={:.2}; pinsker tv<= {:.4},{:.4}",
            grr.lhs,
            grr.params["pairs_checked"],
            dm.lhs,
            dm.rhs,
            scaling.rhs,
            scaling.lhs,
            simplex.lhs,
            simplex2.lhs,
            khas.params["gamma"],
            khas.rhs,
            supinf_coulomb.params["ratio"],
            supinf_delta.params["ratio"],
            p1.bound,
            p2.bound
        ),
    );
}

#[test]
fn criterion_09_block_approximation() {
    let kernel = KernelConfig::preset("poly_bounded", 1.0).build().unwrap();
    let mut envelopes = Vec::new();
    let mut gaps = Vec::new();
    let mut bound_ok = true;
    for (i, t_horizon) in [16.0, 32.0, 64.0].iter().enumerate() {
        let grid = PathGrid::from_horizon(*t_horizon, 0.25, 3).unwrap();
        // L = T / log T, snapped to a divisor of the step count (log T is
        // 2.8 - 4.2 here, so 4 blocks throughout the sweep).
        let n_blocks = 4;
        let mcmc = McmcParams {
            block_len: 8,
            proposals_per_sweep: 8 * (1 << i),
            sweeps: 500,
            burn_in: 100,
            thinning: 5,
        };
        let rep = block_entropy_gap(&kernel, grid, n_blocks, mcmc, replica_seed(ACC_SEED, 90 + i as u64))
            .unwrap();
        bound_ok &= rep.gap_estimate <= rep.envelope;
        envelopes.push(rep.envelope);
        gaps.push(rep.gap_estimate);
    }
    let decreasing = envelopes[0] > envelopes[1] && envelopes[1] > envelopes[2];
    let pass = decreasing && bound_ok;
    report(
        "09 block approximation",
        pass,
        &format!(
            "envelopes at T=16,32,64: {:.3}, {:.3}, {:.3} (decreasing={decreasing}); \
             mcmc gaps {:.4}, {:.4}, {:.4} all below their envelopes={bound_ok}",
            envelopes[0], envelopes[1], envelopes[2], gaps[0], gaps[1], gaps[2]
        ),
    );
}

#[test]
fn criterion_10_determinism_and_stability() {
    let fx = &*FIXTURE;
    // Bit-identical replay of the spectral pipeline and the endpoint chain.
    let kernel = acceptance_kernel(1.0);
    let pipe2 = run_spectral_pipeline(
        &kernel,
        1.0,
        1.0 / 16.0,
        2000,
        ACC_SEED,
        BlockSampling::PriorImportance,
    )
    .unwrap();
    let bits_ok = pipe2.spectral.lambda0.to_bits() == fx.pipe.spectral.lambda0.to_bits()
        && pipe2.variance.sigma2_classical.to_bits()
            == fx.pipe.variance.sigma2_classical.to_bits()
        && pipe2.spectral.delta.to_bits() == fx.pipe.spectral.delta.to_bits();
    let mcmc2 = estimate_endpoint(&fx.mcmc_config, StartMode::Prior).unwrap();
    let mcmc_bits_ok = mcmc2.variance[0].to_bits() == fx.mcmc.variance[0].to_bits()
        && mcmc2.ks_stat.to_bits() == fx.mcmc.ks_stat.to_bits();
    // N -> 2N stability (first 2000 blocks shared by seeding).
    let big = sample_block_measure(
        &kernel,
        1.0,
        1.0 / 16.0,
        4000,
        ACC_SEED,
        BlockSampling::PriorImportance,
    )
    .unwrap();
    let big_pipe = pipeline_from_ensemble_routes(&kernel, big, false).unwrap();
    let lam_n = (big_pipe.spectral.lambda0 - fx.pipe.spectral.lambda0).abs()
        / fx.pipe.spectral.lambda0;
    let sig_n = (big_pipe.variance.sigma2_classical - fx.pipe.variance.sigma2_classical).abs()
        / fx.pipe.variance.sigma2_classical;
    // dt -> dt/2 stability through the coupled Levy refinement.
    let mut refined = fx.pipe.ensemble.refine_half(replica_seed(ACC_SEED, 101));
    refined.reweight(&kernel).unwrap();
    let refined_pipe = pipeline_from_ensemble_routes(&kernel, refined, false).unwrap();
    let lam_dt = (refined_pipe.spectral.lambda0 - fx.pipe.spectral.lambda0).abs()
        / fx.pipe.spectral.lambda0;
    let sig_dt = (refined_pipe.variance.sigma2_classical - fx.pipe.variance.sigma2_classical)
        .abs()
        / fx.pipe.variance.sigma2_classical;
    let stable = lam_n <= 0.02 && sig_n <= 0.02 && lam_dt <= 0.02 && sig_dt <= 0.02;
    let pass = bits_ok && mcmc_bits_ok && stable;
    report(
        "10 determinism and stability",
        pass,
        &format!(
            "replay bit-identical: spectral={bits_ok} mcmc={mcmc_bits_ok}; \
             N->2N: d(lambda0)={lam_n:.4} d(sigma2)={sig_n:.4}; \
             dt->dt/2: d(lambda0)={lam_dt:.4} d(sigma2)={sig_dt:.4} (caps 0.02)"
        ),
    );
}
