use pathgibbs::gibbs::{estimate_endpoint, GibbsConfig, McmcParams, StartMode};
use pathgibbs::interactions::KernelConfig;
use pathgibbs::paths::PathGrid;
use pathgibbs::transfer::*;

fn main() {
    for (a, b) in [(0.25, 0.4), (0.3, 0.4), (0.25, 0.45)] {
        let mut kc = KernelConfig::preset("mollifier_product", 1.0);
        kc.psi_half_width = Some(a);
        kc.phi_radius = Some(b);
        let kernel = kc.build().unwrap();
        // transfer at acceptance config
        let pipe = run_spectral_pipeline(&kernel, 1.0, 1.0/16.0, 2000, 42, BlockSampling::PriorImportance).unwrap();
        // dt refinement
        let mut refined = pipe.ensemble.refine_half(4242);
        refined.reweight(&kernel).unwrap();
        let rpipe = pipeline_from_ensemble_routes(&kernel, refined, false).unwrap();
        let dlam = (rpipe.spectral.lambda0 - pipe.spectral.lambda0).abs() / pipe.spectral.lambda0;
        let dsig_dt = (rpipe.variance.sigma2_classical - pipe.variance.sigma2_classical).abs() / pipe.variance.sigma2_classical;
        // N doubling
        let big = sample_block_measure(&kernel, 1.0, 1.0/16.0, 4000, 42, BlockSampling::PriorImportance).unwrap();
        let bpipe = pipeline_from_ensemble_routes(&kernel, big, false).unwrap();
        let dlam_n = (bpipe.spectral.lambda0 - pipe.spectral.lambda0).abs() / pipe.spectral.lambda0;
        let dsig_n = (bpipe.variance.sigma2_classical - pipe.variance.sigma2_classical).abs() / pipe.variance.sigma2_classical;
        // MCMC T=64
        let cfg = GibbsConfig {
            kernel: kernel.clone(),
            grid: PathGrid::new(1024, 1.0/16.0, 3),
            mcmc: McmcParams { block_len: 8, proposals_per_sweep: 128, sweeps: 10_500, burn_in: 500, thinning: 1 },
            seed: 11,
        };
        let st = estimate_endpoint(&cfg, StartMode::Prior).unwrap();
        let (v, se) = st.pooled_variance();
        println!("(psi={a}, phi={b}): lam={:.4} ess={:.0} sig2_tr={:.4}+-{:.4} | dt: dlam={:.4} dsig={:.4} | N: dlam={:.4} dsig={:.4} | mcmc={:.4}+-{:.4} agree={:.4}",
            pipe.spectral.lambda0, pipe.ensemble.ess, pipe.variance.sigma2_classical, pipe.variance.jitter_se,
            dlam, dsig_dt, dlam_n, dsig_n, v, se, (pipe.variance.sigma2_classical - v).abs()/v);
    }
}
