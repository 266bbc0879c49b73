// Scratch calibration probe; run with
//   cargo run -p iem-core --release --example probe -- <section>
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use iem_core::channel::derive_stream_seed;
use iem_core::cluster;
use iem_core::iem::{self, BuiltinFPrime, IntegrationConfig};
use iem_core::local_metric::{self, ellipse};
use iem_core::prior::presets;
use iem_core::validate;

fn v2(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b])
}

fn main() {
    let section = std::env::args().nth(1).unwrap_or_else(|| "all".into());

    if section == "cluster" || section == "all" {
        let prior = presets::correlated_gmm();
        for (steps, paths) in [(200usize, 50usize), (512, 1)] {
            for seed in 0..4u64 {
                let cfg = IntegrationConfig {
                    n_steps: steps,
                    n_paths: paths,
                    seed,
                    ..Default::default()
                };
                let t0 = Instant::now();
                let sample_seed = derive_stream_seed(seed, 0x73616d70);
                let kmed_seed = derive_stream_seed(seed, 0x6b6d6564);
                let (points, labels) = prior.sample_with_components(500, sample_seed).unwrap();
                let m = iem::distance_matrix(&prior, &points, &cfg).unwrap();
                let e = iem::euclidean_matrix(&points);
                let rm = cluster::kmedoids(&m, 2, kmed_seed, 100).unwrap();
                let re = cluster::kmedoids(&e, 2, kmed_seed, 100).unwrap();
                let am = cluster::accuracy(&rm.assignments, &labels, 2).unwrap();
                let ae = cluster::accuracy(&re.assignments, &labels, 2).unwrap();
                println!(
                    "cluster steps={steps} paths={paths} seed={seed}: iem_acc={am:.3} euc_acc={ae:.3} time={:.2?}",
                    t0.elapsed()
                );
            }
        }
    }

    if section == "expansion" || section == "all" {
        let prior = presets::two_mode_gmm();
        let cfg = IntegrationConfig {
            n_paths: 200,
            seed: 0,
            ..Default::default()
        };
        let anchors = [
            v2(0.0, 1.0),
            v2(1.0, -1.0),
            v2(0.5, 0.0),
            v2(-1.0, 1.5),
            v2(2.0, -0.5),
        ];
        let t0 = Instant::now();
        for (i, x) in anchors.iter().enumerate() {
            let r = validate::check_quadratic_expansion(&prior, x, &cfg).unwrap();
            println!("expansion anchor{i}: measured={:.5} pass={}", r.measured, r.pass);
        }
        println!("expansion time={:.2?}", t0.elapsed());
    }

    if section == "fsquare" || section == "all" {
        let prior = presets::correlated_gmm();
        let cfg = IntegrationConfig {
            n_steps: 400,
            n_paths: 400,
            seed: 0,
            ..Default::default()
        };
        // density-matched pairs, equal Euclidean separation 1.6:
        // same-mode pair symmetric about the mode-1 mean along its long axis,
        // cross-mode pair symmetric about the saddle
        let u = std::f64::consts::FRAC_1_SQRT_2 * 0.8;
        let same = (v2(-u, 1.0 - u), v2(u, 1.0 + u));
        let cross = (v2(0.0, -0.8), v2(0.0, 0.8));
        let ds = iem::iem_f(&prior, &same.0, &same.1, &BuiltinFPrime::Square, &cfg).unwrap();
        let dc = iem::iem_f(&prior, &cross.0, &cross.1, &BuiltinFPrime::Square, &cfg).unwrap();
        println!(
            "fsquare same-mode={:.4} (±{:.4}) cross-mode={:.4} (±{:.4})",
            ds.value, ds.stderr, dc.value, dc.stderr
        );
        let ps = iem::iem_squared(&prior, &same.0, &same.1, &cfg).unwrap();
        let pc = iem::iem_squared(&prior, &cross.0, &cross.1, &cfg).unwrap();
        println!("plain   same-mode={:.4} cross-mode={:.4}", ps.value, pc.value);
    }

    if section == "laplace_ray" || section == "all" {
        let prior = presets::product_laplace_2d();
        for gm in [(2f64.powi(-4), 2f64.powi(4)), (2f64.powi(-2), 2f64.powi(2))] {
            let cfg = IntegrationConfig {
                gamma_min: gm.0,
                gamma_max: gm.1,
                n_steps: 200,
                n_paths: 50,
                seed: 0,
                ..Default::default()
            };
            let mut radii = Vec::new();
            for t in [0.5, 1.0, 1.5, 2.0, 2.5] {
                let x = v2(t, 1.0 + t);
                let m = local_metric::metric_hessian_form(&prior, &x, &cfg).unwrap();
                let e = ellipse(&m).unwrap();
                radii.push((t, e.radii[0], e.radii[e.radii.len() - 1]));
            }
            println!("laplace ray gamma=[{},{}]: {:?}", gm.0, gm.1, radii);
        }
    }

    if section == "contours" || section == "all" {
        let prior = presets::two_mode_gmm();
        let cfg = IntegrationConfig {
            n_steps: 400,
            n_paths: 100,
            seed: 0,
            ..Default::default()
        };
        let a = v2(0.0, 1.0); // mode-1 mean
        let b = v2(1.0, -1.0); // mode-2 mean, euclid dist sqrt(5) = 2.236
        let saddle = v2(0.5, 0.0); // euclid dist 1.118
        let d_cross = iem::iem(&prior, &a, &b, &cfg).unwrap();
        let d_saddle = iem::iem(&prior, &a, &saddle, &cfg).unwrap();
        println!("contours: cross-mode={d_cross:.4} (euclid 2.236) saddle={d_saddle:.4} (euclid 1.118)");
    }

    if section == "triplet" || section == "all" {
        let prior = presets::correlated_gmm();
        for (steps, gmax) in [(512usize, 2f64.powi(10)), (1024, 2f64.powi(12))] {
            let cfg = IntegrationConfig {
                gamma_max: gmax,
                n_steps: steps,
                n_paths: 1,
                seed: 0,
                ..Default::default()
            };
            let t0 = Instant::now();
            let t = local_metric::average_metric_triplet(&prior, 10_000, &cfg, 17).unwrap();
            let a = &t.metric_mean;
            let b = t.neg_hessian_mean.as_ref().unwrap();
            let c = &t.score_outer_mean;
            let rel = |x: &DMatrix<f64>, y: &DMatrix<f64>| (x - y).norm() / y.norm();
            println!(
                "triplet steps={steps} gmax={gmax}: |a-b|/|b|={:.4} |a-c|/|c|={:.4} |b-c|/|c|={:.4} time={:.2?}",
                rel(a, b), rel(a, c), rel(b, c), t0.elapsed()
            );
        }
    }

    if section == "immse" || section == "all" {
        for (label, prior) in [
            ("gauss", presets::std_gaussian(1)),
            ("gmm", presets::bimodal_gmm_1d()),
        ] {
            let cfg = IntegrationConfig {
                n_steps: 4096,
                seed: 0,
                ..Default::default()
            };
            for s in 0..5u64 {
                let r =
                    validate::check_pointwise_immse(&prior, 0.7, &cfg, derive_stream_seed(0, 100 + s))
                        .unwrap();
                println!("immse {label} seed{s}: measured={:.5}", r.measured);
            }
            let t0 = Instant::now();
            let r = validate::check_immse_convergence(&prior, 0.7, 2048, 100, &cfg).unwrap();
            println!(
                "immse convergence {label}: measured={:.4} config={} time={:.2?}",
                r.measured, r.config, t0.elapsed()
            );
        }
    }

    if section == "kl" || section == "all" {
        let cfg = IntegrationConfig {
            n_paths: 10,
            seed: 0,
            ..Default::default()
        };
        let t0 = Instant::now();
        let g = presets::std_gaussian(2);
        let r = validate::check_kl_decomposition(&g, &v2(1.0, 0.0), 1000, &cfg).unwrap();
        println!("kl gaussian: measured={:.5} cfg={} time={:.2?}", r.measured, r.config, t0.elapsed());
        let t0 = Instant::now();
        let gmm = presets::correlated_gmm();
        let r = validate::check_kl_decomposition(&gmm, &v2(0.0, 0.5), 1000, &cfg).unwrap();
        println!("kl gmm: measured={:.5} cfg={} time={:.2?}", r.measured, r.config, t0.elapsed());
    }

    if section == "mahalanobis" || section == "all" {
        let t0 = Instant::now();
        let reports = validate::run_suite("mahalanobis", 0).unwrap();
        for r in &reports {
            println!("{}: measured={:.5} pass={}", r.name, r.measured, r.pass);
        }
        println!("mahalanobis suite time={:.2?}", t0.elapsed());
    }

    if section == "axioms" || section == "all" {
        let t0 = Instant::now();
        let reports = validate::run_suite("axioms", 0).unwrap();
        for r in &reports {
            println!("{}: measured={:.3e} pass={} detail={}", r.name, r.measured, r.pass, r.config);
        }
        println!("axioms suite time={:.2?}", t0.elapsed());
    }

    if section == "zsuite" || section == "all" {
        let t0 = Instant::now();
        let reports = validate::run_suite("z", 0).unwrap();
        for r in &reports {
            println!("{}: measured={:.4} pass={}", r.name, r.measured, r.pass);
        }
        println!("z suite time={:.2?}", t0.elapsed());
    }

    if section == "isometry" || section == "all" {
        let t0 = Instant::now();
        let reports = validate::run_suite("isometry", 0).unwrap();
        for r in &reports {
            println!("{}: measured={:.3e} pass={}", r.name, r.measured, r.pass);
        }
        println!("isometry suite time={:.2?}", t0.elapsed());
    }
}
