//! Scratch calibration runs (not part of the deliverable test suite).

use std::time::Instant;

use compopt::harness::{run_seeds_collect, seed_range, with_workers};
use compopt::metrics::{aggregate, fit_slope_tail, Axis, TraceField};
use compopt::oracle::Problem;
use compopt::problems::{
    build_consistent_mdp, build_random_mdp, BellmanProblem, LinearProblem, MeanVarianceProblem,
};
use compopt::prox::Regularizer;
use compopt::schedules::{Regime, Schedule};
use compopt::solver::{Method, SolverConfig};
use compopt::Vector;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let which = args.first().map(String::as_str).unwrap_or("a1");
    match which {
        "a1" => a1(),
        "a2" => a2(),
        "a3" => a3(),
        "a4" => a4(),
        "a5" => a5(),
        "a6" => a6(),
        "spectrum" => spectrum(),
        other => eprintln!("unknown calib target {other}"),
    }
}

fn spectrum() {
    for seed in 1..=8u64 {
        let planted = Vector::repeat(8, 1.0);
        let spec = build_consistent_mdp(20, 8, 3, 4, 0.9, &planted, seed).unwrap();
        let m = spec.residual_matrix();
        let svd = m.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let problem = BellmanProblem::new(spec).unwrap();
        let lhat = problem.strong_convexity();
        println!(
            "seed {seed}: lambda_hat {lhat:.4}, sigma_max^2 {:.4}, kappa {:.1}",
            smax * smax,
            smax * smax / lhat
        );
    }
}

fn a1() {
    let planted = Vector::repeat(8, 1.0);
    let spec = build_consistent_mdp(20, 8, 3, 4, 0.9, &planted, 1).unwrap();
    let problem = BellmanProblem::new(spec).unwrap();
    let lhat = problem.strong_convexity();
    println!("lambda_hat = {lhat:.5}");
    for factor in [0.2, 0.25, 0.3] {
        let c_a = factor / lhat;
        let schedule = Schedule::for_regime(Regime::StronglyConvexLinear)
            .with_coefficients(c_a, 2.0)
            .unwrap();
        let cfg = SolverConfig::new(Method::AscPg, schedule, Regularizer::zero(), 100_000)
            .with_stride(100);
        let start = Instant::now();
        let seeds = seed_range(1, 50);
        match with_workers(Some(1), || run_seeds_collect(&problem, &cfg, &seeds)) {
            Ok(traces) => {
                let agg = aggregate(&traces, TraceField::DistSq).unwrap();
                let fit = fit_slope_tail(&agg, Axis::Queries).unwrap();
                println!(
                    "c_a={c_a:.3} ({factor}/lhat): slope {:.3}, r2 {:.4}, terminal mean {:.3e}, {:?}",
                    fit.slope,
                    fit.r2,
                    agg.mean.last().unwrap(),
                    start.elapsed()
                );
            }
            Err(e) => println!("c_a={c_a:.3}: {e}"),
        }
    }
}

fn a2() {
    let problem = MeanVarianceProblem::synthetic(5, 100, 0.1, 0.3, 7).unwrap();
    println!("reference found: {}", problem.reference_solution().is_some());
    for c_a in [0.1, 0.15, 0.2, 0.3, 0.4] {
        let schedule = Schedule::for_regime(Regime::StronglyConvexGeneral)
            .with_coefficients(c_a, 2.0)
            .unwrap();
        let cfg = SolverConfig::new(Method::AscPg, schedule, Regularizer::zero(), 100_000)
            .with_stride(100);
        let start = Instant::now();
        let seeds = seed_range(1, 20);
        match run_seeds_collect(&problem, &cfg, &seeds) {
            Ok(traces) => {
                let agg = aggregate(&traces, TraceField::DistSq).unwrap();
                let fit = fit_slope_tail(&agg, Axis::Queries).unwrap();
                println!(
                    "c_a={c_a}: slope {:.3}, r2 {:.4}, terminal {:.3e}, {:?}",
                    fit.slope,
                    fit.r2,
                    agg.mean.last().unwrap(),
                    start.elapsed()
                );
            }
            Err(e) => println!("c_a={c_a}: {e}"),
        }
    }
}

fn a3() {
    let problem = LinearProblem::synthetic(4, 6, 0.5, 3).unwrap();
    for (b, c_b) in [(1.0, 2.0), (0.8, 2.0)] {
        let schedule = Schedule::new(2.0 / problem.smallest_gram_eigenvalue(), 1.0, c_b, b, true).unwrap();
        let cfg = SolverConfig::new(Method::AscPg, schedule, Regularizer::zero(), 30_000)
            .with_stride(30);
        let start = Instant::now();
        let seeds = seed_range(1, 100);
        match run_seeds_collect(&problem, &cfg, &seeds) {
            Ok(traces) => {
                let agg = aggregate(&traces, TraceField::TrackingErrSq).unwrap();
                let fit = fit_slope_tail(&agg, Axis::Iterations).unwrap();
                println!(
                    "b={b}: tracking slope {:.3} (want ≈ -{b}), r2 {:.4}, {:?}",
                    fit.slope,
                    fit.r2,
                    start.elapsed()
                );
            }
            Err(e) => println!("b={b}: {e}"),
        }
    }
}

fn a4() {
    let spec = build_random_mdp(100, 20, 3, 4, 0.9, 2).unwrap();
    let problem = BellmanProblem::new(spec).unwrap();
    let lhat = problem.strong_convexity();
    let svd = problem.spec().residual_matrix().svd(false, false);
    let smax = svd.singular_values.max();
    println!("lambda_hat {lhat:.5} sigma_max^2 {:.3} kappa {:.1}", smax * smax, smax * smax / lhat);
    let k = 20_000;
    for method in [Method::AscPg, Method::Scgd] {
        for factor in [0.02, 0.05, 0.1, 0.2, 0.4] {
            let c_a = factor / lhat;
            let schedule = Schedule::for_regime(Regime::StronglyConvexLinear)
                .with_coefficients(c_a, 2.0)
                .unwrap();
            let cfg = SolverConfig::new(method, schedule, Regularizer::zero(), k).with_stride(50);
            let start = Instant::now();
            let seeds = seed_range(1, 8);
            match run_seeds_collect(&problem, &cfg, &seeds) {
                Ok(traces) => {
                    let agg = aggregate(&traces, TraceField::DistSq).unwrap();
                    println!(
                        "{} c_a={c_a:.3}: terminal {:.4e}, slope {:.3}, {:?}",
                        method.name(),
                        agg.mean.last().unwrap(),
                        fit_slope_tail(&agg, Axis::Queries).map(|f| f.slope).unwrap_or(f64::NAN),
                        start.elapsed()
                    );
                }
                Err(e) => println!("{} c_a={c_a:.3}: {e}", method.name()),
            }
        }
    }
}

fn a5() {
    let mut planted = Vector::zeros(100);
    for i in 0..4 {
        planted[i] = 1.0;
    }
    let spec = build_consistent_mdp(100, 100, 3, 4, 0.9, &planted, 5).unwrap();
    let problem = BellmanProblem::new(spec).unwrap();
    let lhat = problem.strong_convexity();
    println!("lambda_hat {lhat:.5}");
    let start = Instant::now();
    for lambda in [1e-4, 1e-3, 1e-2] {
        let schedule = Schedule::for_regime(Regime::StronglyConvexLinear)
            .with_coefficients(0.5 / lhat, 2.0)
            .unwrap();
        let cfg = SolverConfig::new(
            Method::AscPg,
            schedule,
            Regularizer::l1(lambda).unwrap(),
            100_000,
        )
        .with_stride(100_000);
        let seeds = seed_range(1, 5);
        match run_seeds_collect(&problem, &cfg, &seeds) {
            Ok(traces) => {
                let mut hits = 0;
                for t in &traces {
                    let mut idx: Vec<usize> = (0..100).collect();
                    idx.sort_by(|&i, &j| t.final_x[j].abs().total_cmp(&t.final_x[i].abs()));
                    let top4: Vec<usize> = idx[..4].to_vec();
                    let ok = (0..4).all(|i| top4.contains(&i));
                    if ok {
                        hits += 1;
                    }
                }
                println!(
                    "lambda={lambda}: support hits {hits}/5, last final_x[0..6] = {:?}, {:?}",
                    traces[0].final_x.iter().take(6).collect::<Vec<_>>(),
                    start.elapsed()
                );
            }
            Err(e) => println!("lambda={lambda}: {e}"),
        }
    }
}

fn a6() {
    let problem = MeanVarianceProblem::synthetic(4, 40, 3.0, 1.0, 11).unwrap();
    println!("reference found: {}", problem.reference_solution().is_some());
    for c_a in [0.2, 0.5, 1.0, 2.0] {
        let schedule = Schedule::for_regime(Regime::NonconvexGeneral)
            .with_coefficients(c_a, 2.0)
            .unwrap();
        let cfg =
            SolverConfig::new(Method::AscPg, schedule, Regularizer::zero(), 20_000).with_stride(1);
        let start = Instant::now();
        let seeds = seed_range(1, 20);
        match run_seeds_collect(&problem, &cfg, &seeds) {
            Ok(traces) => {
                let agg = aggregate(&traces, TraceField::GradNormSq).unwrap();
                let avg = agg.prefix_mean();
                let fit = fit_slope_tail(&avg, Axis::Queries).unwrap();
                let decreasing = avg.mean.windows(2).filter(|w| w[1] <= w[0]).count();
                println!(
                    "c_a={c_a}: averaged grad^2 slope {:.3}, decreasing {}/{} steps, r2 {:.3}, {:?}",
                    fit.slope,
                    decreasing,
                    avg.mean.len() - 1,
                    fit.r2,
                    start.elapsed()
                );
            }
            Err(e) => println!("c_a={c_a}: {e}"),
        }
    }
}
