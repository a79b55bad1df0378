//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use varac::critic::CriticFixedPoint;
use varac::exec::{map_indexed, Execution};
use varac::features::compatible_features;
use varac::harness::{
    export_history, relative_error, run_training, Experiment, ExperimentConfig, FD_REL_TOL,
};
use varac::mdp::{MdpModel, SoftmaxPolicy, DEFAULT_MAX_EPISODE_STEPS};
use varac::montecarlo::{episode_rng, visit_statistics};
use varac::oracle::{
    evaluate, exact_gradient, finite_difference_gradient, projected_gradient, DEFAULT_FD_STEP,
    IDENTITY_TOL,
};
use varac::{models, unbiasedness_check, CriticState};

const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
const REQUIRED_SEEDS: usize = 8;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_theta(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
}

/// Variance by the law of total variance, independent of the second
/// moment: `V(x) = Σ_u π(u|x) Σ_y P(y|x,u) (r(x) + J(y) - J(x))² + Σ_y P_π(y|x) V(y)`.
fn variance_by_total_variance(model: &MdpModel, policy: &SoftmaxPolicy, j: &[f64]) -> Vec<f64> {
    let ns = model.n_states();
    let na = model.n_actions();
    let mut c = vec![0.0; ns];
    let mut p = vec![vec![0.0; ns]; ns];
    for x in model.nonterminal_states() {
        let pi = policy.action_distribution(x).unwrap();
        for u in 0..na {
            for y in 0..ns {
                let pr = pi[u] * model.prob(x, u, y);
                c[x] += pr * (model.reward(x) + j[y] - j[x]).powi(2);
                if !model.is_terminal(y) {
                    p[x][y] += pr;
                }
            }
        }
    }
    // every battery policy terminates geometrically fast
    let mut v = vec![0.0; ns];
    for _ in 0..5000 {
        v = (0..ns)
            .map(|x| c[x] + (0..ns).map(|y| p[x][y] * v[y]).sum::<f64>())
            .collect();
    }
    v
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (_, model) in models::battery() {
        let n = SoftmaxPolicy::param_count(&model);
        for k in 0..5 {
            let theta = if k == 0 { vec![0.0; n] } else { random_theta(&mut rng, n, 2.0) };
            let pi = SoftmaxPolicy::new(&model, theta).unwrap();
            let ev = evaluate(&model, &pi, 0.0).unwrap();
            let na = model.n_actions();
            let v_tv = variance_by_total_variance(&model, &pi, &ev.j.state);
            worst = worst.max(max_abs_diff(&v_tv, &ev.v.state));
            for i in 0..ev.v.sa.len() {
                worst = worst.max((ev.v.sa[i] - (ev.m.sa[i] - ev.j.sa[i].powi(2))).abs());
            }
            for x in model.nonterminal_states() {
                let probs = pi.action_distribution(x).unwrap();
                let avg = |t: &[f64]| (0..na).map(|u| probs[u] * t[x * na + u]).sum::<f64>();
                worst = worst.max((avg(&ev.j.sa) - ev.j.state[x]).abs());
                worst = worst.max((avg(&ev.m.sa) - ev.m.state[x]).abs());
                worst = worst.max((avg(&ev.v.sa) + avg(&ev.j.sa.iter().map(|j| j * j).collect::<Vec<_>>())
                    - avg(&ev.j.sa).powi(2)
                    - ev.v.state[x])
                    .abs());
                for u in 0..na {
                    worst = worst.max((ev.q.sa[x * na + u] - ev.q.state[x] * probs[u]).abs());
                }
            }
            checked += 1;
        }
    }
    outcome(
        worst < IDENTITY_TOL,
        format!("{checked} model/policy pairs, worst identity residual {worst:.2e} (tol 1e-9)"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    let mut points = 0;
    for (_, model) in models::battery() {
        let n = SoftmaxPolicy::param_count(&model);
        for _ in 0..50 {
            let pi = SoftmaxPolicy::new(&model, random_theta(&mut rng, n, 2.0)).unwrap();
            let mu = rng.random_range(0.0..=1.0);
            let exact = exact_gradient(&model, &pi, mu).unwrap();
            let fd = finite_difference_gradient(&model, &pi, mu, DEFAULT_FD_STEP).unwrap();
            worst = worst.max(relative_error(&exact.grad_eta, &fd));
            points += 1;
        }
    }
    outcome(
        worst < FD_REL_TOL,
        format!("{points} (theta, mu) points, max relative error {worst:.2e} (tol 1e-6)"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    let mut models_checked = 0;
    for (_, model) in models::battery() {
        if model.n_actions() < 2 {
            continue;
        }
        models_checked += 1;
        let n = SoftmaxPolicy::param_count(&model);
        for k in 0..10 {
            let theta = if k == 0 { vec![0.0; n] } else { random_theta(&mut rng, n, 2.0) };
            let pi = SoftmaxPolicy::new(&model, theta).unwrap();
            let mu = [0.0, 0.1, 0.2, 0.5, 1.0][k % 5];
            let ev = evaluate(&model, &pi, mu).unwrap();
            let map = compatible_features(&pi);
            let proj = projected_gradient(&model, &pi, &map, &map, &ev).unwrap();
            let exact = exact_gradient(&model, &pi, mu).unwrap();
            worst = worst.max(relative_error(&proj.grad_eta, &exact.grad_eta));
            worst = worst.max(relative_error(&proj.grad_v, &exact.grad_v));
        }
    }
    outcome(
        worst < 1e-9,
        format!("{models_checked} models, projected vs exact gradient max relative error {worst:.2e} (tol 1e-9)"),
    )
}

fn criterion_4() -> Outcome {
    let model = models::geo(0.9);
    let pi = SoftmaxPolicy::zeros(&model);
    let ev = evaluate(&model, &pi, 0.0).unwrap();
    let qt = ev.qtilde().unwrap();
    let stats =
        visit_statistics(&model, &pi, 100_000, 404, Execution::Parallel, DEFAULT_MAX_EPISODE_STEPS).unwrap();
    let na = model.n_actions();
    let mut zs = Vec::new();
    for x in model.nonterminal_states() {
        for u in 0..na {
            let i = x * na + u;
            zs.push(stats.weighted_visits[i].z(qt.sa[i]));
        }
    }
    let worst = zs.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    outcome(
        worst < 3.0,
        format!(
            "GEO theta=0, 1e5 episodes, weighted occupancy (cont, stop) = ({:.4}, {:.4}), max |z| {worst:.2}",
            qt.sa[0], qt.sa[1]
        ),
    )
}

fn criterion_5() -> Outcome {
    let model = models::geo(0.9);
    let pi = SoftmaxPolicy::zeros(&model);
    let map = compatible_features(&pi);
    let fp = CriticFixedPoint::compute(&model, &pi, &map, &map).unwrap();
    let schedule = varac::StepSchedule::default();
    let mut critic = CriticState::zeros(map.dim(), map.dim());
    for i in 0..10_000u64 {
        let traj = varac::simulate_episode(&model, &pi, &mut episode_rng(505, i), DEFAULT_MAX_EPISODE_STEPS)
            .unwrap();
        critic = critic.update(&traj, &map, &map, &pi, schedule.alpha(i)).unwrap();
    }
    let gap = critic.fixed_point_gap(&fp);
    outcome(
        gap < 0.05,
        format!(
            "1e4 critic-only episodes: w_J {:.4} (fp {:.4}), w_M {:.4} (fp {:.4}), w~_J {:.4} (fp {:.4}), J0 {:.4} (fp {:.4}); gap {gap:.4} (tol 0.05)",
            critic.w_j[0], fp.w_j[0], critic.w_m[0], fp.w_m[0], critic.w_tilde_j[0], fp.w_tilde_j[0], critic.j0, fp.j0
        ),
    )
}

fn criterion_6() -> Outcome {
    let model = models::geo(0.9);
    let pi = SoftmaxPolicy::zeros(&model);
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, mu) in [0.0, 0.2].into_iter().enumerate() {
        let r = unbiasedness_check(&model, &pi, mu, 100_000, 606 + k as u64, Execution::Parallel, DEFAULT_MAX_EPISODE_STEPS)
            .unwrap();
        pass &= r.pass;
        parts.push(format!(
            "mu={mu}: mean {:.5} +- {:.5} vs exact {:.5} (z {:.2})",
            r.mean[0].mean, r.mean[0].std_err, r.exact[0], r.z[0]
        ));
    }
    outcome(pass, parts.join("; "))
}

/// Oracle-optimal `θ` on GEO by grid scan of `η(θ)`.
fn geo_optimum(mu: f64) -> f64 {
    let model = models::geo(0.9);
    let pi = SoftmaxPolicy::zeros(&model);
    let eta = |t: f64| evaluate(&model, &pi.with_theta(vec![t]).unwrap(), mu).unwrap().eta;
    let mut best = (f64::NEG_INFINITY, 0.0);
    // coarse pass over the clamp box, then a fine one around the winner
    for k in 0..=3000 {
        let t = -15.0 + 0.01 * k as f64;
        let e = eta(t);
        if e > best.0 {
            best = (e, t);
        }
    }
    let centre = best.1;
    for k in 0..=2000 {
        let t = centre - 0.01 + 1e-5 * k as f64;
        let e = eta(t);
        if e > best.0 {
            best = (e, t);
        }
    }
    best.1
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn geo_runs(mu: f64, episodes: u64) -> Vec<(f64, f64, f64, f64)> {
    let seeds: Vec<u64> = SEEDS.collect();
    map_indexed(Execution::Parallel, seeds.len(), |k| {
        let mut c = ExperimentConfig::new("geo.json", mu, episodes, "unused.csv");
        c.seed = seeds[k];
        c.eval_every = episodes / 10;
        let exp = Experiment::with_model(models::geo(0.9), c).unwrap();
        let h = run_training(&exp).unwrap();
        let r = h.last();
        (r.theta[0], r.grad_norm, r.j_oracle, r.v_oracle)
    })
}

fn criterion_7() -> Outcome {
    let theta_star = geo_optimum(0.2);
    let p_star = sigmoid(theta_star);
    let runs = geo_runs(0.2, 200_000);
    let mut passed = 0;
    let mut lines = Vec::new();
    for (seed, (theta, grad, _, _)) in SEEDS.zip(&runs) {
        let p = sigmoid(*theta);
        let ok = *grad < 0.02 && (p - p_star).abs() < 0.05;
        passed += ok as usize;
        lines.push(format!("seed {seed}: pi(cont) {p:.4} |grad| {grad:.4}{}", if ok { "" } else { " x" }));
    }
    outcome(
        passed >= REQUIRED_SEEDS,
        format!(
            "optimum pi(cont) {p_star:.4} (theta {theta_star:.4}); {passed}/10 seeds within tolerance (need 8) [{}]",
            lines.join(", ")
        ),
    )
}

fn criterion_8() -> Outcome {
    let mus = [0.0, 0.1, 0.2, 0.5];
    let per_mu: Vec<Vec<(f64, f64, f64, f64)>> = mus.iter().map(|&mu| geo_runs(mu, 200_000)).collect();
    let mut conforming = 0;
    let mut worst_seed = String::new();
    for s in 0..SEEDS.count() {
        let j: Vec<f64> = per_mu.iter().map(|r| r[s].2).collect();
        let v: Vec<f64> = per_mu.iter().map(|r| r[s].3).collect();
        let ok = j.windows(2).all(|w| w[1] <= w[0]) && v.windows(2).all(|w| w[1] <= w[0]);
        if ok {
            conforming += 1;
        } else if worst_seed.is_empty() {
            worst_seed = format!("; first violation seed {}: J {j:.3?} V {v:.3?}", s + 1);
        }
    }
    let mean = |k: usize, f: fn(&(f64, f64, f64, f64)) -> f64| {
        per_mu[k].iter().map(f).sum::<f64>() / per_mu[k].len() as f64
    };
    let summary: Vec<String> = (0..mus.len())
        .map(|k| format!("mu={}: J {:.3} V {:.3}", mus[k], mean(k, |r| r.2), mean(k, |r| r.3)))
        .collect();
    outcome(
        conforming >= REQUIRED_SEEDS,
        format!("{conforming}/10 seeds monotone (need 8); seed means [{}]{worst_seed}", summary.join(", ")),
    )
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let mut c = ExperimentConfig::new("geo.json", 0.2, 20_000, dir.path().join(name));
        c.seed = 909;
        c.eval_every = 100;
        let exp = Experiment::with_model(models::geo(0.9), c).unwrap();
        let h = run_training(&exp).unwrap();
        export_history(&h, &exp.config.output).unwrap();
        std::fs::read(&exp.config.output).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    outcome(
        a == b && !a.is_empty(),
        format!("two 2e4-episode runs, {} bytes each, identical: {}", a.len(), a == b),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        ("oracle identities", criterion_1, Duration::from_secs(1)),
        ("analytic vs finite-difference gradient", criterion_2, Duration::from_secs(10)),
        ("compatibility of projected gradient", criterion_3, Duration::from_secs(5)),
        ("weighted occupancy vs Monte Carlo", criterion_4, Duration::from_secs(30)),
        ("critic fixed point", criterion_5, Duration::from_secs(10)),
        ("actor estimator unbiasedness", criterion_6, Duration::from_secs(60)),
        ("end-to-end convergence", criterion_7, Duration::from_secs(600)),
        ("risk trade-off", criterion_8, Duration::from_secs(1200)),
        ("reproducibility", criterion_9, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let in_time = took <= *budget;
        let pass = o.pass && in_time;
        failed += !pass as usize;
        println!(
            "criterion {} {} {name}: {} [{:.2}s of {}s]",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {}/9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
