//! Acceptance run: one line per criterion, non-zero exit if any fails.
//! Runtime budgets count; a criterion that passes its checks but overruns
//! its budget fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use ctbn_core::causality::{
    average_causality, causality, causality_bound, empirical_causality, kl_calibration, Direction,
};
use ctbn_core::compose::{
    compose_generators, composite_index, is_locally_independent, split_index, verify_equivalence, ConditionalFamily,
    CtbnModel, ModulatedParams,
};
use ctbn_core::estimate::{collect_stats, log_likelihood, mle_generator, occupation_fraction};
use ctbn_core::generators::{occupation_times, stationary_distribution, Generator, ProbabilityVector};
use ctbn_core::simulate::{sample_batch, sample_trajectory, SimConfig};
use ctbn_core::tickdata::{analyze_cap, quotes_from_ctbn_path, sample_skellam_quotes};
use ctbn_core::TwoFloat;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn modulated(lambda: [f64; 2], mu: [f64; 2], beta: [f64; 2], gamma: [f64; 2]) -> CtbnModel<f64> {
    CtbnModel::modulated(&ModulatedParams { lambda, mu, beta, gamma }).unwrap()
}

fn generator(rows: [[f64; 4]; 4]) -> Generator<f64> {
    Generator::from_rows(&rows.map(|r| r.to_vec())).unwrap()
}

fn golden_composition() -> Outcome {
    let (l1, m1, l2, m2, b1, b2, g1, g2) = (1.0, 2.0, 3.0, 4.0, 0.5, 0.6, 0.7, 0.8);
    let model = modulated([l1, l2], [m1, m2], [b1, b2], [g1, g2]);
    let joint = compose_generators(model.x_given_y(), model.y_given_x()).unwrap();
    let expected = [[-l1 - b1, l1, b1, 0.0], [m1, -m1 - b2, 0.0, b2], [g1, 0.0, -l2 - g1, l2], [0.0, g2, m2, -m2 - g2]];
    let mismatches = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .filter(|&(i, j)| joint.rates()[(i, j)] != expected[i][j])
        .count();
    outcome(mismatches == 0, format!("{mismatches} of 16 entries differ"))
}

fn printed_equivalence() -> Outcome {
    let (l1, m1, l2, m2, b1, b2, g1, g2) = (1.0, 2.0, 3.0, 4.0, 0.5, 0.6, 0.7, 0.8);
    let model = modulated([l1, l2], [m1, m2], [b1, b2], [g1, g2]);
    let reordered =
        generator([[-l1 - b1, b1, l1, 0.0], [g1, -l2 - g1, 0.0, l2], [m1, 0.0, -m1 - b2, b2], [0.0, m2, g2, -m2 - g2]]);
    let r = [1, 3, 2, 4];
    let forward = verify_equivalence(model.joint(), &reordered, &r).unwrap();
    let swapped = verify_equivalence(model.joint(), model.swapped().joint(), &r).unwrap();
    let identity = verify_equivalence(model.joint(), &reordered, &[1, 2, 3, 4]).unwrap();
    outcome(forward && swapped && !identity, format!("R maps display: {forward}, swapped composition: {swapped}"))
}

fn ordering_bijection() -> Outcome {
    let mut checked = 0usize;
    let mut failures = 0usize;
    for nx in 1..=50 {
        for ny in 1..=50 {
            let mut hit = vec![false; nx * ny];
            for y in 1..=ny {
                for x in 1..=nx {
                    let w = composite_index(x, y, nx).unwrap();
                    if w == 0 || w > nx * ny || hit[w - 1] || split_index(w, nx).unwrap() != (x, y) {
                        failures += 1;
                    } else {
                        hit[w - 1] = true;
                    }
                    checked += 1;
                }
            }
            failures += hit.iter().filter(|h| !**h).count();
        }
    }
    outcome(failures == 0, format!("{checked} pairs, {failures} failures"))
}

fn sparsity() -> Outcome {
    let mut r = rng(4);
    let (mut nonzero, mut worst_diag) = (0usize, 0.0f64);
    for _ in 0..10_000 {
        let (nx, ny) = (r.random_range(1..=5), r.random_range(1..=5));
        let model = random_model(&mut r, nx, ny);
        let qw = model.joint().rates();
        for w in 1..=nx * ny {
            let (x, y) = split_index(w, nx).unwrap();
            for v in 1..=nx * ny {
                let (x2, y2) = split_index(v, nx).unwrap();
                if x2 != x && y2 != y && qw[(w - 1, v - 1)] != 0.0 {
                    nonzero += 1;
                }
            }
            let expected = model.x_given_y().member(y).rate(x, x) + model.y_given_x().member(x).rate(y, y);
            worst_diag = worst_diag.max((qw[(w - 1, w - 1)] - expected).abs());
        }
    }
    outcome(
        nonzero == 0 && worst_diag <= 1e-12,
        format!("{nonzero} non-zero two-coordinate entries, worst diagonal error {worst_diag:.1e}"),
    )
}

fn kl_monte_carlo() -> Outcome {
    let q0 = Generator::two_state(1.0, 1.0).unwrap();
    let q = Generator::two_state(2.0, 2.0).unwrap();
    let p0 = stationary_distribution(&q0).unwrap();
    let occ = occupation_times(&q0, &p0, 1.0).unwrap();
    let closed = ctbn_core::causality::kl_divergence(&q0, &q, &occ).unwrap();
    let paths = sample_batch(&q0, &p0, &SimConfig::new(5, 10_000, 1.0).unwrap()).unwrap();
    let ratios: Vec<f64> = paths
        .iter()
        .map(|p| {
            let s = collect_stats(std::slice::from_ref(p)).unwrap();
            log_likelihood(&s, &q0).unwrap() - log_likelihood(&s, &q).unwrap()
        })
        .collect();
    let (mean, se) = mean_and_se(&ratios);
    let reference = 1.0 - 2f64.ln();
    outcome(
        (mean - closed).abs() <= 3.0 * se && (closed - reference).abs() <= 1e-12,
        format!("closed form {closed:.6}, Monte Carlo {mean:.6} ± {se:.6}"),
    )
}

fn local_independence() -> Outcome {
    let mut r = rng(6);
    let (mut worst_zero, mut min_positive) = (0.0f64, f64::INFINITY);
    for _ in 0..1000 {
        let (nx, ny) = (r.random_range(1..=5), r.random_range(1..=5));
        let member = random_generator(&mut r, nx, 0.05, 3.0);
        let model =
            CtbnModel::new(ConditionalFamily::repeated(member, ny).unwrap(), random_family(&mut r, ny, nx, 0.05, 3.0))
                .unwrap();
        let p0 = random_probability(&mut r, nx * ny);
        let t = r.random_range(0.1..10.0);
        worst_zero = worst_zero.max(causality(&model, &p0, t, Direction::XFromY).unwrap());
    }
    for _ in 0..1000 {
        let (nx, ny) = (r.random_range(2..=5), r.random_range(2..=5));
        let member = random_generator(&mut r, nx, 0.05, 3.0);
        let mut members = vec![member; ny];
        let k = r.random_range(0..ny);
        let (i, j) = (r.random_range(0..nx), r.random_range(0..nx - 1));
        let j = if j >= i { j + 1 } else { j };
        let mut off = members[k].rates().clone();
        for d in 0..nx {
            off[(d, d)] = 0.0;
        }
        off[(i, j)] += r.random_range(0.1..1.0);
        members[k] = Generator::from_off_diagonal(off).unwrap();
        let family = ConditionalFamily::new(members).unwrap();
        assert!(!is_locally_independent(&family, 1e-12));
        let model = CtbnModel::new(family, random_family(&mut r, ny, nx, 0.05, 3.0)).unwrap();
        let p0 = random_probability(&mut r, nx * ny);
        let t = r.random_range(0.1..10.0);
        min_positive = min_positive.min(causality(&model, &p0, t, Direction::XFromY).unwrap());
    }
    outcome(
        worst_zero <= 1e-12 && min_positive > 0.0,
        format!("identical blocks: max {worst_zero:.1e}; perturbed: min {min_positive:.3e}"),
    )
}

fn average_bound() -> Outcome {
    let mut r = rng(7);
    let mut worst_slack = f64::INFINITY;
    for _ in 0..10_000 {
        let (nx, ny) = (r.random_range(1..=5), r.random_range(1..=5));
        let model = random_model(&mut r, nx, ny);
        let p0 = random_probability(&mut r, nx * ny);
        let t = r.random_range(0.1..20.0);
        for dir in [Direction::XFromY, Direction::YFromX] {
            let avg = average_causality(&model, &p0, t, dir).unwrap();
            let bound = causality_bound(&model, &p0, t, dir).unwrap();
            worst_slack = worst_slack.min(bound - avg);
        }
    }
    outcome(worst_slack >= -1e-9, format!("smallest slack {worst_slack:.3e}"))
}

fn calibration() -> Outcome {
    let half = TwoFloat::from(0.5);
    let mut worst = 0.0f64;
    let mut worst_f64 = 0.0f64;
    let mut increasing = true;
    let mut previous: Option<TwoFloat> = None;
    for k in 0..1000 {
        let x = 10.0 * k as f64 / 999.0;
        let kappa = kl_calibration(TwoFloat::from(x)).unwrap();
        let err = (TwoFloat::from(x) - bernoulli_kl(half, kappa)).abs();
        worst = worst.max(f64::from(err));
        let kappa64 = kl_calibration(x).unwrap();
        worst_f64 = worst_f64.max((x - bernoulli_kl(0.5, kappa64)).abs());
        if let Some(p) = previous {
            increasing &= kappa > p;
        }
        previous = Some(kappa);
    }
    let at_zero = kl_calibration(0.0f64).unwrap() == 0.5 && kl_calibration(TwoFloat::from(0.0)).unwrap() == half;
    outcome(
        worst <= 1e-10 && at_zero && increasing,
        format!(
            "double-double worst {worst:.1e}, f64 worst {worst_f64:.1e}, kappa(0) = 0.5: {at_zero}, increasing: {increasing}"
        ),
    )
}

fn study_model() -> CtbnModel<f64> {
    modulated([1.0, 3.0], [2.0, 4.0], [0.5, 0.5], [0.7, 0.7])
}

fn modulated_study() -> Outcome {
    let model = study_model();
    let p0 = stationary_distribution(model.joint()).unwrap();
    let horizon = 1e4;
    let paths = sample_batch(model.joint(), &p0, &SimConfig::new(9, 200, horizon).unwrap()).unwrap();
    let (mut active, mut null) = (Vec::new(), Vec::new());
    for w in &paths {
        active.push(empirical_causality(w, 2, 2, Direction::XFromY).unwrap() / horizon);
        null.push(empirical_causality(w, 2, 2, Direction::YFromX).unwrap() / horizon);
    }
    let (hi_null, lo_active) = (quantile(&null, 0.95), quantile(&active, 0.05));
    outcome(hi_null < lo_active, format!("95th pct Y<-X {hi_null:.3e} < 5th pct X<-Y {lo_active:.3e}"))
}

fn occupation_variance() -> Outcome {
    let q = Generator::two_state(1.0, 2.0).unwrap();
    let p0 = ProbabilityVector::point(2, 1).unwrap();
    let horizon = 100.0;
    let exact = occupation_times(&q, &p0, horizon).unwrap().time_in(1) / horizon;
    let paths = sample_batch(&q, &p0, &SimConfig::new(10, 1000, horizon).unwrap()).unwrap();
    let fracs: Vec<f64> = paths.iter().map(|p| occupation_fraction(p).unwrap()[0]).collect();
    let (mean, se) = mean_and_se(&fracs);
    let var = sample_variance(&fracs);
    outcome(
        (mean - exact).abs() <= 4.0 * se && var <= 1.0 / (2.0 * horizon),
        format!("mean {mean:.5} vs {exact:.5} (se {se:.1e}), variance {var:.2e} <= {:.2e}", 1.0 / (2.0 * horizon)),
    )
}

fn mle_consistency() -> Outcome {
    let q = Generator::from_rows(&[vec![-1.5, 1.0, 0.5], vec![0.3, -1.1, 0.8], vec![2.0, 0.4, -2.4]]).unwrap();
    let p0 = ProbabilityVector::uniform(3).unwrap();
    let stats = collect_stats(&[sample_trajectory(&q, &p0, 1e5, 11).unwrap()]).unwrap();
    let est: Generator<f64> = mle_generator(&stats);
    let mut worst = 0.0f64;
    for i in 1..=3 {
        for j in (1..=3).filter(|&j| j != i) {
            let se = (q.rate(i, j) / stats.occupation[i - 1]).sqrt();
            worst = worst.max((est.rate(i, j) - q.rate(i, j)).abs() / se);
        }
    }
    outcome(worst <= 4.0, format!("largest error {worst:.2} standard errors"))
}

fn skellam_null() -> Outcome {
    let tick = 0.0001;
    let (mut kx, mut ky) = (Vec::new(), Vec::new());
    for seed in 0..200 {
        let quotes = sample_skellam_quotes(1.0, 1.0, 1e4, tick, 1200 + seed).unwrap();
        let r = analyze_cap(&quotes, 1).unwrap().summary.report;
        kx.push(r.kappa_x_from_y);
        ky.push(r.kappa_y_from_x);
    }
    let (mx, my) = (quantile(&kx, 0.5), quantile(&ky, 0.5));

    let model = study_model();
    let p0 = stationary_distribution(model.joint()).unwrap();
    let paths = sample_batch(model.joint(), &p0, &SimConfig::new(12, 200, 1e4).unwrap()).unwrap();
    let mut recovered = 0;
    for w in &paths {
        let quotes = quotes_from_ctbn_path(w, 2, tick).unwrap();
        let r = analyze_cap(&quotes, 2).unwrap().summary.report;
        if r.kappa_x_from_y > r.kappa_y_from_x {
            recovered += 1;
        }
    }
    outcome(
        mx <= 0.55 && my <= 0.55 && recovered >= 190,
        format!("median kappa {mx:.4} / {my:.4}; planted coupling recovered in {recovered} of 200"),
    )
}

fn occupation_oracle() -> Outcome {
    let mut r = rng(13);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = r.random_range(1..=20);
        let q = random_generator(&mut r, n, 0.0, 1.0);
        let p0 = random_probability(&mut r, n);
        let horizon = r.random_range(1.0..5.0);
        let exact = occupation_times(&q, &p0, horizon).unwrap();
        let approx = occupation_by_quadrature(&q, p0.as_slice(), horizon, 100_000);
        for (a, b) in exact.as_slice().iter().zip(&approx) {
            worst = worst.max((a - b).abs() / horizon);
        }
    }
    outcome(worst <= 1e-6, format!("largest error {worst:.1e} x T"))
}

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 13] = [
        (1, "golden composition", Duration::from_millis(1), golden_composition),
        (2, "printed equivalence", Duration::from_millis(1), printed_equivalence),
        (3, "ordering bijection", Duration::from_secs(1), ordering_bijection),
        (4, "composition sparsity", Duration::from_secs(10), sparsity),
        (5, "divergence vs Monte Carlo", Duration::from_secs(30), kl_monte_carlo),
        (6, "local independence iff zero", Duration::from_secs(30), local_independence),
        (7, "average below bound", Duration::from_secs(30), average_bound),
        (8, "calibration", Duration::from_secs(1), calibration),
        (9, "modulated study separation", Duration::from_secs(300), modulated_study),
        (10, "occupation fraction variance", Duration::from_secs(60), occupation_variance),
        (11, "MLE consistency", Duration::from_secs(60), mle_consistency),
        (12, "Skellam null and planted coupling", Duration::from_secs(300), skellam_null),
        (13, "occupation quadrature", Duration::from_secs(60), occupation_oracle),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= budget;
        let pass = result.pass && in_budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2}: {} | {name} | {} | {:.3} s (budget {:.3} s{})",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs_f64(),
            if in_budget { "" } else { ", over budget" },
        );
    }
    println!("{} of 13 criteria passed", 13 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
