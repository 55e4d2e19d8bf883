use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp1};
use torus_sir_core::math::replicate_seed;
use torus_sir_core::simulator::{
    exact_total_rate, infection_rate, run, run_tracked, sample_initial, total_event_rate_bound, Density, EventKind,
    Health, InitialCondition, Population, SimConfig, Simulation, StepOutcome,
};
use torus_sir_core::spectral::{basis_eval, TrigPolynomial};
use torus_sir_core::stats::{estimate, ks_p_value, ks_statistic, mean, variance};
use torus_sir_core::torus::kernel_column_sums;
use torus_sir_core::{BasisIndex, KernelSpec, Region, TorusPoint};

fn config(n: usize, beta: f64, alpha: f64, gamma: f64, kernel: KernelSpec, region: Region, p: f64) -> SimConfig {
    SimConfig {
        n_agents: n,
        beta,
        alpha,
        gamma,
        kernel,
        initial: InitialCondition { region, p, density: Density::Uniform },
        horizon: 1.0,
        snapshot_times: vec![0.0, 0.5, 1.0],
        seed: 7,
    }
}

fn bump() -> KernelSpec {
    KernelSpec::bump(0.2, 4).unwrap()
}

fn random_population(rng: &mut ChaCha8Rng, n: usize) -> Population {
    let positions = (0..n).map(|_| TorusPoint::wrap(rng.random(), rng.random()).unwrap()).collect();
    let states = (0..n)
        .map(|_| match rng.random_range(0..3) {
            0 => Health::Susceptible,
            1 => Health::Infected,
            _ => Health::Recovered,
        })
        .collect();
    Population::new(positions, states).unwrap()
}

#[test]
fn initial_sampling_edge_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let none = InitialCondition { region: Region::Empty, p: 0.7, density: Density::Uniform };
    assert_eq!(sample_initial(50, &none, &mut rng).unwrap().counts(), (50, 0, 0));
    let all = InitialCondition { region: Region::Whole, p: 1.0, density: Density::Uniform };
    assert_eq!(sample_initial(50, &all, &mut rng).unwrap().counts(), (0, 50, 0));
}

#[test]
fn initial_infected_count_is_binomial() {
    let init = InitialCondition { region: Region::left_half(), p: 0.5, density: Density::Uniform };
    let n = 10_000;
    let counts: Vec<f64> = (0..200)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(11, r));
            sample_initial(n, &init, &mut rng).unwrap().counts().1 as f64
        })
        .collect();
    let half_width = 3.0 * (n as f64 * 0.25 * 0.75).sqrt() / (200f64).sqrt();
    assert!((mean(&counts) - 2500.0).abs() < half_width, "{}", mean(&counts));
}

#[test]
fn cosine_density_sampling_matches_marginal() {
    let init =
        InitialCondition { region: Region::Empty, p: 0.0, density: Density::Cosine { amplitude: 0.5, axis: 0 } };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pop = sample_initial(20_000, &init, &mut rng).unwrap();
    // Marginal CDF of x1: x + (0.5 / 2 pi) sin(2 pi x).
    let xs: Vec<f64> = pop.positions().iter().map(|p| p.x1()).collect();
    let two_pi = 2.0 * std::f64::consts::PI;
    let d = ks_statistic(&xs, |x| x + 0.5 / two_pi * (two_pi * x).sin()).unwrap();
    assert!(ks_p_value(d, xs.len()) > 0.01, "D = {d}");
}

#[test]
fn infection_rate_examples() {
    let kernel = bump();
    let a = TorusPoint::wrap(0.1, 0.1).unwrap();
    let b = TorusPoint::wrap(0.6, 0.6).unwrap();
    let pop = Population::new(vec![a, b], vec![Health::Susceptible, Health::Infected]).unwrap();
    let sums = kernel_column_sums(&kernel, pop.positions()).unwrap();
    assert_eq!(infection_rate(0, &pop, &kernel, 2.0, &sums).unwrap(), 0.0);

    let pop = Population::new(vec![a, b], vec![Health::Susceptible, Health::Susceptible]).unwrap();
    assert_eq!(infection_rate(0, &pop, &kernel, 2.0, &sums).unwrap(), 0.0);

    let constant = KernelSpec::constant(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pop = random_population(&mut rng, 40);
    let sums = kernel_column_sums(&constant, pop.positions()).unwrap();
    let i = pop.susceptible()[0] as usize;
    let expected = 0.6 * pop.infected().len() as f64 / 40.0;
    assert!((infection_rate(i, &pop, &constant, 0.6, &sums).unwrap() - expected).abs() < 1e-15);
}

#[test]
fn envelope_formula_and_dominance() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pop = Population::new(vec![TorusPoint::ORIGIN; 12], [vec![Health::Infected; 10], vec![Health::Susceptible; 2]].concat())
        .unwrap();
    assert_eq!(total_event_rate_bound(&pop, 1.0, 2.0), 30.0);
    let kernel = KernelSpec::bump(0.15, 4).unwrap();
    for _ in 0..10_000 {
        let n = rng.random_range(1..30);
        let pop = random_population(&mut rng, n);
        let exact = exact_total_rate(&pop, &kernel, 0.7, 1.3).unwrap();
        let bound = total_event_rate_bound(&pop, 0.7, 1.3);
        assert!(exact <= bound * (1.0 + 1e-12), "{exact} > {bound}");
    }
}

/// One proposal from a fixed state, repeated with fresh randomness, against the
/// exact rates: P(recover j) = alpha / E, P(infect i) = rate_i / E, P(reject) = rest.
#[test]
fn one_step_outcomes_follow_exact_rates() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let kernel = KernelSpec::bump(0.3, 4).unwrap();
    let positions: Vec<TorusPoint> =
        (0..10).map(|_| TorusPoint::wrap(rng.random::<f64>() * 0.5, rng.random::<f64>() * 0.5).unwrap()).collect();
    let states = vec![
        Health::Infected,
        Health::Infected,
        Health::Infected,
        Health::Susceptible,
        Health::Susceptible,
        Health::Susceptible,
        Health::Susceptible,
        Health::Susceptible,
        Health::Recovered,
        Health::Susceptible,
    ];
    let pop = Population::new(positions, states).unwrap();
    let (alpha, beta) = (0.4, 1.5);
    let mut cfg = config(10, beta, alpha, 0.0, kernel, Region::Whole, 0.5);
    cfg.horizon = 1e9;
    let sums = kernel_column_sums(&kernel, pop.positions()).unwrap();
    let envelope = total_event_rate_bound(&pop, alpha, beta);
    let mut expected: HashMap<(u8, u32), f64> = HashMap::new();
    for &j in pop.infected() {
        expected.insert((1, j), alpha / envelope);
    }
    let mut accepted = 0.0;
    for &i in pop.susceptible() {
        let r = infection_rate(i as usize, &pop, &kernel, beta, &sums).unwrap() / envelope;
        accepted += r;
        expected.insert((0, i), r);
    }
    expected.insert((2, 0), 1.0 - accepted - alpha * 3.0 / envelope);

    let trials = 200_000;
    let mut observed: HashMap<(u8, u32), f64> = HashMap::new();
    for t in 0..trials {
        let rng = ChaCha8Rng::seed_from_u64(replicate_seed(77, t));
        let mut sim = Simulation::from_parts(&cfg, pop.clone(), rng);
        let key = match sim.step(1e9).unwrap() {
            StepOutcome::Event(e) => (if e.kind == EventKind::Infection { 0 } else { 1 }, e.agent),
            StepOutcome::Rejected => (2, 0),
            StepOutcome::Reached => panic!("proposal must occur before the horizon"),
        };
        *observed.entry(key).or_default() += 1.0;
    }
    let mut chi2 = 0.0;
    let mut cells = 0;
    for (key, p) in &expected {
        let e = p * trials as f64;
        let o = observed.remove(key).unwrap_or(0.0);
        if e > 0.0 {
            chi2 += (o - e) * (o - e) / e;
            cells += 1;
        } else {
            assert_eq!(o, 0.0, "impossible outcome {key:?} observed");
        }
    }
    assert!(observed.is_empty(), "unexpected outcomes {observed:?}");
    // 99.9% quantile of chi-square with at most 9 degrees of freedom is below 28.
    assert!(chi2 < 28.0, "chi2 = {chi2} over {cells} cells");
}

#[test]
fn pure_recovery_gaps_are_exponential_order_statistics() {
    let alpha = 0.8;
    let mut normalized = Vec::new();
    for r in 0..1000 {
        let mut cfg = config(20, 0.0, alpha, 0.05, bump(), Region::Whole, 0.5);
        cfg.seed = replicate_seed(3, r);
        cfg.horizon = 60.0;
        cfg.snapshot_times = vec![0.0];
        let out = run(&cfg).unwrap();
        let i0 = out.snapshots[0].counts().1;
        assert_eq!(out.events.len(), i0, "every initial infected recovers, nobody else is infected");
        let mut prev = 0.0;
        for (k, e) in out.events.iter().enumerate() {
            assert_eq!(e.kind, EventKind::Recovery);
            normalized.push(alpha * (i0 - k) as f64 * (e.time - prev));
            prev = e.time;
        }
    }
    let d = ks_statistic(&normalized, |x| 1.0 - (-x).exp()).unwrap();
    assert!(ks_p_value(d, normalized.len()) > 0.01, "D = {d}");
}

#[test]
fn frozen_positions_without_diffusion() {
    let mut cfg = config(300, 2.0, 0.5, 0.0, bump(), Region::left_half(), 0.3);
    cfg.snapshot_times = vec![0.0, 0.3, 0.7, 1.0];
    let out = run(&cfg).unwrap();
    assert!(!out.events.is_empty());
    for s in &out.snapshots[1..] {
        assert_eq!(s.positions, out.snapshots[0].positions);
    }
}

#[test]
fn runs_are_deterministic() {
    let cfg = config(200, 2.0, 0.5, 0.05, bump(), Region::left_half(), 0.3);
    assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(run(&cfg).unwrap().events, run(&other).unwrap().events);
}

#[test]
fn trivial_runs() {
    let mut cfg = config(100, 2.0, 0.5, 0.05, bump(), Region::Whole, 0.3);
    cfg.horizon = 0.0;
    cfg.snapshot_times = vec![0.0];
    let out = run(&cfg).unwrap();
    assert_eq!(out.snapshots.len(), 1);
    assert!(out.events.is_empty());

    let mut cfg = config(100, 2.0, 0.5, 0.05, bump(), Region::Whole, 0.0);
    cfg.horizon = 3.0;
    cfg.snapshot_times = vec![0.0, 3.0];
    let out = run(&cfg).unwrap();
    assert!(out.events.is_empty());
    assert_eq!(out.snapshots[1].counts(), (100, 0, 0));
    assert_ne!(out.snapshots[1].positions, out.snapshots[0].positions);
}

#[test]
fn event_log_is_consistent_with_snapshots() {
    let mut cfg = config(400, 3.0, 0.6, 0.05, bump(), Region::left_half(), 0.2);
    cfg.horizon = 2.0;
    cfg.snapshot_times = vec![0.0, 0.5, 1.0, 2.0];
    let out = run(&cfg).unwrap();
    let mut states = out.snapshots[0].states.clone();
    let mut next = 1;
    let mut last = 0.0;
    for e in &out.events {
        assert!(e.time > last);
        last = e.time;
        while next < out.snapshots.len() && out.snapshots[next].time < e.time {
            assert_eq!(out.snapshots[next].states, states);
            next += 1;
        }
        let s = &mut states[e.agent as usize];
        match e.kind {
            EventKind::Infection => {
                assert_eq!(*s, Health::Susceptible);
                *s = Health::Infected;
            }
            EventKind::Recovery => {
                assert_eq!(*s, Health::Infected);
                *s = Health::Recovered;
            }
        }
    }
    for snap in &out.snapshots[next..] {
        assert_eq!(snap.states, states);
    }
    for snap in &out.snapshots {
        let (s, i, r) = snap.counts();
        assert_eq!(s + i + r, 400);
        let m = snap.empirical_measures();
        let one = |a: &[(TorusPoint, f64)]| torus_sir_core::simulator::pair(a, |_| 1.0);
        assert!((one(&m.susceptible) - s as f64 / 400.0).abs() < 1e-12);
        assert!((one(&m.infected) - i as f64 / 400.0).abs() < 1e-12);
        assert!((one(&m.recovered) - r as f64 / 400.0).abs() < 1e-12);
        assert!((one(&m.total) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn initial_single_mode_pairing_has_unit_variance() {
    let idx = BasisIndex::new(3, 2, 2).unwrap();
    let n = 10_000;
    let init = InitialCondition { region: Region::Empty, p: 0.0, density: Density::Uniform };
    let vals: Vec<f64> = (0..100)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(5, r));
            let pop = sample_initial(n, &init, &mut rng).unwrap();
            pop.positions().iter().map(|&p| basis_eval(idx, p)).sum::<f64>() / n as f64
        })
        .collect();
    // Brute-force oracle for Var f(X): many independent uniform draws.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let draws: Vec<f64> =
        (0..400_000).map(|_| basis_eval(idx, TorusPoint::wrap(rng.random(), rng.random()).unwrap())).collect();
    let oracle_var = variance(&draws);
    assert!((oracle_var - 1.0).abs() < 0.01, "{oracle_var}");
    let est = estimate(&vals).unwrap();
    assert!(est.z_score(0.0).abs() < 3.0);
    // Sample variance of 100 draws: relative sd sqrt(2/99) ~ 0.14.
    let ratio = variance(&vals) * n as f64 / oracle_var;
    assert!((ratio - 1.0).abs() < 0.45, "{ratio}");
    assert!((variance(&vals) * n as f64 / 4.0 - 1.0).abs() > 0.45);
}

#[test]
fn homogeneous_reduction_matches_gillespie_oracle() {
    let (n, beta, alpha, p) = (500, 0.6, 0.3, 0.05);
    let times = [1.0, 2.0, 4.0];
    let reps = 200;
    let mut sim_s = vec![Vec::new(); 3];
    let mut sim_i = vec![Vec::new(); 3];
    for r in 0..reps {
        let mut cfg = config(n, beta, alpha, 0.0, KernelSpec::constant(1.0).unwrap(), Region::Whole, p);
        cfg.seed = replicate_seed(100, r);
        cfg.horizon = 4.0;
        cfg.snapshot_times = times.to_vec();
        let out = run(&cfg).unwrap();
        for (k, snap) in out.snapshots.iter().enumerate() {
            let (s, i, _) = snap.counts();
            sim_s[k].push(s as f64 / n as f64);
            sim_i[k].push(i as f64 / n as f64);
        }
    }
    let mut ora_s = vec![Vec::new(); 3];
    let mut ora_i = vec![Vec::new(); 3];
    for r in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(200, r));
        let i0 = Binomial::new(n as u64, p).unwrap().sample(&mut rng) as usize;
        let path = gillespie(&mut rng, n, i0, beta, alpha, &times);
        for (k, (s, i)) in path.into_iter().enumerate() {
            ora_s[k].push(s as f64 / n as f64);
            ora_i[k].push(i as f64 / n as f64);
        }
    }
    for k in 0..3 {
        for (a, b) in [(&sim_s[k], &ora_s[k]), (&sim_i[k], &ora_i[k])] {
            let (ea, eb) = (estimate(a).unwrap(), estimate(b).unwrap());
            let z = (ea.mean - eb.mean) / (ea.se * ea.se + eb.se * eb.se).sqrt();
            assert!(z.abs() < 3.0, "t = {}: {} vs {} (z = {z})", times[k], ea.mean, eb.mean);
        }
    }
}

/// Homogeneous SIR with rates `beta S I / N` and `alpha I`; `(S, I)` at each time.
fn gillespie(rng: &mut ChaCha8Rng, n: usize, i0: usize, beta: f64, alpha: f64, times: &[f64]) -> Vec<(usize, usize)> {
    let (mut s, mut i) = (n - i0, i0);
    let mut t = 0.0;
    let mut out = Vec::new();
    let mut next = 0;
    loop {
        let inf = beta * s as f64 * i as f64 / n as f64;
        let rec = alpha * i as f64;
        let total = inf + rec;
        let dt = if total > 0.0 { <Exp1 as Distribution<f64>>::sample(&Exp1, rng) / total } else { f64::INFINITY };
        let t_next: f64 = t + dt;
        while next < times.len() && times[next] < t_next {
            out.push((s, i));
            next += 1;
        }
        if next == times.len() {
            return out;
        }
        t = t_next;
        if rng.random::<f64>() * total < inf {
            s -= 1;
            i += 1;
        } else {
            i -= 1;
        }
    }
}

#[test]
fn unit_test_function_martingale_is_centred() {
    let reps = 500;
    let mut values = vec![Vec::new(); 2];
    let mut centred_sq = vec![Vec::new(); 2];
    for r in 0..reps {
        let mut cfg = config(200, 1.0, 0.5, 0.0, KernelSpec::constant(1.0).unwrap(), Region::Whole, 0.1);
        cfg.seed = replicate_seed(300, r);
        cfg.snapshot_times = vec![0.5, 1.0];
        let out = run_tracked(&cfg, &[TrigPolynomial::constant(1.0)], 0.01).unwrap();
        let track = &out.tracks[0];
        for (k, rec) in track.records.iter().enumerate() {
            values[k].push(rec.m);
            centred_sq[k].push(rec.m * rec.m - rec.qv_m);
            // phi = 1 has no spatial part, so H is identically zero.
            assert!(rec.h.abs() < 1e-9 && rec.qv_h == 0.0);
        }
    }
    for k in 0..2 {
        assert!(estimate(&values[k]).unwrap().z_score(0.0).abs() < 3.0);
        assert!(estimate(&centred_sq[k]).unwrap().z_score(0.0).abs() < 3.0);
    }
}

#[test]
fn tracks_start_at_zero() {
    let cfg = config(200, 2.0, 0.5, 0.05, bump(), Region::left_half(), 0.3);
    let phi = TrigPolynomial::basis(BasisIndex::new(3, 2, 2).unwrap());
    let out = run_tracked(&cfg, &[phi], 0.01).unwrap();
    let first = out.tracks[0].records[0];
    assert_eq!(first.time, 0.0);
    assert_eq!((first.m, first.l, first.h, first.qv_m), (0.0, 0.0, 0.0, 0.0));
}
