use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use halpern_core::harness::quadratic_components;
use halpern_core::operator::ComponentOperators;
use halpern_core::page::{page_schedule, Branch, EstimatorMode, PageConfig, PageState};
use halpern_core::point::dist;

fn path(seed: u64, len: usize, step: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![(0..4).map(|_| rng.sample(StandardNormal)).collect::<Vec<f64>>()];
    for _ in 1..len {
        let prev = out.last().unwrap();
        out.push(prev.iter().map(|v| v + step * rng.sample::<f64, _>(StandardNormal)).collect());
    }
    out
}

#[test]
fn refresh_estimate_is_unbiased() {
    let (comps, l0) = quadratic_components(30, 4, 2).unwrap();
    let z = [0.3, -0.2, 1.0, 0.5];
    let mut mean = vec![0.0; 4];
    comps.mean_into(&z, &mut mean);
    let mut cfg = PageConfig::new(10.0, 0.5, 1.0, l0);
    cfg.full_batch_override = false;
    let reps = 20_000;
    let mut avg = vec![0.0; 4];
    for r in 0..reps {
        let mut st = PageState::new(EstimatorMode::Page(cfg), r).unwrap();
        st.update(&comps, &z).unwrap();
        for (a, e) in avg.iter_mut().zip(st.estimate().unwrap().iter()) {
            *a += e / reps as f64;
        }
    }
    // The batch is a single index, so the error of the average is
    // roughly the component spread over sqrt(reps).
    assert!(dist(&avg, &mean) < 0.1, "bias {}", dist(&avg, &mean));
}

#[test]
fn counters_add_up_and_runs_are_reproducible() {
    let (comps, l0) = quadratic_components(40, 4, 3).unwrap();
    let zs = path(1, 30, 0.05);
    let mut cfg = PageConfig::new(0.5, 2.0, 2.0, l0);
    cfg.cap_multiple = Some(3.0);
    let run = |seed| {
        let mut st = PageState::new(EstimatorMode::Page(cfg), seed).unwrap();
        let mut est = Vec::new();
        let mut drawn = 0;
        for z in &zs {
            let d = st.update(&comps, z).unwrap();
            drawn += d.samples;
            assert!(d.samples <= 3 * 40);
            if d.exact_pass {
                assert_eq!(d.samples, 40);
            }
            est.push(st.estimate().unwrap().clone());
        }
        assert_eq!(st.cumulative_samples(), drawn);
        assert_eq!(st.n1_drawn() + st.n2_drawn(), drawn);
        est
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}

#[test]
fn first_update_is_a_refresh() {
    let (comps, l0) = quadratic_components(5, 4, 0).unwrap();
    let mut st = PageState::new(EstimatorMode::Page(PageConfig::new(1.0, 0.5, 1.0, l0)), 0).unwrap();
    let d = st.update(&comps, &[0.0; 4]).unwrap();
    assert_eq!(d.branch, Branch::Refresh);
    assert_eq!(d.schedule.unwrap().p, 1.0);
}

#[test]
fn full_batch_mode_is_exact() {
    let (comps, _) = quadratic_components(7, 4, 1).unwrap();
    let mut st = PageState::new(EstimatorMode::FullBatch, 0).unwrap();
    for z in path(2, 5, 1.0) {
        st.update(&comps, &z).unwrap();
        let mut mean = vec![0.0; 4];
        comps.mean_into(&z, &mut mean);
        assert!(dist(st.estimate().unwrap(), &mean) < 1e-14);
    }
    assert_eq!(st.cumulative_samples(), 35);
}

#[test]
fn schedule_probability_matches_its_closed_form() {
    for a in [0.5, 1.0, 2.0] {
        for k in 1..50 {
            let s = page_schedule(0.1, a, 1.0, 1.0, k, Some(0.1)).unwrap();
            let r = k as f64 / (k + 1) as f64;
            let want = 1.0 - r.powf(2.0 * a) / (2.0 - r.powf(2.0 * a + 1.0));
            assert!((s.p - want).abs() < 1e-15);
            assert!(s.p > 0.0 && s.p <= 1.0);
            assert!(s.sigma_k == 0.1 / ((k + 1) as f64).powf(a));
        }
    }
}

#[test]
fn variance_tracks_the_schedule_along_a_longer_path() {
    let (comps, l0) = quadratic_components(50, 4, 6).unwrap();
    let zs = path(3, 8, 0.02);
    let n = comps.count();
    let means: Vec<Vec<f64>> = zs
        .iter()
        .map(|z| {
            let mut m = vec![0.0; 4];
            comps.mean_into(z, &mut m);
            m
        })
        .collect();
    let sigma = zs
        .iter()
        .zip(&means)
        .map(|(z, m)| {
            (0..n).map(|i| dist(&comps.evaluate(i, z).unwrap(), m).powi(2)).sum::<f64>() / n as f64
        })
        .fold(0.0, f64::max)
        .sqrt();
    let mut cfg = PageConfig::new(1.0, 1.0, sigma, l0);
    cfg.cap_multiple = None;
    cfg.full_batch_override = false;
    let reps = 1500;
    let mut mse = vec![0.0; zs.len()];
    for r in 0..reps {
        let mut st = PageState::new(EstimatorMode::Page(cfg), 50_000 + r).unwrap();
        for (k, z) in zs.iter().enumerate() {
            st.update(&comps, z).unwrap();
            mse[k] += dist(st.estimate().unwrap(), &means[k]).powi(2) / reps as f64;
        }
    }
    let slack = 1.0 + 4.0 / (reps as f64).sqrt();
    for (k, m) in mse.iter().enumerate() {
        let sk = 1.0 / (k + 1) as f64;
        assert!(*m <= sk * sk * slack, "k={k}: {m} > {}", sk * sk);
    }
}
