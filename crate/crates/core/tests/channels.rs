use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dmrc_core::scenario::{sample_horizon, SyntheticPlan};
use dmrc_core::{ChannelModel, ContactPlan, NetworkConfig};

fn one_pair(horizon: usize) -> NetworkConfig {
    let mut cfg = NetworkConfig::desk(1, 1);
    cfg.num_targets = 1;
    cfg.num_destinations = 1;
    cfg.transceivers = vec![1];
    cfg.rate_floors = vec![0.0];
    cfg.horizon = horizon;
    cfg
}

#[test]
fn empirical_frequencies_match_the_model() {
    let cfg = one_pair(30_000);
    let plan = ContactPlan::full(&cfg);
    let model = ChannelModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let states = sample_horizon(&plan, &model, cfg.slot_length, &mut rng).unwrap();
    let n = states.len() as f64;
    for (j, &value) in model.obs_support.iter().enumerate() {
        let freq = states.iter().filter(|s| s.obs[[0, 0]] == value).count() as f64 / n;
        assert!((freq - model.obs_probs[j]).abs() < 0.02, "obs {value}: {freq}");
    }
    for (j, &value) in model.trans_support.iter().enumerate() {
        let freq = states.iter().filter(|s| s.trans[[0, 0]] == value).count() as f64 / n;
        assert!((freq - model.trans_probs[j]).abs() < 0.02, "trans {value}: {freq}");
    }
}

#[test]
fn consecutive_slots_are_uncorrelated() {
    let cfg = one_pair(30_000);
    let plan = ContactPlan::full(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let states = sample_horizon(&plan, &ChannelModel::default(), cfg.slot_length, &mut rng).unwrap();
    for series in [
        states.iter().map(|s| s.obs[[0, 0]]).collect::<Vec<_>>(),
        states.iter().map(|s| s.trans[[0, 0]]).collect::<Vec<_>>(),
    ] {
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        let var: f64 = series.iter().map(|x| (x - mean).powi(2)).sum();
        let cov: f64 = series.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        let r = cov / var;
        assert!(r.abs() < 0.05, "lag-1 autocorrelation {r}");
    }
}

#[test]
fn slot_length_scales_volumes() {
    let mut cfg = one_pair(200);
    let plan = ContactPlan::full(&cfg);
    let model = ChannelModel::default();
    let base = sample_horizon(&plan, &model, cfg.slot_length, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    cfg.slot_length = 2.5;
    let longer = sample_horizon(&plan, &model, cfg.slot_length, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    for (a, b) in base.iter().zip(&longer) {
        assert_eq!(a.obs[[0, 0]] * 2.5, b.obs[[0, 0]]);
        assert_eq!(a.trans[[0, 0]] * 2.5, b.trans[[0, 0]]);
    }
}

#[test]
fn invisible_pairs_have_no_capacity() {
    let cfg = NetworkConfig::desk(6, 2);
    let plan = SyntheticPlan::DESK.generate(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let states = sample_horizon(&plan, &ChannelModel::default(), cfg.slot_length, &mut rng).unwrap();
    for (t, s) in states.iter().enumerate() {
        for ((i, k), &b) in s.obs.indexed_iter() {
            assert_eq!(b > 0.0, plan.obs_visible[[t, i, k]]);
        }
        for ((k, n), &c) in s.trans.indexed_iter() {
            if !plan.trans_visible[[t, k, n]] {
                assert_eq!(c, 0.0);
            }
        }
    }
}
