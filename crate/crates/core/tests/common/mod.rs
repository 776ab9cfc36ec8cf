#![allow(dead_code)]

use dmrc_core::NetworkConfig;

pub const LAMBDA: [f64; 4] = [2.0 / 3.0, 0.5, 1.0 / 3.0, 0.25];

pub fn small_config(targets: usize, eos: usize, transceivers: Vec<usize>) -> NetworkConfig {
    NetworkConfig {
        num_targets: targets,
        num_eos: eos,
        num_destinations: transceivers.len(),
        transceivers,
        rate_floors: vec![0.0; targets],
        compression_set: LAMBDA.to_vec(),
        control_factor: 8000.0,
        slot_length: 1.0,
        horizon: 1,
        rng_seed: 0,
    }
}

/// Every way of sending each row to a distinct column or to nothing, with
/// column `c` usable `limit[c]` times. `f` gets `choice[r] = Some(c)`.
pub fn for_each_matching(rows: usize, limit: &[usize], f: &mut dyn FnMut(&[Option<usize>])) {
    fn go(r: usize, rows: usize, left: &mut Vec<usize>, choice: &mut Vec<Option<usize>>, f: &mut dyn FnMut(&[Option<usize>])) {
        if r == rows {
            f(choice);
            return;
        }
        choice.push(None);
        go(r + 1, rows, left, choice, f);
        choice.pop();
        for c in 0..left.len() {
            if left[c] > 0 {
                left[c] -= 1;
                choice.push(Some(c));
                go(r + 1, rows, left, choice, f);
                choice.pop();
                left[c] += 1;
            }
        }
    }
    go(0, rows, &mut limit.to_vec(), &mut Vec::new(), f);
}
