//! Random finite models by rejection sampling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twosort_core::models::{check_model, FiniteModel, Leaf, Value};
use twosort_core::CheckedTheory;

const LABELS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

/// One attempt: carriers are random subsets of the first `max_carrier`
/// labels and table entries are drawn uniformly. Fails if some table needs
/// an element of an empty carrier.
fn attempt<R: Rng>(th: &CheckedTheory, rng: &mut R, max_carrier: usize) -> Option<FiniteModel> {
    let pool = &LABELS[..max_carrier.min(LABELS.len())];
    let mut m = FiniteModel::new(th.clone(), Vec::new());
    for d in th.decls() {
        let v = m
            .build_value(&d.ty, &mut |leaf, _| match leaf {
                Leaf::Set => {
                    let mask: u32 = rng.gen_range(0..1u32 << pool.len());
                    Some(Value::set(pool.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, l)| *l)))
                }
                Leaf::Elem(c) => c.choose(rng).map(|l| Value::elem(l.clone())),
            })
            .ok()??;
        m.push(v);
    }
    check_model(&m).is_ok().then_some(m)
}

/// A valid model, or `None` if `attempts` draws were all rejected.
pub fn random_model<R: Rng>(th: &CheckedTheory, rng: &mut R, max_carrier: usize, attempts: usize) -> Option<FiniteModel> {
    (0..attempts).find_map(|_| attempt(th, rng, max_carrier))
}

/// `count` models drawn from a generator seeded with `seed`.
pub fn random_models(th: &CheckedTheory, seed: u64, count: usize, max_carrier: usize) -> Vec<FiniteModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .filter_map(|_| random_model(th, &mut rng, max_carrier, 20_000))
        .collect()
}
