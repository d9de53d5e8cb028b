use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{Label, NliInstance};

/// Independent generators for the up draw and the down draw of one seed.
pub(crate) fn streams(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let up = ChaCha8Rng::seed_from_u64(seed);
    let mut down = ChaCha8Rng::seed_from_u64(seed);
    down.set_stream(1);
    (up, down)
}

/// Splits labelled instances by gold class, keeping input order.
pub(crate) fn by_class<'a, T>(items: impl IntoIterator<Item = (Label, T)>) -> [Vec<T>; 3]
where
    T: 'a,
{
    let mut out: [Vec<T>; 3] = Default::default();
    for (label, item) in items {
        out[label.index()].push(item);
    }
    out
}

pub(crate) fn labelled(insts: &[NliInstance]) -> impl Iterator<Item = (Label, &NliInstance)> {
    insts.iter().filter_map(|i| i.label.map(|l| (l, i)))
}

/// Seeded shuffle followed by a stable sort on `key`, so ties land in a
/// reproducible random order.
pub(crate) fn rank<T, K>(
    mut items: Vec<T>,
    rng: &mut impl Rng,
    key: impl Fn(&T) -> K,
    descending: bool,
) -> Vec<T>
where
    K: PartialOrd,
{
    items.shuffle(rng);
    items.sort_by(|a, b| {
        let ord = key(a).partial_cmp(&key(b)).unwrap_or(Ordering::Equal);
        if descending {
            ord.reverse()
        } else {
            ord
        }
    });
    items
}

/// Uniform draw of `k` items without replacement, in draw order.
pub(crate) fn draw<T: Clone>(items: &[T], k: usize, rng: &mut impl Rng) -> Vec<T> {
    rand::seq::index::sample(rng, items.len(), k.min(items.len()))
        .into_iter()
        .map(|i| items[i].clone())
        .collect()
}
