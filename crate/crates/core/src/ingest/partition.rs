use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{Budget, Dataset, Partition};
use crate::error::{Error, Result};

/// Draws disjoint initial and candidate-pool id sets of size `m` each by
/// seeded sampling without replacement. Ids are listed in corpus order.
pub fn draw_partition(d: &Dataset, budget: &Budget, seed: u64) -> Result<Partition> {
    let m = budget.m;
    let need = 2 * m;
    if d.len() < need {
        return Err(Error::Sizing(format!(
            "dataset {} has {} instances, partition needs {need}",
            d.name,
            d.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = sample(&mut rng, d.len(), need).into_vec();
    let (init, potential) = picked.split_at(m);

    let ids = |idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        idx.into_iter()
            .map(|i| d.instances[i].id.clone())
            .collect::<Vec<_>>()
    };
    let partition = Partition {
        dataset: d.name.clone(),
        seed,
        init_ids: ids(init),
        potential_ids: ids(potential),
    };
    partition.check(m)?;
    Ok(partition)
}
