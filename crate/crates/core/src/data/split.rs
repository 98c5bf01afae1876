use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ClientShard, DataError, Dataset, SplitIndices, SplitSpec};

/// Hands out `total` slots over classes proportionally to `frac * size`,
/// flooring per class and topping up in descending `priority` (ties to the
/// lower class index), never exceeding `capacity`.
fn apportion(
    frac: f64,
    total: usize,
    sizes: &[usize],
    capacity: &[usize],
    priority: &[f64],
) -> Result<Vec<usize>, DataError> {
    let mut alloc: Vec<usize> = sizes
        .iter()
        .zip(capacity)
        .map(|(&n, &cap)| ((frac * n as f64).floor() as usize).min(cap))
        .collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    let remainder = |c: usize| frac * sizes[c] as f64 - (frac * sizes[c] as f64).floor();
    order.sort_by(|&a, &b| priority[b].total_cmp(&priority[a]).then(a.cmp(&b)));
    let mut missing = total.saturating_sub(alloc.iter().sum());
    // first pass tops up classes with a fractional remainder, the second any class with room
    for pass in 0..2 {
        for &c in &order {
            if missing == 0 {
                break;
            }
            if alloc[c] < capacity[c] && (pass == 1 || remainder(c) > 0.0) {
                alloc[c] += 1;
                missing -= 1;
            }
        }
    }
    if missing > 0 {
        return Err(DataError::Invalid(format!(
            "cannot place {missing} samples in the split"
        )));
    }
    Ok(alloc)
}

/// Moves samples between folds, two classes at a time so class sizes and
/// fold sizes stay fixed, until every class/fold count is within one of its
/// proportional quota. Floors alone can leave train up to two over.
fn rebalance(cells: &mut [[usize; 3]], quotas: &[[f64; 3]]) {
    let fits = |v: usize, q: f64| (v as f64 - q).abs() <= 1.0 + 1e-9;
    for _ in 0..cells.len() * 6 {
        let Some((c, f, over)) = (0..cells.len())
            .flat_map(|c| (0..3).map(move |f| (c, f)))
            .find(|&(c, f)| !fits(cells[c][f], quotas[c][f]))
            .map(|(c, f)| (c, f, cells[c][f] as f64 > quotas[c][f]))
        else {
            return;
        };
        // Over: c gives one from f to g, d gives one from g to f.
        // Under: the same with the roles of f and g swapped.
        let ends = |g: usize| if over { (f, g) } else { (g, f) };
        let mut moved = false;
        'search: for g in (0..3).filter(|&g| g != f) {
            let (src, dst) = ends(g);
            for d in (0..cells.len()).filter(|&d| d != c) {
                let ok = cells[c][src] > 0
                    && cells[d][dst] > 0
                    && fits(cells[c][dst] + 1, quotas[c][dst])
                    && fits(cells[d][dst] - 1, quotas[d][dst])
                    && fits(cells[d][src] + 1, quotas[d][src]);
                if ok {
                    cells[c][src] -= 1;
                    cells[c][dst] += 1;
                    cells[d][dst] -= 1;
                    cells[d][src] += 1;
                    moved = true;
                    break 'search;
                }
            }
        }
        if !moved {
            return;
        }
    }
}

/// Stratified, seeded train/val/test split. `|val| = ⌊val_frac·N⌋`,
/// `|test| = ⌊test_frac·N⌋`, train takes the rest.
pub fn split(ds: &Dataset, spec: &SplitSpec, seed: u64) -> Result<SplitIndices, DataError> {
    spec.validate()?;
    let n = ds.len();
    if n < 3 {
        return Err(DataError::Invalid(format!("need at least 3 samples to split, got {n}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for (i, &l) in ds.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for members in &mut by_class {
        members.shuffle(&mut rng);
    }
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();

    let val_total = (spec.val_frac * n as f64).floor() as usize;
    let test_total = (spec.test_frac * n as f64).floor() as usize;
    let quota = |frac: f64, c: usize| frac * sizes[c] as f64;
    let fraction = |frac: f64, c: usize| quota(frac, c) - quota(frac, c).floor();
    let classes = 0..sizes.len();
    let val_priority: Vec<f64> = classes.clone().map(|c| fraction(spec.val_frac, c)).collect();
    let val = apportion(spec.val_frac, val_total, &sizes, &sizes, &val_priority)?;
    let remaining: Vec<usize> = sizes.iter().zip(&val).map(|(s, v)| s - v).collect();
    // Test top-ups go where train would otherwise overshoot its quota most,
    // which keeps all three folds within one sample of proportional.
    let test_priority: Vec<f64> = classes
        .map(|c| quota(spec.val_frac, c) - val[c] as f64 + fraction(spec.test_frac, c))
        .collect();
    let test = apportion(spec.test_frac, test_total, &sizes, &remaining, &test_priority)?;
    let mut cells: Vec<[usize; 3]> = (0..sizes.len())
        .map(|c| [val[c], test[c], sizes[c] - val[c] - test[c]])
        .collect();
    let quotas: Vec<[f64; 3]> = (0..sizes.len())
        .map(|c| {
            [
                quota(spec.val_frac, c),
                quota(spec.test_frac, c),
                quota(spec.train_frac, c),
            ]
        })
        .collect();
    rebalance(&mut cells, &quotas);
    let (val, test): (Vec<usize>, Vec<usize>) = cells.iter().map(|c| (c[0], c[1])).unzip();

    let mut out = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (c, members) in by_class.iter().enumerate() {
        let (v, t) = (val[c], test[c]);
        if spec.train_frac > 0.0 && !members.is_empty() && members.len() == v + t {
            return Err(DataError::EmptyClass {
                class: ds.class_names()[c].clone(),
            });
        }
        out.val.extend(&members[..v]);
        out.test.extend(&members[v..v + t]);
        out.train.extend(&members[v + t..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Seeded shuffle, then round-robin: shard sizes differ by at most one and
/// the first `|train| mod k` shards hold the extra sample.
pub fn partition_iid(train: &[usize], clients: usize, seed: u64) -> Result<Vec<ClientShard>, DataError> {
    if clients == 0 {
        return Err(DataError::Invalid("client count must be at least 1".into()));
    }
    if clients > train.len() {
        return Err(DataError::TooManyClients {
            clients,
            samples: train.len(),
        });
    }
    let mut order = train.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut shards: Vec<ClientShard> = (0..clients)
        .map(|client_id| ClientShard {
            client_id,
            indices: Vec::with_capacity(train.len() / clients + 1),
        })
        .collect();
    for (pos, idx) in order.into_iter().enumerate() {
        shards[pos % clients].indices.push(idx);
    }
    Ok(shards)
}
