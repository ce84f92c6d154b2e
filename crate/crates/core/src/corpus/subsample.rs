use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Per-class sampling outcome of [`balance_subsample`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDraw {
    pub class: usize,
    pub eligible: usize,
    pub selected: usize,
}

/// Draws up to `per_class` items from each class among those with at most
/// `max_tokens` tokens. Returns the selected indices in ascending order.
///
/// `labels[i]` is the class of item `i` (or `None` when it takes no part),
/// `token_counts[i]` its length. Classes are `0..class_names.len()`.
pub fn balance_subsample(
    labels: &[Option<usize>],
    token_counts: &[usize],
    class_names: &[String],
    per_class: usize,
    max_tokens: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<ClassDraw>)> {
    assert_eq!(labels.len(), token_counts.len());
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); class_names.len()];
    for (i, (label, &n)) in labels.iter().zip(token_counts).enumerate() {
        if let Some(c) = *label {
            if c >= class_names.len() {
                return Err(Error::OutOfRange {
                    what: "class list",
                    index: c,
                    size: class_names.len(),
                });
            }
            if n <= max_tokens {
                pools[c].push(i);
            }
        }
    }
    let mut selected = Vec::new();
    let mut draws = Vec::with_capacity(pools.len());
    for (c, mut pool) in pools.into_iter().enumerate() {
        if pool.is_empty() {
            return Err(Error::Class {
                class: class_names[c].clone(),
                message: "no eligible records".into(),
            });
        }
        let eligible = pool.len();
        if eligible < per_class {
            log::warn!(
                "class `{}` has only {} eligible records (wanted {}), taking all",
                class_names[c],
                eligible,
                per_class
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        pool.shuffle(&mut rng);
        pool.truncate(per_class);
        draws.push(ClassDraw {
            class: c,
            eligible,
            selected: pool.len(),
        });
        selected.extend(pool);
    }
    selected.sort_unstable();
    Ok((selected, draws))
}
