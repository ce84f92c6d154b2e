use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SplitMode {
    Holdout {
        train_frac: f64,
        val_frac: f64,
        test_frac: f64,
    },
    /// `holdout_val_frac` of each fold's training part is set aside for early stopping.
    Kfold { k: usize, holdout_val_frac: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(flatten)]
    pub mode: SplitMode,
    pub seed: u64,
}

impl SplitSpec {
    pub fn holdout(train_frac: f64, val_frac: f64, test_frac: f64, seed: u64) -> Self {
        SplitSpec {
            mode: SplitMode::Holdout {
                train_frac,
                val_frac,
                test_frac,
            },
            seed,
        }
    }

    pub fn kfold(k: usize, holdout_val_frac: f64, seed: u64) -> Self {
        SplitSpec {
            mode: SplitMode::Kfold { k, holdout_val_frac },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            SplitMode::Holdout {
                train_frac,
                val_frac,
                test_frac,
            } => {
                let fracs = [train_frac, val_frac, test_frac];
                if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
                    return Err(Error::Config(format!("split fractions {fracs:?} outside [0, 1]")));
                }
                if (fracs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!("split fractions {fracs:?} do not sum to 1")));
                }
            }
            SplitMode::Kfold { k, holdout_val_frac } => {
                if k < 2 {
                    return Err(Error::Config(format!("k = {k}, need at least 2 folds")));
                }
                if !(0.0..1.0).contains(&holdout_val_frac) {
                    return Err(Error::Config(format!("holdout_val_frac {holdout_val_frac} outside [0, 1)")));
                }
            }
        }
        Ok(())
    }
}

/// Index sets into the example list, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Integer counts for a classes × parts table whose ideal entries are
/// `rows[c] · cols[p] / total`. Every entry is the floor or ceiling of its
/// ideal value and row and column sums are met exactly. Such a rounding
/// always exists when both margins are integers; the units left over after
/// flooring are placed by augmenting paths, largest remainders first.
fn round_table(rows: &[usize], cols: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = rows.iter().sum();
    debug_assert_eq!(total, cols.iter().sum::<usize>());
    let (nr, nc) = (rows.len(), cols.len());
    if total == 0 {
        return vec![vec![0; nc]; nr];
    }
    let mut out: Vec<Vec<usize>> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| r * c / total).collect())
        .collect();
    let rem = |r: usize, c: usize| (rows[r] * cols[c]) % total;
    let mut row_left: Vec<usize> = (0..nr).map(|r| rows[r] - out[r].iter().sum::<usize>()).collect();
    let mut col_left: Vec<usize> = (0..nc).map(|c| cols[c] - out.iter().map(|row| row[c]).sum::<usize>()).collect();
    let mut cells: Vec<(usize, usize)> = (0..nr)
        .flat_map(|r| (0..nc).map(move |c| (r, c)))
        .filter(|&(r, c)| rem(r, c) > 0)
        .collect();
    cells.sort_by(|a, b| rem(b.0, b.1).cmp(&rem(a.0, a.1)).then(a.cmp(b)));
    // raised[r][c]: the cell already holds its ceiling
    let mut raised = vec![vec![false; nc]; nr];
    for &(r, c) in &cells {
        if row_left[r] > 0 && col_left[c] > 0 {
            raised[r][c] = true;
            row_left[r] -= 1;
            col_left[c] -= 1;
        }
    }
    // Greedy can strand units; reroute along alternating paths
    // row → (unraised cell) → column → (raised cell) → row ...
    while let Some(start) = (0..nr).find(|&r| row_left[r] > 0) {
        let mut prev_col: Vec<Option<usize>> = vec![None; nc];
        let mut prev_row: Vec<Option<usize>> = vec![None; nr];
        let mut seen_row = vec![false; nr];
        seen_row[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        let mut end = None;
        'search: while let Some(r) = queue.pop_front() {
            for c in 0..nc {
                if raised[r][c] || rem(r, c) == 0 || prev_col[c].is_some() {
                    continue;
                }
                prev_col[c] = Some(r);
                if col_left[c] > 0 {
                    end = Some(c);
                    break 'search;
                }
                for r2 in 0..nr {
                    if raised[r2][c] && !seen_row[r2] {
                        seen_row[r2] = true;
                        prev_row[r2] = Some(c);
                        queue.push_back(r2);
                    }
                }
            }
        }
        let Some(mut c) = end else {
            unreachable!("integer margins always admit a rounding")
        };
        col_left[c] -= 1;
        row_left[start] -= 1;
        loop {
            let r = prev_col[c].expect("path is connected");
            raised[r][c] = true;
            if r == start {
                break;
            }
            let c_back = prev_row[r].expect("path is connected");
            raised[r][c_back] = false;
            c = c_back;
        }
    }
    for r in 0..nr {
        for c in 0..nc {
            if raised[r][c] {
                out[r][c] += 1;
            }
        }
    }
    out
}

/// Groups `indices` by label, each group shuffled with a seed derived from `seed`.
fn shuffled_groups(indices: &[usize], labels: &[usize], num_classes: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); num_classes];
    for &i in indices {
        groups[labels[i]].push(i);
    }
    for (c, g) in groups.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        g.shuffle(&mut rng);
    }
    groups
}

/// Stratified cut of `indices` into parts of floor(frac·N) for each entry
/// of `fracs`, followed by a final part holding the remainder. Each class
/// contributes to each part its proportional share `n_c · size / N`,
/// rounded up or down.
fn stratified_parts(
    indices: &[usize],
    labels: &[usize],
    num_classes: usize,
    fracs: &[f64],
    seed: u64,
) -> Vec<Vec<usize>> {
    let n = indices.len();
    let groups = shuffled_groups(indices, labels, num_classes, seed);
    let mut sizes: Vec<usize> = fracs.iter().map(|f| (f * n as f64 + 1e-9).floor() as usize).collect();
    sizes.push(n - sizes.iter().sum::<usize>());
    let class_sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let table = round_table(&class_sizes, &sizes);
    let mut parts: Vec<Vec<usize>> = sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
    for (c, g) in groups.iter().enumerate() {
        let mut cursor = 0;
        for (p, part) in parts.iter_mut().enumerate() {
            part.extend_from_slice(&g[cursor..cursor + table[c][p]]);
            cursor += table[c][p];
        }
    }
    for part in &mut parts {
        part.sort_unstable();
    }
    parts
}

fn class_sizes(labels: &[usize], num_classes: usize) -> Result<Vec<usize>> {
    let mut sizes = vec![0; num_classes];
    for &l in labels {
        if l >= num_classes {
            return Err(Error::OutOfRange {
                what: "example label",
                index: l,
                size: num_classes,
            });
        }
        sizes[l] += 1;
    }
    Ok(sizes)
}

/// Stratified train/val/test split. Val and test get floor(frac·N)
/// examples, train gets the rest.
pub fn split_dataset(labels: &[usize], class_names: &[String], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let SplitMode::Holdout { val_frac, test_frac, .. } = spec.mode else {
        return Err(Error::Config("split_dataset needs a holdout split spec".into()));
    };
    if labels.len() < 10 {
        return Err(Error::Empty(format!("{} examples, need at least 10 to split", labels.len())));
    }
    let sizes = class_sizes(labels, class_names.len())?;
    for (c, &n) in sizes.iter().enumerate() {
        if n < 3 {
            return Err(Error::Class {
                class: class_names[c].clone(),
                message: format!("{n} examples, need at least 3 to split"),
            });
        }
    }
    let all: Vec<usize> = (0..labels.len()).collect();
    let mut parts = stratified_parts(&all, labels, class_names.len(), &[test_frac, val_frac], spec.seed);
    let train = parts.pop().unwrap();
    let val = parts.pop().unwrap();
    let test = parts.pop().unwrap();
    Ok(Split { train, val, test })
}

/// Stratified k folds: every example lands in exactly one test fold and
/// fold sizes differ by at most one.
pub fn kfold_split(labels: &[usize], num_classes: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Config(format!("k = {k}, need at least 2 folds")));
    }
    if k > labels.len() {
        return Err(Error::Config(format!("k = {k} exceeds {} examples", labels.len())));
    }
    class_sizes(labels, num_classes)?;
    let all: Vec<usize> = (0..labels.len()).collect();
    let order: Vec<usize> = shuffled_groups(&all, labels, num_classes, seed).concat();
    let mut assignment = vec![0usize; labels.len()];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| assignment[i] == f);
            Fold { train, test }
        })
        .collect())
}

/// Splits a subset of indices into (train, val) with floor(val_frac·N) val examples.
pub fn holdout_subset(
    indices: &[usize],
    labels: &[usize],
    num_classes: usize,
    val_frac: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&val_frac) {
        return Err(Error::Config(format!("val_frac {val_frac} outside [0, 1)")));
    }
    if let Some(&i) = indices.iter().find(|&&i| i >= labels.len()) {
        return Err(Error::OutOfRange {
            what: "example index",
            index: i,
            size: labels.len(),
        });
    }
    class_sizes(labels, num_classes)?;
    let mut parts = stratified_parts(indices, labels, num_classes, &[val_frac], seed);
    let train = parts.pop().unwrap();
    let val = parts.pop().unwrap();
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(c: usize) -> Vec<String> {
        (0..c).map(|i| format!("class{i}")).collect()
    }

    #[test]
    fn ten_examples() {
        let labels = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let s = split_dataset(&labels, &names(2), &SplitSpec::holdout(0.7, 0.1, 0.2, 3)).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (7, 1, 2));
        let again = split_dataset(&labels, &names(2), &SplitSpec::holdout(0.7, 0.1, 0.2, 3)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn small_class_named() {
        let labels = [0, 0, 0, 0, 0, 0, 0, 0, 1, 1];
        match split_dataset(&labels, &names(2), &SplitSpec::holdout(0.7, 0.1, 0.2, 0)) {
            Err(Error::Class { class, .. }) => assert_eq!(class, "class1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_fractions() {
        let labels = [0; 12];
        assert!(split_dataset(&labels, &names(1), &SplitSpec::holdout(0.7, 0.1, 0.1, 0)).is_err());
    }

    #[test]
    fn kfold_ten_by_five() {
        let labels = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let folds = kfold_split(&labels, 2, 5, 1).unwrap();
        assert!(folds.iter().all(|f| f.test.len() == 2 && f.train.len() == 8));
        assert!(kfold_split(&labels, 2, 11, 1).is_err());
    }

    #[test]
    fn table_rounding_meets_margins() {
        // 5 and 14 examples into parts of 3, 1 and 15
        let t = round_table(&[5, 14], &[3, 1, 15]);
        assert_eq!(t.iter().map(|r| r.iter().sum::<usize>()).collect::<Vec<_>>(), vec![5, 14]);
        assert_eq!((0..3).map(|p| t[0][p] + t[1][p]).collect::<Vec<_>>(), vec![3, 1, 15]);
        assert_eq!(round_table(&[0, 0], &[0, 0]), vec![vec![0, 0], vec![0, 0]]);
    }

    fn check_partition(parts: &[&[usize]], n: usize) {
        let mut all: Vec<usize> = parts.iter().flat_map(|p| p.iter().copied()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn holdout_is_stratified_partition(
            labels in prop::collection::vec(0usize..3, 30..200),
            seed in any::<u64>(),
        ) {
            let mut labels = labels;
            labels.extend([0, 0, 0, 1, 1, 1, 2, 2, 2]);
            let n = labels.len();
            let s = split_dataset(&labels, &names(3), &SplitSpec::holdout(0.7, 0.1, 0.2, seed)).unwrap();
            check_partition(&[&s.train, &s.val, &s.test], n);
            prop_assert_eq!(s.val.len(), (0.1 * n as f64 + 1e-9).floor() as usize);
            prop_assert_eq!(s.test.len(), (0.2 * n as f64 + 1e-9).floor() as usize);
            for part in [&s.train, &s.val, &s.test] {
                for c in 0..3 {
                    let global = labels.iter().filter(|&&l| l == c).count() as f64;
                    let got = part.iter().filter(|&&i| labels[i] == c).count() as f64;
                    prop_assert!((got - global * part.len() as f64 / n as f64).abs() < 1.0 + 1e-9);
                }
            }
        }

        #[test]
        fn table_rounding_is_floor_or_ceiling(
            rows in prop::collection::vec(0usize..60, 1..8),
            cuts in prop::collection::vec(0.0f64..1.0, 1..5),
        ) {
            let total: usize = rows.iter().sum();
            let mut cols: Vec<usize> = cuts.iter().map(|f| (f * total as f64 / cuts.len() as f64) as usize).collect();
            cols.push(total - cols.iter().sum::<usize>());
            let t = round_table(&rows, &cols);
            for (r, &rt) in rows.iter().enumerate() {
                prop_assert_eq!(t[r].iter().sum::<usize>(), rt);
                for (c, &ct) in cols.iter().enumerate() {
                    let ideal = rt as f64 * ct as f64 / total.max(1) as f64;
                    prop_assert!((t[r][c] as f64 - ideal).abs() < 1.0);
                }
            }
            for (c, &ct) in cols.iter().enumerate() {
                prop_assert_eq!(t.iter().map(|row| row[c]).sum::<usize>(), ct);
            }
        }

        #[test]
        fn folds_partition_and_balance(
            labels in prop::collection::vec(0usize..4, 10..150),
            k in 2usize..7,
            seed in any::<u64>(),
        ) {
            let n = labels.len();
            let folds = kfold_split(&labels, 4, k, seed).unwrap();
            let tests: Vec<&[usize]> = folds.iter().map(|f| f.test.as_slice()).collect();
            check_partition(&tests, n);
            let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for f in &folds {
                check_partition(&[&f.train, &f.test], n);
                for c in 0..4 {
                    let global = labels.iter().filter(|&&l| l == c).count() as f64;
                    let got = f.test.iter().filter(|&&i| labels[i] == c).count() as f64;
                    prop_assert!((got - global / k as f64).abs() < 1.0 + 1e-9);
                }
            }
        }
    }
}
