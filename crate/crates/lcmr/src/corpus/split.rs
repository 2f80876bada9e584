//! Leave-one-out splits with frozen evaluation candidates.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::interactions::InteractionSet;
use crate::error::{Error, Result};

/// Leave-one-out split: per eligible user one held-out test item and one
/// held-out validation item; the rest stays in train. Users with fewer
/// than `min_interactions` keep everything in train and are excluded
/// from evaluation.
#[derive(Debug, Clone)]
pub struct LooSplit {
    pub train: InteractionSet,
    /// Eval-eligible users, ascending.
    pub eligible: Vec<u32>,
    /// Held-out validation item per eligible user (aligned with `eligible`).
    pub val_items: Vec<u32>,
    /// Held-out test item per eligible user (aligned with `eligible`).
    pub test_items: Vec<u32>,
    /// Users excluded from evaluation, ascending.
    pub excluded: Vec<u32>,
    pub seed: u64,
    /// Frozen 99-negative candidate lists (aligned with `eligible`);
    /// empty until attached.
    pub candidates: Vec<Vec<u32>>,
    pub candidate_seed: u64,
    pub candidates_per_user: usize,
}

impl LooSplit {
    /// Position of `user` in the eligible list, if eval-eligible.
    pub fn eligible_index(&self, user: u32) -> Option<usize> {
        self.eligible.binary_search(&user).ok()
    }

    pub fn num_eligible(&self) -> usize {
        self.eligible.len()
    }
}

/// Holds out one random test and one random validation interaction per
/// user with at least `min_interactions` observed items.
pub fn loo_split(
    interactions: &InteractionSet,
    min_interactions: usize,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> LooSplit {
    let mut train: Vec<Vec<u32>> = Vec::with_capacity(interactions.num_users());
    let mut eligible = Vec::new();
    let mut val_items = Vec::new();
    let mut test_items = Vec::new();
    let mut excluded = Vec::new();

    let min = min_interactions.max(3);
    for u in 0..interactions.num_users() as u32 {
        let items = interactions.items_of(u);
        if items.len() >= min {
            let mut shuffled = items.to_vec();
            shuffled.shuffle(rng);
            let test = shuffled[0];
            let val = shuffled[1];
            let mut rest = shuffled[2..].to_vec();
            rest.sort_unstable();
            eligible.push(u);
            test_items.push(test);
            val_items.push(val);
            train.push(rest);
        } else {
            excluded.push(u);
            train.push(items.to_vec());
        }
    }

    let train = InteractionSet::from_lists(train, interactions.num_items())
        .expect("train split preserves the interaction invariants");
    LooSplit {
        train,
        eligible,
        val_items,
        test_items,
        excluded,
        seed,
        candidates: Vec::new(),
        candidate_seed: 0,
        candidates_per_user: 0,
    }
}

/// Draws `k` distinct items the user never interacted with (full observed
/// set) and that differ from the held-out item.
pub fn sample_eval_candidates(
    observed: &[u32],
    heldout: u32,
    num_items: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<u32>> {
    let blocked = observed.len() + if observed.binary_search(&heldout).is_ok() { 0 } else { 1 };
    if num_items < blocked + k {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {k} candidates: only {} items free of the user's {} observed",
            num_items - blocked,
            blocked
        )));
    }
    let mut picked = Vec::with_capacity(k);
    let mut seen = std::collections::HashSet::with_capacity(k * 2);
    while picked.len() < k {
        let c = rng.random_range(0..num_items as u32);
        if c == heldout || observed.binary_search(&c).is_ok() || !seen.insert(c) {
            continue;
        }
        picked.push(c);
    }
    Ok(picked)
}

/// Samples and freezes the per-user candidate lists used by every model
/// and ablation, using the user's full observed set for exclusion.
pub fn attach_candidates(
    split: &mut LooSplit,
    full: &InteractionSet,
    k: usize,
    candidate_seed: u64,
) -> Result<()> {
    let mut rng = crate::rng::derive_rng(candidate_seed, crate::rng::Stream::EvalCandidates, 0);
    let mut candidates = Vec::with_capacity(split.eligible.len());
    for (idx, &u) in split.eligible.iter().enumerate() {
        let c = sample_eval_candidates(
            full.items_of(u),
            split.test_items[idx],
            full.num_items(),
            k,
            &mut rng,
        )?;
        candidates.push(c);
    }
    split.candidates = candidates;
    split.candidate_seed = candidate_seed;
    split.candidates_per_user = k;
    Ok(())
}

const SPLIT_HEADER: &str = "# lcmr split v1";

/// Writes the split sections plus header metadata.
pub fn write_split(split: &LooSplit, path: &Path) -> Result<()> {
    let mut out =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let w = |out: &mut dyn Write, s: String| -> Result<()> {
        out.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
    };
    w(&mut out, format!("{SPLIT_HEADER}\n"))?;
    w(&mut out, format!("seed={}\n", split.seed))?;
    w(&mut out, format!("candidate_seed={}\n", split.candidate_seed))?;
    w(&mut out, format!("num_users={}\n", split.train.num_users()))?;
    w(&mut out, format!("num_items={}\n", split.train.num_items()))?;
    w(&mut out, "[train]\n".to_string())?;
    for (u, i) in split.train.iter_pairs() {
        w(&mut out, format!("{u} {i}\n"))?;
    }
    w(&mut out, "[val]\n".to_string())?;
    for (idx, &u) in split.eligible.iter().enumerate() {
        w(&mut out, format!("{u} {}\n", split.val_items[idx]))?;
    }
    w(&mut out, "[test]\n".to_string())?;
    for (idx, &u) in split.eligible.iter().enumerate() {
        w(&mut out, format!("{u} {}\n", split.test_items[idx]))?;
    }
    w(&mut out, "[excluded]\n".to_string())?;
    for &u in &split.excluded {
        w(&mut out, format!("{u}\n"))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Writes candidate lists: "user id id ..." per eligible user.
pub fn write_candidates(split: &LooSplit, path: &Path) -> Result<()> {
    let mut out =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    writeln!(out, "# lcmr candidates v1 k={} seed={}", split.candidates_per_user, split.candidate_seed)
        .map_err(|e| Error::io(path, e))?;
    for (idx, &u) in split.eligible.iter().enumerate() {
        write!(out, "{u}").map_err(|e| Error::io(path, e))?;
        for &c in &split.candidates[idx] {
            write!(out, " {c}").map_err(|e| Error::io(path, e))?;
        }
        writeln!(out).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a split file written by [`write_split`] and, when present, the
/// sibling candidates file.
pub fn read_split(path: &Path, candidates_path: Option<&Path>) -> Result<LooSplit> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut seed = 0u64;
    let mut candidate_seed = 0u64;
    let mut num_users = 0usize;
    let mut num_items = 0usize;
    #[derive(PartialEq)]
    enum Section {
        Header,
        Train,
        Val,
        Test,
        Excluded,
    }
    let mut section = Section::Header;
    let mut train_pairs: Vec<(u32, u32)> = Vec::new();
    let mut val_pairs: Vec<(u32, u32)> = Vec::new();
    let mut test_pairs: Vec<(u32, u32)> = Vec::new();
    let mut excluded: Vec<u32> = Vec::new();

    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || (line.starts_with('#') && lineno == 0) {
            continue;
        }
        match line {
            "[train]" => section = Section::Train,
            "[val]" => section = Section::Val,
            "[test]" => section = Section::Test,
            "[excluded]" => section = Section::Excluded,
            _ => {
                let perr = |msg: String| Error::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    msg,
                };
                match section {
                    Section::Header => {
                        let (k, v) = line
                            .split_once('=')
                            .ok_or_else(|| perr(format!("expected key=value, got '{line}'")))?;
                        let v: u64 = v.parse().map_err(|_| perr(format!("bad value '{v}'")))?;
                        match k {
                            "seed" => seed = v,
                            "candidate_seed" => candidate_seed = v,
                            "num_users" => num_users = v as usize,
                            "num_items" => num_items = v as usize,
                            other => return Err(perr(format!("unknown header key '{other}'"))),
                        }
                    }
                    Section::Excluded => {
                        excluded.push(line.parse().map_err(|_| perr("bad user id".into()))?);
                    }
                    _ => {
                        let (u, i) = line
                            .split_once(' ')
                            .ok_or_else(|| perr(format!("expected 'user item', got '{line}'")))?;
                        let u: u32 = u.parse().map_err(|_| perr("bad user id".into()))?;
                        let i: u32 = i.parse().map_err(|_| perr("bad item id".into()))?;
                        match section {
                            Section::Train => train_pairs.push((u, i)),
                            Section::Val => val_pairs.push((u, i)),
                            Section::Test => test_pairs.push((u, i)),
                            _ => unreachable!(),
                        }
                    }
                }
            }
        }
    }

    if num_users == 0 || num_items == 0 {
        return Err(Error::Format(format!(
            "{}: missing num_users/num_items header",
            path.display()
        )));
    }
    let mut lists: Vec<Vec<u32>> = vec![Vec::new(); num_users];
    for (u, i) in train_pairs {
        lists
            .get_mut(u as usize)
            .ok_or_else(|| Error::Format(format!("train user {u} >= num_users {num_users}")))?
            .push(i);
    }
    let train = InteractionSet::from_lists(lists, num_items)?;

    val_pairs.sort_unstable();
    test_pairs.sort_unstable();
    let eligible: Vec<u32> = test_pairs.iter().map(|&(u, _)| u).collect();
    let val_users: Vec<u32> = val_pairs.iter().map(|&(u, _)| u).collect();
    if eligible != val_users {
        return Err(Error::Format(format!(
            "{}: [val] and [test] user sets differ",
            path.display()
        )));
    }
    let val_items = val_pairs.into_iter().map(|(_, i)| i).collect();
    let test_items = test_pairs.into_iter().map(|(_, i)| i).collect();

    let mut split = LooSplit {
        train,
        eligible,
        val_items,
        test_items,
        excluded,
        seed,
        candidates: Vec::new(),
        candidate_seed,
        candidates_per_user: 0,
    };
    if let Some(cpath) = candidates_path {
        read_candidates(&mut split, cpath)?;
    }
    Ok(split)
}

fn read_candidates(split: &mut LooSplit, path: &Path) -> Result<()> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut per_user: std::collections::HashMap<u32, Vec<u32>> = Default::default();
    let mut k = 0usize;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            for field in line.split_whitespace() {
                if let Some(v) = field.strip_prefix("k=") {
                    k = v.parse().unwrap_or(0);
                }
            }
            continue;
        }
        let mut fields = line.split_whitespace();
        let perr = |msg: String| Error::Parse {
            path: path.into(),
            line: lineno + 1,
            msg,
        };
        let u: u32 = fields
            .next()
            .unwrap()
            .parse()
            .map_err(|_| perr("bad user id".into()))?;
        let ids: Vec<u32> = fields
            .map(|f| f.parse().map_err(|_| perr(format!("bad item id '{f}'"))))
            .collect::<Result<_>>()?;
        per_user.insert(u, ids);
    }
    let mut candidates = Vec::with_capacity(split.eligible.len());
    for &u in &split.eligible {
        let c = per_user.remove(&u).ok_or_else(|| {
            Error::Format(format!(
                "{}: no candidate list for eligible user {u}",
                path.display()
            ))
        })?;
        candidates.push(c);
    }
    split.candidates_per_user = k.max(candidates.first().map(|c| c.len()).unwrap_or(0));
    split.candidates = candidates;
    Ok(())
}
