//! Binary implicit-feedback interactions stored as per-user item lists.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// The binary interaction matrix, stored sparsely as one sorted,
/// duplicate-free item list per user. Every user has at least one item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionSet {
    num_users: usize,
    num_items: usize,
    items: Vec<Vec<u32>>,
}

impl InteractionSet {
    pub fn from_lists(items: Vec<Vec<u32>>, num_items: usize) -> Result<Self> {
        let mut items = items;
        for (u, list) in items.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            if list.is_empty() {
                return Err(Error::Format(format!("user {u} has no interactions")));
            }
            if let Some(&max) = list.last() {
                if max as usize >= num_items {
                    return Err(Error::Index(format!(
                        "user {u} references item {max} >= num_items {num_items}"
                    )));
                }
            }
        }
        Ok(InteractionSet {
            num_users: items.len(),
            num_items,
            items,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    /// Total observed (user, item) pairs.
    pub fn num_feedback(&self) -> usize {
        self.items.iter().map(Vec::len).sum()
    }

    /// Observed density as a percentage.
    pub fn density_percent(&self) -> f64 {
        100.0 * self.num_feedback() as f64 / (self.num_users * self.num_items) as f64
    }

    /// Sorted item list of one user.
    pub fn items_of(&self, user: u32) -> &[u32] {
        &self.items[user as usize]
    }

    pub fn contains(&self, user: u32, item: u32) -> bool {
        self.items[user as usize].binary_search(&item).is_ok()
    }

    pub fn iter_pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.items
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().map(move |&i| (u as u32, i)))
    }

    pub fn write_pairs(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
        );
        for (u, i) in self.iter_pairs() {
            writeln!(out, "{u} {i}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Input layout of an interactions file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionFormat {
    /// One "user item" pair per line; '#' starts a comment.
    Pairs,
    /// Line u holds user u's items as "count id id ...".
    CiteulikeUsers,
}

impl std::str::FromStr for InteractionFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pairs" => Ok(InteractionFormat::Pairs),
            "citeulike-users" => Ok(InteractionFormat::CiteulikeUsers),
            other => Err(Error::InvalidArgument(format!(
                "unknown interactions format '{other}' (expected pairs | citeulike-users)"
            ))),
        }
    }
}

/// Parse result: the densified set plus dense-to-original id maps.
#[derive(Debug, Clone)]
pub struct ParsedInteractions {
    pub set: InteractionSet,
    /// Original user id for each dense user index.
    pub user_ids: Vec<u64>,
    /// Original item id for each dense item index.
    pub item_ids: Vec<u64>,
}

/// Reads an interactions file, densifying ids to [0, m) x [0, n).
pub fn parse_interactions(path: &Path, format: InteractionFormat) -> Result<ParsedInteractions> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        InteractionFormat::Pairs => parse_pairs(path, reader),
        InteractionFormat::CiteulikeUsers => parse_citeulike(path, reader),
    }
}

fn parse_pairs(path: &Path, reader: impl BufRead) -> Result<ParsedInteractions> {
    let mut user_index: std::collections::HashMap<u64, u32> = Default::default();
    let mut item_index: std::collections::HashMap<u64, u32> = Default::default();
    let mut user_ids = Vec::new();
    let mut item_ids = Vec::new();
    let mut items: Vec<Vec<u32>> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut fields = content.split_whitespace();
        let (u_raw, i_raw) = match (fields.next(), fields.next(), fields.next()) {
            (Some(u), Some(i), None) => (u, i),
            _ => {
                return Err(Error::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    msg: format!("expected 'user item', got '{content}'"),
                })
            }
        };
        let parse = |s: &str| -> Result<u64> {
            s.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line: lineno + 1,
                msg: format!("'{s}' is not a non-negative integer"),
            })
        };
        let u_orig = parse(u_raw)?;
        let i_orig = parse(i_raw)?;
        let u = *user_index.entry(u_orig).or_insert_with(|| {
            user_ids.push(u_orig);
            items.push(Vec::new());
            (user_ids.len() - 1) as u32
        });
        let i = *item_index.entry(i_orig).or_insert_with(|| {
            item_ids.push(i_orig);
            (item_ids.len() - 1) as u32
        });
        items[u as usize].push(i);
    }
    if items.is_empty() {
        return Err(Error::Format(format!(
            "{}: no interactions (empty file)",
            path.display()
        )));
    }
    let num_items = item_ids.len();
    Ok(ParsedInteractions {
        set: InteractionSet::from_lists(items, num_items)?,
        user_ids,
        item_ids,
    })
}

fn parse_citeulike(path: &Path, reader: impl BufRead) -> Result<ParsedInteractions> {
    let mut items: Vec<Vec<u32>> = Vec::new();
    let mut max_item = 0u32;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let count: usize = fields
            .next()
            .unwrap()
            .parse()
            .map_err(|_| Error::Parse {
                path: path.into(),
                line: lineno + 1,
                msg: "leading count is not an integer".into(),
            })?;
        let ids: Vec<u32> = fields
            .map(|f| {
                f.parse().map_err(|_| Error::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    msg: format!("'{f}' is not an item id"),
                })
            })
            .collect::<Result<_>>()?;
        if ids.len() != count {
            return Err(Error::Format(format!(
                "{}:{}: declared {} items but found {}",
                path.display(),
                lineno + 1,
                count,
                ids.len()
            )));
        }
        if ids.is_empty() {
            return Err(Error::Format(format!(
                "{}:{}: user with zero interactions",
                path.display(),
                lineno + 1
            )));
        }
        for &i in &ids {
            max_item = max_item.max(i);
        }
        items.push(ids);
    }
    if items.is_empty() {
        return Err(Error::Format(format!(
            "{}: no interactions (empty file)",
            path.display()
        )));
    }
    let num_users = items.len();
    let num_items = max_item as usize + 1;
    Ok(ParsedInteractions {
        set: InteractionSet::from_lists(items, num_items)?,
        user_ids: (0..num_users as u64).collect(),
        item_ids: (0..num_items as u64).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn pairs_two_lines() {
        let f = write_tmp("0 0\n1 0\n");
        let p = parse_interactions(f.path(), InteractionFormat::Pairs).unwrap();
        assert_eq!(p.set.num_users(), 2);
        assert_eq!(p.set.num_items(), 1);
        assert_eq!(p.set.num_feedback(), 2);
    }

    #[test]
    fn pairs_densifies_arbitrary_ids() {
        let f = write_tmp("# comment\n42 900\n42 7\n13 900 # inline\n");
        let p = parse_interactions(f.path(), InteractionFormat::Pairs).unwrap();
        assert_eq!(p.set.num_users(), 2);
        assert_eq!(p.set.num_items(), 2);
        assert_eq!(p.user_ids, vec![42, 13]);
        assert_eq!(p.item_ids, vec![900, 7]);
        assert!(p.set.contains(0, 0) && p.set.contains(0, 1) && p.set.contains(1, 0));
    }

    #[test]
    fn pairs_duplicate_pairs_collapse() {
        let f = write_tmp("5 5\n5 5\n5 6\n");
        let p = parse_interactions(f.path(), InteractionFormat::Pairs).unwrap();
        assert_eq!(p.set.num_feedback(), 2);
    }

    #[test]
    fn empty_file_is_error() {
        let f = write_tmp("");
        assert!(parse_interactions(f.path(), InteractionFormat::Pairs).is_err());
        assert!(parse_interactions(f.path(), InteractionFormat::CiteulikeUsers).is_err());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write_tmp("0 0\nnot numbers here\n");
        let err = parse_interactions(f.path(), InteractionFormat::Pairs).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn citeulike_count_prefix_checked() {
        let f = write_tmp("2 0 1\n3 1 2\n");
        let err = parse_interactions(f.path(), InteractionFormat::CiteulikeUsers).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err:?}");
    }

    #[test]
    fn citeulike_basic() {
        let f = write_tmp("2 0 5\n1 3\n");
        let p = parse_interactions(f.path(), InteractionFormat::CiteulikeUsers).unwrap();
        assert_eq!(p.set.num_users(), 2);
        assert_eq!(p.set.num_items(), 6);
        assert_eq!(p.set.items_of(0), &[0, 5]);
        assert_eq!(p.set.items_of(1), &[3]);
    }

    #[test]
    fn round_trip_through_pairs_file() {
        let f = write_tmp("3 10\n3 11\n4 10\n");
        let p = parse_interactions(f.path(), InteractionFormat::Pairs).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        p.set.write_pairs(out.path()).unwrap();
        let q = parse_interactions(out.path(), InteractionFormat::Pairs).unwrap();
        assert_eq!(p.set, q.set);
    }
}
