//! Edge-list ingestion, per-user train/test splitting, id remapping and
//! fabricated-interaction injection.
//!
//! Input files hold one `a b` pair of decimal ids per line. Extra columns
//! (ratings, timestamps) are ignored and lines starting with `#` are skipped.
//! Social edges are undirected: they are stored once as `(min, max)` and
//! self-loops are dropped.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Internal `(row, column)` edge: `(user, item)` or `(user, user)`.
pub type Edge = (u32, u32);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawDataset {
    pub interactions: Vec<(u64, u64)>,
    pub social_edges: Vec<(u64, u64)>,
}

/// Bijection between external ids and dense internal ids `0..len`.
///
/// Internal ids are assigned in ascending external-id order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    external: Vec<u64>,
    index: HashMap<u64, u32>,
}

impl IdMap {
    pub fn from_sorted_unique(external: Vec<u64>) -> Self {
        let index = external
            .iter()
            .enumerate()
            .map(|(i, &e)| (e, i as u32))
            .collect();
        IdMap { external, index }
    }

    fn from_ids(ids: impl IntoIterator<Item = u64>) -> Self {
        let set: BTreeSet<u64> = ids.into_iter().collect();
        Self::from_sorted_unique(set.into_iter().collect())
    }

    pub fn len(&self) -> usize {
        self.external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.external.is_empty()
    }

    pub fn internal(&self, external: u64) -> Option<u32> {
        self.index.get(&external).copied()
    }

    pub fn external(&self, internal: u32) -> Option<u64> {
        self.external.get(internal as usize).copied()
    }

    pub fn externals(&self) -> &[u64] {
        &self.external
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Edge>,
    /// Parallel to `train`; true for fabricated (injected) interactions.
    pub train_fabricated: Vec<bool>,
    pub test: Vec<Edge>,
    /// Canonical `(u, v)` with `u < v`.
    pub social: Vec<Edge>,
    /// Parallel to `social`; true for planted noise relations.
    pub social_fabricated: Vec<bool>,
    pub user_count: usize,
    pub item_count: usize,
    pub users: IdMap,
    pub items: IdMap,
    pub ratio: f64,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn fabricated_count(&self) -> usize {
        self.train_fabricated.iter().filter(|&&f| f).count()
    }

    /// Per-user item lists of the given edge set, each sorted ascending.
    pub fn items_by_user(edges: &[Edge], user_count: usize) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); user_count];
        for &(u, i) in edges {
            out[u as usize].push(i);
        }
        out.iter_mut().for_each(|v| v.sort_unstable());
        out
    }
}

/// Parse one edge-list stream. `path` is used only for error messages.
pub fn parse_edge_list<R: Read>(reader: R, path: &Path) -> Result<Vec<(u64, u64)>> {
    let mut edges = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let mut next_id = |what: &str| -> Result<u64> {
            let tok = tokens
                .next()
                .ok_or_else(|| parse_err(format!("missing {what} id")))?;
            tok.parse::<u64>()
                .map_err(|_| parse_err(format!("invalid {what} id {tok:?}")))
        };
        let a = next_id("first")?;
        let b = next_id("second")?;
        edges.push((a, b));
    }
    Ok(edges)
}

fn read_edge_file(path: &Path) -> Result<Vec<(u64, u64)>> {
    let file =
        fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let edges = parse_edge_list(file, path)?;
    if edges.is_empty() {
        return Err(Error::EmptyDataset(path.to_path_buf()));
    }
    Ok(edges)
}

/// Sort and collapse duplicate interactions.
pub fn dedup_interactions(mut edges: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Symmetrize to `(min, max)`, drop self-loops, collapse duplicates.
pub fn canonical_social(edges: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    let mut out: Vec<_> = edges
        .into_iter()
        .filter(|(a, b)| a != b)
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn load_edge_lists(interaction_path: &Path, social_path: &Path) -> Result<RawDataset> {
    let interactions = dedup_interactions(read_edge_file(interaction_path)?);
    let social_edges = canonical_social(read_edge_file(social_path)?);
    Ok(RawDataset {
        interactions,
        social_edges,
    })
}

fn check_fraction(name: &str, value: f64, allow_zero: bool) -> Result<()> {
    let ok = value.is_finite() && value < 1.0 && (value > 0.0 || (allow_zero && value == 0.0));
    if ok {
        Ok(())
    } else {
        let range = if allow_zero { "[0, 1)" } else { "(0, 1)" };
        Err(Error::Config(format!("{name} must lie in {range}, got {value}")))
    }
}

/// Number of training edges kept for a user with `n` interactions.
fn train_quota(n: usize, ratio: f64) -> usize {
    ((n as f64 * ratio).round() as usize).clamp(1, n.max(1))
}

/// Per-user stratified random split.
///
/// Each user's items are shuffled and the first `round(ratio * n)` (at least
/// one) go to training. Social edges touching users without interactions are
/// dropped.
pub fn split_train_test(raw: &RawDataset, ratio: f64, seed: u64) -> Result<DatasetSplit> {
    check_fraction("split ratio", ratio, false)?;
    let users = IdMap::from_ids(raw.interactions.iter().map(|e| e.0));
    let items = IdMap::from_ids(raw.interactions.iter().map(|e| e.1));

    let mut per_user: Vec<Vec<u32>> = vec![Vec::new(); users.len()];
    for &(u, i) in &raw.interactions {
        per_user[users.internal(u).unwrap() as usize].push(items.internal(i).unwrap());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (u, list) in per_user.iter_mut().enumerate() {
        list.sort_unstable();
        list.dedup();
        list.shuffle(&mut rng);
        let quota = train_quota(list.len(), ratio);
        train.extend(list[..quota].iter().map(|&i| (u as u32, i)));
        test.extend(list[quota..].iter().map(|&i| (u as u32, i)));
    }
    train.sort_unstable();
    test.sort_unstable();

    let mut social: Vec<Edge> = raw
        .social_edges
        .iter()
        .filter_map(|&(a, b)| {
            let (a, b) = (users.internal(a)?, users.internal(b)?);
            (a != b).then(|| (a.min(b), a.max(b)))
        })
        .collect();
    social.sort_unstable();
    social.dedup();

    Ok(DatasetSplit {
        train_fabricated: vec![false; train.len()],
        social_fabricated: vec![false; social.len()],
        train,
        test,
        social,
        user_count: users.len(),
        item_count: items.len(),
        users,
        items,
        ratio,
        seed,
    })
}

/// Add `floor(ratio * |train|)` uniformly sampled unobserved `(user, item)`
/// pairs to the training set, flagged as fabricated.
pub fn inject_interaction_noise(split: &DatasetSplit, ratio: f64, seed: u64) -> Result<DatasetSplit> {
    check_fraction("noise ratio", ratio, true)?;
    let count = (ratio * split.train.len() as f64).floor() as usize;
    if count == 0 {
        return Ok(split.clone());
    }
    let mut observed: HashSet<Edge> = split.train.iter().chain(&split.test).copied().collect();
    let capacity = split.user_count * split.item_count;
    if capacity < observed.len() + count {
        return Err(Error::Config(format!(
            "cannot fabricate {count} interactions: only {} unobserved pairs",
            capacity - observed.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = split.clone();
    let mut added = 0;
    while added < count {
        let u = rng.random_range(0..split.user_count) as u32;
        let i = rng.random_range(0..split.item_count) as u32;
        if observed.insert((u, i)) {
            out.train.push((u, i));
            out.train_fabricated.push(true);
            added += 1;
        }
    }
    Ok(out)
}

const TRAIN_FILE: &str = "train.txt";
const TEST_FILE: &str = "test.txt";
const SOCIAL_FILE: &str = "social.txt";
const USERS_FILE: &str = "users.map";
const ITEMS_FILE: &str = "items.map";
const META_FILE: &str = "split.meta";

fn write_file(path: &Path, body: &str) -> Result<()> {
    let mut f =
        fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    f.write_all(body.as_bytes())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn flagged_edges(edges: &[Edge], flags: &[bool]) -> String {
    let mut s = String::with_capacity(edges.len() * 12);
    for (&(a, b), &f) in edges.iter().zip(flags) {
        s.push_str(&format!("{a} {b} {}\n", u8::from(f)));
    }
    s
}

/// Persist a split as internal-id edge lists plus id maps and metadata.
pub fn write_split(split: &DatasetSplit, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    write_file(&dir.join(TRAIN_FILE), &flagged_edges(&split.train, &split.train_fabricated))?;
    let test: String = split.test.iter().map(|(u, i)| format!("{u} {i}\n")).collect();
    write_file(&dir.join(TEST_FILE), &test)?;
    write_file(&dir.join(SOCIAL_FILE), &flagged_edges(&split.social, &split.social_fabricated))?;
    for (name, map) in [(USERS_FILE, &split.users), (ITEMS_FILE, &split.items)] {
        let body: String = map
            .externals()
            .iter()
            .enumerate()
            .map(|(i, e)| format!("{i} {e}\n"))
            .collect();
        write_file(&dir.join(name), &body)?;
    }
    let meta = format!(
        "users = {}\nitems = {}\nratio = {}\nseed = {}\nfabricated = {}\n",
        split.user_count,
        split.item_count,
        split.ratio,
        split.seed,
        split.fabricated_count()
    );
    write_file(&dir.join(META_FILE), &meta)
}

fn read_lines(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(n, l)| (n + 1, l.split_whitespace().map(str::to_owned).collect()))
        .collect())
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, tok: Option<&String>) -> Result<T> {
    tok.and_then(|t| t.parse().ok()).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: "expected numeric field".into(),
    })
}

fn read_flagged(path: &Path, flagged: bool) -> Result<(Vec<Edge>, Vec<bool>)> {
    let mut edges = Vec::new();
    let mut flags = Vec::new();
    for (line, toks) in read_lines(path)? {
        edges.push((
            parse_field(path, line, toks.first())?,
            parse_field(path, line, toks.get(1))?,
        ));
        let f: u8 = if flagged {
            parse_field(path, line, toks.get(2))?
        } else {
            0
        };
        flags.push(f == 1);
    }
    Ok((edges, flags))
}

fn read_id_map(path: &Path) -> Result<IdMap> {
    let mut external = Vec::new();
    for (expected, (line, toks)) in read_lines(path)?.into_iter().enumerate() {
        let internal: usize = parse_field(path, line, toks.first())?;
        if internal != expected {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("line {line}: internal ids must be consecutive"),
            });
        }
        external.push(parse_field(path, line, toks.get(1))?);
    }
    Ok(IdMap::from_sorted_unique(external))
}

/// Read a flat `key = value` file into a map.
pub fn read_key_values(path: &Path) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_key_values(&text, path)
}

pub fn parse_key_values(text: &str, path: &Path) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: "expected `key = value`".into(),
        })?;
        out.insert(k.trim().to_owned(), v.trim().to_owned());
    }
    Ok(out)
}

pub fn read_split(dir: &Path) -> Result<DatasetSplit> {
    let meta_path = dir.join(META_FILE);
    let meta = read_key_values(&meta_path)?;
    let field = |k: &str| -> Result<&String> {
        meta.get(k).ok_or_else(|| Error::Format {
            path: meta_path.clone(),
            message: format!("missing key {k}"),
        })
    };
    let bad = |k: &str| Error::Format {
        path: meta_path.clone(),
        message: format!("invalid value for {k}"),
    };
    let user_count: usize = field("users")?.parse().map_err(|_| bad("users"))?;
    let item_count: usize = field("items")?.parse().map_err(|_| bad("items"))?;
    let ratio: f64 = field("ratio")?.parse().map_err(|_| bad("ratio"))?;
    let seed: u64 = field("seed")?.parse().map_err(|_| bad("seed"))?;

    let (train, train_fabricated) = read_flagged(&dir.join(TRAIN_FILE), true)?;
    let (test, _) = read_flagged(&dir.join(TEST_FILE), false)?;
    let (social, social_fabricated) = read_flagged(&dir.join(SOCIAL_FILE), true)?;
    let users = read_id_map(&dir.join(USERS_FILE))?;
    let items = read_id_map(&dir.join(ITEMS_FILE))?;
    if users.len() != user_count || items.len() != item_count {
        return Err(bad("users/items"));
    }
    let in_range = |edges: &[Edge], cols: usize| {
        edges
            .iter()
            .all(|&(a, b)| (a as usize) < user_count && (b as usize) < cols)
    };
    if !in_range(&train, item_count) || !in_range(&test, item_count) || !in_range(&social, user_count)
    {
        return Err(Error::Format {
            path: dir.to_path_buf(),
            message: "edge id out of range".into(),
        });
    }
    Ok(DatasetSplit {
        train,
        train_fabricated,
        test,
        social,
        social_fabricated,
        user_count,
        item_count,
        users,
        items,
        ratio,
        seed,
    })
}

/// Paths of the artifacts `write_split` produces inside `dir`.
pub fn split_artifacts(dir: &Path) -> Vec<PathBuf> {
    [TRAIN_FILE, TEST_FILE, SOCIAL_FILE, USERS_FILE, ITEMS_FILE, META_FILE]
        .iter()
        .map(|f| dir.join(f))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<Vec<(u64, u64)>> {
        parse_edge_list(text.as_bytes(), Path::new("mem"))
    }

    #[test]
    fn duplicates_collapse() {
        let edges = dedup_interactions(parse("1 7\n1 7\n2 9\n").unwrap());
        assert_eq!(edges, vec![(1, 7), (2, 9)]);
    }

    #[test]
    fn self_loops_dropped() {
        assert!(canonical_social(parse("3 3\n").unwrap()).is_empty());
        assert_eq!(canonical_social(parse("5 2\n2 5\n").unwrap()), vec![(2, 5)]);
    }

    #[test]
    fn ratings_and_comments_ignored() {
        let edges = parse("# header\n\n1 2 4.5 99\n  3\t4  \n").unwrap();
        assert_eq!(edges, vec![(1, 2), (3, 4)]);
    }

    #[test]
    fn malformed_line_reports_number() {
        match parse("1 2\n3 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("7\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        fs::write(&a, "# nothing\n").unwrap();
        fs::write(&b, "1 2\n").unwrap();
        assert!(matches!(load_edge_lists(&a, &b), Err(Error::EmptyDataset(_))));
    }

    fn raw_with_user_degrees(degrees: &[usize]) -> RawDataset {
        let mut interactions = Vec::new();
        for (u, &d) in degrees.iter().enumerate() {
            interactions.extend((0..d as u64).map(|i| (u as u64 * 10, i)));
        }
        RawDataset {
            interactions,
            social_edges: vec![(0, 10)],
        }
    }

    #[test]
    fn per_user_split_counts() {
        let raw = raw_with_user_degrees(&[10, 1]);
        let split = split_train_test(&raw, 0.8, 1).unwrap();
        let count = |edges: &[Edge], u| edges.iter().filter(|e| e.0 == u).count();
        assert_eq!(count(&split.train, 0), 8);
        assert_eq!(count(&split.test, 0), 2);
        assert_eq!(count(&split.train, 1), 1);
        assert_eq!(count(&split.test, 1), 0);
        assert_eq!(split.social, vec![(0, 1)]);
    }

    #[test]
    fn split_is_deterministic() {
        let raw = raw_with_user_degrees(&[7, 9, 4, 13]);
        assert_eq!(
            split_train_test(&raw, 0.8, 42).unwrap(),
            split_train_test(&raw, 0.8, 42).unwrap()
        );
    }

    #[test]
    fn bad_ratios_rejected() {
        let raw = raw_with_user_degrees(&[3]);
        for r in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(matches!(split_train_test(&raw, r, 0), Err(Error::Config(_))));
        }
        let split = split_train_test(&raw, 0.8, 0).unwrap();
        assert!(inject_interaction_noise(&split, 1.0, 0).is_err());
        assert!(inject_interaction_noise(&split, -0.1, 0).is_err());
    }

    fn grid_split(users: usize, items: usize, per_user: usize) -> DatasetSplit {
        let interactions = (0..users as u64)
            .flat_map(|u| (0..per_user as u64).map(move |k| (u, (u * 7 + k * 3) % items as u64)))
            .collect();
        let raw = RawDataset {
            interactions: dedup_interactions(interactions),
            social_edges: vec![],
        };
        split_train_test(&raw, 0.8, 3).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let split = grid_split(20, 60, 10);
        assert_eq!(inject_interaction_noise(&split, 0.0, 9).unwrap(), split);
    }

    #[test]
    fn noise_count_and_disjointness() {
        let split = grid_split(100, 200, 10);
        assert_eq!(split.train.len(), 800);
        let noisy = inject_interaction_noise(&split, 0.1, 5).unwrap();
        assert_eq!(noisy.train.len(), 880);
        assert_eq!(noisy.fabricated_count(), 80);
        assert_eq!(noisy.test, split.test);
        let original: HashSet<Edge> = split.train.iter().chain(&split.test).copied().collect();
        for (e, &f) in noisy.train.iter().zip(&noisy.train_fabricated) {
            assert_eq!(f, !original.contains(e));
        }
        let unique: HashSet<Edge> = noisy.train.iter().copied().collect();
        assert_eq!(unique.len(), noisy.train.len());
    }

    #[test]
    fn noise_on_thousand_edges() {
        let split = grid_split(100, 300, 13);
        let mut split = split;
        split.train.truncate(1000);
        split.train_fabricated.truncate(1000);
        let noisy = inject_interaction_noise(&split, 0.1, 1).unwrap();
        let fabricated = noisy.fabricated_count();
        assert_eq!(fabricated, 100);
        assert_eq!(noisy.train.len() - fabricated, 1000);
    }

    #[test]
    fn persisted_split_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let split = inject_interaction_noise(&grid_split(12, 40, 6), 0.2, 4).unwrap();
        write_split(&split, dir.path()).unwrap();
        assert_eq!(read_split(dir.path()).unwrap(), split);
    }

    proptest! {
        #[test]
        fn id_maps_round_trip(ids in proptest::collection::vec(0u64..1_000_000, 1..64)) {
            let map = IdMap::from_ids(ids.iter().copied());
            for &e in &ids {
                let i = map.internal(e).unwrap();
                prop_assert_eq!(map.external(i), Some(e));
            }
            for i in 0..map.len() as u32 {
                prop_assert_eq!(map.internal(map.external(i).unwrap()), Some(i));
            }
        }

        #[test]
        fn split_partitions_interactions(
            degrees in proptest::collection::vec(1usize..25, 1..20),
            seed in any::<u64>(),
        ) {
            let raw = raw_with_user_degrees(&degrees);
            let split = split_train_test(&raw, 0.8, seed).unwrap();
            let train: HashSet<Edge> = split.train.iter().copied().collect();
            prop_assert!(split.test.iter().all(|e| !train.contains(e)));
            prop_assert_eq!(split.train.len() + split.test.len(), raw.interactions.len());
            for (u, &d) in degrees.iter().enumerate() {
                let t = split.train.iter().filter(|e| e.0 as usize == u).count();
                prop_assert!(t >= 1);
                prop_assert!((t as f64 - 0.8 * d as f64).abs() <= 1.0);
            }
        }
    }
}
