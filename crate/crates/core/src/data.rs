//! Retweet-cascade data model: loading the JSON-Lines corpus, deriving tree
//! structure (depths, reaction times, final out-degrees, time order), cutting
//! observed prefixes, and splitting a corpus into training and prediction
//! halves.
//!
//! Vertex indexing convention used throughout the crate: vertex `0` is the
//! root tweet, vertices `1..=M` are the retweet events in input order, where
//! `M` is the cascade's total retweet count.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reaction time assigned when a retweet carries exactly its parent's
/// timestamp (coarse clocks produce ties; zero would put the event outside
/// the log-normal's support).
pub const TIE_REACTION_SECONDS: f64 = 1.0;

/// One retweet event as it appears on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetweetEvent {
    pub user_id: String,
    /// Seconds since the root tweet was posted.
    pub time: f64,
    pub parent_user_id: String,
    pub followers: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RootRecord {
    user_id: String,
    followers: u64,
}

/// Wire format of one cascade: a single JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CascadeRecord {
    tweet_id: String,
    root: RootRecord,
    events: Vec<RetweetEvent>,
}

/// Structural quantities computed from the raw events by
/// [`RetweetGraph::derive_structure`]. Indexed by vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeStructure {
    /// Parent vertex index; `parents[0] == 0` by convention.
    pub parents: Vec<usize>,
    /// Hop distance from the root (root is 0).
    pub depths: Vec<u32>,
    /// Reaction times S_j in seconds; `reaction_times[0] == 0`. Tied
    /// timestamps are clamped to [`TIE_REACTION_SECONDS`].
    pub reaction_times: Vec<f64>,
    /// Final number of retweet children M_j of each vertex.
    pub out_degrees: Vec<u64>,
    /// Vertex indices sorted by event time, ties kept in input order. The
    /// root is first.
    pub order: Vec<usize>,
}

/// A single retweet cascade. Raw fields come straight from the input file;
/// derived structure is filled in by [`RetweetGraph::derive_structure`].
#[derive(Debug, Clone, PartialEq)]
pub struct RetweetGraph {
    pub tweet_id: String,
    pub root_user_id: String,
    pub root_followers: u64,
    pub events: Vec<RetweetEvent>,
    structure: Option<CascadeStructure>,
}

impl RetweetGraph {
    pub fn new(
        tweet_id: impl Into<String>,
        root_user_id: impl Into<String>,
        root_followers: u64,
        events: Vec<RetweetEvent>,
    ) -> Self {
        RetweetGraph {
            tweet_id: tweet_id.into(),
            root_user_id: root_user_id.into(),
            root_followers,
            events,
            structure: None,
        }
    }

    /// Total retweet count M^x (the root is not counted).
    pub fn total_retweets(&self) -> u64 {
        self.events.len() as u64
    }

    /// Number of vertices including the root.
    pub fn n_vertices(&self) -> usize {
        self.events.len() + 1
    }

    /// Absolute event time of a vertex; the root is at time zero.
    pub fn time(&self, vertex: usize) -> f64 {
        if vertex == 0 {
            0.0
        } else {
            self.events[vertex - 1].time
        }
    }

    pub fn followers(&self, vertex: usize) -> u64 {
        if vertex == 0 {
            self.root_followers
        } else {
            self.events[vertex - 1].followers
        }
    }

    pub fn user_id(&self, vertex: usize) -> &str {
        if vertex == 0 {
            &self.root_user_id
        } else {
            &self.events[vertex - 1].user_id
        }
    }

    /// Derived structure, or an error if [`derive_structure`] has not run.
    ///
    /// [`derive_structure`]: RetweetGraph::derive_structure
    pub fn structure(&self) -> Result<&CascadeStructure> {
        self.structure.as_ref().ok_or_else(|| Error::InvalidCascade {
            tweet_id: self.tweet_id.clone(),
            what: "structure not derived yet".into(),
        })
    }

    /// Validate the tree and compute parents, depths, reaction times, final
    /// out-degrees and the time order. Idempotent: recomputing on an already
    /// derived graph yields the same structure.
    pub fn derive_structure(&mut self) -> Result<()> {
        let n = self.n_vertices();
        let tweet_id = self.tweet_id.clone();

        let mut index_of: HashMap<&str, usize> = HashMap::with_capacity(n);
        index_of.insert(self.root_user_id.as_str(), 0);
        for (k, ev) in self.events.iter().enumerate() {
            if index_of.insert(ev.user_id.as_str(), k + 1).is_some() {
                return Err(Error::DuplicateUser {
                    tweet_id,
                    user_id: ev.user_id.clone(),
                });
            }
        }

        let mut parents = vec![0usize; n];
        for (k, ev) in self.events.iter().enumerate() {
            if ev.time < 0.0 || !ev.time.is_finite() {
                return Err(Error::InvalidCascade {
                    tweet_id,
                    what: format!("user {} has invalid event time {}", ev.user_id, ev.time),
                });
            }
            match index_of.get(ev.parent_user_id.as_str()) {
                Some(&p) => parents[k + 1] = p,
                None => {
                    return Err(Error::UnknownParent {
                        tweet_id,
                        user_id: ev.user_id.clone(),
                        parent: ev.parent_user_id.clone(),
                    })
                }
            }
        }

        // Depths by memoized parent-chain walking; a chain that revisits a
        // vertex before resolving is a cycle (the "tree" is not a tree).
        let mut depths = vec![u32::MAX; n];
        depths[0] = 0;
        let mut chain: Vec<usize> = Vec::new();
        for start in 1..n {
            if depths[start] != u32::MAX {
                continue;
            }
            chain.clear();
            let mut v = start;
            while depths[v] == u32::MAX {
                if parents[v] == v || chain.contains(&v) {
                    return Err(Error::NotATree {
                        tweet_id,
                        root: self.root_user_id.clone(),
                        user_id: self.user_id(v).to_string(),
                    });
                }
                chain.push(v);
                v = parents[v];
            }
            let mut d = depths[v];
            for &u in chain.iter().rev() {
                d += 1;
                depths[u] = d;
            }
        }

        let mut reaction_times = vec![0.0f64; n];
        for j in 1..n {
            let gap = self.time(j) - self.time(parents[j]);
            if gap < 0.0 {
                return Err(Error::NonPositiveReactionTime {
                    tweet_id,
                    user_id: self.user_id(j).to_string(),
                    parent: self.user_id(parents[j]).to_string(),
                    child_time: self.time(j),
                    parent_time: self.time(parents[j]),
                });
            }
            reaction_times[j] = if gap == 0.0 { TIE_REACTION_SECONDS } else { gap };
        }

        let mut out_degrees = vec![0u64; n];
        for j in 1..n {
            out_degrees[parents[j]] += 1;
        }
        for (j, &degree) in out_degrees.iter().enumerate() {
            if degree > self.followers(j) {
                return Err(Error::MoreChildrenThanFollowers {
                    tweet_id,
                    user_id: self.user_id(j).to_string(),
                    children: out_degrees[j],
                    followers: self.followers(j),
                });
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.time(a).partial_cmp(&self.time(b)).unwrap());

        self.structure = Some(CascadeStructure {
            parents,
            depths,
            reaction_times,
            out_degrees,
            order,
        });
        Ok(())
    }
}

/// The early-observation window of a prediction cascade: the root plus the
/// first `ceil(fraction * M)` retweets in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedCascade {
    pub tweet_id: String,
    pub fraction: f64,
    /// Observation horizon t^x: the time of the last included retweet.
    pub observation_time: f64,
    /// Observed vertex indices in time order; `vertices[0]` is the root.
    pub vertices: Vec<usize>,
    /// Observed child counts m_j(t^x), parallel to `vertices`.
    pub observed_children: Vec<u64>,
}

impl ObservedCascade {
    /// Number of observed retweets m^x(t^x).
    pub fn observed_retweets(&self) -> u64 {
        (self.vertices.len() - 1) as u64
    }
}

/// Cut the observed prefix of a derived cascade at the given fraction of its
/// final size. At least one retweet is always included, so `observation_time`
/// is positive and well-defined.
pub fn observation_prefix(graph: &RetweetGraph, fraction: f64) -> Result<ObservedCascade> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "observation fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let m_total = graph.total_retweets();
    if m_total == 0 {
        return Err(Error::InvalidCascade {
            tweet_id: graph.tweet_id.clone(),
            what: "cannot observe a prefix of a cascade with no retweets".into(),
        });
    }
    let st = graph.structure()?;
    let k = ((fraction * m_total as f64).ceil() as u64).max(1).min(m_total) as usize;

    let vertices: Vec<usize> = st.order[..=k].to_vec();
    let observation_time = graph.time(vertices[k]);

    let mut position = HashMap::with_capacity(vertices.len());
    for (slot, &v) in vertices.iter().enumerate() {
        position.insert(v, slot);
    }
    let mut observed_children = vec![0u64; vertices.len()];
    for &v in &vertices[1..] {
        match position.get(&st.parents[v]) {
            Some(&p) => observed_children[p] += 1,
            None => {
                // Only reachable through timestamp ties listed child-first in
                // the input; refusing is better than silently dropping the
                // orphan from every m_j.
                return Err(Error::InvalidCascade {
                    tweet_id: graph.tweet_id.clone(),
                    what: format!(
                        "observed prefix at fraction {fraction} includes user {} but not its parent {}",
                        graph.user_id(v),
                        graph.user_id(st.parents[v])
                    ),
                });
            }
        }
    }

    Ok(ObservedCascade {
        tweet_id: graph.tweet_id.clone(),
        fraction,
        observation_time,
        vertices,
        observed_children,
    })
}

/// Which half of the corpus a cascade belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Training,
    Prediction,
}

/// A corpus of cascades with their roles and (for prediction cascades) the
/// attached observation windows.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub cascades: Vec<RetweetGraph>,
    pub roles: Vec<Role>,
    pub observations: Vec<Option<ObservedCascade>>,
}

impl Dataset {
    pub fn from_graphs(cascades: Vec<RetweetGraph>) -> Self {
        let n = cascades.len();
        Dataset {
            cascades,
            roles: vec![Role::Training; n],
            observations: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.cascades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cascades.is_empty()
    }

    /// Derive structure for every cascade in place.
    pub fn derive_all(&mut self) -> Result<()> {
        for g in &mut self.cascades {
            g.derive_structure()?;
        }
        Ok(())
    }

    /// Indices of cascades with the given role.
    pub fn indices(&self, role: Role) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.roles[i] == role).collect()
    }

    /// Split the corpus into training and prediction halves, stratified by
    /// final size: cascades are sorted by M^x, consecutive pairs are formed,
    /// and a seeded coin sends one member of each pair to each half (the
    /// leftover of an odd corpus is assigned by another coin flip).
    pub fn partition(&mut self, seed: u64) -> Result<()> {
        use rand::Rng;
        use rand::SeedableRng;
        if self.len() < 2 {
            return Err(Error::Dataset(format!(
                "need at least 2 cascades to partition, got {}",
                self.len()
            )));
        }
        let mut by_size: Vec<usize> = (0..self.len()).collect();
        by_size.sort_by_key(|&i| self.cascades[i].total_retweets());

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for pair in by_size.chunks(2) {
            let first_trains: bool = rng.random();
            match *pair {
                [a, b] => {
                    self.roles[a] = if first_trains { Role::Training } else { Role::Prediction };
                    self.roles[b] = if first_trains { Role::Prediction } else { Role::Training };
                }
                [a] => {
                    self.roles[a] = if first_trains { Role::Training } else { Role::Prediction };
                }
                _ => unreachable!(),
            }
        }
        Ok(())
    }

    /// Attach observation windows at `fraction` to every prediction cascade.
    pub fn attach_observations(&mut self, fraction: f64) -> Result<()> {
        for i in 0..self.len() {
            self.observations[i] = match self.roles[i] {
                Role::Prediction => Some(observation_prefix(&self.cascades[i], fraction)?),
                Role::Training => None,
            };
        }
        Ok(())
    }
}

fn record_from_graph(g: &RetweetGraph) -> CascadeRecord {
    CascadeRecord {
        tweet_id: g.tweet_id.clone(),
        root: RootRecord {
            user_id: g.root_user_id.clone(),
            followers: g.root_followers,
        },
        events: g.events.clone(),
    }
}

fn graph_from_record(r: CascadeRecord) -> RetweetGraph {
    RetweetGraph::new(r.tweet_id, r.root.user_id, r.root.followers, r.events)
}

/// Parse a JSON-Lines corpus. Derived structure is left unset; call
/// [`Dataset::derive_all`] (or `derive_structure` per graph) before use.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut graphs = Vec::new();
    let mut seen_tweets: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CascadeRecord =
            serde_json::from_str(&line).map_err(|source| Error::MalformedRecord {
                path: path.display().to_string(),
                line: lineno + 1,
                source,
            })?;
        if let Some(prev) = seen_tweets.insert(record.tweet_id.clone(), lineno + 1) {
            return Err(Error::Dataset(format!(
                "duplicate tweet id {} on lines {prev} and {} of {}",
                record.tweet_id,
                lineno + 1,
                path.display()
            )));
        }
        let mut ids = HashMap::new();
        ids.insert(record.root.user_id.clone(), ());
        for ev in &record.events {
            if ids.insert(ev.user_id.clone(), ()).is_some() {
                return Err(Error::DuplicateUser {
                    tweet_id: record.tweet_id.clone(),
                    user_id: ev.user_id.clone(),
                });
            }
        }
        graphs.push(graph_from_record(record));
    }
    Ok(Dataset::from_graphs(graphs))
}

/// Serialize cascades to a JSON-Lines string in the canonical field order.
pub fn to_jsonl(graphs: &[RetweetGraph]) -> String {
    let mut out = String::new();
    for g in graphs {
        out.push_str(&serde_json::to_string(&record_from_graph(g)).expect("serializable record"));
        out.push('\n');
    }
    out
}

/// Write cascades as JSON-Lines to `path`.
pub fn save_cascades(graphs: &[RetweetGraph], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(to_jsonl(graphs).as_bytes()).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(user: &str, time: f64, parent: &str, followers: u64) -> RetweetEvent {
        RetweetEvent {
            user_id: user.into(),
            time,
            parent_user_id: parent.into(),
            followers,
        }
    }

    /// root(r) -> a(10s) -> c(25s); root -> b(20s)
    fn small_graph() -> RetweetGraph {
        let mut g = RetweetGraph::new(
            "t1",
            "r",
            50,
            vec![ev("a", 10.0, "r", 7), ev("b", 20.0, "r", 3), ev("c", 25.0, "a", 4)],
        );
        g.derive_structure().unwrap();
        g
    }

    #[test]
    fn derives_depths_reactions_and_out_degrees() {
        let g = small_graph();
        let st = g.structure().unwrap();
        assert_eq!(st.parents, vec![0, 0, 0, 1]);
        assert_eq!(st.depths, vec![0, 1, 1, 2]);
        assert_eq!(st.reaction_times, vec![0.0, 10.0, 20.0, 15.0]);
        assert_eq!(st.out_degrees, vec![2, 1, 0, 0]);
        assert_eq!(st.order, vec![0, 1, 2, 3]);
        assert_eq!(st.out_degrees.iter().sum::<u64>(), g.total_retweets());
    }

    #[test]
    fn derive_structure_is_idempotent() {
        let mut g = small_graph();
        let first = g.structure().unwrap().clone();
        g.derive_structure().unwrap();
        assert_eq!(*g.structure().unwrap(), first);
    }

    #[test]
    fn tied_timestamp_clamps_reaction_time() {
        let mut g = RetweetGraph::new("t", "r", 9, vec![ev("a", 5.0, "r", 5), ev("b", 5.0, "a", 1)]);
        g.derive_structure().unwrap();
        let st = g.structure().unwrap();
        assert_eq!(st.reaction_times[2], TIE_REACTION_SECONDS);
        // stable order keeps the input order for the tie
        assert_eq!(st.order, vec![0, 1, 2]);
    }

    #[test]
    fn child_before_parent_is_rejected() {
        let mut g = RetweetGraph::new("t", "r", 9, vec![ev("a", 5.0, "r", 5), ev("b", 4.0, "a", 1)]);
        let err = g.derive_structure().unwrap_err();
        assert!(matches!(err, Error::NonPositiveReactionTime { ref user_id, .. } if user_id == "b"));
    }

    #[test]
    fn unknown_parent_and_cycle_are_rejected() {
        let mut g = RetweetGraph::new("t", "r", 9, vec![ev("a", 5.0, "ghost", 5)]);
        assert!(matches!(g.derive_structure().unwrap_err(), Error::UnknownParent { .. }));

        let mut g = RetweetGraph::new(
            "t",
            "r",
            9,
            vec![ev("a", 5.0, "b", 5), ev("b", 5.0, "a", 5)],
        );
        assert!(matches!(g.derive_structure().unwrap_err(), Error::NotATree { .. }));
    }

    #[test]
    fn more_children_than_followers_is_rejected() {
        let mut g = RetweetGraph::new("t", "r", 1, vec![ev("a", 1.0, "r", 0), ev("b", 2.0, "r", 0)]);
        let err = g.derive_structure().unwrap_err();
        assert!(
            matches!(err, Error::MoreChildrenThanFollowers { children: 2, followers: 1, .. }),
            "got {err}"
        );
    }

    fn chain_graph(n_events: usize) -> RetweetGraph {
        // root -> e1 -> e2 -> ... with 10-second gaps
        let mut events = Vec::new();
        for k in 0..n_events {
            let parent = if k == 0 { "r".to_string() } else { format!("e{k}") };
            events.push(ev(&format!("e{}", k + 1), 10.0 * (k + 1) as f64, &parent, 30));
        }
        let mut g = RetweetGraph::new("chain", "r", 30, events);
        g.derive_structure().unwrap();
        g
    }

    #[test]
    fn prefix_rounds_up_and_includes_at_least_one_retweet() {
        let g = chain_graph(10);
        let obs = observation_prefix(&g, 0.25).unwrap();
        assert_eq!(obs.observed_retweets(), 3, "ceil(0.25 * 10)");
        assert_eq!(obs.observation_time, 30.0);

        let tiny = observation_prefix(&g, 0.001).unwrap();
        assert_eq!(tiny.observed_retweets(), 1);
        assert_eq!(tiny.observation_time, 10.0);

        let all = observation_prefix(&g, 1.0).unwrap();
        assert_eq!(all.observed_retweets(), 10);
        assert_eq!(
            all.observed_children,
            g.structure().unwrap().out_degrees,
            "full observation sees every final child"
        );
    }

    #[test]
    fn observed_children_sum_to_observed_retweets() {
        let g = small_graph();
        for &f in &[0.1, 0.4, 0.7, 1.0] {
            let obs = observation_prefix(&g, f).unwrap();
            assert_eq!(
                obs.observed_children.iter().sum::<u64>(),
                obs.observed_retweets(),
                "fraction {f}"
            );
        }
        // two of three retweets observed: root has children a,b observed
        let obs = observation_prefix(&g, 0.5).unwrap();
        assert_eq!(obs.vertices, vec![0, 1, 2]);
        assert_eq!(obs.observed_children, vec![2, 0, 0]);
    }

    #[test]
    fn prefix_rejects_orphaned_tie() {
        // b and its parent a share a timestamp, with b listed first: a prefix
        // that ends between them would include the child without the parent.
        let mut g = RetweetGraph::new(
            "t",
            "r",
            9,
            vec![ev("b", 5.0, "a", 2), ev("a", 5.0, "r", 6)],
        );
        g.derive_structure().unwrap();
        let err = observation_prefix(&g, 0.5).unwrap_err();
        assert!(matches!(err, Error::InvalidCascade { .. }), "got {err}");
    }

    #[test]
    fn prefix_requires_retweets_and_valid_fraction() {
        let mut g = RetweetGraph::new("t", "r", 9, vec![]);
        g.derive_structure().unwrap();
        assert!(observation_prefix(&g, 0.5).is_err());
        let g = small_graph();
        assert!(observation_prefix(&g, 0.0).is_err());
        assert!(observation_prefix(&g, 1.5).is_err());
    }

    fn corpus(n: usize) -> Dataset {
        let graphs: Vec<RetweetGraph> = (0..n)
            .map(|i| {
                let events = (0..=i)
                    .map(|k| ev(&format!("u{k}"), (k + 1) as f64, "r", 20))
                    .collect();
                RetweetGraph::new(format!("t{i}"), "r", 1000, events)
            })
            .collect();
        Dataset::from_graphs(graphs)
    }

    #[test]
    fn partition_splits_even_corpus_in_half_stratified_by_size() {
        let mut ds = corpus(52);
        ds.partition(7).unwrap();
        let training = ds.indices(Role::Training);
        assert_eq!(training.len(), 26);
        assert_eq!(ds.indices(Role::Prediction).len(), 26);

        // consecutive size-sorted pairs must split across the halves
        let mut by_size: Vec<usize> = (0..ds.len()).collect();
        by_size.sort_by_key(|&i| ds.cascades[i].total_retweets());
        for pair in by_size.chunks(2) {
            assert_ne!(ds.roles[pair[0]], ds.roles[pair[1]]);
        }
    }

    #[test]
    fn partition_is_deterministic_in_the_seed() {
        let mut a = corpus(9);
        let mut b = corpus(9);
        a.partition(123).unwrap();
        b.partition(123).unwrap();
        assert_eq!(a.roles, b.roles);

        let mut c = corpus(2);
        c.partition(0).unwrap();
        assert_eq!(c.indices(Role::Training).len(), 1);
        assert_eq!(c.indices(Role::Prediction).len(), 1);

        let mut tiny = corpus(1);
        assert!(tiny.partition(0).is_err());
    }

    #[test]
    fn jsonl_roundtrip_is_stable() {
        use std::io::Write as _;
        let graphs = vec![small_graph(), chain_graph(4)];
        let serialized = to_jsonl(&graphs);

        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(serialized.as_bytes()).unwrap();
        let loaded = load_dataset(f.path()).unwrap();
        assert_eq!(loaded.len(), 2);
        let reserialized = to_jsonl(&loaded.cascades);
        assert_eq!(serialized, reserialized, "serialize/load/serialize fixed point");
        for (orig, back) in graphs.iter().zip(&loaded.cascades) {
            assert_eq!(orig.tweet_id, back.tweet_id);
            assert_eq!(orig.events, back.events);
        }
    }

    #[test]
    fn load_reports_line_numbers_and_duplicates() {
        use std::io::Write as _;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"tweet_id":"a","root":{{"user_id":"r","followers":5}},"events":[]}}"#)
            .unwrap();
        writeln!(f, r#"{{"tweet_id":"b","root":{{"user_id":"r"}}}}"#).unwrap();
        let err = load_dataset(f.path()).unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { line: 2, .. }), "got {err}");

        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            r#"{{"tweet_id":"a","root":{{"user_id":"r","followers":5}},"events":[{{"user_id":"r","time":1.0,"parent_user_id":"r","followers":2}}]}}"#
        )
        .unwrap();
        let err = load_dataset(f.path()).unwrap_err();
        assert!(matches!(err, Error::DuplicateUser { .. }), "got {err}");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        /// Random well-formed cascade: parents point at earlier vertices,
        /// times strictly increase, followers cover the realized out-degrees.
        fn arbitrary_graph() -> impl Strategy<Value = RetweetGraph> {
            (1usize..24)
                .prop_flat_map(|n| {
                    (
                        proptest::collection::vec(0usize..n, n),
                        proptest::collection::vec(0.5f64..30.0, n),
                    )
                })
                .prop_map(|(parent_choice, gaps)| {
                    let n = parent_choice.len();
                    let mut times = vec![0.0f64];
                    let mut out_deg = vec![0u64; n + 1];
                    let mut events = Vec::with_capacity(n);
                    for j in 1..=n {
                        let p = parent_choice[j - 1] % j; // earlier vertex
                        out_deg[p] += 1;
                        let t = times[p] + gaps[j - 1];
                        times.push(t);
                        let parent = if p == 0 { "r".into() } else { format!("u{p}") };
                        events.push(RetweetEvent {
                            user_id: format!("u{j}"),
                            time: t,
                            parent_user_id: parent,
                            followers: 0, // placeholder, fixed below
                        });
                    }
                    for (j, ev) in events.iter_mut().enumerate() {
                        ev.followers = out_deg[j + 1] + 2;
                    }
                    let mut g = RetweetGraph::new("p", "r", out_deg[0] + 2, events);
                    g.derive_structure().unwrap();
                    g
                })
        }

        proptest! {
            #[test]
            fn prefixes_nest_and_count_consistently(g in arbitrary_graph(), f1 in 0.01f64..1.0, f2 in 0.01f64..1.0) {
                let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
                let a = observation_prefix(&g, lo).unwrap();
                let b = observation_prefix(&g, hi).unwrap();
                prop_assert!(a.vertices.len() <= b.vertices.len());
                prop_assert_eq!(&a.vertices[..], &b.vertices[..a.vertices.len()],
                    "smaller prefix is a prefix of the larger");
                prop_assert_eq!(a.observed_children.iter().sum::<u64>(), a.observed_retweets());
                prop_assert_eq!(b.observed_children.iter().sum::<u64>(), b.observed_retweets());
                // observed children never exceed final children
                let st = g.structure().unwrap();
                for (slot, &v) in b.vertices.iter().enumerate() {
                    prop_assert!(b.observed_children[slot] <= st.out_degrees[v]);
                }
            }

            #[test]
            fn roundtrip_preserves_graphs(g in arbitrary_graph()) {
                use std::io::Write as _;
                let s = to_jsonl(std::slice::from_ref(&g));
                let mut f = tempfile::NamedTempFile::new().unwrap();
                f.write_all(s.as_bytes()).unwrap();
                let loaded = load_dataset(f.path()).unwrap();
                prop_assert_eq!(to_jsonl(&loaded.cascades), s);
            }
        }
    }
}
