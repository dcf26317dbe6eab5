use thiserror::Error;

/// Crate-wide error type. Variants carry enough context (tweet ids, user ids,
/// line numbers) to locate the offending record in the input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON on line {line} of {path}: {source}")]
    MalformedRecord {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("tweet {tweet_id}: duplicate user id {user_id}")]
    DuplicateUser { tweet_id: String, user_id: String },

    #[error("tweet {tweet_id}: event for user {user_id} references unknown parent {parent}")]
    UnknownParent {
        tweet_id: String,
        user_id: String,
        parent: String,
    },

    #[error("tweet {tweet_id}: retweet graph is not a tree rooted at {root} (cycle or disconnected component near user {user_id})")]
    NotATree {
        tweet_id: String,
        root: String,
        user_id: String,
    },

    #[error("tweet {tweet_id}: user {user_id} retweeted at {child_time} before its parent {parent} at {parent_time}")]
    NonPositiveReactionTime {
        tweet_id: String,
        user_id: String,
        parent: String,
        child_time: f64,
        parent_time: f64,
    },

    #[error("tweet {tweet_id}: user {user_id} has {children} retweet children but only {followers} followers")]
    MoreChildrenThanFollowers {
        tweet_id: String,
        user_id: String,
        children: u64,
        followers: u64,
    },

    #[error("tweet {tweet_id}: {what}")]
    InvalidCascade { tweet_id: String, what: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("sampler: {0}")]
    Sampler(String),

    #[error("diagnostics: {0}")]
    Diagnostics(String),

    #[error("benchmark model: {0}")]
    Benchmark(String),

    #[error("degenerate design matrix: {0}")]
    DegenerateDesign(String),
}

pub type Result<T> = std::result::Result<T, Error>;
