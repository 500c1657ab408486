use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("column `{0}` declared in schema is missing from the csv header")]
    MissingColumn(String),

    #[error("unparseable value `{value}` at row {row}, column `{column}`")]
    UnparseableValue {
        row: usize,
        column: String,
        value: String,
    },

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("unknown group label `{label}` at row {row}")]
    UnknownGroupLabel { row: usize, label: String },

    #[error("dataset has {n} rows, at least {min} required")]
    DatasetTooSmall { n: usize, min: usize },

    #[error("only one {0} present, cannot rebalance")]
    SingleStratum(&'static str),

    #[error("training data must contain both classes")]
    SingleClass,

    #[error("only one group present")]
    SingleGroup,

    #[error("metric undefined: {0}")]
    DegenerateMetric(String),

    #[error("every group has an undefined metric")]
    AllGroupsDegenerate,

    #[error("fewer than two groups with a defined metric")]
    FewerThanTwoGroups,

    #[error("linear system is singular")]
    SingularSystem,

    #[error("no informative coalitions: only the empty and full coalitions were drawn")]
    DegenerateCoalitionSet,

    #[error("schema mismatch: expected {expected} features, got {actual}")]
    SchemaMismatch { expected: usize, actual: usize },

    #[error("fidelity {0} outside [0, 1]")]
    InfeasibleFidelity(f64),

    #[error("mutual-information filter dropped every feature")]
    AllFeaturesDropped,

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    ConfigInvalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
