use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("depth {requested} exceeds budget {budget}")]
    Budget { requested: usize, budget: usize },
    #[error("depth {requested} unavailable: covering has {available} levels and no generator")]
    DepthExhausted { requested: usize, available: usize },
    #[error("not purely attracting at depth {depth}: {detail}")]
    NotPurelyAttracting { depth: usize, detail: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn at(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Input(_) | Error::UnknownGenerator(_) => 1,
            Error::Invariant(_) | Error::Precondition(_) => 2,
            Error::NotPurelyAttracting { .. } => 3,
            Error::Budget { .. } | Error::DepthExhausted { .. } => 4,
            Error::Stage { .. } => unreachable!(),
        }
    }

    pub fn is_budget(&self) -> bool {
        self.exit_code() == 4
    }
}

pub type Result<T> = std::result::Result<T, Error>;
