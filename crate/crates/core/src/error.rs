use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("malformed or missing `p edge n m` header (line {0})")]
    Header(usize),
    #[error("malformed edge line {0}")]
    Line(usize),
    #[error("header declares {declared} edges, found {found}")]
    EdgeCount { declared: usize, found: usize },
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("vertex {vertex} out of range for n = {n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("graph has no edges")]
    NoEdges,
    #[error("{0} vertices do not fit a 32-bit vertex id")]
    TooManyVertices(usize),
    #[error("planted instances need n >= 3, got {0}")]
    TooFewVertices(usize),
    #[error("edge probability must be in (0, 1], got {0}")]
    BadProbability(f64),
    #[error("color {color} on vertex {vertex} is outside {{1,2,3}}")]
    BadColor { vertex: usize, color: u8 },
    #[error("coloring covers {found} vertices, graph has {expected}")]
    NotTotal { expected: usize, found: usize },
    #[error("expected {expected} edge weights, got {found}")]
    WeightCount { expected: usize, found: usize },
    #[error("edge weight {0} is negative or not finite")]
    BadWeight(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PermutationError {
    #[error("permutation size {0} outside 2..=4")]
    BadSize(usize),
    #[error("{0:?} is not a bijection")]
    NotBijection(Vec<u8>),
    #[error("rank {rank} out of range for S_{k}")]
    RankOutOfRange { k: usize, rank: usize },
}

/// Failures of a randomness source or an agent. Inside a session these become
/// a fault verdict rather than a protocol reject.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("script exhausted after {0} entries")]
    ScriptExhausted(usize),
    #[error("timed out waiting for external input")]
    Timeout,
    #[error("no external input pending")]
    NoInput,
    #[error("external input channel closed")]
    Disconnected,
    #[error("expected {expected} weights, got {found}")]
    WeightCount { expected: usize, found: usize },
    #[error("invalid weights: {0}")]
    BadWeights(String),
    #[error("edge ({0}, {1}) is not in the graph")]
    NonEdge(usize, usize),
    #[error("invalid transition model: {0}")]
    BadModel(String),
    #[error("symbol {symbol} out of range for {states} states")]
    SymbolOutOfRange { symbol: usize, states: usize },
    #[error("sequence too short: {0}")]
    TooShort(usize),
    #[error("bad agent spec `{0}`")]
    BadSpec(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Permutation(#[from] PermutationError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Agent API misuse detected by the session engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("rounds must be in 1..={cap}, got {rounds}")]
    Rounds { rounds: usize, cap: usize },
    #[error("expected {expected} commitments, got {found}")]
    CommitmentCount { expected: usize, found: usize },
    #[error("challenge ({0}, {1}) is not an edge")]
    NonEdge(usize, usize),
    #[error("opening requested for ({requested:?}) but the challenge was ({challenged:?})")]
    WrongEdge {
        requested: (usize, usize),
        challenged: (usize, usize),
    },
    #[error("opened vertices {opened:?} do not match challenge {challenge:?}")]
    WrongOpenings {
        opened: (u32, u32),
        challenge: (usize, usize),
    },
    #[error("permutation must act on {{1,2,3}}, got S_{0}")]
    NotS3(usize),
    #[error("action `{action}` not allowed in phase {phase}")]
    Phase { action: &'static str, phase: &'static str },
    #[error("no challenge received yet")]
    NoChallenge,
    #[error("agent failure: {0}")]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("history edge ({0}, {1}) is not in the graph")]
    NonEdge(usize, usize),
    #[error("transcripts mix sessions: {0}")]
    MixedSessions(String),
    #[error("edge distribution invalid: {0}")]
    BadDistribution(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("sequence of length {len} too short (need {need})")]
    TooShort { len: usize, need: usize },
    #[error("k must be 2, 3 or 4, got {0}")]
    BadK(usize),
    #[error("symbol {symbol} out of range for k = {k}")]
    SymbolOutOfRange { symbol: usize, k: usize },
    #[error("fingerprints have different k ({0} vs {1})")]
    KMismatch(usize, usize),
    #[error("no reports to aggregate")]
    Empty,
    #[error("malformed input row {line}: {message}")]
    Row { line: usize, message: String },
}
