use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabError {
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("invalid automaton: {0}")]
    InvalidAutomaton(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("generator `{0}` has no inverse among the generators")]
    NotClosedUnderInverse(String),
    #[error("base generator `{0}` is not a single-state involution")]
    InvalidBase(String),
    #[error("not a fragmentation: {0}")]
    NotAFragmentation(String),
    #[error("level {level} is shallower than generator piece depth {depth}")]
    LevelTooShallow { level: usize, depth: usize },
    #[error("ball exceeds vertex cap {0}")]
    BallTooLarge(usize),
    #[error("graph is not connected")]
    NotConnected,
    #[error("graph has fewer than two vertices")]
    Degenerate,
    #[error("prefixes do not form a partition: {0}")]
    NotAPartition(String),
    #[error("element is not invertible: images of `{0}` and `{1}` overlap")]
    NotInvertible(String, String),
    #[error("refinement depth {0} exceeds cap {1}")]
    DepthCap(usize, usize),
    #[error("value not stabilized: {0}")]
    NotStabilized(String),
    #[error("vertex {0} is not an orbit point of this window")]
    NoPoints(usize),
    #[error("point {0} is outside the window")]
    OutsideWindow(String),
    #[error("basepoint is not on the geodesic")]
    BaseNotOnGeodesic,
    #[error("element {0} does not stabilize Y")]
    NotInKernel(usize),
    #[error("neighborhood of vertex {vertex} with depth {depth} touches the rim")]
    RimContact { vertex: usize, depth: usize },
    #[error("no repetition of the basepoint pattern inside the window of radius {0}")]
    NoRepetition(usize),
    #[error("n = {n} does not exceed N_phi = {n_phi}")]
    PreconditionNphi { n: usize, n_phi: String },
    #[error("pattern at vertex {0} differs from the basepoint pattern")]
    PatternMismatch(usize),
    #[error("transport claim `{claim}` failed at vertex {witness}")]
    TransportFailure { claim: String, witness: usize },
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("nested family check `{check}` failed at {witness}")]
    FamilyFailure { check: String, witness: String },
    #[error("group order exceeds cap {0}")]
    OrderCap(usize),
    #[error("invalid radius {0}")]
    InvalidRadius(usize),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
