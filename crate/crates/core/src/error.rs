use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("prime mismatch: {0} vs {1}")]
    PrimeMismatch(u64, u64),
    #[error("cyclotomic level {found} exceeds target level {target}")]
    LevelTooLow { found: u32, target: u32 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("residue {residue} out of range for modulus {modulus}")]
    ResidueOutOfRange { residue: u64, modulus: u64 },
    #[error("duplicate residue {0}")]
    DuplicateResidue(u64),
    #[error("empty set")]
    EmptySet,
    #[error("choice map is missing an entry for J-level prefix {0:?}")]
    MissingChoice(Vec<u8>),
    #[error("invalid digit {digit} for prime {p}")]
    InvalidDigit { digit: u8, p: u64 },
    #[error("scale guard exceeded: {size} > {guard} (raise the guard to override)")]
    ScaleGuard { size: u64, guard: u64 },
    #[error("sphere window [{lo}, {hi}] exceeds the resolvable range [{feas_lo}, {feas_hi}]")]
    WindowOutOfRange {
        lo: i64,
        hi: i64,
        feas_lo: i64,
        feas_hi: i64,
    },
    #[error("sphere S(0, p^{{-{n}}}) mixes zero and nonzero values; character evaluation is inconsistent")]
    MixedSphere { n: i64 },
    #[error("value {0} is not exactly representable with prime {1}")]
    NotRepresentable(String, u64),
    #[error("point lies outside the support of the measure")]
    OutsideSupport,
    #[error("resolution {requested} exceeds the truncation depth {depth}")]
    ResolutionTooFine { requested: i64, depth: i64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
