use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed model description (bad alphabet, rows not summing to one, …).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A symbol outside `0..alpha` appeared in an input sequence.
    #[error("symbol {symbol} out of range for alphabet size {alpha}")]
    SymbolOutOfRange { symbol: u8, alpha: usize },

    /// Invalid generator or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An enumeration index was not smaller than the class size.
    #[error("rank {index} out of range for class of size {size}")]
    RankOutOfRange { index: String, size: String },

    /// A guarded exact computation would exceed its declared resource bound.
    #[error("resource bound exceeded: {0}")]
    ResourceLimit(String),

    /// A variable-to-fixed generator ran out of input symbols.
    #[error("input stream exhausted before the generator stopped")]
    StreamExhausted,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("model parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
