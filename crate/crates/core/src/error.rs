use thiserror::Error;

/// Errors surfaced by type construction, planning, scheduling, and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// A domain value violated a construction invariant.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// The KV-cache byte count does not fit in a u64.
    #[error(
        "kv cache size overflows u64 (elem_bytes={elem_bytes}, batch={batch_size}, \
         layers={num_layers}, hidden={hidden_dim}, seq={seq_len})"
    )]
    KvSizeOverflow {
        elem_bytes: u64,
        batch_size: u64,
        num_layers: u64,
        hidden_dim: u64,
        seq_len: u64,
    },

    /// Batch membership does not line up with the provided request set.
    #[error("inconsistent batch membership: {0}")]
    Inconsistent(String),

    /// A stage received inputs an upstream stage was supposed to fill in.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configuration value is unusable.
    #[error("config error: {0}")]
    Config(String),

    /// No device subset has enough usable memory to hold every layer.
    #[error(
        "placement infeasible: {required} layers required but only {capacity} \
         assignable across all devices (short by {shortfall})"
    )]
    Infeasible {
        required: u32,
        capacity: u64,
        shortfall: u64,
    },

    /// Subset enumeration is capped to keep planning tractable.
    #[error("topology has {got} devices; the planner enumerates at most {max}")]
    TopologyTooLarge { got: usize, max: usize },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
