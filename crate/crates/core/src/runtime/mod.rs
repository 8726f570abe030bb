//! Execution: boxed reference interpreter, packed serialization and the
//! metric-collecting packed interpreter.

mod boxed;
mod compare;
mod layout;
mod packed;
mod value;

pub use boxed::{eval_main, interp_boxed, interp_boxed_with};
pub use compare::{compare_layouts, run_packed, CompareReport, CompareRow, LayoutCandidate};
pub use layout::{
    decode_buffer_file, deserialize, encode_buffer_file, read_buffer_file, serialize, write_buffer_file, CtorLayout,
    DataLayout, FieldKind, FormatError, LayoutDescriptor, OffsetMode, PackedBuffer,
};
pub use packed::{interp_packed, PackedArg, TraversalMetrics, DEFAULT_DEREF_WEIGHT};
pub use value::{apply_prim, ConValue, Value};

use crate::lang::Name;

/// Resource limits for the interpreters.
#[derive(Clone, Copy, Debug)]
pub struct Limits {
    pub max_depth: usize,
    pub max_steps: u64,
}

impl Default for Limits {
    fn default() -> Limits {
        Limits { max_depth: 1_000_000, max_steps: 500_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("call depth limit of {0} exceeded")]
    DepthExceeded(usize),
    #[error("step limit of {0} exceeded")]
    StepsExceeded(u64),
    #[error("unknown function `{0}`")]
    UnknownFunction(Name),
    #[error("`{func}` expects {expected} argument(s), got {found}")]
    Arity { func: Name, expected: usize, found: usize },
    #[error("unbound variable `{0}` at run time")]
    Unbound(Name),
    #[error("malformed buffer: {0}")]
    Format(#[from] FormatError),
    #[error("internal error: {0}")]
    Internal(String),
}
