//! Serial versus vectorized address cost.
//!
//! Two accountings live here. The bit-level one counts only address bits
//! (16 per serialized column, 16 for a vector root plus 24 per extra one-hot
//! word) and is what the crossover analysis is stated in. The word-level one
//! counts whole 32-bit words, which is what the encoder actually pays for.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CostError {
    #[error("vector has no columns")]
    Empty,
    #[error("column {column} lies below root {root}")]
    BelowRoot { root: u32, column: u32 },
    #[error("vector span {span} exceeds the {max}-column chain limit")]
    SpanTooLarge { span: u32, max: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VectorCostParams {
    /// Bits per serialized column address.
    pub nbits_root: u32,
    /// Bits per additional one-hot word.
    pub nbits_offst: u32,
    /// Columns covered by the one-hot byte of the root word.
    pub msb_free_span: u32,
    /// Longest chain of additional one-hot words.
    pub max_lsb_words: u32,
}

impl Default for VectorCostParams {
    fn default() -> Self {
        VectorCostParams {
            nbits_root: 16,
            nbits_offst: 24,
            msb_free_span: 8,
            max_lsb_words: 2,
        }
    }
}

impl VectorCostParams {
    /// Widest span one chain can cover (56 columns by default).
    pub fn max_span(&self) -> u32 {
        self.msb_free_span + self.max_lsb_words * self.nbits_offst
    }

    /// One-hot words needed after the root word to reach `span` columns.
    pub fn lsb_words_for_span(&self, span: u32) -> u32 {
        span.saturating_sub(self.msb_free_span).div_ceil(self.nbits_offst)
    }

    /// Words needed to send a chain spanning `span` columns.
    pub fn vector_word_cost(&self, span: u32) -> u32 {
        1 + self.lsb_words_for_span(span)
    }
}

pub fn serial_cost_bits(n_events: u64, params: &VectorCostParams) -> u64 {
    params.nbits_root as u64 * n_events
}

/// Span of `xs` measured from `root`, inclusive.
fn span_from(root: u32, xs: &[u32], params: &VectorCostParams) -> Result<u32, CostError> {
    let (&lo, &hi) = match (xs.iter().min(), xs.iter().max()) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => return Err(CostError::Empty),
    };
    if lo < root {
        return Err(CostError::BelowRoot { root, column: lo });
    }
    let span = hi - root + 1;
    if span > params.max_span() {
        return Err(CostError::SpanTooLarge {
            span,
            max: params.max_span(),
        });
    }
    Ok(span)
}

/// Address bits to send `xs` as one vector rooted at `root`.
pub fn vector_cost_bits(root: u32, xs: &[u32], params: &VectorCostParams) -> Result<u64, CostError> {
    let span = span_from(root, xs, params)?;
    Ok(params.nbits_root as u64 + params.nbits_offst as u64 * params.lsb_words_for_span(span) as u64)
}

/// Word-level decision: vectorize only if strictly cheaper than one word per column.
pub fn should_vectorize(xs: &[u32], params: &VectorCostParams) -> Result<bool, CostError> {
    let root = *xs.iter().min().ok_or(CostError::Empty)?;
    let span = span_from(root, xs, params)?;
    Ok(params.vector_word_cost(span) < xs.len() as u32)
}
