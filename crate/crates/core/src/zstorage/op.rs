use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OpError {
    #[error("k * t_gc ({reclaim}) must exceed t_cache ({t_cache}); GC can never keep up")]
    InfeasibleRates { reclaim: f64, t_cache: f64 },
    #[error("invalid OP inputs: {0}")]
    InvalidInput(String),
}

/// Over-provisioning lower bound for a given cache write rate and GC
/// cleaning throughput.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpPlan {
    pub t_cache: f64,
    pub t_gc: f64,
    /// How much more invalid data the chosen victim holds than the average zone.
    pub k: f64,
    /// Reserved space divided by the cache's virtual space.
    pub r_op: f64,
    /// Average fraction of invalid data across zones at that OP ratio.
    pub r_invalid: f64,
}

/// Smallest OP ratio at which the reclaim rate `k * r_invalid * t_gc` keeps
/// up with the cache write rate `t_cache`.
pub fn compute_min_op(t_cache: f64, t_gc: f64, k: f64) -> Result<OpPlan, OpError> {
    if !(t_cache > 0.0 && t_gc > 0.0) {
        return Err(OpError::InvalidInput("rates must be positive".into()));
    }
    if !(k >= 1.0) {
        return Err(OpError::InvalidInput(format!("k must be >= 1, got {k}")));
    }
    let reclaim = k * t_gc;
    let denominator = reclaim - t_cache;
    if denominator <= 0.0 {
        return Err(OpError::InfeasibleRates { reclaim, t_cache });
    }
    let r_op = t_cache / denominator;
    Ok(OpPlan {
        t_cache,
        t_gc,
        k,
        r_op,
        r_invalid: r_op / (1.0 + r_op),
    })
}
