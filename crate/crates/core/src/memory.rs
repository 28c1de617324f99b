//! KV-cache peak sizing and batch token accounting.
//!
//! The peak cache size is `kv_bytes_per_elem * b * l * h * (s + n)` for batch
//! size `b`, layer count `l`, hidden dimension `h`, padded input length `s`
//! and maximum output length `n`. Token accounting splits a batch's cost into
//! generated tokens (`b * max_output_len`) and input padding tokens.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{BatchPlan, ModelSpec, Request, RequestId};

/// Peak KV-cache footprint in bytes for one batch, with overflow detected.
pub fn kv_cache_peak_bytes(
    model: &ModelSpec,
    batch_size: u64,
    max_input: u64,
    max_output: u64,
) -> Result<u64> {
    let overflow = || Error::KvSizeOverflow {
        elem_bytes: model.kv_bytes_per_elem(),
        batch_size,
        num_layers: model.num_layers() as u64,
        hidden_dim: model.hidden_dim(),
        seq_len: max_input.saturating_add(max_output),
    };
    let seq = max_input.checked_add(max_output).ok_or_else(overflow)?;
    model
        .kv_bytes_per_elem()
        .checked_mul(batch_size)
        .and_then(|v| v.checked_mul(model.num_layers() as u64))
        .and_then(|v| v.checked_mul(model.hidden_dim()))
        .and_then(|v| v.checked_mul(seq))
        .ok_or_else(overflow)
}

/// Token cost of one batch: `(generated, padding)`.
///
/// `members` must hold exactly the requests named by the plan. Generated
/// tokens count `|batch| * max_output_len`; padding counts the input tokens
/// added to level every member up to the padded length.
pub fn batch_token_cost(batch: &BatchPlan, members: &[Request]) -> Result<(u64, u64)> {
    let by_id = index_members(members)?;
    if members.len() != batch.len() {
        return Err(Error::Inconsistent(format!(
            "batch names {} requests but {} members were provided",
            batch.len(),
            members.len()
        )));
    }
    let mut padding = 0u64;
    for &id in batch.request_ids() {
        let r = by_id
            .get(&id)
            .ok_or_else(|| Error::Inconsistent(format!("request {id} named by the batch is missing")))?;
        if r.input_len() > batch.padded_input_len() {
            return Err(Error::Inconsistent(format!(
                "request {id} input {} exceeds the batch's padded length {}",
                r.input_len(),
                batch.padded_input_len()
            )));
        }
        padding += batch.padded_input_len() - r.input_len();
    }
    let generated = batch.len() as u64 * batch.max_output_len();
    Ok((generated, padding))
}

/// Sums [`batch_token_cost`] across a plan list that must partition `members`.
pub fn plan_token_cost(plans: &[BatchPlan], members: &[Request]) -> Result<(u64, u64)> {
    let by_id = index_members(members)?;
    let mut seen = HashMap::new();
    for (k, plan) in plans.iter().enumerate() {
        for &id in plan.request_ids() {
            if let Some(prev) = seen.insert(id, k) {
                return Err(Error::Inconsistent(format!(
                    "request {id} appears in plans {prev} and {k}"
                )));
            }
            if !by_id.contains_key(&id) {
                return Err(Error::Inconsistent(format!(
                    "plan {k} names request {id}, which is not in the request set"
                )));
            }
        }
    }
    if seen.len() != members.len() {
        return Err(Error::Inconsistent(format!(
            "plans cover {} requests but the request set has {}",
            seen.len(),
            members.len()
        )));
    }
    let mut generated = 0u64;
    let mut padding = 0u64;
    for plan in plans {
        let batch_members: Vec<Request> =
            plan.request_ids().iter().map(|id| by_id[id]).collect();
        let (g, p) = batch_token_cost(plan, &batch_members)?;
        generated += g;
        padding += p;
    }
    Ok((generated, padding))
}

fn index_members(members: &[Request]) -> Result<HashMap<RequestId, Request>> {
    let mut by_id = HashMap::with_capacity(members.len());
    for r in members {
        if by_id.insert(r.id(), *r).is_some() {
            return Err(Error::Inconsistent(format!("duplicate request id {}", r.id())));
        }
    }
    Ok(by_id)
}
