//! Parallel episode batches and sweeps.
//!
//! Seeds are derived per episode index, so the parallel versions produce
//! exactly the rows of their sequential counterparts in `guidec-core`.

use guidec_core::episode::{compute_metrics, Decoder, MetricsRow, Scenario};
use guidec_core::model::LanguageModel;
use guidec_core::rng::SplitRng;
use guidec_core::state::EpisodeTrace;
use guidec_core::Error;

use crate::parallel::par_map;

pub fn run_batch_parallel<M>(
    decoder: &Decoder<'_, M>,
    base_seed: u64,
    n: usize,
) -> Result<Vec<EpisodeTrace>, Error>
where
    M: LanguageModel + Sync,
{
    par_map(n, |i| decoder.run(SplitRng::derive(base_seed, i as u64)))
        .into_iter()
        .collect()
}

/// Parallel version of [`guidec_core::episode::sweep`]; identical output.
pub fn sweep_parallel<M>(
    model: &M,
    scenario: &Scenario,
    param: &str,
    values: &[f64],
) -> Result<Vec<MetricsRow>, Error>
where
    M: LanguageModel + Sync,
{
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let point = scenario.with_param(param, value)?;
        let decoder = Decoder::new(model, &point)?;
        let traces = run_batch_parallel(&decoder, point.seed, point.samples)?;
        let mut row = compute_metrics(model, &point, &traces, point.seed)?;
        row.param = Some(String::from(param));
        row.value = Some(value);
        rows.push(row);
    }
    Ok(rows)
}
