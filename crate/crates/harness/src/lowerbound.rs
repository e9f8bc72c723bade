//! Separation tables: proper search versus the improper learner.

use serde::Serialize;
use vgm_core::lowerbound::{
    evaluate_box_candidate, gv_packing, make_needle_instance, proper_search_demo, HiddenBoxInstance, SearchInstance,
    Strategy,
};
use vgm_core::rng::stream_rng;
use vgm_core::Result;

use crate::config::InstanceSpec;
use crate::instance::Prepared;
use crate::runner::run_trial;
use crate::scenarios::builtin;

#[derive(Clone, Debug, Serialize)]
pub struct NeedleRow {
    pub trial: usize,
    pub seed: u64,
    pub secret: usize,
    pub scan_queries: u64,
    pub probe_queries: u64,
    pub vgm_queries: u64,
    pub vgm_budget: u64,
    pub vgm_output: String,
    pub vgm_emit_zero: f64,
}

/// Per seed: proper scan and random-probe query counts on a needle of size
/// `n`, next to the built-in needle scenario's learner.
pub fn needle_table(n: usize, trials: usize, base_seed: u64) -> Result<Vec<NeedleRow>> {
    let mut cfg = builtin("needle").expect("needle is built in").config();
    cfg.instance = InstanceSpec::Needle { n, secret: None };
    cfg.base_seed = base_seed;
    let prepared = Prepared::Needle { n, secret: None };
    let m = cfg.loss.bound();
    let rounds = cfg.params.rounds(m, cfg.eps1);
    let budget = (rounds * cfg.params.tests_per_round(rounds, cfg.eps2, n as f64)) as u64;
    (0..trials)
        .map(|t| {
            let seed = base_seed.wrapping_add(t as u64);
            let mut rng = stream_rng(seed, 0);
            let inst = make_needle_instance(n, None, &mut rng)?;
            let mut search_rng = stream_rng(seed, 3);
            let scan = proper_search_demo(SearchInstance::Needle(&inst), Strategy::Scan, &mut search_rng);
            let probe = proper_search_demo(SearchInstance::Needle(&inst), Strategy::RandomProbe, &mut search_rng);
            let out = run_trial(&cfg, &prepared, t, false);
            if let Some(e) = out.error {
                return Err(vgm_core::Error::Precondition(e));
            }
            Ok(NeedleRow {
                trial: t,
                seed,
                secret: inst.secret,
                scan_queries: scan.queries,
                probe_queries: probe.queries,
                vgm_queries: out.report.queries,
                vgm_budget: budget,
                vgm_output: out.report.output_kind,
                vgm_emit_zero: out.extras.get("emit_zero_exact").copied().unwrap_or(f64::NAN),
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct HiddenBoxRow {
    pub trial: usize,
    pub seed: u64,
    pub packing_size: usize,
    pub planted: usize,
    pub scan_queries: u64,
    pub probe_queries: u64,
    /// Exact invalidity of the planted box with one bit moved.
    pub swapped_inv: f64,
}

/// Per seed: a packing `Y` of size up to `packing_size`, a secret planted
/// uniformly from `Y`, and the probes a proper search spends to find it.
pub fn hidden_box_table(
    d: usize,
    trials: usize,
    packing_size: usize,
    max_attempts: usize,
    base_seed: u64,
) -> Result<Vec<HiddenBoxRow>> {
    (0..trials)
        .map(|t| {
            let seed = base_seed.wrapping_add(t as u64);
            let mut rng = stream_rng(seed, 0);
            let pk = gv_packing(d, packing_size, &mut rng, max_attempts)?;
            let planted = rand::Rng::random_range(&mut rng, 0..pk.len());
            let y = pk.codewords[planted];
            let inst = HiddenBoxInstance::with_secret(d, y)?;
            let mut search_rng = stream_rng(seed, 3);
            let candidates = &pk.codewords;
            let scan = proper_search_demo(
                SearchInstance::HiddenBox {
                    instance: &inst,
                    candidates,
                },
                Strategy::Scan,
                &mut search_rng,
            );
            let probe = proper_search_demo(
                SearchInstance::HiddenBox {
                    instance: &inst,
                    candidates,
                },
                Strategy::RandomProbe,
                &mut search_rng,
            );
            let j = (0..d).find(|j| y >> j & 1 == 0).expect("weight d/3 < d");
            let k = (0..d).find(|k| y >> k & 1 == 1).expect("weight d/3 > 0");
            let swapped = (y & !(1 << k)) | 1 << j;
            let swapped_inv = evaluate_box_candidate(&inst, swapped, &mut search_rng).inv;
            Ok(HiddenBoxRow {
                trial: t,
                seed,
                packing_size: pk.len(),
                planted,
                scan_queries: scan.queries,
                probe_queries: probe.queries,
                swapped_inv,
            })
        })
        .collect()
}

pub fn write_rows<T: Serialize, W: std::io::Write>(rows: &[T], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn needle_rows_are_consistent() {
        let rows = needle_table(200, 3, 9).unwrap();
        for r in &rows {
            assert_eq!(r.scan_queries, r.secret as u64);
            assert!(r.vgm_queries <= r.vgm_budget);
        }
    }

    #[test]
    fn hidden_box_rows() {
        let rows = hidden_box_table(18, 3, 8, 5_000, 1).unwrap();
        for r in &rows {
            assert_eq!(r.scan_queries, r.planted as u64 + 1);
            assert!(r.swapped_inv > 0.25);
        }
    }
}
