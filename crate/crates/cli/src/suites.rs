//! Checks behind each subcommand, each producing a [`VerifyReport`].

use serde::Serialize;

use ltm_core::certifier::lemmas::{
    construct_gamma2, verify_growth, verify_lemma1, verify_lemma3, verify_pipeline, PipelineResult,
};
use ltm_core::certifier::periodic::{g_closed_form, periodic_point_with, PeriodicData};
use ltm_core::certifier::thresholds::{solve_all, ThresholdSolution};
use ltm_core::diagnostics::lyapunov::{lyapunov_ensemble, LyapunovEstimate};
use ltm_core::partition::{validate_partition, PartitionReport};
use ltm_core::{Params, Partition, Result, Tracer, VerifyReport};

/// Lemma 1 indices checked by `verify --lemma 1`.
pub const LEMMA1_KS: [u32; 4] = [4, 5, 6, 8];
/// Largest composite power checked by the pipeline.
pub const PIPELINE_MAX_M: u64 = 20;
pub const LYAPUNOV_RESTARTS: u32 = 8;
pub const LYAPUNOV_MIN: f64 = 0.05;
/// Largest spread across restarts, relative to the mean.
pub const LYAPUNOV_SPREAD: f64 = 0.2;
pub const PARTITION_AGREEMENT: f64 = 0.9999;

pub fn thresholds(alpha: f64, seed: u64) -> Result<(Vec<ThresholdSolution>, VerifyReport)> {
    let sols = solve_all()?;
    let mut rep = VerifyReport::new("thresholds", alpha, seed);
    for s in &sols {
        let (stated, tol) = s.id.stated();
        rep.add_threshold(s);
        rep.check(s.residual < 1e-12, format!("{}: residual {:e}", s.id, s.residual));
        rep.check(
            (s.value - stated).abs() <= tol,
            format!("{}: {} differs from {stated} by more than {tol}", s.id, s.value),
        );
    }
    Ok((sols, rep))
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionSummary {
    pub side: String,
    pub k_max: u32,
    pub cells: usize,
    pub covered_area: f64,
    pub tail_area: f64,
    pub validation: PartitionReport,
}

pub fn partition_check(part: &Partition, samples: u64, seed: u64, params: &Params) -> (PartitionSummary, VerifyReport) {
    let v = validate_partition(part, samples, seed, params);
    let name = format!("partition_{}", format!("{:?}", part.side).to_lowercase());
    let mut rep = VerifyReport::new(&name, params.alpha, seed);
    rep.check(
        v.disagreed == 0,
        format!("{} disagreements, first {:?}", v.disagreed, v.worst),
    );
    rep.check(
        v.tail_mismatch == 0,
        format!("{} tail points return within k_max", v.tail_mismatch),
    );
    rep.check(
        v.agreement() >= PARTITION_AGREEMENT,
        format!("agreement {} below {PARTITION_AGREEMENT}", v.agreement()),
    );
    rep.add_metric("agreement", v.agreement());
    rep.add_metric("boundary_flagged", v.boundary_flagged as f64);
    rep.add_metric("tail_flagged", v.tail_flagged as f64);
    rep.add_metric("tail_area", part.tail_area());
    let summary = PartitionSummary {
        side: format!("{:?}", part.side),
        k_max: part.k_max,
        cells: part.cells.len(),
        covered_area: part.covered_area(),
        tail_area: part.tail_area(),
        validation: v,
    };
    (summary, rep)
}

pub fn periodic_check(tracer: &Tracer, seed: u64) -> Result<(PeriodicData, VerifyReport)> {
    let params = &tracer.params;
    let pd = periodic_point_with(params, &tracer.part_f, &tracer.part_g)?;
    let mut rep = VerifyReport::new("periodic", params.alpha, seed);
    let (gp, gm) = g_closed_form(params);
    rep.check(
        pd.closure_residual < 1e-12,
        format!("H^4(z_p) misses z_p by {:e}", pd.closure_residual),
    );
    rep.check(
        (pd.dh4.det() - 1.0).abs() < 1e-10,
        format!("det DH^4 = {}", pd.dh4.det()),
    );
    rep.check(
        (pd.g_plus - gp).abs() < 1e-9,
        format!("g+ = {} against {gp}", pd.g_plus),
    );
    rep.check(
        (pd.g_minus - gm).abs() < 1e-9,
        format!("g- = {} against {gm}", pd.g_minus),
    );
    rep.add_metric("lambda_plus", pd.lambda_plus);
    rep.add_metric("closure_residual", pd.closure_residual);
    Ok((pd, rep))
}

pub fn lemma1(tracer: &Tracer, samples: u64, seed: u64) -> Result<VerifyReport> {
    let mut rep = VerifyReport::new("lemma1", tracer.params.alpha, seed);
    for k in LEMMA1_KS {
        for conjugate in [false, true] {
            let r = verify_lemma1(k, samples, seed, tracer, conjugate)?;
            let tag = if conjugate { "conjugate" } else { "direct" };
            rep.add_metric(&format!("k{k}_{tag}_passes"), r.passes as f64);
            rep = rep.merge(r);
        }
    }
    Ok(rep)
}

pub fn lemma3(tracer: &Tracer, samples: u64, seed: u64, budget: u32) -> Result<VerifyReport> {
    verify_lemma3(samples, seed, tracer, budget)
}

pub fn growth(tracer: &Tracer, samples: u64, seed: u64, budget: u32) -> VerifyReport {
    verify_growth(samples, seed, tracer, budget)
}

pub fn pipeline(tracer: &Tracer, seed: u64) -> Result<PipelineResult> {
    let gamma2 = construct_gamma2(tracer, 0.5 * tracer.params.inv_alpha)?;
    let mut r = verify_pipeline(&gamma2, tracer, PIPELINE_MAX_M)?;
    r.report.seed = seed;
    Ok(r)
}

pub fn lyapunov(params: &Params, iters: u64, restarts: u32, seed: u64) -> Result<(LyapunovEstimate, VerifyReport)> {
    let est = lyapunov_ensemble(restarts, iters, seed, params)?;
    let mut rep = VerifyReport::new("lyapunov", params.alpha, seed);
    rep.check(
        est.lambda > LYAPUNOV_MIN,
        format!("lambda {} not above {LYAPUNOV_MIN}", est.lambda),
    );
    rep.check(
        est.spread < LYAPUNOV_SPREAD * est.lambda,
        format!("spread {} exceeds {LYAPUNOV_SPREAD} of the mean", est.spread),
    );
    rep.add_metric("lambda", est.lambda);
    rep.add_metric("ci_halfwidth", est.ci_halfwidth);
    rep.add_metric("spread", est.spread);
    rep.add_metric("per_return_to_s", est.per_return_to_s(params));
    Ok((est, rep))
}
