//! End-to-end checks of the blowup pipeline: symbolic elimination of the
//! residual binomials at every leading-stage chart, and termination with
//! finite statistics on the mid-size Grassmannian charts.

mod common;

use common::{check_lead_stage_elimination, check_termination, idx};
use grassres::blowup::{run_pipeline, PipelineConfig};

#[test]
fn residual_elimination_on_lead_stage_charts_of_gr25() {
    check_lead_stage_elimination(2, 5, &idx(&[1, 2]));
}

#[test]
fn residual_elimination_on_lead_stage_charts_of_gr36() {
    check_lead_stage_elimination(3, 6, &idx(&[1, 2, 3]));
}

#[test]
fn pipeline_terminates_on_gr25() {
    let atlas = run_pipeline(2, 5, &idx(&[1, 2]), PipelineConfig::default()).unwrap();
    assert_eq!(atlas.processed_blocks, 3);
    assert_eq!(atlas.stats.len(), atlas.system.family.iter().map(|f| f.t_f).sum::<usize>());
    check_termination(&atlas);
}

#[test]
fn pipeline_terminates_on_first_blocks_of_gr36() {
    let cfg = PipelineConfig { blocks: Some(3), ..PipelineConfig::default() };
    let atlas = run_pipeline(3, 6, &idx(&[1, 2, 3]), cfg).unwrap();
    assert_eq!(atlas.processed_blocks, 3);
    check_termination(&atlas);
    // Residual binomials of the unprocessed blocks are retained.
    for chart in atlas.frontier_charts() {
        assert!(chart.residuals.iter().all(|b| b.block.unwrap() > 3));
        assert!(!chart.residuals.is_empty());
    }
}
