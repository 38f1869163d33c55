use grassres::blowup::{run_pipeline, PipelineConfig};
use grassres::indexing::PluckerIndex;
use std::time::Instant;

fn main() {
    let blocks: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let m = PluckerIndex::new(&[1, 2, 3]);
    let cfg = PipelineConfig { blocks: Some(blocks), ..PipelineConfig::default() };
    let t = Instant::now();
    let atlas = run_pipeline(3, 6, &m, cfg).unwrap();
    println!(
        "blocks={} time={:?} frontier={} pruned={} dropped={}",
        blocks,
        t.elapsed(),
        atlas.frontier.len(),
        atlas.pruned.len(),
        atlas.dropped.len()
    );
    for s in &atlas.stats {
        println!("stats {:?}", s);
    }
}
