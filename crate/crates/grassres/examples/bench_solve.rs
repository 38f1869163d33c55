use grassres::blowup::{run_pipeline, PipelineConfig};
use grassres::indexing::PluckerIndex;
use grassres::polyengine::{FpSystem, Variable};
use std::time::Instant;

fn main() {
    let m = PluckerIndex::new(&[1, 2, 3]);
    let cfg = PipelineConfig { blocks: Some(2), ..PipelineConfig::default() };
    let atlas = run_pipeline(3, 6, &m, cfg).unwrap();
    let charts: Vec<_> = atlas.frontier_charts().collect();
    println!("frontier {}", charts.len());
    let c = charts[charts.len() / 2];
    println!(
        "chart {}: vars={} mains={} residuals={} quotients={} linears={} l_defs={}",
        c.id,
        c.vars.len(),
        c.mains.len(),
        c.residuals.len(),
        c.quotients.len(),
        c.linears.len(),
        c.l_defs.len()
    );
    let polys = c.defining_polys();
    println!("defining polys: {}", polys.len());
    let coords = c.coordinates();
    let units = c.units();
    let pins: Vec<Variable> = c.vars.iter().take(2).cloned().collect();

    let t = Instant::now();
    for _ in 0..100 {
        let _ = c.defining_polys();
    }
    println!("defining_polys x100: {:?}", t.elapsed());

    let t = Instant::now();
    for _ in 0..100 {
        let _ = FpSystem::new(&polys, &coords, 5, &pins, &units).unwrap();
    }
    println!("FpSystem::new x100: {:?}", t.elapsed());

    let sys = FpSystem::new(&polys, &coords, 5, &pins, &units).unwrap();
    let t = Instant::now();
    let mut n = 0;
    for _ in 0..100 {
        n += sys.has_solution() as usize;
    }
    println!("has_solution x100: {:?} ({} live)", t.elapsed(), n);

    // The full query as the pipeline issues it.
    let t = Instant::now();
    for _ in 0..100 {
        let _ = c.solutions_exist(5, &pins).unwrap();
    }
    println!("solutions_exist x100: {:?}", t.elapsed());
}
