// Planner comparison on the MobileNet-like model and a few random graphs.

use inferplan::bench::{run_suite, Suite};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mib = |b: usize| b as f64 / (1024.0 * 1024.0);
    let mobile = run_suite(Suite::Mobilenet, 0..1)?;
    for row in &mobile.rows {
        let t = row.totals;
        println!(
            "{}: naive {:.2} MiB, greedy {:.2} MiB, mcfp {:.2} MiB, lower bound {:.2} MiB",
            row.graph_id,
            mib(t.naive),
            mib(t.greedy),
            mib(t.mcfp),
            mib(t.lower_bound)
        );
    }
    let random = run_suite(Suite::Random, 0..8)?;
    for row in &random.rows {
        let t = row.totals;
        println!("{}: naive {}, greedy {}, mcfp {}, winner {:?}", row.graph_id, t.naive, t.greedy, t.mcfp, t.winner);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
