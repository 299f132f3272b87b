// Runs the rewrite pipeline on a random graph and replays its log.

use inferplan::bench::{generate_random_dag, GraphGenerator};
use inferplan::passes::{optimize, parse_pass_list};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let g = generate_random_dag(&GraphGenerator { seed: 5, op_count: 16..=16, ..Default::default() });
    let passes = parse_pass_list("identity,pad,fuse")?;
    let (opt, log) = optimize(&g, &passes);
    println!("{} ops before, {} after", g.ops().len(), opt.ops().len());
    for e in &log.entries {
        println!("{}: removed {:?}, folded into {:?}", e.pass_name, e.removed_op_ids, e.fused_into_op_id);
    }
    assert_eq!(log.replay(&g)?, opt);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
