// Naive, greedy, min-cost-flow and exhaustive plans for a small chain.

use inferplan::bench::sized_chain;
use inferplan::graph::{liveness, peak_live_bytes};
use inferplan::memplan::{build_flow_network, plan, solve_mcfp, verify_plan, Strategy};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let g = sized_chain(&[10, 20, 15]);
    for iv in liveness(&g) {
        println!(
            "tensor {} live over [{}, {}], {} bytes",
            iv.tensor_id,
            iv.first_use,
            iv.last_use,
            g.tensor_size(iv.tensor_id)
        );
    }
    println!("peak live bytes {}", peak_live_bytes(&g));

    for strategy in [Strategy::Naive, Strategy::Greedy, Strategy::MinCostFlow, Strategy::BruteForce] {
        let p = plan(&g, strategy)?;
        assert!(verify_plan(&g, &p).is_empty());
        let objects: Vec<_> = p.objects.iter().map(|o| (o.size, o.tensors.clone())).collect();
        println!("{strategy:>11}: total {:>2} bytes, objects {objects:?}", p.total_bytes);
    }

    let solved = solve_mcfp(&build_flow_network(&g))?;
    println!("flow {} at cost {}, reuse pairs {:?}", solved.total_flow(), solved.total_cost(), solved.reuse_pairs());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
