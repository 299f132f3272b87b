// Executes a graph under each memory plan and compares the outputs.

use std::collections::BTreeMap;

use inferplan::bench::{generate_random_dag, GraphGenerator};
use inferplan::executor::{run_graph_with, ExecOptions};
use inferplan::memplan::{plan, Strategy};
use inferplan::DenseTensor;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let g = generate_random_dag(&GraphGenerator { seed: 9, op_count: 12..=12, ..Default::default() });
    let inputs: BTreeMap<_, _> = g
        .inputs()
        .map(|t| {
            let data = (0..t.shape.element_count()).map(|i| ((i * 37) % 11) as f32 - 5.0).collect();
            DenseTensor::new(t.shape, data).map(|d| (t.id, d))
        })
        .collect::<Result<_, _>>()?;
    let options = ExecOptions { check_pads: true, check_liveness: true };

    let mut first: Option<BTreeMap<_, DenseTensor>> = None;
    for strategy in [Strategy::Naive, Strategy::Greedy, Strategy::MinCostFlow] {
        let p = plan(&g, strategy)?;
        let out = run_graph_with(&g, &p, &inputs, options)?;
        let same = first.as_ref().is_none_or(|f| f.iter().all(|(k, v)| v.bit_eq(&out[k])));
        println!("{strategy}: {} bytes of intermediates, outputs match naive: {same}", p.total_bytes);
        first.get_or_insert(out);
    }
    for (id, t) in first.unwrap_or_default() {
        println!("output {id}: shape {:?}, first values {:?}", t.shape, &t.data[..t.data.len().min(4)]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
