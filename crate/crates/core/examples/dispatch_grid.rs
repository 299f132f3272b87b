// Dispatch grid alignment and the order threads run in.

use inferplan::dispatch::{compute_grid, thread_order, WorkGroupConfig};
use inferplan::TensorShape;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let grid = compute_grid(TensorShape::hwc(10, 10, 6), WorkGroupConfig::new(4, 4, 4)?);
    println!(
        "output 10x10x6, work group 4x4x4 -> grid {}x{}x{}, {} threads, {} stubs",
        grid.x,
        grid.y,
        grid.z,
        grid.total_threads(),
        grid.stub_threads()
    );

    let small = compute_grid(TensorShape::hwc(2, 3, 1), WorkGroupConfig::new(2, 2, 1)?);
    for slot in thread_order(&small) {
        let c = slot.coord;
        let tag = if small.is_useful(c) { "" } else { " (stub)" };
        println!("group {} thread w={} h={} c={}{tag}", slot.group, c.w, c.h, c.c);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
