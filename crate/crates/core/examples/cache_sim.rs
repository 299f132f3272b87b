// First-load cache behaviour of a 1x1 convolution under PHWC4 and HWC.

use inferplan::dispatch::{
    compute_grid, simulate_cache, thread_order, CacheModel, ConvConfig, LruCache, MemoryAccess, TensorLayout,
    WorkGroupConfig,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = CacheModel::default();
    let mut cache = LruCache::new(model)?;
    cache.replay((0..4).map(|i| MemoryAccess { address: 16 * i, bytes: 16 }));
    println!("four neighbouring 16-byte loads: {:?}", cache.report());

    for c in [3, 4, 8] {
        let conv = ConvConfig::pointwise(8, 8, c, c);
        let grid = compute_grid(conv.out_shape, WorkGroupConfig::new(4, 4, 4)?);
        for layout in [TensorLayout::Phwc4, TensorLayout::Hwc] {
            let r = simulate_cache(layout, &conv, &model, thread_order(&grid))?;
            println!("8x8x{c} {layout:?}: {} misses, {} hits, miss rate {:.3}", r.misses, r.hits, r.miss_rate);
        }
    }

    let tight = CacheModel { capacity_lines: Some(2), ..model };
    let conv = ConvConfig::pointwise(16, 16, 8, 8);
    let grid = compute_grid(conv.out_shape, WorkGroupConfig::new(8, 2, 1)?);
    let r = simulate_cache(TensorLayout::Phwc4, &conv, &tight, thread_order(&grid))?;
    println!("two-line cache, 16x16x8: miss rate {:.3}, {} bytes fetched", r.miss_rate, r.bytes_fetched);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
