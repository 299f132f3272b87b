// Packs an HWC tensor into PHWC4 and prints the 2D view.

use inferplan::layout::{phwc4_index, phwc4_pack, phwc4_unpack};
use inferplan::{DenseTensor, TensorShape};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let shape = TensorShape::hwc(8, 6, 12);
    let data = (0..shape.element_count()).map(|i| i as f32).collect();
    let dense = DenseTensor::new(shape, data)?;
    let packed = phwc4_pack(&dense);
    println!("shape {:?}: {} slices, view {} rows x {} cols", shape, packed.slices(), packed.rows(), packed.cols());
    println!("element (h=2, w=3, c=5) lives at offset {}", phwc4_index(shape, 2, 3, 5)?);

    // C = 5 leaves three zero lanes in the second slice.
    let odd = DenseTensor::new(TensorShape::hwc(1, 2, 5), (1..=10).map(|v| v as f32).collect())?;
    let buf = phwc4_pack(&odd);
    println!("1x2x5 packed: {:?}", buf.data());
    buf.check_padding()?;
    assert!(phwc4_unpack(&buf)?.bit_eq(&odd));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
