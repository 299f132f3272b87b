//! PHWC4 tensor layout.
//!
//! A `[H, W, C]` tensor is split into `ceil(C/4)` slices of shape `(H, W, 4)`
//! stored one after another, so the flat buffer reads as a 2D array with
//! `H * ceil(C/4)` rows of `4 * W` floats. Channels past `C` in the last
//! slice are zero. Batches are stored as consecutive per-batch blocks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::TensorShape;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("coordinate (b={b}, h={h}, w={w}, c={c}) outside shape {shape}")]
    OutOfRange { shape: TensorShape, b: usize, h: usize, w: usize, c: usize },
    #[error("shape {0} has a zero dimension")]
    InvalidShape(TensorShape),
    #[error("buffer for shape {shape} needs {expected} values, got {actual}")]
    Length { shape: TensorShape, expected: usize, actual: usize },
    #[error("corrupt buffer: padding lane at offset {offset} holds {value}")]
    CorruptPadding { offset: usize, value: f32 },
}

/// Row-major `[B, H, W, C]` tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    pub shape: TensorShape,
    pub data: Vec<f32>,
}

impl DenseTensor {
    pub fn new(shape: TensorShape, data: Vec<f32>) -> Result<Self, LayoutError> {
        if !shape.is_valid() {
            return Err(LayoutError::InvalidShape(shape));
        }
        if data.len() != shape.element_count() {
            return Err(LayoutError::Length { shape, expected: shape.element_count(), actual: data.len() });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: TensorShape) -> Self {
        Self { shape, data: vec![0.0; shape.element_count()] }
    }

    pub fn index(&self, b: usize, h: usize, w: usize, c: usize) -> usize {
        let s = self.shape;
        ((b * s.h + h) * s.w + w) * s.c + c
    }

    pub fn get(&self, b: usize, h: usize, w: usize, c: usize) -> f32 {
        self.data[self.index(b, h, w, c)]
    }

    /// Bitwise equality, so `-0.0 != 0.0` and identical NaNs compare equal.
    pub fn bit_eq(&self, other: &DenseTensor) -> bool {
        self.shape == other.shape
            && self.data.len() == other.data.len()
            && self.data.iter().zip(&other.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Flat PHWC4 storage for a logical tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Phwc4Buffer {
    shape: TensorShape,
    data: Vec<f32>,
}

/// Number of `f32` values in the PHWC4 buffer of `shape`:
/// `b * ceil(c/4) * h * w * 4`.
pub fn phwc4_len(shape: TensorShape) -> usize {
    shape.b * shape.slices() * shape.h * shape.w * 4
}

/// `(rows, cols)` of the 2D view: `b * h * ceil(c/4)` rows of `4 * w` values.
pub fn phwc4_dims(shape: TensorShape) -> (usize, usize) {
    (shape.b * shape.h * shape.slices(), 4 * shape.w)
}

/// Flat offset of `(h, w, c)` in batch 0.
pub fn phwc4_index(shape: TensorShape, h: usize, w: usize, c: usize) -> Result<usize, LayoutError> {
    phwc4_index_batched(shape, 0, h, w, c)
}

pub fn phwc4_index_batched(shape: TensorShape, b: usize, h: usize, w: usize, c: usize) -> Result<usize, LayoutError> {
    if b >= shape.b || h >= shape.h || w >= shape.w || c >= shape.c {
        return Err(LayoutError::OutOfRange { shape, b, h, w, c });
    }
    Ok(unchecked_index(shape, b, h, w, c))
}

#[inline]
fn unchecked_index(shape: TensorShape, b: usize, h: usize, w: usize, c: usize) -> usize {
    let slice = b * shape.slices() + c / 4;
    ((slice * shape.h + h) * shape.w + w) * 4 + c % 4
}

pub fn phwc4_pack(t: &DenseTensor) -> Phwc4Buffer {
    let s = t.shape;
    let mut data = vec![0.0; phwc4_len(s)];
    // Dense order walks (b, h, w, c); each value lands at its slice lane.
    let mut src = t.data.iter();
    for b in 0..s.b {
        for h in 0..s.h {
            for w in 0..s.w {
                for c in 0..s.c {
                    data[unchecked_index(s, b, h, w, c)] = *src.next().expect("length checked");
                }
            }
        }
    }
    Phwc4Buffer { shape: s, data }
}

pub fn phwc4_unpack(buf: &Phwc4Buffer) -> Result<DenseTensor, LayoutError> {
    buf.check_padding()?;
    let s = buf.shape;
    let mut data = Vec::with_capacity(s.element_count());
    for b in 0..s.b {
        for h in 0..s.h {
            for w in 0..s.w {
                for c in 0..s.c {
                    data.push(buf.data[unchecked_index(s, b, h, w, c)]);
                }
            }
        }
    }
    Ok(DenseTensor { shape: s, data })
}

impl Phwc4Buffer {
    /// Wraps raw PHWC4 data after checking its length.
    pub fn from_raw(shape: TensorShape, data: Vec<f32>) -> Result<Self, LayoutError> {
        if !shape.is_valid() {
            return Err(LayoutError::InvalidShape(shape));
        }
        let expected = phwc4_len(shape);
        if data.len() != expected {
            return Err(LayoutError::Length { shape, expected, actual: data.len() });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: TensorShape) -> Self {
        Self { shape, data: vec![0.0; phwc4_len(shape)] }
    }

    pub fn shape(&self) -> TensorShape {
        self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn view(&self) -> Phwc4View<'_> {
        Phwc4View { shape: self.shape, data: &self.data }
    }

    pub fn slices(&self) -> usize {
        self.shape.slices()
    }

    pub fn rows(&self) -> usize {
        phwc4_dims(self.shape).0
    }

    pub fn cols(&self) -> usize {
        phwc4_dims(self.shape).1
    }

    #[inline]
    pub fn get(&self, b: usize, h: usize, w: usize, c: usize) -> f32 {
        self.data[unchecked_index(self.shape, b, h, w, c)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, h: usize, w: usize, c: usize, v: f32) {
        let i = unchecked_index(self.shape, b, h, w, c);
        self.data[i] = v;
    }

    /// Fails on the first padding lane that is not exactly `+0.0`.
    pub fn check_padding(&self) -> Result<(), LayoutError> {
        self.view().check_padding()
    }
}

/// Borrowed PHWC4 data, e.g. a tensor living inside a shared arena object.
#[derive(Debug, Clone, Copy)]
pub struct Phwc4View<'a> {
    pub shape: TensorShape,
    pub data: &'a [f32],
}

impl<'a> Phwc4View<'a> {
    pub fn new(shape: TensorShape, data: &'a [f32]) -> Result<Self, LayoutError> {
        let expected = phwc4_len(shape);
        if data.len() < expected {
            return Err(LayoutError::Length { shape, expected, actual: data.len() });
        }
        Ok(Self { shape, data: &data[..expected] })
    }

    #[inline]
    pub fn get(&self, b: usize, h: usize, w: usize, c: usize) -> f32 {
        self.data[unchecked_index(self.shape, b, h, w, c)]
    }

    pub fn check_padding(&self) -> Result<(), LayoutError> {
        let s = self.shape;
        let used = s.c % 4;
        if used == 0 {
            return Ok(());
        }
        let last = s.slices() - 1;
        for b in 0..s.b {
            let slice = b * s.slices() + last;
            let base = slice * s.h * s.w * 4;
            for cell in 0..s.h * s.w {
                for lane in used..4 {
                    let offset = base + cell * 4 + lane;
                    let value = self.data[offset];
                    if value.to_bits() != 0 {
                        return Err(LayoutError::CorruptPadding { offset, value });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_owned(&self) -> Phwc4Buffer {
        Phwc4Buffer { shape: self.shape, data: self.data.to_vec() }
    }
}
