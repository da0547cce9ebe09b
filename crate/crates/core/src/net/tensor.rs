use crate::{Error, Result};

/// Dense `(channels, nx, ny, nz)` array, row-major in that axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Result<Tensor4> {
        let len: usize = shape.iter().product();
        if len == 0 {
            return Err(Error::invalid(format!("tensor shape {shape:?} has a zero axis")));
        }
        if data.len() != len {
            return Err(Error::invalid(format!("tensor shape {shape:?} needs {len} values, got {}", data.len())));
        }
        Ok(Tensor4 { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Result<Tensor4> {
        Tensor4::new(shape, vec![0.0; shape.iter().product()])
    }

    /// Single-channel cube from an x-major grid.
    pub fn from_grid(edge: usize, probs: &[f32]) -> Result<Tensor4> {
        Tensor4::new([1, edge, edge, edge], probs.iter().map(|&p| p as f64).collect())
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn index(&self, c: usize, x: usize, y: usize, z: usize) -> usize {
        let [_, nx, ny, nz] = self.shape;
        ((c * nx + x) * ny + y) * nz + z
    }

    pub fn get(&self, c: usize, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.index(c, x, y, z)]
    }
}
