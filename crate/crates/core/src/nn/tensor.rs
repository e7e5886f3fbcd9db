//! Dense row-major tensor. Activations use [batch, channels, height, width]
//! or [batch, units]; parameters use whatever layout their layer documents.

use crate::error::{S2iError, S2iResult};
use crate::nn::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F> {
    dims: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(dims: &[usize]) -> Self {
        let n = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: vec![F::zero(); n],
        }
    }

    pub fn filled(dims: &[usize], value: F) -> Self {
        let n = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: vec![value; n],
        }
    }

    /// `data.len()` must equal the product of `dims`.
    pub fn from_vec(dims: &[usize], data: Vec<F>) -> S2iResult<Self> {
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(S2iError::shape(
                "Tensor::from_vec",
                format!("{} elements for dims {:?}", n, dims),
                format!("{} elements", data.len()),
            ));
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    /// Same storage, new dims; element count must match.
    pub fn reshape(&self, dims: &[usize]) -> S2iResult<Self> {
        let n: usize = dims.iter().product();
        if n != self.data.len() {
            return Err(S2iError::shape(
                "Tensor::reshape",
                format!("{} elements for dims {:?}", n, dims),
                format!("{} elements in {:?}", self.data.len(), self.dims),
            ));
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn fill(&mut self, value: F) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    /// Flat offset of [b, c, h, w] in a rank-4 tensor.
    #[inline]
    pub fn idx4(&self, b: usize, c: usize, h: usize, w: usize) -> usize {
        debug_assert_eq!(self.dims.len(), 4);
        ((b * self.dims[1] + c) * self.dims[2] + h) * self.dims[3] + w
    }

    #[inline]
    pub fn at4(&self, b: usize, c: usize, h: usize, w: usize) -> F {
        self.data[self.idx4(b, c, h, w)]
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// self += other, shapes must match.
    pub fn add_assign(&mut self, other: &Tensor<F>) {
        assert_eq!(self.dims, other.dims, "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a = *a + *b;
        }
    }

    pub fn max_abs(&self) -> F {
        self.data
            .iter()
            .fold(F::zero(), |m, &x| if x.abs() > m { x.abs() } else { m })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Lossy precision change; f32 -> f64 -> f32 round-trips exactly.
    pub fn cast<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&x| G::from_f64(x.to_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_wrong_length() {
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn idx4_is_row_major() {
        let t = Tensor::<f32>::zeros(&[2, 3, 4, 5]);
        assert_eq!(t.idx4(0, 0, 0, 0), 0);
        assert_eq!(t.idx4(0, 0, 0, 1), 1);
        assert_eq!(t.idx4(0, 0, 1, 0), 5);
        assert_eq!(t.idx4(0, 1, 0, 0), 20);
        assert_eq!(t.idx4(1, 0, 0, 0), 60);
        assert_eq!(t.idx4(1, 2, 3, 4), 119);
    }

    #[test]
    fn reshape_preserves_data() {
        let t = Tensor::<f64>::from_vec(&[2, 3], (0..6).map(|i| i as f64).collect()).unwrap();
        let r = t.reshape(&[3, 2]).unwrap();
        assert_eq!(r.data(), t.data());
        assert!(t.reshape(&[4, 2]).is_err());
    }

    #[test]
    fn cast_round_trips_f32() {
        let t = Tensor::<f32>::from_vec(&[3], vec![0.1, -2.5, 3.25]).unwrap();
        let back: Tensor<f32> = t.cast::<f64>().cast::<f32>();
        assert_eq!(back, t);
    }
}
