//! Complex tensor stored as two parallel real tensors (planar layout).

use crate::error::{Error, Result};

use super::tensor::{Shape, Tensor};

/// A complex tensor `h = x + iy` kept as separate real and imaginary parts.
/// Both parts always have identical shape; values are immutable once built.
#[derive(Clone, Debug)]
pub struct ComplexTensor {
    re: Tensor,
    im: Tensor,
}

/// How two shapes line up for elementwise arithmetic: exact match, scalar
/// against anything, or a leading batch dimension of 1 against N.
enum Broadcast {
    Exact,
    ScalarLeft,
    ScalarRight,
    LeadLeft(usize),
    LeadRight(usize),
}

fn broadcast_plan(op: &'static str, a: &Shape, b: &Shape) -> Result<Broadcast> {
    if a == b {
        return Ok(Broadcast::Exact);
    }
    if a.numel() == 1 {
        return Ok(Broadcast::ScalarLeft);
    }
    if b.numel() == 1 {
        return Ok(Broadcast::ScalarRight);
    }
    if a.rank() == b.rank() && a.rank() >= 1 && a.dims()[1..] == b.dims()[1..] {
        if a.dims()[0] == 1 {
            return Ok(Broadcast::LeadLeft(b.dims()[0]));
        }
        if b.dims()[0] == 1 {
            return Ok(Broadcast::LeadRight(a.dims()[0]));
        }
    }
    Err(Error::shape(op, format!("{a} vs {b} not broadcastable")))
}

/// Apply `f` elementwise under the broadcast plan, returning the full-size result.
fn bc_zip(op: &'static str, a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<Tensor> {
    match broadcast_plan(op, a.shape(), b.shape())? {
        Broadcast::Exact => a.zip_map(b, f),
        Broadcast::ScalarLeft => {
            let s = a.data()[0];
            Ok(b.map(|x| f(s, x)))
        }
        Broadcast::ScalarRight => {
            let s = b.data()[0];
            Ok(a.map(|x| f(x, s)))
        }
        Broadcast::LeadLeft(n) => {
            let block = a.numel();
            let mut out = Vec::with_capacity(n * block);
            for chunk in b.data().chunks_exact(block) {
                out.extend(a.data().iter().zip(chunk).map(|(&x, &y)| f(x, y)));
            }
            Tensor::from_vec(b.dims().to_vec(), out)
        }
        Broadcast::LeadRight(n) => {
            let block = b.numel();
            let mut out = Vec::with_capacity(n * block);
            for chunk in a.data().chunks_exact(block) {
                out.extend(chunk.iter().zip(b.data()).map(|(&x, &y)| f(x, y)));
            }
            Tensor::from_vec(a.dims().to_vec(), out)
        }
    }
}

impl ComplexTensor {
    /// Build from explicit parts; the shapes must match exactly.
    pub fn new(re: Tensor, im: Tensor) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::shape(
                "ComplexTensor::new",
                format!("real {} vs imag {}", re.shape(), im.shape()),
            ));
        }
        Ok(ComplexTensor { re, im })
    }

    /// Embed a real tensor with zero imaginary part.
    pub fn from_real(re: Tensor) -> Self {
        let im = Tensor::zeros(re.dims().to_vec());
        ComplexTensor { re, im }
    }

    pub fn zeros(dims: impl Into<Vec<usize>> + Clone) -> Self {
        ComplexTensor { re: Tensor::zeros(dims.clone()), im: Tensor::zeros(dims) }
    }

    pub fn re(&self) -> &Tensor {
        &self.re
    }

    pub fn im(&self) -> &Tensor {
        &self.im
    }

    pub fn into_parts(self) -> (Tensor, Tensor) {
        (self.re, self.im)
    }

    pub fn shape(&self) -> &Shape {
        self.re.shape()
    }

    pub fn dims(&self) -> &[usize] {
        self.re.dims()
    }

    pub fn numel(&self) -> usize {
        self.re.numel()
    }

    pub fn is_all_finite(&self) -> bool {
        self.re.is_all_finite() && self.im.is_all_finite()
    }

    /// Elementwise complex sum. Broadcasting: exact shapes, scalar against
    /// anything, or a leading batch dim of 1.
    pub fn cadd(&self, other: &ComplexTensor) -> Result<ComplexTensor> {
        Ok(ComplexTensor {
            re: bc_zip("cadd", &self.re, &other.re, |a, b| a + b)?,
            im: bc_zip("cadd", &self.im, &other.im, |a, b| a + b)?,
        })
    }

    pub fn csub(&self, other: &ComplexTensor) -> Result<ComplexTensor> {
        Ok(ComplexTensor {
            re: bc_zip("csub", &self.re, &other.re, |a, b| a - b)?,
            im: bc_zip("csub", &self.im, &other.im, |a, b| a - b)?,
        })
    }

    /// Elementwise complex product `(a_r b_r - a_i b_i) + i(a_r b_i + a_i b_r)`.
    pub fn cmul(&self, other: &ComplexTensor) -> Result<ComplexTensor> {
        let rr = bc_zip("cmul", &self.re, &other.re, |a, b| a * b)?;
        let ii = bc_zip("cmul", &self.im, &other.im, |a, b| a * b)?;
        let ri = bc_zip("cmul", &self.re, &other.im, |a, b| a * b)?;
        let ir = bc_zip("cmul", &self.im, &other.re, |a, b| a * b)?;
        Ok(ComplexTensor { re: rr.sub(&ii)?, im: ri.add(&ir)? })
    }

    /// Elementwise modulus `sqrt(re^2 + im^2)` as a real tensor.
    pub fn modulus(&self) -> Tensor {
        self.re
            .zip_map(&self.im, |r, i| (r * r + i * i).sqrt())
            .expect("parts always share a shape")
    }

    pub fn reshape(&self, dims: impl Into<Vec<usize>> + Clone) -> Result<ComplexTensor> {
        Ok(ComplexTensor { re: self.re.reshape(dims.clone())?, im: self.im.reshape(dims)? })
    }

    pub fn transpose(&self, perm: &[usize]) -> Result<ComplexTensor> {
        Ok(ComplexTensor { re: self.re.transpose(perm)?, im: self.im.transpose(perm)? })
    }

    pub fn slice(&self, axis: usize, start: usize, end: usize) -> Result<ComplexTensor> {
        Ok(ComplexTensor {
            re: self.re.slice(axis, start, end)?,
            im: self.im.slice(axis, start, end)?,
        })
    }

    pub fn concat(parts: &[&ComplexTensor], axis: usize) -> Result<ComplexTensor> {
        let res: Vec<&Tensor> = parts.iter().map(|p| &p.re).collect();
        let ims: Vec<&Tensor> = parts.iter().map(|p| &p.im).collect();
        Ok(ComplexTensor { re: Tensor::concat(&res, axis)?, im: Tensor::concat(&ims, axis)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c1(re: f64, im: f64) -> ComplexTensor {
        ComplexTensor::new(Tensor::scalar(re), Tensor::scalar(im)).unwrap()
    }

    #[test]
    fn constructor_echo_and_mismatch() {
        let t = ComplexTensor::new(
            Tensor::from_vec(vec![2], vec![1.0, 2.0]).unwrap(),
            Tensor::from_vec(vec![2], vec![3.0, 4.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(t.re().data(), &[1.0, 2.0]);
        assert_eq!(t.im().data(), &[3.0, 4.0]);

        let z = ComplexTensor::from_real(Tensor::from_vec(vec![1], vec![5.0]).unwrap());
        assert_eq!(z.re().data(), &[5.0]);
        assert_eq!(z.im().data(), &[0.0]);

        assert!(ComplexTensor::new(Tensor::zeros(vec![2, 3]), Tensor::zeros(vec![3, 2])).is_err());
    }

    #[test]
    fn i_times_i_is_minus_one() {
        let i = c1(0.0, 1.0);
        let p = i.cmul(&i).unwrap();
        assert_eq!(p.re().data()[0], -1.0);
        assert_eq!(p.im().data()[0], 0.0);
    }

    #[test]
    fn cadd_and_cmul_hand_values() {
        let s = c1(1.0, 2.0).cadd(&c1(3.0, -2.0)).unwrap();
        assert_eq!((s.re().data()[0], s.im().data()[0]), (4.0, 0.0));

        // (2+3i)(4-1i) = (8+3) + i(12-2) = 11 + 10i
        let p = c1(2.0, 3.0).cmul(&c1(4.0, -1.0)).unwrap();
        assert_eq!((p.re().data()[0], p.im().data()[0]), (11.0, 10.0));
    }

    #[test]
    fn modulus_values() {
        assert_eq!(c1(3.0, 4.0).modulus().data()[0], 5.0);
        assert_eq!(c1(0.0, 0.0).modulus().data()[0], 0.0);
        assert!((c1(1.0, 1.0).modulus().data()[0] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cmul_identity_is_exact() {
        let a = ComplexTensor::new(
            Tensor::from_vec(vec![3], vec![0.25, -1.5, 7.0]).unwrap(),
            Tensor::from_vec(vec![3], vec![2.0, 0.125, -3.0]).unwrap(),
        )
        .unwrap();
        let one = ComplexTensor::from_real(Tensor::scalar(1.0));
        let p = a.cmul(&one).unwrap();
        assert_eq!(p.re().data(), a.re().data());
        assert_eq!(p.im().data(), a.im().data());
    }

    #[test]
    fn leading_batch_broadcast() {
        let a = ComplexTensor::new(
            Tensor::from_vec(vec![1, 2], vec![1.0, 2.0]).unwrap(),
            Tensor::zeros(vec![1, 2]),
        )
        .unwrap();
        let b = ComplexTensor::new(
            Tensor::from_vec(vec![3, 2], vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0]).unwrap(),
            Tensor::zeros(vec![3, 2]),
        )
        .unwrap();
        let s = a.cadd(&b).unwrap();
        assert_eq!(s.dims(), &[3, 2]);
        assert_eq!(s.re().data(), &[1.0, 2.0, 2.0, 3.0, 3.0, 4.0]);
        // Non-broadcastable interior dim.
        let c = ComplexTensor::zeros(vec![3, 4]);
        assert!(b.cadd(&c).is_err());
    }
}
