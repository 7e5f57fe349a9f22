//! Named trainable state: parameter values, accumulated gradients, and
//! optimizer moments, addressed by stable string paths like
//! `feature.block1.conv1.A`.

use indexmap::IndexMap;

use crate::ctensor::{ComplexTensor, Tensor};
use crate::error::{Error, Result};

use super::tape::{CVar, Part, Tape, Var};

/// A real or complex tensor value.
#[derive(Clone, Debug)]
pub enum Value {
    Real(Tensor),
    Complex(ComplexTensor),
}

impl Value {
    pub fn zeros_like(&self) -> Value {
        match self {
            Value::Real(t) => Value::Real(Tensor::zeros(t.dims().to_vec())),
            Value::Complex(t) => Value::Complex(ComplexTensor::zeros(t.dims().to_vec())),
        }
    }

    pub fn dims(&self) -> &[usize] {
        match self {
            Value::Real(t) => t.dims(),
            Value::Complex(t) => t.dims(),
        }
    }

    pub fn numel(&self) -> usize {
        match self {
            Value::Real(t) => t.numel(),
            Value::Complex(t) => 2 * t.numel(),
        }
    }

    pub fn as_real(&self) -> Result<&Tensor> {
        match self {
            Value::Real(t) => Ok(t),
            Value::Complex(_) => Err(Error::contract("Value::as_real", "value is complex")),
        }
    }

    pub fn as_complex(&self) -> Result<&ComplexTensor> {
        match self {
            Value::Complex(t) => Ok(t),
            Value::Real(_) => Err(Error::contract("Value::as_complex", "value is real")),
        }
    }

    pub fn is_all_finite(&self) -> bool {
        match self {
            Value::Real(t) => t.is_all_finite(),
            Value::Complex(t) => t.is_all_finite(),
        }
    }
}

/// A named tensor with gradient and Adam moment buffers.
#[derive(Clone, Debug)]
pub struct Parameter {
    pub name: String,
    pub value: Value,
    pub grad: Value,
    pub moment1: Value,
    pub moment2: Value,
    pub trainable: bool,
}

impl Parameter {
    fn new(name: String, value: Value, trainable: bool) -> Parameter {
        let grad = value.zeros_like();
        let moment1 = value.zeros_like();
        let moment2 = value.zeros_like();
        Parameter { name, value, grad, moment1, moment2, trainable }
    }

    pub fn zero_grad(&mut self) {
        self.grad = self.value.zeros_like();
    }
}

/// Insertion-ordered collection of parameters; the order is the construction
/// order of the model and is stable across save/load.
#[derive(Default)]
pub struct ParamStore {
    params: IndexMap<String, Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn register_real(&mut self, name: &str, value: Tensor, trainable: bool) -> Result<()> {
        self.register(name, Value::Real(value), trainable)
    }

    pub fn register_complex(&mut self, name: &str, value: ComplexTensor, trainable: bool) -> Result<()> {
        self.register(name, Value::Complex(value), trainable)
    }

    fn register(&mut self, name: &str, value: Value, trainable: bool) -> Result<()> {
        if self.params.contains_key(name) {
            return Err(Error::contract("ParamStore::register", format!("duplicate parameter {name}")));
        }
        self.params.insert(name.to_string(), Parameter::new(name.to_string(), value, trainable));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Parameter> {
        self.params
            .get(name)
            .ok_or_else(|| Error::contract("ParamStore::get", format!("unknown parameter {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Parameter> {
        self.params
            .get_mut(name)
            .ok_or_else(|| Error::contract("ParamStore::get_mut", format!("unknown parameter {name}")))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total scalar count (complex parameters count both parts).
    pub fn scalar_count(&self) -> usize {
        self.params.values().map(|p| p.value.numel()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.values_mut()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params.values_mut() {
            p.zero_grad();
        }
    }

    /// Put a parameter's current value on the tape as a gradient leaf (or a
    /// plain constant for non-trainable state) and remember the association.
    pub fn bind_real(&self, tape: &mut Tape, name: &str) -> Result<Var> {
        let p = self.get(name)?;
        let t = p.value.as_real()?.clone();
        let v = if p.trainable { tape.leaf_grad(t) } else { tape.leaf(t) };
        tape.register_binding(v, name, Part::Real);
        Ok(v)
    }

    pub fn bind_complex(&self, tape: &mut Tape, name: &str) -> Result<CVar> {
        let p = self.get(name)?;
        let t = p.value.as_complex()?.clone();
        let (re_t, im_t) = t.into_parts();
        let (re, im) = if p.trainable {
            (tape.leaf_grad(re_t), tape.leaf_grad(im_t))
        } else {
            (tape.leaf(re_t), tape.leaf(im_t))
        };
        tape.register_binding(re, name, Part::Re);
        tape.register_binding(im, name, Part::Im);
        Ok(CVar { re, im })
    }

    /// Add the gradients produced by a backward sweep into the parameters the
    /// tape's leaves were bound to.
    pub fn accumulate_grads(&mut self, tape: &Tape, grads: &super::tape::Grads) -> Result<()> {
        for (node, name, part) in tape.bindings() {
            let Some(g) = grads.get(Var(*node)) else { continue };
            let p = self.get_mut(name)?;
            match (&mut p.grad, part) {
                (Value::Real(t), Part::Real) => t.add_assign(g)?,
                (Value::Complex(c), Part::Re) => {
                    let mut re = c.re().clone();
                    re.add_assign(g)?;
                    *c = ComplexTensor::new(re, c.im().clone())?;
                }
                (Value::Complex(c), Part::Im) => {
                    let mut im = c.im().clone();
                    im.add_assign(g)?;
                    *c = ComplexTensor::new(c.re().clone(), im)?;
                }
                _ => {
                    return Err(Error::contract(
                        "accumulate_grads",
                        format!("binding part mismatch for {name}"),
                    ))
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_registration_rejected() {
        let mut store = ParamStore::new();
        store.register_real("w", Tensor::zeros(vec![2]), true).unwrap();
        assert!(store.register_real("w", Tensor::zeros(vec![2]), true).is_err());
    }

    #[test]
    fn bind_and_accumulate_real() {
        let mut store = ParamStore::new();
        store.register_real("w", Tensor::from_vec(vec![2], vec![1.0, 2.0]).unwrap(), true).unwrap();
        let mut tape = Tape::new();
        let w = store.bind_real(&mut tape, "w").unwrap();
        let s = tape.sum_all(w);
        let grads = tape.backward(s).unwrap();
        store.accumulate_grads(&tape, &grads).unwrap();
        assert_eq!(store.get("w").unwrap().grad.as_real().unwrap().data(), &[1.0, 1.0]);
        store.zero_grad();
        assert_eq!(store.get("w").unwrap().grad.as_real().unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn bind_complex_accumulates_both_parts() {
        let mut store = ParamStore::new();
        let c = ComplexTensor::new(Tensor::scalar(1.0), Tensor::scalar(2.0)).unwrap();
        store.register_complex("z", c, true).unwrap();
        let mut tape = Tape::new();
        let z = store.bind_complex(&mut tape, "z").unwrap();
        // loss = re + 3*im
        let im3 = tape.mul_const(z.im, 3.0);
        let loss = tape.add(z.re, im3).unwrap();
        let grads = tape.backward(loss).unwrap();
        store.accumulate_grads(&tape, &grads).unwrap();
        let g = store.get("z").unwrap().grad.as_complex().unwrap().clone();
        assert_eq!(g.re().data(), &[1.0]);
        assert_eq!(g.im().data(), &[3.0]);
    }
}
