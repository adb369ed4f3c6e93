//! Named parameter storage shared by the model, the optimizer and the
//! checkpoint container.

use crate::error::{Error, Result};
use crate::nn::{Tape, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::rc::Rc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

/// Flat list of named tensors. Ids are allocation order, which is fixed by
/// the model constructor, so optimizer state and checkpoints align by index.
#[derive(Clone, Debug, Default)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Rc<Tensor>>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn alloc(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.values.push(Rc::new(value));
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn tensor(&self, idx: usize) -> &Tensor {
        &self.values[idx]
    }

    /// Mutable access for the optimizer; copy-on-write if a tape still holds
    /// the tensor.
    pub fn tensor_mut(&mut self, idx: usize) -> &mut Tensor {
        Rc::make_mut(&mut self.values[idx])
    }

    pub fn set_tensor(&mut self, idx: usize, value: Tensor) -> Result<()> {
        if value.shape() != self.values[idx].shape() {
            return Err(Error::Checkpoint(format!(
                "parameter '{}' shape {:?} does not match stored {:?}",
                self.names[idx],
                self.values[idx].shape(),
                value.shape()
            )));
        }
        self.values[idx] = Rc::new(value);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().map(|rc| rc.as_ref()))
    }

    /// Leaf every parameter into a tape; the returned vars align by index.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.values
            .iter()
            .map(|rc| tape.leaf(Rc::clone(rc)))
            .collect()
    }
}

/// Xavier-uniform init for a (fan_in, fan_out) matrix.
pub fn xavier(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, shape: &[usize]) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, bound, shape)
}

pub fn uniform(rng: &mut ChaCha8Rng, bound: f64, shape: &[usize]) -> Tensor {
    let numel = shape.iter().product();
    Tensor::from_vec(
        shape,
        (0..numel).map(|_| rng.gen_range(-bound..bound)).collect(),
    )
}
