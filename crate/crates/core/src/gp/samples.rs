use std::collections::VecDeque;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Bounded FIFO of `(input, output)` training pairs.
///
/// Unfilled slots are absent rather than zero pairs; inserting into a full set
/// evicts the oldest pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    input_dim: usize,
    output_dim: usize,
    capacity: usize,
    inputs: VecDeque<DVector<f64>>,
    outputs: VecDeque<DVector<f64>>,
}

impl SampleSet {
    pub fn new(input_dim: usize, output_dim: usize, capacity: usize) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || capacity == 0 {
            return Err(Error::Argument(format!(
                "sample set needs positive dimensions and capacity (got {input_dim}, {output_dim}, {capacity})"
            )));
        }
        Ok(SampleSet {
            input_dim,
            output_dim,
            capacity,
            inputs: VecDeque::with_capacity(capacity),
            outputs: VecDeque::with_capacity(capacity),
        })
    }

    /// Builds a set holding exactly the given pairs; capacity equals their count
    /// (at least one).
    pub fn from_pairs(
        inputs: Vec<DVector<f64>>,
        outputs: Vec<DVector<f64>>,
        input_dim: usize,
        output_dim: usize,
    ) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::Argument(format!(
                "{} inputs but {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        let mut set = SampleSet::new(input_dim, output_dim, inputs.len().max(1))?;
        for (x, u) in inputs.into_iter().zip(outputs) {
            set.push(x, u)?;
        }
        Ok(set)
    }

    /// Scalar-output convenience constructor.
    pub fn from_scalar(inputs: Vec<DVector<f64>>, outputs: &[f64]) -> Result<Self> {
        let dim = inputs.first().map_or(1, |x| x.len());
        let outputs = outputs.iter().map(|u| DVector::from_element(1, *u)).collect();
        SampleSet::from_pairs(inputs, outputs, dim, 1)
    }

    /// Appends a pair, evicting the oldest one when full. Returns the evicted pair.
    pub fn push(
        &mut self,
        input: DVector<f64>,
        output: DVector<f64>,
    ) -> Result<Option<(DVector<f64>, DVector<f64>)>> {
        if input.len() != self.input_dim || output.len() != self.output_dim {
            return Err(Error::Argument(format!(
                "sample has shape ({}, {}), set expects ({}, {})",
                input.len(),
                output.len(),
                self.input_dim,
                self.output_dim
            )));
        }
        let evicted = if self.inputs.len() == self.capacity {
            self.inputs.pop_front().zip(self.outputs.pop_front())
        } else {
            None
        };
        self.inputs.push_back(input);
        self.outputs.push_back(output);
        Ok(evicted)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn inputs(&self) -> impl ExactSizeIterator<Item = &DVector<f64>> {
        self.inputs.iter()
    }

    pub fn outputs(&self) -> impl ExactSizeIterator<Item = &DVector<f64>> {
        self.outputs.iter()
    }

    pub fn get(&self, i: usize) -> Option<(&DVector<f64>, &DVector<f64>)> {
        self.inputs.get(i).zip(self.outputs.get(i))
    }

    /// Copy of this set with every output multiplied by `factor`.
    pub fn scaled_outputs(&self, factor: f64) -> SampleSet {
        let mut out = self.clone();
        out.outputs.iter_mut().for_each(|u| *u *= factor);
        out
    }
}
