use crate::error::{arg_err, Result};

/// Paired observations: normalized parameter vectors and scalar performance values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    dim: usize,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Dataset {
            dim,
            xs: Vec::new(),
            ys: Vec::new(),
        }
    }

    pub fn from_rows(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return arg_err(format!("{} inputs but {} targets", xs.len(), ys.len()));
        }
        let dim = xs.first().map_or(0, Vec::len);
        let mut data = Dataset::new(dim);
        for (x, y) in xs.into_iter().zip(ys) {
            data.push(x, y)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if self.xs.is_empty() && self.dim == 0 {
            self.dim = x.len();
        }
        if x.len() != self.dim {
            return arg_err(format!(
                "point has {} coordinates, dataset dimension is {}",
                x.len(),
                self.dim
            ));
        }
        self.xs.push(x);
        self.ys.push(y);
        Ok(())
    }

    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        for (x, y) in other.iter() {
            self.push(x.to_vec(), y)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn xs(&self) -> &[Vec<f64>] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.xs.iter().map(Vec::as_slice).zip(self.ys.iter().copied())
    }

    /// Index of the largest target, first occurrence on ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &y) in self.ys.iter().enumerate() {
            match best {
                Some(b) if self.ys[b] >= y => {}
                _ => best = Some(i),
            }
        }
        best
    }

    /// Rows in the given order; indices may repeat.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            dim: self.dim,
            xs: idx.iter().map(|&i| self.xs[i].clone()).collect(),
            ys: idx.iter().map(|&i| self.ys[i]).collect(),
        }
    }
}
