//! Exact designs: integer replication counts over the design space.

use crate::error::Error;

/// An exact design `w`: one non-negative integer replication count per
/// candidate point. The support indicator `s_w(x_i) = 1 iff w(x_i) > 0` is
/// derived, never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExactDesign {
    counts: Vec<u32>,
}

impl ExactDesign {
    pub fn new(counts: Vec<u32>) -> Self {
        ExactDesign { counts }
    }

    pub fn zeros(n: usize) -> Self {
        ExactDesign {
            counts: vec![0; n],
        }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn count(&self, i: usize) -> u32 {
        self.counts[i]
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Total number of trials `Σ w(x_i)`.
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Support indicator values as 0.0/1.0.
    pub fn support_indicator(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| if c > 0 { 1.0 } else { 0.0 })
            .collect()
    }

    /// Indices of points with positive count.
    pub fn support(&self) -> Vec<usize> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn support_size(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Checks the design has one count per point of a space of size `n`.
    pub fn check_len(&self, n: usize) -> Result<(), Error> {
        if self.counts.len() != n {
            return Err(Error::LengthMismatch {
                what: "design counts",
                expected: n,
                got: self.counts.len(),
            });
        }
        Ok(())
    }
}

impl From<Vec<u32>> for ExactDesign {
    fn from(counts: Vec<u32>) -> Self {
        ExactDesign::new(counts)
    }
}
