//! Permutations of `{0, .., n-1}` — the state space of the CPT sampler.

use crate::error::{Error, Result};

/// A bijection on `{0, .., n-1}`, stored as `map[i] = source index`.
///
/// Applying a permutation to a vector `x` produces the vector with entries
/// `x[map[i]]` — index `i` of the output receives the value that `map`
/// assigns to it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    /// The identity permutation on `n` elements.
    pub fn identity(n: usize) -> Self {
        Permutation { map: (0..n).collect() }
    }

    /// Validate and wrap an explicit mapping.
    pub fn from_vec(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n || seen[v] {
                return Err(Error::InvalidData(format!(
                    "not a permutation of 0..{n}: {map:?}"
                )));
            }
            seen[v] = true;
        }
        Ok(Permutation { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// Output index `i` takes the value at source index `map[i]`.
    pub fn apply<T: Copy>(&self, xs: &[T]) -> Vec<T> {
        debug_assert_eq!(xs.len(), self.map.len());
        self.map.iter().map(|&j| xs[j]).collect()
    }

    /// Swap the sources assigned to indices `i` and `j`.
    pub fn swap(&mut self, i: usize, j: usize) {
        self.map.swap(i, j);
    }

    /// Function composition `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        debug_assert_eq!(self.len(), other.len());
        Permutation {
            map: other.map.iter().map(|&j| self.map[j]).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0usize; self.map.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { map: inv }
    }
}
