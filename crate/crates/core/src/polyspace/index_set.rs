use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the size of an enumerated index set unless overridden.
pub const DEFAULT_CAPACITY: usize = 1_000_000;

/// Multi-indices spanning a polynomial space, in a fixed nested order.
///
/// Indices are sorted by their hyperbolic-cross weight `prod_k (nu_k + 1)`
/// and then lexicographically, so the set for order `n` is a prefix of the
/// set for every larger order and basis function `j` keeps its number as the
/// space grows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSet {
    dim: usize,
    order: usize,
    indices: Vec<Vec<u32>>,
}

fn weight(nu: &[u32]) -> u64 {
    nu.iter().map(|&v| u64::from(v) + 1).product()
}

impl IndexSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<u32>] {
        &self.indices
    }

    /// Largest single-coordinate degree appearing in the set.
    pub fn max_degree(&self) -> usize {
        self.indices
            .iter()
            .flat_map(|nu| nu.iter())
            .copied()
            .max()
            .unwrap_or(0) as usize
    }

    /// The first `n` indices, i.e. the basis of a nested subspace.
    pub fn prefix(&self, n: usize) -> IndexSet {
        let n = n.min(self.len());
        let order = self.indices[..n]
            .iter()
            .map(|nu| weight(nu) as usize - 1)
            .max()
            .unwrap_or(0);
        IndexSet {
            dim: self.dim,
            order,
            indices: self.indices[..n].to_vec(),
        }
    }

    /// JSON list of integer tuples, in basis order.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.indices).expect("integer tuples always serialize")
    }

    /// Parses a list of tuples written by [`IndexSet::to_json`] and checks it
    /// is exactly the hyperbolic cross of the given order.
    pub fn from_json(order: usize, json: &str) -> Result<IndexSet> {
        let indices: Vec<Vec<u32>> = serde_json::from_str(json)?;
        let dim = indices
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidInput("empty index list".into()))?;
        let expected = hyperbolic_cross(dim, order)?;
        if expected.indices != indices {
            return Err(Error::InvalidInput(format!(
                "index list is not the ordered hyperbolic cross of order {order} in {dim} dimensions"
            )));
        }
        Ok(expected)
    }
}

/// `{ nu in N_0^d : prod_k (nu_k + 1) <= n + 1 }` in nested order.
pub fn hyperbolic_cross(dim: usize, order: usize) -> Result<IndexSet> {
    hyperbolic_cross_with_capacity(dim, order, DEFAULT_CAPACITY)
}

pub fn hyperbolic_cross_with_capacity(dim: usize, order: usize, limit: usize) -> Result<IndexSet> {
    if dim == 0 {
        return Err(Error::InvalidInput("index sets need d >= 1".into()));
    }
    let bound = order as u64 + 1;
    let mut indices = Vec::new();
    let mut current = vec![0u32; dim];
    enumerate(0, 1, bound, &mut current, &mut indices, limit)?;
    indices.sort_by(|a, b| weight(a).cmp(&weight(b)).then_with(|| a.cmp(b)));
    Ok(IndexSet {
        dim,
        order,
        indices,
    })
}

fn enumerate(
    axis: usize,
    product: u64,
    bound: u64,
    current: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
    limit: usize,
) -> Result<()> {
    if axis == current.len() {
        if out.len() == limit {
            return Err(Error::CapacityExceeded { limit });
        }
        out.push(current.clone());
        return Ok(());
    }
    let mut v = 0u32;
    while product * (u64::from(v) + 1) <= bound {
        current[axis] = v;
        enumerate(axis + 1, product * (u64::from(v) + 1), bound, current, out, limit)?;
        v += 1;
    }
    current[axis] = 0;
    Ok(())
}

/// Hyperbolic-cross subspace dimensions for orders `1, 2, 3, ...`, keeping
/// each distinct size not exceeding `max_size`.
///
/// Returns the largest admissible set together with the ladder of sizes;
/// every ladder entry is a prefix length of the returned set.
pub fn hyperbolic_cross_ladder(dim: usize, max_size: usize) -> Result<(IndexSet, Vec<usize>)> {
    let mut ladder = Vec::new();
    let mut largest: Option<IndexSet> = None;
    let mut order = 1;
    loop {
        let set = hyperbolic_cross(dim, order)?;
        if set.len() > max_size {
            break;
        }
        if ladder.last() != Some(&set.len()) {
            ladder.push(set.len());
        }
        largest = Some(set);
        order += 1;
    }
    let largest = largest.ok_or_else(|| {
        Error::InvalidInput(format!(
            "N_max = {max_size} is below the first hyperbolic-cross size {} for d = {dim}",
            dim + 1
        ))
    })?;
    Ok((largest, ladder))
}
