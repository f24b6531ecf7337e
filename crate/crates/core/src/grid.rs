//! The fixed point cloud that discretizes `D = [-1, 1]^d`, its base
//! probability measure, and normalized restrictions of that measure to
//! domain estimates.
//!
//! Grid points are identified by their position in the grid for the whole
//! run; domain estimates, samples and rejected points are all stored as grid
//! indices.

use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Random generator for the stream with the given number.
///
/// Stream 0 builds grids; trial `t` uses stream `t + 1`. All streams derived
/// from one master seed are independent.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Generator owned by one trial.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    stream_rng(master_seed, trial + 1)
}

/// `K` points in `[-1, 1]^d` with a discrete probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    seed: u64,
    /// Row-major `K x d` coordinates.
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// Draws `size` points independently and uniformly from `[-1, 1]^dim`
    /// with uniform weights `1 / size`.
    pub fn build(dim: usize, size: usize, seed: u64) -> Result<Self> {
        if dim == 0 || size == 0 {
            return Err(Error::InvalidInput(format!(
                "grid needs d >= 1 and K >= 1, got d = {dim}, K = {size}"
            )));
        }
        let mut rng = stream_rng(seed, 0);
        let coords = (0..dim * size)
            .map(|_| 2.0 * rng.gen::<f64>() - 1.0)
            .collect();
        Ok(Self {
            dim,
            seed,
            coords,
            weights: vec![1.0 / size as f64; size],
        })
    }

    /// Builds a grid from explicit points (row-major) with uniform weights.
    pub fn from_points(dim: usize, coords: Vec<f64>, seed: u64) -> Result<Self> {
        if dim == 0 || coords.is_empty() || coords.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "{} coordinates cannot form points of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !(-1.0..=1.0).contains(*c)) {
            return Err(Error::InvalidInput(format!(
                "coordinate {bad} lies outside [-1, 1]"
            )));
        }
        let size = coords.len() / dim;
        Ok(Self {
            dim,
            seed,
            coords,
            weights: vec![1.0 / size as f64; size],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.coords[index * self.dim..(index + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Row-major coordinate buffer.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Writes the grid as CSV: a `d,K,seed` header row, its values, then one
    /// row of coordinates per point in grid order.
    ///
    /// Coordinates use the shortest round-trip decimal form, so
    /// [`Grid::read_csv`] restores the grid bit for bit.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        out.write_record(["d", "K", "seed"])?;
        out.write_record([
            self.dim.to_string(),
            self.len().to_string(),
            self.seed.to_string(),
        ])?;
        for p in self.points() {
            out.write_record(p.iter().map(|c| c.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::InvalidInput("truncated grid file".into()))
        };
        if next()?.trim() != "d,K,seed" {
            return Err(Error::InvalidInput("grid file must start with `d,K,seed`".into()));
        }
        let meta = next()?;
        let fields: Vec<&str> = meta.trim().split(',').collect();
        let parse_err = |what: &str| Error::InvalidInput(format!("bad grid header field {what}"));
        if fields.len() != 3 {
            return Err(parse_err("count"));
        }
        let dim: usize = fields[0].parse().map_err(|_| parse_err("d"))?;
        let size: usize = fields[1].parse().map_err(|_| parse_err("K"))?;
        let seed: u64 = fields[2].parse().map_err(|_| parse_err("seed"))?;
        let mut coords = Vec::with_capacity(dim * size);
        for _ in 0..size {
            let row = next()?;
            let before = coords.len();
            for c in row.trim().split(',') {
                coords.push(
                    c.parse::<f64>()
                        .map_err(|_| Error::InvalidInput(format!("bad coordinate `{c}`")))?,
                );
            }
            if coords.len() - before != dim {
                return Err(Error::InvalidInput(format!("row with wrong arity: `{row}`")));
            }
        }
        Self::from_points(dim, coords, seed)
    }
}

/// A nonempty set of grid indices with the normalized restriction of the
/// base measure.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainEstimate {
    active: Vec<usize>,
    weights: Vec<f64>,
}

impl DomainEstimate {
    /// The whole grid, carrying the base measure itself.
    pub fn full(grid: &Grid) -> Self {
        Self {
            active: (0..grid.len()).collect(),
            weights: grid.weights().to_vec(),
        }
    }

    /// Sorted grid indices.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Restricted weights, aligned with [`DomainEstimate::active`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Position of a grid index within the active set.
    pub fn position(&self, grid_index: usize) -> Option<usize> {
        self.active.binary_search(&grid_index).ok()
    }

    pub fn contains(&self, grid_index: usize) -> bool {
        self.position(grid_index).is_some()
    }

    /// Total base-measure mass of the active set.
    pub fn mass(&self, grid: &Grid) -> f64 {
        self.active.iter().map(|&i| grid.weights()[i]).sum()
    }
}

/// Normalized restriction of the grid measure to `active`.
///
/// Indices are sorted and deduplicated.
pub fn restrict_measure(grid: &Grid, active: impl IntoIterator<Item = usize>) -> Result<DomainEstimate> {
    let mut active: Vec<usize> = active.into_iter().collect();
    active.sort_unstable();
    active.dedup();
    if active.is_empty() {
        return Err(Error::EmptyEstimate);
    }
    if let Some(&last) = active.last() {
        if last >= grid.len() {
            return Err(Error::InvalidInput(format!(
                "grid index {last} out of range for K = {}",
                grid.len()
            )));
        }
    }
    let tau = grid.weights();
    let mass: f64 = active.iter().map(|&i| tau[i]).sum();
    if mass <= 0.0 {
        return Err(Error::EmptyEstimate);
    }
    let weights = active.iter().map(|&i| tau[i] / mass).collect();
    Ok(DomainEstimate { active, weights })
}
