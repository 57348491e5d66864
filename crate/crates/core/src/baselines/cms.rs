use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Value;

/// Count-min sketch with one multiply-add-shift hash per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CountMin {
    width: usize,
    depth: usize,
    cells: Vec<f64>,
    hashes: Vec<(u64, u64)>,
    total: f64,
}

impl CountMin {
    pub fn new<R: Rng + ?Sized>(width: usize, depth: usize, rng: &mut R) -> Result<Self> {
        if width == 0 || depth == 0 {
            return Err(Error::config("count-min width and depth must be at least 1"));
        }
        let hashes = (0..depth)
            .map(|_| (rng.random::<u64>() | 1, rng.random::<u64>()))
            .collect();
        Ok(CountMin {
            width,
            depth,
            cells: vec![0.0; width * depth],
            hashes,
            total: 0.0,
        })
    }

    /// Empty sketch with the same shape and hash functions.
    pub fn empty_like(&self) -> Self {
        CountMin {
            cells: vec![0.0; self.cells.len()],
            total: 0.0,
            ..self.clone()
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    fn bucket(&self, row: usize, x: Value) -> usize {
        let (a, b) = self.hashes[row];
        let h = a.wrapping_mul(x.id()).wrapping_add(b);
        ((h as u128 * self.width as u128) >> 64) as usize
    }

    pub fn update(&mut self, x: Value, c: f64) {
        for row in 0..self.depth {
            let i = row * self.width + self.bucket(row, x);
            self.cells[i] += c;
        }
        self.total += c;
    }

    pub fn query(&self, x: Value) -> f64 {
        (0..self.depth)
            .map(|row| self.cells[row * self.width + self.bucket(row, x)])
            .fold(f64::INFINITY, f64::min)
    }

    /// Adds another sketch built with the same hash functions.
    pub fn merge(&mut self, other: &CountMin) -> Result<()> {
        if self.width != other.width || self.hashes != other.hashes {
            return Err(Error::config("count-min sketches differ in shape or hashing"));
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }
}

/// `(width, depth)` using `space` cells: depth 5 when that fits within 1%
/// of the budget, otherwise the nearest depth that does.
pub fn cms_dims_for_space(space: usize) -> (usize, usize) {
    let fits = |d: usize| {
        let used = (space / d) * d;
        space / d >= 1 && (space - used) as f64 <= 0.01 * space as f64
    };
    for d in [5, 4, 6, 3, 7, 2, 8, 1] {
        if fits(d) {
            return (space / d, d);
        }
    }
    (space.max(1), 1)
}
