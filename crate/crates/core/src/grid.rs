//! Axis-aligned boxes and tensor-product sample grids.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Closed interval per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainBox {
    pub bounds: Vec<(f64, f64)>,
}

impl DomainBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        for (k, (lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidArgument(format!("bad interval {k}: [{lo}, {hi}]")));
            }
        }
        Ok(Self { bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.contains_with(p, 0.0)
    }

    pub fn contains_with(&self, p: &[f64], slack: f64) -> bool {
        p.len() >= self.bounds.len()
            && self.bounds.iter().zip(p).all(|((lo, hi), x)| *x >= lo - slack && *x <= hi + slack)
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }
}

/// Tensor-product grid: `counts[k]` equally spaced nodes on each interval,
/// endpoints included. A degenerate interval or a count of 1 pins the axis.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub domain: DomainBox,
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn new(domain: DomainBox, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != domain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: counts.len() });
        }
        if counts.contains(&0) {
            return Err(Error::InvalidArgument("grid counts must be positive".into()));
        }
        Ok(Self { domain, counts })
    }

    /// `count` nodes on every non-degenerate axis, one on pinned axes.
    pub fn uniform(domain: DomainBox, count: usize) -> Result<Self> {
        let counts = domain
            .bounds
            .iter()
            .map(|(lo, hi)| if lo == hi { 1 } else { count })
            .collect();
        Self::new(domain, counts)
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    /// Node spacing per axis (0 on pinned axes).
    pub fn spacing(&self) -> Vec<f64> {
        self.domain
            .bounds
            .iter()
            .zip(&self.counts)
            .map(|((lo, hi), &c)| if c > 1 { (hi - lo) / (c - 1) as f64 } else { 0.0 })
            .collect()
    }

    /// Multi-index of the flat (row-major, last axis fastest) index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.counts[k];
            flat /= self.counts[k];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (i, c)| acc * c + i)
    }

    pub fn node(&self, idx: &[usize]) -> Vec<f64> {
        self.domain
            .bounds
            .iter()
            .zip(&self.counts)
            .zip(idx)
            .map(|(((lo, hi), &c), &i)| {
                if c <= 1 {
                    if c == 1 && lo == hi {
                        *lo
                    } else {
                        0.5 * (lo + hi)
                    }
                } else if i + 1 == c {
                    *hi
                } else {
                    lo + (hi - lo) * i as f64 / (c - 1) as f64
                }
            })
            .collect()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.node(&self.multi_index(flat))
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Evaluates `f` at every node in parallel; the output is in grid order
    /// regardless of scheduling.
    pub fn map<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &[f64]) -> T + Sync + Send,
    {
        (0..self.len()).into_par_iter().map(|i| f(i, &self.point(i))).collect()
    }

    /// Flat indices of nodes within Euclidean index-distance `radius` of `center`.
    pub fn neighborhood(&self, center: usize, radius: usize) -> Vec<usize> {
        let c = self.multi_index(center);
        let r = radius as i64;
        let mut out = Vec::new();
        let mut idx = vec![0i64; self.dim()];
        fn rec(
            grid: &GridSpec,
            c: &[usize],
            r: i64,
            k: usize,
            idx: &mut Vec<i64>,
            out: &mut Vec<usize>,
        ) {
            if k == grid.dim() {
                let d2: i64 = idx.iter().zip(c).map(|(i, c)| (i - *c as i64).pow(2)).sum();
                if d2 <= r * r {
                    let u: Vec<usize> = idx.iter().map(|&i| i as usize).collect();
                    out.push(grid.flat_index(&u));
                }
                return;
            }
            let lo = (c[k] as i64 - r).max(0);
            let hi = (c[k] as i64 + r).min(grid.counts[k] as i64 - 1);
            for i in lo..=hi {
                idx[k] = i;
                rec(grid, c, r, k + 1, idx, out);
            }
        }
        rec(self, &c, r, 0, &mut idx, &mut out);
        out
    }
}
