//! Visit frequencies of H-orbits on a grid over S.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LtmError, Result};
use crate::partition::chunk_rng;
use crate::torus::{step, MapId, Params, TorusPoint};

/// Orbits per parallel chunk.
const CHUNK: u64 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub alpha: f64,
    pub seed: u64,
    pub bins: usize,
    pub n_points: u64,
    pub n_iter: u64,
    /// Row-major counts, `counts[iy * bins + ix]`, over the square S.
    pub counts: Vec<u64>,
    /// Visits to R outside S.
    pub outside: u64,
}

impl Occupancy {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.outside
    }

    /// `max / min` over the bins of S; infinite when a bin is empty.
    pub fn ratio(&self) -> f64 {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        let min = self.counts.iter().copied().min().unwrap_or(0);
        if min == 0 {
            f64::INFINITY
        } else {
            max as f64 / min as f64
        }
    }

    pub fn count(&self, ix: usize, iy: usize) -> u64 {
        self.counts[iy * self.bins + ix]
    }

    /// CSV `bin_x,bin_y,count` with a commented header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# ltm occupancy alpha={} seed={} points={} iters={} bins={} outside={} version={}",
            self.alpha,
            self.seed,
            self.n_points,
            self.n_iter,
            self.bins,
            self.outside,
            env!("CARGO_PKG_VERSION")
        )?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_x", "bin_y", "count"])?;
        for iy in 0..self.bins {
            for ix in 0..self.bins {
                w.write_record([ix.to_string(), iy.to_string(), self.count(ix, iy).to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Histogram of `n_points` seeded orbits of H, each counted at iterates
/// `0..=n_iter`.
pub fn occupancy(n_points: u64, n_iter: u64, bins: usize, seed: u64, params: &Params) -> Result<Occupancy> {
    if n_points == 0 || bins == 0 {
        return Err(LtmError::InvalidArgument("occupancy needs points and bins".into()));
    }
    let w = params.inv_alpha;
    let scale = bins as f64 / w;
    let chunks = n_points.div_ceil(CHUNK);
    let parts: Vec<(Vec<u64>, u64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let mut counts = vec![0u64; bins * bins];
            let mut outside = 0u64;
            let lo = c * CHUNK;
            for _ in lo..(lo + CHUNK).min(n_points) {
                let mut p = loop {
                    let q = TorusPoint::new(rng.gen(), rng.gen());
                    if q.in_r(params) {
                        break q;
                    }
                };
                for i in 0..=n_iter {
                    if p.in_s(params) {
                        let ix = ((p.x * scale) as usize).min(bins - 1);
                        let iy = ((p.y * scale) as usize).min(bins - 1);
                        counts[iy * bins + ix] += 1;
                    } else {
                        outside += 1;
                    }
                    if i < n_iter {
                        p = step(MapId::H, p, params);
                    }
                }
            }
            (counts, outside)
        })
        .collect();
    let mut counts = vec![0u64; bins * bins];
    let mut outside = 0;
    for (c, o) in parts {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
        outside += o;
    }
    Ok(Occupancy {
        alpha: params.alpha,
        seed,
        bins,
        n_points,
        n_iter,
        counts,
        outside,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_is_conserved() {
        let params = Params::new(2.5).unwrap();
        let o = occupancy(50, 200, 8, 3, &params).unwrap();
        assert_eq!(o.total(), 50 * 201);
    }

    #[test]
    fn zero_iterations_counts_initial_points() {
        let params = Params::new(2.5).unwrap();
        let o = occupancy(100, 0, 4, 3, &params).unwrap();
        assert_eq!(o.total(), 100);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let params = Params::new(2.5).unwrap();
        let o = occupancy(10, 10, 3, 1, &params).unwrap();
        let mut buf = Vec::new();
        o.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# ltm occupancy alpha=2.5 seed=1"));
        assert_eq!(text.lines().count(), 2 + 9);
    }
}
