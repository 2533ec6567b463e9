//! Persistence images and the topological distance between nodes.
//!
//! Diagram coordinates are normalized with one dataset-wide range so images
//! of different ego-nets are comparable. Each point `(b, d)` becomes
//! `(b', p') = (norm(b), norm(d) - norm(b))` with essential deaths capped at
//! 1, and contributes a persistence-weighted isotropic Gaussian integrated
//! exactly over every cell of a square grid on `[0, 1]^2`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::persistence::PersistenceDiagram;

pub const PI_STORE_MAGIC: &[u8; 4] = b"TPIS";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizationSpec {
    pub global_min: f64,
    pub global_max: f64,
    /// Normalized death assigned to essential points.
    pub inf_cap: f64,
}

impl NormalizationSpec {
    pub fn new(global_min: f64, global_max: f64) -> Result<Self> {
        if !(global_min.is_finite() && global_max.is_finite()) || global_min >= global_max {
            return Err(Error::Data(format!(
                "normalization range [{global_min}, {global_max}] is empty"
            )));
        }
        Ok(NormalizationSpec {
            global_min,
            global_max,
            inf_cap: 1.0,
        })
    }

    pub fn normalize(&self, x: f64) -> f64 {
        if x.is_infinite() {
            return self.inf_cap;
        }
        (x - self.global_min) / (self.global_max - self.global_min)
    }
}

/// Range over every finite birth and death in the dataset.
pub fn fit_normalization(diagrams: &[PersistenceDiagram]) -> Result<NormalizationSpec> {
    let (lo, hi) = diagrams
        .iter()
        .flat_map(PersistenceDiagram::finite_values)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
    if lo > hi {
        return Err(Error::Data("no finite diagram values to normalize".into()));
    }
    NormalizationSpec::new(lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PIConfig {
    /// Cell size on `[0, 1]`; its reciprocal must be an integer.
    pub resolution: f64,
    /// Gaussian bandwidth.
    pub sigma: f64,
}

impl PIConfig {
    /// Bandwidth defaults to one cell.
    pub fn new(resolution: f64) -> Result<Self> {
        Self::with_sigma(resolution, resolution)
    }

    pub fn with_sigma(resolution: f64, sigma: f64) -> Result<Self> {
        let cfg = PIConfig { resolution, sigma };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let cells = 1.0 / self.resolution;
        if !(self.resolution > 0.0 && self.resolution <= 1.0)
            || (cells - cells.round()).abs() > 1e-9
        {
            return Err(Error::InvalidArgument(format!(
                "resolution {} does not divide [0, 1] evenly",
                self.resolution
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma {} must be positive",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> usize {
        (1.0 / self.resolution).round() as usize
    }

    /// Length of an H0 grid plus an H1 grid.
    pub fn vector_len(&self) -> usize {
        2 * self.grid() * self.grid()
    }
}

/// Pixels of the H0 grid followed by the H1 grid; within a grid, rows index
/// the birth axis and columns the persistence axis.
#[derive(Clone, Debug, PartialEq)]
pub struct PersistenceImage {
    pub pixels: Vec<f64>,
}

/// Gaussian mass of `N(mu, sigma^2)` in each of `n` equal cells of `[0, 1]`.
fn cell_masses(mu: f64, sigma: f64, n: usize) -> Vec<f64> {
    let scale = 1.0 / (sigma * std::f64::consts::SQRT_2);
    let cdf = |x: f64| 0.5 * libm::erf((x - mu) * scale);
    let mut prev = cdf(0.0);
    (1..=n)
        .map(|k| {
            let next = cdf(k as f64 / n as f64);
            let m = next - prev;
            prev = next;
            m
        })
        .collect()
}

pub fn persistence_image(
    pd: &PersistenceDiagram,
    spec: &NormalizationSpec,
    cfg: &PIConfig,
) -> PersistenceImage {
    let n = cfg.grid();
    let mut pixels = vec![0.0; 2 * n * n];
    for (dim, points) in [&pd.h0, &pd.h1].into_iter().enumerate() {
        let grid = &mut pixels[dim * n * n..(dim + 1) * n * n];
        // canonical accumulation order makes the image exactly order-free
        let mut points = points.clone();
        points.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
        for (b, d) in points {
            let birth = spec.normalize(b);
            let pers = spec.normalize(d) - birth;
            if pers <= 0.0 {
                continue;
            }
            let along_birth = cell_masses(birth, cfg.sigma, n);
            let along_pers = cell_masses(pers, cfg.sigma, n);
            for (i, &mb) in along_birth.iter().enumerate() {
                let row = &mut grid[i * n..(i + 1) * n];
                for (cell, &mp) in row.iter_mut().zip(&along_pers) {
                    *cell += pers * mb * mp;
                }
            }
        }
    }
    PersistenceImage { pixels }
}

/// Euclidean distance between two images of the same configuration.
pub fn topo_distance(a: &PersistenceImage, b: &PersistenceImage) -> Result<f64> {
    if a.pixels.len() != b.pixels.len() {
        return Err(Error::InvalidArgument(format!(
            "image lengths differ: {} vs {}",
            a.pixels.len(),
            b.pixels.len()
        )));
    }
    Ok(euclidean(&a.pixels, &b.pixels))
}

fn euclidean<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.into() - y.into();
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// One persistence image per node, stored as `f32` rows in node order.
#[derive(Clone, Debug, PartialEq)]
pub struct PiStore {
    pub resolution: f32,
    pub sigma: f32,
    pub vec_len: usize,
    pub data: Vec<f32>,
}

impl PiStore {
    pub fn from_images(images: &[PersistenceImage], cfg: &PIConfig) -> Self {
        let vec_len = cfg.vector_len();
        let data = images
            .iter()
            .flat_map(|im| im.pixels.iter().map(|&x| x as f32))
            .collect();
        PiStore {
            resolution: cfg.resolution as f32,
            sigma: cfg.sigma as f32,
            vec_len,
            data,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.data.len().checked_div(self.vec_len).unwrap_or(0)
    }

    pub fn row(&self, v: usize) -> &[f32] {
        &self.data[v * self.vec_len..(v + 1) * self.vec_len]
    }

    pub fn image(&self, v: usize) -> PersistenceImage {
        PersistenceImage {
            pixels: self.row(v).iter().map(|&x| f64::from(x)).collect(),
        }
    }

    pub fn distance(&self, u: usize, v: usize) -> f64 {
        euclidean(self.row(u), self.row(v))
    }

    /// Writes `TPIS`, u64 nodes, u64 vec_len, f32 resolution, f32 sigma,
    /// then the rows, all little-endian.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let res: std::io::Result<()> = (|| {
            w.write_all(PI_STORE_MAGIC)?;
            w.write_all(&(self.num_nodes() as u64).to_le_bytes())?;
            w.write_all(&(self.vec_len as u64).to_le_bytes())?;
            w.write_all(&self.resolution.to_le_bytes())?;
            w.write_all(&self.sigma.to_le_bytes())?;
            for x in &self.data {
                w.write_all(&x.to_le_bytes())?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let io = |e| Error::io(path, e);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != PI_STORE_MAGIC {
            return Err(Error::Data(format!("{}: not a PI store", path.display())));
        }
        let mut w8 = [0u8; 8];
        let mut w4 = [0u8; 4];
        r.read_exact(&mut w8).map_err(io)?;
        let num_nodes = u64::from_le_bytes(w8) as usize;
        r.read_exact(&mut w8).map_err(io)?;
        let vec_len = u64::from_le_bytes(w8) as usize;
        r.read_exact(&mut w4).map_err(io)?;
        let resolution = f32::from_le_bytes(w4);
        r.read_exact(&mut w4).map_err(io)?;
        let sigma = f32::from_le_bytes(w4);
        let mut raw = vec![0u8; num_nodes * vec_len * 4];
        r.read_exact(&mut raw).map_err(io)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(PiStore {
            resolution,
            sigma,
            vec_len,
            data,
        })
    }
}
