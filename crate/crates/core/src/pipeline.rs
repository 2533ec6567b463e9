//! In-memory stage logic shared by the CLI and the FFI layer.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use log::info;

use crate::curvature::{
    curvature_all_edges, degree_values, read_curvature_cache, write_curvature_cache, EdgeValues,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::persistence::{node_diagrams, PersistenceDiagram, RawFunction};
use crate::vectorize::{
    fit_normalization, persistence_image, NormalizationSpec, PIConfig, PersistenceImage, PiStore,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FiltrationKind {
    Ricci,
    Degree,
}

impl FromStr for FiltrationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ricci" => Ok(FiltrationKind::Ricci),
            "degree" => Ok(FiltrationKind::Degree),
            other => Err(Error::Config(format!(
                "unknown filtration '{other}' (expected ricci or degree)"
            ))),
        }
    }
}

impl fmt::Display for FiltrationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FiltrationKind::Ricci => "ricci",
            FiltrationKind::Degree => "degree",
        })
    }
}

/// Curvature of every edge, read from `cache_dir` when a matching entry
/// exists and written there otherwise.
pub fn edge_curvature(g: &Graph, alpha: f64, cache_dir: Option<&Path>) -> Result<EdgeValues> {
    let hash = g.content_hash();
    let path = cache_dir.map(|d| d.join(format!("curvature-{}-{alpha}.tsv", &hash[..16])));
    if let Some(p) = &path {
        if p.exists() {
            if let Some(values) = read_curvature_cache(p, &hash, alpha)? {
                info!("curvature cache hit: {}", p.display());
                return Ok(values);
            }
        }
    }
    let start = Instant::now();
    let values = curvature_all_edges(g, alpha)?;
    info!(
        "curvature of {} edges computed in {:.2?}",
        values.len(),
        start.elapsed()
    );
    if let Some(p) = &path {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        write_curvature_cache(p, &hash, alpha, &values)?;
    }
    Ok(values)
}

/// Ego-net diagrams of every node under the chosen filtration.
pub fn diagrams(
    g: &Graph,
    kind: FiltrationKind,
    radius: usize,
    alpha: f64,
    cache_dir: Option<&Path>,
) -> Result<Vec<PersistenceDiagram>> {
    match kind {
        FiltrationKind::Degree => node_diagrams(g, RawFunction::Node(&degree_values(g)), radius),
        FiltrationKind::Ricci => {
            let kappa = edge_curvature(g, alpha, cache_dir)?;
            node_diagrams(g, RawFunction::Edge(&kappa), radius)
        }
    }
}

/// Dataset-wide normalization. A dataset whose finite values all coincide
/// gets a unit range starting at that value.
pub fn normalization_for(diagrams: &[PersistenceDiagram]) -> Result<NormalizationSpec> {
    match fit_normalization(diagrams) {
        Ok(spec) => Ok(spec),
        Err(_) => {
            let lo = diagrams
                .iter()
                .flat_map(PersistenceDiagram::finite_values)
                .next()
                .unwrap_or(0.0);
            NormalizationSpec::new(lo, lo + 1.0)
        }
    }
}

pub fn pi_store(diagrams: &[PersistenceDiagram], cfg: &PIConfig) -> Result<PiStore> {
    cfg.validate()?;
    let spec = normalization_for(diagrams)?;
    let images: Vec<PersistenceImage> = diagrams
        .iter()
        .map(|d| persistence_image(d, &spec, cfg))
        .collect();
    Ok(PiStore::from_images(&images, cfg))
}

/// Filtration, diagrams and images in one call.
pub fn extract(
    g: &Graph,
    kind: FiltrationKind,
    radius: usize,
    alpha: f64,
    cfg: &PIConfig,
    cache_dir: Option<&Path>,
) -> Result<PiStore> {
    let start = Instant::now();
    let d = diagrams(g, kind, radius, alpha, cache_dir)?;
    let store = pi_store(&d, cfg)?;
    info!(
        "extracted {} images in {:.2?}",
        store.num_nodes(),
        start.elapsed()
    );
    Ok(store)
}
