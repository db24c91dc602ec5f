//! Multi-version node embedding storage.
//!
//! Three parts: the initial embedding array (version 0), one hash layer per
//! version holding `node -> embedding` for nodes whose n-th update produced
//! that version, and a per-node latest-version array. Any historical version
//! of a node is reachable through two O(1) lookups, and the store holds
//! exactly `num_nodes + num_updates` vectors.
//!
//! Updates take `&self`: the scheduler guarantees that no two in-flight
//! events write the same node, so concurrent updates touch distinct keys.

use std::io::{Read, Write};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use dashmap::DashMap;
use parking_lot::RwLock;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::{NodeId, Real};

pub type Vector = Arc<[Real]>;

const INIT_STD: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {node} has no version {version} (latest {latest})")]
    VersionNotFound { node: NodeId, version: u32, latest: u32 },
    #[error("embedding has length {got}, store dimension is {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("embedding for node {0} has non-finite entries")]
    NonFinite(NodeId),
    #[error("checkpoint predates the last commit")]
    StaleCheckpoint,
    #[error("malformed embedding dump: {0}")]
    BadDump(String),
}

pub struct EmbeddingStore {
    dim: usize,
    z0: Vec<Vector>,
    // layers[v - 1] holds version v.
    layers: RwLock<Vec<DashMap<NodeId, Vector>>>,
    latest: Vec<AtomicU32>,
    generation: u64,
}

/// Snapshot of the version array; restoring drops every later version.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    generation: u64,
    latest: Vec<u32>,
}

impl std::fmt::Debug for EmbeddingStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmbeddingStore")
            .field("dim", &self.dim)
            .field("num_nodes", &self.z0.len())
            .field("layers", &self.layers.read().len())
            .finish()
    }
}

fn gaussian_vector(rng: &mut impl Rng, dim: usize) -> Vector {
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    (0..dim).map(|_| normal.sample(rng)).collect()
}

impl EmbeddingStore {
    /// Seeded Gaussian(0, 0.1²) initial embeddings.
    pub fn init_store(num_nodes: usize, dim: usize, seed: u64) -> Self {
        assert!(dim >= 1, "embedding dimension must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z0 = (0..num_nodes).map(|_| gaussian_vector(&mut rng, dim)).collect();
        Self::from_initial(dim, z0)
    }

    pub fn from_initial(dim: usize, z0: Vec<Vector>) -> Self {
        let latest = z0.iter().map(|_| AtomicU32::new(0)).collect();
        EmbeddingStore { dim, z0, layers: RwLock::new(Vec::new()), latest, generation: 0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.z0.len()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.read().len()
    }

    /// Total vectors held: initial array plus every layer entry.
    pub fn stored_vectors(&self) -> usize {
        self.z0.len() + self.layers.read().iter().map(DashMap::len).sum::<usize>()
    }

    fn check(&self, n: NodeId) -> Result<(), EmbedError> {
        if (n as usize) < self.z0.len() {
            Ok(())
        } else {
            Err(EmbedError::UnknownNode(n))
        }
    }

    pub fn latest_version(&self, n: NodeId) -> Result<u32, EmbedError> {
        self.check(n)?;
        Ok(self.latest[n as usize].load(Ordering::Acquire))
    }

    pub fn latest_versions(&self) -> Vec<u32> {
        self.latest.iter().map(|v| v.load(Ordering::Acquire)).collect()
    }

    pub fn initial(&self, n: NodeId) -> Result<Vector, EmbedError> {
        self.check(n)?;
        Ok(self.z0[n as usize].clone())
    }

    pub fn latest_emb(&self, n: NodeId) -> Result<Vector, EmbedError> {
        let v = self.latest_version(n)?;
        self.get_version(n, v)
    }

    pub fn get_version(&self, n: NodeId, version: u32) -> Result<Vector, EmbedError> {
        let latest = self.latest_version(n)?;
        if version > latest {
            return Err(EmbedError::VersionNotFound { node: n, version, latest });
        }
        if version == 0 {
            return Ok(self.z0[n as usize].clone());
        }
        let layers = self.layers.read();
        layers
            .get(version as usize - 1)
            .and_then(|layer| layer.get(&n).map(|x| x.clone()))
            .ok_or(EmbedError::VersionNotFound { node: n, version, latest })
    }

    /// Stores a new version of `n` and returns its version number.
    pub fn update_emb(&self, n: NodeId, x: Vector) -> Result<u32, EmbedError> {
        self.check(n)?;
        if x.len() != self.dim {
            return Err(EmbedError::DimMismatch { expected: self.dim, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite(n));
        }
        let version = self.latest[n as usize].load(Ordering::Acquire) + 1;
        let idx = version as usize - 1;
        {
            let layers = self.layers.read();
            if let Some(layer) = layers.get(idx) {
                layer.insert(n, x);
                self.latest[n as usize].store(version, Ordering::Release);
                return Ok(version);
            }
        }
        let mut layers = self.layers.write();
        while layers.len() <= idx {
            layers.push(DashMap::new());
        }
        layers[idx].insert(n, x);
        self.latest[n as usize].store(version, Ordering::Release);
        Ok(version)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint { generation: self.generation, latest: self.latest_versions() }
    }

    /// Drops every version written after `cp` was taken.
    pub fn restore(&mut self, cp: &Checkpoint) -> Result<(), EmbedError> {
        if cp.generation != self.generation {
            return Err(EmbedError::StaleCheckpoint);
        }
        let layers = self.layers.get_mut();
        for (n, slot) in self.latest.iter_mut().enumerate() {
            let current = *slot.get_mut();
            let keep = cp.latest.get(n).copied().unwrap_or(0);
            for v in keep + 1..=current {
                layers[v as usize - 1].remove(&(n as NodeId));
            }
            *slot.get_mut() = current.min(keep);
        }
        while layers.last().is_some_and(DashMap::is_empty) {
            layers.pop();
        }
        Ok(())
    }

    /// Folds every node's latest version into the initial array and clears
    /// all layers. Outstanding checkpoints become stale.
    pub fn commit(&mut self) {
        let layers = std::mem::take(self.layers.get_mut());
        if layers.is_empty() {
            return;
        }
        for (n, slot) in self.latest.iter_mut().enumerate() {
            let v = *slot.get_mut();
            if v > 0 {
                if let Some((_, x)) = layers[v as usize - 1].remove(&(n as NodeId)) {
                    self.z0[n] = x;
                }
                *slot.get_mut() = 0;
            }
        }
        self.generation += 1;
    }

    /// Appends a node with a fresh Gaussian embedding.
    pub fn add_node_emb(&mut self, rng: &mut impl Rng) -> NodeId {
        self.z0.push(gaussian_vector(rng, self.dim));
        self.latest.push(AtomicU32::new(0));
        (self.z0.len() - 1) as NodeId
    }

    /// Little-endian f32 rows of the initial array, preceded by
    /// `u64 rows, u64 dim`.
    pub fn write_z0<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&(self.z0.len() as u64).to_le_bytes())?;
        out.write_all(&(self.dim as u64).to_le_bytes())?;
        for row in &self.z0 {
            for &x in row.iter() {
                out.write_all(&(x as f32).to_le_bytes())?;
            }
        }
        out.flush()
    }

    pub fn read_z0<R: Read>(mut input: R) -> Result<Self, crate::Error> {
        let mut word = [0u8; 8];
        input.read_exact(&mut word)?;
        let rows = u64::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let dim = u64::from_le_bytes(word) as usize;
        if dim == 0 {
            return Err(EmbedError::BadDump("zero dimension".into()).into());
        }
        let mut buf = [0u8; 4];
        let mut z0 = Vec::with_capacity(rows);
        for _ in 0..rows {
            let mut row = Vec::with_capacity(dim);
            for _ in 0..dim {
                input.read_exact(&mut buf)?;
                row.push(f32::from_le_bytes(buf) as Real);
            }
            z0.push(Vector::from(row));
        }
        Ok(Self::from_initial(dim, z0))
    }
}
