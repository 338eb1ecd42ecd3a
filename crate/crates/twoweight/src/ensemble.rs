//! Seeded ensembles of measure pairs.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::GridMeasure;

/// Longest sparse sequence; its gaps grow up to `2.5^(n-2)` cells.
pub const SPARSE_MAX: usize = 40;
/// Deepest Cantor generation.
pub const CANTOR_MAX_DEPTH: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    /// `sigma = w` = unit masses on cells `0..n`
    Lattice,
    /// `n` draws each for `sigma` and `w` on cells `[0, 4n)`, log-uniform masses
    RandomAtoms,
    /// as `RandomAtoms`, with `w` also charging between 1 and `max(1, n/4)` atoms of `sigma`
    CommonMass,
    /// `sigma` the generation-`log2 n` Cantor measure, `w` random weights on the same atoms
    Cantor,
    /// atoms along a lacunary sequence, alternating between `sigma` and `w`
    SparseSequence,
}

impl EnsembleKind {
    pub const ALL: [EnsembleKind; 5] =
        [Self::Lattice, Self::RandomAtoms, Self::CommonMass, Self::Cantor, Self::SparseSequence];

    pub fn name(self) -> &'static str {
        match self {
            Self::Lattice => "lattice",
            Self::RandomAtoms => "random-atoms",
            Self::CommonMass => "common-mass",
            Self::Cantor => "cantor",
            Self::SparseSequence => "sparse-sequence",
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("ensemble kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub kind: EnsembleKind,
    pub n: usize,
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub label: String,
    pub sigma: GridMeasure,
    pub w: GridMeasure,
}

fn log_uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-2.0f64..2.0).exp()
}

fn random_atoms(rng: &mut ChaCha8Rng, n: usize) -> Vec<(i64, f64)> {
    let span = 4 * n as i64;
    (0..n).map(|_| (rng.gen_range(0..span), log_uniform(rng))).collect()
}

/// Cells at scale `m` of the centres of the generation-`depth` Cantor intervals.
fn cantor_cells(depth: u32, m: i32) -> Vec<i64> {
    let den = 2 * 3i128.pow(depth);
    (0..1u64 << depth)
        .map(|bits| {
            // left end a / 3^depth with ternary digits 0 or 2
            let a: i128 = (0..depth).filter(|i| bits >> i & 1 == 1).map(|i| 2 * 3i128.pow(i)).sum();
            ((2 * a + 1) * (1i128 << m)).div_euclid(den) as i64
        })
        .collect()
}

/// Scale at which distinct Cantor centres of the given generation fall into distinct cells.
pub fn cantor_scale(depth: u32) -> i32 {
    (depth as f64 * 3f64.log2()).ceil() as i32 + 1
}

fn instance(kind: EnsembleKind, n: usize, rng: &mut ChaCha8Rng) -> Result<(GridMeasure, GridMeasure)> {
    match kind {
        EnsembleKind::Lattice => {
            let mu = GridMeasure::from_cells(0, (0..n as i64).map(|k| (k, 1.0)))?;
            Ok((mu.clone(), mu))
        }
        EnsembleKind::RandomAtoms => {
            let s = random_atoms(rng, n);
            let w = random_atoms(rng, n);
            Ok((GridMeasure::from_cells(0, s)?, GridMeasure::from_cells(0, w)?))
        }
        EnsembleKind::CommonMass => {
            let s = random_atoms(rng, n);
            let mut w = random_atoms(rng, n);
            let shared = rng.gen_range(1..=(n / 4).max(1));
            for _ in 0..shared {
                let k = s[rng.gen_range(0..s.len())].0;
                w.push((k, log_uniform(rng)));
            }
            Ok((GridMeasure::from_cells(0, s)?, GridMeasure::from_cells(0, w)?))
        }
        EnsembleKind::Cantor => {
            let depth = n.trailing_zeros();
            let m = cantor_scale(depth);
            let cells = cantor_cells(depth, m);
            let s = GridMeasure::from_cells(m, cells.iter().map(|&k| (k, 1.0 / n as f64)))?;
            let raw: Vec<f64> = cells.iter().map(|_| log_uniform(rng)).collect();
            let total: f64 = raw.iter().sum();
            let w = GridMeasure::from_cells(m, cells.iter().zip(&raw).map(|(&k, v)| (k, v / total)))?;
            Ok((s, w))
        }
        EnsembleKind::SparseSequence => {
            let rho = rng.gen_range(1.5f64..2.5);
            let (mut s, mut w) = (Vec::new(), Vec::new());
            let mut cell = 0i64;
            for j in 0..n {
                let target = if j % 2 == 0 { &mut s } else { &mut w };
                target.push((cell, log_uniform(rng)));
                cell += (rho.powi(j as i32).floor() as i64).max(1);
            }
            Ok((GridMeasure::from_cells(0, s)?, GridMeasure::from_cells(0, w)?))
        }
    }
}

fn check(params: &EnsembleParams) -> Result<()> {
    let n = params.n;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    match params.kind {
        EnsembleKind::Cantor if !n.is_power_of_two() || n.trailing_zeros() > CANTOR_MAX_DEPTH => {
            Err(Error::InvalidParameter(format!("cantor needs n = 2^depth with depth <= {CANTOR_MAX_DEPTH}, got {n}")))
        }
        EnsembleKind::SparseSequence if !(2..=SPARSE_MAX).contains(&n) => {
            Err(Error::InvalidParameter(format!("sparse-sequence needs 2 <= n <= {SPARSE_MAX}, got {n}")))
        }
        _ => Ok(()),
    }
}

/// Instance `i` uses its own ChaCha8 stream of `seed`, so every instance is
/// independent of `count`.
pub fn ensemble(params: &EnsembleParams) -> Result<Vec<Instance>> {
    check(params)?;
    (0..params.count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(i as u64);
            let (sigma, w) = instance(params.kind, params.n, &mut rng)?;
            Ok(Instance { label: format!("{}-n{}-s{}-{i:04}", params.kind, params.n, params.seed), sigma, w })
        })
        .collect()
}
