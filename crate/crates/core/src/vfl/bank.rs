use ndarray::{s, Array2, Array3};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::Topology;
use super::{Result, VflError};
use crate::data::TimeSeriesDataset;
use crate::nn::ModelRecord;
use crate::seed::{stream, StreamRng};
use crate::Mlp;

pub const BANK_FORMAT_VERSION: u32 = 1;
const CHUNK: usize = 4096;

#[derive(Debug, Clone)]
pub struct PartyGenerators {
    pub attributes: Vec<usize>,
    pub generators: Vec<Mlp>,
}

/// Trained attribute generators of every party: the released model.
#[derive(Debug, Clone)]
pub struct GeneratorBank {
    pub topology: Topology,
    pub latent_dim: usize,
    pub n_attributes: usize,
    pub steps: usize,
    pub parties: Vec<PartyGenerators>,
}

#[derive(Serialize, Deserialize)]
struct PartyRecord {
    attributes: Vec<usize>,
    generators: Vec<ModelRecord>,
}

#[derive(Serialize, Deserialize)]
struct BankRecord {
    format_version: u32,
    topology: Topology,
    latent_dim: usize,
    n_attributes: usize,
    steps: usize,
    parties: Vec<PartyRecord>,
}

fn latent(rng: &mut StreamRng, rows: usize, l: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, l), || StandardNormal.sample(rng))
}

impl GeneratorBank {
    /// `n` samples; every generator of a sample sees the same latent vector
    /// (one per party in the local-only topology).
    pub fn synthesize(&self, n: usize, seed: u64) -> Result<TimeSeriesDataset> {
        if n == 0 {
            return Err(VflError::Config("cannot synthesize zero samples".into()));
        }
        let mut rngs: Vec<StreamRng> = match self.topology {
            Topology::LocalOnly => (0..self.parties.len()).map(|p| stream(seed, &format!("synth/latent/{p}"))).collect(),
            _ => vec![stream(seed, "synth/latent")],
        };
        let mut data = Array3::zeros((n, self.n_attributes, self.steps));
        let mut start = 0;
        while start < n {
            let rows = CHUNK.min(n - start);
            let shared = (rngs.len() == 1).then(|| latent(&mut rngs[0], rows, self.latent_dim));
            for (p, party) in self.parties.iter().enumerate() {
                let z = match &shared {
                    Some(z) => z.clone(),
                    None => latent(&mut rngs[p], rows, self.latent_dim),
                };
                for (&a, g) in party.attributes.iter().zip(&party.generators) {
                    let x = g.predict(&z)?;
                    data.slice_mut(s![start..start + rows, a, ..]).assign(&x);
                }
            }
            start += rows;
        }
        Ok(TimeSeriesDataset::new(data, None)?)
    }

    pub fn to_json(&self) -> String {
        let record = BankRecord {
            format_version: BANK_FORMAT_VERSION,
            topology: self.topology,
            latent_dim: self.latent_dim,
            n_attributes: self.n_attributes,
            steps: self.steps,
            parties: self
                .parties
                .iter()
                .map(|p| PartyRecord { attributes: p.attributes.clone(), generators: p.generators.iter().map(Mlp::to_record).collect() })
                .collect(),
        };
        serde_json::to_string(&record).expect("bank serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: BankRecord = serde_json::from_str(text).map_err(|e| VflError::Checkpoint(e.to_string()))?;
        if r.format_version != BANK_FORMAT_VERSION {
            return Err(VflError::Checkpoint(format!("unsupported bank format {}", r.format_version)));
        }
        let parties = r
            .parties
            .iter()
            .map(|p| {
                Ok(PartyGenerators {
                    attributes: p.attributes.clone(),
                    generators: p.generators.iter().map(Mlp::from_record).collect::<std::result::Result<_, _>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { topology: r.topology, latent_dim: r.latent_dim, n_attributes: r.n_attributes, steps: r.steps, parties })
    }

    pub fn bit_eq(&self, other: &Self) -> bool {
        self.topology == other.topology
            && self.latent_dim == other.latent_dim
            && self.parties.len() == other.parties.len()
            && self.parties.iter().zip(&other.parties).all(|(a, b)| {
                a.attributes == b.attributes
                    && a.generators.len() == b.generators.len()
                    && a.generators.iter().zip(&b.generators).all(|(x, y)| x.bit_eq(y))
            })
    }
}
