use ndarray::{Array2, Array3};
use rand_distr::{Distribution, StandardNormal};

use super::config::{ExtractorKind, Topology, TrainConfig};
use super::messages::MessageLog;
use super::{Result, VflError};
use crate::data::{validate_assignment, PartyView};
use crate::dp::NoiseStream;
use crate::nn::{Activation, Layer, MlpModel};
use crate::seed::{stream, StreamRng};
use crate::{Adam, Mlp};

/// One party's networks and optimizer states.
#[derive(Debug, Clone)]
pub struct PartyModels {
    pub party_id: usize,
    /// Global attribute indices, in local column order.
    pub attributes: Vec<usize>,
    pub generators: Vec<Mlp>,
    pub generator_opt: Vec<Adam>,
    pub discriminators: Vec<Mlp>,
    pub discriminator_opt: Vec<Adam>,
    /// Present in the vfl topology only.
    pub extractor: Option<Mlp>,
    pub extractor_opt: Option<Adam>,
    pub(crate) discriminator_noise: Vec<NoiseStream>,
    pub(crate) extractor_noise: Option<NoiseStream>,
}

/// The server's discriminator: shared (over features) in the vfl topology,
/// central (over raw attributes) in the centralized one.
#[derive(Debug, Clone)]
pub struct ServerModels {
    pub discriminator: Mlp,
    pub opt: Adam,
}

#[derive(Debug, Clone)]
pub struct FederationState {
    pub config: TrainConfig,
    pub parties: Vec<PartyModels>,
    pub server: Option<ServerModels>,
    pub n_samples: usize,
    pub n_attributes: usize,
    pub steps: usize,
    /// Completed iterations.
    pub iteration: usize,
    pub log: MessageLog,
    latent: Vec<StreamRng>,
    pub(crate) batch_rng: StreamRng,
}

fn dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    std::iter::once(input).chain(hidden.iter().copied()).chain(std::iter::once(output)).collect()
}

fn identity(width: usize) -> Result<Mlp> {
    let layer = Layer::new(Array2::eye(width), ndarray::Array1::zeros(width), Activation::Identity)?;
    Ok(MlpModel::from_layers(vec![layer])?)
}

/// Checks that `views` are aligned and partition `0..|A|`.
pub fn check_views(views: &[PartyView]) -> Result<(usize, usize, usize)> {
    let first = views.first().ok_or_else(|| VflError::Config("no party views".into()))?;
    let (n, t) = (first.n_samples(), first.steps());
    if views.iter().any(|v| v.n_samples() != n || v.steps() != t) {
        return Err(VflError::Config("party views are not aligned".into()));
    }
    let assignment: Vec<Vec<usize>> = views.iter().map(|v| v.attributes.clone()).collect();
    let total = assignment.iter().map(Vec::len).sum();
    validate_assignment(&assignment, total)?;
    Ok((n, total, t))
}

impl FederationState {
    pub fn new(config: &TrainConfig, views: &[PartyView]) -> Result<Self> {
        config.validate()?;
        let (n_samples, n_attributes, steps) = check_views(views)?;
        if config.batch_size > n_samples {
            return Err(VflError::Config(format!("batch size {} exceeds {} samples", config.batch_size, n_samples)));
        }
        let seed = config.seed;
        let arch = &config.architecture;
        let hidden = arch.hidden_activation();
        let adam = |m: &Mlp| Adam::new(m, config.adam);

        let mut parties = Vec::with_capacity(views.len());
        for (p, view) in views.iter().enumerate() {
            let local = view.attributes.len();
            let mut generators = Vec::with_capacity(local);
            let mut discriminators = Vec::with_capacity(local);
            for j in 0..local {
                let mut rng = stream(seed, &format!("init/G/{p}/{j}"));
                generators.push(MlpModel::xavier(&dims(config.latent_dim, &arch.generator_hidden, steps), hidden, Activation::Identity, &mut rng)?);
                let mut rng = stream(seed, &format!("init/D/{p}/{j}"));
                discriminators.push(MlpModel::xavier(&dims(steps, &arch.discriminator_hidden, 1), hidden, Activation::Sigmoid, &mut rng)?);
            }
            let extractor = match (config.topology, arch.extractor) {
                (Topology::Vfl, ExtractorKind::Mlp) => {
                    let mut rng = stream(seed, &format!("init/FE/{p}"));
                    Some(MlpModel::xavier(&dims(local * steps, &arch.extractor_hidden, arch.feature_dim), hidden, hidden, &mut rng)?)
                }
                (Topology::Vfl, ExtractorKind::Passthrough) => Some(identity(local * steps)?),
                _ => None,
            };
            let frozen = arch.extractor == ExtractorKind::Passthrough;
            parties.push(PartyModels {
                party_id: p,
                attributes: view.attributes.clone(),
                generator_opt: generators.iter().map(adam).collect(),
                discriminator_opt: discriminators.iter().map(adam).collect(),
                extractor_opt: extractor.as_ref().filter(|_| !frozen).map(adam),
                discriminator_noise: (0..local).map(|j| NoiseStream::new(seed, &format!("dp/D/{p}/{j}"))).collect(),
                extractor_noise: extractor.as_ref().map(|_| NoiseStream::new(seed, &format!("dp/FE/{p}"))),
                generators,
                discriminators,
                extractor,
            });
        }

        let server_input = match config.topology {
            Topology::Vfl => Some(views.iter().map(|v| arch.feature_width(v.attributes.len(), steps)).sum()),
            Topology::Centralized => Some(n_attributes * steps),
            Topology::LocalOnly => None,
        };
        let server = server_input
            .map(|width| -> Result<ServerModels> {
                let mut rng = stream(seed, "init/DS");
                let discriminator = MlpModel::xavier(&dims(width, &arch.shared_hidden, 1), hidden, Activation::Sigmoid, &mut rng)?;
                Ok(ServerModels { opt: adam(&discriminator), discriminator })
            })
            .transpose()?;

        let latent = match config.topology {
            Topology::LocalOnly => (0..views.len()).map(|p| stream(seed, &format!("latent/{p}"))).collect(),
            _ => vec![stream(seed, "latent")],
        };
        Ok(Self {
            config: config.clone(),
            parties,
            server,
            n_samples,
            n_attributes,
            steps,
            iteration: 0,
            log: MessageLog::new(config.record_payloads),
            latent,
            batch_rng: stream(seed, "batch"),
        })
    }

    pub fn n_parties(&self) -> usize {
        self.parties.len()
    }

    pub fn shares_latent(&self) -> bool {
        self.latent.len() == 1
    }

    /// Next `rows × l` standard-normal latent batch for every party. In the
    /// shared-latent topologies every party receives the same matrix.
    pub fn broadcast_latent(&mut self, rows: usize) -> Vec<Array2<f64>> {
        let l = self.config.latent_dim;
        let draw = |rng: &mut StreamRng| Array2::from_shape_simple_fn((rows, l), || StandardNormal.sample(rng));
        if let [shared] = self.latent.as_mut_slice() {
            let z = draw(shared);
            vec![z; self.parties.len()]
        } else {
            self.latent.iter_mut().map(draw).collect()
        }
    }

    /// All generators, grouped by party.
    pub fn generator_bank(&self) -> super::GeneratorBank {
        super::GeneratorBank {
            topology: self.config.topology,
            latent_dim: self.config.latent_dim,
            n_attributes: self.n_attributes,
            steps: self.steps,
            parties: self
                .parties
                .iter()
                .map(|p| super::PartyGenerators { attributes: p.attributes.clone(), generators: p.generators.clone() })
                .collect(),
        }
    }
}

/// Rows `batch` of one party's columns, as `B × |A_i| × T`.
pub(crate) fn batch_of(view: &PartyView, batch: &[usize]) -> Array3<f64> {
    view.data.select(ndarray::Axis(0), batch)
}
