//! Finite-difference verification of every gradient a federation computes,
//! including the generator path that runs through the extractors and the
//! server discriminator.

use ndarray::{s, Array2};

use super::config::Topology;
use super::protocol::columns;
use super::state::{batch_of, FederationState};
use super::Result;
use crate::data::PartyView;
use crate::{Gradients, Mlp};

/// `‖a − n‖₂ / max(‖a‖₂, ‖n‖₂)` over one parameter tensor. Entries far
/// below the tensor's scale are dominated by the `ε·|L|/h` rounding floor of
/// the central difference, so they are judged against the tensor norm rather
/// than individually.
pub fn tensor_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied())).max(1e-12);
    diff / scale
}

/// Worst per-tensor relative error per model family, and the number of scalar
/// parameters compared.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FederationGradReport {
    pub generators: f64,
    pub discriminators: f64,
    pub extractors: f64,
    pub server: f64,
    pub checked: usize,
}

impl FederationGradReport {
    pub fn max(&self) -> f64 {
        self.generators.max(self.discriminators).max(self.extractors).max(self.server)
    }
}

#[derive(Debug, Clone, Copy)]
enum Target {
    Generator(usize, usize),
    Discriminator(usize, usize),
    Extractor(usize),
    Server,
}

fn model_mut(state: &mut FederationState, target: Target) -> &mut Mlp {
    match target {
        Target::Generator(p, j) => &mut state.parties[p].generators[j],
        Target::Discriminator(p, j) => &mut state.parties[p].discriminators[j],
        Target::Extractor(p) => state.parties[p].extractor.as_mut().expect("extractor present"),
        Target::Server => &mut state.server.as_mut().expect("server present").discriminator,
    }
}

fn min_kink(model: &Mlp, input: &Array2<f64>) -> Result<f64> {
    Ok(model.forward(input)?.min_kink_distance(model))
}

impl FederationState {
    /// Smallest distance of any kinked pre-activation from its kink over
    /// both passes; central differences are meaningless when this is not
    /// comfortably above the step.
    pub fn kink_margin(&self, views: &[PartyView], batch: &[usize], zs_d: &[Array2<f64>], zs_g: &[Array2<f64>]) -> Result<f64> {
        let mut margin = f64::INFINITY;
        let real: Vec<Vec<Array2<f64>>> = views
            .iter()
            .map(|v| {
                let b = batch_of(v, batch);
                (0..v.n_attributes()).map(|j| b.slice(s![.., j, ..]).to_owned()).collect()
            })
            .collect();
        let mut raw_sets = vec![real];
        for zs in [zs_d, zs_g] {
            let fake = self.synthetic(zs)?;
            for (party, traces) in self.parties.iter().zip(&fake) {
                for (g, (t, _)) in party.generators.iter().zip(traces) {
                    margin = margin.min(t.min_kink_distance(g));
                }
            }
            raw_sets.push(fake.into_iter().map(|p| p.into_iter().map(|(_, x)| x).collect()).collect());
        }
        for blocks in &raw_sets {
            let mut feats = Vec::new();
            for (p, party) in self.parties.iter().enumerate() {
                for (d, x) in party.discriminators.iter().zip(&blocks[p]) {
                    margin = margin.min(min_kink(d, x)?);
                }
                if let Some(fe) = &party.extractor {
                    let input = columns(&blocks[p]);
                    margin = margin.min(min_kink(fe, &input)?);
                    feats.push(fe.predict(&input)?);
                }
            }
            if let Some(server) = &self.server {
                let input = match self.config.topology {
                    Topology::Centralized => self.global_columns(blocks),
                    _ => columns(&feats),
                };
                margin = margin.min(min_kink(&server.discriminator, &input)?);
            }
        }
        Ok(margin)
    }

    /// Compares every analytic gradient of [`Self::discriminator_pass`] and
    /// [`Self::generator_pass`] with central differences of the matching
    /// loss, step `h`, one weight matrix or bias vector at a time. Each model is checked against the loss that trains it.
    pub fn gradient_check(
        &self,
        views: &[PartyView],
        batch: &[usize],
        zs_d: &[Array2<f64>],
        zs_g: &[Array2<f64>],
        h: f64,
    ) -> Result<FederationGradReport> {
        let (_, d_grads, _) = self.discriminator_pass(views, batch, zs_d)?;
        let (_, g_grads, _) = self.generator_pass(zs_g)?;

        let mut jobs: Vec<(Target, &Gradients)> = Vec::new();
        for (p, party) in self.parties.iter().enumerate() {
            for j in 0..party.generators.len() {
                jobs.push((Target::Generator(p, j), &g_grads.local[p][j]));
                jobs.push((Target::Discriminator(p, j), &d_grads.local[p][j]));
            }
            if let Some(g) = &d_grads.extractor[p] {
                jobs.push((Target::Extractor(p), g));
            }
        }
        if let Some(g) = &d_grads.server {
            jobs.push((Target::Server, g));
        }

        let loss = |state: &FederationState, target: Target| -> Result<f64> {
            Ok(match target {
                Target::Generator(p, j) => state.generator_pass(zs_g)?.0.local[p][j],
                Target::Discriminator(p, j) => state.discriminator_pass(views, batch, zs_d)?.0.local[p][j],
                Target::Extractor(p) => state.discriminator_pass(views, batch, zs_d)?.0.extractor[p],
                Target::Server => state.discriminator_pass(views, batch, zs_d)?.0.server.expect("server loss"),
            })
        };

        let mut probe = self.clone();
        let mut report = FederationGradReport::default();
        for (target, grads) in jobs {
            let mut worst = 0.0_f64;
            for (li, lg) in grads.layers.iter().enumerate() {
                let analytic: Vec<f64> = lg.iter().copied().collect();
                let mut numeric = Vec::with_capacity(analytic.len());
                for k in 0..analytic.len() {
                    let orig = *slot(&mut probe, target, li, k);
                    *slot(&mut probe, target, li, k) = orig + h;
                    let plus = loss(&probe, target)?;
                    *slot(&mut probe, target, li, k) = orig - h;
                    let minus = loss(&probe, target)?;
                    *slot(&mut probe, target, li, k) = orig;
                    numeric.push((plus - minus) / (2.0 * h));
                }
                report.checked += analytic.len();
                let n_weight = lg.weight.len();
                worst = worst
                    .max(tensor_error(&analytic[..n_weight], &numeric[..n_weight]))
                    .max(tensor_error(&analytic[n_weight..], &numeric[n_weight..]));
            }
            let slot = match target {
                Target::Generator(..) => &mut report.generators,
                Target::Discriminator(..) => &mut report.discriminators,
                Target::Extractor(_) => &mut report.extractors,
                Target::Server => &mut report.server,
            };
            *slot = slot.max(worst);
        }
        Ok(report)
    }
}

/// Parameter `k` of layer `li` in gradient iteration order (weights
/// row-major, then bias).
fn slot(state: &mut FederationState, target: Target, li: usize, k: usize) -> &mut f64 {
    let layer = &mut model_mut(state, target).layers_mut()[li];
    let n_weight = layer.weight.len();
    if k < n_weight {
        let cols = layer.weight.ncols();
        &mut layer.weight[[k / cols, k % cols]]
    } else {
        &mut layer.bias[k - n_weight]
    }
}
