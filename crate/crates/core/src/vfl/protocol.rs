//! The two phases of one training iteration.
//!
//! Each phase first computes every loss and gradient from the current
//! parameters (the `*_pass` functions, which mutate nothing) and only then
//! applies the mechanism and the optimizer updates.

use ndarray::{concatenate, s, Array2, Axis};

use super::config::{GeneratorLoss, ExtractorLoss, Topology};
use super::messages::{Direction, MessageKind, Phase};
use super::state::{batch_of, FederationState};
use super::{Result, VflError};
use crate::data::PartyView;
use crate::dp::perturb_first_layer_in_place;
use crate::nn::mean_log;
use crate::{Gradients, Mlp, Trace};

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorLosses {
    /// `L_Dij`, grouped by party.
    pub local: Vec<Vec<f64>>,
    /// `L_DS` (vfl) or the central discriminator loss (centralized).
    pub server: Option<f64>,
    /// `L_FEi` per party (vfl only).
    pub extractor: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorLosses {
    /// `L_Gij`, grouped by party.
    pub local: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorGrads {
    pub local: Vec<Vec<Gradients>>,
    pub extractor: Vec<Option<Gradients>>,
    pub server: Option<Gradients>,
}

#[derive(Debug, Clone)]
pub struct GeneratorGrads {
    pub local: Vec<Vec<Gradients>>,
}

/// Payload crossing the party/server boundary, recorded by the caller.
#[derive(Debug, Clone)]
pub struct Outgoing {
    pub phase: Phase,
    pub direction: Direction,
    pub party: usize,
    pub kind: MessageKind,
    pub payload: Array2<f64>,
}

pub(super) fn columns(parts: &[Array2<f64>]) -> Array2<f64> {
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    concatenate(Axis(1), &views).expect("equal row counts")
}

pub(super) fn split_columns(m: &Array2<f64>, widths: &[usize]) -> Vec<Array2<f64>> {
    let mut start = 0;
    widths
        .iter()
        .map(|&w| {
            let part = m.slice(s![.., start..start + w]).to_owned();
            start += w;
            part
        })
        .collect()
}

/// `−(E[log D(x)] + E[log(1 − D(x̃))])` with its parameter gradient and the
/// traces and output gradients of both sides.
struct Discrimination {
    loss: f64,
    grads: Gradients,
    real_trace: Trace,
    fake_trace: Trace,
    real_out_grad: Array2<f64>,
    fake_out_grad: Array2<f64>,
}

fn discriminate(model: &Mlp, real: &Array2<f64>, fake: &Array2<f64>) -> Result<Discrimination> {
    let real_trace = model.forward(real)?;
    let fake_trace = model.forward(fake)?;
    let (lr, gr) = mean_log(real_trace.output(), false, -1.0);
    let (lf, gf) = mean_log(fake_trace.output(), true, -1.0);
    let (mut grads, _) = model.backward(&real_trace, &gr)?;
    let (fake_grads, _) = model.backward(&fake_trace, &gf)?;
    grads.add_assign(&fake_grads)?;
    Ok(Discrimination { loss: -(lr + lf), grads, real_trace, fake_trace, real_out_grad: gr, fake_out_grad: gf })
}

/// Generator-side term on discriminator outputs `probs`, weighted by `w`.
/// Returns the unweighted value and the weighted gradient.
fn generator_term(probs: &Array2<f64>, kind: GeneratorLoss, w: f64) -> (f64, Array2<f64>) {
    match kind {
        GeneratorLoss::Saturating => mean_log(probs, true, w),
        GeneratorLoss::NonSaturating => {
            let (v, g) = mean_log(probs, false, -w);
            (-v, g)
        }
    }
}

fn attribute_block(batch: &ndarray::Array3<f64>, j: usize) -> Array2<f64> {
    batch.slice(s![.., j, ..]).to_owned()
}

impl FederationState {
    fn server_weight(&self) -> f64 {
        match self.config.topology {
            Topology::Vfl => self.config.beta1,
            Topology::Centralized => self.config.lambda,
            Topology::LocalOnly => 0.0,
        }
    }

    /// Synthetic attributes `G_ij(z_i)` for every party.
    pub(super) fn synthetic(&self, zs: &[Array2<f64>]) -> Result<Vec<Vec<(Trace, Array2<f64>)>>> {
        self.parties
            .iter()
            .zip(zs)
            .map(|(p, z)| {
                p.generators
                    .iter()
                    .map(|g| {
                        let t = g.forward(z)?;
                        let out = t.output().clone();
                        Ok((t, out))
                    })
                    .collect()
            })
            .collect()
    }

    /// Raw columns in global attribute order.
    pub(super) fn global_columns(&self, per_party: &[Vec<Array2<f64>>]) -> Array2<f64> {
        let mut slots: Vec<Option<&Array2<f64>>> = vec![None; self.n_attributes];
        for (p, blocks) in self.parties.iter().zip(per_party) {
            for (&a, b) in p.attributes.iter().zip(blocks) {
                slots[a] = Some(b);
            }
        }
        columns(&slots.into_iter().map(|b| b.expect("complete partition").clone()).collect::<Vec<_>>())
    }

    fn split_global(&self, m: &Array2<f64>) -> Vec<Vec<Array2<f64>>> {
        let t = self.steps;
        self.parties
            .iter()
            .map(|p| p.attributes.iter().map(|&a| m.slice(s![.., a * t..(a + 1) * t]).to_owned()).collect())
            .collect()
    }

    /// Losses and gradients of the discriminator phase on `batch` with latents
    /// `zs`. Mutates nothing.
    pub fn discriminator_pass(
        &self,
        views: &[PartyView],
        batch: &[usize],
        zs: &[Array2<f64>],
    ) -> Result<(DiscriminatorLosses, DiscriminatorGrads, Vec<Outgoing>)> {
        let fake = self.synthetic(zs)?;
        let real: Vec<Vec<Array2<f64>>> = views
            .iter()
            .map(|v| {
                let b = batch_of(v, batch);
                (0..v.n_attributes()).map(|j| attribute_block(&b, j)).collect()
            })
            .collect();
        let fake_blocks: Vec<Vec<Array2<f64>>> = fake.iter().map(|p| p.iter().map(|(_, x)| x.clone()).collect()).collect();

        let mut losses = DiscriminatorLosses { local: Vec::new(), server: None, extractor: Vec::new() };
        let mut grads = DiscriminatorGrads { local: Vec::new(), extractor: vec![None; self.parties.len()], server: None };
        let mut outgoing = Vec::new();

        for (p, party) in self.parties.iter().enumerate() {
            let mut l = Vec::new();
            let mut g = Vec::new();
            for (j, d) in party.discriminators.iter().enumerate() {
                let r = discriminate(d, &real[p][j], &fake_blocks[p][j])?;
                l.push(r.loss);
                g.push(r.grads);
            }
            losses.local.push(l);
            grads.local.push(g);
        }

        match (self.config.topology, &self.server) {
            (Topology::Vfl, Some(server)) => {
                let mut real_traces = Vec::new();
                let mut fake_traces = Vec::new();
                let mut real_feats = Vec::new();
                let mut fake_feats = Vec::new();
                for (p, party) in self.parties.iter().enumerate() {
                    let fe = party.extractor.as_ref().expect("vfl parties have extractors");
                    let rt = fe.forward(&columns(&real[p]))?;
                    let ft = fe.forward(&columns(&fake_blocks[p]))?;
                    for payload in [rt.output(), ft.output()] {
                        outgoing.push(Outgoing {
                            phase: Phase::Discriminator,
                            direction: Direction::PartyToServer,
                            party: p,
                            kind: MessageKind::Feature,
                            payload: payload.clone(),
                        });
                    }
                    real_feats.push(rt.output().clone());
                    fake_feats.push(ft.output().clone());
                    real_traces.push(rt);
                    fake_traces.push(ft);
                }
                let widths: Vec<usize> = real_feats.iter().map(|f| f.ncols()).collect();
                let ds = discriminate(&server.discriminator, &columns(&real_feats), &columns(&fake_feats))?;
                losses.server = Some(ds.loss);

                let beta2 = self.config.beta2;
                let (fe_loss, real_grad, fake_grad) = match self.config.extractor_loss {
                    ExtractorLoss::Literal => {
                        let (v, g) = mean_log(ds.fake_trace.output(), true, beta2);
                        let dfake = server.discriminator.input_gradient(&ds.fake_trace, &g)?;
                        (beta2 * v, None, dfake)
                    }
                    ExtractorLoss::SharedDiscriminator => {
                        let dreal = server.discriminator.input_gradient(&ds.real_trace, &(&ds.real_out_grad * beta2))?;
                        let dfake = server.discriminator.input_gradient(&ds.fake_trace, &(&ds.fake_out_grad * beta2))?;
                        (beta2 * ds.loss, Some(dreal), dfake)
                    }
                };
                grads.server = Some(ds.grads);

                let fake_slices = split_columns(&fake_grad, &widths);
                let real_slices = real_grad.map(|g| split_columns(&g, &widths));
                for (p, party) in self.parties.iter().enumerate() {
                    losses.extractor.push(fe_loss);
                    let fe = party.extractor.as_ref().expect("vfl parties have extractors");
                    let mut send = |payload: &Array2<f64>| {
                        outgoing.push(Outgoing {
                            phase: Phase::Discriminator,
                            direction: Direction::ServerToParty,
                            party: p,
                            kind: MessageKind::FeatureGrad,
                            payload: payload.clone(),
                        })
                    };
                    send(&fake_slices[p]);
                    if let Some(r) = &real_slices {
                        send(&r[p]);
                    }
                    if party.extractor_opt.is_none() {
                        continue;
                    }
                    let (mut g, _) = fe.backward(&fake_traces[p], &fake_slices[p])?;
                    if let Some(r) = &real_slices {
                        let (gr, _) = fe.backward(&real_traces[p], &r[p])?;
                        g.add_assign(&gr)?;
                    }
                    grads.extractor[p] = Some(g);
                }
            }
            (Topology::Centralized, Some(server)) => {
                let dc = discriminate(&server.discriminator, &self.global_columns(&real), &self.global_columns(&fake_blocks))?;
                losses.server = Some(dc.loss);
                grads.server = Some(dc.grads);
            }
            _ => {}
        }
        Ok((losses, grads, outgoing))
    }

    /// Losses and gradients of the generator phase with latents `zs`.
    /// Mutates nothing.
    pub fn generator_pass(&self, zs: &[Array2<f64>]) -> Result<(GeneratorLosses, GeneratorGrads, Vec<Outgoing>)> {
        let kind = self.config.generator_loss;
        let fake = self.synthetic(zs)?;
        let mut outgoing = Vec::new();

        let mut local_values = Vec::new();
        let mut upstream: Vec<Vec<Array2<f64>>> = Vec::new();
        for (p, party) in self.parties.iter().enumerate() {
            let mut values = Vec::new();
            let mut grads = Vec::new();
            for (j, d) in party.discriminators.iter().enumerate() {
                let trace = d.forward(&fake[p][j].1)?;
                let (v, g) = generator_term(trace.output(), kind, 1.0);
                values.push(v);
                grads.push(d.input_gradient(&trace, &g)?);
            }
            local_values.push(values);
            upstream.push(grads);
        }

        let weight = self.server_weight();
        let mut server_value = 0.0;
        if weight != 0.0 {
            let fake_blocks: Vec<Vec<Array2<f64>>> = fake.iter().map(|p| p.iter().map(|(_, x)| x.clone()).collect()).collect();
            match (self.config.topology, &self.server) {
                (Topology::Vfl, Some(server)) => {
                    let mut traces = Vec::new();
                    let mut feats = Vec::new();
                    for (p, party) in self.parties.iter().enumerate() {
                        let fe = party.extractor.as_ref().expect("vfl parties have extractors");
                        let t = fe.forward(&columns(&fake_blocks[p]))?;
                        outgoing.push(Outgoing {
                            phase: Phase::Generator,
                            direction: Direction::PartyToServer,
                            party: p,
                            kind: MessageKind::Feature,
                            payload: t.output().clone(),
                        });
                        feats.push(t.output().clone());
                        traces.push(t);
                    }
                    let widths: Vec<usize> = feats.iter().map(|f| f.ncols()).collect();
                    let trace = server.discriminator.forward(&columns(&feats))?;
                    let (v, g) = generator_term(trace.output(), kind, weight);
                    server_value = v;
                    let dfeat = server.discriminator.input_gradient(&trace, &g)?;
                    for (p, slice) in split_columns(&dfeat, &widths).into_iter().enumerate() {
                        outgoing.push(Outgoing {
                            phase: Phase::Generator,
                            direction: Direction::ServerToParty,
                            party: p,
                            kind: MessageKind::FeatureGrad,
                            payload: slice.clone(),
                        });
                        let fe = self.parties[p].extractor.as_ref().expect("vfl parties have extractors");
                        let dx = fe.input_gradient(&traces[p], &slice)?;
                        let t = self.steps;
                        for (j, up) in upstream[p].iter_mut().enumerate() {
                            *up += &dx.slice(s![.., j * t..(j + 1) * t]);
                        }
                    }
                }
                (Topology::Centralized, Some(server)) => {
                    let trace = server.discriminator.forward(&self.global_columns(&fake_blocks))?;
                    let (v, g) = generator_term(trace.output(), kind, weight);
                    server_value = v;
                    let dx = server.discriminator.input_gradient(&trace, &g)?;
                    for (p, blocks) in self.split_global(&dx).into_iter().enumerate() {
                        for (up, b) in upstream[p].iter_mut().zip(blocks) {
                            *up += &b;
                        }
                    }
                }
                _ => {}
            }
        }

        let mut losses = GeneratorLosses { local: Vec::new() };
        let mut grads = GeneratorGrads { local: Vec::new() };
        for (p, party) in self.parties.iter().enumerate() {
            losses.local.push(local_values[p].iter().map(|v| v + weight * server_value).collect());
            let g = party
                .generators
                .iter()
                .zip(&fake[p])
                .zip(&upstream[p])
                .map(|((gen, (trace, _)), up)| Ok(gen.backward(trace, up)?.0))
                .collect::<Result<Vec<_>>>()?;
            grads.local.push(g);
        }
        Ok((losses, grads, outgoing))
    }

    fn record(&mut self, outgoing: Vec<Outgoing>) {
        let it = self.iteration;
        for m in outgoing {
            self.log.record(it, m.phase, m.direction, m.party, m.kind, &m.payload);
        }
    }

    fn diverged(&self, what: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
        match values.into_iter().find(|v| !v.is_finite()) {
            Some(v) => Err(VflError::Divergence { iteration: self.iteration, detail: format!("{what} loss is {v}") }),
            None => Ok(()),
        }
    }

    /// Updates every discriminator, extractor and the server model on one
    /// aligned mini-batch. Generators are untouched.
    pub fn discriminator_phase(&mut self, views: &[PartyView], batch: &[usize]) -> Result<DiscriminatorLosses> {
        let zs = self.broadcast_latent(batch.len());
        let (losses, mut grads, outgoing) = self.discriminator_pass(views, batch, &zs)?;
        self.diverged("discriminator", losses.local.iter().flatten().copied().chain(losses.server).chain(losses.extractor.iter().copied()))?;
        self.record(outgoing);

        if let Some(dp) = self.config.dp {
            for (party, g) in self.parties.iter_mut().zip(&mut grads.local) {
                for (noise, gj) in party.discriminator_noise.iter_mut().zip(g.iter_mut()) {
                    perturb_first_layer_in_place(gj, &dp, noise.rng());
                }
            }
            for (party, g) in self.parties.iter_mut().zip(&mut grads.extractor) {
                if let (Some(noise), Some(g)) = (party.extractor_noise.as_mut(), g.as_mut()) {
                    perturb_first_layer_in_place(g, &dp, noise.rng());
                }
            }
        }

        let it = self.iteration;
        let step_err = |e: crate::nn::NnError| VflError::Divergence { iteration: it, detail: e.to_string() };
        for (party, g) in self.parties.iter_mut().zip(&grads.local) {
            for ((d, opt), gj) in party.discriminators.iter_mut().zip(&mut party.discriminator_opt).zip(g) {
                opt.step(d, gj).map_err(step_err)?;
            }
        }
        for (party, g) in self.parties.iter_mut().zip(&grads.extractor) {
            if let (Some(fe), Some(opt), Some(g)) = (party.extractor.as_mut(), party.extractor_opt.as_mut(), g) {
                opt.step(fe, g).map_err(step_err)?;
            }
        }
        if let (Some(server), Some(g)) = (self.server.as_mut(), &grads.server) {
            server.opt.step(&mut server.discriminator, g).map_err(step_err)?;
        }
        Ok(losses)
    }

    /// Updates every generator on a fresh latent batch. Discriminators,
    /// extractors and the server model are untouched.
    pub fn generator_phase(&mut self) -> Result<GeneratorLosses> {
        let zs = self.broadcast_latent(self.config.batch_size);
        let (losses, grads, outgoing) = self.generator_pass(&zs)?;
        self.diverged("generator", losses.local.iter().flatten().copied())?;
        self.record(outgoing);
        let it = self.iteration;
        for (party, g) in self.parties.iter_mut().zip(&grads.local) {
            for ((gen, opt), gj) in party.generators.iter_mut().zip(&mut party.generator_opt).zip(g) {
                opt.step(gen, gj).map_err(|e| VflError::Divergence { iteration: it, detail: e.to_string() })?;
            }
        }
        Ok(losses)
    }

    /// One full iteration: sample an aligned batch, run both phases.
    pub fn step(&mut self, views: &[PartyView]) -> Result<(DiscriminatorLosses, GeneratorLosses)> {
        let batch = crate::data::subsample_batch(self.n_samples, self.config.batch_size, &mut self.batch_rng)?;
        let d = self.discriminator_phase(views, &batch.indices)?;
        let g = self.generator_phase()?;
        self.iteration += 1;
        Ok((d, g))
    }
}
