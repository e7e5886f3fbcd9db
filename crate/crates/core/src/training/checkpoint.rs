//! Bridges live run state (networks, optimizer velocities, RNG positions,
//! loss history, ledgers) to the on-disk container. Restores refuse schemas
//! that differ from the one being rebuilt, and RNG word positions travel as
//! decimal strings because u128 does not survive JSON numbers.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{S2iError, S2iResult};
use crate::io::checkpoint::{fnv1a64, read_checkpoint, write_checkpoint, CheckpointData, OPT_PREFIX};
use crate::losses::AdvLossHistory;
use crate::models::ModelSchema;
use crate::nn::net::Network;
use crate::nn::optim::SgdMomentum;
use crate::nn::rng::RngState;
use crate::nn::tensor::Tensor;
use crate::training::ledger::RunLedger;
use crate::training::TrainConfig;

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct RunMeta {
    /// "ae" or "gan".
    pub phase: String,
    pub config: TrainConfig,
    /// Completed 1-indexed iterations.
    pub iteration: u64,
    /// Epoch the run is inside (1-indexed).
    pub epoch: u64,
    pub seed: u64,
    /// ChaCha word positions, decimal, in stream order init/dropout/data_order.
    pub rng_pos: [String; 3],
    pub adv_history: Option<AdvLossHistory>,
    /// First-epoch mean losses backing the divergence guard.
    pub guard_ae: Option<f64>,
    pub guard_pixel: Option<f64>,
    pub guard_d: Option<f64>,
    /// Sample order of the epoch in progress and the next batch offset into
    /// it, so a mid-epoch restore replays the exact remaining batches.
    pub epoch_order: Vec<usize>,
    pub next_batch: usize,
    pub ledger: RunLedger,
}

impl RunMeta {
    pub fn rng_positions(&self) -> S2iResult<[u128; 3]> {
        let mut out = [0u128; 3];
        for (i, s) in self.rng_pos.iter().enumerate() {
            out[i] = s
                .parse::<u128>()
                .map_err(|_| S2iError::format("meta", format!("bad rng position {s}")))?;
        }
        Ok(out)
    }

    pub fn set_rng(&mut self, rng: &RngState) {
        let pos = rng.positions();
        self.rng_pos = [pos[0].to_string(), pos[1].to_string(), pos[2].to_string()];
    }

    pub fn restore_rng(&self) -> S2iResult<RngState> {
        Ok(RngState::restore(self.seed, self.rng_positions()?))
    }
}

fn push_net_tensors(net: &mut Network<f32>, tensors: &mut Vec<(String, Vec<usize>, Vec<f32>)>) {
    net.visit_params(&mut |name, p, _| {
        tensors.push((name, p.dims().to_vec(), p.data().to_vec()));
    });
    net.visit_state(&mut |name, s| {
        tensors.push((name, s.dims().to_vec(), s.data().to_vec()));
    });
}

fn push_velocities(
    key: &str,
    opt: &SgdMomentum<f32>,
    tensors: &mut Vec<(String, Vec<usize>, Vec<f32>)>,
) {
    for (i, v) in opt.velocities().iter().enumerate() {
        tensors.push((
            format!("{OPT_PREFIX}{key}/{i:04}"),
            v.dims().to_vec(),
            v.data().to_vec(),
        ));
    }
}

/// Writes the complete run state. Parameter and BN-state tensor names come
/// from the networks' own visit names; velocities go under `opt/{key}/NNNN`.
pub fn save_run_state(
    path: &Path,
    schema: &ModelSchema,
    meta: &RunMeta,
    nets: &mut [&mut Network<f32>],
    opts: &[(&str, &SgdMomentum<f32>)],
) -> S2iResult<()> {
    let mut tensors = Vec::new();
    for net in nets.iter_mut() {
        push_net_tensors(net, &mut tensors);
    }
    for (key, opt) in opts {
        push_velocities(key, opt, &mut tensors);
    }
    let data = CheckpointData {
        schema_json: schema.canonical_json(),
        meta_json: serde_json::to_string(meta)
            .map_err(|e| S2iError::format("meta", e.to_string()))?,
        tensors,
    };
    write_checkpoint(path, &data)
}

/// Convenience wrapper for the autoencoder phase.
pub fn save_ae_state(
    path: &Path,
    schema: &ModelSchema,
    meta: &RunMeta,
    enc: &mut Network<f32>,
    dec: &mut Network<f32>,
    opt_enc: &SgdMomentum<f32>,
    opt_dec: &SgdMomentum<f32>,
) -> S2iResult<()> {
    save_run_state(
        path,
        schema,
        meta,
        &mut [enc, dec],
        &[("a_enc", opt_enc), ("a_dec", opt_dec)],
    )
}

/// Convenience wrapper for the adversarial phase. The frozen encoder is part
/// of the state so a restore reproduces embeddings bit for bit.
#[allow(clippy::too_many_arguments)]
pub fn save_gan_state(
    path: &Path,
    schema: &ModelSchema,
    meta: &RunMeta,
    enc: &mut Network<f32>,
    gen: &mut Network<f32>,
    disc_trunk: &mut Network<f32>,
    disc_head: &mut Network<f32>,
    opt_g: &SgdMomentum<f32>,
    opt_dt: &SgdMomentum<f32>,
    opt_dh: &SgdMomentum<f32>,
) -> S2iResult<()> {
    save_run_state(
        path,
        schema,
        meta,
        &mut [enc, gen, disc_trunk, disc_head],
        &[("gen", opt_g), ("disc_trunk", opt_dt), ("disc_head", opt_dh)],
    )
}

/// Reads a run-state file and parses its metadata. Schema validation happens
/// in `restore_into` against the schema the caller rebuilt.
pub fn load_run_state(path: &Path) -> S2iResult<(CheckpointData, RunMeta)> {
    let data = read_checkpoint(path)?;
    let meta: RunMeta = serde_json::from_str(&data.meta_json)
        .map_err(|e| S2iError::format(path.display().to_string(), format!("bad meta: {e}")))?;
    Ok((data, meta))
}

/// Rebuilds the autoencoder pair from an "ae"-phase file. The init draws used
/// for construction are throwaway; every parameter is overwritten.
pub fn load_ae_nets(path: &Path) -> S2iResult<(ModelSchema, Network<f32>, Network<f32>, RunMeta)> {
    let (data, meta) = load_run_state(path)?;
    if meta.phase != "ae" {
        return Err(S2iError::format(
            path.display().to_string(),
            format!("expected an ae-phase checkpoint, found phase {:?}", meta.phase),
        ));
    }
    let schema = ModelSchema::from_json(&data.schema_json)?;
    let mut rng = RngState::new(meta.seed);
    let mut enc = crate::models::build_network::<f32>(
        "a_enc",
        &schema.audio_encoder,
        rng.stream(crate::nn::rng::StreamId::Init),
    )?;
    let mut dec = crate::models::build_network::<f32>(
        "a_dec",
        &schema.audio_decoder,
        rng.stream(crate::nn::rng::StreamId::Init),
    )?;
    let c = &meta.config;
    let mut opt_e = SgdMomentum::<f32>::new(c.lr_ae, c.momentum_ae, 0.0);
    let mut opt_d = SgdMomentum::<f32>::new(c.lr_ae, c.momentum_ae, 0.0);
    restore_into(
        &data,
        &schema,
        &mut [&mut enc, &mut dec],
        &mut [("a_enc", &mut opt_e), ("a_dec", &mut opt_d)],
    )?;
    Ok((schema, enc, dec, meta))
}

/// Rebuilds every adversarial-phase network from a "gan"-phase file.
pub struct GanState {
    pub schema: ModelSchema,
    pub enc: Network<f32>,
    pub gen: Network<f32>,
    pub disc: crate::models::Discriminator<f32>,
    pub opt_g: SgdMomentum<f32>,
    pub opt_dt: SgdMomentum<f32>,
    pub opt_dh: SgdMomentum<f32>,
    pub meta: RunMeta,
}

pub fn load_gan_nets(path: &Path) -> S2iResult<GanState> {
    let (data, meta) = load_run_state(path)?;
    if meta.phase != "gan" {
        return Err(S2iError::format(
            path.display().to_string(),
            format!("expected a gan-phase checkpoint, found phase {:?}", meta.phase),
        ));
    }
    let schema = ModelSchema::from_json(&data.schema_json)?;
    let mut rng = RngState::new(meta.seed);
    let init = crate::nn::rng::StreamId::Init;
    let mut enc =
        crate::models::build_network::<f32>("a_enc", &schema.audio_encoder, rng.stream(init))?;
    let mut gen =
        crate::models::build_network::<f32>("gen", &schema.generator, rng.stream(init))?;
    let mut disc = crate::models::Discriminator::<f32>::from_schema(&schema, rng.stream(init))?;
    let c = &meta.config;
    let mut opt_g = SgdMomentum::<f32>::new(c.lr_gan, c.momentum_gan, 0.0);
    let mut opt_dt = SgdMomentum::<f32>::new(c.lr_gan, c.momentum_gan, 0.0);
    let mut opt_dh = SgdMomentum::<f32>::new(c.lr_gan, c.momentum_gan, 0.0);
    restore_into(
        &data,
        &schema,
        &mut [&mut enc, &mut gen, &mut disc.trunk, &mut disc.head],
        &mut [
            ("gen", &mut opt_g),
            ("disc_trunk", &mut opt_dt),
            ("disc_head", &mut opt_dh),
        ],
    )?;
    Ok(GanState {
        schema,
        enc,
        gen,
        disc,
        opt_g,
        opt_dt,
        opt_dh,
        meta,
    })
}

/// Copies saved tensors back into networks and optimizers. Every stored
/// tensor must land somewhere and every destination must be filled, so a
/// partial or mismatched file fails loudly instead of half-restoring.
pub fn restore_into(
    data: &CheckpointData,
    schema: &ModelSchema,
    nets: &mut [&mut Network<f32>],
    opts: &mut [(&str, &mut SgdMomentum<f32>)],
) -> S2iResult<()> {
    let expected = schema.canonical_json();
    if data.schema_json != expected {
        return Err(S2iError::format(
            "checkpoint",
            format!(
                "schema hash {:016x} does not match expected {:016x}; refusing to restore",
                data.schema_hash(),
                fnv1a64(expected.as_bytes())
            ),
        ));
    }

    let mut by_name: HashMap<&str, (&[usize], &[f32])> = HashMap::new();
    for (name, dims, vals) in &data.tensors {
        by_name.insert(name.as_str(), (dims.as_slice(), vals.as_slice()));
    }
    let mut consumed: HashSet<String> = HashSet::new();

    for net in nets.iter_mut() {
        let mut err: Option<S2iError> = None;
        net.visit_params(&mut |name, p, _| {
            if err.is_some() {
                return;
            }
            match by_name.get(name.as_str()) {
                Some((dims, vals)) if *dims == p.dims() => {
                    p.data_mut().copy_from_slice(vals);
                    consumed.insert(name);
                }
                Some((dims, _)) => {
                    err = Some(S2iError::shape(
                        format!("restore {name}"),
                        format!("{:?}", p.dims()),
                        format!("{dims:?}"),
                    ));
                }
                None => {
                    err = Some(S2iError::format(
                        "checkpoint",
                        format!("missing tensor {name}"),
                    ));
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        let mut err: Option<S2iError> = None;
        net.visit_state(&mut |name, s| {
            if err.is_some() {
                return;
            }
            match by_name.get(name.as_str()) {
                Some((dims, vals)) if *dims == s.dims() => {
                    s.data_mut().copy_from_slice(vals);
                    consumed.insert(name);
                }
                Some((dims, _)) => {
                    err = Some(S2iError::shape(
                        format!("restore {name}"),
                        format!("{:?}", s.dims()),
                        format!("{dims:?}"),
                    ));
                }
                None => {
                    err = Some(S2iError::format(
                        "checkpoint",
                        format!("missing tensor {name}"),
                    ));
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }

    for (key, opt) in opts.iter_mut() {
        let prefix = format!("{OPT_PREFIX}{key}/");
        let mut indexed: Vec<(usize, &str)> = data
            .tensors
            .iter()
            .filter(|(name, _, _)| name.starts_with(&prefix))
            .map(|(name, _, _)| {
                name[prefix.len()..]
                    .parse::<usize>()
                    .map(|i| (i, name.as_str()))
                    .map_err(|_| {
                        S2iError::format("checkpoint", format!("bad velocity name {name}"))
                    })
            })
            .collect::<S2iResult<_>>()?;
        indexed.sort_unstable();
        let mut vels = Vec::with_capacity(indexed.len());
        for (want, (got, name)) in indexed.iter().enumerate() {
            if *got != want {
                return Err(S2iError::format(
                    "checkpoint",
                    format!("velocity index gap for {key}: expected {want}, found {got}"),
                ));
            }
            let (dims, vals) = by_name[name];
            vels.push(Tensor::from_vec(dims, vals.to_vec())?);
            consumed.insert(name.to_string());
        }
        opt.restore_velocities(vels);
    }

    if consumed.len() != data.tensors.len() {
        let extra: Vec<&str> = data
            .tensors
            .iter()
            .map(|(n, _, _)| n.as_str())
            .filter(|n| !consumed.contains(*n))
            .collect();
        return Err(S2iError::format(
            "checkpoint",
            format!("unconsumed tensors: {extra:?}"),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_translator, Profile, SchemaOptions};
    use crate::nn::rng::StreamId;

    fn tiny_schema(f: usize) -> ModelSchema {
        ModelSchema::new(Profile::Tiny, f, SchemaOptions::default()).unwrap()
    }

    fn meta_stub(seed: u64, rng: &RngState) -> RunMeta {
        let mut meta = RunMeta {
            phase: "gan".into(),
            config: TrainConfig::tiny(seed),
            iteration: 3,
            epoch: 1,
            seed,
            rng_pos: ["0".into(), "0".into(), "0".into()],
            adv_history: Some(AdvLossHistory::new(5).unwrap()),
            guard_ae: None,
            guard_pixel: Some(0.25),
            guard_d: None,
            epoch_order: vec![2, 0, 1],
            next_batch: 1,
            ledger: RunLedger::default(),
        };
        meta.set_rng(rng);
        meta
    }

    #[test]
    fn round_trip_restores_params_velocities_and_meta() {
        let schema = tiny_schema(8);
        let mut rng = RngState::new(11);
        let mut nets = build_translator::<f32>(&schema, rng.stream(StreamId::Init)).unwrap();
        let mut opt = SgdMomentum::<f32>::new(0.1, 0.5, 0.0);
        // One fake step so velocities exist.
        nets.generator.visit_params(&mut |_, _, g| g.fill(0.01));
        opt.step(&mut nets.generator).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.s2ic");
        let meta = meta_stub(11, &rng);
        save_run_state(
            &path,
            &schema,
            &meta,
            &mut [&mut nets.generator],
            &[("gen", &opt)],
        )
        .unwrap();

        let want_bytes = nets.generator.param_bytes();
        let want_vel = opt.velocities()[0].data().to_vec();

        let mut rng2 = RngState::new(999);
        let mut fresh = build_translator::<f32>(&schema, rng2.stream(StreamId::Init)).unwrap();
        let mut opt2 = SgdMomentum::<f32>::new(0.1, 0.5, 0.0);
        assert_ne!(fresh.generator.param_bytes(), want_bytes);

        let (data, got_meta) = load_run_state(&path).unwrap();
        restore_into(
            &data,
            &schema,
            &mut [&mut fresh.generator],
            &mut [("gen", &mut opt2)],
        )
        .unwrap();

        assert_eq!(fresh.generator.param_bytes(), want_bytes);
        assert_eq!(opt2.velocities()[0].data(), &want_vel[..]);
        assert_eq!(got_meta.iteration, 3);
        assert_eq!(got_meta.epoch_order, vec![2, 0, 1]);
        assert_eq!(got_meta.rng_positions().unwrap(), rng.positions());
        let restored = got_meta.restore_rng().unwrap();
        assert_eq!(restored.positions(), rng.positions());
    }

    #[test]
    fn restore_rejects_different_embedding_width() {
        let schema8 = tiny_schema(8);
        let schema16 = tiny_schema(16);
        let mut rng = RngState::new(3);
        let mut nets = build_translator::<f32>(&schema8, rng.stream(StreamId::Init)).unwrap();
        let opt = SgdMomentum::<f32>::new(0.1, 0.5, 0.0);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.s2ic");
        let meta = meta_stub(3, &rng);
        save_run_state(
            &path,
            &schema8,
            &meta,
            &mut [&mut nets.generator],
            &[("gen", &opt)],
        )
        .unwrap();

        let mut rng2 = RngState::new(3);
        let mut wide = build_translator::<f32>(&schema16, rng2.stream(StreamId::Init)).unwrap();
        let mut opt2 = SgdMomentum::<f32>::new(0.1, 0.5, 0.0);
        let (data, _) = load_run_state(&path).unwrap();
        let err = restore_into(
            &data,
            &schema16,
            &mut [&mut wide.generator],
            &mut [("gen", &mut opt2)],
        )
        .unwrap_err();
        assert!(err.to_string().contains("refusing to restore"), "{err}");
    }

    #[test]
    fn restore_rejects_missing_tensor() {
        let schema = tiny_schema(8);
        let mut rng = RngState::new(5);
        let mut nets = build_translator::<f32>(&schema, rng.stream(StreamId::Init)).unwrap();
        let opt = SgdMomentum::<f32>::new(0.1, 0.5, 0.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.s2ic");
        let meta = meta_stub(5, &rng);
        save_run_state(
            &path,
            &schema,
            &meta,
            &mut [&mut nets.generator],
            &[("gen", &opt)],
        )
        .unwrap();

        let (mut data, _) = load_run_state(&path).unwrap();
        data.tensors.pop();
        let mut rng2 = RngState::new(6);
        let mut fresh = build_translator::<f32>(&schema, rng2.stream(StreamId::Init)).unwrap();
        let mut opt2 = SgdMomentum::<f32>::new(0.1, 0.5, 0.0);
        let err = restore_into(
            &data,
            &schema,
            &mut [&mut fresh.generator],
            &mut [("gen", &mut opt2)],
        )
        .unwrap_err();
        assert!(err.to_string().contains("missing tensor"), "{err}");
    }
}
