//! The trainable upsampling network wrapped around the deterministic
//! delay-domain core.
//!
//! Three modules: a 1-D conv stack over the UL PDP that designs the delay
//! mask, the fixed tiling of [`initial_upsample`](super::initial_upsample),
//! and two 2-D conv refinement stacks with additive shortcuts (one on the
//! masked beam/antenna x delay tensor, one on the antenna x frequency tensor
//! after beam expansion and the DFT back to frequency).
//!
//! The mask head is residual in logit space around the reciprocity mask and
//! the last layer of every stack is zero-initialized, so an untrained network
//! reproduces the deterministic core exactly.

use crate::channel::Pdp;
use crate::dsp::{self, CMat};
use crate::error::{Result, SimError};
use crate::numerics::{logit, AdamConfig, AdamState, NodeId, Tape, Tensor};
use crate::upsample::{
    initial_upsample, reciprocity_bpf, RbPrecoders, SampledPrecoders,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HIDDEN_1D: usize = 8;
const KERNEL_1D: usize = 7;
const HIDDEN_2D: usize = 16;
const KERNEL_2D_H: usize = 3;
const KERNEL_2D_W: usize = 7;

/// Mask logits are formed around the reciprocity mask clamped to this margin.
const MASK_CLAMP: f64 = 1e-6;

/// Parameter blocks in tape registration and checkpoint order.
pub const BLOCK_NAMES: [&str; 14] = [
    "bpf_w1", "bpf_b1", "bpf_w2", "bpf_b2", "bd_w1", "bd_b1", "bd_w2", "bd_b2", "bd_scale",
    "af_w1", "af_b1", "af_w2", "af_b2", "af_scale",
];

fn block_shape(name: &str) -> Vec<usize> {
    match name {
        "bpf_w1" => vec![HIDDEN_1D, 1, KERNEL_1D],
        "bpf_b1" => vec![HIDDEN_1D],
        "bpf_w2" => vec![1, HIDDEN_1D, KERNEL_1D],
        "bpf_b2" => vec![1],
        "bd_w1" | "af_w1" => vec![HIDDEN_2D, 2, KERNEL_2D_H, KERNEL_2D_W],
        "bd_b1" | "af_b1" => vec![HIDDEN_2D],
        "bd_w2" | "af_w2" => vec![2, HIDDEN_2D, KERNEL_2D_H, KERNEL_2D_W],
        "bd_b2" | "af_b2" => vec![2],
        "bd_scale" | "af_scale" => vec![1],
        other => unreachable!("unknown block {other}"),
    }
}

/// SRPNet weights as named blocks (see [`BLOCK_NAMES`]).
#[derive(Debug, Clone)]
pub struct SrpnetParams {
    pub blocks: Vec<(String, Tensor)>,
}

impl SrpnetParams {
    /// Training initialization: hidden layers random, last layers and biases
    /// zero, shortcut scales 1 — the network starts at the deterministic core.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = BLOCK_NAMES
            .iter()
            .map(|&name| {
                let shape = block_shape(name);
                let t = match name {
                    "bpf_w1" | "bd_w1" | "af_w1" => random_tensor(&shape, fan_in_bound(&shape), &mut rng),
                    "bd_scale" | "af_scale" => Tensor::from_vec(&shape, vec![1.0]).unwrap(),
                    _ => Tensor::zeros(&shape),
                };
                (name.to_string(), t)
            })
            .collect();
        SrpnetParams { blocks }
    }

    /// Fully random initialization (gradient checks need every block live).
    pub fn init_random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = BLOCK_NAMES
            .iter()
            .map(|&name| {
                let shape = block_shape(name);
                let t = match name {
                    "bd_scale" | "af_scale" => {
                        Tensor::from_vec(&shape, vec![rng.gen_range(0.5..1.5)]).unwrap()
                    }
                    _ if shape.len() == 1 => random_tensor(&shape, 0.1, &mut rng),
                    _ => random_tensor(&shape, fan_in_bound(&shape), &mut rng),
                };
                (name.to_string(), t)
            })
            .collect();
        SrpnetParams { blocks }
    }

    /// Rebuild from checkpoint blocks; validates names, order, and shapes.
    pub fn from_blocks(blocks: Vec<(String, Tensor)>) -> Result<Self> {
        if blocks.len() != BLOCK_NAMES.len() {
            return Err(SimError::Data(format!(
                "expected {} parameter blocks, got {}",
                BLOCK_NAMES.len(),
                blocks.len()
            )));
        }
        for ((name, t), &want) in blocks.iter().zip(&BLOCK_NAMES) {
            if name != want || t.shape != block_shape(want) {
                return Err(SimError::Data(format!(
                    "bad checkpoint block `{name}` {:?}, expected `{want}` {:?}",
                    t.shape,
                    block_shape(want)
                )));
            }
            if !t.is_finite() {
                return Err(SimError::Numerical(format!(
                    "non-finite values in parameter block `{name}`"
                )));
            }
        }
        Ok(SrpnetParams { blocks })
    }

    pub fn tensors(&self) -> Vec<Tensor> {
        self.blocks.iter().map(|(_, t)| t.clone()).collect()
    }
}

fn fan_in_bound(shape: &[usize]) -> f64 {
    // Uniform(+-1/sqrt(fan_in)); fan_in = everything but the output channel.
    let fan_in: usize = shape[1..].iter().product();
    1.0 / (fan_in as f64).sqrt()
}

fn random_tensor(shape: &[usize], bound: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::from_vec(shape, data).unwrap()
}

/// Per-sample constants of the forward graph, precomputed once.
#[derive(Debug, Clone)]
pub struct SrpnetInput {
    /// Tiled delay tensor, `[2, D, N]`.
    pub extended: Tensor,
    /// Normalized UL PDP, `[1, N]` (conv input layout).
    pub pdp_in: Tensor,
    /// Logits of the clamped reciprocity mask, `[N]`.
    pub mask_base: Tensor,
    /// N_a x L beam matrix for beam-domain samples.
    pub beams: Option<CMat>,
    /// N x N unitary DFT back to frequency.
    pub dft: CMat,
    pub n_rb: usize,
    pub n_ant: usize,
}

/// Precompute the fixed pieces of the forward pass for one sample.
pub fn prepare_input(sp: &SampledPrecoders, ul_pdp: &Pdp) -> Result<SrpnetInput> {
    let n = sp.n_rb;
    if ul_pdp.p.len() != n {
        return Err(SimError::shape(
            "srpnet",
            format!("UL PDP with {n} bins"),
            format!("{} bins", ul_pdp.p.len()),
        ));
    }
    let psum: f64 = ul_pdp.p.iter().sum();
    if !(psum > 0.0) || !psum.is_finite() {
        return Err(SimError::Numerical(format!(
            "UL PDP must have positive finite energy, got sum {psum}"
        )));
    }
    let pdp_in = Tensor::from_vec(&[1, n], ul_pdp.p.iter().map(|v| v / psum).collect())?;
    let recip = reciprocity_bpf(ul_pdp, sp.n_samples())?;
    let mask_base = Tensor::from_vec(
        &[n],
        recip
            .mask
            .iter()
            .map(|&m| logit(m.clamp(MASK_CLAMP, 1.0 - MASK_CLAMP)))
            .collect(),
    )?;
    let extended = Tensor::from_cmat(&initial_upsample(sp)?);
    let n_ant = match sp.domain {
        crate::upsample::Domain::Antenna => sp.values.cols,
        crate::upsample::Domain::Beam => sp.beams.as_ref().unwrap().rows,
    };
    Ok(SrpnetInput {
        extended,
        pdp_in,
        mask_base,
        beams: match sp.domain {
            crate::upsample::Domain::Beam => sp.beams.clone(),
            crate::upsample::Domain::Antenna => None,
        },
        dft: dsp::dft_matrix(n),
        n_rb: n,
        n_ant,
    })
}

fn refine_2d(
    tape: &mut Tape,
    x: NodeId,
    w1: NodeId,
    b1: NodeId,
    w2: NodeId,
    b2: NodeId,
    scale: NodeId,
) -> Result<NodeId> {
    let h = tape.conv2d(x, w1, b1)?;
    let h = tape.relu(h);
    let r = tape.conv2d(h, w2, b2)?;
    let r = tape.scale_by_scalar(r, scale)?;
    tape.add(x, r)
}

/// Record the forward pass; `ids` are the parameter nodes in [`BLOCK_NAMES`]
/// order. Returns the unnormalized precoder tensor `[2, N_a, N_RB]` (column f
/// is the precoder for RB f).
pub fn build_forward(tape: &mut Tape, ids: &[NodeId], input: &SrpnetInput) -> Result<NodeId> {
    if ids.len() != BLOCK_NAMES.len() {
        return Err(SimError::shape(
            "srpnet_forward",
            format!("{} parameter nodes", BLOCK_NAMES.len()),
            format!("{}", ids.len()),
        ));
    }
    for (&id, &name) in ids.iter().zip(&BLOCK_NAMES) {
        if tape.shape(id) != block_shape(name).as_slice() {
            return Err(SimError::shape(
                "srpnet_forward",
                format!("`{name}` {:?}", block_shape(name)),
                format!("{:?}", tape.shape(id)),
            ));
        }
    }
    let [bpf_w1, bpf_b1, bpf_w2, bpf_b2, bd_w1, bd_b1, bd_w2, bd_b2, bd_scale, af_w1, af_b1, af_w2, af_b2, af_scale] =
        ids else { unreachable!() };
    let n = input.n_rb;

    // Mask head: conv stack output is a logit residual on the reciprocity mask.
    let pdp = tape.constant(input.pdp_in.clone());
    let h = tape.conv1d(pdp, *bpf_w1, *bpf_b1)?;
    let h = tape.relu(h);
    let h = tape.conv1d(h, *bpf_w2, *bpf_b2)?;
    let h = tape.reshape(h, &[n])?;
    let base = tape.constant(input.mask_base.clone());
    let logits = tape.add(h, base)?;
    let mask = tape.sigmoid(logits);

    // Tiling, masking, beam/antenna x delay refinement.
    let e = tape.constant(input.extended.clone());
    let masked = tape.mul_broadcast_last(e, mask)?;
    let bd = refine_2d(tape, masked, *bd_w1, *bd_b1, *bd_w2, *bd_b2, *bd_scale)?;

    // Beam expansion, frequency reconstruction, antenna x frequency refinement.
    let ant = match &input.beams {
        Some(b) => tape.complex_mat_left(b, bd)?,
        None => bd,
    };
    let freq = tape.complex_mat_right(&input.dft, ant)?;
    refine_2d(tape, freq, *af_w1, *af_b1, *af_w2, *af_b2, *af_scale)
}

/// Record forward pass + normalized-gain loss against the DL channel `h`
/// (N_RB x N_a).
pub fn build_loss(
    tape: &mut Tape,
    ids: &[NodeId],
    input: &SrpnetInput,
    h: &CMat,
) -> Result<NodeId> {
    let w = build_forward(tape, ids, input)?;
    tape.neg_gain_loss(w, h)
}

/// Inference: run the network and return row-normalized RB precoders.
pub fn srpnet_forward(
    sp: &SampledPrecoders,
    ul_pdp: &Pdp,
    params: &SrpnetParams,
) -> Result<RbPrecoders> {
    let input = prepare_input(sp, ul_pdp)?;
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = params
        .blocks
        .iter()
        .map(|(_, t)| tape.constant(t.clone()))
        .collect();
    let out = build_forward(&mut tape, &ids, &input)?;
    // [2, N_a, N] -> CMat N_a x N -> N x N_a rows.
    let w = tape.value(out).to_cmat()?.transpose();
    RbPrecoders::from_unnormalized(w)
}

/// One training sample: sampled precoders, the UL PDP, and the DL channel
/// (N_RB x N_a) the loss is scored against.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub sp: SampledPrecoders,
    pub ul_pdp: Pdp,
    pub dl: CMat,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainHyper {
    pub epochs: usize,
    pub early_stop: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            epochs: 200,
            early_stop: 30,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// 8:1:1 train/val/test split of `0..n` after a seeded shuffle.
pub fn split_indices(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    if n < 3 {
        return Err(SimError::Config(format!(
            "dataset needs at least 3 samples for an 8:1:1 split, got {n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (n / 10).max(1);
    let n_val = (n / 10).max(1);
    let test = idx.split_off(n - n_test);
    let val = idx.split_off(n - n_test - n_val);
    Ok((idx, val, test))
}

fn loss_at(params: &SrpnetParams, input: &SrpnetInput, h: &CMat) -> Result<f64> {
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = params
        .blocks
        .iter()
        .map(|(_, t)| tape.constant(t.clone()))
        .collect();
    let loss = build_loss(&mut tape, &ids, input, h)?;
    Ok(tape.value(loss).data[0])
}

fn mean_loss(params: &SrpnetParams, inputs: &[SrpnetInput], samples: &[TrainSample], idx: &[usize]) -> Result<f64> {
    let mut acc = 0.0;
    for &i in idx {
        acc += loss_at(params, &inputs[i], &samples[i].dl)?;
    }
    Ok(acc / idx.len() as f64)
}

/// Train SRPNet with Adam on the normalized-gain loss; single-threaded and
/// deterministic for a fixed seed. Returns the best-validation parameters,
/// the per-epoch log, and the (train, val, test) index split.
#[allow(clippy::type_complexity)]
pub fn train_srpnet(
    samples: &[TrainSample],
    hyper: &TrainHyper,
) -> Result<(SrpnetParams, Vec<EpochLog>, (Vec<usize>, Vec<usize>, Vec<usize>))> {
    if hyper.batch_size == 0 || hyper.epochs == 0 {
        return Err(SimError::Config(
            "train_srpnet needs batch_size >= 1 and epochs >= 1".into(),
        ));
    }
    let (train_idx, val_idx, test_idx) = split_indices(samples.len(), hyper.seed)?;
    let inputs: Vec<SrpnetInput> = samples
        .iter()
        .map(|s| prepare_input(&s.sp, &s.ul_pdp))
        .collect::<Result<_>>()?;

    let mut params = SrpnetParams::init(hyper.seed);
    let mut tensors = params.tensors();
    let mut adam = AdamState::new(
        AdamConfig {
            lr: hyper.lr,
            ..AdamConfig::default()
        },
        &tensors,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed.wrapping_add(1));
    let mut best = params.clone();
    let mut best_val = mean_loss(&params, &inputs, samples, &val_idx)?;
    let mut since_best = 0usize;
    let mut log = Vec::new();

    let mut order = train_idx.clone();
    for epoch in 0..hyper.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let mut train_acc = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            let mut grad_acc: Vec<Tensor> = tensors.iter().map(|t| Tensor::zeros(&t.shape)).collect();
            for &i in batch {
                let mut tape = Tape::new();
                let ids: Vec<NodeId> = tensors.iter().map(|t| tape.param(t.clone())).collect();
                let loss = build_loss(&mut tape, &ids, &inputs[i], &samples[i].dl)?;
                let lv = tape.value(loss).data[0];
                if !lv.is_finite() {
                    return Err(SimError::Numerical(format!(
                        "training diverged: loss {lv} at epoch {epoch}, sample {i}"
                    )));
                }
                train_acc += lv;
                let grads = tape.backward(loss)?;
                for (acc, id) in grad_acc.iter_mut().zip(&ids) {
                    if let Some(g) = &grads[id.0] {
                        for (a, v) in acc.data.iter_mut().zip(&g.data) {
                            *a += v / batch.len() as f64;
                        }
                    }
                }
            }
            adam.step(&mut tensors, &grad_acc)?;
        }
        for ((_, t), src) in params.blocks.iter_mut().zip(&tensors) {
            *t = src.clone();
        }
        let train_loss = train_acc / order.len() as f64;
        let val_loss = mean_loss(&params, &inputs, samples, &val_idx)?;
        if !val_loss.is_finite() {
            return Err(SimError::Numerical(format!(
                "training diverged: validation loss {val_loss} at epoch {epoch}"
            )));
        }
        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best_val {
            best_val = val_loss;
            best = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hyper.early_stop {
                break;
            }
        }
    }
    Ok((best, log, (train_idx, val_idx, test_idx)))
}

/// Write the training log as CSV (epoch, train_loss, val_loss).
pub fn write_log_csv(log: &[EpochLog], path: &std::path::Path) -> Result<()> {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for e in log {
        out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
    }
    std::fs::write(path, out).map_err(|e| SimError::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{compute_pdp, paths_to_csi, sample_paths, SimConfig};
    use crate::numerics::{grad_check, load_checkpoint, save_checkpoint, GradCheckConfig};
    use crate::upsample::{deterministic_upsample, Domain};
    use num_complex::Complex64;

    fn small_cfg() -> SimConfig {
        SimConfig {
            n_ant: 3,
            n_rb: 16,
            n_paths_range: (2, 4),
            ..SimConfig::default()
        }
    }

    /// Point-sample the DL channel at stride `t` as the SB feedback stand-in.
    fn sample_from_channel(dl: &CMat, t: usize) -> SampledPrecoders {
        let m = dl.rows / t;
        let values = CMat::from_fn(m, dl.cols, |k, a| dl.get(k * t, a));
        SampledPrecoders::new(values, t, 0, Domain::Antenna, None, dl.rows).unwrap()
    }

    fn make_sample(cfg: &SimConfig, seed: u64, stride: usize) -> TrainSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let paths = sample_paths(cfg, &mut rng).unwrap();
        let pair = paths_to_csi(&paths, cfg, seed);
        let ul_pdp = compute_pdp(&pair.ul, cfg.bin_width());
        TrainSample {
            sp: sample_from_channel(&pair.dl, stride),
            ul_pdp,
            dl: pair.dl,
        }
    }

    #[test]
    fn zero_init_equals_deterministic_core() {
        let cfg = small_cfg();
        for seed in 0..4 {
            let s = make_sample(&cfg, 100 + seed, 4);
            let params = SrpnetParams::init(seed);
            let net = srpnet_forward(&s.sp, &s.ul_pdp, &params).unwrap();
            let det = deterministic_upsample(&s.sp, &s.ul_pdp).unwrap();
            for f in 0..cfg.n_rb {
                for a in 0..cfg.n_ant {
                    let d = (net.values.get(f, a) - det.values.get(f, a)).norm();
                    assert!(d <= 1e-12, "seed {seed} rb {f} ant {a}: diff {d}");
                }
            }
        }
    }

    #[test]
    fn forward_is_pure() {
        let cfg = small_cfg();
        let s = make_sample(&cfg, 7, 4);
        let params = SrpnetParams::init_random(3);
        let a = srpnet_forward(&s.sp, &s.ul_pdp, &params).unwrap();
        let b = srpnet_forward(&s.sp, &s.ul_pdp, &params).unwrap();
        assert_eq!(a.values.data, b.values.data);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = small_cfg();
        let s = make_sample(&cfg, 11, 4);
        let input = prepare_input(&s.sp, &s.ul_pdp).unwrap();
        let params = SrpnetParams::init_random(5);
        let report = grad_check(
            &params.blocks,
            |tape, ids| build_loss(tape, ids, &input, &s.dl),
            &GradCheckConfig {
                max_entries_per_block: 6,
                seed: 0,
                ..GradCheckConfig::default()
            },
        )
        .unwrap();
        assert!(report.pass, "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn gradient_check_on_beam_domain_input() {
        let cfg = small_cfg();
        let s = make_sample(&cfg, 13, 4);
        // Rebuild the sample in the beam domain with a random 3x2 beam basis.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let beams = CMat::from_fn(3, 2, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let coeffs = CMat::from_fn(4, 2, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let sp = SampledPrecoders::new(coeffs, 4, 0, Domain::Beam, Some(beams), 16).unwrap();
        let input = prepare_input(&sp, &s.ul_pdp).unwrap();
        let params = SrpnetParams::init_random(6);
        let report = grad_check(
            &params.blocks,
            |tape, ids| build_loss(tape, ids, &input, &s.dl),
            &GradCheckConfig {
                max_entries_per_block: 4,
                seed: 1,
                ..GradCheckConfig::default()
            },
        )
        .unwrap();
        assert!(report.pass, "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn params_checkpoint_round_trip() {
        let params = SrpnetParams::init_random(9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net");
        save_checkpoint(&path, &params.blocks, &Default::default()).unwrap();
        let (blocks, _) = load_checkpoint(&path).unwrap();
        let back = SrpnetParams::from_blocks(blocks).unwrap();
        for ((na, ta), (nb, tb)) in params.blocks.iter().zip(&back.blocks) {
            assert_eq!(na, nb);
            assert_eq!(ta.data, tb.data);
        }
    }

    #[test]
    fn from_blocks_rejects_wrong_shape() {
        let mut params = SrpnetParams::init(0);
        params.blocks[0].1 = Tensor::zeros(&[2, 2]);
        assert!(SrpnetParams::from_blocks(params.blocks).is_err());
    }

    #[test]
    fn pdp_length_mismatch_is_an_error() {
        let cfg = small_cfg();
        let s = make_sample(&cfg, 17, 4);
        let bad = Pdp {
            p: vec![1.0; 8],
            bin_width: 1.0,
        };
        assert!(prepare_input(&s.sp, &bad).is_err());
    }

    #[test]
    fn split_is_disjoint_and_covers() {
        let (tr, va, te) = split_indices(50, 3).unwrap();
        assert_eq!(tr.len(), 40);
        assert_eq!(va.len(), 5);
        assert_eq!(te.len(), 5);
        let mut all: Vec<usize> = tr.iter().chain(&va).chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert!(split_indices(2, 0).is_err());
    }

    #[test]
    fn training_improves_or_keeps_validation_loss() {
        let cfg = small_cfg();
        let samples: Vec<TrainSample> = (0..20).map(|i| make_sample(&cfg, 200 + i, 4)).collect();
        let hyper = TrainHyper {
            epochs: 5,
            early_stop: 5,
            batch_size: 8,
            ..TrainHyper::default()
        };
        let (best, log, (_, val_idx, _)) = train_srpnet(&samples, &hyper).unwrap();
        assert!(!log.is_empty());
        let inputs: Vec<SrpnetInput> = samples
            .iter()
            .map(|s| prepare_input(&s.sp, &s.ul_pdp).unwrap())
            .collect();
        let init_val = mean_loss(&SrpnetParams::init(hyper.seed), &inputs, &samples, &val_idx).unwrap();
        let best_val = mean_loss(&best, &inputs, &samples, &val_idx).unwrap();
        assert!(best_val <= init_val + 1e-12, "best {best_val} vs init {init_val}");
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = small_cfg();
        let samples: Vec<TrainSample> = (0..10).map(|i| make_sample(&cfg, 300 + i, 4)).collect();
        let hyper = TrainHyper {
            epochs: 2,
            batch_size: 4,
            ..TrainHyper::default()
        };
        let (a, la, _) = train_srpnet(&samples, &hyper).unwrap();
        let (b, lb, _) = train_srpnet(&samples, &hyper).unwrap();
        for ((_, ta), (_, tb)) in a.blocks.iter().zip(&b.blocks) {
            assert_eq!(ta.data, tb.data);
        }
        assert_eq!(la.len(), lb.len());
        for (x, y) in la.iter().zip(&lb) {
            assert_eq!(x.train_loss, y.train_loss);
            assert_eq!(x.val_loss, y.val_loss);
        }
    }
}
