//! PDP-based switch between the upsampling network and linear interpolation.
//!
//! Two families of rules: fixed thresholds on delay-spread metrics of the UL
//! PDP, and a trainable single-layer switch s = sigmoid(f^T pdp + b) fit by
//! gradient ascent on mean gain minus weighted complexity. The network costs
//! roughly a thousand times the interpolator, so the switch trades a little
//! gain for a lot of compute on benign channels.

use crate::channel::{pdp_metrics, Pdp};
use crate::error::{Result, SimError};
use crate::numerics::{sigmoid, AdamConfig, AdamState, NodeId, Tape, Tensor};
use crate::upsample::srpnet::{split_indices, EpochLog, TrainHyper};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const C_ITP: f64 = 1.0;
pub const C_SRP: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchMetric {
    MaxExcess,
    MeanExcess,
    RmsDs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricUsed {
    Threshold(SwitchMetric),
    Learned,
}

/// Outcome of one switch evaluation; `s = true` selects the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchDecision {
    pub s_soft: f64,
    pub s: bool,
    pub metric_used: MetricUsed,
    pub complexity_charged: f64,
}

impl SwitchDecision {
    fn from_binary(s: bool, s_soft: f64, metric_used: MetricUsed) -> Self {
        SwitchDecision {
            s_soft,
            s,
            metric_used,
            complexity_charged: if s { C_SRP } else { C_ITP },
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearnedSwitchParams {
    /// Weight over normalized PDP bins, length N_RB.
    pub f: Vec<f64>,
    pub b: f64,
    pub lambda: f64,
}

/// Fire the switch when the chosen PDP metric reaches `thres` (inclusive).
/// `eta` is the significant-bin threshold for the excess-delay metrics.
pub fn threshold_switch(
    pdp: &Pdp,
    metric: SwitchMetric,
    thres: f64,
    eta: f64,
) -> Result<SwitchDecision> {
    let m = pdp_metrics(pdp, eta)?;
    let value = match metric {
        SwitchMetric::MaxExcess => m.max_excess_delay,
        SwitchMetric::MeanExcess => m.mean_excess_delay,
        SwitchMetric::RmsDs => m.rms_ds,
    };
    let s = value >= thres;
    Ok(SwitchDecision::from_binary(
        s,
        if s { 1.0 } else { 0.0 },
        MetricUsed::Threshold(metric),
    ))
}

fn normalize_pdp(pdp: &Pdp) -> Result<Vec<f64>> {
    let sum: f64 = pdp.p.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(SimError::Numerical(format!(
            "switch input PDP must have positive finite energy, got sum {sum}"
        )));
    }
    Ok(pdp.p.iter().map(|v| v / sum).collect())
}

/// s_soft = sigmoid(f . pdp/sum(pdp) + b); s = 1 at s_soft >= 0.5
/// (round-half-up).
pub fn learned_switch_forward(pdp: &Pdp, params: &LearnedSwitchParams) -> Result<SwitchDecision> {
    if params.f.len() != pdp.p.len() {
        return Err(SimError::shape(
            "learned_switch_forward",
            format!("{} weights", pdp.p.len()),
            format!("{}", params.f.len()),
        ));
    }
    let pn = normalize_pdp(pdp)?;
    let z: f64 = params.f.iter().zip(&pn).map(|(w, p)| w * p).sum::<f64>() + params.b;
    let s_soft = sigmoid(z);
    Ok(SwitchDecision::from_binary(
        s_soft >= 0.5,
        s_soft,
        MetricUsed::Learned,
    ))
}

/// Linear blends G = s*ng_srp + (1-s)*ng_itp and C = s*C_SRP + (1-s)*C_ITP.
pub fn gain_cost(s_soft: f64, ng_srp: f64, ng_itp: f64) -> (f64, f64) {
    (
        s_soft * ng_srp + (1.0 - s_soft) * ng_itp,
        s_soft * C_SRP + (1.0 - s_soft) * C_ITP,
    )
}

/// One training sample: the UL PDP and the precomputed normalized gains of
/// both upsamplers on that channel.
#[derive(Debug, Clone)]
pub struct SwitchSample {
    pub pdp: Pdp,
    pub ng_srp: f64,
    pub ng_itp: f64,
}

/// Record the negated batch objective -mean(G - lambda*C/C_SRP) on the tape.
/// `ids` = [f `[1,N]`, b `[1]`]. Cost is normalized by C_SRP so lambda's scale
/// is comparable to the gain term.
pub fn build_switch_loss(
    tape: &mut Tape,
    ids: &[NodeId],
    samples: &[&SwitchSample],
    lambda: f64,
) -> Result<NodeId> {
    if ids.len() != 2 {
        return Err(SimError::shape(
            "build_switch_loss",
            "2 parameter nodes [f, b]",
            format!("{}", ids.len()),
        ));
    }
    if samples.is_empty() {
        return Err(SimError::Config("switch training batch is empty".into()));
    }
    let (f, b) = (ids[0], ids[1]);
    let inv_n = 1.0 / samples.len() as f64;
    let mut acc: Option<NodeId> = None;
    let mut const_part = 0.0;
    for s in samples {
        let pn = normalize_pdp(&s.pdp)?;
        let x = tape.constant(Tensor::from_vec(&[pn.len()], pn)?);
        let z = tape.dense(x, f, b)?;
        let sft = tape.sigmoid(z);
        // G - lambda*C/C_SRP = ng_itp - lambda*C_ITP/C_SRP
        //   + s*(ng_srp - ng_itp - lambda*(1 - C_ITP/C_SRP)).
        let slope = s.ng_srp - s.ng_itp - lambda * (1.0 - C_ITP / C_SRP);
        const_part += (s.ng_itp - lambda * C_ITP / C_SRP) * inv_n;
        let term = tape.scale_const(sft, slope * inv_n);
        acc = Some(match acc {
            Some(a) => tape.add(a, term)?,
            None => term,
        });
    }
    let obj = acc.unwrap();
    let neg = tape.scale_const(obj, -1.0);
    Ok(tape.add_const(neg, -const_part))
}

fn objective(params: &LearnedSwitchParams, samples: &[SwitchSample], idx: &[usize]) -> Result<f64> {
    let mut acc = 0.0;
    for &i in idx {
        let d = learned_switch_forward(&samples[i].pdp, params)?;
        let (g, c) = gain_cost(d.s_soft, samples[i].ng_srp, samples[i].ng_itp);
        acc += g - params.lambda * c / C_SRP;
    }
    Ok(acc / idx.len() as f64)
}

/// Fit the learned switch by Adam on the continuous relaxation; rounding is
/// applied only at inference. Returns best-validation parameters and the
/// per-epoch log (losses are negated objectives).
pub fn train_switch(
    samples: &[SwitchSample],
    lambda: f64,
    hyper: &TrainHyper,
) -> Result<(LearnedSwitchParams, Vec<EpochLog>)> {
    if !(lambda >= 0.0) {
        return Err(SimError::Config(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    if hyper.batch_size == 0 || hyper.epochs == 0 {
        return Err(SimError::Config(
            "train_switch needs batch_size >= 1 and epochs >= 1".into(),
        ));
    }
    let n_rb = samples
        .first()
        .ok_or_else(|| SimError::Config("switch training set is empty".into()))?
        .pdp
        .p
        .len();
    if samples.iter().any(|s| s.pdp.p.len() != n_rb) {
        return Err(SimError::Config(
            "switch training PDPs must share one bin count".into(),
        ));
    }
    let (train_idx, val_idx, _test_idx) = split_indices(samples.len(), hyper.seed)?;

    let mut tensors = vec![Tensor::zeros(&[1, n_rb]), Tensor::zeros(&[1])];
    let mut adam = AdamState::new(
        AdamConfig {
            lr: hyper.lr,
            ..AdamConfig::default()
        },
        &tensors,
    );
    let as_params = |t: &[Tensor]| LearnedSwitchParams {
        f: t[0].data.clone(),
        b: t[1].data[0],
        lambda,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed.wrapping_add(1));
    let mut best = as_params(&tensors);
    let mut best_val = objective(&best, samples, &val_idx)?;
    let mut since_best = 0usize;
    let mut log = Vec::new();
    let mut order = train_idx;
    for epoch in 0..hyper.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let mut train_acc = 0.0;
        let mut n_batches = 0usize;
        for batch in order.chunks(hyper.batch_size) {
            let refs: Vec<&SwitchSample> = batch.iter().map(|&i| &samples[i]).collect();
            let mut tape = Tape::new();
            let ids: Vec<NodeId> = tensors.iter().map(|t| tape.param(t.clone())).collect();
            let loss = build_switch_loss(&mut tape, &ids, &refs, lambda)?;
            let lv = tape.value(loss).data[0];
            if !lv.is_finite() {
                return Err(SimError::Numerical(format!(
                    "switch training diverged: loss {lv} at epoch {epoch}"
                )));
            }
            train_acc += lv;
            n_batches += 1;
            let grads = tape.backward(loss)?;
            let gvec: Vec<Tensor> = ids
                .iter()
                .zip(&tensors)
                .map(|(id, t)| grads[id.0].clone().unwrap_or_else(|| Tensor::zeros(&t.shape)))
                .collect();
            adam.step(&mut tensors, &gvec)?;
        }
        let cur = as_params(&tensors);
        let val_obj = objective(&cur, samples, &val_idx)?;
        if !val_obj.is_finite() {
            return Err(SimError::Numerical(format!(
                "switch training diverged: validation objective {val_obj} at epoch {epoch}"
            )));
        }
        log.push(EpochLog {
            epoch,
            train_loss: train_acc / n_batches as f64,
            val_loss: -val_obj,
        });
        if val_obj > best_val {
            best_val = val_obj;
            best = cur;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hyper.early_stop {
                break;
            }
        }
    }
    Ok((best, log))
}

/// Persist the learned switch in the shared checkpoint format
/// (blocks `f` and `b`, lambda in the hyper map).
pub fn save_switch(path: &std::path::Path, params: &LearnedSwitchParams) -> Result<()> {
    let blocks = vec![
        (
            "f".to_string(),
            Tensor::from_vec(&[params.f.len()], params.f.clone())?,
        ),
        ("b".to_string(), Tensor::scalar(params.b)),
    ];
    let mut hyper = std::collections::BTreeMap::new();
    hyper.insert("lambda".to_string(), serde_json::json!(params.lambda));
    crate::numerics::save_checkpoint(path, &blocks, &hyper)
}

pub fn load_switch(path: &std::path::Path) -> Result<LearnedSwitchParams> {
    let (blocks, hyper) = crate::numerics::load_checkpoint(path)?;
    let find = |name: &str| -> Result<&Tensor> {
        blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| {
                SimError::Data(format!(
                    "switch checkpoint {} lacks block `{name}`",
                    path.display()
                ))
            })
    };
    let f = find("f")?.data.clone();
    let b_t = find("b")?;
    if b_t.numel() != 1 {
        return Err(SimError::Data(format!(
            "switch checkpoint {}: block `b` must be scalar",
            path.display()
        )));
    }
    let lambda = hyper
        .get("lambda")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| {
            SimError::Data(format!(
                "switch checkpoint {} lacks hyper `lambda`",
                path.display()
            ))
        })?;
    Ok(LearnedSwitchParams {
        f,
        b: b_t.data[0],
        lambda,
    })
}
