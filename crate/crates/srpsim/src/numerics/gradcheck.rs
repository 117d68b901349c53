//! Central-finite-difference verification of tape gradients.

use crate::error::{Result, SimError};
use crate::numerics::tape::{NodeId, Tape};
use crate::numerics::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Max relative error allowed.
    pub tol: f64,
    /// Entries sampled per parameter block (0 = all).
    pub max_entries_per_block: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tol: 1e-6,
            max_entries_per_block: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockReport {
    pub name: String,
    pub entries_checked: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
    pub max_rel_err: f64,
    pub pass: bool,
    /// Set when the graph could not be differentiated at all
    /// (e.g. a hard rounding op on the backward path).
    pub failure: Option<String>,
}

/// Compare analytic tape gradients of `build`'s loss against central finite
/// differences at the given parameter point.
///
/// `build` is called with a fresh tape and the parameter nodes registered in
/// `params` order, and must return the scalar loss node.
pub fn grad_check<F>(
    params: &[(String, Tensor)],
    build: F,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    let eval = |values: &[Tensor]| -> Result<(f64, Vec<NodeId>, Tape, NodeId)> {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = values.iter().map(|t| tape.param(t.clone())).collect();
        let loss = build(&mut tape, &ids)?;
        let v = tape.value(loss).data[0];
        Ok((v, ids, tape, loss))
    };

    let base: Vec<Tensor> = params.iter().map(|(_, t)| t.clone()).collect();
    let (_, ids, tape, loss) = eval(&base)?;
    let grads = match tape.backward(loss) {
        Ok(g) => g,
        Err(SimError::NonDifferentiable(op)) => {
            return Ok(GradCheckReport {
                blocks: vec![],
                max_rel_err: f64::INFINITY,
                pass: false,
                failure: Some(format!("non-differentiable op `{op}`")),
            });
        }
        Err(e) => return Err(e),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut blocks = Vec::new();
    let mut max_rel = 0.0f64;
    for (bi, (name, tensor)) in params.iter().enumerate() {
        let analytic = grads[ids[bi].0]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(&tensor.shape));
        let mut entries: Vec<usize> = (0..tensor.numel()).collect();
        if cfg.max_entries_per_block > 0 && entries.len() > cfg.max_entries_per_block {
            entries.shuffle(&mut rng);
            entries.truncate(cfg.max_entries_per_block);
        }
        let mut block_max = 0.0f64;
        for &i in &entries {
            let mut plus = base.clone();
            plus[bi].data[i] += cfg.step;
            let (lp, ..) = eval(&plus)?;
            let mut minus = base.clone();
            minus[bi].data[i] -= cfg.step;
            let (lm, ..) = eval(&minus)?;
            let fd = (lp - lm) / (2.0 * cfg.step);
            let a = analytic.data[i];
            let rel = (a - fd).abs() / (a.abs() + fd.abs()).max(1e-4);
            block_max = block_max.max(rel);
        }
        max_rel = max_rel.max(block_max);
        blocks.push(BlockReport {
            name: name.clone(),
            entries_checked: entries.len(),
            max_rel_err: block_max,
        });
    }

    Ok(GradCheckReport {
        blocks,
        pass: max_rel <= cfg.tol,
        max_rel_err: max_rel,
        failure: None,
    })
}
