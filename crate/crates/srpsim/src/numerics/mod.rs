//! Minimal dense-tensor arithmetic with reverse-mode autodiff and Adam,
//! sized for the upsampling network and the learned switch.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod tape;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use tape::{logit, sigmoid, NodeId, Tape};
pub use tensor::Tensor;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::SimError;

    #[test]
    fn sigmoid_of_zero_is_half() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::scalar(0.0));
        let y = t.sigmoid(x);
        assert_eq!(t.value(y).data[0], 0.5);
    }

    #[test]
    fn identity_conv1d_passes_input_through() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_vec(&[1, 5], vec![1.0, -2.0, 3.0, 0.5, 4.0]).unwrap());
        let w = t.constant(Tensor::from_vec(&[1, 1, 1], vec![1.0]).unwrap());
        let b = t.constant(Tensor::zeros(&[1]));
        let y = t.conv1d(x, w, b).unwrap();
        assert_eq!(t.value(y).data, vec![1.0, -2.0, 3.0, 0.5, 4.0]);
    }

    #[test]
    fn identity_dense_passes_input_through() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap());
        let eye = Tensor::from_vec(&[3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        let w = t.constant(eye);
        let b = t.constant(Tensor::zeros(&[3]));
        let y = t.dense(x, w, b).unwrap();
        assert_eq!(t.value(y).data, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn mean_gradient_is_uniform() {
        let mut t = Tape::new();
        let x = t.param(Tensor::from_vec(&[4], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let loss = t.mean(x);
        let grads = t.backward(loss).unwrap();
        assert_eq!(grads[x.0].as_ref().unwrap().data, vec![0.25; 4]);
    }

    #[test]
    fn sigmoid_of_weighted_sum_grad_at_zero() {
        // loss = sigmoid(w * 1) at w = 0 -> dloss/dw = 0.25.
        let mut t = Tape::new();
        let w = t.param(Tensor::scalar(0.0));
        let x = t.constant(Tensor::scalar(1.0));
        let prod = t.mul(w, x).unwrap();
        let s = t.sigmoid(prod);
        let grads = t.backward(s).unwrap();
        assert!((grads[w.0].as_ref().unwrap().data[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut t = Tape::new();
        let x = t.param(Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap());
        let y = t.relu(x);
        assert!(matches!(
            t.backward(y),
            Err(SimError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn round_on_path_reports_non_differentiable() {
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(0.7));
        let r = t.round(x);
        let loss = t.mean(r);
        assert!(matches!(
            t.backward(loss),
            Err(SimError::NonDifferentiable(_))
        ));
        // And grad_check reports it as a diagnostic rather than an error.
        let rep = grad_check(
            &[("x".to_string(), Tensor::scalar(0.7))],
            |t, ids| {
                let r = t.round(ids[0]);
                Ok(t.mean(r))
            },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(!rep.pass);
        assert!(rep.failure.unwrap().contains("non-differentiable"));
    }

    #[test]
    fn linear_graph_grad_check_is_exact() {
        let rep = grad_check(
            &[(
                "w".to_string(),
                Tensor::from_vec(&[4], vec![0.3, -0.1, 0.7, 0.2]).unwrap(),
            )],
            |t, ids| {
                let s = t.scale_const(ids[0], 2.5);
                Ok(t.mean(s))
            },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(rep.pass);
        assert!(rep.max_rel_err <= 1e-9, "err {}", rep.max_rel_err);
    }

    #[test]
    fn two_layer_net_matches_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let rand_t = |shape: &[usize], rng: &mut rand_chacha::ChaCha8Rng| {
            let n: usize = shape.iter().product();
            Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
        };
        let x = rand_t(&[6], &mut rng);
        let params = vec![
            ("w1".to_string(), rand_t(&[5, 6], &mut rng)),
            ("b1".to_string(), rand_t(&[5], &mut rng)),
            ("w2".to_string(), rand_t(&[3, 5], &mut rng)),
            ("b2".to_string(), rand_t(&[3], &mut rng)),
        ];
        let rep = grad_check(
            &params,
            |t, ids| {
                let xi = t.constant(x.clone());
                let h = t.dense(xi, ids[0], ids[1])?;
                let h = t.sigmoid(h);
                let o = t.dense(h, ids[2], ids[3])?;
                let o = t.relu(o);
                Ok(t.mean(o))
            },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(rep.pass, "max rel err {}", rep.max_rel_err);
    }

    #[test]
    fn forward_is_deterministic() {
        let run = || {
            let mut t = Tape::new();
            let x = t.constant(Tensor::from_vec(&[2, 4], (0..8).map(|i| i as f64 * 0.3).collect()).unwrap());
            let w = t.constant(Tensor::from_vec(&[3, 2, 3], (0..18).map(|i| (i as f64).sin()).collect()).unwrap());
            let b = t.constant(Tensor::from_vec(&[3], vec![0.1, 0.2, 0.3]).unwrap());
            let y = t.conv1d(x, w, b).unwrap();
            let y = t.sigmoid(y);
            t.value(y).data.clone()
        };
        assert_eq!(run(), run());
    }
}
