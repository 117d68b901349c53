//! Reverse-mode autodiff on a linear tape of primitive ops.
//!
//! Graphs are built by recording ops against a [`Tape`]; values are computed
//! eagerly at record time, so a recorded graph is also its own forward pass.
//! [`Tape::backward`] walks the tape in reverse and accumulates gradients for
//! every node reachable from the loss.
//!
//! Complex data travels as real tensors with a leading size-2 channel axis
//! (`[2, ...]`, channel 0 = real, channel 1 = imaginary); the complex ops
//! below interpret that axis.

use crate::dsp::CMat;
use crate::error::{Result, SimError};
use crate::numerics::tensor::Tensor;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone)]
enum Op {
    /// Leaf value (parameter or constant; backward treats both as sources).
    Leaf,
    /// Affine layer: inputs (x `[n]`, w `[m,n]`, b `[m]`) -> `[m]`.
    Dense,
    /// 1-D convolution, stride 1, zero-padded "same" output.
    /// Inputs (x `[Cin,N]`, w `[Cout,Cin,K]`, b `[Cout]`) -> `[Cout,N]`, K odd.
    Conv1d,
    /// 2-D convolution, stride 1, zero-padded "same" output.
    /// Inputs (x `[Cin,H,W]`, w `[Cout,Cin,KH,KW]`, b `[Cout]`) -> `[Cout,H,W]`.
    Conv2d,
    Add,
    Mul,
    /// x `[..., N]` * m `[N]`, m broadcast over leading axes.
    MulBroadcastLast,
    /// x * s with s a `[1]` scalar node.
    ScaleByScalar,
    Relu,
    Sigmoid,
    Mean,
    Sum,
    ScaleConst(f64),
    AddConst,
    /// Elementwise complex product of two `[2, ...]` tensors.
    ComplexMul,
    /// y[:,p,n] = sum_d a[p,d] * x[:,d,n] (complex), x `[2,D,N]` -> `[2,P,N]`.
    ComplexMatLeft { a: CMat },
    /// y[:,d,m] = sum_n a[m,n] * x[:,d,n] (complex), x `[2,D,N]` -> `[2,D,M]`.
    ComplexMatRight { a: CMat },
    /// Shape change, same element count.
    Reshape,
    /// Nearest-integer rounding; has no gradient.
    Round,
    /// Normalized-gain training loss: w `[2,A,N]` against a fixed channel
    /// h (N x A, row f = h_f). loss = 1 - mean_f |h_f^H w_f| / (|h_f||w_f|).
    NegGainLoss { h: CMat },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Dense => "dense",
            Op::Conv1d => "conv1d",
            Op::Conv2d => "conv2d",
            Op::Add => "add",
            Op::Mul => "mul",
            Op::MulBroadcastLast => "mul_broadcast_last",
            Op::ScaleByScalar => "scale_by_scalar",
            Op::Relu => "relu",
            Op::Sigmoid => "sigmoid",
            Op::Mean => "mean",
            Op::Sum => "sum",
            Op::ScaleConst(_) => "scale_const",
            Op::AddConst => "add_const",
            Op::ComplexMul => "complex_mul",
            Op::ComplexMatLeft { .. } => "complex_mat_left",
            Op::ComplexMatRight { .. } => "complex_mat_right",
            Op::Reshape => "reshape",
            Op::Round => "round",
            Op::NegGainLoss { .. } => "neg_gain_loss",
        }
    }
}

struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    value: Tensor,
}

/// Linear record of primitive ops; inputs of op k are always recorded before k.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].value.shape
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, value: Tensor) -> NodeId {
        debug_assert!(inputs.iter().all(|i| i.0 < self.nodes.len()));
        self.nodes.push(Node { op, inputs, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, vec![], value)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, vec![], value)
    }

    // ── Primitives ───────────────────────────────────────────────────────

    pub fn dense(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if ws.len() != 2 || xs.len() != 1 || bs.len() != 1 || ws[1] != xs[0] || ws[0] != bs[0] {
            return Err(SimError::shape(
                "dense",
                "x [n], w [m,n], b [m]",
                format!("x {:?}, w {:?}, b {:?}", xs, ws, bs),
            ));
        }
        let (m, n) = (ws[0], ws[1]);
        let (xv, wv, bv) = (
            self.value(x).data.clone(),
            self.value(w).data.clone(),
            self.value(b).data.clone(),
        );
        let mut out = vec![0.0; m];
        for r in 0..m {
            let mut acc = bv[r];
            for c in 0..n {
                acc += wv[r * n + c] * xv[c];
            }
            out[r] = acc;
        }
        Ok(self.push(Op::Dense, vec![x, w, b], Tensor::from_vec(&[m], out)?))
    }

    pub fn conv1d(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2
            || ws.len() != 3
            || bs.len() != 1
            || ws[1] != xs[0]
            || ws[0] != bs[0]
            || ws[2] % 2 == 0
        {
            return Err(SimError::shape(
                "conv1d",
                "x [Cin,N], w [Cout,Cin,K odd], b [Cout]",
                format!("x {:?}, w {:?}, b {:?}", xs, ws, bs),
            ));
        }
        let (cin, n) = (xs[0], xs[1]);
        let (cout, k) = (ws[0], ws[2]);
        let half = k / 2;
        let (xv, wv, bv) = (
            self.value(x).data.clone(),
            self.value(w).data.clone(),
            self.value(b).data.clone(),
        );
        let mut out = vec![0.0; cout * n];
        for co in 0..cout {
            for i in 0..n {
                let mut acc = bv[co];
                for ci in 0..cin {
                    for t in 0..k {
                        let j = i as isize + t as isize - half as isize;
                        if j >= 0 && (j as usize) < n {
                            acc += wv[(co * cin + ci) * k + t] * xv[ci * n + j as usize];
                        }
                    }
                }
                out[co * n + i] = acc;
            }
        }
        Ok(self.push(Op::Conv1d, vec![x, w, b], Tensor::from_vec(&[cout, n], out)?))
    }

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 3
            || ws.len() != 4
            || bs.len() != 1
            || ws[1] != xs[0]
            || ws[0] != bs[0]
            || ws[2] % 2 == 0
            || ws[3] % 2 == 0
        {
            return Err(SimError::shape(
                "conv2d",
                "x [Cin,H,W], w [Cout,Cin,KH,KW] (odd kernels), b [Cout]",
                format!("x {:?}, w {:?}, b {:?}", xs, ws, bs),
            ));
        }
        let (cin, h, wid) = (xs[0], xs[1], xs[2]);
        let (cout, kh, kw) = (ws[0], ws[2], ws[3]);
        let (hh, hw) = (kh / 2, kw / 2);
        let (xv, wv, bv) = (
            self.value(x).data.clone(),
            self.value(w).data.clone(),
            self.value(b).data.clone(),
        );
        let mut out = vec![0.0; cout * h * wid];
        for co in 0..cout {
            for r in 0..h {
                for c in 0..wid {
                    let mut acc = bv[co];
                    for ci in 0..cin {
                        for tr in 0..kh {
                            let rr = r as isize + tr as isize - hh as isize;
                            if rr < 0 || rr as usize >= h {
                                continue;
                            }
                            for tc in 0..kw {
                                let cc = c as isize + tc as isize - hw as isize;
                                if cc < 0 || cc as usize >= wid {
                                    continue;
                                }
                                acc += wv[((co * cin + ci) * kh + tr) * kw + tc]
                                    * xv[(ci * h + rr as usize) * wid + cc as usize];
                            }
                        }
                    }
                    out[(co * h + r) * wid + c] = acc;
                }
            }
        }
        Ok(self.push(
            Op::Conv2d,
            vec![x, w, b],
            Tensor::from_vec(&[cout, h, wid], out)?,
        ))
    }

    fn elementwise2(&mut self, op: Op, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(SimError::shape(
                op.name(),
                format!("{:?}", self.shape(a)),
                format!("{:?}", self.shape(b)),
            ));
        }
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let data: Vec<f64> = match op {
            Op::Add => av.data.iter().zip(&bv.data).map(|(x, y)| x + y).collect(),
            Op::Mul => av.data.iter().zip(&bv.data).map(|(x, y)| x * y).collect(),
            _ => unreachable!(),
        };
        let t = Tensor::from_vec(&av.shape.clone(), data)?;
        Ok(self.push(op, vec![a, b], t))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise2(Op::Add, a, b)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise2(Op::Mul, a, b)
    }

    pub fn mul_broadcast_last(&mut self, x: NodeId, m: NodeId) -> Result<NodeId> {
        let (xs, ms) = (self.shape(x).to_vec(), self.shape(m).to_vec());
        if ms.len() != 1 || xs.is_empty() || *xs.last().unwrap() != ms[0] {
            return Err(SimError::shape(
                "mul_broadcast_last",
                "x [..., N], m [N]",
                format!("x {:?}, m {:?}", xs, ms),
            ));
        }
        let n = ms[0];
        let xv = &self.nodes[x.0].value.data;
        let mv = &self.nodes[m.0].value.data;
        let data: Vec<f64> = xv.iter().enumerate().map(|(i, v)| v * mv[i % n]).collect();
        let t = Tensor::from_vec(&xs, data)?;
        Ok(self.push(Op::MulBroadcastLast, vec![x, m], t))
    }

    pub fn scale_by_scalar(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        if self.shape(s) != [1] {
            return Err(SimError::shape(
                "scale_by_scalar",
                "s [1]",
                format!("{:?}", self.shape(s)),
            ));
        }
        let sv = self.nodes[s.0].value.data[0];
        let xv = self.nodes[x.0].value.clone();
        let t = Tensor::from_vec(&xv.shape, xv.data.iter().map(|v| v * sv).collect())?;
        Ok(self.push(Op::ScaleByScalar, vec![x, s], t))
    }

    fn unary(&mut self, op: Op, x: NodeId, f: impl Fn(f64) -> f64) -> NodeId {
        let xv = self.nodes[x.0].value.clone();
        let t = Tensor {
            shape: xv.shape.clone(),
            data: xv.data.iter().map(|v| f(*v)).collect(),
        };
        self.push(op, vec![x], t)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.unary(Op::Relu, x, |v| v.max(0.0))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.unary(Op::Sigmoid, x, sigmoid)
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let xv = self.nodes[x.0].value.clone();
        let t = Tensor::from_vec(shape, xv.data).map_err(|_| {
            SimError::shape(
                "reshape",
                format!("{} elements", xv.shape.iter().product::<usize>()),
                format!("target {:?}", shape),
            )
        })?;
        Ok(self.push(Op::Reshape, vec![x], t))
    }

    pub fn round(&mut self, x: NodeId) -> NodeId {
        self.unary(Op::Round, x, |v| v.round())
    }

    pub fn scale_const(&mut self, x: NodeId, c: f64) -> NodeId {
        self.unary(Op::ScaleConst(c), x, |v| v * c)
    }

    pub fn add_const(&mut self, x: NodeId, c: f64) -> NodeId {
        self.unary(Op::AddConst, x, |v| v + c)
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let m = xv.data.iter().sum::<f64>() / xv.numel() as f64;
        self.push(Op::Mean, vec![x], Tensor::scalar(m))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.nodes[x.0].value.data.iter().sum();
        self.push(Op::Sum, vec![x], Tensor::scalar(s))
    }

    pub fn complex_mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (asp, bsp) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if asp != bsp || asp.first() != Some(&2) {
            return Err(SimError::shape(
                "complex_mul",
                "two equal [2, ...] tensors",
                format!("a {:?}, b {:?}", asp, bsp),
            ));
        }
        let half = self.nodes[a.0].value.numel() / 2;
        let av = &self.nodes[a.0].value.data;
        let bv = &self.nodes[b.0].value.data;
        let mut data = vec![0.0; 2 * half];
        for i in 0..half {
            let (ar, ai) = (av[i], av[half + i]);
            let (br, bi) = (bv[i], bv[half + i]);
            data[i] = ar * br - ai * bi;
            data[half + i] = ar * bi + ai * br;
        }
        let t = Tensor::from_vec(&asp, data)?;
        Ok(self.push(Op::ComplexMul, vec![a, b], t))
    }

    pub fn complex_mat_left(&mut self, a: &CMat, x: NodeId) -> Result<NodeId> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 3 || xs[0] != 2 || xs[1] != a.cols {
            return Err(SimError::shape(
                "complex_mat_left",
                format!("x [2, {}, N]", a.cols),
                format!("{:?}", xs),
            ));
        }
        let (d, n) = (xs[1], xs[2]);
        let p = a.rows;
        let xv = &self.nodes[x.0].value.data;
        let half_in = d * n;
        let mut data = vec![0.0; 2 * p * n];
        for pi in 0..p {
            for di in 0..d {
                let c = a.get(pi, di);
                for ni in 0..n {
                    let (xr, xi) = (xv[di * n + ni], xv[half_in + di * n + ni]);
                    data[pi * n + ni] += c.re * xr - c.im * xi;
                    data[p * n + pi * n + ni] += c.re * xi + c.im * xr;
                }
            }
        }
        let t = Tensor::from_vec(&[2, p, n], data)?;
        Ok(self.push(Op::ComplexMatLeft { a: a.clone() }, vec![x], t))
    }

    pub fn complex_mat_right(&mut self, a: &CMat, x: NodeId) -> Result<NodeId> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 3 || xs[0] != 2 || xs[2] != a.cols {
            return Err(SimError::shape(
                "complex_mat_right",
                format!("x [2, D, {}]", a.cols),
                format!("{:?}", xs),
            ));
        }
        let (d, n) = (xs[1], xs[2]);
        let m = a.rows;
        let xv = &self.nodes[x.0].value.data;
        let half_in = d * n;
        let mut data = vec![0.0; 2 * d * m];
        for di in 0..d {
            for mi in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for ni in 0..n {
                    let xz = Complex64::new(xv[di * n + ni], xv[half_in + di * n + ni]);
                    acc += a.get(mi, ni) * xz;
                }
                data[di * m + mi] = acc.re;
                data[d * m + di * m + mi] = acc.im;
            }
        }
        let t = Tensor::from_vec(&[2, d, m], data)?;
        Ok(self.push(Op::ComplexMatRight { a: a.clone() }, vec![x], t))
    }

    /// Record the normalized-gain loss of precoders `w` (`[2, A, N]`, column f
    /// is the precoder for frequency f) against the fixed channel `h` (N x A).
    pub fn neg_gain_loss(&mut self, w: NodeId, h: &CMat) -> Result<NodeId> {
        let ws = self.shape(w).to_vec();
        if ws.len() != 3 || ws[0] != 2 || ws[1] != h.cols || ws[2] != h.rows {
            return Err(SimError::shape(
                "neg_gain_loss",
                format!("w [2, {}, {}]", h.cols, h.rows),
                format!("{:?}", ws),
            ));
        }
        let (na, nf) = (ws[1], ws[2]);
        let wv = &self.nodes[w.0].value.data;
        let half = na * nf;
        let mut acc = 0.0;
        for f in 0..nf {
            let hf = h.row(f);
            let hn = crate::dsp::vec_norm(hf);
            if hn == 0.0 {
                return Err(SimError::Numerical(format!(
                    "neg_gain_loss: zero channel row at frequency {f}"
                )));
            }
            let wf: Vec<Complex64> = (0..na)
                .map(|a| Complex64::new(wv[a * nf + f], wv[half + a * nf + f]))
                .collect();
            let wn = crate::dsp::vec_norm(&wf);
            if wn == 0.0 {
                return Err(SimError::Numerical(format!(
                    "neg_gain_loss: zero precoder column at frequency {f}"
                )));
            }
            let z = crate::dsp::inner(hf, &wf);
            acc += z.norm() / (hn * wn);
        }
        let loss = 1.0 - acc / nf as f64;
        Ok(self.push(Op::NegGainLoss { h: h.clone() }, vec![w], Tensor::scalar(loss)))
    }

    // ── Backward ─────────────────────────────────────────────────────────

    /// Reverse sweep from `loss` (must be scalar). Returns one gradient slot
    /// per node; nodes unreachable from the loss stay `None`.
    pub fn backward(&self, loss: NodeId) -> Result<Vec<Option<Tensor>>> {
        if self.nodes.is_empty() {
            return Err(SimError::Numerical("backward on empty tape".into()));
        }
        if self.value(loss).numel() != 1 {
            return Err(SimError::shape(
                "backward",
                "scalar loss [1]",
                format!("{:?}", self.shape(loss)),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[idx];
            let input_grads = self.op_backward(node, &g)?;
            for (inp, ig) in node.inputs.iter().zip(input_grads) {
                match &mut grads[inp.0] {
                    Some(existing) => {
                        for (e, v) in existing.data.iter_mut().zip(&ig.data) {
                            *e += v;
                        }
                    }
                    slot @ None => *slot = Some(ig),
                }
            }
            grads[idx] = Some(g);
        }
        Ok(grads)
    }

    fn op_backward(&self, node: &Node, g: &Tensor) -> Result<Vec<Tensor>> {
        let inv = |i: usize| &self.nodes[node.inputs[i].0].value;
        match &node.op {
            Op::Leaf => Ok(vec![]),
            Op::Round => Err(SimError::NonDifferentiable("round".into())),
            Op::Reshape => {
                let x = inv(0);
                Ok(vec![Tensor {
                    shape: x.shape.clone(),
                    data: g.data.clone(),
                }])
            }
            Op::Dense => {
                let (x, w) = (inv(0), inv(1));
                let (m, n) = (w.shape[0], w.shape[1]);
                let mut gx = vec![0.0; n];
                let mut gw = vec![0.0; m * n];
                for r in 0..m {
                    for c in 0..n {
                        gx[c] += w.data[r * n + c] * g.data[r];
                        gw[r * n + c] = g.data[r] * x.data[c];
                    }
                }
                Ok(vec![
                    Tensor::from_vec(&[n], gx)?,
                    Tensor::from_vec(&[m, n], gw)?,
                    g.clone(),
                ])
            }
            Op::Conv1d => {
                let (x, w) = (inv(0), inv(1));
                let (cin, n) = (x.shape[0], x.shape[1]);
                let (cout, k) = (w.shape[0], w.shape[2]);
                let half = k / 2;
                let mut gx = vec![0.0; cin * n];
                let mut gw = vec![0.0; cout * cin * k];
                let mut gb = vec![0.0; cout];
                for co in 0..cout {
                    for i in 0..n {
                        let go = g.data[co * n + i];
                        gb[co] += go;
                        for ci in 0..cin {
                            for t in 0..k {
                                let j = i as isize + t as isize - half as isize;
                                if j >= 0 && (j as usize) < n {
                                    let xi = x.data[ci * n + j as usize];
                                    gw[(co * cin + ci) * k + t] += go * xi;
                                    gx[ci * n + j as usize] +=
                                        go * w.data[(co * cin + ci) * k + t];
                                }
                            }
                        }
                    }
                }
                Ok(vec![
                    Tensor::from_vec(&[cin, n], gx)?,
                    Tensor::from_vec(&[cout, cin, k], gw)?,
                    Tensor::from_vec(&[cout], gb)?,
                ])
            }
            Op::Conv2d => {
                let (x, w) = (inv(0), inv(1));
                let (cin, h, wid) = (x.shape[0], x.shape[1], x.shape[2]);
                let (cout, kh, kw) = (w.shape[0], w.shape[2], w.shape[3]);
                let (hh, hw) = (kh / 2, kw / 2);
                let mut gx = vec![0.0; cin * h * wid];
                let mut gw = vec![0.0; cout * cin * kh * kw];
                let mut gb = vec![0.0; cout];
                for co in 0..cout {
                    for r in 0..h {
                        for c in 0..wid {
                            let go = g.data[(co * h + r) * wid + c];
                            gb[co] += go;
                            for ci in 0..cin {
                                for tr in 0..kh {
                                    let rr = r as isize + tr as isize - hh as isize;
                                    if rr < 0 || rr as usize >= h {
                                        continue;
                                    }
                                    for tc in 0..kw {
                                        let cc = c as isize + tc as isize - hw as isize;
                                        if cc < 0 || cc as usize >= wid {
                                            continue;
                                        }
                                        let xi = x.data[(ci * h + rr as usize) * wid + cc as usize];
                                        gw[((co * cin + ci) * kh + tr) * kw + tc] += go * xi;
                                        gx[(ci * h + rr as usize) * wid + cc as usize] +=
                                            go * w.data[((co * cin + ci) * kh + tr) * kw + tc];
                                    }
                                }
                            }
                        }
                    }
                }
                Ok(vec![
                    Tensor::from_vec(&[cin, h, wid], gx)?,
                    Tensor::from_vec(&[cout, cin, kh, kw], gw)?,
                    Tensor::from_vec(&[cout], gb)?,
                ])
            }
            Op::Add => Ok(vec![g.clone(), g.clone()]),
            Op::Mul => {
                let (a, b) = (inv(0), inv(1));
                let ga = Tensor {
                    shape: a.shape.clone(),
                    data: g.data.iter().zip(&b.data).map(|(x, y)| x * y).collect(),
                };
                let gb = Tensor {
                    shape: b.shape.clone(),
                    data: g.data.iter().zip(&a.data).map(|(x, y)| x * y).collect(),
                };
                Ok(vec![ga, gb])
            }
            Op::MulBroadcastLast => {
                let (x, m) = (inv(0), inv(1));
                let n = m.shape[0];
                let gx = Tensor {
                    shape: x.shape.clone(),
                    data: g
                        .data
                        .iter()
                        .enumerate()
                        .map(|(i, v)| v * m.data[i % n])
                        .collect(),
                };
                let mut gm = vec![0.0; n];
                for (i, v) in g.data.iter().enumerate() {
                    gm[i % n] += v * x.data[i];
                }
                Ok(vec![gx, Tensor::from_vec(&[n], gm)?])
            }
            Op::ScaleByScalar => {
                let (x, s) = (inv(0), inv(1));
                let sv = s.data[0];
                let gx = Tensor {
                    shape: x.shape.clone(),
                    data: g.data.iter().map(|v| v * sv).collect(),
                };
                let gs = g.data.iter().zip(&x.data).map(|(a, b)| a * b).sum();
                Ok(vec![gx, Tensor::scalar(gs)])
            }
            Op::Relu => {
                let x = inv(0);
                Ok(vec![Tensor {
                    shape: x.shape.clone(),
                    data: g
                        .data
                        .iter()
                        .zip(&x.data)
                        .map(|(gv, xv)| if *xv > 0.0 { *gv } else { 0.0 })
                        .collect(),
                }])
            }
            Op::Sigmoid => {
                let y = &node.value;
                Ok(vec![Tensor {
                    shape: y.shape.clone(),
                    data: g
                        .data
                        .iter()
                        .zip(&y.data)
                        .map(|(gv, yv)| gv * yv * (1.0 - yv))
                        .collect(),
                }])
            }
            Op::Mean => {
                let x = inv(0);
                let scale = g.data[0] / x.numel() as f64;
                Ok(vec![Tensor {
                    shape: x.shape.clone(),
                    data: vec![scale; x.numel()],
                }])
            }
            Op::Sum => {
                let x = inv(0);
                Ok(vec![Tensor {
                    shape: x.shape.clone(),
                    data: vec![g.data[0]; x.numel()],
                }])
            }
            Op::ScaleConst(c) => Ok(vec![Tensor {
                shape: g.shape.clone(),
                data: g.data.iter().map(|v| v * c).collect(),
            }]),
            Op::AddConst => Ok(vec![g.clone()]),
            Op::ComplexMul => {
                // d/da = g * conj(b), d/db = g * conj(a)
                let (a, b) = (inv(0), inv(1));
                let half = a.numel() / 2;
                let grad_of = |other: &Tensor| {
                    let mut data = vec![0.0; 2 * half];
                    for i in 0..half {
                        let gz = Complex64::new(g.data[i], g.data[half + i]);
                        let oz = Complex64::new(other.data[i], other.data[half + i]);
                        let r = gz * oz.conj();
                        data[i] = r.re;
                        data[half + i] = r.im;
                    }
                    Tensor {
                        shape: a.shape.clone(),
                        data,
                    }
                };
                Ok(vec![grad_of(b), grad_of(a)])
            }
            Op::ComplexMatLeft { a } => {
                // gx = A^H g
                let (p, d) = (a.rows, a.cols);
                let n = node.value.shape[2];
                let half_out = p * n;
                let mut gx = vec![0.0; 2 * d * n];
                for di in 0..d {
                    for pi in 0..p {
                        let c = a.get(pi, di).conj();
                        for ni in 0..n {
                            let gz =
                                Complex64::new(g.data[pi * n + ni], g.data[half_out + pi * n + ni]);
                            let r = c * gz;
                            gx[di * n + ni] += r.re;
                            gx[d * n + di * n + ni] += r.im;
                        }
                    }
                }
                Ok(vec![Tensor::from_vec(&[2, d, n], gx)?])
            }
            Op::ComplexMatRight { a } => {
                let (m, n) = (a.rows, a.cols);
                let d = node.value.shape[1];
                let half_out = d * m;
                let mut gx = vec![0.0; 2 * d * n];
                for di in 0..d {
                    for ni in 0..n {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for mi in 0..m {
                            let gz = Complex64::new(
                                g.data[di * m + mi],
                                g.data[half_out + di * m + mi],
                            );
                            acc += a.get(mi, ni).conj() * gz;
                        }
                        gx[di * n + ni] = acc.re;
                        gx[d * n + di * n + ni] = acc.im;
                    }
                }
                Ok(vec![Tensor::from_vec(&[2, d, n], gx)?])
            }
            Op::NegGainLoss { h } => {
                let w = inv(0);
                let (na, nf) = (w.shape[1], w.shape[2]);
                let half = na * nf;
                let gscale = g.data[0];
                let mut gw = vec![0.0; 2 * half];
                for f in 0..nf {
                    let hf = h.row(f);
                    let hn = crate::dsp::vec_norm(hf);
                    let wf: Vec<Complex64> = (0..na)
                        .map(|a| Complex64::new(w.data[a * nf + f], w.data[half + a * nf + f]))
                        .collect();
                    let wn = crate::dsp::vec_norm(&wf);
                    let z = crate::dsp::inner(hf, &wf);
                    let zn = z.norm();
                    for a in 0..na {
                        // Wirtinger derivative of |z|/(|h||w|) wrt conj(w_a),
                        // real grads are twice its real/imag parts.
                        let d_conj = if zn > 0.0 {
                            hf[a] * z / (2.0 * zn * hn * wn)
                                - zn * wf[a] / (2.0 * hn * wn * wn * wn)
                        } else {
                            Complex64::new(0.0, 0.0)
                        };
                        let coeff = -gscale / nf as f64 * 2.0;
                        gw[a * nf + f] = coeff * d_conj.re;
                        gw[half + a * nf + f] = coeff * d_conj.im;
                    }
                }
                Ok(vec![Tensor::from_vec(&[2, na, nf], gw)?])
            }
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse sigmoid on (0, 1).
#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
