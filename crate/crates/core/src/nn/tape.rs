//! Reverse-mode automatic differentiation on a flat tape.
//!
//! Ops compute values eagerly and register a backward closure. Nodes are
//! topologically ordered by construction, so one reverse sweep propagates
//! gradients; leaves collect gradients for the optimizer. Everything is f64
//! so analytic gradients can be validated against central finite differences.

use super::tensor::Tensor;
use std::rc::Rc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

type BackFn = Box<dyn Fn(&Tensor, &mut GradStore)>;

struct Node {
    value: Rc<Tensor>,
    backward: Option<BackFn>,
}

pub struct GradStore {
    grads: Vec<Option<Tensor>>,
}

impl GradStore {
    fn accumulate(&mut self, var: Var, contrib: Tensor) {
        match &mut self.grads[var.0] {
            Some(g) => g.add_assign(&contrib),
            slot @ None => *slot = Some(contrib),
        }
    }

    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads[var.0].as_ref()
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads[var.0].take()
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Rc<Tensor>, backward: Option<BackFn>) -> Var {
        self.nodes.push(Node { value, backward });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn rc(&self, var: Var) -> Rc<Tensor> {
        Rc::clone(&self.nodes[var.0].value)
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Rc::new(value), None)
    }

    /// Differentiable input; gradients are collected here.
    pub fn leaf(&mut self, value: Rc<Tensor>) -> Var {
        self.push(value, None)
    }

    /// Reverse sweep from a scalar loss. Returns per-node gradients.
    pub fn backward(&self, loss: Var) -> GradStore {
        assert_eq!(self.value(loss).numel(), 1, "loss must be scalar");
        let mut store = GradStore {
            grads: vec![None; self.nodes.len()],
        };
        store.grads[loss.0] = Some(Tensor::scalar(1.0));
        for id in (0..=loss.0).rev() {
            let Some(grad) = store.grads[id].take() else {
                continue;
            };
            if let Some(f) = &self.nodes[id].backward {
                f(&grad, &mut store);
            }
            store.grads[id] = Some(grad);
        }
        store
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "add shape mismatch");
        let mut out = va.clone();
        out.add_assign(vb);
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                store.accumulate(a, g.clone());
                store.accumulate(b, g.clone());
            })),
        )
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "sub shape mismatch");
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x - y)
            .collect();
        let out = Tensor::from_vec(va.shape(), data);
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                store.accumulate(a, g.clone());
                let mut neg = g.clone();
                neg.scale_assign(-1.0);
                store.accumulate(b, neg);
            })),
        )
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.rc(a), self.rc(b));
        assert_eq!(va.shape(), vb.shape(), "mul shape mismatch");
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::from_vec(va.shape(), data);
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                let da = Tensor::from_vec(
                    g.shape(),
                    g.data().iter().zip(vb.data()).map(|(g, y)| g * y).collect(),
                );
                let db = Tensor::from_vec(
                    g.shape(),
                    g.data().iter().zip(va.data()).map(|(g, x)| g * x).collect(),
                );
                store.accumulate(a, da);
                store.accumulate(b, db);
            })),
        )
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let mut out = self.value(a).clone();
        out.scale_assign(factor);
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                let mut d = g.clone();
                d.scale_assign(factor);
                store.accumulate(a, d);
            })),
        )
    }

    /// Broadcast a length-d bias over the rows of an (n, d) matrix.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b_id(bias)));
        let d = va.cols();
        assert_eq!(vb.numel(), d, "bias length mismatch");
        let mut out = va.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for (r, b) in row.iter_mut().zip(vb.data()) {
                *r += b;
            }
        }
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                store.accumulate(a, g.clone());
                let d = g.cols();
                let mut db = vec![0.0; d];
                for i in 0..g.rows() {
                    for (acc, v) in db.iter_mut().zip(g.row(i)) {
                        *acc += v;
                    }
                }
                store.accumulate(bias, Tensor::from_vec(&[d], db));
            })),
        )
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.rc(a), self.rc(b));
        let out = va.matmul(&vb);
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                store.accumulate(a, g.matmul_bt(&vb));
                store.accumulate(b, va.matmul_at(g));
            })),
        )
    }

    /// a . b^T without materializing the transpose.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.rc(a), self.rc(b));
        let out = va.matmul_bt(&vb);
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                store.accumulate(a, g.matmul(&vb));
                store.accumulate(b, g.matmul_at(&va));
            })),
        )
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = Rc::new(self.value(a).map(f64::tanh));
        let y = Rc::clone(&out);
        self.push(
            out,
            Some(Box::new(move |g, store| {
                let d = Tensor::from_vec(
                    g.shape(),
                    g.data()
                        .iter()
                        .zip(y.data())
                        .map(|(g, y)| g * (1.0 - y * y))
                        .collect(),
                );
                store.accumulate(a, d);
            })),
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = Rc::new(self.value(a).map(|x| 1.0 / (1.0 + (-x).exp())));
        let y = Rc::clone(&out);
        self.push(
            out,
            Some(Box::new(move |g, store| {
                let d = Tensor::from_vec(
                    g.shape(),
                    g.data()
                        .iter()
                        .zip(y.data())
                        .map(|(g, y)| g * y * (1.0 - y))
                        .collect(),
                );
                store.accumulate(a, d);
            })),
        )
    }

    /// x * sigmoid(x), the smooth nonlinearity used throughout the model.
    pub fn silu(&mut self, a: Var) -> Var {
        let x = self.rc(a);
        let out = x.map(|v| v / (1.0 + (-v).exp()));
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                let d = Tensor::from_vec(
                    g.shape(),
                    g.data()
                        .iter()
                        .zip(x.data())
                        .map(|(g, x)| {
                            let s = 1.0 / (1.0 + (-x).exp());
                            g * s * (1.0 + x * (1.0 - s))
                        })
                        .collect(),
                );
                store.accumulate(a, d);
            })),
        )
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let (n, d) = (va.rows(), va.cols());
        let mut out = Tensor::zeros(&[n, d]);
        for i in 0..n {
            let row = va.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (o, &x) in out.row_mut(i).iter_mut().zip(row) {
                *o = (x - max).exp();
                sum += *o;
            }
            for o in out.row_mut(i) {
                *o /= sum;
            }
        }
        let out = Rc::new(out);
        let y = Rc::clone(&out);
        self.push(
            out,
            Some(Box::new(move |g, store| {
                let (n, d) = (y.rows(), y.cols());
                let mut dx = Tensor::zeros(&[n, d]);
                for i in 0..n {
                    let yi = y.row(i);
                    let gi = g.row(i);
                    let dot: f64 = yi.iter().zip(gi).map(|(y, g)| y * g).sum();
                    for ((o, &yv), &gv) in dx.row_mut(i).iter_mut().zip(yi).zip(gi) {
                        *o = yv * (gv - dot);
                    }
                }
                store.accumulate(a, dx);
            })),
        )
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Var {
        let vx = self.rc(x);
        let vg = self.rc(gain);
        let vb = self.value(bias);
        let (n, d) = (vx.rows(), vx.cols());
        assert_eq!(vg.numel(), d, "layer_norm gain length");
        assert_eq!(vb.numel(), d, "layer_norm bias length");
        let mut out = Tensor::zeros(&[n, d]);
        let mut normed = Tensor::zeros(&[n, d]);
        let mut inv_sigma = vec![0.0; n];
        for i in 0..n {
            let row = vx.row(i);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_sigma[i] = inv;
            for j in 0..d {
                let xn = (row[j] - mean) * inv;
                normed.set(i, j, xn);
                out.set(i, j, xn * vg.data()[j] + vb.data()[j]);
            }
        }
        let normed = Rc::new(normed);
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                let (n, d) = (normed.rows(), normed.cols());
                let mut dx = Tensor::zeros(&[n, d]);
                let mut dgain = vec![0.0; d];
                let mut dbias = vec![0.0; d];
                for i in 0..n {
                    let xn = normed.row(i);
                    let gi = g.row(i);
                    let mut mean_gy = 0.0;
                    let mut mean_gy_xn = 0.0;
                    for j in 0..d {
                        let gy = gi[j] * vg.data()[j];
                        mean_gy += gy;
                        mean_gy_xn += gy * xn[j];
                        dgain[j] += gi[j] * xn[j];
                        dbias[j] += gi[j];
                    }
                    mean_gy /= d as f64;
                    mean_gy_xn /= d as f64;
                    for j in 0..d {
                        let gy = gi[j] * vg.data()[j];
                        dx.set(i, j, (gy - mean_gy - xn[j] * mean_gy_xn) * inv_sigma[i]);
                    }
                }
                store.accumulate(x, dx);
                store.accumulate(gain, Tensor::from_vec(&[d], dgain));
                store.accumulate(bias, Tensor::from_vec(&[d], dbias));
            })),
        )
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.cols(), vb.cols(), "concat_rows width mismatch");
        let (na, nb, d) = (va.rows(), vb.rows(), va.cols());
        let mut data = Vec::with_capacity((na + nb) * d);
        data.extend_from_slice(va.data());
        data.extend_from_slice(vb.data());
        let out = Tensor::from_vec(&[na + nb, d], data);
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                let d = g.cols();
                let ga = Tensor::from_vec(&[na, d], g.data()[..na * d].to_vec());
                let gb = Tensor::from_vec(&[nb, d], g.data()[na * d..].to_vec());
                store.accumulate(a, ga);
                store.accumulate(b, gb);
            })),
        )
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let va = self.value(a);
        let (n, d) = (va.rows(), va.cols());
        assert!(start <= end && end <= n, "slice_rows out of range");
        let out = Tensor::from_vec(&[end - start, d], va.data()[start * d..end * d].to_vec());
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                let mut dx = Tensor::zeros(&[n, d]);
                dx.data_mut()[start * d..end * d].copy_from_slice(g.data());
                store.accumulate(a, dx);
            })),
        )
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let va = self.value(a);
        let (n, d) = (va.rows(), va.cols());
        assert!(start <= end && end <= d, "slice_cols out of range");
        let w = end - start;
        let mut data = Vec::with_capacity(n * w);
        for i in 0..n {
            data.extend_from_slice(&va.row(i)[start..end]);
        }
        let out = Tensor::from_vec(&[n, w], data);
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                let mut dx = Tensor::zeros(&[n, d]);
                for i in 0..n {
                    dx.row_mut(i)[start..end].copy_from_slice(g.row(i));
                }
                store.accumulate(a, dx);
            })),
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let n = self.value(parts[0]).rows();
        let widths: Vec<usize> = parts.iter().map(|&v| self.value(v).cols()).collect();
        let total: usize = widths.iter().sum();
        let mut out = Tensor::zeros(&[n, total]);
        let mut offset = 0;
        for (&v, &w) in parts.iter().zip(&widths) {
            let val = self.value(v);
            assert_eq!(val.rows(), n, "concat_cols row mismatch");
            for i in 0..n {
                out.row_mut(i)[offset..offset + w].copy_from_slice(val.row(i));
            }
            offset += w;
        }
        let parts: Vec<Var> = parts.to_vec();
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                let mut offset = 0;
                for (&v, &w) in parts.iter().zip(&widths) {
                    let mut part = Tensor::zeros(&[n, w]);
                    for i in 0..n {
                        part.row_mut(i)
                            .copy_from_slice(&g.row(i)[offset..offset + w]);
                    }
                    store.accumulate(v, part);
                    offset += w;
                }
            })),
        )
    }

    /// Gather rows of an embedding table; backward scatter-adds.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Var {
        let vt = self.value(table);
        let (v, d) = (vt.rows(), vt.cols());
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            assert!(id < v, "embedding id {id} out of range {v}");
            data.extend_from_slice(vt.row(id));
        }
        let out = Tensor::from_vec(&[ids.len(), d], data);
        let ids: Vec<usize> = ids.to_vec();
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                let mut dt = Tensor::zeros(&[v, d]);
                for (i, &id) in ids.iter().enumerate() {
                    let gr = g.row(i);
                    for (t, &gv) in dt.row_mut(id).iter_mut().zip(gr) {
                        *t += gv;
                    }
                }
                store.accumulate(table, dt);
            })),
        )
    }

    /// Replace masked rows with a single learned vector. This is how mask
    /// embeddings enter the input: gradients flow to the replacement at
    /// masked rows and to the source elsewhere, so masked content is
    /// unreachable by construction.
    pub fn substitute_rows(&mut self, src: Var, replacement: Var, mask: &[bool]) -> Var {
        let vs = self.value(src);
        let vr = self.value(replacement);
        let (n, d) = (vs.rows(), vs.cols());
        assert_eq!(mask.len(), n, "mask length mismatch");
        assert_eq!(vr.numel(), d, "replacement width mismatch");
        let mut out = vs.clone();
        for (i, &m) in mask.iter().enumerate() {
            if m {
                out.row_mut(i).copy_from_slice(vr.data());
            }
        }
        let mask: Vec<bool> = mask.to_vec();
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                let mut ds = Tensor::zeros(&[n, d]);
                let mut dr = vec![0.0; d];
                for (i, &m) in mask.iter().enumerate() {
                    let gr = g.row(i);
                    if m {
                        for (acc, &gv) in dr.iter_mut().zip(gr) {
                            *acc += gv;
                        }
                    } else {
                        ds.row_mut(i).copy_from_slice(gr);
                    }
                }
                store.accumulate(src, ds);
                store.accumulate(replacement, Tensor::from_vec(&[d], dr));
            })),
        )
    }

    /// Per-channel temporal convolution, zero padded to the same length.
    /// x: (T, C), w: (K, C), b: (C).
    pub fn depthwise_conv1d(&mut self, x: Var, w: Var, b: Var) -> Var {
        let vx = self.rc(x);
        let vw = self.rc(w);
        let vb = self.value(b);
        let (t_len, c) = (vx.rows(), vx.cols());
        let k = vw.rows();
        assert_eq!(vw.cols(), c, "depthwise kernel channels");
        assert_eq!(vb.numel(), c, "depthwise bias channels");
        assert!(k % 2 == 1, "kernel must be odd");
        let half = k / 2;
        let mut out = Tensor::zeros(&[t_len, c]);
        for t in 0..t_len {
            let row = out.row_mut(t);
            row.copy_from_slice(vb.data());
            for kk in 0..k {
                let s = t as isize + kk as isize - half as isize;
                if s < 0 || s >= t_len as isize {
                    continue;
                }
                let xs = vx.row(s as usize);
                let ws = vw.row(kk);
                for ((r, &xv), &wv) in row.iter_mut().zip(xs).zip(ws) {
                    *r += xv * wv;
                }
            }
        }
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                let mut dx = Tensor::zeros(&[t_len, c]);
                let mut dw = Tensor::zeros(&[k, c]);
                let mut db = vec![0.0; c];
                for t in 0..t_len {
                    let gt = g.row(t);
                    for (acc, &gv) in db.iter_mut().zip(gt) {
                        *acc += gv;
                    }
                    for kk in 0..k {
                        let s = t as isize + kk as isize - half as isize;
                        if s < 0 || s >= t_len as isize {
                            continue;
                        }
                        let s = s as usize;
                        {
                            let ws = vw.row(kk);
                            let dxs = dx.row_mut(s);
                            for ((d, &wv), &gv) in dxs.iter_mut().zip(ws).zip(gt) {
                                *d += wv * gv;
                            }
                        }
                        {
                            let xs = vx.row(s);
                            let dws = dw.row_mut(kk);
                            for ((d, &xv), &gv) in dws.iter_mut().zip(xs).zip(gt) {
                                *d += xv * gv;
                            }
                        }
                    }
                }
                store.accumulate(x, dx);
                store.accumulate(w, dw);
                store.accumulate(b, Tensor::from_vec(&[c], db));
            })),
        )
    }

    /// Full temporal convolution, zero padded to the same length.
    /// x: (T, Cin), w: (Cout, Cin, K), b: (Cout).
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var) -> Var {
        let vx = self.rc(x);
        let vw = self.rc(w);
        let vb = self.value(b);
        let (t_len, c_in) = (vx.rows(), vx.cols());
        let shape = vw.shape().to_vec();
        assert_eq!(shape.len(), 3, "conv1d weight must be (Cout, Cin, K)");
        let (c_out, c_in2, k) = (shape[0], shape[1], shape[2]);
        assert_eq!(c_in, c_in2, "conv1d channel mismatch");
        assert_eq!(vb.numel(), c_out, "conv1d bias channels");
        assert!(k % 2 == 1, "kernel must be odd");
        let half = k / 2;
        let mut out = Tensor::zeros(&[t_len, c_out]);
        for t in 0..t_len {
            for o in 0..c_out {
                let mut acc = vb.data()[o];
                let w_base = o * c_in * k;
                for kk in 0..k {
                    let s = t as isize + kk as isize - half as isize;
                    if s < 0 || s >= t_len as isize {
                        continue;
                    }
                    let xs = vx.row(s as usize);
                    for ci in 0..c_in {
                        acc += vw.data()[w_base + ci * k + kk] * xs[ci];
                    }
                }
                out.set(t, o, acc);
            }
        }
        self.push(
            Rc::new(out),
            Some(Box::new(move |g, store| {
                let mut dx = Tensor::zeros(&[t_len, c_in]);
                let mut dw = Tensor::zeros(&[c_out, c_in, k]);
                let mut db = vec![0.0; c_out];
                for t in 0..t_len {
                    let gt = g.row(t);
                    for (o, &gv) in gt.iter().enumerate() {
                        db[o] += gv;
                        if gv == 0.0 {
                            continue;
                        }
                        let w_base = o * c_in * k;
                        for kk in 0..k {
                            let s = t as isize + kk as isize - half as isize;
                            if s < 0 || s >= t_len as isize {
                                continue;
                            }
                            let s = s as usize;
                            let xs = vx.row(s);
                            let dxs = dx.row_mut(s);
                            for ci in 0..c_in {
                                let widx = w_base + ci * k + kk;
                                dxs[ci] += vw.data()[widx] * gv;
                                dw.data_mut()[widx] += xs[ci] * gv;
                            }
                        }
                    }
                }
                store.accumulate(x, dx);
                store.accumulate(w, dw);
                store.accumulate(b, Tensor::from_vec(&[c_out], db));
            })),
        )
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let n = va.numel() as f64;
        let shape = va.shape().to_vec();
        let mean = va.data().iter().sum::<f64>() / n;
        self.push(
            Rc::new(Tensor::scalar(mean)),
            Some(Box::new(move |g, store| {
                store.accumulate(a, Tensor::filled(&shape, g.item() / n));
            })),
        )
    }

    /// Mean absolute difference against a constant target, optionally
    /// restricted to the rows where `row_mask` is true.
    pub fn mean_abs_diff(&mut self, a: Var, target: &Tensor, row_mask: Option<&[bool]>) -> Var {
        let va = self.rc(a);
        assert_eq!(va.shape(), target.shape(), "mean_abs_diff shape mismatch");
        let (n, d) = (va.rows(), va.cols());
        let rows: Vec<usize> = match row_mask {
            Some(mask) => {
                assert_eq!(mask.len(), n, "row mask length");
                mask.iter()
                    .enumerate()
                    .filter_map(|(i, &m)| m.then_some(i))
                    .collect()
            }
            None => (0..n).collect(),
        };
        if rows.is_empty() {
            return self.constant(Tensor::scalar(0.0));
        }
        let count = (rows.len() * d) as f64;
        let mut total = 0.0;
        for &i in &rows {
            for (x, t) in va.row(i).iter().zip(target.row(i)) {
                total += (x - t).abs();
            }
        }
        let target = target.clone();
        self.push(
            Rc::new(Tensor::scalar(total / count)),
            Some(Box::new(move |g, store| {
                let scale = g.item() / count;
                let mut dx = Tensor::zeros(&[n, d]);
                for &i in &rows {
                    let xr = va.row(i);
                    let tr = target.row(i);
                    for (j, o) in dx.row_mut(i).iter_mut().enumerate() {
                        let diff = xr[j] - tr[j];
                        *o = scale * if diff > 0.0 { 1.0 } else if diff < 0.0 { -1.0 } else { 0.0 };
                    }
                }
                store.accumulate(a, dx);
            })),
        )
    }

    /// Mean cross-entropy of `logits` rows listed in `rows` against target
    /// ids. Returns constant 0 when no rows are selected.
    pub fn masked_cross_entropy(&mut self, logits: Var, rows: &[usize], targets: &[usize]) -> Var {
        assert_eq!(rows.len(), targets.len(), "rows/targets length mismatch");
        if rows.is_empty() {
            return self.constant(Tensor::scalar(0.0));
        }
        let vl = self.value(logits);
        let (n, v) = (vl.rows(), vl.cols());
        let mut probs = Tensor::zeros(&[rows.len(), v]);
        let mut total = 0.0;
        for (r, (&row, &target)) in rows.iter().zip(targets).enumerate() {
            assert!(row < n, "row {row} out of range {n}");
            assert!(target < v, "target id {target} out of range {v}");
            let x = vl.row(row);
            let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (p, &xv) in probs.row_mut(r).iter_mut().zip(x) {
                *p = (xv - max).exp();
                sum += *p;
            }
            for p in probs.row_mut(r) {
                *p /= sum;
            }
            total -= (probs.at(r, target)).ln();
        }
        let count = rows.len() as f64;
        let rows: Vec<usize> = rows.to_vec();
        let targets: Vec<usize> = targets.to_vec();
        self.push(
            Rc::new(Tensor::scalar(total / count)),
            Some(Box::new(move |g, store| {
                let scale = g.item() / count;
                let mut dl = Tensor::zeros(&[n, v]);
                for (r, (&row, &target)) in rows.iter().zip(&targets).enumerate() {
                    let pr = probs.row(r);
                    let dr = dl.row_mut(row);
                    for (j, (d, &p)) in dr.iter_mut().zip(pr).enumerate() {
                        *d += scale * (p - if j == target { 1.0 } else { 0.0 });
                    }
                }
                store.accumulate(logits, dl);
            })),
        )
    }

    /// Inverted dropout. `keep` must not be empty of signal: p in [0, 1).
    pub fn dropout(&mut self, a: Var, p: f64, rng: &mut impl rand::Rng) -> Var {
        assert!((0.0..1.0).contains(&p), "dropout p must be in [0, 1)");
        if p == 0.0 {
            return a;
        }
        let shape = self.value(a).shape().to_vec();
        let scale = 1.0 / (1.0 - p);
        let mask = Tensor::from_vec(
            &shape,
            (0..shape.iter().product())
                .map(|_| if rng.gen::<f64>() < p { 0.0 } else { scale })
                .collect(),
        );
        let m = self.constant(mask);
        self.mul(a, m)
    }
}

fn b_id(v: Var) -> Var {
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        Tensor::from_vec(
            shape,
            (0..shape.iter().product())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        )
    }

    /// Central-difference check of every input's gradient.
    fn check_grads(inputs: &[Tensor], build: impl Fn(&mut Tape, &[Var]) -> Var) {
        let eval = |tensors: &[Tensor]| -> f64 {
            let mut tape = Tape::new();
            let vars: Vec<Var> = tensors
                .iter()
                .map(|t| tape.leaf(Rc::new(t.clone())))
                .collect();
            let loss = build(&mut tape, &vars);
            tape.value(loss).item()
        };

        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs
            .iter()
            .map(|t| tape.leaf(Rc::new(t.clone())))
            .collect();
        let loss = build(&mut tape, &vars);
        let grads = tape.backward(loss);

        let h = 1e-6;
        for (i, input) in inputs.iter().enumerate() {
            let analytic = grads
                .get(vars[i])
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(input.shape()));
            for j in 0..input.numel() {
                let mut plus = inputs.to_vec();
                plus[i].data_mut()[j] += h;
                let mut minus = inputs.to_vec();
                minus[i].data_mut()[j] -= h;
                let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let a = analytic.data()[j];
                let denom = a.abs().max(numeric.abs()).max(1e-4);
                assert!(
                    (a - numeric).abs() / denom < 1e-5,
                    "input {i} element {j}: analytic {a} vs numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn elementwise_ops_grad_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = rand_tensor(&mut rng, &[3, 4]);
        let b = rand_tensor(&mut rng, &[3, 4]);
        check_grads(&[a.clone(), b.clone()], |t, v| {
            let s = t.add(v[0], v[1]);
            let d = t.sub(s, v[1]);
            let m = t.mul(d, v[0]);
            let sc = t.scale(m, 0.7);
            t.mean_all(sc)
        });
    }

    #[test]
    fn activation_grad_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = rand_tensor(&mut rng, &[2, 5]);
        check_grads(&[a], |t, v| {
            let x = t.tanh(v[0]);
            let y = t.silu(x);
            let z = t.sigmoid(y);
            t.mean_all(z)
        });
    }

    #[test]
    fn matmul_and_bias_grad_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_tensor(&mut rng, &[3, 4]);
        let w = rand_tensor(&mut rng, &[4, 2]);
        let b = rand_tensor(&mut rng, &[2]);
        check_grads(&[x, w, b], |t, v| {
            let y = t.matmul(v[0], v[1]);
            let y = t.add_bias(y, v[2]);
            let y = t.tanh(y);
            t.mean_all(y)
        });
    }

    #[test]
    fn matmul_bt_grad_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = rand_tensor(&mut rng, &[3, 4]);
        let k = rand_tensor(&mut rng, &[5, 4]);
        check_grads(&[q, k], |t, v| {
            let scores = t.matmul_bt(v[0], v[1]);
            let attn = t.softmax_rows(scores);
            t.mean_all(attn)
        });
    }

    #[test]
    fn layer_norm_grad_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = rand_tensor(&mut rng, &[3, 6]);
        let g = rand_tensor(&mut rng, &[6]);
        let b = rand_tensor(&mut rng, &[6]);
        check_grads(&[x, g, b], |t, v| {
            let y = t.layer_norm(v[0], v[1], v[2], 1e-5);
            let y = t.silu(y);
            t.mean_all(y)
        });
    }

    #[test]
    fn slicing_and_concat_grad_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = rand_tensor(&mut rng, &[4, 6]);
        let b = rand_tensor(&mut rng, &[2, 6]);
        check_grads(&[a, b], |t, v| {
            let joined = t.concat_rows(v[0], v[1]);
            let left = t.slice_cols(joined, 0, 3);
            let right = t.slice_cols(joined, 3, 6);
            let prod = t.mul(left, right);
            let top = t.slice_rows(prod, 1, 5);
            let both = t.concat_cols(&[top, top]);
            t.mean_all(both)
        });
    }

    #[test]
    fn embedding_and_substitute_grad_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let table = rand_tensor(&mut rng, &[5, 3]);
        let src = rand_tensor(&mut rng, &[4, 3]);
        let rep = rand_tensor(&mut rng, &[3]);
        check_grads(&[table, src, rep], |t, v| {
            let emb = t.embedding(v[0], &[1, 3, 3, 0]);
            let sub = t.substitute_rows(v[1], v[2], &[true, false, true, false]);
            let sum = t.add(emb, sub);
            t.mean_all(sum)
        });
    }

    #[test]
    fn depthwise_conv_grad_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = rand_tensor(&mut rng, &[7, 3]);
        let w = rand_tensor(&mut rng, &[5, 3]);
        let b = rand_tensor(&mut rng, &[3]);
        check_grads(&[x, w, b], |t, v| {
            let y = t.depthwise_conv1d(v[0], v[1], v[2]);
            let y = t.tanh(y);
            t.mean_all(y)
        });
    }

    #[test]
    fn conv1d_grad_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = rand_tensor(&mut rng, &[6, 2]);
        let w = rand_tensor(&mut rng, &[3, 2, 3]);
        let b = rand_tensor(&mut rng, &[3]);
        check_grads(&[x, w, b], |t, v| {
            let y = t.conv1d(v[0], v[1], v[2]);
            let y = t.silu(y);
            t.mean_all(y)
        });
    }

    #[test]
    fn mae_grad_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = rand_tensor(&mut rng, &[4, 3]);
        let target = rand_tensor(&mut rng, &[4, 3]);
        check_grads(&[x], |t, v| {
            t.mean_abs_diff(v[0], &target, None)
        });
        let mask = [true, false, true, true];
        check_grads(&[rand_tensor(&mut rng, &[4, 3])], |t, v| {
            t.mean_abs_diff(v[0], &target, Some(&mask))
        });
    }

    #[test]
    fn cross_entropy_grad_check_and_uniform_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let logits = rand_tensor(&mut rng, &[5, 4]);
        check_grads(&[logits], |t, v| {
            t.masked_cross_entropy(v[0], &[0, 2, 4], &[1, 3, 0])
        });
        // Uniform logits give ln(V).
        let mut tape = Tape::new();
        let flat = tape.constant(Tensor::zeros(&[3, 4]));
        let loss = tape.masked_cross_entropy(flat, &[0, 1], &[2, 0]);
        assert!((tape.value(loss).item() - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_mask_losses_are_constant_zero() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::filled(&[3, 2], 1.5));
        let ce = tape.masked_cross_entropy(x, &[], &[]);
        assert_eq!(tape.value(ce).item(), 0.0);
        let target = Tensor::zeros(&[3, 2]);
        let mae = tape.mean_abs_diff(x, &target, Some(&[false, false, false]));
        assert_eq!(tape.value(mae).item(), 0.0);
    }

    #[test]
    fn dropout_eval_passthrough_and_train_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::filled(&[100, 10], 1.0));
        let same = tape.dropout(x, 0.0, &mut rng);
        assert_eq!(same, x);
        let dropped = tape.dropout(x, 0.3, &mut rng);
        let mean: f64 =
            tape.value(dropped).data().iter().sum::<f64>() / tape.value(dropped).numel() as f64;
        assert!((mean - 1.0).abs() < 0.1, "inverted dropout keeps the mean, got {mean}");
    }
}
