//! Tape-based reverse-mode differentiation.
//!
//! Forward calls append nodes to the tape and validate shapes and finiteness
//! eagerly; `backward` replays the tape in reverse, accumulating gradients
//! in a fixed order so results are deterministic.

use crate::tensor::Tensor;
use crate::Error;

/// Handle to a value on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Val(pub usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf { requires_grad: bool },
    MatMul(Val, Val),
    Add(Val, Val),
    Sub(Val, Val),
    Mul(Val, Val),
    Scale(Val, f64),
    AddScalar(Val, f64),
    Tanh(Val),
    Sigmoid(Val),
    SoftmaxAxis0(Val),
    ConcatRows(Vec<Val>),
    ConcatCols(Vec<Val>),
    SumRows(Val),
    MeanRows(Val),
    SumAll(Val),
    SelectRow(Val, usize),
    BceWithLogits(Val, Tensor),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients per tape node after a backward pass.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a node; zeros when the node never influenced the root.
    pub fn of(&self, v: Val, shape_hint: &Tensor) -> Tensor {
        self.grads[v.0]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(&shape_hint.shape))
    }

    pub fn raw(&self, v: Val) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Val) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Val {
        self.nodes.push(Node { value, op });
        Val(self.nodes.len() - 1)
    }

    fn push_checked(&mut self, value: Tensor, op: Op, name: &str) -> Result<Val, Error> {
        value.check_finite(name)?;
        Ok(self.push(value, op))
    }

    /// Constant leaf: participates in the forward pass, receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Val {
        self.push(
            t,
            Op::Leaf {
                requires_grad: false,
            },
        )
    }

    /// Differentiable leaf (a parameter).
    pub fn leaf(&mut self, t: Tensor) -> Val {
        self.push(
            t,
            Op::Leaf {
                requires_grad: true,
            },
        )
    }

    pub fn matmul(&mut self, a: Val, b: Val) -> Result<Val, Error> {
        let (ar, ac) = self.value(a).dims2();
        let (br, bc) = self.value(b).dims2();
        if ac != br {
            return Err(Error::ShapeMismatch {
                op: "matmul".into(),
                detail: format!("[{ar},{ac}] x [{br},{bc}]"),
            });
        }
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let mut out = vec![0.0; ar * bc];
        for i in 0..ar {
            for k in 0..ac {
                let aik = av.data[i * ac + k];
                if aik == 0.0 {
                    continue;
                }
                let row = k * bc;
                let orow = i * bc;
                for j in 0..bc {
                    out[orow + j] += aik * bv.data[row + j];
                }
            }
        }
        self.push_checked(
            Tensor {
                shape: vec![ar, bc],
                data: out,
            },
            Op::MatMul(a, b),
            "matmul",
        )
    }

    fn zip_same_shape(
        &mut self,
        a: Val,
        b: Val,
        name: &str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Val, Error> {
        if self.value(a).shape != self.value(b).shape {
            return Err(Error::ShapeMismatch {
                op: name.into(),
                detail: format!("{:?} vs {:?}", self.value(a).shape, self.value(b).shape),
            });
        }
        let data = self
            .value(a)
            .data
            .iter()
            .zip(&self.value(b).data)
            .map(|(x, y)| f(*x, *y))
            .collect();
        let t = Tensor {
            shape: self.value(a).shape.clone(),
            data,
        };
        self.push_checked(t, op, name)
    }

    pub fn add(&mut self, a: Val, b: Val) -> Result<Val, Error> {
        self.zip_same_shape(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Val, b: Val) -> Result<Val, Error> {
        self.zip_same_shape(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Val, b: Val) -> Result<Val, Error> {
        self.zip_same_shape(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Val, k: f64) -> Result<Val, Error> {
        let t = self.value(a).map(|x| x * k);
        self.push_checked(t, Op::Scale(a, k), "scale")
    }

    pub fn add_scalar(&mut self, a: Val, c: f64) -> Result<Val, Error> {
        let t = self.value(a).map(|x| x + c);
        self.push_checked(t, Op::AddScalar(a, c), "add_scalar")
    }

    pub fn tanh(&mut self, a: Val) -> Result<Val, Error> {
        let t = self.value(a).map(f64::tanh);
        self.push_checked(t, Op::Tanh(a), "tanh")
    }

    pub fn sigmoid(&mut self, a: Val) -> Result<Val, Error> {
        let t = self.value(a).map(sigmoid);
        self.push_checked(t, Op::Sigmoid(a), "sigmoid")
    }

    /// Softmax down each column (across rows), with max subtraction.
    pub fn softmax_axis0(&mut self, a: Val) -> Result<Val, Error> {
        let (r, c) = self.value(a).dims2();
        let av = &self.nodes[a.0].value;
        let mut out = vec![0.0; r * c];
        for j in 0..c {
            let mut m = f64::NEG_INFINITY;
            for i in 0..r {
                m = m.max(av.data[i * c + j]);
            }
            let mut sum = 0.0;
            for i in 0..r {
                let e = (av.data[i * c + j] - m).exp();
                out[i * c + j] = e;
                sum += e;
            }
            for i in 0..r {
                out[i * c + j] /= sum;
            }
        }
        self.push_checked(
            Tensor {
                shape: vec![r, c],
                data: out,
            },
            Op::SoftmaxAxis0(a),
            "softmax",
        )
    }

    /// Stack row vectors (or matrices with equal widths) on top of each
    /// other.
    pub fn concat_rows(&mut self, parts: &[Val]) -> Result<Val, Error> {
        if parts.is_empty() {
            return Err(Error::ShapeMismatch {
                op: "concat_rows".into(),
                detail: "empty input".into(),
            });
        }
        let (_, c0) = self.value(parts[0]).dims2();
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let (r, c) = self.value(*p).dims2();
            if c != c0 {
                return Err(Error::ShapeMismatch {
                    op: "concat_rows".into(),
                    detail: format!("width {c} vs {c0}"),
                });
            }
            rows += r;
            data.extend_from_slice(&self.value(*p).data);
        }
        self.push_checked(
            Tensor {
                shape: vec![rows, c0],
                data,
            },
            Op::ConcatRows(parts.to_vec()),
            "concat_rows",
        )
    }

    /// Concatenate along columns; inputs must have the same row count.
    pub fn concat_cols(&mut self, parts: &[Val]) -> Result<Val, Error> {
        if parts.is_empty() {
            return Err(Error::ShapeMismatch {
                op: "concat_cols".into(),
                detail: "empty input".into(),
            });
        }
        let (r0, _) = self.value(parts[0]).dims2();
        let widths: Vec<usize> = parts.iter().map(|p| self.value(*p).dims2().1).collect();
        let total: usize = widths.iter().sum();
        let mut data = vec![0.0; r0 * total];
        let mut offset = 0;
        for (p, w) in parts.iter().zip(&widths) {
            let (r, _) = self.value(*p).dims2();
            if r != r0 {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols".into(),
                    detail: format!("rows {r} vs {r0}"),
                });
            }
            for i in 0..r0 {
                for j in 0..*w {
                    data[i * total + offset + j] = self.value(*p).data[i * w + j];
                }
            }
            offset += w;
        }
        self.push_checked(
            Tensor {
                shape: vec![r0, total],
                data,
            },
            Op::ConcatCols(parts.to_vec()),
            "concat_cols",
        )
    }

    pub fn sum_rows(&mut self, a: Val) -> Result<Val, Error> {
        let (r, c) = self.value(a).dims2();
        let mut out = vec![0.0; c];
        for i in 0..r {
            for j in 0..c {
                out[j] += self.value(a).data[i * c + j];
            }
        }
        self.push_checked(
            Tensor {
                shape: vec![1, c],
                data: out,
            },
            Op::SumRows(a),
            "sum_rows",
        )
    }

    pub fn mean_rows(&mut self, a: Val) -> Result<Val, Error> {
        let (r, c) = self.value(a).dims2();
        let mut out = vec![0.0; c];
        for i in 0..r {
            for j in 0..c {
                out[j] += self.value(a).data[i * c + j];
            }
        }
        for v in &mut out {
            *v /= r as f64;
        }
        self.push_checked(
            Tensor {
                shape: vec![1, c],
                data: out,
            },
            Op::MeanRows(a),
            "mean_rows",
        )
    }

    pub fn sum_all(&mut self, a: Val) -> Result<Val, Error> {
        let s: f64 = self.value(a).data.iter().sum();
        self.push_checked(Tensor::scalar(s), Op::SumAll(a), "sum_all")
    }

    pub fn select_row(&mut self, a: Val, row: usize) -> Result<Val, Error> {
        let (r, c) = self.value(a).dims2();
        if row >= r {
            return Err(Error::ShapeMismatch {
                op: "select_row".into(),
                detail: format!("row {row} of {r}"),
            });
        }
        let data = self.value(a).data[row * c..(row + 1) * c].to_vec();
        self.push_checked(
            Tensor {
                shape: vec![1, c],
                data,
            },
            Op::SelectRow(a, row),
            "select_row",
        )
    }

    /// Numerically stable binary cross entropy against constant targets,
    /// elementwise over logits.
    pub fn bce_with_logits(&mut self, logits: Val, targets: Tensor) -> Result<Val, Error> {
        if self.value(logits).shape != targets.shape {
            return Err(Error::ShapeMismatch {
                op: "bce_with_logits".into(),
                detail: format!("{:?} vs {:?}", self.value(logits).shape, targets.shape),
            });
        }
        let data = self
            .value(logits)
            .data
            .iter()
            .zip(&targets.data)
            .map(|(x, y)| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p())
            .collect();
        let t = Tensor {
            shape: targets.shape.clone(),
            data,
        };
        self.push_checked(t, Op::BceWithLogits(logits, targets), "bce_with_logits")
    }

    /// Reverse pass from a scalar root. Gradients for every node reachable
    /// backward from the root; leaves created with `constant` are skipped.
    pub fn backward(&mut self, root: Val) -> Result<Gradients, Error> {
        if self.value(root).len() != 1 {
            return Err(Error::NonScalarRoot {
                shape: self.value(root).shape.clone(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].clone() else {
                continue;
            };
            let op = self.nodes[idx].op.clone();
            match op {
                Op::Leaf { .. } => {}
                Op::MatMul(a, b) => {
                    let (ar, ac) = self.value(a).dims2();
                    let (_, bc) = self.value(b).dims2();
                    // dA = g . B^T
                    let bv = self.value(b).data.clone();
                    let mut da = vec![0.0; ar * ac];
                    for i in 0..ar {
                        for j in 0..bc {
                            let gij = g.data[i * bc + j];
                            if gij == 0.0 {
                                continue;
                            }
                            for k in 0..ac {
                                da[i * ac + k] += gij * bv[k * bc + j];
                            }
                        }
                    }
                    // dB = A^T . g
                    let av = self.value(a).data.clone();
                    let mut db = vec![0.0; ac * bc];
                    for k in 0..ac {
                        for i in 0..ar {
                            let aik = av[i * ac + k];
                            if aik == 0.0 {
                                continue;
                            }
                            for j in 0..bc {
                                db[k * bc + j] += aik * g.data[i * bc + j];
                            }
                        }
                    }
                    self.accumulate(&mut grads, a, Tensor { shape: vec![ar, ac], data: da });
                    self.accumulate(&mut grads, b, Tensor { shape: vec![ac, bc], data: db });
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut grads, a, g.clone());
                    self.accumulate(&mut grads, b, g);
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut grads, a, g.clone());
                    self.accumulate(&mut grads, b, g.map(|x| -x));
                }
                Op::Mul(a, b) => {
                    let ga = Tensor {
                        shape: g.shape.clone(),
                        data: g
                            .data
                            .iter()
                            .zip(&self.value(b).data)
                            .map(|(gx, bx)| gx * bx)
                            .collect(),
                    };
                    let gb = Tensor {
                        shape: g.shape.clone(),
                        data: g
                            .data
                            .iter()
                            .zip(&self.value(a).data)
                            .map(|(gx, ax)| gx * ax)
                            .collect(),
                    };
                    self.accumulate(&mut grads, a, ga);
                    self.accumulate(&mut grads, b, gb);
                }
                Op::Scale(a, k) => {
                    self.accumulate(&mut grads, a, g.map(|x| x * k));
                }
                Op::AddScalar(a, _) => {
                    self.accumulate(&mut grads, a, g);
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[idx].value;
                    let da = Tensor {
                        shape: g.shape.clone(),
                        data: g
                            .data
                            .iter()
                            .zip(&y.data)
                            .map(|(gx, yx)| gx * (1.0 - yx * yx))
                            .collect(),
                    };
                    self.accumulate(&mut grads, a, da);
                }
                Op::Sigmoid(a) => {
                    let y = &self.nodes[idx].value;
                    let da = Tensor {
                        shape: g.shape.clone(),
                        data: g
                            .data
                            .iter()
                            .zip(&y.data)
                            .map(|(gx, yx)| gx * yx * (1.0 - yx))
                            .collect(),
                    };
                    self.accumulate(&mut grads, a, da);
                }
                Op::SoftmaxAxis0(a) => {
                    let y = self.nodes[idx].value.clone();
                    let (r, c) = y.dims2();
                    let mut da = vec![0.0; r * c];
                    for j in 0..c {
                        let mut dot = 0.0;
                        for i in 0..r {
                            dot += g.data[i * c + j] * y.data[i * c + j];
                        }
                        for i in 0..r {
                            da[i * c + j] = y.data[i * c + j] * (g.data[i * c + j] - dot);
                        }
                    }
                    self.accumulate(
                        &mut grads,
                        a,
                        Tensor {
                            shape: vec![r, c],
                            data: da,
                        },
                    );
                }
                Op::ConcatRows(parts) => {
                    let (_, c) = self.nodes[idx].value.dims2();
                    let mut row = 0;
                    for p in parts {
                        let (pr, _) = self.value(p).dims2();
                        let slice = g.data[row * c..(row + pr) * c].to_vec();
                        self.accumulate(
                            &mut grads,
                            p,
                            Tensor {
                                shape: self.value(p).shape.clone(),
                                data: slice,
                            },
                        );
                        row += pr;
                    }
                }
                Op::ConcatCols(parts) => {
                    let (r, total) = self.nodes[idx].value.dims2();
                    let mut offset = 0;
                    for p in parts {
                        let (_, w) = self.value(p).dims2();
                        let mut slice = vec![0.0; r * w];
                        for i in 0..r {
                            for j in 0..w {
                                slice[i * w + j] = g.data[i * total + offset + j];
                            }
                        }
                        self.accumulate(
                            &mut grads,
                            p,
                            Tensor {
                                shape: self.value(p).shape.clone(),
                                data: slice,
                            },
                        );
                        offset += w;
                    }
                }
                Op::SumRows(a) => {
                    let (r, c) = self.value(a).dims2();
                    let mut da = vec![0.0; r * c];
                    for i in 0..r {
                        for j in 0..c {
                            da[i * c + j] = g.data[j];
                        }
                    }
                    self.accumulate(
                        &mut grads,
                        a,
                        Tensor {
                            shape: self.value(a).shape.clone(),
                            data: da,
                        },
                    );
                }
                Op::MeanRows(a) => {
                    let (r, c) = self.value(a).dims2();
                    let scale = 1.0 / r as f64;
                    let mut da = vec![0.0; r * c];
                    for i in 0..r {
                        for j in 0..c {
                            da[i * c + j] = g.data[j] * scale;
                        }
                    }
                    self.accumulate(
                        &mut grads,
                        a,
                        Tensor {
                            shape: self.value(a).shape.clone(),
                            data: da,
                        },
                    );
                }
                Op::SumAll(a) => {
                    let da = Tensor::full(&self.value(a).shape, g.data[0]);
                    self.accumulate(&mut grads, a, da);
                }
                Op::SelectRow(a, row) => {
                    let (r, c) = self.value(a).dims2();
                    let mut da = vec![0.0; r * c];
                    da[row * c..(row + 1) * c].copy_from_slice(&g.data);
                    self.accumulate(
                        &mut grads,
                        a,
                        Tensor {
                            shape: self.value(a).shape.clone(),
                            data: da,
                        },
                    );
                }
                Op::BceWithLogits(a, targets) => {
                    let da = Tensor {
                        shape: g.shape.clone(),
                        data: self
                            .value(a)
                            .data
                            .iter()
                            .zip(&targets.data)
                            .zip(&g.data)
                            .map(|((x, y), gx)| gx * (sigmoid(*x) - y))
                            .collect(),
                    };
                    self.accumulate(&mut grads, a, da);
                }
            }
        }
        for g in grads.iter().flatten() {
            g.check_finite("backward")?;
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], target: Val, add: Tensor) {
        if let Op::Leaf {
            requires_grad: false,
        } = self.nodes[target.0].op
        {
            return;
        }
        match &mut grads[target.0] {
            Some(existing) => {
                for (e, a) in existing.data.iter_mut().zip(&add.data) {
                    *e += a;
                }
            }
            slot @ None => *slot = Some(add),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_with_identity_is_identity() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![1, 3], vec![1.0, -2.0, 3.5]).unwrap());
        let eye = tape.constant(
            Tensor::new(vec![3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap(),
        );
        let y = tape.matmul(x, eye).unwrap();
        assert_eq!(tape.value(y).data, vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn softmax_of_equal_inputs_is_uniform() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![4, 1], vec![2.5; 4]).unwrap());
        let y = tape.softmax_axis0(x).unwrap();
        for v in &tape.value(y).data {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_columns_sum_to_one() {
        let mut tape = Tape::new();
        let x = tape.constant(
            Tensor::new(vec![3, 2], vec![1.0, -50.0, 2.0, 0.0, -3.0, 120.0]).unwrap(),
        );
        let y = tape.softmax_axis0(x).unwrap();
        let t = tape.value(y);
        for j in 0..2 {
            let s: f64 = (0..3).map(|i| t.at(i, j)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sum_rows_of_single_row_is_that_row() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::row(&[4.0, 5.0]));
        let y = tape.sum_rows(x).unwrap();
        assert_eq!(tape.value(y).data, vec![4.0, 5.0]);
    }

    #[test]
    fn linear_loss_gradient_has_outer_product_structure() {
        // loss = sum(x . W) => dW[i][j] = x[i]
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::row(&[2.0, -1.0, 0.5]));
        let w = tape.leaf(Tensor::new(vec![3, 2], vec![0.1; 6]).unwrap());
        let y = tape.matmul(x, w).unwrap();
        let loss = tape.sum_all(y).unwrap();
        let grads = tape.backward(loss).unwrap();
        let gw = grads.raw(w).unwrap();
        assert_eq!(gw.data, vec![2.0, 2.0, -1.0, -1.0, 0.5, 0.5]);
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::row(&[1.0]));
        let w = tape.leaf(Tensor::row(&[3.0]));
        let y = tape.mul(x, w).unwrap();
        let loss = tape.sum_all(y).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!(grads.raw(x).is_none());
        assert_eq!(grads.raw(w).unwrap().data, vec![1.0]);
    }

    #[test]
    fn unused_leaf_reads_back_as_zeros() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::row(&[3.0, 4.0]));
        let u = tape.leaf(Tensor::row(&[1.0, 1.0]));
        let s = tape.sum_all(w).unwrap();
        let grads = tape.backward(s).unwrap();
        let unused = grads.of(u, tape.value(u));
        assert_eq!(unused.data, vec![0.0, 0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_root() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::row(&[1.0, 2.0]));
        assert!(matches!(
            tape.backward(w),
            Err(Error::NonScalarRoot { .. })
        ));
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::row(&[1.0, 2.0]));
        let b = tape.constant(Tensor::row(&[1.0, 2.0, 3.0]));
        match tape.add(a, b) {
            Err(Error::ShapeMismatch { detail, .. }) => {
                assert!(detail.contains("[1, 2]") && detail.contains("[1, 3]"));
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn bce_matches_manual_formula() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::row(&[0.3, -1.2]));
        let t = Tensor::row(&[1.0, 0.0]);
        let l = tape.bce_with_logits(x, t).unwrap();
        let v = tape.value(l);
        let expect0 = -(sigmoid(0.3)).ln();
        let expect1 = -(1.0 - sigmoid(-1.2)).ln();
        assert!((v.data[0] - expect0).abs() < 1e-12);
        assert!((v.data[1] - expect1).abs() < 1e-12);
    }
}
