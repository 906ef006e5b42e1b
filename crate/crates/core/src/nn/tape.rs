//! Reverse-mode tape over dense matrices.
//!
//! Every value is an `Array2<f64>`; scalars are 1×1. Nodes are appended in
//! evaluation order, so walking the tape backwards visits each node after all
//! of its consumers.

use ndarray::{s, Array2, Axis};

use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf { trainable: bool },
    /// x·Wᵀ + b, with W out×in and b 1×out.
    Affine { x: Var, w: Var, b: Var },
    Sigmoid(Var),
    ConcatCols { a: Var, b: Var, split: usize },
    /// Mean over rows of the squared row-wise Euclidean distance.
    RowMse { pred: Var, target: Var },
    /// A scalar function of `input` whose gradient was supplied at forward time.
    CustomScalar { input: Var, grad: Array2<f64> },
    Add(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Square(Var),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros shaped like `like` when no path reached it.
    pub fn get_or_zeros(&self, v: Var, like: &Array2<f64>) -> Array2<f64> {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Array2::zeros(like.raw_dim()))
    }
}

/// `x·Wᵀ + b` shared by the tape and tape-free inference so both paths agree bitwise.
pub fn affine(x: &Array2<f64>, w: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let mut out = x.dot(&w.t());
    out += b;
    out
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_matrix(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(sigmoid)
}

fn scalar(v: f64) -> Array2<f64> {
    Array2::from_elem((1, 1), v)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// A value that receives a gradient (parameters).
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf { trainable: true })
    }

    /// A value treated as constant (data, targets).
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf { trainable: false })
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let val = self.value(v);
        debug_assert_eq!(val.dim(), (1, 1));
        val[[0, 0]]
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    fn require_scalar(&self, v: Var, what: &str) -> Result<()> {
        if self.shape(v) != (1, 1) {
            return Err(Error::Dimension(format!(
                "{what} expects a scalar, got {:?}",
                self.shape(v)
            )));
        }
        Ok(())
    }

    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (n, fan_in) = self.shape(x);
        let (out, w_in) = self.shape(w);
        if fan_in != w_in || self.shape(b) != (1, out) {
            return Err(Error::Dimension(format!(
                "affine: input {n}x{fan_in}, weight {out}x{w_in}, bias {:?}",
                self.shape(b)
            )));
        }
        let value = affine(self.value(x), self.value(w), self.value(b));
        Ok(self.push(value, Op::Affine { x, w, b }))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = sigmoid_matrix(self.value(x));
        self.push(value, Op::Sigmoid(x))
    }

    /// Columns of `a` followed by columns of `b`.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, ca) = self.shape(a);
        let (nb, _) = self.shape(b);
        if na != nb {
            return Err(Error::Dimension(format!("concat: {na} rows vs {nb} rows")));
        }
        let value = ndarray::concatenate(Axis(1), &[self.value(a).view(), self.value(b).view()])
            .expect("row counts checked");
        Ok(self.push(value, Op::ConcatCols { a, b, split: ca }))
    }

    pub fn row_mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        if self.shape(pred) != self.shape(target) {
            return Err(Error::Dimension(format!(
                "mse: prediction {:?} vs target {:?}",
                self.shape(pred),
                self.shape(target)
            )));
        }
        let value = row_mse(self.value(pred), self.value(target));
        Ok(self.push(scalar(value), Op::RowMse { pred, target }))
    }

    /// Records a scalar function of `input` given its value and gradient at this point.
    pub fn custom_scalar(&mut self, input: Var, value: f64, grad: Array2<f64>) -> Result<Var> {
        if grad.dim() != self.shape(input) {
            return Err(Error::Dimension(format!(
                "custom node gradient {:?} vs input {:?}",
                grad.dim(),
                self.shape(input)
            )));
        }
        Ok(self.push(scalar(value), Op::CustomScalar { input, grad }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Dimension(format!(
                "add: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let value = self.value(a) + self.value(b);
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) * c;
        self.push(value, Op::Scale(a, c))
    }

    /// `c + a` for a scalar `a`.
    pub fn offset(&mut self, a: Var, c: f64) -> Result<Var> {
        self.require_scalar(a, "offset")?;
        let value = scalar(c + self.scalar(a));
        Ok(self.push(value, Op::Offset(a)))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|v| v * v);
        self.push(value, Op::Square(a))
    }

    fn wants_grad(&self, v: Var) -> bool {
        !matches!(self.nodes[v.0].op, Op::Leaf { trainable: false })
    }

    /// Accumulates d(output)/d(node) for every node feeding a scalar `output`.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        self.require_scalar(output, "backward")?;
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(scalar(1.0));

        fn accumulate(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(acc) => *acc += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=output.0).rev() {
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf { trainable } => {
                    if *trainable {
                        grads[idx] = Some(upstream);
                    }
                    continue;
                }
                Op::Affine { x, w, b } => {
                    if self.wants_grad(*x) {
                        accumulate(&mut grads, *x, upstream.dot(self.value(*w)));
                    }
                    accumulate(&mut grads, *w, upstream.t().dot(self.value(*x)));
                    accumulate(&mut grads, *b, upstream.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
                Op::Sigmoid(x) => {
                    let mut g = upstream;
                    g.zip_mut_with(&node.value, |d, &s| *d *= s * (1.0 - s));
                    accumulate(&mut grads, *x, g);
                }
                Op::ConcatCols { a, b, split } => {
                    accumulate(&mut grads, *a, upstream.slice(s![.., ..*split]).to_owned());
                    accumulate(&mut grads, *b, upstream.slice(s![.., *split..]).to_owned());
                }
                Op::RowMse { pred, target } => {
                    let up = upstream[[0, 0]];
                    let n = self.shape(*pred).0 as f64;
                    let diff = self.value(*pred) - self.value(*target);
                    let g = diff.mapv(|d| 2.0 * up * d / n);
                    if self.wants_grad(*target) {
                        accumulate(&mut grads, *target, -&g);
                    }
                    accumulate(&mut grads, *pred, g);
                }
                Op::CustomScalar { input, grad } => {
                    accumulate(&mut grads, *input, grad * upstream[[0, 0]]);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, upstream.clone());
                    accumulate(&mut grads, *b, upstream);
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, upstream * *c),
                Op::Offset(a) => accumulate(&mut grads, *a, upstream),
                Op::Square(a) => {
                    let g = &upstream * &self.value(*a).mapv(|v| 2.0 * v);
                    accumulate(&mut grads, *a, g);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Mean over rows of Σ_j (pred_ij − target_ij)².
pub fn row_mse(pred: &Array2<f64>, target: &Array2<f64>) -> f64 {
    let n = pred.nrows() as f64;
    let total: f64 = pred
        .iter()
        .zip(target.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    total / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sigmoid_saturates_cleanly() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(f64::INFINITY), 1.0);
        assert_eq!(sigmoid(f64::NEG_INFINITY), 0.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }

    #[test]
    fn concat_shapes_and_split_gradient() {
        let mut tape = Tape::new();
        let a = tape.param(Array2::zeros((3, 2)));
        let b = tape.param(Array2::zeros((3, 3)));
        let c = tape.concat_cols(a, b).unwrap();
        assert_eq!(tape.value(c).dim(), (3, 5));
        // Sum of entries: a ones gradient flows back into the concat.
        let total = tape.custom_scalar(c, 0.0, Array2::ones((3, 5))).unwrap();
        let g = tape.backward(total).unwrap();
        assert_eq!(g.get(a).unwrap(), &Array2::<f64>::ones((3, 2)));
        assert_eq!(g.get(b).unwrap(), &Array2::<f64>::ones((3, 3)));
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let p = tape.param(array![[1.0]]);
        let k = tape.constant(array![[2.0]]);
        let s = tape.add(p, k).unwrap();
        let g = tape.backward(s).unwrap();
        assert!(g.get(k).is_none());
        assert_eq!(g.get(p).unwrap()[[0, 0]], 1.0);
    }

    #[test]
    fn concat_row_mismatch() {
        let mut tape = Tape::new();
        let a = tape.param(Array2::zeros((3, 2)));
        let b = tape.param(Array2::zeros((4, 2)));
        assert!(tape.concat_cols(a, b).is_err());
    }

    #[test]
    fn mse_value_and_gradient() {
        let mut tape = Tape::new();
        let p = tape.param(array![[1.0, 2.0], [0.0, 0.0]]);
        let t = tape.constant(array![[0.0, 0.0], [0.0, 1.0]]);
        let l = tape.row_mse(p, t).unwrap();
        assert_eq!(tape.scalar(l), 3.0);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(p).unwrap(), &array![[1.0, 2.0], [0.0, -1.0]]);
    }

    #[test]
    fn scalar_combinators() {
        let mut tape = Tape::new();
        let x = tape.param(array![[3.0]]);
        let sq = tape.square(x);
        let sc = tape.scale(sq, 0.5);
        let off = tape.offset(sc, 1.0).unwrap();
        let both = tape.add(off, x).unwrap();
        // 1 + x²/2 + x → derivative x + 1
        assert_eq!(tape.scalar(both), 1.0 + 4.5 + 3.0);
        let g = tape.backward(both).unwrap();
        assert_eq!(g.get(x).unwrap()[[0, 0]], 4.0);
    }

    #[test]
    fn backward_needs_scalar() {
        let mut tape = Tape::new();
        let x = tape.param(Array2::zeros((2, 2)));
        assert!(tape.backward(x).is_err());
    }
}
