//! Dense layers, a reverse-mode tape, Xavier initialization and Adam.

mod adam;
mod layer;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use layer::{DenseLayer, LayerVars};
pub use tape::{affine, row_mse, sigmoid, sigmoid_matrix, Gradients, Tape, Var};

/// Xavier-uniform layer mapping `fan_in` inputs to `fan_out` outputs.
pub fn xavier_init(fan_in: usize, fan_out: usize, seed: u64) -> DenseLayer {
    DenseLayer::xavier(fan_in, fan_out, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    /// Two sigmoid layers with a skip concat of the raw input into the second.
    fn net_loss(l1: &DenseLayer, l2: &DenseLayer, x: &Array2<f64>, skip: &Array2<f64>, t: &Array2<f64>) -> f64 {
        let h = l1.apply_sigmoid(x).unwrap();
        let cat = ndarray::concatenate(ndarray::Axis(1), &[h.view(), skip.view()]).unwrap();
        row_mse(&l2.apply_sigmoid(&cat).unwrap(), t)
    }

    #[test]
    fn gradient_through_concat_matches_finite_differences() {
        let x = Array2::from_shape_fn((4, 5), |(i, j)| ((i * 5 + j) as f64 * 0.71).sin());
        let skip = Array2::from_shape_fn((4, 2), |(i, j)| ((i + j) as f64 * 0.43).cos());
        let t = Array2::from_shape_fn((4, 3), |(i, j)| 0.2 + 0.1 * ((i * j) % 5) as f64);
        let l1 = xavier_init(5, 6, 1);
        let l2 = xavier_init(8, 3, 2);

        let mut tape = Tape::new();
        let v1 = l1.register(&mut tape);
        let v2 = l2.register(&mut tape);
        let xv = tape.constant(x.clone());
        let sv = tape.constant(skip.clone());
        let tv = tape.constant(t.clone());
        let h = DenseLayer::forward_sigmoid(&mut tape, v1, xv).unwrap();
        let cat = tape.concat_cols(h, sv).unwrap();
        let y = DenseLayer::forward_sigmoid(&mut tape, v2, cat).unwrap();
        let loss = tape.row_mse(y, tv).unwrap();
        assert_eq!(tape.scalar(loss), net_loss(&l1, &l2, &x, &skip, &t));
        let g = tape.backward(loss).unwrap();

        let step = 1e-6;
        let mut worst: f64 = 0.0;
        for (layer_idx, vars) in [(0, v1), (1, v2)] {
            let base = if layer_idx == 0 { &l1 } else { &l2 };
            let gw = g.get(vars.weight).unwrap();
            for idx in 0..base.weight.len() {
                let (i, j) = (idx / base.fan_in(), idx % base.fan_in());
                let eval = |delta: f64| {
                    let mut a = l1.clone();
                    let mut b = l2.clone();
                    if layer_idx == 0 {
                        a.weight[[i, j]] += delta;
                    } else {
                        b.weight[[i, j]] += delta;
                    }
                    net_loss(&a, &b, &x, &skip, &t)
                };
                let fd = (eval(step) - eval(-step)) / (2.0 * step);
                let an = gw[[i, j]];
                worst = worst.max((an - fd).abs() / an.abs().max(fd.abs()).max(1e-7));
            }
        }
        assert!(worst < 1e-5, "worst relative error {worst}");
    }

    #[test]
    fn forward_commutes_with_row_permutation() {
        let l = xavier_init(4, 3, 5);
        let x = Array2::from_shape_fn((6, 4), |(i, j)| (i as f64 * 0.3 - j as f64 * 0.2).tanh());
        let perm = [3usize, 0, 5, 1, 4, 2];
        let y = l.apply_sigmoid(&x).unwrap();
        let yp = l.apply_sigmoid(&x.select(ndarray::Axis(0), &perm)).unwrap();
        assert_eq!(yp, y.select(ndarray::Axis(0), &perm));
    }
}
