//! The three training objectives.
//!
//! ```text
//! SK-DAE     mse
//! CDSK-DAE   mse + β·[(1 − R(z,x)) + (1 − R(x̂,x))]
//! CDESK-DAE  mse + β·[(1 − R(z,x)) + (1 − R(x̂,x))] + σ·[(1 − R(z,x))² + (1 − R(x̂,x))²]
//! ```
//!
//! R is the sample distance correlation over the minibatch rows. If any of
//! z, x̂ or the targets has zero distance variance the whole penalty is
//! dropped for that batch.

use log::warn;
use ndarray::Array2;

use crate::dcor::{dcor_stats, dcor_with_gradient, SampleMatrix};
use crate::error::{Error, Result};
use crate::nn::{row_mse, Tape, Var};

/// Mean over rows of the squared Euclidean error.
pub fn loss_mse(output: &Array2<f64>, target: &Array2<f64>) -> Result<f64> {
    if output.dim() != target.dim() {
        return Err(Error::Dimension(format!(
            "output {:?} vs target {:?}",
            output.dim(),
            target.dim()
        )));
    }
    Ok(row_mse(output, target))
}

/// Distance correlations of the latent code and of the output with the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DependenceTerms {
    pub latent: f64,
    pub output: f64,
}

impl DependenceTerms {
    pub fn linear_penalty(&self) -> f64 {
        (1.0 - self.latent) + (1.0 - self.output)
    }

    pub fn energy_penalty(&self) -> f64 {
        let (gz, gx) = (1.0 - self.latent, 1.0 - self.output);
        gz * gz + gx * gx
    }
}

fn sample(m: &Array2<f64>) -> Result<SampleMatrix> {
    SampleMatrix::new(m.clone())
}

/// dCor(z, x) and dCor(x̂, x) over the batch, or `None` when any argument is degenerate.
pub fn dependence_terms(
    output: &Array2<f64>,
    latent: &Array2<f64>,
    target: &Array2<f64>,
) -> Result<Option<DependenceTerms>> {
    if output.nrows() != target.nrows() || latent.nrows() != target.nrows() {
        return Err(Error::Dimension("latent, output and target row counts differ".into()));
    }
    if target.nrows() < 2 {
        return Err(Error::DegenerateSample(format!(
            "dependence penalty needs at least 2 rows, got {}",
            target.nrows()
        )));
    }
    let t = sample(target)?;
    let lz = dcor_stats(&sample(latent)?, &t)?;
    let lx = dcor_stats(&sample(output)?, &t)?;
    if lz.is_degenerate() || lx.is_degenerate() {
        return Ok(None);
    }
    Ok(Some(DependenceTerms {
        latent: lz.dcor,
        output: lx.dcor,
    }))
}

/// Combines precomputed pieces in the same order the tape does.
pub fn objective_value(mse: f64, terms: Option<DependenceTerms>, beta: f64, sigma: f64) -> f64 {
    let Some(t) = terms else {
        return mse;
    };
    let mut loss = mse;
    if beta != 0.0 || sigma != 0.0 {
        loss += beta * t.linear_penalty();
    }
    if sigma != 0.0 {
        loss += sigma * t.energy_penalty();
    }
    loss
}

pub fn loss_cdsk(output: &Array2<f64>, latent: &Array2<f64>, target: &Array2<f64>, beta: f64) -> Result<f64> {
    loss_cdesk(output, latent, target, beta, 0.0)
}

pub fn loss_cdesk(
    output: &Array2<f64>,
    latent: &Array2<f64>,
    target: &Array2<f64>,
    beta: f64,
    sigma: f64,
) -> Result<f64> {
    let mse = loss_mse(output, target)?;
    if beta == 0.0 && sigma == 0.0 {
        return Ok(mse);
    }
    let terms = dependence_terms(output, latent, target)?;
    if terms.is_none() {
        warn!("degenerate distance variance in batch; dependence penalty skipped");
    }
    Ok(objective_value(mse, terms, beta, sigma))
}

/// The objective recorded on a tape, plus the pieces needed for reporting.
#[derive(Debug, Clone, Copy)]
pub struct TapeObjective {
    pub loss: Var,
    pub mse: f64,
    pub terms: Option<DependenceTerms>,
}

/// Records mse and, when weighted, the dCor penalties as custom scalar nodes.
pub fn objective_on_tape(
    tape: &mut Tape,
    output: Var,
    latent: Var,
    target: &Array2<f64>,
    beta: f64,
    sigma: f64,
) -> Result<TapeObjective> {
    let target_var = tape.constant(target.clone());
    let mse_var = tape.row_mse(output, target_var)?;
    let mse = tape.scalar(mse_var);
    if beta == 0.0 && sigma == 0.0 {
        return Ok(TapeObjective {
            loss: mse_var,
            mse,
            terms: None,
        });
    }
    if target.nrows() < 2 {
        return Err(Error::DegenerateSample("dependence penalty needs at least 2 rows".into()));
    }
    let t = sample(target)?;
    let z = sample(tape.value(latent))?;
    let xh = sample(tape.value(output))?;
    let grads = match (dcor_with_gradient(&t, &z), dcor_with_gradient(&t, &xh)) {
        (Ok(a), Ok(b)) => Some((a, b)),
        (Err(Error::DegenerateGradient(msg)), _) | (_, Err(Error::DegenerateGradient(msg))) => {
            warn!("dependence penalty skipped for batch: {msg}");
            None
        }
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let Some(((rz, gz), (rx, gx))) = grads else {
        return Ok(TapeObjective {
            loss: mse_var,
            mse,
            terms: None,
        });
    };

    let rz_var = tape.custom_scalar(latent, rz, gz)?;
    let rx_var = tape.custom_scalar(output, rx, gx)?;
    let neg_z = tape.scale(rz_var, -1.0);
    let neg_x = tape.scale(rx_var, -1.0);
    let gap_z = tape.offset(neg_z, 1.0)?;
    let gap_x = tape.offset(neg_x, 1.0)?;
    let linear = tape.add(gap_z, gap_x)?;
    let weighted = tape.scale(linear, beta);
    let mut loss = tape.add(mse_var, weighted)?;
    if sigma != 0.0 {
        let sq_z = tape.square(gap_z);
        let sq_x = tape.square(gap_x);
        let energy = tape.add(sq_z, sq_x)?;
        let weighted = tape.scale(energy, sigma);
        loss = tape.add(loss, weighted)?;
    }
    Ok(TapeObjective {
        loss,
        mse,
        terms: Some(DependenceTerms {
            latent: rz,
            output: rx,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcor::dcor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(0.0..1.0))
    }

    #[test]
    fn mse_cases() {
        let x = uniform(7, 40, 1);
        assert_eq!(loss_mse(&x, &x).unwrap(), 0.0);
        let shifted = &x + 1.0;
        assert!((loss_mse(&shifted, &x).unwrap() - 40.0).abs() < 1e-12);
        let y = uniform(7, 40, 2);
        let mut oracle = 0.0;
        for i in 0..7 {
            let mut row = 0.0;
            for j in 0..40 {
                row += (y[[i, j]] - x[[i, j]]).powi(2);
            }
            oracle += row;
        }
        assert!((loss_mse(&y, &x).unwrap() - oracle / 7.0).abs() < 1e-12);
        assert!(loss_mse(&y, &uniform(7, 39, 3)).is_err());
    }

    #[test]
    fn zero_beta_is_mse() {
        let (xh, z, x) = (uniform(9, 40, 1), uniform(9, 128, 2), uniform(9, 40, 3));
        assert_eq!(loss_cdsk(&xh, &z, &x, 0.0).unwrap(), loss_mse(&xh, &x).unwrap());
        assert_eq!(
            loss_cdesk(&xh, &z, &x, 0.01, 0.0).unwrap(),
            loss_cdsk(&xh, &z, &x, 0.01).unwrap()
        );
    }

    #[test]
    fn perfect_dependence_has_no_penalty() {
        let x = uniform(10, 40, 4);
        // z: an affine copy of the target in its first 40 columns, constant elsewhere.
        let z = Array2::from_shape_fn((10, 128), |(i, j)| if j < 40 { 0.2 + 0.5 * x[[i, j]] } else { 0.3 });
        let l = loss_cdsk(&x, &z, &x, 0.01).unwrap();
        assert!(l.abs() < 1e-12, "{l}");
        assert!(loss_cdesk(&x, &z, &x, 0.01, 0.01).unwrap().abs() < 1e-12);
    }

    #[test]
    fn compositional_oracle() {
        let (xh, z, x) = (uniform(12, 40, 5), uniform(12, 16, 6), uniform(12, 40, 7));
        let s = |m: &Array2<f64>| SampleMatrix::new(m.clone()).unwrap();
        let d1 = dcor(&s(&z), &s(&x)).unwrap();
        let d2 = dcor(&s(&xh), &s(&x)).unwrap();
        let mse = loss_mse(&xh, &x).unwrap();
        let (b, sg) = (0.01, 0.02);
        let cdsk = loss_cdsk(&xh, &z, &x, b).unwrap();
        assert!((cdsk - (mse + b * (2.0 - d1 - d2))).abs() < 1e-12);
        let cdesk = loss_cdesk(&xh, &z, &x, b, sg).unwrap();
        let oracle = mse + b * (2.0 - d1 - d2) + sg * ((1.0 - d1).powi(2) + (1.0 - d2).powi(2));
        assert!((cdesk - oracle).abs() < 1e-12);
    }

    #[test]
    fn degenerate_latent_skips_penalty() {
        let (xh, x) = (uniform(6, 40, 8), uniform(6, 40, 9));
        let z = Array2::from_elem((6, 8), 0.5);
        assert_eq!(loss_cdsk(&xh, &z, &x, 0.5).unwrap(), loss_mse(&xh, &x).unwrap());
        let one = uniform(1, 40, 1);
        assert!(loss_cdsk(&one, &uniform(1, 8, 2), &one, 0.5).is_err());
    }

    #[test]
    fn tape_value_equals_direct_value() {
        let (xh, z, x) = (uniform(8, 40, 10), uniform(8, 16, 11), uniform(8, 40, 12));
        for (b, sg) in [(0.0, 0.0), (0.01, 0.0), (0.01, 0.01)] {
            let mut tape = Tape::new();
            let o = tape.param(xh.clone());
            let l = tape.param(z.clone());
            let obj = objective_on_tape(&mut tape, o, l, &x, b, sg).unwrap();
            assert_eq!(tape.scalar(obj.loss), loss_cdesk(&xh, &z, &x, b, sg).unwrap());
        }
    }
}
