use nalgebra::DMatrix;

use super::generator::Generator;
use crate::error::{Error, Result};

/// Largest `lambda_max * t` accepted, i.e. the expected number of uniformized jumps.
pub const UNIFORMIZATION_CAP: f64 = 1e8;

/// Poisson tail mass left out of each short-time series.
const SERIES_TAIL: f64 = 1e-17;

/// `p_t = exp(tQ)` by uniformization.
///
/// The interval is halved until `lambda_max * t / 2^s <= 1`, the Poisson series is
/// summed there (twenty-odd terms), and the result is squared `s` times with rows
/// renormalized after each squaring.
pub fn transition_matrix(gen: &Generator, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time must be finite and nonnegative, got {t}")));
    }
    let n = gen.n_states();
    let lam = gen.holding().iter().copied().fold(0.0, f64::max);
    let load = lam * t;
    if load == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    if !load.is_finite() || load > UNIFORMIZATION_CAP {
        return Err(Error::StepCap {
            cap: UNIFORMIZATION_CAP,
            load,
        });
    }
    let s = if load <= 1.0 {
        0
    } else {
        load.log2().ceil() as i32
    };
    let tau = load / 2f64.powi(s);

    let mut jump = gen.rates() / lam;
    for x in 0..n {
        jump[(x, x)] = 1.0 - gen.holding()[x] / lam;
    }

    let mut weight = (-tau).exp();
    let mut covered = weight;
    let mut power = DMatrix::identity(n, n);
    let mut p = power.clone() * weight;
    let mut k = 0.0;
    while 1.0 - covered > SERIES_TAIL && k < 200.0 {
        k += 1.0;
        power = &power * &jump;
        weight *= tau / k;
        covered += weight;
        p += &power * weight;
    }
    normalize_rows(&mut p);
    for _ in 0..s {
        p = &p * &p;
        normalize_rows(&mut p);
    }
    Ok(p)
}

fn normalize_rows(p: &mut DMatrix<f64>) {
    for mut row in p.row_iter_mut() {
        for v in row.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let s = row.sum();
        if s > 0.0 {
            row /= s;
        }
    }
}
