//! Constant-drive propagation by uniformization.
//!
//! Networks in the switching regime are extremely stiff (rates spanning twenty
//! or more decades), which rules out explicit integration. For a fixed source
//! value the propagator `exp(Q dt)` is computed by uniformizing over a short
//! sub-interval and squaring back up. Everything is carried in increment form
//! `A = exp(Q h) - I` so that the slow loss of probability from long-lived
//! states is never swamped by rounding against the unit diagonal.

use std::collections::HashMap;

use super::{clamp_and_renormalize, generator_matrix, GeneratorMatrix, ProbabilityTrajectory, ProbabilityVector};
use crate::error::{Error, Result};
use crate::statespace::StateSpace;

/// Largest state count propagated with dense matrices.
pub const DENSE_LIMIT: usize = 1024;
/// Largest `Lambda * dt` accepted by the sparse vector path.
const SPARSE_MAX_POISSON: f64 = 1e6;

/// Row-major `exp(Q dt) - I` for a dense generator `q` of dimension `n`.
pub fn expm_increment(q: &[f64], n: usize, dt: f64) -> Vec<f64> {
    let lambda_total = (0..n).map(|i| -q[i * n + i]).fold(0.0, f64::max);
    if lambda_total == 0.0 || dt == 0.0 {
        return vec![0.0; n * n];
    }
    let big = lambda_total * dt;
    let squarings = if big <= 1.0 { 0 } else { big.log2().ceil() as u32 };
    let h = dt / f64::powi(2.0, squarings as i32);
    let lambda = lambda_total * h;

    // uniformized jump matrix minus identity: R = Q / Lambda
    let r: Vec<f64> = q.iter().map(|x| x / lambda_total).collect();
    // B_1 = R, B_{k+1} = B_k + R B_k + R; A = sum_k w_k B_k
    let mut b = r.clone();
    let mut w = (-lambda).exp() * lambda;
    let mut cumulative = (-lambda).exp() + w;
    let mut a: Vec<f64> = b.iter().map(|x| w * x).collect();
    let mut k = 1u32;
    while 1.0 - cumulative > 1e-18 && w > 1e-22 || (k as f64) < lambda {
        let rb = matmul(&r, &b, n);
        for i in 0..n * n {
            b[i] += rb[i] + r[i];
        }
        k += 1;
        w *= lambda / k as f64;
        cumulative += w;
        for i in 0..n * n {
            a[i] += w * b[i];
        }
        if k > 200 {
            break;
        }
    }
    restore_columns(&mut a, n);
    for _ in 0..squarings {
        let aa = matmul(&a, &a, n);
        for i in 0..n * n {
            a[i] = 2.0 * a[i] + aa[i];
        }
        restore_columns(&mut a, n);
    }
    a
}

/// Clamp negative off-diagonal rounding and rebuild the diagonal so every
/// column of the increment sums to zero exactly.
fn restore_columns(a: &mut [f64], n: usize) {
    for col in 0..n {
        let mut off = 0.0;
        for row in 0..n {
            if row != col {
                let x = &mut a[row * n + col];
                if *x < 0.0 {
                    *x = 0.0;
                }
                off += *x;
            }
        }
        a[col * n + col] = -off.min(1.0);
    }
}

fn matmul(x: &[f64], y: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let row = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let xik = x[i * n + k];
            if xik == 0.0 {
                continue;
            }
            let yk = &y[k * n..(k + 1) * n];
            for j in 0..n {
                row[j] += xik * yk[j];
            }
        }
    }
    out
}

fn apply_dense(a: &[f64], n: usize, p: &[f64]) -> Vec<f64> {
    (0..n).map(|i| p[i] + (0..n).map(|j| a[i * n + j] * p[j]).sum::<f64>()).collect()
}

/// Plain uniformization on a vector with log-space Poisson weights.
fn propagate_sparse(q: &GeneratorMatrix, p: &[f64], dt: f64) -> Result<Vec<f64>> {
    let lambda_total = q.max_outflow();
    if lambda_total == 0.0 || dt == 0.0 {
        return Ok(p.to_vec());
    }
    let lambda = lambda_total * dt;
    if lambda > SPARSE_MAX_POISSON {
        return Err(Error::Integration(format!(
            "uniformization needs about {lambda:.3e} terms; network too stiff for {} states",
            q.dim()
        )));
    }
    let spread = 10.0 * lambda.sqrt() + 20.0;
    let k_lo = (lambda - spread).max(0.0) as usize;
    let k_hi = (lambda + spread).ceil() as usize;
    let n = p.len();
    let mut v = p.to_vec();
    let mut qv = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut ln_fact = 0.0;
    for k in 0..=k_hi {
        if k > 0 {
            ln_fact += (k as f64).ln();
            q.apply(&v, &mut qv);
            for i in 0..n {
                v[i] += qv[i] / lambda_total;
            }
        }
        if k >= k_lo {
            let w = (-lambda + k as f64 * lambda.ln() - ln_fact).exp();
            for i in 0..n {
                out[i] += w * v[i];
            }
        }
    }
    Ok(out)
}

/// Propagate `p0` under constant source voltage `v_dc`, reporting the
/// distribution at each of `times` (strictly increasing, non-negative,
/// measured from the moment the drive is applied).
pub fn solve_dc(space: &StateSpace, v_dc: f64, p0: &ProbabilityVector, times: &[f64]) -> Result<ProbabilityTrajectory> {
    if p0.len() != space.len() {
        return Err(Error::Input("initial vector does not match the state space".into()));
    }
    p0.check(1e-9)?;
    if times.is_empty() {
        return Err(Error::Input("no output times".into()));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Input("output times must be finite, non-negative and strictly increasing".into()));
    }
    let q = generator_matrix(space, v_dc)?;
    let n = space.len();
    let dense = (n <= DENSE_LIMIT).then(|| q.to_dense());
    // evenly spaced grids differ only in the last bits of each interval
    let mut cache: HashMap<String, Vec<f64>> = HashMap::new();

    let mut p = p0.0.clone();
    let mut t = 0.0;
    let mut probabilities = Vec::with_capacity(times.len());
    for &target in times {
        let dt = target - t;
        if dt > 0.0 {
            p = match &dense {
                Some(qd) => {
                    let a = cache.entry(format!("{dt:.11e}")).or_insert_with(|| expm_increment(qd, n, dt));
                    apply_dense(a, n, &p)
                }
                None => propagate_sparse(&q, &p, dt)?,
            };
            clamp_and_renormalize(&mut p);
        }
        t = target;
        probabilities.push(ProbabilityVector(p.clone()));
    }
    Ok(ProbabilityTrajectory { times: times.to_vec(), probabilities, source_values: vec![v_dc; times.len()] })
}
