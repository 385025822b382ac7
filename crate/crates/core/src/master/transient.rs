//! Adaptive Dormand-Prince 5(4) integration of the master equation under an
//! arbitrary source waveform.

use super::{clamp_and_renormalize, linspace, CompiledRates, ProbabilityTrajectory, ProbabilityVector};
use super::{DEFAULT_SAMPLES, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::netdsl::Waveform;
use crate::statespace::StateSpace;

#[derive(Debug, Clone)]
pub struct TransientOptions {
    /// Maximum absolute local error per accepted step.
    pub tol: f64,
    /// Output samples on `[0, t_stop]`, both ends included.
    pub samples: usize,
    /// Smallest admissible step as a fraction of `t_stop`; going below it is
    /// reported as step-size underflow.
    pub min_step_fraction: f64,
}

impl Default for TransientOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, samples: DEFAULT_SAMPLES, min_step_fraction: 1e-9 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

struct Stepper<'a> {
    rates: &'a CompiledRates,
    wave: &'a Waveform,
    k: Vec<Vec<f64>>,
    stage: Vec<f64>,
}

impl Stepper<'_> {
    /// One trial step; returns the fifth-order solution and the error estimate.
    fn step(&mut self, t: f64, h: f64, p: &[f64]) -> (Vec<f64>, f64) {
        let n = p.len();
        for s in 0..7 {
            if s > 0 && s < 7 {
                for i in 0..n {
                    let mut acc = p[i];
                    for j in 0..s {
                        acc += h * A[s][j] * self.k[j][i];
                    }
                    self.stage[i] = acc;
                }
            } else {
                self.stage.copy_from_slice(p);
            }
            let v = self.wave.value_at(t + C[s] * h);
            let (stage, k) = (&self.stage, &mut self.k[s]);
            self.rates.apply(v, stage, k);
        }
        // stage 7 input is the fifth-order solution (FSAL row of A)
        let y = self.stage.clone();
        let mut err = 0.0f64;
        for i in 0..n {
            let e: f64 = (0..7).map(|s| E[s] * self.k[s][i]).sum::<f64>() * h;
            err = err.max(e.abs());
        }
        (y, err)
    }
}

/// Integrate `dp/dt = Q(V_a(t)) p` from `p0` over `[0, t_stop]`.
///
/// Steps are limited by the local error tolerance, by `1/(20 * max outflow)`
/// and, for sine drive, by a thousandth of the period. Steps producing entries
/// below `-tol` are retried smaller; smaller negatives are clamped and the
/// vector renormalized.
pub fn solve_transient(
    space: &StateSpace,
    wave: &Waveform,
    p0: &ProbabilityVector,
    t_stop: f64,
    opts: &TransientOptions,
) -> Result<ProbabilityTrajectory> {
    if !(t_stop > 0.0 && t_stop.is_finite()) {
        return Err(Error::Input(format!("t_stop must be positive, got {t_stop}")));
    }
    if p0.len() != space.len() {
        return Err(Error::Input("initial vector does not match the state space".into()));
    }
    p0.check(1e-9)?;
    let tol = opts.tol;
    let rates = CompiledRates::new(space);
    let n = space.len();
    let mut stepper = Stepper { rates: &rates, wave, k: vec![vec![0.0; n]; 7], stage: vec![0.0; n] };

    let period_cap = match wave {
        Waveform::Sine { frequency, .. } => 1.0 / (1000.0 * frequency),
        Waveform::Dc { .. } => f64::INFINITY,
    };
    let h_min = t_stop * opts.min_step_fraction;
    let stiff_cap = |t: f64, h: f64| -> (f64, f64) {
        let rate = rates.max_outflow(wave.value_at(t)).max(rates.max_outflow(wave.value_at(t + h)));
        let cap = if rate > 0.0 { 1.0 / (20.0 * rate) } else { f64::INFINITY };
        (cap, rate)
    };

    let times = linspace(t_stop, opts.samples);
    let mut out = ProbabilityTrajectory {
        times: times.clone(),
        probabilities: Vec::with_capacity(times.len()),
        source_values: times.iter().map(|&t| wave.value_at(t)).collect(),
    };
    let mut p = p0.0.clone();
    clamp_and_renormalize(&mut p);
    out.probabilities.push(ProbabilityVector(p.clone()));

    let mut t = 0.0;
    let mut h = (t_stop / 100.0).min(period_cap);
    for &target in &times[1..] {
        while t < target {
            let remaining = target - t;
            let mut trial = h.min(period_cap);
            let (cap, rate) = stiff_cap(t, trial.min(remaining));
            trial = trial.min(cap);
            if trial < h_min && trial < remaining {
                return Err(Error::StepUnderflow { time: t, rate });
            }
            let last = trial >= remaining;
            if last {
                trial = remaining;
            }
            let (mut y, err) = stepper.step(t, trial, &p);
            let min_entry = y.iter().copied().fold(f64::INFINITY, f64::min);
            if err > tol || min_entry < -tol || y.iter().any(|x| !x.is_finite()) {
                let shrink =
                    if err.is_finite() && err > 0.0 { (0.9 * (tol / err).powf(0.2)).clamp(0.1, 0.5) } else { 0.25 };
                h = trial * shrink;
                if h < h_min {
                    return Err(Error::StepUnderflow { time: t, rate });
                }
                continue;
            }
            clamp_and_renormalize(&mut y);
            p = y;
            t = if last { target } else { t + trial };
            let grow = if err > 0.0 { (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0) } else { 5.0 };
            // a step shortened to land on a sample point says little about the next one
            if !last || grow < 1.0 {
                h = trial * grow;
            }
        }
        out.probabilities.push(ProbabilityVector(p.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netdsl::parse_circuit;
    use crate::statespace::enumerate_states;

    const GAMMA_1V: f64 = 1617.217318032634259897;

    #[test]
    fn single_memristor_dc_closed_form() {
        let spec = parse_circuit("model B R=[10k,1k] tau=3e5 V=.05\nsource dc V=1\nnet m1\n").unwrap();
        let s = enumerate_states(&spec).unwrap();
        let p0 = ProbabilityVector::initial(&s, &spec);
        let t_stop = 4.0 / GAMMA_1V;
        let traj =
            solve_transient(&s, &spec.source, &p0, t_stop, &TransientOptions { samples: 401, ..Default::default() })
                .unwrap();
        for (t, p) in traj.times.iter().zip(&traj.probabilities) {
            let exact = 1.0 - (-GAMMA_1V * t).exp();
            assert!((p.0[1] - exact).abs() < 1e-7, "t={t} p={} exact={exact}", p.0[1]);
            assert!((p.total() - 1.0).abs() < 1e-12);
        }
        // a sample lands on t = 1/gamma: p1 = 1 - 1/e
        assert!((traj.probabilities[100].0[1] - (1.0 - (-1.0f64).exp())).abs() < 1e-7);
    }

    #[test]
    fn stiff_network_reports_underflow() {
        let spec = parse_circuit("model B R=[10k,1k] tau=3e5 V=.05\nsource dc V=5\nnet m1+m2+m3+m4+m5\n").unwrap();
        let s = enumerate_states(&spec).unwrap();
        let p0 = ProbabilityVector::initial(&s, &spec);
        match solve_transient(&s, &spec.source, &p0, 2e-3, &TransientOptions::default()) {
            Err(Error::StepUnderflow { rate, .. }) => assert!(rate > 1e25),
            other => panic!("expected step underflow, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = parse_circuit("model B R=[10k,1k] tau=3e5 V=.05\nsource dc V=1\nnet m1\n").unwrap();
        let s = enumerate_states(&spec).unwrap();
        let opts = TransientOptions::default();
        assert!(solve_transient(&s, &spec.source, &ProbabilityVector(vec![0.5, 0.6]), 1.0, &opts).is_err());
        assert!(solve_transient(&s, &spec.source, &ProbabilityVector(vec![1.0]), 1.0, &opts).is_err());
        assert!(solve_transient(&s, &spec.source, &ProbabilityVector(vec![1.0, 0.0]), 0.0, &opts).is_err());
    }
}
