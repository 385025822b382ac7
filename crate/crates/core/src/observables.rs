//! Quantities derived from occupation probabilities: mean current, mean
//! network switching time and current-voltage loops.

use crate::device::{Direction, MemristorModel};
use crate::error::{Error, Result};
use crate::master::ProbabilityTrajectory;
use crate::netdsl::{CircuitSpec, TopologyNode};
use crate::statespace::{transition_rate, StateSpace, Transition};

/// Absorbed mass beyond which the switching-time integral is truncated.
pub const ABSORPTION_THRESHOLD: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub mean_current: Vec<f64>,
    pub source_voltage: Vec<f64>,
    /// Running trapezoid of `t * (influx into the all-on state)`.
    pub switch_time_accumulator: Vec<f64>,
}

impl ObservableSeries {
    pub fn from_trajectory(traj: &ProbabilityTrajectory, space: &StateSpace) -> Self {
        let influx = absorbing_influx(traj, space);
        let mut acc = Vec::with_capacity(traj.len());
        let mut total = 0.0;
        for k in 0..traj.len() {
            if k > 0 {
                let (t0, t1) = (traj.times[k - 1], traj.times[k]);
                total += 0.5 * (t1 - t0) * (t0 * influx[k - 1] + t1 * influx[k]);
            }
            acc.push(total);
        }
        Self {
            times: traj.times.clone(),
            mean_current: traj
                .probabilities
                .iter()
                .zip(&traj.source_values)
                .map(|(p, &v)| mean_current(space, &p.0, v))
                .collect(),
            source_voltage: traj.source_values.clone(),
            switch_time_accumulator: acc,
        }
    }
}

/// Expected network current: each state's current weighted by its probability.
/// In a lumped space a state's probability is the total over its class, whose
/// members all carry the same current.
pub fn mean_current(space: &StateSpace, p: &[f64], v_source: f64) -> f64 {
    space.config_solutions.iter().zip(p).map(|(c, p)| c.total_conductance * v_source * p).sum()
}

fn all_on_index(space: &StateSpace) -> Result<usize> {
    space.absorbing_hint.ok_or_else(|| Error::Unsupported("state space has no all-on configuration".into()))
}

fn edges_into(space: &StateSpace, target: usize) -> Vec<(usize, Transition)> {
    let mut out = Vec::new();
    for (s, trs) in space.transitions.iter().enumerate() {
        for tr in trs.iter().filter(|t| t.target == target) {
            out.push((s, *tr));
        }
    }
    out
}

/// Probability flow into the all-on state at each trajectory sample.
fn absorbing_influx(traj: &ProbabilityTrajectory, space: &StateSpace) -> Vec<f64> {
    let Some(target) = space.absorbing_hint else {
        return vec![0.0; traj.len()];
    };
    let into = edges_into(space, target);
    traj.probabilities
        .iter()
        .zip(&traj.source_values)
        .map(|(p, &v)| {
            into.iter()
                .map(|(s, tr)| {
                    let r = transition_rate(space, *s, tr, v);
                    if p.0[*s] == 0.0 {
                        0.0
                    } else {
                        r * p.0[*s]
                    }
                })
                .sum()
        })
        .collect()
}

/// Number of devices when `spec` is a plain series chain of identical
/// memristors starting off, the only case the closed form covers.
pub fn closed_form_chain_length(spec: &CircuitSpec) -> Result<usize> {
    let unsupported = |why: &str| Err(Error::Unsupported(format!("closed form needs {why}")));
    if !spec.fixed_resistors.is_empty() {
        return unsupported("a network without fixed resistors");
    }
    match &spec.topology {
        TopologyNode::Leaf(_) => {}
        TopologyNode::Series(c) if c.iter().all(|n| matches!(n, TopologyNode::Leaf(_))) => {}
        _ => return unsupported("memristors connected in a single series chain"),
    }
    let first = &spec.instances[0].model;
    if spec.instances.values().any(|i| &i.model != first) {
        return unsupported("identical memristors");
    }
    if spec.initial_digits().iter().any(|d| *d != 0) {
        return unsupported("every memristor to start in the off state");
    }
    Ok(spec.instances.len())
}

/// Mean first-passage time of `n` identical binary memristors in series into
/// the all-on configuration, as a sum of per-stage waiting times.
pub fn mean_switching_time_analytic(n: usize, model: &MemristorModel, v_dc: f64) -> Result<f64> {
    Ok(switching_time_stages(n, model, v_dc)?.iter().sum())
}

/// Stage `j` term `1/((n - j) gamma_j)`: the expected wait for the next switch
/// while `j` devices are on.
pub fn switching_time_stages(n: usize, model: &MemristorModel, v_dc: f64) -> Result<Vec<f64>> {
    if model.states() != 2 {
        return Err(Error::Unsupported(format!(
            "closed-form switching time needs a binary model; {} has {} states",
            model.name,
            model.states()
        )));
    }
    if n == 0 {
        return Err(Error::Input("need at least one memristor".into()));
    }
    if !v_dc.is_finite() {
        return Err(Error::Input(format!("non-finite drive {v_dc}")));
    }
    let (r_off, r_on) = (model.resistances[0], model.resistances[1]);
    (0..n)
        .map(|j| {
            let total = (n - j) as f64 * r_off + j as f64 * r_on;
            let v_off = v_dc * r_off / total;
            let gamma = model.rate(0, Direction::Up, v_off)?;
            Ok(if gamma > 0.0 { 1.0 / ((n - j) as f64 * gamma) } else { f64::INFINITY })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchingTimeEstimate {
    /// Estimated mean switching time, tail correction included.
    pub mean: f64,
    /// `(1 - p_all_on) * t_end` added for the truncated remainder.
    pub tail_correction: f64,
    /// Time at which the integral was truncated.
    pub truncated_at: f64,
    pub absorbed_mass: f64,
}

/// Mean switching time from a dc trajectory: the trapezoid of
/// `t * (influx into the all-on state)`, stopped once the all-on probability
/// exceeds [`ABSORPTION_THRESHOLD`].
pub fn mean_switching_time_numeric(traj: &ProbabilityTrajectory, space: &StateSpace) -> Result<SwitchingTimeEstimate> {
    let target = all_on_index(space)?;
    if traj.is_empty() {
        return Err(Error::Input("empty trajectory".into()));
    }
    for &v in &traj.source_values {
        if space.transitions[target].iter().any(|tr| transition_rate(space, target, tr, v) != 0.0) {
            return Err(Error::Unsupported(format!("the all-on state is not absorbing at {v} V")));
        }
    }
    let influx = absorbing_influx(traj, space);
    let mut integral = 0.0;
    for k in 0..traj.len() {
        if k > 0 {
            let (t0, t1) = (traj.times[k - 1], traj.times[k]);
            integral += 0.5 * (t1 - t0) * (t0 * influx[k - 1] + t1 * influx[k]);
        }
        let absorbed = traj.probabilities[k].0[target];
        if absorbed > ABSORPTION_THRESHOLD {
            let t_end = traj.times[k];
            let tail = (1.0 - absorbed) * t_end;
            return Ok(SwitchingTimeEstimate {
                mean: integral + tail,
                tail_correction: tail,
                truncated_at: t_end,
                absorbed_mass: absorbed,
            });
        }
    }
    Err(Error::Truncation {
        achieved: traj.probabilities.last().map_or(0.0, |p| p.0[target]),
        required: ABSORPTION_THRESHOLD,
    })
}

/// `(V_a, <I>)` at every trajectory sample.
pub fn iv_curve(traj: &ProbabilityTrajectory, space: &StateSpace) -> Vec<(f64, f64)> {
    traj.probabilities.iter().zip(&traj.source_values).map(|(p, &v)| (v, mean_current(space, &p.0, v))).collect()
}

/// Samples of `curve` falling in the final `period` of `times`.
pub fn last_period(times: &[f64], curve: &[(f64, f64)], period: f64) -> Vec<(f64, f64)> {
    let Some(&t_end) = times.last() else {
        return Vec::new();
    };
    let start = t_end - period * (1.0 + 1e-9);
    times.iter().zip(curve).filter(|(t, _)| **t >= start).map(|(_, p)| *p).collect()
}

/// Total enclosed area of a pinched I-V loop. The closed path is split into
/// lobes wherever the voltage changes sign (the pinch point); each lobe's
/// shoelace area is taken in magnitude, so the two counter-rotating lobes of a
/// pinched loop add instead of cancelling.
pub fn loop_area(points: &[(f64, f64)]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut lobe: Vec<(f64, f64)> = vec![points[0]];
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.0 * b.0 < 0.0 {
            // close the current lobe at the interpolated zero crossing
            let s = a.0 / (a.0 - b.0);
            let cross = (0.0, a.1 + s * (b.1 - a.1));
            lobe.push(cross);
            total += shoelace(&lobe).abs();
            lobe = vec![cross];
        }
        lobe.push(b);
    }
    total + shoelace(&lobe).abs()
}

fn shoelace(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n)
        .map(|i| {
            let (x0, y0) = poly[i];
            let (x1, y1) = poly[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum::<f64>()
}

/// A maximal run of samples over which a series stays within a relative band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateau {
    pub start: f64,
    pub end: f64,
    pub level: f64,
}

/// Flat stretches of a positive series sampled at increasing positive times.
///
/// A plateau is a maximal window whose values satisfy `max <= (1 + flatness) * min`
/// and which spans at least a factor `min_span` in time (so a plateau means the
/// same thing on linear and logarithmic grids). Windows are grown greedily
/// from the left; plateaus whose levels are within `flatness` of each other
/// are merged.
pub fn detect_plateaus(times: &[f64], values: &[f64], flatness: f64, min_span: f64) -> Vec<Plateau> {
    let mut out: Vec<Plateau> = Vec::new();
    let n = times.len().min(values.len());
    let mut i = 0;
    while i < n {
        if times[i] <= 0.0 || values[i] <= 0.0 {
            i += 1;
            continue;
        }
        let (mut lo, mut hi) = (values[i], values[i]);
        let mut j = i;
        while j + 1 < n {
            let v = values[j + 1];
            let (nlo, nhi) = (lo.min(v), hi.max(v));
            if nhi > (1.0 + flatness) * nlo {
                break;
            }
            lo = nlo;
            hi = nhi;
            j += 1;
        }
        if times[j] >= min_span * times[i] {
            let level = 0.5 * (lo + hi);
            match out.last_mut() {
                Some(prev) if (level - prev.level).abs() <= flatness * prev.level => prev.end = times[j],
                _ => out.push(Plateau { start: times[i], end: times[j], level }),
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::RateEdgeParams;
    use crate::master::{linspace, solve_dc, ProbabilityVector};
    use crate::netdsl::parse_circuit;
    use crate::statespace::{enumerate_states, lump_states};

    fn binary() -> MemristorModel {
        MemristorModel::symmetric("B", vec![10e3, 1e3], RateEdgeParams::new(3e5, 0.05))
    }

    #[test]
    fn mean_current_examples() {
        let spec = parse_circuit("model B R=[10k,1k] tau=3e5 V=.05\nsource dc V=1\nnet m1\n").unwrap();
        let s = enumerate_states(&spec).unwrap();
        assert!((mean_current(&s, &[0.5, 0.5], 1.0) - 0.55e-3).abs() < 1e-15);
        assert_eq!(mean_current(&s, &[0.3, 0.7], 0.0), 0.0);

        let spec = parse_circuit("model B R=[10k,1k] tau=3e5 V=.05\nsource dc V=5\nnet m1+m2+m3+m4+m5\n").unwrap();
        let full = enumerate_states(&spec).unwrap();
        let l = lump_states(&full, &spec);
        let p = ProbabilityVector::initial(&l, &spec);
        assert!((mean_current(&l, &p.0, 5.0) - 1e-4).abs() < 1e-16);
    }

    #[test]
    fn analytic_switching_times() {
        // 40-digit references
        let t1 = mean_switching_time_analytic(1, &binary(), 1.0).unwrap();
        assert!((t1 - 6.183460867315673e-4).abs() < 1e-16);
        let stages = switching_time_stages(5, &binary(), 5.0).unwrap();
        let expected = [1.23669217346e-4, 1.91651809607e-6, 2.68100386778e-9, 1.96662918862e-14, 2.8581619486e-26];
        for (a, b) in stages.iter().zip(expected) {
            assert!((a / b - 1.0).abs() < 1e-9);
        }
        let t5 = mean_switching_time_analytic(5, &binary(), 5.0).unwrap();
        assert!((t5 / 1.255884164659193e-4 - 1.0).abs() < 1e-12);
        assert_eq!(mean_switching_time_analytic(3, &binary(), 0.0).unwrap(), f64::INFINITY);

        let tri = MemristorModel::symmetric("T", vec![10e3, 3e3, 1e3], RateEdgeParams::new(3e5, 0.05));
        assert!(matches!(mean_switching_time_analytic(2, &tri, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn numeric_switching_time_single() {
        let spec = parse_circuit("model B R=[10k,1k] tau=3e5 V=.05\nsource dc V=1\nnet m1\n").unwrap();
        let s = enumerate_states(&spec).unwrap();
        let times = linspace(0.02, 20001);
        let traj = solve_dc(&s, 1.0, &ProbabilityVector::initial(&s, &spec), &times).unwrap();
        let est = mean_switching_time_numeric(&traj, &s).unwrap();
        assert!((est.mean / 6.183460867315673e-4 - 1.0).abs() < 5e-3);

        let short = solve_dc(&s, 1.0, &ProbabilityVector::initial(&s, &spec), &linspace(1e-3, 11)).unwrap();
        assert!(matches!(mean_switching_time_numeric(&short, &s), Err(Error::Truncation { .. })));
    }

    #[test]
    fn loop_area_of_known_shapes() {
        // unit square traversed once
        let sq = [(0.5, 0.0), (1.0, 0.0), (1.0, 1.0), (0.5, 1.0)];
        assert!((loop_area(&sq) - 0.5).abs() < 1e-15);
        // figure-eight through the origin: two triangles of area 0.5 with opposite orientation
        let eight = [(1.0, 0.0), (1.0, 1.0), (-1.0, -1.0), (-1.0, 0.0), (1.0, 0.0)];
        assert!((loop_area(&eight) - 1.0).abs() < 1e-12);
        // a straight line through the origin encloses nothing
        let line: Vec<(f64, f64)> = (-5..=5).map(|k| (k as f64, 2.0 * k as f64)).collect();
        assert!(loop_area(&line).abs() < 1e-12);
    }

    #[test]
    fn plateau_detection() {
        let times: Vec<f64> = (0..400).map(|k| 1e-4 * 10f64.powf(k as f64 / 50.0)).collect();
        let values: Vec<f64> =
            times.iter().map(|t| 1.0 + 2.0 / (1.0 + (-(t.ln() - 1e-2f64.ln()) * 8.0).exp())).collect();
        let p = detect_plateaus(&times, &values, 0.01, 10.0);
        assert_eq!(p.len(), 2);
        assert!((p[0].level - 1.0).abs() < 0.01 && (p[1].level - 3.0).abs() < 0.03);
    }
}
