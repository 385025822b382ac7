//! Monte Carlo realizations of individual switching histories, used as an
//! independent check on the master-equation solution.
//!
//! Each trial draws from its own ChaCha8 stream seeded by hashing the master
//! seed with the trial index, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::{solve_configuration, ConfigSolution};
use crate::device::Direction;
use crate::error::{Error, Result};
use crate::netdsl::{CircuitSpec, TopologyNode, Waveform};
use crate::statespace::{enumerate_states, lump_states, NetworkState, StateSpace};
use crate::stats::mean_and_stderr;

/// Per-step cap on the total firing probability of the fixed-step sampler.
pub const MAX_STEP_PROBABILITY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub time: f64,
    pub memristor: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialPath {
    pub initial_state: NetworkState,
    pub events: Vec<SwitchEvent>,
    pub final_state: NetworkState,
    pub seed: u64,
}

impl TrialPath {
    /// Configuration at time `t` (events at exactly `t` included).
    pub fn state_at(&self, t: f64) -> NetworkState {
        let mut digits = self.initial_state.digits.clone();
        for e in self.events.iter().take_while(|e| e.time <= t) {
            apply(&mut digits, e.memristor, e.direction);
        }
        NetworkState { digits }
    }

    /// First time every device sits in its highest state.
    pub fn first_passage_all_on(&self, spec: &CircuitSpec) -> Option<f64> {
        let top: Vec<usize> = (0..spec.instances.len()).map(|m| spec.instance_model(m).states() - 1).collect();
        let mut digits = self.initial_state.digits.clone();
        if digits == top {
            return Some(0.0);
        }
        for e in &self.events {
            apply(&mut digits, e.memristor, e.direction);
            if digits == top {
                return Some(e.time);
            }
        }
        None
    }
}

fn apply(digits: &mut [usize], m: usize, direction: Direction) {
    match direction {
        Direction::Up => digits[m] += 1,
        Direction::Down => digits[m] -= 1,
    }
}

/// Independent per-trial seed (SplitMix64 finalizer over both inputs).
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Network bookkeeping for one trial: the current configuration and its
/// element voltage ratios, re-solved only when a device switches.
struct Walker<'a> {
    spec: &'a CircuitSpec,
    topology: TopologyNode<usize>,
    digits: Vec<usize>,
    config: ConfigSolution,
}

impl<'a> Walker<'a> {
    fn new(spec: &'a CircuitSpec) -> Self {
        let topology = spec.indexed_topology();
        let digits = spec.initial_digits();
        let config = solve_configuration(&topology, &spec.element_resistances(&digits));
        Self { spec, topology, digits, config }
    }

    fn switch(&mut self, m: usize, direction: Direction) {
        apply(&mut self.digits, m, direction);
        self.config = solve_configuration(&self.topology, &self.spec.element_resistances(&self.digits));
    }

    /// Admissible moves with their rates at source voltage `v`.
    fn moves(&self, v: f64, out: &mut Vec<(usize, Direction, f64)>) -> Result<()> {
        out.clear();
        for (m, &d) in self.digits.iter().enumerate() {
            let model = self.spec.instance_model(m);
            let vm = self.config.element_voltage(m, v);
            for dir in [Direction::Up, Direction::Down] {
                if model.edge(d, dir).is_none() {
                    continue;
                }
                let r = model.rate(d, dir, vm)?;
                if r > 0.0 {
                    out.push((m, dir, r));
                }
            }
        }
        Ok(())
    }

    fn state(&self) -> NetworkState {
        NetworkState { digits: self.digits.clone() }
    }
}

/// Fixed-step Bernoulli sampler on `[0, t_stop]`. In each step every
/// admissible move fires independently with probability `rate * dt`; when
/// several fire, one is kept with probability proportional to its rate. The
/// step is halved locally whenever the total firing probability would exceed
/// [`MAX_STEP_PROBABILITY`].
pub fn mc_trial(spec: &CircuitSpec, wave: &Waveform, seed: u64, dt: f64, t_stop: f64) -> Result<TrialPath> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Input(format!("time step must be positive, got {dt}")));
    }
    if !(t_stop >= 0.0 && t_stop.is_finite()) {
        return Err(Error::Input(format!("invalid stop time {t_stop}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut walker = Walker::new(spec);
    let initial_state = walker.state();
    let mut events = Vec::new();
    let mut moves = Vec::new();
    let mut fired = Vec::new();
    let mut t = 0.0;
    while t < t_stop {
        let mut h = dt.min(t_stop - t);
        loop {
            walker.moves(wave.value_at(t + 0.5 * h), &mut moves)?;
            let total: f64 = moves.iter().map(|m| m.2).sum();
            if total * h <= MAX_STEP_PROBABILITY || h < t_stop * 1e-15 {
                break;
            }
            h *= 0.5;
        }
        fired.clear();
        for &(m, dir, r) in &moves {
            if rng.random::<f64>() < r * h {
                fired.push((m, dir, r));
            }
        }
        let choice = match fired.len() {
            0 => None,
            1 => Some(fired[0]),
            _ => {
                let total: f64 = fired.iter().map(|f| f.2).sum();
                let mut u = rng.random::<f64>() * total;
                let mut pick = *fired.last().unwrap();
                for f in &fired {
                    if u < f.2 {
                        pick = *f;
                        break;
                    }
                    u -= f.2;
                }
                Some(pick)
            }
        };
        t += h;
        if let Some((m, dir, _)) = choice {
            walker.switch(m, dir);
            events.push(SwitchEvent { time: t, memristor: m, direction: dir });
        }
    }
    Ok(TrialPath { initial_state, events, final_state: walker.state(), seed })
}

/// Exact continuous-time sampler for constant drive. Runs until a state with
/// no outflow is reached or the clock passes `t_max`.
pub fn gillespie_dc_until(spec: &CircuitSpec, v_dc: f64, seed: u64, t_max: f64) -> Result<TrialPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut walker = Walker::new(spec);
    let initial_state = walker.state();
    let mut events = Vec::new();
    let mut moves = Vec::new();
    let mut t = 0.0;
    loop {
        walker.moves(v_dc, &mut moves)?;
        let total: f64 = moves.iter().map(|m| m.2).sum();
        if total == 0.0 {
            break;
        }
        // 1 - u lies in (0, 1], so the logarithm is finite
        t += -(1.0 - rng.random::<f64>()).ln() / total;
        if t > t_max {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = *moves.last().unwrap();
        for mv in &moves {
            if u < mv.2 {
                pick = *mv;
                break;
            }
            u -= mv.2;
        }
        walker.switch(pick.0, pick.1);
        events.push(SwitchEvent { time: t, memristor: pick.0, direction: pick.1 });
    }
    Ok(TrialPath { initial_state, events, final_state: walker.state(), seed })
}

/// [`gillespie_dc_until`] without a time limit. Under constant drive every
/// device moves in one direction only, so each path ends in finitely many
/// events.
pub fn gillespie_dc(spec: &CircuitSpec, v_dc: f64, seed: u64) -> Result<TrialPath> {
    gillespie_dc_until(spec, v_dc, seed, f64::INFINITY)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler {
    FixedStep { dt: f64 },
    Gillespie,
}

#[derive(Debug, Clone)]
pub struct EnsembleOptions {
    pub trials: usize,
    pub seed: u64,
    pub report_times: Vec<f64>,
    pub sampler: Sampler,
    /// Report occupation per configuration instead of per symmetry class.
    pub full_space: bool,
}

#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub trials: usize,
    pub report_times: Vec<f64>,
    pub labels: Vec<String>,
    /// Occupation frequency per report time and state.
    pub empirical_p: Vec<Vec<f64>>,
    pub mean_current: Vec<f64>,
    pub current_stderr: Vec<f64>,
    /// Per-trial first passage into the all-on configuration, if reached.
    pub switching_times: Vec<Option<f64>>,
}

impl EnsembleStats {
    /// Mean and standard error over the trials that reached all-on.
    pub fn switching_time_summary(&self) -> (f64, f64, usize) {
        let t: Vec<f64> = self.switching_times.iter().flatten().copied().collect();
        let (m, se) = mean_and_stderr(&t);
        (m, se, t.len())
    }
}

struct TrialSummary {
    indices: Vec<usize>,
    currents: Vec<f64>,
    switching_time: Option<f64>,
}

/// Run `opts.trials` independent paths (in parallel) and aggregate them in
/// trial order.
pub fn mc_ensemble(spec: &CircuitSpec, wave: &Waveform, opts: &EnsembleOptions) -> Result<EnsembleStats> {
    if opts.trials == 0 {
        return Err(Error::Input("need at least one trial".into()));
    }
    if opts.report_times.iter().any(|t| !(t.is_finite() && *t >= 0.0))
        || opts.report_times.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::Input("report times must be non-negative and strictly increasing".into()));
    }
    let v_dc = match (opts.sampler, wave) {
        (Sampler::Gillespie, Waveform::Dc { amplitude }) => Some(*amplitude),
        (Sampler::Gillespie, _) => {
            return Err(Error::Input("the exact sampler needs a dc source".into()));
        }
        _ => None,
    };
    let full = enumerate_states(spec)?;
    let space: StateSpace = if opts.full_space { full } else { lump_states(&full, spec) };
    let t_stop = opts.report_times.last().copied().unwrap_or(0.0);

    let summaries: Vec<TrialSummary> = (0..opts.trials as u64)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(opts.seed, i);
            let path = match (opts.sampler, v_dc) {
                (Sampler::Gillespie, Some(v)) => gillespie_dc(spec, v, seed)?,
                (Sampler::FixedStep { dt }, _) => mc_trial(spec, wave, seed, dt, t_stop)?,
                (Sampler::Gillespie, None) => unreachable!("checked above"),
            };
            let mut indices = Vec::with_capacity(opts.report_times.len());
            let mut currents = Vec::with_capacity(opts.report_times.len());
            for &t in &opts.report_times {
                let s =
                    space.index_of_digits(&path.state_at(t).digits).expect("trial states lie in the enumerated space");
                indices.push(s);
                currents.push(space.config_solutions[s].total_conductance * wave.value_at(t));
            }
            Ok(TrialSummary { indices, currents, switching_time: path.first_passage_all_on(spec) })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = opts.trials as f64;
    let r = opts.report_times.len();
    let mut empirical_p = vec![vec![0.0; space.len()]; r];
    let mut mean_current = Vec::with_capacity(r);
    let mut current_stderr = Vec::with_capacity(r);
    for k in 0..r {
        for s in &summaries {
            empirical_p[k][s.indices[k]] += 1.0;
        }
        empirical_p[k].iter_mut().for_each(|x| *x /= n);
        let currents: Vec<f64> = summaries.iter().map(|s| s.currents[k]).collect();
        let (m, se) = mean_and_stderr(&currents);
        mean_current.push(m);
        current_stderr.push(if se.is_nan() { 0.0 } else { se });
    }
    Ok(EnsembleStats {
        trials: opts.trials,
        report_times: opts.report_times.clone(),
        labels: space.labels(),
        empirical_p,
        mean_current,
        current_stderr,
        switching_times: summaries.iter().map(|s| s.switching_time).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netdsl::parse_circuit;
    use crate::stats::{ks_p_value, ks_statistic};

    const SINGLE: &str = "model B R=[10k,1k] tau=3e5 V=.05\nsource dc V=1\nnet m1\n";
    const GAMMA_1V: f64 = 1617.217318032634259897;

    #[test]
    fn seeds_are_distinct_and_stable() {
        let s: std::collections::HashSet<u64> = (0..10_000).map(|i| trial_seed(42, i)).collect();
        assert_eq!(s.len(), 10_000);
        assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
        assert_ne!(trial_seed(7, 3), trial_seed(8, 3));
    }

    #[test]
    fn determinism() {
        let spec = parse_circuit(SINGLE).unwrap();
        let wave = Waveform::sine(1.0, 200.0);
        let a = mc_trial(&spec, &wave, 99, 1e-5, 0.02).unwrap();
        let b = mc_trial(&spec, &wave, 99, 1e-5, 0.02).unwrap();
        assert_eq!(a, b);
        assert_eq!(gillespie_dc(&spec, 1.0, 5).unwrap(), gillespie_dc(&spec, 1.0, 5).unwrap());
    }

    #[test]
    fn zero_drive_never_switches() {
        let spec = parse_circuit(SINGLE).unwrap();
        let path = mc_trial(&spec, &Waveform::dc(0.0), 1, 1e-4, 1.0).unwrap();
        assert!(path.events.is_empty());
        let path = gillespie_dc(&spec, -1.0, 1).unwrap();
        assert!(path.events.is_empty());
        assert_eq!(path.final_state.digits, vec![0]);
    }

    #[test]
    fn events_move_one_digit_in_time_order() {
        let spec = parse_circuit("model T states=3 R=[10k,3k,1k] tau_up=[3e5,3e5] V_up=[.05,.07] tau_down=[3e5,3e5] V_down=[.05,.07]\nsource sine amp=1.5 freq=200\nnet m1 + m2\n").unwrap();
        let path = mc_trial(&spec, &spec.source, 3, 1e-5, 0.5).unwrap();
        assert!(!path.events.is_empty());
        assert!(path.events.windows(2).all(|w| w[0].time < w[1].time));
        let mut d = path.initial_state.digits.clone();
        for e in &path.events {
            let before = d.clone();
            apply(&mut d, e.memristor, e.direction);
            let moved: usize = before.iter().zip(&d).map(|(a, b)| a.abs_diff(*b)).sum();
            assert_eq!(moved, 1);
        }
        assert_eq!(d, path.final_state.digits);
    }

    #[test]
    fn gillespie_single_is_exponential() {
        let spec = parse_circuit(SINGLE).unwrap();
        let times: Vec<f64> =
            (0..4000).map(|i| gillespie_dc(&spec, 1.0, trial_seed(11, i)).unwrap().events[0].time).collect();
        let d = ks_statistic(&times, |t| 1.0 - (-GAMMA_1V * t).exp());
        assert!(ks_p_value(d, times.len() as f64) > 0.01);
    }

    #[test]
    fn single_trial_frequencies_are_indicators() {
        let spec = parse_circuit(SINGLE).unwrap();
        let opts = EnsembleOptions {
            trials: 1,
            seed: 1,
            report_times: vec![0.0, 1e-3, 2e-3],
            sampler: Sampler::FixedStep { dt: 1e-5 },
            full_space: false,
        };
        let stats = mc_ensemble(&spec, &spec.source, &opts).unwrap();
        for row in &stats.empirical_p {
            assert!(row.iter().all(|x| *x == 0.0 || *x == 1.0));
            assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn ensemble_is_reproducible_and_rejects_bad_options() {
        let spec = parse_circuit(SINGLE).unwrap();
        let mut opts = EnsembleOptions {
            trials: 200,
            seed: 4,
            report_times: vec![1e-4, 5e-4],
            sampler: Sampler::Gillespie,
            full_space: false,
        };
        let a = mc_ensemble(&spec, &spec.source, &opts).unwrap();
        let b = mc_ensemble(&spec, &spec.source, &opts).unwrap();
        assert_eq!(a.empirical_p, b.empirical_p);
        assert_eq!(a.switching_times, b.switching_times);
        assert!(mc_ensemble(&spec, &Waveform::sine(1.0, 200.0), &opts).is_err());
        opts.trials = 0;
        assert!(mc_ensemble(&spec, &spec.source, &opts).is_err());
    }
}
