use crate::device::{Direction, RateEdgeParams, RATE_CLAMP};
use crate::error::{Error, Result};
use crate::statespace::StateSpace;

/// One directed edge of the transition graph with everything needed to
/// evaluate its rate at any source voltage.
#[derive(Debug, Clone, Copy)]
struct EdgeLaw {
    from: usize,
    to: usize,
    /// Device voltage per source volt in the `from` configuration.
    ratio: f64,
    edge: RateEdgeParams,
    direction: Direction,
    count: f64,
}

impl EdgeLaw {
    #[inline]
    fn rate(&self, v_source: f64) -> f64 {
        let v = self.ratio * v_source;
        let mag = match self.direction {
            Direction::Up if v > 0.0 => v,
            Direction::Down if v < 0.0 => -v,
            _ => return 0.0,
        };
        let r = ((mag / self.edge.v_scale).exp() / self.edge.tau).min(RATE_CLAMP);
        r * self.count
    }
}

/// Rate laws of every edge of a state space, flattened for fast repeated
/// evaluation at varying source voltage.
#[derive(Debug, Clone)]
pub struct CompiledRates {
    dim: usize,
    edges: Vec<EdgeLaw>,
}

impl CompiledRates {
    pub fn new(space: &StateSpace) -> Self {
        let mut edges = Vec::new();
        for (from, trs) in space.transitions.iter().enumerate() {
            for tr in trs {
                let digit = space.states[from].digits[tr.memristor];
                let model = space.instance_model(tr.memristor);
                let edge =
                    *model.edge(digit, tr.direction).expect("structural transitions stay within the model's states");
                edges.push(EdgeLaw {
                    from,
                    to: tr.target,
                    ratio: space.config_solutions[from].element_voltage_ratio[tr.memristor],
                    edge,
                    direction: tr.direction,
                    count: tr.count as f64,
                });
            }
        }
        Self { dim: space.len(), edges }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest total outflow over all states at `v_source`.
    pub fn max_outflow(&self, v_source: f64) -> f64 {
        let mut out = vec![0.0; self.dim];
        for e in &self.edges {
            out[e.from] += e.rate(v_source);
        }
        out.into_iter().fold(0.0, f64::max)
    }

    /// `dp = Q(v_source) p`.
    pub fn apply(&self, v_source: f64, p: &[f64], dp: &mut [f64]) {
        dp.iter_mut().for_each(|x| *x = 0.0);
        for e in &self.edges {
            let flow = e.rate(v_source) * p[e.from];
            dp[e.to] += flow;
            dp[e.from] -= flow;
        }
    }

    pub fn generator(&self, v_source: f64) -> GeneratorMatrix {
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut outflow = vec![0.0; self.dim];
        for e in &self.edges {
            let r = e.rate(v_source);
            edges.push((e.from, e.to, r));
            outflow[e.from] += r;
        }
        GeneratorMatrix { dim: self.dim, edges, outflow }
    }
}

/// Generator `Q` of the master equation at one source voltage. `q(a, b)` is
/// the rate of `b -> a` flow; the diagonal holds minus each state's total
/// outflow, so every column sums to zero.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    dim: usize,
    /// `(from, to, rate)` per structural edge, grouped by source state.
    edges: Vec<(usize, usize, f64)>,
    outflow: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        if a == b {
            -self.outflow[b]
        } else {
            self.edges.iter().filter(|(from, to, _)| *from == b && *to == a).map(|(_, _, r)| r).sum()
        }
    }

    pub fn outflow(&self, s: usize) -> f64 {
        self.outflow[s]
    }

    pub fn max_outflow(&self) -> f64 {
        self.outflow.iter().copied().fold(0.0, f64::max)
    }

    /// Column sum accumulated in construction order; exactly zero.
    pub fn column_sum(&self, b: usize) -> f64 {
        let off: f64 = self.edges.iter().filter(|(from, _, _)| *from == b).fold(0.0, |acc, (_, _, r)| acc + r);
        off - self.outflow[b]
    }

    /// `(from, to, rate)` triples.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn apply(&self, p: &[f64], dp: &mut [f64]) {
        dp.iter_mut().for_each(|x| *x = 0.0);
        for &(from, to, r) in &self.edges {
            let flow = r * p[from];
            dp[to] += flow;
            dp[from] -= flow;
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut q = vec![0.0; n * n];
        for &(from, to, r) in &self.edges {
            q[to * n + from] += r;
        }
        for (s, out) in self.outflow.iter().enumerate() {
            q[s * n + s] = -out;
        }
        q
    }
}

pub fn generator_matrix(space: &StateSpace, v_source: f64) -> Result<GeneratorMatrix> {
    if !v_source.is_finite() {
        return Err(Error::Input(format!("non-finite source voltage {v_source}")));
    }
    Ok(CompiledRates::new(space).generator(v_source))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::rate_up;
    use crate::netdsl::parse_circuit;
    use crate::statespace::{enumerate_states, lump_states, transition_rate};

    fn space(text: &str) -> StateSpace {
        enumerate_states(&parse_circuit(text).unwrap()).unwrap()
    }

    #[test]
    fn two_series_loss_factor() {
        let s = space("model B R=[10k,1k] tau=3e5 V=.05\nsource dc V=1\nnet m1 + m2\n");
        let q = generator_matrix(&s, 1.0).unwrap();
        let g = rate_up(&crate::device::RateEdgeParams::new(3e5, 0.05), 0.5).unwrap();
        assert_eq!(q.get(0, 0), -2.0 * g);
        assert_eq!(q.get(1, 0), g);
        assert_eq!(q.get(2, 0), g);
        assert_eq!(q.get(3, 0), 0.0);
    }

    #[test]
    fn columns_sum_to_exactly_zero() {
        let texts = [
            "model B R=[10k,1k] tau=3e5 V=.05\nsource dc V=5\nnet m1 + m2 + m3 + m4 + m5\n",
            "model T states=3 R=[10k,3k,1k] tau_up=[3e5,3e5] V_up=[.05,.07] tau_down=[3e5,3e5] V_down=[.05,.07]\nres R1 4.7k\nsource dc V=1.5\nnet (m1 | R1) + m2 + m3\n",
        ];
        for text in texts {
            let spec = parse_circuit(text).unwrap();
            let full = enumerate_states(&spec).unwrap();
            let lumped = lump_states(&full, &spec);
            for s in [&full, &lumped] {
                for v in [-7.3, -1.0, -0.01, 0.0, 0.3, 1.5, 5.0, 40.0] {
                    let q = generator_matrix(s, v).unwrap();
                    for b in 0..q.dim() {
                        assert_eq!(q.column_sum(b), 0.0);
                        for a in 0..q.dim() {
                            if a != b {
                                assert!(q.get(a, b) >= 0.0);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sparsity_matches_structure() {
        let s = space("model T states=3 R=[10k,3k,1k] tau_up=[3e5,3e5] V_up=[.05,.07] tau_down=[3e5,3e5] V_down=[.05,.07]\nsource dc V=1.5\nnet m1 + m2\n");
        let q = generator_matrix(&s, 1.5).unwrap();
        for b in 0..s.len() {
            for a in 0..s.len() {
                if a != b && !s.transitions[b].iter().any(|t| t.target == a) {
                    assert_eq!(q.get(a, b), 0.0);
                }
            }
            for t in &s.transitions[b] {
                assert_eq!(q.get(t.target, b), transition_rate(&s, b, t, 1.5));
            }
        }
    }

    #[test]
    fn negative_drive_only_down_rates() {
        let s = space("model B R=[10k,1k] tau=3e5 V=.05\nsource dc V=1\nnet m1\n");
        let q = generator_matrix(&s, -1.0).unwrap();
        assert_eq!(q.get(1, 0), 0.0);
        assert!(q.get(0, 1) > 0.0);
        assert!(generator_matrix(&s, f64::NAN).is_err());
    }
}
