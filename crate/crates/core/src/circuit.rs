//! Exact series/parallel solution of a purely resistive network driven by a
//! single voltage source.
//!
//! With one source the network is linear, so every element voltage is a fixed
//! fraction of the source voltage. These fractions are computed once per
//! configuration; time dependence enters only through multiplication by the
//! instantaneous source value.

use crate::netdsl::TopologyNode;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSolution {
    /// Voltage across each element per volt of source, indexed by element.
    pub element_voltage_ratio: Vec<f64>,
    /// Network current per volt of source, siemens.
    pub total_conductance: f64,
}

impl ConfigSolution {
    pub fn element_voltage(&self, element: usize, v_source: f64) -> f64 {
        self.element_voltage_ratio[element] * v_source
    }
}

pub fn equivalent_resistance(topology: &TopologyNode<usize>, r: &[f64]) -> f64 {
    match topology {
        TopologyNode::Leaf(e) => r[*e],
        TopologyNode::Series(c) => c.iter().map(|n| equivalent_resistance(n, r)).sum(),
        TopologyNode::Parallel(c) => 1.0 / c.iter().map(|n| 1.0 / equivalent_resistance(n, r)).sum::<f64>(),
    }
}

pub fn solve_configuration(topology: &TopologyNode<usize>, r: &[f64]) -> ConfigSolution {
    let n = topology.leaves().into_iter().copied().max().map_or(0, |m| m + 1);
    let mut ratios = vec![0.0; n.max(r.len())];
    assign(topology, r, 1.0, &mut ratios);
    ConfigSolution { element_voltage_ratio: ratios, total_conductance: 1.0 / equivalent_resistance(topology, r) }
}

/// Distribute `ratio` (the voltage across `node` per source volt) downwards.
fn assign(node: &TopologyNode<usize>, r: &[f64], ratio: f64, out: &mut [f64]) {
    match node {
        TopologyNode::Leaf(e) => out[*e] = ratio,
        TopologyNode::Parallel(c) => c.iter().for_each(|n| assign(n, r, ratio, out)),
        TopologyNode::Series(c) => {
            let parts: Vec<f64> = c.iter().map(|n| equivalent_resistance(n, r)).collect();
            let total: f64 = parts.iter().sum();
            for (n, part) in c.iter().zip(&parts) {
                assign(n, r, ratio * part / total, out);
            }
        }
    }
}

pub fn total_current(sol: &ConfigSolution, v_source: f64) -> f64 {
    sol.total_conductance * v_source
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(n: usize) -> TopologyNode<usize> {
        TopologyNode::Series((0..n).map(TopologyNode::Leaf).collect())
    }

    /// Independent nodal solve for a series chain: ground at the far end,
    /// unknown internal node voltages, KCL by Gaussian elimination.
    fn nodal_series(r: &[f64], v: f64) -> Vec<f64> {
        let n = r.len();
        // nodes 0..=n, node 0 = source (v), node n = ground; unknowns 1..n-1
        let m = n - 1;
        let mut a = vec![vec![0.0; m + 1]; m];
        for k in 1..n {
            let row = k - 1;
            let gl = 1.0 / r[k - 1];
            let gr = 1.0 / r[k];
            a[row][row] = gl + gr;
            if k > 1 {
                a[row][row - 1] = -gl;
            } else {
                a[row][m] += gl * v;
            }
            if k < n - 1 {
                a[row][row + 1] = -gr;
            }
        }
        for i in 0..m {
            let p = a[i][i];
            for j in i..=m {
                a[i][j] /= p;
            }
            for k in 0..m {
                if k != i {
                    let f = a[k][i];
                    for j in i..=m {
                        a[k][j] -= f * a[i][j];
                    }
                }
            }
        }
        let mut nodes = vec![v];
        nodes.extend((0..m).map(|i| a[i][m]));
        nodes.push(0.0);
        nodes.windows(2).map(|w| w[0] - w[1]).collect()
    }

    #[test]
    fn equivalent_resistance_examples() {
        assert_eq!(equivalent_resistance(&series(5), &[10e3; 5]), 50e3);
        assert_eq!(equivalent_resistance(&series(5), &[1e3, 10e3, 10e3, 10e3, 10e3]), 41e3);
        let par = TopologyNode::Parallel(vec![TopologyNode::Leaf(0), TopologyNode::Leaf(1)]);
        assert_eq!(equivalent_resistance(&par, &[10e3, 10e3]), 5e3);
    }

    #[test]
    fn divider_ratios() {
        let s = solve_configuration(&series(2), &[10e3, 10e3]);
        assert_eq!(s.element_voltage_ratio, vec![0.5, 0.5]);

        let r = [1e3, 10e3, 10e3, 10e3, 10e3];
        let s = solve_configuration(&series(5), &r);
        let nodal = nodal_series(&r, 5.0);
        for e in 1..5 {
            assert!((s.element_voltage_ratio[e] - 10.0 / 41.0).abs() < 1e-15);
            assert!((s.element_voltage(e, 5.0) - 1.2195121951219512).abs() < 1e-12);
            assert!((s.element_voltage(e, 5.0) - nodal[e]).abs() < 1e-12);
        }

        let s = solve_configuration(&TopologyNode::Leaf(0), &[10e3]);
        assert_eq!(s.element_voltage_ratio, vec![1.0]);
    }

    #[test]
    fn currents() {
        let leaf = TopologyNode::Leaf(0);
        assert!((total_current(&solve_configuration(&leaf, &[10e3]), 1.0) - 1e-4).abs() < 1e-18);
        assert!((total_current(&solve_configuration(&leaf, &[1e3]), 1.0) - 1e-3).abs() < 1e-18);
        assert!((total_current(&solve_configuration(&series(5), &[10e3; 5]), 5.0) - 1e-4).abs() < 1e-18);
    }

    fn tree() -> impl Strategy<Value = TopologyNode<()>> {
        Just(TopologyNode::Leaf(())).prop_recursive(3, 16, 3, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 2..4).prop_map(TopologyNode::Series),
                prop::collection::vec(inner, 2..4).prop_map(TopologyNode::Parallel),
            ]
        })
    }

    fn indexed(t: &TopologyNode<()>) -> TopologyNode<usize> {
        let mut n = 0;
        t.map_leaves(&mut |_| {
            n += 1;
            n - 1
        })
    }

    fn check_kvl(node: &TopologyNode<usize>, sol: &ConfigSolution) -> f64 {
        // returns the node ratio implied by its leaves, asserting KVL on the way
        match node {
            TopologyNode::Leaf(e) => sol.element_voltage_ratio[*e],
            TopologyNode::Series(c) => c.iter().map(|n| check_kvl(n, sol)).sum(),
            TopologyNode::Parallel(c) => {
                let first = check_kvl(&c[0], sol);
                for n in &c[1..] {
                    assert!((check_kvl(n, sol) - first).abs() <= 1e-12 * first.max(1.0));
                }
                first
            }
        }
    }

    proptest! {
        #[test]
        fn kvl_and_power_balance(t in tree(), seed in prop::collection::vec(1e2f64..1e5, 16)) {
            let topo = indexed(&t);
            let n = topo.leaves().len();
            let r = &seed[..n];
            let sol = solve_configuration(&topo, r);
            prop_assert!((check_kvl(&topo, &sol) - 1.0).abs() < 1e-12);
            // Tellegen: sum of element powers equals source power.
            let p_el: f64 = (0..n).map(|e| sol.element_voltage_ratio[e].powi(2) / r[e]).sum();
            prop_assert!((p_el - sol.total_conductance).abs() <= 1e-12 * sol.total_conductance);
            prop_assert!(sol.element_voltage_ratio.iter().all(|x| *x >= 0.0 && *x <= 1.0 + 1e-15));
        }

        #[test]
        fn resistance_monotone(t in tree(), seed in prop::collection::vec(1e2f64..1e5, 16), which in 0usize..16, bump in 1.0f64..1e4) {
            let topo = indexed(&t);
            let n = topo.leaves().len();
            let mut r = seed[..n].to_vec();
            let before = equivalent_resistance(&topo, &r);
            r[which % n] += bump;
            prop_assert!(equivalent_resistance(&topo, &r) >= before * (1.0 - 1e-15));
        }

        #[test]
        fn linear_in_source(t in tree(), seed in prop::collection::vec(1e2f64..1e5, 16), v in -10.0f64..10.0) {
            let topo = indexed(&t);
            let n = topo.leaves().len();
            let sol = solve_configuration(&topo, &seed[..n]);
            for e in 0..n {
                prop_assert_eq!(sol.element_voltage(e, v), sol.element_voltage_ratio[e] * v);
            }
        }
    }
}
