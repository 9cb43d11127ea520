//! Exact transportation problem with forbidden cells, solved by
//! successive shortest paths (Dijkstra with potentials) on the dense
//! bipartite residual graph.
//!
//! Successive shortest paths also maximizes the flow, so an instance whose
//! allowed cells cannot carry the full supply is reported infeasible
//! without a separate feasibility pass.

/// Optimal plan: `flow[i][j]` moves mass from source `i` to sink `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub cost: f64,
    pub flow: Vec<Vec<f64>>,
}

/// Relative size below which leftover supply or demand counts as zero.
const EPS: f64 = 1e-14;
/// Relative shortfall of routed mass tolerated before declaring infeasibility.
const FEASIBILITY_TOL: f64 = 1e-10;

/// Minimizes `Σ flow[i][j] · cost[i][j]` subject to row sums `supply` and
/// column sums `demand`. Infinite costs mark forbidden cells. Returns
/// `None` when no plan avoids them. Costs must be nonnegative and the two
/// totals equal.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> Option<TransportPlan> {
    let (m, n) = (supply.len(), demand.len());
    let total: f64 = supply.iter().sum();
    let mut flow = vec![vec![0.0; n]; m];
    if total == 0.0 {
        return Some(TransportPlan { cost: 0.0, flow });
    }
    let eps = EPS * total;
    let mut supply_left: Vec<f64> = supply.to_vec();
    let mut demand_left: Vec<f64> = demand.to_vec();

    // Node ids: sources 0..m, sinks m..m+n, super sink m+n, super source m+n+1.
    let sink = m + n;
    let source = m + n + 1;
    let v = m + n + 2;
    let mut potential = vec![0.0_f64; v];
    let mut dist = vec![f64::INFINITY; v];
    let mut prev = vec![usize::MAX; v];
    let mut done = vec![false; v];

    loop {
        if supply_left.iter().all(|&s| s <= eps) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        dist[source] = 0.0;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for k in 0..v {
                if !done[k] && dist[k] < best {
                    best = dist[k];
                    u = k;
                }
            }
            if u == usize::MAX || u == sink {
                break;
            }
            done[u] = true;
            let relax = |to: usize, reduced: f64, dist: &mut Vec<f64>, prev: &mut Vec<usize>| {
                // Reduced costs are nonnegative up to rounding.
                let nd = best + reduced.max(0.0);
                if nd < dist[to] {
                    dist[to] = nd;
                    prev[to] = u;
                }
            };
            if u == source {
                for i in 0..m {
                    if supply_left[i] > eps {
                        relax(i, potential[source] - potential[i], &mut dist, &mut prev);
                    }
                }
            } else if u < m {
                for j in 0..n {
                    let c = cost[u][j];
                    if c.is_finite() && !done[m + j] {
                        relax(m + j, c + potential[u] - potential[m + j], &mut dist, &mut prev);
                    }
                }
            } else {
                let j = u - m;
                for i in 0..m {
                    if flow[i][j] > eps && !done[i] {
                        relax(i, -cost[i][j] + potential[u] - potential[i], &mut dist, &mut prev);
                    }
                }
                if demand_left[j] > eps {
                    relax(sink, potential[u] - potential[sink], &mut dist, &mut prev);
                }
            }
        }
        let reach = dist[sink];
        if !reach.is_finite() {
            break;
        }
        for k in 0..v {
            potential[k] += dist[k].min(reach);
        }

        // Walk back: sink ← j_k ← i_k ← … ← j_1 ← i_0 ← source.
        let mut path = Vec::new();
        let mut node = sink;
        while node != source {
            path.push(node);
            node = prev[node];
        }
        path.reverse();
        let start = path[0];
        let last_sink = path[path.len() - 2] - m;
        let mut amount = supply_left[start].min(demand_left[last_sink]);
        for pair in path[..path.len() - 1].windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a >= m {
                amount = amount.min(flow[b][a - m]);
            }
        }
        for pair in path[..path.len() - 1].windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a < m {
                flow[a][b - m] += amount;
            } else {
                flow[b][a - m] -= amount;
                if flow[b][a - m] < eps {
                    flow[b][a - m] = 0.0;
                }
            }
        }
        supply_left[start] -= amount;
        demand_left[last_sink] -= amount;
    }

    let unsent: f64 = supply_left.iter().map(|s| s.max(0.0)).sum();
    if unsent > FEASIBILITY_TOL * total {
        return None;
    }
    let mut total_cost = 0.0;
    for i in 0..m {
        for j in 0..n {
            if flow[i][j] > 0.0 {
                total_cost += flow[i][j] * cost[i][j];
            }
        }
    }
    Some(TransportPlan { cost: total_cost, flow })
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn assignment_prefers_cheap_cells() {
        let cost = vec![vec![1.0, 3.0], vec![2.0, 1.0]];
        let plan = solve_transport(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap();
        assert!((plan.cost - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rerouting_through_reverse_arcs() {
        // The greedy first path uses (0, 0); the optimum needs it undone.
        let cost = vec![vec![1.0, 2.0], vec![1.0, 10.0]];
        let plan = solve_transport(&[1.0, 1.0], &[1.0, 1.0], &cost).unwrap();
        assert!((plan.cost - 3.0).abs() < 1e-15);
        assert_eq!(plan.flow, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn forbidden_diagonal_of_a_point_mass_is_infeasible() {
        assert!(solve_transport(&[1.0], &[1.0], &[vec![INF]]).is_none());
        let cost = vec![vec![INF, 1.0], vec![1.0, INF]];
        assert!(solve_transport(&[0.7, 0.3], &[0.7, 0.3], &cost).is_none());
        let plan = solve_transport(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap();
        assert!((plan.cost - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sources_reached_late_keep_their_potentials() {
        // One source is cheap everywhere; the other must take its mass to the
        // one unit-cost sink and pay the kernel for the rest.
        let cost = vec![vec![1.0, 1.0, 1.0], vec![2f64.sqrt(), 2.0, 1.0]];
        let supply = [0.49, 0.51];
        let demand = [0.567, 0.24, 0.193];
        let plan = solve_transport(&supply, &demand, &cost).unwrap();
        let want = 0.49 + 0.193 + 0.317 * 2f64.sqrt();
        assert!((plan.cost - want).abs() < 1e-14, "{}", plan.cost);
    }
}
