//! Exact optimal transport between two uniform point clouds on the line,
//! solved as an integral min-cost flow (successive shortest paths with
//! Bellman–Ford). Does not sort or use quantiles.

/// `W₁` between the empirical measures of `u` and `v`.
pub fn w1(u: &[f64], v: &[f64]) -> f64 {
    let (n, m) = (u.len(), v.len());
    // Integral masses: every u-point carries m units, every v-point n units.
    let nodes = n + m + 2;
    let (src, sink) = (n + m, n + m + 1);
    let mut edges: Vec<(usize, usize, i64, f64)> = Vec::new(); // to, rev, cap, cost
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut add = |a: usize, b: usize, cap: i64, cost: f64, edges: &mut Vec<(usize, usize, i64, f64)>| {
        adj[a].push(edges.len());
        edges.push((b, edges.len() + 1, cap, cost));
        adj[b].push(edges.len());
        edges.push((a, edges.len() - 1, 0, -cost));
    };
    for i in 0..n {
        add(src, i, m as i64, 0.0, &mut edges);
        for j in 0..m {
            add(i, n + j, i64::MAX / 4, (u[i] - v[j]).abs(), &mut edges);
        }
    }
    for j in 0..m {
        add(n + j, sink, n as i64, 0.0, &mut edges);
    }
    let mut remaining = (n * m) as i64;
    let mut cost = 0.0;
    while remaining > 0 {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev: Vec<Option<usize>> = vec![None; nodes];
        dist[src] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for a in 0..nodes {
                if dist[a].is_infinite() {
                    continue;
                }
                for &e in &adj[a] {
                    let (b, _, cap, c) = edges[e];
                    if cap > 0 && dist[a] + c < dist[b] - 1e-15 {
                        dist[b] = dist[a] + c;
                        prev[b] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut push = remaining;
        let mut at = sink;
        while let Some(e) = prev[at] {
            push = push.min(edges[e].2);
            at = edges[edges[e].1].0;
        }
        let mut at = sink;
        while let Some(e) = prev[at] {
            edges[e].2 -= push;
            let rev = edges[e].1;
            edges[rev].2 += push;
            cost += push as f64 * edges[e].3;
            at = edges[rev].0;
        }
        remaining -= push;
    }
    cost / (n * m) as f64
}
