//! Brute-force reference computations.

use bppd_core::bits::Syndrome;
use bppd_core::dem::DetectorErrorModel;
use rand::seq::SliceRandom;
use rand::Rng;

/// Random model whose Tanner graph is a forest, with a syndrome drawn from
/// its own prior. Columns may repeat; BP does not care.
pub fn random_forest_dem(rng: &mut impl Rng, max_mechanisms: usize) -> (DetectorErrorModel, Syndrome) {
    loop {
        let m = rng.gen_range(1..=max_mechanisms);
        let c = rng.gen_range(1..=m.max(2));
        // Nodes 0..c are checks, c..c+m errors. Attach each node after the
        // first of each tree to a random earlier node of the other kind.
        let mut cols: Vec<Vec<u32>> = vec![Vec::new(); m];
        let mut order: Vec<usize> = (0..c + m).collect();
        order.shuffle(rng);
        let mut placed_checks: Vec<usize> = Vec::new();
        let mut placed_errors: Vec<usize> = Vec::new();
        for &node in &order {
            let is_check = node < c;
            let start_new_tree = rng.gen_bool(0.1);
            if is_check {
                if !placed_errors.is_empty() && !start_new_tree {
                    let k = *placed_errors.choose(rng).unwrap();
                    cols[k].push(node as u32);
                }
                placed_checks.push(node);
            } else {
                let k = node - c;
                if !placed_checks.is_empty() && !start_new_tree {
                    let i = *placed_checks.choose(rng).unwrap();
                    cols[k].push(i as u32);
                }
                placed_errors.push(k);
            }
        }
        if cols.iter().any(|col| col.is_empty()) {
            continue;
        }
        let columns: Vec<(Vec<u32>, Vec<u32>, f64)> = cols
            .into_iter()
            .map(|col| (col, vec![], rng.gen_range(0.01..0.45)))
            .collect();
        let dem = DetectorErrorModel::new_unchecked(c, 0, columns);
        let mut e = bppd_core::Bits::zeros(m);
        for k in 0..m {
            if rng.gen_bool(dem.priors()[k]) {
                e.set(k, true);
            }
        }
        let s = dem.syndrome_of(&e);
        if nullspace_dim(&dem) <= 20 {
            return (dem, s);
        }
    }
}

fn rows_as_masks(dem: &DetectorErrorModel) -> Vec<u64> {
    dem.h()
        .rows()
        .iter()
        .map(|r| r.iter().fold(0u64, |m, &k| m | (1 << k)))
        .collect()
}

fn nullspace_dim(dem: &DetectorErrorModel) -> usize {
    let (_, _, free) = eliminate(dem, &Syndrome::zeros(dem.n_detectors()));
    free.len()
}

/// Row-reduces `[H | s]`. Returns the reduced rows with their right-hand
/// sides, the pivot column of each row, and the free columns.
fn eliminate(dem: &DetectorErrorModel, s: &Syndrome) -> (Vec<(u64, bool)>, Vec<usize>, Vec<usize>) {
    let m = dem.n_mechanisms();
    let mut rows: Vec<(u64, bool)> = rows_as_masks(dem)
        .into_iter()
        .enumerate()
        .map(|(i, r)| (r, s.get(i)))
        .collect();
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..m {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r].0 >> col & 1 == 1) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank];
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row.0 >> col & 1 == 1 {
                row.0 ^= pivot.0;
                row.1 ^= pivot.1;
            }
        }
        pivots.push(col);
        rank += 1;
    }
    let free = (0..m).filter(|c| !pivots.contains(c)).collect();
    rows.truncate(rows.len());
    (rows, pivots, free)
}

/// Exact posterior marginals `P(e_k = 1 | H e = s)` by enumerating every
/// solution of `H e = s`.
pub fn exact_marginals(dem: &DetectorErrorModel, s: &Syndrome) -> Vec<f64> {
    let m = dem.n_mechanisms();
    let (rows, pivots, free) = eliminate(dem, s);
    assert!(
        rows[pivots.len()..].iter().all(|r| !r.1),
        "syndrome outside the column space"
    );
    let priors = dem.priors();
    let mut total = 0.0;
    let mut marginal = vec![0.0; m];
    for assignment in 0u64..(1 << free.len()) {
        let mut e = 0u64;
        for (j, &f) in free.iter().enumerate() {
            if assignment >> j & 1 == 1 {
                e |= 1 << f;
            }
        }
        for (r, &pc) in pivots.iter().enumerate() {
            let (mask, rhs) = rows[r];
            let others = (mask & !(1 << pc) & e).count_ones() % 2 == 1;
            if rhs ^ others {
                e |= 1 << pc;
            }
        }
        let w: f64 = (0..m)
            .map(|k| if e >> k & 1 == 1 { priors[k] } else { 1.0 - priors[k] })
            .product();
        total += w;
        for (k, slot) in marginal.iter_mut().enumerate() {
            if e >> k & 1 == 1 {
                *slot += w;
            }
        }
    }
    marginal.iter().map(|w| w / total).collect()
}

/// Relative error of a posterior against an exact marginal. Marginals that are
/// exactly zero are forced by the syndrome; the clamped message arithmetic
/// leaves a residue there, so those are compared absolutely against `1e-12`.
pub fn relative_error(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        return if got.abs() < 1e-12 { 0.0 } else { f64::INFINITY };
    }
    (got - want).abs() / got.abs().max(want.abs())
}

/// Random graphlike model on up to 30 detectors with at most `max_edges`
/// columns, and a syndrome with at most `max_defects` defects.
pub fn random_matching_instance(
    rng: &mut impl Rng,
    max_edges: usize,
    max_defects: usize,
) -> (DetectorErrorModel, Syndrome) {
    let n = rng.gen_range(2..=30usize);
    let target = rng.gen_range(n..=max_edges.max(n));
    let mut seen = std::collections::HashSet::new();
    let mut columns = Vec::new();
    let mut attempts = 0;
    while columns.len() < target && attempts < 20 * max_edges {
        attempts += 1;
        let a = rng.gen_range(0..n as u32);
        let dets = if rng.gen_bool(0.3) {
            vec![a]
        } else {
            let b = rng.gen_range(0..n as u32);
            if a == b {
                continue;
            }
            vec![a.min(b), a.max(b)]
        };
        if !seen.insert(dets.clone()) {
            continue;
        }
        let obs = if rng.gen_bool(0.3) { vec![0] } else { vec![] };
        columns.push((dets, obs, rng.gen_range(0.001..0.45)));
    }
    let dem = DetectorErrorModel::new(n, 1, columns).unwrap();
    let k = rng.gen_range(0..=max_defects.min(n));
    let mut dets: Vec<usize> = (0..n).collect();
    dets.shuffle(rng);
    (dem, Syndrome::from_ones(n, dets.into_iter().take(k)))
}

/// Minimum total weight over all ways of pairing defects with each other or
/// with the boundary, on all-pairs shortest paths. Returns `None` when no
/// pairing exists, otherwise the optimum, its observable mask and whether it
/// is unique (no other pairing within `1e-7`).
pub fn brute_force_matching(
    graph: &bppd_core::graph::DecodingGraph,
    s: &Syndrome,
) -> Option<(f64, u64, bool)> {
    brute_force_matching_weighted(graph, &graph.weights(), s)
}

/// As [`brute_force_matching`] with explicit edge weights.
pub fn brute_force_matching_weighted(
    graph: &bppd_core::graph::DecodingGraph,
    weights: &[f64],
    s: &Syndrome,
) -> Option<(f64, u64, bool)> {
    let n = graph.n_nodes();
    let mut dist = vec![vec![f64::INFINITY; n]; n];
    let mut mask = vec![vec![0u64; n]; n];
    for (v, row) in dist.iter_mut().enumerate() {
        row[v] = 0.0;
    }
    for (e, &w) in graph.edges().iter().zip(weights) {
        let (a, b) = (e.u as usize, e.v.map_or(n - 1, |v| v as usize));
        if w < dist[a][b] {
            dist[a][b] = w;
            dist[b][a] = w;
            mask[a][b] = e.observables;
            mask[b][a] = e.observables;
        }
    }
    for m in 0..n {
        for a in 0..n {
            for b in 0..n {
                let via = dist[a][m] + dist[m][b];
                if via < dist[a][b] {
                    dist[a][b] = via;
                    mask[a][b] = mask[a][m] ^ mask[m][b];
                }
            }
        }
    }
    let defects: Vec<usize> = s.iter_ones().collect();
    let mut totals = Vec::new();
    fn rec(
        left: &[usize],
        acc: (f64, u64),
        dist: &[Vec<f64>],
        mask: &[Vec<u64>],
        b: usize,
        out: &mut Vec<(f64, u64)>,
    ) {
        let Some((&first, rest)) = left.split_first() else {
            out.push(acc);
            return;
        };
        if dist[first][b].is_finite() {
            rec(rest, (acc.0 + dist[first][b], acc.1 ^ mask[first][b]), dist, mask, b, out);
        }
        for (i, &other) in rest.iter().enumerate() {
            if dist[first][other].is_finite() {
                let mut r = rest.to_vec();
                r.remove(i);
                rec(&r, (acc.0 + dist[first][other], acc.1 ^ mask[first][other]), dist, mask, b, out);
            }
        }
    }
    rec(&defects, (0.0, 0), &dist, &mask, n - 1, &mut totals);
    let best = totals.iter().copied().min_by(|a, b| a.0.total_cmp(&b.0))?;
    let ties = totals.iter().filter(|t| t.0 - best.0 < 1e-7).count();
    Some((best.0, best.1, ties == 1))
}
