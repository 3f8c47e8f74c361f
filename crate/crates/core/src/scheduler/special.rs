use qsat_ilp::{hungarian, mwis_exact, IlpError};

use super::{solve_primary_ratesum, Allocation, SchedulerError, SlotInstance};

/// Largest conflict graph handed to the exact independent-set search.
pub const STSR_VERTEX_LIMIT: usize = 160;

fn require_primary(inst: &SlotInstance) -> Result<(), SchedulerError> {
    if inst.is_reflection() {
        return Err(SchedulerError::Mode("special-case solvers take primary-mode instances".into()));
    }
    Ok(())
}

/// Single transmitter, single receiver: maximum-weight independent set on
/// the conflict graph of positive (satellite, pair) options.
pub fn solve_stsr(inst: &SlotInstance) -> Result<Allocation, SchedulerError> {
    require_primary(inst)?;
    inst.validate()?;
    let unit = |v: &[u32]| v.iter().all(|&c| c == 1);
    if !(unit(&inst.sat_caps) && unit(&inst.gs_caps) && unit(&inst.pair_caps)) {
        return Err(SchedulerError::Mode(
            "single-transmitter single-receiver solver needs every T, R, L equal to 1".into(),
        ));
    }
    let mut vertices = Vec::new();
    for (i, row) in inst.omega.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            if w > 0.0 {
                vertices.push((i, j));
            }
        }
    }
    let mut edges = Vec::new();
    for (u, &(i, j)) in vertices.iter().enumerate() {
        let [a, b] = inst.pair_stations[j];
        for (v, &(k, l)) in vertices.iter().enumerate().skip(u + 1) {
            let [c, d] = inst.pair_stations[l];
            if i == k || a == c || a == d || b == c || b == d {
                edges.push((u, v));
            }
        }
    }
    let weights: Vec<f64> = vertices.iter().map(|&(i, j)| inst.omega[i][j]).collect();
    match mwis_exact(&weights, &edges, STSR_VERTEX_LIMIT) {
        Ok(set) => {
            let mut x = vec![vec![0; inst.num_pairs()]; inst.num_sats()];
            for v in set.vertices {
                let (i, j) = vertices[v];
                x[i][j] = 1;
            }
            Ok(Allocation::from_counts(inst, x, Vec::new()))
        }
        Err(IlpError::Size(_)) => solve_primary_ratesum(inst),
        Err(e) => Err(e.into()),
    }
}

/// Multiple receivers: maximum-weight bipartite matching between satellite
/// transmitter copies and pair connection copies.
///
/// Requires every station cap to be non-binding, i.e. at least the smaller
/// of the network's transmitter total and the connections its pairs allow.
pub fn solve_stmr(inst: &SlotInstance) -> Result<Allocation, SchedulerError> {
    require_primary(inst)?;
    inst.validate()?;
    let total_tx: u64 = inst.sat_caps.iter().map(|&c| c as u64).sum();
    for (g, &r) in inst.gs_caps.iter().enumerate() {
        let incident: u64 = inst
            .pair_stations
            .iter()
            .zip(&inst.pair_caps)
            .filter(|(s, _)| s.contains(&g))
            .map(|(_, &l)| l as u64)
            .sum();
        if (r as u64) < total_tx.min(incident) {
            return Err(SchedulerError::Mode(format!(
                "station `{}` receivers ({r}) can bind; matching solver does not apply",
                inst.station_ids[g]
            )));
        }
    }
    let rows: Vec<usize> = (0..inst.num_sats())
        .flat_map(|i| std::iter::repeat_n(i, inst.sat_caps[i] as usize))
        .collect();
    let cols: Vec<usize> = (0..inst.num_pairs())
        .flat_map(|j| std::iter::repeat_n(j, inst.pair_caps[j] as usize))
        .collect();
    let matrix: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| {
            cols.iter()
                .map(|&j| {
                    let w = inst.omega[i][j];
                    if w > 0.0 {
                        w
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect()
        })
        .collect();
    let m = hungarian(&matrix);
    let mut x = vec![vec![0; inst.num_pairs()]; inst.num_sats()];
    for (r, c) in m.assignment.iter().enumerate() {
        if let Some(c) = c {
            x[rows[r]][cols[*c]] += 1;
        }
    }
    Ok(Allocation::from_counts(inst, x, Vec::new()))
}
