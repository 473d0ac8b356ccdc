use super::Dem;

/// Fault–fault adjacency induced by shared detectors, in CSR form.
#[derive(Debug, Clone)]
pub struct FaultGraph {
    adj_offsets: Vec<u32>,
    adj: Vec<u32>,
    det_offsets: Vec<u32>,
    det_faults: Vec<u32>,
    pub mean_degree: f64,
}

impl FaultGraph {
    pub fn new(dem: &Dem) -> Self {
        let nd = dem.num_detectors;
        let mut det_offsets = vec![0u32; nd + 1];
        for f in &dem.faults {
            for &d in &f.detectors {
                det_offsets[d as usize + 1] += 1;
            }
        }
        for i in 0..nd {
            det_offsets[i + 1] += det_offsets[i];
        }
        let mut fill = det_offsets.clone();
        let mut det_faults = vec![0u32; det_offsets[nd] as usize];
        // faults are visited in id order, so each incidence list is ascending
        for f in &dem.faults {
            for &d in &f.detectors {
                det_faults[fill[d as usize] as usize] = f.id as u32;
                fill[d as usize] += 1;
            }
        }

        let nf = dem.len();
        let mut stamp = vec![u32::MAX; nf];
        let mut adj_offsets = Vec::with_capacity(nf + 1);
        adj_offsets.push(0u32);
        let mut adj = Vec::new();
        let mut row = Vec::new();
        for f in &dem.faults {
            row.clear();
            stamp[f.id] = f.id as u32;
            for &d in &f.detectors {
                let (s, e) = (det_offsets[d as usize], det_offsets[d as usize + 1]);
                for &g in &det_faults[s as usize..e as usize] {
                    if stamp[g as usize] != f.id as u32 {
                        stamp[g as usize] = f.id as u32;
                        row.push(g);
                    }
                }
            }
            row.sort_unstable();
            adj.extend_from_slice(&row);
            adj_offsets.push(adj.len() as u32);
        }
        let mean_degree = if nf == 0 { 0.0 } else { adj.len() as f64 / nf as f64 };
        Self {
            adj_offsets,
            adj,
            det_offsets,
            det_faults,
            mean_degree,
        }
    }

    pub fn num_faults(&self) -> usize {
        self.adj_offsets.len() - 1
    }

    pub fn neighbors(&self, f: usize) -> &[u32] {
        &self.adj[self.adj_offsets[f] as usize..self.adj_offsets[f + 1] as usize]
    }

    pub fn degree(&self, f: usize) -> usize {
        self.neighbors(f).len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_faults()).map(|f| self.degree(f)).collect()
    }

    /// Faults incident to detector `d`, ascending.
    pub fn detector_faults(&self, d: usize) -> &[u32] {
        &self.det_faults[self.det_offsets[d] as usize..self.det_offsets[d + 1] as usize]
    }

    /// Number of edges (unordered fault pairs sharing a detector).
    pub fn num_edges(&self) -> usize {
        self.adj.len() / 2
    }

    pub fn connected_components(&self) -> usize {
        let n = self.num_faults();
        let mut seen = vec![false; n];
        let mut stack = Vec::new();
        let mut count = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(f) = stack.pop() {
                for &g in self.neighbors(f) {
                    if !seen[g as usize] {
                        seen[g as usize] = true;
                        stack.push(g as usize);
                    }
                }
            }
        }
        count
    }

    /// Mean degree of the faults with the given signature weight.
    pub fn mean_degree_by_weight(&self, dem: &Dem, weight: usize) -> Option<f64> {
        let (sum, cnt) = dem
            .faults
            .iter()
            .filter(|f| f.weight() == weight)
            .fold((0usize, 0usize), |(s, c), f| (s + self.degree(f.id), c + 1));
        (cnt > 0).then(|| sum as f64 / cnt as f64)
    }

    /// `fault_id,weight,degree` rows.
    pub fn degree_csv(&self, dem: &Dem) -> String {
        let mut out = String::from("fault_id,weight,degree\n");
        for f in &dem.faults {
            out.push_str(&format!("{},{},{}\n", f.id, f.weight(), self.degree(f.id)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbcode::{named_code, Basis};
    use crate::circuit::{build_memory_circuit, NoiseModel};
    use crate::dem::build_dem;

    #[test]
    fn symmetric_and_loop_free() {
        let code = named_code("bb-18").unwrap();
        let c = build_memory_circuit(&code, 3, Basis::Z, NoiseModel::uniform(1e-3)).unwrap();
        let dem = build_dem(&c).unwrap();
        let g = FaultGraph::new(&dem);
        for f in 0..g.num_faults() {
            for &h in g.neighbors(f) {
                assert_ne!(h as usize, f);
                assert!(g.neighbors(h as usize).binary_search(&(f as u32)).is_ok());
            }
            // brute-force neighbor set
            let brute: Vec<u32> = (0..dem.len())
                .filter(|&h| {
                    h != f
                        && dem.faults[h]
                            .detectors
                            .iter()
                            .any(|d| dem.faults[f].detectors.contains(d))
                })
                .map(|h| h as u32)
                .collect();
            assert_eq!(g.neighbors(f), brute.as_slice());
        }
        assert_eq!(g.connected_components(), 1);
    }

    #[test]
    fn single_fault_graph() {
        let dem = Dem::from_mechanisms(2, 0, vec![(0.01, vec![0, 1], 0)]).unwrap();
        let g = FaultGraph::new(&dem);
        assert_eq!(g.mean_degree, 0.0);
        assert_eq!(g.connected_components(), 1);
    }
}
