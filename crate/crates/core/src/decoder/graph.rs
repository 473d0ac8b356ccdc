use crate::dem::Dem;
use crate::gf2::BitMatrix;

/// Immutable CSR tables shared by every decoder working on one DEM.
#[derive(Debug, Clone)]
pub struct DecodingGraph {
    pub num_detectors: usize,
    pub num_faults: usize,
    sig_offsets: Vec<u32>,
    sig: Vec<u32>,
    det_offsets: Vec<u32>,
    det_faults: Vec<u32>,
    pub observables: Vec<u64>,
    pub probabilities: Vec<f64>,
    /// `ln((1 - p) / p)` per fault.
    pub weights: Vec<f64>,
    /// GF(2) rank of the detector-by-fault incidence matrix.
    pub rank: usize,
}

impl DecodingGraph {
    pub fn new(dem: &Dem) -> Self {
        let nd = dem.num_detectors;
        let mut sig_offsets = Vec::with_capacity(dem.len() + 1);
        sig_offsets.push(0);
        let mut sig = Vec::new();
        let mut det_offsets = vec![0u32; nd + 1];
        for f in &dem.faults {
            sig.extend_from_slice(&f.detectors);
            sig_offsets.push(sig.len() as u32);
            for &d in &f.detectors {
                det_offsets[d as usize + 1] += 1;
            }
        }
        for i in 0..nd {
            det_offsets[i + 1] += det_offsets[i];
        }
        let mut fill = det_offsets.clone();
        let mut det_faults = vec![0u32; sig.len()];
        for f in &dem.faults {
            for &d in &f.detectors {
                det_faults[fill[d as usize] as usize] = f.id as u32;
                fill[d as usize] += 1;
            }
        }
        let rows: Vec<Vec<usize>> = (0..nd)
            .map(|d| {
                det_faults[det_offsets[d] as usize..det_offsets[d + 1] as usize]
                    .iter()
                    .map(|&f| f as usize)
                    .collect()
            })
            .collect();
        let rank = BitMatrix::from_sparse_rows(dem.len(), &rows).rank();
        let probabilities: Vec<f64> = dem.faults.iter().map(|f| f.probability).collect();
        Self {
            num_detectors: nd,
            num_faults: dem.len(),
            sig_offsets,
            sig,
            det_offsets,
            det_faults,
            observables: dem.faults.iter().map(|f| f.observables).collect(),
            weights: probabilities.iter().map(|&p| ((1.0 - p) / p).ln()).collect(),
            probabilities,
            rank,
        }
    }

    #[inline]
    pub fn signature(&self, f: usize) -> &[u32] {
        &self.sig[self.sig_offsets[f] as usize..self.sig_offsets[f + 1] as usize]
    }

    #[inline]
    pub fn weight(&self, f: usize) -> usize {
        (self.sig_offsets[f + 1] - self.sig_offsets[f]) as usize
    }

    #[inline]
    pub fn detector_faults(&self, d: usize) -> &[u32] {
        &self.det_faults[self.det_offsets[d] as usize..self.det_offsets[d + 1] as usize]
    }

    pub fn num_edges(&self) -> usize {
        self.sig.len()
    }

    pub fn max_detector_degree(&self) -> usize {
        (0..self.num_detectors)
            .map(|d| self.detector_faults(d).len())
            .max()
            .unwrap_or(0)
    }
}
