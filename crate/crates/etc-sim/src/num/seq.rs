//! Additive-recurrence low-discrepancy sequence (generalized golden
//! ratio). Deterministic: the k-th point depends only on (dim, k), so
//! any prefix of the stream is reproducible.

pub(crate) struct LowDiscrepancy {
    alpha: Vec<f64>,
    state: Vec<f64>,
}

impl LowDiscrepancy {
    pub(crate) fn new(dim: usize) -> Self {
        assert!(dim >= 1, "LowDiscrepancy: dim must be positive");
        // g solves g^(dim+1) = g + 1; the fixed-point iteration converges
        // for every dim >= 1.
        let mut g = 1.0_f64;
        for _ in 0..64 {
            g = (1.0 + g).powf(1.0 / (dim as f64 + 1.0));
        }
        let alpha = (1..=dim).map(|j| (1.0 / g.powi(j as i32)).fract()).collect();
        LowDiscrepancy { alpha, state: vec![0.5; dim] }
    }

    /// Next point in [0, 1)^dim.
    pub(crate) fn next_point(&mut self) -> Vec<f64> {
        for (s, a) in self.state.iter_mut().zip(&self.alpha) {
            *s = (*s + *a).fract();
        }
        self.state.clone()
    }
}
