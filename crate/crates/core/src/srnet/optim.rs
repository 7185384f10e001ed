use super::nn::Parameters;

/// Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(param_count: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    pub fn for_params<P: Parameters>(params: &P) -> Self {
        Self::new(params.param_count(), 0.9, 0.999, 1e-8)
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update of `params` given gradients with the same layout.
    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P, lr: f64) {
        let g = grads.flatten();
        assert_eq!(g.len(), self.m.len(), "gradient layout mismatch");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut at = 0;
        params.visit_mut(&mut |p| {
            for w in p.iter_mut() {
                let gi = g[at] as f64;
                m[at] = b1 * m[at] + (1.0 - b1) * gi;
                v[at] = b2 * v[at] + (1.0 - b2) * gi * gi;
                let mh = m[at] / bc1;
                let vh = v[at] / bc2;
                *w -= (lr * mh / (vh.sqrt() + eps)) as f32;
                at += 1;
            }
        });
    }
}
