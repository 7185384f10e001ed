/// Plateau-driven learning-rate decay. Every `window` steps a line is fit
/// to the most recent `2 * window` losses; when the fitted slope is not
/// negative by more than its standard error the rate drops tenfold.
#[derive(Debug, Clone)]
pub struct LrSchedule {
    lr: f64,
    final_lr: f64,
    window: usize,
    last_change: usize,
    changes: Vec<usize>,
}

impl LrSchedule {
    pub fn new(initial_lr: f64, final_lr: f64, window: usize) -> Self {
        Self {
            lr: initial_lr,
            final_lr,
            window,
            last_change: 0,
            changes: Vec::new(),
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Steps (1-based counts) at which the rate was divided.
    pub fn changes(&self) -> &[usize] {
        &self.changes
    }

    /// The rate has reached its floor.
    pub fn exhausted(&self) -> bool {
        self.lr <= self.final_lr * (1.0 + 1e-9)
    }

    /// Feed the full loss trace after a step; returns true if the rate changed.
    pub fn observe(&mut self, losses: &[f64]) -> bool {
        let n = losses.len();
        let span = 2 * self.window;
        if self.exhausted() || n % self.window != 0 || n < span || n - self.last_change < span {
            return false;
        }
        let (slope, se) = line_fit(&losses[n - span..]);
        if -slope <= se {
            self.lr = (self.lr / 10.0).max(self.final_lr);
            self.last_change = n;
            self.changes.push(n);
            return true;
        }
        false
    }
}

/// Least-squares slope of `y` against its index and the slope's standard error.
pub fn line_fit(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let tm = (n - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = (0..y.len()).map(|t| (t as f64 - tm).powi(2)).sum();
    let sxy: f64 = y.iter().enumerate().map(|(t, v)| (t as f64 - tm) * (v - ym)).sum();
    let slope = sxy / sxx;
    let sse: f64 = y
        .iter()
        .enumerate()
        .map(|(t, v)| (v - ym - slope * (t as f64 - tm)).powi(2))
        .sum();
    let se = if y.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    (slope, se)
}
