use std::collections::VecDeque;

/// Whether the mean of the last `w` flags exceeds `r`; missing history counts as 0.
pub fn windowed_decision(flags: &[bool], w: usize, r: f64) -> bool {
    let start = flags.len().saturating_sub(w);
    let count = flags[start..].iter().filter(|&&f| f).count();
    count as f64 / w as f64 > r
}

/// Incremental form of [`windowed_decision`] over a ring buffer.
#[derive(Debug, Clone)]
pub struct WindowedDecision {
    w: usize,
    r: f64,
    recent: VecDeque<bool>,
    count: usize,
}

impl WindowedDecision {
    pub fn new(w: usize, r: f64) -> Self {
        WindowedDecision {
            w,
            r,
            recent: VecDeque::with_capacity(w),
            count: 0,
        }
    }

    /// Records a flag and reports whether drift is declared at this step.
    pub fn push(&mut self, flag: bool) -> bool {
        if self.recent.len() == self.w && self.recent.pop_front() == Some(true) {
            self.count -= 1;
        }
        self.recent.push_back(flag);
        self.count += usize::from(flag);
        self.count as f64 / self.w as f64 > self.r
    }
}
