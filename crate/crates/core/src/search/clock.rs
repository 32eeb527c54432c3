//! Time source for budgets and traces.

use std::time::Instant;

/// Wall time, or a virtual clock that advances by one tick per processed
/// node so that budgets and traces are reproducible.
#[derive(Debug, Clone)]
pub enum Clock {
    Wall(Instant),
    Virtual { nodes_per_ms: f64, ticks: u64 },
}

impl Clock {
    pub fn new(virtual_rate: Option<f64>) -> Self {
        match virtual_rate {
            Some(r) => Clock::Virtual {
                nodes_per_ms: r,
                ticks: 0,
            },
            None => Clock::Wall(Instant::now()),
        }
    }

    pub fn tick(&mut self) {
        if let Clock::Virtual { ticks, .. } = self {
            *ticks += 1;
        }
    }

    pub fn elapsed_ms(&self) -> f64 {
        match self {
            Clock::Wall(t) => t.elapsed().as_secs_f64() * 1e3,
            Clock::Virtual { nodes_per_ms, ticks } => *ticks as f64 / nodes_per_ms,
        }
    }

    pub fn is_virtual(&self) -> bool {
        matches!(self, Clock::Virtual { .. })
    }
}
