//! Plateau-driven learning-rate decay with a floor and early stopping.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Higher is better (accuracy).
    Maximize,
    /// Lower is better (loss).
    Minimize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleConfig {
    pub initial_lr: f64,
    /// Multiplier applied to the rate on every non-improving epoch.
    pub decay_factor: f64,
    /// Floor as a fraction of `initial_lr`.
    pub min_lr_fraction: f64,
    /// Consecutive non-improving epochs before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub direction: Direction,
}

impl ScheduleConfig {
    /// Rate shrinks by `1 − decay_rate` on plateau, as used for the ASR runs.
    pub fn asr(initial_lr: f64, decay_rate: f64, max_epochs: usize) -> Self {
        Self {
            initial_lr,
            decay_factor: 1.0 - decay_rate,
            min_lr_fraction: 0.01,
            patience: 3,
            max_epochs,
            direction: Direction::Maximize,
        }
    }

    /// Rate is multiplied by `decay` on a dev-loss plateau, as used for TTS.
    pub fn tts(initial_lr: f64, decay: f64, max_epochs: usize) -> Self {
        Self {
            initial_lr,
            decay_factor: decay,
            min_lr_fraction: 0.01,
            patience: 3,
            max_epochs,
            direction: Direction::Minimize,
        }
    }

    pub fn min_lr(&self) -> f64 {
        self.initial_lr * self.min_lr_fraction
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Plateau,
    Stop,
}

/// Mutable schedule state carried across epochs.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub config: ScheduleConfig,
    pub epoch: usize,
    pub lr: f64,
    pub best: Option<f64>,
    pub bad_epochs: usize,
}

impl TrainState {
    pub fn new(config: ScheduleConfig) -> Self {
        Self {
            lr: config.initial_lr,
            config,
            epoch: 0,
            best: None,
            bad_epochs: 0,
        }
    }

    fn better(&self, metric: f64) -> bool {
        match (self.best, self.config.direction) {
            (None, _) => true,
            (Some(b), Direction::Maximize) => metric > b,
            (Some(b), Direction::Minimize) => metric < b,
        }
    }

    /// Records one epoch's dev metric and updates the rate.
    pub fn observe(&mut self, metric: f64) -> Verdict {
        self.epoch += 1;
        if self.better(metric) {
            self.best = Some(metric);
            self.bad_epochs = 0;
            return if self.epoch >= self.config.max_epochs { Verdict::Stop } else { Verdict::Improved };
        }
        self.bad_epochs += 1;
        self.lr = (self.lr * self.config.decay_factor).max(self.config.min_lr());
        if self.bad_epochs >= self.config.patience || self.epoch >= self.config.max_epochs {
            Verdict::Stop
        } else {
            Verdict::Plateau
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_floors_at_one_percent() {
        let mut s = TrainState::new(ScheduleConfig {
            patience: usize::MAX,
            max_epochs: usize::MAX,
            ..ScheduleConfig::asr(1.0, 0.1, 0)
        });
        s.observe(0.5);
        let mut prev = s.lr;
        for _ in 0..200 {
            assert_eq!(s.observe(0.1), Verdict::Plateau);
            assert!(s.lr <= prev);
            prev = s.lr;
        }
        assert_eq!(s.lr, 0.01);
    }

    #[test]
    fn stops_after_patience() {
        let mut s = TrainState::new(ScheduleConfig::asr(0.5, 0.2, 100));
        assert_eq!(s.observe(0.3), Verdict::Improved);
        assert_eq!(s.observe(0.2), Verdict::Plateau);
        assert!((s.lr - 0.4).abs() < 1e-15);
        assert_eq!(s.observe(0.35), Verdict::Improved);
        assert_eq!(s.bad_epochs, 0);
        assert_eq!(s.observe(0.35), Verdict::Plateau);
        assert_eq!(s.observe(0.1), Verdict::Plateau);
        assert_eq!(s.observe(0.1), Verdict::Stop);
    }

    #[test]
    fn minimizing_direction() {
        let mut s = TrainState::new(ScheduleConfig::tts(1e-3, 0.1, 100));
        assert_eq!(s.observe(2.0), Verdict::Improved);
        assert_eq!(s.observe(1.0), Verdict::Improved);
        assert_eq!(s.observe(1.5), Verdict::Plateau);
        assert!((s.lr - 1e-4).abs() < 1e-18);
        assert_eq!(s.observe(1.5), Verdict::Plateau);
        assert_eq!(s.lr, 1e-5);
    }

    #[test]
    fn max_epochs_bounds_training() {
        let mut s = TrainState::new(ScheduleConfig::asr(1.0, 0.1, 2));
        assert_eq!(s.observe(0.1), Verdict::Improved);
        assert_eq!(s.observe(0.2), Verdict::Stop);
    }
}
