//! Patience-based early stopping that keeps a copy of the best state.

use crate::error::{Error, Result};
use crate::model::ParamVector;

pub const DEFAULT_MIN_DELTA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Lower is better (client validation loss).
    Minimize,
    /// Higher is better (server validation accuracy).
    Maximize,
}

#[derive(Debug, Clone)]
pub struct EarlyStopper {
    mode: Mode,
    patience: u32,
    min_delta: f64,
    best_value: f64,
    best_state: Option<ParamVector>,
    best_index: usize,
    observations: usize,
    rounds_without_improvement: u32,
}

impl EarlyStopper {
    pub fn new(mode: Mode, patience: u32, min_delta: f64) -> Result<Self> {
        if patience == 0 {
            return Err(Error::InvalidConfig("patience must be positive".into()));
        }
        if !(min_delta.is_finite() && min_delta >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "min_delta {min_delta} must be finite and non-negative"
            )));
        }
        let best_value = match mode {
            Mode::Minimize => f64::INFINITY,
            Mode::Maximize => f64::NEG_INFINITY,
        };
        Ok(Self {
            mode,
            patience,
            min_delta,
            best_value,
            best_state: None,
            best_index: 0,
            observations: 0,
            rounds_without_improvement: 0,
        })
    }

    /// Records one value and returns whether the caller should stop.
    pub fn observe(&mut self, value: f64, state: &ParamVector) -> Result<bool> {
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!(
                "early-stopping value {value} is not finite"
            )));
        }
        let improved = match self.mode {
            Mode::Minimize => value < self.best_value - self.min_delta,
            Mode::Maximize => value > self.best_value + self.min_delta,
        };
        if improved {
            self.best_value = value;
            self.best_state = Some(state.clone());
            self.best_index = self.observations;
            self.rounds_without_improvement = 0;
        } else {
            self.rounds_without_improvement += 1;
        }
        self.observations += 1;
        Ok(self.should_stop())
    }

    pub fn should_stop(&self) -> bool {
        self.rounds_without_improvement > self.patience
    }

    pub fn best(&self) -> Result<(f64, &ParamVector)> {
        self.best_state
            .as_ref()
            .map(|s| (self.best_value, s))
            .ok_or(Error::NoObservations)
    }

    /// Zero-based observation index at which the best value was seen.
    pub fn best_index(&self) -> Option<usize> {
        self.best_state.as_ref().map(|_| self.best_index)
    }

    pub fn best_value(&self) -> Option<f64> {
        self.best_state.as_ref().map(|_| self.best_value)
    }

    pub fn rounds_without_improvement(&self) -> u32 {
        self.rounds_without_improvement
    }

    pub fn observations(&self) -> usize {
        self.observations
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(v: f64) -> ParamVector {
        ParamVector::new(vec![v], 0.0).unwrap()
    }

    #[test]
    fn improving_sequence_never_stops() {
        let mut s = EarlyStopper::new(Mode::Minimize, 2, 0.0).unwrap();
        for v in [5.0, 4.0, 3.0, 2.0, 1.0] {
            assert!(!s.observe(v, &p(v)).unwrap());
        }
    }

    #[test]
    fn flat_sequence_stops_on_third_observation() {
        let mut s = EarlyStopper::new(Mode::Minimize, 1, 0.0).unwrap();
        assert!(!s.observe(1.0, &p(1.0)).unwrap());
        assert!(!s.observe(1.0, &p(1.0)).unwrap());
        assert_eq!(s.rounds_without_improvement(), 1);
        assert!(s.observe(1.0, &p(1.0)).unwrap());
    }

    #[test]
    fn first_maximize_observation_improves() {
        let mut s = EarlyStopper::new(Mode::Maximize, 1, 0.0).unwrap();
        s.observe(-1e300, &p(0.0)).unwrap();
        assert_eq!(s.best().unwrap().0, -1e300);
    }

    #[test]
    fn best_survives_later_worse_states() {
        let mut s = EarlyStopper::new(Mode::Maximize, 10, 0.0).unwrap();
        for (i, v) in [0.5, 0.9, 0.7, 0.6].into_iter().enumerate() {
            s.observe(v, &p(i as f64)).unwrap();
        }
        let (value, state) = s.best().unwrap();
        assert_eq!(value, 0.9);
        assert!(state.bitwise_eq(&p(1.0)));
        assert_eq!(s.best_index(), Some(1));
    }

    #[test]
    fn errors() {
        let s = EarlyStopper::new(Mode::Minimize, 1, 0.0).unwrap();
        assert!(matches!(s.best(), Err(Error::NoObservations)));
        let mut s = s;
        assert!(s.observe(f64::NAN, &p(0.0)).is_err());
        assert!(EarlyStopper::new(Mode::Minimize, 0, 0.0).is_err());
        assert!(EarlyStopper::new(Mode::Minimize, 1, -1.0).is_err());
    }

    #[test]
    fn min_delta_gates_improvement() {
        let mut s = EarlyStopper::new(Mode::Maximize, 5, 0.1).unwrap();
        s.observe(0.5, &p(0.0)).unwrap();
        s.observe(0.55, &p(1.0)).unwrap();
        assert_eq!(s.best().unwrap().0, 0.5);
        s.observe(0.61, &p(2.0)).unwrap();
        assert_eq!(s.best().unwrap().0, 0.61);
    }

    proptest! {
        #[test]
        fn best_value_is_monotone(values in prop::collection::vec(-10.0f64..10.0, 1..40), maximize: bool) {
            let mode = if maximize { Mode::Maximize } else { Mode::Minimize };
            let mut s = EarlyStopper::new(mode, 3, 0.0).unwrap();
            let mut prev: Option<f64> = None;
            for v in values {
                s.observe(v, &p(v)).unwrap();
                let best = s.best().unwrap().0;
                if let Some(prev) = prev {
                    if maximize { prop_assert!(best >= prev); } else { prop_assert!(best <= prev); }
                }
                prev = Some(best);
            }
        }

        #[test]
        fn stop_persists_without_improvement(patience in 1u32..5, tail in 1usize..10) {
            let mut s = EarlyStopper::new(Mode::Minimize, patience, 0.0).unwrap();
            s.observe(0.0, &p(0.0)).unwrap();
            let mut stopped = false;
            for _ in 0..(patience as usize + tail) {
                let now = s.observe(1.0, &p(1.0)).unwrap();
                if stopped { prop_assert!(now); }
                stopped |= now;
            }
            prop_assert!(stopped);
        }
    }
}
