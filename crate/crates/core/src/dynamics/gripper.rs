use serde::{Deserialize, Serialize};

/// First-order gripper. Aperture 1 is fully open; a closed gripper settles at
/// `held_aperture` when it holds an object and at 0 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gripper {
    pub aperture: f64,
    /// Last command, `+1` closes and `-1` opens.
    pub command: f64,
    /// Aperture change per second.
    pub rate: f64,
    pub held_aperture: f64,
}

impl Default for Gripper {
    fn default() -> Self {
        Gripper {
            aperture: 1.0,
            command: -1.0,
            rate: 2.5,
            held_aperture: 0.25,
        }
    }
}

impl Gripper {
    pub fn is_closing(&self) -> bool {
        self.command > 0.0
    }

    pub fn step(&mut self, dt: f64, holding: bool) {
        let target = match (self.is_closing(), holding) {
            (true, true) => self.held_aperture,
            (true, false) => 0.0,
            (false, _) => 1.0,
        };
        let max_move = self.rate * dt;
        let delta = (target - self.aperture).clamp(-max_move, max_move);
        self.aperture = (self.aperture + delta).clamp(0.0, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closes_onto_object_and_reopens() {
        let mut g = Gripper {
            command: 1.0,
            ..Gripper::default()
        };
        for _ in 0..100 {
            g.step(0.01, true);
        }
        assert!((g.aperture - g.held_aperture).abs() < 1e-12);
        g.command = -1.0;
        for _ in 0..100 {
            g.step(0.01, false);
        }
        assert_eq!(g.aperture, 1.0);
    }
}
