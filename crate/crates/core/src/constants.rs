use crate::error::{Error, Result};

/// Physical constants shared by the quantum and Brownian pictures.
///
/// The reduced Planck constant is never stored: it is identified with
/// `2 m D` throughout, so quantum and diffusion runs are numerically
/// comparable by construction. The friction rate only matters to the
/// kinetic-theory module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    mass: f64,
    diffusion: f64,
    friction: f64,
}

impl PhysicalConstants {
    pub fn new(mass: f64, diffusion: f64) -> Result<Self> {
        Self::with_friction(mass, diffusion, 1.0)
    }

    pub fn with_friction(mass: f64, diffusion: f64, friction: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Domain(format!("mass must be positive, got {mass}")));
        }
        if !(diffusion.is_finite() && diffusion > 0.0) {
            return Err(Error::Domain(format!(
                "diffusion constant must be positive, got {diffusion}"
            )));
        }
        if !(friction.is_finite() && friction > 0.0) {
            return Err(Error::Domain(format!(
                "friction must be positive, got {friction}"
            )));
        }
        Ok(Self {
            mass,
            diffusion,
            friction,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn friction(&self) -> f64 {
        self.friction
    }

    /// `hbar = 2 m D`, the dictionary between the two pictures.
    pub fn hbar(&self) -> f64 {
        2.0 * self.mass * self.diffusion
    }

    /// `k_B T = m D beta`, meaningful in the kinetic module.
    pub fn kb_t(&self) -> f64 {
        self.mass * self.diffusion * self.friction
    }
}

impl Default for PhysicalConstants {
    /// `m = 1`, `D = 1/2`, `beta = 1`, so that `hbar = 1`.
    fn default() -> Self {
        Self {
            mass: 1.0,
            diffusion: 0.5,
            friction: 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hbar_is_twice_m_d() {
        let c = PhysicalConstants::new(2.0, 0.25).unwrap();
        assert_eq!(c.hbar(), 1.0);
        let d = PhysicalConstants::default();
        assert_eq!(d.hbar(), 1.0);
    }

    #[test]
    fn kb_t_is_m_d_beta() {
        let c = PhysicalConstants::with_friction(1.0, 0.5, 4.0).unwrap();
        assert_eq!(c.kb_t(), 2.0);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(PhysicalConstants::new(0.0, 0.5).is_err());
        assert!(PhysicalConstants::new(1.0, -1.0).is_err());
        assert!(PhysicalConstants::with_friction(1.0, 0.5, 0.0).is_err());
    }
}
