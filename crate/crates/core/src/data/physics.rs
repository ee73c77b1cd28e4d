//! Particles coupled pairwise by springs with potential `(r - 1)^2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{add, dot, norm, scale, sub, Vec3};

const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSystem {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub masses: Vec<f64>,
}

impl ParticleSystem {
    pub fn new(positions: Vec<Vec3>, velocities: Vec<Vec3>, masses: Vec<f64>) -> Result<Self> {
        if positions.len() != velocities.len() || positions.len() != masses.len() {
            return Err(Error::Shape("positions, velocities and masses differ in length".into()));
        }
        if masses.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::invalid("masses must be positive and finite"));
        }
        if positions.iter().chain(&velocities).flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite coordinate"));
        }
        Ok(Self {
            positions,
            velocities,
            masses,
        })
    }

    /// Unit masses, positions uniform in the cube `[-side/2, side/2]^3`,
    /// velocity components normal with standard deviation `velocity_sigma`.
    pub fn random(n: usize, side: f64, velocity_sigma: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = side / 2.0;
        let vel = Normal::new(0.0, velocity_sigma)
            .map_err(|e| Error::invalid(format!("velocity sigma: {e}")))?;
        let positions = (0..n)
            .map(|_| std::array::from_fn(|_| rng.random_range(-half..half)))
            .collect();
        let velocities = (0..n)
            .map(|_| std::array::from_fn(|_| vel.sample(&mut rng)))
            .collect();
        Self::new(positions, velocities, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn momentum(&self) -> Vec3 {
        self.velocities
            .iter()
            .zip(&self.masses)
            .fold([0.0; 3], |acc, (v, &m)| add(acc, scale(*v, m)))
    }
}

/// `F_i = sum_j -2 (r_ij - 1) * (x_i - x_j) / r_ij`.
pub fn spring_forces(sys: &ParticleSystem) -> Result<Vec<Vec3>> {
    let n = sys.len();
    let mut f = vec![[0.0; 3]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sub(sys.positions[i], sys.positions[j]);
            let r = norm(d);
            if r == 0.0 {
                return Err(Error::SingularSeparation(i, j));
            }
            let fij = scale(d, -2.0 * (r - 1.0) / r);
            f[i] = add(f[i], fij);
            f[j] = sub(f[j], fij);
        }
    }
    Ok(f)
}

/// `sum_{i<j} (r_ij - 1)^2`.
pub fn spring_potential(positions: &[Vec3]) -> f64 {
    let mut u = 0.0;
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let r = norm(sub(positions[i], positions[j]));
            u += (r - 1.0).powi(2);
        }
    }
    u
}

/// Total energy: kinetic plus spring potential.
pub fn hamiltonian(sys: &ParticleSystem) -> Result<f64> {
    for i in 0..sys.len() {
        for j in (i + 1)..sys.len() {
            if sys.positions[i] == sys.positions[j] {
                return Err(Error::SingularSeparation(i, j));
            }
        }
    }
    let kinetic: f64 = sys
        .velocities
        .iter()
        .zip(&sys.masses)
        .map(|(v, m)| 0.5 * m * dot(*v, *v))
        .sum();
    Ok(kinetic + spring_potential(&sys.positions))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    VelocityVerlet,
}

/// Integrates `steps` steps and returns `steps + 1` states, the initial one
/// first.
pub fn simulate(
    sys: &ParticleSystem,
    dt: f64,
    steps: usize,
    integrator: Integrator,
) -> Result<Vec<ParticleSystem>> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    if steps == 0 {
        return Err(Error::invalid("steps must be at least 1"));
    }
    let Integrator::VelocityVerlet = integrator;
    let mut traj = Vec::with_capacity(steps + 1);
    let mut state = sys.clone();
    let mut acc = accelerations(&state)?;
    traj.push(state.clone());
    for step in 1..=steps {
        for i in 0..state.len() {
            let x = add(
                state.positions[i],
                add(scale(state.velocities[i], dt), scale(acc[i], 0.5 * dt * dt)),
            );
            state.positions[i] = x;
        }
        if state
            .positions
            .iter()
            .flatten()
            .any(|c| !c.is_finite() || c.abs() > DIVERGENCE_LIMIT)
        {
            return Err(Error::Diverged(step));
        }
        let next = accelerations(&state)?;
        for i in 0..state.len() {
            state.velocities[i] = add(state.velocities[i], scale(add(acc[i], next[i]), 0.5 * dt));
        }
        acc = next;
        traj.push(state.clone());
    }
    Ok(traj)
}

fn accelerations(sys: &ParticleSystem) -> Result<Vec<Vec3>> {
    Ok(spring_forces(sys)?
        .into_iter()
        .zip(&sys.masses)
        .map(|(f, &m)| scale(f, 1.0 / m))
        .collect())
}
