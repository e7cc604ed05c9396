use crate::error::{Error, Result};
use crate::numerics::{derivative, second_derivative};

use super::data::SpatialGrid;

/// Grid plus the full stored history of `v`, `u = int_0^t v`, the cell strain
/// `u_x` and the sampled forcing.
#[derive(Clone, Debug)]
pub struct ShearState {
    grid: SpatialGrid,
    dt: f64,
    /// `[step][node]`
    v: Vec<Vec<f64>>,
    /// `[step][node]`
    u: Vec<Vec<f64>>,
    /// `[step][node]`
    f: Vec<Vec<f64>>,
    /// `[cell][step]`: `(u_{i+1} - u_i) / dx`
    strain: Vec<Vec<f64>>,
}

impl ShearState {
    /// State at `t = 0` with `u = 0`. Boundary values of `v0` must already be zero.
    pub fn new(grid: SpatialGrid, dt: f64, v0: Vec<f64>, f0: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Domain(format!("time step must be > 0, got {dt}")));
        }
        let n = grid.nodes();
        if v0.len() != n || f0.len() != n {
            return Err(Error::Usage(format!(
                "initial fields need {n} nodal values, got {} and {}",
                v0.len(),
                f0.len()
            )));
        }
        if v0[0] != 0.0 || v0[n - 1] != 0.0 {
            return Err(Error::Usage("boundary values of v must be exactly zero".into()));
        }
        Ok(Self {
            grid,
            dt,
            v: vec![v0],
            u: vec![vec![0.0; n]],
            f: vec![f0],
            strain: vec![vec![0.0]; grid.cells()],
        })
    }

    /// Build a state from a prescribed velocity history, accumulating `u` and
    /// the strain exactly as the time stepper does.
    pub fn from_history(grid: SpatialGrid, dt: f64, v: Vec<Vec<f64>>, f: Vec<Vec<f64>>) -> Result<Self> {
        if v.is_empty() || v.len() != f.len() {
            return Err(Error::Usage("velocity and forcing histories must have equal, non-zero length".into()));
        }
        let mut it = v.into_iter().zip(f);
        let (v0, f0) = it.next().unwrap_or_default();
        let mut state = Self::new(grid, dt, v0, f0)?;
        for (vk, fk) in it {
            state.push(vk, fk)?;
        }
        Ok(state)
    }

    /// Append the accepted velocity and forcing at the next step.
    pub(crate) fn push(&mut self, v: Vec<f64>, f: Vec<f64>) -> Result<()> {
        let n = self.grid.nodes();
        if v.len() != n || f.len() != n {
            return Err(Error::Usage("field length does not match the grid".into()));
        }
        if v[0] != 0.0 || v[n - 1] != 0.0 {
            return Err(Error::Usage("boundary values of v must be exactly zero".into()));
        }
        let u = self.next_displacement(&v);
        let dx = self.grid.dx();
        for (c, hist) in self.strain.iter_mut().enumerate() {
            hist.push((u[c + 1] - u[c]) / dx);
        }
        self.u.push(u);
        self.v.push(v);
        self.f.push(f);
        Ok(())
    }

    /// Trapezoid update `u_{k+1} = u_k + dt (v_k + v_{k+1}) / 2`.
    pub(crate) fn next_displacement(&self, v_next: &[f64]) -> Vec<f64> {
        let (uk, vk) = (self.u.last().unwrap(), self.v.last().unwrap());
        let half = 0.5 * self.dt;
        uk.iter()
            .zip(vk)
            .zip(v_next)
            .map(|((u, a), b)| u + half * (a + b))
            .collect()
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Index of the latest stored step.
    pub fn step(&self) -> usize {
        self.v.len() - 1
    }

    pub fn time(&self) -> f64 {
        self.step() as f64 * self.dt
    }

    pub fn velocity(&self, k: usize) -> &[f64] {
        &self.v[k]
    }

    pub fn displacement(&self, k: usize) -> &[f64] {
        &self.u[k]
    }

    pub fn forcing(&self, k: usize) -> &[f64] {
        &self.f[k]
    }

    /// Strain history of one cell, steps `0..=step()`.
    pub fn cell_strain(&self, cell: usize) -> &[f64] {
        &self.strain[cell]
    }

    /// Cell strain at step `k`.
    pub fn strain_field(&self, k: usize) -> Vec<f64> {
        self.strain.iter().map(|h| h[k]).collect()
    }

    /// `u_x` at the nodes at step `k` (centred inside, one-sided at the ends).
    pub fn nodal_strain(&self, k: usize) -> Vec<f64> {
        derivative(&self.u[k], self.grid.dx())
    }

    pub fn velocity_gradient(&self, k: usize) -> Vec<f64> {
        derivative(&self.v[k], self.grid.dx())
    }

    pub fn velocity_curvature(&self, k: usize) -> Vec<f64> {
        second_derivative(&self.v[k], self.grid.dx())
    }

    /// Time series of `v` at one node.
    pub fn node_velocity(&self, i: usize) -> Vec<f64> {
        self.v.iter().map(|row| row[i]).collect()
    }

    pub fn node_forcing(&self, i: usize) -> Vec<f64> {
        self.f.iter().map(|row| row[i]).collect()
    }

    pub fn velocities(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn displacements(&self) -> &[Vec<f64>] {
        &self.u
    }

    pub fn forcings(&self) -> &[Vec<f64>] {
        &self.f
    }

    /// Largest `|u_x(t_k) - u_x(t_j)|` over all cells and `j <= k`, which
    /// includes `j = 0` where `u_x = 0`.
    pub fn max_strain_increment(&self, k: usize) -> f64 {
        self.strain
            .iter()
            .map(|h| {
                let (lo, hi) = h[..=k]
                    .iter()
                    .fold((0.0f64, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
                (h[k] - lo).max(hi - h[k])
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn displacement_is_the_trapezoid_of_velocity() {
        let grid = SpatialGrid::new(1.0, 9).unwrap();
        let dt = 0.1;
        let hist: Vec<Vec<f64>> = (0..5)
            .map(|k| {
                grid.positions()
                    .iter()
                    .enumerate()
                    .map(|(i, x)| if i == 0 || i == 10 { 0.0 } else { x * (k as f64 + 1.0) })
                    .collect()
            })
            .collect();
        let f = vec![vec![0.0; 11]; 5];
        let s = ShearState::from_history(grid, dt, hist.clone(), f).unwrap();
        let mut u = [0.0; 11];
        for k in 1..5 {
            for i in 0..11 {
                u[i] += 0.5 * dt * (hist[k - 1][i] + hist[k][i]);
            }
            assert_eq!(s.displacement(k), &u[..]);
        }
        assert_eq!(s.strain_field(4)[3], (u[4] - u[3]) / grid.dx());
    }

    #[test]
    fn nonzero_boundary_is_rejected() {
        let grid = SpatialGrid::new(1.0, 9).unwrap();
        let mut v0 = vec![0.0; 11];
        v0[0] = 1e-3;
        assert!(ShearState::new(grid, 0.1, v0, vec![0.0; 11]).is_err());
    }
}
