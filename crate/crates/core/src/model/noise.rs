use rand_distr::{Distribution, StandardNormal};

use super::{PathMatrix, TimeGrid};
use crate::error::{invalid, Result};
use crate::rng::{Role, StreamKey};

/// Brownian increments for the signal and observation noise of a set of paths.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBundle {
    /// `n_paths × n_steps` signal increments.
    pub dw: PathMatrix,
    /// `n_paths × n_steps` observation increments.
    pub db: PathMatrix,
    pub seed: u64,
    pub path_ids: Vec<u64>,
}

impl NoiseBundle {
    pub fn n_paths(&self) -> usize {
        self.path_ids.len()
    }

    pub fn n_steps(&self) -> usize {
        self.dw.n_cols()
    }
}

/// `n_steps` independent `N(0, dt)` draws from the `(seed, path_id, role)` stream.
pub fn path_increments(grid: &TimeGrid, seed: u64, path_id: u64, role: Role) -> Vec<f64> {
    let mut rng = StreamKey::new(seed, path_id, role).rng();
    let sd = grid.dt.sqrt();
    (0..grid.n_steps)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect()
}

pub fn sample_noise(grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<NoiseBundle> {
    if n_paths == 0 {
        return Err(invalid("n_paths must be at least 1"));
    }
    let path_ids: Vec<u64> = (0..n_paths as u64).collect();
    let dw = path_ids.iter().map(|&i| path_increments(grid, seed, i, Role::SignalNoise)).collect();
    let db = path_ids.iter().map(|&i| path_increments(grid, seed, i, Role::ObservationNoise)).collect();
    Ok(NoiseBundle {
        dw: PathMatrix::from_rows(dw)?,
        db: PathMatrix::from_rows(db)?,
        seed,
        path_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_time_grid;
    use crate::stats::MeanSe;

    #[test]
    fn reproducible() {
        let g = build_time_grid(1.0, 10).unwrap();
        let a = sample_noise(&g, 5, 11).unwrap();
        let b = sample_noise(&g, 5, 11).unwrap();
        assert_eq!(a, b);
        let c = sample_noise(&g, 5, 12).unwrap();
        assert_ne!(a.dw, c.dw);
        // a path's increments depend on (seed, id) only
        assert_eq!(a.dw.row(3), path_increments(&g, 11, 3, Role::SignalNoise).as_slice());
    }

    #[test]
    fn moments_and_independence() {
        // 10^5 draws: 1000 paths × 100 steps
        let g = build_time_grid(1.0, 100).unwrap();
        let n = sample_noise(&g, 1000, 2024).unwrap();
        let dw = n.dw.values();
        let db = n.db.values();
        let m = MeanSe::of(dw.iter().copied());
        assert!(m.mean.abs() <= 4.0 * m.se, "mean {} se {}", m.mean, m.se);
        let var = dw.iter().map(|v| v * v).sum::<f64>() / dw.len() as f64;
        assert!((var / g.dt - 1.0).abs() < 0.02);
        // correlation estimate has SE ≈ 1/sqrt(n)
        let corr = dw.iter().zip(db).map(|(a, b)| a * b).sum::<f64>()
            / (dw.len() as f64 * g.dt);
        assert!(corr.abs() <= 4.0 / (dw.len() as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn rejects_zero_paths() {
        let g = build_time_grid(1.0, 10).unwrap();
        assert!(sample_noise(&g, 0, 1).is_err());
    }
}
