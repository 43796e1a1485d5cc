use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use reconbench::metrics::psnr;
use reconbench::nerf::{train, EncodingConfig, RenderConfig, TrainConfig};
use reconbench::scene::Dataset;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Factors of the hyperparameter search. Cells follow the list orders,
/// seed-major, then learning rate, then frequency count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub seeds: Vec<u64>,
    pub lrs: Vec<f64>,
    pub freqs: Vec<u32>,
}

impl Default for GridSpec {
    /// The 36-cell search, seeds in the order they appear in the published table.
    fn default() -> Self {
        Self {
            seeds: vec![2057, 7461, 5680],
            lrs: vec![5e-3, 5e-4, 5e-5],
            freqs: vec![6, 9, 10, 12],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub id: usize,
    pub seed: u64,
    pub lr: f64,
    pub n_freqs: u32,
}

impl GridSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(BenchError::io(path))?;
        let spec: GridSpec = serde_json::from_str(&text)
            .map_err(|e| BenchError::Validation(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() || self.lrs.is_empty() || self.freqs.is_empty() {
            return Err(BenchError::Validation("grid spec lists must be nonempty".into()));
        }
        if let Some(lr) = self.lrs.iter().find(|lr| !(**lr > 0.0 && lr.is_finite())) {
            return Err(BenchError::Validation(format!("learning rate {lr} is not positive")));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<GridCell> {
        let mut out = Vec::with_capacity(self.seeds.len() * self.lrs.len() * self.freqs.len());
        for &seed in &self.seeds {
            for &lr in &self.lrs {
                for &n_freqs in &self.freqs {
                    out.push(GridCell {
                        id: out.len() + 1,
                        seed,
                        lr,
                        n_freqs,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCellResult {
    pub id: usize,
    pub seed: u64,
    pub lr: f64,
    pub n_freqs: u32,
    /// Held-out MSE after the last iteration; NaN when the run diverged.
    pub loss: f64,
    pub psnr_db: f64,
    pub wall_time_s: f64,
    pub diverged: bool,
    pub message: Option<String>,
}

/// Settings shared by every cell; seed and learning rate come from the cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    pub train: TrainConfig,
    pub render: RenderConfig,
    pub include_identity: bool,
    pub threads: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            train: TrainConfig {
                n_iters: 50,
                rays_per_batch: 0,
                eval_every: 50,
                ..Default::default()
            },
            render: RenderConfig {
                n_samples: 16,
                ..Default::default()
            },
            include_identity: true,
            threads: 1,
        }
    }
}

fn run_cell(dataset: &Dataset, cell: &GridCell, settings: &GridSettings) -> Result<GridCellResult> {
    let cfg = TrainConfig {
        seed: cell.seed,
        learning_rate: cell.lr,
        ..settings.train.clone()
    };
    let encoding = EncodingConfig {
        n_freqs: cell.n_freqs,
        include_identity: settings.include_identity,
    };
    let start = Instant::now();
    let outcome = train(dataset, encoding, &cfg, &settings.render);
    let wall_time_s = start.elapsed().as_secs_f64();
    let mut result = GridCellResult {
        id: cell.id,
        seed: cell.seed,
        lr: cell.lr,
        n_freqs: cell.n_freqs,
        loss: f64::NAN,
        psnr_db: f64::NAN,
        wall_time_s,
        diverged: false,
        message: None,
    };
    match outcome {
        Ok(out) => match out.final_entry() {
            Some(h) => {
                result.loss = h.loss;
                result.psnr_db = h.psnr;
            }
            None => result.message = Some("no iterations were run".into()),
        },
        Err(e @ reconbench::Error::Diverged { .. }) => {
            warn!("cell {}: {e}", cell.id);
            result.diverged = true;
            result.message = Some(e.to_string());
        }
        Err(e) => return Err(e.into()),
    }
    info!(
        "cell {} (seed {}, lr {:e}, L {}): loss {:.4}, {:.4} dB in {:.1} s",
        cell.id, cell.seed, cell.lr, cell.n_freqs, result.loss, result.psnr_db, wall_time_s
    );
    Ok(result)
}

/// Trains one model per cell. Divergence is recorded in the cell; other errors abort.
pub fn run_grid(dataset: &Dataset, spec: &GridSpec, settings: &GridSettings) -> Result<Vec<GridCellResult>> {
    spec.validate()?;
    let cells = spec.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.threads.max(1))
        .build()?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|cell| run_cell(dataset, cell, settings))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAverage {
    pub lr: f64,
    pub n_freqs: u32,
    /// Cells that finished; diverged cells are left out of the means.
    pub cells: usize,
    pub diverged: usize,
    pub loss: f64,
    /// PSNR of the mean loss.
    pub psnr_db: f64,
    /// Arithmetic mean of the per-cell PSNR values.
    pub mean_psnr_db: f64,
}

/// Groups results by (learning rate, frequency count) in order of first appearance.
pub fn average_by(results: &[GridCellResult]) -> Vec<GridAverage> {
    let mut keys: Vec<(f64, u32)> = Vec::new();
    for r in results {
        if !keys.iter().any(|&(lr, l)| lr == r.lr && l == r.n_freqs) {
            keys.push((r.lr, r.n_freqs));
        }
    }
    keys.into_iter()
        .map(|(lr, n_freqs)| {
            let group: Vec<&GridCellResult> =
                results.iter().filter(|r| r.lr == lr && r.n_freqs == n_freqs).collect();
            let ok: Vec<&&GridCellResult> = group.iter().filter(|r| !r.diverged && r.loss.is_finite()).collect();
            let n = ok.len() as f64;
            let (loss, mean_psnr_db) = if ok.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (
                    ok.iter().map(|r| r.loss).sum::<f64>() / n,
                    ok.iter().map(|r| r.psnr_db).sum::<f64>() / n,
                )
            };
            GridAverage {
                lr,
                n_freqs,
                cells: ok.len(),
                diverged: group.len() - ok.len(),
                loss,
                psnr_db: psnr(loss).unwrap_or(f64::NAN),
                mean_psnr_db,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_spec_has_36_cells_in_table_order() {
        let cells = GridSpec::default().cells();
        assert_eq!(cells.len(), 36);
        assert_eq!(cells[0], GridCell { id: 1, seed: 2057, lr: 5e-3, n_freqs: 6 });
        assert_eq!(cells[5], GridCell { id: 6, seed: 2057, lr: 5e-4, n_freqs: 9 });
        assert_eq!(cells[12].seed, 7461);
        assert_eq!(cells[35], GridCell { id: 36, seed: 5680, lr: 5e-5, n_freqs: 12 });
    }

    #[test]
    fn single_value_spec_has_one_cell() {
        let spec = GridSpec {
            seeds: vec![1],
            lrs: vec![1e-3],
            freqs: vec![4],
        };
        assert_eq!(spec.cells().len(), 1);
        assert!(GridSpec { seeds: vec![], ..spec.clone() }.validate().is_err());
        assert!(GridSpec { lrs: vec![-1.0], ..spec }.validate().is_err());
    }

    #[test]
    fn shipped_spec_file_is_the_default() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("specs/grid.json");
        assert_eq!(GridSpec::load(&path).unwrap(), GridSpec::default());
    }

    fn cell(lr: f64, n_freqs: u32, loss: f64) -> GridCellResult {
        GridCellResult {
            id: 0,
            seed: 0,
            lr,
            n_freqs,
            loss,
            psnr_db: psnr(loss).unwrap(),
            wall_time_s: 0.0,
            diverged: false,
            message: None,
        }
    }

    #[test]
    fn grouping_preserves_counts_and_singletons() {
        let mut results = vec![cell(1e-3, 6, 0.5), cell(1e-3, 9, 0.01), cell(1e-3, 6, 0.3)];
        results.push(GridCellResult {
            diverged: true,
            loss: f64::NAN,
            psnr_db: f64::NAN,
            ..cell(1e-3, 9, 1.0)
        });
        let avg = average_by(&results);
        assert_eq!(avg.len(), 2);
        assert_eq!(avg.iter().map(|a| a.cells + a.diverged).sum::<usize>(), results.len());
        assert!((avg[0].loss - 0.4).abs() < 1e-12);
        assert_eq!(avg[1].loss, 0.01);
        assert_eq!(avg[1].psnr_db, 20.0);
        assert_eq!(avg[1].diverged, 1);
    }
}
