//! Published grid-search numbers run back through `psnr` and `average_by`.

use reconbench::metrics::psnr;
use reconbench_bench::grid::{average_by, GridCellResult, GridSpec};

/// (loss, psnr_db) for cells 1..=36 in grid order.
const GRID_ROWS: [(f64, f64); 36] = [
    (0.5463, 2.6257),
    (0.0030, 25.2288),
    (0.0493, 13.0715),
    (0.5463, 2.6257),
    (0.5463, 2.6257),
    (0.0025, 26.0206),
    (0.5463, 2.6257),
    (0.5463, 2.6257),
    (0.5463, 2.6257),
    (0.0026, 25.8503),
    (0.5463, 2.6257),
    (0.5463, 2.6257),
    (0.0921, 10.3574),
    (0.0032, 24.9485),
    (0.5463, 2.6257),
    (0.5463, 2.6257),
    (0.5463, 2.6257),
    (0.0026, 25.8503),
    (0.5463, 2.6257),
    (0.5463, 2.6257),
    (0.5463, 2.6257),
    (0.0025, 26.0206),
    (0.5463, 2.6257),
    (0.5463, 2.6257),
    (0.5463, 2.6257),
    (0.0032, 24.9485),
    (0.5463, 2.6257),
    (0.0033, 24.8149),
    (0.5463, 2.6257),
    (0.0027, 25.6864),
    (0.5463, 2.6257),
    (0.0024, 26.1979),
    (0.5463, 2.6257),
    (0.0027, 25.6864),
    (0.5463, 2.6257),
    (0.0027, 25.6864),
];

/// (lr, L, loss, psnr_db) of the averaged table.
const AVERAGE_ROWS: [(f64, u32, f64, f64); 12] = [
    (5e-3, 6, 0.3949, 4.0351),
    (5e-3, 9, 0.0031, 25.0863),
    (5e-3, 10, 0.3806, 4.1953),
    (5e-3, 12, 0.3653, 4.3735),
    (5e-4, 6, 0.5463, 2.6256),
    (5e-4, 9, 0.0026, 25.8502),
    (5e-4, 10, 0.5463, 2.6256),
    (5e-4, 12, 0.365, 4.3770),
    (5e-5, 6, 0.5463, 2.6256),
    (5e-5, 9, 0.0026, 25.8502),
    (5e-5, 10, 0.5463, 2.6256),
    (5e-5, 12, 0.3651, 4.3758),
];

fn published_results() -> Vec<GridCellResult> {
    GridSpec::default()
        .cells()
        .into_iter()
        .zip(GRID_ROWS)
        .map(|(c, (loss, psnr_db))| GridCellResult {
            id: c.id,
            seed: c.seed,
            lr: c.lr,
            n_freqs: c.n_freqs,
            loss,
            psnr_db,
            wall_time_s: 0.0,
            diverged: false,
            message: None,
        })
        .collect()
}

#[test]
fn psnr_reproduces_every_grid_row() {
    for (i, (loss, expected)) in GRID_ROWS.iter().enumerate() {
        let got = psnr(*loss).unwrap();
        assert!((got - expected).abs() < 0.005, "row {}: {got} vs {expected}", i + 1);
    }
}

#[test]
fn averages_reproduce_the_summary_table() {
    let avg = average_by(&published_results());
    assert_eq!(avg.len(), AVERAGE_ROWS.len());
    for (a, (lr, l, loss, psnr_db)) in avg.iter().zip(AVERAGE_ROWS) {
        assert_eq!((a.lr, a.n_freqs, a.cells, a.diverged), (lr, l, 3, 0));
        assert!((a.loss - loss).abs() < 5e-5, "({lr:e}, {l}) loss {} vs {loss}", a.loss);
        // the published PSNR is taken from the loss after rounding to four decimals
        let rounded = (a.loss * 1e4).round() / 1e4;
        let from_rounded = psnr(rounded).unwrap();
        assert!((from_rounded - psnr_db).abs() < 0.005, "({lr:e}, {l}) psnr {from_rounded} vs {psnr_db}");
        assert!((a.psnr_db - psnr_db).abs() < 0.05, "({lr:e}, {l}) psnr {} vs {psnr_db}", a.psnr_db);
    }
}

#[test]
fn summary_psnr_is_not_the_mean_of_row_psnrs() {
    let avg = average_by(&published_results());
    let first = &avg[0];
    assert!((first.mean_psnr_db - 5.2029).abs() < 1e-3, "{}", first.mean_psnr_db);
    assert!((first.psnr_db - first.mean_psnr_db).abs() > 1.0);
}
