#![allow(dead_code)]

use std::path::Path;

use abcfs::dataset::{Dataset, FeatureDescriptor, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// 60 x 20 problem with y = 3 x1 - 2 x7 + N(0, 0.01^2), columns `x0..x19`.
pub fn planted(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let (n, p) = (60, 20);
    let x = Matrix::new(n, p, (0..n * p).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let y = x
        .iter_rows()
        .map(|r| 3.0 * r[1] - 2.0 * r[7] + noise.sample(&mut rng))
        .collect();
    let names = (0..p)
        .map(|j| FeatureDescriptor::from_header(&format!("x{j}")))
        .collect();
    Dataset::new(x, y, names, "y").unwrap()
}

/// CSV shaped like the NIR extrusion data: wavenumber columns 6000-6700
/// cm^-1 every 4, a few process columns and an `Mn` target in Da that
/// depends on one absorbance band and the melt temperature.
pub fn surrogate_csv(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let wavenumbers: Vec<u32> = (6000..=6700).step_by(4).collect();
    let process = ["melt_temp", "screw_speed", "feed_rate", "die_pressure"];
    let mut out = String::new();
    for w in &wavenumbers {
        out.push_str(&format!("{w},"));
    }
    out.push_str(&process.join(","));
    out.push_str(",Mn\n");
    for _ in 0..n {
        let base: f64 = rng.gen_range(0.2..0.6);
        let band: f64 = rng.gen_range(-0.05..0.05);
        let melt: f64 = rng.gen_range(180.0..220.0);
        let mut row = Vec::new();
        for &w in &wavenumbers {
            let peak = (-((w as f64 - 6158.0) / 30.0).powi(2)).exp();
            row.push(base + band * peak + 0.002 * noise.sample(&mut rng));
        }
        row.push(melt);
        row.push(rng.gen_range(20.0..60.0));
        row.push(rng.gen_range(1.0..3.0));
        row.push(rng.gen_range(50.0..90.0));
        let mn = 60000.0 + 40000.0 * band - 120.0 * (melt - 200.0) + 300.0 * noise.sample(&mut rng);
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push_str(&format!(",{mn:?}\n"));
    }
    out
}

pub fn write_surrogate(dir: &Path, n: usize, seed: u64) -> std::path::PathBuf {
    let path = dir.join("surrogate.csv");
    std::fs::write(&path, surrogate_csv(n, seed)).unwrap();
    path
}

/// Small-budget config over the surrogate file.
pub fn small_config(dataset: &Path, out: &Path) -> abcfs::harness::ExperimentConfig {
    let mut cfg = abcfs::harness::ExperimentConfig {
        dataset: dataset.to_path_buf(),
        output_dir: out.to_path_buf(),
        ..Default::default()
    };
    cfg.regressor =
        abcfs::regressor::RegressorConfig::anfis(2, abcfs::anfis::ConsequentKind::Linear);
    cfg.abc.population = 6;
    cfg.abc.iterations = 3;
    cfg.abc.cardinality = abcfs::abc::CardinalityMode::Fixed { k: 2 };
    cfg.case_training.ann.epochs = 60;
    cfg.case_training.anfis.premise_epochs = 5;
    cfg
}
