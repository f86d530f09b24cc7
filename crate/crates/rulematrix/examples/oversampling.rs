//! Retrains the Pima teacher with an under-performing subset oversampled and
//! compares test accuracy against the original teacher.
//!
//!     cargo run --release -p rulematrix --example oversampling -- [data_dir] [split_seed]

use std::path::PathBuf;

use rulematrix::experiments::{accuracy, oversample, DEFAULT_TEST_FRACTION};
use rulematrix::io::{load_dataset, LoadOptions};
use rulematrix_core::dataset::split_train_test;
use rulematrix_core::metrics::DataFilter;
use rulematrix_core::mlp::{train_mlp, MlpConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data".into()));
    let split: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let table = load_dataset(&dir, "pima", LoadOptions::default())?;
    let (train, test) = split_train_test(&table, DEFAULT_TEST_FRACTION, split)?;
    let s = &train.schema;
    let col = |name: &str| s.feature_index(name).ok_or_else(|| format!("pima has no `{name}` column"));
    let filter = DataFilter::default()
        .range(col("age")?, Some(33.0), None)
        .range(col("plasma_glucose")?, Some(108.0), Some(137.0))
        .range(col("bmi")?, Some(27.0), None)
        .range(col("dpf")?, None, Some(1.18));
    let selected = filter.select(train.instances());
    let subset = train.subset(&selected);
    let augmented = oversample(&train, &selected, 2)?;
    println!("subset: {} training instances, {} added", selected.len(), augmented.len() - train.len());

    let (mut before, mut after, mut on_subset) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..10 {
        let config = MlpConfig { hidden: vec![20, 20], seed, ..MlpConfig::default() };
        let base = train_mlp(&train, &config)?;
        let retrained = train_mlp(&augmented, &config)?;
        before.push(accuracy(&base, &test)?);
        after.push(accuracy(&retrained, &test)?);
        on_subset.push(accuracy(&base, &subset)?);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("teacher accuracy on subset:      {:.3}", mean(&on_subset));
    println!("test accuracy before:            {:.4}", mean(&before));
    println!("test accuracy after oversampling: {:.4}", mean(&after));
    Ok(())
}
