//! CSV tables. Floats use Rust's shortest round-trip formatting, so values
//! read back are bit-identical to the ones written.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use pbqaoa_core::ensemble::CovarianceRecord;
use pbqaoa_core::thermo::BinRow;
use pbqaoa_core::InstanceRecord;

pub const INSTANCE_HEADER: [&str; 10] = [
    "seed",
    "beta",
    "ci99",
    "r2",
    "xi",
    "gamma_opt",
    "theta_opt",
    "e_min",
    "e_max",
    "norm_J",
];

fn to_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

pub fn instances_csv(records: &[InstanceRecord]) -> Result<Vec<u8>> {
    to_bytes(
        &INSTANCE_HEADER,
        records.iter().map(|r| {
            vec![
                r.seed.to_string(),
                r.beta.to_string(),
                r.ci99.to_string(),
                r.r2.to_string(),
                r.xi.to_string(),
                r.gamma_opt.to_string(),
                r.theta_opt.to_string(),
                r.e_min.to_string(),
                r.e_max.to_string(),
                r.norm_j.to_string(),
            ]
        }),
    )
}

pub fn read_instances(path: &Path) -> Result<Vec<InstanceRecord>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != INSTANCE_HEADER {
        return Err(anyhow!("{}: unexpected header {header:?}", path.display()));
    }
    rdr.records()
        .map(|row| {
            let row = row?;
            let f = |k: usize| -> Result<f64> { Ok(row[k].parse()?) };
            Ok(InstanceRecord {
                seed: row[0].parse()?,
                beta: f(1)?,
                ci99: f(2)?,
                r2: f(3)?,
                xi: f(4)?,
                gamma_opt: f(5)?,
                theta_opt: f(6)?,
                e_min: f(7)?,
                e_max: f(8)?,
                norm_j: f(9)?,
            })
        })
        .collect()
}

/// Replica-binned table: bin centre on the rescaled axis, mass summed over
/// replicas, state count and mean per-state probability.
pub fn bins_csv(rows: &[BinRow]) -> Result<Vec<u8>> {
    to_bytes(
        &["center", "mass", "count", "mean_probability"],
        rows.iter().map(|r| {
            vec![
                r.center.to_string(),
                r.mass.to_string(),
                r.count.to_string(),
                r.mean_probability.to_string(),
            ]
        }),
    )
}

pub fn covariance_csv(records: &[CovarianceRecord]) -> Result<Vec<u8>> {
    to_bytes(
        &["seed", "c", "correlation", "fit_r2", "beta_predicted", "beta_fitted"],
        records.iter().map(|r| {
            vec![
                r.seed.to_string(),
                r.c.to_string(),
                r.correlation.to_string(),
                r.fit_r2.to_string(),
                r.beta_predicted.to_string(),
                r.beta_fitted.to_string(),
            ]
        }),
    )
}
