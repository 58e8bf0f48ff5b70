//! Synthetic regression benchmarks, CSV ingestion, and pool construction.
//!
//! Five classic test functions over their canonical boxes serve as noiseless
//! oracles. [`make_pools_synthetic`] draws the initial labeled set `L0`,
//! validation set `V`, unlabeled pool `U0`, and test set `T` uniformly from
//! the box; [`make_pools_dataset`] carves the same four pools out of a CSV
//! by shuffled row split. Either way the inputs are z-scored and the labels
//! centered using statistics from `L0` and `V` only — the pools the learner
//! is allowed to see labels for at the start — and the pool's own labels
//! stay hidden behind [`DataPools::acquire`].

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The synthetic test functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Benchmark {
    Ackley5,
    Branin,
    CurrinExponential,
    Gramacy,
    Higdon,
}

impl Benchmark {
    pub const ALL: [Benchmark; 5] = [
        Benchmark::Ackley5,
        Benchmark::Branin,
        Benchmark::CurrinExponential,
        Benchmark::Gramacy,
        Benchmark::Higdon,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Benchmark::Ackley5 => "ackley-5d",
            Benchmark::Branin => "branin",
            Benchmark::CurrinExponential => "currin",
            Benchmark::Gramacy => "gramacy",
            Benchmark::Higdon => "higdon",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Benchmark::Ackley5 => 5,
            Benchmark::Branin | Benchmark::CurrinExponential => 2,
            Benchmark::Gramacy | Benchmark::Higdon => 1,
        }
    }

    /// Per-dimension `(lower, upper)` input box.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match self {
            Benchmark::Ackley5 => vec![(-5.0, 5.0); 5],
            Benchmark::Branin => vec![(-5.0, 10.0), (0.0, 15.0)],
            Benchmark::CurrinExponential => vec![(0.0, 1.0); 2],
            Benchmark::Gramacy => vec![(0.5, 2.5)],
            Benchmark::Higdon => vec![(0.0, 20.0)],
        }
    }

    /// Evaluate the function at `x`; errors if `x` leaves the input box.
    pub fn evaluate(&self, x: ArrayView1<f64>) -> Result<f64> {
        let bounds = self.bounds();
        if x.len() != bounds.len() {
            return Err(Error::DimensionMismatch {
                expected: bounds.len(),
                got: x.len(),
            });
        }
        for (i, (&xi, &(lo, hi))) in x.iter().zip(bounds.iter()).enumerate() {
            if !(lo..=hi).contains(&xi) {
                return Err(Error::Domain(format!(
                    "{} coordinate {i} = {xi} outside [{lo}, {hi}]",
                    self.name()
                )));
            }
        }
        Ok(self.evaluate_unchecked(x))
    }

    fn evaluate_unchecked(&self, x: ArrayView1<f64>) -> f64 {
        use std::f64::consts::{E, PI};
        match self {
            Benchmark::Ackley5 => {
                let d = 5.0;
                let sq: f64 = x.iter().map(|v| v * v).sum();
                let cs: f64 = x.iter().map(|v| (2.0 * PI * v).cos()).sum();
                -20.0 * (-0.2 * (sq / d).sqrt()).exp() - (cs / d).exp() + 20.0 + E
            }
            Benchmark::Branin => {
                let (x1, x2) = (x[0], x[1]);
                let b = 5.1 / (4.0 * PI * PI);
                let c = 5.0 / PI;
                let inner = x2 - b * x1 * x1 + c * x1 - 6.0;
                inner * inner + 10.0 * (1.0 - 1.0 / (8.0 * PI)) * x1.cos() + 10.0
            }
            Benchmark::CurrinExponential => {
                let (x1, x2) = (x[0], x[1]);
                // At x2 = 0 the exponent is -inf, exp gives 0, factor is 1:
                // the removable singularity needs no special case in f64.
                let factor = 1.0 - (-1.0 / (2.0 * x2)).exp();
                let num = 2300.0 * x1.powi(3) + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0;
                let den = 100.0 * x1.powi(3) + 500.0 * x1 * x1 + 4.0 * x1 + 20.0;
                factor * num / den
            }
            Benchmark::Gramacy => {
                let v = x[0];
                (10.0 * PI * v).sin() / (2.0 * v) + (v - 1.0).powi(4)
            }
            Benchmark::Higdon => {
                let v = x[0];
                (2.0 * PI * v / 10.0).sin() + 0.2 * (2.0 * PI * v / 2.5).sin()
            }
        }
    }
}

impl std::fmt::Display for Benchmark {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ackley-5d" | "ackley5d" | "ackley" => Ok(Benchmark::Ackley5),
            "branin" => Ok(Benchmark::Branin),
            "currin" | "currin-exponential" => Ok(Benchmark::CurrinExponential),
            "gramacy" => Ok(Benchmark::Gramacy),
            "higdon" => Ok(Benchmark::Higdon),
            other => Err(Error::parameter(format!(
                "unknown benchmark '{other}' (expected one of {})",
                Benchmark::ALL.map(|b| b.name()).join(", ")
            ))),
        }
    }
}

/// Sizes of the four pools. The synthetic default follows the common
/// protocol of a small seed set, a modest validation set, a large candidate
/// pool, and a held-out test set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SplitSpec {
    pub n_initial: usize,
    pub n_validation: usize,
    pub n_pool: usize,
    pub n_test: usize,
}

impl SplitSpec {
    /// 10 / 50 / 500 / 100: the default for every synthetic benchmark.
    pub fn synthetic_default() -> Self {
        SplitSpec {
            n_initial: 10,
            n_validation: 50,
            n_pool: 500,
            n_test: 100,
        }
    }

    pub fn total(&self) -> usize {
        self.n_initial + self.n_validation + self.n_pool + self.n_test
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_initial == 0 {
            return Err(Error::parameter("initial labeled set must be nonempty"));
        }
        if self.n_test == 0 {
            return Err(Error::parameter("test set must be nonempty"));
        }
        Ok(())
    }
}

/// Feature z-scoring and label centering, fitted on `L0 ∪ V`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub x_mean: Array1<f64>,
    pub x_std: Array1<f64>,
    pub y_mean: f64,
}

impl Standardization {
    /// Fit from the rows/labels the learner starts with. Population (1/n)
    /// variance; a feature that is constant over the fitting rows keeps
    /// scale 1 so the transform stays invertible.
    pub fn fit(x: &Array2<f64>, y: ArrayView1<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::parameter(
                "standardization needs at least one fitting row",
            ));
        }
        let n = x.nrows() as f64;
        let x_mean = x.mean_axis(Axis(0)).expect("nonempty");
        let mut x_std = Array1::<f64>::zeros(x.ncols());
        for (j, col_std) in x_std.iter_mut().enumerate() {
            let var = x
                .column(j)
                .iter()
                .map(|v| (v - x_mean[j]) * (v - x_mean[j]))
                .sum::<f64>()
                / n;
            *col_std = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        let y_mean = y.sum() / y.len() as f64;
        Ok(Standardization {
            x_mean,
            x_std,
            y_mean,
        })
    }

    pub fn transform_x(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.x_mean) / &self.x_std
    }

    pub fn transform_x_row(&self, x: ArrayView1<f64>) -> Array1<f64> {
        (&x - &self.x_mean) / &self.x_std
    }

    pub fn transform_y(&self, y: ArrayView1<f64>) -> Array1<f64> {
        &y - self.y_mean
    }

    /// Map a centered-space prediction back to raw label units.
    pub fn untransform_y(&self, y_centered: f64) -> f64 {
        y_centered + self.y_mean
    }

    pub fn untransform_x_row(&self, z: ArrayView1<f64>) -> Array1<f64> {
        &z * &self.x_std + &self.x_mean
    }
}

/// A point just moved from the unlabeled pool to the labeled set.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquiredPoint {
    /// Row index into the original pool (stable across acquisitions).
    pub pool_row: usize,
    /// Standardized input.
    pub x: Array1<f64>,
    /// Centered label.
    pub y: f64,
}

/// The four data pools in standardized space.
///
/// `labeled_*` grow as points are acquired; the pool's features are public
/// for scoring but its labels are private and only escape one point at a
/// time through [`Self::acquire`].
#[derive(Debug, Clone)]
pub struct DataPools {
    pub labeled_x: Array2<f64>,
    pub labeled_y: Array1<f64>,
    pub val_x: Array2<f64>,
    pub val_y: Array1<f64>,
    pub test_x: Array2<f64>,
    pub test_y: Array1<f64>,
    pool_x: Array2<f64>,
    pool_y: Array1<f64>,
    /// Original pool rows not yet acquired, in ascending-row order initially
    /// and stable (remove-by-position) afterwards.
    live: Vec<usize>,
    standardization: Standardization,
}

impl DataPools {
    fn assemble(
        raw_x: Array2<f64>,
        raw_y: Array1<f64>,
        split: &SplitSpec,
    ) -> Result<Self> {
        split.validate()?;
        let (n0, nv, nu) = (split.n_initial, split.n_validation, split.n_pool);
        let take = |lo: usize, hi: usize| {
            (
                raw_x.slice(ndarray::s![lo..hi, ..]).to_owned(),
                raw_y.slice(ndarray::s![lo..hi]).to_owned(),
            )
        };
        let (l_x, l_y) = take(0, n0);
        let (v_x, v_y) = take(n0, n0 + nv);
        let (u_x, u_y) = take(n0 + nv, n0 + nv + nu);
        let (t_x, t_y) = take(n0 + nv + nu, split.total());

        // Fit the transform on the data whose labels are visible at t=0.
        let mut fit_x = l_x.clone();
        let mut fit_y = l_y.to_vec();
        for (row, &y) in v_x.rows().into_iter().zip(v_y.iter()) {
            fit_x.push_row(row).expect("matching width");
            fit_y.push(y);
        }
        let std = Standardization::fit(&fit_x, Array1::from(fit_y).view())?;

        Ok(DataPools {
            labeled_x: std.transform_x(&l_x),
            labeled_y: std.transform_y(l_y.view()),
            val_x: std.transform_x(&v_x),
            val_y: std.transform_y(v_y.view()),
            test_x: std.transform_x(&t_x),
            test_y: std.transform_y(t_y.view()),
            pool_x: std.transform_x(&u_x),
            pool_y: std.transform_y(u_y.view()),
            live: (0..nu).collect(),
            standardization: std,
        })
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    pub fn input_dim(&self) -> usize {
        self.labeled_x.ncols()
    }

    pub fn num_labeled(&self) -> usize {
        self.labeled_x.nrows()
    }

    pub fn num_unlabeled(&self) -> usize {
        self.live.len()
    }

    /// Original pool-row ids still unlabeled, in scoring order.
    pub fn live_indices(&self) -> &[usize] {
        &self.live
    }

    /// Features of the live pool, stacked in scoring order (one row per
    /// entry of [`Self::live_indices`]).
    pub fn unlabeled_x(&self) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((self.live.len(), self.pool_x.ncols()));
        for (i, &row) in self.live.iter().enumerate() {
            out.row_mut(i).assign(&self.pool_x.row(row));
        }
        out
    }

    /// Reveal the label of the live pool entry at `position` (an index into
    /// the scoring order, not an original row id) and move it to the
    /// labeled set.
    pub fn acquire(&mut self, position: usize) -> Result<AcquiredPoint> {
        if position >= self.live.len() {
            return Err(Error::parameter(format!(
                "pool position {position} out of range ({} live points)",
                self.live.len()
            )));
        }
        let pool_row = self.live.remove(position);
        let x = self.pool_x.row(pool_row).to_owned();
        let y = self.pool_y[pool_row];
        self.labeled_x.push_row(x.view()).expect("matching width");
        self.labeled_y
            .push(Axis(0), ndarray::arr0(y).view())
            .expect("scalar");
        Ok(AcquiredPoint { pool_row, x, y })
    }
}

/// Draw all four pools uniformly from the benchmark's box and label them
/// with noiseless function values. Deterministic in `seed`.
pub fn make_pools_synthetic(b: Benchmark, split: &SplitSpec, seed: u64) -> Result<DataPools> {
    split.validate()?;
    let total = split.total();
    let bounds = b.bounds();
    let d = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::<f64>::zeros((total, d));
    for mut row in x.rows_mut() {
        for (v, &(lo, hi)) in row.iter_mut().zip(bounds.iter()) {
            *v = rng.gen_range(lo..hi);
        }
    }
    let mut y = Array1::<f64>::zeros(total);
    for (i, row) in x.rows().into_iter().enumerate() {
        y[i] = b.evaluate(row)?;
    }
    // Independent uniform draws collide with probability zero; a collision
    // indicates an RNG or domain bug, so check rather than assume.
    for i in 0..total {
        for j in (i + 1)..total {
            let max_abs = x
                .row(i)
                .iter()
                .zip(x.row(j).iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if max_abs < 1e-12 {
                return Err(Error::numerical(format!(
                    "duplicate synthetic draw at rows {i} and {j}"
                )));
            }
        }
    }
    DataPools::assemble(x, y, split)
}

/// Split dataset rows into the four pools by a seeded shuffle.
pub fn make_pools_dataset(
    x: &Array2<f64>,
    y: ArrayView1<f64>,
    split: &SplitSpec,
    seed: u64,
) -> Result<DataPools> {
    split.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let total = split.total();
    if x.nrows() < total {
        return Err(Error::parameter(format!(
            "dataset has {} rows but the split needs {total}",
            x.nrows()
        )));
    }
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut sx = Array2::<f64>::zeros((total, x.ncols()));
    let mut sy = Array1::<f64>::zeros(total);
    for (i, &row) in order.iter().take(total).enumerate() {
        sx.row_mut(i).assign(&x.row(row));
        sy[i] = y[row];
    }
    DataPools::assemble(sx, sy, split)
}

/// A parsed CSV: features, targets, and the feature column names.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub features: Array2<f64>,
    pub targets: Array1<f64>,
    pub feature_names: Vec<String>,
}

/// Read a headed CSV and split out `target_column`. Every cell must be a
/// decimal float; failures report the 1-based data row and column name.
pub fn load_csv(path: &std::path::Path, target_column: &str) -> Result<RawDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("cannot open {}: {e}", path.display()),
            )),
            _ => Error::Parse {
                row: 0,
                column: String::new(),
                message: e.to_string(),
            },
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            column: String::new(),
            message: format!("bad header: {e}"),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| {
            Error::parameter(format!(
                "target column '{target_column}' not found; headers are {headers:?}"
            ))
        })?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if feature_names.is_empty() {
        return Err(Error::parameter(
            "CSV must have at least one feature column besides the target",
        ));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for (rec_idx, record) in reader.records().enumerate() {
        let row_no = rec_idx + 1; // 1-based data row, header excluded
        let record = record.map_err(|e| Error::Parse {
            row: row_no,
            column: String::new(),
            message: e.to_string(),
        })?;
        let mut feats = Vec::with_capacity(feature_names.len());
        for (col_idx, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row: row_no,
                column: headers[col_idx].clone(),
                message: format!("not a number: '{}'", cell.trim()),
            })?;
            if col_idx == target_idx {
                targets.push(value);
            } else {
                feats.push(value);
            }
        }
        rows.push(feats);
    }
    if rows.is_empty() {
        return Err(Error::parameter("CSV contains a header but no data rows"));
    }
    let mut features = Array2::<f64>::zeros((rows.len(), feature_names.len()));
    for (i, r) in rows.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            features[[i, j]] = v;
        }
    }
    Ok(RawDataset {
        features,
        targets: Array1::from(targets),
        feature_names,
    })
}
