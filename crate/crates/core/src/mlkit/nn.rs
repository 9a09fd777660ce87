//! Single-hidden-layer classifier trained with mini-batch gradient
//! descent, plus stratified cross-validation around it.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::metrics::{report_from_predictions, ClassReport};
use super::sampling::stratified_kfold;
use super::{ClassScheme, Dataset, MlError, Result};

/// Training hyperparameters. The defaults are the tuned operating point;
/// override them per experiment or through `grid_search`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            hidden: 128,
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 256,
            epochs: 50,
            seed: 0,
        }
    }
}

/// A trained classifier: two affine layers with a rectified-linear
/// hidden activation and softmax output, plus the normalization
/// statistics of its training split.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    /// input × hidden weights.
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// hidden × class weights.
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    /// Per-feature (mean, std) applied before the first layer.
    pub norm: Vec<(f64, f64)>,
    pub feature_names: Vec<String>,
    pub scheme: Option<ClassScheme>,
}

/// Gradient of the mean cross-entropy with respect to every parameter,
/// in the same shapes as the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradient {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl TrainedModel {
    /// All-zero weights: predicts the uniform distribution everywhere.
    pub fn new_zero(
        feature_names: Vec<String>,
        norm: Vec<(f64, f64)>,
        hidden: usize,
        n_classes: usize,
    ) -> TrainedModel {
        let d = feature_names.len();
        TrainedModel {
            w1: Array2::zeros((d, hidden)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((hidden, n_classes)),
            b2: Array1::zeros(n_classes),
            norm,
            feature_names,
            scheme: None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.w2.ncols()
    }

    fn normalize(&self, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if rows.ncols() != self.input_dim() {
            return Err(MlError::ShapeMismatch {
                expected: self.input_dim(),
                got: rows.ncols(),
            });
        }
        let mut z = rows.to_owned();
        for (c, &(mean, std)) in self.norm.iter().enumerate() {
            z.column_mut(c).mapv_inplace(|v| (v - mean) / std);
        }
        Ok(z)
    }

    /// Class probabilities for a batch of raw (unnormalized) rows.
    pub fn predict_proba(&self, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let x = self.normalize(rows)?;
        let (_, z2) = forward(&self.w1, &self.b1, &self.w2, &self.b2, &x);
        let lse = log_sum_exp_rows(&z2);
        let mut probs = z2;
        for (mut row, &l) in probs.rows_mut().into_iter().zip(lse.iter()) {
            row.mapv_inplace(|v| (v - l).exp());
        }
        Ok(probs)
    }

    /// Probability vector and argmax class for one raw feature row.
    /// Exact probability ties resolve to the lowest class index.
    pub fn predict_row(&self, row: &[f64]) -> Result<(Vec<f64>, usize)> {
        let x = ArrayView2::from_shape((1, row.len()), row)
            .map_err(|_| MlError::EmptyInput("empty feature row"))?;
        let probs = self.predict_proba(x)?;
        let probs = probs.row(0).to_vec();
        let mut best = 0;
        for (c, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = c;
            }
        }
        Ok((probs, best))
    }

    /// Argmax classes for a batch of raw rows.
    pub fn predict_batch(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let probs = self.predict_proba(rows)?;
        Ok(probs
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                for (c, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }

    /// Score this model on a dataset with matching features and classes.
    pub fn evaluate(&self, dataset: &Dataset) -> Result<ClassReport> {
        if dataset.feature_names != self.feature_names {
            return Err(MlError::BadParam(format!(
                "dataset features {:?} do not match model features {:?}",
                dataset.feature_names, self.feature_names
            )));
        }
        if dataset.n_classes != self.n_classes() {
            return Err(MlError::ShapeMismatch {
                expected: self.n_classes(),
                got: dataset.n_classes,
            });
        }
        let predicted = self.predict_batch(dataset.features.view())?;
        report_from_predictions(&dataset.labels, &predicted, self.n_classes())
    }
}

fn forward(
    w1: &Array2<f64>,
    b1: &Array1<f64>,
    w2: &Array2<f64>,
    b2: &Array1<f64>,
    x: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let z1 = x.dot(w1) + b1;
    let h = z1.mapv(|v| v.max(0.0));
    let z2 = h.dot(w2) + b2;
    (z1, z2)
}

fn log_sum_exp_rows(z: &Array2<f64>) -> Array1<f64> {
    z.rows()
        .into_iter()
        .map(|row| {
            let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            m + row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
        })
        .collect()
}

fn cross_entropy(z2: &Array2<f64>, lse: &Array1<f64>, y: &[usize]) -> f64 {
    let n = y.len() as f64;
    y.iter()
        .enumerate()
        .map(|(i, &label)| lse[i] - z2[[i, label]])
        .sum::<f64>()
        / n
}

fn check_batch(model: &TrainedModel, rows: ArrayView2<'_, f64>, y: &[usize]) -> Result<()> {
    if rows.nrows() != y.len() {
        return Err(MlError::ShapeMismatch {
            expected: rows.nrows(),
            got: y.len(),
        });
    }
    if rows.nrows() == 0 {
        return Err(MlError::EmptyInput("empty batch"));
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= model.n_classes()) {
        return Err(MlError::BadParam(format!(
            "label {bad} out of range for {} classes",
            model.n_classes()
        )));
    }
    Ok(())
}

/// Mean cross-entropy of the model on raw rows with the given labels.
pub fn batch_loss(model: &TrainedModel, rows: ArrayView2<'_, f64>, y: &[usize]) -> Result<f64> {
    check_batch(model, rows, y)?;
    let x = model.normalize(rows)?;
    let (_, z2) = forward(&model.w1, &model.b1, &model.w2, &model.b2, &x);
    let lse = log_sum_exp_rows(&z2);
    Ok(cross_entropy(&z2, &lse, y))
}

/// Analytic gradient of `batch_loss` with respect to every parameter.
pub fn batch_gradient(
    model: &TrainedModel,
    rows: ArrayView2<'_, f64>,
    y: &[usize],
) -> Result<ModelGradient> {
    check_batch(model, rows, y)?;
    let x = model.normalize(rows)?;
    let (_, grad) = loss_and_gradient(&model.w1, &model.b1, &model.w2, &model.b2, &x, y);
    Ok(grad)
}

/// Forward and backward pass over an already-normalized batch.
fn loss_and_gradient(
    w1: &Array2<f64>,
    b1: &Array1<f64>,
    w2: &Array2<f64>,
    b2: &Array1<f64>,
    x: &Array2<f64>,
    y: &[usize],
) -> (f64, ModelGradient) {
    let n = y.len() as f64;
    let (z1, z2) = forward(w1, b1, w2, b2, x);
    let lse = log_sum_exp_rows(&z2);
    let loss = cross_entropy(&z2, &lse, y);

    // d(loss)/d(z2) = (softmax − onehot) / n
    let mut dz2 = z2;
    for (i, mut row) in dz2.rows_mut().into_iter().enumerate() {
        let l = lse[i];
        row.mapv_inplace(|v| (v - l).exp());
        row[y[i]] -= 1.0;
        row.mapv_inplace(|v| v / n);
    }
    let h = z1.mapv(|v| v.max(0.0));
    let gw2 = h.t().dot(&dz2);
    let gb2 = dz2.sum_axis(Axis(0));
    let mut dz1 = dz2.dot(&w2.t());
    dz1.zip_mut_with(&z1, |d, &z| {
        if z <= 0.0 {
            *d = 0.0;
        }
    });
    let gw1 = x.t().dot(&dz1);
    let gb1 = dz1.sum_axis(Axis(0));
    (
        loss,
        ModelGradient {
            w1: gw1,
            b1: gb1,
            w2: gw2,
            b2: gb2,
        },
    )
}

fn gather_rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), x.ncols()));
    for (row, &i) in idx.iter().enumerate() {
        out.row_mut(row).assign(&x.row(i));
    }
    out
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect();
    Array2::from_shape_vec((rows, cols), data).expect("shape matches data length")
}

/// A trained model together with its final full-dataset training loss.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub final_loss: f64,
}

/// Train a classifier on the dataset. Normalization uses the dataset's
/// own statistics, so pass the training split only. Deterministic under
/// `params.seed`; non-finite loss aborts with a divergence error.
pub fn train(dataset: &Dataset, params: &TrainParams) -> Result<TrainOutcome> {
    if params.hidden == 0 || params.batch_size == 0 || params.epochs == 0 {
        return Err(MlError::BadParam(
            "hidden, batch_size and epochs must be positive".into(),
        ));
    }
    if !(params.learning_rate > 0.0) || !(0.0..1.0).contains(&params.momentum) {
        return Err(MlError::BadParam(
            "learning_rate must be > 0 and momentum in [0, 1)".into(),
        ));
    }
    if dataset.n_classes < 2 {
        return Err(MlError::BadParam("need at least two classes".into()));
    }
    let d = dataset.n_features();
    let h = params.hidden;
    let c = dataset.n_classes;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut w1 = normal_matrix(&mut rng, d, h, (2.0 / d as f64).sqrt());
    let mut b1 = Array1::zeros(h);
    let mut w2 = normal_matrix(&mut rng, h, c, (2.0 / h as f64).sqrt());
    let mut b2 = Array1::zeros(c);
    let mut vw1 = Array2::<f64>::zeros((d, h));
    let mut vb1 = Array1::<f64>::zeros(h);
    let mut vw2 = Array2::<f64>::zeros((h, c));
    let mut vb2 = Array1::<f64>::zeros(c);

    // Normalize once with the training statistics.
    let mut x = dataset.features.clone();
    for (col, &(mean, std)) in dataset.norm.iter().enumerate() {
        x.column_mut(col).mapv_inplace(|v| (v - mean) / std);
    }

    let mut order: Vec<usize> = (0..dataset.n_rows()).collect();
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size) {
            let xb = gather_rows(&x, batch);
            let yb: Vec<usize> = batch.iter().map(|&i| dataset.labels[i]).collect();
            let (loss, grad) = loss_and_gradient(&w1, &b1, &w2, &b2, &xb, &yb);
            if !loss.is_finite() {
                return Err(MlError::Divergence { epoch });
            }
            let lr = params.learning_rate;
            let mu = params.momentum;
            vw1.zip_mut_with(&grad.w1, |v, &g| *v = mu * *v - lr * g);
            vb1.zip_mut_with(&grad.b1, |v, &g| *v = mu * *v - lr * g);
            vw2.zip_mut_with(&grad.w2, |v, &g| *v = mu * *v - lr * g);
            vb2.zip_mut_with(&grad.b2, |v, &g| *v = mu * *v - lr * g);
            w1.zip_mut_with(&vw1, |w, &v| *w += v);
            b1.zip_mut_with(&vb1, |w, &v| *w += v);
            w2.zip_mut_with(&vw2, |w, &v| *w += v);
            b2.zip_mut_with(&vb2, |w, &v| *w += v);
        }
    }

    let (_, z2) = forward(&w1, &b1, &w2, &b2, &x);
    let lse = log_sum_exp_rows(&z2);
    let final_loss = cross_entropy(&z2, &lse, &dataset.labels);
    if !final_loss.is_finite() {
        return Err(MlError::Divergence {
            epoch: params.epochs,
        });
    }
    Ok(TrainOutcome {
        model: TrainedModel {
            w1,
            b1,
            w2,
            b2,
            norm: dataset.norm.clone(),
            feature_names: dataset.feature_names.clone(),
            scheme: dataset.scheme,
        },
        final_loss,
    })
}

/// Pooled results of a k-fold cross-validation.
#[derive(Debug, Clone)]
pub struct CvResult {
    /// Report over the per-fold confusion matrices summed together.
    pub report: ClassReport,
    pub fold_accuracies: Vec<f64>,
    pub fold_final_losses: Vec<f64>,
}

/// Stratified k-fold cross-validation: train on k−1 folds, score the
/// held-out fold, and pool the confusion matrices.
pub fn cross_validate(dataset: &Dataset, k: usize, params: &TrainParams) -> Result<CvResult> {
    let folds = stratified_kfold(&dataset.labels, dataset.n_classes, k, params.seed)?;
    let mut pooled = vec![vec![0usize; dataset.n_classes]; dataset.n_classes];
    let mut fold_accuracies = Vec::with_capacity(k);
    let mut fold_final_losses = Vec::with_capacity(k);
    for (f, fold) in folds.iter().enumerate() {
        let train_split = dataset.subset(&fold.train_idx)?;
        let fold_params = TrainParams {
            seed: params.seed.wrapping_add(f as u64 + 1),
            ..*params
        };
        let outcome = train(&train_split, &fold_params)?;
        fold_final_losses.push(outcome.final_loss);
        let test_rows = gather_rows(&dataset.features, &fold.test_idx);
        let test_labels: Vec<usize> = fold.test_idx.iter().map(|&i| dataset.labels[i]).collect();
        let predicted = outcome.model.predict_batch(test_rows.view())?;
        let mut correct = 0usize;
        for (&a, &p) in test_labels.iter().zip(&predicted) {
            pooled[a][p] += 1;
            correct += usize::from(a == p);
        }
        fold_accuracies.push(correct as f64 / test_labels.len() as f64);
    }
    Ok(CvResult {
        report: ClassReport::from_confusion(pooled)?,
        fold_accuracies,
        fold_final_losses,
    })
}

/// One evaluated grid-search point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub learning_rate: f64,
    pub hidden: usize,
    pub cv_accuracy: f64,
}

/// Exhaustive search over learning rate × hidden width, scored by k-fold
/// CV accuracy. Returns the winning parameters and every point tried.
pub fn grid_search(
    dataset: &Dataset,
    k: usize,
    learning_rates: &[f64],
    hiddens: &[usize],
    base: &TrainParams,
) -> Result<(TrainParams, Vec<GridPoint>)> {
    if learning_rates.is_empty() || hiddens.is_empty() {
        return Err(MlError::BadParam("empty grid".into()));
    }
    let mut points = Vec::new();
    let mut best: Option<(TrainParams, f64)> = None;
    for &lr in learning_rates {
        for &hidden in hiddens {
            let candidate = TrainParams {
                learning_rate: lr,
                hidden,
                ..*base
            };
            let cv = cross_validate(dataset, k, &candidate)?;
            points.push(GridPoint {
                learning_rate: lr,
                hidden,
                cv_accuracy: cv.report.accuracy,
            });
            if best.as_ref().is_none_or(|(_, acc)| cv.report.accuracy > *acc) {
                best = Some((candidate, cv.report.accuracy));
            }
        }
    }
    Ok((best.expect("non-empty grid").0, points))
}
