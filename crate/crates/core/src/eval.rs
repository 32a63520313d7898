//! Volume recovery and the five regression metrics (MAE, MAPE, Pearson r,
//! R², cosine similarity), plus the dataset-mean and category-mean baselines.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{ItemRecord, Manifest};
use crate::geometry::MIN_VOLUME_ML;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub item_id: String,
    pub v_scale_hat: f64,
    pub est_volume_ml: f64,
    /// Rendered views averaged; 0 for predictors that use no renders.
    pub m_views_used: usize,
}

impl Prediction {
    pub fn new(item: &ItemRecord, v_scale_hat: f64, m_views_used: usize) -> Result<Self> {
        Ok(Self {
            item_id: item.item_id.clone(),
            v_scale_hat,
            est_volume_ml: volume_from_scale(v_scale_hat, item.recon_volume_ml)?,
            m_views_used,
        })
    }
}

pub fn save_predictions(preds: &[Prediction], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, serde_json::to_string_pretty(preds)? + "\n")
        .map_err(|e| Error::io(format!("writing predictions {}", path.display()), e))
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading predictions {}", path.display()), e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Estimated volume `v̂ · |V_recon|`.
pub fn volume_from_scale(v_scale_hat: f64, recon_volume_ml: f64) -> Result<f64> {
    if !(recon_volume_ml.abs() >= MIN_VOLUME_ML) {
        return Err(Error::domain(format!("reconstruction volume {recon_volume_ml:e} is degenerate")));
    }
    Ok(v_scale_hat * recon_volume_ml.abs())
}

fn check_pair(est: &[f64], gt: &[f64]) -> Result<()> {
    if est.len() != gt.len() {
        return Err(Error::Dimension { expected: gt.len(), got: est.len() });
    }
    if est.is_empty() {
        return Err(Error::domain("metrics need at least one value"));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn mae(est: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(est, gt)?;
    Ok(est.iter().zip(gt).map(|(e, g)| (e - g).abs()).sum::<f64>() / gt.len() as f64)
}

/// Mean absolute percentage error, in percent.
pub fn mape(est: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(est, gt)?;
    if let Some(g) = gt.iter().find(|g| !(**g > 0.0)) {
        return Err(Error::domain(format!("MAPE needs strictly positive ground truth, got {g}")));
    }
    Ok(100.0 * est.iter().zip(gt).map(|(e, g)| (e - g).abs() / g).sum::<f64>() / gt.len() as f64)
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(est: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(est, gt)?;
    let (me, mg) = (mean(est), mean(gt));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (e, g) in est.iter().zip(gt) {
        let (de, dg) = (e - me, g - mg);
        sxy += de * dg;
        sxx += de * de;
        syy += dg * dg;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// `1 - SS_res / SS_tot` with `SS_tot` over the ground truth. A constant
/// ground truth gives 1 for an exact fit and 0 otherwise.
pub fn r_squared(est: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(est, gt)?;
    let mg = mean(gt);
    let ss_res: f64 = est.iter().zip(gt).map(|(e, g)| (g - e).powi(2)).sum();
    let ss_tot: f64 = gt.iter().map(|g| (g - mg).powi(2)).sum();
    if ss_tot == 0.0 {
        return Ok(if ss_res == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(1.0 - ss_res / ss_tot)
}

pub fn cosine(est: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(est, gt)?;
    let dot: f64 = est.iter().zip(gt).map(|(e, g)| e * g).sum();
    let ne = est.iter().map(|e| e * e).sum::<f64>().sqrt();
    let ng = gt.iter().map(|g| g * g).sum::<f64>().sqrt();
    if ne == 0.0 || ng == 0.0 {
        return Err(Error::domain("cosine similarity of a zero vector"));
    }
    Ok((dot / (ne * ng)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub dataset: String,
    pub n: usize,
    pub mae_ml: f64,
    pub mape_pct: f64,
    pub pearson_r: f64,
    pub r2: f64,
    pub cosine: f64,
}

impl MetricsReport {
    pub fn compute(method: &str, dataset: &str, est: &[f64], gt: &[f64]) -> Result<Self> {
        Ok(Self {
            method: method.to_string(),
            dataset: dataset.to_string(),
            n: gt.len(),
            mae_ml: mae(est, gt)?,
            mape_pct: mape(est, gt)?,
            pearson_r: pearson(est, gt)?,
            r2: r_squared(est, gt)?,
            cosine: cosine(est, gt)?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")
            .map_err(|e| Error::io(format!("writing report {}", path.display()), e))
    }
}

/// Ground-truth and estimated volumes for `ids`, in that order.
pub(crate) fn aligned_volumes(
    predictions: &[Prediction],
    manifest: &Manifest,
    ids: &[String],
) -> Result<(Vec<f64>, Vec<f64>, Vec<String>)> {
    let by_id: HashMap<&str, &Prediction> = predictions.iter().map(|p| (p.item_id.as_str(), p)).collect();
    let items = manifest.index();
    let missing: Vec<&str> = ids.iter().map(String::as_str).filter(|id| !by_id.contains_key(id)).collect();
    if !missing.is_empty() {
        return Err(Error::domain(format!(
            "missing predictions for {} item(s): {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    let mut est = Vec::with_capacity(ids.len());
    let mut gt = Vec::with_capacity(ids.len());
    let mut categories = Vec::with_capacity(ids.len());
    for id in ids {
        let item = items.get(id.as_str()).ok_or_else(|| Error::domain(format!("item {id} is not in the manifest")))?;
        est.push(by_id[id.as_str()].est_volume_ml);
        gt.push(item.gt_volume_ml);
        categories.push(item.category.clone());
    }
    Ok((est, gt, categories))
}

pub fn evaluate(
    predictions: &[Prediction],
    manifest: &Manifest,
    test_ids: &[String],
    method: &str,
) -> Result<MetricsReport> {
    let (est, gt, _) = aligned_volumes(predictions, manifest, test_ids)?;
    MetricsReport::compute(method, &manifest.dataset_name, &est, &gt)
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn least_squares_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    check_pair(y, x)?;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("least squares fit needs varying x"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// CSV `item_id,gt_ml,est_ml`, one row per prediction, followed by a
/// `# fit:` comment with the least-squares line of estimate on ground truth.
pub fn scatter_csv(predictions: &[Prediction], manifest: &Manifest) -> Result<String> {
    let ids: Vec<String> = predictions.iter().map(|p| p.item_id.clone()).collect();
    let (est, gt, _) = aligned_volumes(predictions, manifest, &ids)?;
    let mut out = String::from("item_id,gt_ml,est_ml\n");
    for ((id, g), e) in ids.iter().zip(&gt).zip(&est) {
        let _ = writeln!(out, "{id},{g},{e}");
    }
    match least_squares_fit(&gt, &est) {
        Ok((slope, intercept)) => {
            let _ = writeln!(out, "# fit: slope={slope}, intercept={intercept}");
        }
        Err(_) => out.push_str("# fit: undefined\n"),
    }
    Ok(out)
}

pub fn export_scatter(predictions: &[Prediction], manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, scatter_csv(predictions, manifest)?)
        .map_err(|e| Error::io(format!("writing scatter {}", path.display()), e))
}

/// Mean of the training ground-truth volumes.
pub fn baseline_mean(train_gt: &[f64]) -> Result<f64> {
    if train_gt.is_empty() {
        return Err(Error::domain("dataset-mean baseline needs training items"));
    }
    Ok(mean(train_gt))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryMeanBaseline {
    pub means: BTreeMap<String, f64>,
    pub dataset_mean: f64,
}

impl CategoryMeanBaseline {
    pub fn predict(&self, category: &str) -> f64 {
        match self.means.get(category) {
            Some(&m) => m,
            None => {
                log::warn!("category {category:?} unseen in training; using dataset mean");
                self.dataset_mean
            }
        }
    }
}

pub fn baseline_category_mean(train_items: &[&ItemRecord]) -> Result<CategoryMeanBaseline> {
    let dataset_mean = baseline_mean(&train_items.iter().map(|it| it.gt_volume_ml).collect::<Vec<_>>())?;
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for it in train_items {
        let e = acc.entry(it.category.clone()).or_insert((0.0, 0));
        e.0 += it.gt_volume_ml;
        e.1 += 1;
    }
    Ok(CategoryMeanBaseline { means: acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(), dataset_mean })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    DatasetMean,
    CategoryMean,
}

impl BaselineMethod {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMethod::DatasetMean => "dataset-mean",
            BaselineMethod::CategoryMean => "category-mean",
        }
    }
}

/// Baseline volume predictions for `test_ids`, fitted on `train_ids`. The
/// implied scale factor is stored so the records satisfy the usual
/// prediction invariant.
pub fn baseline_predictions(
    manifest: &Manifest,
    train_ids: &[String],
    test_ids: &[String],
    method: BaselineMethod,
) -> Result<Vec<Prediction>> {
    let items = manifest.index();
    let lookup = |id: &String| {
        items.get(id.as_str()).copied().ok_or_else(|| Error::domain(format!("item {id} is not in the manifest")))
    };
    let train: Vec<&ItemRecord> = train_ids.iter().map(lookup).collect::<Result<_>>()?;
    let category = baseline_category_mean(&train)?;
    test_ids
        .iter()
        .map(|id| {
            let item = lookup(id)?;
            let volume = match method {
                BaselineMethod::DatasetMean => category.dataset_mean,
                BaselineMethod::CategoryMean => category.predict(&item.category),
            };
            let recon = item.recon_volume_ml.abs();
            if !(recon >= MIN_VOLUME_ML) {
                return Err(Error::domain(format!("item {id} has a degenerate reconstruction volume")));
            }
            Ok(Prediction { item_id: id.clone(), v_scale_hat: volume / recon, est_volume_ml: volume, m_views_used: 0 })
        })
        .collect()
}
