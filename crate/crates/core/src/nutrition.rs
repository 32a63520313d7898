//! Volume to food energy conversion through per-category kcal/mL factors.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::Manifest;
use crate::eval::{aligned_volumes, MetricsReport, Prediction};
use crate::{Error, Result};

pub const FALLBACK_KEY: &str = "_fallback";

/// Illustrative factors (density times energy density) for the synthetic
/// category names. Not taken from any nutrient database.
pub const SAMPLE_TABLE_JSON: &str = include_str!("../data/density_sample.json");

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DensityTable {
    pub entries: BTreeMap<String, f64>,
    pub fallback: Option<f64>,
}

fn check_factor(key: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Schema { field: key.to_string(), msg: format!("factor must be positive, got {v}") });
    }
    Ok(())
}

impl DensityTable {
    pub fn new(entries: BTreeMap<String, f64>, fallback: Option<f64>) -> Result<Self> {
        let table = Self { entries, fallback };
        table.validate()?;
        Ok(table)
    }

    pub fn sample() -> Self {
        parse_density_table(SAMPLE_TABLE_JSON).expect("bundled table is valid")
    }

    pub fn validate(&self) -> Result<()> {
        for (k, &v) in &self.entries {
            check_factor(k, v)?;
        }
        if let Some(v) = self.fallback {
            check_factor(FALLBACK_KEY, v)?;
        }
        Ok(())
    }

    pub fn factor(&self, category: &str) -> Result<f64> {
        match (self.entries.get(category), self.fallback) {
            (Some(&f), _) => Ok(f),
            (None, Some(f)) => {
                log::warn!("category {category:?} not in density table; using fallback {f}");
                Ok(f)
            }
            (None, None) => Err(Error::domain(format!("category {category:?} not in density table and no fallback"))),
        }
    }
}

impl Serialize for DensityTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.entries.len() + self.fallback.is_some() as usize))?;
        for (k, v) in &self.entries {
            map.serialize_entry(k, v)?;
        }
        if let Some(f) = self.fallback {
            map.serialize_entry(FALLBACK_KEY, &f)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for DensityTable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct TableVisitor;

        impl<'de> Visitor<'de> for TableVisitor {
            type Value = DensityTable;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping category names to kcal per mL")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<DensityTable, A::Error> {
                let mut table = DensityTable::default();
                while let Some((key, value)) = map.next_entry::<String, f64>()? {
                    let dup = if key == FALLBACK_KEY {
                        table.fallback.replace(value).is_some()
                    } else {
                        table.entries.insert(key.clone(), value).is_some()
                    };
                    if dup {
                        return Err(de::Error::custom(format!("duplicate key {key:?}")));
                    }
                }
                table.validate().map_err(de::Error::custom)?;
                Ok(table)
            }
        }

        d.deserialize_map(TableVisitor)
    }
}

pub fn parse_density_table(text: &str) -> Result<DensityTable> {
    serde_json::from_str(text).map_err(|e| Error::Schema { field: "density table".into(), msg: e.to_string() })
}

pub fn load_density_table(path: impl AsRef<Path>) -> Result<DensityTable> {
    let path = path.as_ref();
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(format!("reading density table {}", path.display()), e))?;
    parse_density_table(&text)
}

pub fn save_density_table(table: &DensityTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, serde_json::to_string_pretty(table)? + "\n")
        .map_err(|e| Error::io(format!("writing density table {}", path.display()), e))
}

pub fn energy(volume_ml: f64, category: &str, table: &DensityTable) -> Result<f64> {
    if !(volume_ml >= 0.0) {
        return Err(Error::domain(format!("volume must be non-negative, got {volume_ml}")));
    }
    Ok(volume_ml * table.factor(category)?)
}

/// Energy MAE/MAPE (and the other metrics) over the predicted items. Ground
/// truth energy comes from `gt_energy` when present for an item, otherwise it
/// is derived from the ground-truth volume with the same table.
pub fn energy_report(
    predictions: &[Prediction],
    manifest: &Manifest,
    table: &DensityTable,
    gt_energy: Option<&BTreeMap<String, f64>>,
    method: &str,
) -> Result<MetricsReport> {
    let ids: Vec<String> = predictions.iter().map(|p| p.item_id.clone()).collect();
    let (est_vol, gt_vol, categories) = aligned_volumes(predictions, manifest, &ids)?;
    let mut est = Vec::with_capacity(ids.len());
    let mut gt = Vec::with_capacity(ids.len());
    for i in 0..ids.len() {
        est.push(energy(est_vol[i], &categories[i], table)?);
        let g = match gt_energy.and_then(|m| m.get(&ids[i])) {
            Some(&g) => g,
            None => energy(gt_vol[i], &categories[i], table)
                .map_err(|e| Error::domain(format!("no ground-truth energy for {}: {e}", ids[i])))?,
        };
        gt.push(g);
    }
    MetricsReport::compute(method, &manifest.dataset_name, &est, &gt)
}
