use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::error::{DataError, Result};

/// Construction parameters recorded next to a dataset so evaluation can
/// rebuild ground truth. Serialized as the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DatasetMeta {
    pub kind: String,
    pub samples: usize,
    pub attributes: usize,
    pub steps: usize,
    #[serde(default)]
    pub attribute_names: Vec<String>,
    #[serde(default)]
    pub has_labels: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_per_class: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_means: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_amplitude: Option<f64>,
}

impl DatasetMeta {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| DataError::Meta(e.to_string()))
    }
}

/// `N` samples × `|A|` attributes × `T` time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    data: Array3<f64>,
    labels: Option<Vec<usize>>,
    attribute_names: Vec<String>,
    meta: Option<DatasetMeta>,
}

impl TimeSeriesDataset {
    pub fn new(data: Array3<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        let (n, a, t) = data.dim();
        if n == 0 || a == 0 || t == 0 {
            return Err(DataError::Argument(format!("dataset dims must be positive, got {n}×{a}×{t}")));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(DataError::Argument("dataset contains non-finite values".into()));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(DataError::Argument(format!("{} labels for {n} samples", l.len())));
            }
        }
        let attribute_names = (0..a).map(|i| format!("attr{i}")).collect();
        Ok(Self { data, labels, attribute_names, meta: None })
    }

    pub fn with_attribute_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_attributes() {
            return Err(DataError::Argument("attribute name count mismatch".into()));
        }
        self.attribute_names = names;
        Ok(self)
    }

    pub fn with_meta(mut self, meta: DatasetMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn n_samples(&self) -> usize {
        self.data.dim().0
    }

    pub fn n_attributes(&self) -> usize {
        self.data.dim().1
    }

    pub fn steps(&self) -> usize {
        self.data.dim().2
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn meta(&self) -> Option<&DatasetMeta> {
        self.meta.as_ref()
    }

    /// Known sine frequencies, when the dataset was synthesized.
    pub fn frequencies(&self) -> Option<&[f64]> {
        self.meta.as_ref().and_then(|m| m.frequencies.as_deref())
    }

    /// `|A| × T` view of one sample.
    pub fn sample(&self, index: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(Axis(0), index)
    }

    /// Sample flattened attribute-major into a vector of length `|A|·T`.
    pub fn flat_sample(&self, index: usize) -> Vec<f64> {
        self.sample(index).iter().copied().collect()
    }

    /// `N × (|A|·T)` matrix of flattened samples.
    pub fn flattened(&self) -> Array2<f64> {
        let (n, a, t) = self.data.dim();
        self.data
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((n, a * t))
            .expect("contiguous reshape")
    }

    /// `N × T` matrix holding attribute `attr` of every sample.
    pub fn attribute(&self, attr: usize) -> Array2<f64> {
        self.data.slice(s![.., attr, ..]).to_owned()
    }

    /// Subset (in the given order) keeping labels and metadata.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(DataError::Argument("empty selection".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_samples()) {
            return Err(DataError::Argument(format!("index {bad} out of range")));
        }
        let data = self.data.select(Axis(0), indices);
        let labels = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        let mut out = Self::new(data, labels)?.with_attribute_names(self.attribute_names.clone())?;
        out.meta = self.meta.clone().map(|mut m| {
            m.samples = indices.len();
            m
        });
        Ok(out)
    }

    /// Dataset with sample `index` removed (the leave-one-out world).
    pub fn without(&self, index: usize) -> Result<Self> {
        let keep: Vec<usize> = (0..self.n_samples()).filter(|&i| i != index).collect();
        if keep.len() == self.n_samples() {
            return Err(DataError::Argument(format!("index {index} out of range")));
        }
        self.select(&keep)
    }

    /// Same shape, labels and metadata; new values.
    pub fn with_values(&self, data: Array3<f64>) -> Result<Self> {
        if data.dim() != self.data.dim() {
            return Err(DataError::Argument("value shape mismatch".into()));
        }
        let mut out = Self::new(data, self.labels.clone())?.with_attribute_names(self.attribute_names.clone())?;
        out.meta = self.meta.clone();
        Ok(out)
    }

    /// Metadata describing this dataset, synthesizing a minimal record when
    /// none was attached.
    pub fn describe(&self) -> DatasetMeta {
        let mut meta = self.meta.clone().unwrap_or_else(|| DatasetMeta { kind: "external".into(), ..Default::default() });
        meta.samples = self.n_samples();
        meta.attributes = self.n_attributes();
        meta.steps = self.steps();
        meta.attribute_names = self.attribute_names.clone();
        meta.has_labels = self.labels.is_some();
        meta
    }
}
