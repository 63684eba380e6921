use ndarray::{concatenate, Array3, Axis};
use rand::seq::index;
use rand::Rng;

use super::dataset::TimeSeriesDataset;
use super::error::{DataError, Result};

/// Attribute lists per party; must partition `0..|A|`.
pub type Assignment = Vec<Vec<usize>>;

/// One party's private columns. Sample order is shared by every party.
#[derive(Debug, Clone, PartialEq)]
pub struct PartyView {
    pub party_id: usize,
    /// Global attribute indices held by this party, in local column order.
    pub attributes: Vec<usize>,
    /// `N × |A_i| × T`.
    pub data: Array3<f64>,
}

impl PartyView {
    pub fn n_samples(&self) -> usize {
        self.data.dim().0
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn steps(&self) -> usize {
        self.data.dim().2
    }
}

/// Checks that `assignment` partitions `0..n_attributes`.
pub fn validate_assignment(assignment: &[Vec<usize>], n_attributes: usize) -> Result<()> {
    if assignment.is_empty() {
        return Err(DataError::Partition("no parties".into()));
    }
    let mut owner = vec![None; n_attributes];
    for (p, attrs) in assignment.iter().enumerate() {
        if attrs.is_empty() {
            return Err(DataError::Partition(format!("party {p} holds no attributes")));
        }
        for &a in attrs {
            match owner.get_mut(a) {
                None => return Err(DataError::Partition(format!("attribute {a} out of range"))),
                Some(Some(q)) => return Err(DataError::Partition(format!("attribute {a} held by parties {q} and {p}"))),
                Some(slot) => *slot = Some(p),
            }
        }
    }
    if let Some(missing) = owner.iter().position(Option::is_none) {
        return Err(DataError::Partition(format!("attribute {missing} assigned to no party")));
    }
    Ok(())
}

pub fn partition(dataset: &TimeSeriesDataset, assignment: &[Vec<usize>]) -> Result<Vec<PartyView>> {
    validate_assignment(assignment, dataset.n_attributes())?;
    Ok(assignment
        .iter()
        .enumerate()
        .map(|(party_id, attrs)| PartyView {
            party_id,
            attributes: attrs.clone(),
            data: dataset.data().select(Axis(1), attrs),
        })
        .collect())
}

/// One attribute per party.
pub fn one_per_party(n_attributes: usize) -> Assignment {
    (0..n_attributes).map(|a| vec![a]).collect()
}

/// Contiguous, near-equal blocks of attributes across `parties`.
pub fn even_split(n_attributes: usize, parties: usize) -> Assignment {
    let parties = parties.clamp(1, n_attributes.max(1));
    let base = n_attributes / parties;
    let extra = n_attributes % parties;
    let mut next = 0;
    (0..parties)
        .map(|p| {
            let len = base + usize::from(p < extra);
            let block = (next..next + len).collect();
            next += len;
            block
        })
        .collect()
}

/// Reassembles the full `N × |A| × T` array, in global attribute order.
pub fn merge_views(views: &[PartyView]) -> Result<Array3<f64>> {
    let n_attr: usize = views.iter().map(PartyView::n_attributes).sum();
    let assignment: Vec<Vec<usize>> = views.iter().map(|v| v.attributes.clone()).collect();
    validate_assignment(&assignment, n_attr)?;
    let n = views[0].n_samples();
    if views.iter().any(|v| v.n_samples() != n || v.steps() != views[0].steps()) {
        return Err(DataError::Partition("party views are not aligned".into()));
    }
    let stacked = concatenate(Axis(1), &views.iter().map(|v| v.data.view()).collect::<Vec<_>>())
        .map_err(|e| DataError::Partition(e.to_string()))?;
    let mut order: Vec<(usize, usize)> = assignment.iter().flatten().copied().enumerate().map(|(col, g)| (g, col)).collect();
    order.sort_unstable();
    let cols: Vec<usize> = order.into_iter().map(|(_, col)| col).collect();
    Ok(stacked.select(Axis(1), &cols))
}

/// Indices of one aligned mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    pub indices: Vec<usize>,
    /// `γ = B / N`, the rate the accountant amplifies with.
    pub sampling_rate: f64,
}

/// Uniform sample of `batch` distinct indices out of `n_total`.
pub fn subsample_batch<R: Rng + ?Sized>(n_total: usize, batch: usize, rng: &mut R) -> Result<MiniBatch> {
    if batch == 0 || batch > n_total {
        return Err(DataError::Argument(format!("batch size {batch} not in 1..={n_total}")));
    }
    Ok(MiniBatch {
        indices: index::sample(rng, n_total, batch).into_vec(),
        sampling_rate: batch as f64 / n_total as f64,
    })
}
