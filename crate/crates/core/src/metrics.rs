//! Achievable segmentation accuracy.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::image::LabelMap;

/// Reference segmentation: dense region ids, every region non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    regions: LabelMap,
    region_count: usize,
}

impl GroundTruth {
    /// Renumbers the regions of `map` densely, so gaps in the input ids are
    /// allowed.
    pub fn from_label_map(map: &LabelMap) -> Self {
        let regions = crate::state::relabel_dense(map);
        let region_count = regions.num_labels();
        GroundTruth {
            regions,
            region_count,
        }
    }

    pub fn new(width: usize, height: usize, regions: Vec<u32>) -> Result<Self> {
        Ok(GroundTruth::from_label_map(&LabelMap::new(
            width, height, regions,
        )?))
    }

    pub fn width(&self) -> usize {
        self.regions.width()
    }

    pub fn height(&self) -> usize {
        self.regions.height()
    }

    pub fn region_count(&self) -> usize {
        self.region_count
    }

    pub fn regions(&self) -> &LabelMap {
        &self.regions
    }
}

/// `(1/|I|) * sum_k max_g |S_k ∩ G_g|`.
pub fn asa(map: &LabelMap, gt: &GroundTruth) -> Result<f64> {
    if !map.same_shape(gt.width(), gt.height()) {
        return Err(Error::input(format!(
            "label map {}x{} does not match ground truth {}x{}",
            map.width(),
            map.height(),
            gt.width(),
            gt.height()
        )));
    }
    let mut overlap: HashMap<(u32, u32), usize> = HashMap::new();
    for (&s, &g) in map.labels().iter().zip(gt.regions().labels()) {
        *overlap.entry((s, g)).or_default() += 1;
    }
    let mut best: HashMap<u32, usize> = HashMap::new();
    for ((s, _), n) in overlap {
        let b = best.entry(s).or_default();
        *b = (*b).max(n);
    }
    let covered: usize = best.values().sum();
    Ok(covered as f64 / map.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halves() -> GroundTruth {
        GroundTruth::new(4, 4, (0..16).map(|i| u32::from(i % 4 >= 2)).collect()).unwrap()
    }

    #[test]
    fn perfect_and_single() {
        let gt = halves();
        assert_eq!(asa(gt.regions(), &gt).unwrap(), 1.0);
        assert_eq!(asa(&LabelMap::filled(4, 4, 0), &gt).unwrap(), 0.5);
    }

    #[test]
    fn one_pixel_off() {
        let gt = halves();
        let mut labels = gt.regions().labels().to_vec();
        labels[5] = 1;
        let map = LabelMap::new(4, 4, labels).unwrap();
        assert_eq!(asa(&map, &gt).unwrap(), 15.0 / 16.0);
    }

    #[test]
    fn dimension_mismatch() {
        let gt = halves();
        assert!(asa(&LabelMap::filled(2, 8, 0), &gt).is_err());
    }

    #[test]
    fn ground_truth_is_dense() {
        let gt = GroundTruth::new(3, 1, vec![7, 2, 7]).unwrap();
        assert_eq!(gt.region_count(), 2);
        assert_eq!(gt.regions().labels(), &[0, 1, 0]);
    }
}
