//! Unsupervised material segmentation via the cluster probe.
//!
//! Each rendered spectrum is scored against the endmember dictionary by
//! softmaxed cosine similarity and assigned to the best cluster; pixels
//! below an opacity threshold become background. Scoring against ground
//! truth uses Hungarian matching of predicted clusters to labeled classes
//! maximizing total IoU.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::assign;
use crate::camera::Camera;
use crate::exec::Executor;
use crate::field::VoxelField;
use crate::numeric;
use crate::render::{render_image};
use crate::spectral::{CameraResponse, EndmemberDictionary, Spectrum};
use crate::{Error, Result};

/// Background/empty label.
pub const SENTINEL: u16 = u16::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u16>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Invalid {
                context: "label map",
                detail: format!("{} labels for {width}x{height}", labels.len()),
            });
        }
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, label: u16) -> Self {
        LabelMap {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: u16) {
        self.labels[y * self.width + x] = label;
    }
}

/// Softmaxed cosine similarity of a spectrum against every endmember.
pub fn cluster_probe(c: &Spectrum, e: &EndmemberDictionary) -> Result<Vec<f64>> {
    if c.bands() != e.band_count() {
        return Err(Error::BandMismatch {
            context: "cluster_probe",
            expected: e.band_count(),
            actual: c.bands(),
        });
    }
    let cn = numeric::norm(c.values());
    if cn == 0.0 {
        return Err(Error::Invalid {
            context: "cluster_probe",
            detail: String::from("spectrum has zero norm; mask empty pixels by opacity first"),
        });
    }
    let k = e.endmember_count();
    let mut cosines = Vec::with_capacity(k);
    for kk in 0..k {
        let col = e.column(kk);
        let en = numeric::norm(col);
        if en == 0.0 {
            return Err(Error::Invalid {
                context: "cluster_probe",
                detail: format!("endmember {kk} has zero norm"),
            });
        }
        cosines.push(numeric::dot(col, c.values()) / (en * cn));
    }
    // Softmax with temperature 1 over cosines in [-1, 1].
    let max = cosines.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut sum = 0.0;
    let mut p: Vec<f64> = cosines
        .iter()
        .map(|&v| {
            let e = numeric::exp(v - max);
            sum += e;
            e
        })
        .collect();
    for v in p.iter_mut() {
        *v /= sum;
    }
    Ok(p)
}

/// Cluster-probe label of one spectrum.
pub fn probe_label(c: &Spectrum, e: &EndmemberDictionary) -> Result<u16> {
    let p = cluster_probe(c, e)?;
    let mut best = 0usize;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    Ok(best as u16)
}

/// Renders the view and labels every pixel. Pixels with opacity below the
/// threshold get `SENTINEL`. With `use_abundance` the label is the argmax
/// of the rendered abundance vector instead of the radiance probe.
#[allow(clippy::too_many_arguments)]
pub fn segment_image<E: Executor>(
    field: &VoxelField,
    response: &CameraResponse,
    cam: &Camera,
    near: f64,
    far: f64,
    n_samples: usize,
    opacity_threshold: f64,
    use_abundance: bool,
    exec: &E,
) -> Result<LabelMap> {
    let img = render_image(field, response, cam, near, far, n_samples, exec)?;
    let dict = field.endmembers();
    let k = field.endmember_count();
    let mut labels = vec![SENTINEL; cam.width * cam.height];
    for (i, label) in labels.iter_mut().enumerate() {
        if (img.opacity[i] as f64) < opacity_threshold {
            continue;
        }
        if use_abundance {
            let a = &img.abundance[i * k..(i + 1) * k];
            let mut best = 0usize;
            for (kk, &v) in a.iter().enumerate() {
                if v > a[best] {
                    best = kk;
                }
            }
            *label = best as u16;
        } else {
            let x = i % cam.width;
            let y = i / cam.width;
            let spec = Spectrum::new(img.spectral.pixel_spectrum(x, y))?;
            *label = probe_label(&spec, &dict)?;
        }
    }
    LabelMap::new(cam.width, cam.height, labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassScore {
    pub gt_class: u16,
    pub matched_pred: Option<u16>,
    pub iou: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationScore {
    pub miou: f64,
    pub f1: f64,
    pub per_class: Vec<ClassScore>,
}

/// Hungarian-matched segmentation scoring.
///
/// Pixels whose ground-truth label is `SENTINEL` are excluded. Predicted
/// clusters are matched one-to-one to ground-truth classes maximizing total
/// IoU; the report is the mean IoU and macro F1 over ground-truth classes
/// (unmatched classes score zero).
pub fn score_segmentation(pred: &LabelMap, gt: &LabelMap) -> Result<SegmentationScore> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(Error::Invalid {
            context: "score_segmentation",
            detail: format!(
                "dimension mismatch: {}x{} vs {}x{}",
                pred.width, pred.height, gt.width, gt.height
            ),
        });
    }
    let mut gt_classes: Vec<u16> = Vec::new();
    let mut pred_classes: Vec<u16> = Vec::new();
    let mut scored = 0usize;
    for i in 0..gt.labels.len() {
        let g = gt.labels[i];
        if g == SENTINEL {
            continue;
        }
        scored += 1;
        if !gt_classes.contains(&g) {
            gt_classes.push(g);
        }
        let p = pred.labels[i];
        if p != SENTINEL && !pred_classes.contains(&p) {
            pred_classes.push(p);
        }
    }
    if scored == 0 {
        return Err(Error::Invalid {
            context: "score_segmentation",
            detail: String::from("no pixels to score (all ground truth is background)"),
        });
    }
    gt_classes.sort_unstable();
    pred_classes.sort_unstable();

    // Contingency counts over the scored region.
    let ng = gt_classes.len();
    let np = pred_classes.len();
    let mut inter = vec![0usize; np * ng];
    let mut pred_size = vec![0usize; np];
    let mut gt_size = vec![0usize; ng];
    for i in 0..gt.labels.len() {
        let g = gt.labels[i];
        if g == SENTINEL {
            continue;
        }
        let gi = gt_classes.binary_search(&g).unwrap();
        gt_size[gi] += 1;
        let p = pred.labels[i];
        if p == SENTINEL {
            continue;
        }
        let pi = pred_classes.binary_search(&p).unwrap();
        pred_size[pi] += 1;
        inter[pi * ng + gi] += 1;
    }

    let iou = |pi: usize, gi: usize| -> f64 {
        let i = inter[pi * ng + gi];
        let u = pred_size[pi] + gt_size[gi] - i;
        if u == 0 {
            0.0
        } else {
            i as f64 / u as f64
        }
    };

    // Maximize total IoU = minimize (1 - IoU).
    let mut cost = vec![0.0; np * ng];
    for pi in 0..np {
        for gi in 0..ng {
            cost[pi * ng + gi] = 1.0 - iou(pi, gi);
        }
    }
    let matching = assign::solve(&cost, np, ng);
    let mut matched_pred_for_gt: Vec<Option<usize>> = vec![None; ng];
    for (pi, gi) in matching.pairs() {
        matched_pred_for_gt[gi] = Some(pi);
    }

    let mut per_class = Vec::with_capacity(ng);
    let mut miou_acc = 0.0;
    let mut f1_acc = 0.0;
    for gi in 0..ng {
        let (matched, iou_v, f1_v) = match matched_pred_for_gt[gi] {
            Some(pi) => {
                let i = inter[pi * ng + gi];
                let f1 = if pred_size[pi] + gt_size[gi] == 0 {
                    0.0
                } else {
                    2.0 * i as f64 / (pred_size[pi] + gt_size[gi]) as f64
                };
                (Some(pred_classes[pi]), iou(pi, gi), f1)
            }
            None => (None, 0.0, 0.0),
        };
        miou_acc += iou_v;
        f1_acc += f1_v;
        per_class.push(ClassScore {
            gt_class: gt_classes[gi],
            matched_pred: matched,
            iou: iou_v,
            f1: f1_v,
        });
    }
    Ok(SegmentationScore {
        miou: miou_acc / ng as f64,
        f1: f1_acc / ng as f64,
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn dict() -> EndmemberDictionary {
        EndmemberDictionary::from_columns(&[
            vec![0.9, 0.1, 0.05],
            vec![0.1, 0.85, 0.2],
            vec![0.05, 0.15, 0.8],
        ])
        .unwrap()
    }

    #[test]
    fn probe_prefers_matching_endmember() {
        let e = dict();
        for k in 0..3 {
            let c = Spectrum::new(e.column(k).to_vec()).unwrap();
            let p = cluster_probe(&c, &e).unwrap();
            let argmax = p
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, k);
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn probe_orthogonal_closed_form() {
        let e = EndmemberDictionary::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let c = Spectrum::new(vec![1.0, 0.0]).unwrap();
        let p = cluster_probe(&c, &e).unwrap();
        let expect0 = core::f64::consts::E / (core::f64::consts::E + 1.0);
        assert!((p[0] - expect0).abs() < 1e-12);
        assert!((p[1] - (1.0 - expect0)).abs() < 1e-12);
    }

    #[test]
    fn probe_is_scale_invariant() {
        let e = dict();
        let c = Spectrum::new(vec![0.4, 0.3, 0.2]).unwrap();
        let scaled = Spectrum::new(vec![0.4 * 7.0, 0.3 * 7.0, 0.2 * 7.0]).unwrap();
        let p1 = cluster_probe(&c, &e).unwrap();
        let p2 = cluster_probe(&scaled, &e).unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-9);
        }
        // Scaling an endmember is equally irrelevant.
        let mut cols: Vec<Vec<f64>> = (0..3).map(|k| e.column(k).to_vec()).collect();
        for v in cols[1].iter_mut() {
            *v *= 0.25;
        }
        let e2 = EndmemberDictionary::from_columns(&cols).unwrap();
        let p3 = cluster_probe(&c, &e2).unwrap();
        for (a, b) in p1.iter().zip(&p3) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn probe_rejects_zero_inputs() {
        let e = dict();
        assert!(cluster_probe(&Spectrum::zeros(3), &e).is_err());
        let zero_col =
            EndmemberDictionary::from_columns(&[vec![0.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let c = Spectrum::new(vec![0.5, 0.5]).unwrap();
        assert!(cluster_probe(&c, &zero_col).is_err());
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let gt = LabelMap::new(2, 2, vec![0, 0, 1, 1]).unwrap();
        let s = score_segmentation(&gt, &gt).unwrap();
        assert_eq!(s.miou, 1.0);
        assert_eq!(s.f1, 1.0);
    }

    #[test]
    fn permuted_labels_score_one() {
        let gt = LabelMap::new(2, 2, vec![0, 0, 1, 1]).unwrap();
        let pred = LabelMap::new(2, 2, vec![5, 5, 2, 2]).unwrap();
        let s = score_segmentation(&pred, &gt).unwrap();
        assert_eq!(s.miou, 1.0);
        assert_eq!(s.f1, 1.0);
    }

    #[test]
    fn hand_case_two_by_two() {
        // gt [0,0,1,1], pred [0,1,1,1]: best matching IoUs are 1/2 and 2/3,
        // so miou = 7/12. Both possible matchings enumerated by hand give
        // 0.5 + 2/3 = 7/6 versus 0 + 1/4; Hungarian must pick the former.
        let gt = LabelMap::new(4, 1, vec![0, 0, 1, 1]).unwrap();
        let pred = LabelMap::new(4, 1, vec![0, 1, 1, 1]).unwrap();
        let s = score_segmentation(&pred, &gt).unwrap();
        assert!((s.miou - 7.0 / 12.0).abs() < 1e-12, "miou {}", s.miou);
        // F1: class 0 -> 2*1/(1+2) = 2/3; class 1 -> 2*2/(3+2) = 4/5.
        assert!((s.f1 - (2.0 / 3.0 + 4.0 / 5.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn sentinel_pixels_are_excluded() {
        let gt = LabelMap::new(3, 1, vec![SENTINEL, 0, 1]).unwrap();
        let pred = LabelMap::new(3, 1, vec![4, 0, 1]).unwrap();
        let s = score_segmentation(&pred, &gt).unwrap();
        assert_eq!(s.miou, 1.0);
    }

    #[test]
    fn all_background_errors() {
        let gt = LabelMap::filled(2, 2, SENTINEL);
        let pred = LabelMap::filled(2, 2, 0);
        assert!(score_segmentation(&pred, &gt).is_err());
    }

    #[test]
    fn scores_stay_in_unit_interval_under_relabeling() {
        let mut rng = Rng::new(12);
        for _ in 0..50 {
            let n = 24;
            let gt_labels: Vec<u16> = (0..n).map(|_| rng.index(3) as u16).collect();
            let pred_labels: Vec<u16> = (0..n).map(|_| rng.index(4) as u16).collect();
            let gt = LabelMap::new(n, 1, gt_labels).unwrap();
            let pred = LabelMap::new(n, 1, pred_labels.clone()).unwrap();
            let s = score_segmentation(&pred, &gt).unwrap();
            assert!((0.0..=1.0).contains(&s.miou));
            assert!((0.0..=1.0).contains(&s.f1));
            // Relabeling invariance: swap labels 0 <-> 3.
            let swapped: Vec<u16> = pred_labels
                .iter()
                .map(|&l| match l {
                    0 => 3,
                    3 => 0,
                    x => x,
                })
                .collect();
            let pred2 = LabelMap::new(n, 1, swapped).unwrap();
            let s2 = score_segmentation(&pred2, &gt).unwrap();
            assert!((s.miou - s2.miou).abs() < 1e-12);
            assert!((s.f1 - s2.f1).abs() < 1e-12);
        }
    }
}
