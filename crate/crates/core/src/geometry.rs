//! Box arithmetic shared by the tracker, the evaluator and the analyses.
//!
//! Boxes use the MOTChallenge convention: top-left corner plus width and
//! height, in continuous pixel coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `(x, y, w, h)` with `w > 0` and `h > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    /// Checked constructor for untrusted input.
    pub fn try_new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "box ({x}, {y}, {w}, {h}) has non-finite components"
            )));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "box ({x}, {y}, {w}, {h}) must have positive width and height"
            )));
        }
        Ok(BBox { x, y, w, h })
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BBox::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        BBox::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    /// Overlap area with `other`; zero when the boxes are disjoint or only touch.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// The intersection box, if the overlap has positive area.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| BBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    /// Smallest box containing both `self` and `other`.
    pub fn enclosing(&self, other: &BBox) -> BBox {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = self.right().max(other.right());
        let y1 = self.bottom().max(other.bottom());
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }
}

/// Switches for the association similarity. Turning both toggles off gives plain IoU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub expansion_scale: f64,
    pub use_expansion: bool,
    pub use_distance_penalty: bool,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            expansion_scale: 2.0,
            use_expansion: true,
            use_distance_penalty: true,
        }
    }
}

impl SimilarityConfig {
    pub fn plain_iou() -> Self {
        SimilarityConfig {
            expansion_scale: 1.0,
            use_expansion: false,
            use_distance_penalty: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.expansion_scale.is_finite() && self.expansion_scale >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "expansion_scale must be >= 1, got {}",
                self.expansion_scale
            )));
        }
        Ok(())
    }

    /// Scale actually applied to both boxes.
    pub fn effective_scale(&self) -> f64 {
        if self.use_expansion {
            self.expansion_scale
        } else {
            1.0
        }
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Scales width and height by `scale` about the box center.
pub fn expand(b: &BBox, scale: f64) -> BBox {
    let (cx, cy) = b.center();
    BBox::from_center(cx, cy, b.w * scale, b.h * scale)
}

pub fn expanded_iou(a: &BBox, b: &BBox, scale: f64) -> f64 {
    if scale == 1.0 {
        return iou(a, b);
    }
    iou(&expand(a, scale), &expand(b, scale))
}

pub fn center_distance(a: &BBox, b: &BBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

/// Center distance over the diagonal of the box enclosing both boxes after
/// expansion by `scale`. Lies in `[0, 1]` since both centers sit inside the
/// enclosing box.
pub fn normalized_distance(a: &BBox, b: &BBox, scale: f64) -> f64 {
    let d = center_distance(a, b);
    if d == 0.0 {
        return 0.0;
    }
    let enc = expand(a, scale).enclosing(&expand(b, scale));
    let diag = enc.w.hypot(enc.h);
    (d / diag).clamp(0.0, 1.0)
}

/// Association similarity in `[0, 1]`.
///
/// With both toggles on this is `(EIoU - NormDist + 1) / 2`. Without the
/// distance penalty it is the (expanded) IoU alone, so thresholds keep their
/// IoU meaning; without expansion the IoU term and the distance normalizer use
/// the original boxes.
pub fn similarity(a: &BBox, b: &BBox, cfg: &SimilarityConfig) -> f64 {
    let scale = cfg.effective_scale();
    let overlap = expanded_iou(a, b, scale);
    if !cfg.use_distance_penalty {
        return overlap;
    }
    let dist = normalized_distance(a, b, scale);
    ((overlap - dist + 1.0) / 2.0).clamp(0.0, 1.0)
}

/// Dot distance similarity `exp(-d / s_norm)`.
pub fn dotd(a: &BBox, b: &BBox, s_norm: f64) -> Result<f64> {
    check_s_norm(s_norm)?;
    Ok(dotd_unchecked(a, b, s_norm))
}

pub(crate) fn check_s_norm(s_norm: f64) -> Result<()> {
    if !(s_norm.is_finite() && s_norm > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "DotD normalizer must be positive, got {s_norm}"
        )));
    }
    Ok(())
}

pub(crate) fn dotd_unchecked(a: &BBox, b: &BBox, s_norm: f64) -> f64 {
    (-center_distance(a, b) / s_norm).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const A: BBox = BBox::new(0.0, 0.0, 10.0, 10.0);
    const B: BBox = BBox::new(15.0, 0.0, 10.0, 10.0);

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&A, &A), 1.0);
        assert_eq!(iou(&A, &BBox::new(20.0, 20.0, 5.0, 5.0)), 0.0);
        assert_abs_diff_eq!(
            iou(&A, &BBox::new(5.0, 0.0, 10.0, 10.0)),
            1.0 / 3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn expand_examples() {
        assert_eq!(expand(&A, 2.0), BBox::new(-5.0, -5.0, 20.0, 20.0));
        assert_eq!(expand(&A, 1.0), A);
        assert_eq!(
            expand(&BBox::new(3.0, 4.0, 6.0, 8.0), 2.0),
            BBox::new(0.0, 0.0, 12.0, 16.0)
        );
    }

    #[test]
    fn expanded_iou_examples() {
        // (-5,-5,20,20) vs (10,-5,20,20): overlap 5x20 = 100, union 700.
        assert_abs_diff_eq!(expanded_iou(&A, &B, 2.0), 100.0 / 700.0, epsilon = 1e-15);
        assert_eq!(expanded_iou(&B, &B, 3.7), 1.0);
        assert_eq!(expanded_iou(&A, &B, 1.0), 0.0);
    }

    #[test]
    fn normalized_distance_examples() {
        let concentric = BBox::new(2.0, 2.0, 6.0, 6.0);
        assert_eq!(normalized_distance(&A, &concentric, 2.0), 0.0);
        // centers (5,5),(20,5); enclosing expanded box x in [-5,30], y in [-5,15]
        let expected = 15.0 / 1625f64.sqrt();
        assert_abs_diff_eq!(normalized_distance(&A, &B, 2.0), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.3721, epsilon = 1e-4);
        // tiny boxes at opposite corners of their enclosing box
        let p = BBox::new(0.0, 0.0, 1e-6, 1e-6);
        let q = BBox::new(100.0, 100.0, 1e-6, 1e-6);
        assert!(normalized_distance(&p, &q, 1.0) > 0.999_999);
    }

    #[test]
    fn similarity_examples() {
        let cfg = SimilarityConfig::default();
        assert_eq!(similarity(&A, &A, &cfg), 1.0);
        let expected = (1.0 / 7.0 - 15.0 / 1625f64.sqrt() + 1.0) / 2.0;
        assert_abs_diff_eq!(similarity(&A, &B, &cfg), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.3854, epsilon = 1e-4);
        let p = BBox::new(0.0, 0.0, 1e-3, 1e-3);
        let q = BBox::new(1e4, 1e4, 1e-3, 1e-3);
        assert!(similarity(&p, &q, &cfg) < 1e-6);
    }

    #[test]
    fn similarity_toggles() {
        let both_off = SimilarityConfig::plain_iou();
        assert_eq!(similarity(&A, &B, &both_off), iou(&A, &B));
        let expansion_only = SimilarityConfig {
            use_distance_penalty: false,
            ..Default::default()
        };
        assert_eq!(
            similarity(&A, &B, &expansion_only),
            expanded_iou(&A, &B, 2.0)
        );
        let distance_only = SimilarityConfig {
            use_expansion: false,
            ..Default::default()
        };
        let nd = normalized_distance(&A, &B, 1.0);
        assert_abs_diff_eq!(similarity(&A, &B, &distance_only), (0.0 - nd + 1.0) / 2.0);
    }

    #[test]
    fn dotd_examples() {
        let concentric = BBox::new(2.0, 2.0, 6.0, 6.0);
        assert_eq!(dotd(&A, &concentric, 5.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            dotd(&A, &B, 15.0).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
        let c = A.translate(6.0, 8.0);
        assert_abs_diff_eq!(dotd(&A, &c, 20.0).unwrap(), 0.6065, epsilon = 1e-4);
        assert!(dotd(&A, &B, 0.0).is_err());
        assert!(dotd(&A, &B, -1.0).is_err());
    }

    #[test]
    fn try_new_rejects_degenerate() {
        assert!(BBox::try_new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BBox::try_new(0.0, 0.0, 1.0, -1.0).is_err());
        assert!(BBox::try_new(f64::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(BBox::try_new(0.0, 0.0, 1.0, 1.0).is_ok());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (
            -200.0..200.0f64,
            -200.0..200.0f64,
            0.5..80.0f64,
            0.5..80.0f64,
        )
            .prop_map(|(x, y, w, h)| BBox::new(x, y, w, h))
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(a in arb_box(), b in arb_box(), scale in 1.0..4.0f64) {
            let cfg = SimilarityConfig { expansion_scale: scale, ..Default::default() };
            let pairs = [
                (iou(&a, &b), iou(&b, &a)),
                (expanded_iou(&a, &b, scale), expanded_iou(&b, &a, scale)),
                (normalized_distance(&a, &b, scale), normalized_distance(&b, &a, scale)),
                (similarity(&a, &b, &cfg), similarity(&b, &a, &cfg)),
                (dotd(&a, &b, 12.0).unwrap(), dotd(&b, &a, 12.0).unwrap()),
            ];
            for (ab, ba) in pairs {
                prop_assert!((ab - ba).abs() <= 1e-12);
                prop_assert!((0.0..=1.0).contains(&ab));
            }
        }

        #[test]
        fn scale_one_reduces_to_iou(a in arb_box(), b in arb_box()) {
            prop_assert_eq!(expanded_iou(&a, &b, 1.0), iou(&a, &b));
        }

        #[test]
        fn expansion_never_lowers_iou(a in arb_box(), b in arb_box(), scale in 1.0..4.0f64) {
            let plain = iou(&a, &b);
            let expanded = expanded_iou(&a, &b, scale);
            prop_assert!(expanded >= plain - 1e-12);
            if plain == 0.0 && expand(&a, scale).intersection_area(&expand(&b, scale)) > 0.0 {
                prop_assert!(expanded > 0.0);
            }
        }

        #[test]
        fn translation_invariant(a in arb_box(), b in arb_box(), dx in -500.0..500.0f64, dy in -500.0..500.0f64) {
            let cfg = SimilarityConfig::default();
            let (ta, tb) = (a.translate(dx, dy), b.translate(dx, dy));
            prop_assert!((iou(&a, &b) - iou(&ta, &tb)).abs() < 1e-9);
            prop_assert!((similarity(&a, &b, &cfg) - similarity(&ta, &tb, &cfg)).abs() < 1e-9);
            prop_assert!((dotd(&a, &b, 7.0).unwrap() - dotd(&ta, &tb, 7.0).unwrap()).abs() < 1e-9);
        }
    }
}
