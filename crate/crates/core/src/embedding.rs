//! Vector math over style and content embeddings.
//!
//! A [`StyleAxis`] is calibrated from two sets of anchor embeddings: its
//! direction is the normalized difference of the pole means, its center is
//! their midpoint and its radius is half their separation. Projections are
//! mapped onto the 7-point scale with `4 + 3 * clamp(p / radius, -1, 1)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{IntensityScore, SCORE_MID};

pub const STYLE_DIM: usize = 768;
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;
pub const DEGENERACY_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_MIN_ANCHORS: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbeddingError {
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("space mismatch: expected {expected}, got {actual}")]
    SpaceMismatch { expected: Space, actual: Space },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("no vectors given")]
    EmptyInput,
    #[error("vector component {index} is not finite")]
    NonFinite { index: usize },
    #[error("axis `{0}` is degenerate: pole means coincide")]
    DegenerateAxis(String),
    #[error("axis `{dimension_id}` needs at least {min} anchors per pole, got {positive} positive and {negative} negative")]
    TooFewAnchors { dimension_id: String, min: usize, positive: usize, negative: usize },
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Style,
    Content,
}

impl std::fmt::Display for Space {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Space::Style => "style",
            Space::Content => "content",
        })
    }
}

/// A finite, non-empty embedding tagged with the space it lives in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVector")]
pub struct Vector {
    space: Space,
    components: Vec<f64>,
}

#[derive(Deserialize)]
struct RawVector {
    space: Space,
    components: Vec<f64>,
}

impl TryFrom<RawVector> for Vector {
    type Error = EmbeddingError;

    fn try_from(raw: RawVector) -> Result<Self, Self::Error> {
        Vector::new(raw.space, raw.components)
    }
}

impl Vector {
    pub fn new(space: Space, components: Vec<f64>) -> Result<Self, EmbeddingError> {
        if components.is_empty() {
            return Err(EmbeddingError::EmptyInput);
        }
        if let Some(index) = components.iter().position(|c| !c.is_finite()) {
            return Err(EmbeddingError::NonFinite { index });
        }
        Ok(Self { space, components })
    }

    pub fn style(components: Vec<f64>) -> Result<Self, EmbeddingError> {
        Self::new(Space::Style, components)
    }

    pub fn content(components: Vec<f64>) -> Result<Self, EmbeddingError> {
        Self::new(Space::Content, components)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    fn check_compatible(&self, other: &Vector) -> Result<(), EmbeddingError> {
        if self.space != other.space {
            return Err(EmbeddingError::SpaceMismatch { expected: self.space, actual: other.space });
        }
        if self.dim() != other.dim() {
            return Err(EmbeddingError::DimMismatch { expected: self.dim(), actual: other.dim() });
        }
        Ok(())
    }

    pub fn dot(&self, other: &Vector) -> Result<f64, EmbeddingError> {
        self.check_compatible(other)?;
        Ok(self.components.iter().zip(&other.components).map(|(a, b)| a * b).sum())
    }

    fn zip_with(&self, other: &Vector, f: impl Fn(f64, f64) -> f64) -> Result<Vector, EmbeddingError> {
        self.check_compatible(other)?;
        let components = self.components.iter().zip(&other.components).map(|(a, b)| f(*a, *b)).collect();
        Vector::new(self.space, components)
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector, EmbeddingError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> Result<Vector, EmbeddingError> {
        Vector::new(self.space, self.components.iter().map(|c| c * k).collect())
    }
}

/// `dot(a, b) / (|a| |b|)`, clamped to [-1, 1].
pub fn cosine_similarity(a: &Vector, b: &Vector) -> Result<f64, EmbeddingError> {
    let dot = a.dot(b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// `1 - cosine_similarity`, in [0, 2].
pub fn cosine_distance(a: &Vector, b: &Vector) -> Result<f64, EmbeddingError> {
    Ok(1.0 - cosine_similarity(a, b)?)
}

/// Cosine similarity restricted to the content space.
pub fn content_preservation(original: &Vector, candidate: &Vector) -> Result<f64, EmbeddingError> {
    for v in [original, candidate] {
        if v.space() != Space::Content {
            return Err(EmbeddingError::SpaceMismatch { expected: Space::Content, actual: v.space() });
        }
    }
    cosine_similarity(original, candidate)
}

pub fn mean_vector(vs: &[Vector]) -> Result<Vector, EmbeddingError> {
    let first = vs.first().ok_or(EmbeddingError::EmptyInput)?;
    let mut sum = vec![0.0; first.dim()];
    for v in vs {
        first.check_compatible(v)?;
        for (acc, c) in sum.iter_mut().zip(&v.components) {
            *acc += c;
        }
    }
    let n = vs.len() as f64;
    Vector::new(first.space, sum.into_iter().map(|s| s / n).collect())
}

/// A calibrated direction in style space for one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleAxis {
    pub dimension_id: String,
    direction: Vector,
    center: Vector,
    radius: f64,
    anchor_counts: (usize, usize),
}

impl StyleAxis {
    /// Reassembles an axis from stored parts, re-checking its invariants.
    pub fn from_parts(
        dimension_id: impl Into<String>,
        direction: Vector,
        center: Vector,
        radius: f64,
        anchor_counts: (usize, usize),
    ) -> Result<Self, EmbeddingError> {
        let dimension_id = dimension_id.into();
        for v in [&direction, &center] {
            if v.space() != Space::Style {
                return Err(EmbeddingError::SpaceMismatch { expected: Space::Style, actual: v.space() });
            }
        }
        direction.check_compatible(&center)?;
        if (direction.norm() - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(EmbeddingError::DegenerateAxis(dimension_id));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(EmbeddingError::NonPositiveRadius(radius));
        }
        Ok(Self { dimension_id, direction, center, radius, anchor_counts })
    }

    pub fn direction(&self) -> &Vector {
        &self.direction
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `(positive, negative)` anchor counts used at calibration.
    pub fn anchor_counts(&self) -> (usize, usize) {
        self.anchor_counts
    }
}

pub fn build_axis(
    dimension_id: &str,
    pos_anchors: &[Vector],
    neg_anchors: &[Vector],
    min_anchors: usize,
) -> Result<StyleAxis, EmbeddingError> {
    if pos_anchors.len() < min_anchors || neg_anchors.len() < min_anchors {
        return Err(EmbeddingError::TooFewAnchors {
            dimension_id: dimension_id.to_string(),
            min: min_anchors,
            positive: pos_anchors.len(),
            negative: neg_anchors.len(),
        });
    }
    let p = mean_vector(pos_anchors)?;
    let n = mean_vector(neg_anchors)?;
    for v in [&p, &n] {
        if v.space() != Space::Style {
            return Err(EmbeddingError::SpaceMismatch { expected: Space::Style, actual: v.space() });
        }
    }
    let diff = p.sub(&n)?;
    let separation = diff.norm();
    if separation < DEGENERACY_THRESHOLD {
        return Err(EmbeddingError::DegenerateAxis(dimension_id.to_string()));
    }
    let direction = Vector::new(Space::Style, diff.components.iter().map(|c| c / separation).collect())?;
    let center = p.zip_with(&n, |a, b| (a + b) / 2.0)?;
    Ok(StyleAxis {
        dimension_id: dimension_id.to_string(),
        direction,
        center,
        radius: separation / 2.0,
        anchor_counts: (pos_anchors.len(), neg_anchors.len()),
    })
}

/// Signed distance of `v` from the axis center along its direction.
/// Positive values lean toward the positive pole.
pub fn project(axis: &StyleAxis, v: &Vector) -> Result<f64, EmbeddingError> {
    if v.space() != Space::Style {
        return Err(EmbeddingError::SpaceMismatch { expected: Space::Style, actual: v.space() });
    }
    v.sub(&axis.center)?.dot(&axis.direction)
}

/// Maps a projection onto [1, 7]: `4 + 3 * clamp(p / radius, -1, 1)`.
///
/// The affine map is evaluated on `|t|` and reflected around the midpoint, so
/// negating the projection yields exactly `8 - score`.
pub fn intensity_from_projection(p: f64, radius: f64) -> Result<IntensityScore, EmbeddingError> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(EmbeddingError::NonPositiveRadius(radius));
    }
    let t = (p / radius).clamp(-1.0, 1.0);
    let upper = SCORE_MID + 3.0 * t.abs();
    let score = if t < 0.0 { 2.0 * SCORE_MID - upper } else { upper };
    Ok(IntensityScore::clamped(score))
}

/// Score of a style vector on one axis.
pub fn axis_score(axis: &StyleAxis, v: &Vector) -> Result<IntensityScore, EmbeddingError> {
    intensity_from_projection(project(axis, v)?, axis.radius)
}

/// Calibrated axes keyed by dimension id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AxisSet {
    axes: BTreeMap<String, StyleAxis>,
}

impl AxisSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, axis: StyleAxis) {
        self.axes.insert(axis.dimension_id.clone(), axis);
    }

    pub fn get(&self, dimension_id: &str) -> Option<&StyleAxis> {
        self.axes.get(dimension_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &StyleAxis> {
        self.axes.values()
    }

    pub fn len(&self) -> usize {
        self.axes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }
}

impl FromIterator<StyleAxis> for AxisSet {
    fn from_iter<I: IntoIterator<Item = StyleAxis>>(iter: I) -> Self {
        let mut set = AxisSet::new();
        for axis in iter {
            set.insert(axis);
        }
        set
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(c: &[f64]) -> Vector {
        Vector::style(c.to_vec()).unwrap()
    }

    fn c(v: &[f64]) -> Vector {
        Vector::content(v.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&s(&[1.0, 0.0]), &s(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&s(&[1.0, 0.0]), &s(&[0.0, 1.0])).unwrap(), 0.0);
        // 1 / sqrt(2)
        let expected = 0.707_106_781_186_547_5;
        assert!((cosine_similarity(&s(&[1.0, 1.0]), &s(&[1.0, 0.0])).unwrap() - expected).abs() < 1e-8);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(cosine_similarity(&s(&[0.0, 0.0]), &s(&[1.0, 0.0])), Err(EmbeddingError::ZeroVector));
        assert!(matches!(
            cosine_similarity(&s(&[1.0, 0.0]), &c(&[1.0, 0.0])),
            Err(EmbeddingError::SpaceMismatch { .. })
        ));
        assert!(matches!(
            cosine_similarity(&s(&[1.0, 0.0]), &s(&[1.0, 0.0, 0.0])),
            Err(EmbeddingError::DimMismatch { expected: 2, actual: 3 })
        ));
        assert!(Vector::style(vec![f64::NAN]).is_err());
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean_vector(&[s(&[2.0, 0.0])]).unwrap(), s(&[2.0, 0.0]));
        assert_eq!(mean_vector(&[s(&[1.0, 0.0]), s(&[3.0, 0.0])]).unwrap(), s(&[2.0, 0.0]));
        assert_eq!(
            mean_vector(&[s(&[1.0, 2.0]), s(&[3.0, 4.0]), s(&[5.0, 6.0])]).unwrap(),
            s(&[3.0, 4.0])
        );
        assert_eq!(mean_vector(&[]), Err(EmbeddingError::EmptyInput));
        assert!(matches!(mean_vector(&[s(&[1.0]), c(&[1.0])]), Err(EmbeddingError::SpaceMismatch { .. })));
    }

    #[test]
    fn axis_from_simple_anchors() {
        let pos = vec![s(&[2.0, 1.0]), s(&[2.0, -1.0]), s(&[2.0, 0.0])];
        let neg = vec![s(&[0.0, 1.0]), s(&[0.0, -1.0]), s(&[0.0, 0.0])];
        let axis = build_axis("formal-informal", &pos, &neg, 3).unwrap();
        assert_eq!(axis.direction(), &s(&[1.0, 0.0]));
        assert_eq!(axis.center(), &s(&[1.0, 0.0]));
        assert_eq!(axis.radius(), 1.0);
        assert_eq!(project(&axis, &mean_vector(&pos).unwrap()).unwrap(), axis.radius());
        assert_eq!(project(&axis, &mean_vector(&neg).unwrap()).unwrap(), -axis.radius());
    }

    #[test]
    fn axis_construction_errors() {
        let same = vec![s(&[1.0, 1.0]); 3];
        assert_eq!(
            build_axis("x-y", &same, &same, 3),
            Err(EmbeddingError::DegenerateAxis("x-y".into()))
        );
        assert!(matches!(
            build_axis("x-y", &same[..2], &same, 3),
            Err(EmbeddingError::TooFewAnchors { positive: 2, negative: 3, .. })
        ));
    }

    #[test]
    fn projection_examples() {
        let axis = StyleAxis::from_parts("a-b", s(&[1.0, 0.0]), s(&[1.0, 0.0]), 1.0, (3, 3)).unwrap();
        assert_eq!(project(&axis, &s(&[1.0, 0.0])).unwrap(), 0.0);
        assert_eq!(project(&axis, &s(&[3.0, 0.0])).unwrap(), 2.0);
        assert_eq!(project(&axis, &s(&[1.0, 5.0])).unwrap(), 0.0);
        assert!(project(&axis, &c(&[1.0, 0.0])).is_err());
        assert!(StyleAxis::from_parts("a-b", s(&[2.0, 0.0]), s(&[0.0, 0.0]), 1.0, (3, 3)).is_err());
    }

    #[test]
    fn intensity_examples() {
        let r = 2.0;
        assert_eq!(intensity_from_projection(0.0, r).unwrap().value(), 4.0);
        assert_eq!(intensity_from_projection(r, r).unwrap().value(), 7.0);
        assert_eq!(intensity_from_projection(-r, r).unwrap().value(), 1.0);
        assert_eq!(intensity_from_projection(r / 2.0, r).unwrap().value(), 5.5);
        assert_eq!(intensity_from_projection(1.0, 0.0), Err(EmbeddingError::NonPositiveRadius(0.0)));
    }

    #[test]
    fn content_preservation_examples() {
        assert_eq!(content_preservation(&c(&[3.0, 4.0]), &c(&[3.0, 4.0])).unwrap(), 1.0);
        assert_eq!(content_preservation(&c(&[1.0, 0.0]), &c(&[0.0, 1.0])).unwrap(), 0.0);
        assert!((content_preservation(&c(&[2.0, 1.0]), &c(&[1.0, 2.0])).unwrap() - 0.8).abs() < 1e-9);
        assert!(content_preservation(&s(&[1.0]), &s(&[1.0])).is_err());
    }

    fn arb_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, dim)
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric_and_scale_invariant(a in arb_vec(6), b in arb_vec(6), k in 0.01f64..100.0) {
            let (a, b) = (s(&a), s(&b));
            prop_assume!(a.norm() > 1e-6 && b.norm() > 1e-6);
            let ab = cosine_similarity(&a, &b).unwrap();
            prop_assert_eq!(ab, cosine_similarity(&b, &a).unwrap());
            let scaled = cosine_similarity(&a, &b.scale(k).unwrap()).unwrap();
            prop_assert!((scaled - ab).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }

        #[test]
        fn pole_swap_negates_axis(
            pos in proptest::collection::vec(arb_vec(4), 3..6),
            neg in proptest::collection::vec(arb_vec(4), 3..6),
            probes in proptest::collection::vec(arb_vec(4), 1..8),
        ) {
            let pos: Vec<_> = pos.iter().map(|v| s(v)).collect();
            let neg: Vec<_> = neg.iter().map(|v| s(v)).collect();
            let (Ok(fwd), Ok(rev)) = (build_axis("a-b", &pos, &neg, 3), build_axis("a-b", &neg, &pos, 3)) else {
                return Ok(());
            };
            prop_assert_eq!(rev.direction(), &fwd.direction().scale(-1.0).unwrap());
            for probe in probes.iter().map(|v| s(v)) {
                let p = project(&fwd, &probe).unwrap();
                prop_assert_eq!(project(&rev, &probe).unwrap(), -p);
                let score = axis_score(&fwd, &probe).unwrap().value();
                prop_assert_eq!(axis_score(&rev, &probe).unwrap().value(), 8.0 - score);
            }
        }

        #[test]
        fn intensity_is_monotone_and_bounded(p1 in -50.0f64..50.0, p2 in -50.0f64..50.0, r in 0.001f64..20.0) {
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let (a, b) = (intensity_from_projection(lo, r).unwrap().value(), intensity_from_projection(hi, r).unwrap().value());
            prop_assert!(a <= b);
            prop_assert!((1.0..=7.0).contains(&a) && (1.0..=7.0).contains(&b));
            if lo < hi && lo > -r && hi < r && (hi - lo) / r > 1e-12 {
                prop_assert!(a < b);
            }
        }

        #[test]
        fn intensity_saturates(extra in 0.0f64..1e6, r in 0.001f64..20.0) {
            prop_assert_eq!(intensity_from_projection(r + extra, r).unwrap().value(), 7.0);
            prop_assert_eq!(intensity_from_projection(-r - extra, r).unwrap().value(), 1.0);
        }
    }
}
