#[allow(unused_imports)] // inherent float methods need std
use num_traits::Float;
use alloc::vec::Vec;

use crate::geometry::{HomogLine, Pixel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OverlayKind {
    PointMarker,
    DirectionArrow,
    EpipolarLines,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverlayLine {
    pub line: HomogLine,
    pub inlier: bool,
    /// Visible part of the line, if it crosses the image.
    pub segment: Option<(Pixel, Pixel)>,
}

/// Guidance drawn over the live preview.
#[derive(Clone, Debug, PartialEq)]
pub struct Overlay {
    pub kind: OverlayKind,
    pub point: Option<Pixel>,
    /// `point` is the antipode of a target behind the camera.
    pub behind: bool,
    /// Unit vector from the image center toward the target, set for arrows.
    pub arrow_direction: Option<[f64; 2]>,
    pub lines: Vec<OverlayLine>,
}

impl Overlay {
    /// Marker when `point` is inside the image, arrow when it is outside or
    /// behind the camera, lines only when there is no point.
    pub fn build(point: Option<Pixel>, behind: bool, lines: &[(HomogLine, bool)], width: f64, height: f64) -> Self {
        let lines = lines
            .iter()
            .map(|&(line, inlier)| OverlayLine { line, inlier, segment: line.clip_to_image(width, height) })
            .collect();
        let Some(p) = point.filter(|p| p.is_finite()) else {
            return Self { kind: OverlayKind::EpipolarLines, point: None, behind: false, arrow_direction: None, lines };
        };
        if !behind && inside_image(p, width, height) {
            return Self { kind: OverlayKind::PointMarker, point: Some(p), behind, arrow_direction: None, lines };
        }
        let (dx, dy) = (p.x - width / 2.0, p.y - height / 2.0);
        let n = dx.hypot(dy);
        // Straight behind the center any direction will do.
        let dir = if n > 0.0 { [dx / n, dy / n] } else { [1.0, 0.0] };
        let dir = if behind { [-dir[0], -dir[1]] } else { dir };
        Self { kind: OverlayKind::DirectionArrow, point: Some(p), behind, arrow_direction: Some(dir), lines }
    }
}

pub fn inside_image(p: Pixel, width: f64, height: f64) -> bool {
    (0.0..=width).contains(&p.x) && (0.0..=height).contains(&p.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marker_arrow_and_lines() {
        let l = HomogLine::new(0.0, 1.0, -100.0).unwrap();
        let o = Overlay::build(Some(Pixel::new(10.0, 20.0)), false, &[(l, true)], 1280.0, 720.0);
        assert_eq!(o.kind, OverlayKind::PointMarker);
        let (a, b) = o.lines[0].segment.unwrap();
        assert_eq!((a.y, b.y), (100.0, 100.0));

        let o = Overlay::build(Some(Pixel::new(2640.0, 360.0)), false, &[], 1280.0, 720.0);
        assert_eq!(o.kind, OverlayKind::DirectionArrow);
        assert_eq!(o.arrow_direction, Some([1.0, 0.0]));

        let o = Overlay::build(Some(Pixel::new(100.0, 360.0)), true, &[], 1280.0, 720.0);
        assert_eq!(o.kind, OverlayKind::DirectionArrow);
        assert_eq!(o.arrow_direction, Some([1.0, 0.0]));

        let o = Overlay::build(None, false, &[(l, false)], 1280.0, 720.0);
        assert_eq!(o.kind, OverlayKind::EpipolarLines);
        assert!(!o.lines[0].inlier);
    }
}
