//! The initially infected region `A`.

use crate::error::{invalid, Result};
use crate::grid::GridField;
use crate::torus::{torus_distance_sq, TorusPoint};

/// Half-open interval on the circle; `lo > hi` wraps through 0.
#[inline]
fn in_arc(x: f64, lo: f64, hi: f64) -> bool {
    if hi - lo >= 1.0 {
        true
    } else if lo <= hi {
        lo <= x && x < hi
    } else {
        x >= lo || x < hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "shape", rename_all = "lowercase"))]
pub enum Region {
    Empty,
    Whole,
    /// `[x1[0], x1[1]) x [x2[0], x2[1])`, each interval wrapping when reversed.
    Rect { x1: [f64; 2], x2: [f64; 2] },
    /// Open geodesic disc.
    Disc { center: [f64; 2], radius: f64 },
}

impl Region {
    pub fn left_half() -> Self {
        Region::Rect { x1: [0.0, 0.5], x2: [0.0, 1.0] }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        match *self {
            Region::Empty | Region::Whole => Ok(()),
            Region::Rect { x1, x2 } => {
                if x1.iter().chain(x2.iter()).all(|&v| unit(v)) {
                    Ok(())
                } else {
                    Err(invalid("region", "rectangle bounds must lie in [0, 1]"))
                }
            }
            Region::Disc { center, radius } => {
                if center.iter().all(|&v| unit(v)) && radius > 0.0 && radius <= 0.5 {
                    Ok(())
                } else {
                    Err(invalid("region", "disc needs a center in [0,1]^2 and radius in (0, 1/2]"))
                }
            }
        }
    }

    pub fn contains(&self, p: TorusPoint) -> bool {
        match *self {
            Region::Empty => false,
            Region::Whole => true,
            Region::Rect { x1, x2 } => in_arc(p.x1(), x1[0], x1[1]) && in_arc(p.x2(), x2[0], x2[1]),
            Region::Disc { center, radius } => {
                let c = TorusPoint::wrap(center[0], center[1]).expect("validated center");
                torus_distance_sq(p, c) < radius * radius
            }
        }
    }

    /// `1_A` sampled at the grid nodes.
    pub fn indicator(&self, n: usize) -> GridField {
        GridField::from_fn(n, |p| if self.contains(p) { 1.0 } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(a: f64, b: f64) -> TorusPoint {
        TorusPoint::wrap(a, b).unwrap()
    }

    #[test]
    fn membership() {
        let left = Region::left_half();
        assert!(left.contains(pt(0.0, 0.3)));
        assert!(left.contains(pt(0.49, 0.99)));
        assert!(!left.contains(pt(0.5, 0.3)));
        let wrapped = Region::Rect { x1: [0.9, 0.1], x2: [0.0, 1.0] };
        assert!(wrapped.contains(pt(0.95, 0.5)) && wrapped.contains(pt(0.05, 0.5)));
        assert!(!wrapped.contains(pt(0.5, 0.5)));
        let disc = Region::Disc { center: [0.0, 0.0], radius: 0.1 };
        assert!(disc.contains(pt(0.95, 0.98)));
        assert!(!disc.contains(pt(0.1, 0.0)));
        assert!(!Region::Empty.contains(pt(0.2, 0.2)));
        assert!(Region::Whole.contains(pt(0.2, 0.2)));
    }

    #[test]
    fn left_half_indicator_has_exact_mass() {
        assert_eq!(Region::left_half().indicator(128).mass(), 0.5);
    }

    #[test]
    fn validation() {
        assert!(Region::Rect { x1: [0.0, 1.5], x2: [0.0, 1.0] }.validate().is_err());
        assert!(Region::Disc { center: [0.5, 0.5], radius: 0.0 }.validate().is_err());
        assert!(Region::left_half().validate().is_ok());
    }
}
