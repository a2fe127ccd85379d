//! Lower convex hulls of finite point sets with exact rational heights.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewtonPolygon {
    vertices: Vec<(u64, BigRational)>,
}

impl NewtonPolygon {
    /// Lower convex hull; when several points share an `x` only the lowest
    /// one is kept, and points in the interior of an edge are dropped.
    pub fn hull(points: &[(u64, BigRational)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("Newton polygon of an empty point set".into()));
        }
        let mut lowest: BTreeMap<u64, BigRational> = BTreeMap::new();
        for (x, y) in points {
            lowest
                .entry(*x)
                .and_modify(|cur| {
                    if y < cur {
                        *cur = y.clone();
                    }
                })
                .or_insert_with(|| y.clone());
        }
        let mut hull: Vec<(u64, BigRational)> = Vec::new();
        for (x, y) in lowest {
            while hull.len() >= 2 {
                let (x1, y1) = &hull[hull.len() - 2];
                let (x2, y2) = &hull[hull.len() - 1];
                // drop the middle point unless it lies strictly below the chord
                let lhs = (y2 - y1) * BigRational::from_integer(BigInt::from(x - x1));
                let rhs = (&y - y1) * BigRational::from_integer(BigInt::from(x2 - x1));
                if lhs >= rhs {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push((x, y));
        }
        Ok(NewtonPolygon { vertices: hull })
    }

    pub fn from_integers(points: &[(u64, i64)]) -> Result<Self> {
        let pts: Vec<_> = points
            .iter()
            .map(|&(x, y)| (x, BigRational::from_integer(BigInt::from(y))))
            .collect();
        Self::hull(&pts)
    }

    pub fn vertices(&self) -> &[(u64, BigRational)] {
        &self.vertices
    }

    pub fn slopes(&self) -> Vec<BigRational> {
        self.vertices
            .windows(2)
            .map(|w| (&w[1].1 - &w[0].1) / BigRational::from_integer(BigInt::from(w[1].0 - w[0].0)))
            .collect()
    }

    pub fn segment_count(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    /// Height of the polygon at an abscissa inside its range.
    pub fn height_at(&self, x: u64) -> Option<BigRational> {
        let w = self.vertices.windows(2).find(|w| w[0].0 <= x && x <= w[1].0);
        match w {
            Some(w) => {
                let t = BigRational::new(BigInt::from(x - w[0].0), BigInt::from(w[1].0 - w[0].0));
                Some(&w[0].1 + (&w[1].1 - &w[0].1) * t)
            }
            None if self.vertices.len() == 1 && self.vertices[0].0 == x => Some(self.vertices[0].1.clone()),
            None => None,
        }
    }

    pub fn slopes_strictly_increasing(&self) -> bool {
        self.slopes().windows(2).all(|w| w[0] < w[1])
    }

    pub fn is_flat(&self) -> bool {
        self.slopes().iter().all(Zero::is_zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    #[test]
    fn single_point() {
        let h = NewtonPolygon::from_integers(&[(3, 5)]).unwrap();
        assert_eq!(h.vertices(), &[(3, q(5))]);
        assert!(h.slopes().is_empty());
    }

    #[test]
    fn v_shape() {
        let h = NewtonPolygon::from_integers(&[(0, 2), (1, 0), (2, 2)]).unwrap();
        assert_eq!(h.vertices().len(), 3);
        assert_eq!(h.slopes(), vec![q(-2), q(2)]);
    }

    #[test]
    fn collinear_interior_dropped() {
        let h = NewtonPolygon::from_integers(&[(0, 0), (1, 1), (2, 2)]).unwrap();
        assert_eq!(h.vertices(), &[(0, q(0)), (2, q(2))]);
    }

    #[test]
    fn duplicate_x_keeps_lowest() {
        let h = NewtonPolygon::from_integers(&[(0, 4), (0, 1), (2, 0)]).unwrap();
        assert_eq!(h.vertices(), &[(0, q(1)), (2, q(0))]);
    }

    #[test]
    fn empty_is_error() {
        assert!(NewtonPolygon::hull(&[]).is_err());
    }

    proptest! {
        #[test]
        fn hull_is_convex_and_below(points in prop::collection::vec((0u64..12, -20i64..20), 1..15)) {
            let h = NewtonPolygon::from_integers(&points).unwrap();
            prop_assert!(h.slopes_strictly_increasing());
            for &(x, y) in &points {
                let hy = h.height_at(x).unwrap();
                prop_assert!(hy <= q(y));
            }
            let xs: Vec<u64> = h.vertices().iter().map(|v| v.0).collect();
            prop_assert_eq!(xs.first().copied(), points.iter().map(|p| p.0).min());
            prop_assert_eq!(xs.last().copied(), points.iter().map(|p| p.0).max());
        }
    }
}
