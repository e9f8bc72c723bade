//! Domain elements.

use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

/// Coordinates of a grid point; inline for dimensions up to 4.
pub type Coords = SmallVec<[u32; 4]>;

/// An element of the sample space.
///
/// Grid points live in `{0, ..., delta-1}^d`; tokens are strings over a
/// finite alphabet. Equality, ordering and hashing are structural.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Grid(Coords),
    Token(String),
}

impl Point {
    pub fn grid<I: IntoIterator<Item = u32>>(coords: I) -> Self {
        Point::Grid(coords.into_iter().collect())
    }

    /// One-dimensional grid point, used for indexed finite domains.
    pub fn index(i: u32) -> Self {
        let mut c = Coords::new();
        c.push(i);
        Point::Grid(c)
    }

    pub fn token(s: impl Into<String>) -> Self {
        Point::Token(s.into())
    }

    pub fn coords(&self) -> Option<&[u32]> {
        match self {
            Point::Grid(c) => Some(c),
            Point::Token(_) => None,
        }
    }

    pub fn as_token(&self) -> Option<&str> {
        match self {
            Point::Token(s) => Some(s),
            Point::Grid(_) => None,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.coords().map(<[u32]>::len)
    }

    /// True when this is a grid point of dimension `d` with every
    /// coordinate in `[0, delta-1]`.
    pub fn in_grid(&self, d: usize, delta: u32) -> bool {
        match self {
            Point::Grid(c) => c.len() == d && c.iter().all(|&v| v < delta),
            Point::Token(_) => false,
        }
    }

    /// Hamming weight of a grid point (sum of coordinates).
    pub fn weight(&self) -> u64 {
        self.coords()
            .map(|c| c.iter().map(|&v| v as u64).sum())
            .unwrap_or(0)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Grid(c) => {
                write!(f, "(")?;
                for (i, v) in c.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
            Point::Token(s) => write!(f, "{s:?}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_membership() {
        let p = Point::grid([0, 2, 1]);
        assert!(p.in_grid(3, 3));
        assert!(!p.in_grid(3, 2));
        assert!(!p.in_grid(2, 3));
        assert!(!Point::token("ab").in_grid(1, 3));
    }

    #[test]
    fn serde_untagged() {
        let p = Point::grid([1, 2]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[1,2]");
        let t: Point = serde_json::from_str("\"{a}\"").unwrap();
        assert_eq!(t, Point::token("{a}"));
        let back: Point = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn display() {
        assert_eq!(Point::grid([3, 4]).to_string(), "(3,4)");
        assert_eq!(Point::index(7).weight(), 7);
    }
}
