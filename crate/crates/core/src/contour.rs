//! Oriented level-set contours and the two-way map between them and height fields.
//!
//! Vertices live on the dual lattice. Externally they are given in doubled
//! coordinates: the corner shared by interior cells `(x-1, y-1)..(x, y)` is
//! `(2x+1, 2y+1)`, and the centre of interior cell `(x, y)` is `(2x+2, 2y+2)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{HeightField, LatticeError, LatticeGeometry};

#[derive(Debug, Error)]
pub enum ContourError {
    #[error("contours {first} and {second} are incompatible: {reason}")]
    Incompatible { first: usize, second: usize, reason: &'static str },
    #[error("malformed contour: {0}")]
    Malformed(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn value(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Dir {
    E,
    N,
    W,
    S,
}

impl Dir {
    fn step(self) -> (i64, i64) {
        match self {
            Dir::E => (1, 0),
            Dir::N => (0, 1),
            Dir::W => (-1, 0),
            Dir::S => (0, -1),
        }
    }

    fn right(self) -> Dir {
        match self {
            Dir::E => Dir::S,
            Dir::S => Dir::W,
            Dir::W => Dir::N,
            Dir::N => Dir::E,
        }
    }

    fn left(self) -> Dir {
        match self {
            Dir::E => Dir::N,
            Dir::N => Dir::W,
            Dir::W => Dir::S,
            Dir::S => Dir::E,
        }
    }

    /// Cells on the right and left of the unit move leaving vertex `(i, j)`.
    fn cells(self, i: i64, j: i64) -> ((i64, i64), (i64, i64)) {
        match self {
            Dir::E => ((i, j - 1), (i, j)),
            Dir::N => ((i, j), (i - 1, j)),
            Dir::W => ((i - 1, j), (i - 1, j - 1)),
            Dir::S => ((i - 1, j - 1), (i, j - 1)),
        }
    }

    fn from_step(dx: i64, dy: i64) -> Option<Dir> {
        match (dx, dy) {
            (1, 0) => Some(Dir::E),
            (0, 1) => Some(Dir::N),
            (-1, 0) => Some(Dir::W),
            (0, -1) => Some(Dir::S),
            _ => None,
        }
    }
}

/// A closed oriented polygon on the dual lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrientedContour {
    /// Vertex-grid corners `(i, j)`, `0 ≤ i, j ≤ L`; cyclic, first not repeated.
    vertices: Vec<(i64, i64)>,
    sign: Sign,
    /// Enclosed cells `(x, y)`, sorted by `(y, x)`.
    interior: Vec<(i64, i64)>,
    /// Inclusive cell bounding box `(xmin, ymin, xmax, ymax)` of the interior.
    bbox: (i64, i64, i64, i64),
}

impl OrientedContour {
    fn from_grid_vertices(vertices: Vec<(i64, i64)>) -> Result<Self, ContourError> {
        let n = vertices.len();
        if n < 4 {
            return Err(ContourError::Malformed(format!("{n} vertices, need at least 4")));
        }
        let mut twice_area = 0i64;
        for k in 0..n {
            let (a, b) = (vertices[k], vertices[(k + 1) % n]);
            if (a.0 - b.0).abs() + (a.1 - b.1).abs() != 1 {
                return Err(ContourError::Malformed(format!("non-unit step {a:?} -> {b:?}")));
            }
            twice_area += a.0 * b.1 - b.0 * a.1;
        }
        if twice_area == 0 {
            return Err(ContourError::Malformed("zero enclosed area".into()));
        }
        let sign = if twice_area < 0 { Sign::Plus } else { Sign::Minus };

        // Scanline over vertical unit edges: edge (i,j)-(i,j+1) crosses row j at i.
        let mut crossings: HashMap<i64, Vec<i64>> = HashMap::new();
        for k in 0..n {
            let (a, b) = (vertices[k], vertices[(k + 1) % n]);
            if a.0 == b.0 {
                crossings.entry(a.1.min(b.1)).or_default().push(a.0);
            }
        }
        let mut interior = Vec::new();
        let mut rows: Vec<_> = crossings.into_iter().collect();
        rows.sort_unstable();
        for (y, mut xs) in rows {
            xs.sort_unstable();
            for pair in xs.chunks(2) {
                if let [x0, x1] = *pair {
                    interior.extend((x0..x1).map(|x| (y, x)));
                }
            }
        }
        interior.sort_unstable();
        let interior: Vec<(i64, i64)> = interior.into_iter().map(|(y, x)| (x, y)).collect();
        let bbox = interior.iter().fold((i64::MAX, i64::MAX, i64::MIN, i64::MIN), |b, &(x, y)| {
            (b.0.min(x), b.1.min(y), b.2.max(x), b.3.max(y))
        });
        Ok(Self { vertices, sign, interior, bbox })
    }

    /// Builds a contour from doubled coordinates (odd integers). The sign is
    /// read from the orientation.
    pub fn from_doubled(vertices: &[[i64; 2]]) -> Result<Self, ContourError> {
        let grid = vertices
            .iter()
            .map(|&[x, y]| {
                if x.rem_euclid(2) != 1 || y.rem_euclid(2) != 1 {
                    Err(ContourError::Malformed(format!("({x}, {y}) is not a dual-lattice point")))
                } else {
                    Ok(((x - 1) / 2, (y - 1) / 2))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_grid_vertices(grid)
    }

    /// Axis-aligned rectangle of cells `[x0, x1) × [y0, y1)` with the given sign.
    pub fn rectangle(x0: i64, y0: i64, x1: i64, y1: i64, sign: Sign) -> Result<Self, ContourError> {
        if x1 <= x0 || y1 <= y0 {
            return Err(ContourError::Malformed("empty rectangle".into()));
        }
        // clockwise from the top-left corner
        let mut cw = Vec::new();
        cw.extend((x0..x1).map(|i| (i, y1)));
        cw.extend((y0 + 1..=y1).rev().map(|j| (x1, j)));
        cw.extend((x0 + 1..=x1).rev().map(|i| (i, y0)));
        cw.extend((y0..y1).map(|j| (x0, j)));
        if sign == Sign::Minus {
            cw.reverse();
        }
        Self::from_grid_vertices(cw)
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    /// Number of bonds `|γ|`.
    pub fn length(&self) -> usize {
        self.vertices.len()
    }

    pub fn interior_area(&self) -> usize {
        self.interior.len()
    }

    /// `α(γ) = sign · |int γ|`.
    pub fn signed_volume(&self) -> i64 {
        self.sign.value() * self.interior.len() as i64
    }

    /// Enclosed interior cells `(x, y)`.
    pub fn interior(&self) -> &[(i64, i64)] {
        &self.interior
    }

    pub fn contains_cell(&self, x: i64, y: i64) -> bool {
        let (x0, y0, x1, y1) = self.bbox;
        x >= x0 && x <= x1 && y >= y0 && y <= y1 && self.interior.binary_search_by(|&(a, b)| (b, a).cmp(&(y, x))).is_ok()
    }

    /// Inclusive cell bounding box `(xmin, ymin, xmax, ymax)`.
    pub fn bounding_box(&self) -> (i64, i64, i64, i64) {
        self.bbox
    }

    /// Vertices in doubled coordinates.
    pub fn doubled_vertices(&self) -> Vec<[i64; 2]> {
        self.vertices.iter().map(|&(i, j)| [2 * i + 1, 2 * j + 1]).collect()
    }

    /// Vertices in lattice units, with interior cell `(x, y)` centred at `(x+1, y+1)`.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.vertices.iter().map(|&(i, j)| (i as f64 + 0.5, j as f64 + 0.5)).collect()
    }

    /// Undirected bonds with their traversal direction.
    fn bonds(&self) -> impl Iterator<Item = ((i64, i64, bool), Dir)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| {
            let (a, b) = (self.vertices[k], self.vertices[(k + 1) % n]);
            let dir = Dir::from_step(b.0 - a.0, b.1 - a.1).expect("unit step");
            let lo = a.min(b);
            ((lo.0, lo.1, a.0 == b.0), dir)
        })
    }

    /// True when no bond is traversed twice.
    pub fn is_bond_simple(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.bonds().all(|(b, _)| seen.insert(b))
    }

    /// Rotation-invariant identity: sign plus the vertex cycle started at its
    /// lexicographically smallest rotation.
    pub fn canonical_key(&self) -> (Sign, Vec<(i64, i64)>) {
        let n = self.vertices.len();
        let best = (0..n)
            .min_by(|&a, &b| {
                (0..n).map(|k| self.vertices[(a + k) % n]).cmp((0..n).map(|k| self.vertices[(b + k) % n]))
            })
            .unwrap_or(0);
        (self.sign, (0..n).map(|k| self.vertices[(best + k) % n]).collect())
    }

    fn interiors_disjoint_or_nested(&self, other: &Self) -> bool {
        let (a, b) = (self.bbox, other.bbox);
        if a.2 < b.0 || b.2 < a.0 || a.3 < b.1 || b.3 < a.1 {
            return true;
        }
        let (mut i, mut j, mut common) = (0, 0, 0usize);
        let key = |c: &(i64, i64)| (c.1, c.0);
        while i < self.interior.len() && j < other.interior.len() {
            match key(&self.interior[i]).cmp(&key(&other.interior[j])) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    common += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        common == 0 || common == self.interior.len() || common == other.interior.len()
    }
}

#[derive(Serialize, Deserialize)]
struct ContourRecord {
    sign: Sign,
    vertices: Vec<[i64; 2]>,
}

/// A consistent family of oriented contours; multiplicity is encoded by repetition.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ContourFamily {
    contours: Vec<OrientedContour>,
}

impl ContourFamily {
    /// Validates pairwise compatibility.
    pub fn new(contours: Vec<OrientedContour>) -> Result<Self, ContourError> {
        check_compatible(&contours)?;
        Ok(Self { contours })
    }

    pub fn contours(&self) -> &[OrientedContour] {
        &self.contours
    }

    pub fn len(&self) -> usize {
        self.contours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contours.is_empty()
    }

    pub fn total_length(&self) -> usize {
        self.contours.iter().map(OrientedContour::length).sum()
    }

    pub fn signed_volume(&self) -> i64 {
        self.contours.iter().map(OrientedContour::signed_volume).sum()
    }

    /// Adds a contour after checking it against every member.
    pub fn push(&mut self, contour: OrientedContour) -> Result<(), ContourError> {
        let idx = self.contours.len();
        for (k, c) in self.contours.iter().enumerate() {
            check_pair(k, c, idx, &contour)?;
        }
        self.contours.push(contour);
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let recs: Vec<ContourRecord> = self
            .contours
            .iter()
            .map(|c| ContourRecord { sign: c.sign, vertices: c.doubled_vertices() })
            .collect();
        serde_json::to_string(&recs)
    }

    pub fn from_json(text: &str) -> Result<Self, ContourError> {
        let recs: Vec<ContourRecord> =
            serde_json::from_str(text).map_err(|e| ContourError::Malformed(e.to_string()))?;
        let mut contours = Vec::with_capacity(recs.len());
        for (k, r) in recs.into_iter().enumerate() {
            let c = OrientedContour::from_doubled(&r.vertices)?;
            if c.sign != r.sign {
                return Err(ContourError::Malformed(format!("contour {k}: sign disagrees with orientation")));
            }
            contours.push(c);
        }
        Self::new(contours)
    }
}

fn check_pair(i: usize, a: &OrientedContour, j: usize, b: &OrientedContour) -> Result<(), ContourError> {
    if !a.interiors_disjoint_or_nested(b) {
        return Err(ContourError::Incompatible { first: i, second: j, reason: "interiors overlap without nesting" });
    }
    Ok(())
}

fn check_compatible(contours: &[OrientedContour]) -> Result<(), ContourError> {
    for i in 0..contours.len() {
        for j in i + 1..contours.len() {
            check_pair(i, &contours[i], j, &contours[j])?;
        }
    }
    let mut owner: HashMap<(i64, i64, bool), (Dir, usize)> = HashMap::new();
    for (k, c) in contours.iter().enumerate() {
        for (bond, dir) in c.bonds() {
            match owner.get(&bond) {
                Some(&(d, first)) if d != dir => {
                    return Err(ContourError::Incompatible {
                        first,
                        second: k,
                        reason: "shared bond with opposite orientation",
                    })
                }
                Some(_) => {}
                None => {
                    owner.insert(bond, (dir, k));
                }
            }
        }
    }
    Ok(())
}

/// Oriented boundaries of every level set `{h ≥ k}`, `k = -hmax+1 ..= hmax`,
/// lowest level first.
pub fn extract_contours(field: &HeightField) -> ContourFamily {
    let l = field.interior_side() as i64;
    let hmax = field.geometry().hmax();
    let mut contours = Vec::new();
    let mut visited = vec![false; (l * (l + 1)) as usize];
    for k in (-hmax + 1)..=hmax {
        let in_h = |(x, y): (i64, i64)| field.get_or_zero(x, y) >= k;
        let edge = |i: i64, j: i64, d: Dir| {
            let (r, lf) = d.cells(i, j);
            in_h(r) && !in_h(lf)
        };
        visited.iter_mut().for_each(|v| *v = false);
        for j in 0..=l {
            for i in 0..l {
                if visited[(j * l + i) as usize] || !edge(i, j, Dir::E) {
                    continue;
                }
                let mut verts = Vec::new();
                let (mut v, mut d) = ((i, j), Dir::E);
                loop {
                    if d == Dir::E {
                        visited[(v.1 * l + v.0) as usize] = true;
                    }
                    verts.push(v);
                    let s = d.step();
                    v = (v.0 + s.0, v.1 + s.1);
                    d = [d.right(), d, d.left()]
                        .into_iter()
                        .find(|&nd| edge(v.0, v.1, nd))
                        .expect("level-set boundary is closed");
                    if v == (i, j) && d == Dir::E {
                        break;
                    }
                }
                contours.push(OrientedContour::from_grid_vertices(verts).expect("traced boundary is a valid polygon"));
            }
        }
    }
    ContourFamily { contours }
}

/// `h = Σ sign(γ)·χ_int(γ)`, rejecting incompatible families and contours
/// that leave the interior.
pub fn reconstruct_height(family: &ContourFamily, geometry: LatticeGeometry) -> Result<HeightField, ContourError> {
    check_compatible(&family.contours)?;
    let l = geometry.interior_side() as i64;
    let mut acc = vec![0i64; (l * l) as usize];
    for (k, c) in family.contours.iter().enumerate() {
        if c.vertices.iter().any(|&(i, j)| i < 0 || j < 0 || i > l || j > l) {
            return Err(ContourError::Malformed(format!("contour {k} leaves the box")));
        }
        for &(x, y) in &c.interior {
            acc[(y * l + x) as usize] += c.sign.value();
        }
    }
    let hmax = geometry.hmax() as i64;
    if let Some(pos) = acc.iter().position(|v| v.abs() > hmax) {
        return Err(LatticeError::HeightOutOfRange {
            x: pos % l as usize,
            y: pos / l as usize,
            value: acc[pos] as i32,
            hmax: hmax as i32,
        }
        .into());
    }
    let values: Vec<i32> = acc.into_iter().map(|v| v as i32).collect();
    Ok(HeightField::from_values(geometry, &values)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(l: usize, hmax: i32) -> LatticeGeometry {
        LatticeGeometry::with_interior(l, hmax).unwrap()
    }

    #[test]
    fn flat_field_has_no_contours() {
        assert!(extract_contours(&HeightField::flat(geom(4, 2))).is_empty());
    }

    #[test]
    fn single_raised_site() {
        let g = geom(3, 2);
        let f = HeightField::from_rows(g, &[vec![0, 0, 0], vec![0, 1, 0], vec![0, 0, 0]]).unwrap();
        let fam = extract_contours(&f);
        assert_eq!(fam.len(), 1);
        let c = &fam.contours()[0];
        assert_eq!(c.sign(), Sign::Plus);
        assert_eq!((c.length(), c.interior_area(), c.signed_volume()), (4, 1, 1));
        assert_eq!(c.doubled_vertices(), vec![[3, 5], [5, 5], [5, 3], [3, 3]]);
    }

    #[test]
    fn lowered_block() {
        let g = geom(4, 2);
        let f = HeightField::from_rows(g, &[vec![0; 4], vec![0, -1, -1, 0], vec![0, -1, -1, 0], vec![0; 4]]).unwrap();
        let fam = extract_contours(&f);
        assert_eq!(fam.len(), 1);
        let c = &fam.contours()[0];
        assert_eq!((c.sign(), c.length(), c.signed_volume()), (Sign::Minus, 8, -4));
    }

    #[test]
    fn height_two_gives_stacked_copies() {
        let g = geom(3, 2);
        let f = HeightField::from_rows(g, &[vec![0, 0, 0], vec![0, 2, 0], vec![0, 0, 0]]).unwrap();
        let fam = extract_contours(&f);
        assert_eq!(fam.len(), 2);
        assert_eq!(fam.contours()[0], fam.contours()[1]);
        assert_eq!(fam.total_length(), 8);
    }

    #[test]
    fn nested_rectangles_reconstruct() {
        let g = geom(6, 3);
        let outer = OrientedContour::rectangle(0, 0, 6, 5, Sign::Plus).unwrap();
        let inner = OrientedContour::rectangle(2, 1, 4, 3, Sign::Plus).unwrap();
        let fam = ContourFamily::new(vec![outer.clone(), inner.clone()]).unwrap();
        let f = reconstruct_height(&fam, g).unwrap();
        for y in 0..6i64 {
            for x in 0..6i64 {
                let expect = outer.contains_cell(x, y) as i32 + inner.contains_cell(x, y) as i32;
                let direct = (x < 6 && y < 5) as i32 + ((2..4).contains(&x) && (1..3).contains(&y)) as i32;
                assert_eq!(expect, direct);
                assert_eq!(f.get(x as usize, y as usize), direct);
            }
        }
    }

    #[test]
    fn overlapping_interiors_rejected() {
        let a = OrientedContour::rectangle(0, 0, 3, 3, Sign::Plus).unwrap();
        let b = OrientedContour::rectangle(2, 2, 4, 4, Sign::Plus).unwrap();
        match ContourFamily::new(vec![a, b]) {
            Err(ContourError::Incompatible { first: 0, second: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn opposite_bond_orientation_rejected() {
        // a ⊕ square inside a ⊖ square sharing its left edge
        let a = OrientedContour::rectangle(0, 0, 3, 3, Sign::Minus).unwrap();
        let b = OrientedContour::rectangle(0, 0, 1, 1, Sign::Plus).unwrap();
        assert!(matches!(
            ContourFamily::new(vec![a, b]),
            Err(ContourError::Incompatible { reason: "shared bond with opposite orientation", .. })
        ));
    }

    #[test]
    fn pinched_contour_keeps_cells_separate() {
        // diagonal neighbours are separate components of the level set
        let g = geom(2, 1);
        let f = HeightField::from_rows(g, &[vec![1, 0], vec![0, 1]]).unwrap();
        let fam = extract_contours(&f);
        assert_eq!(fam.len(), 2);
        assert!(fam.contours().iter().all(|c| c.length() == 4));
        // the complement version: one ⊖ contour that touches itself at the centre
        let f = HeightField::from_rows(g, &[vec![-1, 0], vec![0, -1]]).unwrap();
        let fam = extract_contours(&f);
        assert_eq!(fam.len(), 1);
        let c = &fam.contours()[0];
        assert_eq!((c.length(), c.signed_volume()), (8, -2));
        assert!(c.is_bond_simple());
        assert_eq!(reconstruct_height(&fam, g).unwrap(), f);
    }

    #[test]
    fn json_round_trip() {
        let g = geom(4, 2);
        let f = HeightField::from_rows(g, &[vec![0, 1, 1, 0], vec![0, 2, 1, 0], vec![-1, 0, 0, 0], vec![-1, -1, 0, 1]])
            .unwrap();
        let fam = extract_contours(&f);
        let text = fam.to_json().unwrap();
        assert!(text.contains("\"sign\":\"+\""));
        let back = ContourFamily::from_json(&text).unwrap();
        assert_eq!(back, fam);
        assert_eq!(reconstruct_height(&back, g).unwrap(), f);
    }

    #[test]
    fn json_sign_must_match_orientation() {
        let text = r#"[{"sign":"-","vertices":[[3,5],[5,5],[5,3],[3,3]]}]"#;
        assert!(matches!(ContourFamily::from_json(text), Err(ContourError::Malformed(_))));
    }

    #[test]
    fn canonical_key_ignores_rotation() {
        let c = OrientedContour::rectangle(1, 1, 3, 2, Sign::Plus).unwrap();
        let mut rotated = c.doubled_vertices();
        rotated.rotate_left(3);
        let r = OrientedContour::from_doubled(&rotated).unwrap();
        assert_eq!(c.canonical_key(), r.canonical_key());
    }
}
