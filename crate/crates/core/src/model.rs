//! Correlation matrices and their upper-Cholesky parametrization.
//!
//! A correlation matrix `R` factors uniquely as `R = U Uᵗ` with `U` upper
//! triangular and positive on the diagonal. The unit diagonal of `R` is
//! equivalent to every row of `U` having unit Euclidean norm, so row `i`
//! (0-based) is a unit vector in `p - i` dimensions with positive first
//! entry: a point on a hemisphere.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Tolerance on unit norms and unit diagonals.
pub const UNIT_TOL: f64 = 1e-12;
/// Cholesky pivots at or below this value count as a failed factorization.
pub const PIVOT_TOL: f64 = 1e-14;

/// Dense, row-major, symmetric positive-definite matrix with unit diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { dim, entries }
    }

    /// Validates and stores a row-major matrix.
    ///
    /// The upper triangle is canonical: the lower triangle must agree with it
    /// to within [`UNIT_TOL`] and is then overwritten by it, and the diagonal is
    /// stored as exactly one.
    pub fn from_row_major(dim: usize, mut entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension(0));
        }
        if entries.len() != dim * dim {
            return Err(Error::InvalidCorrelation(format!(
                "expected {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        for i in 0..dim {
            let d = entries[i * dim + i];
            if !((d - 1.0).abs() <= UNIT_TOL) {
                return Err(Error::InvalidCorrelation(format!(
                    "diagonal entry {i} is {d}"
                )));
            }
            entries[i * dim + i] = 1.0;
            for j in (i + 1)..dim {
                let upper = entries[i * dim + j];
                let lower = entries[j * dim + i];
                if !((upper - lower).abs() <= UNIT_TOL) {
                    return Err(Error::InvalidCorrelation(format!(
                        "asymmetric at ({i}, {j})"
                    )));
                }
                entries[j * dim + i] = upper;
            }
        }
        let m = Self { dim, entries };
        m.validate()?;
        Ok(m)
    }

    /// Wraps entries whose symmetry and unit diagonal hold by construction;
    /// positive definiteness is not checked.
    pub(crate) fn from_product_unchecked(dim: usize, entries: Vec<f64>) -> Self {
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }

    /// Strictly-upper entries `(i, j, r_ij)` with `i < j`, row by row.
    pub fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let p = self.dim;
        (0..p).flat_map(move |i| ((i + 1)..p).map(move |j| (i, j, self.entries[i * p + j])))
    }

    /// Checks every invariant, including positive definiteness.
    pub fn validate(&self) -> Result<()> {
        let p = self.dim;
        for i in 0..p {
            if (self.get(i, i) - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidCorrelation(format!(
                    "diagonal entry {i} is {}",
                    self.get(i, i)
                )));
            }
            for j in (i + 1)..p {
                let r = self.get(i, j);
                if r != self.get(j, i) {
                    return Err(Error::InvalidCorrelation(format!(
                        "asymmetric at ({i}, {j})"
                    )));
                }
                if !(r.abs() < 1.0) {
                    return Err(Error::InvalidCorrelation(format!(
                        "entry ({i}, {j}) = {r} outside (-1, 1)"
                    )));
                }
            }
        }
        factor_correlation(self).map(|_| ())
    }
}

/// Upper-triangular factor with unit-norm rows and positive diagonal.
///
/// Rows are packed: row `i` stores only its `p - i` entries starting at the
/// diagonal, so `row(i)[0]` is `u_ii` and `row(i)[k]` is `U[i][i + k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct UpperCholeskyFactor {
    dim: usize,
    packed: Vec<f64>,
}

/// Number of packed entries for a `dim × dim` factor.
#[inline]
pub fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

impl UpperCholeskyFactor {
    pub fn identity(dim: usize) -> Self {
        let mut packed = vec![0.0; packed_len(dim)];
        for i in 0..dim {
            packed[Self::offset(dim, i)] = 1.0;
        }
        Self { dim, packed }
    }

    #[inline]
    fn offset(dim: usize, row: usize) -> usize {
        // sum_{k < row} (dim - k)
        row * dim - row * row.saturating_sub(1) / 2
    }

    /// Builds a factor from its rows; row `i` must have `dim - i` entries.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::ZeroDimension(0));
        }
        let mut packed = Vec::with_capacity(packed_len(dim));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim - i {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} entries, expected {}",
                    row.len(),
                    dim - i
                )));
            }
            packed.extend_from_slice(row);
        }
        Self::from_packed(dim, packed)
    }

    /// Builds a factor from packed rows, validating every invariant.
    pub fn from_packed(dim: usize, mut packed: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension(0));
        }
        if packed.len() != packed_len(dim) {
            return Err(Error::InvalidArgument(format!(
                "packed factor needs {} entries, got {}",
                packed_len(dim),
                packed.len()
            )));
        }
        let last = packed_len(dim) - 1;
        if (packed[last] - 1.0).abs() <= UNIT_TOL {
            packed[last] = 1.0;
        }
        let f = Self { dim, packed };
        f.validate()?;
        Ok(f)
    }

    pub(crate) fn from_packed_unchecked(dim: usize, packed: Vec<f64>) -> Self {
        Self { dim, packed }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let start = Self::offset(self.dim, i);
        &self.packed[start..start + self.dim - i]
    }

    #[inline]
    pub fn diagonal(&self, i: usize) -> f64 {
        self.packed[Self::offset(self.dim, i)]
    }

    /// Entry `U[i][j]` of the full matrix (zero below the diagonal).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j < i {
            0.0
        } else {
            self.row(i)[j - i]
        }
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..self.dim {
            let row = self.row(i);
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !((norm - 1.0).abs() <= UNIT_TOL) {
                return Err(Error::RowNorm { row: i, norm });
            }
            if !(row[0] > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "diagonal entry {i} is {}",
                    row[0]
                )));
            }
        }
        if self.diagonal(self.dim - 1) != 1.0 {
            return Err(Error::InvalidArgument(
                "last diagonal entry must be exactly 1".into(),
            ));
        }
        Ok(())
    }
}

/// Unit vector with positive first coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct HemisphereVector {
    coords: Vec<f64>,
}

impl HemisphereVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidHemisphere("empty vector".into()));
        }
        let norm = coords.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::InvalidHemisphere(format!("norm {norm}")));
        }
        if !(coords[0] > 0.0) {
            return Err(Error::InvalidHemisphere(format!(
                "first coordinate {}",
                coords[0]
            )));
        }
        Ok(Self { coords })
    }

    /// The single point of the zero-dimensional hemisphere.
    pub fn pole() -> Self {
        Self { coords: vec![1.0] }
    }

    pub(crate) fn from_unit_unchecked(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn ambient_dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn first(&self) -> f64 {
        self.coords[0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }
}

/// Assembles a factor from one hemisphere vector per row.
pub fn factor_from_rows(rows: &[HemisphereVector]) -> Result<UpperCholeskyFactor> {
    UpperCholeskyFactor::from_rows(rows.iter().map(|r| r.as_slice().to_vec()).collect())
}

/// Writes the row-major product `U Uᵗ` of a packed factor into `out`.
pub(crate) fn product_into(dim: usize, packed: &[f64], out: &mut [f64]) {
    let p = dim;
    let mut offsets = Vec::with_capacity(p);
    let mut acc = 0;
    for i in 0..p {
        offsets.push(acc);
        acc += p - i;
    }
    for j in 0..p {
        out[j * p + j] = 1.0;
        let row_j = &packed[offsets[j]..offsets[j] + p - j];
        for k in (j + 1)..p {
            let row_k = &packed[offsets[k]..offsets[k] + p - k];
            let tail = &row_j[k - j..];
            let r: f64 = tail.iter().zip(row_k).map(|(a, b)| a * b).sum();
            out[j * p + k] = r;
            out[k * p + j] = r;
        }
    }
}

/// `R = U Uᵗ`.
pub fn build_correlation(u: &UpperCholeskyFactor) -> Result<CorrelationMatrix> {
    let p = u.dim();
    for i in 0..p {
        let norm = u.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::RowNorm { row: i, norm });
        }
    }
    let mut entries = vec![0.0; p * p];
    product_into(p, u.packed(), &mut entries);
    if let Some((i, j, r)) = (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, entries[i * p + j]))
        .find(|&(_, _, r)| !(r.abs() < 1.0))
    {
        return Err(Error::InvalidCorrelation(format!(
            "entry ({i}, {j}) = {r} outside (-1, 1)"
        )));
    }
    Ok(CorrelationMatrix::from_product_unchecked(p, entries))
}

/// In-place lower Cholesky factorization of a row-major SPD matrix.
///
/// On success the lower triangle holds `L` with `A = L Lᵗ`; the strict upper
/// triangle is left untouched. Returns the failing pivot index otherwise.
fn lower_cholesky_in_place(n: usize, a: &mut [f64]) -> std::result::Result<(), (usize, f64)> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > PIVOT_TOL) {
            return Err((j, d));
        }
        let ljj = d.sqrt();
        a[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / ljj;
        }
    }
    Ok(())
}

/// Upper Cholesky factor of `R`, obtained by factoring the index-reversed
/// matrix with the lower kernel and reversing back.
///
/// A failed pivot is reported with its index in the original ordering.
pub fn factor_correlation(r: &CorrelationMatrix) -> Result<UpperCholeskyFactor> {
    let p = r.dim();
    let mut rev = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            rev[i * p + j] = r.get(p - 1 - i, p - 1 - j);
        }
    }
    lower_cholesky_in_place(p, &mut rev).map_err(|(j, pivot)| Error::NotPositiveDefinite {
        index: p - 1 - j,
        pivot,
    })?;
    let mut packed = Vec::with_capacity(packed_len(p));
    for i in 0..p {
        for j in i..p {
            packed.push(rev[(p - 1 - i) * p + (p - 1 - j)]);
        }
    }
    Ok(UpperCholeskyFactor::from_packed_unchecked(p, packed))
}

/// `ln det JΦ(U) = p ln 2 + Σ_{i=1}^{p-1} i ln u_ii` (1-based `i`).
pub fn log_jacobian(u: &UpperCholeskyFactor) -> f64 {
    let p = u.dim();
    let mut s = p as f64 * LN_2;
    for i in 0..p.saturating_sub(1) {
        s += (i + 1) as f64 * u.diagonal(i).ln();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::RngStream;
    use proptest::prelude::*;

    /// Random factor with every diagonal entry at least 0.05; smaller pivots
    /// make the 1e-10 round trip ill-conditioned.
    pub(crate) fn random_factor(p: usize, rng: &mut RngStream) -> UpperCholeskyFactor {
        let rows = (0..p)
            .map(|i| {
                let mut v = vec![0.0; p - i];
                rng.unit_direction(&mut v);
                v[0] = v[0].abs().max(0.05);
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| x / n).collect()
            })
            .collect::<Vec<Vec<f64>>>();
        UpperCholeskyFactor::from_rows(rows).unwrap()
    }

    /// Factor of a uniformly distributed correlation matrix. Arbitrary unit
    /// rows can be conditioned badly enough that no double-precision
    /// factorization round-trips to 1e-10.
    fn uniform_law_factor(p: usize, rng: &mut RngStream) -> UpperCholeskyFactor {
        let rows = (1..=p)
            .map(|i| {
                crate::row::exact_row_sample(&crate::row::RowTarget::new(p, i).unwrap(), rng)
                    .into_vec()
            })
            .collect();
        UpperCholeskyFactor::from_rows(rows).unwrap()
    }

    /// Cyclic Jacobi eigenvalues of a small symmetric matrix.
    fn jacobi_eigenvalues(n: usize, mut a: Vec<f64>) -> Vec<f64> {
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i * n + j].powi(2))
                .sum();
            if off < 1e-24 {
                break;
            }
            for pr in 0..n {
                for q in (pr + 1)..n {
                    let apq = a[pr * n + q];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[pr * n + pr]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + pr];
                        let akq = a[k * n + q];
                        a[k * n + pr] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[pr * n + k];
                        let aqk = a[q * n + k];
                        a[pr * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i * n + i]).collect()
    }

    #[test]
    fn packed_offsets() {
        let u = UpperCholeskyFactor::identity(4);
        assert_eq!(u.row(0), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(u.row(2), &[1.0, 0.0]);
        assert_eq!(u.row(3), &[1.0]);
        assert_eq!(u.packed().len(), 10);
    }

    #[test]
    fn identity_maps_to_identity() {
        let r = build_correlation(&UpperCholeskyFactor::identity(3)).unwrap();
        assert_eq!(r, CorrelationMatrix::identity(3));
        assert_eq!(
            factor_correlation(&r).unwrap(),
            UpperCholeskyFactor::identity(3)
        );
    }

    #[test]
    fn two_by_two_product() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = UpperCholeskyFactor::from_rows(vec![vec![h, h], vec![1.0]]).unwrap();
        let r = build_correlation(&u).unwrap();
        assert!((r.get(0, 1) - h).abs() < 1e-15);
        assert_eq!(r.get(0, 1), r.get(1, 0));
    }

    #[test]
    fn two_by_two_factor() {
        let r = CorrelationMatrix::from_row_major(2, vec![1.0, 0.5, 0.5, 1.0]).unwrap();
        let u = factor_correlation(&r).unwrap();
        assert!((u.row(0)[0] - 0.75f64.sqrt()).abs() < 1e-15);
        assert!((u.row(0)[1] - 0.5).abs() < 1e-15);
        assert_eq!(u.row(1), &[1.0]);
    }

    #[test]
    fn random_factor_gives_spd_unit_diagonal() {
        let mut rng = RngStream::new(11);
        for _ in 0..20 {
            let u = random_factor(5, &mut rng);
            let r = build_correlation(&u).unwrap();
            for i in 0..5 {
                assert!((r.get(i, i) - 1.0).abs() <= 1e-12);
            }
            let eig = jacobi_eigenvalues(5, r.as_slice().to_vec());
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min > 0.0, "min eigenvalue {min}");
            r.validate().unwrap();
        }
    }

    #[test]
    fn four_by_four_round_trip() {
        let mut rng = RngStream::new(12);
        let u = random_factor(4, &mut rng);
        let r = build_correlation(&u).unwrap();
        let back = build_correlation(&factor_correlation(&r).unwrap()).unwrap();
        for (a, b) in r.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn not_positive_definite_reports_pivot() {
        // r_12 = r_23 = 0.9, r_13 = -0.9 is not PSD; the reversed kernel fails on the first row.
        let r = CorrelationMatrix {
            dim: 3,
            entries: vec![1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0],
        };
        match factor_correlation(&r) {
            Err(Error::NotPositiveDefinite { index, .. }) => assert_eq!(index, 0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(CorrelationMatrix::from_row_major(3, r.entries.clone()).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(CorrelationMatrix::from_row_major(2, vec![1.0, 0.2, 0.3, 1.0]).is_err());
        assert!(CorrelationMatrix::from_row_major(2, vec![1.1, 0.2, 0.2, 1.0]).is_err());
        assert!(CorrelationMatrix::from_row_major(2, vec![1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(matches!(
            UpperCholeskyFactor::from_rows(vec![vec![0.6, 0.6], vec![1.0]]),
            Err(Error::RowNorm { row: 0, .. })
        ));
        assert!(UpperCholeskyFactor::from_rows(vec![vec![-0.6, 0.8], vec![1.0]]).is_err());
        assert!(HemisphereVector::new(vec![-1.0]).is_err());
        assert!(HemisphereVector::new(vec![0.6, 0.7]).is_err());
        assert!(HemisphereVector::new(vec![0.6, -0.8]).is_ok());
    }

    #[test]
    fn build_rejects_corrupted_factor() {
        let u = UpperCholeskyFactor::from_packed_unchecked(2, vec![0.5, 0.5, 1.0]);
        assert!(matches!(
            build_correlation(&u),
            Err(Error::RowNorm { row: 0, .. })
        ));
    }

    #[test]
    fn log_jacobian_values() {
        let u = UpperCholeskyFactor::identity(3);
        assert!((log_jacobian(&u) - 3.0 * LN_2).abs() < 1e-15);
        let u = UpperCholeskyFactor::from_rows(vec![vec![0.5, 0.75f64.sqrt()], vec![1.0]]).unwrap();
        assert!((log_jacobian(&u) - LN_2).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn round_trip_recovers_factor(seed in any::<u64>(), p in 1usize..24) {
            let mut rng = RngStream::new(seed);
            let u = uniform_law_factor(p, &mut rng);
            let r = build_correlation(&u).unwrap();
            let back = factor_correlation(&r).unwrap();
            for (a, b) in u.packed().iter().zip(back.packed()) {
                prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
            }
        }

        #[test]
        fn log_jacobian_ignores_off_diagonal_signs(seed in any::<u64>(), p in 2usize..8, mask in any::<u64>()) {
            let mut rng = RngStream::new(seed);
            let u = random_factor(p, &mut rng);
            let mut flipped = Vec::new();
            let mut bit = 0;
            for i in 0..p {
                let mut row = u.row(i).to_vec();
                for x in row.iter_mut().skip(1) {
                    if mask >> (bit % 64) & 1 == 1 {
                        *x = -*x;
                    }
                    bit += 1;
                }
                flipped.push(row);
            }
            let v = UpperCholeskyFactor::from_rows(flipped).unwrap();
            prop_assert_eq!(log_jacobian(&u), log_jacobian(&v));
        }
    }
}
