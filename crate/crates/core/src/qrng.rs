//! Sobol' points in the unit cube, randomized by digital shifts.
//!
//! Direction numbers come from the Joe-Kuo `new-joe-kuo-6` table (first 1000
//! dimensions, BSD-3-Clause, S. Joe and F. Y. Kuo). Points are generated in
//! Gray-code order with 32-bit resolution, so the first point is the origin and
//! the second is `(0.5, ..., 0.5)`.
//!
//! A digital shift XORs every coordinate, placed in the top 32 bits of a 64-bit
//! word, with one 64-bit shift per dimension. Shifts are the first `dimension`
//! outputs of `ChaCha8Rng::seed_from_u64(seed)`, which is portable across
//! platforms. Shifted values are clamped to `[2^-64, 1 - 2^-53]`.

use crate::error::{Error, Result};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIRECTION_TABLE: &str = include_str!("../data/new-joe-kuo-6.1000");

/// Largest dimension covered by the embedded direction-number table.
pub const MAX_DIMENSION: usize = 1000;

const BITS: usize = 32;

pub const CLAMP_LO: f64 = 1.0 / 18_446_744_073_709_551_616.0; // 2^-64
pub const CLAMP_HI: f64 = 1.0 - f64::EPSILON / 2.0; // 1 - 2^-53

/// Stream identifier used for pseudorandom comparison points, distinct from
/// the stream that draws digital shifts.
const PSEUDORANDOM_STREAM: u64 = 1;

/// A set of points in the unit hypercube, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dimension: usize,
    values: Vec<f64>,
}

impl PointSet {
    pub fn new(dimension: usize, values: Vec<f64>) -> Result<Self> {
        if dimension == 0 || !values.len().is_multiple_of(dimension) {
            return Err(Error::InvalidArgument(format!(
                "{} values cannot be split into points of dimension {dimension}",
                values.len()
            )));
        }
        Ok(Self { dimension, values })
    }

    /// Repeats one point `m` times.
    pub fn repeated(point: &[f64], m: usize) -> Result<Self> {
        let values = point.iter().copied().cycle().take(point.len() * m).collect();
        Self::new(point.len(), values)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.values[index * self.dimension..(index + 1) * self.dimension]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dimension)
    }

    /// The first three coordinates of point `index`.
    pub fn cube_point(&self, index: usize) -> [f64; 3] {
        let p = self.point(index);
        [p[0], p[1], p[2]]
    }
}

/// Unrandomized Sobol' points as 32-bit binary fractions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSobol {
    dimension: usize,
    coords: Vec<u32>,
}

impl RawSobol {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn bits(&self, index: usize, coord: usize) -> u32 {
        self.coords[index * self.dimension + coord]
    }

    /// Point `index` as exact binary fractions in `[0, 1)`.
    pub fn point(&self, index: usize) -> Vec<f64> {
        (0..self.dimension)
            .map(|j| self.bits(index, j) as f64 / 4_294_967_296.0)
            .collect()
    }

    pub fn to_points(&self) -> PointSet {
        let values = self.coords.iter().map(|&c| c as f64 / 4_294_967_296.0).collect();
        PointSet {
            dimension: self.dimension,
            values,
        }
    }
}

fn direction_vectors(dim_index: usize) -> Result<[u32; BITS]> {
    let mut v = [0u32; BITS];
    if dim_index == 0 {
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = 1 << (BITS - 1 - i);
        }
        return Ok(v);
    }
    // Line 0 is the header and line k describes dimension k + 1.
    let line = DIRECTION_TABLE.lines().nth(dim_index).ok_or_else(|| {
        Error::InvalidArgument(format!("no direction numbers for dimension {}", dim_index + 1))
    })?;
    let mut fields = line.split_whitespace().map(|f| f.parse::<u32>());
    let parse_err = || Error::InvalidArgument(format!("malformed direction-number row {line:?}"));
    let _d = fields.next().ok_or_else(parse_err)?.map_err(|_| parse_err())?;
    let s = fields.next().ok_or_else(parse_err)?.map_err(|_| parse_err())? as usize;
    let a = fields.next().ok_or_else(parse_err)?.map_err(|_| parse_err())?;
    let m: Vec<u32> = fields
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err())?;
    if m.len() != s || s == 0 || s >= BITS {
        return Err(parse_err());
    }
    for i in 0..s {
        v[i] = m[i] << (BITS - 1 - i);
    }
    for i in s..BITS {
        v[i] = v[i - s] ^ (v[i - s] >> s);
        for k in 1..s {
            if (a >> (s - 1 - k)) & 1 == 1 {
                v[i] ^= v[i - k];
            }
        }
    }
    Ok(v)
}

/// The first `m` Sobol' points (index 0 included) in `dimension` dimensions.
pub fn sobol_raw(dimension: usize, m: usize) -> Result<RawSobol> {
    if dimension == 0 || m == 0 {
        return Err(Error::InvalidArgument(format!(
            "dimension and length must be positive (dimension = {dimension}, m = {m})"
        )));
    }
    if dimension > MAX_DIMENSION {
        return Err(Error::InvalidArgument(format!(
            "dimension {dimension} exceeds the direction-number table ({MAX_DIMENSION})"
        )));
    }
    if m as u64 > 1u64 << BITS {
        return Err(Error::InvalidArgument(format!(
            "at most 2^{BITS} points are available, requested {m}"
        )));
    }
    let directions = (0..dimension)
        .map(direction_vectors)
        .collect::<Result<Vec<_>>>()?;
    let mut coords = Vec::with_capacity(m * dimension);
    let mut current = vec![0u32; dimension];
    coords.extend_from_slice(&current);
    for i in 1..m {
        let c = (i - 1).trailing_ones() as usize;
        for (x, v) in current.iter_mut().zip(&directions) {
            *x ^= v[c];
        }
        coords.extend_from_slice(&current);
    }
    Ok(RawSobol { dimension, coords })
}

/// The per-dimension shifts drawn for `seed`.
pub fn shift_vector(dimension: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dimension).map(|_| rng.next_u64()).collect()
}

pub fn clamp_unit(x: f64) -> f64 {
    x.clamp(CLAMP_LO, CLAMP_HI)
}

/// Digitally shifts `raw` with explicit per-dimension shifts.
pub fn digital_shift_with(raw: &RawSobol, shifts: &[u64]) -> PointSet {
    assert_eq!(shifts.len(), raw.dimension, "one shift per dimension");
    let values = raw
        .coords
        .chunks_exact(raw.dimension)
        .flat_map(|row| {
            row.iter()
                .zip(shifts)
                .map(|(&c, &s)| clamp_unit((((c as u64) << 32) ^ s) as f64 * CLAMP_LO))
        })
        .collect();
    PointSet {
        dimension: raw.dimension,
        values,
    }
}

/// Digitally shifts `raw` with shifts drawn from `seed`.
pub fn digital_shift(raw: &RawSobol, seed: u64) -> PointSet {
    digital_shift_with(raw, &shift_vector(raw.dimension, seed))
}

/// A randomized Sobol' sequence: `m` points in `dimension` dimensions, shifted
/// with the seed's shift vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolStream {
    pub dimension: usize,
    pub m: usize,
    pub seed: u64,
    pub points: PointSet,
}

impl SobolStream {
    pub fn new(dimension: usize, m: usize, seed: u64) -> Result<Self> {
        let raw = sobol_raw(dimension, m)?;
        Ok(Self {
            dimension,
            m,
            seed,
            points: digital_shift(&raw, seed),
        })
    }
}

/// A uniform draw in the open interval (0, 1) with 53 random bits.
pub fn open_uniform<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Independent uniform points, for comparisons against the Sobol' estimators.
pub fn pseudorandom_points(dimension: usize, m: usize, seed: u64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PSEUDORANDOM_STREAM);
    let values = (0..dimension * m).map(|_| open_uniform(&mut rng)).collect();
    PointSet { dimension, values }
}

/// A generator for the given `(seed, stream)` pair.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sizes_rejected() {
        assert!(matches!(sobol_raw(0, 4), Err(Error::InvalidArgument(_))));
        assert!(matches!(sobol_raw(3, 0), Err(Error::InvalidArgument(_))));
        assert!(sobol_raw(MAX_DIMENSION + 1, 4).is_err());
        assert!(sobol_raw(MAX_DIMENSION, 4).is_ok());
    }

    #[test]
    fn first_points() {
        let raw = sobol_raw(3, 2).unwrap();
        assert_eq!(raw.point(0), vec![0.0, 0.0, 0.0]);
        assert_eq!(raw.point(1), vec![0.5, 0.5, 0.5]);
        let raw = sobol_raw(3, 1).unwrap();
        assert_eq!(raw.len(), 1);
    }

    #[test]
    fn matches_reference_prefix() {
        // Joe-Kuo reference generator, dimensions 1-3, points 2..8 in Gray-code order.
        let expected = [
            [0.75, 0.25, 0.25],
            [0.25, 0.75, 0.75],
            [0.375, 0.375, 0.625],
            [0.875, 0.875, 0.125],
            [0.625, 0.125, 0.875],
            [0.125, 0.625, 0.375],
        ];
        let raw = sobol_raw(3, 8).unwrap();
        for (i, e) in expected.iter().enumerate() {
            assert_eq!(raw.point(i + 2), e.to_vec(), "point {}", i + 2);
        }
    }

    #[test]
    fn zero_shift_is_identity_except_origin() {
        let raw = sobol_raw(3, 64).unwrap();
        let shifted = digital_shift_with(&raw, &[0, 0, 0]);
        assert_eq!(shifted.point(0), &[CLAMP_LO; 3]);
        for i in 1..64 {
            assert_eq!(shifted.point(i), raw.point(i).as_slice());
        }
    }

    #[test]
    fn shift_is_deterministic() {
        let raw = sobol_raw(3, 128).unwrap();
        let a = digital_shift(&raw, 99);
        let b = digital_shift(&raw, 99);
        assert!(a
            .values
            .iter()
            .zip(&b.values)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, digital_shift(&raw, 100));
    }

    #[test]
    fn point_set_shape_checked() {
        assert!(PointSet::new(3, vec![0.5; 7]).is_err());
        let p = PointSet::repeated(&[0.1, 0.2, 0.3], 4).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.point(3), &[0.1, 0.2, 0.3]);
    }
}
