//! Spherical configurations and the code families built from them.
//!
//! A [`SphericalConfig`] is an ordered list of `n` unit vectors in `R^d`,
//! stored row-major. Builders cover regular simplices, subsets of the
//! orthoplex `{±e_1, …, ±e_d}`, low/high-entropy block codes, orthogonal
//! direct sums and seeded random configurations.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_regime, Error, Result};

/// Default tolerance on `| ‖x‖ − 1 |` accepted at construction.
pub const UNIT_TOL: f64 = 1e-12;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `n` unit vectors in `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphericalConfig {
    d: usize,
    n: usize,
    data: Vec<f64>,
}

impl SphericalConfig {
    /// Builds a configuration from rows, checking unit norm to [`UNIT_TOL`].
    pub fn new(d: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_tolerance(d, rows, UNIT_TOL)
    }

    pub fn with_tolerance(d: usize, rows: Vec<Vec<f64>>, unit_tol: f64) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * d);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != d {
                return Err(Error::Dimension(format!(
                    "row {i} has {} coordinates, expected {d}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Self::from_flat(d, n, data, unit_tol)
    }

    /// Row-major constructor; `data.len()` must equal `n * d`.
    pub fn from_flat(d: usize, n: usize, data: Vec<f64>, unit_tol: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Argument("ambient dimension must be at least 1".into()));
        }
        if n == 0 {
            return Err(Error::Argument("configuration must contain at least one point".into()));
        }
        if data.len() != n * d {
            return Err(Error::Dimension(format!(
                "expected {} coordinates for n={n}, d={d}, got {}",
                n * d,
                data.len()
            )));
        }
        let cfg = SphericalConfig { d, n, data };
        for i in 0..n {
            let r = norm(cfg.row(i));
            if !r.is_finite() || (r - 1.0).abs() > unit_tol {
                return Err(Error::NotUnit { row: i, norm: r, tol: unit_tol });
            }
        }
        Ok(cfg)
    }

    /// Normalizes every row of `rows` and builds the configuration.
    ///
    /// Zero rows cannot be normalized and are rejected.
    pub fn normalized(d: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let s = norm(&r);
                if s == 0.0 || !s.is_finite() {
                    return Err(Error::Argument(format!("row {i} cannot be normalized")));
                }
                Ok(r.into_iter().map(|x| x / s).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Self::new(d, rows)
    }

    /// Returns a copy with every row rescaled to exactly unit length.
    pub fn renormalize(&self) -> Self {
        let mut data = self.data.clone();
        for row in data.chunks_mut(self.d) {
            let s = norm(row);
            row.iter_mut().for_each(|x| *x /= s);
        }
        SphericalConfig { d: self.d, n: self.n, data }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Gram matrix `G[i][j] = <x_i, x_j>`.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| dot(self.row(i), self.row(j))).collect())
            .collect()
    }

    /// Sub-configuration with the given row indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Argument("empty selection".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(Error::Argument(format!("index {i} out of range for n={}", self.n)));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(SphericalConfig { d: self.d, n: indices.len(), data })
    }

    /// Applies `x -> R x` to every row, `rotation` given row-major `d × d`.
    pub fn transform(&self, rotation: &[f64]) -> Result<Self> {
        let d = self.d;
        if rotation.len() != d * d {
            return Err(Error::Dimension(format!("rotation must be {d}x{d}")));
        }
        let data = self
            .rows()
            .flat_map(|x| (0..d).map(move |r| dot(&rotation[r * d..(r + 1) * d], x)))
            .collect();
        SphericalConfig::from_flat(d, self.n, data, 1e-10)
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigRepr {
    d: usize,
    n: usize,
    vectors: Vec<Vec<f64>>,
}

impl Serialize for SphericalConfig {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConfigRepr { d: self.d, n: self.n, vectors: self.to_rows() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SphericalConfig {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = ConfigRepr::deserialize(de)?;
        if repr.vectors.len() != repr.n {
            return Err(serde::de::Error::custom(format!(
                "n = {} but {} vectors given",
                repr.n,
                repr.vectors.len()
            )));
        }
        SphericalConfig::new(repr.d, repr.vectors).map_err(serde::de::Error::custom)
    }
}

/// Class weights `W` together with `m` unit feature vectors per class.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    weights: SphericalConfig,
    m: usize,
    features: Vec<f64>,
}

impl FeatureSet {
    /// `features` is row-major `n × m × d`.
    pub fn new(weights: SphericalConfig, m: usize, features: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(weights, m, features, UNIT_TOL)
    }

    pub fn with_tolerance(
        weights: SphericalConfig,
        m: usize,
        features: Vec<f64>,
        unit_tol: f64,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::Argument("need at least one example per class".into()));
        }
        let (n, d) = (weights.n(), weights.d());
        if features.len() != n * m * d {
            return Err(Error::Dimension(format!(
                "features must have shape {n}x{m}x{d}, got {} values",
                features.len()
            )));
        }
        for (i, h) in features.chunks(d).enumerate() {
            let r = norm(h);
            if !r.is_finite() || (r - 1.0).abs() > unit_tol {
                return Err(Error::NotUnit { row: i, norm: r, tol: unit_tol });
            }
        }
        Ok(FeatureSet { weights, m, features })
    }

    /// `h_{k,i} = w_k` for every class `k` and example `i`.
    pub fn self_dual(weights: SphericalConfig, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Argument("need at least one example per class".into()));
        }
        let features = weights
            .rows()
            .flat_map(|w| std::iter::repeat_n(w, m).flatten().copied())
            .collect();
        Ok(FeatureSet { weights, m, features })
    }

    /// Independent seeded random weights and features.
    pub fn random(d: usize, n: usize, m: usize, seed: u64) -> Result<Self> {
        let weights = random_config(d, n, seed)?;
        let h = random_config(d, n * m, seed ^ 0x9e37_79b9_7f4a_7c15)?;
        FeatureSet::new(weights, m, h.data)
    }

    pub fn weights(&self) -> &SphericalConfig {
        &self.weights
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.weights.n()
    }

    pub fn d(&self) -> usize {
        self.weights.d()
    }

    /// Feature `h_{k,i}`.
    pub fn feature(&self, k: usize, i: usize) -> &[f64] {
        let d = self.d();
        let start = (k * self.m + i) * d;
        &self.features[start..start + d]
    }

    pub fn features_flat(&self) -> &[f64] {
        &self.features
    }

    pub(crate) fn from_parts_unchecked(weights: SphericalConfig, m: usize, features: Vec<f64>) -> Self {
        FeatureSet { weights, m, features }
    }
}

#[derive(Serialize, Deserialize)]
struct FeatureRepr {
    d: usize,
    n: usize,
    vectors: Vec<Vec<f64>>,
    m: usize,
    features: Vec<Vec<Vec<f64>>>,
}

impl Serialize for FeatureSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.d();
        let features = self
            .features
            .chunks(self.m * d)
            .map(|class| class.chunks(d).map(<[f64]>::to_vec).collect())
            .collect();
        FeatureRepr {
            d,
            n: self.n(),
            vectors: self.weights.to_rows(),
            m: self.m,
            features,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FeatureSet {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = FeatureRepr::deserialize(de)?;
        if repr.vectors.len() != repr.n || repr.features.len() != repr.n {
            return Err(D::Error::custom("vector/feature counts do not match n"));
        }
        let weights = SphericalConfig::new(repr.d, repr.vectors).map_err(D::Error::custom)?;
        let mut flat = Vec::with_capacity(repr.n * repr.m * repr.d);
        for class in repr.features {
            if class.len() != repr.m {
                return Err(D::Error::custom("each class must list m features"));
            }
            for h in class {
                if h.len() != repr.d {
                    return Err(D::Error::custom("feature of wrong dimension"));
                }
                flat.extend(h);
            }
        }
        FeatureSet::new(weights, repr.m, flat).map_err(D::Error::custom)
    }
}

/// Non-increasing positive block dimensions `d_1 ≥ … ≥ d_l`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DimensionTuple(Vec<usize>);

impl DimensionTuple {
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Argument("dimension tuple must have at least one part".into()));
        }
        if parts.contains(&0) {
            return Err(Error::Argument("dimension tuple parts must be positive".into()));
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Argument(format!("dimension tuple {parts:?} is not non-increasing")));
        }
        Ok(DimensionTuple(parts))
    }

    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    /// Sum of the parts.
    pub fn dim(&self) -> usize {
        self.0.iter().sum()
    }

    /// Number of parts.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Points in the block code: `Σ (d_i + 1)`.
    pub fn points(&self) -> usize {
        self.dim() + self.len()
    }

    /// `(2d−n+1, 1, …, 1)` with `n−d` parts.
    pub fn low_entropy(d: usize, n: usize) -> Result<Self> {
        check_regime(d, n)?;
        let l = n - d;
        let mut parts = vec![1; l];
        parts[0] = d - (l - 1);
        DimensionTuple::new(parts)
    }

    /// The balanced tuple with `n−d` parts in `{⌊d/l⌋, ⌈d/l⌉}`.
    pub fn high_entropy(d: usize, n: usize) -> Result<Self> {
        check_regime(d, n)?;
        let l = n - d;
        let (q, r) = (d / l, d % l);
        let parts = (0..l).map(|i| if i < r { q + 1 } else { q }).collect();
        DimensionTuple::new(parts)
    }
}

impl fmt::Display for DimensionTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&s.join("+"))
    }
}

impl FromStr for DimensionTuple {
    type Err = Error;

    /// Parses `"3+1+1"` or `"3,1,1"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split(['+', ','])
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Argument(format!("bad tuple component {p:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        DimensionTuple::new(parts)
    }
}

impl Serialize for DimensionTuple {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DimensionTuple {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let parts = Vec::<usize>::deserialize(de)?;
        DimensionTuple::new(parts).map_err(serde::de::Error::custom)
    }
}

/// Origin-centred regular simplex with `q` vertices, embedded in the first
/// `q − 1` coordinates of `R^d`.
pub fn build_simplex(q: usize, d: usize) -> Result<SphericalConfig> {
    if q < 2 {
        return Err(Error::Argument(format!("simplex needs at least 2 points, got {q}")));
    }
    if q > d + 1 {
        return Err(Error::Dimension(format!("a {q}-point simplex does not fit in R^{d}")));
    }
    // Rows of the centring matrix I - J/q span the hyperplane orthogonal to
    // the all-ones vector; the first q-1 of them are a basis of it.
    let qf = q as f64;
    let centred: Vec<Vec<f64>> = (0..q)
        .map(|i| (0..q).map(|j| if i == j { 1.0 - 1.0 / qf } else { -1.0 / qf }).collect())
        .collect();

    // Modified Gram-Schmidt for an orthonormal basis of that hyperplane.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(q - 1);
    for row in centred.iter().take(q - 1) {
        let mut v = row.clone();
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let s = norm(&v);
        v.iter_mut().for_each(|x| *x /= s);
        basis.push(v);
    }

    let mut data = vec![0.0; q * d];
    for (i, row) in centred.iter().enumerate() {
        let coords: Vec<f64> = basis.iter().map(|b| dot(row, b)).collect();
        let s = norm(&coords);
        for (j, c) in coords.into_iter().enumerate() {
            data[i * d + j] = c / s;
        }
    }
    SphericalConfig::from_flat(d, q, data, UNIT_TOL)
}

/// `±e_1, …, ±e_{n−d}` followed by `e_{n−d+1}, …, e_d`.
pub fn build_orthoplex_subset(d: usize, n: usize) -> Result<SphericalConfig> {
    check_regime(d, n)?;
    let pairs = n - d;
    let mut rows = Vec::with_capacity(n);
    let unit = |j: usize, s: f64| {
        let mut e = vec![0.0; d];
        e[j] = s;
        e
    };
    for j in 0..pairs {
        rows.push(unit(j, 1.0));
        rows.push(unit(j, -1.0));
    }
    for j in pairs..d {
        rows.push(unit(j, 1.0));
    }
    SphericalConfig::new(d, rows)
}

/// Which block structure [`build_entropy_code`] produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyKind {
    Low,
    High,
}

impl FromStr for EntropyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(EntropyKind::Low),
            "high" => Ok(EntropyKind::High),
            _ => Err(Error::Argument(format!("unknown entropy kind {s:?}"))),
        }
    }
}

/// Orthogonal direct sum of `(d_i + 1)`-point simplices, one per part.
pub fn build_block_code(tuple: &DimensionTuple) -> Result<SphericalConfig> {
    let blocks = tuple
        .parts()
        .iter()
        .map(|&di| build_simplex(di + 1, di))
        .collect::<Result<Vec<_>>>()?;
    direct_sum(&blocks)
}

/// Low- or high-entropy softmax code together with its block tuple.
pub fn build_entropy_code(
    d: usize,
    n: usize,
    kind: EntropyKind,
) -> Result<(SphericalConfig, DimensionTuple)> {
    let tuple = match kind {
        EntropyKind::Low => DimensionTuple::low_entropy(d, n)?,
        EntropyKind::High => DimensionTuple::high_entropy(d, n)?,
    };
    Ok((build_block_code(&tuple)?, tuple))
}

/// Blocks placed in consecutive coordinate ranges, in input order.
pub fn direct_sum(blocks: &[SphericalConfig]) -> Result<SphericalConfig> {
    if blocks.is_empty() {
        return Err(Error::Argument("direct sum of zero blocks".into()));
    }
    let d: usize = blocks.iter().map(SphericalConfig::d).sum();
    let n: usize = blocks.iter().map(SphericalConfig::n).sum();
    let mut data = Vec::with_capacity(n * d);
    let mut offset = 0;
    for b in blocks {
        for row in b.rows() {
            let start = data.len();
            data.resize(start + d, 0.0);
            data[start + offset..start + offset + b.d()].copy_from_slice(row);
        }
        offset += b.d();
    }
    SphericalConfig::from_flat(d, n, data, UNIT_TOL)
}

/// Rows drawn i.i.d. standard normal (ChaCha8 stream seeded by `seed`) and
/// normalized.
pub fn random_config(d: usize, n: usize, seed: u64) -> Result<SphericalConfig> {
    if d == 0 || n == 0 {
        return Err(Error::Argument("random_config needs d >= 1 and n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let mut row: Vec<f64>;
        loop {
            row = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            if norm(&row) > 1e-150 {
                break;
            }
        }
        let s = norm(&row);
        data.extend(row.into_iter().map(|x| x / s));
    }
    SphericalConfig::from_flat(d, n, data, UNIT_TOL)
}
