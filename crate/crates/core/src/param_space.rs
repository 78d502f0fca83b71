//! Uncertain-parameter spaces and the affine map onto `[-1, 1]^m`.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// One uncertain physical input with its range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub min: f64,
    pub nominal: f64,
    pub max: f64,
    #[serde(default)]
    pub units: String,
}

impl ParameterSpec {
    pub fn new(name: impl Into<String>, min: f64, nominal: f64, max: f64, units: impl Into<String>) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            min,
            nominal,
            max,
            units: units.into(),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Schema("parameter with empty name".into()));
        }
        if !(self.min.is_finite() && self.nominal.is_finite() && self.max.is_finite()) {
            return Err(Error::Schema(format!("parameter {:?} has non-finite bounds", self.name)));
        }
        if !(self.min < self.max) {
            return Err(Error::Schema(format!(
                "parameter {:?}: min {} must be below max {}",
                self.name, self.min, self.max
            )));
        }
        if !(self.min <= self.nominal && self.nominal <= self.max) {
            return Err(Error::Schema(format!(
                "parameter {:?}: nominal {} outside [{}, {}]",
                self.name, self.nominal, self.min, self.max
            )));
        }
        Ok(())
    }

    fn to_unit(&self, p: f64) -> f64 {
        2.0 * (p - self.min) / (self.max - self.min) - 1.0
    }

    fn at_unit(&self, x: f64) -> f64 {
        self.min + 0.5 * (x + 1.0) * (self.max - self.min)
    }
}

/// Ordered list of parameters; index order is coordinate order.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ParameterSpace {
    params: Vec<ParameterSpec>,
}

impl<'de> Deserialize<'de> for ParameterSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let params = Vec::<ParameterSpec>::deserialize(d)?;
        ParameterSpace::new(params).map_err(serde::de::Error::custom)
    }
}

/// Normalized coordinates plus a per-component in-range mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub x: Vec<f64>,
    pub in_bounds: Vec<bool>,
}

impl Normalized {
    pub fn all_in_bounds(&self) -> bool {
        self.in_bounds.iter().all(|&b| b)
    }
}

const HYSHOT_SPACE_JSON: &str = include_str!("../data/hyshot_space.json");

impl ParameterSpace {
    pub fn new(params: Vec<ParameterSpec>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Schema("parameter space needs at least one parameter".into()));
        }
        let mut seen = HashSet::new();
        for p in &params {
            p.validate()?;
            if !seen.insert(p.name.as_str()) {
                return Err(Error::Schema(format!("duplicate parameter name {:?}", p.name)));
            }
        }
        Ok(Self { params })
    }

    /// Generic space `x1..xm` on `[-1, 1]`, used when only normalized data exist.
    pub fn unit(m: usize) -> Result<Self> {
        Self::new(
            (1..=m)
                .map(|i| ParameterSpec {
                    name: format!("x{i}"),
                    min: -1.0,
                    nominal: 0.0,
                    max: 1.0,
                    units: String::new(),
                })
                .collect(),
        )
    }

    /// The bundled seven-parameter HyShot II inflow space.
    pub fn hyshot() -> Self {
        Self::from_json(HYSHOT_SPACE_JSON).expect("bundled space definition is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("space serializes")
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[ParameterSpec] {
        &self.params
    }

    pub fn names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn nominal(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.nominal).collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Physical -> normalized. Out-of-range inputs are mapped (extrapolated)
    /// and flagged in the mask rather than rejected.
    pub fn normalize(&self, p: &[f64]) -> Result<Normalized> {
        self.check_len(p.len())?;
        let x: Vec<f64> = self.params.iter().zip(p).map(|(s, &v)| s.to_unit(v)).collect();
        let in_bounds = self
            .params
            .iter()
            .zip(p)
            .map(|(s, &v)| s.min <= v && v <= s.max)
            .collect();
        Ok(Normalized { x, in_bounds })
    }

    /// Normalized -> physical.
    pub fn denormalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        Ok(self.params.iter().zip(x).map(|(s, &v)| s.at_unit(v)).collect())
    }

    /// Point `index` of the uniform design keyed by `seed`.
    pub fn sample_point(&self, seed: u64, index: u64) -> Vec<f64> {
        rng::uniform_point(&mut rng::stream(seed, rng::domain::UNIFORM_SAMPLE, index), self.dim())
    }

    /// `count` i.i.d. uniform points on `[-1, 1]^m`. Point `j` depends only
    /// on `(seed, j)`.
    pub fn sample_uniform(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if count == 0 {
            return Err(Error::Domain("sample count must be at least 1".into()));
        }
        Ok((0..count as u64).map(|j| self.sample_point(seed, j)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pressure() -> ParameterSpace {
        ParameterSpace::new(vec![ParameterSpec::new("P0", 16.448, 17.730, 19.012, "MPa").unwrap()]).unwrap()
    }

    #[test]
    fn nominal_pressure_maps_to_zero() {
        let n = pressure().normalize(&[17.730]).unwrap();
        assert!(n.x[0].abs() < 1e-12);
        assert!(n.all_in_bounds());
        let top = pressure().normalize(&[19.012]).unwrap();
        assert!((top.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ramp_transition_nominal_is_centre() {
        let space = ParameterSpace::hyshot();
        let i = space.index_of("ramp_transition").unwrap();
        let mut p = space.nominal();
        p[i] = 0.145;
        let n = space.normalize(&p).unwrap();
        assert!(n.x[i].abs() < 1e-12);
    }

    #[test]
    fn corners_map_to_columns() {
        let space = ParameterSpace::hyshot();
        let m = space.dim();
        let lo = space.denormalize(&vec![-1.0; m]).unwrap();
        let hi = space.denormalize(&vec![1.0; m]).unwrap();
        for (k, s) in space.params().iter().enumerate() {
            assert_eq!(lo[k], s.min);
            assert_eq!(hi[k], s.max);
        }
    }

    #[test]
    fn centre_is_midpoint() {
        let space = ParameterSpace::hyshot();
        let mid = space.denormalize(&vec![0.0; space.dim()]).unwrap();
        for (k, s) in space.params().iter().enumerate() {
            assert!((mid[k] - 0.5 * (s.min + s.max)).abs() <= 1e-15 * s.max.abs());
        }
    }

    #[test]
    fn out_of_range_is_flagged() {
        let n = pressure().normalize(&[20.0]).unwrap();
        assert!(n.x[0] > 1.0);
        assert!(!n.in_bounds[0]);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(pressure().normalize(&[1.0, 2.0]), Err(Error::Dimension { .. })));
        assert!(matches!(pressure().denormalize(&[]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn schema_errors() {
        assert!(ParameterSpec::new("a", 1.0, 1.0, 1.0, "").is_err());
        assert!(ParameterSpec::new("a", 0.0, 2.0, 1.0, "").is_err());
        let dup = vec![
            ParameterSpec::new("a", 0.0, 0.5, 1.0, "").unwrap(),
            ParameterSpec::new("a", 0.0, 0.5, 1.0, "").unwrap(),
        ];
        assert!(ParameterSpace::new(dup).is_err());
        assert!(ParameterSpace::new(vec![]).is_err());
        assert!(ParameterSpace::from_json(r#"[{"name":"a","min":2,"nominal":1,"max":3}]"#).is_err());
    }

    #[test]
    fn json_round_trip() {
        let space = ParameterSpace::hyshot();
        let again = ParameterSpace::from_json(&space.to_json()).unwrap();
        assert_eq!(space, again);
    }

    #[test]
    fn sampling_is_deterministic() {
        let space = ParameterSpace::hyshot();
        assert_eq!(space.sample_uniform(50, 7).unwrap(), space.sample_uniform(50, 7).unwrap());
        assert_ne!(space.sample_uniform(50, 7).unwrap(), space.sample_uniform(50, 8).unwrap());
        // prefix property: point j depends only on (seed, j)
        assert_eq!(space.sample_uniform(10, 7).unwrap()[..], space.sample_uniform(50, 7).unwrap()[..10]);
        assert!(space.sample_uniform(0, 7).is_err());
    }

    #[test]
    fn single_point_in_cube() {
        let pts = ParameterSpace::unit(2).unwrap().sample_uniform(1, 3).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn uniform_mean_and_ks() {
        let space = ParameterSpace::unit(1).unwrap();
        let pts = space.sample_uniform(100_000, 11).unwrap();
        let mean = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");

        let n = 10_000;
        let mut v: Vec<f64> = space.sample_uniform(n, 5).unwrap().into_iter().map(|p| p[0]).collect();
        v.sort_by(f64::total_cmp);
        let ks = v
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = 0.5 * (x + 1.0);
                (cdf - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - cdf).abs())
            })
            .fold(0.0f64, f64::max);
        assert!(ks < 2.0 / (n as f64).sqrt() * 1.63, "ks {ks}");
        assert!(v[0] < -0.999 && v[n - 1] > 0.999);
    }

    proptest! {
        #[test]
        fn round_trip(t in proptest::collection::vec(0.0f64..=1.0, 7)) {
            let space = ParameterSpace::hyshot();
            let p: Vec<f64> = space.params().iter().zip(&t).map(|(s, u)| s.min + u * (s.max - s.min)).collect();
            let x = space.normalize(&p).unwrap().x;
            let x2 = space.normalize(&space.denormalize(&x).unwrap()).unwrap().x;
            for (a, b) in x.iter().zip(&x2) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn monotone(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            prop_assume!(a < b);
            let space = ParameterSpace::new(vec![ParameterSpec::new("q", -3.0, 0.0, 5.0, "").unwrap()]).unwrap();
            prop_assert!(space.normalize(&[a]).unwrap().x[0] < space.normalize(&[b]).unwrap().x[0]);
        }
    }
}
