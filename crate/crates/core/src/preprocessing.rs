//! Per-feature min-max scaling and its inverse.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::trace_model::{Point, TraceSeries};

const HEADER: &str = "minmax-scaler v1";

/// Fitted per-feature bounds mapping `[x_min, x_max]` onto `[range_min, range_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub feature_names: Vec<String>,
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    pub range_min: f64,
    pub range_max: f64,
}

impl Scaler {
    pub fn fit(series: &TraceSeries, range: (f64, f64)) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::invalid("cannot fit a scaler on an empty series"));
        }
        check_range(range)?;
        let k = series.feature_count();
        let mut x_min = vec![f64::INFINITY; k];
        let mut x_max = vec![f64::NEG_INFINITY; k];
        for p in &series.points {
            for (j, &v) in p.values.iter().enumerate() {
                if v.is_nan() {
                    return Err(Error::invalid(format!("missing value at t={} in fit data", p.timestamp)));
                }
                x_min[j] = x_min[j].min(v);
                x_max[j] = x_max[j].max(v);
            }
        }
        Ok(Scaler {
            feature_names: series.feature_names.clone(),
            x_min,
            x_max,
            range_min: range.0,
            range_max: range.1,
        })
    }

    pub fn feature_count(&self) -> usize {
        self.x_min.len()
    }

    pub fn is_constant(&self, feature: usize) -> bool {
        self.x_max[feature] == self.x_min[feature]
    }

    /// Scales one value of `feature`. Constant features map to `range_min`;
    /// values outside the fitted bounds extrapolate linearly.
    #[inline]
    pub fn scale(&self, feature: usize, x: f64) -> f64 {
        let (lo, hi) = (self.x_min[feature], self.x_max[feature]);
        if hi == lo {
            return self.range_min;
        }
        let std = (x - lo) / (hi - lo);
        std * (self.range_max - self.range_min) + self.range_min
    }

    pub fn transform(&self, series: &TraceSeries) -> Result<TraceSeries> {
        if series.feature_count() != self.feature_count() {
            return Err(Error::invalid(format!(
                "scaler fitted on {} features, series has {}",
                self.feature_count(),
                series.feature_count()
            )));
        }
        let mut out = series.header();
        out.points = series
            .points
            .iter()
            .map(|p| Point {
                timestamp: p.timestamp,
                values: p.values.iter().enumerate().map(|(j, &v)| self.scale(j, v)).collect(),
            })
            .collect();
        Ok(out)
    }

    pub fn inverse_transform(&self, values: &[f64], feature: usize) -> Result<Vec<f64>> {
        if feature >= self.feature_count() {
            return Err(Error::invalid(format!("feature index {feature} out of range")));
        }
        if self.is_constant(feature) {
            return Err(Error::NonInvertible { feature });
        }
        let (lo, hi) = (self.x_min[feature], self.x_max[feature]);
        let span = self.range_max - self.range_min;
        Ok(values
            .iter()
            .map(|&y| (y - self.range_min) / span * (hi - lo) + lo)
            .collect())
    }

    /// Text form: a version line, a `range` line, then one tab-separated
    /// `feature<TAB>name<TAB>x_min<TAB>x_max` line per feature.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{HEADER}").unwrap();
        writeln!(s, "range\t{}\t{}", self.range_min, self.range_max).unwrap();
        for j in 0..self.feature_count() {
            writeln!(s, "feature\t{}\t{}\t{}", self.feature_names[j], self.x_min[j], self.x_max[j]).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let fmt = |message: String| Error::Format { what: "scaler", message };
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(fmt(format!("expected '{HEADER}' header")));
        }
        let num = |s: Option<&str>| -> Result<f64> {
            s.and_then(|v| v.parse().ok()).ok_or_else(|| fmt("bad number".into()))
        };
        let mut range = None;
        let mut scaler = Scaler {
            feature_names: Vec::new(),
            x_min: Vec::new(),
            x_max: Vec::new(),
            range_min: 0.0,
            range_max: 1.0,
        };
        for line in lines.filter(|l| !l.is_empty()) {
            let mut cells = line.split('\t');
            match cells.next() {
                Some("range") => range = Some((num(cells.next())?, num(cells.next())?)),
                Some("feature") => {
                    let name = cells.next().ok_or_else(|| fmt("feature name missing".into()))?;
                    let lo = num(cells.next())?;
                    let hi = num(cells.next())?;
                    if hi < lo {
                        return Err(fmt(format!("{name}: x_max < x_min")));
                    }
                    scaler.feature_names.push(name.to_string());
                    scaler.x_min.push(lo);
                    scaler.x_max.push(hi);
                }
                _ => return Err(fmt(format!("unexpected line '{line}'"))),
            }
        }
        let range = range.ok_or_else(|| fmt("range line missing".into()))?;
        check_range(range)?;
        scaler.range_min = range.0;
        scaler.range_max = range.1;
        Ok(scaler)
    }
}

fn check_range(range: (f64, f64)) -> Result<()> {
    if !(range.0.is_finite() && range.1.is_finite() && range.1 > range.0) {
        return Err(Error::invalid(format!("scaler range ({}, {}) must satisfy min < max", range.0, range.1)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(cols: &[&[f64]]) -> TraceSeries {
        let n = cols[0].len();
        let rows = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        let names = (0..cols.len()).map(|j| format!("f{j}")).collect();
        TraceSeries::from_rows(1, names, 0, rows).unwrap()
    }

    #[test]
    fn fit_bounds() {
        let s = Scaler::fit(&series(&[&[0.0, 5.0, 10.0], &[7.0, 7.0, 7.0]]), (0.0, 1.0)).unwrap();
        assert_eq!((s.x_min[0], s.x_max[0]), (0.0, 10.0));
        assert_eq!((s.x_min[1], s.x_max[1]), (7.0, 7.0));
    }

    #[test]
    fn fit_rejects_empty_and_bad_range() {
        let empty = TraceSeries::new(1, vec!["a".into()], 0, vec![]).unwrap();
        assert!(Scaler::fit(&empty, (0.0, 1.0)).is_err());
        assert!(Scaler::fit(&series(&[&[1.0]]), (1.0, 1.0)).is_err());
    }

    #[test]
    fn transform_examples() {
        let src = series(&[&[0.0, 5.0, 10.0], &[7.0, 7.0, 7.0]]);
        let s = Scaler::fit(&src, (0.0, 1.0)).unwrap();
        let t = s.transform(&src).unwrap();
        assert_eq!(t.column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(t.column(1), vec![0.0, 0.0, 0.0]);
        assert_eq!(s.scale(0, 12.0), 1.2);
    }

    #[test]
    fn transform_arity_mismatch() {
        let s = Scaler::fit(&series(&[&[0.0, 1.0]]), (0.0, 1.0)).unwrap();
        assert!(s.transform(&series(&[&[0.0], &[1.0]])).is_err());
    }

    #[test]
    fn inverse_examples() {
        let s = Scaler::fit(&series(&[&[0.0, 10.0], &[3.0, 3.0]]), (0.0, 1.0)).unwrap();
        assert_eq!(s.inverse_transform(&[0.5], 0).unwrap(), vec![5.0]);
        let back = s.inverse_transform(&[0.1, 0.9], 0).unwrap();
        let again: Vec<f64> = back.iter().map(|&x| s.scale(0, x)).collect();
        assert!((again[0] - 0.1).abs() < 1e-12 && (again[1] - 0.9).abs() < 1e-12);
        assert!(matches!(s.inverse_transform(&[0.5], 1), Err(Error::NonInvertible { feature: 1 })));
        assert!(s.inverse_transform(&[0.5], 2).is_err());
    }

    #[test]
    fn text_round_trip() {
        let s = Scaler::fit(&series(&[&[0.1, 16.127], &[-3.0, 2.0e-9]]), (-1.0, 1.0)).unwrap();
        assert_eq!(Scaler::from_text(&s.to_text()).unwrap(), s);
        assert!(Scaler::from_text("nope").is_err());
    }

    proptest! {
        #[test]
        fn monotone_within_feature(lo in -1e3f64..1e3, span in 1e-3f64..1e3, a in -2e3f64..2e3, b in -2e3f64..2e3) {
            let s = Scaler::fit(&series(&[&[lo, lo + span]]), (0.0, 1.0)).unwrap();
            if a <= b {
                prop_assert!(s.scale(0, a) <= s.scale(0, b));
            } else {
                prop_assert!(s.scale(0, a) >= s.scale(0, b));
            }
        }
    }
}
