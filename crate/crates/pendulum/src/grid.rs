//! Grid syntax for sweeps: `start:stop:step`, a comma list, or one value.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridError(pub String);

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for GridError {}

fn number(s: &str) -> Result<f64, GridError> {
    let v: f64 = s.trim().parse().map_err(|_| GridError(format!("not a number: {s:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(GridError(format!("not finite: {s:?}")))
    }
}

/// Parse a grid. A range includes `stop` when it lies within half a step of
/// a grid point; points are `start + i·step` so no rounding accumulates.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, GridError> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Err(GridError("empty grid".into()));
    }
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [single] => single.split(',').map(number).collect(),
        [start, stop, step] => {
            let (a, b, h) = (number(start)?, number(stop)?, number(step)?);
            if !(h > 0.0) {
                return Err(GridError(format!("grid step must be positive in {spec:?}")));
            }
            if b < a {
                return Err(GridError(format!("grid stop is below start in {spec:?}")));
            }
            let n = ((b - a) / h + 0.5).floor() as usize;
            if n > 1_000_000 {
                return Err(GridError(format!("grid {spec:?} has too many points")));
            }
            Ok((0..=n).map(|i| a + i as f64 * h).collect())
        }
        _ => Err(GridError(format!("expected start:stop:step, a comma list or a number, got {spec:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_include_the_endpoint() {
        let g = parse_grid("0.1:1.4:0.1").unwrap();
        assert_eq!(g.len(), 14);
        assert_eq!(g[0], 0.1);
        assert!((g[13] - 1.4).abs() < 1e-12);
        assert_eq!(parse_grid("0:4:0.1").unwrap().len(), 41);
        assert_eq!(parse_grid("0:1:0.3").unwrap().len(), 4);
        assert_eq!(parse_grid("2:2:1").unwrap(), vec![2.0]);
    }

    #[test]
    fn lists_and_singletons() {
        assert_eq!(parse_grid("1.5, 2,5").unwrap(), vec![1.5, 2.0, 5.0]);
        assert_eq!(parse_grid("1.193").unwrap(), vec![1.193]);
    }

    #[test]
    fn rejects_bad_grids() {
        for bad in ["", "1:0:0.1", "0:1:0", "0:1:-1", "a", "0:1", "1:2:3:4", "nan", "0:inf:1"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }
}
