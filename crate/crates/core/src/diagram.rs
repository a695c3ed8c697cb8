//! Fundamental diagrams: the speed laws segments use to turn stored density
//! into travel speed, in analytic (Greenshield, May) or tabulated form.
//!
//! Tabulated diagrams live in occupancy coordinates (percent occupancy vs
//! km/h) because that is what loop detectors report; the analytic laws live
//! in density coordinates. Conversion between the two goes through the
//! segment's jam density `rho_max = lanes / vehicle size`.

use serde::{Deserialize, Serialize};
use std::io::BufRead;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagramError {
    #[error("free-flow speed must be positive, got {0}")]
    FreeSpeed(f64),
    #[error("jam density must be positive, got {0}")]
    JamDensity(f64),
    #[error("critical density must be positive, got {0}")]
    CriticalDensity(f64),
    #[error("shape exponent must be positive, got {0}")]
    ShapeExponent(f64),
    #[error("density must be nonnegative and finite, got {0}")]
    Density(f64),
    #[error("lane count must be positive")]
    LaneCount,
    #[error("vehicle size must be positive, got {0}")]
    VehicleSize(f64),
    #[error("tabulated diagram needs at least two knots, got {0}")]
    TooFewKnots(usize),
    #[error("tabulated knots must start at zero occupancy, first is at {0}")]
    FirstKnot(f64),
    #[error("tabulated knot occupancies must be strictly increasing at knot {0}")]
    KnotOrder(usize),
    #[error("tabulated knot speed must be nonnegative and finite at knot {0}")]
    KnotSpeed(usize),
    #[error("{path} line {line}: {msg}")]
    Table {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Greenshield speed law `v = v_f (1 - rho / rho_m)`, clamped at zero for
/// densities at or beyond the jam density.
pub fn speed_greenshield(rho: f64, v_f: f64, rho_m: f64) -> Result<f64, DiagramError> {
    if !(v_f > 0.0) {
        return Err(DiagramError::FreeSpeed(v_f));
    }
    if !(rho_m > 0.0) {
        return Err(DiagramError::JamDensity(rho_m));
    }
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(DiagramError::Density(rho));
    }
    Ok((v_f * (1.0 - rho / rho_m)).max(0.0))
}

/// May speed law `v = v_f exp(-(1/a) (rho / rho_c)^a)`. Strictly positive
/// for every finite density.
pub fn speed_may(rho: f64, v_f: f64, a: f64, rho_c: f64) -> Result<f64, DiagramError> {
    if !(v_f > 0.0) {
        return Err(DiagramError::FreeSpeed(v_f));
    }
    if !(a > 0.0) {
        return Err(DiagramError::ShapeExponent(a));
    }
    if !(rho_c > 0.0) {
        return Err(DiagramError::CriticalDensity(rho_c));
    }
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(DiagramError::Density(rho));
    }
    Ok(v_f * (-(rho / rho_c).powf(a) / a).exp())
}

/// Percent occupancy for an aggregate density over `lanes` lanes of
/// vehicles `veh_size_km` long: `rho / (lanes / size) * 100`.
pub fn occupancy(rho: f64, lanes: u32, veh_size_km: f64) -> Result<f64, DiagramError> {
    if lanes == 0 {
        return Err(DiagramError::LaneCount);
    }
    if !(veh_size_km > 0.0) {
        return Err(DiagramError::VehicleSize(veh_size_km));
    }
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(DiagramError::Density(rho));
    }
    Ok(rho / (lanes as f64 / veh_size_km) * 100.0)
}

/// Linear interpolation through `(occupancy %, speed km/h)` knots, clamped
/// to the end values outside the knot range.
pub fn eval_tabulated(knots: &[(f64, f64)], to_pct: f64) -> Result<f64, DiagramError> {
    if knots.len() < 2 {
        return Err(DiagramError::TooFewKnots(knots.len()));
    }
    Ok(interp(knots, to_pct))
}

fn interp(knots: &[(f64, f64)], x: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    for pair in knots.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        if x <= x1 {
            // Knot hits return the stored value exactly; the blend below
            // can round it away when y0 and y1 differ in magnitude.
            if x == x1 {
                return y1;
            }
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    }
    last.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FundamentalDiagram {
    Greenshield {
        v_f: f64,
        rho_m: f64,
    },
    May {
        v_f: f64,
        a: f64,
        rho_c: f64,
    },
    /// `(occupancy %, speed km/h)` pairs, strictly increasing in occupancy
    /// with the first knot at zero occupancy.
    Tabulated {
        knots: Vec<(f64, f64)>,
    },
}

impl FundamentalDiagram {
    pub fn validate(&self) -> Result<(), DiagramError> {
        match self {
            FundamentalDiagram::Greenshield { v_f, rho_m } => {
                speed_greenshield(0.0, *v_f, *rho_m)?;
            }
            FundamentalDiagram::May { v_f, a, rho_c } => {
                speed_may(0.0, *v_f, *a, *rho_c)?;
            }
            FundamentalDiagram::Tabulated { knots } => {
                if knots.len() < 2 {
                    return Err(DiagramError::TooFewKnots(knots.len()));
                }
                if knots[0].0 != 0.0 {
                    return Err(DiagramError::FirstKnot(knots[0].0));
                }
                for (i, pair) in knots.iter().enumerate() {
                    if !(pair.1 >= 0.0) || !pair.1.is_finite() {
                        return Err(DiagramError::KnotSpeed(i));
                    }
                    if i > 0 && !(pair.0 > knots[i - 1].0) {
                        return Err(DiagramError::KnotOrder(i));
                    }
                }
            }
        }
        Ok(())
    }

    /// Speed for an aggregate density, given the segment jam density.
    /// Assumes a diagram that already passed [`validate`](Self::validate).
    pub fn speed_at_density(&self, rho: f64, rho_max: f64) -> f64 {
        match self {
            FundamentalDiagram::Greenshield { v_f, rho_m } => {
                (v_f * (1.0 - rho / rho_m)).max(0.0)
            }
            FundamentalDiagram::May { v_f, a, rho_c } => {
                v_f * (-(rho.max(0.0) / rho_c).powf(*a) / a).exp()
            }
            FundamentalDiagram::Tabulated { knots } => {
                interp(knots, rho / rho_max * 100.0)
            }
        }
    }

    /// Speed at a percent occupancy, given the segment jam density.
    pub fn speed_at_occupancy(&self, to_pct: f64, rho_max: f64) -> f64 {
        match self {
            FundamentalDiagram::Tabulated { knots } => interp(knots, to_pct),
            _ => self.speed_at_density(to_pct / 100.0 * rho_max, rho_max),
        }
    }

    /// Speed of the empty road.
    pub fn free_speed(&self) -> f64 {
        match self {
            FundamentalDiagram::Greenshield { v_f, .. } => *v_f,
            FundamentalDiagram::May { v_f, .. } => *v_f,
            FundamentalDiagram::Tabulated { knots } => knots[0].1,
        }
    }

    /// Percent occupancy at which the flow `rho * v` peaks. Used to report
    /// how long a segment spent above its critical occupancy.
    pub fn critical_occupancy_pct(&self, rho_max: f64) -> f64 {
        match self {
            FundamentalDiagram::Greenshield { rho_m, .. } => {
                (rho_m / 2.0 / rho_max * 100.0).min(100.0)
            }
            FundamentalDiagram::May { a, rho_c, .. } => {
                // d(rho v)/drho = 0 at (rho/rho_c)^a = 1 for the May law.
                let _ = a;
                (rho_c / rho_max * 100.0).min(100.0)
            }
            FundamentalDiagram::Tabulated { knots } => {
                let mut best = (knots[0].0, knots[0].0 * knots[0].1);
                let mut consider = |to: f64, v: f64| {
                    let q = to * v;
                    if q > best.1 {
                        best = (to, q);
                    }
                };
                for pair in knots.windows(2) {
                    let (x0, y0) = pair[0];
                    let (x1, y1) = pair[1];
                    consider(x1, y1);
                    // Interior optimum of the quadratic to*(y0 + m (to - x0)).
                    let m = (y1 - y0) / (x1 - x0);
                    if m != 0.0 {
                        let to = (m * x0 - y0) / (2.0 * m);
                        if to > x0 && to < x1 {
                            consider(to, y0 + m * (to - x0));
                        }
                    }
                }
                best.0
            }
        }
    }

    /// Loads a tabulated diagram from a `To_percent,speed_kmh` CSV table.
    pub fn from_csv_path(path: &Path) -> Result<Self, DiagramError> {
        let file = std::fs::File::open(path).map_err(|source| DiagramError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_reader(std::io::BufReader::new(file), &path.display().to_string())
    }

    /// Reads `To_percent,speed_kmh` rows; `origin` names the source in errors.
    pub fn from_csv_reader<R: BufRead>(reader: R, origin: &str) -> Result<Self, DiagramError> {
        let table_err = |line: usize, msg: String| DiagramError::Table {
            path: origin.to_string(),
            line,
            msg,
        };
        let mut knots = Vec::new();
        let mut saw_header = false;
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| DiagramError::Io {
                path: origin.to_string(),
                source,
            })?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if !saw_header {
                let fields: Vec<&str> = line.split(',').map(str::trim).collect();
                if fields != ["To_percent", "speed_kmh"] {
                    return Err(table_err(
                        idx + 1,
                        format!("expected header \"To_percent,speed_kmh\", got \"{line}\""),
                    ));
                }
                saw_header = true;
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let (to, v) = match (fields.next(), fields.next(), fields.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => return Err(table_err(idx + 1, "expected two comma-separated values".into())),
            };
            let to: f64 = to
                .parse()
                .map_err(|e| table_err(idx + 1, format!("bad occupancy \"{to}\": {e}")))?;
            let v: f64 = v
                .parse()
                .map_err(|e| table_err(idx + 1, format!("bad speed \"{v}\": {e}")))?;
            knots.push((to, v));
        }
        if !saw_header {
            return Err(table_err(1, "missing header \"To_percent,speed_kmh\"".into()));
        }
        let diagram = FundamentalDiagram::Tabulated { knots };
        diagram.validate()?;
        Ok(diagram)
    }

    /// Writes the `To_percent,speed_kmh` table for a tabulated diagram.
    pub fn to_csv(&self) -> Option<String> {
        match self {
            FundamentalDiagram::Tabulated { knots } => {
                let mut out = String::from("To_percent,speed_kmh\n");
                for (to, v) in knots {
                    out.push_str(&format!("{to},{v}\n"));
                }
                Some(out)
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn greenshield_midpoint_and_clamp() {
        assert_relative_eq!(speed_greenshield(50.0, 100.0, 200.0).unwrap(), 75.0);
        assert_eq!(speed_greenshield(250.0, 100.0, 200.0).unwrap(), 0.0);
        assert_eq!(speed_greenshield(200.0, 100.0, 200.0).unwrap(), 0.0);
    }

    #[test]
    fn greenshield_rejects_bad_params() {
        assert!(speed_greenshield(10.0, 0.0, 200.0).is_err());
        assert!(speed_greenshield(10.0, 100.0, -1.0).is_err());
        assert!(speed_greenshield(-5.0, 100.0, 200.0).is_err());
        assert!(speed_greenshield(f64::NAN, 100.0, 200.0).is_err());
    }

    #[test]
    fn may_free_and_critical_point() {
        assert_relative_eq!(speed_may(0.0, 90.0, 2.0, 120.0).unwrap(), 90.0);
        let v = speed_may(120.0, 90.0, 2.0, 120.0).unwrap();
        assert_relative_eq!(v, 90.0 * (-0.5f64).exp(), max_relative = 1e-12);
        assert!(speed_may(600.0, 90.0, 2.0, 120.0).unwrap() > 0.0);
        // The tail stays nonnegative even where exp underflows to zero.
        assert!(speed_may(1e6, 90.0, 2.0, 120.0).unwrap() >= 0.0);
    }

    #[test]
    fn may_rejects_bad_params() {
        assert!(speed_may(0.0, 90.0, 0.0, 120.0).is_err());
        assert!(speed_may(0.0, 90.0, 2.0, 0.0).is_err());
        assert!(speed_may(-1.0, 90.0, 2.0, 120.0).is_err());
    }

    #[test]
    fn occupancy_scale() {
        let rho_max = 3.0 / 0.0055;
        assert_relative_eq!(occupancy(rho_max, 3, 0.0055).unwrap(), 100.0);
        assert_relative_eq!(occupancy(rho_max / 2.0, 3, 0.0055).unwrap(), 50.0);
        assert_relative_eq!(occupancy(0.0, 3, 0.0055).unwrap(), 0.0);
        assert!(occupancy(10.0, 0, 0.0055).is_err());
        assert!(occupancy(10.0, 3, 0.0).is_err());
    }

    #[test]
    fn tabulated_interpolates_and_clamps() {
        let knots = [(0.0, 100.0), (20.0, 60.0), (40.0, 20.0)];
        assert_relative_eq!(eval_tabulated(&knots, 10.0).unwrap(), 80.0);
        assert_relative_eq!(eval_tabulated(&knots, 30.0).unwrap(), 40.0);
        assert_relative_eq!(eval_tabulated(&knots, 55.0).unwrap(), 20.0);
        assert_relative_eq!(eval_tabulated(&knots, -3.0).unwrap(), 100.0);
        assert!(eval_tabulated(&[(0.0, 100.0)], 5.0).is_err());
    }

    #[test]
    fn tabulated_validation() {
        let ok = FundamentalDiagram::Tabulated {
            knots: vec![(0.0, 100.0), (25.0, 50.0)],
        };
        assert!(ok.validate().is_ok());
        let not_zero = FundamentalDiagram::Tabulated {
            knots: vec![(5.0, 100.0), (25.0, 50.0)],
        };
        assert!(matches!(not_zero.validate(), Err(DiagramError::FirstKnot(_))));
        let unordered = FundamentalDiagram::Tabulated {
            knots: vec![(0.0, 100.0), (25.0, 50.0), (25.0, 40.0)],
        };
        assert!(matches!(unordered.validate(), Err(DiagramError::KnotOrder(2))));
        let negative = FundamentalDiagram::Tabulated {
            knots: vec![(0.0, 100.0), (25.0, -1.0)],
        };
        assert!(matches!(negative.validate(), Err(DiagramError::KnotSpeed(1))));
    }

    #[test]
    fn speed_lookups_agree_between_coordinate_systems() {
        let rho_max = 545.4545454545455;
        let may = FundamentalDiagram::May {
            v_f: 100.0,
            a: 2.0,
            rho_c: 110.0,
        };
        let rho = 80.0;
        let to = rho / rho_max * 100.0;
        assert_relative_eq!(
            may.speed_at_density(rho, rho_max),
            may.speed_at_occupancy(to, rho_max),
            max_relative = 1e-12
        );
        let tab = FundamentalDiagram::Tabulated {
            knots: vec![(0.0, 100.0), (50.0, 40.0), (100.0, 5.0)],
        };
        assert_relative_eq!(
            tab.speed_at_density(rho_max / 2.0, rho_max),
            40.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn critical_occupancy_locations() {
        let rho_max = 500.0;
        let g = FundamentalDiagram::Greenshield {
            v_f: 100.0,
            rho_m: 400.0,
        };
        assert_relative_eq!(g.critical_occupancy_pct(rho_max), 40.0);
        let m = FundamentalDiagram::May {
            v_f: 100.0,
            a: 2.0,
            rho_c: 100.0,
        };
        assert_relative_eq!(m.critical_occupancy_pct(rho_max), 20.0);
        // Flow to*v(to) for these knots peaks inside the middle piece; check
        // against a dense scan.
        let tab = FundamentalDiagram::Tabulated {
            knots: vec![(0.0, 100.0), (15.0, 80.0), (60.0, 10.0), (100.0, 2.0)],
        };
        let analytic = tab.critical_occupancy_pct(rho_max);
        let mut best = (0.0, 0.0);
        for i in 0..=100_000 {
            let to = i as f64 * 1e-3;
            let q = to * tab.speed_at_occupancy(to, rho_max);
            if q > best.1 {
                best = (to, q);
            }
        }
        assert!((analytic - best.0).abs() < 1e-2, "{analytic} vs {best:?}");
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let text = "To_percent,speed_kmh\n0,104\n15,88.5\n40,31\n";
        let d = FundamentalDiagram::from_csv_reader(text.as_bytes(), "inline").unwrap();
        assert_eq!(
            d,
            FundamentalDiagram::Tabulated {
                knots: vec![(0.0, 104.0), (15.0, 88.5), (40.0, 31.0)]
            }
        );
        assert_eq!(d.to_csv().unwrap(), text);

        let bad_header = FundamentalDiagram::from_csv_reader(
            "occupancy,speed\n0,100\n".as_bytes(),
            "inline",
        );
        assert!(matches!(bad_header, Err(DiagramError::Table { line: 1, .. })));
        let bad_value =
            FundamentalDiagram::from_csv_reader("To_percent,speed_kmh\n0,fast\n10,3\n".as_bytes(), "x");
        assert!(matches!(bad_value, Err(DiagramError::Table { line: 2, .. })));
    }
}
