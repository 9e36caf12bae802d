//! Cross-robot comparison against SPEAR, a published vertical hopper.
//!
//! The bundled dataset carries SPEAR's three operating points (knee angle,
//! touchdown leg length, per-hop electrical energy, compression, hop
//! height, COT). Heights comparable to a different robot come from the
//! work-integral estimate h = -dx + (1/mg) * integral(F dx), and COT at an
//! arbitrary height from a linear COT-vs-height fit.

use crate::error::{Error, Result};

/// SPEAR's mass, kg.
pub const SPEAR_MASS: f64 = 4.91;

const SPEAR_TABLE: &str = include_str!("../data/spear_table.csv");

/// One SPEAR operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpearRow {
    /// Knee angle at touchdown, rad.
    pub knee_angle: f64,
    /// Leg length at touchdown, m.
    pub touchdown_length: f64,
    /// Electrical energy per hop, J.
    pub energy: f64,
    /// Stance compression, m.
    pub compression: f64,
    /// Hop height, m.
    pub height: f64,
    pub cot: f64,
}

impl SpearRow {
    /// Positivity plus COT-consistency: the listed COT must match
    /// E / (m g h) at SPEAR's mass within 1%.
    pub fn validate(&self, gravity: f64) -> Result<()> {
        let fields = [
            ("knee_angle", self.knee_angle),
            ("touchdown_length", self.touchdown_length),
            ("energy", self.energy),
            ("compression", self.compression),
            ("height", self.height),
            ("cot", self.cot),
        ];
        for (what, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Input(format!("SPEAR row field {what} must be > 0, got {v}")));
            }
        }
        let implied = self.energy / (SPEAR_MASS * gravity * self.height);
        if ((implied - self.cot) / self.cot).abs() > 0.01 {
            return Err(Error::Input(format!(
                "SPEAR row COT {} inconsistent with E/(mgh) = {implied:.4}",
                self.cot
            )));
        }
        Ok(())
    }
}

/// Parse the 6-column table format (comments and blank lines ignored).
pub fn parse_spear_rows(text: &str) -> Result<Vec<SpearRow>> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (lineno0, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = lineno0 + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            saw_header = true; // column-name row
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 6 {
            return Err(Error::Input(format!("line {lineno}: expected 6 cells, got {}", cells.len())));
        }
        let mut vals = [0.0f64; 6];
        for (k, c) in cells.iter().enumerate() {
            vals[k] = c
                .parse()
                .map_err(|_| Error::Input(format!("line {lineno}: bad number {c:?}")))?;
        }
        let row = SpearRow {
            knee_angle: vals[0],
            touchdown_length: vals[1],
            energy: vals[2],
            compression: vals[3],
            height: vals[4],
            cot: vals[5],
        };
        row.validate(9.81)
            .map_err(|e| Error::Input(format!("line {lineno}: {e}")))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input("SPEAR table contains no data rows".into()));
    }
    Ok(rows)
}

/// The bundled three-point dataset.
pub fn bundled_spear_rows() -> Vec<SpearRow> {
    parse_spear_rows(SPEAR_TABLE).expect("bundled SPEAR table is valid")
}

/// Work-integral hop-height estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpearHeight {
    /// h = -dx + (1/mg) * integral_0^dx F(x) dx, m.
    pub height: f64,
    /// False when the stored work cannot even recover the compression.
    pub lifts_off: bool,
}

/// Trapezoidal evaluation of the height estimate from sampled leg force.
/// `force_curve` is (x, F) pairs with x ascending; it must cover [0, dx].
pub fn spear_hop_height(
    force_curve: &[(f64, f64)],
    compression: f64,
    mass: f64,
    gravity: f64,
) -> Result<SpearHeight> {
    if !(compression > 0.0) {
        return Err(Error::Domain { what: "compression", value: compression, min: 0.0, max: f64::INFINITY });
    }
    if !(mass > 0.0) {
        return Err(Error::Domain { what: "mass", value: mass, min: 0.0, max: f64::INFINITY });
    }
    if force_curve.len() < 2 {
        return Err(Error::Input("force curve needs at least 2 samples".into()));
    }
    if force_curve.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Input("force curve x-samples must be strictly ascending".into()));
    }
    let (x0, _) = force_curve[0];
    let (x1, _) = *force_curve.last().unwrap();
    if x0 > 1e-12 || x1 < compression - 1e-12 {
        return Err(Error::Input(format!(
            "force curve covers [{x0}, {x1}] but must cover [0, {compression}]"
        )));
    }
    // trapezoid over [0, compression], clipping the last partial segment
    let mut work = 0.0;
    for pair in force_curve.windows(2) {
        let (xa, fa) = pair[0];
        let (xb, fb) = pair[1];
        if xa >= compression {
            break;
        }
        let (xe, fe) = if xb > compression {
            let t = (compression - xa) / (xb - xa);
            (compression, fa + t * (fb - fa))
        } else {
            (xb, fb)
        };
        work += 0.5 * (fa + fe) * (xe - xa);
    }
    let height = -compression + work / (mass * gravity);
    Ok(SpearHeight { height, lifts_off: height > 0.0 })
}

/// Least-squares line through (height, COT) points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CotHeightFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl CotHeightFit {
    pub fn fit(rows: &[SpearRow]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Input(format!("COT fit needs at least 2 rows, got {}", rows.len())));
        }
        let n = rows.len() as f64;
        let mean_h = rows.iter().map(|r| r.height).sum::<f64>() / n;
        let mean_c = rows.iter().map(|r| r.cot).sum::<f64>() / n;
        let sxx: f64 = rows.iter().map(|r| (r.height - mean_h).powi(2)).sum();
        if sxx <= 0.0 {
            return Err(Error::Input("COT fit degenerate: all heights equal".into()));
        }
        let sxy: f64 = rows.iter().map(|r| (r.height - mean_h) * (r.cot - mean_c)).sum();
        let slope = sxy / sxx;
        let intercept = mean_c - slope * mean_h;
        let ss_tot: f64 = rows.iter().map(|r| (r.cot - mean_c).powi(2)).sum();
        let ss_res: f64 = rows
            .iter()
            .map(|r| (r.cot - (intercept + slope * r.height)).powi(2))
            .sum();
        let r_squared = if ss_tot > 0.0 {
            1.0 - ss_res / ss_tot
        } else if ss_res.abs() < 1e-18 {
            1.0
        } else {
            0.0
        };
        Ok(CotHeightFit { slope, intercept, r_squared })
    }

    pub fn predict(&self, height: f64) -> f64 {
        self.intercept + self.slope * height
    }
}

/// COT the fitted line predicts at `h_query`, with the fit itself.
pub fn spear_cot_at_height(rows: &[SpearRow], h_query: f64) -> Result<(f64, CotHeightFit)> {
    let fit = CotHeightFit::fit(rows)?;
    Ok((fit.predict(h_query), fit))
}

/// Rescale a hop apex by the ratio of touchdown leg lengths so heights of
/// differently sized hoppers compare. Lengths must be positive.
pub fn equivalent_height(mean_apex: f64, foreign_touchdown_length: f64, own_touchdown_length: f64) -> f64 {
    debug_assert!(foreign_touchdown_length > 0.0 && own_touchdown_length > 0.0);
    mean_apex * foreign_touchdown_length / own_touchdown_length
}
