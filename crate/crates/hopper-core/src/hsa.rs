//! Twist-tunable nonlinear spring-damper with a jamming brake state.
//!
//! Stiffness lives on a measured (twist, displacement) grid. The grid's
//! twist axis follows the characterization sweep: the brake engages toward
//! the *lower* end of the axis. Control-side twist is measured positive
//! toward the brake, so a state twist `phi` looks up the surface at `-phi`.
//! Hopping runs at zero twist where both conventions coincide.
//!
//! Force law is Kelvin-Voigt, tension side only:
//!
//! ```text
//! F = K(twist, dl) * dl + b * w(dl) * dldot,   w(dl) = min(1, dl / 1 mm)
//! ```
//!
//! The `w` taper fades the damping term in over the first millimeter of
//! engagement so the force is continuous through the slack/engaged switch;
//! guard-event refinement relies on that continuity.

use crate::config::HsaSection;
use crate::error::{Error, Result};

/// Damping fades in over this much engagement, m.
pub const DAMPING_TAPER: f64 = 1e-3;

/// Spring geometry and ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct HsaGeometry {
    /// Unloaded spring length, m.
    pub rest_length: f64,
    /// Leg length at which the spring is exactly unloaded, m.
    pub neutral_leg_length: f64,
    /// Rod closing the leg/spring loop: spring length = rod - leg length, m.
    pub rod_length: f64,
    /// Usable tensile stroke, m.
    pub max_stroke: f64,
    /// Rated tensile load, N.
    pub load_limit: f64,
    /// Braking twist at which jamming begins, deg.
    pub jam_twist: f64,
}

impl From<&HsaSection> for HsaGeometry {
    fn from(s: &HsaSection) -> Self {
        HsaGeometry {
            rest_length: s.rest_length,
            neutral_leg_length: s.neutral_leg_length,
            rod_length: s.rod_length,
            max_stroke: s.max_stroke,
            load_limit: s.load_limit,
            jam_twist: s.jam_twist,
        }
    }
}

impl HsaGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.rest_length > 0.0) {
            return Err(Error::Config("rest_length must be > 0".into()));
        }
        if !(self.max_stroke > 0.0 && self.max_stroke < self.neutral_leg_length) {
            return Err(Error::Config(
                "max_stroke must lie in (0, neutral_leg_length)".into(),
            ));
        }
        if !(self.load_limit > 0.0) {
            return Err(Error::Config("load_limit must be > 0".into()));
        }
        // The neutral leg length is where the spring is exactly at rest;
        // the three lengths must close the loop.
        if (self.neutral_leg_length - (self.rod_length - self.rest_length)).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "neutral_leg_length ({}) must equal rod_length - rest_length ({})",
                self.neutral_leg_length,
                self.rod_length - self.rest_length
            )));
        }
        Ok(())
    }
}

/// True iff a braking twist (deg, positive toward the brake) has reached
/// the jamming threshold. The threshold is inclusive.
pub fn is_jammed(twist: f64, geometry: &HsaGeometry) -> bool {
    twist >= geometry.jam_twist
}

/// Spring length and tensile extension for a leg length.
///
/// l = rod_length - x; extension dl = max(0, l - rest_length). The map is
/// affine and strictly decreasing in x; the slack side clamps to zero.
pub fn hsa_length_from_leg(x: f64, geometry: &HsaGeometry) -> Result<(f64, f64)> {
    let min_x = geometry.neutral_leg_length - geometry.max_stroke;
    let max_x = geometry.rod_length;
    if !(x >= min_x) {
        // shorter leg than the stroke allows: an overdriven-spring fault,
        // not a plain domain error
        return Err(Error::StrokeLimit {
            extension: geometry.rod_length - x - geometry.rest_length,
            max_stroke: geometry.max_stroke,
        });
    }
    if !(x <= max_x) {
        return Err(Error::Domain { what: "leg length (rod side)", value: x, min: min_x, max: max_x });
    }
    let l = geometry.rod_length - x;
    let dl = (l - geometry.rest_length).max(0.0);
    Ok((l, dl))
}

/// Stiffness sampled on a rectangular (twist, displacement) grid, N/m.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessSurface {
    twist_grid: Vec<f64>,
    displacement_grid: Vec<f64>,
    /// Row-major: values[i * displacement_grid.len() + j] for twist i, displacement j.
    values: Vec<f64>,
}

impl StiffnessSurface {
    pub fn new(twist_grid: Vec<f64>, displacement_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if twist_grid.len() < 2 || displacement_grid.len() < 2 {
            return Err(Error::Input("stiffness grid needs at least 2x2 nodes".into()));
        }
        for g in [&twist_grid, &displacement_grid] {
            if g.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Input("stiffness grid axes must be strictly ascending".into()));
            }
        }
        if values.len() != twist_grid.len() * displacement_grid.len() {
            return Err(Error::Input(format!(
                "stiffness grid shape mismatch: {} values for {}x{} nodes",
                values.len(),
                twist_grid.len(),
                displacement_grid.len()
            )));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Input("stiffness values must be finite and > 0".into()));
        }
        Ok(StiffnessSurface { twist_grid, displacement_grid, values })
    }

    pub fn twist_grid(&self) -> &[f64] {
        &self.twist_grid
    }

    pub fn displacement_grid(&self) -> &[f64] {
        &self.displacement_grid
    }

    pub fn value_at_node(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.displacement_grid.len() + j]
    }

    pub fn min_stiffness(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_stiffness(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mean of the stored values over strictly positive twist nodes.
    pub fn positive_twist_mean(&self) -> f64 {
        let nd = self.displacement_grid.len();
        let mut sum = 0.0;
        let mut n = 0usize;
        for (i, t) in self.twist_grid.iter().enumerate() {
            if *t > 0.0 {
                for j in 0..nd {
                    sum += self.values[i * nd + j];
                    n += 1;
                }
            }
        }
        sum / n as f64
    }

    /// Bilinear interpolation; exact at nodes; no extrapolation.
    pub fn stiffness_at(&self, twist: f64, displacement: f64) -> Result<f64> {
        let t = &self.twist_grid;
        let d = &self.displacement_grid;
        if !(twist >= t[0] && twist <= *t.last().unwrap()) {
            return Err(Error::Domain {
                what: "surface twist",
                value: twist,
                min: t[0],
                max: *t.last().unwrap(),
            });
        }
        if !(displacement >= d[0] && displacement <= *d.last().unwrap()) {
            return Err(Error::Domain {
                what: "surface displacement",
                value: displacement,
                min: d[0],
                max: *d.last().unwrap(),
            });
        }
        let i = cell_index(t, twist);
        let j = cell_index(d, displacement);
        let (t0, t1) = (t[i], t[i + 1]);
        let (d0, d1) = (d[j], d[j + 1]);
        let wt = (twist - t0) / (t1 - t0);
        let wd = (displacement - d0) / (d1 - d0);
        let nd = d.len();
        let k00 = self.values[i * nd + j];
        let k01 = self.values[i * nd + j + 1];
        let k10 = self.values[(i + 1) * nd + j];
        let k11 = self.values[(i + 1) * nd + j + 1];
        let lo = k00 + (k01 - k00) * wd;
        let hi = k10 + (k11 - k10) * wd;
        Ok(lo + (hi - lo) * wt)
    }

    /// Built-in surface: a smooth parametric family matching the bench
    /// characterization of the reference spring-brake. Soft-side (positive
    /// sweep twist) mean exactly 912 N/m, minimum 762 N/m, jam rise to
    /// 16.1 kN/m past 135 deg of braking twist. Displacement-independent,
    /// so bilinear queries in the displacement direction are exact.
    pub fn default_surface() -> Self {
        let twist_grid: Vec<f64> = (0..28).map(|i| -150.0 + 10.0 * i as f64).collect();
        let displacement_grid: Vec<f64> = (0..11).map(|j| 0.005 * j as f64).collect();
        let nd = displacement_grid.len();
        let mut values = Vec::with_capacity(twist_grid.len() * nd);
        for &u in &twist_grid {
            let k = default_stiffness(u);
            for _ in 0..nd {
                values.push(k);
            }
        }
        StiffnessSurface::new(twist_grid, displacement_grid, values)
            .expect("built-in surface satisfies its own invariants")
    }

    /// Parse the plain-text table format (see `to_table_string`).
    pub fn from_table_str(text: &str) -> Result<Self> {
        let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            rows.push((lineno + 1, line.split(',').map(str::trim).collect()));
        }
        if rows.len() < 3 {
            return Err(Error::Input("stiffness table needs a header row and at least 2 twist rows".into()));
        }
        let (header_line, mut header) = rows.remove(0);
        // The header's first cell may be a corner label; displacement values follow.
        if header.first().is_some_and(|c| c.parse::<f64>().is_err()) {
            header.remove(0);
        }
        let displacement_grid = parse_row(&header, header_line, "displacement")?;
        let mut twist_grid = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len() * displacement_grid.len());
        for (lineno, cells) in rows {
            if cells.len() != displacement_grid.len() + 1 {
                return Err(Error::Input(format!(
                    "line {lineno}: expected {} cells (twist + {} stiffness values), got {}",
                    displacement_grid.len() + 1,
                    displacement_grid.len(),
                    cells.len()
                )));
            }
            let twist: f64 = cells[0]
                .parse()
                .map_err(|_| Error::Input(format!("line {lineno}: bad twist value {:?}", cells[0])))?;
            twist_grid.push(twist);
            for v in parse_row(&cells[1..], lineno, "stiffness")? {
                values.push(v);
            }
        }
        StiffnessSurface::new(twist_grid, displacement_grid, values)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_table_str(&text)
    }

    /// Render as a plain-text table: first row the displacement grid (m),
    /// first column the twist grid (deg), body stiffness (N/m).
    pub fn to_table_string(&self) -> String {
        let mut out = String::new();
        out.push_str("# stiffness surface: rows = twist (deg), columns = displacement (m), body = N/m\n");
        out.push_str("twist_deg\\displacement_m");
        for d in &self.displacement_grid {
            out.push_str(&format!(",{d}"));
        }
        out.push('\n');
        let nd = self.displacement_grid.len();
        for (i, t) in self.twist_grid.iter().enumerate() {
            out.push_str(&format!("{t}"));
            for j in 0..nd {
                out.push_str(&format!(",{}", self.values[i * nd + j]));
            }
            out.push('\n');
        }
        out
    }
}

fn parse_row(cells: &[&str], lineno: usize, what: &str) -> Result<Vec<f64>> {
    cells
        .iter()
        .map(|c| {
            c.parse::<f64>()
                .map_err(|_| Error::Input(format!("line {lineno}: bad {what} value {c:?}")))
        })
        .collect()
}

/// Index of the grid cell containing q (grid strictly ascending, q in bounds).
fn cell_index(grid: &[f64], q: f64) -> usize {
    let n = grid.len();
    let i = grid.partition_point(|g| *g <= q);
    i.clamp(1, n - 1) - 1
}

// Built-in surface family. Sweep coordinate u (deg): the soft spring side
// is u >= 0, the brake engages toward u = -150.
//   soft side   u >= 0: S(u) = 912 + (125/44) u - (3/88) u^2
//     (S(0) = 912; mean over u in {10..120} is exactly 912; S(120) = 762)
//   bridge      u <  0: 912 - (1875/44) (1 - e^(u/15))  (C1 at u = 0)
//   jam rise: A * sigmoid((-u - 135) / 1.5) with A chosen so K(-150) = 16100
fn default_stiffness(u: f64) -> f64 {
    let base = if u >= 0.0 {
        912.0 + (125.0 / 44.0) * u - (3.0 / 88.0) * u * u
    } else {
        912.0 - (1875.0 / 44.0) * (1.0 - (u / 15.0).exp())
    };
    base + jam_amplitude() * sigmoid((-u - 135.0) / 1.5)
}

/// Logistic sigmoid.
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Jam-rise amplitude: pins the grid corner K(-150) to 16,100 N/m.
fn jam_amplitude() -> f64 {
    let bridge_150 = 912.0 - (1875.0 / 44.0) * (1.0 - (-10.0f64).exp());
    (16100.0 - bridge_150) / sigmoid(10.0)
}

/// Force-law parameters: surface + geometry + damping.
#[derive(Debug, Clone)]
pub struct HsaForceParams {
    pub damping: f64,
    pub surface: StiffnessSurface,
    pub geometry: HsaGeometry,
}

impl HsaForceParams {
    pub fn new(damping: f64, surface: StiffnessSurface, geometry: HsaGeometry) -> Result<Self> {
        if damping < 0.0 {
            return Err(Error::Config("hsa damping must be >= 0".into()));
        }
        geometry.validate()?;
        // Jam threshold must be reachable on the surface: braking twist
        // phi looks up the surface at -phi.
        let tg = surface.twist_grid();
        let (lo, hi) = (tg[0], *tg.last().unwrap());
        if !(-geometry.jam_twist >= lo && -geometry.jam_twist <= hi) {
            return Err(Error::Config(format!(
                "jam_twist {} deg maps outside the surface twist range [{lo}, {hi}]",
                geometry.jam_twist
            )));
        }
        Ok(HsaForceParams { damping, surface, geometry })
    }

    /// Build from a config section, loading or synthesizing the surface.
    pub fn from_section(section: &HsaSection, base_dir: Option<&std::path::Path>) -> Result<Self> {
        let surface = match &section.surface_file {
            Some(rel) => {
                let p = std::path::Path::new(rel);
                let path = match (p.is_absolute(), base_dir) {
                    (false, Some(dir)) => dir.join(p),
                    _ => p.to_path_buf(),
                };
                StiffnessSurface::load(&path)?
            }
            None => StiffnessSurface::default_surface(),
        };
        HsaForceParams::new(section.damping, surface, HsaGeometry::from(section))
    }
}

/// Instantaneous spring state.
#[derive(Debug, Clone, Copy)]
pub struct HsaState {
    /// Braking twist, deg (positive toward the brake; 0 while hopping).
    pub twist: f64,
    /// Tensile extension dl, m; 0 at or beyond neutral.
    pub extension: f64,
    /// d(extension)/dt, m/s.
    pub extension_rate: f64,
    pub jammed: bool,
}

impl HsaState {
    pub fn new(twist: f64, extension: f64, extension_rate: f64, geometry: &HsaGeometry) -> Result<Self> {
        if !(0.0..=geometry.max_stroke).contains(&extension) {
            return Err(Error::StrokeLimit { extension, max_stroke: geometry.max_stroke });
        }
        Ok(HsaState {
            twist,
            extension,
            extension_rate,
            jammed: is_jammed(twist, geometry),
        })
    }
}

/// Tension force the spring applies along the leg, N.
///
/// F = K(twist, dl) * dl + damping * w(dl) * dldot, with the damping taper
/// w = min(1, dl / 1 mm). Positive F resists compression; the slack side
/// produces exactly zero.
pub fn hsa_force(state: &HsaState, params: &HsaForceParams) -> Result<f64> {
    let dl = state.extension;
    if !(0.0..=params.geometry.max_stroke).contains(&dl) {
        return Err(Error::StrokeLimit { extension: dl, max_stroke: params.geometry.max_stroke });
    }
    if dl == 0.0 {
        return Ok(0.0);
    }
    let k = params.surface.stiffness_at(-state.twist, dl)?;
    let w = (dl / DAMPING_TAPER).min(1.0);
    Ok(k * dl + params.damping * w * state.extension_rate)
}

/// Bisect the damping coefficient until the simulated spring efficiency
/// hits `target_eta`. The oracle runs a full hop experiment at a candidate
/// damping and reports the mean efficiency; efficiency decreases in
/// damping (more dissipation), which is checked via the bracket endpoints
/// before bisection starts.
pub fn calibrate_damping<F>(target_eta: f64, mut sim_oracle: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    const B_MAX: f64 = 80.0;
    const MAX_ITERS: u32 = 40;
    const TOL: f64 = 0.01;

    if !(target_eta > 0.0 && target_eta < 1.0) {
        return Err(Error::Domain { what: "target efficiency", value: target_eta, min: 0.0, max: 1.0 });
    }
    let eta_at_zero = sim_oracle(0.0)?;
    let eta_at_max = sim_oracle(B_MAX)?;
    if eta_at_zero < eta_at_max {
        return Err(Error::Calibration(format!(
            "efficiency is not decreasing in damping: eta(0) = {eta_at_zero:.4} < eta({B_MAX}) = {eta_at_max:.4}"
        )));
    }
    if target_eta > eta_at_zero || target_eta < eta_at_max {
        return Err(Error::Calibration(format!(
            "target eta {target_eta:.3} outside achievable range [{eta_at_max:.4}, {eta_at_zero:.4}] for damping in [0, {B_MAX}]"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, B_MAX);
    let mut best = (f64::NAN, f64::INFINITY);
    for _ in 0..MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        let eta = sim_oracle(mid)?;
        if (eta - target_eta).abs() < best.1 {
            best = (mid, (eta - target_eta).abs());
        }
        if (eta - target_eta).abs() <= TOL {
            return Ok(mid);
        }
        // eta decreases in damping
        if eta > target_eta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.1 <= 0.05 {
        return Ok(best.0);
    }
    Err(Error::Calibration(format!(
        "damping bisection did not reach eta {target_eta:.3} within {MAX_ITERS} iterations; best |error| = {:.4}",
        best.1
    )))
}
