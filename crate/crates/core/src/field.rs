//! Magnetic field of a flat strip conductor and its projection onto the NV
//! axis.
//!
//! The conductor is an infinitely long strip of width w carrying a uniform
//! sheet current along its axis (ŷ by default), observed in a plane a
//! standoff distance d away. Coordinates: x across the strip measured from
//! its center line, y along it, z from the conductor plane toward the
//! observation plane. Signs follow the right-hand rule for current along
//! +axis, so directly over the center line the field points along +x.

use crate::error::{CoreError, Result};
use crate::physics::PhysConsts;

/// Strip-conductor geometry and drive.
#[derive(Debug, Clone, PartialEq)]
pub struct WireGeometry {
    /// Strip width, in m.
    pub width: f64,
    /// Distance from the conductor plane to the observation (NV) plane, in m.
    pub standoff: f64,
    /// Current amplitude, in A, flowing along `axis`.
    pub current: f64,
    /// Unit vector along the strip, in the observation-plane frame. Must lie
    /// in the plane (z = 0); the default is ŷ.
    pub axis: [f64; 3],
    /// Position of the strip center line along the across direction, in m.
    /// Zero centers the wire on the coordinate origin.
    pub lateral_offset: f64,
}

impl Default for WireGeometry {
    fn default() -> Self {
        Self {
            width: 10e-6,
            standoff: 2e-6,
            current: 0.0,
            axis: [0.0, 1.0, 0.0],
            lateral_offset: 0.0,
        }
    }
}

impl WireGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("width", self.width), ("standoff", self.standoff)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CoreError::Domain(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !self.current.is_finite() || !self.lateral_offset.is_finite() {
            return Err(CoreError::Domain("current and lateral_offset must be finite".into()));
        }
        let [ax, ay, az] = self.axis;
        let norm = (ax * ax + ay * ay + az * az).sqrt();
        if (norm - 1.0).abs() > 1e-9 || az.abs() > 1e-12 {
            return Err(CoreError::Domain(format!(
                "wire axis must be an in-plane unit vector, got [{ax}, {ay}, {az}]"
            )));
        }
        Ok(())
    }

    /// In-plane unit vector across the strip (x̂ for the default axis ŷ).
    pub fn across(&self) -> [f64; 3] {
        [self.axis[1], -self.axis[0], 0.0]
    }
}

/// Closed-form field of the strip at across-offset `x` (m, from the center
/// line) in the observation plane: returns (B_across, B_z) in T.
///
/// B_across = μ0·I/(2πw)·[atan((x + w/2)/d) − atan((x − w/2)/d)]
/// B_z      = μ0·I/(4πw)·ln(((x − w/2)² + d²)/((x + w/2)² + d²))
///
/// B_across is even in x, B_z odd; both follow from integrating the field of
/// filaments distributed uniformly over the strip width.
pub fn strip_field(consts: &PhysConsts, geom: &WireGeometry, x: f64) -> (f64, f64) {
    let a = 0.5 * geom.width;
    let d = geom.standoff;
    let pref = consts.mu0 * geom.current / (2.0 * std::f64::consts::PI * geom.width);
    let bx = pref * (((x + a) / d).atan() - ((x - a) / d).atan());
    let num = (x - a) * (x - a) + d * d;
    let den = (x + a) * (x + a) + d * d;
    let bz = 0.5 * pref * (num / den).ln();
    (bx, bz)
}

/// Full lab-frame field vector at an observation-plane point `(px, py)` in m.
/// The strip is translation-invariant along its axis, so only the across
/// component of the position (relative to the strip's `lateral_offset`)
/// enters.
pub fn strip_field_vector(consts: &PhysConsts, geom: &WireGeometry, px: f64, py: f64) -> [f64; 3] {
    let c = geom.across();
    let s = px * c[0] + py * c[1] - geom.lateral_offset;
    let (b_across, b_z) = strip_field(consts, geom, s);
    [b_across * c[0], b_across * c[1], b_z]
}

/// Component of a field vector along the NV axis, in T.
pub fn project_to_nv(b: [f64; 3], nv_axis: [f64; 3]) -> f64 {
    b[0] * nv_axis[0] + b[1] * nv_axis[1] + b[2] * nv_axis[2]
}

/// Rectangular sampling grid in the observation plane.
#[derive(Debug, Clone, PartialEq)]
pub struct MapGrid {
    /// Samples across the strip (x).
    pub nx: usize,
    /// Samples along the strip (y).
    pub ny: usize,
    /// Grid spacing, in m (square cells).
    pub spacing: f64,
    /// Lab-frame (x, y) of the grid midpoint, in m.
    pub origin: [f64; 2],
}

impl MapGrid {
    /// A grid whose midpoint sits on the coordinate origin.
    pub fn centered(nx: usize, ny: usize, spacing: f64) -> Self {
        Self {
            nx,
            ny,
            spacing,
            origin: [0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(CoreError::Domain("map grid must have nx, ny >= 1".into()));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(CoreError::Domain(format!(
                "grid spacing must be finite and > 0, got {}",
                self.spacing
            )));
        }
        if !(self.origin[0].is_finite() && self.origin[1].is_finite()) {
            return Err(CoreError::Domain("grid origin must be finite".into()));
        }
        Ok(())
    }

    /// x coordinate of column `i`; the grid midpoint maps to `origin`.
    pub fn x_at(&self, i: usize) -> f64 {
        self.origin[0] + (i as f64 - 0.5 * (self.nx as f64 - 1.0)) * self.spacing
    }

    /// y coordinate of row `j`.
    pub fn y_at(&self, j: usize) -> f64 {
        self.origin[1] + (j as f64 - 0.5 * (self.ny as f64 - 1.0)) * self.spacing
    }
}

/// Scalar field sampled on a [`MapGrid`]; values in T (projected field).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub grid: MapGrid,
    /// Row-major values: index j·nx + i for row j (y), column i (x).
    pub values: Vec<f64>,
}

impl FieldMap {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute value over the map.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| v.abs().max(m))
    }
}

/// Sample the NV-projected strip field on `grid`.
pub fn build_field_map(
    consts: &PhysConsts,
    geom: &WireGeometry,
    nv_axis: [f64; 3],
    grid: &MapGrid,
) -> Result<FieldMap> {
    geom.validate()?;
    grid.validate()?;
    let mut values = Vec::with_capacity(grid.nx * grid.ny);
    for j in 0..grid.ny {
        let y = grid.y_at(j);
        for i in 0..grid.nx {
            let x = grid.x_at(i);
            values.push(project_to_nv(strip_field_vector(consts, geom, x, y), nv_axis));
        }
    }
    Ok(FieldMap {
        grid: grid.clone(),
        values,
    })
}

/// Current (A) that produces a projected field `target` (T) at across-offset
/// `x` in the observation plane. Positions where the projection vanishes
/// (e.g. the center line in the default frame, where the field is purely
/// across-strip and perpendicular to the NV axis) have no solution.
pub fn calibrate_current(
    consts: &PhysConsts,
    geom: &WireGeometry,
    nv_axis: [f64; 3],
    target: f64,
    x: f64,
) -> Result<f64> {
    geom.validate()?;
    let unit = WireGeometry {
        current: 1.0,
        ..geom.clone()
    };
    let per_amp = project_to_nv(strip_field_vector(consts, &unit, x, 0.0), nv_axis);
    // Compare against the overall field scale at one ampere so the null test
    // is scale-free.
    let scale = consts.mu0 / (2.0 * std::f64::consts::PI * geom.width);
    if per_amp.abs() < 1e-12 * scale {
        return Err(CoreError::Domain(format!(
            "projected field vanishes at x = {x:.3e} m; no current can reach the target there"
        )));
    }
    Ok(target / per_amp)
}
