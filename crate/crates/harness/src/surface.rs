//! Power-criterion surfaces over a single test location.

use std::io::Write;

use fssd_core::optimize::power_criterion;
use fssd_core::{GaussKernel, Sample, ScoredModel, TestLocations};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Rectangular grid; coordinate `i` takes `steps[i]` evenly spaced values in `[lo[i], hi[i]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub steps: Vec<usize>,
}

impl GridSpec {
    pub fn uniform(d: usize, lo: f64, hi: f64, steps: usize) -> Self {
        Self { lo: vec![lo; d], hi: vec![hi; d], steps: vec![steps; d] }
    }

    fn axis(&self, i: usize) -> Vec<f64> {
        let m = self.steps[i];
        if m == 1 {
            return vec![self.lo[i]];
        }
        (0..m).map(|k| self.lo[i] + (self.hi[i] - self.lo[i]) * k as f64 / (m - 1) as f64).collect()
    }

    /// Grid points with the first coordinate varying slowest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut pts = vec![Vec::new()];
        for i in 0..self.lo.len() {
            let axis = self.axis(i);
            pts = pts.into_iter().flat_map(|p| axis.iter().map(move |a| [p.clone(), vec![*a]].concat())).collect();
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub grid: GridSpec,
    /// Kernel bandwidth `σ²`; the median heuristic when `None`.
    pub bandwidth_sq: Option<f64>,
    pub gamma: f64,
    /// Locations held fixed while the scanned location moves.
    pub fixed: Vec<Vec<f64>>,
}

impl ScanSpec {
    pub fn new(grid: GridSpec) -> Self {
        Self { grid, bandwidth_sq: None, gamma: 1e-4, fixed: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub points: Vec<Vec<f64>>,
    /// Criterion per point; NaN where the location coincides with a fixed one.
    pub values: Vec<f64>,
    pub argmax: usize,
    pub bandwidth_sq: f64,
}

/// Evaluates the power criterion with the scanned location at every grid point.
pub fn run_surface_scan(model: &dyn ScoredModel, sample: &Sample, scan: &ScanSpec) -> Result<Surface> {
    let d = sample.dim();
    if d > 2 {
        return Err(HarnessError::UnsupportedScan(d));
    }
    let g = &scan.grid;
    if g.lo.len() != d || g.hi.len() != d || g.steps.len() != d {
        return Err(HarnessError::Config(format!("grid must have {d} coordinates")));
    }
    if g.steps.contains(&0) || g.lo.iter().zip(&g.hi).any(|(l, h)| l.is_nan() || h.is_nan() || l > h) {
        return Err(HarnessError::Config("grid needs lo <= hi and at least one step per axis".into()));
    }
    if scan.fixed.iter().any(|f| f.len() != d) {
        return Err(HarnessError::Config(format!("fixed locations must have {d} coordinates")));
    }
    let kernel = match scan.bandwidth_sq {
        Some(b) => GaussKernel::new(b)?,
        None => GaussKernel::from_median(sample)?,
    };
    let points = g.points();
    let values = points
        .par_iter()
        .map(|v| {
            let rows: Vec<Vec<f64>> = std::iter::once(v.clone()).chain(scan.fixed.iter().cloned()).collect();
            match TestLocations::from_rows(&rows, kernel) {
                Ok(locs) => Ok(power_criterion(model, sample, &locs, scan.gamma)?),
                Err(_) => Ok(f64::NAN),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let argmax = (0..values.len())
        .filter(|&i| !values[i].is_nan())
        .max_by(|&a, &b| values[a].total_cmp(&values[b]))
        .ok_or_else(|| HarnessError::Config("no valid grid point".into()))?;
    Ok(Surface { points, values, argmax, bandwidth_sq: kernel.bandwidth_sq() })
}

/// One row per grid point: coordinates, criterion, and an `is_argmax` flag.
pub fn write_surface_csv<W: Write>(surface: &Surface, out: W) -> Result<()> {
    let d = surface.points.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=d).map(|i| format!("v{i}")).collect();
    header.extend(["criterion".to_string(), "is_argmax".to_string()]);
    w.write_record(&header)?;
    for (i, (p, v)) in surface.points.iter().zip(&surface.values).enumerate() {
        let mut rec: Vec<String> = p.iter().map(f64::to_string).collect();
        rec.push(v.to_string());
        rec.push(u8::from(i == surface.argmax).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
