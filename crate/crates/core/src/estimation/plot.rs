//! Binned means and local-linear fit segments around the cutoff.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{EstimationError, Kernel, LocalPoly, Side};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotBin {
    pub side: Side,
    pub x_left: f64,
    pub x_right: f64,
    pub count: usize,
    pub mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSegment {
    pub side: Side,
    pub x_left: f64,
    pub x_right: f64,
    pub y_left: f64,
    pub y_right: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdPlot {
    pub bins: Vec<PlotBin>,
    pub fits: Vec<FitSegment>,
}

/// `bins` evenly spaced bins per side on `[-h, h]` plus one fitted line per side.
pub fn rd_plot_data(x: &[f64], y: &[f64], bins: usize, kernel: Kernel, h: f64) -> Result<RdPlot, EstimationError> {
    if bins < 2 {
        return Err(EstimationError::Invalid("need at least 2 bins".into()));
    }
    if x.len() != y.len() {
        return Err(EstimationError::LengthMismatch { expected: x.len(), got: y.len() });
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(EstimationError::InvalidBandwidth(h));
    }
    let width = h / bins as f64;
    let mut sums = vec![(0usize, 0.0f64); 2 * bins];
    for (&xi, &yi) in x.iter().zip(y) {
        let slot = if Side::Left.contains(xi) && xi >= -h {
            (((xi + h) / width).floor() as usize).min(bins - 1)
        } else if Side::Right.contains(xi) && xi <= h {
            bins + ((xi / width).ceil() as usize).clamp(1, bins) - 1
        } else {
            continue;
        };
        sums[slot].0 += 1;
        sums[slot].1 += yi;
    }
    let bins_out = sums
        .iter()
        .enumerate()
        .map(|(k, &(count, sum))| {
            let (side, lo) = if k < bins {
                (Side::Left, -h + k as f64 * width)
            } else {
                (Side::Right, (k - bins) as f64 * width)
            };
            PlotBin {
                side,
                x_left: lo,
                x_right: lo + width,
                count,
                mean: (count > 0).then(|| sum / count as f64),
            }
        })
        .collect();
    let mut fits = Vec::with_capacity(2);
    for (side, lo, hi) in [(Side::Left, -h, 0.0), (Side::Right, 0.0, h)] {
        let fit = LocalPoly::fit(x, side, kernel, h, 1)?;
        let c = fit.coefs(y);
        fits.push(FitSegment { side, x_left: lo, x_right: hi, y_left: fit.predict(&c, lo), y_right: fit.predict(&c, hi) });
    }
    Ok(RdPlot { bins: bins_out, fits })
}

impl RdPlot {
    /// CSV with columns `kind,side,x_left,x_right,count,mean,y_left,y_right`.
    pub fn to_csv(&self) -> String {
        let side = |s: Side| match s {
            Side::Left => "left",
            Side::Right => "right",
        };
        let mut out = String::from("kind,side,x_left,x_right,count,mean,y_left,y_right\n");
        for b in &self.bins {
            let mean = b.mean.map(|m| m.to_string()).unwrap_or_default();
            let _ = writeln!(out, "bin,{},{},{},{},{},,", side(b.side), b.x_left, b.x_right, b.count, mean);
        }
        for f in &self.fits {
            let _ = writeln!(out, "fit,{},{},{},,,{},{}", side(f.side), f.x_left, f.x_right, f.y_left, f.y_right);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_shape() {
        let x: Vec<f64> = (0..200).map(|i| -1.0 + i as f64 / 100.0).collect();
        let y: Vec<f64> = x.iter().map(|x| 2.0 * x + 1.0).collect();
        let p = rd_plot_data(&x, &y, 10, Kernel::Triangular, 0.5).unwrap();
        assert_eq!(p.bins.len(), 20);
        assert_eq!(p.fits.len(), 2);
        let in_window = x.iter().filter(|v| v.abs() <= 0.5).count();
        assert_eq!(p.bins.iter().map(|b| b.count).sum::<usize>(), in_window);
        assert!((p.fits[1].y_right - 2.0).abs() < 1e-10);
        assert_eq!(p.to_csv().lines().count(), 23);
    }

    #[test]
    fn empty_bins_have_no_mean() {
        let x = vec![-0.9, -0.8, -0.7, 0.7, 0.8, 0.9];
        let y = vec![1.0; 6];
        let p = rd_plot_data(&x, &y, 4, Kernel::Uniform, 1.0).unwrap();
        let empty = p.bins.iter().find(|b| b.count == 0).unwrap();
        assert!(empty.mean.is_none());
    }
}
