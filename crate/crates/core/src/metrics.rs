//! Contrast and error metrics over reconstruction / ground-truth pairs.

use std::collections::VecDeque;

use crate::error::{check_len, Error, Result};
use crate::geometry::ImagingGrid;

/// Inclusion cells are `true`; the background is the complement.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    grid: ImagingGrid,
    cells: Vec<bool>,
}

impl RegionMask {
    pub fn new(grid: ImagingGrid, cells: Vec<bool>) -> Result<Self> {
        check_len(grid.n_cells(), cells.len(), "region mask")?;
        Ok(Self { grid, cells })
    }

    /// Cells where `values > threshold`.
    pub fn threshold(grid: ImagingGrid, values: &[f64], threshold: f64) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| v > threshold).collect())
    }

    pub fn grid(&self) -> &ImagingGrid {
        &self.grid
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Number of 4-connected components of `true` cells.
    pub fn connected_components(&self) -> usize {
        let (rows, cols) = (self.grid.n_axial(), self.grid.n_lateral());
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::new();
        let mut components = 0;
        for start in 0..self.cells.len() {
            if !self.cells[start] || seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(k) = queue.pop_front() {
                let (r, c) = (k / cols, k % cols);
                let neighbours = [
                    (r > 0).then(|| k - cols),
                    (r + 1 < rows).then(|| k + cols),
                    (c > 0).then(|| k - 1),
                    (c + 1 < cols).then(|| k + 1),
                ];
                for nb in neighbours.into_iter().flatten() {
                    if self.cells[nb] && !seen[nb] {
                        seen[nb] = true;
                        queue.push_back(nb);
                    }
                }
            }
        }
        components
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl RegionStats {
    fn from_values<'a>(values: impl Iterator<Item = &'a f64> + Clone) -> Self {
        let count = values.clone().count();
        let mean = values.clone().sum::<f64>() / count as f64;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
        Self {
            mean,
            std: var.sqrt(),
            count,
        }
    }
}

/// Inclusion and background statistics of `image` under `mask`.
pub fn region_stats(image: &[f64], mask: &RegionMask) -> Result<(RegionStats, RegionStats)> {
    check_len(mask.cells.len(), image.len(), "image vs mask")?;
    let inside = mask.count();
    if inside == 0 || inside == mask.cells.len() {
        return Err(Error::invalid(
            "mask",
            "needs at least one inclusion and one background cell",
        ));
    }
    let select = |want: bool| {
        image
            .iter()
            .zip(&mask.cells)
            .filter(move |(_, &m)| m == want)
            .map(|(v, _)| v)
    };
    Ok((
        RegionStats::from_values(select(true)),
        RegionStats::from_values(select(false)),
    ))
}

/// `C = 2|μ_inc − μ_bkg| / (|μ_inc| + |μ_bkg|)`; zero when both means vanish.
pub fn contrast(inc: f64, bkg: f64) -> f64 {
    let denom = inc.abs() + bkg.abs();
    if denom == 0.0 {
        0.0
    } else {
        2.0 * (inc - bkg).abs() / denom
    }
}

/// Contrast-ratio fraction `Ĉ / C*`.
pub fn crf(recon: &[f64], truth: &[f64], mask: &RegionMask) -> Result<f64> {
    check_len(truth.len(), recon.len(), "recon vs truth")?;
    let (ti, tb) = region_stats(truth, mask)?;
    let true_contrast = contrast(ti.mean, tb.mean);
    if true_contrast == 0.0 {
        return Err(Error::ZeroContrast(
            "ground truth has no inclusion contrast",
        ));
    }
    let (ri, rb) = region_stats(recon, mask)?;
    Ok(contrast(ri.mean, rb.mean) / true_contrast)
}

/// `|μ_inc − μ_bkg| / √(σ²_inc + σ²_bkg)` with population variances. Two
/// flat regions with equal means give 0.
pub fn cnr(image: &[f64], mask: &RegionMask) -> Result<f64> {
    let (inc, bkg) = region_stats(image, mask)?;
    Ok(cnr_from_stats(&inc, &bkg))
}

fn cnr_from_stats(inc: &RegionStats, bkg: &RegionStats) -> f64 {
    let diff = (inc.mean - bkg.mean).abs();
    let noise = (inc.std * inc.std + bkg.std * bkg.std).sqrt();
    if noise == 0.0 {
        if diff == 0.0 {
            log::warn!("CNR is 0/0 (both regions flat with equal means); reporting 0");
            return 0.0;
        }
        return f64::INFINITY;
    }
    diff / noise
}

pub fn rmse(recon: &[f64], truth: &[f64]) -> Result<f64> {
    check_len(truth.len(), recon.len(), "recon vs truth")?;
    if recon.is_empty() {
        return Err(Error::invalid("image", "empty"));
    }
    let sq: f64 = recon
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sq / recon.len() as f64).sqrt())
}

/// `20 log10(max(recon) / RMSE)`; `+∞` when the reconstruction is exact.
pub fn psnr(recon: &[f64], truth: &[f64]) -> Result<f64> {
    let err = rmse(recon, truth)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    let peak = recon.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(20.0 * (peak / err).log10())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub crf: f64,
    pub cnr: f64,
    pub rmse: f64,
    pub psnr: f64,
    pub inclusion: RegionStats,
    pub background: RegionStats,
}

impl MetricsReport {
    pub fn evaluate(recon: &[f64], truth: &[f64], mask: &RegionMask) -> Result<Self> {
        let (inclusion, background) = region_stats(recon, mask)?;
        Ok(Self {
            crf: crf(recon, truth, mask)?,
            cnr: cnr_from_stats(&inclusion, &background),
            rmse: rmse(recon, truth)?,
            psnr: psnr(recon, truth)?,
            inclusion,
            background,
        })
    }

    pub fn psnr_is_infinite(&self) -> bool {
        self.psnr.is_infinite()
    }

    const FIELDS: [&'static str; 10] = [
        "crf",
        "cnr",
        "rmse",
        "psnr",
        "mu_inc",
        "mu_bkg",
        "sigma_inc",
        "sigma_bkg",
        "n_inc",
        "n_bkg",
    ];

    fn field_values(&self) -> [String; 10] {
        let f = |v: f64| format!("{v:.10e}");
        [
            f(self.crf),
            f(self.cnr),
            f(self.rmse),
            if self.psnr_is_infinite() {
                "inf".into()
            } else {
                f(self.psnr)
            },
            f(self.inclusion.mean),
            f(self.background.mean),
            f(self.inclusion.std),
            f(self.background.std),
            self.inclusion.count.to_string(),
            self.background.count.to_string(),
        ]
    }

    /// `key=value` lines.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (k, v) in Self::FIELDS.iter().zip(self.field_values()) {
            out.push_str(&format!("{k}={v}\n"));
        }
        out.push_str(&format!("psnr_infinite={}\n", self.psnr_is_infinite()));
        out
    }

    pub fn csv_header() -> String {
        Self::FIELDS.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        self.field_values().join(",")
    }
}
