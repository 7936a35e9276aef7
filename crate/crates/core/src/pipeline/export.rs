use serde::{Deserialize, Serialize};

use super::PipelineError;

pub const KDE_POINTS: usize = 256;

/// One labelled score series: histogram counts over [0, 1] plus a Gaussian
/// kernel density sampled at [`KDE_POINTS`] evenly spaced points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDistribution {
    pub label: String,
    pub n: usize,
    pub counts: Vec<u64>,
    pub bandwidth: f64,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionExport {
    pub edges: Vec<f64>,
    pub grid: Vec<f64>,
    pub series: Vec<SeriesDistribution>,
}

fn bin_of(x: f64, bins: usize) -> usize {
    ((x * bins as f64).floor() as usize).min(bins - 1)
}

/// Silverman's rule, falling back to the sd or a small floor when the
/// spread vanishes.
fn bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    let iqr = (q(0.75) - q(0.25)) / 1.34;
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr),
        (true, false) => sd,
        _ => 0.0,
    };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        1e-3
    }
}

/// Histograms and density curves for score series on [0, 1].
pub fn export_distributions(
    series: &[(String, Vec<f64>)],
    bins: usize,
) -> Result<DistributionExport, PipelineError> {
    if bins < 2 {
        return Err(PipelineError::Config(format!("bins = {bins} must be at least 2")));
    }
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let grid: Vec<f64> = (0..KDE_POINTS)
        .map(|i| i as f64 / (KDE_POINTS - 1) as f64)
        .collect();
    let mut out = Vec::with_capacity(series.len());
    for (label, values) in series {
        if values.is_empty() {
            return Err(PipelineError::EmptySeries(label.clone()));
        }
        if let Some(&bad) = values.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(PipelineError::Config(format!(
                "series `{label}` holds {bad}, outside [0, 1]"
            )));
        }
        let mut counts = vec![0u64; bins];
        for &x in values {
            counts[bin_of(x, bins)] += 1;
        }
        let h = bandwidth(values);
        let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
        let density = grid
            .iter()
            .map(|&g| {
                norm * values
                    .iter()
                    .map(|&x| (-0.5 * ((g - x) / h).powi(2)).exp())
                    .sum::<f64>()
            })
            .collect();
        out.push(SeriesDistribution {
            label: label.clone(),
            n: values.len(),
            counts,
            bandwidth: h,
            density,
        });
    }
    Ok(DistributionExport {
        edges,
        grid,
        series: out,
    })
}

impl DistributionExport {
    /// Tab-separated `lower, upper, <label>...` count table.
    pub fn histogram_tsv(&self) -> String {
        let mut s = String::from("lower\tupper");
        for series in &self.series {
            s.push('\t');
            s.push_str(&series.label);
        }
        s.push('\n');
        for (i, pair) in self.edges.windows(2).enumerate() {
            s.push_str(&format!("{}\t{}", pair[0], pair[1]));
            for series in &self.series {
                s.push_str(&format!("\t{}", series.counts[i]));
            }
            s.push('\n');
        }
        s
    }

    /// Tab-separated `x, <label>...` density table.
    pub fn density_tsv(&self) -> String {
        let mut s = String::from("x");
        for series in &self.series {
            s.push('\t');
            s.push_str(&series.label);
        }
        s.push('\n');
        for (i, x) in self.grid.iter().enumerate() {
            s.push_str(&x.to_string());
            for series in &self.series {
                s.push_str(&format!("\t{}", series.density[i]));
            }
            s.push('\n');
        }
        s
    }
}
