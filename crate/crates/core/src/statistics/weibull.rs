//! Two-parameter Weibull model of density-conditioned speed reduction.
//!
//! `f(x) = (b/a) (x/a)^(b-1) exp(-(x/a)^b)` with scale `a` and shape `b`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::world::has_extension;

pub const DENSITY_LEVELS: usize = 10;

/// Residual tolerance for the profile shape equation.
pub const SHAPE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    /// Scale.
    pub a: f64,
    /// Shape.
    pub b: f64,
}

impl WeibullParams {
    pub fn new(a: f64, b: f64) -> Result<Self, StatsError> {
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
            return Err(StatsError::InvalidParams { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn pdf(&self, x: f64) -> Result<f64, StatsError> {
        weibull_pdf(x, *self)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        -(-(x / self.a).powf(self.b)).exp_m1()
    }

    /// Inverse CDF, `a * (-ln(1-u))^(1/b)`; `u = 1` maps to infinity.
    pub fn quantile(&self, u: f64) -> f64 {
        self.a * (-(-u).ln_1p()).powf(1.0 / self.b)
    }

    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        let (a, b) = (self.a, self.b);
        samples
            .iter()
            .map(|&x| b.ln() - a.ln() + (b - 1.0) * (x / a).ln() - (x / a).powf(b))
            .sum()
    }
}

pub fn weibull_pdf(x: f64, p: WeibullParams) -> Result<f64, StatsError> {
    if x.is_nan() || x < 0.0 {
        return Err(StatsError::Domain(format!(
            "pdf argument must be >= 0, got {x}"
        )));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let z = x / p.a;
    if x == 0.0 {
        // limit depends on shape: infinite below 1, 1/a at 1, zero above
        return Ok(match p.b.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => 1.0 / p.a,
            _ => 0.0,
        });
    }
    Ok((p.b / p.a) * z.powf(p.b - 1.0) * (-z.powf(p.b)).exp())
}

fn validate_samples(samples: &[f64]) -> Result<(), StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::Domain(format!(
            "at least 2 samples required, got {}",
            samples.len()
        )));
    }
    if let Some(&x) = samples.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(StatsError::Domain(format!(
            "samples must be finite and positive, got {x}"
        )));
    }
    Ok(())
}

/// Closed-form MLE of the scale for a fixed shape: `(mean x^b)^(1/b)`.
pub fn scale_mle_for_shape(samples: &[f64], shape: f64) -> Result<f64, StatsError> {
    validate_samples(samples)?;
    if !(shape.is_finite() && shape > 0.0) {
        return Err(StatsError::Domain(format!(
            "shape must be positive, got {shape}"
        )));
    }
    let max = samples.iter().cloned().fold(f64::MIN, f64::max);
    let mean = samples.iter().map(|&x| (x / max).powf(shape)).sum::<f64>() / samples.len() as f64;
    Ok(max * mean.powf(1.0 / shape))
}

/// Profile score in the shape, evaluated on samples scaled to `max = 1`.
/// Strictly decreasing in `b`; its root is the shape MLE.
fn shape_residual(scaled_ln: &[f64], mean_ln: f64, b: f64) -> f64 {
    let (mut s0, mut s1) = (0.0, 0.0);
    for &l in scaled_ln {
        let w = (b * l).exp();
        s0 += w;
        s1 += w * l;
    }
    1.0 / b + mean_ln - s1 / s0
}

/// Maximum-likelihood fit. The shape solves the profile score equation by
/// bracketed bisection; the scale follows in closed form.
pub fn fit_weibull_mle(samples: &[f64]) -> Result<WeibullParams, StatsError> {
    validate_samples(samples)?;
    let max = samples.iter().cloned().fold(f64::MIN, f64::max);
    let min = samples.iter().cloned().fold(f64::MAX, f64::min);
    if max == min {
        return Err(StatsError::DegenerateSample);
    }

    let scaled_ln: Vec<f64> = samples.iter().map(|&x| (x / max).ln()).collect();
    let mean_ln = scaled_ln.iter().sum::<f64>() / scaled_ln.len() as f64;
    let g = |b: f64| shape_residual(&scaled_ln, mean_ln, b);

    let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
    while g(lo) <= 0.0 {
        lo *= 0.5;
        if lo < 1e-12 {
            return Err(StatsError::NoConvergence);
        }
    }
    while g(hi) >= 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(StatsError::NoConvergence);
        }
    }

    let mut shape = 0.5 * (lo + hi);
    for _ in 0..400 {
        shape = 0.5 * (lo + hi);
        let r = g(shape);
        if r == 0.0 || hi - lo <= f64::EPSILON * shape {
            break;
        }
        if r > 0.0 {
            lo = shape;
        } else {
            hi = shape;
        }
    }
    if g(shape).abs() > SHAPE_RESIDUAL_TOL {
        return Err(StatsError::NoConvergence);
    }

    let scale = scale_mle_for_shape(samples, shape)?;
    WeibullParams::new(scale, shape)
}

/// Per-density-level Weibull parameters plus the cap applied to sampled
/// reductions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeibullTable {
    entries: [WeibullParams; DENSITY_LEVELS],
    reduction_cap: f64,
}

pub const DEFAULT_REDUCTION_CAP: f64 = 1.0;

impl Default for WeibullTable {
    /// Placeholder table: `a = 0.05 * level`, `b = 1.5`. Expected reduction
    /// grows with density; not fitted to observed data.
    fn default() -> Self {
        let entries = std::array::from_fn(|i| WeibullParams {
            a: 0.05 * (i + 1) as f64,
            b: 1.5,
        });
        Self {
            entries,
            reduction_cap: DEFAULT_REDUCTION_CAP,
        }
    }
}

impl WeibullTable {
    pub fn new(
        entries: [WeibullParams; DENSITY_LEVELS],
        reduction_cap: f64,
    ) -> Result<Self, StatsError> {
        for p in &entries {
            WeibullParams::new(p.a, p.b)?;
        }
        let mut t = Self {
            entries,
            reduction_cap: 0.0,
        };
        t.set_reduction_cap(reduction_cap)?;
        Ok(t)
    }

    pub fn params(&self, level: u8) -> Result<WeibullParams, StatsError> {
        match level {
            1..=10 => Ok(self.entries[level as usize - 1]),
            _ => Err(StatsError::Domain(format!(
                "density level {level} not in 1..=10"
            ))),
        }
    }

    pub fn entries(&self) -> &[WeibullParams; DENSITY_LEVELS] {
        &self.entries
    }

    pub fn reduction_cap(&self) -> f64 {
        self.reduction_cap
    }

    pub fn set_reduction_cap(&mut self, cap: f64) -> Result<(), StatsError> {
        if !(0.0..=1.0).contains(&cap) {
            return Err(StatsError::Domain(format!(
                "reduction cap must be in [0, 1], got {cap}"
            )));
        }
        self.reduction_cap = cap;
        Ok(())
    }

    pub fn with_reduction_cap(mut self, cap: f64) -> Result<Self, StatsError> {
        self.set_reduction_cap(cap)?;
        Ok(self)
    }

    /// Reads `level,a,b` rows (CSV) or a serialized table (JSON). CSV files
    /// carry no cap; the default cap applies.
    pub fn load(path: &Path) -> Result<Self, StatsError> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| StatsError::Io {
            path: display.clone(),
            message: e.to_string(),
        })?;
        if has_extension(path, "json") {
            let t: WeibullTable = serde_json::from_str(&text).map_err(|e| StatsError::Parse {
                path: display,
                message: e.to_string(),
            })?;
            return Self::new(t.entries, t.reduction_cap);
        }

        #[derive(Deserialize)]
        struct Row {
            level: u8,
            a: f64,
            b: f64,
        }
        let mut slots: [Option<WeibullParams>; DENSITY_LEVELS] = [None; DENSITY_LEVELS];
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        for row in reader.deserialize::<Row>() {
            let row = row.map_err(|e| StatsError::Parse {
                path: display.clone(),
                message: e.to_string(),
            })?;
            if !(1..=10).contains(&row.level) {
                return Err(StatsError::Parse {
                    path: display,
                    message: format!("level {} not in 1..=10", row.level),
                });
            }
            let slot = &mut slots[row.level as usize - 1];
            if slot.is_some() {
                return Err(StatsError::Parse {
                    path: display,
                    message: format!("level {} listed twice", row.level),
                });
            }
            *slot = Some(WeibullParams::new(row.a, row.b)?);
        }
        let mut entries = [WeibullParams { a: 1.0, b: 1.0 }; DENSITY_LEVELS];
        for (i, slot) in slots.iter().enumerate() {
            entries[i] = slot.ok_or_else(|| StatsError::Parse {
                path: display.clone(),
                message: format!("level {} missing", i + 1),
            })?;
        }
        Self::new(entries, DEFAULT_REDUCTION_CAP)
    }

    pub fn save_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["level", "a", "b"])?;
        for (i, p) in self.entries.iter().enumerate() {
            w.write_record([(i + 1).to_string(), p.a.to_string(), p.b.to_string()])?;
        }
        w.flush()
    }
}

/// Reduction for a given uniform draw `u` in `[0, 1]`, clamped to `[0, cap]`.
pub fn reduction_from_uniform(params: WeibullParams, u: f64, cap: f64) -> f64 {
    let x = params.quantile(u);
    if x.is_nan() {
        return 0.0;
    }
    x.clamp(0.0, cap)
}

/// Draws IP_i for a density level by inverse-transform sampling.
pub fn sample_reduction<R: Rng + ?Sized>(
    table: &WeibullTable,
    level: u8,
    rng: &mut R,
) -> Result<f64, StatsError> {
    let params = table.params(level)?;
    let u: f64 = rng.gen();
    Ok(reduction_from_uniform(params, u, table.reduction_cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pdf_examples() {
        let exp = WeibullParams::new(1.0, 1.0).unwrap();
        assert!((exp.pdf(0.5).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        let rayleigh = WeibullParams::new(1.0, 2.0).unwrap();
        assert!((rayleigh.pdf(1.0).unwrap() - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(rayleigh.pdf(1e6).unwrap(), 0.0);
        assert_eq!(rayleigh.pdf(f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn pdf_rejects_negative() {
        let p = WeibullParams::new(1.0, 1.0).unwrap();
        assert!(matches!(p.pdf(-0.1), Err(StatsError::Domain(_))));
    }

    #[test]
    fn params_must_be_positive() {
        assert!(WeibullParams::new(0.0, 1.0).is_err());
        assert!(WeibullParams::new(1.0, -2.0).is_err());
    }

    #[test]
    fn reduction_at_zero_draw_is_zero() {
        let p = WeibullParams::new(3.0, 0.7).unwrap();
        assert_eq!(reduction_from_uniform(p, 0.0, 1.0), 0.0);
    }

    #[test]
    fn reduction_inverts_exponential_cdf() {
        let p = WeibullParams::new(1.0, 1.0).unwrap();
        let u = 1.0 - (-1.0f64).exp();
        assert!((p.quantile(u) - 1.0).abs() < 1e-12);
        assert!((reduction_from_uniform(p, u, 10.0) - 1.0).abs() < 1e-12);
        assert_eq!(reduction_from_uniform(p, 1.0, 0.8), 0.8);
    }

    #[test]
    fn zero_cap_disables_reduction() {
        let table = WeibullTable::default().with_reduction_cap(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for level in 1..=10 {
            assert_eq!(sample_reduction(&table, level, &mut rng).unwrap(), 0.0);
        }
    }

    #[test]
    fn cap_out_of_range_rejected() {
        assert!(WeibullTable::default().with_reduction_cap(1.5).is_err());
        assert!(WeibullTable::default().with_reduction_cap(-0.1).is_err());
    }

    #[test]
    fn default_table_grows_with_level() {
        let t = WeibullTable::default();
        assert_eq!(t.params(1).unwrap(), WeibullParams { a: 0.05, b: 1.5 });
        assert!((t.params(10).unwrap().a - 0.5).abs() < 1e-15);
        assert!(t.params(0).is_err());
        assert!(t.params(11).is_err());
    }

    #[test]
    fn fit_rejects_degenerate_and_domain() {
        assert!(matches!(
            fit_weibull_mle(&[1.0, 1.0, 1.0]),
            Err(StatsError::DegenerateSample)
        ));
        assert!(matches!(
            fit_weibull_mle(&[1.0, -2.0]),
            Err(StatsError::Domain(_))
        ));
        assert!(matches!(
            fit_weibull_mle(&[1.0]),
            Err(StatsError::Domain(_))
        ));
    }

    #[test]
    fn exponential_scale_is_sample_mean() {
        let e = std::f64::consts::E;
        let a = scale_mle_for_shape(&[1.0, e], 1.0).unwrap();
        assert!((a - (1.0 + e) / 2.0).abs() < 1e-12);
        assert!((a - 1.859).abs() < 1e-3);
    }

    #[test]
    fn fit_satisfies_score_equation() {
        let samples = [0.3, 1.1, 0.7, 2.5, 1.9, 0.05, 0.8];
        let p = fit_weibull_mle(&samples).unwrap();
        let n = samples.len() as f64;
        let s0: f64 = samples.iter().map(|x| x.powf(p.b)).sum();
        let s1: f64 = samples.iter().map(|x| x.powf(p.b) * x.ln()).sum();
        let mean_ln = samples.iter().map(|x| x.ln()).sum::<f64>() / n;
        assert!((1.0 / p.b + mean_ln - s1 / s0).abs() < SHAPE_RESIDUAL_TOL);
        assert!((p.a - (s0 / n).powf(1.0 / p.b)).abs() < 1e-12);
    }

    #[test]
    fn fit_beats_perturbed_neighbours() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth = WeibullParams::new(2.0, 1.5).unwrap();
        let samples: Vec<f64> = (0..500).map(|_| truth.quantile(rng.gen())).collect();
        let fit = fit_weibull_mle(&samples).unwrap();
        let best = fit.log_likelihood(&samples);
        for da in [-0.01, 0.0, 0.01] {
            for db in [-0.01, 0.0, 0.01] {
                let q = WeibullParams::new(fit.a * (1.0 + da), fit.b * (1.0 + db)).unwrap();
                assert!(best >= q.log_likelihood(&samples));
            }
        }
    }

    #[test]
    fn table_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("table.csv");
        WeibullTable::default().save_csv(&p).unwrap();
        assert_eq!(WeibullTable::load(&p).unwrap(), WeibullTable::default());
    }

    #[test]
    fn table_csv_missing_level_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("table.csv");
        std::fs::write(&p, "level,a,b\n1,0.1,1.5\n").unwrap();
        assert!(matches!(
            WeibullTable::load(&p),
            Err(StatsError::Parse { .. })
        ));
    }
}
