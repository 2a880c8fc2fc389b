//! Observables extracted from correlation curves: the delay of maximum
//! coincidence rate, its dependence on the modulation frequency, lobe
//! structure, and the delay-integrated rate.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    sample_curve, truncation_for, CorrelationCurve, CosinePhaseFilter, EvalSettings, Method,
    PhysicalParams, SeriesModel, DEFAULT_TAIL_TOLERANCE,
};

/// Rates closer than this are treated as equal during the coarse scan.
const RATE_TIE: f64 = 1e-12;
const INV_GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Coarse-scan-then-refine settings for [`find_tau_max`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauMaxSearch {
    /// Half-width of the coarse grid in fs; `None` picks `M * beta + 5 T`.
    pub halfwidth: Option<f64>,
    pub grid_step: f64,
    pub refine_tol: f64,
    pub tail_tolerance: f64,
}

impl Default for TauMaxSearch {
    fn default() -> Self {
        Self {
            halfwidth: None,
            grid_step: 0.5,
            refine_tol: 0.01,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }
}

impl TauMaxSearch {
    fn validate(&self) -> Result<()> {
        if !(self.grid_step > 0.0 && self.grid_step <= 1.0) {
            return Err(Error::param(format!(
                "coarse grid step must lie in (0, 1] fs, got {}",
                self.grid_step
            )));
        }
        if !(self.refine_tol > 0.0 && self.refine_tol <= 0.01) {
            return Err(Error::param(format!(
                "refinement tolerance must lie in (0, 0.01] fs, got {}",
                self.refine_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauMaxResult {
    pub tau_max: f64,
    pub rate_at_max: f64,
    /// Width of the final refinement bracket in fs.
    pub refinement_width: f64,
}

/// Minimum search half-width that holds every retained lobe.
pub fn required_halfwidth(model: &SeriesModel, filter: &CosinePhaseFilter) -> f64 {
    model.max_order() as f64 * filter.mod_frequency_fs() + 5.0 * model.characteristic_time()
}

/// `a` beats `b`: higher rate, then smaller `|tau|`, then negative `tau`.
fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    let (ta, ra) = a;
    let (tb, rb) = b;
    if (ra - rb).abs() > RATE_TIE {
        return ra > rb;
    }
    if ta.abs() != tb.abs() {
        return ta.abs() < tb.abs();
    }
    ta < tb
}

/// Delay of the global maximum of the coincidence rate.
pub fn find_tau_max(
    params: &PhysicalParams,
    filter: &CosinePhaseFilter,
    search: &TauMaxSearch,
) -> Result<TauMaxResult> {
    search.validate()?;
    let model = SeriesModel::with_tolerance(params, filter, search.tail_tolerance)?;
    let needed = required_halfwidth(&model, filter);
    let halfwidth = match search.halfwidth {
        None => needed,
        Some(h) if h >= needed => h,
        Some(h) => {
            return Err(Error::Search(format!(
                "search half-width {h} fs does not cover all lobes (needs {needed:.3} fs)"
            )))
        }
    };
    locate_peak(&model, halfwidth, search.grid_step, search.refine_tol)
}

fn locate_peak(model: &SeriesModel, halfwidth: f64, step: f64, tol: f64) -> Result<TauMaxResult> {
    let k_max = (halfwidth / step).ceil() as i64;
    let mut best = (0.0, model.rate(0.0));
    let mut best_k = 0;
    for k in -k_max..=k_max {
        let tau = k as f64 * step;
        let cand = (tau, model.rate(tau));
        if better(cand, best) {
            best = cand;
            best_k = k;
        }
    }
    if best_k.abs() == k_max {
        return Err(Error::Search(format!(
            "maximum at the window edge tau = {} fs; widen the search",
            best.0
        )));
    }

    // Golden-section on the bracket around the coarse maximum.
    let mut a = (best_k - 1) as f64 * step;
    let mut b = (best_k + 1) as f64 * step;
    let mut c = b - INV_GOLDEN * (b - a);
    let mut d = a + INV_GOLDEN * (b - a);
    let mut fc = model.rate(c);
    let mut fd = model.rate(d);
    while b - a > 0.25 * tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_GOLDEN * (b - a);
            fc = model.rate(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_GOLDEN * (b - a);
            fd = model.rate(d);
        }
    }
    let mut peak = if better((c, fc), (d, fd)) {
        (c, fc)
    } else {
        (d, fd)
    };
    if better(best, peak) {
        peak = best;
    }

    // Parabolic polish through the bracket ends and the best point.
    let (fa, fb) = (model.rate(a), model.rate(b));
    let (x, fx) = peak;
    let denom = (x - a) * (fx - fb) - (x - b) * (fx - fa);
    if denom != 0.0 {
        let num = (x - a).powi(2) * (fx - fb) - (x - b).powi(2) * (fx - fa);
        let v = x - 0.5 * num / denom;
        if v > a && v < b {
            let fv = model.rate(v);
            if fv > fx {
                peak = (v, fv);
            }
        }
    }

    Ok(TauMaxResult {
        tau_max: peak.0,
        rate_at_max: peak.1,
        refinement_width: b - a,
    })
}

/// `tau_max` against modulation frequency, in ascending `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    beta_values: Vec<f64>,
    tau_max_values: Vec<f64>,
    rates: Vec<f64>,
}

impl SweepResult {
    pub fn new(beta_values: Vec<f64>, tau_max_values: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if beta_values.len() != tau_max_values.len() || beta_values.len() != rates.len() {
            return Err(Error::param("sweep columns differ in length"));
        }
        if beta_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param(
                "sweep beta values must be strictly increasing",
            ));
        }
        Ok(Self {
            beta_values,
            tau_max_values,
            rates,
        })
    }

    pub fn beta_values(&self) -> &[f64] {
        &self.beta_values
    }

    pub fn tau_max_values(&self) -> &[f64] {
        &self.tau_max_values
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.beta_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta_values.is_empty()
    }
}

/// `beta_start + k * beta_step` for every `k` that stays within `beta_end`.
pub fn beta_grid(beta_start: f64, beta_end: f64, beta_step: f64) -> Result<Vec<f64>> {
    let finite = beta_start.is_finite() && beta_end.is_finite() && beta_step.is_finite();
    if !(finite && beta_start >= 0.0 && beta_start < beta_end && beta_step > 0.0) {
        return Err(Error::param(format!(
            "beta range needs 0 <= start < end and step > 0, got {beta_start}..{beta_end} step {beta_step}"
        )));
    }
    let n = ((beta_end - beta_start) / beta_step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| beta_start + k as f64 * beta_step).collect())
}

/// Runs [`find_tau_max`] at every `beta` on the grid. Points are evaluated in
/// parallel; the result order depends only on `beta`.
pub fn sweep_beta(
    params: &PhysicalParams,
    alpha: f64,
    beta_start: f64,
    beta_end: f64,
    beta_step: f64,
    search: &TauMaxSearch,
) -> Result<SweepResult> {
    let betas = beta_grid(beta_start, beta_end, beta_step)?;
    let points: Vec<TauMaxResult> = betas
        .par_iter()
        .map(|&beta| {
            CosinePhaseFilter::new(alpha, beta)
                .and_then(|f| find_tau_max(params, &f, search))
                .map_err(|e| Error::Sweep {
                    beta_fs: beta,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    let (taus, rates) = points.iter().map(|r| (r.tau_max, r.rate_at_max)).unzip();
    SweepResult::new(betas, taus, rates)
}

/// Zero crossing of `tau_max(beta)` located by linear interpolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroCrossing {
    pub beta: f64,
    pub rising: bool,
}

/// Sign changes of `tau_max(beta)`, ignoring samples within `deadband` of 0.
pub fn zero_crossings(sweep: &SweepResult, deadband: f64) -> Vec<ZeroCrossing> {
    let mut out = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for (&b, &t) in sweep.beta_values.iter().zip(&sweep.tau_max_values) {
        if t.abs() <= deadband {
            continue;
        }
        if let Some((b0, t0)) = last {
            if (t0 < 0.0) != (t < 0.0) {
                out.push(ZeroCrossing {
                    beta: b0 + (b - b0) * t0 / (t0 - t),
                    rising: t > 0.0,
                });
            }
        }
        last = Some((b, t));
    }
    out
}

/// Dominant period of `tau_max(beta)` from the mean spacing of same-direction
/// zero crossings. Values within `deadband` fs of zero count as zero.
pub fn oscillation_period(sweep: &SweepResult, deadband: f64) -> Result<f64> {
    let crossings = zero_crossings(sweep, deadband);
    if crossings.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} zero crossings of tau_max; at least 3 are needed",
            crossings.len()
        )));
    }
    let mut spacings = Vec::new();
    for rising in [true, false] {
        let betas: Vec<f64> = crossings
            .iter()
            .filter(|c| c.rising == rising)
            .map(|c| c.beta)
            .collect();
        spacings.extend(betas.windows(2).map(|w| w[1] - w[0]));
    }
    Ok(spacings.iter().sum::<f64>() / spacings.len() as f64)
}

/// One curve per modulation depth at fixed `beta`, on the shared baseline.
pub fn alpha_family(
    params: &PhysicalParams,
    beta: f64,
    alphas: &[f64],
    tau_grid: &[f64],
    method: Method,
    settings: &EvalSettings,
) -> Result<Vec<CorrelationCurve>> {
    alphas
        .iter()
        .map(|&alpha| {
            let filter = CosinePhaseFilter::new(alpha, beta)?;
            sample_curve(params, &filter, tau_grid, method, settings)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lobe {
    pub center: f64,
    pub height: f64,
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LobeReport {
    pub lobes: Vec<Lobe>,
    pub threshold: f64,
}

/// Default lobe threshold as a fraction of the curve maximum.
pub const DEFAULT_LOBE_FRACTION: f64 = 0.01;

/// Strict local maxima above `min_height`; `None` uses 1% of the curve
/// maximum. Maxima closer than `T / 4` are merged into the taller one.
pub fn detect_lobes(curve: &CorrelationCurve, min_height: Option<f64>) -> Result<LobeReport> {
    let t = curve.params().characteristic_time();
    let grid = curve.tau_grid();
    let rates = curve.rates();
    let max_step = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if max_step > t / 20.0 {
        return Err(Error::Resolution(format!(
            "grid step {max_step} fs exceeds T/20 = {:.3} fs",
            t / 20.0
        )));
    }
    let (_, peak) = curve.max_sample();
    let threshold = min_height.unwrap_or(DEFAULT_LOBE_FRACTION * peak);

    let mut lobes: Vec<Lobe> = Vec::new();
    for i in 1..rates.len().saturating_sub(1) {
        let r = rates[i];
        if r > threshold && r > rates[i - 1] && r > rates[i + 1] {
            let cand = Lobe {
                center: grid[i],
                height: r,
                prominence: prominence(rates, i),
            };
            match lobes.last_mut() {
                Some(prev) if cand.center - prev.center < 0.25 * t => {
                    if cand.height > prev.height {
                        *prev = cand;
                    }
                }
                _ => lobes.push(cand),
            }
        }
    }
    Ok(LobeReport { lobes, threshold })
}

/// Height above the higher of the two lowest points separating sample `i`
/// from taller samples (or the curve ends) on either side.
fn prominence(rates: &[f64], i: usize) -> f64 {
    let h = rates[i];
    let mut left_min = h;
    for &r in rates[..i].iter().rev() {
        if r > h {
            break;
        }
        left_min = left_min.min(r);
    }
    let mut right_min = h;
    for &r in &rates[i + 1..] {
        if r > h {
            break;
        }
        right_min = right_min.min(r);
    }
    h - left_min.max(right_min)
}

/// Trapezoid integral of the rate over delay, in fs. Requires a uniform grid
/// whose edge rates have decayed below `1e-10` of the maximum.
pub fn total_coincidence_integral(curve: &CorrelationCurve) -> Result<f64> {
    let grid = curve.tau_grid();
    let rates = curve.rates();
    if grid.len() < 3 {
        return Err(Error::Window("need at least 3 samples".into()));
    }
    let step = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if grid
        .windows(2)
        .any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step.max(1.0))
    {
        return Err(Error::param(
            "coincidence integral needs a uniform tau grid",
        ));
    }
    let (_, peak) = curve.max_sample();
    let edge = rates[0].max(rates[rates.len() - 1]);
    if edge >= 1e-10 * peak {
        return Err(Error::Window(format!(
            "edge rate {edge:e} is not below 1e-10 of the peak {peak:e}"
        )));
    }
    let inner: f64 = rates[1..rates.len() - 1].iter().sum();
    Ok(step * (inner + 0.5 * (rates[0] + rates[rates.len() - 1])))
}

/// Truncation order for `alpha` at the default tail tolerance.
pub fn truncation_order(alpha: f64) -> Result<usize> {
    Ok(truncation_for(&CosinePhaseFilter::new(alpha, 0.0)?, DEFAULT_TAIL_TOLERANCE)?.max_order())
}
