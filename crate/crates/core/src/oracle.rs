//! Direct numerical integration of the two-photon amplitude over the
//! frequency offset `nu = w1 - w0/2`:
//!
//! ```text
//! A(tau) ~ integral dnu  exp(i nu tau) exp(-(T/2)^2 nu^2) exp(i alpha cos(beta w0/2 - beta nu))
//! ```
//!
//! Nothing here expands the filter phase into Bessel functions, so agreement
//! with [`crate::model::SeriesModel`] is an independent check of the series.
//!
//! The rule is the composite trapezoid on `[-nu_max, nu_max]`, doubled until two
//! successive normalized estimates agree. For a Gaussian-damped smooth
//! integrand the trapezoid error is dominated by aliasing, which vanishes once
//! the node spacing resolves the fastest oscillation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{check_grid, CosinePhaseFilter, EvalSettings, PhysicalParams, SeriesModel};

/// Required nodes per oscillation period of the fastest integrand component.
const NODES_PER_CYCLE: f64 = 40.0;
/// Weight cache length cap (2^22 nodes, 64 MiB of complex weights).
const MAX_CACHE_POINTS: usize = 1 << 22;

pub const ORACLE_DEPTHS: [f64; 5] = [0.0, 1.0, 2.0, 5.0, 10.0];
pub const ORACLE_MOD_FREQUENCIES_FS: [f64; 6] = [0.0, 25.0, 50.0, 53.0, 300.0, 1000.0];

/// Detection-side factors that do not depend on `nu` and therefore drop out
/// of `|A|^2`: `exp(-i (w0/2)(t1 + t2))` and `exp(i (k1* r1 + k2* r2))` with
/// both detectors at the same distance `r`. The `nu R / u` term vanishes for
/// `R = r1 - r2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalPhaseLedger {
    pub detection_time_sum_fs: f64,
    pub detector_distance_m: f64,
}

impl GlobalPhaseLedger {
    pub fn factor(&self, params: &PhysicalParams) -> Complex64 {
        let half_pump = 0.5 * params.pump_angular_frequency();
        // k* = (w0/2) / u, with w0 in rad/s
        let k_star = half_pump * 1e15 / params.group_velocity();
        let phase =
            -half_pump * self.detection_time_sum_fs + 2.0 * k_star * self.detector_distance_m;
        Complex64::from_polar(1.0, phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    /// Integrate over `|nu| <= 2 * folds / T`, where the Gaussian weight is
    /// `exp(-folds^2)`.
    pub halfwidth_folds: f64,
    pub initial_points: usize,
    pub max_points: usize,
    /// Convergence threshold on successive estimates, in units of the
    /// unmodulated peak amplitude.
    pub rel_tolerance: f64,
    /// Keep the dropped detection-side phases in the integrand.
    pub global_phases: Option<GlobalPhaseLedger>,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            halfwidth_folds: 6.0,
            initial_points: 1024,
            max_points: 1 << 20,
            rel_tolerance: 1e-11,
            global_phases: None,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.halfwidth_folds.is_finite() && self.halfwidth_folds > 0.0) {
            return Err(Error::param(format!(
                "quadrature halfwidth folds must be > 0, got {}",
                self.halfwidth_folds
            )));
        }
        if self.initial_points < 64 {
            return Err(Error::param(format!(
                "quadrature needs at least 64 initial points, got {}",
                self.initial_points
            )));
        }
        if self.max_points < 2 * self.initial_points {
            return Err(Error::param(format!(
                "quadrature max points {} leaves no room to refine {} initial points",
                self.max_points, self.initial_points
            )));
        }
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance <= 1e-6) {
            return Err(Error::param(format!(
                "quadrature tolerance must lie in (0, 1e-6], got {}",
                self.rel_tolerance
            )));
        }
        Ok(())
    }

    /// Upper integration limit in rad/fs.
    pub fn nu_max(&self, params: &PhysicalParams) -> f64 {
        2.0 * self.halfwidth_folds / params.characteristic_time()
    }

    /// Starting interval count: `initial_points` rounded up to a power of two
    /// and raised until it exceeds the resolution guard
    /// `40 * nu_max * max(|tau|, beta) / (2 pi)`.
    pub fn starting_points(
        &self,
        params: &PhysicalParams,
        filter: &CosinePhaseFilter,
        tau_fs: f64,
    ) -> usize {
        let scale = tau_fs.abs().max(filter.mod_frequency_fs());
        let guard = NODES_PER_CYCLE * self.nu_max(params) * scale / (2.0 * PI);
        let mut n = self.initial_points.next_power_of_two();
        while (n as f64) <= guard {
            n *= 2;
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureEstimate {
    /// Normalized so the unmodulated amplitude at `tau = 0` is 1.
    pub amplitude: Complex64,
    /// Difference between the last two normalized estimates.
    pub error_estimate: f64,
    /// Intervals used by the final estimate.
    pub points: usize,
    /// Successive-estimate differences, one per doubling.
    pub differences: Vec<f64>,
}

/// Integration frame shared by the cached and uncached evaluators.
#[derive(Debug, Clone, Copy)]
struct Frame {
    half_width: f64,
    quarter_t2: f64,
    depth: f64,
    mod_frequency: f64,
    carrier: f64,
    global: Complex64,
}

impl Frame {
    fn new(
        params: &PhysicalParams,
        filter: &CosinePhaseFilter,
        settings: &QuadratureSettings,
    ) -> Self {
        let t = params.characteristic_time();
        Self {
            half_width: settings.nu_max(params),
            quarter_t2: 0.25 * t * t,
            depth: filter.depth(),
            mod_frequency: filter.mod_frequency_fs(),
            carrier: 0.5 * filter.mod_frequency_fs() * params.pump_angular_frequency(),
            global: settings
                .global_phases
                .map(|g| g.factor(params))
                .unwrap_or(Complex64::new(1.0, 0.0)),
        }
    }

    /// Node `j` of `n` intervals. Identical bits for the same rational `j / n`.
    fn node(&self, j: usize, n: usize) -> f64 {
        self.half_width * ((2 * j) as f64 - n as f64) / n as f64
    }

    fn gaussian(&self, nu: f64) -> f64 {
        (-self.quarter_t2 * nu * nu).exp()
    }

    /// Everything except `exp(i nu tau)`.
    fn weight(&self, nu: f64) -> Complex64 {
        let filter = Complex64::from_polar(
            1.0,
            self.depth * (self.carrier - self.mod_frequency * nu).cos(),
        );
        self.global * (filter * self.gaussian(nu))
    }
}

fn cis(x: f64) -> Complex64 {
    let (s, c) = x.sin_cos();
    Complex64::new(c, s)
}

/// Integrand at frequency offset `nu` (rad/fs) and delay `tau` (fs), without
/// the detection-side global phases.
pub fn integrand(
    params: &PhysicalParams,
    filter: &CosinePhaseFilter,
    nu: f64,
    tau_fs: f64,
) -> Complex64 {
    let frame = Frame::new(params, filter, &QuadratureSettings::default());
    frame.weight(nu) * cis(nu * tau_fs)
}

/// Runs the doubling trapezoid. `sample(j, n)` returns the integrand and the
/// normalization integrand (the unmodulated Gaussian) at node `j` of `n`.
fn doubling_trapezoid(
    tau_fs: f64,
    start: usize,
    settings: &QuadratureSettings,
    sample: impl Fn(usize, usize) -> (Complex64, f64),
) -> Result<QuadratureEstimate> {
    if start > settings.max_points / 2 {
        return Err(Error::param(format!(
            "resolving tau = {tau_fs} fs needs {start} initial points, \
             more than half of max_points {}",
            settings.max_points
        )));
    }

    let mut n = start;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut anchor = 0.0;
    for j in 0..=n {
        let (f, g) = sample(j, n);
        let w = if j == 0 || j == n { 0.5 } else { 1.0 };
        sum += f * w;
        anchor += g * w;
    }
    let mut estimate = sum / anchor;
    let mut differences = Vec::new();

    loop {
        let finer = 2 * n;
        let mut odd = Complex64::new(0.0, 0.0);
        let mut odd_anchor = 0.0;
        for j in (1..finer).step_by(2) {
            let (f, g) = sample(j, finer);
            odd += f;
            odd_anchor += g;
        }
        // Step sizes cancel in the normalized ratio; only the relative weight
        // of old and new nodes matters.
        sum += odd;
        anchor += odd_anchor;
        let next = sum / anchor;
        let diff = (next - estimate).norm();
        differences.push(diff);
        n = finer;

        if diff < settings.rel_tolerance {
            return Ok(QuadratureEstimate {
                amplitude: next,
                error_estimate: diff,
                points: n,
                differences,
            });
        }
        if 2 * n > settings.max_points {
            return Err(Error::Convergence {
                tau_fs,
                points: n,
                previous: estimate,
                last: next,
            });
        }
        estimate = next;
    }
}

/// Normalized amplitude at `tau_fs` by direct quadrature.
pub fn amplitude_quadrature(
    params: &PhysicalParams,
    filter: &CosinePhaseFilter,
    tau_fs: f64,
    settings: &QuadratureSettings,
) -> Result<QuadratureEstimate> {
    settings.validate()?;
    let frame = Frame::new(params, filter, settings);
    let start = settings.starting_points(params, filter, tau_fs);
    doubling_trapezoid(tau_fs, start, settings, |j, n| {
        let nu = frame.node(j, n);
        (frame.weight(nu) * cis(nu * tau_fs), frame.gaussian(nu))
    })
}

/// Quadrature evaluator with the tau-independent weights tabulated once.
/// Gives bit-identical results to [`amplitude_quadrature`].
#[derive(Debug, Clone)]
pub struct QuadratureOracle {
    settings: QuadratureSettings,
    params: PhysicalParams,
    filter: CosinePhaseFilter,
    frame: Frame,
    cache_points: usize,
    weights: Vec<Complex64>,
    gaussians: Vec<f64>,
}

impl QuadratureOracle {
    /// Tabulates weights fine enough for every `|tau| <= tau_extent_fs`
    /// including one doubling past the starting resolution.
    pub fn new(
        params: &PhysicalParams,
        filter: &CosinePhaseFilter,
        settings: &QuadratureSettings,
        tau_extent_fs: f64,
    ) -> Result<Self> {
        settings.validate()?;
        let frame = Frame::new(params, filter, settings);
        let cache_points = (4 * settings.starting_points(params, filter, tau_extent_fs))
            .min(settings.max_points)
            .min(MAX_CACHE_POINTS);
        let (weights, gaussians) = (0..=cache_points)
            .map(|j| {
                let nu = frame.node(j, cache_points);
                (frame.weight(nu), frame.gaussian(nu))
            })
            .unzip();
        Ok(Self {
            settings: *settings,
            params: *params,
            filter: *filter,
            frame,
            cache_points,
            weights,
            gaussians,
        })
    }

    pub fn amplitude(&self, tau_fs: f64) -> Result<QuadratureEstimate> {
        let start = self
            .settings
            .starting_points(&self.params, &self.filter, tau_fs);
        doubling_trapezoid(tau_fs, start, &self.settings, |j, n| {
            let nu = self.frame.node(j, n);
            let (w, g) = if n <= self.cache_points && self.cache_points.is_multiple_of(n) {
                let idx = j * (self.cache_points / n);
                (self.weights[idx], self.gaussians[idx])
            } else {
                (self.frame.weight(nu), self.frame.gaussian(nu))
            };
            (w * cis(nu * tau_fs), g)
        })
    }

    pub fn rate(&self, tau_fs: f64) -> Result<f64> {
        Ok(self.amplitude(tau_fs)?.amplitude.norm_sqr())
    }
}

/// Quadrature rates over a grid, evaluated in parallel and returned in grid
/// order.
pub fn quadrature_rates(
    params: &PhysicalParams,
    filter: &CosinePhaseFilter,
    tau_grid: &[f64],
    settings: &QuadratureSettings,
) -> Result<Vec<f64>> {
    let extent = tau_grid.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let oracle = QuadratureOracle::new(params, filter, settings, extent)?;
    tau_grid.par_iter().map(|&t| oracle.rate(t)).collect()
}

/// Longitudinal phase mismatch `k0 - k1 cos(theta) - k2 cos(theta)` in 1/m,
/// under `k1 = k* + nu/u`, `k2 = k* - nu/u` and exact degenerate phase
/// matching `k0 = 2 k* cos(theta)`.
///
/// Terms are grouped by power of `nu`; the first-order terms cancel exactly
/// at equal angles, so the phase-matching sinc is constant in `nu` and is
/// not part of the integrand.
pub fn phase_mismatch_linearized(params: &PhysicalParams, nu: f64) -> f64 {
    let u = params.group_velocity();
    let cos_t = params.emission_angle_rad().cos();
    let k_star = 0.5 * params.pump_angular_frequency() * 1e15 / u;
    let k_pump = 2.0 * k_star * cos_t;
    let dk = nu * 1e15 / u;
    let zeroth = k_pump - 2.0 * k_star * cos_t;
    let (signal, idler) = (dk * cos_t, -dk * cos_t);
    zeroth - (signal + idler)
}

/// `sinc(dk * eps3)` for the configured crystal half-length (1 if unset).
pub fn phase_matching_factor(params: &PhysicalParams, nu: f64) -> f64 {
    let x = phase_mismatch_linearized(params, nu)
        * params.crystal_half_length_mm().unwrap_or(0.0)
        * 1e-3;
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Transverse momentum mismatch `k1 sin(theta) - k2 sin(theta)` in 1/m with the
/// idler on the opposite side of the pump. Its Gaussian factor
/// `exp(-(eps_perp^2 / 4) q^2)` equals `exp(-(T/2)^2 nu^2)`.
pub fn transverse_mismatch(params: &PhysicalParams, nu: f64) -> f64 {
    2.0 * nu * 1e15 / params.group_velocity() * params.emission_angle_rad().sin()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationReport {
    pub max_abs_diff: f64,
    pub at_tau_fs: f64,
}

/// Largest pointwise `|rate_series - rate_quadrature|` over the grid.
pub fn compare_methods(
    params: &PhysicalParams,
    filter: &CosinePhaseFilter,
    tau_grid: &[f64],
    settings: &EvalSettings,
) -> Result<DeviationReport> {
    check_grid(tau_grid)?;
    let series = SeriesModel::with_tolerance(params, filter, settings.tail_tolerance)?;
    let quad = quadrature_rates(params, filter, tau_grid, &settings.quadrature)?;
    let mut report = DeviationReport {
        max_abs_diff: 0.0,
        at_tau_fs: tau_grid[0],
    };
    for (&t, q) in tau_grid.iter().zip(quad) {
        let d = (series.rate(t) - q).abs();
        if d > report.max_abs_diff {
            report = DeviationReport {
                max_abs_diff: d,
                at_tau_fs: t,
            };
        }
    }
    Ok(report)
}

/// Symmetric grid through 0 with spacing at most `max_spacing_fs`, wide
/// enough to hold every retained lobe plus `margin_t` envelope widths.
pub fn lobe_covering_grid(
    params: &PhysicalParams,
    filter: &CosinePhaseFilter,
    tail_tolerance: f64,
    max_spacing_fs: f64,
    margin_t: f64,
) -> Result<Vec<f64>> {
    if !(max_spacing_fs.is_finite() && max_spacing_fs > 0.0) {
        return Err(Error::param(format!(
            "grid spacing must be > 0, got {max_spacing_fs}"
        )));
    }
    let m = crate::model::truncation_for(filter, tail_tolerance)?.max_order();
    let half = m as f64 * filter.mod_frequency_fs() + margin_t * params.characteristic_time();
    let steps = (half / max_spacing_fs).ceil() as i64;
    let step = half / steps as f64;
    Ok((-steps..=steps).map(|k| k as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::linspace;
    use approx::assert_abs_diff_eq;

    fn defaults() -> PhysicalParams {
        PhysicalParams::default()
    }

    #[test]
    fn integrand_examples() {
        let p = defaults();
        let t = p.characteristic_time();
        let none = CosinePhaseFilter::none();
        assert_eq!(integrand(&p, &none, 0.0, 0.0), Complex64::new(1.0, 0.0));
        let flat = CosinePhaseFilter::new(2.0, 0.0).unwrap();
        let v = integrand(&p, &flat, 0.0, 123.4);
        assert!((v - Complex64::new(0.0, 2.0).exp()).norm() < 1e-15);
        let v = integrand(&p, &none, 2.0 / t, 0.0);
        assert_abs_diff_eq!(v.re, (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn quadrature_examples() {
        let p = defaults();
        let s = QuadratureSettings::default();
        let none = CosinePhaseFilter::none();
        let a = amplitude_quadrature(&p, &none, 0.0, &s).unwrap();
        assert_eq!(a.amplitude, Complex64::new(1.0, 0.0));

        let t = p.characteristic_time();
        let a = amplitude_quadrature(&p, &none, t, &s).unwrap();
        assert_abs_diff_eq!(a.amplitude.re, (-1.0f64).exp(), epsilon = 1e-10);
        assert_abs_diff_eq!(a.amplitude.im, 0.0, epsilon = 1e-10);

        let f = CosinePhaseFilter::new(2.0, 50.0).unwrap();
        let q = amplitude_quadrature(&p, &f, 0.0, &s).unwrap();
        let series = SeriesModel::with_tolerance(&p, &f, 1e-12)
            .unwrap()
            .amplitude(0.0);
        assert!(
            (q.amplitude - series).norm() <= 1e-9,
            "{} vs {series}",
            q.amplitude
        );
    }

    #[test]
    fn cached_oracle_matches_direct_bitwise() {
        let p = defaults();
        let s = QuadratureSettings::default();
        let f = CosinePhaseFilter::new(5.0, 300.0).unwrap();
        let oracle = QuadratureOracle::new(&p, &f, &s, 1500.0).unwrap();
        for tau in [-1500.0, -300.0, 0.0, 12.5, 900.0, 4000.0] {
            let a = oracle.amplitude(tau).unwrap();
            let b = amplitude_quadrature(&p, &f, tau, &s).unwrap();
            assert_eq!(a, b, "tau {tau}");
        }
    }

    #[test]
    fn convergence_differences_decrease() {
        let p = defaults();
        let s = QuadratureSettings {
            initial_points: 64,
            ..QuadratureSettings::default()
        };
        let f = CosinePhaseFilter::new(2.0, 50.0).unwrap();
        for tau in [-600.0, -100.0, 0.0, 250.0, 600.0] {
            let e = amplitude_quadrature(&p, &f, tau, &s).unwrap();
            let d = &e.differences;
            assert!(d.last().unwrap() < &s.rel_tolerance);
            for w in d.windows(2) {
                assert!(w[1] < w[0], "tau {tau}: {d:?}");
            }
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let p = defaults();
        // A window cut at exp(-1) leaves an endpoint jump the trapezoid resolves only at O(h^2).
        let s = QuadratureSettings {
            halfwidth_folds: 1.0,
            initial_points: 64,
            max_points: 128,
            ..QuadratureSettings::default()
        };
        let f = CosinePhaseFilter::new(2.0, 50.0).unwrap();
        match amplitude_quadrature(&p, &f, 0.0, &s) {
            Err(Error::Convergence { points, .. }) => assert_eq!(points, 128),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn settings_validation() {
        let bad = [
            QuadratureSettings {
                initial_points: 32,
                ..Default::default()
            },
            QuadratureSettings {
                rel_tolerance: 1e-3,
                ..Default::default()
            },
            QuadratureSettings {
                halfwidth_folds: 0.0,
                ..Default::default()
            },
            QuadratureSettings {
                max_points: 1024,
                ..Default::default()
            },
        ];
        for s in bad {
            assert!(s.validate().is_err(), "{s:?}");
        }
        assert!(QuadratureSettings::default().validate().is_ok());
    }

    #[test]
    fn global_phases_leave_rates_unchanged() {
        let p = defaults();
        let f = CosinePhaseFilter::new(2.0, 53.0).unwrap();
        let plain = QuadratureSettings::default();
        let phased = QuadratureSettings {
            global_phases: Some(GlobalPhaseLedger {
                detection_time_sum_fs: 1234.5,
                detector_distance_m: 0.731,
            }),
            ..plain
        };
        for tau in [-200.0, 0.0, 75.0] {
            let a = amplitude_quadrature(&p, &f, tau, &plain).unwrap().amplitude;
            let b = amplitude_quadrature(&p, &f, tau, &phased)
                .unwrap()
                .amplitude;
            // the phases really are applied
            assert!((a - b).norm() > 1e-3);
            assert_abs_diff_eq!(a.norm_sqr(), b.norm_sqr(), epsilon = 1e-12);
        }
    }

    #[test]
    fn phase_mismatch_vanishes() {
        let p = defaults().with_crystal_half_length_mm(Some(1.0)).unwrap();
        for nu in [0.0, 0.02, -0.02, 0.3] {
            assert_eq!(phase_mismatch_linearized(&p, nu), 0.0);
            assert_eq!(phase_matching_factor(&p, nu), 1.0);
        }
    }

    #[test]
    fn transverse_factor_reproduces_gaussian_width() {
        let p = defaults();
        let t = p.characteristic_time();
        let eps = p.beam_param_um() * 1e-6;
        for nu in [-0.03, -0.004, 0.0, 0.01, 0.046] {
            let q = transverse_mismatch(&p, nu);
            let from_geometry = (-(eps * eps / 4.0) * q * q).exp();
            let from_envelope = (-(t / 2.0) * (t / 2.0) * nu * nu).exp();
            assert_abs_diff_eq!(from_geometry, from_envelope, epsilon = 1e-14);
        }
    }

    #[test]
    fn compare_methods_examples() {
        let p = defaults();
        let s = EvalSettings::default();
        let grid = linspace(-600.0, 600.0, 241);
        for beta in [0.0, 53.0, 1000.0] {
            let none = CosinePhaseFilter::new(0.0, beta).unwrap();
            let r = compare_methods(&p, &none, &grid, &s).unwrap();
            assert!(r.max_abs_diff <= 1e-10, "{r:?}");
        }
        let f = CosinePhaseFilter::new(2.0, 50.0).unwrap();
        let r = compare_methods(&p, &f, &grid, &s).unwrap();
        assert!(r.max_abs_diff <= 1e-8, "{r:?}");

        let f = CosinePhaseFilter::new(10.0, 1000.0).unwrap();
        let grid = linspace(-12000.0, 12000.0, 501);
        let r = compare_methods(&p, &f, &grid, &s).unwrap();
        assert!(r.max_abs_diff <= 1e-8, "{r:?}");
    }

    #[test]
    fn covering_grid_is_symmetric() {
        let p = defaults();
        let f = CosinePhaseFilter::new(2.0, 300.0).unwrap();
        let g = lobe_covering_grid(&p, &f, 1e-12, 10.0, 6.0).unwrap();
        assert_eq!(g.len() % 2, 1);
        assert_eq!(g[g.len() / 2], 0.0);
        assert!(g.windows(2).all(|w| w[1] - w[0] <= 10.0 + 1e-12));
        assert_eq!(g[0], -g[g.len() - 1]);
    }
}
