//! Physical parameters, the cosine spectral phase filter, and the Bessel-series
//! two-photon amplitude.
//!
//! Internal units: time in fs, angular frequency in rad/fs. Lengths and speeds
//! are accepted in laboratory units and converted at the boundary.
//!
//! The series amplitude is
//!
//! ```text
//! A(tau) = sum_m i^m J_m(alpha) exp(i m beta w0/2) exp(-(tau - m beta)^2 / T^2)
//! ```
//!
//! with `T = 2 eps_perp sin(theta) / u`. Each Bessel order contributes a
//! Gaussian lobe centred at `tau = m * beta`; `alpha = 0` reduces to the bare
//! Gaussian `exp(-tau^2 / T^2)`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::oracle::{self, QuadratureSettings};
use crate::specfun::{self, BesselTable};

pub const DEFAULT_LIGHT_SPEED: f64 = 3.0e8;
pub const DEFAULT_PUMP_WAVELENGTH_NM: f64 = 350.0;
pub const DEFAULT_GROUP_VELOCITY: f64 = 2.0e8;
pub const DEFAULT_BEAM_PARAM_UM: f64 = 100.0;
pub const DEFAULT_EMISSION_ANGLE_DEG: f64 = 15.0;
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-12;

const FS_PER_S: f64 = 1e15;

/// Exponent beyond which `exp(-x)` is exactly zero in f64.
const GAUSSIAN_CUTOFF: f64 = 746.0;

/// Source and detection geometry for degenerate, noncollinear type-I
/// down-conversion. Signal and idler leave the crystal at the same angle to
/// the pump, on opposite sides of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pump_wavelength_nm: f64,
    group_velocity: f64,
    beam_param_um: f64,
    emission_angle_deg: f64,
    crystal_half_length_mm: Option<f64>,
    light_speed: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            pump_wavelength_nm: DEFAULT_PUMP_WAVELENGTH_NM,
            group_velocity: DEFAULT_GROUP_VELOCITY,
            beam_param_um: DEFAULT_BEAM_PARAM_UM,
            emission_angle_deg: DEFAULT_EMISSION_ANGLE_DEG,
            crystal_half_length_mm: None,
            light_speed: DEFAULT_LIGHT_SPEED,
        }
    }
}

impl PhysicalParams {
    /// `group_velocity` in m/s; the light speed defaults to
    /// [`DEFAULT_LIGHT_SPEED`].
    pub fn new(
        pump_wavelength_nm: f64,
        group_velocity: f64,
        beam_param_um: f64,
        emission_angle_deg: f64,
    ) -> Result<Self> {
        Self::from_parts(
            pump_wavelength_nm,
            group_velocity,
            beam_param_um,
            emission_angle_deg,
            DEFAULT_LIGHT_SPEED,
            None,
        )
    }

    /// All fields at once, validated together.
    pub fn from_parts(
        pump_wavelength_nm: f64,
        group_velocity: f64,
        beam_param_um: f64,
        emission_angle_deg: f64,
        light_speed: f64,
        crystal_half_length_mm: Option<f64>,
    ) -> Result<Self> {
        let p = Self {
            pump_wavelength_nm,
            group_velocity,
            beam_param_um,
            emission_angle_deg,
            crystal_half_length_mm,
            light_speed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_light_speed(self, light_speed: f64) -> Result<Self> {
        let p = Self {
            light_speed,
            ..self
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_crystal_half_length_mm(self, half_length_mm: Option<f64>) -> Result<Self> {
        let p = Self {
            crystal_half_length_mm: half_length_mm,
            ..self
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(format!(
                    "{name} must be finite and > 0, got {v}"
                )))
            }
        };
        positive("pump wavelength", self.pump_wavelength_nm)?;
        positive("light speed", self.light_speed)?;
        positive("group velocity", self.group_velocity)?;
        positive("beam parameter", self.beam_param_um)?;
        if self.group_velocity >= self.light_speed {
            return Err(Error::param(format!(
                "group velocity {} m/s must be below the light speed {} m/s",
                self.group_velocity, self.light_speed
            )));
        }
        let theta = self.emission_angle_deg;
        if !(theta.is_finite() && theta > 0.0 && theta < 90.0) {
            return Err(Error::param(format!(
                "emission angle must lie strictly between 0 and 90 degrees, got {theta}"
            )));
        }
        if let Some(l) = self.crystal_half_length_mm {
            positive("crystal half-length", l)?;
        }
        Ok(())
    }

    pub fn pump_wavelength_nm(&self) -> f64 {
        self.pump_wavelength_nm
    }

    /// Group velocity in m/s.
    pub fn group_velocity(&self) -> f64 {
        self.group_velocity
    }

    pub fn beam_param_um(&self) -> f64 {
        self.beam_param_um
    }

    pub fn emission_angle_deg(&self) -> f64 {
        self.emission_angle_deg
    }

    pub fn crystal_half_length_mm(&self) -> Option<f64> {
        self.crystal_half_length_mm
    }

    /// Light speed in m/s.
    pub fn light_speed(&self) -> f64 {
        self.light_speed
    }

    pub fn emission_angle_rad(&self) -> f64 {
        self.emission_angle_deg.to_radians()
    }

    /// Envelope width `T = 2 eps_perp sin(theta) / u` in fs. The unmodulated
    /// amplitude is `exp(-tau^2 / T^2)`.
    pub fn characteristic_time(&self) -> f64 {
        2.0 * self.beam_param_um * 1e-6 * self.emission_angle_rad().sin() / self.group_velocity
            * FS_PER_S
    }

    /// Pump angular frequency `2 pi c / lambda` in rad/fs.
    pub fn pump_angular_frequency(&self) -> f64 {
        2.0 * PI * self.light_speed / (self.pump_wavelength_nm * 1e-9) / FS_PER_S
    }
}

/// Idler phase filter `theta(w) = alpha cos(beta w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosinePhaseFilter {
    depth: f64,
    mod_frequency_fs: f64,
}

impl CosinePhaseFilter {
    /// `depth` (alpha) in rad, `mod_frequency_fs` (beta) in fs.
    pub fn new(depth: f64, mod_frequency_fs: f64) -> Result<Self> {
        if !(depth.is_finite() && depth >= 0.0) {
            return Err(Error::param(format!(
                "modulation depth must be finite and >= 0, got {depth}"
            )));
        }
        if !(mod_frequency_fs.is_finite() && mod_frequency_fs >= 0.0) {
            return Err(Error::param(format!(
                "modulation frequency must be finite and >= 0 fs, got {mod_frequency_fs}"
            )));
        }
        Ok(Self {
            depth,
            mod_frequency_fs,
        })
    }

    /// The unmodulated filter.
    pub fn none() -> Self {
        Self {
            depth: 0.0,
            mod_frequency_fs: 0.0,
        }
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn mod_frequency_fs(&self) -> f64 {
        self.mod_frequency_fs
    }

    /// Phase in rad imprinted on an idler component at `omega` rad/fs.
    pub fn phase(&self, omega: f64) -> f64 {
        self.depth * (self.mod_frequency_fs * omega).cos()
    }
}

/// Number of Bessel orders kept on each side of `m = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTruncation {
    max_order: usize,
    tail_tolerance: f64,
}

impl SeriesTruncation {
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance
    }

    /// Same tolerance, twice the order. Used to check truncation stability.
    pub fn doubled(&self) -> Result<Self> {
        let max_order = (2 * self.max_order).max(1);
        if max_order > specfun::MAX_ORDER {
            return Err(Error::param(
                "doubled truncation exceeds the Bessel order limit",
            ));
        }
        Ok(Self { max_order, ..*self })
    }
}

/// Smallest `M` such that `|J_m(alpha)| < tol` for `m = M+1..=M+3` and the
/// two-sided tail `2 * sum_{m>M} |J_m(alpha)|` is below `tol`.
pub fn truncation_for(filter: &CosinePhaseFilter, tol: f64) -> Result<SeriesTruncation> {
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(Error::param(format!(
            "truncation tolerance must lie in (0, 1e-3], got {tol}"
        )));
    }
    let alpha = filter.depth();
    let mut span = (alpha.ceil() as usize + 64).min(specfun::MAX_ORDER);
    loop {
        let table = specfun::bessel_j_table(alpha, span)?;
        let v = table.values();
        // suffix[m] = sum_{k >= m} |J_k|
        let mut suffix = vec![0.0; v.len() + 1];
        for m in (0..v.len()).rev() {
            suffix[m] = suffix[m + 1] + v[m].abs();
        }
        for m in 0..v.len().saturating_sub(3) {
            let small = v[m + 1..=m + 3].iter().all(|j| j.abs() < tol);
            if small && 2.0 * suffix[m + 1] < tol {
                return Ok(SeriesTruncation {
                    max_order: m,
                    tail_tolerance: tol,
                });
            }
        }
        if span == specfun::MAX_ORDER {
            return Err(Error::param(format!(
                "no truncation order below {} meets tolerance {tol} for depth {alpha}",
                specfun::MAX_ORDER
            )));
        }
        span = (2 * span).min(specfun::MAX_ORDER);
    }
}

/// Evaluation route for a correlation curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Series,
    Quadrature,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Series => "series",
            Method::Quadrature => "quadrature",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "series" => Ok(Method::Series),
            "quadrature" => Ok(Method::Quadrature),
            other => Err(Error::param(format!(
                "unknown method '{other}', expected series or quadrature"
            ))),
        }
    }
}

/// Numerical knobs shared by both evaluation routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub tail_tolerance: f64,
    pub quadrature: QuadratureSettings,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
            quadrature: QuadratureSettings::default(),
        }
    }
}

/// Precomputed Bessel-series amplitude for one parameter/filter pair.
#[derive(Debug, Clone)]
pub struct SeriesModel {
    envelope_time: f64,
    mod_frequency: f64,
    max_order: usize,
    /// `c_m` for `m = -M..=M`, stored at index `m + M`.
    coefficients: Vec<Complex64>,
}

impl SeriesModel {
    pub fn new(
        params: &PhysicalParams,
        filter: &CosinePhaseFilter,
        trunc: &SeriesTruncation,
    ) -> Result<Self> {
        let table = specfun::bessel_j_table(filter.depth(), trunc.max_order())?;
        Ok(Self::from_table(params, filter, &table))
    }

    /// Uses the truncation that meets `tail_tolerance`.
    pub fn with_tolerance(
        params: &PhysicalParams,
        filter: &CosinePhaseFilter,
        tail_tolerance: f64,
    ) -> Result<Self> {
        Self::new(params, filter, &truncation_for(filter, tail_tolerance)?)
    }

    fn from_table(
        params: &PhysicalParams,
        filter: &CosinePhaseFilter,
        table: &BesselTable,
    ) -> Self {
        let max_order = table.max_order();
        let half_pump = 0.5 * params.pump_angular_frequency();
        let beta = filter.mod_frequency_fs();
        let m_max = max_order as i64;
        let coefficients = (-m_max..=m_max)
            .map(|m| {
                let j = table.get(m).expect("order within table");
                let phase = Complex64::from_polar(1.0, m as f64 * beta * half_pump);
                i_pow(m) * j * phase
            })
            .collect();
        Self {
            envelope_time: params.characteristic_time(),
            mod_frequency: beta,
            max_order,
            coefficients,
        }
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn characteristic_time(&self) -> f64 {
        self.envelope_time
    }

    /// `c_m = i^m J_m(alpha) exp(i m beta w0/2)` for `m = -M..=M`.
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Same lobes with the carrier phase factors conjugated. The resulting
    /// curve is the mirror image `rate(-tau)` of this one.
    pub fn mirrored(&self) -> Self {
        let m_max = self.max_order as i64;
        let coefficients = self
            .coefficients
            .iter()
            .zip(-m_max..=m_max)
            .map(|(c, m)| {
                // i^m J_m is real or imaginary; only the carrier is conjugated.
                let carrier = i_pow(m);
                let stripped = c * carrier.conj();
                carrier * stripped.conj()
            })
            .collect();
        Self {
            coefficients,
            ..self.clone()
        }
    }

    pub fn amplitude(&self, tau_fs: f64) -> Complex64 {
        let m_max = self.max_order as i64;
        let mut sum = Complex64::new(0.0, 0.0);
        for (c, m) in self.coefficients.iter().zip(-m_max..=m_max) {
            let x = (tau_fs - m as f64 * self.mod_frequency) / self.envelope_time;
            let e = x * x;
            if e < GAUSSIAN_CUTOFF {
                sum += c * (-e).exp();
            }
        }
        sum
    }

    pub fn rate(&self, tau_fs: f64) -> f64 {
        self.amplitude(tau_fs).norm_sqr()
    }

    /// `(sum_m |J_m(alpha)|)^2`, an upper bound on every rate.
    pub fn rate_bound(&self) -> f64 {
        let s: f64 = self.coefficients.iter().map(|c| c.norm()).sum();
        s * s
    }
}

fn i_pow(m: i64) -> Complex64 {
    match m.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Two-photon amplitude at delay `tau_fs`, normalized so the unmodulated
/// amplitude peaks at exactly 1.
pub fn amplitude_series(
    params: &PhysicalParams,
    filter: &CosinePhaseFilter,
    trunc: &SeriesTruncation,
    tau_fs: f64,
) -> Result<Complex64> {
    Ok(SeriesModel::new(params, filter, trunc)?.amplitude(tau_fs))
}

/// Coincidence rate `|A(tau)|^2` on the shared unit-peak baseline.
pub fn count_rate(
    params: &PhysicalParams,
    filter: &CosinePhaseFilter,
    trunc: &SeriesTruncation,
    tau_fs: f64,
) -> Result<f64> {
    Ok(SeriesModel::new(params, filter, trunc)?.rate(tau_fs))
}

/// Sampled coincidence rate against signal-idler delay `tau = t2 - t1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    tau_grid: Vec<f64>,
    rates: Vec<f64>,
    method: Method,
    params: PhysicalParams,
    filter: CosinePhaseFilter,
}

impl CorrelationCurve {
    pub fn new(
        tau_grid: Vec<f64>,
        rates: Vec<f64>,
        method: Method,
        params: PhysicalParams,
        filter: CosinePhaseFilter,
    ) -> Result<Self> {
        check_grid(&tau_grid)?;
        if rates.len() != tau_grid.len() {
            return Err(Error::param(format!(
                "{} rates for {} grid points",
                rates.len(),
                tau_grid.len()
            )));
        }
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::param(format!(
                "rates must be finite and >= 0, found {r}"
            )));
        }
        Ok(Self {
            tau_grid,
            rates,
            method,
            params,
            filter,
        })
    }

    pub fn tau_grid(&self) -> &[f64] {
        &self.tau_grid
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn filter(&self) -> &CosinePhaseFilter {
        &self.filter
    }

    pub fn len(&self) -> usize {
        self.tau_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_grid.is_empty()
    }

    /// Largest sample and its delay. Earliest index wins ties.
    pub fn max_sample(&self) -> (f64, f64) {
        let mut best = 0;
        for (i, r) in self.rates.iter().enumerate() {
            if *r > self.rates[best] {
                best = i;
            }
        }
        (self.tau_grid[best], self.rates[best])
    }
}

pub(crate) fn check_grid(tau_grid: &[f64]) -> Result<()> {
    if tau_grid.is_empty() {
        return Err(Error::param("tau grid is empty"));
    }
    if let Some(t) = tau_grid.iter().find(|t| !t.is_finite()) {
        return Err(Error::param(format!(
            "tau grid contains non-finite value {t}"
        )));
    }
    if tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("tau grid must be strictly increasing"));
    }
    Ok(())
}

/// `n` evenly spaced delays from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let last = (n - 1) as f64;
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        end
                    } else {
                        start + (end - start) * (i as f64 / last)
                    }
                })
                .collect()
        }
    }
}

/// Evaluates the coincidence rate over `tau_grid` with the chosen route.
pub fn sample_curve(
    params: &PhysicalParams,
    filter: &CosinePhaseFilter,
    tau_grid: &[f64],
    method: Method,
    settings: &EvalSettings,
) -> Result<CorrelationCurve> {
    check_grid(tau_grid)?;
    let rates = match method {
        Method::Series => {
            let model = SeriesModel::with_tolerance(params, filter, settings.tail_tolerance)?;
            tau_grid.iter().map(|&t| model.rate(t)).collect()
        }
        Method::Quadrature => {
            oracle::quadrature_rates(params, filter, tau_grid, &settings.quadrature)?
        }
    };
    CorrelationCurve::new(tau_grid.to_vec(), rates, method, *params, *filter)
}
