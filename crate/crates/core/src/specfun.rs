//! Integer-order Bessel functions of the first kind.
//!
//! Values are produced by Miller's downward recurrence, normalized with the
//! identity `J_0(x) + 2 * sum_k J_2k(x) = 1`. The starting order is doubled
//! until two consecutive runs agree, so no tabulated starting heuristics are
//! needed.

use crate::error::{Error, Result};

/// Largest order accepted by [`bessel_j_table`].
pub const MAX_ORDER: usize = 1000;

const AGREEMENT: f64 = 1e-14;
const RESCALE_ABOVE: f64 = 1e250;
const RESCALE_BY: f64 = 1e-250;
/// Below this argument two power-series terms are exact to double precision.
const TINY_ARGUMENT: f64 = 1e-5;
const MAX_START: usize = 1 << 24;

/// `J_0(x) ..= J_max_order(x)` for a single non-negative argument.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselTable {
    argument: f64,
    values: Vec<f64>,
}

impl BesselTable {
    pub fn argument(&self) -> f64 {
        self.argument
    }

    pub fn max_order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `J_m(x)` for any `|m| <= max_order`, using `J_{-m} = (-1)^m J_m`.
    pub fn get(&self, order: i64) -> Option<f64> {
        let idx = usize::try_from(order.unsigned_abs()).ok()?;
        let v = *self.values.get(idx)?;
        Some(if order < 0 && idx % 2 == 1 { -v } else { v })
    }
}

/// Tabulates `J_0(x)` through `J_max_order(x)`.
pub fn bessel_j_table(x: f64, max_order: usize) -> Result<BesselTable> {
    if !x.is_finite() {
        return Err(Error::param(format!(
            "Bessel argument must be finite, got {x}"
        )));
    }
    if x < 0.0 {
        return Err(Error::param(format!(
            "Bessel argument must be >= 0, got {x}"
        )));
    }
    if max_order > MAX_ORDER {
        return Err(Error::param(format!(
            "Bessel order {max_order} exceeds the supported maximum {MAX_ORDER}"
        )));
    }

    let values = if x == 0.0 {
        let mut v = vec![0.0; max_order + 1];
        v[0] = 1.0;
        v
    } else if x < TINY_ARGUMENT {
        tiny_argument_series(x, max_order)
    } else {
        let mut start = max_order + 20.max(x.ceil() as usize);
        let mut previous = miller(x, max_order, start);
        loop {
            start *= 2;
            if start > MAX_START {
                return Err(Error::param(format!(
                    "Bessel recurrence failed to settle for x = {x}"
                )));
            }
            let current = miller(x, max_order, start);
            let agree = previous
                .iter()
                .zip(&current)
                .all(|(a, b)| (a - b).abs() <= AGREEMENT);
            if agree {
                break current;
            }
            previous = current;
        }
    };

    Ok(BesselTable {
        argument: x,
        values,
    })
}

/// `J_m(x)` for any integer order, including negative ones.
pub fn bessel_j(order: i64, x: f64) -> Result<f64> {
    let n = usize::try_from(order.unsigned_abs())
        .map_err(|_| Error::param(format!("Bessel order {order} out of range")))?;
    let table = bessel_j_table(x, n)?;
    Ok(table.get(order).expect("table covers the requested order"))
}

fn miller(x: f64, max_order: usize, start: usize) -> Vec<f64> {
    let mut values = vec![0.0; max_order + 1];
    let mut above = 0.0; // J_{k+1}
    let mut current = 1e-30; // J_k, unnormalized
    let mut even_sum = 0.0;

    for k in (1..=start).rev() {
        if k <= max_order {
            values[k] = current;
        }
        if k % 2 == 0 {
            even_sum += current;
        }
        let below = (2.0 * k as f64 / x) * current - above;
        above = current;
        current = below;

        if current.abs() > RESCALE_ABOVE {
            current *= RESCALE_BY;
            above *= RESCALE_BY;
            even_sum *= RESCALE_BY;
            for v in values.iter_mut().skip(k.saturating_sub(1)) {
                *v *= RESCALE_BY;
            }
        }
    }
    values[0] = current;

    let norm = current + 2.0 * even_sum;
    for v in &mut values {
        *v /= norm;
    }
    values
}

fn tiny_argument_series(x: f64, max_order: usize) -> Vec<f64> {
    let half = 0.5 * x;
    let q = half * half;
    let mut lead = 1.0; // (x/2)^m / m!
    (0..=max_order)
        .map(|m| {
            if m > 0 {
                lead *= half / m as f64;
            }
            let m1 = m as f64 + 1.0;
            lead * (1.0 - q / m1 + q * q / (2.0 * m1 * (m1 + 1.0)))
        })
        .collect()
}
