use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, ParamError, Result};

/// Validated model parameters. Construct with [`ModelParams::new`] or
/// [`RawParams::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    alpha: f64,
    #[serde(rename = "A")]
    packet_size: usize,
    #[serde(rename = "M")]
    max_transmit: usize,
    #[serde(rename = "Q")]
    buffer: usize,
    power: Vec<f64>,
}

impl ModelParams {
    pub fn new(
        alpha: f64,
        packet_size: usize,
        max_transmit: usize,
        buffer: usize,
        power: Vec<f64>,
    ) -> Result<Self, ParamError> {
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(ParamError::NonPositiveAlpha(alpha));
        }
        if alpha > 1.0 {
            return Err(ParamError::AlphaAboveOne(alpha));
        }
        if packet_size == 0 {
            return Err(ParamError::ZeroPacketSize);
        }
        if max_transmit < packet_size {
            return Err(ParamError::MLessThanA {
                a: packet_size,
                m: max_transmit,
            });
        }
        if power.len() != max_transmit + 1 {
            return Err(ParamError::PowerLength {
                expected: max_transmit + 1,
                got: power.len(),
            });
        }
        if let Some((index, &value)) = power.iter().enumerate().find(|(_, p)| !p.is_finite()) {
            return Err(ParamError::PowerNotFinite { index, value });
        }
        if power[0] != 0.0 {
            return Err(ParamError::PowerZeroNonzero(power[0]));
        }
        // Strictly increasing per-bit cost on consecutive pairs implies it for
        // all pairs; together with P_1 > 0 it also makes P strictly increasing.
        if power[1] <= 0.0 {
            return Err(ParamError::PowerNotIncreasingPerBit {
                lo: 0,
                hi: 1,
                lo_ratio: 0.0,
                hi_ratio: power[1],
            });
        }
        for m in 1..max_transmit {
            let lo_ratio = power[m] / m as f64;
            let hi_ratio = power[m + 1] / (m + 1) as f64;
            if lo_ratio >= hi_ratio {
                return Err(ParamError::PowerNotIncreasingPerBit {
                    lo: m,
                    hi: m + 1,
                    lo_ratio,
                    hi_ratio,
                });
            }
        }
        Ok(Self {
            alpha,
            packet_size,
            max_transmit,
            buffer,
            power,
        })
    }

    /// Per-slot arrival probability.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Bits per arriving packet (`A`).
    pub fn packet_size(&self) -> usize {
        self.packet_size
    }

    /// Maximum bits transmitted per slot (`M`).
    pub fn max_transmit(&self) -> usize {
        self.max_transmit
    }

    /// Buffer capacity in bits (`Q`).
    pub fn buffer(&self) -> usize {
        self.buffer
    }

    /// Largest total-backlog state, `K = Q + A`.
    pub fn max_state(&self) -> usize {
        self.buffer + self.packet_size
    }

    pub fn num_states(&self) -> usize {
        self.max_state() + 1
    }

    pub fn num_actions(&self) -> usize {
        self.max_transmit + 1
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    /// Mean arrival rate in bits per slot, `alpha·A`.
    pub fn arrival_rate(&self) -> f64 {
        self.alpha * self.packet_size as f64
    }

    /// Transmit sizes that neither underflow nor overflow the buffer in state `k`.
    pub fn feasible_actions(&self, k: usize) -> Result<RangeInclusive<usize>> {
        if k > self.max_state() {
            return Err(Error::StateOutOfRange {
                state: k,
                max: self.max_state(),
            });
        }
        Ok(self.feasible_range(k))
    }

    pub(crate) fn feasible_range(&self, k: usize) -> RangeInclusive<usize> {
        k.saturating_sub(self.buffer)..=k.min(self.max_transmit)
    }

    pub(crate) fn is_feasible(&self, k: usize, m: usize) -> bool {
        m <= k && m <= self.max_transmit && k - m <= self.buffer
    }

    /// Same model with every power entry multiplied by `factor`.
    pub fn with_scaled_power(&self, factor: f64) -> Result<Self, ParamError> {
        Self::new(
            self.alpha,
            self.packet_size,
            self.max_transmit,
            self.buffer,
            self.power.iter().map(|p| p * factor).collect(),
        )
    }

    /// Renders the flat key-value form accepted by [`RawParams::parse`].
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "A = {}", self.packet_size);
        let _ = writeln!(s, "M = {}", self.max_transmit);
        let _ = writeln!(s, "Q = {}", self.buffer);
        let power: Vec<String> = self.power.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(s, "power = {}", power.join(","));
        s
    }
}

/// Unvalidated parameter set, e.g. read from a config file and overlaid with
/// command-line flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawParams {
    pub alpha: Option<f64>,
    pub packet_size: Option<usize>,
    pub max_transmit: Option<usize>,
    pub buffer: Option<usize>,
    pub power: Option<Vec<f64>>,
}

impl RawParams {
    /// Parses `key = value` lines. Keys are `alpha`, `A`, `M`, `Q` and `power`
    /// (comma-separated). Blank lines and `#` comments are ignored; `:` is
    /// accepted in place of `=`.
    pub fn parse(text: &str) -> Result<Self, ParamError> {
        let mut raw = Self::default();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| ParamError::Parse {
                    key: line.to_string(),
                    value: String::new(),
                })?;
            raw.set(key.trim(), value.trim())?;
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ParamError> {
        match key {
            "alpha" => self.alpha = Some(parse_field(key, value)?),
            "A" => self.packet_size = Some(parse_field(key, value)?),
            "M" => self.max_transmit = Some(parse_field(key, value)?),
            "Q" => self.buffer = Some(parse_field(key, value)?),
            "power" => self.power = Some(parse_power(value)?),
            other => return Err(ParamError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Fields set in `other` win.
    pub fn overlay(mut self, other: &RawParams) -> Self {
        if other.alpha.is_some() {
            self.alpha = other.alpha;
        }
        if other.packet_size.is_some() {
            self.packet_size = other.packet_size;
        }
        if other.max_transmit.is_some() {
            self.max_transmit = other.max_transmit;
        }
        if other.buffer.is_some() {
            self.buffer = other.buffer;
        }
        if other.power.is_some() {
            self.power = other.power.clone();
        }
        self
    }

    pub fn validate(&self) -> Result<ModelParams, ParamError> {
        ModelParams::new(
            self.alpha.ok_or(ParamError::Missing("alpha"))?,
            self.packet_size.ok_or(ParamError::Missing("A"))?,
            self.max_transmit.ok_or(ParamError::Missing("M"))?,
            self.buffer.ok_or(ParamError::Missing("Q"))?,
            self.power.clone().ok_or(ParamError::Missing("power"))?,
        )
    }
}

fn parse_field<T: FromStr>(key: &str, value: &str) -> Result<T, ParamError> {
    value.parse().map_err(|_| ParamError::Parse {
        key: key.to_string(),
        value: value.to_string(),
    })
}

pub(crate) fn parse_power(value: &str) -> Result<Vec<f64>, ParamError> {
    value
        .split(',')
        .map(|v| parse_field("power", v.trim()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> ModelParams {
        ModelParams::new(0.4, 2, 3, 5, vec![0.0, 1.0, 4.0, 9.0]).unwrap()
    }

    #[test]
    fn reference_parameters_validate() {
        let p = reference();
        assert_eq!(p.max_state(), 7);
        assert_eq!(p.num_states(), 8);
        assert_eq!(p.num_actions(), 4);
        assert!((p.arrival_rate() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rejects_each_violated_constraint() {
        assert_eq!(
            ModelParams::new(0.4, 2, 1, 5, vec![0.0, 1.0]).unwrap_err(),
            ParamError::MLessThanA { a: 2, m: 1 }
        );
        assert!(matches!(
            ModelParams::new(0.5, 1, 2, 3, vec![0.0, 2.0, 3.0]).unwrap_err(),
            ParamError::PowerNotIncreasingPerBit { lo: 1, hi: 2, .. }
        ));
        assert_eq!(
            ModelParams::new(0.0, 1, 1, 1, vec![0.0, 1.0]).unwrap_err(),
            ParamError::NonPositiveAlpha(0.0)
        );
        assert!(matches!(
            ModelParams::new(f64::NAN, 1, 1, 1, vec![0.0, 1.0]).unwrap_err(),
            ParamError::NonPositiveAlpha(_)
        ));
        assert_eq!(
            ModelParams::new(1.5, 1, 1, 1, vec![0.0, 1.0]).unwrap_err(),
            ParamError::AlphaAboveOne(1.5)
        );
        assert_eq!(
            ModelParams::new(0.5, 1, 1, 1, vec![0.5, 1.0]).unwrap_err(),
            ParamError::PowerZeroNonzero(0.5)
        );
        assert!(matches!(
            ModelParams::new(0.5, 1, 2, 1, vec![0.0, 1.0]).unwrap_err(),
            ParamError::PowerLength {
                expected: 3,
                got: 2
            }
        ));
        // equal per-bit cost is not strictly increasing
        assert!(matches!(
            ModelParams::new(0.5, 1, 2, 1, vec![0.0, 1.0, 2.0]).unwrap_err(),
            ParamError::PowerNotIncreasingPerBit { .. }
        ));
        assert!(ModelParams::new(1.0, 1, 1, 1, vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn feasible_action_sets() {
        let p = reference();
        assert_eq!(p.feasible_actions(0).unwrap(), 0..=0);
        assert_eq!(p.feasible_actions(7).unwrap(), 2..=3);
        assert_eq!(p.feasible_actions(3).unwrap(), 0..=3);
        assert!(matches!(
            p.feasible_actions(8),
            Err(Error::StateOutOfRange { state: 8, max: 7 })
        ));
        let sizes: Vec<usize> = (0..=7)
            .map(|k| p.feasible_actions(k).unwrap().count())
            .collect();
        assert_eq!(sizes, vec![1, 2, 3, 4, 4, 4, 3, 2]);
    }

    #[test]
    fn feasible_bounds_are_monotone_and_nonempty() {
        for q in 0..6 {
            for a in 1..4 {
                for m in a..a + 3 {
                    let power: Vec<f64> = (0..=m).map(|i| (i * i) as f64).collect();
                    let p = ModelParams::new(0.3, a, m, q, power).unwrap();
                    let mut prev = (0, 0);
                    for k in 0..=p.max_state() {
                        let r = p.feasible_actions(k).unwrap();
                        assert!(!r.is_empty());
                        assert!(*r.start() >= prev.0 && *r.end() >= prev.1);
                        prev = (*r.start(), *r.end());
                    }
                }
            }
        }
    }

    #[test]
    fn key_value_round_trip_and_overlay() {
        let text = "# reference\nalpha = 0.4\nA=2\nM: 3\nQ = 5\npower = 0, 1, 4, 9\n";
        let raw = RawParams::parse(text).unwrap();
        assert_eq!(raw.validate().unwrap(), reference());
        let again = RawParams::parse(&reference().to_kv_string()).unwrap();
        assert_eq!(again.validate().unwrap(), reference());

        let flags = RawParams {
            alpha: Some(0.6),
            ..RawParams::default()
        };
        assert_eq!(raw.overlay(&flags).validate().unwrap().alpha(), 0.6);

        assert_eq!(
            RawParams::parse("alpha = 0.4")
                .unwrap()
                .validate()
                .unwrap_err(),
            ParamError::Missing("A")
        );
        assert!(matches!(
            RawParams::parse("beta = 1").unwrap_err(),
            ParamError::UnknownKey(_)
        ));
        assert!(matches!(
            RawParams::parse("A = two").unwrap_err(),
            ParamError::Parse { .. }
        ));
    }

    #[test]
    fn power_scaling() {
        let p = reference().with_scaled_power(2.0).unwrap();
        assert_eq!(p.power(), &[0.0, 2.0, 8.0, 18.0]);
    }
}
