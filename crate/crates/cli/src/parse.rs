//! String grammars for complex numbers, input states and grids.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use cvtele_core::{FockVector, InputState, C64};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Parses `a+bi` or `a-bi`. Both parts are required and the imaginary part
/// must end in `i`.
pub fn parse_complex(text: &str) -> Result<C64, CliError> {
    let bad = || CliError::Config(format!("cannot parse complex number {text:?}; expected a+bi"));
    let body = text.trim().strip_suffix('i').ok_or_else(bad)?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'))
        .ok_or_else(bad)?;
    let re: f64 = body[..split].parse().map_err(|_| bad())?;
    let im: f64 = body[split..].parse().map_err(|_| bad())?;
    if !re.is_finite() || !im.is_finite() {
        return Err(bad());
    }
    Ok(C64::new(re, im))
}

pub fn format_complex(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}i", z.re, sign, z.im.abs())
}

/// Complex flag value that serializes in the `a+bi` grammar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexArg(pub C64);

impl FromStr for ComplexArg {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        parse_complex(s).map(ComplexArg)
    }
}

impl fmt::Display for ComplexArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_complex(self.0))
    }
}

impl Serialize for ComplexArg {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ComplexArg {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InputSpec {
    Coherent(C64),
    Number(usize),
    Cat(C64),
    /// One `re im` amplitude pair per line.
    File(PathBuf),
}

impl InputSpec {
    pub fn to_state(&self) -> Result<InputState, CliError> {
        Ok(match self {
            InputSpec::Coherent(a) => InputState::Coherent(*a),
            InputSpec::Number(n) => InputState::Number(*n),
            InputSpec::Cat(a) => InputState::Cat(*a),
            InputSpec::File(path) => InputState::Custom(read_amplitudes(path)?),
        })
    }
}

fn read_amplitudes(path: &PathBuf) -> Result<FockVector, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut amps = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parsed = match parts.as_slice() {
            [re, im] => re.parse::<f64>().ok().zip(im.parse::<f64>().ok()),
            _ => None,
        };
        let (re, im) = parsed.ok_or_else(|| {
            CliError::Config(format!("{}:{}: expected two numbers `re im`", path.display(), lineno + 1))
        })?;
        amps.push(C64::new(re, im));
    }
    FockVector::from_amplitudes(amps).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl FromStr for InputSpec {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| CliError::Config(format!("input {s:?} must look like kind:value")))?;
        match kind {
            "coherent" => Ok(InputSpec::Coherent(parse_complex(arg)?)),
            "cat" => Ok(InputSpec::Cat(parse_complex(arg)?)),
            "number" => arg
                .parse()
                .map(InputSpec::Number)
                .map_err(|_| CliError::Config(format!("photon number {arg:?} is not a non-negative integer"))),
            "file" if !arg.is_empty() => Ok(InputSpec::File(PathBuf::from(arg))),
            _ => Err(CliError::Config(format!("unknown input kind in {s:?}; use coherent, number, cat or file"))),
        }
    }
}

impl fmt::Display for InputSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputSpec::Coherent(a) => write!(f, "coherent:{}", format_complex(*a)),
            InputSpec::Number(n) => write!(f, "number:{n}"),
            InputSpec::Cat(a) => write!(f, "cat:{}", format_complex(*a)),
            InputSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl Serialize for InputSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InputSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Inclusive linear grid `start:stop:count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.stop } else { self.start + step * i as f64 })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("grid {s:?} must look like start:stop:count"));
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts.as_slice() else { return Err(bad()) };
        let start: f64 = start.parse().map_err(|_| bad())?;
        let stop: f64 = stop.parse().map_err(|_| bad())?;
        let count: usize = count.parse().map_err(|_| bad())?;
        if count == 0 || !start.is_finite() || !stop.is_finite() {
            return Err(bad());
        }
        Ok(Grid { start, stop, count })
    }
}
