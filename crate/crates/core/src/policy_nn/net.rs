use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::plant::StateVector;

use super::grid::GridSpec;

const MAGIC: [u8; 4] = *b"BPNN";
const FORMAT_VERSION: u32 = 1;
const ACT_LINEAR: u8 = 0;
const ACT_TANH: u8 = 1;

/// Single-hidden-layer `4 -> H -> 1` network with tanh hidden units and a linear output,
/// wrapped with input/output scaling and saturation.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    hidden: usize,
    /// Row-major `(H, 4)`.
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
    /// Physical input box; inputs are clamped to it and mapped to `[-1, 1]`.
    pub input_min: [f64; 4],
    pub input_max: [f64; 4],
    /// `u = output_offset + output_scale * y` before saturation.
    pub output_offset: f64,
    pub output_scale: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl PolicyNet {
    pub const INPUTS: usize = 4;

    /// Zero-weight network scaled to the grid box and action range.
    pub fn new(hidden: usize, grid: &GridSpec) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::invalid("hidden", "need at least one hidden unit"));
        }
        let net = Self {
            hidden,
            w1: vec![0.0; hidden * 4],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
            input_min: grid.state_lower(),
            input_max: grid.state_upper(),
            output_offset: grid.action.center(),
            output_scale: grid.action.half_width(),
            u_min: grid.action.min,
            u_max: grid.action.max,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden;
        if h == 0 || self.w1.len() != 4 * h || self.b1.len() != h || self.w2.len() != h {
            return Err(Error::invalid("policy net", "inconsistent layer sizes"));
        }
        for k in 0..4 {
            if !(self.input_min[k].is_finite()
                && self.input_max[k].is_finite()
                && self.input_min[k] < self.input_max[k])
            {
                return Err(Error::invalid("policy net", "empty input box"));
            }
        }
        if !(self.u_min <= self.u_max) || !self.output_scale.is_finite() {
            return Err(Error::invalid("policy net", "bad output range"));
        }
        if self.params().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("policy net weights"));
        }
        Ok(())
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn param_count(&self) -> usize {
        6 * self.hidden + 1
    }

    /// Parameters in the order `W1 (row-major), b1, W2, b2`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        let h = self.hidden;
        if p.len() != self.param_count() {
            return Err(Error::invalid(
                "params",
                format!("expected {}, got {}", self.param_count(), p.len()),
            ));
        }
        self.w1.copy_from_slice(&p[..4 * h]);
        self.b1.copy_from_slice(&p[4 * h..5 * h]);
        self.w2.copy_from_slice(&p[5 * h..6 * h]);
        self.b2 = p[6 * h];
        Ok(())
    }

    /// Sets the layers explicitly; `w1` is row-major `(H, 4)`.
    pub fn set_layers(&mut self, w1: &[[f64; 4]], b1: &[f64], w2: &[f64], b2: f64) -> Result<()> {
        let h = self.hidden;
        if w1.len() != h || b1.len() != h || w2.len() != h {
            return Err(Error::invalid("layers", "size does not match hidden width"));
        }
        self.w1 = w1.iter().flatten().copied().collect();
        self.b1 = b1.to_vec();
        self.w2 = w2.to_vec();
        self.b2 = b2;
        Ok(())
    }

    /// Clamps a physical state into the input box and maps it to `[-1, 1]^4`.
    #[inline]
    pub fn normalize(&self, state: &StateVector) -> [f64; 4] {
        let s = state.to_array();
        let mut z = [0.0; 4];
        for k in 0..4 {
            let (lo, hi) = (self.input_min[k], self.input_max[k]);
            let v = if s[k].is_nan() { 0.5 * (lo + hi) } else { s[k].clamp(lo, hi) };
            z[k] = (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0);
        }
        z
    }

    /// Raw network output for a normalized input.
    #[inline]
    pub fn forward(&self, z: &[f64; 4]) -> f64 {
        let mut y = self.b2;
        for j in 0..self.hidden {
            let w = &self.w1[4 * j..4 * j + 4];
            let a = self.b1[j] + w[0] * z[0] + w[1] * z[1] + w[2] * z[2] + w[3] * z[3];
            y += self.w2[j] * a.tanh();
        }
        y
    }

    /// Raw output and its gradient with respect to [`PolicyNet::params`].
    pub fn forward_with_gradient(&self, z: &[f64; 4], grad: &mut [f64]) -> f64 {
        let h = self.hidden;
        debug_assert_eq!(grad.len(), self.param_count());
        let mut y = self.b2;
        for j in 0..h {
            let w = &self.w1[4 * j..4 * j + 4];
            let t = (self.b1[j] + w[0] * z[0] + w[1] * z[1] + w[2] * z[2] + w[3] * z[3]).tanh();
            y += self.w2[j] * t;
            let d = self.w2[j] * (1.0 - t * t);
            for k in 0..4 {
                grad[4 * j + k] = d * z[k];
            }
            grad[4 * h + j] = d;
            grad[5 * h + j] = t;
        }
        grad[6 * h] = 1.0;
        y
    }

    #[inline]
    pub fn denormalize(&self, y: f64) -> f64 {
        self.output_offset + self.output_scale * y
    }

    /// Inverse of [`PolicyNet::denormalize`].
    #[inline]
    pub fn target(&self, u: f64) -> f64 {
        (u - self.output_offset) / self.output_scale
    }

    /// Saturated control force for a physical state.
    #[inline]
    pub fn feedback(&self, state: &StateVector) -> f64 {
        let u = self.denormalize(self.forward(&self.normalize(state)));
        if u.is_nan() {
            0.0
        } else {
            u.clamp(self.u_min, self.u_max)
        }
    }

    /// Little-endian binary: magic, version, layer sizes, activation tags, scaling
    /// constants, then every weight as `f64`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&MAGIC)?;
        for v in [FORMAT_VERSION, 4, self.hidden as u32, 1] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&[ACT_TANH, ACT_LINEAR])?;
        let output = [self.output_offset, self.output_scale, self.u_min, self.u_max];
        let params = self.params();
        let values = self
            .input_min
            .iter()
            .chain(&self.input_max)
            .chain(&output)
            .chain(&params);
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(Error::Format("not a policy network file".into()));
        }
        let mut u32s = [0u32; 4];
        for v in &mut u32s {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *v = u32::from_le_bytes(b);
        }
        let [version, n_in, hidden, n_out] = u32s;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        if n_in != 4 || n_out != 1 || hidden == 0 || hidden > 1 << 20 {
            return Err(Error::Format(format!("unsupported shape {n_in}x{hidden}x{n_out}")));
        }
        let mut act = [0u8; 2];
        r.read_exact(&mut act)?;
        if act != [ACT_TANH, ACT_LINEAR] {
            return Err(Error::Format(format!("unsupported activations {act:?}")));
        }
        let hidden = hidden as usize;
        let mut read_f64 = || -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let mut input_min = [0.0; 4];
        let mut input_max = [0.0; 4];
        for v in input_min.iter_mut().chain(input_max.iter_mut()) {
            *v = read_f64()?;
        }
        let (output_offset, output_scale, u_min, u_max) =
            (read_f64()?, read_f64()?, read_f64()?, read_f64()?);
        let params = (0..6 * hidden + 1)
            .map(|_| read_f64())
            .collect::<Result<Vec<_>>>()?;
        let mut net = Self {
            hidden,
            w1: vec![0.0; 4 * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
            input_min,
            input_max,
            output_offset,
            output_scale,
            u_min,
            u_max,
        };
        net.set_params(&params)?;
        net.validate()?;
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x_only_net() -> PolicyNet {
        let mut net = PolicyNet::new(1, &GridSpec::default()).unwrap();
        net.set_layers(&[[0.0, 0.0, 1.0, 0.0]], &[0.0], &[2.0], 0.0)
            .unwrap();
        net.output_scale = 1.0;
        net
    }

    #[test]
    fn hand_set_network() {
        let net = x_only_net();
        let u = net.feedback(&StateVector::new(0.0, 0.0, 0.05, 0.0));
        assert!((u - 0.92423).abs() < 1e-5, "{u}");
        assert!((u - 2.0 * 0.5f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn inputs_clamped_to_box() {
        let net = x_only_net();
        let inside = net.feedback(&StateVector::new(0.0, 0.0, 0.1, 0.0));
        let outside = net.feedback(&StateVector::new(0.0, 0.0, 7.0, 0.0));
        assert_eq!(inside, outside);
        assert_eq!(net.normalize(&StateVector::new(-9.0, 9.0, 0.0, 0.0))[..2], [-1.0, 1.0]);
    }

    #[test]
    fn output_saturates() {
        let mut net = PolicyNet::new(1, &GridSpec::default()).unwrap();
        net.set_layers(&[[0.0; 4]], &[0.0], &[0.0], 100.0).unwrap();
        assert_eq!(net.feedback(&StateVector::ZERO), 5.0);
        net.set_layers(&[[0.0; 4]], &[0.0], &[0.0], -100.0).unwrap();
        assert_eq!(net.feedback(&StateVector::ZERO), -5.0);
    }

    #[test]
    fn binary_round_trip() {
        let mut net = PolicyNet::new(3, &GridSpec::default()).unwrap();
        let p: Vec<f64> = (0..net.param_count()).map(|i| (i as f64 * 0.37).sin()).collect();
        net.set_params(&p).unwrap();
        let mut buf = Vec::new();
        net.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"BPNN");
        let back = PolicyNet::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, net);

        buf[0] = b'X';
        assert!(matches!(PolicyNet::read_from(buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_file_fails() {
        let net = PolicyNet::new(2, &GridSpec::default()).unwrap();
        let mut buf = Vec::new();
        net.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(PolicyNet::read_from(buf.as_slice()).is_err());
    }
}
