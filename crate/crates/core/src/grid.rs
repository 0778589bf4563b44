//! Periodic spacetime grid functions on `[0,T] × 𝕋` and seeded smooth
//! random fields. Spatial interpolation is spectral, temporal interpolation
//! cubic; the time direction is not periodic.

use crate::{Result, TORUS_LEN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct GridFunction {
    nt: usize,
    nx: usize,
    t_len: f64,
    data: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(nt: usize, nx: usize, t_len: f64) -> Self {
        GridFunction { nt, nx, t_len, data: vec![0.0; nt * nx] }
    }

    pub fn constant(nt: usize, nx: usize, t_len: f64, v: f64) -> Self {
        GridFunction { nt, nx, t_len, data: vec![v; nt * nx] }
    }

    pub fn from_fn(nt: usize, nx: usize, t_len: f64, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut g = Self::zeros(nt, nx, t_len);
        for it in 0..nt {
            let t = g.t_coord(it);
            for ix in 0..nx {
                let x = g.x_coord(ix);
                g.data[it * nx + ix] = f(t, x);
            }
        }
        g
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn t_len(&self) -> f64 {
        self.t_len
    }

    /// Time coordinate of row `it`; both endpoints are grid points.
    pub fn t_coord(&self, it: usize) -> f64 {
        self.t_len * it as f64 / (self.nt - 1) as f64
    }

    pub fn x_coord(&self, ix: usize) -> f64 {
        TORUS_LEN * ix as f64 / self.nx as f64
    }

    pub fn value(&self, it: usize, ix: usize) -> f64 {
        self.data[it * self.nx + ix]
    }

    pub fn value_mut(&mut self, it: usize, ix: usize) -> &mut f64 {
        &mut self.data[it * self.nx + ix]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            nt: self.nt,
            nx: self.nx,
            t_len: self.t_len,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        assert_eq!((self.nt, self.nx), (other.nt, other.nx), "grid mismatch");
        GridFunction {
            nt: self.nt,
            nx: self.nx,
            t_len: self.t_len,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add_scaled(&mut self, c: f64, other: &GridFunction) {
        assert_eq!((self.nt, self.nx), (other.nt, other.nx), "grid mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.data {
            *a *= c;
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Spectral `∂^n_{x1}` applied row by row.
    pub fn dx(&self, order: u32) -> GridFunction {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(self.nx);
        let ifft = planner.plan_fft_inverse(self.nx);
        let mut out = self.clone();
        let mut buf: Vec<Complex<f64>> = vec![Complex::default(); self.nx];
        for it in 0..self.nt {
            for ix in 0..self.nx {
                buf[ix] = Complex::new(self.value(it, ix), 0.0);
            }
            fft.process(&mut buf);
            for (k, c) in buf.iter_mut().enumerate() {
                let freq = wavenumber(k, self.nx);
                // Zero the unmatched Nyquist mode for odd derivatives.
                if order % 2 == 1 && self.nx % 2 == 0 && k == self.nx / 2 {
                    *c = Complex::default();
                    continue;
                }
                let ik = Complex::new(0.0, freq);
                *c *= ik.powu(order);
            }
            ifft.process(&mut buf);
            for ix in 0..self.nx {
                *out.value_mut(it, ix) = buf[ix].re / self.nx as f64;
            }
        }
        out
    }

    /// Fourth-order one-sided/centered finite-difference `∂_{x0}`.
    pub fn dt(&self) -> GridFunction {
        let h = self.t_len / (self.nt - 1) as f64;
        let mut out = self.clone();
        let n = self.nt;
        for ix in 0..self.nx {
            let v = |it: usize| self.value(it, ix);
            for it in 0..n {
                let d = if it >= 2 && it + 2 < n {
                    (v(it - 2) - 8.0 * v(it - 1) + 8.0 * v(it + 1) - v(it + 2)) / (12.0 * h)
                } else if it + 1 < n && it >= 1 {
                    (v(it + 1) - v(it - 1)) / (2.0 * h)
                } else if it == 0 {
                    (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
                } else {
                    (3.0 * v(n - 1) - 4.0 * v(n - 2) + v(n - 3)) / (2.0 * h)
                };
                *out.value_mut(it, ix) = d;
            }
        }
        out
    }

    /// Value at an arbitrary point: trigonometric in `x1`, cubic in `x0`.
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let s = t / self.t_len * (self.nt - 1) as f64;
        let i1 = (s.floor() as isize).clamp(0, self.nt as isize - 1) as usize;
        let frac = s - i1 as f64;
        if frac.abs() < 1e-12 {
            return self.eval_row_spectral(i1, x);
        }
        let i0 = i1.saturating_sub(1);
        let i2 = (i1 + 1).min(self.nt - 1);
        let i3 = (i1 + 2).min(self.nt - 1);
        let p = [
            self.eval_row_spectral(i0, x),
            self.eval_row_spectral(i1, x),
            self.eval_row_spectral(i2, x),
            self.eval_row_spectral(i3, x),
        ];
        catmull_rom(p, frac)
    }

    fn eval_row_spectral(&self, it: usize, x: f64) -> f64 {
        let nx = self.nx;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(nx);
        let mut buf: Vec<Complex<f64>> = (0..nx)
            .map(|ix| Complex::new(self.value(it, ix), 0.0))
            .collect();
        fft.process(&mut buf);
        let mut acc = 0.0;
        for (k, c) in buf.iter().enumerate() {
            let freq = wavenumber(k, nx);
            let w = Complex::new(0.0, freq * x).exp();
            let weight = if nx % 2 == 0 && k == nx / 2 { 0.5 } else { 1.0 };
            acc += weight * (c * w).re;
            if nx % 2 == 0 && k == nx / 2 {
                acc += weight * (c.conj() * Complex::new(0.0, -freq * x).exp()).re;
            }
        }
        acc / nx as f64
    }
}

pub fn wavenumber(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

fn catmull_rom(p: [f64; 4], u: f64) -> f64 {
    0.5 * ((2.0 * p[1])
        + (-p[0] + p[2]) * u
        + (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) * u * u
        + (-p[0] + 3.0 * p[1] - 3.0 * p[2] + p[3]) * u * u * u)
}

/// Smooth seeded random field: a trigonometric polynomial in `x1` and a
/// `2 t_len`-periodic trigonometric polynomial in `x0`, with Gaussian
/// coefficients damped by mode number.
pub struct NoiseSpec {
    pub seed: u64,
    pub amplitude: f64,
    pub x_modes: usize,
    pub t_modes: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { seed: 1, amplitude: 1.0, x_modes: 4, t_modes: 4 }
    }
}

pub fn smooth_noise(spec: &NoiseSpec, nt: usize, nx: usize, t_len: f64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut terms = Vec::new();
    for m in 0..=spec.t_modes {
        for k in 0..=spec.x_modes {
            let damp = (-((k * k + m * m) as f64) / 4.0).exp();
            let gauss = |rng: &mut ChaCha8Rng| {
                let (u1, u2): (f64, f64) = (rng.gen_range(1e-12..1.0), rng.gen());
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            };
            let a = gauss(&mut rng) * damp;
            let phase_t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let phase_x: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            terms.push((k as f64, m as f64, a, phase_t, phase_x));
        }
    }
    let omega = std::f64::consts::PI / t_len;
    GridFunction::from_fn(nt, nx, t_len, |t, x| {
        spec.amplitude
            * terms
                .iter()
                .map(|&(k, m, a, pt, px)| a * (k * x + px).cos() * (m * omega * t + pt).cos())
                .sum::<f64>()
    })
}

/// Parses a noise source: `seed:<n>[,amp][,xmodes][,tmodes]`, `expr:<f(x0,x1)>`
/// or `zero`.
pub fn noise_from_source(src: &str, nt: usize, nx: usize, t_len: f64) -> Result<GridFunction> {
    if let Some(rest) = src.strip_prefix("seed:") {
        let parts: Vec<&str> = rest.split(',').collect();
        let mut spec = NoiseSpec::default();
        spec.seed = parts[0]
            .parse()
            .map_err(|_| crate::Error::Spec(format!("bad noise seed {rest:?}")))?;
        if let Some(a) = parts.get(1) {
            spec.amplitude = a
                .parse()
                .map_err(|_| crate::Error::Spec(format!("bad noise amplitude {rest:?}")))?;
        }
        if let Some(m) = parts.get(2) {
            spec.x_modes = m
                .parse()
                .map_err(|_| crate::Error::Spec(format!("bad mode count {rest:?}")))?;
        }
        if let Some(m) = parts.get(3) {
            spec.t_modes = m
                .parse()
                .map_err(|_| crate::Error::Spec(format!("bad mode count {rest:?}")))?;
        }
        return Ok(smooth_noise(&spec, nt, nx, t_len));
    }
    if let Some(expr) = src.strip_prefix("expr:") {
        let e = crate::expr::Expr::parse(expr)?;
        let mut vars = std::collections::HashMap::new();
        return Ok(GridFunction::from_fn(nt, nx, t_len, move |t, x| {
            vars.insert("x0", t);
            vars.insert("x1", x);
            e.eval(&vars)
        }));
    }
    if src == "zero" {
        return Ok(GridFunction::zeros(nt, nx, t_len));
    }
    Err(crate::Error::Spec(format!("unknown noise source {src:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_derivative_of_trig() {
        let g = GridFunction::from_fn(4, 64, 1.0, |_, x| (3.0 * x).sin());
        let d = g.dx(1);
        let expected = GridFunction::from_fn(4, 64, 1.0, |_, x| 3.0 * (3.0 * x).cos());
        let err = d.zip(&expected, |a, b| (a - b).abs()).sup_norm();
        assert!(err < 1e-10, "err {err}");
    }

    #[test]
    fn time_derivative_fd() {
        let g = GridFunction::from_fn(65, 8, 2.0, |t, _| (t * 1.3).sin());
        let d = g.dt();
        let expected = GridFunction::from_fn(65, 8, 2.0, |t, _| 1.3 * (t * 1.3).cos());
        // Interior rows are 4th order accurate.
        let mut err: f64 = 0.0;
        for it in 2..63 {
            for ix in 0..8 {
                err = err.max((d.value(it, ix) - expected.value(it, ix)).abs());
            }
        }
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn spectral_eval_off_grid() {
        let g = GridFunction::from_fn(3, 32, 1.0, |_, x| (2.0 * x).cos() + 0.5 * x.sin());
        let v = g.eval(0.0, 0.3712);
        let want = (2.0f64 * 0.3712).cos() + 0.5 * 0.3712f64.sin();
        assert!((v - want).abs() < 1e-10);
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let spec = NoiseSpec { seed: 42, ..Default::default() };
        let a = smooth_noise(&spec, 16, 16, 0.5);
        let b = smooth_noise(&spec, 16, 16, 0.5);
        assert_eq!(a, b);
        let c = smooth_noise(&NoiseSpec { seed: 43, ..Default::default() }, 16, 16, 0.5);
        assert!(a.zip(&c, |x, y| (x - y).abs()).sup_norm() > 1e-8);
    }
}
