use crate::forward::{ChannelRole, TimeGrid, TimeSignal};
use crate::Result;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// `amplitudes · τ^power · e^{rate τ}` with `τ = t - t_ref`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpComponent {
    pub rate: Complex64,
    pub power: u8,
    pub amplitudes: DVector<Complex64>,
}

impl ExpComponent {
    pub fn basis(&self, tau: f64) -> Complex64 {
        let e = (self.rate * tau).exp();
        if self.power == 0 {
            e
        } else {
            e * tau.powi(self.power as i32)
        }
    }
}

/// Multi-channel exponential sum. Complex rates appear together with their
/// conjugates, carrying conjugate amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialModel {
    pub t_ref: f64,
    pub channels: Vec<usize>,
    pub components: Vec<ExpComponent>,
    /// Max-norm fit residual relative to the max-norm of the fitted data.
    pub residual: f64,
    /// Condition number of the shifted subspace solve.
    pub condition: f64,
    pub flagged: bool,
}

impl ExponentialModel {
    pub fn zero(channels: Vec<usize>, t_ref: f64) -> Self {
        Self {
            t_ref,
            channels,
            components: Vec::new(),
            residual: 0.0,
            condition: 1.0,
            flagged: false,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Distinct rates, one per conjugate pair (non-negative imaginary part).
    pub fn exponents(&self) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = Vec::new();
        for c in &self.components {
            let r = if c.rate.im < 0.0 { c.rate.conj() } else { c.rate };
            if !out.contains(&r) {
                out.push(r);
            }
        }
        out
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let tau = t - self.t_ref;
        let mut out = DVector::zeros(self.channels.len());
        for c in &self.components {
            let b = c.basis(tau);
            for (o, a) in out.iter_mut().zip(c.amplitudes.iter()) {
                *o += (a * b).re;
            }
        }
        out
    }

    /// Samples the model on `grid`, zero before `from`.
    pub fn sample(&self, grid: &TimeGrid, from: f64, role: ChannelRole) -> Result<TimeSignal> {
        let mut values = DMatrix::zeros(grid.len(), self.channels.len());
        for n in grid.index_at_or_after(from)..grid.len() {
            values.set_row(n, &self.eval(grid.time(n)).transpose());
        }
        TimeSignal::new(*grid, values, self.channels.clone(), role)
    }

    /// Restricts the model to channels `start..start + count`.
    pub fn channel_block(&self, start: usize, count: usize) -> Self {
        Self {
            t_ref: self.t_ref,
            channels: self.channels[start..start + count].to_vec(),
            components: self
                .components
                .iter()
                .map(|c| ExpComponent {
                    rate: c.rate,
                    power: c.power,
                    amplitudes: c.amplitudes.rows(start, count).into_owned(),
                })
                .collect(),
            residual: self.residual,
            condition: self.condition,
            flagged: self.flagged,
        }
    }

    /// Same function of time written with a different reference time.
    pub fn rebased(&self, t_ref: f64) -> Self {
        let shift = t_ref - self.t_ref;
        let mut components = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let e = (c.rate * shift).exp();
            match c.power {
                0 => {
                    let amps = c.amplitudes.map(|a| a * e);
                    add_component(&mut components, c.rate, 0, amps);
                }
                _ => {
                    // (τ' + shift) e^{μ(τ' + shift)}
                    add_component(&mut components, c.rate, 1, c.amplitudes.map(|a| a * e));
                    add_component(
                        &mut components,
                        c.rate,
                        0,
                        c.amplitudes.map(|a| a * e * shift),
                    );
                }
            }
        }
        Self {
            t_ref,
            components,
            ..self.clone()
        }
    }
}

fn add_component(list: &mut Vec<ExpComponent>, rate: Complex64, power: u8, amps: DVector<Complex64>) {
    if let Some(c) = list.iter_mut().find(|c| c.rate == rate && c.power == power) {
        c.amplitudes += amps;
    } else {
        list.push(ExpComponent {
            rate,
            power,
            amplitudes: amps,
        });
    }
}
