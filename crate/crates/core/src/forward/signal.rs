use crate::error::{invalid, Result};
use nalgebra::DMatrix;

/// Uniform time grid `t_n = n · dt`, `n = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    len: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, len: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid(format!("time step {dt} must be positive"));
        }
        if len < 2 {
            return invalid("time grid needs at least 2 samples");
        }
        Ok(Self { dt, len })
    }

    /// Grid with step `dt` covering `[0, horizon]`.
    pub fn covering(dt: f64, horizon: f64) -> Result<Self> {
        Self::new(dt, (horizon / dt).round() as usize + 1)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.len - 1)
    }

    /// First sample index with `t_n ≥ t`.
    pub fn index_at_or_after(&self, t: f64) -> usize {
        ((t / self.dt - 1e-9).ceil().max(0.0) as usize).min(self.len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelRole {
    /// Interior nodes of W (source-to-solution map).
    Interior,
    /// Boundary nodes of S_out (Dirichlet-to-Neumann map).
    BoundaryOut,
}

/// Sampled multi-channel record: rows are time samples, columns channels.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub grid: TimeGrid,
    pub values: DMatrix<f64>,
    /// Node index per channel.
    pub channels: Vec<usize>,
    pub role: ChannelRole,
}

impl TimeSignal {
    pub fn zeros(grid: TimeGrid, channels: Vec<usize>, role: ChannelRole) -> Self {
        Self {
            grid,
            values: DMatrix::zeros(grid.len(), channels.len()),
            channels,
            role,
        }
    }

    pub fn new(
        grid: TimeGrid,
        values: DMatrix<f64>,
        channels: Vec<usize>,
        role: ChannelRole,
    ) -> Result<Self> {
        if values.nrows() != grid.len() || values.ncols() != channels.len() {
            return invalid(format!(
                "signal shape {}x{} does not match grid {} x {} channels",
                values.nrows(),
                values.ncols(),
                grid.len(),
                channels.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("signal contains non-finite values");
        }
        Ok(Self {
            grid,
            values,
            channels,
            role,
        })
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.amax()
    }

    /// Max-norm of the difference relative to the max-norm of `reference`.
    pub fn relative_error(&self, reference: &TimeSignal) -> f64 {
        (&self.values - &reference.values).amax() / reference.values.amax().max(f64::MIN_POSITIVE)
    }

    /// Channels of several signals on the same grid side by side.
    pub fn concat_channels(signals: &[&TimeSignal]) -> Result<TimeSignal> {
        let first = match signals.first() {
            Some(s) => *s,
            None => return invalid("no signals to concatenate"),
        };
        let total: usize = signals.iter().map(|s| s.channel_count()).sum();
        let mut values = DMatrix::zeros(first.grid.len(), total);
        let mut channels = Vec::with_capacity(total);
        let mut col = 0;
        for s in signals {
            if s.grid != first.grid {
                return invalid("signals live on different grids");
            }
            values
                .columns_mut(col, s.channel_count())
                .copy_from(&s.values);
            col += s.channel_count();
            channels.extend_from_slice(&s.channels);
        }
        Ok(TimeSignal {
            grid: first.grid,
            values,
            channels,
            role: first.role,
        })
    }

    /// Columns `start..start + count` as their own signal.
    pub fn channel_block(&self, start: usize, count: usize) -> TimeSignal {
        TimeSignal {
            grid: self.grid,
            values: self.values.columns(start, count).into_owned(),
            channels: self.channels[start..start + count].to_vec(),
            role: self.role,
        }
    }

    /// Adds uniform noise of size `level` relative to the max-norm.
    pub fn with_noise<R: rand::Rng>(&self, level: f64, rng: &mut R) -> TimeSignal {
        let scale = level * self.max_abs();
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v += scale * rng.random_range(-1.0..1.0);
        }
        out
    }
}
