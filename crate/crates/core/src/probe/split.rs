//! Inductive splitting of a packet-train response into per-packet responses.

use super::bump::Bump;
use super::plan::ProbePlan;
use crate::error::{Error, Result};
use crate::forward::{ChannelRole, TimeGrid, TimeSignal};
use crate::recover::{matrix_pencil_with, window_indices, ExponentialModel, PencilOptions};
use nalgebra::{DMatrix, DVector};

/// Response to one packet: raw samples while the packet is active, then the
/// fitted exponential model that continues it to all later times.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketResponse {
    pub index: usize,
    pub bump: Bump,
    pub grid: TimeGrid,
    pub role: ChannelRole,
    /// First sample of the onset segment.
    pub onset_start: usize,
    /// Samples from `onset_start` up to the fit window.
    pub onset: DMatrix<f64>,
    /// Fit window `(start, end)` in time.
    pub window: (f64, f64),
    /// Residual measurement over the fit window.
    pub samples: DMatrix<f64>,
    pub model: ExponentialModel,
    pub flagged: bool,
}

impl PacketResponse {
    fn model_start(&self) -> usize {
        self.onset_start + self.onset.nrows()
    }

    /// Value at grid sample `n`.
    pub fn at(&self, n: usize) -> DVector<f64> {
        if n < self.onset_start {
            DVector::zeros(self.model.channel_count())
        } else if n < self.model_start() {
            self.onset.row(n - self.onset_start).transpose()
        } else {
            self.model.eval(self.grid.time(n))
        }
    }

    /// The whole response sampled on its grid.
    pub fn reconstruct(&self) -> Result<TimeSignal> {
        let nc = self.model.channel_count();
        let mut values = DMatrix::zeros(self.grid.len(), nc);
        for n in self.onset_start..self.grid.len() {
            values.set_row(n, &self.at(n).transpose());
        }
        TimeSignal::new(self.grid, values, self.model.channels.clone(), self.role)
    }
}

pub fn split_measurement(
    signal: &TimeSignal,
    plan: &ProbePlan,
    model_order: usize,
) -> Result<Vec<PacketResponse>> {
    split_measurement_with(signal, plan, model_order, &PencilOptions::default())
}

/// Packet `k` is fitted on the gap after its support, once the continuations
/// of packets `0..k` have been subtracted from the measurement.
pub fn split_measurement_with(
    signal: &TimeSignal,
    plan: &ProbePlan,
    model_order: usize,
    opts: &PencilOptions,
) -> Result<Vec<PacketResponse>> {
    let grid = signal.grid;
    let packets = plan.packets();
    let k_count = packets.len();
    let last = packets[k_count - 1].support().1;
    if grid.horizon() <= last {
        return Err(Error::RejectedPlan(format!(
            "measurement ends at {} before the last packet ends at {last}",
            grid.horizon()
        )));
    }
    let mut rest = signal.clone();
    let mut out = Vec::with_capacity(k_count);
    for (k, bump) in packets.iter().enumerate() {
        let (t0, t1) = bump.support();
        let end = if k + 1 < k_count {
            packets[k + 1].support().0
        } else {
            plan.listening_end().min(grid.horizon())
        };
        let (i0, i1) = window_indices(&rest, (t1, end));
        let n = if i1 >= i0 { i1 - i0 + 1 } else { 0 };
        if n < 2 * model_order {
            return Err(Error::RejectedPlan(format!(
                "packet {k}: fit window ({t1}, {end}) holds {n} samples, need {}",
                2 * model_order
            )));
        }
        let model = matrix_pencil_with(&rest, (t1, end), model_order, opts)?;
        let samples = rest.values.rows(i0, n).into_owned();
        let onset_start = grid.index_at_or_after(t0).min(i0);
        let onset = rest.values.rows(onset_start, i0 - onset_start).into_owned();
        for r in onset_start..i0 {
            rest.values.row_mut(r).fill(0.0);
        }
        if !model.is_zero() {
            for r in i0..grid.len() {
                let v = model.eval(grid.time(r));
                let mut row = rest.values.row_mut(r);
                row -= v.transpose();
            }
        }
        out.push(PacketResponse {
            index: k,
            bump: *bump,
            grid,
            role: signal.role,
            onset_start,
            onset,
            window: (grid.time(i0), grid.time(i1)),
            samples,
            flagged: model.flagged,
            model,
        });
    }
    Ok(out)
}
