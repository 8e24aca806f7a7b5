//! Random time-window minibatches.

use rand::Rng;

use crate::error::{HawkesError, Result};
use crate::model::EventSequence;

/// Events of `[t0, t0 + kappa T)` rebased to `[0, kappa T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowDraw {
    pub t0: f64,
    pub kappa: f64,
    /// Horizon of the sequence the window was cut from.
    pub full_horizon: f64,
    pub events: EventSequence,
}

impl WindowDraw {
    /// The whole sequence as a window (`kappa = 1`).
    pub fn full(seq: &EventSequence) -> Self {
        WindowDraw {
            t0: 0.0,
            kappa: 1.0,
            full_horizon: seq.horizon(),
            events: seq.clone(),
        }
    }

    /// Window length `kappa T`.
    pub fn horizon(&self) -> f64 {
        self.events.horizon()
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa <= 1.0 {
        Ok(())
    } else {
        Err(HawkesError::InvalidParameter {
            name: "kappa",
            value: kappa,
        })
    }
}

/// Window starting at `t0`; `t0` must lie in `[0, (1 - kappa) T]`.
pub fn window_at(seq: &EventSequence, t0: f64, kappa: f64) -> Result<WindowDraw> {
    check_kappa(kappa)?;
    let horizon = seq.horizon();
    if kappa == 1.0 {
        return Ok(WindowDraw::full(seq));
    }
    let width = kappa * horizon;
    if !(t0 >= 0.0 && t0 <= horizon - width) {
        return Err(HawkesError::InvalidParameter {
            name: "window start",
            value: t0,
        });
    }
    let times = seq.times();
    let lo = times.partition_point(|&t| t < t0);
    let hi = times.partition_point(|&t| t < t0 + width);
    let rebased = times[lo..hi].iter().map(|&t| (t - t0).min(width)).collect();
    let events = EventSequence::from_parts_unchecked(
        rebased,
        seq.dims()[lo..hi].to_vec(),
        width,
        seq.dimension(),
    );
    Ok(WindowDraw {
        t0,
        kappa,
        full_horizon: horizon,
        events,
    })
}

/// Draws `t0 ~ U[0, (1 - kappa) T]` and cuts the window.
pub fn draw_window<R: Rng + ?Sized>(
    seq: &EventSequence,
    kappa: f64,
    rng: &mut R,
) -> Result<WindowDraw> {
    check_kappa(kappa)?;
    if kappa == 1.0 {
        return Ok(WindowDraw::full(seq));
    }
    let t0 = rng.random::<f64>() * (1.0 - kappa) * seq.horizon();
    window_at(seq, t0, kappa)
}
