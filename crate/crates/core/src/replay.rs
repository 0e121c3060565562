//! Running the observers over a recorded sensor log.
//!
//! Rows are held constant until the next row arrives (zero-order hold).
//! Intervals longer than [`MAX_SUBSTEP`] are split into equal sub-steps.

use crate::diagnostics::{fit_exponential_rate, summarize_bias, ConvergenceSummary, DEFAULT_TAIL_FRACTION};
use crate::dynamics::{MeasurementFrame, STANDARD_GRAVITY};
use crate::error::{Error, Result};
use crate::geometry::{orthogonality_defect, project_so3, Mat3, RotationMatrix, Vec3, TOL_ORTH_MEASURED};
use crate::observer::ObserverState;
use crate::observer_const::ConstGains;
use crate::observer_riccati::RiccatiState;
use crate::sim::{Estimator, ObserverKind};

pub const MAX_ROW_GAP: f64 = 0.5;
pub const MAX_SUBSTEP: f64 = 1e-2;
/// Orthogonality defect above which a logged rotation triggers a warning.
pub const ORTH_WARN: f64 = 1e-3;
/// Orthogonality defect above which a logged rotation is rejected.
pub const ORTH_REJECT: f64 = 1e-1;

/// One line of a sensor log: `t, R_m (row-major), p_m, Ω_m, a_m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorLogRow {
    pub t: f64,
    pub rotation: Mat3,
    pub position: Vec3,
    pub angular_velocity: Vec3,
    pub acceleration: Vec3,
}

impl From<&MeasurementFrame> for SensorLogRow {
    fn from(m: &MeasurementFrame) -> Self {
        Self {
            t: m.t,
            rotation: *m.rotation.matrix(),
            position: m.position,
            angular_velocity: m.angular_velocity,
            acceleration: m.acceleration,
        }
    }
}

/// Checks timing and rotation sanity and converts rows to measurement frames.
/// Rotations off SO(3) by more than the measured-data tolerance are projected.
pub fn frames_from_log(rows: &[SensorLogRow]) -> Result<Vec<MeasurementFrame>> {
    if rows.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut frames = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if !row.t.is_finite() {
            return Err(Error::NonMonotoneTime { row: i, t: row.t });
        }
        if i > 0 {
            let gap = row.t - rows[i - 1].t;
            if !(gap > 0.0) {
                return Err(Error::NonMonotoneTime { row: i, t: row.t });
            }
            if gap > MAX_ROW_GAP {
                return Err(Error::GapTooLarge { row: i, gap, max: MAX_ROW_GAP });
            }
        }
        let defect = orthogonality_defect(&row.rotation);
        let det = row.rotation.determinant();
        if !(defect <= ORTH_REJECT) || !(det > 0.0) {
            return Err(Error::NotRotation { defect, det });
        }
        if defect > ORTH_WARN {
            log::warn!("log row {i}: rotation orthogonality defect {defect:.3e}");
        }
        let rotation = if defect > TOL_ORTH_MEASURED {
            project_so3(&row.rotation)?
        } else {
            RotationMatrix::new_unchecked(row.rotation)
        };
        frames.push(MeasurementFrame {
            t: row.t,
            rotation,
            position: row.position,
            angular_velocity: row.angular_velocity,
            acceleration: row.acceleration,
        });
    }
    Ok(frames)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayOptions {
    pub gravity: Vec3,
    pub observer0: ObserverState,
    pub const_gains: ConstGains,
    pub riccati: RiccatiState,
    /// Added to both the gyro and the accelerometer channels.
    pub add_bias: Vec3,
    pub max_substep: f64,
    pub tail_fraction: f64,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self {
            gravity: STANDARD_GRAVITY,
            observer0: ObserverState::default(),
            const_gains: ConstGains::reference(),
            riccati: RiccatiState::reference(),
            add_bias: Vec3::zeros(),
            max_substep: MAX_SUBSTEP,
            tail_fraction: DEFAULT_TAIL_FRACTION,
        }
    }
}

/// Estimate at a log row, before that row's measurement is applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReplayRecord {
    pub t: f64,
    pub measurement: MeasurementFrame,
    pub estimate: ObserverState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayRun {
    pub kind: ObserverKind,
    pub records: Vec<ReplayRecord>,
    pub summary: ConvergenceSummary,
}

pub fn run_replay(rows: &[SensorLogRow], kind: ObserverKind, opts: &ReplayOptions) -> Result<ReplayRun> {
    if !(opts.max_substep > 0.0) {
        return Err(Error::ConfigInvalid(format!("max_substep must be positive, got {}", opts.max_substep)));
    }
    let frames = frames_from_log(rows)?;
    let mut est = Estimator::new(kind, opts.observer0, opts.const_gains, opts.riccati);
    let mut records = Vec::with_capacity(frames.len());
    for (i, raw) in frames.iter().enumerate() {
        let frame = raw.with_added_bias(&opts.add_bias, &opts.add_bias);
        records.push(ReplayRecord {
            t: frame.t,
            measurement: frame,
            estimate: *est.state(),
        });
        let Some(next) = frames.get(i + 1) else { break };
        let span = next.t - frame.t;
        let n = (span / opts.max_substep).ceil().max(1.0) as usize;
        let h = span / n as f64;
        for j in 0..n {
            let held = MeasurementFrame { t: frame.t + j as f64 * h, ..frame };
            est.step(&held, &opts.gravity, h)?;
        }
    }
    let summary = summarize(&records, opts.tail_fraction)?;
    Ok(ReplayRun { kind, records, summary })
}

fn summarize(records: &[ReplayRecord], tail_fraction: f64) -> Result<ConvergenceSummary> {
    let gyro: Vec<Vec3> = records.iter().map(|r| r.estimate.gyro_bias).collect();
    let accel: Vec<Vec3> = records.iter().map(|r| r.estimate.accel_bias).collect();
    let gyro_bias = summarize_bias(&gyro, tail_fraction)?;
    let accel_bias = summarize_bias(&accel, tail_fraction)?;
    let n_tail = ((records.len() as f64 * tail_fraction).ceil() as usize).clamp(1, records.len());
    let window = (records[0].t, records[records.len() - n_tail].t);
    // distance of the stacked bias estimate from its converged value
    let series: Vec<(f64, f64)> = records
        .iter()
        .map(|r| {
            let d = (r.estimate.gyro_bias - gyro_bias.mean()).norm_squared()
                + (r.estimate.accel_bias - accel_bias.mean()).norm_squared();
            (r.t, d.sqrt())
        })
        .collect();
    let fit = fit_exponential_rate(&series, window).ok();
    Ok(ConvergenceSummary {
        fitted_rate: fit.map(|f| f.slope),
        fit_r2: fit.map(|f| f.r2),
        window,
        gyro_bias,
        accel_bias,
    })
}
