//! Closed-loop simulation: truth, sensors and one observer stepped together.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{compute_errors, lyapunov_v2, translational_error, ErrorRecord, TrueBiases};
use crate::dynamics::{step_truth, Sensor, SensorSpec, Signal, SignalSpec, TruthState, STANDARD_GRAVITY};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::observer::{MeasurementSpan, ObserverState, StageSamples};
use crate::observer_const::{self, step_observer_const, ConstGains};
use crate::observer_riccati::{step_observer_var, RiccatiState};

/// Largest integration step the fixed-step integrators are validated for.
pub const MAX_DT: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObserverKind {
    Constant,
    Riccati,
}

impl ObserverKind {
    pub fn name(self) -> &'static str {
        match self {
            ObserverKind::Constant => "constant",
            ObserverKind::Riccati => "riccati",
        }
    }
}

/// How measurements are presented to the observer inside a step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementHold {
    /// Sampled at each RK4 stage time; noise is drawn once per step.
    #[default]
    Continuous,
    /// Sampled at the start of the step and held.
    ZeroOrderHold,
}

/// Either observer, with its gains.
#[derive(Clone, Debug, PartialEq)]
pub enum Estimator {
    Constant { state: ObserverState, gains: ConstGains },
    Riccati { state: ObserverState, riccati: RiccatiState },
}

impl Estimator {
    pub fn new(kind: ObserverKind, state: ObserverState, gains: ConstGains, riccati: RiccatiState) -> Self {
        match kind {
            ObserverKind::Constant => Estimator::Constant { state, gains },
            ObserverKind::Riccati => Estimator::Riccati { state, riccati },
        }
    }

    pub fn kind(&self) -> ObserverKind {
        match self {
            Estimator::Constant { .. } => ObserverKind::Constant,
            Estimator::Riccati { .. } => ObserverKind::Riccati,
        }
    }

    pub fn state(&self) -> &ObserverState {
        match self {
            Estimator::Constant { state, .. } | Estimator::Riccati { state, .. } => state,
        }
    }

    pub fn riccati(&self) -> Option<&RiccatiState> {
        match self {
            Estimator::Riccati { riccati, .. } => Some(riccati),
            Estimator::Constant { .. } => None,
        }
    }

    pub fn k2(&self) -> f64 {
        match self {
            Estimator::Constant { gains, .. } => gains.k2,
            Estimator::Riccati { riccati, .. } => riccati.k2,
        }
    }

    pub fn step<M: MeasurementSpan>(&mut self, m: &M, g: &Vec3, dt: f64) -> Result<()> {
        match self {
            Estimator::Constant { state, gains } => {
                *state = step_observer_const(state, m, g, gains, dt);
            }
            Estimator::Riccati { state, riccati } => {
                let (s, r) = step_observer_var(state, m, g, riccati, dt)?;
                *state = s;
                *riccati = r;
            }
        }
        Ok(())
    }
}

/// Everything needed to reproduce one simulated run.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub dt: f64,
    pub t_end: f64,
    pub gravity: Vec3,
    pub signal: SignalSpec,
    pub sensor: SensorSpec,
    pub truth0: TruthState,
    pub observer0: ObserverState,
    pub const_gains: ConstGains,
    pub riccati: RiccatiState,
    pub hold: MeasurementHold,
}

impl Scenario {
    /// The numerical experiment: 15 s at `dt = 1e-3`, default signals, biases,
    /// noise 0.01 and gains.
    pub fn reference() -> Self {
        let (dt, t_end) = (1e-3, 15.0);
        Self {
            dt,
            t_end,
            gravity: STANDARD_GRAVITY,
            signal: SignalSpec::sampled(Signal::Reference, t_end, dt),
            sensor: SensorSpec::reference(),
            truth0: TruthState::reference(),
            observer0: ObserverState::default(),
            const_gains: ConstGains::reference(),
            riccati: RiccatiState::reference(),
            hold: MeasurementHold::Continuous,
        }
    }

    /// [`Scenario::reference`] without sensor noise.
    pub fn reference_noise_free() -> Self {
        let mut s = Self::reference();
        s.sensor.noise = 0.0;
        s
    }

    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt).round() as usize).max(1)
    }

    pub fn biases(&self) -> TrueBiases {
        TrueBiases {
            gyro: self.sensor.gyro_bias,
            accel: self.sensor.accel_bias,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::ConfigInvalid(format!("dt must be in (0, {MAX_DT}], got {}", self.dt)));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::ConfigInvalid(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.sensor.noise >= 0.0) {
            return Err(Error::ConfigInvalid(format!("noise must be non-negative, got {}", self.sensor.noise)));
        }
        Ok(())
    }
}

/// State of the loop at the start of one integration step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub truth: TruthState,
    /// Measurements fed to the observer over `[t, t + dt]`.
    pub measurement: StageSamples,
    pub estimate: ObserverState,
    pub errors: ErrorRecord,
    /// `(λ_min, λ_max)` of the Riccati matrix, for the variable-gain observer.
    pub p_bounds: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinalState {
    pub truth: TruthState,
    pub estimator: Estimator,
    pub errors: ErrorRecord,
    pub p_bounds: Option<(f64, f64)>,
}

fn errors_for(t: f64, truth: &TruthState, biases: &TrueBiases, est: &Estimator, const_v2: bool) -> ErrorRecord {
    let mut e = compute_errors(t, truth, biases, est.state(), est.k2());
    let x = translational_error(truth, biases, est.state());
    e.v2 = match est {
        Estimator::Riccati { riccati, .. } => lyapunov_v2(&x, &riccati.p),
        Estimator::Constant { gains, .. } if const_v2 => {
            lyapunov_v2(&x, &observer_const::lyapunov_matrix(gains, truth.rotation.matrix()))
        }
        Estimator::Constant { .. } => None,
    };
    e
}

/// Runs `scenario` with one observer, handing each step's record to `on_step`.
pub fn simulate_with<F>(scenario: &Scenario, kind: ObserverKind, mut on_step: F) -> Result<FinalState>
where
    F: FnMut(&StepRecord) -> Result<()>,
{
    scenario.validate()?;
    let dt = scenario.dt;
    let g = scenario.gravity;
    let signal = &scenario.signal;
    let biases = scenario.biases();
    let mut sensor = Sensor::new(scenario.sensor.clone())?;
    let mut truth = scenario.truth0;
    let mut est = Estimator::new(kind, scenario.observer0, scenario.const_gains, scenario.riccati);
    // xᵀP⁻¹x is a Lyapunov function of the constant-gain observer only when Z > 0
    let const_v2 = scenario.const_gains.report().z_min_eig > 0.0;

    for k in 0..scenario.steps() {
        let t = k as f64 * dt;
        let draw = sensor.draw();
        let start = sensor.measure(&truth, t, signal, &draw)?;
        let next = step_truth(&truth, signal, &g, t, dt);
        let span = match scenario.hold {
            MeasurementHold::ZeroOrderHold => StageSamples::held(start),
            MeasurementHold::Continuous => {
                let half = step_truth(&truth, signal, &g, t, 0.5 * dt);
                StageSamples {
                    start,
                    mid: sensor.measure(&half, t + 0.5 * dt, signal, &draw)?,
                    end: sensor.measure(&next, t + dt, signal, &draw)?,
                }
            }
        };
        let record = StepRecord {
            t,
            truth,
            measurement: span,
            estimate: *est.state(),
            errors: errors_for(t, &truth, &biases, &est, const_v2),
            p_bounds: est.riccati().map(RiccatiState::p_bounds),
        };
        on_step(&record)?;
        est.step(&span, &g, dt)?;
        truth = next;
    }

    let t = scenario.steps() as f64 * dt;
    Ok(FinalState {
        truth,
        errors: errors_for(t, &truth, &biases, &est, const_v2),
        p_bounds: est.riccati().map(RiccatiState::p_bounds),
        estimator: est,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationRun {
    pub records: Vec<StepRecord>,
    pub last: FinalState,
}

impl SimulationRun {
    /// Error records at every step start plus the final time.
    pub fn error_series(&self) -> Vec<ErrorRecord> {
        self.records
            .iter()
            .map(|r| r.errors)
            .chain(std::iter::once(self.last.errors))
            .collect()
    }
}

/// Runs `scenario` and keeps every step record.
pub fn simulate(scenario: &Scenario, kind: ObserverKind) -> Result<SimulationRun> {
    scenario.validate()?;
    let mut records = Vec::with_capacity(scenario.steps());
    let last = simulate_with(scenario, kind, |r| {
        records.push(r.clone());
        Ok(())
    })?;
    Ok(SimulationRun { records, last })
}
