//! Run configuration, read from TOML.
//!
//! Every key has a default, so an empty file describes the reference run:
//! default signals, biases, noise, gains and a 15 s horizon at `dt = 1e-3`.
//! The full key list is in the README.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{SensorSpec, Signal, SignalSpec, SineTerm, TruthState};
use crate::error::{Error, Result};
use crate::geometry::{exp_so3, HomogeneousPointSet, Mat3, RotationMatrix, Vec3};
use crate::observer::ObserverState;
use crate::observer_const::ConstGains;
use crate::observer_riccati::RiccatiState;
use crate::replay::{ReplayOptions, MAX_SUBSTEP};
use crate::diagnostics::DEFAULT_TAIL_FRACTION;
use crate::sim::{MeasurementHold, ObserverKind, Scenario};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Simulate,
    Replay,
    CheckGains,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ObserverSelection {
    Constant,
    Riccati,
    #[default]
    Both,
}

impl ObserverSelection {
    pub fn kinds(self) -> Vec<ObserverKind> {
        match self {
            ObserverSelection::Constant => vec![ObserverKind::Constant],
            ObserverSelection::Riccati => vec![ObserverKind::Riccati],
            ObserverSelection::Both => vec![ObserverKind::Constant, ObserverKind::Riccati],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub observer: ObserverSelection,
    pub seed: u64,
    pub out: PathBuf,
    pub sim: SimSection,
    pub signal: SignalSection,
    pub sensor: SensorSection,
    pub initial: InitialSection,
    pub gains: GainsSection,
    pub replay: ReplaySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Simulate,
            observer: ObserverSelection::Both,
            seed: 0,
            out: PathBuf::from("out"),
            sim: SimSection::default(),
            signal: SignalSection::default(),
            sensor: SensorSection::default(),
            initial: InitialSection::default(),
            gains: GainsSection::default(),
            replay: ReplaySection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub t_end: f64,
    pub gravity: [f64; 3],
    pub measurement: MeasurementHold,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 15.0,
            gravity: [0.0, 0.0, -9.81],
            measurement: MeasurementHold::Continuous,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalPreset {
    #[default]
    Reference,
    Sinusoids,
}

/// With `preset = "sinusoids"` the signal is the offsets plus the listed terms.
/// `omega_bound` overrides the sampled bound on the angular speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSection {
    pub preset: SignalPreset,
    pub omega_offset: [f64; 3],
    pub omega_terms: Vec<SineTerm>,
    pub accel_offset: [f64; 3],
    pub accel_terms: Vec<SineTerm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_bound: Option<f64>,
}

impl Default for SignalSection {
    fn default() -> Self {
        Self {
            preset: SignalPreset::Reference,
            omega_offset: [0.0; 3],
            omega_terms: Vec::new(),
            accel_offset: [0.0; 3],
            accel_terms: Vec::new(),
            omega_bound: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    pub gyro_bias: [f64; 3],
    pub accel_bias: [f64; 3],
    pub noise: f64,
    /// Landmark positions in the inertial frame; the cube `[−1, 1]³` if absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<Vec<[f64; 3]>>,
}

impl Default for SensorSection {
    fn default() -> Self {
        Self {
            gyro_bias: [-1.0, 1.0, 5.0],
            accel_bias: [1.0, -5.0, 1.0],
            noise: 0.01,
            landmarks: None,
        }
    }
}

/// Initial truth (attitude as a rotation vector) and observer state
/// (attitude as a row-major 3×3 matrix, not necessarily a rotation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub rotation_vector: [f64; 3],
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub observer_rotation: [f64; 9],
    pub observer_position: [f64; 3],
    pub observer_velocity: [f64; 3],
    pub observer_gyro_bias: [f64; 3],
    pub observer_accel_bias: [f64; 3],
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            rotation_vector: [0.0, 0.0, -std::f64::consts::FRAC_PI_3],
            position: [0.0; 3],
            velocity: [0.0; 3],
            observer_rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            observer_position: [0.0; 3],
            observer_velocity: [0.0; 3],
            observer_gyro_bias: [0.0; 3],
            observer_accel_bias: [0.0; 3],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsSection {
    pub constant: ConstantGainsSection,
    pub riccati: RiccatiSection,
}

/// `c` defaults to the angular-speed bound of the signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantGainsSection {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl Default for ConstantGainsSection {
    fn default() -> Self {
        let g = ConstGains::reference();
        Self {
            k1: g.k1,
            k2: g.k2,
            k3: g.k3,
            k4: g.k4,
            k5: g.k5,
            c: None,
        }
    }
}

/// Diagonal scales: `P(0) = p0·I₉`, `Q = q·I₃`, `V = v·I₉`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiccatiSection {
    pub k1: f64,
    pub k2: f64,
    pub p0: f64,
    pub q: f64,
    pub v: f64,
}

impl Default for RiccatiSection {
    fn default() -> Self {
        Self {
            k1: 1.0,
            k2: 1.0,
            p0: 1.0,
            q: 1.0,
            v: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplaySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log: Option<PathBuf>,
    pub add_bias: [f64; 3],
    pub tail_fraction: f64,
    pub max_substep: f64,
}

impl Default for ReplaySection {
    fn default() -> Self {
        Self {
            log: None,
            add_bias: [0.0; 3],
            tail_fraction: DEFAULT_TAIL_FRACTION,
            max_substep: MAX_SUBSTEP,
        }
    }
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::from(a)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::ConfigInvalid(msg.into())
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| bad(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| bad(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Validates everything that can be checked without touching files.
    pub fn validate(&self) -> Result<()> {
        if !(self.sim.dt > 0.0) {
            return Err(bad(format!("sim.dt must be positive, got {}", self.sim.dt)));
        }
        if !(self.sim.t_end > 0.0) {
            return Err(bad(format!("sim.t_end must be positive, got {}", self.sim.t_end)));
        }
        if !(self.replay.tail_fraction > 0.0 && self.replay.tail_fraction <= 1.0) {
            return Err(bad(format!("replay.tail_fraction must be in (0, 1], got {}", self.replay.tail_fraction)));
        }
        for t in self.signal.omega_terms.iter().chain(&self.signal.accel_terms) {
            if t.axis > 2 {
                return Err(bad(format!("signal term axis must be 0, 1 or 2, got {}", t.axis)));
            }
        }
        if self.mode == Mode::Replay {
            match &self.replay.log {
                None => return Err(bad("replay mode needs replay.log")),
                Some(p) if !p.exists() => return Err(bad(format!("log file {} does not exist", p.display()))),
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn signal(&self) -> Signal {
        match self.signal.preset {
            SignalPreset::Reference => Signal::Reference,
            SignalPreset::Sinusoids => Signal::Sinusoids {
                omega_offset: v3(self.signal.omega_offset),
                omega_terms: self.signal.omega_terms.clone(),
                accel_offset: v3(self.signal.accel_offset),
                accel_terms: self.signal.accel_terms.clone(),
            },
        }
    }

    pub fn signal_spec(&self) -> SignalSpec {
        let sampled = SignalSpec::sampled(self.signal(), self.sim.t_end, self.sim.dt);
        match self.signal.omega_bound {
            Some(b) => SignalSpec { omega_bound: b, ..sampled },
            None => sampled,
        }
    }

    pub fn const_gains(&self, omega_bound: f64) -> ConstGains {
        let g = &self.gains.constant;
        ConstGains {
            k1: g.k1,
            k2: g.k2,
            k3: g.k3,
            k4: g.k4,
            k5: g.k5,
            c: g.c.unwrap_or(omega_bound),
        }
    }

    pub fn riccati(&self) -> Result<RiccatiState> {
        let r = &self.gains.riccati;
        RiccatiState::from_scales(r.p0, r.q, r.v, r.k1, r.k2)
    }

    pub fn observer0(&self) -> ObserverState {
        let i = &self.initial;
        ObserverState {
            rotation: Mat3::from_row_slice(&i.observer_rotation),
            position: v3(i.observer_position),
            velocity: v3(i.observer_velocity),
            gyro_bias: v3(i.observer_gyro_bias),
            accel_bias: v3(i.observer_accel_bias),
        }
    }

    pub fn landmarks(&self) -> Result<HomogeneousPointSet> {
        match &self.sensor.landmarks {
            None => Ok(HomogeneousPointSet::unit_cube()),
            Some(pts) => {
                let pts: Vec<Vec3> = pts.iter().copied().map(v3).collect();
                HomogeneousPointSet::from_points(&pts)
            }
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        self.validate()?;
        let signal = self.signal_spec();
        let truth_rotation: RotationMatrix = exp_so3(&v3(self.initial.rotation_vector));
        let scenario = Scenario {
            dt: self.sim.dt,
            t_end: self.sim.t_end,
            gravity: v3(self.sim.gravity),
            const_gains: self.const_gains(signal.omega_bound),
            signal,
            sensor: SensorSpec {
                gyro_bias: v3(self.sensor.gyro_bias),
                accel_bias: v3(self.sensor.accel_bias),
                noise: self.sensor.noise,
                landmarks: self.landmarks()?,
                seed: self.seed,
            },
            truth0: TruthState::new(truth_rotation, v3(self.initial.position), v3(self.initial.velocity)),
            observer0: self.observer0(),
            riccati: self.riccati()?,
            hold: self.sim.measurement,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn replay_options(&self) -> Result<ReplayOptions> {
        self.validate()?;
        Ok(ReplayOptions {
            gravity: v3(self.sim.gravity),
            observer0: self.observer0(),
            const_gains: self.const_gains(self.signal.omega_bound.unwrap_or(ConstGains::reference().c)),
            riccati: self.riccati()?,
            add_bias: v3(self.replay.add_bias),
            max_substep: self.replay.max_substep,
            tail_fraction: self.replay.tail_fraction,
        })
    }
}
