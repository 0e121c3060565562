//! CSV formats: sensor logs, simulation traces and replay traces.
//!
//! Floats are written with 17 significant digits so values survive a
//! write/read cycle bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::diagnostics::ErrorRecord;
use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};
use crate::observer::ObserverState;
use crate::replay::{ReplayRecord, SensorLogRow};
use crate::sim::StepRecord;
use crate::dynamics::{MeasurementFrame, TruthState};

pub const SENSOR_LOG_HEADER: [&str; 19] = [
    "t", "r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32", "r33", "px", "py", "pz", "wx", "wy", "wz", "ax",
    "ay", "az",
];

const ERROR_COLUMNS: [&str; 7] = ["norm_E_R", "norm_e_p", "norm_e_v", "norm_e_w", "norm_e_a", "V1", "V2"];

fn mat_columns(prefix: &str) -> impl Iterator<Item = String> + '_ {
    (1..=3).flat_map(move |i| (1..=3).map(move |j| format!("{prefix}{i}{j}")))
}

fn vec_columns(prefix: &str) -> impl Iterator<Item = String> + '_ {
    ["x", "y", "z"].into_iter().map(move |a| format!("{prefix}{a}"))
}

fn measurement_columns() -> Vec<String> {
    mat_columns("rm")
        .chain(vec_columns("pm"))
        .chain(vec_columns("wm"))
        .chain(vec_columns("am"))
        .collect()
}

fn estimate_columns() -> Vec<String> {
    mat_columns("rb")
        .chain(vec_columns("pb"))
        .chain(vec_columns("vb"))
        .chain(vec_columns("bw"))
        .chain(vec_columns("ba"))
        .collect()
}

/// `t`, truth (`r11..r33, px.., vx..`), measurement (`rm11.., pm.., wm.., am..`),
/// estimate (`rb11.., pb.., vb.., bw.., ba..`), then the error columns.
pub fn sim_trace_header() -> Vec<String> {
    std::iter::once("t".to_string())
        .chain(mat_columns("r"))
        .chain(vec_columns("p"))
        .chain(vec_columns("v"))
        .chain(measurement_columns())
        .chain(estimate_columns())
        .chain(ERROR_COLUMNS.iter().map(|s| s.to_string()))
        .collect()
}

/// `t`, measurement columns, estimate columns.
pub fn replay_trace_header() -> Vec<String> {
    std::iter::once("t".to_string())
        .chain(measurement_columns())
        .chain(estimate_columns())
        .collect()
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

struct Row(Vec<String>);

impl Row {
    fn new() -> Self {
        Self(Vec::with_capacity(64))
    }

    fn num(&mut self, x: f64) -> &mut Self {
        self.0.push(format_float(x));
        self
    }

    fn mat(&mut self, m: &Mat3) -> &mut Self {
        for i in 0..3 {
            for j in 0..3 {
                self.num(m[(i, j)]);
            }
        }
        self
    }

    fn vec(&mut self, v: &Vec3) -> &mut Self {
        v.iter().for_each(|&x| {
            self.num(x);
        });
        self
    }

    fn truth(&mut self, s: &TruthState) -> &mut Self {
        self.mat(s.rotation.matrix()).vec(&s.position).vec(&s.velocity)
    }

    fn measurement(&mut self, m: &MeasurementFrame) -> &mut Self {
        self.mat(m.rotation.matrix())
            .vec(&m.position)
            .vec(&m.angular_velocity)
            .vec(&m.acceleration)
    }

    fn estimate(&mut self, o: &ObserverState) -> &mut Self {
        self.mat(&o.rotation)
            .vec(&o.position)
            .vec(&o.velocity)
            .vec(&o.gyro_bias)
            .vec(&o.accel_bias)
    }

    fn errors(&mut self, e: &ErrorRecord) -> &mut Self {
        for x in e.norms() {
            self.num(x);
        }
        self.num(e.v1);
        self.0.push(e.v2.map(format_float).unwrap_or_default());
        self
    }
}

pub struct SimTraceWriter<W: Write>(csv::Writer<W>);

impl<W: Write> SimTraceWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(sim_trace_header())?;
        Ok(Self(inner))
    }

    pub fn write(&mut self, r: &StepRecord) -> Result<()> {
        let mut row = Row::new();
        row.num(r.t)
            .truth(&r.truth)
            .measurement(&r.measurement.start)
            .estimate(&r.estimate)
            .errors(&r.errors);
        self.0.write_record(&row.0)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.0.flush()?;
        self.0.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

pub struct ReplayTraceWriter<W: Write>(csv::Writer<W>);

impl<W: Write> ReplayTraceWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(replay_trace_header())?;
        Ok(Self(inner))
    }

    pub fn write(&mut self, r: &ReplayRecord) -> Result<()> {
        let mut row = Row::new();
        row.num(r.t).measurement(&r.measurement).estimate(&r.estimate);
        self.0.write_record(&row.0)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.0.flush()?;
        self.0.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

pub struct SensorLogWriter<W: Write>(csv::Writer<W>);

impl<W: Write> SensorLogWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(SENSOR_LOG_HEADER)?;
        Ok(Self(inner))
    }

    pub fn write(&mut self, r: &SensorLogRow) -> Result<()> {
        let mut row = Row::new();
        row.num(r.t)
            .mat(&r.rotation)
            .vec(&r.position)
            .vec(&r.angular_velocity)
            .vec(&r.acceleration);
        self.0.write_record(&row.0)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.0.flush()?;
        self.0.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

pub fn write_sensor_log<'a, W: Write>(w: W, rows: impl IntoIterator<Item = &'a SensorLogRow>) -> Result<W> {
    let mut writer = SensorLogWriter::new(w)?;
    for r in rows {
        writer.write(r)?;
    }
    writer.finish()
}

/// Reads a sensor log. Also accepts a simulation trace, in which case its
/// measurement columns are used.
pub fn read_sensor_log<R: Read>(r: R) -> Result<Vec<SensorLogRow>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let columns: Vec<usize> = if header.iter().map(String::as_str).eq(SENSOR_LOG_HEADER) {
        (0..SENSOR_LOG_HEADER.len()).collect()
    } else {
        let wanted = std::iter::once("t".to_string()).chain(measurement_columns());
        wanted
            .map(|name| {
                header
                    .iter()
                    .position(|h| *h == name)
                    .ok_or_else(|| Error::MalformedLog(format!("missing column `{name}`; expected header {}", SENSOR_LOG_HEADER.join(","))))
            })
            .collect::<Result<_>>()?
    };
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let mut vals = [0.0; 19];
        for (k, &c) in columns.iter().enumerate() {
            let field = record
                .get(c)
                .ok_or_else(|| Error::MalformedLog(format!("row {line}: missing field {c}")))?;
            vals[k] = field
                .parse()
                .map_err(|_| Error::MalformedLog(format!("row {line}: cannot parse `{field}`")))?;
        }
        rows.push(SensorLogRow {
            t: vals[0],
            rotation: Mat3::from_row_slice(&vals[1..10]),
            position: Vec3::from_row_slice(&vals[10..13]),
            angular_velocity: Vec3::from_row_slice(&vals[13..16]),
            acceleration: Vec3::from_row_slice(&vals[16..19]),
        });
    }
    Ok(rows)
}

pub fn read_sensor_log_path(path: &Path) -> Result<Vec<SensorLogRow>> {
    let f = std::fs::File::open(path)?;
    read_sensor_log(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sensor_log_header_is_exact() {
        assert_eq!(SENSOR_LOG_HEADER.join(","), "t,r11,r12,r13,r21,r22,r23,r31,r32,r33,px,py,pz,wx,wy,wz,ax,ay,az");
    }

    #[test]
    fn trace_headers() {
        let h = sim_trace_header();
        assert_eq!(h.len(), 1 + 15 + 18 + 21 + 7);
        assert_eq!(h[1], "r11");
        assert_eq!(h[16], "rm11");
        assert_eq!(h.last().unwrap(), "V2");
        assert_eq!(replay_trace_header().len(), 1 + 18 + 21);
    }

    #[test]
    fn malformed_logs() {
        let bad_header = "t,x\n0,1\n";
        assert!(matches!(read_sensor_log(bad_header.as_bytes()), Err(Error::MalformedLog(_))));
        let bad_value = format!("{}\n0,1,0,0,0,1,0,0,0,1,0,0,0,0,0,0,0,0,abc\n", SENSOR_LOG_HEADER.join(","));
        assert!(matches!(read_sensor_log(bad_value.as_bytes()), Err(Error::MalformedLog(_))));
        let empty = format!("{}\n", SENSOR_LOG_HEADER.join(","));
        assert!(read_sensor_log(empty.as_bytes()).unwrap().is_empty());
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6f64..1e6, -1e-6f64..1e-6, Just(0.0), Just(-0.0)]
    }

    proptest! {
        #[test]
        fn sensor_log_roundtrip_is_bit_exact(vals in prop::collection::vec(finite(), 19 * 3)) {
            let rows: Vec<SensorLogRow> = vals.chunks(19).map(|v| SensorLogRow {
                t: v[0],
                rotation: Mat3::from_row_slice(&v[1..10]),
                position: Vec3::from_row_slice(&v[10..13]),
                angular_velocity: Vec3::from_row_slice(&v[13..16]),
                acceleration: Vec3::from_row_slice(&v[16..19]),
            }).collect();
            let buf = write_sensor_log(Vec::new(), &rows).unwrap();
            let back = read_sensor_log(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), rows.len());
            for (a, b) in rows.iter().zip(&back) {
                prop_assert_eq!(a.t.to_bits(), b.t.to_bits());
                for (x, y) in a.rotation.iter().zip(b.rotation.iter()) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
                prop_assert_eq!(a.acceleration, b.acceleration);
            }
        }
    }
}
