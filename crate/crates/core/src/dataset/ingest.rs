use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Recording, WheelRecord};
use crate::deadreckon::WheelSpeeds;
use crate::error::{Error, Result};
use crate::geodesy::GnssFix;

/// Unit of the wheel-speed columns in a CSV file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum WheelUnit {
    #[default]
    #[serde(rename = "rad/s")]
    RadPerSec,
    #[serde(rename = "km/h")]
    KmPerHour,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum AngleUnit {
    #[default]
    #[serde(rename = "rad")]
    Rad,
    #[serde(rename = "deg")]
    Deg,
}

/// CSV column name for every record field. Unlisted fields keep their
/// default names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub timestamp: String,
    pub wheel_fl: String,
    pub wheel_fr: String,
    pub wheel_rl: String,
    pub wheel_rr: String,
    pub lat: String,
    pub lon: String,
    pub yaw: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            timestamp: "t".into(),
            wheel_fl: "wheel_fl".into(),
            wheel_fr: "wheel_fr".into(),
            wheel_rl: "wheel_rl".into(),
            wheel_rr: "wheel_rr".into(),
            lat: "lat".into(),
            lon: "lon".into(),
            yaw: "yaw".into(),
        }
    }
}

impl ColumnMap {
    fn in_order(&self) -> [&str; 8] {
        [
            &self.timestamp,
            &self.wheel_fl,
            &self.wheel_fr,
            &self.wheel_rl,
            &self.wheel_rr,
            &self.lat,
            &self.lon,
            &self.yaw,
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    #[serde(default)]
    pub wheel: WheelUnit,
    #[serde(default)]
    pub yaw: AngleUnit,
    /// Rolling radius used to convert linear wheel speeds to rad/s.
    /// Required when `wheel = "km/h"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wheel_radius_m: Option<f64>,
}

/// Column mapping and units of a CSV recording, loaded from a TOML file:
///
/// ```toml
/// [columns]
/// timestamp = "time_s"
/// wheel_fl = "ws_fl"
/// # ...
///
/// [units]
/// wheel = "km/h"
/// yaw = "deg"
/// wheel_radius_m = 0.3
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    #[serde(default)]
    pub columns: ColumnMap,
    #[serde(default)]
    pub units: Units,
}

impl Schema {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Schema::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.units.wheel, self.units.wheel_radius_m) {
            (WheelUnit::KmPerHour, None) => {
                Err(Error::Schema("wheel speeds in km/h need `units.wheel_radius_m` to convert to rad/s".into()))
            }
            (_, Some(r)) if !(r > 0.0 && r.is_finite()) => {
                Err(Error::Schema(format!("wheel_radius_m must be positive, got {r}")))
            }
            _ => Ok(()),
        }
    }

    fn wheel_to_rad_s(&self, v: f64) -> f64 {
        match self.units.wheel {
            WheelUnit::RadPerSec => v,
            WheelUnit::KmPerHour => v / 3.6 / self.units.wheel_radius_m.unwrap_or(1.0),
        }
    }

    fn wheel_from_rad_s(&self, w: f64) -> f64 {
        match self.units.wheel {
            WheelUnit::RadPerSec => w,
            WheelUnit::KmPerHour => w * self.units.wheel_radius_m.unwrap_or(1.0) * 3.6,
        }
    }

    fn yaw_to_rad(&self, v: f64) -> f64 {
        match self.units.yaw {
            AngleUnit::Rad => v,
            AngleUnit::Deg => v.to_radians(),
        }
    }

    fn yaw_from_rad(&self, v: f64) -> f64 {
        match self.units.yaw {
            AngleUnit::Rad => v,
            AngleUnit::Deg => v.to_degrees(),
        }
    }
}

/// Read a CSV recording. Timestamps must increase strictly in file order.
pub fn ingest_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Recording> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_csv(file, schema).map_err(|e| match e {
        Error::DataIntegrity(msg) => Error::DataIntegrity(format!("{}: {msg}", path.display())),
        Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<Recording> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 8];
    for (slot, name) in idx.iter_mut().zip(schema.columns.in_order()) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))?;
    }

    let mut records = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (row, result) in rdr.records().enumerate() {
        let line = result?;
        let mut vals = [0.0f64; 8];
        for (k, (v, &col)) in vals.iter_mut().zip(&idx).enumerate() {
            let field = line.get(col).unwrap_or("");
            *v = field.parse().map_err(|_| {
                Error::DataIntegrity(format!(
                    "row {}: column `{}` is not a number: {field:?}",
                    row + 1,
                    schema.columns.in_order()[k]
                ))
            })?;
        }
        let [t, fl, fr, rl, rr, lat, lon, yaw] = vals;
        if !(t > last_t) {
            return Err(Error::DataIntegrity(format!("row {}: timestamp {t} does not increase", row + 1)));
        }
        last_t = t;
        let rec = WheelRecord {
            t,
            wheels: WheelSpeeds::new(
                schema.wheel_to_rad_s(fl),
                schema.wheel_to_rad_s(fr),
                schema.wheel_to_rad_s(rl),
                schema.wheel_to_rad_s(rr),
            ),
            fix: GnssFix { lat, lon },
            yaw: schema.yaw_to_rad(yaw),
        };
        rec.validate().map_err(|e| Error::DataIntegrity(format!("row {}: {e}", row + 1)))?;
        records.push(rec);
    }
    Recording::from_records(records)
}

/// Write records using the schema's column names and units.
pub fn write_csv<W: Write>(writer: W, records: &[WheelRecord], schema: &Schema) -> Result<()> {
    schema.validate()?;
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(schema.columns.in_order())?;
    for r in records {
        let w = &r.wheels;
        wtr.serialize((
            r.t,
            schema.wheel_from_rad_s(w.fl),
            schema.wheel_from_rad_s(w.fr),
            schema.wheel_from_rad_s(w.rl),
            schema.wheel_from_rad_s(w.rr),
            r.fix.lat,
            r.fix.lon,
            schema.yaw_from_rad(r.yaw),
        ))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn export_csv(path: impl AsRef<Path>, records: &[WheelRecord], schema: &Schema) -> Result<()> {
    write_csv(File::create(path)?, records, schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize, start_t: f64) -> String {
        (0..n)
            .map(|i| {
                let t = start_t + i as f64 / 10.0;
                format!("{t},{},{},{},{},52.4,-1.5,0.1\n", 10.0 + i as f64, 10.5, 11.0, 11.5)
            })
            .collect()
    }

    const HEADER: &str = "t,wheel_fl,wheel_fr,wheel_rl,wheel_rr,lat,lon,yaw\n";

    #[test]
    fn well_formed_file() {
        let text = format!("{HEADER}{}", rows(100, 0.0));
        let rec = read_csv(text.as_bytes(), &Schema::default()).unwrap();
        assert_eq!(rec.len(), 100);
        assert_eq!(rec.segment_count(), 1);
        assert_eq!(rec.records()[3].wheels.fl, 13.0);
    }

    #[test]
    fn two_second_gap_makes_two_segments() {
        let text = format!("{HEADER}{}{}", rows(50, 0.0), rows(50, 6.9));
        let rec = read_csv(text.as_bytes(), &Schema::default()).unwrap();
        assert_eq!(rec.len(), 100);
        assert_eq!(rec.segment_count(), 2);
    }

    #[test]
    fn missing_column_is_reported() {
        let text = "t,wheel_fl,wheel_fr,wheel_rl,lat,lon,yaw\n0,1,1,1,52,-1,0\n";
        match read_csv(text.as_bytes(), &Schema::default()) {
            Err(Error::Schema(msg)) => assert!(msg.contains("wheel_rr")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_monotone_file_is_rejected() {
        let text = format!("{HEADER}0.0,1,1,1,1,52,-1,0\n0.2,1,1,1,1,52,-1,0\n0.1,1,1,1,1,52,-1,0\n");
        assert!(matches!(read_csv(text.as_bytes(), &Schema::default()), Err(Error::DataIntegrity(_))));
    }

    #[test]
    fn bad_number_is_reported() {
        let text = format!("{HEADER}0.0,1,x,1,1,52,-1,0\n");
        assert!(matches!(read_csv(text.as_bytes(), &Schema::default()), Err(Error::DataIntegrity(_))));
    }

    #[test]
    fn km_h_without_radius_is_a_unit_mismatch() {
        let toml = "[units]\nwheel = \"km/h\"\n";
        assert!(matches!(Schema::from_toml_str(toml), Err(Error::Schema(_))));
        assert!(Schema::from_toml_str("[units]\nwheel = \"mph\"\n").is_err());
    }

    #[test]
    fn renamed_columns_and_converted_units() {
        let toml = r#"
            [columns]
            timestamp = "time"
            wheel_fl = "FL"
            wheel_fr = "FR"
            wheel_rl = "RL"
            wheel_rr = "RR"
            lat = "latitude"
            lon = "longitude"
            yaw = "heading"

            [units]
            wheel = "km/h"
            yaw = "deg"
            wheel_radius_m = 0.3
        "#;
        let schema = Schema::from_toml_str(toml).unwrap();
        let text = "heading,time,FL,FR,RL,RR,latitude,longitude\n90,0.0,36,36,72,108,52.4,-1.5\n";
        let rec = read_csv(text.as_bytes(), &schema).unwrap();
        let r = rec.records()[0];
        assert!((r.wheels.fl - 10.0 / 0.3).abs() < 1e-12);
        assert!((r.wheels.rr - 30.0 / 0.3).abs() < 1e-12);
        assert!((r.yaw - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn km_h_round_trip() {
        let schema = Schema {
            units: Units { wheel: WheelUnit::KmPerHour, yaw: AngleUnit::Deg, wheel_radius_m: Some(0.31) },
            ..Schema::default()
        };
        let text = format!("{HEADER}{}", rows(40, 0.0));
        let rec = read_csv(text.as_bytes(), &schema).unwrap();
        let mut out = Vec::new();
        write_csv(&mut out, rec.records(), &schema).unwrap();
        let back = read_csv(out.as_slice(), &Schema::default()).unwrap();
        // Exported file is in km/h and degrees: compare raw numbers with the input.
        let original = read_csv(text.as_bytes(), &Schema::default()).unwrap();
        for (a, b) in original.records().iter().zip(back.records()) {
            assert_eq!(a.t, b.t);
            for (x, y) in a.wheels.as_array().iter().zip(b.wheels.as_array()) {
                assert!((x - y).abs() < 1e-9);
            }
            assert!((a.yaw - b.yaw).abs() < 1e-9);
            assert_eq!(a.fix, b.fix);
        }
    }
}
