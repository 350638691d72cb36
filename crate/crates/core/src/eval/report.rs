use std::fmt::Write as _;
use std::io::Write;

use serde_json::{json, Value};

use super::{error_reduction, Method, MetricsSummary, OutageReport, Stats};
use crate::deadreckon::{update_position, BodyDisplacement, NedPosition};
use crate::error::Result;
use crate::geodesy::{GnssFix, WGS84_A, WGS84_F};

pub const CSV_HEADER: [&str; 9] =
    ["scenario", "method", "metric", "max", "min", "mean", "std", "total_distance_m", "n_sequences"];

const STATS: [&str; 4] = ["max", "min", "mean", "std"];

fn stat_values(s: &Stats) -> [f64; 4] {
    [s.max, s.min, s.mean, s.std]
}

/// Aligned plain-text table. An empty slice yields only the header.
pub fn render_text(summaries: &[MetricsSummary]) -> String {
    let mut out = String::new();
    let header = format!(
        "{:<9} {:<6} {:<5} {:>14} {:>14} {:>12}",
        "scenario", "metric", "stat", "physical_m", "corrected_m", "reduction_%"
    );
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{}", "-".repeat(header.len()));
    for s in summaries {
        let scenario = s.length.to_string();
        let red = error_reduction(&s.physical, &s.corrected);
        for (metric, p, c, r) in [
            ("CRSE", &s.physical.crse, &s.corrected.crse, red.crse),
            ("CTE", &s.physical.cte, &s.corrected.cte, red.cte),
        ] {
            let reds = [r.max, r.min, r.mean, r.std];
            for (k, stat) in STATS.iter().enumerate() {
                let r = reds[k].map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}"));
                let _ = writeln!(
                    out,
                    "{scenario:<9} {metric:<6} {stat:<5} {:>14.3} {:>14.3} {r:>12}",
                    stat_values(p)[k],
                    stat_values(c)[k]
                );
            }
        }
        for (k, stat) in STATS.iter().enumerate() {
            let _ = writeln!(out, "{scenario:<9} {:<6} {stat:<5} {:>14.3}", "dist", stat_values(&s.distance)[k]);
        }
        let _ = writeln!(out, "{scenario:<9} sequences {}, total distance {:.1} m", s.n_sequences, s.total_distance);
    }
    out
}

/// One row per scenario, method and metric, plus a `gnss`/`distance` row
/// describing the per-sequence distances. Floats are written in shortest
/// round-trip form.
pub fn write_csv(writer: impl Write, summaries: &[MetricsSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for s in summaries {
        let scenario = s.length.seconds().to_string();
        let mut rows: Vec<(&str, &str, &Stats)> = Vec::new();
        for m in Method::ALL {
            let ms = s.method(m);
            rows.push((m.name(), "crse", &ms.crse));
            rows.push((m.name(), "cte", &ms.cte));
        }
        rows.push(("gnss", "distance", &s.distance));
        for (method, metric, stats) in rows {
            let mut rec = vec![scenario.clone(), method.to_string(), metric.to_string()];
            rec.extend(stat_values(stats).iter().map(|v| v.to_string()));
            rec.push(s.total_distance.to_string());
            rec.push(s.n_sequences.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Offset a fix by a local north/east displacement on the tangent plane.
fn offset(origin: GnssFix, pos: NedPosition) -> [f64; 2] {
    let e2 = WGS84_F * (2.0 - WGS84_F);
    let phi = origin.lat.to_radians();
    let w = (1.0 - e2 * phi.sin().powi(2)).sqrt();
    let meridian = WGS84_A * (1.0 - e2) / w.powi(3);
    let normal = WGS84_A / w;
    let lat = origin.lat + (pos.north / meridian).to_degrees();
    let lon = origin.lon + (pos.east / (normal * phi.cos())).to_degrees();
    [lon, lat]
}

fn line(coords: Vec<[f64; 2]>, role: &str, sequence: usize, run: usize, metric: bool) -> Value {
    json!({
        "type": "Feature",
        "geometry": { "type": "LineString", "coordinates": coords },
        "properties": { "role": role, "sequence": sequence, "run": run, "metric": metric },
    })
}

/// Ground-truth, physical and corrected tracks of every outage sequence.
///
/// The truth track is the GNSS fixes. The other two integrate per-second
/// displacements along the recorded yaw on a flat tangent plane at the
/// sequence start; they are for visualization and are tagged
/// `"metric": false`.
pub fn trajectory_geojson(report: &OutageReport) -> Result<Value> {
    let mut features = Vec::new();
    for (i, (windows, preds)) in report.windows.iter().zip(&report.predictions).enumerate() {
        let Some(first) = windows.first() else { continue };
        let run = first.run;
        let origin = first.fix_start;
        let truth: Vec<[f64; 2]> =
            std::iter::once(origin).chain(windows.iter().map(|w| w.fix_end)).map(|f| [f.lon, f.lat]).collect();
        let mut physical = vec![NedPosition::ORIGIN];
        let mut corrected = vec![NedPosition::ORIGIN];
        for (w, eps) in windows.iter().zip(preds) {
            let p = *physical.last().expect("seeded");
            let c = *corrected.last().expect("seeded");
            physical.push(update_position(p, BodyDisplacement(w.x_whr), w.yaw)?);
            corrected.push(update_position(c, BodyDisplacement(w.x_whr - eps), w.yaw)?);
        }
        features.push(line(truth, "truth", i, run, true));
        features.push(line(physical.into_iter().map(|p| offset(origin, p)).collect(), "physical", i, run, false));
        features.push(line(corrected.into_iter().map(|p| offset(origin, p)).collect(), "corrected", i, run, false));
    }
    Ok(json!({
        "type": "FeatureCollection",
        "features": features,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, LabeledWindow, OutageLength, Recording, SyntheticConfig, WindowOptions};
    use crate::deadreckon::Calibration;
    use crate::eval::{evaluate_windows, tests::windows, NullModel, OracleModel};

    fn summaries() -> Vec<MetricsSummary> {
        let w = windows(600, 2, 9);
        [OutageLength::S10, OutageLength::S60]
            .into_iter()
            .map(|l| evaluate_windows(&OracleModel, &w, l).unwrap().summary)
            .collect()
    }

    #[test]
    fn empty_text_report_is_header_only() {
        let text = render_text(&[]);
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("scenario"));
    }

    #[test]
    fn text_report_lists_every_statistic() {
        let text = render_text(&summaries());
        assert_eq!(text.lines().filter(|l| l.contains("CRSE")).count(), 8);
        assert!(text.contains("60s"));
        // Oracle correction removes every CRSE, so its mean reduction is 100%.
        assert!(text.lines().any(|l| l.contains("CRSE") && l.contains("mean") && l.trim_end().ends_with("100.0")));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let sums = summaries();
        let mut buf = Vec::new();
        write_csv(&mut buf, &sums).unwrap();
        let mut r = csv::Reader::from_reader(buf.as_slice());
        assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER);
        let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 2 * 5);
        for row in rows {
            let s = sums.iter().find(|s| s.length.seconds().to_string() == row[0]).unwrap();
            let stats = match (&row[1], &row[2]) {
                ("gnss", "distance") => s.distance,
                (m, "crse") => s.method(if m == "physical" { Method::Physical } else { Method::Corrected }).crse,
                (m, "cte") => s.method(if m == "physical" { Method::Physical } else { Method::Corrected }).cte,
                other => panic!("unexpected row {other:?}"),
            };
            let parsed: Vec<f64> = (3..7).map(|k| row[k].parse().unwrap()).collect();
            assert_eq!(parsed, stat_values(&stats).to_vec());
            assert_eq!(row[7].parse::<f64>().unwrap(), s.total_distance);
            assert_eq!(row[8].parse::<usize>().unwrap(), s.n_sequences);
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), CSV_HEADER.join(","));
    }

    fn synthetic_windows() -> Vec<LabeledWindow> {
        let cfg = SyntheticConfig { tyre_bias: crate::dataset::WheelFactors::rear(1.05), ..SyntheticConfig::random_drive(200.0, 6) };
        let rec = Recording::from_records(generate_synthetic(&cfg).unwrap()).unwrap();
        crate::dataset::build_recording_windows(&rec, Calibration::default(), &WindowOptions::default()).unwrap()
    }

    #[test]
    fn geojson_is_well_formed() {
        let w = synthetic_windows();
        let rep = evaluate_windows(&NullModel, &w, OutageLength::S60).unwrap();
        let value = trajectory_geojson(&rep).unwrap();
        let parsed: geojson::GeoJson = value.to_string().parse().unwrap();
        let geojson::GeoJson::FeatureCollection(fc) = parsed else { panic!("not a collection") };
        assert_eq!(fc.features.len(), 3 * rep.sequences.len());
        for f in &fc.features {
            let Some(geojson::GeometryValue::LineString { coordinates: coords }) = f.geometry.as_ref().map(|g| &g.value) else {
                panic!("expected a line string");
            };
            assert_eq!(coords.len(), 61);
            let role = f.property("role").and_then(|v| v.as_str()).unwrap();
            assert!(["truth", "physical", "corrected"].contains(&role));
        }
    }

    #[test]
    fn oracle_track_follows_truth() {
        // With exact corrections the dead-reckoned track only deviates from
        // the fixes through the heading and flat-earth approximations.
        let w = synthetic_windows();
        let rep = evaluate_windows(&OracleModel, &w, OutageLength::S30).unwrap();
        let v = trajectory_geojson(&rep).unwrap();
        let feats = v["features"].as_array().unwrap();
        let end = |f: &Value| {
            let c = f["geometry"]["coordinates"].as_array().unwrap().last().unwrap().clone();
            GnssFix { lon: c[0].as_f64().unwrap(), lat: c[1].as_f64().unwrap() }
        };
        for triple in feats.chunks(3) {
            let truth = end(&triple[0]);
            let corrected = end(&triple[2]);
            let gap = crate::geodesy::vincenty_inverse(&truth, &corrected).unwrap();
            let dist: f64 = rep.sequences[triple[0]["properties"]["sequence"].as_u64().unwrap() as usize].distance;
            assert!(gap < 0.02 * dist.max(50.0), "gap {gap} over {dist}");
        }
    }
}
