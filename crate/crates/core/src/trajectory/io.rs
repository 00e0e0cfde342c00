//! Delimited-text segment files.
//!
//! A file is an optional block of `# key: value` metadata lines followed by a
//! comma-separated table whose header uses the dataset column names
//! (`Time`, `Longitude`, `Latitude`, `Speed`, the `_smoothed` and `_lead`
//! variants, and the supplementary accuracy columns). Unknown columns are
//! ignored, so derived columns written by this module read back cleanly.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, FixedOffset, TimeZone};

use super::{Accuracy, Fix, LongitudinalSeries, TrajectoryPoint, TrajectorySegment};
use crate::behavior::{AnnotationRecord, BehaviorLabel};
use crate::error::{Error, Result};
use crate::units::DT_NOMINAL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Field {
    Time,
    Lon,
    Lat,
    Speed,
    LonSmoothed,
    LatSmoothed,
    SpeedSmoothed,
    LeadLon,
    LeadLat,
    LeadSpeed,
    LeadLonSmoothed,
    LeadLatSmoothed,
    LeadSpeedSmoothed,
    Elevation,
    InstrumentHeight,
    Bearing,
    HorizontalAccuracy,
    VerticalAccuracy,
    Pdop,
    Hdop,
    Vdop,
}

impl Field {
    pub const ALL: [Field; 21] = [
        Field::Time,
        Field::Lon,
        Field::Lat,
        Field::Speed,
        Field::LonSmoothed,
        Field::LatSmoothed,
        Field::SpeedSmoothed,
        Field::LeadLon,
        Field::LeadLat,
        Field::LeadSpeed,
        Field::LeadLonSmoothed,
        Field::LeadLatSmoothed,
        Field::LeadSpeedSmoothed,
        Field::Elevation,
        Field::InstrumentHeight,
        Field::Bearing,
        Field::HorizontalAccuracy,
        Field::VerticalAccuracy,
        Field::Pdop,
        Field::Hdop,
        Field::Vdop,
    ];

    /// Column name used when writing.
    pub fn canonical(self) -> &'static str {
        self.default_names()[0]
    }

    fn default_names(self) -> &'static [&'static str] {
        match self {
            Field::Time => &["Time"],
            Field::Lon => &["Longitude", "Longitude_follow"],
            Field::Lat => &["Latitude", "Latitude_follow"],
            Field::Speed => &["Speed", "Speed_follow"],
            Field::LonSmoothed => &["Longitude_smoothed", "Longitude_follow_smoothed"],
            Field::LatSmoothed => &["Latitude_smoothed", "Latitude_follow_smoothed"],
            Field::SpeedSmoothed => &["Speed_smoothed", "Speed_follow_smoothed"],
            Field::LeadLon => &["Longitude_lead"],
            Field::LeadLat => &["Latitude_lead"],
            Field::LeadSpeed => &["Speed_lead"],
            Field::LeadLonSmoothed => &["Longitude_lead_smoothed"],
            Field::LeadLatSmoothed => &["Latitude_lead_smoothed"],
            Field::LeadSpeedSmoothed => &["Speed_lead_smoothed"],
            Field::Elevation => &["Elevation"],
            Field::InstrumentHeight => &["Instrument_height", "Instrument height"],
            Field::Bearing => &["Bearing"],
            Field::HorizontalAccuracy => &["Horizontal_accuracy", "Horizontal accuracy"],
            Field::VerticalAccuracy => &["Vertical_accuracy", "Vertical accuracy"],
            Field::Pdop => &["PDOP"],
            Field::Hdop => &["HDOP"],
            Field::Vdop => &["VDOP"],
        }
    }
}

/// Accepted column names per field (matched case-insensitively).
#[derive(Debug, Clone)]
pub struct Schema {
    names: BTreeMap<Field, Vec<String>>,
}

impl Default for Schema {
    fn default() -> Self {
        let names = Field::ALL
            .iter()
            .map(|&f| (f, f.default_names().iter().map(|s| s.to_string()).collect()))
            .collect();
        Schema { names }
    }
}

impl Schema {
    /// Adds `name` as the preferred column name for `field`.
    pub fn with_alias(mut self, field: Field, name: impl Into<String>) -> Self {
        self.names.entry(field).or_default().insert(0, name.into());
        self
    }

    fn resolve(&self, headers: &csv::StringRecord) -> BTreeMap<Field, usize> {
        let mut map = BTreeMap::new();
        for (field, names) in &self.names {
            let hit = names.iter().find_map(|name| {
                headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name.trim()))
            });
            if let Some(idx) = hit {
                map.insert(*field, idx);
            }
        }
        map
    }

    fn name(&self, field: Field) -> String {
        self.names
            .get(&field)
            .and_then(|v| v.first().cloned())
            .unwrap_or_else(|| field.canonical().to_string())
    }
}

/// Segment metadata not carried by the table itself. Values from a file's
/// metadata block take precedence over these defaults.
#[derive(Debug, Clone)]
pub struct SegmentMeta {
    pub id: String,
    pub behavior: Option<BehaviorLabel>,
    pub desired_speed: Option<f64>,
    pub dt_nominal: f64,
}

impl Default for SegmentMeta {
    fn default() -> Self {
        SegmentMeta { id: "segment".into(), behavior: None, desired_speed: None, dt_nominal: DT_NOMINAL }
    }
}

const META_ID: &str = "segment_id";
const META_BEHAVIOR: &str = "behavior";
const META_DESIRED: &str = "desired_speed_mps";
const META_DT: &str = "dt_nominal_s";

/// Parses an ISO 8601 timestamp with zone offset into Unix seconds and the
/// offset in seconds.
pub fn parse_time(s: &str) -> Option<(f64, i32)> {
    let s = s.trim();
    let dt = DateTime::parse_from_rfc3339(s).ok().or_else(|| {
        [
            "%Y-%m-%dT%H:%M:%S%.f%:z",
            "%Y-%m-%d %H:%M:%S%.f%:z",
            "%Y-%m-%dT%H:%M:%S%.f%z",
            "%Y-%m-%d %H:%M:%S%.f%z",
        ]
        .iter()
        .find_map(|fmt| DateTime::parse_from_str(s, fmt).ok())
    })?;
    Some((to_seconds(dt.timestamp(), dt.timestamp_subsec_nanos()), dt.offset().local_minus_utc()))
}

fn to_seconds(secs: i64, nanos: u32) -> f64 {
    secs as f64 + nanos as f64 * 1e-9
}

/// Formats Unix seconds as ISO 8601 in the given offset, with the fewest
/// fractional digits that parse back to the same `f64`.
pub fn format_time(t: f64, utc_offset_s: i32) -> String {
    let base = t.floor();
    let frac_ns = (t - base) * 1e9;
    let mut chosen = None;
    for digits in 0..=9u32 {
        let unit = 10u64.pow(9 - digits) as f64;
        let mut secs = base as i64;
        let mut nanos = ((frac_ns / unit).round() * unit) as u64;
        if nanos >= 1_000_000_000 {
            secs += 1;
            nanos -= 1_000_000_000;
        }
        if to_seconds(secs, nanos as u32) == t || digits == 9 {
            chosen = Some((secs, nanos as u32, digits));
            break;
        }
    }
    let (secs, nanos, digits) = chosen.expect("loop always chooses");
    let offset = FixedOffset::east_opt(utc_offset_s).unwrap_or(FixedOffset::east_opt(0).unwrap());
    let dt = offset.timestamp_opt(secs, nanos).single().expect("valid timestamp");
    let mut out = dt.format("%Y-%m-%dT%H:%M:%S").to_string();
    if digits > 0 {
        let frac = format!("{nanos:09}");
        out.push('.');
        out.push_str(&frac[..digits as usize]);
    }
    out.push_str(&dt.format("%:z").to_string());
    out
}

/// Reads a segment table with its optional metadata block.
pub fn parse_segment<R: Read>(
    mut raw: R,
    schema: &Schema,
    defaults: &SegmentMeta,
) -> Result<TrajectorySegment> {
    let mut text = String::new();
    raw.read_to_string(&mut text)?;

    let mut meta = BTreeMap::new();
    let mut body_start = 0;
    let mut meta_lines = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once(':') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        } else if !trimmed.is_empty() {
            break;
        }
        body_start += line.len();
        meta_lines += 1;
    }

    let id = meta.get(META_ID).cloned().unwrap_or_else(|| defaults.id.clone());
    let behavior = match meta.get(META_BEHAVIOR) {
        Some(b) => b.parse()?,
        None => defaults.behavior.ok_or_else(|| {
            Error::invalid(format!("segment `{id}` has no behavior label (metadata or default)"))
        })?,
    };
    let parse_meta_f64 = |key: &str| -> Result<Option<f64>> {
        meta.get(key)
            .map(|v| v.parse::<f64>().map_err(|_| Error::invalid(format!("bad `{key}`: {v}"))))
            .transpose()
    };
    let desired_speed = parse_meta_f64(META_DESIRED)?.or(defaults.desired_speed);
    let dt_nominal = parse_meta_f64(META_DT)?.unwrap_or(defaults.dt_nominal);

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(&text.as_bytes()[body_start..]);
    let headers = reader.headers()?.clone();
    let cols = schema.resolve(&headers);
    for f in [Field::Time, Field::Lon, Field::Lat, Field::Speed] {
        if !cols.contains_key(&f) {
            return Err(Error::MissingColumn(schema.name(f)));
        }
    }
    let groups = [
        [Field::LonSmoothed, Field::LatSmoothed, Field::SpeedSmoothed],
        [Field::LeadLon, Field::LeadLat, Field::LeadSpeed],
        [Field::LeadLonSmoothed, Field::LeadLatSmoothed, Field::LeadSpeedSmoothed],
    ];
    for g in &groups {
        if g.iter().any(|f| cols.contains_key(f)) {
            if let Some(missing) = g.iter().find(|f| !cols.contains_key(f)) {
                return Err(Error::MissingColumn(schema.name(*missing)));
            }
        }
    }

    let mut points = Vec::new();
    let mut offset = 0;
    for (row, record) in reader.records().enumerate() {
        // header is line 1 of the table
        let line = meta_lines + row + 2;
        let record = record?;
        let cell = |f: Field| cols.get(&f).and_then(|&i| record.get(i)).unwrap_or("");
        let num = |f: Field| -> Result<Option<f64>> {
            let s = cell(f);
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>().map(Some).map_err(|_| Error::Row {
                line,
                message: format!("column `{}`: cannot parse `{s}` as a number", schema.name(f)),
            })
        };
        let required = |f: Field| -> Result<f64> {
            num(f)?.ok_or_else(|| Error::Row {
                line,
                message: format!("column `{}` is empty", schema.name(f)),
            })
        };
        let group = |g: &[Field; 3]| -> Result<Option<Fix>> {
            match (num(g[0])?, num(g[1])?, num(g[2])?) {
                (Some(lon), Some(lat), Some(speed)) => Ok(Some(Fix { lat, lon, speed })),
                (None, None, None) => Ok(None),
                _ => Err(Error::Row {
                    line,
                    message: format!("partially filled `{}` group", schema.name(g[0])),
                }),
            }
        };

        let (t, off) = parse_time(cell(Field::Time)).ok_or_else(|| Error::Row {
            line,
            message: format!("cannot parse time `{}`", cell(Field::Time)),
        })?;
        if points.is_empty() {
            offset = off;
        }
        if let Some(prev) = points.last().map(|p: &TrajectoryPoint| p.t) {
            if !(t > prev) {
                return Err(Error::NonMonotoneTime { line, prev, t });
            }
        }
        let raw = Fix {
            lat: required(Field::Lat)?,
            lon: required(Field::Lon)?,
            speed: required(Field::Speed)?,
        };
        let accuracy = Accuracy {
            horizontal_accuracy: num(Field::HorizontalAccuracy)?,
            vertical_accuracy: num(Field::VerticalAccuracy)?,
            pdop: num(Field::Pdop)?,
            hdop: num(Field::Hdop)?,
            vdop: num(Field::Vdop)?,
            elevation: num(Field::Elevation)?,
            bearing: num(Field::Bearing)?,
            instrument_height: num(Field::InstrumentHeight)?,
        };
        points.push(TrajectoryPoint {
            t,
            raw,
            smoothed: group(&groups[0])?,
            lead: group(&groups[1])?,
            lead_smoothed: group(&groups[2])?,
            accuracy,
        });
    }

    let seg = TrajectorySegment {
        id,
        points,
        behavior,
        desired_speed,
        dt_nominal,
        annotation: None,
        utc_offset_s: offset,
    };
    seg.check().map_err(|e| e.in_segment(&seg.id))?;
    Ok(seg)
}

/// Reads `path`, plus a sibling `<stem>.ann.json` annotation when present.
pub fn read_segment_file(
    path: &Path,
    schema: &Schema,
    defaults: &SegmentMeta,
) -> Result<TrajectorySegment> {
    let file = std::fs::File::open(path)?;
    let mut defaults = defaults.clone();
    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
        defaults.id = stem.to_string();
    }
    let mut seg = parse_segment(std::io::BufReader::new(file), schema, &defaults)?;
    let ann_path = path.with_extension("ann.json");
    if ann_path.exists() {
        let text = std::fs::read_to_string(&ann_path)?;
        seg.annotation =
            Some(AnnotationRecord::from_json(&text).map_err(|e| e.in_segment(&seg.id))?);
    }
    Ok(seg)
}

/// Reads every `*.csv` file of `dir` in file-name order.
pub fn read_segment_dir(
    dir: &Path,
    schema: &Schema,
    defaults: &SegmentMeta,
) -> Result<Vec<TrajectorySegment>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_segment_file(p, schema, defaults)).collect()
}

/// Writes a segment table. `derived`, when given, must be the projection of
/// `seg` and appends `Position_m`, `Accel_mps2`, `Jerk_mps3` and `Spacing_m`.
/// `extra_meta` lines are echoed into the metadata block.
pub fn write_segment<W: Write>(
    w: W,
    seg: &TrajectorySegment,
    derived: Option<&LongitudinalSeries>,
    extra_meta: &[(String, String)],
) -> Result<()> {
    if let Some(d) = derived {
        if d.len() != seg.len() {
            return Err(Error::invalid("derived series length differs from segment"));
        }
    }
    let mut w = std::io::BufWriter::new(w);
    writeln!(w, "# {META_ID}: {}", seg.id)?;
    writeln!(w, "# {META_BEHAVIOR}: {}", seg.behavior)?;
    if let Some(v) = seg.desired_speed {
        writeln!(w, "# {META_DESIRED}: {v}")?;
    }
    writeln!(w, "# {META_DT}: {}", seg.dt_nominal)?;
    for (k, v) in extra_meta {
        writeln!(w, "# {k}: {v}")?;
    }

    let any = |f: &dyn Fn(&TrajectoryPoint) -> bool| seg.points.iter().any(f);
    let has_smoothed = any(&|p| p.smoothed.is_some());
    let has_lead = any(&|p| p.lead.is_some());
    let has_lead_smoothed = any(&|p| p.lead_smoothed.is_some());
    type Getter = fn(&Accuracy) -> Option<f64>;
    let acc_cols: Vec<(Field, Getter)> = vec![
        (Field::Elevation, |a| a.elevation),
        (Field::InstrumentHeight, |a| a.instrument_height),
        (Field::Bearing, |a| a.bearing),
        (Field::HorizontalAccuracy, |a| a.horizontal_accuracy),
        (Field::VerticalAccuracy, |a| a.vertical_accuracy),
        (Field::Pdop, |a| a.pdop),
        (Field::Hdop, |a| a.hdop),
        (Field::Vdop, |a| a.vdop),
    ];
    let acc_cols: Vec<_> =
        acc_cols.into_iter().filter(|(_, g)| seg.points.iter().any(|p| g(&p.accuracy).is_some())).collect();

    let mut csv_w = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = vec!["Time", "Longitude", "Latitude", "Speed"];
    if has_smoothed {
        header.extend(["Longitude_smoothed", "Latitude_smoothed", "Speed_smoothed"]);
    }
    if has_lead {
        header.extend(["Longitude_lead", "Latitude_lead", "Speed_lead"]);
    }
    if has_lead_smoothed {
        header.extend(["Longitude_lead_smoothed", "Latitude_lead_smoothed", "Speed_lead_smoothed"]);
    }
    header.extend(acc_cols.iter().map(|(f, _)| f.canonical()));
    if let Some(d) = derived {
        header.extend(["Position_m", "Accel_mps2", "Jerk_mps3"]);
        if d.spacing.is_some() {
            header.push("Spacing_m");
        }
    }
    csv_w.write_record(&header)?;

    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let fix_cells = |f: Option<Fix>| -> [String; 3] {
        match f {
            Some(f) => [f.lon.to_string(), f.lat.to_string(), f.speed.to_string()],
            None => Default::default(),
        }
    };
    for (i, p) in seg.points.iter().enumerate() {
        let mut row = vec![format_time(p.t, seg.utc_offset_s)];
        row.extend(fix_cells(Some(p.raw)));
        if has_smoothed {
            row.extend(fix_cells(p.smoothed));
        }
        if has_lead {
            row.extend(fix_cells(p.lead));
        }
        if has_lead_smoothed {
            row.extend(fix_cells(p.lead_smoothed));
        }
        row.extend(acc_cols.iter().map(|(_, g)| opt(g(&p.accuracy))));
        if let Some(d) = derived {
            row.push(d.position[i].to_string());
            row.push(d.accel[i].to_string());
            row.push(d.jerk[i].to_string());
            if let Some(s) = &d.spacing {
                row.push(s[i].to_string());
            }
        }
        csv_w.write_record(&row)?;
    }
    csv_w.flush()?;
    Ok(())
}
