//! Trial CSV format.
//!
//! ```text
//! # trial_id=7
//! # label=G_R
//! # ball_start=0,0,0
//! # place_L=-0.4,0.4,0        (likewise place_M, place_R, face_*, handover_*)
//! # stream=hand_pos rate=120 dim=3
//! 0.000000,0,0,0
//! ...
//! ```
//!
//! Header lines are `# key=value`; each stream starts with a
//! `# stream=<name> rate=<Hz> dim=<d>` line (optionally `offset=<s>`) followed
//! by `t,v1,...,vd` rows. Times are written with at least six decimals and
//! values with the shortest representation that parses back to the same f64.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{
    ActionLabel, DatasetError, Point3, SceneGeometry, Stream, TimedSample, TrialEvents,
    TrialRecord,
};
use crate::gaze::GazePattern;

const DIRS: [&str; 3] = ["L", "M", "R"];
const EVENT_KEYS: [&str; 4] = [
    "event_gaze_shift",
    "event_head_settle",
    "event_arm_onset",
    "event_arm_end",
];

/// Shortest round-trip decimal, padded to at least six fractional digits.
pub fn fmt_time(t: f64) -> String {
    let mut s = format!("{t}");
    match s.find('.') {
        Some(dot) => {
            let decimals = s.len() - dot - 1;
            s.extend(std::iter::repeat_n('0', 6usize.saturating_sub(decimals)));
        }
        None => s.push_str(".000000"),
    }
    s
}

fn fmt_point(p: &Point3) -> String {
    format!("{},{},{}", p[0], p[1], p[2])
}

pub fn serialize_trial(trial: &TrialRecord) -> String {
    let mut out = String::new();
    let scene = &trial.scene;
    let _ = writeln!(out, "# trial_id={}", trial.trial_id);
    let _ = writeln!(out, "# label={}", trial.label);
    let _ = writeln!(out, "# ball_start={}", fmt_point(&scene.ball_start));
    for (prefix, group) in [
        ("place", &scene.place_markers),
        ("face", &scene.partner_faces),
        ("handover", &scene.handover_points),
    ] {
        for (d, p) in DIRS.iter().zip(group.iter()) {
            let _ = writeln!(out, "# {prefix}_{d}={}", fmt_point(p));
        }
    }
    let _ = writeln!(out, "# actor_eye={}", fmt_point(&scene.actor_eye));
    if let Some(p) = trial.gaze_pattern {
        let _ = writeln!(out, "# gaze_pattern={}", p.name());
    }
    if let Some(ev) = trial.events {
        let vals = [ev.gaze_shift, ev.head_settle, ev.arm_onset, ev.arm_end];
        for (k, v) in EVENT_KEYS.iter().zip(vals) {
            let _ = writeln!(out, "# {k}={}", fmt_time(v));
        }
    }
    for stream in trial.streams.values() {
        write_stream_section(&mut out, stream);
    }
    out
}

/// Appends one `# stream=...` section.
pub fn write_stream_section(out: &mut String, stream: &Stream) {
    let _ = write!(
        out,
        "# stream={} rate={} dim={}",
        stream.name, stream.nominal_rate, stream.dim
    );
    if stream.clock_offset != 0.0 {
        let _ = write!(out, " offset={}", stream.clock_offset);
    }
    out.push('\n');
    for s in &stream.samples {
        out.push_str(&fmt_time(s.t));
        for v in &s.value {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
}

fn schema(line: usize, msg: impl Into<String>) -> DatasetError {
    DatasetError::Schema {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(line: usize, s: &str) -> Result<f64, DatasetError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| schema(line, format!("invalid number '{}'", s.trim())))
}

fn parse_point(line: usize, s: &str) -> Result<Point3, DatasetError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(schema(line, format!("expected x,y,z triple, got '{s}'")));
    }
    Ok([
        parse_f64(line, parts[0])?,
        parse_f64(line, parts[1])?,
        parse_f64(line, parts[2])?,
    ])
}

struct StreamHeader {
    name: String,
    rate: f64,
    dim: usize,
    offset: f64,
}

fn parse_stream_header(line: usize, body: &str) -> Result<StreamHeader, DatasetError> {
    let mut name = None;
    let mut rate = None;
    let mut dim = None;
    let mut offset = 0.0;
    for tok in body.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| schema(line, format!("malformed stream token '{tok}'")))?;
        match k {
            "stream" => name = Some(v.to_string()),
            "rate" => rate = Some(parse_f64(line, v)?),
            "dim" => {
                dim = Some(
                    v.parse::<usize>()
                        .map_err(|_| schema(line, format!("invalid dim '{v}'")))?,
                )
            }
            "offset" => offset = parse_f64(line, v)?,
            other => return Err(schema(line, format!("unknown stream key '{other}'"))),
        }
    }
    let name = name.filter(|n| !n.is_empty()).ok_or_else(|| schema(line, "stream name missing"))?;
    let rate = rate.ok_or_else(|| schema(line, "stream rate missing"))?;
    let dim = dim.ok_or_else(|| schema(line, "stream dim missing"))?;
    if !(rate > 0.0) || dim == 0 {
        return Err(schema(line, "stream rate and dim must be positive"));
    }
    Ok(StreamHeader {
        name,
        rate,
        dim,
        offset,
    })
}

/// Parses one trial file. Stream timestamps must be non-negative and strictly
/// increasing; the first offending row is reported with its stream name.
pub fn parse_trial(content: &str) -> Result<TrialRecord, DatasetError> {
    let mut header: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut streams: BTreeMap<String, Stream> = BTreeMap::new();
    let mut current: Option<Stream> = None;

    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(body) = line.strip_prefix('#') {
            let body = body.trim();
            if body.starts_with("stream=") {
                if let Some(s) = current.take() {
                    finish_stream(&mut streams, s, line_no)?;
                }
                let h = parse_stream_header(line_no, body)?;
                let mut s = Stream::new(h.name, h.rate, h.dim);
                s.clock_offset = h.offset;
                current = Some(s);
            } else if current.is_some() {
                return Err(schema(line_no, "header line after first stream section"));
            } else {
                let (k, v) = body
                    .split_once('=')
                    .ok_or_else(|| schema(line_no, format!("expected key=value, got '{body}'")))?;
                header.insert(k.trim().to_string(), (line_no, v.trim().to_string()));
            }
            continue;
        }
        let stream = current
            .as_mut()
            .ok_or_else(|| schema(line_no, "data row before any stream header"))?;
        let mut fields = line.split(',');
        let t = parse_f64(line_no, fields.next().unwrap_or(""))?;
        let value = fields
            .map(|f| parse_f64(line_no, f))
            .collect::<Result<Vec<_>, _>>()?;
        if value.len() != stream.dim {
            return Err(schema(
                line_no,
                format!(
                    "stream '{}' expects {} values, row has {}",
                    stream.name,
                    stream.dim,
                    value.len()
                ),
            ));
        }
        let row = stream.samples.len();
        if let Some(prev) = stream.samples.last() {
            if t <= prev.t {
                return Err(DatasetError::Validation {
                    stream: stream.name.clone(),
                    row,
                    msg: format!("line {line_no}: timestamp {t} not after {}", prev.t),
                });
            }
        }
        if !(t >= 0.0) {
            return Err(DatasetError::Validation {
                stream: stream.name.clone(),
                row,
                msg: format!("line {line_no}: negative or invalid timestamp {t}"),
            });
        }
        stream.samples.push(TimedSample { t, value });
    }
    if let Some(s) = current.take() {
        let n = content.lines().count();
        finish_stream(&mut streams, s, n)?;
    }

    let get = |k: &str| header.get(k);
    let require = |k: &str| {
        get(k).ok_or_else(|| schema(0, format!("missing header key '{k}'")))
    };

    let (l, v) = require("trial_id")?;
    let trial_id = v
        .parse::<u32>()
        .map_err(|_| schema(*l, format!("invalid trial_id '{v}'")))?;
    let label: ActionLabel = require("label")?.1.parse()?;

    let point = |k: &str| -> Result<Point3, DatasetError> {
        let (l, v) = require(k)?;
        parse_point(*l, v)
    };
    let group = |prefix: &str| -> Result<[Point3; 3], DatasetError> {
        Ok([
            point(&format!("{prefix}_L"))?,
            point(&format!("{prefix}_M"))?,
            point(&format!("{prefix}_R"))?,
        ])
    };
    let mut scene = SceneGeometry {
        ball_start: point("ball_start")?,
        place_markers: group("place")?,
        partner_faces: group("face")?,
        handover_points: group("handover")?,
        ..SceneGeometry::default()
    };
    if get("actor_eye").is_some() {
        scene.actor_eye = point("actor_eye")?;
    }

    let gaze_pattern = match get("gaze_pattern") {
        Some((l, v)) => Some(
            v.parse::<GazePattern>()
                .map_err(|_| schema(*l, format!("unknown gaze pattern '{v}'")))?,
        ),
        None => None,
    };

    let present = EVENT_KEYS.iter().filter(|k| get(k).is_some()).count();
    let events = match present {
        0 => None,
        4 => {
            let ev = |k: &str| {
                let (l, v) = require(k)?;
                parse_f64(*l, v)
            };
            Some(TrialEvents {
                gaze_shift: ev(EVENT_KEYS[0])?,
                head_settle: ev(EVENT_KEYS[1])?,
                arm_onset: ev(EVENT_KEYS[2])?,
                arm_end: ev(EVENT_KEYS[3])?,
            })
        }
        _ => return Err(schema(0, "event keys must be given all together or not at all")),
    };

    let trial = TrialRecord {
        trial_id,
        label,
        streams,
        scene,
        events,
        gaze_pattern,
    };
    trial.hand()?;
    Ok(trial)
}

fn finish_stream(
    streams: &mut BTreeMap<String, Stream>,
    s: Stream,
    line: usize,
) -> Result<(), DatasetError> {
    if streams.contains_key(&s.name) {
        return Err(schema(line, format!("duplicate stream '{}'", s.name)));
    }
    streams.insert(s.name.clone(), s);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Action, Direction};

    fn sample_file(label: &str, hand_rows: &str) -> String {
        let g = SceneGeometry::default();
        let mut s = format!("# trial_id=5\n# label={label}\n# ball_start=0,0,0\n");
        for (p, grp) in [
            ("place", g.place_markers),
            ("face", g.partner_faces),
            ("handover", g.handover_points),
        ] {
            for (d, pt) in DIRS.iter().zip(grp) {
                s.push_str(&format!("# {p}_{d}={}\n", fmt_point(&pt)));
            }
        }
        s.push_str("# stream=hand_pos rate=120 dim=3\n");
        s.push_str(hand_rows);
        s.push_str("# stream=gaze_point rate=60 dim=3\n0.000000,1,2,3\n");
        s.push_str("# stream=head_dir rate=120 dim=3\n0.000000,0,1,0\n");
        s
    }

    #[test]
    fn parses_label_and_streams() {
        let f = sample_file("G_R", "0.000000,0,0,0\n0.008333,0.1,0,0\n");
        let t = parse_trial(&f).unwrap();
        assert_eq!(t.label, ActionLabel::new(Action::Give, Direction::Right));
        assert_eq!(t.trial_id, 5);
        assert_eq!(t.streams.len(), 3);
        assert_eq!(t.hand().unwrap().len(), 2);
        assert!(t.events.is_none());
    }

    #[test]
    fn repeated_hand_timestamp_is_validation_error() {
        let f = sample_file("P_L", "0.000000,0,0,0\n0.008333,0,0,0\n0.008333,0,0,0\n");
        match parse_trial(&f) {
            Err(DatasetError::Validation { stream, row, .. }) => {
                assert_eq!(stream, "hand_pos");
                assert_eq!(row, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_label_and_bad_header() {
        let f = sample_file("Q_R", "0.000000,0,0,0\n");
        assert!(matches!(parse_trial(&f), Err(DatasetError::Label(_))));
        let f = "# trial_id\n# stream=hand_pos rate=120 dim=3\n";
        assert!(matches!(parse_trial(f), Err(DatasetError::Schema { .. })));
        let f = sample_file("P_M", "0.0,1,2\n");
        assert!(matches!(parse_trial(&f), Err(DatasetError::Schema { .. })));
    }

    #[test]
    fn time_format_has_six_decimals_and_round_trips() {
        assert_eq!(fmt_time(0.5), "0.500000");
        assert_eq!(fmt_time(2.0), "2.000000");
        let t = 1.0 / 120.0;
        let s = fmt_time(t);
        assert!(s.len() - s.find('.').unwrap() - 1 >= 6);
        assert_eq!(s.parse::<f64>().unwrap(), t);
    }
}
