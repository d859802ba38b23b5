//! Timestamps are whole seconds since the Unix epoch, UTC.

use chrono::{DateTime, Datelike, SecondsFormat, TimeZone, Timelike, Utc};

use crate::error::{Error, Result};

pub type Timestamp = i64;

pub const SECONDS_PER_HOUR: i64 = 3600;
pub const SECONDS_PER_DAY: i64 = 86_400;

/// Parses an RFC 3339 / ISO-8601 instant. Sub-second precision is rejected.
pub fn parse_iso(text: &str) -> Result<Timestamp> {
    let parsed = DateTime::parse_from_rfc3339(text)
        .map_err(|e| Error::MalformedEvent(format!("bad timestamp `{text}`: {e}")))?;
    if parsed.timestamp_subsec_nanos() != 0 {
        return Err(Error::MalformedEvent(format!(
            "timestamp `{text}` has sub-second precision"
        )));
    }
    Ok(parsed.timestamp())
}

pub fn format_iso(ts: Timestamp) -> String {
    match Utc.timestamp_opt(ts, 0).single() {
        Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Secs, true),
        None => ts.to_string(),
    }
}

fn utc(ts: Timestamp) -> DateTime<Utc> {
    Utc.timestamp_opt(ts, 0)
        .single()
        .unwrap_or(DateTime::<Utc>::UNIX_EPOCH)
}

/// Three-letter weekday name ("Mon" .. "Sun").
pub fn day_of_week(ts: Timestamp) -> &'static str {
    const NAMES: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];
    NAMES[utc(ts).weekday().num_days_from_monday() as usize]
}

/// One of the four six-hour bands of the UTC day.
pub fn hour_band(ts: Timestamp) -> &'static str {
    match utc(ts).hour() {
        0..=5 => "00-06",
        6..=11 => "06-12",
        12..=17 => "12-18",
        _ => "18-24",
    }
}

/// Converts hours to seconds, rounding to the nearest second.
pub fn hours_to_seconds(hours: f64) -> i64 {
    (hours * SECONDS_PER_HOUR as f64).round() as i64
}

pub fn seconds_to_hours(seconds: i64) -> f64 {
    seconds as f64 / SECONDS_PER_HOUR as f64
}

/// Shortest decimal rendering of a second count in hours.
///
/// Values that are whole hundredths of an hour (multiples of 36 s) print
/// exactly; anything finer falls back to at most six fraction digits.
pub fn format_hours(seconds: i64) -> String {
    if seconds % 36 == 0 {
        let centi = seconds / 36;
        let sign = if centi < 0 { "-" } else { "" };
        let centi = centi.abs();
        let (whole, frac) = (centi / 100, centi % 100);
        if frac == 0 {
            format!("{sign}{whole}")
        } else if frac % 10 == 0 {
            format!("{sign}{whole}.{}", frac / 10)
        } else {
            format!("{sign}{whole}.{frac:02}")
        }
    } else {
        let text = format!("{:.6}", seconds_to_hours(seconds));
        text.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iso_round_trip() {
        let ts = parse_iso("2018-10-08T07:30:00Z").unwrap();
        assert_eq!(ts, 1_538_983_800);
        assert_eq!(format_iso(ts), "2018-10-08T07:30:00Z");
    }

    #[test]
    fn offsets_normalize_to_utc() {
        assert_eq!(
            parse_iso("2018-10-08T09:30:00+02:00").unwrap(),
            parse_iso("2018-10-08T07:30:00Z").unwrap()
        );
    }

    #[test]
    fn sub_second_rejected() {
        assert!(parse_iso("2018-10-08T07:30:00.5Z").is_err());
        assert!(parse_iso("yesterday").is_err());
    }

    #[test]
    fn derived_calendar_keys() {
        // 2018-10-08 was a Monday.
        let ts = parse_iso("2018-10-08T07:30:00Z").unwrap();
        assert_eq!(day_of_week(ts), "Mon");
        assert_eq!(hour_band(ts), "06-12");
        assert_eq!(hour_band(ts + 17 * SECONDS_PER_HOUR), "00-06");
    }

    #[test]
    fn hour_formatting() {
        assert_eq!(format_hours(7200), "2");
        assert_eq!(format_hours(9000), "2.5");
        assert_eq!(format_hours(900), "0.25");
        assert_eq!(format_hours(36), "0.01");
        assert_eq!(format_hours(0), "0");
        assert_eq!(format_hours(1), "0.000278");
    }
}
