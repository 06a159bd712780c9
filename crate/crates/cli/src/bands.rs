//! Band grammar: comma-separated ranges `a-b`, each optionally suffixed
//! `:days` (cycle periods in samples) or `:rad` (angular frequencies).
//! A suffix on the final range applies to every unsuffixed range; the
//! default unit is radians. Radian endpoints accept plain numbers, `pi`,
//! multiples like `0.5pi`, and quotients like `pi/4`. `inf` is valid only
//! as the long-period end of a `days` range.
//!
//! Parsed bands must tile (0, pi] exactly. With `require_partition` off,
//! uncovered stretches are filled with bands labeled `uncovered:<i>` so the
//! decomposition identities still hold; overlaps stay an error either way.

use std::f64::consts::PI;

use spillover::{BandPartition, Error, FrequencyBand};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unit {
    Days,
    Rad,
}

#[derive(Debug)]
pub struct ParsedPartition {
    pub partition: BandPartition,
    /// Labels of gap-filler bands added when the partition property was not
    /// required. Empty when the user's bands already tile (0, pi].
    pub fillers: Vec<String>,
}

pub fn parse_partition(text: &str, require_partition: bool) -> Result<ParsedPartition, Error> {
    let pieces: Vec<&str> = text.split(',').map(str::trim).collect();
    if pieces.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidBand(format!(
            "empty range in band list '{text}'"
        )));
    }

    let tagged: Vec<(&str, Option<Unit>)> = pieces
        .iter()
        .map(|piece| split_unit(piece))
        .collect::<Result<_, Error>>()?;
    let list_unit = tagged.last().and_then(|&(_, u)| u).unwrap_or(Unit::Rad);

    let mut bands = Vec::with_capacity(tagged.len());
    for (range, unit) in &tagged {
        bands.push(parse_range(range, unit.unwrap_or(list_unit))?);
    }

    if require_partition {
        return Ok(ParsedPartition {
            partition: BandPartition::new(bands)?,
            fillers: Vec::new(),
        });
    }
    fill_gaps(bands)
}

fn split_unit(piece: &str) -> Result<(&str, Option<Unit>), Error> {
    match piece.rsplit_once(':') {
        Some((range, "days")) => Ok((range.trim(), Some(Unit::Days))),
        Some((range, "rad")) => Ok((range.trim(), Some(Unit::Rad))),
        Some((_, unit)) => Err(Error::InvalidBand(format!(
            "unknown band unit '{unit}' in '{piece}' (expected 'days' or 'rad')"
        ))),
        None => Ok((piece, None)),
    }
}

fn parse_range(range: &str, unit: Unit) -> Result<FrequencyBand, Error> {
    let (a, b) = range.split_once('-').ok_or_else(|| {
        Error::InvalidBand(format!("range '{range}' is not of the form 'a-b'"))
    })?;
    let (a, b) = (a.trim(), b.trim());
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidBand(format!(
            "range '{range}' is missing an endpoint"
        )));
    }
    match unit {
        Unit::Days => {
            if a == "inf" {
                return Err(Error::InvalidBand(format!(
                    "'inf' is only valid as the long-period end, got '{range}:days'"
                )));
            }
            let short = parse_number(a)?;
            let long = if b == "inf" {
                f64::INFINITY
            } else {
                parse_number(b)?
            };
            FrequencyBand::from_day_periods(short, long)
        }
        Unit::Rad => {
            let lower = parse_rad_token(a)?;
            let upper = parse_rad_token(b)?;
            FrequencyBand::new(lower, upper, &format!("{a}-{b}:rad"))
        }
    }
}

fn parse_number(token: &str) -> Result<f64, Error> {
    token
        .parse::<f64>()
        .map_err(|_| Error::InvalidBand(format!("cannot parse '{token}' as a number")))
}

fn parse_rad_token(token: &str) -> Result<f64, Error> {
    if token == "inf" {
        return Err(Error::InvalidBand(
            "'inf' is only valid as a day period (use ':days')".to_string(),
        ));
    }
    if token == "pi" {
        return Ok(PI);
    }
    if let Some(divisor) = token.strip_prefix("pi/") {
        return Ok(PI / parse_number(divisor)?);
    }
    if let Some(factor) = token.strip_suffix("pi") {
        return Ok(parse_number(factor)? * PI);
    }
    parse_number(token)
}

/// Matches the edge snapping inside `FrequencyBand::new`.
const EDGE_TOLERANCE: f64 = 1e-6;

fn fill_gaps(mut bands: Vec<FrequencyBand>) -> Result<ParsedPartition, Error> {
    bands.sort_by(|a, b| a.lower().total_cmp(&b.lower()));
    for pair in bands.windows(2) {
        if pair[1].lower() < pair[0].upper() - EDGE_TOLERANCE {
            return Err(Error::InvalidPartition(format!(
                "bands '{}' and '{}' overlap",
                pair[0].label(),
                pair[1].label()
            )));
        }
    }

    let mut filled = Vec::with_capacity(bands.len() + 2);
    let mut fillers = Vec::new();
    let mut cursor = 0.0;
    let filler = |lo: f64, hi: f64, fillers: &mut Vec<String>| -> Result<FrequencyBand, Error> {
        let label = format!("uncovered:{}", fillers.len());
        fillers.push(label.clone());
        FrequencyBand::new(lo, hi, &label)
    };
    for band in bands {
        if band.lower() > cursor + EDGE_TOLERANCE {
            filled.push(filler(cursor, band.lower(), &mut fillers)?);
        }
        cursor = band.upper();
        filled.push(band);
    }
    if cursor < PI - EDGE_TOLERANCE {
        filled.push(filler(cursor, PI, &mut fillers)?);
    }
    Ok(ParsedPartition {
        partition: BandPartition::new(filled)?,
        fillers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(p: &ParsedPartition) -> Vec<(f64, f64)> {
        p.partition
            .bands()
            .iter()
            .map(|b| (b.lower(), b.upper()))
            .collect()
    }

    #[test]
    fn trailing_days_tag_applies_to_the_whole_list() {
        let p = parse_partition("1-5,5-20,20-inf:days", true).unwrap();
        let got = edges(&p);
        let tau = 2.0 * PI;
        assert_eq!(got.len(), 3);
        assert!((got[0].1 - tau / 20.0).abs() < 1e-12);
        assert!((got[1].1 - tau / 5.0).abs() < 1e-12);
        assert_eq!(got[2].1, PI);
        assert_eq!(got[0].0, 0.0);
        assert!(p.fillers.is_empty());
        let labels: Vec<&str> = p.partition.bands().iter().map(|b| b.label()).collect();
        assert_eq!(labels, ["20-inf:days", "5-20:days", "1-5:days"]);
    }

    #[test]
    fn default_unit_is_radians_with_pi_tokens() {
        let p = parse_partition("0-pi/4,pi/4-pi/2,pi/2-pi", true).unwrap();
        let got = edges(&p);
        assert_eq!(got[0], (0.0, PI / 4.0));
        assert_eq!(got[1], (PI / 4.0, PI / 2.0));
        assert_eq!(got[2], (PI / 2.0, PI));
    }

    #[test]
    fn single_full_band_parses() {
        let p = parse_partition("0-pi", true).unwrap();
        assert_eq!(edges(&p), vec![(0.0, PI)]);
    }

    #[test]
    fn pi_multiples_and_plain_numbers_mix() {
        let p = parse_partition("0-0.5pi,0.5pi-pi", true).unwrap();
        assert_eq!(edges(&p)[0].1, 0.5 * PI);
        let q = parse_partition("0-1.5707963267948966,1.5707963267948966-pi", true).unwrap();
        assert_eq!(edges(&q)[0].1, PI / 2.0);
    }

    #[test]
    fn per_range_tags_override_the_trailing_tag() {
        // "0-pi/2" would not parse as day periods, so this only succeeds if
        // the explicit rad tag wins over the trailing days tag.
        let p = parse_partition("0-pi/2:rad,2-4:days", true).unwrap();
        assert_eq!(edges(&p), vec![(0.0, PI / 2.0), (PI / 2.0, PI)]);
    }

    #[test]
    fn inf_is_rejected_outside_the_long_period_end() {
        assert!(parse_partition("inf-5:days", true).is_err());
        assert!(parse_partition("0-inf", true).is_err());
        assert!(parse_partition("1-inf:rad", true).is_err());
    }

    #[test]
    fn malformed_ranges_are_rejected() {
        assert!(parse_partition("", true).is_err());
        assert!(parse_partition("1-5,,5-20:days", true).is_err());
        assert!(parse_partition("five-20:days", true).is_err());
        assert!(parse_partition("1:5:days", true).is_err());
        assert!(parse_partition("1-5:parsecs", true).is_err());
        assert!(parse_partition("5-1:days", true).is_err());
        assert!(parse_partition("pi/2-pi/4", true).is_err());
    }

    #[test]
    fn gaps_are_an_error_when_a_partition_is_required() {
        match parse_partition("0-pi/4", true) {
            Err(Error::InvalidPartition(_)) => {}
            other => panic!("expected a partition error, got {other:?}"),
        }
    }

    #[test]
    fn gaps_are_filled_when_the_partition_is_not_required() {
        let p = parse_partition("pi/4-pi/2", false).unwrap();
        assert_eq!(p.fillers, vec!["uncovered:0", "uncovered:1"]);
        assert_eq!(
            edges(&p),
            vec![(0.0, PI / 4.0), (PI / 4.0, PI / 2.0), (PI / 2.0, PI)]
        );
    }

    #[test]
    fn overlaps_stay_an_error_without_the_partition_requirement() {
        assert!(parse_partition("0-pi/2,pi/4-pi", false).is_err());
    }

    #[test]
    fn complete_partitions_pass_through_without_fillers() {
        let p = parse_partition("0-pi/2,pi/2-pi", false).unwrap();
        assert!(p.fillers.is_empty());
        assert_eq!(edges(&p).len(), 2);
    }
}
