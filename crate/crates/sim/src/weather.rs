//! Typical-week disturbance traces and comfort bands.

use std::f64::consts::PI;

use bldgres_core::thermal::{ArchetypeParams, DisturbanceTrace};

use crate::config::Season;

/// Weekday office hours, 07:00 to 19:00.
pub const OFFICE_HOURS: (f64, f64) = (7.0, 19.0);

pub fn comfort_band(season: Season) -> (f64, f64) {
    match season {
        Season::Winter => (21.0, 24.0),
        Season::Summer => (22.0, 25.0),
    }
}

pub const RELAXED_BAND: (f64, f64) = (12.0, 35.0);

/// Blinds position held in the simulation, partly closed in both seasons
/// (the heavy-gain TABS archetypes overheat otherwise).
pub fn blinds(season: Season) -> f64 {
    match season {
        Season::Winter => 0.3,
        Season::Summer => 0.2,
    }
}

pub fn is_occupied(day: usize, start_weekday: usize, hour: f64) -> bool {
    (start_weekday + day) % 7 < 5 && hour >= OFFICE_HOURS.0 && hour < OFFICE_HOURS.1
}

/// Ambient temperature (°C) and global horizontal radiation (W/m²).
pub fn weather(season: Season, day: usize, hour: f64) -> (f64, f64) {
    let d = day as f64;
    let (mean, swing, peak, sunrise, sunset) = match season {
        Season::Winter => (1.0 + 3.0 * (2.0 * PI * d / 9.0).sin(), 4.0, 320.0, 8.0, 17.0),
        Season::Summer => (20.0 + 3.0 * (2.0 * PI * d / 8.0).sin(), 6.0, 800.0, 6.0, 21.0),
    };
    let ambient = mean + swing * (2.0 * PI * (hour - 9.0) / 24.0).sin();
    let clear = 0.65 + 0.35 * (2.0 * PI * d / 5.0 + 1.0).cos().abs();
    let solar = if hour > sunrise && hour < sunset {
        peak * clear * (PI * (hour - sunrise) / (sunset - sunrise)).sin()
    } else {
        0.0
    };
    (ambient, solar)
}

/// Trace of `steps` steps from midnight of day 0 for a building with the
/// given internal gains.
pub fn season_trace(
    season: Season,
    start_weekday: usize,
    steps: usize,
    step_minutes: u32,
    params: &ArchetypeParams,
) -> DisturbanceTrace {
    let per_day = (24 * 60 / step_minutes) as usize;
    let (lo, hi) = comfort_band(season);
    let mut tr = DisturbanceTrace {
        timestamp_min: Vec::with_capacity(steps),
        ambient: Vec::with_capacity(steps),
        solar: Vec::with_capacity(steps),
        gains: Vec::with_capacity(steps),
        occupied: Vec::with_capacity(steps),
        y_min: Vec::with_capacity(steps),
        y_max: Vec::with_capacity(steps),
    };
    for k in 0..steps {
        let day = k / per_day;
        // conditions at the middle of the step
        let hour = ((k % per_day) as f64 + 0.5) * step_minutes as f64 / 60.0;
        let (ambient, solar) = weather(season, day, hour);
        let occ = is_occupied(day, start_weekday, hour);
        tr.timestamp_min.push(k as f64 * step_minutes as f64);
        tr.ambient.push(ambient);
        tr.solar.push(solar);
        tr.gains.push(if occ { params.gain_occupied } else { params.gain_unoccupied });
        tr.occupied.push(occ);
        let (a, b) = if occ { (lo, hi) } else { RELAXED_BAND };
        tr.y_min.push(a);
        tr.y_max.push(b);
    }
    tr
}
