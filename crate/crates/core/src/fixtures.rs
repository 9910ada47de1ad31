//! Shared test fixtures.

use crate::app_ir::{parse_app, App};

pub(crate) const WEATHER_SRC: &str = include_str!("../fixtures/weather.papp");

pub(crate) fn weather() -> App {
    parse_app(WEATHER_SRC).expect("weather fixture parses")
}
