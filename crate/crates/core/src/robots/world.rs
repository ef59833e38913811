use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::RobotError;

/// Grid cell `(x, y)`.
pub type Cell = (i32, i32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ZoneName {
    A,
    B,
    C,
    D,
    Loading,
}

impl ZoneName {
    pub const DELIVERY: [ZoneName; 4] = [ZoneName::A, ZoneName::B, ZoneName::C, ZoneName::D];

    pub fn as_str(self) -> &'static str {
        match self {
            ZoneName::A => "A",
            ZoneName::B => "B",
            ZoneName::C => "C",
            ZoneName::D => "D",
            ZoneName::Loading => "Loading",
        }
    }
}

impl fmt::Display for ZoneName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ZoneName {
    type Err = RobotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(ZoneName::A),
            "B" | "b" => Ok(ZoneName::B),
            "C" | "c" => Ok(ZoneName::C),
            "D" | "d" => Ok(ZoneName::D),
            "Loading" | "loading" => Ok(ZoneName::Loading),
            other => Err(RobotError::UnknownZone(other.to_string())),
        }
    }
}

/// Grid world geometry and robot timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    /// `(width, height)` in cells.
    pub grid: (i32, i32),
    pub zones: BTreeMap<ZoneName, Cell>,
    /// Cells per second.
    pub robot_speed: f64,
    pub load_duration_s: f64,
    pub unload_duration_s: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            grid: (20, 20),
            zones: [
                (ZoneName::A, (2, 17)),
                (ZoneName::B, (17, 17)),
                (ZoneName::C, (17, 2)),
                (ZoneName::D, (2, 2)),
                (ZoneName::Loading, (10, 1)),
            ]
            .into(),
            robot_speed: 1.0,
            load_duration_s: 3.0,
            unload_duration_s: 3.0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), String> {
        let (w, h) = self.grid;
        if w <= 0 || h <= 0 {
            return Err("world.grid: dimensions must be positive".into());
        }
        if !(self.robot_speed.is_finite() && self.robot_speed > 0.0) {
            return Err("world.robot_speed: must be > 0".into());
        }
        for (name, value) in [
            ("world.load_duration_s", self.load_duration_s),
            ("world.unload_duration_s", self.unload_duration_s),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(format!("{name}: must be a non-negative number"));
            }
        }
        for zone in ZoneName::DELIVERY.iter().chain([&ZoneName::Loading]) {
            if !self.zones.contains_key(zone) {
                return Err(format!("world.zones: missing zone {zone}"));
            }
        }
        for (zone, cell) in &self.zones {
            if !self.contains(*cell) {
                return Err(format!("world.zones.{zone}: center {cell:?} outside grid"));
            }
        }
        let mut centers: Vec<Cell> = self.zones.values().copied().collect();
        centers.sort_unstable();
        centers.dedup();
        if centers.len() != self.zones.len() {
            return Err("world.zones: zone centers must be distinct".into());
        }
        Ok(())
    }

    pub fn contains(&self, (x, y): Cell) -> bool {
        x >= 0 && y >= 0 && x < self.grid.0 && y < self.grid.1
    }

    pub fn center(&self, zone: ZoneName) -> Cell {
        self.zones[&zone]
    }

    pub fn zone_at(&self, cell: Cell) -> Option<ZoneName> {
        self.zones.iter().find(|(_, c)| **c == cell).map(|(z, _)| *z)
    }

    /// Longest Manhattan path inside the grid.
    pub fn diameter(&self) -> i64 {
        i64::from(self.grid.0 - 1) + i64::from(self.grid.1 - 1)
    }

    pub fn speed_millicells_per_s(&self) -> u64 {
        (self.robot_speed * 1000.0).round().max(1.0) as u64
    }

    pub fn load_ms(&self) -> u64 {
        (self.load_duration_s * 1000.0).round() as u64
    }

    pub fn unload_ms(&self) -> u64 {
        (self.unload_duration_s * 1000.0).round() as u64
    }
}
