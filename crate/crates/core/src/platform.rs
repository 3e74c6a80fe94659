//! The three board + framework combinations the harness targets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlatformId {
    #[serde(rename = "atmega2560+arduino")]
    Arduino,
    #[serde(rename = "esp32s3+espidf")]
    EspIdf,
    #[serde(rename = "nrf52840+zephyr")]
    Zephyr,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error(
    "unknown platform {0:?} (expected one of atmega2560+arduino, esp32s3+espidf, nrf52840+zephyr)"
)]
pub struct UnknownPlatform(pub String);

impl PlatformId {
    pub const ALL: [PlatformId; 3] = [PlatformId::Arduino, PlatformId::EspIdf, PlatformId::Zephyr];

    pub fn as_str(self) -> &'static str {
        match self {
            PlatformId::Arduino => "atmega2560+arduino",
            PlatformId::EspIdf => "esp32s3+espidf",
            PlatformId::Zephyr => "nrf52840+zephyr",
        }
    }

    /// Short column label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            PlatformId::Arduino => "Arduino",
            PlatformId::EspIdf => "ESP-IDF",
            PlatformId::Zephyr => "Zephyr",
        }
    }

    pub fn profile(self) -> PlatformProfile {
        match self {
            PlatformId::Arduino => PlatformProfile {
                id: self,
                board: "Arduino Mega 2560 Rev3 (ATmega2560)",
                framework: "Arduino framework",
                architecture: "AVR",
                pin_convention: PinConvention::BoardLabel,
                toolchain: "arduino-cli",
            },
            PlatformId::EspIdf => PlatformProfile {
                id: self,
                board: "ESP32-S3-BOX-3 (ESP32-S3)",
                framework: "ESP-IDF",
                architecture: "Xtensa",
                pin_convention: PinConvention::NumericGpio,
                toolchain: "esp-idf",
            },
            PlatformId::Zephyr => PlatformProfile {
                id: self,
                board: "Arduino Nano 33 BLE Rev2 (nRF52840)",
                framework: "Zephyr RTOS (nRF Connect SDK)",
                architecture: "ARM Cortex-M4",
                pin_convention: PinConvention::DevicetreeAlias,
                toolchain: "ncs-west",
            },
        }
    }
}

impl fmt::Display for PlatformId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlatformId {
    type Err = UnknownPlatform;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlatformId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| UnknownPlatform(s.to_string()))
    }
}

/// How a platform refers to physical pins in task descriptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinConvention {
    /// Raw GPIO numbers, e.g. `17`.
    NumericGpio,
    /// Devicetree aliases, e.g. `led-ext` or `led-ext@gpio1.11`.
    DevicetreeAlias,
    /// Board header labels, e.g. `13`, `A0`, `LED_BUILTIN`.
    BoardLabel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlatformProfile {
    pub id: PlatformId,
    pub board: &'static str,
    pub framework: &'static str,
    pub architecture: &'static str,
    pub pin_convention: PinConvention,
    /// Key of the default toolchain profile.
    pub toolchain: &'static str,
}

impl PlatformProfile {
    pub fn display_name(&self) -> String {
        format!("{} with {}", self.board, self.framework)
    }
}
