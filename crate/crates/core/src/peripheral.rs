//! Peripheral registry. The default registry holds the 23 devices the
//! benchmark rigs are wired with.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interface {
    GpioOut,
    GpioIn,
    GpioTriggerEcho,
    Adc,
    Pwm,
    I2c,
    Spi,
    OneWire,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Category {
    Actuator,
    Input,
    Sensor,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Peripheral {
    pub id: String,
    pub name: String,
    /// Most devices have one interface; BME280 speaks both I2C and SPI.
    pub interfaces: Vec<Interface>,
    pub category: Category,
}

impl Peripheral {
    fn new(id: &str, name: &str, interfaces: &[Interface], category: Category) -> Self {
        Self {
            id: id.to_string(),
            name: name.to_string(),
            interfaces: interfaces.to_vec(),
            category,
        }
    }

    pub fn has_interface(&self, interface: Interface) -> bool {
        self.interfaces.contains(&interface)
    }
}

#[derive(Debug, Clone)]
pub struct PeripheralRegistry {
    entries: Vec<Peripheral>,
}

impl Default for PeripheralRegistry {
    fn default() -> Self {
        use Category::*;
        use Interface::*;
        let entries = vec![
            Peripheral::new("led", "LED", &[GpioOut], Actuator),
            Peripheral::new("push-button", "Push Button", &[GpioIn], Input),
            Peripheral::new("active-buzzer", "Active Buzzer", &[GpioOut], Actuator),
            Peripheral::new("passive-buzzer", "Passive Buzzer", &[Pwm], Actuator),
            Peripheral::new("relay", "Relay Module", &[GpioOut], Actuator),
            Peripheral::new("laser", "Laser Emitter Module", &[GpioOut], Actuator),
            Peripheral::new("rotary-encoder", "Rotary Encoder", &[GpioIn], Input),
            Peripheral::new("keypad-4x4", "16-Key Keypad (4x4)", &[GpioIn], Input),
            Peripheral::new("tilt-switch", "Tilt Switch (KY-020)", &[GpioIn], Input),
            Peripheral::new("joystick", "Analog Joystick", &[Adc], Input),
            Peripheral::new("photoresistor", "Photoresistor (KY-018)", &[Adc], Sensor),
            Peripheral::new("tmp36", "TMP36 Temperature Sensor", &[Adc], Sensor),
            Peripheral::new("water-level", "Analog Water Level Sensor", &[Adc], Sensor),
            Peripheral::new("pir", "PIR Motion Sensor (HC-SR501)", &[GpioIn], Sensor),
            Peripheral::new(
                "hc-sr04",
                "Ultrasonic Sensor (HC-SR04)",
                &[GpioTriggerEcho],
                Sensor,
            ),
            Peripheral::new("sound-sensor", "Digital Sound Sensor", &[GpioIn], Sensor),
            Peripheral::new("shock-sensor", "Digital Shock Sensor", &[GpioIn], Sensor),
            Peripheral::new("dht11", "DHT11 (Temp & Humidity)", &[OneWire], Sensor),
            Peripheral::new("ds18b20", "DS18B20 (Temperature)", &[OneWire], Sensor),
            Peripheral::new("lcd1602", "LCD1602 Display (HD44780)", &[Parallel], Output),
            Peripheral::new("ds1307", "DS1307 RTC Module", &[I2c], Sensor),
            Peripheral::new("mpu6050", "MPU6050 / GY-521", &[I2c], Sensor),
            Peripheral::new(
                "bme280",
                "BME280 (Temp, Humidity, Pres.)",
                &[I2c, Spi],
                Sensor,
            ),
        ];
        Self { entries }
    }
}

impl PeripheralRegistry {
    pub fn get(&self, id: &str) -> Option<&Peripheral> {
        self.entries.iter().find(|p| p.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Peripheral> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds a user-defined peripheral. Returns false if the id is taken.
    pub fn extend_with(&mut self, peripheral: Peripheral) -> bool {
        if self.contains(&peripheral.id) {
            return false;
        }
        self.entries.push(peripheral);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_registry_has_23_unique_ids() {
        let reg = PeripheralRegistry::default();
        assert_eq!(reg.len(), 23);
        let ids: std::collections::BTreeSet<_> = reg.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids.len(), 23);
    }

    #[test]
    fn bus_devices() {
        let reg = PeripheralRegistry::default();
        let i2c: Vec<_> = reg
            .iter()
            .filter(|p| p.has_interface(Interface::I2c))
            .map(|p| p.id.as_str())
            .collect();
        assert_eq!(i2c, ["ds1307", "mpu6050", "bme280"]);
        assert!(reg.get("bme280").unwrap().has_interface(Interface::Spi));
    }

    #[test]
    fn extension_rejects_duplicates() {
        let mut reg = PeripheralRegistry::default();
        let led = reg.get("led").unwrap().clone();
        assert!(!reg.extend_with(led));
        assert!(reg.extend_with(Peripheral::new(
            "servo",
            "Servo",
            &[Interface::Pwm],
            Category::Actuator
        )));
        assert_eq!(reg.len(), 24);
    }
}
