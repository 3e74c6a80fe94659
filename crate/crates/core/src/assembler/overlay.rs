//! Devicetree overlay generation for the Zephyr layout.
//!
//! Descriptors are `alias` or `alias@target`, where target is one of
//! `gpioN.P`, `i2cN`, `spiN`, `adc.C` or `pwmN.C`. Each assignment yields the
//! alias `alias` pointing at a node labelled `bench_<signal>` (or at the bus
//! controller for bus targets).

use std::collections::BTreeSet;
use std::fmt::Write;

use regex::Regex;

use super::AssembleError;
use crate::peripheral::{Interface, PeripheralRegistry};
use crate::tasks::{node_label, PinAssignment, TaskSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Target {
    Gpio { port: u32, pin: u32 },
    Bus { controller: String },
    Adc { channel: u32 },
    Pwm { controller: String, channel: u32 },
    Unspecified,
}

#[derive(Debug, Clone)]
struct Parsed<'a> {
    pin: &'a PinAssignment,
    alias: String,
    target: Target,
    input: bool,
}

fn invalid(pin: &PinAssignment, reason: &str) -> AssembleError {
    AssembleError::InvalidDescriptor {
        pin: pin.to_string(),
        reason: reason.to_string(),
    }
}

fn parse_descriptor(pin: &PinAssignment) -> Result<(String, Target), AssembleError> {
    let alias_re = Regex::new(r"^[a-z][a-z0-9-]*$").expect("static");
    let (alias, target) = match pin.descriptor.split_once('@') {
        Some((a, t)) => (a, Some(t)),
        None => (pin.descriptor.as_str(), None),
    };
    if !alias_re.is_match(alias) {
        return Err(invalid(
            pin,
            "expected a devicetree alias (lowercase, starting with a letter)",
        ));
    }
    let Some(target) = target else {
        return Ok((alias.to_string(), Target::Unspecified));
    };
    let gpio = Regex::new(r"^gpio([0-9]+)\.([0-9]+)$").expect("static");
    let bus = Regex::new(r"^(i2c|spi)[0-9]+$").expect("static");
    let adc = Regex::new(r"^adc\.([0-7])$").expect("static");
    let pwm = Regex::new(r"^(pwm[0-9]+)\.([0-9]+)$").expect("static");
    let num = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| invalid(pin, "number out of range"))
    };
    let target = if let Some(c) = gpio.captures(target) {
        Target::Gpio {
            port: num(&c[1])?,
            pin: num(&c[2])?,
        }
    } else if bus.is_match(target) {
        Target::Bus {
            controller: target.to_string(),
        }
    } else if let Some(c) = adc.captures(target) {
        Target::Adc {
            channel: num(&c[1])?,
        }
    } else if let Some(c) = pwm.captures(target) {
        Target::Pwm {
            controller: c[1].to_string(),
            channel: num(&c[2])?,
        }
    } else {
        return Err(invalid(
            pin,
            "unknown target; expected gpioN.P, i2cN, spiN, adc.C or pwmN.C",
        ));
    };
    Ok((alias.to_string(), target))
}

fn is_input(interface: Option<Interface>, signal: &str) -> bool {
    match interface {
        Some(Interface::GpioIn) => true,
        Some(Interface::GpioTriggerEcho) => !signal.starts_with("trig"),
        _ => false,
    }
}

/// Renders `app.overlay` for a Zephyr task. Output is sorted by signal name.
pub fn generate_overlay(
    task: &TaskSpec,
    registry: &PeripheralRegistry,
) -> Result<String, AssembleError> {
    let mut parsed = Vec::new();
    let mut aliases = std::collections::BTreeMap::new();
    for pin in &task.pins {
        let (alias, target) = parse_descriptor(pin)?;
        if let Some(previous) = aliases.insert(alias.clone(), target.clone()) {
            // Several signals of one bus device may share the bus alias.
            if matches!(previous, Target::Bus { .. }) && previous == target {
                continue;
            }
            return Err(invalid(pin, "alias used twice"));
        }
        let interface = task.peripheral_interface(registry, &pin.peripheral);
        parsed.push(Parsed {
            pin,
            input: is_input(interface, &pin.signal),
            alias,
            target,
        });
    }
    parsed.sort_by(|a, b| a.pin.signal.cmp(&b.pin.signal));

    let gpio_like = |p: &&Parsed<'_>| matches!(p.target, Target::Gpio { .. } | Target::Unspecified);
    let outputs: Vec<&Parsed<'_>> = parsed
        .iter()
        .filter(gpio_like)
        .filter(|p| !p.input)
        .collect();
    let inputs: Vec<&Parsed<'_>> = parsed
        .iter()
        .filter(gpio_like)
        .filter(|p| p.input)
        .collect();
    let pwms: Vec<&Parsed<'_>> = parsed
        .iter()
        .filter(|p| matches!(p.target, Target::Pwm { .. }))
        .collect();
    let adcs: Vec<(u32, &Parsed<'_>)> = parsed
        .iter()
        .filter_map(|p| match p.target {
            Target::Adc { channel } => Some((channel, p)),
            _ => None,
        })
        .collect();
    let buses: BTreeSet<&str> = parsed
        .iter()
        .filter_map(|p| match &p.target {
            Target::Bus { controller } => Some(controller.as_str()),
            _ => None,
        })
        .collect();

    let mut out = String::new();
    let _ = writeln!(
        out,
        "/* Generated by skillbench for task {} on {}. */",
        task.id, task.target
    );
    out.push_str("#include <zephyr/dt-bindings/gpio/gpio.h>\n");
    if !pwms.is_empty() {
        out.push_str("#include <zephyr/dt-bindings/pwm/pwm.h>\n");
    }
    if !adcs.is_empty() {
        out.push_str("#include <zephyr/dt-bindings/adc/adc.h>\n");
        out.push_str("#include <zephyr/dt-bindings/adc/nrf-saadc.h>\n");
    }
    out.push_str("\n/ {\n");
    if !parsed.is_empty() {
        out.push_str("\taliases {\n");
        for p in &parsed {
            let reference = match &p.target {
                Target::Bus { controller } => controller.clone(),
                Target::Adc { .. } => "adc".to_string(),
                _ => node_label(&p.pin.signal),
            };
            let _ = writeln!(out, "\t\t{} = &{};", p.alias, reference);
        }
        out.push_str("\t};\n");
    }
    let gpio_group = |out: &mut String, name: &str, compatible: &str, nodes: &[&Parsed<'_>]| {
        if nodes.is_empty() {
            return;
        }
        let _ = write!(out, "\n\t{name} {{\n\t\tcompatible = \"{compatible}\";\n");
        for p in nodes {
            let label = node_label(&p.pin.signal);
            let _ = writeln!(out, "\t\t{label}: {label} {{");
            match p.target {
                Target::Gpio { port, pin } => {
                    let flags = if p.input {
                        "(GPIO_ACTIVE_HIGH | GPIO_PULL_DOWN)"
                    } else {
                        "GPIO_ACTIVE_HIGH"
                    };
                    let _ = writeln!(out, "\t\t\tgpios = <&gpio{port} {pin} {flags}>;");
                }
                _ => {
                    out.push_str("\t\t\t/* pin location not given in the task; set gpios here */\n")
                }
            }
            let _ = writeln!(
                out,
                "\t\t\tlabel = \"{} {}\";",
                p.pin.peripheral, p.pin.signal
            );
            out.push_str("\t\t};\n");
        }
        out.push_str("\t};\n");
    };
    gpio_group(&mut out, "bench_outputs", "gpio-leds", &outputs);
    gpio_group(&mut out, "bench_inputs", "gpio-keys", &inputs);
    if !pwms.is_empty() {
        out.push_str("\n\tbench_pwm {\n\t\tcompatible = \"pwm-leds\";\n");
        for p in &pwms {
            let label = node_label(&p.pin.signal);
            if let Target::Pwm {
                controller,
                channel,
            } = &p.target
            {
                let _ = writeln!(out, "\t\t{label}: {label} {{");
                let _ = writeln!(
                    out,
                    "\t\t\tpwms = <&{controller} {channel} PWM_MSEC(20) PWM_POLARITY_NORMAL>;"
                );
                out.push_str("\t\t};\n");
            }
        }
        out.push_str("\t};\n");
    }
    if !adcs.is_empty() {
        out.push_str("\n\tzephyr,user {\n\t\tio-channels = ");
        let refs: Vec<String> = adcs.iter().map(|(c, _)| format!("<&adc {c}>")).collect();
        out.push_str(&refs.join(", "));
        out.push_str(";\n\t};\n");
    }
    out.push_str("};\n");
    for bus in &buses {
        let _ = write!(out, "\n&{bus} {{\n\tstatus = \"okay\";\n}};\n");
    }
    if !adcs.is_empty() {
        out.push_str(
            "\n&adc {\n\t#address-cells = <1>;\n\t#size-cells = <0>;\n\tstatus = \"okay\";\n",
        );
        let channels: BTreeSet<u32> = adcs.iter().map(|(c, _)| *c).collect();
        for c in channels {
            let _ = write!(
                out,
                "\n\tchannel@{c} {{\n\t\treg = <{c}>;\n\t\tzephyr,gain = \"ADC_GAIN_1_6\";\n\t\tzephyr,reference = \"ADC_REF_INTERNAL\";\n\t\tzephyr,acquisition-time = <ADC_ACQ_TIME_DEFAULT>;\n\t\tzephyr,input-positive = <NRF_SAADC_AIN{c}>;\n\t\tzephyr,resolution = <12>;\n\t}};\n"
            );
        }
        out.push_str("};\n");
    }
    Ok(out)
}
