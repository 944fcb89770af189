use crate::math;

/// Named analytic functions on `[0, 1]` used for targets and true sources.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields))]
pub enum Preset {
    /// `amplitude · exp(−((x − center)/width)²)`
    GaussianBump { center: f64, width: f64, amplitude: f64 },
    /// `amplitude · sin(frequency · π · x)`
    Sine { frequency: f64, amplitude: f64 },
    Constant { value: f64 },
}

impl Preset {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Preset::GaussianBump {
                center,
                width,
                amplitude,
            } => {
                let s = (x - center) / width;
                amplitude * math::exp(-s * s)
            }
            Preset::Sine {
                frequency,
                amplitude,
            } => amplitude * math::sin(frequency * core::f64::consts::PI * x),
            Preset::Constant { value } => value,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        match *self {
            Preset::GaussianBump { width, .. } if !(width > 0.0) => Err(crate::Error::InvalidConfig(
                alloc::format!("gaussian-bump width must be positive, got {width}"),
            )),
            _ => Ok(()),
        }
    }
}
