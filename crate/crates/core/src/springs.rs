//! Tunable spring laws.
//!
//! Every model maps a compression `x` (metres, positive when the spring is
//! squeezed) to a restoring force (newtons, positive when pushing the two
//! ends apart). Models are immutable values; evaluation is pure.

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};

/// Two-chamber pneumatic cylinder with dead volumes on both sides.
///
/// Isothermal ideal gas in each chamber. The rear chamber volume change is
/// taken as `A_v·x`, matching the closed form used on the hopper bench even
/// though the rear piston face is `A_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PneumaticSpringParams {
    /// Piston area facing the upper chamber (m²).
    pub area_upper: f64,
    /// Piston area facing the rear chamber (m²).
    pub area_rear: f64,
    /// Upper chamber pressure at rest (Pa).
    pub pressure_upper: f64,
    /// Rear chamber pressure at rest (Pa).
    pub pressure_rear: f64,
    /// Upper chamber volume at rest (m³).
    pub volume_upper: f64,
    /// Rear chamber volume at rest (m³).
    pub volume_rear: f64,
    /// Total cylinder volume (m³).
    pub volume_total: f64,
    /// Dead volume attached to the upper chamber (m³).
    pub dead_upper: f64,
    /// Dead volume attached to the rear chamber (m³).
    pub dead_rear: f64,
    /// Maximum compression (m).
    pub max_compression: f64,
}

impl PneumaticSpringParams {
    /// Bench values of the hopper cylinder with the given upper dead volume.
    pub fn hopper_reference(dead_upper: f64) -> Self {
        Self {
            area_upper: 7.9e-5,
            area_rear: 6.6e-5,
            pressure_upper: 2.5e5,
            pressure_rear: 3.0e5,
            volume_upper: 6.3e-6,
            volume_rear: 0.0,
            volume_total: 6.3e-6,
            dead_upper,
            dead_rear: 4.0e-6,
            max_compression: 0.06,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.area_upper * self.pressure_upper * (self.volume_upper + self.dead_upper)
    }

    pub fn beta(&self) -> f64 {
        self.dead_upper + self.volume_total
    }

    pub fn gamma(&self) -> f64 {
        self.area_rear * self.pressure_rear * (self.volume_rear + self.dead_rear)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_upper", self.area_upper),
            ("area_rear", self.area_rear),
            ("pressure_upper", self.pressure_upper),
            ("pressure_rear", self.pressure_rear),
            ("volume_total", self.volume_total),
            ("max_compression", self.max_compression),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("pneumatic {name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("volume_upper", self.volume_upper),
            ("volume_rear", self.volume_rear),
            ("dead_upper", self.dead_upper),
            ("dead_rear", self.dead_rear),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("pneumatic {name} must be >= 0, got {v}")));
            }
        }
        if self.volume_upper > self.volume_total {
            return Err(invalid("pneumatic volume_upper exceeds volume_total"));
        }
        if self.area_upper * self.max_compression >= self.beta() {
            return Err(invalid(
                "pneumatic max_compression reaches the end of the upper chamber",
            ));
        }
        Ok(())
    }

    fn check_range(&self, x: f64) -> Result<()> {
        if !(0.0..=self.max_compression).contains(&x) {
            return Err(domain(format!(
                "compression {x} m outside [0, {}] m",
                self.max_compression
            )));
        }
        let upper = self.beta() - self.area_upper * x;
        if upper <= 0.0 {
            return Err(domain("upper chamber volume vanished"));
        }
        if self.gamma() != 0.0 && self.area_upper * x + self.dead_rear <= 0.0 {
            return Err(domain("rear chamber volume vanished"));
        }
        Ok(())
    }

    // Rear term is identically zero when the rear chamber holds no gas.
    fn rear(&self, x: f64, power: i32) -> f64 {
        let g = self.gamma();
        if g == 0.0 {
            0.0
        } else {
            g / (self.area_upper * x + self.dead_rear).powi(power)
        }
    }

    pub fn force(&self, x: f64) -> Result<f64> {
        self.check_range(x)?;
        Ok(self.alpha() / (self.beta() - self.area_upper * x) - self.rear(x, 1))
    }

    pub fn stiffness(&self, x: f64) -> Result<f64> {
        self.check_range(x)?;
        let a = self.area_upper;
        let upper = self.beta() - a * x;
        Ok(self.alpha() * a / (upper * upper) + a * self.rear(x, 2))
    }

    /// Analytic second derivative d²F/dx².
    pub fn curvature(&self, x: f64) -> Result<f64> {
        self.check_range(x)?;
        let a = self.area_upper;
        let upper = self.beta() - a * x;
        Ok(2.0 * a * a * (self.alpha() / upper.powi(3) - self.rear(x, 3)))
    }

    /// Stored energy relative to `x = 0` (J).
    pub fn potential(&self, x: f64) -> Result<f64> {
        self.check_range(x)?;
        let a = self.area_upper;
        let up = -(self.alpha() / a) * ((self.beta() - a * x) / self.beta()).ln();
        let rear = if self.gamma() == 0.0 {
            0.0
        } else {
            -(self.gamma() / a) * ((a * x + self.dead_rear) / self.dead_rear).ln()
        };
        Ok(up + rear)
    }
}

/// Sign of the spring curve's second derivative over an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Concavity {
    Positive,
    Negative,
    Mixed,
}

/// Classifies d²F/dx² over `[lo, hi]` by second central differences at
/// `samples` evenly spaced interior points.
pub fn concavity(
    spring: &PneumaticSpringParams,
    lo: f64,
    hi: f64,
    samples: usize,
) -> Result<Concavity> {
    if !(hi > lo) || samples < 1 {
        return Err(domain("empty concavity interval"));
    }
    let h = ((hi - lo) * 1e-3).min(1e-4);
    let (mut pos, mut neg) = (false, false);
    for i in 0..samples {
        let x = lo + h + (hi - lo - 2.0 * h) * (i as f64 + 0.5) / samples as f64;
        let d2 = (spring.force(x + h)? - 2.0 * spring.force(x)? + spring.force(x - h)?) / (h * h);
        if d2 > 0.0 {
            pos = true;
        } else if d2 < 0.0 {
            neg = true;
        }
    }
    Ok(match (pos, neg) {
        (true, false) => Concavity::Positive,
        (false, true) => Concavity::Negative,
        _ => Concavity::Mixed,
    })
}

/// Magnet pair in repulsion with a coil perturbing the field.
///
/// `F(d, I) = (k_m + c_I·I) / d⁴`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagneticSpringParams {
    /// Repulsion coefficient (N·m⁴).
    pub repulsion: f64,
    /// Coil coupling (N·m⁴/A).
    pub coil_coupling: f64,
    /// Current rating (A); admissible currents satisfy |I| <= max_current.
    pub max_current: f64,
    /// Smallest allowed gap (m).
    pub min_gap: f64,
}

impl MagneticSpringParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.repulsion > 0.0 && self.repulsion.is_finite()) {
            return Err(invalid("magnetic repulsion must be positive"));
        }
        if !(self.min_gap > 0.0) {
            return Err(invalid("magnetic min_gap must be positive"));
        }
        if !(self.max_current >= 0.0) {
            return Err(invalid("magnetic max_current must be >= 0"));
        }
        if self.repulsion - self.coil_coupling.abs() * self.max_current <= 0.0 {
            return Err(invalid("coil can reverse the repulsion within rated current"));
        }
        Ok(())
    }

    fn coefficient(&self, current: f64) -> Result<f64> {
        if current.abs() > self.max_current * (1.0 + 1e-12) {
            return Err(domain(format!(
                "current {current} A exceeds rating {} A",
                self.max_current
            )));
        }
        Ok(self.repulsion + self.coil_coupling * current)
    }

    fn check_gap(&self, gap: f64) -> Result<()> {
        if !(gap >= self.min_gap) {
            return Err(domain(format!("gap {gap} m below minimum {} m", self.min_gap)));
        }
        Ok(())
    }

    pub fn force(&self, gap: f64, current: f64) -> Result<f64> {
        self.check_gap(gap)?;
        Ok(self.coefficient(current)? / gap.powi(4))
    }

    /// Stiffness against closing the gap, `-dF/dd`.
    pub fn stiffness(&self, gap: f64, current: f64) -> Result<f64> {
        self.check_gap(gap)?;
        Ok(4.0 * self.coefficient(current)? / gap.powi(5))
    }

    /// Gap at which the repulsion balances `load`.
    pub fn equilibrium_gap(&self, load: f64, current: f64) -> Result<f64> {
        if !(load > 0.0) {
            return Err(domain("load must be positive"));
        }
        let gap = (self.coefficient(current)? / load).powf(0.25);
        self.check_gap(gap)?;
        Ok(gap)
    }

    /// Peak-to-peak equilibrium gap change between `-I_max` and `+I_max`,
    /// relative to the gap at zero current.
    pub fn modulation(&self, load: f64) -> Result<f64> {
        let hi = self.equilibrium_gap(load, self.max_current)?;
        let lo = self.equilibrium_gap(load, -self.max_current)?;
        let mid = self.equilibrium_gap(load, 0.0)?;
        Ok((hi - lo) / mid)
    }
}

/// Free function form of [`MagneticSpringParams::force`].
pub fn magnetic_force(p: &MagneticSpringParams, gap: f64, current: f64) -> Result<f64> {
    p.force(gap, current)
}

/// Finds the coil coupling for which ±`max_current` shifts the equilibrium
/// gap under `load` by `target_change` (peak to peak, relative).
pub fn calibrate_magnetic(p: &MagneticSpringParams, load: f64, target_change: f64) -> Result<f64> {
    if !(target_change >= 0.0 && target_change.is_finite()) {
        return Err(domain("target change must be a non-negative fraction"));
    }
    if target_change == 0.0 {
        return Ok(0.0);
    }
    if !(p.max_current > 0.0) {
        return Err(Error::NoSolution("zero current rating cannot modulate".into()));
    }
    let with = |c: f64| MagneticSpringParams { coil_coupling: c, ..*p };
    let change = |c: f64| -> f64 {
        let q = with(c);
        let k = p.repulsion;
        let hi = ((k + c * q.max_current) / load).powf(0.25);
        let lo = ((k - c * q.max_current) / load).max(0.0).powf(0.25);
        let mid = (k / load).powf(0.25);
        (hi - lo) / mid
    };
    let mut lo = 0.0;
    let mut hi = p.repulsion / p.max_current;
    if change(hi) <= target_change {
        return Err(Error::NoSolution(format!(
            "target change {target_change} would reverse the repulsion"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if change(mid) < target_change {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    let q = with(c);
    q.validate()
        .map_err(|_| Error::NoSolution("coupling breaks the repulsion invariant".into()))?;
    q.equilibrium_gap(load, -p.max_current)
        .map_err(|_| Error::NoSolution("equilibrium gap falls below the minimum".into()))?;
    Ok(c)
}

/// Helical spring with a jack blocking part of the coils.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JackSpringParams {
    /// Stiffness of the whole spring (N/m).
    pub k_full: f64,
    /// Free length (m).
    pub total_length: f64,
    /// Active fraction of the coils, in (0, 1].
    pub tap: f64,
    /// Screwing out on one side screws in on the other, keeping the length.
    pub fixed_length: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JackEffective {
    pub k_eff: f64,
    pub external_length: f64,
}

impl JackSpringParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_full > 0.0) || !(self.total_length > 0.0) {
            return Err(invalid("jack spring stiffness and length must be positive"));
        }
        if !(self.tap > 0.0 && self.tap <= 1.0) {
            return Err(domain(format!("jack tap {} outside (0, 1]", self.tap)));
        }
        Ok(())
    }
}

/// Effective stiffness `k_full / tap`. The standard jack shortens linearly,
/// `L·(1 + tap)/2`; the fixed-length design keeps `L`.
pub fn jack_effective(p: &JackSpringParams) -> Result<JackEffective> {
    if !(p.tap > 0.0 && p.tap <= 1.0) {
        return Err(domain(format!("jack tap {} outside (0, 1]", p.tap)));
    }
    let external_length = if p.fixed_length {
        p.total_length
    } else {
        p.total_length * (1.0 + p.tap) / 2.0
    };
    Ok(JackEffective {
        k_eff: p.k_full / p.tap,
        external_length,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpringParams {
    pub k: f64,
    pub rest_length: f64,
}

/// Magnetic spring used as a compression element: gap = `rest_gap - x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagneticLeg {
    pub params: MagneticSpringParams,
    pub current: f64,
    pub rest_gap: f64,
}

/// The knob a tuning controller turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tunable {
    /// Upper chamber rest pressure (Pa).
    Pressure,
    /// Jack tap fraction.
    JackTap,
    /// Coil current (A).
    CoilCurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpringModel {
    Linear(LinearSpringParams),
    Pneumatic(PneumaticSpringParams),
    Magnetic(MagneticLeg),
    Jack(JackSpringParams),
}

impl SpringModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            SpringModel::Linear(p) => {
                if p.k > 0.0 && p.rest_length > 0.0 {
                    Ok(())
                } else {
                    Err(invalid("linear spring needs k > 0 and rest_length > 0"))
                }
            }
            SpringModel::Pneumatic(p) => p.validate(),
            SpringModel::Magnetic(m) => {
                m.params.validate()?;
                m.params.coefficient(m.current)?;
                if m.rest_gap <= m.params.min_gap {
                    return Err(invalid("magnetic rest gap must exceed min_gap"));
                }
                Ok(())
            }
            SpringModel::Jack(p) => p.validate(),
        }
    }

    /// Admissible compression interval.
    pub fn working_range(&self) -> (f64, f64) {
        match self {
            SpringModel::Linear(p) => (f64::NEG_INFINITY, p.rest_length),
            SpringModel::Pneumatic(p) => (0.0, p.max_compression),
            SpringModel::Magnetic(m) => (f64::NEG_INFINITY, m.rest_gap - m.params.min_gap),
            SpringModel::Jack(p) => match jack_effective(p) {
                Ok(e) => (f64::NEG_INFINITY, e.external_length),
                Err(_) => (0.0, 0.0),
            },
        }
    }

    fn check(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.working_range();
        if x.is_nan() || x < lo || x > hi {
            return Err(domain(format!("compression {x} m outside [{lo}, {hi}] m")));
        }
        Ok(())
    }

    pub fn force(&self, x: f64) -> Result<f64> {
        match self {
            SpringModel::Linear(p) => {
                self.check(x)?;
                Ok(p.k * x)
            }
            SpringModel::Pneumatic(p) => p.force(x),
            SpringModel::Magnetic(m) => {
                self.check(x)?;
                m.params.force(m.rest_gap - x, m.current)
            }
            SpringModel::Jack(p) => {
                self.check(x)?;
                Ok(jack_effective(p)?.k_eff * x)
            }
        }
    }

    pub fn tangent_stiffness(&self, x: f64) -> Result<f64> {
        match self {
            SpringModel::Linear(p) => {
                self.check(x)?;
                Ok(p.k)
            }
            SpringModel::Pneumatic(p) => p.stiffness(x),
            SpringModel::Magnetic(m) => {
                self.check(x)?;
                m.params.stiffness(m.rest_gap - x, m.current)
            }
            SpringModel::Jack(p) => {
                self.check(x)?;
                Ok(jack_effective(p)?.k_eff)
            }
        }
    }

    /// Stored energy relative to `x = 0` (J).
    pub fn potential(&self, x: f64) -> Result<f64> {
        match self {
            SpringModel::Linear(p) => {
                self.check(x)?;
                Ok(0.5 * p.k * x * x)
            }
            SpringModel::Pneumatic(p) => p.potential(x),
            SpringModel::Magnetic(m) => {
                self.check(x)?;
                let c = m.params.coefficient(m.current)?;
                let d = m.rest_gap - x;
                Ok(c / 3.0 * (1.0 / d.powi(3) - 1.0 / m.rest_gap.powi(3)))
            }
            SpringModel::Jack(p) => {
                self.check(x)?;
                Ok(0.5 * jack_effective(p)?.k_eff * x * x)
            }
        }
    }

    pub fn tunable_value(&self, knob: Tunable) -> Option<f64> {
        match (self, knob) {
            (SpringModel::Pneumatic(p), Tunable::Pressure) => Some(p.pressure_upper),
            (SpringModel::Jack(p), Tunable::JackTap) => Some(p.tap),
            (SpringModel::Magnetic(m), Tunable::CoilCurrent) => Some(m.current),
            _ => None,
        }
    }

    pub fn with_tunable(&self, knob: Tunable, value: f64) -> Result<SpringModel> {
        let out = match (*self, knob) {
            (SpringModel::Pneumatic(p), Tunable::Pressure) => SpringModel::Pneumatic(PneumaticSpringParams {
                pressure_upper: value,
                ..p
            }),
            (SpringModel::Jack(p), Tunable::JackTap) => SpringModel::Jack(JackSpringParams { tap: value, ..p }),
            (SpringModel::Magnetic(m), Tunable::CoilCurrent) => {
                SpringModel::Magnetic(MagneticLeg { current: value, ..m })
            }
            _ => return Err(invalid(format!("{knob:?} does not apply to this spring"))),
        };
        out.validate()?;
        Ok(out)
    }

    /// Direction in which raising the knob changes stiffness (+1 stiffer).
    pub fn stiffening_sign(knob: Tunable) -> f64 {
        match knob {
            Tunable::Pressure | Tunable::CoilCurrent => 1.0,
            Tunable::JackTap => -1.0,
        }
    }
}

/// Free function form of [`SpringModel::tangent_stiffness`].
pub fn tangent_stiffness(model: &SpringModel, x: f64) -> Result<f64> {
    model.tangent_stiffness(x)
}

/// Free function form of [`PneumaticSpringParams::force`].
pub fn pneumatic_force(p: &PneumaticSpringParams, x: f64) -> Result<f64> {
    p.force(x)
}
