//! System parameters, mode ordering and derived dimensionless quantities.
//!
//! Every rate is expressed in units of the cavity-1 damping rate `kappa1`,
//! which is canonically 1. Only the detunings and their difference enter the
//! dynamics; absolute cavity and laser frequencies never appear.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Above this value of `gm / omega_m` the neglected cubic interaction is no
/// longer obviously small and [`System::weak_coupling_warning`] is raised.
pub const WEAK_COUPLING_THRESHOLD: f64 = 1e-2;

/// Position of each operator in the six-component state vector.
///
/// Pairs `(A1, A1Dag)`, `(B, BDag)` and `(A2, A2Dag)` are mutually adjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    A1 = 0,
    A1Dag = 1,
    B = 2,
    BDag = 3,
    A2 = 4,
    A2Dag = 5,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::A1,
        Mode::A1Dag,
        Mode::B,
        Mode::BDag,
        Mode::A2,
        Mode::A2Dag,
    ];

    #[inline]
    pub const fn index(self) -> usize {
        self as usize
    }

    /// The adjoint partner of this mode.
    pub const fn adjoint(self) -> Mode {
        match self {
            Mode::A1 => Mode::A1Dag,
            Mode::A1Dag => Mode::A1,
            Mode::B => Mode::BDag,
            Mode::BDag => Mode::B,
            Mode::A2 => Mode::A2Dag,
            Mode::A2Dag => Mode::A2,
        }
    }

    /// Index of the adjoint partner (`i*` in the pairing relations).
    #[inline]
    pub const fn adjoint_index(i: usize) -> usize {
        i ^ 1
    }
}

/// Which of the two optical cavities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cavity {
    One,
    Two,
}

/// Raw physical parameters as read from a config file or the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub kappa1: f64,
    pub kappa2: f64,
    pub gm: f64,
    pub omega_m: f64,
    pub gamma_m: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub e1: f64,
    pub e2: f64,
    /// Inter-cavity tunneling strength.
    pub j: f64,
    pub n_th: f64,
}

/// Quantities computed once from validated parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedQuantities {
    /// `gamma_m / kappa1`.
    pub gamma_ratio: f64,
    /// Effective drive intensity `(gm / omega_m) * (E1 / kappa1)`.
    pub je1: f64,
    /// Effective drive intensity `(gm / omega_m) * (E2 / kappa1)`.
    pub je2: f64,
    /// `omega_c2 - omega_c1`, equal to `delta2 - delta1` for a common laser.
    pub cavity_freq_gap: f64,
}

impl DerivedQuantities {
    pub fn compute(p: &SystemParams) -> Self {
        let scale = p.gm / p.omega_m / p.kappa1;
        DerivedQuantities {
            gamma_ratio: p.gamma_m / p.kappa1,
            je1: scale * p.e1,
            je2: scale * p.e2,
            cavity_freq_gap: p.delta2 - p.delta1,
        }
    }
}

/// Validated parameters together with their derived quantities.
///
/// Immutable once built, so it can be shared freely between sweep workers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct System {
    params: SystemParams,
    derived: DerivedQuantities,
}

pub const CONFIG_KEYS: [&str; 11] = [
    "kappa1", "kappa2", "gm", "omega_m", "gamma_m", "delta1", "delta2", "E1", "E2", "J", "n_th",
];

impl SystemParams {
    /// Parameters with both drives resonant on the red sideband and no
    /// tunneling, in `kappa1 = 1` units.
    pub fn resonant(omega_m: f64, kappa2: f64, je1: f64, je2: f64) -> Self {
        let gm = 1e-5;
        SystemParams {
            kappa1: 1.0,
            kappa2,
            gm,
            omega_m,
            gamma_m: 1e-3,
            delta1: omega_m,
            delta2: omega_m,
            e1: je1 * omega_m / gm,
            e2: je2 * omega_m / gm,
            j: 0.0,
            n_th: 100.0,
        }
    }

    pub fn validate(self) -> Result<System> {
        for (name, v) in self.named_values() {
            if !v.is_finite() {
                return Err(Error::NonFinite { name });
            }
        }
        for (name, v) in [
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("omega_m", self.omega_m),
            ("gamma_m", self.gamma_m),
        ] {
            if v <= 0.0 {
                return Err(Error::NonPositiveRate { name, value: v });
            }
        }
        if self.delta1 == 0.0 {
            return Err(Error::ZeroDetuning { name: "delta1" });
        }
        if self.delta2 == 0.0 {
            return Err(Error::ZeroDetuning { name: "delta2" });
        }
        for (name, v) in [
            ("gm", self.gm),
            ("E1", self.e1),
            ("E2", self.e2),
            ("J", self.j),
            ("n_th", self.n_th),
        ] {
            if v < 0.0 {
                return Err(Error::NegativeAmplitude { name, value: v });
            }
        }
        Ok(System {
            params: self,
            derived: DerivedQuantities::compute(&self),
        })
    }

    /// Exchange the roles of the two cavities.
    pub fn swap12(self) -> Self {
        SystemParams {
            kappa1: self.kappa2,
            kappa2: self.kappa1,
            delta1: self.delta2,
            delta2: self.delta1,
            e1: self.e2,
            e2: self.e1,
            ..self
        }
    }

    /// Cavity 2 undriven and decoupled: the one-cavity reference system.
    pub fn single_cavity(self) -> Self {
        SystemParams {
            e2: 0.0,
            j: 0.0,
            ..self
        }
    }

    pub fn named_values(&self) -> [(&'static str, f64); 11] {
        [
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("gm", self.gm),
            ("omega_m", self.omega_m),
            ("gamma_m", self.gamma_m),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("E1", self.e1),
            ("E2", self.e2),
            ("J", self.j),
            ("n_th", self.n_th),
        ]
    }

    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "kappa1" => &mut self.kappa1,
            "kappa2" => &mut self.kappa2,
            "gm" => &mut self.gm,
            "omega_m" => &mut self.omega_m,
            "gamma_m" => &mut self.gamma_m,
            "delta1" => &mut self.delta1,
            "delta2" => &mut self.delta2,
            "E1" => &mut self.e1,
            "E2" => &mut self.e2,
            "J" => &mut self.j,
            "n_th" => &mut self.n_th,
            _ => return None,
        })
    }

    /// Parse the plain-text `key = value` format. Blank lines and lines
    /// starting with `#` are ignored; every key must appear exactly once.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut p = SystemParams {
            kappa1: f64::NAN,
            kappa2: f64::NAN,
            gm: f64::NAN,
            omega_m: f64::NAN,
            gamma_m: f64::NAN,
            delta1: f64::NAN,
            delta2: f64::NAN,
            e1: f64::NAN,
            e2: f64::NAN,
            j: f64::NAN,
            n_th: f64::NAN,
        };
        let mut seen = [false; 11];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Config {
                line: lineno + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            let idx = CONFIG_KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| err(format!("unknown key `{key}`")))?;
            if seen[idx] {
                return Err(err(format!("duplicate key `{key}`")));
            }
            seen[idx] = true;
            let v: f64 = value
                .parse()
                .map_err(|_| err(format!("cannot parse `{value}` as a number")))?;
            *p.slot(key).expect("key listed in CONFIG_KEYS") = v;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::MissingKey(CONFIG_KEYS[i]));
        }
        Ok(p)
    }

    pub fn from_config_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_config_str(&text)
    }

    /// Set a field by its config-file key.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = self
            .slot(key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter `{key}`")))?;
        *slot = value;
        Ok(())
    }
}

impl fmt::Display for SystemParams {
    /// Renders in the config-file format, one key per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.named_values() {
            writeln!(f, "{k} = {v:e}")?;
        }
        Ok(())
    }
}

impl FromStr for SystemParams {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_config_str(s)
    }
}

impl System {
    pub fn new(params: SystemParams) -> Result<Self> {
        params.validate()
    }

    #[inline]
    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    #[inline]
    pub fn derived(&self) -> &DerivedQuantities {
        &self.derived
    }

    /// Set when `gm / omega_m` exceeds [`WEAK_COUPLING_THRESHOLD`].
    pub fn weak_coupling_warning(&self) -> bool {
        self.params.gm / self.params.omega_m > WEAK_COUPLING_THRESHOLD
    }

    /// Largest angular frequency appearing in the drift coefficients.
    pub fn max_frequency(&self) -> f64 {
        let p = &self.params;
        p.omega_m
            .max(p.delta1.abs())
            .max(p.delta2.abs())
            .max((p.delta2 - p.delta1).abs())
    }

    /// Integrator step cap: one twentieth of the fastest period.
    pub fn max_step(&self) -> f64 {
        std::f64::consts::TAU / self.max_frequency() / 20.0
    }

    pub fn mechanical_period(&self) -> f64 {
        std::f64::consts::TAU / self.params.omega_m
    }

    pub fn kappa(&self, c: Cavity) -> f64 {
        match c {
            Cavity::One => self.params.kappa1,
            Cavity::Two => self.params.kappa2,
        }
    }

    pub fn drive(&self, c: Cavity) -> f64 {
        match c {
            Cavity::One => self.params.e1,
            Cavity::Two => self.params.e2,
        }
    }

    pub fn detuning(&self, c: Cavity) -> f64 {
        match c {
            Cavity::One => self.params.delta1,
            Cavity::Two => self.params.delta2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn detuned_pair() -> SystemParams {
        SystemParams {
            kappa1: 1.0,
            kappa2: 5.0,
            gm: 1e-5,
            omega_m: 50.0,
            gamma_m: 1e-3,
            delta1: 45.0,
            delta2: 55.0,
            e1: 4.5e6,
            e2: 5.5e6,
            j: 1.0,
            n_th: 100.0,
        }
    }

    #[test]
    fn accepts_detuned_pair() {
        let sys = detuned_pair().validate().unwrap();
        assert!(!sys.weak_coupling_warning());
        assert_eq!(sys.derived().cavity_freq_gap, 10.0);
    }

    #[test]
    fn rejects_zero_detuning() {
        let p = SystemParams { delta1: 0.0, ..detuned_pair() };
        assert_eq!(p.validate(), Err(Error::ZeroDetuning { name: "delta1" }));
        let p = SystemParams { delta2: 0.0, ..detuned_pair() };
        assert_eq!(p.validate(), Err(Error::ZeroDetuning { name: "delta2" }));
    }

    #[test]
    fn rejects_bad_rates_and_amplitudes() {
        let p = SystemParams { gamma_m: 0.0, ..detuned_pair() };
        assert!(matches!(p.validate(), Err(Error::NonPositiveRate { name: "gamma_m", .. })));
        let p = SystemParams { kappa2: -1.0, ..detuned_pair() };
        assert!(matches!(p.validate(), Err(Error::NonPositiveRate { name: "kappa2", .. })));
        let p = SystemParams { e2: -1.0, ..detuned_pair() };
        assert!(matches!(p.validate(), Err(Error::NegativeAmplitude { name: "E2", .. })));
        let p = SystemParams { n_th: f64::NAN, ..detuned_pair() };
        assert!(matches!(p.validate(), Err(Error::NonFinite { name: "n_th" })));
    }

    #[test]
    fn effective_intensity() {
        let p = SystemParams {
            gm: 1e-5,
            omega_m: 100.0,
            e1: 1e7,
            e2: 0.0,
            ..detuned_pair()
        };
        let d = p.validate().unwrap();
        assert!((d.derived().je1 - 1.0).abs() < 1e-12);
        assert_eq!(d.derived().je2, 0.0);
    }

    #[test]
    fn weak_coupling_flag() {
        let p = SystemParams { gm: 1.0, omega_m: 50.0, ..detuned_pair() };
        assert!(p.validate().unwrap().weak_coupling_warning());
    }

    #[test]
    fn mode_adjoints() {
        for m in Mode::ALL {
            assert_eq!(m.adjoint().adjoint(), m);
            assert_eq!(Mode::adjoint_index(m.index()), m.adjoint().index());
        }
    }

    #[test]
    fn config_round_trip_and_errors() {
        let p = detuned_pair();
        let text = p.to_string();
        assert_eq!(SystemParams::from_config_str(&text).unwrap(), p);

        let bad = format!("{text}foo = 1\n");
        assert!(matches!(
            SystemParams::from_config_str(&bad),
            Err(Error::Config { line: 12, .. })
        ));
        let dup = format!("{text}gm = 1\n");
        assert!(matches!(SystemParams::from_config_str(&dup), Err(Error::Config { .. })));
        let missing: String = text.lines().filter(|l| !l.starts_with("n_th")).map(|l| format!("{l}\n")).collect();
        assert_eq!(SystemParams::from_config_str(&missing), Err(Error::MissingKey("n_th")));
        let with_comments = format!("# header\n\n{text}");
        assert_eq!(SystemParams::from_config_str(&with_comments).unwrap(), p);
    }

    proptest! {
        #[test]
        fn swap_is_involution(k2 in 0.1f64..50.0, d1 in -200.0f64..200.0, d2 in -200.0f64..200.0,
                              e1 in 0.0f64..1e8, e2 in 0.0f64..1e8) {
            let p = SystemParams { kappa2: k2, delta1: d1, delta2: d2, e1, e2, ..detuned_pair() };
            prop_assert_eq!(p.swap12().swap12(), p);
        }

        #[test]
        fn derived_is_pure(e1 in 0.0f64..1e8, om in 1.0f64..1e3) {
            let p = SystemParams { e1, omega_m: om, ..detuned_pair() };
            let a = DerivedQuantities::compute(&p);
            let b = DerivedQuantities::compute(&p);
            prop_assert_eq!(a.je1.to_bits(), b.je1.to_bits());
            prop_assert_eq!(a.gamma_ratio.to_bits(), b.gamma_ratio.to_bits());
            prop_assert!(a.je1 >= 0.0);
            prop_assert_eq!(a.je1 == 0.0, e1 == 0.0);
        }
    }
}
