use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn wavelength_from_ghz(ghz: f64) -> f64 {
    SPEED_OF_LIGHT / (ghz * 1e9)
}

/// Physical constants of the primary/secondary link, all in SI units and
/// linear scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// PU transmit power (W).
    pub p_pu: f64,
    /// PU antenna gain.
    pub g_pu: f64,
    /// ST antenna gain.
    pub g_st: f64,
    /// SR antenna gain.
    pub g_sr: f64,
    /// Carrier wavelength (m).
    pub wavelength: f64,
    /// RF-to-DC conversion efficiency.
    pub eta: f64,
    /// Reference distance (m).
    pub d0: f64,
    /// ST-SR distance (m).
    pub d_tr: f64,
    /// Noise power at SR (W).
    pub noise: f64,
    /// Harvested power needed to activate the tag (W).
    pub rho_b: f64,
    /// SNR decoding threshold (linear).
    pub tau_b: f64,
    /// Largest backscattered power tolerated by the primary network (W).
    pub p_max: f64,
}

impl Default for LinkBudget {
    /// 1.8 GHz primary band, 0.2 W / 6 dBi PUs, 1.8 dBi tags, rho_B = -36 dBm,
    /// tau_B = 3 dB, P_max = 0.2 W, d_TR = 3 m, -130 dBm/Hz noise over 1 Hz.
    /// The conversion efficiency 0.6 is an assumption, not a measured value.
    fn default() -> Self {
        Self {
            p_pu: 0.2,
            g_pu: db_to_linear(6.0),
            g_st: db_to_linear(1.8),
            g_sr: db_to_linear(1.8),
            wavelength: wavelength_from_ghz(1.8),
            eta: 0.6,
            d0: 1.0,
            d_tr: 3.0,
            noise: dbm_to_watts(-130.0),
            rho_b: dbm_to_watts(-36.0),
            tau_b: db_to_linear(3.0),
            p_max: 0.2,
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("p_pu", self.p_pu),
            ("g_pu", self.g_pu),
            ("g_st", self.g_st),
            ("g_sr", self.g_sr),
            ("wavelength", self.wavelength),
            ("d0", self.d0),
            ("d_tr", self.d_tr),
            ("noise", self.noise),
            ("rho_b", self.rho_b),
            ("tau_b", self.tau_b),
            ("p_max", self.p_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(domain(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        Ok(())
    }

    /// Constants that depend on the path-loss exponent.
    pub fn derive(&self, mu: f64) -> Result<DerivedConstants> {
        self.validate()?;
        if !(mu > 2.0) {
            return Err(domain(format!(
                "path-loss exponent must exceed 2 for a finite aggregate, got {mu}"
            )));
        }
        let lambda2 = self.wavelength * self.wavelength;
        // |Gamma_1 - Gamma_2|^2 = 1 for reflection coefficients {0, -1}.
        let delta_sigma = lambda2 * self.g_st * self.g_st / (4.0 * PI);
        let ae_sr = lambda2 * self.g_sr / (4.0 * PI);
        let p_low = 8.0 * PI * self.rho_b / (self.eta * lambda2 * self.g_st);
        let p_up = self.p_max / delta_sigma;
        let c0 = delta_sigma * ae_sr * self.d0.powf(mu) / (self.d_tr.powf(mu) * self.noise);
        let path_gain = self.p_pu * self.g_pu / (4.0 * PI * self.d0.powf(2.0 - mu));
        Ok(DerivedConstants {
            mu,
            delta_sigma,
            ae_sr,
            p_low,
            p_up,
            c0,
            tau_b: self.tau_b,
            path_gain,
        })
    }
}

/// Link constants evaluated at one path-loss exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub mu: f64,
    /// Differential radar cross section (m^2).
    pub delta_sigma: f64,
    /// Effective aperture of the SR antenna (m^2).
    pub ae_sr: f64,
    /// Smallest incident power that activates the tag (W).
    pub p_low: f64,
    /// Largest incident power compatible with the interference cap (W).
    pub p_up: f64,
    /// SNR per unit incident power and unit fading gain.
    pub c0: f64,
    pub tau_b: f64,
    /// P_PU G_PU / (4 pi d0^(2 - mu)); multiply by p_b to get p_k.
    pub path_gain: f64,
}

impl DerivedConstants {
    /// Per-pattern received-power scale p_k for busy probability `p_b`.
    pub fn p_k(&self, p_b: f64) -> f64 {
        p_b * self.path_gain
    }

    /// Whether any incident power satisfies both the energy and interference
    /// constraints.
    pub fn has_operating_window(&self) -> bool {
        self.p_low < self.p_up
    }
}
