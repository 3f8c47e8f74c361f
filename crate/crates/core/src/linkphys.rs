//! Photon-pair source, channel loss and detection.
//!
//! The delivered state is modelled in the Fock space truncated at two
//! emitted pairs. Each rail of each side passes through a pure-loss channel;
//! each station owns two threshold detectors with independent dark clicks.
//! A round is accepted when exactly one detector fires on each side.

use serde::{Deserialize, Serialize};

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const LIGHT_SPEED: f64 = 2.997_924_58e8;

/// Probability that the source emits `n` pairs into a mode with mean photon
/// number `ns`.
pub fn emission_prob(ns: f64, n: u32) -> f64 {
    if ns == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ratio = ns / (ns + 1.0);
    (n as f64 + 1.0) * ratio.powi(n as i32) / (ns + 1.0).powi(2)
}

/// Total probability of more than `k` pairs, in closed form.
pub fn emission_tail(ns: f64, k: u32) -> f64 {
    if ns == 0.0 {
        return 0.0;
    }
    // sum_{n>k} (n+1) q^n (1-q)^2 with q = ns/(ns+1)
    let q = ns / (ns + 1.0);
    let m = k as f64 + 1.0;
    q.powf(m) * (m + 1.0 - m * q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceParams {
    pub mean_photon_number: f64,
    pub repetition_rate: f64,
    pub sign: i8,
}

impl Default for SourceParams {
    fn default() -> Self {
        Self {
            mean_photon_number: 0.0078,
            repetition_rate: 1e9,
            sign: -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsParams {
    pub tx_radius: f64,
    pub rx_radius: f64,
    pub wavelength: f64,
    pub tx_efficiency: f64,
    pub rx_efficiency: f64,
}

impl Default for OpticsParams {
    fn default() -> Self {
        Self {
            tx_radius: 0.1,
            rx_radius: 1.0,
            wavelength: 737e-9,
            tx_efficiency: 0.7,
            rx_efficiency: 0.7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArmChannel {
    pub transmissivity: f64,
    pub dark_click_prob: f64,
}

impl ArmChannel {
    pub fn new(transmissivity: f64, dark_click_prob: f64) -> Self {
        Self {
            transmissivity,
            dark_click_prob,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairOutcome {
    pub success_prob: f64,
    pub fidelity: f64,
    pub edr: f64,
}

/// Far-field diffraction-limited transmissivity between two circular
/// apertures, clamped at 1.
pub fn aperture_transmissivity(r_tx: f64, r_rx: f64, wavelength: f64, range: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let num = (pi * r_tx * r_tx) * (pi * r_rx * r_rx);
    let den = (wavelength * range).powi(2);
    if den == 0.0 {
        return 1.0;
    }
    (num / den).min(1.0)
}

pub fn free_space_transmissivity(optics: &OpticsParams, slant_range: f64) -> f64 {
    aperture_transmissivity(optics.tx_radius, optics.rx_radius, optics.wavelength, slant_range)
}

pub fn arm_transmissivity(free_space: f64, atmospheric: f64, eta_t: f64, eta_r: f64) -> f64 {
    free_space * atmospheric * eta_t * eta_r
}

/// Per-gate probability that background light fires a detector.
///
/// `irradiance` is in µW cm⁻² sr⁻¹ nm⁻¹, `gate` in seconds, `bandwidth` in
/// nm, `fov` in steradians, lengths in meters.
pub fn dark_click_prob(irradiance: f64, gate: f64, bandwidth: f64, fov: f64, rx_radius: f64, wavelength: f64) -> f64 {
    // µW/cm² -> W/m²: 1e-6 * 1e4
    let watts = irradiance * 1e-2 * bandwidth * fov * std::f64::consts::PI * rx_radius * rx_radius;
    let photon_energy = PLANCK * LIGHT_SPEED / wavelength;
    (watts * gate / photon_energy).clamp(0.0, 1.0)
}

/// Probability that exactly one of a station's two detectors fires when
/// `n1` and `n2` photons arrive on its rails.
fn one_click(n1: u32, n2: u32, eta: f64, pd: f64) -> f64 {
    let c1 = 1.0 - (1.0 - eta).powi(n1 as i32) * (1.0 - pd);
    let c2 = 1.0 - (1.0 - eta).powi(n2 as i32) * (1.0 - pd);
    c1 * (1.0 - c2) + c2 * (1.0 - c1)
}

/// Rail occupations (a1, a2, b1, b2) of each truncated-state component,
/// with its share of the n-pair weight.
const COMPONENTS: [(u32, [u32; 4], f64); 6] = [
    (0, [0, 0, 0, 0], 1.0),
    (1, [1, 0, 0, 1], 0.5),
    (1, [0, 1, 1, 0], 0.5),
    (2, [2, 0, 0, 2], 1.0 / 3.0),
    (2, [1, 1, 1, 1], 1.0 / 3.0),
    (2, [0, 2, 2, 0], 1.0 / 3.0),
];

/// Success probability and fidelity of one distribution attempt.
///
/// The Bell component of the accepted state is the single-pair term whose
/// photons both survive with no dark click on either side; every other
/// accepted pattern contributes noise. The sign of the source state only
/// flips a relative phase inside the single-pair term and so drops out.
pub fn end_to_end_outcome(source: &SourceParams, arm1: &ArmChannel, arm2: &ArmChannel) -> PairOutcome {
    let ns = source.mean_photon_number;
    let p: [f64; 3] = [emission_prob(ns, 0), emission_prob(ns, 1), emission_prob(ns, 2)];
    let z: f64 = p.iter().sum();
    let (e1, d1) = (arm1.transmissivity, arm1.dark_click_prob);
    let (e2, d2) = (arm2.transmissivity, arm2.dark_click_prob);

    let accept: f64 = COMPONENTS
        .iter()
        .map(|&(n, [a1, a2, b1, b2], share)| {
            p[n as usize] * share / z * one_click(a1, a2, e1, d1) * one_click(b1, b2, e2, d2)
        })
        .sum();
    let bell = p[1] / z * e1 * (1.0 - d1) * e2 * (1.0 - d2);
    let success_prob = accept.clamp(0.0, 1.0);
    let fidelity = if accept > 0.0 {
        (bell / accept).clamp(0.0, 1.0)
    } else {
        0.0
    };
    PairOutcome {
        success_prob,
        fidelity,
        edr: source.repetition_rate * success_prob,
    }
}

/// Arms of a relayed distribution: the second photon reaches the far station
/// through an inter-satellite hop and a mirror.
pub fn reflection_arms(
    src_to_gs1: ArmChannel,
    src_to_relay_free_space: f64,
    mirror_efficiency: f64,
    relay_to_gs2: ArmChannel,
) -> (ArmChannel, ArmChannel) {
    let arm2 = ArmChannel {
        transmissivity: src_to_relay_free_space * mirror_efficiency * relay_to_gs2.transmissivity,
        dark_click_prob: relay_to_gs2.dark_click_prob,
    };
    (src_to_gs1, arm2)
}

pub fn rate_fidelity_curve(
    ns_grid: &[f64],
    source: &SourceParams,
    arm1: &ArmChannel,
    arm2: &ArmChannel,
) -> Vec<(f64, f64, f64)> {
    ns_grid
        .iter()
        .map(|&ns| {
            let src = SourceParams {
                mean_photon_number: ns,
                ..*source
            };
            let o = end_to_end_outcome(&src, arm1, arm2);
            (ns, o.edr, o.fidelity)
        })
        .collect()
}
