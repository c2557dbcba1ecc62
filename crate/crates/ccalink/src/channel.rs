//! Frequency-selective, time-varying MIMO channel: a tapped delay line with
//! an exponential power-delay profile, sum-of-sinusoids Jakes Doppler per
//! tap, and circularly symmetric AWGN.
//!
//! The SNR convention used by the simulator: with a unit-power transmit
//! constellation and the unit-average channel gain produced here, the
//! per-receive-antenna symbol SNR is 1/σ².

use ndarray::Array4;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::grid::GridDims;
use crate::la::CMatrix;
use crate::{seeds, C64, Error, Result};

const C_LIGHT: f64 = 299_792_458.0;

/// Oscillators per tap in the Jakes sum-of-sinusoids process.
const JAKES_OSCILLATORS: usize = 16;

#[derive(Debug, Clone)]
pub struct ChannelParams {
    pub n_t: usize,
    pub n_r: usize,
    /// Target rms delay spread in seconds.
    pub delay_spread: f64,
    /// User speed in m/s.
    pub speed: f64,
    /// Carrier frequency in Hz.
    pub carrier: f64,
    /// Subcarrier spacing in Hz.
    pub scs: f64,
    pub n_taps: usize,
    /// Per-tap relative powers (linear, sum 1).
    pub pdp: Vec<f64>,
    /// Tap delays in seconds, nondecreasing.
    pub tap_delays: Vec<f64>,
    pub seed: u64,
}

impl ChannelParams {
    /// Parameters with an exponential power-delay profile matching the
    /// requested rms delay spread.
    pub fn new(
        n_t: usize,
        n_r: usize,
        delay_spread: f64,
        speed: f64,
        carrier: f64,
        scs: f64,
        n_taps: usize,
        seed: u64,
    ) -> Result<Self> {
        let (pdp, tap_delays) = exponential_pdp(delay_spread, n_taps)?;
        let p = Self {
            n_t,
            n_r,
            delay_spread,
            speed,
            carrier,
            scs,
            n_taps,
            pdp,
            tap_delays,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_t == 0 || self.n_r == 0 || self.n_taps == 0 {
            return Err(Error::config("antenna and tap counts must be positive"));
        }
        if self.pdp.len() != self.n_taps || self.tap_delays.len() != self.n_taps {
            return Err(Error::config("pdp/tap_delays length must equal n_taps"));
        }
        let sum: f64 = self.pdp.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("pdp must sum to 1, got {sum}")));
        }
        if self.tap_delays.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::config("tap delays must be nondecreasing"));
        }
        if self.n_taps > 1 && self.delay_spread > 0.0 {
            let rms = rms_delay_spread(&self.pdp, &self.tap_delays);
            if (rms - self.delay_spread).abs() > 0.05 * self.delay_spread {
                return Err(Error::config(format!(
                    "profile rms delay spread {rms:.3e} is more than 5% from {:.3e}",
                    self.delay_spread
                )));
            }
        }
        Ok(())
    }

    /// Maximum Doppler shift in Hz.
    pub fn max_doppler(&self) -> f64 {
        self.speed * self.carrier / C_LIGHT
    }

    /// Same parameters with a different realization seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut p = self.clone();
        p.seed = seed;
        p
    }
}

pub fn rms_delay_spread(pdp: &[f64], delays: &[f64]) -> f64 {
    let mean: f64 = pdp.iter().zip(delays).map(|(p, d)| p * d).sum();
    let second: f64 = pdp.iter().zip(delays).map(|(p, d)| p * d * d).sum();
    (second - mean * mean).max(0.0).sqrt()
}

/// Exponentially decaying tap powers on a uniform delay lattice, normalized
/// to unit total power and scaled so the rms delay spread matches the target.
pub fn exponential_pdp(delay_spread: f64, n_taps: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_taps == 0 {
        return Err(Error::config("n_taps must be at least 1"));
    }
    if n_taps == 1 || delay_spread == 0.0 {
        let mut pdp = vec![0.0; n_taps];
        if n_taps == 1 {
            pdp[0] = 1.0;
        } else {
            // Degenerate flat request: exponential weights, all delays zero.
            let total: f64 = (0..n_taps).map(|k| (-(k as f64)).exp()).sum();
            for (k, p) in pdp.iter_mut().enumerate() {
                *p = (-(k as f64)).exp() / total;
            }
        }
        return Ok((pdp, vec![0.0; n_taps]));
    }
    // Unit-lattice profile with decay constant 1, then rescale the delays.
    let raw_delays: Vec<f64> = (0..n_taps).map(|k| k as f64).collect();
    let total: f64 = raw_delays.iter().map(|d| (-d).exp()).sum();
    let pdp: Vec<f64> = raw_delays.iter().map(|d| (-d).exp() / total).collect();
    let rms0 = rms_delay_spread(&pdp, &raw_delays);
    let scale = delay_spread / rms0;
    let tap_delays = raw_delays.iter().map(|d| d * scale).collect();
    Ok((pdp, tap_delays))
}

/// Channel matrices for every resource element of one slot.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// (subcarrier, symbol, rx, tx).
    pub h: Array4<C64>,
}

impl ChannelRealization {
    pub fn n_r(&self) -> usize {
        self.h.shape()[2]
    }

    pub fn n_t(&self) -> usize {
        self.h.shape()[3]
    }

    /// N_r x N_t matrix at one resource element.
    pub fn at(&self, sc: usize, sym: usize) -> CMatrix {
        let (n_r, n_t) = (self.n_r(), self.n_t());
        CMatrix::from_fn(n_r, n_t, |r, t| self.h[(sc, sym, r, t)])
    }

    /// Average of all channel matrices across the grid.
    pub fn average(&self) -> CMatrix {
        let (n_sc, n_sym, n_r, n_t) = {
            let s = self.h.shape();
            (s[0], s[1], s[2], s[3])
        };
        let mut acc = CMatrix::zeros(n_r, n_t);
        for sc in 0..n_sc {
            for sym in 0..n_sym {
                for r in 0..n_r {
                    for t in 0..n_t {
                        acc[(r, t)] += self.h[(sc, sym, r, t)];
                    }
                }
            }
        }
        acc.scale(1.0 / (n_sc * n_sym) as f64)
    }
}

/// Draw one slot of the channel. Deterministic in (params.seed).
pub fn realize(params: &ChannelParams, dims: &GridDims) -> ChannelRealization {
    let n_sc = dims.n_subcarriers();
    let n_sym = dims.n_symbols;
    let (n_r, n_t, n_taps) = (params.n_r, params.n_t, params.n_taps);
    let f_d = params.max_doppler();
    let t_sym = 1.0 / params.scs;
    let m_osc = JAKES_OSCILLATORS;
    let mut rng = seeds::rng(params.seed, &[seeds::CHANNEL]);

    // Per-tap fading processes: amp[tap][r][t][sym].
    let mut amp = vec![C64::new(0.0, 0.0); n_taps * n_r * n_t * n_sym];
    for tap in 0..n_taps {
        let gain = (params.pdp[tap] / m_osc as f64).sqrt();
        for r in 0..n_r {
            for t in 0..n_t {
                // Random arrival-angle offset and per-oscillator phases.
                let angle_off: f64 = rng.random::<f64>();
                let phases: Vec<f64> = (0..m_osc)
                    .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
                    .collect();
                let angles: Vec<f64> = (0..m_osc)
                    .map(|m| std::f64::consts::TAU * (m as f64 + angle_off) / m_osc as f64)
                    .collect();
                for sym in 0..n_sym {
                    let time = sym as f64 * t_sym;
                    let mut acc = C64::new(0.0, 0.0);
                    for m in 0..m_osc {
                        let arg =
                            std::f64::consts::TAU * f_d * angles[m].cos() * time + phases[m];
                        acc += C64::new(arg.cos(), arg.sin());
                    }
                    amp[((tap * n_r + r) * n_t + t) * n_sym + sym] = acc * gain;
                }
            }
        }
    }

    // Frequency response: H(sc) = sum_p A_p exp(-j 2 pi f_sc tau_p).
    let mut twiddle = vec![C64::new(0.0, 0.0); n_sc * n_taps];
    for sc in 0..n_sc {
        let f = sc as f64 * params.scs;
        for tap in 0..n_taps {
            let arg = -std::f64::consts::TAU * f * params.tap_delays[tap];
            twiddle[sc * n_taps + tap] = C64::new(arg.cos(), arg.sin());
        }
    }
    let mut h = Array4::from_elem((n_sc, n_sym, n_r, n_t), C64::new(0.0, 0.0));
    for sc in 0..n_sc {
        for sym in 0..n_sym {
            for r in 0..n_r {
                for t in 0..n_t {
                    let mut acc = C64::new(0.0, 0.0);
                    for tap in 0..n_taps {
                        acc += amp[((tap * n_r + r) * n_t + t) * n_sym + sym]
                            * twiddle[sc * n_taps + tap];
                    }
                    h[(sc, sym, r, t)] = acc;
                }
            }
        }
    }
    ChannelRealization { h }
}

/// One circularly symmetric complex Gaussian sample of variance `sigma2`.
pub fn noise_sample<R: Rng>(rng: &mut R, sigma2: f64) -> C64 {
    if sigma2 == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let s = (sigma2 / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Add CN(0, sigma2) noise to every entry; deterministic per seed.
pub fn add_noise(y: &CMatrix, sigma2: f64, seed: u64) -> CMatrix {
    let mut rng = seeds::rng(seed, &[seeds::NOISE_CCA]);
    y.map(|z| z + noise_sample(&mut rng, sigma2))
}
