//! Transmitter chain: QPSK mapping, per-layer symbol grids with the
//! repetition protocol applied, wideband SVD precoding, power allocation,
//! and propagation through the channel to per-RE received vectors.

use ndarray::{Array2, Array3, Array4};
use rand::Rng;

use crate::channel::{noise_sample, ChannelRealization};
use crate::grid::{re_coords, CcaPattern, GridDims};
use crate::la::{self, CMatrix, CVector};
use crate::{seeds, C64, Error, Result};

/// Gray-mapped unit-energy QPSK constellation, indexed by the bit pair
/// (b0 b1): 00, 01, 10, 11.
pub fn qpsk_symbol(index: u8) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re = if index & 0b10 == 0 { s } else { -s };
    let im = if index & 0b01 == 0 { s } else { -s };
    C64::new(re, im)
}

/// Nearest-constellation decision, expressed as the bit-pair index.
pub fn qpsk_demap_symbol(z: C64) -> u8 {
    let mut idx = 0;
    if z.re < 0.0 {
        idx |= 0b10;
    }
    if z.im < 0.0 {
        idx |= 0b01;
    }
    idx
}

/// Map a bit stream (two bits per symbol) onto QPSK symbols.
pub fn qpsk_map(bits: &[u8]) -> Result<Vec<C64>> {
    if bits.len() % 2 != 0 {
        return Err(Error::Dimension("qpsk_map needs an even bit count".into()));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|b| qpsk_symbol((b[0] << 1) | b[1]))
        .collect())
}

/// Demap soft symbols back to bits by nearest constellation point.
pub fn qpsk_demap(symbols: &[C64]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(symbols.len() * 2);
    for &z in symbols {
        let idx = qpsk_demap_symbol(z);
        bits.push((idx >> 1) & 1);
        bits.push(idx & 1);
    }
    bits
}

/// The known symbol transmitted at every phase-reference position.
pub fn phase_ref_symbol() -> C64 {
    qpsk_symbol(0)
}

/// Power-allocation convention for the default per-layer weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerNorm {
    /// alpha_l = 1/sqrt(L) for every layer.
    RsqrtLayers,
    /// alpha_l = 1/L so the allocations sum to one.
    UnitTotal,
}

pub fn default_alpha(n_layers: usize, norm: PowerNorm) -> Vec<f64> {
    let a = match norm {
        PowerNorm::RsqrtLayers => 1.0 / (n_layers as f64).sqrt(),
        PowerNorm::UnitTotal => 1.0 / n_layers as f64,
    };
    vec![a; n_layers]
}

/// Wideband precoders: one unit-norm column per layer.
#[derive(Debug, Clone)]
pub struct Precoders {
    /// N_t x L; column l is the precoder of layer l.
    pub f: CMatrix,
}

impl Precoders {
    pub fn n_layers(&self) -> usize {
        self.f.ncols()
    }

    pub fn column(&self, layer: usize) -> CVector {
        self.f.column(layer).into_owned()
    }
}

/// The l-th precoder is the l-th dominant right singular vector of the
/// grid-averaged channel matrix.
pub fn wideband_precoders(realization: &ChannelRealization, n_layers: usize) -> Result<Precoders> {
    let avg = realization.average();
    let (n_r, n_t) = (avg.nrows(), avg.ncols());
    if n_layers > n_r.min(n_t) {
        return Err(Error::Dimension(format!(
            "{n_layers} layers exceed min(N_r, N_t) = {}",
            n_r.min(n_t)
        )));
    }
    let dec = la::svd(&avg)?;
    let rank = dec
        .sigma
        .iter()
        .filter(|&&s| s > 1e-12 * dec.sigma[0].max(f64::MIN_POSITIVE))
        .count();
    if n_layers > rank {
        return Err(Error::Numerical(format!(
            "averaged channel has rank {rank}, cannot serve {n_layers} layers"
        )));
    }
    let mut f = CMatrix::zeros(n_t, n_layers);
    for l in 0..n_layers {
        f.set_column(l, &dec.v.column(l));
    }
    Ok(Precoders { f })
}

/// Per-layer transmitted symbol grids, (subcarrier, symbol).
pub type LayerGrids = Vec<Array2<C64>>;

/// Fill every RE of every layer with fresh QPSK data, then apply the
/// repetition protocol: the known phase-reference symbol is written at the
/// first source position of each sub-grid and the whole source block is
/// copied, in order, to the destination positions.
pub fn assemble_grid(
    dims: &GridDims,
    patterns: &[Option<&CcaPattern>],
    data_seed: u64,
) -> Result<LayerGrids> {
    if patterns.len() != dims.n_layers {
        return Err(Error::Dimension(format!(
            "{} pattern slots for {} layers",
            patterns.len(),
            dims.n_layers
        )));
    }
    let n_sc = dims.n_subcarriers();
    let mut grids = Vec::with_capacity(dims.n_layers);
    for (layer, pattern) in patterns.iter().enumerate() {
        let mut rng = seeds::rng(data_seed, &[seeds::DATA, layer as u64]);
        let mut g = Array2::from_shape_simple_fn((n_sc, dims.n_symbols), || {
            qpsk_symbol(rng.random_range(0..4u8))
        });
        if let Some(p) = pattern {
            for sg in &p.subgrids {
                let (m, n) = re_coords(sg.src[0], dims.n_rb);
                g[(m, n)] = phase_ref_symbol();
                for (&s, &d) in sg.src.iter().zip(sg.dst.iter()) {
                    let (sm, sn) = re_coords(s, dims.n_rb);
                    let (dm, dn) = re_coords(d, dims.n_rb);
                    g[(dm, dn)] = g[(sm, sn)];
                }
            }
        }
        grids.push(g);
    }
    Ok(grids)
}

/// Scaled effective channels sqrt(alpha_l) H(sc, sym) f_l, laid out as
/// (subcarrier, symbol, rx antenna, layer). This is the composite gain a
/// coherent receiver of layer l must know or estimate.
pub fn effective_channels(
    realization: &ChannelRealization,
    precoders: &Precoders,
    alpha: &[f64],
) -> Result<Array4<C64>> {
    let shape = realization.h.shape();
    let (n_sc, n_sym, n_r, n_t) = (shape[0], shape[1], shape[2], shape[3]);
    let n_layers = precoders.n_layers();
    if alpha.len() != n_layers {
        return Err(Error::Dimension("one alpha per layer required".into()));
    }
    let mut eff = Array4::from_elem((n_sc, n_sym, n_r, n_layers), C64::new(0.0, 0.0));
    for sc in 0..n_sc {
        for sym in 0..n_sym {
            for l in 0..n_layers {
                let w = alpha[l].sqrt();
                for r in 0..n_r {
                    let mut acc = C64::new(0.0, 0.0);
                    for t in 0..n_t {
                        acc += realization.h[(sc, sym, r, t)] * precoders.f[(t, l)];
                    }
                    eff[(sc, sym, r, l)] = acc * w;
                }
            }
        }
    }
    Ok(eff)
}

/// Received tensor: y(sc, sym) = sum_l sqrt(alpha_l) H f_l x_l + w, laid out
/// as (subcarrier, symbol, rx antenna). Deterministic per noise seed.
pub fn transmit(
    grids: &LayerGrids,
    eff: &Array4<C64>,
    sigma2: f64,
    noise_seed: u64,
) -> Result<Array3<C64>> {
    let shape = eff.shape();
    let (n_sc, n_sym, n_r, n_layers) = (shape[0], shape[1], shape[2], shape[3]);
    if grids.len() != n_layers {
        return Err(Error::Dimension(format!(
            "{} layer grids for {} precoded layers",
            grids.len(),
            n_layers
        )));
    }
    for g in grids {
        if g.shape() != [n_sc, n_sym] {
            return Err(Error::Dimension("layer grid does not match channel".into()));
        }
    }
    let mut rng = seeds::rng(noise_seed, &[seeds::NOISE_CCA]);
    let mut rx = Array3::from_elem((n_sc, n_sym, n_r), C64::new(0.0, 0.0));
    for sc in 0..n_sc {
        for sym in 0..n_sym {
            for r in 0..n_r {
                let mut acc = C64::new(0.0, 0.0);
                for (l, g) in grids.iter().enumerate() {
                    acc += eff[(sc, sym, r, l)] * g[(sc, sym)];
                }
                rx[(sc, sym, r)] = acc + noise_sample(&mut rng, sigma2);
            }
        }
    }
    Ok(rx)
}
