//! Comparison receivers: a pilot-lattice channel estimator (least squares at
//! the pilot REs, bilinear interpolation in between) followed by per-RE MMSE
//! equalization, and the perfect-channel bound that runs the same equalizer
//! on the true effective channel.

use ndarray::{Array2, Array3, Array4};

use crate::grid::GridDims;
use crate::la::{CMatrix, CVector};
use crate::{seeds, C64, Error, Result};

/// Pilot lattice: a few whole OFDM symbols carry pilots on a subcarrier
/// stride, with per-layer offsets keeping the layer lattices disjoint.
/// Pilot values are known unit-modulus symbols derived from a seed.
#[derive(Debug, Clone)]
pub struct PilotConfig {
    pub symbol_positions: Vec<usize>,
    pub stride: usize,
    pub n_layers: usize,
    pub values_seed: u64,
}

impl PilotConfig {
    /// Two pilot symbols per slot on every second subcarrier, mirroring the
    /// density of a one-extra-position DM-RS allocation.
    pub fn default_for(dims: &GridDims) -> Result<Self> {
        let positions = if dims.n_symbols >= 12 {
            vec![2, 11]
        } else if dims.n_symbols >= 2 {
            vec![0, dims.n_symbols - 1]
        } else {
            vec![0]
        };
        let cfg = Self {
            symbol_positions: positions,
            stride: 2,
            n_layers: dims.n_layers,
            values_seed: 0xD0_5EED,
        };
        cfg.validate(dims)?;
        Ok(cfg)
    }

    pub fn validate(&self, dims: &GridDims) -> Result<()> {
        if self.symbol_positions.is_empty() {
            return Err(Error::config("at least one pilot symbol required"));
        }
        if self.symbol_positions.iter().any(|&s| s >= dims.n_symbols) {
            return Err(Error::config("pilot symbol outside the slot"));
        }
        if self.n_layers > self.stride {
            return Err(Error::config(format!(
                "{} layers cannot have disjoint pilots with stride {}",
                self.n_layers, self.stride
            )));
        }
        Ok(())
    }

    /// (subcarrier, symbol) positions of one layer's pilots.
    pub fn pilot_res(&self, dims: &GridDims, layer: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &sym in &self.symbol_positions {
            let mut sc = layer;
            while sc < dims.n_subcarriers() {
                out.push((sc, sym));
                sc += self.stride;
            }
        }
        out
    }

    /// Known unit-modulus pilot value at a pilot RE.
    pub fn value_at(&self, layer: usize, sc: usize, sym: usize) -> C64 {
        let mut rng = seeds::rng(
            self.values_seed,
            &[seeds::PILOT_VALUES, layer as u64, sc as u64, sym as u64],
        );
        use rand::Rng;
        let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        C64::new(phase.cos(), phase.sin())
    }

    /// True where any layer transmits a pilot (these REs carry no data).
    pub fn pilot_mask(&self, dims: &GridDims) -> Array2<bool> {
        let mut mask = Array2::from_elem((dims.n_subcarriers(), dims.n_symbols), false);
        for layer in 0..self.n_layers {
            for (sc, sym) in self.pilot_res(dims, layer) {
                mask[(sc, sym)] = true;
            }
        }
        mask
    }
}

/// Effective-channel estimates on every RE: (subcarrier, symbol, rx antenna).
pub type ChannelEstimate = Array3<C64>;

/// Least-squares estimates at one layer's pilot REs: for a unit-modulus
/// scalar pilot p, ĥ = y · conj(p).
pub fn ls_estimate(
    rx: &Array3<C64>,
    dims: &GridDims,
    pilots: &PilotConfig,
    layer: usize,
) -> Vec<(usize, usize, CVector)> {
    let n_r = rx.shape()[2];
    pilots
        .pilot_res(dims, layer)
        .into_iter()
        .map(|(sc, sym)| {
            let p = pilots.value_at(layer, sc, sym);
            let h = CVector::from_fn(n_r, |r, _| rx[(sc, sym, r)] * p.conj());
            (sc, sym, h)
        })
        .collect()
}

/// Bilinear interpolation of scattered pilot estimates onto the full grid:
/// linear across subcarriers within each pilot symbol, then linear across
/// time between pilot symbols, with nearest-neighbor extrapolation at the
/// edges.
pub fn interpolate(
    sparse: &[(usize, usize, CVector)],
    dims: &GridDims,
    n_r: usize,
) -> Result<ChannelEstimate> {
    if sparse.is_empty() {
        return Err(Error::config("no pilot estimates to interpolate"));
    }
    let n_sc = dims.n_subcarriers();
    let mut sym_positions: Vec<usize> = sparse.iter().map(|&(_, s, _)| s).collect();
    sym_positions.sort_unstable();
    sym_positions.dedup();

    // Per pilot symbol: interpolate across the subcarrier axis.
    let mut per_symbol: Vec<Array2<C64>> = Vec::with_capacity(sym_positions.len());
    for &sym in &sym_positions {
        let mut cols: Vec<(usize, &CVector)> = sparse
            .iter()
            .filter(|&&(_, s, _)| s == sym)
            .map(|(sc, _, h)| (*sc, h))
            .collect();
        cols.sort_unstable_by_key(|&(sc, _)| sc);
        let mut row = Array2::from_elem((n_sc, n_r), C64::new(0.0, 0.0));
        for sc in 0..n_sc {
            let est = interp_1d(&cols, sc as f64);
            for r in 0..n_r {
                row[(sc, r)] = est[r];
            }
        }
        per_symbol.push(row);
    }

    // Across time between pilot symbols.
    let mut out = Array3::from_elem((n_sc, dims.n_symbols, n_r), C64::new(0.0, 0.0));
    for sym in 0..dims.n_symbols {
        let (w, i0, i1) = bracket(&sym_positions, sym as f64);
        for sc in 0..n_sc {
            for r in 0..n_r {
                let a = per_symbol[i0][(sc, r)];
                let b = per_symbol[i1][(sc, r)];
                out[(sc, sym, r)] = a * (1.0 - w) + b * w;
            }
        }
    }
    Ok(out)
}

/// Linear interpolation over sorted (position, vector) samples, clamped to
/// the end samples outside the sampled range.
fn interp_1d(samples: &[(usize, &CVector)], x: f64) -> CVector {
    let positions: Vec<usize> = samples.iter().map(|&(p, _)| p).collect();
    let (w, i0, i1) = bracket(&positions, x);
    samples[i0].1.scale(1.0 - w) + samples[i1].1.scale(w)
}

/// For sorted positions, the pair of bracketing sample indices for `x` and
/// the weight of the upper one; clamps outside the range.
fn bracket(positions: &[usize], x: f64) -> (f64, usize, usize) {
    if positions.len() == 1 || x <= positions[0] as f64 {
        return (0.0, 0, 0);
    }
    let last = positions.len() - 1;
    if x >= positions[last] as f64 {
        return (0.0, last, last);
    }
    let hi = positions.partition_point(|&p| (p as f64) < x).min(last);
    let lo = hi - 1;
    if positions[hi] == positions[lo] {
        return (0.0, lo, hi);
    }
    let w = (x - positions[lo] as f64) / (positions[hi] as f64 - positions[lo] as f64);
    (w, lo, hi)
}

/// Per-RE MMSE equalization: soft_l = ĥ_lᴴ (Ĥ Ĥᴴ + σ²I)⁻¹ y. When the
/// system is singular (σ² = 0 with a rank-deficient Ĥ Ĥᴴ) the RE falls back
/// to a matched filter; the fallback count is reported.
pub fn mmse_equalize(
    rx: &Array3<C64>,
    estimates: &[ChannelEstimate],
    sigma2: f64,
) -> (Vec<Array2<C64>>, usize) {
    let (n_sc, n_sym, n_r) = (rx.shape()[0], rx.shape()[1], rx.shape()[2]);
    let n_layers = estimates.len();
    let mut soft: Vec<Array2<C64>> = (0..n_layers)
        .map(|_| Array2::from_elem((n_sc, n_sym), C64::new(0.0, 0.0)))
        .collect();
    let mut fallbacks = 0usize;
    for sc in 0..n_sc {
        for sym in 0..n_sym {
            let y = CVector::from_fn(n_r, |r, _| rx[(sc, sym, r)]);
            let h = CMatrix::from_fn(n_r, n_layers, |r, l| estimates[l][(sc, sym, r)]);
            let mut a = &h * h.adjoint();
            for r in 0..n_r {
                a[(r, r)] += C64::new(sigma2, 0.0);
            }
            // A rank-deficient noiseless system falls back to the matched
            // filter. The pivot-ratio guard catches factorizations that only
            // succeed through rounding.
            let z = match nalgebra::Cholesky::new(a) {
                Some(chol) => {
                    let l = chol.l_dirty();
                    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                    for r in 0..n_r {
                        let d = l[(r, r)].re;
                        lo = lo.min(d);
                        hi = hi.max(d);
                    }
                    if lo <= 1e-7 * hi {
                        fallbacks += 1;
                        y.clone()
                    } else {
                        chol.solve(&y)
                    }
                }
                None => {
                    fallbacks += 1;
                    y.clone()
                }
            };
            for l in 0..n_layers {
                let hl = h.column(l).into_owned();
                soft[l][(sc, sym)] = hl.dotc(&z);
            }
        }
    }
    (soft, fallbacks)
}

/// Perfect-channel bound: the MMSE equalizer fed with the true scaled
/// effective channels (subcarrier, symbol, rx, layer).
pub fn pchan_equalize(
    rx: &Array3<C64>,
    eff: &Array4<C64>,
    layers: &[usize],
    sigma2: f64,
) -> (Vec<Array2<C64>>, usize) {
    let (n_sc, n_sym, n_r) = (rx.shape()[0], rx.shape()[1], rx.shape()[2]);
    let ests: Vec<ChannelEstimate> = layers
        .iter()
        .map(|&l| {
            Array3::from_shape_fn((n_sc, n_sym, n_r), |(sc, sym, r)| eff[(sc, sym, r, l)])
        })
        .collect();
    mmse_equalize(rx, &ests, sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn randc(rng: &mut StdRng) -> C64 {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }

    fn dims(n_rb: usize, n_layers: usize) -> GridDims {
        GridDims::new(n_rb, 14, n_layers).unwrap()
    }

    /// Received grid for a known per-RE effective channel of one layer that
    /// transmits only pilots (zero elsewhere), noiseless.
    fn pilot_only_rx(
        d: &GridDims,
        pilots: &PilotConfig,
        layer: usize,
        eff: impl Fn(usize, usize) -> CVector,
        n_r: usize,
    ) -> Array3<C64> {
        let mut rx = Array3::from_elem((d.n_subcarriers(), d.n_symbols, n_r), C64::new(0.0, 0.0));
        for (sc, sym) in pilots.pilot_res(d, layer) {
            let h = eff(sc, sym);
            let p = pilots.value_at(layer, sc, sym);
            for r in 0..n_r {
                rx[(sc, sym, r)] = h[r] * p;
            }
        }
        rx
    }

    #[test]
    fn ls_is_exact_on_noiseless_pilots() {
        let d = dims(2, 1);
        let pilots = PilotConfig::default_for(&d).unwrap();
        let mut rng = StdRng::seed_from_u64(1);
        let h_true = CVector::from_fn(2, |_, _| randc(&mut rng));
        let h = h_true.clone();
        let rx = pilot_only_rx(&d, &pilots, 0, move |_, _| h.clone(), 2);
        for (_, _, est) in ls_estimate(&rx, &d, &pilots, 0) {
            assert!((est - h_true.clone()).norm() < 1e-12);
        }
    }

    #[test]
    fn disjoint_layers_estimate_exactly() {
        let d = dims(2, 2);
        let pilots = PilotConfig::default_for(&d).unwrap();
        let mut rng = StdRng::seed_from_u64(2);
        let h0 = CVector::from_fn(2, |_, _| randc(&mut rng));
        let h1 = CVector::from_fn(2, |_, _| randc(&mut rng));
        // Both layers transmit pilots on their own lattices, muted elsewhere.
        let mut rx = Array3::from_elem((d.n_subcarriers(), d.n_symbols, 2), C64::new(0.0, 0.0));
        for (layer, h) in [(0usize, &h0), (1, &h1)] {
            for (sc, sym) in pilots.pilot_res(&d, layer) {
                let p = pilots.value_at(layer, sc, sym);
                for r in 0..2 {
                    rx[(sc, sym, r)] += h[r] * p;
                }
            }
        }
        for (layer, h) in [(0usize, &h0), (1, &h1)] {
            for (_, _, est) in ls_estimate(&rx, &d, &pilots, layer) {
                assert!((est - h.clone()).norm() < 1e-12, "layer {layer}");
            }
        }
    }

    #[test]
    fn interference_bias_grows_as_sir_shrinks() {
        let d = dims(2, 1);
        let pilots = PilotConfig::default_for(&d).unwrap();
        let err_at = |alpha1: f64| -> f64 {
            let mut rng = StdRng::seed_from_u64(33);
            let mut total = 0.0;
            for _ in 0..200 {
                let h0 = CVector::from_fn(2, |_, _| randc(&mut rng));
                let h1 = CVector::from_fn(2, |_, _| randc(&mut rng));
                let mut rx =
                    Array3::from_elem((d.n_subcarriers(), d.n_symbols, 2), C64::new(0.0, 0.0));
                for (sc, sym) in pilots.pilot_res(&d, 0) {
                    let p = pilots.value_at(0, sc, sym);
                    // Unknown interferer transmits data over the pilots.
                    let x1 = randc(&mut rng) * 2.0;
                    for r in 0..2 {
                        rx[(sc, sym, r)] = h0[r] * p * alpha1.sqrt()
                            + h1[r] * x1 * (1.0 - alpha1).sqrt();
                    }
                }
                for (_, _, est) in ls_estimate(&rx, &d, &pilots, 0) {
                    total += (est - h0.scale(alpha1.sqrt())).norm();
                }
            }
            total
        };
        let strong_sir = err_at(0.95);
        let weak_sir = err_at(0.2);
        assert!(
            weak_sir > strong_sir,
            "estimate error must grow with interference: {weak_sir} vs {strong_sir}"
        );
    }

    #[test]
    fn interpolation_reproduces_constants_and_linears() {
        let d = dims(2, 1);
        let pilots = PilotConfig::default_for(&d).unwrap();
        let n_r = 2;
        let mut rng = StdRng::seed_from_u64(3);
        let c = CVector::from_fn(n_r, |_, _| randc(&mut rng));
        let cc = c.clone();
        let rx = pilot_only_rx(&d, &pilots, 0, move |_, _| cc.clone(), n_r);
        let sparse = ls_estimate(&rx, &d, &pilots, 0);
        let est = interpolate(&sparse, &d, n_r).unwrap();
        for sc in 0..d.n_subcarriers() {
            for sym in 0..d.n_symbols {
                for r in 0..n_r {
                    assert!((est[(sc, sym, r)] - c[r]).norm() < 1e-12);
                }
            }
        }
        // Linear in subcarrier: exact between pilot subcarriers.
        let slope = randc(&mut rng);
        let base = randc(&mut rng);
        let lin = move |sc: usize, _sym: usize| -> CVector {
            CVector::from_fn(n_r, |_, _| base + slope * sc as f64)
        };
        let rx = pilot_only_rx(&d, &pilots, 0, lin, n_r);
        let sparse = ls_estimate(&rx, &d, &pilots, 0);
        let est = interpolate(&sparse, &d, n_r).unwrap();
        let max_pilot_sc = d.n_subcarriers() - 2; // stride-2 lattice from 0
        for sc in 0..=max_pilot_sc {
            for r in 0..n_r {
                let want = base + slope * sc as f64;
                assert!(
                    (est[(sc, 2, r)] - want).norm() < 1e-10,
                    "sc {sc}: {:?} vs {want:?}",
                    est[(sc, 2, r)]
                );
            }
        }
    }

    #[test]
    fn denser_pilots_estimate_better() {
        use crate::channel::{realize, ChannelParams};
        let d = dims(4, 1);
        let n_r = 2;
        let err_for_stride = |stride: usize| -> f64 {
            let mut total = 0.0;
            for seed in 0..20 {
                let p = ChannelParams::new(4, n_r, 300e-9, 0.0, 4e9, 30e3, 8, 100 + seed).unwrap();
                let ch = realize(&p, &d);
                let pilots = PilotConfig {
                    symbol_positions: vec![2, 11],
                    stride,
                    n_layers: 1,
                    values_seed: 1,
                };
                // Treat H's first column as the effective channel.
                let eff = |sc: usize, sym: usize| -> CVector {
                    CVector::from_fn(n_r, |r, _| ch.h[(sc, sym, r, 0)])
                };
                let rx = pilot_only_rx(&d, &pilots, 0, eff, n_r);
                let sparse = ls_estimate(&rx, &d, &pilots, 0);
                let est = interpolate(&sparse, &d, n_r).unwrap();
                for sc in 0..d.n_subcarriers() {
                    for sym in 0..d.n_symbols {
                        for r in 0..n_r {
                            total += (est[(sc, sym, r)] - ch.h[(sc, sym, r, 0)]).norm_sqr();
                        }
                    }
                }
            }
            total
        };
        let dense = err_for_stride(2);
        let sparse = err_for_stride(6);
        assert!(dense < sparse, "dense {dense} vs sparse {sparse}");
    }

    #[test]
    fn mmse_limits() {
        let mut rng = StdRng::seed_from_u64(4);
        let n_r = 2;
        let h0 = CVector::from_fn(n_r, |_, _| randc(&mut rng));
        let x = C64::new(0.6, -0.4);
        let rx = Array3::from_shape_fn((1, 1, n_r), |(_, _, r)| h0[r] * x);
        let est: ChannelEstimate = Array3::from_shape_fn((1, 1, n_r), |(_, _, r)| h0[r]);
        // Perfect estimate, sigma 0, single layer with full-rank fallback:
        // matched filter recovers the symbol direction exactly.
        let (soft, fallbacks) = mmse_equalize(&rx, &[est.clone()], 0.0);
        assert_eq!(fallbacks, 1); // rank-1 outer product is singular in 2x2
        let z = soft[0][(0, 0)];
        let expect = h0.norm_squared() * x;
        assert!((z - expect).norm() < 1e-10);
        // Large noise: soft output approaches the matched filter scaled by
        // 1/sigma^2.
        let sigma2 = 1e9;
        let (soft, _) = mmse_equalize(&rx, &[est], sigma2);
        let mf = expect / sigma2;
        assert!((soft[0][(0, 0)] - mf).norm() < 1e-7 * mf.norm());
    }

    #[test]
    fn mmse_matches_scalar_closed_form() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..10 {
            let h = randc(&mut rng);
            let y = randc(&mut rng);
            let sigma2 = rng.random::<f64>() + 0.1;
            let rx = Array3::from_shape_fn((1, 1, 1), |_| y);
            let est: ChannelEstimate = Array3::from_shape_fn((1, 1, 1), |_| h);
            let (soft, fallbacks) = mmse_equalize(&rx, &[est], sigma2);
            assert_eq!(fallbacks, 0);
            let want = h.conj() * y / (h.norm_sqr() + sigma2);
            assert!((soft[0][(0, 0)] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn pchan_equals_pilot_estimation_on_flat_noiseless_channel() {
        use ndarray::Array4;
        let d = dims(2, 1);
        let pilots = PilotConfig::default_for(&d).unwrap();
        let n_r = 2;
        let mut rng = StdRng::seed_from_u64(8);
        let h = CVector::from_fn(n_r, |_, _| randc(&mut rng));
        let (n_sc, n_sym) = (d.n_subcarriers(), d.n_symbols);
        // One layer: pilots on the lattice, data elsewhere, no noise.
        let mut tx = Array2::from_elem((n_sc, n_sym), C64::new(0.0, 0.0));
        for z in tx.iter_mut() {
            *z = randc(&mut rng);
        }
        for (sc, sym) in pilots.pilot_res(&d, 0) {
            tx[(sc, sym)] = pilots.value_at(0, sc, sym);
        }
        let rx = Array3::from_shape_fn((n_sc, n_sym, n_r), |(sc, sym, r)| h[r] * tx[(sc, sym)]);
        let sparse = ls_estimate(&rx, &d, &pilots, 0);
        let est = interpolate(&sparse, &d, n_r).unwrap();
        let (soft_pilot, _) = mmse_equalize(&rx, &[est], 0.0);
        let eff = Array4::from_shape_fn((n_sc, n_sym, n_r, 1), |(_, _, r, _)| h[r]);
        let (soft_true, _) = pchan_equalize(&rx, &eff, &[0], 0.0);
        // A flat channel makes the pilot estimates exact everywhere, so the
        // two equalizers produce identical soft symbols.
        for sc in 0..n_sc {
            for sym in 0..n_sym {
                let diff = (soft_pilot[0][(sc, sym)] - soft_true[0][(sc, sym)]).norm();
                assert!(diff < 1e-12, "soft symbols differ by {diff}");
            }
        }
    }

    #[test]
    fn zero_forcing_limit_recovers_exactly() {
        let mut rng = StdRng::seed_from_u64(6);
        let n_r = 2;
        // Orthogonal effective channels, two layers, noiseless.
        let h0 = CVector::from_vec(vec![C64::new(1.3, 0.0), C64::new(0.0, 0.4)]);
        let h1 = CVector::from_vec(vec![C64::new(0.0, 0.4), C64::new(1.3, 0.0)]);
        assert!(h0.dotc(&h1).norm() < 1e-12);
        let x0 = randc(&mut rng);
        let x1 = randc(&mut rng);
        let rx = Array3::from_shape_fn((1, 1, n_r), |(_, _, r)| h0[r] * x0 + h1[r] * x1);
        let ests: Vec<ChannelEstimate> = vec![
            Array3::from_shape_fn((1, 1, n_r), |(_, _, r)| h0[r]),
            Array3::from_shape_fn((1, 1, n_r), |(_, _, r)| h1[r]),
        ];
        let (soft, fallbacks) = mmse_equalize(&rx, &ests, 0.0);
        assert_eq!(fallbacks, 0);
        // Up to the positive per-layer scale hᴴ(HHᴴ)⁻¹h, outputs match.
        let z0 = soft[0][(0, 0)];
        let z1 = soft[1][(0, 0)];
        assert!((z0 / x0).im.abs() < 1e-10 && (z0 / x0).re > 0.0);
        assert!((z1 / x1).im.abs() < 1e-10 && (z1 / x1).re > 0.0);
    }
}
