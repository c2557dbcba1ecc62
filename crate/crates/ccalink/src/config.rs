//! Simulation configuration: a flat `section.key = value` text format,
//! pre-run validation that reports every violation at once, and a stable
//! content hash for provenance.

use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::grid::{self, GridDims, PatternKind};
use crate::rx_baseline::PilotConfig;
use crate::txchain::PowerNorm;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Receiver {
    Cca,
    Pchan,
    Pilot,
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Receiver::Cca => write!(f, "cca"),
            Receiver::Pchan => write!(f, "pchan"),
            Receiver::Pilot => write!(f, "pilot"),
        }
    }
}

impl FromStr for Receiver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cca" => Ok(Receiver::Cca),
            "pilot" => Ok(Receiver::Pilot),
            "pchan" => Ok(Receiver::Pchan),
            other => Err(Error::config(format!(
                "unknown receiver {other:?} (expected cca|pilot|pchan)"
            ))),
        }
    }
}

/// The swept quantity; exactly one axis per run. Points are kept sorted.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    SnrDb(Vec<f64>),
    SirDb(Vec<f64>),
    NBsg(Vec<usize>),
    Pattern(Vec<PatternKind>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::SnrDb(_) => "snr",
            SweepAxis::SirDb(_) => "sir",
            SweepAxis::NBsg(_) => "n_bsg",
            SweepAxis::Pattern(_) => "pattern",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepAxis::SnrDb(v) | SweepAxis::SirDb(v) => v.len(),
            SweepAxis::NBsg(v) => v.len(),
            SweepAxis::Pattern(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self, i: usize) -> String {
        match self {
            SweepAxis::SnrDb(v) | SweepAxis::SirDb(v) => format_float(v[i]),
            SweepAxis::NBsg(v) => v[i].to_string(),
            SweepAxis::Pattern(v) => v[i].to_string(),
        }
    }
}

/// Plain decimal for axis labels ("15", "-10", "7.5").
pub fn format_float(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_rb: usize,
    pub n_symbols: usize,
    pub n_layers: usize,
    pub n_t: usize,
    pub n_r: usize,
    pub delay_spread: f64,
    /// m/s internally; the config key is in km/h.
    pub speed: f64,
    pub carrier: f64,
    pub scs: f64,
    pub n_taps: usize,
    pub pattern_kind: PatternKind,
    pub n_per_rb: usize,
    pub n_bsg: usize,
    pub pilot_symbols: Vec<usize>,
    pub pilot_stride: usize,
    pub receivers: Vec<Receiver>,
    pub sweep: SweepAxis,
    /// Fixed SNR for non-SNR axes; +inf means noiseless.
    pub snr_db: f64,
    pub seeds: usize,
    pub frames_per_seed: usize,
    pub master_seed: u64,
    pub power_norm: PowerNorm,
    pub alpha_override: Option<Vec<f64>>,
}

impl Default for SimConfig {
    /// Desk-scale defaults: a 12-RB grid, 20 seeds of 10 frames.
    fn default() -> Self {
        Self {
            n_rb: 12,
            n_symbols: grid::DEFAULT_SYMBOLS,
            n_layers: 1,
            n_t: 8,
            n_r: 2,
            delay_spread: 30e-9,
            speed: 3.0 / 3.6,
            carrier: 4e9,
            scs: 30e3,
            n_taps: 8,
            pattern_kind: PatternKind::TimeRepetition,
            n_per_rb: 8,
            n_bsg: 2,
            pilot_symbols: vec![2, 11],
            pilot_stride: 2,
            receivers: vec![Receiver::Cca, Receiver::Pilot, Receiver::Pchan],
            sweep: SweepAxis::SnrDb(vec![0.0, 5.0, 10.0, 15.0, 20.0]),
            snr_db: 15.0,
            seeds: 20,
            frames_per_seed: 10,
            master_seed: 1,
            power_norm: PowerNorm::RsqrtLayers,
            alpha_override: None,
        }
    }
}

impl SimConfig {
    pub fn dims(&self) -> Result<GridDims> {
        GridDims::new(self.n_rb, self.n_symbols, self.n_layers)
    }

    /// Whether the run treats the second layer as unknown interference.
    pub fn sir_mode(&self) -> bool {
        matches!(self.sweep, SweepAxis::SirDb(_))
    }

    pub fn pilot_config(&self) -> PilotConfig {
        PilotConfig {
            symbol_positions: self.pilot_symbols.clone(),
            stride: self.pilot_stride,
            n_layers: if self.sir_mode() { 1 } else { self.n_layers },
            values_seed: 0xD0_5EED,
        }
    }

    /// Collect every violation; errors list them all at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems: Vec<String> = Vec::new();
        if self.n_rb == 0 || self.n_symbols == 0 || self.n_layers == 0 {
            problems.push("grid dimensions must be positive".into());
        }
        if self.n_layers > self.n_t.min(self.n_r) {
            problems.push(format!(
                "{} layers exceed min(n_t, n_r) = {}",
                self.n_layers,
                self.n_t.min(self.n_r)
            ));
        }
        if self.seeds == 0 || self.frames_per_seed == 0 {
            problems.push("seeds and frames_per_seed must be at least 1".into());
        }
        if self.receivers.is_empty() {
            problems.push("at least one receiver required".into());
        }
        if self.sweep.is_empty() {
            problems.push("sweep axis has no points".into());
        }
        if self.sir_mode() {
            if self.n_layers != 2 {
                problems.push("a SIR sweep needs exactly 2 layers".into());
            }
            if self.alpha_override.is_some() {
                problems.push("alpha override conflicts with the SIR sweep".into());
            }
        }
        if let Some(a) = &self.alpha_override {
            if a.len() != self.n_layers {
                problems.push(format!(
                    "alpha override has {} entries for {} layers",
                    a.len(),
                    self.n_layers
                ));
            }
            if a.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                problems.push("alpha entries must be positive and finite".into());
            }
        }
        // Every sub-grid size and pattern kind touched by the run must
        // produce valid, pairwise-disjoint patterns.
        let bsg_values: Vec<usize> = match &self.sweep {
            SweepAxis::NBsg(v) => v.clone(),
            _ => vec![self.n_bsg],
        };
        let kinds: Vec<PatternKind> = match &self.sweep {
            SweepAxis::Pattern(v) => v.clone(),
            _ => vec![self.pattern_kind],
        };
        if let Ok(dims) = GridDims::new(
            self.n_rb.max(1),
            self.n_symbols.max(1),
            self.n_layers.max(1),
        ) {
            for &bsg in &bsg_values {
                match grid::partition_subgrids(&dims, bsg) {
                    Ok(layout) => {
                        for &kind in &kinds {
                            if let Err(e) =
                                grid::layer_patterns(&dims, &layout, kind, self.n_per_rb)
                            {
                                problems.push(format!("n_bsg={bsg} {kind}: {e}"));
                            }
                        }
                    }
                    Err(e) => problems.push(e.to_string()),
                }
            }
        }
        let needs_pilots = self
            .receivers
            .iter()
            .any(|r| matches!(r, Receiver::Pilot | Receiver::Pchan));
        if needs_pilots {
            if let Ok(dims) = self.dims() {
                if let Err(e) = self.pilot_config().validate(&dims) {
                    problems.push(e.to_string());
                }
            }
        }
        if let Err(e) = crate::channel::ChannelParams::new(
            self.n_t.max(1),
            self.n_r.max(1),
            self.delay_spread,
            self.speed,
            self.carrier,
            self.scs,
            self.n_taps.max(1),
            0,
        ) {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::config(problems.join("; ")))
        }
    }

    /// Stable serialization of every effective field, used for hashing.
    pub fn canonical_string(&self) -> String {
        let sweep = match &self.sweep {
            SweepAxis::SnrDb(v) => format!("snr:{v:?}"),
            SweepAxis::SirDb(v) => format!("sir:{v:?}"),
            SweepAxis::NBsg(v) => format!("n_bsg:{v:?}"),
            SweepAxis::Pattern(v) => format!(
                "pattern:{:?}",
                v.iter().map(|k| k.to_string()).collect::<Vec<_>>()
            ),
        };
        format!(
            "n_rb={} n_symbols={} n_layers={} n_t={} n_r={} delay_spread={:e} speed={:e} \
             carrier={:e} scs={:e} n_taps={} pattern_kind={} n_per_rb={} n_bsg={} \
             pilot_symbols={:?} pilot_stride={} receivers={:?} sweep={} snr_db={:e} seeds={} \
             frames_per_seed={} master_seed={} power_norm={:?} alpha={:?}",
            self.n_rb,
            self.n_symbols,
            self.n_layers,
            self.n_t,
            self.n_r,
            self.delay_spread,
            self.speed,
            self.carrier,
            self.scs,
            self.n_taps,
            self.pattern_kind,
            self.n_per_rb,
            self.n_bsg,
            self.pilot_symbols,
            self.pilot_stride,
            self.receivers.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
            sweep,
            self.snr_db,
            self.seeds,
            self.frames_per_seed,
            self.master_seed,
            self.power_norm,
            self.alpha_override,
        )
    }

    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_string().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Parse the flat `section.key = value` format. Unknown keys and
    /// malformed values are reported with their line number.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        let mut axis: Option<String> = None;
        let mut snr_list: Option<Vec<f64>> = None;
        let mut sir_list: Option<Vec<f64>> = None;
        let mut bsg_list: Option<Vec<usize>> = None;
        let mut pattern_list: Option<Vec<PatternKind>> = None;
        let mut seen = std::collections::HashSet::new();

        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lno = lineno + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config_at(lno, "expected 'key = value'"))?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::config_at(lno, format!("duplicate key {key:?}")));
            }
            let bad = |what: &str| Error::config_at(lno, format!("invalid {what}: {value:?}"));
            match key {
                "grid.n_rb" => cfg.n_rb = value.parse().map_err(|_| bad("count"))?,
                "grid.n_symbols" => cfg.n_symbols = value.parse().map_err(|_| bad("count"))?,
                "grid.n_layers" => cfg.n_layers = value.parse().map_err(|_| bad("count"))?,
                "channel.n_t" => cfg.n_t = value.parse().map_err(|_| bad("count"))?,
                "channel.n_r" => cfg.n_r = value.parse().map_err(|_| bad("count"))?,
                "channel.delay_spread" => {
                    cfg.delay_spread = parse_float(value).ok_or_else(|| bad("seconds"))?
                }
                "channel.speed_kmh" => {
                    cfg.speed = parse_float(value).ok_or_else(|| bad("speed"))? / 3.6
                }
                "channel.carrier" => cfg.carrier = parse_float(value).ok_or_else(|| bad("Hz"))?,
                "channel.scs" => cfg.scs = parse_float(value).ok_or_else(|| bad("Hz"))?,
                "channel.n_taps" => cfg.n_taps = value.parse().map_err(|_| bad("count"))?,
                "pattern.kind" => {
                    cfg.pattern_kind = value.parse().map_err(|_| bad("pattern kind"))?
                }
                "pattern.n_per_rb" => cfg.n_per_rb = value.parse().map_err(|_| bad("count"))?,
                "pattern.n_bsg" => cfg.n_bsg = value.parse().map_err(|_| bad("count"))?,
                "pilot.symbols" => {
                    cfg.pilot_symbols = parse_list(value).ok_or_else(|| bad("symbol list"))?
                }
                "pilot.stride" => cfg.pilot_stride = value.parse().map_err(|_| bad("count"))?,
                "sim.receivers" => {
                    let mut rs = Vec::new();
                    for item in value.split(',') {
                        rs.push(
                            item.trim()
                                .parse::<Receiver>()
                                .map_err(|_| bad("receiver list"))?,
                        );
                    }
                    rs.sort_unstable();
                    rs.dedup();
                    cfg.receivers = rs;
                }
                "sim.seeds" => cfg.seeds = value.parse().map_err(|_| bad("count"))?,
                "sim.frames_per_seed" => {
                    cfg.frames_per_seed = value.parse().map_err(|_| bad("count"))?
                }
                "sim.master_seed" => cfg.master_seed = value.parse().map_err(|_| bad("seed"))?,
                "sim.snr_db" => cfg.snr_db = parse_float(value).ok_or_else(|| bad("dB"))?,
                "sim.power_norm" => {
                    cfg.power_norm = match value {
                        "rsqrt" => PowerNorm::RsqrtLayers,
                        "unit-total" => PowerNorm::UnitTotal,
                        _ => return Err(bad("power norm (rsqrt|unit-total)")),
                    }
                }
                "sim.alpha" => {
                    let list: Option<Vec<f64>> =
                        value.split(',').map(|s| parse_float(s.trim())).collect();
                    cfg.alpha_override = Some(list.ok_or_else(|| bad("alpha list"))?);
                }
                "sweep.axis" => axis = Some(value.to_string()),
                "sweep.snr_db" => {
                    let list: Option<Vec<f64>> =
                        value.split(',').map(|s| parse_float(s.trim())).collect();
                    snr_list = Some(list.ok_or_else(|| bad("dB list"))?);
                }
                "sweep.sir_db" => {
                    let list: Option<Vec<f64>> =
                        value.split(',').map(|s| parse_float(s.trim())).collect();
                    sir_list = Some(list.ok_or_else(|| bad("dB list"))?);
                }
                "sweep.n_bsg" => {
                    bsg_list = Some(parse_list(value).ok_or_else(|| bad("count list"))?)
                }
                "sweep.pattern" => {
                    let mut kinds = Vec::new();
                    for item in value.split(',') {
                        kinds.push(
                            item.trim()
                                .parse::<PatternKind>()
                                .map_err(|_| bad("pattern list"))?,
                        );
                    }
                    pattern_list = Some(kinds);
                }
                other => {
                    return Err(Error::config_at(lno, format!("unknown key {other:?}")));
                }
            }
        }

        let axis = axis.unwrap_or_else(|| "snr".to_string());
        cfg.sweep = match axis.as_str() {
            "snr" => {
                let mut v = snr_list
                    .or_else(|| match &cfg.sweep {
                        SweepAxis::SnrDb(v) => Some(v.clone()),
                        _ => None,
                    })
                    .unwrap_or_default();
                v.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
                v.dedup();
                SweepAxis::SnrDb(v)
            }
            "sir" => {
                let mut v = sir_list.ok_or_else(|| Error::config("sweep.sir_db required"))?;
                v.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
                v.dedup();
                SweepAxis::SirDb(v)
            }
            "n_bsg" => {
                let mut v = bsg_list.ok_or_else(|| Error::config("sweep.n_bsg required"))?;
                v.sort_unstable();
                v.dedup();
                SweepAxis::NBsg(v)
            }
            "pattern" => {
                let v = pattern_list
                    .unwrap_or_else(|| vec![PatternKind::TimeRepetition, PatternKind::FrequencyRepetition]);
                SweepAxis::Pattern(v)
            }
            other => {
                return Err(Error::config(format!(
                    "unknown sweep axis {other:?} (snr|sir|n_bsg|pattern)"
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}


fn parse_float(s: &str) -> Option<f64> {
    match s {
        "inf" | "+inf" => Some(f64::INFINITY),
        _ => s.parse::<f64>().ok().filter(|x| !x.is_nan()),
    }
}

fn parse_list(s: &str) -> Option<Vec<usize>> {
    s.split(',').map(|x| x.trim().parse::<usize>().ok()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# snr sweep, desk scale
grid.n_rb = 12
grid.n_layers = 1
channel.delay_spread = 30e-9   # seconds
channel.speed_kmh = 3
pattern.kind = time
pattern.n_bsg = 2
sim.receivers = cca,pilot,pchan
sweep.axis = snr
sweep.snr_db = 20,0,5,10,15
";

    #[test]
    fn parses_and_sorts_points() {
        let cfg = SimConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.n_rb, 12);
        assert!((cfg.speed - 3.0 / 3.6).abs() < 1e-12);
        match &cfg.sweep {
            SweepAxis::SnrDb(v) => assert_eq!(v, &vec![0.0, 5.0, 10.0, 15.0, 20.0]),
            _ => panic!("wrong axis"),
        }
    }

    #[test]
    fn rejects_unknown_and_malformed_keys_with_line_numbers() {
        let err = SimConfig::parse("grid.n_rb = twelve\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(1), .. }), "{err}");
        let err = SimConfig::parse("grid.n_rb = 12\nbogus.key = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(2), .. }), "{err}");
    }

    #[test]
    fn validation_collects_divisibility_errors() {
        let mut cfg = SimConfig::default();
        cfg.n_rb = 50;
        cfg.sweep = SweepAxis::NBsg(vec![1, 2, 4, 5]);
        let err = cfg.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('4'), "{msg}");
        cfg.sweep = SweepAxis::NBsg(vec![1, 2, 5, 10, 25, 50]);
        cfg.validate().unwrap();
    }

    #[test]
    fn sir_requires_two_layers() {
        let mut cfg = SimConfig::default();
        cfg.sweep = SweepAxis::SirDb(vec![0.0]);
        assert!(cfg.validate().is_err());
        cfg.n_layers = 2;
        cfg.validate().unwrap();
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = SimConfig::default();
        let mut b = SimConfig::default();
        assert_eq!(a.hash(), b.hash());
        b.master_seed = 2;
        assert_ne!(a.hash(), b.hash());
    }
}
