//! Resource-grid geometry: RE linear indexing, repetition-pattern
//! generation in both orientations, sub-grid partitioning, vicinity maps
//! for combiner application, and coherence-block heuristics.
//!
//! A pattern reserves, per layer, a source block and a destination block of
//! resource elements. The transmitter copies the source symbols to the
//! destination positions; the receiver gathers both blocks into a pair of
//! views. Placement is identical in every resource block so a single
//! per-RB description defines the pattern for the whole grid.

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Subcarriers per resource block.
pub const SUBCARRIERS_PER_RB: usize = 12;

/// Default OFDM symbols per slot.
pub const DEFAULT_SYMBOLS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridDims {
    pub n_rb: usize,
    pub n_symbols: usize,
    pub n_layers: usize,
}

impl GridDims {
    pub fn new(n_rb: usize, n_symbols: usize, n_layers: usize) -> Result<Self> {
        if n_rb == 0 || n_symbols == 0 || n_layers == 0 {
            return Err(Error::Dimension(
                "grid dimensions must all be at least 1".into(),
            ));
        }
        Ok(Self {
            n_rb,
            n_symbols,
            n_layers,
        })
    }

    pub fn n_subcarriers(&self) -> usize {
        SUBCARRIERS_PER_RB * self.n_rb
    }

    /// Total resource elements per layer grid.
    pub fn n_res(&self) -> usize {
        self.n_subcarriers() * self.n_symbols
    }
}

/// One-based linear index of the RE at subcarrier `m`, symbol `n`:
/// `12·n·n_rb + m + 1`.
pub fn re_index(m: usize, n: usize, n_rb: usize) -> Result<usize> {
    if m >= SUBCARRIERS_PER_RB * n_rb {
        return Err(Error::IndexOutOfRange(format!(
            "subcarrier {m} out of range for {n_rb} RBs"
        )));
    }
    Ok(SUBCARRIERS_PER_RB * n * n_rb + m + 1)
}

/// Inverse of [`re_index`]: (subcarrier, symbol) of a linear index.
pub fn re_coords(idx: usize, n_rb: usize) -> (usize, usize) {
    let z = idx - 1;
    let width = SUBCARRIERS_PER_RB * n_rb;
    (z % width, z / width)
}

/// Repetition orientation of a pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    /// Source concentrated in one early symbol column, copy in the mirrored
    /// late column: the repetition axis is time.
    TimeRepetition,
    /// Source on a low pair of subcarrier rows, copy on the mirrored high
    /// pair: the repetition axis is frequency.
    FrequencyRepetition,
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternKind::TimeRepetition => write!(f, "time-repetition"),
            PatternKind::FrequencyRepetition => write!(f, "frequency-repetition"),
        }
    }
}

impl FromStr for PatternKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" | "time-repetition" => Ok(PatternKind::TimeRepetition),
            "freq" | "frequency" | "frequency-repetition" => Ok(PatternKind::FrequencyRepetition),
            other => Err(Error::config(format!(
                "unknown pattern kind {other:?} (expected time|freq)"
            ))),
        }
    }
}

/// Partition of the grid into equal contiguous groups of RBs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubGridLayout {
    pub n_bsg: usize,
    pub subgrid_count: usize,
    /// RB range of each sub-grid.
    pub rb_ranges: Vec<std::ops::Range<usize>>,
}

pub fn partition_subgrids(dims: &GridDims, n_bsg: usize) -> Result<SubGridLayout> {
    if n_bsg == 0 || dims.n_rb % n_bsg != 0 {
        return Err(Error::config(format!(
            "sub-grid size {n_bsg} does not divide {} RBs",
            dims.n_rb
        )));
    }
    let subgrid_count = dims.n_rb / n_bsg;
    let rb_ranges = (0..subgrid_count)
        .map(|j| j * n_bsg..(j + 1) * n_bsg)
        .collect();
    Ok(SubGridLayout {
        n_bsg,
        subgrid_count,
        rb_ranges,
    })
}

/// Per-RB placement, identical across all RBs: (subcarrier-within-RB, symbol)
/// of each source RE and of its destination copy, in pairing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasePattern {
    pub src: Vec<(usize, usize)>,
    pub dst: Vec<(usize, usize)>,
}

/// Source/destination RE indices of one sub-grid. Position `k` of `src`
/// pairs with position `k` of `dst` (the copy order); both lists ascend in
/// linear index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSubgrid {
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
}

/// Repetition pattern of one layer over the whole grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CcaPattern {
    pub layer: usize,
    pub kind: PatternKind,
    /// N̄̄: source REs per RB.
    pub n_per_rb: usize,
    /// N̄ = N̄̄ · N_BSG: view length per sub-grid.
    pub view_len: usize,
    pub base: BasePattern,
    pub subgrids: Vec<PatternSubgrid>,
}

impl CcaPattern {
    /// All REs (sources and destinations) of this pattern.
    pub fn all_res(&self) -> impl Iterator<Item = usize> + '_ {
        self.subgrids
            .iter()
            .flat_map(|sg| sg.src.iter().chain(sg.dst.iter()).copied())
    }

    pub fn is_disjoint_from(&self, other: &CcaPattern) -> bool {
        let mine: std::collections::HashSet<usize> = self.all_res().collect();
        other.all_res().all(|i| !mine.contains(&i))
    }

    /// Linear index of the phase-reference RE of each sub-grid: the first
    /// source position of the repeated block.
    pub fn phase_ref_res(&self) -> Vec<usize> {
        self.subgrids.iter().map(|sg| sg.src[0]).collect()
    }

    /// Check the structural invariants: per-sub-grid cardinality, source and
    /// destination disjointness, in-range indices, and per-RB symmetry.
    pub fn validate(&self, dims: &GridDims, layout: &SubGridLayout) -> Result<()> {
        if self.subgrids.len() != layout.subgrid_count {
            return Err(Error::PatternInfeasible(format!(
                "{} sub-grid entries for {} sub-grids",
                self.subgrids.len(),
                layout.subgrid_count
            )));
        }
        if self.view_len != self.n_per_rb * layout.n_bsg {
            return Err(Error::PatternInfeasible(
                "view length must be n_per_rb * n_bsg".into(),
            ));
        }
        let n_res = dims.n_res();
        for (j, sg) in self.subgrids.iter().enumerate() {
            if sg.src.len() != self.view_len || sg.dst.len() != self.view_len {
                return Err(Error::PatternInfeasible(format!(
                    "sub-grid {j} has |src|={} |dst|={}, expected {}",
                    sg.src.len(),
                    sg.dst.len(),
                    self.view_len
                )));
            }
            let mut seen = std::collections::HashSet::new();
            for &i in sg.src.iter().chain(sg.dst.iter()) {
                if i == 0 || i > n_res {
                    return Err(Error::IndexOutOfRange(format!("linear index {i}")));
                }
                if !seen.insert(i) {
                    return Err(Error::PatternInfeasible(format!(
                        "sub-grid {j}: index {i} used twice"
                    )));
                }
            }
            // Per-RB symmetry and copy pairing: every (source, destination)
            // pair must sit in one RB and reproduce the base placement.
            let base_map: std::collections::HashMap<(usize, usize), (usize, usize)> = self
                .base
                .src
                .iter()
                .copied()
                .zip(self.base.dst.iter().copied())
                .collect();
            for (&s, &d) in sg.src.iter().zip(sg.dst.iter()) {
                let (ms, ss) = re_coords(s, dims.n_rb);
                let (md, sd) = re_coords(d, dims.n_rb);
                let (rb_s, rb_d) = (ms / SUBCARRIERS_PER_RB, md / SUBCARRIERS_PER_RB);
                let key = (ms % SUBCARRIERS_PER_RB, ss);
                if rb_s != rb_d
                    || !layout.rb_ranges[j].contains(&rb_s)
                    || base_map.get(&key) != Some(&(md % SUBCARRIERS_PER_RB, sd))
                {
                    return Err(Error::PatternInfeasible(format!(
                        "sub-grid {j} breaks per-RB symmetry at pair ({s}, {d})"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn base_placement(kind: PatternKind, dims: &GridDims, n_per_rb: usize, layer: usize) -> Result<BasePattern> {
    match kind {
        PatternKind::TimeRepetition => {
            if n_per_rb == 0 || n_per_rb > SUBCARRIERS_PER_RB {
                return Err(Error::PatternInfeasible(format!(
                    "time repetition supports 1..=12 REs per RB, got {n_per_rb}"
                )));
            }
            // Layer l uses symbol l and its mirror; layers never overlap.
            let src_sym = layer;
            let dst_sym = dims.n_symbols - 1 - layer;
            if src_sym >= dst_sym {
                return Err(Error::PatternInfeasible(format!(
                    "no room for layer {layer} in {} symbols",
                    dims.n_symbols
                )));
            }
            let row0 = (SUBCARRIERS_PER_RB - n_per_rb) / 2;
            let src = (0..n_per_rb).map(|k| (row0 + k, src_sym)).collect();
            let dst = (0..n_per_rb).map(|k| (row0 + k, dst_sym)).collect();
            Ok(BasePattern { src, dst })
        }
        PatternKind::FrequencyRepetition => {
            if n_per_rb == 0 || n_per_rb % 2 != 0 {
                return Err(Error::PatternInfeasible(format!(
                    "frequency repetition needs an even number of REs per RB, got {n_per_rb}"
                )));
            }
            let n_sym = n_per_rb / 2;
            if n_sym > dims.n_symbols {
                return Err(Error::PatternInfeasible(format!(
                    "{n_sym} pattern symbols exceed the {}-symbol slot",
                    dims.n_symbols
                )));
            }
            // Layer l uses row pair (2l, 2l+1) and its mirror near the top.
            let src_row = 2 * layer;
            let dst_row = SUBCARRIERS_PER_RB - 2 - 2 * layer;
            if src_row + 1 >= dst_row {
                return Err(Error::PatternInfeasible(format!(
                    "no room for layer {layer} in {SUBCARRIERS_PER_RB} subcarrier rows"
                )));
            }
            let sym0 = (dims.n_symbols - n_sym) / 2;
            let mut src = Vec::with_capacity(n_per_rb);
            let mut dst = Vec::with_capacity(n_per_rb);
            for s in 0..n_sym {
                for r in 0..2 {
                    src.push((src_row + r, sym0 + s));
                    dst.push((dst_row + r, sym0 + s));
                }
            }
            Ok(BasePattern { src, dst })
        }
    }
}

fn expand_base(
    base: &BasePattern,
    dims: &GridDims,
    layout: &SubGridLayout,
    kind: PatternKind,
    n_per_rb: usize,
    layer: usize,
) -> Result<CcaPattern> {
    let mut subgrids = Vec::with_capacity(layout.subgrid_count);
    for range in &layout.rb_ranges {
        let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(n_per_rb * layout.n_bsg);
        for rb in range.clone() {
            for (&(sr, ss), &(dr, ds)) in base.src.iter().zip(base.dst.iter()) {
                if ss >= dims.n_symbols || ds >= dims.n_symbols {
                    return Err(Error::PatternInfeasible("symbol outside slot".into()));
                }
                let s = re_index(rb * SUBCARRIERS_PER_RB + sr, ss, dims.n_rb)?;
                let d = re_index(rb * SUBCARRIERS_PER_RB + dr, ds, dims.n_rb)?;
                pairs.push((s, d));
            }
        }
        pairs.sort_unstable_by_key(|&(s, _)| s);
        subgrids.push(PatternSubgrid {
            src: pairs.iter().map(|&(s, _)| s).collect(),
            dst: pairs.iter().map(|&(_, d)| d).collect(),
        });
    }
    let pattern = CcaPattern {
        layer,
        kind,
        n_per_rb,
        view_len: n_per_rb * layout.n_bsg,
        base: base.clone(),
        subgrids,
    };
    pattern.validate(dims, layout)?;
    Ok(pattern)
}

/// Generate the repetition pattern of one layer.
pub fn make_pattern(
    dims: &GridDims,
    layout: &SubGridLayout,
    kind: PatternKind,
    n_per_rb: usize,
    layer: usize,
) -> Result<CcaPattern> {
    let base = base_placement(kind, dims, n_per_rb, layer)?;
    expand_base(&base, dims, layout, kind, n_per_rb, layer)
}

/// Cyclically shift a pattern along its repetition axis (symbols for time
/// repetition, subcarrier rows for frequency repetition) and relabel it for
/// `target_layer`. Errors if the shifted pattern collides with the input.
pub fn shift_pattern(
    p: &CcaPattern,
    dims: &GridDims,
    layout: &SubGridLayout,
    shift: usize,
    target_layer: usize,
) -> Result<CcaPattern> {
    let move_re = |&(row, sym): &(usize, usize)| -> (usize, usize) {
        match p.kind {
            PatternKind::TimeRepetition => (row, (sym + shift) % dims.n_symbols),
            PatternKind::FrequencyRepetition => ((row + shift) % SUBCARRIERS_PER_RB, sym),
        }
    };
    let base = BasePattern {
        src: p.base.src.iter().map(move_re).collect(),
        dst: p.base.dst.iter().map(move_re).collect(),
    };
    let shifted = expand_base(&base, dims, layout, p.kind, p.n_per_rb, target_layer)?;
    if !shifted.is_disjoint_from(p) {
        return Err(Error::PatternInfeasible(format!(
            "shift by {shift} collides with the original pattern"
        )));
    }
    Ok(shifted)
}

/// Generate pairwise-disjoint patterns for every layer.
pub fn layer_patterns(
    dims: &GridDims,
    layout: &SubGridLayout,
    kind: PatternKind,
    n_per_rb: usize,
) -> Result<Vec<CcaPattern>> {
    let mut out: Vec<CcaPattern> = Vec::with_capacity(dims.n_layers);
    for layer in 0..dims.n_layers {
        let p = make_pattern(dims, layout, kind, n_per_rb, layer)?;
        for prev in &out {
            if !p.is_disjoint_from(prev) {
                return Err(Error::PatternInfeasible(format!(
                    "patterns of layers {} and {layer} overlap",
                    prev.layer
                )));
            }
        }
        out.push(p);
    }
    Ok(out)
}

/// Assignment of every ordinary data RE of a sub-grid to the view whose
/// block it is nearest to. The source and destination blocks themselves are
/// not part of the map.
#[derive(Debug, Clone)]
pub struct VicinityMap {
    /// Per sub-grid: (linear index, view in {1, 2}), ascending in index.
    pub subgrids: Vec<Vec<(usize, u8)>>,
}

impl VicinityMap {
    pub fn counts(&self, j: usize) -> (usize, usize) {
        let mut n1 = 0;
        let mut n2 = 0;
        for &(_, v) in &self.subgrids[j] {
            if v == 1 {
                n1 += 1;
            } else {
                n2 += 1;
            }
        }
        (n1, n2)
    }
}

/// Assign every data RE of each sub-grid to the nearest view block under
/// Euclidean distance in (subcarrier, symbol) index space; ties go to view 1.
pub fn vicinity_partition(
    dims: &GridDims,
    layout: &SubGridLayout,
    p: &CcaPattern,
) -> VicinityMap {
    let mut subgrids = Vec::with_capacity(layout.subgrid_count);
    for (j, range) in layout.rb_ranges.iter().enumerate() {
        let sg = &p.subgrids[j];
        let block: Vec<Vec<(f64, f64)>> = [&sg.src, &sg.dst]
            .iter()
            .map(|list| {
                list.iter()
                    .map(|&i| {
                        let (m, n) = re_coords(i, dims.n_rb);
                        (m as f64, n as f64)
                    })
                    .collect()
            })
            .collect();
        let excluded: std::collections::HashSet<usize> =
            sg.src.iter().chain(sg.dst.iter()).copied().collect();
        let mut assignment = Vec::new();
        for rb in range.clone() {
            for sym in 0..dims.n_symbols {
                for row in 0..SUBCARRIERS_PER_RB {
                    let m = rb * SUBCARRIERS_PER_RB + row;
                    let idx = re_index(m, sym, dims.n_rb).expect("in range");
                    if excluded.contains(&idx) {
                        continue;
                    }
                    let dist = |pts: &[(f64, f64)]| -> f64 {
                        pts.iter()
                            .map(|&(bm, bn)| {
                                let dm = m as f64 - bm;
                                let dn = sym as f64 - bn;
                                dm * dm + dn * dn
                            })
                            .fold(f64::INFINITY, f64::min)
                    };
                    let d1 = dist(&block[0]);
                    let d2 = dist(&block[1]);
                    assignment.push((idx, if d1 <= d2 { 1 } else { 2 }));
                }
            }
        }
        assignment.sort_unstable_by_key(|&(i, _)| i);
        subgrids.push(assignment);
    }
    VicinityMap { subgrids }
}

/// Speed of light in m/s.
const C_LIGHT: f64 = 299_792_458.0;

/// Time-bandwidth coherence block of a channel, in physical units and in
/// grid cells. Uses the rules of thumb B_c = 1/(5·DS) and T_c = 0.423/f_D.
#[derive(Debug, Clone, Copy)]
pub struct CoherenceBlock {
    pub coherence_bw_hz: f64,
    pub coherence_time_s: f64,
    pub coherent_subcarriers: f64,
    pub coherent_symbols: f64,
}

pub fn coherence_block(
    scs_hz: f64,
    delay_spread_s: f64,
    speed_m_s: f64,
    carrier_hz: f64,
) -> Result<CoherenceBlock> {
    if scs_hz <= 0.0 || carrier_hz <= 0.0 || delay_spread_s < 0.0 || speed_m_s < 0.0 {
        return Err(Error::config(
            "coherence parameters must be positive (speed and delay spread may be zero)",
        ));
    }
    let coherence_bw_hz = if delay_spread_s == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (5.0 * delay_spread_s)
    };
    let coherence_time_s = if speed_m_s == 0.0 {
        f64::INFINITY
    } else {
        0.423 * C_LIGHT / (carrier_hz * speed_m_s)
    };
    let symbol_s = 1.0 / scs_hz;
    Ok(CoherenceBlock {
        coherence_bw_hz,
        coherence_time_s,
        coherent_subcarriers: coherence_bw_hz / scs_hz,
        coherent_symbols: coherence_time_s / symbol_s,
    })
}

/// Pick the repetition orientation whose repetition axis has the larger
/// slack inside the coherence block: the time axis is measured against the
/// slot length, the frequency axis against one RB (the per-RB copy
/// distance). Ties prefer time repetition.
pub fn select_pattern_kind(block: &CoherenceBlock, dims: &GridDims) -> PatternKind {
    let time_slack = block.coherent_symbols / dims.n_symbols as f64;
    let freq_slack = block.coherent_subcarriers / SUBCARRIERS_PER_RB as f64;
    if freq_slack > time_slack {
        PatternKind::FrequencyRepetition
    } else {
        PatternKind::TimeRepetition
    }
}

/// Write patterns in the text exchange format: `# key value` headers, then
/// one `layer subgrid role index` line per RE, sorted.
pub fn export_patterns(dims: &GridDims, layout: &SubGridLayout, patterns: &[CcaPattern]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# n_rb {}\n", dims.n_rb));
    out.push_str(&format!("# n_symbols {}\n", dims.n_symbols));
    out.push_str(&format!("# n_layers {}\n", patterns.len()));
    out.push_str(&format!("# n_bsg {}\n", layout.n_bsg));
    if let Some(p) = patterns.first() {
        out.push_str(&format!("# kind {}\n", p.kind));
        out.push_str(&format!("# n_per_rb {}\n", p.n_per_rb));
    }
    let mut lines: Vec<(usize, usize, char, usize)> = Vec::new();
    for p in patterns {
        for (j, sg) in p.subgrids.iter().enumerate() {
            lines.extend(sg.src.iter().map(|&i| (p.layer, j, 'S', i)));
            lines.extend(sg.dst.iter().map(|&i| (p.layer, j, 'D', i)));
        }
    }
    lines.sort_unstable();
    for (layer, j, role, idx) in lines {
        out.push_str(&format!("{layer} {j} {role} {idx}\n"));
    }
    out
}

/// Parse the output of [`export_patterns`]. The copy pairing is rebuilt by
/// the canonical rule: the k-th smallest source index pairs with the k-th
/// smallest destination index of its sub-grid.
pub fn import_patterns(text: &str) -> Result<(GridDims, SubGridLayout, Vec<CcaPattern>)> {
    let mut headers = std::collections::HashMap::new();
    let mut entries: Vec<(usize, usize, char, usize)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            if let (Some(k), Some(v)) = (it.next(), it.next()) {
                headers.insert(k.to_string(), v.to_string());
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::config_at(lineno + 1, "expected: layer subgrid role index"));
        }
        let layer = fields[0]
            .parse()
            .map_err(|_| Error::config_at(lineno + 1, "bad layer"))?;
        let sgidx = fields[1]
            .parse()
            .map_err(|_| Error::config_at(lineno + 1, "bad subgrid"))?;
        let role = match fields[2] {
            "S" => 'S',
            "D" => 'D',
            _ => return Err(Error::config_at(lineno + 1, "role must be S or D")),
        };
        let idx = fields[3]
            .parse()
            .map_err(|_| Error::config_at(lineno + 1, "bad index"))?;
        entries.push((layer, sgidx, role, idx));
    }
    let get = |k: &str| -> Result<usize> {
        headers
            .get(k)
            .ok_or_else(|| Error::config(format!("missing header '# {k} ...'")))?
            .parse::<usize>()
            .map_err(|_| Error::config(format!("bad header value for {k}")))
    };
    let n_rb = get("n_rb")?;
    let n_symbols = get("n_symbols")?;
    let n_layers = get("n_layers")?;
    let n_bsg = get("n_bsg")?;
    let n_per_rb = get("n_per_rb")?;
    let kind: PatternKind = headers
        .get("kind")
        .ok_or_else(|| Error::config("missing header '# kind ...'"))?
        .parse()?;
    let dims = GridDims::new(n_rb, n_symbols, n_layers)?;
    let layout = partition_subgrids(&dims, n_bsg)?;
    let mut patterns = Vec::new();
    for layer in 0..n_layers {
        let mut subgrids = Vec::new();
        for j in 0..layout.subgrid_count {
            let mut src: Vec<usize> = entries
                .iter()
                .filter(|e| e.0 == layer && e.1 == j && e.2 == 'S')
                .map(|e| e.3)
                .collect();
            let mut dst: Vec<usize> = entries
                .iter()
                .filter(|e| e.0 == layer && e.1 == j && e.2 == 'D')
                .map(|e| e.3)
                .collect();
            src.sort_unstable();
            dst.sort_unstable();
            if src.len() != dst.len() {
                return Err(Error::config(format!(
                    "layer {layer} sub-grid {j}: |S| != |D|"
                )));
            }
            subgrids.push(PatternSubgrid { src, dst });
        }
        // Rebuild the per-RB base from the first RB of the first sub-grid.
        let first = &subgrids[0];
        let to_base = |list: &[usize]| -> Vec<(usize, usize)> {
            list.iter()
                .filter_map(|&i| {
                    let (m, n) = re_coords(i, n_rb);
                    (m / SUBCARRIERS_PER_RB == 0).then_some((m % SUBCARRIERS_PER_RB, n))
                })
                .collect()
        };
        let base = BasePattern {
            src: to_base(&first.src),
            dst: to_base(&first.dst),
        };
        let p = CcaPattern {
            layer,
            kind,
            n_per_rb,
            view_len: n_per_rb * n_bsg,
            base,
            subgrids,
        };
        p.validate(&dims, &layout)?;
        patterns.push(p);
    }
    Ok((dims, layout, patterns))
}
