//! Bistable stop-learning synapse cells, their shared row driver and the
//! weight RAM.
//!
//! The state `x` is kept in normalized units on `[0, 1]`. The comparator
//! threshold sits at one half.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_positive, check_range, invalid, Error, Result};
use crate::model::LearnGate;
use crate::presyn::LeakModel;

/// One of the two storage capacitors of a synapse cell.
pub const SYN_CAPACITANCE: f64 = 22e-15;
pub const THETA_X: f64 = 0.5;
pub const MAX_WEIGHT: u8 = 15;

/// Explicit learn-force setting, equivalent to a permanently high or low
/// membrane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceMode {
    Up,
    Down,
}

impl ForceMode {
    /// Builds the force setting from the two register bits.
    pub fn from_flags(up: bool, down: bool) -> Result<Option<ForceMode>> {
        match (up, down) {
            (true, true) => Err(Error::ConflictingForce),
            (true, false) => Ok(Some(ForceMode::Up)),
            (false, true) => Ok(Some(ForceMode::Down)),
            (false, false) => Ok(None),
        }
    }
}

/// Shared SC integrator driving all cells of a row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowDriver {
    pub c_refr: f64,
    pub c_hebb: f64,
    pub c_syn: f64,
    pub v_alpha: f64,
    pub v_beta: f64,
    pub v_a: f64,
    pub v_b: f64,
    pub v_cm: f64,
    /// Additive offset on the comparison, left over after auto-zeroing.
    pub residual_offset: f64,
}

impl Default for RowDriver {
    /// Calibrated so that `a = b = 0.07` and the refresh step is `8e-4`
    /// per cycle.
    fn default() -> Self {
        RowDriver {
            c_refr: 0.05 * SYN_CAPACITANCE,
            c_hebb: 0.2 * SYN_CAPACITANCE,
            c_syn: SYN_CAPACITANCE,
            v_alpha: 0.516,
            v_beta: 0.516,
            v_a: 0.85,
            v_b: 0.85,
            v_cm: 0.5,
            residual_offset: 0.0,
        }
    }
}

impl RowDriver {
    pub fn validate(&self) -> Result<()> {
        check_positive("c_refr", self.c_refr)?;
        check_positive("c_hebb", self.c_hebb)?;
        check_positive("c_syn", self.c_syn)?;
        check_range("v_cm", self.v_cm, 0.0, 1.0)?;
        check_range("v_alpha", self.v_alpha, self.v_cm, 1.0)?;
        check_range("v_beta", self.v_beta, self.v_cm, 1.0)?;
        check_range("v_a", self.v_a, self.v_cm, 1.0)?;
        check_range("v_b", self.v_b, self.v_cm, 1.0)?;
        if !self.residual_offset.is_finite() {
            return Err(invalid("residual_offset", "must be finite"));
        }
        Ok(())
    }

    /// Refresh step applied per cycle while potentiated.
    pub fn alpha_step(&self) -> f64 {
        self.c_refr / self.c_syn * (self.v_alpha - self.v_cm)
    }

    /// Refresh step removed per cycle while depressed.
    pub fn beta_step(&self) -> f64 {
        self.c_refr / self.c_syn * (self.v_beta - self.v_cm)
    }

    pub fn jump_up(&self) -> f64 {
        self.c_hebb / self.c_syn * (self.v_a - self.v_cm)
    }

    pub fn jump_down(&self) -> f64 {
        self.c_hebb / self.c_syn * (self.v_b - self.v_cm)
    }
}

/// Per-cell multiplicative capacitor mismatch on the four step sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMismatch {
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for CellMismatch {
    fn default() -> Self {
        CellMismatch { alpha: 1.0, beta: 1.0, a: 1.0, b: 1.0 }
    }
}

impl CellMismatch {
    /// Draws four independent factors `N(1, sigma)`, floored at zero.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Result<Self> {
        if sigma == 0.0 {
            return Ok(CellMismatch::default());
        }
        let normal = Normal::new(1.0, sigma).map_err(|e| invalid("mismatch_sigma", e.to_string()))?;
        let mut draw = || normal.sample(rng).max(0.0);
        Ok(CellMismatch { alpha: draw(), beta: draw(), a: draw(), b: draw() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynapseCell {
    pub x: f64,
    pub mismatch: CellMismatch,
}

impl Default for SynapseCell {
    fn default() -> Self {
        SynapseCell { x: 0.0, mismatch: CellMismatch::default() }
    }
}

impl SynapseCell {
    pub fn with_state(x: f64) -> Self {
        SynapseCell { x, ..SynapseCell::default() }
    }

    /// Comparator output: potentiated iff `x + offset > 0.5`.
    pub fn comp(&self, driver: &RowDriver) -> bool {
        self.x + driver.residual_offset > THETA_X
    }
}

/// One integration phase of a cell: comparison, refresh, then the hebbian
/// term if the row carries a presynaptic spike.
///
/// The force setting replaces the membrane condition; the learning enables
/// still apply.
pub fn process_synapse(
    cell: SynapseCell,
    driver: &RowDriver,
    pre_spike: bool,
    v_mem_elevated: bool,
    gate: LearnGate,
    force: Option<ForceMode>,
) -> (SynapseCell, bool) {
    let comp = cell.comp(driver);
    let m = cell.mismatch;
    let mut x = if comp {
        cell.x + driver.alpha_step() * m.alpha
    } else {
        cell.x - driver.beta_step() * m.beta
    };
    x = x.clamp(0.0, 1.0);
    if pre_spike {
        let elevated = match force {
            Some(ForceMode::Up) => true,
            Some(ForceMode::Down) => false,
            None => v_mem_elevated,
        };
        if elevated && gate.up {
            x += driver.jump_up() * m.a;
        } else if !elevated && gate.down {
            x -= driver.jump_down() * m.b;
        }
        x = x.clamp(0.0, 1.0);
    }
    (SynapseCell { x, ..cell }, comp)
}

/// Relaxes `x` toward zero differential voltage (`x = 0.5`) with
/// `tau = R_leak(T)·c_syn`. `dt` is wall time.
pub fn leak_cell(cell: SynapseCell, leak: &LeakModel, c_syn: f64, dt: f64, temperature: f64) -> SynapseCell {
    match leak.time_constant(c_syn, temperature) {
        Some(tau) if dt > 0.0 => SynapseCell {
            x: THETA_X + (cell.x - THETA_X) * (-dt / tau).exp(),
            ..cell
        },
        _ => cell,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WeightEntry {
    pub ltp: u8,
    pub ltd: u8,
    pub inhibitory: bool,
}

impl WeightEntry {
    pub fn new(ltp: u8, ltd: u8, inhibitory: bool) -> Result<Self> {
        if ltp > MAX_WEIGHT || ltd > MAX_WEIGHT {
            return Err(invalid("weight", format!("({ltp}, {ltd}) exceeds {MAX_WEIGHT}")));
        }
        Ok(WeightEntry { ltp, ltd, inhibitory })
    }

    fn to_bits(self) -> u16 {
        self.ltp as u16 | (self.ltd as u16) << 4 | (self.inhibitory as u16) << 8
    }

    fn from_bits(bits: u16) -> Self {
        WeightEntry {
            ltp: (bits & 0xf) as u8,
            ltd: (bits >> 4 & 0xf) as u8,
            inhibitory: bits >> 8 & 1 == 1,
        }
    }
}

/// Weight chosen by the comparator: LTP weight if potentiated, else LTD.
pub fn select_weight(comp: bool, entry: WeightEntry) -> (u8, bool) {
    (if comp { entry.ltp } else { entry.ltd }, entry.inhibitory)
}

const ENTRY_BITS: usize = 9;

/// Row-major weight table, one entry per synapse.
///
/// The binary image packs each entry into 9 bits (LTP in bits 0-3, LTD in
/// bits 4-7, inhibitory flag in bit 8), concatenated LSB-first with no gaps.
/// The text format holds one `ltp ltd inh` line per entry; blank lines and
/// `#` comments are ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightRam {
    rows: usize,
    cols: usize,
    entries: Vec<WeightEntry>,
}

impl WeightRam {
    pub fn new(rows: usize, cols: usize) -> Self {
        WeightRam { rows, cols, entries: vec![WeightEntry::default(); rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, entry: WeightEntry) -> Self {
        WeightRam { rows, cols, entries: vec![entry; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> WeightEntry {
        self.entries[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, entry: WeightEntry) -> Result<()> {
        if row >= self.rows {
            return Err(Error::RowOutOfRange { row, rows: self.rows });
        }
        if col >= self.cols {
            return Err(Error::NeuronOutOfRange { neuron: col, cols: self.cols });
        }
        self.entries[row * self.cols + col] = entry;
        Ok(())
    }

    pub fn image_len(rows: usize, cols: usize) -> usize {
        (rows * cols * ENTRY_BITS).div_ceil(8)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; Self::image_len(self.rows, self.cols)];
        for (i, e) in self.entries.iter().enumerate() {
            let bits = e.to_bits();
            for b in 0..ENTRY_BITS {
                if bits >> b & 1 == 1 {
                    let pos = i * ENTRY_BITS + b;
                    out[pos / 8] |= 1 << (pos % 8);
                }
            }
        }
        out
    }

    pub fn from_bytes(rows: usize, cols: usize, bytes: &[u8]) -> Result<Self> {
        let want = Self::image_len(rows, cols);
        if bytes.len() != want {
            return Err(Error::MalformedRam(format!("expected {want} bytes, got {}", bytes.len())));
        }
        let n = rows * cols;
        let bit = |pos: usize| bytes[pos / 8] >> (pos % 8) & 1;
        if (n * ENTRY_BITS..want * 8).any(|pos| bit(pos) == 1) {
            return Err(Error::MalformedRam("non-zero padding bits".into()));
        }
        let entries = (0..n)
            .map(|i| {
                let bits = (0..ENTRY_BITS).fold(0u16, |acc, b| acc | (bit(i * ENTRY_BITS + b) as u16) << b);
                WeightEntry::from_bits(bits)
            })
            .collect();
        Ok(WeightRam { rows, cols, entries })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# weight ram {}x{}: ltp ltd inh\n", self.rows, self.cols);
        for e in &self.entries {
            s.push_str(&format!("{} {} {}\n", e.ltp, e.ltd, e.inhibitory as u8));
        }
        s
    }

    pub fn from_text(rows: usize, cols: usize, text: &str) -> Result<Self> {
        let mut entries = Vec::with_capacity(rows * cols);
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |reason: String| Error::Parse { line: idx + 1, reason };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(format!("expected 3 fields, got {}", fields.len())));
            }
            let num = |s: &str| s.parse::<u8>().map_err(|e| parse_err(format!("`{s}`: {e}")));
            let inh = match fields[2] {
                "0" => false,
                "1" => true,
                other => return Err(parse_err(format!("inhibitory flag `{other}` must be 0 or 1"))),
            };
            let entry = WeightEntry::new(num(fields[0])?, num(fields[1])?, inh)
                .map_err(|e| parse_err(e.to_string()))?;
            entries.push(entry);
        }
        if entries.len() != rows * cols {
            return Err(Error::MalformedRam(format!(
                "expected {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(WeightRam { rows, cols, entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fusi_drift, fusi_on_pre, FusiParams, FusiState};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const CYCLE: f64 = 2048.0 / 3.3e6;
    const CLOSED: LearnGate = LearnGate { up: false, down: false };

    fn idle(cell: SynapseCell, d: &RowDriver) -> SynapseCell {
        process_synapse(cell, d, false, false, LearnGate::OPEN, None).0
    }

    #[test]
    fn calibration() {
        let d = RowDriver::default();
        d.validate().unwrap();
        assert!((d.jump_up() - 0.07).abs() < 1e-12);
        assert!((d.jump_down() - 0.07).abs() < 1e-12);
        assert!((d.alpha_step() - 8e-4).abs() < 1e-12);
        assert!(6.0 * d.jump_up() < THETA_X && 8.0 * d.jump_up() > THETA_X);
    }

    #[test]
    fn refresh_direction_and_strict_comparison() {
        let d = RowDriver::default();
        let (up, comp) = process_synapse(SynapseCell::with_state(0.6), &d, false, false, LearnGate::OPEN, None);
        assert!(comp && up.x > 0.6);
        let (down, comp) = process_synapse(SynapseCell::with_state(0.5), &d, false, false, LearnGate::OPEN, None);
        assert!(!comp && down.x < 0.5);
        // Offset shifts the comparison.
        let biased = RowDriver { residual_offset: 0.01, ..d };
        assert!(SynapseCell::with_state(0.495).comp(&biased));
    }

    #[test]
    fn hebbian_jumps_and_gates() {
        let d = RowDriver::default();
        let start = SynapseCell::with_state(0.3);
        let after = |elev, gate, force| process_synapse(start, &d, true, elev, gate, force).0.x;
        let drift = 0.3 - d.beta_step();
        assert!((after(true, LearnGate::OPEN, None) - (drift + 0.07)).abs() < 1e-12);
        assert!((after(false, LearnGate::OPEN, None) - (drift - 0.07)).abs() < 1e-12);
        assert!((after(true, CLOSED, None) - drift).abs() < 1e-15);
        assert!((after(false, LearnGate::OPEN, Some(ForceMode::Up)) - (drift + 0.07)).abs() < 1e-12);
        assert!((after(true, LearnGate::OPEN, Some(ForceMode::Down)) - (drift - 0.07)).abs() < 1e-12);
        let stopped = LearnGate { up: false, down: true };
        assert!((after(false, stopped, Some(ForceMode::Up)) - drift).abs() < 1e-15);
        // Lower rail.
        let low = process_synapse(SynapseCell::with_state(0.02), &d, true, false, LearnGate::OPEN, None).0;
        assert_eq!(low.x, 0.0);
    }

    #[test]
    fn force_flags() {
        assert_eq!(ForceMode::from_flags(false, false).unwrap(), None);
        assert_eq!(ForceMode::from_flags(true, false).unwrap(), Some(ForceMode::Up));
        assert_eq!(ForceMode::from_flags(false, true).unwrap(), Some(ForceMode::Down));
        assert_eq!(ForceMode::from_flags(true, true), Err(Error::ConflictingForce));
    }

    /// Drives `n` pulses at 200 Hz with force-up, then lets the cell settle.
    fn packet(n: usize) -> f64 {
        let d = RowDriver::default();
        let spacing = (5e-3 / CYCLE).round() as usize;
        let mut cell = SynapseCell::default();
        for k in 0..(n * spacing + 2000) {
            let pre = k % spacing == 0 && k / spacing < n;
            cell = process_synapse(cell, &d, pre, false, LearnGate::OPEN, Some(ForceMode::Up)).0;
        }
        cell.x
    }

    #[test]
    fn eight_pulses_potentiate_six_do_not() {
        assert_eq!(packet(8), 1.0);
        assert_eq!(packet(6), 0.0);
    }

    #[test]
    fn refresh_rate_matches_cycle_time() {
        let d = RowDriver::default();
        let mut cell = SynapseCell::with_state(0.6);
        let n = 100;
        for _ in 0..n {
            cell = idle(cell, &d);
        }
        let rate = (cell.x - 0.6) / (n as f64 * CYCLE);
        let expected = d.alpha_step() / 0.62e-3;
        assert!((rate - expected).abs() / expected < 0.01);
    }

    #[test]
    fn leak_targets_zero_differential() {
        let d = RowDriver::default();
        let off = LeakModel::disabled();
        let cell = SynapseCell::with_state(0.9);
        assert_eq!(leak_cell(cell, &off, d.c_syn, 1.0, 30.0), cell);
        let on = LeakModel::with_resistance(13e12, 30.0);
        assert_eq!(leak_cell(cell, &on, d.c_syn, 0.0, 30.0), cell);
        let tau: f64 = 13e12 * 22e-15;
        assert!((tau - 0.286).abs() < 1e-3);
        let after = leak_cell(cell, &on, d.c_syn, tau, 30.0);
        assert!((after.x - (0.5 + 0.4 / std::f64::consts::E)).abs() < 1e-12);
    }

    #[test]
    fn weight_selection() {
        let e = WeightEntry::new(12, 3, true).unwrap();
        assert_eq!(select_weight(true, e), (12, true));
        assert_eq!(select_weight(false, e), (3, true));
        let same = WeightEntry::new(7, 7, false).unwrap();
        assert_eq!(select_weight(true, same), select_weight(false, same));
        assert!(WeightEntry::new(16, 0, false).is_err());
    }

    #[test]
    fn ram_image_size_and_rejections() {
        assert_eq!(WeightRam::image_len(128, 64), 9216);
        assert!(WeightRam::from_bytes(128, 64, &[0u8; 9215]).is_err());
        // 3 entries = 27 bits in 4 bytes; the top 5 bits are padding.
        let mut img = vec![0u8; 4];
        img[3] = 0x80;
        assert!(matches!(WeightRam::from_bytes(1, 3, &img), Err(Error::MalformedRam(_))));
        assert!(WeightRam::from_text(1, 2, "1 2 0\n").is_err());
        assert!(matches!(WeightRam::from_text(1, 1, "1 2 x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(WeightRam::from_text(1, 1, "# c\n16 2 0\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn mismatch_is_seeded() {
        let a = CellMismatch::sample(&mut ChaCha8Rng::seed_from_u64(7), 0.01).unwrap();
        let b = CellMismatch::sample(&mut ChaCha8Rng::seed_from_u64(7), 0.01).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, CellMismatch::default());
        let none = CellMismatch::sample(&mut ChaCha8Rng::seed_from_u64(7), 0.0).unwrap();
        assert_eq!(none, CellMismatch::default());
    }

    fn entry() -> impl Strategy<Value = WeightEntry> {
        (0u8..16, 0u8..16, any::<bool>()).prop_map(|(p, d, i)| WeightEntry { ltp: p, ltd: d, inhibitory: i })
    }

    proptest! {
        #[test]
        fn ram_round_trips(rows in 1usize..6, cols in 1usize..6, seed in proptest::collection::vec(entry(), 36)) {
            let mut ram = WeightRam::new(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    ram.set(r, c, seed[r * 6 + c]).unwrap();
                }
            }
            prop_assert_eq!(&WeightRam::from_bytes(rows, cols, &ram.to_bytes()).unwrap(), &ram);
            prop_assert_eq!(&WeightRam::from_text(rows, cols, &ram.to_text()).unwrap(), &ram);
        }

        #[test]
        fn bistable_without_input(x0 in 0.0f64..=1.0) {
            let d = RowDriver::default();
            let bound = (0.5 / d.alpha_step().min(d.beta_step())).ceil() as usize;
            let mut cell = SynapseCell::with_state(x0);
            for _ in 0..bound {
                cell = idle(cell, &d);
            }
            prop_assert!(cell.x == 0.0 || cell.x == 1.0);
            let settled = cell.x;
            for _ in 0..100 {
                cell = idle(cell, &d);
                prop_assert_eq!(cell.x, settled);
            }
        }

        #[test]
        fn stop_learning_blocks_potentiation(
            x0 in 0.0f64..=1.0,
            stim in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..300),
        ) {
            let d = RowDriver::default();
            let gate = LearnGate { up: false, down: true };
            let mut gated = SynapseCell::with_state(x0);
            let mut drift_only = gated;
            for (pre, force_up) in stim {
                let force = force_up.then_some(ForceMode::Up);
                gated = process_synapse(gated, &d, pre, true, gate, force).0;
                drift_only = idle(drift_only, &d);
                prop_assert!(gated.x <= drift_only.x);
                prop_assert!((0.0..=1.0).contains(&gated.x));
            }
        }

        #[test]
        fn matches_model_composed_per_cycle(
            x0 in 0.0f64..=1.0,
            stim in proptest::collection::vec((any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()), 1..400),
        ) {
            let d = RowDriver::default();
            let p = FusiParams {
                a: d.jump_up(),
                b: d.jump_down(),
                alpha_drift: d.alpha_step() / CYCLE,
                beta_drift: d.beta_step() / CYCLE,
                ..FusiParams::default()
            };
            let mut cell = SynapseCell::with_state(x0);
            let mut model = FusiState { x: x0, calcium: 0.0 };
            for (pre, elev, up, down) in stim {
                let gate = LearnGate { up, down };
                let (next, comp) = process_synapse(cell, &d, pre, elev, gate, None);
                prop_assert_eq!(comp, model.potentiated(&p));
                cell = next;
                model = fusi_drift(model, &p, CYCLE);
                if pre {
                    model = fusi_on_pre(model, &p, elev, up, down);
                }
                prop_assert!((cell.x - model.x).abs() < 1e-12, "{} vs {}", cell.x, model.x);
            }
        }
    }
}
