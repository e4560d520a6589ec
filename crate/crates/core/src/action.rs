//! Strategy catalog: the finite option set of every PHY module, the
//! index <-> configuration bijection, complexity costs and nominal rates.
//!
//! A [`LinkConfig`] is one categorical choice per module, in the fixed
//! module order (coding, spreading, modulation, power, allocation,
//! estimation, equalization, harq).

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LinkError, Result};

/// Number of decision modules in the link.
pub const NUM_MODULES: usize = 8;

/// Option count per module, in catalog order.
pub const OPTION_COUNTS: [usize; NUM_MODULES] = [5, 4, 4, 3, 3, 2, 2, 3];

/// Total number of distinct link configurations.
pub const SPACE_SIZE: usize = 5 * 4 * 4 * 3 * 3 * 2 * 2 * 3;

/// Subcarriers in the full grid; allocation fractions are relative to this.
pub const GRID_SUBCARRIERS: usize = 64;

/// Pilot comb spacing (in allocated subcarriers) for least-squares estimation.
pub const PILOT_SPACING: usize = 8;

/// Per-module option indices, in catalog order.
pub type ActionIndex = [usize; NUM_MODULES];

macro_rules! catalog_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|v| *v == self).unwrap()
            }

            pub fn from_index(index: usize) -> Option<Self> {
                Self::ALL.get(index).copied()
            }

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }
    };
}

catalog_enum!(
    /// Channel code.
    Coding {
        Uncoded => "Uncoded",
        Rep3 => "Rep3",
        Rep5 => "Rep5",
        Hamming74 => "Hamming74",
        ConvR12 => "ConvR12",
    }
);

catalog_enum!(
    /// Chip repetition factor.
    Spreading {
        Sf1 => "SF1",
        Sf2 => "SF2",
        Sf4 => "SF4",
        Sf8 => "SF8",
    }
);

catalog_enum!(
    /// Gray-mapped constellation.
    Modulation {
        Bpsk => "BPSK",
        Qpsk => "QPSK",
        Qam16 => "QAM16",
        Qam64 => "QAM64",
    }
);

catalog_enum!(
    /// Transmit power as a fraction of the maximum.
    Power {
        Quarter => "0.25",
        Half => "0.5",
        Full => "1.0",
    }
);

catalog_enum!(
    /// Number of allocated subcarriers.
    Allocation {
        Sc16 => "16",
        Sc32 => "32",
        Sc64 => "64",
    }
);

catalog_enum!(
    Estimation {
        Perfect => "Perfect",
        LsPilot => "LSPilot",
    }
);

catalog_enum!(
    Equalization {
        Zf => "ZF",
        Mmse => "MMSE",
    }
);

catalog_enum!(
    /// Chase-combining HARQ with a maximum number of extra transmissions.
    Harq {
        Off => "Off",
        Chase1 => "Chase1",
        Chase2 => "Chase2",
    }
);

impl Coding {
    pub fn code_rate(self) -> f64 {
        match self {
            Coding::Uncoded => 1.0,
            Coding::Rep3 => 1.0 / 3.0,
            Coding::Rep5 => 1.0 / 5.0,
            Coding::Hamming74 => 4.0 / 7.0,
            Coding::ConvR12 => 0.5,
        }
    }
}

impl Spreading {
    pub fn factor(self) -> usize {
        1 << self.index()
    }
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }
}

impl Power {
    pub fn fraction(self) -> f64 {
        match self {
            Power::Quarter => 0.25,
            Power::Half => 0.5,
            Power::Full => 1.0,
        }
    }
}

impl Allocation {
    pub fn subcarriers(self) -> usize {
        16 << self.index()
    }
}

impl Harq {
    pub fn max_extra_transmissions(self) -> usize {
        self.index()
    }
}

/// The catalog modules, in decision order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Module {
    Coding,
    Spreading,
    Modulation,
    Power,
    Allocation,
    Estimation,
    Equalization,
    Harq,
}

impl Module {
    pub const ALL: [Module; NUM_MODULES] = [
        Module::Coding,
        Module::Spreading,
        Module::Modulation,
        Module::Power,
        Module::Allocation,
        Module::Estimation,
        Module::Equalization,
        Module::Harq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Module::Coding => "coding",
            Module::Spreading => "spreading",
            Module::Modulation => "modulation",
            Module::Power => "power",
            Module::Allocation => "allocation",
            Module::Estimation => "estimation",
            Module::Equalization => "equalization",
            Module::Harq => "harq",
        }
    }

    pub fn option_count(self) -> usize {
        OPTION_COUNTS[self as usize]
    }

    pub fn option_labels(self) -> Vec<&'static str> {
        fn labels<T: Copy>(all: &[T], f: impl Fn(T) -> &'static str) -> Vec<&'static str> {
            all.iter().map(|v| f(*v)).collect()
        }
        match self {
            Module::Coding => labels(Coding::ALL, Coding::label),
            Module::Spreading => labels(Spreading::ALL, Spreading::label),
            Module::Modulation => labels(Modulation::ALL, Modulation::label),
            Module::Power => labels(Power::ALL, Power::label),
            Module::Allocation => labels(Allocation::ALL, Allocation::label),
            Module::Estimation => labels(Estimation::ALL, Estimation::label),
            Module::Equalization => labels(Equalization::ALL, Equalization::label),
            Module::Harq => labels(Harq::ALL, Harq::label),
        }
    }

    /// Complexity cost of each option.
    pub fn option_costs(self) -> &'static [u32] {
        match self {
            Module::Coding => &[0, 1, 2, 2, 5],
            Module::Spreading => &[0, 1, 2, 3],
            Module::Modulation => &[1, 1, 2, 3],
            Module::Power => &[0, 0, 0],
            Module::Allocation => &[0, 0, 0],
            Module::Estimation => &[0, 2],
            Module::Equalization => &[1, 3],
            Module::Harq => &[0, 2, 3],
        }
    }
}

/// One strategy per PHY module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkConfig {
    pub coding: Coding,
    pub spreading: Spreading,
    pub modulation: Modulation,
    pub power: Power,
    pub allocation: Allocation,
    pub estimation: Estimation,
    pub equalization: Equalization,
    pub harq: Harq,
}

impl Default for LinkConfig {
    /// First option of every module.
    fn default() -> Self {
        Self::from_indices(&[0; NUM_MODULES]).unwrap()
    }
}

impl LinkConfig {
    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        if indices.len() != NUM_MODULES {
            return Err(LinkError::Config(format!(
                "expected {NUM_MODULES} module indices, got {}",
                indices.len()
            )));
        }
        for (module, &idx) in Module::ALL.iter().zip(indices) {
            if idx >= module.option_count() {
                return Err(LinkError::Config(format!(
                    "index {idx} out of range for module {} ({} options)",
                    module.name(),
                    module.option_count()
                )));
            }
        }
        Ok(Self {
            coding: Coding::from_index(indices[0]).unwrap(),
            spreading: Spreading::from_index(indices[1]).unwrap(),
            modulation: Modulation::from_index(indices[2]).unwrap(),
            power: Power::from_index(indices[3]).unwrap(),
            allocation: Allocation::from_index(indices[4]).unwrap(),
            estimation: Estimation::from_index(indices[5]).unwrap(),
            equalization: Equalization::from_index(indices[6]).unwrap(),
            harq: Harq::from_index(indices[7]).unwrap(),
        })
    }

    pub fn indices(&self) -> ActionIndex {
        [
            self.coding.index(),
            self.spreading.index(),
            self.modulation.index(),
            self.power.index(),
            self.allocation.index(),
            self.estimation.index(),
            self.equalization.index(),
            self.harq.index(),
        ]
    }

    /// Flat position in `0..SPACE_SIZE`, mixed-radix with the coding index
    /// most significant.
    pub fn ordinal(&self) -> usize {
        self.indices()
            .iter()
            .zip(OPTION_COUNTS)
            .fold(0, |acc, (&i, n)| acc * n + i)
    }

    pub fn from_ordinal(mut ordinal: usize) -> Result<Self> {
        if ordinal >= SPACE_SIZE {
            return Err(LinkError::Config(format!("ordinal {ordinal} >= {SPACE_SIZE}")));
        }
        let mut idx = [0; NUM_MODULES];
        for m in (0..NUM_MODULES).rev() {
            idx[m] = ordinal % OPTION_COUNTS[m];
            ordinal /= OPTION_COUNTS[m];
        }
        Self::from_indices(&idx)
    }

    /// Iterates the whole configuration space in ordinal order.
    pub fn all() -> impl Iterator<Item = LinkConfig> {
        (0..SPACE_SIZE).map(|o| LinkConfig::from_ordinal(o).unwrap())
    }

    pub fn complexity_cost(&self) -> u32 {
        Module::ALL
            .iter()
            .zip(self.indices())
            .map(|(m, i)| m.option_costs()[i])
            .sum()
    }

    /// Information bits per channel use, net of pilot overhead.
    pub fn nominal_rate(&self) -> f64 {
        let alloc = self.allocation.subcarriers() as f64 / GRID_SUBCARRIERS as f64;
        let gross = self.coding.code_rate() * self.modulation.bits_per_symbol() as f64 * alloc
            / self.spreading.factor() as f64;
        match self.estimation {
            Estimation::Perfect => gross,
            Estimation::LsPilot => gross * (1.0 - 1.0 / PILOT_SPACING as f64),
        }
    }

    /// Per-module labels, e.g. for display.
    pub fn labels(&self) -> [&'static str; NUM_MODULES] {
        [
            self.coding.label(),
            self.spreading.label(),
            self.modulation.label(),
            self.power.label(),
            self.allocation.label(),
            self.estimation.label(),
            self.equalization.label(),
            self.harq.label(),
        ]
    }
}

impl fmt::Display for LinkConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.labels().join(", "))
    }
}

/// Largest complexity cost in the space.
pub fn comp_max() -> u32 {
    static CACHE: OnceLock<u32> = OnceLock::new();
    *CACHE.get_or_init(|| LinkConfig::all().map(|c| c.complexity_cost()).max().unwrap())
}

/// Largest nominal rate in the space, found by exhaustive scan.
pub fn rate_max() -> f64 {
    static CACHE: OnceLock<f64> = OnceLock::new();
    *CACHE.get_or_init(|| {
        LinkConfig::all()
            .map(|c| c.nominal_rate())
            .fold(0.0, f64::max)
    })
}

/// Text manifest of the catalog: one line per module with its options and costs.
pub fn catalog_manifest() -> String {
    let mut out = String::from("# module\toption:cost ...\n");
    for m in Module::ALL {
        let items: Vec<String> = m
            .option_labels()
            .iter()
            .zip(m.option_costs())
            .map(|(l, c)| format!("{l}:{c}"))
            .collect();
        out.push_str(m.name());
        out.push('\t');
        out.push_str(&items.join(" "));
        out.push('\n');
    }
    out
}

/// Stable 64-bit fingerprint of the catalog manifest.
pub fn catalog_fingerprint() -> u64 {
    let digest = Sha256::digest(catalog_manifest().as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// A restricted catalog: the allowed option indices of each module.
///
/// Modules with a single allowed option are effectively fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpace {
    allowed: [Vec<usize>; NUM_MODULES],
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self::full()
    }
}

impl SearchSpace {
    pub fn full() -> Self {
        Self {
            allowed: std::array::from_fn(|m| (0..OPTION_COUNTS[m]).collect()),
        }
    }

    pub fn new(allowed: [Vec<usize>; NUM_MODULES]) -> Result<Self> {
        for (m, opts) in allowed.iter().enumerate() {
            if opts.is_empty() {
                return Err(LinkError::Config(format!(
                    "module {} has no allowed options",
                    Module::ALL[m].name()
                )));
            }
            if let Some(bad) = opts.iter().find(|&&o| o >= OPTION_COUNTS[m]) {
                return Err(LinkError::Config(format!(
                    "option {bad} out of range for module {}",
                    Module::ALL[m].name()
                )));
            }
            let mut sorted = opts.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != opts.len() {
                return Err(LinkError::Config(format!(
                    "duplicate options for module {}",
                    Module::ALL[m].name()
                )));
            }
        }
        Ok(Self { allowed })
    }

    /// Everything fixed at `base` except the listed modules, which range
    /// over all their options.
    pub fn around(base: &LinkConfig, free: &[Module]) -> Self {
        let idx = base.indices();
        Self {
            allowed: std::array::from_fn(|m| {
                if free.contains(&Module::ALL[m]) {
                    (0..OPTION_COUNTS[m]).collect()
                } else {
                    vec![idx[m]]
                }
            }),
        }
    }

    pub fn allowed(&self, module: usize) -> &[usize] {
        &self.allowed[module]
    }

    /// First allowed option of every module.
    pub fn initial(&self) -> ActionIndex {
        std::array::from_fn(|m| self.allowed[m][0])
    }

    pub fn size(&self) -> usize {
        self.allowed.iter().map(Vec::len).product()
    }

    /// All configurations, odometer order over the allowed lists.
    pub fn enumerate(&self) -> Vec<ActionIndex> {
        let mut out = Vec::with_capacity(self.size());
        let mut pos = [0usize; NUM_MODULES];
        loop {
            out.push(std::array::from_fn(|m| self.allowed[m][pos[m]]));
            let mut m = NUM_MODULES;
            loop {
                if m == 0 {
                    return out;
                }
                m -= 1;
                pos[m] += 1;
                if pos[m] < self.allowed[m].len() {
                    break;
                }
                pos[m] = 0;
            }
        }
    }
}
