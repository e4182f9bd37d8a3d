// Licensed under the Apache-2.0 license

//! Ring-oscillator PUF model (the token generator) and its quality metrics.
//!
//! A device is an array of oscillators whose frequencies carry multiplicative
//! Gaussian process variation. A challenge selects a pseudorandom disjoint
//! pairing of the oscillators; each pair yields one response bit (1 iff the
//! first oscillator runs faster). Evaluation noise is a second, much smaller,
//! multiplicative Gaussian term drawn per evaluation.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{self, domain, mix_seed};

/// Size of the challenge field on the token generator interface.
pub const CHALLENGE_FIELD_BYTES: u32 = 2;

/// Largest sigma accepted for either variation term. Keeps `1 + g` positive
/// with overwhelming probability (a ten-sigma draw).
pub const MAX_SIGMA: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PufError {
    #[error("invalid PUF configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("challenge {value:#x} does not fit in {width} bits")]
    ChallengeRange { value: u32, width: u32 },
    #[error("malformed response encoding: {0}")]
    Encoding(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PufConfig {
    pub oscillator_count: usize,
    pub response_width: usize,
    pub challenge_width: u32,
    /// Hertz.
    pub nominal_frequency: f64,
    /// Fractional standard deviation of per-oscillator manufacturing variation.
    pub sigma_process: f64,
    /// Fractional standard deviation of per-evaluation jitter.
    pub sigma_noise: f64,
}

impl Default for PufConfig {
    fn default() -> Self {
        Self {
            oscillator_count: 512,
            response_width: 256,
            challenge_width: 16,
            nominal_frequency: 100e6,
            sigma_process: 0.01,
            sigma_noise: 0.0001,
        }
    }
}

impl PufConfig {
    /// Default config resized to `width` response bits (and `2 * width` oscillators).
    pub fn with_response_width(width: usize) -> Self {
        Self {
            oscillator_count: 2 * width,
            response_width: width,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PufError> {
        if self.response_width == 0 {
            return Err(PufError::Config("response_width must be positive".into()));
        }
        if self.oscillator_count != 2 * self.response_width {
            return Err(PufError::Config(format!(
                "oscillator_count ({}) must equal 2 * response_width ({})",
                self.oscillator_count,
                2 * self.response_width
            )));
        }
        if self.challenge_width == 0 || self.challenge_width > 8 * CHALLENGE_FIELD_BYTES {
            return Err(PufError::Config(format!(
                "challenge_width must be in 1..={} bits",
                8 * CHALLENGE_FIELD_BYTES
            )));
        }
        if !(self.nominal_frequency.is_finite() && self.nominal_frequency > 0.0) {
            return Err(PufError::Config(
                "nominal_frequency must be positive".into(),
            ));
        }
        for (name, sigma) in [
            ("sigma_process", self.sigma_process),
            ("sigma_noise", self.sigma_noise),
        ] {
            if !(sigma.is_finite() && (0.0..=MAX_SIGMA).contains(&sigma)) {
                return Err(PufError::Config(format!(
                    "{name} must lie in [0, {MAX_SIGMA}]"
                )));
            }
        }
        Ok(())
    }

    /// Number of distinct challenges the configuration can express.
    pub fn challenge_space(&self) -> u32 {
        1u32 << self.challenge_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PufChallenge(u16);

impl PufChallenge {
    pub fn new(value: u32, config: &PufConfig) -> Result<Self, PufError> {
        if value >= config.challenge_space() {
            return Err(PufError::ChallengeRange {
                value,
                width: config.challenge_width,
            });
        }
        Ok(Self(value as u16))
    }

    pub fn value(self) -> u16 {
        self.0
    }

    fn check(self, config: &PufConfig) -> Result<(), PufError> {
        Self::new(u32::from(self.0), config).map(|_| ())
    }
}

impl fmt::Display for PufChallenge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#06x}", self.0)
    }
}

/// Fixed-width response bit string. Bit `i` is the outcome of pair `i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PufResponse {
    width: usize,
    words: Vec<u64>,
}

impl PufResponse {
    pub fn zeros(width: usize) -> Self {
        Self {
            width,
            words: vec![0; width.div_ceil(64)],
        }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut r = Self::zeros(bits.len());
        for (i, b) in bits.into_iter().enumerate() {
            r.set(i, b);
        }
        r
    }

    /// The `width` low bits of `value`, bit 0 first.
    pub fn from_u64(value: u64, width: usize) -> Self {
        Self::from_bits((0..width).map(|i| i < 64 && (value >> i) & 1 == 1))
    }

    /// Uniformly random bits from `rng`.
    pub fn random<R: RngCore + ?Sized>(width: usize, rng: &mut R) -> Self {
        let mut r = Self::zeros(width);
        for w in r.words.iter_mut() {
            *w = rng.next_u64();
        }
        r.clear_padding();
        r
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(
            i < self.width,
            "bit index {i} out of range for width {}",
            self.width
        );
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(
            i < self.width,
            "bit index {i} out of range for width {}",
            self.width
        );
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        let b = self.bit(i);
        self.set(i, !b);
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.width).map(|i| self.bit(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn clear_padding(&mut self) {
        let rem = self.width % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    /// Bit string, bit 0 first.
    pub fn to_bit_string(&self) -> String {
        self.bits().map(|b| if b { '1' } else { '0' }).collect()
    }

    /// `width:hex` form, nibbles packed from bit 0 (most significant bit of
    /// each nibble first).
    pub fn to_hex(&self) -> String {
        let mut hex = String::with_capacity(self.width.div_ceil(4) + 5);
        hex.push_str(&self.width.to_string());
        hex.push(':');
        for chunk in 0..self.width.div_ceil(4) {
            let mut nibble = 0u8;
            for k in 0..4 {
                let i = chunk * 4 + k;
                nibble <<= 1;
                if i < self.width && self.bit(i) {
                    nibble |= 1;
                }
            }
            hex.push(char::from_digit(u32::from(nibble), 16).unwrap());
        }
        hex
    }

    pub fn from_hex(s: &str) -> Result<Self, PufError> {
        let (w, digits) = s
            .split_once(':')
            .ok_or_else(|| PufError::Encoding(format!("missing width prefix in {s:?}")))?;
        let width: usize = w
            .parse()
            .map_err(|_| PufError::Encoding(format!("bad width {w:?}")))?;
        if digits.len() != width.div_ceil(4) {
            return Err(PufError::Encoding(format!(
                "expected {} hex digits for width {width}, found {}",
                width.div_ceil(4),
                digits.len()
            )));
        }
        let mut r = Self::zeros(width);
        for (chunk, c) in digits.chars().enumerate() {
            let nibble = c
                .to_digit(16)
                .ok_or_else(|| PufError::Encoding(format!("bad hex digit {c:?}")))?;
            for k in 0..4 {
                let i = chunk * 4 + k;
                let b = (nibble >> (3 - k)) & 1 == 1;
                if i < width {
                    r.set(i, b);
                } else if b {
                    return Err(PufError::Encoding("nonzero padding bits".into()));
                }
            }
        }
        Ok(r)
    }
}

impl fmt::Debug for PufResponse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PufResponse({})", self.to_hex())
    }
}

impl fmt::Display for PufResponse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for PufResponse {
    type Err = PufError;

    /// Accepts either the `width:hex` form or a plain bit string.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.contains(':') {
            return Self::from_hex(s);
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(PufError::Encoding(format!("bad bit {c:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self::from_bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeviceId(pub u64);

/// One simulated PUF device.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorArray {
    device_id: DeviceId,
    frequencies: Vec<f64>,
    seed: u64,
}

impl OscillatorArray {
    /// A device with explicitly chosen frequencies (hertz).
    pub fn from_frequencies(device_id: DeviceId, frequencies: Vec<f64>) -> Result<Self, PufError> {
        if let Some(f) = frequencies.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
            return Err(PufError::Config(format!(
                "oscillator frequency {f} is not positive"
            )));
        }
        Ok(Self {
            device_id,
            frequencies,
            seed: device_id.0,
        })
    }

    pub fn device_id(&self) -> DeviceId {
        self.device_id
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn check_dims(&self, config: &PufConfig) -> Result<(), PufError> {
        if self.frequencies.len() != config.oscillator_count {
            return Err(PufError::Dimension {
                expected: config.oscillator_count,
                found: self.frequencies.len(),
            });
        }
        Ok(())
    }
}

/// Pairs oscillators for `challenge`: a Fisher-Yates permutation of
/// `0..oscillator_count` seeded by the challenge value, read off as
/// consecutive disjoint pairs.
pub fn derive_pair_map(
    challenge: PufChallenge,
    config: &PufConfig,
) -> Result<Vec<(usize, usize)>, PufError> {
    config.validate()?;
    challenge.check(config)?;
    let mut order: Vec<usize> = (0..config.oscillator_count).collect();
    let mut rng = seed::rng(domain::PAIR_MAP, u64::from(challenge.value()));
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i as u64) as usize;
        order.swap(i, j);
    }
    Ok(order.chunks_exact(2).map(|p| (p[0], p[1])).collect())
}

/// Draws a device: `f_i = nominal * (1 + g_i)`, `g_i ~ N(0, sigma_process)`.
pub fn new_device(seed: u64, config: &PufConfig) -> Result<OscillatorArray, PufError> {
    config.validate()?;
    let normal =
        Normal::new(0.0, config.sigma_process).map_err(|e| PufError::Config(e.to_string()))?;
    let mut rng = seed::rng(domain::DEVICE, seed);
    let frequencies: Vec<f64> = (0..config.oscillator_count)
        .map(|_| config.nominal_frequency * (1.0 + normal.sample(&mut rng)))
        .collect();
    let mut device = OscillatorArray::from_frequencies(DeviceId(seed), frequencies)?;
    device.seed = seed;
    Ok(device)
}

/// Per-oscillator multiplicative noise factors `1 + n_i`. `None` when the
/// evaluation is noiseless.
fn noise_factors(count: usize, sigma: f64, noise_seed: u64) -> Result<Option<Vec<f64>>, PufError> {
    if sigma == 0.0 {
        return Ok(None);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| PufError::Config(e.to_string()))?;
    let mut rng = seed::rng(domain::NOISE, noise_seed);
    Ok(Some(
        (0..count).map(|_| 1.0 + normal.sample(&mut rng)).collect(),
    ))
}

/// Evaluates explicit `pairs` on `device`. Bit `i` is 1 iff oscillator
/// `pairs[i].0` is strictly faster than `pairs[i].1`; ties give 0.
pub fn compare_pairs(
    device: &OscillatorArray,
    pairs: &[(usize, usize)],
    noise: Option<&[f64]>,
) -> Result<PufResponse, PufError> {
    let n = device.frequencies.len();
    if let Some(noise) = noise {
        if noise.len() != n {
            return Err(PufError::Dimension {
                expected: n,
                found: noise.len(),
            });
        }
    }
    if let Some(&(a, b)) = pairs.iter().find(|(a, b)| *a >= n || *b >= n) {
        return Err(PufError::Dimension {
            expected: n,
            found: a.max(b) + 1,
        });
    }
    let f = |i: usize| device.frequencies[i] * noise.map_or(1.0, |v| v[i]);
    Ok(PufResponse::from_bits(
        pairs.iter().map(|&(a, b)| f(a) > f(b)),
    ))
}

pub fn evaluate(
    device: &OscillatorArray,
    challenge: PufChallenge,
    noise_seed: u64,
    config: &PufConfig,
) -> Result<PufResponse, PufError> {
    device.check_dims(config)?;
    let pairs = derive_pair_map(challenge, config)?;
    let noise = noise_factors(config.oscillator_count, config.sigma_noise, noise_seed)?;
    compare_pairs(device, &pairs, noise.as_deref())
}

/// Evaluation with the noise term switched off.
pub fn evaluate_noiseless(
    device: &OscillatorArray,
    challenge: PufChallenge,
    config: &PufConfig,
) -> Result<PufResponse, PufError> {
    device.check_dims(config)?;
    let pairs = derive_pair_map(challenge, config)?;
    compare_pairs(device, &pairs, None)
}

pub fn hamming_distance(a: &PufResponse, b: &PufResponse) -> Result<usize, PufError> {
    if a.width != b.width {
        return Err(PufError::Dimension {
            expected: a.width,
            found: b.width,
        });
    }
    Ok(a.words
        .iter()
        .zip(&b.words)
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum())
}

fn hd_fraction(a: &PufResponse, b: &PufResponse) -> Result<f64, PufError> {
    Ok(hamming_distance(a, b)? as f64 / a.width as f64)
}

/// Mean fractional Hamming distance over all unordered pairs of responses.
pub fn uniqueness(responses: &[PufResponse]) -> Result<f64, PufError> {
    let hds = pairwise_fractions(responses)?;
    Ok(hds.iter().map(|(_, _, f)| f).sum::<f64>() / hds.len() as f64)
}

fn pairwise_fractions(responses: &[PufResponse]) -> Result<Vec<(usize, usize, f64)>, PufError> {
    if responses.len() < 2 {
        return Err(PufError::InsufficientData {
            needed: 2,
            got: responses.len(),
        });
    }
    let mut out = Vec::with_capacity(responses.len() * (responses.len() - 1) / 2);
    for i in 0..responses.len() {
        for j in i + 1..responses.len() {
            out.push((i, j, hd_fraction(&responses[i], &responses[j])?));
        }
    }
    Ok(out)
}

/// Fraction of one bits.
pub fn uniformity(response: &PufResponse) -> f64 {
    if response.width == 0 {
        return 0.0;
    }
    response.count_ones() as f64 / response.width as f64
}

fn trial_noise_seed(device: &OscillatorArray, challenge: PufChallenge, trial: usize) -> u64 {
    mix_seed(
        mix_seed(domain::TRIAL ^ device.seed, u64::from(challenge.value())),
        trial as u64,
    )
}

/// `1 - mean(HD(reference, trial) / width)` where the reference is the
/// noiseless response and each trial draws fresh noise.
pub fn reliability(
    device: &OscillatorArray,
    challenge: PufChallenge,
    trials: usize,
    config: &PufConfig,
) -> Result<f64, PufError> {
    if trials < 2 {
        return Err(PufError::InsufficientData {
            needed: 2,
            got: trials,
        });
    }
    device.check_dims(config)?;
    let pairs = derive_pair_map(challenge, config)?;
    let reference = compare_pairs(device, &pairs, None)?;
    let mut total = 0.0;
    for t in 0..trials {
        let noise = noise_factors(
            config.oscillator_count,
            config.sigma_noise,
            trial_noise_seed(device, challenge, t),
        )?;
        let response = compare_pairs(device, &pairs, noise.as_deref())?;
        total += hd_fraction(&reference, &response)?;
    }
    Ok(1.0 - total / trials as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdSample {
    pub challenge: PufChallenge,
    pub device_a: usize,
    pub device_b: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PufQualityReport {
    pub uniqueness: f64,
    pub uniformity: f64,
    pub reliability: f64,
    pub pairwise_hd: Vec<HdSample>,
    pub device_count: usize,
    pub trial_count: usize,
    pub challenges: Vec<PufChallenge>,
}

impl PufQualityReport {
    /// Share of pairwise HD fractions inside `[lo, hi]`.
    pub fn fraction_within(&self, lo: f64, hi: f64) -> f64 {
        if self.pairwise_hd.is_empty() {
            return 0.0;
        }
        let inside = self
            .pairwise_hd
            .iter()
            .filter(|s| (lo..=hi).contains(&s.fraction))
            .count();
        inside as f64 / self.pairwise_hd.len() as f64
    }

    /// Key/value metrics followed by the raw pairwise-HD column.
    pub fn to_text(&self) -> String {
        use fmt::Write;
        let mut out = String::new();
        let challenges: Vec<String> = self.challenges.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "uniqueness = {:.6}", self.uniqueness);
        let _ = writeln!(out, "uniformity = {:.6}", self.uniformity);
        let _ = writeln!(out, "reliability = {:.6}", self.reliability);
        let _ = writeln!(out, "device_count = {}", self.device_count);
        let _ = writeln!(out, "trial_count = {}", self.trial_count);
        let _ = writeln!(out, "challenges = {}", challenges.join(","));
        let _ = writeln!(out, "pairwise_hd_count = {}", self.pairwise_hd.len());
        let _ = writeln!(out, "[pairwise_hd]");
        let _ = writeln!(
            out,
            "{:>9} {:>8} {:>8} {:>11}",
            "challenge", "device_a", "device_b", "hd_fraction"
        );
        for s in &self.pairwise_hd {
            let _ = writeln!(
                out,
                "{:>9} {:>8} {:>8} {:>11.6}",
                s.challenge.to_string(),
                s.device_a,
                s.device_b,
                s.fraction
            );
        }
        out
    }

    /// Parses the output of [`to_text`](Self::to_text). Metrics come back
    /// rounded to six decimals.
    pub fn from_text(text: &str) -> Result<Self, PufError> {
        let bad = |msg: String| PufError::Encoding(msg);
        let mut lines = text.lines();
        let mut header = std::collections::BTreeMap::new();
        for line in lines.by_ref() {
            if line.trim() == "[pairwise_hd]" {
                break;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| bad(format!("expected key = value, found {line:?}")))?;
            header.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| header.get(k).ok_or_else(|| bad(format!("missing key {k}")));
        let float = |k: &str| -> Result<f64, PufError> {
            get(k)?
                .parse()
                .map_err(|_| bad(format!("bad value for {k}")))
        };
        let int = |k: &str| -> Result<usize, PufError> {
            get(k)?
                .parse()
                .map_err(|_| bad(format!("bad value for {k}")))
        };
        let parse_challenge = |s: &str| -> Result<PufChallenge, PufError> {
            u16::from_str_radix(s.trim().trim_start_matches("0x"), 16)
                .map(PufChallenge)
                .map_err(|_| bad(format!("bad challenge {s:?}")))
        };
        let challenges = get("challenges")?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(parse_challenge)
            .collect::<Result<Vec<_>, _>>()?;
        let expected = int("pairwise_hd_count")?;
        let mut pairwise_hd = Vec::with_capacity(expected);
        for line in lines.skip(1) {
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.is_empty() {
                continue;
            }
            if cols.len() != 4 {
                return Err(bad(format!("expected 4 columns, found {line:?}")));
            }
            let num = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| bad(format!("bad index {s:?}")))
            };
            pairwise_hd.push(HdSample {
                challenge: parse_challenge(cols[0])?,
                device_a: num(cols[1])?,
                device_b: num(cols[2])?,
                fraction: cols[3]
                    .parse()
                    .map_err(|_| bad(format!("bad fraction {:?}", cols[3])))?,
            });
        }
        if pairwise_hd.len() != expected {
            return Err(bad(format!(
                "expected {expected} HD rows, found {}",
                pairwise_hd.len()
            )));
        }
        Ok(Self {
            uniqueness: float("uniqueness")?,
            uniformity: float("uniformity")?,
            reliability: float("reliability")?,
            device_count: int("device_count")?,
            trial_count: int("trial_count")?,
            challenges,
            pairwise_hd,
        })
    }
}

/// Seed of device `index` in a population drawn from `base_seed`.
pub fn population_seed(base_seed: u64, index: usize) -> u64 {
    mix_seed(domain::POPULATION ^ base_seed, index as u64)
}

/// Characterizes a freshly drawn population of `n_devices`.
pub fn quality_report(
    n_devices: usize,
    challenges: &[PufChallenge],
    trials: usize,
    base_seed: u64,
    config: &PufConfig,
) -> Result<PufQualityReport, PufError> {
    if n_devices < 2 {
        return Err(PufError::InsufficientData {
            needed: 2,
            got: n_devices,
        });
    }
    let devices = (0..n_devices)
        .map(|i| new_device(population_seed(base_seed, i), config))
        .collect::<Result<Vec<_>, _>>()?;
    quality_report_for(&devices, challenges, trials, config)
}

/// Characterizes an explicit device population.
pub fn quality_report_for(
    devices: &[OscillatorArray],
    challenges: &[PufChallenge],
    trials: usize,
    config: &PufConfig,
) -> Result<PufQualityReport, PufError> {
    if devices.len() < 2 {
        return Err(PufError::InsufficientData {
            needed: 2,
            got: devices.len(),
        });
    }
    if challenges.is_empty() {
        return Err(PufError::InsufficientData { needed: 1, got: 0 });
    }
    if trials < 2 {
        return Err(PufError::InsufficientData {
            needed: 2,
            got: trials,
        });
    }
    let mut pairwise_hd = Vec::new();
    let mut ones = 0.0;
    let mut rel = 0.0;
    for &challenge in challenges {
        let responses = devices
            .iter()
            .map(|d| evaluate_noiseless(d, challenge, config))
            .collect::<Result<Vec<_>, _>>()?;
        for (device_a, device_b, fraction) in pairwise_fractions(&responses)? {
            pairwise_hd.push(HdSample {
                challenge,
                device_a,
                device_b,
                fraction,
            });
        }
        ones += responses.iter().map(uniformity).sum::<f64>();
        for d in devices {
            rel += reliability(d, challenge, trials, config)?;
        }
    }
    let evaluations = (devices.len() * challenges.len()) as f64;
    Ok(PufQualityReport {
        uniqueness: pairwise_hd.iter().map(|s| s.fraction).sum::<f64>() / pairwise_hd.len() as f64,
        uniformity: ones / evaluations,
        reliability: rel / evaluations,
        pairwise_hd,
        device_count: devices.len(),
        trial_count: trials,
        challenges: challenges.to_vec(),
    })
}
