//! Arrays of HyperLogLog counters with 5-bit registers.
//!
//! Registers are packed twelve to a 64-bit word (bits `5i..5i+5`, the
//! top four bits of every word stay zero) and each counter owns
//! `⌈m / 12⌉` consecutive words, so no register straddles a word and
//! unions run lane-parallel on whole words.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REGISTER_BITS: u32 = 5;
pub const REGISTERS_PER_WORD: usize = 12;
pub const MAX_REGISTER: u8 = 31;

/// Lowest bit of every lane.
const LSB: u64 = 0x0084_2108_4210_8421;
/// Highest bit of every lane.
const MSB: u64 = LSB << 4;
const LANES: u64 = (1 << 60) - 1;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded 64-bit hash used for every item added to a counter.
#[inline]
pub fn hash64(item: u64, seed: u64) -> u64 {
    mix64(item.wrapping_mul(GOLDEN) ^ mix64(seed.wrapping_add(GOLDEN)))
}

/// Register index and value an item produces with `log2m` index bits.
#[inline]
pub fn register_update(item: u64, seed: u64, log2m: u32) -> (usize, u8) {
    let h = hash64(item, seed);
    let j = (h & ((1 << log2m) - 1)) as usize;
    let rest = h >> log2m;
    let zeros = if rest == 0 {
        64 - log2m
    } else {
        rest.trailing_zeros()
    };
    (j, (zeros + 1).min(MAX_REGISTER as u32) as u8)
}

/// Bias-correction constant of the harmonic-mean estimator.
pub fn alpha(m: usize) -> f64 {
    match m {
        16 => 0.673,
        32 => 0.697,
        64 => 0.709,
        _ => 0.7213 / (1.0 + 1.079 / m as f64),
    }
}

/// Guaranteed relative standard deviation for `m` registers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub m: usize,
    pub eta: f64,
}

impl ErrorProfile {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            eta: 1.06 / (m as f64).sqrt(),
        }
    }
}

/// Words used by one counter of `m` registers.
pub fn words_per_counter(m: usize) -> usize {
    m.div_ceil(REGISTERS_PER_WORD)
}

/// Bytes needed by a single array of `count` counters with `m` registers.
pub fn array_bytes(count: usize, m: usize) -> u64 {
    count as u64 * words_per_counter(m) as u64 * 8
}

fn check_registers(m: usize) -> Result<u32> {
    if m < 16 || !m.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "register count must be a power of two >= 16, got {m}"
        )));
    }
    Ok(m.trailing_zeros())
}

#[inline]
pub fn get_register(words: &[u64], j: usize) -> u8 {
    let w = words[j / REGISTERS_PER_WORD];
    ((w >> (REGISTER_BITS as usize * (j % REGISTERS_PER_WORD))) & 0x1F) as u8
}

#[inline]
fn raise_register(words: &mut [u64], j: usize, value: u8) -> bool {
    let shift = REGISTER_BITS as usize * (j % REGISTERS_PER_WORD);
    let w = &mut words[j / REGISTERS_PER_WORD];
    let cur = ((*w >> shift) & 0x1F) as u8;
    if value > cur {
        *w = (*w & !(0x1F << shift)) | ((value as u64) << shift);
        true
    } else {
        false
    }
}

/// Lane-wise unsigned `x < y`, as the top bit of each 5-bit lane.
#[inline]
fn lanes_less_than(x: u64, y: u64) -> u64 {
    // the top bit of each lane of `z` is set iff low4(x) >= low4(y)
    let z = (x | MSB).wrapping_sub(y & !MSB);
    ((!x & y) | (!(x ^ y) & !z)) & MSB
}

/// Register-wise max: `dst ← max(dst, src)`. Returns whether `dst` changed.
#[inline]
pub fn union_words(dst: &mut [u64], src: &[u64]) -> bool {
    debug_assert_eq!(dst.len(), src.len());
    let mut changed = 0u64;
    for (d, &s) in dst.iter_mut().zip(src) {
        let lt = lanes_less_than(*d, s);
        // widen each flagged top bit to a full 5-bit lane mask
        let mask = (lt >> 4).wrapping_mul(0x1F);
        *d = (*d & !mask) | (s & mask);
        changed |= lt;
    }
    changed != 0
}

/// Cardinality estimate of a counter with `m` registers.
pub fn estimate_words(words: &[u64], m: usize) -> f64 {
    let mut harmonic = 0.0;
    let mut zeros = 0usize;
    for j in 0..m {
        let r = get_register(words, j);
        if r == 0 {
            zeros += 1;
        }
        harmonic += f64::from_bits((1023u64 - r as u64) << 52);
    }
    let mf = m as f64;
    let raw = alpha(m) * mf * mf / harmonic;
    if raw <= 2.5 * mf && zeros > 0 {
        mf * (mf / zeros as f64).ln()
    } else {
        raw
    }
}

/// `count` HyperLogLog counters sharing `m` and a hash seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterArray {
    count: usize,
    m: usize,
    log2m: u32,
    stride: usize,
    seed: u64,
    words: Vec<u64>,
}

impl CounterArray {
    pub fn new(count: usize, m: usize, seed: u64) -> Result<Self> {
        let log2m = check_registers(m)?;
        let stride = words_per_counter(m);
        Ok(Self {
            count,
            m,
            log2m,
            stride,
            seed,
            words: vec![0; count * stride],
        })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn registers(&self) -> usize {
        self.m
    }

    pub fn log2m(&self) -> u32 {
        self.log2m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Words per counter.
    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn error_profile(&self) -> ErrorProfile {
        ErrorProfile::new(self.m)
    }

    #[inline]
    pub fn counter(&self, i: usize) -> &[u64] {
        &self.words[i * self.stride..(i + 1) * self.stride]
    }

    #[inline]
    pub fn counter_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.words[i * self.stride..(i + 1) * self.stride]
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    /// Register values of counter `i`.
    pub fn register_vector(&self, i: usize) -> Vec<u8> {
        let c = self.counter(i);
        (0..self.m).map(|j| get_register(c, j)).collect()
    }

    pub fn add(&mut self, i: usize, item: u64) {
        let (j, rho) = register_update(item, self.seed, self.log2m);
        let stride = self.stride;
        raise_register(&mut self.words[i * stride..(i + 1) * stride], j, rho);
    }

    pub fn estimate(&self, i: usize) -> f64 {
        estimate_words(self.counter(i), self.m)
    }

    pub fn is_compatible(&self, other: &CounterArray) -> bool {
        self.m == other.m && self.seed == other.seed
    }

    fn check_compatible(&self, other: &CounterArray) -> Result<()> {
        if self.is_compatible(other) {
            Ok(())
        } else {
            Err(Error::Incompatible(format!(
                "m = {} / seed = {:#x} versus m = {} / seed = {:#x}",
                self.m, self.seed, other.m, other.seed
            )))
        }
    }

    /// Counter `i` of `self` absorbs counter `k` of `src`.
    pub fn union_into(&mut self, i: usize, src: &CounterArray, k: usize) -> Result<bool> {
        self.check_compatible(src)?;
        check_index(i, self.count)?;
        check_index(k, src.count)?;
        let stride = self.stride;
        Ok(union_words(
            &mut self.words[i * stride..(i + 1) * stride],
            src.counter(k),
        ))
    }

    /// Union of two counters of the same array.
    pub fn union_within(&mut self, i: usize, k: usize) -> Result<bool> {
        check_index(i, self.count)?;
        check_index(k, self.count)?;
        if i == k {
            return Ok(false);
        }
        let src = self.counter(k).to_vec();
        Ok(union_words(self.counter_mut(i), &src))
    }

    pub fn clear(&mut self) {
        self.words.fill(0);
    }
}

fn check_index(i: usize, count: usize) -> Result<()> {
    if i < count {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "counter {i} out of range for {count} counters"
        )))
    }
}

const _: () = assert!(MSB & !LANES == 0 && LSB.count_ones() == 12);

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent scalar model: registers as a plain byte vector, hash
    /// bits consumed one at a time.
    fn scalar_registers(items: impl IntoIterator<Item = u64>, seed: u64, m: usize) -> Vec<u8> {
        let p = m.trailing_zeros();
        let mut regs = vec![0u8; m];
        for x in items {
            let h = hash64(x, seed);
            let j = (h % m as u64) as usize;
            let mut rho = 1u32;
            let mut bit = p;
            while bit < 64 && (h >> bit) & 1 == 0 {
                rho += 1;
                bit += 1;
            }
            regs[j] = regs[j].max(rho.min(31) as u8);
        }
        regs
    }

    fn counter_of(items: &[u64], m: usize, seed: u64) -> CounterArray {
        let mut c = CounterArray::new(1, m, seed).unwrap();
        items.iter().for_each(|&x| c.add(0, x));
        c
    }

    #[test]
    fn hash_vectors() {
        let cases = [
            (0, 0, 0x4821_8226_ff3c_d4bf, (15, 1), (63, 2)),
            (1, 0, 0x0397_ab29_7406_81d9, (9, 1), (25, 1)),
            (2, 0, 0xc073_7b7c_f89e_44ab, (11, 2), (43, 2)),
            (0, 1, 0xdce4_23fc_82c0_d5b8, (8, 1), (56, 2)),
            (12345, 42, 0x82b4_73ca_748b_5786, (6, 4), (6, 2)),
            (u64::MAX, 7, 0xb1f2_c224_b661_779c, (12, 1), (28, 2)),
        ];
        for (item, seed, h, m16, m64) in cases {
            assert_eq!(hash64(item, seed), h);
            assert_eq!(register_update(item, seed, 4), m16);
            assert_eq!(register_update(item, seed, 6), m64);
        }
    }

    #[test]
    fn rejects_bad_register_counts() {
        assert!(CounterArray::new(1, 8, 0).is_err());
        assert!(CounterArray::new(1, 48, 0).is_err());
        assert!(CounterArray::new(1, 16, 0).is_ok());
    }

    #[test]
    fn fresh_add_sets_one_register_and_is_idempotent() {
        let mut c = CounterArray::new(3, 16, 1).unwrap();
        c.add(1, 42);
        assert_eq!(c.register_vector(1).iter().filter(|&&r| r > 0).count(), 1);
        let before = c.clone();
        c.add(1, 42);
        assert_eq!(c, before);
        assert!(c.register_vector(0).iter().all(|&r| r == 0));
    }

    #[test]
    fn matches_scalar_reference() {
        let c = counter_of(&(0..10).collect::<Vec<_>>(), 16, 0);
        assert_eq!(c.register_vector(0), scalar_registers(0..10, 0, 16));
    }

    #[test]
    fn empty_estimate_is_zero() {
        let c = CounterArray::new(1, 64, 7).unwrap();
        assert_eq!(c.estimate(0), 0.0);
    }

    #[test]
    fn single_register_small_range() {
        let mut c = CounterArray::new(1, 16, 0).unwrap();
        raise_register(c.counter_mut(0), 5, 1);
        // raw 0.673·256/15.5 = 11.12 <= 40, so linear counting with V = 15
        let raw: f64 = 0.673 * 256.0 / 15.5;
        assert!((raw - 11.115).abs() < 1e-3);
        let e = c.estimate(0);
        assert!((e - 16.0 * (16.0f64 / 15.0).ln()).abs() < 1e-12);
        assert!((e - 1.0326).abs() < 1e-4, "{e}");
    }

    #[test]
    fn saturated_registers_take_raw_path() {
        let mut c = CounterArray::new(1, 16, 0).unwrap();
        for j in 0..16 {
            raise_register(c.counter_mut(0), j, 31);
        }
        let expected = 0.673 * 256.0 / (16.0 * 2f64.powi(-31));
        assert!((c.estimate(0) / expected - 1.0).abs() < 1e-12);
        assert_eq!(c.register_vector(0), vec![31; 16]);
    }

    #[test]
    fn union_checks_compatibility() {
        let mut a = CounterArray::new(2, 16, 1).unwrap();
        let b = CounterArray::new(2, 16, 2).unwrap();
        let c = CounterArray::new(2, 32, 1).unwrap();
        assert!(matches!(
            a.union_into(0, &b, 0),
            Err(Error::Incompatible(_))
        ));
        assert!(matches!(
            a.union_into(0, &c, 0),
            Err(Error::Incompatible(_))
        ));
        assert!(a.union_into(0, &a.clone(), 5).is_err());
    }

    #[test]
    fn self_union_is_unchanged() {
        let mut a = counter_of(&[1, 2, 3, 99], 64, 3);
        let copy = a.clone();
        assert!(!a.union_into(0, &copy, 0).unwrap());
        assert_eq!(a, copy);
        assert!(!a.union_within(0, 0).unwrap());
    }

    #[test]
    fn alpha_constants() {
        assert_eq!(alpha(16), 0.673);
        assert_eq!(alpha(32), 0.697);
        assert_eq!(alpha(64), 0.709);
        assert!((alpha(128) - 0.7213 / (1.0 + 1.079 / 128.0)).abs() < 1e-15);
        assert!((ErrorProfile::new(64).eta - 0.1325).abs() < 1e-4);
    }

    fn arb_word() -> impl Strategy<Value = u64> {
        prop::collection::vec(0u64..32, 12)
            .prop_map(|lanes| lanes.iter().enumerate().map(|(i, &v)| v << (5 * i)).sum())
    }

    proptest! {
        #[test]
        fn broadword_max_matches_scalar(x in prop::collection::vec(arb_word(), 6), y in prop::collection::vec(arb_word(), 6)) {
            let mut d = x.clone();
            let changed = union_words(&mut d, &y);
            let mut any = false;
            for j in 0..72 {
                let (a, b) = (get_register(&x, j), get_register(&y, j));
                prop_assert_eq!(get_register(&d, j), a.max(b));
                any |= b > a;
            }
            prop_assert_eq!(changed, any);
            prop_assert!(d.iter().all(|w| w & !LANES == 0));
        }

        #[test]
        fn union_equals_counter_of_union(a in prop::collection::vec(any::<u64>(), 0..200), b in prop::collection::vec(any::<u64>(), 0..200), seed in any::<u64>(), log2m in 4u32..8) {
            let m = 1 << log2m;
            let mut ca = counter_of(&a, m, seed);
            let cb = counter_of(&b, m, seed);
            ca.union_into(0, &cb, 0).unwrap();
            let both: Vec<u64> = a.iter().chain(&b).copied().collect();
            prop_assert_eq!(ca.register_vector(0), counter_of(&both, m, seed).register_vector(0));
            prop_assert_eq!(ca.register_vector(0), scalar_registers(both, seed, m));
        }

        #[test]
        fn lattice_laws(a in prop::collection::vec(any::<u64>(), 0..50), b in prop::collection::vec(any::<u64>(), 0..50), c in prop::collection::vec(any::<u64>(), 0..50)) {
            let (ca, cb, cc) = (counter_of(&a, 32, 9), counter_of(&b, 32, 9), counter_of(&c, 32, 9));
            let mut ab = ca.clone();
            ab.union_into(0, &cb, 0).unwrap();
            let mut ba = cb.clone();
            ba.union_into(0, &ca, 0).unwrap();
            prop_assert_eq!(&ab, &ba);
            let mut ab_c = ab.clone();
            ab_c.union_into(0, &cc, 0).unwrap();
            let mut bc = cb.clone();
            bc.union_into(0, &cc, 0).unwrap();
            let mut a_bc = ca.clone();
            a_bc.union_into(0, &bc, 0).unwrap();
            prop_assert_eq!(&ab_c, &a_bc);
            let mut aa = ca.clone();
            prop_assert!(!aa.union_into(0, &ca, 0).unwrap());
            // monotone registers, nonnegative estimates
            for j in 0..32 {
                prop_assert!(ab.register_vector(0)[j] >= ca.register_vector(0)[j]);
            }
            prop_assert!(ab.estimate(0) >= 0.0);
        }
    }
}
