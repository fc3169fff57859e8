//! Binary image masks with a run-length JSON encoding.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A row-major binary bitmap. `true` marks an object pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        Self { width, height, bits: vec![value; width as usize * height as usize] }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn popcount(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    pub fn complement(&self) -> Self {
        Self { width: self.width, height: self.height, bits: self.bits.iter().map(|b| !b).collect() }
    }

    /// Number of pixels set in both masks. Panics if dimensions differ.
    pub fn intersection_count(&self, other: &Self) -> u64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.bits.iter().zip(&other.bits).filter(|(a, b)| **a && **b).count() as u64
    }

    /// Number of pixels set in either mask. Panics if dimensions differ.
    pub fn union_count(&self, other: &Self) -> u64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.bits.iter().zip(&other.bits).filter(|(a, b)| **a || **b).count() as u64
    }

    /// Run lengths over the row-major pixel sequence, starting with a (possibly empty) run of zeros.
    pub fn to_runs(&self) -> Vec<u32> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &b in &self.bits {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        runs.push(len);
        runs
    }

    pub fn from_runs(width: u32, height: u32, runs: &[u32]) -> Result<Self, String> {
        let total = width as u64 * height as u64;
        let sum: u64 = runs.iter().map(|&r| r as u64).sum();
        if sum != total {
            return Err(format!("run lengths cover {sum} pixels, expected {total}"));
        }
        let mut bits = Vec::with_capacity(total as usize);
        let mut value = false;
        for &r in runs {
            bits.extend(std::iter::repeat_n(value, r as usize));
            value = !value;
        }
        Ok(Self { width, height, bits })
    }
}

#[derive(Serialize, Deserialize)]
struct RleMask {
    width: u32,
    height: u32,
    encoding: String,
    counts: Vec<u32>,
}

const RLE_ENCODING: &str = "rle-row-major";

impl Serialize for BinaryMask {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RleMask {
            width: self.width,
            height: self.height,
            encoding: RLE_ENCODING.to_string(),
            counts: self.to_runs(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BinaryMask {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rle = RleMask::deserialize(deserializer)?;
        if rle.encoding != RLE_ENCODING {
            return Err(serde::de::Error::custom(format!("unknown mask encoding {:?}", rle.encoding)));
        }
        // Reject absurd sizes before allocating.
        if rle.width as u64 * rle.height as u64 > 1 << 28 {
            return Err(serde::de::Error::custom("mask too large"));
        }
        BinaryMask::from_runs(rle.width, rle.height, &rle.counts).map_err(serde::de::Error::custom)
    }
}
