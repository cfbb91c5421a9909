//! Finite-alphabet uniform quantizer on `[-1, 1]` with saturation.
//!
//! For parameter `m` the alphabet holds the `m` interior levels
//! `-1 + (2l - 1)/m`, `l = 1..=m`, plus the saturation values `-1` and `1`,
//! so `m + 2` symbols in total. Symbols are carried on the wire as their
//! index in increasing level order.

use crate::error::{invalid, Error, Result};

/// Index of a quantizer output in the alphabet, `0..=m+1`, ordered by level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformQuantizer {
    m: u16,
}

impl UniformQuantizer {
    pub const MAX_M: u32 = u16::MAX as u32 - 1;

    pub fn new(m: u32) -> Result<Self> {
        if m == 0 || m > Self::MAX_M {
            return Err(invalid(format!("quantizer needs 1 <= m <= {}, got {m}", Self::MAX_M)));
        }
        Ok(Self { m: m as u16 })
    }

    pub fn m(&self) -> u32 {
        self.m as u32
    }

    pub fn alphabet_size(&self) -> usize {
        self.m as usize + 2
    }

    /// Index of the `+1` saturation symbol.
    pub fn top(&self) -> Symbol {
        Symbol(self.m + 1)
    }

    /// Level carried by `symbol`, or `None` if the index is outside the alphabet.
    pub fn level(&self, symbol: Symbol) -> Option<f64> {
        let idx = symbol.0;
        if idx == 0 {
            Some(-1.0)
        } else if idx <= self.m {
            Some(self.interior_level(idx))
        } else if idx == self.m + 1 {
            Some(1.0)
        } else {
            None
        }
    }

    // (2l - 1 - m) / m: one rounding, exactly antisymmetric, exactly zero at odd m's middle level.
    fn interior_level(&self, l: u16) -> f64 {
        let m = self.m as i64;
        (2 * l as i64 - 1 - m) as f64 / m as f64
    }

    /// All `m + 2` levels in increasing order.
    pub fn levels(&self) -> Vec<f64> {
        (0..=self.m + 1).map(|i| self.level(Symbol(i)).unwrap()).collect()
    }

    /// Quantize to a symbol index. Bins are half-open `[lower, upper)` except
    /// the top bin, which is closed at 1; values strictly beyond `±1` saturate.
    pub fn quantize_symbol(&self, x: f64) -> Result<Symbol> {
        if !x.is_finite() {
            return Err(invalid(format!("cannot quantize non-finite value {x}")));
        }
        if x > 1.0 {
            return Ok(self.top());
        }
        if x < -1.0 {
            return Ok(Symbol(0));
        }
        let m = self.m as f64;
        let bin = ((m * (x + 1.0) / 2.0).floor() + 1.0).clamp(1.0, m);
        Ok(Symbol(bin as u16))
    }

    pub fn quantize(&self, x: f64) -> Result<f64> {
        let s = self.quantize_symbol(x)?;
        Ok(self.level(s).expect("quantize_symbol returns alphabet members"))
    }

    /// Inverse of [`level`](Self::level): the index of an exact alphabet member.
    pub fn symbol_index(&self, level: f64) -> Result<Symbol> {
        if level == -1.0 {
            return Ok(Symbol(0));
        }
        if level == 1.0 {
            return Ok(self.top());
        }
        if level.is_finite() && level.abs() < 1.0 {
            let m = self.m as f64;
            let l = ((level * m + m + 1.0) / 2.0).round();
            if l >= 1.0 && l <= m {
                let s = Symbol(l as u16);
                if self.level(s) == Some(level) {
                    return Ok(s);
                }
            }
        }
        Err(invalid(format!("{level} is not a level of the m = {} quantizer", self.m)))
    }

    pub fn is_saturated(&self, symbol: Symbol) -> bool {
        symbol.0 == 0 || symbol.0 == self.m + 1
    }

    /// Reconstruction error `|z - l q(z/l)|` and its bound `l/m`, for `|z| <= l`.
    pub fn quantization_error_bound(&self, z: f64, l: f64) -> Result<(f64, f64)> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(invalid(format!("scale must be positive and finite, got {l}")));
        }
        if !z.is_finite() {
            return Err(invalid(format!("non-finite value {z}")));
        }
        if z.abs() > l {
            return Err(Error::PreconditionViolation(format!("|z| = {} exceeds l = {l}", z.abs())));
        }
        let err = (z - l * self.quantize(z / l)?).abs();
        Ok((err, l / self.m as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(m: u32) -> UniformQuantizer {
        UniformQuantizer::new(m).unwrap()
    }

    // Scan the closed bins by hand: [-1 + 2(l-1)/m, -1 + 2l/m] -> -1 + (2l-1)/m.
    fn oracle(m: u32, x: f64) -> Option<f64> {
        let mf = m as f64;
        (1..=m).map(|l| l as f64).find_map(|l| {
            let lo = -1.0 + 2.0 * (l - 1.0) / mf;
            let hi = -1.0 + 2.0 * l / mf;
            (lo < x && x < hi).then(|| -1.0 + (2.0 * l - 1.0) / mf)
        })
    }

    #[test]
    fn examples() {
        assert_eq!(q(6).quantize(0.4).unwrap(), 0.5);
        assert_eq!(q(2).quantize(0.3).unwrap(), 0.5);
        assert_eq!(q(5).quantize(0.0).unwrap(), 0.0);
        assert_eq!(q(1).quantize(0.9).unwrap(), 0.0);
        for m in [1, 2, 7, 64] {
            assert_eq!(q(m).quantize(1.5).unwrap(), 1.0);
            assert_eq!(q(m).quantize(-1.5).unwrap(), -1.0);
        }
    }

    #[test]
    fn exactly_one_maps_to_outer_interior_level() {
        let qq = q(4);
        assert_eq!(qq.quantize(1.0).unwrap(), 0.75);
        assert_eq!(qq.quantize(-1.0).unwrap(), -0.75);
        assert!(!qq.is_saturated(qq.quantize_symbol(1.0).unwrap()));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(q(3).quantize(f64::NAN).is_err());
        assert!(q(3).quantize(f64::INFINITY).is_err());
        assert!(UniformQuantizer::new(0).is_err());
    }

    #[test]
    fn alphabet_structure() {
        for m in 1..=64 {
            let levels = q(m).levels();
            assert_eq!(levels.len(), m as usize + 2);
            assert!(levels.windows(2).all(|w| w[0] < w[1]));
            for (a, b) in levels.iter().zip(levels.iter().rev()) {
                assert_eq!(*a, -*b);
            }
            for l in 1..=m {
                let want = -1.0 + (2.0 * l as f64 - 1.0) / m as f64;
                assert!((levels[l as usize] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn symbol_index_examples() {
        let q2 = q(2);
        assert_eq!(q2.symbol_index(-1.0).unwrap(), Symbol(0));
        assert_eq!(q2.symbol_index(1.0).unwrap(), Symbol(3));
        assert!(q2.symbol_index(0.25).is_err());
        assert!(q2.symbol_index(2.0).is_err());
        let q6 = q(6);
        let s = q6.symbol_index(q6.quantize(0.4).unwrap()).unwrap();
        assert_eq!(q6.level(s), Some(0.5));
        assert_eq!(q6.level(Symbol(8)), None);
    }

    #[test]
    fn symbol_index_bijection() {
        for m in 1..=64 {
            let qq = q(m);
            for (i, lvl) in qq.levels().into_iter().enumerate() {
                assert_eq!(qq.symbol_index(lvl).unwrap(), Symbol(i as u16));
            }
        }
    }

    #[test]
    fn error_bound_examples() {
        let (err, bound) = q(6).quantization_error_bound(0.4, 1.0).unwrap();
        assert!((err - 0.1).abs() < 1e-15 && (bound - 1.0 / 6.0).abs() < 1e-15);
        let (err, _) = q(3).quantization_error_bound(0.0, 1.0).unwrap();
        assert_eq!(err, 0.0);
        let (err, bound) = q(1).quantization_error_bound(0.9, 1.0).unwrap();
        assert_eq!((err, bound), (0.9, 1.0));
        assert!(matches!(
            q(4).quantization_error_bound(1.1, 1.0),
            Err(Error::PreconditionViolation(_))
        ));
    }

    proptest! {
        #[test]
        fn agrees_with_bin_scan(m in 1u32..=64, x in -1.0f64..=1.0) {
            if let Some(want) = oracle(m, x) {
                let got = q(m).quantize(x).unwrap();
                prop_assert!((got - want).abs() < 1e-12);
            }
        }

        #[test]
        fn monotone(m in 1u32..=64, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(q(m).quantize(lo).unwrap() <= q(m).quantize(hi).unwrap());
        }

        #[test]
        fn odd_symmetric_off_boundaries(m in 1u32..=64, x in -3.0f64..3.0) {
            let mf = m as f64;
            let scaled = mf * (x + 1.0) / 2.0;
            prop_assume!((scaled - scaled.round()).abs() > 1e-9);
            prop_assert_eq!(q(m).quantize(-x).unwrap(), -q(m).quantize(x).unwrap());
        }

        #[test]
        fn idempotent_on_levels(m in 1u32..=64) {
            let qq = q(m);
            for s in &qq.levels()[1..=m as usize] {
                prop_assert_eq!(qq.quantize(*s).unwrap(), *s);
            }
        }

        #[test]
        fn error_within_bound(m in 1u32..=64, l in 1e-6f64..10.0, frac in -1.0f64..=1.0) {
            let (err, bound) = q(m).quantization_error_bound(frac * l, l).unwrap();
            prop_assert!(err <= bound, "err {} bound {}", err, bound);
        }
    }
}
