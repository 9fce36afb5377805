//! Physical description of the spin star and the combinatorics of its
//! multiplet: one centre spin J-coupled to N equivalent peripheral spins.
//!
//! Gyromagnetic ratios are stored in MHz/T exactly as configured; every phase
//! computation converts to Hz (and then to radians via 2π) at the point of
//! use. Collective spin quantum numbers are carried as integer 2J so sector
//! keys stay exact.

use crate::error::{Error, Result};

/// Spin-star sensor molecule: peripheral count, gyromagnetic ratios (MHz/T),
/// scalar coupling (Hz), relaxation times and pulse calibrations (s).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinStarSystem {
    pub n_peripheral: u32,
    pub gamma_center_mhz_t: f64,
    pub gamma_peripheral_mhz_t: f64,
    pub j_coupling_hz: f64,
    pub t1_center_s: f64,
    pub t2_center_s: f64,
    pub t1_peripheral_s: f64,
    pub t2_peripheral_s: f64,
    pub t2star_peripheral_s: f64,
    pub t2star_noon_s: f64,
    pub pulse_pi2_center_s: f64,
    pub pulse_pi2_peripheral_s: f64,
}

impl SpinStarSystem {
    /// Tetramethylsilane: a ²⁹Si centre with twelve equivalent ¹H spins.
    pub fn tms() -> Self {
        Self {
            n_peripheral: 12,
            gamma_center_mhz_t: -8.465,
            gamma_peripheral_mhz_t: 42.577,
            j_coupling_hz: 6.63,
            t1_center_s: 25.4,
            t2_center_s: 1.2,
            t1_peripheral_s: 8.9,
            t2_peripheral_s: 1.6,
            t2star_peripheral_s: 0.37,
            t2star_noon_s: 0.28,
            pulse_pi2_center_s: 17e-6,
            pulse_pi2_peripheral_s: 27e-6,
        }
    }

    /// Trimethylphosphite: nine equivalent ¹H spins around a ³¹P centre.
    /// The centre gyromagnetic ratio and coupling are not built in and must
    /// be supplied by the caller; the remaining values default to the TMS
    /// instrument calibration and can be overridden.
    pub fn tmp(gamma_center_mhz_t: f64, j_coupling_hz: f64) -> Result<Self> {
        let mut s = Self::tms();
        s.n_peripheral = 9;
        s.gamma_center_mhz_t = gamma_center_mhz_t;
        s.j_coupling_hz = j_coupling_hz;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_peripheral < 1 {
            return Err(Error::Config("n_peripheral must be >= 1".into()));
        }
        if !(self.j_coupling_hz > 0.0) {
            return Err(Error::Config("j_coupling_hz must be > 0".into()));
        }
        for (name, v) in [
            ("t1_center_s", self.t1_center_s),
            ("t2_center_s", self.t2_center_s),
            ("t1_peripheral_s", self.t1_peripheral_s),
            ("t2_peripheral_s", self.t2_peripheral_s),
            ("t2star_peripheral_s", self.t2star_peripheral_s),
            ("t2star_noon_s", self.t2star_noon_s),
            ("pulse_pi2_center_s", self.pulse_pi2_center_s),
            ("pulse_pi2_peripheral_s", self.pulse_pi2_peripheral_s),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0")));
            }
        }
        if self.gamma_center_mhz_t == 0.0 || self.gamma_peripheral_mhz_t == 0.0 {
            return Err(Error::Config("gyromagnetic ratios must be nonzero".into()));
        }
        Ok(())
    }

    /// γ_R = γ_peripheral / γ_center (derived, never stored).
    pub fn gamma_ratio(&self) -> f64 {
        self.gamma_peripheral_mhz_t / self.gamma_center_mhz_t
    }

    /// Number of distinct centre-spin multiplet lines.
    pub fn peak_count(&self) -> usize {
        self.n_peripheral as usize + 1
    }

    /// All valid lopsidedness values, ascending: -N, -N+2, ..., N.
    pub fn lopsidedness_values(&self) -> Vec<Lopsidedness> {
        let n = self.n_peripheral as i32;
        (-n..=n).step_by(2).map(Lopsidedness).collect()
    }
}

/// ℓ = U − D, the excess of up over down peripheral spins; indexes the
/// multiplet peaks. Valid values satisfy |ℓ| ≤ N and ℓ ≡ N (mod 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lopsidedness(pub i32);

impl Lopsidedness {
    pub fn checked(n: u32, ell: i32) -> Result<Self> {
        if ell.unsigned_abs() > n || (ell - n as i32) % 2 != 0 {
            return Err(Error::BadLopsidedness { n, ell });
        }
        Ok(Self(ell))
    }
}

/// One irreducible collective-spin block: total spin J (stored as 2J) and the
/// number of equivalent copies of that block in the product space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DickeSector {
    pub two_j: u32,
    pub multiplicity: u64,
}

impl DickeSector {
    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    /// Dimension of the collective block, 2J+1.
    pub fn dim(&self) -> usize {
        self.two_j as usize + 1
    }
}

/// Exact binomial coefficient; n ≤ 64 is plenty here.
pub fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of peripheral configurations with lopsidedness ℓ: C(n, (n+ℓ)/2).
pub fn lopsidedness_multiplicity(n: u32, ell: Lopsidedness) -> Result<u128> {
    let ell = Lopsidedness::checked(n, ell.0)?;
    let up = ((n as i32 + ell.0) / 2) as u32;
    Ok(binomial(n, up))
}

/// Decompose n spin-1/2 into total-spin sectors with multiplicities
/// d_J = C(n, n/2−J) − C(n, n/2−J−1). Sectors are returned with J descending.
pub fn dicke_decomposition(n: u32) -> Vec<DickeSector> {
    assert!(n >= 1, "need at least one peripheral spin");
    let mut sectors = Vec::new();
    // 2J runs over n, n-2, ..., down to 0 or 1.
    let mut two_j = n as i64;
    while two_j >= 0 {
        let k = ((n as i64 - two_j) / 2) as u32;
        let d = binomial(n, k) - if k > 0 { binomial(n, k - 1) } else { 0 };
        if d > 0 {
            sectors.push(DickeSector { two_j: two_j as u32, multiplicity: d as u64 });
        }
        two_j -= 2;
    }
    sectors
}

/// Centre-spin transition frequency for peripheral lopsidedness ℓ:
/// δ_center + ℓ·J/2.
pub fn peak_frequency(ell: Lopsidedness, delta_center_hz: f64, j_coupling_hz: f64) -> f64 {
    delta_center_hz + ell.0 as f64 * j_coupling_hz / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force enumeration of all 2^n peripheral configurations.
    fn enumerate_multiplicity(n: u32, ell: i32) -> u128 {
        let mut count = 0u128;
        for bits in 0u32..(1 << n) {
            let up = bits.count_ones() as i32;
            let down = n as i32 - up;
            if up - down == ell {
                count += 1;
            }
        }
        count
    }

    /// Iterative Clebsch-Gordan coupling: start from one spin-1/2 and add
    /// spins one at a time, tracking multiplicities per 2J.
    fn couple_multiplicities(n: u32) -> Vec<(u32, u64)> {
        let mut mult: Vec<u64> = vec![0, 1]; // index = 2J
        for _ in 1..n {
            let mut next = vec![0u64; mult.len() + 1];
            for (two_j, &m) in mult.iter().enumerate() {
                if m == 0 {
                    continue;
                }
                next[two_j + 1] += m;
                if two_j >= 1 {
                    next[two_j - 1] += m;
                }
            }
            mult = next;
        }
        mult.iter()
            .enumerate()
            .filter(|(_, &m)| m > 0)
            .map(|(two_j, &m)| (two_j as u32, m))
            .collect()
    }

    #[test]
    fn multiplicity_all_up_is_one() {
        assert_eq!(lopsidedness_multiplicity(12, Lopsidedness(12)).unwrap(), 1);
    }

    #[test]
    fn multiplicity_center_line_matches_enumeration() {
        let expect = enumerate_multiplicity(12, 0);
        assert_eq!(expect, 924);
        assert_eq!(lopsidedness_multiplicity(12, Lopsidedness(0)).unwrap(), expect);
    }

    #[test]
    fn multiplicity_rejects_parity_violation() {
        assert!(lopsidedness_multiplicity(12, Lopsidedness(1)).is_err());
        assert!(lopsidedness_multiplicity(12, Lopsidedness(13)).is_err());
    }

    #[test]
    fn multiplicities_sum_to_power_of_two() {
        for n in 1..=16u32 {
            let total: u128 = (-(n as i32)..=n as i32)
                .step_by(2)
                .map(|ell| lopsidedness_multiplicity(n, Lopsidedness(ell)).unwrap())
                .sum();
            assert_eq!(total, 1 << n, "n={n}");
        }
    }

    #[test]
    fn decomposition_matches_coupling_oracle() {
        for n in 1..=12u32 {
            let got: Vec<(u32, u64)> = dicke_decomposition(n)
                .iter()
                .rev()
                .map(|s| (s.two_j, s.multiplicity))
                .collect();
            assert_eq!(got, couple_multiplicities(n), "n={n}");
        }
    }

    #[test]
    fn decomposition_n12_frozen() {
        let got: Vec<(f64, u64)> =
            dicke_decomposition(12).iter().map(|s| (s.j(), s.multiplicity)).collect();
        assert_eq!(
            got,
            vec![(6.0, 1), (5.0, 11), (4.0, 54), (3.0, 154), (2.0, 275), (1.0, 297), (0.0, 132)]
        );
    }

    #[test]
    fn decomposition_n3_frozen() {
        let got: Vec<(f64, u64)> =
            dicke_decomposition(3).iter().map(|s| (s.j(), s.multiplicity)).collect();
        assert_eq!(got, vec![(1.5, 1), (0.5, 2)]);
    }

    #[test]
    fn decomposition_n2_is_triplet_plus_singlet() {
        let got: Vec<(f64, u64)> =
            dicke_decomposition(2).iter().map(|s| (s.j(), s.multiplicity)).collect();
        assert_eq!(got, vec![(1.0, 1), (0.0, 1)]);
    }

    #[test]
    fn decomposition_dimensions_sum_to_power_of_two() {
        for n in 1..=16u32 {
            let total: u64 =
                dicke_decomposition(n).iter().map(|s| (s.two_j as u64 + 1) * s.multiplicity).sum();
            assert_eq!(total, 1 << n, "n={n}");
        }
    }

    #[test]
    fn peak_frequency_examples() {
        assert_eq!(peak_frequency(Lopsidedness(0), 5.0, 6.63), 5.0);
        assert!((peak_frequency(Lopsidedness(12), 0.0, 6.63) - 39.78).abs() < 1e-12);
        assert!((peak_frequency(Lopsidedness(-12), 0.0, 6.63) + 39.78).abs() < 1e-12);
    }

    #[test]
    fn peak_frequency_odd_in_ell() {
        for ell in [-12, -6, -2, 0, 2, 6, 12] {
            let f = peak_frequency(Lopsidedness(ell), 0.0, 6.63);
            let g = peak_frequency(Lopsidedness(-ell), 0.0, 6.63);
            assert!((f + g).abs() < 1e-12);
        }
    }

    #[test]
    fn peak_count_and_gamma_ratio() {
        let tms = SpinStarSystem::tms();
        assert_eq!(tms.peak_count(), 13);
        assert!((tms.gamma_ratio() - (-5.0297)).abs() < 1e-3);
        tms.validate().unwrap();
    }

    #[test]
    fn tmp_requires_positive_coupling() {
        assert!(SpinStarSystem::tmp(10.8, 0.0).is_err());
        let tmp = SpinStarSystem::tmp(17.25, 11.0).unwrap();
        assert_eq!(tmp.n_peripheral, 9);
        assert_eq!(tmp.peak_count(), 10);
    }
}
