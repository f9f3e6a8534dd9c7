use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::PermutationError;

pub const MIN_K: usize = 2;
pub const MAX_K: usize = 4;

pub fn factorial(k: usize) -> usize {
    (1..=k).product()
}

/// A permutation of `{1..k}` in one-line notation, `k` in `2..=4`.
///
/// Ranks are lexicographic: for `k = 3`, rank 0 is `(1,2,3)` and rank 5 is
/// `(3,2,1)`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct Permutation {
    image: Vec<u8>,
}

impl TryFrom<Vec<u8>> for Permutation {
    type Error = PermutationError;

    fn try_from(image: Vec<u8>) -> Result<Self, Self::Error> {
        Permutation::new(image)
    }
}

impl From<Permutation> for Vec<u8> {
    fn from(p: Permutation) -> Self {
        p.image
    }
}

impl Permutation {
    pub fn new(image: Vec<u8>) -> Result<Self, PermutationError> {
        let k = image.len();
        if !(MIN_K..=MAX_K).contains(&k) {
            return Err(PermutationError::BadSize(k));
        }
        let mut seen = [false; MAX_K + 1];
        for &x in &image {
            let i = x as usize;
            if i == 0 || i > k || seen[i] {
                return Err(PermutationError::NotBijection(image.clone()));
            }
            seen[i] = true;
        }
        Ok(Permutation { image })
    }

    pub fn identity(k: usize) -> Result<Self, PermutationError> {
        Permutation::new((1..=k as u8).collect())
    }

    pub fn from_rank(k: usize, rank: usize) -> Result<Self, PermutationError> {
        if !(MIN_K..=MAX_K).contains(&k) {
            return Err(PermutationError::BadSize(k));
        }
        if rank >= factorial(k) {
            return Err(PermutationError::RankOutOfRange { k, rank });
        }
        let mut pool: Vec<u8> = (1..=k as u8).collect();
        let mut rest = rank;
        let mut image = Vec::with_capacity(k);
        for i in (0..k).rev() {
            let f = factorial(i);
            image.push(pool.remove(rest / f));
            rest %= f;
        }
        Ok(Permutation { image })
    }

    pub fn rank(&self) -> usize {
        let k = self.k();
        (0..k)
            .map(|i| {
                let smaller_after = self.image[i + 1..].iter().filter(|&&x| x < self.image[i]).count();
                smaller_after * factorial(k - 1 - i)
            })
            .sum()
    }

    pub fn k(&self) -> usize {
        self.image.len()
    }

    pub fn image(&self) -> &[u8] {
        &self.image
    }

    /// Image of `x` in `1..=k`.
    pub fn apply(&self, x: u8) -> u8 {
        self.image[x as usize - 1]
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0u8; self.k()];
        for (i, &x) in self.image.iter().enumerate() {
            inv[x as usize - 1] = i as u8 + 1;
        }
        Permutation { image: inv }
    }

    /// All of `S_k` in rank order.
    pub fn all(k: usize) -> Result<Vec<Permutation>, PermutationError> {
        (0..factorial(k)).map(|r| Permutation::from_rank(k, r)).collect()
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.image.iter().map(u8::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn s3_rank_table() {
        let expected = [[1, 2, 3], [1, 3, 2], [2, 1, 3], [2, 3, 1], [3, 1, 2], [3, 2, 1]];
        for (rank, img) in expected.iter().enumerate() {
            let p = Permutation::from_rank(3, rank).unwrap();
            assert_eq!(p.image(), img);
            assert_eq!(p.rank(), rank);
        }
    }

    #[test]
    fn s4_is_lexicographic() {
        let all = Permutation::all(4).unwrap();
        assert_eq!(all.len(), 24);
        assert!(all.windows(2).all(|w| w[0].image() < w[1].image()));
    }

    #[test]
    fn invalid_permutations() {
        assert!(Permutation::new(vec![1, 1, 2]).is_err());
        assert!(Permutation::new(vec![1, 2, 4]).is_err());
        assert!(Permutation::new(vec![1]).is_err());
        assert!(Permutation::from_rank(3, 6).is_err());
        assert!(Permutation::from_rank(5, 0).is_err());
    }

    proptest! {
        #[test]
        fn rank_roundtrip_and_inverse(k in 2usize..=4, seed in 0usize..24) {
            let rank = seed % factorial(k);
            let p = Permutation::from_rank(k, rank).unwrap();
            prop_assert_eq!(p.rank(), rank);
            let inv = p.inverse();
            for x in 1..=k as u8 {
                prop_assert_eq!(inv.apply(p.apply(x)), x);
            }
        }
    }
}
