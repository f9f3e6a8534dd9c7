//! Salted SHA-256 commitments to single vertex colors.
//!
//! Digest layout: `"ZK3COL1" || vertex (u32, big-endian) || color (1 byte) || salt (16 bytes)`.

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

pub const DOMAIN_TAG: &[u8; 7] = b"ZK3COL1";
pub const SALT_LEN: usize = 16;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Commitment(pub [u8; 32]);

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Salt(pub [u8; SALT_LEN]);

impl Salt {
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; SALT_LEN];
        rng.fill_bytes(&mut bytes);
        Salt(bytes)
    }
}

/// A revealed commitment. `color` is whatever the prover claims and is not
/// range-checked here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Opening {
    pub vertex: u32,
    pub color: u8,
    pub salt: Salt,
}

pub fn commit(vertex: u32, color: u8, salt: &Salt) -> Commitment {
    let mut h = Sha256::new();
    h.update(DOMAIN_TAG);
    h.update(vertex.to_be_bytes());
    h.update([color]);
    h.update(salt.0);
    Commitment(h.finalize().into())
}

pub fn verify_opening(cm: &Commitment, op: &Opening) -> bool {
    commit(op.vertex, op.color, &op.salt) == *cm
}

impl Opening {
    pub fn commitment(&self) -> Commitment {
        commit(self.vertex, self.color, &self.salt)
    }
}

macro_rules! hex_newtype {
    ($ty:ident, $len:expr) => {
        impl $ty {
            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
                let mut out = [0u8; $len];
                hex::decode_to_slice(s, &mut out)?;
                Ok($ty(out))
            }
        }

        impl fmt::Debug for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($ty), self.to_hex())
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                $ty::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

hex_newtype!(Commitment, 32);
hex_newtype!(Salt, SALT_LEN);
