//! Party identities: 802.11 MAC addresses or opaque byte strings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Identity {
    Mac([u8; 6]),
    Opaque(Vec<u8>),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum IdentityError {
    #[error("MAC address must be exactly 6 bytes, got {0}")]
    MacLength(usize),
    #[error("invalid hex in identity: {0}")]
    Hex(String),
    #[error("identity longer than 65535 bytes")]
    TooLong,
}

impl Identity {
    pub fn mac(bytes: &[u8]) -> Result<Self, IdentityError> {
        let arr: [u8; 6] = bytes.try_into().map_err(|_| IdentityError::MacLength(bytes.len()))?;
        Ok(Identity::Mac(arr))
    }

    pub fn opaque(bytes: impl Into<Vec<u8>>) -> Result<Self, IdentityError> {
        let v = bytes.into();
        if v.len() > u16::MAX as usize {
            return Err(IdentityError::TooLong);
        }
        Ok(Identity::Opaque(v))
    }

    /// Raw identity bytes, as hashed.
    pub fn as_bytes(&self) -> &[u8] {
        match self {
            Identity::Mac(m) => m,
            Identity::Opaque(v) => v,
        }
    }

    /// Unambiguous encoding: MACs are their six bytes, opaque identities
    /// carry a big-endian `u16` length prefix.
    pub fn encode(&self) -> Vec<u8> {
        match self {
            Identity::Mac(m) => m.to_vec(),
            Identity::Opaque(v) => {
                let mut out = Vec::with_capacity(2 + v.len());
                out.extend_from_slice(&(v.len() as u16).to_be_bytes());
                out.extend_from_slice(v);
                out
            }
        }
    }

    /// Random locally administered unicast MAC.
    pub fn random_mac<R: rand::RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut m = [0u8; 6];
        rng.fill_bytes(&mut m);
        m[0] = (m[0] & 0xfc) | 0x02;
        Identity::Mac(m)
    }
}

impl PartialOrd for Identity {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Orders by encoded bytes, big-endian lexicographic.
impl Ord for Identity {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.encode().cmp(&other.encode())
    }
}

/// Accepts `E2F754FE22D1`, `e2:f7:54:fe:22:d1`, `e2-f7-...` as MACs,
/// `hex:<digits>` as opaque bytes, and anything else as opaque UTF-8.
impl FromStr for Identity {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(h) = s.strip_prefix("hex:") {
            let bytes = hex::decode(h).map_err(|e| IdentityError::Hex(e.to_string()))?;
            return Identity::opaque(bytes);
        }
        let compact: String = s.chars().filter(|c| *c != ':' && *c != '-').collect();
        let separated = compact.len() != s.len();
        if compact.len() == 12 && compact.chars().all(|c| c.is_ascii_hexdigit()) {
            if separated && s.len() != 17 {
                return Identity::opaque(s.as_bytes().to_vec());
            }
            let bytes = hex::decode(&compact).map_err(|e| IdentityError::Hex(e.to_string()))?;
            return Identity::mac(&bytes);
        }
        Identity::opaque(s.as_bytes().to_vec())
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Identity::Mac(m) => write!(f, "{}", hex::encode_upper(m)),
            Identity::Opaque(v) => write!(f, "hex:{}", hex::encode(v)),
        }
    }
}

impl fmt::Debug for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Identity({self})")
    }
}

impl Serialize for Identity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Identity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a password or other byte-string argument: `hex:<digits>` or UTF-8.
pub fn parse_bytes(s: &str) -> Result<Vec<u8>, IdentityError> {
    match s.strip_prefix("hex:") {
        Some(h) => hex::decode(h).map_err(|e| IdentityError::Hex(e.to_string())),
        None => Ok(s.as_bytes().to_vec()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mac_forms() {
        let a: Identity = "E2F754FE22D1".parse().unwrap();
        let b: Identity = "e2:f7:54:fe:22:d1".parse().unwrap();
        let c: Identity = "e2-f7-54-fe-22-d1".parse().unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.as_bytes(), &[0xe2, 0xf7, 0x54, 0xfe, 0x22, 0xd1]);
        assert_eq!(a.to_string(), "E2F754FE22D1");
    }

    #[test]
    fn parses_opaque_forms() {
        let a: Identity = "alice@example.org".parse().unwrap();
        assert_eq!(a, Identity::Opaque(b"alice@example.org".to_vec()));
        let b: Identity = "hex:00ff".parse().unwrap();
        assert_eq!(b, Identity::Opaque(vec![0, 255]));
        assert_eq!(b.to_string().parse::<Identity>().unwrap(), b);
        assert_eq!(a.to_string().parse::<Identity>().unwrap(), a);
        assert!("hex:zz".parse::<Identity>().is_err());
    }

    #[test]
    fn mac_length_enforced() {
        assert_eq!(Identity::mac(&[1, 2, 3]), Err(IdentityError::MacLength(3)));
    }

    #[test]
    fn ordering_is_bytewise() {
        let a: Identity = "9203835A576B".parse().unwrap();
        let b: Identity = "E2F754FE22D1".parse().unwrap();
        assert!(a < b);
    }

    #[test]
    fn serde_round_trip() {
        let a: Identity = "E2F754FE22D1".parse().unwrap();
        let j = serde_json::to_string(&a).unwrap();
        assert_eq!(j, "\"E2F754FE22D1\"");
        assert_eq!(serde_json::from_str::<Identity>(&j).unwrap(), a);
    }

    #[test]
    fn password_argument() {
        assert_eq!(parse_bytes("pw").unwrap(), b"pw");
        assert_eq!(parse_bytes("hex:7077").unwrap(), b"pw");
    }
}
