//! HMAC-SHA-256 and the counter-mode expansion built on it.

use hmac::{Hmac, Mac};
use sha2::Sha256;

type HmacSha256 = Hmac<Sha256>;

pub const DIGEST_LEN: usize = 32;

/// HMAC-SHA-256 over the concatenation of `parts`.
pub fn hmac_sha256(key: &[u8], parts: &[&[u8]]) -> [u8; DIGEST_LEN] {
    let mut mac = HmacSha256::new_from_slice(key).expect("hmac accepts any key length");
    for p in parts {
        mac.update(p);
    }
    mac.finalize().into_bytes().into()
}

/// Counter-mode expansion to `bits` output bits:
/// `HMAC(key, i_le16 || label || context || bits_le16)` for `i = 1, 2, ...`,
/// truncated to the leftmost `bits` bits and returned right-aligned in
/// `ceil(bits / 8)` bytes.
pub fn kdf_sha256(key: &[u8], label: &[u8], context: &[u8], bits: u16) -> Vec<u8> {
    let len = (bits as usize).div_ceil(8);
    let blocks = len.div_ceil(DIGEST_LEN);
    let mut out = Vec::with_capacity(blocks * DIGEST_LEN);
    for i in 1..=blocks as u16 {
        out.extend_from_slice(&hmac_sha256(key, &[&i.to_le_bytes(), label, context, &bits.to_le_bytes()]));
    }
    out.truncate(len);
    let excess = (len * 8 - bits as usize) as u32;
    if excess > 0 {
        shift_right(&mut out, excess);
    }
    out
}

fn shift_right(buf: &mut [u8], n: u32) {
    debug_assert!(n < 8);
    let mut carry = 0u8;
    for b in buf.iter_mut() {
        let next = *b << (8 - n);
        *b = (*b >> n) | carry;
        carry = next;
    }
}
