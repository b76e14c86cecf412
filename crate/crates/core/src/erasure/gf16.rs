//! Arithmetic in GF(2^16) with log/exp tables.
//!
//! Reduction polynomial x^16 + x^12 + x^3 + x + 1 (0x1100B), generator 2.

use std::sync::OnceLock;

const POLY: u32 = 0x1_100B;
pub const ORDER: usize = 65_535;

struct Tables {
    // exp is doubled so log(a) + log(b) indexes without a modulo.
    exp: Vec<u16>,
    log: Vec<u16>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut exp = vec![0u16; 2 * ORDER];
        let mut log = vec![0u16; ORDER + 1];
        let mut x: u32 = 1;
        for i in 0..ORDER {
            exp[i] = x as u16;
            log[x as usize] = i as u16;
            x <<= 1;
            if x & 0x1_0000 != 0 {
                x ^= POLY;
            }
        }
        for i in ORDER..2 * ORDER {
            exp[i] = exp[i - ORDER];
        }
        Tables { exp, log }
    })
}

#[inline]
pub fn add(a: u16, b: u16) -> u16 {
    a ^ b
}

#[inline]
pub fn mul(a: u16, b: u16) -> u16 {
    if a == 0 || b == 0 {
        return 0;
    }
    let t = tables();
    t.exp[t.log[a as usize] as usize + t.log[b as usize] as usize]
}

#[inline]
pub fn inv(a: u16) -> u16 {
    assert!(a != 0, "zero has no inverse");
    let t = tables();
    t.exp[ORDER - t.log[a as usize] as usize]
}

#[inline]
pub fn div(a: u16, b: u16) -> u16 {
    mul(a, inv(b))
}

/// Discrete log of a non-zero element.
#[inline]
pub fn log(a: u16) -> u16 {
    debug_assert!(a != 0);
    tables().log[a as usize]
}

/// `dst[i] ^= coef · src[i]` where `coef = g^coef_log`.
pub fn mul_acc_log(dst: &mut [u16], src: &[u16], coef_log: u16) {
    let t = tables();
    let base = coef_log as usize;
    for (d, &s) in dst.iter_mut().zip(src) {
        if s != 0 {
            *d ^= t.exp[base + t.log[s as usize] as usize];
        }
    }
}

/// Evaluation point for codeword position `p`.
#[inline]
pub fn point(p: usize) -> u16 {
    p as u16
}
