//! The two bundled benchmark programs and host-side oracles for their exit
//! values.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::asm::{parse_program, Data, Item, Program};

pub const MAC_SOURCE: &str = include_str!("../assets/mac.s");
pub const RS_ENCODE_SOURCE: &str = include_str!("../assets/rs_encode.s");

/// Label every benchmark starts at.
pub const ENTRY: &str = "main";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Mac,
    RsEncode,
}

impl Benchmark {
    pub const ALL: [Benchmark; 2] = [Benchmark::Mac, Benchmark::RsEncode];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Mac => "mac",
            Benchmark::RsEncode => "rs_encode",
        }
    }

    pub fn source(self) -> &'static str {
        match self {
            Benchmark::Mac => MAC_SOURCE,
            Benchmark::RsEncode => RS_ENCODE_SOURCE,
        }
    }

    pub fn program(self) -> Program {
        parse_program(self.source()).expect("bundled benchmark parses")
    }

    /// Exit value computed on the host from the program's data section.
    pub fn expected_exit(self) -> u32 {
        let p = self.program();
        match self {
            Benchmark::Mac => mac_oracle(&p),
            Benchmark::RsEncode => rs_oracle(&p),
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s || (s == "rs" && *b == Benchmark::RsEncode))
            .ok_or_else(|| format!("unknown benchmark `{s}` (expected mac or rs_encode)"))
    }
}

/// Directives following `label` up to the next label or section switch.
fn data_after<'a>(p: &'a Program, label: &str) -> impl Iterator<Item = &'a Data> {
    let start = p.symbols()[label];
    p.items()[start..]
        .iter()
        .skip(1)
        .take_while(|i| !matches!(i, Item::Label(_) | Item::Section(_)))
        .filter_map(|i| match i {
            Item::Data(d) => Some(d),
            _ => None,
        })
}

pub(crate) fn words(p: &Program, label: &str) -> Vec<u32> {
    data_after(p, label)
        .flat_map(|d| match d {
            Data::Word(w) => w.clone(),
            _ => panic!("`{label}` is not word data"),
        })
        .collect()
}

pub(crate) fn bytes(p: &Program, label: &str) -> Vec<u8> {
    data_after(p, label)
        .flat_map(|d| match d {
            Data::Byte(b) => b.clone(),
            _ => panic!("`{label}` is not byte data"),
        })
        .collect()
}

fn mac_oracle(p: &Program) -> u32 {
    let (a, b, masks) = (words(p, "vec_a"), words(p, "vec_b"), words(p, "masks"));
    masks.iter().fold(0u32, |acc, m| {
        a.iter().zip(&b).fold(acc, |acc, (x, y)| acc.wrapping_add((x & m).wrapping_mul(*y)))
    })
}

/// Carry-less multiply in GF(2^8) modulo x^8+x^4+x^3+x^2+1, no tables.
pub(crate) fn gf_mul_bitwise(mut a: u8, mut b: u8) -> u8 {
    let mut r = 0u8;
    while b != 0 {
        if b & 1 == 1 {
            r ^= a;
        }
        let hi = a & 0x80 != 0;
        a <<= 1;
        if hi {
            a ^= 0x1D;
        }
        b >>= 1;
    }
    r
}

/// Generator polynomial with roots 2^0..2^(n-1), coefficients low first,
/// monic leading term omitted.
pub(crate) fn rs_generator(n: usize) -> Vec<u8> {
    let mut g = vec![1u8];
    let mut root = 1u8;
    for _ in 0..n {
        // g *= (x + root)
        let mut next = vec![0u8; g.len() + 1];
        for (i, c) in g.iter().enumerate() {
            next[i] ^= gf_mul_bitwise(*c, root);
            next[i + 1] ^= c;
        }
        g = next;
        root = gf_mul_bitwise(root, 2);
    }
    g.pop();
    g
}

/// Parity symbols of a systematic encode: remainder of m(x)·x^k mod g(x),
/// by polynomial long division. Returned low degree first.
pub(crate) fn rs_parity(msg: &[u8], gen: &[u8]) -> Vec<u8> {
    let k = gen.len();
    // dividend, highest degree first
    let mut rem: Vec<u8> = msg.iter().copied().chain(std::iter::repeat_n(0, k)).collect();
    for i in 0..msg.len() {
        let coef = rem[i];
        if coef == 0 {
            continue;
        }
        for (j, g) in gen.iter().rev().enumerate() {
            rem[i + 1 + j] ^= gf_mul_bitwise(coef, *g);
        }
    }
    rem[msg.len()..].iter().rev().copied().collect()
}

fn rs_oracle(p: &Program) -> u32 {
    let gen = rs_generator(4);
    assert_eq!(bytes(p, "gen_poly"), gen, "asset generator polynomial");
    bytes(p, "message").chunks(11).fold(0, |acc, block| {
        let par = rs_parity(block, &gen);
        acc ^ (par[3] as u32) << 24 ^ (par[2] as u32) << 16 ^ (par[1] as u32) << 8 ^ par[0] as u32
    })
}
