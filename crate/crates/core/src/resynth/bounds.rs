//! Host models of the emitted loops, counting loop-body executions at a
//! configurable word width (1..=32 bits).

fn mask(width: u32) -> u32 {
    assert!((1..=32).contains(&width), "width must be 1..=32");
    u32::MAX >> (32 - width)
}

/// Runs the shift-add multiply loop; returns (product, iterations).
pub fn shift_add_iterations(a: u32, b: u32, width: u32) -> (u32, u32) {
    let m = mask(width);
    let (mut a, mut b, mut acc, mut n) = (a & m, b & m, 0u32, 0);
    while b != 0 {
        if b & 1 == 1 {
            acc = acc.wrapping_add(a) & m;
        }
        a = (a << 1) & m;
        b >>= 1;
        n += 1;
    }
    (acc, n)
}

/// Runs the xor/and ripple-carry addition loop; returns (sum, iterations).
pub fn ripple_carry_iterations(a: u32, b: u32, width: u32) -> (u32, u32) {
    let m = mask(width);
    let (mut a, mut b, mut n) = (a & m, b & m, 0);
    while b != 0 {
        let carry = a & b;
        a ^= b;
        b = (carry << 1) & m;
        n += 1;
    }
    (a, n)
}

/// Runs the xor/and ripple-borrow subtraction loop; returns (difference, iterations).
pub fn ripple_borrow_iterations(a: u32, b: u32, width: u32) -> (u32, u32) {
    let m = mask(width);
    let (mut a, mut b, mut n) = (a & m, b & m, 0);
    while b != 0 {
        let borrow = !a & b;
        a ^= b;
        b = (borrow << 1) & m;
        n += 1;
    }
    (a, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_8_bit() {
        for a in 0..256u32 {
            for b in 0..256u32 {
                let (p, n) = shift_add_iterations(a, b, 8);
                assert_eq!(p, (a * b) & 0xFF);
                assert!(n <= 8);
                let (s, n) = ripple_carry_iterations(a, b, 8);
                assert_eq!(s, (a + b) & 0xFF);
                assert!(n <= 9);
                let (d, n) = ripple_borrow_iterations(a, b, 8);
                assert_eq!(d, a.wrapping_sub(b) & 0xFF);
                assert!(n <= 9);
            }
        }
    }

    #[test]
    fn worst_cases_at_32_bits() {
        assert_eq!(shift_add_iterations(1, 0x8000_0000, 32), (0x8000_0000, 32));
        assert_eq!(ripple_carry_iterations(0x7FFF_FFFF, 1, 32), (0x8000_0000, 32));
        assert_eq!(ripple_carry_iterations(u32::MAX, 1, 32), (0, 32));
        assert_eq!(ripple_carry_iterations(5, 3, 32), (8, 4));
        assert_eq!(ripple_carry_iterations(9, 0, 32), (9, 0));
    }
}
