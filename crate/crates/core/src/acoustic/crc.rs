//! CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection, no final xor).

const POLY: u16 = 0x1021;

const TABLE: [u16; 256] = build_table();

const fn build_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = (i as u16) << 8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 0x8000 != 0 { (crc << 1) ^ POLY } else { crc << 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

pub fn crc16(bytes: &[u8]) -> u16 {
    bytes.iter().fold(0xFFFF, |crc, &b| (crc << 8) ^ TABLE[((crc >> 8) as u8 ^ b) as usize])
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bit-at-a-time reference, kept separate from the table path.
    fn reference(bytes: &[u8]) -> u16 {
        let mut crc: u32 = 0xFFFF;
        for &byte in bytes {
            for i in (0..8).rev() {
                let input = u32::from((byte >> i) & 1);
                let top = (crc >> 15) & 1;
                crc = (crc << 1) & 0xFFFF;
                if top ^ input == 1 {
                    crc ^= 0x1021;
                }
            }
        }
        crc as u16
    }

    #[test]
    fn empty_input_is_init() {
        assert_eq!(crc16(&[]), 0xFFFF);
        assert_eq!(reference(&[]), 0xFFFF);
    }

    #[test]
    fn check_value() {
        assert_eq!(reference(b"123456789"), 0x29B1);
        assert_eq!(crc16(b"123456789"), 0x29B1);
    }

    #[test]
    fn every_single_bit_flip_changes_checksum() {
        let input: Vec<u8> = (0u8..32).map(|i| i.wrapping_mul(37).wrapping_add(11)).collect();
        let base = crc16(&input);
        for bit in 0..input.len() * 8 {
            let mut flipped = input.clone();
            flipped[bit / 8] ^= 1 << (bit % 8);
            assert_ne!(crc16(&flipped), base, "flip at bit {bit}");
        }
    }

    proptest::proptest! {
        #[test]
        fn table_matches_reference(bytes in proptest::collection::vec(proptest::num::u8::ANY, 0..128)) {
            proptest::prop_assert_eq!(crc16(&bytes), reference(&bytes));
        }
    }
}
