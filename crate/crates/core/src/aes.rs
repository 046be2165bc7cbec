//! AES-256 with full round-state visibility.
//!
//! A plain lookup-table implementation of FIPS-197 whose encrypt path records
//! the register state after every round, so leakage synthesis can form
//! Hamming distances between consecutive states of a parallel 128-bit
//! datapath. Constant-time execution is explicitly not a goal here: leakage
//! is modeled from the recorded states, not from this software's timing.

pub const BLOCK_LEN: usize = 16;
pub const KEY_LEN: usize = 32;
/// AES-256 runs 14 rounds; with the initial AddRoundKey output that is
/// 15 recorded register states.
pub const ROUNDS: usize = 14;
pub const ROUND_STATES: usize = ROUNDS + 1;

pub const SBOX: [u8; 256] = [
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
];

pub const INV_SBOX: [u8; 256] = {
    let mut inv = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        inv[SBOX[i] as usize] = i as u8;
        i += 1;
    }
    inv
};

/// `SHIFT_ROWS_SRC[j]` is the pre-ShiftRows index of the byte that lands at
/// flat index `j` (column-major state layout, as in the standard).
pub const SHIFT_ROWS_SRC: [usize; 16] = {
    let mut t = [0usize; 16];
    let mut col = 0;
    while col < 4 {
        let mut row = 0;
        while row < 4 {
            t[4 * col + row] = 4 * ((col + row) % 4) + row;
            row += 1;
        }
        col += 1;
    }
    t
};

const RCON: [u8; 10] = [0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1b, 0x36];

/// 256-bit key, checked to be exactly 32 bytes when built from a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AesKey256(pub [u8; KEY_LEN]);

impl AesKey256 {
    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        let arr: [u8; KEY_LEN] = bytes.try_into().ok()?;
        Some(AesKey256(arr))
    }
}

/// All register states of one encryption: output of the initial AddRoundKey
/// followed by the output of each of the 14 rounds. The final state is the
/// ciphertext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AesStateTrace {
    pub round_states: [[u8; BLOCK_LEN]; ROUND_STATES],
    pub plaintext: [u8; BLOCK_LEN],
    pub ciphertext: [u8; BLOCK_LEN],
}

impl AesStateTrace {
    /// Per-round Hamming distance of the full 128-bit register, one value per
    /// clock cycle of the datapath.
    pub fn hd_sequence(&self) -> [u32; ROUNDS] {
        let mut hd = [0u32; ROUNDS];
        for r in 1..ROUND_STATES {
            hd[r - 1] = block_hamming_distance(&self.round_states[r - 1], &self.round_states[r]);
        }
        hd
    }

    /// Bit flips of a single register byte position between rounds 13 and 14.
    pub fn last_round_byte_hd(&self, position: usize) -> u32 {
        let a = self.round_states[ROUNDS - 1][position];
        let b = self.round_states[ROUNDS][position];
        (a ^ b).count_ones()
    }
}

pub fn block_hamming_distance(a: &[u8; BLOCK_LEN], b: &[u8; BLOCK_LEN]) -> u32 {
    a.iter().zip(b.iter()).map(|(x, y)| (x ^ y).count_ones()).sum()
}

fn gf_mul2(x: u8) -> u8 {
    (x << 1) ^ if x & 0x80 != 0 { 0x1b } else { 0 }
}

fn gf_mul(mut a: u8, mut b: u8) -> u8 {
    let mut acc = 0;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        a = gf_mul2(a);
        b >>= 1;
    }
    acc
}

/// 15 round keys expanded from the 256-bit key.
pub fn expand_key(key: &AesKey256) -> [[u8; BLOCK_LEN]; ROUND_STATES] {
    let mut words = [[0u8; 4]; 4 * ROUND_STATES];
    for (i, w) in words.iter_mut().take(8).enumerate() {
        w.copy_from_slice(&key.0[4 * i..4 * i + 4]);
    }
    for i in 8..4 * ROUND_STATES {
        let mut temp = words[i - 1];
        if i % 8 == 0 {
            temp.rotate_left(1);
            for b in temp.iter_mut() {
                *b = SBOX[*b as usize];
            }
            temp[0] ^= RCON[i / 8 - 1];
        } else if i % 8 == 4 {
            for b in temp.iter_mut() {
                *b = SBOX[*b as usize];
            }
        }
        for j in 0..4 {
            words[i][j] = words[i - 8][j] ^ temp[j];
        }
    }
    let mut round_keys = [[0u8; BLOCK_LEN]; ROUND_STATES];
    for (r, rk) in round_keys.iter_mut().enumerate() {
        for j in 0..4 {
            rk[4 * j..4 * j + 4].copy_from_slice(&words[4 * r + j]);
        }
    }
    round_keys
}

/// The round-14 key, the one a last-round attack actually recovers.
pub fn last_round_key(key: &AesKey256) -> [u8; BLOCK_LEN] {
    expand_key(key)[ROUNDS]
}

fn sub_bytes(state: &mut [u8; BLOCK_LEN]) {
    for b in state.iter_mut() {
        *b = SBOX[*b as usize];
    }
}

fn shift_rows(state: &mut [u8; BLOCK_LEN]) {
    let old = *state;
    for (j, src) in SHIFT_ROWS_SRC.iter().enumerate() {
        state[j] = old[*src];
    }
}

fn mix_columns(state: &mut [u8; BLOCK_LEN]) {
    for col in state.chunks_exact_mut(4) {
        let [a, b, c, d] = [col[0], col[1], col[2], col[3]];
        col[0] = gf_mul2(a) ^ gf_mul2(b) ^ b ^ c ^ d;
        col[1] = a ^ gf_mul2(b) ^ gf_mul2(c) ^ c ^ d;
        col[2] = a ^ b ^ gf_mul2(c) ^ gf_mul2(d) ^ d;
        col[3] = gf_mul2(a) ^ a ^ b ^ c ^ gf_mul2(d);
    }
}

fn add_round_key(state: &mut [u8; BLOCK_LEN], rk: &[u8; BLOCK_LEN]) {
    for (b, k) in state.iter_mut().zip(rk.iter()) {
        *b ^= k;
    }
}

/// Encrypt one block, recording every round state.
pub fn encrypt(key: &AesKey256, plaintext: &[u8; BLOCK_LEN]) -> AesStateTrace {
    let round_keys = expand_key(key);
    let mut states = [[0u8; BLOCK_LEN]; ROUND_STATES];

    let mut state = *plaintext;
    add_round_key(&mut state, &round_keys[0]);
    states[0] = state;

    for round in 1..ROUNDS {
        sub_bytes(&mut state);
        shift_rows(&mut state);
        mix_columns(&mut state);
        add_round_key(&mut state, &round_keys[round]);
        states[round] = state;
    }

    sub_bytes(&mut state);
    shift_rows(&mut state);
    add_round_key(&mut state, &round_keys[ROUNDS]);
    states[ROUNDS] = state;

    AesStateTrace {
        round_states: states,
        plaintext: *plaintext,
        ciphertext: state,
    }
}

/// Inverse cipher. Exists as verification scaffolding for round-trip checks,
/// not as part of the leakage model.
pub fn decrypt_block(key: &AesKey256, ciphertext: &[u8; BLOCK_LEN]) -> [u8; BLOCK_LEN] {
    let round_keys = expand_key(key);
    let mut state = *ciphertext;

    add_round_key(&mut state, &round_keys[ROUNDS]);
    inv_shift_rows(&mut state);
    inv_sub_bytes(&mut state);

    for round in (1..ROUNDS).rev() {
        add_round_key(&mut state, &round_keys[round]);
        inv_mix_columns(&mut state);
        inv_shift_rows(&mut state);
        inv_sub_bytes(&mut state);
    }

    add_round_key(&mut state, &round_keys[0]);
    state
}

fn inv_sub_bytes(state: &mut [u8; BLOCK_LEN]) {
    for b in state.iter_mut() {
        *b = INV_SBOX[*b as usize];
    }
}

fn inv_shift_rows(state: &mut [u8; BLOCK_LEN]) {
    let old = *state;
    for (j, src) in SHIFT_ROWS_SRC.iter().enumerate() {
        state[*src] = old[j];
    }
}

fn inv_mix_columns(state: &mut [u8; BLOCK_LEN]) {
    for col in state.chunks_exact_mut(4) {
        let [a, b, c, d] = [col[0], col[1], col[2], col[3]];
        col[0] = gf_mul(a, 14) ^ gf_mul(b, 11) ^ gf_mul(c, 13) ^ gf_mul(d, 9);
        col[1] = gf_mul(a, 9) ^ gf_mul(b, 14) ^ gf_mul(c, 11) ^ gf_mul(d, 13);
        col[2] = gf_mul(a, 13) ^ gf_mul(b, 9) ^ gf_mul(c, 14) ^ gf_mul(d, 11);
        col[3] = gf_mul(a, 11) ^ gf_mul(b, 13) ^ gf_mul(c, 9) ^ gf_mul(d, 14);
    }
}

/// Last-round Hamming-distance hypothesis for a key-byte guess.
///
/// For ciphertext byte `byte_index` and guessed final-round key byte `guess`,
/// undoes the final SubBytes/ShiftRows to obtain the round-13 byte, and
/// returns its Hamming distance to the ciphertext byte that overwrote it in
/// the same register position. With the correct guess this equals the true
/// per-byte register flip count between the last two rounds.
pub fn last_round_hd_hypothesis(ct: &[u8; BLOCK_LEN], byte_index: usize, guess: u8) -> u32 {
    debug_assert!(byte_index < BLOCK_LEN);
    let round13_byte = INV_SBOX[(ct[byte_index] ^ guess) as usize];
    let register_position = SHIFT_ROWS_SRC[byte_index];
    (round13_byte ^ ct[register_position]).count_ones()
}

/// Register position whose round-13 -> round-14 transition the hypothesis for
/// `byte_index` predicts.
pub fn hypothesis_register_position(byte_index: usize) -> usize {
    SHIFT_ROWS_SRC[byte_index]
}
