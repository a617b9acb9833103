use coder::{rc_decode, rc_encode, CdfTable, RangeDecoder, RangeEncoder};
use proptest::prelude::*;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_table(rng: &mut ChaCha8Rng, max_symbols: usize) -> CdfTable {
    let n = rng.gen_range(1..=max_symbols);
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0) + 1e-6).collect();
    CdfTable::from_weights(&weights).unwrap()
}

#[test]
fn empty_stream_flush_is_at_most_eight_bytes() {
    let enc = RangeEncoder::new();
    let bytes = enc.finish();
    assert!(bytes.len() <= 8, "flush-only output was {} bytes", bytes.len());
    // Decoding zero symbols reads nothing past the header.
    let table = CdfTable::uniform(4).unwrap();
    let out = rc_decode(&bytes, &[], 0).unwrap();
    assert!(out.is_empty());
    drop(table);
}

#[test]
fn large_random_roundtrip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let tables: Vec<CdfTable> = (0..8).map(|_| random_table(&mut rng, 300)).collect();
    let n = 100_000;
    let mut symbols = Vec::with_capacity(n);
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let t = rng.gen_range(0..tables.len());
        order.push(&tables[t]);
        symbols.push(rng.gen_range(0..tables[t].n_symbols() as u32));
    }
    let bytes = rc_encode(&symbols, &order).unwrap();
    let decoded = rc_decode(&bytes, &order, n).unwrap();
    assert_eq!(symbols, decoded);
}

#[test]
fn thousand_randomized_table_stream_pairs_roundtrip() {
    // The acceptance fuzz case: 1,000 random (table set, stream) pairs.
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..1000 {
        let tables: Vec<CdfTable> = (0..rng.gen_range(1..4usize))
            .map(|_| random_table(&mut rng, 64))
            .collect();
        let n = rng.gen_range(0..200usize);
        let mut symbols = Vec::with_capacity(n);
        let mut order = Vec::with_capacity(n);
        for _ in 0..n {
            let t = rng.gen_range(0..tables.len());
            order.push(&tables[t]);
            symbols.push(rng.gen_range(0..tables[t].n_symbols() as u32));
        }
        let bytes = rc_encode(&symbols, &order).unwrap();
        let decoded = rc_decode(&bytes, &order, n).unwrap();
        assert_eq!(symbols, decoded, "fuzz case {case} failed");
    }
}

#[test]
fn skewed_binary_source_roundtrips() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let table = CdfTable::from_weights(&[0.999, 0.001]).unwrap();
    let symbols: Vec<u32> = (0..50_000)
        .map(|_| u32::from(rng.gen_range(0.0..1.0f64) < 0.001))
        .collect();
    let order: Vec<&CdfTable> = symbols.iter().map(|_| &table).collect();
    let bytes = rc_encode(&symbols, &order).unwrap();
    assert_eq!(rc_decode(&bytes, &order, symbols.len()).unwrap(), symbols);
}

#[test]
fn encoder_rejects_out_of_alphabet_symbols() {
    let table = CdfTable::uniform(4).unwrap();
    let mut enc = RangeEncoder::new();
    assert!(enc.encode(&table, 4).is_err());
}

#[test]
fn truncated_input_reports_decode_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let table = CdfTable::uniform(250).unwrap();
    let symbols: Vec<u32> = (0..200).map(|_| rng.gen_range(0..250)).collect();
    let order: Vec<&CdfTable> = symbols.iter().map(|_| &table).collect();
    let bytes = rc_encode(&symbols, &order).unwrap();
    let cut = &bytes[..bytes.len() / 2];
    let mut dec = RangeDecoder::new(cut);
    let mut failed = false;
    for _ in 0..200 {
        if dec.decode(&table).is_err() {
            failed = true;
            break;
        }
    }
    assert!(failed, "decoding truncated input never reported an error");
}

#[test]
fn cdf_tables_keep_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let t = random_table(&mut rng, 500);
        t.validate().unwrap();
        // Every symbol has frequency >= 1 even with tiny weights.
        let skew = CdfTable::from_weights(&[1e9, 1e-12, 1e-12, 3.0]).unwrap();
        skew.validate().unwrap();
        for s in 0..4 {
            assert!(skew.freq(s) >= 1);
        }
    }
    let seed = rng.next_u64();
    assert!(CdfTable::from_weights(&[]).is_err(), "seed {seed}");
    assert!(CdfTable::from_weights(&[0.0, 0.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Losslessness: decode(encode(s)) == s for arbitrary weights/symbols.
    #[test]
    fn roundtrip_property(
        weights in prop::collection::vec(1e-6f64..1.0, 1..40),
        picks in prop::collection::vec(0usize..1000, 0..300),
    ) {
        let table = CdfTable::from_weights(&weights).unwrap();
        let n_sym = table.n_symbols();
        let symbols: Vec<u32> = picks.iter().map(|&p| (p % n_sym) as u32).collect();
        let order: Vec<&CdfTable> = symbols.iter().map(|_| &table).collect();
        let bytes = rc_encode(&symbols, &order).unwrap();
        let decoded = rc_decode(&bytes, &order, symbols.len()).unwrap();
        prop_assert_eq!(symbols, decoded);
    }
}
