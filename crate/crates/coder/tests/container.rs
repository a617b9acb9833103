use coder::{pack, unpack, CoderError, Container, ContainerHeader};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample_container(style: Option<Vec<f32>>) -> Container {
    Container {
        header: ContainerHeader {
            mode_bit: true,
            width: 64,
            height: 64,
            latent_dims: (8, 4, 4),
            hyper_dims: (8, 1, 1),
            target_domain: 1,
            style,
        },
        hyper_payload: vec![1, 2, 3, 4, 5],
        main_payload: vec![9; 40],
    }
}

#[test]
fn pack_unpack_is_identity_for_both_mode_bits() {
    for mode in [false, true] {
        let mut c = sample_container(Some(vec![0.5, -1.25, 3.0]));
        c.header.mode_bit = mode;
        let bytes = pack(&c);
        let back = unpack(&bytes).unwrap();
        assert_eq!(back, c);
    }
}

#[test]
fn absent_style_stores_no_style_bytes() {
    let with = pack(&sample_container(Some(vec![1.0; 16])));
    let without = pack(&sample_container(None));
    assert_eq!(with.len() - without.len(), 16 * 4);
    assert!(unpack(&without).unwrap().header.style.is_none());
}

#[test]
fn style_overhead_matches_bpp_accounting_at_256() {
    // A 64-value style payload on a 256x256 image is exactly 2048 bits,
    // i.e. 0.03125 bits per pixel.
    let mut c = sample_container(Some(vec![0.0; 64]));
    c.header.width = 256;
    c.header.height = 256;
    let with = pack(&c);
    c.header.style = None;
    let without = pack(&c);
    let extra_bits = (with.len() - without.len()) * 8;
    assert_eq!(extra_bits, 64 * 32);
    let bpp = extra_bits as f64 / (256.0 * 256.0);
    assert!((bpp - 0.03125).abs() < 1e-12);
}

#[test]
fn any_single_byte_corruption_is_detected() {
    let c = sample_container(Some(vec![2.5; 4]));
    let bytes = pack(&c);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for pos in 0..bytes.len() {
        let mut corrupt = bytes.clone();
        let flip: u8 = loop {
            let b: u8 = rng.gen();
            if b != 0 {
                break b;
            }
        };
        corrupt[pos] ^= flip;
        assert!(
            unpack(&corrupt).is_err(),
            "corruption at byte {pos} went undetected"
        );
    }
}

#[test]
fn container_errors_carry_positions() {
    let c = sample_container(None);
    let mut bytes = pack(&c);
    // Rewrite the magic and fix up the checksum so the magic check fires.
    bytes[0] = b'X';
    let body = bytes.len() - 4;
    let crc = coder::crc32(&bytes[..body]);
    bytes[body..].copy_from_slice(&crc.to_le_bytes());
    match unpack(&bytes) {
        Err(CoderError::Container { position, .. }) => assert_eq!(position, 0),
        other => panic!("expected container error, got {other:?}"),
    }
}

#[test]
fn truncated_container_is_rejected() {
    let bytes = pack(&sample_container(None));
    for cut in [0, 3, 10, bytes.len() - 5] {
        assert!(unpack(&bytes[..cut]).is_err());
    }
}
