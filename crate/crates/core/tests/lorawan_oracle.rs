mod common;

use lorawan::keys::AES128;
use lorawan::parser::{parse, DataHeader, DataPayload, FRMPayload, PhyPayload};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wxkit::lorawan::airtime::payload_symbols;
use wxkit::lorawan::{
    airtime, payload_decode, payload_encode, AbpSession, AesKey, DevAddr, RadioParams, UplinkMeta,
    UplinkReceiver,
};
use wxkit::record::{quantize_roundtrip_bounds, Protocol};

/// Decrypts with the reference implementation and returns (fcnt, fport, payload).
/// The reference parser reports no port when FRMPayload is empty.
fn oracle(
    bytes: &[u8],
    nwk: [u8; 16],
    app: [u8; 16],
    dev_addr: u32,
    fcnt: u32,
) -> Result<(u32, Option<u8>, Vec<u8>), String> {
    let phy = parse(bytes.to_vec()).map_err(|e| format!("{e:?}"))?;
    let PhyPayload::Data(DataPayload::Encrypted(enc)) = phy else {
        return Err("not an encrypted data frame".into());
    };
    let fhdr = enc.fhdr();
    let addr = fhdr.dev_addr();
    let addr_u32 = u32::from_le_bytes(addr.as_ref().try_into().unwrap());
    if addr_u32 != dev_addr {
        return Err(format!("devaddr {addr_u32:08x}"));
    }
    if fhdr.fcnt() as u32 != fcnt & 0xFFFF {
        return Err("fcnt".into());
    }
    if !enc.validate_mic(&AES128(nwk), fcnt) {
        return Err("MIC rejected".into());
    }
    let fport = enc.f_port();
    let dec = enc
        .decrypt(Some(&AES128(nwk)), Some(&AES128(app)), fcnt)
        .map_err(|e| format!("{e:?}"))?;
    let payload = match dec.frm_payload() {
        FRMPayload::Data(d) => d.to_vec(),
        _ => return Err("unexpected payload kind".into()),
    };
    Ok((fcnt, fport, payload))
}

#[test]
fn random_sessions_agree_with_reference_decoder() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10AA);
    for case in 0..100 {
        let nwk: [u8; 16] = rng.gen();
        let app: [u8; 16] = rng.gen();
        let dev_addr: u32 = rng.gen();
        let fport = rng.gen_range(1..=223u8);
        let start = if case % 4 == 0 {
            rng.gen_range(0xFFF0..0x1_0010)
        } else {
            rng.gen_range(0..100_000)
        };
        let mut session = AbpSession::new(DevAddr(dev_addr), AesKey(nwk), AesKey(app), fport)
            .unwrap()
            .with_fcnt(start);
        let mut receiver = UplinkReceiver::for_session(&session);
        if start > 0 {
            receiver = receiver.with_last_fcnt(start - 1);
        }
        for _ in 0..3 {
            let len = rng.gen_range(0..=222usize);
            let payload: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let fcnt = session.fcnt_up().unwrap();
            let bytes = session.frame_build(&payload).unwrap();
            assert_eq!(bytes.len(), 13 + len);

            let (o_fcnt, o_port, o_payload) = oracle(&bytes, nwk, app, dev_addr, fcnt)
                .unwrap_or_else(|e| panic!("case {case}: {e}"));
            assert_eq!(o_fcnt, fcnt);
            if len > 0 {
                assert_eq!(o_port, Some(fport));
            }
            assert_eq!(o_payload, payload, "case {case}: oracle plaintext differs");

            let ours = receiver.frame_parse(&bytes).unwrap();
            assert_eq!(ours.fcnt, fcnt);
            assert_eq!(ours.payload, payload);
        }
    }
}

#[test]
fn weather_payload_frame_is_42_bytes() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut rec = common::random_record(&mut rng, Protocol::A5n1);
    rec.set_barometer(100_912, 23.4);
    let payload = payload_encode(&rec, UplinkMeta::default()).unwrap();
    assert_eq!(payload.len(), 29);
    let mut s = AbpSession::new(DevAddr(0x2601_1BDA), AesKey([1; 16]), AesKey([2; 16]), 1).unwrap();
    let frame = s.frame_build(&payload).unwrap();
    assert_eq!(frame.len(), 42);
    let t = airtime(&RadioParams::with_sf(9), frame.len()).unwrap();
    assert!((t * 1e3 - 287.744).abs() < 1e-9);
}

proptest! {
    #[test]
    fn payload_roundtrip_within_quantization(seed in any::<u64>(), lcw in any::<bool>(), mask in 0u8..0x80, pressure in 30_000u32..120_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let protocol = if lcw { Protocol::Lcw } else { Protocol::A5n1 };
        let mut rec = common::random_record(&mut rng, protocol);
        rec.set_barometer(pressure, rng.gen_range(-20.0..60.0));
        rec.seq = rng.gen();
        rec.battery_mv = rng.gen();
        rec.invalidate(!mask);
        let bytes = payload_encode(&rec, UplinkMeta { frames_received: 2, cycle_time_s: 900 }).unwrap();
        let (back, meta) = payload_decode(&bytes).unwrap();
        prop_assert_eq!(meta.cycle_time_s, 900);
        prop_assert_eq!(back.seq, rec.seq);
        prop_assert_eq!(back.battery_mv, rec.battery_mv);
        let mut expected = rec.clone();
        if lcw {
            expected.board_temp_c = back.board_temp_c;
        }
        prop_assert!(quantize_roundtrip_bounds(&expected).admits(&expected, &back), "{:?} vs {:?}", expected, back);
    }

    #[test]
    fn airtime_monotone_in_length_and_sf(len in 0usize..255, sf in 7u8..12) {
        let p = RadioParams::with_sf(sf);
        let q = RadioParams::with_sf(sf + 1);
        prop_assert!(airtime(&p, len + 1).unwrap() >= airtime(&p, len).unwrap());
        prop_assert!(airtime(&q, len).unwrap() > airtime(&p, len).unwrap());
        prop_assert!(payload_symbols(&p, len) >= 8);
    }
}
