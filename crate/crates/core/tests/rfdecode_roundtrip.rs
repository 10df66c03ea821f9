mod common;

use common::{random_record, through_the_air, within_native_resolution};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wxkit::record::Protocol;
use wxkit::rfdecode::{
    decode_a5n1, decode_capture, decode_lcw, A5n1Frame, A5n1MessageType, BitString, DecodeError,
    LcwFrame, LcwQuantity, PulseTrain, TimingSpec,
};

fn protocol() -> impl Strategy<Value = Protocol> {
    prop_oneof![Just(Protocol::A5n1), Just(Protocol::Lcw)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn a5n1_records_survive_the_air(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rec = random_record(&mut rng, Protocol::A5n1);
        let back = through_the_air(&rec, 1.0).map_err(TestCaseError::fail)?;
        within_native_resolution(&rec, &back).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn lcw_records_survive_the_air(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rec = random_record(&mut rng, Protocol::Lcw);
        let back = through_the_air(&rec, 1.0).map_err(TestCaseError::fail)?;
        within_native_resolution(&rec, &back).map_err(TestCaseError::fail)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn uniform_time_scaling_is_tolerated(seed in any::<u64>(), p in protocol(), scale in 0.7f64..=1.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rec = random_record(&mut rng, p);
        let nominal = through_the_air(&rec, 1.0).map_err(TestCaseError::fail)?;
        let scaled = through_the_air(&rec, scale).map_err(TestCaseError::fail)?;
        prop_assert_eq!(nominal, scaled);
    }

    #[test]
    fn capture_text_roundtrips(seed in any::<u64>(), p in protocol()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rec = random_record(&mut rng, p);
        let timing = TimingSpec::default();
        for frame in wxkit::rfdecode::frames_for_record(&rec).unwrap() {
            let train = wxkit::rfdecode::frame_to_pulses(&frame, &timing);
            let text = train.to_string();
            prop_assert_eq!(PulseTrain::parse(&text).unwrap(), train);
        }
    }
}

fn fixed_a5n1() -> A5n1Frame {
    A5n1Frame::assemble(&wxkit::rfdecode::a5n1::A5n1Raw {
        channel: 2,
        id: 0x1B7,
        battery_ok: true,
        message_type: A5n1MessageType::WindTempHumidity,
        wind_raw: 17,
        dir_code: 0,
        rain_counter: 0,
        temp_raw: 712,
        humidity: 63,
    })
    .unwrap()
}

#[test]
fn every_single_bit_flip_in_the_first_seven_bytes_is_detected() {
    let good = fixed_a5n1().to_bits();
    for pos in 0..56 {
        let mut bits = good.clone();
        bits.as_mut_slice()[pos] = !bits.as_slice()[pos];
        assert!(
            decode_a5n1(&bits).is_err(),
            "flip at bit {pos} slipped through"
        );
    }
}

#[test]
fn every_single_nibble_substitution_is_detected() {
    let frame = LcwFrame::assemble(LcwQuantity::Humidity, 574, 93, true).unwrap();
    let nibbles = frame.nibbles();
    for i in 0..13 {
        for v in 0..16u8 {
            if v == nibbles[i] {
                continue;
            }
            let mut n = nibbles;
            n[i] = v;
            let bits = BitString::from_nibbles(&n);
            assert!(decode_lcw(&bits).is_err(), "nibble {i} -> {v:#x} accepted");
        }
    }
}

#[test]
fn checksum_failure_is_reported_by_name() {
    let mut bytes = fixed_a5n1().bytes();
    bytes[7] = bytes[7].wrapping_add(1);
    let err = decode_a5n1(&BitString::from_bytes(&bytes)).unwrap_err();
    assert!(matches!(err, DecodeError::Checksum { .. }));
    assert!(err.to_string().contains("checksum"));
}

#[test]
fn two_frames_in_one_capture() {
    let timing = TimingSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rec = random_record(&mut rng, Protocol::A5n1);
    let frames = wxkit::rfdecode::frames_for_record(&rec).unwrap();
    let mut train = PulseTrain::new();
    for f in &frames {
        train.append(&wxkit::rfdecode::frame_to_pulses(f, &timing));
        train.push(wxkit::rfdecode::Level::Low, 10_000);
    }
    let results = decode_capture(&train, &timing, Protocol::A5n1);
    assert_eq!(results.len(), 2);
    assert!(results.iter().all(Result::is_ok));
}
