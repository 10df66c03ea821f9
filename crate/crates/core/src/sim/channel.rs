//! Lossy 433 MHz link between station and transponder.

use rand::Rng;

use crate::rfdecode::BitString;

use super::config::ChannelSpec;

/// Drops the frame with probability `loss`, otherwise flips each bit
/// independently with probability `bit_flip`.
pub fn channel_apply<R: Rng + ?Sized>(
    bits: &BitString,
    spec: &ChannelSpec,
    rng: &mut R,
) -> Option<BitString> {
    if spec.loss > 0.0 && rng.gen_bool(spec.loss) {
        return None;
    }
    let mut out = bits.clone();
    if spec.bit_flip > 0.0 {
        for b in out.as_mut_slice() {
            if rng.gen_bool(spec.bit_flip) {
                *b = !*b;
            }
        }
    }
    Some(out)
}
