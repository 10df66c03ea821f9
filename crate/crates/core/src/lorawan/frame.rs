//! LoRaWAN 1.0.x ABP unconfirmed uplinks: FRMPayload encryption, MIC, and
//! the matching network-server side parser.

use std::fmt;

use aes::cipher::{generic_array::GenericArray, BlockEncrypt, KeyInit};
use aes::Aes128;
use cmac::{Cmac, Mac};
use thiserror::Error;

pub const MHDR_UNCONFIRMED_UP: u8 = 0x40;
/// MHDR + FHDR (no FOpts) + MIC.
pub const MIN_FRAME_LEN: usize = 12;
pub const MAX_PAYLOAD_LEN: usize = 222;
pub const FCNT_WINDOW: u32 = 16;
const DIR_UPLINK: u8 = 0x00;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("payload of {0} bytes exceeds {MAX_PAYLOAD_LEN}")]
    PayloadTooLong(usize),
    #[error("uplink frame counter exhausted")]
    CounterExhausted,
    #[error("fport {0} outside 1..=223")]
    InvalidFPort(u8),
    #[error("frame of {0} bytes is shorter than {MIN_FRAME_LEN}")]
    TooShort(usize),
    #[error("unsupported MHDR {0:#04x}")]
    UnsupportedMhdr(u8),
    #[error("frame is addressed to {0}")]
    UnknownDevAddr(DevAddr),
    #[error("MIC mismatch")]
    MicMismatch,
    #[error("frame counter {received} outside window (expected {expected} ±{FCNT_WINDOW})")]
    CounterWindow { received: u32, expected: u32 },
    #[error("frame counter {0} replayed")]
    Replay(u32),
    #[error("invalid key material: {0}")]
    Key(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DevAddr(pub u32);

impl DevAddr {
    /// Parses the conventional big-endian hex form, e.g. `26011bda`.
    pub fn from_hex(text: &str) -> Result<Self, FrameError> {
        let bytes = parse_hex_fixed::<4>(text)?;
        Ok(DevAddr(u32::from_be_bytes(bytes)))
    }
}

impl fmt::Display for DevAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08x}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct AesKey(pub [u8; 16]);

impl AesKey {
    pub fn from_hex(text: &str) -> Result<Self, FrameError> {
        parse_hex_fixed::<16>(text).map(AesKey)
    }
}

impl fmt::Debug for AesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("AesKey(..)")
    }
}

fn parse_hex_fixed<const N: usize>(text: &str) -> Result<[u8; N], FrameError> {
    let text = text.trim();
    if text.len() != 2 * N {
        return Err(FrameError::Key(format!(
            "expected {} hex digits, got {}",
            2 * N,
            text.len()
        )));
    }
    let mut out = [0u8; N];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = u8::from_str_radix(&text[2 * i..2 * i + 2], 16)
            .map_err(|_| FrameError::Key(format!("invalid hex '{text}'")))?;
    }
    Ok(out)
}

fn aes_block(key: &AesKey, block: [u8; 16]) -> [u8; 16] {
    let cipher = Aes128::new(GenericArray::from_slice(&key.0));
    let mut b = GenericArray::from(block);
    cipher.encrypt_block(&mut b);
    b.into()
}

/// XORs `data` with the FRMPayload keystream. Applying it twice is the
/// identity.
pub fn apply_keystream(key: &AesKey, dev_addr: DevAddr, fcnt: u32, uplink: bool, data: &mut [u8]) {
    let mut a = [0u8; 16];
    a[0] = 0x01;
    a[5] = if uplink { DIR_UPLINK } else { 0x01 };
    a[6..10].copy_from_slice(&dev_addr.0.to_le_bytes());
    a[10..14].copy_from_slice(&fcnt.to_le_bytes());
    for (i, chunk) in data.chunks_mut(16).enumerate() {
        a[15] = (i + 1) as u8;
        let s = aes_block(key, a);
        for (d, k) in chunk.iter_mut().zip(s.iter()) {
            *d ^= k;
        }
    }
}

/// First four bytes of AES-CMAC over B0 ‖ msg, where msg is MHDR through
/// FRMPayload.
pub fn compute_mic(
    key: &AesKey,
    dev_addr: DevAddr,
    fcnt: u32,
    uplink: bool,
    msg: &[u8],
) -> [u8; 4] {
    let mut b0 = [0u8; 16];
    b0[0] = 0x49;
    b0[5] = if uplink { DIR_UPLINK } else { 0x01 };
    b0[6..10].copy_from_slice(&dev_addr.0.to_le_bytes());
    b0[10..14].copy_from_slice(&fcnt.to_le_bytes());
    b0[15] = msg.len() as u8;
    let mut mac = <Cmac<Aes128> as Mac>::new_from_slice(&key.0).expect("16-byte key");
    mac.update(&b0);
    mac.update(msg);
    let tag = mac.finalize().into_bytes();
    [tag[0], tag[1], tag[2], tag[3]]
}

/// Device-side ABP session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbpSession {
    pub dev_addr: DevAddr,
    pub nwk_skey: AesKey,
    pub app_skey: AesKey,
    fport: u8,
    /// Next counter to use; 2^32 once exhausted.
    fcnt_up: u64,
}

impl AbpSession {
    pub fn new(
        dev_addr: DevAddr,
        nwk_skey: AesKey,
        app_skey: AesKey,
        fport: u8,
    ) -> Result<Self, FrameError> {
        if !(1..=223).contains(&fport) {
            return Err(FrameError::InvalidFPort(fport));
        }
        Ok(AbpSession {
            dev_addr,
            nwk_skey,
            app_skey,
            fport,
            fcnt_up: 0,
        })
    }

    pub fn with_fcnt(mut self, fcnt: u32) -> Self {
        self.fcnt_up = fcnt as u64;
        self
    }

    pub fn fport(&self) -> u8 {
        self.fport
    }

    /// Counter the next frame will carry, `None` once exhausted.
    pub fn fcnt_up(&self) -> Option<u32> {
        u32::try_from(self.fcnt_up).ok()
    }

    fn take_fcnt(&mut self) -> Result<u32, FrameError> {
        let fcnt = self.fcnt_up().ok_or(FrameError::CounterExhausted)?;
        self.fcnt_up += 1;
        Ok(fcnt)
    }

    /// Builds an unconfirmed uplink carrying `payload` on the session's port.
    pub fn frame_build(&mut self, payload: &[u8]) -> Result<Vec<u8>, FrameError> {
        if payload.len() > MAX_PAYLOAD_LEN {
            return Err(FrameError::PayloadTooLong(payload.len()));
        }
        self.build(Some(payload))
    }

    /// Builds an uplink with neither FPort nor FRMPayload.
    pub fn frame_build_empty(&mut self) -> Result<Vec<u8>, FrameError> {
        self.build(None)
    }

    fn build(&mut self, payload: Option<&[u8]>) -> Result<Vec<u8>, FrameError> {
        let fcnt = self.take_fcnt()?;
        let mut frame = UplinkFrame {
            mhdr: MHDR_UNCONFIRMED_UP,
            dev_addr: self.dev_addr,
            fctrl: 0x00,
            fcnt: fcnt as u16,
            fport: payload.map(|_| self.fport),
            frm_payload: payload.map(<[u8]>::to_vec).unwrap_or_default(),
            mic: [0; 4],
        };
        apply_keystream(
            &self.app_skey,
            self.dev_addr,
            fcnt,
            true,
            &mut frame.frm_payload,
        );
        let mut bytes = frame.to_bytes();
        let body = bytes.len() - 4;
        let mic = compute_mic(&self.nwk_skey, self.dev_addr, fcnt, true, &bytes[..body]);
        bytes[body..].copy_from_slice(&mic);
        Ok(bytes)
    }
}

/// Structural view of an uplink; no cryptographic checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UplinkFrame {
    pub mhdr: u8,
    pub dev_addr: DevAddr,
    pub fctrl: u8,
    /// Low 16 bits of the frame counter.
    pub fcnt: u16,
    pub fport: Option<u8>,
    pub frm_payload: Vec<u8>,
    pub mic: [u8; 4],
}

impl UplinkFrame {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + self.frm_payload.len());
        out.push(self.mhdr);
        out.extend_from_slice(&self.dev_addr.0.to_le_bytes());
        out.push(self.fctrl);
        out.extend_from_slice(&self.fcnt.to_le_bytes());
        if let Some(port) = self.fport {
            out.push(port);
            out.extend_from_slice(&self.frm_payload);
        }
        out.extend_from_slice(&self.mic);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FrameError> {
        if bytes.len() < MIN_FRAME_LEN {
            return Err(FrameError::TooShort(bytes.len()));
        }
        if bytes[0] != MHDR_UNCONFIRMED_UP {
            return Err(FrameError::UnsupportedMhdr(bytes[0]));
        }
        let dev_addr = DevAddr(u32::from_le_bytes([bytes[1], bytes[2], bytes[3], bytes[4]]));
        let fctrl = bytes[5];
        let fcnt = u16::from_le_bytes([bytes[6], bytes[7]]);
        let fopts_len = (fctrl & 0x0F) as usize;
        let port_at = 8 + fopts_len;
        let mic_at = bytes.len() - 4;
        if port_at > mic_at {
            return Err(FrameError::TooShort(bytes.len()));
        }
        let (fport, frm_payload) = if port_at < mic_at {
            (Some(bytes[port_at]), bytes[port_at + 1..mic_at].to_vec())
        } else {
            (None, Vec::new())
        };
        let mut mic = [0u8; 4];
        mic.copy_from_slice(&bytes[mic_at..]);
        Ok(UplinkFrame {
            mhdr: bytes[0],
            dev_addr,
            fctrl,
            fcnt,
            fport,
            frm_payload,
            mic,
        })
    }
}

/// A verified and decrypted uplink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceivedUplink {
    pub fcnt: u32,
    pub fport: Option<u8>,
    pub payload: Vec<u8>,
}

/// Network/application server state for one ABP device.
#[derive(Debug, Clone)]
pub struct UplinkReceiver {
    pub dev_addr: DevAddr,
    nwk_skey: AesKey,
    app_skey: AesKey,
    last_fcnt: Option<u32>,
}

impl UplinkReceiver {
    pub fn new(dev_addr: DevAddr, nwk_skey: AesKey, app_skey: AesKey) -> Self {
        UplinkReceiver {
            dev_addr,
            nwk_skey,
            app_skey,
            last_fcnt: None,
        }
    }

    pub fn for_session(session: &AbpSession) -> Self {
        Self::new(session.dev_addr, session.nwk_skey, session.app_skey)
    }

    /// Starts with `last` as the most recently accepted counter.
    pub fn with_last_fcnt(mut self, last: u32) -> Self {
        self.last_fcnt = Some(last);
        self
    }

    pub fn last_fcnt(&self) -> Option<u32> {
        self.last_fcnt
    }

    fn expected_fcnt(&self) -> u32 {
        self.last_fcnt.map_or(0, |l| l.wrapping_add(1))
    }

    /// Full 32-bit counter nearest to the expected one with the given low
    /// 16 bits.
    fn reconstruct(&self, low: u16) -> u32 {
        let expected = self.expected_fcnt() as i64;
        let base = expected & !0xFFFF;
        [base - 0x10000, base, base + 0x10000]
            .into_iter()
            .map(|b| b | low as i64)
            .filter(|c| (0..=u32::MAX as i64).contains(c))
            .min_by_key(|c| (c - expected).abs())
            .unwrap_or(low as i64) as u32
    }

    /// Verifies the MIC, checks the counter window, then decrypts.
    pub fn frame_parse(&mut self, bytes: &[u8]) -> Result<ReceivedUplink, FrameError> {
        let frame = UplinkFrame::from_bytes(bytes)?;
        if frame.dev_addr != self.dev_addr {
            return Err(FrameError::UnknownDevAddr(frame.dev_addr));
        }
        let fcnt = self.reconstruct(frame.fcnt);
        let body = &bytes[..bytes.len() - 4];
        if compute_mic(&self.nwk_skey, self.dev_addr, fcnt, true, body) != frame.mic {
            return Err(FrameError::MicMismatch);
        }
        let expected = self.expected_fcnt();
        if (fcnt as i64 - expected as i64).abs() > FCNT_WINDOW as i64 {
            return Err(FrameError::CounterWindow {
                received: fcnt,
                expected,
            });
        }
        if self.last_fcnt.is_some_and(|last| fcnt <= last) {
            return Err(FrameError::Replay(fcnt));
        }
        let key = match frame.fport {
            Some(0) => &self.nwk_skey,
            _ => &self.app_skey,
        };
        let mut payload = frame.frm_payload;
        apply_keystream(key, self.dev_addr, fcnt, true, &mut payload);
        self.last_fcnt = Some(fcnt);
        Ok(ReceivedUplink {
            fcnt,
            fport: frame.fport,
            payload,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session() -> AbpSession {
        AbpSession::new(
            DevAddr(0x2601_1BDA),
            AesKey([0x11; 16]),
            AesKey([0x22; 16]),
            1,
        )
        .unwrap()
    }

    #[test]
    fn frame_sizes() {
        let mut s = session();
        assert_eq!(s.frame_build(&[0u8; 29]).unwrap().len(), 42);
        assert_eq!(s.frame_build_empty().unwrap().len(), 12);
        assert_eq!(s.frame_build(&[]).unwrap().len(), 13);
        assert_eq!(s.fcnt_up(), Some(3));
    }

    #[test]
    fn header_layout() {
        let mut s = session().with_fcnt(0x0001_0203);
        let f = s.frame_build(&[1, 2, 3]).unwrap();
        assert_eq!(f[0], 0x40);
        assert_eq!(&f[1..5], &[0xDA, 0x1B, 0x01, 0x26]);
        assert_eq!(f[5], 0);
        assert_eq!(&f[6..8], &[0x03, 0x02]);
        assert_eq!(f[8], 1);
    }

    #[test]
    fn payload_too_long() {
        let mut s = session();
        assert_eq!(
            s.frame_build(&[0u8; 223]),
            Err(FrameError::PayloadTooLong(223))
        );
        assert!(s.frame_build(&[0u8; 222]).is_ok());
    }

    #[test]
    fn counter_exhaustion() {
        let mut s = session().with_fcnt(u32::MAX);
        assert!(s.frame_build(&[1]).is_ok());
        assert_eq!(s.frame_build(&[1]), Err(FrameError::CounterExhausted));
    }

    #[test]
    fn invalid_fport() {
        assert!(AbpSession::new(DevAddr(1), AesKey([0; 16]), AesKey([0; 16]), 0).is_err());
        assert!(AbpSession::new(DevAddr(1), AesKey([0; 16]), AesKey([0; 16]), 224).is_err());
    }

    #[test]
    fn parse_roundtrip_and_replay() {
        let mut s = session();
        let mut rx = UplinkReceiver::for_session(&s);
        let f = s.frame_build(b"hello weather").unwrap();
        let up = rx.frame_parse(&f).unwrap();
        assert_eq!(up.payload, b"hello weather");
        assert_eq!(up.fcnt, 0);
        assert_eq!(rx.frame_parse(&f), Err(FrameError::Replay(0)));
    }

    #[test]
    fn tampered_payload_fails_mic() {
        let mut s = session();
        let mut rx = UplinkReceiver::for_session(&s);
        let mut f = s.frame_build(&[7u8; 29]).unwrap();
        f[20] ^= 0x01;
        assert_eq!(rx.frame_parse(&f), Err(FrameError::MicMismatch));
    }

    #[test]
    fn counter_window() {
        let mut s = session().with_fcnt(100);
        let mut rx = UplinkReceiver::for_session(&s).with_last_fcnt(80);
        let f = s.frame_build(&[1]).unwrap();
        assert_eq!(
            rx.frame_parse(&f),
            Err(FrameError::CounterWindow {
                received: 100,
                expected: 81
            })
        );
        let mut rx = UplinkReceiver::for_session(&s).with_last_fcnt(90);
        assert_eq!(rx.frame_parse(&f).unwrap().fcnt, 100);
    }

    #[test]
    fn counter_reconstruction_across_16_bit_rollover() {
        let mut s = session().with_fcnt(0x1_0002);
        let mut rx = UplinkReceiver::for_session(&s).with_last_fcnt(0xFFFE);
        let f = s.frame_build(&[9, 9]).unwrap();
        let up = rx.frame_parse(&f).unwrap();
        assert_eq!(up.fcnt, 0x1_0002);
        assert_eq!(up.payload, vec![9, 9]);
    }

    #[test]
    fn hex_keys() {
        assert_eq!(DevAddr::from_hex("26011bda").unwrap(), DevAddr(0x2601_1BDA));
        assert!(DevAddr::from_hex("26011b").is_err());
        assert!(AesKey::from_hex(&"zz".repeat(16)).is_err());
        assert_eq!(
            AesKey::from_hex(&"0a".repeat(16)).unwrap(),
            AesKey([0x0A; 16])
        );
    }
}
