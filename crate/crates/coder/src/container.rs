use crate::crc::crc32;
use crate::{CoderError, Result};

pub const CONTAINER_MAGIC: &[u8; 4] = b"UIC1";
pub const CONTAINER_VERSION: u8 = 1;

/// Parsed container header. The mode occupies a single flag bit; the style
/// payload is present exactly when its flag bit is set.
#[derive(Clone, Debug, PartialEq)]
pub struct ContainerHeader {
    /// false = autoencoding, true = translation.
    pub mode_bit: bool,
    pub width: u16,
    pub height: u16,
    /// (channels, height, width) of the content latent.
    pub latent_dims: (u16, u16, u16),
    /// (channels, height, width) of the hyper latent.
    pub hyper_dims: (u16, u16, u16),
    pub target_domain: u8,
    /// Raw 32-bit style values, present iff provided on the sender side.
    pub style: Option<Vec<f32>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub header: ContainerHeader,
    pub hyper_payload: Vec<u8>,
    pub main_payload: Vec<u8>,
}

impl Container {
    /// Total bits divided by pixel count.
    pub fn bpp_of_len(total_bytes: usize, width: usize, height: usize) -> f64 {
        (total_bytes * 8) as f64 / (width * height) as f64
    }
}

fn push_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Serialize a container. Layout is fixed and versioned; see FORMAT.md.
pub fn pack(c: &Container) -> Vec<u8> {
    let mut out = Vec::with_capacity(
        40 + c.header.style.as_ref().map_or(0, |s| s.len() * 4)
            + c.hyper_payload.len()
            + c.main_payload.len(),
    );
    out.extend_from_slice(CONTAINER_MAGIC);
    out.push(CONTAINER_VERSION);
    let mut flags = 0u8;
    if c.header.mode_bit {
        flags |= 1;
    }
    if c.header.style.is_some() {
        flags |= 2;
    }
    out.push(flags);
    push_u16(&mut out, c.header.width);
    push_u16(&mut out, c.header.height);
    push_u16(&mut out, c.header.latent_dims.0);
    push_u16(&mut out, c.header.latent_dims.1);
    push_u16(&mut out, c.header.latent_dims.2);
    push_u16(&mut out, c.header.hyper_dims.0);
    push_u16(&mut out, c.header.hyper_dims.1);
    push_u16(&mut out, c.header.hyper_dims.2);
    out.push(c.header.target_domain);
    match &c.header.style {
        Some(style) => {
            push_u16(&mut out, style.len() as u16);
            for v in style {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        None => push_u16(&mut out, 0),
    }
    push_u32(&mut out, c.hyper_payload.len() as u32);
    out.extend_from_slice(&c.hyper_payload);
    push_u32(&mut out, c.main_payload.len() as u32);
    out.extend_from_slice(&c.main_payload);
    let checksum = crc32(&out);
    push_u32(&mut out, checksum);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> CoderError {
        CoderError::Container {
            position: self.pos,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.err(format!(
                "need {n} bytes, only {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parse and validate a container, checksum included.
pub fn unpack(bytes: &[u8]) -> Result<Container> {
    if bytes.len() < 4 {
        return Err(CoderError::Container {
            position: 0,
            message: "too short for a header".into(),
        });
    }
    let body_len = bytes.len() - 4;
    let stored = u32::from_le_bytes([
        bytes[body_len],
        bytes[body_len + 1],
        bytes[body_len + 2],
        bytes[body_len + 3],
    ]);
    let actual = crc32(&bytes[..body_len]);
    if stored != actual {
        return Err(CoderError::Container {
            position: body_len,
            message: format!("checksum mismatch: stored {stored:#010x}, computed {actual:#010x}"),
        });
    }

    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != CONTAINER_MAGIC {
        return Err(CoderError::Container {
            position: 0,
            message: format!("bad magic {magic:?}"),
        });
    }
    let version = r.u8()?;
    if version != CONTAINER_VERSION {
        return Err(CoderError::Container {
            position: 4,
            message: format!("unsupported version {version}"),
        });
    }
    let flags = r.u8()?;
    if flags & !0b11 != 0 {
        return Err(CoderError::Container {
            position: 5,
            message: format!("reserved flag bits set: {flags:#04x}"),
        });
    }
    let mode_bit = flags & 1 != 0;
    let style_present = flags & 2 != 0;
    let width = r.u16()?;
    let height = r.u16()?;
    let latent_dims = (r.u16()?, r.u16()?, r.u16()?);
    let hyper_dims = (r.u16()?, r.u16()?, r.u16()?);
    let target_domain = r.u8()?;
    let style_len = r.u16()? as usize;
    if style_present != (style_len > 0) {
        return Err(r.err("style flag inconsistent with style length"));
    }
    let style = if style_present {
        let raw = r.take(style_len * 4)?;
        Some(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        )
    } else {
        None
    };
    let hyper_len = r.u32()? as usize;
    let hyper_payload = r.take(hyper_len)?.to_vec();
    let main_len = r.u32()? as usize;
    let main_payload = r.take(main_len)?.to_vec();
    if r.pos != body_len {
        return Err(r.err(format!(
            "trailing bytes: payload ends at {} but checksum starts at {body_len}",
            r.pos
        )));
    }
    Ok(Container {
        header: ContainerHeader {
            mode_bit,
            width,
            height,
            latent_dims,
            hyper_dims,
            target_domain,
            style,
        },
        hyper_payload,
        main_payload,
    })
}
