use crate::cdf::{CdfTable, PROB_TOTAL};
use crate::{CoderError, Result};

const TOP: u32 = 1 << 24;

/// 32-bit range encoder with 16-bit frequency precision.
///
/// Renormalization keeps `range >= 2^24` before every encode step, so the
/// per-symbol truncation loss is bounded by `2^-8` of the interval. Carries
/// never touch already-emitted bytes: the byte that could still be affected
/// is held in `cache`, and a run of 0xFF bytes that a carry would ripple
/// through is held as a pending count, exactly as in the classic shift-low
/// scheme. Output is therefore append-only and platform-exact.
pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        RangeEncoder {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut byte = self.cache;
            loop {
                self.out.push(byte.wrapping_add(carry));
                byte = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.cache_size += 1;
        self.low = (((self.low as u32) << 8) as u64) & 0xFFFF_FF00;
    }

    /// Encode one symbol under a table.
    pub fn encode(&mut self, table: &CdfTable, symbol: u32) -> Result<()> {
        if symbol as usize >= table.n_symbols() {
            return Err(CoderError::Encode(format!(
                "symbol {symbol} outside alphabet of {} symbols",
                table.n_symbols()
            )));
        }
        let (cum, freq) = table.span(symbol);
        let r = self.range / PROB_TOTAL;
        self.low += (r as u64) * (cum as u64);
        self.range = if cum + freq == PROB_TOTAL {
            // Last span absorbs the division remainder.
            self.range - r * cum
        } else {
            r * freq
        };
        while self.range < TOP {
            self.shift_low();
            self.range <<= 8;
        }
        Ok(())
    }

    /// Flush the remaining state. Output always carries one priming byte up
    /// front and four tail bytes, so a flush-only stream is five bytes.
    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

/// Decoder mirroring [`RangeEncoder`]. It tracks the offset of the coded
/// point within the current interval, so no carry handling is needed here.
pub struct RangeDecoder<'a> {
    range: u32,
    code: u32,
    input: &'a [u8],
    pos: usize,
    overread: usize,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(input: &'a [u8]) -> Self {
        let mut d = RangeDecoder {
            range: u32::MAX,
            code: 0,
            input,
            pos: 0,
            overread: 0,
        };
        // First byte is the encoder's priming byte; the next four seed code.
        d.next_byte();
        for _ in 0..4 {
            let b = d.next_byte();
            d.code = (d.code << 8) | b as u32;
        }
        d
    }

    fn next_byte(&mut self) -> u8 {
        if self.pos < self.input.len() {
            let b = self.input[self.pos];
            self.pos += 1;
            b
        } else {
            self.overread += 1;
            0
        }
    }

    /// Decode one symbol under a table. Reports truncation if the stream ran
    /// out of bytes that a well-formed stream would still contain.
    pub fn decode(&mut self, table: &CdfTable) -> Result<u32> {
        if self.overread > 0 {
            return Err(CoderError::Decode("truncated input".into()));
        }
        let r = self.range / PROB_TOTAL;
        // On corrupt input the target may exceed the table; clamp so we
        // return a (garbage) symbol instead of panicking, since mismatched
        // tables are not detectable at this layer.
        let target = (self.code / r).min(PROB_TOTAL - 1);
        let symbol = table.lookup(target);
        let (cum, freq) = table.span(symbol);
        self.code = self.code.wrapping_sub(r.wrapping_mul(cum));
        self.range = if cum + freq == PROB_TOTAL {
            self.range - r * cum
        } else {
            r * freq
        };
        while self.range < TOP {
            let b = self.next_byte();
            self.code = (self.code << 8) | b as u32;
            self.range <<= 8;
        }
        Ok(symbol)
    }
}

/// Encode a symbol stream: one table reference per symbol, in coding order.
pub fn rc_encode(symbols: &[u32], tables: &[&CdfTable]) -> Result<Vec<u8>> {
    if symbols.len() != tables.len() {
        return Err(CoderError::Encode(format!(
            "{} symbols but {} tables",
            symbols.len(),
            tables.len()
        )));
    }
    let mut enc = RangeEncoder::new();
    for (&s, t) in symbols.iter().zip(tables.iter()) {
        enc.encode(t, s)?;
    }
    Ok(enc.finish())
}

/// Decode `count` symbols with the same table order used for encoding.
pub fn rc_decode(bytes: &[u8], tables: &[&CdfTable], count: usize) -> Result<Vec<u32>> {
    if tables.len() != count {
        return Err(CoderError::Decode(format!(
            "{count} symbols requested but {} tables supplied",
            tables.len()
        )));
    }
    let mut dec = RangeDecoder::new(bytes);
    let mut out = Vec::with_capacity(count);
    for t in tables {
        out.push(dec.decode(t)?);
    }
    Ok(out)
}
