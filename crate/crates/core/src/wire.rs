//! Canonical byte encoding for everything that crosses the air-ground link or
//! is persisted by the long-term store.
//!
//! All fields are fixed width, little endian:
//!
//! | field               | bytes |
//! |---------------------|-------|
//! | tag / flag          | 1     |
//! | counter (`u32`)     | 4     |
//! | cell (`u16`, `u16`) | 4     |
//! | cell report         | 5 (cell + state byte) |
//! | real (`f64`)        | 8     |
//! | list                | 4-byte count + elements |
//!
//! Message sizes are always the length of this encoding, never set by hand.

use thiserror::Error;

use crate::world::{Cell, CellState, KnownState};

pub const TAG_BYTES: usize = 1;
pub const COUNTER_BYTES: usize = 4;
pub const CELL_BYTES: usize = 4;
pub const CELL_REPORT_BYTES: usize = 5;
pub const REAL_BYTES: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("truncated input: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("invalid tag {tag} for {what} at offset {offset}")]
    InvalidTag { what: &'static str, tag: u8, offset: usize },
    #[error("{0} trailing bytes after record")]
    Trailing(usize),
}

#[derive(Default, Debug)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn tag(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn counter(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn real(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn cell(&mut self, c: Cell) {
        self.buf.extend_from_slice(&c.x.to_le_bytes());
        self.buf.extend_from_slice(&c.y.to_le_bytes());
    }

    pub fn opt_cell(&mut self, c: Option<Cell>) {
        match c {
            Some(c) => {
                self.tag(1);
                self.cell(c);
            }
            None => self.tag(0),
        }
    }

    pub fn cells(&mut self, cells: &[Cell]) {
        self.counter(cells.len() as u32);
        for &c in cells {
            self.cell(c);
        }
    }

    pub fn cell_report(&mut self, c: Cell, state: KnownState) {
        self.cell(c);
        self.tag(known_state_tag(state));
    }
}

pub fn known_state_tag(s: KnownState) -> u8 {
    match s {
        KnownState::Unknown => 0,
        KnownState::Free => 1,
        KnownState::Obstacle => 2,
    }
}

pub fn cell_state_tag(s: CellState) -> u8 {
    known_state_tag(s.into())
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() - self.pos < n {
            return Err(WireError::Truncated {
                offset: self.pos,
                needed: n - (self.buf.len() - self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn finish(self) -> Result<(), WireError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(WireError::Trailing(n)),
        }
    }

    pub fn tag(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub fn counter(&mut self) -> Result<u32, WireError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn real(&mut self) -> Result<f64, WireError> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(f64::from_le_bytes(a))
    }

    pub fn cell(&mut self) -> Result<Cell, WireError> {
        let b = self.take(4)?;
        Ok(Cell::new(u16::from_le_bytes([b[0], b[1]]), u16::from_le_bytes([b[2], b[3]])))
    }

    pub fn opt_cell(&mut self) -> Result<Option<Cell>, WireError> {
        let at = self.pos;
        match self.tag()? {
            0 => Ok(None),
            1 => Ok(Some(self.cell()?)),
            tag => Err(WireError::InvalidTag {
                what: "option",
                tag,
                offset: at,
            }),
        }
    }

    pub fn cells(&mut self) -> Result<Vec<Cell>, WireError> {
        let n = self.counter()? as usize;
        (0..n).map(|_| self.cell()).collect()
    }

    pub fn cell_report(&mut self) -> Result<(Cell, KnownState), WireError> {
        let c = self.cell()?;
        let at = self.pos;
        let s = match self.tag()? {
            0 => KnownState::Unknown,
            1 => KnownState::Free,
            2 => KnownState::Obstacle,
            tag => {
                return Err(WireError::InvalidTag {
                    what: "cell state",
                    tag,
                    offset: at,
                })
            }
        };
        Ok((c, s))
    }
}

/// A value with a canonical byte encoding.
pub trait Canonical {
    fn encode(&self, w: &mut Writer);

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.into_bytes()
    }

    fn encoded_len(&self) -> usize {
        self.to_bytes().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_widths() {
        let mut w = Writer::new();
        w.cell(Cell::new(1, 2));
        assert_eq!(w.len(), CELL_BYTES);
        w.cell_report(Cell::new(3, 4), KnownState::Obstacle);
        assert_eq!(w.len(), CELL_BYTES + CELL_REPORT_BYTES);
        w.counter(7);
        w.real(0.5);
        assert_eq!(w.len(), 4 + 5 + 4 + 8);
    }

    #[test]
    fn reader_reports_truncation() {
        let mut r = Reader::new(&[1, 2]);
        assert_eq!(r.counter(), Err(WireError::Truncated { offset: 0, needed: 2 }));
    }

    #[test]
    fn values_read_back() {
        let mut w = Writer::new();
        w.cells(&[Cell::new(9, 65535), Cell::new(0, 1)]);
        w.opt_cell(None);
        w.real(-3.25);
        let bytes = w.into_bytes();
        let mut r = Reader::new(&bytes);
        assert_eq!(r.cells().unwrap(), vec![Cell::new(9, 65535), Cell::new(0, 1)]);
        assert_eq!(r.opt_cell().unwrap(), None);
        assert_eq!(r.real().unwrap(), -3.25);
        r.finish().unwrap();
    }
}
