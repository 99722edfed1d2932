//! Matrix containers: the CORM1 binary format and a plain CSV export.
//!
//! CORM1 layout (all little-endian):
//!
//! ```text
//! magic   6 bytes  "CORM1\0"
//! dim     u32
//! count   u64
//! data    count * dim * dim f64, row-major, one matrix after another
//! ```
//!
//! CSV writes each matrix as `dim` comma-separated lines, with a blank line
//! between consecutive matrices.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::model::CorrelationMatrix;

pub const CORM1_MAGIC: &[u8; 6] = b"CORM1\0";
pub const CORM1_HEADER_LEN: usize = 18;

/// Output format for matrix batches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    Corm1,
    Csv,
}

impl MatrixFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Corm1 => "corm1",
            MatrixFormat::Csv => "csv",
        }
    }
}

pub struct Corm1Writer<W: Write> {
    out: W,
    dim: usize,
    declared: u64,
    written: u64,
    buf: Vec<u8>,
}

impl<W: Write> Corm1Writer<W> {
    /// Writes the header; exactly `count` matrices must follow.
    pub fn new(mut out: W, dim: usize, count: u64) -> Result<Self> {
        let dim32 = u32::try_from(dim)
            .map_err(|_| Error::Format(format!("dimension {dim} exceeds u32")))?;
        out.write_all(CORM1_MAGIC)?;
        out.write_all(&dim32.to_le_bytes())?;
        out.write_all(&count.to_le_bytes())?;
        Ok(Self {
            out,
            dim,
            declared: count,
            written: 0,
            buf: Vec::with_capacity(dim * dim * 8),
        })
    }

    pub fn write(&mut self, m: &CorrelationMatrix) -> Result<()> {
        if m.dim() != self.dim {
            return Err(Error::Format(format!(
                "matrix dim {} in a dim-{} stream",
                m.dim(),
                self.dim
            )));
        }
        if self.written == self.declared {
            return Err(Error::Format(format!(
                "more than the declared {} matrices",
                self.declared
            )));
        }
        self.buf.clear();
        for x in m.as_slice() {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
        self.out.write_all(&self.buf)?;
        self.written += 1;
        Ok(())
    }

    /// Flushes and checks the declared count was met.
    pub fn finish(mut self) -> Result<W> {
        if self.written != self.declared {
            return Err(Error::Format(format!(
                "declared {} matrices but wrote {}",
                self.declared, self.written
            )));
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

pub struct Corm1Reader<R: Read> {
    input: R,
    dim: usize,
    count: u64,
    read: u64,
}

impl<R: Read> Corm1Reader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut header = [0u8; CORM1_HEADER_LEN];
        input
            .read_exact(&mut header)
            .map_err(|e| Error::Format(format!("short header: {e}")))?;
        if &header[..6] != CORM1_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let dim = u32::from_le_bytes(header[6..10].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(header[10..18].try_into().unwrap());
        if dim == 0 {
            return Err(Error::Format("zero dimension".into()));
        }
        Ok(Self {
            input,
            dim,
            count,
            read: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Reads the next matrix's raw entries without validation.
    pub fn next_raw(&mut self) -> Result<Option<Vec<f64>>> {
        if self.read == self.count {
            return Ok(None);
        }
        let mut bytes = vec![0u8; self.dim * self.dim * 8];
        self.input
            .read_exact(&mut bytes)
            .map_err(|e| Error::Format(format!("truncated at matrix {}: {e}", self.read)))?;
        self.read += 1;
        Ok(Some(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ))
    }
}

impl<R: Read> Iterator for Corm1Reader<R> {
    type Item = Result<CorrelationMatrix>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.next_raw() {
            Ok(Some(v)) => Some(CorrelationMatrix::from_row_major(self.dim, v)),
            Ok(None) => None,
            Err(e) => Some(Err(e)),
        }
    }
}

pub struct CsvMatrixWriter<W: Write> {
    out: W,
    first: bool,
}

impl<W: Write> CsvMatrixWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out, first: true }
    }

    pub fn write(&mut self, m: &CorrelationMatrix) -> Result<()> {
        if !self.first {
            writeln!(self.out)?;
        }
        self.first = false;
        let p = m.dim();
        for row in m.as_slice().chunks_exact(p) {
            let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(self.out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Parses a CSV matrix export back into validated matrices.
pub fn read_csv_matrices<R: BufRead>(input: R) -> Result<Vec<CorrelationMatrix>> {
    let mut out = Vec::new();
    let mut block: Vec<Vec<f64>> = Vec::new();
    let flush = |block: &mut Vec<Vec<f64>>, out: &mut Vec<CorrelationMatrix>| -> Result<()> {
        if block.is_empty() {
            return Ok(());
        }
        let p = block.len();
        if block.iter().any(|r| r.len() != p) {
            return Err(Error::Format(format!("non-square CSV block of {p} rows")));
        }
        out.push(CorrelationMatrix::from_row_major(p, block.concat())?);
        block.clear();
        Ok(())
    };
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            flush(&mut block, &mut out)?;
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad number {t:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        block.push(row);
    }
    flush(&mut block, &mut out)?;
    Ok(out)
}
