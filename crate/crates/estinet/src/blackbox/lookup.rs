use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, Write};

use super::functions::DIGIT_CLASSES;
use super::BbError;

/// Fully populated k-dimensional digit table `T: D^k -> D`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupTable {
    dimension: usize,
    entries: Vec<u8>,
}

impl LookupTable {
    /// Uniform random table; the seed fully determines the contents.
    pub fn random(dimension: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = DIGIT_CLASSES.pow(dimension as u32);
        let entries = (0..size)
            .map(|_| rng.random_range(0..DIGIT_CLASSES) as u8)
            .collect();
        LookupTable { dimension, entries }
    }

    /// k = 1 identity table, mostly for tests.
    pub fn identity() -> Self {
        LookupTable { dimension: 1, entries: (0..DIGIT_CLASSES as u8).collect() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, args: &[usize]) -> Result<usize, BbError> {
        if args.len() != self.dimension {
            return Err(BbError::Arity { expected: self.dimension, got: args.len() });
        }
        let mut idx = 0usize;
        for &a in args {
            if a >= DIGIT_CLASSES {
                return Err(BbError::Domain(format!("digit {a} outside 0-9")));
            }
            idx = idx * DIGIT_CLASSES + a;
        }
        Ok(self.entries[idx] as usize)
    }

    /// Plain-text form: first line `k`, then one `a_1 .. a_k value` line per
    /// entry in row-major (lexicographic) order.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.dimension)?;
        let mut args = vec![0usize; self.dimension];
        for &value in &self.entries {
            let fields: Vec<String> = args.iter().map(|a| a.to_string()).collect();
            writeln!(w, "{} {}", fields.join(" "), value)?;
            for slot in (0..self.dimension).rev() {
                args[slot] += 1;
                if args[slot] < DIGIT_CLASSES {
                    break;
                }
                args[slot] = 0;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self, BbError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| BbError::Parse("empty lookup table file".into()))??;
        let dimension: usize = header
            .trim()
            .parse()
            .map_err(|_| BbError::Parse(format!("bad dimension line {header:?}")))?;
        let size = DIGIT_CLASSES.pow(dimension as u32);
        let mut entries = vec![0u8; size];
        let mut seen = 0usize;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != dimension + 1 {
                return Err(BbError::Parse(format!(
                    "expected {} fields, got {}: {line:?}",
                    dimension + 1,
                    fields.len()
                )));
            }
            let mut idx = 0usize;
            for f in &fields[..dimension] {
                let a: usize = f
                    .parse()
                    .map_err(|_| BbError::Parse(format!("bad argument {f:?}")))?;
                if a >= DIGIT_CLASSES {
                    return Err(BbError::Parse(format!("argument {a} outside 0-9")));
                }
                idx = idx * DIGIT_CLASSES + a;
            }
            let value: u8 = fields[dimension]
                .parse()
                .map_err(|_| BbError::Parse(format!("bad value {:?}", fields[dimension])))?;
            if value >= DIGIT_CLASSES as u8 {
                return Err(BbError::Parse(format!("value {value} outside 0-9")));
            }
            entries[idx] = value;
            seen += 1;
        }
        if seen != size {
            return Err(BbError::Parse(format!(
                "table has {seen} entries, expected {size}"
            )));
        }
        Ok(LookupTable { dimension, entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_table_maps_seven_to_seven() {
        let t = LookupTable::identity();
        assert_eq!(t.get(&[7]).unwrap(), 7);
    }

    #[test]
    fn seeded_table_is_reproducible_and_full() {
        let a = LookupTable::random(2, 99);
        let b = LookupTable::random(2, 99);
        assert_eq!(a, b);
        assert_eq!(a.size(), 100);
        let q = a.get(&[3, 5]).unwrap();
        assert_eq!(a.get(&[3, 5]).unwrap(), q);
    }

    #[test]
    fn replacing_the_table_keeps_the_interface() {
        let a = LookupTable::random(2, 1);
        let b = LookupTable::random(2, 2);
        assert_ne!(a, b);
        assert!(a.get(&[4, 4]).is_ok());
        assert!(b.get(&[4, 4]).is_ok());
        assert!(a.get(&[4]).is_err());
    }

    #[test]
    fn text_roundtrip() {
        let t = LookupTable::random(2, 5);
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("2\n"));
        assert_eq!(text.lines().count(), 101);
        let back = LookupTable::read_text(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn truncated_table_is_rejected() {
        let t = LookupTable::random(1, 5);
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(8).collect::<Vec<_>>().join("\n");
        assert!(LookupTable::read_text(std::io::Cursor::new(truncated.into_bytes())).is_err());
    }
}
