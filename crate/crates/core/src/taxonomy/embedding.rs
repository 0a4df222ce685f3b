use std::collections::BTreeMap;
use std::io::BufRead;

use super::TaxonomyError;

/// Word vectors keyed by lemma. All vectors share `dim` and none is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self, TaxonomyError> {
        if dim == 0 {
            return Err(TaxonomyError::Embedding("dimension must be positive".into()));
        }
        Ok(Self { dim, vectors: BTreeMap::new() })
    }

    /// An empty table, for running integration without a vector file.
    pub fn empty() -> Self {
        Self { dim: 1, vectors: BTreeMap::new() }
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<(), TaxonomyError> {
        let word = word.into();
        if vector.len() != self.dim {
            return Err(TaxonomyError::Embedding(format!(
                "`{word}` has {} components, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().all(|&x| x == 0.0) {
            return Err(TaxonomyError::Embedding(format!("`{word}` is the zero vector")));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(TaxonomyError::Embedding(format!("`{word}` has a non-finite component")));
        }
        self.vectors.insert(word, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// Header `<count> <dim>`, then `<word> <f1> ... <fdim>` per line.
    pub fn load<R: BufRead>(reader: R) -> Result<Self, TaxonomyError> {
        let mut lines = reader.lines().enumerate();
        let err = |line: usize, message: String| TaxonomyError::Parse { line, message };
        let (count, dim) = match lines.next() {
            Some((_, line)) => {
                let line = line?;
                let nums: Vec<usize> = line
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|e| err(1, format!("bad header: {e}")))?;
                match nums[..] {
                    [c, d] => (c, d),
                    _ => return Err(err(1, "header must be `<count> <dim>`".into())),
                }
            }
            None => return Err(err(1, "missing header".into())),
        };
        let mut table = EmbeddingTable::new(dim)?;
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap().to_string();
            let vector: Vec<f64> = fields
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| err(i + 1, format!("bad component: {e}")))?;
            table.insert(word, vector).map_err(|e| err(i + 1, e.to_string()))?;
        }
        if table.len() != count {
            return Err(err(1, format!("header declares {count} vectors, found {}", table.len())));
        }
        Ok(table)
    }
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_table() {
        let t = EmbeddingTable::load("2 2\ncat 1 0\ncar 0 1.5\n".as_bytes()).unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.get("car"), Some(&[0.0, 1.5][..]));
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(EmbeddingTable::load("1 2\ncat 1\n".as_bytes()).is_err());
        assert!(EmbeddingTable::load("1 2\ncat 0 0\n".as_bytes()).is_err());
        assert!(EmbeddingTable::load("2 2\ncat 1 0\n".as_bytes()).is_err());
        assert!(EmbeddingTable::load("1 2\ncat 1 x\n".as_bytes()).is_err());
        assert!(EmbeddingTable::load("".as_bytes()).is_err());
    }

    #[test]
    fn cosine_values() {
        assert!((cosine(&[0.9, 0.1], &[1.0, 0.0]) - 0.993_883_734_673_9).abs() < 1e-12);
        assert!((cosine(&[0.9, 0.1], &[0.0, 1.0]) - 0.110_431_526_074_8).abs() < 1e-12);
    }
}
