//! Word-vector interchange formats.
//!
//! Text format: a `<V> <dim>` header line followed by one line per token,
//! `<token> <f1> ... <fdim>`, space separated. Binary format: an ASCII
//! `<V> <dim>\n` header, then per token its bytes terminated by a single
//! space, `dim` little-endian `f32` values, and a newline.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::subword::{mean_of_rows, ngram_buckets, NGramConfig};

/// A named set of word vectors, optionally with n-gram bucket rows for
/// imputing vectors of unseen words.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorSet {
    name: String,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Matrix,
    subwords: Option<(NGramConfig, Matrix)>,
}

impl VectorSet {
    pub fn new(name: impl Into<String>, tokens: Vec<String>, matrix: Matrix) -> Result<Self> {
        if tokens.len() != matrix.rows() {
            return Err(Error::Format(format!(
                "{} tokens but {} vector rows",
                tokens.len(),
                matrix.rows()
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate token {t:?}")));
            }
        }
        Ok(VectorSet {
            name: name.into(),
            tokens,
            index,
            matrix,
            subwords: None,
        })
    }

    /// Attaches `cfg.buckets` rows of n-gram vectors.
    pub fn with_subwords(mut self, cfg: NGramConfig, buckets: Matrix) -> Self {
        assert_eq!(buckets.rows(), cfg.buckets, "one row per bucket");
        assert_eq!(buckets.cols(), self.dim(), "bucket dimension");
        self.subwords = Some((cfg, buckets));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn subwords(&self) -> Option<&(NGramConfig, Matrix)> {
        self.subwords.as_ref()
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index.get(token).map(|&i| self.matrix.row(i))
    }

    /// The stored vector of `token`, or one imputed from its n-gram buckets
    /// when the set carries them. Imputation yields the zero vector for
    /// words without n-grams.
    pub fn lookup(&self, token: &str) -> Option<Vec<f32>> {
        if let Some(v) = self.get(token) {
            return Some(v.to_vec());
        }
        self.impute(token)
    }

    fn impute(&self, token: &str) -> Option<Vec<f32>> {
        let (cfg, buckets) = self.subwords.as_ref()?;
        Some(mean_of_rows(buckets, &ngram_buckets(token, cfg)))
    }

    /// Fails unless the vectors have the advertised dimension.
    pub fn expect_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.dim(),
            });
        }
        Ok(())
    }
}

fn file_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn check_token(token: &str) -> Result<()> {
    if token.is_empty() || token.chars().any(char::is_whitespace) {
        return Err(Error::Format(format!(
            "token {token:?} cannot be written: empty or contains whitespace"
        )));
    }
    Ok(())
}

/// Formats `x` with six significant digits, like C's `%g`.
pub fn format_g6(x: f32) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let x = f64::from(x);
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{exp}")
    } else {
        let fixed = format!("{:.*}", (5 - exp) as usize, x);
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_owned()
        } else {
            fixed
        }
    }
}

pub fn read_text(path: impl AsRef<Path>) -> Result<VectorSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_text_from(BufReader::new(file), &path.display().to_string(), &file_name(path))
}

/// Reads the text format from `reader`; `source` names the input in error
/// messages.
pub fn read_text_from<R: BufRead>(reader: R, source: &str, name: &str) -> Result<VectorSet> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: source.to_owned(),
        line,
        msg,
    };

    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| Error::io(source, e))?,
        None => return Err(parse_err(1, "missing header".into())),
    };
    let (v, dim) = parse_header(&header).ok_or_else(|| parse_err(1, format!("bad header {header:?}")))?;

    let mut tokens = Vec::with_capacity(v);
    let mut data = Vec::with_capacity(v * dim);
    let mut seen = HashMap::with_capacity(v);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if tokens.len() == v {
            return Err(parse_err(lineno, format!("more than {v} vectors")));
        }
        let mut fields = line.split_ascii_whitespace();
        let token = fields.next().expect("non-empty line").to_owned();
        let start = data.len();
        for f in fields {
            let x: f32 = f
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid number {f:?}")))?;
            if !x.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value {f:?}")));
            }
            data.push(x);
        }
        let got = data.len() - start;
        if got != dim {
            return Err(parse_err(lineno, format!("expected {dim} values, found {got}")));
        }
        if seen.insert(token.clone(), tokens.len()).is_some() {
            return Err(parse_err(lineno, format!("duplicate token {token:?}")));
        }
        tokens.push(token);
    }
    if tokens.len() != v {
        return Err(parse_err(
            tokens.len() + 1,
            format!("header declares {v} vectors, found {}", tokens.len()),
        ));
    }
    VectorSet::new(name, tokens, Matrix::from_vec(v, dim, data))
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_ascii_whitespace();
    let v = it.next()?.parse().ok()?;
    let dim = it.next()?.parse().ok()?;
    if it.next().is_some() || dim == 0 {
        return None;
    }
    Some((v, dim))
}

pub fn write_text(set: &VectorSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_text_to(set, &mut w).and_then(|_| w.flush().map_err(|e| Error::io(path, e)))
}

pub fn write_text_to<W: Write>(set: &VectorSet, w: &mut W) -> Result<()> {
    let io = |e| Error::io("<text vectors>", e);
    writeln!(w, "{} {}", set.len(), set.dim()).map_err(io)?;
    for (token, row) in set.tokens.iter().zip(set.matrix.iter_rows()) {
        check_token(token)?;
        let mut line = token.clone();
        for &x in row {
            line.push(' ');
            line.push_str(&format_g6(x));
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    Ok(())
}

pub fn read_binary(path: impl AsRef<Path>) -> Result<VectorSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_binary_from(BufReader::new(file), &path.display().to_string(), &file_name(path))
}

pub fn read_binary_from<R: BufRead>(mut reader: R, source: &str, name: &str) -> Result<VectorSet> {
    let truncated = |what: String| Error::Format(format!("{source}: truncated file: {what}"));

    let mut header = Vec::new();
    reader
        .read_until(b'\n', &mut header)
        .map_err(|e| Error::io(source, e))?;
    if header.last() != Some(&b'\n') {
        return Err(truncated("missing header".into()));
    }
    let header_str = String::from_utf8_lossy(&header);
    let (v, dim) = parse_header(header_str.trim_end()).ok_or_else(|| Error::Parse {
        path: source.to_owned(),
        line: 1,
        msg: format!("bad header {:?}", header_str.trim_end()),
    })?;

    let mut tokens = Vec::with_capacity(v);
    let mut data = Vec::with_capacity(v * dim);
    let mut token = Vec::new();
    for i in 0..v {
        token.clear();
        loop {
            let byte = match reader.read_u8() {
                Ok(b) => b,
                Err(_) => return Err(truncated(format!("in token {i}"))),
            };
            match byte {
                b' ' => break,
                b'\n' if token.is_empty() => continue,
                b => token.push(b),
            }
        }
        if token.is_empty() {
            return Err(Error::Format(format!("{source}: empty token at entry {i}")));
        }
        let start = data.len();
        data.resize(start + dim, 0.0);
        reader
            .read_f32_into::<LittleEndian>(&mut data[start..])
            .map_err(|_| truncated(format!("in vector {i}")))?;
        if data[start..].iter().any(|x| !x.is_finite()) {
            return Err(Error::Format(format!("{source}: non-finite value in vector {i}")));
        }
        tokens.push(String::from_utf8_lossy(&token).into_owned());
    }
    VectorSet::new(name, tokens, Matrix::from_vec(v, dim, data))
}

pub fn write_binary(set: &VectorSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_binary_to(set, &mut w).and_then(|_| w.flush().map_err(|e| Error::io(path, e)))
}

pub fn write_binary_to<W: Write>(set: &VectorSet, w: &mut W) -> Result<()> {
    let io = |e| Error::io("<binary vectors>", e);
    writeln!(w, "{} {}", set.len(), set.dim()).map_err(io)?;
    for (token, row) in set.tokens.iter().zip(set.matrix.iter_rows()) {
        check_token(token)?;
        w.write_all(token.as_bytes()).map_err(io)?;
        w.write_all(b" ").map_err(io)?;
        for &x in row {
            w.write_f32::<LittleEndian>(x).map_err(io)?;
        }
        w.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorFormat {
    Text,
    Binary,
}

impl VectorFormat {
    /// `.bin` files are binary, everything else is text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => VectorFormat::Binary,
            _ => VectorFormat::Text,
        }
    }
}

pub fn read_vectors(path: impl AsRef<Path>, format: VectorFormat) -> Result<VectorSet> {
    match format {
        VectorFormat::Text => read_text(path),
        VectorFormat::Binary => read_binary(path),
    }
}

pub fn write_vectors(set: &VectorSet, path: impl AsRef<Path>, format: VectorFormat) -> Result<()> {
    match format {
        VectorFormat::Text => write_text(set, path),
        VectorFormat::Binary => write_binary(set, path),
    }
}

/// Treatment of vocabulary tokens missing from a vector set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OovPolicy {
    /// Mark the token absent.
    Skip,
    /// Give the token a zero row.
    Zero,
    /// Compose a row from the set's n-gram buckets; zero when it has none.
    SubwordImpute,
}

/// Vectors of a vector set laid out by vocabulary id.
#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub matrix: Matrix,
    /// Whether each vocabulary row carries a vector. False only for tokens
    /// dropped by [`OovPolicy::Skip`].
    pub present: Vec<bool>,
    /// Fraction of vocabulary tokens found verbatim in the vector set.
    pub coverage: f64,
}

impl Alignment {
    /// Drops absent tokens, returning a reduced vocabulary and its rows.
    pub fn restrict(&self, vocab: &Vocabulary) -> Result<(Vocabulary, Matrix)> {
        let kept = Vocabulary::from_counts(
            vocab
                .words()
                .iter()
                .enumerate()
                .filter(|&(id, _)| self.present[id])
                .map(|(id, w)| (w.clone(), vocab.count(id))),
            1,
        )?;
        let matrix = Matrix::from_rows(
            self.matrix.cols(),
            kept.words()
                .iter()
                .map(|w| self.matrix.row(vocab.id(w).expect("kept word is in vocab"))),
        );
        Ok((kept, matrix))
    }
}

/// Looks up every vocabulary token in `set`. Token strings are compared
/// verbatim; no normalization is applied to either side.
pub fn align(set: &VectorSet, vocab: &Vocabulary, policy: OovPolicy) -> Alignment {
    let dim = set.dim();
    let mut matrix = Matrix::zeros(vocab.len(), dim);
    let mut present = vec![true; vocab.len()];
    let mut matched = 0usize;
    for (id, word) in vocab.words().iter().enumerate() {
        if let Some(v) = set.get(word) {
            matrix.row_mut(id).copy_from_slice(v);
            matched += 1;
            continue;
        }
        match policy {
            OovPolicy::Skip => present[id] = false,
            OovPolicy::Zero => {}
            OovPolicy::SubwordImpute => {
                if let Some(v) = set.impute(word) {
                    matrix.row_mut(id).copy_from_slice(&v);
                }
            }
        }
    }
    Alignment {
        matrix,
        present,
        coverage: matched as f64 / vocab.len() as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse_text(s: &str) -> Result<VectorSet> {
        read_text_from(Cursor::new(s), "mem", "mem")
    }

    #[test]
    fn text_parse() {
        let s = parse_text("2 3\na 1 0 0\nb 0 1 0\n").unwrap();
        assert_eq!((s.len(), s.dim()), (2, 3));
        assert_eq!(s.get("a").unwrap(), [1.0, 0.0, 0.0]);
        assert_eq!(s.get("b").unwrap(), [0.0, 1.0, 0.0]);
        let s = parse_text("1 2\nx 1.5e-3 -2E2").unwrap();
        assert_eq!(s.get("x").unwrap(), [1.5e-3, -200.0]);
    }

    #[test]
    fn text_errors() {
        match parse_text("2 3\na 1 0 0\nb 0 1\n") {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("expected 3"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_text("2 1\na 1\na 2\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(parse_text("1 1\na NaN\n").is_err());
        assert!(parse_text("1 1\na inf\n").is_err());
        assert!(parse_text("2 1\na 1\n").is_err());
        assert!(parse_text("x y\n").is_err());
        assert!(parse_text("").is_err());
    }

    #[test]
    fn g6_formatting() {
        assert_eq!(format_g6(0.0), "0");
        assert_eq!(format_g6(1.0), "1");
        assert_eq!(format_g6(-0.5), "-0.5");
        assert_eq!(format_g6(123456.7), "123457");
        assert_eq!(format_g6(1234567.0), "1.23457e6");
        assert_eq!(format_g6(0.0001234567), "0.000123457");
        assert_eq!(format_g6(0.00001234567), "1.23457e-5");
        assert_eq!(format_g6(9.999996), "10");
    }

    #[test]
    fn binary_payload_bytes() {
        let set = VectorSet::new("t", vec!["a".into()], Matrix::from_rows(2, [[1.0, -1.0]])).unwrap();
        let mut buf = Vec::new();
        write_binary_to(&set, &mut buf).unwrap();
        let mut expected = b"1 2\na ".to_vec();
        // IEEE-754 single precision: 1.0 = 0x3F800000, -1.0 = 0xBF800000.
        expected.extend_from_slice(&[0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x80, 0xBF]);
        expected.push(b'\n');
        assert_eq!(buf, expected);
    }

    #[test]
    fn binary_truncation() {
        let err = read_binary_from(Cursor::new(b"2 2\n".to_vec()), "mem", "m").unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
        let mut bytes = b"1 2\na ".to_vec();
        bytes.extend_from_slice(&[0, 0, 128]);
        assert!(read_binary_from(Cursor::new(bytes), "mem", "m").is_err());
        assert!(read_binary_from(Cursor::new(b"1 2".to_vec()), "mem", "m").is_err());
    }

    #[test]
    fn binary_without_trailing_newlines() {
        let mut bytes = b"2 1\na ".to_vec();
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        bytes.extend_from_slice(b"b ");
        bytes.extend_from_slice(&2.0f32.to_le_bytes());
        let s = read_binary_from(Cursor::new(bytes), "mem", "m").unwrap();
        assert_eq!(s.get("b").unwrap(), [2.0]);
    }

    #[test]
    fn unwritable_tokens() {
        let set = VectorSet::new("t", vec!["a b".into()], Matrix::zeros(1, 1)).unwrap();
        assert!(write_text_to(&set, &mut Vec::new()).is_err());
        assert!(write_binary_to(&set, &mut Vec::new()).is_err());
    }

    #[test]
    fn dim_expectation() {
        let s = parse_text("1 3\na 1 2 3\n").unwrap();
        assert!(s.expect_dim(3).is_ok());
        assert!(matches!(
            s.expect_dim(300),
            Err(Error::DimensionMismatch { expected: 300, got: 3 })
        ));
    }

    #[test]
    fn alignment_policies() {
        let set = parse_text("2 2\na 1 2\nb 3 4\n").unwrap();
        let vocab = Vocabulary::from_counts([("a", 3u64), ("b", 2), ("c", 1)], 1).unwrap();

        let full = align(
            &set,
            &Vocabulary::from_counts([("a", 1u64), ("b", 1)], 1).unwrap(),
            OovPolicy::Zero,
        );
        assert_eq!(full.coverage, 1.0);
        assert_eq!(full.matrix.row(0), [1.0, 2.0]);

        let zero = align(&set, &vocab, OovPolicy::Zero);
        assert_eq!(zero.coverage, 2.0 / 3.0);
        assert_eq!(zero.matrix.row(2), [0.0, 0.0]);
        assert!(zero.present.iter().all(|&p| p));

        let skip = align(&set, &vocab, OovPolicy::Skip);
        assert_eq!(skip.present, [true, true, false]);
        let (kept, m) = skip.restrict(&vocab).unwrap();
        assert_eq!(kept.len(), 2);
        assert!(!kept.contains("c"));
        assert_eq!(m.row(kept.id("b").unwrap()), [3.0, 4.0]);

        // No bucket rows: imputation falls back to zero.
        let imp = align(&set, &vocab, OovPolicy::SubwordImpute);
        assert_eq!(imp.matrix.row(2), [0.0, 0.0]);
    }

    #[test]
    fn subword_imputation() {
        let cfg = NGramConfig {
            minn: 2,
            maxn: 2,
            buckets: 7,
        };
        let buckets = Matrix::from_rows(1, (0..7).map(|i| [i as f32]));
        let set = parse_text("1 1\nxy 9\n").unwrap().with_subwords(cfg, buckets);
        let ids = ngram_buckets("cat", &cfg);
        let expected = ids.iter().map(|&b| b as f32).sum::<f32>() / ids.len() as f32;
        assert!((set.lookup("cat").unwrap()[0] - expected).abs() < 1e-6);
        assert_eq!(set.lookup("xy").unwrap(), [9.0]);
        let vocab = Vocabulary::from_counts([("cat", 1u64)], 1).unwrap();
        let a = align(&set, &vocab, OovPolicy::SubwordImpute);
        assert_eq!(a.coverage, 0.0);
        assert!((a.matrix.row(0)[0] - expected).abs() < 1e-6);
    }
}
